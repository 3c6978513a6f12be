//! Complex gamma-family primitives used by the Mellin-Barnes kernels.

use num_complex::Complex64;

use crate::error::{Error, Result};

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Returns `true` when `z` lies within `1e-12` of a nonpositive integer.
pub fn near_gamma_pole(z: Complex64) -> bool {
    z.im.abs() < 1e-12 && z.re < 0.5 && (z.re - z.re.round()).abs() < 1e-12
}

fn lanczos_ln_gamma(z: Complex64) -> Complex64 {
    // Valid for Re z >= 0.5; each piece stays on the principal branch there.
    let zm1 = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (zm1 + i as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (zm1 + 0.5) * t.ln() - t + acc.ln()
}

/// Principal branch of log Γ(z).
///
/// For `Re z < 0.5` the value is obtained by upward recurrence, which keeps the
/// branch continuous off the negative real axis (on the axis itself the limit
/// from above is returned).
pub fn log_gamma_complex(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("log_gamma of non-finite {z}")));
    }
    if near_gamma_pole(z) {
        return Err(Error::GammaPole { re: z.re, im: z.im });
    }
    if z.re >= 0.5 {
        return Ok(lanczos_ln_gamma(z));
    }
    let shift = (0.5 - z.re).ceil() as usize;
    let mut correction = Complex64::new(0.0, 0.0);
    for k in 0..shift {
        correction += (z + k as f64).ln();
    }
    Ok(lanczos_ln_gamma(z + shift as f64) - correction)
}

pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    Ok(log_gamma_complex(z)?.exp())
}

/// log Γ(x) for real x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    lanczos_ln_gamma(Complex64::new(x, 0.0)).re
}

/// Γ(x) for real positive x.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

const IG_EPS: f64 = 1e-16;
const IG_MAX_ITER: usize = 20_000;

/// Lower incomplete gamma γ(s, x) by its power series, x > 0.
fn lower_series(s: Complex64, x: f64) -> Result<Complex64> {
    let mut ap = s;
    let mut del = s.inv();
    let mut sum = del;
    for _ in 0..IG_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.norm() <= sum.norm() * IG_EPS {
            let prefactor = (s * x.ln() - x).exp();
            return Ok(sum * prefactor);
        }
    }
    Err(Error::NonConvergence(format!(
        "lower incomplete gamma series at s = {s}, x = {x}"
    )))
}

/// Upper incomplete gamma Γ(s, x) by Legendre's continued fraction (modified Lentz).
fn upper_continued_fraction(s: Complex64, x: f64) -> Result<Complex64> {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(x + 1.0, 0.0) - s;
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..IG_MAX_ITER {
        let fi = i as f64;
        let an = -fi * (Complex64::new(fi, 0.0) - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = Complex64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = Complex64::new(TINY, 0.0);
        }
        d = d.inv();
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < IG_EPS {
            return Ok(h * (s * x.ln() - x).exp());
        }
    }
    Err(Error::NonConvergence(format!(
        "upper incomplete gamma continued fraction at s = {s}, x = {x}"
    )))
}

/// Whether the continued fraction is the better route for Γ(s, x).
fn prefer_continued_fraction(s: Complex64, x: f64) -> bool {
    x > 1.5 && x > s.re + 1.0 && x * x > 0.5 * s.im * s.im
}

/// Upper incomplete gamma Γ(s, x) for complex s and real x ≥ 0.
pub fn upper_incomplete_gamma(s: Complex64, x: f64) -> Result<Complex64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "upper incomplete gamma needs x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return gamma_complex(s);
    }
    if x.is_infinite() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if prefer_continued_fraction(s, x) {
        return upper_continued_fraction(s, x);
    }
    if near_gamma_pole(s) {
        return e_n_route((-s.re.round()) as usize, x);
    }
    Ok(gamma_complex(s)? - lower_series(s, x)?)
}

/// Γ(-k, x) for integer k ≥ 0 via the exponential integral and downward steps.
fn e_n_route(k: usize, x: f64) -> Result<Complex64> {
    // Γ(0, x) = E1(x); Γ(-j-1, x) = (x^{-j-1} e^{-x} - Γ(-j, x)) / (j + 1).
    let mut value = exp_integral_e1(x)?;
    for j in 0..k {
        let a = -(j as f64) - 1.0;
        value = ((a * x.ln() - x).exp() - value) / (j as f64 + 1.0);
    }
    Ok(Complex64::new(value, 0.0))
}

/// Exponential integral E1(x) for x > 0.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("E1 needs x > 0, got {x}")));
    }
    if x <= 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        Ok(-EULER - x.ln() + sum)
    } else {
        Ok(upper_continued_fraction(Complex64::new(0.0, 0.0), x)?.re)
    }
}
