//! Bivariate Fox H-function by tensor-product quadrature over two vertical contours.
//!
//! The value is
//! (2πi)^{-2} ∫∫ Φ(s, t) θ_s(s) θ_t(t) x^{-s} y^{-t} ds dt
//! where Φ collects the coupled gamma factors and θ_s, θ_t are ordinary H kernels.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::contour::{GammaPair, IncompleteHSpec, Kernel};
use super::fox::{graded_breaks, half_length, log_magnitude, panel_nodes, ROUNDOFF};
use super::gamma::log_gamma_complex;
use crate::error::{Error, Result};
use crate::result::{Diagnostics, MetricResult};

/// Coupled parameter (a, α; A) entering Γ(·) through a + α s + A t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateTerm {
    pub a: f64,
    pub s_scale: f64,
    pub t_scale: f64,
}

impl BivariateTerm {
    pub const fn new(a: f64, s_scale: f64, t_scale: f64) -> Self {
        BivariateTerm { a, s_scale, t_scale }
    }
}

/// Orders and parameter lists of a one-variable H kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBlock {
    pub m: usize,
    pub n: usize,
    pub upper: Vec<GammaPair>,
    pub lower: Vec<GammaPair>,
}

/// H^{0,n₁; m₂,n₂; m₃,n₃}_{p₁,q₁; p₂,q₂; p₃,q₃}(x, y).
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateHSpec {
    /// The first `n1` upper coupled terms contribute Γ(1 − a − αs − At) to the
    /// numerator; the remaining ones 1/Γ(a + αs + At).
    pub n1: usize,
    pub outer_upper: Vec<BivariateTerm>,
    /// Each contributes 1/Γ(1 − b − βs − Bt).
    pub outer_lower: Vec<BivariateTerm>,
    pub s_block: KernelBlock,
    pub t_block: KernelBlock,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy)]
struct Coupled {
    shift: f64,
    s_slope: f64,
    t_slope: f64,
    numerator: bool,
}

impl Coupled {
    fn arg(&self, s: Complex64, t: Complex64) -> Complex64 {
        self.shift + self.s_slope * s + self.t_slope * t
    }
}

/// Options for [`bivariate_fox_h_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateOptions {
    /// Explicit (c_s, c_t); planned automatically when `None`.
    pub contour: Option<(f64, f64)>,
    pub rel_tol: f64,
    pub max_level: usize,
}

impl Default for BivariateOptions {
    fn default() -> Self {
        BivariateOptions {
            contour: None,
            rel_tol: 1e-11,
            max_level: 8,
        }
    }
}

struct Prepared {
    s_kernel: Kernel,
    t_kernel: Kernel,
    coupled: Vec<Coupled>,
    ln_x: Complex64,
    ln_y: Complex64,
}

fn block_kernel(block: &KernelBlock, arg: f64, which: &str) -> Result<Kernel> {
    let spec = IncompleteHSpec::new(
        block.m,
        block.n,
        block.upper.iter().map(|&p| p.into()).collect(),
        block.lower.iter().map(|&p| p.into()).collect(),
        arg,
    );
    Kernel::from_spec(&spec).map_err(|e| match e {
        Error::InvalidSpec(msg) => Error::InvalidSpec(format!("{which}-block: {msg}")),
        other => other,
    })
}

impl Prepared {
    fn new(spec: &BivariateHSpec) -> Result<Self> {
        if !(spec.x > 0.0 && spec.y > 0.0 && spec.x.is_finite() && spec.y.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bivariate arguments must be positive and finite, got ({}, {})",
                spec.x, spec.y
            )));
        }
        if spec.n1 > spec.outer_upper.len() {
            return Err(Error::InvalidSpec("n1 exceeds the coupled upper list".into()));
        }
        let s_kernel = block_kernel(&spec.s_block, spec.x, "s")?;
        let t_kernel = block_kernel(&spec.t_block, spec.y, "t")?;
        let mut coupled = Vec::new();
        for (i, term) in spec.outer_upper.iter().enumerate() {
            check_term(term)?;
            coupled.push(if i < spec.n1 {
                Coupled { shift: 1.0 - term.a, s_slope: -term.s_scale, t_slope: -term.t_scale, numerator: true }
            } else {
                Coupled { shift: term.a, s_slope: term.s_scale, t_slope: term.t_scale, numerator: false }
            });
        }
        for term in &spec.outer_lower {
            check_term(term)?;
            coupled.push(Coupled {
                shift: 1.0 - term.a,
                s_slope: -term.s_scale,
                t_slope: -term.t_scale,
                numerator: false,
            });
        }
        let prepared = Prepared {
            s_kernel,
            t_kernel,
            coupled,
            ln_x: Complex64::new(spec.x.ln(), 0.0),
            ln_y: Complex64::new(spec.y.ln(), 0.0),
        };
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (axis, block_rate) in [("s", prepared.s_kernel.decay_rate()), ("t", prepared.t_kernel.decay_rate())] {
            let coupled_rate: f64 = prepared
                .coupled
                .iter()
                .map(|c| {
                    let slope = if axis == "s" { c.s_slope } else { c.t_slope };
                    if c.numerator { half_pi * slope.abs() } else { -half_pi * slope.abs() }
                })
                .sum();
            if block_rate <= 0.0 || block_rate + coupled_rate <= 0.0 {
                return Err(Error::NonDecaying(format!(
                    "bivariate integrand does not decay along the {axis}-axis"
                )));
            }
        }
        Ok(prepared)
    }

    fn log_coupled(&self, s: Complex64, t: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in &self.coupled {
            let v = log_gamma_complex(c.arg(s, t))?;
            acc += if c.numerator { v } else { -v };
        }
        Ok(acc)
    }

    fn coupled_clearance(&self, cs: f64, ct: f64) -> f64 {
        self.coupled
            .iter()
            .filter(|c| c.numerator)
            .map(|c| c.shift + c.s_slope * cs + c.t_slope * ct)
            .fold(f64::INFINITY, f64::min)
    }

    fn objective(&self, cs: f64, ct: f64) -> f64 {
        let s = Complex64::new(cs, 0.0);
        let t = Complex64::new(ct, 0.0);
        let total = (|| -> Result<f64> {
            Ok(log_magnitude(&self.s_kernel, self.ln_x, s)?
                + log_magnitude(&self.t_kernel, self.ln_y, t)?
                + self.log_coupled(s, t)?.re)
        })();
        match total {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    fn feasible(&self, cs: f64, ct: f64) -> bool {
        cs > self.s_kernel.lo && cs < self.s_kernel.hi && ct > self.t_kernel.lo && ct < self.t_kernel.hi
            && self.coupled_clearance(cs, ct) > 0.0
    }

    fn plan(&self) -> Result<(f64, f64)> {
        const MARGIN: f64 = 0.02;
        const RANGE: f64 = 30.0;
        const GRID: usize = 24;
        let span = |lo: f64, hi: f64| -> Option<(f64, f64)> {
            let (a, b) = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let m = MARGIN.min(0.25 * (hi - lo));
                    (lo + m, hi - m)
                }
                (true, false) => (lo + MARGIN, lo + RANGE),
                (false, true) => (hi - RANGE, hi - MARGIN),
                (false, false) => (-RANGE / 2.0, RANGE / 2.0),
            };
            (b > a).then_some((a, b))
        };
        let cheb = |a: f64, b: f64, k: usize| a + (b - a) * 0.5 * (1.0 - (PI * k as f64 / GRID as f64).cos());
        let (sa, sb) = span(self.s_kernel.lo, self.s_kernel.hi).ok_or(Error::NoSeparatingContour {
            left: self.s_kernel.lo,
            right: self.s_kernel.hi,
        })?;
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..=GRID {
            let cs = cheb(sa, sb, i);
            let mut t_hi = self.t_kernel.hi;
            for c in self.coupled.iter().filter(|c| c.numerator) {
                // shift + s_slope·cs + t_slope·ct > 0 with t_slope < 0
                t_hi = t_hi.min((c.shift + c.s_slope * cs) / -c.t_slope);
            }
            let Some((ta, tb)) = span(self.t_kernel.lo, t_hi) else { continue };
            for k in 0..=GRID {
                let ct = cheb(ta, tb, k);
                if !self.feasible(cs, ct) {
                    continue;
                }
                let v = self.objective(cs, ct);
                if v.is_finite() && best.is_none_or(|b| v < b.2) {
                    best = Some((cs, ct, v));
                }
            }
        }
        best.map(|(cs, ct, _)| (cs, ct)).ok_or(Error::NoSeparatingContour {
            left: self.t_kernel.lo,
            right: self.t_kernel.hi,
        })
    }
}

fn check_term(term: &BivariateTerm) -> Result<()> {
    if !(term.a.is_finite() && term.s_scale > 0.0 && term.t_scale > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "coupled term needs finite shift and positive scales, got {term:?}"
        )));
    }
    Ok(())
}

pub fn bivariate_fox_h(spec: &BivariateHSpec) -> Result<MetricResult> {
    bivariate_fox_h_with(spec, &BivariateOptions::default())
}

pub fn bivariate_fox_h_with(spec: &BivariateHSpec, opts: &BivariateOptions) -> Result<MetricResult> {
    let prep = Prepared::new(spec)?;
    let (cs, ct) = match opts.contour {
        Some((cs, ct)) => {
            if !prep.feasible(cs, ct) {
                return Err(Error::NoSeparatingContour { left: cs, right: ct });
            }
            (cs, ct)
        }
        None => prep.plan()?,
    };
    let s0 = Complex64::new(cs, 0.0);
    let t0 = Complex64::new(ct, 0.0);
    let guard = prep
        .s_kernel
        .nearest_pole(cs)
        .min(prep.t_kernel.nearest_pole(ct))
        .min(prep.coupled_clearance(cs, ct));
    if guard < 1e-6 {
        return Err(Error::PoleOnContour { abscissa: cs, distance: guard });
    }

    // Truncation per axis from the block kernels alone: the coupled numerator
    // gammas are bounded by their values on the real axis.
    let ls_up = half_length(&prep.s_kernel, prep.ln_x, cs, 1.0)?;
    let ls_down = half_length(&prep.s_kernel, prep.ln_x, cs, -1.0)?;
    let lt = half_length(&prep.t_kernel, prep.ln_y, ct, 1.0)?;
    let coupled_s_gap = prep
        .coupled
        .iter()
        .filter(|c| c.numerator)
        .map(|c| c.arg(s0, t0).re / c.s_slope.abs())
        .fold(f64::INFINITY, f64::min);
    let coupled_t_gap = prep
        .coupled
        .iter()
        .filter(|c| c.numerator)
        .map(|c| c.arg(s0, t0).re / c.t_slope.abs())
        .fold(f64::INFINITY, f64::min);
    let s_first = 0.5 * prep.s_kernel.nearest_feature(cs).min(coupled_s_gap);
    let t_first = 0.5 * prep.t_kernel.nearest_feature(ct).min(coupled_t_gap);
    let s_up = graded_breaks(s_first, ls_up);
    let s_down = graded_breaks(s_first, ls_down);
    let t_breaks = graded_breaks(t_first, lt);

    let shift = log_magnitude(&prep.s_kernel, prep.ln_x, s0)?
        + log_magnitude(&prep.t_kernel, prep.ln_y, t0)?
        + prep.log_coupled(s0, t0)?.re;

    let s_nodes = |level: usize| -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = panel_nodes(&s_down, level).into_iter().map(|(y, w)| (-y, w)).collect();
        v.reverse();
        v.extend(panel_nodes(&s_up, level));
        v
    };

    let evaluate = |ls: usize, lt: usize| -> Result<(f64, f64, usize)> {
        let s_pts = s_nodes(ls);
        let t_pts = panel_nodes(&t_breaks, lt);
        let t_vals: Vec<(Complex64, Complex64, f64)> = t_pts
            .iter()
            .map(|&(y, w)| {
                let t = Complex64::new(ct, y);
                Ok((t, prep.t_kernel.log_phi(t)? - t * prep.ln_y, w))
            })
            .collect::<Result<_>>()?;
        let rows: Vec<Result<(Complex64, f64)>> = s_pts
            .par_iter()
            .map(|&(y, w)| {
                let s = Complex64::new(cs, y);
                let a = prep.s_kernel.log_phi(s)? - s * prep.ln_x;
                let mut row = Complex64::new(0.0, 0.0);
                let mut row_abs = 0.0;
                for &(t, log_b, wt) in &t_vals {
                    let g = (a + log_b + prep.log_coupled(s, t)? - shift).exp() * wt;
                    row += g;
                    row_abs += g.norm();
                }
                Ok((row * w, row_abs * w))
            })
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        let mut total_abs = 0.0;
        for r in rows {
            let (v, a) = r?;
            total += v;
            total_abs += a;
        }
        // (2πi)^{-2}·(i)^2 = 1/(4π²); the t-half-line is doubled through conjugation.
        let scale = 1.0 / (2.0 * PI * PI);
        Ok((total.re * scale, total_abs * scale, s_pts.len() * t_pts.len()))
    };

    let converge = |fixed: usize, along_s: bool| -> Result<(usize, f64, f64, f64, usize)> {
        let at = |l: usize| if along_s { evaluate(l, fixed) } else { evaluate(fixed, l) };
        let (mut prev, _, _) = at(0)?;
        for level in 1..=opts.max_level {
            let (cur, abs, nodes) = at(level)?;
            let diff = (cur - prev).abs();
            if diff <= (opts.rel_tol * cur.abs()).max(ROUNDOFF * abs) {
                return Ok((level, cur, diff, abs, nodes));
            }
            prev = cur;
        }
        Err(Error::NonConvergence(format!(
            "bivariate quadrature along the {}-axis did not settle",
            if along_s { "s" } else { "t" }
        )))
    };
    let (s_level, _, s_diff, _, _) = converge(0, true)?;
    let (_, value, t_diff, abs, nodes) = converge(s_level, false)?;
    let factor = shift.exp();
    if !factor.is_finite() {
        return Err(Error::Domain(format!(
            "bivariate H magnitude exp({shift:.1}) overflows double precision"
        )));
    }
    let error = (s_diff.max(t_diff) + 2.0 * ROUNDOFF * abs) * factor;
    Ok(MetricResult::new(
        value * factor,
        error,
        Diagnostics {
            contours: vec![cs, ct],
            nodes,
            terms: 1,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{fox_h, HFunctionSpec};

    fn rational_block() -> KernelBlock {
        KernelBlock {
            m: 1,
            n: 1,
            upper: vec![GammaPair::new(0.0, 1.0)],
            lower: vec![GammaPair::new(0.0, 1.0)],
        }
    }

    fn exponential_block() -> KernelBlock {
        KernelBlock {
            m: 1,
            n: 0,
            upper: vec![],
            lower: vec![GammaPair::new(0.0, 1.0)],
        }
    }

    #[test]
    fn separable_case_factorizes() {
        let (x, y) = (2.0, 0.7);
        let spec = BivariateHSpec {
            n1: 0,
            outer_upper: vec![],
            outer_lower: vec![],
            s_block: rational_block(),
            t_block: exponential_block(),
            x,
            y,
        };
        let r = bivariate_fox_h(&spec).unwrap();
        let s_part = fox_h(&HFunctionSpec::new(
            1,
            1,
            vec![GammaPair::new(0.0, 1.0)],
            vec![GammaPair::new(0.0, 1.0)],
            x,
        ))
        .unwrap()
        .value;
        let want = s_part * (-y as f64).exp();
        assert!((r.value - want).abs() < 1e-10 * want, "{} vs {want}", r.value);
    }

    #[test]
    fn coupled_gamma_matches_laplace_integral() {
        // (2πi)^{-2}∫∫ Γ(s)Γ(1-s) Γ(t) Γ(1-s-t) x^{-s} y^{-t}
        let (x, y) = (1.5, 0.4);
        let spec = BivariateHSpec {
            n1: 1,
            outer_upper: vec![BivariateTerm::new(0.0, 1.0, 1.0)],
            outer_lower: vec![],
            s_block: rational_block(),
            t_block: exponential_block(),
            x,
            y,
        };
        let r = bivariate_fox_h(&spec).unwrap();
        // Γ(1-s-t) = ∫ u^{-s-t} e^{-u} du, so the double integral is
        // ∫₀^∞ e^{-u} · H_s(x u) · H_t(y u) du = ∫ e^{-u} e^{-y u} / (1 + x u) du.
        let q = crate::quad::integrate_to_infinity(
            |u: f64| Ok((-(1.0 + y) * u).exp() / (1.0 + x * u)),
            0.0,
            1.0,
            &[],
            crate::quad::QuadOptions::rel(1e-13),
        )
        .unwrap();
        assert!((r.value - q.value).abs() < 1e-9 * q.value, "{} vs {}", r.value, q.value);
    }

    #[test]
    fn contour_choice_does_not_matter() {
        let spec = BivariateHSpec {
            n1: 1,
            outer_upper: vec![BivariateTerm::new(-1.0, 1.0, 0.5)],
            outer_lower: vec![],
            s_block: rational_block(),
            t_block: exponential_block(),
            x: 0.3,
            y: 2.0,
        };
        let a = bivariate_fox_h(&spec).unwrap();
        let b = bivariate_fox_h_with(
            &spec,
            &BivariateOptions {
                contour: Some((0.5, 0.5)),
                ..BivariateOptions::default()
            },
        )
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value.abs());
    }

    #[test]
    fn empty_block_is_rejected() {
        let spec = BivariateHSpec {
            n1: 0,
            outer_upper: vec![],
            outer_lower: vec![],
            s_block: rational_block(),
            t_block: KernelBlock { m: 0, n: 0, upper: vec![], lower: vec![] },
            x: 1.0,
            y: 1.0,
        };
        assert!(matches!(bivariate_fox_h(&spec), Err(Error::NonDecaying(_))));
    }
}
