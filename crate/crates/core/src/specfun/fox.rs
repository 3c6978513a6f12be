//! Univariate and incomplete Fox H-functions by vertical-line Mellin-Barnes quadrature.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

use super::contour::{choose_abscissa, ContourPolicy, HFunctionSpec, IncompleteHSpec, Kernel, MellinSpec};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::result::{Diagnostics, MetricResult};

pub(crate) const PANEL_NODES: usize = 12;
/// Integrand magnitudes below exp(−TAIL_DROP)·peak are treated as zero.
const TAIL_DROP: f64 = 40.0;
const MAX_HALF_LENGTH: f64 = 1e5;
/// Relative round-off floor, measured against ∫|integrand|.
pub(crate) const ROUNDOFF: f64 = 1e-14;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_NODES))
}

/// Tuning knobs for H-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub policy: ContourPolicy,
    pub rel_tol: f64,
    /// Maximum number of panel halvings.
    pub max_level: usize,
    /// Extra halvings applied after convergence (for refinement studies).
    pub extra_levels: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            policy: ContourPolicy::Saddle,
            rel_tol: 1e-13,
            max_level: 10,
            extra_levels: 0,
        }
    }
}

impl EvalOptions {
    pub fn with_policy(policy: ContourPolicy) -> Self {
        EvalOptions {
            policy,
            ..Self::default()
        }
    }
}

pub(crate) fn log_magnitude(kernel: &Kernel, ln_z: Complex64, s: Complex64) -> Result<f64> {
    Ok((kernel.log_phi(s)? - s * ln_z).re)
}

/// Truncation point along Im s in direction `dir` (±1) where the integrand has
/// fallen TAIL_DROP e-folds below its running peak.
pub(crate) fn half_length(kernel: &Kernel, ln_z: Complex64, c: f64, dir: f64) -> Result<f64> {
    let decay = kernel.decay_rate() - ln_z.im.abs();
    if decay <= 0.0 {
        return Err(Error::NonDecaying(format!(
            "exponential decay rate {decay:.3} ≤ 0 along Re s = {c}"
        )));
    }
    let mut peak = log_magnitude(kernel, ln_z, Complex64::new(c, 0.0))?;
    let mut y = 0.5;
    while y <= MAX_HALF_LENGTH {
        let v = log_magnitude(kernel, ln_z, Complex64::new(c, dir * y))?;
        if v > peak {
            peak = v;
        }
        if y >= 2.0 && v < peak - TAIL_DROP {
            return Ok(y);
        }
        y *= 1.4;
    }
    Err(Error::NonDecaying(format!(
        "integrand still above tolerance at |Im s| = {MAX_HALF_LENGTH:e}"
    )))
}

/// Panel boundaries on [0, L]: geometrically graded near the real axis on the
/// scale of the closest gamma singularity, unit width beyond.
pub(crate) fn panel_breaks(kernel: &Kernel, c: f64, half_length: f64) -> Vec<f64> {
    graded_breaks(0.5 * kernel.nearest_feature(c), half_length)
}

pub(crate) fn graded_breaks(first: f64, half_length: f64) -> Vec<f64> {
    let h0 = first.clamp(1e-4, 1.0);
    let mut breaks = vec![0.0];
    let mut x = h0;
    while x < 1.0 && x < half_length {
        breaks.push(x);
        x *= 2.0;
    }
    let mut x = *breaks.last().expect("non-empty");
    while x < half_length {
        x = (x + 1.0).min(half_length);
        breaks.push(x);
    }
    breaks
}

/// Nodes and weights of the panel rule with every panel split into 2^level pieces.
pub(crate) fn panel_nodes(breaks: &[f64], level: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = panel_rule();
    let pieces = 1usize << level;
    let mut out = Vec::with_capacity((breaks.len() - 1) * pieces * PANEL_NODES);
    for w in breaks.windows(2) {
        let width = (w[1] - w[0]) / pieces as f64;
        let half = 0.5 * width;
        for k in 0..pieces {
            let mid = w[0] + (k as f64 + 0.5) * width;
            for (x, wt) in nodes.iter().zip(weights) {
                out.push((mid + half * x, wt * half));
            }
        }
    }
    out
}

struct LineValue {
    value: Complex64,
    error: f64,
    nodes: usize,
}

/// Returns (∫g, ∫|g|, node count) over the panels at the given level.
fn panel_sum<F>(breaks: &[f64], level: usize, mut g: F) -> Result<(Complex64, f64, usize)>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let nodes = panel_nodes(breaks, level);
    for &(y, w) in &nodes {
        let v = g(y)?;
        sum += v * w;
        abs_sum += v.norm() * w;
    }
    Ok((sum, abs_sum, nodes.len()))
}

fn line_integral(kernel: &Kernel, z: Complex64, c: f64, opts: &EvalOptions) -> Result<(LineValue, f64)> {
    let ln_z = z.ln();
    let symmetric = z.im == 0.0 && z.re > 0.0;
    let shift = log_magnitude(kernel, ln_z, Complex64::new(c, 0.0))?;
    let integrand = |y: f64| -> Result<Complex64> {
        let s = Complex64::new(c, y);
        Ok((kernel.log_phi(s)? - s * ln_z - shift).exp())
    };
    let up = half_length(kernel, ln_z, c, 1.0)?;
    let up_breaks = panel_breaks(kernel, c, up);
    let down_breaks = if symmetric {
        Vec::new()
    } else {
        let down = half_length(kernel, ln_z, c, -1.0)?;
        panel_breaks(kernel, c, down)
    };
    let evaluate = |level: usize| -> Result<(Complex64, f64, usize)> {
        let (up_sum, up_abs, up_n) = panel_sum(&up_breaks, level, integrand)?;
        if symmetric {
            // g(−y) = conj g(y): (1/2π)∫_{−L}^{L} g = (1/π)∫_0^L Re g
            return Ok((Complex64::new(up_sum.re / PI, 0.0), up_abs / PI, up_n));
        }
        let (down_sum, down_abs, down_n) = panel_sum(&down_breaks, level, |y| integrand(-y))?;
        Ok(((up_sum + down_sum) / (2.0 * PI), (up_abs + down_abs) / (2.0 * PI), up_n + down_n))
    };
    let (mut prev, _, _) = evaluate(0)?;
    for level in 1..=opts.max_level {
        let (cur, abs, nodes) = evaluate(level)?;
        let diff = (cur - prev).norm();
        let floor = ROUNDOFF * abs;
        if diff <= (opts.rel_tol * cur.norm()).max(floor) {
            let mut result = LineValue { value: cur, error: diff + 2.0 * floor, nodes };
            if opts.extra_levels > 0 {
                let (finer, abs, n) = evaluate(level + opts.extra_levels)?;
                result = LineValue { value: finer, error: (finer - cur).norm() + 2.0 * ROUNDOFF * abs, nodes: n };
            }
            return Ok((result, shift));
        }
        prev = cur;
    }
    Err(Error::NonConvergence(format!(
        "Mellin-Barnes quadrature on Re s = {c} did not settle after {} halvings",
        opts.max_level
    )))
}

fn rescale(line: LineValue, shift: f64) -> Result<(Complex64, f64)> {
    let factor = shift.exp();
    if !factor.is_finite() {
        return Err(Error::Domain(format!(
            "H-function magnitude exp({shift:.1}) overflows double precision"
        )));
    }
    Ok((line.value * factor, line.error * factor))
}

/// Complex value of an incomplete H-function with explicit options.
pub fn incomplete_fox_h_complex(spec: &IncompleteHSpec, opts: &EvalOptions) -> Result<(Complex64, f64, Diagnostics)> {
    let kernel = Kernel::from_spec(spec)?;
    evaluate_kernel(&kernel, spec.argument, opts)
}

pub(crate) fn evaluate_kernel(kernel: &Kernel, z: Complex64, opts: &EvalOptions) -> Result<(Complex64, f64, Diagnostics)> {
    let c = choose_abscissa(kernel, z, opts.policy)?;
    let (line, shift) = line_integral(kernel, z, c, opts)?;
    let nodes = line.nodes;
    let (value, error) = rescale(line, shift)?;
    Ok((
        value,
        error,
        Diagnostics {
            contours: vec![c],
            nodes,
            terms: 1,
        },
    ))
}

/// H^{m,n}_{p,q}(z) with the default (saddle-point) contour.
pub fn fox_h(spec: &HFunctionSpec) -> Result<MetricResult> {
    fox_h_with(spec, &EvalOptions::default())
}

pub fn fox_h_with(spec: &HFunctionSpec, opts: &EvalOptions) -> Result<MetricResult> {
    real_result(spec.to_incomplete(), opts)
}

/// M^{m,n}_{p,q}(z) with incomplete gamma factors where third slots are positive.
pub fn incomplete_fox_h(spec: &IncompleteHSpec) -> Result<MetricResult> {
    incomplete_fox_h_with(spec, &EvalOptions::default())
}

pub fn incomplete_fox_h_with(spec: &IncompleteHSpec, opts: &EvalOptions) -> Result<MetricResult> {
    real_result(spec.clone(), opts)
}

fn real_result(spec: IncompleteHSpec, opts: &EvalOptions) -> Result<MetricResult> {
    let (value, error, diagnostics) = incomplete_fox_h_complex(&spec, opts)?;
    let error = if spec.argument.im == 0.0 && spec.argument.re > 0.0 {
        error
    } else {
        error + value.im.abs()
    };
    Ok(MetricResult::new(value.re, error, diagnostics))
}
