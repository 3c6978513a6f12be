//! Parameter lists, Mellin kernels and contour placement for Fox H-type integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gamma::{log_gamma_complex, upper_incomplete_gamma};
use crate::error::{Error, Result};

/// Parameter pair (a, A) of a gamma factor Γ(a + A s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPair {
    pub a: f64,
    pub scale: f64,
}

impl GammaPair {
    pub const fn new(a: f64, scale: f64) -> Self {
        GammaPair { a, scale }
    }
}

/// Parameter triple (a, A, α): the factor becomes Γ(·, α) when α > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTriple {
    pub a: f64,
    pub scale: f64,
    pub alpha: f64,
}

impl GammaTriple {
    pub const fn new(a: f64, scale: f64, alpha: f64) -> Self {
        GammaTriple { a, scale, alpha }
    }
}

impl From<GammaPair> for GammaTriple {
    fn from(p: GammaPair) -> Self {
        GammaTriple::new(p.a, p.scale, 0.0)
    }
}

/// Univariate Fox H-function H^{m,n}_{p,q}(z).
#[derive(Debug, Clone, PartialEq)]
pub struct HFunctionSpec {
    pub m: usize,
    pub n: usize,
    pub upper: Vec<GammaPair>,
    pub lower: Vec<GammaPair>,
    pub argument: Complex64,
}

impl HFunctionSpec {
    pub fn new(m: usize, n: usize, upper: Vec<GammaPair>, lower: Vec<GammaPair>, z: f64) -> Self {
        HFunctionSpec {
            m,
            n,
            upper,
            lower,
            argument: Complex64::new(z, 0.0),
        }
    }

    pub fn p(&self) -> usize {
        self.upper.len()
    }

    pub fn q(&self) -> usize {
        self.lower.len()
    }

    pub fn with_argument(&self, z: f64) -> Self {
        HFunctionSpec {
            argument: Complex64::new(z, 0.0),
            ..self.clone()
        }
    }
}

/// Incomplete-upper Fox H-function M^{m,n}_{p,q}(z) with triple parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteHSpec {
    pub m: usize,
    pub n: usize,
    pub upper: Vec<GammaTriple>,
    pub lower: Vec<GammaTriple>,
    pub argument: Complex64,
}

impl IncompleteHSpec {
    pub fn new(m: usize, n: usize, upper: Vec<GammaTriple>, lower: Vec<GammaTriple>, z: f64) -> Self {
        IncompleteHSpec {
            m,
            n,
            upper,
            lower,
            argument: Complex64::new(z, 0.0),
        }
    }
}

impl From<&HFunctionSpec> for IncompleteHSpec {
    fn from(h: &HFunctionSpec) -> Self {
        IncompleteHSpec {
            m: h.m,
            n: h.n,
            upper: h.upper.iter().map(|&p| p.into()).collect(),
            lower: h.lower.iter().map(|&p| p.into()).collect(),
            argument: h.argument,
        }
    }
}

/// Anything that can be written as an incomplete H specification.
pub trait MellinSpec {
    fn to_incomplete(&self) -> IncompleteHSpec;
}

impl MellinSpec for HFunctionSpec {
    fn to_incomplete(&self) -> IncompleteHSpec {
        self.into()
    }
}

impl MellinSpec for IncompleteHSpec {
    fn to_incomplete(&self) -> IncompleteHSpec {
        self.clone()
    }
}

/// One gamma factor Γ(shift + slope·s [, cut]) of a Mellin kernel, in the
/// numerator or the denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Factor {
    pub shift: f64,
    pub slope: f64,
    pub cut: f64,
    pub numerator: bool,
}

impl Factor {
    fn log_value(&self, s: Complex64) -> Result<Complex64> {
        let u = self.shift + self.slope * s;
        let v = if self.cut > 0.0 {
            upper_incomplete_gamma(u, self.cut)?.ln()
        } else {
            log_gamma_complex(u)?
        };
        Ok(if self.numerator { v } else { -v })
    }

    /// Distance (in s) from the real point `c` to the nearest pole of Γ(shift + slope·s).
    fn pole_distance(&self, c: f64) -> f64 {
        let u = self.shift + self.slope * c;
        let du = if u >= 0.0 { u } else { (u - u.round()).abs() };
        du / self.slope.abs()
    }

    fn is_pole_family(&self) -> bool {
        self.numerator && self.cut == 0.0
    }
}

/// Mellin-Barnes kernel: a product of gamma factors.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Kernel {
    pub factors: Vec<Factor>,
    /// Supremum of the left pole family (−∞ if empty).
    pub lo: f64,
    /// Infimum of the right pole family (+∞ if empty).
    pub hi: f64,
}

fn check_param(what: &str, a: f64, scale: f64, cut: f64) -> Result<()> {
    if !a.is_finite() || !scale.is_finite() || !cut.is_finite() {
        return Err(Error::InvalidSpec(format!("non-finite {what} parameter")));
    }
    if scale <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "{what} scale must be positive, got {scale}"
        )));
    }
    if cut < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "{what} incompleteness argument must be nonnegative, got {cut}"
        )));
    }
    Ok(())
}

impl Kernel {
    pub fn new(factors: Vec<Factor>) -> Self {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for f in factors.iter().filter(|f| f.is_pole_family()) {
            let edge = -f.shift / f.slope;
            if f.slope > 0.0 {
                lo = lo.max(edge);
            } else {
                hi = hi.min(edge);
            }
        }
        Kernel { factors, lo, hi }
    }

    pub fn from_spec(spec: &IncompleteHSpec) -> Result<Self> {
        let p = spec.upper.len();
        let q = spec.lower.len();
        if spec.n > p || spec.m > q {
            return Err(Error::InvalidSpec(format!(
                "orders m = {}, n = {} incompatible with p = {p}, q = {q}",
                spec.m, spec.n
            )));
        }
        if spec.argument.norm() == 0.0 || !spec.argument.re.is_finite() || !spec.argument.im.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "argument must be finite and nonzero, got {}",
                spec.argument
            )));
        }
        let mut factors = Vec::with_capacity(p + q);
        for (i, t) in spec.upper.iter().enumerate() {
            check_param("upper", t.a, t.scale, t.alpha)?;
            if i < spec.n {
                factors.push(Factor { shift: 1.0 - t.a, slope: -t.scale, cut: t.alpha, numerator: true });
            } else {
                if t.alpha > 0.0 {
                    return Err(Error::InvalidSpec(
                        "incomplete triples are only supported in numerator positions".into(),
                    ));
                }
                factors.push(Factor { shift: t.a, slope: t.scale, cut: 0.0, numerator: false });
            }
        }
        for (k, t) in spec.lower.iter().enumerate() {
            check_param("lower", t.a, t.scale, t.alpha)?;
            if k < spec.m {
                factors.push(Factor { shift: t.a, slope: t.scale, cut: t.alpha, numerator: true });
            } else {
                if t.alpha > 0.0 {
                    return Err(Error::InvalidSpec(
                        "incomplete triples are only supported in numerator positions".into(),
                    ));
                }
                factors.push(Factor { shift: 1.0 - t.a, slope: -t.scale, cut: 0.0, numerator: false });
            }
        }
        let kernel = Kernel::new(factors);
        if kernel.lo >= kernel.hi {
            return Err(Error::NoSeparatingContour { left: kernel.lo, right: kernel.hi });
        }
        Ok(kernel)
    }

    /// The same kernel with the strip moved one pole to the left: the new strip
    /// lies between the next left pole and the current left edge.
    pub fn shifted_left(&self) -> Result<Kernel> {
        if !self.lo.is_finite() {
            return Err(Error::NoSeparatingContour { left: self.lo, right: self.hi });
        }
        let tol = 1e-9 * self.lo.abs().max(1.0);
        let mut next = f64::NEG_INFINITY;
        for f in self.factors.iter().filter(|f| f.is_pole_family() && f.slope > 0.0) {
            // poles at (−shift − j)/slope, j = 0, 1, ...
            let first = -f.shift / f.slope;
            let step = 1.0 / f.slope;
            let j = ((first - (self.lo - tol)) / step).floor() + 1.0;
            let pole = first - j.max(0.0) * step;
            if pole < self.lo - tol {
                next = next.max(pole);
            }
        }
        Ok(Kernel {
            factors: self.factors.clone(),
            lo: next,
            hi: self.lo,
        })
    }

    pub fn log_phi(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for f in &self.factors {
            acc += f.log_value(s)?;
        }
        Ok(acc)
    }

    /// Exponential decay rate of |kernel| along a vertical line (Stirling).
    pub fn decay_rate(&self) -> f64 {
        let half_pi = std::f64::consts::FRAC_PI_2;
        self.factors
            .iter()
            .map(|f| {
                if f.numerator && f.cut == 0.0 {
                    half_pi * f.slope.abs()
                } else if f.numerator {
                    0.0
                } else {
                    -half_pi * f.slope.abs()
                }
            })
            .sum()
    }

    /// Distance from `c` to the nearest pole of a complete numerator factor.
    /// For shifted kernels the poles on either side are both counted.
    pub fn nearest_pole(&self, c: f64) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.is_pole_family())
            .map(|f| f.pole_distance(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Like [`Kernel::nearest_pole`] but also counting the would-be poles of
    /// incomplete factors, where Γ(·, x) varies rapidly for small x.
    pub fn nearest_feature(&self, c: f64) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.numerator)
            .map(|f| f.pole_distance(c))
            .fold(f64::INFINITY, f64::min)
    }

    fn incomplete_clearance(&self, c: f64) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.numerator && f.cut > 0.0)
            .map(|f| {
                let u = f.shift + f.slope * c;
                if u > 0.5 { f64::INFINITY } else { (u - u.round()).abs() }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// How the contour abscissa is chosen inside the feasible strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourPolicy {
    /// Midpoint of the strip, or 1.0 beyond the finite end of a half-infinite strip.
    Midpoint,
    /// Minimizer of |kernel(c)·z^{−c}| inside the strip (best conditioned).
    Saddle,
    /// A caller-chosen abscissa; must lie inside the strip.
    Fixed(f64),
}

/// Quadrature rule identifier reported in plans.
pub const GL_PANEL_RULE: &str = "composite Gauss-Legendre, 12 nodes per panel";

/// A planned vertical contour Re s = c, truncated at |Im s| ≤ L.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPlan {
    pub abscissa: f64,
    pub half_length: f64,
    pub nodes: usize,
    pub rule: &'static str,
    /// Feasible strip (left pole supremum, right pole infimum).
    pub strip: (f64, f64),
}

const POLE_GUARD: f64 = 1e-6;
const INCOMPLETE_CLEARANCE: f64 = 0.05;
const SADDLE_RANGE: f64 = 60.0;

fn midpoint(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

pub(crate) fn choose_abscissa(kernel: &Kernel, z: Complex64, policy: ContourPolicy) -> Result<f64> {
    let (lo, hi) = (kernel.lo, kernel.hi);
    let c = match policy {
        ContourPolicy::Fixed(c) => {
            if !(c > lo && c < hi) {
                return Err(Error::NoSeparatingContour { left: lo, right: hi });
            }
            c
        }
        ContourPolicy::Midpoint => {
            let mut c = midpoint(lo, hi);
            if kernel.nearest_pole(c) < POLE_GUARD {
                let width = if (hi - lo).is_finite() { hi - lo } else { 1.0 };
                c += 0.1 * width;
            }
            c
        }
        ContourPolicy::Saddle => saddle(kernel, z.norm().ln())?,
    };
    let d = kernel.nearest_pole(c);
    if d < POLE_GUARD {
        return Err(Error::PoleOnContour { abscissa: c, distance: d });
    }
    Ok(c)
}

fn saddle(kernel: &Kernel, ln_abs_z: f64) -> Result<f64> {
    let (lo, hi) = (kernel.lo, kernel.hi);
    let (a, b) = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let margin = (0.25 * (hi - lo)).min(0.02);
            (lo + margin, hi - margin)
        }
        (true, false) => (lo + 0.02, lo + SADDLE_RANGE),
        (false, true) => (hi - SADDLE_RANGE, hi - 0.02),
        (false, false) => (-SADDLE_RANGE / 2.0, SADDLE_RANGE / 2.0),
    };
    let objective = |c: f64| -> f64 {
        if kernel.incomplete_clearance(c) < INCOMPLETE_CLEARANCE {
            return f64::INFINITY;
        }
        match kernel.log_phi(Complex64::new(c, 0.0)) {
            Ok(v) if v.re.is_finite() => v.re - c * ln_abs_z,
            _ => f64::INFINITY,
        }
    };
    const GRID: usize = 48;
    let pts: Vec<f64> = (0..=GRID)
        .map(|k| a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / GRID as f64).cos()))
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&c| objective(c)).collect();
    let (best, &best_val) = vals
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty grid");
    if !best_val.is_finite() {
        return Ok(midpoint(lo, hi));
    }
    // Golden-section refinement inside the neighbouring grid cells.
    let mut left = pts[best.saturating_sub(1)];
    let mut right = pts[(best + 1).min(GRID)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = right - ratio * (right - left);
    let mut x2 = left + ratio * (right - left);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..40 {
        if right - left < 1e-4 {
            break;
        }
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - ratio * (right - left);
            f1 = objective(x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + ratio * (right - left);
            f2 = objective(x2);
        }
    }
    let candidate = 0.5 * (left + right);
    if objective(candidate) <= best_val {
        Ok(candidate)
    } else {
        Ok(pts[best])
    }
}

/// Plans the contour for a univariate or incomplete H-function with the
/// midpoint rule.
pub fn plan_contour<S: MellinSpec>(spec: &S) -> Result<ContourPlan> {
    plan_contour_with(spec, ContourPolicy::Midpoint)
}

pub fn plan_contour_with<S: MellinSpec>(spec: &S, policy: ContourPolicy) -> Result<ContourPlan> {
    let spec = spec.to_incomplete();
    let kernel = Kernel::from_spec(&spec)?;
    let c = choose_abscissa(&kernel, spec.argument, policy)?;
    let ln_z = spec.argument.ln();
    let up = super::fox::half_length(&kernel, ln_z, c, 1.0)?;
    let down = if spec.argument.im == 0.0 && spec.argument.re > 0.0 {
        up
    } else {
        super::fox::half_length(&kernel, ln_z, c, -1.0)?
    };
    let half_length = up.max(down);
    let panels = super::fox::panel_breaks(&kernel, c, half_length).len() - 1;
    Ok(ContourPlan {
        abscissa: c,
        half_length,
        nodes: panels * super::fox::PANEL_NODES,
        rule: GL_PANEL_RULE,
        strip: (kernel.lo, kernel.hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_left_family_uses_unit_fallback() {
        let spec = HFunctionSpec::new(1, 0, vec![], vec![GammaPair::new(0.0, 1.0)], 1.0);
        let plan = plan_contour(&spec).unwrap();
        assert_eq!(plan.abscissa, 1.0);
        assert_eq!(plan.strip.0, 0.0);
        assert!(plan.strip.1.is_infinite());
    }

    #[test]
    fn two_sided_strip_uses_midpoint() {
        let spec = HFunctionSpec::new(
            1,
            1,
            vec![GammaPair::new(0.0, 1.0)],
            vec![GammaPair::new(0.0, 1.0)],
            3.0,
        );
        let plan = plan_contour(&spec).unwrap();
        assert_eq!(plan.strip, (0.0, 1.0));
        assert_eq!(plan.abscissa, 0.5);
    }

    #[test]
    fn empty_strip_is_rejected() {
        // Right family starts at (1 - 2)/1 = -1, left family ends at 0.
        let spec = HFunctionSpec::new(
            1,
            1,
            vec![GammaPair::new(2.0, 1.0)],
            vec![GammaPair::new(0.0, 1.0)],
            1.0,
        );
        assert!(matches!(
            plan_contour(&spec),
            Err(Error::NoSeparatingContour { .. })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let zero_scale = HFunctionSpec::new(1, 0, vec![], vec![GammaPair::new(0.0, 0.0)], 1.0);
        assert!(matches!(plan_contour(&zero_scale), Err(Error::InvalidSpec(_))));
        let bad_order = HFunctionSpec::new(2, 0, vec![], vec![GammaPair::new(0.0, 1.0)], 1.0);
        assert!(matches!(plan_contour(&bad_order), Err(Error::InvalidSpec(_))));
        let zero_arg = HFunctionSpec::new(1, 0, vec![], vec![GammaPair::new(0.0, 1.0)], 0.0);
        assert!(matches!(plan_contour(&zero_arg), Err(Error::InvalidSpec(_))));
        let denominator_cut = IncompleteHSpec::new(
            1,
            0,
            vec![GammaTriple::new(0.5, 1.0, 0.3)],
            vec![GammaTriple::new(0.0, 1.0, 0.0)],
            1.0,
        );
        assert!(matches!(
            plan_contour(&denominator_cut),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn saddle_stays_inside_strip() {
        for &z in &[1e-30, 1e-3, 1.0, 1e3, 1e12] {
            let spec = HFunctionSpec::new(
                2,
                1,
                vec![GammaPair::new(-0.5, 1.0)],
                vec![GammaPair::new(0.0, 1.0), GammaPair::new(0.7, 0.5)],
                z,
            );
            let plan = plan_contour_with(&spec, ContourPolicy::Saddle).unwrap();
            assert!(plan.abscissa > plan.strip.0 && plan.abscissa < plan.strip.1);
        }
    }
}
