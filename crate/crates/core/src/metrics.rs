//! Closed-form error-rate and capacity metrics of the relay link.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::endtoend::{delta_block, EndToEnd, SystemConfig};
use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, QuadOptions};
use crate::result::{Diagnostics, MetricResult};
use crate::specfun::contour::Kernel;
use crate::specfun::fox::evaluate_kernel;
use crate::specfun::gamma::ln_gamma;
use crate::specfun::{
    bivariate_fox_h, BivariateHSpec, BivariateTerm, EvalOptions, GammaPair, GammaTriple, IncompleteHSpec, KernelBlock,
};

/// Error-rate parameters of P_e(γ) = ρ·erfc(√(τγ)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub rho: f64,
    pub tau: f64,
}

impl ModulationParams {
    pub const BPSK: ModulationParams = ModulationParams { rho: 0.5, tau: 1.0 };
    pub const BFSK: ModulationParams = ModulationParams { rho: 0.5, tau: 0.5 };
    pub const QPSK: ModulationParams = ModulationParams { rho: 1.0, tau: 0.5 };

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "BPSK" => Some(Self::BPSK),
            "BFSK" => Some(Self::BFSK),
            "QPSK" => Some(Self::QPSK),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// σ = m₁/γ̄₁ + τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaShift {
    pub sigma: f64,
}

impl SigmaShift {
    pub fn new(model: &EndToEnd, modulation: &ModulationParams) -> Self {
        SigmaShift { sigma: model.stats.beta + modulation.tau }
    }
}

/// One term T_k^{(i)}(x) of the truncated inverse moment.
#[derive(Debug, Clone, PartialEq)]
pub struct TkTermSpec {
    /// 0 for the harvested-power branch, 1 for the battery branch.
    pub branch: usize,
    /// 1, 2 or 3.
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub x: f64,
    /// Multiplier of the incomplete H value, including w_i and K_i.
    pub weight: f64,
    pub spec: IncompleteHSpec,
}

/// Root of the optimal-power-and-rate cutoff equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSolve {
    pub gamma_star: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

struct Job {
    kernel: Kernel,
    argument: f64,
    weight: f64,
}

impl Job {
    fn from_spec(spec: &IncompleteHSpec, weight: f64) -> Result<Job> {
        Ok(Job { kernel: Kernel::from_spec(spec)?, argument: spec.argument.re, weight })
    }
}

fn sum_jobs(jobs: Vec<Job>, opts: &EvalOptions) -> Result<MetricResult> {
    let parts: Vec<(f64, f64, Diagnostics)> = jobs
        .par_iter()
        .map(|j| {
            let (v, e, d) = evaluate_kernel(&j.kernel, j.argument.into(), opts)?;
            Ok((j.weight * v.re, j.weight.abs() * e, d))
        })
        .collect::<Result<_>>()?;
    let mut out = MetricResult::exact(0.0);
    for (v, e, d) in parts {
        out.value += v;
        out.error_estimate += e;
        out.diagnostics.absorb(&d);
    }
    Ok(out)
}

fn triples(pairs: &[GammaPair]) -> Vec<GammaTriple> {
    pairs.iter().map(|&p| p.into()).collect()
}

fn delta(model: &EndToEnd, branch: usize, p: usize) -> Vec<GammaPair> {
    let c = &model.config;
    delta_block(branch, p, c.nak.m1, c.am.alpha2, c.am.mu2)
}

/// a_i = μ₂(m₁^{2−i}C/γ̄₂^{(i)})^{α₂/2}: the H argument after z ↦ z/β.
fn reduced_argument(model: &EndToEnd, branch: usize) -> f64 {
    model.table.kappa[branch] * model.stats.beta.powf(-model.config.am.alpha2 / 2.0)
}

/// E[ρ·erfc(√(τγ₁))] for the Gamma-distributed first hop alone.
fn first_hop_aser(m1: usize, beta: f64, modulation: &ModulationParams) -> f64 {
    let sigma = beta + modulation.tau;
    let nu = (modulation.tau / sigma).sqrt();
    let one_minus = (beta / sigma) / (1.0 + nu);
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut pow = 1.0;
    for k in 0..m1 {
        if k > 0 {
            binom *= (m1 - 1 + k) as f64 / k as f64;
            pow *= 0.5 * (1.0 + nu);
        }
        sum += binom * pow;
    }
    modulation.rho * 2.0 * (0.5 * one_minus).powi(m1 as i32) * sum
}

fn aser_spec(model: &EndToEnd, branch: usize, n: usize, p: usize, sigma: f64) -> IncompleteHSpec {
    let half_alpha = model.config.am.alpha2 / 2.0;
    let arg = model.table.kappa[branch] * sigma.powf(-half_alpha);
    let lower = delta(model, branch, p);
    IncompleteHSpec::new(
        lower.len(),
        1,
        vec![GammaTriple::new(p as f64 - n as f64 + 0.5, half_alpha, 0.0)],
        triples(&lower),
        arg,
    )
}

fn check_aser(r: MetricResult, modulation: &ModulationParams) -> Result<MetricResult> {
    if r.value <= -1e-8 || r.value > modulation.rho + 1e-8 || !r.value.is_finite() {
        return Err(Error::Accuracy { what: "ASER", value: r.value });
    }
    Ok(MetricResult { value: r.value.clamp(0.0, modulation.rho), ..r })
}

/// Average symbol error rate, written as the first-hop-only error rate plus
/// the contribution of the second hop. The p = 0 terms use the contour moved
/// past the pole at the origin, whose residue is exactly the first-hop part.
pub fn aser(model: &EndToEnd, modulation: &ModulationParams) -> Result<MetricResult> {
    modulation.validate()?;
    let sigma = SigmaShift::new(model, modulation).sigma;
    let beta = model.stats.beta;
    let lead = modulation.rho * (modulation.tau / (sigma * PI)).sqrt();
    let mut jobs = Vec::new();
    for branch in 0..2 {
        let w = model.stats.weights.get(branch);
        if w == 0.0 {
            continue;
        }
        for row in &model.table.rows {
            let spec = aser_spec(model, branch, row.n, row.p, sigma);
            let mut kernel = Kernel::from_spec(&spec)?;
            if row.p == 0 {
                kernel = kernel.shifted_left()?;
            }
            let weight =
                -lead * w * model.table.prefactor[branch] * row.coefficient * (beta / sigma).powi((row.n - row.p) as i32);
            jobs.push(Job { kernel, argument: spec.argument.re, weight });
        }
    }
    let mut r = sum_jobs(jobs, &model.options)?;
    r.value += first_hop_aser(model.table.m1, beta, modulation);
    check_aser(r, modulation)
}

/// The ASER double sum evaluated literally, ρ[1 − √(τ/(σπ)) Σ ...]; loses
/// relative accuracy once the ASER approaches round-off of ρ.
pub fn aser_direct(model: &EndToEnd, modulation: &ModulationParams) -> Result<MetricResult> {
    modulation.validate()?;
    let sigma = SigmaShift::new(model, modulation).sigma;
    let beta = model.stats.beta;
    let lead = modulation.rho * (modulation.tau / (sigma * PI)).sqrt();
    let mut jobs = Vec::new();
    for branch in 0..2 {
        let w = model.stats.weights.get(branch);
        if w == 0.0 {
            continue;
        }
        for row in &model.table.rows {
            let spec = aser_spec(model, branch, row.n, row.p, sigma);
            let weight =
                -lead * w * model.table.prefactor[branch] * row.coefficient * (beta / sigma).powi((row.n - row.p) as i32);
            jobs.push(Job::from_spec(&spec, weight)?);
        }
    }
    let mut r = sum_jobs(jobs, &model.options)?;
    r.value += modulation.rho;
    check_aser(r, modulation)
}

/// Bivariate specification of one (n, p) term of the ORA capacity on `branch`.
pub fn ora_term_spec(model: &EndToEnd, branch: usize, n: usize, p: usize) -> BivariateHSpec {
    let half_alpha = model.config.am.alpha2 / 2.0;
    let lower = delta(model, branch, p);
    BivariateHSpec {
        n1: 1,
        outer_upper: vec![BivariateTerm::new(p as f64 - n as f64, 1.0, half_alpha)],
        outer_lower: vec![],
        s_block: KernelBlock {
            m: 1,
            n: 1,
            upper: vec![GammaPair::new(0.0, 1.0)],
            lower: vec![GammaPair::new(0.0, 1.0)],
        },
        t_block: KernelBlock { m: lower.len(), n: 0, upper: vec![], lower },
        x: 1.0 / model.stats.beta,
        y: reduced_argument(model, branch),
    }
}

/// Ergodic capacity under optimal rate adaptation, in bits/s/Hz.
pub fn capacity_ora(model: &EndToEnd) -> Result<MetricResult> {
    let mut work = Vec::new();
    for branch in 0..2 {
        let w = model.stats.weights.get(branch);
        if w == 0.0 {
            continue;
        }
        for row in &model.table.rows {
            let weight = w * model.table.prefactor[branch] * row.coefficient / (model.stats.beta * LN_2);
            work.push((ora_term_spec(model, branch, row.n, row.p), weight));
        }
    }
    let parts: Vec<(f64, f64, Diagnostics)> = work
        .par_iter()
        .map(|(spec, weight)| {
            let r = bivariate_fox_h(spec)?;
            Ok((weight * r.value, weight.abs() * r.error_estimate, r.diagnostics))
        })
        .collect::<Result<_>>()?;
    let mut out = MetricResult::exact(0.0);
    for (v, e, d) in parts {
        out.value += v;
        out.error_estimate += e;
        out.diagnostics.absorb(&d);
    }
    out.value = out.value.max(0.0);
    Ok(out)
}

/// Terms T_k^{(i)}(x), x > 0, of E[(1/γ_eq)·1{γ_eq > x}].
pub fn tk_terms(model: &EndToEnd, x: f64) -> Vec<TkTermSpec> {
    let half_alpha = model.config.am.alpha2 / 2.0;
    let beta = model.stats.beta;
    let cut = beta * x;
    let mut out = Vec::new();
    for branch in 0..2 {
        let w = model.stats.weights.get(branch);
        if w == 0.0 {
            continue;
        }
        let c = w * model.table.prefactor[branch];
        let arg = reduced_argument(model, branch);
        for row in &model.table.rows {
            let (n, p) = (row.n, row.p);
            let lower = triples(&delta(model, branch, p));
            let q = lower.len();
            let d = p as f64 - n as f64;
            out.push(TkTermSpec {
                branch,
                k: 1,
                n,
                p,
                x,
                weight: c * beta * row.coefficient,
                spec: IncompleteHSpec::new(q, 1, vec![GammaTriple::new(1.0 + d, half_alpha, cut)], lower.clone(), arg),
            });
            if n > p {
                out.push(TkTermSpec {
                    branch,
                    k: 2,
                    n,
                    p,
                    x,
                    weight: -c * beta * (n - p) as f64 * row.coefficient,
                    spec: IncompleteHSpec::new(q, 1, vec![GammaTriple::new(2.0 + d, half_alpha, cut)], lower.clone(), arg),
                });
            }
            let mut slope_lower = lower;
            slope_lower.push(GammaTriple::new(1.0, 1.0, 0.0));
            out.push(TkTermSpec {
                branch,
                k: 3,
                n,
                p,
                x,
                weight: -c * half_alpha * beta * row.coefficient,
                spec: IncompleteHSpec::new(
                    q,
                    2,
                    vec![GammaTriple::new(2.0 + d, half_alpha, cut), GammaTriple::new(0.0, 1.0, 0.0)],
                    slope_lower,
                    arg,
                ),
            });
        }
    }
    out
}

/// E[1/γ_eq] from the product structure 1/γ_eq = (1/γ₁)(1 + C/γ₂).
fn full_inverse_moment(model: &EndToEnd) -> Result<f64> {
    let cfg = &model.config;
    let m1 = cfg.nak.m1;
    let (alpha, mu) = (cfg.am.alpha2, cfg.am.mu2);
    if m1 <= 1.0 {
        return Err(Error::DivergentMoment(format!("E[1/γ₁] is infinite for m1 = {m1}")));
    }
    if mu <= 2.0 / alpha {
        return Err(Error::DivergentMoment(format!(
            "E[1/Υ₂] is infinite for mu2 = {mu} <= 2/alpha2 = {}",
            2.0 / alpha
        )));
    }
    let inv_g1 = model.stats.beta / (m1 - 1.0);
    let alpha_mu = ((2.0 / alpha) * mu.ln() + ln_gamma(mu - 2.0 / alpha) - ln_gamma(mu)).exp();
    let inv_g2 = [
        m1 / ((m1 - 1.0) * model.stats.gamma2_mean[0]) * alpha_mu,
        alpha_mu / model.stats.gamma2_mean[1],
    ];
    let mut total = 0.0;
    for (branch, inv) in inv_g2.iter().enumerate() {
        let w = model.stats.weights.get(branch);
        if w > 0.0 {
            total += w * inv_g1 * (1.0 + cfg.c * inv);
        }
    }
    Ok(total)
}

/// E[(1/γ_eq)·1{γ_eq > x}].
pub fn inverse_snr_moment(model: &EndToEnd, x: f64) -> Result<MetricResult> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("truncation point must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(MetricResult::exact(full_inverse_moment(model)?));
    }
    let tail = model.ccdf(x)?;
    if tail.value <= tail.error_estimate {
        // Below the resolution of the tail CCDF; the moment is at most F^c(x)/x.
        return Ok(MetricResult::new(0.0, tail.error_estimate / x, tail.diagnostics));
    }
    let jobs = tk_terms(model, x)
        .iter()
        .map(|t| Job::from_spec(&t.spec, t.weight))
        .collect::<Result<Vec<_>>>()?;
    match sum_jobs(jobs, &model.options) {
        Ok(r) if r.value > 0.0 && r.error_estimate <= TK_REL_TOL * r.value => Ok(r),
        Ok(r) if r.value < -r.error_estimate.max(1e-12) => {
            Err(Error::Accuracy { what: "truncated inverse moment", value: r.value })
        }
        _ => tail_inverse_moment(model, x, tail),
    }
}

/// Past the point where the T-terms cancel to noise:
/// ∫_x^∞ f(z)/z dz = F^c(x)/x − ∫_x^∞ F^c(z)/z² dz, on the accurate tail CCDF.
fn tail_inverse_moment(model: &EndToEnd, x: f64, edge: MetricResult) -> Result<MetricResult> {
    let mut diagnostics = edge.diagnostics.clone();
    let q = integrate_to_infinity(
        |z| {
            let t = model.ccdf(z)?;
            diagnostics.absorb(&t.diagnostics);
            Ok(t.value / (z * z))
        },
        x,
        x.min(1.0 / model.stats.beta),
        &[],
        QuadOptions { rel_tol: 1e-12, abs_tol: edge.error_estimate / x, max_segments: 400 },
    )?;
    let value = (edge.value / x - q.value).max(0.0);
    Ok(MetricResult::new(value, edge.error_estimate / x + q.error, diagnostics))
}

/// g(x) = F^c(x)/x − E[(1/γ)·1{γ > x}] − 1, strictly decreasing in x.
pub fn cutoff_equation(model: &EndToEnd, x: f64) -> Result<f64> {
    let tail = model.ccdf(x)?.value;
    let moment = inverse_snr_moment(model, x)?.value;
    Ok(tail / x - moment - 1.0)
}

const MAX_EXPANSIONS: usize = 60;
const TK_REL_TOL: f64 = 1e-6;
const CUTOFF_TOL: f64 = 1e-9;

/// Solves g(γ*) = 0 by bracketing and an Illinois-type false-position iteration.
pub fn opra_cutoff_uncached(model: &EndToEnd) -> Result<CutoffSolve> {
    let g = |x: f64| cutoff_equation(model, x);
    let (mut lo, mut hi) = (1e-6, 1.0);
    let mut g_lo = g(lo)?;
    let mut expansions = 0;
    while g_lo <= 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::BracketFailure { expansions });
        }
        hi = lo;
        lo *= 0.1;
        g_lo = g(lo)?;
        expansions += 1;
    }
    let mut g_hi = g(hi)?;
    while g_hi >= 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::BracketFailure { expansions });
        }
        lo = hi;
        g_lo = g_hi;
        hi *= 10.0;
        g_hi = g(hi)?;
        expansions += 1;
    }
    let bracket = (lo, hi);
    let mut side = 0i8;
    let mut best = (lo, g_lo);
    for iter in 1..=200 {
        // false position in log x, which suits g ~ 1/x near the root
        let (ll, lh) = (lo.ln(), hi.ln());
        let mut t = (ll * g_hi - lh * g_lo) / (g_hi - g_lo);
        if !(t > ll && t < lh) || iter % 8 == 0 {
            t = 0.5 * (ll + lh);
        }
        let x = t.exp();
        let gx = g(x)?;
        if gx.abs() < best.1.abs() {
            best = (x, gx);
        }
        if gx.abs() <= CUTOFF_TOL || (hi - lo) <= 1e-15 * x {
            return Ok(CutoffSolve { gamma_star: x, residual: gx, bracket, iterations: iter });
        }
        if gx > 0.0 {
            lo = x;
            g_lo = gx;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            g_hi = gx;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::NonConvergence(format!(
        "cutoff iteration stalled at {} with residual {:e}",
        best.0, best.1
    )))
}

fn config_key(cfg: &SystemConfig) -> Vec<u64> {
    let e = &cfg.energy;
    [
        cfg.nak.m1,
        cfg.nak.omega1,
        cfg.am.alpha2,
        cfg.am.mu2,
        cfg.am.omega2,
        e.kappa,
        e.theta_eff,
        e.t0,
        e.t1,
        e.battery,
        e.source_power,
        e.d1,
        e.d2,
        e.delta,
        e.n1,
        e.n2,
        cfg.c,
        e.varsigma(),
    ]
    .iter()
    .map(|v| v.to_bits())
    .collect()
}

fn cutoff_cache() -> &'static RwLock<HashMap<Vec<u64>, CutoffSolve>> {
    static CACHE: OnceLock<RwLock<HashMap<Vec<u64>, CutoffSolve>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized [`opra_cutoff_uncached`] for the default evaluation options.
pub fn opra_cutoff(model: &EndToEnd) -> Result<CutoffSolve> {
    if model.options != EvalOptions::default() {
        return opra_cutoff_uncached(model);
    }
    let key = config_key(&model.config);
    if let Some(hit) = cutoff_cache().read().expect("cutoff cache poisoned").get(&key) {
        return Ok(*hit);
    }
    let solve = opra_cutoff_uncached(model)?;
    cutoff_cache().write().expect("cutoff cache poisoned").insert(key, solve);
    Ok(solve)
}

/// Capacity with the cutoff γ* given: (1/ln2) Σ w_iK_i Σ C(n,p)/n! M(a_i | (1+p−n, α₂/2, βγ*); Δ_i).
pub fn capacity_opra_at(model: &EndToEnd, gamma_star: f64) -> Result<MetricResult> {
    let beta = model.stats.beta;
    let jobs = tk_terms(model, gamma_star)
        .into_iter()
        .filter(|t| t.k == 1)
        .map(|t| Job::from_spec(&t.spec, t.weight / (beta * LN_2)))
        .collect::<Result<Vec<_>>>()?;
    let mut r = sum_jobs(jobs, &model.options)?;
    r.value = r.value.max(0.0);
    Ok(r)
}

/// Capacity under optimal power and rate adaptation, in bits/s/Hz.
pub fn capacity_opra(model: &EndToEnd) -> Result<MetricResult> {
    let cut = opra_cutoff(model)?;
    capacity_opra_at(model, cut.gamma_star)
}

/// log₂(1 + 1/m), finite for subnormal m.
fn inversion_rate(m: f64) -> f64 {
    if m < 1e-300 {
        -m.max(f64::from_bits(1)).log2()
    } else {
        (1.0 + 1.0 / m).log2()
    }
}

/// Capacity under channel inversion with fixed rate.
pub fn capacity_cifr(model: &EndToEnd) -> Result<MetricResult> {
    let m = inverse_snr_moment(model, 0.0)?;
    let rate = inversion_rate(m.value);
    let err = m.error_estimate / (m.value * (m.value + 1.0) * LN_2) + 4.0 * f64::EPSILON * rate;
    Ok(MetricResult::new(rate, err, m.diagnostics))
}

/// Capacity under truncated channel inversion above γ₀.
pub fn capacity_tcifr(model: &EndToEnd, gamma0: f64) -> Result<MetricResult> {
    if !(gamma0 > 0.0) {
        return Err(Error::Domain(format!("TCIFR cutoff must be positive, got {gamma0}")));
    }
    let tail = model.ccdf(gamma0)?;
    if tail.value <= tail.error_estimate {
        return Ok(MetricResult::new(0.0, tail.error_estimate, tail.diagnostics));
    }
    let m = inverse_snr_moment(model, gamma0)?;
    let rate = inversion_rate(m.value);
    let mut d = tail.diagnostics;
    d.absorb(&m.diagnostics);
    let rate_err = (m.error_estimate / (m.value * (m.value + 1.0) * LN_2)).min(rate);
    Ok(MetricResult::new(tail.value * rate, tail.error_estimate * rate + tail.value * rate_err, d))
}

/// TCIFR with the default cutoff γ₀ = γ* of the OPRA policy.
pub fn capacity_tcifr_default(model: &EndToEnd) -> Result<MetricResult> {
    let cut = opra_cutoff(model)?;
    capacity_tcifr(model, cut.gamma_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> EndToEnd {
        let mut cfg = SystemConfig::default();
        cfg.energy.d1 = 1.0;
        cfg.energy.d2 = 1.0;
        cfg.energy.battery = 2.0;
        cfg.energy.n1 = 0.2;
        cfg.energy.n2 = 0.5;
        EndToEnd::new(cfg).unwrap()
    }

    #[test]
    fn presets() {
        assert_eq!(ModulationParams::preset("bpsk"), Some(ModulationParams::BPSK));
        assert_eq!(ModulationParams::preset("qpsk").unwrap().rho, 1.0);
        assert!(ModulationParams::preset("16qam").is_none());
        assert!(ModulationParams { rho: 1.5, tau: 1.0 }.validate().is_err());
    }

    #[test]
    fn first_hop_aser_rayleigh() {
        // m = 1: ρ(1 − √(a/(1+a))), a = τγ̄.
        let (g, tau) = (3.0, 0.7);
        let got = first_hop_aser(1, 1.0 / g, &ModulationParams { rho: 1.0, tau });
        let a = tau * g;
        assert!((got - (1.0 - (a / (1.0 + a)).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn stable_and_direct_aser_agree() {
        let model = small_model();
        for m in [ModulationParams::BPSK, ModulationParams::BFSK, ModulationParams::QPSK] {
            let a = aser(&model, &m).unwrap().value;
            let b = aser_direct(&model, &m).unwrap().value;
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn tk_term_counts() {
        let model = small_model();
        let terms = tk_terms(&model, 0.5);
        // per branch: 6 T1, 3 T2, 6 T3 for m1 = 3
        assert_eq!(terms.len(), 30);
        assert!(terms.iter().all(|t| t.spec.upper[0].alpha == 0.5 * model.stats.beta));
    }

    #[test]
    fn inverse_moment_is_continuous_at_zero() {
        let model = small_model();
        let at0 = inverse_snr_moment(&model, 0.0).unwrap().value;
        let near = inverse_snr_moment(&model, 1e-6).unwrap().value;
        assert!((at0 - near).abs() < 1e-6 * at0, "{at0} vs {near}");
    }

    #[test]
    fn divergent_moment_for_rayleigh() {
        let mut cfg = small_model().config;
        cfg.nak.m1 = 1.0;
        let model = EndToEnd::new(cfg).unwrap();
        assert!(matches!(capacity_cifr(&model), Err(Error::DivergentMoment(_))));
    }

    #[test]
    fn cutoff_root() {
        let model = small_model();
        let cut = opra_cutoff(&model).unwrap();
        assert!(cut.residual.abs() <= CUTOFF_TOL);
        assert!(cut.gamma_star > 0.0 && cut.gamma_star <= 1.0);
        assert!(cut.bracket.0 < cut.gamma_star && cut.gamma_star < cut.bracket.1);
    }
}
