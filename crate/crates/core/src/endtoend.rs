//! End-to-end SNR of the fixed-gain relay link: γ_eq = γ₁γ₂ / (γ₂ + C).
//!
//! The relay power is a two-branch mixture (unclipped harvested power with
//! probability w₁, full battery with probability w₂), so every distribution
//! function below is w₁·(branch 1) + w₂·(branch 2).

use serde::{Deserialize, Serialize};

use crate::channels::{
    battery_split, gamma1_ccdf, gamma1_mean, gamma1_pdf_cdf, harvested_power_mean, upsilon2_scale,
    AlphaMuParams, EnergyConfig, NakagamiParams, Scheme,
};
use crate::error::{Error, Result};
use crate::result::{Diagnostics, MetricResult};
use crate::specfun::contour::Kernel;
use crate::specfun::fox::evaluate_kernel;
use crate::specfun::gamma::ln_gamma;
use crate::specfun::{EvalOptions, GammaPair, HFunctionSpec, IncompleteHSpec};

/// Values this far outside [0, 1] are reported as accuracy failures instead
/// of being clamped.
pub const CLAMP_SLACK: f64 = 1e-8;

/// Full system description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub nak: NakagamiParams,
    pub am: AlphaMuParams,
    pub energy: EnergyConfig,
    /// Fixed relay gain constant C.
    pub c: f64,
}

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Default for SystemConfig {
    /// Reference system: m₁ = 3, Ω₁ = Ω₂ = 5, α₂ = 2, μ₂ = 4.2, C = 1,
    /// d₁ = d₂ = 25 m, δ = 2.7, P_S = 1 W, P_S/N₁ = 40 dB, P_S/N₂ = 100 dB,
    /// time switching with ε = θ = 0.7, T₀ = T₁ = 1 s, B_R = 500 J.
    fn default() -> Self {
        SystemConfig {
            nak: NakagamiParams { m1: 3.0, omega1: 5.0 },
            am: AlphaMuParams { alpha2: 2.0, mu2: 4.2, omega2: 5.0 },
            energy: EnergyConfig {
                scheme: Scheme::TimeSwitching,
                kappa: 0.7,
                theta_eff: 0.7,
                t0: 1.0,
                t1: 1.0,
                battery: 500.0,
                source_power: 1.0,
                d1: 25.0,
                d2: 25.0,
                delta: 2.7,
                n1: 1.0 / db_to_linear(40.0),
                n2: 1.0 / db_to_linear(100.0),
            },
            c: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.nak.validate()?;
        self.am.validate()?;
        self.energy.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("relay gain constant C must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// Sets N₁ from P_S/N₁ in dB.
    pub fn with_ps_n1_db(mut self, db: f64) -> Self {
        self.energy.n1 = self.energy.source_power / db_to_linear(db);
        self
    }

    /// Sets N₂ from P_S/N₂ in dB.
    pub fn with_ps_n2_db(mut self, db: f64) -> Self {
        self.energy.n2 = self.energy.source_power / db_to_linear(db);
        self
    }
}

/// Battery mixture weights (w₁ = P(P_E < P_B), w₂ = 1 − w₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub w1: f64,
    pub w2: f64,
}

impl MixtureWeights {
    pub fn new(nak: &NakagamiParams, energy: &EnergyConfig) -> Self {
        let (below, above) = battery_split(nak, energy);
        if below <= 0.5 {
            MixtureWeights { w1: below, w2: 1.0 - below }
        } else {
            MixtureWeights { w1: 1.0 - above, w2: above }
        }
    }

    pub fn get(&self, branch: usize) -> f64 {
        if branch == 0 { self.w1 } else { self.w2 }
    }
}

/// Scalar quantities derived from a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkStatistics {
    pub gamma1_mean: f64,
    /// β = m₁ / γ̄₁.
    pub beta: f64,
    pub harvested_power_mean: f64,
    pub upsilon2_scale: f64,
    /// γ̄₂ of each branch: E[P_E]·Ῡ₂ and P_B·Ῡ₂.
    pub gamma2_mean: [f64; 2],
    pub weights: MixtureWeights,
}

impl LinkStatistics {
    pub fn new(cfg: &SystemConfig) -> Self {
        let g1 = gamma1_mean(&cfg.nak, &cfg.energy);
        let pe = harvested_power_mean(&cfg.nak, &cfg.energy);
        let ups = upsilon2_scale(&cfg.am, &cfg.energy);
        LinkStatistics {
            gamma1_mean: g1,
            beta: cfg.nak.m1 / g1,
            harvested_power_mean: pe,
            upsilon2_scale: ups,
            gamma2_mean: [pe * ups, cfg.energy.battery_power() * ups],
            weights: MixtureWeights::new(&cfg.nak, &cfg.energy),
        }
    }
}

/// One (n, p) term of the double sum Σ_{n<m₁} Σ_{p≤n} C(n,p)/n! (βz)^{n−p} H_p(·).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HTermRow {
    pub n: usize,
    pub p: usize,
    /// C(n, p) / n! = 1 / (p! (n−p)!).
    pub coefficient: f64,
}

/// Parameter blocks Δ_i of the two branches and the term rows shared by them.
#[derive(Debug, Clone)]
pub struct HTermTable {
    pub m1: usize,
    pub rows: Vec<HTermRow>,
    /// H^{q,0}_{0,q}(· | ∅; Δ_i) per branch and per p, argument left at 1.
    pub level: [Vec<HFunctionSpec>; 2],
    /// w·dH/dw = H^{q,1}_{1,q+1}(· | (0,1); Δ_i, (1,1)) per branch and per p.
    pub slope: [Vec<HFunctionSpec>; 2],
    /// ϰ_i: the H argument is ϰ_i z^{α₂/2}.
    pub kappa: [f64; 2],
    /// K_i = (α₂/2)/(Γ(m₁)Γ(μ₂)) and (α₂/2)/Γ(μ₂).
    pub prefactor: [f64; 2],
}

/// Δ_i for index p: (μ₂,1), (p, α₂/2) and, on branch 1, (m₁, α₂/2).
pub fn delta_block(branch: usize, p: usize, m1: f64, alpha2: f64, mu2: f64) -> Vec<GammaPair> {
    let mut block = vec![GammaPair::new(mu2, 1.0), GammaPair::new(p as f64, alpha2 / 2.0)];
    if branch == 0 {
        block.push(GammaPair::new(m1, alpha2 / 2.0));
    }
    block
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl HTermTable {
    pub fn new(cfg: &SystemConfig, stats: &LinkStatistics) -> Result<Self> {
        let m1 = cfg.nak.integer_m1()?;
        let (alpha, mu) = (cfg.am.alpha2, cfg.am.mu2);
        let mut rows = Vec::new();
        for n in 0..m1 {
            for p in 0..=n {
                rows.push(HTermRow { n, p, coefficient: 1.0 / (factorial(p) * factorial(n - p)) });
            }
        }
        let mut level = [Vec::new(), Vec::new()];
        let mut slope = [Vec::new(), Vec::new()];
        for branch in 0..2 {
            for p in 0..m1 {
                let delta = delta_block(branch, p, cfg.nak.m1, alpha, mu);
                let q = delta.len();
                level[branch].push(HFunctionSpec::new(q, 0, vec![], delta.clone(), 1.0));
                let mut lower = delta;
                lower.push(GammaPair::new(1.0, 1.0));
                slope[branch].push(HFunctionSpec::new(q, 1, vec![GammaPair::new(0.0, 1.0)], lower, 1.0));
            }
        }
        let m1f = cfg.nak.m1;
        let g1 = stats.gamma1_mean;
        let kappa = [
            mu * (m1f * m1f * cfg.c / (g1 * stats.gamma2_mean[0])).powf(alpha / 2.0),
            mu * (m1f * cfg.c / (g1 * stats.gamma2_mean[1])).powf(alpha / 2.0),
        ];
        let half = alpha / 2.0;
        let prefactor = [
            half * (-ln_gamma(m1f) - ln_gamma(mu)).exp(),
            half * (-ln_gamma(mu)).exp(),
        ];
        Ok(HTermTable { m1, rows, level, slope, kappa, prefactor })
    }
}

struct Terms {
    values: Vec<f64>,
    errors: Vec<f64>,
    diagnostics: Diagnostics,
}

fn eval_at(spec: &HFunctionSpec, w: f64, opts: &EvalOptions) -> Result<(f64, f64, Diagnostics)> {
    let spec = spec.with_argument(w);
    let kernel = Kernel::from_spec(&IncompleteHSpec::from(&spec))?;
    let (v, e, d) = evaluate_kernel(&kernel, spec.argument, opts)?;
    Ok((v.re, e, d))
}

/// Evaluation model for the end-to-end SNR distribution of one configuration.
#[derive(Debug, Clone)]
pub struct EndToEnd {
    pub config: SystemConfig,
    pub stats: LinkStatistics,
    pub table: HTermTable,
    /// Branch kernels for p = 0 with the contour moved past the pole at 0.
    residual: [Kernel; 2],
    pub options: EvalOptions,
}

impl EndToEnd {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let stats = LinkStatistics::new(&config);
        let table = HTermTable::new(&config, &stats)?;
        let shifted = |b: usize| -> Result<Kernel> {
            Kernel::from_spec(&IncompleteHSpec::from(&table.level[b][0]))?.shifted_left()
        };
        let residual = [shifted(0)?, shifted(1)?];
        Ok(EndToEnd { config, stats, table, residual, options: EvalOptions::default() })
    }

    fn m1(&self) -> usize {
        self.table.m1
    }

    fn h_argument(&self, branch: usize, z: f64) -> f64 {
        self.table.kappa[branch] * z.powf(self.config.am.alpha2 / 2.0)
    }

    /// e^{−βz} (βz)^{m₁−1} underflows: the branch tail is zero to double precision.
    fn tail_vanishes(&self, z: f64) -> bool {
        let bz = self.stats.beta * z;
        -bz + (self.m1() as f64 - 1.0) * bz.max(1.0).ln() < -745.0
    }

    fn level_terms(&self, branch: usize, w: f64, residual_first: bool) -> Result<Terms> {
        let mut t = Terms { values: Vec::new(), errors: Vec::new(), diagnostics: Diagnostics::default() };
        for (p, spec) in self.table.level[branch].iter().enumerate() {
            let (v, e, d) = if p == 0 && residual_first {
                let (v, e, d) = evaluate_kernel(&self.residual[branch], w.into(), &self.options)?;
                (v.re, e, d)
            } else {
                eval_at(spec, w, &self.options)?
            };
            t.values.push(v);
            t.errors.push(e);
            t.diagnostics.absorb(&d);
        }
        Ok(t)
    }

    /// S_p = (1/p!) Σ_{k=0}^{m₁−1−p} (βz)^k / k!.
    fn partial_sums(&self, z: f64) -> Vec<f64> {
        let bz = self.stats.beta * z;
        let m1 = self.m1();
        (0..m1)
            .map(|p| {
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..m1 - p {
                    term *= bz / k as f64;
                    sum += term;
                }
                sum / factorial(p)
            })
            .collect()
    }

    /// Branch complementary CDF F^c_i(z) = K_i e^{−βz} Σ_p S_p H_p(ϰ_i z^{α/2}).
    fn branch_tail(&self, branch: usize, z: f64) -> Result<MetricResult> {
        if z == 0.0 {
            return Ok(MetricResult::exact(1.0));
        }
        if self.tail_vanishes(z) {
            return Ok(MetricResult::exact(0.0));
        }
        let t = self.level_terms(branch, self.h_argument(branch, z), false)?;
        let scale = self.table.prefactor[branch] * (-self.stats.beta * z).exp();
        let sums = self.partial_sums(z);
        let value = scale * sums.iter().zip(&t.values).map(|(s, h)| s * h).sum::<f64>();
        let error = scale * sums.iter().zip(&t.errors).map(|(s, e)| s * e).sum::<f64>();
        Ok(MetricResult::new(value, error, t.diagnostics))
    }

    /// Branch CDF on the lower side: the pole of H_0 at the origin reproduces
    /// F_{γ₁}(z) exactly, and the remaining terms are small.
    fn branch_head(&self, branch: usize, z: f64) -> Result<MetricResult> {
        if z == 0.0 {
            return Ok(MetricResult::exact(0.0));
        }
        let (_, f1) = gamma1_pdf_cdf(&self.config.nak, &self.config.energy, z)?;
        let t = self.level_terms(branch, self.h_argument(branch, z), true)?;
        let scale = self.table.prefactor[branch] * (-self.stats.beta * z).exp();
        let sums = self.partial_sums(z);
        let rest = scale * sums.iter().zip(&t.values).map(|(s, h)| s * h).sum::<f64>();
        let error = scale * sums.iter().zip(&t.errors).map(|(s, e)| s * e).sum::<f64>() + 1e-15 * f1;
        Ok(MetricResult::new(f1 - rest, error, t.diagnostics))
    }

    /// γ_eq ≤ γ₁, so the head is tried first below the median of γ₁ and
    /// abandoned once it exceeds one half.
    fn lower_side(&self, z: f64) -> bool {
        gamma1_ccdf(&self.config.nak, &self.config.energy, z) >= 0.5
    }

    /// Branch CDF F_i(z) (i = 0 for the harvested-power branch, 1 for the battery branch).
    pub fn branch_cdf(&self, branch: usize, z: f64) -> Result<MetricResult> {
        check_point(z)?;
        if self.lower_side(z) {
            let head = self.branch_head(branch, z)?;
            if head.value <= 0.5 {
                return Ok(head);
            }
        }
        let mut r = self.branch_tail(branch, z)?;
        r.value = 1.0 - r.value;
        Ok(r)
    }

    /// Branch complementary CDF F^c_i(z).
    pub fn branch_ccdf(&self, branch: usize, z: f64) -> Result<MetricResult> {
        check_point(z)?;
        if self.lower_side(z) {
            let mut r = self.branch_head(branch, z)?;
            if r.value <= 0.5 {
                r.value = 1.0 - r.value;
                return Ok(r);
            }
        }
        self.branch_tail(branch, z)
    }

    fn mixture<F>(&self, z: f64, branch_fn: F) -> Result<MetricResult>
    where
        F: Fn(usize, f64) -> Result<MetricResult>,
    {
        let mut out = MetricResult::exact(0.0);
        for b in 0..2 {
            let w = self.stats.weights.get(b);
            if w == 0.0 {
                continue;
            }
            let r = branch_fn(b, z)?;
            out.value += w * r.value;
            out.error_estimate += w * r.error_estimate;
            out.diagnostics.absorb(&r.diagnostics);
        }
        Ok(out)
    }

    /// F_{γ_eq}(z).
    pub fn cdf(&self, z: f64) -> Result<MetricResult> {
        let r = self.mixture(z, |b, z| self.branch_cdf(b, z))?;
        clamp_probability(r, "end-to-end CDF")
    }

    /// 1 − F_{γ_eq}(z), computed on its accurate side.
    pub fn ccdf(&self, z: f64) -> Result<MetricResult> {
        let r = self.mixture(z, |b, z| self.branch_ccdf(b, z))?;
        clamp_probability(r, "end-to-end CCDF")
    }

    /// Branch PDF f_i(z) = −dF^c_i/dz.
    pub fn branch_pdf(&self, branch: usize, z: f64) -> Result<MetricResult> {
        check_point(z)?;
        if z == 0.0 || self.tail_vanishes(z) {
            return Ok(MetricResult::exact(0.0));
        }
        let m1 = self.m1();
        let beta = self.stats.beta;
        let bz = beta * z;
        let w = self.h_argument(branch, z);
        let level = self.level_terms(branch, w, false)?;
        let mut diagnostics = level.diagnostics;
        let sums = self.partial_sums(z);
        let half_alpha = self.config.am.alpha2 / 2.0;
        let mut value = 0.0;
        let mut error = 0.0;
        let mut magnitude = 0.0;
        for p in 0..m1 {
            let k = m1 - 1 - p;
            let lead = beta / factorial(p) * bz.powi(k as i32) / factorial(k);
            let (d, de, dd) = eval_at(&self.table.slope[branch][p], w, &self.options)?;
            diagnostics.absorb(&dd);
            let (a, b) = (lead * level.values[p], half_alpha / z * sums[p] * d);
            value += a - b;
            magnitude += a.abs() + b.abs();
            error += lead * level.errors[p] + half_alpha / z * sums[p] * de;
        }
        // Far below γ̄₁ the terms cancel through powers z⁰…z^{m₁−2}.
        error += 8.0 * f64::EPSILON * magnitude;
        let scale = self.table.prefactor[branch] * (-bz).exp();
        Ok(MetricResult::new(scale * value, scale * error, diagnostics))
    }

    /// f_{γ_eq}(z).
    pub fn pdf(&self, z: f64) -> Result<MetricResult> {
        let mut r = self.mixture(z, |b, z| self.branch_pdf(b, z))?;
        if r.value < 0.0 {
            if r.value >= -CLAMP_SLACK.max(r.error_estimate) {
                r.value = 0.0;
            } else {
                return Err(Error::Accuracy { what: "end-to-end PDF", value: r.value });
            }
        }
        Ok(r)
    }
}

fn check_point(z: f64) -> Result<()> {
    if z.is_nan() || z < 0.0 {
        Err(Error::Domain(format!("end-to-end SNR law evaluated at {z}")))
    } else {
        Ok(())
    }
}

fn clamp_probability(mut r: MetricResult, what: &'static str) -> Result<MetricResult> {
    if r.value < 0.0 {
        if r.value < -CLAMP_SLACK {
            return Err(Error::Accuracy { what, value: r.value });
        }
        r.value = 0.0;
    } else if r.value > 1.0 {
        if r.value > 1.0 + CLAMP_SLACK {
            return Err(Error::Accuracy { what, value: r.value });
        }
        r.value = 1.0;
    }
    Ok(r)
}

/// γ_eq for one realization.
pub fn e2e_snr(gamma1: f64, gamma2: f64, c: f64) -> f64 {
    gamma1 / (1.0 + c / gamma2)
}

pub fn e2e_cdf(cfg: &SystemConfig, z: f64) -> Result<MetricResult> {
    EndToEnd::new(*cfg)?.cdf(z)
}

pub fn e2e_ccdf(cfg: &SystemConfig, z: f64) -> Result<MetricResult> {
    EndToEnd::new(*cfg)?.ccdf(z)
}

pub fn e2e_pdf(cfg: &SystemConfig, z: f64) -> Result<MetricResult> {
    EndToEnd::new(*cfg)?.pdf(z)
}

/// PDF of the branch-1 second-hop SNR γ₂ = P_E·Υ₂ as a Fox H-function:
/// (α₂/(2xΓ(m₁)Γ(μ₂))) H^{2,0}_{0,2}(μ₂(m₁x/γ̄₂)^{α₂/2} | (μ₂,1), (m₁,α₂/2)).
pub fn harvested_gamma2_pdf(cfg: &SystemConfig, x: f64) -> Result<MetricResult> {
    check_point(x)?;
    if x == 0.0 {
        return Ok(MetricResult::exact(0.0));
    }
    let stats = LinkStatistics::new(cfg);
    let (m1, alpha, mu) = (cfg.nak.m1, cfg.am.alpha2, cfg.am.mu2);
    let arg = mu * (m1 * x / stats.gamma2_mean[0]).powf(alpha / 2.0);
    let spec = HFunctionSpec::new(
        2,
        0,
        vec![],
        vec![GammaPair::new(mu, 1.0), GammaPair::new(m1, alpha / 2.0)],
        arg,
    );
    let (v, e, d) = eval_at(&spec, arg, &EvalOptions::default())?;
    let scale = alpha / (2.0 * x) * (-ln_gamma(m1) - ln_gamma(mu)).exp();
    Ok(MetricResult::new(scale * v, scale * e, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_infinity, QuadOptions};
    use statrs::function::gamma::gamma_ur;

    fn small_config() -> SystemConfig {
        let mut cfg = SystemConfig::default();
        cfg.energy.d1 = 1.0;
        cfg.energy.d2 = 1.0;
        cfg.energy.battery = 2.0;
        cfg.energy.n1 = 0.2;
        cfg.energy.n2 = 0.5;
        cfg
    }

    /// F^c by direct quadrature over γ₂ of branch `b`.
    fn tail_by_quadrature(model: &EndToEnd, b: usize, z: f64) -> f64 {
        let cfg = &model.config;
        let beta = model.stats.beta;
        let m1 = cfg.nak.m1;
        let (alpha, mu) = (cfg.am.alpha2, cfg.am.mu2);
        let g2 = model.stats.gamma2_mean[b];
        let f = |x: f64| -> Result<f64> {
            if x == 0.0 {
                return Ok(0.0);
            }
            let density = if b == 0 {
                harvested_gamma2_pdf(cfg, x)?.value
            } else {
                let r = x / g2;
                let u = mu * r.powf(alpha / 2.0);
                (alpha / 2.0) * mu.powf(mu) / (ln_gamma(mu).exp() * g2) * r.powf(alpha * mu / 2.0 - 1.0) * (-u).exp()
            };
            Ok(gamma_ur(m1, beta * z * (1.0 + cfg.c / x)) * density)
        };
        integrate_to_infinity(f, 0.0, g2, &[], QuadOptions::rel(1e-11)).unwrap().value
    }

    #[test]
    fn reference_operating_point() {
        let stats = LinkStatistics::new(&SystemConfig::default());
        assert!((stats.gamma1_mean - 8.4049).abs() < 1e-3, "{}", stats.gamma1_mean);
        assert!(stats.weights.w1 > 1.0 - 1e-12);
    }

    #[test]
    fn branch_tails_match_quadrature() {
        let model = EndToEnd::new(small_config()).unwrap();
        assert!(model.stats.weights.w1 > 0.05 && model.stats.weights.w2 > 0.05);
        for b in 0..2 {
            for z in [0.05, 0.7, 3.0, 12.0] {
                let exact = tail_by_quadrature(&model, b, z);
                let got = model.branch_ccdf(b, z).unwrap().value;
                assert!((got - exact).abs() <= 1e-9 * exact.max(1e-3), "b={b} z={z}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn head_and_tail_routes_agree() {
        let model = EndToEnd::new(small_config()).unwrap();
        for b in 0..2 {
            for z in [0.01, 0.3, 1.0, 4.0] {
                let head = model.branch_head(b, z).unwrap().value;
                let tail = model.branch_tail(b, z).unwrap().value;
                assert!((head + tail - 1.0).abs() < 1e-11, "b={b} z={z}: {head} + {tail}");
            }
        }
    }

    #[test]
    fn cdf_limits() {
        let model = EndToEnd::new(small_config()).unwrap();
        assert_eq!(model.cdf(0.0).unwrap().value, 0.0);
        assert_eq!(model.ccdf(0.0).unwrap().value, 1.0);
        assert_eq!(model.cdf(1e9).unwrap().value, 1.0);
        assert!(model.cdf(-1.0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for battery in [1e-3, 0.5, 2.0, 50.0, 1e6] {
            let mut cfg = small_config();
            cfg.energy.battery = battery;
            let w = MixtureWeights::new(&cfg.nak, &cfg.energy);
            assert!((w.w1 + w.w2 - 1.0).abs() <= f64::EPSILON);
        }
    }
}
