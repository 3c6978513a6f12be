//! Reference engines: a Monte-Carlo simulator of the relay link and an
//! adaptive-quadrature oracle built only on the end-to-end CDF/PDF.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{LN_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channels::{
    gamma1_from_channel, harvested_energy, relay_power_from_energy, sample_channel_power, sample_upsilon2,
};
use crate::endtoend::{e2e_snr, EndToEnd, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::ModulationParams;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::result::MetricResult;

/// How the harvested energy relates to the first-hop channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMode {
    /// One |h₁|² drives both γ₁ and the harvested energy.
    #[serde(rename = "coupled")]
    Coupled,
    /// The relay power is drawn independently of γ₁: the battery branch is
    /// chosen from a second |h₁|² draw and the unclipped branch uses a third,
    /// unconditioned draw, which is the mixture the closed forms describe.
    #[serde(rename = "independent")]
    IndependentApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimBatch {
    pub config: SystemConfig,
    pub mode: SimMode,
    pub n_draws: u64,
    pub seed: u64,
    pub streams: usize,
}

impl SimBatch {
    pub fn new(config: SystemConfig, n_draws: u64, seed: u64) -> Self {
        SimBatch { config, mode: SimMode::Coupled, n_draws, seed, streams: 64 }
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n_draws == 0 || self.streams == 0 {
            return Err(Error::Config("a batch needs at least one draw and one stream".into()));
        }
        Ok(())
    }

    /// Number of draws handled by stream `s`.
    fn stream_len(&self, s: usize) -> u64 {
        let k = self.streams as u64;
        self.n_draws / k + u64::from((s as u64) < self.n_draws % k)
    }
}

/// Empirical CDF value at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub z: f64,
    pub cdf: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: u64,
    pub cdf: Vec<CdfPoint>,
    /// Hill estimate of the tail index of the averaged quantity, where relevant.
    pub tail_index: Option<f64>,
    /// Set when the tail index is ≤ 1, i.e. the sample mean is not trustworthy.
    pub unstable: bool,
}

/// One realization of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_eq: f64,
}

pub fn draw_link<R: rand::Rng + ?Sized>(cfg: &SystemConfig, mode: SimMode, rng: &mut R) -> LinkDraw {
    let e = &cfg.energy;
    let h = sample_channel_power(&cfg.nak, rng);
    let gamma1 = gamma1_from_channel(e, h);
    let relay_power = match mode {
        SimMode::Coupled => relay_power_from_energy(e, harvested_energy(e, h)),
        SimMode::IndependentApproximation => {
            let branch = sample_channel_power(&cfg.nak, rng);
            let harvested = harvested_energy(e, sample_channel_power(&cfg.nak, rng));
            if harvested_energy(e, branch) < e.battery {
                harvested / e.t1
            } else {
                e.battery_power()
            }
        }
    };
    let gamma2 = relay_power * sample_upsilon2(&cfg.am, e, rng);
    LinkDraw { gamma1, gamma2, gamma_eq: e2e_snr(gamma1, gamma2, cfg.c) }
}

fn stream_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Runs `f` on every stream in parallel and returns the per-stream results in
/// stream order.
fn per_stream<T, F>(batch: &SimBatch, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..batch.streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(batch.seed, s);
            f(batch.stream_len(s), &mut rng)
        })
        .collect()
}

/// Running means and co-moments of a small vector of per-draw quantities.
#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments { n: 0, mean: vec![0.0; k], comoment: vec![0.0; k * k] }
    }

    fn push(&mut self, x: &[f64]) {
        let k = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let k = self.mean.len();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] += other.comoment[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.n += other.n;
    }

    fn covariance(&self, i: usize, j: usize) -> f64 {
        let k = self.mean.len();
        if self.n < 2 {
            return 0.0;
        }
        self.comoment[i * k + j] / (self.n - 1) as f64
    }

    /// Delta-method standard error of g(mean) for gradient `grad`.
    fn std_error(&self, grad: &[f64]) -> f64 {
        let mut var = 0.0;
        for (i, gi) in grad.iter().enumerate() {
            for (j, gj) in grad.iter().enumerate() {
                var += gi * gj * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Ordered(f64);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Keeps the `cap` largest values seen.
#[derive(Debug, Clone)]
struct TopK {
    cap: usize,
    heap: BinaryHeap<Reverse<Ordered>>,
}

impl TopK {
    fn new(cap: usize) -> Self {
        TopK { cap, heap: BinaryHeap::with_capacity(cap + 1) }
    }

    fn push(&mut self, v: f64) {
        if self.heap.len() < self.cap {
            self.heap.push(Reverse(Ordered(v)));
        } else if self.heap.peek().is_some_and(|m| v > m.0 .0) {
            self.heap.pop();
            self.heap.push(Reverse(Ordered(v)));
        }
    }

    fn merge(&mut self, other: TopK) {
        for Reverse(Ordered(v)) in other.heap {
            self.push(v);
        }
    }

    /// Hill estimator of the tail index from the retained order statistics.
    fn hill(self) -> Option<f64> {
        let mut v: Vec<f64> = self.heap.into_iter().map(|r| r.0 .0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if v.len() < 10 || !(v[v.len() - 1] > 0.0) {
            return None;
        }
        let last = v[v.len() - 1];
        let k = (v.len() - 1) as f64;
        let s: f64 = v[..v.len() - 1].iter().map(|x| (x / last).ln()).sum();
        Some(k / s)
    }
}

/// Default CDF grid: 121 log-spaced points from 10⁻³γ̄₁ to 10³γ̄₁.
pub fn default_grid(cfg: &SystemConfig) -> Vec<f64> {
    let g = crate::channels::gamma1_mean(&cfg.nak, &cfg.energy);
    (0..=120).map(|k| g * 10f64.powf(-3.0 + k as f64 * 0.05)).collect()
}

/// Empirical CDF of γ_eq on `grid` together with its sample mean.
pub fn simulate_cdf(batch: &SimBatch, grid: &[f64]) -> Result<EmpiricalStats> {
    batch.validate()?;
    let cfg = batch.config;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let parts = per_stream(batch, |n, rng| {
        let mut m = Moments::new(1);
        let mut counts = vec![0u64; sorted.len()];
        for _ in 0..n {
            let d = draw_link(&cfg, batch.mode, rng);
            m.push(&[d.gamma_eq]);
            let idx = sorted.partition_point(|&z| z < d.gamma_eq);
            if idx < counts.len() {
                counts[idx] += 1;
            }
        }
        (m, counts)
    });
    let mut moments = Moments::new(1);
    let mut counts = vec![0u64; sorted.len()];
    for (m, c) in parts {
        moments.merge(&m);
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    let n = moments.n as f64;
    let mut acc = 0u64;
    let cdf = sorted
        .iter()
        .zip(&counts)
        .map(|(&z, &c)| {
            acc += c;
            let f = acc as f64 / n;
            CdfPoint { z, cdf: f, std_error: (f * (1.0 - f) / n).sqrt() }
        })
        .collect();
    Ok(EmpiricalStats {
        estimate: moments.mean[0],
        std_error: moments.std_error(&[1.0]),
        draws: moments.n,
        cdf,
        tail_index: None,
        unstable: false,
    })
}

pub fn simulate_e2e(batch: &SimBatch) -> Result<EmpiricalStats> {
    simulate_cdf(batch, &default_grid(&batch.config))
}

/// sup_z |F_a(z) − F_b(z)| over a shared grid.
pub fn cdf_sup_distance(a: &EmpiricalStats, b: &EmpiricalStats) -> f64 {
    a.cdf.iter().zip(&b.cdf).map(|(x, y)| (x.cdf - y.cdf).abs()).fold(0.0, f64::max)
}

/// Average of the exact conditional error probability ρ·erfc(√(τγ_eq)).
pub fn simulate_aser(batch: &SimBatch, modulation: &ModulationParams) -> Result<EmpiricalStats> {
    batch.validate()?;
    modulation.validate()?;
    let cfg = batch.config;
    let parts = per_stream(batch, |n, rng| {
        let mut m = Moments::new(1);
        for _ in 0..n {
            let g = draw_link(&cfg, batch.mode, rng).gamma_eq;
            m.push(&[modulation.rho * erfc((modulation.tau * g).sqrt())]);
        }
        m
    });
    let mut moments = Moments::new(1);
    for m in &parts {
        moments.merge(m);
    }
    Ok(EmpiricalStats {
        estimate: moments.mean[0],
        std_error: moments.std_error(&[1.0]),
        draws: moments.n,
        cdf: vec![],
        tail_index: None,
        unstable: false,
    })
}

/// Adaptation policy of a capacity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Ora,
    Opra,
    Cifr,
    Tcifr,
}

const HILL_ORDER: usize = 500;

pub fn simulate_capacity(batch: &SimBatch, policy: Policy, cutoff: Option<f64>) -> Result<EmpiricalStats> {
    batch.validate()?;
    let cut = match (policy, cutoff) {
        (Policy::Opra | Policy::Tcifr, None) => {
            return Err(Error::Config(format!("{policy:?} needs a cutoff SNR")));
        }
        (_, c) => c.unwrap_or(0.0),
    };
    if !(cut >= 0.0) {
        return Err(Error::Config(format!("cutoff must be nonnegative, got {cut}")));
    }
    let cfg = batch.config;
    let dim = if policy == Policy::Tcifr { 2 } else { 1 };
    let track_tail = matches!(policy, Policy::Cifr | Policy::Tcifr);
    let parts = per_stream(batch, |n, rng| {
        let mut m = Moments::new(dim);
        let mut top = TopK::new(if track_tail { HILL_ORDER } else { 0 });
        for _ in 0..n {
            let g = draw_link(&cfg, batch.mode, rng).gamma_eq;
            match policy {
                Policy::Ora => m.push(&[(1.0 + g).log2()]),
                Policy::Opra => m.push(&[if g > cut { (g / cut).log2() } else { 0.0 }]),
                Policy::Cifr => {
                    m.push(&[1.0 / g]);
                    top.push(1.0 / g);
                }
                Policy::Tcifr => {
                    let above = g > cut;
                    let inv = if above { 1.0 / g } else { 0.0 };
                    m.push(&[if above { 1.0 } else { 0.0 }, inv]);
                    if above {
                        top.push(inv);
                    }
                }
            }
        }
        (m, top)
    });
    let mut moments = Moments::new(dim);
    let mut top = TopK::new(if track_tail { HILL_ORDER } else { 0 });
    for (m, t) in parts {
        moments.merge(&m);
        top.merge(t);
    }
    let tail_index = if track_tail { top.hill() } else { None };
    let (estimate, std_error) = match policy {
        Policy::Ora | Policy::Opra => (moments.mean[0], moments.std_error(&[1.0])),
        Policy::Cifr => {
            let mu = moments.mean[0];
            ((1.0 + 1.0 / mu).log2(), moments.std_error(&[-1.0 / (LN_2 * mu * (mu + 1.0))]))
        }
        Policy::Tcifr => {
            let (p, mu) = (moments.mean[0], moments.mean[1]);
            if mu == 0.0 {
                (0.0, 0.0)
            } else {
                let rate = (1.0 + 1.0 / mu).log2();
                (p * rate, moments.std_error(&[rate, -p / (LN_2 * mu * (mu + 1.0))]))
            }
        }
    };
    Ok(EmpiricalStats {
        estimate,
        std_error,
        draws: moments.n,
        cdf: vec![],
        tail_index,
        unstable: tail_index.is_some_and(|a| a <= 1.0),
    })
}

/// Quantity computed by [`quadrature_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleTarget {
    Aser(ModulationParams),
    Ora,
    Opra { gamma_star: f64 },
    InvMoment { x: f64 },
    Cifr,
    Tcifr { gamma0: f64 },
}

type Law<'a> = Box<dyn Fn(f64) -> Result<f64> + Sync + 'a>;

/// The distribution functions an oracle integrates.
pub struct DistributionOracle<'a> {
    cdf: Law<'a>,
    ccdf: Law<'a>,
    pdf: Law<'a>,
    /// Typical SNR scale, used to map [0, ∞) onto a finite interval.
    scale: f64,
    pub options: QuadOptions,
}

impl<'a> DistributionOracle<'a> {
    /// Oracle over arbitrary CCDF/PDF functions; the CDF is taken as 1 − CCDF.
    pub fn new<C, P>(ccdf: C, pdf: P, scale: f64) -> Self
    where
        C: Fn(f64) -> Result<f64> + Sync + Clone + 'a,
        P: Fn(f64) -> Result<f64> + Sync + 'a,
    {
        let tail = ccdf.clone();
        DistributionOracle {
            cdf: Box::new(move |z| Ok(1.0 - tail(z)?)),
            ccdf: Box::new(ccdf),
            pdf: Box::new(pdf),
            scale,
            options: QuadOptions::rel(1e-9),
        }
    }

    pub fn from_model(model: &'a EndToEnd) -> Self {
        DistributionOracle {
            cdf: Box::new(move |z| Ok(model.cdf(z)?.value)),
            ccdf: Box::new(move |z| Ok(model.ccdf(z)?.value)),
            pdf: Box::new(move |z| Ok(model.pdf(z)?.value)),
            scale: model.stats.gamma1_mean,
            options: QuadOptions::rel(1e-9),
        }
    }

    fn tail_integral<F>(&self, from: f64, f: F) -> Result<MetricResult>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let q = integrate_to_infinity(f, from, self.scale, &[], self.options)?;
        Ok(MetricResult { value: q.value, error_estimate: q.error, ..MetricResult::exact(0.0) })
    }

    fn inverse_moment(&self, x: f64) -> Result<MetricResult> {
        if x > 0.0 {
            return self.tail_integral(x, |z| Ok((self.pdf)(z)? / z));
        }
        // Below the scale S: ∫₀^S f/z = F(S)/S + ∫₀^S F/z², with z = S·e^{−t}
        // so the algebraic endpoint decays exponentially in t. The CDF keeps
        // an absolute error floor near 0 where the PDF does not.
        let s = self.scale;
        let head = integrate_to_infinity(
            |t| {
                if t > 345.0 {
                    return Ok(0.0);
                }
                let z = s * (-t).exp();
                Ok((self.cdf)(z)? / z)
            },
            0.0,
            4.0,
            &[],
            self.options,
        )?;
        let edge = (self.cdf)(s)? / s;
        let tail = self.tail_integral(s, |z| Ok((self.pdf)(z)? / z))?;
        Ok(MetricResult {
            value: edge + head.value + tail.value,
            error_estimate: head.error + tail.error_estimate,
            ..MetricResult::exact(0.0)
        })
    }

    pub fn evaluate(&self, target: OracleTarget) -> Result<MetricResult> {
        match target {
            OracleTarget::Aser(m) => {
                m.validate()?;
                // u = √z removes the z^{−1/2} endpoint behaviour.
                let f = |u: f64| -> Result<f64> {
                    let z = u * u;
                    Ok(2.0 * (-m.tau * z).exp() * (self.cdf)(z)?)
                };
                let upper = (60.0 / m.tau).sqrt();
                let q = integrate(f, 0.0, upper, &[(self.scale.min(upper * upper)).sqrt()], self.options)?;
                let lead = m.rho * (m.tau / PI).sqrt();
                Ok(MetricResult { value: lead * q.value, error_estimate: lead * q.error, ..MetricResult::exact(0.0) })
            }
            OracleTarget::Ora => {
                let r = self.tail_integral(0.0, |z| Ok((self.ccdf)(z)? / (1.0 + z)))?;
                Ok(scaled(r, 1.0 / LN_2))
            }
            OracleTarget::Opra { gamma_star } => {
                if !(gamma_star > 0.0) {
                    return Err(Error::Domain(format!("cutoff must be positive, got {gamma_star}")));
                }
                let r = self.tail_integral(gamma_star, |z| Ok((self.ccdf)(z)? / z))?;
                Ok(scaled(r, 1.0 / LN_2))
            }
            OracleTarget::InvMoment { x } => {
                if !(x >= 0.0) {
                    return Err(Error::Domain(format!("truncation point must be nonnegative, got {x}")));
                }
                self.inverse_moment(x)
            }
            OracleTarget::Cifr => {
                let m = self.inverse_moment(0.0)?;
                Ok(MetricResult::exact((1.0 + 1.0 / m.value).log2()))
            }
            OracleTarget::Tcifr { gamma0 } => {
                if !(gamma0 > 0.0) {
                    return Err(Error::Domain(format!("cutoff must be positive, got {gamma0}")));
                }
                let m = self.inverse_moment(gamma0)?;
                let tail = (self.ccdf)(gamma0)?;
                let v = if m.value == 0.0 { 0.0 } else { tail * (1.0 + 1.0 / m.value).log2() };
                Ok(MetricResult::exact(v))
            }
        }
    }
}

fn scaled(r: MetricResult, k: f64) -> MetricResult {
    MetricResult { value: k * r.value, error_estimate: k * r.error_estimate, ..r }
}

/// Direct quadrature of the defining integral of `target` over the end-to-end law.
pub fn quadrature_oracle(model: &EndToEnd, target: OracleTarget) -> Result<MetricResult> {
    DistributionOracle::from_model(model).evaluate(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma::exp_integral_e1;

    fn batch(n: u64) -> SimBatch {
        SimBatch::new(SystemConfig::default(), n, 7)
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 + 0.5 * i as f64).collect();
        let mut whole = Moments::new(2);
        for &x in &xs {
            whole.push(&[x, x * x]);
        }
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        for (i, &x) in xs.iter().enumerate() {
            if i < 37 { a.push(&[x, x * x]) } else { b.push(&[x, x * x]) }
        }
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean[i] - whole.mean[i]).abs() < 1e-9 * whole.mean[i].abs());
            for j in 0..2 {
                assert!((a.covariance(i, j) - whole.covariance(i, j)).abs() < 1e-9 * whole.covariance(i, j).abs());
            }
        }
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut top = TopK::new(2000);
        // deterministic Pareto(2) quantiles
        let n = 200_000;
        for i in 1..n {
            let u = i as f64 / n as f64;
            top.push((1.0 - u).powf(-0.5));
        }
        let a = top.hill().unwrap();
        assert!((a - 2.0).abs() < 0.1, "{a}");
    }

    #[test]
    fn stream_partition_covers_all_draws() {
        let mut b = batch(1003);
        b.streams = 10;
        assert_eq!((0..10).map(|s| b.stream_len(s)).sum::<u64>(), 1003);
    }

    #[test]
    fn vanishing_gain_constant_gives_first_hop() {
        let mut cfg = SystemConfig::default();
        cfg.c = 1e-300;
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            let d = draw_link(&cfg, SimMode::Coupled, &mut rng);
            assert_eq!(d.gamma_eq, d.gamma1);
        }
    }

    #[test]
    fn opra_above_all_samples_is_zero() {
        let s = simulate_capacity(&batch(2000), Policy::Opra, Some(1e300)).unwrap();
        assert_eq!(s.estimate, 0.0);
        assert!(simulate_capacity(&batch(10), Policy::Opra, None).is_err());
    }

    #[test]
    fn cdf_grid_is_monotone() {
        let s = simulate_e2e(&batch(20_000)).unwrap();
        assert!(s.cdf.windows(2).all(|w| w[0].cdf <= w[1].cdf));
        assert_eq!(s.draws, 20_000);
    }

    #[test]
    fn ora_oracle_with_exponential_stub() {
        let oracle = DistributionOracle::new(|z: f64| Ok((-z).exp()), |z: f64| Ok((-z).exp()), 1.0);
        let got = oracle.evaluate(OracleTarget::Ora).unwrap().value;
        let exact = std::f64::consts::E * exp_integral_e1(1.0).unwrap() / LN_2;
        assert!((got - exact).abs() < 1e-9 * exact, "{got} vs {exact}");
        assert!((exact * LN_2 - 0.596_347_362_3).abs() < 1e-9);
    }
}
