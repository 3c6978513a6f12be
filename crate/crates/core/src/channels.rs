//! Fading, energy-harvesting and relay-power models of the two hops.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::specfun::gamma::ln_gamma;

/// Nakagami-m first hop: |h₁|² ~ Gamma(m₁, Ω₁/m₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NakagamiParams {
    pub m1: f64,
    pub omega1: f64,
}

impl NakagamiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m1 >= 0.5 && self.m1.is_finite()) {
            return Err(Error::Config(format!("m1 must be >= 0.5, got {}", self.m1)));
        }
        if !(self.omega1 > 0.0 && self.omega1.is_finite()) {
            return Err(Error::Config(format!("omega1 must be positive, got {}", self.omega1)));
        }
        Ok(())
    }

    /// m₁ as an integer, as required by the finite sums of the closed forms.
    pub fn integer_m1(&self) -> Result<usize> {
        if self.m1 >= 1.0 && self.m1.fract() == 0.0 {
            Ok(self.m1 as usize)
        } else {
            Err(Error::Config(format!(
                "closed-form metrics need a positive integer m1, got {}",
                self.m1
            )))
        }
    }
}

/// α-μ second hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMuParams {
    pub alpha2: f64,
    pub mu2: f64,
    pub omega2: f64,
}

impl AlphaMuParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha2", self.alpha2), ("mu2", self.mu2), ("omega2", self.omega2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Energy-harvesting protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Time switching: a fraction κ = ε of T₀ is spent harvesting.
    #[serde(rename = "TS")]
    TimeSwitching,
    /// Power splitting: a fraction κ = ϱ of the received power is harvested.
    #[serde(rename = "PS")]
    PowerSplitting,
}

/// Link budget and harvesting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub scheme: Scheme,
    /// ε (TS) or ϱ (PS).
    pub kappa: f64,
    /// Harvester conversion efficiency θ.
    pub theta_eff: f64,
    pub t0: f64,
    pub t1: f64,
    /// Battery capacity B_R.
    pub battery: f64,
    /// Source transmit power P_S in watts.
    pub source_power: f64,
    pub d1: f64,
    pub d2: f64,
    /// Path-loss exponent δ.
    pub delta: f64,
    /// Noise power at the relay.
    pub n1: f64,
    /// Noise power at the destination.
    pub n2: f64,
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if !(self.theta_eff > 0.0 && self.theta_eff <= 1.0) {
            return Err(Error::Config(format!(
                "theta_eff must lie in (0, 1], got {}",
                self.theta_eff
            )));
        }
        for (name, v) in [
            ("t0", self.t0),
            ("t1", self.t1),
            ("battery", self.battery),
            ("source_power", self.source_power),
            ("d1", self.d1),
            ("d2", self.d2),
            ("delta", self.delta),
            ("n1", self.n1),
            ("n2", self.n2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// ς of the information-path SNR: 0 for TS, κ for PS.
    pub fn varsigma(&self) -> f64 {
        match self.scheme {
            Scheme::TimeSwitching => 0.0,
            Scheme::PowerSplitting => self.kappa,
        }
    }

    /// Full-battery relay power P_B = B_R / T₁.
    pub fn battery_power(&self) -> f64 {
        self.battery / self.t1
    }

    fn path_loss1(&self) -> f64 {
        self.d1.powf(self.delta)
    }

    fn path_loss2(&self) -> f64 {
        self.d2.powf(self.delta)
    }
}

/// γ̄₁ = (1−ς) P_S Ω₁ / (d₁^δ N₁).
pub fn gamma1_mean(nak: &NakagamiParams, cfg: &EnergyConfig) -> f64 {
    (1.0 - cfg.varsigma()) * cfg.source_power * nak.omega1 / (cfg.path_loss1() * cfg.n1)
}

/// Rate Ψ of the Gamma law of the harvested power P_E = E_R / T₁.
pub fn psi_constant(nak: &NakagamiParams, cfg: &EnergyConfig) -> f64 {
    nak.m1 * cfg.t1 * cfg.path_loss1() / (cfg.theta_eff * cfg.kappa * cfg.t0 * cfg.source_power * nak.omega1)
}

/// E[P_E] = θκT₀P_SΩ₁ / (T₁ d₁^δ).
pub fn harvested_power_mean(nak: &NakagamiParams, cfg: &EnergyConfig) -> f64 {
    cfg.theta_eff * cfg.kappa * cfg.t0 * cfg.source_power * nak.omega1 / (cfg.t1 * cfg.path_loss1())
}

/// Ῡ₂ = Ω₂ / (d₂^δ N₂).
pub fn upsilon2_scale(am: &AlphaMuParams, cfg: &EnergyConfig) -> f64 {
    am.omega2 / (cfg.path_loss2() * cfg.n2)
}

fn gamma_law(shape: f64, rate: f64, y: f64, what: &str) -> Result<(f64, f64)> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::Domain(format!("{what} evaluated at negative point {y}")));
    }
    if y == 0.0 {
        let density = if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            rate
        } else {
            0.0
        };
        return Ok((density, 0.0));
    }
    let x = rate * y;
    let log_density = shape * rate.ln() + (shape - 1.0) * y.ln() - x - ln_gamma(shape);
    Ok((log_density.exp(), gamma_lr(shape, x)))
}

fn gamma_upper_tail(shape: f64, rate: f64, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else {
        gamma_ur(shape, rate * y)
    }
}

/// (PDF, CDF) of the first-hop SNR γ₁.
pub fn gamma1_pdf_cdf(nak: &NakagamiParams, cfg: &EnergyConfig, z: f64) -> Result<(f64, f64)> {
    gamma_law(nak.m1, nak.m1 / gamma1_mean(nak, cfg), z, "gamma1 law")
}

/// P(γ₁ > z), accurate in the upper tail.
pub fn gamma1_ccdf(nak: &NakagamiParams, cfg: &EnergyConfig, z: f64) -> f64 {
    gamma_upper_tail(nak.m1, nak.m1 / gamma1_mean(nak, cfg), z)
}

/// (PDF, CDF) of the harvested power P_E.
pub fn harvested_power_pdf_cdf(nak: &NakagamiParams, cfg: &EnergyConfig, y: f64) -> Result<(f64, f64)> {
    gamma_law(nak.m1, psi_constant(nak, cfg), y, "harvested power law")
}

/// (F_{P_E}(P_B), F^c_{P_E}(P_B)), each computed on its accurate side.
pub fn battery_split(nak: &NakagamiParams, cfg: &EnergyConfig) -> (f64, f64) {
    let psi = psi_constant(nak, cfg);
    let pb = cfg.battery_power();
    let below = gamma_lr(nak.m1, psi * pb);
    let above = gamma_upper_tail(nak.m1, psi, pb);
    (below, above)
}

/// (PDF, CDF) of the α-μ SNR factor Υ₂.
pub fn upsilon2_pdf_cdf(am: &AlphaMuParams, cfg: &EnergyConfig, z: f64) -> Result<(f64, f64)> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::Domain(format!("alpha-mu law evaluated at negative point {z}")));
    }
    if z == 0.0 {
        return Ok((0.0, 0.0));
    }
    let scale = upsilon2_scale(am, cfg);
    let r = z / scale;
    let u = am.mu2 * r.powf(am.alpha2 / 2.0);
    let log_density = (am.alpha2 / 2.0).ln() + am.mu2 * am.mu2.ln() - ln_gamma(am.mu2) - scale.ln()
        + (am.alpha2 * am.mu2 / 2.0 - 1.0) * r.ln()
        - u;
    Ok((log_density.exp(), gamma_lr(am.mu2, u)))
}

/// Draws |h₁|².
pub fn sample_channel_power<R: Rng + ?Sized>(nak: &NakagamiParams, rng: &mut R) -> f64 {
    Gamma::new(nak.m1, nak.omega1 / nak.m1)
        .expect("validated Nakagami parameters")
        .sample(rng)
}

/// γ₁ for a given channel power draw.
pub fn gamma1_from_channel(cfg: &EnergyConfig, h: f64) -> f64 {
    (1.0 - cfg.varsigma()) * cfg.source_power * h / (cfg.path_loss1() * cfg.n1)
}

/// Harvested energy E_R for a given channel power draw.
pub fn harvested_energy(cfg: &EnergyConfig, h: f64) -> f64 {
    cfg.theta_eff * cfg.kappa * cfg.t0 * cfg.source_power * h / cfg.path_loss1()
}

/// Relay transmit power with battery clipping: E_R/T₁ below B_R, else P_B.
pub fn relay_power_from_energy(cfg: &EnergyConfig, energy: f64) -> f64 {
    if energy < cfg.battery {
        energy / cfg.t1
    } else {
        cfg.battery_power()
    }
}

pub fn sample_gamma1<R: Rng + ?Sized>(nak: &NakagamiParams, cfg: &EnergyConfig, rng: &mut R) -> f64 {
    gamma1_from_channel(cfg, sample_channel_power(nak, rng))
}

/// Υ₂ = Ῡ₂ (G/μ₂)^{2/α₂} with G ~ Gamma(μ₂, 1).
pub fn sample_upsilon2<R: Rng + ?Sized>(am: &AlphaMuParams, cfg: &EnergyConfig, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(am.mu2, 1.0).expect("validated alpha-mu parameters").sample(rng);
    upsilon2_scale(am, cfg) * (g / am.mu2).powf(2.0 / am.alpha2)
}

pub fn sample_relay_power<R: Rng + ?Sized>(nak: &NakagamiParams, cfg: &EnergyConfig, rng: &mut R) -> f64 {
    relay_power_from_energy(cfg, harvested_energy(cfg, sample_channel_power(nak, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_cfg(scheme: Scheme) -> EnergyConfig {
        EnergyConfig {
            scheme,
            kappa: 0.7,
            theta_eff: 0.7,
            t0: 1.0,
            t1: 1.0,
            battery: 500.0,
            source_power: 1.0,
            d1: 1.0,
            d2: 1.0,
            delta: 2.0,
            n1: 1.0,
            n2: 1.0,
        }
    }

    const NAK: NakagamiParams = NakagamiParams { m1: 3.0, omega1: 5.0 };

    #[test]
    fn mean_snr_substitution() {
        assert!((gamma1_mean(&NAK, &unit_cfg(Scheme::TimeSwitching)) - 5.0).abs() < 1e-15);
        assert!((gamma1_mean(&NAK, &unit_cfg(Scheme::PowerSplitting)) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn gamma1_law_edges() {
        let cfg = unit_cfg(Scheme::TimeSwitching);
        assert_eq!(gamma1_pdf_cdf(&NAK, &cfg, 0.0).unwrap(), (0.0, 0.0));
        assert!(gamma1_pdf_cdf(&NAK, &cfg, -1.0).is_err());
        let rayleigh = NakagamiParams { m1: 1.0, omega1: 5.0 };
        for z in [0.1, 1.0, 7.0] {
            let (_, cdf) = gamma1_pdf_cdf(&rayleigh, &cfg, z).unwrap();
            assert!((cdf - (1.0 - (-z / 5.0f64).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn harvested_power_normalization() {
        let cfg = unit_cfg(Scheme::TimeSwitching);
        let psi = psi_constant(&NAK, &cfg);
        let (_, cdf) = harvested_power_pdf_cdf(&NAK, &cfg, 1e9 / psi).unwrap();
        assert!((cdf - 1.0).abs() < 1e-12);
        assert_eq!(harvested_power_pdf_cdf(&NAK, &cfg, 0.0).unwrap(), (0.0, 0.0));
        let (w1, w2) = battery_split(&NAK, &cfg);
        assert!((w1 + w2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schemes_scale_by_one_minus_kappa() {
        let ts = unit_cfg(Scheme::TimeSwitching);
        let ps = unit_cfg(Scheme::PowerSplitting);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = sample_gamma1(&NAK, &ts, &mut a);
            let y = sample_gamma1(&NAK, &ps, &mut b);
            assert!((y - 0.3 * x).abs() <= 1e-15 * x);
        }
    }

    #[test]
    fn battery_clipping_limits() {
        let mut cfg = unit_cfg(Scheme::TimeSwitching);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        cfg.battery = 1e300;
        for _ in 0..100 {
            let h = sample_channel_power(&NAK, &mut rng);
            assert_eq!(relay_power_from_energy(&cfg, harvested_energy(&cfg, h)), harvested_energy(&cfg, h));
        }
        cfg.battery = 1e-300;
        for _ in 0..100 {
            assert_eq!(sample_relay_power(&NAK, &cfg, &mut rng), 1e-300);
        }
    }
}
