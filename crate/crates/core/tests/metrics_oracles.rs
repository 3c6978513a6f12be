use afrelay::endtoend::{EndToEnd, SystemConfig};
use afrelay::mcsim::{quadrature_oracle, OracleTarget};
use afrelay::metrics::{
    aser, aser_direct, capacity_cifr, capacity_opra, capacity_ora, capacity_tcifr, cutoff_equation,
    inverse_snr_moment, opra_cutoff, ModulationParams,
};
use afrelay::Error;

fn mixed_config() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.energy.d1 = 1.0;
    cfg.energy.d2 = 1.0;
    cfg.energy.battery = 2.0;
    cfg.energy.n1 = 0.2;
    cfg.energy.n2 = 0.5;
    cfg
}

fn configs() -> Vec<(&'static str, SystemConfig)> {
    let mut weibull = mixed_config();
    weibull.am.alpha2 = 1.6;
    weibull.am.mu2 = 2.5;
    let mut sharp = mixed_config();
    sharp.am.alpha2 = 3.0;
    sharp.am.mu2 = 1.2;
    sharp.nak.m1 = 2.0;
    vec![("reference", SystemConfig::default()), ("mixed", mixed_config()), ("weibull", weibull), ("sharp", sharp)]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn aser_matches_quadrature() {
    for (name, cfg) in configs() {
        let model = EndToEnd::new(cfg).unwrap();
        for m in [ModulationParams::BPSK, ModulationParams::BFSK, ModulationParams::QPSK] {
            let closed = aser(&model, &m).unwrap().value;
            let direct = aser_direct(&model, &m).unwrap().value;
            let oracle = quadrature_oracle(&model, OracleTarget::Aser(m)).unwrap().value;
            assert!(rel(closed, oracle) < 1e-7, "{name} {m:?}: {closed} vs {oracle}");
            assert!(rel(direct, oracle) < 1e-5, "{name} {m:?}: direct {direct} vs {oracle}");
        }
    }
}

#[test]
fn ora_matches_quadrature() {
    for (name, cfg) in configs() {
        let model = EndToEnd::new(cfg).unwrap();
        let closed = capacity_ora(&model).unwrap().value;
        let oracle = quadrature_oracle(&model, OracleTarget::Ora).unwrap().value;
        assert!(rel(closed, oracle) < 1e-4, "{name}: {closed} vs {oracle}");
    }
}

#[test]
fn opra_cifr_tcifr_match_quadrature() {
    for (name, cfg) in configs() {
        let model = EndToEnd::new(cfg).unwrap();
        let cut = opra_cutoff(&model).unwrap();
        let opra = capacity_opra(&model).unwrap().value;
        let q = quadrature_oracle(&model, OracleTarget::Opra { gamma_star: cut.gamma_star }).unwrap().value;
        assert!(rel(opra, q) < 1e-6, "{name} opra: {opra} vs {q}");
        let cifr = capacity_cifr(&model).unwrap().value;
        let q = quadrature_oracle(&model, OracleTarget::Cifr).unwrap().value;
        assert!(rel(cifr, q) < 1e-6, "{name} cifr: {cifr} vs {q}");
        for g0 in [0.3 * cut.gamma_star, cut.gamma_star, 2.0] {
            let t = capacity_tcifr(&model, g0).unwrap().value;
            let q = quadrature_oracle(&model, OracleTarget::Tcifr { gamma0: g0 }).unwrap().value;
            assert!(rel(t, q) < 1e-6, "{name} tcifr({g0}): {t} vs {q}");
        }
    }
}

#[test]
fn inverse_moment_matches_quadrature() {
    for (name, cfg) in configs() {
        let model = EndToEnd::new(cfg).unwrap();
        for x in [0.0, 0.05, 1.0, 5.0] {
            let closed = inverse_snr_moment(&model, x).unwrap().value;
            let q = quadrature_oracle(&model, OracleTarget::InvMoment { x }).unwrap().value;
            assert!(rel(closed, q) < 1e-6, "{name} x={x}: {closed} vs {q}");
        }
    }
}

#[test]
fn capacity_orderings() {
    for (name, cfg) in configs() {
        let model = EndToEnd::new(cfg).unwrap();
        let ora = capacity_ora(&model).unwrap().value;
        let opra = capacity_opra(&model).unwrap().value;
        let cifr = capacity_cifr(&model).unwrap().value;
        let cut = opra_cutoff(&model).unwrap().gamma_star;
        let tcifr = capacity_tcifr(&model, cut).unwrap().value;
        assert!(opra >= ora, "{name}: OPRA {opra} < ORA {ora}");
        assert!(cifr <= ora && tcifr <= ora, "{name}: {cifr} {tcifr} vs {ora}");
        assert!(cut > 0.0 && cut < 1.0);
    }
}

#[test]
fn modulation_ordering_follows_tau() {
    let model = EndToEnd::new(SystemConfig::default()).unwrap();
    let b = aser(&model, &ModulationParams::BPSK).unwrap().value;
    let f = aser(&model, &ModulationParams::BFSK).unwrap().value;
    let q = aser(&model, &ModulationParams::QPSK).unwrap().value;
    assert!(b < f && f < q, "{b} {f} {q}");
    assert!((q / f - 2.0).abs() < 1e-12);
}

#[test]
fn aser_limits() {
    let low = EndToEnd::new(SystemConfig::default().with_ps_n1_db(-40.0)).unwrap();
    let high = EndToEnd::new(SystemConfig::default().with_ps_n1_db(90.0)).unwrap();
    let m = ModulationParams::BPSK;
    assert!((aser(&low, &m).unwrap().value - m.rho).abs() < 0.01);
    assert!(aser(&high, &m).unwrap().value < 1e-8);
}

#[test]
fn cutoff_equation_changes_sign_once() {
    let model = EndToEnd::new(mixed_config()).unwrap();
    let cut = opra_cutoff(&model).unwrap();
    assert!(cut.residual.abs() <= 1e-9);
    let mut prev = f64::INFINITY;
    for k in 0..50 {
        let x = 1e-3 * 10f64.powf(4.0 * k as f64 / 49.0);
        let g = cutoff_equation(&model, x).unwrap();
        assert!(g < prev);
        assert_eq!(g > 0.0, x < cut.gamma_star);
        prev = g;
    }
}

#[test]
fn divergent_inverse_moment_is_reported() {
    let mut cfg = mixed_config();
    cfg.nak.m1 = 1.0;
    let model = EndToEnd::new(cfg).unwrap();
    assert!(matches!(inverse_snr_moment(&model, 0.0), Err(Error::DivergentMoment(_))));
    assert!(capacity_cifr(&model).is_err());
}

#[test]
fn deep_tail_stays_consistent() {
    // Weak links, where the end-to-end CDF reaches one below the median of γ₁.
    let mut near = SystemConfig::default().with_ps_n1_db(0.0).with_ps_n2_db(30.0);
    near.energy.d1 = 10.0;
    near.energy.d2 = 10.0;
    let far = SystemConfig::default().with_ps_n1_db(10.0).with_ps_n2_db(30.0);
    for cfg in [near, far] {
        let model = EndToEnd::new(cfg).unwrap();
        let mut prev = 1.0;
        for x in [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let tail = model.ccdf(x).unwrap();
            assert!(tail.value <= prev + tail.error_estimate, "ccdf rises at {x}");
            prev = tail.value;
            let m = inverse_snr_moment(&model, x).unwrap();
            let upper = tail.value / x + m.error_estimate;
            let lower = (tail.value - model.ccdf(2.0 * x).unwrap().value) / (2.0 * x) - m.error_estimate;
            assert!(m.value <= upper * (1.0 + 1e-9) && m.value >= lower * (1.0 - 1e-9), "x={x}: {} not in [{lower}, {upper}]", m.value);
            let t = capacity_tcifr(&model, x).unwrap().value;
            assert!(t.is_finite() && t >= 0.0);
        }
    }
}
