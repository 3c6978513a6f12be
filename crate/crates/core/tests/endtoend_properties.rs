use afrelay::channels::{harvested_power_pdf_cdf, upsilon2_pdf_cdf, Scheme};
use afrelay::endtoend::{e2e_snr, EndToEnd, SystemConfig};
use afrelay::quad::{integrate_to_infinity, QuadOptions};
use proptest::prelude::*;
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

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[test]
fn cdf_is_monotone_over_six_decades() {
    for cfg in [SystemConfig::default(), small_config()] {
        let model = EndToEnd::new(cfg).unwrap();
        let g = model.stats.gamma1_mean;
        let mut prev = 0.0;
        for z in log_grid(1e-3 * g, 1e3 * g, 1000) {
            let f = model.cdf(z).unwrap().value;
            assert!((0.0..=1.0).contains(&f));
            assert!(f >= prev - 1e-14, "z={z}: {f} < {prev}");
            prev = f;
        }
        assert!(model.cdf(1e-3 * g).unwrap().value < 1e-6);
        assert!(model.ccdf(1e3 * g).unwrap().value < 1e-12);
    }
}

#[test]
fn pdf_matches_central_difference() {
    let model = EndToEnd::new(small_config()).unwrap();
    let g = model.stats.gamma1_mean;
    for z in log_grid(0.02 * g, 5.0 * g, 30) {
        let h = 1e-4 * z;
        let fd = (model.cdf(z + h).unwrap().value - model.cdf(z - h).unwrap().value) / (2.0 * h);
        let pdf = model.pdf(z).unwrap().value;
        assert!((pdf - fd).abs() <= 1e-5 * pdf, "z={z}: {pdf} vs {fd}");
    }
}

#[test]
fn pdf_integrates_to_one() {
    for cfg in [SystemConfig::default(), small_config()] {
        let model = EndToEnd::new(cfg).unwrap();
        let g = model.stats.gamma1_mean;
        let total = integrate_to_infinity(|z| model.pdf(z).map(|r| r.value), 0.0, g, &[], QuadOptions::rel(1e-10))
            .unwrap()
            .value;
        assert!((total - 1.0).abs() <= 1e-6, "{total}");
    }
}

/// Branch-1 tail by nested quadrature over P_E and Υ₂ using only the
/// elementary channel laws.
fn branch1_tail_nested(cfg: &SystemConfig, beta: f64, z: f64) -> f64 {
    let e = &cfg.energy;
    let ups_scale = afrelay::channels::upsilon2_scale(&cfg.am, e);
    let pe_scale = afrelay::channels::harvested_power_mean(&cfg.nak, e);
    let outer = |p: f64| -> afrelay::Result<f64> {
        if p == 0.0 {
            return Ok(0.0);
        }
        let fp = harvested_power_pdf_cdf(&cfg.nak, e, p)?.0;
        let inner = integrate_to_infinity(
            |u: f64| {
                if u == 0.0 {
                    return Ok(0.0);
                }
                let fu = upsilon2_pdf_cdf(&cfg.am, e, u)?.0;
                Ok(fu * gamma_ur(cfg.nak.m1, beta * z * (1.0 + cfg.c / (p * u))))
            },
            0.0,
            ups_scale,
            &[],
            QuadOptions::rel(1e-11),
        )?;
        Ok(fp * inner.value)
    };
    integrate_to_infinity(outer, 0.0, pe_scale, &[], QuadOptions::rel(1e-10)).unwrap().value
}

#[test]
fn branch_one_tail_for_non_rayleigh_second_hop() {
    for (alpha, mu) in [(1.3, 2.0), (3.0, 1.5), (2.6, 0.8)] {
        let mut cfg = small_config();
        cfg.am.alpha2 = alpha;
        cfg.am.mu2 = mu;
        let model = EndToEnd::new(cfg).unwrap();
        for z in [0.1, 1.0, 4.0] {
            let nested = branch1_tail_nested(&cfg, model.stats.beta, z);
            let got = model.branch_ccdf(0, z).unwrap().value;
            assert!((got - nested).abs() <= 1e-7 * nested, "α={alpha} μ={mu} z={z}: {got} vs {nested}");
        }
    }
}

#[test]
fn power_splitting_reduces_first_hop_mean() {
    let ts = EndToEnd::new(small_config()).unwrap();
    let mut cfg = small_config();
    cfg.energy.scheme = Scheme::PowerSplitting;
    let ps = EndToEnd::new(cfg).unwrap();
    let ratio = ps.stats.gamma1_mean / ts.stats.gamma1_mean;
    assert!((ratio - (1.0 - cfg.energy.kappa)).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn e2e_snr_bounds(g1 in 1e-3f64..1e3, g2 in 1e-3f64..1e3, c in 1e-3f64..10.0) {
        let g = e2e_snr(g1, g2, c);
        prop_assert!(g > 0.0 && g <= g1);
        prop_assert!(e2e_snr(g1, g2 * 2.0, c) >= g);
    }

    #[test]
    fn cdf_in_unit_interval(m1 in 1usize..5, mu in 0.6f64..5.0, alpha in 0.8f64..3.5, battery in 0.3f64..20.0, z in 1e-2f64..30.0) {
        let mut cfg = small_config();
        cfg.nak.m1 = m1 as f64;
        cfg.am.mu2 = mu;
        cfg.am.alpha2 = alpha;
        cfg.energy.battery = battery;
        let model = EndToEnd::new(cfg).unwrap();
        let f = model.cdf(z).unwrap().value;
        let fc = model.ccdf(z).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f + fc - 1.0).abs() < 1e-9);
        prop_assert!(model.pdf(z).unwrap().value >= 0.0);
    }
}
