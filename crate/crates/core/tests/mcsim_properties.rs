use afrelay::channels::{
    battery_split, gamma1_mean, gamma1_pdf_cdf, harvested_power_mean, sample_channel_power, sample_gamma1,
    sample_relay_power, sample_upsilon2, upsilon2_pdf_cdf, upsilon2_scale,
};
use afrelay::endtoend::{EndToEnd, SystemConfig};
use afrelay::mcsim::{
    cdf_sup_distance, default_grid, simulate_aser, simulate_capacity, simulate_cdf, EmpiricalStats, Policy,
    SimBatch, SimMode,
};
use afrelay::metrics::{aser, capacity_ora, ModulationParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::erf::erfc;

fn mixed_config() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.energy.d1 = 1.0;
    cfg.energy.d2 = 1.0;
    cfg.energy.battery = 2.0;
    cfg.energy.n1 = 0.2;
    cfg.energy.n2 = 0.5;
    cfg
}

fn run_on(threads: usize, batch: &SimBatch) -> (EmpiricalStats, EmpiricalStats, EmpiricalStats) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        (
            simulate_cdf(batch, &default_grid(&batch.config)).unwrap(),
            simulate_aser(batch, &ModulationParams::QPSK).unwrap(),
            simulate_capacity(batch, Policy::Cifr, None).unwrap(),
        )
    })
}

#[test]
fn bit_identical_across_thread_counts() {
    let batch = SimBatch::new(mixed_config(), 200_003, 99).with_mode(SimMode::IndependentApproximation);
    let one = run_on(1, &batch);
    let eight = run_on(8, &batch);
    for (a, b) in [(&one.0, &eight.0), (&one.1, &eight.1), (&one.2, &eight.2)] {
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert_eq!(a.tail_index.map(f64::to_bits), b.tail_index.map(f64::to_bits));
        for (p, q) in a.cdf.iter().zip(&b.cdf) {
            assert_eq!(p.cdf.to_bits(), q.cdf.to_bits());
        }
    }
}

#[test]
fn standard_errors_are_calibrated() {
    let cfg = mixed_config();
    let exact = aser(&EndToEnd::new(cfg).unwrap(), &ModulationParams::BPSK).unwrap().value;
    let mut inside = 0;
    for seed in 0..100 {
        let batch = SimBatch::new(cfg, 20_000, 1000 + seed).with_mode(SimMode::IndependentApproximation);
        let s = simulate_aser(&batch, &ModulationParams::BPSK).unwrap();
        if (s.estimate - exact).abs() <= 2.0 * s.std_error {
            inside += 1;
        }
    }
    assert!(inside >= 90, "{inside} of 100 batches within 2 standard errors");
}

fn huge_battery(mut cfg: SystemConfig) -> SystemConfig {
    let e = &cfg.energy;
    let energy_scale = e.theta_eff * e.kappa * e.t0 * e.source_power / e.d1.powf(e.delta);
    let h = Gamma::new(cfg.nak.m1, cfg.nak.m1 / cfg.nak.omega1).unwrap();
    cfg.energy.battery = 100.0 * energy_scale * h.inverse_cdf(0.9999);
    cfg
}

fn mode_pair(cfg: SystemConfig, n: u64) -> (EmpiricalStats, EmpiricalStats) {
    let grid = default_grid(&cfg);
    let coupled = simulate_cdf(&SimBatch::new(cfg, n, 5), &grid).unwrap();
    let indep = simulate_cdf(&SimBatch::new(cfg, n, 6).with_mode(SimMode::IndependentApproximation), &grid).unwrap();
    (coupled, indep)
}

#[test]
fn modes_coincide_when_battery_never_binds() {
    // With γ₂ ≫ C the shared |h₁|² no longer couples the hops.
    let (coupled, indep) = mode_pair(huge_battery(SystemConfig::default()), 400_000);
    for (a, b) in coupled.cdf.iter().zip(&indep.cdf) {
        let band = 4.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() + 1e-12;
        assert!((a.cdf - b.cdf).abs() <= band, "z={}: {} vs {}", a.z, a.cdf, b.cdf);
    }
    // Comparable hops stay correlated through |h₁|² at any battery size.
    let (c, i) = mode_pair(huge_battery(mixed_config()), 200_000);
    println!("comparable hops, unbounded battery: sup distance {:.4e}", cdf_sup_distance(&c, &i));
    let (c, i) = mode_pair(SystemConfig::default(), 200_000);
    println!("reference system: sup distance {:.4e}", cdf_sup_distance(&c, &i));
}

#[test]
fn empirical_cdf_tracks_closed_form() {
    let cfg = mixed_config();
    let model = EndToEnd::new(cfg).unwrap();
    let grid: Vec<f64> = (0..12).map(|k| 0.5 * 1.5f64.powi(k)).collect();
    let s = simulate_cdf(&SimBatch::new(cfg, 500_000, 17).with_mode(SimMode::IndependentApproximation), &grid).unwrap();
    for p in &s.cdf {
        let f = model.cdf(p.z).unwrap().value;
        assert!((p.cdf - f).abs() <= 4.0 * p.std_error + 1e-12, "z={}: {} vs {f}", p.z, p.cdf);
    }
}

#[test]
fn sampler_means() {
    let cfg = mixed_config();
    let (nak, am, e) = (&cfg.nak, &cfg.am, &cfg.energy);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000;
    let (mut h, mut g1, mut ups, mut pr) = (0.0, 0.0, 0.0, 0.0);
    let mut clipped = 0u64;
    for _ in 0..n {
        h += sample_channel_power(nak, &mut rng);
        g1 += sample_gamma1(nak, e, &mut rng);
        ups += sample_upsilon2(am, e, &mut rng);
        let p = sample_relay_power(nak, e, &mut rng);
        pr += p;
        if p >= e.battery_power() {
            clipped += 1;
        }
    }
    let n = n as f64;
    assert!((h / n / nak.omega1 - 1.0).abs() < 0.01);
    assert!((g1 / n / gamma1_mean(nak, e) - 1.0).abs() < 0.01);
    let ups_mean = upsilon2_scale(am, e) * statrs::function::gamma::gamma(am.mu2 + 2.0 / am.alpha2)
        / (statrs::function::gamma::gamma(am.mu2) * am.mu2.powf(2.0 / am.alpha2));
    assert!((ups / n / ups_mean - 1.0).abs() < 0.01);
    assert!(pr / n < harvested_power_mean(nak, e));
    let (_, above) = battery_split(nak, e);
    let frac = clipped as f64 / n;
    assert!((frac - above).abs() < 4.0 * (above * (1.0 - above) / n).sqrt(), "{frac} vs {above}");
}

#[test]
fn sampler_laws_pass_chi_square() {
    let cfg = mixed_config();
    let (nak, am, e) = (&cfg.nak, &cfg.am, &cfg.energy);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 200_000;
    let bins = 20;
    // Equiprobable bins from bisection on the model CDFs.
    let quantile = |cdf: &dyn Fn(f64) -> f64, q: f64, hi: f64| {
        let (mut a, mut b) = (0.0, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if cdf(m) < q { a = m } else { b = m }
        }
        0.5 * (a + b)
    };
    let g1_cdf = |z: f64| gamma1_pdf_cdf(nak, e, z).unwrap().1;
    let ups_cdf = |z: f64| upsilon2_pdf_cdf(am, e, z).unwrap().1;
    for (cdf, hi, which) in [
        (&g1_cdf as &dyn Fn(f64) -> f64, 100.0 * gamma1_mean(nak, e), 0),
        (&ups_cdf as &dyn Fn(f64) -> f64, 100.0 * upsilon2_scale(am, e), 1),
    ] {
        let edges: Vec<f64> = (1..bins).map(|k| quantile(cdf, k as f64 / bins as f64, hi)).collect();
        let mut counts = vec![0f64; bins];
        for _ in 0..n {
            let x = if which == 0 { sample_gamma1(nak, e, &mut rng) } else { sample_upsilon2(am, e, &mut rng) };
            counts[edges.partition_point(|&t| t < x)] += 1.0;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 19 degrees of freedom: 99.9% quantile ≈ 43.8.
        assert!(chi2 < 43.8, "chi-square {chi2}");
    }
}

#[test]
fn concentrated_fading_gives_deterministic_error_rate() {
    let mut cfg = mixed_config();
    cfg.nak.m1 = 200.0;
    cfg.am.mu2 = 200.0;
    cfg.energy.battery = 1e9;
    cfg.energy.n1 = 2.0;
    cfg.energy.n2 = 5.0;
    let batch = SimBatch::new(cfg, 20_000, 4);
    let s = simulate_aser(&batch, &ModulationParams::BPSK).unwrap();
    let e = &cfg.energy;
    let g1 = gamma1_mean(&cfg.nak, e);
    let g2 = harvested_power_mean(&cfg.nak, e) * upsilon2_scale(&cfg.am, e);
    let det = 0.5 * erfc((afrelay::endtoend::e2e_snr(g1, g2, cfg.c)).sqrt());
    assert!((s.estimate / det - 1.0).abs() < 0.05, "{} vs {det}", s.estimate);
}

#[test]
fn ora_simulation_matches_closed_form() {
    let cfg = SystemConfig::default();
    let exact = capacity_ora(&EndToEnd::new(cfg).unwrap()).unwrap().value;
    let s = simulate_capacity(
        &SimBatch::new(cfg, 500_000, 21).with_mode(SimMode::IndependentApproximation),
        Policy::Ora,
        None,
    )
    .unwrap();
    assert!((s.estimate - exact).abs() <= 3.0 * s.std_error, "{} ± {} vs {exact}", s.estimate, s.std_error);
}
