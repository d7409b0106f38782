use num_complex::Complex64;

use noisyqed::mc_oracle::{overlap_mc, overlap_mc_grid, stationary_phase_windows, McConfig};
use noisyqed::noise::{build_jump_model, sample_trajectory};
use noisyqed::ramsey::{envelope_mc, envelope_value};
use noisyqed::scattering::{scatter_from_envelope, transmittance_telegraph};
use noisyqed::{make_grid, Channel, FrequencyGrid, NoiseModel, SystemParams};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn telegraph_overlap_matches_closed_form() {
    let p = SystemParams::canonical();
    let (sigma, kappa) = (2.0, 0.1);
    let grid = FrequencyGrid::single(sigma).unwrap();
    let t = transmittance_telegraph(&p, sigma, kappa, &grid, Channel::Plus).unwrap();
    let e = overlap_mc(&p, &NoiseModel::Telegraph { sigma, kappa }, sigma, 10_000, 30.0, 11).unwrap();
    assert!(e.agrees_with(t.overlap.values[0], 5.0), "{e:?} vs {}", t.overlap.values[0]);
}

#[test]
fn ou_overlap_matches_laplace_route() {
    let p = SystemParams::canonical();
    let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
    let grid = FrequencyGrid::single(0.0).unwrap();
    let lap = scatter_from_envelope(&p, |t| envelope_value(&m, t), &grid, Channel::Plus).unwrap();
    let e = overlap_mc(&p, &m, 0.0, 10_000, 30.0, 12).unwrap();
    assert!(e.agrees_with(lap.overlap.values[0], 5.0));
}

#[test]
fn step_halving_stays_within_error() {
    let p = SystemParams::canonical();
    let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
    let grid = FrequencyGrid::single(0.5).unwrap();
    let coarse = overlap_mc_grid(&p, &m, &grid, &McConfig::new(4000, 5)).unwrap()[0];
    let fine_cfg = McConfig {
        dt: Some(0.025),
        ..McConfig::new(4000, 6)
    };
    let fine = overlap_mc_grid(&p, &m, &grid, &fine_cfg).unwrap()[0];
    let se = coarse.std_error.hypot(fine.std_error);
    assert!((coarse.mean - fine.mean).norm() < 5.0 * se);
}

#[test]
fn std_error_follows_inverse_sqrt_n() {
    let p = SystemParams::canonical();
    let m = NoiseModel::Telegraph { sigma: 1.0, kappa: 1.0 };
    let a = overlap_mc(&p, &m, 0.3, 1000, 20.0, 3).unwrap();
    let b = overlap_mc(&p, &m, 0.3, 4000, 20.0, 4).unwrap();
    let r = a.std_error / b.std_error;
    assert!((r - 2.0).abs() < 0.4, "ratio {r}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let p = SystemParams::canonical();
    let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 };
    let grid = make_grid(-1.0, 1.0, 3).unwrap();
    let cfg = McConfig::new(257, 42);
    let one = in_pool(1, || overlap_mc_grid(&p, &m, &grid, &cfg).unwrap());
    let four = in_pool(4, || overlap_mc_grid(&p, &m, &grid, &cfg).unwrap());
    assert_eq!(one, four);
}

#[test]
fn telegraph_windows_are_stationary() {
    let m = NoiseModel::Telegraph { sigma: 2.0, kappa: 0.5 };
    let w = stationary_phase_windows(&m, 2.0, 4000, 8).unwrap();
    assert!(w.difference.z_score(Complex64::new(0.0, 0.0)) < 5.0);
    assert!(w.late.agrees_with(Complex64::new(envelope_value(&m, 2.0), 0.0), 5.0));
}

#[test]
fn sampled_acf_matches_analytic() {
    let times: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    for m in [
        NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 },
        NoiseModel::Telegraph { sigma: 1.0, kappa: 1.0 },
    ] {
        for (lag, tau) in [(0usize, 0.0), (100, 1.0), (300, 3.0)] {
            let samples: Vec<f64> = (0..10_000u64)
                .map(|i| {
                    let tr = sample_trajectory(&m, &times, 1000 + i).unwrap();
                    tr.values[0] * tr.values[lag]
                })
                .collect();
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let exact = m.autocorrelation(tau).unwrap();
            assert!((mean - exact).abs() < 5.0 * se.max(1e-12), "{m:?} tau {tau}: {mean} vs {exact}");
        }
    }
}

#[test]
fn ramsey_mc_matches_telegraph_envelope() {
    let m = NoiseModel::Telegraph { sigma: 2.0, kappa: 1.0 };
    let times = [0.0, 0.5, 1.0, 1.5, 2.0];
    let c = envelope_mc(&m, &times, 4000, 21).unwrap();
    let se = c.std_error().unwrap();
    for (k, &t) in times.iter().enumerate() {
        let exact = envelope_value(&m, t);
        assert!((c.values()[k].re - exact).abs() <= 5.0 * se[k] + 1e-12, "t = {t}");
    }
}

#[test]
fn tlf_ensemble_realizations() {
    let j = build_jump_model(&NoiseModel::TlfEnsemble { m: 2, sigma: 1.0, kappa: 1.0 }, 1024).unwrap();
    let s = 2f64.sqrt();
    assert_eq!(j.realizations().len(), 3);
    for (a, b) in j.realizations().iter().zip([-s, 0.0, s]) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(j.stationary(), &[0.25, 0.5, 0.25]);
}
