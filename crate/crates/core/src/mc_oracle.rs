//! Brute-force trajectory oracles for the scattering overlap and for the
//! stationarity of the noise samplers.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, Sampler};
use crate::stats::{par_collect, stream};
use crate::types::{EstimateWithError, FrequencyGrid, SystemParams};

/// Settings shared by the trajectory integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_traj: usize,
    /// Integration time per trajectory, in units of 1/Γ.
    pub t_ss: f64,
    pub seed: u64,
    /// Overrides the default step; must satisfy the step bounds.
    pub dt: Option<f64>,
}

impl McConfig {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        McConfig {
            n_traj,
            t_ss: 30.0,
            seed,
            dt: None,
        }
    }
}

/// dt = min(0.05/Γ, 0.1/κ_max, 0.1/σ).
pub fn default_step(params: &SystemParams, model: &NoiseModel) -> f64 {
    let (_, colored) = model.split_white();
    let mut dt = 0.05 / params.gamma();
    if let Some(m) = colored {
        let k = m.max_kappa();
        if k > 0.0 {
            dt = dt.min(0.1 / k);
        }
        let s = m.variance().sqrt();
        if s > 0.0 {
            dt = dt.min(0.1 / s);
        }
    }
    dt
}

pub(crate) fn resolve_step(params: &SystemParams, model: &NoiseModel, t_end: f64, dt: Option<f64>) -> Result<(usize, f64)> {
    let bound = default_step(params, model);
    let dt = match dt {
        Some(h) if !(h > 0.0) => return Err(Error::param("dt", "must be > 0")),
        Some(h) if h > bound * (1.0 + 1e-12) => {
            return Err(Error::StepBound(format!("dt = {h} exceeds the bound {bound}")))
        }
        Some(h) => h,
        None => bound,
    };
    let n = (t_end / dt).ceil().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

fn check_config(params: &SystemParams, model: &NoiseModel, cfg: &McConfig) -> Result<()> {
    params.validate()?;
    model.validate()?;
    if cfg.n_traj < 2 {
        return Err(Error::param("n_traj", "need at least 2 trajectories"));
    }
    if !(cfg.t_ss * params.gamma() >= 10.0) {
        return Err(Error::param("t_ss", format!("need t_ss >= 10/Gamma, got {}", cfg.t_ss)));
    }
    Ok(())
}

/// ⟨⟨G⟩⟩ from dG/dt = −(Γ/2 − iδ + iΔ(t))G + 1, G(0) = 0, integrated to t_ss.
pub fn overlap_mc(
    params: &SystemParams,
    model: &NoiseModel,
    delta: f64,
    n_traj: usize,
    t_ss: f64,
    seed: u64,
) -> Result<EstimateWithError> {
    let cfg = McConfig {
        n_traj,
        t_ss,
        seed,
        dt: None,
    };
    let grid = FrequencyGrid::single(delta)?;
    Ok(overlap_mc_grid(params, model, &grid, &cfg)?[0])
}

/// Same as [`overlap_mc`] on a whole grid; each trajectory is shared by
/// all detunings.
pub fn overlap_mc_grid(
    params: &SystemParams,
    model: &NoiseModel,
    grid: &FrequencyGrid,
    cfg: &McConfig,
) -> Result<Vec<EstimateWithError>> {
    check_config(params, model, cfg)?;
    let (white, _) = model.split_white();
    let p = params.apply_white_background(white)?;
    let (n_steps, h) = resolve_step(params, model, cfg.t_ss, cfg.dt)?;
    let shifts: Vec<Complex64> = grid.values().iter().map(|&d| p.laplace_arg(d)).collect();
    let per_traj: Vec<Result<Vec<Complex64>>> = par_collect(cfg.n_traj, |i| {
        let mut rng = stream(cfg.seed, i as u64);
        let mut sampler = Sampler::new(model, h, &mut rng)?;
        let mut g = vec![Complex64::new(0.0, 0.0); shifts.len()];
        let mut d_old = sampler.value();
        for _ in 0..n_steps {
            sampler.advance(&mut rng);
            let d_new = sampler.value();
            let dbar = 0.5 * (d_old + d_new);
            for (gk, s) in g.iter_mut().zip(&shifts) {
                let a = s + Complex64::new(0.0, dbar);
                let decay = (-a * h).exp();
                *gk = *gk * decay + (1.0 - decay) / a;
            }
            d_old = d_new;
        }
        Ok(g)
    });
    let per_traj: Vec<Vec<Complex64>> = per_traj.into_iter().collect::<Result<_>>()?;
    let mut column = vec![Complex64::new(0.0, 0.0); cfg.n_traj];
    (0..grid.len())
        .map(|k| {
            for (c, tr) in column.iter_mut().zip(&per_traj) {
                *c = tr[k];
            }
            EstimateWithError::from_samples(&column)
        })
        .collect()
}

/// Phase averages over a window at the origin and over a window of the same
/// length ending at a late time, from the same trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWindows {
    pub origin: EstimateWithError,
    pub late: EstimateWithError,
    /// Paired estimate of late − origin.
    pub difference: EstimateWithError,
}

/// Late start used by [`stationary_phase_windows`].
pub fn late_offset(window: f64) -> f64 {
    5.0 * window.max(1.0)
}

/// ⟨⟨e^{−i∫_{T}^{T+τ} Δ}⟩⟩ at T = 0 and at a late T.
pub fn stationary_phase_windows(
    model: &NoiseModel,
    window: f64,
    n_traj: usize,
    seed: u64,
) -> Result<PhaseWindows> {
    model.validate()?;
    if !(window >= 0.0) || !window.is_finite() {
        return Err(Error::param("t", "window length must be finite and >= 0"));
    }
    if n_traj < 2 {
        return Err(Error::param("n_traj", "need at least 2 trajectories"));
    }
    let (white, colored) = model.split_white();
    if window == 0.0 {
        let one = EstimateWithError::exact(Complex64::new(1.0, 0.0));
        return Ok(PhaseWindows {
            origin: one,
            late: one,
            difference: EstimateWithError::exact(Complex64::new(0.0, 0.0)),
        });
    }
    let mut h = 0.05 * window;
    if let Some(m) = colored {
        if m.max_kappa() > 0.0 {
            h = h.min(0.1 / m.max_kappa());
        }
        if m.variance() > 0.0 {
            h = h.min(0.1 / m.variance().sqrt());
        }
    }
    let n_win = (window / h).ceil() as usize;
    let h = window / n_win as f64;
    let n_gap = (late_offset(window) / h).ceil() as usize;
    let damp = (-white * window).exp();
    let samples: Vec<Result<(Complex64, Complex64)>> = par_collect(n_traj, |i| {
        let mut rng = stream(seed, i as u64);
        let mut sampler = Sampler::new(model, h, &mut rng)?;
        let phase_over = |sampler: &mut Sampler, rng: &mut _| {
            let mut phase = 0.0;
            let mut d_old = sampler.value();
            for _ in 0..n_win {
                sampler.advance(rng);
                let d_new = sampler.value();
                phase += 0.5 * (d_old + d_new) * h;
                d_old = d_new;
            }
            Complex64::from_polar(damp, -phase)
        };
        let origin = phase_over(&mut sampler, &mut rng);
        for _ in 0..n_gap {
            sampler.advance(&mut rng);
        }
        let late = phase_over(&mut sampler, &mut rng);
        Ok((origin, late))
    });
    let samples: Vec<(Complex64, Complex64)> = samples.into_iter().collect::<Result<_>>()?;
    let origin: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
    let late: Vec<Complex64> = samples.iter().map(|s| s.1).collect();
    let diff: Vec<Complex64> = samples.iter().map(|s| s.1 - s.0).collect();
    Ok(PhaseWindows {
        origin: EstimateWithError::from_samples(&origin)?,
        late: EstimateWithError::from_samples(&late)?,
        difference: EstimateWithError::from_samples(&diff)?,
    })
}

/// Late-window phase average ⟨⟨e^{−i∫_{T−τ}^{T} Δ}⟩⟩, which equals C_φ(τ)
/// for a stationary sampler.
pub fn stationary_phase_check(
    model: &NoiseModel,
    t: f64,
    n_traj: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    Ok(stationary_phase_windows(model, t, n_traj, seed)?.late)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramsey::envelope_value;

    #[test]
    fn noiseless_resonance_is_deterministic() {
        let p = SystemParams::canonical();
        let e = overlap_mc(&p, &NoiseModel::noiseless(), 0.0, 10, 30.0, 1).unwrap();
        assert!((e.mean - 2.0).norm() < 1e-5);
        assert!(e.std_error < 1e-14);
    }

    #[test]
    fn white_part_enters_the_drift() {
        let p = SystemParams::canonical();
        let m = NoiseModel::White { gamma_phi: 0.3 };
        let e = overlap_mc(&p, &m, 1.0, 4, 60.0, 1).unwrap();
        let exact = 1.0 / Complex64::new(0.8, -1.0);
        assert!((e.mean - exact).norm() < 1e-10);
    }

    #[test]
    fn rejects_short_runs_and_coarse_steps() {
        let p = SystemParams::canonical();
        let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
        assert!(overlap_mc(&p, &m, 0.0, 10, 5.0, 1).is_err());
        let cfg = McConfig {
            dt: Some(0.2),
            ..McConfig::new(10, 1)
        };
        let grid = FrequencyGrid::single(0.0).unwrap();
        assert!(matches!(
            overlap_mc_grid(&p, &m, &grid, &cfg),
            Err(Error::StepBound(_))
        ));
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let p = SystemParams::canonical();
        let m = NoiseModel::Telegraph { sigma: 1.0, kappa: 1.0 };
        let a = overlap_mc(&p, &m, 0.5, 64, 20.0, 9).unwrap();
        let b = overlap_mc(&p, &m, 0.5, 64, 20.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_window_is_one() {
        let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 };
        let e = stationary_phase_check(&m, 0.0, 10, 3).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ou_windows_agree_and_match_envelope() {
        let m = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 };
        let w = stationary_phase_windows(&m, 1.0, 4000, 5).unwrap();
        assert!(w.difference.z_score(Complex64::new(0.0, 0.0)) < 5.0);
        assert!(w.late.agrees_with(Complex64::new(envelope_value(&m, 1.0), 0.0), 5.0));
    }
}
