//! Weak-drive measurement protocol: stochastic optical Bloch equations,
//! homodyne and power outputs, and flux bookkeeping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::mc_oracle::resolve_step;
use crate::noise::{NoiseModel, Sampler};
use crate::scattering::transmittance_white;
use crate::stats::{par_collect, stream};
use crate::types::{Channel, EstimateWithError, FrequencyGrid, SystemParams};

/// Largest |Ω|/Γ accepted as weak drive.
pub const WEAK_DRIVE_LIMIT: f64 = 0.2;

/// Default weak drive |Ω|/Γ.
pub const DEFAULT_WEAK_RABI: f64 = 0.05;

/// Averaging window after relaxation, in units of 1/Γ.
pub const STEADY_WINDOW: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Rabi frequency Ω = −iα√γ_μ.
    pub rabi: Complex64,
    pub detuning: f64,
    #[serde(default)]
    pub input_channel: Channel,
}

impl DriveConfig {
    pub fn new(rabi: Complex64, detuning: f64, input_channel: Channel) -> Result<Self> {
        check_finite("rabi", rabi.re)?;
        check_finite("rabi", rabi.im)?;
        check_finite("detuning", detuning)?;
        if rabi.norm() == 0.0 {
            return Err(Error::param("rabi", "drive must be nonzero"));
        }
        Ok(DriveConfig {
            rabi,
            detuning,
            input_channel,
        })
    }

    /// Same as [`DriveConfig::new`] but refuses |Ω| > 0.2Γ.
    pub fn weak(params: &SystemParams, rabi: Complex64, detuning: f64, input_channel: Channel) -> Result<Self> {
        let d = Self::new(rabi, detuning, input_channel)?;
        if !d.is_weak(params) {
            return Err(Error::param(
                "rabi",
                format!("|Omega| = {} exceeds the weak-drive limit {WEAK_DRIVE_LIMIT} Gamma", rabi.norm()),
            ));
        }
        Ok(d)
    }

    pub fn is_weak(&self, params: &SystemParams) -> bool {
        self.rabi.norm() <= WEAK_DRIVE_LIMIT * params.gamma()
    }

    /// Coherent input amplitude α with Ω = −iα√γ_μ.
    pub fn alpha(&self, params: &SystemParams) -> Complex64 {
        Complex64::i() * self.rabi / params.rate(self.input_channel).sqrt()
    }
}

/// Trajectory-averaged steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSteadyState {
    /// ⟨⟨σ̃⁻⟩⟩_ss / Ω.
    pub coherence_over_omega: EstimateWithError,
    /// ⟨⟨σ_z⟩⟩_ss.
    pub population: EstimateWithError,
    /// (1 + σ_z) − 4Re(Ω*σ̃⁻)/Γ; zero in the exact steady state.
    pub identity_residual: EstimateWithError,
    /// Sum of the three output powers minus one, with the excited
    /// population entering every channel.
    pub flux_residual: EstimateWithError,
}

struct TrajectoryAverages {
    s: Complex64,
    z: f64,
    s_halves: (Complex64, Complex64),
    z_halves: (f64, f64),
    linear: Complex64,
}

fn run_bloch(
    params: &SystemParams,
    model: &NoiseModel,
    drive: &DriveConfig,
    n_traj: usize,
    t_relax: f64,
    seed: u64,
) -> Result<Vec<TrajectoryAverages>> {
    params.validate()?;
    model.validate()?;
    let gamma = params.gamma();
    if !(t_relax * gamma >= 10.0) {
        return Err(Error::param("t_relax", format!("need t_relax >= 10/Gamma, got {t_relax}")));
    }
    if n_traj < 2 {
        return Err(Error::param("n_traj", "need at least 2 trajectories"));
    }
    let (white, _) = model.split_white();
    let p = params.apply_white_background(white)?;
    let window = STEADY_WINDOW / gamma;
    let (n_relax, h) = resolve_step(params, model, t_relax, None)?;
    let n_win = ((window / h).ceil() as usize).max(2) & !1;
    let s0 = p.laplace_arg(drive.detuning);
    let omega = drive.rabi;
    let z_decay = (-gamma * h).exp();
    let z_gain = -(-gamma * h).exp_m1() / gamma;
    let out: Vec<Result<TrajectoryAverages>> = par_collect(n_traj, |i| {
        let mut rng = stream(seed, i as u64);
        let mut sampler = Sampler::new(model, h, &mut rng)?;
        let mut s = Complex64::new(0.0, 0.0);
        let mut z = -1.0;
        let mut g = Complex64::new(0.0, 0.0);
        let mut d_old = sampler.value();
        let mut s_acc = [Complex64::new(0.0, 0.0); 2];
        let mut z_acc = [0.0; 2];
        let mut g_acc = Complex64::new(0.0, 0.0);
        for k in 0..n_relax + n_win {
            sampler.advance(&mut rng);
            let d_new = sampler.value();
            let a = s0 + Complex64::new(0.0, 0.5 * (d_old + d_new));
            d_old = d_new;
            let decay = (-a * h).exp();
            let gain = (1.0 - decay) / a;
            let pump = 4.0 * (omega.conj() * s).re;
            if k >= n_relax {
                // s is sampled before the step and z after it, which makes the
                // discrete σ_z–σ̃⁻ identity exact up to a boundary term.
                let half = usize::from(k - n_relax >= n_win / 2);
                s_acc[half] += s;
                g_acc += g;
            }
            s = s * decay - omega * z * gain;
            g = g * decay + gain;
            z = -1.0 + (z + 1.0) * z_decay + z_gain * pump;
            if k >= n_relax {
                let half = usize::from(k - n_relax >= n_win / 2);
                z_acc[half] += z;
            }
        }
        let m = (n_win / 2) as f64;
        Ok(TrajectoryAverages {
            s: (s_acc[0] + s_acc[1]) / (2.0 * m),
            z: (z_acc[0] + z_acc[1]) / (2.0 * m),
            s_halves: (s_acc[0] / m, s_acc[1] / m),
            z_halves: (z_acc[0] / m, z_acc[1] / m),
            linear: g_acc / (2.0 * m),
        })
    });
    out.into_iter().collect()
}

fn check_relaxed(first: &[Complex64], second: &[Complex64], what: &str) -> Result<()> {
    let diff: Vec<Complex64> = first.iter().zip(second).map(|(a, b)| b - a).collect();
    let d = EstimateWithError::from_samples(&diff)?;
    let scale = EstimateWithError::from_samples(first)?.mean.norm().max(1.0);
    if d.mean.norm() > 3.0 * d.std_error + 1e-6 * scale {
        return Err(Error::NotRelaxed(format!(
            "{what} drifts by {:.3e} between window halves (std error {:.3e})",
            d.mean.norm(),
            d.std_error
        )));
    }
    Ok(())
}

/// Steady state of ds/dt = −(Γ/2 − iδ + iΔ)s − Ωσ_z,
/// dσ_z/dt = −Γ(1 + σ_z) + 2(Ω*s + Ωs*), from s = 0, σ_z = −1.
pub fn bloch_steady_state(
    params: &SystemParams,
    model: &NoiseModel,
    drive: &DriveConfig,
    n_traj: usize,
    t_relax: f64,
    seed: u64,
) -> Result<BlochSteadyState> {
    let runs = run_bloch(params, model, drive, n_traj, t_relax, seed)?;
    let omega = drive.rabi;
    let gamma = params.gamma();
    let first: Vec<Complex64> = runs.iter().map(|r| r.s_halves.0 / omega).collect();
    let second: Vec<Complex64> = runs.iter().map(|r| r.s_halves.1 / omega).collect();
    check_relaxed(&first, &second, "coherence")?;
    let zf: Vec<Complex64> = runs.iter().map(|r| Complex64::new(r.z_halves.0, 0.0)).collect();
    let zs: Vec<Complex64> = runs.iter().map(|r| Complex64::new(r.z_halves.1, 0.0)).collect();
    check_relaxed(&zf, &zs, "population")?;
    let coh: Vec<Complex64> = runs.iter().map(|r| r.s / omega).collect();
    let pop: Vec<Complex64> = runs.iter().map(|r| Complex64::new(r.z, 0.0)).collect();
    let ident: Vec<Complex64> = runs
        .iter()
        .map(|r| Complex64::new(1.0 + r.z - 4.0 * (omega.conj() * r.s).re / gamma, 0.0))
        .collect();
    let flux: Vec<Complex64> = runs
        .iter()
        .map(|r| {
            let p = output_powers(params, r.s / omega, Some(r.z), drive);
            Complex64::new(p.iter().sum::<f64>() - 1.0, 0.0)
        })
        .collect();
    Ok(BlochSteadyState {
        coherence_over_omega: EstimateWithError::from_samples(&coh)?,
        population: EstimateWithError::from_samples(&pop)?,
        identity_residual: EstimateWithError::from_samples(&ident)?,
        flux_residual: EstimateWithError::from_samples(&flux)?,
    })
}

/// Paired per-trajectory estimate of ⟨⟨σ̃⁻⟩⟩/Ω − ⟨⟨G⟩⟩, with G integrated
/// along the same noise path in linear response.
pub fn weak_drive_deviation(
    params: &SystemParams,
    model: &NoiseModel,
    drive: &DriveConfig,
    n_traj: usize,
    t_relax: f64,
    seed: u64,
) -> Result<EstimateWithError> {
    let runs = run_bloch(params, model, drive, n_traj, t_relax, seed)?;
    let dev: Vec<Complex64> = runs.iter().map(|r| r.s / drive.rabi - r.linear).collect();
    EstimateWithError::from_samples(&dev)
}

/// Normalized outputs in one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// ⟨a_out⟩/α.
    pub homodyne: Complex64,
    /// ⟨a†_out a_out⟩/|α|².
    pub power: f64,
}

/// homodyne/α = δ_λμ − √(γ_λγ_μ)Q and
/// power/|α|² = δ_λμ − 2√(γ_λγ_μ)(δ_λμ − √(β_λβ_μ))Re Q, Q = coh/Ω.
pub fn output_observables(
    params: &SystemParams,
    coherence_over_omega: Complex64,
    drive: &DriveConfig,
    out_channel: Channel,
) -> Observables {
    let mu = drive.input_channel;
    let same = if out_channel == mu { 1.0 } else { 0.0 };
    let root = (params.rate(out_channel) * params.rate(mu)).sqrt();
    let beta = (params.beta(out_channel) * params.beta(mu)).sqrt();
    Observables {
        homodyne: same - root * coherence_over_omega,
        power: same - 2.0 * root * (same - beta) * coherence_over_omega.re,
    }
}

/// Transmitted, reflected and lost power per |α|². With `population`
/// the emitted parts use (1 + σ_z)/2; otherwise its linear-response value.
pub fn output_powers(
    params: &SystemParams,
    coherence_over_omega: Complex64,
    population: Option<f64>,
    drive: &DriveConfig,
) -> [f64; 3] {
    let mu = drive.input_channel;
    let gm = params.rate(mu);
    let excited = match population {
        Some(z) => 0.5 * (1.0 + z) * gm / drive.rabi.norm_sqr(),
        None => 2.0 * gm * coherence_over_omega.re / params.gamma(),
    };
    let q = coherence_over_omega.re;
    [
        1.0 - 2.0 * gm * q + params.rate(mu) * excited,
        params.rate(mu.opposite()) * excited,
        params.gamma_loss * excited,
    ]
}

/// |P_trans + P_refl + P_loss − 1| in linear response.
pub fn flux_conservation(params: &SystemParams, coherence_over_omega: Complex64, drive: &DriveConfig) -> f64 {
    (output_powers(params, coherence_over_omega, None, drive).iter().sum::<f64>() - 1.0).abs()
}

/// 1 − (|t|² + |r|² + |r_loss|²) for white dephasing at rate γ_φ.
pub fn squares_deficit_white(
    params: &SystemParams,
    gamma_phi: f64,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<Vec<f64>> {
    let r = transmittance_white(params, gamma_phi, grid, input)?;
    Ok((0..grid.len())
        .map(|k| {
            1.0 - (r.t()[k].norm_sqr() + r.r()[k].norm_sqr() + r.loss_reflectance.values[k].norm_sqr())
        })
        .collect())
}
