//! Task runners: each turns a validated config into artifacts.

use std::fs::File;

use num_complex::Complex64;

use noisyqed::bloch::{bloch_steady_state, flux_conservation, output_observables, DriveConfig};
use noisyqed::fano::{fano_recover_envelope, fano_scatter, FanoParams, FanoRecoveryOptions};
use noisyqed::inversion::{
    complete_transmittance, envelope_from_complex_transmittance, envelope_from_transmittance, InversionOptions,
    Reconstruction,
};
use noisyqed::io::{bloch_rows, envelope_rows, read_scattering, scattering_rows, BlochRow, ScatterTable};
use noisyqed::mc_oracle::{overlap_mc_grid, McConfig};
use noisyqed::ramsey::{envelope, envelope_mc, envelope_value};
use noisyqed::scattering::{spectrum, transmittance_ou_series, Method};
use noisyqed::{make_grid, time_grid, ComplexSpectrum, FrequencyGrid, NoiseModel, SpectrumKind};

use crate::config::{InvertRoute, RunConfig};
use crate::error::CliError;
use crate::output::{Artifacts, Dataset};

/// Artifacts plus a check failure to report after they are written.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub failure: Option<CliError>,
}

impl From<Artifacts> for Outcome {
    fn from(artifacts: Artifacts) -> Self {
        Outcome {
            artifacts,
            failure: None,
        }
    }
}

pub fn grid(cfg: &RunConfig) -> Result<FrequencyGrid, CliError> {
    let g = cfg.grid;
    let grid = if g.n == 1 {
        FrequencyGrid::single(g.min)
    } else {
        make_grid(g.min, g.max, g.n)
    };
    grid.map_err(|e| CliError::field("grid", e))
}

pub fn run_spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = grid(cfg)?;
    let opts = cfg.spectrum;
    let s = spectrum(&cfg.params, &cfg.noise, &grid, cfg.input_channel, opts.method, opts.series_tol)?;
    let mut art = Artifacts::default();
    if opts.method == Method::Series {
        let (white, colored) = cfg.noise.split_white();
        if let Some(NoiseModel::ColoredGaussian { sigma, kappa }) = colored {
            let p = cfg.params.apply_white_background(white)?;
            let r = transmittance_ou_series(&p, *sigma, *kappa, &grid, opts.series_tol, cfg.input_channel)?;
            art.estimate("series_truncation_bound", r.truncation_bound);
            art.estimate("series_max_terms", r.max_terms);
        }
    }
    art.datasets
        .push(Dataset::new("spectrum", scattering_rows(&ScatterTable::from(&s))));
    Ok(art.into())
}

pub fn run_ramsey(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let r = cfg.ramsey;
    let times = time_grid(r.times.t_max, r.times.n).map_err(|e| CliError::field("ramsey.times", e))?;
    let mut art = Artifacts::default();
    let curve = if r.monte_carlo {
        let c = envelope_mc(&cfg.noise, &times, r.n_traj, cfg.seed)?;
        let worst = c
            .times()
            .iter()
            .zip(c.values())
            .zip(c.std_error().unwrap_or(&[]))
            .map(|((&t, v), se)| {
                let d = (v.re - envelope_value(&cfg.noise, t)).abs();
                if *se > 0.0 {
                    d / se
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        art.estimate("n_traj", r.n_traj);
        art.estimate("max_z_vs_closed_form", worst);
        c
    } else {
        envelope(&cfg.noise, &times)?
    };
    art.datasets.push(Dataset::new("ramsey", envelope_rows(&curve)));
    Ok(art.into())
}

fn reconstruction_estimates(art: &mut Artifacts, rec: &Reconstruction) {
    art.estimate("c0_re", rec.c0.re);
    art.estimate("c0_im", rec.c0.im);
    art.estimate("grid_error", rec.grid_error);
    art.estimate("t_max_allowed", rec.t_max_allowed);
    art.estimate("edge_ratio", rec.edge_ratio);
}

pub fn run_invert(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let inv = cfg.invert.as_ref().ok_or_else(|| CliError::config("invert: section is required"))?;
    let file = File::open(&inv.input)
        .map_err(|e| CliError::config(format!("invert.input: cannot open {}: {e}", inv.input.display())))?;
    let table = read_scattering(file).map_err(|e| CliError::field("invert.input", e))?;
    let opts = InversionOptions {
        t_max: inv.t_max,
        noise_floor: inv.noise_floor,
        tukey: inv.tukey,
        extrapolate: inv.extrapolate,
    };
    let p = &cfg.params;
    let ch = cfg.input_channel;
    let re: Vec<f64> = table.t.iter().map(|t| t.re).collect();
    let rec = match inv.route {
        InvertRoute::Real => envelope_from_transmittance(p, &table.grid, &re, ch, &opts)?,
        InvertRoute::Complex => {
            let s = ComplexSpectrum::new(table.grid.clone(), table.t.clone(), SpectrumKind::Transmittance)?;
            envelope_from_complex_transmittance(p, &s, ch, &opts)?
        }
        InvertRoute::Kk => {
            let s = complete_transmittance(&table.grid, &re, inv.extrapolate)?;
            envelope_from_complex_transmittance(p, &s, ch, &opts)?
        }
    };
    let mut art = Artifacts::default();
    reconstruction_estimates(&mut art, &rec);
    art.datasets.push(Dataset::new("invert", envelope_rows(&rec.raw)));
    art.datasets
        .push(Dataset::new("invert_normalized", envelope_rows(&rec.normalized)));
    Ok(art.into())
}

pub fn run_mc_validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = grid(cfg)?;
    let p = &cfg.params;
    let ch = cfg.input_channel;
    let reference = spectrum(p, &cfg.noise, &grid, ch, cfg.spectrum.method, cfg.spectrum.series_tol)?;
    let mc = cfg.mc;
    let mc_cfg = McConfig {
        n_traj: mc.n_traj,
        t_ss: mc.t_ss,
        seed: cfg.seed,
        dt: mc.dt,
    };
    let est = overlap_mc_grid(p, &cfg.noise, &grid, &mc_cfg)?;
    let gm = p.rate(ch);
    let mut worst = 0.0f64;
    let rows: Vec<Vec<f64>> = grid
        .values()
        .iter()
        .zip(&est)
        .zip(reference.t())
        .map(|((&d, e), t_ref)| {
            let t_mc = 1.0 - gm * e.mean;
            let se = gm * e.std_error;
            let z = if se > 0.0 { (t_mc - t_ref).norm() / se } else { (t_mc - t_ref).norm() / f64::EPSILON };
            worst = worst.max(z);
            vec![d, t_mc.re, t_mc.im, se, t_ref.re, t_ref.im, z]
        })
        .collect();
    let mut art = Artifacts::default();
    art.estimate("n_traj", mc.n_traj);
    art.estimate("max_z_score", worst);
    art.estimate("k_sigma", mc.k_sigma);
    art.datasets.push(Dataset::new(
        "mc_validate",
        (vec!["delta", "re_t_mc", "im_t_mc", "stderr_t_mc", "re_t_ref", "im_t_ref", "z_score"], rows),
    ));
    let failure = (worst >= mc.k_sigma).then(|| {
        CliError::statistical(format!(
            "Monte Carlo and reference spectra differ by {worst:.2} standard errors (limit {})",
            mc.k_sigma
        ))
    });
    Ok(Outcome { artifacts: art, failure })
}

pub fn run_fano(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = cfg.fano.ok_or_else(|| CliError::config("fano: section is required"))?;
    let fano = FanoParams::new(f.omega_c, f.kappa_c).map_err(|e| CliError::field("fano", e))?;
    let grid = grid(cfg)?;
    let noise = &cfg.noise;
    let r = fano_scatter(&cfg.params, &fano, |t| envelope_value(noise, t), &grid, cfg.input_channel)?;
    let mut art = Artifacts::default();
    art.datasets.push(Dataset::new("fano", scattering_rows(&ScatterTable::from(&r))));
    if f.recover {
        let c = fano_recover_envelope(&cfg.params, &fano, &r.overlap, &FanoRecoveryOptions { t_max: f.t_max })?;
        let worst = c
            .times()
            .iter()
            .zip(c.values())
            .map(|(&t, v)| (v - envelope_value(noise, t)).norm())
            .fold(0.0, f64::max);
        art.estimate("recovery_max_abs_error", worst);
        art.datasets.push(Dataset::new("fano_envelope", envelope_rows(&c)));
    }
    Ok(art.into())
}

fn derived_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

pub fn run_bloch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = grid(cfg)?;
    let p = &cfg.params;
    let b = cfg.bloch;
    let ch = cfg.input_channel;
    let analytic = if b.monte_carlo {
        None
    } else {
        Some(spectrum(p, &cfg.noise, &grid, ch, cfg.spectrum.method, cfg.spectrum.series_tol)?)
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &d) in grid.values().iter().enumerate() {
        let drive = DriveConfig::new(Complex64::new(b.rabi, 0.0), d, ch).map_err(|e| CliError::field("bloch", e))?;
        let (q, se_q, flux, se_flux) = match &analytic {
            Some(s) => {
                let q = s.overlap.values[k];
                (q, 0.0, flux_conservation(p, q, &drive), 0.0)
            }
            None => {
                let ss = bloch_steady_state(p, &cfg.noise, &drive, b.n_traj, b.t_relax, derived_seed(cfg.seed, k))?;
                (
                    ss.coherence_over_omega.mean,
                    ss.coherence_over_omega.std_error,
                    ss.flux_residual.mean.re,
                    ss.flux_residual.std_error,
                )
            }
        };
        let trans = output_observables(p, q, &drive, ch);
        let refl = output_observables(p, q, &drive, ch.opposite());
        let gm = p.rate(ch);
        let bt = p.beta(ch);
        let bb = (p.beta(ch) * p.beta(ch.opposite())).sqrt();
        let rr = (p.rate(ch.opposite()) * gm).sqrt();
        rows.push(BlochRow {
            delta: d,
            homodyne: trans.homodyne,
            power_trans: trans.power,
            power_refl: refl.power,
            flux_residual: flux,
            stderr_hom: gm * se_q,
            stderr_power_trans: 2.0 * gm * (1.0 - bt).abs() * se_q,
            stderr_power_refl: 2.0 * rr * bb * se_q,
            stderr_flux_residual: se_flux,
        });
    }
    let mut art = Artifacts::default();
    art.estimate("weak_drive", b.rabi <= noisyqed::bloch::WEAK_DRIVE_LIMIT * p.gamma());
    art.estimate("monte_carlo", b.monte_carlo);
    art.datasets.push(Dataset::new("bloch", bloch_rows(&rows)));
    Ok(art.into())
}
