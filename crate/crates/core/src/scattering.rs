//! Noise-averaged single-photon scattering: overlap ⟨⟨G⟩⟩, transmittance,
//! reflectance and loss reflectance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_rate, Error, Result};
use crate::linalg::{bicgstab, lu_solve, CMatrix};
use crate::noise::{build_jump_model, JumpModel, NoiseModel, DEFAULT_STATE_CAP};
use crate::quad::{laplace, QuadOptions};
use crate::ramsey::envelope_value;
use crate::special::erfcx;
use crate::stats::par_collect;
use crate::types::{Channel, ComplexSpectrum, FrequencyGrid, SpectrumKind, SystemParams};

/// Jump models above this size are solved iteratively.
pub const DENSE_SOLVE_LIMIT: usize = 2048;

/// Largest number of series terms tried.
pub const SERIES_MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterResult {
    pub transmittance: ComplexSpectrum,
    pub reflectance: ComplexSpectrum,
    pub loss_reflectance: ComplexSpectrum,
    pub overlap: ComplexSpectrum,
}

impl ScatterResult {
    /// t = 1 − γ_μ G, r = −√(γ₋μ γ_μ) G, r_loss = −√(γ_loss γ_μ) G.
    pub fn from_overlap(
        params: &SystemParams,
        grid: &FrequencyGrid,
        overlap: Vec<Complex64>,
        input: Channel,
    ) -> Result<Self> {
        let gm = params.rate(input);
        let rr = (params.rate(input.opposite()) * gm).sqrt();
        let rl = (params.gamma_loss * gm).sqrt();
        let t = overlap.iter().map(|g| 1.0 - gm * g).collect();
        let r = overlap.iter().map(|g| -rr * g).collect();
        let l = overlap.iter().map(|g| -rl * g).collect();
        Ok(ScatterResult {
            transmittance: ComplexSpectrum::new(grid.clone(), t, SpectrumKind::Transmittance)?,
            reflectance: ComplexSpectrum::new(grid.clone(), r, SpectrumKind::Reflectance)?,
            loss_reflectance: ComplexSpectrum::new(grid.clone(), l, SpectrumKind::LossReflectance)?,
            overlap: ComplexSpectrum::new(grid.clone(), overlap, SpectrumKind::Overlap)?,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.overlap.grid
    }

    pub fn t(&self) -> &[Complex64] {
        &self.transmittance.values
    }

    pub fn r(&self) -> &[Complex64] {
        &self.reflectance.values
    }

    pub fn g(&self) -> &[Complex64] {
        &self.overlap.values
    }
}

/// G = L[C](Γ/2 + γ_WB − iδ) by adaptive quadrature of a real envelope.
pub fn scatter_from_envelope<F>(
    params: &SystemParams,
    envelope: F,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<ScatterResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    params.validate()?;
    let c0 = envelope(0.0);
    if (c0 - 1.0).abs() > 1e-9 {
        return Err(Error::param("envelope", format!("C(0) = {c0}, expected 1")));
    }
    let f = |t: f64| Complex64::new(envelope(t), 0.0);
    let det = grid.values();
    let g: Vec<Result<Complex64>> = par_collect(det.len(), |k| {
        laplace(&f, params.laplace_arg(det[k]), QuadOptions::default())
    });
    let g = g.into_iter().collect::<Result<Vec<_>>>()?;
    ScatterResult::from_overlap(params, grid, g, input)
}

/// Lorentzian t = 1 − γ_μ/(Γ/2 + γ_φ − iδ).
pub fn transmittance_white(
    params: &SystemParams,
    gamma_phi: f64,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<ScatterResult> {
    params.validate()?;
    check_rate("gamma_phi", gamma_phi)?;
    let g = grid
        .values()
        .iter()
        .map(|&d| 1.0 / (params.laplace_arg(d) + gamma_phi))
        .collect();
    ScatterResult::from_overlap(params, grid, g, input)
}

/// Series evaluation and its truncation bound on |t|.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub result: ScatterResult,
    pub truncation_bound: f64,
    pub max_terms: usize,
}

/// OU lineshape from the expansion
/// G = Σₙ (−1)ⁿ/n! · e^{a} aⁿ / (Γ/2 + σ²/κ + nκ − iδ), a = (σ/κ)².
pub fn transmittance_ou_series(
    params: &SystemParams,
    sigma: f64,
    kappa: f64,
    grid: &FrequencyGrid,
    tol: f64,
    input: Channel,
) -> Result<SeriesResult> {
    params.validate()?;
    check_rate("sigma", sigma)?;
    check_rate("kappa", kappa)?;
    if kappa == 0.0 {
        return Err(Error::param("kappa", "the series needs kappa > 0; use the quasi-static closed form"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let a = (sigma / kappa).powi(2);
    // Largest coefficient e^{a} aⁿ/n! sits near n = a; cancellation of terms
    // that large wipes out all digits below max·ε.
    let n_peak = a.floor();
    let log_peak = a + if a > 0.0 { n_peak * a.ln() } else { 0.0 } - ln_factorial(n_peak as usize);
    let cancellation = log_peak.exp() / params.half_width() * f64::EPSILON;
    if !cancellation.is_finite() || cancellation > tol {
        return Err(Error::SeriesDivergence(format!(
            "(sigma/kappa)^2 = {a:.3}: terms reach {:.3e}, beyond the tolerance {tol:e}",
            log_peak.exp()
        )));
    }
    let gm = params.rate(input);
    let shift = params.half_width() + sigma * sigma / kappa;
    let mut bound: f64 = 0.0;
    let mut max_terms = 0;
    let mut g = Vec::with_capacity(grid.len());
    for &d in grid.values() {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut growth = 0usize;
        let mut last_mag = f64::INFINITY;
        let mut converged = false;
        for n in 0..SERIES_MAX_TERMS {
            let log_c = a + if a > 0.0 { n as f64 * a.ln() } else { 0.0 } - ln_factorial(n);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let denom = Complex64::new(shift + n as f64 * kappa, -d);
            let term = sign * log_c.exp() / denom;
            sum += term;
            let mag = term.norm();
            if a == 0.0 || (n as f64 > a && mag < tol * sum.norm().max(1e-300)) {
                // Alternating tail with decreasing terms is bounded by the next one.
                let next = (log_c + a.ln() - ((n + 1) as f64).ln()).exp()
                    / (shift + (n + 1) as f64 * kappa);
                bound = bound.max(if a == 0.0 { 0.0 } else { gm * next });
                max_terms = max_terms.max(n + 1);
                converged = true;
                break;
            }
            growth = if mag > last_mag { growth + 1 } else { 0 };
            if growth >= 50 {
                break;
            }
            last_mag = mag;
        }
        if !converged {
            return Err(Error::SeriesDivergence(format!(
                "no convergence within {SERIES_MAX_TERMS} terms at delta = {d}"
            )));
        }
        g.push(sum);
    }
    Ok(SeriesResult {
        result: ScatterResult::from_overlap(params, grid, g, input)?,
        truncation_bound: bound,
        max_terms,
    })
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Static Gaussian lineshape t = 1 − (γ_μ/σ)√(π/2)·erfcx(ζ), ζ = (Γ/2 − iδ)/(√2σ).
pub fn transmittance_quasistatic(
    params: &SystemParams,
    sigma: f64,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<ScatterResult> {
    params.validate()?;
    check_rate("sigma", sigma)?;
    if sigma == 0.0 {
        return Err(Error::param(
            "sigma",
            "must be > 0; use transmittance_white with gamma_phi = 0",
        ));
    }
    let pref = (0.5 * std::f64::consts::PI).sqrt() / sigma;
    let g = grid
        .values()
        .iter()
        .map(|&d| pref * erfcx(params.laplace_arg(d) / (std::f64::consts::SQRT_2 * sigma)))
        .collect();
    ScatterResult::from_overlap(params, grid, g, input)
}

/// Telegraph lineshape with γ_φ(ω) = σ²/(Γ/2 + κ − iδ).
pub fn transmittance_telegraph(
    params: &SystemParams,
    sigma: f64,
    kappa: f64,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<ScatterResult> {
    params.validate()?;
    check_rate("sigma", sigma)?;
    check_rate("kappa", kappa)?;
    let g = grid
        .values()
        .iter()
        .map(|&d| {
            let s = params.laplace_arg(d);
            1.0 / (s + sigma * sigma / (s + kappa))
        })
        .collect();
    ScatterResult::from_overlap(params, grid, g, input)
}

/// G = Σ g where J g = P_ss, J = diag(Γ/2 − iδ + iΔ_m) − W.
pub fn scatter_jump(
    params: &SystemParams,
    jump: &JumpModel,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<ScatterResult> {
    params.validate()?;
    let det = grid.values();
    let g: Vec<Result<Complex64>> = par_collect(det.len(), |k| overlap_jump(params, jump, det[k]));
    let g = g.into_iter().collect::<Result<Vec<_>>>()?;
    ScatterResult::from_overlap(params, grid, g, input)
}

fn overlap_jump(params: &SystemParams, jump: &JumpModel, delta: f64) -> Result<Complex64> {
    let n = jump.len();
    let s = params.laplace_arg(delta);
    let w = jump.transitions();
    let delta_m = jump.realizations();
    let rhs: Vec<Complex64> = jump.stationary().iter().map(|p| Complex64::new(*p, 0.0)).collect();
    let diag: Vec<Complex64> = (0..n)
        .map(|m| s + Complex64::new(0.0, delta_m[m]) - w.get(m, m))
        .collect();
    let x = if n <= DENSE_SOLVE_LIMIT {
        let mut j = CMatrix::zeros(n);
        for (r, c, v) in w.entries() {
            j.set(r, c, Complex64::new(-v, 0.0));
        }
        for (m, d) in diag.iter().enumerate() {
            j.set(m, m, *d);
        }
        lu_solve(j, &rhs)?
    } else {
        let apply = |x: &[Complex64], out: &mut [Complex64]| {
            w.matvec_into(x, out);
            for ((o, xi), m) in out.iter_mut().zip(x).zip(0..n) {
                *o = (s + Complex64::new(0.0, delta_m[m])) * xi - *o;
            }
        };
        bicgstab(apply, &diag, &rhs, 1e-14, 20 * n.max(100))?
    };
    Ok(x.iter().sum())
}

/// Solver route for [`spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form where one exists, jump solver for discrete models,
    /// Laplace quadrature otherwise.
    #[default]
    Auto,
    Laplace,
    Series,
    Closed,
    Jump,
}

/// Spectrum of any built-in model. White parts are folded into the
/// Laplace shift Γ/2 → Γ/2 + γ_WB.
pub fn spectrum(
    params: &SystemParams,
    model: &NoiseModel,
    grid: &FrequencyGrid,
    input: Channel,
    method: Method,
    series_tol: f64,
) -> Result<ScatterResult> {
    model.validate()?;
    let (white, colored) = model.split_white();
    let p = params.apply_white_background(white)?;
    let Some(colored) = colored else {
        return match method {
            Method::Series | Method::Jump => Err(Error::UnsupportedModel(format!(
                "method {method:?} needs correlated noise"
            ))),
            Method::Laplace => scatter_from_envelope(&p, |_| 1.0, grid, input),
            _ => transmittance_white(&p, 0.0, grid, input),
        };
    };
    match (method, colored) {
        (Method::Laplace, m) => scatter_from_envelope(&p, |t| envelope_value(m, t), grid, input),
        (Method::Series, NoiseModel::ColoredGaussian { sigma, kappa }) => {
            Ok(transmittance_ou_series(&p, *sigma, *kappa, grid, series_tol, input)?.result)
        }
        (Method::Series, _) => Err(Error::UnsupportedModel(
            "the series route is only defined for Ornstein-Uhlenbeck noise".into(),
        )),
        (Method::Jump, m) => scatter_jump(&p, &build_jump_model(m, DEFAULT_STATE_CAP)?, grid, input),
        (Method::Closed | Method::Auto, NoiseModel::ColoredGaussian { sigma, kappa: 0.0 }) if *sigma > 0.0 => {
            transmittance_quasistatic(&p, *sigma, grid, input)
        }
        (Method::Closed | Method::Auto, NoiseModel::Telegraph { sigma, kappa }) => {
            transmittance_telegraph(&p, *sigma, *kappa, grid, input)
        }
        (Method::Closed, _) => Err(Error::UnsupportedModel(
            "no closed-form lineshape for this model".into(),
        )),
        (Method::Auto, m) if m.is_discrete() => {
            scatter_jump(&p, &build_jump_model(m, DEFAULT_STATE_CAP)?, grid, input)
        }
        (Method::Auto, m) => scatter_from_envelope(&p, |t| envelope_value(m, t), grid, input),
    }
}

/// Replaces Γ/2 by Γ/2 + γ_WB in every lineshape; emission prefactors keep
/// their original rates.
pub fn apply_white_background(params: &SystemParams, gamma_wb: f64) -> Result<SystemParams> {
    params.apply_white_background(gamma_wb)
}
