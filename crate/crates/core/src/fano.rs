//! Emitter coupled through a lossy localized mode (Fano resonance):
//! scattering, measurement formulas and envelope recovery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::Observables;
use crate::error::{check_finite, Error, Result};
use crate::inversion::{AMPLIFIED_ERROR_LIMIT, DEFAULT_T_MAX, OUTPUT_STEP};
use crate::quad::{laplace, QuadOptions};
use crate::special::bessel_i1_scaled;
use crate::stats::par_collect;
use crate::types::{Channel, ComplexSpectrum, EnvelopeCurve, FrequencyGrid, SpectrumKind, SystemParams};

/// Edge-to-peak ratio of the overlap residual required for recovery.
pub const FANO_EDGE_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoParams {
    /// ω_c − ω₀.
    pub omega_c: f64,
    /// Decay rate κ of the localized mode; infinite for a broadband mode.
    pub kappa_c: f64,
}

impl FanoParams {
    pub fn new(omega_c: f64, kappa_c: f64) -> Result<Self> {
        let f = FanoParams { omega_c, kappa_c };
        f.validate()?;
        Ok(f)
    }

    /// κ_c → ∞, so z ≡ 1.
    pub fn broadband() -> Self {
        FanoParams {
            omega_c: 0.0,
            kappa_c: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("omega_c", self.omega_c)?;
        if !(self.kappa_c > 0.0) {
            return Err(Error::param("kappa_c", "must be > 0"));
        }
        Ok(())
    }

    /// z = 1/(1 − 2i(δ − ω_c)/κ_c).
    pub fn z(&self, delta: f64) -> Complex64 {
        if self.kappa_c.is_infinite() {
            return Complex64::new(1.0, 0.0);
        }
        1.0 / Complex64::new(1.0, -2.0 * (delta - self.omega_c) / self.kappa_c)
    }
}

pub fn fano_z(grid: &FrequencyGrid, fano: &FanoParams) -> Result<Vec<Complex64>> {
    fano.validate()?;
    Ok(grid.values().iter().map(|&d| fano.z(d)).collect())
}

/// Λ_μλ = δ_μλ − 2z√(γ_μγ_λ)/γ.
pub fn fano_lambda(params: &SystemParams, z: Complex64, input: Channel, output: Channel) -> Complex64 {
    let same = if input == output { 1.0 } else { 0.0 };
    same - 2.0 * z * (params.rate(input) * params.rate(output)).sqrt() / params.guided()
}

/// Laplace argument (zγ + γ_loss)/2 + γ_WB − iδ.
pub fn fano_shift(params: &SystemParams, z: Complex64, delta: f64) -> Complex64 {
    0.5 * (z * params.guided() + params.gamma_loss) + params.white_background - Complex64::new(0.0, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanoResult {
    pub z: Vec<Complex64>,
    /// ⟨⟨G⟩⟩_Fano.
    pub overlap: ComplexSpectrum,
    pub transmittance: ComplexSpectrum,
    pub reflectance: ComplexSpectrum,
    /// −z√(γ_loss γ_μ)G.
    pub loss_reflectance: ComplexSpectrum,
}

/// t = 1 − zγ_μ/(γ/2) + zγ_μG and r = −(z√(γ₊γ₋)/(γ/2))(1 − (γ/2)G), with
/// G = L[C]((zγ + γ_loss)/2 − iδ).
pub fn fano_scatter<F>(
    params: &SystemParams,
    fano: &FanoParams,
    envelope: F,
    grid: &FrequencyGrid,
    input: Channel,
) -> Result<FanoResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    params.validate()?;
    let z = fano_z(grid, fano)?;
    let f = |t: f64| Complex64::new(envelope(t), 0.0);
    let det = grid.values();
    let g: Vec<Result<Complex64>> = par_collect(det.len(), |k| {
        laplace(&f, fano_shift(params, z[k], det[k]), QuadOptions::default())
    });
    let g = g.into_iter().collect::<Result<Vec<_>>>()?;
    fano_from_overlap(params, grid, z, g, input)
}

/// Builds t and r from a known overlap.
pub fn fano_from_overlap(
    params: &SystemParams,
    grid: &FrequencyGrid,
    z: Vec<Complex64>,
    g: Vec<Complex64>,
    input: Channel,
) -> Result<FanoResult> {
    let gm = params.rate(input);
    let half = 0.5 * params.guided();
    let rr = (params.gamma_plus * params.gamma_minus).sqrt();
    let t = z.iter().zip(&g).map(|(z, g)| 1.0 - z * gm / half + z * gm * g).collect();
    let r = z.iter().zip(&g).map(|(z, g)| -(z * rr / half) * (1.0 - half * g)).collect();
    let rl = (params.gamma_loss * gm).sqrt();
    let l = z.iter().zip(&g).map(|(z, g)| -rl * z * g).collect();
    Ok(FanoResult {
        z,
        overlap: ComplexSpectrum::new(grid.clone(), g, SpectrumKind::Overlap)?,
        transmittance: ComplexSpectrum::new(grid.clone(), t, SpectrumKind::Transmittance)?,
        reflectance: ComplexSpectrum::new(grid.clone(), r, SpectrumKind::Reflectance)?,
        loss_reflectance: ComplexSpectrum::new(grid.clone(), l, SpectrumKind::LossReflectance)?,
    })
}

/// homodyne = Λ + z²√(γ_μγ_λ)Q and power = |Λ|² + 2√(γ_μγ_λ)Re{KQ}, with
/// K = z²Λ* + |z|⁴√(γ_μγ_λ)/(|z|²γ + γ_loss).
pub fn fano_measurements(
    params: &SystemParams,
    fano: &FanoParams,
    overlap_q: &[Complex64],
    grid: &FrequencyGrid,
    input: Channel,
    output: Channel,
) -> Result<Vec<Observables>> {
    if overlap_q.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "{} overlap values for {} grid points",
            overlap_q.len(),
            grid.len()
        )));
    }
    let z = fano_z(grid, fano)?;
    let root = (params.rate(input) * params.rate(output)).sqrt();
    Ok(z.iter()
        .zip(overlap_q)
        .map(|(z, q)| {
            let lam = fano_lambda(params, *z, input, output);
            let z2 = z * z;
            let zn = z.norm_sqr();
            let k = z2 * lam.conj() + zn * zn * root / (zn * params.guided() + params.gamma_loss);
            Observables {
                homodyne: lam + z2 * root * q,
                power: lam.norm_sqr() + 2.0 * root * (k * q).re,
            }
        })
        .collect())
}

/// Settings for [`fano_recover_envelope`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FanoRecoveryOptions {
    /// Reconstruction horizon; defaults to 6/Γ.
    pub t_max: Option<f64>,
}

/// C_φ(t) from ⟨⟨G⟩⟩_Fano on a uniform grid.
///
/// P(t) = (1/2π)∫dδ e^{−iδt} e^{zγt/2} G(δ) is not C_φ e^{−γ_loss t/2}
/// itself when z depends on δ: it equals D(t) + ∫₀ᵗ D(τ)k(t − τ)dτ with
/// D = C_φ e^{−γ_loss t/2} and k(u) = (√(γκ)/2) e^{−(κ/2 + iω_c)u} I₁(u√(γκ)).
/// The Volterra equation is solved for D by the trapezoid rule. The overlap of
/// the noiseless emitter is subtracted before the transform and its exact
/// envelope added back, so only the fast-decaying residual is truncated.
pub fn fano_recover_envelope(
    params: &SystemParams,
    fano: &FanoParams,
    overlap: &ComplexSpectrum,
    opts: &FanoRecoveryOptions,
) -> Result<EnvelopeCurve> {
    params.validate()?;
    fano.validate()?;
    let grid = &overlap.grid;
    let h = grid.require_uniform()?;
    let det = grid.values();
    let n = det.len();
    let z = fano_z(grid, fano)?;
    let gamma_g = params.guided();
    let resid: Vec<Complex64> = (0..n)
        .map(|k| overlap.values[k] - 1.0 / fano_shift(params, z[k], det[k]))
        .collect();
    let peak = resid.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let edge = resid[0].norm().max(resid[n - 1].norm());
    let scale = overlap.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if edge > FANO_EDGE_LIMIT * peak && edge > 1e-10 * scale {
        return Err(Error::EdgeMass {
            ratio: edge / peak,
            limit: FANO_EDGE_LIMIT,
        });
    }
    let gamma = params.gamma();
    let t_max = opts.t_max.unwrap_or(DEFAULT_T_MAX / gamma);
    if !(t_max > 0.0) {
        return Err(Error::param("t_max", "must be > 0"));
    }
    let span = det[n - 1] - det[0];
    let grid_error = (edge * 0.5 * span + 1e-14 * peak) / std::f64::consts::PI;
    let allowed = if grid_error > 0.0 {
        2.0 * (AMPLIFIED_ERROR_LIMIT / grid_error).ln() / (gamma + 2.0 * params.white_background)
    } else {
        f64::INFINITY
    };
    if t_max > allowed {
        return Err(Error::Amplification {
            requested: t_max,
            allowed,
        });
    }
    let dt = OUTPUT_STEP / gamma;
    let n_t = (t_max / dt).floor() as usize + 1;
    let times: Vec<f64> = (0..n_t).map(|m| m as f64 * dt).collect();
    let weights: Vec<f64> = (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h }).collect();
    let p: Vec<Complex64> = par_collect(n_t, |m| {
        let t = times[m];
        let sum: Complex64 = (0..n)
            .map(|k| {
                let phase = (0.5 * gamma_g * z[k] - Complex64::new(0.0, det[k])) * t;
                weights[k] * phase.exp() * resid[k]
            })
            .sum();
        sum / (2.0 * std::f64::consts::PI)
    });
    let kernel: Vec<Complex64> = times.iter().map(|&u| volterra_kernel(gamma_g, fano, u)).collect();
    let mut d = vec![Complex64::new(0.0, 0.0); n_t];
    for m in 0..n_t {
        let mut acc = if m > 0 { 0.5 * d[0] * kernel[m] } else { Complex64::new(0.0, 0.0) };
        for j in 1..m {
            acc += d[j] * kernel[m - j];
        }
        d[m] = p[m] - dt * acc;
    }
    let decay = 0.5 * params.gamma_loss + params.white_background;
    let values = times
        .iter()
        .zip(&d)
        .map(|(t, d)| 1.0 + (decay * t).exp() * d)
        .collect();
    EnvelopeCurve::from_measured(times, values, None)
}

fn volterra_kernel(gamma_g: f64, fano: &FanoParams, u: f64) -> Complex64 {
    if fano.kappa_c.is_infinite() || u == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let k = fano.kappa_c;
    let root = (gamma_g * k).sqrt();
    let x = u * root;
    // I₁(x)e^{−x} keeps the exponent combined.
    let mag = 0.5 * root * bessel_i1_scaled(x) * (x - 0.5 * k * u).exp();
    Complex64::from_polar(mag, -fano.omega_c * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramsey::ou_value;
    use crate::scattering::scatter_from_envelope;
    use crate::types::make_grid;

    fn p() -> SystemParams {
        SystemParams::canonical()
    }

    #[test]
    fn z_examples() {
        let f = FanoParams::new(0.3, 2.0).unwrap();
        assert_eq!(f.z(0.3), Complex64::new(1.0, 0.0));
        assert!((f.z(1.3) - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert!(f.z(1e9).norm() < 1e-8);
        assert!(FanoParams::new(0.0, 0.0).is_err());
        assert_eq!(FanoParams::broadband().z(123.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn direct_coupled_limit_swaps_roles() {
        let sym = SystemParams::new(0.45, 0.45, 0.1).unwrap();
        let grid = make_grid(-5.0, 5.0, 41).unwrap();
        let env = |t: f64| ou_value(1.0, 2.0, t);
        let fano = fano_scatter(&sym, &FanoParams::broadband(), env, &grid, Channel::Plus).unwrap();
        let side = scatter_from_envelope(&sym, env, &grid, Channel::Plus).unwrap();
        for k in 0..grid.len() {
            assert!((fano.transmittance.values[k] + side.r()[k]).norm() < 1e-12);
            assert!((fano.reflectance.values[k] + side.t()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_envelope_is_rational() {
        let f = FanoParams::new(0.7, 1.5).unwrap();
        let grid = make_grid(-6.0, 6.0, 25).unwrap();
        let r = fano_scatter(&p(), &f, |_| 1.0, &grid, Channel::Minus).unwrap();
        for (k, &d) in grid.values().iter().enumerate() {
            // Two-pole form: z = (κ/2)/(κ/2 − i(δ − ω_c)).
            let b = Complex64::new(0.75, -(d - 0.7));
            let z = 0.75 / b;
            let g = 1.0 / (0.5 * (z * 0.9 + 0.1) - Complex64::new(0.0, d));
            assert!((r.overlap.values[k] - g).norm() < 1e-9);
        }
    }

    #[test]
    fn measurement_coefficients() {
        let f = FanoParams::new(0.2, 3.0).unwrap();
        let grid = make_grid(-3.0, 3.0, 13).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 13];
        let m = fano_measurements(&p(), &f, &zero, &grid, Channel::Plus, Channel::Minus).unwrap();
        for (o, &d) in m.iter().zip(grid.values()) {
            let lam = fano_lambda(&p(), f.z(d), Channel::Plus, Channel::Minus);
            assert_eq!(o.homodyne, lam);
            assert!((o.power - lam.norm_sqr()).abs() < 1e-15);
        }
        let sym = SystemParams::new(0.45, 0.45, 0.1).unwrap();
        let lam = fano_lambda(&sym, Complex64::new(1.0, 0.0), Channel::Plus, Channel::Plus);
        assert!(lam.norm() < 1e-15);
    }

    #[test]
    fn homodyne_reproduces_scattering() {
        let f = FanoParams::new(0.4, 2.5).unwrap();
        let grid = make_grid(-4.0, 4.0, 33).unwrap();
        let r = fano_scatter(&p(), &f, |t| ou_value(1.0, 2.0, t), &grid, Channel::Plus).unwrap();
        let q: Vec<Complex64> = r.overlap.values.iter().zip(&r.z).map(|(g, z)| g / z).collect();
        let m = fano_measurements(&p(), &f, &q, &grid, Channel::Plus, Channel::Plus).unwrap();
        for (o, t) in m.iter().zip(&r.transmittance.values) {
            assert!((o.homodyne - t).norm() < 1e-10);
        }
        let bb = fano_scatter(&p(), &FanoParams::broadband(), |t| ou_value(1.0, 2.0, t), &grid, Channel::Plus)
            .unwrap();
        let m = fano_measurements(&p(), &FanoParams::broadband(), &bb.overlap.values, &grid, Channel::Plus, Channel::Plus)
            .unwrap();
        for (o, t) in m.iter().zip(&bb.transmittance.values) {
            assert!((o.homodyne - t).norm() < 1e-10);
        }
    }

    #[test]
    fn lambda_is_unitary_without_loss() {
        let lossless = SystemParams::new(0.7, 0.3, 0.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let chans = [Channel::Plus, Channel::Minus];
        for a in chans {
            for b in chans {
                let s: Complex64 = chans
                    .iter()
                    .map(|&c| fano_lambda(&lossless, one, c, a).conj() * fano_lambda(&lossless, one, c, b))
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_recovery_is_one() {
        let f = FanoParams::new(0.5, 2.0).unwrap();
        let grid = make_grid(-40.0, 40.0, 4001).unwrap();
        let r = fano_scatter(&p(), &f, |_| 1.0, &grid, Channel::Plus).unwrap();
        let c = fano_recover_envelope(&p(), &f, &r.overlap, &FanoRecoveryOptions::default()).unwrap();
        for (t, v) in c.times().iter().zip(c.values()) {
            if *t <= 3.0 {
                assert!((v - 1.0).norm() < 1e-2);
            }
        }
    }

    #[test]
    fn kernel_matches_fourier_integral() {
        // (1/2π)∫dν e^{−iνu}(e^{a/(b − iν)} − 1) with a = γκu/4, b = κ/2.
        let f = FanoParams::new(0.0, 2.0).unwrap();
        let (g, u) = (0.9f64, 1.3f64);
        let a = g * 2.0 * u / 4.0;
        let integrand = |nu: f64| {
            let w = Complex64::new(1.0, -nu);
            (Complex64::new(0.0, -nu * u).exp() * ((a / w).exp() - 1.0)).re
        };
        let direct = crate::quad::simpson(&integrand, -400.0, 400.0, 1e-10).unwrap() / (2.0 * std::f64::consts::PI);
        assert!((volterra_kernel(g, &f, u).re - direct).abs() < 2e-3, "{direct}");
    }
}
