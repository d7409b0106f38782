//! Spectroscopic reconstruction: Kramers–Kronig completion of Re t and
//! Fourier recovery of the Ramsey envelope from transmittance data.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::special::sine_integral;
use crate::types::{Channel, ComplexSpectrum, EnvelopeCurve, FrequencyGrid, SystemParams};

/// Edge-to-peak ratio of 1 − Re t above which the data count as truncated.
pub const EDGE_FLAG_RATIO: f64 = 0.05;

/// Default reconstruction horizon, in units of 1/Γ.
pub const DEFAULT_T_MAX: f64 = 6.0;

/// Largest error allowed after the e^{(Γ/2)t} amplification.
pub const AMPLIFIED_ERROR_LIMIT: f64 = 0.05;

/// Output time step of the envelope reconstruction, in units of 1/Γ.
pub const OUTPUT_STEP: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct KkResult {
    /// Im t on the input grid.
    pub im_t: Vec<f64>,
    /// max(edge values of 1 − Re t) / peak.
    pub edge_ratio: f64,
    /// True when the edge ratio reached [`EDGE_FLAG_RATIO`].
    pub flagged: bool,
    pub extrapolated: bool,
}

/// Im t(ω) = (1/π) P∫ (1 − Re t(ω'))/(ω' − ω) dω' on a uniform grid.
///
/// The data are interpolated linearly, each hat function integrated
/// exactly against the kernel, and the 1/δ² tails beyond the grid are
/// added analytically when `extrapolate` is set.
pub fn kramers_kronig(grid: &FrequencyGrid, re_t: &[f64], extrapolate: bool) -> Result<KkResult> {
    let h = grid.require_uniform()?;
    check_len(grid, re_t.len())?;
    let f: Vec<f64> = re_t.iter().map(|r| 1.0 - r).collect();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("re_t", "non-finite value"));
    }
    let edge_ratio = edge_ratio(&f);
    let flagged = edge_ratio >= EDGE_FLAG_RATIO;
    if flagged && !extrapolate {
        return Err(Error::EdgeMass {
            ratio: edge_ratio,
            limit: EDGE_FLAG_RATIO,
        });
    }
    let w = grid.values();
    let n = w.len();
    let (a_left, a_right) = tail_amplitudes(w, &f);
    let pad = if extrapolate { n } else { 0 };
    let lo = w[0] - pad as f64 * h;
    let padded: Vec<f64> = (0..n + 2 * pad)
        .map(|k| {
            if k < pad {
                let x = lo + k as f64 * h;
                a_left / (x * x)
            } else if k >= pad + n {
                let x = w[n - 1] + (k - pad - n + 1) as f64 * h;
                a_right / (x * x)
            } else {
                f[k - pad]
            }
        })
        .collect();
    let len = padded.len();
    let size = (2 * len).next_power_of_two();
    let mut a: Vec<Complex64> = padded.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b = vec![Complex64::new(0.0, 0.0); size];
    for m in 1..len {
        let c = hat_weight(m as f64);
        b[m] = Complex64::new(c, 0.0);
        b[size - m] = Complex64::new(-c, 0.0);
    }
    let conv = cyclic_convolution(a, b);
    let hi = w[n - 1] + pad as f64 * h;
    let im_t = (0..n)
        .map(|j| {
            let mut v = -conv[j + pad].re;
            if extrapolate {
                v += a_right * tail_integral(hi, w[j]) - a_left * tail_integral(-lo, -w[j]);
            }
            v / std::f64::consts::PI
        })
        .collect();
    Ok(KkResult {
        im_t,
        edge_ratio,
        flagged,
        extrapolated: extrapolate,
    })
}

/// ∫_{−1}^{1} (1 − |u|)/(u + m) du, principal value at m = 0.
fn hat_weight(m: f64) -> f64 {
    let xl = |x: f64| if x == 0.0 { 0.0 } else { x * x.abs().ln() };
    xl(m + 1.0) - 2.0 * xl(m) + xl(m - 1.0)
}

/// ∫_W^∞ dx / (x²(x − ω)) for ω < W.
fn tail_integral(w: f64, omega: f64) -> f64 {
    let r = omega / w;
    if r.abs() < 0.05 {
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 0..16 {
            sum += p / (k as f64 + 2.0);
            p *= r;
        }
        sum / (w * w)
    } else {
        -(-r).ln_1p() / (omega * omega) - 1.0 / (omega * w)
    }
}

fn cyclic_convolution(mut a: Vec<Complex64>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = a.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y / n as f64;
    }
    inv.process(&mut a);
    a
}

fn check_len(grid: &FrequencyGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::InvalidGrid(format!("{n} values for {} grid points", grid.len())));
    }
    Ok(())
}

fn edge_ratio(f: &[f64]) -> f64 {
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    f[0].abs().max(f[f.len() - 1].abs()) / peak
}

/// A in f ≈ A/δ², matched at each grid edge.
fn tail_amplitudes(w: &[f64], f: &[f64]) -> (f64, f64) {
    let n = w.len();
    (f[0] * w[0] * w[0], f[n - 1] * w[n - 1] * w[n - 1])
}

/// Settings for the envelope reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Reconstruction horizon; defaults to 6/Γ.
    pub t_max: Option<f64>,
    /// Standard deviation of additive white noise on the input samples.
    pub noise_floor: f64,
    /// Tukey taper fraction in [0, 1]; `None` leaves the data untouched.
    pub tukey: Option<f64>,
    /// Add the analytic contribution of the 1/δ² (and 1/δ) tails.
    pub extrapolate: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            t_max: None,
            noise_floor: 0.0,
            tukey: None,
            extrapolate: true,
        }
    }
}

/// Reconstructed envelope: the raw transform and the same curve divided by
/// its value at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub raw: EnvelopeCurve,
    pub normalized: EnvelopeCurve,
    /// Raw value at t = 0 (1 for exact data).
    pub c0: Complex64,
    /// Estimated error of the transform before amplification.
    pub grid_error: f64,
    /// Largest t_max allowed by the amplification bound.
    pub t_max_allowed: f64,
    pub edge_ratio: f64,
}

/// C_φ(t) = √(2/π) e^{(Γ/2)t} F⁻¹[(1 − Re t)/γ_μ](t) for a real,
/// symmetric envelope.
pub fn envelope_from_transmittance(
    params: &SystemParams,
    grid: &FrequencyGrid,
    re_t: &[f64],
    input: Channel,
    opts: &InversionOptions,
) -> Result<Reconstruction> {
    check_len(grid, re_t.len())?;
    let gm = params.rate(input);
    let f: Vec<Complex64> = re_t.iter().map(|r| Complex64::new((1.0 - r) / gm, 0.0)).collect();
    invert(params, grid, f, gm, opts, false)
}

/// C_φ(t) = (2π)^{−1/2} e^{(Γ/2)t} F⁻¹[(1 − t)/γ_μ](t) from complex data.
pub fn envelope_from_complex_transmittance(
    params: &SystemParams,
    t_spectrum: &ComplexSpectrum,
    input: Channel,
    opts: &InversionOptions,
) -> Result<Reconstruction> {
    let gm = params.rate(input);
    let f: Vec<Complex64> = t_spectrum.values.iter().map(|t| (1.0 - t) / gm).collect();
    invert(params, &t_spectrum.grid, f, gm, opts, true)
}

fn invert(
    params: &SystemParams,
    grid: &FrequencyGrid,
    mut f: Vec<Complex64>,
    gm: f64,
    opts: &InversionOptions,
    complex: bool,
) -> Result<Reconstruction> {
    params.validate()?;
    let h = grid.require_uniform()?;
    if !grid.is_symmetric() {
        return Err(Error::InvalidGrid("the grid must be symmetric about delta = 0".into()));
    }
    if f.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::param("spectrum", "non-finite value"));
    }
    let w = grid.values();
    let n = w.len();
    let re: Vec<f64> = f.iter().map(|v| v.re).collect();
    let ratio = edge_ratio(&re);
    if ratio >= EDGE_FLAG_RATIO && !opts.extrapolate {
        return Err(Error::EdgeMass {
            ratio,
            limit: EDGE_FLAG_RATIO,
        });
    }
    let fwhm = full_width_half_max(&re, h);
    let span = w[n - 1] - w[0];
    if span < 20.0 * fwhm {
        return Err(Error::InvalidGrid(format!(
            "span {span} is below 20 lineshape widths ({fwhm} each)"
        )));
    }
    if let Some(alpha) = opts.tukey {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("tukey", "taper fraction must lie in [0, 1]"));
        }
        for (k, v) in f.iter_mut().enumerate() {
            *v *= tukey(k, n, alpha);
        }
    }
    let half = params.half_width();
    let gamma = params.gamma();
    let edge = (re[0].abs() + re[n - 1].abs()) * 0.5;
    let peak = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = opts.noise_floor / gm;
    let grid_error = (noise * h * (0.5 * n as f64).sqrt() + edge * h + 1e-14 * peak)
        / std::f64::consts::PI;
    let t_allowed = (AMPLIFIED_ERROR_LIMIT / grid_error).ln() / half;
    let t_max = opts.t_max.unwrap_or(DEFAULT_T_MAX / gamma);
    if !(t_max > 0.0) {
        return Err(Error::param("t_max", "must be > 0"));
    }
    if t_max > t_allowed {
        return Err(Error::Amplification {
            requested: t_max,
            allowed: t_allowed,
        });
    }

    let step = OUTPUT_STEP / gamma;
    let n_fft = (2 * n)
        .max((2.0 * std::f64::consts::PI / (h * step)).ceil() as usize)
        .next_power_of_two();
    let dt = 2.0 * std::f64::consts::PI / (n_fft as f64 * h);
    let n_out = ((t_max / dt).floor() as usize + 1).min(n_fft / 2);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for k in 0..n {
        let wt = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        buf[k] = if complex { f[k] } else { Complex64::new(f[k].re, 0.0) } * wt;
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let d = w[n - 1];
    let (a_l, a_r) = tail_amplitudes(w, &re);
    let a = 0.5 * (a_l + a_r);
    let b = if complex {
        0.5 * (f[n - 1].im * w[n - 1] + f[0].im * w[0])
    } else {
        0.0
    };
    let pref = if complex { 0.5 } else { 1.0 } / std::f64::consts::PI;
    let mut times = Vec::with_capacity(n_out);
    let mut values = Vec::with_capacity(n_out);
    for (m, bm) in buf.iter().enumerate().take(n_out) {
        let t = m as f64 * dt;
        let shift = Complex64::from_polar(1.0, -w[0] * t);
        let mut k = pref * shift * bm;
        if !complex {
            k.im = 0.0;
        }
        if opts.extrapolate {
            let cos_tail = (d * t).cos() / d - t * (0.5 * std::f64::consts::PI - sine_integral(d * t));
            k += 2.0 * pref * a * cos_tail;
            if complex {
                k += b / std::f64::consts::PI * (0.5 * std::f64::consts::PI - sine_integral(d * t));
            }
        }
        times.push(t);
        values.push(k * (half * t).exp());
    }
    let c0 = values[0];
    let normalized: Vec<Complex64> = values.iter().map(|v| v / c0.re).collect();
    Ok(Reconstruction {
        raw: EnvelopeCurve::from_measured(times.clone(), values, None)?,
        normalized: EnvelopeCurve::from_measured(times, normalized, None)?,
        c0,
        grid_error,
        t_max_allowed: t_allowed,
        edge_ratio: ratio,
    })
}

fn full_width_half_max(f: &[f64], h: f64) -> f64 {
    let peak = f.iter().fold(0.0f64, |m, v| m.max(*v));
    let first = f.iter().position(|v| *v >= 0.5 * peak).unwrap_or(0);
    let last = f.iter().rposition(|v| *v >= 0.5 * peak).unwrap_or(0);
    (last - first) as f64 * h + h
}

fn tukey(k: usize, n: usize, alpha: f64) -> f64 {
    if alpha == 0.0 || n < 2 {
        return 1.0;
    }
    let x = k as f64 / (n - 1) as f64;
    let edge = 0.5 * alpha;
    let pi = std::f64::consts::PI;
    if x < edge {
        0.5 * (1.0 - (pi * x / edge).cos())
    } else if x > 1.0 - edge {
        0.5 * (1.0 - (pi * (1.0 - x) / edge).cos())
    } else {
        1.0
    }
}

/// Im t by Kramers–Kronig, recombined with Re t.
pub fn complete_transmittance(grid: &FrequencyGrid, re_t: &[f64], extrapolate: bool) -> Result<ComplexSpectrum> {
    let kk = kramers_kronig(grid, re_t, extrapolate)?;
    let values = re_t
        .iter()
        .zip(&kk.im_t)
        .map(|(r, i)| Complex64::new(*r, *i))
        .collect();
    ComplexSpectrum::new(grid.clone(), values, crate::types::SpectrumKind::Transmittance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{transmittance_quasistatic, transmittance_white};
    use crate::types::make_grid;

    fn p() -> SystemParams {
        SystemParams::canonical()
    }

    #[test]
    fn hat_weights_are_odd_and_sum_like_one_over_m() {
        assert_eq!(hat_weight(0.0), 0.0);
        for m in 1..20 {
            assert!((hat_weight(m as f64) + hat_weight(-(m as f64))).abs() < 1e-14);
        }
        assert!((hat_weight(1000.0) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn tail_integral_branches_agree() {
        let w = 10.0;
        for omega in [0.49, 0.51, -0.51, 3.0] {
            let direct = {
                let f = |x: f64| 1.0 / (x * x * (x - omega));
                crate::quad::simpson(&f, w, 1e5, 1e-13).unwrap() + 1.0 / (2.0 * 1e10)
            };
            assert!((tail_integral(w, omega) - direct).abs() < 1e-9, "{omega}");
        }
    }

    #[test]
    fn kk_of_lorentzian() {
        let grid = make_grid(-40.0, 40.0, 4097).unwrap();
        let w = transmittance_white(&p(), 0.1, &grid, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        let kk = kramers_kronig(&grid, &re, true).unwrap();
        assert!(!kk.flagged);
        for (i, t) in kk.im_t.iter().zip(w.t()) {
            assert!((i - t.im).abs() < 1e-3, "{i} vs {}", t.im);
        }
    }

    #[test]
    fn kk_transparent_and_antisymmetric() {
        let grid = make_grid(-10.0, 10.0, 401).unwrap();
        let kk = kramers_kronig(&grid, &vec![1.0; 401], true).unwrap();
        assert!(kk.im_t.iter().all(|v| *v == 0.0));
        let re: Vec<f64> = grid.values().iter().map(|d| 1.0 - (-d * d).exp()).collect();
        let kk = kramers_kronig(&grid, &re, true).unwrap();
        for k in 0..401 {
            assert!((kk.im_t[k] + kk.im_t[400 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn kk_edge_check() {
        let grid = make_grid(-1.0, 1.0, 101).unwrap();
        let w = transmittance_white(&p(), 0.0, &grid, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        assert!(matches!(kramers_kronig(&grid, &re, false), Err(Error::EdgeMass { .. })));
        assert!(kramers_kronig(&grid, &re, true).unwrap().flagged);
    }

    fn grid() -> FrequencyGrid {
        make_grid(-40.0, 40.0, 1 << 14).unwrap()
    }

    #[test]
    fn white_noise_envelope() {
        let g = grid();
        let w = transmittance_white(&p(), 0.3, &g, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        let rec = envelope_from_transmittance(&p(), &g, &re, Channel::Plus, &InversionOptions::default()).unwrap();
        assert!((rec.c0.re - 1.0).abs() < 1e-3);
        for (t, c) in rec.raw.times().iter().zip(rec.raw.values()) {
            if *t <= 4.0 {
                assert!((c.re - (-0.3 * t).exp()).abs() < 2e-2, "t = {t}: {c}");
            }
        }
        let cx = envelope_from_complex_transmittance(&p(), &w.transmittance, Channel::Plus, &InversionOptions::default())
            .unwrap();
        for (t, c) in cx.raw.times().iter().zip(cx.raw.values()) {
            if *t <= 4.0 {
                assert!((c - (-0.3 * t).exp()).norm() < 2e-2, "t = {t}: {c}");
            }
        }
    }

    #[test]
    fn noiseless_and_quasistatic_envelopes() {
        let g = grid();
        let w = transmittance_white(&p(), 0.0, &g, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        let rec = envelope_from_transmittance(&p(), &g, &re, Channel::Plus, &InversionOptions::default()).unwrap();
        for (t, c) in rec.raw.times().iter().zip(rec.raw.values()) {
            if *t <= 3.0 {
                assert!((c.re - 1.0).abs() < 2e-2);
            }
        }
        let q = transmittance_quasistatic(&p(), 1.0, &g, Channel::Plus).unwrap();
        let re: Vec<f64> = q.t().iter().map(|t| t.re).collect();
        let rec = envelope_from_transmittance(&p(), &g, &re, Channel::Plus, &InversionOptions::default()).unwrap();
        for (t, c) in rec.raw.times().iter().zip(rec.raw.values()) {
            let exact = (-0.5 * t * t).exp();
            if exact >= 0.05 {
                assert!((c.re - exact).abs() < 3e-2);
            }
        }
    }

    #[test]
    fn rejects_bad_grids_and_long_horizons() {
        let asym = make_grid(-40.0, 39.0, 1001).unwrap();
        let re = vec![1.0; 1001];
        assert!(envelope_from_transmittance(&p(), &asym, &re, Channel::Plus, &InversionOptions::default()).is_err());
        let g = grid();
        let w = transmittance_white(&p(), 0.3, &g, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        let opts = InversionOptions {
            t_max: Some(6.0),
            noise_floor: 1e-2,
            ..InversionOptions::default()
        };
        assert!(matches!(
            envelope_from_transmittance(&p(), &g, &re, Channel::Plus, &opts),
            Err(Error::Amplification { .. })
        ));
        let narrow = make_grid(-2.0, 2.0, 401).unwrap();
        let w = transmittance_white(&p(), 0.3, &narrow, Channel::Plus).unwrap();
        let re: Vec<f64> = w.t().iter().map(|t| t.re).collect();
        assert!(envelope_from_transmittance(&p(), &narrow, &re, Channel::Plus, &InversionOptions::default()).is_err());
    }

    #[test]
    fn tukey_window_shape() {
        assert_eq!(tukey(0, 11, 0.5), 0.0);
        assert_eq!(tukey(5, 11, 0.5), 1.0);
        assert_eq!(tukey(3, 11, 0.0), 1.0);
    }
}
