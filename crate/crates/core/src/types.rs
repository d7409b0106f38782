//! Shared domain types.
//!
//! All rates and frequencies are in units of the total emitter decay rate
//! Γ; spectra are stored against the detuning δ = ω − ω₀.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_rate, Error, Result};
use crate::stats::pairwise_sum_c;

/// Tolerance used for modulus-bound checks on analytic results.
pub const EPS_NUM: f64 = 1e-9;

/// Input (or output) waveguide channel: right-moving `Plus`, left-moving `Minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[default]
    Plus,
    Minus,
}

impl Channel {
    pub fn opposite(self) -> Channel {
        match self {
            Channel::Plus => Channel::Minus,
            Channel::Minus => Channel::Plus,
        }
    }
}

/// Emitter/waveguide rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_loss: f64,
    /// Reference frequency; metadata only.
    #[serde(default)]
    pub omega0: f64,
    /// Extra pure-dephasing rate from a white-noise background, added to
    /// the coherence decay Γ/2 but to none of the emission prefactors.
    #[serde(default)]
    pub white_background: f64,
}

impl SystemParams {
    pub fn new(gamma_plus: f64, gamma_minus: f64, gamma_loss: f64) -> Result<Self> {
        let p = SystemParams {
            gamma_plus,
            gamma_minus,
            gamma_loss,
            omega0: 0.0,
            white_background: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// γ± = 0.45Γ, γ_loss = 0.1Γ: the symmetric waveguide used in every figure.
    pub fn canonical() -> Self {
        SystemParams {
            gamma_plus: 0.45,
            gamma_minus: 0.45,
            gamma_loss: 0.1,
            omega0: 0.0,
            white_background: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("gamma_plus", self.gamma_plus)?;
        check_rate("gamma_minus", self.gamma_minus)?;
        check_rate("gamma_loss", self.gamma_loss)?;
        check_finite("omega0", self.omega0)?;
        check_rate("white_background", self.white_background)?;
        if self.gamma() <= 0.0 {
            return Err(Error::param("gamma", "total decay rate must be > 0"));
        }
        Ok(())
    }

    /// Total decay Γ = γ₊ + γ₋ + γ_loss.
    pub fn gamma(&self) -> f64 {
        self.gamma_plus + self.gamma_minus + self.gamma_loss
    }

    /// Total guided emission γ = γ₊ + γ₋.
    pub fn guided(&self) -> f64 {
        self.gamma_plus + self.gamma_minus
    }

    pub fn rate(&self, ch: Channel) -> f64 {
        match ch {
            Channel::Plus => self.gamma_plus,
            Channel::Minus => self.gamma_minus,
        }
    }

    /// Directional β-factor γ_μ/Γ.
    pub fn beta(&self, ch: Channel) -> f64 {
        self.rate(ch) / self.gamma()
    }

    pub fn beta_loss(&self) -> f64 {
        self.gamma_loss / self.gamma()
    }

    /// Coherence decay rate entering every lineshape: Γ/2 + γ_WB.
    pub fn half_width(&self) -> f64 {
        0.5 * self.gamma() + self.white_background
    }

    /// Laplace variable Γ/2 + γ_WB − iδ at detuning δ.
    pub fn laplace_arg(&self, delta: f64) -> Complex64 {
        Complex64::new(self.half_width(), -delta)
    }

    /// Adds an independent white-noise background of rate `gamma_wb`.
    /// Backgrounds add: applying γ/2 twice equals applying γ once.
    pub fn apply_white_background(&self, gamma_wb: f64) -> Result<Self> {
        check_rate("gamma_wb", gamma_wb)?;
        let mut p = *self;
        p.white_background += gamma_wb;
        Ok(p)
    }
}

/// Ordered, strictly increasing detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    detunings: Vec<f64>,
}

/// Uniform grid from `delta_min` to `delta_max` inclusive.
pub fn make_grid(delta_min: f64, delta_max: f64, n_points: usize) -> Result<FrequencyGrid> {
    check_finite("delta_min", delta_min)?;
    check_finite("delta_max", delta_max)?;
    if n_points < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 points, got {n_points}"
        )));
    }
    if delta_min >= delta_max {
        return Err(Error::InvalidGrid(format!(
            "delta_min ({delta_min}) must be below delta_max ({delta_max})"
        )));
    }
    let n = n_points - 1;
    let span = delta_max - delta_min;
    let mut v: Vec<f64> = (0..n_points)
        .map(|i| delta_min + span * (i as f64) / (n as f64))
        .collect();
    v[n] = delta_max;
    Ok(FrequencyGrid { detunings: v })
}

impl FrequencyGrid {
    pub fn new(detunings: Vec<f64>) -> Result<Self> {
        if detunings.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if let Some(x) = detunings.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite detuning {x}")));
        }
        if detunings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("detunings must be strictly increasing".into()));
        }
        Ok(FrequencyGrid { detunings })
    }

    pub fn single(delta: f64) -> Result<Self> {
        Self::new(vec![delta])
    }

    pub fn values(&self) -> &[f64] {
        &self.detunings
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.detunings[0]
    }

    pub fn last(&self) -> f64 {
        self.detunings[self.detunings.len() - 1]
    }

    /// Mean spacing; meaningful for uniform grids.
    pub fn spacing(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        (self.last() - self.first()) / (self.len() - 1) as f64
    }

    pub fn is_uniform(&self) -> bool {
        if self.len() < 2 {
            return false;
        }
        let h = self.spacing();
        self.detunings
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1e-300))
    }

    pub fn require_uniform(&self) -> Result<f64> {
        if self.is_uniform() {
            Ok(self.spacing())
        } else {
            Err(Error::InvalidGrid("a uniform grid is required".into()))
        }
    }

    /// True if the grid is mirror symmetric about δ = 0.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        let scale = self.last().abs().max(self.first().abs()).max(1e-300);
        (0..n / 2).all(|i| (self.detunings[i] + self.detunings[n - 1 - i]).abs() <= 1e-9 * scale)
    }

    /// Grid with every detuning negated, in increasing order.
    pub fn mirrored(&self) -> FrequencyGrid {
        FrequencyGrid {
            detunings: self.detunings.iter().rev().map(|x| -x).collect(),
        }
    }
}

/// What a [`ComplexSpectrum`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Transmittance,
    Reflectance,
    LossReflectance,
    Overlap,
}

/// Complex values over a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
    pub kind: SpectrumKind,
}

impl ComplexSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>, kind: SpectrumKind) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ComplexSpectrum { grid, values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Ramsey envelope C_φ(t) sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCurve {
    times: Vec<f64>,
    values: Vec<Complex64>,
    std_error: Option<Vec<f64>>,
}

impl EnvelopeCurve {
    /// Checked constructor: nonnegative increasing times, C(0) = 1 when the
    /// grid starts at 0, and |C| ≤ 1 + `EPS_NUM`.
    pub fn new(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let c = Self::from_measured(times, values, None)?;
        if c.times[0] == 0.0 && (c.values[0] - 1.0).norm() > EPS_NUM {
            return Err(Error::param("envelope", format!("C(0) = {} != 1", c.values[0])));
        }
        if let Some(v) = c.values.iter().find(|v| v.norm() > 1.0 + EPS_NUM) {
            return Err(Error::param("envelope", format!("|C| = {} exceeds 1", v.norm())));
        }
        Ok(c)
    }

    /// Constructor for estimated or reconstructed curves that only checks the
    /// shape of the data, not the normalization.
    pub fn from_measured(
        times: Vec<f64>,
        values: Vec<Complex64>,
        std_error: Option<Vec<f64>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(se) = &std_error {
            if se.len() != times.len() {
                return Err(Error::InvalidGrid("std_error length mismatch".into()));
            }
        }
        if times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("times must be finite and >= 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(EnvelopeCurve {
            times,
            values,
            std_error,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn std_error(&self) -> Option<&[f64]> {
        self.std_error.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Real parts of the values.
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Linear interpolation of the real part; clamps outside the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0].re;
        }
        let n = ts.len();
        if t >= ts[n - 1] {
            return self.values[n - 1].re;
        }
        let k = ts.partition_point(|&x| x <= t) - 1;
        let w = (t - ts[k]) / (ts[k + 1] - ts[k]);
        (1.0 - w) * self.values[k].re + w * self.values[k + 1].re
    }
}

/// Uniform time grid 0, dt, …, t_max (t_max included when it falls on the grid).
pub fn time_grid(t_max: f64, n_points: usize) -> Result<Vec<f64>> {
    check_finite("t_max", t_max)?;
    if t_max <= 0.0 || n_points < 2 {
        return Err(Error::InvalidGrid("need t_max > 0 and at least 2 points".into()));
    }
    let dt = t_max / (n_points - 1) as f64;
    let mut v: Vec<f64> = (0..n_points).map(|k| k as f64 * dt).collect();
    v[n_points - 1] = t_max;
    Ok(v)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: Complex64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    /// Sample mean and standard error sqrt(Σ|x − mean|² / (n(n−1))).
    pub fn from_samples(samples: &[Complex64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::param("n_samples", "need at least one sample"));
        }
        let mean = pairwise_sum_c(samples) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<Complex64> = samples
                .iter()
                .map(|x| Complex64::new((x - mean).norm_sqr(), 0.0))
                .collect();
            (pairwise_sum_c(&dev).re / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        Ok(EstimateWithError {
            mean,
            std_error,
            n_samples: n,
        })
    }

    pub fn exact(value: Complex64) -> Self {
        EstimateWithError {
            mean: value,
            std_error: 0.0,
            n_samples: 1,
        }
    }

    /// |mean − reference| in units of the standard error (∞ if the error is 0
    /// and the difference is not).
    pub fn z_score(&self, reference: Complex64) -> f64 {
        let d = (self.mean - reference).norm();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }

    pub fn agrees_with(&self, reference: Complex64, k_sigma: f64) -> bool {
        self.z_score(reference) <= k_sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = make_grid(-10.0, 10.0, 5).unwrap();
        assert_eq!(g.values(), &[-10.0, -5.0, 0.0, 5.0, 10.0]);
        let g = make_grid(0.0, 1.0, 2).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
        let g = make_grid(-3.0, 3.0, 601).unwrap();
        assert_eq!(g.len(), 601);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert!(g.is_uniform());
        assert!(g.is_symmetric());
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(make_grid(0.0, 1.0, 1).is_err());
        assert!(make_grid(f64::NAN, 1.0, 5).is_err());
        assert!(make_grid(0.0, f64::INFINITY, 5).is_err());
        assert!(make_grid(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn canonical_params_betas() {
        let p = SystemParams::canonical();
        assert_eq!(p.gamma(), 1.0);
        assert_eq!(p.beta(Channel::Plus), 0.45);
        assert_eq!(p.beta(Channel::Minus), 0.45);
        let total = p.beta(Channel::Plus) + p.beta(Channel::Minus) + p.beta_loss();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn params_reject_nonfinite_and_negative() {
        assert!(SystemParams::new(f64::NAN, 0.5, 0.1).is_err());
        assert!(SystemParams::new(-0.1, 0.5, 0.1).is_err());
        assert!(SystemParams::new(0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(0.45, 0.45, f64::INFINITY).is_err());
    }

    #[test]
    fn white_background_is_additive() {
        let p = SystemParams::canonical();
        let once = p.apply_white_background(0.2).unwrap();
        let twice = p
            .apply_white_background(0.1)
            .unwrap()
            .apply_white_background(0.1)
            .unwrap();
        assert!((once.half_width() - twice.half_width()).abs() < 1e-15);
        assert!(p.apply_white_background(-1.0).is_err());
    }

    #[test]
    fn envelope_checks() {
        let c = Complex64::new(1.0, 0.0);
        assert!(EnvelopeCurve::new(vec![0.0, 1.0], vec![c, c * 0.5]).is_ok());
        assert!(EnvelopeCurve::new(vec![0.0, 1.0], vec![c * 0.9, c]).is_err());
        assert!(EnvelopeCurve::new(vec![0.0, 1.0], vec![c, c * 1.1]).is_err());
        assert!(EnvelopeCurve::new(vec![1.0, 0.5], vec![c, c]).is_err());
    }

    #[test]
    fn estimate_from_samples() {
        let s: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let e = EstimateWithError::from_samples(&s).unwrap();
        assert!((e.mean.re - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.n_samples, 4);
    }
}
