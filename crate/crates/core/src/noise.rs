//! Dephasing noise models: statistics, trajectory sampling and explicit
//! jump-process representations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_rate, Error, Result};
use crate::linalg::SparseMatrix;
use crate::stats::stream;

/// Largest jump model built unless a caller asks for more.
pub const DEFAULT_STATE_CAP: usize = 65_536;

/// Bound on κ·dt for the Bernoulli flip sampler.
pub const MAX_FLIP_STEP: f64 = 0.1;

/// One component (κ_j, σ_j) of a composite 1/f model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub kappa: f64,
    pub sigma: f64,
}

fn default_m() -> usize {
    1
}

/// A stationary, zero-mean dephasing process Δ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Delta-correlated noise of pure-dephasing rate γ_φ.
    White { gamma_phi: f64 },
    /// Ornstein–Uhlenbeck process; κ = 0 is quasi-static.
    ColoredGaussian { sigma: f64, kappa: f64 },
    /// Random telegraph process ±σ flipping at rate κ.
    Telegraph { sigma: f64, kappa: f64 },
    /// Sum of `m` identical telegraph fluctuators with total variance σ².
    TlfEnsemble { m: usize, sigma: f64, kappa: f64 },
    /// Average (scaled by 1/√N) of N independent components, each an OU
    /// process or, when `gaussian` is false, an ensemble of `m` fluctuators.
    OneOverF {
        components: Vec<Component>,
        gaussian: bool,
        #[serde(default = "default_m")]
        m: usize,
    },
    /// Independent white background of rate γ_WB added to `base`.
    WithWhiteBackground { base: Box<NoiseModel>, gamma_wb: f64 },
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::White { gamma_phi: 0.0 }
    }

    /// Adds a white background, merging with an existing one.
    pub fn with_white_background(self, gamma_wb: f64) -> Result<Self> {
        check_rate("gamma_wb", gamma_wb)?;
        Ok(match self {
            NoiseModel::White { gamma_phi } => NoiseModel::White {
                gamma_phi: gamma_phi + gamma_wb,
            },
            NoiseModel::WithWhiteBackground { base, gamma_wb: g } => NoiseModel::WithWhiteBackground {
                base,
                gamma_wb: g + gamma_wb,
            },
            other => NoiseModel::WithWhiteBackground {
                base: Box::new(other),
                gamma_wb,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::White { gamma_phi } => check_rate("gamma_phi", *gamma_phi),
            NoiseModel::ColoredGaussian { sigma, kappa } | NoiseModel::Telegraph { sigma, kappa } => {
                check_rate("sigma", *sigma)?;
                check_rate("kappa", *kappa)
            }
            NoiseModel::TlfEnsemble { m, sigma, kappa } => {
                if *m < 1 {
                    return Err(Error::param("m", "need at least one fluctuator"));
                }
                check_rate("sigma", *sigma)?;
                check_rate("kappa", *kappa)
            }
            NoiseModel::OneOverF { components, m, .. } => {
                if components.is_empty() {
                    return Err(Error::param("components", "must not be empty"));
                }
                if *m < 1 {
                    return Err(Error::param("m", "need at least one fluctuator"));
                }
                for c in components {
                    check_rate("kappa", c.kappa)?;
                    check_rate("sigma", c.sigma)?;
                }
                Ok(())
            }
            NoiseModel::WithWhiteBackground { base, gamma_wb } => {
                check_rate("gamma_wb", *gamma_wb)?;
                if matches!(**base, NoiseModel::WithWhiteBackground { .. }) {
                    return Err(Error::param(
                        "base",
                        "nested white backgrounds are not allowed; add the rates instead",
                    ));
                }
                base.validate()
            }
        }
    }

    /// Splits into the total white rate and the correlated part, if any.
    pub fn split_white(&self) -> (f64, Option<&NoiseModel>) {
        match self {
            NoiseModel::White { gamma_phi } => (*gamma_phi, None),
            NoiseModel::WithWhiteBackground { base, gamma_wb } => {
                let (g, rest) = base.split_white();
                (g + gamma_wb, rest)
            }
            other => (0.0, Some(other)),
        }
    }

    /// ⟨⟨Δ(0)Δ(τ)⟩⟩ for τ ≥ 0.
    pub fn autocorrelation(&self, tau: f64) -> Result<f64> {
        check_finite("tau", tau)?;
        if tau < 0.0 {
            return Err(Error::param("tau", "must be >= 0"));
        }
        match self {
            NoiseModel::White { .. } => Err(Error::DeltaCorrelated),
            NoiseModel::WithWhiteBackground { base, .. } => base.autocorrelation(tau),
            _ => Ok(self.colored_acf(tau)),
        }
    }

    // Autocorrelation of the correlated part (white parts contribute 0 at τ > 0).
    pub(crate) fn colored_acf(&self, tau: f64) -> f64 {
        match self {
            NoiseModel::White { .. } => 0.0,
            NoiseModel::ColoredGaussian { sigma, kappa }
            | NoiseModel::Telegraph { sigma, kappa }
            | NoiseModel::TlfEnsemble { sigma, kappa, .. } => sigma * sigma * (-kappa * tau).exp(),
            NoiseModel::OneOverF { components, .. } => {
                let n = components.len() as f64;
                components
                    .iter()
                    .map(|c| c.sigma * c.sigma * (-c.kappa * tau).exp())
                    .sum::<f64>()
                    / n
            }
            NoiseModel::WithWhiteBackground { base, .. } => base.colored_acf(tau),
        }
    }

    /// Variance of the correlated part, ⟨⟨Δ²⟩⟩.
    pub fn variance(&self) -> f64 {
        self.colored_acf(0.0)
    }

    /// Two-sided power spectrum S(ω) = ∫ dτ e^{iωτ} ⟨⟨Δ(0)Δ(τ)⟩⟩.
    pub fn power_spectrum(&self, omega: f64) -> f64 {
        let lorentz = |sigma: f64, kappa: f64| {
            if kappa == 0.0 {
                if omega == 0.0 && sigma > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                2.0 * kappa * sigma * sigma / (kappa * kappa + omega * omega)
            }
        };
        match self {
            NoiseModel::White { gamma_phi } => 2.0 * gamma_phi,
            NoiseModel::ColoredGaussian { sigma, kappa }
            | NoiseModel::Telegraph { sigma, kappa }
            | NoiseModel::TlfEnsemble { sigma, kappa, .. } => lorentz(*sigma, *kappa),
            NoiseModel::OneOverF { components, .. } => {
                components.iter().map(|c| lorentz(c.sigma, c.kappa)).sum::<f64>()
                    / components.len() as f64
            }
            NoiseModel::WithWhiteBackground { base, gamma_wb } => {
                base.power_spectrum(omega) + 2.0 * gamma_wb
            }
        }
    }

    /// τ_c = ∫₀^∞ acf / acf(0).
    pub fn correlation_time(&self) -> Result<f64> {
        match self {
            NoiseModel::White { .. } => Ok(0.0),
            NoiseModel::WithWhiteBackground { base, .. } => base.correlation_time(),
            NoiseModel::ColoredGaussian { sigma, kappa }
            | NoiseModel::Telegraph { sigma, kappa }
            | NoiseModel::TlfEnsemble { sigma, kappa, .. } => {
                if *sigma == 0.0 {
                    return Err(Error::param("sigma", "zero variance: correlation time undefined"));
                }
                if *kappa == 0.0 {
                    return Err(Error::InfiniteCorrelationTime);
                }
                Ok(1.0 / kappa)
            }
            NoiseModel::OneOverF { components, .. } => {
                let var: f64 = components.iter().map(|c| c.sigma * c.sigma).sum();
                if var == 0.0 {
                    return Err(Error::param("sigma", "zero variance: correlation time undefined"));
                }
                let mut area = 0.0;
                for c in components {
                    if c.sigma == 0.0 {
                        continue;
                    }
                    if c.kappa == 0.0 {
                        return Err(Error::InfiniteCorrelationTime);
                    }
                    area += c.sigma * c.sigma / c.kappa;
                }
                Ok(area / var)
            }
        }
    }

    /// Largest switching/relaxation rate in the model.
    pub fn max_kappa(&self) -> f64 {
        match self {
            NoiseModel::White { .. } => 0.0,
            NoiseModel::ColoredGaussian { kappa, .. }
            | NoiseModel::Telegraph { kappa, .. }
            | NoiseModel::TlfEnsemble { kappa, .. } => *kappa,
            NoiseModel::OneOverF { components, .. } => {
                components.iter().map(|c| c.kappa).fold(0.0, f64::max)
            }
            NoiseModel::WithWhiteBackground { base, .. } => base.max_kappa(),
        }
    }

    /// True if Δ(t) takes finitely many values.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            NoiseModel::Telegraph { .. }
                | NoiseModel::TlfEnsemble { .. }
                | NoiseModel::OneOverF { gaussian: false, .. }
        )
    }
}

/// 1/f recipe: N log-uniform rates from `kappa_min` to `kappa_max` with
/// σ_j = σ₁ (κ₁/κ_j)^{(η−1)/2}.
pub fn one_over_f_components(
    n: usize,
    kappa_min: f64,
    kappa_max: f64,
    sigma1: f64,
    eta: f64,
) -> Result<Vec<Component>> {
    if n < 2 {
        return Err(Error::param("n", "need at least two components"));
    }
    check_finite("kappa_min", kappa_min)?;
    check_finite("kappa_max", kappa_max)?;
    check_rate("sigma1", sigma1)?;
    if !(eta > 0.0 && eta < 2.0) {
        return Err(Error::param("eta", format!("must lie in (0, 2), got {eta}")));
    }
    if !(kappa_min > 0.0) || kappa_min >= kappa_max {
        return Err(Error::param(
            "kappa_min",
            format!("need 0 < kappa_min < kappa_max, got {kappa_min}, {kappa_max}"),
        ));
    }
    let (l0, l1) = (kappa_min.log10(), kappa_max.log10());
    Ok((0..n)
        .map(|j| {
            let kappa = if j == 0 {
                kappa_min
            } else if j == n - 1 {
                kappa_max
            } else {
                10f64.powf(l0 + (l1 - l0) * j as f64 / (n - 1) as f64)
            };
            Component {
                kappa,
                sigma: sigma1 * (kappa_min / kappa).powf(0.5 * (eta - 1.0)),
            }
        })
        .collect())
}

/// Ideal power law πσ₁²κ₁^{η−1} / (sin(πη/2) ln(κ_N/κ₁) ω^η) that the 1/f
/// recipe approximates between κ₁ and κ_N.
pub fn one_over_f_ideal(components: &[Component], eta: f64, omega: f64) -> f64 {
    let first = components[0];
    let last = components[components.len() - 1];
    let pi = std::f64::consts::PI;
    pi * first.sigma * first.sigma * first.kappa.powf(eta - 1.0)
        / ((0.5 * pi * eta).sin() * (last.kappa / first.kappa).ln())
        / omega.abs().powf(eta)
}

/// Sampled noise path Δ(t_k) on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Source {
    Ou {
        decay: f64,
        kick: f64,
        x: f64,
    },
    Flips {
        amp: f64,
        p_flip: f64,
        up: Vec<bool>,
    },
}

/// Stepper for the correlated part of a model at fixed step `dt`.
#[derive(Debug, Clone)]
pub struct Sampler {
    sources: Vec<Source>,
}

impl Sampler {
    /// Draws the initial state from the stationary law. White parts are
    /// ignored here; callers treat them analytically.
    pub fn new(model: &NoiseModel, dt: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        model.validate()?;
        check_rate("dt", dt)?;
        let mut sources = Vec::new();
        let (_, colored) = model.split_white();
        if let Some(m) = colored {
            push_sources(m, dt, 1.0, rng, &mut sources)?;
        }
        Ok(Sampler { sources })
    }

    pub fn value(&self) -> f64 {
        self.sources
            .iter()
            .map(|s| match s {
                Source::Ou { x, .. } => *x,
                Source::Flips { amp, up, .. } => {
                    let n_up = up.iter().filter(|u| **u).count() as f64;
                    amp * (2.0 * n_up - up.len() as f64)
                }
            })
            .sum()
    }

    pub fn advance(&mut self, rng: &mut ChaCha8Rng) {
        for s in &mut self.sources {
            match s {
                Source::Ou { decay, kick, x, .. } => {
                    if *kick > 0.0 {
                        let xi: f64 = rng.sample(StandardNormal);
                        *x = *x * *decay + *kick * xi;
                    }
                }
                Source::Flips { p_flip, up, .. } => {
                    if *p_flip > 0.0 {
                        for u in up.iter_mut() {
                            if rng.random::<f64>() < *p_flip {
                                *u = !*u;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn push_sources(
    model: &NoiseModel,
    dt: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Source>,
) -> Result<()> {
    let flip_prob = |kappa: f64| -> Result<f64> {
        if kappa * dt > MAX_FLIP_STEP * (1.0 + 1e-12) {
            return Err(Error::StepBound(format!(
                "kappa*dt = {} exceeds {MAX_FLIP_STEP}",
                kappa * dt
            )));
        }
        Ok(-0.5 * (-kappa * dt).exp_m1())
    };
    let ou = |sigma: f64, kappa: f64, rng: &mut ChaCha8Rng| {
        let x0: f64 = rng.sample(StandardNormal);
        Source::Ou {
            decay: (-kappa * dt).exp(),
            kick: sigma * (-(-2.0 * kappa * dt).exp_m1()).sqrt(),
            x: sigma * x0,
        }
    };
    let flips = |amp: f64, kappa: f64, m: usize, rng: &mut ChaCha8Rng| -> Result<Source> {
        Ok(Source::Flips {
            amp,
            p_flip: flip_prob(kappa)?,
            up: (0..m).map(|_| rng.random::<bool>()).collect(),
        })
    };
    match model {
        NoiseModel::White { .. } => {}
        NoiseModel::WithWhiteBackground { base, .. } => push_sources(base, dt, scale, rng, out)?,
        NoiseModel::ColoredGaussian { sigma, kappa } => out.push(ou(sigma * scale, *kappa, rng)),
        NoiseModel::Telegraph { sigma, kappa } => out.push(flips(sigma * scale, *kappa, 1, rng)?),
        NoiseModel::TlfEnsemble { m, sigma, kappa } => {
            out.push(flips(sigma * scale / (*m as f64).sqrt(), *kappa, *m, rng)?)
        }
        NoiseModel::OneOverF {
            components,
            gaussian,
            m,
        } => {
            let s = scale / (components.len() as f64).sqrt();
            for c in components {
                if *gaussian {
                    out.push(ou(c.sigma * s, c.kappa, rng));
                } else {
                    out.push(flips(c.sigma * s / (*m as f64).sqrt(), c.kappa, *m, rng)?);
                }
            }
        }
    }
    Ok(())
}

/// Samples Δ(t) on a uniform grid, starting from the stationary law.
pub fn sample_trajectory(model: &NoiseModel, times: &[f64], seed: u64) -> Result<Trajectory> {
    model.validate()?;
    if model.split_white().0 > 0.0 || matches!(model, NoiseModel::White { .. }) {
        return Err(Error::UnsupportedModel(
            "white noise is never sampled; it enters the solvers as a dephasing rate".into(),
        ));
    }
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    let dt = if times.len() > 1 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300) || w[1] <= w[0])
        {
            return Err(Error::InvalidGrid("a uniform time grid is required".into()));
        }
        dt
    } else {
        0.0
    };
    let mut rng = stream(seed, 0);
    let mut sampler = Sampler::new(model, dt, &mut rng)?;
    let mut values = Vec::with_capacity(times.len());
    values.push(sampler.value());
    for _ in 1..times.len() {
        sampler.advance(&mut rng);
        values.push(sampler.value());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        values,
    })
}

/// Finite Markov jump representation (Δ_m, W, P_ss) of a discrete model.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    realizations: Vec<f64>,
    transitions: SparseMatrix,
    stationary: Vec<f64>,
}

impl JumpModel {
    /// Checked constructor from a dense transition matrix.
    pub fn new(realizations: Vec<f64>, transition_matrix: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self> {
        let n = realizations.len();
        if transition_matrix.len() != n || transition_matrix.iter().any(|r| r.len() != n) {
            return Err(Error::param("transition_matrix", "must be square of the realization count"));
        }
        let trip = transition_matrix
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, v)| (i, j, *v))
            })
            .collect();
        Self::from_sparse(realizations, SparseMatrix::from_triplets(n, trip), stationary)
    }

    pub fn from_sparse(realizations: Vec<f64>, transitions: SparseMatrix, stationary: Vec<f64>) -> Result<Self> {
        let j = JumpModel {
            realizations,
            transitions,
            stationary,
        };
        j.check_invariants(1e-12)?;
        Ok(j)
    }

    /// One frozen state Δ = `delta` (no dynamics).
    pub fn single(delta: f64) -> Self {
        JumpModel {
            realizations: vec![delta],
            transitions: SparseMatrix::from_triplets(1, vec![]),
            stationary: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn realizations(&self) -> &[f64] {
        &self.realizations
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn transitions(&self) -> &SparseMatrix {
        &self.transitions
    }

    /// Dense copy of W.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        self.transitions.to_dense()
    }

    /// Column sums, W·P_ss, normalization and zero mean, all within `tol`
    /// relative to the largest rate (or value).
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let n = self.realizations.len();
        if n == 0 || self.stationary.len() != n || self.transitions.dim() != n {
            return Err(Error::param("jump_model", "inconsistent dimensions"));
        }
        if self.realizations.iter().chain(&self.stationary).any(|v| !v.is_finite()) {
            return Err(Error::param("jump_model", "non-finite entries"));
        }
        let rate_scale = self.transitions.entries().map(|e| e.2.abs()).fold(0.0, f64::max).max(1.0);
        for (i, j, v) in self.transitions.entries() {
            if i != j && v < 0.0 {
                return Err(Error::param("transition_matrix", format!("negative rate W[{i}][{j}] = {v}")));
            }
        }
        if let Some((j, s)) = self
            .transitions
            .column_sums()
            .into_iter()
            .enumerate()
            .find(|(_, s)| s.abs() > tol * rate_scale)
        {
            return Err(Error::param("transition_matrix", format!("column {j} sums to {s}")));
        }
        if self.stationary.iter().any(|p| *p < 0.0) {
            return Err(Error::param("stationary", "negative probability"));
        }
        let total: f64 = self.stationary.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::param("stationary", format!("sums to {total}")));
        }
        let flow = self.transitions.matvec_real(&self.stationary);
        if let Some(f) = flow.iter().find(|f| f.abs() > tol * rate_scale) {
            return Err(Error::param("stationary", format!("W·P_ss has entry {f}")));
        }
        let value_scale = self.realizations.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        let mean: f64 = self
            .realizations
            .iter()
            .zip(&self.stationary)
            .map(|(d, p)| d * p)
            .sum();
        if mean.abs() > tol * value_scale {
            return Err(Error::param("realizations", format!("nonzero mean {mean}")));
        }
        Ok(())
    }
}

fn binomial_row(m: usize) -> Vec<f64> {
    // 2^{-M} C(M, k), built by repeated averaging to stay exact in floating point.
    let mut row = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; row.len() + 1];
        for (k, v) in row.iter().enumerate() {
            next[k] += 0.5 * v;
            next[k + 1] += 0.5 * v;
        }
        row = next;
    }
    row
}

// One M-fluctuator ensemble: realizations (2m − M)·amp and its W entries.
fn ensemble(m: usize, amp: f64, kappa: f64) -> (Vec<f64>, Vec<(usize, usize, f64)>, Vec<f64>) {
    let values = (0..=m).map(|k| (2.0 * k as f64 - m as f64) * amp).collect();
    let mut trip = Vec::new();
    for k in 0..=m {
        trip.push((k, k, -(m as f64) * kappa / 2.0));
        if k < m {
            trip.push((k, k + 1, kappa * (k + 1) as f64 / 2.0));
        }
        if k > 0 {
            trip.push((k, k - 1, kappa * (m + 1 - k) as f64 / 2.0));
        }
    }
    (values, trip, binomial_row(m))
}

/// Explicit jump model of a discrete noise model with at most `cap` states.
pub fn build_jump_model(model: &NoiseModel, cap: usize) -> Result<JumpModel> {
    model.validate()?;
    let (values, trip, stationary) = match model {
        NoiseModel::Telegraph { sigma, kappa } => ensemble(1, *sigma, *kappa),
        NoiseModel::TlfEnsemble { m, sigma, kappa } => {
            let states = *m as u128 + 1;
            if states > cap as u128 {
                return Err(Error::StateCapExceeded {
                    states,
                    m_plus_one: m + 1,
                    n_components: 1,
                    cap,
                });
            }
            ensemble(*m, sigma / (*m as f64).sqrt(), *kappa)
        }
        NoiseModel::OneOverF {
            components,
            gaussian: false,
            m,
        } => {
            let n_comp = components.len();
            let states = (*m as u128 + 1).checked_pow(n_comp as u32).unwrap_or(u128::MAX);
            if states > cap as u128 {
                return Err(Error::StateCapExceeded {
                    states,
                    m_plus_one: m + 1,
                    n_components: n_comp,
                    cap,
                });
            }
            tensor_product(components, *m)
        }
        NoiseModel::OneOverF { gaussian: true, .. } | NoiseModel::ColoredGaussian { .. } => {
            return Err(Error::UnsupportedModel(
                "Gaussian noise has no finite realization set".into(),
            ))
        }
        NoiseModel::White { .. } | NoiseModel::WithWhiteBackground { .. } => {
            return Err(Error::UnsupportedModel(
                "white noise has no finite realization set; apply it as a background rate".into(),
            ))
        }
    };
    let n = values.len();
    JumpModel::from_sparse(values, SparseMatrix::from_triplets(n, trip), stationary)
}

fn tensor_product(components: &[Component], m: usize) -> (Vec<f64>, Vec<(usize, usize, f64)>, Vec<f64>) {
    let n_comp = components.len();
    let base = m + 1;
    let total = base.pow(n_comp as u32);
    let norm = 1.0 / ((n_comp * m) as f64).sqrt();
    let binom = binomial_row(m);
    let mut values = vec![0.0; total];
    let mut stationary = vec![0.0; total];
    let mut trip = Vec::with_capacity(total * (2 * n_comp + 1));
    let mut digits = vec![0usize; n_comp];
    for idx in 0..total {
        let mut rest = idx;
        for d in digits.iter_mut() {
            *d = rest % base;
            rest /= base;
        }
        let mut value = 0.0;
        let mut p = 1.0;
        let mut diag = 0.0;
        let mut stride = 1;
        for (&k, c) in digits.iter().zip(components) {
            value += (2.0 * k as f64 - m as f64) * c.sigma * norm;
            p *= binom[k];
            diag -= m as f64 * c.kappa / 2.0;
            // W[idx', idx] for the transitions out of idx in component j.
            if k < m {
                trip.push((idx + stride, idx, c.kappa * (m - k) as f64 / 2.0));
            }
            if k > 0 {
                trip.push((idx - stride, idx, c.kappa * k as f64 / 2.0));
            }
            stride *= base;
        }
        trip.push((idx, idx, diag));
        values[idx] = value;
        stationary[idx] = p;
    }
    (values, trip, stationary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_examples() {
        let ou = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 2.0 };
        assert_eq!(ou.autocorrelation(0.0).unwrap(), 1.0);
        let tel = NoiseModel::Telegraph { sigma: 2.0, kappa: 1.0 };
        assert!((tel.autocorrelation(2f64.ln()).unwrap() - 2.0).abs() < 1e-15);
        let f = NoiseModel::OneOverF {
            components: vec![Component { kappa: 1.0, sigma: 1.0 }, Component { kappa: 2.0, sigma: 1.0 }],
            gaussian: true,
            m: 1,
        };
        assert_eq!(f.autocorrelation(0.0).unwrap(), 1.0);
        assert_eq!(
            NoiseModel::White { gamma_phi: 0.3 }.autocorrelation(1.0),
            Err(Error::DeltaCorrelated)
        );
    }

    #[test]
    fn power_spectrum_examples() {
        let ou = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 };
        assert_eq!(ou.power_spectrum(0.0), 2.0);
        assert_eq!(ou.power_spectrum(1.0), 1.0);
        assert!((NoiseModel::White { gamma_phi: 0.3 }.power_spectrum(7.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn correlation_time_examples() {
        let ou = NoiseModel::ColoredGaussian { sigma: 3.0, kappa: 2.0 };
        assert_eq!(ou.correlation_time().unwrap(), 0.5);
        let tel = NoiseModel::Telegraph { sigma: 1.0, kappa: 4.0 };
        assert_eq!(tel.correlation_time().unwrap(), 0.25);
        let f = NoiseModel::OneOverF {
            components: vec![Component { kappa: 1.0, sigma: 1.0 }, Component { kappa: 2.0, sigma: 1.0 }],
            gaussian: true,
            m: 1,
        };
        assert!((f.correlation_time().unwrap() - 0.75).abs() < 1e-15);
        let qs = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 0.0 };
        assert_eq!(qs.correlation_time(), Err(Error::InfiniteCorrelationTime));
        assert_eq!(NoiseModel::White { gamma_phi: 1.0 }.correlation_time().unwrap(), 0.0);
    }

    #[test]
    fn one_over_f_recipe() {
        let c = one_over_f_components(8, 1e-5, 10.0, 2.0, 0.99).unwrap();
        assert_eq!(c.len(), 8);
        for (j, comp) in c.iter().enumerate() {
            let expect = 1e-5 * 1e6f64.powf(j as f64 / 7.0);
            assert!((comp.kappa - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(c[0].sigma, 2.0);
        let c2 = one_over_f_components(2, 1.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(c2, vec![Component { kappa: 1.0, sigma: 1.0 }, Component { kappa: 10.0, sigma: 1.0 }]);
        assert!(one_over_f_components(8, 1e-5, 10.0, 2.0, 2.0).is_err());
        assert!(one_over_f_components(8, 10.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn one_over_f_mid_band_within_25_percent() {
        let c = one_over_f_components(8, 1e-5, 10.0, 2.0, 0.99).unwrap();
        let model = NoiseModel::OneOverF { components: c.clone(), gaussian: true, m: 1 };
        for &w in &[1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            let ratio = model.power_spectrum(w) / one_over_f_ideal(&c, 0.99, w);
            assert!((0.75..=1.25).contains(&ratio), "omega {w}: ratio {ratio}");
        }
    }

    #[test]
    fn nested_background_rejected_and_flattened() {
        let base = NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 };
        let nested = NoiseModel::WithWhiteBackground {
            base: Box::new(NoiseModel::WithWhiteBackground {
                base: Box::new(base.clone()),
                gamma_wb: 0.1,
            }),
            gamma_wb: 0.1,
        };
        assert!(nested.validate().is_err());
        let flat = base
            .with_white_background(0.1)
            .unwrap()
            .with_white_background(0.1)
            .unwrap();
        assert!(flat.validate().is_ok());
        assert!((flat.split_white().0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn telegraph_jump_model() {
        let j = build_jump_model(&NoiseModel::Telegraph { sigma: 1.5, kappa: 0.8 }, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(j.realizations(), &[-1.5, 1.5]);
        assert_eq!(j.stationary(), &[0.5, 0.5]);
        assert_eq!(j.transition_matrix(), vec![vec![-0.4, 0.4], vec![0.4, -0.4]]);
    }

    #[test]
    fn tlf_jump_model_m2() {
        let s = 1.3;
        let j = build_jump_model(&NoiseModel::TlfEnsemble { m: 2, sigma: s, kappa: 1.0 }, DEFAULT_STATE_CAP)
            .unwrap();
        let r2 = 2f64.sqrt() * s;
        for (a, b) in j.realizations().iter().zip([-r2, 0.0, r2]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(j.stationary(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn one_over_f_jump_model_two_components() {
        let model = NoiseModel::OneOverF {
            components: vec![Component { kappa: 1.0, sigma: 1.0 }, Component { kappa: 3.0, sigma: 2.0 }],
            gaussian: false,
            m: 1,
        };
        let j = build_jump_model(&model, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(j.len(), 4);
        assert!(j.stationary().iter().all(|p| *p == 0.25));
        let var: f64 = j.realizations().iter().zip(j.stationary()).map(|(d, p)| d * d * p).sum();
        assert!((var - model.variance()).abs() < 1e-14);
    }

    #[test]
    fn state_cap_reports_size() {
        let model = NoiseModel::OneOverF {
            components: one_over_f_components(8, 1e-5, 10.0, 2.0, 0.99).unwrap(),
            gaussian: false,
            m: 4,
        };
        match build_jump_model(&model, DEFAULT_STATE_CAP) {
            Err(Error::StateCapExceeded { states, m_plus_one, n_components, .. }) => {
                assert_eq!(states, 390_625);
                assert_eq!((m_plus_one, n_components), (5, 8));
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_models_have_no_jump_model() {
        assert!(build_jump_model(&NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 1.0 }, 10).is_err());
    }

    #[test]
    fn telegraph_samples_are_plus_minus_sigma() {
        let times: Vec<f64> = (0..500).map(|k| k as f64 * 0.05).collect();
        let tr = sample_trajectory(&NoiseModel::Telegraph { sigma: 2.0, kappa: 1.0 }, &times, 11).unwrap();
        assert!(tr.values.iter().all(|v| *v == 2.0 || *v == -2.0));
    }

    #[test]
    fn quasi_static_trajectory_is_constant() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let tr = sample_trajectory(&NoiseModel::ColoredGaussian { sigma: 1.0, kappa: 0.0 }, &times, 5).unwrap();
        assert!(tr.values.iter().all(|v| *v == tr.values[0]));
    }

    #[test]
    fn flip_step_bound_enforced() {
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let r = sample_trajectory(&NoiseModel::Telegraph { sigma: 1.0, kappa: 1.0 }, &times, 1);
        assert!(matches!(r, Err(Error::StepBound(_))));
    }

    #[test]
    fn white_is_not_sampled() {
        let times = [0.0, 0.1];
        assert!(sample_trajectory(&NoiseModel::White { gamma_phi: 1.0 }, &times, 1).is_err());
    }

    #[test]
    fn serde_roundtrip_and_unknown_fields() {
        let m = NoiseModel::TlfEnsemble { m: 3, sigma: 2.0, kappa: 0.2 };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<NoiseModel>(&s).unwrap(), m);
        let bad = r#"{"type":"telegraph","sigma":1.0,"kappa":1.0,"sigmaa":2.0}"#;
        assert!(serde_json::from_str::<NoiseModel>(bad).is_err());
    }
}
