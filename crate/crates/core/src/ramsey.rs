//! Ramsey envelope C(t) = ⟨⟨exp(−i∫₀ᵗΔ)⟩⟩ for every noise model.

use num_complex::Complex64;

use crate::error::{check_rate, Error, Result};
use crate::linalg::{expm, rk45, CMatrix};
use crate::noise::{JumpModel, NoiseModel, Sampler, DEFAULT_STATE_CAP};
use crate::quad::simpson;
use crate::special::ou_exponent;
use crate::stats::{par_collect, stream};
use crate::types::{EnvelopeCurve, EstimateWithError, SystemParams};

/// Jump models up to this size are propagated with a dense matrix exponential.
pub const DENSE_EXPM_LIMIT: usize = 512;

/// OU envelope exp(−(σ/κ)²(e^{−κt} + κt − 1)); κ = 0 gives exp(−σ²t²/2).
pub fn ou_value(sigma: f64, kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        return (-0.5 * sigma * sigma * t * t).exp();
    }
    let r = sigma / kappa;
    (-r * r * ou_exponent(kappa * t)).exp()
}

/// Telegraph envelope for ±σ switching at rate κ.
pub fn telegraph_value(sigma: f64, kappa: f64, t: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let half = 0.5 * kappa;
    let disc = half * half - sigma * sigma;
    if disc >= 0.0 {
        // Real roots −κ/2 ± r; the slow rate σ²/(κ/2 + r) avoids cancellation.
        let r = disc.sqrt();
        let slow = sigma * sigma / (half + r);
        let e2 = (-2.0 * r * t).exp();
        let sinhc_part = if r * t < 1e-8 { 1.0 - r * t } else { -(-2.0 * r * t).exp_m1() / (2.0 * r * t) };
        (-slow * t).exp() * (0.5 * (1.0 + e2) + half * t * sinhc_part)
    } else {
        let w = (-disc).sqrt();
        let x = w * t;
        let sinc = if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
        (-half * t).exp() * (x.cos() + half * t * sinc)
    }
}

/// Closed-form envelope of any built-in model at time t.
pub fn envelope_value(model: &NoiseModel, t: f64) -> f64 {
    match model {
        NoiseModel::White { gamma_phi } => (-gamma_phi * t).exp(),
        NoiseModel::ColoredGaussian { sigma, kappa } => ou_value(*sigma, *kappa, t),
        NoiseModel::Telegraph { sigma, kappa } => telegraph_value(*sigma, *kappa, t),
        NoiseModel::TlfEnsemble { m, sigma, kappa } => {
            telegraph_value(sigma / (*m as f64).sqrt(), *kappa, t).powi(*m as i32)
        }
        NoiseModel::OneOverF {
            components,
            gaussian,
            m,
        } => {
            let n = components.len() as f64;
            components
                .iter()
                .map(|c| {
                    if *gaussian {
                        ou_value(c.sigma / n.sqrt(), c.kappa, t)
                    } else {
                        telegraph_value(c.sigma / (n * *m as f64).sqrt(), c.kappa, t).powi(*m as i32)
                    }
                })
                .product()
        }
        NoiseModel::WithWhiteBackground { base, gamma_wb } => envelope_value(base, t) * (-gamma_wb * t).exp(),
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("times must be finite, >= 0 and increasing".into()));
    }
    Ok(())
}

fn real_curve(times: &[f64], f: impl Fn(f64) -> f64) -> Result<EnvelopeCurve> {
    check_times(times)?;
    let values = times.iter().map(|&t| Complex64::new(f(t), 0.0)).collect();
    EnvelopeCurve::new(times.to_vec(), values)
}

/// Closed-form envelope of a model on a grid.
pub fn envelope(model: &NoiseModel, times: &[f64]) -> Result<EnvelopeCurve> {
    model.validate()?;
    real_curve(times, |t| envelope_value(model, t))
}

pub fn envelope_ou(sigma: f64, kappa: f64, times: &[f64]) -> Result<EnvelopeCurve> {
    check_rate("sigma", sigma)?;
    check_rate("kappa", kappa)?;
    real_curve(times, |t| ou_value(sigma, kappa, t))
}

pub fn envelope_telegraph(sigma: f64, kappa: f64, times: &[f64]) -> Result<EnvelopeCurve> {
    check_rate("sigma", sigma)?;
    check_rate("kappa", kappa)?;
    real_curve(times, |t| telegraph_value(sigma, kappa, t))
}

/// Gaussian cumulant envelope exp(−∫₀ᵗ (t−τ) acf(τ) dτ).
///
/// The exponent is t·A(t) − B(t) with A = ∫acf and B = ∫τ·acf accumulated
/// segment by segment with adaptive Simpson.
pub fn envelope_gaussian_from_acf<F>(acf: F, times: &[f64]) -> Result<EnvelopeCurve>
where
    F: Fn(f64) -> f64,
{
    check_times(times)?;
    let t_max = times[times.len() - 1];
    let tol = 1e-10 / (times.len() as f64 * (1.0 + t_max));
    let mut a = 0.0;
    let mut b = 0.0;
    let mut prev = 0.0;
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        if t > prev {
            a += simpson(&acf, prev, t, tol)?;
            b += simpson(&|x: f64| x * acf(x), prev, t, tol)?;
            prev = t;
        }
        let exponent = t * a - b;
        values.push(Complex64::new((-exponent).exp(), 0.0));
    }
    EnvelopeCurve::new(times.to_vec(), values)
}

/// Envelope of a jump model: x' = (−iΔ + W)x, x(0) = P_ss, C = Σ x.
pub fn envelope_jump(jump: &JumpModel, times: &[f64]) -> Result<EnvelopeCurve> {
    check_times(times)?;
    let n = jump.len();
    if n > DEFAULT_STATE_CAP {
        return Err(Error::StateCapExceeded {
            states: n as u128,
            m_plus_one: n,
            n_components: 1,
            cap: DEFAULT_STATE_CAP,
        });
    }
    let x0: Vec<Complex64> = jump.stationary().iter().map(|p| Complex64::new(*p, 0.0)).collect();
    let mut values = Vec::with_capacity(times.len());
    if n <= DENSE_EXPM_LIMIT {
        let w = jump.transitions();
        let gen = CMatrix::from_fn(n, |i, j| {
            let mut v = Complex64::new(w.get(i, j), 0.0);
            if i == j {
                v -= Complex64::new(0.0, jump.realizations()[i]);
            }
            v
        });
        let mut x = x0;
        let mut t_prev = 0.0;
        let mut cached: Option<(f64, CMatrix)> = None;
        for &t in times {
            let h = t - t_prev;
            if h > 0.0 {
                let reuse = matches!(&cached, Some((hc, _)) if (hc - h).abs() <= 1e-12 * h);
                if !reuse {
                    let mut a = gen.clone();
                    a.scale(h);
                    cached = Some((h, expm(&a)));
                }
                x = cached.as_ref().unwrap().1.matvec(&x);
            }
            t_prev = t;
            values.push(x.iter().sum::<Complex64>());
        }
    } else {
        let w = jump.transitions();
        let delta = jump.realizations();
        rk45(
            |x, dx| {
                w.matvec_into(x, dx);
                for ((d, xi), v) in dx.iter_mut().zip(x).zip(delta) {
                    *d -= Complex64::new(0.0, *v) * xi;
                }
            },
            x0,
            times,
            1e-10,
            1e-13,
            |_, x| values.push(x.iter().sum::<Complex64>()),
        )?;
    }
    EnvelopeCurve::new(times.to_vec(), values)
}

/// Largest internal step allowed for the Monte Carlo integrators:
/// κ_max·dt ≤ 0.1 and σ·dt ≤ 0.1.
pub fn mc_step_limit(model: &NoiseModel) -> f64 {
    let rate = model.max_kappa().max(model.variance().sqrt());
    if rate > 0.0 {
        0.1 / rate
    } else {
        f64::INFINITY
    }
}

/// Monte Carlo envelope ⟨⟨e^{−iφ(t)}⟩⟩ with trapezoid phases, on a uniform
/// grid starting at t = 0. White parts enter as an exact e^{−γt} factor.
pub fn envelope_mc(model: &NoiseModel, times: &[f64], n_traj: usize, seed: u64) -> Result<EnvelopeCurve> {
    model.validate()?;
    check_times(times)?;
    if n_traj < 100 {
        return Err(Error::param("n_traj", format!("need at least 100 trajectories, got {n_traj}")));
    }
    if times[0] != 0.0 || times.len() < 2 {
        return Err(Error::InvalidGrid("the Monte Carlo grid must start at t = 0".into()));
    }
    let dt_out = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt_out).abs() > 1e-9 * dt_out)
    {
        return Err(Error::InvalidGrid("a uniform time grid is required".into()));
    }
    let n_sub = (dt_out / mc_step_limit(model)).ceil().max(1.0) as usize;
    let h = dt_out / n_sub as f64;
    let (white, _) = model.split_white();
    let per_traj: Vec<Result<Vec<Complex64>>> = par_collect(n_traj, |i| {
        let mut rng = stream(seed, i as u64);
        let mut sampler = Sampler::new(model, h, &mut rng)?;
        let mut phase = 0.0;
        let mut d_old = sampler.value();
        let mut out = Vec::with_capacity(times.len());
        out.push(Complex64::new(1.0, 0.0));
        for _ in 1..times.len() {
            for _ in 0..n_sub {
                sampler.advance(&mut rng);
                let d_new = sampler.value();
                phase += 0.5 * (d_old + d_new) * h;
                d_old = d_new;
            }
            out.push(Complex64::from_polar(1.0, -phase));
        }
        Ok(out)
    });
    let per_traj: Vec<Vec<Complex64>> = per_traj.into_iter().collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    let mut column = vec![Complex64::new(0.0, 0.0); n_traj];
    for (k, &t) in times.iter().enumerate() {
        for (c, tr) in column.iter_mut().zip(&per_traj) {
            *c = tr[k];
        }
        let est = EstimateWithError::from_samples(&column)?;
        let damp = (-white * t).exp();
        values.push(est.mean * damp);
        errors.push(est.std_error * damp);
    }
    EnvelopeCurve::from_measured(times.to_vec(), values, Some(errors))
}

/// Free decay after a π/2 pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceDecay {
    pub times: Vec<f64>,
    /// ⟨⟨⟨σ⁻⟩⟩⟩ in the frame rotating at ω₀.
    pub coherence: Vec<Complex64>,
    /// ⟨⟨⟨σ_z⟩⟩⟩ = e^{−Γt} − 1.
    pub population: Vec<f64>,
}

/// ½e^{−(Γ/2)t} C(t) and e^{−Γt} − 1.
pub fn coherence_decay(params: &SystemParams, envelope: &EnvelopeCurve) -> Result<CoherenceDecay> {
    params.validate()?;
    let g = params.gamma();
    let hw = params.half_width();
    let times = envelope.times().to_vec();
    let coherence = times
        .iter()
        .zip(envelope.values())
        .map(|(t, c)| 0.5 * (-hw * t).exp() * c)
        .collect();
    let population = times.iter().map(|t| (-g * t).exp_m1()).collect();
    Ok(CoherenceDecay {
        times,
        coherence,
        population,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::build_jump_model;
    use crate::types::time_grid;

    #[test]
    fn ou_limits() {
        assert_eq!(ou_value(0.0, 3.0, 2.0), 1.0);
        assert!((ou_value(1.0, 0.0, 1.0) - (-0.5f64).exp()).abs() < 1e-15);
        for k in 0..=200 {
            let t = k as f64 * 0.1;
            let c = ou_value(1.0, 10.0, t);
            assert!((c - (-0.1 * t).exp()).abs() <= 0.02 * (-0.1 * t).exp());
        }
    }

    #[test]
    fn telegraph_static_is_cosine() {
        assert!((telegraph_value(1.0, 0.0, std::f64::consts::PI) + 1.0).abs() < 1e-15);
        assert_eq!(telegraph_value(0.0, 1.0, 5.0), 1.0);
    }

    #[test]
    fn telegraph_continuous_across_critical_damping() {
        let s = 1.0;
        for &t in &[0.1f64, 1.0, 3.0, 10.0] {
            let crit = (1.0 + t) * (-t).exp();
            for &k in &[2.0 - 1e-9, 2.0, 2.0 + 1e-9] {
                assert!((telegraph_value(s, k, t) - crit).abs() < 1e-8, "kappa {k} t {t}");
            }
        }
    }

    #[test]
    fn telegraph_fast_switching_is_exponential() {
        let (s, k) = (2.0, 10.0);
        for i in 0..=20 {
            let t = i as f64 * 0.05;
            let white = (-(s * s / k) * t).exp();
            assert!((telegraph_value(s, k, t) - white).abs() <= 0.05 * white);
        }
    }

    #[test]
    fn telegraph_large_times_do_not_overflow() {
        let v = telegraph_value(0.1, 50.0, 2000.0);
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn gaussian_from_acf_examples() {
        let times = time_grid(5.0, 20).unwrap();
        let c = envelope_gaussian_from_acf(|_| 0.0, &times).unwrap();
        assert!(c.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let c = envelope_gaussian_from_acf(|_| 1.0, &[1.0]).unwrap();
        assert!((c.values()[0].re - (-0.5f64).exp()).abs() < 1e-12);
        for &(s, k) in &[(1.0, 10.0), (1.0, 2.0), (1.0, 0.1)] {
            let num = envelope_gaussian_from_acf(|tau| s * s * (-k * tau).exp(), &times).unwrap();
            let exact = envelope_ou(s, k, &times).unwrap();
            for (a, b) in num.values().iter().zip(exact.values()) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn jump_envelope_matches_telegraph_closed_form() {
        let times = time_grid(10.0, 50).unwrap();
        for &(s, k) in &[(2.0, 10.0), (2.0, 2.0), (2.0, 0.1), (1.0, 2.0)] {
            let j = build_jump_model(&NoiseModel::Telegraph { sigma: s, kappa: k }, 16).unwrap();
            let c = envelope_jump(&j, &times).unwrap();
            let exact = envelope_telegraph(s, k, &times).unwrap();
            for (a, b) in c.values().iter().zip(exact.values()) {
                assert!((a - b).norm() < 1e-8, "({s},{k}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn jump_envelope_of_zero_realizations_is_one() {
        let j = JumpModel::single(0.0);
        let c = envelope_jump(&j, &time_grid(3.0, 7).unwrap()).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.0).norm() < 1e-15));
    }

    #[test]
    fn tlf_closed_form_matches_jump_solver() {
        let model = NoiseModel::TlfEnsemble { m: 4, sigma: 2.0, kappa: 0.2 };
        let j = build_jump_model(&model, 100).unwrap();
        let times = time_grid(6.0, 40).unwrap();
        let a = envelope_jump(&j, &times).unwrap();
        let b = envelope(&model, &times).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn coherence_decay_examples() {
        let p = SystemParams::canonical();
        let env = EnvelopeCurve::new(vec![0.0, 2.0], vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        let d = coherence_decay(&p, &env).unwrap();
        assert_eq!(d.coherence[0], Complex64::new(0.5, 0.0));
        assert_eq!(d.population[0], 0.0);
        assert!((d.coherence[1].re - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mc_envelope_zero_noise_is_one() {
        let times = time_grid(2.0, 11).unwrap();
        let c = envelope_mc(&NoiseModel::noiseless(), &times, 100, 3).unwrap();
        assert!(c.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }
}
