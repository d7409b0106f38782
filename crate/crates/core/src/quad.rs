//! Adaptive quadrature: Gauss–Kronrod (10/21) for complex integrands and
//! adaptive Simpson for real ones.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525634185,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One 21-point Kronrod panel: (integral, |Kronrod − Gauss|).
pub fn gk21<F>(f: &F, a: f64, b: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).norm())
}

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-12,
            max_panels: 20_000,
        }
    }
}

/// Globally adaptive integration of a complex integrand over [a, b], starting
/// from `initial` equal panels and bisecting the worst one.
///
/// Returns the integral and the summed error estimate.
pub fn integrate<F>(f: &F, a: f64, b: f64, initial: usize, opts: QuadOptions) -> Result<(Complex64, f64)>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let initial = initial.max(1);
    let w = (b - a) / initial as f64;
    let mut panels: Vec<(f64, f64, Complex64, f64)> = (0..initial)
        .map(|k| {
            let lo = a + w * k as f64;
            let hi = if k + 1 == initial { b } else { lo + w };
            let (v, e) = gk21(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let mut total: Complex64 = panels.iter().map(|p| p.2).sum();
    let mut err: f64 = panels.iter().map(|p| p.3).sum();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= tol {
            let total: Complex64 = panels.iter().map(|p| p.2).sum();
            return Ok((total, err));
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature {
                tolerance: tol,
                estimate: err,
            });
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, v0, e0) = panels[k];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature {
                tolerance: tol,
                estimate: err,
            });
        }
        let (v1, e1) = gk21(f, lo, mid);
        let (v2, e2) = gk21(f, mid, hi);
        panels[k] = (lo, mid, v1, e1);
        panels.push((mid, hi, v2, e2));
        total += v1 + v2 - v0;
        err = (err + e1 + e2 - e0).max(0.0);
    }
}

/// Laplace transform ∫₀^∞ f(t) e^{−st} dt of a function bounded by 1.
///
/// The range is cut at T with e^{−Re(s)T}/Re(s) below `1e-12`; panels are
/// no wider than half an oscillation period of e^{−i Im(s) t}.
pub fn laplace<F>(f: &F, s: Complex64, opts: QuadOptions) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if !(s.re > 0.0) || !s.im.is_finite() {
        return Err(Error::param("s", format!("Laplace argument needs Re s > 0, got {s}")));
    }
    let cut = 1e-12;
    let t_end = ((1.0f64 / cut).ln() + (1.0 / s.re).ln().max(0.0)) / s.re;
    let width = (1.0f64).min(std::f64::consts::PI / s.im.abs().max(1e-300)).min(t_end);
    let initial = ((t_end / width).ceil() as usize).max(1);
    let g = |t: f64| f(t) * (-s * t).exp();
    let (v, _) = integrate(&g, 0.0, t_end, initial, opts)?;
    Ok(v)
}

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
pub fn simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = 200_000usize;
    let v = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50, &mut budget);
    if budget == 0 {
        return Err(Error::Quadrature {
            tolerance: tol,
            estimate: f64::NAN,
        });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if *budget == 0 {
        return left + right;
    }
    *budget -= 1;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_polynomials() {
        for deg in 0..=30 {
            let f = |x: f64| Complex64::new(x.powi(deg), 0.0);
            let (v, _) = gk21(&f, 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v.re - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn laplace_of_exponential() {
        let s = Complex64::new(0.5, -3.0);
        let f = |t: f64| Complex64::new((-0.3 * t).exp(), 0.0);
        let v = laplace(&f, s, QuadOptions::default()).unwrap();
        let exact = 1.0 / (s + 0.3);
        assert!((v - exact).norm() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn laplace_of_one_far_detuned() {
        let s = Complex64::new(0.5, 400.0);
        let f = |_t: f64| Complex64::new(1.0, 0.0);
        let v = laplace(&f, s, QuadOptions::default()).unwrap();
        assert!((v - 1.0 / s).norm() < 1e-11);
    }

    #[test]
    fn laplace_rejects_nonpositive_real_part() {
        let f = |_t: f64| Complex64::new(1.0, 0.0);
        assert!(laplace(&f, Complex64::new(0.0, 1.0), QuadOptions::default()).is_err());
    }

    #[test]
    fn simpson_gaussian() {
        let v = simpson(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }
}
