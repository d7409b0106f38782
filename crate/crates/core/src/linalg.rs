//! Small linear-algebra kernels for the jump-model solvers: dense complex
//! LU, matrix exponential, sparse real CSR, BiCGSTAB and an embedded
//! Runge–Kutta integrator.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Dense square complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C) {
        self.data[i * self.n + j] = v;
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn add_scaled(&mut self, other: &CMatrix, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: CMatrix) -> Result<Self> {
        let n = a.n;
        let scale = a.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a.get(i, k).norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a.get(k, k);
            for i in k + 1..n {
                let l = a.get(i, k) / pivot;
                if l == ZERO {
                    continue;
                }
                a.set(i, k, l);
                let (upper, lower) = a.data.split_at_mut(i * n);
                let krow = &upper[k * n + k + 1..k * n + n];
                let irow = &mut lower[k + 1..n];
                for (x, u) in irow.iter_mut().zip(krow) {
                    *x -= l * u;
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.lu.n;
        let mut x: Vec<C> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu.data[i * n..i * n + i];
            let s: C = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu.data[i * n + i + 1..(i + 1) * n];
            let s: C = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu.get(i, i);
        }
        x
    }
}

pub fn lu_solve(a: CMatrix, b: &[C]) -> Result<Vec<C>> {
    Ok(Lu::factor(a)?.solve(b))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.n;
    let norm = a.norm1();
    let mut s = 0u32;
    if norm > 0.25 {
        s = (norm / 0.25).log2().ceil() as u32;
    }
    let mut x = a.clone();
    x.scale(0.5f64.powi(s as i32));
    // ‖X‖ ≤ 1/4: 16 terms leave a remainder below 1e−22.
    let mut result = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=16 {
        term = term.matmul(&x);
        term.scale(1.0 / k as f64);
        result.add_scaled(&term, 1.0);
    }
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

/// Sparse real matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over stored entries as (row, col, value).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.vals[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.entries() {
            d[i][j] = v;
        }
        d
    }

    pub fn matvec_real(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// y = A x for complex x.
    pub fn matvec_into(&self, x: &[C], y: &mut [C]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.col_idx[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// Column sums.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (_, j, v) in self.entries() {
            s[j] += v;
        }
        s
    }
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for A x = b, where `apply` computes A x.
pub fn bicgstab<F>(apply: F, diag: &[C], b: &[C], tol: f64, max_iter: usize) -> Result<Vec<C>>
where
    F: Fn(&[C], &mut [C]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let precond = |v: &[C], out: &mut [C]| {
        for ((o, x), d) in out.iter_mut().zip(v).zip(diag) {
            *o = x / d;
        }
    };
    let mut x = vec![ZERO; n];
    precond(b, &mut x);
    let mut r = vec![ZERO; n];
    apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r0 = r.clone();
    let mut rho = ONE;
    let mut alpha = ONE;
    let mut omega = ONE;
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    let mut y = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    let mut t = vec![ZERO; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        apply(&y, &mut v);
        alpha = rho_new / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(x);
        }
        precond(&s, &mut z);
        apply(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        rho = rho_new;
    }
    Err(Error::Singular(format!(
        "BiCGSTAB did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}

/// Dormand–Prince 5(4) for dx/dt = f(x), reporting the state at each
/// requested time through `observe(k, x)`. Times must be increasing.
pub fn rk45<F, O>(f: F, x0: Vec<C>, times: &[f64], rtol: f64, atol: f64, mut observe: O) -> Result<()>
where
    F: Fn(&[C], &mut [C]),
    O: FnMut(usize, &[C]),
{
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let n = x0.len();
    let mut x = x0;
    let mut t: f64 = 0.0;
    let mut k: Vec<Vec<C>> = vec![vec![ZERO; n]; 7];
    let mut tmp = vec![ZERO; n];
    let mut h: f64 = 1e-3;
    let mut steps = 0usize;
    for (idx, &target) in times.iter().enumerate() {
        while t < target {
            if steps > 5_000_000 {
                return Err(Error::Stiffness(
                    "step budget exhausted; reduce the time span or the rates".into(),
                ));
            }
            steps += 1;
            let hs = h.min(target - t);
            f(&x, &mut k[0]);
            for stage in 1..7 {
                for i in 0..n {
                    let mut acc = x[i];
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        let a = A[stage - 1][j];
                        if a != 0.0 {
                            acc += kj[i] * (a * hs);
                        }
                    }
                    tmp[i] = acc;
                }
                f(&tmp, &mut k[stage]);
            }
            // tmp holds the 5th-order solution (stage 7 input, FSAL).
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * E[j];
                    }
                }
                let sc = atol + rtol * x[i].norm().max(tmp[i].norm());
                err = err.max((e * hs).norm() / sc);
            }
            if err <= 1.0 || hs < 1e-14 {
                t += hs;
                x.copy_from_slice(&tmp);
            }
            if !err.is_finite() {
                return Err(Error::Stiffness("non-finite error estimate; try a smaller step".into()));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hs * factor).max(1e-14);
        }
        observe(idx, &x);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn lu_solves_small_system() {
        let a = CMatrix::from_fn(3, |i, j| {
            [[c(2.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
             [c(1.0, 0.0), c(0.0, 0.0), c(3.0, -1.0)],
             [c(0.0, 2.0), c(1.0, 1.0), c(1.0, 0.0)]][i][j]
        });
        let x_true = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.3, -0.7)];
        let b = a.matvec(&x_true);
        let x = lu_solve(a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn lu_detects_singular() {
        let a = CMatrix::from_fn(2, |i, _| c(i as f64 + 1.0, 0.0));
        assert!(lu_solve(a, &[ONE, ONE]).is_err());
    }

    #[test]
    fn expm_of_rotation_generator() {
        let th = 2.5;
        let a = CMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => c(-th, 0.0),
            (1, 0) => c(th, 0.0),
            _ => ZERO,
        });
        let e = expm(&a);
        assert!((e.get(0, 0) - th.cos()).norm() < 1e-14);
        assert!((e.get(1, 0) - th.sin()).norm() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal_large_norm() {
        let a = CMatrix::from_fn(2, |i, j| if i == j { c(-30.0 * (i as f64 + 1.0), 5.0) } else { ZERO });
        let e = expm(&a);
        let expect = c(-30.0, 5.0).exp();
        assert!((e.get(0, 0) - expect).norm() < 1e-14 + 1e-12 * expect.norm());
    }

    #[test]
    fn sparse_sums_duplicates_and_multiplies() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (0, 0, 0.5), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.matvec_real(&[1.0, 1.0]), vec![3.5, -1.0]);
        assert_eq!(m.column_sums(), vec![0.5, 2.0]);
    }

    #[test]
    fn bicgstab_matches_lu() {
        let n = 40;
        let a = CMatrix::from_fn(n, |i, j| {
            if i == j {
                c(3.0 + i as f64 * 0.1, -(i as f64) * 0.2)
            } else if i.abs_diff(j) == 1 {
                c(-1.0, 0.0)
            } else {
                ZERO
            }
        });
        let b: Vec<C> = (0..n).map(|i| c(1.0, i as f64 * 0.01)).collect();
        let diag: Vec<C> = (0..n).map(|i| a.get(i, i)).collect();
        let x = bicgstab(|v, out| out.copy_from_slice(&a.matvec(v)), &diag, &b, 1e-13, 500).unwrap();
        let y = lu_solve(a.clone(), &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-11);
        }
    }

    #[test]
    fn rk45_oscillator() {
        let w = 3.0;
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let mut out = vec![ZERO; times.len()];
        rk45(
            |x, dx| dx[0] = c(-0.2, -w) * x[0],
            vec![ONE],
            &times,
            1e-11,
            1e-13,
            |k, x| out[k] = x[0],
        )
        .unwrap();
        for (t, v) in times.iter().zip(&out) {
            assert!((v - (c(-0.2, -w) * *t).exp()).norm() < 1e-9);
        }
    }
}
