//! Preconditioned conjugate gradients for real and complex Hermitian systems,
//! and BiCGSTAB for real nonsymmetric ones.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalars the solver works with.
pub trait Scalar: Copy + Send + Sync + std::fmt::Debug + 'static {
    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn from_re(x: f64) -> Self;
    fn flatten(v: &[Self]) -> Vec<f64>;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn flatten(v: &[Self]) -> Vec<f64> {
        v.to_vec()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn flatten(v: &[Self]) -> Vec<f64> {
        v.iter().flat_map(|z| [z.re, z.im]).collect()
    }
}

/// `⟨x, y⟩ = Σ conj(x_i) y_i`.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (a, b)| acc.add(a.conj().mul(*b)))
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
}

/// Solves `A x = b` for Hermitian positive definite `A` given as a matrix-free
/// product, with Jacobi preconditioner `inv_diag`. `x` holds the initial guess.
pub fn pcg<T: Scalar, A>(apply: A, inv_diag: &[f64], b: &[T], x: &mut [T], rtol: f64, max_iter: usize) -> Result<CgStats>
where
    A: Fn(&[T], &mut [T]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgStats { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![T::zero(); n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi.sub(*ri);
    }
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(v, d)| v.scale(*d)).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z).re();
    let mut res = norm(&r) / b_norm;
    for it in 0..max_iter {
        if res <= rtol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i].add(p[i].scale(alpha));
            r[i] = r[i].sub(ap[i].scale(alpha));
        }
        for i in 0..n {
            z[i] = r[i].scale(inv_diag[i]);
        }
        let rz_new = dot(&r, &z).re();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i].add(p[i].scale(beta));
        }
        res = norm(&r) / b_norm;
    }
    if res <= rtol {
        return Ok(CgStats { iterations: max_iter, residual: res });
    }
    Err(Error::NoConvergence { what: "conjugate gradient", iterations: max_iter, residual: res, best: T::flatten(x) })
}

/// Solves `A x = b` for a real nonsymmetric `A` by Jacobi-preconditioned
/// BiCGSTAB. `x` holds the initial guess.
pub fn bicgstab<A>(apply: A, inv_diag: &[f64], b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> Result<CgStats>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm(&r) / b_norm;
    for it in 0..max_iter {
        if res <= rtol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
            z[i] = s[i] * inv_diag[i];
        }
        apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / b_norm;
    }
    if res <= rtol {
        return Ok(CgStats { iterations: max_iter, residual: res });
    }
    Err(Error::NoConvergence { what: "BiCGSTAB", iterations: max_iter, residual: res, best: x.to_vec() })
}
