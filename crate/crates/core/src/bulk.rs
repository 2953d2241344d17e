//! Reduced constant-field Ginzburg-Landau problem on squares `Q_R`.
//!
//! `G_{b,Q_R}(u) = ∫ b|(∇ − iA₀)u|² − |u|² + ½|u|⁴` with `A₀ = ½(−x₂, x₁)`,
//! discretized on the vertex grid of `Q_R = (−R/2, R/2)²` with link phases for
//! the kinetic term and trapezoid weights for the potential. Dirichlet problems
//! pin the boundary nodes to zero. Natural problems leave every node free and
//! give boundary edges half weight, so no boundary term appears.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustdct::{Dct1, DctPlanner, Dst1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::canonical_potential;
use crate::grid::Grid;
use crate::spectral::LinkField;

/// Default side lengths for [`estimate_g`].
pub const DEFAULT_R_LIST: [f64; 5] = [4.0, 6.0, 8.0, 12.0, 16.0];
/// Default exit tolerance on `‖∇G‖_{L²} / R`.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Tolerance at which the seeds of [`minimize_reduced`] are compared.
pub const SCREEN_TOL: f64 = 1e-3;
const MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Natural,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Natural => "natural",
        })
    }
}

/// Bottom of the spectrum of the lattice magnetic Laplacian on `hℤ²` with
/// unit field, `1 − h²/8 + O(h⁴)`.
///
/// In Landau gauge a Bloch wave `e^{ikn} φ_m` reduces the operator to the
/// Harper chain `(4 − 2cos(h²m − k)) φ_m − φ_{m+1} − φ_{m−1}` (in units of
/// `h⁻²`). Its ground state is a Gaussian of width `h⁻¹` sites, so a segment of
/// twelve magnetic lengths on either side of a potential well is exact to
/// rounding for `h ≲ ½`. The lowest eigenvalue is found by Sturm bisection and minimized
/// over the well offset.
pub fn landau_floor(h: f64) -> f64 {
    let flux = h * h;
    let half = ((12.0 / h).ceil() as i64).min((PI / flux).floor() as i64).max(1);
    let lowest = |offset: f64| {
        let diag: Vec<f64> = (-half..=half).map(|m| 2.0 + 4.0 * (0.5 * flux * (m as f64 - offset)).sin().powi(2)).collect();
        // Number of eigenvalues below x.
        let count = |x: f64| {
            let mut q = 1.0;
            let mut below = 0;
            for (i, d) in diag.iter().enumerate() {
                q = if i == 0 { d - x } else { d - x - 1.0 / q };
                if q == 0.0 {
                    q = f64::EPSILON;
                }
                if q < 0.0 {
                    below += 1;
                }
            }
            below
        };
        let (mut lo, mut hi) = (0.0, 2.0 * flux);
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if count(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (0..8).map(|k| lowest(k as f64 / 8.0)).fold(f64::INFINITY, f64::min) / flux
}

/// Default spacing `min(1/16, R/256)`.
pub fn default_h(r: f64) -> f64 {
    (1.0 / 16.0f64).min(r / 256.0)
}

#[derive(Debug, Clone)]
pub struct ReducedGLProblem {
    pub b: f64,
    pub r: f64,
    pub boundary: Boundary,
    /// Vertex grid on the closed square; the spacing divides `R` exactly.
    pub grid: Grid,
    /// Coefficient of the discrete kinetic form, `b / landau_floor(h)`.
    kinetic: f64,
    links: LinkField,
    /// Trapezoid weight of each node (1 inside, ½ on edges, ¼ at corners).
    weight: Vec<f64>,
    free: Vec<bool>,
}

impl ReducedGLProblem {
    /// The spacing is rounded down so that `R/h` is an integer.
    pub fn new(b: f64, r: f64, boundary: Boundary, h: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("must be nonnegative, got {b}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param("R", format!("must be positive, got {r}")));
        }
        if !(h > 0.0 && h < r) {
            return Err(Error::param("h", format!("must lie in (0, R), got {h}")));
        }
        let cells = (r / h).ceil() as usize;
        let n = cells + 1;
        let grid = Grid::new(n, n, -0.5 * r, -0.5 * r, r / cells as f64);
        let links = LinkField::new(grid, 1.0, &canonical_potential);
        let mut weight = vec![1.0; grid.len()];
        let mut free = vec![true; grid.len()];
        for j in 0..n {
            for i in 0..n {
                let k = grid.index(i, j);
                let edge_i = i == 0 || i == n - 1;
                let edge_j = j == 0 || j == n - 1;
                if edge_i {
                    weight[k] *= 0.5;
                }
                if edge_j {
                    weight[k] *= 0.5;
                }
                if boundary == Boundary::Dirichlet && (edge_i || edge_j) {
                    free[k] = false;
                }
            }
        }
        let kinetic = b / landau_floor(grid.h);
        Ok(ReducedGLProblem { b, r, boundary, grid, kinetic, links, weight, free })
    }

    pub fn with_default_h(b: f64, r: f64, boundary: Boundary) -> Result<Self> {
        ReducedGLProblem::new(b, r, boundary, default_h(r))
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn is_free(&self, k: usize) -> bool {
        self.free[k]
    }

    /// Weight of the edge from node `p` along `axis`: ½ on the boundary of `Q_R`.
    fn edge_weight(&self, i: usize, j: usize, axis: usize) -> f64 {
        let n = self.grid.nx;
        let on_boundary = if axis == 0 { j == 0 || j == n - 1 } else { i == 0 || i == n - 1 };
        if on_boundary {
            0.5
        } else {
            1.0
        }
    }

    /// Energy and its gradient `2 ∂G/∂ū` (zero at pinned nodes).
    pub fn energy_and_gradient(&self, u: &[Complex64], grad: Option<&mut [Complex64]>) -> f64 {
        let g = &self.grid;
        let h2 = g.h * g.h;
        let n = g.nx;
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        let mut grad = grad;
        if let Some(gr) = grad.as_deref_mut() {
            gr.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        for j in 0..n {
            for i in 0..n {
                let p = g.index(i, j);
                let mod2 = u[p].norm_sqr();
                potential += self.weight[p] * h2 * (-mod2 + 0.5 * mod2 * mod2);
                if let Some(gr) = grad.as_deref_mut() {
                    gr[p] += u[p] * (2.0 * self.weight[p] * h2 * (mod2 - 1.0));
                }
                for axis in 0..2 {
                    let (q, link) = match axis {
                        0 if i + 1 < n => (p + 1, self.links.east[p]),
                        1 if j + 1 < n => (p + n, self.links.north[p]),
                        _ => continue,
                    };
                    let w = self.kinetic * self.edge_weight(i, j, axis);
                    let d = link * u[q] - u[p];
                    kinetic += w * d.norm_sqr();
                    if let Some(gr) = grad.as_deref_mut() {
                        gr[p] -= d * (2.0 * w);
                        gr[q] += link.conj() * d * (2.0 * w);
                    }
                }
            }
        }
        if let Some(gr) = grad {
            for (v, &f) in gr.iter_mut().zip(&self.free) {
                if !f {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
        kinetic + potential
    }

    /// Step `t` minimizing `G(u + t p)`, from the exact quartic coefficients.
    pub fn line_minimum(&self, u: &[Complex64], p: &[Complex64]) -> f64 {
        let g = &self.grid;
        let h2 = g.h * g.h;
        let n = g.nx;
        let mut c = [0.0; 5];
        for j in 0..n {
            for i in 0..n {
                let k = g.index(i, j);
                let m = self.weight[k] * h2;
                let a = u[k].norm_sqr();
                let cr = u[k].re * p[k].re + u[k].im * p[k].im;
                let d = p[k].norm_sqr();
                // −s + ½s² with s = a + 2ct + dt².
                c[1] += m * (-2.0 * cr + 2.0 * a * cr);
                c[2] += m * (-d + 2.0 * cr * cr + a * d);
                c[3] += m * 2.0 * cr * d;
                c[4] += m * 0.5 * d * d;
                for axis in 0..2 {
                    let (q, link) = match axis {
                        0 if i + 1 < n => (k + 1, self.links.east[k]),
                        1 if j + 1 < n => (k + n, self.links.north[k]),
                        _ => continue,
                    };
                    let w = self.kinetic * self.edge_weight(i, j, axis);
                    let du = link * u[q] - u[k];
                    let dp = link * p[q] - p[k];
                    c[1] += 2.0 * w * (du.re * dp.re + du.im * dp.im);
                    c[2] += w * dp.norm_sqr();
                }
            }
        }
        quartic_argmin(c)
    }

    /// L² norm of the Riesz representative of the gradient, `(Σ |g_p|²/(w_p h²))^{1/2}`.
    pub fn gradient_norm(&self, grad: &[Complex64]) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        grad.iter().zip(&self.weight).map(|(g, w)| g.norm_sqr() / (w * h2)).sum::<f64>().sqrt()
    }

    /// Zeroes the pinned nodes.
    pub fn project(&self, u: &mut [Complex64]) {
        for (v, &f) in u.iter_mut().zip(&self.free) {
            if !f {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// The three deterministic starting states: constant one, a centered
    /// Gaussian blob and a square vortex lattice of density `1/2π`.
    pub fn seeds(&self) -> Vec<Vec<Complex64>> {
        let g = &self.grid;
        let r = self.r;
        let constant = vec![Complex64::new(1.0, 0.0); g.len()];
        let blob = g.points().map(|p| Complex64::new((-(p[0] * p[0] + p[1] * p[1]) / (0.125 * r * r)).exp(), 0.0)).collect();
        let spacing = (2.0 * std::f64::consts::PI).sqrt();
        let m = (0.5 * r / spacing).ceil() as i64 + 1;
        let mut cores = Vec::new();
        for a in -m..=m {
            for c in -m..=m {
                cores.push([(a as f64 + 0.5) * spacing, (c as f64 + 0.5) * spacing]);
            }
        }
        let vortex = g
            .points()
            .map(|p| {
                let mut z = Complex64::new(1.0, 0.0);
                for c in &cores {
                    let d = Complex64::new(p[0] - c[0], p[1] - c[1]);
                    let rho = d.norm();
                    if rho > 0.0 {
                        z *= d / rho * rho.tanh();
                    } else {
                        z = Complex64::new(0.0, 0.0);
                    }
                }
                z
            })
            .collect();
        let mut out: Vec<Vec<Complex64>> = vec![constant, blob, vortex];
        for s in &mut out {
            self.project(s);
        }
        out
    }
}

/// Discrete `G_{b,Q_R}(u)`.
pub fn reduced_energy(u: &[Complex64], problem: &ReducedGLProblem) -> f64 {
    problem.energy_and_gradient(u, None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Minimizer {
    pub energy: f64,
    #[serde(skip)]
    pub state: Vec<Complex64>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// `max |u|`.
    pub sup: f64,
    /// `(Σ w_p h² |u_p|²)^{1/2}`.
    pub norm_l2: f64,
}

/// Inverse of `2(b K₀ + h² M)`, with `K₀` the field-free stiffness of the
/// problem, diagonalized by sine (Dirichlet) or cosine (natural) transforms.
struct Preconditioner {
    /// Side length of the transformed block.
    m: usize,
    /// Offset of the block in the node grid (1 for Dirichlet, 0 for natural).
    offset: usize,
    n: usize,
    /// `1 / (2(b(λ_k + λ_l) + h²) c²)` in transform space.
    factor: Vec<f64>,
    /// `1 / M` on the block.
    inv_mass: Vec<f64>,
    dct: Option<Arc<dyn Dct1<f64>>>,
    dst: Option<Arc<dyn Dst1<f64>>>,
}

impl Preconditioner {
    fn new(problem: &ReducedGLProblem) -> Self {
        let n = problem.grid.nx;
        let h2 = problem.grid.h * problem.grid.h;
        let mut planner = DctPlanner::new();
        let (m, offset, lambda, norm, dct, dst): (usize, usize, Vec<f64>, f64, _, _) = match problem.boundary {
            Boundary::Dirichlet => {
                let m = n - 2;
                let lambda = (1..=m).map(|k| 2.0 - 2.0 * (PI * k as f64 / (n - 1) as f64).cos()).collect();
                (m, 1, lambda, 0.5 * (n - 1) as f64, None, Some(planner.plan_dst1(m)))
            }
            Boundary::Natural => {
                let lambda = (0..n).map(|k| 2.0 - 2.0 * (PI * k as f64 / (n - 1) as f64).cos()).collect();
                (n, 0, lambda, 0.5 * (n - 1) as f64, Some(planner.plan_dct1(n)), None)
            }
        };
        let mut factor = vec![0.0; m * m];
        let mut inv_mass = vec![0.0; m * m];
        for l in 0..m {
            for k in 0..m {
                factor[l * m + k] = 1.0 / (2.0 * (problem.kinetic * (lambda[k] + lambda[l]) + h2) * norm * norm);
                inv_mass[l * m + k] = 1.0 / problem.weight[problem.grid.index(k + offset, l + offset)];
            }
        }
        Preconditioner { m, offset, n, factor, inv_mass, dct, dst }
    }

    fn rows(&self, data: &mut [f64], scratch: &mut [f64]) {
        for row in data.chunks_mut(self.m) {
            match (&self.dct, &self.dst) {
                (Some(t), _) => t.process_dct1_with_scratch(row, scratch),
                (_, Some(t)) => t.process_dst1_with_scratch(row, scratch),
                _ => unreachable!("one transform is planned"),
            }
        }
    }

    fn scratch_len(&self) -> usize {
        match (&self.dct, &self.dst) {
            (Some(t), _) => t.get_scratch_len(),
            (_, Some(t)) => t.get_scratch_len(),
            _ => 0,
        }
    }

    /// `T (factor ⊙ T data)` for the separable 2-D transform `T`, using
    /// blocked transposes between the row passes.
    fn filter(&self, data: &mut [f64], tmp: &mut [f64], scratch: &mut [f64]) {
        let m = self.m;
        self.rows(data, scratch);
        transpose(data, tmp, m);
        self.rows(tmp, scratch);
        // tmp holds the spectrum transposed: entry (k, l) sits at k * m + l.
        for k in 0..m {
            for l in 0..m {
                tmp[k * m + l] *= self.factor[l * m + k];
            }
        }
        self.rows(tmp, scratch);
        transpose(tmp, data, m);
        self.rows(data, scratch);
    }

    fn apply(&self, g: &[Complex64], z: &mut [Complex64]) {
        let (m, o, n) = (self.m, self.offset, self.n);
        let mut re = vec![0.0; m * m];
        let mut im = vec![0.0; m * m];
        for l in 0..m {
            for k in 0..m {
                let v = g[(l + o) * n + k + o] * self.inv_mass[l * m + k];
                re[l * m + k] = v.re;
                im[l * m + k] = v.im;
            }
        }
        let mut tmp = vec![0.0; m * m];
        let mut scratch = vec![0.0; self.scratch_len()];
        for part in [&mut re, &mut im] {
            self.filter(part, &mut tmp, &mut scratch);
        }
        z.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for l in 0..m {
            for k in 0..m {
                z[(l + o) * n + k + o] = Complex64::new(re[l * m + k], im[l * m + k]);
            }
        }
    }
}

/// Preconditioned nonlinear conjugate gradients (Polak-Ribière+) from one
/// starting state. The preconditioner inverts the field-free part of the
/// Hessian by fast transforms. Along a search direction the energy is a
/// quartic polynomial in the step, which is minimized exactly.
pub fn descend(problem: &ReducedGLProblem, start: Vec<Complex64>, tol: f64) -> Result<Minimizer> {
    let n = start.len();
    let target = tol * problem.r;
    let prec = Preconditioner::new(problem);
    let mut u = start;
    problem.project(&mut u);
    let mut grad = vec![Complex64::new(0.0, 0.0); n];
    let mut energy = problem.energy_and_gradient(&u, Some(&mut grad));
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    prec.apply(&grad, &mut z);
    let mut dir: Vec<Complex64> = z.iter().map(|v| -v).collect();
    let mut gz = real_dot(&grad, &z);
    let mut grad_norm = problem.gradient_norm(&grad);
    for it in 0..MAX_ITER {
        if grad_norm <= target {
            return Ok(finish(problem, u, energy, grad_norm, it));
        }
        if real_dot(&grad, &dir) >= 0.0 {
            dir.iter_mut().zip(&z).for_each(|(d, v)| *d = -v);
        }
        let t = problem.line_minimum(&u, &dir);
        if !(t > 0.0) {
            return Err(Error::NoConvergence {
                what: "reduced GL descent (line search)",
                iterations: it,
                residual: grad_norm,
                best: crate::linalg::Scalar::flatten(&u),
            });
        }
        for (ui, di) in u.iter_mut().zip(&dir) {
            *ui += di * t;
        }
        let old_grad = grad.clone();
        energy = problem.energy_and_gradient(&u, Some(&mut grad));
        prec.apply(&grad, &mut z);
        let gz_new = real_dot(&grad, &z);
        let beta = ((gz_new - real_dot(&old_grad, &z)) / gz).max(0.0);
        gz = gz_new;
        grad_norm = problem.gradient_norm(&grad);
        for (d, v) in dir.iter_mut().zip(&z) {
            *d = d.scale(beta) - v;
        }
    }
    Err(Error::NoConvergence {
        what: "reduced GL descent",
        iterations: MAX_ITER,
        residual: grad_norm,
        best: crate::linalg::Scalar::flatten(&u),
    })
}

fn transpose(src: &[f64], dst: &mut [f64], m: usize) {
    const BLOCK: usize = 32;
    for i0 in (0..m).step_by(BLOCK) {
        for j0 in (0..m).step_by(BLOCK) {
            for i in i0..(i0 + BLOCK).min(m) {
                for j in j0..(j0 + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Minimizer over `t > 0` of the quartic `Σ c_k t^k` among the critical
/// points; NaN if there is none.
pub(crate) fn quartic_argmin(c: [f64; 5]) -> f64 {
    let value = |t: f64| (((c[4] * t + c[3]) * t + c[2]) * t + c[1]) * t;
    let roots = cubic_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
    roots.into_iter().filter(|&t| t > 0.0 && t.is_finite()).fold(f64::NAN, |best, t| if best.is_nan() || value(t) < value(best) { t } else { best })
}

/// Real roots of `a t³ + b t² + c t + d`, polished by Newton steps.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    let mut roots = if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            if c == 0.0 {
                vec![]
            } else {
                vec![-d / c]
            }
        } else {
            let disc = c * c - 4.0 * b * d;
            if disc < 0.0 {
                vec![]
            } else {
                let q = -0.5 * (c + c.signum() * disc.sqrt());
                let mut v = vec![];
                if q != 0.0 {
                    v.push(d / q);
                    v.push(q / b);
                } else {
                    v.push(0.0);
                }
                v
            }
        }
    } else {
        let (b, c, d) = (b / a, c / a, d / a);
        let q = (b * b - 3.0 * c) / 9.0;
        let r = (2.0 * b * b * b - 9.0 * b * c + 27.0 * d) / 54.0;
        if r * r < q * q * q {
            let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
            let m = -2.0 * q.sqrt();
            let tau = 2.0 * std::f64::consts::PI;
            vec![
                m * (theta / 3.0).cos() - b / 3.0,
                m * ((theta + tau) / 3.0).cos() - b / 3.0,
                m * ((theta - tau) / 3.0).cos() - b / 3.0,
            ]
        } else {
            let s = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
            let t = if s == 0.0 { 0.0 } else { q / s };
            vec![s + t - b / 3.0]
        }
    };
    for t in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((a * *t + b) * *t + c) * *t + d;
            let df = (3.0 * a * *t + 2.0 * b) * *t + c;
            if df != 0.0 {
                *t -= f / df;
            }
        }
    }
    roots
}

fn finish(problem: &ReducedGLProblem, u: Vec<Complex64>, energy: f64, grad_norm: f64, iterations: usize) -> Minimizer {
    let h2 = problem.grid.h * problem.grid.h;
    let sup = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let norm_l2 = u.iter().zip(&problem.weight).map(|(z, w)| w * h2 * z.norm_sqr()).sum::<f64>().sqrt();
    Minimizer { energy, state: u, grad_norm, iterations, sup, norm_l2 }
}

/// `m₀(b, R)` (Dirichlet) or `m(b, R)` (natural).
///
/// Every seed is descended to the screening tolerance and only the lowest is
/// refined to `tol`. A Dirichlet problem with `b ≥ 1` is not descended at all:
/// the normalized kinetic form is at least `b‖u‖²` on grid functions vanishing
/// on the boundary, so `G(u) ≥ ½‖u‖⁴` and zero is the unique minimizer.
pub fn minimize_reduced(problem: &ReducedGLProblem, tol: f64) -> Result<Minimizer> {
    if problem.boundary == Boundary::Dirichlet && problem.b >= 1.0 {
        return Ok(finish(problem, vec![Complex64::new(0.0, 0.0); problem.grid.len()], 0.0, 0.0, 0));
    }
    let screen = tol.max(SCREEN_TOL);
    let mut best: Option<Minimizer> = None;
    let mut last_err = None;
    for seed in problem.seeds() {
        match descend(problem, seed, screen) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.energy < b.energy) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let m = match (best, last_err) {
        (Some(m), _) if screen > tol => {
            let done = m.iterations;
            let mut polished = descend(problem, m.state, tol)?;
            polished.iterations += done;
            polished
        }
        (Some(m), _) => m,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one seed"),
    };
    // The zero state is admissible.
    if m.energy > 0.0 {
        return Ok(finish(problem, vec![Complex64::new(0.0, 0.0); problem.grid.len()], 0.0, 0.0, m.iterations));
    }
    Ok(m)
}

/// One `(b, R, boundary)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkRecord {
    pub b: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub boundary: Boundary,
    pub energy: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub sup: f64,
    pub norm_l2: f64,
}

/// `g_est` with the bracket `[m₀/R² − C_emp/R, m₀/R²]` at the largest `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub b: f64,
    pub g_est: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
}

impl GEstimate {
    pub fn width(&self) -> f64 {
        self.bracket_hi - self.bracket_lo
    }
}

/// Reduces the records of one `b` to an estimate. `C_emp` is the largest
/// `|Δ(m₀/R²)| / Δ(1/R)` over successive radii of the Dirichlet sequence.
pub fn summarize(b: f64, records: &[BulkRecord]) -> Result<GEstimate> {
    let mut dir: Vec<(f64, f64)> = Vec::new();
    let mut nat: Vec<(f64, f64)> = Vec::new();
    for rec in records.iter().filter(|r| r.b == b) {
        let v = (rec.r, rec.energy / (rec.r * rec.r));
        match rec.boundary {
            Boundary::Dirichlet => dir.push(v),
            Boundary::Natural => nat.push(v),
        }
    }
    dir.sort_by(|a, b| a.0.total_cmp(&b.0));
    nat.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (&(r_max, d_max), &(r_nat, n_max)) = match (dir.last(), nat.last()) {
        (Some(d), Some(n)) => (d, n),
        _ => return Err(Error::param("records", format!("need both boundary types for b = {b}"))),
    };
    if r_nat != r_max {
        return Err(Error::param("records", "boundary types cover different R".to_string()));
    }
    let c_emp = dir.windows(2).map(|w| (w[0].1 - w[1].1).abs() / (1.0 / w[0].0 - 1.0 / w[1].0)).fold(0.0, f64::max);
    Ok(GEstimate { b, g_est: 0.5 * (d_max + n_max), bracket_lo: d_max - c_emp / r_max, bracket_hi: d_max, c_emp })
}

/// Runs [`minimize_reduced`] for both boundary types at every `R` and
/// summarizes. Fails if the bracket at the largest `R` is wider than `width_tol`.
pub fn estimate_g(b: f64, r_list: &[f64], tol: f64, width_tol: f64) -> Result<(GEstimate, Vec<BulkRecord>)> {
    if r_list.is_empty() || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("R_list", "must be nonempty and increasing"));
    }
    let jobs: Vec<(f64, Boundary)> = r_list.iter().flat_map(|&r| [(r, Boundary::Dirichlet), (r, Boundary::Natural)]).collect();
    let records = run_jobs(&jobs.iter().map(|&(r, bc)| (b, r, bc)).collect::<Vec<_>>(), tol)?;
    let est = summarize(b, &records)?;
    if est.width() > width_tol {
        return Err(Error::BracketTooWide { width: est.width(), tol: width_tol });
    }
    Ok((est, records))
}

fn run_jobs(jobs: &[(f64, f64, Boundary)], tol: f64) -> Result<Vec<BulkRecord>> {
    jobs.par_iter()
        .map(|&(b, r, bc)| {
            let p = ReducedGLProblem::with_default_h(b, r, bc)?;
            let m = minimize_reduced(&p, tol)?;
            Ok(BulkRecord { b, r, boundary: bc, energy: m.energy, grad_norm: m.grad_norm, iters: m.iterations, sup: m.sup, norm_l2: m.norm_l2 })
        })
        .collect()
}

/// Records and per-`b` estimates for a grid of `b` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkTable {
    pub records: Vec<BulkRecord>,
    pub estimates: Vec<GEstimate>,
}

impl BulkTable {
    /// Computes every `(b, R, boundary)` job; results are ordered by job, not completion.
    pub fn compute(bs: &[f64], r_list: &[f64], tol: f64) -> Result<Self> {
        if r_list.is_empty() || r_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("R_list", "must be nonempty and increasing"));
        }
        let jobs: Vec<(f64, f64, Boundary)> = bs
            .iter()
            .flat_map(|&b| r_list.iter().flat_map(move |&r| [(b, r, Boundary::Dirichlet), (b, r, Boundary::Natural)]))
            .collect();
        let records = run_jobs(&jobs, tol)?;
        let estimates = bs.iter().map(|&b| summarize(b, &records)).collect::<Result<Vec<_>>>()?;
        Ok(BulkTable { records, estimates })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["b", "R", "boundary", "energy", "grad_norm", "iters"]).map_err(|e| Error::Format(e.to_string()))?;
        for r in &self.records {
            w.write_record([r.b.to_string(), r.r.to_string(), r.boundary.to_string(), r.energy.to_string(), r.grad_norm.to_string(), r.iters.to_string()])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// The JSON summary: an array of `{b, g_est, bracket_lo, bracket_hi, C_emp}`.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.estimates)?)?;
        Ok(())
    }
}

pub fn read_summary(path: &Path) -> Result<Vec<GEstimate>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Piecewise-linear `g` through tabulated nodes, with `g = −½` for `b ≤ 0`
/// and `g = 0` for `b ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GInterpolant {
    pub nodes: Vec<(f64, f64)>,
}

impl GInterpolant {
    pub fn eval(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return -0.5;
        }
        if b >= 1.0 {
            return 0.0;
        }
        let k = self.nodes.partition_point(|n| n.0 <= b);
        let (b0, g0) = self.nodes[k - 1];
        let (b1, g1) = self.nodes[k];
        g0 + (g1 - g0) * (b - b0) / (b1 - b0)
    }
}

/// Builds the interpolant from table estimates on `[0, 1]`. The anchors
/// `g(0) = −½` and `g(1) = 0` replace any tabulated value at those points.
/// Values are clamped to `[−½, 0]`, made nondecreasing by a running maximum,
/// and replaced by the least concave majorant of the resulting nodes; the
/// interpolant keeps every node that lies on that majorant.
pub fn g_interpolant(estimates: &[GEstimate]) -> Result<GInterpolant> {
    if estimates.windows(2).any(|w| !(w[1].b > w[0].b)) {
        return Err(Error::UnorderedTable("b values must be strictly increasing".into()));
    }
    let mut nodes = vec![(0.0, -0.5)];
    for e in estimates.iter().filter(|e| e.b > 0.0 && e.b < 1.0) {
        let prev = nodes.last().unwrap().1;
        nodes.push((e.b, e.g_est.clamp(-0.5, 0.0).max(prev)));
    }
    nodes.push((1.0, 0.0));
    Ok(GInterpolant { nodes: concave_majorant(&nodes) })
}

/// Upper hull of points sorted by abscissa.
fn concave_majorant(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b if it lies on or below the chord from a to p.
            if (b.1 - a.1) * (p.0 - a.0) <= (p.1 - a.1) * (b.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// `{0, 1/16, …, 1}`.
pub fn default_b_grid() -> Vec<f64> {
    (0..=16).map(|k| k as f64 / 16.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(p: &ReducedGLProblem) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); p.grid.len()]
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let p = ReducedGLProblem::new(0.7, 3.0, Boundary::Natural, 0.1).unwrap();
        assert_eq!(reduced_energy(&vec![Complex64::new(0.0, 0.0); p.grid.len()], &p), 0.0);
    }

    #[test]
    fn constant_state_at_zero_field() {
        let p = ReducedGLProblem::new(0.0, 5.0, Boundary::Natural, 0.25).unwrap();
        assert!((reduced_energy(&ones(&p), &p) + 12.5).abs() < 1e-12);
    }

    #[test]
    fn constant_state_unit_field() {
        // ∫_{Q₁} |A₀|² = ¼ ∫ (x₁² + x₂²) = 1/24.
        let expected = 1.0 / 24.0 - 0.5;
        let mut prev = f64::INFINITY;
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let p = ReducedGLProblem::new(1.0, 1.0, Boundary::Natural, h).unwrap();
            let err = (reduced_energy(&ones(&p), &p) - expected).abs();
            assert!(err < 0.5 * h * h, "h {h} err {err}");
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = ReducedGLProblem::new(0.6, 2.0, Boundary::Natural, 0.25).unwrap();
        let u: Vec<Complex64> = p.grid.points().map(|x| Complex64::new(0.3 + 0.2 * x[0], 0.1 * x[1] - 0.4 * x[0] * x[1])).collect();
        let mut g = vec![Complex64::new(0.0, 0.0); u.len()];
        p.energy_and_gradient(&u, Some(&mut g));
        let eps = 1e-6;
        for k in [0, 7, 40, u.len() - 1] {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut up = u.clone();
                let mut um = u.clone();
                up[k] += dir * eps;
                um[k] -= dir * eps;
                let fd = (reduced_energy(&up, &p) - reduced_energy(&um, &p)) / (2.0 * eps);
                let an = (g[k].conj() * dir).re;
                assert!((fd - an).abs() < 1e-7, "node {k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn global_phase_invariance() {
        let p = ReducedGLProblem::new(0.4, 3.0, Boundary::Natural, 0.125).unwrap();
        let u = p.seeds().remove(2);
        let rot = Complex64::from_polar(1.0, 0.83);
        let v: Vec<Complex64> = u.iter().map(|z| z * rot).collect();
        let (e1, e2) = (reduced_energy(&u, &p), reduced_energy(&v, &p));
        assert!((e1 - e2).abs() <= 1e-12 * e1.abs());
    }

    #[test]
    fn dirichlet_seeds_vanish_on_boundary() {
        let p = ReducedGLProblem::new(0.5, 2.0, Boundary::Dirichlet, 0.25).unwrap();
        for s in p.seeds() {
            for (k, z) in s.iter().enumerate() {
                if !p.is_free(k) {
                    assert_eq!(*z, Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn zero_field_natural_minimum_is_constant() {
        let p = ReducedGLProblem::new(0.0, 4.0, Boundary::Natural, 0.25).unwrap();
        let m = minimize_reduced(&p, 1e-9).unwrap();
        assert!((m.energy + 8.0).abs() < 1e-10);
        assert!(m.sup <= 1.0 + 1e-9);
    }

    #[test]
    fn strong_field_dirichlet_minimum_is_zero() {
        let p = ReducedGLProblem::new(1.2, 4.0, Boundary::Dirichlet, 0.125).unwrap();
        let m = minimize_reduced(&p, 1e-9).unwrap();
        assert_eq!((m.energy, m.norm_l2), (0.0, 0.0));
        for seed in p.seeds() {
            let d = descend(&p, seed, 1e-9).unwrap();
            assert!(d.energy.abs() < 1e-12, "{}", d.energy);
            assert!(d.norm_l2 < 1e-6);
        }
    }

    #[test]
    fn landau_floor_expansion() {
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 64.0] {
            let e = landau_floor(h);
            assert!(e < 1.0);
            assert!((e - (1.0 - h * h / 8.0)).abs() < 0.01 * h.powi(4), "h {h}: {e}");
        }
    }

    #[test]
    fn landau_floor_bounds_dirichlet_quotient() {
        // The continuum ground state, cut off to Q_R, nearly attains the floor.
        let p = ReducedGLProblem::new(1.0, 8.0, Boundary::Dirichlet, 0.125).unwrap();
        let h2 = p.h() * p.h();
        for shift in [0.0, 0.37] {
            let mut u: Vec<Complex64> = p
                .grid
                .points()
                .map(|x| {
                    let (dx, dy) = (x[0] - shift, x[1]);
                    // Gauge factor moving the symmetric-gauge Gaussian to its new center.
                    Complex64::from_polar((-(dx * dx + dy * dy) / 4.0).exp(), 0.5 * shift * x[1])
                })
                .collect();
            p.project(&mut u);
            let mass: f64 = u.iter().map(|z| h2 * z.norm_sqr()).sum();
            let quartic: f64 = u.iter().map(|z| h2 * z.norm_sqr().powi(2)).sum();
            let kinetic = reduced_energy(&u, &p) + mass - 0.5 * quartic;
            let q = kinetic / mass;
            assert!(q >= 1.0 && q < 1.02, "shift {shift}: {q}");
        }
    }

    #[test]
    fn dirichlet_above_natural() {
        for b in [0.25, 0.75] {
            let d = minimize_reduced(&ReducedGLProblem::new(b, 4.0, Boundary::Dirichlet, 0.125).unwrap(), 1e-7).unwrap();
            let n = minimize_reduced(&ReducedGLProblem::new(b, 4.0, Boundary::Natural, 0.125).unwrap(), 1e-7).unwrap();
            assert!(d.energy >= n.energy);
            assert!(d.energy <= 0.0 && n.energy >= -8.0, "b {b}: {} {}", d.energy, n.energy);
            assert!(d.sup <= 1.0 + 1e-9 && n.sup <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn interpolant_anchors_and_midpoints() {
        let est: Vec<GEstimate> = [(0.25, -0.3), (0.5, -0.12), (0.75, -0.03)]
            .iter()
            .map(|&(b, g)| GEstimate { b, g_est: g, bracket_lo: g, bracket_hi: g, c_emp: 0.0 })
            .collect();
        let g = g_interpolant(&est).unwrap();
        assert_eq!(g.eval(0.0), -0.5);
        assert_eq!(g.eval(-1.0), -0.5);
        assert_eq!(g.eval(2.0), 0.0);
        assert!((g.eval(0.375) - (-0.21)).abs() < 1e-15);
        let mut rev = est.clone();
        rev.reverse();
        assert!(matches!(g_interpolant(&rev), Err(Error::UnorderedTable(_))));
    }

    #[test]
    fn summary_bracket() {
        let rec = |r: f64, bc, e| BulkRecord { b: 0.5, r, boundary: bc, energy: e, grad_norm: 0.0, iters: 0, sup: 0.0, norm_l2: 0.0 };
        // m₀/R² = −0.1 + 0.2/R, m/R² = −0.1 − 0.1/R.
        let recs = vec![
            rec(4.0, Boundary::Dirichlet, 16.0 * (-0.1 + 0.05)),
            rec(8.0, Boundary::Dirichlet, 64.0 * (-0.1 + 0.025)),
            rec(4.0, Boundary::Natural, 16.0 * (-0.1 - 0.025)),
            rec(8.0, Boundary::Natural, 64.0 * (-0.1 - 0.0125)),
        ];
        let s = summarize(0.5, &recs).unwrap();
        assert!((s.c_emp - 0.2).abs() < 1e-12);
        assert!((s.bracket_hi + 0.075).abs() < 1e-12);
        assert!((s.bracket_lo + 0.1).abs() < 1e-12);
        assert!((s.g_est - 0.5 * (-0.075 - 0.1125)).abs() < 1e-12);
    }
}
