//! Dirichlet magnetic Laplacian `−(∇ − iσA)²` with link variables.
//!
//! Every grid edge `p → q` carries the phase `U_pq = exp(−iσ ∫_p^q A·dl)`,
//! with the edge integral taken by the midpoint rule. The discrete form is
//! `Σ_edges |U_pq u_q − u_p|²`, which is gauge covariant: replacing `A` by
//! `A + ∇χ` and `u` by `e^{iσχ} u` leaves it unchanged when `χ` is sampled at
//! the nodes.
//!
//! Nodes inside the open domain are unknowns. An edge that leaves the domain is
//! cut where it meets the boundary, at fraction `θ` of its length, and
//! contributes `|u_p|²/θ` (the value at the boundary point is zero). This keeps
//! the matrix Hermitian and gives second-order eigenvalues on curved domains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{averaged_potential_at, gauge_function, recentered_potential, CellSample, GAUGE_TOL};
use crate::geometry::{Cell, Domain, Point};
use crate::grid::{Grid, ScalarField, VectorField, VectorFunction};
use crate::linalg::{dot, norm, pcg};

const NONE: u32 = u32::MAX;
const THETA_FLOOR: f64 = 1e-6;

/// Default relative residual for [`lowest_eigenvalue`].
pub const EIG_TOL: f64 = 1e-8;
const STALL_WINDOW: usize = 10;
const STALL_RTOL: f64 = 1e-6;
const STALL_RESIDUAL: f64 = 1e-5;
const SHIFT_START: f64 = 1e-2;
const SHIFT_GAP: f64 = 1e-4;

/// `exp(−iσ h A(mid)·e)` for the edge from `p` along unit axis `axis`.
#[inline]
pub fn link_phase<A: VectorFunction + ?Sized>(a: &A, sigma: f64, p: Point, axis: usize, h: f64) -> Complex64 {
    if sigma == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut mid = p;
    mid[axis] += 0.5 * h;
    let v = a.eval_vec(mid).unwrap_or([0.0; 2]);
    Complex64::from_polar(1.0, -sigma * h * v[axis])
}

/// Link phases on every east and north edge of a grid.
#[derive(Debug, Clone)]
pub struct LinkField {
    pub grid: Grid,
    pub sigma: f64,
    /// Edge `(i, j) → (i+1, j)`; the last column is unused.
    pub east: Vec<Complex64>,
    /// Edge `(i, j) → (i, j+1)`; the last row is unused.
    pub north: Vec<Complex64>,
}

impl LinkField {
    pub fn new<A: VectorFunction + ?Sized>(grid: Grid, sigma: f64, a: &A) -> Self {
        let mut east = vec![Complex64::new(1.0, 0.0); grid.len()];
        let mut north = east.clone();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                let p = grid.node(i, j);
                if i + 1 < grid.nx {
                    east[k] = link_phase(a, sigma, p, 0, grid.h);
                }
                if j + 1 < grid.ny {
                    north[k] = link_phase(a, sigma, p, 1, grid.h);
                }
            }
        }
        LinkField { grid, sigma, east, north }
    }

    /// Product of link phases counter-clockwise around the plaquette with
    /// lower-left node `(i, j)`; equals `exp(−iσ ∮ A·dl)`.
    pub fn plaquette(&self, i: usize, j: usize) -> Complex64 {
        let g = &self.grid;
        self.east[g.index(i, j)]
            * self.north[g.index(i + 1, j)]
            * self.east[g.index(i, j + 1)].conj()
            * self.north[g.index(i, j)].conj()
    }

    /// `Σ_edges |U_pq u_q − u_p|²` over edges with both ends in `mask`.
    pub fn form(&self, u: &[Complex64], mask: &[bool]) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.index(i, j);
                if !mask[p] {
                    continue;
                }
                if i + 1 < g.nx && mask[p + 1] {
                    acc += (self.east[p] * u[p + 1] - u[p]).norm_sqr();
                }
                if j + 1 < g.ny && mask[p + g.nx] {
                    acc += (self.north[p] * u[p + g.nx] - u[p]).norm_sqr();
                }
            }
        }
        acc
    }
}

/// `q_σ(u, A; U) = ∫_U |(∇ − iσA)u|²` for `u` on the nodes of `grid`,
/// summed over edges whose endpoints both lie in `mask`.
pub fn quadratic_form<A: VectorFunction + ?Sized>(u: &[Complex64], grid: Grid, sigma: f64, a: &A, mask: &[bool]) -> f64 {
    LinkField::new(grid, sigma, a).form(u, mask)
}

/// Discrete Dirichlet magnetic Laplacian on a domain.
#[derive(Debug, Clone)]
pub struct MagneticOperator {
    pub grid: Grid,
    pub sigma: f64,
    pub links: LinkField,
    /// Grid node of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown index of each grid node (`u32::MAX` outside the domain).
    pub unknown: Vec<u32>,
    /// Diagonal entries, already divided by `h²`.
    pub diag: Vec<f64>,
    /// Off-diagonal entries `(column, value)`, already divided by `h²`.
    pub offdiag: Vec<[(u32, Complex64); 4]>,
}

impl MagneticOperator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            let mut s = x[k] * self.diag[k];
            for &(c, v) in &self.offdiag[k] {
                if c != NONE {
                    s += v * x[c as usize];
                }
            }
            *yk = s;
        }
    }

    /// `h² ⟨u, L u⟩`, the discrete `∫_Ω |(∇ − iσA)u|²`.
    pub fn form(&self, u: &[Complex64]) -> f64 {
        let mut lu = vec![Complex64::new(0.0, 0.0); u.len()];
        self.apply(u, &mut lu);
        dot(u, &lu).re * self.grid.h * self.grid.h
    }

    pub fn rayleigh(&self, u: &[Complex64]) -> f64 {
        let mut lu = vec![Complex64::new(0.0, 0.0); u.len()];
        self.apply(u, &mut lu);
        dot(u, &lu).re / dot(u, u).re
    }

    /// Restricts a grid function to the unknowns.
    pub fn restrict(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.nodes.iter().map(|&k| u[k]).collect()
    }

    /// Extends a vector of unknowns by zero to the whole grid.
    pub fn extend(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (&k, &x) in self.nodes.iter().zip(v) {
            out[k] = x;
        }
        out
    }

    /// Largest deviation from Hermitian symmetry over all stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, row) in self.offdiag.iter().enumerate() {
            for &(c, v) in row {
                if c == NONE {
                    continue;
                }
                let back = self.offdiag[c as usize].iter().find(|e| e.0 as usize == r).map(|e| e.1);
                worst = worst.max(back.map_or(f64::INFINITY, |b| (b - v.conj()).norm()));
            }
        }
        worst
    }
}

/// Assembles the operator on the grid of `domain` for the potential `a`.
pub fn assemble<A: VectorFunction + ?Sized>(domain: &Domain, sigma: f64, a: &A) -> Result<MagneticOperator> {
    let grid = Grid::for_domain(domain);
    assemble_on(domain, grid, sigma, a)
}

pub fn assemble_on<A: VectorFunction + ?Sized>(domain: &Domain, grid: Grid, sigma: f64, a: &A) -> Result<MagneticOperator> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be non-negative, got {sigma}")));
    }
    let flux = sigma * grid.h * grid.h;
    if flux > 1.0 {
        return Err(Error::FluxTooLarge(flux));
    }
    let links = LinkField::new(grid, sigma, a);
    let mut unknown = vec![NONE; grid.len()];
    let mut nodes = Vec::new();
    for k in 0..grid.len() {
        if domain.contains(grid.point(k)) {
            unknown[k] = nodes.len() as u32;
            nodes.push(k);
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyRegion("no grid node inside the domain".into()));
    }
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let mut diag = vec![0.0; nodes.len()];
    let mut offdiag = vec![[(NONE, Complex64::new(0.0, 0.0)); 4]; nodes.len()];
    for (r, &k) in nodes.iter().enumerate() {
        let (i, j) = grid.coords(k);
        let p = grid.point(k);
        // (neighbour node, phase U_pq)
        let nbrs = [
            (i + 1 < grid.nx).then(|| (grid.index(i + 1, j), links.east[k])),
            (i > 0).then(|| (grid.index(i - 1, j), links.east[grid.index(i - 1, j)].conj())),
            (j + 1 < grid.ny).then(|| (grid.index(i, j + 1), links.north[k])),
            (j > 0).then(|| (grid.index(i, j - 1), links.north[grid.index(i, j - 1)].conj())),
        ];
        for (slot, nb) in nbrs.into_iter().enumerate() {
            let Some((q, u)) = nb else {
                diag[r] += inv_h2;
                continue;
            };
            let cut = domain.exit_fraction(p, grid.point(q)).filter(|&t| t < 1.0 || unknown[q] == NONE);
            match (cut, unknown[q]) {
                (Some(t), _) => diag[r] += inv_h2 / t.max(THETA_FLOOR),
                (None, NONE) => diag[r] += inv_h2,
                (None, c) => {
                    diag[r] += inv_h2;
                    offdiag[r][slot] = (c, -u * inv_h2);
                }
            }
        }
    }
    Ok(MagneticOperator { grid, sigma, links, nodes, unknown, diag, offdiag })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda: f64,
    /// Normalized eigenvector on the unknowns (`Σ|v|² h² = 1`).
    #[serde(skip)]
    pub eigenvector: Vec<Complex64>,
    /// `‖(L − λ)v‖ / (λ‖v‖)`.
    pub residual: f64,
    pub iterations: usize,
}

/// Lowest eigenvalue by shift-and-invert power iteration with
/// conjugate-gradient inner solves, started from the all-ones vector.
///
/// The shift starts at zero and moves up to `ρ(1 − max(10 r, 10⁻⁴))` once the
/// relative residual `r` is below `10⁻³` (`ρ` the current Rayleigh quotient).
/// Stops when the relative residual drops below `tol`, or when the Rayleigh
/// quotient has not moved by more than `1e-12` (relative) over 20 iterations
/// while the residual is below `1e-6`. The reported residual is the one
/// actually reached.
pub fn lowest_eigenvalue(op: &MagneticOperator, tol: f64) -> Result<SpectralResult> {
    lowest_eigenvalue_from(op, tol, None)
}

pub fn lowest_eigenvalue_from(op: &MagneticOperator, tol: f64, start: Option<&[Complex64]>) -> Result<SpectralResult> {
    const MAX_OUTER: usize = 2000;
    let n = op.len();
    let mut x: Vec<Complex64> = match start {
        Some(s) => s.to_vec(),
        None => vec![Complex64::new(1.0, 0.0); n],
    };
    let scale = 1.0 / norm(&x);
    x.iter_mut().for_each(|v| *v *= scale);
    let mut y = x.clone();
    let mut lx = vec![Complex64::new(0.0, 0.0); n];
    let mut rho = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut mu = 0.0;
    let floor = (tol * 1e-2).min(1e-10);
    let mut history = Vec::new();
    for it in 1..=MAX_OUTER {
        if rho.is_finite() {
            // Warm start: the next iterate is close to x / (ρ − μ).
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = xi / (rho - mu);
            }
        }
        let inv_diag: Vec<f64> = op.diag.iter().map(|d| 1.0 / (d - mu)).collect();
        let shifted = |u: &[Complex64], v: &mut [Complex64]| {
            op.apply(u, v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= ui * mu;
            }
        };
        let cg = pcg(shifted, &inv_diag, &x, &mut y, (0.1 * residual).clamp(floor, 1e-6), 20 * n + 100);
        if let Err(e) = cg {
            if mu == 0.0 {
                return Err(e);
            }
            // The shift overshot an eigenvalue: retreat and retry.
            mu = (rho - 10.0 * (rho - mu)).max(0.0);
            y.copy_from_slice(&x);
            continue;
        }
        let s = 1.0 / norm(&y);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi * s;
        }
        op.apply(&x, &mut lx);
        rho = dot(&x, &lx).re;
        let r2: f64 = lx.iter().zip(&x).map(|(a, b)| (a - b * rho).norm_sqr()).sum();
        residual = r2.sqrt() / rho.abs().max(1.0);
        history.push(rho);
        // Near-degenerate clusters (Landau levels) mix slowly; the Rayleigh
        // quotient is then converged long before the residual.
        let stalled = history.len() > STALL_WINDOW
            && residual <= STALL_RESIDUAL
            && (history[history.len() - 1 - STALL_WINDOW] - rho).abs() <= STALL_RTOL * rho.abs();
        if residual <= tol || stalled {
            let h = op.grid.h;
            x.iter_mut().for_each(|v| *v /= h);
            return Ok(SpectralResult { lambda: rho, eigenvector: x, residual, iterations: it });
        }
        if residual < SHIFT_START {
            // Move the shift towards ρ, keeping a relative gap of at least SHIFT_GAP.
            let candidate = rho * (1.0 - (10.0 * residual).max(SHIFT_GAP));
            if candidate > mu {
                mu = candidate;
            }
        }
    }
    Err(Error::NoConvergence {
        what: "inverse iteration",
        iterations: MAX_OUTER,
        residual,
        best: crate::linalg::Scalar::flatten(&x),
    })
}

/// `min_i λ(σ, A; Ω_i)` over the connected components.
pub fn lowest_eigenvalue_components(ops: &[MagneticOperator], tol: f64) -> Result<SpectralResult> {
    let mut best: Option<SpectralResult> = None;
    for op in ops {
        let r = lowest_eigenvalue(op, tol)?;
        if best.as_ref().map_or(true, |b| r.lambda < b.lambda) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::EmptyRegion("no component".into()))
}

/// `(form, bound) = (∫|(∇ − iσA)u|², σ ∫ B|u|²)` for `u` on the unknowns and
/// `b` the field at the unknowns.
pub fn diamagnetic_lower(op: &MagneticOperator, u: &[Complex64], b: &[f64]) -> (f64, f64) {
    let h2 = op.grid.h * op.grid.h;
    let bound = op.sigma * u.iter().zip(b).map(|(z, bv)| bv * z.norm_sqr()).sum::<f64>() * h2;
    (op.form(u), bound)
}

/// Smooth radial cutoff: 1 on `[0, ½]`, 0 on `[1, ∞)`.
pub fn radial_cutoff(t: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = f(1.0 - t);
        a / (a + f(t - 0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianProfile {
    /// `(σ B_av / 2π)^{1/2} exp(−σ B_av |x|²/4)`, the lowest Landau level of
    /// the constant field `B_av`.
    Landau,
    /// `π^{−1/2} B_av^{1/4} σ^{1/2} exp(−½ B_av^{1/2} σ |x|²)`.
    Stated,
}

/// Gaussian trial state centered at `center`, cut off at radius `σ^{−ρ}`.
pub fn gaussian_trial(grid: Grid, sigma: f64, b_av: f64, center: Point, rho: f64, profile: GaussianProfile) -> Result<Vec<Complex64>> {
    if !(b_av > 0.0) {
        return Err(Error::param("b_av", format!("must be positive, got {b_av}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let (amp, alpha) = match profile {
        GaussianProfile::Landau => ((sigma * b_av / (2.0 * std::f64::consts::PI)).sqrt(), 0.25 * sigma * b_av),
        GaussianProfile::Stated => (std::f64::consts::PI.powf(-0.5) * b_av.powf(0.25) * sigma.sqrt(), 0.5 * b_av.sqrt() * sigma),
    };
    let s_rho = sigma.powf(rho);
    Ok(grid
        .points()
        .map(|p| {
            let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            Complex64::new(amp * radial_cutoff(s_rho * r2.sqrt()) * (-alpha * r2).exp(), 0.0)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thm12Upper {
    /// Rayleigh quotient of the gauge-transferred trial state under `A`.
    pub quotient: f64,
    pub center: Point,
    pub radius: f64,
    pub b_av: f64,
}

/// Upper bound for `λ(σ, A; Ω)` from a Gaussian placed where the disk average
/// of `B` at radius `σ^{−ρ}` is smallest.
///
/// `b` and `a` are the field and its potential on the operator's grid.
pub fn thm12_upper(op: &MagneticOperator, domain: &Domain, b: &ScalarField, a: &VectorField, rho: f64, profile: GaussianProfile) -> Result<Thm12Upper> {
    let sigma = op.sigma;
    let grid = op.grid;
    let radius = sigma.powf(-rho);
    let step = (0.5 * radius).max(grid.h);
    let bb = domain.outer.bbox();
    let mut best: Option<(f64, Point)> = None;
    let mut y = bb.y_min + radius;
    while y <= bb.y_max - radius + 1e-12 {
        let mut x = bb.x_min + radius;
        while x <= bb.x_max - radius + 1e-12 {
            let c = [x, y];
            if domain.contains_disk(c, radius) {
                let avg = CellSample::new(b, &Cell::disk(c, radius), 16)?.average();
                if best.map_or(true, |(v, _)| avg < v) {
                    best = Some((avg, c));
                }
            }
            x += step;
        }
        y += step;
    }
    let Some((b_av, center)) = best else {
        return Err(Error::NoAdmissibleCenter(format!("no disk of radius {radius:.4} fits in the domain")));
    };
    if !(b_av > 0.0) {
        return Err(Error::param("B", "disk average must be positive"));
    }
    let cell = Cell::disk(center, radius);
    let mask: Vec<bool> = grid.points().map(|p| cell.contains(p)).collect();
    let v = gaussian_trial(grid, sigma, b_av, center, rho, profile)?;
    let w = transfer_to_potential(b, a, &cell, &mask, sigma, &v)?;
    let quotient = op.rayleigh(&op.restrict(&w));
    Ok(Thm12Upper { quotient, center, radius, b_av })
}

/// Multiplies `v` (supported in `mask`) by `e^{iσφ}` with `∇φ = A − A_new`, so
/// that `q_σ(result, A) = q_σ(v, A_new)`.
fn transfer_to_potential(b: &ScalarField, a: &VectorField, cell: &Cell, mask: &[bool], sigma: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let grid = a.grid;
    let mut a_new = VectorField::zeros(grid);
    let mut a_loc = VectorField::zeros(grid);
    for k in (0..grid.len()).filter(|&k| mask[k]) {
        a_new.values[k] = crate::field::potential_at(b, cell.center, grid.point(k))?;
        a_loc.values[k] = a.values[k];
    }
    let phi = gauge_function(&a_new, &a_loc, mask, GAUGE_TOL)?;
    Ok(v
        .iter()
        .enumerate()
        .map(|(k, z)| if mask[k] { z * Complex64::from_polar(1.0, sigma * phi.values[k]) } else { Complex64::new(0.0, 0.0) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: f64,
    /// `q_σ(u, A; U)`.
    pub middle: f64,
    pub upper: f64,
    /// `q_σ(v, A_new; U)`, equal to `middle` up to the gauge discretization.
    pub gauged: f64,
    /// `q_σ(v, A_av; U)`.
    pub averaged: f64,
}

/// Two-sided comparison of `q_σ(u, A; U)` with `q_σ(e^{iσφ}u, A_av; U)`.
///
/// `sample` holds `B` on the cell grid, `a` the true potential on the same
/// grid and `u` the test function on it.
pub fn sandwich_check(u: &[Complex64], sigma: f64, sample: &CellSample, a: &VectorField, rho: f64, eta: f64) -> Result<Sandwich> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::param("rho", format!("must lie in (0, 1/2), got {rho}")));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::param("eta", format!("must lie in (0, 1/2), got {eta}")));
    }
    let grid = sample.grid();
    let cell = sample.cell;
    let mask = &sample.b.mask;
    let a_new = recentered_potential(&sample.b, &cell, grid)?;
    let phi = gauge_function(a, &a_new, mask, GAUGE_TOL)?;
    let v: Vec<Complex64> = u.iter().zip(&phi.values).map(|(z, f)| z * Complex64::from_polar(1.0, sigma * f)).collect();
    let middle = quadratic_form(u, grid, sigma, a, mask);
    let gauged = quadratic_form(&v, grid, sigma, &a_new, mask);
    let b_av = sample.average();
    let a_av = |p: Point| averaged_potential_at(b_av, cell.center, p);
    let averaged = quadratic_form(&v, grid, sigma, &a_av, mask);
    let delta = cell.diameter();
    let c2 = delta * sigma.powf(rho);
    let c_prime = 16.0 * c2.powi(4);
    let u_inf2 = u.iter().zip(mask).filter(|(_, &m)| m).map(|(z, _)| z.norm_sqr()).fold(0.0, f64::max);
    let term = c_prime * sigma.powf(2.0 - 4.0 * rho + eta) * sample.gradient_norm_sq() * u_inf2;
    let f = sigma.powf(-eta);
    Ok(Sandwich { lower: (1.0 - f) * averaged - term, middle, upper: (1.0 + f) * averaged + term, gauged, averaged })
}
