//! The full Ginzburg-Landau functional
//!
//! `𝒢(ψ,𝒜) = ∫_Ω |(∇ − iκH𝒜)ψ|² − κ²|ψ|² + κ²/2 |ψ|⁴ + (κH)² ∫_Ω̃ |curl(𝒜 − F)|²`
//!
//! on a grid domain `Ω = Ω̃ \ ∪ω_k`. `ψ` lives on nodes, `𝒜` on edges (one
//! value per edge, the tangential component at its midpoint). Node and edge
//! weights are the fractions of the four (two) adjacent plaquettes whose
//! centers lie in `Ω`, which gives the trapezoid rule on rectangles and the
//! natural boundary condition variationally. The field term runs over the
//! plaquettes of `Ω̃`, holes included.

mod descent;
pub mod effective;
mod precond;
pub mod reference;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::grid::{Grid, ScalarFunction, VectorField};
use crate::io::write_mcf1;
use crate::linalg::pcg;

pub use effective::*;
pub use reference::{build_reference_potential, build_reference_potential_on, ReferencePotential};

/// Default relative tolerance on the Euler-Lagrange residuals.
pub const GL_TOL: f64 = 1e-6;
/// Descent steps between two gauge projections.
const BLOCK: usize = 200;
const MAX_ITER: usize = 200_000;
const PROJECTION_TOL: f64 = 1e-12;

/// A configuration `(ψ, 𝒜)` at given `κ` and `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLState {
    pub grid: Grid,
    pub kappa: f64,
    pub h_field: f64,
    /// Order parameter at the nodes; zero outside `Ω`.
    #[serde(skip)]
    pub psi: Vec<Complex64>,
    /// `𝒜·e₁` on east edges (indexed by their west node).
    pub east: Vec<f64>,
    /// `𝒜·e₂` on north edges (indexed by their south node).
    pub north: Vec<f64>,
    /// Largest `|div 𝒜|` over the nodes of `Ω̃` after the last projection.
    pub divergence: f64,
}

impl GLState {
    pub fn b(&self) -> f64 {
        self.h_field / self.kappa
    }

    /// `𝒜` at the nodes (average of the adjacent edges).
    pub fn potential_field(&self) -> VectorField {
        reference::edge_to_nodes(self.grid, &self.east, &self.north)
    }

    pub fn sup_norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `ψ ↦ e^{iκHχ}ψ`, `𝒜 ↦ 𝒜 + ∇χ` with the discrete gradient on edges.
    /// The discrete energy is invariant.
    pub fn gauge_transform(&mut self, chi: &[f64]) {
        let g = self.grid;
        let s = self.kappa * self.h_field;
        for (z, c) in self.psi.iter_mut().zip(chi) {
            *z *= Complex64::from_polar(1.0, s * c);
        }
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                if i + 1 < g.nx {
                    self.east[k] += (chi[k + 1] - chi[k]) / g.h;
                }
                if j + 1 < g.ny {
                    self.north[k] += (chi[k + g.nx] - chi[k]) / g.h;
                }
            }
        }
    }

    /// Writes `Re ψ, Im ψ, 𝒜₁, 𝒜₂` (node values) as an MCF1 file.
    pub fn write_snapshot(&self, path: &std::path::Path) -> Result<()> {
        let re: Vec<f64> = self.psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.psi.iter().map(|z| z.im).collect();
        let a = self.potential_field();
        let a1: Vec<f64> = a.values.iter().map(|v| v[0]).collect();
        let a2: Vec<f64> = a.values.iter().map(|v| v[1]).collect();
        write_mcf1(path, &self.grid, &[&re, &im, &a1, &a2])
    }
}

/// The three terms of `𝒢`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    /// `∫_Ω |(∇ − iκH𝒜)ψ|²`.
    pub kinetic: f64,
    /// `∫_Ω |ψ|²`.
    pub mass: f64,
    /// `∫_Ω |ψ|⁴`.
    pub quartic: f64,
    /// `∫_Ω̃ |curl(𝒜 − F)|²`.
    pub field: f64,
}

/// Relative `L²` residuals of the Euler-Lagrange system: the `ψ` equation,
/// the `𝒜` equation, and the rows of both at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub psi: f64,
    pub potential: f64,
    pub boundary: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.psi.max(self.potential).max(self.boundary)
    }
}

/// Discretized functional at fixed `κ`, `H`, `B` and domain.
#[derive(Debug, Clone)]
pub struct GLProblem {
    pub kappa: f64,
    pub h_field: f64,
    pub domain: Domain,
    pub reference: ReferencePotential,
    node_weight: Vec<f64>,
    east_weight: Vec<f64>,
    north_weight: Vec<f64>,
    /// Number of `Ω̃` plaquettes adjacent to each edge.
    east_plaquettes: Vec<u8>,
    north_plaquettes: Vec<u8>,
    area: f64,
}

impl GLProblem {
    pub fn new<F: ScalarFunction + ?Sized>(kappa: f64, h_field: f64, b: &F, domain: &Domain) -> Result<Self> {
        let reference = build_reference_potential(b, domain)?;
        Self::with_reference(kappa, h_field, domain, reference)
    }

    pub fn with_reference(kappa: f64, h_field: f64, domain: &Domain, reference: ReferencePotential) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        if !(h_field > 0.0 && h_field.is_finite()) {
            return Err(Error::param("H", format!("must be positive, got {h_field}")));
        }
        let g = reference.grid;
        let dual = reference.dual;
        let in_omega: Vec<bool> = dual.points().map(|p| domain.contains(p)).collect();
        let mut node_weight = vec![0.0; g.len()];
        let mut east_weight = vec![0.0; g.len()];
        let mut north_weight = vec![0.0; g.len()];
        let mut east_plaquettes = vec![0u8; g.len()];
        let mut north_plaquettes = vec![0u8; g.len()];
        let h2 = g.h * g.h;
        for j in 0..dual.ny {
            for i in 0..dual.nx {
                let d = dual.index(i, j);
                let sw = g.index(i, j);
                let corners = [sw, sw + 1, sw + g.nx, sw + g.nx + 1];
                if in_omega[d] {
                    for c in corners {
                        node_weight[c] += 0.25 * h2;
                    }
                    east_weight[sw] += 0.5;
                    east_weight[sw + g.nx] += 0.5;
                    north_weight[sw] += 0.5;
                    north_weight[sw + 1] += 0.5;
                }
                if reference.inside[d] {
                    east_plaquettes[sw] += 1;
                    east_plaquettes[sw + g.nx] += 1;
                    north_plaquettes[sw] += 1;
                    north_plaquettes[sw + 1] += 1;
                }
            }
        }
        let area: f64 = node_weight.iter().sum();
        if area == 0.0 {
            return Err(Error::EmptyRegion("no grid plaquette inside the domain".into()));
        }
        Ok(GLProblem {
            kappa,
            h_field,
            domain: domain.clone(),
            reference,
            node_weight,
            east_weight,
            north_weight,
            east_plaquettes,
            north_plaquettes,
            area,
        })
    }

    pub fn grid(&self) -> Grid {
        self.reference.grid
    }

    pub fn b(&self) -> f64 {
        self.h_field / self.kappa
    }

    /// Discrete `|Ω|`.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Whether node `k` carries `ψ`.
    pub fn is_active(&self, k: usize) -> bool {
        self.node_weight[k] > 0.0
    }

    pub fn node_weight(&self, k: usize) -> f64 {
        self.node_weight[k]
    }

    /// `ψ = 0`, `𝒜 = F`.
    pub fn normal_state(&self) -> GLState {
        self.state_from(vec![Complex64::new(0.0, 0.0); self.grid().len()])
    }

    /// `ψ = value` on `Ω`, `𝒜 = F`.
    pub fn constant_state(&self, value: Complex64) -> GLState {
        let psi = (0..self.grid().len()).map(|k| if self.is_active(k) { value } else { Complex64::new(0.0, 0.0) }).collect();
        self.state_from(psi)
    }

    /// `(ψ, F)` with `ψ` zeroed outside `Ω`.
    pub fn state_from(&self, mut psi: Vec<Complex64>) -> GLState {
        assert_eq!(psi.len(), self.grid().len());
        for (k, z) in psi.iter_mut().enumerate() {
            if !self.is_active(k) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        GLState {
            grid: self.grid(),
            kappa: self.kappa,
            h_field: self.h_field,
            psi,
            east: self.reference.east.clone(),
            north: self.reference.north.clone(),
            divergence: 0.0,
        }
    }

    fn check(&self, state: &GLState) {
        assert_eq!(state.grid, self.grid(), "state grid differs from the problem grid");
    }

    fn pack(&self, state: &GLState) -> Vec<f64> {
        let n = self.grid().len();
        let mut x = vec![0.0; 4 * n];
        for (k, z) in state.psi.iter().enumerate() {
            x[2 * k] = z.re;
            x[2 * k + 1] = z.im;
        }
        for k in 0..n {
            x[2 * n + k] = state.east[k] - self.reference.east[k];
            x[3 * n + k] = state.north[k] - self.reference.north[k];
        }
        x
    }

    fn unpack(&self, x: &[f64], state: &mut GLState) {
        let n = self.grid().len();
        for k in 0..n {
            state.psi[k] = Complex64::new(x[2 * k], x[2 * k + 1]);
            state.east[k] = self.reference.east[k] + x[2 * n + k];
            state.north[k] = self.reference.north[k] + x[3 * n + k];
        }
    }

    /// Energy terms and, optionally, the gradient of `𝒢` in the packed layout
    /// `[Re ψ, Im ψ interleaved | a east | a north]` with `a = 𝒜 − F`.
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> EnergyParts {
        let g = self.grid();
        let n = g.len();
        let s = self.kappa * self.h_field * g.h;
        let k2 = self.kappa * self.kappa;
        let kh2 = (self.kappa * self.h_field).powi(2);
        let (psi, a) = x.split_at(2 * n);
        let (ae, an) = a.split_at(n);
        let fe = &self.reference.east;
        let fnorth = &self.reference.north;
        let z = |k: usize| Complex64::new(psi[2 * k], psi[2 * k + 1]);
        let mut parts = EnergyParts { kinetic: 0.0, mass: 0.0, quartic: 0.0, field: 0.0 };
        let mut grad = grad;
        if let Some(gr) = grad.as_deref_mut() {
            gr.iter_mut().for_each(|v| *v = 0.0);
        }
        // One closure for both edge orientations.
        let mut edge = |p: usize, q: usize, c: f64, pot: f64, slot: usize, grad: &mut Option<&mut [f64]>| {
            let u = Complex64::from_polar(1.0, -s * pot);
            let zp = z(p);
            let d = u * z(q) - zp;
            parts.kinetic += c * d.norm_sqr();
            if let Some(gr) = grad.as_deref_mut() {
                let gp = -2.0 * c * d;
                let gq = 2.0 * c * u.conj() * d;
                gr[2 * p] += gp.re;
                gr[2 * p + 1] += gp.im;
                gr[2 * q] += gq.re;
                gr[2 * q + 1] += gq.im;
                gr[slot] += -2.0 * c * s * (zp.conj() * d).im;
            }
        };
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                if i + 1 < g.nx && self.east_weight[k] > 0.0 {
                    edge(k, k + 1, self.east_weight[k], fe[k] + ae[k], 2 * n + k, &mut grad);
                }
                if j + 1 < g.ny && self.north_weight[k] > 0.0 {
                    edge(k, k + g.nx, self.north_weight[k], fnorth[k] + an[k], 3 * n + k, &mut grad);
                }
            }
        }
        for k in 0..n {
            let w = self.node_weight[k];
            if w > 0.0 {
                let zk = z(k);
                let r = zk.norm_sqr();
                parts.mass += w * r;
                parts.quartic += w * r * r;
                if let Some(gr) = grad.as_deref_mut() {
                    let gk = 2.0 * k2 * w * (r - 1.0) * zk;
                    gr[2 * k] += gk.re;
                    gr[2 * k + 1] += gk.im;
                }
            }
        }
        let dual = self.reference.dual;
        for j in 0..dual.ny {
            for i in 0..dual.nx {
                if !self.reference.inside[dual.index(i, j)] {
                    continue;
                }
                let k = g.index(i, j);
                let flux = ae[k] + an[k + 1] - ae[k + g.nx] - an[k];
                parts.field += flux * flux;
                if let Some(gr) = grad.as_deref_mut() {
                    let v = 2.0 * kh2 * flux;
                    gr[2 * n + k] += v;
                    gr[3 * n + k + 1] += v;
                    gr[2 * n + k + g.nx] -= v;
                    gr[3 * n + k] -= v;
                }
            }
        }
        parts
    }

    fn total(&self, p: &EnergyParts) -> f64 {
        let k2 = self.kappa * self.kappa;
        p.kinetic - k2 * p.mass + 0.5 * k2 * p.quartic + (self.kappa * self.h_field).powi(2) * p.field
    }

    pub fn energy_parts(&self, state: &GLState) -> EnergyParts {
        self.check(state);
        self.evaluate(&self.pack(state), None)
    }

    /// `𝒢(ψ, 𝒜)`.
    pub fn energy(&self, state: &GLState) -> f64 {
        self.total(&self.energy_parts(state))
    }

    /// `𝒢₀(ψ,𝒜) = 𝒢(ψ,𝒜) − (κH)²∫|curl(𝒜 − F)|²`.
    pub fn energy_without_field(&self, state: &GLState) -> f64 {
        let p = self.energy_parts(state);
        p.kinetic - self.kappa * self.kappa * (p.mass - 0.5 * p.quartic)
    }

    fn residuals_from_gradient(&self, g: &[f64]) -> Residuals {
        let grid = self.grid();
        let n = grid.len();
        let h2 = grid.h * grid.h;
        let (mut rp, mut ra, mut rb_p, mut rb_a) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let w = self.node_weight[k];
            if w > 0.0 {
                let v = (g[2 * k].powi(2) + g[2 * k + 1].powi(2)) / w;
                rp += v;
                if w < h2 * (1.0 - 1e-12) {
                    rb_p += v;
                }
            }
            for (slot, count) in [(2 * n + k, self.east_plaquettes[k]), (3 * n + k, self.north_plaquettes[k])] {
                let v = g[slot] * g[slot] / h2;
                ra += v;
                if count == 1 {
                    rb_a += v;
                }
            }
        }
        let root = self.area.sqrt();
        let scale_psi = 2.0 * self.kappa * self.kappa * root;
        let scale_a = scale_psi * self.h_field;
        Residuals {
            psi: rp.sqrt() / scale_psi,
            potential: ra.sqrt() / scale_a,
            boundary: (rb_p.sqrt() / scale_psi).max(rb_a.sqrt() / scale_a),
        }
    }

    /// Euler-Lagrange residuals, relative to the natural scales
    /// `2κ²|Ω|^{1/2}` (order-parameter equation) and `2κ²H|Ω|^{1/2}`
    /// (current equation).
    pub fn residuals(&self, state: &GLState) -> Residuals {
        self.check(state);
        let x = self.pack(state);
        let mut g = vec![0.0; x.len()];
        self.evaluate(&x, Some(&mut g));
        self.residuals_from_gradient(&g)
    }

    /// Discrete divergence of `𝒜` at node `(i, j)`, over the edges adjacent
    /// to `Ω̃` plaquettes.
    pub fn divergence(&self, state: &GLState, i: usize, j: usize) -> f64 {
        let g = self.grid();
        let k = g.index(i, j);
        let mut d = 0.0;
        if i + 1 < g.nx && self.east_plaquettes[k] > 0 {
            d += state.east[k];
        }
        if i > 0 && self.east_plaquettes[k - 1] > 0 {
            d -= state.east[k - 1];
        }
        if j + 1 < g.ny && self.north_plaquettes[k] > 0 {
            d += state.north[k];
        }
        if j > 0 && self.north_plaquettes[k - g.nx] > 0 {
            d -= state.north[k - g.nx];
        }
        d / g.h
    }

    fn max_divergence(&self, state: &GLState) -> f64 {
        let g = self.grid();
        let mut m: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                m = m.max(self.divergence(state, i, j).abs());
            }
        }
        m
    }

    /// Leray projection: solves the graph Poisson problem `div ∇ξ = div 𝒜`
    /// over the edges of `Ω̃` and applies the gauge transform `−ξ`, leaving
    /// `div 𝒜 = 0` (with zero normal flux) and the energy unchanged.
    pub fn project(&self, state: &mut GLState) -> Result<f64> {
        self.check(state);
        let g = self.grid();
        let n = g.len();
        let h = g.h;
        let mut degree = vec![0u8; n];
        for k in 0..n {
            if self.east_plaquettes[k] > 0 {
                degree[k] += 1;
                degree[k + 1] += 1;
            }
            if self.north_plaquettes[k] > 0 {
                degree[k] += 1;
                degree[k + g.nx] += 1;
            }
        }
        let Some(pin) = (0..n).find(|&k| degree[k] > 0) else {
            return Ok(0.0);
        };
        // DᵀD ξ = Dᵀ𝒜 = −div 𝒜, with the pinned row replaced by ξ_pin = 0.
        let mut rhs = vec![0.0; n];
        for (k, r) in rhs.iter_mut().enumerate() {
            if degree[k] > 0 && k != pin {
                let (i, j) = g.coords(k);
                *r = -self.divergence(state, i, j);
            }
        }
        let inv_h2 = 1.0 / (h * h);
        let apply = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..n {
                if self.east_plaquettes[k] > 0 {
                    let d = (x[k + 1] - x[k]) * inv_h2;
                    y[k] -= d;
                    y[k + 1] += d;
                }
                if self.north_plaquettes[k] > 0 {
                    let d = (x[k + g.nx] - x[k]) * inv_h2;
                    y[k] -= d;
                    y[k + g.nx] += d;
                }
            }
            for k in 0..n {
                if degree[k] == 0 || k == pin {
                    y[k] = x[k];
                }
            }
        };
        let inv_diag: Vec<f64> = (0..n).map(|k| if degree[k] == 0 || k == pin { 1.0 } else { h * h / degree[k] as f64 }).collect();
        let mut xi = vec![0.0; n];
        pcg(apply, &inv_diag, &rhs, &mut xi, PROJECTION_TOL, 20 * n + 100)?;
        xi.iter_mut().for_each(|v| *v = -*v);
        state.gauge_transform(&xi);
        state.divergence = self.max_divergence(state);
        Ok(state.divergence)
    }

    /// Block preconditioner for the packed layout: `(2L + κ²h²)⁻¹` on each of
    /// `Re ψ`, `Im ψ` and `(2(κH)²(L + h²))⁻¹` on each edge component, with
    /// `L` the Neumann graph Laplacian of the respective index grid. This
    /// matches the Hessian at `|ψ| ≈ 1` up to boundary rows and the coupling
    /// between the blocks.
    fn preconditioner(&self) -> Preconditioner {
        let g = self.grid();
        let n = g.len();
        let h2 = g.h * g.h;
        let kh2 = (self.kappa * self.h_field).powi(2);
        let mut active = vec![false; 4 * n];
        for k in 0..n {
            active[2 * k] = self.node_weight[k] > 0.0;
            active[2 * k + 1] = active[2 * k];
            active[2 * n + k] = i_has(g, k, 0) && (self.east_weight[k] > 0.0 || self.east_plaquettes[k] > 0);
            active[3 * n + k] = i_has(g, k, 1) && (self.north_weight[k] > 0.0 || self.north_plaquettes[k] > 0);
        }
        Preconditioner {
            grid: g,
            psi: precond::NeumannInverse::new(g.nx, g.ny, 2.0, self.kappa * self.kappa * h2),
            east: precond::NeumannInverse::new(g.nx - 1, g.ny, 2.0 * kh2, h2),
            north: precond::NeumannInverse::new(g.nx, g.ny - 1, 2.0 * kh2, h2),
            active,
        }
    }

    /// Minimizes `𝒢` from `start` until every residual is at most `tol`.
    pub fn minimize(&self, start: GLState, tol: f64) -> Result<GLRun> {
        self.check(&start);
        if !(tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {tol}")));
        }
        let mut state = start;
        self.project(&mut state)?;
        let precond = self.preconditioner();
        let mut x = self.pack(&state);
        let mut iterations = 0;
        let mut trace = Vec::new();
        let eval = |x: &[f64], g: &mut [f64]| self.total(&self.evaluate(x, Some(g)));
        loop {
            let mut last = Residuals { psi: f64::INFINITY, potential: f64::INFINITY, boundary: f64::INFINITY };
            let out = descent::nlcg(&mut x, eval, |g: &[f64], z: &mut [f64]| precond.apply(g, z), BLOCK, |_, g| {
                last = self.residuals_from_gradient(g);
                last.max() <= tol
            });
            iterations += out.iterations;
            self.unpack(&x, &mut state);
            self.project(&mut state)?;
            x = self.pack(&state);
            trace.push(TracePoint { iterations, energy: out.energy, residual: last.max() });
            if out.converged {
                break;
            }
            if iterations >= MAX_ITER || (out.stalled && out.iterations == 0) || !out.energy.is_finite() {
                return Err(Error::DescentFailed { iterations, residual: last.max(), trace: format_trace(&trace) });
            }
        }
        let residuals = self.residuals(&state);
        let parts = self.energy_parts(&state);
        Ok(GLRun { energy: self.total(&parts), parts, residuals, iterations, state })
    }

    /// Checks of the a priori bounds satisfied by minimizers.
    pub fn bounds(&self, run: &GLRun) -> Bounds {
        let psi_l2 = run.parts.mass.sqrt();
        Bounds {
            psi_linf: run.state.sup_norm(),
            curl_l2: run.parts.field.sqrt(),
            curl_bound: psi_l2 / self.h_field,
            kinetic_l2: run.parts.kinetic.sqrt(),
            kinetic_bound: self.kappa * self.area.sqrt(),
        }
    }
}

struct Preconditioner {
    grid: Grid,
    psi: precond::NeumannInverse,
    east: precond::NeumannInverse,
    north: precond::NeumannInverse,
    active: Vec<bool>,
}

impl Preconditioner {
    fn apply(&self, g: &[f64], z: &mut [f64]) {
        let grid = self.grid;
        let (nx, ny, n) = (grid.nx, grid.ny, grid.len());
        for part in 0..2 {
            let mut buf: Vec<f64> = (0..n).map(|k| g[2 * k + part]).collect();
            self.psi.apply(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                z[2 * k + part] = *v;
            }
        }
        let mut buf: Vec<f64> = (0..ny).flat_map(|j| (0..nx - 1).map(move |i| (i, j))).map(|(i, j)| g[2 * n + grid.index(i, j)]).collect();
        self.east.apply(&mut buf);
        z[2 * n..3 * n].iter_mut().for_each(|v| *v = 0.0);
        for j in 0..ny {
            for i in 0..nx - 1 {
                z[2 * n + grid.index(i, j)] = buf[j * (nx - 1) + i];
            }
        }
        let mut buf: Vec<f64> = g[3 * n..3 * n + nx * (ny - 1)].to_vec();
        self.north.apply(&mut buf);
        z[3 * n..].iter_mut().for_each(|v| *v = 0.0);
        z[3 * n..3 * n + nx * (ny - 1)].copy_from_slice(&buf);
        for (v, &a) in z.iter_mut().zip(&self.active) {
            if !a {
                *v = 0.0;
            }
        }
    }
}

fn i_has(g: Grid, k: usize, axis: usize) -> bool {
    let (i, j) = g.coords(k);
    if axis == 0 { i + 1 < g.nx } else { j + 1 < g.ny }
}

fn format_trace(trace: &[TracePoint]) -> String {
    let tail = &trace[trace.len().saturating_sub(5)..];
    tail.iter().map(|t| format!("it {} E {:.6e} r {:.2e}", t.iterations, t.energy, t.residual)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
}

/// A converged minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLRun {
    pub energy: f64,
    pub parts: EnergyParts,
    pub residuals: Residuals,
    pub iterations: usize,
    #[serde(skip_serializing)]
    pub state: GLState,
}

/// `‖ψ‖_∞`, `‖curl(𝒜 − F)‖ ≤ ‖ψ‖/H` and `‖(∇ − iκH𝒜)ψ‖ ≤ κ|Ω|^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub psi_linf: f64,
    pub curl_l2: f64,
    pub curl_bound: f64,
    pub kinetic_l2: f64,
    pub kinetic_bound: f64,
}

impl Bounds {
    pub fn hold(&self, tol: f64) -> bool {
        self.psi_linf <= 1.0 + tol && self.curl_l2 <= self.curl_bound * (1.0 + tol) && self.kinetic_l2 <= self.kinetic_bound * (1.0 + tol)
    }
}

/// `𝒢(ψ, 𝒜)` for a state of `problem`.
pub fn gl_energy(state: &GLState, problem: &GLProblem) -> f64 {
    problem.energy(state)
}

pub fn euler_lagrange_residual(state: &GLState, problem: &GLProblem) -> Residuals {
    problem.residuals(state)
}

/// Minimizes `𝒢` for the field `B` on `domain` starting from `ψ ≡ 1`,
/// `𝒜 = F`.
pub fn minimize_gl<F: ScalarFunction + ?Sized>(kappa: f64, h_field: f64, b: &F, domain: &Domain, tol: f64) -> Result<(GLProblem, GLRun)> {
    let problem = GLProblem::new(kappa, h_field, b, domain)?;
    let run = problem.minimize(problem.constant_state(Complex64::new(1.0, 0.0)), tol)?;
    Ok((problem, run))
}

#[cfg(test)]
mod tests;
