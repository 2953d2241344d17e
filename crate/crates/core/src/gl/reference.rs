//! The divergence-free reference potential `F` with `curl F = B` in `Ω̃` and
//! `ν·F = 0` on `∂Ω̃`.
//!
//! `F = (∂₂φ, −∂₁φ)` for the stream function solving `−Δφ = B`, `φ = 0` on
//! `∂Ω̃`. `φ` lives at plaquette centers (the dual grid), so `F` is naturally
//! an edge field and its discrete divergence at interior nodes vanishes
//! identically. Dual nodes next to a curved boundary use the Shortley–Weller
//! stencil (the boundary value zero sits at fraction `θ` of the link), and
//! edges crossing the boundary take the slope of the same one-sided quadratic,
//! so `curl F = B` holds on every plaquette centred in `Ω̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::grid::{Grid, ScalarFunction, VectorField, VectorFunction};
use crate::linalg::bicgstab;

const THETA_FLOOR: f64 = 1e-6;
/// Relative residual of the Poisson solve.
pub const POISSON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePotential {
    /// Primal node grid.
    pub grid: Grid,
    /// Plaquette-center grid.
    pub dual: Grid,
    /// `φ` on the dual grid, zero outside `Ω̃`.
    pub stream: Vec<f64>,
    /// Dual node inside `Ω̃`.
    pub inside: Vec<bool>,
    /// `F·e₁` at the midpoint of edge `(i, j) → (i+1, j)`.
    pub east: Vec<f64>,
    /// `F·e₂` at the midpoint of edge `(i, j) → (i, j+1)`.
    pub north: Vec<f64>,
}

/// Solves for `F` on the grid of `Ω̃ = domain.filled()`.
pub fn build_reference_potential<F: ScalarFunction + ?Sized>(b: &F, domain: &Domain) -> Result<ReferencePotential> {
    let filled = domain.filled();
    let grid = Grid::for_domain(&filled);
    build_reference_potential_on(b, &filled, grid)
}

pub fn build_reference_potential_on<F: ScalarFunction + ?Sized>(b: &F, filled: &Domain, grid: Grid) -> Result<ReferencePotential> {
    if !filled.is_simply_connected() {
        return Err(Error::InvalidDomain("the reference potential needs a simply connected region".into()));
    }
    let h = grid.h;
    let dual = Grid::new(grid.nx - 1, grid.ny - 1, grid.x0 + 0.5 * h, grid.y0 + 0.5 * h, h);
    let inside: Vec<bool> = dual.points().map(|p| filled.contains(p)).collect();
    let mut unknown = vec![u32::MAX; dual.len()];
    let mut nodes = Vec::new();
    for (k, &inn) in inside.iter().enumerate() {
        if inn {
            unknown[k] = nodes.len() as u32;
            nodes.push(k);
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyRegion("no plaquette center inside the domain".into()));
    }
    let inv_h2 = 1.0 / (h * h);
    let mut diag = vec![0.0; nodes.len()];
    let mut links: Vec<[(u32, f64); 4]> = vec![[(u32::MAX, 0.0); 4]; nodes.len()];
    let mut rhs = vec![0.0; nodes.len()];
    for (r, &k) in nodes.iter().enumerate() {
        let p = dual.point(k);
        rhs[r] = b.eval(p).ok_or(Error::FieldSupport { x: p[0], y: p[1] })?;
        let nb = dual_neighbors(p, h);
        let arms = nb.map(|q| arm(filled, &dual, &inside, p, q));
        for axis in 0..2 {
            let (tp, qp) = arms[2 * axis];
            let (tm, qm) = arms[2 * axis + 1];
            let s = tp + tm;
            diag[r] += 2.0 * inv_h2 / (tp * tm);
            if let Some(q) = qp {
                links[r][2 * axis] = (unknown[q], 2.0 * inv_h2 / (tp * s));
            }
            if let Some(q) = qm {
                links[r][2 * axis + 1] = (unknown[q], 2.0 * inv_h2 / (tm * s));
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for r in 0..x.len() {
            let mut v = diag[r] * x[r];
            for &(c, w) in &links[r] {
                if c != u32::MAX {
                    v -= w * x[c as usize];
                }
            }
            y[r] = v;
        }
    };
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; nodes.len()];
    bicgstab(apply, &inv_diag, &rhs, &mut x, POISSON_TOL, 10 * nodes.len() + 100)?;
    let mut stream = vec![0.0; dual.len()];
    for (r, &k) in nodes.iter().enumerate() {
        stream[k] = x[r];
    }
    let mut f = ReferencePotential { grid, dual, stream, inside, east: vec![0.0; grid.len()], north: vec![0.0; grid.len()] };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.index(i, j);
            let c = grid.node(i, j);
            if i + 1 < grid.nx {
                // Dual nodes above and below the edge midpoint.
                let lo = [c[0] + 0.5 * h, c[1] - 0.5 * h];
                let hi = [c[0] + 0.5 * h, c[1] + 0.5 * h];
                f.east[k] = f.difference(filled, lo, hi) / h;
            }
            if j + 1 < grid.ny {
                let left = [c[0] - 0.5 * h, c[1] + 0.5 * h];
                let right = [c[0] + 0.5 * h, c[1] + 0.5 * h];
                f.north[k] = -f.difference(filled, left, right) / h;
            }
        }
    }
    Ok(f)
}

/// Link from dual node `p` toward its neighbour `q`: the fraction of the link
/// inside `Ω̃` and, when the whole link is inside, the neighbour's dual index.
fn arm(filled: &Domain, dual: &Grid, inside: &[bool], p: Point, q: Point) -> (f64, Option<usize>) {
    let qk = dual_index(dual, q).filter(|&k| inside[k]);
    match (filled.exit_fraction(p, q), qk) {
        (Some(t), _) if t < 1.0 || qk.is_none() => (t.max(THETA_FLOOR), None),
        (_, Some(k)) => (1.0, Some(k)),
        _ => (1.0, None),
    }
}

fn dual_neighbors(p: Point, h: f64) -> [Point; 4] {
    [[p[0] + h, p[1]], [p[0] - h, p[1]], [p[0], p[1] + h], [p[0], p[1] - h]]
}

fn dual_index(dual: &Grid, p: Point) -> Option<usize> {
    let i = ((p[0] - dual.x0) / dual.h).round();
    let j = ((p[1] - dual.y0) / dual.h).round();
    if i < 0.0 || j < 0.0 || i >= dual.nx as f64 || j >= dual.ny as f64 {
        return None;
    }
    Some(dual.index(i as usize, j as usize))
}

impl ReferencePotential {
    fn value(&self, p: Point) -> Option<f64> {
        dual_index(&self.dual, p).filter(|&k| self.inside[k]).map(|k| self.stream[k])
    }

    /// `φ(q) − φ(p)`. When one of the two lies outside `Ω̃` this is `h` times
    /// the slope, at the link midpoint, of the quadratic through the inside
    /// node, its opposite neighbour and the boundary zero.
    fn difference(&self, filled: &Domain, p: Point, q: Point) -> f64 {
        match (self.value(p), self.value(q)) {
            (Some(a), Some(b)) => b - a,
            (Some(u), None) => {
                let h = self.grid.h;
                let back = [2.0 * p[0] - q[0], 2.0 * p[1] - q[1]];
                let (tf, _) = arm(filled, &self.dual, &self.inside, p, q);
                let (tb, kb) = arm(filled, &self.dual, &self.inside, p, back);
                let ul = kb.map_or(0.0, |k| self.stream[k]);
                let (a, b) = (tb * h, tf * h);
                let fwd = -u / b;
                let bwd = (u - ul) / a;
                let curv = 2.0 * (fwd - bwd) / (a + b);
                h * (fwd + curv * (0.5 * h - 0.5 * b))
            }
            (None, Some(_)) => -self.difference(filled, q, p),
            (None, None) => 0.0,
        }
    }

    /// Whether both dual nodes flanking the edge lie inside `Ω̃`.
    pub fn edge_interior(&self, i: usize, j: usize, axis: usize) -> bool {
        let d = &self.dual;
        let at = |a: isize, b: isize| a >= 0 && b >= 0 && (a as usize) < d.nx && (b as usize) < d.ny && self.inside[d.index(a as usize, b as usize)];
        let (i, j) = (i as isize, j as isize);
        match axis {
            0 => at(i, j - 1) && at(i, j),
            _ => at(i - 1, j) && at(i, j),
        }
    }

    /// Node values by averaging the adjacent edge values.
    pub fn to_vector_field(&self) -> VectorField {
        edge_to_nodes(self.grid, &self.east, &self.north)
    }

    /// `(Σ h² |F_e − A(mid)·e|²)^{1/2}` over edges whose flanking dual nodes
    /// both lie inside `Ω̃`.
    pub fn interior_l2_error(&self, exact: impl Fn(Point) -> [f64; 2]) -> f64 {
        let g = &self.grid;
        let h = g.h;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let c = g.node(i, j);
                if i + 1 < g.nx && self.edge_interior(i, j, 0) {
                    acc += h * h * (self.east[k] - exact([c[0] + 0.5 * h, c[1]])[0]).powi(2);
                }
                if j + 1 < g.ny && self.edge_interior(i, j, 1) {
                    acc += h * h * (self.north[k] - exact([c[0], c[1] + 0.5 * h])[1]).powi(2);
                }
            }
        }
        acc.sqrt()
    }

    /// Discrete divergence at node `(i, j)`: net edge flux over `h`.
    pub fn divergence(&self, i: usize, j: usize) -> f64 {
        edge_divergence(&self.grid, &self.east, &self.north, i, j)
    }

    /// Discrete curl on the plaquette with lower-left node `(i, j)`.
    pub fn curl(&self, i: usize, j: usize) -> f64 {
        edge_curl(&self.grid, &self.east, &self.north, i, j)
    }
}

/// An edge field read as a [`VectorFunction`]: at an edge midpoint it returns
/// the stored tangential value on that axis (so link phases reproduce the
/// edge values exactly); elsewhere it interpolates the node averages.
pub struct EdgeSampler<'a> {
    pub grid: Grid,
    pub east: &'a [f64],
    pub north: &'a [f64],
    nodes: VectorField,
}

impl<'a> EdgeSampler<'a> {
    pub fn new(grid: Grid, east: &'a [f64], north: &'a [f64]) -> Self {
        EdgeSampler { grid, east, north, nodes: edge_to_nodes(grid, east, north) }
    }
}

impl VectorFunction for EdgeSampler<'_> {
    fn eval_vec(&self, p: Point) -> Option<[f64; 2]> {
        let g = &self.grid;
        let fi = (p[0] - g.x0) / g.h;
        let fj = (p[1] - g.y0) / g.h;
        let near = |v: f64| (v - v.round()).abs() < 1e-9;
        let half = |v: f64| ((v - 0.5) - (v - 0.5).round()).abs() < 1e-9;
        if half(fi) && near(fj) {
            let (i, j) = ((fi - 0.5).round(), fj.round());
            if i >= 0.0 && j >= 0.0 && (i as usize) + 1 < g.nx && (j as usize) < g.ny {
                return Some([self.east[g.index(i as usize, j as usize)], 0.0]);
            }
        }
        if near(fi) && half(fj) {
            let (i, j) = (fi.round(), (fj - 0.5).round());
            if i >= 0.0 && j >= 0.0 && (i as usize) < g.nx && (j as usize) + 1 < g.ny {
                return Some([0.0, self.north[g.index(i as usize, j as usize)]]);
            }
        }
        self.nodes.interpolate(p)
    }
}

pub(crate) fn edge_divergence(g: &Grid, east: &[f64], north: &[f64], i: usize, j: usize) -> f64 {
    let k = g.index(i, j);
    let mut d = 0.0;
    if i + 1 < g.nx {
        d += east[k];
    }
    if i > 0 {
        d -= east[k - 1];
    }
    if j + 1 < g.ny {
        d += north[k];
    }
    if j > 0 {
        d -= north[k - g.nx];
    }
    d / g.h
}

pub(crate) fn edge_curl(g: &Grid, east: &[f64], north: &[f64], i: usize, j: usize) -> f64 {
    let k = g.index(i, j);
    (east[k] + north[k + 1] - east[k + g.nx] - north[k]) / g.h
}

pub(crate) fn edge_to_nodes(g: Grid, east: &[f64], north: &[f64]) -> VectorField {
    let mut values = vec![[0.0; 2]; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let mut sx = 0.0;
            let mut nx = 0.0;
            if i + 1 < g.nx {
                sx += east[k];
                nx += 1.0;
            }
            if i > 0 {
                sx += east[k - 1];
                nx += 1.0;
            }
            let mut sy = 0.0;
            let mut ny = 0.0;
            if j + 1 < g.ny {
                sy += north[k];
                ny += 1.0;
            }
            if j > 0 {
                sy += north[k - g.nx];
                ny += 1.0;
            }
            values[k] = [sx / nx, sy / ny];
        }
    }
    VectorField::new(g, values)
}
