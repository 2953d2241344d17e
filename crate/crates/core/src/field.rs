//! Magnetic potentials built from a field `B`, cell averages and gauge functions.
//!
//! Potentials are evaluated from the ray formula
//! `A(x) = 2 ∫₀¹ B(x₀ + s(x − x₀)) A₀(s(x − x₀)) ds`. Since `A₀` is linear the
//! integrand factors as `2 A₀(x − x₀) ∫₀¹ s B(x₀ + s(x − x₀)) ds`, so each node
//! costs one scalar ray moment.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, Point};
use crate::grid::{Grid, ScalarField, ScalarFunction, VectorField};

/// Default relative curl mismatch accepted by [`gauge_function`].
pub const GAUGE_TOL: f64 = 1e-2;

/// `A₀(x) = ½(−x₂, x₁)`, the potential of the unit field.
#[inline]
pub fn canonical_potential(x: Point) -> [f64; 2] {
    [-0.5 * x[1], 0.5 * x[0]]
}

/// Potential of `B` at `x`, integrated along the ray from `origin`.
pub fn potential_at<F: ScalarFunction + ?Sized>(b: &F, origin: Point, x: Point) -> Result<[f64; 2]> {
    let r = [x[0] - origin[0], x[1] - origin[1]];
    let m = b.ray_moment(origin, r)?;
    let a0 = canonical_potential(r);
    Ok([2.0 * m * a0[0], 2.0 * m * a0[1]])
}

fn potential_on_grid<F: ScalarFunction + ?Sized>(b: &F, origin: Point, grid: Grid) -> Result<VectorField> {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| potential_at(b, origin, grid.point(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField::new(grid, values))
}

/// `A(x) = 2∫₀¹ B(sx) A₀(sx) ds` at every node of `grid`.
pub fn potential_from_field<F: ScalarFunction + ?Sized>(b: &F, grid: Grid) -> Result<VectorField> {
    potential_on_grid(b, [0.0, 0.0], grid)
}

/// The potential `A_new` recentered at the cell center `x₀`.
pub fn recentered_potential<F: ScalarFunction + ?Sized>(b: &F, cell: &Cell, grid: Grid) -> Result<VectorField> {
    potential_on_grid(b, cell.center, grid)
}

/// `A_av(x) = b_av A₀(x − x₀)`.
#[inline]
pub fn averaged_potential_at(b_av: f64, center: Point, x: Point) -> [f64; 2] {
    let a = canonical_potential([x[0] - center[0], x[1] - center[1]]);
    [b_av * a[0], b_av * a[1]]
}

/// `A_av` sampled on `grid`.
pub fn averaged_potential(b_av: f64, cell: &Cell, grid: Grid) -> VectorField {
    let values = grid.points().map(|p| averaged_potential_at(b_av, cell.center, p)).collect();
    VectorField::new(grid, values)
}

/// `B` sampled at the midpoints of an `n × n` subdivision of a cell's
/// bounding square, with one ghost layer for differences. The mask marks
/// midpoints inside the cell.
#[derive(Debug, Clone)]
pub struct CellSample {
    pub cell: Cell,
    pub b: ScalarField,
}

impl CellSample {
    pub fn new<F: ScalarFunction + ?Sized>(b: &F, cell: &Cell, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "need at least 2 midpoints per side"));
        }
        let grid = Grid::cell_centered(cell, n, 1);
        let field = ScalarField::sample(grid, b)?;
        let mask = grid.cell_mask(cell);
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyRegion("cell contains no quadrature node".into()));
        }
        Ok(CellSample { cell: *cell, b: field.with_mask(mask) })
    }

    pub fn grid(&self) -> Grid {
        self.b.grid
    }

    /// Midpoint-rule `(1/|U|) ∫_U B`.
    pub fn average(&self) -> f64 {
        let (sum, count) = self
            .b
            .values
            .iter()
            .zip(&self.b.mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        sum / count as f64
    }

    /// `‖∇B‖²_{L²(U)}` by centered differences.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.b.gradient_norm_sq_where(|_| true)
    }
}

/// `(1/|U|) ∫_U B` by composite midpoint quadrature with `n` midpoints per side.
pub fn cell_average<F: ScalarFunction + ?Sized>(b: &F, cell: &Cell, n: usize) -> Result<f64> {
    Ok(CellSample::new(b, cell, n)?.average())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingGap {
    /// `∫_U |A_new − A_av|²`.
    pub lhs: f64,
    /// `8 δ⁴ ‖∇B‖²_{L²(U)}`.
    pub rhs: f64,
    /// `δ² ∫_U |B − B_av|²`.
    pub remark_bound: f64,
    pub delta: f64,
    pub b_av: f64,
}

/// Compares the recentered potential of `B` with the potential of its
/// average on a convex cell, using `n` quadrature midpoints per side.
pub fn averaging_gap<F: ScalarFunction + ?Sized>(b: &F, cell: &Cell, n: usize) -> Result<AveragingGap> {
    let sample = CellSample::new(b, cell, n)?;
    averaging_gap_sampled(&sample)
}

pub fn averaging_gap_sampled(sample: &CellSample) -> Result<AveragingGap> {
    let grid = sample.grid();
    let x0 = sample.cell.center;
    let b_av = sample.average();
    let h2 = grid.h * grid.h;
    let lhs = (0..grid.len())
        .into_par_iter()
        .filter(|&k| sample.b.mask[k])
        .map(|k| -> Result<f64> {
            let x = grid.point(k);
            let r = [x[0] - x0[0], x[1] - x0[1]];
            let m = sample.b.ray_moment(x0, r)?;
            // A_new − A_av = 2 A₀(x − x₀) (m − b_av/2)
            let f = 2.0 * (m - 0.5 * b_av);
            let a0 = canonical_potential(r);
            Ok(f * f * (a0[0] * a0[0] + a0[1] * a0[1]))
        })
        .sum::<Result<f64>>()?
        * h2;
    let delta = sample.cell.diameter();
    let rhs = 8.0 * delta.powi(4) * sample.gradient_norm_sq();
    let var = sample
        .b
        .values
        .iter()
        .zip(&sample.b.mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| (v - b_av) * (v - b_av))
        .sum::<f64>()
        * h2;
    Ok(AveragingGap { lhs, rhs, remark_bound: delta * delta * var, delta, b_av })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledGap {
    /// `s² ∫_U |B(s(x − x₀) + x₀) − B_av|²`.
    pub lhs: f64,
    /// `8 δ² ‖∇B‖²_{L²(U)}`.
    pub rhs: f64,
}

/// Gap between the dilated field `B(s(x − x₀) + x₀)` and the cell average.
pub fn rescaled_field_gap<F: ScalarFunction + ?Sized>(b: &F, cell: &Cell, s: f64, n: usize) -> Result<RescaledGap> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("must lie in (0, 1), got {s}")));
    }
    let sample = CellSample::new(b, cell, n)?;
    let grid = sample.grid();
    let x0 = cell.center;
    let b_av = sample.average();
    let mut acc = 0.0;
    for k in (0..grid.len()).filter(|&k| sample.b.mask[k]) {
        let x = grid.point(k);
        let y = [x0[0] + s * (x[0] - x0[0]), x0[1] + s * (x[1] - x0[1])];
        let v = sample.b.interpolate(y).ok_or(Error::FieldSupport { x: y[0], y: y[1] })?;
        acc += (v - b_av) * (v - b_av);
    }
    let lhs = s * s * acc * grid.h * grid.h;
    let delta = cell.diameter();
    Ok(RescaledGap { lhs, rhs: 8.0 * delta * delta * sample.gradient_norm_sq() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssInf {
    /// Minimum of averages over 4×4-node windows lying in the mask.
    pub value: f64,
    /// Raw minimum over masked nodes.
    pub node_min: f64,
}

/// Discrete essential infimum of a masked field.
pub fn ess_inf(b: &ScalarField) -> Result<EssInf> {
    let g = b.grid;
    let node_min = b
        .values
        .iter()
        .zip(&b.mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    if node_min == f64::INFINITY {
        return Err(Error::EmptyRegion("mask selects no node".into()));
    }
    const W: usize = 4;
    let mut value = f64::INFINITY;
    if g.nx >= W && g.ny >= W {
        for j in 0..=g.ny - W {
            'win: for i in 0..=g.nx - W {
                let mut s = 0.0;
                for dj in 0..W {
                    for di in 0..W {
                        let k = g.index(i + di, j + dj);
                        if !b.mask[k] {
                            continue 'win;
                        }
                        s += b.values[k];
                    }
                }
                value = value.min(s / (W * W) as f64);
            }
        }
    }
    if value == f64::INFINITY {
        value = node_min;
    }
    Ok(EssInf { value, node_min })
}

/// Returns `φ` with `∇φ ≈ A_ref − A` on the masked (connected) region.
///
/// Values are integrated with the trapezoid rule along L-shaped paths
/// (horizontal first, then vertical) from the masked node nearest to the
/// region's centroid; nodes unreachable that way are filled breadth-first.
/// One Jacobi sweep of the least-squares system follows. `φ` vanishes at the
/// start node.
pub fn gauge_function(a: &VectorField, a_ref: &VectorField, mask: &[bool], tol: f64) -> Result<ScalarField> {
    let g = a.grid;
    assert_eq!(a_ref.grid, g, "grids differ");
    assert_eq!(mask.len(), g.len());
    let d: Vec<[f64; 2]> = a_ref.values.iter().zip(&a.values).map(|(r, v)| [r[0] - v[0], r[1] - v[1]]).collect();

    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyRegion("gauge region is empty".into()));
    }
    let h = g.h;
    let d_norm = (mask.iter().zip(&d).filter(|(&m, _)| m).map(|(_, v)| v[0] * v[0] + v[1] * v[1]).sum::<f64>()
        * h
        * h)
        .sqrt();
    let mut phi = vec![0.0; g.len()];
    if d_norm == 0.0 {
        return Ok(ScalarField::new(g, phi, mask.to_vec()));
    }

    // Relative curl mismatch at fully interior nodes.
    let inside = |i: usize, j: usize| mask[g.index(i, j)];
    let mut curl_sq = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            if inside(i, j) && inside(i + 1, j) && inside(i - 1, j) && inside(i, j + 1) && inside(i, j - 1) {
                let c = (d[g.index(i + 1, j)][1] - d[g.index(i - 1, j)][1] - d[g.index(i, j + 1)][0]
                    + d[g.index(i, j - 1)][0])
                    / (2.0 * h);
                curl_sq += c * c;
            }
        }
    }
    let extent = (count as f64).sqrt() * h;
    let mismatch = (curl_sq * h * h).sqrt() * extent / d_norm;
    if mismatch > tol {
        return Err(Error::NotGaugeEquivalent { mismatch, tol });
    }

    // Trapezoid increment φ(q) − φ(p) along a grid edge.
    let inc = |p: usize, q: usize| -> f64 {
        let c = if p.abs_diff(q) == 1 { 0 } else { 1 };
        let sign = if q > p { 1.0 } else { -1.0 };
        sign * 0.5 * h * (d[p][c] + d[q][c])
    };

    let (cx, cy, _) = mask.iter().enumerate().filter(|(_, &m)| m).fold((0.0, 0.0, 0usize), |(x, y, n), (k, _)| {
        let p = g.point(k);
        (x + p[0], y + p[1], n + 1)
    });
    let centroid = [cx / count as f64, cy / count as f64];
    let start = (0..g.len())
        .filter(|&k| mask[k])
        .min_by(|&p, &q| {
            let dp = dist2(g.point(p), centroid);
            let dq = dist2(g.point(q), centroid);
            dp.partial_cmp(&dq).unwrap()
        })
        .unwrap();

    let mut done = vec![false; g.len()];
    let (si, sj) = g.coords(start);
    done[start] = true;
    // Along the start row.
    for dir in [-1i64, 1] {
        let mut i = si as i64;
        loop {
            let ni = i + dir;
            if ni < 0 || ni >= g.nx as i64 || !mask[g.index(ni as usize, sj)] {
                break;
            }
            let (p, q) = (g.index(i as usize, sj), g.index(ni as usize, sj));
            phi[q] = phi[p] + inc(p, q);
            done[q] = true;
            i = ni;
        }
    }
    // Up and down each reached column.
    for i in 0..g.nx {
        if !done[g.index(i, sj)] {
            continue;
        }
        for dir in [-1i64, 1] {
            let mut j = sj as i64;
            loop {
                let nj = j + dir;
                if nj < 0 || nj >= g.ny as i64 || !mask[g.index(i, nj as usize)] {
                    break;
                }
                let (p, q) = (g.index(i, j as usize), g.index(i, nj as usize));
                phi[q] = phi[p] + inc(p, q);
                done[q] = true;
                j = nj;
            }
        }
    }
    // Breadth-first fill of anything the L-paths missed.
    let mut queue: VecDeque<usize> = (0..g.len()).filter(|&k| done[k]).collect();
    while let Some(p) = queue.pop_front() {
        for q in neighbors(&g, p) {
            if mask[q] && !done[q] {
                phi[q] = phi[p] + inc(p, q);
                done[q] = true;
                queue.push_back(q);
            }
        }
    }

    // One Jacobi sweep: φ(p) ← mean over neighbours of φ(q) − (φ(q) − φ(p)).
    let smoothed: Vec<f64> = (0..g.len())
        .map(|p| {
            if !done[p] {
                return 0.0;
            }
            let (mut s, mut n) = (0.0, 0usize);
            for q in neighbors(&g, p) {
                if done[q] {
                    s += phi[q] - inc(p, q);
                    n += 1;
                }
            }
            if n == 0 {
                phi[p]
            } else {
                s / n as f64
            }
        })
        .collect();
    let shift = smoothed[start];
    let phi = smoothed.iter().zip(&done).map(|(v, &m)| if m { v - shift } else { 0.0 }).collect();
    let region = done;
    Ok(ScalarField::new(g, phi, region))
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn neighbors(g: &Grid, p: usize) -> impl Iterator<Item = usize> {
    let (i, j) = g.coords(p);
    let (nx, ny) = (g.nx, g.ny);
    let g = *g;
    [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
        let (a, b) = (i as i64 + di, j as i64 + dj);
        (a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny).then(|| g.index(a as usize, b as usize))
    })
}

/// `‖∇φ − D‖_{L²}` over edges inside the region, with `D = A_ref − A`
/// averaged to edge midpoints.
pub fn gauge_defect(phi: &ScalarField, a: &VectorField, a_ref: &VectorField) -> f64 {
    let g = phi.grid;
    let mut acc = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.index(i, j);
            if !phi.mask[p] {
                continue;
            }
            for (c, q) in [(0, (i + 1 < g.nx).then(|| g.index(i + 1, j))), (1, (j + 1 < g.ny).then(|| g.index(i, j + 1)))] {
                let Some(q) = q else { continue };
                if !phi.mask[q] {
                    continue;
                }
                let dm = 0.5 * ((a_ref.values[p][c] - a.values[p][c]) + (a_ref.values[q][c] - a.values[q][c]));
                let e = (phi.values[q] - phi.values[p]) / g.h - dm;
                acc += e * e;
            }
        }
    }
    (acc * g.h * g.h).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowGrowthRow {
    pub ell: f64,
    /// `sup_x |B_av^ℓ(x)|` over lattice squares inside the sampled region.
    pub sup_avg: f64,
    /// `sup_avg · ℓ^{2ζ}`.
    pub scaled: f64,
}

/// Tabulates `sup_x |B_av^ℓ(x)| ℓ^{2ζ}` over squares `Q_ℓ(ℓm, ℓn)` whose 4×4
/// midpoints all lie in the field's mask.
pub fn slow_growth_check(b: &ScalarField, zeta: f64, ells: &[f64]) -> Result<Vec<SlowGrowthRow>> {
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(Error::param("zeta", format!("must lie in (0, 1/2], got {zeta}")));
    }
    let bb = b.grid.bbox();
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        if !(ell > 0.0) {
            return Err(Error::param("ell", "cell sides must be positive"));
        }
        let m_lo = (bb.x_min / ell).ceil() as i64;
        let m_hi = (bb.x_max / ell).floor() as i64;
        let n_lo = (bb.y_min / ell).ceil() as i64;
        let n_hi = (bb.y_max / ell).floor() as i64;
        let mut sup: f64 = 0.0;
        let mut any = false;
        for n in n_lo..=n_hi {
            'cell: for m in m_lo..=m_hi {
                let c = [m as f64 * ell, n as f64 * ell];
                let mut s = 0.0;
                for a in 0..4 {
                    for q in 0..4 {
                        let p = [c[0] + (a as f64 - 1.5) * ell / 4.0, c[1] + (q as f64 - 1.5) * ell / 4.0];
                        let Some((i, j, _, _)) = b.grid.locate(p) else { continue 'cell };
                        let g = &b.grid;
                        let corners = [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)];
                        if corners.iter().any(|&k| !b.mask[k]) {
                            continue 'cell;
                        }
                        s += b.interpolate(p).unwrap();
                    }
                }
                any = true;
                sup = sup.max((s / 16.0).abs());
            }
        }
        if !any {
            return Err(Error::EmptyRegion(format!("no square of side {ell} fits in the sampled region")));
        }
        rows.push(SlowGrowthRow { ell, sup_avg: sup, scaled: sup * ell.powf(2.0 * zeta) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn canonical_examples() {
        assert_eq!(canonical_potential([1.0, 0.0]), [0.0, 0.5]);
        assert_eq!(canonical_potential([0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(canonical_potential([2.0, 2.0]), [-1.0, 1.0]);
    }

    #[test]
    fn constant_field_gives_canonical_potential() {
        let grid = Grid::new(9, 9, -1.0, -1.0, 0.25);
        let a = potential_from_field(&|_: Point| 1.0, grid).unwrap();
        for (k, v) in a.values.iter().enumerate() {
            let e = canonical_potential(grid.point(k));
            assert!((v[0] - e[0]).abs() < 1e-14 && (v[1] - e[1]).abs() < 1e-14);
        }
        let z = potential_from_field(&|_: Point| 0.0, grid).unwrap();
        assert!(z.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn linear_field_potential_closed_form() {
        // B = 1 + x₁ ⇒ A = (1 + 2x₁/3) A₀.
        let b = |p: Point| 1.0 + p[0];
        let a = potential_at(&b, [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!((a[0] + 5.0 / 6.0).abs() < 1e-10 && (a[1] - 5.0 / 6.0).abs() < 1e-10);
        // The same through a sampled field (bilinear interpolation is exact here).
        let grid = Grid::new(17, 17, -2.0, -2.0, 0.25);
        let field = ScalarField::sample(grid, &b).unwrap();
        let a = potential_at(&field, [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!((a[0] + 5.0 / 6.0).abs() < 1e-13 && (a[1] - 5.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn recentered_constant_field() {
        let cell = Cell::square([0.3, -0.2], 0.5);
        let grid = Grid::cell_centered(&cell, 8, 1);
        let a = recentered_potential(&|_: Point| 2.5, &cell, grid).unwrap();
        let av = averaged_potential(2.5, &cell, grid);
        for (x, y) in a.values.iter().zip(&av.values) {
            assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
        }
        let at_center = potential_at(&|_: Point| 2.5, cell.center, cell.center).unwrap();
        assert_eq!(at_center, [0.0, 0.0]);
    }

    #[test]
    fn averaged_potential_examples() {
        assert_eq!(averaged_potential_at(0.0, [0.0, 0.0], [0.3, 0.4]), [-0.0, 0.0]);
        assert_eq!(averaged_potential_at(2.0, [1.0, 1.0], [2.0, 1.0]), [0.0, 1.0]);
        let cell = Cell::square([0.0, 0.0], 1.0);
        let grid = Grid::new(6, 6, -0.5, -0.5, 0.2);
        let curl = averaged_potential(1.7, &cell, grid).curl_of();
        for (v, m) in curl.values.iter().zip(&curl.mask) {
            if *m {
                assert!((v - 1.7).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cell_average_examples() {
        let ell = 0.5;
        let cell = Cell::square([0.0, 0.0], ell);
        assert!((cell_average(&|p: Point| 1.0 + p[0], &cell, 16).unwrap() - 1.0).abs() < 1e-14);
        // Midpoint rule for x² on n cells: ℓ²/12 − ℓ²/(12 n²).
        let n = 64;
        let v = cell_average(&|p: Point| p[0] * p[0], &cell, n).unwrap();
        let exact = ell * ell / 12.0;
        assert!((v - exact).abs() <= exact / (n * n) as f64 + 1e-15);
        assert_eq!(cell_average(&|_: Point| 3.25, &cell, 7).unwrap(), 3.25);
    }

    #[test]
    fn averaging_gap_linear_closed_form() {
        let ell = 0.25;
        let cell = Cell::square([0.0, 0.0], ell);
        let gap = averaging_gap(&|p: Point| 1.0 + p[0], &cell, 128).unwrap();
        let exact = 7.0 * ell.powi(6) / 3240.0;
        assert!((gap.lhs / exact - 1.0).abs() < 1e-3, "{} vs {}", gap.lhs, exact);
        assert!((gap.rhs / (32.0 * ell.powi(6)) - 1.0).abs() < 1e-10);
        assert!((gap.remark_bound / (ell.powi(6) / 6.0) - 1.0).abs() < 1e-3);
        assert!(gap.lhs <= gap.remark_bound && gap.remark_bound <= gap.rhs);
    }

    #[test]
    fn averaging_gap_constant_is_zero() {
        let cell = Cell::disk([0.2, 0.1], 0.3);
        let gap = averaging_gap(&|_: Point| 1.75, &cell, 32).unwrap();
        assert!(gap.lhs <= 1e-20);
        assert_eq!(gap.rhs, 0.0);
    }

    #[test]
    fn rescaled_gap_linear() {
        let ell = 0.5;
        let cell = Cell::square([0.0, 0.0], ell);
        let b = |p: Point| 1.0 + p[0];
        let r = rescaled_field_gap(&b, &cell, 0.5, 128).unwrap();
        // s² ∫ (s x₁)² = s⁴ ℓ⁴ / 12, up to the midpoint-rule defect.
        let exact = ell.powi(4) / 192.0;
        assert!((r.lhs / exact - 1.0).abs() < 1e-3);
        assert!(r.lhs <= r.rhs);
        assert!(rescaled_field_gap(&b, &cell, 1.0, 8).is_err());
        let c = rescaled_field_gap(&|_: Point| 2.0, &cell, 0.3, 8).unwrap();
        assert_eq!(c.lhs, 0.0);
    }

    #[test]
    fn rescaled_gap_limit() {
        let cell = Cell::square([0.1, 0.0], 0.5);
        let b = |p: Point| (2.0 * p[0]).sin() + p[1] * p[1];
        let s = rescaled_field_gap(&b, &cell, 0.999, 64).unwrap();
        let sample = CellSample::new(&b, &cell, 64).unwrap();
        let av = sample.average();
        let var: f64 = sample
            .b
            .values
            .iter()
            .zip(&sample.b.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| (v - av).powi(2))
            .sum::<f64>()
            * sample.grid().h.powi(2);
        assert!((s.lhs / var - 1.0).abs() < 1e-2);
    }

    #[test]
    fn ess_inf_examples() {
        let d = Domain::disk([0.0, 0.0], 1.0, 1.0 / 64.0).unwrap();
        let f = ScalarField::sample_on_domain(&d, &|p: Point| 1.0 + p[0] * p[0] + p[1] * p[1]).unwrap();
        let e = ess_inf(&f).unwrap();
        assert!((e.value - 1.0).abs() < 1e-3 && e.node_min >= 1.0);

        let d = Domain::unit_square(1.0 / 128.0).unwrap();
        let f = ScalarField::sample_on_domain(&d, &|p: Point| 2.0 + p[0].sin()).unwrap();
        let e = ess_inf(&f).unwrap();
        assert!((e.value - 2.0).abs() < 0.02);

        let f = ScalarField::sample_on_domain(&d, &|_: Point| 0.7).unwrap();
        assert!((ess_inf(&f).unwrap().value - 0.7).abs() < 1e-15);

        let empty = f.clone().with_mask(vec![false; f.grid.len()]);
        assert!(ess_inf(&empty).is_err());
    }

    #[test]
    fn gauge_of_shifted_canonical() {
        let c = 1.5;
        let x0 = [0.3, -0.4];
        let grid = Grid::new(21, 21, -1.0, -1.0, 0.1);
        let a = VectorField::sample(grid, &|p: Point| {
            let v = canonical_potential(p);
            [c * v[0], c * v[1]]
        })
        .unwrap();
        let a_ref = VectorField::sample(grid, &|p: Point| averaged_potential_at(c, x0, p)).unwrap();
        let mask = vec![true; grid.len()];
        let phi = gauge_function(&a, &a_ref, &mask, GAUGE_TOL).unwrap();
        // φ = −c A₀(x₀)·x + const.
        let w = canonical_potential(x0);
        let k0 = grid.index(3, 17);
        let k1 = grid.index(15, 2);
        let lin = |p: Point| -c * (w[0] * p[0] + w[1] * p[1]);
        let d_phi = phi.values[k1] - phi.values[k0];
        let d_ref = lin(grid.point(k1)) - lin(grid.point(k0));
        assert!((d_phi - d_ref).abs() < 1e-12);
    }

    #[test]
    fn gauge_of_gradient_field() {
        let grid = Grid::new(41, 41, -1.0, -1.0, 0.05);
        let a = VectorField::sample(grid, &|p: Point| [p[1].sin(), p[0] * p[0]]).unwrap();
        let a_ref = VectorField::sample(grid, &|p: Point| [p[1].sin() + p[1], p[0] * p[0] + p[0]]).unwrap();
        // Disk-shaped region.
        let mask: Vec<bool> = grid.points().map(|p| p[0].hypot(p[1]) < 0.9).collect();
        let phi = gauge_function(&a, &a_ref, &mask, GAUGE_TOL).unwrap();
        let k0 = grid.index(20, 20);
        for k in (0..grid.len()).filter(|&k| mask[k]) {
            let p = grid.point(k);
            let q = grid.point(k0);
            assert!(((phi.values[k] - phi.values[k0]) - (p[0] * p[1] - q[0] * q[1])).abs() < 1e-12);
        }
        assert!(gauge_defect(&phi, &a, &a_ref) < 1e-12);
        let same = gauge_function(&a, &a, &mask, GAUGE_TOL).unwrap();
        assert!(same.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gauge_rejects_curl_mismatch() {
        let grid = Grid::new(21, 21, -1.0, -1.0, 0.1);
        let a = VectorField::zeros(grid);
        let a_ref = VectorField::sample(grid, &canonical_potential).unwrap();
        let mask = vec![true; grid.len()];
        assert!(matches!(gauge_function(&a, &a_ref, &mask, GAUGE_TOL), Err(Error::NotGaugeEquivalent { .. })));
    }

    #[test]
    fn slow_growth_bounded_and_zero() {
        let d = Domain::unit_square(1.0 / 256.0).unwrap();
        let f = ScalarField::sample_on_domain(&d, &|p: Point| 1.0 + 0.5 * (7.0 * p[0]).cos()).unwrap();
        let ells: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
        let rows = slow_growth_check(&f, 0.25, &ells).unwrap();
        for r in &rows {
            assert!(r.sup_avg <= 1.5 + 1e-12);
            assert!(r.scaled <= 1.5 * r.ell.sqrt() + 1e-12);
        }
        let z = ScalarField::sample_on_domain(&d, &|_: Point| 0.0).unwrap();
        assert!(slow_growth_check(&z, 0.5, &ells).unwrap().iter().all(|r| r.scaled == 0.0));
        assert!(slow_growth_check(&z, 0.0, &ells).is_err());
        assert!(slow_growth_check(&z, 0.6, &ells).is_err());
    }
}
