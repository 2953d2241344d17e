//! Uniform Cartesian grids and grid-sampled fields.
//!
//! Nodes are `(x0 + i h, y0 + j h)` for `i < nx`, `j < ny`, stored row-major
//! (`j * nx + i`). Off-node values use bilinear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Cell, Domain, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, h: f64) -> Self {
        assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 nodes");
        assert!(h > 0.0);
        Grid { nx, ny, x0, y0, h }
    }

    /// Grid of spacing `domain.h` covering `domain.bbox`, aligned so that the
    /// outer shape's lower-left corner (rectangles) or center (disks) is a node.
    pub fn for_domain(domain: &Domain) -> Self {
        let h = domain.h;
        let anchor = match domain.outer {
            crate::geometry::Shape::Rect { x_min, y_min, .. } => [x_min, y_min],
            crate::geometry::Shape::Disk { center, .. } => center,
        };
        let b = domain.bbox;
        let i_lo = ((b.x_min - anchor[0]) / h).floor() as i64;
        let i_hi = ((b.x_max - anchor[0]) / h).ceil() as i64;
        let j_lo = ((b.y_min - anchor[1]) / h).floor() as i64;
        let j_hi = ((b.y_max - anchor[1]) / h).ceil() as i64;
        Grid::new(
            (i_hi - i_lo + 1) as usize,
            (j_hi - j_lo + 1) as usize,
            anchor[0] + i_lo as f64 * h,
            anchor[1] + j_lo as f64 * h,
            h,
        )
    }

    /// Cell-centered grid on `cell`: `n` nodes per side at the midpoints of an
    /// `n × n` subdivision of the cell's bounding square, plus `ghost` extra
    /// layers on every side (for centered differences and interpolation).
    pub fn cell_centered(cell: &Cell, n: usize, ghost: usize) -> Self {
        let b = cell.bbox();
        let h = b.width() / n as f64;
        let g = ghost as f64;
        Grid::new(n + 2 * ghost, n + 2 * ghost, b.x_min + (0.5 - g) * h, b.y_min + (0.5 - g) * h, h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h]
    }

    #[inline]
    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        self.node(i, j)
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.x0,
            self.x0 + (self.nx - 1) as f64 * self.h,
            self.y0,
            self.y0 + (self.ny - 1) as f64 * self.h,
        )
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    /// Cell index and local coordinates for bilinear interpolation.
    #[inline]
    pub fn locate(&self, p: Point) -> Option<(usize, usize, f64, f64)> {
        let eps = 1e-9;
        let u = (p[0] - self.x0) / self.h;
        let v = (p[1] - self.y0) / self.h;
        let umax = (self.nx - 1) as f64;
        let vmax = (self.ny - 1) as f64;
        if !(u >= -eps && v >= -eps && u <= umax + eps && v <= vmax + eps) {
            return None;
        }
        let i = (u.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (v.floor().max(0.0) as usize).min(self.ny - 2);
        Some((i, j, u - i as f64, v - j as f64))
    }

    /// Mask of nodes inside the open domain.
    pub fn domain_mask(&self, domain: &Domain) -> Vec<bool> {
        self.points().map(|p| domain.contains(p)).collect()
    }

    pub fn cell_mask(&self, cell: &Cell) -> Vec<bool> {
        self.points().map(|p| cell.contains(p)).collect()
    }
}

/// Anything that can be evaluated as a real function of the plane.
pub trait ScalarFunction: Sync {
    /// Value at `p`, or `None` outside the support where the function is known.
    fn eval(&self, p: Point) -> Option<f64>;

    /// Values on every node of `grid`, in index order.
    fn sample_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        grid.points().map(|p| self.eval(p).ok_or(Error::FieldSupport { x: p[0], y: p[1] })).collect()
    }

    /// `∫₀¹ s f(origin + s r) ds`.
    ///
    /// The default uses composite Simpson on 64 intervals, doubled until the
    /// relative change drops below `1e-8`.
    fn ray_moment(&self, origin: Point, r: [f64; 2]) -> Result<f64> {
        let f = |s: f64| -> Result<f64> {
            let p = [origin[0] + s * r[0], origin[1] + s * r[1]];
            self.eval(p).map(|v| s * v).ok_or(Error::FieldSupport { x: p[0], y: p[1] })
        };
        simpson_doubling(f, 64, 1e-8, 1 << 16)
    }
}

impl<F> ScalarFunction for F
where
    F: Fn(Point) -> f64 + Sync,
{
    fn eval(&self, p: Point) -> Option<f64> {
        Some(self(p))
    }
}

/// Vector-valued function of the plane (magnetic potentials).
pub trait VectorFunction: Sync {
    fn eval_vec(&self, p: Point) -> Option<[f64; 2]>;
}

impl<F> VectorFunction for F
where
    F: Fn(Point) -> [f64; 2] + Sync,
{
    fn eval_vec(&self, p: Point) -> Option<[f64; 2]> {
        Some(self(p))
    }
}

/// Composite Simpson on `[0, 1]`, doubling the number of intervals until the
/// relative change is below `rtol`.
pub fn simpson_doubling<F>(f: F, n0: usize, rtol: f64, n_max: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let n0 = n0.max(2) & !1;
    let mut n = n0;
    let h = 1.0 / n as f64;
    let mut ends = f(0.0)? + f(1.0)?;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..n {
        let v = f(k as f64 * h)?;
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let mut prev = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
    loop {
        if n >= n_max {
            return Ok(prev);
        }
        // The old nodes all become even nodes of the refined rule.
        even += odd;
        n *= 2;
        let h = 1.0 / n as f64;
        odd = 0.0;
        for k in (1..n).step_by(2) {
            odd += f(k as f64 * h)?;
        }
        let next = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
        if (next - prev).abs() <= rtol * next.abs().max(f64::MIN_POSITIVE) || next == prev {
            return Ok(next);
        }
        prev = next;
        ends += 0.0;
    }
}

/// Grid-sampled real function with an "inside" mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, mask: Vec<bool>) -> Self {
        assert_eq!(values.len(), grid.len());
        assert_eq!(mask.len(), grid.len());
        ScalarField { grid, values, mask }
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField::new(grid, vec![0.0; grid.len()], vec![true; grid.len()])
    }

    /// Samples `f` at every node; all nodes are marked inside.
    pub fn sample<F: ScalarFunction + ?Sized>(grid: Grid, f: &F) -> Result<Self> {
        Ok(ScalarField::new(grid, f.sample_values(&grid)?, vec![true; grid.len()]))
    }

    /// Samples `f` on the grid of `domain`; the mask marks nodes inside `Ω`.
    pub fn sample_on_domain<F: ScalarFunction + ?Sized>(domain: &Domain, f: &F) -> Result<Self> {
        let grid = Grid::for_domain(domain);
        let mut field = ScalarField::sample(grid, f)?;
        field.mask = grid.domain_mask(domain);
        Ok(field)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.grid.len());
        self.mask = mask;
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear interpolation.
    #[inline]
    pub fn interpolate(&self, p: Point) -> Option<f64> {
        let (i, j, fx, fy) = self.grid.locate(p)?;
        let g = &self.grid;
        let v00 = self.values[g.index(i, j)];
        let v10 = self.values[g.index(i + 1, j)];
        let v01 = self.values[g.index(i, j + 1)];
        let v11 = self.values[g.index(i + 1, j + 1)];
        Some((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `∫ f` over masked nodes (node quadrature, weight `h²`).
    pub fn integral(&self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        self.values.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>() * h2
    }

    pub fn norm_l2(&self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        (self.values.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(v, _)| v * v).sum::<f64>() * h2).sqrt()
    }

    /// Centered-difference gradient at interior node `(i, j)`.
    #[inline]
    pub fn gradient_at(&self, i: usize, j: usize) -> Option<[f64; 2]> {
        let g = &self.grid;
        if i == 0 || j == 0 || i + 1 >= g.nx || j + 1 >= g.ny {
            return None;
        }
        let inv = 0.5 / g.h;
        Some([
            (self.at(i + 1, j) - self.at(i - 1, j)) * inv,
            (self.at(i, j + 1) - self.at(i, j - 1)) * inv,
        ])
    }

    /// `‖∇f‖²_{L²}` over masked nodes restricted to `keep`, by centered differences.
    pub fn gradient_norm_sq_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                if !self.mask[k] || !keep(k) {
                    continue;
                }
                if let Some(d) = self.gradient_at(i, j) {
                    acc += d[0] * d[0] + d[1] * d[1];
                }
            }
        }
        acc * g.h * g.h
    }

    /// `|f|_{H¹}` seminorm over the mask.
    pub fn norm_h1_seminorm(&self) -> f64 {
        self.gradient_norm_sq_where(|_| true).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect(), self.mask.clone())
    }
}

impl ScalarFunction for ScalarField {
    fn eval(&self, p: Point) -> Option<f64> {
        self.interpolate(p)
    }

    /// Exact integral of `s ↦ s·f(origin + s r)` for the bilinear interpolant:
    /// the ray is split at grid lines, where the integrand is a cubic in `s`
    /// and Simpson's rule is exact.
    fn ray_moment(&self, origin: Point, r: [f64; 2]) -> Result<f64> {
        let g = &self.grid;
        let end = [origin[0] + r[0], origin[1] + r[1]];
        for p in [origin, end] {
            if g.locate(p).is_none() {
                return Err(Error::FieldSupport { x: p[0], y: p[1] });
            }
        }
        let mut breaks = Vec::with_capacity(16);
        breaks.push(0.0);
        push_crossings(&mut breaks, origin[0], r[0], g.x0, g.h);
        push_crossings(&mut breaks, origin[1], r[1], g.y0, g.h);
        breaks.push(1.0);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let eval = |s: f64| -> f64 {
            let p = [origin[0] + s * r[0], origin[1] + s * r[1]];
            // Endpoints were checked and the segment is convex-contained in the box.
            s * self.interpolate(p).unwrap_or(0.0)
        };
        let mut acc = 0.0;
        let mut f_prev = eval(0.0);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-15 {
                continue;
            }
            let fm = eval(0.5 * (a + b));
            let fb = eval(b);
            acc += (b - a) / 6.0 * (f_prev + 4.0 * fm + fb);
            f_prev = fb;
        }
        Ok(acc)
    }
}

fn push_crossings(out: &mut Vec<f64>, start: f64, delta: f64, origin: f64, h: f64) {
    if delta == 0.0 {
        return;
    }
    let u0 = (start - origin) / h;
    let u1 = (start + delta - origin) / h;
    let (lo, hi) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
    let mut k = lo.floor() + 1.0;
    while k < hi {
        let s = (k - u0) / (u1 - u0);
        if s > 0.0 && s < 1.0 {
            out.push(s);
        }
        k += 1.0;
    }
}

/// Grid-sampled vector field `(A₁, A₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Self {
        assert_eq!(values.len(), grid.len());
        VectorField { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField::new(grid, vec![[0.0; 2]; grid.len()])
    }

    pub fn sample<F: VectorFunction + ?Sized>(grid: Grid, f: &F) -> Result<Self> {
        let values = grid
            .points()
            .map(|p| f.eval_vec(p).ok_or(Error::FieldSupport { x: p[0], y: p[1] }))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField::new(grid, values))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.grid.index(i, j)]
    }

    pub fn interpolate(&self, p: Point) -> Option<[f64; 2]> {
        let (i, j, fx, fy) = self.grid.locate(p)?;
        let g = &self.grid;
        let w = [
            ((1.0 - fx) * (1.0 - fy), g.index(i, j)),
            (fx * (1.0 - fy), g.index(i + 1, j)),
            ((1.0 - fx) * fy, g.index(i, j + 1)),
            (fx * fy, g.index(i + 1, j + 1)),
        ];
        let mut out = [0.0; 2];
        for (wt, k) in w {
            out[0] += wt * self.values[k][0];
            out[1] += wt * self.values[k][1];
        }
        Some(out)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.grid, other.grid);
        VectorField::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        )
    }

    /// `‖A‖_{L²}` over nodes where `mask` holds.
    pub fn norm_l2_masked(&self, mask: &[bool]) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        (self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a[0] * a[0] + a[1] * a[1])
            .sum::<f64>()
            * h2)
            .sqrt()
    }

    /// Discrete curl `∂₁A₂ − ∂₂A₁` by centered differences; boundary nodes are
    /// left at zero and masked out.
    pub fn curl_of(&self) -> ScalarField {
        self.centered(|dx, dy| dx[1] - dy[0])
    }

    /// Discrete divergence `∂₁A₁ + ∂₂A₂` by centered differences.
    pub fn div_of(&self) -> ScalarField {
        self.centered(|dx, dy| dx[0] + dy[1])
    }

    fn centered(&self, op: impl Fn([f64; 2], [f64; 2]) -> f64) -> ScalarField {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        let mut mask = vec![false; g.len()];
        let inv = 0.5 / g.h;
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let (e, w, n, s) = (self.at(i + 1, j), self.at(i - 1, j), self.at(i, j + 1), self.at(i, j - 1));
                let dx = [(e[0] - w[0]) * inv, (e[1] - w[1]) * inv];
                let dy = [(n[0] - s[0]) * inv, (n[1] - s[1]) * inv];
                let k = g.index(i, j);
                values[k] = op(dx, dy);
                mask[k] = true;
            }
        }
        ScalarField::new(g, values, mask)
    }
}

impl VectorFunction for VectorField {
    fn eval_vec(&self, p: Point) -> Option<[f64; 2]> {
        self.interpolate(p)
    }
}
