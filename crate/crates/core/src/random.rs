//! Seeded random trigonometric fields with slowly decaying spectra.
//!
//! `B(x) = offset + Σ_k a_k cos(k·x) + b_k sin(k·x)` over integer wave vectors
//! `k` in a half plane with `0 < |k| ≤ K`. The coefficients are independent
//! normals scaled by `(1 + |k|)^{-(1+ε)}`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Point};
use crate::grid::{Grid, ScalarField, ScalarFunction};

pub const DEFAULT_CUTOFF: i32 = 32;
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [i32; 2],
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    pub seed: u64,
    pub cutoff: i32,
    pub epsilon: f64,
    pub offset: f64,
    pub modes: Vec<Mode>,
}

impl FourierField {
    pub fn new(seed: u64, cutoff: i32, epsilon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for k1 in 0..=cutoff {
            for k2 in -cutoff..=cutoff {
                // Half plane: k1 > 0, or k1 = 0 and k2 > 0.
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
                if norm > cutoff as f64 {
                    continue;
                }
                let scale = (1.0 + norm).powf(-(1.0 + epsilon));
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                modes.push(Mode { k: [k1, k2], a: scale * a, b: scale * b });
            }
        }
        FourierField { seed, cutoff, epsilon, offset: 0.0, modes }
    }

    /// Field with the default cutoff `K = 32` and `ε = 0.1`.
    pub fn with_seed(seed: u64) -> Self {
        FourierField::new(seed, DEFAULT_CUTOFF, DEFAULT_EPSILON)
    }

    /// Shifts the field so that `B ≥ c` on `bbox`.
    ///
    /// The minimum over a grid of spacing `h` underestimates the true minimum
    /// by at most `h² · max|∇²B| / 4`, which is added as a safety margin.
    pub fn with_lower_bound(mut self, c: f64, bbox: &BBox) -> Self {
        self.offset = 0.0;
        let h = 0.125 / self.cutoff.max(1) as f64;
        let nx = (bbox.width() / h).ceil() as usize + 1;
        let ny = (bbox.height() / h).ceil() as usize + 1;
        let grid = Grid::new(nx.max(2), ny.max(2), bbox.x_min, bbox.y_min, h);
        let min = self.sample(grid).values.iter().copied().fold(f64::INFINITY, f64::min);
        let curvature: f64 = self.modes.iter().map(|m| (m.a.abs() + m.b.abs()) * self.k2(m)).sum();
        self.offset = c - min + 0.25 * h * h * curvature;
        self
    }

    fn k2(&self, m: &Mode) -> f64 {
        (m.k[0] * m.k[0] + m.k[1] * m.k[1]) as f64
    }

    /// Exact gradient.
    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        for m in &self.modes {
            let t = m.k[0] as f64 * p[0] + m.k[1] as f64 * p[1];
            let d = -m.a * t.sin() + m.b * t.cos();
            g[0] += d * m.k[0] as f64;
            g[1] += d * m.k[1] as f64;
        }
        g
    }

    /// Mean of `|∇B|²` over the common period `[0, 2π]²`.
    pub fn mean_gradient_sq(&self) -> f64 {
        self.modes.iter().map(|m| 0.5 * (m.a * m.a + m.b * m.b) * self.k2(m)).sum()
    }

    /// Samples on every node of `grid` by separating `e^{ik·x} = e^{ik₁x} e^{ik₂y}`.
    pub fn sample(&self, grid: Grid) -> ScalarField {
        let kmax = self.cutoff;
        let width = (2 * kmax + 1) as usize;
        // C[k1][k2 + K] = a − i b so that Re(C e^{iθ}) = a cos θ + b sin θ.
        let mut coef = vec![Complex64::new(0.0, 0.0); (kmax as usize + 1) * width];
        for m in &self.modes {
            coef[m.k[0] as usize * width + (m.k[1] + kmax) as usize] += Complex64::new(m.a, -m.b);
        }
        let phases = |x: f64, n: usize, lo: i32| -> Vec<Complex64> {
            (0..n).map(|q| Complex64::from_polar(1.0, (lo + q as i32) as f64 * x)).collect()
        };
        let mut values = vec![self.offset; grid.len()];
        let k1n = kmax as usize + 1;
        let ex: Vec<Vec<Complex64>> = (0..grid.nx).map(|i| phases(grid.node(i, 0)[0], k1n, 0)).collect();
        let mut inner = vec![Complex64::new(0.0, 0.0); k1n];
        for j in 0..grid.ny {
            let ey = phases(grid.node(0, j)[1], width, -kmax);
            for (k1, slot) in inner.iter_mut().enumerate() {
                let row = &coef[k1 * width..(k1 + 1) * width];
                *slot = row.iter().zip(&ey).map(|(c, e)| c * e).sum();
            }
            for (i, e) in ex.iter().enumerate() {
                let s: f64 = inner.iter().zip(e).map(|(c, e)| c.re * e.re - c.im * e.im).sum();
                values[grid.index(i, j)] += s;
            }
        }
        ScalarField::new(grid, values, vec![true; grid.len()])
    }
}

impl ScalarFunction for FourierField {
    fn eval(&self, p: Point) -> Option<f64> {
        let mut v = self.offset;
        for m in &self.modes {
            let t = m.k[0] as f64 * p[0] + m.k[1] as f64 * p[1];
            v += m.a * t.cos() + m.b * t.sin();
        }
        Some(v)
    }

    fn sample_values(&self, grid: &Grid) -> crate::error::Result<Vec<f64>> {
        Ok(self.sample(*grid).values)
    }
}
