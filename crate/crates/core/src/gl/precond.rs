//! Fast inverses of shifted Neumann Laplacians on rectangular index grids,
//! used to precondition the Ginzburg-Landau descent.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

/// `(scale · (L + shift))⁻¹` for the unit-weight graph Laplacian `L` of an
/// `nx × ny` grid (reflecting ends), diagonalized by the DCT-II.
pub(crate) struct NeumannInverse {
    nx: usize,
    ny: usize,
    rows: Arc<dyn TransformType2And3<f64>>,
    cols: Arc<dyn TransformType2And3<f64>>,
    /// Inverse eigenvalues with the transform normalization folded in.
    factor: Vec<f64>,
}

impl NeumannInverse {
    pub fn new(nx: usize, ny: usize, scale: f64, shift: f64) -> Self {
        assert!(nx > 0 && ny > 0 && scale > 0.0 && shift > 0.0);
        let mut planner = DctPlanner::new();
        let lam = |n: usize| -> Vec<f64> { (0..n).map(|k| 2.0 - 2.0 * (PI * k as f64 / n as f64).cos()).collect() };
        let (lx, ly) = (lam(nx), lam(ny));
        let norm = 4.0 / (nx * ny) as f64;
        let mut factor = vec![0.0; nx * ny];
        for (l, ey) in ly.iter().enumerate() {
            for (k, ex) in lx.iter().enumerate() {
                factor[l * nx + k] = norm / (scale * (ex + ey + shift));
            }
        }
        NeumannInverse { nx, ny, rows: planner.plan_dct2(nx), cols: planner.plan_dct2(ny), factor }
    }

    /// Applies the inverse in place to row-major `data`.
    pub fn apply(&self, data: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        assert_eq!(data.len(), nx * ny);
        let mut scratch = vec![0.0; self.rows.get_scratch_len().max(self.cols.get_scratch_len())];
        let mut col = vec![0.0; ny];
        for row in data.chunks_mut(nx) {
            self.rows.process_dct2_with_scratch(row, &mut scratch);
        }
        self.columns(data, &mut col, &mut scratch, true);
        data.iter_mut().zip(&self.factor).for_each(|(v, f)| *v *= f);
        self.columns(data, &mut col, &mut scratch, false);
        for row in data.chunks_mut(nx) {
            self.rows.process_dct3_with_scratch(row, &mut scratch);
        }
    }

    fn columns(&self, data: &mut [f64], col: &mut [f64], scratch: &mut [f64], forward: bool) {
        let nx = self.nx;
        for i in 0..nx {
            for (j, c) in col.iter_mut().enumerate() {
                *c = data[j * nx + i];
            }
            if forward {
                self.cols.process_dct2_with_scratch(col, scratch);
            } else {
                self.cols.process_dct3_with_scratch(col, scratch);
            }
            for (j, c) in col.iter().enumerate() {
                data[j * nx + i] = *c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(nx: usize, ny: usize, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i + 1 < nx {
                    let d = x[k] - x[k + 1];
                    y[k] += d;
                    y[k + 1] -= d;
                }
                if j + 1 < ny {
                    let d = x[k] - x[k + nx];
                    y[k] += d;
                    y[k + nx] -= d;
                }
            }
        }
        y
    }

    #[test]
    fn inverts_shifted_laplacian() {
        let (nx, ny) = (7, 5);
        let (scale, shift) = (3.0, 0.2);
        let x: Vec<f64> = (0..nx * ny).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let mut y: Vec<f64> = laplacian(nx, ny, &x).iter().zip(&x).map(|(l, v)| scale * (l + shift * v)).collect();
        NeumannInverse::new(nx, ny, scale, shift).apply(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
