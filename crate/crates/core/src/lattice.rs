//! Square cell decompositions `J_ℓ` of a domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, Domain, Point};

/// Centers `(ℓm, ℓn)` whose open square of side `ℓ` lies in the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLattice {
    pub ell: f64,
    /// Integer indices `(m, n)` of each center.
    pub indices: Vec<[i64; 2]>,
    pub centers: Vec<Point>,
    pub domain_area: f64,
}

impl CellLattice {
    /// `N(ℓ)`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `|Ω_ℓ| = N(ℓ) ℓ²`.
    pub fn covered_area(&self) -> f64 {
        self.len() as f64 * self.ell * self.ell
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.centers.iter().map(move |&c| Cell::square(c, self.ell))
    }

    /// Index of the lattice square containing `p`, if any.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let m = (p[0] / self.ell).round() as i64;
        let n = (p[1] / self.ell).round() as i64;
        let c = [m as f64 * self.ell, n as f64 * self.ell];
        let half = 0.5 * self.ell;
        if (p[0] - c[0]).abs() >= half || (p[1] - c[1]).abs() >= half {
            return None;
        }
        self.indices.binary_search_by(|q| (q[1], q[0]).cmp(&(n, m))).ok()
    }
}

/// Builds `J_ℓ` from the exact domain geometry. Squares whose closure touches
/// `∂Ω` are kept.
pub fn build_lattice(domain: &Domain, ell: f64) -> Result<CellLattice> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::param("ell", format!("must be positive, got {ell}")));
    }
    let b = domain.outer.bbox();
    let m_lo = ((b.x_min + 0.5 * ell) / ell).ceil() as i64 - 1;
    let m_hi = ((b.x_max - 0.5 * ell) / ell).floor() as i64 + 1;
    let n_lo = ((b.y_min + 0.5 * ell) / ell).ceil() as i64 - 1;
    let n_hi = ((b.y_max - 0.5 * ell) / ell).floor() as i64 + 1;
    let mut indices = Vec::new();
    let mut centers = Vec::new();
    for n in n_lo..=n_hi {
        for m in m_lo..=m_hi {
            let c = [m as f64 * ell, n as f64 * ell];
            if domain.contains_open_square(c, ell) {
                indices.push([m, n]);
                centers.push(c);
            }
        }
    }
    Ok(CellLattice { ell, indices, centers, domain_area: domain.area() })
}

/// `|Ω| − N(ℓ) ℓ²`.
pub fn coverage_defect(lattice: &CellLattice) -> f64 {
    lattice.domain_area - lattice.covered_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    #[test]
    fn unit_square_quarter() {
        let d = Domain::unit_square(0.01).unwrap();
        let lat = build_lattice(&d, 0.25).unwrap();
        assert_eq!(lat.len(), 9);
        assert!((coverage_defect(&lat) - 7.0 / 16.0).abs() < 1e-15);
        for (idx, c) in lat.indices.iter().zip(&lat.centers) {
            assert!((1..=3).contains(&idx[0]) && (1..=3).contains(&idx[1]));
            assert_eq!(*c, [idx[0] as f64 * 0.25, idx[1] as f64 * 0.25]);
        }
    }

    #[test]
    fn too_large_cells() {
        let d = Domain::unit_square(0.01).unwrap();
        let lat = build_lattice(&d, 2.0).unwrap();
        assert!(lat.is_empty());
        assert_eq!(coverage_defect(&lat), 1.0);
    }

    #[test]
    fn unit_square_tiling_defect() {
        let d = Domain::unit_square(0.01).unwrap();
        for n in [2usize, 5, 8, 16] {
            let lat = build_lattice(&d, 1.0 / n as f64).unwrap();
            assert_eq!(lat.len(), (n - 1) * (n - 1));
            let expected = (2 * n - 1) as f64 / (n * n) as f64;
            assert!((coverage_defect(&lat) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_count_bounds() {
        let d = Domain::disk([0.0, 0.0], 1.0, 0.01).unwrap();
        for k in 3..=7 {
            let ell = 2f64.powi(-k);
            let lat = build_lattice(&d, ell).unwrap();
            let bound = d.area() / (ell * ell);
            assert!((lat.len() as f64) <= bound);
            assert!(coverage_defect(&lat) / ell < 10.0);
        }
    }

    #[test]
    fn holes_are_excluded() {
        let d = Domain::new(Shape::rect(0.0, 1.0, 0.0, 1.0), vec![Shape::disk([0.5, 0.5], 0.2)], 0.01).unwrap();
        let lat = build_lattice(&d, 0.125).unwrap();
        for c in &lat.centers {
            assert!(Shape::disk([0.5, 0.5], 0.2).open_square_avoids(*c, 0.125));
        }
        assert!((lat.len() as f64) <= d.area() / (0.125 * 0.125));
    }

    #[test]
    fn cell_lookup() {
        let d = Domain::unit_square(0.01).unwrap();
        let lat = build_lattice(&d, 0.25).unwrap();
        let k = lat.cell_of([0.49, 0.74]).unwrap();
        assert_eq!(lat.indices[k], [2, 3]);
        assert!(lat.cell_of([0.05, 0.5]).is_none());
    }
}
