//! Planar domains and averaging cells.
//!
//! A [`Domain`] is an outer simply connected [`Shape`] with optional holes
//! removed, together with a bounding box and a grid spacing. Containment is
//! always decided from the exact geometric description, never from a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Relative slack used when a square touches a boundary.
const TOUCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        BBox { x_min, x_max, y_min, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Strict containment of another box (no shared boundary).
    pub fn strictly_contains(&self, other: &BBox) -> bool {
        self.x_min < other.x_min
            && self.x_max > other.x_max
            && self.y_min < other.y_min
            && self.y_max > other.y_max
    }

    pub fn padded(&self, pad: f64) -> BBox {
        BBox::new(self.x_min - pad, self.x_max + pad, self.y_min - pad, self.y_max + pad)
    }
}

/// Simply connected convex building block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Rect { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
    Disk { center: Point, radius: f64 },
}

impl Shape {
    pub fn rect(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Shape::Rect { x_min, x_max, y_min, y_max }
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        Shape::Disk { center, radius }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => (x_max - x_min) * (y_max - y_min),
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn bbox(&self) -> BBox {
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => BBox::new(x_min, x_max, y_min, y_max),
            Shape::Disk { center, radius } => BBox::new(
                center[0] - radius,
                center[0] + radius,
                center[1] - radius,
                center[1] + radius,
            ),
        }
    }

    /// Open-set membership.
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                p[0] > x_min && p[0] < x_max && p[1] > y_min && p[1] < y_max
            }
            Shape::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
        }
    }

    /// Closed-set membership.
    pub fn contains_closed(&self, p: Point) -> bool {
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                p[0] >= x_min && p[0] <= x_max && p[1] >= y_min && p[1] <= y_max
            }
            Shape::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                let dx = (x_min - p[0]).max(p[0] - x_max);
                let dy = (y_min - p[1]).max(p[1] - y_max);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    dx.max(0.0).hypot(dy.max(0.0))
                }
            }
            Shape::Disk { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            }
        }
    }

    /// Whether the open axis-aligned square `(c ± s/2)²` lies inside the open shape.
    pub fn contains_open_square(&self, c: Point, side: f64) -> bool {
        let half = 0.5 * side;
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                let eps = TOUCH_EPS * (1.0 + side);
                c[0] - half >= x_min - eps
                    && c[0] + half <= x_max + eps
                    && c[1] - half >= y_min - eps
                    && c[1] + half <= y_max + eps
            }
            Shape::Disk { center, radius } => {
                // Convexity: the open square is inside iff every corner is in the closed disk.
                let fx = (c[0] - center[0]).abs() + half;
                let fy = (c[1] - center[1]).abs() + half;
                fx * fx + fy * fy <= radius * radius * (1.0 + TOUCH_EPS)
            }
        }
    }

    /// Whether the open square `(c ± s/2)²` avoids the closed shape.
    pub fn open_square_avoids(&self, c: Point, side: f64) -> bool {
        let half = 0.5 * side;
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                let eps = TOUCH_EPS * (1.0 + side);
                c[0] + half <= x_min + eps
                    || c[0] - half >= x_max - eps
                    || c[1] + half <= y_min + eps
                    || c[1] - half >= y_max - eps
            }
            Shape::Disk { center, radius } => {
                let dx = ((c[0] - center[0]).abs() - half).max(0.0);
                let dy = ((c[1] - center[1]).abs() - half).max(0.0);
                dx * dx + dy * dy >= radius * radius * (1.0 - TOUCH_EPS)
            }
        }
    }

    /// Smallest `t` in `(0, 1]` at which the segment `p + t (q - p)` leaves the
    /// shape, for `p` inside. Returns `None` if the segment stays inside.
    pub fn exit_fraction(&self, p: Point, q: Point) -> Option<f64> {
        let d = [q[0] - p[0], q[1] - p[1]];
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                let mut t_exit = f64::INFINITY;
                for (lo, hi, pc, dc) in [(x_min, x_max, p[0], d[0]), (y_min, y_max, p[1], d[1])] {
                    if dc > 0.0 {
                        t_exit = t_exit.min((hi - pc) / dc);
                    } else if dc < 0.0 {
                        t_exit = t_exit.min((lo - pc) / dc);
                    }
                }
                (t_exit <= 1.0).then_some(t_exit.max(0.0))
            }
            Shape::Disk { center, radius } => {
                let f = [p[0] - center[0], p[1] - center[1]];
                let a = d[0] * d[0] + d[1] * d[1];
                let b = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let c = f[0] * f[0] + f[1] * f[1] - radius * radius;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                let t = (-b + disc.sqrt()) / (2.0 * a);
                (t <= 1.0).then_some(t.max(0.0))
            }
        }
    }

    /// Smallest `t` in `(0, 1]` at which the segment from an outside point `p`
    /// enters the closed shape.
    pub fn entry_fraction(&self, p: Point, q: Point) -> Option<f64> {
        let d = [q[0] - p[0], q[1] - p[1]];
        match *self {
            Shape::Rect { x_min, x_max, y_min, y_max } => {
                // Slab intersection.
                let mut t0: f64 = 0.0;
                let mut t1: f64 = 1.0;
                for (lo, hi, pc, dc) in [(x_min, x_max, p[0], d[0]), (y_min, y_max, p[1], d[1])] {
                    if dc == 0.0 {
                        if pc < lo || pc > hi {
                            return None;
                        }
                    } else {
                        let (a, b) = ((lo - pc) / dc, (hi - pc) / dc);
                        let (a, b) = if a < b { (a, b) } else { (b, a) };
                        t0 = t0.max(a);
                        t1 = t1.min(b);
                    }
                }
                (t0 <= t1).then_some(t0)
            }
            Shape::Disk { center, radius } => {
                let f = [p[0] - center[0], p[1] - center[1]];
                let a = d[0] * d[0] + d[1] * d[1];
                let b = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let c = f[0] * f[0] + f[1] * f[1] - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                (0.0..=1.0).contains(&t).then_some(t)
            }
        }
    }
}

/// Geometric description of a bounded planar domain plus grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub outer: Shape,
    pub holes: Vec<Shape>,
    pub bbox: BBox,
    /// Grid spacing.
    pub h: f64,
}

impl Domain {
    /// Outer shape minus the closures of `holes`, with a bounding box padded by
    /// two grid cells so that it strictly contains the closure.
    pub fn new(outer: Shape, holes: Vec<Shape>, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("grid spacing must be positive, got {h}")));
        }
        match outer {
            Shape::Rect { x_min, x_max, y_min, y_max } if !(x_max > x_min && y_max > y_min) => {
                return Err(Error::InvalidDomain("degenerate rectangle".into()));
            }
            Shape::Disk { radius, .. } if !(radius > 0.0) => {
                return Err(Error::InvalidDomain("disk radius must be positive".into()));
            }
            _ => {}
        }
        let ob = outer.bbox();
        for (k, hole) in holes.iter().enumerate() {
            let hb = hole.bbox();
            // The hole closure must sit inside the open outer region.
            let corners_inside = match *hole {
                Shape::Rect { x_min, x_max, y_min, y_max } => [
                    [x_min, y_min],
                    [x_min, y_max],
                    [x_max, y_min],
                    [x_max, y_max],
                ]
                .iter()
                .all(|&c| outer.contains(c)),
                Shape::Disk { center, radius } => outer.signed_distance(center) < -radius,
            };
            if !corners_inside || !ob.strictly_contains(&hb) {
                return Err(Error::InvalidDomain(format!("hole {k} not contained in the outer region")));
            }
            for (m, other) in holes.iter().enumerate().skip(k + 1) {
                if closures_meet(hole, other) {
                    return Err(Error::InvalidDomain(format!("holes {k} and {m} are not disjoint")));
                }
            }
        }
        let bbox = ob.padded(2.0 * h);
        Ok(Domain { outer, holes, bbox, h })
    }

    pub fn square(x_min: f64, x_max: f64, y_min: f64, y_max: f64, h: f64) -> Result<Self> {
        Domain::new(Shape::rect(x_min, x_max, y_min, y_max), Vec::new(), h)
    }

    pub fn unit_square(h: f64) -> Result<Self> {
        Domain::square(0.0, 1.0, 0.0, 1.0, h)
    }

    pub fn disk(center: Point, radius: f64, h: f64) -> Result<Self> {
        Domain::new(Shape::disk(center, radius), Vec::new(), h)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Domain::new(self.outer, self.holes.clone(), h)
    }

    /// The filled domain (outer shape without holes).
    pub fn filled(&self) -> Domain {
        Domain { outer: self.outer, holes: Vec::new(), bbox: self.bbox, h: self.h }
    }

    pub fn is_simply_connected(&self) -> bool {
        self.holes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(Shape::area).sum::<f64>()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.outer.contains(p) && !self.holes.iter().any(|s| s.contains_closed(p))
    }

    /// Distance to the boundary for points inside; zero outside.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        let mut d = -self.outer.signed_distance(p);
        for hole in &self.holes {
            d = d.min(hole.signed_distance(p));
        }
        d.max(0.0)
    }

    /// `Q ⊂ Ω` for the open square of center `c` and side `side`.
    pub fn contains_open_square(&self, c: Point, side: f64) -> bool {
        self.outer.contains_open_square(c, side)
            && self.holes.iter().all(|s| s.open_square_avoids(c, side))
    }

    /// Open disk of center `c` and radius `r` inside the domain.
    pub fn contains_disk(&self, c: Point, r: f64) -> bool {
        self.contains(c) && self.boundary_distance(c) >= r
    }

    /// Fraction `t ∈ (0, 1]` along `p → q` where the segment first meets `∂Ω`
    /// (for `p` inside). `None` when the whole segment lies in the domain.
    pub fn exit_fraction(&self, p: Point, q: Point) -> Option<f64> {
        let mut best = self.outer.exit_fraction(p, q);
        for hole in &self.holes {
            if let Some(t) = hole.entry_fraction(p, q) {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
        best
    }
}

fn closures_meet(a: &Shape, b: &Shape) -> bool {
    match (*a, *b) {
        (Shape::Disk { center: c1, radius: r1 }, Shape::Disk { center: c2, radius: r2 }) => {
            (c1[0] - c2[0]).hypot(c1[1] - c2[1]) <= r1 + r2
        }
        (Shape::Rect { .. }, Shape::Rect { .. }) => {
            let (p, q) = (a.bbox(), b.bbox());
            !(p.x_max < q.x_min || q.x_max < p.x_min || p.y_max < q.y_min || q.y_max < p.y_min)
        }
        (Shape::Rect { .. }, Shape::Disk { center, radius })
        | (Shape::Disk { center, radius }, Shape::Rect { .. }) => {
            let rect = if matches!(a, Shape::Rect { .. }) { a } else { b };
            rect.signed_distance(center) <= radius
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellShape {
    Square,
    Disk,
}

/// Convex averaging cell `U`: an open square of side `size` or an open disk
/// of radius `size`, centered at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub center: Point,
    pub size: f64,
    pub shape: CellShape,
}

impl Cell {
    pub fn square(center: Point, side: f64) -> Self {
        Cell { center, size: side, shape: CellShape::Square }
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        Cell { center, size: radius, shape: CellShape::Disk }
    }

    /// `δ = diam(U)`.
    pub fn diameter(&self) -> f64 {
        match self.shape {
            CellShape::Square => std::f64::consts::SQRT_2 * self.size,
            CellShape::Disk => 2.0 * self.size,
        }
    }

    pub fn area(&self) -> f64 {
        self.as_shape().area()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.as_shape().contains(p)
    }

    pub fn bbox(&self) -> BBox {
        self.as_shape().bbox()
    }

    pub fn as_shape(&self) -> Shape {
        match self.shape {
            CellShape::Square => {
                let s = 0.5 * self.size;
                Shape::rect(self.center[0] - s, self.center[0] + s, self.center[1] - s, self.center[1] + s)
            }
            CellShape::Disk => Shape::disk(self.center, self.size),
        }
    }
}
