//! Small fixed-size linear algebra for the plane.

use serde::{Deserialize, Serialize};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            self.scale(1.0 / n)
        }
    }

    /// Rotate by 90 degrees counterclockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A symmetric 2x2 matrix stored as (a, b; b, d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Sym2 {
    pub fn new(a: f64, b: f64, d: f64) -> Self {
        Sym2 { a, b, d }
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.b * v.x + self.d * v.y)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let disc = (0.25 * (self.a - self.d) * (self.a - self.d) + self.b * self.b).sqrt();
        (m - disc, m + disc)
    }

    /// Unit eigenvector for the given eigenvalue, with the first nonzero
    /// component made positive so the choice is deterministic.
    pub fn eigenvector(self, lambda: f64) -> Vec2 {
        // (a - l) x + b y = 0 ; b x + (d - l) y = 0. Pick the better-conditioned row.
        let r1 = Vec2::new(self.a - lambda, self.b);
        let r2 = Vec2::new(self.b, self.d - lambda);
        let r = if r1.norm() >= r2.norm() { r1 } else { r2 };
        let v = if r.norm() == 0.0 {
            // Multiple of identity: any direction is an eigenvector.
            Vec2::new(1.0, 0.0)
        } else {
            r.perp().normalized()
        };
        canonical_sign(v)
    }

    /// Solve (self) u = rhs. Returns None when the matrix is singular to
    /// working precision.
    pub fn solve(self, rhs: Vec2) -> Option<Vec2> {
        let det = self.det();
        let scale = self.a.abs().max(self.b.abs()).max(self.d.abs()).max(1.0);
        if det.abs() < 1e-300 * scale {
            return None;
        }
        Some(Vec2::new(
            (rhs.x * self.d - rhs.y * self.b) / det,
            (self.a * rhs.y - self.b * rhs.x) / det,
        ))
    }
}

/// Fix the overall sign of a direction vector: first component of magnitude
/// above 1e-12 is made positive.
pub fn canonical_sign(v: Vec2) -> Vec2 {
    if v.x.abs() > 1e-12 {
        if v.x < 0.0 {
            return -v;
        }
    } else if v.y < 0.0 {
        return -v;
    }
    v
}

/// Axis-aligned rectangle, used both for base regions and fiber windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    pub fn square(half: f64) -> Self {
        Rect::new(-half, half, -half, half)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diameter(&self) -> f64 {
        (self.width() * self.width() + self.height() * self.height()).sqrt()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    /// Grow the rectangle by a fraction of its size on every side.
    pub fn inflate(&self, frac: f64) -> Rect {
        let dx = self.width() * frac;
        let dy = self.height() * frac;
        Rect::new(self.x_min - dx, self.x_max + dx, self.y_min - dy, self.y_max + dy)
    }

    /// Distance from `p` to the rectangle boundary (positive inside).
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        (p.x - self.x_min)
            .min(self.x_max - p.x)
            .min(p.y - self.y_min)
            .min(self.y_max - p.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let m = Sym2::new(-3.0, 0.0, 2.0);
        let (lo, hi) = m.eigenvalues();
        assert!((lo + 3.0).abs() < 1e-12);
        assert!((hi - 2.0).abs() < 1e-12);
        let v_lo = m.eigenvector(lo);
        assert!((v_lo.x.abs() - 1.0).abs() < 1e-12 && v_lo.y.abs() < 1e-12);
        let v_hi = m.eigenvector(hi);
        assert!(v_hi.x.abs() < 1e-12 && (v_hi.y.abs() - 1.0).abs() < 1e-12);
        // canonical sign: first nonzero component positive
        assert!(v_lo.x > 0.0);
        assert!(v_hi.y > 0.0);
    }

    #[test]
    fn eigen_of_rotated() {
        // eigenvalues 1 and 3, eigenvectors along (1,1) and (1,-1)
        let m = Sym2::new(2.0, -1.0, 2.0);
        let (lo, hi) = m.eigenvalues();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let v = m.eigenvector(lo);
        assert!((m.mul_vec(v) - v.scale(lo)).norm() < 1e-12);
    }

    #[test]
    fn solve_2x2() {
        let m = Sym2::new(2.0, 1.0, 3.0);
        let rhs = Vec2::new(1.0, -1.0);
        let u = m.solve(rhs).unwrap();
        assert!((m.mul_vec(u) - rhs).norm() < 1e-12);
        assert!(Sym2::new(1.0, 1.0, 1.0).solve(rhs).is_none());
    }
}
