//! Minimal 3-vector and axis-aligned-box arithmetic.
//!
//! Geometry is evaluated in three spatial dimensions; the kernel exponent of
//! the capacity module is a separate parameter and may exceed 3.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A point (or displacement) in R^3. Serializes as a `[x, y, z]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn set(&mut self, axis: usize, v: f64) {
        match axis {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
    }

    /// Round every coordinate to a multiple of `q`.
    ///
    /// Sampled point clouds are quantized so that translating or scaling a
    /// cloud by dyadic amounts is exact in floating point, which in turn makes
    /// the capacity of a translated sample bit-identical.
    pub fn quantize(self, q: f64) -> Vec3 {
        Vec3::new(
            (self.x / q).round() * q,
            (self.y / q).round() * q,
            (self.z / q).round() * q,
        )
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Aabb { lo, hi }
    }

    /// The whole of R^3, as far as this library is concerned.
    pub fn everything() -> Self {
        Aabb::new(Vec3::splat(f64::NEG_INFINITY), Vec3::splat(f64::INFINITY))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.x.is_finite()
            && self.lo.y.is_finite()
            && self.lo.z.is_finite()
            && self.hi.x.is_finite()
            && self.hi.y.is_finite()
            && self.hi.z.is_finite()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x >= self.hi.x || self.lo.y >= self.hi.y || self.lo.z >= self.hi.z
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.hi - self.lo
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.lo.x
            && p.x <= self.hi.x
            && p.y >= self.lo.y
            && p.y <= self.hi.y
            && p.z >= self.lo.z
            && p.z <= self.hi.z
    }

    pub fn contains_strict(&self, p: Vec3) -> bool {
        p.x > self.lo.x
            && p.x < self.hi.x
            && p.y > self.lo.y
            && p.y < self.hi.y
            && p.z > self.lo.z
            && p.z < self.hi.z
    }

    pub fn intersect(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    pub fn inflate(&self, d: f64) -> Aabb {
        Aabb::new(self.lo - Vec3::splat(d), self.hi + Vec3::splat(d))
    }

    pub fn scaled(&self, r: f64) -> Aabb {
        Aabb::new(self.lo * r, self.hi * r)
    }

    pub fn translated(&self, t: Vec3) -> Aabb {
        Aabb::new(self.lo + t, self.hi + t)
    }

    /// Uniform point for a sample `u` in the unit cube.
    pub fn lerp(&self, u: Vec3) -> Vec3 {
        Vec3::new(
            self.lo.x + u.x * (self.hi.x - self.lo.x),
            self.lo.y + u.y * (self.hi.y - self.lo.y),
            self.lo.z + u.z * (self.hi.z - self.lo.z),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_orthogonal() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-0.5, 0.25, 4.0);
        let c = a.cross(b);
        assert!(c.dot(a).abs() < 1e-12);
        assert!(c.dot(b).abs() < 1e-12);
    }

    #[test]
    fn quantize_is_idempotent() {
        let q = 2f64.powi(-24);
        let p = Vec3::new(0.1, -0.7, 3.14159).quantize(q);
        assert_eq!(p, p.quantize(q));
    }

    #[test]
    fn aabb_intersection_empty_when_disjoint() {
        let a = Aabb::new(Vec3::splat(0.0), Vec3::splat(1.0));
        let b = Aabb::new(Vec3::splat(2.0), Vec3::splat(3.0));
        assert!(a.intersect(&b).is_empty());
    }
}
