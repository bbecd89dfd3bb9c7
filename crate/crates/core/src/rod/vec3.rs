use std::ops::{Add, Sub};

use super::ad::Real;

#[derive(Clone, Copy, Debug)]
pub struct V3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> V3<S> {
    #[inline]
    pub fn new(x: S, y: S, z: S) -> Self {
        V3 { x, y, z }
    }

    #[inline]
    pub fn cst(v: [f64; 3]) -> Self {
        V3::new(S::cst(v[0]), S::cst(v[1]), S::cst(v[2]))
    }

    #[inline]
    pub fn from_slice(s: &[S]) -> Self {
        V3::new(s[0], s[1], s[2])
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        V3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(self, s: S) -> Self {
        V3::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn scale_f(self, s: f64) -> Self {
        V3::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn div(self, s: S) -> Self {
        V3::new(self.x / s, self.y / s, self.z / s)
    }

    pub fn val(self) -> [f64; 3] {
        [self.x.val(), self.y.val(), self.z.val()]
    }
}

impl<S: Real> Add for V3<S> {
    type Output = V3<S>;
    #[inline]
    fn add(self, o: Self) -> Self {
        V3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> Sub for V3<S> {
    type Output = V3<S>;
    #[inline]
    fn sub(self, o: Self) -> Self {
        V3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Plain-array helpers for post-processing code that never needs gradients.
pub mod arr {
    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(a: [f64; 3]) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn unit(a: [f64; 3]) -> [f64; 3] {
        scale(a, 1.0 / norm(a))
    }

    pub fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
        add(a, scale(sub(b, a), t))
    }

    pub fn midpoint(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        lerp(a, b, 0.5)
    }

    pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
        norm(sub(a, b))
    }
}
