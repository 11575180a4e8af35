//! Planar geometry, generic over [`Scalar`].

use std::ops::{Add, Mul, Sub};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2<T>) -> T {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Vec2<T>) -> T {
        let d = self - other;
        d.x * d.x + d.y * d.y
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Vec2<T>;
    fn add(self, o: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Vec2<T>;
    fn sub(self, o: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Vec2<T>;
    fn mul(self, k: T) -> Vec2<T> {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Rectangular deployment area anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Arena<T> {
    pub fn new(width: T, height: T) -> Self {
        Arena { width, height }
    }

    /// Square arena whose area grows linearly with `n`:
    /// `side² = base_side² · n / base_nodes`.
    pub fn scaled(n: usize, base_side: T, base_nodes: usize) -> Self {
        let ratio = T::of(n as f64 / base_nodes as f64);
        let side = base_side * ratio.sqrt();
        Arena::new(side, side)
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    pub fn diagonal(&self) -> T {
        self.width.hypot(self.height)
    }

    pub fn center(&self) -> Vec2<T> {
        let two = T::of(2.0);
        Vec2::new(self.width / two, self.height / two)
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= self.width && p.y <= self.height
    }

    pub fn clamp(&self, p: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            p.x.max(T::zero()).min(self.width),
            p.y.max(T::zero()).min(self.height),
        )
    }
}
