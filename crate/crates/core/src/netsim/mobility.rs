//! Random-waypoint mobility and the mobile adversary's evasion step.

use super::geometry::{Arena, Vec2};
use crate::crypto::PrngState;
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams<T> {
    pub speed_min: T,
    pub speed_max: T,
}

/// Kinematic state of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePose<T> {
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
    pub waypoint: Vec2<T>,
    /// Speed for the current leg.
    pub speed: T,
}

impl<T: Scalar> NodePose<T> {
    /// Stationary pose; the first step draws a waypoint.
    pub fn at(position: Vec2<T>) -> Self {
        NodePose {
            position,
            velocity: Vec2::zero(),
            waypoint: position,
            speed: T::zero(),
        }
    }

    /// Uniformly placed pose with a fresh leg already drawn.
    pub fn random(arena: &Arena<T>, params: &MobilityParams<T>, rng: &mut PrngState) -> Self {
        let position = uniform_point(arena, rng);
        let mut pose = NodePose::at(position);
        pose.new_leg(arena, params, rng);
        pose
    }

    fn new_leg(&mut self, arena: &Arena<T>, params: &MobilityParams<T>, rng: &mut PrngState) {
        self.waypoint = uniform_point(arena, rng);
        let span = params.speed_max - params.speed_min;
        self.speed = params.speed_min + span * T::of(rng.next_f64());
        let d = self.waypoint - self.position;
        let dist = d.norm();
        self.velocity = if dist > T::zero() {
            d * (self.speed / dist)
        } else {
            Vec2::zero()
        };
    }
}

fn uniform_point<T: Scalar>(arena: &Arena<T>, rng: &mut PrngState) -> Vec2<T> {
    Vec2::new(
        arena.width * T::of(rng.next_f64()),
        arena.height * T::of(rng.next_f64()),
    )
}

/// Advances a random-waypoint node by `dt` seconds.
///
/// A node sitting on its waypoint first draws a new one (and a new speed in
/// `[speed_min, speed_max]`). A node that reaches its waypoint within `dt`
/// stops there; the next step draws the following leg.
pub fn mobility_step<T: Scalar>(
    pose: NodePose<T>,
    dt: T,
    rng: &mut PrngState,
    arena: &Arena<T>,
    params: &MobilityParams<T>,
) -> NodePose<T> {
    assert!(dt > T::zero(), "mobility step needs dt > 0");
    let mut next = pose;
    if next.position == next.waypoint {
        next.new_leg(arena, params, rng);
    }
    let to_target = next.waypoint - next.position;
    let dist = to_target.norm();
    let travel = next.speed * dt;
    if travel >= dist {
        next.position = next.waypoint;
        next.velocity = Vec2::zero();
    } else {
        next.position = next.position + to_target * (travel / dist);
        next.velocity = to_target * (next.speed / dist);
    }
    next.position = arena.clamp(next.position);
    next
}

/// Evasion step: moves at `speed` for `dt` seconds along the heading that
/// leaves the nearest of `others` farthest away, staying inside the arena.
///
/// Straight away from the nearest node is tried first; 16 evenly spaced
/// headings cover the case where a wall or corner blocks that escape.
pub fn mob_evade<T: Scalar>(
    pose: NodePose<T>,
    others: &[Vec2<T>],
    speed: T,
    dt: T,
    arena: &Arena<T>,
) -> NodePose<T> {
    let nearest_sq = |p: Vec2<T>| {
        others
            .iter()
            .map(|o| p.distance_sq(*o))
            .fold(T::infinity(), |a, b| if b < a { b } else { a })
    };
    let mut next = pose;
    let Some(threat) = others.iter().copied().min_by(|a, b| {
        pose.position
            .distance_sq(*a)
            .partial_cmp(&pose.position.distance_sq(*b))
            .unwrap_or(std::cmp::Ordering::Equal)
    }) else {
        next.velocity = Vec2::zero();
        return next;
    };
    let mut away = pose.position - threat;
    if away.norm() == T::zero() {
        away = arena.center() - pose.position;
        if away.norm() == T::zero() {
            away = Vec2::new(T::one(), T::zero());
        }
    }
    let step = speed * dt;
    let mut best_dir = away * (T::one() / away.norm());
    let mut best_pos = arena.clamp(pose.position + best_dir * step);
    let mut best_score = nearest_sq(best_pos);
    let tau = T::of(std::f64::consts::TAU);
    for k in 0..16 {
        let angle = tau * T::of(k as f64 / 16.0);
        let dir = Vec2::new(angle.cos(), angle.sin());
        let pos = arena.clamp(pose.position + dir * step);
        let score = nearest_sq(pos);
        if score > best_score {
            best_dir = dir;
            best_pos = pos;
            best_score = score;
        }
    }
    next.velocity = best_dir * speed;
    next.position = best_pos;
    next.waypoint = next.position;
    next.speed = speed;
    next
}
