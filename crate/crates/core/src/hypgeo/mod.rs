//! Geometry of the Poincaré half-plane `{(x, y) : y > 0}` with metric
//! `ds² = (dx² + dy²) / y²`.
//!
//! Angles are Euclidean angles (the model is conformal), measured
//! counterclockwise from the positive x-axis and normalised into `[0, 2π)`.
//! Particles move at unit hyperbolic speed, so flow time equals arc length.

mod mobius;

pub use mobius::{cayley, cayley_angle, normalizing_map, MobiusMap};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    x: f64,
    y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() && y > 0.0 {
            Ok(Point { x, y })
        } else {
            Err(Error::InvalidPoint { x, y })
        }
    }

    /// Caller guarantees `y > 0` and finiteness (results of isometries and flows).
    #[inline]
    pub(crate) fn raw(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && y > 0.0, "({x}, {y})");
        Point { x, y }
    }

    /// The base point `(0, 1)`, i.e. `i` in complex notation.
    pub const fn i() -> Self {
        Point { x: 0.0, y: 1.0 }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }
}

/// Direction of motion, stored as the angle `alpha` of the unit vector
/// `(cos alpha, sin alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    alpha: f64,
}

impl Direction {
    /// Wraps any finite angle into `[0, 2π)`.
    pub fn new(alpha: f64) -> Self {
        debug_assert!(alpha.is_finite());
        let mut a = alpha.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        Direction { alpha: a }
    }

    /// Direction of a (not necessarily unit) nonzero Euclidean vector.
    pub fn from_vector(vx: f64, vy: f64) -> Self {
        Direction::new(vy.atan2(vx))
    }

    pub fn up() -> Self {
        Direction { alpha: PI / 2.0 }
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn unit(&self) -> (f64, f64) {
        let (s, c) = self.alpha.sin_cos();
        (c, s)
    }

    pub fn reversed(&self) -> Self {
        rotate_direction(*self, PI)
    }
}

/// Position and direction of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub point: Point,
    pub dir: Direction,
}

impl State {
    pub fn new(point: Point, dir: Direction) -> Self {
        State { point, dir }
    }
}

/// Closed hyperbolic disk `B_radius(center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypCircle {
    center: Point,
    radius: f64,
}

impl HypCircle {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if radius.is_finite() && radius > 0.0 {
            Ok(HypCircle { center, radius })
        } else {
            Err(Error::InvalidArgument(format!("circle radius must be > 0, got {radius}")))
        }
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// `cosh` of the hyperbolic distance; cheaper than [`hyp_distance`] and
/// monotone in it, which makes it the right quantity for range tests.
#[inline]
pub fn cosh_distance(p1: Point, p2: Point) -> f64 {
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    1.0 + (dx * dx + dy * dy) / (2.0 * p1.y * p2.y)
}

/// Hyperbolic distance.
///
/// Evaluated as `2 asinh(|p1 - p2| / (2 sqrt(y1 y2)))`, which is the same
/// quantity as `acosh(((x1-x2)² + y1² + y2²) / (2 y1 y2))` but keeps full
/// relative precision for nearby points.
#[inline]
pub fn hyp_distance(p1: Point, p2: Point) -> f64 {
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (p1.y * p2.y).sqrt())).asinh()
}

/// Area `4π sinh²(η/2)` of a hyperbolic disk of radius `eta`.
pub fn ball_area(eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be >= 0, got {eta}")));
    }
    let s = (0.5 * eta).sinh();
    Ok(4.0 * PI * s * s)
}

/// Euclidean center and radius of the boundary circle of `c`.
pub fn circle_to_euclidean(c: &HypCircle) -> ((f64, f64), f64) {
    let (x, y) = (c.center.x, c.center.y);
    ((x, y * c.radius.cosh()), y * c.radius.sinh())
}

/// `1 - sin a` and `1 + sin a` without cancellation near `sin a = ±1`.
#[inline]
fn one_minus_plus_sin(s: f64, c: f64) -> (f64, f64) {
    if s > 0.0 {
        let p = 1.0 + s;
        (c * c / p, p)
    } else {
        let m = 1.0 - s;
        (m, c * c / m)
    }
}

/// Returns `(sinh t, D, N)` with `D = cosh t − sin α sinh t` and
/// `N = −sinh t + sin α cosh t`, both evaluated in exponential form.
#[inline]
fn flow_terms(sin_a: f64, cos_a: f64, t: f64) -> (f64, f64, f64) {
    let ep = t.exp();
    let em = (-t).exp();
    let (om, op) = one_minus_plus_sin(sin_a, cos_a);
    let denom = 0.5 * (ep * om + em * op);
    let num = 0.5 * (em * op - ep * om);
    (0.5 * (ep - em), denom, num)
}

/// Position after flowing for time `t` along the geodesic through `s`.
pub fn geodesic_flow(s: &State, t: f64) -> Point {
    let (sin_a, cos_a) = s.dir.alpha.sin_cos();
    let (sh, denom, _) = flow_terms(sin_a, cos_a, t);
    let (x0, y0) = (s.point.x, s.point.y);
    Point::raw(x0 + y0 * sh * cos_a / denom, y0 / denom)
}

/// Full state (position and transported direction) after time `t`.
pub fn flow_state(s: &State, t: f64) -> State {
    let (sin_a, cos_a) = s.dir.alpha.sin_cos();
    let (sh, denom, num) = flow_terms(sin_a, cos_a, t);
    let (x0, y0) = (s.point.x, s.point.y);
    State {
        point: Point::raw(x0 + y0 * sh * cos_a / denom, y0 / denom),
        // denom > 0, so the angle of (cos α, num) is that of the unit vector
        dir: Direction::from_vector(cos_a, num),
    }
}

/// Counterclockwise rotation by `beta`.
#[inline]
pub fn rotate_direction(d: Direction, beta: f64) -> Direction {
    Direction::new(d.alpha + beta)
}

/// Smallest nonnegative angle of the counterclockwise rotation taking `from` to `to`.
#[inline]
pub fn angle_between(from: Direction, to: Direction) -> f64 {
    Direction::new(to.alpha - from.alpha).alpha
}
