//! Homogeneous Poisson point fields on the half-plane (uniform with respect
//! to the hyperbolic area `dx dy / y²`) and quantities derived from them.
//!
//! Points are realised in geodesic polar coordinates around a region center:
//! the radial distance is drawn by inverting the area fraction
//! `sinh²(η/2)`, the polar angle uniformly.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::hypgeo::{geodesic_flow, hyp_distance, Direction, Point, State};
use crate::quad;

/// Default ceiling on the expected number of points of a single field.
pub const DEFAULT_COUNT_CAP: f64 = 1e8;

/// Annulus `{p : exclusion < d(p, center) <= outer}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: Point,
    pub outer: f64,
    pub exclusion: f64,
}

impl Region {
    pub fn new(center: Point, outer: f64, exclusion: f64) -> Result<Self> {
        if !(exclusion >= 0.0 && outer > exclusion && outer.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "region needs 0 <= exclusion < outer, got exclusion={exclusion}, outer={outer}"
            )));
        }
        Ok(Region { center, outer, exclusion })
    }

    pub fn area(&self) -> f64 {
        annulus_area(self.exclusion, self.outer)
    }

    pub fn contains(&self, p: Point) -> bool {
        let d = hyp_distance(self.center, p);
        d > self.exclusion && d <= self.outer
    }
}

/// Hard obstacles of common radius centered at a Poisson configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleField {
    pub centers: Vec<Point>,
    pub radius: f64,
    pub intensity: f64,
    pub region: Region,
}

#[inline]
fn sinh_half_sq(eta: f64) -> f64 {
    let s = (0.5 * eta).sinh();
    s * s
}

fn annulus_area(inner: f64, outer: f64) -> f64 {
    4.0 * PI * (sinh_half_sq(outer) - sinh_half_sq(inner))
}

/// Radial distance from the center of a uniform point in the annulus
/// `inner < η <= outer`, from the inverse of the area fraction.
#[inline]
fn radial_draw<R: Rng + ?Sized>(inner: f64, outer: f64, rng: &mut R) -> f64 {
    let lo = sinh_half_sq(inner);
    let hi = sinh_half_sq(outer);
    let u: f64 = rng.random();
    2.0 * (lo + u * (hi - lo)).sqrt().asinh()
}

fn sample_in_annulus<R: Rng + ?Sized>(center: Point, inner: f64, outer: f64, rng: &mut R) -> Point {
    let eta = radial_draw(inner, outer, rng);
    let phi = rng.random::<f64>() * TAU;
    geodesic_flow(&State::new(center, Direction::new(phi)), eta)
}

/// A point distributed uniformly (w.r.t. hyperbolic area) in `B_outer(center)`.
pub fn sample_uniform_in_ball<R: Rng + ?Sized>(center: Point, outer: f64, rng: &mut R) -> Result<Point> {
    if !(outer > 0.0 && outer.is_finite()) {
        return Err(Error::InvalidArgument(format!("ball radius must be > 0, got {outer}")));
    }
    Ok(sample_in_annulus(center, 0.0, outer, rng))
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    d.sample(rng) as usize
}

fn check_intensity(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("intensity must be > 0, got {lambda}")))
    }
}

/// Poisson field of intensity `lambda` restricted to `region`, with the
/// default expected-count cap.
pub fn sample_field<R: Rng + ?Sized>(lambda: f64, radius: f64, region: Region, rng: &mut R) -> Result<ObstacleField> {
    sample_field_capped(lambda, radius, region, DEFAULT_COUNT_CAP, rng)
}

/// Restricting to the annulus is the same as conditioning the whole-plane
/// field on an empty exclusion ball, since counts on disjoint sets are
/// independent.
pub fn sample_field_capped<R: Rng + ?Sized>(
    lambda: f64,
    radius: f64,
    region: Region,
    cap: f64,
    rng: &mut R,
) -> Result<ObstacleField> {
    check_intensity(lambda)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("obstacle radius must be > 0, got {radius}")));
    }
    let expected = lambda * region.area();
    if !(expected <= cap) {
        return Err(Error::Infeasible { expected, cap });
    }
    let n = poisson_count(expected, rng);
    let centers = (0..n)
        .map(|_| sample_in_annulus(region.center, region.exclusion, region.outer, rng))
        .collect();
    Ok(ObstacleField { centers, radius, intensity: lambda, region })
}

/// `Pr(T_k > eta)` for the distance `T_k` from a fixed point to the k-th
/// nearest point of a field of intensity `lambda`.
pub fn nearest_neighbor_tail(eta: f64, lambda: f64, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    let mean = 4.0 * PI * lambda * sinh_half_sq(eta.max(0.0));
    let mut term = (-mean).exp();
    let mut acc = term;
    for j in 1..k {
        term *= mean / j as f64;
        acc += term;
    }
    acc.min(1.0)
}

/// `E[T_1] = e^{2πλ} K_0(2πλ)`, evaluated as `∫_0^∞ exp(−2πλ(cosh t − 1)) dt`
/// by adaptive quadrature on a range where the integrand exceeds `e^{-60}`.
pub fn expected_t1(lambda: f64) -> Result<f64> {
    check_intensity(lambda)?;
    let z = 2.0 * PI * lambda;
    let upper = (1.0 + 60.0 / z).acosh();
    let (v, _) = quad::integrate(|t| (-z * 2.0 * sinh_half_sq(t)).exp(), 0.0, upper, 1e-15, 1e-12, 2000);
    Ok(v)
}

/// Distance from `center` to the nearest point of a whole-plane field,
/// realised shell by shell outward until a shell is nonempty.
pub fn sample_nearest_distance<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<f64> {
    check_intensity(lambda)?;
    let width = (1.0 / lambda.sqrt()).clamp(0.05, 0.5);
    let mut inner = 0.0;
    loop {
        let outer = inner + width;
        let n = poisson_count(lambda * annulus_area(inner, outer), rng);
        if n > 0 {
            return Ok((0..n).map(|_| radial_draw(inner, outer, rng)).fold(f64::INFINITY, f64::min));
        }
        inner = outer;
    }
}

/// Radially symmetric potential `φ(η)`, zero beyond `support_radius`.
#[derive(Clone)]
pub struct PotentialProfile {
    support_radius: f64,
    shape: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for PotentialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialProfile").field("support_radius", &self.support_radius).finish()
    }
}

impl PotentialProfile {
    /// `shape` is consulted only on `[0, support_radius]` and must be
    /// nonnegative there (checked on a grid).
    pub fn new<F>(support_radius: f64, shape: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("support radius must be > 0, got {support_radius}")));
        }
        for k in 0..=256 {
            let v = shape(support_radius * k as f64 / 256.0);
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!("potential must be nonnegative, got {v}")));
            }
        }
        Ok(PotentialProfile { support_radius, shape: Arc::new(shape) })
    }

    /// `φ(η) = height · max(0, 1 − η/support)`.
    pub fn tent(support_radius: f64, height: f64) -> Result<Self> {
        Self::new(support_radius, move |eta| height * (1.0 - eta / support_radius).max(0.0))
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn eval(&self, eta: f64) -> f64 {
        if eta > self.support_radius {
            0.0
        } else {
            (self.shape)(eta)
        }
    }
}

/// Shot-noise field `V(q) = Σ_j φ(d(p_j, q))`.
pub fn shot_noise(points: &[Point], profile: &PotentialProfile, q: Point) -> f64 {
    points
        .iter()
        .map(|&p| hyp_distance(p, q))
        .filter(|&d| d <= profile.support_radius)
        .map(|d| profile.eval(d))
        .sum()
}

/// Supplier of obstacle centers around an origin, possibly realised lazily.
pub trait CenterSource {
    fn origin(&self) -> Point;
    fn obstacle_radius(&self) -> f64;
    fn centers(&self) -> &[Point];
    /// Every center within this hyperbolic distance of `origin()` is
    /// already present in `centers()`.
    fn reach(&self) -> f64;
    /// Realises more of the field; `Ok(false)` when nothing more exists.
    fn grow(&mut self) -> Result<bool>;
}

impl CenterSource for ObstacleField {
    fn origin(&self) -> Point {
        self.region.center
    }

    fn obstacle_radius(&self) -> f64 {
        self.radius
    }

    fn centers(&self) -> &[Point] {
        &self.centers
    }

    fn reach(&self) -> f64 {
        self.region.outer
    }

    fn grow(&mut self) -> Result<bool> {
        Ok(false)
    }
}

/// Whole-plane field conditioned on an empty ball `B_exclusion(origin)`,
/// realised in concentric annuli on demand. Centers are only ever
/// appended, so indices stay stable.
pub struct ShellField<'a, R: Rng + ?Sized> {
    origin: Point,
    intensity: f64,
    radius: f64,
    reach: f64,
    width: f64,
    cap: f64,
    expected: f64,
    centers: Vec<Point>,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> ShellField<'a, R> {
    pub fn new(origin: Point, intensity: f64, radius: f64, exclusion: f64, rng: &'a mut R) -> Result<Self> {
        check_intensity(intensity)?;
        if !(radius > 0.0 && exclusion >= 0.0) {
            return Err(Error::InvalidArgument("need radius > 0 and exclusion >= 0".into()));
        }
        Ok(ShellField {
            origin,
            intensity,
            radius,
            reach: exclusion,
            width: 0.5,
            cap: DEFAULT_COUNT_CAP,
            expected: 0.0,
            centers: Vec::new(),
            rng,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }
}

impl<R: Rng + ?Sized> CenterSource for ShellField<'_, R> {
    fn origin(&self) -> Point {
        self.origin
    }

    fn obstacle_radius(&self) -> f64 {
        self.radius
    }

    fn centers(&self) -> &[Point] {
        &self.centers
    }

    fn reach(&self) -> f64 {
        self.reach
    }

    fn grow(&mut self) -> Result<bool> {
        let outer = self.reach + self.width;
        let mean = self.intensity * annulus_area(self.reach, outer);
        self.expected += mean;
        if !(self.expected <= self.cap) {
            return Err(Error::Infeasible { expected: self.expected, cap: self.cap });
        }
        let n = poisson_count(mean, self.rng);
        self.centers.reserve(n);
        for _ in 0..n {
            let p = sample_in_annulus(self.origin, self.reach, outer, self.rng);
            self.centers.push(p);
        }
        self.reach = outer;
        Ok(true)
    }
}
