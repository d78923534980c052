//! Markovian random flight: geodesic motion interrupted at the epochs of a
//! Poisson process of rate `sigma`, each time turning by an independent
//! angle with density `sin(β/2) / 4` on `[0, 2π]`.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::billiard::{CollisionEvent, Trajectory};
use crate::error::{Error, Result};
use crate::hypgeo::{flow_state, hyp_distance, rotate_direction, State};

/// Event cap shared with the billiard loop.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightConfig {
    sigma: f64,
    horizon: f64,
}

impl FlightConfig {
    pub fn new(sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "flight needs sigma > 0 and horizon > 0, got sigma={sigma}, horizon={horizon}"
            )));
        }
        Ok(FlightConfig { sigma, horizon })
    }

    /// Rate matching a Lorentz gas of intensity `lambda` and obstacle radius `r`.
    pub fn from_obstacles(lambda: f64, r: f64, horizon: f64) -> Result<Self> {
        Self::new(2.0 * lambda * r.sinh(), horizon)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Inverse of the CDF `sin²(β/4)` applied to a uniform `u` in `[0, 1]`.
#[inline]
pub fn deflection_quantile(u: f64) -> f64 {
    4.0 * u.sqrt().asin()
}

/// CDF of the deflection angle.
#[inline]
pub fn deflection_cdf(beta: f64) -> f64 {
    (0.25 * beta.clamp(0.0, std::f64::consts::TAU)).sin().powi(2)
}

pub fn sample_deflection<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    deflection_quantile(rng.random::<f64>())
}

/// One flight path from a fixed initial state.
pub fn simulate_flight<R: Rng + ?Sized>(s0: &State, cfg: &FlightConfig, rng: &mut R) -> Result<Trajectory> {
    simulate_flight_capped(s0, cfg, DEFAULT_MAX_EVENTS, rng)
}

/// One flight path from an initial state drawn by `initial`.
pub fn simulate_flight_from<R, F>(initial: F, cfg: &FlightConfig, rng: &mut R) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    F: FnOnce(&mut R) -> State,
{
    let s0 = initial(rng);
    simulate_flight(&s0, cfg, rng)
}

pub fn simulate_flight_capped<R: Rng + ?Sized>(
    s0: &State,
    cfg: &FlightConfig,
    max_events: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let waiting = Exp::new(cfg.sigma).expect("sigma validated");
    let mut events = Vec::new();
    let mut cur = *s0;
    let mut now = 0.0;
    loop {
        let gap: f64 = waiting.sample(rng);
        if now + gap >= cfg.horizon {
            break;
        }
        if events.len() >= max_events {
            return Err(Error::Runaway { limit: max_events });
        }
        now += gap;
        let pre = flow_state(&cur, gap);
        let beta = sample_deflection(rng);
        let post = rotate_direction(pre.dir, beta);
        events.push(CollisionEvent {
            time: now,
            impact_point: pre.point,
            pre_dir: pre.dir,
            post_dir: post,
            deflection: beta,
            obstacle_index: None,
        });
        cur = State::new(pre.point, post);
    }
    Trajectory::new(*s0, cfg.horizon, events)
}

/// Hyperbolic distance travelled from the start by time `t`.
pub fn flight_displacement(traj: &Trajectory, t: f64) -> Result<f64> {
    let s = traj.position_at(t)?;
    Ok(hyp_distance(traj.initial.point, s.point))
}
