//! Lorentz process and limiting random flight on the Poincaré half-plane.
//!
//! The crate is organised bottom-up:
//!
//! * [`hypgeo`]: exact half-plane geometry, covering distances, circles,
//!   the geodesic flow and Möbius isometries.
//! * [`obstacles`]: homogeneous Poisson fields with respect to hyperbolic
//!   area, nearest-neighbour laws and shot-noise fields.
//! * [`billiard`]: event-driven hard-disk billiard (the Lorentz process).
//! * [`flight`]: the Markovian random flight obtained in the
//!   Boltzmann–Grad limit.
//! * [`lab`]: statistics, deterministic parallel experiments, export.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard;
pub mod error;
pub mod flight;
pub mod hypgeo;
pub mod lab;
pub mod obstacles;
pub mod quad;

pub use error::{Error, Result};
