//! Trajectory export as CSV (`t,x,y,alpha,event`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::billiard::Trajectory;
use crate::error::{Error, Result};
use crate::hypgeo::{cayley, cayley_angle, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Upper half-plane coordinates.
    Halfplane,
    /// Poincaré disk coordinates via the Cayley transform.
    Disk,
}

/// `(t, x, y, alpha, event)`.
pub type Row = (f64, f64, f64, f64, u8);

/// Rows of the export: grid times `0, dt, 2dt, …` up to the horizon, merged
/// with the event times (flagged with `event = 1`).
pub fn trajectory_rows(traj: &Trajectory, model: Model, dt: f64) -> Result<Vec<Row>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let steps = (traj.horizon / dt).floor() as usize;
    let mut times: Vec<(f64, u8)> = (0..=steps).map(|k| (k as f64 * dt, 0)).collect();
    times.extend(traj.events.iter().map(|e| (e.time, 1)));
    times.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let project = |s: &State| match model {
        Model::Halfplane => (s.point.x(), s.point.y(), s.dir.alpha()),
        Model::Disk => {
            let (u, v) = cayley(s.point);
            (u, v, cayley_angle(s))
        }
    };
    times
        .into_iter()
        .map(|(t, flag)| {
            let (x, y, a) = project(&traj.position_at(t)?);
            Ok((t, x, y, a, flag))
        })
        .collect()
}

pub fn export_trajectory(traj: &Trajectory, model: Model, dest: &Path, dt: f64) -> Result<()> {
    let rows = trajectory_rows(traj, model, dt)?;
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dest.display()));
    let mut w = BufWriter::new(File::create(dest).map_err(io)?);
    writeln!(w, "t,x,y,alpha,event").map_err(io)?;
    for (t, x, y, a, flag) in rows {
        writeln!(w, "{t},{x},{y},{a},{flag}").map_err(io)?;
    }
    w.flush().map_err(io)
}
