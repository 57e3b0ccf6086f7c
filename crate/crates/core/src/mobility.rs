//! Random-waypoint routes with a bounded turn angle, sampled at a fixed
//! walking step.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RoomConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    pub max_length_m: f64,
    /// Distance walked per time step.
    pub step_m: f64,
    pub height_min_m: f64,
    pub height_max_m: f64,
    pub max_turn_rad: f64,
    /// Distance kept from every wall by the start point and the waypoints.
    pub footprint_margin_m: f64,
    /// Consecutive rejected candidates after which the route ends.
    pub max_rejections: usize,
    /// Measure turn angles on the horizontal projection of each segment.
    pub horizontal_turns: bool,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            max_length_m: 30.0,
            step_m: 0.1,
            height_min_m: 0.7,
            height_max_m: 1.1,
            max_turn_rad: FRAC_PI_2,
            footprint_margin_m: 0.5,
            max_rejections: 100,
            horizontal_turns: true,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self, room: &RoomConfig) -> Result<()> {
        if !(self.step_m > 0.0 && self.max_length_m > 0.0) {
            return Err(Error::Config("step and maximum route length must be positive".into()));
        }
        if !(self.height_min_m <= self.height_max_m && self.height_min_m >= 0.0 && self.height_max_m < room.height) {
            return Err(Error::Config("waypoint height band must lie inside the room".into()));
        }
        let m = self.footprint_margin_m;
        if !(m >= 0.0 && 2.0 * m < room.width && 2.0 * m < room.depth) {
            return Err(Error::Config(format!("footprint margin {m} leaves no walkable area")));
        }
        Ok(())
    }

    /// Upper bound on the number of step points in a route.
    pub fn max_steps(&self) -> usize {
        (self.max_length_m / self.step_m + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub waypoints: Vec<Vec3>,
    /// User position at each time step, starting at the first waypoint.
    pub step_points: Vec<Vec3>,
    pub total_length_m: f64,
}

/// Turn angle between consecutive segments `a -> b` and `b -> c`.
pub fn turn_angle(a: &Vec3, b: &Vec3, c: &Vec3, horizontal: bool) -> f64 {
    let (mut incoming, mut outgoing) = (b - a, c - b);
    if horizontal {
        incoming.z = 0.0;
        outgoing.z = 0.0;
    }
    let (ni, no) = (incoming.norm(), outgoing.norm());
    if ni == 0.0 || no == 0.0 {
        return 0.0;
    }
    (incoming.dot(&outgoing) / (ni * no)).clamp(-1.0, 1.0).acos()
}

/// Draws a random-waypoint route.
///
/// The walk starts on the strip `y = margin` along the first wall. Each new
/// waypoint is uniform over the inset footprint with a uniform height, and is
/// redrawn while its turn angle exceeds the limit. The route ends after
/// `max_rejections` consecutive redraws or at `max_length_m`.
pub fn generate_route<R: Rng + ?Sized>(room: &RoomConfig, cfg: &MobilityConfig, rng: &mut R) -> Route {
    let m = cfg.footprint_margin_m;
    let height = |rng: &mut R| rng.gen_range(cfg.height_min_m..=cfg.height_max_m);
    let start = Vec3::new(rng.gen_range(m..=room.width - m), m, height(rng));
    let mut waypoints = vec![start];
    let mut length = 0.0;
    let mut rejections = 0;

    while length < cfg.max_length_m && rejections < cfg.max_rejections {
        let candidate = Vec3::new(rng.gen_range(m..=room.width - m), rng.gen_range(m..=room.depth - m), height(rng));
        let last = *waypoints.last().expect("route has a start");
        if let [.., before, _] = waypoints.as_slice() {
            if turn_angle(before, &last, &candidate, cfg.horizontal_turns) > cfg.max_turn_rad {
                rejections += 1;
                continue;
            }
        }
        rejections = 0;
        let seg = (candidate - last).norm();
        if length + seg >= cfg.max_length_m {
            let keep = cfg.max_length_m - length;
            waypoints.push(last + (candidate - last) * (keep / seg));
            length = cfg.max_length_m;
        } else {
            waypoints.push(candidate);
            length += seg;
        }
    }

    let step_points = sample_steps(&waypoints, cfg.step_m, cfg.max_steps());
    Route { waypoints, step_points, total_length_m: length }
}

/// Walks the polyline taking straight steps of exactly `step` meters: each
/// step point is the first point further along the path at that distance
/// from the previous one. A final partial step is dropped.
pub fn sample_steps(waypoints: &[Vec3], step: f64, max_points: usize) -> Vec<Vec3> {
    let Some(&first) = waypoints.first() else {
        return Vec::new();
    };
    let mut points = vec![first];
    let mut segment = 0;
    let mut t = 0.0;
    while points.len() < max_points {
        let current = *points.last().expect("non-empty");
        let mut next = None;
        while segment + 1 < waypoints.len() {
            let (a, b) = (waypoints[segment], waypoints[segment + 1]);
            if let Some(u) = sphere_exit(&a, &b, &current, step, t) {
                next = Some((a + (b - a) * u, u));
                break;
            }
            segment += 1;
            t = 0.0;
        }
        match next {
            Some((p, u)) => {
                points.push(p);
                t = u;
            }
            None => break,
        }
    }
    points
}

/// Parameter on segment `a -> b` where the walk leaves the sphere of `radius`
/// around `center`. The part of the segment from `from` onward starts inside
/// the sphere, so the exit is the larger root of the intersection quadratic.
fn sphere_exit(a: &Vec3, b: &Vec3, center: &Vec3, radius: f64, from: f64) -> Option<f64> {
    let d = b - a;
    let f = a - center;
    let qa = d.norm_squared();
    if qa == 0.0 {
        return None;
    }
    let qb = 2.0 * f.dot(&d);
    let qc = f.norm_squared() - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let exit = (-qb + disc.sqrt()) / (2.0 * qa);
    (exit >= from && exit <= 1.0).then_some(exit)
}

/// Root-mean-square Euclidean error of one sequence of estimates.
pub fn route_rmse(estimates: &[Vec3], truth: &[Vec3]) -> Result<f64> {
    let (sse, n) = squared_error_sum(estimates, truth)?;
    Ok((sse / n as f64).sqrt())
}

/// Sum of squared Euclidean errors and the number of terms.
pub fn squared_error_sum(estimates: &[Vec3], truth: &[Vec3]) -> Result<(f64, usize)> {
    if estimates.len() != truth.len() {
        return Err(Error::Domain(format!("{} estimates for {} true points", estimates.len(), truth.len())));
    }
    if estimates.is_empty() {
        return Err(Error::Domain("cannot score an empty sequence".into()));
    }
    let sse = estimates.iter().zip(truth).map(|(e, t)| (e - t).norm_squared()).sum();
    Ok((sse, estimates.len()))
}

/// Pooled RMSE over several routes: all squared errors share one mean.
pub fn pooled_rmse(parts: &[(f64, usize)]) -> Option<f64> {
    let (sse, n) = parts.iter().fold((0.0, 0usize), |(s, c), (ps, pc)| (s + ps, c + pc));
    (n > 0).then(|| (sse / n as f64).sqrt())
}

/// Writes `step,x,y,z` rows for every step point.
pub fn write_route_csv<W: Write>(route: &Route, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "x", "y", "z"])?;
    for (i, p) in route.step_points.iter().enumerate() {
        w.write_record([i.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
