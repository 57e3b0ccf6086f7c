//! Room, access-point and LED geometry.
//!
//! Four access points hang at the ceiling corners of a rectangular room. Each
//! one carries several co-located LEDs whose orientations fan out around the
//! access point's center orientation in one or two rings.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or displacement in meters.
pub type Vec3 = Vector3<f64>;

/// A unit-norm direction.
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Smallest supported number of LEDs on an access point.
pub const MIN_LEDS: usize = 3;
/// Largest supported number of LEDs on an access point.
pub const MAX_LEDS: usize = 20;
/// Number of LEDs on the inner ring of the two-layer architecture.
const INNER_RING: usize = 6;

/// A single Lambertian emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct LedSource {
    pub location: Vec3,
    pub orientation: UnitVec3,
    /// Lambertian order, at least 1.
    pub lambertian_order: f64,
}

/// A ceiling-mounted luminaire with several co-located, differently oriented LEDs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub index: usize,
    pub position: Vec3,
    pub center_orientation: UnitVec3,
    pub leds: Vec<LedSource>,
}

impl AccessPoint {
    pub fn led_count(&self) -> usize {
        self.leds.len()
    }
}

/// Photodiode receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub location: Vec3,
    pub orientation: UnitVec3,
    pub area_m2: f64,
    pub fov_semi_angle_rad: f64,
}

impl Receiver {
    pub fn new(location: Vec3, orientation: UnitVec3, area_m2: f64, fov_semi_angle_rad: f64) -> Result<Self> {
        if !(area_m2 > 0.0 && area_m2.is_finite()) {
            return Err(Error::Config(format!("receiver area must be positive, got {area_m2}")));
        }
        if !(fov_semi_angle_rad > 0.0 && fov_semi_angle_rad <= FRAC_PI_2) {
            return Err(Error::Config(format!(
                "receiver field of view must lie in (0, pi/2], got {fov_semi_angle_rad}"
            )));
        }
        if !location.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("receiver location must be finite".into()));
        }
        Ok(Self { location, orientation, area_m2, fov_semi_angle_rad })
    }

    /// Same receiver moved to `location`.
    pub fn at(&self, location: Vec3) -> Self {
        Self { location, ..self.clone() }
    }
}

/// Converts a photodiode area from cm² to m².
pub fn cm2_to_m2(area_cm2: f64) -> f64 {
    area_cm2 * 1e-4
}

/// Room dimensions and access-point architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    /// Elevation of each access point's center orientation below horizontal.
    pub ap_tilt_down_rad: f64,
    /// Tilt of the first LED ring from the center orientation.
    pub led_tilt_alpha_rad: f64,
    /// Additional tilt of the second LED ring.
    pub led_tilt_beta_rad: f64,
    pub leds_per_ap: usize,
    pub lambertian_order: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            width: 6.0,
            depth: 6.0,
            height: 3.0,
            ap_tilt_down_rad: 45f64.to_radians(),
            led_tilt_alpha_rad: 25f64.to_radians(),
            led_tilt_beta_rad: 10f64.to_radians(),
            leds_per_ap: 7,
            lambertian_order: 10.0,
        }
    }
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("width", self.width), ("depth", self.depth), ("height", self.height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("room {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("ap_tilt_down", self.ap_tilt_down_rad),
            ("led_tilt_alpha", self.led_tilt_alpha_rad),
            ("led_tilt_beta", self.led_tilt_beta_rad),
        ] {
            if !(v > 0.0 && v < FRAC_PI_2) {
                return Err(Error::Config(format!("{name} must lie in (0, pi/2) rad, got {v}")));
            }
        }
        check_led_count(self.leds_per_ap)?;
        if !(self.lambertian_order >= 1.0 && self.lambertian_order.is_finite()) {
            return Err(Error::Config(format!(
                "lambertian order must be finite and >= 1, got {}",
                self.lambertian_order
            )));
        }
        Ok(())
    }

    pub fn with_leds(self, leds_per_ap: usize) -> Self {
        Self { leds_per_ap, ..self }
    }

    /// Clamps a point into the room volume.
    pub fn clamp_to_volume(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.depth), p.z.clamp(0.0, self.height))
    }

    /// Clamps the horizontal components into the floor footprint, leaving z untouched.
    pub fn clamp_to_footprint(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.depth), p.z)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.depth).contains(&p.y) && (0.0..=self.height).contains(&p.z)
    }
}

fn check_led_count(n: usize) -> Result<()> {
    if !(MIN_LEDS..=MAX_LEDS).contains(&n) {
        return Err(Error::Config(format!("LED count must lie in [{MIN_LEDS}, {MAX_LEDS}], got {n}")));
    }
    Ok(())
}

/// Unit vector from azimuth (counter-clockwise from +x) and elevation (above horizontal).
pub fn direction_from_angles(azimuth: f64, elevation: f64) -> UnitVec3 {
    Unit::new_normalize(Vec3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin()))
}

/// Angle between two directions, in `[0, pi]`.
pub fn angle_between(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Builds the four corner access points.
///
/// Corners are visited around the perimeter: `(0,0)`, `(W,0)`, `(W,D)`,
/// `(0,D)`, so indices 0/2 and 1/3 are diagonal partners. Every access point
/// looks along the inward 45° diagonal, tilted down by `ap_tilt_down_rad`.
pub fn build_room(cfg: &RoomConfig) -> Result<Vec<AccessPoint>> {
    cfg.validate()?;
    let corners = [
        (0.0, 0.0, PI / 4.0),
        (cfg.width, 0.0, 3.0 * PI / 4.0),
        (cfg.width, cfg.depth, -3.0 * PI / 4.0),
        (0.0, cfg.depth, -PI / 4.0),
    ];
    corners
        .iter()
        .enumerate()
        .map(|(index, &(x, y, azimuth))| {
            let position = Vec3::new(x, y, cfg.height);
            let center = direction_from_angles(azimuth, -cfg.ap_tilt_down_rad);
            let leds = build_led_layout(&center, cfg.leds_per_ap, cfg.led_tilt_alpha_rad, cfg.led_tilt_beta_rad)?
                .into_iter()
                .map(|orientation| LedSource {
                    location: position,
                    orientation,
                    lambertian_order: cfg.lambertian_order,
                })
                .collect();
            Ok(AccessPoint { index, position, center_orientation: center, leds })
        })
        .collect()
}

/// Orientation of every LED on an access point with `n_leds` LEDs.
///
/// * 3 LEDs: a single ring at tilt `alpha`, no middle LED.
/// * 4 to 7 LEDs: a middle LED plus `n - 1` LEDs at tilt `alpha`.
/// * 8 to 20 LEDs: a middle LED, six LEDs at tilt `alpha`, and `n - 7` LEDs at
///   tilt `alpha + beta`.
///
/// LEDs on a ring are equally spaced in azimuth about the center axis. The
/// azimuth reference is `up × center` (or +x when `center` is vertical), and
/// both rings start at azimuth zero.
pub fn build_led_layout(center: &UnitVec3, n_leds: usize, alpha: f64, beta: f64) -> Result<Vec<UnitVec3>> {
    check_led_count(n_leds)?;
    let (u, v) = ring_frame(center);
    let ring = |tilt: f64, count: usize| {
        (0..count).map(move |i| {
            let azimuth = 2.0 * PI * i as f64 / count as f64;
            let radial = u * azimuth.cos() + v * azimuth.sin();
            Unit::new_normalize(center.into_inner() * tilt.cos() + radial * tilt.sin())
        })
    };

    let mut out = Vec::with_capacity(n_leds);
    match n_leds {
        3 => out.extend(ring(alpha, 3)),
        4..=7 => {
            out.push(*center);
            out.extend(ring(alpha, n_leds - 1));
        }
        _ => {
            out.push(*center);
            out.extend(ring(alpha, INNER_RING));
            out.extend(ring(alpha + beta, n_leds - 1 - INNER_RING));
        }
    }
    Ok(out)
}

/// Orthonormal pair spanning the plane perpendicular to `center`.
fn ring_frame(center: &UnitVec3) -> (Vec3, Vec3) {
    let up = Vec3::z();
    let cross = up.cross(center);
    let u = if cross.norm() < 1e-9 { Vec3::x() } else { cross.normalize() };
    let v = center.cross(&u).normalize();
    (u, v)
}
