//! Line-of-sight Lambertian channel and noisy measurement snapshots.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::availability::ApSet;
use crate::error::{Error, Result};
use crate::geometry::{AccessPoint, LedSource, Receiver, UnitVec3, Vec3};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// DC gain of one LED-to-receiver link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub gain: f64,
    pub propagation_delay_s: f64,
    /// Both angular gates passed.
    pub in_fov: bool,
}

/// Gain of the LOS link between `src` and `rx`, including the receiver
/// field-of-view gate and the source hemisphere gate.
pub fn los_gain(src: &LedSource, rx: &Receiver) -> Result<ChannelSample> {
    los_gain_gated(src, rx, true)
}

/// As [`los_gain`], with the receiver field-of-view gate optional. When the
/// gate is off the receiver still rejects light arriving from behind.
pub fn los_gain_gated(src: &LedSource, rx: &Receiver, apply_receiver_fov: bool) -> Result<ChannelSample> {
    let d = rx.location - src.location;
    let range = d.norm();
    if range <= f64::EPSILON {
        return Err(Error::Domain("source and receiver are coincident".into()));
    }
    let cos_phi = src.orientation.dot(&d) / range;
    let cos_theta = -rx.orientation.dot(&d) / range;
    let propagation_delay_s = range / SPEED_OF_LIGHT;

    let fov_limit = if apply_receiver_fov { rx.fov_semi_angle_rad } else { FRAC_PI_2 };
    let theta = cos_theta.clamp(-1.0, 1.0).acos();
    let phi = cos_phi.clamp(-1.0, 1.0).acos();
    let in_fov = cos_theta >= 0.0 && cos_phi >= 0.0 && theta <= fov_limit && phi <= FRAC_PI_2;
    let gain = if in_fov {
        lambertian_factor(src.lambertian_order) * cos_phi.powf(src.lambertian_order) * cos_theta * rx.area_m2
            / (range * range)
    } else {
        0.0
    };
    Ok(ChannelSample { gain, propagation_delay_s, in_fov })
}

fn lambertian_factor(order: f64) -> f64 {
    (order + 1.0) / (2.0 * PI)
}

/// Gate-free gain with negative cosines clamped to zero, and its gradient
/// with respect to the receiver location.
///
/// This is the smooth forward model used inside the position solver. Where
/// either cosine is non-positive the gain and gradient are both zero.
pub fn smooth_gain_and_gradient(
    src: &LedSource,
    rx_location: &Vec3,
    rx_orientation: &UnitVec3,
    area_m2: f64,
) -> (f64, Vec3) {
    let d = rx_location - src.location;
    let r2 = d.norm_squared();
    if r2 <= f64::EPSILON {
        return (0.0, Vec3::zeros());
    }
    // with a = q·d and b = -q_R·d, gain = c A a^g b / |d|^(g+3)
    let a = src.orientation.dot(&d);
    let b = -rx_orientation.dot(&d);
    if a <= 0.0 || b <= 0.0 {
        return (0.0, Vec3::zeros());
    }
    let g = src.lambertian_order;
    let r = r2.sqrt();
    let gain = lambertian_factor(g) * area_m2 * (a / r).powf(g) * (b / r) / r2;
    let grad = gain * (src.orientation.into_inner() * (g / a) - rx_orientation.into_inner() / b - d * ((g + 3.0) / r2));
    (gain, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    /// `h (1 + e)` with `e ~ N(0, sigma^2)`.
    MultiplicativeGaussian,
    /// `h + e` with `e ~ N(0, sigma^2)`.
    AdditiveGaussian,
}

/// How measurement error enters the received gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { kind: NoiseKind::MultiplicativeGaussian, sigma: 0.05 }
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { kind: NoiseKind::None, sigma: 0.0 };

    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    /// Applies noise to a strictly positive gain; the result is clamped at zero.
    pub fn apply<R: Rng + ?Sized>(&self, gain: f64, rng: &mut R) -> f64 {
        let noisy = match self.kind {
            NoiseKind::None => return gain,
            NoiseKind::MultiplicativeGaussian => {
                let e: f64 = rng.sample(StandardNormal);
                gain * (1.0 + self.sigma * e)
            }
            NoiseKind::AdditiveGaussian => {
                let e: f64 = rng.sample(StandardNormal);
                gain + self.sigma * e
            }
        };
        noisy.max(0.0)
    }
}

/// Measured gains at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSnapshot {
    /// `gains[k][n]` is the gain measured from LED `n` of access point `k`.
    pub gains: Vec<Vec<f64>>,
    pub available_aps: ApSet,
    /// Ground truth, used only for scoring.
    pub true_position: Vec3,
}

impl MeasurementSnapshot {
    pub fn ap_gains(&self, ap: usize) -> &[f64] {
        &self.gains[ap]
    }
}

/// Measures every LED of every non-blocked access point at the receiver.
///
/// An access point is available when it is not blocked and at least one of
/// its LEDs measured a positive gain. Gains of blocked access points are zero.
pub fn snapshot<R: Rng + ?Sized>(
    aps: &[AccessPoint],
    rx: &Receiver,
    blocked: ApSet,
    noise: &NoiseModel,
    apply_receiver_fov: bool,
    rng: &mut R,
) -> MeasurementSnapshot {
    let mut available_aps = ApSet::EMPTY;
    let gains = aps
        .iter()
        .map(|ap| {
            if blocked.contains(ap.index) {
                return vec![0.0; ap.led_count()];
            }
            let row: Vec<f64> = ap
                .leds
                .iter()
                .map(|led| {
                    // a receiver coincident with an LED measures nothing
                    let clean = los_gain_gated(led, rx, apply_receiver_fov).map_or(0.0, |s| s.gain);
                    if clean > 0.0 {
                        noise.apply(clean, rng)
                    } else {
                        0.0
                    }
                })
                .collect();
            if row.iter().any(|&g| g > 0.0) {
                available_aps.insert(ap.index);
            }
            row
        })
        .collect();
    MeasurementSnapshot { gains, available_aps, true_position: rx.location }
}
