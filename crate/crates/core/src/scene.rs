//! A fully built room together with the receiver and noise settings that
//! turn true positions into measurements.

use nalgebra::Unit;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::availability::ApSet;
use crate::channel::{snapshot, MeasurementSnapshot, NoiseModel};
use crate::error::Result;
use crate::geometry::{build_room, cm2_to_m2, AccessPoint, Receiver, RoomConfig, UnitVec3, Vec3};
use crate::localization::{Localizer, ReceiverHeightPrior};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSettings {
    pub area_m2: f64,
    pub fov_semi_angle_rad: f64,
    pub orientation: UnitVec3,
    /// Apply the receiver field-of-view gate when measuring.
    pub apply_fov: bool,
}

impl Default for ReceiverSettings {
    fn default() -> Self {
        Self {
            area_m2: cm2_to_m2(1.0),
            fov_semi_angle_rad: 25f64.to_radians(),
            orientation: Vec3::z_axis(),
            apply_fov: false,
        }
    }
}

impl ReceiverSettings {
    pub fn validate(&self) -> Result<()> {
        Receiver::new(Vec3::zeros(), self.orientation, self.area_m2, self.fov_semi_angle_rad).map(|_| ())
    }

    pub fn facing(mut self, direction: Vec3) -> Self {
        self.orientation = Unit::new_normalize(direction);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub room: RoomConfig,
    pub aps: Vec<AccessPoint>,
    pub receiver: ReceiverSettings,
    pub prior: ReceiverHeightPrior,
    pub noise: NoiseModel,
}

impl Scene {
    pub fn new(room: RoomConfig, receiver: ReceiverSettings, nu: f64, noise: NoiseModel) -> Result<Self> {
        receiver.validate()?;
        let aps = build_room(&room)?;
        let prior = ReceiverHeightPrior::new(nu, &room)?;
        Ok(Self { room, aps, receiver, prior, noise })
    }

    pub fn receiver_at(&self, location: Vec3) -> Receiver {
        Receiver {
            location,
            orientation: self.receiver.orientation,
            area_m2: self.receiver.area_m2,
            fov_semi_angle_rad: self.receiver.fov_semi_angle_rad,
        }
    }

    pub fn measure<R: Rng + ?Sized>(&self, location: Vec3, blocked: ApSet, rng: &mut R) -> MeasurementSnapshot {
        snapshot(&self.aps, &self.receiver_at(location), blocked, &self.noise, self.receiver.apply_fov, rng)
    }

    pub fn localizer(&self) -> Localizer {
        Localizer {
            room: self.room,
            aps: self.aps.clone(),
            prior: self.prior,
            rx_orientation: self.receiver.orientation,
            area_m2: self.receiver.area_m2,
        }
    }
}
