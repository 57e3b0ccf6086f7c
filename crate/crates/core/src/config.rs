//! Experiment configuration and its TOML file form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::availability::BlockingConfig;
use crate::calibration::CalibrationSettings;
use crate::channel::{NoiseKind, NoiseModel};
use crate::error::{Error, Result};
use crate::geometry::{cm2_to_m2, RoomConfig, MAX_LEDS, MIN_LEDS};
use crate::mobility::MobilityConfig;
use crate::report::Scheme;
use crate::scene::{ReceiverSettings, Scene};
use crate::tracking::FilterConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub room: RoomConfig,
    pub receiver: ReceiverSettings,
    /// Assumed receiver height.
    pub nu_m: f64,
    pub mobility: MobilityConfig,
    pub filter: FilterConfig,
    pub noise: NoiseModel,
    pub blocking: BlockingConfig,
    pub schemes: Vec<Scheme>,
    pub routes: usize,
    pub master_seed: u64,
    pub calibration: CalibrationSettings,
    /// Values swept by the blocking sweep.
    pub block_probs: Vec<f64>,
    /// Values swept by the LED-count sweep.
    pub led_counts: Vec<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigFile::default().into_experiment().expect("default configuration is valid")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        ConfigFile::load(path)?.into_experiment()
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.receiver.validate()?;
        self.mobility.validate(&self.room)?;
        self.filter.validate()?;
        NoiseModel::new(self.noise.kind, self.noise.sigma)?;
        BlockingConfig::new(self.blocking.block_probability)?;
        self.calibration.validate()?;
        self.scene()?;
        if self.routes == 0 {
            return Err(Error::Config("routes must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.block_probs.is_empty() || self.led_counts.is_empty() {
            return Err(Error::Config("sweep lists must be nonempty".into()));
        }
        for &p in &self.block_probs {
            BlockingConfig::new(p)?;
        }
        for &n in &self.led_counts {
            if !(MIN_LEDS..=MAX_LEDS).contains(&n) {
                return Err(Error::Config(format!("LED count {n} outside [{MIN_LEDS}, {MAX_LEDS}]")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<Scene> {
        Scene::new(self.room, self.receiver, self.nu_m, self.noise)
    }
}

/// Flat key-value form read from TOML. Every key is optional and defaults to
/// the standard simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub gamma: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub fov_deg: f64,
    pub area_cm2: f64,
    /// Width, depth, height in meters.
    pub room: [f64; 3],
    pub nu_m: f64,
    pub sigma_x: f64,
    pub sigma_v: f64,
    pub channel_noise_sigma: f64,
    pub apply_receiver_fov: bool,

    pub noise_kind: NoiseKind,
    pub ap_tilt_deg: f64,
    pub leds: usize,
    pub block_prob: f64,
    pub block_probs: Vec<f64>,
    pub led_counts: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub routes: usize,
    pub seed: u64,
    pub dt: f64,
    pub max_route_m: f64,
    pub step_m: f64,
    pub calibration_grid_m: f64,
    pub calibration_draws: usize,
    pub threads: Option<usize>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            alpha_deg: 25.0,
            beta_deg: 10.0,
            fov_deg: 25.0,
            area_cm2: 1.0,
            room: [6.0, 6.0, 3.0],
            nu_m: 0.9,
            sigma_x: 0.005,
            sigma_v: 0.05,
            channel_noise_sigma: 0.05,
            apply_receiver_fov: false,
            noise_kind: NoiseKind::MultiplicativeGaussian,
            ap_tilt_deg: 45.0,
            leds: 7,
            block_prob: 0.25,
            block_probs: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            led_counts: (MIN_LEDS..=MAX_LEDS).collect(),
            schemes: Scheme::ALL.to_vec(),
            routes: 200,
            seed: 1,
            dt: 1.0,
            max_route_m: 30.0,
            step_m: 0.1,
            calibration_grid_m: 0.25,
            calibration_draws: 10,
            threads: None,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a file; a missing or unreadable file is an I/O error, bad
    /// contents a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn into_experiment(self) -> Result<ExperimentConfig> {
        let [width, depth, height] = self.room;
        let room = RoomConfig {
            width,
            depth,
            height,
            ap_tilt_down_rad: self.ap_tilt_deg.to_radians(),
            led_tilt_alpha_rad: self.alpha_deg.to_radians(),
            led_tilt_beta_rad: self.beta_deg.to_radians(),
            leds_per_ap: self.leds,
            lambertian_order: self.gamma,
        };
        let receiver = ReceiverSettings {
            area_m2: cm2_to_m2(self.area_cm2),
            fov_semi_angle_rad: self.fov_deg.to_radians(),
            apply_fov: self.apply_receiver_fov,
            ..ReceiverSettings::default()
        };
        let mut schemes = self.schemes;
        schemes.sort_unstable();
        schemes.dedup();
        let cfg = ExperimentConfig {
            room,
            receiver,
            nu_m: self.nu_m,
            mobility: MobilityConfig { max_length_m: self.max_route_m, step_m: self.step_m, ..Default::default() },
            filter: FilterConfig { dt: self.dt, sigma_x: self.sigma_x, sigma_v: self.sigma_v },
            noise: NoiseModel::new(self.noise_kind, self.channel_noise_sigma)?,
            blocking: BlockingConfig::new(self.block_prob)?,
            schemes,
            routes: self.routes,
            master_seed: self.seed,
            calibration: CalibrationSettings { grid_spacing_m: self.calibration_grid_m, draws: self.calibration_draws },
            block_probs: self.block_probs,
            led_counts: self.led_counts,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
