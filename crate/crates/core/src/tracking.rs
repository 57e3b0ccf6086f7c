//! Constant-velocity Kalman filter whose measurement covariance switches with
//! the layout model active at each step.
//!
//! The measurement covariance for model `j` is `diag(sigma_v^2 / eta(j))`.
//! With `eta` identically one this is the conventional filter.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::availability::LayoutModel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::localization::PositionMeasurement;

/// Known user speed, in meters per step, used for the initial velocity spread.
pub const NOMINAL_SPEED: f64 = 0.1;

/// Position and velocity estimate with its error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
}

impl FilterState {
    pub fn position(&self) -> Vec3 {
        self.state.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.state.fixed_rows::<3>(3).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Step duration; velocities are in meters per step.
    pub dt: f64,
    /// Process noise standard deviation, shared by all six state components.
    pub sigma_x: f64,
    /// Measurement noise standard deviation before model scaling.
    pub sigma_v: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { dt: 1.0, sigma_x: 0.005, sigma_v: 0.05 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("sigma_x", self.sigma_x), ("sigma_v", self.sigma_v)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn transition(&self) -> Matrix6<f64> {
        let mut b = Matrix6::identity();
        for i in 0..3 {
            b[(i, i + 3)] = self.dt;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Conventional,
    Fixed,
    Calibrated {
        leds: usize,
    },
    Asymptotic,
    /// Caller-supplied coefficients.
    Custom,
}

/// Per-model measurement trust coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientScheme {
    pub kind: SchemeKind,
    eta: [f64; LayoutModel::COUNT],
}

impl CoefficientScheme {
    pub fn new(kind: SchemeKind, eta: [f64; LayoutModel::COUNT]) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("adaptive coefficients must be positive and finite, got {bad}")));
        }
        Ok(Self { kind, eta })
    }

    /// `eta = 1` for every model.
    pub fn conventional() -> Self {
        Self { kind: SchemeKind::Conventional, eta: [1.0; LayoutModel::COUNT] }
    }

    pub fn eta(&self, model: LayoutModel) -> f64 {
        self.eta[model.index()]
    }

    pub fn etas(&self) -> &[f64; LayoutModel::COUNT] {
        &self.eta
    }
}

/// Starts the filter at a position with zero velocity.
pub fn init_filter(first_meas: Vec3, cfg: &FilterConfig) -> FilterState {
    let mut state = Vector6::zeros();
    state.fixed_rows_mut::<3>(0).copy_from(&first_meas);
    let pos_var = cfg.sigma_v * cfg.sigma_v;
    let vel_var = NOMINAL_SPEED * NOMINAL_SPEED;
    let covariance = Matrix6::from_diagonal(&Vector6::new(pos_var, pos_var, pos_var, vel_var, vel_var, vel_var));
    FilterState { state, covariance }
}

pub fn kf_predict(prev: &FilterState, cfg: &FilterConfig) -> FilterState {
    let b = cfg.transition();
    let q = cfg.sigma_x * cfg.sigma_x;
    let covariance = b * prev.covariance * b.transpose() + Matrix6::identity() * q;
    FilterState { state: b * prev.state, covariance }
}

/// Measurement update with covariance `diag(sigma_v^2 / eta)`.
///
/// An invalid measurement is replaced by the predicted position, so the mean
/// is left unchanged.
pub fn kf_update(
    predicted: &FilterState,
    meas: &PositionMeasurement,
    cfg: &FilterConfig,
    eta: f64,
) -> Result<FilterState> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let c = observation();
    let observed = c * predicted.state;
    let z = if meas.valid { meas.position } else { observed };
    let r = cfg.sigma_v * cfg.sigma_v / eta;
    let p = &predicted.covariance;
    let innovation_cov = c * p * c.transpose() + Matrix3::identity() * r;
    let inv = innovation_cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?
        .inverse();
    let gain = p * c.transpose() * inv;
    let state = predicted.state + gain * (z - observed);
    let updated = (Matrix6::identity() - gain * c) * p;
    let covariance = (updated + updated.transpose()) * 0.5;
    Ok(FilterState { state, covariance })
}

fn observation() -> Matrix3x6<f64> {
    Matrix3x6::new(
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
    )
}

/// One predict/update cycle per measurement, with `eta` picked by the layout
/// model of that step. Returns the posterior position at every step.
pub fn track_route(
    measurements: &[PositionMeasurement],
    models: &[LayoutModel],
    cfg: &FilterConfig,
    scheme: &CoefficientScheme,
    init: FilterState,
) -> Result<Vec<Vec3>> {
    if measurements.len() != models.len() {
        return Err(Error::Domain(format!("{} measurements but {} layout models", measurements.len(), models.len())));
    }
    let mut state = init;
    measurements
        .iter()
        .zip(models)
        .map(|(meas, &model)| {
            let predicted = kf_predict(&state, cfg);
            state = kf_update(&predicted, meas, cfg, scheme.eta(model))?;
            Ok(state.position())
        })
        .collect()
}
