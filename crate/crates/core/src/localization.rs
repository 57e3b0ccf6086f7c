//! Raw position measurements from a snapshot of received gains.
//!
//! The method depends on how many access points are available:
//!
//! * none: no measurement;
//! * one: the weighted-average angle of arrival is intersected with the
//!   horizontal plane at the assumed receiver height;
//! * two or more: bearing rays from every available access point are
//!   intersected in the least-squares sense, and that point seeds a damped
//!   Gauss-Newton fit of the Lambertian gain model to all measured gains.

use nalgebra::{Matrix3, Unit};

use crate::availability::{classify_layout, LayoutModel};
use crate::channel::{smooth_gain_and_gradient, MeasurementSnapshot};
use crate::error::{Error, Result};
use crate::geometry::{AccessPoint, LedSource, RoomConfig, UnitVec3, Vec3};

/// Direction from an access point toward the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaEstimate {
    pub ap_index: usize,
    pub direction: UnitVec3,
}

/// Assumed receiver height used by the single access point method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverHeightPrior {
    pub nu: f64,
}

impl ReceiverHeightPrior {
    pub fn new(nu: f64, room: &RoomConfig) -> Result<Self> {
        if !(nu > 0.0 && nu < room.height) {
            return Err(Error::Config(format!("receiver height prior {nu} must lie in (0, {})", room.height)));
        }
        Ok(Self { nu })
    }
}

/// A position measurement handed to the tracking filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMeasurement {
    pub position: Vec3,
    pub model: LayoutModel,
    /// False only for Model-0 and for failed localizations.
    pub valid: bool,
    /// The iterative solver could not improve on its starting point.
    pub low_confidence: bool,
}

impl PositionMeasurement {
    pub fn invalid(model: LayoutModel) -> Self {
        Self { position: Vec3::zeros(), model, valid: false, low_confidence: false }
    }
}

/// Weighted average of LED orientations, weights being the measured gains.
pub fn estimate_aoa(ap: &AccessPoint, gains: &[f64]) -> Result<AoaEstimate> {
    if gains.len() != ap.led_count() {
        return Err(Error::Domain(format!(
            "expected {} gains for access point {}, got {}",
            ap.led_count(),
            ap.index,
            gains.len()
        )));
    }
    let sum: Vec3 = ap.leds.iter().zip(gains).map(|(led, &h)| led.orientation.into_inner() * h).sum();
    if gains.iter().all(|&h| h <= 0.0) {
        return Err(Error::NoSignal(ap.index));
    }
    Unit::try_new(sum, 1e-300)
        .map(|direction| AoaEstimate { ap_index: ap.index, direction })
        .ok_or(Error::NoSignal(ap.index))
}

/// Intersects the bearing ray of a single access point with the plane `z = nu`.
/// The result is clamped to the room footprint.
pub fn locate_single_ap(
    ap: &AccessPoint,
    aoa: &AoaEstimate,
    prior: &ReceiverHeightPrior,
    room: &RoomConfig,
) -> Result<Vec3> {
    let p = aoa.direction;
    if p.z >= 0.0 {
        return Err(Error::Geometry(format!("bearing from access point {} does not descend", ap.index)));
    }
    if prior.nu >= ap.position.z {
        return Err(Error::Geometry("receiver height prior is not below the access point".into()));
    }
    let t = (prior.nu - ap.position.z) / p.z;
    let hit = ap.position + p.into_inner() * t;
    let mut out = room.clamp_to_footprint(&hit);
    out.z = prior.nu;
    Ok(out)
}

/// Point closest, in summed squared perpendicular distance, to every bearing
/// ray. Clamped to the room volume.
pub fn locate_aoa_multilateration(aoas: &[AoaEstimate], aps: &[AccessPoint], room: &RoomConfig) -> Result<Vec3> {
    let mut distinct = aoas.iter().map(|a| a.ap_index).collect::<Vec<_>>();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 || distinct.len() != aoas.len() {
        return Err(Error::Domain("need bearings from at least two distinct access points".into()));
    }
    let mut normal = Matrix3::zeros();
    let mut rhs = Vec3::zeros();
    for aoa in aoas {
        let ap = aps
            .iter()
            .find(|ap| ap.index == aoa.ap_index)
            .ok_or_else(|| Error::Domain(format!("unknown access point {}", aoa.ap_index)))?;
        let p = aoa.direction.into_inner();
        let projector = Matrix3::identity() - p * p.transpose();
        normal += projector;
        rhs += projector * ap.position;
    }
    let eig = normal.symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig < 1e-9 * normal.trace() {
        return Err(Error::DegenerateGeometry("bearing rays are parallel".into()));
    }
    let solution = normal
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry("normal matrix is not positive definite".into()))?
        .solve(&rhs);
    Ok(room.clamp_to_volume(&solution))
}

/// Nonlinear least-squares fit of receiver position to measured LED gains.
#[derive(Debug, Clone)]
pub struct HybridProblem<'a> {
    terms: Vec<(&'a LedSource, f64)>,
    rx_orientation: UnitVec3,
    area_m2: f64,
}

impl<'a> HybridProblem<'a> {
    /// Uses every LED of every access point in `snapshot.available_aps`.
    pub fn new(snapshot: &MeasurementSnapshot, aps: &'a [AccessPoint], rx_orientation: UnitVec3, area_m2: f64) -> Self {
        let terms = aps
            .iter()
            .filter(|ap| snapshot.available_aps.contains(ap.index))
            .flat_map(|ap| ap.leds.iter().zip(snapshot.gains[ap.index].iter().copied()))
            .collect();
        Self { terms, rx_orientation, area_m2 }
    }

    pub fn residual_count(&self) -> usize {
        self.terms.len()
    }

    /// Sum of squared gain residuals at `p`.
    pub fn objective(&self, p: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(led, measured)| {
                let (model, _) = smooth_gain_and_gradient(led, p, &self.rx_orientation, self.area_m2);
                (model - measured).powi(2)
            })
            .sum()
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        self.normal_equations(p).2 * 2.0
    }

    /// Objective, Gauss-Newton matrix `J^T J`, and `J^T r` at `p`.
    fn normal_equations(&self, p: &Vec3) -> (f64, Matrix3<f64>, Vec3) {
        let mut cost = 0.0;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vec3::zeros();
        for (led, measured) in &self.terms {
            let (model, grad) = smooth_gain_and_gradient(led, p, &self.rx_orientation, self.area_m2);
            let r = model - measured;
            cost += r * r;
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        (cost, jtj, jtr)
    }
}

/// Outcome of [`locate_hybrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSolution {
    pub position: Vec3,
    pub iterations: usize,
    pub converged: bool,
    /// No step from the initial point reduced the objective.
    pub low_confidence: bool,
}

pub const HYBRID_MAX_ITERATIONS: usize = 100;
pub const HYBRID_STEP_TOLERANCE: f64 = 1e-6;
const LAMBDA_INITIAL: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;

/// Levenberg-Marquardt fit of the gain model, started at `init`.
pub fn locate_hybrid(problem: &HybridProblem<'_>, init: Vec3, room: &RoomConfig) -> HybridSolution {
    let mut p = init;
    let (mut cost, mut jtj, mut jtr) = problem.normal_equations(&p);
    let mut lambda = LAMBDA_INITIAL;
    let mut moved = false;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < HYBRID_MAX_ITERATIONS {
        iterations += 1;
        let floor = 1e-12 * jtj.trace();
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let Some(step) = damped.lu().solve(&-jtr) else {
                break 'outer;
            };
            if !step.iter().all(|s| s.is_finite()) {
                break 'outer;
            }
            if step.norm() < HYBRID_STEP_TOLERANCE {
                p += step;
                moved |= step.norm() > 0.0;
                converged = true;
                break 'outer;
            }
            let candidate = p + step;
            let (c_cost, c_jtj, c_jtr) = problem.normal_equations(&candidate);
            if c_cost < cost {
                p = candidate;
                cost = c_cost;
                jtj = c_jtj;
                jtr = c_jtr;
                lambda = (lambda / 10.0).max(LAMBDA_MIN);
                moved = true;
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                // no descent direction left at maximum damping
                converged = moved;
                break 'outer;
            }
        }
    }

    if !moved {
        return HybridSolution { position: room.clamp_to_volume(&init), iterations, converged, low_confidence: true };
    }
    HybridSolution { position: room.clamp_to_volume(&p), iterations, converged, low_confidence: false }
}

/// Everything needed to turn a snapshot into a position measurement.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub room: RoomConfig,
    pub aps: Vec<AccessPoint>,
    pub prior: ReceiverHeightPrior,
    pub rx_orientation: UnitVec3,
    pub area_m2: f64,
}

impl Localizer {
    /// Dispatches on the layout model of the available set. Failures are
    /// reported as invalid measurements rather than errors.
    pub fn localize(&self, snapshot: &MeasurementSnapshot) -> PositionMeasurement {
        let model = classify_layout(snapshot.available_aps);
        let result = match model {
            LayoutModel::NONE => return PositionMeasurement::invalid(model),
            LayoutModel::SINGLE => self.single(snapshot).map(|p| (p, false)),
            _ => self.multi(snapshot),
        };
        match result {
            Ok((position, low_confidence)) => PositionMeasurement { position, model, valid: true, low_confidence },
            Err(_) => PositionMeasurement::invalid(model),
        }
    }

    fn single(&self, snapshot: &MeasurementSnapshot) -> Result<Vec3> {
        let k = snapshot.available_aps.iter().next().expect("one available access point");
        let ap = &self.aps[k];
        let aoa = estimate_aoa(ap, snapshot.ap_gains(k))?;
        locate_single_ap(ap, &aoa, &self.prior, &self.room)
    }

    fn multi(&self, snapshot: &MeasurementSnapshot) -> Result<(Vec3, bool)> {
        let aoas = snapshot
            .available_aps
            .iter()
            .map(|k| estimate_aoa(&self.aps[k], snapshot.ap_gains(k)))
            .collect::<Result<Vec<_>>>()?;
        let init = locate_aoa_multilateration(&aoas, &self.aps, &self.room)?;
        let problem = HybridProblem::new(snapshot, &self.aps, self.rx_orientation, self.area_m2);
        let solution = locate_hybrid(&problem, init, &self.room);
        Ok((solution.position, solution.low_confidence))
    }
}

/// Free-function form of [`Localizer::localize`].
pub fn localize(snapshot: &MeasurementSnapshot, localizer: &Localizer) -> PositionMeasurement {
    localizer.localize(snapshot)
}
