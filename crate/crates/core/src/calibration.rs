//! Mean localization error per layout model and the adaptive coefficients
//! derived from it.
//!
//! The calibrated coefficient of model `j` with `N` LEDs per access point is
//! `omega(5, N) / omega(j, N)`, where `omega` is the mean unfiltered
//! localization error. The asymptotic scheme evaluates the same ratio at the
//! largest supported LED count.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::availability::{classify_layout, LayoutModel};
use crate::error::{Error, Result};
use crate::geometry::{RoomConfig, Vec3, MAX_LEDS};
use crate::scene::Scene;
use crate::seed::{stream, TAG_CALIBRATION};
use crate::tracking::{CoefficientScheme, SchemeKind};

/// LED count standing in for an unbounded number of LEDs.
pub const ASYMPTOTIC_LEDS: usize = MAX_LEDS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub grid_spacing_m: f64,
    /// Noisy snapshots per grid point and access-point subset.
    pub draws: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { grid_spacing_m: 0.25, draws: 10 }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.grid_spacing_m.is_nan() || self.grid_spacing_m <= 0.0 || self.draws == 0 {
            return Err(Error::Config("calibration needs a positive grid spacing and at least one draw".into()));
        }
        Ok(())
    }
}

/// One `(model, LED count)` cell of the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaCell {
    pub omega_m: f64,
    /// Number of localization errors averaged.
    pub samples: usize,
    /// Standard error of `omega_m`; not persisted.
    pub std_err_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationTable {
    cells: BTreeMap<(LayoutModel, usize), OmegaCell>,
    pub draws_per_cell: usize,
    pub grid_spacing_m: f64,
}

impl CalibrationTable {
    pub fn new(draws_per_cell: usize, grid_spacing_m: f64) -> Self {
        Self { cells: BTreeMap::new(), draws_per_cell, grid_spacing_m }
    }

    pub fn insert(&mut self, model: LayoutModel, leds: usize, cell: OmegaCell) -> Result<()> {
        if model == LayoutModel::NONE {
            return Err(Error::Domain("Model-0 has no localization error".into()));
        }
        if !(cell.omega_m > 0.0 && cell.omega_m.is_finite()) {
            return Err(Error::Domain(format!("omega for {model}, N={leds} must be positive, got {}", cell.omega_m)));
        }
        self.cells.insert((model, leds), cell);
        Ok(())
    }

    pub fn omega(&self, model: LayoutModel, leds: usize) -> Option<f64> {
        self.cells.get(&(model, leds)).map(|c| c.omega_m)
    }

    pub fn cell(&self, model: LayoutModel, leds: usize) -> Option<&OmegaCell> {
        self.cells.get(&(model, leds))
    }

    pub fn led_counts(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.cells.keys().map(|(_, n)| *n).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// True when models 1 through 5 are all present for `leds`.
    pub fn covers(&self, leds: usize) -> bool {
        LayoutModel::measuring().all(|m| self.cells.contains_key(&(m, leds)))
    }

    pub fn merge(&mut self, other: CalibrationTable) {
        self.cells.extend(other.cells);
    }

    pub fn iter(&self) -> impl Iterator<Item = (LayoutModel, usize, &OmegaCell)> {
        self.cells.iter().map(|((m, n), c)| (*m, *n, c))
    }

    /// CSV with columns `model,n_leds,omega_m,draws,grid_spacing`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "n_leds", "omega_m", "draws", "grid_spacing"])?;
        for (m, n, c) in self.iter() {
            w.write_record([
                m.id().to_string(),
                n.to_string(),
                c.omega_m.to_string(),
                self.draws_per_cell.to_string(),
                self.grid_spacing_m.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            model: u8,
            n_leds: usize,
            omega_m: f64,
            draws: usize,
            grid_spacing: f64,
        }
        let mut table = CalibrationTable::default();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            table.draws_per_cell = row.draws;
            table.grid_spacing_m = row.grid_spacing;
            table.insert(
                LayoutModel::new(row.model)?,
                row.n_leds,
                OmegaCell { omega_m: row.omega_m, samples: 0, std_err_m: None },
            )?;
        }
        Ok(table)
    }
}

/// Receiver positions at cell centers of a square grid at height `z`.
pub fn receiver_grid(room: &RoomConfig, spacing: f64, z: f64) -> Vec<Vec3> {
    let axis = |extent: f64| {
        let count = (extent / spacing).floor().max(1.0) as usize;
        let offset = (extent - (count - 1) as f64 * spacing) / 2.0;
        (0..count).map(move |i| offset + i as f64 * spacing)
    };
    axis(room.width).flat_map(|x| axis(room.depth).map(move |y| Vec3::new(x, y, z))).collect()
}

/// Estimates `omega(j, N)` for models 1 through 5 and each LED count.
///
/// For every grid point at the assumed receiver height, every access-point
/// subset of the model, and `draws` noisy snapshots, the unfiltered
/// localization error is recorded; the table holds the grand means. Each
/// `(N, model, subset, grid point)` cell owns a stream derived from `seed`.
pub fn calibrate_omega(
    base: &Scene,
    led_counts: &[usize],
    settings: &CalibrationSettings,
    seed: u64,
) -> Result<CalibrationTable> {
    settings.validate()?;
    let mut table = CalibrationTable::new(settings.draws, settings.grid_spacing_m);
    for &leds in led_counts {
        let scene = Scene::new(base.room.with_leds(leds), base.receiver, base.prior.nu, base.noise)?;
        let localizer = scene.localizer();
        let grid = receiver_grid(&scene.room, settings.grid_spacing_m, scene.prior.nu);
        for model in LayoutModel::measuring() {
            let mut per_point: Vec<(f64, f64, usize)> = Vec::new();
            for (subset_idx, subset) in model.subsets().into_iter().enumerate() {
                let blocked = subset.complement();
                let chunk: Vec<(f64, f64, usize)> = grid
                    .par_iter()
                    .enumerate()
                    .map(|(grid_idx, &p)| {
                        let mut rng = stream(
                            seed,
                            &[TAG_CALIBRATION, leds as u64, model.id() as u64, subset_idx as u64, grid_idx as u64],
                        );
                        let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0);
                        for _ in 0..settings.draws {
                            let snap = scene.measure(p, blocked, &mut rng);
                            if classify_layout(snap.available_aps) != model {
                                continue;
                            }
                            let m = localizer.localize(&snap);
                            if m.valid {
                                let e = (m.position - p).norm();
                                sum += e;
                                sum_sq += e * e;
                                count += 1;
                            }
                        }
                        (sum, sum_sq, count)
                    })
                    .collect();
                per_point.extend(chunk);
            }
            let (sum, sum_sq, samples) =
                per_point.iter().fold((0.0, 0.0, 0), |(s, q, c), (ps, pq, pc)| (s + ps, q + pq, c + pc));
            if samples == 0 {
                return Err(Error::Domain(format!("no valid localizations for {model} with {leds} LEDs")));
            }
            // noiseless inversion can be exact; keep omega strictly positive
            let n = samples as f64;
            let mean = sum / n;
            let std_err_m = (samples > 1).then(|| ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt());
            let omega_m = mean.max(f64::MIN_POSITIVE);
            table.insert(model, leds, OmegaCell { omega_m, samples, std_err_m })?;
        }
    }
    Ok(table)
}

/// Halving coefficients: `eta(j) = 2^(j - 5)`.
pub fn fixed_coefficients() -> CoefficientScheme {
    CoefficientScheme::new(SchemeKind::Fixed, [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0])
        .expect("fixed coefficients are positive")
}

/// `eta(j) = omega(5, N) / omega(j, N)` for models 1 to 5; Model-0 gets half
/// of the smallest of those.
pub fn calibrated_coefficients(table: &CalibrationTable, leds: usize) -> Result<CoefficientScheme> {
    ratio_coefficients(table, leds, SchemeKind::Calibrated { leds })
}

/// Calibrated coefficients evaluated at [`ASYMPTOTIC_LEDS`].
pub fn asymptotic_coefficients(table: &CalibrationTable) -> Result<CoefficientScheme> {
    ratio_coefficients(table, ASYMPTOTIC_LEDS, SchemeKind::Asymptotic)
}

fn ratio_coefficients(table: &CalibrationTable, leds: usize, kind: SchemeKind) -> Result<CoefficientScheme> {
    let omega = |m: LayoutModel| {
        table
            .omega(m, leds)
            .ok_or_else(|| Error::Domain(format!("calibration table has no entry for {m} with {leds} LEDs")))
    };
    let reference = omega(LayoutModel::ALL)?;
    let mut eta = [0.0; LayoutModel::COUNT];
    for m in LayoutModel::measuring() {
        eta[m.index()] = reference / omega(m)?;
    }
    eta[0] = eta[1..].iter().copied().fold(f64::INFINITY, f64::min) / 2.0;
    CoefficientScheme::new(kind, eta)
}
