//! Seeded Monte Carlo runs: one route at a time, then sweeps over the
//! blocking probability or the LED count.

use std::collections::BTreeSet;
use std::io::Write;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::availability::{draw_blocked, BlockingConfig};
use crate::calibration::{
    asymptotic_coefficients, calibrate_omega, calibrated_coefficients, fixed_coefficients, CalibrationTable,
    ASYMPTOTIC_LEDS,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::localization::{Localizer, PositionMeasurement};
use crate::mobility::{generate_route, MobilityConfig, Route};
use crate::report::{format_sig6, ResultRow, Scheme};
use crate::scene::Scene;
use crate::seed::{derive_seed, SimRng, TAG_CALIBRATION, TAG_ROUTE};
use crate::tracking::{init_filter, kf_predict, kf_update, CoefficientScheme, FilterConfig};

/// A scheme together with the coefficients its filter runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScheme {
    pub scheme: Scheme,
    /// `None` for the unfiltered scheme.
    pub coefficients: Option<CoefficientScheme>,
}

/// Everything needed to simulate routes at one sweep point.
#[derive(Debug, Clone)]
pub struct RouteContext {
    pub scene: Scene,
    pub localizer: Localizer,
    pub filter: FilterConfig,
    pub mobility: MobilityConfig,
    pub blocking: BlockingConfig,
    pub schemes: Vec<ResolvedScheme>,
}

impl RouteContext {
    /// Builds the context for `leds` LEDs per access point and blocking
    /// probability `block_prob`. `table` must cover `leds` if the calibrated
    /// scheme is selected and [`ASYMPTOTIC_LEDS`] if the asymptotic one is.
    pub fn new(cfg: &ExperimentConfig, leds: usize, block_prob: f64, table: Option<&CalibrationTable>) -> Result<Self> {
        let mut room_cfg = cfg.clone();
        room_cfg.room = cfg.room.with_leds(leds);
        let scene = room_cfg.scene()?;
        let schemes = resolve_schemes(&cfg.schemes, table, leds)?;
        Ok(Self {
            localizer: scene.localizer(),
            scene,
            filter: cfg.filter,
            mobility: cfg.mobility,
            blocking: BlockingConfig::new(block_prob)?,
            schemes,
        })
    }

    /// Position reported before the first valid measurement.
    pub fn prior_position(&self) -> Vec3 {
        Vec3::new(self.scene.room.width / 2.0, self.scene.room.depth / 2.0, self.scene.prior.nu)
    }
}

pub fn resolve_schemes(
    schemes: &[Scheme],
    table: Option<&CalibrationTable>,
    leds: usize,
) -> Result<Vec<ResolvedScheme>> {
    let need_table = || table.ok_or_else(|| Error::Config("calibrated schemes need a calibration table".into()));
    schemes
        .iter()
        .map(|&scheme| {
            let coefficients = match scheme {
                Scheme::None => None,
                Scheme::Conventional => Some(CoefficientScheme::conventional()),
                Scheme::Fixed => Some(fixed_coefficients()),
                Scheme::Calibrated => Some(calibrated_coefficients(need_table()?, leds)?),
                Scheme::Asymptotic => Some(asymptotic_coefficients(need_table()?)?),
            };
            Ok(ResolvedScheme { scheme, coefficients })
        })
        .collect()
}

/// LED counts a calibration must cover for the given schemes and sweep.
pub fn calibration_led_counts(schemes: &[Scheme], leds: &[usize]) -> Vec<usize> {
    let mut counts = BTreeSet::new();
    if schemes.contains(&Scheme::Calibrated) {
        counts.extend(leds.iter().copied());
    }
    if schemes.contains(&Scheme::Asymptotic) {
        counts.insert(ASYMPTOTIC_LEDS);
    }
    counts.into_iter().collect()
}

/// Calibration seed used by every run with this master seed.
pub fn calibration_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, &[TAG_CALIBRATION])
}

/// Runs the calibration for `led_counts` with the configuration's scene,
/// settings and seed.
pub fn calibrate(cfg: &ExperimentConfig, led_counts: &[usize]) -> Result<CalibrationTable> {
    with_threads(cfg.threads, || {
        calibrate_omega(&cfg.scene()?, led_counts, &cfg.calibration, calibration_seed(cfg.master_seed))
    })
}

/// Seed of route `route_idx` at sweep point `sweep_idx`.
pub fn route_seed(master_seed: u64, sweep_idx: usize, route_idx: usize) -> u64 {
    derive_seed(master_seed, &[TAG_ROUTE, sweep_idx as u64, route_idx as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub truth: Vec3,
    pub measurement: PositionMeasurement,
    /// One entry per scheme; `None` where the unfiltered scheme has no
    /// valid measurement.
    pub estimates: Vec<Option<Vec3>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteTrace {
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub steps: Vec<TraceStep>,
}

impl RouteTrace {
    /// Squared error sum and scored step count per scheme.
    pub fn outcome(&self) -> RouteOutcome {
        let mut sums = vec![(0.0, 0usize); self.schemes.len()];
        for step in &self.steps {
            for (acc, est) in sums.iter_mut().zip(&step.estimates) {
                if let Some(e) = est {
                    acc.0 += (e - step.truth).norm_squared();
                    acc.1 += 1;
                }
            }
        }
        RouteOutcome { sums }
    }

    /// Writes one line per step: truth, layout model, raw measurement and
    /// every scheme's estimate. Missing values are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            ["step", "true_x", "true_y", "true_z", "model", "valid", "meas_x", "meas_y", "meas_z"]
                .map(String::from)
                .into();
        for s in &self.schemes {
            header.extend(["x", "y", "z"].map(|c| format!("{s}_{c}")));
        }
        w.write_record(&header)?;
        let xyz = |p: Option<Vec3>| match p {
            Some(p) => [p.x, p.y, p.z].map(format_sig6),
            None => Default::default(),
        };
        for (i, step) in self.steps.iter().enumerate() {
            let m = &step.measurement;
            let mut rec = vec![i.to_string()];
            rec.extend(xyz(Some(step.truth)));
            rec.push(m.model.id().to_string());
            rec.push(m.valid.to_string());
            rec.extend(xyz(m.valid.then_some(m.position)));
            for est in &step.estimates {
                rec.extend(xyz(*est));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-scheme `(squared error sum, scored steps)` of one route.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteOutcome {
    pub sums: Vec<(f64, usize)>,
}

impl RouteOutcome {
    pub fn rmse(&self, scheme_idx: usize) -> Option<f64> {
        let (sse, n) = self.sums[scheme_idx];
        (n > 0).then(|| (sse / n as f64).sqrt())
    }
}

/// Generates one route and runs every scheme on the same measurements.
///
/// The route, the blocking draws and the channel noise all come from one
/// stream seeded with `seed`. Filters start at the first valid measurement;
/// before that they report [`RouteContext::prior_position`]. The unfiltered
/// scheme is scored only on steps with a valid measurement.
pub fn trace_route(ctx: &RouteContext, seed: u64) -> Result<RouteTrace> {
    let mut rng = SimRng::seed_from_u64(seed);
    let route = generate_route(&ctx.scene.room, &ctx.mobility, &mut rng);
    let measurements: Vec<PositionMeasurement> = route
        .step_points
        .iter()
        .map(|&p| {
            let blocked = draw_blocked(&ctx.blocking, &mut rng);
            let snap = ctx.scene.measure(p, blocked, &mut rng);
            ctx.localizer.localize(&snap)
        })
        .collect();

    let first_valid = measurements.iter().position(|m| m.valid);
    let prior = ctx.prior_position();
    let mut per_scheme: Vec<Vec<Option<Vec3>>> = Vec::with_capacity(ctx.schemes.len());
    for resolved in &ctx.schemes {
        let track = match (&resolved.coefficients, first_valid) {
            (None, _) => measurements.iter().map(|m| m.valid.then_some(m.position)).collect(),
            (Some(_), None) => vec![Some(prior); measurements.len()],
            (Some(coeffs), Some(t0)) => {
                let mut track = vec![Some(prior); t0];
                let mut state = init_filter(measurements[t0].position, &ctx.filter);
                track.push(Some(state.position()));
                for m in &measurements[t0 + 1..] {
                    let predicted = kf_predict(&state, &ctx.filter);
                    state = kf_update(&predicted, m, &ctx.filter, coeffs.eta(m.model))?;
                    track.push(Some(state.position()));
                }
                track
            }
        };
        per_scheme.push(track);
    }

    let steps = route
        .step_points
        .iter()
        .zip(measurements)
        .enumerate()
        .map(|(i, (&truth, measurement))| TraceStep {
            truth,
            measurement,
            estimates: per_scheme.iter().map(|t| t[i]).collect(),
        })
        .collect();
    Ok(RouteTrace { seed, schemes: ctx.schemes.iter().map(|s| s.scheme).collect(), steps })
}

/// The route [`trace_route`] walks for `seed`.
pub fn route_for_seed(ctx: &RouteContext, seed: u64) -> Route {
    generate_route(&ctx.scene.room, &ctx.mobility, &mut SimRng::seed_from_u64(seed))
}

/// Per-scheme squared error sums for one route.
pub fn simulate_route(ctx: &RouteContext, seed: u64) -> Result<RouteOutcome> {
    Ok(trace_route(ctx, seed)?.outcome())
}

/// Mean and standard error of per-route RMSE differences between two schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_err: f64,
    pub routes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub schemes: Vec<ResolvedScheme>,
    /// One entry per route, in route order.
    pub outcomes: Vec<RouteOutcome>,
}

impl SweepPoint {
    pub fn scheme_index(&self, scheme: Scheme) -> Option<usize> {
        self.schemes.iter().position(|s| s.scheme == scheme)
    }

    /// RMSE pooled over every scored step of every route.
    pub fn pooled_rmse(&self, scheme: Scheme) -> Option<f64> {
        let i = self.scheme_index(scheme)?;
        let (sse, n) = self.outcomes.iter().fold((0.0, 0), |(s, c), o| (s + o.sums[i].0, c + o.sums[i].1));
        (n > 0).then(|| (sse / n as f64).sqrt())
    }

    /// Paired statistics of `rmse(a) - rmse(b)` over routes where both are
    /// defined.
    pub fn paired_difference(&self, a: Scheme, b: Scheme) -> Option<PairedDifference> {
        let (ia, ib) = (self.scheme_index(a)?, self.scheme_index(b)?);
        let diffs: Vec<f64> = self.outcomes.iter().filter_map(|o| Some(o.rmse(ia)? - o.rmse(ib)?)).collect();
        let n = diffs.len();
        if n < 2 {
            return None;
        }
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(PairedDifference { mean, std_err: (var / n as f64).sqrt(), routes: n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub master_seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// One row per scheme per sweep point; schemes with no scored step
    /// are left out.
    pub fn rows(&self) -> Vec<ResultRow> {
        self.points
            .iter()
            .flat_map(|pt| {
                pt.schemes.iter().filter_map(move |s| {
                    Some(ResultRow {
                        sweep_value: pt.sweep_value,
                        scheme: s.scheme,
                        rmse_m: pt.pooled_rmse(s.scheme)?,
                        routes: pt.outcomes.len(),
                        seed: self.master_seed,
                    })
                })
            })
            .collect()
    }

    pub fn point(&self, sweep_value: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.sweep_value == sweep_value)
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn run_point(cfg: &ExperimentConfig, ctx: &RouteContext, sweep_idx: usize, sweep_value: f64) -> Result<SweepPoint> {
    let outcomes = (0..cfg.routes)
        .into_par_iter()
        .map(|r| simulate_route(ctx, route_seed(cfg.master_seed, sweep_idx, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepPoint { sweep_value, schemes: ctx.schemes.clone(), outcomes })
}

fn prepare_table(
    cfg: &ExperimentConfig,
    leds: &[usize],
    table: Option<&CalibrationTable>,
) -> Result<Option<CalibrationTable>> {
    let needed = calibration_led_counts(&cfg.schemes, leds);
    if needed.is_empty() {
        return Ok(None);
    }
    if let Some(t) = table {
        if needed.iter().all(|&n| t.covers(n)) {
            return Ok(Some(t.clone()));
        }
        return Err(Error::Config(format!("calibration table must cover LED counts {needed:?}")));
    }
    calibrate(cfg, &needed).map(Some)
}

/// Blocking sweep at the configured LED count. Calibrates first unless
/// `table` is given.
pub fn sweep_blocking_with(
    cfg: &ExperimentConfig,
    probs: &[f64],
    table: Option<&CalibrationTable>,
) -> Result<SweepReport> {
    cfg.validate()?;
    if probs.is_empty() {
        return Err(Error::Config("blocking sweep needs at least one probability".into()));
    }
    let leds = cfg.room.leds_per_ap;
    let table = prepare_table(cfg, &[leds], table)?;
    with_threads(cfg.threads, || {
        let points = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| run_point(cfg, &RouteContext::new(cfg, leds, p, table.as_ref())?, i, p))
            .collect::<Result<_>>()?;
        Ok(SweepReport { master_seed: cfg.master_seed, points })
    })
}

pub fn sweep_blocking(cfg: &ExperimentConfig, probs: &[f64]) -> Result<SweepReport> {
    sweep_blocking_with(cfg, probs, None)
}

/// LED-count sweep at the configured blocking probability.
pub fn sweep_leds_with(
    cfg: &ExperimentConfig,
    led_counts: &[usize],
    table: Option<&CalibrationTable>,
) -> Result<SweepReport> {
    cfg.validate()?;
    if led_counts.is_empty() {
        return Err(Error::Config("LED sweep needs at least one LED count".into()));
    }
    let table = prepare_table(cfg, led_counts, table)?;
    let p = cfg.blocking.block_probability;
    with_threads(cfg.threads, || {
        let points = led_counts
            .iter()
            .enumerate()
            .map(|(i, &n)| run_point(cfg, &RouteContext::new(cfg, n, p, table.as_ref())?, i, n as f64))
            .collect::<Result<_>>()?;
        Ok(SweepReport { master_seed: cfg.master_seed, points })
    })
}

pub fn sweep_leds(cfg: &ExperimentConfig, led_counts: &[usize]) -> Result<SweepReport> {
    sweep_leds_with(cfg, led_counts, None)
}

/// Mean localization error per layout model for each LED count.
pub fn eval_models(cfg: &ExperimentConfig, led_counts: &[usize]) -> Result<CalibrationTable> {
    cfg.validate()?;
    calibrate(cfg, led_counts)
}
