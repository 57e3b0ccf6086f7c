//! Result rows and their CSV / JSON encodings.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::availability::LayoutModel;
use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};

/// Which estimate a row scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Raw localization output, no filter.
    None,
    Conventional,
    Fixed,
    Calibrated,
    Asymptotic,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::None, Scheme::Conventional, Scheme::Fixed, Scheme::Calibrated, Scheme::Asymptotic];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Conventional => "conventional",
            Scheme::Fixed => "fixed",
            Scheme::Calibrated => "calibrated",
            Scheme::Asymptotic => "asymptotic",
        }
    }

    pub fn is_filtered(self) -> bool {
        self != Scheme::None
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub rmse_m: f64,
    pub routes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Formats `x` with six significant digits, switching to exponent notation
/// outside `[1e-4, 1e6)`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exponent) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.999995 -> 10.00000)
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    let significant = digits.trim_start_matches('0').len();
    if significant > 6 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["sweep_value", "scheme", "rmse_m", "routes", "seed"])?;
            for r in rows {
                w.write_record([
                    format_sig6(r.sweep_value),
                    r.scheme.name().to_string(),
                    format_sig6(r.rmse_m),
                    r.routes.to_string(),
                    r.seed.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            let rounded: Vec<ResultRow> = rows
                .iter()
                .map(|r| ResultRow {
                    sweep_value: format_sig6(r.sweep_value).parse().unwrap_or(r.sweep_value),
                    rmse_m: format_sig6(r.rmse_m).parse().unwrap_or(r.rmse_m),
                    ..*r
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &rounded)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes rows to `path`.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_results(rows, file, format)
}

pub fn parse_results<R: Read>(input: R, format: OutputFormat) -> Result<Vec<ResultRow>> {
    match format {
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for row in csv::Reader::from_reader(input).deserialize() {
                rows.push(row?);
            }
            Ok(rows)
        }
        OutputFormat::Json => Ok(serde_json::from_reader(input)?),
    }
}

/// Wide table of `omega` per model, one row per LED count.
pub fn write_model_table<W: Write>(table: &CalibrationTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n_leds".to_string()];
    header.extend(LayoutModel::measuring().map(|m| format!("model{}", m.id())));
    w.write_record(&header)?;
    for n in table.led_counts() {
        let mut rec = vec![n.to_string()];
        rec.extend(LayoutModel::measuring().map(|m| table.omega(m, n).map(format_sig6).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
