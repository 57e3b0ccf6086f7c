use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vlpkf::calibration::CalibrationTable;
use vlpkf::config::{ConfigFile, ExperimentConfig};
use vlpkf::experiment::{
    calibrate, calibration_led_counts, eval_models, route_for_seed, route_seed, sweep_blocking_with, sweep_leds_with,
    trace_route, RouteContext,
};
use vlpkf::mobility::write_route_csv;
use vlpkf::report::{write_model_table, write_results, OutputFormat, Scheme};
use vlpkf::Error;

#[derive(Parser, Debug)]
#[command(name = "vlpkf", version, about = "Simulate adaptive Kalman tracking for multi-LED visible light positioning")]
struct Cli {
    /// TOML file with simulation parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Routes per sweep point.
    #[arg(long, global = true)]
    routes: Option<usize>,

    /// LEDs per access point; a comma-separated list for sweep-leds,
    /// calibrate and eval-models.
    #[arg(long, global = true, value_delimiter = ',')]
    leds: Vec<usize>,

    /// Blocking probability; a comma-separated list for sweep-blocking.
    #[arg(long = "block-prob", global = true, value_delimiter = ',')]
    block_prob: Vec<f64>,

    /// Comma-separated schemes: none, conventional, fixed, calibrated, asymptotic.
    #[arg(long, global = true, value_delimiter = ',')]
    schemes: Vec<String>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Format of sweep results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Calibration table written by `calibrate`, used instead of calibrating.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate mean localization error per layout model and write the table.
    Calibrate,
    /// RMSE per scheme for each blocking probability.
    SweepBlocking,
    /// RMSE per scheme for each LED count.
    SweepLeds,
    /// Per-step truth, measurement and estimates for one route.
    TraceRoute {
        /// Route index; the route matches route `index` of the first sweep point.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Write only the route (`step,x,y,z`).
        #[arg(long)]
        route_only: bool,
    },
    /// Mean localization error per model as one row per LED count.
    EvalModels,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = cli.seed {
        file.seed = seed;
    }
    if let Some(routes) = cli.routes {
        file.routes = routes;
    }
    if cli.threads.is_some() {
        file.threads = cli.threads;
    }
    if !cli.schemes.is_empty() {
        file.schemes = cli.schemes.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>, _>>()?;
    }
    let list_leds = matches!(cli.command, Command::SweepLeds | Command::Calibrate | Command::EvalModels);
    match (cli.leds.as_slice(), list_leds) {
        ([], _) => {}
        (counts, true) => file.led_counts = counts.to_vec(),
        ([n], false) => file.leds = *n,
        (_, false) => return Err(Error::Config("--leds takes a single value for this command".into())),
    }
    match (cli.block_prob.as_slice(), matches!(cli.command, Command::SweepBlocking)) {
        ([], _) => {}
        (probs, true) => file.block_probs = probs.to_vec(),
        ([p], false) => file.block_prob = *p,
        (_, false) => return Err(Error::Config("--block-prob takes a single value for this command".into())),
    }
    file.into_experiment()
}

fn load_table(path: Option<&Path>) -> Result<Option<CalibrationTable>, Error> {
    path.map(|p| CalibrationTable::read_csv(File::open(p)?)).transpose()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let sweep = matches!(cli.command, Command::SweepBlocking | Command::SweepLeds);
    if !sweep && format == OutputFormat::Json {
        return Err(Error::Config("--format json applies to sweep results only".into()));
    }
    let table = load_table(cli.calibration.as_deref())?;
    // the output file is created only once the inputs are known to be good
    match &cli.command {
        Command::Calibrate => {
            let t = calibrate(&cfg, &cfg.led_counts)?;
            let mut out = open_output(cli.out.as_deref())?;
            t.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::EvalModels => {
            let t = eval_models(&cfg, &cfg.led_counts)?;
            let mut out = open_output(cli.out.as_deref())?;
            write_model_table(&t, &mut out)?;
            out.flush()?;
        }
        Command::SweepBlocking | Command::SweepLeds => {
            let report = if matches!(cli.command, Command::SweepBlocking) {
                sweep_blocking_with(&cfg, &cfg.block_probs, table.as_ref())?
            } else {
                sweep_leds_with(&cfg, &cfg.led_counts, table.as_ref())?
            };
            let mut out = open_output(cli.out.as_deref())?;
            write_results(&report.rows(), &mut out, format)?;
            out.flush()?;
        }
        Command::TraceRoute { index, route_only } => {
            let leds = cfg.room.leds_per_ap;
            let cfg = if *route_only { ExperimentConfig { schemes: vec![Scheme::None], ..cfg } } else { cfg };
            let needed = calibration_led_counts(&cfg.schemes, &[leds]);
            let table = match table {
                None if !needed.is_empty() => Some(calibrate(&cfg, &needed)?),
                t => t,
            };
            let ctx = RouteContext::new(&cfg, leds, cfg.blocking.block_probability, table.as_ref())?;
            let seed = route_seed(cfg.master_seed, 0, *index);
            let mut out = open_output(cli.out.as_deref())?;
            if *route_only {
                write_route_csv(&route_for_seed(&ctx, seed), &mut out)?;
            } else {
                trace_route(&ctx, seed)?.write_csv(&mut out)?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vlpkf: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
