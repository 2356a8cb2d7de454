//! `lnc` — Monte Carlo simulator and analysis front end for the lattice
//! network coding toolkit in `lnc-core`.
//!
//! Exit codes: 0 success, 1 usage, 2 bad configuration, 3 runtime failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Parser, Subcommand};
use lnc_core::analysis::{
    computation_rate, exit_csv, exit_curve, exit_grid, mi_csv, mutual_information,
};
use lnc_core::eisenstein::{self, EisensteinInt};
use lnc_core::lattice::MeritKind;
use lnc_core::mlnc::{average_power, ChannelConfig, Fading};
use lnc_core::selftest;
use num_complex::Complex64;

use lnc_cli::config::{self, CoeffChoice, ExperimentConfig};
use lnc_cli::experiment::{self, build_lattice, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "lnc",
    version,
    about = "Lattice network coding: simulation and analysis",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiments described in a config file.
    Simulate {
        /// Config file (sections of key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Directory for the CSV and sidecar outputs.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run only the section with this name.
        #[arg(long)]
        experiment: Option<String>,
        /// Worker threads (defaults to the machine's parallelism).
        #[arg(long)]
        threads: Option<usize>,
        /// Print a belief-evolution trace for frame 0 of each SNR point.
        #[arg(long)]
        trace: bool,
    },
    /// Information-transfer sweep of the soft detector at one SNR.
    ExitChart {
        /// Lattice preset: rep12, coded12[:iota], coded12-mixed[:iota].
        #[arg(long, default_value = "rep12")]
        lattice: String,
        /// Layer whose detector is swept.
        #[arg(long)]
        layer: usize,
        #[arg(long = "snr-db")]
        snr_db: f64,
        /// Number of a-priori information points.
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Frames per point.
        #[arg(long, default_value_t = 20_000)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer computation rates and mutual information over an SNR grid.
    Rates {
        #[arg(long, default_value = "rep12")]
        lattice: String,
        /// Fading coefficients a+bi, comma separated (default: all ones).
        #[arg(long)]
        h: Option<String>,
        #[arg(long, default_value_t = 2)]
        sources: usize,
        /// SNR grid, e.g. "0,5,10" or "0:2:20".
        #[arg(long = "snr-db")]
        snr_db: String,
        /// Samples per information estimate.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Coefficient choice: unit or rate.
        #[arg(long, default_value = "rate")]
        coefficients: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Figures of merit of a lattice preset, with exact/bound flags.
    CodingGain {
        #[arg(long, default_value = "rep12")]
        lattice: String,
    },
    /// Factor an Eisenstein integer given in a+bw form.
    Factor { value: String },
    /// Run the exhaustive desk-scale verification suites.
    Selftest,
}

// --- error plumbing --------------------------------------------------------

enum CliError {
    Usage(String),
    Config(String),
    Runtime(anyhow::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<lnc_core::Error> for CliError {
    fn from(e: lnc_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(m) => CliError::Config(m),
            RunError::Core(e) => CliError::Runtime(e.into()),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            experiment,
            threads,
            trace,
        } => simulate(&config, &out, experiment.as_deref(), threads, trace),
        Command::ExitChart {
            lattice,
            layer,
            snr_db,
            points,
            frames,
            seed,
            out,
        } => exit_chart(&lattice, layer, snr_db, points, frames, seed, out.as_deref()),
        Command::Rates {
            lattice,
            h,
            sources,
            snr_db,
            samples,
            seed,
            coefficients,
            out,
        } => rates(
            &lattice,
            h.as_deref(),
            sources,
            &snr_db,
            samples,
            seed,
            &coefficients,
            out.as_deref(),
        ),
        Command::CodingGain { lattice } => coding_gain(&lattice),
        Command::Factor { value } => factor(&value),
        Command::Selftest => run_selftest(),
    }
}

// --- subcommands ----------------------------------------------------------

fn simulate(
    config_path: &Path,
    out_dir: &Path,
    only: Option<&str>,
    threads: Option<usize>,
    trace: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let mut experiments = config::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    if let Some(name) = only {
        experiments.retain(|e| e.name == name);
        if experiments.is_empty() {
            return Err(CliError::Config(format!(
                "{}: no section named [{name}]",
                config_path.display()
            )));
        }
    }
    let threads = threads
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    let opts = RunOptions { threads, trace };
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(CliError::Runtime)?;
    for exp in &experiments {
        let rows = experiment::run_experiment(exp, &opts, |line| eprintln!("{line}"))?;
        let csv_path = out_dir.join(format!("{}.csv", exp.name));
        let meta_path = out_dir.join(format!("{}.meta", exp.name));
        fs::write(&csv_path, experiment::rows_to_csv(&rows))
            .with_context(|| format!("writing {}", csv_path.display()))
            .map_err(CliError::Runtime)?;
        fs::write(&meta_path, experiment::sidecar(&exp.name, &text, exp.seed))
            .with_context(|| format!("writing {}", meta_path.display()))
            .map_err(CliError::Runtime)?;
        println!("wrote {} ({} rows)", csv_path.display(), rows.len());
    }
    Ok(())
}

fn exit_chart(
    lattice: &str,
    layer: usize,
    snr_db: f64,
    points: usize,
    frames: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let choice = config::lattice_arg(lattice).map_err(CliError::Config)?;
    let lat = build_lattice(&choice)?;
    if lat.layer_count() != 2 || layer >= 2 {
        return Err(CliError::Config(
            "transfer sweeps need a two-layer lattice and layer 0 or 1".into(),
        ));
    }
    let other_q = lat.layer(1 - layer)?.ring().q();
    let targets = exit_grid(points, other_q);
    let curve = exit_curve(&lat, layer, snr_db, &targets, frames, seed)?;
    emit(out, &exit_csv(&curve))
}

#[allow(clippy::too_many_arguments)]
fn rates(
    lattice: &str,
    h: Option<&str>,
    sources: usize,
    snr_db: &str,
    samples: usize,
    seed: u64,
    coefficients: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let choice = config::lattice_arg(lattice).map_err(CliError::Config)?;
    let lat = build_lattice(&choice)?;
    let h: Vec<Complex64> = match h {
        Some(list) => list
            .split(',')
            .map(|s| config::complex_arg(s).map_err(CliError::Config))
            .collect::<Result<_, _>>()?,
        None => vec![Complex64::new(1.0, 0.0); sources],
    };
    if h.len() != sources {
        return Err(CliError::Config(format!(
            "h has {} entries for {sources} sources",
            h.len()
        )));
    }
    let grid = config::grid_arg(snr_db).map_err(CliError::Config)?;
    let cfg = ExperimentConfig {
        name: "rates".into(),
        lattice: choice,
        decoders: Vec::new(),
        snr_db: Vec::new(),
        snr_offset_db: 0.0,
        fading: Fading::Fixed(h.clone()),
        sources,
        coefficients: match coefficients {
            "unit" => CoeffChoice::Unit,
            "rate" => CoeffChoice::Rate,
            other => {
                return Err(CliError::Config(format!(
                    "unknown coefficient choice {other:?} (want unit or rate)"
                )))
            }
        },
        mi_samples: samples,
        dither: true,
        min_frame_errors: 0,
        max_frames: 1,
        min_frames: 0,
        seed,
        schedule: None,
    };
    let p = average_power(lat.varpi())?;
    let m = lat.layer_count();
    let mut rate_block = String::from("snr_db,layer,value_bits,std_error\n");
    let mut mi_rows = Vec::new();
    for &snr in &grid {
        let n0 = p / 10f64.powf(snr / 10.0);
        let plan = experiment::point_plan(&lat, &cfg, &h, p, n0)?;
        let report = computation_rate(&h, &plan.a_tilde, &vec![p; m], n0)?;
        for (i, term) in report.layer_terms.iter().enumerate() {
            rate_block.push_str(&format!("{snr},{i},{term:.6},0.000000\n"));
        }
        let channel = ChannelConfig::new(Fading::Fixed(h.clone()), n0, sources)?;
        for i in 0..m {
            let est = mutual_information(&lat, i, &[], &channel, samples, seed)?;
            mi_rows.push((snr, i, est));
        }
    }
    let text = format!(
        "# computation-rate (coefficients = {coefficients})\n{rate_block}\n# mutual-information\n{}",
        mi_csv(&mi_rows)
    );
    emit(out, &text)
}

fn coding_gain(lattice: &str) -> Result<(), CliError> {
    let choice = config::lattice_arg(lattice).map_err(CliError::Config)?;
    let lat = build_lattice(&choice)?;
    let varpi = lat.varpi();
    println!(
        "lattice {lattice}: varpi = {varpi}, {} residues, n = {}, {} layers",
        lat.ring().q(),
        lat.n(),
        lat.layer_count()
    );
    println!("factorization: {}", eisenstein::factor(varpi)?);
    for i in 0..lat.layer_count() {
        let layer = lat.layer(i)?;
        let gain = lat.primary_gain(i)?;
        let kissing = lat.primary_kissing(i)?;
        println!(
            "layer {i}: modulus {}, gain {:.3} dB [{}], kissing {} [{}]",
            layer.modulus().value(),
            gain.db(),
            kind_tag(gain.kind),
            kissing.value,
            kind_tag(kissing.kind)
        );
    }
    let fine = lat.fine_gain()?;
    println!("fine lattice: gain {:.3} dB [{}]", fine.db(), kind_tag(fine.kind));
    Ok(())
}

fn kind_tag(kind: MeritKind) -> &'static str {
    match kind {
        MeritKind::Exact => "exact",
        MeritKind::LowerBound => "lower bound",
        MeritKind::UpperBound => "upper bound",
    }
}

fn factor(value: &str) -> Result<(), CliError> {
    let x = EisensteinInt::from_str(value)
        .map_err(|e| CliError::Usage(format!("bad Eisenstein integer {value:?}: {e}")))?;
    println!("{}", eisenstein::factor(x)?);
    Ok(())
}

fn run_selftest() -> Result<(), CliError> {
    let report = selftest::run()?;
    println!("{}", report.render());
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!(
            "self test failed ({} checks executed)",
            report.executed()
        )))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(CliError::Runtime)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
