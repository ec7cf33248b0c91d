mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "filippov-lab", version, about = "Cusp-fold singularities of Filippov systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for randomized harnesses.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for grid scans and harnesses (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, global = true, env = "FILIPPOV_LAB_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Artifact formats to write.
    #[arg(long, global = true, value_enum, value_delimiter = ',', default_value = "csv,svg")]
    pub formats: Vec<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Parameter override `name=value`; the name must exist in the system file.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionArg {
    Double,
    DoubleDouble,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a point of the switching plane.
    Classify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        point: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Integrate a hybrid trajectory.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Crossing cycle of a normal-form system.
    NfClc {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Polycycle curve of a normal-form system and its curvature.
    NfBetaStar {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        c_min: f64,
        #[arg(long, default_value_t = 1e-2)]
        c_max: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, value_enum, default_value = "double-double")]
        precision: PrecisionArg,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Random search for cycles near degree-1 cusp-folds, with degree-2 controls.
    NfNonexistence {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        controls: usize,
        #[arg(long, default_value_t = 0.05)]
        c_max: f64,
        #[arg(long, default_value_t = 11)]
        c_samples: usize,
    },
    /// Series half-return map against its closed-form linear part and involution property.
    JetsCheck {
        #[arg(long, default_value_t = 200)]
        draws: usize,
    },
    /// Bifurcation set of the toy model.
    ToyBifset {
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 3.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Crossing cycle of the toy model, analytic and numeric.
    ToyClc {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
    },
    /// T-singularity curve of the boost converter.
    BoostTsCurve {
        #[arg(long, default_value_t = 1.05)]
        k_min: f64,
        #[arg(long, default_value_t = 8.35)]
        k_max: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Polycycle branch of the boost converter.
    BoostPolycycle {
        #[arg(long, default_value_t = 1.05)]
        k_min: f64,
        #[arg(long, default_value_t = 8.35)]
        k_max: f64,
        #[arg(long, default_value_t = 60)]
        n: usize,
    },
    /// Crossing cycle of the boost converter.
    BoostClc {
        #[arg(long, default_value_t = 6.0)]
        k: f64,
        #[arg(long, default_value_t = 1.3)]
        a: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Simulate { .. } => "simulate",
            Command::NfClc { .. } => "nf-clc",
            Command::NfBetaStar { .. } => "nf-beta-star",
            Command::NfNonexistence { .. } => "nf-nonexistence",
            Command::JetsCheck { .. } => "jets-check",
            Command::ToyBifset { .. } => "toy-bifset",
            Command::ToyClc { .. } => "toy-clc",
            Command::BoostTsCurve { .. } => "boost-ts-curve",
            Command::BoostPolycycle { .. } => "boost-polycycle",
            Command::BoostClc { .. } => "boost-clc",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl From<filippov_lab::Error> for CliError {
    fn from(e: filippov_lab::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("I/O: {e}"))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

const SUBCOMMANDS: [&str; 11] = [
    "classify",
    "simulate",
    "nf-clc",
    "nf-beta-star",
    "nf-nonexistence",
    "jets-check",
    "toy-bifset",
    "toy-clc",
    "boost-ts-curve",
    "boost-polycycle",
    "boost-clc",
];

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let sub = argv.iter().skip(1).find(|a| SUBCOMMANDS.contains(&a.as_str())).map_or("filippov-lab", |s| s);
            let msg = e.render().to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{sub}: usage: {}", one_line(first.trim_start_matches("error:")));
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("{name}: usage: {}", one_line(&m));
            ExitCode::from(2)
        }
        Err(CliError::Domain(m)) => {
            eprintln!("{name}: error: {}", one_line(&m));
            ExitCode::from(1)
        }
    }
}
