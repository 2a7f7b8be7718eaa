//! `mla`: microlens array design and analysis from the command line.
//!
//! Results go to standard output as JSON. Bulk data (spots, fans, Monte Carlo
//! samples) are written as CSV, and plots as SVG. Exit status is 0 on success,
//! 2 for invalid input and 3 when a numerical step fails.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::CliError;

#[derive(Debug, Parser)]
#[command(name = "mla", version, about = "Bi-convex microlens design, ray tracing and tolerancing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Paraxial numerical aperture and diffraction-limited spot size.
    Na(LensArgs),
    /// Diffraction-limited spot size (same inputs as `na`).
    Spotsize(LensArgs),
    /// Trace a prescription: best focus, spot diagram, ray and OPD fans.
    Analyze(AnalyzeArgs),
    /// Optimize R1, R2 and thickness for a target NA.
    Optimize(OptimizeArgs),
    /// Reflowed cap from a resist cylinder, or the resist thickness for a sag.
    Reflow(ReflowArgs),
    /// Monte Carlo propagation of fabrication and alignment scatter.
    Tolerance(ToleranceArgs),
    /// Least-squares fit of the transverse aberration series.
    Fit(FitArgs),
    /// Check a prescription file and list every violated rule.
    Validate(ValidateArgs),
}

/// Lens given either by explicit geometry or by a prescription file.
#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["biconvex", "plano", "prescription"]))]
pub struct LensArgs {
    /// Thick bi-convex lens from --d --r1 --r2 --t --n (radii signed, `inf` for planar).
    #[arg(long, requires_all = ["d", "r1", "r2", "t", "n"])]
    pub biconvex: bool,
    /// Single spherical cap from --d --h --n.
    #[arg(long, requires_all = ["d", "h", "n"])]
    pub plano: bool,
    /// Two-surface prescription file.
    #[arg(long, value_name = "FILE")]
    pub prescription: Option<PathBuf>,
    /// Clear diameter, μm.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    /// Center thickness, μm.
    #[arg(long)]
    pub t: Option<f64>,
    /// Cap sag, μm.
    #[arg(long)]
    pub h: Option<f64>,
    /// Refractive index.
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long, default_value_t = microlens::HE_NE_WAVELENGTH_NM)]
    pub wavelength_nm: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "FILE")]
    pub prescription: PathBuf,
    /// Write the spot diagram at best focus as CSV.
    #[arg(long)]
    pub spot: bool,
    /// Write the transverse ray fan as CSV.
    #[arg(long)]
    pub rayfan: bool,
    /// Write the OPD fan as CSV.
    #[arg(long)]
    pub opdfan: bool,
    /// Also write an SVG plot of each requested artifact (all three if none).
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Hexapolar pupil rings.
    #[arg(long, default_value_t = 10)]
    pub rings: usize,
    /// Points per fan (odd).
    #[arg(long, default_value_t = 41)]
    pub fan_samples: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = microlens::lens::DESIGN_NA)]
    pub target_na: f64,
    /// Rear (limiting) diameter, μm; the front diameter keeps the 97.6:60 ratio.
    #[arg(long, default_value_t = 60.0)]
    pub d: f64,
    #[arg(long, default_value_t = microlens::PDMS_INDEX)]
    pub n: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Start R1, μm (default: reference design scaled to --d).
    #[arg(long)]
    pub r1: Option<f64>,
    /// Start |R2|, μm.
    #[arg(long)]
    pub r2: Option<f64>,
    /// Start thickness, μm.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = microlens::HE_NE_WAVELENGTH_NM)]
    pub wavelength_nm: f64,
    /// Write the optimized lens as a prescription file.
    #[arg(long, value_name = "FILE")]
    pub out_prescription: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["thickness_um", "target_sag_um"]))]
pub struct ReflowArgs {
    #[arg(long)]
    pub diameter_um: f64,
    /// Resist cylinder thickness; predicts the reflowed cap.
    #[arg(long)]
    pub thickness_um: Option<f64>,
    /// Desired cap sag; returns the resist thickness that produces it.
    #[arg(long)]
    pub target_sag_um: Option<f64>,
    /// Fraction of resist volume kept after reflow.
    #[arg(long, default_value_t = 1.0)]
    pub volume_retention: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Nominal {
    /// Design radii with the thickness solved for NA 0.379.
    Reference,
    /// Mean measured reflow geometry.
    AsFabricated,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    #[arg(long, value_enum, default_value_t = Nominal::Reference)]
    pub nominal: Nominal,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-axis lateral misalignment of the rear array, μm.
    #[arg(long, default_value_t = microlens::tolerance::DEFAULT_SIGMA_DECENTER_UM)]
    pub sigma_decenter: f64,
    /// Use the diameter scatter measured on cast lenses instead of resist caps.
    #[arg(long)]
    pub cast_diameters: bool,
    /// Multiply every sigma by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_scale: f64,
    /// Write per-sample metrics as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Evaluate samples on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum A1FormArg {
    Verbatim,
    Symmetric,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// 3 or 5.
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    /// CSV with `s,h,theta,x_um,y_um` columns, or a spot CSV from `analyze`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = A1FormArg::Verbatim)]
    pub a1_form: A1FormArg,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_name = "FILE")]
    pub prescription: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Na(a) => commands::na(&a, false),
        Command::Spotsize(a) => commands::na(&a, true),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Reflow(a) => commands::reflow(&a),
        Command::Tolerance(a) => commands::tolerance(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Validate(a) => commands::validate(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
