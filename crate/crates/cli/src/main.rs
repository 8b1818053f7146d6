//! Command-line pipeline: calibrate, segment, synth, search, train,
//! evaluate, predict-map and bench.
//!
//! Every command echoes its effective parameters to a JSON file next to
//! its outputs and derives all randomness from the global --seed, so a
//! run can be reproduced from the echo alone.

mod commands;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Serialize)]
#[command(name = "dualband", version, about = "Dual-band hyperspectral feature selection toolkit")]
struct Cli {
    /// Master seed; every subsystem seed derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Print a one-line machine-readable summary to stdout.
    #[arg(long, global = true)]
    json_summary: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Convert a raw cube to reflectance with white/dark references.
    Calibrate(CalibrateArgs),
    /// NDVI background removal and foreground mean spectrum.
    Segment(SegmentArgs),
    /// Generate a synthetic dataset with planted dual-band structure.
    Synth(SynthArgs),
    /// Run the fine + coarse feature search over a manifest.
    Search(SearchArgs),
    /// Train a classifier on the manifest's train split.
    Train(TrainArgs),
    /// Evaluate a trained model on the manifest's test split.
    Evaluate(EvaluateArgs),
    /// Pixel-wise class map of a reflectance cube.
    PredictMap(PredictMapArgs),
    /// Benchmark prediction throughput of selected vs full-spectrum models.
    Bench(BenchArgs),
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    raw: String,
    #[arg(long)]
    white: String,
    #[arg(long)]
    dark: String,
    /// Output reflectance cube (.hsc).
    #[arg(long)]
    out: String,
}

#[derive(Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    cube: String,
    #[arg(long, default_value_t = 670.0)]
    red_nm: f64,
    #[arg(long, default_value_t = 800.0)]
    nir_nm: f64,
    /// Which NDVI side is fruit: low or high.
    #[arg(long, default_value = "low")]
    polarity: String,
    /// Output mask (.pgm).
    #[arg(long)]
    out_mask: String,
    /// Output foreground mean spectrum (.csv).
    #[arg(long)]
    out_spectrum: String,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    n_per_class: usize,
    #[arg(long, default_value_t = 7)]
    classes: usize,
    /// Wavelength axis as lo:hi:samples.
    #[arg(long, default_value = "450:850:401")]
    axis: String,
    /// Pigment band as lo:hi (peak position shifts per class).
    #[arg(long, default_value = "510:670")]
    pigment: String,
    /// Chlorophyll band as lo:hi (trough depth shrinks per class).
    #[arg(long, default_value = "670:790")]
    chlorophyll: String,
    #[arg(long, default_value_t = 20.0)]
    peak_shift: f64,
    #[arg(long, default_value_t = 0.12)]
    trough_lift: f64,
    #[arg(long, default_value_t = 0.02)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    /// Also write this many synthetic reflectance cubes (two spatial
    /// halves of different classes over a flat background).
    #[arg(long, default_value_t = 0)]
    emit_cubes: usize,
    #[arg(long, default_value = "120x368")]
    cube_size: String,
    #[arg(long, default_value_t = 8)]
    cube_border: usize,
    /// Output directory (defaults to $DUALBAND_OUT).
    #[arg(long, env = "DUALBAND_OUT")]
    out: String,
}

#[derive(Args, Serialize)]
struct SearchArgs {
    #[arg(long)]
    manifest: String,
    /// Search span as lo:hi in nm.
    #[arg(long, default_value = "450:850")]
    span: String,
    #[arg(long, default_value_t = 20.0)]
    bandwidth: f64,
    #[arg(long, default_value_t = 20)]
    subbands: usize,
    /// Survivors kept after the fine stage.
    #[arg(long, default_value_t = 10)]
    q: usize,
    /// Coarse stage stops at this test accuracy.
    #[arg(long, default_value_t = 0.95)]
    target: f64,
    #[arg(long, default_value_t = 20.0)]
    overlap_tol: f64,
    /// Candidate classifier: fcn (as in the feature search) or svm (fast).
    #[arg(long, default_value = "fcn")]
    classifier: String,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Worker threads; 0 uses all cores. Thread count never changes results.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Apply batch multiplicative scatter correction before the search.
    #[arg(long)]
    msc: bool,
    /// Apply Savitzky-Golay smoothing before the search.
    #[arg(long)]
    savgol: bool,
    #[arg(long, default_value_t = 11)]
    savgol_window: usize,
    #[arg(long, default_value_t = 2)]
    savgol_order: usize,
    /// Output directory (defaults to $DUALBAND_OUT).
    #[arg(long, env = "DUALBAND_OUT")]
    out: String,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    manifest: String,
    /// Feature set JSON produced by search; omit with --full-spectrum.
    #[arg(long)]
    featureset: Option<String>,
    /// Train on full spectra instead of selected features.
    #[arg(long)]
    full_spectrum: bool,
    /// Model kind: fcn or svm.
    #[arg(long, default_value = "svm")]
    model_kind: String,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long)]
    msc: bool,
    #[arg(long)]
    savgol: bool,
    #[arg(long, default_value_t = 11)]
    savgol_window: usize,
    #[arg(long, default_value_t = 2)]
    savgol_order: usize,
    /// Optional CSV dump of the training feature matrix.
    #[arg(long)]
    dump_features: Option<String>,
    /// Output model file (.hsm).
    #[arg(long)]
    out: String,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: String,
    #[arg(long)]
    featureset: Option<String>,
    #[arg(long)]
    model: String,
    #[arg(long)]
    msc: bool,
    #[arg(long)]
    savgol: bool,
    #[arg(long, default_value_t = 11)]
    savgol_window: usize,
    #[arg(long, default_value_t = 2)]
    savgol_order: usize,
    /// Output directory for the confusion matrix and metrics
    /// (defaults to $DUALBAND_OUT).
    #[arg(long, env = "DUALBAND_OUT")]
    out: String,
}

#[derive(Args, Serialize)]
struct PredictMapArgs {
    #[arg(long)]
    cube: String,
    #[arg(long)]
    featureset: String,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 670.0)]
    red_nm: f64,
    #[arg(long, default_value_t = 800.0)]
    nir_nm: f64,
    #[arg(long, default_value = "low")]
    polarity: String,
    /// Output prefix; writes <out>.pgm, <out>.png and <out>.palette.csv.
    #[arg(long)]
    out: String,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    /// Model trained on the selected features.
    #[arg(long)]
    selected_model: String,
    #[arg(long)]
    featureset: String,
    /// Model trained on full spectra.
    #[arg(long)]
    full_model: String,
    /// Reflectance cube(s) to predict; repeatable.
    #[arg(long, required = true)]
    cube: Vec<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Output CSV.
    #[arg(long)]
    out: String,
}

fn exit_code(err: &dualband::Error) -> i32 {
    match err {
        dualband::Error::Parameter(_) | dualband::Error::Io(_) => 2,
        dualband::Error::Shape(_) | dualband::Error::Domain(_) | dualband::Error::Data(_) => 3,
        dualband::Error::Numeric(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(args) => commands::calibrate(&cli, args),
        Command::Segment(args) => commands::segment(&cli, args),
        Command::Synth(args) => commands::synth(&cli, args),
        Command::Search(args) => commands::search(&cli, args),
        Command::Train(args) => commands::train(&cli, args),
        Command::Evaluate(args) => commands::evaluate(&cli, args),
        Command::PredictMap(args) => commands::predict_map(&cli, args),
        Command::Bench(args) => commands::bench(&cli, args),
    };
    match result {
        Ok(summary) => {
            if cli.json_summary {
                println!("{summary}");
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
