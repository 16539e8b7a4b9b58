use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pifcm::bench::SweepParam;
use pifcm::{Algorithm, Dims, IncsVariant, NoiseKind, SliceRef};

#[derive(Debug, Parser)]
#[command(
    name = "pifcm",
    version,
    about = "Fuzzy c-means segmentation with swarm-tuned neighborhood attraction",
    args_override_self = true
)]
pub struct Cli {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a nested-cuboid phantom and its labels.
    Phantom(PhantomArgs),
    /// Add seeded Gaussian or Poisson noise to a volume.
    Noise(NoiseArgs),
    /// Segment one slice of a volume.
    Segment(SegmentArgs),
    /// Score a label file against ground truth.
    Eval(EvalArgs),
    /// Run an algorithm x noise x seed matrix.
    Bench(BenchArgs),
    /// Repeat a benchmark over a grid of one hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct PhantomShape {
    /// Volume extents nx,ny,nz.
    #[arg(long, default_value = "181,217,181")]
    pub dims: Dims,

    #[arg(long, default_value_t = 4)]
    pub shells: usize,

    /// Inset between consecutive cuboids [default: min extent / (2 * shells)].
    #[arg(long)]
    pub margin: Option<usize>,

    /// Ascending shell intensities [default: evenly spaced up to 240].
    #[arg(long, value_delimiter = ',')]
    pub intensities: Option<Vec<f32>>,

    #[arg(long)]
    pub intensity_max: Option<f32>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[command(flatten)]
    pub shape: PhantomShape,

    #[arg(long, value_name = "VXF")]
    pub out: PathBuf,

    #[arg(long, value_name = "VXF")]
    pub labels: PathBuf,

    /// Also render this slice as PGM (needs --pgm-slice or the default slice).
    #[arg(long, value_name = "PGM")]
    pub pgm: Option<PathBuf>,

    #[arg(long)]
    pub pgm_slice: Option<SliceRef>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long = "in", value_name = "VXF")]
    pub input: PathBuf,

    #[arg(long, default_value = "gaussian")]
    pub kind: NoiseKind,

    #[arg(long)]
    pub percent: f64,

    #[arg(long, value_name = "VXF")]
    pub out: PathBuf,
}

/// Settings shared by every segmentation pipeline.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Number of clusters.
    #[arg(long = "c", default_value_t = 4)]
    pub clusters: usize,

    /// Fuzziness exponent.
    #[arg(long, default_value_t = 2.0)]
    pub m: f64,

    /// Stop when memberships change by less than this.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 150)]
    pub max_iter: usize,

    /// Planar neighborhood level L.
    #[arg(long = "L", default_value_t = 2)]
    pub level: u32,

    /// Number of voxel shells read by the volumetric pipeline.
    #[arg(long = "v", default_value_t = 3)]
    pub depth: usize,

    /// Decay constant of the shell weights.
    #[arg(long = "h", default_value_t = 0.2)]
    pub decay: f64,

    /// Feature attraction strength; with --xi this skips the search.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Neighborhood attraction strength; with --lambda this skips the search.
    #[arg(long)]
    pub xi: Option<f64>,

    #[arg(long, default_value_t = 50)]
    pub swarm: usize,

    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,

    #[arg(long, default_value_t = 0.5)]
    pub phi_p: f64,

    #[arg(long, default_value_t = 0.5)]
    pub phi_g: f64,

    #[arg(long, default_value_t = 20)]
    pub pso_iter: usize,

    #[arg(long, default_value_t = 1e-8)]
    pub minstep: f64,

    #[arg(long, default_value_t = 1e-8)]
    pub minfunc: f64,

    #[arg(long, default_value_t = 50)]
    pub ga_population: usize,

    #[arg(long, default_value_t = 20)]
    pub ga_generations: usize,

    /// Attraction steps per fitness evaluation.
    #[arg(long, default_value_t = 1)]
    pub refine_steps: usize,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "algo", default_value = "3dpifcm")]
    pub algorithm: Algorithm,

    #[arg(long = "in", value_name = "VXF")]
    pub input: PathBuf,

    /// Slice as axis:index [default: z:60, or the middle z slice].
    #[arg(long)]
    pub slice: Option<SliceRef>,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Ground-truth labels of the whole volume; enables the metrics row.
    #[arg(long, value_name = "VXF")]
    pub truth: Option<PathBuf>,

    /// Output labels [default: labels.vxf].
    #[arg(long, value_name = "VXF", default_value = "labels.vxf")]
    pub out: PathBuf,

    /// Membership dump as CSV.
    #[arg(long, value_name = "CSV")]
    pub membership: Option<PathBuf>,

    /// Label rendering.
    #[arg(long, value_name = "PGM")]
    pub pgm: Option<PathBuf>,

    /// Metrics CSV path [default: standard output].
    #[arg(long, value_name = "CSV")]
    pub metrics: Option<PathBuf>,

    #[arg(long, default_value = "fraction")]
    pub incs: IncsVariant,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted labels.
    #[arg(long, value_name = "VXF")]
    pub pred: PathBuf,

    /// Ground truth, either matching the prediction or a whole volume.
    #[arg(long, value_name = "VXF")]
    pub truth: PathBuf,

    /// Slice of the truth volume matching a single-slice prediction.
    #[arg(long)]
    pub slice: Option<SliceRef>,

    #[arg(long = "c")]
    pub clusters: Option<usize>,

    #[arg(long, default_value = "fraction")]
    pub incs: IncsVariant,

    /// CSV path [default: standard output].
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Clean input volume; without it a phantom is generated.
    #[arg(long = "in", value_name = "VXF", requires = "truth")]
    pub input: Option<PathBuf>,

    #[arg(long, value_name = "VXF", requires = "input")]
    pub truth: Option<PathBuf>,

    #[command(flatten)]
    pub shape: PhantomShape,

    #[arg(long)]
    pub slice: Option<SliceRef>,

    #[arg(
        long = "algos",
        value_delimiter = ',',
        default_value = "fcm,ifcmpso,gaifcm,3dpifcm"
    )]
    pub algorithms: Vec<Algorithm>,

    #[arg(long = "kinds", value_delimiter = ',', default_value = "gaussian")]
    pub noise_kinds: Vec<NoiseKind>,

    /// Noise percents; 0 is the clean volume.
    #[arg(long = "levels", value_delimiter = ',', default_value = "5")]
    pub noise_levels: Vec<f64>,

    /// Number of seeds, counting up from --seed.
    #[arg(long, default_value_t = 5)]
    pub runs: u64,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[arg(long, default_value = "fraction")]
    pub incs: IncsVariant,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,

    /// Add one row per cluster after each summary row.
    #[arg(long)]
    pub per_cluster: bool,

    #[arg(long, value_name = "CSV", default_value = "report.csv")]
    pub out: PathBuf,

    #[arg(long, value_name = "CSV", default_value = "comparison.csv")]
    pub comparison: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,

    /// Hyperparameter to vary: h, v, L or m.
    #[arg(long)]
    pub param: SweepParam,

    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,

    #[arg(long, value_name = "CSV", default_value = "sweep.csv")]
    pub out: PathBuf,
}
