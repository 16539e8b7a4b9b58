use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use pifcm::bench::{
    benchmark_run_with, sweep, write_comparison_csv, write_report_csv, write_sweep_csv, BenchInput,
    BenchSpec, SweepSpec,
};
use pifcm::metrics::{evaluate, mean_incs, ClusterScores};
use pifcm::pipelines::run_algorithm;
use pifcm::volume::{
    extract_slice, load_labels, load_volume, save_labels, save_labels_pgm, save_pgm, save_volume,
};
use pifcm::{
    add_noise, generate_phantom, Dims, LabelVolume, NoiseSpec, PhantomSpec, PipelineConfig,
};
use pifcm::{SliceRef, Volume};

use crate::cli::{
    BenchArgs, EvalArgs, MatrixArgs, NoiseArgs, PhantomArgs, PhantomShape, PipelineArgs,
    SegmentArgs, SweepArgs,
};
use crate::UsageError;

pub const SEGMENT_COLUMNS: [&str; 13] = [
    "algorithm",
    "slice",
    "seed",
    "clusters",
    "UnS",
    "OS",
    "IncS",
    "lambda",
    "xi",
    "h",
    "v",
    "iterations",
    "wall_time_ms",
];

pub const EVAL_COLUMNS: [&str; 8] = ["cluster", "n_fp", "n_fn", "n_p", "n_n", "UnS", "OS", "IncS"];

/// Options shared by all subcommands.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub seed: u64,
    pub quiet: bool,
}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Reading an input is a usage problem: the file is missing or malformed.
fn read_volume(path: &Path) -> Result<Volume> {
    load_volume(path).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn read_labels(path: &Path) -> Result<LabelVolume> {
    load_labels(path).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_or_stdout(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => io::stdout()
            .write_all(bytes)
            .context("writing to standard output"),
    }
}

/// Axial slice 60 when the volume is deep enough, otherwise the middle one.
pub fn default_slice(dims: Dims) -> SliceRef {
    if dims.nz > 60 {
        SliceRef::z(60)
    } else {
        SliceRef::z(dims.nz / 2)
    }
}

fn phantom_spec(shape: &PhantomShape) -> Result<PhantomSpec> {
    let mut spec = PhantomSpec::with_defaults(shape.dims, shape.shells);
    if shape.shells < 2 {
        return usage(format!(
            "phantom needs at least 2 shells, got {}",
            shape.shells
        ));
    }
    if let Some(m) = shape.margin {
        spec.margin = m;
    }
    if let Some(v) = &shape.intensities {
        spec.intensities.clone_from(v);
    }
    if let Some(top) = shape.intensity_max {
        spec.intensity_max = top;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn pipeline_config(args: &PipelineArgs, seed: u64) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::new(args.clusters, seed);
    cfg.fcm.m = args.m;
    cfg.fcm.epsilon = args.epsilon;
    cfg.fcm.max_iterations = args.max_iter;
    cfg.attraction.level = args.level;
    cfg.attraction.depth = args.depth;
    cfg.attraction.decay = args.decay;
    cfg.pso.swarm_size = args.swarm;
    cfg.pso.omega = args.omega;
    cfg.pso.phi_p = args.phi_p;
    cfg.pso.phi_g = args.phi_g;
    cfg.pso.max_iter = args.pso_iter;
    cfg.pso.minstep = args.minstep;
    cfg.pso.minfunc = args.minfunc;
    cfg.ga.population = args.ga_population;
    cfg.ga.generations = args.ga_generations;
    cfg.ga.minfunc = args.minfunc;
    cfg.refine_steps = args.refine_steps;
    match (args.lambda, args.xi) {
        (Some(l), Some(x)) => {
            cfg.attraction.lambda = l;
            cfg.attraction.xi = x;
            cfg.fixed_strengths = Some((l, x));
        }
        (None, None) => {}
        _ => return usage("--lambda and --xi must be given together"),
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn phantom(args: &PhantomArgs) -> Result<()> {
    let spec = phantom_spec(&args.shape)?;
    let slice = args.pgm_slice.unwrap_or_else(|| default_slice(spec.dims));
    if args.pgm.is_some() {
        slice.check(spec.dims)?;
    }
    let (vol, labels) = generate_phantom(&spec)?;
    save_volume(&vol, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    save_labels(&labels, &args.labels)
        .with_context(|| format!("writing {}", args.labels.display()))?;
    if let Some(p) = &args.pgm {
        save_pgm(&extract_slice(&vol, slice)?, p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn noise(args: &NoiseArgs, g: Globals) -> Result<()> {
    let spec = NoiseSpec::new(args.kind, args.percent, g.seed);
    spec.validate()?;
    let vol = read_volume(&args.input)?;
    let noisy = add_noise(&vol, &spec)?;
    save_volume(&noisy, &args.out).with_context(|| format!("writing {}", args.out.display()))
}

fn mean_of(scores: &[ClusterScores], f: impl Fn(&ClusterScores) -> f64) -> f64 {
    scores.iter().map(f).sum::<f64>() / scores.len().max(1) as f64
}

fn membership_csv(u: &pifcm::MembershipMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..u.c()).map(|j| format!("u{j}")))?;
    for row in u.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    Ok(w.into_inner()?)
}

pub fn segment(args: &SegmentArgs, g: Globals) -> Result<()> {
    let cfg = pipeline_config(&args.pipeline, g.seed)?;
    let vol = read_volume(&args.input)?;
    let slice = args.slice.unwrap_or_else(|| default_slice(vol.dims()));
    slice.check(vol.dims())?;
    let truth = match &args.truth {
        Some(p) => {
            let t = read_labels(p)?;
            if t.dims() != vol.dims() {
                return usage(format!(
                    "truth dims {} differ from input dims {}",
                    t.dims(),
                    vol.dims()
                ));
            }
            t.check_labels(cfg.clusters)?;
            Some(t.extract_slice(slice)?)
        }
        None => None,
    };

    if !g.quiet {
        eprintln!(
            "segmenting {slice} of {} with {}",
            vol.dims(),
            args.algorithm
        );
    }
    let res = run_algorithm(args.algorithm, &vol, slice, &cfg)?;
    if !g.quiet {
        eprintln!(
            "done: lambda={:.4} xi={:.4} iterations={} in {:.2?}",
            res.lambda, res.xi, res.iterations, res.wall_time
        );
    }

    let metrics = match &truth {
        Some(t) => {
            let scores = evaluate(&res.labels, t, cfg.clusters, args.incs)?;
            let volumetric = args.algorithm == pifcm::Algorithm::Pifcm3d;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(SEGMENT_COLUMNS)?;
            w.write_record([
                args.algorithm.to_string(),
                slice.to_string(),
                g.seed.to_string(),
                cfg.clusters.to_string(),
                mean_of(&scores, |s| s.uns).to_string(),
                mean_of(&scores, |s| s.os).to_string(),
                mean_incs(&scores).to_string(),
                res.lambda.to_string(),
                res.xi.to_string(),
                if volumetric {
                    cfg.attraction.decay.to_string()
                } else {
                    String::new()
                },
                if volumetric {
                    cfg.attraction.depth.to_string()
                } else {
                    String::new()
                },
                res.iterations.to_string(),
                format!("{:.3}", res.wall_time.as_secs_f64() * 1e3),
            ])?;
            Some(w.into_inner()?)
        }
        None => None,
    };
    let membership = args
        .membership
        .as_ref()
        .map(|_| membership_csv(&res.membership))
        .transpose()?;

    save_labels(&res.labels, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let (Some(p), Some(bytes)) = (&args.membership, membership) {
        write_file(p, &bytes)?;
    }
    if let Some(p) = &args.pgm {
        save_labels_pgm(&res.labels, cfg.clusters, p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(bytes) = metrics {
        write_or_stdout(args.metrics.as_deref(), &bytes)?;
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let mut truth = read_labels(&args.truth)?;
    if truth.dims() != pred.dims() {
        let Some(slice) = args.slice else {
            bail!(UsageError(format!(
                "prediction dims {} differ from truth dims {}; pass --slice",
                pred.dims(),
                truth.dims()
            )));
        };
        truth = truth.extract_slice(slice)?;
        if truth.dims() != pred.dims() {
            return usage(format!(
                "slice {slice} of the truth has dims {}, prediction has {}",
                truth.dims(),
                pred.dims()
            ));
        }
    }
    let clusters = args
        .clusters
        .unwrap_or_else(|| pred.num_labels().max(truth.num_labels()).max(2));
    let scores = evaluate(&pred, &truth, clusters, args.incs)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVAL_COLUMNS)?;
    for s in &scores {
        let c = s.counts;
        w.write_record([
            s.cluster.to_string(),
            c.n_fp.to_string(),
            c.n_fn.to_string(),
            c.n_p.to_string(),
            c.n_n.to_string(),
            s.uns.to_string(),
            s.os.to_string(),
            s.incs.to_string(),
        ])?;
    }
    w.write_record([
        "all".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        mean_of(&scores, |s| s.uns).to_string(),
        mean_of(&scores, |s| s.os).to_string(),
        mean_incs(&scores).to_string(),
    ])?;
    write_or_stdout(args.out.as_deref(), &w.into_inner()?)
}

fn bench_spec(m: &MatrixArgs, g: Globals, per_cluster_rows: bool) -> Result<BenchSpec> {
    let pipeline = pipeline_config(&m.pipeline, g.seed)?;
    let input = match (&m.input, &m.truth) {
        (Some(v), Some(t)) => {
            let volume = read_volume(v)?;
            let truth = read_labels(t)?;
            if volume.dims() != truth.dims() {
                return usage(format!(
                    "truth dims {} differ from input dims {}",
                    truth.dims(),
                    volume.dims()
                ));
            }
            BenchInput::Supplied { volume, truth }
        }
        _ => BenchInput::Phantom(phantom_spec(&m.shape)?),
    };
    let dims = match &input {
        BenchInput::Phantom(s) => s.dims,
        BenchInput::Supplied { volume, .. } => volume.dims(),
    };
    let slice = m.slice.unwrap_or_else(|| default_slice(dims));
    slice.check(dims)?;
    if m.runs == 0 {
        return usage("--runs must be at least 1");
    }
    let seeds = (0..m.runs).map(|k| g.seed.wrapping_add(k)).collect();
    let spec = BenchSpec {
        input,
        slice,
        algorithms: m.algorithms.clone(),
        noise_kinds: m.noise_kinds.clone(),
        noise_levels: m.noise_levels.clone(),
        seeds,
        pipeline,
        incs_variant: m.incs,
        per_cluster_rows,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn bench(args: &BenchArgs, g: Globals) -> Result<()> {
    let spec = bench_spec(&args.matrix, g, args.per_cluster)?;
    let report = benchmark_run_with(&spec, |r| {
        if !g.quiet {
            let incs = r
                .mean_incs()
                .map_or_else(|| r.status.clone(), |v| format!("IncS {v:.4}"));
            eprintln!(
                "{} {} {}% seed {}: {incs}",
                r.algorithm, r.noise_kind, r.noise_percent, r.seed
            );
        }
    })?;
    let mut rows = Vec::new();
    write_report_csv(&report, spec.per_cluster_rows, &mut rows)?;
    let mut comparison = Vec::new();
    write_comparison_csv(&report, &mut comparison)?;
    write_file(&args.out, &rows)?;
    write_file(&args.comparison, &comparison)
}

pub fn sweep_cmd(args: &SweepArgs, g: Globals) -> Result<()> {
    let bench = bench_spec(&args.matrix, g, false)?;
    let spec = SweepSpec {
        bench,
        param: args.param,
        grid: args.grid.clone(),
    };
    for &v in &spec.grid {
        spec.param.apply(&spec.bench.pipeline, v)?;
    }
    if !g.quiet {
        eprintln!("sweeping {} over {:?}", spec.param, spec.grid);
    }
    let rows = sweep(&spec)?;
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out)?;
    write_file(&args.out, &out)
}
