//! Benchmark matrices and one-parameter sweeps over noisy phantoms.
//!
//! A benchmark runs every algorithm × noise kind × noise level × seed cell on
//! one slice and scores it against ground truth. Failed cells become rows
//! with an error status; the matrix keeps going. Rows come out in config
//! order, so reports are byte-identical across runs except for timings.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, mean_incs, relative_improvement, ClusterScores, IncsVariant};
use crate::noise::{add_noise, NoiseKind, NoiseSpec};
use crate::phantom::{generate_phantom, PhantomSpec};
use crate::pipelines::{run_algorithm, Algorithm, PipelineConfig};
use crate::volume::{LabelVolume, SliceRef, Volume};

pub const REPORT_COLUMNS: [&str; 15] = [
    "algorithm",
    "noise_kind",
    "noise_percent",
    "seed",
    "cluster",
    "UnS",
    "OS",
    "IncS",
    "lambda",
    "xi",
    "h",
    "v",
    "iterations",
    "wall_time_ms",
    "status",
];

pub const COMPARISON_COLUMNS: [&str; 6] = [
    "algorithm_a",
    "noise_kind",
    "noise_percent",
    "mean_incs_a",
    "mean_incs_3dpifcm",
    "relative_improvement_pct",
];

pub const SWEEP_COLUMNS: [&str; 12] = [
    "param",
    "value",
    "algorithm",
    "noise_kind",
    "noise_percent",
    "runs",
    "mean_UnS",
    "mean_OS",
    "mean_IncS",
    "mean_lambda",
    "mean_xi",
    "failures",
];

/// Clean volume and its ground truth.
#[derive(Debug, Clone)]
pub enum BenchInput {
    Phantom(PhantomSpec),
    Supplied { volume: Volume, truth: LabelVolume },
}

impl BenchInput {
    pub fn materialize(&self) -> Result<(Volume, LabelVolume)> {
        match self {
            BenchInput::Phantom(spec) => generate_phantom(spec),
            BenchInput::Supplied { volume, truth } => {
                if volume.dims() != truth.dims() {
                    return Err(Error::validation(format!(
                        "volume dims {} differ from truth dims {}",
                        volume.dims(),
                        truth.dims()
                    )));
                }
                Ok((volume.clone(), truth.clone()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub input: BenchInput,
    pub slice: SliceRef,
    pub algorithms: Vec<Algorithm>,
    pub noise_kinds: Vec<NoiseKind>,
    /// Noise percents; 0 means the clean volume.
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Template; each cell reseeds it with the cell's seed.
    pub pipeline: PipelineConfig,
    pub incs_variant: IncsVariant,
    /// Also emit one row per cluster after each run's summary row.
    pub per_cluster_rows: bool,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.noise_kinds.is_empty() || self.seeds.is_empty() {
            return Err(Error::validation(
                "benchmark needs at least one algorithm, noise kind and seed",
            ));
        }
        if self.noise_levels.is_empty() {
            return Err(Error::validation(
                "benchmark needs at least one noise level",
            ));
        }
        for &p in &self.noise_levels {
            if p != 0.0 {
                NoiseSpec::new(NoiseKind::Gaussian, p, 0).validate()?;
            }
        }
        if let BenchInput::Phantom(spec) = &self.input {
            spec.validate()?;
        }
        self.pipeline.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub noise_kind: NoiseKind,
    pub noise_percent: f64,
    pub seed: u64,
    /// Empty when the run failed.
    pub scores: Vec<ClusterScores>,
    pub lambda: f64,
    pub xi: f64,
    pub iterations: usize,
    pub wall_time_ms: f64,
    /// `ok`, or the error message.
    pub status: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn mean_incs(&self) -> Option<f64> {
        self.ok().then(|| mean_incs(&self.scores))
    }

    fn mean_of(&self, f: impl Fn(&ClusterScores) -> f64) -> f64 {
        self.scores.iter().map(f).sum::<f64>() / self.scores.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algorithm_a: Algorithm,
    pub noise_kind: NoiseKind,
    pub noise_percent: f64,
    pub mean_incs_a: f64,
    pub mean_incs_3dpifcm: f64,
    /// `None` when algorithm A is already perfect.
    pub relative_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub runs: Vec<RunRecord>,
    pub comparisons: Vec<ComparisonRow>,
    /// Attraction depth and decay used by volumetric runs.
    pub depth: usize,
    pub decay: f64,
}

fn noisy_input(clean: &Volume, kind: NoiseKind, percent: f64, seed: u64) -> Result<Volume> {
    if percent == 0.0 {
        Ok(clean.clone())
    } else {
        add_noise(clean, &NoiseSpec::new(kind, percent, seed))
    }
}

fn run_cell(
    spec: &BenchSpec,
    clean: &Volume,
    truth_slice: &LabelVolume,
    algorithm: Algorithm,
    kind: NoiseKind,
    percent: f64,
    seed: u64,
) -> RunRecord {
    let mut rec = RunRecord {
        algorithm,
        noise_kind: kind,
        noise_percent: percent,
        seed,
        scores: Vec::new(),
        lambda: 0.0,
        xi: 0.0,
        iterations: 0,
        wall_time_ms: 0.0,
        status: "ok".into(),
    };
    let outcome = noisy_input(clean, kind, percent, seed).and_then(|noisy| {
        let cfg = spec.pipeline.reseeded(seed);
        let r = run_algorithm(algorithm, &noisy, spec.slice, &cfg)?;
        let scores = evaluate(&r.labels, truth_slice, cfg.clusters, spec.incs_variant)?;
        Ok((r, scores))
    });
    match outcome {
        Ok((r, scores)) => {
            rec.scores = scores;
            rec.lambda = r.lambda;
            rec.xi = r.xi;
            rec.iterations = r.iterations;
            rec.wall_time_ms = r.wall_time.as_secs_f64() * 1e3;
        }
        Err(e) => rec.status = format!("error: {e}"),
    }
    rec
}

/// Runs the full matrix. `progress` is called after every cell.
pub fn benchmark_run_with(
    spec: &BenchSpec,
    mut progress: impl FnMut(&RunRecord),
) -> Result<BenchReport> {
    spec.validate()?;
    let (clean, truth) = spec.input.materialize()?;
    spec.slice.check(clean.dims())?;
    let truth_slice = truth.extract_slice(spec.slice)?;
    truth_slice.check_labels(spec.pipeline.clusters)?;

    let mut runs = Vec::new();
    for &algorithm in &spec.algorithms {
        for &kind in &spec.noise_kinds {
            for &percent in &spec.noise_levels {
                for &seed in &spec.seeds {
                    let rec = run_cell(spec, &clean, &truth_slice, algorithm, kind, percent, seed);
                    progress(&rec);
                    runs.push(rec);
                }
            }
        }
    }
    let comparisons = compare(spec, &runs);
    Ok(BenchReport {
        runs,
        comparisons,
        depth: spec.pipeline.attraction.depth,
        decay: spec.pipeline.attraction.decay,
    })
}

pub fn benchmark_run(spec: &BenchSpec) -> Result<BenchReport> {
    benchmark_run_with(spec, |_| {})
}

/// Mean of the per-run mean IncS over successful runs of one cell group.
pub fn mean_incs_of(
    runs: &[RunRecord],
    algorithm: Algorithm,
    kind: NoiseKind,
    percent: f64,
) -> Option<f64> {
    let vals: Vec<f64> = runs
        .iter()
        .filter(|r| r.algorithm == algorithm && r.noise_kind == kind && r.noise_percent == percent)
        .filter_map(RunRecord::mean_incs)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn compare(spec: &BenchSpec, runs: &[RunRecord]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    if !spec.algorithms.contains(&Algorithm::Pifcm3d) {
        return rows;
    }
    for &a in spec.algorithms.iter().filter(|&&a| a != Algorithm::Pifcm3d) {
        for &kind in &spec.noise_kinds {
            for &p in &spec.noise_levels {
                let (Some(ma), Some(mo)) = (
                    mean_incs_of(runs, a, kind, p),
                    mean_incs_of(runs, Algorithm::Pifcm3d, kind, p),
                ) else {
                    continue;
                };
                rows.push(ComparisonRow {
                    algorithm_a: a,
                    noise_kind: kind,
                    noise_percent: p,
                    mean_incs_a: ma,
                    mean_incs_3dpifcm: mo,
                    relative_improvement_pct: relative_improvement(ma, mo).ok(),
                });
            }
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(
    report: &BenchReport,
    per_cluster_rows: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in &report.runs {
        let volumetric = r.algorithm == Algorithm::Pifcm3d;
        let (h, v) = if volumetric {
            (report.decay.to_string(), report.depth.to_string())
        } else {
            (String::new(), String::new())
        };
        let mut row = |cluster: String, uns: Option<f64>, os: Option<f64>, incs: Option<f64>| {
            w.write_record([
                r.algorithm.to_string(),
                r.noise_kind.to_string(),
                r.noise_percent.to_string(),
                r.seed.to_string(),
                cluster,
                opt(uns),
                opt(os),
                opt(incs),
                r.lambda.to_string(),
                r.xi.to_string(),
                h.clone(),
                v.clone(),
                r.iterations.to_string(),
                format!("{:.3}", r.wall_time_ms),
                r.status.clone(),
            ])
        };
        if r.ok() {
            row(
                "all".into(),
                Some(r.mean_of(|s| s.uns)),
                Some(r.mean_of(|s| s.os)),
                Some(r.mean_of(|s| s.incs)),
            )?;
            if per_cluster_rows {
                for s in &r.scores {
                    row(s.cluster.to_string(), Some(s.uns), Some(s.os), Some(s.incs))?;
                }
            }
        } else {
            row("all".into(), None, None, None)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_COLUMNS)?;
    for c in &report.comparisons {
        w.write_record([
            c.algorithm_a.to_string(),
            c.noise_kind.to_string(),
            c.noise_percent.to_string(),
            c.mean_incs_a.to_string(),
            c.mean_incs_3dpifcm.to_string(),
            opt(c.relative_improvement_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Shell-weight decay `h`.
    Decay,
    /// Number of shells `v`.
    Depth,
    /// Planar neighborhood level `L`.
    Level,
    /// Fuzziness `m`.
    Fuzziness,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Decay => "h",
            SweepParam::Depth => "v",
            SweepParam::Level => "L",
            SweepParam::Fuzziness => "m",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut c = base.clone();
        let integral = || {
            if value.fract() == 0.0 && value >= 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::validation(format!(
                    "{} takes integer values, got {value}",
                    self.as_str()
                )))
            }
        };
        match self {
            SweepParam::Decay => c.attraction.decay = value,
            SweepParam::Depth => c.attraction.depth = integral()?,
            SweepParam::Level => c.attraction.level = integral()? as u32,
            SweepParam::Fuzziness => c.fcm.m = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "h" | "decay" => Ok(SweepParam::Decay),
            "v" | "depth" => Ok(SweepParam::Depth),
            "L" | "l" | "level" => Ok(SweepParam::Level),
            "m" | "fuzziness" => Ok(SweepParam::Fuzziness),
            other => Err(Error::validation(format!(
                "unknown sweep parameter '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Matrix to run at each grid value; usually one algorithm, one noise
    /// kind and level, several seeds.
    pub bench: BenchSpec,
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub algorithm: Algorithm,
    pub noise_kind: NoiseKind,
    pub noise_percent: f64,
    pub runs: usize,
    pub mean_uns: Option<f64>,
    pub mean_os: Option<f64>,
    pub mean_incs: Option<f64>,
    pub mean_lambda: Option<f64>,
    pub mean_xi: Option<f64>,
    pub failures: usize,
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.grid.is_empty() {
        return Err(Error::validation("sweep grid is empty"));
    }
    // validate every grid point before running anything
    let configs = spec
        .grid
        .iter()
        .map(|&v| spec.param.apply(&spec.bench.pipeline, v))
        .collect::<Result<Vec<_>>>()?;
    spec.bench.validate()?;

    let mut rows = Vec::new();
    for (&value, pipeline) in spec.grid.iter().zip(configs) {
        let bench = BenchSpec {
            pipeline,
            ..spec.bench.clone()
        };
        let report = benchmark_run(&bench)?;
        for &algorithm in &bench.algorithms {
            for &kind in &bench.noise_kinds {
                for &p in &bench.noise_levels {
                    let cell: Vec<&RunRecord> = report
                        .runs
                        .iter()
                        .filter(|r| {
                            r.algorithm == algorithm && r.noise_kind == kind && r.noise_percent == p
                        })
                        .collect();
                    let good: Vec<&&RunRecord> = cell.iter().filter(|r| r.ok()).collect();
                    let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                        (!good.is_empty())
                            .then(|| good.iter().map(|r| f(r)).sum::<f64>() / good.len() as f64)
                    };
                    rows.push(SweepRow {
                        param: spec.param,
                        value,
                        algorithm,
                        noise_kind: kind,
                        noise_percent: p,
                        runs: cell.len(),
                        mean_uns: mean(&|r| r.mean_of(|s| s.uns)),
                        mean_os: mean(&|r| r.mean_of(|s| s.os)),
                        mean_incs: mean(&|r| r.mean_of(|s| s.incs)),
                        mean_lambda: mean(&|r| r.lambda),
                        mean_xi: mean(&|r| r.xi),
                        failures: cell.len() - good.len(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.param.to_string(),
            r.value.to_string(),
            r.algorithm.to_string(),
            r.noise_kind.to_string(),
            r.noise_percent.to_string(),
            r.runs.to_string(),
            opt(r.mean_uns),
            opt(r.mean_os),
            opt(r.mean_incs),
            opt(r.mean_lambda),
            opt(r.mean_xi),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn spec(algorithms: Vec<Algorithm>, seeds: Vec<u64>) -> BenchSpec {
        let mut pipeline = PipelineConfig::new(3, 0);
        pipeline.pso.swarm_size = 6;
        pipeline.pso.max_iter = 3;
        pipeline.ga.population = 6;
        pipeline.ga.generations = 3;
        BenchSpec {
            input: BenchInput::Phantom(PhantomSpec::with_defaults(
                Dims::new(18, 18, 18).unwrap(),
                3,
            )),
            slice: SliceRef::z(9),
            algorithms,
            noise_kinds: vec![NoiseKind::Gaussian],
            noise_levels: vec![5.0],
            seeds,
            pipeline,
            incs_variant: IncsVariant::ErrorFraction,
            per_cluster_rows: false,
        }
    }

    fn csv_text(report: &BenchReport, per_cluster: bool) -> String {
        let mut buf = Vec::new();
        write_report_csv(report, per_cluster, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn row_count_arithmetic() {
        let s = spec(vec![Algorithm::Fcm, Algorithm::Pifcm3d], vec![1, 2, 3]);
        let report = benchmark_run(&s).unwrap();
        assert_eq!(report.runs.len(), 6);
        assert_eq!(report.comparisons.len(), 1);
        let text = csv_text(&report, false);
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("algorithm,noise_kind,noise_percent,seed,cluster,UnS,OS,IncS"));
        let text = csv_text(&report, true);
        assert_eq!(text.lines().count(), 1 + 6 * 4);

        let mut buf = Vec::new();
        write_comparison_csv(&report, &mut buf).unwrap();
        let cmp = String::from_utf8(buf).unwrap();
        assert_eq!(cmp.lines().count(), 2);
    }

    #[test]
    fn failures_become_rows() {
        let mut s = spec(vec![Algorithm::ModifiedFcm], vec![1]);
        // two clusters share a truth label range check, so force a failure
        // through an impossible cluster count for the slice
        s.input = BenchInput::Supplied {
            volume: Volume::new(Dims::new(4, 4, 2).unwrap(), vec![5.0; 32], 10.0).unwrap(),
            truth: LabelVolume::new(
                Dims::new(4, 4, 2).unwrap(),
                (0..32).map(|i| (i % 3) as u8).collect(),
            )
            .unwrap(),
        };
        s.slice = SliceRef::z(0);
        s.noise_levels = vec![0.0];
        let report = benchmark_run(&s).unwrap();
        assert_eq!(report.runs.len(), 1);
        assert!(report.runs[0].status.starts_with("error"));
        let text = csv_text(&report, false);
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn deterministic_modulo_timing() {
        let s = spec(vec![Algorithm::IfcmPso, Algorithm::Pifcm3d], vec![4]);
        let strip = |t: String| -> Vec<String> {
            t.lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(13);
                    f.join(",")
                })
                .collect()
        };
        let a = strip(csv_text(&benchmark_run(&s).unwrap(), true));
        let b = strip(csv_text(&benchmark_run(&s).unwrap(), true));
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_has_one_row_per_value() {
        let s = SweepSpec {
            bench: spec(vec![Algorithm::Pifcm3d], vec![1]),
            param: SweepParam::Decay,
            grid: vec![0.1, 1.0, 100.0],
        };
        let rows = sweep(&s).unwrap();
        assert_eq!(rows.len(), 3);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn sweep_rejects_bad_grid_before_running() {
        let s = SweepSpec {
            bench: spec(vec![Algorithm::Pifcm3d], vec![1]),
            param: SweepParam::Depth,
            grid: vec![3.0, 2.5],
        };
        assert!(sweep(&s).unwrap_err().is_validation());
        let s = SweepSpec {
            param: SweepParam::Decay,
            grid: vec![1000.0],
            ..s
        };
        assert!(sweep(&s).is_err());
    }
}
