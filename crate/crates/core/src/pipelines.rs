//! End-to-end segmentation of one slice.
//!
//! Every attraction pipeline starts from mixture-seeded FCM, searches the
//! attraction strengths `(lambda, xi)` over `[0, 1]^2` (unless they are
//! fixed), then iterates attraction-FCM to convergence from the best
//! candidate's state. A candidate's fitness is the cost after
//! `refine_steps` attraction steps from the FCM state.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::attraction::{
    ifcm_step, volumetric_domain, AttractionDomain, AttractionParams, IfcmState,
};
use crate::error::{Error, Result};
use crate::fuzzy::{
    fcm, modified_fcm, ClusterSet, FcmConfig, FcmInit, FcmOutcome, MembershipMatrix,
};
use crate::metrics::defuzzify;
use crate::optim::{ga_minimize, pso_minimize, GaConfig, OptimOutcome, PsoConfig};
use crate::volume::{extract_slice, LabelVolume, SliceRef, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Plain FCM from random memberships.
    Fcm,
    /// FCM seeded from a Gaussian mixture.
    ModifiedFcm,
    /// Planar attraction FCM at fixed strengths.
    Ifcm,
    IfcmPso,
    GaIfcm,
    Pifcm3d,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Fcm,
        Algorithm::ModifiedFcm,
        Algorithm::Ifcm,
        Algorithm::IfcmPso,
        Algorithm::GaIfcm,
        Algorithm::Pifcm3d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Fcm => "fcm",
            Algorithm::ModifiedFcm => "mfcm",
            Algorithm::Ifcm => "ifcm",
            Algorithm::IfcmPso => "ifcmpso",
            Algorithm::GaIfcm => "gaifcm",
            Algorithm::Pifcm3d => "3dpifcm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "fcm" => Ok(Algorithm::Fcm),
            "mfcm" | "modifiedfcm" => Ok(Algorithm::ModifiedFcm),
            "ifcm" => Ok(Algorithm::Ifcm),
            "ifcmpso" => Ok(Algorithm::IfcmPso),
            "gaifcm" => Ok(Algorithm::GaIfcm),
            "3dpifcm" | "pifcm3d" | "pifcm" => Ok(Algorithm::Pifcm3d),
            _ => Err(Error::validation(format!("unknown algorithm '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub clusters: usize,
    pub fcm: FcmConfig,
    /// Neighborhood shape, plus the strengths of the fixed-strength pipeline.
    pub attraction: AttractionParams,
    pub pso: PsoConfig,
    pub ga: GaConfig,
    /// Attraction steps per fitness evaluation.
    pub refine_steps: usize,
    /// Skip the search and use these strengths.
    pub fixed_strengths: Option<(f64, f64)>,
    /// Seed for random FCM memberships and both optimizers.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(clusters: usize, seed: u64) -> Self {
        let bounds = vec![(0.0, 1.0); 2];
        let mut pso = PsoConfig::new(bounds.clone(), seed);
        pso.seeded_positions = vec![vec![0.0, 0.0]];
        let mut ga = GaConfig::new(bounds, seed);
        ga.seeded_positions = vec![vec![0.0, 0.0]];
        PipelineConfig {
            clusters,
            fcm: FcmConfig::default(),
            attraction: AttractionParams::default(),
            pso,
            ga,
            refine_steps: 1,
            fixed_strengths: None,
            seed,
        }
    }

    /// Same settings with every random stream keyed by `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.pso.seed = seed;
        c.ga.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 || self.clusters > 255 {
            return Err(Error::validation(format!(
                "cluster count must be in [2, 255], got {}",
                self.clusters
            )));
        }
        self.fcm.validate()?;
        self.attraction.validate()?;
        self.pso.validate()?;
        self.ga.validate()?;
        if self.pso.dims() != 2 || self.ga.bounds.len() != 2 {
            return Err(Error::validation("strength search must be two-dimensional"));
        }
        if self.refine_steps == 0 {
            return Err(Error::validation("refine_steps must be at least 1"));
        }
        if let Some((l, x)) = self.fixed_strengths {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&x) {
                return Err(Error::validation(format!(
                    "fixed strengths ({l}, {x}) outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub algorithm: Algorithm,
    /// Memberships of the segmented plane.
    pub membership: MembershipMatrix,
    pub centers: ClusterSet,
    pub labels: LabelVolume,
    pub lambda: f64,
    pub xi: f64,
    pub iterations: usize,
    pub final_cost: f64,
    pub wall_time: Duration,
    pub search: Option<OptimOutcome>,
}

/// Outcome of attraction-FCM iterated to convergence.
#[derive(Debug, Clone)]
pub struct IfcmRun {
    pub state: IfcmState,
    pub iterations: usize,
    pub cost: f64,
}

/// Repeats [`ifcm_step`] until the largest membership change over the
/// support drops below `cfg.epsilon` or the iteration cap is hit.
pub fn ifcm_run(
    domain: &AttractionDomain,
    lambda: f64,
    xi: f64,
    init: IfcmState,
    cfg: &FcmConfig,
) -> Result<IfcmRun> {
    cfg.validate()?;
    let mut state = init;
    let mut iterations = 0;
    let mut cost = 0.0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let out = ifcm_step(domain, lambda, xi, &state, cfg)?;
        let delta = out.state.membership.max_abs_diff(&state.membership);
        state = out.state;
        cost = out.cost;
        if delta < cfg.epsilon {
            break;
        }
    }
    Ok(IfcmRun {
        state,
        iterations,
        cost,
    })
}

fn check_slice_input(img: &Volume, clusters: usize) -> Result<()> {
    if !img.is_planar() {
        return Err(Error::validation(format!(
            "expected a single slice, got dims {}",
            img.dims()
        )));
    }
    if img.len() < clusters {
        return Err(Error::validation("fewer voxels than clusters"));
    }
    Ok(())
}

fn from_fcm(
    algorithm: Algorithm,
    out: FcmOutcome,
    img: &Volume,
    started: Instant,
) -> Result<SegmentationResult> {
    Ok(SegmentationResult {
        algorithm,
        labels: defuzzify(&out.membership, img.dims())?,
        final_cost: out.final_cost(),
        membership: out.membership,
        centers: out.centers,
        lambda: 0.0,
        xi: 0.0,
        iterations: out.iterations,
        wall_time: started.elapsed(),
        search: None,
    })
}

/// FCM from random memberships drawn from `cfg.seed`.
pub fn fcm_segment(img: &Volume, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    check_slice_input(img, cfg.clusters)?;
    let t = Instant::now();
    let out = fcm(
        &img.to_f64(),
        cfg.clusters,
        &cfg.fcm,
        FcmInit::Random(cfg.seed),
    )?;
    from_fcm(Algorithm::Fcm, out, img, t)
}

pub fn mfcm_segment(img: &Volume, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    check_slice_input(img, cfg.clusters)?;
    let t = Instant::now();
    let out = modified_fcm(img, cfg.clusters, &cfg.fcm)?;
    from_fcm(Algorithm::ModifiedFcm, out, img, t)
}

enum Search {
    Fixed(f64, f64),
    Pso,
    Ga,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    algorithm: Algorithm,
    domain: &AttractionDomain,
    lambda: f64,
    xi: f64,
    init: IfcmState,
    cfg: &PipelineConfig,
    search: Option<OptimOutcome>,
    started: Instant,
) -> Result<SegmentationResult> {
    let run = ifcm_run(domain, lambda, xi, init, &cfg.fcm)?;
    let membership = run.state.target_membership(domain);
    Ok(SegmentationResult {
        algorithm,
        labels: defuzzify(&membership, domain.target_dims())?,
        membership,
        centers: run.state.centers,
        lambda,
        xi,
        iterations: run.iterations,
        final_cost: run.cost,
        wall_time: started.elapsed(),
        search,
    })
}

fn refine(
    domain: &AttractionDomain,
    lambda: f64,
    xi: f64,
    init: &IfcmState,
    cfg: &PipelineConfig,
) -> Result<(IfcmState, f64)> {
    let mut out = ifcm_step(domain, lambda, xi, init, &cfg.fcm)?;
    for _ in 1..cfg.refine_steps {
        out = ifcm_step(domain, lambda, xi, &out.state, &cfg.fcm)?;
    }
    Ok((out.state, out.cost))
}

/// Cost after `refine_steps` steps from `init`. Many candidates land on the
/// same clamped corner, so values are cached by position.
pub fn strength_fitness<'a>(
    domain: &'a AttractionDomain,
    init: &IfcmState,
    cfg: &'a PipelineConfig,
) -> impl Fn(&[f64]) -> Result<f64> + Sync + 'a {
    let cache: Mutex<HashMap<[u64; 2], f64>> = Mutex::new(HashMap::new());
    let init = init.clone();
    move |p: &[f64]| {
        let key = [p[0].to_bits(), p[1].to_bits()];
        if let Some(&v) = cache.lock().expect("fitness cache poisoned").get(&key) {
            return Ok(v);
        }
        let (_, cost) = refine(domain, p[0], p[1], &init, cfg)?;
        cache
            .lock()
            .expect("fitness cache poisoned")
            .insert(key, cost);
        Ok(cost)
    }
}

fn tuned(
    algorithm: Algorithm,
    domain: &AttractionDomain,
    fcm_out: FcmOutcome,
    search: Search,
    cfg: &PipelineConfig,
    started: Instant,
) -> Result<SegmentationResult> {
    let init = domain.initial_state(&fcm_out.membership, &fcm_out.centers, cfg.fcm.m)?;
    let search = match (cfg.fixed_strengths, search) {
        (Some((l, x)), _) => Search::Fixed(l, x),
        (None, s) => s,
    };
    let outcome = match search {
        Search::Fixed(l, x) => {
            return finish(algorithm, domain, l, x, init, cfg, None, started);
        }
        Search::Pso => pso_minimize(strength_fitness(domain, &init, cfg), &cfg.pso)?,
        Search::Ga => ga_minimize(strength_fitness(domain, &init, cfg), &cfg.ga)?,
    };
    let (lambda, xi) = (outcome.best_position[0], outcome.best_position[1]);
    let (best_state, _) = refine(domain, lambda, xi, &init, cfg)?;
    finish(
        algorithm,
        domain,
        lambda,
        xi,
        best_state,
        cfg,
        Some(outcome),
        started,
    )
}

fn planar_start(img: &Volume, cfg: &PipelineConfig) -> Result<(AttractionDomain, FcmOutcome)> {
    cfg.validate()?;
    check_slice_input(img, cfg.clusters)?;
    let domain = AttractionDomain::planar(img, cfg.attraction.level)?;
    let out = modified_fcm(img, cfg.clusters, &cfg.fcm)?;
    Ok((domain, out))
}

/// Planar attraction FCM at `cfg.attraction`'s strengths (or
/// `cfg.fixed_strengths` when set).
pub fn ifcm_segment(img: &Volume, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    let t = Instant::now();
    let (domain, out) = planar_start(img, cfg)?;
    let s = Search::Fixed(cfg.attraction.lambda, cfg.attraction.xi);
    tuned(Algorithm::Ifcm, &domain, out, s, cfg, t)
}

/// Planar attraction FCM with strengths chosen by particle swarm.
pub fn ifcmpso_run(img: &Volume, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    let t = Instant::now();
    let (domain, out) = planar_start(img, cfg)?;
    tuned(Algorithm::IfcmPso, &domain, out, Search::Pso, cfg, t)
}

/// Planar attraction FCM with strengths chosen by the genetic algorithm.
pub fn gaifcm_run(img: &Volume, cfg: &PipelineConfig) -> Result<SegmentationResult> {
    let t = Instant::now();
    let (domain, out) = planar_start(img, cfg)?;
    tuned(Algorithm::GaIfcm, &domain, out, Search::Ga, cfg, t)
}

/// Swarm-tuned attraction FCM on `slice`, with attractions read from
/// `cfg.attraction.depth` shells that reach into the neighboring slices.
pub fn pifcm3d_run(
    vol: &Volume,
    slice: SliceRef,
    cfg: &PipelineConfig,
) -> Result<SegmentationResult> {
    let t = Instant::now();
    cfg.validate()?;
    let img = extract_slice(vol, slice)?;
    check_slice_input(&img, cfg.clusters)?;
    let domain = volumetric_domain(vol, slice, cfg.attraction.depth, cfg.attraction.decay)?;
    let out = modified_fcm(&img, cfg.clusters, &cfg.fcm)?;
    tuned(Algorithm::Pifcm3d, &domain, out, Search::Pso, cfg, t)
}

/// Runs `algorithm` on `slice` of `vol`. Planar algorithms see only the slice.
pub fn run_algorithm(
    algorithm: Algorithm,
    vol: &Volume,
    slice: SliceRef,
    cfg: &PipelineConfig,
) -> Result<SegmentationResult> {
    if algorithm == Algorithm::Pifcm3d {
        return pifcm3d_run(vol, slice, cfg);
    }
    let img = extract_slice(vol, slice)?;
    match algorithm {
        Algorithm::Fcm => fcm_segment(&img, cfg),
        Algorithm::ModifiedFcm => mfcm_segment(&img, cfg),
        Algorithm::Ifcm => ifcm_segment(&img, cfg),
        Algorithm::IfcmPso => ifcmpso_run(&img, cfg),
        Algorithm::GaIfcm => gaifcm_run(&img, cfg),
        Algorithm::Pifcm3d => unreachable!(),
    }
}
