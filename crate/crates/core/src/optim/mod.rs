//! Bounded continuous minimizers over small boxes.
//!
//! Fitness functions are fallible so pipeline errors (a degenerate cluster,
//! say) propagate out of the search. A non-finite fitness aborts the search
//! with the offending position.

mod ga;
mod pso;

pub use ga::{ga_minimize, GaConfig};
pub use pso::{pso_minimize, PsoConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Bounds = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    /// Best value after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

pub(crate) fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::validation(
            "search space needs at least one dimension",
        ));
    }
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::validation(format!(
                "bad bounds ({lo}, {hi}) for dimension {d}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn validate_seeded(
    seeded: &[Vec<f64>],
    bounds: &[(f64, f64)],
    cap: usize,
) -> Result<()> {
    if seeded.len() > cap {
        return Err(Error::validation(format!(
            "{} seeded positions for {cap} slots",
            seeded.len()
        )));
    }
    for p in seeded {
        if p.len() != bounds.len()
            || p.iter()
                .zip(bounds)
                .any(|(&x, &(lo, hi))| !(lo..=hi).contains(&x))
        {
            return Err(Error::validation(format!(
                "seeded position {p:?} outside the search box"
            )));
        }
    }
    Ok(())
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn clamp_to(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Evaluates every position (possibly concurrently) and checks finiteness.
pub(crate) fn evaluate_all<F>(f: &F, xs: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    let values: Vec<Result<f64>> = xs.par_iter().map(|x| f(x)).collect();
    values
        .into_iter()
        .zip(xs)
        .map(|(v, x)| {
            let v = v?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteFitness {
                    value: v,
                    position: x.clone(),
                })
            }
        })
        .collect()
}

/// Index of the smallest value; ties go to the lowest index.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}
