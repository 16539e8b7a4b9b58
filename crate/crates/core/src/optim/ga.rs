//! Real-coded generational genetic algorithm.
//!
//! Binary tournaments pick parents, blend crossover (BLX-0.5) mixes them,
//! Gaussian mutation perturbs genes, and the best individual always survives.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    argmin, clamp_to, evaluate_all, stream_rng, validate_bounds, validate_seeded, Bounds,
    OptimOutcome,
};
use crate::error::{Error, Result};

const BLX_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each dimension's range.
    pub mutation_sigma: f64,
    /// Stop when the best value improves by less than this over
    /// `stall_generations` generations.
    pub minfunc: f64,
    pub stall_generations: usize,
    pub bounds: Bounds,
    pub seed: u64,
    pub seeded_positions: Vec<Vec<f64>>,
}

impl GaConfig {
    pub fn new(bounds: Bounds, seed: u64) -> Self {
        GaConfig {
            population: 50,
            generations: 20,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_sigma: 0.1,
            minfunc: 1e-8,
            stall_generations: 5,
            bounds,
            seed,
            seeded_positions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::validation(format!(
                "population must be at least 2, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(Error::validation("GA needs at least one generation"));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(Error::validation("mutation_sigma must be finite and >= 0"));
        }
        if !(self.minfunc.is_finite() && self.minfunc >= 0.0) {
            return Err(Error::validation("minfunc must be finite and >= 0"));
        }
        if self.stall_generations == 0 {
            return Err(Error::validation("stall_generations must be at least 1"));
        }
        validate_bounds(&self.bounds)?;
        validate_seeded(&self.seeded_positions, &self.bounds, self.population)
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64]) -> usize {
    let a = rng.random_range(0..fitness.len());
    let b = rng.random_range(0..fitness.len());
    if fitness[b] < fitness[a] || (fitness[b] == fitness[a] && b < a) {
        b
    } else {
        a
    }
}

pub fn ga_minimize<F>(f: F, cfg: &GaConfig) -> Result<OptimOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let n = cfg.population;
    let mut rng = stream_rng(cfg.seed, 0);
    let mut pop: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let x: Vec<f64> = cfg
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect();
            cfg.seeded_positions.get(i).cloned().unwrap_or(x)
        })
        .collect();
    let mut fit = evaluate_all(&f, &pop)?;
    let mut evaluations = n;
    let mut trace = vec![fit[argmin(&fit)]];

    let mut generation = 0;
    while generation < cfg.generations {
        generation += 1;
        let mut rng = stream_rng(cfg.seed, generation as u64);
        let elite = argmin(&fit);
        let mut children = Vec::with_capacity(n - 1);
        while children.len() < n - 1 {
            let a = &pop[tournament(&mut rng, &fit)];
            let b = &pop[tournament(&mut rng, &fit)];
            let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_rate {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let (lo, hi) = (x.min(y), x.max(y));
                        let pad = BLX_ALPHA * (hi - lo);
                        if pad > 0.0 {
                            rng.random_range(lo - pad..=hi + pad)
                        } else {
                            lo
                        }
                    })
                    .collect()
            } else {
                a.clone()
            };
            for (gene, &(lo, hi)) in child.iter_mut().zip(&cfg.bounds) {
                if rng.random::<f64>() < cfg.mutation_rate {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *gene += z * cfg.mutation_sigma * (hi - lo);
                }
            }
            clamp_to(&mut child, &cfg.bounds);
            children.push(child);
        }
        let child_fit = evaluate_all(&f, &children)?;
        evaluations += children.len();

        let mut next = Vec::with_capacity(n);
        let mut next_fit = Vec::with_capacity(n);
        next.push(pop[elite].clone());
        next_fit.push(fit[elite]);
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;

        trace.push(fit[argmin(&fit)]);
        let k = cfg.stall_generations;
        if generation >= k && trace[generation - k] - trace[generation] < cfg.minfunc {
            break;
        }
    }

    let best = argmin(&fit);
    Ok(OptimOutcome {
        best_position: pop[best].clone(),
        best_value: fit[best],
        trace,
        iterations: generation,
        evaluations,
    })
}
