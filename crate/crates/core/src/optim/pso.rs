//! Global-best particle swarm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmin, clamp_to, evaluate_all, stream_rng, validate_bounds, validate_seeded, Bounds,
    OptimOutcome,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    /// Inertia applied to the previous velocity.
    pub omega: f64,
    /// Pull toward the particle's own best.
    pub phi_p: f64,
    /// Pull toward the swarm best.
    pub phi_g: f64,
    pub max_iter: usize,
    /// Stop when the swarm best moves less than this.
    pub minstep: f64,
    /// Stop when the swarm best improves by no more than this.
    pub minfunc: f64,
    pub bounds: Bounds,
    pub seed: u64,
    /// Initial positions for the first particles; the rest start uniformly.
    pub seeded_positions: Vec<Vec<f64>>,
}

impl PsoConfig {
    pub fn new(bounds: Bounds, seed: u64) -> Self {
        PsoConfig {
            swarm_size: 50,
            omega: 0.5,
            phi_p: 0.5,
            phi_g: 0.5,
            max_iter: 20,
            minstep: 1e-8,
            minfunc: 1e-8,
            bounds,
            seed,
            seeded_positions: Vec::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::validation(format!(
                "swarm size must be at least 2, got {}",
                self.swarm_size
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("PSO max_iter must be at least 1"));
        }
        for (name, v) in [
            ("omega", self.omega),
            ("phi_p", self.phi_p),
            ("phi_g", self.phi_g),
            ("minstep", self.minstep),
            ("minfunc", self.minfunc),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        validate_bounds(&self.bounds)?;
        validate_seeded(&self.seeded_positions, &self.bounds, self.swarm_size)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` over the box in `cfg.bounds`.
///
/// Every particle draws from its own random stream, so results depend only
/// on the seed even though fitness values are computed concurrently. The
/// stopping tests run whenever the swarm best improves: a gain of at most
/// `minfunc` or a move of at most `minstep` ends the search.
pub fn pso_minimize<F>(f: F, cfg: &PsoConfig) -> Result<OptimOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let d = cfg.dims();
    let s = cfg.swarm_size;
    let mut rngs: Vec<ChaCha8Rng> = (0..s).map(|i| stream_rng(cfg.seed, i as u64)).collect();

    let mut x: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(s);
    for (i, rng) in rngs.iter_mut().enumerate() {
        let mut xi: Vec<f64> = cfg
            .bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect();
        let vi = cfg
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let r = hi - lo;
                rng.random_range(-r..=r)
            })
            .collect();
        if let Some(p) = cfg.seeded_positions.get(i) {
            xi.clone_from(p);
        }
        x.push(xi);
        v.push(vi);
    }

    let fx = evaluate_all(&f, &x)?;
    let mut evaluations = s;
    let mut p = x.clone();
    let mut fp = fx;
    let gi = argmin(&fp);
    let mut g = p[gi].clone();
    let mut fg = fp[gi];
    let mut trace = vec![fg];

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        for i in 0..s {
            let rng = &mut rngs[i];
            for k in 0..d {
                let rp: f64 = rng.random();
                let rg: f64 = rng.random();
                v[i][k] = cfg.omega * v[i][k]
                    + cfg.phi_p * rp * (p[i][k] - x[i][k])
                    + cfg.phi_g * rg * (g[k] - x[i][k]);
                x[i][k] += v[i][k];
            }
            clamp_to(&mut x[i], &cfg.bounds);
        }
        let fx = evaluate_all(&f, &x)?;
        evaluations += s;
        for i in 0..s {
            if fx[i] < fp[i] {
                p[i].clone_from(&x[i]);
                fp[i] = fx[i];
            }
        }

        let bi = argmin(&fp);
        let mut done = false;
        if fp[bi] < fg {
            let step = distance(&g, &p[bi]);
            let gain = fg - fp[bi];
            g.clone_from(&p[bi]);
            fg = fp[bi];
            done = gain <= cfg.minfunc || step <= cfg.minstep;
        }
        trace.push(fg);
        if done {
            break;
        }
    }

    Ok(OptimOutcome {
        best_position: g,
        best_value: fg,
        trace,
        iterations,
        evaluations,
    })
}
