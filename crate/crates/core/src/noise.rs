//! Seeded Gaussian and Poisson noise at a "percent" level.
//!
//! The percent is the noise standard deviation at the brightest tissue
//! (`intensity_max`) relative to `intensity_max`, for both kinds. Outputs are
//! clamped to `[0, intensity_max]`.
//!
//! Draws come from per-block ChaCha streams keyed by block index, so the
//! result depends only on the seed and never on how blocks are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume;

const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Poisson,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => Ok(NoiseKind::Gaussian),
            "poisson" => Ok(NoiseKind::Poisson),
            other => Err(Error::validation(format!("unknown noise kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub percent: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, percent: f64, seed: u64) -> Self {
        NoiseSpec {
            kind,
            percent,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percent.is_finite() && self.percent > 0.0 && self.percent <= 100.0) {
            return Err(Error::validation(format!(
                "noise percent must be in (0, 100], got {}",
                self.percent
            )));
        }
        Ok(())
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

pub fn add_noise(v: &Volume, spec: &NoiseSpec) -> Result<Volume> {
    spec.validate()?;
    let max = f64::from(v.intensity_max());
    let frac = spec.percent / 100.0;
    let mut out = vec![0f32; v.len()];

    match spec.kind {
        NoiseKind::Gaussian => {
            let sigma = frac * max;
            out.par_chunks_mut(BLOCK)
                .zip(v.data().par_chunks(BLOCK))
                .enumerate()
                .for_each(|(b, (dst, src))| {
                    let mut rng = block_rng(spec.seed, b);
                    for (o, &x) in dst.iter_mut().zip(src) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *o = (f64::from(x) + sigma * z).clamp(0.0, max) as f32;
                    }
                });
        }
        NoiseKind::Poisson => {
            // scaled Poisson: variance s * x, so std at x = max is frac * max
            let s = frac * frac * max;
            out.par_chunks_mut(BLOCK)
                .zip(v.data().par_chunks(BLOCK))
                .enumerate()
                .for_each(|(b, (dst, src))| {
                    let mut rng = block_rng(spec.seed, b);
                    for (o, &x) in dst.iter_mut().zip(src) {
                        let rate = f64::from(x) / s;
                        let count = if rate > 0.0 {
                            Poisson::new(rate)
                                .map(|p| p.sample(&mut rng))
                                .unwrap_or(rate)
                        } else {
                            0.0
                        };
                        *o = (s * count).clamp(0.0, max) as f32;
                    }
                });
        }
    }
    Volume::new(v.dims(), out, v.intensity_max())
}
