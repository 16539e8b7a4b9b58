//! Per-cluster segmentation error ratios.
//!
//! For one cluster, viewed one-vs-rest: `n_fp` voxels were put in the
//! cluster but belong elsewhere, `n_fn` belong to it but were put elsewhere,
//! `n_p` belong to it and `n_n` do not.
//!
//! * UnS = `n_fp / n_n`
//! * OS = `n_fn / n_p`
//! * IncS = `(n_fp + n_fn) / N` by default, or `(UnS + OS) / N` as
//!   [`IncsVariant::RatioSum`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fuzzy::MembershipMatrix;
use crate::volume::{Dims, LabelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterErrorCounts {
    pub n_fp: usize,
    pub n_fn: usize,
    pub n_p: usize,
    pub n_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncsVariant {
    /// Fraction of all voxels that are wrong for this cluster.
    #[default]
    ErrorFraction,
    /// Sum of the two ratios divided by the voxel count.
    RatioSum,
}

impl fmt::Display for IncsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IncsVariant::ErrorFraction => "fraction",
            IncsVariant::RatioSum => "ratio-sum",
        })
    }
}

impl FromStr for IncsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fraction" | "default" => Ok(IncsVariant::ErrorFraction),
            "ratio-sum" | "literal" => Ok(IncsVariant::RatioSum),
            other => Err(Error::validation(format!("unknown IncS variant '{other}'"))),
        }
    }
}

impl ClusterErrorCounts {
    pub fn total(&self) -> usize {
        self.n_p + self.n_n
    }

    pub fn uns(&self) -> Result<f64> {
        if self.n_n == 0 {
            return Err(Error::UndefinedMetric(
                "UnS needs voxels outside the cluster".into(),
            ));
        }
        Ok(self.n_fp as f64 / self.n_n as f64)
    }

    pub fn os(&self) -> Result<f64> {
        if self.n_p == 0 {
            return Err(Error::UndefinedMetric("OS of an empty cluster".into()));
        }
        Ok(self.n_fn as f64 / self.n_p as f64)
    }

    pub fn incs(&self, variant: IncsVariant) -> Result<f64> {
        let n = self.total() as f64;
        match variant {
            IncsVariant::ErrorFraction => Ok((self.n_fp + self.n_fn) as f64 / n),
            IncsVariant::RatioSum => Ok((self.uns()? + self.os()?) / n),
        }
    }
}

pub fn uns(c: &ClusterErrorCounts) -> Result<f64> {
    c.uns()
}

pub fn os(c: &ClusterErrorCounts) -> Result<f64> {
    c.os()
}

pub fn incs(c: &ClusterErrorCounts, variant: IncsVariant) -> Result<f64> {
    c.incs(variant)
}

pub fn error_counts(
    pred: &LabelVolume,
    truth: &LabelVolume,
    cluster: u8,
) -> Result<ClusterErrorCounts> {
    if pred.dims() != truth.dims() {
        return Err(Error::validation(format!(
            "prediction dims {} differ from truth dims {}",
            pred.dims(),
            truth.dims()
        )));
    }
    let mut c = ClusterErrorCounts {
        n_fp: 0,
        n_fn: 0,
        n_p: 0,
        n_n: 0,
    };
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p == cluster, t == cluster) {
            (true, true) => c.n_p += 1,
            (false, true) => {
                c.n_p += 1;
                c.n_fn += 1;
            }
            (true, false) => {
                c.n_n += 1;
                c.n_fp += 1;
            }
            (false, false) => c.n_n += 1,
        }
    }
    Ok(c)
}

/// Percent by which `incs_ours` improves on `incs_a`; negative when `a` wins.
pub fn relative_improvement(incs_a: f64, incs_ours: f64) -> Result<f64> {
    if !(incs_a > 0.0 && incs_a.is_finite()) || !incs_ours.is_finite() {
        return Err(Error::UndefinedMetric(format!(
            "relative improvement over IncS {incs_a} is undefined"
        )));
    }
    Ok(100.0 * (incs_a - incs_ours) / incs_a)
}

/// Crisp labels by per-row argmax, lowest index on ties.
pub fn defuzzify(u: &MembershipMatrix, dims: Dims) -> Result<LabelVolume> {
    if u.n() != dims.len() {
        return Err(Error::validation(format!(
            "{} membership rows for {} voxels",
            u.n(),
            dims.len()
        )));
    }
    if u.c() > 256 {
        return Err(Error::validation(
            "at most 256 clusters fit in a label volume",
        ));
    }
    LabelVolume::new(dims, u.labels().into_iter().map(|l| l as u8).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterScores {
    pub cluster: u8,
    pub counts: ClusterErrorCounts,
    pub uns: f64,
    pub os: f64,
    pub incs: f64,
}

/// Scores for every cluster `0..clusters`.
pub fn evaluate(
    pred: &LabelVolume,
    truth: &LabelVolume,
    clusters: usize,
    variant: IncsVariant,
) -> Result<Vec<ClusterScores>> {
    truth.check_labels(clusters)?;
    pred.check_labels(clusters)?;
    (0..clusters)
        .map(|k| {
            let k = k as u8;
            let counts = error_counts(pred, truth, k)?;
            Ok(ClusterScores {
                cluster: k,
                counts,
                uns: counts.uns()?,
                os: counts.os()?,
                incs: counts.incs(variant)?,
            })
        })
        .collect()
}

/// Mean IncS over clusters.
pub fn mean_incs(scores: &[ClusterScores]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().map(|s| s.incs).sum::<f64>() / scores.len() as f64
}
