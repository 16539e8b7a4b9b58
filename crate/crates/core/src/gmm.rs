//! One-dimensional Gaussian mixture fitted by EM, used to seed FCM centers.

use crate::error::{Error, Result};
use crate::fuzzy::ClusterSet;

const MAX_ITERATIONS: usize = 100;
const LL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Starting means at the centers of `c` equal bins over the data range.
///
/// Quantile starts put several components inside a dominant class, and EM
/// rarely pulls them out within the iteration cap.
fn range_means(sorted: &[f64], c: usize) -> Vec<f64> {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    (0..c)
        .map(|k| lo + (k as f64 + 0.5) / c as f64 * (hi - lo))
        .collect()
}

/// Fits a `c`-component mixture. Components start evenly spaced over the
/// data range with a shared variance; variances are floored at
/// `(1e-4 * max|x|)^2`.
pub fn fit_gmm(data: &[f64], c: usize) -> Result<GaussianMixture> {
    if c == 0 {
        return Err(Error::validation("mixture needs at least one component"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("mixture data must be finite"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if sorted.is_empty() || distinct < c {
        return Err(Error::validation(format!(
            "need at least {c} distinct values, found {}",
            if sorted.is_empty() { 0 } else { distinct }
        )));
    }

    let n = data.len() as f64;
    let scale = sorted[0].abs().max(sorted[sorted.len() - 1].abs()).max(1.0);
    let floor = (1e-4 * scale).powi(2);
    let range = sorted[sorted.len() - 1] - sorted[0];

    let mut means = range_means(&sorted, c);
    let mut variances = vec![(range / (2.0 * c as f64)).powi(2).max(floor); c];
    let mut weights = vec![1.0 / c as f64; c];

    let mut resp = vec![0.0; c];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;

    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut nk = vec![0.0; c];
        let mut sx = vec![0.0; c];
        let mut sxx = vec![0.0; c];
        ll = 0.0;

        let log_norm: Vec<f64> = (0..c)
            .map(|k| weights[k].ln() - 0.5 * (ln_2pi + variances[k].ln()))
            .collect();
        for &x in data {
            let mut top = f64::NEG_INFINITY;
            for k in 0..c {
                let d = x - means[k];
                resp[k] = log_norm[k] - 0.5 * d * d / variances[k];
                top = top.max(resp[k]);
            }
            let mut s = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - top).exp();
                s += *r;
            }
            ll += top + s.ln();
            for k in 0..c {
                let r = resp[k] / s;
                nk[k] += r;
                sx[k] += r * x;
                sxx[k] += r * x * x;
            }
        }

        for k in 0..c {
            if nk[k] <= f64::MIN_POSITIVE {
                // empty component keeps its mean and variance
                continue;
            }
            weights[k] = nk[k] / n;
            means[k] = sx[k] / nk[k];
            variances[k] = (sxx[k] / nk[k] - means[k] * means[k]).max(floor);
        }
        let wsum: f64 = weights.iter().sum();
        weights
            .iter_mut()
            .for_each(|w| *w = (*w / wsum).max(1e-300));

        if (ll - prev_ll).abs() < LL_TOL {
            break;
        }
        prev_ll = ll;
    }

    Ok(GaussianMixture {
        weights,
        means,
        variances,
        log_likelihood: ll,
        iterations,
    })
}

/// Component means of a fitted mixture, ascending.
pub fn gmm_init(data: &[f64], c: usize) -> Result<ClusterSet> {
    let g = fit_gmm(data, c)?;
    ClusterSet::new(g.means).map_err(|_| {
        Error::validation(format!(
            "mixture components collapsed onto each other for c = {c}"
        ))
    })
}
