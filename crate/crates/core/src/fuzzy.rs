//! Fuzzy c-means: membership matrix, cost, the two alternating updates, and
//! the Picard loop. [`modified_fcm`] seeds the loop with mixture-model means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::gmm_init;
use crate::volume::Volume;

/// Row tolerance for the partition constraint.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// `n x c` fuzzy partition stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    n: usize,
    c: usize,
    u: Vec<f64>,
}

impl MembershipMatrix {
    /// Wraps raw row-major values after checking the partition constraints on rows.
    pub fn new(n: usize, c: usize, u: Vec<f64>) -> Result<Self> {
        let m = Self::from_raw(n, c, u)?;
        m.check_rows(ROW_SUM_TOL)?;
        Ok(m)
    }

    pub(crate) fn from_raw(n: usize, c: usize, u: Vec<f64>) -> Result<Self> {
        if c == 0 || u.len() != n * c {
            return Err(Error::validation(format!(
                "membership shape mismatch: {} values for {n}x{c}",
                u.len()
            )));
        }
        Ok(MembershipMatrix { n, c, u })
    }

    /// Every point belongs fully to cluster `labels[i]`.
    pub fn crisp(labels: &[usize], c: usize) -> Result<Self> {
        let mut u = vec![0.0; labels.len() * c];
        for (i, &l) in labels.iter().enumerate() {
            if l >= c {
                return Err(Error::validation(format!("label {l} >= {c} clusters")));
            }
            u[i * c + l] = 1.0;
        }
        Ok(MembershipMatrix {
            n: labels.len(),
            c,
            u,
        })
    }

    pub fn uniform(n: usize, c: usize) -> Self {
        MembershipMatrix {
            n,
            c,
            u: vec![1.0 / c as f64; n * c],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.c + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.u[i * self.c..(i + 1) * self.c]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.u.chunks_exact(self.c)
    }

    /// Copy of rows `start..end`.
    pub fn sub_rows(&self, start: usize, end: usize) -> MembershipMatrix {
        MembershipMatrix {
            n: end - start,
            c: self.c,
            u: self.u[start * self.c..end * self.c].to_vec(),
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.c];
        for row in self.rows() {
            for (acc, &v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    /// Argmax per row, ties to the lowest index.
    pub fn labels(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// `max |a - b|` over all entries.
    pub fn max_abs_diff(&self, other: &MembershipMatrix) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Reorders columns so that new column `k` is old column `perm[k]`.
    pub fn permute_columns(&mut self, perm: &[usize]) {
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return;
        }
        let c = self.c;
        let mut tmp = vec![0.0; c];
        for row in self.u.chunks_exact_mut(c) {
            for (k, &p) in perm.iter().enumerate() {
                tmp[k] = row[p];
            }
            row.copy_from_slice(&tmp);
        }
    }

    fn check_rows(&self, tol: f64) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            if let Some(&v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::validation(format!(
                    "membership ({i}) = {v} outside [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::validation(format!("row {i} sums to {s}")));
            }
        }
        Ok(())
    }

    /// Checks all three partition constraints: entries in `[0, 1]`, rows sum to
    /// one, and (for `c >= 2`) every column mass strictly between 0 and `n`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        self.check_rows(tol)?;
        if self.c >= 2 {
            for (j, s) in self.column_sums().into_iter().enumerate() {
                if !(s > 0.0 && s < self.n as f64) {
                    return Err(Error::validation(format!(
                        "cluster {j} mass {s} not in (0, {})",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Cluster centers in intensity units, kept in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    centers: Vec<f64>,
}

impl ClusterSet {
    /// Sorts the centers ascending; rejects non-finite or repeated values.
    pub fn new(mut centers: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::validation("cluster set is empty"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("cluster centers must be finite"));
        }
        centers.sort_by(f64::total_cmp);
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("cluster centers must be distinct"));
        }
        Ok(ClusterSet { centers })
    }

    /// Takes centers already in canonical order without re-checking distinctness.
    pub(crate) fn from_sorted(centers: Vec<f64>) -> Self {
        ClusterSet { centers }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmConfig {
    pub m: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig {
            m: 2.0,
            epsilon: 0.01,
            max_iterations: 150,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 1.0) {
            return Err(Error::validation(format!(
                "fuzziness m must be > 1, got {}",
                self.m
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::validation(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// `n x c` squared point-to-center distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistances {
    n: usize,
    c: usize,
    d2: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(n: usize, c: usize, d2: Vec<f64>) -> Result<Self> {
        if c == 0 || d2.len() != n * c {
            return Err(Error::validation(format!(
                "distance shape mismatch: {} values for {n}x{c}",
                d2.len()
            )));
        }
        if d2.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::validation(
                "squared distances must be finite and >= 0",
            ));
        }
        Ok(SquaredDistances { n, c, d2 })
    }

    /// Plain intensity distances `(x_i - c_j)^2`.
    pub fn plain(data: &[f64], centers: &[f64]) -> Self {
        let c = centers.len();
        let mut d2 = vec![0.0; data.len() * c];
        for (row, &x) in d2.chunks_exact_mut(c).zip(data) {
            for (d, &cj) in row.iter_mut().zip(centers) {
                *d = (x - cj) * (x - cj);
            }
        }
        SquaredDistances {
            n: data.len(),
            c,
            d2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d2
    }
}

#[inline]
pub(crate) fn pow_m(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

/// `J_m = sum_i sum_j u_ij^m d2_ij`.
pub fn jm_cost(u: &MembershipMatrix, dists: &SquaredDistances, m: f64) -> Result<f64> {
    if u.n != dists.n || u.c != dists.c {
        return Err(Error::validation(format!(
            "cost shape mismatch: membership {}x{}, distances {}x{}",
            u.n, u.c, dists.n, dists.c
        )));
    }
    Ok(u.u
        .iter()
        .zip(&dists.d2)
        .map(|(&v, &d)| pow_m(v, m) * d)
        .sum())
}

/// One membership row from squared distances. A zero distance gives a crisp
/// row at the first such cluster.
///
/// Terms are scaled by the smallest distance so large exponents (m near 1)
/// cannot underflow every term at once.
#[inline]
pub(crate) fn membership_row(d2: &[f64], m: f64, out: &mut [f64]) {
    let p = 1.0 / (m - 1.0);
    let mut nearest = 0;
    for (j, &d) in d2.iter().enumerate() {
        if d < d2[nearest] {
            nearest = j;
        }
    }
    let dmin = d2[nearest];
    if dmin == 0.0 || !dmin.is_finite() {
        out.fill(0.0);
        out[nearest] = 1.0;
        return;
    }
    let mut sum = 0.0;
    for (&d, o) in d2.iter().zip(out.iter_mut()) {
        let r = dmin / d;
        *o = if p == 1.0 { r } else { r.powf(p) };
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn update_membership(dists: &SquaredDistances, m: f64) -> MembershipMatrix {
    let c = dists.c;
    let mut u = vec![0.0; dists.d2.len()];
    u.par_chunks_mut(c)
        .zip(dists.d2.par_chunks(c))
        .for_each(|(out, d)| membership_row(d, m, out));
    MembershipMatrix { n: dists.n, c, u }
}

/// `u^m`-weighted means of `data` over the given membership rows, in column
/// order (no sorting).
pub(crate) fn weighted_means(rows: &[f64], c: usize, data: &[f64], m: f64) -> Result<Vec<f64>> {
    let mut num = vec![0.0; c];
    let mut den = vec![0.0; c];
    for (row, &x) in rows.chunks_exact(c).zip(data) {
        for j in 0..c {
            let w = pow_m(row[j], m);
            num[j] += w * x;
            den[j] += w;
        }
    }
    num.iter()
        .zip(&den)
        .enumerate()
        .map(|(j, (&a, &b))| {
            if b > 0.0 && b.is_finite() {
                Ok(a / b)
            } else {
                Err(Error::DegenerateCluster { cluster: j })
            }
        })
        .collect()
}

/// Permutation that sorts `centers` ascending (stable).
pub(crate) fn canonical_order(centers: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..centers.len()).collect();
    perm.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    perm
}

/// Centers in column order before canonical sorting.
pub fn raw_centers(u: &MembershipMatrix, data: &[f64], m: f64) -> Result<Vec<f64>> {
    if data.len() != u.n {
        return Err(Error::validation(format!(
            "{} data points for {} membership rows",
            data.len(),
            u.n
        )));
    }
    weighted_means(&u.u, u.c, data, m)
}

/// Weighted-mean centers, sorted ascending. The membership columns are
/// permuted in place to stay paired with their centers.
pub fn update_centers(u: &mut MembershipMatrix, data: &[f64], m: f64) -> Result<ClusterSet> {
    let raw = raw_centers(u, data, m)?;
    let perm = canonical_order(&raw);
    u.permute_columns(&perm);
    Ok(ClusterSet::from_sorted(
        perm.iter().map(|&p| raw[p]).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FcmInit {
    /// Random row-normalized memberships drawn from the seed.
    Random(u64),
    Centers(ClusterSet),
}

#[derive(Debug, Clone)]
pub struct FcmOutcome {
    pub membership: MembershipMatrix,
    pub centers: ClusterSet,
    pub iterations: usize,
    /// `J_m` after each iteration.
    pub cost_trace: Vec<f64>,
}

impl FcmOutcome {
    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(0.0)
    }
}

fn random_membership(n: usize, c: usize, seed: u64) -> MembershipMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; n * c];
    for row in u.chunks_exact_mut(c) {
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = rng.random::<f64>() + 1e-12;
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    MembershipMatrix { n, c, u }
}

/// Picard iteration between the center and membership updates until the
/// largest membership change drops below `epsilon` or the iteration cap.
pub fn fcm(data: &[f64], c: usize, cfg: &FcmConfig, init: FcmInit) -> Result<FcmOutcome> {
    cfg.validate()?;
    if c == 0 || data.len() < c {
        return Err(Error::validation(format!(
            "need 1 <= c <= n, got c = {c}, n = {}",
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("data must be finite"));
    }
    let mut u = match init {
        FcmInit::Random(seed) => random_membership(data.len(), c, seed),
        FcmInit::Centers(cs) => {
            if cs.len() != c {
                return Err(Error::validation(format!(
                    "{} initial centers for c = {c}",
                    cs.len()
                )));
            }
            update_membership(&SquaredDistances::plain(data, cs.centers()), cfg.m)
        }
    };

    let mut cost_trace = Vec::new();
    let mut iterations = 0;
    let mut centers = ClusterSet::from_sorted(Vec::new());
    while iterations < cfg.max_iterations {
        iterations += 1;
        centers = update_centers(&mut u, data, cfg.m)?;
        let d2 = SquaredDistances::plain(data, centers.centers());
        let next = update_membership(&d2, cfg.m);
        cost_trace.push(jm_cost(&next, &d2, cfg.m)?);
        let delta = next.max_abs_diff(&u);
        u = next;
        if delta < cfg.epsilon {
            break;
        }
    }
    Ok(FcmOutcome {
        membership: u,
        centers,
        iterations,
        cost_trace,
    })
}

/// FCM on the flattened intensities, started from mixture-model means.
pub fn modified_fcm(img: &Volume, c: usize, cfg: &FcmConfig) -> Result<FcmOutcome> {
    let data = img.to_f64();
    let init = gmm_init(&data, c)?;
    fcm(&data, c, cfg, FcmInit::Centers(init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn cost_zero_and_single_term() {
        let u = MembershipMatrix::uniform(3, 2);
        let d = SquaredDistances::new(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(jm_cost(&u, &d, 2.0).unwrap(), 0.0);

        let u = MembershipMatrix::new(1, 1, vec![1.0]).unwrap();
        let d = SquaredDistances::new(1, 1, vec![4.0]).unwrap();
        assert_eq!(jm_cost(&u, &d, 2.0).unwrap(), 4.0);

        let d = SquaredDistances::new(1, 2, vec![4.0, 1.0]).unwrap();
        assert!(jm_cost(&u, &d, 2.0).is_err());
    }

    #[test]
    fn cost_matches_double_loop() {
        let mut s = 17u64;
        let (n, c) = (5, 3);
        let raw: Vec<f64> = (0..n * c).map(|_| lcg(&mut s)).collect();
        let mut u = raw.clone();
        for row in u.chunks_exact_mut(c) {
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= t);
        }
        let d2: Vec<f64> = (0..n * c).map(|_| 10.0 * lcg(&mut s)).collect();
        for m in [1.5, 2.0, 3.0] {
            let mut want = 0.0;
            for i in 0..n {
                for j in 0..c {
                    want += u[i * c + j].powf(m) * d2[i * c + j];
                }
            }
            let got = jm_cost(
                &MembershipMatrix::new(n, c, u.clone()).unwrap(),
                &SquaredDistances::new(n, c, d2.clone()).unwrap(),
                m,
            )
            .unwrap();
            assert!((got - want).abs() < 1e-12, "m={m}: {got} vs {want}");
        }
    }

    #[test]
    fn membership_closed_forms() {
        let d = SquaredDistances::new(1, 2, vec![4.0, 4.0]).unwrap();
        assert_eq!(update_membership(&d, 2.0).row(0), &[0.5, 0.5]);

        let d = SquaredDistances::new(1, 2, vec![1.0, 9.0]).unwrap();
        let u = update_membership(&d, 2.0);
        assert!((u.get(0, 0) - 0.9).abs() < 1e-15);
        assert!((u.get(0, 1) - 0.1).abs() < 1e-15);

        let d = SquaredDistances::new(1, 3, vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(update_membership(&d, 2.0).row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn membership_matches_literal_ratio_form() {
        let mut s = 5u64;
        let (n, c) = (20, 4);
        let d2: Vec<f64> = (0..n * c).map(|_| 0.1 + 50.0 * lcg(&mut s)).collect();
        for m in [1.3, 2.0, 2.7] {
            let u = update_membership(&SquaredDistances::new(n, c, d2.clone()).unwrap(), m);
            for i in 0..n {
                for j in 0..c {
                    let dij = d2[i * c + j].sqrt();
                    let denom: f64 = (0..c)
                        .map(|k| (dij / d2[i * c + k].sqrt()).powf(2.0 / (m - 1.0)))
                        .sum();
                    assert!((u.get(i, j) - 1.0 / denom).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn centers_from_pure_groups() {
        let data = [0.0, 0.0, 10.0, 10.0];
        let mut u = MembershipMatrix::crisp(&[1, 1, 0, 0], 2).unwrap();
        let cs = update_centers(&mut u, &data, 2.0).unwrap();
        assert_eq!(cs.centers(), &[0.0, 10.0]);
        // columns follow the sort
        assert_eq!(u.labels(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn uniform_membership_gives_data_mean() {
        let data = [1.0, 2.0, 6.0, 7.0];
        let u = MembershipMatrix::uniform(4, 2);
        let raw = raw_centers(&u, &data, 2.0).unwrap();
        assert!(raw.iter().all(|&c| (c - 4.0).abs() < 1e-12));
    }

    #[test]
    fn centers_match_weighted_mean_oracle() {
        let mut s = 99u64;
        let (n, c) = (30, 3);
        let data: Vec<f64> = (0..n).map(|_| 255.0 * lcg(&mut s)).collect();
        let mut u: Vec<f64> = (0..n * c).map(|_| lcg(&mut s)).collect();
        for row in u.chunks_exact_mut(c) {
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= t);
        }
        let m = 2.0;
        let want: Vec<f64> = (0..c)
            .map(|j| {
                let num: f64 = (0..n).map(|i| u[i * c + j].powf(m) * data[i]).sum();
                let den: f64 = (0..n).map(|i| u[i * c + j].powf(m)).sum();
                num / den
            })
            .collect();
        let got = raw_centers(&MembershipMatrix::new(n, c, u).unwrap(), &data, m).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_cluster_is_degenerate() {
        let mut u = MembershipMatrix::crisp(&[0, 0, 0], 2).unwrap();
        assert!(matches!(
            update_centers(&mut u, &[1.0, 2.0, 3.0], 2.0),
            Err(Error::DegenerateCluster { cluster: 1 })
        ));
    }

    #[test]
    fn separable_data_converges() {
        let data = [0.0, 0.0, 10.0, 10.0];
        let out = fcm(&data, 2, &FcmConfig::default(), FcmInit::Random(1)).unwrap();
        for (got, want) in out.centers.centers().iter().zip([0.0, 10.0]) {
            assert!((got - want).abs() < 1e-4, "{:?}", out.centers);
        }
        for (i, own) in [0, 0, 1, 1].into_iter().enumerate() {
            assert!(out.membership.get(i, own) >= 0.99);
        }
    }

    #[test]
    fn single_cluster() {
        let data = [1.0, 2.0, 4.0, 9.0];
        let out = fcm(&data, 1, &FcmConfig::default(), FcmInit::Random(3)).unwrap();
        assert!(out.membership.as_slice().iter().all(|&v| v == 1.0));
        assert!((out.centers.centers()[0] - 4.0).abs() < 1e-12);
    }

    /// Independent membership/center loop written without any of the module's helpers.
    fn reference_fcm(data: &[f64], init: &[f64], m: f64, eps: f64, iters: usize) -> Vec<usize> {
        let c = init.len();
        let memb = |centers: &[f64]| -> Vec<Vec<f64>> {
            data.iter()
                .map(|&x| {
                    let d: Vec<f64> = centers.iter().map(|&cj| (x - cj).abs()).collect();
                    if let Some(z) = d.iter().position(|&v| v == 0.0) {
                        let mut r = vec![0.0; c];
                        r[z] = 1.0;
                        return r;
                    }
                    (0..c)
                        .map(|j| {
                            1.0 / (0..c)
                                .map(|k| (d[j] / d[k]).powf(2.0 / (m - 1.0)))
                                .sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        };
        let mut u = memb(init);
        for _ in 0..iters {
            let centers: Vec<f64> = (0..c)
                .map(|j| {
                    let w: Vec<f64> = u.iter().map(|r| r[j].powf(m)).collect();
                    w.iter().zip(data).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
                })
                .collect();
            let next = memb(&centers);
            let delta = next
                .iter()
                .flatten()
                .zip(u.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            u = next;
            if delta < eps {
                break;
            }
        }
        // label by center order
        u.iter()
            .map(|r| {
                let mut b = 0;
                for j in 1..c {
                    if r[j] > r[b] {
                        b = j;
                    }
                }
                b
            })
            .collect()
    }

    #[test]
    fn two_level_image_with_outlier_matches_reference() {
        let mut img = vec![20.0; 16];
        for v in img.iter_mut().skip(8) {
            *v = 200.0;
        }
        img[3] = 255.0; // outlier inside the dark half
        let init = [50.0, 150.0];
        let want = reference_fcm(&img, &init, 2.0, 0.01, 150);
        let out = fcm(
            &img,
            2,
            &FcmConfig::default(),
            FcmInit::Centers(ClusterSet::new(init.to_vec()).unwrap()),
        )
        .unwrap();
        assert_eq!(out.membership.labels(), want);
        assert_eq!(want[3], 1);
    }

    #[test]
    fn near_hard_limit_for_small_m() {
        let data: Vec<f64> = (0..40)
            .map(|i| {
                if i < 20 {
                    10.0 + (i % 3) as f64
                } else {
                    200.0 - (i % 4) as f64
                }
            })
            .collect();
        let cfg = FcmConfig {
            m: 1.01,
            ..FcmConfig::default()
        };
        let out = fcm(&data, 2, &cfg, FcmInit::Random(8)).unwrap();
        for row in out.membership.rows() {
            assert!(row.iter().cloned().fold(0.0, f64::max) >= 0.999);
        }
    }

    #[test]
    fn canonicalization_ignores_input_order() {
        let data = [1.0, 1.2, 5.0, 5.3, 9.0, 9.1, 0.9, 5.1];
        let init_a = ClusterSet::new(vec![0.0, 4.0, 8.0]).unwrap();
        let init_b = ClusterSet::new(vec![8.0, 0.0, 4.0]).unwrap();
        let a = fcm(&data, 3, &FcmConfig::default(), FcmInit::Centers(init_a)).unwrap();
        let b = fcm(&data, 3, &FcmConfig::default(), FcmInit::Centers(init_b)).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.membership, b.membership);
        let mut rev = data;
        rev.reverse();
        let r = fcm(
            &rev,
            3,
            &FcmConfig::default(),
            FcmInit::Centers(ClusterSet::new(vec![0.0, 4.0, 8.0]).unwrap()),
        )
        .unwrap();
        assert!(r.centers.centers().windows(2).all(|w| w[0] < w[1]));
        let mut lr = r.membership.labels();
        lr.reverse();
        assert_eq!(lr, a.membership.labels());
    }

    #[test]
    fn descent_over_fifty_seeds() {
        for seed in 0..50u64 {
            let mut s = seed + 1;
            let n = 60;
            let data: Vec<f64> = (0..n)
                .map(|i| 40.0 * (i % 3) as f64 + 15.0 * lcg(&mut s))
                .collect();
            let cfg = FcmConfig {
                epsilon: 1e-6,
                ..FcmConfig::default()
            };
            let out = fcm(&data, 3, &cfg, FcmInit::Random(seed)).unwrap();
            for w in out.cost_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "seed {seed}: {:?}", w);
            }
            out.membership.check_invariants(ROW_SUM_TOL).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        assert!(FcmConfig {
            m: 1.0,
            ..FcmConfig::default()
        }
        .validate()
        .is_err());
        assert!(FcmConfig {
            epsilon: 0.0,
            ..FcmConfig::default()
        }
        .validate()
        .is_err());
        assert!(FcmConfig {
            max_iterations: 0,
            ..FcmConfig::default()
        }
        .validate()
        .is_err());
        assert!(fcm(&[1.0], 2, &FcmConfig::default(), FcmInit::Random(0)).is_err());
    }

    proptest! {
        #[test]
        fn updated_rows_are_partitions(d2 in prop::collection::vec(0.0f64..1e4, 1..12), m in 1.05f64..4.0) {
            let c = d2.len();
            let u = update_membership(&SquaredDistances::new(1, c, d2).unwrap(), m);
            let s: f64 = u.row(0).iter().sum();
            prop_assert!((s - 1.0).abs() <= ROW_SUM_TOL);
            prop_assert!(u.row(0).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
