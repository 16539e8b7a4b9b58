//! Neighborhood-attraction distances.
//!
//! The squared distance of voxel `i` to cluster `j` is scaled by
//! `max(1 - lambda * H_ij - xi * F_ij, EPS_FACTOR)`, where `H` (feature
//! attraction) averages neighbor memberships weighted by intensity difference
//! and `F` (neighborhood attraction) averages squared neighbor memberships
//! weighted by squared relative location. Neighbors come in shells of
//! increasing squared radius; each shell's averages are blended with the
//! shell weights. The planar neighborhood is the single-shell case.
//!
//! An [`AttractionDomain`] holds the support grid the attractions read from
//! (a slice, or a slab of neighboring slices around it) and marks which rows
//! form the plane being segmented.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fuzzy::{
    canonical_order, membership_row, pow_m, weighted_means, ClusterSet, FcmConfig,
    MembershipMatrix, SquaredDistances,
};
use crate::volume::{Dims, SliceRef, Volume};

/// Floor applied to the attraction factor so distances stay non-negative.
pub const EPS_FACTOR: f64 = 1e-6;

pub const MIN_DEPTH: usize = 2;
pub const MAX_DEPTH: usize = 5;
pub const MIN_DECAY: f64 = 0.01;
pub const MAX_DECAY: f64 = 100.0;

/// Inclusive squared-radius bands of the volumetric shells.
const SHELL_BANDS: [(i32, i32); MAX_DEPTH] = [(1, 1), (2, 2), (3, 3), (4, 5), (6, 8)];

/// Parameters of the attraction distance and its neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractionParams {
    /// Feature-attraction strength, in `[0, 1]`.
    pub lambda: f64,
    /// Neighborhood-attraction strength, in `[0, 1]`.
    pub xi: f64,
    /// Planar neighborhood level `L`: offsets with `0 < dx² + dy² < 2^(L-1)`.
    pub level: u32,
    /// Number of volumetric shells `v`.
    pub depth: usize,
    /// Exponential decay `h` of the shell weights.
    pub decay: f64,
}

impl Default for AttractionParams {
    fn default() -> Self {
        AttractionParams {
            lambda: 0.0,
            xi: 0.0,
            level: 2,
            depth: 3,
            decay: 0.2,
        }
    }
}

impl AttractionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("xi", self.xi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if self.level < 2 || self.level > 16 {
            return Err(Error::validation(format!(
                "neighborhood level must be in [2, 16], got {}",
                self.level
            )));
        }
        if !(MIN_DEPTH..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::validation(format!(
                "depth v must be in [{MIN_DEPTH}, {MAX_DEPTH}], got {}",
                self.depth
            )));
        }
        if !(MIN_DECAY..=MAX_DECAY).contains(&self.decay) {
            return Err(Error::validation(format!(
                "decay h must be in [{MIN_DECAY}, {MAX_DECAY}], got {}",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn with_strengths(self, lambda: f64, xi: f64) -> Self {
        AttractionParams { lambda, xi, ..self }
    }
}

pub type Offset = [i32; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub offsets: Vec<Offset>,
    /// Inclusive squared-radius band.
    pub min_sq: i32,
    pub max_sq: i32,
}

/// Volumetric neighbor offsets grouped into shells of increasing radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellTable {
    shells: Vec<Shell>,
}

impl ShellTable {
    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn depth(&self) -> usize {
        self.shells.len()
    }

    /// Running neighbor count after each shell.
    pub fn cumulative_counts(&self) -> Vec<usize> {
        self.shells
            .iter()
            .scan(0, |acc, s| {
                *acc += s.offsets.len();
                Some(*acc)
            })
            .collect()
    }
}

pub fn build_shell_table(v: usize) -> Result<ShellTable> {
    if !(MIN_DEPTH..=MAX_DEPTH).contains(&v) {
        return Err(Error::validation(format!(
            "depth v must be in [{MIN_DEPTH}, {MAX_DEPTH}], got {v}"
        )));
    }
    let reach = 2;
    let shells = SHELL_BANDS[..v]
        .iter()
        .map(|&(lo, hi)| {
            let mut offsets = Vec::new();
            for dz in -reach..=reach {
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let q = dx * dx + dy * dy + dz * dz;
                        if (lo..=hi).contains(&q) {
                            offsets.push([dx, dy, dz]);
                        }
                    }
                }
            }
            Shell {
                offsets,
                min_sq: lo,
                max_sq: hi,
            }
        })
        .collect();
    Ok(ShellTable { shells })
}

/// Shell weights, positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `w_i = exp(-i/h) / sum_r exp(-r/h)` for `i = 1..=v`.
pub fn decay_weights(h: f64, v: usize) -> Result<WeightVector> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::validation(format!("decay h must be > 0, got {h}")));
    }
    if v == 0 {
        return Err(Error::validation("weight vector needs v >= 1"));
    }
    // shifted by exp(1/h) so small h cannot underflow the leading term
    let raw: Vec<f64> = (0..v).map(|r| (-(r as f64) / h).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(WeightVector(raw.into_iter().map(|w| w / total).collect()))
}

/// Planar offsets with `0 < dx² + dy² < 2^(level-1)`.
pub fn neighborhood_2d(level: u32) -> Vec<[i32; 2]> {
    let bound = 1i64 << level.saturating_sub(1).min(40);
    let reach = (bound as f64).sqrt().ceil() as i32;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let q = i64::from(dx * dx + dy * dy);
            if q > 0 && q < bound {
                out.push([dx, dy]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Link {
    d: Offset,
    shell: usize,
    q2: f64,
}

/// Offsets with their shell assignment and per-shell weights.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    links: Vec<Link>,
    weights: Vec<f64>,
    reach: [i32; 3],
}

impl Neighborhood {
    fn from_shells(shells: Vec<Vec<Offset>>, weights: Vec<f64>) -> Self {
        let mut links = Vec::new();
        let mut reach = [0; 3];
        for (r, offs) in shells.iter().enumerate() {
            for &d in offs {
                let q = f64::from(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
                for a in 0..3 {
                    reach[a] = reach[a].max(d[a].abs());
                }
                links.push(Link {
                    d,
                    shell: r,
                    q2: q * q,
                });
            }
        }
        Neighborhood {
            links,
            weights,
            reach,
        }
    }

    /// Single in-plane shell of weight one.
    pub fn planar(level: u32) -> Self {
        let offs = neighborhood_2d(level)
            .into_iter()
            .map(|[dx, dy]| [dx, dy, 0])
            .collect();
        Neighborhood::from_shells(vec![offs], vec![1.0])
    }

    pub fn volumetric(table: &ShellTable, weights: &WeightVector) -> Result<Self> {
        if table.depth() != weights.len() {
            return Err(Error::validation(format!(
                "{} shells but {} weights",
                table.depth(),
                weights.len()
            )));
        }
        let shells = table.shells.iter().map(|s| s.offsets.clone()).collect();
        Ok(Neighborhood::from_shells(shells, weights.0.clone()))
    }

    pub fn num_shells(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Largest |offset| along each axis.
    pub fn reach(&self) -> [i32; 3] {
        self.reach
    }
}

/// Support grid, intensities and neighborhood that attraction terms are read from.
#[derive(Debug, Clone)]
pub struct AttractionDomain {
    dims: Dims,
    intensities: Vec<f64>,
    target: Range<usize>,
    /// Grid shape reported for target-plane outputs.
    target_dims: Dims,
    hood: Neighborhood,
    order: UpdateOrder,
    /// Support rows grouped so no two rows of a group are neighbors.
    colors: Vec<Vec<usize>>,
}

/// How one step sweeps the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    /// Every row from the previous memberships at once. Strong attraction
    /// can make this oscillate with period two on bipartite neighborhoods.
    Simultaneous,
    /// Rows in groups of mutually non-adjacent voxels, each group seeing the
    /// groups updated before it.
    #[default]
    Colored,
}

/// Groups rows by coordinates modulo `reach + 1` per axis.
fn color_groups(dims: Dims, reach: [i32; 3]) -> Vec<Vec<usize>> {
    let period = reach.map(|r| r as usize + 1);
    let mut groups = vec![Vec::new(); period[0] * period[1] * period[2]];
    for i in 0..dims.len() {
        let (x, y, z) = dims.coords(i);
        let k = x % period[0] + period[0] * (y % period[1] + period[1] * (z % period[2]));
        groups[k].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Scratch buffers for one voxel's accumulation.
struct Scratch {
    acc_h: Vec<f64>,
    acc_f: Vec<f64>,
    sum_g: Vec<f64>,
    sum_q2: Vec<f64>,
    seen: Vec<bool>,
    h: Vec<f64>,
    f: Vec<f64>,
}

impl Scratch {
    fn new(shells: usize, c: usize) -> Self {
        Scratch {
            acc_h: vec![0.0; shells * c],
            acc_f: vec![0.0; shells * c],
            sum_g: vec![0.0; shells],
            sum_q2: vec![0.0; shells],
            seen: vec![false; shells],
            h: vec![0.0; c],
            f: vec![0.0; c],
        }
    }
}

fn planar_dims(d: Dims) -> Result<Dims> {
    match d.as_array() {
        [a, b, 1] | [a, 1, b] | [1, a, b] => Dims::new(a, b, 1),
        _ => Err(Error::validation(format!(
            "expected a single slice, got dims {d}"
        ))),
    }
}

impl AttractionDomain {
    pub fn new(
        dims: Dims,
        intensities: Vec<f64>,
        target: Range<usize>,
        hood: Neighborhood,
    ) -> Result<Self> {
        if intensities.len() != dims.len() {
            return Err(Error::validation(
                "intensity count does not match support dims",
            ));
        }
        if target.start >= target.end || target.end > dims.len() {
            return Err(Error::validation(format!(
                "target rows {target:?} outside support of {} voxels",
                dims.len()
            )));
        }
        let target_dims = if target.len() == dims.len() {
            dims
        } else {
            Dims::new(dims.nx, dims.ny, 1)?
        };
        if target_dims.len() != target.len() {
            return Err(Error::validation(
                "target rows do not form a plane of the support",
            ));
        }
        let colors = color_groups(dims, hood.reach);
        Ok(AttractionDomain {
            dims,
            intensities,
            target,
            target_dims,
            hood,
            order: UpdateOrder::default(),
            colors,
        })
    }

    /// A single slice with the planar neighborhood of the given level.
    pub fn planar(img: &Volume, level: u32) -> Result<Self> {
        let dims = planar_dims(img.dims())?;
        let n = dims.len();
        let mut d = AttractionDomain::new(dims, img.to_f64(), 0..n, Neighborhood::planar(level))?;
        d.target_dims = img.dims();
        Ok(d)
    }

    /// Every voxel of `vol` is both support and target.
    pub fn whole(vol: &Volume, hood: Neighborhood) -> Result<Self> {
        let n = vol.len();
        AttractionDomain::new(vol.dims(), vol.to_f64(), 0..n, hood)
    }

    /// The slice `slice` of `vol` as target, with enough neighboring slices
    /// on each side (clipped at the volume boundary) to cover every shell.
    ///
    /// The slab is reoriented so the slicing axis is the third grid axis;
    /// target rows keep the order of [`crate::volume::extract_slice`].
    pub fn volumetric(vol: &Volume, slice: SliceRef, hood: Neighborhood) -> Result<Self> {
        let vd = vol.dims();
        slice.check(vd)?;
        let reach = hood.reach().into_iter().max().unwrap_or(0) as usize;
        let extent = vd.extent(slice.axis);
        let lo = slice.index.saturating_sub(reach);
        let hi = (slice.index + reach).min(extent - 1);
        let plane = planar_dims(vd.sliced(slice.axis))?;
        let dims = Dims::new(plane.nx, plane.ny, hi - lo + 1)?;
        let mut intensities = Vec::with_capacity(dims.len());
        let data = vol.data();
        for s in lo..=hi {
            for i in SliceRef::new(slice.axis, s).plane_indices(vd) {
                intensities.push(f64::from(data[i]));
            }
        }
        let per_plane = plane.len();
        let t = slice.index - lo;
        let mut d =
            AttractionDomain::new(dims, intensities, t * per_plane..(t + 1) * per_plane, hood)?;
        d.target_dims = vd.sliced(slice.axis);
        Ok(d)
    }

    pub fn with_order(mut self, order: UpdateOrder) -> Self {
        self.order = order;
        self
    }

    pub fn order(&self) -> UpdateOrder {
        self.order
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn support_len(&self) -> usize {
        self.intensities.len()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn target(&self) -> Range<usize> {
        self.target.clone()
    }

    /// Shape of the target plane as the source volume orients it.
    pub fn target_dims(&self) -> Dims {
        self.target_dims
    }

    pub fn target_len(&self) -> usize {
        self.target.len()
    }

    pub fn target_intensities(&self) -> &[f64] {
        &self.intensities[self.target.clone()]
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.hood
    }

    fn check_state(&self, u: &MembershipMatrix, centers: &ClusterSet) -> Result<()> {
        if u.n() != self.support_len() {
            return Err(Error::validation(format!(
                "membership has {} rows, support has {} voxels",
                u.n(),
                self.support_len()
            )));
        }
        if u.c() != centers.len() {
            return Err(Error::validation(format!(
                "membership has {} columns for {} centers",
                u.c(),
                centers.len()
            )));
        }
        Ok(())
    }

    /// Fills `s.h` / `s.f` with the attractions of voxel `i` to every cluster.
    fn accumulate(&self, i: usize, u: &[f64], c: usize, s: &mut Scratch) {
        let shells = self.hood.num_shells();
        s.acc_h.fill(0.0);
        s.acc_f.fill(0.0);
        s.sum_g.fill(0.0);
        s.sum_q2.fill(0.0);
        s.seen.fill(false);

        let d = self.dims;
        let (x, y, z) = d.coords(i);
        let (x, y, z) = (x as i64, y as i64, z as i64);
        let xi = self.intensities[i];
        for link in &self.hood.links {
            let kx = x + i64::from(link.d[0]);
            let ky = y + i64::from(link.d[1]);
            let kz = z + i64::from(link.d[2]);
            if kx < 0
                || ky < 0
                || kz < 0
                || kx >= d.nx as i64
                || ky >= d.ny as i64
                || kz >= d.nz as i64
            {
                continue;
            }
            let k = d.index(kx as usize, ky as usize, kz as usize);
            let g = (xi - self.intensities[k]).abs();
            let r = link.shell;
            s.seen[r] = true;
            s.sum_g[r] += g;
            s.sum_q2[r] += link.q2;
            let uk = &u[k * c..(k + 1) * c];
            let ah = &mut s.acc_h[r * c..(r + 1) * c];
            let af = &mut s.acc_f[r * c..(r + 1) * c];
            for j in 0..c {
                ah[j] += uk[j] * g;
                af[j] += uk[j] * uk[j] * link.q2;
            }
        }

        let wsum: f64 = (0..shells)
            .filter(|&r| s.seen[r])
            .map(|r| self.hood.weights[r])
            .sum();
        s.h.fill(0.0);
        s.f.fill(0.0);
        if wsum <= 0.0 {
            return;
        }
        for r in (0..shells).filter(|&r| s.seen[r]) {
            let w = self.hood.weights[r] / wsum;
            if s.sum_g[r] > 0.0 {
                for j in 0..c {
                    s.h[j] += w * s.acc_h[r * c + j] / s.sum_g[r];
                }
            }
            if s.sum_q2[r] > 0.0 {
                for j in 0..c {
                    s.f[j] += w * s.acc_f[r * c + j] / s.sum_q2[r];
                }
            }
        }
        for v in s.h.iter_mut().chain(s.f.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Feature and neighborhood attraction of voxel `i` for every cluster.
    pub fn attractions(&self, i: usize, u: &MembershipMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        if u.n() != self.support_len() {
            return Err(Error::validation("membership does not cover the support"));
        }
        let mut s = Scratch::new(self.hood.num_shells(), u.c());
        self.accumulate(i, u.as_slice(), u.c(), &mut s);
        Ok((s.h, s.f))
    }

    #[allow(clippy::too_many_arguments)]
    fn distance_row(
        &self,
        i: usize,
        u: &[f64],
        centers: &[f64],
        lambda: f64,
        xi: f64,
        s: &mut Scratch,
        out: &mut [f64],
    ) {
        let x = self.intensities[i];
        if lambda == 0.0 && xi == 0.0 {
            for (o, &cj) in out.iter_mut().zip(centers) {
                *o = (x - cj) * (x - cj);
            }
            return;
        }
        let c = centers.len();
        self.accumulate(i, u, c, s);
        for j in 0..c {
            let factor = (1.0 - lambda * s.h[j] - xi * s.f[j]).max(EPS_FACTOR);
            out[j] = (x - centers[j]) * (x - centers[j]) * factor;
        }
    }

    /// Attraction-scaled squared distance of support voxel `i` to cluster `j`.
    pub fn distance(
        &self,
        i: usize,
        j: usize,
        u: &MembershipMatrix,
        centers: &ClusterSet,
        lambda: f64,
        xi: f64,
    ) -> Result<f64> {
        self.check_state(u, centers)?;
        if i >= self.support_len() || j >= centers.len() {
            return Err(Error::validation(format!(
                "voxel {i} / cluster {j} out of range"
            )));
        }
        let mut s = Scratch::new(self.hood.num_shells(), u.c());
        let mut row = vec![0.0; u.c()];
        self.distance_row(
            i,
            u.as_slice(),
            centers.centers(),
            lambda,
            xi,
            &mut s,
            &mut row,
        );
        Ok(row[j])
    }

    /// All support distances at once.
    pub fn distances(
        &self,
        u: &MembershipMatrix,
        centers: &ClusterSet,
        lambda: f64,
        xi: f64,
    ) -> Result<SquaredDistances> {
        self.check_state(u, centers)?;
        let c = centers.len();
        let shells = self.hood.num_shells();
        let mut d2 = vec![0.0; self.support_len() * c];
        d2.par_chunks_mut(c).enumerate().for_each_init(
            || Scratch::new(shells, c),
            |s, (i, out)| self.distance_row(i, u.as_slice(), centers.centers(), lambda, xi, s, out),
        );
        SquaredDistances::new(self.support_len(), c, d2)
    }

    /// Expands memberships of the target rows to the whole support. Rows
    /// outside the target get plain-distance memberships from `centers`.
    pub fn initial_state(
        &self,
        target_u: &MembershipMatrix,
        centers: &ClusterSet,
        m: f64,
    ) -> Result<IfcmState> {
        if target_u.n() != self.target_len() || target_u.c() != centers.len() {
            return Err(Error::validation(
                "initial membership does not match the target plane",
            ));
        }
        let c = centers.len();
        let mut u = vec![0.0; self.support_len() * c];
        u.par_chunks_mut(c).enumerate().for_each(|(i, row)| {
            if self.target.contains(&i) {
                row.copy_from_slice(target_u.row(i - self.target.start));
            } else {
                let x = self.intensities[i];
                let d2: Vec<f64> = centers
                    .centers()
                    .iter()
                    .map(|&cj| (x - cj) * (x - cj))
                    .collect();
                membership_row(&d2, m, row);
            }
        });
        Ok(IfcmState {
            membership: MembershipMatrix::from_raw(self.support_len(), c, u)?,
            centers: centers.clone(),
        })
    }
}

/// Read-only inputs of a single attraction-distance evaluation.
#[derive(Debug, Clone, Copy)]
pub struct AttractionContext<'a> {
    pub domain: &'a AttractionDomain,
    pub membership: &'a MembershipMatrix,
    pub centers: &'a ClusterSet,
    pub lambda: f64,
    pub xi: f64,
}

/// Planar attraction distance of pixel `i` to cluster `j`.
pub fn attraction_distance_2d(i: usize, j: usize, ctx: &AttractionContext<'_>) -> Result<f64> {
    if ctx.domain.hood.num_shells() != 1 || ctx.domain.hood.reach[2] != 0 {
        return Err(Error::validation(
            "planar distance needs a planar neighborhood",
        ));
    }
    ctx.domain
        .distance(i, j, ctx.membership, ctx.centers, ctx.lambda, ctx.xi)
}

/// Shell-weighted volumetric attraction distance of voxel `i` to cluster `j`.
pub fn attraction_distance_3d(i: usize, j: usize, ctx: &AttractionContext<'_>) -> Result<f64> {
    ctx.domain
        .distance(i, j, ctx.membership, ctx.centers, ctx.lambda, ctx.xi)
}

/// Memberships over the whole support plus the current centers.
#[derive(Debug, Clone, PartialEq)]
pub struct IfcmState {
    pub membership: MembershipMatrix,
    pub centers: ClusterSet,
}

impl IfcmState {
    pub fn target_membership(&self, domain: &AttractionDomain) -> MembershipMatrix {
        let t = domain.target();
        self.membership.sub_rows(t.start, t.end)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: IfcmState,
    /// Cost of the new memberships under the distances used to compute them,
    /// summed over target rows.
    pub cost: f64,
}

/// One Picard update with attraction distances: memberships of every support
/// voxel from the current state, then centers from the target rows.
pub fn ifcm_step(
    domain: &AttractionDomain,
    lambda: f64,
    xi: f64,
    state: &IfcmState,
    cfg: &FcmConfig,
) -> Result<StepOutcome> {
    domain.check_state(&state.membership, &state.centers)?;
    let c = state.centers.len();
    let m = cfg.m;
    let shells = domain.hood.num_shells();
    let n = domain.support_len();
    let old = state.membership.as_slice();
    let centers = state.centers.centers();

    let mut next = old.to_vec();
    let mut row_cost = vec![0.0; n];
    match domain.order {
        UpdateOrder::Simultaneous => {
            next.par_chunks_mut(c)
                .zip(row_cost.par_iter_mut())
                .enumerate()
                .for_each_init(
                    || (Scratch::new(shells, c), vec![0.0; c]),
                    |(s, d2), (i, (out, cost))| {
                        domain.distance_row(i, old, centers, lambda, xi, s, d2);
                        membership_row(d2, m, out);
                        *cost = row_cost_of(out, d2, m);
                    },
                );
        }
        UpdateOrder::Colored => {
            // rows of one color share no neighbors, so each color is a
            // simultaneous update that reads the freshest memberships
            for group in &domain.colors {
                let mut fresh = vec![0.0; group.len() * c];
                let mut costs = vec![0.0; group.len()];
                let current = &next;
                fresh
                    .par_chunks_mut(c)
                    .zip(costs.par_iter_mut())
                    .zip(group.par_iter())
                    .for_each_init(
                        || (Scratch::new(shells, c), vec![0.0; c]),
                        |(s, d2), ((out, cost), &i)| {
                            domain.distance_row(i, current, centers, lambda, xi, s, d2);
                            membership_row(d2, m, out);
                            *cost = row_cost_of(out, d2, m);
                        },
                    );
                for ((&i, row), cost) in group.iter().zip(fresh.chunks_exact(c)).zip(costs) {
                    next[i * c..(i + 1) * c].copy_from_slice(row);
                    row_cost[i] = cost;
                }
            }
        }
    }
    let cost: f64 = row_cost[domain.target()].iter().sum();

    let t = domain.target();
    let raw = weighted_means(
        &next[t.start * c..t.end * c],
        c,
        domain.target_intensities(),
        m,
    )?;
    let perm = canonical_order(&raw);
    let mut membership = MembershipMatrix::from_raw(n, c, next)?;
    membership.permute_columns(&perm);
    Ok(StepOutcome {
        state: IfcmState {
            membership,
            centers: ClusterSet::from_sorted(perm.iter().map(|&p| raw[p]).collect()),
        },
        cost,
    })
}

fn row_cost_of(u: &[f64], d2: &[f64], m: f64) -> f64 {
    u.iter().zip(d2).map(|(&v, &d)| pow_m(v, m) * d).sum()
}

/// Slab domain for a volumetric run with `depth` shells weighted by `decay`.
pub fn volumetric_domain(
    vol: &Volume,
    slice: SliceRef,
    depth: usize,
    decay: f64,
) -> Result<AttractionDomain> {
    let table = build_shell_table(depth)?;
    let w = decay_weights(decay, depth)?;
    AttractionDomain::volumetric(vol, slice, Neighborhood::volumetric(&table, &w)?)
}
