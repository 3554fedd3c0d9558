//! Multi-threaded k-means used to initialise the mixture.
//!
//! This is hard-assignment EM: each sample belongs wholly to its closest
//! mean and each mean becomes the average of its members. Distances are
//! either squared Euclidean or squared Mahalanobis against a global diagonal
//! covariance estimated from the whole dataset, which keeps one wide-ranged
//! dimension from swamping the others.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GmmError, Result};
use crate::model::Dataset;
use crate::parallel::Workers;

/// Smallest value a global variance may take; keeps its reciprocal finite.
pub const GLOBAL_VAR_FLOOR: f64 = 1e-300;

/// Distance metric requested in a fit configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistKind {
    Eucl,
    #[default]
    Maha,
}

/// A resolved distance metric.
#[derive(Debug, Clone, PartialEq)]
pub enum DistMode {
    EuclSq,
    /// Squared Mahalanobis distance with a diagonal covariance, given as reciprocals.
    MahaDiag(Vec<f64>),
}

impl DistMode {
    /// Resolves `kind` against `data`, estimating the global covariance if needed.
    pub fn for_data(kind: DistKind, data: &Dataset) -> Result<Self> {
        match kind {
            DistKind::Eucl => Ok(DistMode::EuclSq),
            DistKind::Maha => {
                let var = global_diag_cov(data)?;
                Ok(DistMode::MahaDiag(var.iter().map(|v| 1.0 / v).collect()))
            }
        }
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(GmmError::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        if let DistMode::MahaDiag(inv) = self {
            if inv.len() != a.len() {
                return Err(GmmError::DimensionMismatch {
                    expected: inv.len(),
                    found: a.len(),
                });
            }
        }
        Ok(self.dist_raw(a, b))
    }

    #[inline]
    pub(crate) fn dist_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistMode::EuclSq => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = x - y;
                    d * d
                })
                .sum(),
            DistMode::MahaDiag(inv) => a
                .iter()
                .zip(b)
                .zip(inv)
                .map(|((x, y), w)| {
                    let d = x - y;
                    d * d * w
                })
                .sum(),
        }
    }

    /// Index and distance of the closest of `means`, ties to the lowest index.
    #[inline]
    pub(crate) fn closest(&self, x: &[f64], means: &[f64], n_dims: usize) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (g, mean) in means.chunks_exact(n_dims).enumerate() {
            let d = self.dist_raw(x, mean);
            if d < best.1 {
                best = (g, d);
            }
        }
        best
    }
}

/// Per-dimension population variance over all samples, floored at
/// [`GLOBAL_VAR_FLOOR`].
pub fn global_diag_cov(data: &Dataset) -> Result<Vec<f64>> {
    let n = data.n_samples();
    if n < 2 {
        return Err(GmmError::invalid("global covariance needs at least 2 samples"));
    }
    let d = data.n_dims();
    let mut mean = vec![0.0; d];
    for x in data.samples() {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for x in data.samples() {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            let c = v - m;
            *s += c * c;
        }
    }
    Ok(var
        .into_iter()
        .map(|s| (s / n as f64).max(GLOBAL_VAR_FLOOR))
        .collect())
}

/// How the initial means are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedMode {
    /// Leave an existing model untouched.
    KeepExisting,
    /// Evenly spaced sample indices.
    StaticSubset,
    /// Uniformly drawn distinct samples.
    #[default]
    RandomSubset,
    /// Greedy farthest-point selection starting at sample 0.
    StaticSpread,
    /// k-means++ style draws proportional to squared distance.
    RandomSpread,
}

/// Picks `n_gaus` distinct sample indices to serve as initial means.
pub fn seed_indices(
    data: &Dataset,
    n_gaus: usize,
    mode: SeedMode,
    dist: &DistMode,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    let n = data.n_samples();
    if n_gaus == 0 {
        return Err(GmmError::invalid("n_gaus must be at least 1"));
    }
    if n < n_gaus {
        return Err(GmmError::InsufficientSamples {
            n_samples: n,
            n_gaus,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match mode {
        SeedMode::KeepExisting => Err(GmmError::invalid(
            "keep-existing seeding does not choose new means",
        )),
        SeedMode::StaticSubset => Ok((0..n_gaus).map(|g| g * n / n_gaus).collect()),
        SeedMode::RandomSubset => Ok(index::sample(&mut rng, n, n_gaus).into_vec()),
        SeedMode::StaticSpread => Ok(spread(data, n_gaus, dist, 0, |min_d, chosen| {
            // farthest unchosen sample, ties to the lowest index
            let mut best: Option<(usize, f64)> = None;
            for (i, &d) in min_d.iter().enumerate() {
                if !chosen[i] && best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
            best.map(|(i, _)| i).unwrap()
        })),
        SeedMode::RandomSpread => {
            let first = rng.random_range(0..n);
            Ok(spread(data, n_gaus, dist, first, |min_d, chosen| {
                let total: f64 = min_d.iter().sum();
                if total > 0.0 && total.is_finite() {
                    let target = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut last = None;
                    for (i, &d) in min_d.iter().enumerate() {
                        if d > 0.0 {
                            acc += d;
                            last = Some(i);
                            if acc > target {
                                return i;
                            }
                        }
                    }
                    if let Some(i) = last {
                        return i;
                    }
                }
                // every remaining sample coincides with a chosen one
                let free: Vec<usize> = (0..chosen.len()).filter(|&i| !chosen[i]).collect();
                free[rng.random_range(0..free.len())]
            }))
        }
    }
}

/// Shared loop of the spread modes: keeps each sample's distance to its
/// closest chosen seed and asks `pick` for the next seed.
fn spread(
    data: &Dataset,
    n_gaus: usize,
    dist: &DistMode,
    first: usize,
    mut pick: impl FnMut(&[f64], &[bool]) -> usize,
) -> Vec<usize> {
    let n = data.n_samples();
    let mut chosen = vec![false; n];
    let mut seeds = vec![first];
    chosen[first] = true;
    let mut min_d: Vec<f64> = data
        .samples()
        .map(|x| dist.dist_raw(x, data.sample(first)))
        .collect();
    min_d[first] = 0.0;
    while seeds.len() < n_gaus {
        let next = pick(&min_d, &chosen);
        chosen[next] = true;
        seeds.push(next);
        let centre = data.sample(next);
        for (i, x) in data.samples().enumerate() {
            let d = if chosen[i] { 0.0 } else { dist.dist_raw(x, centre) };
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    seeds
}

/// Copies the samples at `indices` into a flat, component-major mean buffer.
pub fn means_from_indices(data: &Dataset, indices: &[usize]) -> Vec<f64> {
    indices.iter().flat_map(|&i| data.sample(i).iter().copied()).collect()
}

pub fn seed_means(
    data: &Dataset,
    n_gaus: usize,
    mode: SeedMode,
    dist: &DistMode,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    let idx = seed_indices(data, n_gaus, mode, dist, rng_seed)?;
    Ok(means_from_indices(data, &idx))
}

/// Means, member counts and hard assignments during k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct KmState {
    pub n_dims: usize,
    /// Flat, component-major.
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    pub assignment: Vec<usize>,
}

impl KmState {
    /// A state with `means` and no assignment yet.
    pub fn new(means: Vec<f64>, n_dims: usize, n_samples: usize) -> Result<Self> {
        if n_dims == 0 || means.is_empty() || means.len() % n_dims != 0 {
            return Err(GmmError::invalid("means buffer does not match the dimensionality"));
        }
        let n_gaus = means.len() / n_dims;
        let mut counts = vec![0; n_gaus];
        counts[0] = n_samples;
        Ok(KmState {
            n_dims,
            means,
            counts,
            assignment: vec![0; n_samples],
        })
    }

    pub fn n_gaus(&self) -> usize {
        self.means.len() / self.n_dims
    }

    pub fn mean(&self, g: usize) -> &[f64] {
        &self.means[g * self.n_dims..(g + 1) * self.n_dims]
    }
}

struct KmBlock {
    assignment: Vec<usize>,
    sums: Vec<f64>,
    counts: Vec<usize>,
    objective: f64,
}

/// One k-means pass: assign every sample to its closest mean, then move each
/// non-empty cluster's mean to its members' average. Empty clusters keep
/// their previous mean. Returns the new state and the total distance of
/// samples to the means they were assigned against.
pub fn kmeans_iterate(
    data: &Dataset,
    state: &KmState,
    dist: &DistMode,
    workers: &Workers,
) -> Result<(KmState, f64)> {
    check_state(data, state)?;
    let (d, k) = (state.n_dims, state.n_gaus());
    let blocks = workers.map_blocks(data.n_samples(), |r| {
        let mut blk = KmBlock {
            assignment: Vec::with_capacity(r.len()),
            sums: vec![0.0; k * d],
            counts: vec![0; k],
            objective: 0.0,
        };
        for i in r {
            let x = data.sample(i);
            let (g, dg) = dist.closest(x, &state.means, d);
            blk.assignment.push(g);
            blk.counts[g] += 1;
            blk.objective += dg;
            blk.sums[g * d..(g + 1) * d]
                .iter_mut()
                .zip(x)
                .for_each(|(s, v)| *s += v);
        }
        blk
    });

    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    let mut objective = 0.0;
    let mut assignment = Vec::with_capacity(data.n_samples());
    for blk in blocks {
        sums.iter_mut().zip(&blk.sums).for_each(|(s, b)| *s += b);
        counts.iter_mut().zip(&blk.counts).for_each(|(c, b)| *c += b);
        objective += blk.objective;
        assignment.extend(blk.assignment);
    }
    let mut means = state.means.clone();
    for g in 0..k {
        if counts[g] > 0 {
            let n = counts[g] as f64;
            means[g * d..(g + 1) * d]
                .iter_mut()
                .zip(&sums[g * d..(g + 1) * d])
                .for_each(|(m, s)| *m = s / n);
        }
    }
    Ok((
        KmState {
            n_dims: d,
            means,
            counts,
            assignment,
        },
        objective,
    ))
}

/// Revives every mean with no members. In ascending index order, each dead
/// mean is moved onto the member of the currently most popular mean that lies
/// farthest from it (ties to the lowest sample index), and that sample is
/// reassigned. Returns how many means were revived.
pub fn resurrect_dead_means(data: &Dataset, state: &mut KmState, dist: &DistMode) -> Result<usize> {
    check_state(data, state)?;
    let d = state.n_dims;
    let mut revived = 0;
    for dead in 0..state.n_gaus() {
        if state.counts[dead] > 0 {
            continue;
        }
        // most members, ties to the lowest index
        let popular = (0..state.n_gaus())
            .fold(0, |best, g| if state.counts[g] > state.counts[best] { g } else { best });
        if state.counts[popular] == 0 {
            return Err(GmmError::invalid("no mean has any members"));
        }
        let centre = state.mean(popular);
        let mut donor: Option<(usize, f64)> = None;
        for (i, &a) in state.assignment.iter().enumerate() {
            if a == popular {
                let dist_i = dist.dist_raw(data.sample(i), centre);
                if donor.is_none_or(|(_, bd)| dist_i > bd) {
                    donor = Some((i, dist_i));
                }
            }
        }
        let (donor, _) = donor.expect("popular mean has members");
        state.means[dead * d..(dead + 1) * d].copy_from_slice(data.sample(donor));
        state.assignment[donor] = dead;
        state.counts[popular] -= 1;
        state.counts[dead] += 1;
        revived += 1;
    }
    Ok(revived)
}

fn check_state(data: &Dataset, state: &KmState) -> Result<()> {
    if state.n_dims != data.n_dims() {
        return Err(GmmError::DimensionMismatch {
            expected: state.n_dims,
            found: data.n_dims(),
        });
    }
    if state.assignment.len() != data.n_samples() {
        return Err(GmmError::invalid("assignment length differs from the sample count"));
    }
    Ok(())
}

/// Outcome of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KmResult {
    pub state: KmState,
    /// Total distance of samples to their assigned means, one entry per pass.
    pub objective: Vec<f64>,
    /// Passes after which at least one dead mean was revived.
    pub resurrections: Vec<usize>,
    pub iterations: usize,
    /// True when a pass left every assignment unchanged.
    pub converged: bool,
}

/// Runs up to `km_iter` passes from `initial_means`, reviving dead means
/// after each pass and stopping early once assignments settle.
/// `on_iter(iteration, objective)` is called after each pass.
pub fn run_kmeans_from(
    data: &Dataset,
    initial_means: Vec<f64>,
    dist: &DistMode,
    km_iter: usize,
    workers: &Workers,
    mut on_iter: impl FnMut(usize, f64),
) -> Result<KmResult> {
    if initial_means.len() % data.n_dims() != 0 || initial_means.is_empty() {
        return Err(GmmError::DimensionMismatch {
            expected: data.n_dims(),
            found: initial_means.len(),
        });
    }
    let mut state = KmState::new(initial_means, data.n_dims(), data.n_samples())?;
    let mut result = KmResult {
        state: state.clone(),
        objective: Vec::new(),
        resurrections: Vec::new(),
        iterations: 0,
        converged: false,
    };
    for it in 0..km_iter {
        let (mut next, objective) = kmeans_iterate(data, &state, dist, workers)?;
        if resurrect_dead_means(data, &mut next, dist)? > 0 {
            result.resurrections.push(it);
        }
        result.objective.push(objective);
        result.iterations = it + 1;
        on_iter(it, objective);
        let settled = it > 0 && next.assignment == state.assignment;
        state = next;
        if settled {
            result.converged = true;
            break;
        }
    }
    result.state = state;
    Ok(result)
}
