//! Hard assignment, histograms and sampling for a fitted model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GmmError, Result};
use crate::kmeans::DistMode;
use crate::likelihood::log_gauss_raw;
use crate::model::{Dataset, GmmModel};
use crate::parallel::{default_threads, Workers};

/// How [`GmmModel::assign`] measures closeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    /// Squared Euclidean distance to the means only.
    EuclDist,
    /// Highest `ln w_g + ln N(x | g)`, i.e. lowest inverse likelihood.
    ProbDist,
}

impl GmmModel {
    #[inline]
    fn assign_raw(&self, x: &[f64], mode: AssignMode) -> usize {
        match mode {
            AssignMode::EuclDist => DistMode::EuclSq.closest(x, self.means(), self.n_dims()).0,
            AssignMode::ProbDist => {
                let mut best = (0, f64::NEG_INFINITY);
                for (g, &lw) in self.log_hefts().iter().enumerate() {
                    let score = lw + log_gauss_raw(x, self.mean(g), self.consts(g));
                    if score > best.1 {
                        best = (g, score);
                    }
                }
                best.0
            }
        }
    }

    /// Index of the closest gaussian to `x`; ties go to the lowest index.
    pub fn assign(&self, x: &[f64], mode: AssignMode) -> Result<usize> {
        if x.len() != self.n_dims() {
            return Err(GmmError::DimensionMismatch {
                expected: self.n_dims(),
                found: x.len(),
            });
        }
        Ok(self.assign_raw(x, mode))
    }

    pub fn assign_batch(&self, data: &Dataset, mode: AssignMode) -> Result<Vec<usize>> {
        self.assign_batch_with(data, mode, &Workers::new(default_threads())?)
    }

    pub fn assign_batch_with(&self, data: &Dataset, mode: AssignMode, workers: &Workers) -> Result<Vec<usize>> {
        if data.n_dims() != self.n_dims() {
            return Err(GmmError::DimensionMismatch {
                expected: self.n_dims(),
                found: data.n_dims(),
            });
        }
        Ok(workers
            .map_blocks(data.n_samples(), |r| {
                r.map(|i| self.assign_raw(data.sample(i), mode)).collect::<Vec<_>>()
            })
            .concat())
    }

    /// Number of samples assigned to each gaussian.
    pub fn raw_hist(&self, data: &Dataset, mode: AssignMode) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.n_gaus()];
        for g in self.assign_batch(data, mode)? {
            counts[g] += 1;
        }
        Ok(counts)
    }

    /// [`GmmModel::raw_hist`] divided by the sample count.
    pub fn norm_hist(&self, data: &Dataset, mode: AssignMode) -> Result<Vec<f64>> {
        let n = data.n_samples() as f64;
        Ok(self.raw_hist(data, mode)?.into_iter().map(|c| c as f64 / n).collect())
    }

    /// Draws one sample.
    pub fn generate_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dims()];
        self.generate_into(rng, &mut out);
        out
    }

    fn generate_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // last gaussian with non-zero heft absorbs rounding in the cumulative sum
        let mut g = self.hefts().iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (k, &w) in self.hefts().iter().enumerate() {
            acc += w;
            if w > 0.0 && u < acc {
                g = k;
                break;
            }
        }
        for ((o, m), v) in out.iter_mut().zip(self.mean(g)).zip(self.dcov(g)) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + v.sqrt() * z;
        }
        g
    }

    /// Draws `n` samples; the same `rng_seed` gives the same samples.
    pub fn generate(&self, n: usize, rng_seed: u64) -> Result<Dataset> {
        Ok(self.generate_labelled(n, rng_seed)?.0)
    }

    /// Like [`GmmModel::generate`], also returning the gaussian each sample came from.
    pub fn generate_labelled(&self, n: usize, rng_seed: u64) -> Result<(Dataset, Vec<usize>)> {
        if n == 0 {
            return Err(GmmError::invalid("number of samples must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let d = self.n_dims();
        let mut data = vec![0.0; n * d];
        let labels = data
            .chunks_exact_mut(d)
            .map(|row| self.generate_into(&mut rng, row))
            .collect();
        Ok((Dataset::from_flat(data, d)?, labels))
    }
}
