//! Log-domain Gaussian and mixture densities.
//!
//! Every density is evaluated as a logarithm. Mixture sums are folded with
//! [`log_add`] in ascending component order starting from `-inf`, so the
//! largest term is never exponentiated and a single underflowing component
//! cannot drag the total to `-inf`.

use std::f64::consts::PI;

use crate::error::{GmmError, Result};
use crate::model::{Dataset, GmmModel};
use crate::parallel::{default_threads, Workers};

/// `ln(exp(log_a) + exp(log_b))` without leaving the log domain.
///
/// `-inf` stands for `ln 0`, so `log_add(x, -inf) == x`. NaN inputs propagate.
#[inline]
pub fn log_add(log_a: f64, log_b: f64) -> f64 {
    let (hi, lo) = if log_a >= log_b { (log_a, log_b) } else { (log_b, log_a) };
    if lo == f64::NEG_INFINITY {
        // also covers hi == -inf; NaN fails both comparisons above and lands here only as `lo`
        return if log_a.is_nan() || log_b.is_nan() { f64::NAN } else { hi };
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Per-component quantities that depend only on the variances.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGaussConstants {
    /// `-(D/2) ln 2pi - 1/2 sum_d ln var_d`
    pub log_det_term: f64,
    pub inv_dcov: Vec<f64>,
}

impl LogGaussConstants {
    pub fn new(dcov: &[f64]) -> Self {
        let half_log_det: f64 = 0.5 * dcov.iter().map(|v| v.ln()).sum::<f64>();
        LogGaussConstants {
            log_det_term: -(dcov.len() as f64) * 0.5 * (2.0 * PI).ln() - half_log_det,
            inv_dcov: dcov.iter().map(|v| 1.0 / v).collect(),
        }
    }
}

#[inline]
pub(crate) fn log_gauss_raw(x: &[f64], mean: &[f64], consts: &LogGaussConstants) -> f64 {
    let mut quad = 0.0;
    for ((xd, md), inv) in x.iter().zip(mean).zip(&consts.inv_dcov) {
        let diff = xd - md;
        quad += diff * diff * inv;
    }
    consts.log_det_term - 0.5 * quad
}

/// Fills `terms[g] = ln w_g + ln N(x | g)` and returns their log-sum.
/// Zero-heft components get `-inf` and are left out of the fold.
#[inline]
pub(crate) fn log_terms(model: &GmmModel, x: &[f64], terms: &mut [f64]) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for (g, (t, &lw)) in terms.iter_mut().zip(model.log_hefts()).enumerate() {
        if lw == f64::NEG_INFINITY {
            *t = f64::NEG_INFINITY;
            continue;
        }
        *t = lw + log_gauss_raw(x, model.mean(g), model.consts(g));
        acc = log_add(acc, *t);
    }
    acc
}

#[inline]
pub(crate) fn log_p_raw(model: &GmmModel, x: &[f64]) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for (g, &lw) in model.log_hefts().iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        acc = log_add(acc, lw + log_gauss_raw(x, model.mean(g), model.consts(g)));
    }
    acc
}

/// Sum of `values` folded per block then across blocks in ascending order.
/// Matches the summation order used by the EM accumulators.
pub(crate) fn blocked_sum(values: &[f64]) -> f64 {
    crate::parallel::block_ranges(values.len())
        .into_iter()
        .map(|r| values[r].iter().sum::<f64>())
        .fold(0.0, |acc, s| acc + s)
}

impl GmmModel {
    fn check_dims(&self, found: usize) -> Result<()> {
        if found == self.n_dims() {
            Ok(())
        } else {
            Err(GmmError::DimensionMismatch {
                expected: self.n_dims(),
                found,
            })
        }
    }

    fn check_gaus(&self, g: usize) -> Result<()> {
        if g < self.n_gaus() {
            Ok(())
        } else {
            Err(GmmError::invalid(format!(
                "gaussian index {g} out of range for {} gaussians",
                self.n_gaus()
            )))
        }
    }

    /// Log-density of `x` under component `g` alone (heft not included).
    pub fn log_gauss(&self, x: &[f64], g: usize) -> Result<f64> {
        self.check_dims(x.len())?;
        self.check_gaus(g)?;
        Ok(log_gauss_raw(x, self.mean(g), self.consts(g)))
    }

    /// Log-likelihood of `x` under the mixture. Returns `-inf` only when
    /// every component's term is `-inf`.
    pub fn log_p(&self, x: &[f64]) -> Result<f64> {
        self.check_dims(x.len())?;
        Ok(log_p_raw(self, x))
    }

    /// Same as [`GmmModel::log_gauss`]; mirrors `log_p(V, g)`.
    pub fn log_p_comp(&self, x: &[f64], g: usize) -> Result<f64> {
        self.log_gauss(x, g)
    }

    pub fn log_p_batch(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.log_p_batch_with(data, &Workers::new(default_threads())?)
    }

    pub fn log_p_batch_with(&self, data: &Dataset, workers: &Workers) -> Result<Vec<f64>> {
        self.check_dims(data.n_dims())?;
        Ok(workers
            .map_blocks(data.n_samples(), |r| {
                r.map(|i| log_p_raw(self, data.sample(i))).collect::<Vec<_>>()
            })
            .concat())
    }

    pub fn log_p_comp_batch(&self, data: &Dataset, g: usize) -> Result<Vec<f64>> {
        self.log_p_comp_batch_with(data, g, &Workers::new(default_threads())?)
    }

    pub fn log_p_comp_batch_with(&self, data: &Dataset, g: usize, workers: &Workers) -> Result<Vec<f64>> {
        self.check_dims(data.n_dims())?;
        self.check_gaus(g)?;
        let (mean, consts) = (self.mean(g), self.consts(g));
        Ok(workers
            .map_blocks(data.n_samples(), |r| {
                r.map(|i| log_gauss_raw(data.sample(i), mean, consts)).collect::<Vec<_>>()
            })
            .concat())
    }

    /// Mean log-likelihood over all samples.
    pub fn avg_log_p(&self, data: &Dataset) -> Result<f64> {
        self.avg_log_p_with(data, &Workers::new(default_threads())?)
    }

    pub fn avg_log_p_with(&self, data: &Dataset, workers: &Workers) -> Result<f64> {
        let values = self.log_p_batch_with(data, workers)?;
        Ok(blocked_sum(&values) / values.len() as f64)
    }

    /// Mean log-density over all samples under component `g` alone.
    pub fn avg_log_p_comp(&self, data: &Dataset, g: usize) -> Result<f64> {
        let values = self.log_p_comp_batch(data, g)?;
        Ok(blocked_sum(&values) / values.len() as f64)
    }
}
