//! The diagonal GMM parameter set and its persistent text format.
//!
//! A model holds `n_gaus` components over `n_dims` dimensions: one heft
//! (mixture weight), one mean vector and one vector of diagonal variances per
//! component. Means and variances are stored flat, component-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{GmmError, Result};
use crate::likelihood::LogGaussConstants;

/// Hefts handed to a setter may be off from 1 by this much.
pub const HEFT_SUM_TOLERANCE: f64 = 1e-9;

/// Internally hefts are kept within this distance of summing to 1.
const HEFT_SUM_STRICT: f64 = 1e-12;

const MAGIC: &str = "GMM_DIAG";
const VERSION: &str = "1";

/// Training or evaluation samples, stored sample-major and contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    data: Vec<f64>,
    n_dims: usize,
}

impl Dataset {
    /// Wraps a flat buffer holding `data.len() / n_dims` samples back to back.
    pub fn from_flat(data: Vec<f64>, n_dims: usize) -> Result<Self> {
        if n_dims == 0 {
            return Err(GmmError::invalid("dataset dimensionality must be at least 1"));
        }
        if data.is_empty() {
            return Err(GmmError::invalid("dataset must contain at least one sample"));
        }
        if data.len() % n_dims != 0 {
            return Err(GmmError::invalid(format!(
                "buffer of length {} is not a whole number of {n_dims}-dimensional samples",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GmmError::invalid(format!(
                "non-finite value in sample {} (dimension {})",
                pos / n_dims,
                pos % n_dims
            )));
        }
        Ok(Dataset { data, n_dims })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_dims {
                return Err(GmmError::invalid(format!(
                    "sample {i} has {} dimensions, expected {n_dims}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Dataset::from_flat(data, n_dims)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.data.len() / self.n_dims
    }

    #[inline]
    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn samples(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_dims)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Samples `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        if range.start >= range.end || range.end > self.n_samples() {
            return Err(GmmError::invalid(format!(
                "sample range {range:?} is empty or exceeds {} samples",
                self.n_samples()
            )));
        }
        Ok(Dataset {
            data: self.data[range.start * self.n_dims..range.end * self.n_dims].to_vec(),
            n_dims: self.n_dims,
        })
    }
}

/// Diagonal-covariance Gaussian mixture model.
///
/// Invariants, checked by every constructor and setter:
/// hefts are non-negative and sum to one, variances are finite and strictly
/// positive, means are finite, and all three agree on `n_gaus` and `n_dims`.
#[derive(Debug, Clone)]
pub struct GmmModel {
    n_dims: usize,
    hefts: Vec<f64>,
    means: Vec<f64>,
    dcovs: Vec<f64>,
    log_hefts: Vec<f64>,
    consts: Vec<LogGaussConstants>,
}

impl PartialEq for GmmModel {
    fn eq(&self, other: &Self) -> bool {
        // bitwise, so that -0.0 != 0.0 and round-trips are checked exactly
        fn bits(v: &[f64]) -> impl Iterator<Item = u64> + '_ {
            v.iter().map(|x| x.to_bits())
        }
        self.n_dims == other.n_dims
            && bits(&self.hefts).eq(bits(&other.hefts))
            && bits(&self.means).eq(bits(&other.means))
            && bits(&self.dcovs).eq(bits(&other.dcovs))
    }
}

impl GmmModel {
    /// Zero means, unit variances, uniform hefts.
    pub fn reset(n_dims: usize, n_gaus: usize) -> Result<Self> {
        if n_dims == 0 {
            return Err(GmmError::invalid("n_dims must be at least 1"));
        }
        if n_gaus == 0 {
            return Err(GmmError::invalid("n_gaus must be at least 1"));
        }
        Ok(Self::build(
            n_dims,
            vec![1.0 / n_gaus as f64; n_gaus],
            vec![0.0; n_dims * n_gaus],
            vec![1.0; n_dims * n_gaus],
        ))
    }

    /// Builds a model from row-per-component means and variances.
    pub fn from_params<R: AsRef<[f64]>>(means: &[R], dcovs: &[R], hefts: &[f64]) -> Result<Self> {
        let (n_dims, means) = flatten("means", means)?;
        let (dcov_dims, dcovs) = flatten("dcovs", dcovs)?;
        Self::from_flat(n_dims, means, dcov_dims, dcovs, hefts.to_vec())
    }

    /// Builds a model from flat component-major buffers.
    pub fn from_flat_params(
        n_dims: usize,
        means: Vec<f64>,
        dcovs: Vec<f64>,
        hefts: Vec<f64>,
    ) -> Result<Self> {
        Self::from_flat(n_dims, means, n_dims, dcovs, hefts)
    }

    fn from_flat(
        n_dims: usize,
        means: Vec<f64>,
        dcov_dims: usize,
        dcovs: Vec<f64>,
        hefts: Vec<f64>,
    ) -> Result<Self> {
        if n_dims == 0 {
            return Err(validation("means", "dimensionality must be at least 1"));
        }
        if hefts.is_empty() {
            return Err(validation("hefts", "at least one gaussian is required"));
        }
        let n_gaus = hefts.len();
        if means.len() != n_gaus * n_dims {
            return Err(validation(
                "means",
                format!("expected {n_gaus} means of dimension {n_dims}"),
            ));
        }
        if dcov_dims != n_dims || dcovs.len() != n_gaus * n_dims {
            return Err(validation(
                "dcovs",
                format!("expected {n_gaus} covariance vectors of dimension {n_dims}"),
            ));
        }
        check_means(&means)?;
        check_dcovs(&dcovs)?;
        let hefts = normalised_hefts(hefts)?;
        Ok(Self::build(n_dims, hefts, means, dcovs))
    }

    /// Assembles a model from already-validated parts.
    pub(crate) fn build(n_dims: usize, hefts: Vec<f64>, means: Vec<f64>, dcovs: Vec<f64>) -> Self {
        let mut model = GmmModel {
            n_dims,
            hefts,
            means,
            dcovs,
            log_hefts: Vec::new(),
            consts: Vec::new(),
        };
        model.refresh();
        model
    }

    fn refresh(&mut self) {
        self.log_hefts = self.hefts.iter().map(|w| w.ln()).collect();
        self.consts = self
            .dcovs
            .chunks_exact(self.n_dims)
            .map(LogGaussConstants::new)
            .collect();
    }

    #[inline]
    pub fn n_gaus(&self) -> usize {
        self.hefts.len()
    }

    #[inline]
    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn hefts(&self) -> &[f64] {
        &self.hefts
    }

    /// All means, flat and component-major.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// All diagonal variances, flat and component-major.
    pub fn dcovs(&self) -> &[f64] {
        &self.dcovs
    }

    #[inline]
    pub fn mean(&self, g: usize) -> &[f64] {
        &self.means[g * self.n_dims..(g + 1) * self.n_dims]
    }

    #[inline]
    pub fn dcov(&self, g: usize) -> &[f64] {
        &self.dcovs[g * self.n_dims..(g + 1) * self.n_dims]
    }

    /// `ln w_g`; `-inf` for zero hefts.
    #[inline]
    pub(crate) fn log_hefts(&self) -> &[f64] {
        &self.log_hefts
    }

    #[inline]
    pub(crate) fn consts(&self, g: usize) -> &LogGaussConstants {
        &self.consts[g]
    }

    /// Replaces the hefts; their count must match the model.
    pub fn set_hefts(&mut self, hefts: &[f64]) -> Result<()> {
        if hefts.len() != self.n_gaus() {
            return Err(validation(
                "hefts",
                format!("expected {} hefts, got {}", self.n_gaus(), hefts.len()),
            ));
        }
        self.hefts = normalised_hefts(hefts.to_vec())?;
        self.refresh();
        Ok(())
    }

    /// Replaces the means; shape must match the model.
    pub fn set_means<R: AsRef<[f64]>>(&mut self, means: &[R]) -> Result<()> {
        let (n_dims, flat) = flatten("means", means)?;
        if n_dims != self.n_dims || means.len() != self.n_gaus() {
            return Err(validation(
                "means",
                format!("expected {} means of dimension {}", self.n_gaus(), self.n_dims),
            ));
        }
        check_means(&flat)?;
        self.means = flat;
        Ok(())
    }

    /// Replaces the diagonal variances; shape must match the model.
    pub fn set_dcovs<R: AsRef<[f64]>>(&mut self, dcovs: &[R]) -> Result<()> {
        let (n_dims, flat) = flatten("dcovs", dcovs)?;
        if n_dims != self.n_dims || dcovs.len() != self.n_gaus() {
            return Err(validation(
                "dcovs",
                format!(
                    "expected {} covariance vectors of dimension {}",
                    self.n_gaus(),
                    self.n_dims
                ),
            ));
        }
        check_dcovs(&flat)?;
        self.dcovs = flat;
        self.refresh();
        Ok(())
    }

    /// Replaces every parameter at once; unlike the individual setters this
    /// may change the number of gaussians and the dimensionality.
    pub fn set_params<R: AsRef<[f64]>>(&mut self, means: &[R], dcovs: &[R], hefts: &[f64]) -> Result<()> {
        *self = GmmModel::from_params(means, dcovs, hefts)?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "{} {}", self.n_dims, self.n_gaus());
        write_reals(&mut out, &self.hefts);
        for row in self.means.chunks_exact(self.n_dims) {
            write_reals(&mut out, row);
        }
        for row in self.dcovs.chunks_exact(self.n_dims) {
            write_reals(&mut out, row);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next_line = |what: &str| {
            lines.next().ok_or_else(|| GmmError::Format {
                line: 0,
                reason: format!("file ended before {what}"),
            })
        };

        let (_, header) = next_line("the header")?;
        let mut head = header.split_whitespace();
        match head.next() {
            Some(MAGIC) => {}
            other => return Err(GmmError::BadMagic(other.unwrap_or("").to_string())),
        }
        match (head.next(), head.next()) {
            (Some(VERSION), None) => {}
            (Some(v), None) => return Err(GmmError::VersionMismatch(v.to_string())),
            _ => {
                return Err(GmmError::Format {
                    line: 1,
                    reason: "expected `GMM_DIAG <version>`".into(),
                })
            }
        }

        let (ln, shape) = next_line("the shape line")?;
        let shape: Vec<usize> = shape
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| GmmError::Format {
                    line: ln,
                    reason: format!("bad integer {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let [n_dims, n_gaus] = shape[..] else {
            return Err(GmmError::Format {
                line: ln,
                reason: "expected `<n_dims> <n_gaus>`".into(),
            });
        };
        if n_dims == 0 || n_gaus == 0 {
            return Err(GmmError::Format {
                line: ln,
                reason: "n_dims and n_gaus must be positive".into(),
            });
        }

        let (ln, row) = next_line("the hefts")?;
        let hefts = parse_reals(ln, row, n_gaus)?;
        let mut means = Vec::with_capacity(n_dims * n_gaus);
        for _ in 0..n_gaus {
            let (ln, row) = next_line("all means")?;
            means.extend(parse_reals(ln, row, n_dims)?);
        }
        let mut dcovs = Vec::with_capacity(n_dims * n_gaus);
        for _ in 0..n_gaus {
            let (ln, row) = next_line("all covariances")?;
            dcovs.extend(parse_reals(ln, row, n_dims)?);
        }
        if let Some((ln, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(GmmError::Format {
                line: ln,
                reason: "unexpected trailing content".into(),
            });
        }
        GmmModel::from_flat_params(n_dims, means, dcovs, hefts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| GmmError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| GmmError::io(path, e))?;
        GmmModel::from_text(&text)
    }
}

fn validation(field: &'static str, reason: impl Into<String>) -> GmmError {
    GmmError::Validation {
        field,
        reason: reason.into(),
    }
}

fn flatten<R: AsRef<[f64]>>(field: &'static str, rows: &[R]) -> Result<(usize, Vec<f64>)> {
    let n_dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if rows.is_empty() || n_dims == 0 {
        return Err(validation(field, "must be non-empty"));
    }
    let mut flat = Vec::with_capacity(rows.len() * n_dims);
    for row in rows {
        let row = row.as_ref();
        if row.len() != n_dims {
            return Err(validation(field, "rows have differing dimensionality"));
        }
        flat.extend_from_slice(row);
    }
    Ok((n_dims, flat))
}

fn check_means(means: &[f64]) -> Result<()> {
    if means.iter().all(|m| m.is_finite()) {
        Ok(())
    } else {
        Err(validation("means", "entries must be finite"))
    }
}

fn check_dcovs(dcovs: &[f64]) -> Result<()> {
    if dcovs.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(validation("dcovs", "entries must be finite and strictly positive"))
    }
}

/// Validates hefts and rescales them to sum to one. Hefts already within
/// `HEFT_SUM_STRICT` of one are kept bit-for-bit so that save/load is exact.
pub(crate) fn normalised_hefts(mut hefts: Vec<f64>) -> Result<Vec<f64>> {
    if hefts.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(validation("hefts", "entries must be finite and non-negative"));
    }
    let sum: f64 = hefts.iter().sum();
    if (sum - 1.0).abs() > HEFT_SUM_TOLERANCE {
        return Err(validation("hefts", format!("must sum to 1, got {sum}")));
    }
    if (sum - 1.0).abs() > HEFT_SUM_STRICT {
        hefts.iter_mut().for_each(|w| *w /= sum);
    }
    Ok(hefts)
}

fn write_reals(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        // 17 significant digits
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

fn parse_reals(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(GmmError::Format {
                line,
                reason: format!("bad real {t:?}"),
            }),
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(GmmError::Format {
            line,
            reason: format!("expected {expected} values, found {}", values.len()),
        });
    }
    Ok(values)
}
