//! Multi-threaded EM for diagonal GMMs and the `learn` pipeline.
//!
//! One EM iteration is a map-reduce. Each block of samples produces
//! accumulators holding, per gaussian, the summed responsibilities, the
//! responsibility-weighted sample sum and the responsibility-weighted sum of
//! squared samples. Reducing the blocks in ascending order gives the new
//! hefts, means, and variances as `E[x^2] - mean^2`, floored at `var_floor`.

use std::ops::Range;
use std::time::Instant;

use crate::error::{GmmError, Result};
use crate::kmeans::{self, DistKind, DistMode, SeedMode};
use crate::likelihood::log_terms;
use crate::model::{Dataset, GmmModel};
use crate::parallel::{default_threads, Workers};

/// Components whose summed responsibility falls to this fraction of the
/// sample count are frozen for the iteration.
const DEGENERATE_MASS: f64 = 1e-12;

/// Knobs of [`learn`], named after their role in the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_gaus: usize,
    /// Distance used for seeding and k-means.
    pub dist: DistKind,
    pub seed_mode: SeedMode,
    pub km_iter: usize,
    pub em_iter: usize,
    /// Smallest variance allowed after each EM iteration.
    pub var_floor: f64,
    pub n_threads: usize,
    pub rng_seed: u64,
    /// EM stops once the relative gain in average log-likelihood drops below this.
    pub em_rel_tol: f64,
    /// Print one progress line per iteration to stderr.
    pub print_mode: bool,
}

impl FitConfig {
    pub fn new(n_gaus: usize) -> Self {
        FitConfig {
            n_gaus,
            dist: DistKind::Maha,
            seed_mode: SeedMode::RandomSubset,
            km_iter: 10,
            em_iter: 5,
            var_floor: 1e-10,
            n_threads: default_threads(),
            rng_seed: 0,
            em_rel_tol: 1e-10,
            print_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_gaus == 0 {
            return Err(GmmError::invalid("n_gaus must be at least 1"));
        }
        if !(self.var_floor > 0.0 && self.var_floor.is_finite()) {
            return Err(GmmError::invalid("var_floor must be a positive finite number"));
        }
        if !(self.em_rel_tol >= 0.0) {
            return Err(GmmError::invalid("em_rel_tol must be non-negative"));
        }
        if self.n_threads == 0 {
            return Err(GmmError::invalid("n_threads must be at least 1"));
        }
        Ok(())
    }
}

/// Progress and timing of a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    /// k-means objective (total distance to assigned means), one per pass.
    pub km_objective: Vec<f64>,
    pub km_iterations: usize,
    pub km_seconds: f64,
    /// Average log-likelihood of the model EM started from.
    pub initial_avg_log_p: Option<f64>,
    /// Average log-likelihood after each EM iteration.
    pub em_avg_log_p: Vec<f64>,
    pub em_iterations: usize,
    pub em_seconds: f64,
    /// EM stopped on the relative tolerance rather than the iteration cap.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn final_avg_log_p(&self) -> Option<f64> {
        self.em_avg_log_p.last().copied()
    }

    pub fn total_seconds(&self) -> f64 {
        self.km_seconds + self.em_seconds
    }
}

/// Per-block partial sums for one EM pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    pub n_gaus: usize,
    pub n_dims: usize,
    /// Summed responsibilities per gaussian.
    pub resp: Vec<f64>,
    /// Responsibility-weighted sample sums, component-major.
    pub weighted_sum: Vec<f64>,
    /// Responsibility-weighted sums of squared samples, component-major.
    pub weighted_sq_sum: Vec<f64>,
    /// Summed log-likelihood of the block under the current model.
    pub log_p_sum: f64,
    pub n_samples: usize,
}

impl Accumulators {
    pub fn zeros(n_gaus: usize, n_dims: usize) -> Self {
        Accumulators {
            n_gaus,
            n_dims,
            resp: vec![0.0; n_gaus],
            weighted_sum: vec![0.0; n_gaus * n_dims],
            weighted_sq_sum: vec![0.0; n_gaus * n_dims],
            log_p_sum: 0.0,
            n_samples: 0,
        }
    }

    /// Elementwise `self += other`.
    pub fn merge(&mut self, other: &Accumulators) {
        fn add(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        add(&mut self.resp, &other.resp);
        add(&mut self.weighted_sum, &other.weighted_sum);
        add(&mut self.weighted_sq_sum, &other.weighted_sq_sum);
        self.log_p_sum += other.log_p_sum;
        self.n_samples += other.n_samples;
    }
}

/// Posterior probability of each gaussian given `x`.
pub fn responsibilities(x: &[f64], model: &GmmModel) -> Result<Vec<f64>> {
    if x.len() != model.n_dims() {
        return Err(GmmError::DimensionMismatch {
            expected: model.n_dims(),
            found: x.len(),
        });
    }
    let mut terms = vec![0.0; model.n_gaus()];
    let total = log_terms(model, x, &mut terms);
    if total == f64::NEG_INFINITY {
        return Err(GmmError::DegeneratePoint {
            index: 0,
            iteration: None,
        });
    }
    terms.iter_mut().for_each(|t| *t = (*t - total).exp());
    Ok(terms)
}

/// Accumulates responsibilities and weighted moments over `range`, left to right.
pub fn accumulate_chunk(data: &Dataset, range: Range<usize>, model: &GmmModel) -> Result<Accumulators> {
    if data.n_dims() != model.n_dims() {
        return Err(GmmError::DimensionMismatch {
            expected: model.n_dims(),
            found: data.n_dims(),
        });
    }
    if range.end > data.n_samples() || range.start > range.end {
        return Err(GmmError::invalid(format!(
            "range {range:?} outside {} samples",
            data.n_samples()
        )));
    }
    let (k, d) = (model.n_gaus(), model.n_dims());
    let mut acc = Accumulators::zeros(k, d);
    let mut terms = vec![0.0; k];
    for i in range {
        let x = data.sample(i);
        let total = log_terms(model, x, &mut terms);
        if total == f64::NEG_INFINITY {
            return Err(GmmError::DegeneratePoint {
                index: i,
                iteration: None,
            });
        }
        acc.log_p_sum += total;
        acc.n_samples += 1;
        for (g, &t) in terms.iter().enumerate() {
            let l = (t - total).exp();
            if l == 0.0 {
                continue;
            }
            acc.resp[g] += l;
            let sum = &mut acc.weighted_sum[g * d..(g + 1) * d];
            let sq = &mut acc.weighted_sq_sum[g * d..(g + 1) * d];
            for ((s, q), &v) in sum.iter_mut().zip(sq.iter_mut()).zip(x) {
                let lv = l * v;
                *s += lv;
                *q += lv * v;
            }
        }
    }
    Ok(acc)
}

/// Sums `accs` in order and turns the totals into updated parameters.
///
/// Gaussians left with (almost) no responsibility keep their previous mean
/// and variances. All variances are floored at `var_floor`; hefts are
/// rescaled to sum to one.
pub fn reduce_and_update(
    accs: &[Accumulators],
    model: &GmmModel,
    var_floor: f64,
    n_samples: usize,
) -> Result<GmmModel> {
    let (k, d) = (model.n_gaus(), model.n_dims());
    if accs.is_empty() || n_samples == 0 {
        return Err(GmmError::invalid("nothing to reduce"));
    }
    let mut total = Accumulators::zeros(k, d);
    for acc in accs {
        if acc.n_gaus != k || acc.n_dims != d {
            return Err(GmmError::invalid("accumulator shape differs from the model"));
        }
        total.merge(acc);
    }

    let threshold = DEGENERATE_MASS * n_samples as f64;
    let mut hefts = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k * d);
    let mut dcovs = Vec::with_capacity(k * d);
    let mut live = 0;
    for g in 0..k {
        let mass = total.resp[g];
        hefts.push(mass / n_samples as f64);
        if mass > threshold && mass.is_finite() {
            live += 1;
            let sum = &total.weighted_sum[g * d..(g + 1) * d];
            let sq = &total.weighted_sq_sum[g * d..(g + 1) * d];
            for (s, q) in sum.iter().zip(sq) {
                let mu = s / mass;
                means.push(mu);
                dcovs.push((q / mass - mu * mu).max(var_floor));
            }
        } else {
            means.extend_from_slice(model.mean(g));
            dcovs.extend(model.dcov(g).iter().map(|v| v.max(var_floor)));
        }
    }
    if live == 0 {
        return Err(GmmError::AllComponentsDegenerate);
    }
    let sum: f64 = hefts.iter().sum();
    hefts.iter_mut().for_each(|w| *w /= sum);
    Ok(GmmModel::build(d, hefts, means, dcovs))
}

/// One EM iteration. Returns the updated model and the average
/// log-likelihood of `model` (the one the E-step ran against).
pub fn em_step(data: &Dataset, model: &GmmModel, var_floor: f64, workers: &Workers) -> Result<(GmmModel, f64)> {
    let accs = workers.try_map_blocks(data.n_samples(), |r| accumulate_chunk(data, r, model))?;
    let log_p_sum = accs.iter().fold(0.0, |s, a| s + a.log_p_sum);
    let next = reduce_and_update(&accs, model, var_floor, data.n_samples())?;
    Ok((next, log_p_sum / data.n_samples() as f64))
}

/// Runs up to `config.em_iter` EM iterations from `init`.
///
/// Stops early when the relative gain in average log-likelihood falls below
/// `config.em_rel_tol`; the returned model is always the one whose
/// likelihood is the last trace entry.
pub fn em_fit(data: &Dataset, init: &GmmModel, config: &FitConfig) -> Result<(GmmModel, FitReport)> {
    let workers = Workers::new(config.n_threads)?;
    let mut report = FitReport::default();
    let model = em_loop(data, init.clone(), config, &workers, &mut report)?;
    Ok((model, report))
}

fn em_loop(
    data: &Dataset,
    mut model: GmmModel,
    config: &FitConfig,
    workers: &Workers,
    report: &mut FitReport,
) -> Result<GmmModel> {
    if data.n_dims() != model.n_dims() {
        return Err(GmmError::DimensionMismatch {
            expected: model.n_dims(),
            found: data.n_dims(),
        });
    }
    let start = Instant::now();
    let at_iteration = |it: usize| {
        move |e: GmmError| match e {
            GmmError::DegeneratePoint { index, .. } => GmmError::DegeneratePoint {
                index,
                iteration: Some(it),
            },
            e => e,
        }
    };

    // the E-step of iteration `it` scores the model produced by iteration `it - 1`
    for it in 0..config.em_iter {
        let (next, current) =
            em_step(data, &model, config.var_floor, workers).map_err(at_iteration(it))?;
        if let Some(prev) = report.em_avg_log_p.last().copied().or(report.initial_avg_log_p) {
            if it > 0 {
                report.em_avg_log_p.push(current);
                if config.print_mode {
                    print_em(it - 1, current, start);
                }
                if relative_gain(prev, current) < config.em_rel_tol {
                    report.converged = true;
                    report.em_seconds = start.elapsed().as_secs_f64();
                    return Ok(model);
                }
            }
        } else {
            report.initial_avg_log_p = Some(current);
        }
        model = next;
        report.em_iterations = it + 1;
    }

    if config.em_iter > 0 {
        let last = model.avg_log_p_with(data, workers)?;
        if last == f64::NEG_INFINITY {
            let index = model
                .log_p_batch_with(data, workers)?
                .iter()
                .position(|v| *v == f64::NEG_INFINITY)
                .unwrap_or(0);
            return Err(GmmError::DegeneratePoint {
                index,
                iteration: Some(config.em_iter),
            });
        }
        let prev = report.em_avg_log_p.last().copied().or(report.initial_avg_log_p).unwrap();
        report.em_avg_log_p.push(last);
        report.converged = relative_gain(prev, last) < config.em_rel_tol;
        if config.print_mode {
            print_em(config.em_iter - 1, last, start);
        }
    }
    report.em_seconds = start.elapsed().as_secs_f64();
    Ok(model)
}

fn relative_gain(prev: f64, current: f64) -> f64 {
    (current - prev) / prev.abs().max(f64::MIN_POSITIVE)
}

fn print_em(it: usize, value: f64, start: Instant) {
    eprintln!(
        "em     iter {it:>3}  avg_log_p {value:.10e}  elapsed_ms {}",
        start.elapsed().as_millis()
    );
}

/// Fits a fresh model to `data`: seeding, k-means, then EM.
///
/// `SeedMode::KeepExisting` needs a model to keep; use [`GmmModel::learn`].
pub fn learn(data: &Dataset, config: &FitConfig) -> Result<(GmmModel, FitReport)> {
    if config.seed_mode == SeedMode::KeepExisting {
        return Err(GmmError::invalid(
            "keep-existing seeding needs an existing model (GmmModel::learn)",
        ));
    }
    let mut model = GmmModel::reset(data.n_dims(), config.n_gaus.max(1))?;
    let report = model.learn(data, config)?;
    Ok((model, report))
}

impl GmmModel {
    /// Fits the model to `data` in place. On error the model is unchanged.
    ///
    /// With `SeedMode::KeepExisting` the current parameters are the EM
    /// starting point and k-means is skipped. Otherwise means are seeded from
    /// the samples, refined by `km_iter` k-means passes, and turned into an
    /// initial mixture: hefts from cluster sizes, variances from cluster
    /// spreads (the global variance for clusters with fewer than 2 members).
    pub fn learn(&mut self, data: &Dataset, config: &FitConfig) -> Result<FitReport> {
        config.validate()?;
        let n = data.n_samples();
        if n < config.n_gaus {
            return Err(GmmError::InsufficientSamples {
                n_samples: n,
                n_gaus: config.n_gaus,
            });
        }
        let mut report = FitReport::default();
        if n < 10 * config.n_gaus {
            report.warnings.push(format!(
                "only {n} samples for {} gaussians; at least 10 per gaussian is recommended",
                config.n_gaus
            ));
        }
        let workers = Workers::new(config.n_threads)?;

        let init = if config.seed_mode == SeedMode::KeepExisting {
            if self.n_dims() != data.n_dims() {
                return Err(GmmError::DimensionMismatch {
                    expected: self.n_dims(),
                    found: data.n_dims(),
                });
            }
            if self.n_gaus() != config.n_gaus {
                return Err(GmmError::invalid(format!(
                    "existing model has {} gaussians, config asks for {}",
                    self.n_gaus(),
                    config.n_gaus
                )));
            }
            self.clone()
        } else {
            kmeans_init(data, config, &workers, &mut report)?
        };

        let model = em_loop(data, init, config, &workers, &mut report)?;
        *self = model;
        Ok(report)
    }
}

fn kmeans_init(
    data: &Dataset,
    config: &FitConfig,
    workers: &Workers,
    report: &mut FitReport,
) -> Result<GmmModel> {
    let start = Instant::now();
    let (n, d, k) = (data.n_samples(), data.n_dims(), config.n_gaus);
    let global = if n >= 2 {
        kmeans::global_diag_cov(data)?
    } else {
        vec![1.0; d]
    };
    let dist = match config.dist {
        DistKind::Eucl => DistMode::EuclSq,
        DistKind::Maha => DistMode::MahaDiag(global.iter().map(|v| 1.0 / v).collect()),
    };
    let seeds = kmeans::seed_means(data, k, config.seed_mode, &dist, config.rng_seed)?;
    let print = config.print_mode;
    let km = kmeans::run_kmeans_from(data, seeds, &dist, config.km_iter, workers, |it, obj| {
        if print {
            eprintln!(
                "kmeans iter {it:>3}  objective {obj:.10e}  elapsed_ms {}",
                start.elapsed().as_millis()
            );
        }
    })?;
    report.km_objective = km.objective.clone();
    report.km_iterations = km.iterations;

    let floored_global: Vec<f64> = global.iter().map(|v| v.max(config.var_floor)).collect();
    let model = if km.iterations == 0 {
        GmmModel::build(
            d,
            vec![1.0 / k as f64; k],
            km.state.means,
            floored_global.repeat(k),
        )
    } else {
        let state = &km.state;
        // per-cluster sum of squared deviations from the cluster mean
        let blocks = workers.map_blocks(n, |r| {
            let mut ss = vec![0.0; k * d];
            for i in r {
                let g = state.assignment[i];
                let mean = state.mean(g);
                for ((s, x), m) in ss[g * d..(g + 1) * d].iter_mut().zip(data.sample(i)).zip(mean) {
                    let c = x - m;
                    *s += c * c;
                }
            }
            ss
        });
        let mut ss = vec![0.0; k * d];
        for b in &blocks {
            ss.iter_mut().zip(b).for_each(|(s, v)| *s += v);
        }
        let mut dcovs = Vec::with_capacity(k * d);
        for g in 0..k {
            let count = state.counts[g];
            if count >= 2 {
                dcovs.extend(
                    ss[g * d..(g + 1) * d]
                        .iter()
                        .map(|s| (s / count as f64).max(config.var_floor)),
                );
            } else {
                dcovs.extend_from_slice(&floored_global);
            }
        }
        let heft_floor = 1.0 / (100.0 * k as f64);
        let mut hefts: Vec<f64> = state
            .counts
            .iter()
            .map(|&c| (c as f64 / n as f64).max(heft_floor))
            .collect();
        let sum: f64 = hefts.iter().sum();
        hefts.iter_mut().for_each(|w| *w /= sum);
        GmmModel::build(d, hefts, state.means.clone(), dcovs)
    };
    report.km_seconds = start.elapsed().as_secs_f64();
    Ok(model)
}
