//! Brute-force reference implementations shared by the integration tests.
//! They work in the linear domain, one sample at a time, with none of the
//! library's blocking or log-domain machinery.
#![allow(dead_code)]

use gmm_diag::{Dataset, GmmModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn lin_gauss(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut p = 1.0;
    for ((xd, md), vd) in x.iter().zip(mean).zip(var) {
        let diff = xd - md;
        p *= (-0.5 * diff * diff / vd).exp() / (2.0 * std::f64::consts::PI * vd).sqrt();
    }
    p
}

pub fn lin_mix(x: &[f64], m: &GmmModel) -> f64 {
    (0..m.n_gaus())
        .map(|g| m.hefts()[g] * lin_gauss(x, m.mean(g), m.dcov(g)))
        .sum()
}

pub fn lin_resp(x: &[f64], m: &GmmModel) -> Vec<f64> {
    let total = lin_mix(x, m);
    (0..m.n_gaus())
        .map(|g| m.hefts()[g] * lin_gauss(x, m.mean(g), m.dcov(g)) / total)
        .collect()
}

/// One textbook EM update: weighted means, then centred weighted variances.
pub fn direct_em_update(data: &Dataset, m: &GmmModel) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (k, d, n) = (m.n_gaus(), m.n_dims(), data.n_samples());
    let resp: Vec<Vec<f64>> = data.samples().map(|x| lin_resp(x, m)).collect();
    let mut hefts = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut vars = vec![vec![0.0; d]; k];
    for g in 0..k {
        let mass: f64 = resp.iter().map(|r| r[g]).sum();
        hefts[g] = mass / n as f64;
        for (x, r) in data.samples().zip(&resp) {
            for j in 0..d {
                means[g][j] += r[g] * x[j] / mass;
            }
        }
        for (x, r) in data.samples().zip(&resp) {
            for j in 0..d {
                let c = x[j] - means[g][j];
                vars[g][j] += r[g] * c * c / mass;
            }
        }
    }
    (hefts, means, vars)
}

/// Welford's running mean/variance, population divisor.
pub fn welford_var(data: &Dataset) -> Vec<f64> {
    let d = data.n_dims();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for (i, x) in data.samples().enumerate() {
        let n = (i + 1) as f64;
        for j in 0..d {
            let delta = x[j] - mean[j];
            mean[j] += delta / n;
            m2[j] += delta * (x[j] - mean[j]);
        }
    }
    m2.iter().map(|v| v / data.n_samples() as f64).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random well-conditioned mixture and samples drawn from it.
pub fn random_instance(seed: u64, n: usize, d: usize, k: usize) -> (Dataset, GmmModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let vars: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(0.3..2.0)).collect())
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let s: f64 = raw.iter().sum();
    let hefts: Vec<f64> = raw.iter().map(|w| w / s).collect();
    let model = GmmModel::from_params(&means, &vars, &hefts).unwrap();
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let g = rng.random_range(0..k);
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            flat.push(means[g][j] + vars[g][j].sqrt() * z);
        }
    }
    (Dataset::from_flat(flat, d).unwrap(), model)
}

/// Greedy matching of fitted means to true means; returns, for each true
/// component, the index of the fitted component paired with it.
pub fn match_components(fitted: &GmmModel, truth: &GmmModel) -> Vec<usize> {
    let k = truth.n_gaus();
    let mut pairs = Vec::new();
    for t in 0..k {
        for f in 0..fitted.n_gaus() {
            let d: f64 = truth
                .mean(t)
                .iter()
                .zip(fitted.mean(f))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            pairs.push((d, t, f));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![usize::MAX; k];
    let mut used = vec![false; fitted.n_gaus()];
    for (_, t, f) in pairs {
        if out[t] == usize::MAX && !used[f] {
            out[t] = f;
            used[f] = true;
        }
    }
    out
}

/// Partition of sample indices induced by labels, independent of label names.
pub fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
    parts.sort();
    parts
}
