//! Synthetic datasets drawn from known mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GmmError, Result};
use crate::model::{Dataset, GmmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation.
    pub scale: Vec<f64>,
}

/// A generating mixture. The JSON form is
/// `{"components": [{"weight": .., "mean": [..], "scale": [..]}, ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub components: Vec<SynthComponent>,
    /// Cycle through components in a fixed pattern instead of drawing them.
    /// The pattern repeats each component `weight * period` times, so weights
    /// must be multiples of `1/period`.
    #[serde(default)]
    pub period: Option<usize>,
}

impl SynthSpec {
    /// Two unit-variance clusters in 5 dimensions: means `1..=5` and `3..=7`,
    /// emitted in the repeating order first, first, second.
    pub fn two_cluster() -> Self {
        let mean1: Vec<f64> = (1..=5).map(f64::from).collect();
        let mean2: Vec<f64> = mean1.iter().map(|m| m + 2.0).collect();
        SynthSpec {
            components: vec![
                SynthComponent {
                    weight: 2.0 / 3.0,
                    mean: mean1,
                    scale: vec![1.0; 5],
                },
                SynthComponent {
                    weight: 1.0 / 3.0,
                    mean: mean2,
                    scale: vec![1.0; 5],
                },
            ],
            period: Some(3),
        }
    }

    /// `n_gaus` equally weighted unit-variance clusters with centres drawn
    /// uniformly from `[-5, 5]^n_dims`.
    pub fn random_clusters(n_dims: usize, n_gaus: usize, seed: u64) -> Result<Self> {
        if n_dims == 0 || n_gaus == 0 {
            return Err(GmmError::invalid("random clusters need n_dims >= 1 and n_gaus >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1u64);
        let components = (0..n_gaus)
            .map(|_| SynthComponent {
                weight: 1.0 / n_gaus as f64,
                mean: (0..n_dims).map(|_| rng.random_range(-5.0..5.0)).collect(),
                scale: vec![1.0; n_dims],
            })
            .collect();
        Ok(SynthSpec {
            components,
            period: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_dims(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.n_dims();
        if self.components.is_empty() || d == 0 {
            return Err(GmmError::invalid("synthetic spec needs at least one non-empty component"));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != d || c.scale.len() != d {
                return Err(GmmError::invalid(format!("component {i}: dimension differs from {d}")));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(GmmError::invalid(format!("component {i}: bad weight")));
            }
            if c.mean.iter().chain(&c.scale).any(|v| !v.is_finite()) || c.scale.iter().any(|s| *s <= 0.0) {
                return Err(GmmError::invalid(format!("component {i}: bad mean or scale")));
            }
        }
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GmmError::invalid(format!("weights sum to {sum}, not 1")));
        }
        if let Some(p) = self.period {
            let slots = self.slots(p);
            if p == 0 || slots.len() != p {
                return Err(GmmError::invalid(format!("weights are not multiples of 1/{p}")));
            }
        }
        Ok(())
    }

    /// Component order over one period.
    fn slots(&self, period: usize) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(g, c)| std::iter::repeat_n(g, (c.weight * period as f64).round() as usize))
            .collect()
    }

    /// The generating mixture as a model.
    pub fn to_model(&self) -> Result<GmmModel> {
        let means: Vec<Vec<f64>> = self.components.iter().map(|c| c.mean.clone()).collect();
        let dcovs: Vec<Vec<f64>> = self
            .components
            .iter()
            .map(|c| c.scale.iter().map(|s| s * s).collect())
            .collect();
        let hefts: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        GmmModel::from_params(&means, &dcovs, &hefts)
    }

    /// Draws `n` samples and the component each came from.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
        self.validate()?;
        if n == 0 {
            return Err(GmmError::invalid("number of samples must be at least 1"));
        }
        let d = self.n_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots = self.period.map(|p| self.slots(p));
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let g = match &slots {
                Some(s) => s[i % s.len()],
                None => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    self.components
                        .iter()
                        .position(|c| {
                            acc += c.weight;
                            c.weight > 0.0 && u < acc
                        })
                        .unwrap_or(self.components.len() - 1)
                }
            };
            let c = &self.components[g];
            for (m, s) in c.mean.iter().zip(&c.scale) {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + s * z);
            }
            labels.push(g);
        }
        Ok((Dataset::from_flat(data, d)?, labels))
    }
}
