//! Diagonal-covariance Gaussian mixture models fitted with multi-threaded
//! k-means and Expectation-Maximisation.
//!
//! ```
//! use gmm_diag::{learn, AssignMode, FitConfig, SynthSpec};
//!
//! let (data, _) = SynthSpec::two_cluster().sample(3000, 1).unwrap();
//! let mut config = FitConfig::new(2);
//! config.rng_seed = 1;
//! let (model, report) = learn(&data, &config).unwrap();
//!
//! let avg = model.avg_log_p(&data).unwrap();
//! assert_eq!(Some(avg), report.final_avg_log_p());
//! let hist = model.norm_hist(&data, AssignMode::ProbDist).unwrap();
//! assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```
//!
//! All reductions run over fixed sample blocks in a fixed order, so results
//! are bit-identical for any thread count.

pub mod bench;
pub mod em;
pub mod error;
pub mod inference;
pub mod io;
pub mod kmeans;
pub mod likelihood;
pub mod model;
pub mod parallel;
pub mod synth;

pub use em::{accumulate_chunk, em_fit, em_step, learn, reduce_and_update, responsibilities};
pub use em::{Accumulators, FitConfig, FitReport};
pub use error::{GmmError, Result};
pub use inference::AssignMode;
pub use kmeans::{DistKind, DistMode, SeedMode};
pub use likelihood::log_add;
pub use model::{Dataset, GmmModel};
pub use parallel::Workers;
pub use synth::SynthSpec;
