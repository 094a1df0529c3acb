//! Wasserstein dropout core.
//!
//! Sub-network based heteroscedastic regression: a dropout network is
//! trained so that the spread of its randomly thinned sub-networks matches
//! the local spread of the data, via a closed-form squared 2-Wasserstein
//! distance between Gaussians. Alongside the method itself the crate
//! carries the usual baselines (MC dropout, parametric Gaussian heads,
//! deep ensembles and their combinations), calibration metrics on
//! normalized residuals, toy data generators and non-i.i.d. split
//! protocols.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! benchmark runner and the CLI live in the `wdrop` companion crate.
//!
//! ```
//! use wdrop_core::nn::{Head, Mlp};
//! use wdrop_core::rng::SeededRng;
//! use wdrop_core::uncertainty::{predict_dropout, wdropout_loss};
//!
//! let mut rng = SeededRng::new(7);
//! let model = Mlp::new(&[1, 8, 8, 1], Head::Point, 0.1, &mut rng).unwrap();
//! let x = wdrop_core::linalg::Matrix::from_rows(&[[0.5]]).unwrap();
//! let pred = predict_dropout(&model, &x, 20, 0.0, &mut rng).unwrap();
//! assert!(pred.sigma.get(0, 0) >= 0.0);
//!
//! // Symmetric sub-network outputs around the target cost nothing.
//! assert_eq!(wdropout_loss(&[1.0, -1.0], 0.0).unwrap(), 0.0);
//! ```
#![no_std]
// `!(x >= 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod experiment;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod uncertainty;

pub use data::{Normalizer, RegressionDataset, SplitKind, SplitPlan, SplitRegime};
pub use experiment::{AggregateSummary, FoldReport};
pub use metrics::EvalReport;
pub use nn::{AdamState, DropoutMask, Head, Mlp};
pub use rng::SeededRng;
pub use uncertainty::{Method, MethodConfig, PredictiveDistribution, TrainedModel};
