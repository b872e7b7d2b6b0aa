//! Numeric core for debiasing observational CATE estimates with randomized trials.
//!
//! A confounded observational cohort yields a biased treatment-effect curve
//! `omega_k(x)`. Each trial for treatment `k` identifies the gap
//! `eta_k(x) = tau_k(x) - omega_k(x)` on its own covariate support. The gap is
//! fitted either from one trial by least squares, or jointly across trials with
//! a linear mixed model that shares fixed effects and keeps per-trial random
//! deviations. The debiased effect is then `omega_k(x) + eta_k(x)` everywhere.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel execution
//! and the command-line front end live in `deconfound-lab`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod datagen;
pub mod deconfound;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mixedfx;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod regress;
pub mod scenario;
pub mod seed;
pub mod simplex;

mod math;

pub use crate::data::{ArmData, ObservationalDataset, RctDataset};
pub use crate::deconfound::{EtaMode, EtaModel, PseudoOutcome, PseudoSignal};
pub use crate::error::{Error, Result};
pub use crate::mixedfx::{MixedFit, MixedModelSpec, VarianceComponents};
pub use crate::model::{Basis, EvalGrid, Interval, Region, SupportRegion};
pub use crate::regress::{CateModel, FitResult};
pub use crate::scenario::{OutcomeTerm, ScenarioSpec, Shape, TreatProbs};
pub use crate::seed::SeedSpec;
