//! Bayesian analysis of finite unsupervised domain adaptation problems under
//! covariate shift.
//!
//! A UDA class `π` is a finite-support distribution over instances `(p, q, f)`:
//! a source distribution `p`, a target distribution `q` and a ground-truth
//! labeling `f` shared by both. Given an `(m, n)`-sample (labeled source points
//! and unlabeled target points) this crate computes
//!
//! - the posterior over the classifier family and its aggregated soft prediction,
//! - the optimal learner, sample-wise risks and the overall risks `R`, `R*_∞`,
//! - the posterior target label uncertainty (PTLU) and its empirical version,
//!   with Fano-type lower bounds on the achievable target risk,
//! - five discrepancy measures between `p` and `q` used as baselines,
//! - discretized versions of four worked circle/line examples.
//!
//! ```
//! use uda_core::worked_examples::{build_example, ExampleSpec};
//! use uda_core::risk::optimal_overall_risk_infinite;
//!
//! let ex = build_example(&ExampleSpec::new(1, 2, 360)).unwrap();
//! let r = optimal_overall_risk_infinite(&ex.class).unwrap();
//! assert!((r - 0.125).abs() < 0.01);
//! ```

pub mod error;
pub mod generate;
pub mod measures;
pub mod model;
mod par;
pub mod posterior;
pub mod risk;
pub mod sampling;
pub mod schema;
pub mod uncertainty;
pub mod worked_examples;

pub use error::{Error, Issue, Result, ValidationError};
pub use model::{
    restrict, ClassEntry, Classifier, ClassifierFamily, Domain, FiniteDistribution, Label, LabelSet, MetricKind, Point,
    PointId, RestrictedTable, Sample, UdaClass,
};
pub use posterior::{Posterior, SoftPrediction};
pub use sampling::{RngSpec, UdaInstance};
pub use uncertainty::{EntropyBase, EntropyConfig};
