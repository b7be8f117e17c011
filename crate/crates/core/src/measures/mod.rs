//! Discrepancy measures between source and target distributions: f-divergences,
//! Wasserstein distances, the HΔH divergence, the 𝒴-discrepancy and the
//! marginal transfer exponent.

mod divergence;
mod hypothesis;
mod transport;

pub use divergence::{f_divergence, FDivergence};
pub use hypothesis::{
    h_delta_h, hdh_pair_value, transfer_exponent, y_discrepancy, y_discrepancy_value, HdhOptions, TransferGrids,
};
pub use transport::{transport_cost, wasserstein, TRANSPORT_LIMIT};

use serde::{Serialize, Serializer};

/// A non-negative real or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasureValue {
    Finite(f64),
    Infinity,
}

impl MeasureValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, MeasureValue::Infinity)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            MeasureValue::Finite(v) => Some(v),
            MeasureValue::Infinity => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Serialize for MeasureValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MeasureValue::Finite(v) => s.serialize_f64(*v),
            MeasureValue::Infinity => s.serialize_str("Infinity"),
        }
    }
}

/// Evidence for a reported value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Family indices of the maximizing pair.
    Pair { h: usize, h2: usize },
    /// Family index of the maximizing classifier.
    Classifier { h: usize },
    /// Certified grid point of the transfer inequality.
    TransferCertificate { gamma: f64, c: f64 },
    /// A classifier that errs on the target but never on the source.
    SourceBlind { h: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureResult {
    pub name: String,
    pub value: MeasureValue,
    pub witness: Option<Witness>,
    /// Set when the value comes from a subsample and only bounds the true value from below.
    pub lower_bound: bool,
}

impl MeasureResult {
    pub(crate) fn new(name: impl Into<String>, value: MeasureValue, witness: Option<Witness>) -> Self {
        Self { name: name.into(), value, witness, lower_bound: false }
    }
}
