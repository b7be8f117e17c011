use serde::{Deserialize, Serialize};

use super::{MeasureResult, MeasureValue};
use crate::model::FiniteDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FDivergence {
    /// `f(t) = t ln t`, in nats.
    Kl,
    /// `f(t) = (t − 1)²`.
    Chi2,
    /// `f(t) = ½|t − 1|`.
    Tv,
}

impl FDivergence {
    pub fn name(&self) -> &'static str {
        match self {
            FDivergence::Kl => "kl",
            FDivergence::Chi2 => "chi2",
            FDivergence::Tv => "tv",
        }
    }

    fn generator(&self, t: f64) -> f64 {
        match self {
            FDivergence::Kl if t == 0.0 => 0.0,
            FDivergence::Kl => t * t.ln(),
            FDivergence::Chi2 => (t - 1.0) * (t - 1.0),
            FDivergence::Tv => 0.5 * (t - 1.0).abs(),
        }
    }

    /// `lim_{t→∞} f(t)/t`; `None` when infinite.
    fn slope_at_infinity(&self) -> Option<f64> {
        match self {
            FDivergence::Kl | FDivergence::Chi2 => None,
            FDivergence::Tv => Some(0.5),
        }
    }
}

/// `D_f(p‖q) = Σ_{x ∈ Ω(q)} q(x)·f(p(x)/q(x)) + p(Ω(p) ∖ Ω(q))·f′(∞)`.
pub fn f_divergence(p: &FiniteDistribution, q: &FiniteDistribution, kind: FDivergence) -> MeasureResult {
    let regular: f64 = q.support().iter().map(|&x| q.mass(x) * kind.generator(p.mass(x) / q.mass(x))).sum();
    let singular: f64 = p.support().iter().filter(|&&x| q.mass(x) == 0.0).map(|&x| p.mass(x)).sum();
    let value = match (singular > 0.0, kind.slope_at_infinity()) {
        (false, _) => MeasureValue::Finite(regular.max(0.0)),
        (true, Some(slope)) => MeasureValue::Finite((regular + singular * slope).max(0.0)),
        (true, None) => MeasureValue::Infinity,
    };
    MeasureResult::new(kind.name(), value, None)
}
