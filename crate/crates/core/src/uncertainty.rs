//! Entropy, posterior target label uncertainty (PTLU) and its empirical version
//! (EPTLU), Fano-type lower bounds on target risk, and the harnesses that check
//! those bounds and the EPTLU → PTLU convergence empirically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Label, PointId, Sample, UdaClass};
use crate::par;
use crate::posterior::{aggregate, pair_groups, posterior_finite, posterior_infinite, Posterior, SoftPrediction};
use crate::risk::{
    optimal_samplewise_risk_soft, samplewise_risk_soft, target_risk, Learner, LearnerInput, Observation, OptimalLearner,
};
use crate::sampling::{draw_instance_with, draw_sample_with, PointSampler, RngSpec, UdaInstance};

/// Slack allowed before a bound counts as violated.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyBase {
    #[default]
    Bits,
    Nats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub base: EntropyBase,
}

impl EntropyConfig {
    pub const BITS: Self = Self { base: EntropyBase::Bits };
    pub const NATS: Self = Self { base: EntropyBase::Nats };

    pub fn unit(&self) -> &'static str {
        match self.base {
            EntropyBase::Bits => "bits",
            EntropyBase::Nats => "nats",
        }
    }

    fn scale(&self) -> f64 {
        match self.base {
            EntropyBase::Bits => std::f64::consts::LOG2_E,
            EntropyBase::Nats => 1.0,
        }
    }
}

/// `−Σ p log p` with `0·log 0 = 0`.
pub fn entropy(dist: &[f64], cfg: EntropyConfig) -> f64 {
    let h: f64 = dist.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    (h * cfg.scale()).max(0.0)
}

/// `U = Σ_x q(x)·H(ρ^A(·|x))` from an aggregate covering `Ω(q)`.
pub fn ptlu_soft(soft: &SoftPrediction, q: &FiniteDistribution, cfg: EntropyConfig) -> f64 {
    q.support()
        .iter()
        .map(|&x| q.mass(x) * entropy(soft.get(x).expect("aggregate covers the target support"), cfg))
        .sum()
}

pub fn ptlu(rho: &Posterior, q: &FiniteDistribution, cfg: EntropyConfig) -> f64 {
    ptlu_soft(&aggregate(rho, q.support()), q, cfg)
}

/// `Ũ = (1/n)·Σ_{x ∈ xt} H(ρ^A(·|x))`, duplicates counted with multiplicity.
pub fn eptlu(rho: &Posterior, s: &Sample, cfg: EntropyConfig) -> Result<f64> {
    eptlu_points(rho, &s.xt, cfg)
}

pub fn eptlu_points(rho: &Posterior, xt: &[PointId], cfg: EntropyConfig) -> Result<f64> {
    if xt.is_empty() {
        return Err(Error::EmptyTargetSample);
    }
    let soft = aggregate(rho, xt);
    let mut counts = vec![0usize; soft.len()];
    for x in xt {
        counts[soft.points().binary_search(x).expect("aggregated")] += 1;
    }
    let total: f64 = counts.iter().enumerate().map(|(i, &c)| c as f64 * entropy(soft.row(i), cfg)).sum();
    Ok(total / xt.len() as f64)
}

fn require_bits(cfg: EntropyConfig) -> Result<()> {
    match cfg.base {
        EntropyBase::Bits => Ok(()),
        EntropyBase::Nats => Err(Error::WrongBase),
    }
}

/// Lower bound on any learner's sample-wise risk from the label uncertainty `u` (bits):
/// `(u − 1)/log₂(k − 1)` for `k > 2`, `u²/4 + e*²` for `k = 2`.
pub fn fano_bound(u: f64, k: usize, e_star: Option<f64>, cfg: EntropyConfig) -> Result<f64> {
    require_bits(cfg)?;
    match k {
        0 | 1 => Err(Error::InvalidArgument(format!("need at least 2 labels, got {k}"))),
        2 => {
            let e = e_star.ok_or(Error::MissingEStar)?;
            Ok(u * u / 4.0 + e * e)
        }
        _ => Ok((u - 1.0) / ((k - 1) as f64).log2()),
    }
}

/// Inputs echoed with a bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub u: Option<f64>,
    pub u_tilde: Option<f64>,
    pub k: usize,
    pub e_star: Option<f64>,
    pub t: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
    pub confidence: Option<f64>,
    pub variance: Option<f64>,
    /// Posterior mass of the ground truths on which the bound fails.
    pub failure_mass: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: f64,
    pub risk: f64,
    pub slack: f64,
    pub holds: bool,
    pub inputs: BoundInputs,
}

impl BoundReport {
    pub fn new(bound: f64, risk: f64, inputs: BoundInputs) -> Self {
        let slack = risk - bound;
        Self { bound, risk, slack, holds: slack >= -BOUND_TOLERANCE, inputs }
    }
}

/// Bound on `R(g|q, f)` holding with posterior probability at least `1 − δ`:
/// the Fano form minus `√(Var_ρ[R(g|q, f)]/δ)`.
///
/// `risk` in the report is `E_ρ R(g|q, f)`; `failure_mass` is the exact
/// posterior mass on which `R(g|q, f)` falls below the bound.
pub fn risk_lower_bound_for_g(
    g: &[Label],
    source: &Sample,
    rho: &Posterior,
    q: &FiniteDistribution,
    e_star: Option<f64>,
    delta: f64,
    cfg: EntropyConfig,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if source.xs.iter().zip(&source.ys).any(|(&x, &y)| g[x] != y) {
        return Err(Error::InconsistentClassifier("g".into()));
    }
    let family = rho.family();
    let soft = aggregate(rho, q.support());
    let u = ptlu_soft(&soft, q, cfg);
    let fano = fano_bound(u, family.k(), e_star, cfg)?;
    let risks: Vec<(f64, f64)> = rho
        .probs()
        .iter()
        .map(|&(f, w)| (w, target_risk(g, q, family.get(f).table())))
        .collect();
    let mean: f64 = risks.iter().map(|(w, r)| w * r).sum();
    let variance: f64 = risks.iter().map(|(w, r)| w * (r - mean) * (r - mean)).sum();
    let bound = fano - (variance / delta).sqrt();
    let failure_mass = risks.iter().filter(|(_, r)| r - bound < -BOUND_TOLERANCE).map(|(w, _)| w).sum();
    Ok(BoundReport::new(
        bound,
        mean,
        BoundInputs {
            u: Some(u),
            k: family.k(),
            e_star,
            delta: Some(delta),
            variance: Some(variance),
            failure_mass: Some(failure_mass),
            ..Default::default()
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EptluBound {
    pub bound: f64,
    /// `1 − exp(−2nt²/(log₂ k)²)`.
    pub confidence: f64,
    pub inputs: BoundInputs,
}

impl EptluBound {
    pub fn against(&self, risk: f64) -> BoundReport {
        BoundReport::new(self.bound, risk, self.inputs)
    }
}

/// `1 − exp(−2nt²/(log₂ k)²)`.
pub fn hoeffding_confidence(n: usize, t: f64, k: usize) -> f64 {
    1.0 - hoeffding_tail(n, t, k)
}

/// `exp(−2nt²/(log₂ k)²)`.
pub fn hoeffding_tail(n: usize, t: f64, k: usize) -> f64 {
    let range = (k as f64).log2();
    (-2.0 * n as f64 * t * t / (range * range)).exp()
}

/// Fano bound with `U` replaced by `Ũ − t`, valid with the stated confidence.
/// `(Ũ − t)` is clamped at 0 in the binary form.
pub fn eptlu_bound(u_tilde: f64, t: f64, n: usize, k: usize, e_star: Option<f64>, cfg: EntropyConfig) -> Result<EptluBound> {
    require_bits(cfg)?;
    if !(t > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need t > 0 and n >= 1, got t = {t}, n = {n}")));
    }
    let shifted = u_tilde - t;
    let bound = if k == 2 { fano_bound(shifted.max(0.0), k, e_star, cfg)? } else { fano_bound(shifted, k, e_star, cfg)? };
    let confidence = hoeffding_confidence(n, t, k);
    Ok(EptluBound {
        bound,
        confidence,
        inputs: BoundInputs {
            u_tilde: Some(u_tilde),
            k,
            e_star,
            t: Some(t),
            n: Some(n),
            confidence: Some(confidence),
            ..Default::default()
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerViolations {
    pub learner: String,
    pub checks: usize,
    pub violations: usize,
    pub min_slack: f64,
}

/// Outcome of [`verify_bounds`]. Violations are data, not errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub trials: usize,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    /// Sample-wise Fano bound checks over all (trial, learner) pairs.
    pub fano_checks: usize,
    pub fano_violations: usize,
    pub min_fano_slack: f64,
    /// Trials where the exact posterior failure mass of the `g` bound exceeded `δ`.
    pub g_bound_mass_violations: usize,
    pub max_g_failure_mass: f64,
    /// Trials where the drawn ground truth fell below the `g` bound.
    pub g_bound_events: usize,
    pub g_bound_event_rate: f64,
    pub per_learner: Vec<LearnerViolations>,
}

struct TrialOutcome {
    slacks: Vec<f64>,
    g_failure_mass: f64,
    g_event: bool,
}

/// Draws `trials` instances and samples, and checks every learner against the
/// Fano bound and the optimal table against the `1 − δ` bound on `R(g|q, f)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_bounds(
    class: &UdaClass,
    m: usize,
    n: usize,
    trials: usize,
    zoo: &[Box<dyn Learner>],
    delta: f64,
    rng: &RngSpec,
    cfg: EntropyConfig,
) -> Result<ViolationReport> {
    require_bits(cfg)?;
    let k = class.k();
    let family = class.family();
    let outcomes = par::try_map_range(trials, |t| -> Result<TrialOutcome> {
        let mut r = rng.trial(0, t as u64).rng();
        let inst = draw_instance_with(class, &mut r);
        let s = draw_sample_with(&inst, m, n, &mut r);
        let rho = posterior_finite(class, &s)?;
        let soft = aggregate(&rho, inst.q.support());
        let u = ptlu_soft(&soft, &inst.q, cfg);
        let e_star = optimal_samplewise_risk_soft(&soft, &inst.q);
        let fano = fano_bound(u, k, Some(e_star), cfg)?;
        let input = LearnerInput { observation: Observation::Finite(&s), posterior: &rho };
        let slacks = zoo
            .iter()
            .map(|l| samplewise_risk_soft(&l.learn(&input), family, &soft, &inst.q) - fano)
            .collect();
        let g = OptimalLearner::table(&rho);
        let rep = risk_lower_bound_for_g(&g, &s, &rho, &inst.q, Some(e_star), delta, cfg)?;
        let g_event = target_risk(&g, &inst.q, inst.f.table()) - rep.bound < -BOUND_TOLERANCE;
        Ok(TrialOutcome { slacks, g_failure_mass: rep.inputs.failure_mass.unwrap_or(0.0), g_event })
    })?;

    let mut per_learner: Vec<LearnerViolations> = zoo
        .iter()
        .map(|l| LearnerViolations { learner: l.name(), checks: 0, violations: 0, min_slack: f64::INFINITY })
        .collect();
    for o in &outcomes {
        for (lv, &sl) in per_learner.iter_mut().zip(&o.slacks) {
            lv.checks += 1;
            lv.violations += usize::from(sl < -BOUND_TOLERANCE);
            lv.min_slack = lv.min_slack.min(sl);
        }
    }
    let g_bound_events = outcomes.iter().filter(|o| o.g_event).count();
    Ok(ViolationReport {
        trials,
        k,
        m,
        n,
        delta,
        fano_checks: per_learner.iter().map(|l| l.checks).sum(),
        fano_violations: per_learner.iter().map(|l| l.violations).sum(),
        min_fano_slack: per_learner.iter().map(|l| l.min_slack).fold(f64::INFINITY, f64::min),
        g_bound_mass_violations: outcomes.iter().filter(|o| o.g_failure_mass > delta).count(),
        max_g_failure_mass: outcomes.iter().map(|o| o.g_failure_mass).fold(0.0, f64::max),
        g_bound_events,
        g_bound_event_rate: if trials > 0 { g_bound_events as f64 / trials as f64 } else { 0.0 },
        per_learner,
    })
}

/// Quantities governing how fast `Ũ` approaches `U` for one instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// `min_{x ∈ Ω(q), y} ρ^A(y|x, p, q, f_p)`.
    pub beta: f64,
    /// Family members consistent with `f_p`.
    pub k_consistent: usize,
    /// Prior mass of the consistent set.
    pub s: f64,
    pub alpha_p: f64,
    pub alpha_q: f64,
    pub n_p: usize,
    pub n_q: usize,
}

pub fn convergence_diagnostics(class: &UdaClass, inst: &UdaInstance) -> Result<ConvergenceDiagnostics> {
    let inf = posterior_infinite(class, &inst.p, &inst.q, &inst.f)?;
    let soft = aggregate(&inf.posterior, inst.q.support());
    let beta = soft.rows().flat_map(|(_, r)| r.iter().copied()).fold(f64::INFINITY, f64::min);
    Ok(ConvergenceDiagnostics {
        beta,
        k_consistent: inf.k,
        s: inf.s,
        alpha_p: inst.p.min_support_mass(),
        alpha_q: inst.q.min_support_mass(),
        n_p: inst.p.support().len(),
        n_q: inst.q.support().len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub median_gap: f64,
    pub mean_gap: f64,
    pub q90_gap: f64,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub u: f64,
    pub diagnostics: ConvergenceDiagnostics,
    /// `β > 0` and the last schedule point exceeds both support sizes.
    pub assumptions_hold: bool,
    pub rows: Vec<ConvergenceRow>,
}

/// Lower median of a sample (sorted copy).
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Order statistic at rank `⌈q·len⌉ − 1`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[rank]
}

/// `|U(p, q, f_p) − Ũ(s_{m,n})|` over `trials` samples per schedule point.
pub fn convergence_study(
    class: &UdaClass,
    inst: &UdaInstance,
    schedule: &[(usize, usize)],
    trials: usize,
    rng: &RngSpec,
    cfg: EntropyConfig,
) -> Result<ConvergenceReport> {
    let diagnostics = convergence_diagnostics(class, inst)?;
    let inf = posterior_infinite(class, &inst.p, &inst.q, &inst.f)?;
    let u = ptlu(&inf.posterior, &inst.q, cfg);
    let ps = PointSampler::new(&inst.p);
    let qs = PointSampler::new(&inst.q);
    let mut rows = Vec::with_capacity(schedule.len());
    for (block, &(m, n)) in schedule.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyTargetSample);
        }
        let gaps = par::try_map_range(trials, |t| -> Result<f64> {
            let mut r = rng.trial(block as u64, t as u64).rng();
            let xs = ps.draw_n(m, &mut r);
            let xt = qs.draw_n(n, &mut r);
            let ys = xs.iter().map(|&x| inst.f.label(x)).collect();
            let s = Sample { xs, xt, ys };
            let rho = posterior_finite(class, &s)?;
            Ok((u - eptlu(&rho, &s, cfg)?).abs())
        })?;
        rows.push(ConvergenceRow {
            m,
            n,
            trials,
            median_gap: median(&gaps),
            mean_gap: gaps.iter().sum::<f64>() / trials.max(1) as f64,
            q90_gap: quantile(&gaps, 0.9),
            max_gap: gaps.iter().copied().fold(0.0, f64::max),
        });
    }
    let assumptions_hold = diagnostics.beta > 0.0
        && schedule.last().is_some_and(|&(m, n)| m > diagnostics.n_p && n > diagnostics.n_q);
    Ok(ConvergenceReport { u, diagnostics, assumptions_hold, rows })
}

/// One infinite-sample observation `f_p` of a `(p, q)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Family index of the first classifier with this restriction.
    pub representative: usize,
    pub size: usize,
    /// Conditional prior mass of the observation.
    pub mass: f64,
    pub e_star: f64,
    pub ptlu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub entries: Vec<usize>,
    pub weight: f64,
    /// `E_f e*(p, q, f_p)` under the conditional prior.
    pub e_star: f64,
    /// `E_f U(p, q, f_p)` under the conditional prior.
    pub ptlu: f64,
    pub groups: Vec<GroupSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteSummary {
    pub r_star: f64,
    pub ptlu: f64,
    pub pairs: Vec<PairSummary>,
}

/// `e*` and `U` for every infinite-sample observation of a class, and `R*_∞`.
pub fn infinite_summary(class: &UdaClass, cfg: EntropyConfig) -> InfiniteSummary {
    let family = class.family();
    let pairs: Vec<PairSummary> = pair_groups(class)
        .into_iter()
        .map(|pg| {
            let groups = par::map_range(pg.groups.len(), |i| {
                let g = &pg.groups[i];
                let soft = aggregate(&g.posterior(family), pg.q.support());
                GroupSummary {
                    representative: g.members[0].0,
                    size: g.members.len(),
                    mass: g.mass,
                    e_star: optimal_samplewise_risk_soft(&soft, &pg.q),
                    ptlu: ptlu_soft(&soft, &pg.q, cfg),
                }
            });
            PairSummary {
                entries: pg.entries,
                weight: pg.weight,
                e_star: groups.iter().map(|g| g.mass * g.e_star).sum(),
                ptlu: groups.iter().map(|g| g.mass * g.ptlu).sum(),
                groups,
            }
        })
        .collect();
    InfiniteSummary {
        r_star: pairs.iter().map(|p| p.weight * p.e_star).sum(),
        ptlu: pairs.iter().map(|p| p.weight * p.ptlu).sum(),
        pairs,
    }
}
