//! Target risks, learners, sample-wise risks, the optimal learner and the
//! overall risks `R(𝒜)` and `R*_∞`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassifierFamily, FiniteDistribution, Label, PointId, RestrictedTable, Sample, UdaClass};
use crate::par;
use crate::posterior::{self, aggregate, argmax, pair_groups, posterior_finite, Posterior, SoftPrediction};
use crate::sampling::{draw_instance_with, draw_sample_with, enumerate_samples, RngSpec, UdaInstance};

/// `R(g|q, f) = Σ_x q(x)·1{g(x) ≠ f(x)}`.
pub fn target_risk(g: &[Label], q: &FiniteDistribution, f: &[Label]) -> f64 {
    q.support().iter().filter(|&&x| g[x] != f[x]).map(|&x| q.mass(x)).sum()
}

/// What a learner sees.
#[derive(Clone, Copy, Debug)]
pub enum Observation<'a> {
    Finite(&'a Sample),
    Infinite { p: &'a FiniteDistribution, q: &'a FiniteDistribution, fp: &'a RestrictedTable },
}

/// An observation together with the analyst's posterior for it.
#[derive(Clone, Copy, Debug)]
pub struct LearnerInput<'a> {
    pub observation: Observation<'a>,
    pub posterior: &'a Posterior,
}

/// One classifier in a learner's output distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// A family member, by index.
    Member(usize),
    /// An arbitrary full label table (e.g. a hardened aggregate outside the family).
    Table(Arc<[Label]>),
}

impl Atom {
    pub fn table<'a>(&'a self, family: &'a ClassifierFamily) -> &'a [Label] {
        match self {
            Atom::Member(i) => family.get(*i).table(),
            Atom::Table(t) => t,
        }
    }
}

/// A distribution over classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerOutput {
    atoms: Vec<(Atom, f64)>,
}

impl LearnerOutput {
    /// Normalizes positive weights.
    pub fn new(mut atoms: Vec<(Atom, f64)>) -> Self {
        atoms.retain(|(_, w)| *w > 0.0);
        assert!(!atoms.is_empty(), "learner output needs positive mass");
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        for (_, w) in atoms.iter_mut() {
            *w /= total;
        }
        Self { atoms }
    }

    pub fn point(atom: Atom) -> Self {
        Self { atoms: vec![(atom, 1.0)] }
    }

    pub fn atoms(&self) -> &[(Atom, f64)] {
        &self.atoms
    }

    /// `E_{g∼𝒜} R(g|q, f)`.
    pub fn target_risk(&self, family: &ClassifierFamily, q: &FiniteDistribution, f: &[Label]) -> f64 {
        self.atoms.iter().map(|(a, w)| w * target_risk(a.table(family), q, f)).sum()
    }
}

/// A learning rule `𝒜_{m,n}`: observation → distribution over classifiers.
pub trait Learner: Send + Sync {
    fn name(&self) -> String;
    fn learn(&self, input: &LearnerInput<'_>) -> LearnerOutput;
}

/// Point mass on the hardened aggregate `argmax_y ρ^A(y|x)` over the whole domain.
#[derive(Clone, Copy, Debug, Default)]
pub struct OptimalLearner;

impl OptimalLearner {
    pub fn table(rho: &Posterior) -> Arc<[Label]> {
        let n = rho.family().domain_len();
        let all: Vec<PointId> = (0..n).collect();
        posterior::harden(&aggregate(rho, &all)).labels().into()
    }
}

impl Learner for OptimalLearner {
    fn name(&self) -> String {
        "optimal".into()
    }

    fn learn(&self, input: &LearnerInput<'_>) -> LearnerOutput {
        LearnerOutput::point(Atom::Table(Self::table(input.posterior)))
    }
}

/// Outputs the posterior itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct GibbsLearner;

impl Learner for GibbsLearner {
    fn name(&self) -> String {
        "gibbs".into()
    }

    fn learn(&self, input: &LearnerInput<'_>) -> LearnerOutput {
        LearnerOutput::new(input.posterior.probs().iter().map(|&(f, w)| (Atom::Member(f), w)).collect())
    }
}

/// Uniform over every family member consistent with the observation, ignoring the prior.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformConsistentLearner;

impl Learner for UniformConsistentLearner {
    fn name(&self) -> String {
        "uniform-consistent".into()
    }

    fn learn(&self, input: &LearnerInput<'_>) -> LearnerOutput {
        let family = input.posterior.family();
        let set = match input.observation {
            Observation::Finite(s) => posterior::consistent_set(family, &s.xs, &s.ys),
            Observation::Infinite { fp, .. } => {
                (0..family.len()).filter(|&g| fp.is_matched_by(family.get(g))).collect()
            }
        };
        if set.is_empty() {
            return GibbsLearner.learn(input);
        }
        LearnerOutput::new(set.into_iter().map(|g| (Atom::Member(g), 1.0)).collect())
    }
}

/// Always returns the same classifier.
#[derive(Clone, Debug)]
pub struct FixedClassifierLearner {
    pub name: String,
    pub table: Arc<[Label]>,
}

impl FixedClassifierLearner {
    pub fn member(family: &ClassifierFamily, g: usize) -> Self {
        let c = family.get(g);
        Self { name: format!("fixed:{}", c.id()), table: c.table().into() }
    }
}

impl Learner for FixedClassifierLearner {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn learn(&self, _: &LearnerInput<'_>) -> LearnerOutput {
        LearnerOutput::point(Atom::Table(self.table.clone()))
    }
}

/// A deterministic pseudo-random rule: for each observation it mixes up to
/// three classifiers drawn from family members, uniform random tables and
/// one-point perturbations of the optimal table.
#[derive(Clone, Copy, Debug)]
pub struct RandomLearner {
    pub seed: u64,
}

fn mix(h: u64, v: u64) -> u64 {
    let mut z = (h ^ v).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn observation_hash(obs: &Observation<'_>) -> u64 {
    match obs {
        Observation::Finite(s) => {
            let mut h = mix(1, s.xs.len() as u64);
            for (&x, &y) in s.xs.iter().zip(&s.ys) {
                h = mix(mix(h, x as u64), u64::from(y));
            }
            h = mix(h, s.xt.len() as u64);
            s.xt.iter().fold(h, |h, &x| mix(h, x as u64))
        }
        Observation::Infinite { fp, q, .. } => {
            let h = fp.iter().fold(2, |h, (x, y)| mix(mix(h, x as u64), u64::from(y)));
            q.support().iter().fold(h, |h, &x| mix(h, x as u64))
        }
    }
}

impl Learner for RandomLearner {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn learn(&self, input: &LearnerInput<'_>) -> LearnerOutput {
        let family = input.posterior.family();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(observation_hash(&input.observation));
        let k = family.k();
        let n = family.domain_len();
        let count = rng.random_range(1..=3);
        let mut atoms = Vec::with_capacity(count);
        for _ in 0..count {
            let atom = match rng.random_range(0..3) {
                0 => Atom::Member(rng.random_range(0..family.len())),
                1 => Atom::Table((0..n).map(|_| rng.random_range(0..k) as Label).collect()),
                _ => {
                    let mut t = OptimalLearner::table(input.posterior).to_vec();
                    let x = rng.random_range(0..n);
                    t[x] = rng.random_range(0..k) as Label;
                    Atom::Table(t.into())
                }
            };
            let w: f64 = -(1.0 - rng.random::<f64>()).ln();
            atoms.push((atom, w.max(1e-9)));
        }
        LearnerOutput::new(atoms)
    }
}

/// Optimal, Gibbs, uniform-consistent and one fixed learner per listed family member.
pub fn standard_zoo(family: &ClassifierFamily, fixed: &[usize]) -> Vec<Box<dyn Learner>> {
    let mut zoo: Vec<Box<dyn Learner>> = vec![Box::new(OptimalLearner), Box::new(GibbsLearner), Box::new(UniformConsistentLearner)];
    zoo.extend(fixed.iter().map(|&g| Box::new(FixedClassifierLearner::member(family, g)) as Box<dyn Learner>));
    zoo
}

/// `1 − ρ^A(y|x)`, summed over the other labels so one-hot rows give exactly zero.
fn off_label_mass(row: &[f64], y: Label) -> f64 {
    row.iter().enumerate().filter(|&(j, _)| j != usize::from(y)).map(|(_, v)| v).sum()
}

/// `e(𝒜; s, q)` from a precomputed aggregate on `Ω(q)`.
pub fn samplewise_risk_soft(out: &LearnerOutput, family: &ClassifierFamily, soft: &SoftPrediction, q: &FiniteDistribution) -> f64 {
    let mut total = 0.0;
    for (i, &x) in soft.points().iter().enumerate() {
        let row = soft.row(i);
        let mut miss = 0.0;
        for (a, w) in &out.atoms {
            miss += w * off_label_mass(row, a.table(family)[x]);
        }
        total += q.mass(x) * miss;
    }
    total
}

/// `e(𝒜; s, q) = Σ_x q(x) Σ_g 𝒜(g)·(1 − ρ^A(g(x)|x))`.
pub fn samplewise_risk(out: &LearnerOutput, rho: &Posterior, q: &FiniteDistribution) -> f64 {
    samplewise_risk_soft(out, rho.family(), &aggregate(rho, q.support()), q)
}

/// `e* = Σ_x q(x)·(1 − max_y ρ^A(y|x))` from a precomputed aggregate on `Ω(q)`.
pub fn optimal_samplewise_risk_soft(soft: &SoftPrediction, q: &FiniteDistribution) -> f64 {
    let mut total = 0.0;
    for (i, &x) in soft.points().iter().enumerate() {
        let row = soft.row(i);
        total += q.mass(x) * off_label_mass(row, argmax(row));
    }
    total
}

pub fn optimal_samplewise_risk(rho: &Posterior, q: &FiniteDistribution) -> f64 {
    optimal_samplewise_risk_soft(&aggregate(rho, q.support()), q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiskMode {
    Exact,
    MonteCarlo { trials: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub value: f64,
    pub standard_error: Option<f64>,
    pub trials: Option<usize>,
    pub method: RiskMethod,
}

impl RiskReport {
    fn exact(value: f64) -> Self {
        Self { value, standard_error: None, trials: None, method: RiskMethod::Exact }
    }

    fn monte_carlo(values: &[f64]) -> Self {
        let t = values.len() as f64;
        let mean = values.iter().sum::<f64>() / t;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            standard_error: Some((var / t).sqrt()),
            trials: Some(values.len()),
            method: RiskMethod::MonteCarlo,
        }
    }
}

fn risk_on_sample(learner: &dyn Learner, class: &UdaClass, inst: &UdaInstance, s: &Sample) -> Result<f64> {
    let rho = posterior_finite(class, s)?;
    let out = learner.learn(&LearnerInput { observation: Observation::Finite(s), posterior: &rho });
    Ok(out.target_risk(class.family(), &inst.q, inst.f.table()))
}

fn expected_risk_exact(learner: &dyn Learner, class: &UdaClass, inst: &UdaInstance, m: usize, n: usize) -> Result<f64> {
    let samples: Vec<(Sample, f64)> = enumerate_samples(inst, m, n)?.collect();
    let vals = par::try_map_range(samples.len(), |i| risk_on_sample(learner, class, inst, &samples[i].0))?;
    Ok(samples.iter().zip(vals).map(|((_, p), v)| p * v).sum())
}

/// `R(𝒜_{m,n}|p, q, f) = E_s E_{g∼𝒜(s)} R(g|q, f)`, with posteriors taken under `class`.
pub fn expected_risk(
    learner: &dyn Learner,
    class: &UdaClass,
    inst: &UdaInstance,
    m: usize,
    n: usize,
    mode: RiskMode,
    rng: &RngSpec,
) -> Result<RiskReport> {
    match mode {
        RiskMode::Exact => Ok(RiskReport::exact(expected_risk_exact(learner, class, inst, m, n)?)),
        RiskMode::MonteCarlo { trials } => {
            check_trials(trials)?;
            let vals = par::try_map_range(trials, |t| {
                let mut r = rng.trial(0, t as u64).rng();
                let s = draw_sample_with(inst, m, n, &mut r);
                risk_on_sample(learner, class, inst, &s)
            })?;
            Ok(RiskReport::monte_carlo(&vals))
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

fn instances(class: &UdaClass) -> Vec<(UdaInstance, f64)> {
    class
        .entries()
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| {
            entry
                .prior()
                .iter()
                .map(move |&(f, w)| (e, f, entry.weight() * w))
        })
        .filter(|&(_, _, w)| w > 0.0)
        .map(|(e, f, w)| (UdaInstance::from_class(class, e, f), w))
        .collect()
}

/// `R(𝒜_{m,n}) = E_{(p,q,f)∼π} R(𝒜_{m,n}|p, q, f)`.
pub fn overall_risk(learner: &dyn Learner, class: &UdaClass, m: usize, n: usize, mode: RiskMode, rng: &RngSpec) -> Result<RiskReport> {
    match mode {
        RiskMode::Exact => {
            let mut total = 0.0;
            for (inst, w) in instances(class) {
                total += w * expected_risk_exact(learner, class, &inst, m, n)?;
            }
            Ok(RiskReport::exact(total))
        }
        RiskMode::MonteCarlo { trials } => {
            check_trials(trials)?;
            let vals = par::try_map_range(trials, |t| {
                let mut r = rng.trial(0, t as u64).rng();
                let inst = draw_instance_with(class, &mut r);
                let s = draw_sample_with(&inst, m, n, &mut r);
                risk_on_sample(learner, class, &inst, &s)
            })?;
            Ok(RiskReport::monte_carlo(&vals))
        }
    }
}

/// `E_π E_s e(𝒜; s, q)`: the overall risk evaluated through sample-wise risks.
/// Equals [`overall_risk`] whenever `f` and `q` are conditionally independent
/// given the sample, e.g. for a single `(p, q)` pair or a prior shared by all entries.
pub fn overall_risk_decomposed(learner: &dyn Learner, class: &UdaClass, m: usize, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for (inst, w) in instances(class) {
        let samples: Vec<(Sample, f64)> = enumerate_samples(&inst, m, n)?.collect();
        let vals = par::try_map_range(samples.len(), |i| {
            let s = &samples[i].0;
            let rho = posterior_finite(class, s)?;
            let out = learner.learn(&LearnerInput { observation: Observation::Finite(s), posterior: &rho });
            Ok::<_, Error>(samplewise_risk(&out, &rho, &inst.q))
        })?;
        total += w * samples.iter().zip(vals).map(|((_, p), v)| p * v).sum::<f64>();
    }
    Ok(total)
}

/// `R(𝒜_∞) = E_π E_{g∼𝒜(p,q,f_p)} R(g|q, f)`.
pub fn overall_risk_infinite(learner: &dyn Learner, class: &UdaClass) -> Result<f64> {
    let family = class.family();
    let mut total = 0.0;
    for pg in pair_groups(class) {
        let vals = par::map_range(pg.groups.len(), |i| {
            let g = &pg.groups[i];
            let rho = g.posterior(family);
            let fp = crate::model::restrict(family.get(g.members[0].0), &pg.p);
            let out = learner.learn(&LearnerInput {
                observation: Observation::Infinite { p: &pg.p, q: &pg.q, fp: &fp },
                posterior: &rho,
            });
            g.members
                .iter()
                .map(|&(f, w)| w * out.target_risk(family, &pg.q, family.get(f).table()))
                .sum::<f64>()
        });
        total += pg.weight * vals.iter().sum::<f64>();
    }
    Ok(total)
}

/// `R*_∞ = Σ_{(p,q)} π(p,q) Σ_f π(f|p,q)·e*(p, q, f_p)`.
pub fn optimal_overall_risk_infinite(class: &UdaClass) -> Result<f64> {
    let family = class.family();
    let mut total = 0.0;
    for pg in pair_groups(class) {
        let vals = par::map_range(pg.groups.len(), |i| {
            let g = &pg.groups[i];
            g.mass * optimal_samplewise_risk(&g.posterior(family), &pg.q)
        });
        total += pg.weight * vals.iter().sum::<f64>();
    }
    Ok(total)
}
