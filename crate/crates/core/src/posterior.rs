//! Consistent sets, exact posteriors over the classifier family, aggregation
//! into soft predictions, and hardening.

use std::collections::HashMap;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    restrict, Classifier, ClassifierFamily, FiniteDistribution, Label, PointId, RestrictedTable, Sample, UdaClass,
};

/// A distribution over family members, stored sparsely in ascending family order.
#[derive(Clone, Debug)]
pub struct Posterior {
    family: Arc<ClassifierFamily>,
    probs: Vec<(usize, f64)>,
}

impl Posterior {
    /// Normalizes non-negative weights; zero weights are dropped.
    pub fn from_weights(family: Arc<ClassifierFamily>, mut weights: Vec<(usize, f64)>) -> Self {
        weights.retain(|&(_, w)| w > 0.0);
        weights.sort_by_key(|&(i, _)| i);
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        for (_, w) in weights.iter_mut() {
            *w /= total;
        }
        Self { family, probs: weights }
    }

    pub fn point_mass(family: Arc<ClassifierFamily>, f: usize) -> Self {
        Self { family, probs: vec![(f, 1.0)] }
    }

    pub fn family(&self) -> &Arc<ClassifierFamily> {
        &self.family
    }

    pub fn probs(&self) -> &[(usize, f64)] {
        &self.probs
    }

    pub fn prob(&self, f: usize) -> f64 {
        self.probs.binary_search_by_key(&f, |&(i, _)| i).map(|j| self.probs[j].1).unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().map(|&(i, _)| i)
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.len() == 1
    }

    pub fn aggregate(&self, query: &[PointId]) -> SoftPrediction {
        aggregate(self, query)
    }

    /// `ρ^A(·|x)` at a single point.
    pub fn aggregate_at(&self, x: PointId) -> Vec<f64> {
        let mut row = vec![0.0; self.family.k()];
        for &(f, w) in &self.probs {
            row[usize::from(self.family.get(f).label(x))] += w;
        }
        row
    }

    /// Draws a family index.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.probs.len() == 1 {
            return self.probs[0].0;
        }
        let idx = WeightedIndex::new(self.probs.iter().map(|&(_, w)| w)).expect("posterior is normalized");
        self.probs[idx.sample(rng)].0
    }

    /// `E_ρ[φ(f)]` over the support.
    pub fn expect(&self, mut phi: impl FnMut(&Classifier) -> f64) -> f64 {
        self.probs.iter().map(|&(f, w)| w * phi(self.family.get(f))).sum()
    }
}

/// Per-point label distributions `ρ^A(·|x)` over an ascending, duplicate-free query set.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPrediction {
    k: usize,
    points: Vec<PointId>,
    probs: Vec<f64>,
}

impl SoftPrediction {
    /// Rows are given per point; `points` is sorted and deduplicated alongside.
    pub fn from_rows(k: usize, mut rows: Vec<(PointId, Vec<f64>)>) -> Self {
        rows.sort_by_key(|(x, _)| *x);
        rows.dedup_by_key(|(x, _)| *x);
        let points = rows.iter().map(|(x, _)| *x).collect();
        let probs = rows.into_iter().flat_map(|(_, r)| {
            assert_eq!(r.len(), k);
            r
        });
        Self { k, points, probs: probs.collect() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, x: PointId) -> Option<&[f64]> {
        self.points.binary_search(&x).ok().map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = (PointId, &[f64])> + '_ {
        self.points.iter().copied().zip(self.probs.chunks_exact(self.k))
    }
}

fn sorted_unique(query: &[PointId]) -> Vec<PointId> {
    let mut pts = query.to_vec();
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// `ρ^A(y|x) = Σ_f ρ(f)·1{f(x) = y}` for each query point.
pub fn aggregate(rho: &Posterior, query: &[PointId]) -> SoftPrediction {
    let points = sorted_unique(query);
    let k = rho.family.k();
    let mut probs = vec![0.0; points.len() * k];
    for &(f, w) in &rho.probs {
        let table = rho.family.get(f).table();
        for (i, &x) in points.iter().enumerate() {
            probs[i * k + usize::from(table[x])] += w;
        }
    }
    SoftPrediction { k, points, probs }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> Label {
    let mut best = 0;
    for (y, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = y;
        }
    }
    best as Label
}

pub fn harden(soft: &SoftPrediction) -> RestrictedTable {
    RestrictedTable::new(soft.points.clone(), (0..soft.len()).map(|i| argmax(soft.row(i))).collect())
}

/// Membership mask of `𝓕[xs, ys]` over the family.
pub fn consistent_mask(family: &ClassifierFamily, xs: &[PointId], ys: &[Label]) -> Vec<bool> {
    assert_eq!(xs.len(), ys.len(), "xs and ys must have equal length");
    let mut pairs: Vec<(PointId, Label)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_unstable();
    pairs.dedup();
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return vec![false; family.len()];
    }
    family
        .classifiers()
        .iter()
        .map(|g| pairs.iter().all(|&(x, y)| g.label(x) == y))
        .collect()
}

/// Family indices of `{g : g(xs) = ys}`; the whole family for an empty sample.
pub fn consistent_set(family: &ClassifierFamily, xs: &[PointId], ys: &[Label]) -> Vec<usize> {
    mask_to_ids(&consistent_mask(family, xs, ys))
}

/// Family indices of `𝓕[f_p] = {g : g = f on Ω(p)}`.
pub fn consistent_set_infinite(family: &ClassifierFamily, p: &FiniteDistribution, f: &Classifier) -> Vec<usize> {
    let fp = restrict(f, p);
    (0..family.len()).filter(|&g| fp.is_matched_by(family.get(g))).collect()
}

fn mask_to_ids(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

fn check_sample(class: &UdaClass, s: &Sample) -> Result<()> {
    let n = class.domain().len();
    let k = class.k();
    if s.xs.len() != s.ys.len() {
        return Err(Error::InvalidArgument(format!("{} source points but {} labels", s.xs.len(), s.ys.len())));
    }
    if let Some(&x) = s.xs.iter().chain(&s.xt).find(|&&x| x >= n) {
        return Err(Error::InvalidArgument(format!("point id {x} outside a domain of {n} points")));
    }
    if let Some(&y) = s.ys.iter().find(|&&y| usize::from(y) >= k) {
        return Err(Error::InvalidArgument(format!("label index {y} out of range for k = {k}")));
    }
    Ok(())
}

fn log_likelihood(d: &FiniteDistribution, xs: &[PointId]) -> f64 {
    xs.iter().map(|&x| d.mass(x).ln()).sum()
}

/// `ρ(f|s) ∝ Σ_e w_e · prior_e(f) · p_e^m(xs) · q_e^n(xt) · 1{f ∈ 𝓕[xs, ys]}`, in log space.
pub fn posterior_finite(class: &UdaClass, s: &Sample) -> Result<Posterior> {
    check_sample(class, s)?;
    let family = class.family();
    let mask = consistent_mask(family, &s.xs, &s.ys);
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for e in class.entries() {
        if e.weight() <= 0.0 {
            continue;
        }
        let ll = e.weight().ln() + log_likelihood(e.p(), &s.xs) + log_likelihood(e.q(), &s.xt);
        if ll == f64::NEG_INFINITY {
            continue;
        }
        terms.extend(e.prior().iter().filter(|&&(f, _)| mask[f]).map(|&(f, w)| (f, ll + w.ln())));
    }
    let max = terms.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
    if terms.is_empty() || !max.is_finite() {
        return Err(Error::ZeroEvidence);
    }
    let mut acc: HashMap<usize, f64> = HashMap::with_capacity(terms.len());
    for (f, l) in terms {
        *acc.entry(f).or_default() += (l - max).exp();
    }
    Ok(Posterior::from_weights(family.clone(), acc.into_iter().collect()))
}

/// An infinite-sample posterior together with its normalizer.
#[derive(Clone, Debug)]
pub struct InfinitePosterior {
    pub posterior: Posterior,
    /// `S`: prior mass of `𝓕[f_p]` under `π_{F|P,Q}(·|p, q)`.
    pub s: f64,
    /// `K`: number of family members consistent with `f_p`.
    pub k: usize,
}

/// `ρ_∞(f|p, q, f_p) ∝ π_{F|P,Q}(f|p, q) · 1{f_p matches}`.
pub fn posterior_infinite(
    class: &UdaClass,
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    f: &Classifier,
) -> Result<InfinitePosterior> {
    posterior_infinite_restricted(class, p, q, &restrict(f, p))
}

pub fn posterior_infinite_restricted(
    class: &UdaClass,
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    fp: &RestrictedTable,
) -> Result<InfinitePosterior> {
    let prior = class.conditional_prior(p, q).ok_or(Error::UnknownPair)?;
    let family = class.family();
    let kept: Vec<(usize, f64)> = prior.into_iter().filter(|&(f, _)| fp.is_matched_by(family.get(f))).collect();
    let s: f64 = kept.iter().map(|&(_, w)| w).sum();
    if kept.is_empty() || s <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let k = family.classifiers().iter().filter(|g| fp.is_matched_by(g)).count();
    Ok(InfinitePosterior { posterior: Posterior::from_weights(family.clone(), kept), s, k })
}

/// Prior members of one `(p, q)` pair that share a restriction to `Ω(p)`.
#[derive(Clone, Debug)]
pub struct RestrictionGroup {
    /// `(family index, conditional prior mass)` in family order.
    pub members: Vec<(usize, f64)>,
    /// Total conditional prior mass `S` of the group.
    pub mass: f64,
}

impl RestrictionGroup {
    pub fn posterior(&self, family: &Arc<ClassifierFamily>) -> Posterior {
        Posterior::from_weights(family.clone(), self.members.clone())
    }
}

/// A distinct `(p, q)` pair of a class with its merged weight and restriction groups.
#[derive(Clone, Debug)]
pub struct PairGroups {
    pub entries: Vec<usize>,
    pub weight: f64,
    pub p: Arc<FiniteDistribution>,
    pub q: Arc<FiniteDistribution>,
    pub groups: Vec<RestrictionGroup>,
}

/// Partitions the conditional prior of every distinct `(p, q)` pair by `f_p`.
/// Each group is one possible infinite-sample observation.
pub fn pair_groups(class: &UdaClass) -> Vec<PairGroups> {
    let family = class.family();
    let mut seen = vec![false; class.entries().len()];
    let mut out = Vec::new();
    for (i, e) in class.entries().iter().enumerate() {
        if seen[i] || e.weight() <= 0.0 {
            continue;
        }
        let entries = class.entries_matching(e.p(), e.q());
        for &j in &entries {
            seen[j] = true;
        }
        let weight = entries.iter().map(|&j| class.entry(j).weight()).sum();
        let prior = class.conditional_prior(e.p(), e.q()).expect("pair has positive weight");
        let support = e.p().support();
        let mut index: HashMap<Vec<Label>, usize> = HashMap::new();
        let mut groups: Vec<RestrictionGroup> = Vec::new();
        for (f, w) in prior {
            let table = family.get(f).table();
            let key: Vec<Label> = support.iter().map(|&x| table[x]).collect();
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(RestrictionGroup { members: Vec::new(), mass: 0.0 });
                groups.len() - 1
            });
            groups[g].members.push((f, w));
            groups[g].mass += w;
        }
        out.push(PairGroups { entries, weight, p: e.p().clone(), q: e.q().clone(), groups });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassEntry, Domain, LabelSet};
    use crate::sampling::{enumerate_samples, RngSpec, UdaInstance};

    fn cube_family() -> Arc<ClassifierFamily> {
        let cs = (0..8u8)
            .map(|b| Classifier::new(format!("f{b}"), (0..3).map(|i| (b >> i) & 1).collect()))
            .collect();
        Arc::new(ClassifierFamily::new(LabelSet::numbered(2), 3, cs).unwrap())
    }

    fn cube_class(entries: Vec<ClassEntry>) -> UdaClass {
        UdaClass::new(Arc::new(Domain::discrete(3)), cube_family(), entries).unwrap()
    }

    fn dist(v: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_sample_keeps_whole_family() {
        let fam = cube_family();
        assert_eq!(consistent_set(&fam, &[], &[]).len(), 8);
    }

    #[test]
    fn one_labeled_point_leaves_four() {
        let fam = cube_family();
        let brute: Vec<usize> = (0..8).filter(|&g| fam.get(g).label(1) == 1).collect();
        let got = consistent_set(&fam, &[1], &[1]);
        assert_eq!(got.len(), 4);
        assert_eq!(got, brute);
    }

    #[test]
    fn contradictory_labels_leave_nothing() {
        let fam = cube_family();
        assert!(consistent_set(&fam, &[1, 1], &[0, 1]).is_empty());
    }

    #[test]
    fn infinite_set_matches_finite_set_on_support() {
        let fam = cube_family();
        let p = dist(&[0.5, 0.0, 0.5]);
        for f in fam.classifiers() {
            let xs = p.support().to_vec();
            let ys: Vec<Label> = xs.iter().map(|&x| f.label(x)).collect();
            assert_eq!(consistent_set_infinite(&fam, &p, f), consistent_set(&fam, &xs, &ys));
        }
        let full = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(consistent_set_infinite(&fam, &full, fam.get(6)), vec![6]);
    }

    #[test]
    fn point_mass_prior_gives_point_mass_posterior() {
        let mut prior = [0.0; 8];
        prior[5] = 1.0;
        let c = cube_class(vec![ClassEntry::new(1.0, dist(&[0.5, 0.5, 0.0]), dist(&[0.0, 0.0, 1.0]), &prior)]);
        let inst = UdaInstance::from_class(&c, 0, 5);
        for (s, _) in enumerate_samples(&inst, 2, 1).unwrap() {
            let rho = posterior_finite(&c, &s).unwrap();
            assert_eq!(rho.probs(), &[(5, 1.0)]);
        }
    }

    #[test]
    fn two_entry_posterior_matches_joint_table() {
        let p1 = dist(&[0.5, 0.5, 0.0]);
        let q1 = dist(&[0.0, 0.25, 0.75]);
        let p2 = dist(&[0.2, 0.0, 0.8]);
        let q2 = dist(&[0.6, 0.4, 0.0]);
        let prior1: Vec<f64> = (0..8).map(|i| (i + 1) as f64 / 36.0).collect();
        let prior2: Vec<f64> = (0..8).map(|i| (8 - i) as f64 / 36.0).collect();
        let c = cube_class(vec![ClassEntry::new(0.3, p1, q1, &prior1), ClassEntry::new(0.7, p2, q2, &prior2)]);
        let fam = c.family().clone();
        for x in 0..3 {
            for y in 0..2u8 {
                for t in 0..3 {
                    let s = Sample { xs: vec![x], xt: vec![t], ys: vec![y] };
                    let mut joint = [0.0; 8];
                    for e in c.entries() {
                        for f in 0..8 {
                            if fam.get(f).label(x) == y {
                                joint[f] += e.weight() * e.prior_mass(f) * e.p().mass(x) * e.q().mass(t);
                            }
                        }
                    }
                    let z: f64 = joint.iter().sum();
                    match posterior_finite(&c, &s) {
                        Ok(rho) => {
                            for f in 0..8 {
                                assert!((rho.prob(f) - joint[f] / z).abs() < 1e-12);
                            }
                        }
                        Err(Error::ZeroEvidence) => assert_eq!(z, 0.0),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn impossible_sample_is_zero_evidence() {
        let c = cube_class(vec![ClassEntry::new(1.0, dist(&[1.0, 0.0, 0.0]), dist(&[0.0, 0.0, 1.0]), &[0.125; 8])]);
        let s = Sample { xs: vec![1], xt: vec![], ys: vec![0] };
        assert!(matches!(posterior_finite(&c, &s), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn long_samples_do_not_underflow() {
        let c = cube_class(vec![ClassEntry::new(1.0, dist(&[0.01, 0.99, 0.0]), dist(&[0.0, 0.5, 0.5]), &[0.125; 8])]);
        let inst = UdaInstance::from_class(&c, 0, 3);
        let s = crate::sampling::draw_sample(&inst, 2000, 2000, &RngSpec::new(5, 0));
        let rho = posterior_finite(&c, &s).unwrap();
        assert_eq!(rho.support_len(), 2);
    }

    #[test]
    fn vacuous_conditioning_returns_prior() {
        let mut prior = [0.0; 8];
        prior[1] = 0.25;
        prior[3] = 0.75;
        let p = dist(&[1.0, 0.0, 0.0]);
        let c = cube_class(vec![ClassEntry::new(1.0, p.clone(), dist(&[0.0, 1.0, 0.0]), &prior)]);
        let inf = posterior_infinite(&c, &p, c.entry(0).q(), c.family().get(1)).unwrap();
        assert_eq!(inf.posterior.probs(), &[(1, 0.25), (3, 0.75)]);
        assert_eq!(inf.s, 1.0);
    }

    #[test]
    fn unknown_pair_is_rejected() {
        let p = dist(&[1.0, 0.0, 0.0]);
        let c = cube_class(vec![ClassEntry::new(1.0, p.clone(), p.clone(), &[0.125; 8])]);
        let q = dist(&[0.0, 1.0, 0.0]);
        assert!(matches!(posterior_infinite(&c, &p, &q, c.family().get(0)), Err(Error::UnknownPair)));
    }

    #[test]
    fn covering_sample_matches_infinite_posterior() {
        let p = dist(&[0.5, 0.5, 0.0]);
        let q = dist(&[0.0, 0.5, 0.5]);
        let prior: Vec<f64> = (0..8).map(|i| (i + 1) as f64 / 36.0).collect();
        let c = cube_class(vec![ClassEntry::new(1.0, p.clone(), q.clone(), &prior)]);
        for f in 0..8 {
            let g = c.family().get(f);
            let s = Sample { xs: vec![0, 1], xt: vec![1, 2], ys: vec![g.label(0), g.label(1)] };
            let fin = posterior_finite(&c, &s).unwrap();
            let inf = posterior_infinite(&c, &p, &q, g).unwrap().posterior;
            assert_eq!(fin.support().collect::<Vec<_>>(), inf.support().collect::<Vec<_>>());
            for (a, b) in fin.probs().iter().zip(inf.probs()) {
                assert!((a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggregate_of_point_mass_is_one_hot() {
        let fam = cube_family();
        let rho = Posterior::point_mass(fam.clone(), 6);
        let soft = rho.aggregate(&[2, 0, 1, 1]);
        assert_eq!(soft.points(), &[0, 1, 2]);
        let hard = harden(&soft);
        assert_eq!(hard.labels(), fam.get(6).table());
        assert_eq!(soft.get(1), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn aggregate_matches_posterior_draws() {
        let fam = cube_family();
        let rho = Posterior::from_weights(fam.clone(), (0..8).map(|i| (i, (i * i + 1) as f64)).collect());
        let exact = rho.aggregate_at(2)[1];
        let mut rng = RngSpec::new(17, 0).rng();
        let draws = 100_000;
        let hits = (0..draws).filter(|_| fam.get(rho.draw(&mut rng)).label(2) == 1).count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - exact).abs() <= 3.0 * (exact * (1.0 - exact) / draws as f64).sqrt());
    }

    #[test]
    fn harden_rules() {
        assert_eq!(argmax(&[0.0, 1.0]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.25, 0.75]), 1);
        assert_eq!(argmax(&[0.3, 0.4, 0.4]), 1);
    }

    #[test]
    fn groups_partition_the_prior() {
        let p = dist(&[0.5, 0.5, 0.0]);
        let c = cube_class(vec![
            ClassEntry::new(0.5, p.clone(), dist(&[0.0, 0.0, 1.0]), &[0.125; 8]),
            ClassEntry::new(0.5, p, dist(&[0.0, 0.0, 1.0]), &[0.125; 8]),
        ]);
        let pg = pair_groups(&c);
        assert_eq!(pg.len(), 1);
        assert_eq!(pg[0].entries, vec![0, 1]);
        assert_eq!(pg[0].groups.len(), 4);
        assert!(pg[0].groups.iter().all(|g| g.members.len() == 2 && (g.mass - 0.25).abs() < 1e-15));
    }
}
