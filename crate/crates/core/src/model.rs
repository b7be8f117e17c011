//! The finite data model: domains, distributions on them, classifier tables and
//! UDA classes (finite-support distributions over `(p, q, prior over f)`).
//!
//! Everything here is immutable once built. Constructors validate and report
//! every violated invariant at once.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Issue, ValidationError};

/// Allowed deviation of a mass vector's sum from 1.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// Masses below this are treated as exactly zero.
pub const DUST: f64 = 1e-12;

pub type PointId = usize;
pub type Label = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    AngularDegrees,
    Discrete,
}

/// A point record. Its id is its position in the owning [`Domain`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Point {
    pub coords: Option<Vec<f64>>,
    /// Angle in degrees, in `[0, 360)`.
    pub angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    points: Vec<Point>,
    metric: MetricKind,
}

impl Domain {
    pub fn new(points: Vec<Point>, metric: MetricKind) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        if points.is_empty() {
            err.push(Issue::ShapeMismatch {
                context: "domain".into(),
                detail: "no points".into(),
            });
        }
        match metric {
            MetricKind::AngularDegrees => {
                for (i, pt) in points.iter().enumerate() {
                    match pt.angle {
                        Some(a) if (0.0..360.0).contains(&a) => {}
                        _ => err.push(Issue::ShapeMismatch {
                            context: format!("domain point {i}"),
                            detail: "angular metric needs an angle in [0, 360)".into(),
                        }),
                    }
                }
            }
            MetricKind::Euclidean => {
                let dim = points.first().and_then(|p| p.coords.as_ref()).map(Vec::len);
                for (i, pt) in points.iter().enumerate() {
                    match (&pt.coords, dim) {
                        (Some(c), Some(d)) if d >= 1 && c.len() == d && c.iter().all(|v| v.is_finite()) => {}
                        _ => err.push(Issue::ShapeMismatch {
                            context: format!("domain point {i}"),
                            detail: "euclidean metric needs finite coordinates of one shared dimension >= 1".into(),
                        }),
                    }
                }
            }
            MetricKind::Discrete => {}
        }
        err.into_result(|| Self { points, metric })
    }

    /// `n` anonymous points with no metric.
    pub fn discrete(n: usize) -> Self {
        Self {
            points: vec![Point::default(); n.max(1)],
            metric: MetricKind::Discrete,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, id: PointId) -> &Point {
        &self.points[id]
    }

    pub fn dimension(&self) -> Option<usize> {
        match self.metric {
            MetricKind::Euclidean => self.points[0].coords.as_ref().map(Vec::len),
            _ => None,
        }
    }

    /// Distance under the domain metric; `None` for discrete domains.
    /// Angular distances are geodesic arc lengths in degrees.
    pub fn distance(&self, a: PointId, b: PointId) -> Option<f64> {
        match self.metric {
            MetricKind::Discrete => None,
            MetricKind::Euclidean => {
                let (x, y) = (self.points[a].coords.as_ref()?, self.points[b].coords.as_ref()?);
                Some(x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
            }
            MetricKind::AngularDegrees => {
                let d = (self.points[a].angle? - self.points[b].angle?).abs() % 360.0;
                Some(d.min(360.0 - d))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        if names.len() < 2 || names.len() > usize::from(Label::MAX) + 1 {
            err.push(Issue::ShapeMismatch {
                context: "labels".into(),
                detail: format!("need between 2 and 256 labels, got {}", names.len()),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                err.push(Issue::ShapeMismatch {
                    context: "labels".into(),
                    detail: format!("duplicate label {n:?}"),
                });
            }
        }
        err.into_result(|| Self { names })
    }

    /// Labels named `"0"`, `"1"`, ... `"k-1"`.
    pub fn numbered(k: usize) -> Self {
        Self::new((0..k).map(|i| i.to_string()).collect()).expect("k must be in 2..=256")
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<Label> {
        self.names.iter().position(|n| n == name).map(|i| i as Label)
    }
}

/// A probability vector over the points of a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
    support: Vec<PointId>,
}

impl FiniteDistribution {
    /// Validates and clamps float dust (`< 1e-12`) to zero.
    pub fn new(probs: Vec<f64>) -> Result<Self, ValidationError> {
        Self::with_context(probs, "distribution")
    }

    pub(crate) fn with_context(mut probs: Vec<f64>, context: &str) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > MASS_TOLERANCE {
            err.push(Issue::NonNormalized { context: context.into(), sum });
        }
        for v in probs.iter_mut() {
            if *v < DUST {
                *v = 0.0;
            }
        }
        let support: Vec<PointId> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
        if support.is_empty() {
            err.push(Issue::EmptySupport { context: context.into() });
        }
        err.into_result(|| Self { probs, support })
    }

    pub fn point_mass(len: usize, at: PointId) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self::new(probs).expect("point mass is valid")
    }

    /// Uniform on the given (distinct) point ids.
    pub fn uniform_on(len: usize, ids: &[PointId]) -> Result<Self, ValidationError> {
        let mut probs = vec![0.0; len];
        let w = 1.0 / ids.len().max(1) as f64;
        for &i in ids {
            if i < len {
                probs[i] += w;
            }
        }
        Self::new(probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self, x: PointId) -> f64 {
        self.probs[x]
    }

    /// Ω(·): ids with positive mass, ascending.
    pub fn support(&self) -> &[PointId] {
        &self.support
    }

    pub fn min_support_mass(&self) -> f64 {
        self.support.iter().map(|&i| self.probs[i]).fold(f64::INFINITY, f64::min)
    }
}

/// A hard classifier given by its label table over the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classifier {
    id: String,
    table: Vec<Label>,
}

impl Classifier {
    pub fn new(id: impl Into<String>, table: Vec<Label>) -> Self {
        Self { id: id.into(), table }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn table(&self) -> &[Label] {
        &self.table
    }

    #[inline]
    pub fn label(&self, x: PointId) -> Label {
        self.table[x]
    }

    pub fn agrees_on(&self, other: &Classifier, points: &[PointId]) -> bool {
        points.iter().all(|&x| self.table[x] == other.table[x])
    }
}

/// A label table defined only on a subset of the domain (e.g. f restricted to Ω(p)).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RestrictedTable {
    points: Vec<PointId>,
    labels: Vec<Label>,
}

impl RestrictedTable {
    pub fn new(points: Vec<PointId>, labels: Vec<Label>) -> Self {
        assert_eq!(points.len(), labels.len());
        Self { points, labels }
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, x: PointId) -> Option<Label> {
        self.points.binary_search(&x).ok().map(|i| self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, Label)> + '_ {
        self.points.iter().copied().zip(self.labels.iter().copied())
    }

    /// Whether a full table reproduces this restriction.
    pub fn is_matched_by(&self, g: &Classifier) -> bool {
        self.iter().all(|(x, y)| g.label(x) == y)
    }
}

/// f_p: the table of `f` on Ω(p).
pub fn restrict(f: &Classifier, p: &FiniteDistribution) -> RestrictedTable {
    let points = p.support().to_vec();
    let labels = points.iter().map(|&x| f.label(x)).collect();
    RestrictedTable { points, labels }
}

#[derive(Clone, Debug)]
pub struct ClassifierFamily {
    labels: LabelSet,
    domain_len: usize,
    classifiers: Vec<Classifier>,
    index: HashMap<String, usize>,
}

impl ClassifierFamily {
    pub fn new(labels: LabelSet, domain_len: usize, classifiers: Vec<Classifier>) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        let mut index = HashMap::with_capacity(classifiers.len());
        let k = labels.k();
        for (i, c) in classifiers.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                err.push(Issue::ShapeMismatch {
                    context: format!("classifier {:?}", c.id),
                    detail: "duplicate id".into(),
                });
            }
            if c.table.len() != domain_len {
                err.push(Issue::ShapeMismatch {
                    context: format!("classifier {:?}", c.id),
                    detail: format!("table has {} entries for a domain of {domain_len} points", c.table.len()),
                });
            }
            if let Some(bad) = c.table.iter().find(|&&y| usize::from(y) >= k) {
                err.push(Issue::ShapeMismatch {
                    context: format!("classifier {:?}", c.id),
                    detail: format!("label index {bad} out of range for k = {k}"),
                });
            }
        }
        if classifiers.is_empty() {
            err.push(Issue::ShapeMismatch {
                context: "classifiers".into(),
                detail: "family is empty".into(),
            });
        }
        err.into_result(|| Self { labels, domain_len, classifiers, index })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.labels.k()
    }

    pub fn domain_len(&self) -> usize {
        self.domain_len
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn get(&self, i: usize) -> &Classifier {
        &self.classifiers[i]
    }

    pub fn classifiers(&self) -> &[Classifier] {
        &self.classifiers
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// One support point of a UDA class: a weighted `(p, q)` pair with a prior over classifiers.
#[derive(Clone, Debug)]
pub struct ClassEntry {
    weight: f64,
    p: Arc<FiniteDistribution>,
    q: Arc<FiniteDistribution>,
    /// Positive prior masses keyed by family index, ascending.
    prior: Vec<(usize, f64)>,
}

impl ClassEntry {
    /// `prior` is dense over the family (one mass per classifier).
    pub fn new(weight: f64, p: FiniteDistribution, q: FiniteDistribution, prior: &[f64]) -> Self {
        let prior = prior
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= DUST)
            .map(|(i, &w)| (i, w))
            .collect();
        Self { weight, p: Arc::new(p), q: Arc::new(q), prior }
    }

    pub fn from_sparse(weight: f64, p: Arc<FiniteDistribution>, q: Arc<FiniteDistribution>, prior: Vec<(usize, f64)>) -> Self {
        let mut prior: Vec<(usize, f64)> = prior.into_iter().filter(|&(_, w)| w >= DUST).collect();
        prior.sort_by_key(|&(i, _)| i);
        Self { weight, p, q, prior }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn p(&self) -> &Arc<FiniteDistribution> {
        &self.p
    }

    pub fn q(&self) -> &Arc<FiniteDistribution> {
        &self.q
    }

    pub fn prior(&self) -> &[(usize, f64)] {
        &self.prior
    }

    pub fn prior_mass(&self, f: usize) -> f64 {
        self.prior
            .binary_search_by_key(&f, |&(i, _)| i)
            .map(|j| self.prior[j].1)
            .unwrap_or(0.0)
    }
}

/// π: a finite-support distribution over `(p, q, f)` triples, stored as
/// weighted `(p, q)` entries each carrying a prior over the classifier family.
#[derive(Clone, Debug)]
pub struct UdaClass {
    domain: Arc<Domain>,
    family: Arc<ClassifierFamily>,
    entries: Vec<ClassEntry>,
}

impl UdaClass {
    pub fn new(domain: Arc<Domain>, family: Arc<ClassifierFamily>, entries: Vec<ClassEntry>) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        if family.domain_len() != domain.len() {
            err.push(Issue::ShapeMismatch {
                context: "classifiers".into(),
                detail: format!("family built for {} points, domain has {}", family.domain_len(), domain.len()),
            });
        }
        if entries.is_empty() {
            err.push(Issue::ShapeMismatch {
                context: "uda_class".into(),
                detail: "no entries".into(),
            });
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if entries.iter().any(|e| !e.weight.is_finite() || e.weight < 0.0) || (total - 1.0).abs() > MASS_TOLERANCE {
            err.push(Issue::NonNormalized { context: "entry weights".into(), sum: total });
        }
        for (i, e) in entries.iter().enumerate() {
            for (name, d) in [("p", &e.p), ("q", &e.q)] {
                if d.len() != domain.len() {
                    err.push(Issue::ShapeMismatch {
                        context: format!("entry {i} {name}"),
                        detail: format!("{} masses for a domain of {} points", d.len(), domain.len()),
                    });
                }
            }
            let s: f64 = e.prior.iter().map(|&(_, w)| w).sum();
            if e.prior.iter().any(|&(_, w)| !w.is_finite() || w < 0.0) || (s - 1.0).abs() > MASS_TOLERANCE {
                err.push(Issue::NonNormalized { context: format!("entry {i} prior_f"), sum: s });
            }
            if let Some(&(bad, _)) = e.prior.iter().find(|&&(j, _)| j >= family.len()) {
                err.push(Issue::DanglingClassifierId {
                    context: format!("entry {i} prior_f"),
                    id: format!("#{bad}"),
                });
            }
        }
        err.into_result(|| Self { domain, family, entries })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn family(&self) -> &Arc<ClassifierFamily> {
        &self.family
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &ClassEntry {
        &self.entries[i]
    }

    pub fn k(&self) -> usize {
        self.family.k()
    }

    /// Indices of entries whose `(p, q)` equals the given pair exactly.
    pub fn entries_matching(&self, p: &FiniteDistribution, q: &FiniteDistribution) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight > 0.0 && *e.p == *p && *e.q == *q)
            .map(|(i, _)| i)
            .collect()
    }

    /// π_{F|P,Q}(·|p,q) as sparse `(family index, mass)` pairs, merging entries
    /// that share the same `(p, q)`. `None` if the pair has no positive weight.
    pub fn conditional_prior(&self, p: &FiniteDistribution, q: &FiniteDistribution) -> Option<Vec<(usize, f64)>> {
        let matching = self.entries_matching(p, q);
        if matching.is_empty() {
            return None;
        }
        if matching.len() == 1 {
            return Some(self.entries[matching[0]].prior.clone());
        }
        let total: f64 = matching.iter().map(|&i| self.entries[i].weight).sum();
        let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
        for &i in &matching {
            let e = &self.entries[i];
            for &(f, w) in &e.prior {
                *acc.entry(f).or_default() += e.weight * w / total;
            }
        }
        Some(acc.into_iter().collect())
    }
}

/// An (m, n)-sample: labeled source points and unlabeled target points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub xs: Vec<PointId>,
    pub xt: Vec<PointId>,
    pub ys: Vec<Label>,
}

impl Sample {
    pub fn new(xs: Vec<PointId>, xt: Vec<PointId>, ys: Vec<Label>) -> Result<Self, ValidationError> {
        if xs.len() != ys.len() {
            return Err(ValidationError::single(Issue::ShapeMismatch {
                context: "sample".into(),
                detail: format!("{} source points but {} labels", xs.len(), ys.len()),
            }));
        }
        Ok(Self { xs, xt, ys })
    }

    pub fn m(&self) -> usize {
        self.xs.len()
    }

    pub fn n(&self) -> usize {
        self.xt.len()
    }
}
