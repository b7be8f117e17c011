//! Random finite UDA classes for property checks and harnesses.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::model::{ClassEntry, Classifier, ClassifierFamily, Domain, FiniteDistribution, Label, LabelSet, UdaClass};
use crate::sampling::UdaInstance;

/// How the classifier prior relates to the `(p, q)` entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorCoupling {
    /// Every entry draws its own prior.
    PerEntry,
    /// All entries share one prior, so `f` is independent of `(p, q)`.
    Shared,
    /// A single `(p, q)` entry.
    SinglePair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassShape {
    pub points: (usize, usize),
    pub family: (usize, usize),
    pub labels: Vec<usize>,
    pub entries: (usize, usize),
    pub coupling: PriorCoupling,
}

impl Default for ClassShape {
    fn default() -> Self {
        Self { points: (2, 12), family: (2, 64), labels: vec![2, 3, 4], entries: (1, 3), coupling: PriorCoupling::PerEntry }
    }
}

impl ClassShape {
    /// Small classes whose `(m, n) ≤ (2, 2)` samples can be enumerated quickly.
    pub fn enumerable(coupling: PriorCoupling) -> Self {
        Self { points: (2, 6), family: (2, 16), coupling, ..Self::default() }
    }

    pub fn with_coupling(mut self, coupling: PriorCoupling) -> Self {
        self.coupling = coupling;
        self
    }
}

/// Normalized masses in `[lo, 1]` on `support`, zero elsewhere.
fn masses<R: Rng + ?Sized>(rng: &mut R, len: usize, support: &[usize], lo: f64) -> Vec<f64> {
    let mut v = vec![0.0; len];
    for &x in support {
        v[x] = rng.random_range(lo..=1.0);
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|w| *w /= total);
    v
}

fn random_subset<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<usize> {
    let size = rng.random_range(1..=len);
    let mut ids = sample_indices(rng, len, size).into_vec();
    ids.sort_unstable();
    ids
}

fn random_distribution<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Arc<FiniteDistribution> {
    let support = random_subset(rng, len);
    Arc::new(FiniteDistribution::new(masses(rng, len, &support, 0.05)).expect("normalized masses"))
}

fn sparse_prior<R: Rng + ?Sized>(rng: &mut R, family: usize) -> Vec<(usize, f64)> {
    let support = random_subset(rng, family);
    let dense = masses(rng, family, &support, 0.05);
    support.into_iter().map(|f| (f, dense[f])).collect()
}

fn family_from_tables(k: usize, domain_len: usize, tables: Vec<Vec<Label>>) -> Arc<ClassifierFamily> {
    let cs = tables.into_iter().enumerate().map(|(i, t)| Classifier::new(format!("f{i}"), t)).collect();
    Arc::new(ClassifierFamily::new(LabelSet::numbered(k), domain_len, cs).expect("generated family is valid"))
}

/// A random class drawn according to `shape`.
pub fn random_class<R: Rng + ?Sized>(rng: &mut R, shape: &ClassShape) -> UdaClass {
    let n = rng.random_range(shape.points.0..=shape.points.1);
    let k = shape.labels[rng.random_range(0..shape.labels.len())];
    let size = rng.random_range(shape.family.0..=shape.family.1);
    let tables = (0..size).map(|_| (0..n).map(|_| rng.random_range(0..k) as Label).collect()).collect();
    let family = family_from_tables(k, n, tables);
    let count = match shape.coupling {
        PriorCoupling::SinglePair => 1,
        _ => rng.random_range(shape.entries.0..=shape.entries.1),
    };
    let weights = masses(rng, count, &(0..count).collect::<Vec<_>>(), 0.1);
    let shared = sparse_prior(rng, size);
    let entries = weights
        .into_iter()
        .map(|w| {
            let prior = match shape.coupling {
                PriorCoupling::Shared => shared.clone(),
                _ => sparse_prior(rng, size),
            };
            ClassEntry::from_sparse(w, random_distribution(rng, n), random_distribution(rng, n), prior)
        })
        .collect();
    UdaClass::new(Arc::new(Domain::discrete(n)), family, entries).expect("generated class is valid")
}

/// A single-pair class with disjoint source and target supports whose family
/// contains every target labeling next to every source pattern, so each target
/// label keeps positive posterior mass (`β > 0`). Returns the class and an
/// instance drawn from it.
pub fn convergence_class<R: Rng + ?Sized>(rng: &mut R) -> (UdaClass, UdaInstance) {
    let k = rng.random_range(2..=3usize);
    let np = rng.random_range(2..=4usize);
    let nq = if k == 2 { rng.random_range(2..=3usize) } else { 2 };
    let extra = rng.random_range(0..=2usize);
    let n = np + nq + extra;
    let patterns = rng.random_range(1..=3usize);
    let combos = k.pow(nq as u32);
    let mut tables = Vec::with_capacity(patterns * combos);
    for _ in 0..patterns {
        let source: Vec<Label> = (0..np).map(|_| rng.random_range(0..k) as Label).collect();
        for c in 0..combos {
            let mut t = source.clone();
            t.extend((0..nq).map(|i| ((c / k.pow(i as u32)) % k) as Label));
            t.extend((0..extra).map(|_| rng.random_range(0..k) as Label));
            tables.push(t);
        }
    }
    let size = tables.len();
    let family = family_from_tables(k, n, tables);
    let p = FiniteDistribution::new(masses(rng, n, &(0..np).collect::<Vec<_>>(), 0.5)).expect("normalized");
    let q = FiniteDistribution::new(masses(rng, n, &(np..np + nq).collect::<Vec<_>>(), 0.5)).expect("normalized");
    let all: Vec<usize> = (0..size).collect();
    let dense = masses(rng, size, &all, 0.2);
    let prior = all.into_iter().map(|f| (f, dense[f])).collect();
    let entry = ClassEntry::from_sparse(1.0, Arc::new(p), Arc::new(q), prior);
    let class = UdaClass::new(Arc::new(Domain::discrete(n)), family, vec![entry]).expect("generated class is valid");
    let f = rng.random_range(0..size);
    let inst = UdaInstance::from_class(&class, 0, f);
    (class, inst)
}
