//! Drawing instances and samples, and exhaustive sample enumeration.
//!
//! All randomness flows from an [`RngSpec`]: a ChaCha8 generator seeded with
//! `seed` and positioned on sub-stream `stream`. Harnesses give trial `t` its
//! own stream, so results do not depend on scheduling.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Classifier, FiniteDistribution, PointId, Sample, UdaClass};

/// Maximum number of samples [`enumerate_samples`] will walk.
pub const ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Same seed, a different stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self { seed: self.seed, stream }
    }

    /// Stream for trial `trial` of experiment `block`; blocks do not overlap.
    pub fn trial(&self, block: u64, trial: u64) -> Self {
        self.with_stream(self.stream.wrapping_add(block << 32).wrapping_add(trial))
    }
}

/// A triple `(p, q, f)` together with where it came from in its class.
#[derive(Clone, Debug)]
pub struct UdaInstance {
    pub entry: usize,
    pub p: Arc<FiniteDistribution>,
    pub q: Arc<FiniteDistribution>,
    pub f_index: usize,
    pub f: Classifier,
}

impl UdaInstance {
    pub fn from_class(class: &UdaClass, entry: usize, f_index: usize) -> Self {
        let e = class.entry(entry);
        Self {
            entry,
            p: e.p().clone(),
            q: e.q().clone(),
            f_index,
            f: class.family().get(f_index).clone(),
        }
    }
}

/// Cached sampler for one distribution.
#[derive(Clone, Debug)]
pub struct PointSampler {
    support: Vec<PointId>,
    index: WeightedIndex<f64>,
}

impl PointSampler {
    pub fn new(d: &FiniteDistribution) -> Self {
        let support = d.support().to_vec();
        let index = WeightedIndex::new(support.iter().map(|&x| d.mass(x))).expect("support masses are positive");
        Self { support, index }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PointId {
        self.support[self.index.sample(rng)]
    }

    pub fn draw_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<PointId> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

pub fn draw_instance(class: &UdaClass, rng: &RngSpec) -> UdaInstance {
    draw_instance_with(class, &mut rng.rng())
}

/// Entry ∝ weight, then classifier ∝ that entry's prior.
pub fn draw_instance_with<R: Rng + ?Sized>(class: &UdaClass, rng: &mut R) -> UdaInstance {
    let entries = class.entries();
    let entry = if entries.len() == 1 {
        0
    } else {
        WeightedIndex::new(entries.iter().map(|e| e.weight())).expect("weights are valid").sample(rng)
    };
    let prior = entries[entry].prior();
    let f_index = if prior.len() == 1 {
        prior[0].0
    } else {
        prior[WeightedIndex::new(prior.iter().map(|&(_, w)| w)).expect("prior is valid").sample(rng)].0
    };
    UdaInstance::from_class(class, entry, f_index)
}

pub fn draw_sample(inst: &UdaInstance, m: usize, n: usize, rng: &RngSpec) -> Sample {
    draw_sample_with(inst, m, n, &mut rng.rng())
}

/// `m` source points from `p` labeled by `f`, then `n` target points from `q`.
pub fn draw_sample_with<R: Rng + ?Sized>(inst: &UdaInstance, m: usize, n: usize, rng: &mut R) -> Sample {
    let xs = if m > 0 { PointSampler::new(&inst.p).draw_n(m, rng) } else { Vec::new() };
    let xt = if n > 0 { PointSampler::new(&inst.q).draw_n(n, rng) } else { Vec::new() };
    let ys = xs.iter().map(|&x| inst.f.label(x)).collect();
    Sample { xs, xt, ys }
}

/// Every `(m, n)`-sample of an instance with its probability `p^m(xs) q^n(xt)`.
pub fn enumerate_samples(inst: &UdaInstance, m: usize, n: usize) -> Result<SampleEnumerator> {
    let size = (inst.p.support().len() as f64).powi(m as i32) * (inst.q.support().len() as f64).powi(n as i32);
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { what: "sample enumeration", size, limit: ENUMERATION_LIMIT });
    }
    Ok(SampleEnumerator {
        p: inst.p.clone(),
        q: inst.q.clone(),
        f: inst.f.clone(),
        m,
        digits: vec![0; m + n],
        done: false,
        len: size as usize,
    })
}

/// Odometer over `Ω(p)^m × Ω(q)^n` in lexicographic order.
#[derive(Clone, Debug)]
pub struct SampleEnumerator {
    p: Arc<FiniteDistribution>,
    q: Arc<FiniteDistribution>,
    f: Classifier,
    m: usize,
    digits: Vec<usize>,
    done: bool,
    len: usize,
}

impl SampleEnumerator {
    pub fn total(&self) -> usize {
        self.len
    }
}

impl Iterator for SampleEnumerator {
    type Item = (Sample, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let (ps, qs) = (self.p.support(), self.q.support());
        let xs: Vec<PointId> = self.digits[..self.m].iter().map(|&d| ps[d]).collect();
        let xt: Vec<PointId> = self.digits[self.m..].iter().map(|&d| qs[d]).collect();
        let prob = xs.iter().map(|&x| self.p.mass(x)).product::<f64>() * xt.iter().map(|&x| self.q.mass(x)).product::<f64>();
        let ys = xs.iter().map(|&x| self.f.label(x)).collect();

        self.done = true;
        for i in (0..self.digits.len()).rev() {
            let radix = if i < self.m { ps.len() } else { qs.len() };
            self.digits[i] += 1;
            if self.digits[i] < radix {
                self.done = false;
                break;
            }
            self.digits[i] = 0;
        }
        Some((Sample { xs, xt, ys }, prob))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassEntry, ClassifierFamily, Domain, LabelSet};

    fn class_two_entries() -> UdaClass {
        let fam = ClassifierFamily::new(
            LabelSet::numbered(2),
            4,
            vec![Classifier::new("a", vec![0, 0, 1, 1]), Classifier::new("b", vec![0, 1, 1, 1])],
        )
        .unwrap();
        let p = FiniteDistribution::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let q = FiniteDistribution::new(vec![0.0, 0.0, 0.25, 0.75]).unwrap();
        UdaClass::new(
            Arc::new(Domain::discrete(4)),
            Arc::new(fam),
            vec![ClassEntry::new(0.5, p.clone(), q.clone(), &[1.0, 0.0]), ClassEntry::new(0.5, q, p, &[0.5, 0.5])],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_class_always_gives_same_instance() {
        let c = class_two_entries();
        let e = c.entry(0);
        let single = UdaClass::new(
            c.domain().clone(),
            c.family().clone(),
            vec![ClassEntry::from_sparse(1.0, e.p().clone(), e.q().clone(), e.prior().to_vec())],
        )
        .unwrap();
        for s in 0..50 {
            let inst = draw_instance(&single, &RngSpec::new(9, s));
            assert_eq!((inst.entry, inst.f_index), (0, 0));
        }
    }

    #[test]
    fn entry_frequencies_match_weights() {
        let c = class_two_entries();
        let mut rng = RngSpec::new(1, 0).rng();
        let draws = 100_000;
        let hits = (0..draws).filter(|_| draw_instance_with(&c, &mut rng).entry == 0).count();
        assert!((hits as f64 / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn same_spec_same_draws() {
        let c = class_two_entries();
        let spec = RngSpec::new(42, 7);
        let a = draw_instance(&c, &spec);
        let b = draw_instance(&c, &spec);
        assert_eq!((a.entry, a.f_index), (b.entry, b.f_index));
        assert_eq!(draw_sample(&a, 5, 5, &spec), draw_sample(&b, 5, 5, &spec));
    }

    #[test]
    fn empty_and_point_mass_samples() {
        let c = class_two_entries();
        let inst = UdaInstance::from_class(&c, 0, 0);
        let s = draw_sample(&inst, 0, 0, &RngSpec::new(0, 0));
        assert_eq!(s, Sample::default());

        let mut probs = vec![0.0; 4];
        probs[3] = 1.0;
        let inst = UdaInstance {
            p: Arc::new(FiniteDistribution::new(probs).unwrap()),
            ..UdaInstance::from_class(&c, 0, 1)
        };
        let s = draw_sample(&inst, 2, 0, &RngSpec::new(0, 0));
        assert_eq!((s.xs, s.ys), (vec![3, 3], vec![1, 1]));
    }

    #[test]
    fn target_frequencies_within_three_sigma() {
        let c = class_two_entries();
        let inst = UdaInstance::from_class(&c, 0, 0);
        let draws = 10_000;
        let s = draw_sample(&inst, 0, draws, &RngSpec::new(3, 1));
        for x in 0..4 {
            let qx = inst.q.mass(x);
            let freq = s.xt.iter().filter(|&&t| t == x).count() as f64 / draws as f64;
            let sigma = (qx * (1.0 - qx) / draws as f64).sqrt();
            assert!((freq - qx).abs() <= 3.0 * sigma + 1e-12, "x={x} freq={freq} q={qx}");
        }
    }

    #[test]
    fn direct_product_enumeration() {
        let c = class_two_entries();
        let inst = UdaInstance::from_class(&c, 0, 0);
        let all: Vec<_> = enumerate_samples(&inst, 1, 1).unwrap().collect();
        let inst1 = UdaInstance {
            q: Arc::new(FiniteDistribution::point_mass(4, 2)),
            ..inst.clone()
        };
        let two: Vec<_> = enumerate_samples(&inst1, 1, 1).unwrap().collect();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].1, 0.5);
        assert_eq!(two[1].1, 0.5);
        assert_eq!(all.len(), 4);
        let total: f64 = enumerate_samples(&inst, 2, 2).unwrap().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(enumerate_samples(&inst, 2, 2).unwrap().all(|(s, _)| s.xs.iter().zip(&s.ys).all(|(&x, &y)| inst.f.label(x) == y)));
    }

    #[test]
    fn enumeration_guard() {
        let c = class_two_entries();
        let inst = UdaInstance::from_class(&c, 0, 0);
        assert!(matches!(enumerate_samples(&inst, 20, 20), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn enumeration_matches_monte_carlo() {
        let c = class_two_entries();
        let inst = UdaInstance::from_class(&c, 0, 1);
        let test_fn = |s: &Sample| (s.xs.iter().sum::<usize>() + 2 * s.xt.iter().sum::<usize>()) as f64;
        let exact: f64 = enumerate_samples(&inst, 2, 2).unwrap().map(|(s, p)| p * test_fn(&s)).sum();
        let mut rng = RngSpec::new(11, 0).rng();
        let trials = 20_000;
        let vals: Vec<f64> = (0..trials).map(|_| test_fn(&draw_sample_with(&inst, 2, 2, &mut rng))).collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!((mean - exact).abs() <= 3.0 * (var / trials as f64).sqrt());
    }
}
