use std::collections::HashMap;

use rand::Rng;

use super::{MeasureResult, MeasureValue, Witness};
use crate::error::{Error, Result};
use crate::model::{Classifier, ClassifierFamily, FiniteDistribution, Label, PointId};
use crate::par;
use crate::sampling::RngSpec;

/// Tolerance of the transfer inequality check.
const TRANSFER_TOLERANCE: f64 = 1e-12;
/// Above this many distinct mass differences the pair scan drops bitsets.
const MAX_BITSET_GROUPS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HdhOptions {
    /// Largest number of distinct classifier pairs scanned exactly.
    pub max_pairs: f64,
    /// Scan `max_pairs` random pairs instead of failing; the result is then a lower bound.
    pub subsample: Option<RngSpec>,
}

impl Default for HdhOptions {
    fn default() -> Self {
        Self { max_pairs: 1e7, subsample: None }
    }
}

/// `|Σ_x (p(x) − q(x))·1{h(x) ≠ h′(x)}|` for one pair.
pub fn hdh_pair_value(p: &FiniteDistribution, q: &FiniteDistribution, h: &Classifier, h2: &Classifier) -> f64 {
    let a: f64 = p.support().iter().filter(|&&x| h.label(x) != h2.label(x)).map(|&x| p.mass(x)).sum();
    let b: f64 = q.support().iter().filter(|&&x| h.label(x) != h2.label(x)).map(|&x| q.mass(x)).sum();
    (a - b).abs()
}

/// Per-classifier bit planes of the label table, one block per mass-difference group.
struct PackedTables {
    words_per_group: Vec<usize>,
    planes: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl PackedTables {
    fn new(tables: &[Vec<Label>], groups: &[Vec<usize>], k: usize) -> Self {
        let planes = (usize::BITS - (k - 1).leading_zeros()).max(1) as usize;
        let words_per_group: Vec<usize> = groups.iter().map(|g| g.len().div_ceil(64)).collect();
        let stride = words_per_group.iter().sum::<usize>() * planes;
        let mut bits = vec![0u64; stride * tables.len()];
        for (t, table) in tables.iter().enumerate() {
            let mut offset = t * stride;
            for (g, members) in groups.iter().enumerate() {
                let words = words_per_group[g];
                for (bit, &pos) in members.iter().enumerate() {
                    let y = table[pos];
                    for plane in 0..planes {
                        if (y >> plane) & 1 == 1 {
                            bits[offset + plane * words + bit / 64] |= 1 << (bit % 64);
                        }
                    }
                }
                offset += words * planes;
            }
        }
        Self { words_per_group, planes, stride, bits }
    }

    fn disagreements(&self, a: usize, b: usize, out: &mut [u32]) {
        let (ta, tb) = (&self.bits[a * self.stride..], &self.bits[b * self.stride..]);
        let mut offset = 0;
        for (g, &words) in self.words_per_group.iter().enumerate() {
            let mut count = 0;
            for w in 0..words {
                let mut diff = 0;
                for plane in 0..self.planes {
                    let i = offset + plane * words + w;
                    diff |= ta[i] ^ tb[i];
                }
                count += diff.count_ones();
            }
            out[g] = count;
            offset += words * self.planes;
        }
    }
}

/// `d_{HΔH}(p‖q) = sup_{h, h′ ∈ H} |Pr_p(h ≠ h′) − Pr_q(h ≠ h′)|` with the maximizing pair.
pub fn h_delta_h(p: &FiniteDistribution, q: &FiniteDistribution, family: &ClassifierFamily, opts: &HdhOptions) -> Result<MeasureResult> {
    let pts: Vec<PointId> = (0..p.len()).filter(|&x| p.mass(x) != q.mass(x)).collect();
    let diff: Vec<f64> = pts.iter().map(|&x| p.mass(x) - q.mass(x)).collect();

    let mut index: HashMap<Vec<Label>, usize> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut tables: Vec<Vec<Label>> = Vec::new();
    for (i, c) in family.classifiers().iter().enumerate() {
        let key: Vec<Label> = pts.iter().map(|&x| c.label(x)).collect();
        index.entry(key.clone()).or_insert_with(|| {
            reps.push(i);
            tables.push(key);
            reps.len() - 1
        });
    }
    let u = reps.len();
    let pairs = (u as f64) * (u as f64 - 1.0) / 2.0;
    if u < 2 {
        return Ok(MeasureResult::new("hdh", MeasureValue::Finite(0.0), Some(Witness::Pair { h: reps[0], h2: reps[0] })));
    }
    if pairs > opts.max_pairs && opts.subsample.is_none() {
        return Err(Error::TooLarge { what: "HΔH pair scan", size: pairs, limit: opts.max_pairs });
    }

    let mut levels: Vec<f64> = diff.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let evaluate: Box<dyn Fn(usize, usize, &mut [u32]) -> f64 + Sync + '_> = if levels.len() <= MAX_BITSET_GROUPS {
        let mut groups = vec![Vec::new(); levels.len()];
        for (pos, w) in diff.iter().enumerate() {
            groups[levels.binary_search_by(|l| l.total_cmp(w)).expect("level exists")].push(pos);
        }
        let packed = PackedTables::new(&tables, &groups, family.k());
        Box::new(move |a, b, scratch: &mut [u32]| {
            packed.disagreements(a, b, scratch);
            levels.iter().zip(scratch.iter()).map(|(w, &c)| w * f64::from(c)).sum::<f64>().abs()
        })
    } else {
        Box::new(|a, b, _: &mut [u32]| {
            let (ta, tb) = (&tables[a], &tables[b]);
            diff.iter().enumerate().filter(|(i, _)| ta[*i] != tb[*i]).map(|(_, w)| w).sum::<f64>().abs()
        })
    };
    let scratch_len = MAX_BITSET_GROUPS;

    let (best, a, b, lower_bound) = match opts.subsample {
        Some(spec) if pairs > opts.max_pairs => {
            let mut rng = spec.rng();
            let mut scratch = vec![0u32; scratch_len];
            let mut best = (f64::NEG_INFINITY, 0, 1);
            for _ in 0..opts.max_pairs as u64 {
                let a = rng.random_range(0..u);
                let mut b = rng.random_range(0..u - 1);
                if b >= a {
                    b += 1;
                }
                let v = evaluate(a.min(b), a.max(b), &mut scratch);
                if v > best.0 {
                    best = (v, a.min(b), a.max(b));
                }
            }
            (best.0, best.1, best.2, true)
        }
        _ => {
            let rows = par::map_range(u - 1, |a| {
                let mut scratch = vec![0u32; scratch_len];
                let mut best = (f64::NEG_INFINITY, a, a + 1);
                for b in a + 1..u {
                    let v = evaluate(a, b, &mut scratch);
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
                best
            });
            let mut best = rows[0];
            for r in rows.into_iter().skip(1) {
                if r.0 > best.0 {
                    best = r;
                }
            }
            (best.0, best.1, best.2, false)
        }
    };
    let mut res = MeasureResult::new("hdh", MeasureValue::Finite(best.max(0.0)), Some(Witness::Pair { h: reps[a], h2: reps[b] }));
    res.lower_bound = lower_bound;
    Ok(res)
}

fn error_masses(p: &FiniteDistribution, q: &FiniteDistribution, f: &Classifier, h: &Classifier) -> (f64, bool, f64, bool) {
    let mut a = 0.0;
    let mut a_any = false;
    for &x in p.support() {
        if h.label(x) != f.label(x) {
            a += p.mass(x);
            a_any = true;
        }
    }
    let mut b = 0.0;
    let mut b_any = false;
    for &x in q.support() {
        if h.label(x) != f.label(x) {
            b += q.mass(x);
            b_any = true;
        }
    }
    (a, a_any, b, b_any)
}

/// `|Pr_p(h ≠ f) − Pr_q(h ≠ f)|` for one classifier.
pub fn y_discrepancy_value(p: &FiniteDistribution, q: &FiniteDistribution, f: &Classifier, h: &Classifier) -> f64 {
    let (a, _, b, _) = error_masses(p, q, f, h);
    (a - b).abs()
}

/// `d_𝒴(p‖q) = sup_{h ∈ H} |Pr_p(h ≠ f) − Pr_q(h ≠ f)|` with the maximizing classifier.
pub fn y_discrepancy(p: &FiniteDistribution, q: &FiniteDistribution, f: &Classifier, family: &ClassifierFamily) -> MeasureResult {
    let vals = par::map_range(family.len(), |h| y_discrepancy_value(p, q, f, family.get(h)));
    let mut best = 0;
    for (h, &v) in vals.iter().enumerate() {
        if v > vals[best] {
            best = h;
        }
    }
    MeasureResult::new("y-discrepancy", MeasureValue::Finite(vals[best]), Some(Witness::Classifier { h: best }))
}

/// Candidate exponents and constants for [`transfer_exponent`].
#[derive(Clone, Debug, PartialEq)]
pub struct TransferGrids {
    pub gamma: Vec<f64>,
    pub c: Vec<f64>,
}

impl TransferGrids {
    /// `γ ∈ {lo, lo + step, …, hi}` and `C ∈ {2^i : i = −10..10}`.
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        let count = ((hi - lo) / step + 1e-9).floor() as i64;
        let gamma = (0..=count).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect();
        let c = (-10..=10).map(|i| 2f64.powi(i)).collect();
        Self { gamma, c }
    }
}

impl Default for TransferGrids {
    fn default() -> Self {
        Self::new(1.0, 10.0, 0.1)
    }
}

/// Smallest grid `γ` for which some grid `C` satisfies
/// `C·Pr_p(h ≠ f) ≥ Pr_q(h ≠ f)^γ` for every `h ∈ H`; `+∞` if some `h` errs
/// on the target but never on the source, or if no grid pair works.
pub fn transfer_exponent(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    f: &Classifier,
    family: &ClassifierFamily,
    grids: &TransferGrids,
) -> MeasureResult {
    let errs = par::map_range(family.len(), |h| error_masses(p, q, f, family.get(h)));
    if let Some(h) = errs.iter().position(|&(_, a_any, _, b_any)| !a_any && b_any) {
        return MeasureResult::new("transfer-exponent", MeasureValue::Infinity, Some(Witness::SourceBlind { h }));
    }
    let mut gammas = grids.gamma.clone();
    gammas.sort_by(f64::total_cmp);
    let mut cs = grids.c.clone();
    cs.sort_by(f64::total_cmp);
    for &gamma in &gammas {
        let targets: Vec<(f64, f64)> = errs.iter().filter(|e| e.3).map(|&(a, _, b, _)| (a, b.powf(gamma))).collect();
        if let Some(&c) = cs.iter().find(|&&c| targets.iter().all(|&(a, bg)| c * a - bg >= -TRANSFER_TOLERANCE)) {
            return MeasureResult::new(
                "transfer-exponent",
                MeasureValue::Finite(gamma),
                Some(Witness::TransferCertificate { gamma, c }),
            );
        }
    }
    MeasureResult::new("transfer-exponent", MeasureValue::Infinity, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelSet;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(v.to_vec()).unwrap()
    }

    fn family(k: usize, tables: Vec<Vec<Label>>) -> ClassifierFamily {
        let n = tables[0].len();
        let cs = tables.into_iter().enumerate().map(|(i, t)| Classifier::new(format!("h{i}"), t)).collect();
        ClassifierFamily::new(LabelSet::numbered(k), n, cs).unwrap()
    }

    fn naive_hdh(p: &FiniteDistribution, q: &FiniteDistribution, fam: &ClassifierFamily) -> f64 {
        let mut best: f64 = 0.0;
        for h in fam.classifiers() {
            for h2 in fam.classifiers() {
                best = best.max(hdh_pair_value(p, q, h, h2));
            }
        }
        best
    }

    #[test]
    fn equal_distributions_give_zero() {
        let fam = family(2, vec![vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0]]);
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(h_delta_h(&p, &p, &fam, &HdhOptions::default()).unwrap().value, MeasureValue::Finite(0.0));
        assert_eq!(y_discrepancy(&p, &p, fam.get(0), &fam).value, MeasureValue::Finite(0.0));
        let t = transfer_exponent(&p, &p, fam.get(0), &fam, &TransferGrids::default());
        assert_eq!(t.witness, Some(Witness::TransferCertificate { gamma: 1.0, c: 1.0 }));
    }

    #[test]
    fn degenerate_family_certifies_smallest_gamma() {
        let fam = family(2, vec![vec![0, 1, 1]]);
        let t = transfer_exponent(&dist(&[1.0, 0.0, 0.0]), &dist(&[0.0, 0.5, 0.5]), fam.get(0), &fam, &TransferGrids::default());
        assert_eq!(t.value, MeasureValue::Finite(1.0));
    }

    #[test]
    fn source_blind_classifier_gives_infinity() {
        let fam = family(2, vec![vec![0, 1, 1], vec![0, 0, 1]]);
        let t = transfer_exponent(&dist(&[1.0, 0.0, 0.0]), &dist(&[0.0, 0.5, 0.5]), fam.get(0), &fam, &TransferGrids::default());
        assert_eq!(t.value, MeasureValue::Infinity);
        assert_eq!(t.witness, Some(Witness::SourceBlind { h: 1 }));
    }

    #[test]
    fn subsample_is_flagged() {
        let tables: Vec<Vec<Label>> = (0..16u8).map(|b| (0..4).map(|i| (b >> i) & 1).collect()).collect();
        let fam = family(2, tables);
        let p = dist(&[0.5, 0.5, 0.0, 0.0]);
        let q = dist(&[0.0, 0.0, 0.5, 0.5]);
        let opts = HdhOptions { max_pairs: 10.0, subsample: None };
        assert!(matches!(h_delta_h(&p, &q, &fam, &opts), Err(Error::TooLarge { .. })));
        let opts = HdhOptions { max_pairs: 10.0, subsample: Some(RngSpec::new(1, 0)) };
        let r = h_delta_h(&p, &q, &fam, &opts).unwrap();
        assert!(r.lower_bound);
        assert!(r.value.as_f64() <= 1.0);
    }

    fn instance() -> impl Strategy<Value = (usize, Vec<Vec<Label>>, Vec<f64>, Vec<f64>)> {
        (2usize..5, 2usize..12).prop_flat_map(|(k, h)| {
            let table = proptest::collection::vec(0..k as u8, 6);
            let mass = proptest::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], 6);
            (Just(k), proptest::collection::vec(table, h), mass.clone(), mass)
        })
    }

    fn normalize(mut v: Vec<f64>) -> Vec<f64> {
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn hdh_matches_double_loop((k, tables, a, b) in instance()) {
            let fam = family(k, tables);
            let (p, q) = (dist(&normalize(a)), dist(&normalize(b)));
            let r = h_delta_h(&p, &q, &fam, &HdhOptions::default()).unwrap();
            let v = r.value.as_f64();
            prop_assert!((v - naive_hdh(&p, &q, &fam)).abs() < 1e-12);
            let Some(Witness::Pair { h, h2 }) = r.witness else { panic!("pair witness") };
            prop_assert!((hdh_pair_value(&p, &q, fam.get(h), fam.get(h2)) - v).abs() < 1e-12);
        }

        #[test]
        fn y_discrepancy_matches_loop((k, tables, a, b) in instance()) {
            let fam = family(k, tables);
            let (p, q) = (dist(&normalize(a)), dist(&normalize(b)));
            let f = fam.get(0);
            let r = y_discrepancy(&p, &q, f, &fam);
            let oracle = fam.classifiers().iter().map(|h| y_discrepancy_value(&p, &q, f, h)).fold(0.0, f64::max);
            prop_assert_eq!(r.value.as_f64(), oracle);
            let Some(Witness::Classifier { h }) = r.witness else { panic!("classifier witness") };
            prop_assert!((y_discrepancy_value(&p, &q, f, fam.get(h)) - oracle).abs() < 1e-12);
        }

        #[test]
        fn transfer_certificate_is_valid((k, tables, a, b) in instance()) {
            let fam = family(k, tables);
            let (p, q) = (dist(&normalize(a)), dist(&normalize(b)));
            let f = fam.get(0);
            if let Some(Witness::TransferCertificate { gamma, c }) = transfer_exponent(&p, &q, f, &fam, &TransferGrids::default()).witness {
                for h in fam.classifiers() {
                    let (ea, _, eb, _) = error_masses(&p, &q, f, h);
                    prop_assert!(c * ea >= eb.powf(gamma) - 1e-12);
                }
            }
        }

        #[test]
        fn many_levels_fall_back_to_direct_scan(tables in proptest::collection::vec(proptest::collection::vec(0u8..3, 40), 2..6)) {
            let fam = family(3, tables);
            let a: Vec<f64> = (0..40).map(|i| (i + 1) as f64).collect();
            let b: Vec<f64> = (0..40).map(|i| (40 - i) as f64 + 0.5 * (i % 3) as f64).collect();
            let (p, q) = (dist(&normalize(a)), dist(&normalize(b)));
            let v = h_delta_h(&p, &q, &fam, &HdhOptions::default()).unwrap().value.as_f64();
            prop_assert!((v - naive_hdh(&p, &q, &fam)).abs() < 1e-12);
        }
    }
}
