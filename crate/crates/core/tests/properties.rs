use proptest::prelude::*;

use uda_core::generate::{random_class, ClassShape, PriorCoupling};
use uda_core::measures::{
    h_delta_h, hdh_pair_value, transfer_exponent, y_discrepancy, y_discrepancy_value, HdhOptions, MeasureValue,
    TransferGrids, Witness,
};
use uda_core::posterior::{aggregate, posterior_finite, posterior_infinite};
use uda_core::risk::{
    optimal_samplewise_risk, overall_risk, overall_risk_decomposed, samplewise_risk, standard_zoo, Learner,
    LearnerInput, Observation, OptimalLearner, RandomLearner, RiskMode,
};
use uda_core::sampling::{draw_instance, draw_sample, RngSpec};
use uda_core::schema::{class_to_json, load_class};
use uda_core::uncertainty::{eptlu, fano_bound, ptlu, BOUND_TOLERANCE};
use uda_core::{restrict, EntropyConfig, Posterior, Sample, UdaClass};

fn class_from(seed: u64, shape: &ClassShape) -> UdaClass {
    random_class(&mut RngSpec::new(seed, 0).rng(), shape)
}

fn sample_from(class: &UdaClass, seed: u64, m: usize, n: usize) -> (uda_core::UdaInstance, Sample, Posterior) {
    let inst = draw_instance(class, &RngSpec::new(seed, 1));
    let s = draw_sample(&inst, m, n, &RngSpec::new(seed, 2));
    let rho = posterior_finite(class, &s).unwrap();
    (inst, s, rho)
}

fn learn(l: &dyn Learner, s: &Sample, rho: &Posterior) -> uda_core::risk::LearnerOutput {
    l.learn(&LearnerInput { observation: Observation::Finite(s), posterior: rho })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn class_files_round_trip_byte_identically(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let json = class_to_json(&class);
        prop_assert_eq!(class_to_json(&load_class(&json).unwrap()), json);
    }

    #[test]
    fn restrictions_agree_exactly_when_tables_agree_on_support(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let p = class.entries()[0].p();
        let fam = class.family();
        for f in fam.classifiers() {
            for g in fam.classifiers() {
                let same = p.support().iter().all(|&x| f.label(x) == g.label(x));
                prop_assert_eq!(restrict(f, p) == restrict(g, p), same);
            }
        }
    }

    #[test]
    fn equal_rng_specs_draw_equal_samples(seed in any::<u64>(), m in 0usize..20, n in 0usize..20) {
        let class = class_from(seed, &ClassShape::default());
        let inst = draw_instance(&class, &RngSpec::new(seed, 5));
        prop_assert_eq!(draw_sample(&inst, m, n, &RngSpec::new(seed, 9)), draw_sample(&inst, m, n, &RngSpec::new(seed, 9)));
    }

    #[test]
    fn aggregated_rows_sum_to_one(seed in any::<u64>(), m in 0usize..6, n in 0usize..6) {
        let class = class_from(seed, &ClassShape::default());
        let (_, _, rho) = sample_from(&class, seed, m, n);
        let all: Vec<usize> = (0..class.domain().len()).collect();
        for (_, row) in aggregate(&rho, &all).rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn covering_sample_reproduces_infinite_posterior(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default().with_coupling(PriorCoupling::SinglePair));
        let inst = draw_instance(&class, &RngSpec::new(seed, 1));
        let xs = inst.p.support().to_vec();
        let ys = xs.iter().map(|&x| inst.f.label(x)).collect();
        let s = Sample::new(xs, inst.q.support().to_vec(), ys).unwrap();
        let finite = posterior_finite(&class, &s).unwrap();
        let infinite = posterior_infinite(&class, &inst.p, &inst.q, &inst.f).unwrap().posterior;
        prop_assert_eq!(finite.support().collect::<Vec<_>>(), infinite.support().collect::<Vec<_>>());
        for (&(_, a), &(_, b)) in finite.probs().iter().zip(infinite.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn more_labels_never_grow_the_support(seed in any::<u64>(), m in 0usize..4, extra in 1usize..4) {
        let class = class_from(seed, &ClassShape::default().with_coupling(PriorCoupling::SinglePair));
        let (inst, s, rho) = sample_from(&class, seed, m, 2);
        let more = draw_sample(&inst, extra, 0, &RngSpec::new(seed, 3));
        let mut xs = s.xs.clone();
        xs.extend(&more.xs);
        let mut ys = s.ys.clone();
        ys.extend(&more.ys);
        let longer = posterior_finite(&class, &Sample::new(xs, s.xt.clone(), ys).unwrap()).unwrap();
        let before: Vec<usize> = rho.support().collect();
        prop_assert!(longer.support().all(|f| before.contains(&f)));
    }

    #[test]
    fn point_mass_aggregate_reproduces_the_table(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let fam = class.family();
        let f = (seed as usize) % fam.len();
        let all: Vec<usize> = (0..class.domain().len()).collect();
        let soft = aggregate(&Posterior::point_mass(fam.clone(), f), &all);
        let hard = uda_core::posterior::harden(&soft);
        prop_assert_eq!(hard.labels(), fam.get(f).table());
    }

    #[test]
    fn optimal_learner_dominates_and_risks_stay_in_range(seed in any::<u64>(), m in 0usize..5, n in 0usize..5) {
        let class = class_from(seed, &ClassShape::default());
        let (inst, s, rho) = sample_from(&class, seed, m, n);
        let mut zoo = standard_zoo(class.family(), &[0, class.family().len() - 1]);
        zoo.extend((0..20).map(|i| Box::new(RandomLearner { seed: seed ^ i }) as Box<dyn Learner>));
        let best = samplewise_risk(&learn(&OptimalLearner, &s, &rho), &rho, &inst.q);
        prop_assert_eq!(best, optimal_samplewise_risk(&rho, &inst.q));
        prop_assert!((0.0..=1.0).contains(&best));
        for l in &zoo {
            let r = samplewise_risk(&learn(l.as_ref(), &s, &rho), &rho, &inst.q);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
            prop_assert!(best <= r + 1e-12, "{} beat the optimal learner: {} < {}", l.name(), r, best);
        }
    }

    #[test]
    fn ptlu_is_bounded_and_fano_holds(seed in any::<u64>(), m in 0usize..5, n in 0usize..5) {
        let class = class_from(seed, &ClassShape::default());
        let (inst, s, rho) = sample_from(&class, seed, m, n);
        let cfg = EntropyConfig::BITS;
        let u = ptlu(&rho, &inst.q, cfg);
        let k = class.k();
        prop_assert!(u >= 0.0 && u <= (k as f64).log2() + 1e-12);
        let soft = aggregate(&rho, inst.q.support());
        let one_hot = soft.rows().all(|(_, r)| r.contains(&1.0));
        prop_assert_eq!(u == 0.0, one_hot);
        let e_star = optimal_samplewise_risk(&rho, &inst.q);
        let bound = fano_bound(u, k, Some(e_star), cfg).unwrap();
        if k == 2 {
            prop_assert!(e_star >= u * u / 4.0 + e_star * e_star - BOUND_TOLERANCE);
        }
        for l in standard_zoo(class.family(), &[0]) {
            prop_assert!(samplewise_risk(&learn(l.as_ref(), &s, &rho), &rho, &inst.q) >= bound - BOUND_TOLERANCE);
        }
    }

    #[test]
    fn eptlu_with_exact_empirical_target_equals_ptlu(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let (inst, s, rho) = sample_from(&class, seed, 2, 0);
        let support = inst.q.support();
        let uniform = support.iter().all(|&x| (inst.q.mass(x) - inst.q.mass(support[0])).abs() < 1e-15);
        let xt = if uniform { support.to_vec() } else { vec![support[0]] };
        let q = if uniform {
            inst.q.as_ref().clone()
        } else {
            uda_core::FiniteDistribution::point_mass(class.domain().len(), support[0])
        };
        let s = Sample::new(s.xs, xt, s.ys).unwrap();
        let u = ptlu(&rho, &q, EntropyConfig::BITS);
        prop_assert!((eptlu(&rho, &s, EntropyConfig::BITS).unwrap() - u).abs() < 1e-12);
    }

    #[test]
    fn measures_vanish_on_equal_marginals(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let (p, fam) = (class.entries()[0].p(), class.family());
        let f = fam.get(0);
        prop_assert_eq!(h_delta_h(p, p, fam, &HdhOptions::default()).unwrap().value, MeasureValue::Finite(0.0));
        prop_assert_eq!(y_discrepancy(p, p, f, fam).value, MeasureValue::Finite(0.0));
        let gamma = transfer_exponent(p, p, f, fam, &TransferGrids::default());
        let unit_constant = matches!(gamma.witness, Some(Witness::TransferCertificate { c, .. }) if c <= 1.0);
        prop_assert!(unit_constant);
    }

    #[test]
    fn witnesses_reproduce_values(seed in any::<u64>()) {
        let class = class_from(seed, &ClassShape::default());
        let e = &class.entries()[0];
        let fam = class.family();
        let f = fam.get(0);
        let hdh = h_delta_h(e.p(), e.q(), fam, &HdhOptions::default()).unwrap();
        if let Some(Witness::Pair { h, h2 }) = hdh.witness {
            prop_assert!((hdh_pair_value(e.p(), e.q(), fam.get(h), fam.get(h2)) - hdh.value.as_f64()).abs() < 1e-12);
        } else {
            prop_assert!(false, "missing pair witness");
        }
        let y = y_discrepancy(e.p(), e.q(), f, fam);
        if let Some(Witness::Classifier { h }) = y.witness {
            prop_assert!((y_discrepancy_value(e.p(), e.q(), f, fam.get(h)) - y.value.as_f64()).abs() < 1e-12);
        } else {
            prop_assert!(false, "missing classifier witness");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn decomposition_is_exact_with_a_shared_prior(seed in any::<u64>(), m in 0usize..=2, n in 0usize..=2) {
        let class = class_from(seed, &ClassShape::enumerable(PriorCoupling::Shared));
        let rng = RngSpec::new(seed, 0);
        for l in standard_zoo(class.family(), &[0]) {
            let direct = overall_risk(l.as_ref(), &class, m, n, RiskMode::Exact, &rng).unwrap().value;
            let split = overall_risk_decomposed(l.as_ref(), &class, m, n).unwrap();
            prop_assert!((direct - split).abs() < 1e-12, "{}: {} vs {}", l.name(), direct, split);
        }
    }
}
