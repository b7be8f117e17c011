//! JSON class-specification files.
//!
//! ```json
//! {
//!   "domain": {"metric": "discrete", "points": [{"id": 0}, {"id": 1}]},
//!   "labels": ["neg", "pos"],
//!   "classifiers": [{"id": "f0", "table": [0, 1]}, {"id": "f1", "table": [1, 1]}],
//!   "uda_class": {"entries": [
//!     {"weight": 1.0, "p": {"0": 1.0}, "q": {"1": 1.0}, "prior_f": {"f0": 0.5, "f1": 0.5}}
//!   ]}
//! }
//! ```
//!
//! Classifier tables hold label indices. `p` and `q` are sparse maps from point id
//! to mass; `prior_f` maps classifier id to mass. Map order is preserved on
//! parse and canonical (ascending id, family order) on [`to_spec`], so
//! `to_json(validate(parse(to_json(c))))` is byte-identical to `to_json(c)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Issue, ValidationError};
use crate::model::{
    ClassEntry, Classifier, ClassifierFamily, Domain, FiniteDistribution, Label, LabelSet, MetricKind, Point, UdaClass,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpecFile {
    pub domain: DomainSpec,
    pub labels: Vec<String>,
    pub classifiers: Vec<ClassifierSpec>,
    pub uda_class: UdaClassSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub metric: MetricKind,
    pub points: Vec<PointSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub id: String,
    pub table: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UdaClassSpec {
    pub entries: Vec<EntrySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub weight: f64,
    pub p: MassMap,
    pub q: MassMap,
    pub prior_f: MassMap,
}

/// A JSON object of `key -> mass` that keeps its key order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MassMap(pub Vec<(String, f64)>);

impl Serialize for MassMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for MassMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MassVisitor;

        impl<'de> Visitor<'de> for MassVisitor {
            type Value = MassMap;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping ids to masses")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<MassMap, A::Error> {
                let mut out = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(MassMap(out))
            }
        }

        deserializer.deserialize_map(MassVisitor)
    }
}

pub fn parse(json: &str) -> Result<ClassSpecFile, Error> {
    Ok(serde_json::from_str(json)?)
}

/// Parses and validates in one step.
pub fn load_class(json: &str) -> Result<UdaClass, Error> {
    Ok(validate_class(&parse(json)?)?)
}

pub fn to_json(spec: &ClassSpecFile) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("class spec serializes");
    s.push('\n');
    s
}

pub fn class_to_json(class: &UdaClass) -> String {
    to_json(&to_spec(class))
}

/// Builds a [`UdaClass`] from a parsed file, reporting every violated invariant.
pub fn validate_class(raw: &ClassSpecFile) -> Result<UdaClass, ValidationError> {
    let mut err = ValidationError::default();

    let n = raw.domain.points.len();
    let mut seen = vec![false; n];
    for (i, pt) in raw.domain.points.iter().enumerate() {
        if pt.id >= n || std::mem::replace(&mut seen[pt.id], true) {
            err.push(Issue::ShapeMismatch {
                context: format!("domain point {i}"),
                detail: format!("point ids must be unique and contiguous 0..{n}, got {}", pt.id),
            });
        }
    }
    let mut points = vec![Point::default(); n];
    for pt in &raw.domain.points {
        if pt.id < n {
            points[pt.id] = Point { coords: pt.coords.clone(), angle: pt.angle };
        }
    }
    let domain = Domain::new(points, raw.domain.metric).map_err(|e| err.issues.extend(e.issues)).ok();

    let labels = LabelSet::new(raw.labels.clone()).map_err(|e| err.issues.extend(e.issues)).ok();
    let k = raw.labels.len();

    let mut classifiers = Vec::with_capacity(raw.classifiers.len());
    for c in &raw.classifiers {
        if let Some(bad) = c.table.iter().find(|&&y| y as usize >= k) {
            err.push(Issue::ShapeMismatch {
                context: format!("classifier {:?}", c.id),
                detail: format!("label index {bad} out of range for k = {k}"),
            });
        }
        classifiers.push(Classifier::new(
            c.id.clone(),
            c.table.iter().map(|&y| y.min(u32::from(Label::MAX)) as Label).collect(),
        ));
    }
    let family = match labels.clone() {
        Some(l) => ClassifierFamily::new(l, n, classifiers)
            .map_err(|e| {
                err.issues.extend(
                    e.issues
                        .into_iter()
                        .filter(|i| !matches!(i, Issue::ShapeMismatch { detail, .. } if detail.starts_with("label index"))),
                )
            })
            .ok(),
        None => None,
    };
    let ids: HashMap<&str, usize> = raw.classifiers.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();

    let mut interned: Vec<Arc<FiniteDistribution>> = Vec::new();
    let mut entries = Vec::with_capacity(raw.uda_class.entries.len());
    for (i, e) in raw.uda_class.entries.iter().enumerate() {
        let p = dense_mass(&e.p, n, &format!("entry {i} p"), &mut err);
        let q = dense_mass(&e.q, n, &format!("entry {i} q"), &mut err);
        let mut prior = Vec::with_capacity(e.prior_f.0.len());
        let mut sum = 0.0;
        let mut bad_mass = false;
        for (id, w) in &e.prior_f.0 {
            sum += w;
            bad_mass |= !w.is_finite() || *w < 0.0;
            match ids.get(id.as_str()) {
                Some(&j) => prior.push((j, *w)),
                None => err.push(Issue::DanglingClassifierId {
                    context: format!("entry {i} prior_f"),
                    id: id.clone(),
                }),
            }
        }
        if bad_mass || (sum - 1.0).abs() > crate::model::MASS_TOLERANCE {
            err.push(Issue::NonNormalized { context: format!("entry {i} prior_f"), sum });
        }
        if !e.weight.is_finite() || e.weight < 0.0 {
            err.push(Issue::NonNormalized { context: format!("entry {i} weight"), sum: e.weight });
        }
        if let (Some(p), Some(q)) = (p, q) {
            let p = intern(&mut interned, p);
            let q = intern(&mut interned, q);
            entries.push(ClassEntry::from_sparse(e.weight, p, q, merge_prior(prior)));
        }
    }
    let total: f64 = raw.uda_class.entries.iter().map(|e| e.weight).sum();
    if (total - 1.0).abs() > crate::model::MASS_TOLERANCE {
        err.push(Issue::NonNormalized { context: "entry weights".into(), sum: total });
    }
    if raw.uda_class.entries.is_empty() {
        err.push(Issue::ShapeMismatch {
            context: "uda_class".into(),
            detail: "no entries".into(),
        });
    }

    if !err.issues.is_empty() {
        return Err(err);
    }
    let (domain, family) = (domain.expect("checked"), family.expect("checked"));
    UdaClass::new(Arc::new(domain), Arc::new(family), entries)
}

fn dense_mass(map: &MassMap, n: usize, context: &str, err: &mut ValidationError) -> Option<FiniteDistribution> {
    let mut probs = vec![0.0; n];
    let mut ok = true;
    for (key, w) in &map.0 {
        match key.parse::<usize>() {
            Ok(id) if id < n => probs[id] += w,
            _ => {
                ok = false;
                err.push(Issue::ShapeMismatch {
                    context: context.into(),
                    detail: format!("unknown point id {key:?}"),
                });
            }
        }
    }
    match FiniteDistribution::with_context(probs, context) {
        Ok(d) if ok => Some(d),
        Ok(_) => None,
        Err(e) => {
            err.issues.extend(e.issues);
            None
        }
    }
}

fn intern(pool: &mut Vec<Arc<FiniteDistribution>>, d: FiniteDistribution) -> Arc<FiniteDistribution> {
    if let Some(a) = pool.iter().find(|a| ***a == d) {
        return a.clone();
    }
    let a = Arc::new(d);
    pool.push(a.clone());
    a
}

fn merge_prior(mut prior: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    prior.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(prior.len());
    for (i, w) in prior {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += w,
            _ => out.push((i, w)),
        }
    }
    out
}

/// Canonical file form of a class: supports in ascending point id, priors in family order.
pub fn to_spec(class: &UdaClass) -> ClassSpecFile {
    let domain = class.domain();
    let family = class.family();
    let points = domain
        .points()
        .iter()
        .enumerate()
        .map(|(id, pt)| PointSpec { id, coords: pt.coords.clone(), angle: pt.angle })
        .collect();
    let classifiers = family
        .classifiers()
        .iter()
        .map(|c| ClassifierSpec { id: c.id().to_string(), table: c.table().iter().map(|&y| u32::from(y)).collect() })
        .collect();
    let sparse = |d: &FiniteDistribution| MassMap(d.support().iter().map(|&x| (x.to_string(), d.mass(x))).collect());
    let entries = class
        .entries()
        .iter()
        .map(|e| EntrySpec {
            weight: e.weight(),
            p: sparse(e.p()),
            q: sparse(e.q()),
            prior_f: MassMap(e.prior().iter().map(|&(f, w)| (family.get(f).id().to_string(), w)).collect()),
        })
        .collect();
    ClassSpecFile {
        domain: DomainSpec { metric: domain.metric(), points },
        labels: family.labels().names().to_vec(),
        classifiers,
        uda_class: UdaClassSpec { entries },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"metric": "discrete", "points": [{"id": 0}, {"id": 1}]},
        "labels": ["a", "b"],
        "classifiers": [{"id": "f0", "table": [0, 1]}, {"id": "f1", "table": [1, 1]}],
        "uda_class": {"entries": [{"weight": 1.0, "p": {"0": 1.0}, "q": {"1": 1.0}, "prior_f": {"f0": 0.5, "f1": 0.5}}]}
    }"#;

    #[test]
    fn minimal_class_is_accepted() {
        let c = load_class(MINIMAL).unwrap();
        assert_eq!(c.entries().len(), 1);
        assert_eq!(c.entry(0).prior(), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn weights_off_by_a_tenth_are_rejected() {
        let bad = MINIMAL.replace(
            r#"{"weight": 1.0, "p": {"0": 1.0}, "q": {"1": 1.0}, "prior_f": {"f0": 0.5, "f1": 0.5}}"#,
            r#"{"weight": 0.6, "p": {"0": 1.0}, "q": {"1": 1.0}, "prior_f": {"f0": 1.0}},
               {"weight": 0.5, "p": {"0": 1.0}, "q": {"1": 1.0}, "prior_f": {"f1": 1.0}}"#,
        );
        let err = validate_class(&parse(&bad).unwrap()).unwrap_err();
        assert!(err.has_non_normalized());
    }

    #[test]
    fn unknown_classifier_id_is_dangling() {
        let bad = MINIMAL.replace(r#""f1": 0.5}"#, r#""f99": 0.5}"#);
        let err = validate_class(&parse(&bad).unwrap()).unwrap_err();
        assert!(err.has_dangling_id());
    }

    #[test]
    fn every_issue_is_reported() {
        let bad = r#"{
            "domain": {"metric": "discrete", "points": [{"id": 0}, {"id": 0}]},
            "labels": ["a", "b"],
            "classifiers": [{"id": "f0", "table": [0, 2]}],
            "uda_class": {"entries": [{"weight": 0.9, "p": {"0": 0.0}, "q": {"5": 1.0}, "prior_f": {"g": 1.0}}]}
        }"#;
        let err = validate_class(&parse(bad).unwrap()).unwrap_err();
        assert!(err.has_shape_mismatch());
        assert!(err.has_empty_support());
        assert!(err.has_dangling_id());
        assert!(err.has_non_normalized());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replacen(r#""labels""#, r#""extra": 1, "labels""#, 1);
        assert!(matches!(parse(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let c = load_class(MINIMAL).unwrap();
        let a = class_to_json(&c);
        let b = class_to_json(&load_class(&a).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_keys_keep_numeric_order() {
        let mut probs = vec![0.0; 12];
        probs[2] = 0.5;
        probs[10] = 0.5;
        let d = FiniteDistribution::new(probs).unwrap();
        let dom = Arc::new(Domain::discrete(12));
        let fam = Arc::new(
            ClassifierFamily::new(LabelSet::numbered(2), 12, vec![Classifier::new("f", vec![0; 12])]).unwrap(),
        );
        let c = UdaClass::new(dom, fam, vec![ClassEntry::new(1.0, d.clone(), d, &[1.0])]).unwrap();
        let json = class_to_json(&c);
        assert!(json.find("\"2\"").unwrap() < json.find("\"10\"").unwrap());
    }
}
