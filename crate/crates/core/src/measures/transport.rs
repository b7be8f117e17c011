use super::{MeasureResult, MeasureValue};
use crate::error::{Error, Result};
use crate::model::{Domain, FiniteDistribution, MetricKind, PointId};

/// Largest support size handed to the general transport solver.
pub const TRANSPORT_LIMIT: usize = 512;

const EPS: f64 = 1e-14;

/// `W^d(p‖q) = (min over couplings of E|x₁ − x₂|^d)^{1/d}` under the domain metric.
///
/// One-dimensional euclidean domains use the quantile coupling, circles with
/// `d = 1` use the median-shift formula, everything else a min-cost-flow solve.
pub fn wasserstein(domain: &Domain, p: &FiniteDistribution, q: &FiniteDistribution, d: f64) -> Result<MeasureResult> {
    if !(d >= 1.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("wasserstein exponent must be >= 1, got {d}")));
    }
    let name = if d == 1.0 { "wasserstein".to_string() } else { format!("wasserstein-{d}") };
    let value = match domain.metric() {
        MetricKind::Discrete => return Err(Error::NoMetric),
        _ if p == q => 0.0,
        MetricKind::Euclidean if domain.dimension() == Some(1) => line_quantile(domain, p, q, d),
        MetricKind::AngularDegrees if d == 1.0 => circle_w1(domain, p, q),
        _ => {
            let (ps, qs) = (p.support(), q.support());
            let largest = ps.len().max(qs.len());
            if largest > TRANSPORT_LIMIT {
                return Err(Error::TooLarge {
                    what: "transport support",
                    size: largest as f64,
                    limit: TRANSPORT_LIMIT as f64,
                });
            }
            let supply: Vec<f64> = ps.iter().map(|&x| p.mass(x)).collect();
            let demand: Vec<f64> = qs.iter().map(|&x| q.mass(x)).collect();
            let cost = |i: usize, j: usize| domain.distance(ps[i], qs[j]).expect("metric domain").powf(d);
            transport_cost(&supply, &demand, cost).powf(1.0 / d)
        }
    };
    Ok(MeasureResult::new(name, MeasureValue::Finite(value), None))
}

fn coordinate(domain: &Domain, x: PointId) -> f64 {
    domain.point(x).coords.as_ref().expect("euclidean point")[0]
}

fn line_quantile(domain: &Domain, p: &FiniteDistribution, q: &FiniteDistribution, d: f64) -> f64 {
    let atoms = |dist: &FiniteDistribution| {
        let mut v: Vec<(f64, f64)> = dist.support().iter().map(|&x| (coordinate(domain, x), dist.mass(x))).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (atoms(p), atoms(q));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    while i < a.len() && j < b.len() {
        let moved = ra.min(rb);
        cost += moved * (a[i].0 - b[j].0).abs().powf(d);
        ra -= moved;
        rb -= moved;
        if ra <= EPS {
            i += 1;
            ra = a.get(i).map_or(0.0, |t| t.1);
        }
        if rb <= EPS {
            j += 1;
            rb = b.get(j).map_or(0.0, |t| t.1);
        }
    }
    cost.powf(1.0 / d)
}

/// `W₁` on the circle: `min_α ∫ |F(θ) − G(θ) − α| dθ`, attained at a weighted median of `F − G`.
fn circle_w1(domain: &Domain, p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    let mut marks: Vec<(f64, f64)> = p
        .support()
        .iter()
        .map(|&x| (x, p.mass(x)))
        .chain(q.support().iter().map(|&x| (x, -q.mass(x))))
        .map(|(x, m)| (domain.point(x).angle.expect("angular point"), m))
        .collect();
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(marks.len());
    let mut level = 0.0;
    for (i, &(theta, m)) in marks.iter().enumerate() {
        level += m;
        let next = if i + 1 < marks.len() { marks[i + 1].0 } else { marks[0].0 + 360.0 };
        if next > theta {
            arcs.push((level, next - theta));
        }
    }
    let total_len: f64 = arcs.iter().map(|a| a.1).sum();
    let mut by_level = arcs.clone();
    by_level.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut alpha = by_level[0].0;
    for &(lvl, len) in &by_level {
        acc += len;
        alpha = lvl;
        if acc >= total_len / 2.0 {
            break;
        }
    }
    arcs.iter().map(|&(lvl, len)| len * (lvl - alpha).abs()).sum()
}

/// Minimum total cost of moving `supply` onto `demand` with per-unit cost `cost(i, j)`
/// (successive shortest paths with potentials; masses are real-valued).
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (ns, nt) = (supply.len(), demand.len());
    let c: Vec<f64> = (0..ns).flat_map(|i| (0..nt).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    let mut flow = vec![0.0; ns * nt];
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let nodes = ns + nt;
    let mut pot = vec![0.0; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    while sup.iter().any(|&s| s > EPS) && dem.iter().any(|&d| d > EPS) {
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..ns {
            if sup[i] > EPS {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < ns {
                for j in 0..nt {
                    let v = ns + j;
                    let nd = best + (c[u * nt + j] + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - ns;
                for i in 0..ns {
                    if flow[i * nt + j] > EPS {
                        let nd = best + (-c[i * nt + j] + pot[u] - pot[i]).max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..nt)
            .filter(|&j| dem[j] > EPS && dist[ns + j].is_finite())
            .min_by(|&a, &b| dist[ns + a].total_cmp(&dist[ns + b]));
        let Some(tj) = target else { break };
        let t = ns + tj;
        let cap = dist[t];
        for v in 0..nodes {
            pot[v] += dist[v].min(cap);
        }

        let mut amount = dem[tj];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= ns {
                amount = amount.min(flow[v * nt + (u - ns)]);
            }
            v = u;
        }
        amount = amount.min(sup[v]);

        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < ns {
                flow[u * nt + (v - ns)] += amount;
            } else {
                flow[v * nt + (u - ns)] -= amount;
            }
            v = u;
        }
        sup[v] -= amount;
        dem[tj] -= amount;
    }
    flow.iter().zip(&c).map(|(f, c)| f.max(0.0) * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Domain {
        Domain::new(xs.iter().map(|&x| Point { coords: Some(vec![x]), angle: None }).collect(), MetricKind::Euclidean).unwrap()
    }

    fn circle(angles: &[f64]) -> Domain {
        Domain::new(angles.iter().map(|&a| Point { coords: None, angle: Some(a) }).collect(), MetricKind::AngularDegrees)
            .unwrap()
    }

    fn dist(v: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn equal_is_zero_and_discrete_has_no_metric() {
        let dom = line(&[0.0, 1.0]);
        let p = dist(&[0.3, 0.7]);
        assert_eq!(wasserstein(&dom, &p, &p, 1.0).unwrap().value, MeasureValue::Finite(0.0));
        assert!(matches!(wasserstein(&Domain::discrete(2), &p, &dist(&[1.0, 0.0]), 1.0), Err(Error::NoMetric)));
    }

    #[test]
    fn two_point_matches_coupling_enumeration() {
        let dom = line(&[0.0, 2.5]);
        for (a, b) in [(0.3, 0.6), (0.9, 0.1), (0.5, 0.5), (0.0, 1.0)] {
            let p = dist(&[a, 1.0 - a]);
            let q = dist(&[b, 1.0 - b]);
            for d in [1.0, 2.0, 3.0] {
                let lo = (a + b - 1.0).max(0.0);
                let hi = a.min(b);
                let cost_at = |t: f64| {
                    let off = (a - t) + (b - t);
                    (off * 2.5f64.powf(d)).max(0.0)
                };
                let oracle = cost_at(lo).min(cost_at(hi)).powf(1.0 / d);
                let w = wasserstein(&dom, &p, &q, d).unwrap().value.as_f64();
                assert!((w - oracle).abs() < 1e-9, "a={a} b={b} d={d}: {w} vs {oracle}");
            }
        }
    }

    #[test]
    fn circle_arcs() {
        let angles: Vec<f64> = (0..360).map(|i| i as f64 + 0.5).collect();
        let dom = circle(&angles);
        let arc = |lo: usize, hi: usize| {
            let mut v = vec![0.0; 360];
            for a in lo..hi {
                v[a] = 1.0 / (hi - lo) as f64;
            }
            dist(&v)
        };
        let w = wasserstein(&dom, &arc(0, 90), &arc(90, 180), 1.0).unwrap().value.as_f64();
        assert!((w - 90.0).abs() < 1e-9);
        let w = wasserstein(&dom, &arc(270, 360), &arc(90, 180), 1.0).unwrap().value.as_f64();
        assert!((w - 135.0).abs() < 1e-9);
    }

    #[test]
    fn guard_applies_to_general_solver() {
        let n = TRANSPORT_LIMIT + 1;
        let dom = Domain::new(
            (0..n).map(|i| Point { coords: Some(vec![i as f64, 0.0]), angle: None }).collect(),
            MetricKind::Euclidean,
        )
        .unwrap();
        let u = dist(&vec![1.0 / n as f64; n]);
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        assert!(matches!(wasserstein(&dom, &u, &dist(&v), 1.0), Err(Error::TooLarge { .. })));
    }

    fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.05f64..1.0], n).prop_map(|mut v| {
            if v.iter().all(|&x| x == 0.0) {
                v[0] = 1.0;
            }
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn general_solver_matches_quantile_coupling(
            xs in proptest::collection::vec(-5.0f64..5.0, 6),
            a in masses(6),
            b in masses(6),
            d in prop_oneof![Just(1.0), Just(2.0)],
        ) {
            let dom = line(&xs);
            let (p, q) = (dist(&a), dist(&b));
            let fast = wasserstein(&dom, &p, &q, d).unwrap().value.as_f64();
            let (ps, qs) = (p.support(), q.support());
            let sa: Vec<f64> = ps.iter().map(|&x| p.mass(x)).collect();
            let sb: Vec<f64> = qs.iter().map(|&x| q.mass(x)).collect();
            let lp = transport_cost(&sa, &sb, |i, j| (xs[ps[i]] - xs[qs[j]]).abs().powf(d)).powf(1.0 / d);
            prop_assert!((fast - lp).abs() < 1e-9, "{} vs {}", fast, lp);
        }

        #[test]
        fn circle_formula_matches_general_solver(
            angles in proptest::collection::vec(0.0f64..360.0, 7),
            a in masses(7),
            b in masses(7),
        ) {
            let dom = circle(&angles);
            let (p, q) = (dist(&a), dist(&b));
            let fast = wasserstein(&dom, &p, &q, 1.0).unwrap().value.as_f64();
            let (ps, qs) = (p.support(), q.support());
            let sa: Vec<f64> = ps.iter().map(|&x| p.mass(x)).collect();
            let sb: Vec<f64> = qs.iter().map(|&x| q.mass(x)).collect();
            let lp = transport_cost(&sa, &sb, |i, j| dom.distance(ps[i], qs[j]).unwrap());
            prop_assert!((fast - lp).abs() < 1e-7, "{} vs {}", fast, lp);
        }

        #[test]
        fn triangle_inequality(
            xs in proptest::collection::vec(-3.0f64..3.0, 5),
            a in masses(5),
            b in masses(5),
            c in masses(5),
        ) {
            let dom = line(&xs);
            let (p, q, r) = (dist(&a), dist(&b), dist(&c));
            let w = |u: &FiniteDistribution, v: &FiniteDistribution| wasserstein(&dom, u, v, 1.0).unwrap().value.as_f64();
            prop_assert!(w(&p, &r) <= w(&p, &q) + w(&q, &r) + 1e-9);

            let cdom = circle(&xs.iter().map(|x| (x + 3.0) * 60.0).collect::<Vec<_>>());
            let wc = |u: &FiniteDistribution, v: &FiniteDistribution| wasserstein(&cdom, u, v, 1.0).unwrap().value.as_f64();
            prop_assert!(wc(&p, &r) <= wc(&p, &q) + wc(&q, &r) + 1e-9);
        }
    }
}
