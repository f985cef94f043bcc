mod common;

use approx::assert_abs_diff_eq;
use common::{random_chain, RateFamily};
use pathmeasure::{PathConstraint, RateFunction};
use proptest::prelude::*;

fn matrix_power(a: &[Vec<u64>], n: usize) -> Vec<Vec<u64>> {
    let size = a.len();
    let mut out: Vec<Vec<u64>> = (0..size)
        .map(|i| (0..size).map(|j| u64::from(i == j)).collect())
        .collect();
    for _ in 0..n {
        out = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| (0..size).map(|k| out[i][k] * a[k][j]).sum())
                    .collect()
            })
            .collect();
    }
    out
}

fn rate_strategy() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        (0.0..3.0f64).prop_map(RateFunction::constant),
        (0.0..2.0f64, 0.0..1.0f64, 0.1..10.0f64, 0.0..6.3f64).prop_map(|(a, frac, w, phi)| {
            RateFunction::sinusoid(a, a * frac, w, phi)
        }),
        (prop::collection::vec(0.0..3.0f64, 1..5), 0.05..0.5f64).prop_map(|(values, gap)| {
            let breakpoints = (0..values.len()).map(|k| k as f64 * gap).collect();
            RateFunction::PiecewiseConstant { breakpoints, values }
        }),
        (prop::collection::vec(0.0..3.0f64, 1..5), 0.05..0.5f64).prop_map(|(values, gap)| {
            let knots = (0..values.len()).map(|k| k as f64 * gap).collect();
            RateFunction::PiecewiseLinear { knots, values }
        }),
        prop::collection::vec(0.0..3.0f64, 2..12)
            .prop_map(|values| RateFunction::Tabulated { horizon: 2.0, values }),
    ]
}

fn midpoint_sum(k: &RateFunction, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    (0..cells)
        .map(|c| k.evaluate(a + (c as f64 + 0.5) * h).unwrap())
        .sum::<f64>()
        * h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn path_counts_match_adjacency_powers(seed in any::<u64>(), n in 0usize..4) {
        let chain = random_chain(seed, RateFamily::Constant, 1.0);
        let g = chain.graph();
        let power = matrix_power(&g.multi_adjacency(), n);
        for (i, row) in power.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                let paths = g
                    .enumerate_paths(n, PathConstraint::Between { source: i, terminus: j })
                    .unwrap();
                prop_assert_eq!(paths.len() as u64, count);
                for p in &paths {
                    prop_assert_eq!(p.source(), i);
                    prop_assert_eq!(p.terminus(), j);
                    prop_assert_eq!(p.len(), n);
                }
            }
            let ending = g.enumerate_paths(n, PathConstraint::Terminus(i)).unwrap();
            let column: u64 = (0..g.vertex_count()).map(|s| power[s][i]).sum();
            prop_assert_eq!(ending.len() as u64, column);
        }
        let all = g.enumerate_paths(n, PathConstraint::Unconstrained).unwrap();
        let total: u64 = power.iter().flatten().sum();
        prop_assert_eq!(all.len() as u64, total);
    }

    #[test]
    fn double_of_underlying(seed in any::<u64>()) {
        let chain = random_chain(seed, RateFamily::Constant, 1.0);
        let x = chain.graph().underlying();
        let d = x.double();
        prop_assert_eq!(d.edge_count(), 2 * x.edges().len());
        let stats = d.degree_stats();
        prop_assert_eq!(&stats.in_degree, &stats.out_degree);
        prop_assert_eq!(&stats.out_degree, &x.degrees());
        prop_assert_eq!(d.underlying().edges().len(), 2 * x.edges().len());
    }

    #[test]
    fn integral_matches_riemann_sum(k in rate_strategy(), a in 0.0..1.0f64, len in 0.0..1.0f64) {
        let b = a + len;
        let exact = k.integrate(a, b).unwrap();
        let approx = midpoint_sum(&k, a, b, 20_000);
        // Midpoint error is O(h^2) away from jumps and O(h) at each jump.
        prop_assert!((exact - approx).abs() <= 1e-3 * (1.0 + exact), "{exact} vs {approx}");
    }

    #[test]
    fn integral_is_additive(k in rate_strategy(), a in 0.0..0.6f64, m in 0.0..0.6f64, n in 0.0..0.6f64) {
        let (b, c) = (a + m, a + m + n);
        let whole = k.integrate(a, c).unwrap();
        let parts = k.integrate(a, b).unwrap() + k.integrate(b, c).unwrap();
        assert_abs_diff_eq!(whole, parts, epsilon = 1e-12 * (1.0 + whole));
        prop_assert!(whole >= 0.0);
    }

    #[test]
    fn bound_dominates_values(k in rate_strategy(), t in 0.0..2.0f64) {
        let bound = k.rate_bound(t);
        for step in 0..=400 {
            let s = t * step as f64 / 400.0;
            let v = k.evaluate(s).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= bound + 1e-12, "k({s}) = {v} > {bound}");
        }
    }

    #[test]
    fn rate_json_round_trip(k in rate_strategy()) {
        let json = serde_json::to_string(&k).unwrap();
        let back: RateFunction = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(k, back);
    }
}

#[test]
fn reversed_interval_rejected() {
    let k = RateFunction::constant(1.0);
    assert!(k.integrate(0.5, 0.2).is_err());
}
