use proptest::prelude::*;
use tempora::centrality::temporal_closeness;
use tempora::eval::{kendall_tau_b, spearman};
use tempora::graph::{parse_edge_list_str, time_split, ParseOptions, TemporalGraph};
use tempora::nn::{normalize_adjacency, DenseMatrix};
use tempora::paths::{count_paths_length_k, temporal_sssp, EventGraph};

fn observations() -> impl Strategy<Value = Vec<(u8, u8, u16)>> {
    prop::collection::vec((0u8..7, 0u8..7, 0u16..40), 1..30).prop_map(|mut v| {
        v.retain(|(s, t, _)| s != t);
        v
    })
}

fn graph(obs: &[(u8, u8, u16)], directed: bool) -> TemporalGraph {
    let named: Vec<_> = obs
        .iter()
        .map(|&(s, t, time)| (format!("v{s}"), format!("v{t}"), f64::from(time)))
        .collect();
    TemporalGraph::from_observations(&named, directed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn edge_lists_round_trip(obs in observations(), directed in any::<bool>()) {
        prop_assume!(!obs.is_empty());
        let g = graph(&obs, directed);
        let opts = ParseOptions { directed, ..ParseOptions::default() };
        let back = parse_edge_list_str(&g.to_edge_list_string(), &opts).unwrap();
        prop_assert_eq!(back.names(), g.names());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn wider_windows_never_lose_paths(obs in observations(), d1 in 1u16..10, extra in 0u16..10) {
        prop_assume!(!obs.is_empty());
        let g = graph(&obs, true);
        let narrow = EventGraph::new(&g, f64::from(d1)).unwrap();
        let wide = EventGraph::new(&g, f64::from(d1 + extra)).unwrap();
        for k in 1..=3 {
            let a = count_paths_length_k(&narrow, k).unwrap();
            let b = count_paths_length_k(&wide, k).unwrap();
            for (seq, c) in &a.counts {
                prop_assert!(b.counts.get(seq).copied().unwrap_or(0) >= *c);
            }
        }
        for s in 0..g.node_count() {
            let a = temporal_sssp(&narrow, s).unwrap();
            let b = temporal_sssp(&wide, s).unwrap();
            for t in 0..g.node_count() {
                if a.is_reachable(t) {
                    prop_assert!(b.is_reachable(t) && b.dist[t] <= a.dist[t]);
                }
            }
        }
        let ca = temporal_closeness(&g, f64::from(d1)).unwrap();
        let cb = temporal_closeness(&g, f64::from(d1 + extra)).unwrap();
        for (x, y) in ca.values.iter().zip(&cb.values) {
            prop_assert!(y + 1e-12 >= *x);
        }
    }

    #[test]
    fn split_partitions_edges(obs in observations(), fraction in 0.05f64..0.95) {
        prop_assume!(!obs.is_empty());
        let g = graph(&obs, false);
        let split = time_split(&g, fraction).unwrap();
        let mut joined = split.train.edges().to_vec();
        joined.extend_from_slice(split.test.edges());
        prop_assert_eq!(joined.as_slice(), g.edges());
        prop_assert!(split.train.edge_count().is_multiple_of(2));
        prop_assert!(split
            .test
            .edges()
            .iter()
            .all(|e| e.time >= split.boundary_time));
    }

    #[test]
    fn rank_correlations_ignore_monotone_maps(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v - 4.0).collect();
        let rho = spearman(&x, &y);
        let tau = kendall_tau_b(&x, &y);
        prop_assert!((spearman(&cubed, &y) - rho).abs() < 1e-12);
        prop_assert!((kendall_tau_b(&cubed, &y) - tau).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&tau));
        prop_assert!((spearman(&y, &x) - rho).abs() < 1e-12);
    }

    #[test]
    fn normalization_keeps_symmetry(
        upper in prop::collection::vec(prop::option::of(0.1f64..5.0), 15)
    ) {
        let n = 6;
        let mut a = DenseMatrix::zeros(n, n);
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                if let Some(w) = it.next().flatten() {
                    a.set(i, j, w);
                    a.set(j, i, w);
                }
            }
        }
        let m = normalize_adjacency(&a, true).unwrap();
        for i in 0..n {
            prop_assert!(m.get(i, i) > 0.0);
            for j in 0..n {
                prop_assert!((m.get(i, j) - m.get(j, i)).abs() < 1e-12);
            }
        }
    }
}
