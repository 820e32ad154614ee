mod common;

use common::{edge, node_name};
use latent_graph_core::chains::{chain_census, extract_chains, Caps, ChainNode, Thread};
use latent_graph_core::graph::GraphSpec;
use latent_graph_core::inference::{FollowEdge, FollowStatus, InteractionEvent, Thresholds, WindowGrid};
use latent_graph_core::metrics::MetricsConfig;
use latent_graph_core::profiles::SparseVec;
use latent_graph_core::temporal::{snapshot_series, triad_series, AnalysisSpec, ClosureTime};
use proptest::prelude::*;

fn timed_edges() -> impl Strategy<Value = Vec<FollowEdge>> {
    let status = prop::sample::select(vec![FollowStatus::None, FollowStatus::Maybe, FollowStatus::ForSure]);
    prop::collection::vec((0usize..10, 1usize..10, status, 0i64..5000), 0..60).prop_map(|raw| {
        raw.into_iter()
            .map(|(s, hop, st, t)| edge(&node_name(s), &node_name((s + hop) % 10), 1, st, t))
            .collect()
    })
}

fn events() -> impl Strategy<Value = Vec<InteractionEvent>> {
    prop::collection::vec((0usize..6, 1usize..6, 0i64..600), 1..120).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(k, (s, hop, time))| InteractionEvent {
                source: node_name(s),
                target: node_name((s + hop) % 6),
                time,
                post_id: "p".into(),
                comment_id: format!("c{k:03}"),
            })
            .collect()
    })
}

fn threads() -> impl Strategy<Value = Vec<Thread>> {
    let node = (0i64..20, prop::collection::vec(-0.2f64..1.0, 4));
    prop::collection::vec(prop::collection::vec(node, 1..10), 1..8).prop_map(|ts| {
        ts.into_iter()
            .enumerate()
            .map(|(p, nodes)| {
                let nodes = nodes
                    .into_iter()
                    .enumerate()
                    .map(|(i, (time, v))| ChainNode::new(&format!("r{p}_{i}"), "agent", time, SparseVec::from_dense(&v)))
                    .collect();
                Thread::new(&format!("p{p}"), nodes)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn halving_intervals_keeps_totals(es in timed_edges(), half in 1i64..400) {
        let coarse = triad_series(&es, 2 * half, ClosureTime::FirstSeen).unwrap();
        let fine = triad_series(&es, half, ClosureTime::FirstSeen).unwrap();
        prop_assert_eq!(coarse.cumulative_all.last(), fine.cumulative_all.last());
        prop_assert_eq!(coarse.cumulative_forsure.last(), fine.cumulative_forsure.last());
        // each coarse boundary is also a fine boundary
        for (i, &(_, end)) in coarse.intervals.iter().enumerate() {
            let j = fine.intervals.iter().position(|&(_, e)| e == end);
            if let Some(j) = j {
                prop_assert_eq!(coarse.cumulative_all[i], fine.cumulative_all[j]);
            } else {
                prop_assert_eq!(coarse.cumulative_all[i], *fine.cumulative_all.last().unwrap());
            }
        }
    }

    #[test]
    fn snapshot_at_infinity_is_the_full_report(evs in events(), window in 1i64..200) {
        let grid = WindowGrid::covering(&evs, window).unwrap();
        let spec = AnalysisSpec {
            thresholds: Thresholds::new(2, 3).unwrap(),
            graph: GraphSpec::default(),
            metrics: MetricsConfig::default(),
            known_nodes: Vec::new(),
        };
        let (_, full) = spec.report(&evs, &grid).unwrap();
        let series = snapshot_series(&evs, &grid, &spec, &[i64::MAX]).unwrap();
        prop_assert_eq!(series.len(), 1);
        prop_assert_eq!(series[0].to_json().to_string(), full.to_json().to_string());
    }

    #[test]
    fn chains_respect_threshold_and_order(ts in threads(), threshold in 0.05f64..0.95) {
        let (chains, manifest) = extract_chains(&ts, threshold, Caps::default());
        prop_assert_eq!(manifest.chains, chains.len());
        for c in &chains {
            prop_assert_eq!(c.length + 1, c.nodes.len());
            prop_assert!(c.length >= 1);
            for pair in c.nodes.windows(2) {
                prop_assert!(pair[0].topic_vector.dot(&pair[1].topic_vector) > threshold);
                prop_assert!((pair[0].time, &pair[0].record_id) < (pair[1].time, &pair[1].record_id));
            }
        }
    }

    #[test]
    fn census_partitions_posts(ts in threads(), mut cuts in prop::collection::vec(0.01f64..0.99, 1..6)) {
        cuts.sort_by(f64::total_cmp);
        let rows = chain_census(&ts, &cuts).unwrap();
        for r in &rows {
            prop_assert_eq!(r.no_chain + r.len_eq_1 + r.len_gt_1, ts.len());
        }
        for w in rows.windows(2) {
            prop_assert!(w[1].len_gt_1 <= w[0].len_gt_1);
            prop_assert!(w[1].no_chain >= w[0].no_chain);
        }
    }
}
