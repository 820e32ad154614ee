mod common;

use std::collections::BTreeMap;

use common::{brute_classify, node_name};
use latent_graph_core::graph::{EdgeClass, InteractionGraph};
use latent_graph_core::inference::{classify, infer_all, FollowStatus, InteractionEvent, Thresholds, WindowGrid};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Stream {
    grid: WindowGrid,
    events: Vec<InteractionEvent>,
    maybe: u64,
    forsure: u64,
}

fn stream(max_ids: usize) -> impl Strategy<Value = Stream> {
    (1i64..=40, 1u64..=10, -50i64..50, 1u64..=4, 0u64..=3, 2..=max_ids)
        .prop_flat_map(|(len, n, origin, maybe, extra, ids)| {
            let span = len * n as i64;
            let event = (0..ids, 1..ids, origin - len..origin + span + len, 0u32..50);
            prop::collection::vec(event, 0..=200).prop_map(move |raw| Stream {
                grid: WindowGrid::new(origin, len, n).unwrap(),
                events: raw
                    .into_iter()
                    .enumerate()
                    .map(|(k, (s, hop, time, c))| InteractionEvent {
                        source: node_name(s),
                        target: node_name((s + hop) % ids),
                        time,
                        post_id: "p".into(),
                        comment_id: format!("c{c:02}-{k:03}"),
                    })
                    .collect(),
                maybe,
                forsure: maybe + extra,
            })
        })
}

fn by_pair(events: &[InteractionEvent]) -> BTreeMap<(String, String), Vec<InteractionEvent>> {
    let mut out: BTreeMap<(String, String), Vec<InteractionEvent>> = BTreeMap::new();
    for e in events {
        out.entry((e.source.clone(), e.target.clone())).or_default().push(e.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn infer_all_matches_window_materialization(s in stream(10)) {
        let t = Thresholds::new(s.maybe, s.forsure).unwrap();
        let got = infer_all(&s.events, &s.grid, t);
        let mut expected = Vec::new();
        for ((src, dst), evs) in by_pair(&s.events) {
            let b = brute_classify(&evs, &s.grid, s.maybe, s.forsure);
            if b.total > 0 {
                expected.push((src, dst, b));
            }
        }
        prop_assert_eq!(got.len(), expected.len());
        for (e, (src, dst, b)) in got.iter().zip(&expected) {
            prop_assert_eq!((&e.source, &e.target), (src, dst));
            prop_assert_eq!(e.windows_hit, b.windows_hit);
            prop_assert_eq!(e.total_comments, b.total);
            prop_assert_eq!(e.status, b.status);
            prop_assert_eq!(e.first_seen, b.first_seen);
            prop_assert_eq!(e.last_seen, b.last_seen);
            prop_assert_eq!(e.status_time, b.status_time);
            prop_assert_eq!(e.maybe_time, b.maybe_time);
        }
    }

    #[test]
    fn new_window_never_lowers_status(s in stream(2), pick in any::<prop::sample::Index>()) {
        let t = Thresholds::new(s.maybe, s.forsure).unwrap();
        let refs: Vec<&InteractionEvent> = s.events.iter().filter(|e| e.source == "n00").collect();
        let before = classify(&refs, &s.grid, t);
        let empty: Vec<u64> = (0..s.grid.n)
            .filter(|w| refs.iter().all(|e| s.grid.index(e.time) != Some(*w)))
            .collect();
        prop_assume!(!empty.is_empty());
        let w = empty[pick.index(empty.len())];
        let added = InteractionEvent {
            source: "n00".into(),
            target: "n01".into(),
            time: s.grid.origin + w as i64 * s.grid.window_len,
            post_id: "p".into(),
            comment_id: "zz".into(),
        };
        let mut more = refs.clone();
        more.push(&added);
        let after = classify(&more, &s.grid, t);
        prop_assert_eq!(after.windows_hit, before.windows_hit + 1);
        prop_assert!(after.status >= before.status);
    }

    #[test]
    fn threshold_extremes(s in stream(6)) {
        let never = infer_all(&s.events, &s.grid, Thresholds::new(s.maybe, u64::MAX).unwrap());
        prop_assert!(never.iter().all(|e| e.status != FollowStatus::ForSure));
        let eager = infer_all(&s.events, &s.grid, Thresholds::new(1, s.forsure.max(1)).unwrap());
        prop_assert!(eager.iter().all(|e| e.status >= FollowStatus::Maybe));
    }

    #[test]
    fn status_classes_nest(s in stream(8)) {
        let edges = infer_all(&s.events, &s.grid, Thresholds::new(s.maybe, s.forsure).unwrap());
        for e in edges.iter().filter(|e| e.status == FollowStatus::ForSure) {
            prop_assert!(e.windows_hit >= s.maybe);
        }
        let all = InteractionGraph::build(&edges, EdgeClass::All, [], false);
        let sure = InteractionGraph::build(&edges, EdgeClass::ForSure, [], false);
        for e in sure.edges() {
            prop_assert!(all.edges().iter().any(|a| a.key() == e.key()));
        }
    }
}
