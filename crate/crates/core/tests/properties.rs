use std::collections::BTreeMap;

use proptest::prelude::*;
use rplguard_core::detector::{
    classify_dio, compute_di_rank, ewma_step, AptState, Ewma, HelloMessage, RankEvidence,
    VerdictKind,
};
use rplguard_core::metrics::{detection_rates, pdr, plr};
use rplguard_core::rpl::{assign_initial_ranks, initial_routing, Rank, RoutingState};
use rplguard_core::scenario::{generate_topology, Area, ScenarioConfig};
use rplguard_core::{NodeId, SimTime};

/// `alpha * sum_{k=2..t} (1-alpha)^(t-k) x_k + (1-alpha)^(t-1) x_1`.
fn ewma_closed_form(alpha: f64, xs: &[f64]) -> f64 {
    let t = xs.len();
    let mut acc = (1.0 - alpha).powi(t as i32 - 1) * xs[0];
    for k in 2..=t {
        acc += alpha * (1.0 - alpha).powi((t - k) as i32) * xs[k - 1];
    }
    acc
}

fn small_cfg(seed: u64, nodes: usize, side: f64, fraction: f64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        node_count: nodes,
        area: Area::new(side, side),
        malicious_fraction: fraction,
        ..ScenarioConfig::default()
    }
}

proptest! {
    #[test]
    fn ewma_matches_closed_form(
        alpha in 0.01f64..=1.0,
        xs in prop::collection::vec(0.0f64..1000.0, 1..=50),
    ) {
        let mut e = Ewma::new(alpha).unwrap();
        let mut s = 0.0;
        for &x in &xs {
            s = e.update(x);
        }
        let oracle = ewma_closed_form(alpha, &xs);
        let scale = oracle.abs().max(f64::MIN_POSITIVE);
        prop_assert!((s - oracle).abs() / scale <= 1e-12, "{s} vs {oracle}");
    }

    #[test]
    fn ewma_stays_within_sample_range(
        alpha in 0.01f64..=1.0,
        xs in prop::collection::vec(-50.0f64..50.0, 1..100),
    ) {
        let mut e = Ewma::new(alpha).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in &xs {
            lo = lo.min(x);
            hi = hi.max(x);
            let s = e.update(x);
            prop_assert!(lo <= s && s <= hi);
        }
    }

    #[test]
    fn ewma_constant_input_is_a_fixed_point(alpha in 0.01f64..=1.0, c in -1e6f64..1e6, n in 1usize..100) {
        let mut e = Ewma::new(alpha).unwrap();
        for _ in 0..n {
            prop_assert_eq!(e.update(c), c);
        }
    }

    #[test]
    fn unit_alpha_keeps_only_the_last_sample(prev in -1e3f64..1e3, x in -1e3f64..1e3) {
        prop_assert_eq!(ewma_step(1.0, prev, x), x);
    }

    #[test]
    fn rank_rule_is_strict_inequality(node in 0u32..300, adv in 0u32..300, dv in 0u32..5) {
        let ev = RankEvidence::new(NodeId(1), Rank(node), Some(dv), NodeId(2), Rank(adv), SimTime::ZERO, false);
        let expected = if node.abs_diff(adv) > dv { VerdictKind::MaliciousRank } else { VerdictKind::Benign };
        prop_assert_eq!(classify_dio(&ev).unwrap(), expected);
        prop_assert_eq!(compute_di_rank(Rank(node), Rank(adv)), node.abs_diff(adv));
    }

    #[test]
    fn identical_hello_sequences_give_identical_verdicts(
        counts in prop::collection::vec((0u32..4, 0u64..20), 1..60),
        threshold in 0.0f64..15.0,
    ) {
        let run = || {
            let mut apt = AptState::new(0.3, 0.8).unwrap();
            counts
                .iter()
                .map(|&(n, c)| {
                    let hello = HelloMessage { sender: NodeId(n), rreq_count: c, sent_at: SimTime::ZERO };
                    apt.ingest_hello(&hello);
                    apt.check_flooding(NodeId(n), threshold).unwrap().kind
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn blacklists_only_grow(broadcasts in prop::collection::vec(prop::collection::vec(1u32..12, 0..4), 1..10)) {
        let mut state = RoutingState::attached(NodeId(0), NodeId(1), Rank(1));
        let table: BTreeMap<NodeId, Rank> = (1..12).map(|i| (NodeId(i), Rank(i % 4 + 1))).collect();
        let mut before = state.blacklist().clone();
        for b in &broadcasts {
            let ids: Vec<NodeId> = b.iter().map(|&i| NodeId(i)).collect();
            state.apply_blacklist_broadcast(&ids, &table, |_| true);
            prop_assert!(state.blacklist().is_superset(&before));
            prop_assert!(ids.iter().all(|id| state.is_blacklisted(*id)));
            prop_assert!(state.parent().is_none_or(|p| !state.is_blacklisted(p)));
            before = state.blacklist().clone();
        }
    }

    #[test]
    fn pdr_and_plr_sum_to_100(sent in 1u64..100_000, frac in 0.0f64..=1.0) {
        let delivered = (sent as f64 * frac) as u64;
        let sum = pdr(delivered, sent).unwrap() + plr(delivered, sent).unwrap();
        prop_assert!((sum - 100.0).abs() <= 1e-9);
    }

    #[test]
    fn dr_and_fnr_sum_to_100_when_defined(tp in 0u64..500, fn_ in 0u64..500, fp in 0u64..500, tn in 0u64..500) {
        let r = detection_rates(tp, fn_, fp, tn);
        match (r.dr.value(), r.fnr.value()) {
            (Some(d), Some(f)) => prop_assert!((d + f - 100.0).abs() <= 1e-9),
            (None, None) => prop_assert_eq!(tp + fn_, 0),
            _ => prop_assert!(false, "dr and fnr defined together"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn adjacency_is_exactly_the_unit_disk(seed in 0u64..1000, nodes in 10usize..60) {
        let cfg = small_cfg(seed, nodes, 45.0, 0.2);
        let topo = generate_topology(&cfg).unwrap();
        let r2 = cfg.tx_range * cfg.tx_range;
        let pos = topo.positions();
        for i in 0..nodes {
            for j in 0..nodes {
                let adjacent = topo.are_adjacent(NodeId::from_index(i), NodeId::from_index(j));
                prop_assert_eq!(adjacent, i != j && pos[i].distance_sq(&pos[j]) <= r2);
            }
        }
        prop_assert!(topo.is_connected());
        prop_assert_eq!(topo.attackers().len(), cfg.attacker_count());
        prop_assert!(!topo.is_attacker(topo.root()));
    }

    /// With breadth-first ranks, honest DIOs between neighbors never trip
    /// the rank rule.
    #[test]
    fn honest_dios_are_never_flagged(seed in 0u64..1000, nodes in 10usize..80) {
        let topo = generate_topology(&small_cfg(seed, nodes, 50.0, 0.0)).unwrap();
        let ranks = assign_initial_ranks(&topo).unwrap();
        let states = initial_routing(&topo).unwrap();
        for s in &states {
            if s.is_root() {
                continue;
            }
            prop_assert_eq!(s.dv_rank(), Some(1));
            for &n in topo.neighbors(s.id()) {
                prop_assert!(ranks[n.index()].abs_diff(s.rank()) <= 1);
                let ev = RankEvidence::new(s.id(), s.rank(), s.dv_rank(), n, ranks[n.index()], SimTime::ZERO, false);
                prop_assert_eq!(classify_dio(&ev).unwrap(), VerdictKind::Benign);
            }
        }
    }
}
