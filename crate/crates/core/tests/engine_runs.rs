use std::collections::{BTreeMap, BTreeSet};

use rplguard_core::attackers::DataPlaneMode;
use rplguard_core::detector::VerdictKind;
use rplguard_core::engine::{
    self, ControlKind, Outcome, RecordKind, RunOptions, RunTranscript, TraceLevel,
};
use rplguard_core::metrics::RunMetrics;
use rplguard_core::rpl::DropReason;
use rplguard_core::scenario::{
    Area, AttackerRole, ScenarioConfig, Topology, TrafficSources,
};
use rplguard_core::{NodeId, SimTime};

const FULL: RunOptions = RunOptions {
    trace: TraceLevel::Full,
};

fn benign(nodes: usize, side: f64, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: "benign".into(),
        node_count: nodes,
        area: Area::new(side, side),
        malicious_fraction: 0.0,
        duration_s: duration,
        ..ScenarioConfig::default()
    }
}

/// Chain 0-1-2-...-(n-1) with the given attackers.
fn chain(n: u32, attackers: &[(u32, AttackerRole)]) -> Topology {
    let edges: Vec<(u32, u32)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let roles = attackers.iter().map(|&(i, r)| (NodeId(i), r)).collect();
    Topology::from_edges(n as usize, &edges, NodeId(0), roles).unwrap()
}

/// Replays the event log and checks every emitted packet ends exactly once,
/// in agreement with the fate table.
fn audit_conservation(t: &RunTranscript) {
    let mut emitted = BTreeSet::new();
    let mut ended: BTreeMap<u64, Outcome> = BTreeMap::new();
    for e in &t.events {
        match e.kind {
            RecordKind::Emit { packet, .. } => assert!(emitted.insert(packet)),
            RecordKind::Delivered { packet, hops } => {
                let prev = ended.insert(packet, Outcome::Delivered { at: e.time, hops });
                assert!(prev.is_none(), "packet {packet} ended twice");
            }
            RecordKind::Dropped { node, packet, reason } => {
                let prev = ended.insert(
                    packet,
                    Outcome::Dropped {
                        at: e.time,
                        node,
                        reason,
                    },
                );
                assert!(prev.is_none(), "packet {packet} ended twice");
            }
            _ => {}
        }
    }
    assert_eq!(emitted.len(), t.fates.len());
    assert_eq!(ended.len(), emitted.len());
    for f in &t.fates {
        assert_eq!(ended[&f.id], f.outcome);
    }
    let dropped: u64 = t.drops_by_reason().values().sum();
    assert_eq!(t.sent(), t.delivered() + dropped);
}

#[test]
fn zero_duration_gives_an_empty_transcript() {
    let cfg = ScenarioConfig {
        duration_s: 0.0,
        ..benign(20, 40.0, 0.0)
    };
    let t = engine::run_with(&cfg, FULL).unwrap();
    assert!(t.fates.is_empty());
    assert!(t.events.is_empty());
    assert!(t.verdicts.is_empty());
}

#[test]
fn ten_benign_sources_for_100_s_deliver_1000_packets() {
    let cfg = benign(11, 20.0, 100.0);
    let t = engine::run_with(&cfg, FULL).unwrap();
    assert_eq!(t.fates.len(), 1000);
    assert!(t.fates.iter().all(|f| f.delivered()));
    let per_source = t.fates.iter().fold(BTreeMap::new(), |mut m, f| {
        *m.entry(f.source).or_insert(0) += 1;
        m
    });
    assert_eq!(per_source.len(), 10);
    assert!(per_source.values().all(|&n| n == 100));
    audit_conservation(&t);
}

#[test]
fn sinkhole_without_detection_drops_what_it_attracts() {
    // 0-1-2-3-4, sinkhole at 2. Everything from 3 and 4 must cross it.
    let topo = chain(5, &[(2, AttackerRole::Sinkhole)]);
    let cfg = ScenarioConfig {
        detection_enabled: false,
        duration_s: 50.0,
        ..benign(5, 100.0, 50.0)
    };
    let t = engine::run_on_topology(&cfg, topo, FULL).unwrap();
    let attack = t.attack_start;
    // Trace audit: which packets reached node 2 once its attack began.
    let mut through_sinkhole = BTreeSet::new();
    for e in &t.events {
        if let RecordKind::DataHop { to, packet, .. } = e.kind {
            if to == NodeId(2) && e.time >= attack {
                through_sinkhole.insert(packet);
            }
        }
    }
    assert!(!through_sinkhole.is_empty());
    for f in &t.fates {
        if through_sinkhole.contains(&f.id) {
            assert!(matches!(
                f.outcome,
                Outcome::Dropped {
                    node: NodeId(2),
                    reason: DropReason::Sinkhole,
                    ..
                }
            ));
        } else {
            assert!(f.delivered(), "{f:?}");
        }
    }
    audit_conservation(&t);
}

#[test]
fn altered_packets_are_rejected_at_the_root() {
    let topo = chain(4, &[(2, AttackerRole::Sinkhole)]);
    let cfg = ScenarioConfig {
        detection_enabled: false,
        sinkhole_mode: DataPlaneMode::Alter,
        ..benign(4, 100.0, 30.0)
    };
    let t = engine::run_on_topology(&cfg, topo, FULL).unwrap();
    let by_reason = t.drops_by_reason();
    assert!(by_reason[&DropReason::Altered] > 0);
    assert!(!by_reason.contains_key(&DropReason::Sinkhole));
    for f in &t.fates {
        if let Outcome::Dropped { node, reason, .. } = f.outcome {
            assert_eq!((node, reason), (NodeId(0), DropReason::Altered));
            assert_eq!(f.source, NodeId(3));
        }
    }
    audit_conservation(&t);
}

#[test]
fn detected_sinkhole_reaches_every_benign_node_by_broadcast() {
    // 0-1-2-3-4-5 with the sinkhole at 3: node 4 (rank 4) flags it.
    let topo = chain(6, &[(3, AttackerRole::Sinkhole)]);
    let cfg = benign(6, 100.0, 40.0);
    let t = engine::run_on_topology(&cfg, topo, FULL).unwrap();
    assert!(t.root_blacklist.contains_key(&NodeId(3)));
    assert!(t
        .verdicts
        .iter()
        .any(|v| v.kind == VerdictKind::MaliciousRank && v.receiver == NodeId(4) && v.sender == NodeId(3)));
    let mut heard = BTreeSet::new();
    for e in &t.events {
        if let RecordKind::Control {
            to,
            kind: ControlKind::Broadcast,
            ..
        } = e.kind
        {
            heard.insert(to);
        }
    }
    // The sinkhole does not relay, so 4 and 5 beyond it never hear the flood.
    assert!(heard.contains(&NodeId(1)) && heard.contains(&NodeId(2)));
}

#[test]
fn each_sinkhole_is_reported_over_a_clean_path() {
    // Ring 0-1-2-3-4-5-0, chord 2-5, pendant 6 on 3. Sinkholes at 1 and 3.
    // Node 2 flags its parent 1 and re-routes its report via 5; node 4 flags
    // 3. Node 6 hangs off 3 alone, so its own report never leaves.
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (3, 6), (2, 5)];
    let roles = [(NodeId(1), AttackerRole::Sinkhole), (NodeId(3), AttackerRole::Sinkhole)]
        .into_iter()
        .collect();
    let topo = Topology::from_edges(7, &edges, NodeId(0), roles).unwrap();
    let cfg = benign(7, 100.0, 60.0);
    let t = engine::run_on_topology(&cfg, topo, FULL).unwrap();
    assert!(t.root_blacklist.contains_key(&NodeId(1)));
    assert!(t.root_blacklist.contains_key(&NodeId(3)));
    audit_conservation(&t);
}

#[test]
fn benign_static_network_never_flags_anyone() {
    for seed in 1..=3 {
        let cfg = ScenarioConfig {
            seed,
            ..benign(60, 60.0, 60.0)
        };
        let t = engine::run_with(&cfg, FULL).unwrap();
        assert!(!t.verdicts.is_empty());
        assert!(t.verdicts.iter().all(|v| v.kind == VerdictKind::Benign));
        assert!(t.root_blacklist.is_empty());
        let m = RunMetrics::from_transcript(&t).unwrap();
        assert_eq!(m.confusion.fp, 0);
        assert_eq!(m.pdr_pct, 100.0);
    }
}

#[test]
fn identical_configs_give_identical_transcripts() {
    let mut cfg = ScenarioConfig::preset("scenario2_small").unwrap();
    cfg.duration_s = 40.0;
    cfg.seed = 7;
    let a = engine::run_with(&cfg, FULL).unwrap();
    let b = engine::run_with(&cfg, FULL).unwrap();
    assert_eq!(a, b);
    cfg.seed = 8;
    let c = engine::run_with(&cfg, FULL).unwrap();
    assert_ne!(a.fates, c.fates);
}

#[test]
fn conservation_holds_across_scenarios() {
    for name in ["scenario1_small", "scenario3_small", "scenario4_small"] {
        for detection in [true, false] {
            let mut cfg = ScenarioConfig::preset(name).unwrap();
            cfg.duration_s = 60.0;
            cfg.detection_enabled = detection;
            let t = engine::run_with(&cfg, FULL).unwrap();
            audit_conservation(&t);
        }
    }
}

#[test]
fn subset_of_sources_and_mobility() {
    let cfg = ScenarioConfig {
        traffic: rplguard_core::scenario::TrafficConfig {
            sources: TrafficSources::Count(5),
            period_s: 2.0,
        },
        mobility: rplguard_core::scenario::Mobility::RandomWaypoint { speed_mps: 1.0 },
        ..benign(40, 50.0, 30.0)
    };
    let t = engine::run_with(&cfg, FULL).unwrap();
    let sources: BTreeSet<_> = t.fates.iter().map(|f| f.source).collect();
    assert_eq!(sources.len(), 5);
    assert_eq!(t.fates.len(), 75);
    audit_conservation(&t);
}

#[test]
fn flooder_is_blacklisted_after_the_attack_starts() {
    let cfg = ScenarioConfig {
        malicious_fraction: 0.02,
        flooder_count: 1,
        ..benign(50, 50.0, 60.0)
    };
    let t = engine::run_with(&cfg, FULL).unwrap();
    let (&flooder, _) = t.attackers.iter().next().unwrap();
    let at = t.root_blacklist[&flooder];
    assert!(at >= t.attack_start);
    assert!(at <= t.attack_start + SimTime::from_secs(5));
    assert_eq!(t.root_blacklist.len(), 1);
    assert!(t
        .verdicts
        .iter()
        .filter(|v| v.kind.is_malicious())
        .all(|v| v.sender == flooder && v.kind == VerdictKind::MaliciousFlood));
}
