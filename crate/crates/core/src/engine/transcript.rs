//! Everything a run leaves behind. Metrics are computed from this alone.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::message::{ControlKind, Timer};
use crate::detector::{FloodEvidence, RankEvidence, VerdictKind};
use crate::rpl::{DropReason, Rank};
use crate::scenario::AttackerRole;
use crate::time::SimTime;
use crate::NodeId;

/// How much of a run to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceLevel {
    /// Packet fates, malicious verdicts and counters.
    #[default]
    Summary,
    /// Additionally every processed event and every benign verdict.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "outcome", rename_all = "snake_case"))]
pub enum Outcome {
    Delivered { at: SimTime, hops: u32 },
    Dropped { at: SimTime, node: NodeId, reason: DropReason },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PacketFate {
    pub id: u64,
    pub source: NodeId,
    pub emitted_at: SimTime,
    pub outcome: Outcome,
}

impl PacketFate {
    pub fn delivered(&self) -> bool {
        matches!(self.outcome, Outcome::Delivered { .. })
    }

    pub fn drop_reason(&self) -> Option<DropReason> {
        match self.outcome {
            Outcome::Dropped { reason, .. } => Some(reason),
            Outcome::Delivered { .. } => None,
        }
    }
}

/// One line of the verdict log.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VerdictRecord {
    pub time: SimTime,
    pub receiver: NodeId,
    pub sender: NodeId,
    pub kind: VerdictKind,
    pub dv_rank: Option<u32>,
    pub di_rank: Option<u32>,
    pub apt_value: Option<f64>,
    pub threshold: Option<f64>,
}

impl VerdictRecord {
    pub fn from_rank(evidence: &RankEvidence, kind: VerdictKind) -> Self {
        VerdictRecord {
            time: evidence.time,
            receiver: evidence.receiver,
            sender: evidence.sender,
            kind,
            dv_rank: evidence.dv_rank,
            di_rank: Some(evidence.di_rank),
            apt_value: None,
            threshold: None,
        }
    }

    pub fn from_flood(time: SimTime, receiver: NodeId, evidence: &FloodEvidence, kind: VerdictKind) -> Self {
        VerdictRecord {
            time,
            receiver,
            sender: evidence.neighbor,
            kind,
            dv_rank: None,
            di_rank: None,
            apt_value: Some(evidence.apt_value),
            threshold: Some(evidence.threshold),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "type", rename_all = "snake_case"))]
pub enum RecordKind {
    Timer { timer: Timer },
    Attack { node: NodeId, advertised_rank: Rank },
    Emit { node: NodeId, packet: u64 },
    /// A DIO reception, with the rank it advertised.
    Dio { from: NodeId, to: NodeId, advertised_rank: Rank },
    Control { from: NodeId, to: NodeId, kind: ControlKind },
    DataHop { from: NodeId, to: NodeId, packet: u64 },
    Delivered { packet: u64, hops: u32 },
    Dropped { node: NodeId, packet: u64, reason: DropReason },
    Parent { node: NodeId, parent: Option<NodeId>, rank: Rank },
}

/// A processed event, or a consequence of one (same `seq`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EventRecord {
    pub time: SimTime,
    pub seq: u64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: RecordKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunStats {
    pub events_processed: u64,
    pub dio_sent: u64,
    pub malicious_dio_sent: u64,
    pub dio_classified: u64,
    pub dio_flagged: u64,
    pub dio_ignored: u64,
    /// Would-be rank verdicts dropped while the receiver's own rank settled.
    pub dio_deferred: u64,
    pub flood_checks: u64,
    pub flood_flagged: u64,
    pub reports_sent: u64,
    pub reports_delivered: u64,
    pub reports_dropped: u64,
    pub broadcasts: u64,
    pub parent_changes: u64,
    pub orphanings: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTranscript {
    pub scenario: String,
    pub seed: u64,
    pub node_count: usize,
    pub root: NodeId,
    pub attackers: BTreeMap<NodeId, AttackerRole>,
    pub detection_enabled: bool,
    pub packet_size_bytes: u32,
    pub start: SimTime,
    pub stop: SimTime,
    pub attack_start: SimTime,
    pub hello_period: SimTime,
    pub fates: Vec<PacketFate>,
    pub verdicts: Vec<VerdictRecord>,
    /// Suspects known to the root at the end of the run, with the time each
    /// was first reported.
    pub root_blacklist: BTreeMap<NodeId, SimTime>,
    pub events: Vec<EventRecord>,
    pub stats: RunStats,
}

impl RunTranscript {
    pub fn delivered(&self) -> u64 {
        self.fates.iter().filter(|f| f.delivered()).count() as u64
    }

    pub fn sent(&self) -> u64 {
        self.fates.len() as u64
    }

    pub fn drops_by_reason(&self) -> BTreeMap<DropReason, u64> {
        let mut out = BTreeMap::new();
        for r in self.fates.iter().filter_map(PacketFate::drop_reason) {
            *out.entry(r).or_insert(0) += 1;
        }
        out
    }

    /// Nodes named in at least one malicious verdict, by any receiver.
    pub fn flagged_nodes(&self) -> BTreeSet<NodeId> {
        self.verdicts
            .iter()
            .filter(|v| v.kind.is_malicious())
            .map(|v| v.sender)
            .collect()
    }
}
