//! Distributed sinkhole and flood detection.
//!
//! Three stages run on every benign node:
//!
//! 1. **Rank anomaly.** DV-RANK is the rank gap between a node and the parent
//!    it selected, stored at selection time. DI-RANK is the gap between the
//!    node and the rank advertised in an incoming DIO. A DIO is malicious
//!    when `DI-RANK > DV-RANK` (strict).
//! 2. **Flooding.** Hello beacons disclose each neighbor's RREQ emissions
//!    for the last period. Two exponentially weighted averages (APT-RREQ)
//!    are kept per neighbor: `S_1 = X_1`, `S_t = a*X_t + (1-a)*S_{t-1}`.
//!    The recent-weighted track is compared to a threshold (strict `>`).
//! 3. **Elimination.** A flagged neighbor is blacklisted locally and reported
//!    up the DODAG. The root merges reports and floods the cumulative
//!    suspect set back down.
//!
//! Under hop-count ranks every attached node has DV-RANK 1, and adjacent
//! nodes of a breadth-first DODAG differ in rank by at most 1, so an
//! attack-free static network never trips stage 1.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::rpl::Rank;
use crate::time::SimTime;
use crate::NodeId;

/// Number of standard deviations above the warm-up mean for the adaptive
/// flood threshold.
pub const ADAPTIVE_SIGMAS: f64 = 3.0;

/// DV-RANK used by a node that has no parent to measure against.
pub const DEFAULT_DV_RANK: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum DetectorError {
    NoParent,
    MissingDvRank,
    InvalidAlpha(f64),
    UnknownNeighbor(NodeId),
}

impl fmt::Display for DetectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorError::NoParent => f.write_str("node has no parent"),
            DetectorError::MissingDvRank => f.write_str("DV-RANK not recorded yet"),
            DetectorError::InvalidAlpha(a) => write!(f, "smoothing factor {a} outside (0, 1]"),
            DetectorError::UnknownNeighbor(id) => write!(f, "no APT-RREQ samples for neighbor {id}"),
        }
    }
}

impl core::error::Error for DetectorError {}

/// `|parent_rank - node_rank|`.
pub fn compute_dv_rank(node_rank: Rank, parent_rank: Option<Rank>) -> Result<u32, DetectorError> {
    let parent_rank = parent_rank.ok_or(DetectorError::NoParent)?;
    Ok(parent_rank.abs_diff(node_rank))
}

/// `|sender_advertised_rank - node_rank|`.
pub fn compute_di_rank(node_rank: Rank, sender_advertised_rank: Rank) -> u32 {
    sender_advertised_rank.abs_diff(node_rank)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RankEvidence {
    pub receiver: NodeId,
    pub sender: NodeId,
    pub time: SimTime,
    pub dv_rank: Option<u32>,
    pub di_rank: u32,
    /// The DIO came from the receiver's own parent. Kept as context only.
    pub from_parent: bool,
}

impl RankEvidence {
    pub fn new(
        receiver: NodeId,
        receiver_rank: Rank,
        dv_rank: Option<u32>,
        sender: NodeId,
        advertised: Rank,
        time: SimTime,
        from_parent: bool,
    ) -> Self {
        RankEvidence {
            receiver,
            sender,
            time,
            dv_rank,
            di_rank: compute_di_rank(receiver_rank, advertised),
            from_parent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum VerdictKind {
    Benign,
    MaliciousRank,
    MaliciousFlood,
}

impl VerdictKind {
    pub fn is_malicious(self) -> bool {
        self != VerdictKind::Benign
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Benign => "benign",
            VerdictKind::MaliciousRank => "malicious_rank",
            VerdictKind::MaliciousFlood => "malicious_flood",
        }
    }
}

/// Flood check inputs for one neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FloodEvidence {
    pub neighbor: NodeId,
    pub apt_value: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evidence {
    Rank(RankEvidence),
    Flood(FloodEvidence),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub evidence: Evidence,
}

/// `MaliciousRank` iff `di_rank > dv_rank`.
pub fn classify_dio(evidence: &RankEvidence) -> Result<VerdictKind, DetectorError> {
    let dv = evidence.dv_rank.ok_or(DetectorError::MissingDvRank)?;
    Ok(if evidence.di_rank > dv {
        VerdictKind::MaliciousRank
    } else {
        VerdictKind::Benign
    })
}

/// One smoothing step. The result always lies between `prev` and `sample`,
/// and a constant input is an exact fixed point.
pub fn ewma_step(alpha: f64, prev: f64, sample: f64) -> f64 {
    if alpha == 1.0 {
        return sample;
    }
    let next = prev + alpha * (sample - prev);
    let (lo, hi) = if prev <= sample { (prev, sample) } else { (sample, prev) };
    next.clamp(lo, hi)
}

/// A single APT-RREQ series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
    samples: u64,
}

impl Ewma {
    pub fn new(alpha: f64) -> Result<Self, DetectorError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(DetectorError::InvalidAlpha(alpha));
        }
        Ok(Ewma {
            alpha,
            value: None,
            samples: 0,
        })
    }

    pub fn update(&mut self, sample: f64) -> f64 {
        let next = match self.value {
            None => sample,
            Some(prev) => ewma_step(self.alpha, prev, sample),
        };
        self.value = Some(next);
        self.samples += 1;
        next
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }
}

/// Periodic neighbor beacon carrying the sender's RREQ emissions for the
/// period that just ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HelloMessage {
    pub sender: NodeId,
    pub rreq_count: u64,
    pub sent_at: SimTime,
}

/// Low- and high-alpha APT-RREQ tracks for one neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AptTracks {
    /// Slow track, for the long-run view of the neighborhood.
    pub low: Ewma,
    /// Fast track, which carries the flood verdict.
    pub high: Ewma,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AptState {
    alpha_low: f64,
    alpha_high: f64,
    neighbors: BTreeMap<NodeId, AptTracks>,
}

impl AptState {
    pub fn new(alpha_low: f64, alpha_high: f64) -> Result<Self, DetectorError> {
        Ewma::new(alpha_low)?;
        Ewma::new(alpha_high)?;
        Ok(AptState {
            alpha_low,
            alpha_high,
            neighbors: BTreeMap::new(),
        })
    }

    fn tracks_mut(&mut self, neighbor: NodeId) -> &mut AptTracks {
        let (lo, hi) = (self.alpha_low, self.alpha_high);
        self.neighbors.entry(neighbor).or_insert_with(|| AptTracks {
            low: Ewma::new(lo).expect("validated"),
            high: Ewma::new(hi).expect("validated"),
        })
    }

    /// Feeds one period's RREQ count for `neighbor` into both tracks and
    /// returns the fast-track value.
    pub fn update_apt_rreq(&mut self, neighbor: NodeId, x_t: u64) -> f64 {
        let tracks = self.tracks_mut(neighbor);
        tracks.low.update(x_t as f64);
        tracks.high.update(x_t as f64)
    }

    pub fn ingest_hello(&mut self, hello: &HelloMessage) -> AptTracks {
        self.update_apt_rreq(hello.sender, hello.rreq_count);
        self.neighbors[&hello.sender]
    }

    pub fn tracks(&self, neighbor: NodeId) -> Option<&AptTracks> {
        self.neighbors.get(&neighbor)
    }

    /// `(low, high)` track values.
    pub fn apt(&self, neighbor: NodeId) -> Option<(f64, f64)> {
        let t = self.neighbors.get(&neighbor)?;
        Some((t.low.value()?, t.high.value()?))
    }

    pub fn forget(&mut self, neighbor: NodeId) {
        self.neighbors.remove(&neighbor);
    }

    /// `MaliciousFlood` iff the fast track exceeds `threshold`.
    pub fn check_flooding(&self, neighbor: NodeId, threshold: f64) -> Result<Verdict, DetectorError> {
        let value = self
            .neighbors
            .get(&neighbor)
            .and_then(|t| t.high.value())
            .ok_or(DetectorError::UnknownNeighbor(neighbor))?;
        let kind = if value > threshold {
            VerdictKind::MaliciousFlood
        } else {
            VerdictKind::Benign
        };
        Ok(Verdict {
            kind,
            evidence: Evidence::Flood(FloodEvidence {
                neighbor,
                apt_value: value,
                threshold,
            }),
        })
    }
}

/// Running mean and variance (Welford) of the RREQ counts seen while the
/// network is known to be clean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WarmupStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl WarmupStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> Option<f64> {
        (self.count > 0).then(|| libm::sqrt(self.m2 / self.count as f64))
    }

    /// `mean + 3 * std_dev`, once at least one sample was seen.
    pub fn adaptive_threshold(&self) -> Option<f64> {
        Some(self.mean()? + ADAPTIVE_SIGMAS * self.std_dev()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MaliciousReport {
    pub suspect: NodeId,
    pub reporter: NodeId,
    pub kind: VerdictKind,
}

/// Reporter-side bookkeeping: each suspect is reported once, and stays
/// pending until a root broadcast naming it comes back.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportQueue {
    reported: BTreeSet<NodeId>,
    pending: BTreeMap<NodeId, VerdictKind>,
}

impl ReportQueue {
    /// A new report for `suspect`, or `None` if one was already filed.
    pub fn report_to_root(
        &mut self,
        suspect: NodeId,
        reporter: NodeId,
        kind: VerdictKind,
    ) -> Option<MaliciousReport> {
        if !self.reported.insert(suspect) {
            return None;
        }
        self.pending.insert(suspect, kind);
        Some(MaliciousReport {
            suspect,
            reporter,
            kind,
        })
    }

    /// Clears pending entries the root has confirmed.
    pub fn acknowledge<'a, I: IntoIterator<Item = &'a NodeId>>(&mut self, suspects: I) {
        for s in suspects {
            self.pending.remove(s);
        }
    }

    /// Reports not yet confirmed by the root, for re-sending after the
    /// reporter gets a new route.
    pub fn pending(&self, reporter: NodeId) -> impl Iterator<Item = MaliciousReport> + '_ {
        self.pending.iter().map(move |(&suspect, &kind)| MaliciousReport {
            suspect,
            reporter,
            kind,
        })
    }

    pub fn has_reported(&self, suspect: NodeId) -> bool {
        self.reported.contains(&suspect)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }
}

/// Cumulative suspect set flooded by the root. Higher sequence numbers
/// supersede lower ones.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BlacklistBroadcast {
    pub seq: u64,
    pub suspects: Vec<NodeId>,
}

/// Root-side blacklist.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RootRegistry {
    blacklisted_at: BTreeMap<NodeId, SimTime>,
    reports: u64,
    seq: u64,
}

impl RootRegistry {
    /// Records a report. Returns `true` if the suspect is new.
    pub fn receive_report(&mut self, report: &MaliciousReport, now: SimTime) -> bool {
        self.reports += 1;
        self.add_suspect(report.suspect, now)
    }

    pub fn add_suspect(&mut self, suspect: NodeId, now: SimTime) -> bool {
        if self.blacklisted_at.contains_key(&suspect) {
            return false;
        }
        self.blacklisted_at.insert(suspect, now);
        true
    }

    /// Builds the next flood carrying every suspect known so far, or `None`
    /// if there are none.
    pub fn root_broadcast(&mut self) -> Option<BlacklistBroadcast> {
        if self.blacklisted_at.is_empty() {
            return None;
        }
        self.seq += 1;
        Some(BlacklistBroadcast {
            seq: self.seq,
            suspects: self.blacklisted_at.keys().copied().collect(),
        })
    }

    pub fn blacklist(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.blacklisted_at.keys().copied()
    }

    pub fn blacklisted_at(&self) -> &BTreeMap<NodeId, SimTime> {
        &self.blacklisted_at
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.blacklisted_at.contains_key(&id)
    }

    pub fn reports_received(&self) -> u64 {
        self.reports
    }
}

/// Flood de-duplication at a relaying node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BroadcastFilter {
    last_seq: u64,
}

impl BroadcastFilter {
    /// `true` the first time a sequence number above every earlier one shows
    /// up.
    pub fn accept(&mut self, seq: u64) -> bool {
        if seq > self.last_seq {
            self.last_seq = seq;
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(dv: Option<u32>, di: u32) -> RankEvidence {
        RankEvidence {
            receiver: NodeId(9),
            sender: NodeId(1),
            time: SimTime::ZERO,
            dv_rank: dv,
            di_rank: di,
            from_parent: false,
        }
    }

    #[test]
    fn dv_rank_examples() {
        assert_eq!(compute_dv_rank(Rank(4), Some(Rank(3))), Ok(1));
        assert_eq!(compute_dv_rank(Rank(6), Some(Rank(6))), Ok(0));
        assert_eq!(compute_dv_rank(Rank(2), Some(Rank(5))), Ok(3));
        assert_eq!(compute_dv_rank(Rank(0), None), Err(DetectorError::NoParent));
    }

    #[test]
    fn di_rank_examples() {
        assert_eq!(compute_di_rank(Rank(4), Rank(3)), 1);
        assert_eq!(compute_di_rank(Rank(4), Rank(0)), 4);
        assert_eq!(compute_di_rank(Rank(0), Rank(0)), 0);
    }

    #[test]
    fn classification_is_strict() {
        assert_eq!(classify_dio(&ev(Some(1), 4)), Ok(VerdictKind::MaliciousRank));
        assert_eq!(classify_dio(&ev(Some(1), 1)), Ok(VerdictKind::Benign));
        assert_eq!(classify_dio(&ev(Some(2), 1)), Ok(VerdictKind::Benign));
        assert_eq!(classify_dio(&ev(None, 1)), Err(DetectorError::MissingDvRank));
    }

    #[test]
    fn ewma_examples() {
        let mut e = Ewma::new(0.3).unwrap();
        assert_eq!(e.update(7.0), 7.0);

        let mut e = Ewma::new(1.0).unwrap();
        e.update(100.0);
        e.update(-3.0);
        assert_eq!(e.update(5.0), 5.0);

        assert_eq!(ewma_step(0.5, 2.0, 4.0), 3.0);
        assert!(Ewma::new(0.0).is_err());
        assert!(Ewma::new(1.01).is_err());
        assert!(AptState::new(0.3, f64::NAN).is_err());
    }

    #[test]
    fn hello_tracks_converge_to_constant_input() {
        let mut apt = AptState::new(0.3, 0.8).unwrap();
        for c in [0u64, 6] {
            let n = NodeId(c as u32 + 1);
            for k in 0..200 {
                apt.ingest_hello(&HelloMessage { sender: n, rreq_count: c, sent_at: SimTime::from_secs(k) });
            }
            assert_eq!(apt.apt(n), Some((c as f64, c as f64)));
        }
    }

    #[test]
    fn alternating_hellos_stay_inside_the_range() {
        let mut apt = AptState::new(0.5, 0.5).unwrap();
        let n = NodeId(3);
        let mut oracle: Option<f64> = None;
        for t in 0..40 {
            let x = if t % 2 == 0 { 0.0 } else { 10.0 };
            oracle = Some(match oracle {
                None => x,
                Some(s) => 0.5 * x + 0.5 * s,
            });
            apt.ingest_hello(&HelloMessage { sender: n, rreq_count: x as u64, sent_at: SimTime::ZERO });
            let (_, hi) = apt.apt(n).unwrap();
            assert!((hi - oracle.unwrap()).abs() < 1e-12);
            if t > 0 {
                assert!(hi > 0.0 && hi < 10.0);
            }
        }
    }

    #[test]
    fn flood_threshold_is_strict() {
        let mut apt = AptState::new(0.3, 1.0).unwrap();
        apt.update_apt_rreq(NodeId(2), 3);
        assert_eq!(apt.check_flooding(NodeId(2), 3.0).unwrap().kind, VerdictKind::Benign);
        assert_eq!(
            apt.check_flooding(NodeId(4), 3.0),
            Err(DetectorError::UnknownNeighbor(NodeId(4)))
        );
        let mut apt = AptState::new(0.3, 0.8).unwrap();
        apt.update_apt_rreq(NodeId(2), 2);
        apt.update_apt_rreq(NodeId(2), 15); // 2 + 0.8 * 13 = 12.4
        let v = apt.check_flooding(NodeId(2), 5.0).unwrap();
        assert_eq!(v.kind, VerdictKind::MaliciousFlood);
        match v.evidence {
            Evidence::Flood(f) => assert!((f.apt_value - 12.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn warmup_threshold() {
        let mut w = WarmupStats::default();
        assert_eq!(w.adaptive_threshold(), None);
        for x in [1.0, 1.0, 1.0] {
            w.push(x);
        }
        assert_eq!(w.adaptive_threshold(), Some(1.0));
        let mut w = WarmupStats::default();
        for x in [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0] {
            w.push(x);
        }
        // mean 5, population sd 2
        assert!((w.adaptive_threshold().unwrap() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn reports_are_suppressed_and_acknowledged() {
        let mut q = ReportQueue::default();
        let r = q.report_to_root(NodeId(1), NodeId(9), VerdictKind::MaliciousRank).unwrap();
        assert_eq!((r.suspect, r.reporter), (NodeId(1), NodeId(9)));
        assert!(q.report_to_root(NodeId(1), NodeId(9), VerdictKind::MaliciousRank).is_none());
        assert_eq!(q.pending(NodeId(9)).count(), 1);
        q.acknowledge(&[NodeId(1)]);
        assert_eq!(q.pending_len(), 0);
        assert!(q.has_reported(NodeId(1)));
    }

    #[test]
    fn root_registry_broadcasts_cumulative_sets() {
        let mut root = RootRegistry::default();
        assert!(root.root_broadcast().is_none());
        let rep = MaliciousReport { suspect: NodeId(4), reporter: NodeId(9), kind: VerdictKind::MaliciousRank };
        assert!(root.receive_report(&rep, SimTime::ZERO));
        assert!(!root.receive_report(&rep, SimTime::ZERO));
        let b1 = root.root_broadcast().unwrap();
        assert_eq!(b1.suspects, [NodeId(4)]);
        root.add_suspect(NodeId(2), SimTime::ZERO);
        let b2 = root.root_broadcast().unwrap();
        assert_eq!(b2.suspects, [NodeId(2), NodeId(4)]);
        assert!(b2.seq > b1.seq);

        let mut f = BroadcastFilter::default();
        assert!(f.accept(b2.seq));
        assert!(!f.accept(b1.seq));
        assert!(!f.accept(b2.seq));
    }
}
