//! Simplified RPL control plane: hop-count ranks, DIO handling, parent
//! selection, upward forwarding and blacklist enforcement.
//!
//! The objective function is plain hop count. A node's rank is its parent's
//! rank plus one, the root sits at zero, and parent choice is the
//! non-blacklisted neighbor advertising the lowest rank (ties to the lowest
//! id). DIO contents are taken at face value here; validating them is the
//! detector's job.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::attackers::{self, DataAction, SinkholeBehavior};
use crate::detector;
use crate::scenario::Topology;
use crate::time::SimTime;
use crate::NodeId;

/// Largest usable rank. A node whose best route would exceed it detaches.
pub const MAX_RANK: u32 = 255;

/// Hop distance from the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct Rank(pub u32);

impl Rank {
    pub const ROOT: Rank = Rank(0);
    /// Advertised by a detached node to withdraw its route.
    pub const INFINITE: Rank = Rank(u32::MAX);

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn is_infinite(self) -> bool {
        self.0 == u32::MAX
    }

    /// Rank of a node that picks `self` as parent.
    pub const fn child(self) -> Rank {
        if self.0 >= MAX_RANK {
            Rank::INFINITE
        } else {
            Rank(self.0 + 1)
        }
    }

    pub const fn abs_diff(self, other: Rank) -> u32 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// DODAG Information Object. `advertised_rank` is whatever the sender claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DioMessage {
    pub sender: NodeId,
    pub advertised_rank: Rank,
    pub emitted_at: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RplError {
    UnreachableNode(NodeId),
    /// Every neighbor is blacklisted, detached or otherwise unusable.
    NoParentAvailable(NodeId),
}

impl fmt::Display for RplError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RplError::UnreachableNode(id) => write!(f, "node {id} cannot reach the root"),
            RplError::NoParentAvailable(id) => write!(f, "node {id} has no usable parent"),
        }
    }
}

impl core::error::Error for RplError {}

/// Per-node routing table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingState {
    id: NodeId,
    rank: Rank,
    parent: Option<NodeId>,
    /// Stored whenever the parent is (re)selected.
    dv_rank: Option<u32>,
    blacklist: BTreeSet<NodeId>,
}

/// Result of re-evaluating the parent against a neighbor table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParentChange {
    Unchanged,
    /// Same parent, whose advertised rank moved.
    RankChanged { old: Rank, new: Rank },
    Switched { old: Option<NodeId>, new: NodeId },
    Orphaned { old: Option<NodeId> },
}

impl ParentChange {
    pub fn rank_moved(&self) -> bool {
        !matches!(self, ParentChange::Unchanged)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlacklistUpdate {
    pub added: usize,
    pub parent_change: ParentChange,
}

impl RoutingState {
    pub fn root(id: NodeId) -> Self {
        RoutingState {
            id,
            rank: Rank::ROOT,
            parent: None,
            dv_rank: None,
            blacklist: BTreeSet::new(),
        }
    }

    /// A node attached below `parent`, which advertises `parent_rank`.
    pub fn attached(id: NodeId, parent: NodeId, parent_rank: Rank) -> Self {
        let rank = parent_rank.child();
        RoutingState {
            id,
            rank,
            parent: Some(parent),
            dv_rank: detector::compute_dv_rank(rank, Some(parent_rank)).ok(),
            blacklist: BTreeSet::new(),
        }
    }

    pub fn detached(id: NodeId) -> Self {
        RoutingState {
            id,
            rank: Rank::INFINITE,
            parent: None,
            dv_rank: None,
            blacklist: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn dv_rank(&self) -> Option<u32> {
        self.dv_rank
    }

    pub fn blacklist(&self) -> &BTreeSet<NodeId> {
        &self.blacklist
    }

    pub fn is_blacklisted(&self, id: NodeId) -> bool {
        self.blacklist.contains(&id)
    }

    pub fn is_root(&self) -> bool {
        self.rank == Rank::ROOT && self.parent.is_none()
    }

    /// Non-root node without a parent.
    pub fn is_orphan(&self) -> bool {
        self.parent.is_none() && !self.is_root()
    }

    /// Adds one suspect. Returns `false` if it was already listed.
    pub fn blacklist_insert(&mut self, suspect: NodeId) -> bool {
        self.blacklist.insert(suspect)
    }

    fn usable(&self, id: NodeId, rank: Rank) -> bool {
        id != self.id && !self.blacklist.contains(&id) && !rank.child().is_infinite()
    }

    fn attach(&mut self, parent: NodeId, parent_rank: Rank) {
        self.parent = Some(parent);
        self.rank = parent_rank.child();
        self.dv_rank = detector::compute_dv_rank(self.rank, Some(parent_rank)).ok();
    }

    fn detach(&mut self) {
        self.parent = None;
        self.rank = Rank::INFINITE;
        self.dv_rank = None;
    }

    /// Picks the non-blacklisted neighbor with the lowest advertised rank,
    /// lowest id on ties, and records DV-RANK for it. On failure the node is
    /// left detached.
    pub fn select_parent<I>(&mut self, neighbor_ranks: I) -> Result<NodeId, RplError>
    where
        I: IntoIterator<Item = (NodeId, Rank)>,
    {
        let best = neighbor_ranks
            .into_iter()
            .filter(|&(id, rank)| self.usable(id, rank))
            .min_by_key(|&(id, rank)| (rank, id));
        match best {
            Some((id, rank)) => {
                self.attach(id, rank);
                Ok(id)
            }
            None => {
                self.detach();
                Err(RplError::NoParentAvailable(self.id))
            }
        }
    }

    /// Re-evaluates the parent against the current neighbor table.
    ///
    /// The current parent is kept while it is usable and no candidate offers
    /// a strictly lower rank. `loop_free` vets candidates other than the
    /// current parent; the engine uses it to refuse descendants.
    pub fn refresh_parent<F>(
        &mut self,
        neighbor_ranks: &BTreeMap<NodeId, Rank>,
        mut loop_free: F,
    ) -> ParentChange
    where
        F: FnMut(NodeId) -> bool,
    {
        if self.is_root() {
            return ParentChange::Unchanged;
        }
        let old_parent = self.parent;
        let old_rank = self.rank;
        let current = old_parent.and_then(|p| {
            neighbor_ranks
                .get(&p)
                .copied()
                .filter(|&r| self.usable(p, r))
                .map(|r| (p, r))
        });
        let mut candidates: Vec<(Rank, NodeId)> = neighbor_ranks
            .iter()
            .filter(|&(&id, &rank)| Some(id) != old_parent && self.usable(id, rank))
            .filter(|&(_, &rank)| current.is_none_or(|(_, cr)| rank < cr))
            .map(|(&id, &rank)| (rank, id))
            .collect();
        candidates.sort_unstable();
        let better = candidates.into_iter().find(|&(_, id)| loop_free(id));
        match (better, current) {
            (Some((rank, id)), _) => {
                self.attach(id, rank);
                ParentChange::Switched {
                    old: old_parent,
                    new: id,
                }
            }
            (None, Some((p, r))) => {
                self.attach(p, r);
                if self.rank == old_rank {
                    ParentChange::Unchanged
                } else {
                    ParentChange::RankChanged {
                        old: old_rank,
                        new: self.rank,
                    }
                }
            }
            (None, None) => {
                self.detach();
                if old_parent.is_none() {
                    ParentChange::Unchanged
                } else {
                    ParentChange::Orphaned { old: old_parent }
                }
            }
        }
    }

    /// Merges a root-issued suspect list. A blacklisted parent is dropped and
    /// a new one chosen from `neighbor_ranks`. Idempotent.
    pub fn apply_blacklist_broadcast<'a, I, F>(
        &mut self,
        suspects: I,
        neighbor_ranks: &BTreeMap<NodeId, Rank>,
        loop_free: F,
    ) -> BlacklistUpdate
    where
        I: IntoIterator<Item = &'a NodeId>,
        F: FnMut(NodeId) -> bool,
    {
        let mut added = 0;
        for &s in suspects {
            if s != self.id && self.blacklist.insert(s) {
                added += 1;
            }
        }
        let parent_change = match self.parent {
            Some(p) if added > 0 && self.blacklist.contains(&p) => {
                self.refresh_parent(neighbor_ranks, loop_free)
            }
            _ => ParentChange::Unchanged,
        };
        BlacklistUpdate {
            added,
            parent_change,
        }
    }
}

/// Breadth-first hop distances from the root: the routing tables every node
/// holds right after an attack-free deployment.
pub fn assign_initial_ranks(topology: &Topology) -> Result<Vec<Rank>, RplError> {
    let n = topology.node_count();
    let mut ranks = alloc::vec![Rank::INFINITE; n];
    let root = topology.root();
    ranks[root.index()] = Rank::ROOT;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let next = ranks[u.index()].child();
        for &v in topology.neighbors(u) {
            if ranks[v.index()].is_infinite() {
                ranks[v.index()] = next;
                queue.push_back(v);
            }
        }
    }
    match ranks.iter().position(|r| r.is_infinite()) {
        Some(i) => Err(RplError::UnreachableNode(NodeId::from_index(i))),
        None => Ok(ranks),
    }
}

/// Routing state for every node after initial DODAG formation.
pub fn initial_routing(topology: &Topology) -> Result<Vec<RoutingState>, RplError> {
    let ranks = assign_initial_ranks(topology)?;
    let states = topology
        .node_ids()
        .map(|id| {
            if id == topology.root() {
                return RoutingState::root(id);
            }
            let mut state = RoutingState::detached(id);
            state
                .select_parent(topology.neighbors(id).iter().map(|&v| (v, ranks[v.index()])))
                .expect("connected graph gives every node a lower-ranked neighbor");
            state
        })
        .collect();
    Ok(states)
}

/// A CBR data packet travelling toward the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DataPacket {
    pub id: u64,
    pub source: NodeId,
    pub emitted_at: SimTime,
    pub hops: u32,
    pub corrupted: bool,
}

impl DataPacket {
    pub fn new(id: u64, source: NodeId, emitted_at: SimTime) -> Self {
        DataPacket {
            id,
            source,
            emitted_at,
            hops: 0,
            corrupted: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum DropReason {
    NoParent,
    TtlExceeded,
    Sinkhole,
    /// Reached the root with a payload altered in transit.
    Altered,
    Timeout,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::NoParent,
        DropReason::TtlExceeded,
        DropReason::Sinkhole,
        DropReason::Altered,
        DropReason::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoParent => "no_parent",
            DropReason::TtlExceeded => "ttl_exceeded",
            DropReason::Sinkhole => "sinkhole",
            DropReason::Altered => "altered",
            DropReason::Timeout => "timeout",
        }
    }
}

/// Who currently holds the packet.
#[derive(Clone, Copy, Debug)]
pub enum Holder<'a> {
    Root,
    Relay,
    /// A sinkhole whose attack phase has begun.
    Sinkhole(&'a SinkholeBehavior),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forwarding {
    Delivered { hops: u32 },
    Forward { to: NodeId },
    Dropped(DropReason),
}

/// Decides what the holder does with an upward data packet. Forwarding bumps
/// the hop count.
pub fn route_upward(
    state: &RoutingState,
    packet: &mut DataPacket,
    holder: Holder<'_>,
    max_hops: u32,
) -> Forwarding {
    match holder {
        Holder::Root => {
            return if packet.corrupted {
                Forwarding::Dropped(DropReason::Altered)
            } else {
                Forwarding::Delivered { hops: packet.hops }
            };
        }
        Holder::Sinkhole(behavior) => match attackers::sinkhole_handle_data(behavior, packet) {
            DataAction::Dropped => return Forwarding::Dropped(DropReason::Sinkhole),
            DataAction::Altered | DataAction::Untouched => {}
        },
        Holder::Relay => {}
    }
    let Some(parent) = state.parent() else {
        return Forwarding::Dropped(DropReason::NoParent);
    };
    debug_assert!(!state.is_blacklisted(parent));
    if packet.hops >= max_hops {
        return Forwarding::Dropped(DropReason::TtlExceeded);
    }
    packet.hops += 1;
    Forwarding::Forward { to: parent }
}
