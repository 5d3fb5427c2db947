//! Experiment configuration and reproducible unit-disk topologies.
//!
//! A [`ScenarioConfig`] describes one simulation run end to end. Named
//! presets reproduce the four published scenarios (500 nodes, 100 m x 100 m,
//! 1000 s) and their scaled-down `_small` variants (100 nodes, 200 s) used for
//! quick experiments.
//!
//! [`generate_topology`] draws node positions uniformly over the area from a
//! seeded ChaCha8 stream, connects every pair within transmission range, and
//! re-samples until the graph is connected.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::attackers::DataPlaneMode;
use crate::time::SimTime;
use crate::NodeId;

/// Upper bound on position re-samples before giving up on connectivity.
pub const MAX_TOPOLOGY_ATTEMPTS: u32 = 100;

/// Fraction of the run reserved for attack-free threshold calibration.
pub const WARMUP_FRACTION: f64 = 0.1;

/// Names accepted by [`ScenarioConfig::preset`].
pub const PRESET_NAMES: [&str; 8] = [
    "scenario1",
    "scenario2",
    "scenario3",
    "scenario4",
    "scenario1_small",
    "scenario2_small",
    "scenario3_small",
    "scenario4_small",
];

/// Deployment rectangle in meters, anchored at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn new(width: f64, height: f64) -> Self {
        Area { width, height }
    }

    pub fn center(&self) -> Position {
        Position {
            x: self.width / 2.0,
            y: self.height / 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Mobility {
    None,
    RandomWaypoint { speed_mps: f64 },
}

/// How each node picks the APT-RREQ flood threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum AptThreshold {
    /// Mean plus three standard deviations of the per-neighbor RREQ counts a
    /// node observed during the attack-free warm-up window.
    Adaptive,
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TrafficSources {
    /// Every non-root, non-attacker node.
    AllBenign,
    /// This many benign nodes, drawn uniformly.
    Count(usize),
}

/// Constant-bit-rate data traffic toward the root.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrafficConfig {
    pub sources: TrafficSources,
    pub period_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioConfig {
    pub name: String,
    pub node_count: usize,
    pub area: Area,
    pub tx_range: f64,
    pub malicious_fraction: f64,
    /// How many of the attackers flood RREQs instead of acting as sinkholes.
    pub flooder_count: usize,
    pub attack_interval_s: f64,
    /// Defaults to [`WARMUP_FRACTION`] of the duration when unset.
    pub attack_start_s: Option<f64>,
    pub duration_s: f64,
    pub packet_size_bytes: u32,
    pub traffic: TrafficConfig,
    pub dio_period_s: f64,
    pub hello_period_s: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub apt_threshold: AptThreshold,
    pub benign_rreq_rate: f64,
    pub flooder_rreq_rate: f64,
    pub sinkhole_advertised_rank: u32,
    pub sinkhole_mode: DataPlaneMode,
    pub hop_latency_s: f64,
    pub packet_timeout_s: f64,
    pub max_hops: u32,
    pub mobility: Mobility,
    pub detection_enabled: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".to_string(),
            node_count: 500,
            area: Area::new(100.0, 100.0),
            tx_range: 20.0,
            malicious_fraction: 0.10,
            flooder_count: 0,
            attack_interval_s: 1.0,
            attack_start_s: None,
            duration_s: 1000.0,
            packet_size_bytes: 512,
            traffic: TrafficConfig {
                sources: TrafficSources::AllBenign,
                period_s: 1.0,
            },
            dio_period_s: 10.0,
            hello_period_s: 1.0,
            alpha_low: 0.3,
            alpha_high: 0.8,
            apt_threshold: AptThreshold::Adaptive,
            benign_rreq_rate: 1.0,
            flooder_rreq_rate: 10.0,
            sinkhole_advertised_rank: 0,
            sinkhole_mode: DataPlaneMode::Drop,
            hop_latency_s: 0.005,
            packet_timeout_s: 5.0,
            max_hops: 64,
            mobility: Mobility::None,
            detection_enabled: true,
            seed: 1,
        }
    }
}

/// A violated configuration constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError {
            field,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

impl core::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    InvalidConfig(ConfigError),
    /// No connected placement was found; the parameters are too sparse.
    ConnectivityFailure { attempts: u32 },
    /// A hand-built topology violated a structural invariant.
    InvalidTopology(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::InvalidConfig(e) => write!(f, "{e}"),
            ScenarioError::ConnectivityFailure { attempts } => write!(
                f,
                "no connected topology after {attempts} attempts; increase tx_range or node_count"
            ),
            ScenarioError::InvalidTopology(msg) => write!(f, "invalid topology: {msg}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::InvalidConfig(e)
    }
}

fn finite_positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be a finite number > 0"))
    }
}

/// Periods below one microsecond vanish on the simulation clock.
fn period(field: &'static str, v: f64) -> Result<(), ConfigError> {
    finite_positive(field, v)?;
    if SimTime::from_secs_f64(v).is_zero() {
        return Err(ConfigError::new(field, "must be at least 1 microsecond"));
    }
    Ok(())
}

fn unit_alpha(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must lie in (0, 1]"))
    }
}

impl ScenarioConfig {
    /// Looks up a named preset. `scenario1`..`scenario4` follow the published
    /// parameter tables; the `_small` variants shrink the network to 100 nodes
    /// and the run to 200 s while keeping everything else.
    pub fn preset(name: &str) -> Option<Self> {
        let (base, small) = match name.strip_suffix("_small") {
            Some(base) => (base, true),
            None => (name, false),
        };
        let mut cfg = ScenarioConfig {
            name: name.to_string(),
            ..ScenarioConfig::default()
        };
        match base {
            "scenario1" => cfg.malicious_fraction = 0.10,
            "scenario2" => cfg.malicious_fraction = 0.20,
            "scenario3" => cfg.malicious_fraction = 0.30,
            "scenario4" => {
                cfg.malicious_fraction = 0.30;
                cfg.attack_interval_s = 0.05;
            }
            _ => return None,
        }
        if small {
            cfg.node_count = 100;
            cfg.duration_s = 200.0;
        }
        Some(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.node_count < 2 {
            return Err(ConfigError::new("node_count", "must be at least 2"));
        }
        if u32::try_from(self.node_count).is_err() {
            return Err(ConfigError::new("node_count", "too large"));
        }
        finite_positive("area", self.area.width)?;
        finite_positive("area", self.area.height)?;
        finite_positive("tx_range", self.tx_range)?;
        if !(self.malicious_fraction >= 0.0 && self.malicious_fraction < 1.0) {
            return Err(ConfigError::new("malicious_fraction", "must lie in [0, 1)"));
        }
        let attackers = self.attacker_count();
        if attackers > self.node_count - 1 {
            return Err(ConfigError::new(
                "malicious_fraction",
                "more attackers than non-root nodes",
            ));
        }
        if self.flooder_count > attackers {
            return Err(ConfigError::new(
                "flooder_count",
                "cannot exceed round(malicious_fraction * node_count)",
            ));
        }
        period("attack_interval_s", self.attack_interval_s)?;
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(ConfigError::new("duration_s", "must be a finite number >= 0"));
        }
        if let Some(start) = self.attack_start_s {
            if !(start.is_finite() && start >= 0.0 && start <= self.duration_s) {
                return Err(ConfigError::new(
                    "attack_start_s",
                    "must lie in [0, duration_s]",
                ));
            }
        }
        if self.packet_size_bytes == 0 {
            return Err(ConfigError::new("packet_size_bytes", "must be > 0"));
        }
        period("traffic_period_s", self.traffic.period_s)?;
        if let TrafficSources::Count(0) = self.traffic.sources {
            return Err(ConfigError::new("traffic_sources", "must name at least one source"));
        }
        period("dio_period_s", self.dio_period_s)?;
        period("hello_period_s", self.hello_period_s)?;
        unit_alpha("alpha_low", self.alpha_low)?;
        unit_alpha("alpha_high", self.alpha_high)?;
        if let AptThreshold::Absolute(t) = self.apt_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ConfigError::new("apt_threshold", "must be `adaptive` or a number >= 0"));
            }
        }
        if !(self.benign_rreq_rate.is_finite() && self.benign_rreq_rate >= 0.0) {
            return Err(ConfigError::new("benign_rreq_rate", "must be a finite number >= 0"));
        }
        if !(self.flooder_rreq_rate.is_finite() && self.flooder_rreq_rate > self.benign_rreq_rate)
        {
            return Err(ConfigError::new(
                "flooder_rreq_rate",
                "must be strictly greater than benign_rreq_rate",
            ));
        }
        period("hop_latency_s", self.hop_latency_s)?;
        period("packet_timeout_s", self.packet_timeout_s)?;
        if self.max_hops == 0 {
            return Err(ConfigError::new("max_hops", "must be >= 1"));
        }
        if let Mobility::RandomWaypoint { speed_mps } = self.mobility {
            finite_positive("mobility", speed_mps)?;
        }
        Ok(())
    }

    /// `round(malicious_fraction * node_count)`.
    pub fn attacker_count(&self) -> usize {
        libm::round(self.malicious_fraction * self.node_count as f64) as usize
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }

    pub fn attack_start(&self) -> SimTime {
        let start = self
            .attack_start_s
            .unwrap_or(self.duration_s * WARMUP_FRACTION);
        SimTime::from_secs_f64(start)
    }

    /// End of the attack-free calibration window: the first
    /// [`WARMUP_FRACTION`] of the run, cut short if the attack starts earlier.
    pub fn warmup_end(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s * WARMUP_FRACTION).min(self.attack_start())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum AttackerRole {
    Sinkhole,
    Flooder,
}

/// Node placement, unit-disk adjacency and attacker assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    positions: Vec<Position>,
    tx_range: Option<f64>,
    root: NodeId,
    adjacency: Vec<Vec<NodeId>>,
    attackers: BTreeMap<NodeId, AttackerRole>,
}

impl Topology {
    /// Builds a unit-disk topology over explicit positions.
    pub fn from_positions(
        positions: Vec<Position>,
        tx_range: f64,
        root: NodeId,
        attackers: BTreeMap<NodeId, AttackerRole>,
    ) -> Result<Self, ScenarioError> {
        let adjacency = unit_disk_adjacency(&positions, tx_range);
        let topo = Topology {
            positions,
            tx_range: Some(tx_range),
            root,
            adjacency,
            attackers,
        };
        topo.check()?;
        Ok(topo)
    }

    /// Builds a topology from an explicit undirected edge list. Such graphs
    /// carry no geometry, so mobility cannot be applied to them.
    pub fn from_edges(
        node_count: usize,
        edges: &[(u32, u32)],
        root: NodeId,
        attackers: BTreeMap<NodeId, AttackerRole>,
    ) -> Result<Self, ScenarioError> {
        let mut adjacency = alloc::vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a == b {
                return Err(ScenarioError::InvalidTopology(alloc::format!(
                    "self-loop on node {a}"
                )));
            }
            let (ai, bi) = (a as usize, b as usize);
            if ai >= node_count || bi >= node_count {
                return Err(ScenarioError::InvalidTopology(alloc::format!(
                    "edge ({a}, {b}) references a missing node"
                )));
            }
            adjacency[ai].push(NodeId(b));
            adjacency[bi].push(NodeId(a));
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let positions = (0..node_count)
            .map(|i| Position::new(i as f64, 0.0))
            .collect();
        let topo = Topology {
            positions,
            tx_range: None,
            root,
            adjacency,
            attackers,
        };
        topo.check()?;
        Ok(topo)
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let n = self.positions.len();
        if n < 2 {
            return Err(ScenarioError::InvalidTopology("fewer than 2 nodes".into()));
        }
        if self.root.index() >= n {
            return Err(ScenarioError::InvalidTopology("root out of range".into()));
        }
        if self.attackers.contains_key(&self.root) {
            return Err(ScenarioError::InvalidTopology("root is an attacker".into()));
        }
        if let Some((id, _)) = self.attackers.iter().find(|(id, _)| id.index() >= n) {
            return Err(ScenarioError::InvalidTopology(alloc::format!(
                "attacker {id} out of range"
            )));
        }
        if !self.is_connected() {
            return Err(ScenarioError::InvalidTopology("graph is not connected".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn tx_range(&self) -> Option<f64> {
        self.tx_range
    }

    /// Neighbors of `id` in ascending id order.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.index()]
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|list| list.binary_search(&b).is_ok())
    }

    pub fn attackers(&self) -> &BTreeMap<NodeId, AttackerRole> {
        &self.attackers
    }

    pub fn role(&self, id: NodeId) -> Option<AttackerRole> {
        self.attackers.get(&id).copied()
    }

    pub fn is_attacker(&self, id: NodeId) -> bool {
        self.attackers.contains_key(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::from_index)
    }

    /// Non-root nodes that are not attackers.
    pub fn benign_non_root(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids()
            .filter(move |&id| id != self.root && !self.is_attacker(id))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = alloc::vec![false; n];
        let mut queue = VecDeque::from([self.root]);
        seen[self.root.index()] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }

    /// Moves nodes and rebuilds the unit-disk adjacency. Unlike generation,
    /// this does not require the result to stay connected.
    pub fn relocate(&mut self, positions: Vec<Position>) -> Result<(), ScenarioError> {
        let range = self.tx_range.ok_or_else(|| {
            ScenarioError::InvalidTopology("edge-list topology has no geometry".into())
        })?;
        if positions.len() != self.positions.len() {
            return Err(ScenarioError::InvalidTopology("node count changed".into()));
        }
        self.adjacency = unit_disk_adjacency(&positions, range);
        self.positions = positions;
        Ok(())
    }
}

fn unit_disk_adjacency(positions: &[Position], tx_range: f64) -> Vec<Vec<NodeId>> {
    let range_sq = tx_range * tx_range;
    let n = positions.len();
    let mut adjacency = alloc::vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance_sq(&positions[j]) <= range_sq {
                adjacency[i].push(NodeId::from_index(j));
                adjacency[j].push(NodeId::from_index(i));
            }
        }
    }
    // j > i pushes keep every list sorted already.
    adjacency
}

/// Node nearest the area center; lowest id wins ties.
fn central_node(positions: &[Position], area: &Area) -> NodeId {
    let c = area.center();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in positions.iter().enumerate() {
        let d = p.distance_sq(&c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    NodeId::from_index(best)
}

/// Seeded generator used for topology draws. The engine derives its own
/// independent stream from the same seed.
pub fn topology_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Places `cfg.node_count` nodes uniformly over `cfg.area`, roots the DODAG at
/// the node nearest the center and draws `round(malicious_fraction * n)`
/// attackers uniformly among the other nodes. The first `flooder_count`
/// drawn attackers flood; the rest are sinkholes.
pub fn generate_topology(cfg: &ScenarioConfig) -> Result<Topology, ScenarioError> {
    cfg.validate()?;
    let mut rng = topology_rng(cfg.seed);
    let n = cfg.node_count;
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let positions: Vec<Position> = (0..n)
            .map(|_| {
                let x = rng.random::<f64>() * cfg.area.width;
                let y = rng.random::<f64>() * cfg.area.height;
                Position::new(x, y)
            })
            .collect();
        let root = central_node(&positions, &cfg.area);
        let adjacency = unit_disk_adjacency(&positions, cfg.tx_range);
        let mut topo = Topology {
            positions,
            tx_range: Some(cfg.tx_range),
            root,
            adjacency,
            attackers: BTreeMap::new(),
        };
        if !topo.is_connected() {
            continue;
        }
        let candidates: Vec<NodeId> = topo.node_ids().filter(|&id| id != root).collect();
        let picks = index::sample(&mut rng, candidates.len(), cfg.attacker_count());
        for (k, i) in picks.into_iter().enumerate() {
            let role = if k < cfg.flooder_count {
                AttackerRole::Flooder
            } else {
                AttackerRole::Sinkhole
            };
            topo.attackers.insert(candidates[i], role);
        }
        return Ok(topo);
    }
    Err(ScenarioError::ConnectivityFailure {
        attempts: MAX_TOPOLOGY_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, frac: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            node_count: n,
            malicious_fraction: frac,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn two_nodes_in_a_small_square_are_adjacent() {
        let cfg = ScenarioConfig {
            node_count: 2,
            area: Area::new(10.0, 10.0),
            malicious_fraction: 0.0,
            ..ScenarioConfig::default()
        };
        let topo = generate_topology(&cfg).unwrap();
        assert_eq!(topo.node_count(), 2);
        assert!(topo.are_adjacent(NodeId(0), NodeId(1)));
        assert!(topo.attackers().is_empty());
    }

    #[test]
    fn thirty_percent_of_500_is_150_attackers() {
        let cfg = ScenarioConfig::preset("scenario3").unwrap();
        let topo = generate_topology(&cfg).unwrap();
        assert_eq!(topo.attackers().len(), 150);
        assert!(!topo.is_attacker(topo.root()));
    }

    #[test]
    fn same_seed_same_topology() {
        let cfg = small(120, 0.2, 99);
        assert_eq!(generate_topology(&cfg).unwrap(), generate_topology(&cfg).unwrap());
        let other = small(120, 0.2, 100);
        assert_ne!(
            generate_topology(&cfg).unwrap().positions(),
            generate_topology(&other).unwrap().positions()
        );
    }

    #[test]
    fn root_is_nearest_the_center() {
        let topo = generate_topology(&small(80, 0.1, 5)).unwrap();
        let c = Area::new(100.0, 100.0).center();
        let root_d = topo.positions()[topo.root().index()].distance_sq(&c);
        assert!(topo.positions().iter().all(|p| p.distance_sq(&c) >= root_d));
    }

    #[test]
    fn flooders_are_drawn_from_the_attacker_set() {
        let cfg = ScenarioConfig {
            flooder_count: 2,
            ..small(100, 0.05, 3)
        };
        let topo = generate_topology(&cfg).unwrap();
        let flooders = topo
            .attackers()
            .values()
            .filter(|r| **r == AttackerRole::Flooder)
            .count();
        assert_eq!(topo.attackers().len(), 5);
        assert_eq!(flooders, 2);
    }

    #[test]
    fn sparse_parameters_fail_connectivity() {
        let cfg = ScenarioConfig {
            node_count: 50,
            tx_range: 1.0,
            malicious_fraction: 0.0,
            ..ScenarioConfig::default()
        };
        assert_eq!(
            generate_topology(&cfg),
            Err(ScenarioError::ConnectivityFailure {
                attempts: MAX_TOPOLOGY_ATTEMPTS
            })
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ScenarioConfig { node_count: 1, ..Default::default() },
            ScenarioConfig { tx_range: 0.0, ..Default::default() },
            ScenarioConfig { malicious_fraction: 1.0, ..Default::default() },
            ScenarioConfig { alpha_low: 0.0, ..Default::default() },
            ScenarioConfig { alpha_high: 1.5, ..Default::default() },
            ScenarioConfig { duration_s: -1.0, ..Default::default() },
            ScenarioConfig { flooder_rreq_rate: 1.0, ..Default::default() },
            ScenarioConfig { attack_interval_s: 0.0, ..Default::default() },
            ScenarioConfig { flooder_count: 51, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(ScenarioConfig::default().validate().is_ok());
    }

    #[test]
    fn presets_match_the_published_tables() {
        for (name, frac) in [("scenario1", 0.10), ("scenario2", 0.20), ("scenario3", 0.30)] {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert_eq!(cfg.node_count, 500);
            assert_eq!(cfg.area, Area::new(100.0, 100.0));
            assert_eq!(cfg.duration_s, 1000.0);
            assert_eq!(cfg.tx_range, 20.0);
            assert_eq!(cfg.packet_size_bytes, 512);
            assert_eq!(cfg.malicious_fraction, frac);
            assert_eq!(cfg.mobility, Mobility::None);
        }
        let small = ScenarioConfig::preset("scenario3_small").unwrap();
        assert_eq!((small.node_count, small.duration_s), (100, 200.0));
        assert!(ScenarioConfig::preset("scenario9").is_none());
        for name in PRESET_NAMES {
            ScenarioConfig::preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn edge_list_rejects_self_loops_and_disconnection() {
        let none = BTreeMap::new();
        assert!(Topology::from_edges(3, &[(0, 0), (0, 1)], NodeId(0), none.clone()).is_err());
        assert!(Topology::from_edges(3, &[(0, 1)], NodeId(0), none.clone()).is_err());
        let ok = Topology::from_edges(3, &[(0, 1), (1, 2)], NodeId(0), none).unwrap();
        assert_eq!(ok.edge_count(), 2);
    }

    #[test]
    fn warmup_ends_at_ten_percent_or_attack_start() {
        let cfg = ScenarioConfig { duration_s: 200.0, ..Default::default() };
        assert_eq!(cfg.warmup_end(), SimTime::from_secs(20));
        assert_eq!(cfg.attack_start(), SimTime::from_secs(20));
        let early = ScenarioConfig { attack_start_s: Some(5.0), ..cfg };
        assert_eq!(early.warmup_end(), SimTime::from_secs(5));
    }
}
