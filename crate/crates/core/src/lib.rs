//! Deterministic discrete-event simulator of a simplified RPL network under
//! sinkhole and RREQ-flooding attacks, with a distributed detector built from
//! a rank-anomaly rule, EWMA flood tracking and root-coordinated blacklisting.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs: a [`ScenarioConfig`](scenario::ScenarioConfig)
//! (seed included) fully determines a [`RunTranscript`](engine::RunTranscript).
//! File formats, the CLI and parallel batch execution live in the `rplguard`
//! crate.
//!
//! ```
//! use rplguard_core::{engine, metrics::RunMetrics, scenario::{Area, ScenarioConfig}};
//!
//! let mut cfg = ScenarioConfig::preset("scenario1_small").unwrap();
//! cfg.node_count = 30;
//! cfg.area = Area::new(40.0, 40.0);
//! cfg.duration_s = 20.0;
//! let transcript = engine::run(&cfg).unwrap();
//! let m = RunMetrics::from_transcript(&transcript).unwrap();
//! assert!((m.pdr_pct + m.plr_pct - 100.0).abs() < 1e-9);
//! ```
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attackers;
pub mod detector;
pub mod engine;
pub mod metrics;
pub mod rpl;
pub mod scenario;
pub mod time;

use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Identifier of a node; doubles as its index in per-node tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index fits in u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub use time::SimTime;
