//! The two modeled adversaries: a rank-lying sinkhole and an RREQ flooder.
//!
//! Attackers behave like ordinary nodes until their attack phase starts. They
//! never originate malicious reports or blacklist broadcasts.

use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::rpl::{DataPacket, DioMessage, Rank};
use crate::time::SimTime;
use crate::NodeId;

/// What a sinkhole does with data it attracts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum DataPlaneMode {
    Drop,
    Alter,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttackerError {
    /// Advertising a rank at or above the true one attracts nothing.
    NotAnAttack { advertised: Rank, true_rank: Rank },
    /// The flood rate must exceed the benign RREQ rate.
    RateNotAboveBenign { rate: f64, benign: f64 },
    ZeroInterval,
}

impl fmt::Display for AttackerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackerError::NotAnAttack { advertised, true_rank } => write!(
                f,
                "advertised rank {advertised} is not below the true rank {true_rank}"
            ),
            AttackerError::RateNotAboveBenign { rate, benign } => write!(
                f,
                "flood rate {rate}/s does not exceed the benign rate {benign}/s"
            ),
            AttackerError::ZeroInterval => f.write_str("attack interval must be positive"),
        }
    }
}

impl core::error::Error for AttackerError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SinkholeBehavior {
    pub advertised_rank: Rank,
    pub mode: DataPlaneMode,
    pub attack_start: SimTime,
    /// Spacing of the malicious DIO grid that begins at `attack_start`.
    pub attack_interval: SimTime,
}

impl SinkholeBehavior {
    pub fn new(
        advertised_rank: Rank,
        true_rank: Rank,
        mode: DataPlaneMode,
        attack_start: SimTime,
        attack_interval: SimTime,
    ) -> Result<Self, AttackerError> {
        if advertised_rank >= true_rank {
            return Err(AttackerError::NotAnAttack {
                advertised: advertised_rank,
                true_rank,
            });
        }
        if attack_interval.is_zero() {
            return Err(AttackerError::ZeroInterval);
        }
        Ok(SinkholeBehavior {
            advertised_rank,
            mode,
            attack_start,
            attack_interval,
        })
    }

    pub fn is_active(&self, now: SimTime) -> bool {
        now >= self.attack_start
    }

    fn on_grid(&self, now: SimTime) -> bool {
        self.is_active(now)
            && (now - self.attack_start).as_micros().is_multiple_of(self.attack_interval.as_micros())
    }

    /// First grid instant at or after `t`.
    pub fn next_emission(&self, t: SimTime) -> SimTime {
        if t <= self.attack_start {
            return self.attack_start;
        }
        let step = self.attack_interval.as_micros();
        let offset = (t - self.attack_start).as_micros();
        let k = offset.div_ceil(step);
        self.attack_start + SimTime::from_micros(k * step)
    }

    /// Grid instants in `[attack_start, until)`.
    pub fn emissions_before(&self, until: SimTime) -> u64 {
        if until <= self.attack_start {
            return 0;
        }
        (until - self.attack_start)
            .as_micros()
            .div_ceil(self.attack_interval.as_micros())
    }
}

/// The lying DIO a sinkhole broadcasts at `now`, if `now` is on its grid.
pub fn sinkhole_emit_dio(
    behavior: &SinkholeBehavior,
    sender: NodeId,
    now: SimTime,
) -> Option<DioMessage> {
    behavior.on_grid(now).then_some(DioMessage {
        sender,
        advertised_rank: behavior.advertised_rank,
        emitted_at: now,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataAction {
    Dropped,
    /// Payload corrupted; the packet continues upward.
    Altered,
    Untouched,
}

/// Data-plane behavior of an active sinkhole. Callers only pass packets that
/// were routed to the sinkhole after its attack began.
pub fn sinkhole_handle_data(behavior: &SinkholeBehavior, packet: &mut DataPacket) -> DataAction {
    match behavior.mode {
        DataPlaneMode::Drop => DataAction::Dropped,
        DataPlaneMode::Alter => {
            packet.corrupted = true;
            DataAction::Altered
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlooderBehavior {
    pub rreq_rate_per_s: f64,
    pub attack_start: SimTime,
}

impl FlooderBehavior {
    pub fn new(
        rreq_rate_per_s: f64,
        benign_rate_per_s: f64,
        attack_start: SimTime,
    ) -> Result<Self, AttackerError> {
        // Negated so NaN rates are rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(rreq_rate_per_s > benign_rate_per_s) {
            return Err(AttackerError::RateNotAboveBenign {
                rate: rreq_rate_per_s,
                benign: benign_rate_per_s,
            });
        }
        Ok(FlooderBehavior {
            rreq_rate_per_s,
            attack_start,
        })
    }

    pub fn is_active(&self, now: SimTime) -> bool {
        now >= self.attack_start
    }
}

/// RREQs a flooder emits over a window of length `window` opening at
/// `window_start`: `round(rate * window)` inside the attack phase, zero
/// before it.
pub fn flooder_emit_rreqs(behavior: &FlooderBehavior, window_start: SimTime, window: SimTime) -> u64 {
    if window_start < behavior.attack_start {
        return 0;
    }
    libm::round(behavior.rreq_rate_per_s * window.as_secs_f64()) as u64
}

/// RREQs a benign node emits in its `k`-th window at a constant rate. The
/// fractional remainder carries over so long-run totals are exact.
pub fn benign_rreq_count(rate_per_s: f64, window: SimTime, k: u64) -> u64 {
    let per_window = rate_per_s * window.as_secs_f64();
    let upto = |j: u64| libm::floor(per_window * j as f64 + 1e-9) as u64;
    upto(k + 1) - upto(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinkhole(start: u64, interval_ms: u64) -> SinkholeBehavior {
        SinkholeBehavior::new(
            Rank(0),
            Rank(3),
            DataPlaneMode::Drop,
            SimTime::from_secs(start),
            SimTime::from_millis(interval_ms),
        )
        .unwrap()
    }

    #[test]
    fn emits_rank_zero_at_attack_start() {
        let b = sinkhole(10, 4000);
        let dio = sinkhole_emit_dio(&b, NodeId(7), SimTime::from_secs(10)).unwrap();
        assert_eq!(dio.advertised_rank, Rank(0));
        assert_eq!(dio.sender, NodeId(7));
    }

    #[test]
    fn silent_before_start_and_off_grid() {
        let b = sinkhole(10, 4000);
        assert!(sinkhole_emit_dio(&b, NodeId(7), SimTime::from_secs(9)).is_none());
        assert!(sinkhole_emit_dio(&b, NodeId(7), SimTime::from_secs(11)).is_none());
        assert!(sinkhole_emit_dio(&b, NodeId(7), SimTime::from_secs(14)).is_some());
    }

    #[test]
    fn four_second_interval_over_1000_s_is_250_dios() {
        let b = sinkhole(0, 4000);
        assert_eq!(b.emissions_before(SimTime::from_secs(1000)), 250);
        // Same count by walking the grid.
        let mut t = b.next_emission(SimTime::ZERO);
        let mut n = 0;
        while t < SimTime::from_secs(1000) {
            assert!(sinkhole_emit_dio(&b, NodeId(1), t).is_some());
            n += 1;
            t = b.next_emission(t + SimTime::from_micros(1));
        }
        assert_eq!(n, 250);
    }

    #[test]
    fn rank_must_be_a_lie() {
        let err = SinkholeBehavior::new(
            Rank(2),
            Rank(2),
            DataPlaneMode::Drop,
            SimTime::ZERO,
            SimTime::from_secs(1),
        );
        assert!(matches!(err, Err(AttackerError::NotAnAttack { .. })));
    }

    #[test]
    fn data_plane_modes() {
        let mut p = DataPacket::new(1, NodeId(3), SimTime::ZERO);
        let b = sinkhole(0, 1000);
        assert_eq!(sinkhole_handle_data(&b, &mut p), DataAction::Dropped);
        let alter = SinkholeBehavior { mode: DataPlaneMode::Alter, ..b };
        assert_eq!(sinkhole_handle_data(&alter, &mut p), DataAction::Altered);
        assert!(p.corrupted);
    }

    #[test]
    fn flooder_counts() {
        let f = FlooderBehavior::new(10.0, 1.0, SimTime::from_secs(5)).unwrap();
        assert_eq!(flooder_emit_rreqs(&f, SimTime::from_secs(6), SimTime::from_secs(2)), 20);
        assert_eq!(flooder_emit_rreqs(&f, SimTime::from_secs(1), SimTime::from_secs(2)), 0);
        assert!(FlooderBehavior::new(1.0, 1.0, SimTime::ZERO).is_err());
    }

    #[test]
    fn benign_cbr_counts_are_exact_over_time() {
        let w = SimTime::from_secs(1);
        assert!((0..10).all(|k| benign_rreq_count(1.0, w, k) == 1));
        let total: u64 = (0..10).map(|k| benign_rreq_count(0.5, w, k)).sum();
        assert_eq!(total, 5);
        let total: u64 = (0..3).map(|k| benign_rreq_count(0.1, SimTime::from_millis(3333), k)).sum();
        assert_eq!(total, 0);
    }
}
