//! Run-level performance and detection metrics.
//!
//! Percentages are in `[0, 100]`. A ratio with an empty denominator is
//! [`Pct::Undefined`] rather than a silent zero.

use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::engine::RunTranscript;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Pct {
    Value(f64),
    Undefined,
}

impl Pct {
    pub fn ratio(num: u64, den: u64) -> Pct {
        if den == 0 {
            Pct::Undefined
        } else {
            Pct::Value(100.0 * num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Pct::Value(v) => Some(v),
            Pct::Undefined => None,
        }
    }
}

impl fmt::Display for Pct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pct::Value(v) => write!(f, "{v}"),
            Pct::Undefined => f.write_str("NA"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricsError {
    /// PDR over a run that emitted nothing.
    NoPacketsSent,
    /// Throughput over an empty measurement window.
    EmptyWindow,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::NoPacketsSent => f.write_str("no data packets were sent"),
            MetricsError::EmptyWindow => f.write_str("measurement window has zero length"),
        }
    }
}

impl core::error::Error for MetricsError {}

pub fn pdr(delivered: u64, sent: u64) -> Result<f64, MetricsError> {
    if sent == 0 {
        return Err(MetricsError::NoPacketsSent);
    }
    Ok(100.0 * delivered as f64 / sent as f64)
}

pub fn plr(delivered: u64, sent: u64) -> Result<f64, MetricsError> {
    Ok(100.0 - pdr(delivered, sent)?)
}

pub fn throughput_kbps(
    delivered: u64,
    packet_size_bytes: u32,
    start: SimTime,
    stop: SimTime,
) -> Result<f64, MetricsError> {
    let window = stop.saturating_sub(start);
    if window.is_zero() {
        return Err(MetricsError::EmptyWindow);
    }
    let kbits = delivered as f64 * packet_size_bytes as f64 * 8.0 / 1000.0;
    Ok(kbits / window.as_secs_f64())
}

/// Node-level outcome of detection. Positives are nodes on the root's
/// blacklist at the end of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Root excluded: it can neither attack nor be blacklisted.
    pub fn from_transcript(t: &RunTranscript) -> Self {
        let mut m = ConfusionMatrix::default();
        for i in 0..t.node_count {
            let id = crate::NodeId::from_index(i);
            if id == t.root {
                continue;
            }
            let attacker = t.attackers.contains_key(&id);
            let flagged = t.root_blacklist.contains_key(&id);
            match (attacker, flagged) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
            }
        }
        m
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
    }

    pub fn rates(&self) -> DetectionRates {
        detection_rates(self.tp, self.fn_, self.fp, self.tn)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectionRates {
    pub dr: Pct,
    pub fnr: Pct,
    pub fpr: Pct,
}

/// `DR = TP/(TP+FN)`, `FNR = FN/(TP+FN)`, `FPR = FP/(FP+TN)`.
pub fn detection_rates(tp: u64, fn_: u64, fp: u64, tn: u64) -> DetectionRates {
    DetectionRates {
        dr: Pct::ratio(tp, tp + fn_),
        fnr: Pct::ratio(fn_, tp + fn_),
        fpr: Pct::ratio(fp, fp + tn),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunMetrics {
    pub sent: u64,
    pub delivered: u64,
    pub pdr_pct: f64,
    pub plr_pct: f64,
    pub throughput_kbps: f64,
    pub confusion: ConfusionMatrix,
    pub rates: DetectionRates,
}

impl RunMetrics {
    pub fn from_transcript(t: &RunTranscript) -> Result<Self, MetricsError> {
        let sent = t.sent();
        let delivered = t.delivered();
        let confusion = ConfusionMatrix::from_transcript(t);
        Ok(RunMetrics {
            sent,
            delivered,
            pdr_pct: pdr(delivered, sent)?,
            plr_pct: plr(delivered, sent)?,
            throughput_kbps: throughput_kbps(delivered, t.packet_size_bytes, t.start, t.stop)?,
            confusion,
            rates: confusion.rates(),
        })
    }
}

/// Mean over runs. Per-run ratios are averaged; undefined rates are skipped
/// and the mean is undefined only if every run was.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AggregateMetrics {
    pub runs: usize,
    pub pdr_pct: f64,
    pub plr_pct: f64,
    pub throughput_kbps: f64,
    pub dr: Pct,
    pub fnr: Pct,
    pub fpr: Pct,
    pub confusion: ConfusionMatrix,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_pct(xs: impl Iterator<Item = Pct>) -> Pct {
    mean(xs.filter_map(Pct::value)).map_or(Pct::Undefined, Pct::Value)
}

pub fn aggregate(runs: &[RunMetrics]) -> Option<AggregateMetrics> {
    if runs.is_empty() {
        return None;
    }
    let mut confusion = ConfusionMatrix::default();
    for r in runs {
        confusion.add(&r.confusion);
    }
    Some(AggregateMetrics {
        runs: runs.len(),
        pdr_pct: mean(runs.iter().map(|r| r.pdr_pct))?,
        plr_pct: mean(runs.iter().map(|r| r.plr_pct))?,
        throughput_kbps: mean(runs.iter().map(|r| r.throughput_kbps))?,
        dr: mean_pct(runs.iter().map(|r| r.rates.dr)),
        fnr: mean_pct(runs.iter().map(|r| r.rates.fnr)),
        fpr: mean_pct(runs.iter().map(|r| r.rates.fpr)),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdr_and_plr() {
        assert_eq!(pdr(950, 1000).unwrap(), 95.0);
        assert_eq!(plr(950, 1000).unwrap(), 5.0);
        assert_eq!(pdr(0, 0), Err(MetricsError::NoPacketsSent));
    }

    fn run(sent: u64, delivered: u64) -> RunMetrics {
        let confusion = ConfusionMatrix { tp: 1, fn_: 0, fp: 0, tn: 9 };
        RunMetrics {
            sent,
            delivered,
            pdr_pct: pdr(delivered, sent).unwrap(),
            plr_pct: plr(delivered, sent).unwrap(),
            throughput_kbps: throughput_kbps(delivered, 512, SimTime::ZERO, SimTime::from_secs(1000))
                .unwrap(),
            confusion,
            rates: confusion.rates(),
        }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(pdr(100, 100).unwrap(), 100.0);
        assert_eq!(pdr(150, 200).unwrap(), 75.0);
        assert_eq!(plr(150, 200).unwrap(), 25.0);
        assert_eq!(plr(0, 200).unwrap(), 100.0);
        assert_eq!(plr(200, 200).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_is_the_mean_of_per_run_ratios() {
        let agg = aggregate(&[run(100, 100), run(100, 50)]).unwrap();
        assert_eq!(agg.pdr_pct, 75.0);
        assert_eq!(agg.runs, 2);
        let one = aggregate(&[run(1000, 1000)]).unwrap();
        let two = aggregate(&[run(1000, 1000), run(1000, 1000)]).unwrap();
        assert_eq!(one.throughput_kbps, two.throughput_kbps);
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn rates_from_counts() {
        let r = detection_rates(98, 2, 0, 350);
        assert_eq!(r.dr, Pct::Value(98.0));
        assert_eq!(r.fnr, Pct::Value(2.0));
        assert_eq!(r.fpr, Pct::Value(0.0));
        let r = detection_rates(48, 2, 0, 450);
        assert_eq!(r.dr, Pct::Value(96.0));
        assert_eq!(r.fnr, Pct::Value(4.0));
        assert_eq!(r.fpr, Pct::Value(0.0));
    }

    #[test]
    fn undefined_when_no_attackers() {
        let r = detection_rates(0, 0, 0, 499);
        assert_eq!(r.dr, Pct::Undefined);
        assert_eq!(r.fnr, Pct::Undefined);
        assert_eq!(r.fpr, Pct::Value(0.0));
        assert_eq!(alloc::format!("{}", r.dr), "NA");
    }

    #[test]
    fn throughput() {
        let t = throughput_kbps(1000, 512, SimTime::ZERO, SimTime::from_secs(100)).unwrap();
        assert!((t - 40.96).abs() < 1e-12);
        let t = throughput_kbps(1000, 512, SimTime::ZERO, SimTime::from_secs(1000)).unwrap();
        assert!((t - 4.096).abs() < 1e-9);
        assert_eq!(throughput_kbps(0, 512, SimTime::ZERO, SimTime::from_secs(10)).unwrap(), 0.0);
        assert_eq!(
            throughput_kbps(1, 1, SimTime::from_secs(5), SimTime::from_secs(5)),
            Err(MetricsError::EmptyWindow)
        );
    }
}
