//! CSV reports, verdict logs and NDJSON traces.
//!
//! Undefined rates are written as `NA`. Floats use the shortest decimal that
//! parses back to the same value, so files round-trip exactly.

use std::io::{self, Write};
use std::path::Path;

use rplguard_core::engine::{RunTranscript, VerdictRecord};
use rplguard_core::metrics::{self, ConfusionMatrix, DetectionRates, Pct, RunMetrics};
use rplguard_core::scenario::ScenarioConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const TRACE_FILE: &str = "trace.ndjson";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Metrics(#[from] metrics::MetricsError),
    #[error("{path} holds no runs")]
    Empty { path: String },
}

fn ser_pct<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("NA"),
    }
}

fn de_pct<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    let raw = String::deserialize(d)?;
    if raw == "NA" {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(serde::de::Error::custom)
}

/// One line of `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub seed: u64,
    pub node_count: usize,
    pub malicious_fraction: f64,
    pub attack_interval_s: f64,
    pub detection_enabled: bool,
    pub sent: u64,
    pub delivered: u64,
    pub pdr_pct: f64,
    pub plr_pct: f64,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub dr_pct: Option<f64>,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub fnr_pct: Option<f64>,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub fpr_pct: Option<f64>,
    pub throughput_kbps: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl RunRow {
    pub fn new(cfg: &ScenarioConfig, m: &RunMetrics) -> Self {
        RunRow {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            node_count: cfg.node_count,
            malicious_fraction: cfg.malicious_fraction,
            attack_interval_s: cfg.attack_interval_s,
            detection_enabled: cfg.detection_enabled,
            sent: m.sent,
            delivered: m.delivered,
            pdr_pct: m.pdr_pct,
            plr_pct: m.plr_pct,
            dr_pct: m.rates.dr.value(),
            fnr_pct: m.rates.fnr.value(),
            fpr_pct: m.rates.fpr.value(),
            throughput_kbps: m.throughput_kbps,
            tp: m.confusion.tp,
            fn_: m.confusion.fn_,
            fp: m.confusion.fp,
            tn: m.confusion.tn,
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        let pct = |v: Option<f64>| v.map_or(Pct::Undefined, Pct::Value);
        RunMetrics {
            sent: self.sent,
            delivered: self.delivered,
            pdr_pct: self.pdr_pct,
            plr_pct: self.plr_pct,
            throughput_kbps: self.throughput_kbps,
            confusion: ConfusionMatrix {
                tp: self.tp,
                fn_: self.fn_,
                fp: self.fp,
                tn: self.tn,
            },
            rates: DetectionRates {
                dr: pct(self.dr_pct),
                fnr: pct(self.fnr_pct),
                fpr: pct(self.fpr_pct),
            },
        }
    }

    fn group(&self) -> (&str, usize, f64, f64, bool) {
        (
            &self.scenario,
            self.node_count,
            self.malicious_fraction,
            self.attack_interval_s,
            self.detection_enabled,
        )
    }
}

/// One line of `summary.csv`: the mean over seeds of one parameter cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub node_count: usize,
    pub malicious_fraction: f64,
    pub attack_interval_s: f64,
    pub detection_enabled: bool,
    pub runs: usize,
    pub pdr_pct: f64,
    pub plr_pct: f64,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub dr_pct: Option<f64>,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub fnr_pct: Option<f64>,
    #[serde(serialize_with = "ser_pct", deserialize_with = "de_pct")]
    pub fpr_pct: Option<f64>,
    pub throughput_kbps: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

/// Groups rows by parameter cell in first-seen order and averages each.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut cells: Vec<(&RunRow, Vec<RunMetrics>)> = Vec::new();
    for row in rows {
        match cells.iter_mut().find(|(first, _)| first.group() == row.group()) {
            Some((_, ms)) => ms.push(row.metrics()),
            None => cells.push((row, vec![row.metrics()])),
        }
    }
    cells
        .into_iter()
        .map(|(first, ms)| {
            let agg = metrics::aggregate(&ms).expect("every cell has a run");
            SummaryRow {
                scenario: first.scenario.clone(),
                node_count: first.node_count,
                malicious_fraction: first.malicious_fraction,
                attack_interval_s: first.attack_interval_s,
                detection_enabled: first.detection_enabled,
                runs: agg.runs,
                pdr_pct: agg.pdr_pct,
                plr_pct: agg.plr_pct,
                dr_pct: agg.dr.value(),
                fnr_pct: agg.fnr.value(),
                fpr_pct: agg.fpr.value(),
                throughput_kbps: agg.throughput_kbps,
                tp: agg.confusion.tp,
                fn_: agg.confusion.fn_,
                fp: agg.confusion.fp,
                tn: agg.confusion.tn,
            }
        })
        .collect()
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_string<T: Serialize>(rows: &[T]) -> Result<String, OutputError> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>, OutputError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<RunRow>, _>>()?;
    if rows.is_empty() {
        return Err(OutputError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct VerdictLine {
    time_s: f64,
    receiver: u32,
    sender: u32,
    kind: &'static str,
    dv_rank: Option<u32>,
    di_rank: Option<u32>,
    apt_value: Option<f64>,
    threshold: Option<f64>,
}

/// Verdict log; fields that do not apply to a verdict kind are left empty.
pub fn write_verdicts<W: Write>(out: W, verdicts: &[VerdictRecord]) -> Result<(), OutputError> {
    let lines: Vec<VerdictLine> = verdicts
        .iter()
        .map(|v| VerdictLine {
            time_s: v.time.as_secs_f64(),
            receiver: v.receiver.0,
            sender: v.sender.0,
            kind: v.kind.as_str(),
            dv_rank: v.dv_rank,
            di_rank: v.di_rank,
            apt_value: v.apt_value,
            threshold: v.threshold,
        })
        .collect();
    let mut w = csv::Writer::from_writer(out);
    if lines.is_empty() {
        w.write_record([
            "time_s", "receiver", "sender", "kind", "dv_rank", "di_rank", "apt_value", "threshold",
        ])?;
    }
    for l in &lines {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

/// Transcript as NDJSON: a header, then events, fates and verdicts in
/// order, then the counters.
pub fn write_trace<W: Write>(mut out: W, t: &RunTranscript) -> Result<(), OutputError> {
    let header = serde_json::json!({
        "type": "header",
        "scenario": t.scenario,
        "seed": t.seed,
        "node_count": t.node_count,
        "root": t.root,
        "attackers": t.attackers.iter().map(|(id, role)| serde_json::json!({"node": id, "role": role})).collect::<Vec<_>>(),
        "detection_enabled": t.detection_enabled,
        "packet_size_bytes": t.packet_size_bytes,
        "start": t.start,
        "stop": t.stop,
        "attack_start": t.attack_start,
    });
    writeln!(out, "{header}")?;
    for e in &t.events {
        writeln!(out, "{}", serde_json::to_string(e)?)?;
    }
    for f in &t.fates {
        let mut v = serde_json::to_value(f)?;
        v["type"] = "fate".into();
        writeln!(out, "{v}")?;
    }
    for vr in &t.verdicts {
        let mut v = serde_json::to_value(vr)?;
        v["type"] = "verdict".into();
        writeln!(out, "{v}")?;
    }
    let blacklist: Vec<_> = t
        .root_blacklist
        .iter()
        .map(|(id, at)| serde_json::json!({"node": id, "at": at}))
        .collect();
    writeln!(out, "{}", serde_json::json!({"type": "root_blacklist", "entries": blacklist}))?;
    let mut stats = serde_json::to_value(t.stats)?;
    stats["type"] = "stats".into();
    writeln!(out, "{stats}")?;
    out.flush()?;
    Ok(())
}
