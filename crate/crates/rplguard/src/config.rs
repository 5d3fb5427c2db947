//! `key = value` scenario files.
//!
//! Blank lines and `#` comments are ignored. An optional leading
//! `preset = <name>` line starts from a named preset instead of the defaults.
//! Every other key is a [`ScenarioConfig`] field name; anything else is
//! rejected with its name.

use std::path::Path;

use rplguard_core::attackers::DataPlaneMode;
use rplguard_core::scenario::{
    AptThreshold, Area, ConfigError, Mobility, ScenarioConfig, TrafficSources, PRESET_NAMES,
};
use thiserror::Error;

pub const KEYS: [&str; 27] = [
    "name",
    "node_count",
    "area",
    "tx_range",
    "malicious_fraction",
    "flooder_count",
    "attack_interval_s",
    "attack_start_s",
    "duration_s",
    "packet_size_bytes",
    "traffic_sources",
    "traffic_period_s",
    "dio_period_s",
    "hello_period_s",
    "alpha_low",
    "alpha_high",
    "apt_threshold",
    "benign_rreq_rate",
    "flooder_rreq_rate",
    "sinkhole_advertised_rank",
    "sinkhole_mode",
    "hop_latency_s",
    "packet_timeout_s",
    "max_hops",
    "mobility",
    "detection_enabled",
    "seed",
];

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: `preset` must come before any other key")]
    LatePreset { line: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A preset name, or a path to a scenario file.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig, ConfigFileError> {
    if let Some(cfg) = ScenarioConfig::preset(arg) {
        return Ok(cfg);
    }
    let path = Path::new(arg);
    if !path.exists() && !arg.contains(['/', '.']) {
        return Err(ConfigFileError::UnknownPreset(arg.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: arg.to_string(),
        source,
    })?;
    let mut cfg = parse_scenario(&text)?;
    if cfg.name.is_empty() {
        cfg.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(cfg)
}

/// Parses and validates a scenario file body.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigFileError> {
    let mut cfg = ScenarioConfig {
        name: String::new(),
        ..ScenarioConfig::default()
    };
    let mut seen_key = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or(ConfigFileError::Syntax { line })?;
        if key == "preset" {
            if seen_key {
                return Err(ConfigFileError::LatePreset { line });
            }
            cfg = ScenarioConfig::preset(value)
                .ok_or_else(|| ConfigFileError::UnknownPreset(value.to_string()))?;
        } else {
            set_key(&mut cfg, key, value).map_err(|e| match e {
                SetError::Unknown => ConfigFileError::UnknownKey {
                    line,
                    key: key.to_string(),
                },
                SetError::Bad(reason) => ConfigFileError::BadValue {
                    line,
                    key: key.to_string(),
                    reason,
                },
            })?;
        }
        seen_key = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug)]
pub enum SetError {
    Unknown,
    Bad(String),
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, SetError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| SetError::Bad(e.to_string()))
}

fn boolean(v: &str) -> Result<bool, SetError> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(SetError::Bad(format!("expected true or false, got `{v}`"))),
    }
}

/// Assigns one field by name. Used by the file parser and by sweeps.
pub fn set_key(cfg: &mut ScenarioConfig, key: &str, v: &str) -> Result<(), SetError> {
    match key {
        "name" => cfg.name = v.to_string(),
        "node_count" => cfg.node_count = num(v)?,
        "area" => {
            let (w, h) = v
                .split_once(['x', 'X'])
                .ok_or_else(|| SetError::Bad(format!("expected WIDTHxHEIGHT, got `{v}`")))?;
            cfg.area = Area::new(num(w.trim())?, num(h.trim())?);
        }
        "tx_range" => cfg.tx_range = num(v)?,
        "malicious_fraction" => cfg.malicious_fraction = num(v)?,
        "flooder_count" => cfg.flooder_count = num(v)?,
        "attack_interval_s" => cfg.attack_interval_s = num(v)?,
        "attack_start_s" => {
            cfg.attack_start_s = match v {
                "default" | "auto" => None,
                _ => Some(num(v)?),
            }
        }
        "duration_s" => cfg.duration_s = num(v)?,
        "packet_size_bytes" => cfg.packet_size_bytes = num(v)?,
        "traffic_sources" => {
            cfg.traffic.sources = match v {
                "all" => TrafficSources::AllBenign,
                _ => TrafficSources::Count(num(v)?),
            }
        }
        "traffic_period_s" => cfg.traffic.period_s = num(v)?,
        "dio_period_s" => cfg.dio_period_s = num(v)?,
        "hello_period_s" => cfg.hello_period_s = num(v)?,
        "alpha_low" => cfg.alpha_low = num(v)?,
        "alpha_high" => cfg.alpha_high = num(v)?,
        "apt_threshold" => {
            cfg.apt_threshold = match v {
                "adaptive" => AptThreshold::Adaptive,
                _ => AptThreshold::Absolute(num(v)?),
            }
        }
        "benign_rreq_rate" => cfg.benign_rreq_rate = num(v)?,
        "flooder_rreq_rate" => cfg.flooder_rreq_rate = num(v)?,
        "sinkhole_advertised_rank" => cfg.sinkhole_advertised_rank = num(v)?,
        "sinkhole_mode" => {
            cfg.sinkhole_mode = match v {
                "drop" => DataPlaneMode::Drop,
                "alter" => DataPlaneMode::Alter,
                _ => return Err(SetError::Bad(format!("expected drop or alter, got `{v}`"))),
            }
        }
        "hop_latency_s" => cfg.hop_latency_s = num(v)?,
        "packet_timeout_s" => cfg.packet_timeout_s = num(v)?,
        "max_hops" => cfg.max_hops = num(v)?,
        "mobility" => {
            cfg.mobility = match v.split_once(':') {
                None if v == "none" => Mobility::None,
                Some(("waypoint", speed)) => Mobility::RandomWaypoint {
                    speed_mps: num(speed.trim())?,
                },
                _ => {
                    return Err(SetError::Bad(format!(
                        "expected none or waypoint:<speed>, got `{v}`"
                    )))
                }
            }
        }
        "detection_enabled" => cfg.detection_enabled = boolean(v)?,
        "seed" => cfg.seed = num(v)?,
        _ => return Err(SetError::Unknown),
    }
    Ok(())
}

/// One-line reminder of the file format for usage errors.
pub fn schema_hint() -> String {
    format!(
        "scenario files hold `key = value` lines; keys: preset, {}. presets: {}",
        KEYS.join(", "),
        PRESET_NAMES.join(", ")
    )
}
