//! Scenario configuration.
//!
//! The file format is TOML: scalar keys at the top level, a `[frame]` table,
//! an opaque `[phy]` table and one `[[user]]` table per subscriber station.
//! Every key is optional; an empty file yields the five-user reference
//! scenario. See the README for the full grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use toml::Spanned;

use crate::controller::{DEFAULT_DECREASE_FACTOR, DEFAULT_INCREASE_FRACTION};
use crate::error::{Error, Result};
use crate::kernel::SimTime;
use crate::mac::{FrameConfig, UNLIMITED_CAPACITY};
use crate::metrics::JitterMode;
use crate::traffic::UserProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheduler {
    /// Fixed rates for the whole run.
    Baseline,
    /// Loss-driven rate adaptation.
    Qoe,
}

impl Scheduler {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheduler::Baseline => "baseline",
            Scheduler::Qoe => "qoe",
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Scheduler::Baseline),
            "qoe" => Ok(Scheduler::Qoe),
            other => Err(format!(
                "unknown scheduler {other:?} (expected baseline or qoe)"
            )),
        }
    }
}

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.10, 0.20, 0.30, 0.40, 0.50];

/// The five reference users: 200-byte packets every 1.5 ms or 1 ms, with
/// minimum rates of 120 or 150 kB/s.
pub fn reference_users(threshold: f64) -> Vec<UserProfile> {
    let rows = [
        (1, 133_333.0, 120_000.0),
        (2, 200_000.0, 150_000.0),
        (3, 200_000.0, 150_000.0),
        (4, 200_000.0, 150_000.0),
        (5, 133_333.0, 120_000.0),
    ];
    rows.iter()
        .map(
            |&(user_id, initial_rate, min_subjective_rate)| UserProfile {
                user_id,
                packet_size: 200,
                initial_rate,
                min_subjective_rate,
                loss_threshold: threshold,
            },
        )
        .collect()
}

/// Radio parameters carried through as labels only; nothing in the model
/// reads them.
pub fn reference_phy() -> BTreeMap<String, String> {
    [
        ("network_interface", "Phy/WirelessPhy/OFDM"),
        ("propagation", "Propagation/OFDM"),
        ("mac", "Mac/802.16/BS"),
        ("antenna", "Antenna/OmniAntenna"),
        ("service_class", "UGS"),
        ("bandwidth_hz", "5e6"),
        ("rx_power_threshold_w", "2.025e-12"),
        ("cs_power_threshold", "0.9 * rx_power_threshold_w"),
        ("channel_hz", "3.486e9"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sim_time: SimTime,
    pub users: Vec<UserProfile>,
    pub frame: FrameConfig,
    pub scheduler: Scheduler,
    /// Threshold used by single runs for users without their own.
    pub threshold: f64,
    /// Thresholds visited by a sweep.
    pub thresholds: Vec<f64>,
    pub epoch: SimTime,
    pub decrease_factor: f64,
    /// Additive step as a fraction of each user's minimum rate.
    pub increase_step: f64,
    pub jitter: JitterMode,
    /// Reserved; runs are deterministic.
    pub seed: u64,
    pub phy: BTreeMap<String, String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sim_time: SimTime::from_secs(200),
            users: reference_users(DEFAULT_THRESHOLDS[0]),
            frame: FrameConfig::default(),
            scheduler: Scheduler::Qoe,
            threshold: DEFAULT_THRESHOLDS[0],
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            epoch: SimTime::from_secs(1),
            decrease_factor: DEFAULT_DECREASE_FACTOR,
            increase_step: DEFAULT_INCREASE_FRACTION,
            jitter: JitterMode::MeanAbsolute,
            seed: 0,
            phy: reference_phy(),
        }
    }
}

impl ScenarioConfig {
    /// Applies `threshold` to every user.
    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
        for u in &mut self.users {
            u.loss_threshold = threshold;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::config(None, "at least one user is required"));
        }
        if self.sim_time == SimTime::ZERO {
            return Err(Error::config(None, "sim_time must be positive"));
        }
        if self.epoch == SimTime::ZERO {
            return Err(Error::config(None, "epoch must be positive"));
        }
        check_threshold(self.threshold, None)?;
        for &t in &self.thresholds {
            check_threshold(t, None)?;
        }
        if !(self.decrease_factor > 0.0 && self.decrease_factor < 1.0) {
            return Err(Error::config(None, "decrease_factor must lie in (0, 1)"));
        }
        if !(self.increase_step.is_finite() && self.increase_step >= 0.0) {
            return Err(Error::config(None, "increase_step must be non-negative"));
        }
        self.frame.validate()?;
        for (i, u) in self.users.iter().enumerate() {
            u.validate()?;
            if self.users[..i].iter().any(|v| v.user_id == u.user_id) {
                return Err(Error::config(
                    None,
                    format!("duplicate user id {}", u.user_id),
                ));
            }
        }
        Ok(())
    }
}

fn check_threshold(t: f64, line: Option<usize>) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(
            line,
            format!("threshold out of range: {t} (expected (0, 1])"),
        ))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    fn value(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Capacity {
    Bytes(i64),
    Named(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    sim_time: Option<Spanned<Number>>,
    scheduler: Option<Spanned<String>>,
    threshold: Option<Spanned<Number>>,
    thresholds: Option<Spanned<Vec<Number>>>,
    epoch: Option<Spanned<Number>>,
    decrease_factor: Option<Spanned<Number>>,
    increase_step: Option<Spanned<Number>>,
    jitter: Option<Spanned<String>>,
    seed: Option<u64>,
    frame: Option<RawFrame>,
    phy: Option<BTreeMap<String, toml::Value>>,
    #[serde(default)]
    user: Vec<Spanned<RawUser>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    duration_us: Option<Spanned<i64>>,
    uplink_capacity: Option<Spanned<Capacity>>,
    queue_limit: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    id: Spanned<i64>,
    packet_size: Option<Spanned<i64>>,
    initial_rate: Spanned<Number>,
    min_rate: Spanned<Number>,
    loss_threshold: Option<Spanned<Number>>,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn of<T>(&self, s: &Spanned<T>) -> Option<usize> {
        self.at(s.span().start)
    }

    fn at(&self, offset: usize) -> Option<usize> {
        let offset = offset.min(self.0.len());
        Some(self.0[..offset].bytes().filter(|&b| b == b'\n').count() + 1)
    }
}

fn seconds(s: &Spanned<Number>, what: &str, lines: &Lines) -> Result<SimTime> {
    let v = s.get_ref().value();
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(
            lines.of(s),
            format!("{what} must be positive, got {v}"),
        ));
    }
    Ok(SimTime::from_secs_f64(v))
}

fn positive_int(s: &Spanned<i64>, what: &str, lines: &Lines) -> Result<u64> {
    match *s.get_ref() {
        v if v > 0 => Ok(v as u64),
        v => Err(Error::config(
            lines.of(s),
            format!("{what} must be positive, got {v}"),
        )),
    }
}

fn positive_rate(s: &Spanned<Number>, what: &str, lines: &Lines) -> Result<f64> {
    let v = s.get_ref().value();
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(
            lines.of(s),
            format!("invalid rate: {what} = {v}"),
        ));
    }
    Ok(v)
}

/// Parses configuration text, filling unspecified keys with defaults.
pub fn parse_config(src: &str) -> Result<ScenarioConfig> {
    let lines = Lines(src);
    let raw: RawConfig = toml::from_str(src).map_err(|e| {
        let line = e.span().and_then(|s| lines.at(s.start));
        Error::config(line, e.message().trim().to_string())
    })?;

    let mut cfg = ScenarioConfig::default();

    if let Some(v) = &raw.sim_time {
        cfg.sim_time = seconds(v, "sim_time", &lines)?;
    }
    if let Some(v) = &raw.scheduler {
        cfg.scheduler = v
            .get_ref()
            .parse()
            .map_err(|m| Error::config(lines.of(v), m))?;
    }
    if let Some(v) = &raw.threshold {
        let t = v.get_ref().value();
        check_threshold(t, lines.of(v))?;
        cfg.threshold = t;
    }
    if let Some(v) = &raw.thresholds {
        let list: Vec<f64> = v.get_ref().iter().map(|n| n.value()).collect();
        if list.is_empty() {
            return Err(Error::config(lines.of(v), "thresholds must not be empty"));
        }
        for &t in &list {
            check_threshold(t, lines.of(v))?;
        }
        cfg.thresholds = list;
    }
    if let Some(v) = &raw.epoch {
        cfg.epoch = seconds(v, "epoch", &lines)?;
    }
    if let Some(v) = &raw.decrease_factor {
        let f = v.get_ref().value();
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config(
                lines.of(v),
                format!("decrease_factor must lie in (0, 1), got {f}"),
            ));
        }
        cfg.decrease_factor = f;
    }
    if let Some(v) = &raw.increase_step {
        let f = v.get_ref().value();
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::config(
                lines.of(v),
                format!("increase_step must be non-negative, got {f}"),
            ));
        }
        cfg.increase_step = f;
    }
    if let Some(v) = &raw.jitter {
        cfg.jitter = match v.get_ref().as_str() {
            "mean_abs" => JitterMode::MeanAbsolute,
            "rfc3550" => JitterMode::Rfc3550,
            other => {
                return Err(Error::config(
                    lines.of(v),
                    format!("unknown jitter mode {other:?} (expected mean_abs or rfc3550)"),
                ))
            }
        };
    }
    if let Some(seed) = raw.seed {
        cfg.seed = seed;
    }
    if let Some(frame) = &raw.frame {
        if let Some(v) = &frame.duration_us {
            cfg.frame.frame_duration = SimTime(positive_int(v, "frame duration_us", &lines)?);
        }
        if let Some(v) = &frame.uplink_capacity {
            cfg.frame.uplink_capacity = match v.get_ref() {
                Capacity::Bytes(b) if *b >= 0 => *b as u64,
                Capacity::Named(s) if s == "unlimited" => UNLIMITED_CAPACITY,
                other => {
                    return Err(Error::config(
                        lines.of(v),
                        format!(
                        "uplink_capacity must be a byte count >= 0 or \"unlimited\", got {other:?}"
                    ),
                    ))
                }
            };
        }
        if let Some(v) = &frame.queue_limit {
            cfg.frame.per_flow_queue_limit = positive_int(v, "queue_limit", &lines)? as usize;
        }
    }
    if let Some(phy) = raw.phy {
        for (k, v) in phy {
            let text = match v {
                toml::Value::String(s) => s,
                other => other.to_string(),
            };
            cfg.phy.insert(k, text);
        }
    }

    if !raw.user.is_empty() {
        let mut users = Vec::with_capacity(raw.user.len());
        for u in &raw.user {
            let line = lines.of(u);
            let r = u.get_ref();
            let id = *r.id.get_ref();
            let user_id = u32::try_from(id).map_err(|_| {
                Error::config(lines.of(&r.id), format!("user id out of range: {id}"))
            })?;
            if users.iter().any(|p: &UserProfile| p.user_id == user_id) {
                return Err(Error::config(
                    lines.of(&r.id),
                    format!("duplicate user id {user_id}"),
                ));
            }
            let packet_size = match &r.packet_size {
                Some(v) => u32::try_from(positive_int(v, "packet_size", &lines)?)
                    .map_err(|_| Error::config(lines.of(v), "packet_size too large"))?,
                None => 200,
            };
            let loss_threshold = match &r.loss_threshold {
                Some(v) => {
                    let t = v.get_ref().value();
                    check_threshold(t, lines.of(v))?;
                    t
                }
                None => cfg.threshold,
            };
            let profile = UserProfile {
                user_id,
                packet_size,
                initial_rate: positive_rate(&r.initial_rate, "initial_rate", &lines)?,
                min_subjective_rate: positive_rate(&r.min_rate, "min_rate", &lines)?,
                loss_threshold,
            };
            profile
                .validate()
                .map_err(|e| Error::config(line, e.to_string()))?;
            users.push(profile);
        }
        cfg.users = users;
    } else {
        let t = cfg.threshold;
        cfg.set_threshold(t);
    }

    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: Some(path.to_path_buf()),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse_config(&src).map_err(|e| match e {
        Error::Config { line, message, .. } => Error::Config {
            path: Some(path.to_path_buf()),
            line,
            message,
        },
        other => other,
    })
}
