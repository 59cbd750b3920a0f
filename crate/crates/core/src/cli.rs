//! Scenario configuration and subcommand dispatch for the `urc` binary.
//!
//! A scenario file is TOML (or JSON when the document starts with `{`)
//! holding `version`, an optional `seed`, an optional `[output]` table and
//! exactly one body table named after the subcommand. SNRs are given in dB
//! (`gamma_db`, `mean_snr_db`, `inr_db`) and converted here.

use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::budget::{self, BudgetRequest};
use crate::channel::{self, ChannelModel, FadingKind, Interferer};
use crate::contention::{
    self, AccessProtocol, CurveReport, RateGuarantee, UrclScenario, UrcsScenario,
};
use crate::error::{Error, Result};
use crate::fbl::{self, ChannelUseMode, FblQuery};
use crate::link::{self, FrameConfig, HeaderSplit};
use crate::report::{Cell, SimReport, Table, TOOLKIT_VERSION, TOOL_NAME};
use crate::rng::RNG_ALGORITHM;
use crate::rsc::{self, RscPolicy};
use crate::db_to_linear;

pub const CONFIG_VERSION: &str = "1";

/// Worked example with a published blocklength: 80 bits at ε = 1e-3 and
/// 0 dB over complex channel uses, quoted as 128 channel uses.
const REFERENCE_K_BITS: f64 = 80.0;
const REFERENCE_EPSILON: f64 = 1e-3;
const REFERENCE_GAMMA_DB: f64 = 0.0;
const REFERENCE_N_MIN: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fbl,
    Goodput,
    Compare,
    Budget,
    Rsc,
    Urcl,
    Urcs,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Fbl,
        Command::Goodput,
        Command::Compare,
        Command::Budget,
        Command::Rsc,
        Command::Urcl,
        Command::Urcs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Fbl => "fbl",
            Command::Goodput => "goodput",
            Command::Compare => "compare",
            Command::Budget => "budget",
            Command::Rsc => "rsc",
            Command::Urcl => "urcl",
            Command::Urcs => "urcs",
        }
    }

    /// Library module that owns the computation, used to prefix diagnostics.
    pub fn module(self) -> &'static str {
        match self {
            Command::Fbl => "fbl",
            Command::Goodput | Command::Compare => "link",
            Command::Budget => "budget",
            Command::Rsc => "rsc",
            Command::Urcl | Command::Urcs => "contention",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

// ---------------------------------------------------------------------------
// Bodies
// ---------------------------------------------------------------------------

/// Any two or more of `n`, `k_bits`, `epsilon`, `gamma_db`; every query the
/// given fields determine is answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FblBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<f64>,
    #[serde(default)]
    pub mode: ChannelUseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodputBody {
    pub header_bits: f64,
    pub data_bits: f64,
    pub header_cu: u64,
    pub data_cu: u64,
    #[serde(default = "default_symbol_duration")]
    pub symbol_duration_s: f64,
    /// SNR used to compute the error probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<f64>,
    /// Explicit error probabilities; override `gamma_db` for separate encoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_header_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_data_err: Option<f64>,
    #[serde(default)]
    pub mode: ChannelUseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub gamma_db: Vec<f64>,
    pub total_cu: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBody {
    pub header_bits: f64,
    pub data_bits: f64,
    #[serde(default = "default_symbol_duration")]
    pub symbol_duration_s: f64,
    #[serde(default)]
    pub mode: ChannelUseMode,
    /// Single comparison point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_cu: Option<u64>,
    #[serde(default)]
    pub split: HeaderSplit,
    /// Grid of joint vs. best-separate comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetBody {
    pub latency_s: f64,
    /// Known channel-use count; otherwise derived from the payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_uses: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_streams: Option<u32>,
    #[serde(default)]
    pub mode: ChannelUseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererSpec {
    pub activity_prob: f64,
    pub inr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: FadingKind,
    pub mean_snr_db: f64,
    #[serde(default)]
    pub shadow_sigma_db: f64,
    #[serde(default = "default_block_length")]
    pub block_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferer: Option<InterfererSpec>,
}

impl ChannelSpec {
    pub fn to_model(&self) -> ChannelModel {
        ChannelModel {
            kind: self.kind,
            mean_snr: db_to_linear(self.mean_snr_db),
            shadow_sigma_db: self.shadow_sigma_db,
            block_length: self.block_length,
            interferer: self.interferer.map(|i| Interferer {
                activity_prob: i.activity_prob,
                inr: db_to_linear(i.inr_db),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RscBody {
    #[serde(default = "RscPolicy::three_tier_default")]
    pub policy: RscPolicy,
    pub channel: ChannelSpec,
    pub trace_length: usize,
    #[serde(default = "default_rsc_sample_period")]
    pub sample_period_s: f64,
    pub system_bandwidth_hz: f64,
    #[serde(default)]
    pub mode: ChannelUseMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability_window: Option<usize>,
    /// Where to write the per-sample selection time series (CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeseries_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrclBody {
    pub users: Vec<u32>,
    pub total_bandwidth_hz: f64,
    pub channel: ChannelSpec,
    #[serde(default = "default_dedicated_cap")]
    pub dedicated_user_cap: u32,
    #[serde(default = "default_guarantees")]
    pub guarantees: Vec<RateGuarantee>,
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default = "default_urcl_sample_period")]
    pub sample_period_s: f64,
    #[serde(default = "default_windows")]
    pub windows: usize,
    #[serde(default = "default_tracked_users")]
    pub tracked_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrcsBody {
    pub users: Vec<u32>,
    pub payload_bits: f64,
    /// Basic-mode payload; adds a second curve under shared randomness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basic_payload_bits: Option<f64>,
    #[serde(default = "default_metadata_bits")]
    pub metadata_bits: f64,
    pub epsilon: f64,
    pub gamma_db: f64,
    #[serde(default)]
    pub mode: ChannelUseMode,
    #[serde(default = "default_symbol_duration")]
    pub channel_use_s: f64,
    pub protocol: AccessProtocol,
    #[serde(default = "default_latency_cap")]
    pub latency_cap_s: f64,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default = "default_trials")]
    pub trials: u32,
}

fn default_symbol_duration() -> f64 {
    1e-6
}
fn default_block_length() -> usize {
    1
}
fn default_rsc_sample_period() -> f64 {
    1e-3
}
fn default_dedicated_cap() -> u32 {
    50
}
fn default_guarantees() -> Vec<RateGuarantee> {
    vec![
        RateGuarantee { rate_bps: 500e6, availability: 0.95 },
        RateGuarantee { rate_bps: 50e6, availability: 0.99 },
    ]
}
fn default_window() -> f64 {
    0.1
}
fn default_urcl_sample_period() -> f64 {
    1e-3
}
fn default_windows() -> usize {
    200
}
fn default_tracked_users() -> usize {
    8
}
fn default_metadata_bits() -> f64 {
    80.0
}
fn default_latency_cap() -> f64 {
    0.01
}
fn default_percentile() -> f64 {
    0.999
}
fn default_trials() -> u32 {
    2000
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Fbl(FblBody),
    Goodput(GoodputBody),
    Compare(CompareBody),
    Budget(BudgetBody),
    Rsc(RscBody),
    Urcl(UrclBody),
    Urcs(UrcsBody),
}

impl Body {
    pub fn command(&self) -> Command {
        match self {
            Body::Fbl(_) => Command::Fbl,
            Body::Goodput(_) => Command::Goodput,
            Body::Compare(_) => Command::Compare,
            Body::Budget(_) => Command::Budget,
            Body::Rsc(_) => Command::Rsc,
            Body::Urcl(_) => Command::Urcl,
            Body::Urcs(_) => Command::Urcs,
        }
    }

    fn to_value(&self) -> Value {
        let v = match self {
            Body::Fbl(b) => serde_json::to_value(b),
            Body::Goodput(b) => serde_json::to_value(b),
            Body::Compare(b) => serde_json::to_value(b),
            Body::Budget(b) => serde_json::to_value(b),
            Body::Rsc(b) => serde_json::to_value(b),
            Body::Urcl(b) => serde_json::to_value(b),
            Body::Urcs(b) => serde_json::to_value(b),
        };
        v.expect("config bodies serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub version: String,
    pub seed: u64,
    pub output: OutputSpec,
    pub body: Body,
}

impl ScenarioConfig {
    /// The configuration with all defaults filled in; parsing it back
    /// yields the same configuration.
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("version".into(), json!(self.version));
        map.insert("seed".into(), json!(self.seed));
        map.insert(
            "output".into(),
            serde_json::to_value(&self.output).expect("output spec serializes"),
        );
        map.insert(self.body.command().name().into(), self.body.to_value());
        Value::Object(map)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputSpec,
    fbl: Option<Value>,
    goodput: Option<Value>,
    compare: Option<Value>,
    budget: Option<Value>,
    rsc: Option<Value>,
    urcl: Option<Value>,
    urcs: Option<Value>,
}

// ---------------------------------------------------------------------------
// Parsing and validation
// ---------------------------------------------------------------------------

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, true) => "<root>".to_string(),
            (true, false) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::config(path, e.into_inner().to_string())
    })
}

/// Parse and validate a TOML or JSON scenario document.
pub fn parse_config(text: &[u8]) -> Result<ScenarioConfig> {
    let text = std::str::from_utf8(text)
        .map_err(|e| Error::config("<document>", format!("not UTF-8: {e}")))?;
    let value: Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text)
            .map_err(|e| Error::config("<document>", format!("invalid JSON: {e}")))?
    } else {
        toml::from_str(text)
            .map_err(|e| Error::config("<document>", format!("invalid TOML: {}", e.message())))?
    };
    let raw: RawConfig = typed(value, "")?;
    if raw.version != CONFIG_VERSION {
        return Err(Error::config(
            "version",
            format!("unrecognized version {:?}; expected {CONFIG_VERSION:?}", raw.version),
        ));
    }

    let present: Vec<(Command, Value)> = [
        (Command::Fbl, raw.fbl),
        (Command::Goodput, raw.goodput),
        (Command::Compare, raw.compare),
        (Command::Budget, raw.budget),
        (Command::Rsc, raw.rsc),
        (Command::Urcl, raw.urcl),
        (Command::Urcs, raw.urcs),
    ]
    .into_iter()
    .filter_map(|(c, v)| v.map(|v| (c, v)))
    .collect();
    let kinds = Command::ALL.map(Command::name).join(", ");
    let (command, value) = match present.len() {
        1 => present.into_iter().next().expect("one body"),
        0 => {
            return Err(Error::config(
                "<root>",
                format!("exactly one body required (one of {kinds}), found none"),
            ))
        }
        _ => {
            let names: Vec<_> = present.iter().map(|(c, _)| c.name()).collect();
            return Err(Error::config(
                "<root>",
                format!("exactly one body required, found {}", names.join(", ")),
            ));
        }
    };

    let p = command.name();
    let body = match command {
        Command::Fbl => Body::Fbl(typed(value, p)?),
        Command::Goodput => Body::Goodput(typed(value, p)?),
        Command::Compare => Body::Compare(typed(value, p)?),
        Command::Budget => Body::Budget(typed(value, p)?),
        Command::Rsc => Body::Rsc(typed(value, p)?),
        Command::Urcl => Body::Urcl(typed(value, p)?),
        Command::Urcs => Body::Urcs(typed(value, p)?),
    };
    let config = ScenarioConfig {
        version: raw.version,
        seed: raw.seed,
        output: raw.output,
        body,
    };
    validate(&config)?;
    Ok(config)
}

fn key(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}

fn open_unit(prefix: &str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} ∈ (0,1) required, got {v}")))
    }
}

fn closed_unit(prefix: &str, name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} ∈ [0,1] required, got {v}")))
    }
}

fn positive(prefix: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} > 0 required, got {v}")))
    }
}

fn non_negative(prefix: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} ≥ 0 required, got {v}")))
    }
}

fn finite(prefix: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} must be finite, got {v}")))
    }
}

fn at_least_one(prefix: &str, name: &str, v: u64) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::config(key(prefix, name), format!("{name} ≥ 1 required, got {v}")))
    }
}

fn users(prefix: &str, ks: &[u32]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::config(key(prefix, "users"), "at least one user count required"));
    }
    if ks[0] == 0 {
        return Err(Error::config(key(prefix, "users"), "user counts must be ≥ 1"));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(key(prefix, "users"), "user counts must be strictly increasing"));
    }
    Ok(())
}

/// Map a module-level validation failure to a config error at `path`.
fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        Error::Domain(m) | Error::InvalidArgument(m) | Error::Infeasible(m) => Error::config(path, m),
        other => Error::config(path, other.to_string()),
    }
}

fn validate_channel(prefix: &str, c: &ChannelSpec) -> Result<()> {
    finite(prefix, "mean_snr_db", c.mean_snr_db)?;
    if let Some(i) = &c.interferer {
        let p = key(prefix, "interferer");
        closed_unit(&p, "activity_prob", i.activity_prob)?;
        finite(&p, "inr_db", i.inr_db)?;
    }
    c.to_model().validate().map_err(at(prefix))
}

fn validate(config: &ScenarioConfig) -> Result<()> {
    let p = config.body.command().name();
    match &config.body {
        Body::Fbl(b) => {
            if let Some(n) = b.n {
                at_least_one(p, "n", n)?;
            }
            if let Some(k) = b.k_bits {
                positive(p, "k_bits", k)?;
            }
            if let Some(e) = b.epsilon {
                open_unit(p, "epsilon", e)?;
            }
            if let Some(g) = b.gamma_db {
                finite(p, "gamma_db", g)?;
            }
            let given = [b.n.is_some(), b.k_bits.is_some(), b.epsilon.is_some(), b.gamma_db.is_some()]
                .iter()
                .filter(|x| **x)
                .count();
            if given < 3 {
                return Err(Error::config(
                    p,
                    "at least three of n, k_bits, epsilon, gamma_db are required",
                ));
            }
        }
        Body::Goodput(b) => {
            non_negative(p, "header_bits", b.header_bits)?;
            non_negative(p, "data_bits", b.data_bits)?;
            positive(p, "symbol_duration_s", b.symbol_duration_s)?;
            if let Some(g) = b.gamma_db {
                finite(p, "gamma_db", g)?;
            }
            if let Some(x) = b.p_header_err {
                closed_unit(p, "p_header_err", x)?;
            }
            if let Some(x) = b.p_data_err {
                closed_unit(p, "p_data_err", x)?;
            }
            let explicit = b.p_header_err.is_some() && b.p_data_err.is_some();
            if b.p_header_err.is_some() != b.p_data_err.is_some() {
                return Err(Error::config(p, "p_header_err and p_data_err must be given together"));
            }
            if !explicit && b.gamma_db.is_none() {
                return Err(Error::config(
                    key(p, "gamma_db"),
                    "gamma_db required unless p_header_err and p_data_err are given",
                ));
            }
            FrameConfig::new(b.header_bits, b.data_bits, b.header_cu, b.data_cu, b.symbol_duration_s)
                .map_err(at(p))?;
        }
        Body::Compare(b) => {
            positive(p, "header_bits", b.header_bits)?;
            non_negative(p, "data_bits", b.data_bits)?;
            positive(p, "symbol_duration_s", b.symbol_duration_s)?;
            match (b.gamma_db, b.total_cu) {
                (Some(g), Some(t)) => {
                    finite(p, "gamma_db", g)?;
                    if t < 2 {
                        return Err(Error::config(key(p, "total_cu"), "total_cu ≥ 2 required"));
                    }
                }
                (None, None) => {
                    if b.sweep.is_none() {
                        return Err(Error::config(
                            p,
                            "either gamma_db and total_cu or a sweep table is required",
                        ));
                    }
                }
                _ => {
                    return Err(Error::config(p, "gamma_db and total_cu must be given together"));
                }
            }
            if let HeaderSplit::Adaptive { data_epsilon } = b.split {
                open_unit(&key(p, "split.adaptive"), "data_epsilon", data_epsilon)?;
            }
            if let Some(s) = &b.sweep {
                let sp = key(p, "sweep");
                if s.gamma_db.is_empty() || s.total_cu.is_empty() {
                    return Err(Error::config(sp, "sweep axes must be nonempty"));
                }
                for g in &s.gamma_db {
                    finite(&sp, "gamma_db", *g)?;
                }
                if s.total_cu.iter().any(|&t| t < 2) {
                    return Err(Error::config(key(&sp, "total_cu"), "total_cu ≥ 2 required"));
                }
            }
        }
        Body::Budget(b) => {
            positive(p, "latency_s", b.latency_s)?;
            if let Some(w) = b.max_bandwidth_hz {
                positive(p, "max_bandwidth_hz", w)?;
            }
            if let Some(s) = b.max_streams {
                at_least_one(p, "max_streams", s as u64)?;
            }
            match b.channel_uses {
                Some(n) => {
                    at_least_one(p, "channel_uses", n)?;
                    if b.payload_bits.is_some() {
                        return Err(Error::config(
                            p,
                            "give either channel_uses or payload_bits, not both",
                        ));
                    }
                }
                None => {
                    let need = |name: &str, v: Option<f64>| {
                        v.ok_or_else(|| {
                            Error::config(
                                key(p, name),
                                format!("{name} required when channel_uses is absent"),
                            )
                        })
                    };
                    positive(p, "payload_bits", need("payload_bits", b.payload_bits)?)?;
                    open_unit(p, "epsilon", need("epsilon", b.epsilon)?)?;
                    finite(p, "gamma_db", need("gamma_db", b.gamma_db)?)?;
                }
            }
        }
        Body::Rsc(b) => {
            b.policy.validate().map_err(at(&key(p, "policy")))?;
            validate_channel(&key(p, "channel"), &b.channel)?;
            at_least_one(p, "trace_length", b.trace_length as u64)?;
            positive(p, "sample_period_s", b.sample_period_s)?;
            positive(p, "system_bandwidth_hz", b.system_bandwidth_hz)?;
            if let Some(w) = b.availability_window {
                at_least_one(p, "availability_window", w as u64)?;
            }
        }
        Body::Urcl(b) => {
            users(p, &b.users)?;
            urcl_scenario(b, config.seed).validate().map_err(at(p))?;
            for (i, g) in b.guarantees.iter().enumerate() {
                let gp = format!("{p}.guarantees[{i}]");
                open_unit(&gp, "availability", g.availability)?;
                non_negative(&gp, "rate_bps", g.rate_bps)?;
            }
        }
        Body::Urcs(b) => {
            users(p, &b.users)?;
            positive(p, "payload_bits", b.payload_bits)?;
            if let Some(d) = b.basic_payload_bits {
                positive(p, "basic_payload_bits", d)?;
                if d > b.payload_bits {
                    return Err(Error::config(
                        key(p, "basic_payload_bits"),
                        "basic_payload_bits must not exceed payload_bits",
                    ));
                }
            }
            open_unit(p, "epsilon", b.epsilon)?;
            finite(p, "gamma_db", b.gamma_db)?;
            open_unit(p, "percentile", b.percentile)?;
            at_least_one(p, "trials", b.trials as u64)?;
            urcs_scenario(b, config.seed).validate().map_err(at(p))?;
        }
    }
    Ok(())
}

fn urcl_scenario(b: &UrclBody, seed: u64) -> UrclScenario {
    UrclScenario {
        total_bandwidth: b.total_bandwidth_hz,
        channel: b.channel.to_model(),
        dedicated_user_cap: b.dedicated_user_cap,
        guarantees: b.guarantees.clone(),
        window_s: b.window_s,
        sample_period_s: b.sample_period_s,
        windows: b.windows,
        tracked_users: b.tracked_users,
        seed,
    }
}

fn urcs_scenario(b: &UrcsBody, seed: u64) -> UrcsScenario {
    UrcsScenario {
        payload_bits: b.payload_bits,
        metadata_bits: b.metadata_bits,
        epsilon: b.epsilon,
        gamma: db_to_linear(b.gamma_db),
        mode: b.mode,
        channel_use_s: b.channel_use_s,
        protocol: b.protocol,
        latency_cap_s: b.latency_cap_s,
        percentile: b.percentile,
        trials: b.trials,
        seed,
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run `command` on `config` using `threads` worker threads.
pub fn run(command: Command, config: &ScenarioConfig, threads: usize) -> Result<SimReport> {
    if config.body.command() != command {
        return Err(Error::config(
            "<root>",
            format!(
                "config holds a `{}` body but the subcommand is `{}`",
                config.body.command().name(),
                command.name()
            ),
        ));
    }
    if threads == 0 {
        return Err(Error::InvalidArgument("--threads must be ≥ 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;

    let start = Instant::now();
    let out = pool.install(|| dispatch(config))?;
    Ok(SimReport {
        tool: TOOL_NAME.into(),
        toolkit_version: TOOLKIT_VERSION.into(),
        command: command.name().into(),
        rng: RNG_ALGORITHM.into(),
        seed: config.seed,
        inputs: config.to_value(),
        results: out.results,
        elapsed_s: start.elapsed().as_secs_f64(),
        table: out.table,
        extra_files: out.extra_files,
    })
}

struct Output {
    results: Value,
    table: Option<Table>,
    extra_files: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn new(results: Value, table: Table) -> Self {
        Output { results, table: Some(table), extra_files: Vec::new() }
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn dispatch(config: &ScenarioConfig) -> Result<Output> {
    match &config.body {
        Body::Fbl(b) => run_fbl(b),
        Body::Goodput(b) => run_goodput(b),
        Body::Compare(b) => run_compare(b),
        Body::Budget(b) => run_budget(b),
        Body::Rsc(b) => run_rsc(b, config.seed),
        Body::Urcl(b) => run_urcl(b, config.seed),
        Body::Urcs(b) => run_urcs(b, config.seed),
    }
}

/// Comparison against the published worked example, when the query is it.
pub fn published_reference(k_bits: f64, epsilon: f64, gamma_db: f64, mode: ChannelUseMode, n_min: u64) -> Option<Value> {
    let matches = k_bits == REFERENCE_K_BITS
        && epsilon == REFERENCE_EPSILON
        && gamma_db == REFERENCE_GAMMA_DB
        && mode == ChannelUseMode::Complex;
    if !matches {
        return None;
    }
    let gap = n_min as i64 - REFERENCE_N_MIN as i64;
    let relative = gap as f64 / REFERENCE_N_MIN as f64;
    Some(json!({
        "quoted_n_min": REFERENCE_N_MIN,
        "computed_n_min": n_min,
        "gap_cu": gap,
        "relative_gap": relative,
        "within_15_percent": relative.abs() <= 0.15,
        "note": "published worked example quotes 128 channel uses; computed_n_min is the smallest n whose normal-approximation rate reaches 80 bits",
    }))
}

fn run_fbl(b: &FblBody) -> Result<Output> {
    let mut results = Map::new();
    results.insert("mode".into(), to_json(&b.mode));
    let gamma = b.gamma_db.map(db_to_linear);
    let mut max_bits = None;
    let mut n_min = None;
    let mut err = None;
    let mut snr = None;
    let mut reference = None;

    if let Some(g) = gamma {
        results.insert("gamma_linear".into(), json!(g));
        results.insert("capacity_per_cu".into(), json!(fbl::capacity_per_cu(g, b.mode)?));
        results.insert("dispersion".into(), json!(fbl::dispersion(g, b.mode)?));
    }
    if let (Some(n), Some(eps), Some(g)) = (b.n, b.epsilon, gamma) {
        let r = fbl::max_info_bits(&FblQuery::new(n, eps, g, b.mode)?)?;
        max_bits = Some(r.k_bits);
        results.insert("max_info_bits".into(), json!(r.k_bits));
    }
    if let (Some(k), Some(eps), Some(g)) = (b.k_bits, b.epsilon, gamma) {
        let n = fbl::min_blocklength(k, eps, g, b.mode)?;
        let bits_at = |n: u64| -> Result<f64> {
            Ok(fbl::max_info_bits(&FblQuery::new(n, eps, g, b.mode)?)?.k_bits)
        };
        let mut entry = Map::new();
        entry.insert("n_min".into(), json!(n));
        entry.insert("bits_at_n_min".into(), json!(bits_at(n)?));
        if n > 1 {
            entry.insert("bits_at_n_min_minus_1".into(), json!(bits_at(n - 1)?));
        }
        reference = published_reference(k, eps, b.gamma_db.unwrap_or(f64::NAN), b.mode, n);
        if let Some(r) = &reference {
            entry.insert("published_reference".into(), r.clone());
        }
        n_min = Some(n);
        results.insert("min_blocklength".into(), Value::Object(entry));
    }
    if let (Some(n), Some(k), Some(g)) = (b.n, b.k_bits, gamma) {
        let e = fbl::achieved_error(n, k, g, b.mode)?;
        err = Some(e);
        results.insert("achieved_error".into(), json!(e));
    }
    if let (Some(n), Some(k), Some(eps)) = (b.n, b.k_bits, b.epsilon) {
        let s = fbl::min_snr(n, k, eps, b.mode)?;
        snr = Some(s);
        results.insert(
            "min_snr".into(),
            json!({ "linear": s, "db": crate::linear_to_db(s) }),
        );
    }

    let mut table = Table::new(&[
        "n",
        "k_bits",
        "epsilon",
        "gamma_db",
        "mode",
        "max_info_bits",
        "n_min",
        "achieved_error",
        "min_snr_db",
        "reference_n_min",
        "reference_gap_cu",
    ]);
    let mode_name = match b.mode {
        ChannelUseMode::Real => "real",
        ChannelUseMode::Complex => "complex",
    };
    table.push(vec![
        b.n.map_or(Cell::Empty, Cell::from),
        b.k_bits.into(),
        b.epsilon.into(),
        b.gamma_db.into(),
        mode_name.into(),
        max_bits.into(),
        n_min.map_or(Cell::Empty, Cell::from),
        err.into(),
        snr.map(crate::linear_to_db).into(),
        reference.as_ref().map_or(Cell::Empty, |_| REFERENCE_N_MIN.into()),
        reference
            .as_ref()
            .and_then(|r| r["gap_cu"].as_i64())
            .map_or(Cell::Empty, Cell::Int),
    ]);
    Ok(Output::new(Value::Object(results), table))
}

fn run_goodput(b: &GoodputBody) -> Result<Output> {
    let frame = FrameConfig::new(b.header_bits, b.data_bits, b.header_cu, b.data_cu, b.symbol_duration_s)?;
    let mut outcomes = Vec::new();
    match (b.p_header_err, b.p_data_err) {
        (Some(ph), Some(pd)) => outcomes.push(link::goodput_separate(&frame, ph, pd)?),
        _ => {
            let g = db_to_linear(b.gamma_db.expect("validated"));
            outcomes.push(link::separate_at_snr(&frame, g, b.mode)?);
        }
    }
    if let Some(gdb) = b.gamma_db {
        outcomes.push(link::goodput_joint(&frame, db_to_linear(gdb), b.mode)?);
    }

    let mut table = Table::new(&[
        "encoding",
        "header_cu",
        "data_cu",
        "p_header_err",
        "p_data_err",
        "p_joint_err",
        "success_prob",
        "failure_prob",
        "goodput_bps",
    ]);
    for o in &outcomes {
        table.push(vec![
            to_json(&o.encoding).as_str().unwrap_or_default().into(),
            b.header_cu.into(),
            b.data_cu.into(),
            o.p_header_err.into(),
            o.p_data_err.into(),
            o.p_joint_err.into(),
            o.success_prob.into(),
            o.failure_prob.into(),
            o.goodput.into(),
        ]);
    }
    let results = json!({
        "header_rate": frame.header_rate(),
        "outcomes": outcomes,
    });
    Ok(Output::new(results, table))
}

fn run_compare(b: &CompareBody) -> Result<Output> {
    let mut table = Table::new(&[
        "split",
        "gamma_db",
        "total_cu",
        "header_cu",
        "separate_success",
        "joint_success",
        "separate_failure",
        "joint_failure",
        "joint_wins",
    ]);
    let mut results = Map::new();
    if let (Some(gdb), Some(total)) = (b.gamma_db, b.total_cu) {
        let c = link::compare_encodings(
            b.header_bits,
            b.data_bits,
            total,
            b.symbol_duration_s,
            db_to_linear(gdb),
            b.mode,
            b.split,
        )?;
        table.push(vec![
            "configured".into(),
            gdb.into(),
            total.into(),
            c.header_cu.into(),
            c.separate.success_prob.into(),
            c.joint.success_prob.into(),
            c.separate.failure_prob.into(),
            c.joint.failure_prob.into(),
            c.joint_wins.into(),
        ]);
        results.insert("comparison".into(), to_json(&c));
    }
    if let Some(s) = &b.sweep {
        let points = link::sweep_encodings(
            b.header_bits,
            b.data_bits,
            &s.gamma_db,
            &s.total_cu,
            b.symbol_duration_s,
            b.mode,
        )?;
        let region: Vec<Value> = points
            .iter()
            .filter(|p| p.joint_wins)
            .map(|p| json!({ "gamma_db": p.gamma_db, "total_cu": p.total_cu }))
            .collect();
        for p in &points {
            table.push(vec![
                "best".into(),
                p.gamma_db.into(),
                p.total_cu.into(),
                p.best_header_cu.into(),
                p.separate_success.into(),
                p.joint_success.into(),
                p.separate_failure.into(),
                p.joint_failure.into(),
                p.joint_wins.into(),
            ]);
        }
        results.insert(
            "sweep".into(),
            json!({
                "points": points,
                "joint_wins_count": region.len(),
                "winning_region": region,
            }),
        );
    }
    Ok(Output::new(Value::Object(results), table))
}

fn run_budget(b: &BudgetBody) -> Result<Output> {
    let plan = match b.channel_uses {
        Some(n) => budget::plan_for_channel_uses(n, b.latency_s, b.max_bandwidth_hz, b.max_streams)?,
        None => budget::plan(&BudgetRequest {
            payload_bits: b.payload_bits.expect("validated"),
            epsilon: b.epsilon.expect("validated"),
            gamma: db_to_linear(b.gamma_db.expect("validated")),
            latency: b.latency_s,
            max_bandwidth: b.max_bandwidth_hz,
            max_streams: b.max_streams,
            mode: b.mode,
        })?,
    };
    let mut table = Table::new(&[
        "required_cu",
        "latency_s",
        "required_bandwidth_hz",
        "effective_bandwidth_hz",
        "spatial_streams",
        "feasible",
    ]);
    table.push(vec![
        plan.required_cu.into(),
        b.latency_s.into(),
        plan.required_bandwidth.into(),
        plan.effective_bandwidth.into(),
        plan.spatial_streams.into(),
        plan.feasible.into(),
    ]);
    let results = json!({
        "required_cu": plan.required_cu,
        "required_bandwidth_hz": plan.required_bandwidth,
        "effective_bandwidth_hz": plan.effective_bandwidth,
        "spatial_streams": plan.spatial_streams,
        "feasible": plan.feasible,
        "provisioned_dof": plan.provisioned_dof(b.latency_s),
    });
    Ok(Output::new(results, table))
}

fn run_rsc(b: &RscBody, seed: u64) -> Result<Output> {
    let trace = channel::generate_trace(&b.channel.to_model(), b.trace_length, b.sample_period_s, seed)?;
    let report = rsc::evaluate(&b.policy, &trace, b.system_bandwidth_hz, b.mode, seed, b.availability_window)?;
    let checks = rsc::check_requirements(&report, &b.policy);

    let mut table = Table::new(&[
        "rank",
        "name",
        "channel_uses",
        "threshold_db",
        "time_fraction_selected",
        "availability",
        "availability_target",
        "achieved_delivery_reliability",
        "reliability_target",
        "passed",
    ]);
    for (t, c) in report.tiers.iter().zip(&checks) {
        table.push(vec![
            t.rank.into(),
            t.name.as_str().into(),
            t.channel_uses.map_or(Cell::Empty, Cell::from),
            t.threshold.map(crate::linear_to_db).into(),
            t.time_fraction_selected.into(),
            t.availability.into(),
            c.availability_target.into(),
            t.achieved_delivery_reliability.into(),
            c.reliability_target.into(),
            c.passed.into(),
        ]);
    }
    let mean_snr = trace.samples.iter().sum::<f64>() / trace.len() as f64;
    let results = json!({
        "trace": { "samples": trace.len(), "sample_period_s": trace.sample_period, "mean_sinr": mean_snr },
        "report": report,
        "checks": checks,
    });
    let mut out = Output::new(results, table);
    if let Some(path) = &b.timeseries_path {
        let mut buf = Vec::new();
        report.write_timeline_csv(&mut buf)?;
        out.extra_files.push((path.clone(), buf));
    }
    Ok(out)
}

fn curve_rows(table: &mut Table, label: &str, curve: &CurveReport) {
    for p in &curve.points {
        table.push(vec![
            label.into(),
            p.users.into(),
            p.value.into(),
            p.ci_low.into(),
            p.ci_high.into(),
            p.censored_fraction.into(),
        ]);
    }
}

fn curve_table() -> Table {
    Table::new(&["curve", "users", "value", "ci_low", "ci_high", "censored_fraction"])
}

fn run_urcl(b: &UrclBody, seed: u64) -> Result<Output> {
    let scenario = urcl_scenario(b, seed);
    let report = contention::urcl_rate_curve(&scenario, &b.users)?;
    let checks = contention::urcl_check(&report, &b.guarantees)?;
    let mut table = curve_table();
    curve_rows(&mut table, "mean", &report.mean_rate);
    for pc in &report.percentiles {
        curve_rows(&mut table, &format!("rate_at_{}", pc.availability), &pc.curve);
    }
    let results = json!({
        "report": report,
        "checks": checks,
    });
    Ok(Output::new(results, table))
}

fn run_urcs(b: &UrcsBody, seed: u64) -> Result<Output> {
    let scenario = urcs_scenario(b, seed);
    let mut table = curve_table();
    let results = match b.basic_payload_bits {
        Some(basic) => {
            let pair = contention::rsc_latency_comparison(&scenario, b.payload_bits, basic, &b.users)?;
            curve_rows(&mut table, "full_percentile", &pair.full.percentile);
            curve_rows(&mut table, "full_mean", &pair.full.mean);
            curve_rows(&mut table, "basic_percentile", &pair.basic.percentile);
            curve_rows(&mut table, "basic_mean", &pair.basic.mean);
            let basic_below = pair
                .basic
                .percentile
                .points
                .iter()
                .zip(&pair.full.percentile.points)
                .all(|(bp, fp)| bp.value <= fp.value);
            json!({ "paired": pair, "basic_at_or_below_full": basic_below })
        }
        None => {
            let report = contention::urcs_latency_curve(&scenario, &b.users)?;
            curve_rows(&mut table, "percentile", &report.percentile);
            curve_rows(&mut table, "mean", &report.mean);
            json!({ "report": report })
        }
    };
    Ok(Output::new(results, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        parse_config(text.as_bytes())
    }

    fn config_path(e: Error) -> (String, String) {
        match e {
            Error::Config { path, msg } => (path, msg),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn minimal_fbl() {
        let c = parse(
            "version = \"1\"\n[fbl]\nn = 119\nepsilon = 1e-3\ngamma_db = 0\nmode = \"complex\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.output.format, OutputFormat::Json);
        match c.body {
            Body::Fbl(b) => {
                assert_eq!(b.n, Some(119));
                assert_eq!(b.gamma_db, Some(0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_accepted() {
        let c = parse(r#"{"version":"1","seed":7,"budget":{"channel_uses":128,"latency_s":1e-3}}"#)
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.body.command(), Command::Budget);
    }

    #[test]
    fn epsilon_constraint_named() {
        let e = parse("version = \"1\"\n[fbl]\nn = 119\nepsilon = 1.5\ngamma_db = 0\n").unwrap_err();
        let (path, msg) = config_path(e);
        assert_eq!(path, "fbl.epsilon");
        assert!(msg.contains("epsilon ∈ (0,1)"), "{msg}");
    }

    #[test]
    fn two_bodies_rejected() {
        let e = parse(
            "version = \"1\"\n[fbl]\nn = 1\nepsilon = 0.1\ngamma_db = 0\n[budget]\nchannel_uses = 1\nlatency_s = 1\n",
        )
        .unwrap_err();
        let (path, msg) = config_path(e);
        assert_eq!(path, "<root>");
        assert!(msg.contains("exactly one body"), "{msg}");
    }

    #[test]
    fn unknown_key_has_path() {
        let e = parse("version = \"1\"\n[fbl]\nn = 1\nepsilon = 0.1\ngamma_db = 0\nbogus = 3\n")
            .unwrap_err();
        let (path, msg) = config_path(e);
        assert!(path.starts_with("fbl"), "{path}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn nested_type_error_has_path() {
        let e = parse(
            "version = \"1\"\n[rsc]\ntrace_length = 10\nsystem_bandwidth_hz = 1e6\n[rsc.channel]\nkind = \"rayleigh-block\"\nmean_snr_db = \"high\"\n",
        )
        .unwrap_err();
        let (path, _) = config_path(e);
        assert_eq!(path, "rsc.channel.mean_snr_db");
    }

    #[test]
    fn missing_field_and_version() {
        let (path, msg) = config_path(parse("version = \"1\"\n[budget]\nchannel_uses = 2\n").unwrap_err());
        assert_eq!(path, "budget");
        assert!(msg.contains("latency_s"));
        let (path, _) = config_path(parse("version = \"9\"\n[budget]\n").unwrap_err());
        assert_eq!(path, "version");
        let (path, _) = config_path(parse("[budget]\nlatency_s = 1\n").unwrap_err());
        assert_eq!(path, "<root>");
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(
            "version = \"1\"\nseed = 5\n[urcs]\nusers = [1, 2]\npayload_bits = 128\nepsilon = 1e-3\ngamma_db = 3\nprotocol = { kind = \"slotted-aloha\", p_tx = 0.5 }\n",
        )
        .unwrap();
        let echoed = serde_json::to_vec(&c.to_value()).unwrap();
        assert_eq!(parse_config(&echoed).unwrap(), c);
    }

    #[test]
    fn subcommand_mismatch() {
        let c = parse("version = \"1\"\n[budget]\nchannel_uses = 128\nlatency_s = 1e-3\n").unwrap();
        let (path, _) = config_path(run(Command::Fbl, &c, 1).unwrap_err());
        assert_eq!(path, "<root>");
    }

    #[test]
    fn budget_arithmetic() {
        let c = parse("version = \"1\"\n[budget]\nchannel_uses = 128\nlatency_s = 1e-3\n").unwrap();
        let r = run(Command::Budget, &c, 1).unwrap();
        assert_eq!(r.results["required_bandwidth_hz"].as_f64(), Some(64_000.0));
    }

    #[test]
    fn worked_example_reference() {
        let c = parse("version = \"1\"\n[fbl]\nk_bits = 80\nepsilon = 1e-3\ngamma_db = 0\n").unwrap();
        let r = run(Command::Fbl, &c, 1).unwrap();
        let refn = &r.results["min_blocklength"]["published_reference"];
        assert_eq!(refn["quoted_n_min"], 128);
        assert_eq!(refn["computed_n_min"], 119);
        assert_eq!(refn["gap_cu"], -9);
    }
}
