//! Simulation configuration: a TOML document with sections `topology`,
//! `channel.in_body`, `channel.on_body`, `protocol`, `modem` and `run`.
//!
//! Only `topology.relays` is required. Everything else falls back to the
//! defaults below, which are also what [`SimConfig::default`] returns.
//!
//! | key | default |
//! |-----|---------|
//! | `topology.source_dbm` | -40 |
//! | `topology.relay_dbm` | -3 |
//! | `topology.sr_distance_mm` / `rd_distance_mm` | 120 (scalar or one per relay) |
//! | `topology.sd_distance_mm` | absent (no direct link) |
//! | `channel.in_body` | pl0 47.14 dB @ 50 mm, n 4.26, sigma 7.85 dB |
//! | `channel.on_body` | pl0 35.2 dB @ 100 mm, n 3.11, sigma 6.1 dB |
//! | `protocol.kind` | `protocol1` |
//! | `protocol.beta` | 0.2 |
//! | `protocol.buffer_size` | 10 |
//! | `protocol.quality_mode` | `fading` |
//! | `modem.order` | 4 |
//! | `modem.theta2` | pi/8 |
//! | `modem.noise_dbm` | -117.73 |
//! | `modem.adaptive` | absent |
//! | `run.packets` | 100000 |
//! | `run.symbols_per_packet` | 128 |
//! | `run.seed` | 1 |
//! | `run.trials` | 1 |
//! | `run.control_overhead_slots` | 0 |
//! | `run.min_bit_errors` | 0 (no adaptive extension) |
//! | `run.max_packets` | 10000000 |
//! | `run.power_axis_dbm` | -55, -52, ..., -25 |
//!
//! Angles (`modem.theta2`, the second column of `modem.adaptive`) accept a
//! number in radians or a string such as `"pi/30"`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use serde::{Deserialize, Deserializer, Serialize};
use toml::{Table, Value};

use crate::channel::{ChannelParams, Link, LinkGeometry, LinkKind};
use crate::error::{Error, Result};
use crate::modem::{Constellation, NoiseModel, ThetaPolicy};
use crate::protocol::{ProtocolKind, QualityMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub topology: Topology,
    pub channel: ChannelSection,
    pub protocol: ProtocolSection,
    pub modem: ModemSection,
    pub run: RunSection,
}

/// Scalar applied to every relay, or one value per relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerRelay {
    All(f64),
    Each(Vec<f64>),
}

impl PerRelay {
    pub fn get(&self, relay: usize) -> Option<f64> {
        match self {
            PerRelay::All(v) => Some(*v),
            PerRelay::Each(v) => v.get(relay).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub relays: usize,
    pub source_dbm: f64,
    pub relay_dbm: f64,
    pub sr_distance_mm: PerRelay,
    pub rd_distance_mm: PerRelay,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd_distance_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<LinkKind>,
    pub pl0_db: f64,
    pub d0_mm: f64,
    pub exponent: f64,
    pub sigma_db: f64,
}

impl ChannelEntry {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            pl0_db: self.pl0_db,
            d0_mm: self.d0_mm,
            exponent: self.exponent,
            sigma_db: self.sigma_db,
        }
    }

    fn from_params(kind: LinkKind, p: ChannelParams) -> Self {
        Self {
            kind: Some(kind),
            pl0_db: p.pl0_db,
            d0_mm: p.d0_mm,
            exponent: p.exponent,
            sigma_db: p.sigma_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub in_body: ChannelEntry,
    pub on_body: ChannelEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    pub beta: f64,
    pub buffer_size: usize,
    pub quality_mode: QualityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModemSection {
    pub order: usize,
    #[serde(deserialize_with = "angle")]
    pub theta2: f64,
    pub noise_dbm: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "policy_table"
    )]
    pub adaptive: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub packets: u64,
    pub symbols_per_packet: usize,
    pub seed: u64,
    pub trials: usize,
    pub control_overhead_slots: u64,
    pub min_bit_errors: u64,
    pub max_packets: u64,
    pub power_axis_dbm: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: Topology {
                relays: 1,
                source_dbm: -40.0,
                relay_dbm: -3.0,
                sr_distance_mm: PerRelay::All(120.0),
                rd_distance_mm: PerRelay::All(120.0),
                sd_distance_mm: None,
            },
            channel: ChannelSection {
                in_body: ChannelEntry::from_params(
                    LinkKind::InBodyToOnBody,
                    ChannelParams::in_body_default(),
                ),
                on_body: ChannelEntry::from_params(
                    LinkKind::OnBodyToOnBody,
                    ChannelParams::on_body_default(),
                ),
            },
            protocol: ProtocolSection {
                kind: ProtocolKind::Protocol1,
                beta: 0.2,
                buffer_size: 10,
                quality_mode: QualityMode::Fading,
            },
            modem: ModemSection {
                order: 4,
                theta2: FRAC_PI_8,
                noise_dbm: NoiseModel::DEFAULT_DBM,
                adaptive: None,
            },
            run: RunSection {
                packets: 100_000,
                symbols_per_packet: 128,
                seed: 1,
                trials: 1,
                control_overhead_slots: 0,
                min_bit_errors: 0,
                max_packets: 10_000_000,
                power_axis_dbm: (0..11).map(|i| -55.0 + 3.0 * i as f64).collect(),
            },
        }
    }
}

/// Every key the document may contain, as dotted paths.
pub const KNOWN_KEYS: &[&str] = &[
    "topology.relays",
    "topology.source_dbm",
    "topology.relay_dbm",
    "topology.sr_distance_mm",
    "topology.rd_distance_mm",
    "topology.sd_distance_mm",
    "channel.in_body.kind",
    "channel.in_body.pl0_db",
    "channel.in_body.d0_mm",
    "channel.in_body.exponent",
    "channel.in_body.sigma_db",
    "channel.on_body.kind",
    "channel.on_body.pl0_db",
    "channel.on_body.d0_mm",
    "channel.on_body.exponent",
    "channel.on_body.sigma_db",
    "protocol.kind",
    "protocol.beta",
    "protocol.buffer_size",
    "protocol.quality_mode",
    "modem.order",
    "modem.theta2",
    "modem.noise_dbm",
    "modem.adaptive",
    "run.packets",
    "run.symbols_per_packet",
    "run.seed",
    "run.trials",
    "run.control_overhead_slots",
    "run.min_bit_errors",
    "run.max_packets",
    "run.power_axis_dbm",
];

fn is_known_table(path: &str) -> bool {
    matches!(
        path,
        "topology" | "channel" | "channel.in_body" | "channel.on_body" | "protocol" | "modem" | "run"
    )
}

fn check_keys(table: &Table, prefix: &str) -> Result<()> {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        if is_known_table(&path) {
            match value {
                Value::Table(inner) => check_keys(inner, &path)?,
                _ => return Err(Error::Config(format!("`{path}` must be a table"))),
            }
        } else if !KNOWN_KEYS.contains(&path.as_str()) {
            return Err(Error::UnknownKey(path));
        }
    }
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().expect("non-empty path");
    let mut cur = table;
    for part in parts {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("known tables");
    }
    cur.insert(leaf.to_string(), value);
}

/// Parses a `key=value` override. The value is read as a TOML value and
/// falls back to a bare string.
pub fn parse_override(arg: &str) -> Result<(String, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{arg}` is not key=value")))?;
    let key = key.trim().to_string();
    if !KNOWN_KEYS.contains(&key.as_str()) {
        return Err(Error::UnknownKey(key));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    parse_config_with_overrides(text, &[])
}

pub fn parse_config_with_overrides(text: &str, overrides: &[(String, Value)]) -> Result<SimConfig> {
    let user: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    check_keys(&user, "")?;
    let has_relays = user
        .get("topology")
        .and_then(Value::as_table)
        .is_some_and(|t| t.contains_key("relays"));
    if !has_relays {
        return Err(Error::MissingKey("topology.relays".into()));
    }
    let mut doc = Table::try_from(SimConfig::default())
        .map_err(|e| Error::Config(format!("default serialization: {e}")))?;
    merge(&mut doc, user);
    for (key, value) in overrides {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::UnknownKey(key.clone()));
        }
        set_path(&mut doc, key, value.clone());
    }
    let config: SimConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn to_toml_string(config: &SimConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}

/// Reads an angle or number: `0.3`, `pi/8`, `3pi/16`, `2*pi/15`.
pub fn parse_angle_text(s: &str) -> Option<f64> {
    let s = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s.as_str(), 1.0),
    };
    let coef = match num {
        "pi" => 1.0,
        other => other.strip_suffix("*pi").or(other.strip_suffix("pi"))?.parse::<f64>().ok()?,
    };
    Some(coef * PI / den)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Number(f64),
    Text(String),
}

impl AngleRepr {
    fn value<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            AngleRepr::Number(v) => Ok(v),
            AngleRepr::Text(s) => {
                parse_angle_text(&s).ok_or_else(|| E::custom(format!("cannot read angle `{s}`")))
            }
        }
    }
}

fn angle<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    AngleRepr::deserialize(d)?.value()
}

fn policy_table<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<(f64, f64)>>, D::Error> {
    let rows: Vec<(f64, AngleRepr)> = Vec::deserialize(d)?;
    rows.into_iter()
        .map(|(q, a)| Ok((q, a.value()?)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Some)
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        finite("topology.source_dbm", t.source_dbm)?;
        finite("topology.relay_dbm", t.relay_dbm)?;
        for (name, dist) in [("topology.sr_distance_mm", &t.sr_distance_mm), ("topology.rd_distance_mm", &t.rd_distance_mm)] {
            if let PerRelay::Each(v) = dist {
                if v.len() != t.relays {
                    return Err(Error::invalid(
                        name,
                        format!("{} entries for {} relays", v.len(), t.relays),
                    ));
                }
            }
            for n in 0..t.relays {
                let d = dist.get(n).unwrap_or(f64::NAN);
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::invalid(name, format!("must be positive, got {d}")));
                }
            }
        }
        if let Some(d) = t.sd_distance_mm {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid("topology.sd_distance_mm", "must be positive"));
            }
        }
        for (section, entry, kind) in [
            ("channel.in_body", &self.channel.in_body, LinkKind::InBodyToOnBody),
            ("channel.on_body", &self.channel.on_body, LinkKind::OnBodyToOnBody),
        ] {
            if entry.kind.is_some_and(|k| k != kind) {
                return Err(Error::invalid(format!("{section}.kind"), "does not match section"));
            }
            entry.params().validate().map_err(|e| match e {
                Error::InvalidParameter { name, reason } => {
                    Error::invalid(format!("{section}.{name}"), reason)
                }
                other => other,
            })?;
        }
        let p = &self.protocol;
        if !(p.beta > 0.0 && p.beta.is_finite()) {
            return Err(Error::invalid("protocol.beta", format!("must be positive, got {}", p.beta)));
        }
        if p.buffer_size < 1 {
            return Err(Error::invalid("protocol.buffer_size", "must be at least 1"));
        }
        let m = &self.modem;
        if m.order != 4 && m.order != 8 {
            return Err(Error::invalid("modem.order", format!("must be 4 or 8, got {}", m.order)));
        }
        if !(m.theta2 > 0.0 && m.theta2 < FRAC_PI_4) {
            return Err(Error::invalid("modem.theta2", "must lie in (0, pi/4)"));
        }
        finite("modem.noise_dbm", m.noise_dbm)?;
        if let Some(table) = &m.adaptive {
            if m.order != 8 {
                return Err(Error::invalid("modem.adaptive", "requires modem.order = 8"));
            }
            ThetaPolicy::new(table.clone())?;
        }
        let r = &self.run;
        if r.packets < 1 {
            return Err(Error::invalid("run.packets", "must be at least 1"));
        }
        if r.symbols_per_packet < 1 {
            return Err(Error::invalid("run.symbols_per_packet", "must be at least 1"));
        }
        if r.trials < 1 {
            return Err(Error::invalid("run.trials", "must be at least 1"));
        }
        if r.max_packets < r.packets {
            return Err(Error::invalid("run.max_packets", "must be at least run.packets"));
        }
        Ok(())
    }

    pub fn in_body(&self) -> ChannelParams {
        self.channel.in_body.params()
    }

    pub fn on_body(&self) -> ChannelParams {
        self.channel.on_body.params()
    }

    pub fn sr_link(&self, relay: usize) -> Result<Link> {
        let d = self.topology.sr_distance_mm.get(relay).unwrap_or(f64::NAN);
        Link::new(self.in_body(), LinkGeometry::new(LinkKind::InBodyToOnBody, d)?)
    }

    pub fn rd_link(&self, relay: usize) -> Result<Link> {
        let d = self.topology.rd_distance_mm.get(relay).unwrap_or(f64::NAN);
        Link::new(self.on_body(), LinkGeometry::new(LinkKind::OnBodyToOnBody, d)?)
    }

    pub fn sd_link(&self) -> Result<Option<Link>> {
        self.topology
            .sd_distance_mm
            .map(|d| Link::new(self.in_body(), LinkGeometry::new(LinkKind::InBodyToOnBody, d)?))
            .transpose()
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.modem.noise_dbm)
    }

    pub fn constellation(&self) -> Result<Constellation> {
        match self.modem.order {
            4 => Ok(Constellation::qpsk()),
            _ => Constellation::hpsk8(self.modem.theta2),
        }
    }

    pub fn theta_policy(&self) -> Result<Option<ThetaPolicy>> {
        self.modem.adaptive.clone().map(ThetaPolicy::new).transpose()
    }

    /// Convenience: a default configuration for `kind` with `relays` relays.
    pub fn for_protocol(kind: ProtocolKind, relays: usize) -> Self {
        let mut c = Self::default();
        c.protocol.kind = kind;
        c.topology.relays = relays;
        c
    }
}
