//! CSV output.
//!
//! Every table starts with an optional `# generated <timestamp>` comment
//! line; with it suppressed, output is a pure function of config and seed.
//! Column meanings are documented in `docs/csv_schema.md`.

use std::io::Write;

use chrono::{SecondsFormat, Utc};

use crate::config::SimConfig;
use crate::engine::MetricsReport;
use crate::error::Result;

/// Whether a row was measured or computed analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sim,
    Oracle,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Sim => "sim",
            Source::Oracle => "oracle",
        }
    }
}

/// Which part of the network a row describes: `system` for end-to-end
/// results, or a single link (`sr0`, `rd1`, `sd`, ...) for oracle rows.
pub type Scope = String;

/// One row of the common schema. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub source: Source,
    pub scope: Scope,
    pub protocol: String,
    pub relays: usize,
    pub beta: f64,
    pub buffer_size: usize,
    pub source_dbm: f64,
    pub relay_dbm: f64,
    pub order: usize,
    pub theta2: f64,
    pub packets: Option<u64>,
    pub trials: Option<u64>,
    pub seed: u64,
    pub ber_hp: Option<f64>,
    pub se_ber_hp: Option<f64>,
    pub ber_lp: Option<f64>,
    pub se_ber_lp: Option<f64>,
    pub ber_overall: Option<f64>,
    pub se_ber_overall: Option<f64>,
    pub avg_system_delay: Option<f64>,
    pub se_delay: Option<f64>,
    pub silent_fraction: Option<f64>,
    pub total_slots: Option<u64>,
    pub mean_latency: Option<f64>,
}

pub const COLUMNS: &[&str] = &[
    "source",
    "scope",
    "protocol",
    "relays",
    "beta",
    "buffer_size",
    "source_dbm",
    "relay_dbm",
    "order",
    "theta2",
    "packets",
    "trials",
    "seed",
    "ber_hp",
    "se_ber_hp",
    "ber_lp",
    "se_ber_lp",
    "ber_overall",
    "se_ber_overall",
    "avg_system_delay",
    "se_delay",
    "silent_fraction",
    "total_slots",
    "mean_latency",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Row {
    /// Echo of the configuration with every metric empty.
    pub fn from_config(config: &SimConfig, source: Source, scope: &str) -> Self {
        Self {
            source,
            scope: scope.to_string(),
            protocol: config.protocol.kind.name().to_string(),
            relays: config.topology.relays,
            beta: config.protocol.beta,
            buffer_size: config.protocol.buffer_size,
            source_dbm: config.topology.source_dbm,
            relay_dbm: config.topology.relay_dbm,
            order: config.modem.order,
            theta2: config.modem.theta2,
            packets: None,
            trials: None,
            seed: config.run.seed,
            ber_hp: None,
            se_ber_hp: None,
            ber_lp: None,
            se_ber_lp: None,
            ber_overall: None,
            se_ber_overall: None,
            avg_system_delay: None,
            se_delay: None,
            silent_fraction: None,
            total_slots: None,
            mean_latency: None,
        }
    }

    pub fn simulated(config: &SimConfig, m: &MetricsReport) -> Self {
        let lp = config.modem.order > 4;
        Self {
            packets: Some(m.packets),
            trials: Some(m.trials),
            ber_hp: Some(m.ber_hp),
            se_ber_hp: Some(m.se_ber_hp),
            ber_lp: lp.then_some(m.ber_lp),
            se_ber_lp: lp.then_some(m.se_ber_lp),
            ber_overall: Some(m.ber_overall),
            se_ber_overall: Some(m.se_ber_overall),
            avg_system_delay: Some(m.avg_system_delay),
            se_delay: m.se_delay,
            silent_fraction: Some(m.silent_fraction),
            total_slots: Some(m.total_slots),
            mean_latency: Some(m.mean_latency),
            ..Self::from_config(config, Source::Sim, "system")
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.source.name().to_string(),
            self.scope.clone(),
            self.protocol.clone(),
            self.relays.to_string(),
            self.beta.to_string(),
            self.buffer_size.to_string(),
            self.source_dbm.to_string(),
            self.relay_dbm.to_string(),
            self.order.to_string(),
            self.theta2.to_string(),
            opt(self.packets),
            opt(self.trials),
            self.seed.to_string(),
            opt(self.ber_hp),
            opt(self.se_ber_hp),
            opt(self.ber_lp),
            opt(self.se_ber_lp),
            opt(self.ber_overall),
            opt(self.se_ber_overall),
            opt(self.avg_system_delay),
            opt(self.se_delay),
            opt(self.silent_fraction),
            opt(self.total_slots),
            opt(self.mean_latency),
        ]
    }
}

fn header_line<W: Write>(out: &mut W, timestamp: bool) -> Result<()> {
    if timestamp {
        writeln!(
            out,
            "# generated {}",
            Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
        )?;
    }
    Ok(())
}

/// Writes rows of the common schema. With `axis`, each row is preceded by
/// its axis value in a first column `axis_<name>`.
pub fn write_rows<W: Write>(
    out: &mut W,
    rows: &[Row],
    axis: Option<(&str, &[f64])>,
    timestamp: bool,
) -> Result<()> {
    header_line(out, timestamp)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    if let Some((name, _)) = axis {
        header.push(format!("axis_{name}"));
    }
    header.extend(COLUMNS.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some((_, values)) = axis {
            rec.push(values[i].to_string());
        }
        rec.extend(row.fields());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Occupancy distribution per relay, one row per `(relay, level)`.
pub fn write_occupancy<W: Write>(out: &mut W, report: &MetricsReport, timestamp: bool) -> Result<()> {
    header_line(out, timestamp)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["relay", "occupancy", "fraction"])?;
    for (n, row) in report.occupancy_histogram.iter().enumerate() {
        for (level, f) in row.iter().enumerate() {
            w.write_record([n.to_string(), level.to_string(), f.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Wide table for protocol comparisons: a shared power column followed by
/// a block of columns per protocol.
pub fn write_compare<W: Write>(
    out: &mut W,
    powers: &[f64],
    protocols: &[String],
    table: &[Vec<MetricsReport>],
    timestamp: bool,
) -> Result<()> {
    header_line(out, timestamp)?;
    let mut w = csv::Writer::from_writer(out);
    let suffixes = ["ber_overall", "se_ber_overall", "ber_hp", "ber_lp", "avg_system_delay"];
    let mut header = vec!["source_dbm".to_string()];
    for p in protocols {
        header.extend(suffixes.iter().map(|s| format!("{p}_{s}")));
    }
    w.write_record(&header)?;
    for (i, power) in powers.iter().enumerate() {
        let mut rec = vec![power.to_string()];
        for column in table {
            let m = &column[i];
            rec.extend([
                m.ber_overall.to_string(),
                m.se_ber_overall.to_string(),
                m.ber_hp.to_string(),
                m.ber_lp.to_string(),
                m.avg_system_delay.to_string(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Power at which a BER curve first falls to `target`, interpolating
/// `log10(ber)` linearly in power. `None` if the curve never crosses.
pub fn power_at_ber(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let t = target.log10();
    curve.windows(2).find_map(|w| {
        let ((p0, b0), (p1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 <= target && b0 > 0.0 {
            if b1 <= 0.0 {
                return Some(p1);
            }
            let (l0, l1) = (b0.log10(), b1.log10());
            if l0 == l1 {
                return Some(p0);
            }
            Some(p0 + (p1 - p0) * (l0 - t) / (l0 - l1))
        } else {
            None
        }
    })
}
