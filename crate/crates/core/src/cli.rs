//! Command implementations behind the `wban-relay` binary. Each command
//! takes a validated [`SimConfig`] and writes its tables into an output
//! directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::channel::{db_to_linear, selection_probability, ChannelGain, ChannelParams, Link, LinkGeometry, LinkKind};
use crate::config::SimConfig;
use crate::engine::{run_simulation, run_sweep, run_trial_tally, trial_seed, MetricsReport, SweepAxis};
use crate::error::{Error, Result};
use crate::modem::{amplitude, demodulate, transmit_symbol, Constellation, NoiseModel};
use crate::oracle::{
    avg_ber_lognormal, build_chain, build_multi_relay_chain, chain_delay, link_ber, qpsk_ber, BitClass,
    BufferChain, GaussianLink, DEFAULT_HERMITE_NODES,
};
use crate::protocol::{ProtocolKind, QualityMode};
use crate::report::{self, Row, Source};

/// Where and how tables are written.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub timestamp: bool,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>, timestamp: bool) -> Self {
        Self {
            dir: dir.into(),
            timestamp,
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.dir)?;
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// `run`: one simulation; writes `run.csv` and `occupancy.csv`.
pub fn run(config: &SimConfig, out: &Output) -> Result<MetricsReport> {
    let m = run_simulation(config)?;
    report::write_rows(&mut out.create("run.csv")?, &[Row::simulated(config, &m)], None, out.timestamp)?;
    report::write_occupancy(&mut out.create("occupancy.csv")?, &m, out.timestamp)?;
    Ok(m)
}

/// `sweep`: one simulation per axis value; writes `sweep_<axis>.csv`.
pub fn sweep(
    config: &SimConfig,
    axis: SweepAxis,
    values: &[f64],
    out: &Output,
) -> Result<Vec<(f64, MetricsReport)>> {
    let table = run_sweep(config, axis, values)?;
    let rows = table
        .iter()
        .map(|(v, m)| Ok(Row::simulated(&axis.apply(config, *v)?, m)))
        .collect::<Result<Vec<_>>>()?;
    report::write_rows(
        &mut out.create(&format!("sweep_{}.csv", axis.name()))?,
        &rows,
        Some((axis.name(), values)),
        out.timestamp,
    )?;
    Ok(table)
}

/// BER-vs-power curves for several protocols over `run.power_axis_dbm`.
///
/// All protocols run with the same master seed, so trial `t` of every
/// protocol sees the same channel draws and payloads.
pub fn compare_table(config: &SimConfig, protocols: &[ProtocolKind]) -> Result<Vec<Vec<MetricsReport>>> {
    if protocols.len() < 2 {
        return Err(Error::Usage(format!(
            "compare needs at least two protocols, got {}",
            protocols.len()
        )));
    }
    let powers = &config.run.power_axis_dbm;
    if powers.is_empty() {
        return Err(Error::invalid("run.power_axis_dbm", "is empty"));
    }
    protocols
        .iter()
        .map(|&kind| {
            let mut c = config.clone();
            c.protocol.kind = kind;
            run_sweep(&c, SweepAxis::SourcePower, powers).map(|t| t.into_iter().map(|(_, m)| m).collect())
        })
        .collect()
}

/// `compare`: writes `compare.csv`, one column block per protocol.
pub fn compare(config: &SimConfig, protocols: &[ProtocolKind], out: &Output) -> Result<Vec<Vec<MetricsReport>>> {
    let table = compare_table(config, protocols)?;
    let names: Vec<String> = protocols.iter().map(|p| p.name().to_string()).collect();
    report::write_compare(
        &mut out.create("compare.csv")?,
        &config.run.power_axis_dbm,
        &names,
        &table,
        out.timestamp,
    )?;
    Ok(table)
}

/// Single-hop average BER of a link at a transmit power.
fn link_row(config: &SimConfig, scope: &str, link: &Link, tx_dbm: f64, power: f64) -> Result<Row> {
    let c = config.constellation()?;
    let mean_snr = tx_dbm - link.path_loss_db() - config.modem.noise_dbm;
    let sigma = link.sigma_db();
    let ber = |class| avg_ber_lognormal(&c, mean_snr, sigma, class, DEFAULT_HERMITE_NODES);
    let lp = config.modem.order > 4;
    let mut row = Row::from_config(config, Source::Oracle, scope);
    row.source_dbm = power;
    row.ber_hp = Some(ber(BitClass::Hp)?);
    row.ber_lp = if lp { Some(ber(BitClass::Lp)?) } else { None };
    row.ber_overall = Some(ber(BitClass::Overall)?);
    Ok(row)
}

fn gaussian(link: &Link, mode: QualityMode, offset_db: f64) -> GaussianLink {
    GaussianLink {
        mean_db: link.mean_quality_db(mode) + offset_db,
        sigma_db: link.sigma_db(),
    }
}

fn stationary_delay(chain: Result<BufferChain>) -> Result<Option<(f64, f64)>> {
    match chain.and_then(|c| chain_delay(&c)) {
        Ok(d) => Ok(Some((d.avg_system_delay, d.silent_probability))),
        // Too many states, or no unique stationary law (e.g. sigma 0).
        Err(Error::InvalidParameter { .. } | Error::ReducibleChain) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Analytical delay of the configured protocol, where a chain exists and
/// has a unique stationary distribution.
pub fn oracle_delay(config: &SimConfig) -> Result<Option<(f64, f64)>> {
    let kind = config.protocol.kind;
    let mode = config.protocol.quality_mode;
    let l = config.protocol.buffer_size;
    let beta = config.protocol.beta;
    let relays = config.topology.relays;
    Ok(match kind {
        ProtocolKind::Protocol1 | ProtocolKind::Protocol1Star if relays == 1 => {
            let p = selection_probability(&config.sr_link(0)?, &config.rd_link(0)?, beta, mode)?;
            return stationary_delay(build_chain(kind, l, p));
        }
        ProtocolKind::Protocol2 | ProtocolKind::ModifiedProtocol2 if relays >= 1 => {
            let w = 10.0 * beta.log10();
            let sr = (0..relays).map(|n| Ok(gaussian(&config.sr_link(n)?, mode, 0.0))).collect::<Result<Vec<_>>>()?;
            let rd = (0..relays).map(|n| Ok(gaussian(&config.rd_link(n)?, mode, w))).collect::<Result<Vec<_>>>()?;
            return stationary_delay(build_multi_relay_chain(kind, &sr, &rd, l));
        }
        ProtocolKind::MaxMin => Some((2.0, 0.0)),
        ProtocolKind::Direct => Some((1.0, 0.0)),
        _ => None,
    })
}

/// Oracle rows: the system delay (when a chain exists) and single-hop
/// average BERs of every link over `run.power_axis_dbm`.
pub fn analyze_rows(config: &SimConfig) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    if let Some((delay, silent)) = oracle_delay(config)? {
        let mut row = Row::from_config(config, Source::Oracle, "system");
        row.avg_system_delay = Some(delay);
        row.silent_fraction = Some(silent);
        rows.push(row);
    }
    let relay_dbm = config.topology.relay_dbm;
    for &power in &config.run.power_axis_dbm {
        for n in 0..config.topology.relays {
            rows.push(link_row(config, &format!("sr{n}"), &config.sr_link(n)?, power, power)?);
        }
        if let Some(sd) = config.sd_link()? {
            rows.push(link_row(config, "sd", &sd, power, power)?);
        }
    }
    for n in 0..config.topology.relays {
        rows.push(link_row(config, &format!("rd{n}"), &config.rd_link(n)?, relay_dbm, config.topology.source_dbm)?);
    }
    Ok(rows)
}

/// `analyze`: writes `analyze.csv`.
pub fn analyze(config: &SimConfig, out: &Output) -> Result<Vec<Row>> {
    let rows = analyze_rows(config)?;
    report::write_rows(&mut out.create("analyze.csv")?, &rows, None, out.timestamp)?;
    Ok(rows)
}

/// One oracle-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn within(name: impl Into<String>, expected: f64, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            measured,
            tolerance,
            passed: (measured - expected).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["check", "expected", "measured", "tolerance", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.expected.to_string(),
                c.measured.to_string(),
                c.tolerance.to_string(),
                c.passed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub type ChainBuilder = dyn Fn(ProtocolKind, usize, f64) -> Result<BufferChain>;

/// Runs the oracle-versus-simulation suite with the real chain builder.
pub fn validate(config: &SimConfig) -> Result<ValidationReport> {
    validate_with(config, &build_chain)
}

/// Like [`validate`] with a substitute chain builder.
///
/// Checks, all at small scale:
/// * `chain_delay/<protocol>/L<l>`: simulated delay within 1% of the chain,
///   and `occupancy_tv/...`: total-variation distance to the stationary
///   distribution at most 0.01. Uses the configured channel laws with
///   `beta` chosen to give a target selection probability.
/// * `selection_probability`: empirical SR-win frequency of the configured
///   links against the closed form, within 3 binomial standard errors.
/// * `qpsk_ber/<target>`: fixed-gain QPSK BER within 3 standard errors.
pub fn validate_with(config: &SimConfig, chain_builder: &ChainBuilder) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    chain_checks(config, chain_builder, &mut report)?;
    report.checks.push(selection_check(config, 200_000)?);
    for target in [1e-2, 1e-3] {
        report.checks.push(qpsk_check(target, 400_000, config.run.seed)?);
    }
    Ok(report)
}

/// `beta` giving SR-win probability `p` in fading mode with spreads `s_sr`, `s_rd`.
pub fn beta_for_probability(p: f64, s_sr: f64, s_rd: f64) -> Result<f64> {
    let s = (s_sr * s_sr + s_rd * s_rd).sqrt();
    if s == 0.0 {
        return Err(Error::invalid("channel.sigma_db", "needs shadowing to set a probability"));
    }
    let z = Normal::standard().inverse_cdf(p);
    Ok(db_to_linear(-z * s))
}

fn chain_checks(config: &SimConfig, builder: &ChainBuilder, report: &mut ValidationReport) -> Result<()> {
    let in_body = if config.in_body().sigma_db > 0.0 { config.in_body() } else { ChannelParams::in_body_default() };
    let on_body = if config.on_body().sigma_db > 0.0 { config.on_body() } else { ChannelParams::on_body_default() };
    for (kind, l, p) in [(ProtocolKind::Protocol1, 3, 0.6), (ProtocolKind::Protocol1Star, 3, 0.6)] {
        let mut c = SimConfig::for_protocol(kind, 1);
        c.channel.in_body.sigma_db = in_body.sigma_db;
        c.channel.on_body.sigma_db = on_body.sigma_db;
        c.protocol.buffer_size = l;
        c.protocol.beta = beta_for_probability(p, in_body.sigma_db, on_body.sigma_db)?;
        c.run.packets = 100_000;
        c.run.symbols_per_packet = 1;
        c.run.seed = config.run.seed;
        let tally = run_trial_tally(&c, trial_seed(c.run.seed, 0))?;
        let m = tally.report();
        let oracle = chain_delay(&builder(kind, l, p)?)?;
        let tag = format!("{}/L{l}", kind.name());
        report.checks.push(Check::within(
            format!("chain_delay/{tag}"),
            oracle.avg_system_delay,
            m.avg_system_delay,
            0.01 * oracle.avg_system_delay,
        ));
        let tv = 0.5
            * oracle
                .stationary
                .iter()
                .zip(&m.occupancy_histogram[0])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        report.checks.push(Check::within(format!("occupancy_tv/{tag}"), 0.0, tv, 0.01));
    }
    Ok(())
}

/// Empirical SR-win frequency of the configured single-relay links.
pub fn selection_check(config: &SimConfig, draws: u64) -> Result<Check> {
    let sr = config.sr_link(0)?;
    let rd = config.rd_link(0)?;
    let mode = config.protocol.quality_mode;
    let beta = config.protocol.beta;
    let p = selection_probability(&sr, &rd, beta, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.run.seed, 1 << 32));
    let wins = (0..draws)
        .filter(|_| {
            let (gs, gr) = (sr.draw(&mut rng), rd.draw(&mut rng));
            sr.quality(&gs, mode) >= beta * rd.quality(&gr, mode)
        })
        .count() as f64;
    let freq = wins / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    // A deterministic comparison must match exactly.
    Ok(Check::within("selection_probability", p, freq, 3.0 * se))
}

/// Fixed-gain QPSK at the SNR where the analytic BER equals `target`.
pub fn qpsk_check(target: f64, symbols: u64, seed: u64) -> Result<Check> {
    // Solve Q(sqrt(2 gb)) = target for gb by bisection in dB.
    let (mut lo, mut hi) = (-10.0f64, 20.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if qpsk_ber(db_to_linear(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma_b_db = 0.5 * (lo + hi);
    let noise = NoiseModel::default();
    let snr_db = gamma_b_db + 10.0 * 2f64.log10();
    let gain = ChannelGain::from_db(snr_db + noise.power_dbm());
    let c = Constellation::qpsk();
    let a = amplitude(0.0, &gain);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 2 << 32));
    let mut errors = 0u64;
    for i in 0..symbols {
        let label = (i % 4) as u8;
        let y = transmit_symbol(c.point(label), 0.0, &gain, &noise, &mut rng);
        let (h, _) = c.bit_errors(label, demodulate(y, &c, a));
        errors += h as u64;
    }
    let bits = 2 * symbols;
    let expected = link_ber(&c, db_to_linear(snr_db), BitClass::Overall);
    let se = (expected * (1.0 - expected) / bits as f64).sqrt();
    Ok(Check::within(
        format!("qpsk_ber/{target:e}"),
        expected,
        errors as f64 / bits as f64,
        3.0 * se,
    ))
}

/// `validate`: runs the suite and writes `validate.csv`.
pub fn validate_to(config: &SimConfig, out: &Output) -> Result<ValidationReport> {
    let report = validate(config)?;
    fs::create_dir_all(&out.dir)?;
    report.write_csv(&out.path("validate.csv"))?;
    Ok(report)
}

/// Geometry helper for examples and presets: the relay-to-destination
/// distance at which the mean absolute gains of the two hops differ by
/// `offset_db` (RD path loss = SR path loss - offset).
pub fn rd_distance_for_offset(config: &SimConfig, offset_db: f64) -> Result<f64> {
    let sr = config.sr_link(0)?;
    let on = config.on_body();
    let target = sr.path_loss_db() - offset_db;
    let d = on.d0_mm * 10f64.powf((target - on.pl0_db) / (10.0 * on.exponent));
    LinkGeometry::new(LinkKind::OnBodyToOnBody, d)?;
    Ok(d)
}
