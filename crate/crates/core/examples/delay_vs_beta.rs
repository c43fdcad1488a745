//! Simulated and analytical average delay of Protocol 1 across beta, with the
//! relay-to-destination hop placed so that it is 10*log10(5) dB stronger on
//! average than the source-to-relay hop.

use wban_relay::cli::{oracle_delay, rd_distance_for_offset};
use wban_relay::config::PerRelay;
use wban_relay::engine::{run_sweep, SweepAxis};
use wban_relay::{ProtocolKind, QualityMode, SimConfig};

fn main() -> wban_relay::Result<()> {
    let mut c = SimConfig::for_protocol(ProtocolKind::Protocol1, 1);
    c.protocol.quality_mode = QualityMode::Absolute;
    c.topology.rd_distance_mm = PerRelay::All(rd_distance_for_offset(&c, 10.0 * 5f64.log10())?);
    c.run.packets = 50_000;
    c.run.symbols_per_packet = 1;

    let betas = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
    println!("{:<6} {:>10} {:>10} {:>8}", "beta", "simulated", "chain", "silent");
    for (beta, m) in run_sweep(&c, SweepAxis::Beta, &betas)? {
        let mut at = c.clone();
        at.protocol.beta = beta;
        let chain = oracle_delay(&at)?.map_or(f64::NAN, |(d, _)| d);
        println!("{beta:<6} {:>10.4} {chain:>10.4} {:>8.4}", m.avg_system_delay, m.silent_fraction);
    }
    Ok(())
}
