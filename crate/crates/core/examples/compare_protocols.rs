//! BER against source power for the two-relay strategies, all fed the same
//! channel and noise realisations.

use wban_relay::cli::{compare_table, rd_distance_for_offset};
use wban_relay::config::PerRelay;
use wban_relay::report::power_at_ber;
use wban_relay::{ProtocolKind, QualityMode, SimConfig};

fn main() -> wban_relay::Result<()> {
    let mut c = SimConfig::for_protocol(ProtocolKind::Protocol2, 2);
    c.protocol.quality_mode = QualityMode::Absolute;
    c.topology.rd_distance_mm = PerRelay::All(rd_distance_for_offset(&c, 10.0 * 5f64.log10())?);
    c.topology.relay_dbm = -6.0;
    c.run.packets = 5_000;
    c.run.symbols_per_packet = 64;
    c.run.power_axis_dbm = (0..7).map(|i| -48.0 + 3.0 * i as f64).collect();

    let kinds = [ProtocolKind::MaxMin, ProtocolKind::Protocol2, ProtocolKind::ModifiedProtocol2];
    let table = compare_table(&c, &kinds)?;

    print!("{:>10}", "source_dbm");
    kinds.iter().for_each(|k| print!(" {:>20}", k.name()));
    println!();
    for (i, p) in c.run.power_axis_dbm.iter().enumerate() {
        print!("{p:>10}");
        table.iter().for_each(|col| print!(" {:>20.3e}", col[i].ber_overall));
        println!();
    }
    for (k, col) in kinds.iter().zip(&table) {
        let curve: Vec<(f64, f64)> = c.run.power_axis_dbm.iter().zip(col).map(|(&p, m)| (p, m.ber_overall)).collect();
        match power_at_ber(&curve, 1e-3) {
            Some(p) => println!("{:<20} reaches 1e-3 at {p:.2} dBm, delay {:.3}", k.name(), col[0].avg_system_delay),
            None => println!("{:<20} does not reach 1e-3 on this axis", k.name()),
        }
    }
    Ok(())
}
