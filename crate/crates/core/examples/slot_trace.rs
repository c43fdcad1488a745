//! The first slots of a Protocol 1 trial: chosen action, buffer level and
//! deliveries.

use wban_relay::engine::run_trial_observed;
use wban_relay::{ProtocolKind, SimConfig};

fn main() -> wban_relay::Result<()> {
    let mut c = SimConfig::for_protocol(ProtocolKind::Protocol1, 1);
    c.protocol.buffer_size = 3;
    c.run.packets = 12;
    c.run.symbols_per_packet = 8;

    let tally = run_trial_observed(&c, 42, |e| {
        let delivered = e.delivered.map(|(_, id)| format!("packet {id}")).unwrap_or_default();
        println!(
            "slot {:>3}  {:<12} buffer {:?} -> {:?}  {delivered}",
            e.slot,
            format!("{:?}", e.action),
            e.occupancy_before,
            e.occupancy_after
        );
    })?;
    let m = tally.report();
    println!("\ndelay {:.3}, silent fraction {:.3}", m.avg_system_delay, m.silent_fraction);
    Ok(())
}
