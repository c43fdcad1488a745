//! Fixed 8-HPSK against a link-adaptive theta2 table under Protocol 1.

use std::f64::consts::PI;

use wban_relay::{run_simulation, ProtocolKind, SimConfig};

fn main() -> wban_relay::Result<()> {
    let mut c = SimConfig::for_protocol(ProtocolKind::Protocol1, 1);
    c.modem.order = 8;
    c.topology.source_dbm = -42.0;
    c.run.packets = 20_000;

    println!("{:<10} {:>10} {:>10}", "theta2", "HP ber", "LP ber");
    for (label, theta2) in [("pi/8", PI / 8.0), ("pi/30", PI / 30.0)] {
        c.modem.theta2 = theta2;
        let m = run_simulation(&c)?;
        println!("{label:<10} {:>10.3e} {:>10.3e}", m.ber_hp, m.ber_lp);
    }

    // Weaker links fall back to stronger HP protection.
    c.modem.adaptive = Some(vec![(-75.0, PI / 30.0), (-68.0, PI / 15.0), (-60.0, PI / 8.0)]);
    let m = run_simulation(&c)?;
    println!("{:<10} {:>10.3e} {:>10.3e}", "adaptive", m.ber_hp, m.ber_lp);
    Ok(())
}
