//! Average delay and stationary buffer occupancy from the Markov chain of
//! the single-relay rules.

use wban_relay::oracle::{build_chain, chain_delay};
use wban_relay::ProtocolKind;

fn main() -> wban_relay::Result<()> {
    println!("{:<6} {:>6} {:>10} {:>10}", "p", "L", "protocol1", "protocol1*");
    for p in [0.3, 0.5, 0.7355] {
        for l in [1, 3, 10] {
            let d1 = chain_delay(&build_chain(ProtocolKind::Protocol1, l, p)?)?;
            let d2 = chain_delay(&build_chain(ProtocolKind::Protocol1Star, l, p)?)?;
            println!("{p:<6} {l:>6} {:>10.4} {:>10.4}", d1.avg_system_delay, d2.avg_system_delay);
        }
    }

    let d = chain_delay(&build_chain(ProtocolKind::Protocol1, 4, 0.6)?)?;
    let pi: Vec<String> = d.stationary.iter().map(|x| format!("{x:.4}")).collect();
    println!("\nstationary occupancy, L = 4, p = 0.6: [{}]", pi.join(", "));
    println!("silent probability {:.4}", d.silent_probability);
    Ok(())
}
