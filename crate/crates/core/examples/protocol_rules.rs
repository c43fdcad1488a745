//! What each selection rule does with the same link qualities at different
//! buffer levels.

use wban_relay::protocol::{decide, ProtocolKind, SlotSnapshot};

fn main() -> wban_relay::Result<()> {
    let capacity = 4;
    let beta = 0.2;
    // SR quality 1.0 against weighted RD quality 0.2 * 3.0 = 0.6: the SR hop wins.
    let (q_sr, q_rd, q_sd) = (1.0, 3.0, 0.5);

    println!("{:<20} {:>8} {:>8} {:>8}", "rule", "empty", "half", "full");
    for kind in [ProtocolKind::Protocol1, ProtocolKind::Protocol1Star, ProtocolKind::ModifiedProtocol1] {
        let sd = (kind == ProtocolKind::ModifiedProtocol1).then_some(q_sd);
        let row: Vec<String> = [0, 2, capacity]
            .into_iter()
            .map(|occ| {
                let s = SlotSnapshot::new(vec![q_sr], vec![q_rd], sd, vec![occ], capacity, beta)?;
                Ok(format!("{:?}", decide(kind, &s)?))
            })
            .collect::<wban_relay::Result<_>>()?;
        println!("{:<20} {:>8} {:>8} {:>8}", kind.name(), row[0], row[1], row[2]);
    }

    // Two relays: relay 0 has the strongest link overall but a full buffer.
    let s = SlotSnapshot::new(vec![5.0, 1.0], vec![1.0, 2.0], None, vec![capacity, 1], capacity, beta)?;
    for kind in [ProtocolKind::Protocol2, ProtocolKind::ModifiedProtocol2, ProtocolKind::MaxMin] {
        println!("{:<20} {:?}", kind.name(), decide(kind, &s)?);
    }
    Ok(())
}
