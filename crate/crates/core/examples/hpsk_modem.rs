//! 8-HPSK constellations for several theta2 values, analytic HP/LP bit error
//! rates at one SNR, and a Monte Carlo cross-check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wban_relay::channel::ChannelGain;
use wban_relay::modem::{demodulate, modulate, transmit_symbol, Constellation, NoiseModel};
use wban_relay::oracle::{link_ber, BitClass};

fn main() -> wban_relay::Result<()> {
    let noise = NoiseModel::new(-100.0)?;
    let gain = ChannelGain::from_db(-80.0);
    let power_dbm = -6.0; // 14 dB per-symbol SNR
    let gamma_s = 10f64.powf((power_dbm - 80.0 + 100.0) / 10.0);
    let symbols = 200_000;

    for (label, theta2) in [("pi/8", PI / 8.0), ("pi/15", PI / 15.0), ("pi/30", PI / 30.0)] {
        let c = Constellation::hpsk8(theta2)?;
        let phases: Vec<String> = c.points().iter().map(|p| format!("{:.1}", p.arg().to_degrees())).collect();
        println!("theta2 = {label}: phases [{}]", phases.join(", "));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bits: Vec<u8> = (0..3 * symbols).map(|_| rng.random_range(0..2)).collect();
        let sent = modulate(&bits, &c)?;
        let amp = wban_relay::modem::amplitude(power_dbm, &gain);
        let (mut hp, mut lp) = (0u64, 0u64);
        for (i, s) in sent.iter().enumerate() {
            let r = transmit_symbol(*s, power_dbm, &gain, &noise, &mut rng);
            let label_sent = wban_relay::modem::bits_to_label(&bits[3 * i..3 * i + 3])?;
            let (h, l) = c.bit_errors(label_sent, demodulate(r, &c, amp));
            hp += h as u64;
            lp += l as u64;
        }
        println!(
            "  HP ber {:.3e} (analytic {:.3e})   LP ber {:.3e} (analytic {:.3e})",
            hp as f64 / (2 * symbols) as f64,
            link_ber(&c, gamma_s, BitClass::Hp),
            lp as f64 / symbols as f64,
            link_ber(&c, gamma_s, BitClass::Lp)
        );
    }
    Ok(())
}
