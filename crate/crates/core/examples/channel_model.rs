//! Mean path loss of the two link families, a few shadowed draws, and the
//! probability that the source-to-relay hop wins the selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wban_relay::channel::{selection_probability, ChannelParams, Link, LinkGeometry, LinkKind};
use wban_relay::QualityMode;

fn main() -> wban_relay::Result<()> {
    let in_body = ChannelParams::in_body_default();
    let on_body = ChannelParams::on_body_default();

    println!("distance_mm  in_body_pl_db  on_body_pl_db");
    for d in [60.0, 120.0, 200.0, 400.0] {
        let a = Link::new(in_body, LinkGeometry::new(LinkKind::InBodyToOnBody, d)?)?;
        let b = Link::new(on_body, LinkGeometry::new(LinkKind::OnBodyToOnBody, d)?)?;
        println!("{d:>11}  {:>13.2}  {:>13.2}", a.path_loss_db(), b.path_loss_db());
    }

    let sr = Link::new(in_body, LinkGeometry::new(LinkKind::InBodyToOnBody, 120.0)?)?;
    let rd = Link::new(on_body, LinkGeometry::new(LinkKind::OnBodyToOnBody, 120.0)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<String> = (0..5).map(|_| format!("{:.1}", sr.draw(&mut rng).gain_db)).collect();
    println!("\nSR gain draws (dB): {}", draws.join(" "));

    println!("\nbeta   p(SR wins) fading   p(SR wins) absolute");
    for beta in [0.05, 0.2, 1.0, 5.0] {
        println!(
            "{beta:<6} {:>18.4} {:>21.4}",
            selection_probability(&sr, &rd, beta, QualityMode::Fading)?,
            selection_probability(&sr, &rd, beta, QualityMode::Absolute)?
        );
    }
    Ok(())
}
