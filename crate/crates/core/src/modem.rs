//! Hierarchical PSK modem.
//!
//! Constellations are built from a phase vector `[pi/4, theta2]`. The two
//! high-priority (HP) bits pick the quadrant with Gray order
//! `00 -> pi/4, 01 -> 3pi/4, 11 -> 5pi/4, 10 -> 7pi/4`; for 8 points the
//! low-priority (LP) bit then rotates by `+theta2` (bit 0) or `-theta2`
//! (bit 1). A label is an integer whose high bits are the HP bits, and the
//! point with label `k` is stored at index `k`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{db_to_linear, ChannelGain};
use crate::error::{Error, Result};

const HP_QUADRANT: [u8; 4] = [0b00, 0b01, 0b11, 0b10];

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    theta: Vec<f64>,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn qpsk() -> Self {
        build_constellation(4, &[FRAC_PI_4]).expect("qpsk is always valid")
    }

    pub fn hpsk8(theta2: f64) -> Result<Self> {
        build_constellation(8, &[FRAC_PI_4, theta2])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: u8) -> Complex64 {
        self.points[label as usize]
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn hp_bits_per_symbol(&self) -> usize {
        2
    }

    pub fn lp_bits_per_symbol(&self) -> usize {
        self.bits_per_symbol() - 2
    }

    /// Bit errors between two labels, split as `(hp, lp)`.
    pub fn bit_errors(&self, sent: u8, decided: u8) -> (u32, u32) {
        let diff = sent ^ decided;
        let lp_bits = self.lp_bits_per_symbol();
        let lp_mask = (1u8 << lp_bits) - 1;
        ((diff >> lp_bits).count_ones(), (diff & lp_mask).count_ones())
    }
}

/// Builds a QPSK (`order = 4`, `theta = [pi/4]`) or 8-HPSK
/// (`order = 8`, `theta = [pi/4, theta2]`, `0 < theta2 < pi/4`) constellation.
pub fn build_constellation(order: usize, theta: &[f64]) -> Result<Constellation> {
    if theta.is_empty() || (theta[0] - FRAC_PI_4).abs() > 1e-12 {
        return Err(Error::invalid("theta", "first phase parameter must be pi/4"));
    }
    let points = match order {
        4 => {
            if theta.len() != 1 {
                return Err(Error::invalid("theta", "qpsk takes exactly one phase parameter"));
            }
            (0..4u8).map(|label| Complex64::from_polar(1.0, quadrant_angle(label))).collect()
        }
        8 => {
            if theta.len() != 2 {
                return Err(Error::invalid("theta", "8-hpsk takes exactly two phase parameters"));
            }
            let theta2 = theta[1];
            if !(theta2 > 0.0 && theta2 < FRAC_PI_4) {
                return Err(Error::invalid(
                    "theta2",
                    format!("must lie in (0, pi/4), got {theta2}"),
                ));
            }
            (0..8u8)
                .map(|label| {
                    let offset = if label & 1 == 0 { theta2 } else { -theta2 };
                    Complex64::from_polar(1.0, quadrant_angle(label >> 1) + offset)
                })
                .collect()
        }
        _ => {
            return Err(Error::invalid(
                "order",
                format!("modulation order must be 4 or 8, got {order}"),
            ))
        }
    };
    Ok(Constellation {
        order,
        theta: theta.to_vec(),
        points,
    })
}

fn quadrant_angle(hp: u8) -> f64 {
    let q = HP_QUADRANT.iter().position(|&g| g == hp).expect("two-bit label");
    FRAC_PI_4 + q as f64 * FRAC_PI_2
}

/// Maps a bit sequence to symbols, `log2(order)` bits per symbol, HP bits first.
pub fn modulate(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let k = constellation.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(Error::invalid(
            "bits",
            format!("length {} is not a multiple of {k}", bits.len()),
        ));
    }
    bits.chunks(k)
        .map(|group| {
            let label = bits_to_label(group)?;
            Ok(constellation.point(label))
        })
        .collect()
}

pub fn bits_to_label(group: &[u8]) -> Result<u8> {
    group.iter().try_fold(0u8, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b),
        _ => Err(Error::invalid("bits", format!("bit values must be 0 or 1, got {b}"))),
    })
}

pub fn label_to_bits(label: u8, bits_per_symbol: usize) -> impl Iterator<Item = u8> {
    (0..bits_per_symbol).rev().map(move |i| (label >> i) & 1)
}

/// Additive white Gaussian noise, specified as total complex power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    noise_power_dbm: f64,
    noiseless: bool,
}

impl NoiseModel {
    pub const DEFAULT_DBM: f64 = -117.73;

    pub fn new(noise_power_dbm: f64) -> Result<Self> {
        if !noise_power_dbm.is_finite() {
            return Err(Error::invalid("noise_dbm", "must be finite"));
        }
        Ok(Self {
            noise_power_dbm,
            noiseless: false,
        })
    }

    /// Zero-noise switch; the received sample equals the scaled symbol.
    pub fn noiseless() -> Self {
        Self {
            noise_power_dbm: f64::NEG_INFINITY,
            noiseless: true,
        }
    }

    pub fn power_dbm(&self) -> f64 {
        self.noise_power_dbm
    }

    /// Total complex noise power in mW.
    pub fn power_mw(&self) -> f64 {
        if self.noiseless {
            0.0
        } else {
            db_to_linear(self.noise_power_dbm)
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            noise_power_dbm: Self::DEFAULT_DBM,
            noiseless: false,
        }
    }
}

/// Received amplitude `sqrt(Es)` for a transmit power and link gain.
pub fn amplitude(tx_power_dbm: f64, gain: &ChannelGain) -> f64 {
    (db_to_linear(tx_power_dbm) * gain.power_gain).sqrt()
}

/// Per-symbol SNR in dB.
pub fn snr_db(tx_power_dbm: f64, gain: &ChannelGain, noise: &NoiseModel) -> f64 {
    tx_power_dbm + gain.gain_db - noise.power_dbm()
}

/// Passes one unit-modulus symbol through a flat link: `sqrt(Es) s + n`.
pub fn transmit_symbol<R: Rng + ?Sized>(
    symbol: Complex64,
    tx_power_dbm: f64,
    gain: &ChannelGain,
    noise: &NoiseModel,
    rng: &mut R,
) -> Complex64 {
    let scale = amplitude(tx_power_dbm, gain);
    symbol * scale + complex_noise(noise, rng)
}

pub(crate) fn complex_noise<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> Complex64 {
    let sd = (noise.power_mw() / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sd, im * sd)
}

/// Coherent minimum-distance detection with a known amplitude.
///
/// Ties (within rounding) go to the lowest point index.
pub fn demodulate(received: Complex64, constellation: &Constellation, amplitude: f64) -> u8 {
    let r = received / amplitude;
    nearest(constellation.points(), |p| (r - p).norm_sqr())
}

/// Joint ML detection over several independent looks at the same symbol,
/// each given as `(sample, amplitude)` with equal noise power.
/// Equivalent to maximum ratio combining followed by minimum distance.
pub fn demodulate_combined(looks: &[(Complex64, f64)], constellation: &Constellation) -> u8 {
    nearest(constellation.points(), |p| {
        looks.iter().map(|&(r, a)| (r - p * a).norm_sqr()).sum()
    })
}

fn nearest(points: &[Complex64], metric: impl Fn(Complex64) -> f64) -> u8 {
    let mut best = 0usize;
    let mut best_metric = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let m = metric(p);
        if m < best_metric - 1e-12 * (1.0 + best_metric.abs()) || best_metric.is_infinite() {
            best = i;
            best_metric = m;
        }
    }
    best as u8
}

/// Step policy mapping link quality (dB) to the LP offset angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPolicy {
    steps: Vec<(f64, f64)>,
}

impl ThetaPolicy {
    /// `steps` are `(quality threshold dB, theta2)` pairs sorted by threshold.
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("modem.adaptive", "policy table is empty"));
        }
        if steps.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::invalid("modem.adaptive", "thresholds must be sorted ascending"));
        }
        if let Some(&(_, t)) = steps.iter().find(|(_, t)| !(*t > 0.0 && *t < FRAC_PI_4)) {
            return Err(Error::invalid("modem.adaptive", format!("theta2 {t} outside (0, pi/4)")));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }
}

/// Picks theta2 for the current link quality: the entry with the highest
/// threshold not above `quality_db`, or the smallest configured theta2
/// (strongest HP protection) when the quality is below every threshold.
pub fn adaptive_theta(quality_db: f64, policy: &ThetaPolicy) -> f64 {
    policy
        .steps
        .iter()
        .rev()
        .find(|(threshold, _)| *threshold <= quality_db)
        .map(|&(_, theta)| theta)
        .unwrap_or_else(|| {
            policy
                .steps
                .iter()
                .map(|&(_, t)| t)
                .fold(f64::INFINITY, f64::min)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn qpsk_layout() {
        let c = Constellation::qpsk();
        assert_eq!(c.order(), 4);
        let expected = [
            (0b00, PI / 4.0),
            (0b01, 3.0 * PI / 4.0),
            (0b11, 5.0 * PI / 4.0),
            (0b10, 7.0 * PI / 4.0),
        ];
        for (label, angle) in expected {
            let p = c.point(label);
            assert!((p - Complex64::from_polar(1.0, angle)).norm() < 1e-12);
        }
    }

    #[test]
    fn hpsk_lp_offsets() {
        let c = Constellation::hpsk8(PI / 30.0).unwrap();
        let a0 = c.point(0b000).arg();
        let a1 = c.point(0b001).arg();
        assert!((a0 - (PI / 4.0 + PI / 30.0)).abs() < 1e-12);
        assert!((a1 - (PI / 4.0 - PI / 30.0)).abs() < 1e-12);
    }

    #[test]
    fn pi_over_8_is_uniform_8psk_geometry() {
        let c = Constellation::hpsk8(PI / 8.0).unwrap();
        for k in 0..8 {
            let target = Complex64::from_polar(1.0, k as f64 * PI / 4.0 + PI / 8.0);
            let hit = c.points().iter().any(|p| (p - target).norm() < 1e-12);
            assert!(hit, "missing angle index {k}");
        }
    }

    #[test]
    fn rejects_bad_orders_and_angles() {
        assert!(build_constellation(16, &[PI / 4.0]).is_err());
        assert!(build_constellation(8, &[PI / 4.0, 0.0]).is_err());
        assert!(build_constellation(8, &[PI / 4.0, PI / 4.0]).is_err());
        assert!(build_constellation(8, &[PI / 4.0]).is_err());
        assert!(build_constellation(4, &[PI / 3.0]).is_err());
    }

    #[test]
    fn unit_modulus_and_distinct() {
        for theta2 in [PI / 8.0, PI / 15.0, PI / 30.0, 0.001, PI / 4.0 - 0.001] {
            let c = Constellation::hpsk8(theta2).unwrap();
            let mut energy = 0.0;
            for (i, p) in c.points().iter().enumerate() {
                assert!((p.norm() - 1.0).abs() < 1e-12);
                energy += p.norm_sqr();
                for q in &c.points()[i + 1..] {
                    assert!((p - q).norm() > 1e-6);
                }
            }
            assert!((energy / 8.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modulate_basics() {
        let c = Constellation::qpsk();
        assert!(modulate(&[], &c).unwrap().is_empty());
        let s = modulate(&[0, 0], &c).unwrap();
        assert!((s[0] - Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);
        assert!(modulate(&[0, 1, 1], &c).is_err());
        assert!(modulate(&[0, 2], &c).is_err());
    }

    #[test]
    fn exact_point_demodulates_to_its_label() {
        let c = Constellation::hpsk8(PI / 15.0).unwrap();
        for label in 0..8u8 {
            assert_eq!(demodulate(c.point(label) * 3.5, &c, 3.5), label);
        }
    }

    #[test]
    fn midpoint_tie_goes_to_lowest_index() {
        let c = Constellation::hpsk8(PI / 30.0).unwrap();
        // Points 0b000 and 0b001 straddle the pi/4 diagonal.
        let r = Complex64::from_polar(1.0, PI / 4.0);
        for _ in 0..3 {
            assert_eq!(demodulate(r, &c, 1.0), 0b000);
        }
        // Points 0b000 (pi/4 + t) and 0b011 (3pi/4 - t) straddle pi/2.
        let r = Complex64::from_polar(1.0, PI / 2.0);
        assert_eq!(demodulate(r, &c, 1.0), 0b000);
    }

    #[test]
    fn snr_arithmetic() {
        let gain = ChannelGain::from_db(-60.0);
        let snr = snr_db(-3.0, &gain, &NoiseModel::default());
        assert!((snr - 54.73).abs() < 1e-9);
    }

    #[test]
    fn noiseless_switch() {
        let c = Constellation::qpsk();
        let gain = ChannelGain::from_db(-50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = c.point(0b11);
        let r = transmit_symbol(s, -10.0, &gain, &NoiseModel::noiseless(), &mut rng);
        assert_eq!(r, s * amplitude(-10.0, &gain));
    }

    #[test]
    fn noise_power_estimate() {
        let noise = NoiseModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let acc: f64 = (0..n).map(|_| complex_noise(&noise, &mut rng).norm_sqr()).sum();
        let est = acc / n as f64;
        assert!((est / noise.power_mw() - 1.0).abs() < 0.01);
    }

    #[test]
    fn combined_detection_matches_single_look() {
        let c = Constellation::hpsk8(PI / 15.0).unwrap();
        let r = c.point(5) * 2.0 + Complex64::new(0.05, -0.02);
        assert_eq!(demodulate_combined(&[(r, 2.0)], &c), demodulate(r, &c, 2.0));
    }

    #[test]
    fn bit_error_split() {
        let c = Constellation::hpsk8(PI / 15.0).unwrap();
        assert_eq!(c.bit_errors(0b000, 0b111), (2, 1));
        assert_eq!(c.bit_errors(0b010, 0b011), (0, 1));
        let q = Constellation::qpsk();
        assert_eq!(q.bit_errors(0b00, 0b11), (2, 0));
    }

    #[test]
    fn adaptive_policy() {
        let single = ThetaPolicy::new(vec![(-80.0, PI / 8.0)]).unwrap();
        assert_eq!(adaptive_theta(-200.0, &single), PI / 8.0);
        assert_eq!(adaptive_theta(10.0, &single), PI / 8.0);

        let table = ThetaPolicy::new(vec![(-95.0, PI / 30.0), (-80.0, PI / 8.0)]).unwrap();
        assert_eq!(adaptive_theta(-90.0, &table), PI / 30.0);
        assert_eq!(adaptive_theta(-70.0, &table), PI / 8.0);
        assert_eq!(adaptive_theta(-120.0, &table), PI / 30.0);

        assert!(ThetaPolicy::new(vec![]).is_err());
        assert!(ThetaPolicy::new(vec![(-80.0, 0.1), (-95.0, 0.2)]).is_err());
    }
}
