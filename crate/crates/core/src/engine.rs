//! Slot-level Monte Carlo engine.
//!
//! One trial moves `run.packets` packets from the source to the destination.
//! Every slot draws a gain for every link (source-relay links by relay
//! index, then relay-destination links, then the direct link), asks the
//! configured protocol for an action and executes it symbol by symbol.
//!
//! Each trial owns three independent ChaCha8 streams derived from its seed:
//! stream 0 for channel gains, stream 1 for noise and stream 2 for payload
//! bits. Two configurations run with the same seed therefore see the same
//! channel realization in every slot and the same payload for every packet
//! id, whatever their protocol.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelGain, Link};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::modem::{
    adaptive_theta, amplitude, demodulate, demodulate_combined, label_to_bits, transmit_symbol,
    Constellation, NoiseModel, ThetaPolicy,
};
use crate::protocol::{decide, decide_max_min, Action, ProtocolKind, RelayBuffer, SlotSnapshot, StoredPacket};

/// A source packet. Payload bits are carried as constellation labels; the
/// HP bits of a label are its high bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub labels: Vec<u8>,
    /// Slot at which the packet first left the source.
    pub birth_slot: u64,
    bits_per_symbol: usize,
}

impl Packet {
    pub fn new(id: u64, labels: Vec<u8>, bits_per_symbol: usize, birth_slot: u64) -> Self {
        Self {
            id,
            labels,
            birth_slot,
            bits_per_symbol,
        }
    }

    /// The two HP bits of every symbol, in symbol order.
    pub fn hp_bits(&self) -> Vec<u8> {
        let k = self.bits_per_symbol;
        self.labels
            .iter()
            .flat_map(|&l| label_to_bits(l, k).take(2))
            .collect()
    }

    /// The LP bits of every symbol (empty for QPSK).
    pub fn lp_bits(&self) -> Vec<u8> {
        let k = self.bits_per_symbol;
        self.labels
            .iter()
            .flat_map(|&l| label_to_bits(l, k).skip(2))
            .collect()
    }
}

/// Raw counters of one or more trials. Merging is plain addition, so pooled
/// results do not depend on the order trials finish in.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tally {
    pub packets: u64,
    pub trials: u64,
    pub decision_slots: u64,
    pub total_slots: u64,
    pub silent_slots: u64,
    pub hp_bits: u64,
    pub lp_bits: u64,
    pub hp_errors: u64,
    pub lp_errors: u64,
    /// Per-packet error counts and their squares, for standard errors.
    pub hp_err_sq: u64,
    pub lp_err_sq: u64,
    pub all_err_sq: u64,
    pub latency_sum: u64,
    pub occupancy: Vec<Vec<u64>>,
    /// Delay of each trial, in trial order.
    pub trial_delays: Vec<f64>,
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        self.packets += other.packets;
        self.trials += other.trials;
        self.decision_slots += other.decision_slots;
        self.total_slots += other.total_slots;
        self.silent_slots += other.silent_slots;
        self.hp_bits += other.hp_bits;
        self.lp_bits += other.lp_bits;
        self.hp_errors += other.hp_errors;
        self.lp_errors += other.lp_errors;
        self.hp_err_sq += other.hp_err_sq;
        self.lp_err_sq += other.lp_err_sq;
        self.all_err_sq += other.all_err_sq;
        self.latency_sum += other.latency_sum;
        if self.occupancy.len() < other.occupancy.len() {
            self.occupancy.resize(other.occupancy.len(), Vec::new());
        }
        for (mine, theirs) in self.occupancy.iter_mut().zip(&other.occupancy) {
            if mine.len() < theirs.len() {
                mine.resize(theirs.len(), 0);
            }
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.trial_delays.extend_from_slice(&other.trial_delays);
    }

    pub fn bit_errors(&self) -> u64 {
        self.hp_errors + self.lp_errors
    }

    fn record_packet(&mut self, hp_err: u64, lp_err: u64, hp_bits: u64, lp_bits: u64, latency: u64) {
        self.packets += 1;
        self.hp_bits += hp_bits;
        self.lp_bits += lp_bits;
        self.hp_errors += hp_err;
        self.lp_errors += lp_err;
        self.hp_err_sq += hp_err * hp_err;
        self.lp_err_sq += lp_err * lp_err;
        self.all_err_sq += (hp_err + lp_err) * (hp_err + lp_err);
        self.latency_sum += latency;
    }

    pub fn report(&self) -> MetricsReport {
        let k = self.packets.max(1) as f64;
        let ratio = |e: u64, b: u64| if b == 0 { 0.0 } else { e as f64 / b as f64 };
        // Packets are the independent units; bits within a packet are not.
        let se = |e: u64, sq: u64, b: u64| {
            if b == 0 || self.packets < 2 {
                return 0.0;
            }
            let n = self.packets as f64;
            let per_packet_bits = b as f64 / n;
            let mean = e as f64 / n;
            let var = (sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
            (var / n).sqrt() / per_packet_bits
        };
        let delay = self.total_slots as f64 / k;
        let se_delay = (self.trial_delays.len() >= 2).then(|| {
            let n = self.trial_delays.len() as f64;
            let mean = self.trial_delays.iter().sum::<f64>() / n;
            let var = self.trial_delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        let occupancy_histogram = self
            .occupancy
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter().map(|&c| ratio(c, total)).collect()
            })
            .collect();
        MetricsReport {
            ber_hp: ratio(self.hp_errors, self.hp_bits),
            ber_lp: ratio(self.lp_errors, self.lp_bits),
            ber_overall: ratio(self.bit_errors(), self.hp_bits + self.lp_bits),
            se_ber_hp: se(self.hp_errors, self.hp_err_sq, self.hp_bits),
            se_ber_lp: se(self.lp_errors, self.lp_err_sq, self.lp_bits),
            se_ber_overall: se(self.bit_errors(), self.all_err_sq, self.hp_bits + self.lp_bits),
            avg_system_delay: delay,
            se_delay,
            silent_fraction: ratio(self.silent_slots, self.decision_slots),
            occupancy_histogram,
            total_slots: self.total_slots,
            packets: self.packets,
            trials: self.trials,
            bit_errors: self.bit_errors(),
            mean_latency: self.latency_sum as f64 / k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ber_hp: f64,
    pub ber_lp: f64,
    pub ber_overall: f64,
    pub se_ber_hp: f64,
    pub se_ber_lp: f64,
    pub se_ber_overall: f64,
    /// Total slots divided by delivered packets.
    pub avg_system_delay: f64,
    /// Standard error across trials; absent for a single trial.
    pub se_delay: Option<f64>,
    /// Silent decisions over all decisions.
    pub silent_fraction: f64,
    /// Per relay, the fraction of slots that began with each occupancy `0..=L`.
    pub occupancy_histogram: Vec<Vec<f64>>,
    pub total_slots: u64,
    pub packets: u64,
    pub trials: u64,
    pub bit_errors: u64,
    /// Mean slots from a packet leaving the source to its delivery, inclusive.
    pub mean_latency: f64,
}

/// What happened in one decision slot, for observers.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEvent<'a> {
    pub slot: u64,
    pub action: Action,
    pub occupancy_before: &'a [usize],
    pub occupancy_after: &'a [usize],
    /// `(relay, packet id)` when a packet reached the destination through a relay.
    pub delivered: Option<(Option<usize>, u64)>,
}

/// Splits a master seed into per-trial seeds (SplitMix64 finalizer).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Symbol mapping for one hop. Fixed unless an adaptive table is configured.
struct Modulation {
    fixed: Constellation,
    adaptive: Option<(ThetaPolicy, Vec<(f64, Constellation)>)>,
}

impl Modulation {
    fn new(config: &SimConfig) -> Result<Self> {
        let fixed = config.constellation()?;
        let adaptive = match config.theta_policy()? {
            Some(policy) => {
                let cache = policy
                    .steps()
                    .iter()
                    .map(|&(_, t)| Ok((t, Constellation::hpsk8(t)?)))
                    .collect::<Result<Vec<_>>>()?;
                Some((policy, cache))
            }
            None => None,
        };
        Ok(Self { fixed, adaptive })
    }

    fn for_gain(&self, gain: &ChannelGain) -> &Constellation {
        match &self.adaptive {
            None => &self.fixed,
            Some((policy, cache)) => {
                let theta = adaptive_theta(gain.gain_db, policy);
                &cache.iter().find(|(t, _)| *t == theta).expect("cached theta").1
            }
        }
    }
}

fn check_feasible(config: &SimConfig) -> Result<()> {
    let kind = config.protocol.kind;
    let relays = config.topology.relays;
    let has_sd = config.topology.sd_distance_mm.is_some();
    if kind.is_single_relay() && relays != 1 {
        return Err(Error::invalid(
            "topology.relays",
            format!("{kind} needs exactly one relay, got {relays}"),
        ));
    }
    if kind != ProtocolKind::Direct && relays == 0 {
        return Err(Error::Infeasible(format!("{kind} with no relays")));
    }
    if matches!(kind, ProtocolKind::Direct | ProtocolKind::ModifiedProtocol1) && !has_sd {
        return Err(Error::Infeasible(format!(
            "{kind} needs a direct link (topology.sd_distance_mm)"
        )));
    }
    Ok(())
}

struct Trial<'a, F> {
    config: &'a SimConfig,
    sr: Vec<Link>,
    rd: Vec<Link>,
    sd: Option<Link>,
    noise: NoiseModel,
    modulation: Modulation,
    buffers: Vec<RelayBuffer>,
    originals: HashMap<u64, Packet>,
    channel_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    bits_rng: ChaCha8Rng,
    next_id: u64,
    clock: u64,
    delivered: Vec<bool>,
    delivered_count: u64,
    last_delivered: Vec<Option<u64>>,
    tally: Tally,
    observer: F,
}

struct Gains {
    sr: Vec<ChannelGain>,
    rd: Vec<ChannelGain>,
    sd: Option<ChannelGain>,
}

impl<'a, F: FnMut(&SlotEvent)> Trial<'a, F> {
    fn new(config: &'a SimConfig, seed: u64, observer: F) -> Result<Self> {
        config.validate()?;
        check_feasible(config)?;
        let relays = config.topology.relays;
        let sr = (0..relays).map(|n| config.sr_link(n)).collect::<Result<Vec<_>>>()?;
        let rd = (0..relays).map(|n| config.rd_link(n)).collect::<Result<Vec<_>>>()?;
        let capacity = config.protocol.buffer_size;
        let buffers = (0..relays)
            .map(|_| RelayBuffer::new(capacity))
            .collect::<Result<Vec<_>>>()?;
        let packets = config.run.packets;
        Ok(Self {
            config,
            sr,
            rd,
            sd: config.sd_link()?,
            noise: config.noise()?,
            modulation: Modulation::new(config)?,
            buffers,
            originals: HashMap::new(),
            channel_rng: stream(seed, 0),
            noise_rng: stream(seed, 1),
            bits_rng: stream(seed, 2),
            next_id: 0,
            clock: 0,
            delivered: vec![false; packets as usize],
            delivered_count: 0,
            last_delivered: vec![None; relays],
            tally: Tally {
                trials: 1,
                occupancy: vec![vec![0; capacity + 1]; relays],
                ..Tally::default()
            },
            observer,
        })
    }

    fn draw_gains(&mut self) -> Gains {
        let rng = &mut self.channel_rng;
        let sr = self.sr.iter().map(|l| l.draw(rng)).collect();
        let rd = self.rd.iter().map(|l| l.draw(rng)).collect();
        let sd = self.sd.as_ref().map(|l| l.draw(rng));
        Gains { sr, rd, sd }
    }

    fn snapshot(&self, g: &Gains) -> Result<SlotSnapshot> {
        let mode = self.config.protocol.quality_mode;
        let q = |links: &[Link], gains: &[ChannelGain]| -> Vec<f64> {
            links.iter().zip(gains).map(|(l, g)| l.quality(g, mode)).collect()
        };
        let q_sd = match (&self.sd, &g.sd) {
            (Some(l), Some(g)) => Some(l.quality(g, mode)),
            _ => None,
        };
        let snap = SlotSnapshot::new(
            q(&self.sr, &g.sr),
            q(&self.rd, &g.rd),
            q_sd,
            self.occupancies(),
            self.config.protocol.buffer_size,
            self.config.protocol.beta,
        )?;
        Ok(snap.with_source_backlog(self.next_id < self.config.run.packets))
    }

    fn occupancies(&self) -> Vec<usize> {
        self.buffers.iter().map(RelayBuffer::occupancy).collect()
    }

    /// Takes the head-of-source packet, generating its payload.
    fn take_source_packet(&mut self) -> Packet {
        let id = self.next_id;
        self.next_id += 1;
        let c = &self.modulation.fixed;
        let m = c.order() as u8;
        let labels = (0..self.config.run.symbols_per_packet)
            .map(|_| self.bits_rng.random_range(0..m))
            .collect();
        Packet::new(id, labels, c.bits_per_symbol(), self.clock)
    }

    /// Sends labels over one link and returns the hard decisions.
    fn hop(&mut self, labels: &[u8], tx_dbm: f64, gain: &ChannelGain) -> Vec<u8> {
        let c = self.modulation.for_gain(gain);
        let a = amplitude(tx_dbm, gain);
        labels
            .iter()
            .map(|&l| {
                let y = transmit_symbol(c.point(l), tx_dbm, gain, &self.noise, &mut self.noise_rng);
                demodulate(y, c, a)
            })
            .collect()
    }

    fn deliver(&mut self, id: u64, decided: &[u8], via: Option<usize>) -> Result<()> {
        let original = self
            .originals
            .remove(&id)
            .ok_or_else(|| Error::Invariant(format!("packet {id} delivered without a source record")))?;
        let slot = self.delivered.get_mut(id as usize).ok_or_else(|| {
            Error::Invariant(format!("packet id {id} outside 0..{}", self.config.run.packets))
        })?;
        if *slot {
            return Err(Error::Invariant(format!("packet {id} delivered twice")));
        }
        *slot = true;
        self.delivered_count += 1;
        if let Some(n) = via {
            if self.last_delivered[n].is_some_and(|last| last >= id) {
                return Err(Error::Invariant(format!("relay {n} broke FIFO order at packet {id}")));
            }
            self.last_delivered[n] = Some(id);
        }
        let c = &self.modulation.fixed;
        let (mut hp, mut lp) = (0u64, 0u64);
        for (&s, &d) in original.labels.iter().zip(decided) {
            let (h, l) = c.bit_errors(s, d);
            hp += h as u64;
            lp += l as u64;
        }
        let symbols = original.labels.len() as u64;
        let hp_bits = symbols * c.hp_bits_per_symbol() as u64;
        let lp_bits = symbols * c.lp_bits_per_symbol() as u64;
        let latency = self.clock + 1 - original.birth_slot;
        self.tally.record_packet(hp, lp, hp_bits, lp_bits, latency);
        Ok(())
    }

    fn end_slot(&mut self, action: Action, before: &[usize], delivered: Option<(Option<usize>, u64)>) {
        for (n, &o) in before.iter().enumerate() {
            self.tally.occupancy[n][o] += 1;
        }
        if action == Action::Silent {
            self.tally.silent_slots += 1;
        }
        self.tally.decision_slots += 1;
        let after = self.occupancies();
        (self.observer)(&SlotEvent {
            slot: self.clock,
            action,
            occupancy_before: before,
            occupancy_after: &after,
            delivered,
        });
        self.clock += 1 + self.config.run.control_overhead_slots;
    }

    fn slot_budget(&self) -> u64 {
        self.config.run.packets.saturating_mul(200).saturating_add(100_000)
    }

    fn run(mut self) -> Result<Tally> {
        let packets = self.config.run.packets;
        let budget = self.slot_budget();
        while self.delivered_count < packets {
            if self.tally.decision_slots >= budget {
                return Err(Error::Stalled {
                    slots: self.tally.decision_slots,
                    delivered: self.delivered_count,
                    packets,
                });
            }
            if self.config.protocol.kind == ProtocolKind::MaxMin {
                self.max_min_frame()?;
            } else {
                self.buffered_slot()?;
            }
        }
        if !self.buffers.iter().all(RelayBuffer::is_empty) || !self.originals.is_empty() {
            return Err(Error::Invariant("packets left in the network after delivery".into()));
        }
        self.tally.total_slots = self.clock;
        self.tally.trial_delays.push(self.clock as f64 / packets as f64);
        Ok(self.tally)
    }

    fn buffered_slot(&mut self) -> Result<()> {
        let gains = self.draw_gains();
        let snap = self.snapshot(&gains)?;
        let action = decide(self.config.protocol.kind, &snap)?;
        if !snap.is_feasible(action) {
            return Err(Error::Invariant(format!("infeasible action {action:?}")));
        }
        let before = snap.occupancies;
        let top = &self.config.topology;
        let (source_dbm, relay_dbm) = (top.source_dbm, top.relay_dbm);
        let mut delivered = None;
        match action {
            Action::Receive(n) => {
                let packet = self.take_source_packet();
                let decoded = self.hop(&packet.labels, source_dbm, &gains.sr[n]);
                self.buffers[n].push(StoredPacket {
                    id: packet.id,
                    labels: decoded,
                })?;
                self.originals.insert(packet.id, packet);
            }
            Action::Transmit(n) => {
                let stored = self.buffers[n]
                    .pop()
                    .ok_or_else(|| Error::Invariant(format!("transmit from empty relay {n}")))?;
                let decided = self.hop(&stored.labels, relay_dbm, &gains.rd[n]);
                self.deliver(stored.id, &decided, Some(n))?;
                delivered = Some((Some(n), stored.id));
            }
            Action::Direct => {
                let packet = self.take_source_packet();
                let gain = gains.sd.expect("direct action needs a direct link");
                let decided = self.hop(&packet.labels, source_dbm, &gain);
                let id = packet.id;
                self.originals.insert(id, packet);
                self.deliver(id, &decided, None)?;
                delivered = Some((None, id));
            }
            Action::Silent => {}
        }
        let after = self.occupancies();
        if before.iter().zip(&after).any(|(&b, &a)| b.abs_diff(a) > 1) {
            return Err(Error::Invariant("occupancy changed by more than one".into()));
        }
        self.end_slot(action, &before, delivered);
        Ok(())
    }

    /// Conventional decode-and-forward through the max-min relay: two slots
    /// under one channel realization, with error detection at the relay.
    fn max_min_frame(&mut self) -> Result<()> {
        let gains = self.draw_gains();
        // The second slot's draw keeps the channel stream aligned with the
        // buffered protocols; the frame itself sees a single realization.
        let _ = self.draw_gains();
        let snap = self.snapshot(&gains)?;
        let n = decide_max_min(&snap);
        let idle = vec![0; self.buffers.len()];
        let top = &self.config.topology;
        let (source_dbm, relay_dbm) = (top.source_dbm, top.relay_dbm);

        let packet = self.take_source_packet();
        let id = packet.id;
        let sr_gain = gains.sr[n];
        let relay_c = self.modulation.for_gain(&sr_gain).clone();
        let a_sr = amplitude(source_dbm, &sr_gain);
        let overheard: Option<(Vec<Complex64>, f64, Constellation)> = gains.sd.map(|g| {
            (Vec::with_capacity(packet.labels.len()), amplitude(source_dbm, &g), self.modulation.for_gain(&g).clone())
        });
        let mut overheard = overheard;
        let mut relay_decoded = Vec::with_capacity(packet.labels.len());
        for &l in &packet.labels {
            let y = transmit_symbol(relay_c.point(l), source_dbm, &sr_gain, &self.noise, &mut self.noise_rng);
            relay_decoded.push(demodulate(y, &relay_c, a_sr));
            if let (Some((samples, _, c)), Some(g)) = (overheard.as_mut(), gains.sd.as_ref()) {
                samples.push(transmit_symbol(c.point(l), source_dbm, g, &self.noise, &mut self.noise_rng));
            }
        }
        self.end_slot(Action::Receive(n), &idle, None);

        let crc_ok = relay_decoded == packet.labels;
        let rd_gain = gains.rd[n];
        let decided: Vec<u8> = if crc_ok {
            let c = self.modulation.for_gain(&rd_gain).clone();
            let a_rd = amplitude(relay_dbm, &rd_gain);
            let mut out = Vec::with_capacity(packet.labels.len());
            for (i, &l) in packet.labels.iter().enumerate() {
                let y = transmit_symbol(c.point(l), relay_dbm, &rd_gain, &self.noise, &mut self.noise_rng);
                out.push(match &overheard {
                    // Both hops use the same mapping unless an adaptive table
                    // picked different angles; then fall back to the relay look.
                    Some((samples, a_sd, c_sd)) if c_sd == &c => {
                        demodulate_combined(&[(y, a_rd), (samples[i], *a_sd)], &c)
                    }
                    _ => demodulate(y, &c, a_rd),
                });
            }
            out
        } else {
            match &overheard {
                Some((samples, a_sd, c_sd)) => samples.iter().map(|&y| demodulate(y, c_sd, *a_sd)).collect(),
                None => {
                    let m = self.modulation.fixed.order() as u8;
                    (0..packet.labels.len()).map(|_| self.noise_rng.random_range(0..m)).collect()
                }
            }
        };
        self.originals.insert(id, packet);
        let second = if crc_ok { Action::Transmit(n) } else { Action::Silent };
        self.deliver(id, &decided, if crc_ok { Some(n) } else { None })?;
        self.end_slot(second, &idle, Some((crc_ok.then_some(n), id)));
        Ok(())
    }
}

/// Runs one trial with an explicit seed.
pub fn run_trial(config: &SimConfig, seed: u64) -> Result<MetricsReport> {
    Ok(run_trial_tally(config, seed)?.report())
}

pub fn run_trial_tally(config: &SimConfig, seed: u64) -> Result<Tally> {
    Trial::new(config, seed, |_: &SlotEvent| {})?.run()
}

/// Runs one trial and calls `observer` after every decision slot.
pub fn run_trial_observed(
    config: &SimConfig,
    seed: u64,
    observer: impl FnMut(&SlotEvent),
) -> Result<Tally> {
    Trial::new(config, seed, observer)?.run()
}

/// Runs `run.trials` trials on the global rayon pool.
pub fn run_simulation(config: &SimConfig) -> Result<MetricsReport> {
    Ok(simulate(config, None)?.report())
}

/// Same as [`run_simulation`] on a dedicated pool of `workers` threads.
pub fn run_simulation_with_workers(config: &SimConfig, workers: usize) -> Result<MetricsReport> {
    Ok(simulate(config, Some(workers))?.report())
}

/// Pooled counters behind [`run_simulation`].
///
/// When `run.min_bit_errors` is positive, further batches of `run.trials`
/// trials are appended until the pooled error count reaches it or the packet
/// count would exceed `run.max_packets`.
pub fn simulate(config: &SimConfig, workers: Option<usize>) -> Result<Tally> {
    config.validate()?;
    check_feasible(config)?;
    let pool = match workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Usage(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let batch = config.run.trials as u64;
    let run_batch = |start: u64| -> Result<Vec<Tally>> {
        let work = || {
            (start..start + batch)
                .into_par_iter()
                .map(|t| run_trial_tally(config, trial_seed(config.run.seed, t)))
                .collect::<Result<Vec<_>>>()
        };
        match &pool {
            Some(p) => p.install(work),
            None => work(),
        }
    };
    let mut total = Tally::default();
    let mut next = 0u64;
    loop {
        for t in run_batch(next)? {
            total.merge(&t);
        }
        next += batch;
        let enough = total.bit_errors() >= config.run.min_bit_errors;
        let room = total.packets + batch * config.run.packets <= config.run.max_packets;
        if enough || !room {
            break;
        }
    }
    Ok(total)
}

/// Parameter varied by [`run_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SourcePower,
    Beta,
    BufferSize,
    Theta2,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SourcePower => "source_power",
            SweepAxis::Beta => "beta",
            SweepAxis::BufferSize => "buffer_size",
            SweepAxis::Theta2 => "theta2",
        }
    }

    /// Returns a copy of `config` with the axis set to `value`.
    pub fn apply(self, config: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = config.clone();
        match self {
            SweepAxis::SourcePower => c.topology.source_dbm = value,
            SweepAxis::Beta => c.protocol.beta = value,
            SweepAxis::BufferSize => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::invalid("protocol.buffer_size", format!("{value} is not a positive integer")));
                }
                c.protocol.buffer_size = value as usize;
            }
            SweepAxis::Theta2 => {
                c.modem.theta2 = value;
                if c.modem.order != 8 {
                    c.modem.order = 8;
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "source_power" => Ok(SweepAxis::SourcePower),
            "beta" => Ok(SweepAxis::Beta),
            "buffer_size" => Ok(SweepAxis::BufferSize),
            "theta2" => Ok(SweepAxis::Theta2),
            other => Err(Error::Usage(format!(
                "unknown sweep axis `{other}` (source_power, beta, buffer_size, theta2)"
            ))),
        }
    }
}

/// One simulation per value, in input order. All values are validated
/// before any simulation starts.
pub fn run_sweep(
    config: &SimConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(f64, MetricsReport)>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    values
        .iter()
        .zip(&configs)
        .map(|(&v, c)| Ok((v, run_simulation(c)?)))
        .collect()
}
