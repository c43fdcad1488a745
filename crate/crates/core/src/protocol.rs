//! Link and relay selection rules.
//!
//! Every rule is a pure function of a [`SlotSnapshot`]. A source-to-relay
//! link is *available* when the relay buffer has room and the source still
//! has a packet to send; a relay-to-destination link is available when the
//! buffer is not empty. Relay-to-destination qualities are always weighted
//! by the decision threshold `beta` before comparison.
//!
//! Ties between equal weights resolve to reception over transmission, then
//! to the lowest relay index.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Single relay, threshold comparison, silent slots at empty/full buffer.
    Protocol1,
    /// Protocol 1 with forced reception at empty and forced transmission at full.
    #[serde(rename = "protocol1_star")]
    Protocol1Star,
    /// Single relay plus a direct link; strongest link wins.
    #[serde(rename = "modified_protocol1")]
    ModifiedProtocol1,
    /// Bufferless best-relay baseline with error detection at the relay.
    MaxMin,
    /// Max-all-link: global best link, silent when infeasible.
    Protocol2,
    /// Max-link: best among available links.
    #[serde(rename = "modified_protocol2")]
    ModifiedProtocol2,
    /// No cooperation: every packet goes over the direct link.
    Direct,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 7] = [
        ProtocolKind::Protocol1,
        ProtocolKind::Protocol1Star,
        ProtocolKind::ModifiedProtocol1,
        ProtocolKind::MaxMin,
        ProtocolKind::Protocol2,
        ProtocolKind::ModifiedProtocol2,
        ProtocolKind::Direct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Protocol1 => "protocol1",
            ProtocolKind::Protocol1Star => "protocol1_star",
            ProtocolKind::ModifiedProtocol1 => "modified_protocol1",
            ProtocolKind::MaxMin => "max_min",
            ProtocolKind::Protocol2 => "protocol2",
            ProtocolKind::ModifiedProtocol2 => "modified_protocol2",
            ProtocolKind::Direct => "direct",
        }
    }

    /// Protocols that route every packet through a relay buffer.
    pub fn is_buffered(self) -> bool {
        !matches!(self, ProtocolKind::MaxMin | ProtocolKind::Direct)
    }

    pub fn is_single_relay(self) -> bool {
        matches!(
            self,
            ProtocolKind::Protocol1 | ProtocolKind::Protocol1Star | ProtocolKind::ModifiedProtocol1
        )
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::invalid("protocol.kind", format!("unknown protocol `{s}`")))
    }
}

/// What the selection rules compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// Shadowing realization only (gain normalized by mean path loss).
    #[default]
    Fading,
    /// Absolute linear channel gain.
    Absolute,
}

/// A packet held by a relay: the source id and the hard-decided labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPacket {
    pub id: u64,
    pub labels: Vec<u8>,
}

/// FIFO relay buffer with a hard capacity.
#[derive(Debug, Clone)]
pub struct RelayBuffer {
    capacity: usize,
    queue: VecDeque<StoredPacket>,
}

impl RelayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer_size", "must be at least 1"));
        }
        Ok(Self {
            capacity,
            queue: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> usize {
        self.queue.len()
    }

    pub fn is_full(&self) -> bool {
        self.queue.len() == self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn push(&mut self, packet: StoredPacket) -> Result<()> {
        if self.is_full() {
            return Err(Error::Invariant(format!(
                "push of packet {} into full buffer (capacity {})",
                packet.id, self.capacity
            )));
        }
        self.queue.push_back(packet);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<StoredPacket> {
        self.queue.pop_front()
    }
}

/// Everything a selection rule may look at in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSnapshot {
    pub q_sr: Vec<f64>,
    pub q_rd: Vec<f64>,
    pub q_sd: Option<f64>,
    pub occupancies: Vec<usize>,
    pub capacity: usize,
    pub beta: f64,
    /// Whether the source still holds an unsent packet.
    pub source_backlog: bool,
}

impl SlotSnapshot {
    pub fn new(
        q_sr: Vec<f64>,
        q_rd: Vec<f64>,
        q_sd: Option<f64>,
        occupancies: Vec<usize>,
        capacity: usize,
        beta: f64,
    ) -> Result<Self> {
        let snapshot = Self {
            q_sr,
            q_rd,
            q_sd,
            occupancies,
            capacity,
            beta,
            source_backlog: true,
        };
        snapshot.validate()?;
        Ok(snapshot)
    }

    pub fn with_source_backlog(mut self, backlog: bool) -> Self {
        self.source_backlog = backlog;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q_sr.len();
        if self.q_rd.len() != n || self.occupancies.len() != n {
            return Err(Error::invalid("snapshot", "per-relay vectors differ in length"));
        }
        let positive = |q: f64| q > 0.0 && q.is_finite();
        if !self.q_sr.iter().chain(&self.q_rd).copied().all(positive)
            || self.q_sd.is_some_and(|q| !positive(q))
        {
            return Err(Error::invalid("snapshot", "qualities must be positive and finite"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive"));
        }
        if self.capacity == 0 || self.occupancies.iter().any(|&o| o > self.capacity) {
            return Err(Error::invalid("snapshot", "occupancy outside [0, capacity]"));
        }
        Ok(())
    }

    pub fn relays(&self) -> usize {
        self.q_sr.len()
    }

    pub fn sr_available(&self, n: usize) -> bool {
        self.source_backlog && self.occupancies[n] < self.capacity
    }

    pub fn rd_available(&self, n: usize) -> bool {
        self.occupancies[n] > 0
    }

    fn rd_weight(&self, n: usize) -> f64 {
        self.beta * self.q_rd[n]
    }

    /// Whether `action` respects buffer state and source backlog.
    pub fn is_feasible(&self, action: Action) -> bool {
        match action {
            Action::Receive(n) => n < self.relays() && self.sr_available(n),
            Action::Transmit(n) => n < self.relays() && self.rd_available(n),
            Action::Direct => self.q_sd.is_some() && self.source_backlog,
            Action::Silent => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Source transmits to relay `n`.
    Receive(usize),
    /// Relay `n` transmits its head packet to the destination.
    Transmit(usize),
    /// Source transmits straight to the destination.
    Direct,
    Silent,
}

fn require_single_relay(s: &SlotSnapshot) -> Result<()> {
    if s.relays() != 1 {
        return Err(Error::invalid(
            "topology.relays",
            format!("single-relay protocol needs exactly 1 relay, got {}", s.relays()),
        ));
    }
    Ok(())
}

pub fn decide_protocol1(s: &SlotSnapshot) -> Result<Action> {
    require_single_relay(s)?;
    let sr_wins = s.q_sr[0] >= s.rd_weight(0);
    Ok(match (s.sr_available(0), s.rd_available(0)) {
        (true, true) => {
            if sr_wins {
                Action::Receive(0)
            } else {
                Action::Transmit(0)
            }
        }
        (true, false) if sr_wins => Action::Receive(0),
        (false, true) if !sr_wins => Action::Transmit(0),
        _ => Action::Silent,
    })
}

pub fn decide_protocol1_star(s: &SlotSnapshot) -> Result<Action> {
    require_single_relay(s)?;
    Ok(match (s.sr_available(0), s.rd_available(0)) {
        (true, true) => {
            if s.q_sr[0] >= s.rd_weight(0) {
                Action::Receive(0)
            } else {
                Action::Transmit(0)
            }
        }
        (true, false) => Action::Receive(0),
        (false, true) => Action::Transmit(0),
        (false, false) => Action::Silent,
    })
}

/// Strongest of direct, source-to-relay and weighted relay-to-destination
/// links. If the strongest one cannot be used this slot, the slot is silent.
/// Equal weights prefer the direct link, then reception.
pub fn decide_modified_protocol1(s: &SlotSnapshot) -> Result<Action> {
    require_single_relay(s)?;
    let q_sd = s
        .q_sd
        .ok_or_else(|| Error::invalid("topology.sd_distance_mm", "direct link quality missing"))?;
    let candidates = [
        (Action::Direct, q_sd),
        (Action::Receive(0), s.q_sr[0]),
        (Action::Transmit(0), s.rd_weight(0)),
    ];
    let best = first_max(candidates.into_iter()).expect("three candidates");
    Ok(if s.is_feasible(best) { best } else { Action::Silent })
}

/// Index of the relay maximizing `min(q_sr, q_rd)`; lowest index on ties.
pub fn decide_max_min(s: &SlotSnapshot) -> usize {
    let mut best = 0;
    let mut best_min = f64::NEG_INFINITY;
    for n in 0..s.relays() {
        let m = s.q_sr[n].min(s.q_rd[n]);
        if m > best_min {
            best = n;
            best_min = m;
        }
    }
    best
}

/// All weighted links in tie-break priority order: every source-to-relay
/// link first, then every relay-to-destination link, each by relay index.
fn weighted_links(s: &SlotSnapshot) -> impl Iterator<Item = (Action, f64)> + '_ {
    let sr = (0..s.relays()).map(|n| (Action::Receive(n), s.q_sr[n]));
    let rd = (0..s.relays()).map(|n| (Action::Transmit(n), s.rd_weight(n)));
    sr.chain(rd)
}

fn first_max(links: impl Iterator<Item = (Action, f64)>) -> Option<Action> {
    let mut best: Option<(Action, f64)> = None;
    for (action, w) in links {
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((action, w));
        }
    }
    best.map(|(a, _)| a)
}

pub fn decide_protocol2(s: &SlotSnapshot) -> Action {
    match first_max(weighted_links(s)) {
        Some(a) if s.is_feasible(a) => a,
        _ => Action::Silent,
    }
}

pub fn decide_modified_protocol2(s: &SlotSnapshot) -> Action {
    first_max(weighted_links(s).filter(|&(a, _)| s.is_feasible(a))).unwrap_or(Action::Silent)
}

/// Dispatches to the rule for `kind`. The max-min baseline is mapped to
/// reception at its selected relay; its two-slot schedule lives in the engine.
pub fn decide(kind: ProtocolKind, s: &SlotSnapshot) -> Result<Action> {
    match kind {
        ProtocolKind::Protocol1 => decide_protocol1(s),
        ProtocolKind::Protocol1Star => decide_protocol1_star(s),
        ProtocolKind::ModifiedProtocol1 => decide_modified_protocol1(s),
        ProtocolKind::MaxMin => Ok(Action::Receive(decide_max_min(s))),
        ProtocolKind::Protocol2 => Ok(decide_protocol2(s)),
        ProtocolKind::ModifiedProtocol2 => Ok(decide_modified_protocol2(s)),
        ProtocolKind::Direct => Ok(if s.is_feasible(Action::Direct) {
            Action::Direct
        } else {
            Action::Silent
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(occ: usize, q_sr: f64, q_rd: f64) -> SlotSnapshot {
        SlotSnapshot::new(vec![q_sr], vec![q_rd], None, vec![occ], 10, 0.2).unwrap()
    }

    #[test]
    fn protocol1_rules() {
        assert_eq!(decide_protocol1(&single(5, 0.5, 1.0)).unwrap(), Action::Receive(0));
        assert_eq!(decide_protocol1(&single(0, 0.1, 1.0)).unwrap(), Action::Silent);
        assert_eq!(decide_protocol1(&single(10, 0.1, 1.0)).unwrap(), Action::Transmit(0));
        assert_eq!(decide_protocol1(&single(10, 0.5, 1.0)).unwrap(), Action::Silent);
        assert_eq!(decide_protocol1(&single(5, 0.1, 1.0)).unwrap(), Action::Transmit(0));
        // Equality resolves to reception.
        assert_eq!(decide_protocol1(&single(5, 0.25, 1.25)).unwrap(), Action::Receive(0));
    }

    #[test]
    fn protocol1_star_rules() {
        assert_eq!(decide_protocol1_star(&single(0, 0.01, 9.0)).unwrap(), Action::Receive(0));
        assert_eq!(decide_protocol1_star(&single(10, 9.0, 0.01)).unwrap(), Action::Transmit(0));
        assert_eq!(decide_protocol1_star(&single(3, 0.1, 1.0)).unwrap(), Action::Transmit(0));
    }

    #[test]
    fn single_relay_rules_reject_multi_relay() {
        let s = SlotSnapshot::new(vec![1.0, 1.0], vec![1.0, 1.0], Some(1.0), vec![0, 0], 10, 0.2)
            .unwrap();
        assert!(decide_protocol1(&s).is_err());
        assert!(decide_protocol1_star(&s).is_err());
        assert!(decide_modified_protocol1(&s).is_err());
    }

    #[test]
    fn exhausted_source_behaves_like_full_buffer() {
        let s = single(4, 0.1, 1.0).with_source_backlog(false);
        assert_eq!(decide_protocol1(&s).unwrap(), Action::Transmit(0));
        let s = single(4, 0.9, 1.0).with_source_backlog(false);
        assert_eq!(decide_protocol1(&s).unwrap(), Action::Silent);
        assert_eq!(decide_protocol1_star(&s).unwrap(), Action::Transmit(0));
    }

    #[test]
    fn modified_protocol1_rules() {
        let s = |occ, sd, sr, rd| {
            SlotSnapshot::new(vec![sr], vec![rd], Some(sd), vec![occ], 10, 0.2).unwrap()
        };
        assert_eq!(decide_modified_protocol1(&s(4, 3.0, 1.0, 1.0)).unwrap(), Action::Direct);
        assert_eq!(decide_modified_protocol1(&s(0, 0.1, 0.1, 5.0)).unwrap(), Action::Silent);
        assert_eq!(decide_modified_protocol1(&s(4, 0.1, 0.9, 1.0)).unwrap(), Action::Receive(0));
        assert_eq!(decide_modified_protocol1(&s(4, 0.1, 0.1, 5.0)).unwrap(), Action::Transmit(0));
        assert_eq!(decide_modified_protocol1(&s(10, 0.1, 0.9, 1.0)).unwrap(), Action::Silent);
        let missing = single(4, 1.0, 1.0);
        assert!(decide_modified_protocol1(&missing).is_err());
    }

    #[test]
    fn max_min_rules() {
        let s = SlotSnapshot::new(vec![0.3, 0.9], vec![0.8, 0.5], None, vec![0, 0], 10, 0.2)
            .unwrap();
        assert_eq!(decide_max_min(&s), 1);
        let s = SlotSnapshot::new(vec![0.5, 0.9], vec![0.8, 0.5], None, vec![0, 0], 10, 0.2)
            .unwrap();
        assert_eq!(decide_max_min(&s), 0);
        assert_eq!(decide_max_min(&single(3, 0.01, 0.01)), 0);
    }

    #[test]
    fn protocol2_rules() {
        // All empty and a relay-to-destination link is the strongest: idle.
        let s = SlotSnapshot::new(vec![0.1, 0.1], vec![1.0, 2.0], None, vec![0, 0], 10, 0.2)
            .unwrap();
        assert_eq!(decide_protocol2(&s), Action::Silent);
        let s = SlotSnapshot::new(vec![0.1, 0.9], vec![1.0, 2.0], None, vec![3, 3], 10, 0.2)
            .unwrap();
        assert_eq!(decide_protocol2(&s), Action::Receive(1));
        // Tie between an SR link and an RD link goes to the SR link.
        let s = SlotSnapshot::new(vec![0.2, 0.1], vec![1.0, 0.5], None, vec![3, 3], 10, 0.2)
            .unwrap();
        assert_eq!(decide_protocol2(&s), Action::Receive(0));
        // Tie between equal SR links goes to the lower index.
        let s = SlotSnapshot::new(vec![0.7, 0.7], vec![1.0, 0.5], None, vec![3, 3], 10, 0.2)
            .unwrap();
        assert_eq!(decide_protocol2(&s), Action::Receive(0));
    }

    #[test]
    fn modified_protocol2_rules() {
        let s = SlotSnapshot::new(vec![0.1, 0.4], vec![9.0, 9.0], None, vec![0, 0], 10, 0.2)
            .unwrap();
        assert_eq!(decide_modified_protocol2(&s), Action::Receive(1));
        let s = SlotSnapshot::new(vec![9.0, 9.0], vec![1.0, 2.0], None, vec![10, 10], 10, 0.2)
            .unwrap();
        assert_eq!(decide_modified_protocol2(&s), Action::Transmit(1));
        let s = SlotSnapshot::new(vec![0.4, 0.1], vec![1.0, 3.0], None, vec![0, 10], 10, 0.2)
            .unwrap();
        assert_eq!(decide_modified_protocol2(&s), Action::Transmit(1));
    }

    #[test]
    fn snapshot_validation() {
        assert!(SlotSnapshot::new(vec![0.0], vec![1.0], None, vec![0], 10, 0.2).is_err());
        assert!(SlotSnapshot::new(vec![1.0], vec![1.0], None, vec![11], 10, 0.2).is_err());
        assert!(SlotSnapshot::new(vec![1.0], vec![1.0], None, vec![0], 10, -1.0).is_err());
        assert!(SlotSnapshot::new(vec![1.0], vec![1.0, 2.0], None, vec![0], 10, 0.2).is_err());
    }

    #[test]
    fn buffer_fifo() {
        let mut b = RelayBuffer::new(2).unwrap();
        assert!(RelayBuffer::new(0).is_err());
        b.push(StoredPacket { id: 1, labels: vec![] }).unwrap();
        b.push(StoredPacket { id: 2, labels: vec![] }).unwrap();
        assert!(b.is_full());
        assert!(b.push(StoredPacket { id: 3, labels: vec![] }).is_err());
        assert_eq!(b.pop().unwrap().id, 1);
        assert_eq!(b.pop().unwrap().id, 2);
        assert!(b.pop().is_none());
    }

    #[test]
    fn protocol_names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("protocol3".parse::<ProtocolKind>().is_err());
    }
}
