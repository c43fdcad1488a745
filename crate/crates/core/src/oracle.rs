//! Analytical references for the simulator.
//!
//! * Error rates: Gray-QPSK closed form, exact conditional bit error rates
//!   for any unit-circle constellation via decision-wedge probabilities, and
//!   Gauss-Hermite averaging over lognormal shadowing.
//! * Buffer dynamics: exact Markov chains of relay occupancy under i.i.d.
//!   block fading, for the single-relay rules and (by enumeration) for the
//!   multi-relay max-link rules.

use std::collections::VecDeque;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::channel::{db_to_linear, normal_cdf};
use crate::error::{Error, Result};
use crate::modem::Constellation;
use crate::protocol::ProtocolKind;

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Coherent Gray-QPSK bit error rate at per-bit SNR `gamma_b` (linear).
pub fn qpsk_ber(gamma_b: f64) -> f64 {
    q_function((2.0 * gamma_b.max(0.0)).sqrt())
}

/// Nodes and weights for `integral f(x) exp(-x^2) dx`, by Newton iteration
/// on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * total
}

/// Probability that the received phase lies in `(psi, pi)` for a symbol on
/// the positive real axis at symbol SNR `gamma_s`, `0 <= psi <= pi`.
/// Uses the single-integral form `(1/2pi) int_0^{pi-psi} exp(-g sin^2 psi / sin^2 phi) dphi`.
fn phase_tail(gamma_s: f64, psi: f64) -> f64 {
    let psi = psi.clamp(0.0, PI);
    let upper = PI - psi;
    if upper <= 0.0 {
        return 0.0;
    }
    let c = gamma_s * psi.sin().powi(2);
    let f = |phi: f64| {
        let s = phi.sin();
        if s <= 0.0 {
            0.0
        } else {
            (-c / (s * s)).exp()
        }
    };
    integrate(f, 0.0, upper, 64, 16) / (2.0 * PI)
}

/// Probability that the received phase, measured relative to the symbol,
/// falls in `[lo, hi]` (radians, `-pi <= lo < hi <= pi`).
pub fn wedge_probability(gamma_s: f64, lo: f64, hi: f64) -> f64 {
    // P(theta > a) for a in [-pi, pi] by symmetry of the phase density.
    let above = |a: f64| {
        if a >= 0.0 {
            phase_tail(gamma_s, a)
        } else {
            1.0 - phase_tail(gamma_s, -a)
        }
    };
    (above(lo) - above(hi)).max(0.0)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Which bits a bit error rate is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitClass {
    Hp,
    Lp,
    Overall,
}

/// Exact conditional bit error rate of coherent minimum-distance detection
/// at symbol SNR `gamma_s` (linear), averaged over equiprobable symbols.
///
/// All points lie on the unit circle, so each decision region is the wedge
/// between the angular bisectors with its two neighbours; the error rate is
/// assembled from wedge probabilities weighted by label distance.
pub fn conditional_ber(constellation: &Constellation, gamma_s: f64, class: BitClass) -> f64 {
    let points = constellation.points();
    let m = points.len();
    let bits = match class {
        BitClass::Hp => constellation.hp_bits_per_symbol(),
        BitClass::Lp => constellation.lp_bits_per_symbol(),
        BitClass::Overall => constellation.bits_per_symbol(),
    };
    if bits == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..m).collect();
    let angle = |i: usize| points[i].arg().rem_euclid(2.0 * PI);
    order.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
    // Wedge of order[k]: from bisector with predecessor to bisector with successor.
    let wedges: Vec<(usize, f64, f64)> = (0..m)
        .map(|k| {
            let cur = angle(order[k]);
            let prev = angle(order[(k + m - 1) % m]);
            let next = angle(order[(k + 1) % m]);
            let gap_prev = (cur - prev).rem_euclid(2.0 * PI);
            let gap_next = (next - cur).rem_euclid(2.0 * PI);
            (order[k], cur - gap_prev / 2.0, cur + gap_next / 2.0)
        })
        .collect();
    let mut total = 0.0;
    for sent in 0..m {
        let origin = angle(sent);
        for &(decided, lo, hi) in &wedges {
            if decided == sent {
                continue;
            }
            let (hp, lp) = constellation.bit_errors(sent as u8, decided as u8);
            let distance = match class {
                BitClass::Hp => hp,
                BitClass::Lp => lp,
                BitClass::Overall => hp + lp,
            };
            if distance == 0 {
                continue;
            }
            let lo_rel = wrap_angle(lo - origin);
            let width = hi - lo;
            let prob = if lo_rel + width <= PI {
                wedge_probability(gamma_s, lo_rel, lo_rel + width)
            } else {
                wedge_probability(gamma_s, lo_rel, PI)
                    + wedge_probability(gamma_s, -PI, lo_rel + width - 2.0 * PI)
            };
            total += prob * distance as f64;
        }
    }
    total / (m as f64 * bits as f64)
}

/// Conditional error rate used by [`avg_ber_lognormal`]: the Gray-QPSK
/// closed form for four points, wedge integration otherwise.
pub fn link_ber(constellation: &Constellation, gamma_s: f64, class: BitClass) -> f64 {
    if constellation.order() == 4 {
        match class {
            BitClass::Lp => 0.0,
            _ => qpsk_ber(gamma_s / 2.0),
        }
    } else {
        conditional_ber(constellation, gamma_s, class)
    }
}

pub const DEFAULT_HERMITE_NODES: usize = 64;

/// Bit error rate averaged over Gaussian (dB-domain) shadowing of the
/// symbol SNR, by `nodes`-point Gauss-Hermite quadrature.
pub fn avg_ber_lognormal(
    constellation: &Constellation,
    mean_snr_db: f64,
    sigma_db: f64,
    class: BitClass,
    nodes: usize,
) -> Result<f64> {
    if !(sigma_db >= 0.0) {
        return Err(Error::invalid("sigma_db", "must be non-negative"));
    }
    if sigma_db == 0.0 {
        return Ok(link_ber(constellation, db_to_linear(mean_snr_db), class));
    }
    let (x, w) = gauss_hermite(nodes);
    let sum: f64 = x
        .iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let snr_db = mean_snr_db + SQRT_2 * sigma_db * xi;
            wi * link_ber(constellation, db_to_linear(snr_db), class)
        })
        .sum();
    Ok(sum / PI.sqrt())
}

/// Occupancy chain of one or more relay buffers.
///
/// States are occupancy vectors; `silent[s]` is the probability that a slot
/// spent in state `s` carries no transmission.
#[derive(Debug, Clone)]
pub struct BufferChain {
    states: Vec<Vec<usize>>,
    transition: DMatrix<f64>,
    silent: Vec<f64>,
    p: Option<f64>,
}

impl BufferChain {
    /// Builds a chain from raw parts after checking it is row-stochastic.
    pub fn from_parts(
        states: Vec<Vec<usize>>,
        transition: DMatrix<f64>,
        silent: Vec<f64>,
        p: Option<f64>,
    ) -> Result<Self> {
        let n = states.len();
        if transition.nrows() != n || transition.ncols() != n || silent.len() != n {
            return Err(Error::invalid("chain", "dimension mismatch"));
        }
        for (i, row) in transition.row_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::invalid("chain", format!("negative entry in row {i}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("chain", format!("row {i} sums to {sum}")));
            }
        }
        if silent.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::invalid("chain", "silent probabilities outside [0, 1]"));
        }
        Ok(Self {
            states,
            transition,
            silent,
            p,
        })
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn silent(&self) -> &[f64] {
        &self.silent
    }

    /// Source-to-relay win probability for single-relay chains.
    pub fn p(&self) -> Option<f64> {
        self.p
    }

    pub fn is_irreducible(&self) -> bool {
        let n = self.states.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..n {
                    let v = if forward {
                        self.transition[(i, j)]
                    } else {
                        self.transition[(j, i)]
                    };
                    if v > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        n > 0 && reach(true) && reach(false)
    }

    /// Marginal occupancy distribution of relay `relay` under `pi`.
    pub fn marginal(&self, pi: &[f64], relay: usize, capacity: usize) -> Vec<f64> {
        let mut out = vec![0.0; capacity + 1];
        for (state, &mass) in self.states.iter().zip(pi) {
            out[state[relay]] += mass;
        }
        out
    }
}

/// Single-relay chain for Protocol 1 or Protocol 1*, where `p` is the
/// probability the source-to-relay link wins the comparison.
pub fn build_chain(kind: ProtocolKind, capacity: usize, p: f64) -> Result<BufferChain> {
    if capacity < 1 {
        return Err(Error::invalid("buffer_size", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    let forced = match kind {
        ProtocolKind::Protocol1 => false,
        ProtocolKind::Protocol1Star => true,
        other => {
            return Err(Error::invalid(
                "protocol.kind",
                format!("no single-relay chain for {other}"),
            ))
        }
    };
    let n = capacity + 1;
    let mut t = DMatrix::zeros(n, n);
    let mut silent = vec![0.0; n];
    for i in 0..n {
        if i == 0 {
            if forced {
                t[(0, 1)] = 1.0;
            } else {
                t[(0, 1)] = p;
                t[(0, 0)] += 1.0 - p;
                silent[0] = 1.0 - p;
            }
        } else if i == capacity {
            if forced {
                t[(i, i - 1)] = 1.0;
            } else {
                t[(i, i - 1)] = 1.0 - p;
                t[(i, i)] += p;
                silent[i] = p;
            }
        } else {
            t[(i, i + 1)] = p;
            t[(i, i - 1)] = 1.0 - p;
        }
    }
    BufferChain::from_parts((0..n).map(|i| vec![i]).collect(), t, silent, Some(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDelay {
    pub avg_system_delay: f64,
    pub silent_probability: f64,
    pub stationary: Vec<f64>,
}

/// Stationary analysis: every delivered packet costs exactly two productive
/// slots, so the delay is `2 / (1 - P(silent))`.
pub fn chain_delay(chain: &BufferChain) -> Result<ChainDelay> {
    if !chain.is_irreducible() {
        return Err(Error::ReducibleChain);
    }
    let stationary = stationary_distribution(&chain.transition)?;
    let silent_probability: f64 = stationary.iter().zip(&chain.silent).map(|(a, b)| a * b).sum();
    Ok(ChainDelay {
        avg_system_delay: 2.0 / (1.0 - silent_probability),
        silent_probability,
        stationary,
    })
}

fn stationary_distribution(t: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = t.nrows();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = t.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Invariant("singular stationary system".into()))?;
    Ok(pi.iter().map(|&v| v.max(0.0)).collect())
}

/// A link's quality in dB as seen by the selection rule: Gaussian with the
/// given mean (already including the `beta` weight for relay-to-destination
/// links) and spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLink {
    pub mean_db: f64,
    pub sigma_db: f64,
}

/// Probability that each candidate has the largest quality among the set.
/// Earlier candidates win exact ties (only relevant without shadowing).
pub fn max_link_probabilities(candidates: &[GaussianLink]) -> Vec<f64> {
    if candidates.is_empty() {
        return Vec::new();
    }
    if candidates.iter().all(|c| c.sigma_db == 0.0) {
        let best = candidates
            .iter()
            .enumerate()
            .fold(0, |b, (i, c)| if c.mean_db > candidates[b].mean_db { i } else { b });
        let mut out = vec![0.0; candidates.len()];
        out[best] = 1.0;
        return out;
    }
    let cdf = |c: &GaussianLink, x: f64| {
        if c.sigma_db == 0.0 {
            if x >= c.mean_db {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf((x - c.mean_db) / c.sigma_db)
        }
    };
    let mut out: Vec<f64> = candidates
        .iter()
        .enumerate()
        .map(|(j, cj)| {
            if cj.sigma_db == 0.0 {
                // Point mass: all others must fall below it.
                return candidates
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, ck)| cdf(ck, cj.mean_db))
                    .product();
            }
            let density = |x: f64| {
                let z = (x - cj.mean_db) / cj.sigma_db;
                let pdf = (-0.5 * z * z).exp() / (cj.sigma_db * (2.0 * PI).sqrt());
                let others: f64 = candidates
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, ck)| cdf(ck, x))
                    .product();
                pdf * others
            };
            let span = 12.0 * cj.sigma_db;
            integrate(density, cj.mean_db - span, cj.mean_db + span, 96, 16)
        })
        .collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}

pub const MAX_CHAIN_STATES: usize = 10_000;

/// Joint-occupancy chain for the multi-relay max-all-link (Protocol 2) or
/// max-link (Modified Protocol 2) rules, with a saturated source.
///
/// `sr[n]` and `rd[n]` describe relay `n`'s link qualities; the rd means
/// must already include `10 log10(beta)`. Limited to
/// `N (L+1)^N <= 10^4`.
pub fn build_multi_relay_chain(
    kind: ProtocolKind,
    sr: &[GaussianLink],
    rd: &[GaussianLink],
    capacity: usize,
) -> Result<BufferChain> {
    let relays = sr.len();
    if relays == 0 || rd.len() != relays {
        return Err(Error::invalid("topology.relays", "need matching sr/rd links for >= 1 relay"));
    }
    if capacity < 1 {
        return Err(Error::invalid("buffer_size", "must be at least 1"));
    }
    let count = (capacity + 1).checked_pow(relays as u32).unwrap_or(usize::MAX);
    if count.saturating_mul(relays) > MAX_CHAIN_STATES {
        return Err(Error::invalid(
            "topology.relays",
            format!("state space N(L+1)^N exceeds {MAX_CHAIN_STATES}; use simulation"),
        ));
    }
    let restricted = match kind {
        ProtocolKind::Protocol2 => false,
        ProtocolKind::ModifiedProtocol2 => true,
        other => {
            return Err(Error::invalid(
                "protocol.kind",
                format!("no multi-relay chain for {other}"),
            ))
        }
    };
    let states: Vec<Vec<usize>> = (0..count)
        .map(|mut idx| {
            (0..relays)
                .map(|_| {
                    let o = idx % (capacity + 1);
                    idx /= capacity + 1;
                    o
                })
                .collect()
        })
        .collect();
    let index_of = |s: &[usize]| s.iter().rev().fold(0, |acc, &o| acc * (capacity + 1) + o);
    // Candidate order matches the protocol tie-break: all SR links, then all RD links.
    let all_links: Vec<GaussianLink> = sr.iter().chain(rd).copied().collect();
    let global = max_link_probabilities(&all_links);

    let mut t = DMatrix::zeros(count, count);
    let mut silent = vec![0.0; count];
    for (i, state) in states.iter().enumerate() {
        let feasible = |link: usize| {
            if link < relays {
                state[link] < capacity
            } else {
                state[link - relays] > 0
            }
        };
        let probs: Vec<(usize, f64)> = if restricted {
            let avail: Vec<usize> = (0..2 * relays).filter(|&l| feasible(l)).collect();
            let subset: Vec<GaussianLink> = avail.iter().map(|&l| all_links[l]).collect();
            avail.into_iter().zip(max_link_probabilities(&subset)).collect()
        } else {
            (0..2 * relays)
                .filter(|&l| feasible(l))
                .map(|l| (l, global[l]))
                .collect()
        };
        let mut moved = 0.0;
        for (link, prob) in probs {
            let mut next = state.clone();
            if link < relays {
                next[link] += 1;
            } else {
                next[link - relays] -= 1;
            }
            t[(i, index_of(&next))] += prob;
            moved += prob;
        }
        let stay = (1.0 - moved).max(0.0);
        t[(i, i)] += stay;
        silent[i] = stay;
    }
    BufferChain::from_parts(states, t, silent, None)
}
