//! Source buffers with Poisson packet arrivals.
//!
//! Both sources hold a FIFO of fixed-length packets. Each round, new
//! arrivals are enqueued and then the source transmits up to its MA-phase
//! rate in bits (one round is one s*Hz of resource), splitting packets
//! across rounds as needed. A packet's system-service delay is the number of
//! rounds between its arrival and the round its last bit leaves the source.
//! Under AAB the relay buffers run alongside on the same channel stream.

use std::collections::VecDeque;
use std::fmt;

use rand_distr::{Distribution, Poisson};

use crate::bits::Bits;
use crate::channel::{ChannelRealization, ChannelSampler, FadingConfig};
use crate::error::{Error, Result};
use crate::rates::{dnf_sum_rate, ergodic_many, ma_rate_pair, InstantFn};
use crate::relay_delay::{DelayAccumulator, DelayMode, DelayStats, Direction, RelayBacklogQueue};
use crate::rng::{stream_rng, StreamPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Aab,
    Dnf,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Aab, Protocol::Dnf];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Aab => "AAB",
            Protocol::Dnf => "DNF",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalConfig {
    /// Mean packet arrivals per round at each source.
    pub rho: f64,
    /// Packet length in bits.
    pub packet_len: f64,
    pub horizon: u64,
    pub warmup: u64,
}

impl Default for ArrivalConfig {
    fn default() -> Self {
        ArrivalConfig {
            rho: 0.0,
            packet_len: 10.0,
            horizon: 1_000_000,
            warmup: 10_000,
        }
    }
}

impl ArrivalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::config(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.packet_len.is_finite() && self.packet_len > 0.0) {
            return Err(Error::config(format!(
                "packet_len must be > 0, got {}",
                self.packet_len
            )));
        }
        if self.horizon <= self.warmup {
            return Err(Error::config(format!(
                "horizon ({}) must exceed warmup ({})",
                self.horizon, self.warmup
            )));
        }
        Ok(())
    }
}

/// Bits each source may send this round, indexed by [`Direction::index`].
///
/// AAB sources send at their MA-phase rates; DNF splits its sum-rate evenly.
pub fn service_rates(protocol: Protocol, r: &ChannelRealization) -> [f64; 2] {
    match protocol {
        Protocol::Aab => {
            let ma = ma_rate_pair(r);
            [ma.r01(), ma.r21()]
        }
        Protocol::Dnf => {
            let each = 0.5 * dnf_sum_rate(r);
            [each, each]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub arrival_round: u64,
    pub bits_remaining: Bits,
}

#[derive(Debug, Clone)]
pub struct SourceQueue {
    fifo: VecDeque<Packet>,
    packet_len: Bits,
}

impl SourceQueue {
    pub fn new(packet_len: Bits) -> Self {
        SourceQueue {
            fifo: VecDeque::new(),
            packet_len,
        }
    }

    pub fn arrive(&mut self, round: u64, count: u64) {
        for _ in 0..count {
            self.fifo.push_back(Packet {
                arrival_round: round,
                bits_remaining: self.packet_len,
            });
        }
    }

    /// Transmits up to `budget` front-to-back, reporting each finished
    /// packet with its delay.
    pub fn serve<F: FnMut(&Packet, u64)>(&mut self, round: u64, mut budget: Bits, mut done: F) {
        while !budget.is_zero() {
            let Some(front) = self.fifo.front_mut() else {
                break;
            };
            let take = front.bits_remaining.min(budget);
            front.bits_remaining -= take;
            budget -= take;
            if front.bits_remaining.is_zero() {
                let p = self.fifo.pop_front().expect("front exists");
                done(&p, round - p.arrival_round);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.fifo.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemStats {
    pub mean_ss_delay_d02: f64,
    pub mean_ss_delay_d20: f64,
    /// Mean relay delay over both directions; AAB only.
    pub mean_st_delay: Option<f64>,
    pub relay: Option<DelayStats>,
    pub served_packets: u64,
    /// Packets that arrived after warmup and were still queued at the horizon.
    pub censored_packets: u64,
}

impl SystemStats {
    pub fn mean_ss_delay(&self, dir: Direction) -> f64 {
        match dir {
            Direction::ZeroToTwo => self.mean_ss_delay_d02,
            Direction::TwoToZero => self.mean_ss_delay_d20,
        }
    }
}

/// Samples used to estimate the stable rate behind the arrival-rate cap.
const CAP_ESTIMATE_SAMPLES: u64 = 1 << 16;

/// Runs both source queues (and, for AAB, the relay buffers in suboptimal
/// mode) for `arrival.horizon` rounds.
pub fn simulate_system(
    protocol: Protocol,
    fading: &FadingConfig,
    arrival: &ArrivalConfig,
) -> Result<SystemStats> {
    arrival.validate()?;
    fading.validate()?;
    if arrival.rho > 0.0 {
        let stable = max_stable_par(protocol, fading, CAP_ESTIMATE_SAMPLES, arrival.packet_len)?;
        let cap = 10.0 * stable;
        if arrival.rho > cap {
            return Err(Error::ArrivalRateAboveCap {
                rho: arrival.rho,
                cap,
                stable,
            });
        }
    }

    let packet_len = Bits::from_f64(arrival.packet_len);
    let poisson = if arrival.rho > 0.0 {
        Some(Poisson::new(arrival.rho).map_err(|e| Error::config(format!("rho: {e}")))?)
    } else {
        None
    };
    let mut arrivals_rng = stream_rng(fading.seed, StreamPurpose::Arrivals, 0);
    let mut sampler = ChannelSampler::new(fading, 0)?;
    let mut sources = [SourceQueue::new(packet_len), SourceQueue::new(packet_len)];
    let mut relay = (protocol == Protocol::Aab).then(|| {
        (
            RelayBacklogQueue::new(),
            DelayAccumulator::new(arrival.warmup),
        )
    });

    let mut delay_sum = [0u128; 2];
    let mut served = [0u64; 2];
    for _ in 0..arrival.horizon {
        let r = sampler.next_round();
        let service = service_rates(protocol, &r);
        for dir in Direction::BOTH {
            let i = dir.index();
            if let Some(p) = &poisson {
                sources[i].arrive(r.round, p.sample(&mut arrivals_rng) as u64);
            }
            sources[i].serve(r.round, Bits::from_f64(service[i]), |p, delay| {
                if p.arrival_round > arrival.warmup {
                    delay_sum[i] += u128::from(delay);
                    served[i] += 1;
                }
            });
        }
        if let Some((queue, acc)) = relay.as_mut() {
            let events = queue.step(DelayMode::Suboptimal, &r)?;
            acc.record(&events);
        }
    }

    let mean = |i: usize| {
        if served[i] == 0 {
            0.0
        } else {
            delay_sum[i] as f64 / served[i] as f64
        }
    };
    let censored_packets = sources
        .iter()
        .flat_map(SourceQueue::packets)
        .filter(|p| p.arrival_round > arrival.warmup)
        .count() as u64;
    let relay_stats = relay.map(|(queue, acc)| acc.finish(&queue));
    Ok(SystemStats {
        mean_ss_delay_d02: mean(0),
        mean_ss_delay_d20: mean(1),
        mean_st_delay: relay_stats.map(|s| s.mean()),
        relay: relay_stats,
        served_packets: served[0] + served[1],
        censored_packets,
    })
}

/// Largest packet arrival rate both sources can sustain: the smaller
/// ergodic per-direction service rate divided by the packet length.
pub fn max_stable_par(
    protocol: Protocol,
    fading: &FadingConfig,
    n_samples: u64,
    packet_len: f64,
) -> Result<f64> {
    if n_samples < 1_000 {
        return Err(Error::config(format!(
            "max_stable_par needs n_samples >= 1000, got {n_samples}"
        )));
    }
    if !(packet_len.is_finite() && packet_len > 0.0) {
        return Err(Error::config(format!(
            "packet_len must be > 0, got {packet_len}"
        )));
    }
    let d02 = move |r: &ChannelRealization| service_rates(protocol, r)[0];
    let d20 = move |r: &ChannelRealization| service_rates(protocol, r)[1];
    let fns: [InstantFn<'_>; 2] = [&d02, &d20];
    let est = ergodic_many(&fns, fading, n_samples)?;
    Ok(est[0].mean.min(est[1].mean) / packet_len)
}
