//! Relay buffer delay engine.
//!
//! In a round where one uplink is stronger, the relay cannot forward that
//! source's whole packet over the weaker opposite downlink. The surplus is
//! parked in the buffer for its direction (`B02` or `B20`) and drained in
//! later rounds whose downlink toward the destination is the stronger one.
//! Buffers are FIFO fluid queues: an injection may be drained across several
//! rounds and completes in the round its last bit leaves. Its delay is the
//! number of whole rounds between birth and completion.
//!
//! Two surplus/drain models are provided, see [`DelayMode`]. The [`oracle`]
//! submodule evaluates the same delays directly from the cumulative
//! surplus/drain recursion and serves as the cross-check for the queue.

pub mod oracle;

use std::collections::VecDeque;
use std::fmt;

use crate::bits::{BitTotal, Bits};
use crate::channel::{ChannelRealization, ChannelSampler, FadingConfig};
use crate::error::{Error, Result};
use crate::rates::{eta_min, gaussian_layer_snr, log2_1p};

/// Buffer direction: data from source 0 to source 2 (`B02`) or back (`B20`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    ZeroToTwo,
    TwoToZero,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::ZeroToTwo, Direction::TwoToZero];

    pub fn index(self) -> usize {
        match self {
            Direction::ZeroToTwo => 0,
            Direction::TwoToZero => 1,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::ZeroToTwo => Direction::TwoToZero,
            Direction::TwoToZero => Direction::ZeroToTwo,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::ZeroToTwo => "d02",
            Direction::TwoToZero => "d20",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayMode {
    /// Capacity-achieving bound: the MA phase realizes a fraction `theta` of
    /// the uplink capacity gap as surplus, and the BC phase drains the full
    /// downlink capacity gap.
    UpperBound { theta: f64 },
    /// Lattice + Gaussian layering with the relay split at `eta_min`.
    Suboptimal,
}

impl DelayMode {
    pub fn upper_bound(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::config(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        Ok(DelayMode::UpperBound { theta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DelayMode::UpperBound { theta } => Self::upper_bound(theta).map(|_| ()),
            DelayMode::Suboptimal => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DelayMode::UpperBound { .. } => "upper_bound",
            DelayMode::Suboptimal => "suboptimal",
        }
    }
}

/// An amount moving into or out of one direction's buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub direction: Direction,
    pub bits: Bits,
}

/// `|C01 - C21|` computed as a log-ratio.
fn capacity_gap(r: &ChannelRealization) -> f64 {
    log2_1p(r.snr_strong()) - log2_1p(r.snr_weak())
}

/// Surplus the relay parks this round, tagged with the stronger uplink's
/// direction. Equal gains give zero bits.
pub fn surplus_bits(mode: DelayMode, r: &ChannelRealization) -> Flow {
    let bits = match mode {
        DelayMode::UpperBound { theta } => theta * capacity_gap(r),
        DelayMode::Suboptimal => log2_1p(gaussian_layer_snr(r)),
    };
    Flow {
        direction: r.strong_direction(),
        bits: Bits::from_f64(bits),
    }
}

/// Buffer drain capacity this round.
///
/// The buffer for `d02` drains when the downlink to node 2 is the stronger
/// one (`g21 > g01`) and `d20` symmetrically; equal gains drain nothing.
/// `eta` is the relay's lattice share and only matters in suboptimal mode.
pub fn drain_bits(mode: DelayMode, r: &ChannelRealization, eta: f64) -> Option<Flow> {
    let direction = if r.g21 > r.g01 {
        Direction::ZeroToTwo
    } else if r.g01 > r.g21 {
        Direction::TwoToZero
    } else {
        return None;
    };
    let bits = match mode {
        DelayMode::UpperBound { .. } => capacity_gap(r),
        DelayMode::Suboptimal => log2_1p((1.0 - eta) * r.snr_strong()),
    };
    Some(Flow {
        direction,
        bits: Bits::from_f64(bits),
    })
}

/// Per-round buffer flows implied by `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundFlows {
    pub injection: Option<Flow>,
    /// Drain capacity offered to each direction, indexed by [`Direction::index`].
    pub drain: [Bits; 2],
}

impl RoundFlows {
    pub fn for_round(mode: DelayMode, r: &ChannelRealization) -> Self {
        let surplus = surplus_bits(mode, r);
        let eta = match mode {
            DelayMode::Suboptimal => eta_min(r),
            DelayMode::UpperBound { .. } => 1.0,
        };
        let mut drain = [Bits::ZERO; 2];
        if let Some(d) = drain_bits(mode, r, eta) {
            drain[d.direction.index()] = d.bits;
        }
        RoundFlows {
            injection: (!surplus.bits.is_zero()).then_some(surplus),
            drain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    pub birth_round: u64,
    pub bits_total: Bits,
    pub bits_remaining: Bits,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionEvent {
    pub direction: Direction,
    pub birth_round: u64,
    pub completion_round: u64,
    pub delay: u64,
}

#[derive(Debug, Clone, Default)]
struct DirectionBuffer {
    fifo: VecDeque<Injection>,
    backlog: Bits,
    injected: BitTotal,
    drained: BitTotal,
}

/// The pair of relay FIFO buffers.
#[derive(Debug, Clone, Default)]
pub struct RelayBacklogQueue {
    buffers: [DirectionBuffer; 2],
    last_round: Option<u64>,
}

impl RelayBacklogQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advances one round under `mode`.
    pub fn step(
        &mut self,
        mode: DelayMode,
        r: &ChannelRealization,
    ) -> Result<Vec<CompletionEvent>> {
        let flows = RoundFlows::for_round(mode, r);
        self.apply(r.round, &flows)
    }

    /// Applies one round's flows. Drains are served before the round's
    /// injection is enqueued, so a newborn injection is never drained in its
    /// birth round.
    pub fn apply(&mut self, round: u64, flows: &RoundFlows) -> Result<Vec<CompletionEvent>> {
        if let Some(last) = self.last_round {
            if round <= last {
                return Err(Error::OutOfOrderRound { last, got: round });
            }
        }
        self.last_round = Some(round);

        let mut events = Vec::new();
        for dir in Direction::BOTH {
            let buf = &mut self.buffers[dir.index()];
            let mut avail = flows.drain[dir.index()];
            while !avail.is_zero() {
                let Some(front) = buf.fifo.front_mut() else {
                    break;
                };
                let take = front.bits_remaining.min(avail);
                front.bits_remaining -= take;
                avail -= take;
                buf.backlog -= take;
                buf.drained.add(take);
                if front.bits_remaining.is_zero() {
                    let done = buf.fifo.pop_front().expect("front exists");
                    events.push(CompletionEvent {
                        direction: dir,
                        birth_round: done.birth_round,
                        completion_round: round,
                        delay: round - done.birth_round,
                    });
                }
            }
        }

        if let Some(inj) = flows.injection.filter(|f| !f.bits.is_zero()) {
            let buf = &mut self.buffers[inj.direction.index()];
            buf.fifo.push_back(Injection {
                birth_round: round,
                bits_total: inj.bits,
                bits_remaining: inj.bits,
                direction: inj.direction,
            });
            buf.backlog += inj.bits;
            buf.injected.add(inj.bits);
        }
        Ok(events)
    }

    pub fn backlog(&self, dir: Direction) -> Bits {
        self.buffers[dir.index()].backlog
    }

    pub fn pending(&self, dir: Direction) -> impl Iterator<Item = &Injection> {
        self.buffers[dir.index()].fifo.iter()
    }

    pub fn pending_count(&self, dir: Direction) -> usize {
        self.buffers[dir.index()].fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.iter().all(|b| b.fifo.is_empty())
    }

    pub fn total_injected(&self, dir: Direction) -> BitTotal {
        self.buffers[dir.index()].injected
    }

    pub fn total_drained(&self, dir: Direction) -> BitTotal {
        self.buffers[dir.index()].drained
    }

    /// Injected = drained + remaining, per direction, with the remaining
    /// amount recomputed from the FIFO contents.
    pub fn conserves_bits(&self) -> bool {
        self.buffers.iter().all(|b| {
            let remaining: u128 = b
                .fifo
                .iter()
                .map(|i| u128::from(i.bits_remaining.quanta()))
                .sum();
            remaining == u128::from(b.backlog.quanta())
                && b.injected.quanta() == b.drained.quanta() + remaining
        })
    }
}

/// Average relay delay per direction; `l01` belongs to `d02` injections.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayStats {
    pub mean_l01: f64,
    pub mean_l21: f64,
    pub count_01: u64,
    pub count_21: u64,
    /// Injections still buffered at the horizon; excluded from the means.
    pub censored_count: u64,
}

impl DelayStats {
    /// Mean over both directions, weighted by completions.
    pub fn mean(&self) -> f64 {
        let n = self.count_01 + self.count_21;
        if n == 0 {
            0.0
        } else {
            (self.mean_l01 * self.count_01 as f64 + self.mean_l21 * self.count_21 as f64) / n as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct DelayAccumulator {
    sum: [u128; 2],
    count: [u64; 2],
    warmup: u64,
}

impl DelayAccumulator {
    pub(crate) fn new(warmup: u64) -> Self {
        DelayAccumulator {
            warmup,
            ..Default::default()
        }
    }

    pub(crate) fn record(&mut self, events: &[CompletionEvent]) {
        for e in events.iter().filter(|e| e.birth_round > self.warmup) {
            let i = e.direction.index();
            self.sum[i] += u128::from(e.delay);
            self.count[i] += 1;
        }
    }

    pub(crate) fn finish(&self, queue: &RelayBacklogQueue) -> DelayStats {
        let mean = |i: usize| {
            if self.count[i] == 0 {
                0.0
            } else {
                self.sum[i] as f64 / self.count[i] as f64
            }
        };
        let censored_count = Direction::BOTH
            .iter()
            .flat_map(|&d| queue.pending(d))
            .filter(|inj| inj.birth_round > self.warmup)
            .count() as u64;
        DelayStats {
            mean_l01: mean(0),
            mean_l21: mean(1),
            count_01: self.count[0],
            count_21: self.count[1],
            censored_count,
        }
    }
}

/// What happened in one round of [`run_delay_sim_with`].
#[derive(Debug, Clone)]
pub struct RoundRecord<'a> {
    pub realization: &'a ChannelRealization,
    pub flows: &'a RoundFlows,
    pub completions: &'a [CompletionEvent],
    pub queue: &'a RelayBacklogQueue,
}

/// Streams `horizon` rounds of replication 0 through the relay buffers and
/// averages the delays of injections born after `warmup`.
pub fn run_delay_sim(
    config: &FadingConfig,
    mode: DelayMode,
    horizon: u64,
    warmup: u64,
) -> Result<DelayStats> {
    run_delay_sim_with(config, mode, horizon, warmup, |_| {})
}

/// [`run_delay_sim`] with a per-round observer.
pub fn run_delay_sim_with<F>(
    config: &FadingConfig,
    mode: DelayMode,
    horizon: u64,
    warmup: u64,
    mut observe: F,
) -> Result<DelayStats>
where
    F: FnMut(RoundRecord<'_>),
{
    if horizon <= warmup {
        return Err(Error::config(format!(
            "horizon ({horizon}) must exceed warmup ({warmup})"
        )));
    }
    mode.validate()?;
    let mut sampler = ChannelSampler::new(config, 0)?;
    let mut queue = RelayBacklogQueue::new();
    let mut acc = DelayAccumulator::new(warmup);
    for _ in 0..horizon {
        let r = sampler.next_round();
        let flows = RoundFlows::for_round(mode, &r);
        let events = queue.apply(r.round, &flows)?;
        acc.record(&events);
        observe(RoundRecord {
            realization: &r,
            flows: &flows,
            completions: &events,
            queue: &queue,
        });
    }
    Ok(acc.finish(&queue))
}
