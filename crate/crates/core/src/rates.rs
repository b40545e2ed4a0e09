//! Instantaneous capacity bounds, achievable rate pairs and power splits for
//! one channel realization, and Monte-Carlo expectations over the fading
//! distribution.
//!
//! All rates are in bit/s/Hz. Formulas are written for the stronger uplink
//! `g_max` and the weaker one `g_min`; which physical source is "strong"
//! only matters for labelling.
//!
//! Note on normalization: the MA-phase pair carries a 1/2 on both rates
//! while the AAB sum-rate's first term does not. The two agree because the
//! weak-side term appears once in each rate, so `r01 + r21` equals
//! [`aab_sum_rate`] exactly.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::channel::{snr, ChannelRealization, ChannelSampler, FadingConfig, Link};
use crate::error::{Error, Result};
use crate::relay_delay::Direction;
use crate::rng::StreamPurpose;

/// `log2(1 + x)` without cancellation for small `x`.
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// `[log2(x)]^+`
fn pos_log2(x: f64) -> f64 {
    x.log2().max(0.0)
}

pub fn shannon_capacity(snr: f64) -> Result<f64> {
    if snr < 0.0 || snr.is_nan() {
        return Err(Error::NegativeSnr(snr));
    }
    Ok(log2_1p(snr))
}

/// `(C01, C21)` of the two uplinks.
pub fn link_capacities(r: &ChannelRealization) -> (f64, f64) {
    (
        log2_1p(snr(r, Link::Uplink01)),
        log2_1p(snr(r, Link::Uplink21)),
    )
}

/// Sum-capacity bound of immediate-forwarding protocols: `min(C01, C21)`.
pub fn trad_upper_bound(r: &ChannelRealization) -> f64 {
    let (c01, c21) = link_capacities(r);
    c01.min(c21)
}

/// Sum-capacity bound once the relay may buffer: `(C01 + C21) / 2`.
pub fn aab_upper_bound(r: &ChannelRealization) -> f64 {
    let (c01, c21) = link_capacities(r);
    0.5 * (c01 + c21)
}

/// `P |g01 - g21| / (sigma^2 + 2 P g_min)`: SNR of the strong source's
/// Gaussian layer when decoded under the lattice sum.
pub fn gaussian_layer_snr(r: &ChannelRealization) -> f64 {
    r.power * (r.g01 - r.g21).abs() / (r.noise_var + 2.0 * r.power * r.g_min())
}

/// Lattice-layer term `[log2(1/2 + P g_min / sigma^2)]^+`.
fn lattice_term(r: &ChannelRealization) -> f64 {
    pos_log2(0.5 + r.snr_weak())
}

/// MA-phase rate pair, labelled by which source has the stronger uplink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaRates {
    pub strong: Direction,
    pub r_strong: f64,
    pub r_weak: f64,
}

impl MaRates {
    pub fn r01(&self) -> f64 {
        match self.strong {
            Direction::ZeroToTwo => self.r_strong,
            Direction::TwoToZero => self.r_weak,
        }
    }

    pub fn r21(&self) -> f64 {
        match self.strong {
            Direction::ZeroToTwo => self.r_weak,
            Direction::TwoToZero => self.r_strong,
        }
    }

    /// Rate of source 0 (`d02`) or source 2 (`d20`).
    pub fn rate(&self, direction: Direction) -> f64 {
        match direction {
            Direction::ZeroToTwo => self.r01(),
            Direction::TwoToZero => self.r21(),
        }
    }
}

pub fn ma_rate_pair(r: &ChannelRealization) -> MaRates {
    let r_weak = 0.5 * lattice_term(r);
    let r_strong = r_weak + 0.5 * log2_1p(gaussian_layer_snr(r));
    MaRates {
        strong: r.strong_direction(),
        r_strong,
        r_weak,
    }
}

/// BC-phase rate pair for relay power split `eta` (lattice share).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcRates {
    pub strong: Direction,
    /// Toward the node behind the weaker hop (R12 when g01 >= g21).
    pub to_weak_side: f64,
    /// Toward the node behind the stronger hop (R10 when g01 >= g21).
    pub to_strong_side: f64,
}

impl BcRates {
    pub fn r10(&self) -> f64 {
        match self.strong {
            Direction::ZeroToTwo => self.to_strong_side,
            Direction::TwoToZero => self.to_weak_side,
        }
    }

    pub fn r12(&self) -> f64 {
        match self.strong {
            Direction::ZeroToTwo => self.to_weak_side,
            Direction::TwoToZero => self.to_strong_side,
        }
    }
}

pub fn bc_rate_pair(r: &ChannelRealization, eta: f64) -> Result<BcRates> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::PowerSplit(eta));
    }
    let a = r.snr_weak();
    let b = r.snr_strong();
    let to_weak_side = 0.5 * log2_1p(eta * a);
    let to_strong_side =
        0.5 * (log2_1p(eta * b / (1.0 + (1.0 - eta) * b)) + log2_1p((1.0 - eta) * b));
    Ok(BcRates {
        strong: r.strong_direction(),
        to_weak_side,
        to_strong_side,
    })
}

/// Strong-source lattice power share `g_min / g_max`, equalizing the two
/// lattice layers' received SNR. Both gains zero is degenerate and yields 1.
pub fn zeta(r: &ChannelRealization) -> f64 {
    let g_max = r.g_max();
    if g_max == 0.0 {
        return 1.0;
    }
    r.g_min() / g_max
}

/// Smallest relay lattice share that keeps the weaker side's rate intact on
/// both downlinks.
pub fn eta_min(r: &ChannelRealization) -> f64 {
    let a = r.snr_weak();
    let b = r.snr_strong();
    let eta = if a < 0.5 {
        0.0
    } else if r.g_min() / r.g_max() <= 0.5 {
        1.0 - 1.0 / (2.0 * a)
    } else {
        (2.0 * a - 1.0) * (b + 1.0) / (b * (1.0 + 2.0 * a))
    };
    eta.clamp(0.0, 1.0)
}

/// Achievable instantaneous sum-rate of AAB with lattice + Gaussian layers.
pub fn aab_sum_rate(r: &ChannelRealization) -> f64 {
    lattice_term(r) + 0.5 * log2_1p(gaussian_layer_snr(r))
}

/// Achievable instantaneous sum-rate of denoise-and-forward.
pub fn dnf_sum_rate(r: &ChannelRealization) -> f64 {
    lattice_term(r)
}

/// Everything the rate layer knows about one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantRates {
    pub c01: f64,
    pub c21: f64,
    pub r01: f64,
    pub r21: f64,
    pub r10: f64,
    pub r12: f64,
    pub sum_trad_ub: f64,
    pub sum_aab_ub: f64,
    pub sum_aab_ach: f64,
    pub sum_dnf: f64,
    pub zeta: f64,
    pub eta: f64,
}

impl InstantRates {
    /// Evaluates all rates, with the relay split at [`eta_min`].
    pub fn evaluate(r: &ChannelRealization) -> Self {
        let (c01, c21) = link_capacities(r);
        let ma = ma_rate_pair(r);
        let eta = eta_min(r);
        let bc = bc_rate_pair(r, eta).expect("eta_min is clamped to [0, 1]");
        InstantRates {
            c01,
            c21,
            r01: ma.r01(),
            r21: ma.r21(),
            r10: bc.r10(),
            r12: bc.r12(),
            sum_trad_ub: c01.min(c21),
            sum_aab_ub: 0.5 * (c01 + c21),
            sum_aab_ach: aab_sum_rate(r),
            sum_dnf: dnf_sum_rate(r),
            zeta: zeta(r),
            eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

/// Welford accumulator, mergeable with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> ErgodicEstimate {
        let std_error = if self.n > 1 {
            (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        ErgodicEstimate {
            mean: self.mean,
            std_error,
            n_samples: self.n,
        }
    }
}

/// Realizations per independent stream in [`ergodic_many`].
pub const ERGODIC_CHUNK: u64 = 1 << 16;

pub type InstantFn<'a> = &'a (dyn Fn(&ChannelRealization) -> f64 + Sync);

/// Sample mean and standard error of `f` over `n_samples` realizations.
pub fn ergodic<F>(f: F, config: &FadingConfig, n_samples: u64) -> Result<ErgodicEstimate>
where
    F: Fn(&ChannelRealization) -> f64 + Sync,
{
    Ok(ergodic_many(&[&f], config, n_samples)?[0])
}

/// Estimates several functions on a common set of realizations.
///
/// Samples are generated in chunks of [`ERGODIC_CHUNK`], chunk `c` drawing
/// from its own stream, and merged in chunk order, so the result does not
/// depend on thread scheduling. Under per-replication placement each chunk
/// holds its own relay position.
pub fn ergodic_many(
    fns: &[InstantFn<'_>],
    config: &FadingConfig,
    n_samples: u64,
) -> Result<Vec<ErgodicEstimate>> {
    if n_samples == 0 {
        return Err(Error::config("ergodic estimate needs n_samples >= 1"));
    }
    config.validate()?;
    let chunks = n_samples.div_ceil(ERGODIC_CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<RunningStats>> {
            let len = ERGODIC_CHUNK.min(n_samples - c * ERGODIC_CHUNK);
            let mut sampler = ChannelSampler::with_purpose(config, StreamPurpose::Ergodic, c)?;
            let mut acc = vec![RunningStats::default(); fns.len()];
            for _ in 0..len {
                let r = sampler.next_round();
                for (a, f) in acc.iter_mut().zip(fns) {
                    a.push(f(&r));
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![RunningStats::default(); fns.len()];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total.iter().map(RunningStats::estimate).collect())
}
