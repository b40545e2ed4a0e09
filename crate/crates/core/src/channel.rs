//! Reciprocal two-way relay fading channels.
//!
//! Sources 0 and 2 sit at (-0.5, 0) and (0.5, 0); the relay position is
//! either fixed or drawn uniformly from the unit square centred on the
//! origin. Each link gain is `|alpha|^2 * d^-beta` where `|alpha|^2` is the
//! Nakagami-m power, i.e. Gamma(shape m, mean 1). Only power gains are
//! produced; uplink and downlink of the same hop share one gain.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::relay_delay::Direction;
use crate::rng::{stream_rng, SimRng, StreamPurpose};

pub const SOURCE0_POS: (f64, f64) = (-0.5, 0.0);
pub const SOURCE2_POS: (f64, f64) = (0.5, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Source0,
    Source2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Uplink01,
    Uplink21,
    Downlink10,
    Downlink12,
}

/// Relay position in the normalized plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    relay_x: f64,
    relay_y: f64,
}

impl Geometry {
    pub fn new(relay_x: f64, relay_y: f64) -> Result<Self> {
        if !relay_x.is_finite() || !relay_y.is_finite() {
            return Err(Error::config("relay coordinates must be finite"));
        }
        let geometry = Geometry { relay_x, relay_y };
        if geometry.raw_distance(Endpoint::Source0) == 0.0
            || geometry.raw_distance(Endpoint::Source2) == 0.0
        {
            return Err(Error::config(format!(
                "relay at ({relay_x}, {relay_y}) coincides with a source"
            )));
        }
        Ok(geometry)
    }

    pub fn relay_x(&self) -> f64 {
        self.relay_x
    }

    pub fn relay_y(&self) -> f64 {
        self.relay_y
    }

    /// Euclidean distance from `endpoint` to the relay.
    pub fn distance(&self, endpoint: Endpoint) -> f64 {
        self.raw_distance(endpoint)
    }

    fn raw_distance(&self, endpoint: Endpoint) -> f64 {
        let (sx, sy) = match endpoint {
            Endpoint::Source0 => SOURCE0_POS,
            Endpoint::Source2 => SOURCE2_POS,
        };
        (self.relay_x - sx).hypot(self.relay_y - sy)
    }

    fn uniform(rng: &mut SimRng) -> Self {
        loop {
            let x = rng.random_range(-0.5..=0.5);
            let y = rng.random_range(-0.5..=0.5);
            if let Ok(g) = Geometry::new(x, y) {
                return g;
            }
        }
    }
}

/// Euclidean distance from the named source to the relay.
pub fn distance(geometry: &Geometry, endpoint: Endpoint) -> f64 {
    geometry.distance(endpoint)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Fixed(Geometry),
    /// Fresh uniform position every round.
    UniformPerRound,
    /// One uniform position per replication, held for all its rounds.
    UniformPerReplication,
}

impl Placement {
    pub fn name(&self) -> &'static str {
        match self {
            Placement::Fixed(_) => "fixed",
            Placement::UniformPerRound => "uniform_per_round",
            Placement::UniformPerReplication => "uniform_per_replication",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingConfig {
    pub nakagami_m: f64,
    /// Transmit power P, identical at all three nodes.
    pub power: f64,
    /// Noise variance sigma^2, identical at all three nodes.
    pub noise_var: f64,
    /// Path-loss exponent.
    pub beta: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        FadingConfig {
            nakagami_m: 1.0,
            power: 100.0,
            noise_var: 1.0,
            beta: 3.0,
            placement: Placement::UniformPerRound,
            seed: 0,
        }
    }
}

impl FadingConfig {
    /// Sets P/sigma^2 in dB, keeping unit noise variance.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.power = 10f64.powf(snr_db / 10.0);
        self.noise_var = 1.0;
        self
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.noise_var).log10()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nakagami_m.is_finite() && self.nakagami_m >= 0.5) {
            return Err(Error::config(format!(
                "nakagami_m must be >= 0.5, got {}",
                self.nakagami_m
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::config(format!(
                "power must be > 0, got {}",
                self.power
            )));
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            return Err(Error::config(format!(
                "noise variance must be > 0, got {}",
                self.noise_var
            )));
        }
        if let Placement::Fixed(g) = self.placement {
            Geometry::new(g.relay_x, g.relay_y)?;
        }
        Ok(())
    }
}

/// One round's reciprocal power gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub round: u64,
    /// |h01|^2 = |h10|^2
    pub g01: f64,
    /// |h21|^2 = |h12|^2
    pub g21: f64,
    pub power: f64,
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn new(round: u64, g01: f64, g21: f64, power: f64, noise_var: f64) -> Self {
        debug_assert!(g01 >= 0.0 && g21 >= 0.0);
        ChannelRealization {
            round,
            g01,
            g21,
            power,
            noise_var,
        }
    }

    pub fn g_min(&self) -> f64 {
        self.g01.min(self.g21)
    }

    pub fn g_max(&self) -> f64 {
        self.g01.max(self.g21)
    }

    /// SNR of the weaker hop, `P g_min / sigma^2`.
    pub fn snr_weak(&self) -> f64 {
        self.power * self.g_min() / self.noise_var
    }

    /// SNR of the stronger hop, `P g_max / sigma^2`.
    pub fn snr_strong(&self) -> f64 {
        self.power * self.g_max() / self.noise_var
    }

    /// Direction whose source sees the stronger uplink; ties go to 0 -> 2.
    pub fn strong_direction(&self) -> Direction {
        if self.g01 >= self.g21 {
            Direction::ZeroToTwo
        } else {
            Direction::TwoToZero
        }
    }
}

/// `gamma_ij = P |h_ij|^2 / sigma^2`.
pub fn snr(realization: &ChannelRealization, link: Link) -> f64 {
    let g = match link {
        Link::Uplink01 | Link::Downlink10 => realization.g01,
        Link::Uplink21 | Link::Downlink12 => realization.g21,
    };
    realization.power * g / realization.noise_var
}

/// Draws one round's gains from `rng`.
///
/// `position` is the relay location for this round; pass `None` under
/// per-round placement to draw it here.
pub fn sample_round(
    config: &FadingConfig,
    fading: &Gamma<f64>,
    position: Option<Geometry>,
    rng: &mut SimRng,
    round: u64,
) -> ChannelRealization {
    let geometry = position.unwrap_or_else(|| Geometry::uniform(rng));
    let a01 = fading.sample(rng);
    let a21 = fading.sample(rng);
    let g01 = a01 * geometry.distance(Endpoint::Source0).powf(-config.beta);
    let g21 = a21 * geometry.distance(Endpoint::Source2).powf(-config.beta);
    ChannelRealization::new(round, g01, g21, config.power, config.noise_var)
}

/// Round-by-round realization stream for one replication.
///
/// Rounds are numbered from 1.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    config: FadingConfig,
    fading: Gamma<f64>,
    position: Option<Geometry>,
    rng: SimRng,
    round: u64,
}

impl ChannelSampler {
    pub fn new(config: &FadingConfig, replication: u64) -> Result<Self> {
        Self::with_purpose(config, StreamPurpose::Channel, replication)
    }

    pub(crate) fn with_purpose(
        config: &FadingConfig,
        purpose: StreamPurpose,
        index: u64,
    ) -> Result<Self> {
        config.validate()?;
        let m = config.nakagami_m;
        let fading =
            Gamma::new(m, 1.0 / m).map_err(|e| Error::config(format!("nakagami_m={m}: {e}")))?;
        let mut rng = stream_rng(config.seed, purpose, index);
        let position = match config.placement {
            Placement::Fixed(g) => Some(g),
            Placement::UniformPerRound => None,
            Placement::UniformPerReplication => Some(Geometry::uniform(&mut rng)),
        };
        Ok(ChannelSampler {
            config: *config,
            fading,
            position,
            rng,
            round: 0,
        })
    }

    pub fn config(&self) -> &FadingConfig {
        &self.config
    }

    /// Relay position shared by all rounds, if the placement fixes one.
    pub fn position(&self) -> Option<Geometry> {
        self.position
    }

    pub fn next_round(&mut self) -> ChannelRealization {
        self.round += 1;
        sample_round(
            &self.config,
            &self.fading,
            self.position,
            &mut self.rng,
            self.round,
        )
    }

    /// Raw Nakagami power draw, exposed for distribution checks.
    pub fn sample_fading_power(&mut self) -> f64 {
        self.fading.sample(&mut self.rng)
    }
}

impl Iterator for ChannelSampler {
    type Item = ChannelRealization;

    fn next(&mut self) -> Option<ChannelRealization> {
        Some(self.next_round())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixed(x: f64, y: f64) -> FadingConfig {
        FadingConfig {
            placement: Placement::Fixed(Geometry::new(x, y).unwrap()),
            ..FadingConfig::default()
        }
    }

    #[test]
    fn distances() {
        let mid = Geometry::new(0.0, 0.0).unwrap();
        assert_eq!(distance(&mid, Endpoint::Source0), 0.5);
        assert_eq!(distance(&mid, Endpoint::Source2), 0.5);
        let collinear = Geometry::new(0.5 - 1e-12, 0.0);
        assert!(collinear.is_ok());
        let g = Geometry::new(0.0, 0.5).unwrap();
        assert_abs_diff_eq!(
            distance(&g, Endpoint::Source2),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn collinear_relay_beyond_source() {
        // relay on the far side of source 2
        let g = Geometry::new(1.5, 0.0).unwrap();
        assert_eq!(distance(&g, Endpoint::Source0), 2.0);
        let g = Geometry::new(0.5, 0.5).unwrap();
        assert_eq!(distance(&g, Endpoint::Source2), 0.5);
    }

    #[test]
    fn relay_on_source_is_rejected() {
        assert!(Geometry::new(-0.5, 0.0).is_err());
        assert!(Geometry::new(0.5, 0.0).is_err());
    }

    #[test]
    fn invalid_m_rejected() {
        let cfg = FadingConfig {
            nakagami_m: 0.4,
            ..FadingConfig::default()
        };
        assert!(ChannelSampler::new(&cfg, 0).is_err());
        let cfg = FadingConfig {
            beta: 0.0,
            ..FadingConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snr_scaling_and_reciprocity() {
        let r = ChannelRealization::new(1, 3.0, 1.0, 1.0, 1.0);
        assert_eq!(snr(&r, Link::Uplink01), 3.0);
        assert_eq!(snr(&r, Link::Uplink01), snr(&r, Link::Downlink10));
        assert_eq!(snr(&r, Link::Uplink21), snr(&r, Link::Downlink12));
        let r = ChannelRealization::new(1, 0.0, 1.0, 2.0, 0.5);
        assert_eq!(snr(&r, Link::Uplink21), 4.0);
    }

    #[test]
    fn snr_db_round_trip() {
        let cfg = FadingConfig::default().with_snr_db(20.0);
        assert_abs_diff_eq!(cfg.power, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cfg.snr_db(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = FadingConfig {
            seed: 11,
            ..FadingConfig::default()
        };
        let a: Vec<_> = ChannelSampler::new(&cfg, 0).unwrap().take(100).collect();
        let b: Vec<_> = ChannelSampler::new(&cfg, 0).unwrap().take(100).collect();
        assert_eq!(a, b);
        let c: Vec<_> = ChannelSampler::new(&cfg, 1).unwrap().take(100).collect();
        assert_ne!(a, c);
        assert!(a.iter().enumerate().all(|(i, r)| r.round == i as u64 + 1));
    }

    #[test]
    fn rayleigh_mean_gain_at_half_distance() {
        // m = 1: |alpha|^2 ~ Exp(1); d = 0.5, beta = 3 gives E{g} = 8.
        let mut s = ChannelSampler::new(&fixed(0.0, 0.0), 0).unwrap();
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.next_round().g01).sum::<f64>() / n as f64;
        assert!((mean - 8.0).abs() / 8.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn unit_mean_fading_power_for_all_m() {
        for m in [0.5, 1.0, 2.0, 4.0] {
            let cfg = FadingConfig {
                nakagami_m: m,
                seed: 5,
                ..FadingConfig::default()
            };
            let mut s = ChannelSampler::new(&cfg, 0).unwrap();
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| s.sample_fading_power()).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            // Var{|alpha|^2} = 1/m, so 5 standard errors is sqrt(1/m/n)*5.
            let tol = 5.0 * (1.0 / m / n as f64).sqrt();
            assert!((mean - 1.0).abs() < tol, "m={m}: mean {mean}");
            assert!(draws.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn per_replication_placement_holds_position() {
        let cfg = FadingConfig {
            placement: Placement::UniformPerReplication,
            ..FadingConfig::default()
        };
        let a = ChannelSampler::new(&cfg, 0).unwrap();
        let b = ChannelSampler::new(&cfg, 1).unwrap();
        let pa = a.position().unwrap();
        assert_ne!(pa, b.position().unwrap());
        assert!(pa.relay_x().abs() <= 0.5 && pa.relay_y().abs() <= 0.5);
    }
}
