//! Network fault model parameters.

use rand::Rng;
use rand_distr::{Distribution, Triangular};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{field} = {value} is outside [0, 1]")]
    Probability { field: &'static str, value: String },
    #[error("latency must satisfy 1 <= min <= mean <= max, got ({min}, {mean}, {max})")]
    Latency { min: u64, mean: u64, max: u64 },
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("link {from} -> {to} names an undeclared process")]
    UnknownLinkEndpoint { from: ProcessId, to: ProcessId },
}

/// One-way latency in ticks, drawn from a triangular distribution on
/// `[min, max]` whose mode is chosen to give the requested mean. Means outside
/// `[(2 min + max) / 3, (min + 2 max) / 3]` are unreachable; the mode is then
/// clamped to the nearer bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Latency {
    pub min: u64,
    pub mean: u64,
    pub max: u64,
}

impl Latency {
    pub const fn fixed(t: u64) -> Self {
        Self {
            min: t,
            mean: t,
            max: t,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min == 0 || self.min > self.mean || self.mean > self.max {
            return Err(ConfigError::Latency {
                min: self.min,
                mean: self.mean,
                max: self.max,
            });
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.min == self.max {
            return self.min;
        }
        let (min, max) = (self.min as f64, self.max as f64);
        let mode = (3.0 * self.mean as f64 - min - max).clamp(min, max);
        let d = Triangular::new(min, max, mode).expect("validated bounds");
        d.sample(rng).round() as u64
    }
}

impl Default for Latency {
    fn default() -> Self {
        Self {
            min: 50,
            mean: 100,
            max: 150,
        }
    }
}

/// Latency override for one link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub from: ProcessId,
    pub to: ProcessId,
    pub latency: Latency,
    /// Also applies to `to -> from`.
    #[serde(default = "yes")]
    pub symmetric: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub seed: u64,
    pub latency: Latency,
    pub links: Vec<LinkConfig>,
    pub loss_prob: f64,
    pub dup_prob: f64,
    /// Extra delay drawn uniformly from `0..=reorder_jitter` per copy.
    pub reorder_jitter: u64,
    /// Consecutive losses allowed on one link before a copy is forced through.
    pub max_loss_streak: u32,
    pub timer_period: u64,
    pub tick_limit: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            latency: Latency::default(),
            links: Vec::new(),
            loss_prob: 0.0,
            dup_prob: 0.0,
            reorder_jitter: 0,
            max_loss_streak: 3,
            timer_period: 1000,
            tick_limit: 100_000_000,
        }
    }
}

impl NetConfig {
    pub fn validate(&self, processes: &[ProcessId]) -> Result<(), ConfigError> {
        for (field, value) in [("loss_prob", self.loss_prob), ("dup_prob", self.dup_prob)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability {
                    field,
                    value: value.to_string(),
                });
            }
        }
        self.latency.validate()?;
        for l in &self.links {
            l.latency.validate()?;
            if !processes.contains(&l.from) || !processes.contains(&l.to) {
                return Err(ConfigError::UnknownLinkEndpoint {
                    from: l.from,
                    to: l.to,
                });
            }
        }
        if self.max_loss_streak == 0 && self.loss_prob > 0.0 {
            return Err(ConfigError::NotPositive("max_loss_streak"));
        }
        if self.timer_period == 0 {
            return Err(ConfigError::NotPositive("timer_period"));
        }
        if self.tick_limit == 0 {
            return Err(ConfigError::NotPositive("tick_limit"));
        }
        Ok(())
    }

    /// Latency for `from -> to`; the last matching override wins.
    pub fn link_latency(&self, from: ProcessId, to: ProcessId) -> Latency {
        self.links
            .iter()
            .rev()
            .find(|l| {
                (l.from == from && l.to == to) || (l.symmetric && l.from == to && l.to == from)
            })
            .map(|l| l.latency)
            .unwrap_or(self.latency)
    }

    /// Largest mean round-trip time over every ordered pair of `processes`.
    pub fn max_rtt(&self, processes: &[ProcessId]) -> u64 {
        let mut rtt = 0;
        for &a in processes {
            for &b in processes {
                if a != b {
                    rtt = rtt.max(self.link_latency(a, b).mean + self.link_latency(b, a).mean);
                }
            }
        }
        rtt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_latency_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(Latency::fixed(7).sample(&mut rng), 7);
    }

    #[test]
    fn triangular_latency_hits_mean() {
        let lat = Latency {
            min: 20,
            mean: 100,
            max: 200,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let sum: u64 = (0..n).map(|_| lat.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 100.0).abs() < 5.0, "mean {mean}");
    }

    #[test]
    fn link_overrides_are_directional_unless_symmetric() {
        let mut c = NetConfig::default();
        c.links.push(LinkConfig {
            from: ProcessId(1),
            to: ProcessId(2),
            latency: Latency::fixed(9),
            symmetric: false,
        });
        assert_eq!(
            c.link_latency(ProcessId(1), ProcessId(2)),
            Latency::fixed(9)
        );
        assert_eq!(
            c.link_latency(ProcessId(2), ProcessId(1)),
            Latency::default()
        );
        c.links[0].symmetric = true;
        assert_eq!(
            c.link_latency(ProcessId(2), ProcessId(1)),
            Latency::fixed(9)
        );
    }

    #[test]
    fn rejects_bad_values() {
        let ps = [ProcessId(0)];
        let c = NetConfig {
            loss_prob: 1.5,
            ..NetConfig::default()
        };
        assert!(c.validate(&ps).is_err());
        let c = NetConfig {
            latency: Latency {
                min: 10,
                mean: 5,
                max: 20,
            },
            ..NetConfig::default()
        };
        assert!(c.validate(&ps).is_err());
    }
}
