use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::workload::{resolve_schedule, NetworkSpec, SparsitySchedule};

/// How activation events are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum EventMode {
    /// Fractional expected counts `m_i * N_i`; fully deterministic.
    Expected,
    /// Each neuron emits independently with probability `m_i`.
    Sampled { seed: u64 },
}

impl EventMode {
    pub fn label(&self) -> String {
        match self {
            EventMode::Expected => "expected".into(),
            EventMode::Sampled { seed } => format!("sampled({seed})"),
        }
    }
}

/// Events of one layer in one step.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerEvents {
    Expected { density: f64, count: f64 },
    Sampled(Vec<usize>),
}

impl LayerEvents {
    pub fn count(&self) -> f64 {
        match self {
            LayerEvents::Expected { count, .. } => *count,
            LayerEvents::Sampled(idx) => idx.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTrace {
    pub mode: EventMode,
    /// `steps[t][layer]`.
    pub steps: Vec<Vec<LayerEvents>>,
}

impl EventTrace {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn layer(&self, step: usize, layer: usize) -> &LayerEvents {
        &self.steps[step][layer]
    }

    /// Mean events per step of `layer`.
    pub fn mean_events(&self, layer: usize) -> f64 {
        let total: f64 = self.steps.iter().map(|s| s[layer].count()).sum();
        total / self.steps.len().max(1) as f64
    }
}

/// Activation events for `steps` timesteps under `schedule`.
pub fn generate_events(
    net: &NetworkSpec,
    schedule: &SparsitySchedule,
    steps: usize,
    mode: EventMode,
) -> Result<EventTrace> {
    let densities = resolve_schedule(schedule, net.len())?;
    let steps = steps.max(1);
    let trace = match mode {
        EventMode::Expected => {
            let one: Vec<LayerEvents> = net
                .layers()
                .iter()
                .zip(&densities)
                .map(|(l, &m)| LayerEvents::Expected {
                    density: m,
                    count: m * l.neurons as f64,
                })
                .collect();
            vec![one; steps]
        }
        EventMode::Sampled { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..steps)
                .map(|_| {
                    net.layers()
                        .iter()
                        .zip(&densities)
                        .map(|(l, &m)| {
                            LayerEvents::Sampled(
                                (0..l.neurons).filter(|_| rng.random_bool(m)).collect(),
                            )
                        })
                        .collect()
                })
                .collect()
        }
    };
    Ok(EventTrace { mode, steps: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::LayerSpec;

    fn net(n: usize) -> NetworkSpec {
        NetworkSpec::new(vec![LayerSpec::dense(n), LayerSpec::dense(n)]).unwrap()
    }

    #[test]
    fn zero_density_has_no_events() {
        for mode in [EventMode::Expected, EventMode::Sampled { seed: 3 }] {
            let t =
                generate_events(&net(50), &SparsitySchedule::Uniform { m: 0.0 }, 4, mode).unwrap();
            assert!(t.steps.iter().flatten().all(|e| e.count() == 0.0));
        }
    }

    #[test]
    fn expected_count_is_product() {
        let t = generate_events(
            &net(10),
            &SparsitySchedule::Uniform { m: 0.3 },
            2,
            EventMode::Expected,
        )
        .unwrap();
        assert_eq!(t.step_count(), 2);
        assert!((t.layer(1, 0).count() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_mean_follows_density() {
        let t = generate_events(
            &net(10_000),
            &SparsitySchedule::Uniform { m: 0.3 },
            100,
            EventMode::Sampled { seed: 42 },
        )
        .unwrap();
        let mean = t.mean_events(0);
        assert!((mean - 3000.0).abs() / 3000.0 < 0.01, "{mean}");
    }

    #[test]
    fn sampled_is_reproducible() {
        let s = SparsitySchedule::LoHi {
            low: 0.2,
            high: 0.7,
        };
        let a = generate_events(&net(64), &s, 5, EventMode::Sampled { seed: 9 }).unwrap();
        let b = generate_events(&net(64), &s, 5, EventMode::Sampled { seed: 9 }).unwrap();
        let c = generate_events(&net(64), &s, 5, EventMode::Sampled { seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
