//! Closed-form operation counts.
//!
//! For a layer of `N` neurons whose neighbours are also `N` wide, with weight
//! density `w` and message density `m`:
//!
//! | case | synops per core | computes per core | traffic to next layer |
//! |---|---|---|---|
//! | one core per layer | `m w N^2` | `N (1 - (1-w)^(mN))` | `m N` |
//! | `C_i` cores, next layer on `C_next` | `m w N^2 / C_i` | `N (1 - (1-w)^(mN)) / C_i` | `m N C_next` |
//! | width `x N_cap`, capacity-bound | `m w N_cap^2` | `n_core (1 - (1-w)^(m x N_cap))` | `m x N_cap ceil(x^2)` |
//!
//! Traffic is counted with full multicast: a message is sent to every core
//! of the next layer even when all of that core's synapses for it are pruned.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{conv_window, PartitionPlan};
use crate::workload::{CostModel, LayerKind, NetworkSpec, WeightFormat};

/// Which resource bounds the duration of a timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    /// Synaptic weight fetch and accumulate.
    Memory,
    /// Neuron activation updates.
    Compute,
    /// Message congestion on the network-on-chip.
    Traffic,
}

impl Bottleneck {
    pub fn as_str(self) -> &'static str {
        match self {
            Bottleneck::Memory => "memory",
            Bottleneck::Compute => "compute",
            Bottleneck::Traffic => "traffic",
        }
    }

    /// Rotation order used by the optimizer.
    pub fn next(self) -> Self {
        match self {
            Bottleneck::Memory => Bottleneck::Compute,
            Bottleneck::Compute => Bottleneck::Traffic,
            Bottleneck::Traffic => Bottleneck::Memory,
        }
    }

    /// Picks the largest of three cost terms; ties go Memory, then Traffic,
    /// then Compute.
    pub fn dominant(memory: f64, compute: f64, traffic: f64) -> Self {
        if memory >= compute && memory >= traffic {
            Bottleneck::Memory
        } else if traffic >= compute {
            Bottleneck::Traffic
        } else {
            Bottleneck::Compute
        }
    }
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bottleneck {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "memory" => Ok(Bottleneck::Memory),
            "compute" => Ok(Bottleneck::Compute),
            "traffic" => Ok(Bottleneck::Traffic),
            other => Err(Error::semantic(
                "bottleneck",
                format!("unknown state `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCounts {
    pub synops_per_core: f64,
    pub computes_per_core: f64,
    /// Messages injected toward the next layer, multicast copies included.
    pub traffic_out: f64,
    pub cores_used: usize,
}

/// Probability that a neuron receives no synop from `m * n` incoming
/// messages: `(1 - w)^(m n)`, with the exponent taken as a real number.
pub fn p_no_message(w: f64, m: f64, n: usize) -> f64 {
    (1.0 - w).powf(m * n as f64)
}

/// Neurons that receive at least one synop and so need an activation update.
pub fn expected_computes(w: f64, m: f64, n: usize) -> f64 {
    n as f64 * (1.0 - p_no_message(w, m, n))
}

pub fn single_core_counts(n: usize, m: f64, w: f64) -> AnalyticCounts {
    let nf = n as f64;
    AnalyticCounts {
        synops_per_core: m * w * nf * nf,
        computes_per_core: expected_computes(w, m, n),
        traffic_out: m * nf,
        cores_used: 1,
    }
}

/// Counts when the layer is voluntarily split over `cores` cores and the next
/// layer over `next_cores` cores.
pub fn voluntary_counts(
    n: usize,
    m: f64,
    w: f64,
    cores: usize,
    next_cores: usize,
) -> AnalyticCounts {
    let cores = cores.max(1);
    let next_cores = next_cores.max(1);
    let nf = n as f64;
    AnalyticCounts {
        synops_per_core: m * w * nf * nf / cores as f64,
        computes_per_core: expected_computes(w, m, n) / cores as f64,
        traffic_out: m * nf * next_cores as f64,
        cores_used: cores,
    }
}

/// Counts when every layer is `x` times wider than what fits one core.
///
/// `n_cap` is the widest layer one core can hold. Each layer needs
/// `ceil(x^2)` cores, each holding `ceil(x n_cap / ceil(x^2))` neurons.
pub fn forced_counts(n_cap: usize, m: f64, w: f64, x: f64) -> Result<AnalyticCounts> {
    if x.is_nan() || x < 1.0 {
        return Err(Error::semantic(
            "width factor",
            format!("x = {x} must be at least 1"),
        ));
    }
    let cap = n_cap as f64;
    let cores = (x * x).ceil();
    let width = x * cap;
    let per_core = (width / cores).ceil();
    Ok(AnalyticCounts {
        synops_per_core: m * w * cap * cap,
        computes_per_core: per_core * (1.0 - (1.0 - w).powf(m * width)),
        traffic_out: m * width * cores,
        cores_used: cores as usize,
    })
}

/// Classifies counts by their largest cost term:
/// `synops * t_synop_dense`, `computes * t_compute`, `traffic * t_link`.
pub fn predict_bottleneck(counts: &AnalyticCounts, cost: &CostModel) -> Bottleneck {
    Bottleneck::dominant(
        counts.synops_per_core * cost.t_synop_dense,
        counts.computes_per_core * cost.t_compute,
        counts.traffic_out * cost.t_link,
    )
}

/// Per-layer expected counts of an arbitrary network under `plan`.
///
/// Layer `j` receives the events of layer `j - 1`; its synops are the weight
/// fetches that layer's connection requires (every stored entry for the dense
/// format, nonzero entries for the sparse format) averaged over its cores.
pub fn network_counts(net: &NetworkSpec, plan: &PartitionPlan) -> Vec<AnalyticCounts> {
    let layers = net.layers();
    (0..layers.len())
        .map(|j| {
            let layer = &layers[j];
            let cores = plan.partition_count(j);
            let (synops, computes) = if j == 0 {
                (0.0, 0.0)
            } else {
                let prev = &layers[j - 1];
                let m = prev.activation_density;
                let w = prev.weight_density;
                let fetch_scale = match prev.weight_format {
                    WeightFormat::Dense => 1.0,
                    WeightFormat::Sparse => w,
                };
                let fanout = prev.fanout(layer) as f64;
                let synops = m * prev.neurons as f64 * fanout * fetch_scale;
                let computes = match prev.kind {
                    LayerKind::Dense => {
                        layer.neurons as f64 * (1.0 - p_no_message(w, m, prev.neurons))
                    }
                    LayerKind::Conv => {
                        conv_expected_computes(prev.neurons, layer.neurons, fanout as usize, m, w)
                    }
                };
                (synops, computes)
            };
            let traffic = match layers.get(j + 1) {
                None => 0.0,
                Some(next) => {
                    let m = layer.activation_density;
                    match layer.kind {
                        LayerKind::Dense => {
                            m * layer.neurons as f64 * plan.partition_count(j + 1) as f64
                        }
                        LayerKind::Conv => {
                            let fanout = layer.fanout(next);
                            let destinations: usize = (0..layer.neurons)
                                .map(|s| {
                                    plan.partitions_overlapping(
                                        j + 1,
                                        conv_window(layer.neurons, next.neurons, fanout, s),
                                    )
                                    .len()
                                })
                                .sum();
                            m * destinations as f64
                        }
                    }
                }
            };
            AnalyticCounts {
                synops_per_core: synops / cores as f64,
                computes_per_core: computes / cores as f64,
                traffic_out: traffic,
                cores_used: cores,
            }
        })
        .collect()
}

/// Expected updates of a conv-connected layer: target `t` is reached by
/// `k_t` source windows and stays idle with probability `(1-w)^(m k_t)`.
pub(crate) fn conv_expected_computes(src: usize, dst: usize, fanout: usize, m: f64, w: f64) -> f64 {
    window_coverage(src, dst, fanout)
        .iter()
        .map(|&k| 1.0 - (1.0 - w).powf(m * k as f64))
        .sum()
}

/// Number of source windows covering each target neuron.
pub(crate) fn window_coverage(src: usize, dst: usize, fanout: usize) -> Vec<usize> {
    let mut diff = vec![0i64; dst + 1];
    for s in 0..src {
        let win = conv_window(src, dst, fanout, s);
        diff[win.start] += 1;
        diff[win.end] -= 1;
    }
    let mut out = Vec::with_capacity(dst);
    let mut acc = 0i64;
    for d in diff.iter().take(dst) {
        acc += d;
        out.push(acc as usize);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_no_message_examples() {
        assert_eq!(p_no_message(1.0, 0.5, 10), 0.0);
        assert_eq!(p_no_message(0.3, 0.0, 10), 1.0);
        assert_eq!(p_no_message(1.0, 0.0, 10), 1.0);
        assert!((p_no_message(0.1, 0.5, 100) - 0.005154).abs() < 1e-6);
    }

    #[test]
    fn expected_computes_examples() {
        assert_eq!(expected_computes(1.0, 0.7, 10), 10.0);
        assert_eq!(expected_computes(0.4, 0.0, 10), 0.0);
        assert!((expected_computes(0.1, 0.5, 100) - 99.485).abs() < 0.01);
    }

    #[test]
    fn single_core_examples() {
        let c = single_core_counts(4, 0.5, 1.0);
        assert_eq!(c.synops_per_core, 8.0);
        assert_eq!(c.traffic_out, 2.0);
        assert_eq!(c.cores_used, 1);

        let z = single_core_counts(16, 0.0, 0.7);
        assert_eq!(
            (
                z.synops_per_core,
                z.computes_per_core,
                z.traffic_out,
                z.cores_used
            ),
            (0.0, 0.0, 0.0, 1)
        );
        assert!((single_core_counts(100, 0.3, 0.5).synops_per_core - 1500.0).abs() < 1e-9);
    }

    #[test]
    fn voluntary_examples() {
        assert_eq!(
            voluntary_counts(32, 0.4, 0.6, 1, 1),
            single_core_counts(32, 0.4, 0.6)
        );
        assert_eq!(voluntary_counts(4, 0.5, 1.0, 1, 2).traffic_out, 4.0);
        assert!((voluntary_counts(100, 0.3, 0.5, 4, 1).synops_per_core - 375.0).abs() < 1e-9);
    }

    #[test]
    fn forced_examples() {
        for (m, w) in [(0.3, 0.5), (1.0, 1.0), (0.0, 0.2)] {
            assert_eq!(
                forced_counts(10, m, w, 1.0).unwrap(),
                single_core_counts(10, m, w)
            );
        }
        let two = forced_counts(10, 0.3, 1.0, 2.0).unwrap();
        assert!((two.traffic_out - 24.0).abs() < 1e-12);
        assert_eq!(two.cores_used, 4);
        assert_eq!(
            two.synops_per_core,
            forced_counts(10, 0.3, 1.0, 1.0).unwrap().synops_per_core
        );
        assert!(forced_counts(10, 0.3, 1.0, 0.5).is_err());
        assert!(forced_counts(10, 0.3, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn forced_traffic_is_cubic() {
        for x in [1.0, 2.0, 3.0, 5.0] {
            let a = forced_counts(12, 0.25, 0.5, x).unwrap().traffic_out;
            let b = forced_counts(12, 0.25, 0.5, 2.0 * x).unwrap().traffic_out;
            assert!((b / a - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bottleneck_prediction() {
        let unit = CostModel {
            t_synop_dense: 1.0,
            t_compute: 1.0,
            t_link: 1.0,
            ..CostModel::default()
        };
        let counts = |s, c, t| AnalyticCounts {
            synops_per_core: s,
            computes_per_core: c,
            traffic_out: t,
            cores_used: 1,
        };
        assert_eq!(
            predict_bottleneck(&counts(100.0, 5.0, 10.0), &unit),
            Bottleneck::Memory
        );
        assert_eq!(
            predict_bottleneck(&counts(7.0, 7.0, 7.0), &unit),
            Bottleneck::Memory
        );
        assert_eq!(
            predict_bottleneck(&counts(1.0, 7.0, 7.0), &unit),
            Bottleneck::Traffic
        );
        assert_eq!(
            predict_bottleneck(&counts(1.0, 7.0, 2.0), &unit),
            Bottleneck::Compute
        );
        // 312.5 synops, 6.25 computes, 800 messages per core pair
        let wide = voluntary_counts(100, 0.5, 1.0, 16, 16);
        assert_eq!(predict_bottleneck(&wide, &unit), Bottleneck::Traffic);
    }

    #[test]
    fn rotation_and_parsing() {
        assert_eq!(Bottleneck::Memory.next(), Bottleneck::Compute);
        assert_eq!(Bottleneck::Compute.next(), Bottleneck::Traffic);
        assert_eq!(Bottleneck::Traffic.next(), Bottleneck::Memory);
        assert_eq!(
            "Traffic".parse::<Bottleneck>().unwrap(),
            Bottleneck::Traffic
        );
        assert!("idle".parse::<Bottleneck>().is_err());
    }

    #[test]
    fn coverage_counts_windows() {
        // 4 sources, 4 targets, fanout 2 -> windows [0,2) [0,2) [1,3) [2,4)
        assert_eq!(window_coverage(4, 4, 2), vec![2, 3, 2, 1]);
        assert_eq!(window_coverage(3, 5, 5), vec![3; 5]);
    }
}
