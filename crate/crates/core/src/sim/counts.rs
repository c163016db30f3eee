//! Per-step operation counting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::window_coverage;
use crate::placement::{conv_window, route, LinkId, MappingPlan, PartitionPlan};
use crate::sim::events::{EventTrace, LayerEvents};
use crate::workload::{ChipSpec, LayerKind, NetworkSpec, WeightFormat};

/// Operation counts of one logical core in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreCounts {
    pub layer: usize,
    /// Weight fetch + accumulate operations.
    pub synops: f64,
    /// Neuron updates (neurons that received at least one nonzero synop).
    pub computes: f64,
    pub msgs_in: f64,
    /// Messages injected, one per destination core of each event.
    pub msgs_out: f64,
    pub compute_cost_class: u32,
    /// Format of the weights this core fetches; `None` for the input layer.
    pub weight_format: Option<WeightFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepCounts {
    pub cores: Vec<CoreCounts>,
    /// Messages crossing each link, indexed by [`LinkId::index`].
    pub links: Vec<f64>,
    pub mesh_width: usize,
}

impl StepCounts {
    pub fn synops_total(&self) -> f64 {
        self.cores.iter().map(|c| c.synops).sum()
    }

    pub fn computes_total(&self) -> f64 {
        self.cores.iter().map(|c| c.computes).sum()
    }

    pub fn msgs_out_total(&self) -> f64 {
        self.cores.iter().map(|c| c.msgs_out).sum()
    }

    pub fn msgs_in_total(&self) -> f64 {
        self.cores.iter().map(|c| c.msgs_in).sum()
    }

    /// Sum of link loads: every message counted once per hop.
    pub fn link_hops_total(&self) -> f64 {
        self.links.iter().sum()
    }

    pub fn max_link_load(&self) -> f64 {
        self.links.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_core_synops(&self) -> f64 {
        self.cores.iter().map(|c| c.synops).fold(0.0, f64::max)
    }

    pub fn max_core_computes(&self) -> f64 {
        self.cores.iter().map(|c| c.computes).fold(0.0, f64::max)
    }

    /// Loaded links in index order.
    pub fn link_loads(&self) -> impl Iterator<Item = (LinkId, f64)> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (LinkId::from_index(i, self.mesh_width), v))
    }
}

/// Fixed nonzero masks of every connection, used in sampled mode.
///
/// Row `s` of connection `i` has one bit per position reached by source
/// neuron `s`: every neuron of layer `i + 1` for dense connections, the
/// window offsets for conv connections.
#[derive(Debug, Clone)]
pub struct SynapseMasks {
    connections: Vec<MaskMatrix>,
}

#[derive(Debug, Clone)]
struct MaskMatrix {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl MaskMatrix {
    fn row(&self, s: usize) -> &[u64] {
        &self.bits[s * self.words_per_row..(s + 1) * self.words_per_row]
    }
}

impl SynapseMasks {
    /// Draws each synapse as nonzero with probability `weight_density`.
    pub fn sample(net: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Separate stream from the event generator seeded with the same value.
        rng.set_stream(1);
        let connections = net
            .layers()
            .windows(2)
            .map(|pair| {
                let (src, next) = (&pair[0], &pair[1]);
                let width = src.fanout(next);
                let words_per_row = width.div_ceil(64);
                let mut bits = vec![0u64; words_per_row * src.neurons];
                let w = src.weight_density;
                for s in 0..src.neurons {
                    for k in 0..width {
                        if rng.random_bool(w) {
                            bits[s * words_per_row + k / 64] |= 1 << (k % 64);
                        }
                    }
                }
                MaskMatrix {
                    words_per_row,
                    bits,
                }
            })
            .collect();
        SynapseMasks { connections }
    }
}

fn bit(row: &[u64], k: usize) -> bool {
    row[k / 64] >> (k % 64) & 1 == 1
}

/// Set bits of `row` in `range`.
fn popcount_range(row: &[u64], range: std::ops::Range<usize>) -> u32 {
    if range.is_empty() {
        return 0;
    }
    let (first, last) = (range.start / 64, (range.end - 1) / 64);
    let mut total = 0;
    for (wi, &word) in row.iter().enumerate().take(last + 1).skip(first) {
        let mut word = word;
        if wi == first {
            word &= !0u64 << (range.start % 64);
        }
        if wi == last {
            let top = range.end - wi * 64;
            if top < 64 {
                word &= (1u64 << top) - 1;
            }
        }
        total += word.count_ones();
    }
    total
}

/// Everything needed to count a step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub net: &'a NetworkSpec,
    pub chip: &'a ChipSpec,
    pub plan: &'a PartitionPlan,
    pub mapping: &'a MappingPlan,
    /// Required for sampled traces.
    pub masks: Option<&'a SynapseMasks>,
}

/// Counts synops, computes, messages and link loads of one step.
pub fn count_step(ctx: &StepContext<'_>, trace: &EventTrace, step: usize) -> StepCounts {
    let net = ctx.net;
    let plan = ctx.plan;
    let mut cores: Vec<CoreCounts> = plan
        .cores()
        .map(|slot| CoreCounts {
            layer: slot.layer,
            synops: 0.0,
            computes: 0.0,
            msgs_in: 0.0,
            msgs_out: 0.0,
            compute_cost_class: net.layer(slot.layer).compute_cost_class,
            weight_format: slot
                .layer
                .checked_sub(1)
                .map(|p| net.layer(p).weight_format),
        })
        .collect();
    let total = plan.total_cores();
    // messages between (source core, destination core), row-major.
    let mut pair = vec![0.0f64; total * total];

    for i in 0..net.len() - 1 {
        let events = trace.layer(step, i);
        match events {
            LayerEvents::Expected { density, .. } => {
                count_expected(ctx, i, *density, &mut cores, &mut pair)
            }
            LayerEvents::Sampled(active) => {
                let masks = ctx.masks.expect("sampled traces need synapse masks");
                count_sampled(ctx, i, active, &masks.connections[i], &mut cores, &mut pair)
            }
        }
    }

    let width = ctx.chip.mesh_width;
    let mut links = vec![0.0; 4 * ctx.chip.core_count()];
    for src in 0..total {
        for dst in 0..total {
            let n = pair[src * total + dst];
            if n == 0.0 {
                continue;
            }
            cores[src].msgs_out += n;
            cores[dst].msgs_in += n;
            for link in route(ctx.mapping.coord(src), ctx.mapping.coord(dst)) {
                links[link.index(width)] += n;
            }
        }
    }
    StepCounts {
        cores,
        links,
        mesh_width: width,
    }
}

fn count_expected(
    ctx: &StepContext<'_>,
    i: usize,
    m: f64,
    cores: &mut [CoreCounts],
    pair: &mut [f64],
) {
    let (net, plan) = (ctx.net, ctx.plan);
    let total = plan.total_cores();
    let src = net.layer(i);
    let next = net.layer(i + 1);
    let w = src.weight_density;
    let scale = match src.weight_format {
        WeightFormat::Dense => 1.0,
        WeightFormat::Sparse => w,
    };
    match src.kind {
        LayerKind::Dense => {
            let events = m * src.neurons as f64;
            let hit = 1.0 - (1.0 - w).powf(events);
            for (q, r) in plan.ranges(i + 1).iter().enumerate() {
                let dst = plan.core_id(i + 1, q);
                cores[dst].synops += events * r.len() as f64 * scale;
                cores[dst].computes += r.len() as f64 * hit;
                for (p, rs) in plan.ranges(i).iter().enumerate() {
                    pair[plan.core_id(i, p) * total + dst] += m * rs.len() as f64;
                }
            }
        }
        LayerKind::Conv => {
            let fanout = src.fanout(next);
            for s in 0..src.neurons {
                let from = plan.core_id(i, plan.partition_of(i, s));
                let win = conv_window(src.neurons, next.neurons, fanout, s);
                for q in plan.partitions_overlapping(i + 1, win.clone()) {
                    let r = &plan.ranges(i + 1)[q];
                    let dst = plan.core_id(i + 1, q);
                    let overlap = win.end.min(r.end) - win.start.max(r.start);
                    cores[dst].synops += m * overlap as f64 * scale;
                    pair[from * total + dst] += m;
                }
            }
            let coverage = window_coverage(src.neurons, next.neurons, fanout);
            for (q, r) in plan.ranges(i + 1).iter().enumerate() {
                let dst = plan.core_id(i + 1, q);
                cores[dst].computes += coverage[r.clone()]
                    .iter()
                    .map(|&k| 1.0 - (1.0 - w).powf(m * k as f64))
                    .sum::<f64>();
            }
        }
    }
}

fn count_sampled(
    ctx: &StepContext<'_>,
    i: usize,
    active: &[usize],
    masks: &MaskMatrix,
    cores: &mut [CoreCounts],
    pair: &mut [f64],
) {
    let (net, plan) = (ctx.net, ctx.plan);
    let total = plan.total_cores();
    let src = net.layer(i);
    let next = net.layer(i + 1);
    let dense_format = src.weight_format == WeightFormat::Dense;
    let mut hit = vec![false; next.neurons];
    match src.kind {
        LayerKind::Dense => {
            let mut union = vec![0u64; masks.words_per_row];
            for &s in active {
                let row = masks.row(s);
                let from = plan.core_id(i, plan.partition_of(i, s));
                for (q, r) in plan.ranges(i + 1).iter().enumerate() {
                    let dst = plan.core_id(i + 1, q);
                    cores[dst].synops += if dense_format {
                        r.len() as f64
                    } else {
                        popcount_range(row, r.clone()) as f64
                    };
                    pair[from * total + dst] += 1.0;
                }
                for (u, &x) in union.iter_mut().zip(row) {
                    *u |= x;
                }
            }
            for (q, r) in plan.ranges(i + 1).iter().enumerate() {
                let dst = plan.core_id(i + 1, q);
                cores[dst].computes += popcount_range(&union, r.clone()) as f64;
            }
        }
        LayerKind::Conv => {
            let fanout = src.fanout(next);
            for &s in active {
                let row = masks.row(s);
                let from = plan.core_id(i, plan.partition_of(i, s));
                let win = conv_window(src.neurons, next.neurons, fanout, s);
                for q in plan.partitions_overlapping(i + 1, win.clone()) {
                    let r = &plan.ranges(i + 1)[q];
                    let dst = plan.core_id(i + 1, q);
                    let lo = win.start.max(r.start);
                    let hi = win.end.min(r.end);
                    let offsets = (lo - win.start)..(hi - win.start);
                    cores[dst].synops += if dense_format {
                        (hi - lo) as f64
                    } else {
                        popcount_range(row, offsets.clone()) as f64
                    };
                    pair[from * total + dst] += 1.0;
                }
                for k in 0..win.len() {
                    if bit(row, k) {
                        hit[win.start + k] = true;
                    }
                }
            }
            for (q, r) in plan.ranges(i + 1).iter().enumerate() {
                let dst = plan.core_id(i + 1, q);
                cores[dst].computes += hit[r.clone()].iter().filter(|&&h| h).count() as f64;
            }
        }
    }
}
