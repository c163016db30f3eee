//! Timestep-level simulation of a partitioned, mapped network.
//!
//! Each step the source layers emit events, every event is multicast to the
//! cores holding its targets, and the cores fetch weights, update neurons and
//! inject messages. Counts become time through [`timing`] and the run is
//! summarised in a [`SimReport`].

pub mod counts;
pub mod events;
pub mod timing;

use serde::{Deserialize, Serialize};

use crate::analytic::Bottleneck;
use crate::error::{Error, Result};
use crate::placement::{MappingPlan, PartitionPlan};
use crate::workload::{ChipSpec, NetworkSpec, SparsitySchedule};

pub use counts::{count_step, CoreCounts, StepContext, StepCounts, SynapseMasks};
pub use events::{generate_events, EventMode, EventTrace, LayerEvents};
pub use timing::{core_time, step_energy, step_time, CoreTerms};

/// Mean per-core activity over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub core: usize,
    pub layer: usize,
    pub partition: usize,
    pub x: usize,
    pub y: usize,
    pub neurons: usize,
    pub synops: f64,
    pub computes: f64,
    pub msgs_in: f64,
    pub msgs_out: f64,
    pub synop_term: f64,
    pub compute_term: f64,
    pub injection_term: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub max_core_synops: f64,
    pub max_link_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: String,
    pub steps: usize,
    /// Mean cycles per step.
    pub time_per_step: f64,
    pub energy_per_step: f64,
    /// Means over steps of the per-step maxima.
    pub max_core_synops: f64,
    pub max_core_computes: f64,
    pub max_link_load: f64,
    pub active_cores: usize,
    /// Dominant time term of the mean breakdown.
    pub bottleneck: Bottleneck,
    pub per_step: Vec<StepRecord>,
    pub per_core: Vec<CoreReport>,
}

impl SimReport {
    fn argmax_core(&self, key: impl Fn(&CoreReport) -> f64) -> Option<&CoreReport> {
        // First maximum wins so ties resolve to the lowest core id.
        self.per_core.iter().fold(None, |best, c| match best {
            Some(b) if key(b) >= key(c) => Some(b),
            _ => Some(c),
        })
    }

    /// Core executing the most synops.
    pub fn argmax_synops_core(&self) -> Option<&CoreReport> {
        self.argmax_core(|c| c.synops)
    }

    pub fn argmax_computes_core(&self) -> Option<&CoreReport> {
        self.argmax_core(|c| c.computes)
    }

    /// Core spending the most cycles on synops, decode included.
    pub fn argmax_synop_cycles_core(&self) -> Option<&CoreReport> {
        self.argmax_core(|c| c.synop_term)
    }

    pub fn argmax_compute_cycles_core(&self) -> Option<&CoreReport> {
        self.argmax_core(|c| c.compute_term)
    }

    /// Up to `k` core ids with the most outgoing messages; ties by lower id.
    pub fn top_output_cores(&self, k: usize) -> Vec<usize> {
        let mut cores: Vec<&CoreReport> =
            self.per_core.iter().filter(|c| c.msgs_out > 0.0).collect();
        cores.sort_by(|a, b| b.msgs_out.total_cmp(&a.msgs_out).then(a.core.cmp(&b.core)));
        cores.into_iter().take(k).map(|c| c.core).collect()
    }
}

/// Inputs of one simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimInput<'a> {
    pub net: &'a NetworkSpec,
    pub chip: &'a ChipSpec,
    pub schedule: &'a SparsitySchedule,
    pub plan: &'a PartitionPlan,
    pub mapping: &'a MappingPlan,
}

/// Runs `steps` timesteps and summarises them.
pub fn simulate(input: SimInput<'_>, steps: usize, mode: EventMode) -> Result<SimReport> {
    let SimInput {
        net,
        chip,
        schedule,
        plan,
        mapping,
    } = input;
    let net = net.with_schedule(schedule)?;
    plan.validate(&net, chip)?;
    if mapping.len() != plan.total_cores() {
        return Err(Error::Inconsistent(format!(
            "mapping places {} cores, plan has {}",
            mapping.len(),
            plan.total_cores()
        )));
    }
    mapping.validate(chip)?;

    let steps = steps.max(1);
    let trace = generate_events(&net, schedule, steps, mode)?;
    let masks = match mode {
        EventMode::Sampled { seed } => Some(SynapseMasks::sample(&net, seed)),
        EventMode::Expected => None,
    };
    let ctx = StepContext {
        net: &net,
        chip,
        plan,
        mapping,
        masks: masks.as_ref(),
    };
    let cost = &chip.cost;
    let active = plan.total_cores();

    let mut per_step = Vec::with_capacity(steps);
    let mut sums = vec![[0.0f64; 4]; active];
    let mut max_computes = 0.0;
    for step in 0..steps {
        let counts = count_step(&ctx, &trace, step);
        let time = step_time(&counts, cost);
        let energy = step_energy(&counts, time, active, cost);
        for (acc, c) in sums.iter_mut().zip(&counts.cores) {
            acc[0] += c.synops;
            acc[1] += c.computes;
            acc[2] += c.msgs_in;
            acc[3] += c.msgs_out;
        }
        max_computes += counts.max_core_computes();
        per_step.push(StepRecord {
            step,
            time,
            energy,
            max_core_synops: counts.max_core_synops(),
            max_link_load: counts.max_link_load(),
        });
    }

    let n = steps as f64;
    let per_core: Vec<CoreReport> = plan
        .cores()
        .zip(&sums)
        .map(|(slot, acc)| {
            let counts = CoreCounts {
                layer: slot.layer,
                synops: acc[0] / n,
                computes: acc[1] / n,
                msgs_in: acc[2] / n,
                msgs_out: acc[3] / n,
                compute_cost_class: net.layer(slot.layer).compute_cost_class,
                weight_format: slot
                    .layer
                    .checked_sub(1)
                    .map(|p| net.layer(p).weight_format),
            };
            let terms = CoreTerms::of(&counts, cost);
            let at = mapping.coord(slot.id);
            CoreReport {
                core: slot.id,
                layer: slot.layer,
                partition: slot.partition,
                x: at.x,
                y: at.y,
                neurons: slot.neurons.len(),
                synops: counts.synops,
                computes: counts.computes,
                msgs_in: counts.msgs_in,
                msgs_out: counts.msgs_out,
                synop_term: terms.synop,
                compute_term: terms.compute,
                injection_term: terms.injection,
                time: terms.combined(cost.sequential),
            }
        })
        .collect();

    let mean = |f: fn(&StepRecord) -> f64| per_step.iter().map(f).sum::<f64>() / n;
    let max_link_load = mean(|s| s.max_link_load);
    let fold_max = |f: fn(&CoreReport) -> f64| per_core.iter().map(f).fold(0.0, f64::max);
    let bottleneck = Bottleneck::dominant(
        fold_max(|c| c.synop_term),
        fold_max(|c| c.compute_term),
        fold_max(|c| c.injection_term).max(max_link_load * cost.t_link),
    );

    Ok(SimReport {
        mode: mode.label(),
        steps,
        time_per_step: mean(|s| s.time),
        energy_per_step: mean(|s| s.energy),
        max_core_synops: mean(|s| s.max_core_synops),
        max_core_computes: max_computes / n,
        max_link_load,
        active_cores: active,
        bottleneck,
        per_step,
        per_core,
    })
}
