//! Bottleneck-guided search over partitionings and mappings.
//!
//! Each iteration assumes a bottleneck state, applies the matching move and
//! keeps the result only if step time drops by more than `epsilon_time`
//! without energy rising by more than `epsilon_energy`. A rejected or
//! impossible move rotates the assumption Memory, Compute, Traffic. The
//! search ends after three consecutive failures or when the budget runs out.
//!
//! When several cores share the peak load no single split shortens the step.
//! A split that does not slow the step but moves the slowest core to another
//! layer, or leaves fewer cores at the peak, is kept pending. The next split
//! builds on it and targets the layer holding the slowest core. A pending
//! chain commits as soon as the time gain clears `epsilon_time` and is
//! discarded on the first failure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic::Bottleneck;
use crate::error::{Error, Result};
use crate::floorline::{suggest, OptimizationAction, DEFAULT_TOP_K};
use crate::placement::{
    default_stride, minimal_partition, strided_mapping, Coord, MappingPlan, PartitionPlan,
};
use crate::sim::{simulate, CoreReport, EventMode, SimInput, SimReport};
use crate::workload::{ChipSpec, NetworkSpec, SparsitySchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub budget: usize,
    /// Minimum relative step-time improvement for acceptance.
    pub epsilon_time: f64,
    /// Maximum relative energy increase tolerated on acceptance.
    pub epsilon_energy: f64,
    pub mode: EventMode,
    pub steps: usize,
    pub top_k: usize,
    /// Consecutive failures that end the search.
    pub patience: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            budget: 32,
            epsilon_time: 0.01,
            epsilon_energy: 0.05,
            mode: EventMode::Expected,
            steps: 1,
            top_k: DEFAULT_TOP_K,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoFreeCores,
    EnergyWorsening,
    NoImprovingMove,
    IterationBudget,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::NoFreeCores => "no free cores",
            StopReason::EnergyWorsening => "energy worsening",
            StopReason::NoImprovingMove => "no improving move",
            StopReason::IterationBudget => "iteration budget",
        })
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub assumption: Bottleneck,
    pub action: String,
    /// Time and energy of the evaluated candidate, or of the current state
    /// when no candidate could be built.
    pub time: f64,
    pub energy: f64,
    pub intensity: f64,
    pub accepted: bool,
}

/// Search state between iterations.
#[derive(Debug, Clone)]
pub struct OptState {
    pub plan: PartitionPlan,
    pub mapping: MappingPlan,
    pub report: SimReport,
    pub assumption: Bottleneck,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub initial: OptState,
    pub best: OptState,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    NoFreeCores,
    NoMove,
    Rejected,
    EnergyWorse,
}

pub struct Optimizer<'a> {
    pub net: &'a NetworkSpec,
    pub chip: &'a ChipSpec,
    pub schedule: &'a SparsitySchedule,
    pub options: OptimizerOptions,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        net: &'a NetworkSpec,
        chip: &'a ChipSpec,
        schedule: &'a SparsitySchedule,
        options: OptimizerOptions,
    ) -> Self {
        Optimizer {
            net,
            chip,
            schedule,
            options,
        }
    }

    fn evaluate(&self, plan: &PartitionPlan, mapping: &MappingPlan) -> Result<SimReport> {
        simulate(
            SimInput {
                net: self.net,
                chip: self.chip,
                schedule: self.schedule,
                plan,
                mapping,
            },
            self.options.steps,
            self.options.mode,
        )
    }

    /// Minimal partitioning on a strided mapping, assuming memory-bound.
    pub fn init_state(&self) -> Result<OptState> {
        let net = self.net.with_schedule(self.schedule)?;
        let plan = minimal_partition(&net, self.chip)?;
        let stride = default_stride(self.chip);
        let mapping = strided_mapping(&plan, self.chip, stride)?;
        let report = self.evaluate(&plan, &mapping)?;
        Ok(OptState {
            plan,
            mapping,
            report,
            assumption: Bottleneck::Memory,
            stride,
        })
    }

    /// Plan and mapping after applying `action` to `state`.
    pub fn propose(
        &self,
        state: &OptState,
        action: &OptimizationAction,
    ) -> Result<(PartitionPlan, MappingPlan)> {
        match action {
            OptimizationAction::SplitLayer { layer } => {
                let plan = state.plan.split_layer(*layer, self.chip)?;
                let mapping = strided_mapping(&plan, self.chip, state.stride)?;
                Ok((plan, mapping))
            }
            OptimizationAction::Remap { cores } => {
                let mapping = greedy_remap(&state.mapping, cores, self.chip);
                if mapping == state.mapping {
                    return Err(Error::NoLegalAction(
                        "remap leaves every core in place".into(),
                    ));
                }
                Ok((state.plan.clone(), mapping))
            }
        }
    }

    fn accepts(
        &self,
        current: &SimReport,
        candidate: &SimReport,
    ) -> std::result::Result<(), Failure> {
        let faster =
            candidate.time_per_step < current.time_per_step * (1.0 - self.options.epsilon_time);
        let affordable = candidate.energy_per_step
            <= current.energy_per_step * (1.0 + self.options.epsilon_energy);
        match (faster, affordable) {
            (true, true) => Ok(()),
            (true, false) => Err(Failure::EnergyWorse),
            _ => Err(Failure::Rejected),
        }
    }

    /// Candidate moves for a suggestion. A traffic remap is paired with a
    /// split of the layer owning the busiest sender, which spreads that
    /// core's injections over two cores.
    fn variants(
        &self,
        action: &OptimizationAction,
        plan: &PartitionPlan,
    ) -> Vec<OptimizationAction> {
        let mut out = vec![action.clone()];
        if let OptimizationAction::Remap { cores } = action {
            if let Some(&hot) = cores.first() {
                out.push(OptimizationAction::SplitLayer {
                    layer: plan.layer_of(hot),
                });
            }
        }
        out
    }

    /// Whether a rejected split may stay pending: the step is no slower and
    /// either the slowest core now sits in another layer or fewer cores
    /// carry the peak load under `assumption`. Cores sharing (or nearly
    /// sharing) the peak otherwise block every single split.
    fn extends_plateau(
        &self,
        base: &SimReport,
        candidate: &SimReport,
        action: &OptimizationAction,
        assumption: Bottleneck,
    ) -> bool {
        let OptimizationAction::SplitLayer { layer } = *action else {
            return false;
        };
        let key: fn(&CoreReport) -> f64 = match assumption {
            Bottleneck::Memory => |c| c.synop_term,
            Bottleneck::Compute => |c| c.compute_term,
            Bottleneck::Traffic => return false,
        };
        let (base_peak, base_count) = peak(base, key);
        let (peak_now, count) = peak(candidate, key);
        let slowest = peak(candidate, |c| c.time).0;
        let moved = layer_max(candidate, layer, |c| c.time) < slowest * (1.0 - PEAK_TOLERANCE);
        let thinned = peak_now >= base_peak * (1.0 - PEAK_TOLERANCE) && count < base_count;
        candidate.time_per_step <= base.time_per_step && (moved || thinned)
    }

    /// Runs the search from [`Optimizer::init_state`].
    pub fn optimize(&self) -> Result<OptOutcome> {
        let initial = self.init_state()?;
        let mut state = initial.clone();
        let mut trace = vec![TraceEntry {
            iteration: 0,
            assumption: state.assumption,
            action: "initial".into(),
            time: state.report.time_per_step,
            energy: state.report.energy_per_step,
            intensity: state.report.max_core_synops,
            accepted: true,
        }];
        let mut failures: Vec<Failure> = Vec::new();
        // Uncommitted splits crossing a plateau.
        let mut pending: Option<OptState> = None;

        for iteration in 1..=self.options.budget {
            let base = pending.as_ref().unwrap_or(&state);
            let mut suggestion = suggest(state.assumption, &base.report)?;
            match &mut suggestion.action {
                OptimizationAction::Remap { cores } => cores.truncate(self.options.top_k),
                // A pending chain continues at whichever layer now holds the slowest core.
                OptimizationAction::SplitLayer { layer } if pending.is_some() => {
                    if let Some(c) = base
                        .report
                        .per_core
                        .iter()
                        .max_by(|a, b| a.time.total_cmp(&b.time).then(b.core.cmp(&a.core)))
                    {
                        *layer = c.layer;
                    }
                }
                OptimizationAction::SplitLayer { .. } => {}
            }
            let mut entry = TraceEntry {
                iteration,
                assumption: state.assumption,
                action: suggestion.action.to_string(),
                time: base.report.time_per_step,
                energy: base.report.energy_per_step,
                intensity: base.report.max_core_synops,
                accepted: false,
            };

            // Fastest feasible variant; the first wins ties.
            let mut chosen: Option<(OptimizationAction, PartitionPlan, MappingPlan, SimReport)> =
                None;
            let mut first_error = None;
            for action in self.variants(&suggestion.action, &base.plan) {
                match self.propose(base, &action) {
                    Ok((plan, mapping)) => {
                        let report = self.evaluate(&plan, &mapping)?;
                        if chosen
                            .as_ref()
                            .is_none_or(|c| report.time_per_step < c.3.time_per_step)
                        {
                            chosen = Some((action, plan, mapping, report));
                        }
                    }
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }

            let step = match (chosen, first_error) {
                (Some((action, plan, mapping, report)), _) => {
                    entry.action = action.to_string();
                    entry.time = report.time_per_step;
                    entry.energy = report.energy_per_step;
                    entry.intensity = report.max_core_synops;
                    match self.accepts(&state.report, &report) {
                        Ok(()) => {
                            entry.accepted = true;
                            Step::Accept(plan, mapping, report)
                        }
                        Err(_)
                            if self.extends_plateau(
                                &base.report,
                                &report,
                                &action,
                                state.assumption,
                            ) =>
                        {
                            entry.action.push_str(" (pending)");
                            Step::Pending(plan, mapping, report)
                        }
                        Err(f) => Step::Fail(f),
                    }
                }
                (None, Some(e)) => {
                    entry.action = format!("{} (infeasible: {e})", entry.action);
                    Step::Fail(match e {
                        Error::NoFreeCores(_) => Failure::NoFreeCores,
                        _ => Failure::NoMove,
                    })
                }
                (None, None) => unreachable!("every suggestion has at least one variant"),
            };
            trace.push(entry);
            match step {
                Step::Accept(plan, mapping, report) => {
                    state.plan = plan;
                    state.mapping = mapping;
                    state.report = report;
                    pending = None;
                    failures.clear();
                }
                Step::Pending(plan, mapping, report) => {
                    pending = Some(OptState {
                        plan,
                        mapping,
                        report,
                        ..state.clone()
                    });
                }
                Step::Fail(f) => {
                    pending = None;
                    failures.push(f);
                    state.assumption = state.assumption.next();
                    if failures.len() >= self.options.patience {
                        return Ok(OptOutcome {
                            initial,
                            best: state,
                            trace,
                            stop: stop_reason(&failures),
                        });
                    }
                }
            }
        }
        Ok(OptOutcome {
            initial,
            best: state,
            trace,
            stop: StopReason::IterationBudget,
        })
    }
}

const PEAK_TOLERANCE: f64 = 1e-12;

enum Step {
    Accept(PartitionPlan, MappingPlan, SimReport),
    Pending(PartitionPlan, MappingPlan, SimReport),
    Fail(Failure),
}

fn layer_max(report: &SimReport, layer: usize, key: fn(&CoreReport) -> f64) -> f64 {
    report
        .per_core
        .iter()
        .filter(|c| c.layer == layer)
        .map(key)
        .fold(0.0, f64::max)
}

/// Largest value of `key` over the cores, and how many cores reach it.
fn peak(report: &SimReport, key: fn(&CoreReport) -> f64) -> (f64, usize) {
    let max = report.per_core.iter().map(key).fold(0.0, f64::max);
    let count = report
        .per_core
        .iter()
        .filter(|c| key(c) >= max * (1.0 - PEAK_TOLERANCE))
        .count();
    (max, count)
}

fn stop_reason(failures: &[Failure]) -> StopReason {
    if failures.contains(&Failure::EnergyWorse) {
        StopReason::EnergyWorsening
    } else if failures.contains(&Failure::NoFreeCores) && !failures.contains(&Failure::Rejected) {
        StopReason::NoFreeCores
    } else {
        StopReason::NoImprovingMove
    }
}

/// Spreads `hot` cores apart: each moves to the slot sharing the fewest rows
/// and columns with the other hot cores, then with the largest total
/// Manhattan distance to them, lowest slot first on ties. Displaced cores
/// take the vacated slot.
pub fn greedy_remap(mapping: &MappingPlan, hot: &[usize], chip: &ChipSpec) -> MappingPlan {
    let mut out = mapping.clone();
    for (i, &core) in hot.iter().enumerate() {
        let others: Vec<Coord> = hot
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &c)| out.coord(c))
            .collect();
        let score = |at: Coord| {
            let shared = others.iter().filter(|o| o.x == at.x || o.y == at.y).count();
            let dist: usize = others.iter().map(|o| o.manhattan(at)).sum();
            (shared, std::cmp::Reverse(dist))
        };
        let best = (0..chip.core_count())
            .map(|s| Coord::from_slot(s, chip.mesh_width))
            .filter(|at| !others.contains(at))
            .min_by_key(|&at| score(at));
        if let Some(at) = best {
            if score(at) < score(out.coord(core)) {
                out = out.moved(core, at);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{LayerSpec, WeightFormat};

    fn chip(w: usize, h: usize, syn: usize, neu: usize) -> ChipSpec {
        ChipSpec::new(w, h, syn, neu).unwrap()
    }

    fn net(widths: &[usize]) -> NetworkSpec {
        NetworkSpec::new(
            widths
                .iter()
                .map(|&n| LayerSpec::dense(n).with_format(WeightFormat::Dense))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn greedy_remap_separates_rows_and_columns() {
        let c = chip(4, 4, 1 << 20, 1 << 20);
        let m = MappingPlan::new(
            vec![
                Coord::new(0, 0),
                Coord::new(1, 0),
                Coord::new(2, 0),
                Coord::new(3, 3),
            ],
            &c,
        )
        .unwrap();
        let r = greedy_remap(&m, &[0, 1, 2], &c);
        r.validate(&c).unwrap();
        let hot: Vec<Coord> = [0, 1, 2].iter().map(|&i| r.coord(i)).collect();
        for a in 0..3 {
            for b in a + 1..3 {
                assert!(hot[a].x != hot[b].x && hot[a].y != hot[b].y, "{hot:?}");
            }
        }
    }

    #[test]
    fn greedy_remap_keeps_well_placed_cores() {
        let c = chip(4, 4, 1 << 20, 1 << 20);
        let m = MappingPlan::new(vec![Coord::new(0, 0), Coord::new(3, 3)], &c).unwrap();
        assert_eq!(greedy_remap(&m, &[0, 1], &c), m);
    }

    #[test]
    fn memory_bound_network_gets_split() {
        let n = net(&[64, 64, 64]);
        let c = chip(4, 4, 64 * 64, 64);
        let s = SparsitySchedule::Uniform { m: 1.0 };
        let opt = Optimizer::new(&n, &c, &s, OptimizerOptions::default());
        let out = opt.optimize().unwrap();
        assert!(out.best.plan.total_cores() > out.initial.plan.total_cores());
        assert!(out.best.report.time_per_step < out.initial.report.time_per_step);
        assert!(out.best.report.time_per_step <= out.trace[0].time);
        assert!(out.trace.iter().skip(1).any(|t| t.accepted));
    }

    #[test]
    fn full_chip_stops_without_free_cores() {
        let n = net(&[4, 4]);
        let c = chip(1, 2, 1 << 20, 1 << 20);
        let s = SparsitySchedule::Uniform { m: 1.0 };
        let opt = Optimizer::new(&n, &c, &s, OptimizerOptions::default());
        let out = opt.optimize().unwrap();
        assert_eq!(out.best.plan.total_cores(), 2);
        assert!(out.trace.len() <= 4);
        assert_ne!(out.stop, StopReason::IterationBudget);
    }

    #[test]
    fn budget_bounds_iterations() {
        let n = net(&[256, 256, 256]);
        let c = chip(8, 8, 256 * 256, 256);
        let s = SparsitySchedule::Uniform { m: 1.0 };
        let opts = OptimizerOptions {
            budget: 2,
            ..OptimizerOptions::default()
        };
        let out = Optimizer::new(&n, &c, &s, opts).optimize().unwrap();
        assert!(out.trace.len() <= 3);
    }

    #[test]
    fn stop_reason_priority() {
        assert_eq!(
            stop_reason(&[Failure::NoFreeCores; 3]),
            StopReason::NoFreeCores
        );
        assert_eq!(
            stop_reason(&[
                Failure::NoFreeCores,
                Failure::EnergyWorse,
                Failure::Rejected
            ]),
            StopReason::EnergyWorsening
        );
        assert_eq!(
            stop_reason(&[Failure::NoFreeCores, Failure::NoFreeCores, Failure::NoMove]),
            StopReason::NoFreeCores
        );
        assert_eq!(
            stop_reason(&[Failure::NoFreeCores, Failure::NoMove, Failure::Rejected]),
            StopReason::NoImprovingMove
        );
    }
}
