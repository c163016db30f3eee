//! Converting operation counts into cycles and energy.
//!
//! Within a core the synop, compute and injection stages overlap in a
//! pipeline, so a core's step time is the largest of the three terms (or
//! their sum when [`CostModel::sequential`] is set). The chip waits for its
//! slowest core or its most loaded link, then pays the barrier.

use serde::{Deserialize, Serialize};

use crate::sim::counts::{CoreCounts, StepCounts};
use crate::workload::{CostModel, WeightFormat};

/// The three per-core cost terms, in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoreTerms {
    pub synop: f64,
    pub compute: f64,
    pub injection: f64,
}

impl CoreTerms {
    pub fn of(core: &CoreCounts, cost: &CostModel) -> Self {
        let synop = match core.weight_format {
            None => 0.0,
            Some(WeightFormat::Dense) => core.synops * cost.t_synop_dense,
            // One decode per incoming message burst.
            Some(WeightFormat::Sparse) => {
                core.synops * cost.t_synop_sparse + core.msgs_in * cost.t_sparse_decode
            }
        };
        CoreTerms {
            synop,
            compute: core.computes * cost.t_compute * core.compute_cost_class as f64,
            injection: core.msgs_out * cost.t_link,
        }
    }

    pub fn combined(&self, sequential: bool) -> f64 {
        if sequential {
            self.synop + self.compute + self.injection
        } else {
            self.synop.max(self.compute).max(self.injection)
        }
    }
}

/// Cycles a core needs for its share of one step.
pub fn core_time(core: &CoreCounts, cost: &CostModel) -> f64 {
    CoreTerms::of(core, cost).combined(cost.sequential)
}

/// Step duration: slowest core or busiest link, plus the barrier.
pub fn step_time(counts: &StepCounts, cost: &CostModel) -> f64 {
    let cores = counts
        .cores
        .iter()
        .map(|c| core_time(c, cost))
        .fold(0.0, f64::max);
    let links = counts.max_link_load() * cost.t_link;
    cores.max(links) + cost.t_barrier
}

/// Static energy over the step plus dynamic energy of every operation.
pub fn step_energy(counts: &StepCounts, time: f64, active_cores: usize, cost: &CostModel) -> f64 {
    time * (cost.p_chip + cost.p_core * active_cores as f64)
        + counts.synops_total() * cost.e_synop
        + counts.computes_total() * cost.e_compute
        + counts.link_hops_total() * cost.e_msg_hop
}

#[cfg(test)]
mod tests {
    use super::*;

    fn core(
        synops: f64,
        computes: f64,
        msgs_in: f64,
        msgs_out: f64,
        format: Option<WeightFormat>,
    ) -> CoreCounts {
        CoreCounts {
            layer: 1,
            synops,
            computes,
            msgs_in,
            msgs_out,
            compute_cost_class: 1,
            weight_format: format,
        }
    }

    fn counts(cores: Vec<CoreCounts>, links: Vec<f64>) -> StepCounts {
        StepCounts {
            cores,
            links,
            mesh_width: 2,
        }
    }

    #[test]
    fn core_time_examples() {
        let cost = CostModel::default();
        assert_eq!(
            core_time(&core(0.0, 0.0, 0.0, 0.0, Some(WeightFormat::Dense)), &cost),
            0.0
        );
        assert_eq!(
            core_time(
                &core(100.0, 1.0, 1.0, 1.0, Some(WeightFormat::Dense)),
                &cost
            ),
            200.0
        );
        // Sparse: 100 * 2 + 10 bursts * 8
        assert_eq!(
            core_time(
                &core(100.0, 1.0, 10.0, 1.0, Some(WeightFormat::Sparse)),
                &cost
            ),
            280.0
        );
        let seq = CostModel {
            sequential: true,
            ..cost
        };
        assert_eq!(
            core_time(&core(10.0, 5.0, 0.0, 7.0, Some(WeightFormat::Dense)), &seq),
            20.0 + 20.0 + 7.0
        );
    }

    #[test]
    fn compute_cost_class_scales() {
        let mut c = core(0.0, 10.0, 0.0, 0.0, None);
        c.compute_cost_class = 3;
        assert_eq!(core_time(&c, &CostModel::default()), 120.0);
    }

    #[test]
    fn sparse_format_crossover_in_weight_density() {
        // 32 events into a core of 64 neurons: dense fetches 32*64 entries,
        // sparse fetches w*32*64 entries plus 32 decodes.
        let cost = CostModel::default();
        let time = |w: f64, f: WeightFormat| {
            let scale = if f == WeightFormat::Dense { 1.0 } else { w };
            core_time(&core(32.0 * 64.0 * scale, 0.0, 32.0, 0.0, Some(f)), &cost)
        };
        assert!(time(0.99, WeightFormat::Sparse) > time(0.99, WeightFormat::Dense));
        assert!(time(0.5, WeightFormat::Sparse) < time(0.5, WeightFormat::Dense));
    }

    #[test]
    fn step_time_examples() {
        let cost = CostModel::default();
        let idle = counts(vec![core(0.0, 0.0, 0.0, 0.0, None)], vec![0.0; 16]);
        assert_eq!(step_time(&idle, &cost), cost.t_barrier);

        let mut links = vec![0.0; 16];
        links[0] = 100.0;
        let busy = counts(
            vec![core(250.0, 0.0, 0.0, 0.0, Some(WeightFormat::Dense))],
            links.clone(),
        );
        assert_eq!(step_time(&busy, &cost), 500.0 + cost.t_barrier);

        links[3] = 1000.0;
        let jammed = counts(
            vec![core(250.0, 0.0, 0.0, 0.0, Some(WeightFormat::Dense))],
            links,
        );
        assert_eq!(
            step_time(&jammed, &cost),
            1000.0 * cost.t_link + cost.t_barrier
        );
    }

    #[test]
    fn energy_examples() {
        let cost = CostModel::default();
        let idle = counts(vec![], vec![0.0; 16]);
        let t = step_time(&idle, &cost);
        assert_eq!(
            step_energy(&idle, t, 0, &cost),
            cost.t_barrier * cost.p_chip
        );

        let c = counts(
            vec![core(10.0, 4.0, 1.0, 1.0, Some(WeightFormat::Dense))],
            vec![1.0; 16],
        );
        assert!(step_energy(&c, 300.0, 4, &cost) > step_energy(&c, 300.0, 2, &cost));
        let e = step_energy(&c, 300.0, 2, &cost);
        assert_eq!(e, 300.0 * (5.0 + 1.0) + 10.0 + 4.0 + 16.0);
        assert!(e >= 300.0 * cost.p_chip);
    }
}
