//! The floorline performance model.
//!
//! Plotting step time against intensity (the largest per-core synop count)
//! gives two bounds: a memory slope `offset + slope * intensity` and a
//! compute floor `offset + floor`. The offset is the barrier cost. A point on
//! the slope is memory-bound, a point on the floor is compute-bound, and a
//! point above both is traffic-bound.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic::Bottleneck;
use crate::error::{Error, Result};
use crate::sim::{simulate, EventMode, SimInput, SimReport};
use crate::workload::{CostModel, SparsitySchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorlinePoint {
    /// Maximum synops of any core per step.
    pub intensity: f64,
    pub time: f64,
    pub energy: f64,
    pub label: String,
}

impl FloorlinePoint {
    pub fn from_report(report: &SimReport, label: impl Into<String>) -> Self {
        FloorlinePoint {
            intensity: report.max_core_synops,
            time: report.time_per_step,
            energy: report.energy_per_step,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorlineModel {
    /// Cycles per synop on the memory-bound slope.
    pub slope: f64,
    /// Compute floor in cycles, above the offset.
    pub floor: f64,
    /// Constant per-step cost (the barrier) added to both bounds.
    pub offset: f64,
    /// Intensity where slope and floor meet.
    pub crossover_intensity: f64,
    /// Relative band used by [`classify`].
    pub tolerance: f64,
    /// False when the slope came from the cost model instead of the data.
    pub slope_fitted: bool,
    /// False when no point of the data lay on the floor.
    pub floor_observed: bool,
    /// False when time decreased with intensity beyond the tolerance.
    pub monotone: bool,
}

impl FloorlineModel {
    /// A model taken directly from known constants.
    pub fn new(slope: f64, floor: f64, offset: f64, tolerance: f64) -> Result<Self> {
        if !(slope > 0.0 && floor >= 0.0) {
            return Err(Error::semantic(
                "floorline",
                format!("slope must be positive and floor nonnegative (got {slope}, {floor})"),
            ));
        }
        Ok(FloorlineModel {
            slope,
            floor,
            offset,
            crossover_intensity: floor / slope,
            tolerance,
            slope_fitted: false,
            floor_observed: true,
            monotone: true,
        })
    }

    pub fn memory_bound(&self, intensity: f64) -> f64 {
        self.offset + self.slope * intensity
    }

    pub fn compute_bound(&self) -> f64 {
        self.offset + self.floor
    }

    /// The floorline itself: the larger of the two bounds.
    pub fn bound(&self, intensity: f64) -> f64 {
        self.memory_bound(intensity).max(self.compute_bound())
    }
}

/// Settings of [`fit_floorline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Subtracted from every time before fitting.
    pub offset: f64,
    pub tolerance: f64,
    /// Used when the data cannot determine a slope.
    pub fallback_slope: Option<f64>,
}

impl FitOptions {
    pub const DEFAULT_TOLERANCE: f64 = 0.05;

    /// Barrier offset and dense synop latency of `cost`, 5% band.
    pub fn from_cost(cost: &CostModel) -> Self {
        FitOptions {
            offset: cost.t_barrier,
            tolerance: Self::DEFAULT_TOLERANCE,
            fallback_slope: Some(cost.t_synop_dense),
        }
    }
}

/// Simulates one point per schedule, sorted by intensity.
pub fn sweep(
    input: SimInput<'_>,
    schedules: &[SparsitySchedule],
    steps: usize,
    mode: EventMode,
) -> Result<Vec<FloorlinePoint>> {
    if schedules.len() < 2 {
        return Err(Error::InsufficientPoints(format!(
            "a sweep needs at least 2 schedules, got {}",
            schedules.len()
        )));
    }
    let mut points = schedules
        .iter()
        .map(|s| {
            let report = simulate(
                SimInput {
                    schedule: s,
                    ..input
                },
                steps,
                mode,
            )?;
            Ok(FloorlinePoint::from_report(&report, s.label()))
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.intensity.total_cmp(&b.intensity));
    Ok(points)
}

/// Fits slope and floor to sweep points.
///
/// Points are sorted by intensity and split into a low-intensity floor group
/// and a high-intensity slope group. For every split the floor is the mean of
/// the floor group (which must be flat within the tolerance) and the slope is
/// the least-squares line through the origin of the slope group; the split
/// with the smallest squared error against `max(slope * x, floor)` wins.
pub fn fit_floorline(points: &[FloorlinePoint], opts: FitOptions) -> Result<FloorlineModel> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(format!(
            "a floorline needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.intensity, p.time - opts.offset))
        .collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = xy.len();
    let tol = opts.tolerance;

    let mut best: Option<(f64, usize, f64, f64)> = None;
    for k in 0..=n {
        let (flat, rising) = xy.split_at(k);
        let floor = if k == 0 {
            0.0
        } else {
            flat.iter().map(|p| p.1).sum::<f64>() / k as f64
        };
        if k >= 2 && !is_flat(flat, floor, tol) {
            continue;
        }
        let sxx: f64 = rising.iter().map(|p| p.0 * p.0).sum();
        let spread = rising
            .first()
            .zip(rising.last())
            .is_some_and(|(a, b)| b.0 > a.0);
        let slope = if spread && sxx > 0.0 {
            rising.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx
        } else {
            continue;
        };
        if slope <= 0.0 {
            continue;
        }
        let sse: f64 = xy
            .iter()
            .map(|&(x, y)| (y - (slope * x).max(floor)).powi(2))
            .sum();
        if best.is_none_or(|b| sse < b.0) {
            best = Some((sse, k, slope, floor));
        }
    }

    let (slope, floor, slope_fitted, floor_observed) = match best {
        Some((_, k, slope, floor)) => (slope, floor, true, k > 0),
        None => {
            let slope = opts.fallback_slope.ok_or_else(|| {
                Error::InsufficientPoints(
                    "sweep data does not determine a slope and no cost-model slope was given"
                        .into(),
                )
            })?;
            let floor = xy.iter().map(|p| p.1).sum::<f64>() / n as f64;
            (slope, floor.max(0.0), false, true)
        }
    };

    let monotone = xy
        .windows(2)
        .all(|w| w[1].1 + opts.offset >= (w[0].1 + opts.offset) * (1.0 - tol));

    Ok(FloorlineModel {
        slope,
        floor,
        offset: opts.offset,
        crossover_intensity: floor / slope,
        tolerance: tol,
        slope_fitted,
        floor_observed,
        monotone,
    })
}

/// Whether the least-squares trend across a group stays within `tol` of its
/// mean.
fn is_flat(group: &[(f64, f64)], mean: f64, tol: f64) -> bool {
    let n = group.len() as f64;
    let mx = group.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = group.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return group
            .iter()
            .all(|p| (p.1 - mean).abs() <= tol * mean.abs().max(f64::MIN_POSITIVE));
    }
    let sxy: f64 = group.iter().map(|p| (p.0 - mx) * (p.1 - mean)).sum();
    let span = group.last().unwrap().0 - group[0].0;
    (sxy / sxx * span).abs() <= tol * mean.abs()
}

/// Locates a point relative to the floorline.
pub fn classify(point: &FloorlinePoint, model: &FloorlineModel) -> Result<Bottleneck> {
    let mem = model.memory_bound(point.intensity);
    let flo = model.compute_bound();
    let bound = mem.max(flo);
    let tol = model.tolerance;
    if point.time > bound * (1.0 + tol) {
        return Ok(Bottleneck::Traffic);
    }
    if point.time < bound * (1.0 - tol) {
        return Err(Error::ModelViolation {
            intensity: point.intensity,
            time: point.time,
            bound,
        });
    }
    Ok(if mem >= flo {
        Bottleneck::Memory
    } else {
        Bottleneck::Compute
    })
}

/// A partitioning or mapping move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizationAction {
    /// Add one partition to `layer`.
    SplitLayer { layer: usize },
    /// Move the listed cores onto separate router paths.
    Remap { cores: Vec<usize> },
}

impl fmt::Display for OptimizationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizationAction::SplitLayer { layer } => write!(f, "split layer {layer}"),
            OptimizationAction::Remap { cores } => {
                let ids: Vec<String> = cores.iter().map(|c| c.to_string()).collect();
                write!(f, "remap cores {}", ids.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub state: Bottleneck,
    pub action: OptimizationAction,
    /// Alternatives outside partitioning and mapping.
    pub advisory: String,
}

impl fmt::Display for Suggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-bound: {} ({})",
            self.state, self.action, self.advisory
        )
    }
}

/// Cores listed by a traffic remap suggestion.
pub const DEFAULT_TOP_K: usize = 4;

/// The optimization move matching a bottleneck state.
pub fn suggest(state: Bottleneck, report: &SimReport) -> Result<Suggestion> {
    let missing = || Error::Inconsistent("report has no cores".into());
    Ok(match state {
        Bottleneck::Memory => {
            let core = report.argmax_synop_cycles_core().ok_or_else(missing)?;
            Suggestion {
                state,
                action: OptimizationAction::SplitLayer { layer: core.layer },
                advisory: format!(
                    "core {} spends the most cycles on synops; raising weight or activation sparsity feeding layer {} also helps",
                    core.core, core.layer
                ),
            }
        }
        Bottleneck::Compute => {
            let core = report.argmax_compute_cycles_core().ok_or_else(missing)?;
            Suggestion {
                state,
                action: OptimizationAction::SplitLayer { layer: core.layer },
                advisory: format!(
                    "core {} spends the most cycles on activation computes",
                    core.core
                ),
            }
        }
        Bottleneck::Traffic => Suggestion {
            state,
            action: OptimizationAction::Remap {
                cores: report.top_output_cores(DEFAULT_TOP_K),
            },
            advisory:
                "alternatively coagulate partitions into fewer cores or raise activation sparsity"
                    .into(),
        },
    })
}
