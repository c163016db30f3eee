//! Network, chip and sparsity descriptions.
//!
//! A [`NetworkSpec`] is a feedforward chain of layers. The connection from
//! layer `i` to layer `i + 1` is described by layer `i`: its `kind`, its
//! `weight_density`, its `weight_format` and (for convolutions) its
//! `fanout_per_event`. The synapses of that connection are stored on the
//! neurocores of layer `i + 1`, which perform the synops when layer `i` emits.
//! The last layer's connection fields are therefore unused.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Connectivity of a layer's outgoing connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    /// Fully connected: every event reaches every neuron of the next layer.
    Dense,
    /// Convolution-like: every event reaches a contiguous window of
    /// `fanout_per_event` neurons of the next layer.
    Conv,
}

/// Storage format of a connection's synaptic weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFormat {
    /// Every entry is stored and fetched, zeros included.
    Dense,
    /// Only nonzero entries are stored; each incoming burst pays a decode cost.
    Sparse,
}

impl WeightFormat {
    /// Format chosen when a configuration leaves it out: dense for
    /// convolutions, sparse for linearly connected layers.
    pub fn default_for(kind: LayerKind) -> Self {
        match kind {
            LayerKind::Conv => WeightFormat::Dense,
            LayerKind::Dense => WeightFormat::Sparse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: usize,
    pub kind: LayerKind,
    pub neurons: usize,
    /// Fraction of nonzero synapses in the outgoing connection.
    pub weight_density: f64,
    /// Per-step probability that a neuron of this layer emits a message.
    pub activation_density: f64,
    /// Targets touched per event; required for `Conv`, absent for `Dense`.
    pub fanout_per_event: Option<usize>,
    /// Relative instruction count of one neuron update.
    pub compute_cost_class: u32,
    pub weight_format: WeightFormat,
}

impl LayerSpec {
    /// A fully connected layer with dense weights, full activity and a sparse
    /// weight format.
    pub fn dense(neurons: usize) -> Self {
        LayerSpec {
            id: 0,
            kind: LayerKind::Dense,
            neurons,
            weight_density: 1.0,
            activation_density: 1.0,
            fanout_per_event: None,
            compute_cost_class: 1,
            weight_format: WeightFormat::default_for(LayerKind::Dense),
        }
    }

    /// A convolution-like layer touching `fanout` downstream targets per event.
    pub fn conv(neurons: usize, fanout: usize) -> Self {
        LayerSpec {
            id: 0,
            kind: LayerKind::Conv,
            neurons,
            weight_density: 1.0,
            activation_density: 1.0,
            fanout_per_event: Some(fanout),
            compute_cost_class: 1,
            weight_format: WeightFormat::default_for(LayerKind::Conv),
        }
    }

    pub fn with_weight_density(mut self, w: f64) -> Self {
        self.weight_density = w;
        self
    }

    pub fn with_activation_density(mut self, m: f64) -> Self {
        self.activation_density = m;
        self
    }

    pub fn with_format(mut self, format: WeightFormat) -> Self {
        self.weight_format = format;
        self
    }

    pub fn with_cost_class(mut self, class: u32) -> Self {
        self.compute_cost_class = class;
        self
    }

    /// Number of next-layer neurons touched by one event of this layer.
    pub fn fanout(&self, next: &LayerSpec) -> usize {
        match self.kind {
            LayerKind::Dense => next.neurons,
            LayerKind::Conv => self.fanout_per_event.unwrap_or(next.neurons),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(Error::semantic(
                "neurons",
                format!("layer {} must have at least one neuron", self.id),
            ));
        }
        check_unit("weight_density", self.id, self.weight_density)?;
        check_unit("activation_density", self.id, self.activation_density)?;
        if self.compute_cost_class == 0 {
            return Err(Error::semantic(
                "compute_cost_class",
                format!("layer {} compute_cost_class must be positive", self.id),
            ));
        }
        match (self.kind, self.fanout_per_event) {
            (LayerKind::Conv, None) => Err(Error::semantic(
                "fanout_per_event",
                format!("conv layer {} must specify fanout_per_event", self.id),
            )),
            (LayerKind::Conv, Some(0)) => Err(Error::semantic(
                "fanout_per_event",
                format!("layer {} fanout_per_event must be positive", self.id),
            )),
            (LayerKind::Dense, Some(_)) => Err(Error::semantic(
                "fanout_per_event",
                format!(
                    "dense layer {} derives its fanout from the next layer; fanout_per_event is only valid for conv layers",
                    self.id
                ),
            )),
            _ => Ok(()),
        }
    }
}

fn check_unit(field: &str, layer: usize, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::semantic(
            field,
            format!("layer {layer} {field} = {value} is outside [0, 1]"),
        ));
    }
    Ok(())
}

/// A validated feedforward chain of at least two layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Validates the layers and renumbers their ids `0..len`.
    pub fn new(mut layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::semantic(
                "network",
                format!("a network needs at least 2 layers, got {}", layers.len()),
            ));
        }
        for (i, layer) in layers.iter_mut().enumerate() {
            layer.id = i;
        }
        Self::from_layers(layers)
    }

    /// Like [`NetworkSpec::new`] but requires the ids to already be `0..len`.
    pub fn from_layers(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::semantic(
                "network",
                format!("a network needs at least 2 layers, got {}", layers.len()),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.id != i {
                return Err(Error::semantic(
                    "id",
                    format!(
                        "layer ids must be contiguous from 0; found id {} at position {i}",
                        layer.id
                    ),
                ));
            }
            layer.validate()?;
        }
        for pair in layers.windows(2) {
            if let Some(f) = pair[0].fanout_per_event {
                if f > pair[1].neurons {
                    return Err(Error::semantic(
                        "fanout_per_event",
                        format!(
                            "layer {} fanout_per_event {f} exceeds the {} neurons of layer {}",
                            pair[0].id, pair[1].neurons, pair[1].id
                        ),
                    ));
                }
            }
        }
        Ok(NetworkSpec { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, id: usize) -> &LayerSpec {
        &self.layers[id]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_neurons(&self) -> usize {
        self.layers.iter().map(|l| l.neurons).sum()
    }

    /// Copy of the network with per-layer activation densities replaced.
    pub fn with_densities(&self, densities: &[f64]) -> Result<Self> {
        if densities.len() != self.layers.len() {
            return Err(Error::semantic(
                "schedule",
                format!(
                    "{} densities for {} layers",
                    densities.len(),
                    self.layers.len()
                ),
            ));
        }
        let mut layers = self.layers.clone();
        for (layer, &m) in layers.iter_mut().zip(densities) {
            layer.activation_density = m;
        }
        Self::from_layers(layers)
    }

    /// Copy of the network with `schedule` resolved onto its layers.
    pub fn with_schedule(&self, schedule: &SparsitySchedule) -> Result<Self> {
        self.with_densities(&resolve_schedule(schedule, self.len())?)
    }

    pub fn activation_densities(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.activation_density).collect()
    }

    /// Neuron-weighted network-wide activation density.
    pub fn mean_activation_density(&self) -> f64 {
        let events: f64 = self
            .layers
            .iter()
            .map(|l| l.activation_density * l.neurons as f64)
            .sum();
        events / self.total_neurons() as f64
    }
}

/// Per-layer activation densities, described by a shape and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SparsitySchedule {
    Uniform {
        m: f64,
    },
    /// Alternates, starting with `low` at layer 0.
    LoHi {
        low: f64,
        high: f64,
    },
    /// Linear ramp from `start` at layer 0 down to `end` at the last layer.
    Decreasing {
        start: f64,
        end: f64,
    },
    /// Linear ramp from `start` at layer 0 up to `end` at the last layer.
    Increasing {
        start: f64,
        end: f64,
    },
    Explicit {
        densities: Vec<f64>,
    },
}

impl SparsitySchedule {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SparsitySchedule::Uniform { .. } => "uniform",
            SparsitySchedule::LoHi { .. } => "lohi",
            SparsitySchedule::Decreasing { .. } => "decreasing",
            SparsitySchedule::Increasing { .. } => "increasing",
            SparsitySchedule::Explicit { .. } => "explicit",
        }
    }

    /// A schedule of `kind` whose nominal mean density is `level`.
    ///
    /// Non-uniform shapes spread by `±h` around the level with
    /// `h = min(level, 1 - level) / 2`, so every resolved density stays in
    /// `[0, 1]`.
    pub fn at_level(kind: ScheduleKind, level: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::semantic(
                "activation_density",
                format!("schedule level {level} is outside [0, 1]"),
            ));
        }
        let h = level.min(1.0 - level) / 2.0;
        // Drop float noise so labels stay readable.
        let r = |x: f64| (x * 1e12).round() / 1e12;
        let (lo, hi) = (r(level - h), r(level + h));
        Ok(match kind {
            ScheduleKind::Uniform => SparsitySchedule::Uniform { m: level },
            ScheduleKind::LoHi => SparsitySchedule::LoHi { low: lo, high: hi },
            ScheduleKind::Decreasing => SparsitySchedule::Decreasing { start: hi, end: lo },
            ScheduleKind::Increasing => SparsitySchedule::Increasing { start: lo, end: hi },
        })
    }

    /// Short human-readable tag, e.g. `lohi(0.2,0.8)`.
    pub fn label(&self) -> String {
        match self {
            SparsitySchedule::Uniform { m } => format!("uniform({m})"),
            SparsitySchedule::LoHi { low, high } => format!("lohi({low},{high})"),
            SparsitySchedule::Decreasing { start, end } => format!("decreasing({start},{end})"),
            SparsitySchedule::Increasing { start, end } => format!("increasing({start},{end})"),
            SparsitySchedule::Explicit { densities } => {
                let parts: Vec<String> = densities.iter().map(|d| d.to_string()).collect();
                format!("explicit({})", parts.join(","))
            }
        }
    }
}

/// Parametric schedule shapes usable in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Uniform,
    LoHi,
    Decreasing,
    Increasing,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::Uniform,
        ScheduleKind::LoHi,
        ScheduleKind::Decreasing,
        ScheduleKind::Increasing,
    ];
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(ScheduleKind::Uniform),
            "lohi" => Ok(ScheduleKind::LoHi),
            "decreasing" => Ok(ScheduleKind::Decreasing),
            "increasing" => Ok(ScheduleKind::Increasing),
            other => Err(Error::semantic(
                "schedule kind",
                format!("unknown schedule kind `{other}`"),
            )),
        }
    }
}

/// Expands a schedule into one activation density per layer.
///
/// Ramps use `m_i = start + i * (end - start) / (L - 1)`; a single layer gets
/// `start`.
pub fn resolve_schedule(schedule: &SparsitySchedule, layers: usize) -> Result<Vec<f64>> {
    if layers == 0 {
        return Err(Error::semantic(
            "schedule",
            "layer count must be at least 1",
        ));
    }
    let check = |name: &str, v: f64| -> Result<()> {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(Error::semantic(
                "activation_density",
                format!("schedule parameter {name} = {v} is outside [0, 1]"),
            ))
        }
    };
    let ramp = |start: f64, end: f64| -> Vec<f64> {
        if layers == 1 {
            return vec![start];
        }
        let step = (end - start) / (layers - 1) as f64;
        (0..layers).map(|i| start + i as f64 * step).collect()
    };
    let densities = match schedule {
        SparsitySchedule::Uniform { m } => {
            check("m", *m)?;
            vec![*m; layers]
        }
        SparsitySchedule::LoHi { low, high } => {
            check("m_low", *low)?;
            check("m_high", *high)?;
            (0..layers)
                .map(|i| if i % 2 == 0 { *low } else { *high })
                .collect()
        }
        SparsitySchedule::Decreasing { start, end } => {
            check("m_start", *start)?;
            check("m_end", *end)?;
            if start < end {
                return Err(Error::semantic(
                    "schedule",
                    format!("decreasing schedule needs m_start >= m_end, got {start} < {end}"),
                ));
            }
            ramp(*start, *end)
        }
        SparsitySchedule::Increasing { start, end } => {
            check("m_start", *start)?;
            check("m_end", *end)?;
            if start > end {
                return Err(Error::semantic(
                    "schedule",
                    format!("increasing schedule needs m_start <= m_end, got {start} > {end}"),
                ));
            }
            ramp(*start, *end)
        }
        SparsitySchedule::Explicit { densities } => {
            if densities.len() != layers {
                return Err(Error::semantic(
                    "schedule",
                    format!(
                        "explicit schedule lists {} densities for {layers} layers",
                        densities.len()
                    ),
                ));
            }
            for (i, &d) in densities.iter().enumerate() {
                check(&format!("densities[{i}]"), d)?;
            }
            densities.clone()
        }
    };
    // Ramps can land a rounding step outside the unit interval.
    Ok(densities.into_iter().map(|d| d.clamp(0.0, 1.0)).collect())
}

/// Latency (cycles) and energy constants of the accelerator.
///
/// The defaults are free parameters of the same order of magnitude, not
/// measurements of any device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub t_synop_dense: f64,
    pub t_synop_sparse: f64,
    pub t_sparse_decode: f64,
    pub t_compute: f64,
    pub t_link: f64,
    pub t_barrier: f64,
    pub e_synop: f64,
    pub e_compute: f64,
    pub e_msg_hop: f64,
    pub p_core: f64,
    pub p_chip: f64,
    /// Sum the per-core terms instead of overlapping them.
    pub sequential: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            t_synop_dense: 2.0,
            t_synop_sparse: 2.0,
            t_sparse_decode: 8.0,
            t_compute: 4.0,
            t_link: 1.0,
            t_barrier: 100.0,
            e_synop: 1.0,
            e_compute: 1.0,
            e_msg_hop: 1.0,
            p_core: 0.5,
            p_chip: 5.0,
            sequential: false,
        }
    }
}

impl CostModel {
    pub(crate) const FIELD_NAMES: [&'static str; 11] = [
        "t_synop_dense",
        "t_synop_sparse",
        "t_sparse_decode",
        "t_compute",
        "t_link",
        "t_barrier",
        "e_synop",
        "e_compute",
        "e_msg_hop",
        "p_core",
        "p_chip",
    ];

    pub(crate) fn values(&self) -> [f64; 11] {
        [
            self.t_synop_dense,
            self.t_synop_sparse,
            self.t_sparse_decode,
            self.t_compute,
            self.t_link,
            self.t_barrier,
            self.e_synop,
            self.e_compute,
            self.e_msg_hop,
            self.p_core,
            self.p_chip,
        ]
    }

    pub(crate) fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "t_synop_dense" => &mut self.t_synop_dense,
            "t_synop_sparse" => &mut self.t_synop_sparse,
            "t_sparse_decode" => &mut self.t_sparse_decode,
            "t_compute" => &mut self.t_compute,
            "t_link" => &mut self.t_link,
            "t_barrier" => &mut self.t_barrier,
            "e_synop" => &mut self.e_synop,
            "e_compute" => &mut self.e_compute,
            "e_msg_hop" => &mut self.e_msg_hop,
            "p_core" => &mut self.p_core,
            "p_chip" => &mut self.p_chip,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in Self::FIELD_NAMES.iter().zip(self.values()) {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::semantic(
                    *name,
                    format!("{name} = {value} must be a finite nonnegative number"),
                ));
            }
        }
        Ok(())
    }

    /// Cycles per fetched synapse for the given format.
    pub fn synop_latency(&self, format: WeightFormat) -> f64 {
        match format {
            WeightFormat::Dense => self.t_synop_dense,
            WeightFormat::Sparse => self.t_synop_sparse,
        }
    }
}

/// Mesh geometry and per-core capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipSpec {
    pub mesh_width: usize,
    pub mesh_height: usize,
    /// Maximum stored synaptic entries per core.
    pub synapse_capacity: usize,
    /// Maximum neurons per core.
    pub neuron_capacity: usize,
    pub cost: CostModel,
}

impl ChipSpec {
    pub fn new(
        mesh_width: usize,
        mesh_height: usize,
        synapse_capacity: usize,
        neuron_capacity: usize,
    ) -> Result<Self> {
        let chip = ChipSpec {
            mesh_width,
            mesh_height,
            synapse_capacity,
            neuron_capacity,
            cost: CostModel::default(),
        };
        chip.validate()?;
        Ok(chip)
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn core_count(&self) -> usize {
        self.mesh_width * self.mesh_height
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mesh_width", self.mesh_width),
            ("mesh_height", self.mesh_height),
            ("synapse_capacity", self.synapse_capacity),
            ("neuron_capacity", self.neuron_capacity),
        ] {
            if v == 0 {
                return Err(Error::semantic(name, format!("{name} must be at least 1")));
            }
        }
        self.cost.validate()
    }
}

/// Stored synaptic entries of the connection from `layer` to `next`.
///
/// Dense format stores the full matrix (or `N * fanout` for convolutions);
/// sparse format stores `ceil(w * full)` entries. The last layer (`next` is
/// `None`) stores nothing.
pub fn synapse_entries(layer: &LayerSpec, next: Option<&LayerSpec>) -> u64 {
    let Some(next) = next else { return 0 };
    let full = layer.neurons as u64 * layer.fanout(next) as u64;
    match layer.weight_format {
        WeightFormat::Dense => full,
        WeightFormat::Sparse => (layer.weight_density * full as f64).ceil() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn uniform_schedule_repeats() {
        let d = resolve_schedule(&SparsitySchedule::Uniform { m: 0.5 }, 3).unwrap();
        assert_eq!(d, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn lohi_alternates_from_low() {
        let d = resolve_schedule(
            &SparsitySchedule::LoHi {
                low: 0.2,
                high: 0.8,
            },
            4,
        )
        .unwrap();
        assert_eq!(d, vec![0.2, 0.8, 0.2, 0.8]);
    }

    #[test]
    fn decreasing_interpolates_linearly() {
        // m_i = 0.9 + i * (0.1 - 0.9) / 4
        let expected: Vec<f64> = (0..5).map(|i| 0.9 + i as f64 * (0.1 - 0.9) / 4.0).collect();
        let d = resolve_schedule(
            &SparsitySchedule::Decreasing {
                start: 0.9,
                end: 0.1,
            },
            5,
        )
        .unwrap();
        assert!(close(&d, &expected));
        assert!(close(&d, &[0.9, 0.7, 0.5, 0.3, 0.1]));
    }

    #[test]
    fn increasing_single_layer_is_start() {
        let d = resolve_schedule(
            &SparsitySchedule::Increasing {
                start: 0.3,
                end: 0.6,
            },
            1,
        )
        .unwrap();
        assert_eq!(d, vec![0.3]);
    }

    #[test]
    fn schedule_rejects_out_of_range() {
        let err = resolve_schedule(&SparsitySchedule::Uniform { m: 1.3 }, 2).unwrap_err();
        assert!(matches!(err, Error::Semantic { ref field, .. } if field == "activation_density"));
        assert!(resolve_schedule(
            &SparsitySchedule::LoHi {
                low: -0.1,
                high: 0.5
            },
            2
        )
        .is_err());
        assert!(resolve_schedule(
            &SparsitySchedule::Explicit {
                densities: vec![0.1]
            },
            2
        )
        .is_err());
        assert!(resolve_schedule(&SparsitySchedule::Uniform { m: 0.5 }, 0).is_err());
    }

    #[test]
    fn ramp_direction_is_checked() {
        assert!(resolve_schedule(
            &SparsitySchedule::Decreasing {
                start: 0.1,
                end: 0.9
            },
            3
        )
        .is_err());
        assert!(resolve_schedule(
            &SparsitySchedule::Increasing {
                start: 0.9,
                end: 0.1
            },
            3
        )
        .is_err());
    }

    #[test]
    fn levels_keep_their_mean() {
        for kind in ScheduleKind::ALL {
            for level in [0.1, 0.5, 0.9] {
                let s = SparsitySchedule::at_level(kind, level).unwrap();
                // Even layer counts make the LoHi mean exact as well.
                let d = resolve_schedule(&s, 6).unwrap();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                assert!((mean - level).abs() < 1e-12, "{kind:?} {level}: {mean}");
            }
        }
    }

    #[test]
    fn synapse_entries_examples() {
        let next = LayerSpec::dense(20);
        let dense = LayerSpec::dense(10).with_format(WeightFormat::Dense);
        assert_eq!(synapse_entries(&dense, Some(&next)), 200);

        let sparse = LayerSpec::dense(10)
            .with_weight_density(0.25)
            .with_format(WeightFormat::Sparse);
        assert_eq!(synapse_entries(&sparse, Some(&next)), 50);

        let conv = LayerSpec::conv(64, 27);
        assert_eq!(synapse_entries(&conv, Some(&LayerSpec::dense(64))), 1728);
        assert_eq!(synapse_entries(&conv, None), 0);
    }

    #[test]
    fn sparse_entry_count_matches_sampled_nonzeros() {
        use rand::{Rng, SeedableRng};
        // Mean nonzero count of sampled 10x20 masks at density 0.25.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trials = 4000;
        let mut total = 0usize;
        for _ in 0..trials {
            total += (0..200).filter(|_| rng.random_bool(0.25)).count();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 50.0).abs() < 0.5, "{mean}");
        let layer = LayerSpec::dense(10).with_weight_density(0.25);
        assert_eq!(synapse_entries(&layer, Some(&LayerSpec::dense(20))), 50);
    }

    #[test]
    fn network_validation() {
        assert!(NetworkSpec::new(vec![LayerSpec::dense(4)]).is_err());
        let err = NetworkSpec::new(vec![
            LayerSpec::dense(4).with_activation_density(1.3),
            LayerSpec::dense(4),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("activation_density"));

        let mut conv = LayerSpec::conv(8, 3);
        conv.fanout_per_event = None;
        assert!(NetworkSpec::new(vec![conv, LayerSpec::dense(8)]).is_err());
        assert!(NetworkSpec::new(vec![LayerSpec::conv(8, 9), LayerSpec::dense(8)]).is_err());
        assert!(NetworkSpec::new(vec![LayerSpec::dense(0), LayerSpec::dense(8)]).is_err());

        let mut dense = LayerSpec::dense(8);
        dense.fanout_per_event = Some(2);
        assert!(NetworkSpec::new(vec![dense, LayerSpec::dense(8)]).is_err());

        let mut layers = vec![LayerSpec::dense(4), LayerSpec::dense(4)];
        layers[1].id = 3;
        assert!(NetworkSpec::from_layers(layers).is_err());
    }

    #[test]
    fn default_formats() {
        assert_eq!(LayerSpec::dense(4).weight_format, WeightFormat::Sparse);
        assert_eq!(LayerSpec::conv(4, 2).weight_format, WeightFormat::Dense);
    }

    #[test]
    fn cost_model_rejects_negative() {
        let cost = CostModel {
            t_link: -1.0,
            ..CostModel::default()
        };
        assert!(cost.validate().is_err());
        assert!(ChipSpec::new(0, 2, 10, 10).is_err());
    }
}
