//! Partitioning layers onto logical cores and mapping cores onto the mesh.
//!
//! Logical core ids are assigned in layer order: the partitions of layer 0
//! come first, then those of layer 1, and so on. Every partition is a
//! contiguous neuron range, and a layer's partitions differ in size by at
//! most one neuron.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{synapse_entries, ChipSpec, LayerKind, NetworkSpec};

/// A mesh position. `x` grows along a row, `y` across rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// Row-major slot → coordinate.
    pub fn from_slot(slot: usize, mesh_width: usize) -> Self {
        Coord {
            x: slot % mesh_width,
            y: slot / mesh_width,
        }
    }

    pub fn slot(self, mesh_width: usize) -> usize {
        self.y * mesh_width + self.x
    }
}

/// A directed link between two neighbouring routers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub from: Coord,
    pub to: Coord,
}

impl LinkId {
    /// Dense index in `0..4 * core_count`: four outgoing links per router
    /// (+x, -x, +y, -y).
    pub fn index(self, mesh_width: usize) -> usize {
        let dir = if self.to.x > self.from.x {
            0
        } else if self.to.x < self.from.x {
            1
        } else if self.to.y > self.from.y {
            2
        } else {
            3
        };
        self.from.slot(mesh_width) * 4 + dir
    }

    pub fn from_index(index: usize, mesh_width: usize) -> Self {
        let from = Coord::from_slot(index / 4, mesh_width);
        let to = match index % 4 {
            0 => Coord::new(from.x + 1, from.y),
            1 => Coord::new(from.x.wrapping_sub(1), from.y),
            2 => Coord::new(from.x, from.y + 1),
            _ => Coord::new(from.x, from.y.wrapping_sub(1)),
        };
        LinkId { from, to }
    }
}

/// Dimension-ordered route: all X hops first, then all Y hops.
pub fn route(src: Coord, dst: Coord) -> Vec<LinkId> {
    let mut links = Vec::with_capacity(src.manhattan(dst));
    let mut at = src;
    while at.x != dst.x {
        let next = if dst.x > at.x {
            Coord::new(at.x + 1, at.y)
        } else {
            Coord::new(at.x - 1, at.y)
        };
        links.push(LinkId { from: at, to: next });
        at = next;
    }
    while at.y != dst.y {
        let next = if dst.y > at.y {
            Coord::new(at.x, at.y + 1)
        } else {
            Coord::new(at.x, at.y - 1)
        };
        links.push(LinkId { from: at, to: next });
        at = next;
    }
    links
}

/// Splits `n` neurons into `parts` contiguous ranges; the first `n % parts`
/// ranges get one extra neuron.
pub fn even_split(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Stored synaptic entries of a partition of `size` neurons of `layer`: its
/// share of the incoming connection, rounded up.
pub fn partition_entries(net: &NetworkSpec, layer: usize, size: usize) -> u64 {
    if layer == 0 {
        return 0;
    }
    let target = net.layer(layer);
    let total = synapse_entries(net.layer(layer - 1), Some(target)) as u128;
    let n = target.neurons as u128;
    ((total * size as u128).div_ceil(n)) as u64
}

/// Layer → partitions assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    layers: Vec<Vec<Range<usize>>>,
    offsets: Vec<usize>,
}

/// One logical core of a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreSlot {
    pub id: usize,
    pub layer: usize,
    pub partition: usize,
    pub neurons: Range<usize>,
}

impl PartitionPlan {
    /// Even split of every layer into `counts[layer]` partitions.
    pub fn from_counts(net: &NetworkSpec, counts: &[usize]) -> Result<Self> {
        if counts.len() != net.len() {
            return Err(Error::Inconsistent(format!(
                "{} partition counts for {} layers",
                counts.len(),
                net.len()
            )));
        }
        let mut layers = Vec::with_capacity(counts.len());
        for (layer, &c) in net.layers().iter().zip(counts) {
            if c == 0 || c > layer.neurons {
                return Err(Error::Inconsistent(format!(
                    "layer {} cannot have {c} partitions over {} neurons",
                    layer.id, layer.neurons
                )));
            }
            layers.push(even_split(layer.neurons, c));
        }
        Ok(Self::from_ranges(layers))
    }

    fn from_ranges(layers: Vec<Vec<Range<usize>>>) -> Self {
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut acc = 0;
        for l in &layers {
            offsets.push(acc);
            acc += l.len();
        }
        offsets.push(acc);
        PartitionPlan { layers, offsets }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn total_cores(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn partition_count(&self, layer: usize) -> usize {
        self.layers[layer].len()
    }

    pub fn partition_counts(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn ranges(&self, layer: usize) -> &[Range<usize>] {
        &self.layers[layer]
    }

    /// Core ids belonging to `layer`.
    pub fn cores_of(&self, layer: usize) -> Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn core_id(&self, layer: usize, partition: usize) -> usize {
        self.offsets[layer] + partition
    }

    /// Layer that owns logical core `core`.
    pub fn layer_of(&self, core: usize) -> usize {
        self.offsets.partition_point(|&o| o <= core) - 1
    }

    pub fn core(&self, id: usize) -> CoreSlot {
        let layer = self.layer_of(id);
        let partition = id - self.offsets[layer];
        CoreSlot {
            id,
            layer,
            partition,
            neurons: self.layers[layer][partition].clone(),
        }
    }

    pub fn cores(&self) -> impl Iterator<Item = CoreSlot> + '_ {
        (0..self.total_cores()).map(|id| self.core(id))
    }

    /// Partition of `layer` holding `neuron`.
    pub fn partition_of(&self, layer: usize, neuron: usize) -> usize {
        self.layers[layer].partition_point(|r| r.end <= neuron)
    }

    /// Partitions of `layer` intersecting `neurons`, ascending.
    pub fn partitions_overlapping(&self, layer: usize, neurons: Range<usize>) -> Range<usize> {
        if neurons.is_empty() {
            return 0..0;
        }
        self.partition_of(layer, neurons.start)..self.partition_of(layer, neurons.end - 1) + 1
    }

    /// Checks coverage, disjointness, capacities and the core budget.
    pub fn validate(&self, net: &NetworkSpec, chip: &ChipSpec) -> Result<()> {
        if self.layers.len() != net.len() {
            return Err(Error::Inconsistent(format!(
                "plan covers {} layers, network has {}",
                self.layers.len(),
                net.len()
            )));
        }
        for (j, ranges) in self.layers.iter().enumerate() {
            let n = net.layer(j).neurons;
            let mut expect = 0;
            for r in ranges {
                if r.start != expect || r.end <= r.start {
                    return Err(Error::Inconsistent(format!(
                        "layer {j} partitions are not disjoint contiguous ranges covering 0..{n}"
                    )));
                }
                let size = r.len();
                if size > chip.neuron_capacity {
                    return Err(Error::Infeasible(format!(
                        "layer {j} partition {r:?} holds {size} neurons, capacity is {}",
                        chip.neuron_capacity
                    )));
                }
                let entries = partition_entries(net, j, size);
                if entries > chip.synapse_capacity as u64 {
                    return Err(Error::Infeasible(format!(
                        "layer {j} partition {r:?} stores {entries} synapses, capacity is {}",
                        chip.synapse_capacity
                    )));
                }
                expect = r.end;
            }
            if expect != n {
                return Err(Error::Inconsistent(format!(
                    "layer {j} partitions cover 0..{expect}, layer has {n} neurons"
                )));
            }
        }
        if self.total_cores() > chip.core_count() {
            return Err(Error::Infeasible(format!(
                "plan uses {} cores, chip has {}",
                self.total_cores(),
                chip.core_count()
            )));
        }
        Ok(())
    }

    /// One more partition for `layer`, re-split evenly.
    pub fn split_layer(&self, layer: usize, chip: &ChipSpec) -> Result<Self> {
        if self.total_cores() >= chip.core_count() {
            return Err(Error::NoFreeCores(chip.core_count()));
        }
        let ranges = &self.layers[layer];
        let neurons = ranges.last().map_or(0, |r| r.end);
        if ranges.len() >= neurons {
            return Err(Error::CannotSplit {
                layer,
                neurons,
                partitions: ranges.len(),
            });
        }
        let mut layers = self.layers.clone();
        layers[layer] = even_split(neurons, ranges.len() + 1);
        Ok(Self::from_ranges(layers))
    }

    pub fn to_document(&self) -> PlanDocument {
        PlanDocument {
            layer: self
                .layers
                .iter()
                .enumerate()
                .map(|(id, ranges)| LayerRanges {
                    id,
                    ranges: ranges.iter().map(|r| [r.start, r.end]).collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a plan from its document and validates it.
    pub fn from_document(doc: &PlanDocument, net: &NetworkSpec, chip: &ChipSpec) -> Result<Self> {
        let mut layers = Vec::with_capacity(doc.layer.len());
        for (i, l) in doc.layer.iter().enumerate() {
            if l.id != i {
                return Err(Error::Inconsistent(format!(
                    "plan layer ids must be contiguous; found {} at position {i}",
                    l.id
                )));
            }
            layers.push(l.ranges.iter().map(|[s, e]| *s..*e).collect());
        }
        let plan = Self::from_ranges(layers);
        plan.validate(net, chip)?;
        Ok(plan)
    }
}

/// Serialized form of a [`PartitionPlan`]: per layer, `[start, end)` ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub layer: Vec<LayerRanges>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRanges {
    pub id: usize,
    pub ranges: Vec<[usize; 2]>,
}

/// Fewest partitions per layer that satisfy both core capacities.
pub fn minimal_partition(net: &NetworkSpec, chip: &ChipSpec) -> Result<PartitionPlan> {
    let mut layers = Vec::with_capacity(net.len());
    for (j, layer) in net.layers().iter().enumerate() {
        let n = layer.neurons;
        let by_neurons = n.div_ceil(chip.neuron_capacity);
        let by_entries = if j == 0 {
            1
        } else {
            let total = synapse_entries(net.layer(j - 1), Some(layer));
            total.div_ceil(chip.synapse_capacity as u64) as usize
        };
        // Rounding each partition's share up can push the largest one over
        // capacity, so search upward from the bound.
        let fits = |c: usize| {
            let largest = n.div_ceil(c);
            largest <= chip.neuron_capacity
                && partition_entries(net, j, largest) <= chip.synapse_capacity as u64
        };
        let start = by_neurons.max(by_entries).clamp(1, n);
        let count = (start..=n).find(|&c| fits(c)).ok_or_else(|| {
            Error::Infeasible(format!(
                "layer {j}: one neuron needs {} synapses, capacity is {}",
                partition_entries(net, j, 1),
                chip.synapse_capacity
            ))
        })?;
        layers.push(even_split(n, count));
    }
    let plan = PartitionPlan::from_ranges(layers);
    if plan.total_cores() > chip.core_count() {
        return Err(Error::Infeasible(format!(
            "network needs at least {} cores, chip has {}",
            plan.total_cores(),
            chip.core_count()
        )));
    }
    Ok(plan)
}

/// Logical core → mesh coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingPlan {
    coords: Vec<Coord>,
}

impl MappingPlan {
    pub fn new(coords: Vec<Coord>, chip: &ChipSpec) -> Result<Self> {
        let m = MappingPlan { coords };
        m.validate(chip)?;
        Ok(m)
    }

    pub fn coord(&self, core: usize) -> Coord {
        self.coords[core]
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn validate(&self, chip: &ChipSpec) -> Result<()> {
        let mut used = vec![false; chip.core_count()];
        for (core, c) in self.coords.iter().enumerate() {
            if c.x >= chip.mesh_width || c.y >= chip.mesh_height {
                return Err(Error::Inconsistent(format!(
                    "core {core} mapped to ({}, {}) outside the {}x{} mesh",
                    c.x, c.y, chip.mesh_width, chip.mesh_height
                )));
            }
            let slot = c.slot(chip.mesh_width);
            if used[slot] {
                return Err(Error::Inconsistent(format!(
                    "two cores mapped to ({}, {})",
                    c.x, c.y
                )));
            }
            used[slot] = true;
        }
        Ok(())
    }

    /// Moves `core` to `to`, swapping with whichever core occupied it.
    pub fn moved(&self, core: usize, to: Coord) -> Self {
        let mut coords = self.coords.clone();
        if let Some(other) = coords.iter().position(|&c| c == to) {
            coords[other] = coords[core];
        }
        coords[core] = to;
        MappingPlan { coords }
    }

    pub fn to_document(&self) -> MappingDocument {
        MappingDocument {
            coords: self.coords.iter().map(|c| [c.x, c.y]).collect(),
        }
    }

    pub fn from_document(
        doc: &MappingDocument,
        plan: &PartitionPlan,
        chip: &ChipSpec,
    ) -> Result<Self> {
        if doc.coords.len() != plan.total_cores() {
            return Err(Error::Inconsistent(format!(
                "mapping lists {} cores, plan has {}",
                doc.coords.len(),
                plan.total_cores()
            )));
        }
        Self::new(
            doc.coords.iter().map(|[x, y]| Coord::new(*x, *y)).collect(),
            chip,
        )
    }
}

/// Serialized form of a [`MappingPlan`]: one `[x, y]` per logical core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingDocument {
    pub coords: Vec<[usize; 2]>,
}

fn check_fits(plan: &PartitionPlan, chip: &ChipSpec) -> Result<()> {
    if plan.total_cores() > chip.core_count() {
        return Err(Error::Infeasible(format!(
            "plan uses {} cores, chip has {}",
            plan.total_cores(),
            chip.core_count()
        )));
    }
    Ok(())
}

/// Cores in layer order on consecutive row-major slots.
pub fn ordered_mapping(plan: &PartitionPlan, chip: &ChipSpec) -> Result<MappingPlan> {
    check_fits(plan, chip)?;
    Ok(MappingPlan {
        coords: (0..plan.total_cores())
            .map(|k| Coord::from_slot(k, chip.mesh_width))
            .collect(),
    })
}

/// Core `k` goes to slot `(k * stride) mod core_count`; occupied slots are
/// resolved by probing toward higher slots (wrapping).
pub fn strided_mapping(
    plan: &PartitionPlan,
    chip: &ChipSpec,
    stride: usize,
) -> Result<MappingPlan> {
    check_fits(plan, chip)?;
    if stride == 0 {
        return Err(Error::semantic("stride", "stride must be positive"));
    }
    let slots = chip.core_count();
    let mut used = vec![false; slots];
    let mut coords = Vec::with_capacity(plan.total_cores());
    for k in 0..plan.total_cores() {
        let mut slot = (k * stride) % slots;
        while used[slot] {
            slot = (slot + 1) % slots;
        }
        used[slot] = true;
        coords.push(Coord::from_slot(slot, chip.mesh_width));
    }
    Ok(MappingPlan { coords })
}

/// `mesh_width + 1`: separates consecutive cores along both mesh axes.
pub fn default_stride(chip: &ChipSpec) -> usize {
    chip.mesh_width + 1
}

/// Contiguous window of `fanout` next-layer neurons reached by source neuron
/// `s`, centred at the proportional position of `s` and clamped to the layer.
pub fn conv_window(
    src_neurons: usize,
    dst_neurons: usize,
    fanout: usize,
    s: usize,
) -> Range<usize> {
    let f = fanout.min(dst_neurons);
    let center = ((2 * s + 1) * dst_neurons) / (2 * src_neurons);
    let start = center.saturating_sub(f / 2).min(dst_neurons - f);
    start..start + f
}

/// Logical cores that receive a copy of an event from `source_neuron` of
/// `source_layer`. Empty for the last layer.
pub fn multicast_targets(
    net: &NetworkSpec,
    plan: &PartitionPlan,
    source_layer: usize,
    source_neuron: usize,
) -> Vec<usize> {
    if source_layer + 1 >= net.len() {
        return Vec::new();
    }
    let src = net.layer(source_layer);
    let next = net.layer(source_layer + 1);
    let parts = match src.kind {
        LayerKind::Dense => 0..plan.partition_count(source_layer + 1),
        LayerKind::Conv => plan.partitions_overlapping(
            source_layer + 1,
            conv_window(src.neurons, next.neurons, src.fanout(next), source_neuron),
        ),
    };
    parts.map(|p| plan.core_id(source_layer + 1, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{LayerSpec, WeightFormat};

    fn chip(w: usize, h: usize, syn: usize, neu: usize) -> ChipSpec {
        ChipSpec::new(w, h, syn, neu).unwrap()
    }

    fn dense_net(widths: &[usize]) -> NetworkSpec {
        NetworkSpec::new(
            widths
                .iter()
                .map(|&n| LayerSpec::dense(n).with_format(WeightFormat::Dense))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn even_split_sizes() {
        assert_eq!(even_split(10, 2), vec![0..5, 5..10]);
        assert_eq!(even_split(10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(even_split(3, 3), vec![0..1, 1..2, 2..3]);
    }

    #[test]
    fn minimal_partition_single_core_when_it_fits() {
        let net = dense_net(&[10, 10]);
        let plan = minimal_partition(&net, &chip(2, 2, 100, 10)).unwrap();
        assert_eq!(plan.partition_counts(), vec![1, 1]);
    }

    #[test]
    fn minimal_partition_splits_by_entries() {
        // 16x16 dense weights = 256 entries, capacity 64 -> 4 partitions of 4.
        let net = dense_net(&[16, 16]);
        let plan = minimal_partition(&net, &chip(4, 4, 64, 16)).unwrap();
        assert_eq!(plan.partition_counts(), vec![1, 4]);
        assert!(plan.ranges(1).iter().all(|r| r.len() == 4));
        plan.validate(&net, &chip(4, 4, 64, 16)).unwrap();
    }

    #[test]
    fn minimal_partition_rechecks_rounding() {
        // 10x10 = 100 entries, capacity 30: ceil(100/30) = 4 gives sizes 3,3,2,2
        // and 30 entries for the largest, which fits.
        let net = dense_net(&[10, 10]);
        let plan = minimal_partition(&net, &chip(4, 4, 30, 10)).unwrap();
        assert_eq!(plan.partition_count(1), 4);
        // Capacity 25: 4 partitions leave a 3-neuron (30-entry) share, so 5 are needed.
        let plan = minimal_partition(&net, &chip(4, 4, 25, 10)).unwrap();
        assert_eq!(plan.partition_count(1), 5);
    }

    #[test]
    fn width_doubling_quadruples_cores() {
        let chip = chip(8, 8, 100, 100);
        let one = minimal_partition(&dense_net(&[10, 10, 10]), &chip).unwrap();
        let two = minimal_partition(&dense_net(&[20, 20, 20]), &chip).unwrap();
        assert_eq!(one.partition_count(2), 1);
        assert_eq!(two.partition_count(2), 4);
    }

    #[test]
    fn minimal_partition_infeasible() {
        let net = dense_net(&[50, 50]);
        // One neuron needs 50 entries.
        assert!(matches!(
            minimal_partition(&net, &chip(8, 8, 40, 50)),
            Err(Error::Infeasible(_))
        ));
        // Needs 50 cores for layer 1 plus one for layer 0.
        assert!(matches!(
            minimal_partition(&net, &chip(4, 4, 50, 50)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn split_layer_examples() {
        let net = dense_net(&[10, 10]);
        let chip = chip(2, 2, 1000, 100);
        let plan = minimal_partition(&net, &chip).unwrap();
        let two = plan.split_layer(1, &chip).unwrap();
        assert_eq!(two.ranges(1), &[0..5, 5..10]);
        assert_eq!(two.ranges(0), plan.ranges(0));
        let three = two.split_layer(1, &chip).unwrap();
        assert_eq!(three.ranges(1), &[0..4, 4..7, 7..10]);
        assert!(matches!(
            three.split_layer(0, &chip),
            Err(Error::NoFreeCores(4))
        ));
        three.validate(&net, &chip).unwrap();
    }

    #[test]
    fn split_stops_at_one_neuron_per_core() {
        let net = dense_net(&[2, 2]);
        let chip = chip(4, 4, 100, 100);
        let plan = PartitionPlan::from_counts(&net, &[1, 2]).unwrap();
        assert!(matches!(
            plan.split_layer(1, &chip),
            Err(Error::CannotSplit { .. })
        ));
    }

    #[test]
    fn split_lowers_per_core_synops_by_partition_ratio() {
        use crate::analytic::voluntary_counts;
        let before = voluntary_counts(60, 0.4, 0.5, 2, 1).synops_per_core;
        let after = voluntary_counts(60, 0.4, 0.5, 3, 1).synops_per_core;
        assert!((after / before - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn core_lookup() {
        let net = dense_net(&[4, 6, 2]);
        let plan = PartitionPlan::from_counts(&net, &[1, 3, 2]).unwrap();
        assert_eq!(plan.total_cores(), 6);
        assert_eq!(plan.cores_of(1), 1..4);
        assert_eq!(plan.layer_of(0), 0);
        assert_eq!(plan.layer_of(3), 1);
        assert_eq!(plan.layer_of(5), 2);
        assert_eq!(plan.core(2).neurons, 2..4);
        assert_eq!(plan.partition_of(1, 5), 2);
        assert_eq!(plan.partitions_overlapping(1, 1..3), 0..2);
    }

    #[test]
    fn ordered_is_row_major() {
        let net = dense_net(&[4, 4]);
        let chip = chip(2, 2, 100, 100);
        let plan = PartitionPlan::from_counts(&net, &[2, 2]).unwrap();
        let m = ordered_mapping(&plan, &chip).unwrap();
        assert_eq!(
            m.coords(),
            &[
                Coord::new(0, 0),
                Coord::new(1, 0),
                Coord::new(0, 1),
                Coord::new(1, 1)
            ]
        );
        let one = PartitionPlan::from_counts(&dense_net(&[1, 1]), &[1, 1]).unwrap();
        assert_eq!(
            ordered_mapping(&one, &chip).unwrap().coord(0),
            Coord::new(0, 0)
        );
    }

    #[test]
    fn ordered_keeps_layer_cores_adjacent() {
        let net = dense_net(&[4, 12, 4]);
        let chip = chip(4, 4, 1000, 100);
        let plan = PartitionPlan::from_counts(&net, &[1, 4, 1]).unwrap();
        let m = ordered_mapping(&plan, &chip).unwrap();
        for c in plan.cores_of(1).skip(1) {
            assert!(m.coord(c).manhattan(m.coord(c - 1)) <= 4);
        }
        assert_eq!(m.coord(1).y, m.coord(3).y);
    }

    #[test]
    fn strided_examples() {
        let net = dense_net(&[4, 4]);
        let chip = chip(2, 2, 100, 100);
        let plan = PartitionPlan::from_counts(&net, &[2, 2]).unwrap();
        assert_eq!(
            strided_mapping(&plan, &chip, 1).unwrap(),
            ordered_mapping(&plan, &chip).unwrap()
        );
        let m = strided_mapping(&plan, &chip, 2).unwrap();
        let slots: Vec<usize> = m.coords().iter().map(|c| c.slot(2)).collect();
        assert_eq!(slots, vec![0, 2, 1, 3]);
        assert!(strided_mapping(&plan, &chip, 0).is_err());
    }

    #[test]
    fn strided_separates_cores() {
        let net = dense_net(&[4, 40, 4]);
        let chip = chip(6, 6, 1000, 100);
        let plan = PartitionPlan::from_counts(&net, &[1, 8, 1]).unwrap();
        let stride = default_stride(&chip);
        let m = strided_mapping(&plan, &chip, stride).unwrap();
        m.validate(&chip).unwrap();
        let rows: std::collections::BTreeSet<usize> =
            plan.cores_of(1).map(|c| m.coord(c).y).collect();
        assert!(rows.len() >= 5, "{rows:?}");
    }

    #[test]
    fn mapping_validation() {
        let chip = chip(2, 2, 100, 100);
        assert!(MappingPlan::new(vec![Coord::new(0, 0), Coord::new(0, 0)], &chip).is_err());
        assert!(MappingPlan::new(vec![Coord::new(2, 0)], &chip).is_err());
        let m = MappingPlan::new(vec![Coord::new(0, 0), Coord::new(1, 0)], &chip).unwrap();
        let moved = m.moved(0, Coord::new(1, 0));
        assert_eq!(moved.coords(), &[Coord::new(1, 0), Coord::new(0, 0)]);
        let moved = m.moved(1, Coord::new(1, 1));
        assert_eq!(moved.coords(), &[Coord::new(0, 0), Coord::new(1, 1)]);
    }

    #[test]
    fn multicast_dense_broadcasts() {
        let net = dense_net(&[4, 9, 2]);
        let plan = PartitionPlan::from_counts(&net, &[1, 3, 1]).unwrap();
        assert_eq!(multicast_targets(&net, &plan, 0, 2), vec![1, 2, 3]);
        assert!(multicast_targets(&net, &plan, 2, 0).is_empty());
    }

    #[test]
    fn multicast_conv_windows() {
        let net = NetworkSpec::new(vec![LayerSpec::conv(12, 3), LayerSpec::dense(12)]).unwrap();
        let plan = PartitionPlan::from_counts(&net, &[1, 3]).unwrap();
        // Partitions of layer 1: [0,4) [4,8) [8,12); window of neuron 1 is [0,3).
        assert_eq!(conv_window(12, 12, 3, 1), 0..3);
        assert_eq!(multicast_targets(&net, &plan, 0, 1), vec![1]);
        // Neuron 4: centre 4, window [3,6) straddles the first two partitions.
        assert_eq!(conv_window(12, 12, 3, 4), 3..6);
        assert_eq!(multicast_targets(&net, &plan, 0, 4), vec![1, 2]);
        // Clamped at the far edge.
        assert_eq!(conv_window(12, 12, 3, 11), 9..12);
    }

    #[test]
    fn routes_are_xy() {
        let o = Coord::new(0, 0);
        assert!(route(o, o).is_empty());
        assert_eq!(
            route(o, Coord::new(2, 0)),
            vec![
                LinkId {
                    from: o,
                    to: Coord::new(1, 0)
                },
                LinkId {
                    from: Coord::new(1, 0),
                    to: Coord::new(2, 0)
                },
            ]
        );
        let path = route(o, Coord::new(1, 2));
        assert_eq!(path.len(), 3);
        assert_eq!(path[0].to, Coord::new(1, 0));
        assert_eq!(path[2].to, Coord::new(1, 2));
    }

    #[test]
    fn route_length_is_manhattan_up_to_16x16() {
        let n = 16;
        let coords: Vec<Coord> = (0..n * n).map(|s| Coord::from_slot(s, n)).collect();
        for &a in &coords {
            for &b in &coords {
                let path = route(a, b);
                assert_eq!(path.len(), a.manhattan(b));
                // consecutive, adjacent hops
                let mut at = a;
                for l in &path {
                    assert_eq!(l.from, at);
                    assert_eq!(l.from.manhattan(l.to), 1);
                    assert_eq!(LinkId::from_index(l.index(n), n), *l);
                    at = l.to;
                }
                assert_eq!(at, b);
            }
        }
    }

    #[test]
    fn plan_documents_round_trip() {
        let net = dense_net(&[8, 8]);
        let chip = chip(2, 2, 1000, 100);
        let plan = PartitionPlan::from_counts(&net, &[1, 3]).unwrap();
        let doc = plan.to_document();
        assert_eq!(
            PartitionPlan::from_document(&doc, &net, &chip).unwrap(),
            plan
        );
        let map = strided_mapping(&plan, &chip, 3).unwrap();
        assert_eq!(
            MappingPlan::from_document(&map.to_document(), &plan, &chip).unwrap(),
            map
        );
        let mut bad = doc.clone();
        bad.layer[1].ranges[0][1] = 2;
        assert!(PartitionPlan::from_document(&bad, &net, &chip).is_err());
    }
}
