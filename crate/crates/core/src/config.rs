//! The workload configuration document.
//!
//! A TOML file with three sections:
//!
//! ```toml
//! [[network.layer]]
//! kind = "dense"
//! neurons = 64
//! weight_density = 0.5
//!
//! [[network.layer]]
//! kind = "dense"
//! neurons = 32
//!
//! [chip]
//! mesh_width = 4
//! mesh_height = 4
//! synapse_capacity = 4096
//! neuron_capacity = 256
//! t_barrier = 100.0
//!
//! [schedule]
//! kind = "uniform"
//! m = 0.3
//! ```
//!
//! Every cost field of the chip is optional and falls back to
//! [`CostModel::default`]. The `schedule` section is optional; without it
//! each layer carries its own `activation_density` (default 1). Unknown keys
//! are rejected.

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::workload::{
    ChipSpec, CostModel, LayerKind, LayerSpec, NetworkSpec, SparsitySchedule, WeightFormat,
};

/// A parsed and validated configuration. The network's activation densities
/// are the resolved schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub network: NetworkSpec,
    pub chip: ChipSpec,
    pub schedule: SparsitySchedule,
}

const TOP_KEYS: &[&str] = &["network", "chip", "schedule"];
const NETWORK_KEYS: &[&str] = &["layer"];
const LAYER_KEYS: &[&str] = &[
    "id",
    "kind",
    "neurons",
    "weight_density",
    "activation_density",
    "fanout_per_event",
    "compute_cost_class",
    "weight_format",
];
const CHIP_KEYS: &[&str] = &[
    "mesh_width",
    "mesh_height",
    "synapse_capacity",
    "neuron_capacity",
    "sequential",
];
const SCHEDULE_KEYS: &[&str] = &[
    "kind",
    "m",
    "m_low",
    "m_high",
    "m_start",
    "m_end",
    "densities",
];

/// Parses and validates a configuration document.
pub fn parse_workload(text: &str) -> Result<Workload> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|span| line_column(text, span.start))
            .unwrap_or((1, 1));
        Error::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    check_keys("document", &doc, TOP_KEYS)?;

    let network_table = required_table(&doc, "network", "document")?;
    check_keys("network", network_table, NETWORK_KEYS)?;
    let layer_values = match network_table.get("layer") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(type_error("network.layer", "an array of tables")),
        None => return Err(Error::semantic("network", "missing `layer` entries")),
    };

    let schedule = match doc.get("schedule") {
        Some(Value::Table(t)) => Some(parse_schedule(t)?),
        Some(_) => return Err(type_error("schedule", "a table")),
        None => None,
    };

    let mut layers = Vec::with_capacity(layer_values.len());
    for (index, value) in layer_values.iter().enumerate() {
        let Value::Table(table) = value else {
            return Err(type_error(&format!("network.layer[{index}]"), "a table"));
        };
        layers.push(parse_layer(index, table, schedule.is_some())?);
    }

    let mut network = NetworkSpec::from_layers(layers)?;
    let schedule = match schedule {
        Some(s) => {
            network = network.with_schedule(&s)?;
            s
        }
        None => SparsitySchedule::Explicit {
            densities: network.activation_densities(),
        },
    };

    let chip_table = required_table(&doc, "chip", "document")?;
    let chip = parse_chip(chip_table)?;

    Ok(Workload {
        network,
        chip,
        schedule,
    })
}

/// Writes a workload back to the configuration format. Every field is
/// written explicitly, so `parse_workload(&serialize_workload(w)) == w`.
pub fn serialize_workload(workload: &Workload) -> String {
    let mut layers = Vec::new();
    for layer in workload.network.layers() {
        let mut t = Table::new();
        t.insert("id".into(), Value::Integer(layer.id as i64));
        t.insert("kind".into(), Value::String(kind_name(layer.kind).into()));
        t.insert("neurons".into(), Value::Integer(layer.neurons as i64));
        t.insert("weight_density".into(), Value::Float(layer.weight_density));
        if let Some(f) = layer.fanout_per_event {
            t.insert("fanout_per_event".into(), Value::Integer(f as i64));
        }
        t.insert(
            "compute_cost_class".into(),
            Value::Integer(layer.compute_cost_class as i64),
        );
        t.insert(
            "weight_format".into(),
            Value::String(format_name(layer.weight_format).into()),
        );
        layers.push(Value::Table(t));
    }
    let mut network = Table::new();
    network.insert("layer".into(), Value::Array(layers));

    let chip = &workload.chip;
    let mut chip_table = Table::new();
    chip_table.insert("mesh_width".into(), Value::Integer(chip.mesh_width as i64));
    chip_table.insert(
        "mesh_height".into(),
        Value::Integer(chip.mesh_height as i64),
    );
    chip_table.insert(
        "synapse_capacity".into(),
        Value::Integer(chip.synapse_capacity as i64),
    );
    chip_table.insert(
        "neuron_capacity".into(),
        Value::Integer(chip.neuron_capacity as i64),
    );
    for (name, value) in CostModel::FIELD_NAMES.iter().zip(chip.cost.values()) {
        chip_table.insert((*name).into(), Value::Float(value));
    }
    chip_table.insert("sequential".into(), Value::Boolean(chip.cost.sequential));

    let mut schedule = Table::new();
    let mut put = |k: &str, v: f64| {
        schedule.insert(k.into(), Value::Float(v));
    };
    match &workload.schedule {
        SparsitySchedule::Uniform { m } => put("m", *m),
        SparsitySchedule::LoHi { low, high } => {
            put("m_low", *low);
            put("m_high", *high);
        }
        SparsitySchedule::Decreasing { start, end }
        | SparsitySchedule::Increasing { start, end } => {
            put("m_start", *start);
            put("m_end", *end);
        }
        SparsitySchedule::Explicit { densities } => {
            schedule.insert(
                "densities".into(),
                Value::Array(densities.iter().map(|d| Value::Float(*d)).collect()),
            );
        }
    }
    schedule.insert(
        "kind".into(),
        Value::String(workload.schedule.kind_name().into()),
    );

    let mut doc = Table::new();
    doc.insert("network".into(), Value::Table(network));
    doc.insert("chip".into(), Value::Table(chip_table));
    doc.insert("schedule".into(), Value::Table(schedule));
    toml::to_string(&doc).expect("configuration tables always serialize")
}

fn parse_layer(index: usize, t: &Table, scheduled: bool) -> Result<LayerSpec> {
    let section = format!("network.layer[{index}]");
    check_keys(&section, t, LAYER_KEYS)?;
    if let Some(id) = opt_usize(t, "id", &section)? {
        if id != index {
            return Err(Error::semantic(
                "id",
                format!("layer ids must be contiguous from 0; found id {id} at position {index}"),
            ));
        }
    }
    let kind = match required_str(t, "kind", &section)? {
        "dense" => LayerKind::Dense,
        "conv" => LayerKind::Conv,
        other => {
            return Err(Error::semantic(
                "kind",
                format!("{section}.kind must be \"dense\" or \"conv\", got \"{other}\""),
            ))
        }
    };
    let neurons = opt_usize(t, "neurons", &section)?
        .ok_or_else(|| Error::semantic("neurons", format!("{section} is missing `neurons`")))?;
    let weight_density = opt_f64(t, "weight_density", &section)?.unwrap_or(1.0);
    let activation_density = match opt_f64(t, "activation_density", &section)? {
        Some(_) if scheduled => {
            return Err(Error::semantic(
                "activation_density",
                format!(
                "{section} sets activation_density but the [schedule] section already defines it"
            ),
            ))
        }
        Some(m) => m,
        None => 1.0,
    };
    let fanout_per_event = opt_usize(t, "fanout_per_event", &section)?;
    let compute_cost_class = match opt_usize(t, "compute_cost_class", &section)? {
        Some(c) => u32::try_from(c).map_err(|_| {
            Error::semantic(
                "compute_cost_class",
                format!("{section}.compute_cost_class is too large"),
            )
        })?,
        None => 1,
    };
    let weight_format = match opt_str(t, "weight_format", &section)? {
        None => WeightFormat::default_for(kind),
        Some("dense") => WeightFormat::Dense,
        Some("sparse") => WeightFormat::Sparse,
        Some(other) => {
            return Err(Error::semantic(
                "weight_format",
                format!("{section}.weight_format must be \"dense\" or \"sparse\", got \"{other}\""),
            ))
        }
    };
    Ok(LayerSpec {
        id: index,
        kind,
        neurons,
        weight_density,
        activation_density,
        fanout_per_event,
        compute_cost_class,
        weight_format,
    })
}

fn parse_chip(t: &Table) -> Result<ChipSpec> {
    let section = "chip";
    for key in t.keys() {
        if !CHIP_KEYS.contains(&key.as_str()) && !CostModel::FIELD_NAMES.contains(&key.as_str()) {
            return Err(Error::UnknownKey {
                section: section.into(),
                key: key.clone(),
            });
        }
    }
    let need = |key: &str| -> Result<usize> {
        opt_usize(t, key, section)?
            .ok_or_else(|| Error::semantic(key, format!("chip is missing `{key}`")))
    };
    let mut cost = CostModel::default();
    for name in CostModel::FIELD_NAMES {
        if let Some(v) = opt_f64(t, name, section)? {
            *cost.field_mut(name).expect("known cost field") = v;
        }
    }
    if let Some(v) = t.get("sequential") {
        cost.sequential = v
            .as_bool()
            .ok_or_else(|| type_error("chip.sequential", "a boolean"))?;
    }
    let chip = ChipSpec {
        mesh_width: need("mesh_width")?,
        mesh_height: need("mesh_height")?,
        synapse_capacity: need("synapse_capacity")?,
        neuron_capacity: need("neuron_capacity")?,
        cost,
    };
    chip.validate()?;
    Ok(chip)
}

fn parse_schedule(t: &Table) -> Result<SparsitySchedule> {
    let section = "schedule";
    check_keys(section, t, SCHEDULE_KEYS)?;
    let kind = required_str(t, "kind", section)?;
    let allowed: &[&str] = match kind {
        "uniform" => &["m"],
        "lohi" => &["m_low", "m_high"],
        "decreasing" | "increasing" => &["m_start", "m_end"],
        "explicit" => &["densities"],
        other => {
            return Err(Error::semantic(
                "schedule kind",
                format!("unknown schedule kind \"{other}\""),
            ))
        }
    };
    for key in t.keys().filter(|k| k.as_str() != "kind") {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::UnknownKey {
                section: format!("schedule (kind = \"{kind}\")"),
                key: key.clone(),
            });
        }
    }
    let need = |key: &str| -> Result<f64> {
        opt_f64(t, key, section)?
            .ok_or_else(|| Error::semantic(key, format!("{kind} schedule is missing `{key}`")))
    };
    let schedule = match kind {
        "uniform" => SparsitySchedule::Uniform { m: need("m")? },
        "lohi" => SparsitySchedule::LoHi {
            low: need("m_low")?,
            high: need("m_high")?,
        },
        "decreasing" => SparsitySchedule::Decreasing {
            start: need("m_start")?,
            end: need("m_end")?,
        },
        "increasing" => SparsitySchedule::Increasing {
            start: need("m_start")?,
            end: need("m_end")?,
        },
        _ => {
            let Some(Value::Array(items)) = t.get("densities") else {
                return Err(Error::semantic(
                    "densities",
                    "explicit schedule needs a `densities` array",
                ));
            };
            let densities = items
                .iter()
                .map(|v| as_f64(v).ok_or_else(|| type_error("schedule.densities", "numbers")))
                .collect::<Result<Vec<_>>>()?;
            SparsitySchedule::Explicit { densities }
        }
    };
    Ok(schedule)
}

fn check_keys(section: &str, t: &Table, allowed: &[&str]) -> Result<()> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::UnknownKey {
                section: section.into(),
                key: key.clone(),
            });
        }
    }
    Ok(())
}

fn required_table<'a>(t: &'a Table, key: &str, section: &str) -> Result<&'a Table> {
    match t.get(key) {
        Some(Value::Table(inner)) => Ok(inner),
        Some(_) => Err(type_error(key, "a table")),
        None => Err(Error::semantic(
            key,
            format!("{section} is missing the [{key}] section"),
        )),
    }
}

fn required_str<'a>(t: &'a Table, key: &str, section: &str) -> Result<&'a str> {
    opt_str(t, key, section)?
        .ok_or_else(|| Error::semantic(key, format!("{section} is missing `{key}`")))
}

fn opt_str<'a>(t: &'a Table, key: &str, section: &str) -> Result<Option<&'a str>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(_) => Err(type_error(&format!("{section}.{key}"), "a string")),
    }
}

fn opt_usize(t: &Table, key: &str, section: &str) -> Result<Option<usize>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
        Some(Value::Integer(i)) => Err(Error::semantic(
            key,
            format!("{section}.{key} = {i} must be nonnegative"),
        )),
        Some(_) => Err(type_error(&format!("{section}.{key}"), "an integer")),
    }
}

fn opt_f64(t: &Table, key: &str, section: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(v) => as_f64(v)
            .map(Some)
            .ok_or_else(|| type_error(&format!("{section}.{key}"), "a number")),
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn type_error(path: &str, expected: &str) -> Error {
    Error::semantic(path, format!("{path} must be {expected}"))
}

fn kind_name(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Dense => "dense",
        LayerKind::Conv => "conv",
    }
}

fn format_name(format: WeightFormat) -> &'static str {
    match format {
        WeightFormat::Dense => "dense",
        WeightFormat::Sparse => "sparse",
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
