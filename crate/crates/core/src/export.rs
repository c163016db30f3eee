//! CSV output.

use std::io::Write;

use serde::Serialize;

use crate::analytic::{predict_bottleneck, AnalyticCounts, Bottleneck};
use crate::error::Result;
use crate::floorline::FloorlinePoint;
use crate::optimizer::TraceEntry;
use crate::sim::SimReport;
use crate::workload::CostModel;

#[derive(Serialize)]
struct AnalyzeRow {
    layer_id: usize,
    cores_used: usize,
    synops_per_core: f64,
    computes_per_core: f64,
    traffic_out: f64,
    predicted_bottleneck: Bottleneck,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    iteration: usize,
    assumption: Bottleneck,
    action: &'a str,
    time: f64,
    energy: f64,
    accepted: bool,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per layer of analytic counts.
pub fn write_analyze<W: Write>(out: W, counts: &[AnalyticCounts], cost: &CostModel) -> Result<()> {
    write_rows(
        out,
        counts.iter().enumerate().map(|(layer_id, c)| AnalyzeRow {
            layer_id,
            cores_used: c.cores_used,
            synops_per_core: c.synops_per_core,
            computes_per_core: c.computes_per_core,
            traffic_out: c.traffic_out,
            predicted_bottleneck: predict_bottleneck(c, cost),
        }),
    )
}

pub fn write_steps<W: Write>(out: W, report: &SimReport) -> Result<()> {
    write_rows(out, &report.per_step)
}

pub fn write_cores<W: Write>(out: W, report: &SimReport) -> Result<()> {
    write_rows(out, &report.per_core)
}

pub fn write_points<W: Write>(out: W, points: &[FloorlinePoint]) -> Result<()> {
    write_rows(out, points)
}

pub fn read_points<R: std::io::Read>(input: R) -> Result<Vec<FloorlinePoint>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceEntry]) -> Result<()> {
    write_rows(
        out,
        trace.iter().map(|t| TraceRow {
            iteration: t.iteration,
            assumption: t.assumption,
            action: &t.action,
            time: t.time,
            energy: t.energy,
            accepted: t.accepted,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let pts = vec![
            FloorlinePoint {
                intensity: 1.5,
                time: 200.0,
                energy: 3.0,
                label: "uniform(m=0.1)".into(),
            },
            FloorlinePoint {
                intensity: 9.0,
                time: 250.0,
                energy: 4.0,
                label: "lo-hi, \"quoted\"".into(),
            },
        ];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("intensity,time,energy,label\n"));
        assert_eq!(read_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn analyze_header() {
        let c = AnalyticCounts {
            synops_per_core: 10.0,
            computes_per_core: 1.0,
            traffic_out: 2.0,
            cores_used: 1,
        };
        let mut buf = Vec::new();
        write_analyze(&mut buf, &[c], &CostModel::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "layer_id,cores_used,synops_per_core,computes_per_core,traffic_out,predicted_bottleneck\n0,1,10.0,1.0,2.0,memory\n"
        );
    }
}
