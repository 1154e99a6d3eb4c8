//! CSV and JSON writers for trajectories and blow-up loci.

use std::io::Write;

use serde::Serialize;

use crate::field::{fmt_f64, FieldIoError};
use crate::geodesics::{integral_names, integrals_at, IntegralDrift, Trajectory};
use crate::geometry::Chart;
use crate::hodograph::{BlowupLocus, LocusPoint};

/// Column names of a trajectory CSV: `t`, coordinates, `u_<coord>`, then every integral.
pub fn trajectory_header(chart: &Chart) -> Vec<String> {
    let names = chart.coord_names();
    std::iter::once("t".to_string())
        .chain(names.iter().map(|n| n.to_string()))
        .chain(names.iter().map(|n| format!("u_{n}")))
        .chain(integral_names(chart).iter().map(|n| n.to_string()))
        .collect()
}

/// One row per sample; integrals undefined at a sample are left empty.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), FieldIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(&traj.chart))?;
    let names = integral_names(&traj.chart);
    for s in &traj.samples {
        let ints = integrals_at(&traj.chart, s).ok();
        let mut row = vec![fmt_f64(s.t)];
        row.extend(s.coords.iter().map(|x| fmt_f64(*x)));
        row.extend(s.velocities.iter().map(|x| fmt_f64(*x)));
        row.extend(names.iter().map(|n| ints.as_ref().and_then(|set| set.get(n)).map(fmt_f64).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SampleJson<'a> {
    t: f64,
    coords: &'a [f64],
    velocities: &'a [f64],
    integrals: Vec<(&'static str, Option<f64>)>,
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    chart: Chart,
    accepted_steps: usize,
    rejected_steps: usize,
    drift: &'a [IntegralDrift],
    samples: Vec<SampleJson<'a>>,
}

pub fn write_trajectory_json<W: Write>(traj: &Trajectory, out: W) -> Result<(), FieldIoError> {
    let names = integral_names(&traj.chart);
    let doc = TrajectoryJson {
        chart: traj.chart,
        accepted_steps: traj.step_stats.accepted,
        rejected_steps: traj.step_stats.rejected,
        drift: &traj.drift,
        samples: traj
            .samples
            .iter()
            .map(|s| {
                let ints = integrals_at(&traj.chart, s).ok();
                SampleJson {
                    t: s.t,
                    coords: &s.coords,
                    velocities: &s.velocities,
                    integrals: names.iter().map(|n| (*n, ints.as_ref().and_then(|set| set.get(n)))).collect(),
                }
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

/// Column names of a locus CSV: `polyline`, coordinates, `detM`.
pub fn locus_header(chart: &Chart) -> Vec<String> {
    std::iter::once("polyline".to_string())
        .chain(chart.coord_names().iter().map(|n| n.to_string()))
        .chain(std::iter::once("detM".to_string()))
        .collect()
}

/// One row per crossing point; an empty locus gives a header-only file.
pub fn write_locus_csv<W: Write>(chart: &Chart, locus: &BlowupLocus, out: W) -> Result<(), FieldIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(locus_header(chart))?;
    for (k, line) in locus.polylines.iter().enumerate() {
        for p in line {
            let mut row = vec![k.to_string()];
            row.extend(p.coords.iter().map(|x| fmt_f64(*x)));
            row.push(fmt_f64(p.det_m));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LocusJson<'a> {
    chart: Chart,
    t: f64,
    polylines: &'a [Vec<LocusPoint>],
    masked: usize,
    rejected_crossings: usize,
}

pub fn write_locus_json<W: Write>(chart: &Chart, locus: &BlowupLocus, out: W) -> Result<(), FieldIoError> {
    let doc = LocusJson {
        chart: *chart,
        t: locus.t,
        polylines: &locus.polylines,
        masked: locus.masked,
        rejected_crossings: locus.rejected_crossings,
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}
