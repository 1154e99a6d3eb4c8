//! Velocity fields and their sampled grids, with CSV and JSON round-trips.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Chart;
use crate::grid::{Axis, GridError, GridSpec};

/// A velocity field `u(t, x)` on a chart.
pub trait VelocityField: Sync {
    fn chart(&self) -> &Chart;

    /// Velocity at `(t, x)`, or `None` outside the field's validity set.
    fn velocity(&self, t: f64, coords: &[f64]) -> Option<Vec<f64>>;

    /// Declared independence of `t`; residuals then use `∂u/∂t = 0` exactly.
    fn is_stationary(&self) -> bool {
        false
    }

    /// Short provenance string recorded in exported grids.
    fn describe(&self) -> String;
}

/// Adds a constant offset to another field's velocities.
pub struct Perturbed<'a> {
    pub inner: &'a dyn VelocityField,
    pub offset: Vec<f64>,
}

impl VelocityField for Perturbed<'_> {
    fn chart(&self) -> &Chart {
        self.inner.chart()
    }

    fn velocity(&self, t: f64, coords: &[f64]) -> Option<Vec<f64>> {
        let mut v = self.inner.velocity(t, coords)?;
        for (vi, d) in v.iter_mut().zip(&self.offset) {
            *vi += d;
        }
        Some(v)
    }

    fn is_stationary(&self) -> bool {
        self.inner.is_stationary()
    }

    fn describe(&self) -> String {
        format!("{} + {:?}", self.inner.describe(), self.offset)
    }
}

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("malformed field file: {0}")]
    Malformed(String),
}

/// Velocities sampled on the nodes of a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub chart: Chart,
    pub t: f64,
    pub grid: GridSpec,
    /// One entry per node in flat order, `None` where masked out.
    pub values: Vec<Option<Vec<f64>>>,
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct FieldGridJson {
    chart: Chart,
    t: f64,
    provenance: String,
    axes: Vec<Axis>,
    values: Vec<Option<Vec<f64>>>,
}

/// Shortest round-trip decimal text for `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl FieldGrid {
    /// Evaluates `field` at every node in parallel; output order is the flat node order.
    pub fn sample(field: &dyn VelocityField, grid: &GridSpec, t: f64) -> Self {
        let values = (0..grid.n_nodes())
            .into_par_iter()
            .map(|i| field.velocity(t, &grid.coords_of(i)).filter(|v| v.iter().all(|x| x.is_finite())))
            .collect();
        Self { chart: *field.chart(), t, grid: grid.clone(), values, provenance: field.describe() }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn n_valid(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let names = self.chart.coord_names();
        names
            .iter()
            .map(|n| n.to_string())
            .chain(names.iter().map(|n| format!("u_{n}")))
            .chain(std::iter::once("valid".to_string()))
            .collect()
    }

    /// Writes `coords…, u_<coord>…, valid`; masked rows have empty velocity cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FieldIoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        let n = self.chart.dim();
        for (i, value) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.grid.coords_of(i).into_iter().map(fmt_f64).collect();
            match value {
                Some(v) => {
                    row.extend(v.iter().map(|x| fmt_f64(*x)));
                    row.push("1".into());
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), n));
                    row.push("0".into());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`FieldGrid::write_csv`]; axes are recovered from the node coordinates.
    pub fn read_csv<R: Read>(chart: Chart, t: f64, input: R) -> Result<Self, FieldIoError> {
        let mut r = csv::Reader::from_reader(input);
        let n = chart.dim();
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let expected =
            FieldGrid { chart, t, grid: GridSpec { axes: vec![] }, values: vec![], provenance: String::new() }
                .csv_header();
        if header != expected {
            return Err(FieldIoError::Malformed(format!("header {header:?}, expected {expected:?}")));
        }
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64, FieldIoError> {
                rec[k].parse().map_err(|_| FieldIoError::Malformed(format!("bad number {:?}", &rec[k])))
            };
            coords.push((0..n).map(num).collect::<Result<_, _>>()?);
            values.push(match &rec[2 * n] {
                "1" => Some((n..2 * n).map(num).collect::<Result<Vec<_>, _>>()?),
                "0" => None,
                other => return Err(FieldIoError::Malformed(format!("bad valid flag {other:?}"))),
            });
        }
        let mut axes = Vec::with_capacity(n);
        for (k, name) in chart.coord_names().iter().enumerate() {
            let mut nodes: Vec<f64> = coords.iter().map(|c| c[k]).collect();
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            if nodes.len() < 2 {
                return Err(FieldIoError::Malformed(format!("axis {name} has fewer than two nodes")));
            }
            axes.push(Axis::new(*name, nodes[0], *nodes.last().unwrap(), nodes.len()));
        }
        let grid = GridSpec::for_chart(&chart, axes)?;
        if grid.n_nodes() != values.len() {
            return Err(FieldIoError::Malformed("rows do not form a full grid".into()));
        }
        for (i, c) in coords.iter().enumerate() {
            let want = grid.coords_of(i);
            let tol = grid.steps().iter().fold(0.0f64, |m, h| m.max(*h)) * 1e-9;
            if c.iter().zip(&want).any(|(a, b)| (a - b).abs() > tol) {
                return Err(FieldIoError::Malformed(format!("row {i} is not on a uniform grid")));
            }
        }
        Ok(Self { chart, t, grid, values, provenance: "csv".into() })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), FieldIoError> {
        let doc = FieldGridJson {
            chart: self.chart,
            t: self.t,
            provenance: self.provenance.clone(),
            axes: self.grid.axes.clone(),
            values: self.values.clone(),
        };
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, FieldIoError> {
        let doc: FieldGridJson = serde_json::from_reader(input)?;
        doc.chart.validate().map_err(|e| FieldIoError::Malformed(e.to_string()))?;
        let grid = GridSpec::for_chart(&doc.chart, doc.axes)?;
        if grid.n_nodes() != doc.values.len() {
            return Err(FieldIoError::Malformed("value count does not match the axes".into()));
        }
        Ok(Self { chart: doc.chart, t: doc.t, grid, values: doc.values, provenance: doc.provenance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotation(Chart);

    impl VelocityField for Rotation {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn velocity(&self, _t: f64, x: &[f64]) -> Option<Vec<f64>> {
            (x[0] < 1.0).then(|| vec![0.1 * x[1], 1.0 / 3.0])
        }
        fn describe(&self) -> String {
            "rotation".into()
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let chart = Chart::sphere2(1.0).unwrap();
        let grid = GridSpec::uniform(&chart, &[(0.3, 1.3, 6), (0.0, 2.0, 4)]).unwrap();
        let fg = FieldGrid::sample(&Rotation(chart), &grid, 0.5);
        assert!(fg.n_valid() > 0 && fg.n_valid() < 24);
        let mut buf = Vec::new();
        fg.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,phi,u_theta,u_phi,valid\n"));
        let back = FieldGrid::read_csv(chart, 0.5, buf.as_slice()).unwrap();
        assert_eq!(back.values, fg.values);
        assert_eq!(back.grid.counts(), fg.grid.counts());
    }

    #[test]
    fn json_roundtrip() {
        let chart = Chart::sphere2(2.0).unwrap();
        let grid = GridSpec::uniform(&chart, &[(0.3, 1.3, 3), (0.0, 2.0, 3)]).unwrap();
        let fg = FieldGrid::sample(&Rotation(chart), &grid, 0.0);
        let mut buf = Vec::new();
        fg.write_json(&mut buf).unwrap();
        let back = FieldGrid::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, fg);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let chart = Chart::sphere2(1.0).unwrap();
        let bad = "theta,phi,u_theta,u_phi,valid\n0.5,0.1,1,2,7\n";
        assert!(FieldGrid::read_csv(chart, 0.0, bad.as_bytes()).is_err());
        let bad = "z,phi,u_z,u_phi,valid\n";
        assert!(FieldGrid::read_csv(chart, 0.0, bad.as_bytes()).is_err());
    }
}
