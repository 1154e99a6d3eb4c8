//! Uniform rectangular grids over chart coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Chart;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid axis: {0}")]
    InvalidAxis(String),
    #[error("grid axis {name}: [{min}, {max}] leaves the chart range")]
    OutOfRange { name: String, min: f64, max: f64 },
    #[error("grid has {got} axes, chart needs {expected}")]
    AxisCount { expected: usize, got: usize },
}

/// Uniform nodes `min, min + h, …, max` along one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, count: usize) -> Self {
        Self { name: name.into(), min, max, count }
    }

    /// Parses `name=min:max:count`.
    pub fn parse(spec: &str) -> Result<Self, GridError> {
        let bad = || GridError::InvalidAxis(format!("expected name=min:max:count, got {spec:?}"));
        let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 || name.trim().is_empty() {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(Self::new(name.trim(), min, max, count))
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    fn validate(&self) -> Result<(), GridError> {
        if self.count < 2 {
            return Err(GridError::InvalidAxis(format!("{}: count must be at least 2", self.name)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(GridError::InvalidAxis(format!("{}: need finite min < max", self.name)));
        }
        Ok(())
    }
}

/// Tensor-product grid. Flat node indices run with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    /// Builds a grid for `chart`, reordering named axes into coordinate order
    /// and requiring every node to lie inside the open chart.
    pub fn for_chart(chart: &Chart, axes: Vec<Axis>) -> Result<Self, GridError> {
        let names = chart.coord_names();
        if axes.len() != names.len() {
            return Err(GridError::AxisCount { expected: names.len(), got: axes.len() });
        }
        let mut ordered = Vec::with_capacity(names.len());
        for name in names {
            let axis = axes
                .iter()
                .find(|a| a.name == *name)
                .ok_or_else(|| GridError::InvalidAxis(format!("missing axis {name}")))?;
            ordered.push(axis.clone());
        }
        for (axis, range) in ordered.iter().zip(chart.coord_ranges()) {
            axis.validate()?;
            if !(range.contains_open(axis.min) && range.contains_open(axis.max)) {
                return Err(GridError::OutOfRange { name: axis.name.clone(), min: axis.min, max: axis.max });
            }
        }
        Ok(Self { axes: ordered })
    }

    /// Grid from `(min, max, count)` triples in coordinate order.
    pub fn uniform(chart: &Chart, spans: &[(f64, f64, usize)]) -> Result<Self, GridError> {
        let axes = chart
            .coord_names()
            .iter()
            .zip(spans)
            .map(|(n, &(min, max, count))| Axis::new(*n, min, max, count))
            .collect();
        Self::for_chart(chart, axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::step).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.count + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = flat % axis.count;
            flat /= axis.count;
        }
        out
    }

    pub fn coords_of(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, a)| a.node(i)).collect()
    }

    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        (0..self.n_nodes()).map(|i| self.coords_of(i)).collect()
    }
}
