//! Coordinate charts, metrics, Christoffel symbols and Euclidean embeddings.
//!
//! Four charts are supported: the cylinder `(z, φ)`, the cone `(r, φ)` with
//! opening parameter `α = sin²θ₀`, the round 2-sphere `(θ, φ)` and the round
//! 3-sphere `(φ₁, φ₂, φ₃)`. All metrics are diagonal. Periodic coordinates
//! (every azimuth) accept any finite value; the remaining coordinates must lie
//! strictly inside their open interval, so poles and the cone apex are
//! rejected rather than regularized.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest chart dimension handled by the crate.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("coordinate {name} = {value} is outside its range {range}")]
    CoordsOutOfRange { index: usize, name: &'static str, value: f64, range: String },
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid chart parameter: {0}")]
    InvalidParameter(String),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Which surface a chart describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Cylinder,
    Cone,
    Sphere2,
    Sphere3,
}

/// A named coordinate chart.
///
/// Serializes as `{"chart": "cone", "alpha": 0.25}`, `{"chart": "sphere2", "R": 1.0}`
/// and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "lowercase", deny_unknown_fields)]
pub enum Chart {
    Cylinder {
        #[serde(rename = "R", default = "unit_radius")]
        radius: f64,
    },
    Cone {
        alpha: f64,
    },
    Sphere2 {
        #[serde(rename = "R", default = "unit_radius")]
        radius: f64,
    },
    Sphere3 {
        #[serde(rename = "R", default = "unit_radius")]
        radius: f64,
    },
}

fn unit_radius() -> f64 {
    1.0
}

/// Open interval of one coordinate. Periodic coordinates accept any finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordRange {
    pub min: f64,
    pub max: f64,
    pub periodic: bool,
}

impl CoordRange {
    const fn open(min: f64, max: f64) -> Self {
        Self { min, max, periodic: false }
    }

    const fn azimuth() -> Self {
        Self { min: 0.0, max: 2.0 * PI, periodic: true }
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x.is_finite() && (self.periodic || (x > self.min && x < self.max))
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x.is_finite() && (self.periodic || (x >= self.min && x <= self.max))
    }

    fn describe(&self) -> String {
        if self.periodic {
            "periodic [0, 2π)".to_string()
        } else {
            format!("({}, {})", self.min, self.max)
        }
    }
}

/// Symmetric metric tensor at a point, stored densely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensor {
    pub dim: usize,
    pub g: [[f64; MAX_DIM]; MAX_DIM],
}

impl MetricTensor {
    fn diagonal(diag: &[f64]) -> Self {
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, d) in diag.iter().enumerate() {
            g[i][i] = *d;
        }
        Self { dim: diag.len(), g }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i][j]
    }

    /// `g(a, b)` for two tangent vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.g[i][j] * a[i] * b[j];
            }
        }
        s
    }
}

/// Christoffel symbols of the second kind, `gamma[i][j][k] = Γ^i_{jk}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    pub gamma: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Christoffel {
    fn zero(dim: usize) -> Self {
        Self { dim, gamma: [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM] }
    }

    fn set_sym(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.gamma[i][j][k] = value;
        self.gamma[i][k][j] = value;
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[i][j][k]
    }

    /// `Σ_{jk} Γ^i_{jk} u^j u^k` for every `i`.
    pub fn contract(&self, u: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut s = 0.0;
            for j in 0..self.dim {
                for k in 0..self.dim {
                    s += self.gamma[i][j][k] * u[j] * u[k];
                }
            }
            *o = s;
        }
        out
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    m = m.max((self.gamma[i][j][k] - other.gamma[i][j][k]).abs());
                }
            }
        }
        m
    }
}

impl Chart {
    pub fn cylinder(radius: f64) -> Result<Self, GeometryError> {
        let c = Chart::Cylinder { radius };
        c.validate()?;
        Ok(c)
    }

    pub fn cone(alpha: f64) -> Result<Self, GeometryError> {
        let c = Chart::Cone { alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn sphere2(radius: f64) -> Result<Self, GeometryError> {
        let c = Chart::Sphere2 { radius };
        c.validate()?;
        Ok(c)
    }

    pub fn sphere3(radius: f64) -> Result<Self, GeometryError> {
        let c = Chart::Sphere3 { radius };
        c.validate()?;
        Ok(c)
    }

    /// Checks the parameter invariants; deserialized charts should go through this.
    pub fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            Chart::Cone { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(GeometryError::InvalidParameter(format!("cone alpha must lie in (0, 1], got {alpha}")));
                }
            }
            Chart::Cylinder { radius } | Chart::Sphere2 { radius } | Chart::Sphere3 { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::InvalidParameter(format!("radius R must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ChartKind {
        match self {
            Chart::Cylinder { .. } => ChartKind::Cylinder,
            Chart::Cone { .. } => ChartKind::Cone,
            Chart::Sphere2 { .. } => ChartKind::Sphere2,
            Chart::Sphere3 { .. } => ChartKind::Sphere3,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Chart::Sphere3 { .. } => 3,
            _ => 2,
        }
    }

    pub fn coord_names(&self) -> &'static [&'static str] {
        match self {
            Chart::Cylinder { .. } => &["z", "phi"],
            Chart::Cone { .. } => &["r", "phi"],
            Chart::Sphere2 { .. } => &["theta", "phi"],
            Chart::Sphere3 { .. } => &["phi1", "phi2", "phi3"],
        }
    }

    pub fn coord_ranges(&self) -> Vec<CoordRange> {
        match self {
            Chart::Cylinder { .. } => {
                vec![CoordRange::open(f64::NEG_INFINITY, f64::INFINITY), CoordRange::azimuth()]
            }
            Chart::Cone { .. } => vec![CoordRange::open(0.0, f64::INFINITY), CoordRange::azimuth()],
            Chart::Sphere2 { .. } => vec![CoordRange::open(0.0, PI), CoordRange::azimuth()],
            Chart::Sphere3 { .. } => vec![CoordRange::open(0.0, PI), CoordRange::open(0.0, PI), CoordRange::azimuth()],
        }
    }

    /// Radius parameter for the cylinder and spheres, `None` for the cone.
    pub fn radius(&self) -> Option<f64> {
        match *self {
            Chart::Cylinder { radius } | Chart::Sphere2 { radius } | Chart::Sphere3 { radius } => Some(radius),
            Chart::Cone { .. } => None,
        }
    }

    fn check_len(&self, coords: &[f64]) -> Result<(), GeometryError> {
        if coords.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), got: coords.len() });
        }
        Ok(())
    }

    /// Requires every coordinate strictly inside its open interval.
    pub fn check_interior(&self, coords: &[f64]) -> Result<(), GeometryError> {
        self.check_len(coords)?;
        for (index, (x, range)) in coords.iter().zip(self.coord_ranges()).enumerate() {
            if !range.contains_open(*x) {
                return Err(GeometryError::CoordsOutOfRange {
                    index,
                    name: self.coord_names()[index],
                    value: *x,
                    range: range.describe(),
                });
            }
        }
        Ok(())
    }

    fn check_closed(&self, coords: &[f64]) -> Result<(), GeometryError> {
        self.check_len(coords)?;
        for (index, (x, range)) in coords.iter().zip(self.coord_ranges()).enumerate() {
            if !range.contains_closed(*x) {
                return Err(GeometryError::CoordsOutOfRange {
                    index,
                    name: self.coord_names()[index],
                    value: *x,
                    range: range.describe(),
                });
            }
        }
        Ok(())
    }

    pub fn is_interior(&self, coords: &[f64]) -> bool {
        self.check_interior(coords).is_ok()
    }

    /// Diagonal entries of the metric, no range check.
    fn metric_diag(&self, x: &[f64]) -> [f64; MAX_DIM] {
        match *self {
            Chart::Cylinder { radius } => [1.0, radius * radius, 0.0],
            Chart::Cone { alpha } => [1.0, alpha * x[0] * x[0], 0.0],
            Chart::Sphere2 { radius } => {
                let r2 = radius * radius;
                let s = x[0].sin();
                [r2, r2 * s * s, 0.0]
            }
            Chart::Sphere3 { radius } => {
                let r2 = radius * radius;
                let s1 = x[0].sin();
                let s2 = x[1].sin();
                [r2, r2 * s1 * s1, r2 * s1 * s1 * s2 * s2]
            }
        }
    }

    pub fn metric_at(&self, coords: &[f64]) -> Result<MetricTensor, GeometryError> {
        self.check_interior(coords)?;
        let d = self.metric_diag(coords);
        Ok(MetricTensor::diagonal(&d[..self.dim()]))
    }

    /// Closed-form Christoffel symbols of the Levi-Civita connection.
    pub fn christoffel_at(&self, coords: &[f64]) -> Result<Christoffel, GeometryError> {
        self.check_interior(coords)?;
        Ok(self.christoffel_unchecked(coords))
    }

    pub(crate) fn christoffel_unchecked(&self, x: &[f64]) -> Christoffel {
        let mut c = Christoffel::zero(self.dim());
        match *self {
            Chart::Cylinder { .. } => {}
            Chart::Cone { alpha } => {
                let r = x[0];
                c.set_sym(0, 1, 1, -alpha * r);
                c.set_sym(1, 0, 1, 1.0 / r);
            }
            Chart::Sphere2 { .. } => {
                let (s, co) = x[0].sin_cos();
                c.set_sym(0, 1, 1, -s * co);
                c.set_sym(1, 0, 1, co / s);
            }
            Chart::Sphere3 { .. } => {
                let (s1, c1) = x[0].sin_cos();
                let (s2, c2) = x[1].sin_cos();
                c.set_sym(0, 1, 1, -s1 * c1);
                c.set_sym(0, 2, 2, -s1 * c1 * s2 * s2);
                c.set_sym(1, 0, 1, c1 / s1);
                c.set_sym(1, 2, 2, -s2 * c2);
                c.set_sym(2, 0, 2, c1 / s1);
                c.set_sym(2, 1, 2, c2 / s2);
            }
        }
        c
    }

    /// Christoffel symbols from central differences of [`Chart::metric_at`]
    /// through `Γ^i_{jk} = ½ g^{il} (∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})`.
    ///
    /// Every stencil point `coords ± h e_k` must itself be interior.
    pub fn christoffel_fd(&self, coords: &[f64], h: f64) -> Result<Christoffel, GeometryError> {
        if !(h > 0.0) {
            return Err(GeometryError::InvalidStep(h));
        }
        self.check_interior(coords)?;
        let n = self.dim();
        // dg[l][i][j] = ∂_l g_{ij}
        let mut dg = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        let mut shifted = coords.to_vec();
        for l in 0..n {
            shifted[l] = coords[l] + h;
            let gp = self.metric_at(&shifted)?;
            shifted[l] = coords[l] - h;
            let gm = self.metric_at(&shifted)?;
            shifted[l] = coords[l];
            for i in 0..n {
                for j in 0..n {
                    dg[l][i][j] = (gp.g[i][j] - gm.g[i][j]) / (2.0 * h);
                }
            }
        }
        let g = self.metric_at(coords)?;
        let mut out = Christoffel::zero(n);
        for i in 0..n {
            // diagonal metric: g^{il} = δ_il / g_ii
            let ginv = 1.0 / g.g[i][i];
            for j in 0..n {
                for k in 0..n {
                    out.gamma[i][j][k] = 0.5 * ginv * (dg[j][i][k] + dg[k][i][j] - dg[i][j][k]);
                }
            }
        }
        Ok(out)
    }

    /// Point of the surface in Euclidean space (`R³`, or `R⁴` for the 3-sphere).
    /// Poles and the cone apex are allowed here.
    pub fn embed(&self, coords: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_closed(coords)?;
        let x = coords;
        Ok(match *self {
            Chart::Cylinder { radius } => {
                vec![radius * x[1].cos(), radius * x[1].sin(), x[0]]
            }
            Chart::Cone { alpha } => {
                let s0 = alpha.sqrt();
                let c0 = (1.0 - alpha).sqrt();
                vec![s0 * x[0] * x[1].cos(), s0 * x[0] * x[1].sin(), c0 * x[0]]
            }
            Chart::Sphere2 { radius } => {
                let (s, c) = x[0].sin_cos();
                vec![radius * s * x[1].cos(), radius * s * x[1].sin(), radius * c]
            }
            Chart::Sphere3 { radius } => {
                let (s1, c1) = x[0].sin_cos();
                let (s2, c2) = x[1].sin_cos();
                let (s3, c3) = x[2].sin_cos();
                vec![radius * c1, radius * s1 * c2, radius * s1 * s2 * c3, radius * s1 * s2 * s3]
            }
        })
    }

    /// Tangent vector `dX/dt` of the embedding along coordinate velocity `u`.
    pub fn embed_velocity(&self, coords: &[f64], velocities: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_closed(coords)?;
        let x = coords;
        let u = velocities;
        Ok(match *self {
            Chart::Cylinder { radius } => {
                let (s, c) = x[1].sin_cos();
                vec![-radius * s * u[1], radius * c * u[1], u[0]]
            }
            Chart::Cone { alpha } => {
                let s0 = alpha.sqrt();
                let c0 = (1.0 - alpha).sqrt();
                let (s, c) = x[1].sin_cos();
                vec![s0 * (c * u[0] - x[0] * s * u[1]), s0 * (s * u[0] + x[0] * c * u[1]), c0 * u[0]]
            }
            Chart::Sphere2 { radius } => {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                vec![
                    radius * (ct * cp * u[0] - st * sp * u[1]),
                    radius * (ct * sp * u[0] + st * cp * u[1]),
                    -radius * st * u[0],
                ]
            }
            Chart::Sphere3 { radius } => {
                let (s1, c1) = x[0].sin_cos();
                let (s2, c2) = x[1].sin_cos();
                let (s3, c3) = x[2].sin_cos();
                vec![
                    -radius * s1 * u[0],
                    radius * (c1 * c2 * u[0] - s1 * s2 * u[1]),
                    radius * (c1 * s2 * c3 * u[0] + s1 * c2 * c3 * u[1] - s1 * s2 * s3 * u[2]),
                    radius * (c1 * s2 * s3 * u[0] + s1 * c2 * s3 * u[1] + s1 * s2 * c3 * u[2]),
                ]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cone_metric_example() {
        let cone = Chart::cone(0.25).unwrap();
        let g = cone.metric_at(&[2.0, 1.0]).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), 1.0);
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn cone_metric_matches_embedded_arc_length() {
        // |dX/dt|² of the embedded curve equals g(u, u)
        let cone = Chart::cone(0.25).unwrap();
        let x = [2.0, 1.0];
        let u = [0.3, -0.7];
        let dx = cone.embed_velocity(&x, &u).unwrap();
        let speed2: f64 = dx.iter().map(|d| d * d).sum();
        let g = cone.metric_at(&x).unwrap();
        assert!(close(speed2, g.inner(&u, &u), 1e-14));
    }

    #[test]
    fn sphere_and_cylinder_metrics() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let g = s2.metric_at(&[PI / 2.0, 0.0]).unwrap();
        assert!(close(g.get(0, 0), 1.0, 1e-15) && close(g.get(1, 1), 1.0, 1e-15));
        let cyl = Chart::cylinder(1.0).unwrap();
        for x in [[0.0, 0.0], [-5.0, 9.0], [3.0, -1.0]] {
            let g = cyl.metric_at(&x).unwrap();
            assert_eq!((g.get(0, 0), g.get(1, 1), g.get(0, 1)), (1.0, 1.0, 0.0));
        }
    }

    #[test]
    fn sphere3_metric_uses_sin_phi2_in_third_slot() {
        let s3 = Chart::sphere3(2.0).unwrap();
        let x = [1.0, 0.4, 2.0];
        let g = s3.metric_at(&x).unwrap();
        let expected = 4.0 * 1.0f64.sin().powi(2) * 0.4f64.sin().powi(2);
        assert!(close(g.get(2, 2), expected, 1e-14));
    }

    #[test]
    fn christoffel_examples() {
        let cone = Chart::cone(0.25).unwrap();
        let c = cone.christoffel_at(&[2.0, 0.0]).unwrap();
        assert!(close(c.get(0, 1, 1), -0.5, 1e-15));
        assert!(close(c.get(1, 0, 1), 0.5, 1e-15));
        assert!(close(c.get(1, 1, 0), 0.5, 1e-15));
        assert_eq!(c.get(0, 0, 0), 0.0);

        let cyl = Chart::cylinder(1.0).unwrap();
        let c = cyl.christoffel_at(&[0.3, 1.0]).unwrap();
        assert_eq!(c.max_abs_diff(&Christoffel::zero(2)), 0.0);

        let s2 = Chart::sphere2(1.0).unwrap();
        let c = s2.christoffel_at(&[PI / 4.0, 0.0]).unwrap();
        assert!(close(c.get(0, 1, 1), -0.5, 1e-15));
        assert!(close(c.get(1, 0, 1), 1.0, 1e-15));
    }

    #[test]
    fn christoffel_fd_examples() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let x = [PI / 3.0, 1.0];
        let fd = s2.christoffel_fd(&x, 1e-4).unwrap();
        assert!(fd.max_abs_diff(&s2.christoffel_at(&x).unwrap()) < 1e-6);

        let cyl = Chart::cylinder(1.0).unwrap();
        let fd = cyl.christoffel_fd(&[0.2, 2.0], 1e-3).unwrap();
        assert!(fd.max_abs_diff(&Christoffel::zero(2)) < 1e-10);

        let cone = Chart::cone(0.5).unwrap();
        let fd = cone.christoffel_fd(&[1.0, 0.0], 1e-4).unwrap();
        assert!(close(fd.get(1, 0, 1), 1.0, 1e-6));
    }

    #[test]
    fn christoffel_fd_sphere3_matches_closed_form() {
        let s3 = Chart::sphere3(1.5).unwrap();
        let x = [0.9, 2.1, 4.0];
        let fd = s3.christoffel_fd(&x, 1e-4).unwrap();
        assert!(fd.max_abs_diff(&s3.christoffel_at(&x).unwrap()) < 1e-7);
    }

    #[test]
    fn range_errors() {
        let s2 = Chart::sphere2(1.0).unwrap();
        assert!(matches!(s2.metric_at(&[0.0, 1.0]), Err(GeometryError::CoordsOutOfRange { index: 0, .. })));
        assert!(s2.christoffel_at(&[PI, 0.0]).is_err());
        let cone = Chart::cone(0.3).unwrap();
        assert!(cone.metric_at(&[0.0, 0.0]).is_err());
        assert!(cone.metric_at(&[1.0, f64::NAN]).is_err());
        // periodic azimuth accepts values outside [0, 2π)
        assert!(cone.metric_at(&[1.0, 9.0]).is_ok());
        assert!(matches!(s2.metric_at(&[1.0]), Err(GeometryError::DimensionMismatch { expected: 2, got: 1 })));
        // stencil leaves the chart
        assert!(s2.christoffel_fd(&[1e-5, 0.0], 1e-4).is_err());
        assert!(s2.christoffel_fd(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Chart::cone(0.0).is_err());
        assert!(Chart::cone(1.5).is_err());
        assert!(Chart::cone(1.0).is_ok());
        assert!(Chart::sphere2(-1.0).is_err());
        assert!(Chart::sphere3(0.0).is_err());
    }

    #[test]
    fn embed_examples() {
        let s2 = Chart::sphere2(2.0).unwrap();
        let p = s2.embed(&[PI / 2.0, 0.0]).unwrap();
        assert!(close(p[0], 2.0, 1e-15) && close(p[1], 0.0, 1e-15) && close(p[2], 0.0, 1e-15));
        // poles are allowed for the embedding
        assert!(s2.embed(&[0.0, 0.0]).is_ok());

        let theta0 = PI / 6.0;
        let cone = Chart::cone(theta0.sin().powi(2)).unwrap();
        let p = cone.embed(&[1.0, 0.0]).unwrap();
        assert!(close(p[0], 0.5, 1e-15) && close(p[1], 0.0, 1e-15));
        assert!(close(p[2], 3f64.sqrt() / 2.0, 1e-15));

        let s3 = Chart::sphere3(1.0).unwrap();
        let p = s3.embed(&[PI / 2.0, PI / 2.0, 0.0]).unwrap();
        let expected = [0.0, 0.0, 1.0, 0.0];
        for (a, b) in p.iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn chart_json_shape() {
        let c: Chart = serde_json::from_str(r#"{"chart": "cone", "alpha": 0.25}"#).unwrap();
        assert_eq!(c, Chart::Cone { alpha: 0.25 });
        let c: Chart = serde_json::from_str(r#"{"chart": "sphere2", "R": 1.0}"#).unwrap();
        assert_eq!(c, Chart::Sphere2 { radius: 1.0 });
        let s = serde_json::to_string(&Chart::Sphere3 { radius: 2.0 }).unwrap();
        assert_eq!(s, r#"{"chart":"sphere3","R":2.0}"#);
    }
}
