//! Implicit hodograph systems `S_i(t, x, u) = 0`, their velocity Jacobian `M`,
//! Newton resolution for the velocities, and blow-up loci `det M = 0`.
//!
//! Every residual is written in terms of first integrals from
//! [`crate::geodesics`], so solutions are constant along characteristics.

mod blowup;
mod newton;
mod profiles;

pub use blowup::{solve_on_grid, trace_blowup, BlowupLocus, BlowupOptions, GridSolve, LocusPoint};
pub use newton::{solve_velocities, NewtonOptions, NewtonSolution};
pub use profiles::{MultiProfile, Profile, Tabulated};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesics::{integrals_with_sheet, PhaseState};
use crate::geometry::{Chart, ChartKind, GeometryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HodographError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("system {system} needs a {expected:?} chart, got {got:?}")]
    WrongChart { system: &'static str, expected: ChartKind, got: ChartKind },
    #[error("outside the system's domain: {0}")]
    OutOfDomain(String),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterate: Vec<f64>, residual: f64, iterations: usize },
    #[error("singular Jacobian (det M = {det:e}) at iterate {iterate:?}")]
    SingularJacobian { iterate: Vec<f64>, det: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

/// The arbitrary functions defining one class of hodograph systems.
///
/// The JSON tag is `family`; function slots are `F1`, `F2`, `F3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SystemKind {
    /// `u = F1(z − ut, φ − vt)`, `v = F2(z − ut, φ − vt)`.
    Cylinder {
        #[serde(rename = "F1")]
        f1: MultiProfile,
        #[serde(rename = "F2")]
        f2: MultiProfile,
    },
    /// `I3 = F1(H, L3)`, `I4 = F2(H, L3)`.
    Cone {
        #[serde(rename = "F1")]
        f1: MultiProfile,
        #[serde(rename = "F2")]
        f2: MultiProfile,
    },
    /// `H = F1(I3, I4)`, `L3 = F2(I3, I4)`.
    ConeAlt {
        #[serde(rename = "F1")]
        f1: MultiProfile,
        #[serde(rename = "F2")]
        f2: MultiProfile,
    },
    /// `I1 = F1(L1, L2)`, `v sin²θ = F2(L1, L2)` on the sheet `σ`.
    #[serde(rename = "s2")]
    Sphere2 {
        #[serde(rename = "F1")]
        f1: MultiProfile,
        #[serde(rename = "F2")]
        f2: MultiProfile,
    },
    /// `−L1/R² = F1(L3)`, `−L2/R² = F2(L3)` written as
    /// `R²(sinθ cosθ cosφ v + sinφ u) = F1(ξ)`, `R²(sinθ cosθ sinφ v − cosφ u) = F2(ξ)`,
    /// `ξ = R² sin²θ v`.
    #[serde(rename = "s2_stationary")]
    Sphere2Stationary {
        #[serde(rename = "F1")]
        f1: Profile,
        #[serde(rename = "F2")]
        f2: Profile,
    },
    /// `L_{3+i} = F_i(L1, L2, L3)`.
    #[serde(rename = "s3_stationary")]
    Sphere3Stationary {
        #[serde(rename = "F1")]
        f1: MultiProfile,
        #[serde(rename = "F2")]
        f2: MultiProfile,
        #[serde(rename = "F3")]
        f3: MultiProfile,
    },
}

impl SystemKind {
    pub fn id(&self) -> &'static str {
        match self {
            SystemKind::Cylinder { .. } => "cylinder",
            SystemKind::Cone { .. } => "cone",
            SystemKind::ConeAlt { .. } => "cone_alt",
            SystemKind::Sphere2 { .. } => "s2",
            SystemKind::Sphere2Stationary { .. } => "s2_stationary",
            SystemKind::Sphere3Stationary { .. } => "s3_stationary",
        }
    }

    pub fn chart_kind(&self) -> ChartKind {
        match self {
            SystemKind::Cylinder { .. } => ChartKind::Cylinder,
            SystemKind::Cone { .. } | SystemKind::ConeAlt { .. } => ChartKind::Cone,
            SystemKind::Sphere2 { .. } | SystemKind::Sphere2Stationary { .. } => ChartKind::Sphere2,
            SystemKind::Sphere3Stationary { .. } => ChartKind::Sphere3,
        }
    }

    /// Whether solutions are independent of `t`.
    pub fn is_stationary(&self) -> bool {
        matches!(self, SystemKind::Sphere2Stationary { .. } | SystemKind::Sphere3Stationary { .. })
    }

    /// Whether the velocity Jacobian has a closed form.
    pub fn has_analytic_jacobian(&self) -> bool {
        matches!(self, SystemKind::Sphere2Stationary { .. })
    }
}

/// A hodograph system bound to its chart and sheet sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HodographSystem {
    pub chart: Chart,
    #[serde(flatten)]
    pub kind: SystemKind,
    /// Sign σ selecting the branch of sheet-dependent integrals.
    #[serde(default = "plus_one")]
    pub sheet: f64,
}

fn plus_one() -> f64 {
    1.0
}

impl HodographSystem {
    pub fn new(chart: Chart, kind: SystemKind) -> Result<Self, HodographError> {
        if chart.kind() != kind.chart_kind() {
            return Err(HodographError::WrongChart {
                system: kind.id(),
                expected: kind.chart_kind(),
                got: chart.kind(),
            });
        }
        chart.validate()?;
        Ok(Self { chart, kind, sheet: 1.0 })
    }

    pub fn with_sheet(mut self, sheet: f64) -> Self {
        self.sheet = if sheet < 0.0 { -1.0 } else { 1.0 };
        self
    }

    pub fn make_cylinder_system(radius: f64, f1: MultiProfile, f2: MultiProfile) -> Result<Self, HodographError> {
        Self::new(Chart::cylinder(radius)?, SystemKind::Cylinder { f1, f2 })
    }

    pub fn make_cone_system(alpha: f64, f1: MultiProfile, f2: MultiProfile) -> Result<Self, HodographError> {
        Self::new(Chart::cone(alpha)?, SystemKind::Cone { f1, f2 })
    }

    pub fn make_cone_alt_system(alpha: f64, f1: MultiProfile, f2: MultiProfile) -> Result<Self, HodographError> {
        Self::new(Chart::cone(alpha)?, SystemKind::ConeAlt { f1, f2 })
    }

    pub fn make_s2_system(radius: f64, f1: MultiProfile, f2: MultiProfile, sheet: f64) -> Result<Self, HodographError> {
        Ok(Self::new(Chart::sphere2(radius)?, SystemKind::Sphere2 { f1, f2 })?.with_sheet(sheet))
    }

    pub fn make_s2_stationary_system(radius: f64, f1: Profile, f2: Profile) -> Result<Self, HodographError> {
        Self::new(Chart::sphere2(radius)?, SystemKind::Sphere2Stationary { f1, f2 })
    }

    pub fn make_s3_stationary_system(
        radius: f64,
        f1: MultiProfile,
        f2: MultiProfile,
        f3: MultiProfile,
    ) -> Result<Self, HodographError> {
        Self::new(Chart::sphere3(radius)?, SystemKind::Sphere3Stationary { f1, f2, f3 })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn is_stationary(&self) -> bool {
        self.kind.is_stationary()
    }

    /// The residual vector `S(t, x, u)`.
    pub fn residuals(&self, t: f64, coords: &[f64], velocities: &[f64]) -> Result<Vec<f64>, HodographError> {
        let n = self.dim();
        if velocities.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: velocities.len() }.into());
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(HodographError::OutOfDomain("non-finite velocity".into()));
        }
        let state = PhaseState::new(t, coords, velocities);
        let missing = |what: &str| HodographError::OutOfDomain(format!("{what} undefined at this state"));
        let out = match &self.kind {
            SystemKind::Cylinder { f1, f2 } => {
                let args = [Some(coords[0] - velocities[0] * t), Some(coords[1] - velocities[1] * t)];
                vec![
                    velocities[0] - f1.eval(&args).ok_or_else(|| missing("F1"))?,
                    velocities[1] - f2.eval(&args).ok_or_else(|| missing("F2"))?,
                ]
            }
            SystemKind::Cone { f1, f2 } => {
                let ints = integrals_with_sheet(&self.chart, &state, self.sheet)?;
                let args = [ints.get("H"), ints.get("L3")];
                vec![
                    ints.get("I3").ok_or_else(|| missing("I3"))? - f1.eval(&args).ok_or_else(|| missing("F1"))?,
                    ints.get("I4").ok_or_else(|| missing("I4"))? - f2.eval(&args).ok_or_else(|| missing("F2"))?,
                ]
            }
            SystemKind::ConeAlt { f1, f2 } => {
                let ints = integrals_with_sheet(&self.chart, &state, self.sheet)?;
                let args = [ints.get("I3"), ints.get("I4")];
                vec![
                    ints.get("H").ok_or_else(|| missing("H"))? - f1.eval(&args).ok_or_else(|| missing("F1"))?,
                    ints.get("L3").ok_or_else(|| missing("L3"))? - f2.eval(&args).ok_or_else(|| missing("F2"))?,
                ]
            }
            SystemKind::Sphere2 { f1, f2 } => {
                let ints = integrals_with_sheet(&self.chart, &state, self.sheet)?;
                let args = [ints.get("L1"), ints.get("L2")];
                let s = coords[0].sin();
                vec![
                    ints.get("I1").ok_or_else(|| missing("I1"))? - f1.eval(&args).ok_or_else(|| missing("F1"))?,
                    velocities[1] * s * s - f2.eval(&args).ok_or_else(|| missing("F2"))?,
                ]
            }
            SystemKind::Sphere2Stationary { f1, f2 } => {
                self.chart.check_interior(coords)?;
                let r2 = self.r2();
                let (s, c) = coords[0].sin_cos();
                let (sp, cp) = coords[1].sin_cos();
                let (u, v) = (velocities[0], velocities[1]);
                let xi = r2 * s * s * v;
                vec![
                    r2 * (s * c * cp * v + sp * u) - f1.eval(xi).ok_or_else(|| missing("F1"))?,
                    r2 * (s * c * sp * v - cp * u) - f2.eval(xi).ok_or_else(|| missing("F2"))?,
                ]
            }
            SystemKind::Sphere3Stationary { f1, f2, f3 } => {
                let ints = integrals_with_sheet(&self.chart, &state, self.sheet)?;
                let args = [ints.get("L1"), ints.get("L2"), ints.get("L3")];
                let mut out = Vec::with_capacity(3);
                for (name, f) in [("L4", f1), ("L5", f2), ("L6", f3)] {
                    out.push(ints.get(name).ok_or_else(|| missing(name))? - f.eval(&args).ok_or_else(|| missing("F"))?);
                }
                out
            }
        };
        if out.iter().any(|r| !r.is_finite()) {
            return Err(HodographError::OutOfDomain("non-finite residual".into()));
        }
        Ok(out)
    }

    fn r2(&self) -> f64 {
        let r = self.chart.radius().unwrap_or(1.0);
        r * r
    }

    /// `M = ∂S/∂u`, in closed form where available and by central differences otherwise.
    pub fn m_matrix(&self, t: f64, coords: &[f64], velocities: &[f64]) -> Result<DMatrix<f64>, HodographError> {
        if let SystemKind::Sphere2Stationary { f1, f2 } = &self.kind {
            self.chart.check_interior(coords)?;
            let r2 = self.r2();
            let (s, c) = coords[0].sin_cos();
            let (sp, cp) = coords[1].sin_cos();
            let xi = r2 * s * s * velocities[1];
            let d1 = f1.derivative(xi).ok_or_else(|| HodographError::OutOfDomain("F1' undefined".into()))?;
            let d2 = f2.derivative(xi).ok_or_else(|| HodographError::OutOfDomain("F2' undefined".into()))?;
            return Ok(DMatrix::from_row_slice(
                2,
                2,
                &[r2 * sp, r2 * (s * c * cp - s * s * d1), -r2 * cp, r2 * (s * c * sp - s * s * d2)],
            ));
        }
        self.m_matrix_fd(t, coords, velocities)
    }

    /// Central-difference velocity Jacobian with step `max(1e-7, 1e-7|u_j|)`.
    pub fn m_matrix_fd(&self, t: f64, coords: &[f64], velocities: &[f64]) -> Result<DMatrix<f64>, HodographError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut v = velocities.to_vec();
        for j in 0..n {
            let h = (1e-7 * velocities[j].abs()).max(1e-7);
            v[j] = velocities[j] + h;
            let plus = self.residuals(t, coords, &v)?;
            v[j] = velocities[j] - h;
            let minus = self.residuals(t, coords, &v)?;
            v[j] = velocities[j];
            for i in 0..n {
                m[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }

    pub fn det_m(&self, t: f64, coords: &[f64], velocities: &[f64]) -> Result<f64, HodographError> {
        Ok(self.m_matrix(t, coords, velocities)?.lu().determinant())
    }

    /// Reduced stationary S² form: the scalar residual in `v` and the explicit `u`.
    pub fn s2_stationary_reduced(&self, coords: &[f64], v: f64) -> Result<(f64, f64), HodographError> {
        let SystemKind::Sphere2Stationary { f1, f2 } = &self.kind else {
            return Err(HodographError::InvalidOptions("reduced form needs an s2_stationary system".into()));
        };
        self.chart.check_interior(coords)?;
        let r2 = self.r2();
        let (s, c) = coords[0].sin_cos();
        let (sp, cp) = coords[1].sin_cos();
        let xi = r2 * s * s * v;
        let missing = || HodographError::OutOfDomain("F undefined at ξ".into());
        let g1 = f1.eval(xi).ok_or_else(missing)?;
        let g2 = f2.eval(xi).ok_or_else(missing)?;
        Ok((r2 * s * c * v - cp * g1 - sp * g2, (sp * g1 - cp * g2) / r2))
    }
}
