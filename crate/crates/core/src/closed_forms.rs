//! Explicit solution families, evaluated directly as velocity fields.
//!
//! Every family is paired with the hodograph system it solves
//! ([`ClosedForm::hodograph_system`]), so each closed form can be checked
//! against its implicit definition as well as against the Euler equation.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::VelocityField;
use crate::geodesics::sphere3_momentum_matrices;
use crate::geometry::{Chart, ChartKind, GeometryError};
use crate::hodograph::{HodographError, HodographSystem, MultiProfile, Profile, SystemKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("family {family} needs a {expected:?} chart, got {got:?}")]
    WrongChart { family: &'static str, expected: ChartKind, got: ChartKind },
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParams { family: &'static str, reason: String },
    #[error("outside the family's domain: {0}")]
    OutOfFamilyDomain(String),
    #[error("{0} is not supported for family {1}")]
    Unsupported(&'static str, &'static str),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
}

/// Formula variant for families whose printed form disagrees with its derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Re-derived from the generating hodograph system.
    #[default]
    Derived,
    /// Literal transcription of the printed formula, kept for comparison.
    Printed,
}

fn plus_one() -> f64 {
    1.0
}

/// Parameters of one explicit family. The JSON tag is `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionFamily {
    /// Cone, `H = a1 + b1 I3`, `L3 = a2`.
    ConeLinear {
        a1: f64,
        b1: f64,
        a2: f64,
        #[serde(default = "plus_one")]
        sheet: f64,
        #[serde(default)]
        variant: Variant,
    },
    /// Cone, `H = a1`, `L3 = a2`: `u = ±√(a1 − a2²/(αr²))`, `v = a2/(αr²)`.
    ConeStationary {
        a1: f64,
        a2: f64,
        #[serde(default = "plus_one")]
        sheet: f64,
    },
    /// S², `I1 = F1`, `v sin²θ = F2` with constant `F1`, `F2`.
    S2Simplest {
        #[serde(rename = "F1")]
        f1: f64,
        #[serde(rename = "F2")]
        f2: f64,
        #[serde(default = "plus_one")]
        sheet: f64,
    },
    /// Stationary S² with `F1 = a1 + b1 ξ`, `F2 = a2 + b2 ξ`.
    S2StatLinear { a1: f64, a2: f64, b1: f64, b2: f64 },
    /// Stationary S² with quadratic `F`'s; `root` selects the ± branch.
    S2StatQuadratic {
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        c1: f64,
        c2: f64,
        #[serde(default = "plus_one")]
        root: f64,
    },
    /// Stationary S² with `F1 = a d ξ^(1+1/m)`, `F2 = b d ξ^(1+1/m)`.
    S2StatPower { a: f64, b: f64, d: f64, m: f64 },
    /// Stationary S² with `F1 = a ξ √(−ln ξ)`, `F2 = b ξ √(−ln ξ)`.
    S2StatLog { a: f64, b: f64 },
    /// Stationary S³ with `L_{3+i} = a_i + b_i L1 + c_i L2 + d_i L3`.
    S3StatLinear {
        a: [f64; 3],
        b: [f64; 3],
        c: [f64; 3],
        d: [f64; 3],
        #[serde(default)]
        variant: Variant,
    },
}

pub const FAMILY_IDS: [&str; 8] = [
    "cone_linear",
    "cone_stationary",
    "s2_simplest",
    "s2_stat_linear",
    "s2_stat_quadratic",
    "s2_stat_power",
    "s2_stat_log",
    "s3_stat_linear",
];

impl SolutionFamily {
    pub fn id(&self) -> &'static str {
        match self {
            SolutionFamily::ConeLinear { .. } => "cone_linear",
            SolutionFamily::ConeStationary { .. } => "cone_stationary",
            SolutionFamily::S2Simplest { .. } => "s2_simplest",
            SolutionFamily::S2StatLinear { .. } => "s2_stat_linear",
            SolutionFamily::S2StatQuadratic { .. } => "s2_stat_quadratic",
            SolutionFamily::S2StatPower { .. } => "s2_stat_power",
            SolutionFamily::S2StatLog { .. } => "s2_stat_log",
            SolutionFamily::S3StatLinear { .. } => "s3_stat_linear",
        }
    }

    pub fn chart_kind(&self) -> ChartKind {
        match self {
            SolutionFamily::ConeLinear { .. } | SolutionFamily::ConeStationary { .. } => ChartKind::Cone,
            SolutionFamily::S3StatLinear { .. } => ChartKind::Sphere3,
            _ => ChartKind::Sphere2,
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, SolutionFamily::ConeLinear { .. } | SolutionFamily::S2Simplest { .. })
    }

    /// Parses `{"family": id, ...}`; missing parameters take the defaults of [`Preset::for_id`].
    pub fn from_json_with_defaults(value: &serde_json::Value) -> Result<Self, ClosedFormError> {
        let id = value
            .get("family")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ClosedFormError::UnknownFamily("missing \"family\" key".into()))?;
        let mut merged = serde_json::to_value(Preset::for_id(id)?.field.family).expect("family serializes");
        let (Some(base), Some(extra)) = (merged.as_object_mut(), value.as_object()) else {
            return Err(ClosedFormError::UnknownFamily(value.to_string()));
        };
        for (k, v) in extra {
            base.insert(k.clone(), v.clone());
        }
        serde_json::from_value(merged)
            .map_err(|e| ClosedFormError::InvalidParams { family: leak_id(id), reason: e.to_string() })
    }

    fn validate(&self) -> Result<(), ClosedFormError> {
        let id = self.id();
        let bad = |reason: &str| Err(ClosedFormError::InvalidParams { family: id, reason: reason.into() });
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let sign_ok = |s: f64| s == 1.0 || s == -1.0;
        match *self {
            SolutionFamily::ConeLinear { a1, b1, a2, sheet, .. } => {
                if !finite(&[a1, b1, a2]) || !sign_ok(sheet) {
                    return bad("parameters must be finite and sheet ±1");
                }
            }
            SolutionFamily::ConeStationary { a1, a2, sheet } => {
                if !finite(&[a1, a2]) || !sign_ok(sheet) {
                    return bad("parameters must be finite and sheet ±1");
                }
            }
            SolutionFamily::S2Simplest { f1, f2, sheet } => {
                if !finite(&[f1, f2]) || !sign_ok(sheet) {
                    return bad("parameters must be finite and sheet ±1");
                }
            }
            SolutionFamily::S2StatLinear { a1, a2, b1, b2 } => {
                if !finite(&[a1, a2, b1, b2]) {
                    return bad("parameters must be finite");
                }
            }
            SolutionFamily::S2StatQuadratic { a1, a2, b1, b2, c1, c2, root } => {
                if !finite(&[a1, a2, b1, b2, c1, c2]) || !sign_ok(root) {
                    return bad("parameters must be finite and root ±1");
                }
            }
            SolutionFamily::S2StatPower { a, b, d, m } => {
                if !finite(&[a, b, d, m]) || m == 0.0 || d == 0.0 || a * a + b * b == 0.0 {
                    return bad("need m ≠ 0, d ≠ 0 and a² + b² > 0");
                }
            }
            SolutionFamily::S2StatLog { a, b } => {
                if !finite(&[a, b]) || a * a + b * b == 0.0 {
                    return bad("need a² + b² > 0");
                }
            }
            SolutionFamily::S3StatLinear { a, b, c, d, .. } => {
                if ![a, b, c, d].iter().all(|v| finite(v)) {
                    return bad("parameters must be finite");
                }
            }
        }
        Ok(())
    }
}

fn leak_id(id: &str) -> &'static str {
    FAMILY_IDS.iter().find(|k| **k == id).copied().unwrap_or("unknown")
}

/// A family bound to its chart; implements [`VelocityField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub chart: Chart,
    #[serde(flatten)]
    pub family: SolutionFamily,
}

/// Outcome of a pointwise evaluation; invalid points carry the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub velocities: Option<Vec<f64>>,
    pub reason: Option<String>,
}

impl FieldValue {
    pub fn valid(&self) -> bool {
        self.velocities.is_some()
    }
}

/// Location for asymptotic exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    NorthPole,
    Equator,
}

/// Leading power laws `|u| ~ δ^u`, `|v| ~ δ^v` in the distance `δ` to a location.
/// `f64::INFINITY` marks decay faster than any power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub u: f64,
    pub v: f64,
}

/// The potential of the effective one-dimensional force, `p` and `dp/dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `p(θ) = −½ F2² / sin²θ`.
    Polar { f2: f64 },
    /// `p(r) = −a2² / (2 α r²)`.
    Radial { a2: f64, alpha: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Polar { f2 } => -0.5 * f2 * f2 / x.sin().powi(2),
            Potential::Radial { a2, alpha } => -a2 * a2 / (2.0 * alpha * x * x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Potential::Polar { f2 } => f2 * f2 * x.cos() / x.sin().powi(3),
            Potential::Radial { a2, alpha } => a2 * a2 / (alpha * x.powi(3)),
        }
    }
}

impl ClosedForm {
    pub fn new(chart: Chart, family: SolutionFamily) -> Result<Self, ClosedFormError> {
        chart.validate()?;
        if chart.kind() != family.chart_kind() {
            return Err(ClosedFormError::WrongChart {
                family: family.id(),
                expected: family.chart_kind(),
                got: chart.kind(),
            });
        }
        family.validate()?;
        Ok(Self { chart, family })
    }

    fn r2(&self) -> f64 {
        self.chart.radius().map_or(1.0, |r| r * r)
    }

    fn alpha(&self) -> f64 {
        match self.chart {
            Chart::Cone { alpha } => alpha,
            _ => 1.0,
        }
    }

    /// Velocities at `(t, coords)`, or the reason the point is outside the family's domain.
    pub fn evaluate(&self, t: f64, coords: &[f64]) -> Result<Vec<f64>, ClosedFormError> {
        self.chart.check_interior(coords)?;
        let out = |why: &str| Err(ClosedFormError::OutOfFamilyDomain(why.into()));
        let vel = match self.family {
            SolutionFamily::ConeLinear { a1, b1, a2, sheet, variant } => {
                let alpha = self.alpha();
                let r = coords[0];
                let v = a2 / (alpha * r * r);
                let k = a2 * a2 / (alpha * r * r);
                let den = 1.0 - b1 * t * t;
                let p = b1 * r * t;
                let disc = match variant {
                    Variant::Derived => b1 * r * r + a1 * den - k * den * den,
                    Variant::Printed => p * p + a1 * den - k * den * den,
                };
                if disc < 0.0 {
                    return out("negative radicand");
                }
                let sq = disc.sqrt();
                let u = match variant {
                    Variant::Printed => (-p + sheet * sq) / den,
                    Variant::Derived => {
                        // roots of den·u² + 2p·u + (k·den − a1 − b1 r²) = 0
                        let c0 = k * den - a1 - b1 * r * r;
                        let sgn = if p >= 0.0 { 1.0 } else { -1.0 };
                        let q = -(p + sgn * sq);
                        let (minus, plus) = if p >= 0.0 { (q / den, c0 / q) } else { (c0 / q, q / den) };
                        if sheet > 0.0 {
                            plus
                        } else {
                            minus
                        }
                    }
                };
                vec![u, v]
            }
            SolutionFamily::ConeStationary { a1, a2, sheet } => {
                let alpha = self.alpha();
                let r = coords[0];
                let rad = a1 - a2 * a2 / (alpha * r * r);
                if rad < 0.0 {
                    return out("a1 < a2²/(αr²)");
                }
                vec![sheet * rad.sqrt(), a2 / (alpha * r * r)]
            }
            SolutionFamily::S2Simplest { f1, f2, sheet } => {
                let (s, c) = coords[0].sin_cos();
                let w_min = f2.abs() / s;
                let w = simplest_speed(t - f1, sheet, s, c, w_min)
                    .ok_or_else(|| ClosedFormError::OutOfFamilyDomain("no root for the speed w".into()))?;
                vec![sheet * (w * w - w_min * w_min).max(0.0).sqrt(), f2 / (s * s)]
            }
            SolutionFamily::S2StatLinear { a1, a2, b1, b2 } => {
                let (s, c) = coords[0].sin_cos();
                let (sp, cp) = coords[1].sin_cos();
                let a = a1 * cp + a2 * sp;
                let den = c - s * (b1 * cp + b2 * sp);
                if den == 0.0 {
                    return out("on the blow-up locus cosθ = sinθ (b1 cosφ + b2 sinφ)");
                }
                let xi = s * a / den;
                let r2 = self.r2();
                vec![((a1 * sp - a2 * cp) + xi * (b1 * sp - b2 * cp)) / r2, a / (s * den) / r2]
            }
            SolutionFamily::S2StatQuadratic { a1, a2, b1, b2, c1, c2, root } => {
                let (s, c) = coords[0].sin_cos();
                let (sp, cp) = coords[1].sin_cos();
                let a = a1 * cp + a2 * sp;
                let b = b1 * cp + b2 * sp;
                let cc = c1 * cp + c2 * sp;
                let k = c - s * b;
                let disc = k * k - 4.0 * s * s * a * cc;
                if disc < 0.0 {
                    return out("negative discriminant");
                }
                // s·C ξ² − K ξ + s·A = 0, roots chosen without cancellation
                let sq = disc.sqrt();
                let big = if k >= 0.0 { k + sq } else { k - sq };
                let (xp, xm) = if k >= 0.0 {
                    (big / (2.0 * s * cc), 2.0 * s * a / big)
                } else {
                    (2.0 * s * a / big, big / (2.0 * s * cc))
                };
                let xi = if root > 0.0 { xp } else { xm };
                if !xi.is_finite() {
                    return out("selected root is at infinity");
                }
                let f1 = a1 + xi * (b1 + c1 * xi);
                let f2 = a2 + xi * (b2 + c2 * xi);
                let r2 = self.r2();
                vec![(sp * f1 - cp * f2) / r2, xi / (s * s) / r2]
            }
            SolutionFamily::S2StatPower { a, b, d, m } => {
                let (cot, s, ang) = power_log_frame(coords, a, b);
                let base = cot / (d * a.hypot(b) * ang.sin());
                if !(base > 0.0) || !base.is_finite() {
                    return out("cotθ / (d ρ sin(φ + α̂)) must be positive");
                }
                let xi = base.powf(m);
                let r2 = self.r2();
                vec![-xi * cot * ang.cos() / ang.sin() / r2, xi / (s * s) / r2]
            }
            SolutionFamily::S2StatLog { a, b } => {
                let (cot, s, ang) = power_log_frame(coords, a, b);
                let y = cot / (a.hypot(b) * ang.sin());
                if !(y > 0.0) || !y.is_finite() {
                    return out("cotθ / (ρ sin(φ + α̂)) must be positive");
                }
                let xi = (-y * y).exp();
                let r2 = self.r2();
                vec![-xi * cot * ang.cos() / ang.sin() / r2, xi / (s * s) / r2]
            }
            SolutionFamily::S3StatLinear { a, b, c, d, variant } => {
                let (p, q) = sphere3_momentum_matrices(coords);
                let mut cm = Matrix3::zeros();
                for i in 0..3 {
                    for k in 0..3 {
                        cm[(i, k)] = match variant {
                            Variant::Derived => q[(i, k)] - b[i] * p[(0, k)] - c[i] * p[(1, k)] - d[i] * p[(2, k)],
                            Variant::Printed => q[(i, k)] - b[i] * p[(0, k)] - c[i] * q[(1, k)] - d[i] * q[(2, k)],
                        };
                    }
                }
                let rhs = Vector3::from(a) / self.r2();
                let u =
                    cm.lu().solve(&rhs).ok_or_else(|| ClosedFormError::OutOfFamilyDomain("C is singular".into()))?;
                u.iter().copied().collect()
            }
        };
        if vel.iter().any(|x| !x.is_finite()) {
            return out("non-finite velocity");
        }
        Ok(vel)
    }

    /// Pointwise evaluation with an explicit validity flag.
    pub fn eval_field(&self, t: f64, coords: &[f64]) -> FieldValue {
        match self.evaluate(t, coords) {
            Ok(v) => FieldValue { velocities: Some(v), reason: None },
            Err(e) => FieldValue { velocities: None, reason: Some(e.to_string()) },
        }
    }

    /// The hodograph system this family solves.
    pub fn hodograph_system(&self) -> Result<HodographSystem, HodographError> {
        let konst = |value: f64| MultiProfile::Constant { value };
        let kind = match self.family {
            SolutionFamily::ConeLinear { a1, b1, a2, .. } => {
                SystemKind::ConeAlt { f1: MultiProfile::Affine { a: a1, coeffs: vec![b1, 0.0] }, f2: konst(a2) }
            }
            SolutionFamily::ConeStationary { a1, a2, .. } => SystemKind::ConeAlt { f1: konst(a1), f2: konst(a2) },
            SolutionFamily::S2Simplest { f1, f2, .. } => SystemKind::Sphere2 { f1: konst(f1), f2: konst(f2) },
            SolutionFamily::S2StatLinear { a1, a2, b1, b2 } => SystemKind::Sphere2Stationary {
                f1: Profile::Linear { a: a1, b: b1 },
                f2: Profile::Linear { a: a2, b: b2 },
            },
            SolutionFamily::S2StatQuadratic { a1, a2, b1, b2, c1, c2, .. } => SystemKind::Sphere2Stationary {
                f1: Profile::Quadratic { a: a1, b: b1, c: c1 },
                f2: Profile::Quadratic { a: a2, b: b2, c: c2 },
            },
            SolutionFamily::S2StatPower { a, b, d, m } => SystemKind::Sphere2Stationary {
                f1: Profile::Power { coef: a * d, exponent: 1.0 + 1.0 / m },
                f2: Profile::Power { coef: b * d, exponent: 1.0 + 1.0 / m },
            },
            SolutionFamily::S2StatLog { a, b } => {
                SystemKind::Sphere2Stationary { f1: Profile::Log { coef: a }, f2: Profile::Log { coef: b } }
            }
            SolutionFamily::S3StatLinear { a, b, c, d, .. } => {
                let row = |i: usize| MultiProfile::Affine { a: a[i], coeffs: vec![b[i], c[i], d[i]] };
                SystemKind::Sphere3Stationary { f1: row(0), f2: row(1), f3: row(2) }
            }
        };
        let sheet = match self.family {
            SolutionFamily::ConeLinear { sheet, .. }
            | SolutionFamily::ConeStationary { sheet, .. }
            | SolutionFamily::S2Simplest { sheet, .. } => sheet,
            _ => 1.0,
        };
        Ok(HodographSystem::new(self.chart, kind)?.with_sheet(sheet))
    }

    /// Predicted leading power laws at the pole or the equator.
    pub fn asymptotic_exponents(&self, location: Location) -> Result<Exponents, ClosedFormError> {
        match (self.family.clone(), location) {
            (SolutionFamily::S2StatPower { m, .. }, Location::NorthPole) => Ok(Exponents { u: -1.0 - m, v: -2.0 - m }),
            (SolutionFamily::S2StatPower { m, .. }, Location::Equator) => Ok(Exponents { u: m + 1.0, v: m }),
            (SolutionFamily::S2StatLinear { .. }, Location::NorthPole) => Ok(Exponents { u: 0.0, v: -1.0 }),
            (SolutionFamily::S2StatLinear { b1, b2, .. }, Location::Equator) => {
                let v = if b1 == 0.0 && b2 == 0.0 { -1.0 } else { 0.0 };
                Ok(Exponents { u: 0.0, v })
            }
            (SolutionFamily::S2StatLog { .. }, Location::NorthPole) => {
                Ok(Exponents { u: f64::INFINITY, v: f64::INFINITY })
            }
            (SolutionFamily::S2StatLog { .. }, Location::Equator) => Ok(Exponents { u: 1.0, v: 0.0 }),
            (f, _) => Err(ClosedFormError::Unsupported("asymptotic_exponents", f.id())),
        }
    }

    /// Potential of the force in the reduced one-dimensional Euler equation.
    pub fn reduced_1d_potential(&self) -> Result<Potential, ClosedFormError> {
        match self.family {
            SolutionFamily::S2Simplest { f2, .. } => Ok(Potential::Polar { f2 }),
            SolutionFamily::ConeLinear { a2, .. } | SolutionFamily::ConeStationary { a2, .. } => {
                Ok(Potential::Radial { a2, alpha: self.alpha() })
            }
            ref f => Err(ClosedFormError::Unsupported("reduced_1d_potential", f.id())),
        }
    }

    /// Time in `[t0, t1]` at which `max_k |∂u_k/∂x_0|` at `coords` peaks.
    ///
    /// The largest finite value among `samples` scan points is refined by
    /// golden-section search, in which invalid or non-finite values count as
    /// maximal. Returns `None` when the peak sits on an interval end.
    pub fn derivative_blowup_time(&self, coords: &[f64], t0: f64, t1: f64, samples: usize) -> Option<f64> {
        let h = 1e-6 * coords[0].abs().max(1.0);
        let g = |t: f64| -> f64 {
            let mut lo = coords.to_vec();
            let mut hi = coords.to_vec();
            lo[0] -= h;
            hi[0] += h;
            match (self.evaluate(t, &lo), self.evaluate(t, &hi)) {
                (Ok(a), Ok(b)) => {
                    let d = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max(((y - x) / (2.0 * h)).abs()));
                    if d.is_finite() {
                        d
                    } else {
                        f64::INFINITY
                    }
                }
                _ => f64::INFINITY,
            }
        };
        let n = samples.max(3);
        let ts: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
        let k = (0..n).filter(|&i| vals[i].is_finite()).max_by(|&i, &j| vals[i].total_cmp(&vals[j]))?;
        if k == 0 || k == n - 1 {
            return None;
        }
        let (mut a, mut b) = (ts[k - 1], ts[k + 1]);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut g1, mut g2) = (g(x1), g(x2));
        for _ in 0..200 {
            if b - a <= 1e-14 * (1.0 + a.abs()) {
                break;
            }
            if g1 >= g2 {
                b = x2;
                x2 = x1;
                g2 = g1;
                x1 = b - ratio * (b - a);
                g1 = g(x1);
            } else {
                a = x1;
                x1 = x2;
                g1 = g2;
                x2 = a + ratio * (b - a);
                g2 = g(x2);
            }
        }
        Some(0.5 * (a + b))
    }
}

impl VelocityField for ClosedForm {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn velocity(&self, t: f64, coords: &[f64]) -> Option<Vec<f64>> {
        self.evaluate(t, coords).ok()
    }

    fn is_stationary(&self) -> bool {
        self.family.is_stationary()
    }

    fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| self.family.id().to_string())
    }
}

/// `(cotθ, sinθ, φ + α̂)` with `sin α̂ = a/ρ`, `cos α̂ = b/ρ`.
fn power_log_frame(coords: &[f64], a: f64, b: f64) -> (f64, f64, f64) {
    let (s, c) = coords[0].sin_cos();
    (c / s, s, coords[1] + a.atan2(b))
}

/// Speed `w ≥ w_min` solving `τ w + σ ψ(w) = 0`, `ψ = atan2(cosθ w, sinθ √(w² − w_min²))`.
///
/// Brackets the first sign change scanning outward from `w_min` and bisects
/// it to adjacent floats.
fn simplest_speed(tau: f64, sigma: f64, s: f64, c: f64, w_min: f64) -> Option<f64> {
    let g = |w: f64| tau * w + sigma * (c * w).atan2(s * (w * w - w_min * w_min).max(0.0).sqrt());
    let scale = 1e-12 * w_min.max(1.0);
    let mut lo = if w_min > 0.0 { w_min } else { scale };
    let mut g_lo = g(lo);
    if g_lo == 0.0 {
        return Some(lo);
    }
    let mut hi = None;
    for k in 1..140 {
        let w = w_min + scale * 2f64.powi(k);
        let gw = g(w);
        if gw == 0.0 {
            return Some(w);
        }
        if gw.signum() != g_lo.signum() {
            hi = Some(w);
            break;
        }
        lo = w;
        g_lo = gw;
    }
    let mut hi = hi?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == g_lo.signum() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A family with a chart, a default evaluation box and a default time.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub field: ClosedForm,
    /// `(min, max)` per coordinate, inside the validity set and away from blow-up loci.
    pub domain: Vec<(f64, f64)>,
    pub t: f64,
}

impl Preset {
    pub fn for_id(id: &str) -> Result<Self, ClosedFormError> {
        let s2 = Chart::Sphere2 { radius: 1.0 };
        let cone = Chart::Cone { alpha: 0.25 };
        let tau = 2.0 * std::f64::consts::PI;
        let (chart, family, domain, t) = match id {
            "cone_linear" => (
                cone,
                SolutionFamily::ConeLinear { a1: 2.0, b1: 0.5, a2: 0.3, sheet: 1.0, variant: Variant::Derived },
                vec![(0.5, 2.0), (0.0, tau)],
                0.5,
            ),
            "cone_stationary" => (
                cone,
                SolutionFamily::ConeStationary { a1: 5.0, a2: 1.0, sheet: 1.0 },
                vec![(1.0, 3.0), (0.0, tau)],
                0.0,
            ),
            "s2_simplest" => {
                (s2, SolutionFamily::S2Simplest { f1: 2.0, f2: 0.3, sheet: 1.0 }, vec![(0.4, 1.4), (0.0, tau)], 0.3)
            }
            "s2_stat_linear" => (
                s2,
                SolutionFamily::S2StatLinear { a1: 1.0, a2: 0.5, b1: 0.3, b2: 0.2 },
                vec![(0.3, 1.0), (0.0, tau)],
                0.0,
            ),
            "s2_stat_quadratic" => (
                s2,
                SolutionFamily::S2StatQuadratic { a1: 0.2, a2: 0.1, b1: 0.2, b2: -0.1, c1: 0.05, c2: 0.03, root: -1.0 },
                vec![(0.3, 1.0), (0.3, 1.2)],
                0.0,
            ),
            "s2_stat_power" => {
                (s2, SolutionFamily::S2StatPower { a: 0.6, b: 0.8, d: 1.0, m: 2.0 }, vec![(0.7, 1.3), (0.5, 1.5)], 0.0)
            }
            "s2_stat_log" => (s2, SolutionFamily::S2StatLog { a: 0.6, b: 0.8 }, vec![(0.7, 1.3), (0.5, 1.5)], 0.0),
            "s3_stat_linear" => (
                Chart::Sphere3 { radius: 1.0 },
                SolutionFamily::S3StatLinear {
                    a: [0.5, 0.3, 0.2],
                    b: [0.1, 0.0, 0.2],
                    c: [0.0, 0.1, 0.0],
                    d: [0.2, 0.0, 0.1],
                    variant: Variant::Derived,
                },
                vec![(0.9, 2.2), (0.9, 2.2), (0.9, 2.2)],
                0.0,
            ),
            other => return Err(ClosedFormError::UnknownFamily(other.to_string())),
        };
        Ok(Self { field: ClosedForm::new(chart, family)?, domain, t })
    }
}

/// Least-squares slope of `ln|y|` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.abs().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits `|u| ~ δ^p`, `|v| ~ δ^q` for `δ` log-spaced in `[δ0, δ1]` at azimuth `phi`.
///
/// `δ` is `θ` at the north pole and `π/2 − θ` at the equator.
pub fn measure_exponents(
    field: &ClosedForm,
    location: Location,
    phi: f64,
    delta_range: (f64, f64),
    samples: usize,
) -> Result<Exponents, ClosedFormError> {
    let (d0, d1) = delta_range;
    let mut ds = Vec::with_capacity(samples);
    let mut us = Vec::with_capacity(samples);
    let mut vs = Vec::with_capacity(samples);
    for i in 0..samples {
        let d = d0 * (d1 / d0).powf(i as f64 / (samples - 1) as f64);
        let theta = match location {
            Location::NorthPole => d,
            Location::Equator => FRAC_PI_2 - d,
        };
        let vel = field.evaluate(0.0, &[theta, phi])?;
        ds.push(d);
        us.push(vel[0]);
        vs.push(vel[1]);
    }
    Ok(Exponents { u: log_log_slope(&ds, &us), v: log_log_slope(&ds, &vs) })
}
