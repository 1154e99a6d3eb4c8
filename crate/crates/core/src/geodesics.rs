//! Characteristic flow of the Euler equation: geodesics of the chart, their
//! first integrals, and drift monitoring along computed trajectories.
//!
//! Characteristics are integrated in the phase space `(t, x, u)` with
//! `dx/dt = u` and `du^i/dt = −Γ^i_{jk} u^j u^k`, where `Γ` always comes from
//! [`Chart::christoffel_at`].

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Chart, GeometryError};
use crate::ode::{dopri5, OdeError, OdeOptions, OdeRun, OdeSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("trajectory left the chart at t = {}", .state.t)]
    BoundaryHit { state: PhaseState, partial: Box<Trajectory> },
    #[error("step size underflow ({step:e}) at t = {t}")]
    StepUnderflow { t: f64, step: f64, partial: Box<Trajectory> },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64, partial: Box<Trajectory> },
    #[error("integral {0} is undefined at this state")]
    UndefinedIntegral(&'static str),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// A point `(t, x, u)` of the characteristic flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseState {
    pub t: f64,
    pub coords: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl PhaseState {
    pub fn new(t: f64, coords: impl Into<Vec<f64>>, velocities: impl Into<Vec<f64>>) -> Self {
        Self { t, coords: coords.into(), velocities: velocities.into() }
    }

    fn from_flat(t: f64, y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self { t, coords: y[..n].to_vec(), velocities: y[n..].to_vec() }
    }

    fn flat(&self) -> Vec<f64> {
        let mut y = self.coords.clone();
        y.extend_from_slice(&self.velocities);
        y
    }
}

/// Time derivative of a phase state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRate {
    pub dcoords: Vec<f64>,
    pub dvelocities: Vec<f64>,
}

pub fn geodesic_rhs(chart: &Chart, state: &PhaseState) -> Result<PhaseRate, GeometryError> {
    if state.velocities.len() != chart.dim() {
        return Err(GeometryError::DimensionMismatch { expected: chart.dim(), got: state.velocities.len() });
    }
    let gamma = chart.christoffel_at(&state.coords)?;
    let acc = gamma.contract(&state.velocities);
    Ok(PhaseRate { dcoords: state.velocities.clone(), dvelocities: acc[..chart.dim()].iter().map(|a| -a).collect() })
}

fn flat_rhs(chart: &Chart, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let n = chart.dim();
    chart.check_interior(&y[..n])?;
    let gamma = chart.christoffel_unchecked(&y[..n]);
    let acc = gamma.contract(&y[n..]);
    let mut out = y[n..].to_vec();
    out.extend(acc[..n].iter().map(|a| -a));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Samples of one characteristic, one per accepted integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chart: Chart,
    pub samples: Vec<PhaseState>,
    pub step_stats: StepStats,
    pub drift: Vec<IntegralDrift>,
    rates: Vec<Vec<f64>>,
}

impl Trajectory {
    fn from_run(chart: Chart, run: OdeRun) -> Self {
        let mut samples = Vec::with_capacity(run.samples.len());
        let mut rates = Vec::with_capacity(run.samples.len());
        for s in run.samples {
            samples.push(PhaseState::from_flat(s.t, &s.y));
            rates.push(s.dy);
        }
        let drift = measure_drift(&chart, &samples);
        Self { chart, samples, step_stats: StepStats { accepted: run.accepted, rejected: run.rejected }, drift, rates }
    }

    pub fn last(&self) -> &PhaseState {
        self.samples.last().expect("trajectories are never empty")
    }

    /// Dense output by cubic Hermite interpolation between accepted steps.
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        let run = OdeRun {
            samples: self
                .samples
                .iter()
                .zip(&self.rates)
                .map(|(s, dy)| OdeSample { t: s.t, y: s.flat(), dy: dy.clone() })
                .collect(),
            accepted: 0,
            rejected: 0,
        };
        run.interpolate(t).map(|y| PhaseState::from_flat(t, &y))
    }

    pub fn drift_of(&self, name: &str) -> Option<&IntegralDrift> {
        self.drift.iter().find(|d| d.name == name)
    }
}

/// Adaptive Dormand–Prince 5(4) integration of the geodesic through `initial`.
///
/// `tol` is used as both the absolute and relative local error bound. If the
/// path leaves the open chart the result is [`GeodesicError::BoundaryHit`]
/// carrying the trajectory up to the last interior step.
pub fn integrate_geodesic(
    chart: &Chart,
    initial: &PhaseState,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, GeodesicError> {
    if !(tol > 0.0) {
        return Err(GeodesicError::InvalidTolerance(tol));
    }
    geodesic_rhs(chart, initial)?;
    let y0 = initial.flat();
    let res = dopri5(|_t, y: &[f64]| flat_rhs(chart, y), initial.t, &y0, t_end, &OdeOptions::with_tol(tol));
    match res {
        Ok(run) => Ok(Trajectory::from_run(*chart, run)),
        Err(OdeError::InitialRhs(e)) => Err(e.into()),
        Err(OdeError::Rhs { run, .. }) => {
            let traj = Trajectory::from_run(*chart, run);
            Err(GeodesicError::BoundaryHit { state: traj.last().clone(), partial: Box::new(traj) })
        }
        Err(OdeError::StepUnderflow { run, step }) => {
            let traj = Trajectory::from_run(*chart, run);
            Err(GeodesicError::StepUnderflow { t: traj.last().t, step, partial: Box::new(traj) })
        }
        Err(OdeError::MaxSteps { run }) => {
            let traj = Trajectory::from_run(*chart, run);
            Err(GeodesicError::MaxSteps { t: traj.last().t, partial: Box::new(traj) })
        }
    }
}

/// Named first integrals at one state, in a fixed per-chart order.
/// `None` marks an integral whose formula is undefined at the state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralSet {
    pub entries: Vec<(&'static str, Option<f64>)>,
}

impl IntegralSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| *n == name).and_then(|(_, v)| *v)
    }

    pub fn value(&self, name: &'static str) -> Result<f64, GeodesicError> {
        self.get(name).ok_or(GeodesicError::UndefinedIntegral(name))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn undefined(&self) -> Vec<&'static str> {
        self.entries.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect()
    }
}

/// Integral names per chart, in output order.
pub fn integral_names(chart: &Chart) -> &'static [&'static str] {
    match chart {
        Chart::Cylinder { .. } => &["u", "v", "z-ut", "phi-vt"],
        Chart::Cone { .. } => &["H", "L3", "I3", "I4"],
        Chart::Sphere2 { .. } => &["H", "L1", "L2", "L3", "I1", "I2"],
        Chart::Sphere3 { .. } => &["H", "L1", "L2", "L3", "L4", "L5", "L6"],
    }
}

/// How an integral behaves along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralTraits {
    /// Depends explicitly on `t` and on the sheet sign σ; compared within
    /// segments of constant sign of the first velocity component.
    pub segmented: bool,
    /// Jump between arctan branches, removed by unwrapping.
    pub branch_period: Option<f64>,
}

pub fn integral_traits(chart: &Chart, name: &str) -> IntegralTraits {
    let plain = IntegralTraits { segmented: false, branch_period: None };
    match (chart, name) {
        (Chart::Cone { .. }, "I3") => IntegralTraits { segmented: true, branch_period: None },
        (Chart::Cone { alpha }, "I4") => {
            IntegralTraits { segmented: true, branch_period: Some(std::f64::consts::PI / alpha.sqrt()) }
        }
        (Chart::Sphere2 { .. }, "I1") => IntegralTraits { segmented: true, branch_period: None },
        (Chart::Sphere2 { .. }, "I2") => IntegralTraits { segmented: true, branch_period: Some(std::f64::consts::PI) },
        _ => plain,
    }
}

/// σ = sign of the first velocity component, with `+1` at zero.
pub fn sheet_of(state: &PhaseState) -> f64 {
    if state.velocities[0] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Evaluates every first integral of the chart, with σ taken from the state.
pub fn integrals_at(chart: &Chart, state: &PhaseState) -> Result<IntegralSet, GeometryError> {
    integrals_with_sheet(chart, state, sheet_of(state))
}

/// Evaluates the integrals with an explicit sheet sign `sigma` (±1).
///
/// With `sigma` held fixed the S² integral `I1` stays smooth through the
/// turning points `u = 0`, shifting by `σπ/W` relative to the re-anchored
/// value once `u` has changed sign.
pub fn integrals_with_sheet(chart: &Chart, state: &PhaseState, sigma: f64) -> Result<IntegralSet, GeometryError> {
    chart.check_interior(&state.coords)?;
    if state.velocities.len() != chart.dim() {
        return Err(GeometryError::DimensionMismatch { expected: chart.dim(), got: state.velocities.len() });
    }
    let t = state.t;
    let x = &state.coords;
    let u = &state.velocities;
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let entries = match *chart {
        Chart::Cylinder { .. } => vec![
            ("u", Some(u[0])),
            ("v", Some(u[1])),
            ("z-ut", Some(x[0] - u[0] * t)),
            ("phi-vt", Some(x[1] - u[1] * t)),
        ],
        Chart::Cone { alpha } => {
            let (r, phi) = (x[0], x[1]);
            let (ur, vp) = (u[0], u[1]);
            let h = ur * ur + alpha * r * r * vp * vp;
            let l3 = alpha * r * r * vp;
            let i3 = r * r + h * t * t - 2.0 * r * ur * t;
            let i4 = if vp == 0.0 {
                None
            } else {
                let sa = alpha.sqrt();
                finite(phi + (((ur * r - h * t) / (sa * r * r * vp)).atan() - (ur / (sa * r * vp)).atan()) / sa)
            };
            vec![("H", Some(h)), ("L3", Some(l3)), ("I3", Some(i3)), ("I4", i4)]
        }
        Chart::Sphere2 { radius } => {
            let r2 = radius * radius;
            let (s, c) = x[0].sin_cos();
            let (sp, cp) = x[1].sin_cos();
            let (ut, vp) = (u[0], u[1]);
            let w2 = ut * ut + s * s * vp * vp;
            let w = w2.sqrt();
            let l1 = -r2 * (s * c * cp * vp + sp * ut);
            let l2 = -r2 * (s * c * sp * vp - cp * ut);
            let l3 = r2 * s * s * vp;
            let (i1, i2) = if w == 0.0 {
                (None, None)
            } else {
                // arcsin(√(W²/(u²+s²c²v²))·cosθ) as an atan2; with σ = sign(u) the
                // two agree, and for fixed σ this continues smoothly through u = 0
                let psi = (c * w).atan2(sigma * s * ut);
                let i1 = t + sigma * psi / w;
                let i2 = if ut == 0.0 {
                    None
                } else {
                    finite(
                        x[1] + (vp * s * c / ut).atan() - (sigma * vp * s * s / w * (w * t + sigma * psi).tan()).atan(),
                    )
                };
                (finite(i1), i2)
            };
            vec![("H", Some(r2 * w2)), ("L1", Some(l1)), ("L2", Some(l2)), ("L3", Some(l3)), ("I1", i1), ("I2", i2)]
        }
        Chart::Sphere3 { radius } => {
            let g = chart.metric_at(x)?;
            let h = g.inner(u, u);
            let l = sphere3_momenta(radius, x, u);
            vec![
                ("H", Some(h)),
                ("L1", Some(l[0])),
                ("L2", Some(l[1])),
                ("L3", Some(l[2])),
                ("L4", Some(l[3])),
                ("L5", Some(l[4])),
                ("L6", Some(l[5])),
            ]
        }
    };
    Ok(IntegralSet { entries })
}

/// The matrices `P`, `Q` with `(L₁,L₂,L₃) = R² P u` and `(L₄,L₅,L₆) = R² Q u` on the 3-sphere.
pub fn sphere3_momentum_matrices(coords: &[f64]) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s1, c1) = coords[0].sin_cos();
    let (s2, c2) = coords[1].sin_cos();
    let (s3, c3) = coords[2].sin_cos();
    let p = Matrix3::new(
        -s2 * c3,
        -c1 * s1 * c2 * c3,
        s1 * c1 * s2 * s3,
        c2,
        -s1 * c1 * s2,
        0.0,
        0.0,
        s1 * s1 * c3,
        -s1 * s1 * s2 * c2 * s3,
    );
    let q = Matrix3::new(
        s2 * s3,
        s1 * c1 * c2 * s3,
        s1 * c1 * s2 * c3,
        0.0,
        s1 * s1 * s3,
        s1 * s1 * s2 * c2 * c3,
        0.0,
        0.0,
        s1 * s1 * s2 * s2,
    );
    (p, q)
}

/// The six SO(4) momenta `L₁…L₆` on the 3-sphere of radius `radius`.
pub fn sphere3_momenta(radius: f64, coords: &[f64], velocities: &[f64]) -> [f64; 6] {
    let (p, q) = sphere3_momentum_matrices(coords);
    let u = Vector3::new(velocities[0], velocities[1], velocities[2]);
    let r2 = radius * radius;
    let a = p * u * r2;
    let b = q * u * r2;
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

/// Residuals of the pointwise identities among the integrals. Every entry
/// vanishes identically; empty for the cylinder and cone.
pub fn relation_checks(chart: &Chart, state: &PhaseState) -> Result<Vec<(&'static str, f64)>, GeometryError> {
    let ints = integrals_at(chart, state)?;
    let x = &state.coords;
    let get = |n: &str| ints.get(n).unwrap_or(f64::NAN);
    Ok(match *chart {
        Chart::Sphere2 { radius } => {
            let (l1, l2, l3) = (get("L1"), get("L2"), get("L3"));
            let (s, c) = x[0].sin_cos();
            let (sp, cp) = x[1].sin_cos();
            vec![
                ("great_circle", cp * l1 + sp * l2 + c / s * l3),
                ("energy", radius * radius * get("H") - (l1 * l1 + l2 * l2 + l3 * l3)),
            ]
        }
        Chart::Sphere3 { radius } => {
            let l: Vec<f64> = ["L1", "L2", "L3", "L4", "L5", "L6"].iter().map(|n| get(n)).collect();
            let (s1, c1) = x[0].sin_cos();
            let (s2, c2) = x[1].sin_cos();
            let (s3, c3) = x[2].sin_cos();
            let (p, q) = sphere3_momentum_matrices(x);
            let mut out = vec![
                ("rank_two", c2 * l[0] + s2 * c3 * l[1] + c1 / s1 * l[2]),
                ("det_P", p.determinant()),
                ("det_Q", q.determinant() - s1.powi(4) * s2.powi(3) * s3 * s3),
            ];
            let upper = Vector3::new(l[3], l[4], l[5]);
            if let Some(y) = q.lu().solve(&upper) {
                let pred = p * y;
                out.push(("PQinv_1", l[0] - pred[0]));
                out.push(("PQinv_2", l[1] - pred[1]));
                out.push(("PQinv_3", l[2] - pred[2]));
            }
            let sum_sq: f64 = l.iter().map(|v| v * v).sum();
            out.push(("energy", radius * radius * get("H") - sum_sq));
            out
        }
        _ => Vec::new(),
    })
}

/// Residual of the implicit great-circle equation `cot θ + a sin(φ + α̂) = 0`
/// whose constants come from fixed momenta `(L₁, L₂, L₃)`.
pub fn great_circle_residual(momenta: [f64; 3], theta: f64, phi: f64) -> f64 {
    let [l1, l2, l3] = momenta;
    let rho = l1.hypot(l2);
    let a = rho / l3;
    let shift = l1.atan2(l2);
    1.0 / theta.tan() + a * (phi + shift).sin()
}

/// Worst deviation of one integral from its reference value along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralDrift {
    pub name: &'static str,
    pub max_drift: f64,
    /// Number of σ-segments the comparison was split into (1 when unsegmented).
    pub segments: usize,
    pub samples_used: usize,
}

/// Per-integral drift along the samples.
///
/// Time-independent integrals are compared with their value at the first
/// sample. Sheet-dependent ones are compared within maximal runs of constant
/// sign of the first velocity component, after removing arctan branch jumps.
pub fn measure_drift(chart: &Chart, samples: &[PhaseState]) -> Vec<IntegralDrift> {
    let names = integral_names(chart);
    let values: Vec<Option<IntegralSet>> = samples.iter().map(|s| integrals_at(chart, s).ok()).collect();
    names
        .iter()
        .map(|&name| {
            let traits = integral_traits(chart, name);
            let series: Vec<Option<f64>> = values.iter().map(|v| v.as_ref().and_then(|set| set.get(name))).collect();
            let segment_ids: Vec<Option<usize>> =
                if traits.segmented { sign_segments(samples) } else { vec![Some(0); samples.len()] };
            let mut max_drift = 0.0f64;
            let mut used = 0usize;
            let mut segments = 0usize;
            let mut current: Option<usize> = None;
            let mut reference = 0.0;
            let mut previous = 0.0;
            for (value, seg) in series.iter().zip(&segment_ids) {
                let (Some(mut v), Some(seg)) = (*value, *seg) else {
                    continue;
                };
                if current != Some(seg) {
                    current = Some(seg);
                    segments += 1;
                    reference = v;
                    previous = v;
                    used += 1;
                    continue;
                }
                if let Some(period) = traits.branch_period {
                    v = unwrap_near(v, previous, period);
                }
                previous = v;
                max_drift = max_drift.max((v - reference).abs());
                used += 1;
            }
            IntegralDrift { name, max_drift, segments: segments.max(1), samples_used: used }
        })
        .collect()
}

/// Segment index per sample, by sign of the first velocity component.
/// Samples where it is exactly zero belong to no segment.
fn sign_segments(samples: &[PhaseState]) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    let mut seg = 0usize;
    let mut last_sign = 0.0;
    for s in samples {
        let u = s.velocities[0];
        if u == 0.0 {
            out.push(None);
            continue;
        }
        let sign = u.signum();
        if last_sign != 0.0 && sign != last_sign {
            seg += 1;
        }
        last_sign = sign;
        out.push(Some(seg));
    }
    out
}

/// Shifts `value` by a multiple of `period` to land closest to `previous`.
pub fn unwrap_near(value: f64, previous: f64, period: f64) -> f64 {
    value - period * ((value - previous) / period).round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rhs_examples() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let r = geodesic_rhs(&s2, &PhaseState::new(0.0, [PI / 2.0, 0.0], [0.0, 1.0])).unwrap();
        assert_eq!(r.dcoords, vec![0.0, 1.0]);
        assert!(close(r.dvelocities[0], 0.0, 1e-15) && r.dvelocities[1] == 0.0);

        let cone = Chart::cone(0.25).unwrap();
        let r = geodesic_rhs(&cone, &PhaseState::new(0.0, [1.0, 0.0], [0.0, 2.0])).unwrap();
        assert_eq!(r.dcoords, vec![0.0, 2.0]);
        assert!(close(r.dvelocities[0], 1.0, 1e-15));
        assert_eq!(r.dvelocities[1], 0.0);

        let cyl = Chart::cylinder(1.0).unwrap();
        let r = geodesic_rhs(&cyl, &PhaseState::new(0.0, [0.3, 2.0], [1.5, -0.2])).unwrap();
        assert_eq!(r.dvelocities, vec![0.0, 0.0]);
    }

    #[test]
    fn equator_great_circle() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let tr = integrate_geodesic(&s2, &PhaseState::new(0.0, [PI / 2.0, 0.0], [0.0, 1.0]), PI, 1e-12).unwrap();
        let last = tr.last();
        assert_eq!(last.t, PI);
        assert!(close(last.coords[0], PI / 2.0, 1e-9));
        assert!(close(last.coords[1], PI, 1e-9));
    }

    #[test]
    fn cone_radial_line() {
        let cone = Chart::cone(0.25).unwrap();
        let tr = integrate_geodesic(&cone, &PhaseState::new(0.0, [1.0, 0.0], [1.0, 0.0]), 2.0, 1e-12).unwrap();
        assert!(close(tr.last().coords[0], 3.0, 1e-10));
        assert_eq!(tr.last().coords[1], 0.0);
    }

    #[test]
    fn cone_radius_law() {
        // r² = r₀² + H t² + 2σ t √(H r₀² − A), H = 0.61, A = L3²/α = 0.25
        let cone = Chart::cone(0.25).unwrap();
        let tr = integrate_geodesic(&cone, &PhaseState::new(0.0, [1.0, 0.0], [0.6, 1.0]), 1.0, 1e-12).unwrap();
        let (h, a): (f64, f64) = (0.61, 0.25);
        let r2 = 1.0 + h + 2.0 * (h - a).sqrt();
        assert!(close(r2, 2.81, 1e-12));
        assert!(close(tr.last().coords[0], r2.sqrt(), 1e-8));
    }

    #[test]
    fn dense_output_matches_samples() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let tr = integrate_geodesic(&s2, &PhaseState::new(0.0, [1.0, 0.2], [0.3, 0.8]), 2.0, 1e-10).unwrap();
        let mid = &tr.samples[tr.samples.len() / 2];
        let st = tr.state_at(mid.t).unwrap();
        assert!(close(st.coords[0], mid.coords[0], 1e-12));
        assert!(tr.state_at(2.5).is_none());
    }

    #[test]
    fn boundary_hit_on_cone_apex() {
        // radial line into the apex reaches r = 0 at t = 1
        let cone = Chart::cone(0.25).unwrap();
        match integrate_geodesic(&cone, &PhaseState::new(0.0, [1.0, 0.0], [-1.0, 0.0]), 2.0, 1e-10) {
            Err(GeodesicError::BoundaryHit { state, partial }) => {
                assert!(state.t < 1.0 && state.t > 0.99);
                assert!(partial.samples.len() > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let st = PhaseState::new(0.0, [0.0, 0.0], [0.0, 1.0]);
        assert!(matches!(integrate_geodesic(&s2, &st, 1.0, 1e-8), Err(GeodesicError::Geometry(_))));
        let st = PhaseState::new(0.0, [1.0, 0.0], [0.0, 1.0]);
        assert!(matches!(integrate_geodesic(&s2, &st, 1.0, 0.0), Err(GeodesicError::InvalidTolerance(_))));
    }

    #[test]
    fn sphere2_integrals_example() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let set = integrals_at(&s2, &PhaseState::new(0.0, [PI / 2.0, 0.0], [0.0, 1.0])).unwrap();
        assert!(close(set.get("H").unwrap(), 1.0, 1e-15));
        assert!(close(set.get("L1").unwrap(), 0.0, 1e-15));
        assert!(close(set.get("L2").unwrap(), 0.0, 1e-15));
        assert!(close(set.get("L3").unwrap(), 1.0, 1e-15));
        // u = 0 leaves I2 undefined, the rest stays available
        assert_eq!(set.undefined(), vec!["I2"]);
    }

    #[test]
    fn sphere2_momenta_match_embedding_cross_product() {
        let s2 = Chart::sphere2(1.7).unwrap();
        let x = [0.8, 2.3];
        let u = [0.4, -1.1];
        let p = s2.embed(&x).unwrap();
        let dp = s2.embed_velocity(&x, &u).unwrap();
        let cross = [p[1] * dp[2] - p[2] * dp[1], p[2] * dp[0] - p[0] * dp[2], p[0] * dp[1] - p[1] * dp[0]];
        let set = integrals_at(&s2, &PhaseState::new(0.0, x, u)).unwrap();
        for (name, want) in ["L1", "L2", "L3"].iter().zip(cross) {
            assert!(close(set.get(name).unwrap(), want, 1e-13), "{name}");
        }
    }

    #[test]
    fn sphere3_integrals_example() {
        let s3 = Chart::sphere3(1.0).unwrap();
        let set = integrals_at(&s3, &PhaseState::new(0.0, [PI / 2.0, PI / 2.0, 0.0], [0.0, 0.0, 1.0])).unwrap();
        assert!(close(set.get("L6").unwrap(), 1.0, 1e-15));
        let sum: f64 = ["L1", "L2", "L3", "L4", "L5", "L6"].iter().map(|n| set.get(n).unwrap().powi(2)).sum();
        assert!(close(sum, 1.0, 1e-14));
        assert!(close(set.get("H").unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn sphere3_momenta_match_embedding_bivector() {
        // L1 = −(x1ẋ3 − ẋ1x3), L2 = L12, L3 = L23, L4 = L14, L5 = L24, L6 = L34
        let s3 = Chart::sphere3(1.3).unwrap();
        let x = [0.7, 1.9, 4.1];
        let u = [0.3, -0.6, 0.9];
        let p = s3.embed(&x).unwrap();
        let dp = s3.embed_velocity(&x, &u).unwrap();
        let b = |i: usize, k: usize| p[i] * dp[k] - dp[i] * p[k];
        let want = [-b(0, 2), b(0, 1), b(1, 2), b(0, 3), b(1, 3), b(2, 3)];
        let got = sphere3_momenta(1.3, &x, &u);
        for (g, w) in got.iter().zip(want) {
            assert!(close(*g, w, 1e-13));
        }
    }

    #[test]
    fn zero_velocity_integrals() {
        for chart in [Chart::cone(0.3).unwrap(), Chart::sphere2(2.0).unwrap(), Chart::sphere3(1.0).unwrap()] {
            let n = chart.dim();
            let st = PhaseState::new(0.5, vec![1.0; n], vec![0.0; n]);
            let set = integrals_at(&chart, &st).unwrap();
            assert_eq!(set.get("H"), Some(0.0));
            for name in set.names() {
                if name.starts_with('L') {
                    assert_eq!(set.get(name).unwrap().abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn relation_examples() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let rel = relation_checks(&s2, &PhaseState::new(0.0, [PI / 3.0, 1.2], [0.7, -0.4])).unwrap();
        assert!(rel.iter().all(|(_, r)| r.abs() < 1e-12));

        let s3 = Chart::sphere3(1.0).unwrap();
        let st = PhaseState::new(0.0, [PI / 2.0, PI / 2.0, PI / 2.0], [0.2, 0.3, 0.4]);
        let rel = relation_checks(&s3, &st).unwrap();
        assert!(rel.iter().all(|(_, r)| r.abs() < 1e-12), "{rel:?}");
        let (_, q) = sphere3_momentum_matrices(&st.coords);
        assert!(close(q.determinant(), 1.0, 1e-15));
    }

    #[test]
    fn cone_time_dependent_integrals_hold_across_turning_point() {
        let cone = Chart::cone(0.25).unwrap();
        let tr = integrate_geodesic(&cone, &PhaseState::new(0.0, [2.0, 0.0], [-0.8, 0.5]), 6.0, 1e-11).unwrap();
        assert!(tr.samples.iter().any(|s| s.velocities[0] > 0.0));
        let i3 = tr.drift_of("I3").unwrap();
        assert_eq!(i3.segments, 2);
        assert!(i3.max_drift < 1e-7);
        assert!(tr.drift_of("I4").unwrap().max_drift < 1e-7);
        assert!(tr.drift_of("H").unwrap().max_drift < 1e-8);
    }

    #[test]
    fn sphere2_time_dependent_integrals_within_segments() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let tr = integrate_geodesic(&s2, &PhaseState::new(0.0, [1.0, 0.3], [0.6, 0.7]), 8.0, 1e-11).unwrap();
        let i1 = tr.drift_of("I1").unwrap();
        assert!(i1.segments >= 3, "{i1:?}");
        assert!(i1.max_drift < 1e-7, "{i1:?}");
        assert!(tr.drift_of("I2").unwrap().max_drift < 1e-7);
    }

    #[test]
    fn great_circle_equation_along_geodesic() {
        let s2 = Chart::sphere2(1.0).unwrap();
        let st = PhaseState::new(0.0, [1.1, 0.4], [0.3, 0.9]);
        let set = integrals_at(&s2, &st).unwrap();
        let l = [set.get("L1").unwrap(), set.get("L2").unwrap(), set.get("L3").unwrap()];
        let tr = integrate_geodesic(&s2, &st, 5.0, 1e-11).unwrap();
        for s in &tr.samples {
            assert!(great_circle_residual(l, s.coords[0], s.coords[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn unwrap_removes_period_jumps() {
        assert!(close(unwrap_near(0.1 + PI, 0.05, PI), 0.1, 1e-15));
        assert!(close(unwrap_near(-3.0, 0.2, PI), -3.0 + PI, 1e-15));
    }
}
