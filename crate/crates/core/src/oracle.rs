//! Independent checks: finite-difference Euler residuals, forward evolution
//! along characteristics, and conservation drift along trajectories.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldGrid, VelocityField};
use crate::geodesics::{integrate_geodesic, measure_drift, GeodesicError, PhaseState, Trajectory};
use crate::geometry::{Chart, GeometryError};
use crate::grid::GridSpec;
use crate::hodograph::{solve_velocities, HodographSystem, NewtonOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("fd_step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("no node has a complete stencil inside the validity set ({n_excluded} excluded)")]
    InsufficientDomain { n_excluded: usize },
    #[error("characteristics cross near {} seed(s); the field is multi-valued", .region.len())]
    MultiValued { region: Vec<Vec<f64>>, partial: Box<FieldGrid> },
    #[error("initial grid has no valid node")]
    EmptyInitialData,
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Why a node did not contribute to a residual summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// The node or a stencil point lies outside the open chart.
    OutsideChart,
    /// The field is invalid at the node or a stencil point.
    InvalidStencil,
}

/// Per-node Euler residuals and their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `∂u/∂t + u·∇u + Γ(u, u)` per node, `None` where excluded.
    pub residuals: Vec<Option<Vec<f64>>>,
    /// Largest `‖residual‖∞` over the included nodes.
    pub max: f64,
    /// Mean `‖residual‖∞` over the included nodes.
    pub mean: f64,
    /// Number of included nodes.
    pub n_nodes: usize,
    pub n_excluded: usize,
    pub exclusions: BTreeMap<Exclusion, usize>,
    pub fd_step: f64,
}

/// The JSON form of a [`ResidualReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub max: f64,
    pub mean: f64,
    pub n_nodes: usize,
    pub n_excluded: usize,
    pub fd_step: f64,
}

impl ResidualReport {
    pub fn summary(&self) -> ResidualSummary {
        ResidualSummary {
            max: self.max,
            mean: self.mean,
            n_nodes: self.n_nodes,
            n_excluded: self.n_excluded,
            fd_step: self.fd_step,
        }
    }

    fn from_residuals(residuals: Vec<Result<Vec<f64>, Exclusion>>, fd_step: f64) -> Result<Self, OracleError> {
        let mut exclusions = BTreeMap::new();
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut n = 0usize;
        let residuals: Vec<Option<Vec<f64>>> = residuals
            .into_iter()
            .map(|r| match r {
                Ok(v) => {
                    let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    max = max.max(norm);
                    sum += norm;
                    n += 1;
                    Some(v)
                }
                Err(e) => {
                    *exclusions.entry(e).or_insert(0) += 1;
                    None
                }
            })
            .collect();
        let n_excluded = residuals.len() - n;
        if n == 0 {
            return Err(OracleError::InsufficientDomain { n_excluded });
        }
        Ok(Self { residuals, max, mean: sum / n as f64, n_nodes: n, n_excluded, exclusions, fd_step })
    }
}

fn check_step(h: f64) -> Result<(), OracleError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OracleError::InvalidStep(h));
    }
    Ok(())
}

fn eval_at(field: &dyn VelocityField, t: f64, x: &[f64]) -> Result<Vec<f64>, Exclusion> {
    if !field.chart().is_interior(x) {
        return Err(Exclusion::OutsideChart);
    }
    match field.velocity(t, x) {
        Some(v) if v.iter().all(|c| c.is_finite()) => Ok(v),
        _ => Err(Exclusion::InvalidStencil),
    }
}

/// Central-difference Euler residual at one point.
///
/// Stationary fields take `∂u/∂t = 0` exactly; all other derivatives use
/// the symmetric stencil `x ± h e_k`, never one-sided differences.
pub fn euler_residual_at(field: &dyn VelocityField, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>, Exclusion> {
    let chart = field.chart();
    let n = chart.dim();
    let u = eval_at(field, t, x)?;
    let mut res = if field.is_stationary() {
        vec![0.0; n]
    } else {
        let up = eval_at(field, t + h, x)?;
        let dn = eval_at(field, t - h, x)?;
        (0..n).map(|i| (up[i] - dn[i]) / (2.0 * h)).collect()
    };
    let mut xp = x.to_vec();
    for k in 0..n {
        xp[k] = x[k] + h;
        let up = eval_at(field, t, &xp)?;
        xp[k] = x[k] - h;
        let dn = eval_at(field, t, &xp)?;
        xp[k] = x[k];
        for i in 0..n {
            res[i] += u[k] * (up[i] - dn[i]) / (2.0 * h);
        }
    }
    let gamma = chart.christoffel_at(x).map_err(|_| Exclusion::OutsideChart)?;
    let quad = gamma.contract(&u);
    for i in 0..n {
        res[i] += quad[i];
    }
    Ok(res)
}

/// Euler residuals of a callable field at the given points, evaluated in parallel.
pub fn euler_residual(
    field: &dyn VelocityField,
    t: f64,
    points: &[Vec<f64>],
    fd_step: f64,
) -> Result<ResidualReport, OracleError> {
    check_step(fd_step)?;
    let res = points.par_iter().map(|x| euler_residual_at(field, t, x, fd_step)).collect();
    ResidualReport::from_residuals(res, fd_step)
}

/// Euler residuals of a callable field at every node of `grid`.
pub fn euler_residual_on_grid(
    field: &dyn VelocityField,
    grid: &GridSpec,
    t: f64,
    fd_step: f64,
) -> Result<ResidualReport, OracleError> {
    euler_residual(field, t, &grid.all_coords(), fd_step)
}

/// Euler residuals of sampled data, differenced along the grid itself.
///
/// `time_neighbors` holds grids at `t − dt` and `t + dt` on the same nodes;
/// without them the data is treated as stationary. Nodes lacking a valid
/// neighbor on either side of any axis are excluded.
pub fn euler_residual_sampled(
    fg: &FieldGrid,
    time_neighbors: Option<(&FieldGrid, &FieldGrid)>,
) -> Result<ResidualReport, OracleError> {
    let grid = &fg.grid;
    let n = fg.chart.dim();
    let counts = grid.counts();
    let steps = grid.steps();
    let dt = time_neighbors.map(|(a, b)| 0.5 * (b.t - a.t));
    if let Some(dt) = dt {
        check_step(dt)?;
    }
    let res = (0..grid.n_nodes())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, Exclusion> {
            let x = grid.coords_of(i);
            let u = fg.values[i].as_ref().ok_or(Exclusion::InvalidStencil)?;
            let mut res = match (time_neighbors, dt) {
                (Some((a, b)), Some(dt)) => {
                    let (ua, ub) = (
                        a.values[i].as_ref().ok_or(Exclusion::InvalidStencil)?,
                        b.values[i].as_ref().ok_or(Exclusion::InvalidStencil)?,
                    );
                    (0..n).map(|c| (ub[c] - ua[c]) / (2.0 * dt)).collect()
                }
                _ => vec![0.0; n],
            };
            let idx = grid.multi_index(i);
            for k in 0..n {
                if idx[k] == 0 || idx[k] + 1 == counts[k] {
                    return Err(Exclusion::InvalidStencil);
                }
                let mut j = idx.clone();
                j[k] += 1;
                let up = fg.values[grid.flat_index(&j)].as_ref().ok_or(Exclusion::InvalidStencil)?;
                j[k] -= 2;
                let dn = fg.values[grid.flat_index(&j)].as_ref().ok_or(Exclusion::InvalidStencil)?;
                for c in 0..n {
                    res[c] += u[k] * (up[c] - dn[c]) / (2.0 * steps[k]);
                }
            }
            let quad = fg.chart.christoffel_at(&x).map_err(|_| Exclusion::OutsideChart)?.contract(u);
            for c in 0..n {
                res[c] += quad[c];
            }
            Ok(res)
        })
        .collect();
    let h = steps.iter().fold(0.0f64, |m, s| m.max(*s));
    ResidualReport::from_residuals(res, h)
}

/// Starting guess for Newton at `(t, x)`.
pub type GuessFn<'a> = Box<dyn Fn(f64, &[f64]) -> Option<Vec<f64>> + Sync + 'a>;

/// Velocities obtained by solving a hodograph system at each point.
pub struct HodographField<'a> {
    pub system: HodographSystem,
    pub options: NewtonOptions,
    pub guess: GuessFn<'a>,
}

impl VelocityField for HodographField<'_> {
    fn chart(&self) -> &Chart {
        &self.system.chart
    }

    fn velocity(&self, t: f64, coords: &[f64]) -> Option<Vec<f64>> {
        let guess = (self.guess)(t, coords)?;
        solve_velocities(&self.system, t, coords, &guess, &self.options).ok().map(|s| s.velocities)
    }

    fn is_stationary(&self) -> bool {
        self.system.is_stationary()
    }

    fn describe(&self) -> String {
        serde_json::to_string(&self.system).unwrap_or_else(|_| self.system.kind.id().to_string())
    }
}

/// Options for [`evolve_characteristics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Geodesic integrator tolerance.
    pub tol: f64,
    /// Scatter radius in units of the grid spacing.
    pub radius: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, radius: 2.5 }
    }
}

fn wrap_azimuths(chart: &Chart, grid: &GridSpec, x: &mut [f64]) {
    let ranges = chart.coord_ranges();
    for (k, r) in ranges.iter().enumerate() {
        if r.periodic {
            let center = 0.5 * (grid.axes[k].min + grid.axes[k].max);
            let tau = std::f64::consts::TAU;
            x[k] -= tau * ((x[k] - center) / tau).round();
        }
    }
}

/// Forward-maps initial data along characteristics and scatters the transported
/// velocities back onto the initial grid at `t_target`.
///
/// Each valid node seeds a geodesic; images are interpolated by weighted
/// quadratic least squares within `radius` grid spacings, and a target node is
/// kept only if seeds surround it on both sides of every axis. Where the
/// forward map reverses orientation, characteristics have crossed: those
/// seeds are returned as the region of [`OracleError::MultiValued`], together
/// with the interpolated field from the remaining seeds.
pub fn evolve_characteristics(
    initial: &FieldGrid,
    t_target: f64,
    opts: &EvolveOptions,
) -> Result<FieldGrid, OracleError> {
    let chart = initial.chart;
    let grid = &initial.grid;
    let n = chart.dim();
    if initial.n_valid() == 0 {
        return Err(OracleError::EmptyInitialData);
    }
    let images: Vec<Option<PhaseState>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|i| {
            let u = initial.values[i].as_ref()?;
            let start = PhaseState::new(initial.t, grid.coords_of(i), u.clone());
            if t_target == initial.t {
                return Some(start);
            }
            let traj = integrate_geodesic(&chart, &start, t_target, opts.tol).ok()?;
            let mut end = traj.last().clone();
            wrap_azimuths(&chart, grid, &mut end.coords);
            Some(end)
        })
        .collect();

    let crossed = orientation_flips(&chart, grid, &images);
    let steps = grid.steps();
    let to_index = |x: &[f64]| -> Vec<f64> { (0..n).map(|k| (x[k] - grid.axes[k].min) / steps[k]).collect() };

    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, img) in images.iter().enumerate() {
        if let (Some(img), false) = (img, crossed[i]) {
            let key = to_index(&img.coords).iter().map(|c| c.floor() as i64).collect();
            buckets.entry(key).or_default().push(i);
        }
    }
    let reach = opts.radius.ceil() as i64;
    let values: Vec<Option<Vec<f64>>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|target| {
            let center = grid.multi_index(target);
            let mut near: Vec<(Vec<f64>, &[f64])> = Vec::new();
            let mut offsets = vec![-reach - 1; n];
            'scan: loop {
                let key: Vec<i64> = center.iter().zip(&offsets).map(|(c, o)| *c as i64 + o).collect();
                if let Some(list) = buckets.get(&key) {
                    for &s in list {
                        let img = images[s].as_ref().unwrap();
                        let d: Vec<f64> =
                            to_index(&img.coords).iter().zip(&center).map(|(a, c)| a - *c as f64).collect();
                        if d.iter().map(|x| x * x).sum::<f64>() < opts.radius * opts.radius {
                            near.push((d, &img.velocities));
                        }
                    }
                }
                for k in 0..n {
                    offsets[k] += 1;
                    if offsets[k] <= reach {
                        continue 'scan;
                    }
                    offsets[k] = -reach - 1;
                }
                break;
            }
            mls_quadratic(&near, opts.radius, n)
        })
        .collect();

    let out = FieldGrid {
        chart,
        t: t_target,
        grid: grid.clone(),
        values,
        provenance: format!("characteristics from t = {} ({})", initial.t, initial.provenance),
    };
    let region: Vec<Vec<f64>> = (0..grid.n_nodes()).filter(|&i| crossed[i]).map(|i| grid.coords_of(i)).collect();
    if !region.is_empty() {
        return Err(OracleError::MultiValued { region, partial: Box::new(out) });
    }
    Ok(out)
}

/// Marks seeds whose forward-difference or backward-difference image frame
/// has the opposite orientation to the grid frame.
fn orientation_flips(chart: &Chart, grid: &GridSpec, images: &[Option<PhaseState>]) -> Vec<bool> {
    let n = grid.dim();
    let periodic: Vec<bool> = chart.coord_ranges().iter().map(|r| r.periodic).collect();
    let tau = std::f64::consts::TAU;
    let counts = grid.counts();
    let mut flips = vec![false; images.len()];
    for i in 0..images.len() {
        let Some(base) = &images[i] else { continue };
        let idx = grid.multi_index(i);
        for dir in [1i64, -1] {
            let mut frame = DMatrix::zeros(n, n);
            let mut complete = true;
            for k in 0..n {
                let j = idx[k] as i64 + dir;
                if j < 0 || j >= counts[k] as i64 {
                    complete = false;
                    break;
                }
                let mut m = idx.clone();
                m[k] = j as usize;
                let Some(other) = &images[grid.flat_index(&m)] else {
                    complete = false;
                    break;
                };
                for c in 0..n {
                    let mut d = other.coords[c] - base.coords[c];
                    if periodic[c] {
                        d -= tau * (d / tau).round();
                    }
                    frame[(c, k)] = d * dir as f64;
                }
            }
            if complete && frame.determinant() <= 0.0 {
                flips[i] = true;
            }
        }
    }
    flips
}

/// Weighted quadratic least-squares value at the origin of `near`'s offsets.
fn mls_quadratic(near: &[(Vec<f64>, &[f64])], radius: f64, n: usize) -> Option<Vec<f64>> {
    let n_basis = 1 + n + n * (n + 1) / 2;
    if near.len() < n_basis {
        return None;
    }
    for k in 0..n {
        let below = near.iter().any(|(d, _)| d[k] < 0.0);
        let above = near.iter().any(|(d, _)| d[k] > 0.0);
        if !(below && above) {
            return None;
        }
    }
    let basis = |d: &[f64]| -> Vec<f64> {
        let mut b = Vec::with_capacity(n_basis);
        b.push(1.0);
        b.extend_from_slice(d);
        for i in 0..n {
            for j in i..n {
                b.push(d[i] * d[j]);
            }
        }
        b
    };
    let dim_out = near[0].1.len();
    let mut ata = DMatrix::<f64>::zeros(n_basis, n_basis);
    let mut atb = DMatrix::<f64>::zeros(n_basis, dim_out);
    for (d, v) in near {
        let r2 = d.iter().map(|x| x * x).sum::<f64>() / (radius * radius);
        let w = (1.0 - r2).max(0.0).powi(4);
        let b = DVector::from_vec(basis(d));
        ata += w * &b * b.transpose();
        for c in 0..dim_out {
            for r in 0..n_basis {
                atb[(r, c)] += w * b[r] * v[c];
            }
        }
    }
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() < 1e-10 * smax {
        return None;
    }
    let coef = svd.solve(&atb, 0.0).ok()?;
    let out: Vec<f64> = (0..dim_out).map(|c| coef[(0, c)]).collect();
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Largest drift of every integral along a trajectory, sheet-segmented where needed.
pub fn conservation_report(chart: &Chart, trajectory: &Trajectory) -> Result<BTreeMap<String, f64>, OracleError> {
    if trajectory.samples.is_empty() {
        return Err(OracleError::EmptyTrajectory);
    }
    Ok(measure_drift(chart, &trajectory.samples).into_iter().map(|d| (d.name.to_string(), d.max_drift)).collect())
}

/// Integrates the characteristic through `initial` and reports integral drifts.
pub fn conservation_of_geodesic(
    chart: &Chart,
    initial: &PhaseState,
    t_end: f64,
    tol: f64,
) -> Result<BTreeMap<String, f64>, GeodesicError> {
    let traj = integrate_geodesic(chart, initial, t_end, tol)?;
    Ok(conservation_report(chart, &traj).expect("integrated trajectories have samples"))
}
