//! Grid resolution of hodograph systems and tracing of `det M = 0`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{solve_velocities, HodographError, HodographSystem, NewtonOptions};
use crate::grid::GridSpec;

/// Per-node solutions of a hodograph system on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolve {
    pub grid: GridSpec,
    pub t: f64,
    /// Velocities per node, `None` where the solve failed.
    pub velocities: Vec<Option<Vec<f64>>>,
    pub det_m: Vec<Option<f64>>,
    pub iterations: Vec<usize>,
    /// Failure per node, kept so a singular Jacobian can be told from a divergent solve.
    pub failures: Vec<Option<HodographError>>,
}

impl GridSolve {
    pub fn n_valid(&self) -> usize {
        self.velocities.iter().filter(|v| v.is_some()).count()
    }
}

fn solve_node(
    sys: &HodographSystem,
    t: f64,
    coords: &[f64],
    guesses: &[&[f64]],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, f64, usize), HodographError> {
    let mut last_err = None;
    for g in guesses {
        match solve_velocities(sys, t, coords, g, opts) {
            Ok(sol) => {
                let det = sys.det_m(t, coords, &sol.velocities)?;
                return Ok((sol.velocities, det, sol.iterations));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| HodographError::InvalidOptions("no guess".into())))
}

/// Solves the system at every node of `grid` at time `t`.
///
/// The first column (varying axis 0) is swept sequentially from `seed`; each
/// row at fixed axis-0 index then continues from its column value, with rows
/// solved in parallel. A failed node keeps the last successful guess.
pub fn solve_on_grid(sys: &HodographSystem, grid: &GridSpec, t: f64, seed: &[f64], opts: &NewtonOptions) -> GridSolve {
    let counts = grid.counts();
    let row_len: usize = counts[1..].iter().product();
    let mut column_seeds: Vec<Vec<f64>> = Vec::with_capacity(counts[0]);
    let mut prev = seed.to_vec();
    for i in 0..counts[0] {
        let coords = grid.coords_of(i * row_len);
        if let Ok((v, _, _)) = solve_node(sys, t, &coords, &[&prev, seed], opts) {
            prev = v;
        }
        column_seeds.push(prev.clone());
    }
    type NodeResult = (Option<Vec<f64>>, Option<f64>, usize, Option<HodographError>);
    let rows: Vec<Vec<NodeResult>> = (0..counts[0])
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(row_len);
            let mut line_start = column_seeds[i].clone();
            let mut prev = line_start.clone();
            let last_len = *counts.last().unwrap();
            for k in 0..row_len {
                let flat = i * row_len + k;
                if k % last_len == 0 {
                    prev = line_start.clone();
                }
                let coords = grid.coords_of(flat);
                match solve_node(sys, t, &coords, &[&prev, &column_seeds[i], seed], opts) {
                    Ok((v, det, it)) => {
                        if k % last_len == 0 {
                            line_start = v.clone();
                        }
                        prev = v.clone();
                        out.push((Some(v), Some(det), it, None));
                    }
                    Err(e) => out.push((None, None, 0, Some(e))),
                }
            }
            out
        })
        .collect();
    let n = grid.n_nodes();
    let mut solve = GridSolve {
        grid: grid.clone(),
        t,
        velocities: Vec::with_capacity(n),
        det_m: Vec::with_capacity(n),
        iterations: Vec::with_capacity(n),
        failures: Vec::with_capacity(n),
    };
    for (v, d, it, e) in rows.into_iter().flatten() {
        solve.velocities.push(v);
        solve.det_m.push(d);
        solve.iterations.push(it);
        solve.failures.push(e);
    }
    solve
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupOptions {
    /// A refined crossing is kept only when `|det M|` falls below this.
    pub refine_tol: f64,
    pub newton: NewtonOptions,
    /// Bisection steps per edge.
    pub max_bisections: usize,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        Self { refine_tol: 1e-9, newton: NewtonOptions::default(), max_bisections: 80 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub coords: Vec<f64>,
    pub det_m: f64,
}

/// Zero set of `det M` on a grid.
///
/// In two dimensions the crossings are joined into polylines by marching
/// squares; in three dimensions all crossings form one unordered point set.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupLocus {
    pub grid: GridSpec,
    pub t: f64,
    /// Sign of `det M` per node, `0` where the solve failed.
    pub det_sign: Vec<i8>,
    pub polylines: Vec<Vec<LocusPoint>>,
    pub masked: usize,
    /// Sign changes whose bisection never reached `refine_tol`.
    pub rejected_crossings: usize,
}

impl BlowupLocus {
    pub fn is_empty(&self) -> bool {
        self.polylines.iter().all(Vec::is_empty)
    }

    pub fn points(&self) -> impl Iterator<Item = &LocusPoint> {
        self.polylines.iter().flatten()
    }
}

/// Edge of the grid from node `from` one step along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct EdgeKey {
    from: usize,
    axis: usize,
}

fn sign_of(d: f64) -> i8 {
    if d < 0.0 {
        -1
    } else {
        1
    }
}

fn refine_edge(
    sys: &HodographSystem,
    solve: &GridSolve,
    edge: EdgeKey,
    to: usize,
    opts: &BlowupOptions,
) -> Option<LocusPoint> {
    let t = solve.t;
    let xa = solve.grid.coords_of(edge.from);
    let xb = solve.grid.coords_of(to);
    let mut lo = (0.0, solve.velocities[edge.from].clone()?, solve.det_m[edge.from]?);
    let mut hi = (1.0, solve.velocities[to].clone()?, solve.det_m[to]?);
    let at = |s: f64| -> Vec<f64> { xa.iter().zip(&xb).map(|(a, b)| a + s * (b - a)).collect() };
    let mut best = if lo.2.abs() <= hi.2.abs() { (lo.0, lo.2) } else { (hi.0, hi.2) };
    for _ in 0..opts.max_bisections {
        if best.1.abs() < opts.refine_tol {
            break;
        }
        let s = 0.5 * (lo.0 + hi.0);
        if s <= lo.0 || s >= hi.0 {
            break;
        }
        let x = at(s);
        let (v, det, _) = solve_node(sys, t, &x, &[&lo.1, &hi.1], &opts.newton).ok()?;
        if det.abs() < best.1.abs() {
            best = (s, det);
        }
        if sign_of(det) == sign_of(lo.2) {
            lo = (s, v, det);
        } else {
            hi = (s, v, det);
        }
    }
    (best.1.abs() < opts.refine_tol).then(|| LocusPoint { coords: at(best.0), det_m: best.1 })
}

/// Traces `det M = 0` over `grid` at time `t`.
///
/// Nodes are solved with [`solve_on_grid`] from `seed`; every grid edge whose
/// end signs differ is bisected with fresh Newton solves. An empty locus is a
/// regular result.
pub fn trace_blowup(sys: &HodographSystem, grid: &GridSpec, t: f64, seed: &[f64], opts: &BlowupOptions) -> BlowupLocus {
    let solve = solve_on_grid(sys, grid, t, seed, &opts.newton);
    let det_sign: Vec<i8> = solve.det_m.iter().map(|d| d.map_or(0, sign_of)).collect();
    let counts = grid.counts();
    let dim = grid.dim();
    let mut edges = Vec::new();
    for from in 0..grid.n_nodes() {
        let multi = grid.multi_index(from);
        for axis in 0..dim {
            if multi[axis] + 1 >= counts[axis] {
                continue;
            }
            let mut m2 = multi.clone();
            m2[axis] += 1;
            let to = grid.flat_index(&m2);
            if det_sign[from] != 0 && det_sign[to] != 0 && det_sign[from] != det_sign[to] {
                edges.push((EdgeKey { from, axis }, to));
            }
        }
    }
    let refined: Vec<(EdgeKey, Option<LocusPoint>)> =
        edges.par_iter().map(|&(e, to)| (e, refine_edge(sys, &solve, e, to, opts))).collect();
    let rejected_crossings = refined.iter().filter(|(_, p)| p.is_none()).count();
    let crossings: BTreeMap<EdgeKey, LocusPoint> = refined.into_iter().filter_map(|(e, p)| p.map(|p| (e, p))).collect();
    let polylines = if dim == 2 {
        assemble_polylines(grid, &det_sign, &solve, crossings)
    } else if crossings.is_empty() {
        Vec::new()
    } else {
        vec![crossings.into_values().collect()]
    };
    BlowupLocus {
        grid: grid.clone(),
        t,
        masked: det_sign.iter().filter(|s| **s == 0).count(),
        det_sign,
        polylines,
        rejected_crossings,
    }
}

/// Marching squares over a 2D grid of `det M` signs.
fn assemble_polylines(
    grid: &GridSpec,
    signs: &[i8],
    solve: &GridSolve,
    mut crossings: BTreeMap<EdgeKey, LocusPoint>,
) -> Vec<Vec<LocusPoint>> {
    let (n0, n1) = (grid.axes[0].count, grid.axes[1].count);
    let node = |i: usize, j: usize| i * n1 + j;
    let mut links: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
    let mut link = |a: EdgeKey, b: EdgeKey| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let corners = [node(i, j), node(i, j + 1), node(i + 1, j + 1), node(i + 1, j)];
            if corners.iter().any(|&c| signs[c] == 0) {
                continue;
            }
            // sides in cyclic order: bottom, right, top, left
            let sides = [
                EdgeKey { from: node(i, j), axis: 1 },
                EdgeKey { from: node(i, j + 1), axis: 0 },
                EdgeKey { from: node(i + 1, j), axis: 1 },
                EdgeKey { from: node(i, j), axis: 0 },
            ];
            let hit: Vec<bool> = sides.iter().map(|s| crossings.contains_key(s)).collect();
            let n_hit = hit.iter().filter(|h| **h).count();
            if n_hit == 2 {
                let pair: Vec<EdgeKey> = sides.iter().zip(&hit).filter(|(_, h)| **h).map(|(s, _)| *s).collect();
                link(pair[0], pair[1]);
            } else if n_hit == 4 {
                let center: f64 = corners.iter().map(|&c| solve.det_m[c].unwrap_or(0.0)).sum();
                if sign_of(center) == signs[corners[0]] {
                    // corners 0 and 2 connect through the center; cut off corners 1 and 3
                    link(sides[0], sides[1]);
                    link(sides[2], sides[3]);
                } else {
                    link(sides[3], sides[0]);
                    link(sides[1], sides[2]);
                }
            }
        }
    }
    let mut polylines = Vec::new();
    let mut visited = std::collections::BTreeSet::new();
    let starts: Vec<EdgeKey> = crossings
        .keys()
        .copied()
        .filter(|k| links.get(k).map_or(0, Vec::len) < 2)
        .chain(crossings.keys().copied())
        .collect();
    for start in starts {
        if visited.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start);
        let mut current = start;
        loop {
            let next = links.get(&current).and_then(|ns| ns.iter().find(|n| !visited.contains(*n)).copied());
            match next {
                Some(n) => {
                    visited.insert(n);
                    chain.push(n);
                    current = n;
                }
                None => break,
            }
        }
        polylines.push(chain.iter().filter_map(|k| crossings.remove(k)).collect());
    }
    polylines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodograph::{MultiProfile, Profile};
    use std::f64::consts::PI;

    fn s2_linear(b1: f64, b2: f64) -> HodographSystem {
        HodographSystem::make_s2_stationary_system(
            1.0,
            Profile::Linear { a: 1.0, b: b1 },
            Profile::Linear { a: 0.3, b: b2 },
        )
        .unwrap()
    }

    #[test]
    fn equator_locus() {
        let sys = s2_linear(0.0, 0.0);
        let grid = GridSpec::uniform(&sys.chart, &[(1.2, 2.0, 17), (0.2, 1.4, 9)]).unwrap();
        let locus = trace_blowup(&sys, &grid, 0.0, &[0.0, 0.0], &BlowupOptions::default());
        assert!(!locus.is_empty());
        assert_eq!(locus.polylines.len(), 1);
        assert_eq!(locus.polylines[0].len(), 9);
        for p in locus.points() {
            assert!((p.coords[0] - PI / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tilted_great_circle_locus() {
        let sys = s2_linear(1.0, 0.0);
        let grid = GridSpec::uniform(&sys.chart, &[(0.3, 1.5, 25), (0.1, 2.0, 20)]).unwrap();
        let locus = trace_blowup(&sys, &grid, 0.0, &[0.0, 0.0], &BlowupOptions::default());
        assert!(locus.points().count() > 10);
        for p in locus.points() {
            let r = 1.0 / p.coords[0].tan() - p.coords[1].cos();
            assert!(r.abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn cylinder_constant_family_has_empty_locus() {
        let sys = HodographSystem::make_cylinder_system(
            1.0,
            MultiProfile::Constant { value: 0.5 },
            MultiProfile::Constant { value: -0.2 },
        )
        .unwrap();
        let grid = GridSpec::uniform(&sys.chart, &[(-1.0, 1.0, 8), (0.0, 3.0, 8)]).unwrap();
        let locus = trace_blowup(&sys, &grid, 0.7, &[0.0, 0.0], &BlowupOptions::default());
        assert!(locus.is_empty());
        assert_eq!(locus.masked, 0);
    }

    #[test]
    fn grid_solve_is_deterministic_across_pools() {
        let sys = s2_linear(0.4, 0.2);
        let grid = GridSpec::uniform(&sys.chart, &[(0.3, 1.2, 12), (0.1, 2.0, 11)]).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| solve_on_grid(&sys, &grid, 0.0, &[0.0, 0.0], &NewtonOptions::default()));
        let b = four.install(|| solve_on_grid(&sys, &grid, 0.0, &[0.0, 0.0], &NewtonOptions::default()));
        assert_eq!(a, b);
    }
}
