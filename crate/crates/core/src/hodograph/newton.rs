//! Damped Newton iteration for the velocities of a hodograph system.

use serde::{Deserialize, Serialize};

use super::{HodographError, HodographSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on `‖S‖∞`.
    pub tol: f64,
    /// Initial step fraction in `(0, 1]`.
    pub damping: f64,
    /// `|det M|` below this is reported as a singular Jacobian.
    pub jac_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-12, damping: 1.0, jac_tol: 1e-13 }
    }
}

impl NewtonOptions {
    fn validate(&self) -> Result<(), HodographError> {
        if self.max_iter == 0
            || !(self.tol > 0.0)
            || !(self.damping > 0.0 && self.damping <= 1.0)
            || !(self.jac_tol >= 0.0)
        {
            return Err(HodographError::InvalidOptions(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub velocities: Vec<f64>,
    /// Number of Newton updates applied.
    pub iterations: usize,
    pub residual: f64,
    /// `‖S‖∞` at the guess and after every update.
    pub history: Vec<f64>,
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn at_rounding_floor(norm: f64, x: &[f64], tol: f64) -> bool {
    norm <= tol * inf_norm(x).max(1.0)
}

const MAX_HALVINGS: usize = 30;

/// Solves `S(t, x, u) = 0` for `u` starting from `guess`.
///
/// Converges once `‖S‖∞ < tol`. When no step can lower the residual any
/// further, `‖S‖∞ ≤ tol · max(1, ‖u‖∞)` is also accepted, so fields growing
/// without bound near a blow-up locus are still resolved to rounding accuracy.
/// Each update solves `M δ = S` and backtracks `u − λδ` by halving `λ` until
/// the residual norm decreases; trial points outside the system's domain count
/// as rejected trials.
pub fn solve_velocities(
    sys: &HodographSystem,
    t: f64,
    coords: &[f64],
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution, HodographError> {
    opts.validate()?;
    if guess.iter().any(|g| !g.is_finite()) {
        return Err(HodographError::InvalidOptions("guess must be finite".into()));
    }
    let mut x = guess.to_vec();
    let mut r = sys.residuals(t, coords, &x)?;
    let mut norm = inf_norm(&r);
    let mut history = vec![norm];
    for iter in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok(NewtonSolution { velocities: x, iterations: iter, residual: norm, history });
        }
        let lu = sys.m_matrix(t, coords, &x)?.lu();
        let det = lu.determinant();
        if !(det.abs() >= opts.jac_tol) {
            return Err(HodographError::SingularJacobian { iterate: x, det });
        }
        let rhs = nalgebra::DVector::from_column_slice(&r);
        let delta = lu.solve(&rhs).ok_or_else(|| HodographError::SingularJacobian { iterate: x.clone(), det })?;
        let mut lambda = opts.damping;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, di)| xi - lambda * di).collect();
            if let Ok(rt) = sys.residuals(t, coords, &trial) {
                let nt = inf_norm(&rt);
                if nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            if at_rounding_floor(norm, &x, opts.tol) {
                return Ok(NewtonSolution { velocities: x, iterations: iter, residual: norm, history });
            }
            return Err(HodographError::NoConvergence { iterate: x, residual: norm, iterations: iter });
        };
        x = trial;
        r = rt;
        norm = nt;
        history.push(norm);
    }
    if norm < opts.tol {
        return Ok(NewtonSolution { velocities: x, iterations: opts.max_iter, residual: norm, history });
    }
    Err(HodographError::NoConvergence { iterate: x, residual: norm, iterations: opts.max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodograph::{MultiProfile, Profile};
    use std::f64::consts::PI;

    #[test]
    fn s2_stationary_linear_example() {
        let sys = HodographSystem::make_s2_stationary_system(
            1.0,
            Profile::Linear { a: 1.0, b: 0.0 },
            Profile::Linear { a: 0.0, b: 0.0 },
        )
        .unwrap();
        let sol = solve_velocities(&sys, 0.0, &[PI / 3.0, PI / 6.0], &[0.0, 0.0], &NewtonOptions::default()).unwrap();
        assert!((sol.velocities[0] - 0.5).abs() < 1e-12);
        let v = (PI / 6.0).cos() / ((PI / 3.0).sin() * (PI / 3.0).cos());
        assert!((v - 2.0).abs() < 1e-12);
        assert!((sol.velocities[1] - v).abs() < 1e-12);
    }

    #[test]
    fn cone_alt_stationary_example() {
        let sys = HodographSystem::make_cone_alt_system(
            0.25,
            MultiProfile::Constant { value: 5.0 },
            MultiProfile::Constant { value: 1.0 },
        )
        .unwrap();
        let sol = solve_velocities(&sys, 0.0, &[1.0, 0.0], &[0.8, 3.5], &NewtonOptions::default()).unwrap();
        assert!((sol.velocities[0] - 1.0).abs() < 1e-12);
        assert!((sol.velocities[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn root_as_guess_needs_at_most_two_iterations() {
        let sys = HodographSystem::make_cone_alt_system(
            0.25,
            MultiProfile::Constant { value: 5.0 },
            MultiProfile::Constant { value: 1.0 },
        )
        .unwrap();
        let sol = solve_velocities(&sys, 0.0, &[1.0, 0.0], &[1.0, 4.0], &NewtonOptions::default()).unwrap();
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn quadratic_convergence_order() {
        let sys = HodographSystem::make_s2_stationary_system(
            1.0,
            Profile::Quadratic { a: 0.2, b: 0.2, c: 0.3 },
            Profile::Quadratic { a: 0.1, b: -0.1, c: 0.2 },
        )
        .unwrap();
        let opts = NewtonOptions { tol: 1e-15, ..Default::default() };
        let sol = solve_velocities(&sys, 0.0, &[0.8, 0.4], &[0.3, 0.5], &opts).unwrap();
        let h: Vec<f64> = sol.history.iter().copied().filter(|r| *r > 1e-13).collect();
        assert!(h.len() >= 3, "{:?}", sol.history);
        let n = h.len();
        let order = (h[n - 1] / h[n - 2]).ln() / (h[n - 2] / h[n - 3]).ln();
        assert!(order >= 1.8, "order {order}, history {:?}", sol.history);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // det M = sinθ cosθ vanishes on the equator for constant F's
        let sys = HodographSystem::make_s2_stationary_system(
            1.0,
            Profile::Constant { value: 1.0 },
            Profile::Constant { value: 0.0 },
        )
        .unwrap();
        let err = solve_velocities(&sys, 0.0, &[PI / 2.0, 0.0], &[0.0, 0.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, HodographError::SingularJacobian { .. }));
    }

    #[test]
    fn invalid_options() {
        let sys = HodographSystem::make_s2_stationary_system(
            1.0,
            Profile::Constant { value: 1.0 },
            Profile::Constant { value: 0.0 },
        )
        .unwrap();
        let bad = NewtonOptions { damping: 0.0, ..Default::default() };
        assert!(solve_velocities(&sys, 0.0, &[1.0, 0.0], &[0.0, 0.0], &bad).is_err());
        assert!(solve_velocities(&sys, 0.0, &[1.0, 0.0], &[f64::NAN, 0.0], &NewtonOptions::default()).is_err());
    }
}
