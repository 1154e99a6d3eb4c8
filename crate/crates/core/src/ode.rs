//! Dormand–Prince 5(4) integrator with step-size control and cubic Hermite
//! dense output.
//!
//! The right-hand side is fallible: an `Err` from any stage is treated as a
//! rejected step (the step shrinks and is retried), which is how trajectories
//! that approach the edge of a chart are handled. If the step collapses while
//! the right-hand side keeps failing, the run ends with [`OdeError::Rhs`].

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, initial_step: None, max_steps: 1_000_000 }
    }
}

/// One accepted point together with the derivative there (used for dense output).
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdeRun {
    pub samples: Vec<OdeSample>,
    pub accepted: usize,
    pub rejected: usize,
}

impl OdeRun {
    pub fn last(&self) -> &OdeSample {
        self.samples.last().expect("an ODE run always holds its initial sample")
    }

    /// Cubic Hermite interpolation between the samples bracketing `t`.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let first = self.samples.first()?;
        let last = self.last();
        let (lo, hi) = if first.t <= last.t { (first.t, last.t) } else { (last.t, first.t) };
        if t < lo || t > hi {
            return None;
        }
        if self.samples.len() == 1 {
            return Some(first.y.clone());
        }
        let forward = last.t >= first.t;
        let idx = self
            .samples
            .partition_point(|s| if forward { s.t <= t } else { s.t >= t })
            .clamp(1, self.samples.len() - 1);
        Some(hermite(&self.samples[idx - 1], &self.samples[idx], t))
    }
}

/// Cubic Hermite interpolant through two samples.
pub fn hermite(a: &OdeSample, b: &OdeSample, t: f64) -> Vec<f64> {
    let h = b.t - a.t;
    if h == 0.0 {
        return a.y.clone();
    }
    let s = (t - a.t) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..a.y.len()).map(|i| h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError<E> {
    /// The right-hand side failed at the initial point.
    InitialRhs(E),
    /// The step collapsed while the right-hand side kept failing.
    Rhs {
        run: OdeRun,
        error: E,
    },
    /// The error controller drove the step below the floor.
    StepUnderflow {
        run: OdeRun,
        step: f64,
    },
    MaxSteps {
        run: OdeRun,
    },
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// Every accepted step is recorded as a sample. The step floor is
/// `1e-14 · max(|t_end|, |t0|, 1)`.
pub fn dopri5<F, E2>(mut f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<OdeRun, OdeError<E2>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E2>,
{
    let n = y0.len();
    let dy0 = f(t0, y0).map_err(OdeError::InitialRhs)?;
    let mut run = OdeRun { samples: vec![OdeSample { t: t0, y: y0.to_vec(), dy: dy0 }], accepted: 0, rejected: 0 };
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(run);
    }
    let dir = span.signum();
    let h_floor = 1e-14 * t_end.abs().max(t0.abs()).max(1.0);

    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => initial_step(&run.samples[0].y, &run.samples[0].dy, opts),
    }
    .min(span.abs());

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = run.samples[0].dy.clone();
    let mut last_rhs_error: Option<E2> = None;
    let mut just_rejected = false;
    let mut steps = 0usize;
    let mut stage_y = vec![0.0; n];

    while (t_end - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::MaxSteps { run });
        }
        let remaining = (t_end - t).abs();
        let mut last_step = false;
        if h >= remaining {
            h = remaining;
            last_step = true;
        }
        let hs = h * dir;

        let mut failed: Option<E2> = None;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][j] * kj[i];
                }
                stage_y[i] = acc;
            }
            match f(t + C[s] * hs, &stage_y) {
                Ok(v) => k[s] = v,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            run.rejected += 1;
            last_rhs_error = Some(e);
            h *= 0.25;
            just_rejected = true;
            if h < h_floor {
                return Err(OdeError::Rhs { run, error: last_rhs_error.unwrap() });
            }
            continue;
        }
        // stage_y now holds the 5th-order solution (stage 7 evaluates at it)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= hs;
            let scale = opts.atol + opts.rtol * y[i].abs().max(stage_y[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            err = 1e10;
        }
        if err <= 1.0 {
            t = if last_step { t_end } else { t + hs };
            y.copy_from_slice(&stage_y);
            k[0] = k[6].clone();
            run.accepted += 1;
            run.samples.push(OdeSample { t, y: y.clone(), dy: k[0].clone() });
            let mut factor = if err == 0.0 { MAX_FACTOR } else { SAFETY * err.powf(-0.2) };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if just_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            just_rejected = false;
            last_rhs_error = None;
        } else {
            run.rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            just_rejected = true;
            if h < h_floor {
                return Err(match last_rhs_error {
                    Some(error) => OdeError::Rhs { run, error },
                    None => OdeError::StepUnderflow { run, step: h },
                });
            }
        }
    }
    Ok(run)
}

fn initial_step(y: &[f64], dy: &[f64], opts: &OdeOptions) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 = d0.max((y[i] / sc).abs());
        d1 = d1.max((dy[i] / sc).abs());
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    // fifth root of the tolerance keeps the first trial step modest
    h.min(0.1 * opts.rtol.max(1e-16).powf(0.2)).max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let run = dopri5(
            |_t, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![-y[0]]) },
            0.0,
            &[1.0],
            3.0,
            &OdeOptions::with_tol(1e-11),
        )
        .unwrap();
        let last = run.last();
        assert_eq!(last.t, 3.0);
        assert!((last.y[0] - (-3.0f64).exp()).abs() < 1e-10);
        assert!(run.accepted > 5);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let run = dopri5(
            |_t, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![y[1], -y[0]]) },
            0.0,
            &[0.0, 1.0],
            6.0,
            &OdeOptions::with_tol(1e-10),
        )
        .unwrap();
        for t in [0.0, 0.37, 1.0, 2.5, 5.99, 6.0] {
            let y = run.interpolate(t).unwrap();
            // Hermite dense output is 4th order in the step; steps here are ~0.1
            assert!((y[0] - t.sin()).abs() < 1e-6, "t={t}");
        }
        assert!(run.interpolate(6.1).is_none());
    }

    #[test]
    fn backward_integration() {
        let run = dopri5(
            |_t, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![y[0]]) },
            1.0,
            &[1.0],
            0.0,
            &OdeOptions::with_tol(1e-11),
        )
        .unwrap();
        assert!((run.last().y[0] - (-1.0f64).exp()).abs() < 1e-10);
        assert!(run.interpolate(0.5).is_some());
    }

    #[test]
    fn failing_rhs_ends_with_rhs_error() {
        // y' = 1 from y = 0, forbidden beyond y = 1
        let res = dopri5(
            |_t, y: &[f64]| if y[0] < 1.0 { Ok(vec![1.0]) } else { Err("wall") },
            0.0,
            &[0.0],
            2.0,
            &OdeOptions::with_tol(1e-9),
        );
        match res {
            Err(OdeError::Rhs { run, error }) => {
                assert_eq!(error, "wall");
                let y = run.last().y[0];
                assert!(y < 1.0 && y > 0.999, "stopped at {y}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_span_returns_initial_sample() {
        let run = dopri5(
            |_t, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(y.to_vec()) },
            2.0,
            &[1.0],
            2.0,
            &OdeOptions::with_tol(1e-8),
        )
        .unwrap();
        assert_eq!(run.samples.len(), 1);
    }
}
