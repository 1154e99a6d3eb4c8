//! Parametric functions used as the arbitrary `F`'s of hodograph systems.

use serde::{Deserialize, Serialize};

/// A function of one variable with its derivative.
///
/// `eval` returns `None` outside the function's domain (negative base of a
/// power, log argument outside `(0, 1)`, abscissa outside a table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `a + b x`
    Linear {
        a: f64,
        b: f64,
    },
    /// `a + b x + c x²`
    Quadratic {
        a: f64,
        b: f64,
        c: f64,
    },
    /// `coef · x^exponent` on `x > 0`
    Power {
        coef: f64,
        exponent: f64,
    },
    /// `coef · x · √(−ln x)` on `0 < x < 1`
    Log {
        coef: f64,
    },
    Tabulated(Tabulated),
}

impl Profile {
    pub fn eval(&self, x: f64) -> Option<f64> {
        let v = match self {
            Profile::Constant { value } => *value,
            Profile::Linear { a, b } => a + b * x,
            Profile::Quadratic { a, b, c } => a + x * (b + c * x),
            Profile::Power { coef, exponent } => {
                if !(x > 0.0) {
                    return None;
                }
                coef * x.powf(*exponent)
            }
            Profile::Log { coef } => {
                if !(x > 0.0 && x < 1.0) {
                    return None;
                }
                coef * x * (-x.ln()).sqrt()
            }
            Profile::Tabulated(t) => return t.eval(x),
        };
        v.is_finite().then_some(v)
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        let d = match self {
            Profile::Constant { .. } => 0.0,
            Profile::Linear { b, .. } => *b,
            Profile::Quadratic { b, c, .. } => b + 2.0 * c * x,
            Profile::Power { coef, exponent } => {
                if !(x > 0.0) {
                    return None;
                }
                coef * exponent * x.powf(exponent - 1.0)
            }
            Profile::Log { coef } => {
                if !(x > 0.0 && x < 1.0) {
                    return None;
                }
                let s = (-x.ln()).sqrt();
                coef * (s - 0.5 / s)
            }
            Profile::Tabulated(t) => return t.derivative(x),
        };
        d.is_finite().then_some(d)
    }
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant through `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableData", into = "TableData")]
pub struct Tabulated {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableData {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<TableData> for Tabulated {
    type Error = String;
    fn try_from(d: TableData) -> Result<Self, String> {
        Tabulated::new(d.x, d.y)
    }
}

impl From<Tabulated> for TableData {
    fn from(t: Tabulated) -> Self {
        TableData { x: t.x, y: t.y }
    }
}

impl Tabulated {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, String> {
        if x.len() != y.len() || x.len() < 2 {
            return Err("tabulated profile needs at least two (x, y) pairs of equal length".into());
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err("tabulated abscissae must be finite and strictly increasing".into());
        }
        let n = x.len();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let h0 = x[k] - x[k - 1];
                let h1 = x[k + 1] - x[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(Self { x, y, slopes })
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.x.len();
        if !(x >= self.x[0] && x <= self.x[n - 1]) {
            return None;
        }
        Some(self.x.partition_point(|&xk| xk <= x).clamp(1, n - 1) - 1)
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let k = self.locate(x)?;
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        Some(h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1])
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        let k = self.locate(x)?;
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let (d00, d10, d01, d11) =
            (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        Some((d00 * self.y[k] + d01 * self.y[k + 1]) / h + d10 * self.slopes[k] + d11 * self.slopes[k + 1])
    }
}

/// A function of several integrals.
///
/// Arguments arrive as `Option`s because some integrals are undefined at
/// some states; an argument is only required when its coefficient is nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MultiProfile {
    Constant {
        value: f64,
    },
    /// `a + Σ coeffs[k] · x_k`
    Affine {
        a: f64,
        coeffs: Vec<f64>,
    },
    /// `offset + amplitude · sin(wavenumber · x_index)`
    Sin {
        index: usize,
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl MultiProfile {
    pub fn eval(&self, args: &[Option<f64>]) -> Option<f64> {
        match self {
            MultiProfile::Constant { value } => Some(*value),
            MultiProfile::Affine { a, coeffs } => {
                let mut sum = *a;
                for (k, c) in coeffs.iter().enumerate() {
                    if *c != 0.0 {
                        sum += c * (*args.get(k)?)?;
                    }
                }
                Some(sum)
            }
            MultiProfile::Sin { index, amplitude, wavenumber, offset } => {
                let x = (*args.get(*index)?)?;
                Some(offset + amplitude * (wavenumber * x).sin())
            }
        }
    }

    /// Largest argument index the profile reads, if any.
    pub fn arity(&self) -> usize {
        match self {
            MultiProfile::Constant { .. } => 0,
            MultiProfile::Affine { coeffs, .. } => coeffs.len(),
            MultiProfile::Sin { index, .. } => index + 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &Profile, x: f64) -> f64 {
        let h = 1e-6;
        (p.eval(x + h).unwrap() - p.eval(x - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            Profile::Constant { value: 2.0 },
            Profile::Linear { a: 1.0, b: -0.5 },
            Profile::Quadratic { a: 1.0, b: 0.3, c: -0.7 },
            Profile::Power { coef: 1.5, exponent: 2.5 },
            Profile::Log { coef: 0.8 },
            Profile::Tabulated(Tabulated::new(vec![0.0, 0.2, 0.5, 1.0], vec![0.0, 0.1, 0.7, 0.8]).unwrap()),
        ];
        for p in &profiles {
            for x in [0.15, 0.33, 0.71] {
                let d = p.derivative(x).unwrap();
                assert!((d - fd(p, x)).abs() < 1e-6, "{p:?} at {x}: {d} vs {}", fd(p, x));
            }
        }
    }

    #[test]
    fn domains() {
        assert_eq!(Profile::Power { coef: 1.0, exponent: 0.5 }.eval(-1.0), None);
        assert_eq!(Profile::Log { coef: 1.0 }.eval(1.5), None);
        let t = Tabulated::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(t.eval(1.5), None);
        assert_eq!(t.eval(1.0), Some(2.0));
        assert!(Tabulated::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn tabulated_is_monotone_and_interpolating() {
        let xs = vec![0.0, 0.1, 0.4, 0.5, 1.0];
        let ys = vec![0.0, 0.0, 1.0, 1.0, 3.0];
        let t = Tabulated::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((t.eval(*x).unwrap() - y).abs() < 1e-15);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let v = t.eval(k as f64 / 1000.0).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn json_shapes() {
        let p: Profile = serde_json::from_str(r#"{"type": "linear", "a": 1.0, "b": 0.5}"#).unwrap();
        assert_eq!(p, Profile::Linear { a: 1.0, b: 0.5 });
        let t: Profile = serde_json::from_str(r#"{"type": "tabulated", "x": [0, 1, 2], "y": [0, 1, 4]}"#).unwrap();
        assert!((t.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(serde_json::from_str::<Profile>(r#"{"type": "tabulated", "x": [1, 0], "y": [0, 1]}"#).is_err());
        let m: MultiProfile = serde_json::from_str(r#"{"type": "affine", "a": 1, "coeffs": [0, 2]}"#).unwrap();
        assert_eq!(m.eval(&[None, Some(3.0)]), Some(7.0));
        assert_eq!(m.eval(&[Some(1.0), None]), None);
    }
}
