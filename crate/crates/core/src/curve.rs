//! Increasing concave scalar curves `g_j` applied to per-attribute utility sums.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConcaveCurve {
    /// `g(x) = x`
    Linear,
    /// `g(x) = √x`
    Sqrt,
    /// `g(x) = λ√x`
    ScaledSqrt(f64),
    /// `g(x) = ln(1 + x)`
    Log1p,
    /// `g(x) = w·ln(1 + x)`
    WeightedLog1p(f64),
    /// `g(x) = x^{1/3}`
    CubeRoot,
    /// `g(x) = prior·(1 − e^{−x})`. Paired with weights `ln(1/(1 − p))` this
    /// turns a product of miss probabilities into a concave-over-modular sum.
    NegExpCoverage(f64),
}

impl ConcaveCurve {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ConcaveCurve::Linear => x,
            ConcaveCurve::Sqrt => x.sqrt(),
            ConcaveCurve::ScaledSqrt(l) => l * x.sqrt(),
            ConcaveCurve::Log1p => x.ln_1p(),
            ConcaveCurve::WeightedLog1p(w) => w * x.ln_1p(),
            ConcaveCurve::CubeRoot => x.cbrt(),
            ConcaveCurve::NegExpCoverage(p) => -p * (-x).exp_m1(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ConcaveCurve::ScaledSqrt(v) | ConcaveCurve::WeightedLog1p(v) => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::input(format!("curve parameter must be positive, got {v}")));
                }
            }
            ConcaveCurve::NegExpCoverage(p) if !(0.0..=1.0).contains(&p) => {
                return Err(Error::input(format!("coverage prior must lie in [0,1], got {p}")));
            }
            _ => {}
        }
        Ok(())
    }

    /// Grid check of the shape invariants: `g(0) = 0`, nondecreasing, and
    /// midpoint-concave on sampled triples over `[0, max_x]`.
    pub fn check_shape(&self, max_x: f64, steps: usize) -> Result<()> {
        self.validate()?;
        if self.eval(0.0) != 0.0 {
            return Err(Error::input(format!("{self}: g(0) = {} ≠ 0", self.eval(0.0))));
        }
        let xs: Vec<f64> = (0..=steps).map(|s| max_x * s as f64 / steps as f64).collect();
        for w in xs.windows(2) {
            if self.eval(w[0]) > self.eval(w[1]) {
                return Err(Error::input(format!("{self}: decreasing between {} and {}", w[0], w[1])));
            }
        }
        for (a, &x) in xs.iter().enumerate() {
            for &y in &xs[a + 1..] {
                let mid = self.eval(0.5 * (x + y));
                let avg = 0.5 * (self.eval(x) + self.eval(y));
                if mid < avg - 1e-12 * avg.abs().max(1.0) {
                    return Err(Error::input(format!("{self}: not concave on [{x}, {y}]")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ConcaveCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveCurve::Linear => write!(f, "linear"),
            ConcaveCurve::Sqrt => write!(f, "sqrt"),
            ConcaveCurve::ScaledSqrt(l) => write!(f, "scaled_sqrt:{l}"),
            ConcaveCurve::Log1p => write!(f, "log1p"),
            ConcaveCurve::WeightedLog1p(w) => write!(f, "weighted_log1p:{w}"),
            ConcaveCurve::CubeRoot => write!(f, "cbrt"),
            ConcaveCurve::NegExpCoverage(p) => write!(f, "coverage:{p}"),
        }
    }
}

/// Parses `kind[:param]`, the right-hand side of a `curve.<j> = ...` line.
impl FromStr for ConcaveCurve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s, None),
        };
        let param = |name: &str| -> Result<f64> {
            let p = param.ok_or_else(|| Error::input(format!("curve `{name}` needs a parameter")))?;
            p.parse()
                .map_err(|_| Error::input(format!("curve parameter `{p}` is not a real")))
        };
        let no_param = |c: ConcaveCurve| -> Result<ConcaveCurve> {
            if s.contains(':') {
                Err(Error::input(format!("curve `{kind}` takes no parameter")))
            } else {
                Ok(c)
            }
        };
        let curve = match kind.to_ascii_lowercase().as_str() {
            "linear" => no_param(ConcaveCurve::Linear)?,
            "sqrt" => no_param(ConcaveCurve::Sqrt)?,
            "scaled_sqrt" => ConcaveCurve::ScaledSqrt(param(kind)?),
            "log1p" => no_param(ConcaveCurve::Log1p)?,
            "weighted_log1p" => ConcaveCurve::WeightedLog1p(param(kind)?),
            "cbrt" | "cube_root" => no_param(ConcaveCurve::CubeRoot)?,
            "coverage" | "neg_exp_coverage" => ConcaveCurve::NegExpCoverage(param(kind)?),
            other => return Err(Error::input(format!("unknown curve kind `{other}`"))),
        };
        curve.validate()?;
        Ok(curve)
    }
}
