//! Parametric real functions of one variable with tail metadata.
//!
//! Every coefficient function in a problem (`a`, `g`, `q±`, γ densities) is a
//! [`ScalarMap`]. The families are closed under multiplication by monomials,
//! so envelopes such as `q₊(t)/t` and their squares stay symbolic and keep
//! closed-form antiderivatives where those exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate, TailEstimate};

/// Certified power-law majorant: `|f(x)| ≤ k·x^(−rho)` for `x ≥ from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBound {
    pub k: f64,
    pub rho: f64,
    pub from: f64,
}

impl PowerBound {
    pub fn zero(from: f64) -> Self {
        PowerBound {
            k: 0.0,
            rho: f64::INFINITY,
            from,
        }
    }

    pub fn monomial(k: f64, exponent: f64, from: f64) -> Self {
        PowerBound {
            k: k.abs(),
            rho: -exponent,
            from,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.k == 0.0
    }

    pub fn at(&self, x: f64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.k * x.powf(-self.rho)
        }
    }

    pub fn scale(self, c: f64) -> Self {
        PowerBound {
            k: self.k * c.abs(),
            ..self
        }
    }

    pub fn mul(self, other: PowerBound) -> Self {
        let from = self.from.max(other.from);
        if self.is_zero() || other.is_zero() {
            return PowerBound::zero(from);
        }
        PowerBound {
            k: self.k * other.k,
            rho: self.rho + other.rho,
            from,
        }
    }

    /// Sum of majorants; the slower decay wins and the faster term is
    /// absorbed at the common starting point.
    pub fn add(self, other: PowerBound) -> Self {
        let from = self.from.max(other.from);
        if self.is_zero() {
            return PowerBound { from, ..other };
        }
        if other.is_zero() {
            return PowerBound { from, ..self };
        }
        let rho = self.rho.min(other.rho);
        let k = self.k * from.powf(rho - self.rho) + other.k * from.powf(rho - other.rho);
        PowerBound { k, rho, from }
    }

    /// Majorant of `x ↦ f(c·x^p)` given the majorant of `f`, for `c, p > 0`.
    pub fn compose_power(self, c: f64, p: f64, from: f64) -> Self {
        if self.is_zero() {
            return PowerBound::zero(from);
        }
        PowerBound {
            k: self.k * c.powf(-self.rho),
            rho: self.rho * p,
            from,
        }
    }

    /// Bound on `∫_s^∞ |f|` for `s ≥ from`.
    pub fn tail_integral(&self, s: f64) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        if self.rho > 1.0 && s >= self.from * (1.0 - 1e-12) {
            Some(self.k * s.powf(1.0 - self.rho) / (self.rho - 1.0))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    Linear,
    LogLog,
}

/// Behaviour of a table beyond its last abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableTail {
    /// Continues as `y_last·(x_last/x)^rho`.
    Decay { rho: f64 },
    /// Identically zero past the last abscissa.
    FiniteSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarMap {
    Zero,
    Constant {
        value: f64,
    },
    /// `c·x^e`
    Power {
        c: f64,
        e: f64,
    },
    /// `c·x^e·(ln x)^d`, defined for `x > 1` when `d ≠ 0`.
    LogPower {
        c: f64,
        e: f64,
        d: f64,
    },
    Sum {
        terms: Vec<ScalarMap>,
    },
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
        interp: Interp,
        tail: TableTail,
    },
    /// Pointwise product of maps without a symbolic simplification.
    #[serde(skip)]
    Product { left: Box<ScalarMap>, right: Box<ScalarMap> },
}

impl Default for ScalarMap {
    fn default() -> Self {
        ScalarMap::Zero
    }
}

impl ScalarMap {
    pub fn constant(value: f64) -> Self {
        normalize(value, 0.0, 0.0)
    }

    pub fn power(c: f64, e: f64) -> Self {
        normalize(c, e, 0.0)
    }

    pub fn log_power(c: f64, e: f64, d: f64) -> Self {
        normalize(c, e, d)
    }

    /// `(c, e, d)` when the map is a single monomial `c·x^e·(ln x)^d`.
    pub fn as_monomial(&self) -> Option<(f64, f64, f64)> {
        match *self {
            ScalarMap::Zero => Some((0.0, 0.0, 0.0)),
            ScalarMap::Constant { value } => Some((value, 0.0, 0.0)),
            ScalarMap::Power { c, e } => Some((c, e, 0.0)),
            ScalarMap::LogPower { c, e, d } => Some((c, e, d)),
            _ => None,
        }
    }

    /// True when the map is zero by construction (not by sampling).
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarMap::Sum { terms } => terms.iter().all(ScalarMap::is_zero),
            ScalarMap::Product { left: a, right: b } => a.is_zero() || b.is_zero(),
            ScalarMap::Table { y, .. } => y.iter().all(|&v| v == 0.0),
            other => other.as_monomial().map(|m| m.0 == 0.0).unwrap_or(false),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |detail: String| Error::Config {
            path: name.to_string(),
            detail,
        };
        match self {
            ScalarMap::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    t.validate(&format!("{name}.terms[{i}]"))?;
                }
                Ok(())
            }
            ScalarMap::Product { left: a, right: b } => {
                a.validate(name)?;
                b.validate(name)
            }
            ScalarMap::Table { x, y, interp, tail } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(bad("table needs ≥ 2 points and equal-length x, y".into()));
                }
                if x[0] <= 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(bad("table abscissae must be positive and strictly increasing".into()));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(bad("table values must be finite".into()));
                }
                if *interp == Interp::LogLog && y.iter().any(|&v| v <= 0.0) {
                    return Err(bad("log-log interpolation needs positive values".into()));
                }
                if let TableTail::Decay { rho } = tail {
                    if !(*rho > 0.0) {
                        return Err(bad("tail decay exponent must be positive".into()));
                    }
                    if *interp == Interp::Linear && y.last().copied().unwrap_or(0.0) < 0.0 {
                        return Err(bad("decaying tail from a negative endpoint".into()));
                    }
                }
                Ok(())
            }
            other => {
                let (c, e, d) = other.as_monomial().expect("monomial");
                if !(c.is_finite() && e.is_finite() && d.is_finite()) {
                    return Err(bad("parameters must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Smallest abscissa at which the map is defined.
    pub fn domain_start(&self) -> f64 {
        match self {
            ScalarMap::LogPower { d, .. } if *d != 0.0 => 1.0,
            ScalarMap::Sum { terms } => terms.iter().map(ScalarMap::domain_start).fold(0.0, f64::max),
            ScalarMap::Product { left: a, right: b } => a.domain_start().max(b.domain_start()),
            ScalarMap::Table { x, .. } => x[0],
            _ => 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarMap::Zero => 0.0,
            ScalarMap::Constant { value } => *value,
            ScalarMap::Power { c, e } => c * x.powf(*e),
            ScalarMap::LogPower { c, e, d } => c * x.powf(*e) * x.ln().powf(*d),
            ScalarMap::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            ScalarMap::Product { left: a, right: b } => a.eval(x) * b.eval(x),
            ScalarMap::Table { x: xs, y, interp, tail } => eval_table(xs, y, *interp, *tail, x),
        }
    }

    /// Pointwise product, kept symbolic for monomials and sums thereof.
    pub fn times(&self, other: &ScalarMap) -> ScalarMap {
        if self.is_zero() || other.is_zero() {
            return ScalarMap::Zero;
        }
        match (self.as_monomial(), other.as_monomial()) {
            (Some((c1, e1, d1)), Some((c2, e2, d2))) => normalize(c1 * c2, e1 + e2, d1 + d2),
            _ => match (self, other) {
                (ScalarMap::Sum { terms }, o) => ScalarMap::Sum {
                    terms: terms.iter().map(|t| t.times(o)).collect(),
                },
                (s, ScalarMap::Sum { terms }) => ScalarMap::Sum {
                    terms: terms.iter().map(|t| s.times(t)).collect(),
                },
                (a, b) => ScalarMap::Product {
                    left: Box::new(a.clone()),
                    right: Box::new(b.clone()),
                },
            },
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarMap {
        self.times(&ScalarMap::constant(c))
    }

    /// `x ↦ x^k·f(x)`.
    pub fn times_power(&self, k: f64) -> ScalarMap {
        self.times(&ScalarMap::power(1.0, k))
    }

    pub fn plus(&self, other: &ScalarMap) -> ScalarMap {
        match (self.is_zero(), other.is_zero()) {
            (true, _) => other.clone(),
            (_, true) => self.clone(),
            _ => ScalarMap::Sum {
                terms: vec![self.clone(), other.clone()],
            },
        }
    }

    /// Closed-form antiderivative, when the family admits one.
    pub fn antiderivative(&self, x: f64) -> Option<f64> {
        match self {
            ScalarMap::Sum { terms } => terms.iter().map(|t| t.antiderivative(x)).sum(),
            ScalarMap::Product { .. } | ScalarMap::Table { .. } => None,
            other => {
                let (c, e, d) = other.as_monomial()?;
                if c == 0.0 {
                    Some(0.0)
                } else if d == 0.0 {
                    if e == -1.0 {
                        Some(c * x.ln())
                    } else {
                        Some(c * x.powf(e + 1.0) / (e + 1.0))
                    }
                } else if e == -1.0 {
                    if d == -1.0 {
                        Some(c * x.ln().ln())
                    } else {
                        Some(c * x.ln().powf(d + 1.0) / (d + 1.0))
                    }
                } else {
                    None
                }
            }
        }
    }

    /// Closed form of `∫_t^∞ f`, when it exists.
    pub fn tail_closed(&self, t: f64) -> Option<f64> {
        match self {
            ScalarMap::Sum { terms } => terms.iter().map(|m| m.tail_closed(t)).sum(),
            ScalarMap::Product { .. } | ScalarMap::Table { .. } => None,
            other => {
                let (c, e, d) = other.as_monomial()?;
                if c == 0.0 {
                    Some(0.0)
                } else if d == 0.0 && e < -1.0 {
                    Some(-c * t.powf(e + 1.0) / (e + 1.0))
                } else if e == -1.0 && d < -1.0 {
                    Some(-c * t.ln().powf(d + 1.0) / (d + 1.0))
                } else {
                    None
                }
            }
        }
    }

    /// Power-law majorant valid on `[from, ∞)`.
    pub fn power_bound(&self, from: f64) -> Option<PowerBound> {
        match self {
            ScalarMap::Sum { terms } => {
                let mut acc = PowerBound::zero(from);
                for t in terms {
                    acc = acc.add(t.power_bound(from)?);
                }
                Some(acc)
            }
            ScalarMap::Product { left: a, right: b } => Some(a.power_bound(from)?.mul(b.power_bound(from)?)),
            ScalarMap::Table { x, y, interp: _, tail } => {
                let last = *x.last().unwrap();
                match tail {
                    TableTail::FiniteSupport => {
                        if from >= last {
                            Some(PowerBound::zero(from))
                        } else {
                            let ymax = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                            Some(PowerBound::monomial(ymax * last * last, -2.0, from))
                        }
                    }
                    TableTail::Decay { rho } => {
                        let mut k = y.last().unwrap().abs() * last.powf(*rho);
                        for i in 0..x.len() - 1 {
                            if x[i + 1] >= from {
                                let cell = y[i].abs().max(y[i + 1].abs());
                                k = k.max(cell * x[i + 1].powf(*rho));
                            }
                        }
                        Some(PowerBound { k, rho: *rho, from })
                    }
                }
            }
            other => {
                let (c, e, d) = other.as_monomial()?;
                if c == 0.0 {
                    return Some(PowerBound::zero(from));
                }
                if d == 0.0 {
                    return Some(PowerBound::monomial(c, e, from));
                }
                if from <= 1.0 {
                    return None;
                }
                let l = from.ln();
                if d < 0.0 {
                    Some(PowerBound::monomial(c * l.powf(d), e, from))
                } else {
                    // (ln x)^d ≤ C·x^δ on [from, ∞), maximum of y^d·e^(−δy) at y = d/δ.
                    let delta = if -e > 1.0 { (0.5 * (-e - 1.0)).min(0.25) } else { 0.05 };
                    let y_star = (d / delta).max(l);
                    let cst = y_star.powf(d) * (-delta * y_star).exp();
                    Some(PowerBound::monomial(c * cst, e + delta, from))
                }
            }
        }
    }

    /// `∫_a^b f`, closed form when available, adaptive quadrature otherwise.
    pub fn integral(&self, a: f64, b: f64, rel_tol: f64) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate::exact(0.0));
        }
        if let (Some(fb), Some(fa)) = (self.antiderivative(b), self.antiderivative(a)) {
            if fa.is_finite() && fb.is_finite() {
                return Ok(Estimate {
                    value: fb - fa,
                    error: f64::EPSILON * 4.0 * (fa.abs() + fb.abs()),
                });
            }
        }
        quadrature::integrate_log(|x| self.eval(x), a, b, rel_tol, 0.0)
    }

    /// `∫_t^∞ f` with closed form when present, otherwise quadrature up to
    /// `cutoff` plus the certified remainder bound.
    pub fn tail(&self, t: f64, cutoff: f64, rel_tol: f64) -> Result<TailEstimate> {
        if let Some(v) = self.tail_closed(t) {
            if v.is_finite() {
                return Ok(TailEstimate::closed(v));
            }
        }
        let bound = self.power_bound(t);
        quadrature::integrate_tail(|x| self.eval(x), t, cutoff, bound, rel_tol)
    }
}

fn normalize(c: f64, e: f64, d: f64) -> ScalarMap {
    if c == 0.0 {
        ScalarMap::Zero
    } else if d == 0.0 && e == 0.0 {
        ScalarMap::Constant { value: c }
    } else if d == 0.0 {
        ScalarMap::Power { c, e }
    } else {
        ScalarMap::LogPower { c, e, d }
    }
}

fn eval_table(xs: &[f64], ys: &[f64], interp: Interp, tail: TableTail, x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return match tail {
            TableTail::FiniteSupport if x > xs[n - 1] => 0.0,
            TableTail::FiniteSupport => ys[n - 1],
            TableTail::Decay { rho } => ys[n - 1] * (xs[n - 1] / x).powf(rho),
        };
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[i], ys[i + 1]);
    match interp {
        Interp::Linear => y0 + (y1 - y0) * (x - x0) / (x1 - x0),
        Interp::LogLog => {
            let slope = (y1 / y0).ln() / (x1 / x0).ln();
            y0 * (x / x0).powf(slope)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_products_stay_symbolic() {
        let q = ScalarMap::log_power(1.0, 0.0, -1.0);
        let beta = q.times_power(-1.0);
        assert_eq!(beta, ScalarMap::LogPower { c: 1.0, e: -1.0, d: -1.0 });
        let sq = beta.times(&beta);
        assert_eq!(sq, ScalarMap::LogPower { c: 1.0, e: -2.0, d: -2.0 });
        assert_eq!(ScalarMap::constant(0.5).times_power(-1.0), ScalarMap::Power { c: 0.5, e: -1.0 });
        assert!(ScalarMap::Zero.times(&beta).is_zero());
    }

    #[test]
    fn closed_tails() {
        let f = ScalarMap::power(0.125, -2.0);
        assert_relative_eq!(f.tail_closed(1.0).unwrap(), 0.125, max_relative = 1e-15);
        let g = ScalarMap::log_power(1.0, -1.0, -2.0);
        // ∫_t^∞ ds/(s ln² s) = 1/ln t
        assert_relative_eq!(g.tail_closed(std::f64::consts::E).unwrap(), 1.0, max_relative = 1e-15);
        assert!(ScalarMap::power(1.0, -1.0).tail_closed(2.0).is_none());
    }

    #[test]
    fn antiderivative_of_inverse_log() {
        // β = 1/(t ln t) integrates to ln ln t
        let beta = ScalarMap::log_power(1.0, -1.0, -1.0);
        let e2 = std::f64::consts::E.powi(2);
        let est = beta.integral(std::f64::consts::E, e2, 1e-12).unwrap();
        assert_relative_eq!(est.value, 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn table_interpolation_and_tail() {
        let t = ScalarMap::Table {
            x: vec![1.0, 2.0, 4.0],
            y: vec![1.0, 0.25, 0.0625],
            interp: Interp::LogLog,
            tail: TableTail::Decay { rho: 2.0 },
        };
        t.validate("t").unwrap();
        assert_relative_eq!(t.eval(3.0), 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(t.eval(8.0), 1.0 / 64.0, max_relative = 1e-14);
        let pb = t.power_bound(1.0).unwrap();
        for x in [1.0, 1.5, 3.0, 10.0, 100.0] {
            assert!(t.eval(x) <= pb.at(x) * (1.0 + 1e-12));
        }
        let s = ScalarMap::Table {
            x: vec![1.0, 2.0],
            y: vec![1.0, 1.0],
            interp: Interp::Linear,
            tail: TableTail::FiniteSupport,
        };
        assert_eq!(s.eval(2.5), 0.0);
    }

    #[test]
    fn log_power_bound_majorizes() {
        for (e, d) in [(-2.0, -2.0), (-2.0, 1.5), (-3.0, 3.0), (-1.5, 0.5)] {
            let f = ScalarMap::log_power(1.0, e, d);
            let pb = f.power_bound(3.0).unwrap();
            let mut x = 3.0;
            while x < 1e12 {
                assert!(f.eval(x) <= pb.at(x) * (1.0 + 1e-12), "e={e} d={d} x={x}");
                x *= 1.7;
            }
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let ok: ScalarMap = toml::from_str("kind = \"power\"\nc = 1.0\ne = -2.0").unwrap();
        assert_eq!(ok, ScalarMap::Power { c: 1.0, e: -2.0 });
        assert!(toml::from_str::<ScalarMap>("kind = \"power\"\nc = 1.0\ne = -2.0\nz = 1").is_err());
    }
}
