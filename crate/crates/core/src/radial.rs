//! Radial super-solution `U(r) = u(t)/t`, `r = θ(t)`, its PDE residual
//! and the fitted decay exponent.
//!
//! Derivatives in `r` are recomputed on the radial nodes so the PDE check
//! does not reuse the ODE differencing.

use serde::Serialize;

use crate::checker::{CheckItem, ConditionId, Coverage, Location, Tally};
use crate::error::{Error, Result};
use crate::par;
use crate::problem::ProblemSpec;
use crate::quadrature::{differentiate_split, GridSeries};

/// Stencil width of the residual and of its truncation-error estimate.
const STENCIL: usize = 7;
const CHECK_STENCIL: usize = 9;
/// Default one-sided tolerance on `E(r)` relative to its term magnitudes.
pub const RESIDUAL_REL_TOL: f64 = 1e-6;
const FIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub n: u32,
    pub r_inner: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Rounding residue of `u/t`, so that `values + residue` is the quotient
    /// to twice working precision.
    #[serde(skip)]
    pub residue: Vec<f64>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// `(n−2)·r^{n−2}` as an unevaluated sum `hi + lo` (error-free products).
fn time_of_radius_split(r: f64, n: u32) -> (f64, f64) {
    let (mut hi, mut lo) = ((n - 2) as f64, 0.0f64);
    for _ in 0..n - 2 {
        let p = hi * r;
        let e = hi.mul_add(r, -p);
        let l = lo.mul_add(r, e);
        hi = p + l;
        lo = l - (hi - p);
    }
    (hi, lo)
}

/// `r_i = θ(t_i)`, `U_i = u(t_i)/t_i`; `r_1 = R` exactly.
///
/// The quotient is taken against `t(r_i) = (n−2)r_i^{n−2}` evaluated from
/// the stored radius, so `U` is consistent with its own abscissa to twice
/// working precision; `t(r_i)` and `t_i` agree to rounding.
pub fn lift(problem: &ProblemSpec, u: &GridSeries) -> RadialProfile {
    let nodes = u.nodes();
    let mut radii = par::map_slice(nodes, |&t| problem.theta(t));
    radii[0] = problem.r_inner;
    let (values, residue) = u
        .values
        .iter()
        .zip(&radii)
        .map(|(&u, &r)| {
            let (t_hi, t_lo) = time_of_radius_split(r, problem.n);
            let q = u / t_hi;
            (q, ((-q).mul_add(t_hi, u) - q * t_lo) / t_hi)
        })
        .unzip();
    RadialProfile {
        n: problem.n,
        r_inner: problem.r_inner,
        radii,
        values,
        residue,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `E(r) = U'' + (n−1)U'/r + m(r,U) + g(r)·r·U'`
    #[serde(skip)]
    pub e: Vec<f64>,
    /// `|U''| + |(n−1)U'/r| + |m| + |g·r·U'|` per node.
    #[serde(skip)]
    pub scale: Vec<f64>,
    #[serde(skip)]
    pub low_order: Vec<bool>,
    pub max_e: f64,
    pub max_abs_relative_interior: f64,
    pub tolerance: f64,
    pub item: CheckItem,
}

/// One-sided check `E(r) ≤ tol·scale(r)` at interior nodes, with the margin
/// `−E/scale` and error budget from a wider stencil.
pub fn radial_residual(problem: &ProblemSpec, profile: &RadialProfile, rel_tol: f64) -> Result<ResidualReport> {
    let n = profile.len();
    if n < CHECK_STENCIL {
        return Err(Error::ProfileTooShort(format!(
            "{n} radii, need at least {CHECK_STENCIL} for the residual stencil"
        )));
    }
    if let Some(i) = profile.values.iter().position(|&u| !(u > 0.0)) {
        return Err(Error::HypothesisViolation {
            condition: "U > 0".into(),
            detail: format!("U = {} at r = {}", profile.values[i], profile.radii[i]),
        });
    }
    let (r, u) = (&profile.radii, &profile.values);
    let dim = problem.n as f64;
    let residual = |width: usize| -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let lo = Some(profile.residue.as_slice());
        let (d1, low) = differentiate_split(r, u, lo, 1, width);
        let (d2, _) = differentiate_split(r, u, lo, 2, width);
        let mut e = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let terms = [
                d2[i],
                (dim - 1.0) * d1[i] / r[i],
                problem.m.eval(r[i], u[i]),
                problem.g.eval(r[i]) * r[i] * d1[i],
            ];
            e.push(terms.iter().sum());
            s.push(terms.iter().map(|x| x.abs()).sum());
        }
        (e, s, low)
    };
    let (e, scale, low_order) = residual(STENCIL);
    let (e_wide, _, _) = residual(CHECK_STENCIL);
    let mut tally = Tally::new();
    let mut max_rel = 0.0f64;
    for i in 0..n {
        let s = if scale[i] > 0.0 { scale[i] } else { 1.0 };
        if low_order[i] {
            continue;
        }
        let err = (e[i] - e_wide[i]).abs() / s;
        tally.record(-e[i] / s, err, rel_tol, Location::at(r[i]));
        max_rel = max_rel.max(e[i].abs() / s);
    }
    let max_e = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let item = tally
        .finish(ConditionId::RadialResidual, Coverage::Direct)
        .with_value("max_e", max_e)
        .with_value("max_abs_relative_interior", max_rel);
    Ok(ResidualReport {
        e,
        scale,
        low_order,
        max_e,
        max_abs_relative_interior: max_rel,
        tolerance: rel_tol,
        item,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub slope: f64,
    /// Standard error of the fitted slope.
    pub slope_error: f64,
    /// `(λ − 1)(n − 2)`
    pub bound: f64,
    pub lambda: f64,
    pub r_from: f64,
    pub r_to: f64,
    pub points: usize,
    pub item: CheckItem,
}

/// Least-squares slope of `ln U` against `ln r` over the last decade of radii,
/// compared with `(λ − 1)(n − 2)`. Also requires `U` to decrease on that decade.
pub fn decay_rate(profile: &RadialProfile, lambda: f64) -> Result<DecayReport> {
    let r_to = *profile.radii.last().ok_or_else(|| Error::ProfileTooShort("empty profile".into()))?;
    let r_from = r_to / 10.0;
    if profile.radii[0] > r_from {
        return Err(Error::ProfileTooShort(format!(
            "radii span [{}, {r_to}] is shorter than one decade",
            profile.radii[0]
        )));
    }
    let start = profile.radii.partition_point(|&r| r < r_from);
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile.radii[start..]
        .iter()
        .zip(&profile.values[start..])
        .map(|(r, u)| (r.ln(), u.ln()))
        .unzip();
    let m = xs.len();
    if m < 3 {
        return Err(Error::ProfileTooShort(format!("{m} radii in the last decade")));
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let slope_error = (sse / (m as f64 - 2.0) / sxx).sqrt();
    let bound = (lambda - 1.0) * (profile.n as f64 - 2.0);
    let mut tally = Tally::new();
    let floor = FIT_FLOOR * (1.0 + bound.abs());
    tally.record(bound - slope, 2.0 * slope_error, floor, Location::window(r_from, r_to));
    let tail = &profile.values[start..];
    let mut min_drop = f64::INFINITY;
    for (w, r) in tail.windows(2).zip(&profile.radii[start + 1..]) {
        let rel = (w[0] - w[1]) / w[0];
        min_drop = min_drop.min(rel);
        if rel < 0.0 {
            tally.record(rel, 0.0, 1e-15, Location::at(*r).sample("monotone"));
        }
    }
    let item = tally
        .finish(ConditionId::DecayRate, Coverage::Direct)
        .with_value("min_relative_drop", min_drop)
        .with_value("slope", slope)
        .with_value("slope_error", slope_error)
        .with_value("bound", bound);
    Ok(DecayReport {
        slope,
        slope_error,
        bound,
        lambda,
        r_from,
        r_to,
        points: m,
        item,
    })
}
