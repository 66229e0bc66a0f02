//! Geometric grids, adaptive and grid-based quadrature, semi-infinite tails
//! and nonuniform finite differences.
//!
//! Every object in the problem behaves like a power of `t`, so integrals are
//! taken in the logarithmic variable `y = ln t` where such integrands become
//! smooth exponentials.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar_map::PowerBound;

/// Default relative tolerance for adaptive quadrature.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }
}

/// `∫_t^∞` split into the quadrature part and the certified remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub quad_error: f64,
    /// Bound on the neglected `∫_cutoff^∞ |f|`; zero for closed forms.
    pub tail_bound: f64,
    pub closed_form: bool,
}

impl TailEstimate {
    pub fn closed(value: f64) -> Self {
        TailEstimate {
            value,
            quad_error: 0.0,
            tail_bound: 0.0,
            closed_form: true,
        }
    }

    pub fn total_error(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    /// The parent already met its tolerance.
    settled: bool,
}

fn checked(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { t: x, value: v })
    }
}

/// Adaptive Simpson quadrature on `[a, b]`.
///
/// The interval is first cut into 8 panels; each panel is bisected until the
/// Richardson difference `|S₂ − S₁|/15` meets its share of the tolerance
/// `max(abs_tol, rel_tol·∫|f|)` on two successive levels. A single agreement
/// can be coincidental where the fourth derivative changes sign.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!("non-finite integration bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    if b < a {
        let e = adaptive_simpson(f, b, a, rel_tol, abs_tol)?;
        return Ok(Estimate { value: -e.value, error: e.error });
    }
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let xs: Vec<f64> = (0..=2 * PANELS)
        .map(|i| if i == 2 * PANELS { b } else { a + 0.5 * h * i as f64 })
        .collect();
    let fs = xs.iter().map(|&x| checked(&f, x)).collect::<Result<Vec<f64>>>()?;
    let mut scale = 0.0;
    let mut stack = Vec::with_capacity(64);
    for p in 0..PANELS {
        let (i0, i1, i2) = (2 * p, 2 * p + 1, 2 * p + 2);
        let w = xs[i2] - xs[i0];
        let whole = w / 6.0 * (fs[i0] + 4.0 * fs[i1] + fs[i2]);
        scale += w / 6.0 * (fs[i0].abs() + 4.0 * fs[i1].abs() + fs[i2].abs());
        stack.push(Panel {
            a: xs[i0],
            b: xs[i2],
            fa: fs[i0],
            fm: fs[i1],
            fb: fs[i2],
            whole,
            eps: 0.0,
            depth: 0,
            settled: false,
        });
    }
    let eps_total = abs_tol.max(rel_tol * scale);
    for p in stack.iter_mut() {
        p.eps = eps_total * (p.b - p.a) / (b - a);
    }
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = checked(&f, lm)?;
        let frm = checked(&f, rm)?;
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let diff = left + right - p.whole;
        let ok = diff.abs() <= 15.0 * p.eps;
        if (ok && p.settled) || p.depth >= MAX_DEPTH || m <= p.a || m >= p.b {
            value.add(left + right + diff / 15.0);
            error += diff.abs() / 15.0;
        } else {
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                eps: 0.5 * p.eps,
                depth: p.depth + 1,
                settled: ok,
            });
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                eps: 0.5 * p.eps,
                depth: p.depth + 1,
                settled: ok,
            });
        }
    }
    let v = value.value();
    Ok(Estimate {
        value: v,
        error: error + 4.0 * f64::EPSILON * scale,
    })
}

/// `∫_a^b f(t) dt` computed as `∫ f(e^y) e^y dy` (requires `0 < a ≤ b`).
pub fn integrate_log(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Estimate> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!("log-variable quadrature needs positive bounds, got [{a}, {b}]")));
    }
    adaptive_simpson(
        |y| {
            let t = y.exp();
            f(t) * t
        },
        a.ln(),
        b.ln(),
        rel_tol,
        abs_tol,
    )
}

/// `∫_t^∞ f` by log-variable quadrature on `[t, cutoff]` plus the certified
/// remainder `K·cutoff^(1−ρ)/(ρ−1)` from `bound`.
///
/// The cutoff is pushed outward (up to `1e300`) until the remainder is
/// negligible next to the requested tolerance.
pub fn integrate_tail(
    f: impl Fn(f64) -> f64,
    t: f64,
    cutoff: f64,
    bound: Option<PowerBound>,
    rel_tol: f64,
) -> Result<TailEstimate> {
    let bound = bound.ok_or_else(|| Error::TailUnavailable(format!("no decay metadata for the tail from t = {t}")))?;
    if bound.is_zero() {
        return Ok(TailEstimate::closed(0.0));
    }
    if !(bound.rho > 1.0) {
        return Err(Error::TailUnavailable(format!(
            "decay exponent ρ = {} ≤ 1, ∫_t^∞ may diverge",
            bound.rho
        )));
    }
    let mut cut = cutoff.max(t);
    let head = integrate_log(&f, t, cut, rel_tol, 0.0)?;
    let mut value = head.value;
    let mut quad_error = head.error;
    let mut rem = bound.tail_integral(cut.max(bound.from)).unwrap_or(f64::INFINITY);
    let target = (rel_tol * 1e-2 * value.abs()).max(f64::MIN_POSITIVE);
    while rem > target && cut < 1e300 {
        let next = (cut * 1e6).min(1e300);
        let piece = integrate_log(&f, cut, next, rel_tol, rel_tol * 1e-2 * value.abs())?;
        value += piece.value;
        quad_error += piece.error;
        cut = next;
        rem = bound.tail_integral(cut.max(bound.from)).unwrap_or(f64::INFINITY);
    }
    Ok(TailEstimate {
        value,
        quad_error,
        tail_bound: rem,
        closed_form: false,
    })
}

/// Log-spaced nodes `t0 = t_1 < … < t_N = T_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    log_step: f64,
}

impl Grid {
    /// Geometric nodes with no size policy (`n ≥ 2`).
    pub fn geometric(t0: f64, t_max: f64, n: usize) -> Result<Grid> {
        if !(t0 > 0.0 && t_max > t0 && t0.is_finite() && t_max.is_finite()) {
            return Err(Error::invalid(format!("degenerate grid range [{t0}, {t_max}]")));
        }
        if n < 2 {
            return Err(Error::invalid("grid needs at least 2 nodes"));
        }
        let log_step = (t_max / t0).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| t0 * (log_step * i as f64).exp()).collect();
        nodes[0] = t0;
        nodes[n - 1] = t_max;
        Ok(Grid { nodes, log_step })
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Spacing in `ln t`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn ratio(&self) -> f64 {
        self.log_step.exp()
    }

    /// Index of the first node `≥ t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        self.nodes.partition_point(|&x| x < t).min(self.len() - 1)
    }

    /// Integrals over each cell `[t_i, t_{i+1}]` of the sampled function,
    /// using the four-point cubic rule in `y = ln t` (exact for cubics in `y`),
    /// plus a per-cell error estimate from fourth differences.
    pub fn cell_integrals(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        assert_eq!(values.len(), n, "series length must match the grid");
        assert!(n >= 4, "cell integrals need at least 4 nodes");
        let h = self.log_step;
        let w: Vec<f64> = values.iter().zip(&self.nodes).map(|(v, t)| v * t).collect();
        let mut cells = vec![0.0; n - 1];
        for i in 0..n - 1 {
            cells[i] = if i == 0 {
                h / 24.0 * (9.0 * w[0] + 19.0 * w[1] - 5.0 * w[2] + w[3])
            } else if i == n - 2 {
                h / 24.0 * (w[n - 4] - 5.0 * w[n - 3] + 19.0 * w[n - 2] + 9.0 * w[n - 1])
            } else {
                h / 24.0 * (-w[i - 1] + 13.0 * w[i] + 13.0 * w[i + 1] - w[i + 2])
            };
        }
        let errs = if n >= 5 {
            let d4: Vec<f64> = (0..n - 4)
                .map(|j| (w[j] - 4.0 * w[j + 1] + 6.0 * w[j + 2] - 4.0 * w[j + 3] + w[j + 4]).abs())
                .collect();
            (0..n - 1)
                .map(|i| {
                    let j = i.saturating_sub(2).min(d4.len() - 1);
                    let j2 = (j + 1).min(d4.len() - 1);
                    let d = d4[j].max(d4[j2]);
                    11.0 / 720.0 * h * d + f64::EPSILON * cells[i].abs()
                })
                .collect()
        } else {
            cells.iter().map(|c| 1e-8 * c.abs()).collect()
        };
        (cells, errs)
    }

    /// `∫_{t0}^{t_i}` at every node with accumulated error estimates.
    pub fn cumulative_from_start(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (cells, errs) = self.cell_integrals(values);
        let mut out = Vec::with_capacity(self.len());
        let mut err_out = Vec::with_capacity(self.len());
        let mut acc = CompensatedSum::new();
        let mut e = 0.0;
        out.push(0.0);
        err_out.push(0.0);
        for (c, ce) in cells.iter().zip(&errs) {
            acc.add(*c);
            e += ce;
            out.push(acc.value());
            err_out.push(e);
        }
        (out, err_out)
    }

    /// `∫_{t_i}^{T_max}` at every node with accumulated error estimates.
    pub fn cumulative_to_end(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (cells, errs) = self.cell_integrals(values);
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut err_out = vec![0.0; n];
        let mut acc = CompensatedSum::new();
        let mut e = 0.0;
        for i in (0..n - 1).rev() {
            acc.add(cells[i]);
            e += errs[i];
            out[i] = acc.value();
            err_out[i] = e;
        }
        (out, err_out)
    }
}

/// Production grid: geometric, `N ≥ 64`, `T_max ≥ 100·t0`.
pub fn build_grid(t0: f64, t_max: f64, n: usize) -> Result<Grid> {
    if n < 64 {
        return Err(Error::invalid(format!("grid needs N ≥ 64 nodes, got {n}")));
    }
    if !(t_max >= 100.0 * t0) {
        return Err(Error::invalid(format!("T_max = {t_max} must be at least 100·t0 = {}", 100.0 * t0)));
    }
    Grid::geometric(t0, t_max, n)
}

/// Values sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridSeries {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub tag: &'static str,
}

impl GridSeries {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, tag: &'static str) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "series `{tag}` has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: grid.nodes()[i],
                value: values[i],
            });
        }
        Ok(GridSeries { grid, values, tag })
    }

    pub fn from_fn(grid: Arc<Grid>, tag: &'static str, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<Self> {
        let values = crate::par::map_slice(grid.nodes(), |&t| f(t));
        GridSeries::new(grid, values, tag)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Cubic Lagrange interpolation in `ln t` through the four nearest nodes.
    pub fn interp(&self, t: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let y = (t / g.t0()).ln() / g.log_step();
        let i = (y.floor().max(0.0) as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n.saturating_sub(4));
        let ys: [f64; 4] = std::array::from_fn(|k| (start + k) as f64);
        let mut acc = 0.0;
        for k in 0..4.min(n) {
            let mut l = 1.0;
            for j in 0..4.min(n) {
                if j != k {
                    l *= (y - ys[j]) / (ys[k] - ys[j]);
                }
            }
            acc += l * self.values[start + k];
        }
        acc
    }

    /// `∫_{t1}^{t2}` of the interpolated series by adaptive quadrature.
    pub fn integrate_segment(&self, t1: f64, t2: f64, rel_tol: f64) -> Result<Estimate> {
        integrate_segment(|t| self.interp(t), t1, t2, rel_tol)
    }
}

/// Finite integral on `[t1, t2]` (Simpson-type adaptive refinement).
pub fn integrate_segment(f: impl Fn(f64) -> f64, t1: f64, t2: f64, rel_tol: f64) -> Result<Estimate> {
    if t1 > t2 {
        return Err(Error::invalid(format!("segment [{t1}, {t2}] is reversed")));
    }
    if t1 > 0.0 {
        integrate_log(f, t1, t2, rel_tol, 0.0)
    } else {
        adaptive_simpson(f, t1, t2, rel_tol, 0.0)
    }
}

/// `u(t_i) = u0·exp(∫_{t0}^{t_i} b)` by cumulative grid quadrature.
pub fn cumulative_exp_integral(b: &GridSeries, u0: f64) -> Result<GridSeries> {
    let (cum, _) = b.grid.cumulative_from_start(&b.values);
    let mut u = Vec::with_capacity(cum.len());
    for (i, c) in cum.iter().enumerate() {
        let v = u0 * c.exp();
        if !v.is_finite() {
            return Err(Error::Overflow { t: b.nodes()[i] });
        }
        u.push(v);
    }
    GridSeries::new(b.grid.clone(), u, "u")
}

/// Fornberg weights for the `m`-th derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative of order `deriv` on nonuniform nodes with `width`-point
/// stencils: centred in the interior, shifted at the ends. The second vector
/// flags nodes whose stencil is not centred (the low-order region).
pub fn differentiate(xs: &[f64], ys: &[f64], deriv: usize, width: usize) -> (Vec<f64>, Vec<bool>) {
    differentiate_split(xs, ys, None, deriv, width)
}

/// As [`differentiate`] for values given as unevaluated sums `hi + lo`.
pub fn differentiate_split(
    xs: &[f64],
    hi: &[f64],
    lo: Option<&[f64]>,
    deriv: usize,
    width: usize,
) -> (Vec<f64>, Vec<bool>) {
    let n = xs.len();
    assert!(width >= deriv + 1 && n >= width, "stencil wider than data");
    let half = width / 2;
    crate::par::map_indices(n, |i| {
        let start = i.saturating_sub(half).min(n - width);
        let w = fd_weights(xs[i], &xs[start..start + width], deriv);
        // weights of a derivative sum to zero, so differencing against y_i
        // keeps constants exact and cancels roundoff in the sum
        let centre = |v: &[f64]| if deriv > 0 { v[i] } else { 0.0 };
        let (c_hi, c_lo) = (centre(hi), lo.map(centre).unwrap_or(0.0));
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let j = start + k;
            let d_lo = lo.map(|l| l[j] - c_lo).unwrap_or(0.0);
            acc += wk * ((hi[j] - c_hi) + d_lo);
        }
        (acc, start + half != i)
    })
    .into_iter()
    .unzip()
}

/// Three-point nonuniform second derivative; endpoint values are one-sided
/// and flagged.
pub fn second_derivative(u: &GridSeries) -> Result<(GridSeries, Vec<bool>)> {
    if u.len() < 3 {
        return Err(Error::invalid("second derivative needs at least 3 nodes"));
    }
    let (d2, low) = differentiate(u.nodes(), &u.values, 2, 3);
    Ok((GridSeries::new(u.grid.clone(), d2, "u''")?, low))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometric_grid_examples() {
        let g = Grid::geometric(1.0, 100.0, 3).unwrap();
        assert_eq!(g.nodes()[0], 1.0);
        assert_relative_eq!(g.nodes()[1], 10.0, max_relative = 1e-14);
        assert_eq!(g.nodes()[2], 100.0);
        let g = Grid::geometric(2.0, 2e6, 7).unwrap();
        for w in g.nodes().windows(2) {
            assert_relative_eq!(w[1] / w[0], 10.0, max_relative = 1e-12);
        }
        assert!(build_grid(1.0, 1e6, 63).is_err());
        assert!(build_grid(1.0, 50.0, 128).is_err());
        assert!(Grid::geometric(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn simpson_segment_values() {
        // ∫_1^2 1/(8s²) ds = 1/16
        let e = integrate_segment(|s| 1.0 / (8.0 * s * s), 1.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(e.value, 0.0625, max_relative = 1e-12);
        assert!(e.error <= 1e-12);
        let z = integrate_segment(|_| 0.0, 3.0, 7.0, 1e-12).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn simpson_reproduces_cubics() {
        let e = adaptive_simpson(|x| 2.0 * x * x * x - x + 3.0, -1.0, 2.0, 1e-14, 0.0).unwrap();
        // ∫ = [x⁴/2 − x²/2 + 3x] = (8 − 2 + 6) − (0.5 − 0.5 − 3) = 15
        assert_relative_eq!(e.value, 15.0, max_relative = 1e-14);
    }

    #[test]
    fn oscillating_panel_is_not_accepted_early() {
        // sin(kx)/x + 1/x² on [a, c]; reference Si(kx) − 1/x at 40 digits
        let (a, c, k) = (0.6868789096843317, 57.0838903910641, 1.0017744224766176);
        let e = integrate_log(|x: f64| (k * x).sin() / x + 1.0 / (x * x), a, c, 1e-13, 0.0).unwrap();
        assert!((e.value - 2.3246506685092602).abs() <= 1e-14 + e.error, "{e:?}");
    }

    #[test]
    fn tail_of_inverse_square() {
        let pb = PowerBound::monomial(0.125, -2.0, 1.0);
        let e = integrate_tail(|s| 0.125 / (s * s), 1.0, 1e6, Some(pb), 1e-12).unwrap();
        assert_relative_eq!(e.value, 0.125, max_relative = 1e-10);
        assert!(e.tail_bound < 1e-13);
        let z = integrate_tail(|_| 0.0, 1.0, 1e6, Some(PowerBound::zero(1.0)), 1e-12).unwrap();
        assert_eq!((z.value, z.tail_bound), (0.0, 0.0));
        assert!(integrate_tail(|s| 1.0 / s, 1.0, 1e6, Some(PowerBound::monomial(1.0, -1.0, 1.0)), 1e-12).is_err());
        assert!(integrate_tail(|s| 1.0 / s, 1.0, 1e6, None, 1e-12).is_err());
    }

    #[test]
    fn cumulative_exp_matches_power_law() {
        let g = Arc::new(Grid::geometric(1.0, 16.0, 257).unwrap());
        let b = GridSeries::from_fn(g.clone(), "b", |t| 0.5 / t).unwrap();
        let u = cumulative_exp_integral(&b, 1.0).unwrap();
        let i4 = g.index_at_or_after(4.0);
        assert_relative_eq!(g.nodes()[i4], 4.0, max_relative = 1e-12);
        assert_relative_eq!(u.values[i4], 2.0, max_relative = 1e-12);
        let b = GridSeries::from_fn(g.clone(), "b", |t| 0.5 / t).unwrap();
        let u = cumulative_exp_integral(&b, 3.0).unwrap();
        let i9 = g.len() - 1;
        assert_relative_eq!(u.values[i9], 3.0 * 4.0, max_relative = 1e-12);
        let zero = GridSeries::from_fn(g.clone(), "b", |_| 0.0).unwrap();
        let u = cumulative_exp_integral(&zero, 1.0).unwrap();
        assert!(u.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn second_derivative_quadratic_and_constant() {
        let g = Arc::new(Grid::geometric(1.0, 100.0, 64).unwrap());
        let u = GridSeries::from_fn(g.clone(), "u", |t| t * t).unwrap();
        let (d2, low) = second_derivative(&u).unwrap();
        for (v, l) in d2.values.iter().zip(&low) {
            assert!((v - 2.0).abs() < 1e-8, "{v} low={l}");
        }
        assert!(low[0] && low[63] && !low[1]);
        let c = GridSeries::from_fn(g, "u", |_| 7.0).unwrap();
        let (d2, _) = second_derivative(&c).unwrap();
        assert!(d2.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn interpolation_is_fourth_order_in_log() {
        let g = Arc::new(Grid::geometric(1.0, 1e3, 400).unwrap());
        let s = GridSeries::from_fn(g, "f", |t| t.powf(-0.7)).unwrap();
        for t in [1.0001, 3.3, 77.7, 999.0] {
            assert_relative_eq!(s.interp(t), t.powf(-0.7), max_relative = 1e-9);
        }
    }
}
