//! Pattern functions `f_nm(x)`: the Fock-basis matrix elements of the
//! homodyne sampling operator for perfect detection,
//! `<n| K(x, phi) |m> = f_nm(x) e^{i(n-m) phi}`.
//!
//! Three routes are provided:
//!
//! * [`pattern_integral`] integrates the defining y-integral
//!   `f_nm(x) = (1/2pi) \int dy |y| e^{-ixy} <n| e^{iy x_hat} |m>`
//!   using the closed-form displacement matrix element (Gaussian times a
//!   generalized Laguerre polynomial). It has no free normalization and is the
//!   oracle for the other two.
//! * [`pattern_product`] evaluates `f_nm = d/dx [psi_n phi_m]` (`m >= n`) with
//!   the regular solution `psi_n` and the irregular solution `phi_m` of the
//!   oscillator equation. `phi_m` is odd/even opposite to `psi_m` and fixed by
//!   the Wronskian `psi_m phi_m' - psi_m' phi_m = 2/pi`.
//! * [`pattern_wkb`] is the semiclassical large-order form inside the
//!   classically allowed region.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::error::{Error, Result};
use crate::fock::{hermite_functions_with_derivative, QuadratureGrid};
use crate::quadrature::{integrate, QuadratureOptions};

/// Wronskian `psi_m phi_m' - psi_m' phi_m` of the regular and irregular
/// solutions. Equal to `f_00(0)`, which the oracle reproduces to 1e-10.
pub const WRONSKIAN: f64 = 2.0 / PI;

/// Relative Wronskian drift tolerated by [`pattern_product`].
pub const WRONSKIAN_TOLERANCE: f64 = 1e-6;

/// Largest `|x|` for the product route; beyond it `phi_m ~ e^{x^2/2}`
/// approaches the range of `f64`.
pub const X_LIMIT: f64 = 30.0;

fn check_x(x: f64) -> Result<()> {
    if !(x.abs() <= X_LIMIT) {
        return Err(Error::DomainMismatch { kind: "quadrature", value: x, lo: -X_LIMIT, hi: X_LIMIT });
    }
    Ok(())
}

/// Version tag of the table algorithms; part of every cache header.
pub const ALGORITHM_VERSION: &str = "product-taylor-v1;wkb-v1";

fn check_s(s: f64) -> Result<()> {
    if s != 0.0 {
        return Err(Error::UnsupportedS(s));
    }
    Ok(())
}

/// Normalized Laguerre functions
/// `L_k(t) = sqrt(k!/(k+d)!) t^{d/2} e^{-t/2} L_k^{(d)}(t)` for `k = 0..=k_max`,
/// bounded by 1 in magnitude. For `n = k + d` they are the magnitudes of the
/// displacement matrix elements `<n|D(beta)|k>` at `t = |beta|^2`.
pub fn laguerre_functions(k_max: usize, d: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let g0 = if t == 0.0 {
        if d == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        let ln_fact: f64 = (1..=d).map(|k| (k as f64).ln()).sum();
        (0.5 * d as f64 * t.ln() - 0.5 * t - 0.5 * ln_fact).exp()
    };
    out.push(g0);
    if k_max == 0 {
        return out;
    }
    let df = d as f64;
    let mut prev = 0.0;
    let mut cur = g0;
    for k in 0..k_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + df - t) * cur - (kf * (kf + df)).sqrt() * prev)
            / ((kf + 1.0) * (kf + 1.0 + df)).sqrt();
        out.push(next);
        prev = cur;
        cur = next;
    }
    out
}

/// Options for the oracle integral.
#[derive(Debug, Clone, Copy)]
pub struct IntegralOptions {
    /// Absolute error target for `f_nm`.
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_panels: 20_000 }
    }
}

/// `f_nm(x; s)` by adaptive quadrature of the y-integral. Only `s = 0` is
/// supported.
pub fn pattern_integral(n: usize, m: usize, x: f64, s: f64) -> Result<f64> {
    pattern_integral_with(n, m, x, s, IntegralOptions::default())
}

pub fn pattern_integral_with(
    n: usize,
    m: usize,
    x: f64,
    s: f64,
    opts: IntegralOptions,
) -> Result<f64> {
    check_s(s)?;
    let (lo, hi) = (n.min(m), n.max(m));
    let d = hi - lo;
    // <hi| e^{iy x_hat} |lo> = i^d L_lo(y^2/2); folding y -> -y leaves a real
    // cosine (d even) or sine (d odd) transform over y > 0.
    let sign = if d % 4 == 0 || d % 4 == 1 { 1.0 } else { -1.0 };
    let odd = d % 2 == 1;
    let integrand = |y: f64| {
        let g = laguerre_functions(lo, d, 0.5 * y * y)[lo];
        let trig = if odd { (x * y).sin() } else { (x * y).cos() };
        sign * y * g * trig
    };
    let beta_max = ((hi + 1) as f64).sqrt() + ((lo + 1) as f64).sqrt() + 8.0;
    let y_max = std::f64::consts::SQRT_2 * beta_max;
    let freq = x.abs() + 2.0 * ((2 * hi + 1) as f64).sqrt();
    let panels = (y_max * freq / PI).ceil() as usize + 4;
    let r = integrate(
        integrand,
        0.0,
        y_max,
        QuadratureOptions {
            abs_tol: opts.abs_tol * PI,
            rel_tol: 0.0,
            initial_panels: panels,
            max_panels: opts.max_panels,
        },
    )?;
    Ok(r.value / PI)
}

/// One Taylor-series step of `y'' = (x^2 - c) y` from `x0` to `x0 + h`.
/// The coefficient recurrence is exact for the polynomial potential, so the
/// step is accurate to rounding for `h sqrt|x0^2 - c|` of order one.
fn taylor_step(y: f64, dy: f64, x0: f64, h: f64, c: f64) -> (f64, f64) {
    let q = (x0 * x0 - c) * h * h;
    let l1 = 2.0 * x0 * h * h * h;
    let l2 = h * h * h * h;
    // b_k = a_k h^k
    let (mut bm2, mut bm1, mut b0, mut b1) = (0.0, 0.0, y, dy * h);
    let mut val = b0 + b1;
    let mut der = b1;
    let mut k = 0usize;
    loop {
        // b_{k+2} from b_k, b_{k-1}, b_{k-2}
        let kf = k as f64;
        let b2 = (q * b0 + l1 * bm1 + l2 * bm2) / ((kf + 2.0) * (kf + 1.0));
        val += b2;
        der += (kf + 2.0) * b2;
        let scale = val.abs().max(der.abs()).max(f64::MIN_POSITIVE);
        if k > 4 && b2.abs() + b1.abs() + b0.abs() <= 1e-18 * scale {
            break;
        }
        if k > 400 {
            break;
        }
        bm2 = bm1;
        bm1 = b0;
        b0 = b1;
        b1 = b2;
        k += 1;
    }
    (val, der / h)
}

fn ode_step_size(x: f64, c: f64) -> f64 {
    (0.8 / ((x * x - c).abs() + 1.0).sqrt()).min(0.25)
}

/// Integrates `y'' = (x^2 - c) y` from `(x0, y, dy)` to `x1 >= x0`.
fn propagate(mut y: f64, mut dy: f64, x0: f64, x1: f64, c: f64) -> (f64, f64) {
    let mut x = x0;
    while x < x1 {
        let h = ode_step_size(x.max(x1.min(x + 0.25)), c).min(x1 - x);
        let (ny, ndy) = taylor_step(y, dy, x, h, c);
        y = ny;
        dy = ndy;
        x = if x1 - x <= h { x1 } else { x + h };
    }
    (y, dy)
}

/// Initial data at `x = 0` of the irregular solutions `phi_0..phi_{n_max}`.
fn irregular_initial_data(n_max: usize) -> Vec<(f64, f64)> {
    let (psi, dpsi) = hermite_functions_with_derivative(n_max, 0.0);
    (0..=n_max)
        .map(|m| {
            if m % 2 == 0 {
                // psi_m even, phi_m odd: W = psi_m(0) phi_m'(0)
                (0.0, WRONSKIAN / psi[m])
            } else {
                // psi_m odd, phi_m even: W = -psi_m'(0) phi_m(0)
                (-WRONSKIAN / dpsi[m], 0.0)
            }
        })
        .collect()
}

/// Irregular solution `phi_m` and its derivative at `x`, by outward
/// integration from the origin (the growing solution is the stable
/// direction). Negative `x` follows from parity `(-1)^{m+1}`.
pub fn irregular_solution(m: usize, x: f64) -> (f64, f64) {
    let (y0, dy0) = irregular_initial_data(m)[m];
    let (y, dy) = propagate(y0, dy0, 0.0, x.abs(), (2 * m + 1) as f64);
    reflect(m, x, y, dy)
}

fn reflect(m: usize, x: f64, y: f64, dy: f64) -> (f64, f64) {
    if x < 0.0 {
        // phi_m has parity (-1)^{m+1}, its derivative (-1)^m
        if m % 2 == 0 {
            (-y, dy)
        } else {
            (y, -dy)
        }
    } else {
        (y, dy)
    }
}

/// `f_nm(x)` from the product of regular and irregular solutions.
pub fn pattern_product(n: usize, m: usize, x: f64) -> Result<f64> {
    check_x(x)?;
    let (lo, hi) = (n.min(m), n.max(m));
    let (psi, dpsi) = hermite_functions_with_derivative(hi, x);
    let (phi, dphi) = irregular_solution(hi, x);
    let w = psi[hi] * dphi - dpsi[hi] * phi;
    if ((w - WRONSKIAN) / WRONSKIAN).abs() > WRONSKIAN_TOLERANCE {
        return Err(Error::NumericalInstability(format!(
            "Wronskian of order {hi} drifted to {w} at x = {x}"
        )));
    }
    Ok(dpsi[lo] * phi + psi[lo] * dphi)
}

/// Turning point, classical momentum and action of order `n` at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalParams {
    pub n: usize,
    pub x: f64,
    /// `a_n = sqrt(2n + 1)`.
    pub turning_point: f64,
    /// `p_n(x) = sqrt(2n + 1 - x^2)`.
    pub momentum: f64,
    /// `S_n(x) = \int_{a_n}^x p_n`, in closed form
    /// `[x p_n + a_n^2 asin(x / a_n)] / 2 - pi a_n^2 / 4`.
    pub action: f64,
}

impl SemiclassicalParams {
    pub fn new(n: usize, x: f64) -> Result<Self> {
        let a2 = (2 * n + 1) as f64;
        let a = a2.sqrt();
        if x.abs() > a {
            return Err(Error::OutsideAllowedRegion { x, turning_point: a });
        }
        let p = (a2 - x * x).max(0.0).sqrt();
        let ratio = (x / a).clamp(-1.0, 1.0);
        let action = 0.5 * (x * p + a2 * ratio.asin()) - 0.5 * a2 * FRAC_PI_2;
        Ok(Self { n, x, turning_point: a, momentum: p, action })
    }
}

/// Semiclassical `f_nm(x)`, valid for `|x| < a_min(n,m)`.
pub fn pattern_wkb(n: usize, m: usize, x: f64) -> Result<f64> {
    let (lo, hi) = (n.min(m), n.max(m));
    let a = SemiclassicalParams::new(lo, x)?;
    if x.abs() >= a.turning_point {
        return Err(Error::OutsideAllowedRegion { x, turning_point: a.turning_point });
    }
    let b = SemiclassicalParams::new(hi, x)?;
    let (pn, pm) = (a.momentum, b.momentum);
    let (sn, sm) = (a.action + FRAC_PI_4, b.action + FRAC_PI_4);
    Ok(2.0 / PI / (pn * pm).sqrt() * (pm * sn.cos() * sm.cos() - pn * sn.sin() * sm.sin()))
}

/// Regular and irregular solutions with derivatives for all orders
/// `0..=n_max` on a set of points.
#[derive(Debug, Clone)]
pub struct SolutionBasis {
    n_max: usize,
    points: Vec<f64>,
    // each row-major [point][order]
    psi: Vec<f64>,
    dpsi: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

impl SolutionBasis {
    pub fn new(n_max: usize, points: &[f64]) -> Result<Self> {
        for &x in points {
            check_x(x)?;
        }
        let np = points.len();
        let stride = n_max + 1;
        let mut psi = vec![0.0; np * stride];
        let mut dpsi = vec![0.0; np * stride];
        for (i, &x) in points.iter().enumerate() {
            let (p, dp) = hermite_functions_with_derivative(n_max, x);
            psi[i * stride..(i + 1) * stride].copy_from_slice(&p);
            dpsi[i * stride..(i + 1) * stride].copy_from_slice(&dp);
        }

        // march each irregular solution outward through the sorted |x|
        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by(|&a, &b| points[a].abs().total_cmp(&points[b].abs()));
        let init = irregular_initial_data(n_max);
        let columns: Vec<Vec<(f64, f64)>> = (0..=n_max)
            .into_par_iter()
            .map(|m| {
                let c = (2 * m + 1) as f64;
                let (mut y, mut dy) = init[m];
                let mut at = 0.0;
                let mut col = vec![(0.0, 0.0); np];
                for &i in &order {
                    let ax = points[i].abs();
                    (y, dy) = propagate(y, dy, at, ax, c);
                    at = ax;
                    col[i] = reflect(m, points[i], y, dy);
                }
                col
            })
            .collect();
        let mut phi = vec![0.0; np * stride];
        let mut dphi = vec![0.0; np * stride];
        for (m, col) in columns.into_iter().enumerate() {
            for (i, (y, dy)) in col.into_iter().enumerate() {
                phi[i * stride + m] = y;
                dphi[i * stride + m] = dy;
            }
        }
        let basis = Self { n_max, points: points.to_vec(), psi, dpsi, phi, dphi };
        basis.check_wronskian()?;
        Ok(basis)
    }

    fn check_wronskian(&self) -> Result<()> {
        let stride = self.n_max + 1;
        for i in 0..self.points.len() {
            for m in 0..stride {
                let k = i * stride + m;
                let w = self.psi[k] * self.dphi[k] - self.dpsi[k] * self.phi[k];
                if !(((w - WRONSKIAN) / WRONSKIAN).abs() <= WRONSKIAN_TOLERANCE) {
                    return Err(Error::NumericalInstability(format!(
                        "Wronskian of order {m} drifted to {w} at x = {}",
                        self.points[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `(psi, psi', phi, phi')` for all orders at point `i`.
    pub fn at(&self, i: usize) -> (&[f64], &[f64], &[f64], &[f64]) {
        let s = self.n_max + 1;
        let r = i * s..(i + 1) * s;
        (&self.psi[r.clone()], &self.dpsi[r.clone()], &self.phi[r.clone()], &self.dphi[r])
    }

    pub fn wronskian(&self, m: usize, i: usize) -> f64 {
        let (p, dp, q, dq) = self.at(i);
        p[m] * dq[m] - dp[m] * q[m]
    }

    /// `f_nm` at point `i`.
    pub fn pattern(&self, n: usize, m: usize, i: usize) -> f64 {
        let (lo, hi) = (n.min(m), n.max(m));
        let (p, dp, q, dq) = self.at(i);
        dp[lo] * q[hi] + p[lo] * dq[hi]
    }
}

/// Index of `(n, m)`, `n <= m`, in the packed upper triangle.
#[inline]
pub fn packed_index(n: usize, m: usize) -> usize {
    let (lo, hi) = (n.min(m), n.max(m));
    hi * (hi + 1) / 2 + lo
}

pub fn packed_len(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

/// Anything that can provide the packed row `f_nm(x_i)`, `n <= m <= N`, for
/// each point of a grid.
pub trait PatternSource: Sync {
    fn n_max(&self) -> usize;
    fn points(&self) -> &[f64];
    /// Fills `out` (length [`packed_len`]) with the row at point `i`.
    fn fill_row(&self, i: usize, out: &mut [f64]);
}

impl PatternSource for SolutionBasis {
    fn n_max(&self) -> usize {
        self.n_max
    }

    fn points(&self) -> &[f64] {
        &self.points
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let (p, dp, q, dq) = self.at(i);
        let mut k = 0;
        for m in 0..=self.n_max {
            for n in 0..=m {
                out[k] = dp[n] * q[m] + p[n] * dq[m];
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternAlgorithm {
    /// Regular/irregular product at every grid point.
    Product,
    /// Semiclassical form inside the allowed region, product outside.
    Wkb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternTableOptions {
    /// Entries with both orders at or above this threshold use the WKB form
    /// inside the allowed region. `None` disables the fallback.
    pub wkb_threshold: Option<usize>,
}

impl Default for PatternTableOptions {
    fn default() -> Self {
        Self { wkb_threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTableParams {
    pub n_max: usize,
    pub grid: QuadratureGrid,
    pub s: f64,
    pub options: PatternTableOptions,
    pub algorithm_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatternTableHeader {
    kind: String,
    params: PatternTableParams,
    algorithms: Vec<PatternAlgorithm>,
    checksum: String,
}

/// `f_nm(x)` for `0 <= n, m <= N` on a quadrature grid. Only the upper
/// triangle is stored; lookups mirror it, so `f_nm == f_mn` exactly.
#[derive(Debug, Clone)]
pub struct PatternTable {
    params: PatternTableParams,
    points: Vec<f64>,
    // row-major [x_index][packed (n, m)]
    values: Vec<f64>,
    algorithms: Vec<PatternAlgorithm>,
    checksum: String,
}

impl PatternTable {
    pub fn build(n_max: usize, grid: QuadratureGrid, options: PatternTableOptions) -> Result<Self> {
        let points = grid.points();
        let basis = SolutionBasis::new(n_max, &points)?;
        let len = packed_len(n_max);
        let mut algorithms = vec![PatternAlgorithm::Product; len];
        if let Some(t) = options.wkb_threshold {
            for m in t..=n_max {
                for n in t..=m {
                    algorithms[packed_index(n, m)] = PatternAlgorithm::Wkb;
                }
            }
        }
        let rows: Vec<Vec<f64>> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; len];
                basis.fill_row(i, &mut row);
                if options.wkb_threshold.is_some() {
                    for m in 0..=n_max {
                        for n in 0..=m {
                            let k = packed_index(n, m);
                            if algorithms[k] == PatternAlgorithm::Wkb {
                                if let Ok(v) = pattern_wkb(n, m, points[i]) {
                                    row[k] = v;
                                }
                            }
                        }
                    }
                }
                row
            })
            .collect();
        let values: Vec<f64> = rows.concat();
        let params = PatternTableParams {
            n_max,
            grid,
            s: 0.0,
            options,
            algorithm_version: ALGORITHM_VERSION.to_string(),
        };
        let checksum = cache::content_checksum(&params, &values)?;
        Ok(Self { params, points, values, algorithms, checksum })
    }

    pub fn params(&self) -> &PatternTableParams {
        &self.params
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.params.grid
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn algorithm(&self, n: usize, m: usize) -> PatternAlgorithm {
        self.algorithms[packed_index(n, m)]
    }

    pub fn get(&self, n: usize, m: usize, ix: usize) -> f64 {
        self.values[ix * packed_len(self.params.n_max) + packed_index(n, m)]
    }

    pub fn row(&self, ix: usize) -> &[f64] {
        let len = packed_len(self.params.n_max);
        &self.values[ix * len..(ix + 1) * len]
    }

    /// Grid index of `x`, if `x` is (to rounding) a grid point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let g = &self.params.grid;
        let t = (x - g.x_min) / g.spacing();
        let i = t.round();
        if i < 0.0 || i as usize >= g.n_points {
            return None;
        }
        let i = i as usize;
        ((self.points[i] - x).abs() <= 1e-9 * g.spacing()).then_some(i)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = PatternTableHeader {
            kind: "pattern-table".into(),
            params: self.params.clone(),
            algorithms: self.algorithms.clone(),
            checksum: self.checksum.clone(),
        };
        cache::write_cache(path, &header, &self.values)
    }

    /// Loads a table and verifies both its checksum and that it was built
    /// with exactly `expected` parameters.
    pub fn load(path: &Path, expected: &PatternTableParams) -> Result<Self> {
        let (header, values): (PatternTableHeader, Vec<f64>) = cache::read_cache(path)?;
        if header.kind != "pattern-table" {
            return Err(Error::TableMismatch(format!("not a pattern table: {}", header.kind)));
        }
        if &header.params != expected {
            return Err(Error::TableMismatch(format!(
                "cached parameters {:?} differ from requested {:?}",
                header.params, expected
            )));
        }
        let found = cache::content_checksum(&header.params, &values)?;
        if found != header.checksum {
            return Err(Error::Checksum { expected: header.checksum, found });
        }
        if values.len() != packed_len(expected.n_max) * expected.grid.n_points {
            return Err(Error::Format("pattern table payload has the wrong size".into()));
        }
        Ok(Self {
            points: header.params.grid.points(),
            params: header.params,
            values,
            algorithms: header.algorithms,
            checksum: header.checksum,
        })
    }
}

impl PatternSource for PatternTable {
    fn n_max(&self) -> usize {
        self.params.n_max
    }

    fn points(&self) -> &[f64] {
        &self.points
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Dawson's integral by direct quadrature, for the closed form
    /// `f_00(x) = (2/pi)(1 - 2x D(x))`.
    fn dawson(x: f64) -> f64 {
        let r = integrate(
            |t: f64| (t * t - x * x).exp(),
            0.0,
            x,
            QuadratureOptions { abs_tol: 1e-13, ..Default::default() },
        )
        .unwrap();
        r.value
    }

    #[test]
    fn laguerre_functions_match_direct_formula() {
        // L_2^{(1)}(t) = (t^2 - 6t + 6)/2
        let t: f64 = 1.7;
        let g = laguerre_functions(2, 1, t);
        let direct = (2.0f64 / 6.0).sqrt() * t.sqrt() * (-t / 2.0).exp() * (t * t - 6.0 * t + 6.0) / 2.0;
        assert_abs_diff_eq!(g[2], direct, epsilon = 1e-14);
    }

    #[test]
    fn calibration_constant() {
        let f00 = pattern_integral_with(0, 0, 0.0, 0.0, IntegralOptions { abs_tol: 1e-12, ..Default::default() })
            .unwrap();
        assert_abs_diff_eq!(f00, WRONSKIAN, epsilon = 1e-10);
        assert_abs_diff_eq!(pattern_product(0, 0, 0.0).unwrap(), f00, epsilon = 1e-10);
    }

    #[test]
    fn f00_closed_form() {
        for x in [0.3, 1.0, 2.5, 4.0] {
            let expected = 2.0 / PI * (1.0 - 2.0 * x * dawson(x));
            assert_abs_diff_eq!(pattern_integral(0, 0, x, 0.0).unwrap(), expected, epsilon = 1e-9);
            assert_abs_diff_eq!(pattern_product(0, 0, x).unwrap(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn f01_vanishes_at_origin() {
        assert_abs_diff_eq!(pattern_integral(0, 1, 0.0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(pattern_product(0, 1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn far_tail_decays_as_inverse_square() {
        // f_00(x) ~ -(1/pi)(1/x^2 + 3/(2x^4) + 15/(4x^6)): the tail is algebraic, not exponential
        for x in [8.0, -8.0] {
            let f = pattern_integral(0, 0, x, 0.0).unwrap();
            assert!(f.abs() < 1e-2);
            assert_abs_diff_eq!(f * x * x, -1.0 / PI * (1.0 + 1.5 / (x * x) + 3.75 / x.powi(4)), epsilon = 2e-4);
        }
    }

    #[test]
    fn rejects_imperfect_detection() {
        assert!(matches!(pattern_integral(0, 0, 0.0, -0.25), Err(Error::UnsupportedS(_))));
    }

    #[test]
    fn product_matches_oracle_small_orders() {
        for n in 0..=4 {
            for m in 0..=4 {
                for x in [-3.1, -0.4, 0.0, 1.3, 5.2] {
                    let a = pattern_product(n, m, x).unwrap();
                    let b = pattern_integral(n, m, x, 0.0).unwrap();
                    assert!((a - b).abs() < 1e-8, "n={n} m={m} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn irregular_solution_parity_and_wronskian() {
        for m in [0usize, 1, 6, 17, 40] {
            for x in [0.2, 1.5, 4.0, 9.0] {
                let (y, dy) = irregular_solution(m, x);
                let (ym, dym) = irregular_solution(m, -x);
                let s = if m % 2 == 0 { -1.0 } else { 1.0 };
                assert_eq!(ym, s * y);
                assert_eq!(dym, -s * dy);
                let (p, dp) = hermite_functions_with_derivative(m, x);
                let w = p[m] * dy - dp[m] * y;
                assert!(((w - WRONSKIAN) / WRONSKIAN).abs() < 1e-8, "m={m} x={x} w={w}");
            }
        }
    }

    #[test]
    fn semiclassical_params() {
        let s = SemiclassicalParams::new(3, 7f64.sqrt()).unwrap();
        assert_abs_diff_eq!(s.action, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(SemiclassicalParams::new(0, 0.0).unwrap().momentum, 1.0);
        assert_abs_diff_eq!(
            SemiclassicalParams::new(5, 0.0).unwrap().action,
            -(5.5) * FRAC_PI_2,
            epsilon = 1e-12
        );
        assert!(matches!(pattern_wkb(2, 3, 3.0), Err(Error::OutsideAllowedRegion { .. })));
    }

    #[test]
    fn wkb_parity_at_origin() {
        // f_nn(0) ~ (2/pi)(-1)^n
        for n in [10usize, 11, 30] {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(pattern_wkb(n, n, 0.0).unwrap(), s * 2.0 / PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn basis_matches_pointwise_routes() {
        let grid = QuadratureGrid::symmetric(6.0, 49).unwrap();
        let pts = grid.points();
        let basis = SolutionBasis::new(12, &pts).unwrap();
        for (i, &x) in pts.iter().enumerate() {
            for (n, m) in [(0, 0), (3, 7), (12, 12), (5, 2)] {
                assert_abs_diff_eq!(basis.pattern(n, m, i), pattern_product(n, m, x).unwrap(), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn table_small() {
        let grid = QuadratureGrid::symmetric(2.0, 3).unwrap();
        let t = PatternTable::build(0, grid, PatternTableOptions::default()).unwrap();
        for (i, x) in grid.points().into_iter().enumerate() {
            assert_abs_diff_eq!(t.get(0, 0, i), pattern_integral(0, 0, x, 0.0).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn table_symmetry_determinism_and_cache() {
        let grid = QuadratureGrid::symmetric(5.0, 41).unwrap();
        let t = PatternTable::build(8, grid, PatternTableOptions::default()).unwrap();
        let mut max = 0.0f64;
        for i in 0..41 {
            for n in 0..=8 {
                for m in 0..=8 {
                    max = max.max((t.get(n, m, i) - t.get(m, n, i)).abs());
                }
            }
        }
        assert_eq!(max, 0.0);
        let t2 = PatternTable::build(8, grid, PatternTableOptions::default()).unwrap();
        assert_eq!(t.checksum(), t2.checksum());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        t.save(&path).unwrap();
        let loaded = PatternTable::load(&path, t.params()).unwrap();
        assert_eq!(loaded.values, t.values);
        let mut other = t.params().clone();
        other.n_max = 7;
        assert!(matches!(PatternTable::load(&path, &other), Err(Error::TableMismatch(_))));
        assert_eq!(t.index_of(grid.points()[7]), Some(7));
        assert_eq!(t.index_of(0.1), None);
    }

    #[test]
    fn wkb_fallback_is_tagged() {
        let grid = QuadratureGrid::symmetric(3.0, 7).unwrap();
        let opts = PatternTableOptions { wkb_threshold: Some(4) };
        let t = PatternTable::build(5, grid, opts).unwrap();
        assert_eq!(t.algorithm(4, 5), PatternAlgorithm::Wkb);
        assert_eq!(t.algorithm(3, 5), PatternAlgorithm::Product);
        // x = 0 lies inside the allowed region
        assert_eq!(t.get(4, 4, 3), pattern_wkb(4, 4, 0.0).unwrap());
        // x = 3 lies outside for order 4 (a_4 = 3), product is kept
        assert_abs_diff_eq!(t.get(4, 4, 6), pattern_product(4, 4, 3.0).unwrap(), epsilon = 1e-12);
    }
}
