//! Numerical integration: globally adaptive Gauss-Kronrod (21-point rule)
//! for the oracle integrals, and the composite trapezoid rule used for all
//! normalization integrals on uniform grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600732106734,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Result of one 21-point Kronrod panel: (integral, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        // odd Kronrod abscissae coincide with the Gauss-Legendre nodes
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let err = ((res_k - res_g) * half).abs();
    let res_abs = res_abs * half.abs();
    // floor the estimate at the rounding level of the panel
    let err = err.max(50.0 * f64::EPSILON * res_abs);
    (res_k * half, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 0.0, initial_panels: 1, max_panels: 5000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// error estimate drops below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadratureOptions,
) -> Result<QuadratureResult> {
    let n0 = opts.initial_panels.max(1);
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    let h = (b - a) / n0 as f64;
    for i in 0..n0 {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n0 { b } else { a + (i + 1) as f64 * h };
        let (value, error) = gk21(&f, lo, hi);
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    loop {
        let (total, err): (NeumaierSum, NeumaierSum) =
            heap.iter().fold((NeumaierSum::new(), NeumaierSum::new()), |(mut v, mut e), p| {
                v += p.value;
                e += p.error;
                (v, e)
            });
        let (total, err) = (total.sum(), err.sum());
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadratureResult { value: total, error: err, panels: heap.len() });
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::QuadratureNotConverged { error: err, intervals: heap.len() });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Err(Error::QuadratureNotConverged { error: err, intervals: heap.len() + 1 });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

/// Composite trapezoid rule for samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let mut acc = NeumaierSum::new();
            acc += 0.5 * values[0];
            for v in &values[1..n - 1] {
                acc += *v;
            }
            acc += 0.5 * values[n - 1];
            acc.sum() * h
        }
    }
}

/// `n` uniformly spaced points from `a` to `b` inclusive. Grids with
/// `a == -b` come out exactly mirror-symmetric.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let d = (n - 1) as f64;
            (0..n).map(|i| (a * (n - 1 - i) as f64 + b * i as f64) / d).collect()
        }
    }
}
