//! Susskind-Glogower phase operators, psi-parametrized phase states, their
//! coarse-grained versions, and the exact and coarse-grained phase
//! distributions of a known state.
//!
//! The psi-parametrized states are
//! `|Phi, psi> = sqrt(2/pi) sum_n e^{i n psi} sin[(n+1) Phi] |n>`; the cosine
//! states are `psi = 0, Phi = phi` and the sine states `psi = pi/2,
//! Phi = pi/2 - phi`. Coarse graining over a width `epsilon` multiplies each
//! coefficient by `sqrt(epsilon) sinc[(n+1) epsilon / 2]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::quadrature::{linspace, trapezoid};
use crate::summation::NeumaierSum;

/// Default number of points on a phase grid.
pub const DEFAULT_PHASE_POINTS: usize = 101;

/// Largest truncation used for coarse-grained states by default.
pub const MAX_COARSE_TRUNCATION: usize = 4000;

/// `sin(x)/x`, by its Taylor series near the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Default truncation `ceil(20 pi / epsilon)`, capped at
/// [`MAX_COARSE_TRUNCATION`]. The smallest retained sinc weight is then at
/// most `1 / (10 pi)`.
pub fn default_coarse_truncation(epsilon: f64) -> usize {
    let n = (20.0 * PI / epsilon).ceil();
    if n.is_finite() {
        (n as usize).clamp(1, MAX_COARSE_TRUNCATION)
    } else {
        MAX_COARSE_TRUNCATION
    }
}

/// `E = sum_n |n><n+1|` on the truncated basis.
pub fn build_exponential_operator(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n + 1, n + 1, |r, c| {
        if c == r + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `C(psi) = (E e^{-i psi} + E^dag e^{i psi}) / 2`.
pub fn build_c_psi_operator(psi: f64, n: usize) -> DMatrix<Complex64> {
    let e = build_exponential_operator(n);
    let w = Complex64::from_polar(0.5, -psi);
    e.map(|z| z * w) + e.adjoint().map(|z| z * w.conj())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStateParams {
    /// `Phi`, reduced to `[0, pi]`.
    pub phi_cap: f64,
    pub psi: f64,
    pub epsilon: f64,
    pub n_max: usize,
    /// Overall sign picked up by the reduction of `Phi`.
    pub sign: f64,
}

impl PhaseStateParams {
    /// Reduces `Phi` into `[0, pi]` with `|Phi + pi, psi> = -|Phi, psi + pi>`
    /// and `|-Phi, psi> = -|Phi, psi>`. The global sign only matters for
    /// amplitudes, never for distributions.
    pub fn new(phi_cap: f64, psi: f64, epsilon: f64, n_max: usize) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if n_max < 1 {
            return Err(Error::InvalidParameter("N_max must be at least 1".into()));
        }
        let mut phi_cap = phi_cap;
        let mut psi = psi;
        let mut sign = 1.0;
        // shift Phi into (-pi, pi]; each pi shift moves psi by pi
        while phi_cap > PI {
            phi_cap -= PI;
            psi += PI;
            sign = -sign;
        }
        while phi_cap <= -PI {
            phi_cap += PI;
            psi -= PI;
            sign = -sign;
        }
        if phi_cap < 0.0 {
            phi_cap = -phi_cap;
            sign = -sign;
        }
        Ok(Self { phi_cap, psi, epsilon, n_max, sign })
    }
}

/// Exact phase-state coefficients `sqrt(2/pi) e^{i n psi} sin[(n+1) Phi]`.
pub fn phase_state_coefficients(params: &PhaseStateParams) -> Vec<Complex64> {
    let a = params.sign * (2.0 / PI).sqrt();
    (0..=params.n_max)
        .map(|n| {
            let k = (n + 1) as f64;
            Complex64::from_polar(a * (k * params.phi_cap).sin(), n as f64 * params.psi)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrainedState {
    pub params: PhaseStateParams,
    pub amplitudes: Vec<Complex64>,
}

impl CoarseGrainedState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<NeumaierSum>().sum()
    }

    /// `<self | other>`.
    pub fn overlap(&self, other: &[Complex64]) -> Complex64 {
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for (a, b) in self.amplitudes.iter().zip(other) {
            let z = a.conj() * b;
            re += z.re;
            im += z.im;
        }
        Complex64::new(re.sum(), im.sum())
    }
}

/// Coarse-grained state `|Phi, psi, epsilon>`.
pub fn coarse_grained_state(params: &PhaseStateParams) -> Result<CoarseGrainedState> {
    if !(params.epsilon > 0.0) {
        return Err(Error::EpsilonNonpositive(params.epsilon));
    }
    let eps = params.epsilon;
    let a = params.sign * (2.0 * eps / PI).sqrt();
    let amplitudes = (0..=params.n_max)
        .map(|n| {
            let k = (n + 1) as f64;
            let g = (k * params.phi_cap).sin() * sinc(0.5 * k * eps);
            Complex64::from_polar(a * g, n as f64 * params.psi)
        })
        .collect();
    Ok(CoarseGrainedState { params: *params, amplitudes })
}

/// Real weights `g_n = sin[(n+1) Phi] sinc[(n+1) epsilon / 2]`, without the
/// `sqrt(2 epsilon / pi)` prefactor and the `e^{i n psi}` phases. With
/// `epsilon = 0` these are the exact-state weights.
pub fn coarse_weights(phi_cap: f64, epsilon: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            let k = (n + 1) as f64;
            (k * phi_cap).sin() * sinc(0.5 * k * epsilon)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseKind {
    /// `p(Phi, psi, epsilon)` on `Phi` in `[0, pi]`.
    General { psi: f64 },
    /// Cosine distribution on `phi` in `[0, pi]`.
    Cosine,
    /// Sine distribution on `phi` in `[-pi/2, pi/2]`.
    Sine,
}

impl PhaseKind {
    pub fn psi(&self) -> f64 {
        match self {
            PhaseKind::General { psi } => *psi,
            PhaseKind::Cosine => 0.0,
            PhaseKind::Sine => FRAC_PI_2,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            PhaseKind::General { .. } | PhaseKind::Cosine => (0.0, PI),
            PhaseKind::Sine => (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhaseKind::General { .. } => "general",
            PhaseKind::Cosine => "cosine",
            PhaseKind::Sine => "sine",
        }
    }

    /// Maps a point of this kind's phase variable to the state parameter `Phi`.
    pub fn phi_cap(&self, phase: f64) -> f64 {
        match self {
            PhaseKind::General { .. } | PhaseKind::Cosine => phase,
            PhaseKind::Sine => FRAC_PI_2 - phase,
        }
    }

    /// Uniform grid over the kind's whole domain.
    pub fn grid(&self, n_points: usize) -> Vec<f64> {
        let (lo, hi) = self.domain();
        linspace(lo, hi, n_points)
    }

    pub(crate) fn check_grid(&self, grid: &[f64]) -> Result<()> {
        let (lo, hi) = self.domain();
        let slack = 1e-12;
        if grid.is_empty() {
            return Err(Error::InvalidGrid("empty phase grid".into()));
        }
        for &v in grid {
            if !(v >= lo - slack && v <= hi + slack) {
                return Err(Error::DomainMismatch { kind: self.name(), value: v, lo, hi });
            }
        }
        Ok(())
    }

    /// Whether `grid` is the uniform full-domain grid, so the trapezoid rule
    /// on it approximates integrals over the whole domain.
    pub(crate) fn is_full_grid(&self, grid: &[f64]) -> bool {
        grid.len() >= 2 && {
            let reference = self.grid(grid.len());
            reference.iter().zip(grid).all(|(a, b)| (a - b).abs() <= 1e-12)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub kind: PhaseKind,
    /// Coarse-graining width; 0 for the exact distribution.
    pub epsilon: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    /// `N(psi, epsilon)`; 1 for exact distributions.
    pub normalization: f64,
}

impl PhaseDistribution {
    /// Trapezoid integral of the values over the grid (uniform grids only).
    pub fn integral(&self) -> f64 {
        if self.grid.len() < 2 {
            return 0.0;
        }
        let h = (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64;
        trapezoid(&self.values, h)
    }

    /// Grid point of the largest value.
    pub fn argmax(&self) -> f64 {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        self.grid[i]
    }

    pub fn sup_distance(&self, other: &PhaseDistribution) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `phase,p,std_error`; `header` lines are emitted
    /// first as `#` comments.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("phase,p,std_error\n");
        for (i, (x, p)) in self.grid.iter().zip(&self.values).enumerate() {
            match &self.std_errors {
                Some(se) => {
                    let _ = writeln!(out, "{x:.17e},{p:.17e},{:.17e}", se[i]);
                }
                None => {
                    let _ = writeln!(out, "{x:.17e},{p:.17e},");
                }
            }
        }
        out
    }
}

/// `sum_nm g_n g_m rho_nm e^{-i(n-m) psi}`: the expectation value of the
/// state in the (unnormalized) phase state with real weights `g`.
fn weighted_expectation(state: &DensityMatrix, weights: &[f64], psi: f64) -> f64 {
    let d = weights.len().min(state.truncation() + 1);
    let rho = state.elements();
    let phases: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(1.0, k as f64 * psi)).collect();
    let mut acc = NeumaierSum::new();
    for n in 0..d {
        acc += rho[(n, n)].re * weights[n] * weights[n];
        for m in n + 1..d {
            acc += 2.0 * weights[n] * weights[m] * (rho[(n, m)] * phases[m - n]).re;
        }
    }
    acc.sum()
}

/// Exact distribution `<Phi, psi | rho | Phi, psi>`, normalized by
/// completeness of the phase states.
pub fn exact_phase_distribution(
    state: &DensityMatrix,
    kind: PhaseKind,
    grid: &[f64],
) -> Result<PhaseDistribution> {
    kind.check_grid(grid)?;
    let n = state.truncation();
    let psi = kind.psi();
    let values = grid
        .iter()
        .map(|&phase| {
            let w = coarse_weights(kind.phi_cap(phase), 0.0, n);
            (2.0 / PI) * weighted_expectation(state, &w, psi)
        })
        .collect();
    Ok(PhaseDistribution {
        kind,
        epsilon: 0.0,
        grid: grid.to_vec(),
        values,
        std_errors: None,
        normalization: 1.0,
    })
}

/// Unnormalized `<Phi, psi, epsilon | rho | Phi, psi, epsilon>` for every grid
/// point.
pub fn coarse_expectations(
    state: &DensityMatrix,
    kind: PhaseKind,
    epsilon: f64,
    grid: &[f64],
    n_max: usize,
) -> Vec<f64> {
    let n = n_max.min(state.truncation());
    let psi = kind.psi();
    grid.iter()
        .map(|&phase| {
            let w = coarse_weights(kind.phi_cap(phase), epsilon, n);
            (2.0 * epsilon / PI) * weighted_expectation(state, &w, psi)
        })
        .collect()
}

/// Coarse-grained distribution `p(Phi, psi, epsilon)` normalized by the
/// trapezoid integral `N(psi, epsilon)` over the whole domain. The output
/// grid is used for the integral when it is the uniform full-domain grid;
/// otherwise the default 101-point grid is.
pub fn coarse_phase_distribution(
    state: &DensityMatrix,
    kind: PhaseKind,
    epsilon: f64,
    grid: &[f64],
    n_max: Option<usize>,
) -> Result<PhaseDistribution> {
    if !(epsilon > 0.0) {
        return Err(Error::EpsilonNonpositive(epsilon));
    }
    kind.check_grid(grid)?;
    let n_max = n_max.unwrap_or_else(|| default_coarse_truncation(epsilon));
    let raw = coarse_expectations(state, kind, epsilon, grid, n_max);
    let normalization = if kind.is_full_grid(grid) {
        trapezoid(&raw, PI / (grid.len() - 1) as f64)
    } else {
        let g = kind.grid(DEFAULT_PHASE_POINTS);
        let r = coarse_expectations(state, kind, epsilon, &g, n_max);
        trapezoid(&r, PI / (DEFAULT_PHASE_POINTS - 1) as f64)
    };
    if !(normalization > 0.0) {
        return Err(Error::NumericalInstability(format!(
            "nonpositive normalization N = {normalization}"
        )));
    }
    Ok(PhaseDistribution {
        kind,
        epsilon,
        grid: grid.to_vec(),
        values: raw.iter().map(|v| v / normalization).collect(),
        std_errors: None,
        normalization,
    })
}
