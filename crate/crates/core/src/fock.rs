//! Truncated Fock-space states, harmonic-oscillator wavefunctions and the
//! phase-parametrized quadrature (field-strength) distributions.
//!
//! Units: the field-strength scale is fixed at |F| = 1/sqrt(2), so the
//! recorded field strength is the dimensionless quadrature `x` with vacuum
//! variance 1/2. The quadrature operator at apparatus phase `phi` is
//! `x(phi) = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)`, whose eigenvectors
//! satisfy `<x, phi | n> = e^{-i n phi} psi_n(x)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::linspace;

/// Default tolerance on the norm deficit of truncated states.
pub const TAU_NORM: f64 = 1e-10;

/// Field-strength scale |F| used internally.
pub const FIELD_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl QuadratureGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Grid on `[-half_width, half_width]`, exactly mirror-symmetric about 0.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    /// Symmetric grid wide enough for a state truncated at `n`: covers
    /// `|x| <= sqrt(2n+1) + 5`.
    pub fn for_truncation(n: usize, n_points: usize) -> Result<Self> {
        Self::symmetric(((2 * n + 1) as f64).sqrt() + 5.0, n_points)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.n_points)
    }

    pub fn is_symmetric(&self) -> bool {
        self.x_min == -self.x_max
    }
}

/// Pure state as a truncated amplitude vector `c_0..c_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty amplitude vector".into()));
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > TAU_NORM {
            return Err(Error::InvalidParameter(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn vacuum(n: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n + 1];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn number_state(k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::IncompatibleTruncation { state: n, required: k });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n + 1];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn truncation(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let elements =
            DMatrix::from_fn(d, d, |n, m| self.amplitudes[n] * self.amplitudes[m].conj());
        DensityMatrix { elements }
    }
}

fn norm_sqr(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// Truncated, Hermitian, unit-trace matrix `rho_nm`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Builds a density matrix from the upper triangle of `elements`; the
    /// lower triangle is replaced by the conjugate mirror so the result is
    /// Hermitian exactly.
    pub fn from_upper(elements: DMatrix<Complex64>) -> Result<Self> {
        if elements.nrows() != elements.ncols() || elements.nrows() == 0 {
            return Err(Error::InvalidParameter("density matrix must be square and nonempty".into()));
        }
        let d = elements.nrows();
        let mut rho = elements;
        for n in 0..d {
            rho[(n, n)] = Complex64::new(rho[(n, n)].re, 0.0);
            for m in 0..n {
                rho[(n, m)] = rho[(m, n)].conj();
            }
        }
        let trace: f64 = (0..d).map(|n| rho[(n, n)].re).sum();
        if (trace - 1.0).abs() > TAU_NORM {
            return Err(Error::InvalidParameter(format!("trace {trace} differs from 1")));
        }
        if let Some(n) = (0..d).find(|&n| rho[(n, n)].re < -1e-12) {
            return Err(Error::InvalidParameter(format!("negative population rho_{n}{n}")));
        }
        Ok(Self { elements: rho })
    }

    /// Incoherent mixture `sum_k w_k |psi_k><psi_k|` with weights summing to 1.
    pub fn mixture(parts: &[(f64, &FockState)]) -> Result<Self> {
        let d = parts.iter().map(|(_, s)| s.amplitudes.len()).max().unwrap_or(0);
        let mut acc = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (w, s) in parts {
            let k = s.amplitudes.len();
            let rho = s.density_matrix();
            for n in 0..k {
                for m in 0..k {
                    acc[(n, m)] += rho.elements[(n, m)] * *w;
                }
            }
        }
        Self::from_upper(acc)
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        if n <= self.truncation() && m <= self.truncation() {
            self.elements[(n, m)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn truncation(&self) -> usize {
        self.elements.nrows() - 1
    }

    pub fn trace(&self) -> f64 {
        (0..self.elements.nrows()).map(|n| self.elements[(n, n)].re).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.elements.nrows()).map(|n| n as f64 * self.elements[(n, n)].re).sum()
    }
}

impl From<&FockState> for DensityMatrix {
    fn from(s: &FockState) -> Self {
        s.density_matrix()
    }
}

/// Default truncation for a state with mean photon number `nbar`.
pub fn default_truncation(nbar: f64) -> usize {
    ((4.0 * nbar + 20.0).ceil() as usize).max(30)
}

/// Coherent state `|alpha>` truncated at `n`, renormalized over the
/// retained basis.
pub fn make_coherent(alpha: Complex64, n: usize) -> Result<FockState> {
    let mut c = Vec::with_capacity(n + 1);
    let mut cur = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..=n {
        c.push(cur);
        cur = cur * alpha / ((k + 1) as f64).sqrt();
    }
    renormalize(c, n)
}

/// Squeezed vacuum `exp{-(xi a^dag^2 - xi^* a^2)/2} |0>` truncated at `n`.
///
/// For real `xi > 0` the `phi = 0` quadrature is the squeezed one, with
/// variance `e^{-2 xi} / 2`.
pub fn make_squeezed_vacuum(xi: Complex64, n: usize) -> Result<FockState> {
    let r = xi.norm();
    let theta = xi.arg();
    let ratio = -Complex64::from_polar(r.tanh(), theta);
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut cur = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut k = 0usize;
    while 2 * k <= n {
        c[2 * k] = cur;
        let kk = (2 * k) as f64;
        cur = cur * ratio * ((kk + 1.0) / (kk + 2.0)).sqrt();
        k += 1;
    }
    renormalize(c, n)
}

fn renormalize(mut c: Vec<Complex64>, n: usize) -> Result<FockState> {
    let norm = norm_sqr(&c);
    let deficit = 1.0 - norm;
    if deficit > TAU_NORM {
        return Err(Error::TruncationTooSmall { n, deficit, tolerance: TAU_NORM });
    }
    let s = norm.sqrt();
    for z in &mut c {
        *z /= s;
    }
    Ok(FockState { amplitudes: c })
}

/// State descriptor used in file headers and on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Vacuum { truncation: usize },
    Number { n: usize, truncation: usize },
    Coherent { alpha_re: f64, alpha_im: f64, truncation: usize },
    Squeezed { xi_re: f64, xi_im: f64, truncation: usize },
}

impl StateSpec {
    /// Coherent state with the default truncation, grown until the
    /// norm deficit is below [`TAU_NORM`].
    pub fn coherent(alpha: Complex64) -> Self {
        let truncation = grow_truncation(default_truncation(alpha.norm_sqr()), |n| {
            make_coherent(alpha, n).is_ok()
        });
        Self::Coherent { alpha_re: alpha.re, alpha_im: alpha.im, truncation }
    }

    pub fn squeezed(xi: Complex64) -> Self {
        let nbar = xi.norm().sinh().powi(2);
        let truncation = grow_truncation(default_truncation(nbar), |n| {
            make_squeezed_vacuum(xi, n).is_ok()
        });
        Self::Squeezed { xi_re: xi.re, xi_im: xi.im, truncation }
    }

    pub fn vacuum() -> Self {
        Self::Vacuum { truncation: default_truncation(0.0) }
    }

    pub fn build(&self) -> Result<FockState> {
        match *self {
            StateSpec::Vacuum { truncation } => Ok(FockState::vacuum(truncation)),
            StateSpec::Number { n, truncation } => FockState::number_state(n, truncation),
            StateSpec::Coherent { alpha_re, alpha_im, truncation } => {
                make_coherent(Complex64::new(alpha_re, alpha_im), truncation)
            }
            StateSpec::Squeezed { xi_re, xi_im, truncation } => {
                make_squeezed_vacuum(Complex64::new(xi_re, xi_im), truncation)
            }
        }
    }
}

fn grow_truncation(start: usize, ok: impl Fn(usize) -> bool) -> usize {
    let mut n = start;
    while !ok(n) && n < 100_000 {
        n += 2;
    }
    n
}

/// Values `psi_0(x) .. psi_{n_max}(x)` of the normalized Hermite functions,
/// from the three-term recurrence in normalized form.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let p0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(p0);
    if n_max == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * p0);
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Hermite functions and their derivatives, `psi_n' = sqrt(2n) psi_{n-1} - x psi_n`.
pub fn hermite_functions_with_derivative(n_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let psi = hermite_functions(n_max, x);
    let dpsi = (0..=n_max)
        .map(|n| {
            let lower = if n == 0 { 0.0 } else { (2.0 * n as f64).sqrt() * psi[n - 1] };
            lower - x * psi[n]
        })
        .collect();
    (psi, dpsi)
}

/// `psi_n(x)` sampled on `grid`.
pub fn quadrature_wavefunction(n: usize, grid: &QuadratureGrid) -> Vec<f64> {
    grid.points().into_iter().map(|x| hermite_functions(n, x)[n]).collect()
}

/// Hermite functions `psi_0..psi_N` tabulated on a grid, shared by repeated
/// quadrature-distribution evaluations.
#[derive(Debug, Clone)]
pub struct WavefunctionTable {
    pub grid: QuadratureGrid,
    n_max: usize,
    // row-major [x_index][n]
    values: Vec<f64>,
}

impl WavefunctionTable {
    pub fn new(n_max: usize, grid: QuadratureGrid) -> Self {
        let mut values = Vec::with_capacity(grid.n_points * (n_max + 1));
        for x in grid.points() {
            values.extend(hermite_functions(n_max, x));
        }
        Self { grid, n_max, values }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn row(&self, ix: usize) -> &[f64] {
        &self.values[ix * (self.n_max + 1)..(ix + 1) * (self.n_max + 1)]
    }
}

/// Quadrature density `p(x, phi) = sum_nm rho_nm e^{-i(n-m)phi} psi_n(x) psi_m(x)`
/// from precomputed wavefunction values `psi[0..=N]` at one point.
pub fn quadrature_density_from(state: &DensityMatrix, phi: f64, psi: &[f64]) -> f64 {
    let d = state.truncation() + 1;
    let rho = state.elements();
    let phases: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(1.0, k as f64 * phi)).collect();
    let mut diag = 0.0;
    let mut off = 0.0;
    for n in 0..d {
        diag += rho[(n, n)].re * psi[n] * psi[n];
        for m in n + 1..d {
            // e^{-i(n-m)phi} = e^{i(m-n)phi}
            off += (rho[(n, m)] * phases[m - n]).re * psi[n] * psi[m];
        }
    }
    diag + 2.0 * off
}

/// Quadrature density at a single point.
pub fn quadrature_density(state: &DensityMatrix, phi: f64, x: f64) -> f64 {
    quadrature_density_from(state, phi, &hermite_functions(state.truncation(), x))
}

/// `p(x, phi)` on every point of the table's grid.
pub fn quadrature_distribution_with(
    table: &WavefunctionTable,
    state: &DensityMatrix,
    phi: f64,
) -> Result<Vec<f64>> {
    if state.truncation() > table.n_max() {
        return Err(Error::IncompatibleTruncation {
            state: state.truncation(),
            required: table.n_max(),
        });
    }
    Ok((0..table.grid.n_points)
        .map(|ix| quadrature_density_from(state, phi, table.row(ix)))
        .collect())
}

pub fn quadrature_distribution(
    state: &DensityMatrix,
    phi: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    let table = WavefunctionTable::new(state.truncation(), *grid);
    quadrature_distribution_with(&table, state, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::trapezoid;
    use approx::assert_abs_diff_eq;

    /// <x(phi)^k> by brute force from the ladder-operator action on the
    /// amplitude vector, independent of the wavefunction machinery.
    fn quadrature_moment(state: &FockState, phi: f64, k: u32) -> f64 {
        let c = state.amplitudes();
        let d = c.len();
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            let e = Complex64::from_polar(1.0, -phi);
            let mut out = vec![Complex64::new(0.0, 0.0); d];
            for n in 0..d {
                // a|n> = sqrt(n)|n-1>, a^dag|n> = sqrt(n+1)|n+1>
                if n > 0 {
                    out[n - 1] += e * (n as f64).sqrt() * v[n];
                }
                if n + 1 < d {
                    out[n + 1] += e.conj() * ((n + 1) as f64).sqrt() * v[n];
                }
            }
            out.iter().map(|z| z / 2f64.sqrt()).collect()
        };
        let mut v = c.to_vec();
        for _ in 0..k {
            v = apply(&v);
        }
        c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
    }

    #[test]
    fn coherent_mean_photon_numbers() {
        let s = make_coherent(Complex64::new(1.0, 0.0), 30).unwrap();
        assert_abs_diff_eq!(s.mean_photon_number(), 1.0, epsilon = 1e-10);
        let s = make_coherent(Complex64::new(2f64.sqrt(), 0.0), 40).unwrap();
        assert_abs_diff_eq!(s.mean_photon_number(), 2.0, epsilon = 1e-10);
        assert!(s.amplitudes()[0].re > 0.0 && s.amplitudes()[0].im == 0.0);
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = make_coherent(Complex64::new(0.0, 0.0), 5).unwrap();
        assert_eq!(s, FockState::vacuum(5));
    }

    #[test]
    fn coherent_truncation_too_small() {
        let r = make_coherent(Complex64::new(3.0, 0.0), 10);
        assert!(matches!(r, Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn squeezed_vacuum_photon_number_and_parity() {
        let s = make_squeezed_vacuum(Complex64::new(0.88, 0.0), 60).unwrap();
        // the truncated tail carries ~n * 1e-10 of photon number
        assert_abs_diff_eq!(s.mean_photon_number(), 0.88f64.sinh().powi(2), epsilon = 1e-7);
        assert!((s.mean_photon_number() - 1.0).abs() < 5e-3);
        for k in (1..=59).step_by(2) {
            assert_eq!(s.amplitudes()[k], Complex64::new(0.0, 0.0));
        }
        let v = make_squeezed_vacuum(Complex64::new(0.0, 0.0), 10).unwrap();
        assert_eq!(v, FockState::vacuum(10));
    }

    #[test]
    fn squeezed_vacuum_sign_convention() {
        let s = make_squeezed_vacuum(Complex64::new(0.88, 0.0), 60).unwrap();
        let var0 = quadrature_moment(&s, 0.0, 2) - quadrature_moment(&s, 0.0, 1).powi(2);
        assert_abs_diff_eq!(var0, (-2.0 * 0.88f64).exp() / 2.0, epsilon = 1e-9);
        let var90 = quadrature_moment(&s, PI / 2.0, 2);
        assert_abs_diff_eq!(var90, (2.0 * 0.88f64).exp() / 2.0, epsilon = 1e-7);
    }

    #[test]
    fn squeezed_default_truncation_grows_past_heuristic() {
        let spec = StateSpec::squeezed(Complex64::new(0.88, 0.0));
        match spec {
            StateSpec::Squeezed { truncation, .. } => assert!(truncation > 30),
            _ => unreachable!(),
        }
        assert!(spec.build().is_ok());
    }

    #[test]
    fn wavefunction_values() {
        assert_abs_diff_eq!(hermite_functions(0, 0.0)[0], PI.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(hermite_functions(0, 0.0)[0], 0.751126, epsilon = 1e-6);
        assert_eq!(hermite_functions(1, 0.0)[1], 0.0);
    }

    #[test]
    fn wavefunction_norm_n25() {
        let grid = QuadratureGrid::symmetric(10.0, 4001).unwrap();
        let psi = quadrature_wavefunction(25, &grid);
        let sq: Vec<f64> = psi.iter().map(|v| v * v).collect();
        assert_abs_diff_eq!(trapezoid(&sq, grid.spacing()), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn wavefunction_parity_exact() {
        let grid = QuadratureGrid::symmetric(6.0, 241).unwrap();
        let xs = grid.points();
        for n in 0..40 {
            let psi = quadrature_wavefunction(n, &grid);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..xs.len() {
                assert_eq!(psi[i], sign * psi[xs.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn derivative_matches_ladder_form() {
        let x = 0.7;
        let (psi, dpsi) = hermite_functions_with_derivative(12, x);
        let psi_up = hermite_functions(13, x);
        for n in 0..=12 {
            let alt = ((n as f64 / 2.0).sqrt() * if n > 0 { psi[n - 1] } else { 0.0 })
                - ((n as f64 + 1.0) / 2.0).sqrt() * psi_up[n + 1];
            assert_abs_diff_eq!(dpsi[n], alt, epsilon = 1e-13);
        }
    }

    #[test]
    fn vacuum_quadrature_distribution() {
        let rho = FockState::vacuum(5).density_matrix();
        let grid = QuadratureGrid::symmetric(6.0, 121).unwrap();
        for phi in [0.0, 0.4, 2.0] {
            let p = quadrature_distribution(&rho, phi, &grid).unwrap();
            for (x, v) in grid.points().iter().zip(&p) {
                assert_abs_diff_eq!(*v, (-x * x).exp() / PI.sqrt(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn coherent_quadrature_mean() {
        let s = make_coherent(Complex64::new(1.0, 0.0), 30).unwrap();
        let rho = s.density_matrix();
        let grid = QuadratureGrid::for_truncation(30, 2001).unwrap();
        let xs = grid.points();
        let p = quadrature_distribution(&rho, 0.0, &grid).unwrap();
        let h = grid.spacing();
        let mean = trapezoid(&xs.iter().zip(&p).map(|(x, v)| x * v).collect::<Vec<_>>(), h);
        assert_abs_diff_eq!(mean, 2f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(quadrature_moment(&s, 0.0, 1), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(trapezoid(&p, h), 1.0, epsilon = 1e-6);
        // shifted Gaussian of vacuum width
        for (x, v) in xs.iter().zip(&p) {
            let d = x - 2f64.sqrt();
            assert_abs_diff_eq!(*v, (-d * d).exp() / PI.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn squeezed_variance_ratio_between_quadratures() {
        let s = make_squeezed_vacuum(Complex64::new(0.88, 0.0), 60).unwrap();
        let rho = s.density_matrix();
        let grid = QuadratureGrid::for_truncation(60, 4001).unwrap();
        let xs = grid.points();
        let h = grid.spacing();
        let var = |phi: f64| {
            let p = quadrature_distribution(&rho, phi, &grid).unwrap();
            trapezoid(&xs.iter().zip(&p).map(|(x, v)| x * x * v).collect::<Vec<_>>(), h)
        };
        let ratio = var(0.0) / var(PI / 2.0);
        assert_abs_diff_eq!(ratio, (-4.0 * 0.88f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn phase_shift_by_pi_mirrors_x() {
        let s = make_coherent(Complex64::from_polar(1.3, 0.7), 40).unwrap();
        let rho = s.density_matrix();
        let grid = QuadratureGrid::symmetric(7.0, 141).unwrap();
        let xs = grid.points();
        for phi in [0.1, 0.9, 2.5] {
            let a = quadrature_distribution(&rho, phi + PI, &grid).unwrap();
            let b = quadrature_distribution(&rho, phi, &grid).unwrap();
            for i in 0..xs.len() {
                assert_abs_diff_eq!(a[i], b[xs.len() - 1 - i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn incompatible_truncation() {
        let rho = FockState::vacuum(20).density_matrix();
        let table = WavefunctionTable::new(10, QuadratureGrid::symmetric(5.0, 11).unwrap());
        assert!(matches!(
            quadrature_distribution_with(&table, &rho, 0.0),
            Err(Error::IncompatibleTruncation { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.2);
        let rho = DensityMatrix::from_upper(m.clone()).unwrap();
        assert_eq!(rho.get(1, 0), Complex64::new(0.1, -0.2));
        m[(1, 1)] = Complex64::new(0.7, 0.0);
        assert!(DensityMatrix::from_upper(m).is_err());
    }

    #[test]
    fn invalid_grids() {
        assert!(QuadratureGrid::new(1.0, -1.0, 10).is_err());
        assert!(QuadratureGrid::new(-1.0, 1.0, 1).is_err());
    }
}
