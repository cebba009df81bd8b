//! Direct sampling of coarse-grained phase distributions from homodyne data,
//! `p(Phi) = \int_0^pi dphi \int dx p(x, phi) K(Phi, psi, x, phi)`, and the
//! matching reconstruction of density-matrix elements,
//! `rho_nm = \int_0^pi dphi \int dx p(x, phi) f_nm(x) e^{i(n-m) phi}`.
//!
//! Both are averages over records, accumulated per phase bucket with records
//! sorted by `x`, so the result does not depend on record order. Reported
//! standard errors come from the within-phase sample variances and neglect
//! the correlation introduced by normalizing.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{quadrature_distribution_with, DensityMatrix, QuadratureGrid, WavefunctionTable};
use crate::homodyne::{midpoint_phases, HomodyneDataset, PhaseGridKind};
use crate::kernel::{x_grid_covering, KernelSpec, KernelTable};
use crate::pattern::{PatternSource, SolutionBasis};
use crate::phase::{PhaseDistribution, PhaseKind};
use crate::quadrature::trapezoid;
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Normalized estimate with standard errors.
    pub distribution: PhaseDistribution,
    /// Phase-weighted mean kernel value per grid point, before the factor
    /// `pi` and before normalizing.
    pub raw_means: Vec<f64>,
    pub normalization: f64,
    pub dataset_checksum: String,
    pub kernel_checksum: String,
    pub kernel_spec: KernelSpec,
    pub kernel_tail_estimate: f64,
    pub warnings: Vec<String>,
}

/// Records grouped by header phase, each group sorted by `x`.
fn phase_buckets(dataset: &HomodyneDataset) -> Result<Vec<Vec<f64>>> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let phases = &dataset.header.phases;
    let mut buckets = vec![Vec::new(); phases.len()];
    for r in &dataset.records {
        let j = phases
            .iter()
            .position(|&p| (p - r.phi).abs() <= 1e-12)
            .ok_or_else(|| Error::Format(format!("record phase {} is not a header phase", r.phi)))?;
        buckets[j].push(r.x);
    }
    for b in &mut buckets {
        b.sort_by(f64::total_cmp);
    }
    Ok(buckets)
}

/// Quadrature weights of the apparatus phases over `[0, pi]`.
pub fn phase_weights(kind: PhaseGridKind, phases: &[f64]) -> Result<Vec<f64>> {
    let n = phases.len();
    match kind {
        PhaseGridKind::Midpoint => Ok(vec![PI / n as f64; n]),
        PhaseGridKind::Endpoint => {
            if n < 2 || phases.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidGrid("endpoint phase grids must be increasing with 2+ points".into()));
            }
            let mut w = vec![0.0; n];
            for (k, p) in phases.windows(2).enumerate() {
                let h = 0.5 * (p[1] - p[0]);
                w[k] += h;
                w[k + 1] += h;
            }
            Ok(w)
        }
    }
}

/// Kernel table serving `dataset` for `kind` on `phase_grid`, from the cache
/// when possible. Returns whether the cache was hit.
pub fn kernel_for_dataset(
    dataset: &HomodyneDataset,
    kind: PhaseKind,
    epsilon: f64,
    phase_grid: &[f64],
    n_max: Option<usize>,
    cache_dir: Option<&std::path::Path>,
) -> Result<(KernelTable, bool)> {
    let spec = KernelSpec::for_kind(
        kind,
        epsilon,
        n_max,
        phase_grid,
        x_grid_covering(dataset.max_abs_x())?,
        &dataset.header.phases,
    )?;
    KernelTable::cached(spec, cache_dir)
}

fn check_kernel(
    dataset: &HomodyneDataset,
    kind: PhaseKind,
    epsilon: f64,
    phase_grid: &[f64],
    kernel: &KernelTable,
) -> Result<()> {
    let spec = kernel.spec();
    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    if spec.epsilon != epsilon {
        return Err(Error::KernelMissing(format!("table has epsilon = {}, need {epsilon}", spec.epsilon)));
    }
    let caps: Vec<f64> = phase_grid.iter().map(|&p| kind.phi_cap(p).abs()).collect();
    if !close(&caps, &spec.phi_cap_grid) {
        return Err(Error::KernelMissing("table Phi grid differs from the requested phase grid".into()));
    }
    let psi = kind.psi();
    let phis: Vec<f64> = dataset.header.phases.iter().map(|p| p - psi).collect();
    if !close(&phis, &spec.phi_grid) {
        return Err(Error::KernelMissing("table apparatus phases differ from the dataset phases".into()));
    }
    let m = dataset.max_abs_x();
    if spec.x_grid.x_min > -m || spec.x_grid.x_max < m {
        return Err(Error::KernelMissing(format!("table x grid does not cover |x| = {m}")));
    }
    Ok(())
}

/// Estimate of the normalized coarse-grained distribution of `kind` on the
/// full-domain uniform `phase_grid`.
pub fn estimate_distribution(
    dataset: &HomodyneDataset,
    kind: PhaseKind,
    epsilon: f64,
    phase_grid: &[f64],
    kernel: &KernelTable,
) -> Result<EstimateResult> {
    if !(epsilon > 0.0) {
        return Err(Error::EpsilonNonpositive(epsilon));
    }
    kind.check_grid(phase_grid)?;
    if !kind.is_full_grid(phase_grid) {
        return Err(Error::InvalidGrid("the estimate is normalized on a uniform grid over the whole domain".into()));
    }
    let buckets = phase_buckets(dataset)?;
    check_kernel(dataset, kind, epsilon, phase_grid, kernel)?;
    let mut warnings = Vec::new();
    if dataset.header.eta < 1.0 {
        let w = format!(
            "BiasWarning: dataset has eta = {} but kernels assume perfect detection (s = 0); the estimate is biased",
            dataset.header.eta
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    let weights = phase_weights(dataset.header.phase_grid, &dataset.header.phases)?;
    let n_cap = phase_grid.len();

    // per phase: (mean, variance of the mean) for every grid point
    let per_phase: Vec<Option<(Vec<f64>, Vec<f64>)>> = buckets
        .par_iter()
        .enumerate()
        .map(|(j, xs)| {
            if xs.is_empty() {
                return Ok(None);
            }
            let mut sum = vec![NeumaierSum::new(); n_cap];
            let mut sq = vec![NeumaierSum::new(); n_cap];
            let mut k = vec![0.0; n_cap];
            for &x in xs {
                kernel.interpolate_into(j, x, &mut k)?;
                for i in 0..n_cap {
                    sum[i] += k[i];
                    sq[i] += k[i] * k[i];
                }
            }
            let e = xs.len() as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s.sum() / e).collect();
            let var: Vec<f64> = (0..n_cap)
                .map(|i| {
                    if xs.len() < 2 {
                        0.0
                    } else {
                        let s = sum[i].sum();
                        ((sq[i].sum() - s * s / e) / (e - 1.0)).max(0.0) / e
                    }
                })
                .collect();
            Ok(Some((mean, var)))
        })
        .collect::<Result<_>>()?;
    if per_phase.iter().any(Option::is_none) {
        warnings.push("some header phases have no records".into());
    }

    let mut unnorm = vec![NeumaierSum::new(); n_cap];
    let mut var = vec![NeumaierSum::new(); n_cap];
    for (j, part) in per_phase.iter().enumerate() {
        if let Some((mean, v)) = part {
            for i in 0..n_cap {
                unnorm[i] += weights[j] * mean[i];
                var[i] += weights[j] * weights[j] * v[i];
            }
        }
    }
    let unnorm: Vec<f64> = unnorm.iter().map(NeumaierSum::sum).collect();
    let var: Vec<f64> = var.iter().map(NeumaierSum::sum).collect();
    let h = (phase_grid[n_cap - 1] - phase_grid[0]) / (n_cap - 1) as f64;
    let normalization = trapezoid(&unnorm, h);
    if !(normalization > 0.0) {
        return Err(Error::NumericalInstability(format!("nonpositive normalization {normalization}")));
    }
    let distribution = PhaseDistribution {
        kind,
        epsilon,
        grid: phase_grid.to_vec(),
        values: unnorm.iter().map(|v| v / normalization).collect(),
        std_errors: Some(var.iter().map(|v| v.sqrt() / normalization).collect()),
        normalization,
    };
    Ok(EstimateResult {
        distribution,
        raw_means: unnorm.iter().map(|v| v / PI).collect(),
        normalization,
        dataset_checksum: dataset.checksum()?,
        kernel_checksum: kernel.checksum().to_string(),
        kernel_spec: kernel.spec().clone(),
        kernel_tail_estimate: kernel.tail_estimate(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: Complex64,
    pub std_error_re: f64,
    pub std_error_im: f64,
}

/// `rho_nm` for all `n, m <= n_max` from data. Elements below the diagonal
/// are the conjugates of those above.
pub fn reconstruct_density_matrix(dataset: &HomodyneDataset, n_max: usize) -> Result<DMatrix<DensityEstimate>> {
    let buckets = phase_buckets(dataset)?;
    let weights = phase_weights(dataset.header.phase_grid, &dataset.header.phases)?;
    let len = crate::pattern::packed_len(n_max);

    // per phase: mean and variance of the mean of every f_nm
    let parts: Vec<(Vec<f64>, Vec<f64>)> = buckets
        .par_iter()
        .map(|xs| {
            if xs.is_empty() {
                return Ok((vec![0.0; len], vec![0.0; len]));
            }
            let basis = SolutionBasis::new(n_max, xs)?;
            let mut sum = vec![NeumaierSum::new(); len];
            let mut sq = vec![NeumaierSum::new(); len];
            let mut row = vec![0.0; len];
            for i in 0..xs.len() {
                basis.fill_row(i, &mut row);
                for k in 0..len {
                    sum[k] += row[k];
                    sq[k] += row[k] * row[k];
                }
            }
            let e = xs.len() as f64;
            let mean = sum.iter().map(|s| s.sum() / e).collect();
            let var = (0..len)
                .map(|k| {
                    if xs.len() < 2 {
                        0.0
                    } else {
                        let s = sum[k].sum();
                        ((sq[k].sum() - s * s / e) / (e - 1.0)).max(0.0) / e
                    }
                })
                .collect();
            Ok((mean, var))
        })
        .collect::<Result<_>>()?;

    let zero = DensityEstimate { value: Complex64::new(0.0, 0.0), std_error_re: 0.0, std_error_im: 0.0 };
    let mut out = DMatrix::from_element(n_max + 1, n_max + 1, zero);
    for m in 0..=n_max {
        for n in 0..=m {
            let k = crate::pattern::packed_index(n, m);
            let d = (n as f64) - (m as f64);
            let (mut re, mut im, mut vre, mut vim) =
                (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
            for (j, (mean, var)) in parts.iter().enumerate() {
                let (s, c) = (d * dataset.header.phases[j]).sin_cos();
                let w = weights[j];
                re += w * c * mean[k];
                im += w * s * mean[k];
                vre += w * w * c * c * var[k];
                vim += w * w * s * s * var[k];
            }
            let est = DensityEstimate {
                value: Complex64::new(re.sum(), im.sum()),
                std_error_re: vre.sum().sqrt(),
                std_error_im: vim.sum().sqrt(),
            };
            out[(n, m)] = est;
            out[(m, n)] = DensityEstimate { value: est.value.conj(), ..est };
        }
    }
    Ok(out)
}

pub fn reconstruct_density_element(dataset: &HomodyneDataset, n: usize, m: usize) -> Result<DensityEstimate> {
    Ok(reconstruct_density_matrix(dataset, n.max(m))?[(n, m)])
}

/// Discretization of the exact double integrals: midpoint phases and the
/// trapezoid rule in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactQuadrature {
    pub n_phases: usize,
    pub x_spacing: f64,
    /// Defaults to `sqrt(2N + 1) + 6` for a state of truncation `N`.
    pub half_width: Option<f64>,
}

impl Default for ExactQuadrature {
    fn default() -> Self {
        Self { n_phases: 96, x_spacing: 0.025, half_width: None }
    }
}

impl ExactQuadrature {
    fn grid(&self, state: &DensityMatrix) -> Result<QuadratureGrid> {
        let half = self.half_width.unwrap_or(((2 * state.truncation() + 1) as f64).sqrt() + 6.0);
        let n = (2.0 * half / self.x_spacing).round() as usize + 1;
        QuadratureGrid::symmetric(half, n)
    }

    fn densities(&self, state: &DensityMatrix, grid: &QuadratureGrid) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.n_phases < 1 {
            return Err(Error::InvalidParameter("need at least one phase".into()));
        }
        let phases = midpoint_phases(self.n_phases);
        let table = WavefunctionTable::new(state.truncation(), *grid);
        let p = phases
            .par_iter()
            .map(|&phi| quadrature_distribution_with(&table, state, phi))
            .collect::<Result<_>>()?;
        Ok((phases, p))
    }
}

/// `rho_nm` for `n, m <= n_max` from the exact quadrature distributions.
pub fn reconstruct_density_matrix_exact(
    state: &DensityMatrix,
    n_max: usize,
    q: ExactQuadrature,
) -> Result<DMatrix<Complex64>> {
    let grid = q.grid(state)?;
    let h = grid.spacing();
    let basis = SolutionBasis::new(n_max, &grid.points())?;
    let (phases, p) = q.densities(state, &grid)?;
    let len = crate::pattern::packed_len(n_max);
    let mut row = vec![0.0; len];
    let mut rows = Vec::with_capacity(grid.n_points);
    for i in 0..grid.n_points {
        basis.fill_row(i, &mut row);
        rows.push(row.clone());
    }
    let w = PI / q.n_phases as f64;
    let mut out = DMatrix::from_element(n_max + 1, n_max + 1, Complex64::new(0.0, 0.0));
    let mut integrand = vec![0.0; grid.n_points];
    for m in 0..=n_max {
        for n in 0..=m {
            let k = crate::pattern::packed_index(n, m);
            let d = n as f64 - m as f64;
            let (mut re, mut im) = (NeumaierSum::new(), NeumaierSum::new());
            for (j, pj) in p.iter().enumerate() {
                for i in 0..grid.n_points {
                    integrand[i] = pj[i] * rows[i][k];
                }
                let v = trapezoid(&integrand, h);
                let (s, c) = (d * phases[j]).sin_cos();
                re += w * c * v;
                im += w * s * v;
            }
            let z = Complex64::new(re.sum(), im.sum());
            out[(n, m)] = z;
            out[(m, n)] = z.conj();
        }
    }
    Ok(out)
}

/// Estimator applied to the exact `p(x, phi)` instead of data: the
/// normalized distribution without Monte Carlo noise.
pub fn plug_in_distribution(
    state: &DensityMatrix,
    kind: PhaseKind,
    epsilon: f64,
    phase_grid: &[f64],
    n_max: Option<usize>,
    q: ExactQuadrature,
) -> Result<PhaseDistribution> {
    kind.check_grid(phase_grid)?;
    if !kind.is_full_grid(phase_grid) {
        return Err(Error::InvalidGrid("the estimate is normalized on a uniform grid over the whole domain".into()));
    }
    let grid = q.grid(state)?;
    let h = grid.spacing();
    let (phases, p) = q.densities(state, &grid)?;
    let spec = KernelSpec::for_kind(kind, epsilon, n_max, phase_grid, grid, &phases)?;
    let kernel = KernelTable::build(spec)?;
    let w = PI / q.n_phases as f64;
    let n_x = grid.n_points;
    let unnorm: Vec<f64> = (0..phase_grid.len())
        .map(|i| {
            let mut acc = NeumaierSum::new();
            let mut integrand = vec![0.0; n_x];
            for (j, pj) in p.iter().enumerate() {
                for ix in 0..n_x {
                    integrand[ix] = pj[ix] * kernel.get(i, j, ix);
                }
                acc += w * trapezoid(&integrand, h);
            }
            acc.sum()
        })
        .collect();
    let hp = (phase_grid[phase_grid.len() - 1] - phase_grid[0]) / (phase_grid.len() - 1) as f64;
    let normalization = trapezoid(&unnorm, hp);
    Ok(PhaseDistribution {
        kind,
        epsilon,
        grid: phase_grid.to_vec(),
        values: unnorm.iter().map(|v| v / normalization).collect(),
        std_errors: None,
        normalization,
    })
}
