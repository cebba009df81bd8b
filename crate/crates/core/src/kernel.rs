//! The phase-sampling kernel
//! `K(Phi, psi, x, phi) = (2 eps / pi) sum_nm g_n g_m f_nm(x) e^{i(n-m)(phi - psi)}`
//! with `g_n = sin[(n+1) Phi] sinc[(n+1) eps / 2]`, its cosine and sine
//! specializations, and tables of it over `(Phi, phi, x)`.
//!
//! Stored tables always use `psi = 0`; a kernel for another `psi` is the
//! `psi = 0` kernel at apparatus phase `phi - psi`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::error::{Error, Result};
use crate::fock::QuadratureGrid;
use crate::pattern::{packed_len, PatternSource, PatternTable, SolutionBasis, X_LIMIT};
use crate::phase::{coarse_weights, default_coarse_truncation, sinc, PhaseKind};
use crate::summation::NeumaierSum;

/// Spacing of kernel x grids built for datasets.
pub const DEFAULT_X_SPACING: f64 = 0.01;

/// Default upper bound on the tail estimate of a table.
pub const DEFAULT_TAIL_BOUND: f64 = 0.1;

/// Real part of the double sum together with the imaginary part accumulated
/// from the same terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub imag_residue: f64,
}

/// Kernel from one packed row `f_nm(x)` (`n <= m <= n_max`), summed band by
/// band in ascending `n + m` with compensated accumulation. Each pair enters
/// with both orderings so the imaginary parts cancel term by term.
pub fn kernel_from_row(
    phi_cap: f64,
    psi: f64,
    phi: f64,
    epsilon: f64,
    row: &[f64],
    n_max: usize,
) -> KernelValue {
    let g = coarse_weights(phi_cap, epsilon, n_max);
    let theta = phi - psi;
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for band in 0..=2 * n_max {
        let lo = band.saturating_sub(n_max);
        for n in lo..=band / 2 {
            let m = band - n;
            let a = g[n] * g[m] * row[m * (m + 1) / 2 + n];
            if n == m {
                re += a;
            } else {
                let d = (n as f64 - m as f64) * theta;
                let e = (m as f64 - n as f64) * theta;
                re += a * d.cos();
                re += a * e.cos();
                im += a * d.sin();
                im += a * e.sin();
            }
        }
    }
    let c = 2.0 * epsilon / PI;
    KernelValue { value: c * re.sum(), imag_residue: c * im.sum() }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::EpsilonNonpositive(epsilon));
    }
    Ok(())
}

fn table_row(x: f64, table: &PatternTable) -> Result<&[f64]> {
    let ix = table
        .index_of(x)
        .ok_or_else(|| Error::TableMismatch(format!("x = {x} is not a point of the pattern table grid")))?;
    Ok(table.row(ix))
}

/// `K(Phi, psi, x, phi)` with `N_max` equal to the table's truncation; `x`
/// must be a point of the table grid.
pub fn kernel_value(
    phi_cap: f64,
    psi: f64,
    x: f64,
    phi: f64,
    table: &PatternTable,
    epsilon: f64,
) -> Result<f64> {
    Ok(kernel_value_full(phi_cap, psi, x, phi, table, epsilon)?.value)
}

pub fn kernel_value_full(
    phi_cap: f64,
    psi: f64,
    x: f64,
    phi: f64,
    table: &PatternTable,
    epsilon: f64,
) -> Result<KernelValue> {
    check_epsilon(epsilon)?;
    let row = table_row(x, table)?;
    Ok(kernel_from_row(phi_cap, psi, phi, epsilon, row, table.params().n_max))
}

/// Cosine kernel: `Phi = phase`, `psi = 0`.
pub fn kernel_cosine(phase: f64, x: f64, phi: f64, table: &PatternTable, epsilon: f64) -> Result<f64> {
    kernel_value(phase, 0.0, x, phi, table, epsilon)
}

/// Sine kernel: `Phi = |phase - pi/2|`, `psi = pi/2`.
pub fn kernel_sine(phase: f64, x: f64, phi: f64, table: &PatternTable, epsilon: f64) -> Result<f64> {
    kernel_value((phase - FRAC_PI_2).abs(), FRAC_PI_2, x, phi, table, epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub epsilon: f64,
    /// Always 0 for stored tables.
    pub psi: f64,
    pub n_max: usize,
    pub s: f64,
    pub phi_cap_grid: Vec<f64>,
    pub x_grid: QuadratureGrid,
    /// Apparatus phases, already shifted by `-psi` of the target kind.
    pub phi_grid: Vec<f64>,
}

impl KernelSpec {
    pub fn new(
        epsilon: f64,
        n_max: Option<usize>,
        phi_cap_grid: Vec<f64>,
        x_grid: QuadratureGrid,
        phi_grid: Vec<f64>,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        if phi_cap_grid.is_empty() || phi_grid.is_empty() {
            return Err(Error::InvalidGrid("kernel grids must be nonempty".into()));
        }
        if x_grid.x_min < -X_LIMIT || x_grid.x_max > X_LIMIT {
            return Err(Error::InvalidGrid(format!("kernel x grid must lie within +-{X_LIMIT}")));
        }
        let n_max = n_max.unwrap_or_else(|| default_coarse_truncation(epsilon));
        Ok(Self { epsilon, psi: 0.0, n_max, s: 0.0, phi_cap_grid, x_grid, phi_grid })
    }

    /// Table serving `kind` at the given phase-grid points and apparatus
    /// phases.
    pub fn for_kind(
        kind: PhaseKind,
        epsilon: f64,
        n_max: Option<usize>,
        phase_grid: &[f64],
        x_grid: QuadratureGrid,
        apparatus_phases: &[f64],
    ) -> Result<Self> {
        let psi = kind.psi();
        let caps = phase_grid.iter().map(|&p| kind.phi_cap(p).abs()).collect();
        let phis = apparatus_phases.iter().map(|&p| p - psi).collect();
        Self::new(epsilon, n_max, caps, x_grid, phis)
    }
}

/// Symmetric x grid with [`DEFAULT_X_SPACING`] that covers `|x| <= max_abs`
/// with at least one unit of margin, rounded to whole units so nearby
/// datasets share tables.
pub fn x_grid_covering(max_abs: f64) -> Result<QuadratureGrid> {
    let half = (max_abs.ceil() + 1.0).max(2.0);
    if !(half <= X_LIMIT) {
        return Err(Error::InvalidGrid(format!("data extend to |x| = {max_abs}, beyond the supported range")));
    }
    let n = (2.0 * half / DEFAULT_X_SPACING).round() as usize + 1;
    QuadratureGrid::symmetric(half, n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelHeader {
    kind: String,
    spec: KernelSpec,
    tail_estimate: f64,
    checksum: String,
}

/// `K[Phi][phi][x]` at `psi = 0`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    spec: KernelSpec,
    values: Vec<f64>,
    tail_estimate: f64,
    checksum: String,
}

/// Per x point: the weighted pattern products `mu w_n w_m f_nm`, with
/// `mu = 2` off the diagonal, in packed order.
fn weighted_row(source: &dyn PatternSource, i: usize, w: &[f64], n_max: usize, buf: &mut Vec<f64>, out: &mut [f64]) {
    buf.resize(packed_len(source.n_max()), 0.0);
    source.fill_row(i, buf);
    let mut k = 0;
    for m in 0..=n_max {
        for n in 0..=m {
            let mu = if n == m { 1.0 } else { 2.0 };
            out[k] = mu * w[n] * w[m] * buf[k];
            k += 1;
        }
    }
}

impl KernelTable {
    pub fn build(spec: KernelSpec) -> Result<Self> {
        Self::build_with_bound(spec, DEFAULT_TAIL_BOUND)
    }

    pub fn build_with_bound(spec: KernelSpec, tail_bound: f64) -> Result<Self> {
        let basis = SolutionBasis::new(spec.n_max, &spec.x_grid.points())?;
        Self::build_from(spec, &basis, tail_bound)
    }

    /// Builds from any pattern source on the spec's x grid with at least
    /// `spec.n_max` orders.
    ///
    /// With `w_n = sinc[(n+1) eps/2]` and `sin a sin b = [cos(a-b) - cos(a+b)]/2`,
    /// the kernel at fixed `(x, phi)` is a cosine polynomial
    /// `(eps/pi) sum_k A_k cos(k Phi)` whose coefficients collect
    /// `mu w_n w_m f_nm cos((m-n) phi)` at `k = m - n` and, negated, at
    /// `k = n + m + 2`.
    pub fn build_from(spec: KernelSpec, source: &dyn PatternSource, tail_bound: f64) -> Result<Self> {
        let n = spec.n_max;
        if source.n_max() < n {
            return Err(Error::TableMismatch(format!(
                "pattern source has N = {}, kernel needs {n}",
                source.n_max()
            )));
        }
        let xs = spec.x_grid.points();
        if source.points().len() != xs.len()
            || source.points().iter().zip(&xs).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::TableMismatch("pattern source grid differs from kernel x grid".into()));
        }

        let w: Vec<f64> = (0..=n).map(|k| sinc(0.5 * (k + 1) as f64 * spec.epsilon)).collect();
        let n_coef = 2 * n + 3;
        let cos_caps: Vec<f64> = spec
            .phi_cap_grid
            .iter()
            .flat_map(|&c| (0..n_coef).map(move |k| (k as f64 * c).cos()))
            .collect();
        let cos_phis: Vec<Vec<f64>> = spec
            .phi_grid
            .iter()
            .map(|&p| (0..=n).map(|k| (k as f64 * p).cos()).collect())
            .collect();
        let (n_cap, n_phi, n_x) = (spec.phi_cap_grid.len(), spec.phi_grid.len(), xs.len());
        let scale = spec.epsilon / PI;
        let len = packed_len(n);

        // cells[ix][j][i]
        let cells: Vec<Vec<f64>> = (0..n_x)
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0.0; len], vec![0.0; n_coef]),
                |(buf, p, a), ix| {
                    weighted_row(source, ix, &w, n, buf, p);
                    let mut out = vec![0.0; n_phi * n_cap];
                    for (j, cphi) in cos_phis.iter().enumerate() {
                        a.iter_mut().for_each(|v| *v = 0.0);
                        let mut k = 0;
                        for m in 0..=n {
                            for nn in 0..=m {
                                let q = p[k] * cphi[m - nn];
                                a[m - nn] += q;
                                a[m + nn + 2] -= q;
                                k += 1;
                            }
                        }
                        for i in 0..n_cap {
                            let c = &cos_caps[i * n_coef..(i + 1) * n_coef];
                            let v: f64 = a.iter().zip(c).map(|(x, y)| x * y).sum();
                            out[j * n_cap + i] = scale * v;
                        }
                    }
                    out
                },
            )
            .collect();

        let mut values = vec![0.0; n_cap * n_phi * n_x];
        for (ix, cell) in cells.iter().enumerate() {
            for j in 0..n_phi {
                for i in 0..n_cap {
                    values[(i * n_phi + j) * n_x + ix] = cell[j * n_cap + i];
                }
            }
        }
        drop(cells);
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability(format!("kernel value {bad}")));
        }

        let tail_estimate = tail_estimate(&spec, source, &w);
        if !(tail_estimate <= tail_bound) {
            return Err(Error::NumericalInstability(format!(
                "kernel tail estimate {tail_estimate:.3e} exceeds bound {tail_bound:.3e}; increase N_max"
            )));
        }
        let checksum = cache::content_checksum(&spec, &values)?;
        Ok(Self { spec, values, tail_estimate, checksum })
    }

    /// Table with given values (layout `[Phi][phi][x]`), e.g. a stub.
    pub fn from_values(spec: KernelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.phi_cap_grid.len() * spec.phi_grid.len() * spec.x_grid.n_points {
            return Err(Error::TableMismatch("kernel values do not match the spec grids".into()));
        }
        let checksum = cache::content_checksum(&spec, &values)?;
        Ok(Self { spec, values, tail_estimate: 0.0, checksum })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn n_x(&self) -> usize {
        self.spec.x_grid.n_points
    }

    pub fn get(&self, i_cap: usize, j_phi: usize, ix: usize) -> f64 {
        self.values[(i_cap * self.spec.phi_grid.len() + j_phi) * self.n_x() + ix]
    }

    /// Four-point stencil start and Lagrange weights for `x`.
    fn stencil(&self, x: f64) -> Result<(usize, [f64; 4])> {
        let g = &self.spec.x_grid;
        if !(x >= g.x_min && x <= g.x_max) {
            return Err(Error::DomainMismatch { kind: "kernel x", value: x, lo: g.x_min, hi: g.x_max });
        }
        let n = g.n_points;
        if n < 4 {
            return Err(Error::InvalidGrid("interpolation needs at least 4 x points".into()));
        }
        let h = g.spacing();
        let t = (x - g.x_min) / h;
        let start = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let u = t - start as f64;
        let (a, b, c, d) = (u, u - 1.0, u - 2.0, u - 3.0);
        Ok((start, [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]))
    }

    /// Cubic interpolation in x of the kernel at every `Phi` for apparatus
    /// phase index `j`, written into `out`.
    pub fn interpolate_into(&self, j_phi: usize, x: f64, out: &mut [f64]) -> Result<()> {
        let (start, c) = self.stencil(x)?;
        let n_x = self.n_x();
        let n_phi = self.spec.phi_grid.len();
        for (i, o) in out.iter_mut().enumerate().take(self.spec.phi_cap_grid.len()) {
            let base = (i * n_phi + j_phi) * n_x + start;
            let v = &self.values[base..base + 4];
            *o = c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3];
        }
        Ok(())
    }

    pub fn interpolate(&self, i_cap: usize, j_phi: usize, x: f64) -> Result<f64> {
        let (start, c) = self.stencil(x)?;
        let base = (i_cap * self.spec.phi_grid.len() + j_phi) * self.n_x() + start;
        let v = &self.values[base..base + 4];
        Ok(c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3])
    }

    /// CSV slice `x,phi,K` at one `Phi`.
    pub fn slice_csv(&self, i_cap: usize, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("x,phi,K\n");
        let xs = self.spec.x_grid.points();
        for (j, phi) in self.spec.phi_grid.iter().enumerate() {
            for (ix, x) in xs.iter().enumerate() {
                let _ = writeln!(out, "{x:.17e},{phi:.17e},{:.17e}", self.get(i_cap, j, ix));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = KernelHeader {
            kind: "kernel-table".into(),
            spec: self.spec.clone(),
            tail_estimate: self.tail_estimate,
            checksum: self.checksum.clone(),
        };
        cache::write_cache(path, &header, &self.values)
    }

    pub fn load(path: &Path, expected: &KernelSpec) -> Result<Self> {
        let (header, values): (KernelHeader, Vec<f64>) = cache::read_cache(path)?;
        if header.kind != "kernel-table" || &header.spec != expected {
            return Err(Error::TableMismatch("cached kernel was built for a different spec".into()));
        }
        let found = cache::content_checksum(&header.spec, &values)?;
        if found != header.checksum {
            return Err(Error::Checksum { expected: header.checksum, found });
        }
        let s = &header.spec;
        if values.len() != s.phi_cap_grid.len() * s.phi_grid.len() * s.x_grid.n_points {
            return Err(Error::Format("kernel payload has the wrong size".into()));
        }
        Ok(Self { spec: header.spec, values, tail_estimate: header.tail_estimate, checksum: header.checksum })
    }

    /// Loads the table for `spec` from `cache_dir` if present and valid,
    /// otherwise builds and stores it. Returns whether the cache was hit.
    pub fn cached(spec: KernelSpec, cache_dir: Option<&Path>) -> Result<(Self, bool)> {
        let Some(dir) = cache_dir else {
            return Ok((Self::build(spec)?, false));
        };
        let path = cache::keyed_path(dir, "kernel", &spec)?;
        if path.exists() {
            match Self::load(&path, &spec) {
                Ok(t) => return Ok((t, true)),
                Err(e) => log::warn!("ignoring unusable kernel cache {}: {e}", path.display()),
            }
        }
        let table = Self::build(spec)?;
        table.save(&path)?;
        Ok((table, false))
    }
}

/// Twice the largest magnitude of the outermost band `max(n, m) = N` over a
/// subsample of the table cells.
fn tail_estimate(spec: &KernelSpec, source: &dyn PatternSource, w: &[f64]) -> f64 {
    let n = spec.n_max;
    let n_x = spec.x_grid.n_points;
    let step = n_x.div_ceil(64).max(1);
    let mut buf = vec![0.0; packed_len(source.n_max())];
    let base = n * (n + 1) / 2;
    let mut worst = 0.0f64;
    for ix in (0..n_x).step_by(step) {
        source.fill_row(ix, &mut buf);
        for &phi in &spec.phi_grid {
            for &cap in &spec.phi_cap_grid {
                let gn = (((n + 1) as f64) * cap).sin() * w[n];
                let mut acc = 0.0;
                for k in 0..=n {
                    let mu = if k == n { 1.0 } else { 2.0 };
                    let g = (((k + 1) as f64) * cap).sin() * w[k];
                    acc += mu * g * gn * buf[base + k] * (((n - k) as f64) * phi).cos();
                }
                worst = worst.max(acc.abs());
            }
        }
    }
    2.0 * (2.0 * spec.epsilon / PI) * worst
}
