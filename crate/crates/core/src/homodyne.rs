//! Simulated balanced-homodyne data: quadrature samples `x` recorded at a set
//! of apparatus phases, drawn from `p(x, phi)` of a known state.
//!
//! File formats. JSON lines: the first line is the [`DatasetHeader`] object,
//! every following line a record `{"phi": .., "x": ..}`. CSV: a first line
//! `# header: <header JSON>`, then the column line `phi,x`, then one record
//! per line. In both, `x` is the field strength in units of the header's
//! `field_scale` `|F|`: `x = F / (sqrt(2) |F|)`. Loaders convert to the
//! library scale `|F| = 1/sqrt(2)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, QuadratureGrid, StateSpec, WavefunctionTable, FIELD_SCALE};
use crate::fock::quadrature_distribution_with;

pub const FORMAT_VERSION: u32 = 1;

/// Points of the tabulated density used for inverse-CDF sampling.
pub const DEFAULT_CDF_POINTS: usize = 4001;

/// Largest probability mass allowed outside the sampling grid.
pub const MAX_OUTSIDE_MASS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseGridKind {
    /// `phi_j = (j + 1/2) pi / N`, each phase weighted `pi / N`.
    Midpoint,
    /// Arbitrary phases in `[0, pi]`, weighted by the trapezoid rule.
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub format_version: u32,
    pub state: StateSpec,
    pub field_scale: f64,
    pub eta: f64,
    pub n_phases: usize,
    pub events_per_phase: usize,
    pub rng_seed: u64,
    pub cdf_points: usize,
    pub phase_grid: PhaseGridKind,
    pub phases: Vec<f64>,
}

impl DatasetHeader {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.n_phases < 1 || self.events_per_phase < 1 {
            return Err(Error::InvalidParameter("need at least one phase and one event".into()));
        }
        if self.phases.len() != self.n_phases {
            return Err(Error::Format("header phase list does not match n_phases".into()));
        }
        if !(self.field_scale > 0.0) {
            return Err(Error::Format("field_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub phi: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneDataset {
    pub header: DatasetHeader,
    pub records: Vec<HomodyneRecord>,
}

pub fn midpoint_phases(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect()
}

/// Symmetric grid wide enough for a state of truncation `n`.
pub fn sampling_grid(n: usize, points: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::symmetric(((2 * n + 1) as f64).sqrt() + 6.0, points)
}

/// Inverse-CDF sampler of `p(x, phi)` at one phase. The density is treated
/// as piecewise linear between grid points, so the CDF is piecewise
/// quadratic and is inverted exactly.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    x0: f64,
    h: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureSampler {
    pub fn new(state: &DensityMatrix, phi: f64, table: &WavefunctionTable, grid: &QuadratureGrid) -> Result<Self> {
        let pdf: Vec<f64> = quadrature_distribution_with(table, state, phi)?
            .into_iter()
            .map(|p| p.max(0.0))
            .collect();
        let h = grid.spacing();
        let mut cdf = Vec::with_capacity(pdf.len());
        let mut acc = crate::summation::NeumaierSum::new();
        cdf.push(0.0);
        for w in pdf.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc.sum());
        }
        let mass = *cdf.last().unwrap();
        let outside = state.trace() - mass;
        if outside > MAX_OUTSIDE_MASS {
            return Err(Error::GridTooNarrow { outside });
        }
        Ok(Self { x0: grid.x_min, h, pdf, cdf })
    }

    /// The `x` with CDF equal to `u` times the total mass.
    pub fn invert(&self, u: f64) -> f64 {
        let total = *self.cdf.last().unwrap();
        let r = u * total;
        let i = self.cdf.partition_point(|&c| c <= r).clamp(1, self.cdf.len() - 1) - 1;
        let rem = (r - self.cdf[i]).max(0.0);
        let (p0, p1) = (self.pdf[i], self.pdf[i + 1]);
        let a = 0.5 * (p1 - p0) / self.h;
        let disc = (p0 * p0 + 4.0 * a * rem).max(0.0);
        let denom = p0 + disc.sqrt();
        let t = if denom > 0.0 { (2.0 * rem / denom).min(self.h) } else { 0.0 };
        self.x0 + i as f64 * self.h + t
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.invert(rng.random::<f64>())).collect()
    }
}

/// `count` draws from `p(x, phi)` on the default sampling grid.
pub fn sample_quadrature<R: Rng + ?Sized>(
    state: &DensityMatrix,
    phi: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let grid = sampling_grid(state.truncation(), DEFAULT_CDF_POINTS)?;
    let table = WavefunctionTable::new(state.truncation(), grid);
    Ok(QuadratureSampler::new(state, phi, &table, &grid)?.sample(rng, count))
}

/// Random stream for phase `j`: independent of how phases are distributed
/// over workers.
pub fn phase_rng(seed: u64, j: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

/// Dataset of `n_phases * events_per_phase` records at midpoint phases.
/// For `eta < 1` every ideal draw gets independent Gaussian noise of
/// variance `(1 - eta) / (2 eta)`, the efficiency-rescaled loss model.
pub fn generate_dataset(
    spec: &StateSpec,
    n_phases: usize,
    events_per_phase: usize,
    eta: f64,
    seed: u64,
) -> Result<HomodyneDataset> {
    let header = DatasetHeader {
        format: "sgphase-homodyne".into(),
        format_version: FORMAT_VERSION,
        state: spec.clone(),
        field_scale: FIELD_SCALE,
        eta,
        n_phases,
        events_per_phase,
        rng_seed: seed,
        cdf_points: DEFAULT_CDF_POINTS,
        phase_grid: PhaseGridKind::Midpoint,
        phases: midpoint_phases(n_phases),
    };
    header.validate()?;
    let state = DensityMatrix::from(&spec.build()?);
    let grid = sampling_grid(state.truncation(), DEFAULT_CDF_POINTS)?;
    let table = WavefunctionTable::new(state.truncation(), grid);
    let sigma = ((1.0 - eta) / (2.0 * eta)).sqrt();

    let blocks: Vec<Vec<HomodyneRecord>> = header
        .phases
        .par_iter()
        .enumerate()
        .map(|(j, &phi)| {
            let sampler = QuadratureSampler::new(&state, phi, &table, &grid)?;
            let mut rng = phase_rng(seed, j);
            Ok((0..events_per_phase)
                .map(|_| {
                    let mut x = sampler.invert(rng.random::<f64>());
                    if eta < 1.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        x += sigma * z;
                    }
                    HomodyneRecord { phi, x }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(HomodyneDataset { header, records: blocks.concat() })
}

impl HomodyneDataset {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# header: {}\nphi,x\n", serde_json::to_string(&self.header)?);
        for r in &self.records {
            let _ = writeln!(out, "{:?},{:?}", r.phi, r.x);
        }
        Ok(out)
    }

    /// Hex SHA-256 of the JSON-lines form.
    pub fn checksum(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_jsonl()?.as_bytes())))
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| Error::Format("missing header line".into()))?;
        let header: DatasetHeader = serde_json::from_str(first)?;
        let records = lines.map(|l| Ok(serde_json::from_str(l)?)).collect::<Result<Vec<_>>>()?;
        Self::finish(header, records)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| Error::Format("missing header line".into()))?;
        let json = first
            .strip_prefix("# header:")
            .ok_or_else(|| Error::Format("first CSV line must be '# header: <json>'".into()))?;
        let header: DatasetHeader = serde_json::from_str(json.trim())?;
        match lines.next().map(str::trim) {
            Some("phi,x") => {}
            other => return Err(Error::Format(format!("expected column line 'phi,x', found {other:?}"))),
        }
        let records = lines
            .map(|l| {
                let (a, b) = l
                    .split_once(',')
                    .ok_or_else(|| Error::Format(format!("bad record line '{l}'")))?;
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}'")))
                };
                Ok(HomodyneRecord { phi: parse(a)?, x: parse(b)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::finish(header, records)
    }

    fn finish(mut header: DatasetHeader, mut records: Vec<HomodyneRecord>) -> Result<Self> {
        header.validate()?;
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in &records {
            if !r.x.is_finite() || !header.phases.iter().any(|&p| (p - r.phi).abs() <= 1e-12) {
                return Err(Error::Format(format!("record {r:?} does not match the header phases")));
            }
        }
        if header.field_scale != FIELD_SCALE {
            let k = header.field_scale / FIELD_SCALE;
            for r in &mut records {
                r.x *= k;
            }
            header.field_scale = FIELD_SCALE;
        }
        Ok(Self { header, records })
    }

    /// Writes CSV for a `.csv` extension and JSON lines otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if is_csv(path) { self.to_csv()? } else { self.to_jsonl()? };
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if is_csv(path) {
            Self::from_csv(&text)
        } else {
            Self::from_jsonl(&text)
        }
    }

    pub fn max_abs_x(&self) -> f64 {
        self.records.iter().map(|r| r.x.abs()).fold(0.0, f64::max)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::make_squeezed_vacuum;
    use num_complex::Complex64;

    fn variance(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn vacuum_variance() {
        let state = DensityMatrix::from(&crate::fock::FockState::vacuum(30));
        let mut rng = phase_rng(1, 0);
        let v = sample_quadrature(&state, 0.3, 1_000_000, &mut rng).unwrap();
        assert!((variance(&v) - 0.5).abs() < 0.005);
    }

    #[test]
    fn squeezed_variance_at_zero_phase() {
        let s = make_squeezed_vacuum(Complex64::new(0.88, 0.0), 60).unwrap();
        let state = DensityMatrix::from(&s);
        let mut rng = phase_rng(2, 0);
        let v = sample_quadrature(&state, 0.0, 1_000_000, &mut rng).unwrap();
        let target = (-2.0f64 * 0.88).exp() / 2.0;
        // standard error of a Gaussian sample variance
        let se = target * (2.0 / 999_999.0f64).sqrt();
        assert!((variance(&v) - target).abs() < 3.0 * se, "{} vs {target}", variance(&v));
    }

    #[test]
    fn same_seed_same_samples() {
        let state = DensityMatrix::from(&crate::fock::FockState::vacuum(30));
        let a = sample_quadrature(&state, 1.0, 100, &mut phase_rng(5, 3)).unwrap();
        let b = sample_quadrature(&state, 1.0, 100, &mut phase_rng(5, 3)).unwrap();
        let c = sample_quadrature(&state, 1.0, 100, &mut phase_rng(5, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let state = DensityMatrix::from(&crate::fock::FockState::vacuum(30));
        let grid = QuadratureGrid::symmetric(2.0, 401).unwrap();
        let table = WavefunctionTable::new(30, grid);
        assert!(matches!(
            QuadratureSampler::new(&state, 0.0, &table, &grid),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn inversion_is_monotone_and_exact_on_linear_cells() {
        let state = DensityMatrix::from(&crate::fock::FockState::vacuum(30));
        let grid = sampling_grid(30, 401).unwrap();
        let table = WavefunctionTable::new(30, grid);
        let s = QuadratureSampler::new(&state, 0.0, &table, &grid).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let x = s.invert(k as f64 / 1000.0);
            assert!(x >= prev);
            prev = x;
        }
        assert!(s.invert(0.5).abs() < 1e-12);
    }

    #[test]
    fn dataset_layout_and_roundtrip() {
        let spec = StateSpec::vacuum();
        let d = generate_dataset(&spec, 4, 25, 1.0, 11).unwrap();
        assert_eq!(d.records.len(), 100);
        assert_eq!(d.records[30].phi, 1.5 * PI / 4.0);
        let back = HomodyneDataset::from_jsonl(&d.to_jsonl().unwrap()).unwrap();
        assert_eq!(back, d);
        let back = HomodyneDataset::from_csv(&d.to_csv().unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(d.checksum().unwrap(), back.checksum().unwrap());
    }

    #[test]
    fn foreign_field_scale_is_rescaled() {
        let d = generate_dataset(&StateSpec::vacuum(), 1, 3, 1.0, 1).unwrap();
        let mut foreign = d.clone();
        foreign.header.field_scale = 1.0;
        for r in &mut foreign.records {
            r.x /= std::f64::consts::SQRT_2;
        }
        let back = HomodyneDataset::from_jsonl(&foreign.to_jsonl().unwrap()).unwrap();
        for (a, b) in back.records.iter().zip(&d.records) {
            assert!((a.x - b.x).abs() < 1e-15);
        }
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(HomodyneDataset::from_csv("phi,x\n"), Err(Error::Format(_))));
        let d = generate_dataset(&StateSpec::vacuum(), 1, 1, 1.0, 1).unwrap();
        let text = d.to_jsonl().unwrap();
        let header = text.lines().next().unwrap();
        assert!(matches!(HomodyneDataset::from_jsonl(header), Err(Error::EmptyDataset)));
        let bad = format!("{header}\n{{\"phi\":0.1,\"x\":0.0}}\n");
        assert!(matches!(HomodyneDataset::from_jsonl(&bad), Err(Error::Format(_))));
        assert!(generate_dataset(&StateSpec::vacuum(), 1, 1, 1.5, 1).is_err());
    }
}
