use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use sgphase::fock::{DensityMatrix, QuadratureGrid, StateSpec};
use sgphase::homodyne::{generate_dataset, HomodyneDataset};
use sgphase::kernel::{KernelSpec, KernelTable};
use sgphase::phase::{coarse_phase_distribution, exact_phase_distribution, PhaseDistribution, PhaseKind};
use sgphase::quadrature::linspace;
use sgphase::sampler::{estimate_distribution, kernel_for_dataset};
use sgphase::Error;

#[derive(Parser, Debug)]
#[command(name = "sgphase", version, about = "Susskind-Glogower cosine and sine phase distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Kernel cache directory.
    #[arg(long, global = true, env = "SGPHASE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,

    /// Recompute kernels instead of reading or writing the cache.
    #[arg(long, global = true)]
    no_cache: bool,

    /// Also write a matplotlib script that plots the CSV output.
    #[arg(long, global = true)]
    plot_script: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact phase distributions of a known state.
    Exact {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Coarse-grained phase distributions, with the exact ones for comparison.
    Coarse {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        /// Fock truncation of the coarse-grained states.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Slices of the sampling kernel K(Phi, 0, x, phi).
    Kernel {
        /// Values of Phi in [0, pi]; one slice file each.
        #[arg(long, required = true, num_args = 1..)]
        phi_cap: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 4.0)]
        x_max: f64,
        #[arg(long, default_value_t = 81)]
        x_points: usize,
        #[arg(long, default_value_t = 31)]
        phi_points: usize,
    },
    /// Simulated balanced-homodyne data.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 30)]
        phases: usize,
        #[arg(long, default_value_t = 10_000)]
        events: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Detector efficiency in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Output file; `.csv` or `.jsonl` (default: dataset.jsonl in the output directory).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Phase distributions sampled directly from homodyne data.
    Sample {
        /// Dataset file (default: dataset.jsonl in the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        #[arg(long)]
        n_max: Option<usize>,
    },
}

#[derive(Args, Debug, Clone)]
struct StateArgs {
    #[arg(long, value_enum, default_value_t = StateKind::Vacuum)]
    state: StateKind,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha_im: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    xi_im: f64,
    /// Photon number of a number state.
    #[arg(long, default_value_t = 0)]
    photons: usize,
    /// Fock truncation (default: grown until the norm deficit is negligible).
    #[arg(long)]
    truncation: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum StateKind {
    Vacuum,
    Number,
    Coherent,
    Squeezed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Mode {
    Cosine,
    Sine,
    Both,
}

impl Mode {
    fn kinds(self) -> Vec<PhaseKind> {
        match self {
            Mode::Cosine => vec![PhaseKind::Cosine],
            Mode::Sine => vec![PhaseKind::Sine],
            Mode::Both => vec![PhaseKind::Cosine, PhaseKind::Sine],
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 3, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TruncationTooSmall { .. }
            | Error::IncompatibleTruncation { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidParameter(_)
            | Error::DomainMismatch { .. }
            | Error::EpsilonNonpositive(_)
            | Error::UnsupportedS(_) => 2,
            Error::Io(_) => 3,
            Error::QuadratureNotConverged { .. }
            | Error::NumericalInstability(_)
            | Error::OutsideAllowedRegion { .. }
            | Error::GridTooNarrow { .. }
            | Error::KernelMissing(_) => 4,
            _ => 5,
        };
        Self { code, message: e.to_string() }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a T,
}

fn provenance<T: Serialize>(command: &str, config: &T) -> Vec<String> {
    let p = Provenance { tool: "sgphase", version: env!("CARGO_PKG_VERSION"), command, config };
    vec![format!("config: {}", serde_json::to_string(&p).expect("config serializes"))]
}

impl StateArgs {
    fn spec(&self) -> Outcome<StateSpec> {
        let mut spec = match self.state {
            StateKind::Vacuum => StateSpec::vacuum(),
            StateKind::Number => StateSpec::Number { n: self.photons, truncation: self.photons + 10 },
            StateKind::Coherent => StateSpec::coherent(Complex64::new(self.alpha, self.alpha_im)),
            StateKind::Squeezed => StateSpec::squeezed(Complex64::new(self.xi, self.xi_im)),
        };
        if let Some(n) = self.truncation {
            match &mut spec {
                StateSpec::Vacuum { truncation }
                | StateSpec::Number { truncation, .. }
                | StateSpec::Coherent { truncation, .. }
                | StateSpec::Squeezed { truncation, .. } => *truncation = n,
            }
        }
        spec.build()?;
        Ok(spec)
    }
}

fn density(spec: &StateSpec) -> Outcome<DensityMatrix> {
    Ok(DensityMatrix::from(&spec.build()?))
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Outcome<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

fn summary(label: &str, d: &PhaseDistribution) {
    println!(
        "{label}: {} points, integral {:.6}, maximum at {:.4}",
        d.grid.len(),
        d.integral(),
        d.argmax()
    );
}

#[derive(Serialize)]
struct DistributionConfig<'a> {
    state: &'a StateSpec,
    mode: &'a str,
    points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
}

fn cmd_exact(out: &mut Output, state: &StateArgs, grid: &GridArgs) -> Outcome<()> {
    let spec = state.spec()?;
    let rho = density(&spec)?;
    for kind in grid.mode.kinds() {
        let d = exact_phase_distribution(&rho, kind, &kind.grid(grid.points))?;
        let cfg = DistributionConfig { state: &spec, mode: kind.name(), points: grid.points, epsilon: None, n_max: None };
        out.write(&format!("exact_{}.csv", kind.name()), &d.to_csv(&provenance("exact", &cfg)))?;
        summary(&format!("exact {}", kind.name()), &d);
    }
    Ok(())
}

fn cmd_coarse(out: &mut Output, state: &StateArgs, grid: &GridArgs, epsilon: f64, n_max: Option<usize>) -> Outcome<()> {
    let spec = state.spec()?;
    let rho = density(&spec)?;
    for kind in grid.mode.kinds() {
        let g = kind.grid(grid.points);
        let coarse = coarse_phase_distribution(&rho, kind, epsilon, &g, n_max)?;
        let exact = exact_phase_distribution(&rho, kind, &g)?;
        let cfg = DistributionConfig { state: &spec, mode: kind.name(), points: grid.points, epsilon: Some(epsilon), n_max };
        let header = provenance("coarse", &cfg);
        out.write(&format!("coarse_{}.csv", kind.name()), &coarse.to_csv(&header))?;
        out.write(&format!("exact_{}.csv", kind.name()), &exact.to_csv(&header))?;
        summary(&format!("coarse {} (epsilon {epsilon})", kind.name()), &coarse);
        println!("  sup distance to exact: {:.3e}", coarse.sup_distance(&exact));
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelConfig<'a> {
    spec: &'a KernelSpec,
}

fn cmd_kernel(
    out: &mut Output,
    cache: Option<&Path>,
    phi_cap: &[f64],
    epsilon: f64,
    n_max: Option<usize>,
    x_max: f64,
    x_points: usize,
    phi_points: usize,
) -> Outcome<()> {
    let x_grid = QuadratureGrid::symmetric(x_max, x_points)?;
    let spec = KernelSpec::new(epsilon, n_max, phi_cap.to_vec(), x_grid, linspace(0.0, std::f64::consts::PI, phi_points))?;
    let (table, hit) = KernelTable::cached(spec, cache)?;
    println!(
        "kernel table: N_max {}, {} x {} x {} values, {}, tail estimate {:.3e}",
        table.spec().n_max,
        phi_cap.len(),
        phi_points,
        x_points,
        if hit { "from cache" } else { "built" },
        table.tail_estimate()
    );
    let mut header = provenance("kernel", &KernelConfig { spec: table.spec() });
    header.push(format!("checksum: {}", table.checksum()));
    for (i, cap) in phi_cap.iter().enumerate() {
        let mut h = header.clone();
        h.push(format!("phi_cap: {cap}"));
        let path = out.write(&format!("kernel_{i}.csv"), &table.slice_csv(i, &h))?;
        println!("  Phi = {cap}: {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    out: &mut Output,
    state: &StateArgs,
    phases: usize,
    events: usize,
    seed: u64,
    eta: f64,
    output: Option<&Path>,
) -> Outcome<()> {
    let spec = state.spec()?;
    let data = generate_dataset(&spec, phases, events, eta, seed)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| out.dir.join("dataset.jsonl"));
    data.save(&path).map_err(|e| match e {
        Error::Io(io) => Failure::io(&path, io),
        other => other.into(),
    })?;
    out.written.push(path.clone());
    println!(
        "{} records ({phases} phases x {events} events), max |x| {:.3}, checksum {}",
        data.records.len(),
        data.max_abs_x(),
        data.checksum()?
    );
    Ok(())
}

#[derive(Serialize)]
struct SampleConfig<'a> {
    dataset: &'a sgphase::homodyne::DatasetHeader,
    dataset_checksum: &'a str,
    mode: &'a str,
    points: usize,
    epsilon: f64,
    n_max: Option<usize>,
}

fn cmd_sample(
    out: &mut Output,
    cache: Option<&Path>,
    input: Option<&Path>,
    grid: &GridArgs,
    epsilon: f64,
    n_max: Option<usize>,
) -> Outcome<()> {
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| out.dir.join("dataset.jsonl"));
    if !path.exists() {
        return Err(Failure::config(format!(
            "dataset {} not found; run `sgphase simulate` first or pass --input",
            path.display()
        )));
    }
    let data = HomodyneDataset::load(&path).map_err(|e| match e {
        Error::Io(io) => Failure::io(&path, io),
        other => other.into(),
    })?;
    let checksum = data.checksum()?;
    let rho = density(&data.header.state)?;
    for kind in grid.mode.kinds() {
        let g = kind.grid(grid.points);
        let (table, hit) = kernel_for_dataset(&data, kind, epsilon, &g, n_max, cache)?;
        let est = estimate_distribution(&data, kind, epsilon, &g, &table)?;
        for w in &est.warnings {
            eprintln!("warning: {w}");
        }
        let cfg = SampleConfig {
            dataset: &data.header,
            dataset_checksum: &checksum,
            mode: kind.name(),
            points: grid.points,
            epsilon,
            n_max,
        };
        let mut header = provenance("sample", &cfg);
        header.push(format!("kernel_checksum: {}", est.kernel_checksum));
        out.write(&format!("sample_{}.csv", kind.name()), &est.distribution.to_csv(&header))?;
        let json = serde_json::to_string_pretty(&est).map_err(|e| Failure::from(Error::from(e)))?;
        out.write(&format!("sample_{}.json", kind.name()), &json)?;

        let coarse = coarse_phase_distribution(&rho, kind, epsilon, &g, None)?;
        let exact = exact_phase_distribution(&rho, kind, &g)?;
        let se = est.distribution.std_errors.clone().unwrap_or_else(|| vec![0.0; g.len()]);
        let mut csv = String::new();
        for line in &header {
            let _ = writeln!(csv, "# {line}");
        }
        csv.push_str("phase,sampled,std_error,coarse,exact\n");
        let mut within = 0;
        for i in 0..g.len() {
            let (s, c) = (est.distribution.values[i], coarse.values[i]);
            if (s - c).abs() <= 2.0 * se[i] + 1e-12 {
                within += 1;
            }
            let _ = writeln!(csv, "{:.17e},{s:.17e},{:.17e},{c:.17e},{:.17e}", g[i], se[i], exact.values[i]);
        }
        out.write(&format!("comparison_{}.csv", kind.name()), &csv)?;
        summary(&format!("sampled {} (epsilon {epsilon})", kind.name()), &est.distribution);
        println!(
            "  kernel {}; {within}/{} points within 2 standard errors of the coarse-grained distribution",
            if hit { "from cache" } else { "built" },
            g.len()
        );
    }
    Ok(())
}

const PLOT_SCRIPT: &str = r##"import glob
import os
import sys

import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "*.csv"))):
    name = os.path.splitext(os.path.basename(path))[0]
    df = pd.read_csv(path, comment="#")
    fig, ax = plt.subplots()
    if name.startswith("kernel"):
        pivot = df.pivot(index="phi", columns="x", values="K")
        im = ax.pcolormesh(pivot.columns, pivot.index, pivot.values, shading="auto")
        fig.colorbar(im, ax=ax, label="K")
        ax.set_xlabel("x")
        ax.set_ylabel("phi")
    elif name.startswith("comparison"):
        ax.errorbar(df["phase"], df["sampled"], yerr=df["std_error"], fmt=".", label="sampled")
        ax.plot(df["phase"], df["coarse"], label="coarse-grained")
        ax.plot(df["phase"], df["exact"], "--", label="exact")
        ax.legend()
    else:
        ax.plot(df["phase"], df["p"])
    ax.set_title(name)
    fig.savefig(os.path.join(here, name + ".png"), dpi=120)
    plt.close(fig)
sys.exit(0)
"##;

fn run(cli: &Cli) -> Outcome<Vec<PathBuf>> {
    fs::create_dir_all(&cli.out_dir).map_err(|e| Failure::io(&cli.out_dir, e))?;
    let cache = if cli.no_cache { None } else { cli.cache_dir.as_deref() };
    let mut out = Output { dir: cli.out_dir.clone(), written: Vec::new() };
    match &cli.command {
        Command::Exact { state, grid } => cmd_exact(&mut out, state, grid)?,
        Command::Coarse { state, grid, epsilon, n_max } => cmd_coarse(&mut out, state, grid, *epsilon, *n_max)?,
        Command::Kernel { phi_cap, epsilon, n_max, x_max, x_points, phi_points } => {
            cmd_kernel(&mut out, cache, phi_cap, *epsilon, *n_max, *x_max, *x_points, *phi_points)?
        }
        Command::Simulate { state, phases, events, seed, eta, output } => {
            cmd_simulate(&mut out, state, *phases, *events, *seed, *eta, output.as_deref())?
        }
        Command::Sample { input, grid, epsilon, n_max } => {
            cmd_sample(&mut out, cache, input.as_deref(), grid, *epsilon, *n_max)?
        }
    }
    if cli.plot_script {
        out.write("plot.py", PLOT_SCRIPT)?;
    }
    Ok(out.written)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
