//! `bslab <command> --config <file> --out <dir> [--seed N] [--threads N]`
//!
//! Exit status: 0 success, 1 a verification report failed, 2 bad input,
//! 3 numerical non-convergence.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bslab::cache::FieldCache;
use bslab::config::RunFile;
use bslab::geometry::{fibonacci_sphere, Vec3};
use bslab::potentials::{sample_grid, ComplexFrequency, PotentialSpec};
use bslab::probe::{run_probe, write_level_set_csv, ProbeScenario};
use bslab::report::{to_json_string, EstimateReport};
use bslab::solver::{amplitude, backscatter_sweep, equation_residual, AmplitudeEntry, AmplitudeTable};
use bslab::suite::run_suite;
use bslab::transforms::{radon_moment_identity, RadonProfile};
use bslab::Error;
use clap::{Parser, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Solve one scattering problem and tabulate far-field amplitudes.
    Forward,
    /// Backscattering amplitudes over directions and wavenumbers.
    Backscatter,
    /// Radon profiles and the zeroth-moment identity.
    Radon,
    /// The full estimate suite.
    Estimates,
    /// Data, orthogonality identity and level sets for a pair.
    Probe,
    /// Delete cached solutions.
    CacheClear,
}

#[derive(Debug, Parser)]
#[command(name = "bslab", version, about = "Scattering and backscattering estimate laboratory")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized choices; overrides the run file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Verification(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. }
            | Error::QuadratureNotConverged { .. }
            | Error::SeriesDivergent { .. }
            | Error::NoBracket(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("bslab: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if cli.command == Command::CacheClear {
        let cache = FieldCache::from_env();
        let removed = cache.clear()?;
        return Ok(format!("removed {removed} cache entries from {}", cache.dir().display()));
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Input("--config is required".into()))?;
    let out = cli.out.as_ref().ok_or_else(|| Failure::Input("--out is required".into()))?;
    let text = fs::read_to_string(config_path)
        .map_err(|e| Failure::Input(format!("{}: {e}", config_path.display())))?;
    let file = RunFile::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", config_path.display())))?;
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    fs::create_dir_all(out)?;
    match cli.command {
        Command::Forward => forward(&file, out, seed),
        Command::Backscatter => backscatter(&file, out, seed),
        Command::Radon => radon(&file, out, seed),
        Command::Estimates => estimates(&file, out, seed),
        Command::Probe => probe(&file, out, seed),
        Command::CacheClear => unreachable!("handled above"),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = to_json_string(value);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn context(file: &RunFile) -> bslab::solver::SolverContext {
    let mut ctx = file.solver.context();
    ctx.cache = Some(FieldCache::from_env());
    ctx
}

fn wavenumbers(list: &Option<Vec<f64>>, a: f64) -> Result<Vec<ComplexFrequency>, Failure> {
    let ks = list.clone().unwrap_or_else(|| ProbeScenario::default_k_list(a));
    ks.into_iter()
        .map(|k| ComplexFrequency::from_wavenumber(k).map_err(Failure::from))
        .collect()
}

#[derive(Serialize)]
struct ForwardManifest<'a> {
    command: &'static str,
    seed: u64,
    potential: &'a PotentialSpec,
    n: usize,
    half_width: f64,
    k: f64,
    alpha: [f64; 3],
    residual: f64,
    amplitudes: &'a AmplitudeTable,
}

fn forward(file: &RunFile, out: &Path, seed: u64) -> Outcome {
    let q = file.require_potential()?;
    let a = file.half_width(q);
    let grid = sample_grid(q, file.grid.n, a)?;
    let freq = ComplexFrequency::from_wavenumber(file.forward.k)?;
    let alpha = Vec3::from(file.forward.alpha);
    if alpha.norm() == 0.0 {
        return Err(Failure::Input("forward.alpha must be non-zero".into()));
    }
    let alpha = alpha.normalize();
    let eps = context(file).epsilon(&grid, &alpha, freq)?;
    let residual = equation_residual(&eps, &grid)?;
    let entries = fibonacci_sphere(file.forward.observations)
        .iter()
        .map(|beta| {
            let s = amplitude(&grid, &eps, beta)?;
            Ok(AmplitudeEntry {
                beta: s.beta.into(),
                alpha: alpha.into(),
                freq,
                value: Some(s.value),
                error: None,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let table = AmplitudeTable { entries };
    table.write_csv(create(&out.join("amplitudes.csv"))?)?;
    write_json(
        &out.join("forward.json"),
        &ForwardManifest {
            command: "forward",
            seed,
            potential: q,
            n: grid.n(),
            half_width: a,
            k: file.forward.k,
            alpha: alpha.into(),
            residual,
            amplitudes: &table,
        },
    )?;
    Ok(format!("forward: {} amplitudes, residual {residual:.3e}", table.entries.len()))
}

#[derive(Serialize)]
struct BackscatterManifest<'a> {
    command: &'static str,
    seed: u64,
    potential: &'a PotentialSpec,
    n: usize,
    half_width: f64,
    table: &'a AmplitudeTable,
}

fn backscatter(file: &RunFile, out: &Path, seed: u64) -> Outcome {
    let q = file.require_potential()?;
    let a = file.half_width(q);
    let grid = sample_grid(q, file.grid.n, a)?;
    let freqs = wavenumbers(&file.backscatter.k_list, a)?;
    let betas = fibonacci_sphere(file.backscatter.beta_count);
    let table = backscatter_sweep(&grid, &betas, &freqs, &context(file));
    table.write_csv(create(&out.join("backscatter.csv"))?)?;
    write_json(
        &out.join("backscatter.json"),
        &BackscatterManifest {
            command: "backscatter",
            seed,
            potential: q,
            n: grid.n(),
            half_width: a,
            table: &table,
        },
    )?;
    if let Some(e) = table.first_error() {
        return Err(Failure::Numerical(format!("backscatter: {e}")));
    }
    Ok(format!("backscatter: {} amplitudes", table.entries.len()))
}

#[derive(Serialize)]
struct RadonManifest<'a> {
    command: &'static str,
    seed: u64,
    potential: &'a PotentialSpec,
    directions: Vec<[f64; 3]>,
    moment_identity: &'a EstimateReport,
}

fn radon(file: &RunFile, out: &Path, seed: u64) -> Outcome {
    let q = file.require_potential()?;
    let quad = file.radon.quad();
    let betas = fibonacci_sphere(file.radon.directions);
    let profiles = betas
        .iter()
        .map(|b| RadonProfile::uniform(q, b, file.radon.lambda_count, &quad))
        .collect::<Result<Vec<_>, Error>>()?;
    RadonProfile::write_csv(&profiles, create(&out.join("radon.csv"))?)?;
    let report = radon_moment_identity(q, &betas, &quad, file.radon.moment_tol)?;
    write_json(
        &out.join("radon.json"),
        &RadonManifest {
            command: "radon",
            seed,
            potential: q,
            directions: betas.iter().map(|b| (*b).into()).collect(),
            moment_identity: &report,
        },
    )?;
    if !report.passed {
        return Err(Failure::Verification("radon: moment identity failed".into()));
    }
    Ok(format!("radon: {} profiles", profiles.len()))
}

#[derive(Serialize)]
struct EstimatesManifest<'a> {
    command: &'static str,
    seed: u64,
    potential: &'a PotentialSpec,
    reports: &'a [EstimateReport],
}

fn estimates(file: &RunFile, out: &Path, seed: u64) -> Outcome {
    let q = file.require_potential()?;
    let reports = run_suite(q, &file.estimates, seed)?;
    for r in &reports {
        r.write_csv(create(&out.join(format!("{}.csv", r.name)))?)?;
    }
    write_json(
        &out.join("estimates.json"),
        &EstimatesManifest {
            command: "estimates",
            seed,
            potential: q,
            reports: &reports,
        },
    )?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let lines: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name))
        .collect();
    if failed.is_empty() {
        Ok(lines.join("\n"))
    } else {
        Err(Failure::Verification(format!("{}\nfailed: {}", lines.join("\n"), failed.join(", "))))
    }
}

#[derive(Serialize)]
struct ProbeManifest<'a> {
    command: &'static str,
    seed: u64,
    scenario: &'a ProbeScenario,
    verdict: &'a bslab::probe::ProbeVerdict,
}

fn probe(file: &RunFile, out: &Path, seed: u64) -> Outcome {
    let mut scenario = file.scenario()?;
    scenario.pipeline.seed = seed;
    let verdict = run_probe(&scenario, &context(file))?;
    write_level_set_csv(&verdict.level_set_curve, create(&out.join("level_set.csv"))?)?;
    write_json(
        &out.join("verdict.json"),
        &ProbeManifest {
            command: "probe",
            seed,
            scenario: &scenario,
            verdict: &verdict,
        },
    )?;
    if !verdict.identity_holds(scenario.tolerances.identity) {
        return Err(Failure::Verification("probe: orthogonality identity violated".into()));
    }
    Ok(format!(
        "probe: {:?}, max data gap {:.3e}",
        verdict.conclusion, verdict.max_data_gap
    ))
}
