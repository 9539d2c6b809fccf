//! TOML run files.
//!
//! ```toml
//! seed = 7
//!
//! [potential]
//! family = "poly_bump"   # or "sum_of_bumps", "square_well"
//! m = 4
//! c = 1.0
//! a = 1.0
//!
//! [grid]
//! n = 24
//!
//! [solver]
//! tol = 1e-8
//! ```
//!
//! Every section is optional; missing keys take the library defaults.
//! Errors carry the line and column of the offending entry.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::Error;
use crate::potentials::{Family, PolyBump, PotentialSpec};
use crate::probe::{PipelineOptions, ProbeScenario, ProbeTolerances};
use crate::quadrature::QuadOptions;
use crate::solver::{SolveMethod, SolveOptions, SolverContext};
use crate::suite::SuiteConfig;

/// A problem in a run file, located by 1-based line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn locate(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn error_at(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
    let (line, column) = locate(text, span.map_or(0, |s| s.start));
    ConfigError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub m: u32,
    pub c: f64,
    pub a: f64,
    #[serde(default)]
    pub center: [f64; 3],
}

impl BumpConfig {
    fn bump(&self) -> PolyBump {
        PolyBump {
            order: self.m,
            amplitude: self.c,
            center: self.center,
            radius: self.a,
        }
    }
}

/// One potential: `family` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    PolyBump {
        m: u32,
        c: f64,
        a: f64,
        #[serde(default)]
        center: [f64; 3],
        ell: Option<f64>,
    },
    SumOfBumps { bumps: Vec<BumpConfig>, ell: Option<f64> },
    SquareWell { depth: f64, a: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> crate::Result<PotentialSpec> {
        match self {
            PotentialConfig::PolyBump { m, c, a, center, ell } => PotentialSpec::from_family(
                Family::PolyBump(BumpConfig { m: *m, c: *c, a: *a, center: *center }.bump()),
                *ell,
            ),
            PotentialConfig::SumOfBumps { bumps, ell } => {
                PotentialSpec::from_family(Family::SumOfBumps(bumps.iter().map(BumpConfig::bump).collect()), *ell)
            }
            PotentialConfig::SquareWell { depth, a } => PotentialSpec::square_well(*depth, *a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Half-width of the cube; defaults to the support radius.
    pub half_width: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 24, half_width: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub neumann_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            method: SolveMethod::Auto,
            tol: o.tol,
            max_iterations: o.max_iterations,
            restart: o.restart,
            neumann_threshold: o.neumann_threshold,
        }
    }
}

impl SolverConfig {
    pub fn context(&self) -> SolverContext {
        SolverContext {
            method: self.method,
            options: SolveOptions {
                tol: self.tol,
                max_iterations: self.max_iterations,
                restart: self.restart,
                neumann_threshold: self.neumann_threshold,
            },
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    /// Real wavenumber.
    pub k: f64,
    pub alpha: [f64; 3],
    /// Number of observation directions (Fibonacci lattice).
    pub observations: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            alpha: [0.0, 0.0, 1.0],
            observations: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackscatterConfig {
    pub beta_count: usize,
    /// Real wavenumbers; defaults to 12 values log-spaced in `[0.5, 8]/a`.
    pub k_list: Option<Vec<f64>>,
}

impl Default for BackscatterConfig {
    fn default() -> Self {
        Self {
            beta_count: 16,
            k_list: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadonConfig {
    pub directions: usize,
    pub lambda_count: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Tolerance of the zeroth-moment identity.
    pub moment_tol: f64,
}

impl Default for RadonConfig {
    fn default() -> Self {
        let q = QuadOptions::default();
        Self {
            directions: 4,
            lambda_count: 101,
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            moment_tol: 1e-6,
        }
    }
}

impl RadonConfig {
    pub fn quad(&self) -> QuadOptions {
        QuadOptions::with_tolerance(self.abs_tol, self.rel_tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub beta_count: usize,
    pub k_list: Option<Vec<f64>>,
    pub grid_n: usize,
    pub kappa_list: Vec<f64>,
    pub tolerances: ProbeTolerances,
    pub pipeline: PipelineOptions,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            beta_count: 64,
            k_list: None,
            grid_n: 24,
            kappa_list: vec![30.0, 100.0, 300.0],
            tolerances: ProbeTolerances::default(),
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunFile {
    seed: Option<u64>,
    threads: Option<usize>,
    potential: Option<Spanned<PotentialConfig>>,
    q1: Option<Spanned<PotentialConfig>>,
    q2: Option<Spanned<PotentialConfig>>,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    forward: ForwardConfig,
    #[serde(default)]
    backscatter: BackscatterConfig,
    #[serde(default)]
    radon: RadonConfig,
    #[serde(default)]
    estimates: SuiteConfig,
    #[serde(default)]
    probe: ProbeConfig,
}

/// A parsed run file. Potentials are built eagerly so that semantic errors
/// are reported at their table.
#[derive(Debug, Clone)]
pub struct RunFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub potential: Option<PotentialSpec>,
    pub q1: Option<PotentialSpec>,
    pub q2: Option<PotentialSpec>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub forward: ForwardConfig,
    pub backscatter: BackscatterConfig,
    pub radon: RadonConfig,
    pub estimates: SuiteConfig,
    pub probe: ProbeConfig,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawRunFile = toml::from_str(text).map_err(|e| error_at(text, e.span(), e.message().trim()))?;
        let build = |p: Option<Spanned<PotentialConfig>>, name: &str| -> Result<Option<PotentialSpec>, ConfigError> {
            p.map(|s| {
                let span = s.span();
                s.into_inner()
                    .build()
                    .map_err(|e| error_at(text, Some(span), format!("[{name}]: {e}")))
            })
            .transpose()
        };
        Ok(Self {
            seed: raw.seed,
            threads: raw.threads,
            potential: build(raw.potential, "potential")?,
            q1: build(raw.q1, "q1")?,
            q2: build(raw.q2, "q2")?,
            grid: raw.grid,
            solver: raw.solver,
            forward: raw.forward,
            backscatter: raw.backscatter,
            radon: raw.radon,
            estimates: raw.estimates,
            probe: raw.probe,
        })
    }

    /// The single `[potential]` table.
    pub fn require_potential(&self) -> crate::Result<&PotentialSpec> {
        self.potential
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("run file has no [potential] table".into()))
    }

    /// Half-width of the computational cube for `q`.
    pub fn half_width(&self, q: &PotentialSpec) -> f64 {
        self.grid
            .half_width
            .unwrap_or(if q.support_radius() > 0.0 { q.support_radius() } else { 1.0 })
    }

    /// The probe scenario from `[q1]`, `[q2]` and `[probe]`.
    pub fn scenario(&self) -> crate::Result<ProbeScenario> {
        let (Some(q1), Some(q2)) = (&self.q1, &self.q2) else {
            return Err(Error::InvalidInput("a probe needs [q1] and [q2] tables".into()));
        };
        let mut s = ProbeScenario::new(q1.clone(), q2.clone());
        let p = &self.probe;
        s.beta_count = p.beta_count;
        if let Some(k) = &p.k_list {
            s.k_list = k.clone();
        }
        s.grid_n = p.grid_n;
        s.kappa_list = p.kappa_list.clone();
        s.tolerances = p.tolerances;
        s.pipeline = p.pipeline;
        Ok(s)
    }
}
