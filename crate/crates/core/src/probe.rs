//! End-to-end runs on a pair of potentials: backscattering data for both,
//! the orthogonality identity linking the data gap to `q₁ − q₂`, and the
//! complex-frequency level-set analysis of `p = q₁ − q₂`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{find_eta, global_max_ptilde, i_leading, LevelOptions, LevelSetResult};
use crate::geometry::{fibonacci_sphere, Vec3};
use crate::potentials::{sample_grid, ComplexFrequency, PotentialSpec};
use crate::report::fmt_f64;
use crate::solver::{amplitude, SolveOptions, SolverContext};

/// `q₁`, `q₂` and their difference `p = q₁ − q₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDifference {
    pub q1: PotentialSpec,
    pub q2: PotentialSpec,
    p: PotentialSpec,
}

impl SpecDifference {
    pub fn new(q1: PotentialSpec, q2: PotentialSpec) -> Result<Self> {
        let p = PotentialSpec::difference(&q1, &q2)?;
        Ok(Self { q1, q2, p })
    }

    pub fn p(&self) -> &PotentialSpec {
        &self.p
    }

    /// `‖p‖∞ ≤ 1e−12`, judged from the component amplitudes.
    pub fn is_negligible(&self) -> bool {
        let bound: f64 = self
            .p
            .components()
            .iter()
            .map(|c| c.value_at_radius(0.0).abs())
            .sum();
        bound <= 1e-12
    }
}

/// Settings of [`ptilde_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub level: LevelOptions,
    /// Random starts for the global maximum `𝒫`.
    pub seeds: usize,
    pub seed: u64,
    /// Direction grid size for the leading-term integral of non-radial
    /// potentials.
    pub leading_directions: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            level: LevelOptions::default(),
            seeds: 64,
            seed: 0,
            leading_directions: 12,
        }
    }
}

/// One point of the level-set curve with the correction bound at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetPoint {
    #[serde(flatten)]
    pub level: LevelSetResult,
    /// `I(q₁) + I(q₂)` at `(κ, η*)`; absent when `η* = 0`.
    pub leading: Option<f64>,
    /// `(I(q₁) + I(q₂)) / (2π)³`.
    pub nu_proxy: Option<f64>,
    /// `𝒫 (1 − ν)`.
    pub margin: Option<f64>,
}

/// For each `κ`: the level `η(κ)` where `max_β |p̃((κ+iη)β)|` reaches
/// `𝒫 = max_s |p̃(s)|`, the leading correction integrals of both potentials
/// there, and the margin `𝒫(1 − ν)` by which `p̃` dominates the correction.
pub fn ptilde_pipeline(diff: &SpecDifference, kappa_list: &[f64], opts: &PipelineOptions) -> Result<Vec<LevelSetPoint>> {
    if diff.is_negligible() {
        return Err(Error::ZeroDifference);
    }
    let p = diff.p();
    let (target, _) = global_max_ptilde(p, opts.seeds, opts.seed)?;
    let directions = fibonacci_sphere(opts.leading_directions.max(1));
    kappa_list
        .iter()
        .map(|&kappa| {
            let level = find_eta(p, kappa, target, &opts.level)?;
            let (leading, nu_proxy, margin) = if level.eta_star > 0.0 {
                let freq = ComplexFrequency::new(kappa, level.eta_star)?;
                let i = i_leading(&diff.q1, freq, &directions)? + i_leading(&diff.q2, freq, &directions)?;
                let nu = i / (2.0 * PI).powi(3);
                (Some(i), Some(nu), Some(target * (1.0 - nu)))
            } else {
                (None, None, None)
            };
            Ok(LevelSetPoint {
                level,
                leading,
                nu_proxy,
                margin,
            })
        })
        .collect()
}

/// Writes the curve as CSV with columns `kappa,eta_star,sup_value,margin`.
pub fn write_level_set_csv<W: Write>(curve: &[LevelSetPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "kappa,eta_star,sup_value,margin")?;
    for pt in curve {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(pt.level.kappa),
            fmt_f64(pt.level.eta_star),
            fmt_f64(pt.level.sup_value),
            pt.margin.map(fmt_f64).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeTolerances {
    /// Relative residual of the forward solves.
    pub solve: f64,
    /// Relative tolerance of the orthogonality identity.
    pub identity: f64,
    /// Relative tolerance on the level `𝒫`.
    pub level: f64,
}

impl Default for ProbeTolerances {
    fn default() -> Self {
        Self {
            solve: 1e-8,
            identity: 1e-3,
            level: 1e-6,
        }
    }
}

/// A pair of potentials and the sampling of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeScenario {
    pub q1: PotentialSpec,
    pub q2: PotentialSpec,
    pub beta_count: usize,
    /// Real wavenumbers `k`.
    pub k_list: Vec<f64>,
    pub grid_n: usize,
    /// `κ` values of the level-set curve.
    pub kappa_list: Vec<f64>,
    pub tolerances: ProbeTolerances,
    pub pipeline: PipelineOptions,
}

impl ProbeScenario {
    /// Defaults: 64 directions, 12 wavenumbers log-spaced in `[0.5, 8]/a`,
    /// `n = 24`, `κ ∈ {30, 100, 300}`.
    pub fn new(q1: PotentialSpec, q2: PotentialSpec) -> Self {
        let a = Self::half_width_of(&q1, &q2);
        Self {
            q1,
            q2,
            beta_count: 64,
            k_list: Self::default_k_list(a),
            grid_n: 24,
            kappa_list: vec![30.0, 100.0, 300.0],
            tolerances: ProbeTolerances::default(),
            pipeline: PipelineOptions::default(),
        }
    }

    pub fn default_k_list(a: f64) -> Vec<f64> {
        let (lo, hi) = (0.5f64.ln(), 8f64.ln());
        (0..12).map(|i| (lo + (hi - lo) * i as f64 / 11.0).exp() / a).collect()
    }

    fn half_width_of(q1: &PotentialSpec, q2: &PotentialSpec) -> f64 {
        let a = q1.support_radius().max(q2.support_radius());
        if a > 0.0 { a } else { 1.0 }
    }

    /// Half-width of the computational cube.
    pub fn half_width(&self) -> f64 {
        Self::half_width_of(&self.q1, &self.q2)
    }

    pub fn validate(&self) -> Result<()> {
        self.q1.check_admissible()?;
        self.q2.check_admissible()?;
        if self.beta_count == 0 || self.k_list.is_empty() {
            return Err(Error::InvalidInput("a probe needs at least one direction and one wavenumber".into()));
        }
        if self.k_list.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidInput("wavenumbers must be positive and finite".into()));
        }
        let t = &self.tolerances;
        if !(t.solve > 0.0 && t.identity > 0.0 && t.level > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The orthogonality identity at one `(β, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityResidual {
    pub beta: [f64; 3],
    pub k: f64,
    /// `A₁(−β, β, k) − A₂(−β, β, k)`.
    pub data_gap: Complex64,
    /// `∫ p(x) e^{2ikβ·x} [1 + ε(x, k)] dx`, `ε = ε₁ + ε₂ + ε₁ε₂`.
    pub integral: Complex64,
    /// `|integral + 4π·data_gap|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    DataSeparate,
    DataCoincideWithinTol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub grid_n: usize,
    pub max_data_gap: f64,
    pub orthogonality_residuals: Vec<OrthogonalityResidual>,
    pub level_set_curve: Vec<LevelSetPoint>,
    pub conclusion: Conclusion,
}

impl ProbeVerdict {
    /// Every residual is below `tol·max(1, |A₁ − A₂|)`.
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.orthogonality_residuals
            .iter()
            .all(|r| r.residual < tol * r.data_gap.norm().max(1.0))
    }
}

/// Runs the backscattering sweep for both potentials, checks the
/// orthogonality identity at every `(β, k)` and computes the level-set curve
/// of `q₁ − q₂` (empty when the difference vanishes).
pub fn run_probe(scenario: &ProbeScenario, ctx: &SolverContext) -> Result<ProbeVerdict> {
    scenario.validate()?;
    let a = scenario.half_width();
    let g1 = sample_grid(&scenario.q1, scenario.grid_n, a)?;
    let g2 = sample_grid(&scenario.q2, scenario.grid_n, a)?;
    if !g1.same_geometry(&g2) {
        return Err(Error::InconsistentGrid("the two potentials were sampled on different grids".into()));
    }
    let ctx = SolverContext {
        options: SolveOptions {
            tol: scenario.tolerances.solve,
            ..ctx.options
        },
        ..ctx.clone()
    };
    let betas = fibonacci_sphere(scenario.beta_count);
    let items: Vec<(Vec3, f64)> = scenario
        .k_list
        .iter()
        .flat_map(|k| betas.iter().map(move |b| (*b, *k)))
        .collect();
    let h3 = g1.cell_volume();
    let residuals = items
        .par_iter()
        .map(|(beta, k)| -> Result<OrthogonalityResidual> {
            let freq = ComplexFrequency::from_wavenumber(*k)?;
            let e1 = ctx.epsilon(&g1, beta, freq)?;
            let e2 = ctx.epsilon(&g2, beta, freq)?;
            let a1 = amplitude(&g1, &e1, &-beta)?.value;
            let a2 = amplitude(&g2, &e2, &-beta)?.value;
            let kc = freq.k();
            let mut integral = Complex64::new(0.0, 0.0);
            for (idx, (q1v, q2v)) in g1.values().iter().zip(g2.values()).enumerate() {
                let p = q1v - q2v;
                if p == 0.0 {
                    continue;
                }
                let (x1, x2) = (e1.values[idx], e2.values[idx]);
                let eps = x1 + x2 + x1 * x2;
                let phase = (Complex64::i() * 2.0 * kc * beta.dot(&g1.point(idx))).exp();
                integral += phase * (1.0 + eps) * p;
            }
            integral *= h3;
            let gap = a1 - a2;
            Ok(OrthogonalityResidual {
                beta: (*beta).into(),
                k: *k,
                data_gap: gap,
                integral,
                residual: (integral + 4.0 * PI * gap).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_data_gap = residuals.iter().map(|r| r.data_gap.norm()).fold(0.0, f64::max);
    let conclusion = if max_data_gap > 10.0 * scenario.tolerances.solve {
        Conclusion::DataSeparate
    } else {
        Conclusion::DataCoincideWithinTol
    };
    let diff = SpecDifference::new(scenario.q1.clone(), scenario.q2.clone())?;
    let level_set_curve = if diff.is_negligible() {
        Vec::new()
    } else {
        let mut opts = scenario.pipeline;
        opts.level.tol = scenario.tolerances.level;
        ptilde_pipeline(&diff, &scenario.kappa_list, &opts)?
    };
    Ok(ProbeVerdict {
        grid_n: scenario.grid_n,
        max_data_gap,
        orthogonality_residuals: residuals,
        level_set_curve,
        conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_k_list_spans_range() {
        let ks = ProbeScenario::default_k_list(2.0);
        assert_eq!(ks.len(), 12);
        assert!((ks[0] - 0.25).abs() < 1e-15);
        assert!((ks[11] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_difference_is_rejected() {
        let q = PotentialSpec::poly_bump(4, 1.0, 1.0).unwrap();
        let d = SpecDifference::new(q.clone(), q).unwrap();
        assert!(matches!(
            ptilde_pipeline(&d, &[30.0], &PipelineOptions::default()),
            Err(Error::ZeroDifference)
        ));
    }
}
