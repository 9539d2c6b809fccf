//! Sweeps turning the estimate routines into pass/fail reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::appendix::{appendix_i1, t2_norm_sweep, T2Options};
use crate::error::Result;
use crate::estimates::{
    b_integral, decay_bound_check, find_eta, global_max_ptilde, i_leading, j_integral, reflection_symmetry_check,
    DirectionSearch, LevelOptions, LevelSetResult,
};
use crate::geometry::{random_in_ball, Vec3};
use crate::potentials::{ComplexFrequency, Family, PolyBump, PotentialSpec};
use crate::report::{loglog_slope, EstimateReport, Rule, Sample};

/// Random sum of two or three bumps of order 4 or 5 inside the unit ball,
/// with amplitudes of both signs.
pub fn random_sum_of_bumps<R: Rng + ?Sized>(rng: &mut R) -> PotentialSpec {
    let count = rng.gen_range(2..=3);
    let bumps = (0..count)
        .map(|_| PolyBump {
            order: rng.gen_range(4..=5),
            amplitude: rng.gen_range(0.3..1.5) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 },
            center: random_in_ball(rng, 0.5).into(),
            radius: rng.gen_range(0.25..0.5),
        })
        .collect();
    PotentialSpec::from_family(Family::SumOfBumps(bumps), None).expect("valid random bumps")
}

/// `(κ, η)` grid used to fit the decay constant `c`.
pub fn decay_sweep(kappas: &[f64], etas: &[f64]) -> Vec<(f64, f64)> {
    etas.iter()
        .flat_map(|e| kappas.iter().map(move |k| (*k, *e)))
        .collect()
}

/// Numeric `B(r)` against its closed-form bound at random `(r, κ, η)` with
/// `γ ≥ 10`; sample values are `numeric / bound`.
pub fn b_bound_report(count: usize, ell: f64, seed: u64) -> Result<EstimateReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        let kappa = rng.gen_range(0.0..100.0);
        let eta = rng.gen_range(0.05..10.0);
        let freq = ComplexFrequency::new(kappa, eta)?;
        if freq.gamma() < 10.0 {
            continue;
        }
        let r = rng.gen_range(1e-3..(2.0 * kappa + 10.0));
        let (b, bound) = b_integral(r, freq, ell)?;
        samples.push(Sample::new([("r", r), ("kappa", kappa), ("eta", eta), ("B", b), ("bound", bound)], b / bound));
    }
    Ok(EstimateReport::new("b_bound", samples, None, None, Rule::MaxAtMost, 1.0 + 1e-9))
}

/// `J·√γ` along `η = ln κ`; passes when non-increasing.
pub fn j_trend_report(kappas: &[f64], ell: f64) -> Result<EstimateReport> {
    let samples = kappas
        .iter()
        .map(|&kappa| {
            let freq = ComplexFrequency::new(kappa, kappa.ln().max(0.0))?;
            let j = j_integral(freq, ell)?;
            Ok(Sample::new([("kappa", kappa), ("eta", freq.eta), ("J", j)], j * freq.gamma().sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::new("j_trend", samples, None, None, Rule::NonIncreasing, 0.0))
}

/// `I(κ, ln κ)`; passes when strictly decreasing.
pub fn i_trend_report(q: &PotentialSpec, kappas: &[f64], directions: &[Vec3]) -> Result<EstimateReport> {
    let samples = kappas
        .iter()
        .map(|&kappa| {
            let freq = ComplexFrequency::new(kappa, kappa.ln())?;
            Ok(Sample::new([("kappa", kappa), ("eta", freq.eta)], i_leading(q, freq, directions)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::new("i_trend", samples, None, None, Rule::StrictlyDecreasing, 0.0))
}

/// `I ≤ c e^{ηa} J` along `η = ln κ`, with `c` from [`decay_bound_check`];
/// sample values are `I / (c e^{ηa} J)`.
pub fn i_chain_report(q: &PotentialSpec, kappas: &[f64], c: f64, directions: &[Vec3]) -> Result<EstimateReport> {
    let a = q.support_radius();
    let ell = q.smoothness();
    let samples = kappas
        .iter()
        .map(|&kappa| {
            let freq = ComplexFrequency::new(kappa, kappa.ln())?;
            let i = i_leading(q, freq, directions)?;
            let j = j_integral(freq, ell)?;
            let rhs = c * (freq.eta * a).exp() * j;
            Ok(Sample::new([("kappa", kappa), ("eta", freq.eta), ("I", i), ("bound", rhs)], i / rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::new("i_chain", samples, None, Some(c), Rule::MaxAtMost, 1.0))
}

/// Level set `η(κ)` at `𝒫 = max|p̃|`; passes when `η/ln κ` stays within a
/// band of max/min ratio below `ratio`.
pub fn level_set_report(
    p: &PotentialSpec,
    kappas: &[f64],
    opts: &LevelOptions,
    seeds: usize,
    seed: u64,
    ratio: f64,
) -> Result<(EstimateReport, Vec<LevelSetResult>)> {
    let (target, _) = global_max_ptilde(p, seeds, seed)?;
    let levels = kappas
        .iter()
        .map(|&k| find_eta(p, k, target, opts))
        .collect::<Result<Vec<_>>>()?;
    let samples = levels
        .iter()
        .map(|l| Sample::new([("kappa", l.kappa), ("eta_star", l.eta_star)], l.eta_star / l.kappa.ln()))
        .collect();
    Ok((
        EstimateReport::new("level_set_growth", samples, None, Some(target), Rule::RatioBelow, ratio),
        levels,
    ))
}

/// Relative gap between the `+η` and `−η` directional maxima on random
/// cases; every other case uses a random asymmetric sum of bumps.
pub fn reflection_report(base: &PotentialSpec, cases: usize, seed: u64, search: &DirectionSearch, tol: f64) -> Result<EstimateReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = search.lattice();
    let mut samples = Vec::with_capacity(cases);
    for i in 0..cases {
        let p = if i % 2 == 0 { base.clone() } else { random_sum_of_bumps(&mut rng) };
        let kappa = rng.gen_range(0.0..40.0);
        let eta = rng.gen_range(0.0..8.0);
        let (plus, minus) = reflection_symmetry_check(&p, kappa, eta, &grid, search)?;
        let rel = (plus - minus).abs() / plus.abs().max(minus.abs()).max(f64::MIN_POSITIVE);
        samples.push(Sample::new(
            [("case", i as f64), ("kappa", kappa), ("eta", eta), ("plus", plus), ("minus", minus)],
            rel,
        ));
    }
    Ok(EstimateReport::new("reflection", samples, None, None, Rule::MaxAtMost, tol))
}

/// Log–log slope of the continuous `‖T²‖` estimate against `γ` at `η = 0`;
/// passes when within `tol` of `−1/2`.
pub fn t2_decay_report(q: &PotentialSpec, kappas: &[f64], opts: &T2Options, tol: f64) -> Result<EstimateReport> {
    let freqs = kappas
        .iter()
        .map(|k| ComplexFrequency::new(*k, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let values = t2_norm_sweep(q, &freqs, &Vec3::z(), opts)?;
    let gammas: Vec<f64> = freqs.iter().map(|f| f.gamma()).collect();
    let slope = loglog_slope(&gammas, &values);
    let samples = freqs
        .iter()
        .zip(&values)
        .map(|(f, v)| Sample::new([("kappa", f.kappa), ("gamma", f.gamma())], *v))
        .collect();
    Ok(EstimateReport::new(
        "t2_decay",
        samples,
        slope,
        None,
        Rule::ExponentNear { target: -0.5 },
        tol,
    ))
}

/// `|I₁|` under doubling of `|κ+iη|` at random foci inside the support;
/// sample values are `|ratio·κ₂/κ₁ − 1|` for consecutive `κ₁ < κ₂`.
pub fn appendix_decay_report(q: &PotentialSpec, pairs: usize, kappas: &[f64], seed: u64, tol: f64) -> Result<EstimateReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = q.support_radius();
    let mut samples = Vec::new();
    for pair in 0..pairs {
        let x = random_in_ball(&mut rng, 0.6 * a);
        let y = random_in_ball(&mut rng, 0.6 * a);
        let mags = kappas
            .iter()
            .map(|k| Ok(appendix_i1(q, &x, &y, ComplexFrequency::new(*k, 0.0)?)?.norm()))
            .collect::<Result<Vec<f64>>>()?;
        for (w, m) in kappas.windows(2).zip(mags.windows(2)) {
            let ratio = m[1] / m[0];
            samples.push(Sample::new(
                [("pair", pair as f64), ("kappa", w[0]), ("kappa_doubled", w[1]), ("ratio", ratio)],
                (ratio * w[1] / w[0] - 1.0).abs(),
            ));
        }
    }
    Ok(EstimateReport::new("appendix_decay", samples, None, None, Rule::MaxAtMost, tol))
}

/// Settings of the whole estimate suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub decay_kappas: Vec<f64>,
    pub decay_etas: Vec<f64>,
    pub b_samples: usize,
    pub j_kappas: Vec<f64>,
    pub i_kappas: Vec<f64>,
    pub level_kappas: Vec<f64>,
    pub level_ratio: f64,
    pub reflection_cases: usize,
    pub reflection_tol: f64,
    pub t2_kappas: Vec<f64>,
    pub t2_tol: f64,
    pub t2: T2Options,
    pub appendix_pairs: usize,
    pub appendix_kappas: Vec<f64>,
    pub appendix_tol: f64,
    pub level: LevelOptions,
    pub seeds: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            decay_kappas: (0..=10).map(|i| 20.0 * 10f64.powf(i as f64 / 10.0)).collect(),
            decay_etas: vec![0.0, 1.0, 2.0, 4.0],
            b_samples: 100,
            j_kappas: vec![20.0, 40.0, 80.0, 160.0],
            i_kappas: vec![20.0, 60.0, 180.0],
            level_kappas: vec![30.0, 100.0, 300.0, 1000.0],
            level_ratio: 3.0,
            reflection_cases: 30,
            reflection_tol: 1e-7,
            t2_kappas: (0..=8).map(|i| 10f64.powf(1.0 + 0.25 * i as f64)).collect(),
            t2_tol: 0.15,
            t2: T2Options::default(),
            appendix_pairs: 5,
            appendix_kappas: vec![50.0, 100.0, 200.0, 400.0],
            appendix_tol: 0.3,
            level: LevelOptions::default(),
            seeds: 64,
        }
    }
}

/// Runs every report on `q` (and `p = q` for the level-set and reflection
/// checks) in a fixed order.
pub fn run_suite(q: &PotentialSpec, cfg: &SuiteConfig, seed: u64) -> Result<Vec<EstimateReport>> {
    let search = cfg.level.search;
    let mut sweep = decay_sweep(&cfg.decay_kappas, &cfg.decay_etas);
    sweep.extend(decay_sweep(&[0.0, 2.5, 5.0, 7.5, 10.0], &cfg.decay_etas));
    let decay = decay_bound_check(q, &sweep, &search)?;
    let c = decay.bound_constant.unwrap_or(f64::INFINITY);
    let ell = q.smoothness();
    let directions = search.lattice();
    let (level, _) = level_set_report(q, &cfg.level_kappas, &cfg.level, cfg.seeds, seed, cfg.level_ratio)?;
    Ok(vec![
        decay,
        b_bound_report(cfg.b_samples, ell, seed)?,
        j_trend_report(&cfg.j_kappas, ell)?,
        i_trend_report(q, &cfg.i_kappas, &directions)?,
        i_chain_report(q, &cfg.i_kappas, c, &directions)?,
        level,
        reflection_report(q, cfg.reflection_cases, seed, &search, cfg.reflection_tol)?,
        t2_decay_report(q, &cfg.t2_kappas, &cfg.t2, cfg.t2_tol)?,
        appendix_decay_report(q, cfg.appendix_pairs, &cfg.appendix_kappas, seed, cfg.appendix_tol)?,
    ])
}
