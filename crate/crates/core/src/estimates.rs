//! Numerical checks of the quantitative estimates behind the uniqueness
//! argument: level sets of `max_β |p̃((κ+iη)β)|`, the smoothness decay bound,
//! and the `B`, `J`, `I` integrals controlling the correction term.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{complete_frame, complexify, fibonacci_sphere, random_in_ball, Vec3};
use crate::potentials::{ComplexFrequency, PotentialSpec, RadialTransform, MAX_ETA_A};
use crate::quadrature::{breakpoints, integrate_breaks, QuadOptions};
use crate::report::{loglog_slope, EstimateReport, Rule, Sample};

/// Direction-grid search settings for maxima over the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionSearch {
    /// Fibonacci lattice size.
    pub grid: usize,
    /// Number of best lattice nodes refined by local ascent.
    pub refine_top: usize,
    /// Angular step at which the local ascent stops.
    pub angle_tol: f64,
    /// Largest relative phase `|ζ| |β₁−β₂| max|cᵢ−cⱼ|` allowed between
    /// neighbouring nodes; the lattice is refined up to `max_grid` to meet it.
    pub phase_step: f64,
    pub max_grid: usize,
}

impl Default for DirectionSearch {
    fn default() -> Self {
        Self {
            grid: 256,
            refine_top: 3,
            angle_tol: 1e-10,
            phase_step: 0.3,
            max_grid: 1 << 20,
        }
    }
}

impl DirectionSearch {
    pub fn lattice(&self) -> Vec<Vec3> {
        fibonacci_sphere(self.grid)
    }
}

fn check_eta(p: &PotentialSpec, eta: f64) -> Result<()> {
    if eta.abs() * p.support_radius() > MAX_ETA_A {
        return Err(Error::Range(format!(
            "eta*a = {} exceeds {MAX_ETA_A}",
            eta.abs() * p.support_radius()
        )));
    }
    Ok(())
}

/// `p̃(ζβ)` for one complex `ζ` and many directions: the radial factors
/// `Φ_j(ζ)` do not depend on `β` and are computed once.
struct AlongDirections {
    terms: Vec<(Vec3, Complex64)>,
    zeta: Complex64,
}

impl AlongDirections {
    fn new(transforms: &[RadialTransform], zeta: Complex64) -> Self {
        Self {
            terms: transforms.iter().map(|t| (t.center, t.eval(zeta))).collect(),
            zeta,
        }
    }

    fn abs(&self, beta: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(c, phi)| (Complex64::i() * self.zeta * beta.dot(c)).exp() * phi)
            .sum::<Complex64>()
            .norm()
    }

    fn is_direction_free(&self) -> bool {
        self.terms.iter().all(|(c, _)| c.norm() == 0.0)
    }

    /// Largest distance between two component centres.
    fn spread(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, (a, _)) in self.terms.iter().enumerate() {
            for (b, _) in &self.terms[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }
}

/// Local pattern-search ascent on the sphere from `start`.
fn ascend_sphere(f: &dyn Fn(&Vec3) -> f64, start: Vec3, step: f64, tol: f64) -> (f64, Vec3) {
    let mut b = start.normalize();
    let mut v = f(&b);
    let mut step = step;
    let dirs = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (0.7071067811865476, 0.7071067811865476),
        (-0.7071067811865476, 0.7071067811865476),
        (0.7071067811865476, -0.7071067811865476),
        (-0.7071067811865476, -0.7071067811865476),
    ];
    let mut guard = 0;
    while step > tol && guard < 20_000 {
        guard += 1;
        let (e2, e3) = complete_frame(&b);
        let mut moved = false;
        for (du, dv) in dirs {
            let cand = (b + (e2 * du + e3 * dv) * step).normalize();
            let cv = f(&cand);
            if cv > v {
                b = cand;
                v = cv;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (v, b)
}

fn sphere_max(eval: &AlongDirections, grid: &[Vec3], search: &DirectionSearch) -> (f64, Vec3) {
    if grid.is_empty() {
        return (0.0, Vec3::z());
    }
    if eval.is_direction_free() {
        return (eval.abs(&grid[0]), grid[0]);
    }
    let spacing = search.phase_step / (eval.zeta.norm() * eval.spread()).max(f64::MIN_POSITIVE);
    let needed = (4.0 * PI / (spacing * spacing)).ceil().min(search.max_grid as f64) as usize;
    let fine;
    let grid = if needed > grid.len() {
        fine = fibonacci_sphere(needed);
        &fine
    } else {
        grid
    };
    let mut scored: Vec<(f64, Vec3)> = grid.iter().map(|b| (eval.abs(b), *b)).collect();
    let top = search.refine_top.clamp(1, scored.len());
    scored.select_nth_unstable_by(top - 1, |a, b| b.0.total_cmp(&a.0));
    let spacing = (4.0 * PI / grid.len() as f64).sqrt();
    let f = |b: &Vec3| eval.abs(b);
    scored[..top]
        .iter()
        .map(|(_, b)| ascend_sphere(&f, *b, spacing, search.angle_tol))
        .fold((f64::NEG_INFINITY, Vec3::z()), |acc, x| if x.0 > acc.0 { x } else { acc })
}

fn sup_signed(p: &PotentialSpec, kappa: f64, eta: f64, grid: &[Vec3], search: &DirectionSearch) -> Result<(f64, Vec3)> {
    check_eta(p, eta)?;
    let eval = AlongDirections::new(&p.radial_transforms(), Complex64::new(kappa, eta));
    Ok(sphere_max(&eval, grid, search))
}

/// `max_β |p̃((κ+iη)β)|` over `beta_grid`, refined by local ascent around the
/// best nodes; returns the maximum and its direction.
pub fn sup_beta_ptilde(
    p: &PotentialSpec,
    freq: ComplexFrequency,
    beta_grid: &[Vec3],
    search: &DirectionSearch,
) -> Result<(f64, Vec3)> {
    p.check_admissible()?;
    sup_signed(p, freq.kappa, freq.eta, beta_grid, search)
}

/// Global maximum `𝒫 = max_{s∈ℝ³} |p̃(s)|` by multistart local ascent from
/// `s = 0` and `seeds` random points in `|s| ≤ 4π/a`.
pub fn global_max_ptilde(p: &PotentialSpec, seeds: usize, seed: u64) -> Result<(f64, Vec3)> {
    p.check_admissible()?;
    let transforms = p.radial_transforms();
    let a = p.support_radius();
    if transforms.is_empty() || a == 0.0 {
        return Ok((0.0, Vec3::zeros()));
    }
    let f = |s: &Vec3| -> f64 {
        let w = complexify(s);
        let rho = Complex64::new(s.norm(), 0.0);
        transforms
            .iter()
            .map(|t| (Complex64::i() * crate::geometry::cdot_real(&w, &t.center)).exp() * t.eval(rho))
            .sum::<Complex64>()
            .norm()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![Vec3::zeros()];
    starts.extend((0..seeds).map(|_| random_in_ball(&mut rng, 4.0 * PI / a)));
    let axes = [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
    let mut best = (f64::NEG_INFINITY, Vec3::zeros());
    for s0 in starts {
        let mut s = s0;
        let mut v = f(&s);
        let mut step = 0.5 / a;
        while step > 1e-9 / a {
            let mut moved = false;
            for e in &axes {
                let cand = s + e * step;
                let cv = f(&cand);
                if cv > v {
                    s = cand;
                    v = cv;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

/// Solution of `max_β |p̃((κ+iη)β)| = 𝒫` in `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetResult {
    pub kappa: f64,
    pub eta_star: f64,
    pub sup_value: f64,
    pub target: f64,
    pub beta_star: [f64; 3],
}

/// Settings of the level-set search in [`find_eta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelOptions {
    pub search: DirectionSearch,
    /// Relative tolerance on the level `𝒫`.
    pub tol: f64,
    /// Step of the bracketing scan in `η`.
    pub scan_step: f64,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self {
            search: DirectionSearch::default(),
            tol: 1e-6,
            scan_step: 0.25,
        }
    }
}

/// Smallest `η ≥ 0` (to the scan resolution) where the directional maximum
/// reaches `target`, refined by bisection to `|sup − P| ≤ tol·P`. When the
/// maximum at `η = 0` already reaches the target, `η = 0` is returned.
pub fn find_eta(p: &PotentialSpec, kappa: f64, target: f64, opts: &LevelOptions) -> Result<LevelSetResult> {
    p.check_admissible()?;
    if !(target > 0.0) {
        return Err(Error::InvalidInput(format!("level {target} must be positive")));
    }
    if !(opts.scan_step > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidInput("scan step and level tolerance must be positive".into()));
    }
    let search = &opts.search;
    let tol = opts.tol;
    let grid = search.lattice();
    let sup = |eta: f64| sup_signed(p, kappa, eta, &grid, search);
    let result = |eta: f64, (v, b): (f64, Vec3)| LevelSetResult {
        kappa,
        eta_star: eta,
        sup_value: v,
        target,
        beta_star: b.into(),
    };
    let at_zero = sup(0.0)?;
    if at_zero.0 >= target * (1.0 - tol) {
        return Ok(result(0.0, at_zero));
    }
    let step = opts.scan_step;
    let mut lo = 0.0;
    let mut hi = step;
    let mut at_hi = sup(hi)?;
    while at_hi.0 < target {
        lo = hi;
        hi += step;
        at_hi = sup(hi)?;
    }
    if (at_hi.0 - target).abs() <= tol * target {
        return Ok(result(hi, at_hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let at_mid = sup(mid)?;
        if (at_mid.0 - target).abs() <= tol * target {
            return Ok(result(mid, at_mid));
        }
        if at_mid.0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoBracket(format!(
        "bisection for kappa = {kappa} stalled between eta = {lo} and {hi}"
    )))
}

/// `(max_β |p̃((κ+iη)β)|, max_β |p̃((κ−iη)β)|)`, the two maxima computed
/// separately.
pub fn reflection_symmetry_check(
    p: &PotentialSpec,
    kappa: f64,
    eta: f64,
    beta_grid: &[Vec3],
    search: &DirectionSearch,
) -> Result<(f64, f64)> {
    Ok((
        sup_signed(p, kappa, eta, beta_grid, search)?.0,
        sup_signed(p, kappa, -eta, beta_grid, search)?.0,
    ))
}

/// Fits `c` in `|p̃((κ+iη)β)| ≤ c e^{a|η|}/(1+κ²+η²)^{ℓ/2}` over the sweep
/// and the log–log slope of `max_β |p̃(κβ)|` in `κ` over the `η = 0` points.
///
/// `|p̃(κβ)|` has zeros in `κ`, so the slope is fitted to its envelope, the
/// maximum over `[κ, κ + π/a]` (24 samples). The report passes when the
/// slope is at most `−ℓ + 0.5` and `c` is finite.
pub fn decay_bound_check(p: &PotentialSpec, sweep: &[(f64, f64)], search: &DirectionSearch) -> Result<EstimateReport> {
    p.check_admissible()?;
    let ell = p.smoothness();
    let a = p.support_radius();
    let grid = search.lattice();
    let mut samples = Vec::with_capacity(sweep.len());
    let mut c: f64 = 0.0;
    let mut slope_k = Vec::new();
    let mut slope_v = Vec::new();
    for &(kappa, eta) in sweep {
        let (v, _) = sup_signed(p, kappa, eta, &grid, search)?;
        let ratio = v * (1.0 + kappa * kappa + eta * eta).powf(ell / 2.0) / (a * eta.abs()).exp();
        c = c.max(ratio);
        let mut params = vec![("kappa", kappa), ("eta", eta), ("ratio", ratio)];
        if eta == 0.0 && kappa > 0.0 {
            let width = PI / a.max(f64::MIN_POSITIVE);
            let mut env: f64 = 0.0;
            for i in 0..24 {
                let k = kappa + width * i as f64 / 23.0;
                env = env.max(sup_signed(p, k, 0.0, &grid, search)?.0);
            }
            params.push(("envelope", env));
            slope_k.push(kappa);
            slope_v.push(env);
        }
        samples.push(Sample::new(params, v));
    }
    let slope = loglog_slope(&slope_k, &slope_v);
    Ok(EstimateReport::new(
        "decay_bound",
        samples,
        slope,
        Some(c),
        Rule::ExponentAtMost,
        -ell + 0.5,
    ))
}

fn quad_opts(rel: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: 0.0,
        rel_tol: rel,
        max_intervals: 4000,
    }
}

/// `(B(r), bound)`: the `t`-integral
/// `∫_{−1}^{1} dt / ([(r−κt)² + η²t²]^{1/2} (1+γ+r²−2rκt)^{ℓ/2})`
/// by adaptive quadrature split at `t₀ = rκ/γ`, and the closed-form upper
/// bound `ln[(1−u+√((1−u)²+v²))(1+u+√((1+u)²+v²))/v²] / (√γ (1+η²+(r−κ)²)^{ℓ/2})`
/// with `u = rκ/γ`, `v = ηr/γ`.
///
/// When `v = 0` and `|u| ≤ 1` the integrand has a non-integrable `1/|t−u|`
/// singularity (this covers `r = 0`, and `η = 0` with `r ≤ κ`), reported as
/// `NearSingular`.
pub fn b_integral(r: f64, freq: ComplexFrequency, ell: f64) -> Result<(f64, f64)> {
    let (kappa, eta) = (freq.kappa, freq.eta);
    let gamma = freq.gamma();
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Range(format!("r = {r} must be finite and non-negative")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Range("gamma must be positive".into()));
    }
    let u = r * kappa / gamma;
    let v = eta * r / gamma;
    if v == 0.0 && u.abs() <= 1.0 {
        return Err(Error::NearSingular(format!(
            "t-integrand is singular at t = {u} (r = {r}, kappa = {kappa}, eta = {eta})"
        )));
    }
    let low = 1.0 + eta * eta + (r - kappa) * (r - kappa);
    let mut interior = vec![u];
    if r * kappa > 0.0 {
        interior.push(1.0 - low / (2.0 * r * kappa));
    }
    let breaks = breakpoints(-1.0, 1.0, interior);
    let numeric = integrate_breaks(
        |t: f64| {
            let q = (r - kappa * t).powi(2) + eta * eta * t * t;
            let w = 1.0 + gamma + r * r - 2.0 * r * kappa * t;
            1.0 / (q.sqrt() * w.powf(ell / 2.0))
        },
        &breaks,
        &quad_opts(1e-11),
        "B(r) t-integral",
    )?;
    let (a1, a2) = (1.0 - u, 1.0 + u);
    let log = if v > 0.0 {
        // a + √(a²+v²), rewritten for a < 0 to avoid cancellation
        let lift = |a: f64| {
            let h = a.hypot(v);
            if a >= 0.0 { a + h } else { v * v / (h - a) }
        };
        (lift(a1) * lift(a2) / (v * v)).ln()
    } else {
        (a2.abs() / a1.abs()).ln().abs()
    };
    let bound = log / (gamma.sqrt() * low.powf(ell / 2.0));
    Ok((numeric, bound))
}

/// `J = 2π ∫₀^∞ r B(r) dr`. The outer integral is split around `r = κ`
/// where the second factor of `B` peaks, and its tail is mapped to a finite
/// interval; `B` values are memoized by `r`.
pub fn j_integral(freq: ComplexFrequency, ell: f64) -> Result<f64> {
    if !(ell > 2.0) {
        return Err(Error::Admissibility(format!("J needs ell > 2, got {ell}")));
    }
    let kappa = freq.kappa;
    let memo: RefCell<HashMap<u64, f64>> = RefCell::new(HashMap::new());
    let mut failure = None;
    let mut rb = |r: f64| -> f64 {
        if let Some(v) = memo.borrow().get(&r.to_bits()) {
            return *v;
        }
        let v = match b_integral(r, freq, ell) {
            Ok((b, _)) => r * b,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        memo.borrow_mut().insert(r.to_bits(), v);
        v
    };
    let width = 5.0 * (1.0 + freq.eta * freq.eta).sqrt();
    let start = kappa + width;
    let breaks = breakpoints(0.0, start, [(kappa - width).max(0.5 * kappa), kappa]);
    let opts = quad_opts(1e-9);
    let body = integrate_breaks(&mut rb, &breaks, &opts, "J near part")?;
    // r = start + x/(1−x)
    let tail = integrate_breaks(
        |x: f64| {
            let s = 1.0 - x;
            if s <= 0.0 {
                return 0.0;
            }
            rb(start + x / s) / (s * s)
        },
        &[0.0, 0.5, 0.9, 1.0],
        &opts,
        "J tail",
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * PI * (body + tail))
}

/// `I = sup_β ∫_{ℝ³} |q̃((κ+iη)β − s)| / |s² − (κ+iη)β·s| ds` in spherical
/// coordinates aligned with `β`. For a centred radial `q` the value does not
/// depend on `β` and the azimuthal integral is exact.
pub fn i_leading(q: &PotentialSpec, freq: ComplexFrequency, beta_grid: &[Vec3]) -> Result<f64> {
    q.check_admissible()?;
    if !(freq.eta > 0.0) {
        return Err(Error::Range("the leading-term integral needs eta > 0".into()));
    }
    check_eta(q, freq.eta)?;
    let transforms = q.radial_transforms();
    if transforms.is_empty() || q.is_zero() {
        return Ok(0.0);
    }
    if q.is_centered_radial() {
        return i_leading_direction(&transforms, freq, &Vec3::z(), true);
    }
    let mut best: f64 = 0.0;
    for beta in beta_grid {
        best = best.max(i_leading_direction(&transforms, freq, &beta.normalize(), false)?);
    }
    Ok(best)
}

fn i_leading_direction(transforms: &[RadialTransform], freq: ComplexFrequency, beta: &Vec3, radial: bool) -> Result<f64> {
    let zeta = freq.two_k();
    let (kappa, eta) = (freq.kappa, freq.eta);
    let gamma = freq.gamma();
    let (e2, e3) = complete_frame(beta);
    const N_PSI: usize = 48;
    let psi: Vec<(f64, f64)> = (0..N_PSI)
        .map(|j| (2.0 * PI * j as f64 / N_PSI as f64).sin_cos())
        .collect();
    let phase0: Vec<Complex64> = transforms
        .iter()
        .map(|t| (Complex64::i() * zeta * beta.dot(&t.center)).exp())
        .collect();
    let mut failure = None;
    let inner = |r: f64, failure: &mut Option<Error>| -> f64 {
        let u = r * kappa / gamma;
        let breaks = breakpoints(-1.0, 1.0, [u]);
        let res = integrate_breaks(
            |t: f64| {
                let w = (zeta * zeta - 2.0 * zeta * r * t + r * r).sqrt();
                let denom = (Complex64::new(r, 0.0) - zeta * t).norm();
                let phis: Vec<Complex64> = transforms.iter().map(|tr| tr.eval(w)).collect();
                let mag = if radial {
                    2.0 * PI * phis.iter().sum::<Complex64>().norm()
                } else {
                    let st = (1.0 - t * t).max(0.0).sqrt();
                    let mut acc = 0.0;
                    for (sp, cp) in &psi {
                        let s = (beta * t + (e2 * *cp + e3 * *sp) * st) * r;
                        let v: Complex64 = transforms
                            .iter()
                            .zip(&phis)
                            .zip(&phase0)
                            .map(|((tr, phi), ph)| ph * (-Complex64::i() * s.dot(&tr.center)).exp() * phi)
                            .sum();
                        acc += v.norm();
                    }
                    acc * 2.0 * PI / N_PSI as f64
                };
                mag / denom
            },
            &breaks,
            &quad_opts(1e-8),
            "leading term t-integral",
        );
        match res {
            Ok(v) => r * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let spread = 8.0 * eta + 5.0;
    let far = 3.0 * kappa + 50.0;
    let breaks = breakpoints(0.0, far, [kappa - spread, kappa - 3.0, kappa, kappa + 3.0, kappa + spread]);
    let opts = quad_opts(1e-7);
    let body = integrate_breaks(|r: f64| inner(r, &mut failure), &breaks, &opts, "leading term")?;
    let tail = integrate_breaks(
        |x: f64| {
            let s = 1.0 - x;
            if s <= 0.0 {
                return 0.0;
            }
            inner(far + x / s, &mut failure) / (s * s)
        },
        &[0.0, 0.5, 0.9, 1.0],
        &opts,
        "leading term tail",
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(body + tail)
}
