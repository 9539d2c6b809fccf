//! Volume integral equation for the scattering solution on a cubic grid.
//!
//! The unknown is the reduced field `ε`, `u = e^{ikα·x}(1 + ε)`, solving
//! `ε + Tε = −T1` with `(Tf)(x) = ∫ G(x−y) q(y) f(y) dy`. The operator is a
//! midpoint Nyström rule whose weakly singular self cell is integrated over
//! the volume-equivalent ball; its Toeplitz structure is applied through a
//! zero-padded circulant FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheKey, FieldCache};
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::geometry::Vec3;
use crate::kernels::{reduced_kernel_unchecked, KernelParams};
use crate::potentials::{ComplexFrequency, PotentialGrid};
use crate::report::fmt_f64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldVariant {
    FullU,
    Epsilon,
}

/// Complex samples of `u` or `ε` on the grid of a [`PotentialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringField {
    pub n: usize,
    pub a: f64,
    pub alpha: Vec3,
    pub freq: ComplexFrequency,
    pub values: Vec<Complex64>,
    pub variant: FieldVariant,
}

fn axis(n: usize, a: f64, i: usize) -> f64 {
    -a + (i as f64 + 0.5) * 2.0 * a / n as f64
}

fn grid_point(n: usize, a: f64, idx: usize) -> Vec3 {
    Vec3::new(axis(n, a, idx % n), axis(n, a, (idx / n) % n), axis(n, a, idx / (n * n)))
}

/// `e^{i k d·x}` at every grid point.
fn plane_wave(n: usize, a: f64, d: &Vec3, k: Complex64) -> Vec<Complex64> {
    (0..n * n * n)
        .map(|idx| (Complex64::i() * k * d.dot(&grid_point(n, a, idx))).exp())
        .collect()
}

impl ScatteringField {
    /// The incident wave `e^{ikα·x}`, the solution for `q ≡ 0`.
    pub fn incident(grid: &PotentialGrid, alpha: &Vec3, freq: ComplexFrequency) -> Self {
        let alpha = alpha.normalize();
        Self {
            n: grid.n(),
            a: grid.a(),
            alpha,
            freq,
            values: plane_wave(grid.n(), grid.a(), &alpha, freq.k()),
            variant: FieldVariant::FullU,
        }
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        grid_point(self.n, self.a, idx)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.a / self.n as f64
    }

    fn check_grid(&self, q: &PotentialGrid) -> Result<()> {
        if self.n != q.n() || self.a != q.a() || self.values.len() != q.len() {
            return Err(Error::GridMismatch(format!(
                "field (n={}, a={}) vs potential (n={}, a={})",
                self.n,
                self.a,
                q.n(),
                q.a()
            )));
        }
        Ok(())
    }

    /// `u = e^{ikα·x}(1 + ε)`.
    pub fn to_full_u(&self) -> Self {
        match self.variant {
            FieldVariant::FullU => self.clone(),
            FieldVariant::Epsilon => {
                let wave = plane_wave(self.n, self.a, &self.alpha, self.freq.k());
                Self {
                    values: self.values.iter().zip(wave).map(|(e, w)| w * (ONE + e)).collect(),
                    variant: FieldVariant::FullU,
                    ..self.clone()
                }
            }
        }
    }

    /// `ε = e^{−ikα·x} u − 1`.
    pub fn to_epsilon(&self) -> Self {
        match self.variant {
            FieldVariant::Epsilon => self.clone(),
            FieldVariant::FullU => {
                let wave = plane_wave(self.n, self.a, &-self.alpha, self.freq.k());
                Self {
                    values: self.values.iter().zip(wave).map(|(u, w)| w * u - ONE).collect(),
                    variant: FieldVariant::Epsilon,
                    ..self.clone()
                }
            }
        }
    }
}

/// Discrete volume operator `f ↦ Σ_y K(x−y) q(y) f(y)` for one frequency and
/// modulation direction. `K(0) = ρ²/2` with `ρ = h(3/4π)^{1/3}`, and
/// `K(m) = G(hm) h³` otherwise; a zero modulation gives the free kernel.
pub struct VolumeOperator {
    n: usize,
    m: usize,
    q: Vec<f64>,
    table: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
    transpose_hat: Vec<Complex64>,
    forward: Fft3,
    inverse: Fft3,
}

impl VolumeOperator {
    pub fn new(q: &PotentialGrid, freq: ComplexFrequency, modulation: &Vec3) -> Self {
        let n = q.n();
        let h = q.h();
        let k = freq.k();
        let span = 2 * n - 1;
        let off = n as i64 - 1;
        let mut table = vec![ZERO; span * span * span];
        for c in 0..span {
            for b in 0..span {
                for a in 0..span {
                    let d = Vec3::new(
                        (a as i64 - off) as f64 * h,
                        (b as i64 - off) as f64 * h,
                        (c as i64 - off) as f64 * h,
                    );
                    let r = d.norm();
                    table[a + span * (b + span * c)] = if r == 0.0 {
                        let rho = h * (3.0 / (4.0 * PI)).cbrt();
                        Complex64::new(rho * rho / 2.0, 0.0)
                    } else {
                        reduced_kernel_unchecked(r, modulation.dot(&d), k) * h.powi(3)
                    };
                }
            }
        }
        let m = 2 * n;
        let forward = Fft3::new(m, FftDirection::Forward);
        let inverse = Fft3::new(m, FftDirection::Inverse);
        let embed = |reflect: bool| {
            let mut data = vec![ZERO; m * m * m];
            for c in 0..span {
                for b in 0..span {
                    for a in 0..span {
                        let s = |v: usize| {
                            let d = v as i64 - off;
                            let d = if reflect { -d } else { d };
                            d.rem_euclid(m as i64) as usize
                        };
                        data[s(a) + m * (s(b) + m * s(c))] = table[a + span * (b + span * c)];
                    }
                }
            }
            forward.process(&mut data);
            data
        };
        let kernel_hat = embed(false);
        let transpose_hat = embed(true);
        Self {
            n,
            m,
            q: q.values().to_vec(),
            table,
            kernel_hat,
            transpose_hat,
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn convolve(&self, g: &[Complex64], hat: &[Complex64]) -> Vec<Complex64> {
        let (n, m) = (self.n, self.m);
        let mut data = vec![ZERO; m * m * m];
        for k in 0..n {
            for j in 0..n {
                let src = n * (j + n * k);
                let dst = m * (j + m * k);
                data[dst..dst + n].copy_from_slice(&g[src..src + n]);
            }
        }
        self.forward.process(&mut data);
        for (d, h) in data.iter_mut().zip(hat) {
            *d *= h;
        }
        self.inverse.process(&mut data);
        let scale = 1.0 / (m * m * m) as f64;
        let mut out = vec![ZERO; n * n * n];
        for k in 0..n {
            for j in 0..n {
                let src = m * (j + m * k);
                let dst = n * (j + n * k);
                for i in 0..n {
                    out[dst + i] = data[src + i] * scale;
                }
            }
        }
        out
    }

    /// `T f`.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g: Vec<Complex64> = f.iter().zip(&self.q).map(|(v, q)| v * q).collect();
        self.convolve(&g, &self.kernel_hat)
    }

    /// `Tᵀ f` (plain transpose, no conjugation).
    pub fn apply_transpose(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.convolve(f, &self.transpose_hat);
        for (o, q) in out.iter_mut().zip(&self.q) {
            *o *= q;
        }
        out
    }

    /// `T f` by direct summation; `O(N²)`, used to validate the FFT path.
    pub fn apply_direct(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n as i64;
        let span = (2 * n - 1) as usize;
        let len = self.len();
        let coords = |idx: usize| {
            let idx = idx as i64;
            (idx % n, (idx / n) % n, idx / (n * n))
        };
        (0..len)
            .map(|x| {
                let (xi, xj, xk) = coords(x);
                let mut acc = ZERO;
                for y in 0..len {
                    if self.q[y] == 0.0 {
                        continue;
                    }
                    let (yi, yj, yk) = coords(y);
                    let t = (xi - yi + n - 1) as usize
                        + span * ((xj - yj + n - 1) as usize + span * (xk - yk + n - 1) as usize);
                    acc += self.table[t] * self.q[y] * f[y];
                }
                acc
            })
            .collect()
    }
}

/// Iteration scheme for the reduced equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    NeumannSeries,
    KrylovIteration,
    /// Neumann when the `‖T²‖^{1/2}` proxy is below 0.8, Krylov otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub neumann_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 500,
            restart: 40,
            neumann_threshold: 0.8,
        }
    }
}

/// What the iteration did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    /// Final `‖ε + Tε + T1‖₂ / ‖T1‖₂`.
    pub residual: f64,
    /// `‖T²‖^{1/2}` proxy; computed only when the method needs it.
    pub proxy: Option<f64>,
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn norm_inf(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Power-iteration estimate of the spectral radius of `T²`, square-rooted.
pub fn spectral_proxy(op: &VolumeOperator, steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> = (0..op.len())
        .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let mut ratio = 0.0;
    for _ in 0..steps.max(1) {
        let before = norm2(&v);
        if before == 0.0 {
            return 0.0;
        }
        let w = op.apply(&op.apply(&v));
        let after = norm2(&w);
        ratio = after / before;
        if after == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|z| z / after).collect();
    }
    ratio.sqrt()
}

/// Restarted GMRES for `(I + T) x = b`.
fn gmres(op: &VolumeOperator, b: &[Complex64], opts: &SolveOptions) -> Result<(Vec<Complex64>, usize, f64)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let t = op.apply(v);
        v.iter().zip(t).map(|(a, b)| a + b).collect()
    };
    let restart = opts.restart.max(2);
    let mut total = 0;
    let mut rel = 1.0;
    while total < opts.max_iterations {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel < opts.tol {
            return Ok((x, total, rel));
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<Complex64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut steps = 0;
        for j in 0..restart {
            if total >= opts.max_iterations {
                break;
            }
            let mut w = apply(&basis[j]);
            let mut col = vec![ZERO; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let dot: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                col[i] = dot;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= dot * vk;
                }
            }
            let wn = norm2(&w);
            col[j + 1] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * col[i] + sn[i].conj() * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 { (ONE, ZERO) } else { (a / denom, bb / denom) };
            col[j] = c.conj() * a + s.conj() * bb;
            col[j + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c.conj() * gj;
            g.push(-s * gj);
            hess.push(col);
            steps += 1;
            total += 1;
            rel = g[j + 1].norm() / bnorm;
            if rel < opts.tol || wn == 0.0 {
                break;
            }
            basis.push(w.into_iter().map(|z| z / wn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![ZERO; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().take(steps).skip(i + 1) {
                acc -= hess[l][i] * yl;
            }
            y[i] = acc / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[i]) {
                *xk += yi * vk;
            }
        }
    }
    let ax = apply(&x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let final_rel = norm2(&r) / bnorm;
    if final_rel < opts.tol {
        Ok((x, total, final_rel))
    } else {
        Err(Error::NotConverged {
            iterations: total,
            residual: final_rel.max(rel),
        })
    }
}

fn neumann(op: &VolumeOperator, b: &[Complex64], opts: &SolveOptions) -> Result<(Vec<Complex64>, usize, f64)> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![ZERO; b.len()], 0, 0.0));
    }
    let mut x = b.to_vec();
    for it in 1..=opts.max_iterations {
        let tx = op.apply(&x);
        let next: Vec<Complex64> = b.iter().zip(&tx).map(|(b, t)| b - t).collect();
        // The step is the residual of the current iterate.
        let step = next.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / bnorm;
        x = next;
        if step < opts.tol {
            return Ok((x, it, step));
        }
        if !step.is_finite() {
            return Err(Error::NotConverged {
                iterations: it,
                residual: step,
            });
        }
    }
    let tx = op.apply(&x);
    let res = x.iter().zip(&tx).zip(b).map(|((x, t), b)| (x + t - b).norm_sqr()).sum::<f64>().sqrt() / bnorm;
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: res,
    })
}

/// Solves for the reduced field `ε` and reports how.
pub fn solve_epsilon(
    q: &PotentialGrid,
    alpha: &Vec3,
    freq: ComplexFrequency,
    method: SolveMethod,
    opts: &SolveOptions,
) -> Result<(ScatteringField, SolveStats)> {
    let alpha = alpha.normalize();
    let op = VolumeOperator::new(q, freq, &alpha);
    let ones = vec![ONE; q.len()];
    let b: Vec<Complex64> = op.apply(&ones).into_iter().map(|z| -z).collect();
    let (chosen, proxy) = match method {
        SolveMethod::KrylovIteration => (SolveMethod::KrylovIteration, None),
        SolveMethod::NeumannSeries => {
            let p = spectral_proxy(&op, 12);
            if p >= 1.0 {
                return Err(Error::SeriesDivergent { proxy: p });
            }
            (SolveMethod::NeumannSeries, Some(p))
        }
        SolveMethod::Auto => {
            let p = spectral_proxy(&op, 12);
            if p < opts.neumann_threshold {
                (SolveMethod::NeumannSeries, Some(p))
            } else {
                (SolveMethod::KrylovIteration, Some(p))
            }
        }
    };
    let (values, iterations, residual) = match chosen {
        SolveMethod::NeumannSeries => neumann(&op, &b, opts)?,
        _ => gmres(&op, &b, opts)?,
    };
    let field = ScatteringField {
        n: q.n(),
        a: q.a(),
        alpha,
        freq,
        values,
        variant: FieldVariant::Epsilon,
    };
    Ok((
        field,
        SolveStats {
            method: chosen,
            iterations,
            residual,
            proxy,
        },
    ))
}

/// Scattering solution `u(x, α, k)` with `k = (κ+iη)/2`.
pub fn solve_scattering(
    q: &PotentialGrid,
    alpha: &Vec3,
    freq: ComplexFrequency,
    method: SolveMethod,
    opts: &SolveOptions,
) -> Result<ScatteringField> {
    Ok(solve_epsilon(q, alpha, freq, method, opts)?.0.to_full_u())
}

/// `Tε` for a field on the grid of `q`, with the kernel modulated along
/// `params.beta`.
pub fn apply_t(field: &ScatteringField, q: &PotentialGrid, params: &KernelParams) -> Result<ScatteringField> {
    field.check_grid(q)?;
    let op = VolumeOperator::new(q, params.freq, &params.beta);
    Ok(ScatteringField {
        values: op.apply(&field.values),
        ..field.clone()
    })
}

/// Relative sup-norm residual of the discrete equation the field satisfies:
/// `ε + Tε + T1 = 0` for [`FieldVariant::Epsilon`], and
/// `u + g∗(qu) = e^{ikα·x}` for [`FieldVariant::FullU`].
pub fn equation_residual(field: &ScatteringField, q: &PotentialGrid) -> Result<f64> {
    field.check_grid(q)?;
    match field.variant {
        FieldVariant::Epsilon => {
            let op = VolumeOperator::new(q, field.freq, &field.alpha);
            let t1 = op.apply(&vec![ONE; q.len()]);
            let te = op.apply(&field.values);
            let r: Vec<Complex64> = field.values.iter().zip(&te).zip(&t1).map(|((e, a), b)| e + a + b).collect();
            let scale = norm_inf(&t1);
            Ok(if scale > 0.0 { norm_inf(&r) / scale } else { norm_inf(&r) })
        }
        FieldVariant::FullU => {
            let op = VolumeOperator::new(q, field.freq, &Vec3::zeros());
            let gu = op.apply(&field.values);
            let wave = plane_wave(field.n, field.a, &field.alpha, field.freq.k());
            let r: Vec<Complex64> = field.values.iter().zip(&gu).zip(&wave).map(|((u, g), w)| u + g - w).collect();
            Ok(norm_inf(&r) / norm_inf(&wave))
        }
    }
}

/// One scattering amplitude `A(β, α, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSample {
    pub beta: Vec3,
    pub alpha: Vec3,
    pub freq: ComplexFrequency,
    pub value: Complex64,
}

/// `A(β, α, k) = −(1/4π) Σ e^{−ikβ·y} q(y) u(y) h³`.
pub fn amplitude(q: &PotentialGrid, u: &ScatteringField, beta: &Vec3) -> Result<AmplitudeSample> {
    u.check_grid(q)?;
    let beta = beta.normalize();
    let k = u.freq.k();
    let h3 = q.cell_volume();
    let mut acc = ZERO;
    match u.variant {
        FieldVariant::FullU => {
            for (idx, (&qv, uv)) in q.values().iter().zip(&u.values).enumerate() {
                if qv != 0.0 {
                    acc += (-Complex64::i() * k * beta.dot(&u.point(idx))).exp() * qv * uv;
                }
            }
        }
        FieldVariant::Epsilon => {
            let d = u.alpha - beta;
            for (idx, (&qv, ev)) in q.values().iter().zip(&u.values).enumerate() {
                if qv != 0.0 {
                    acc += (Complex64::i() * k * d.dot(&u.point(idx))).exp() * qv * (ONE + ev);
                }
            }
        }
    }
    Ok(AmplitudeSample {
        beta,
        alpha: u.alpha,
        freq: u.freq,
        value: -acc * h3 / (4.0 * PI),
    })
}

/// Solver settings plus an optional field cache, shared by the sweeps.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub method: SolveMethod,
    pub options: SolveOptions,
    pub cache: Option<FieldCache>,
}

impl Default for SolverContext {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            options: SolveOptions::default(),
            cache: None,
        }
    }
}

impl SolverContext {
    /// `ε` for `(q, α, freq)`, from the cache when possible.
    pub fn epsilon(&self, q: &PotentialGrid, alpha: &Vec3, freq: ComplexFrequency) -> Result<ScatteringField> {
        let alpha = alpha.normalize();
        let key = CacheKey {
            spec_hash: q.spec_hash().to_string(),
            n: q.n(),
            a: q.a(),
            freq,
            alpha,
            tol: self.options.tol,
        };
        let cacheable = self.cache.is_some() && !q.spec_hash().is_empty();
        if cacheable {
            if let Some(f) = self.cache.as_ref().expect("cache present").load(&key)? {
                return Ok(f.to_epsilon());
            }
        }
        let (field, _) = solve_epsilon(q, &alpha, freq, self.method, &self.options)?;
        if cacheable {
            self.cache.as_ref().expect("cache present").store(&key, &field)?;
        }
        Ok(field)
    }
}

/// One row of an amplitude table; failed entries keep the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEntry {
    pub beta: [f64; 3],
    pub alpha: [f64; 3],
    pub freq: ComplexFrequency,
    pub value: Option<Complex64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTable {
    pub entries: Vec<AmplitudeEntry>,
}

impl AmplitudeTable {
    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_some())
    }

    /// First failed entry, if any.
    pub fn first_error(&self) -> Option<&str> {
        self.entries.iter().find_map(|e| e.error.as_deref())
    }

    /// `max |A_self − A_other|` over entries present in both tables.
    pub fn max_gap(&self, other: &AmplitudeTable) -> Result<f64> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::InconsistentGrid("amplitude tables have different shapes".into()));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .filter_map(|(a, b)| Some((a.value? - b.value?).norm()))
            .fold(0.0, f64::max))
    }

    /// CSV with columns
    /// `beta_x,beta_y,beta_z,alpha_x,alpha_y,alpha_z,kappa,eta,re_A,im_A`;
    /// failed entries have empty amplitude cells.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "beta_x,beta_y,beta_z,alpha_x,alpha_y,alpha_z,kappa,eta,re_A,im_A")?;
        for e in &self.entries {
            let (re, im) = e
                .value
                .map(|v| (fmt_f64(v.re), fmt_f64(v.im)))
                .unwrap_or_default();
            let cols: Vec<String> = e
                .beta
                .iter()
                .chain(&e.alpha)
                .chain([&e.freq.kappa, &e.freq.eta])
                .map(|v| fmt_f64(*v))
                .collect();
            writeln!(w, "{},{re},{im}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Backscattering data `A(−β, β, k)` for every direction and frequency, one
/// solve per entry, entries computed in parallel.
pub fn backscatter_sweep(
    q: &PotentialGrid,
    betas: &[Vec3],
    freqs: &[ComplexFrequency],
    ctx: &SolverContext,
) -> AmplitudeTable {
    let items: Vec<(Vec3, ComplexFrequency)> = freqs
        .iter()
        .flat_map(|f| betas.iter().map(move |b| (b.normalize(), *f)))
        .collect();
    let entries = items
        .par_iter()
        .map(|(beta, freq)| {
            let result = ctx
                .epsilon(q, beta, *freq)
                .and_then(|eps| amplitude(q, &eps, &-beta));
            let (value, error) = match result {
                Ok(s) => (Some(s.value), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AmplitudeEntry {
                beta: (-beta).into(),
                alpha: (*beta).into(),
                freq: *freq,
                value,
                error,
            }
        })
        .collect();
    AmplitudeTable { entries }
}

/// `(−4π(A₁(β,α) − A₂(β,α)), Σ (q₁−q₂) u₁(x,α) u₂(x,−β) h³)`.
pub fn amplitude_difference_check(
    q1: &PotentialGrid,
    q2: &PotentialGrid,
    beta: &Vec3,
    alpha: &Vec3,
    freq: ComplexFrequency,
    ctx: &SolverContext,
) -> Result<(Complex64, Complex64)> {
    if !q1.same_geometry(q2) {
        return Err(Error::GridMismatch("the two potentials use different grids".into()));
    }
    let beta = beta.normalize();
    let u1 = ctx.epsilon(q1, alpha, freq)?;
    let a1 = amplitude(q1, &u1, &beta)?.value;
    let a2 = amplitude(q2, &ctx.epsilon(q2, alpha, freq)?, &beta)?.value;
    let u1 = u1.to_full_u();
    let u2 = ctx.epsilon(q2, &-beta, freq)?.to_full_u();
    let integral: Complex64 = q1
        .values()
        .iter()
        .zip(q2.values())
        .zip(u1.values.iter().zip(&u2.values))
        .map(|((a, b), (x, y))| (a - b) * x * y)
        .sum::<Complex64>()
        * q1.cell_volume();
    Ok((-4.0 * PI * (a1 - a2), integral))
}

/// Randomized lower bound for the sup-norm of the discrete `T²`.
///
/// Each probe starts from a random unimodular field; the row of `T²` where
/// `|T²f|` peaks is extracted with the transpose and the field is replaced by
/// the conjugate phases of that row, which attains the row's absolute sum.
/// Repeats until the row stops changing.
pub fn t2_norm_probe(q: &PotentialGrid, freq: ComplexFrequency, beta: &Vec3, probes: usize, seed: u64) -> f64 {
    let op = VolumeOperator::new(q, freq, &beta.normalize());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..probes.max(1) {
        let mut f: Vec<Complex64> = (0..op.len())
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let mut last_row = usize::MAX;
        for _ in 0..6 {
            let w = op.apply(&op.apply(&f));
            let (row, val) = w
                .iter()
                .enumerate()
                .map(|(i, z)| (i, z.norm()))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            best = best.max(val);
            if row == last_row || val == 0.0 {
                break;
            }
            last_row = row;
            let mut e = vec![ZERO; op.len()];
            e[row] = ONE;
            let r = op.apply_transpose(&op.apply_transpose(&e));
            f = r
                .iter()
                .map(|z| if z.norm() > 0.0 { z.conj() / z.norm() } else { ONE })
                .collect();
        }
    }
    best
}
