//! The kernel of `T²` through prolate spheroidal coordinates with foci `x`
//! and `y`, and a sup-norm estimate of `‖T²‖` built on it.
//!
//! With `σ = ℓs` the kernel reduces to
//! `I₁(x, y) = ∫_ℓ^∞ e^{2iwσ} Q(σ) dσ`, `Q(σ) = ∫∫ q(z(σ/ℓ, t, ψ)) dt dψ`.
//! `Q` does not depend on the wavenumber, so it is tabulated once per pair
//! of foci on adaptive Chebyshev panels and reused for every frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{complete_frame, random_in_ball, Vec3};
use crate::potentials::{Component, ComplexFrequency, PotentialSpec, Profile};
use crate::quadrature::{breakpoints, integrate_breaks, GaussLegendre, QuadOptions};

const CHEB: usize = 16;
const MAX_DEPTH: usize = 40;

/// `∫_0^{2π} g(A − B cos φ) dφ` for the radial profile `g(r²)` of `comp`.
fn azimuthal(comp: &Component, a: f64, b: f64) -> f64 {
    let rr = comp.radius * comp.radius;
    if b <= 0.0 {
        return 2.0 * PI * comp.value_at_radius_sq(a);
    }
    let cstar = (a - rr) / b;
    if cstar >= 1.0 {
        return 0.0;
    }
    let phi_max = if cstar <= -1.0 { PI } else { cstar.acos() };
    match comp.profile {
        Profile::Constant(v) => 2.0 * v * phi_max,
        Profile::Poly { amplitude, order } => {
            let rule = GaussLegendre::get(order as usize + 16);
            let alpha = 1.0 - a / rr;
            let beta = b / rr;
            2.0 * amplitude
                * rule.integrate(0.0, phi_max, |phi| {
                    (alpha + beta * phi.cos()).max(0.0).powi(order as i32)
                })
        }
    }
}

/// Component data in the frame of one pair of foci.
struct Placed {
    comp: Component,
    along: f64,
    off: f64,
}

/// Spheroidal frame of the foci `x`, `y` and the placed components.
struct Foci {
    ell: f64,
    placed: Vec<Placed>,
    breaks: Vec<f64>,
    scale: f64,
}

impl Foci {
    fn new(q: &PotentialSpec, x: &Vec3, y: &Vec3) -> Result<Self> {
        let d = y - x;
        let ell = 0.5 * d.norm();
        if ell < 1e-12 {
            return Err(Error::DegenerateFoci { distance: 2.0 * ell });
        }
        let e1 = d / (2.0 * ell);
        let mid = 0.5 * (x + y);
        let mut placed = Vec::new();
        let mut breaks = vec![ell];
        let mut sigma_hi = ell;
        let mut qmax: f64 = 0.0;
        for comp in q.components() {
            if comp.profile_is_zero() {
                continue;
            }
            let w = comp.center - mid;
            let along = w.dot(&e1);
            let off = (w - e1 * along).norm();
            let centre_sum = 0.5 * ((x - comp.center).norm() + (y - comp.center).norm());
            let hi = centre_sum + comp.radius;
            breaks.push((centre_sum - comp.radius).max(ell));
            breaks.push(hi);
            sigma_hi = sigma_hi.max(hi);
            qmax = qmax.max(comp.value_at_radius(0.0).abs()).max(comp.value_at_radius(0.999 * comp.radius).abs());
            placed.push(Placed { comp, along, off });
        }
        let breaks = breakpoints(ell, sigma_hi, breaks);
        Ok(Self {
            ell,
            placed,
            breaks,
            scale: 4.0 * PI * qmax.max(f64::MIN_POSITIVE),
        })
    }

    /// `Q(σ)` by adaptive quadrature in `t` with the azimuthal integral exact
    /// up to a Gauss rule on a smooth integrand.
    fn q_of_sigma(&self, sigma: f64) -> Result<f64> {
        let s = (sigma / self.ell).max(1.0);
        let ell = self.ell;
        let f = |t: f64| -> f64 {
            let rho = ell * ((s * s - 1.0) * (1.0 - t * t)).max(0.0).sqrt();
            self.placed
                .iter()
                .map(|p| {
                    let a = (ell * s * t - p.along).powi(2) + rho * rho + p.off * p.off;
                    azimuthal(&p.comp, a, 2.0 * rho * p.off)
                })
                .sum()
        };
        let opts = QuadOptions {
            abs_tol: 1e-12 * self.scale,
            rel_tol: 1e-11,
            max_intervals: 2000,
        };
        integrate_breaks(f, &[-1.0, 0.0, 1.0], &opts, "Q(sigma) t-integral")
    }

    fn table(&self) -> Result<QTable> {
        let mut panels = Vec::new();
        for w in self.breaks.windows(2) {
            self.refine(w[0], w[1], 0, &mut panels)?;
        }
        Ok(QTable { panels })
    }

    fn refine(&self, lo: f64, hi: f64, depth: usize, out: &mut Vec<Panel>) -> Result<()> {
        let mut vals = [0.0; CHEB];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = self.q_of_sigma(cheb_node(lo, hi, k))?;
        }
        let panel = Panel { lo, hi, vals };
        if depth >= MAX_DEPTH {
            out.push(panel);
            return Ok(());
        }
        let mut worst: f64 = 0.0;
        for frac in [0.13, 0.37, 0.61, 0.89] {
            let sigma = lo + frac * (hi - lo);
            worst = worst.max((panel.eval(sigma) - self.q_of_sigma(sigma)?).abs());
        }
        if worst <= 1e-9 * self.scale {
            out.push(panel);
            Ok(())
        } else {
            let mid = 0.5 * (lo + hi);
            self.refine(lo, mid, depth + 1, out)?;
            self.refine(mid, hi, depth + 1, out)
        }
    }
}

fn cheb_node(lo: f64, hi: f64, k: usize) -> f64 {
    let x = (PI * k as f64 / (CHEB - 1) as f64).cos();
    0.5 * (lo + hi) + 0.5 * (hi - lo) * x
}

/// Chebyshev–Lobatto interpolant on `[lo, hi]`.
struct Panel {
    lo: f64,
    hi: f64,
    vals: [f64; CHEB],
}

impl Panel {
    fn eval(&self, sigma: f64) -> f64 {
        let x = (2.0 * sigma - self.lo - self.hi) / (self.hi - self.lo);
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..CHEB {
            let node = (PI * k as f64 / (CHEB - 1) as f64).cos();
            let diff = x - node;
            if diff.abs() < 1e-15 {
                return self.vals[k];
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == CHEB - 1 {
                w *= 0.5;
            }
            num += w * self.vals[k] / diff;
            den += w / diff;
        }
        num / den
    }
}

struct QTable {
    panels: Vec<Panel>,
}

impl QTable {
    /// `∫ e^{2iwσ} Q(σ) dσ` over the table, in sub-panels no longer than a
    /// half period `π/(2|Re w|)` with a 10-point Gauss rule on each.
    fn oscillatory(&self, w: Complex64) -> Complex64 {
        let rule = GaussLegendre::get(10);
        let half_period = if w.re.abs() > 0.0 { PI / (2.0 * w.re.abs()) } else { f64::INFINITY };
        let mut total = Complex64::new(0.0, 0.0);
        for p in &self.panels {
            let width = p.hi - p.lo;
            let pieces = ((width / half_period).ceil() as usize).max(1);
            let step = width / pieces as f64;
            for j in 0..pieces {
                let a = p.lo + step * j as f64;
                total += rule.integrate(a, a + step, |sigma| {
                    (Complex64::i() * 2.0 * w * sigma).exp() * p.eval(sigma)
                });
            }
        }
        total
    }
}

/// `I₁(x, y)` for each wavenumber in `ws`, sharing one tabulation of `Q`.
fn i1_many(q: &PotentialSpec, x: &Vec3, y: &Vec3, ws: &[Complex64]) -> Result<Vec<Complex64>> {
    let foci = Foci::new(q, x, y)?;
    if foci.placed.is_empty() {
        return Ok(vec![Complex64::new(0.0, 0.0); ws.len()]);
    }
    let table = foci.table()?;
    Ok(ws.iter().map(|w| table.oscillatory(*w)).collect())
}

/// `I₁(x, y) = ℓ ∫_1^∞ e^{2i(κ+iη)ℓs} Q(s) ds`, with
/// `Q(s) = ∫_{-1}^{1}∫_0^{2π} q(z(s, t, ψ)) dψ dt`.
pub fn appendix_i1(q: &PotentialSpec, x: &Vec3, y: &Vec3, freq: ComplexFrequency) -> Result<Complex64> {
    q.check_admissible()?;
    Ok(i1_many(q, x, y, &[freq.two_k()])?[0])
}

/// `∫ G_β(x−z) q(z) G_β(z−y) dz` with the modulated kernel
/// `G_β(r) = e^{iw(|r|−β·r)}/(4π|r|)`, `w = κ+iη`, by nested adaptive
/// quadrature in spherical coordinates centred at `x` with the polar axis
/// towards `y`. The substitution `t = 1 − u²` removes the `1/|z−y|`
/// singularity.
pub fn appendix_kernel_direct(
    q: &PotentialSpec,
    x: &Vec3,
    y: &Vec3,
    freq: ComplexFrequency,
    beta: &Vec3,
) -> Result<Complex64> {
    q.check_admissible()?;
    let d_vec = y - x;
    let d = d_vec.norm();
    if d < 1e-12 {
        return Err(Error::DegenerateFoci { distance: d });
    }
    let e1 = d_vec / d;
    let w = freq.two_k();
    struct Local {
        comp: Component,
        dist2: f64,
        along: f64,
        off: f64,
    }
    let comps: Vec<Local> = q
        .components()
        .into_iter()
        .filter(|c| !c.profile_is_zero())
        .map(|comp| {
            let v = comp.center - x;
            let along = v.dot(&e1);
            Local {
                comp,
                dist2: v.norm_squared(),
                along,
                off: (v - e1 * along).norm(),
            }
        })
        .collect();
    if comps.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut interior = vec![d];
    let mut r_max: f64 = 0.0;
    for c in &comps {
        let dist = c.dist2.sqrt();
        interior.push(dist - c.comp.radius);
        interior.push(dist);
        r_max = r_max.max(dist + c.comp.radius);
    }
    let inner_opts = QuadOptions::with_tolerance(1e-13, 1e-10);
    let outer_opts = QuadOptions::with_tolerance(1e-12, 1e-9);
    let mut failure = None;
    let inner = |r: f64, failure: &mut Option<Error>| -> Complex64 {
        let f = |u: f64| -> Complex64 {
            let t = 1.0 - u * u;
            let rho2 = (r - d).powi(2) + 2.0 * r * d * u * u;
            let rho = rho2.sqrt();
            if rho == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let st = (1.0 - t * t).max(0.0).sqrt();
            let mass: f64 = comps
                .iter()
                .map(|c| {
                    let a = c.dist2 + r * r - 2.0 * r * c.along * t;
                    azimuthal(&c.comp, a, 2.0 * r * st * c.off)
                })
                .sum();
            (Complex64::i() * w * (r + rho)).exp() * (mass * r * 2.0 * u / rho)
        };
        let u_kink = if r * d > 0.0 { (r - d).abs() / (2.0 * r * d).sqrt() } else { 0.0 };
        let breaks = breakpoints(0.0, 2f64.sqrt(), [u_kink, 2.0 * u_kink]);
        match integrate_breaks(f, &breaks, &inner_opts, "direct kernel angular integral") {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let breaks = breakpoints(0.0, r_max, interior);
    let body = integrate_breaks(|r: f64| inner(r, &mut failure), &breaks, &outer_opts, "direct kernel radial integral")?;
    if let Some(e) = failure {
        return Err(e);
    }
    let phase = (-Complex64::i() * w * beta.dot(&(x - y))).exp();
    Ok(phase * body / (16.0 * PI * PI))
}

/// Settings of the continuous `‖T²‖` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T2Options {
    /// Number of probe points `x` (at least 5).
    pub probes: usize,
    /// Gauss nodes in the radial direction of the `y` integral.
    pub radial_nodes: usize,
    /// Gauss nodes in the polar direction of the `y` integral.
    pub angular_nodes: usize,
    /// Seed for the probe points of non-radial potentials.
    pub seed: u64,
}

impl Default for T2Options {
    fn default() -> Self {
        Self {
            probes: 5,
            radial_nodes: 16,
            angular_nodes: 16,
            seed: 7,
        }
    }
}

/// Estimate of the sup-norm operator norm of `T²`,
/// `max_x ∫ |q(y)| |K(x, y)| dy` with
/// `|K(x, y)| = e^{Im k β·(x−y)} |I₁(x, y)| / (16π²)` at the solver wavenumber
/// `k = (κ+iη)/2`, maximized over probe points `x`.
pub fn t2_norm_estimate(q: &PotentialSpec, freq: ComplexFrequency, beta: &Vec3, opts: &T2Options) -> Result<f64> {
    Ok(t2_norm_sweep(q, &[freq], beta, opts)?[0])
}

/// [`t2_norm_estimate`] for several frequencies with shared `Q` tables.
pub fn t2_norm_sweep(q: &PotentialSpec, freqs: &[ComplexFrequency], beta: &Vec3, opts: &T2Options) -> Result<Vec<f64>> {
    q.check_admissible()?;
    if opts.probes < 5 {
        return Err(Error::InvalidInput(format!("at least 5 probes needed, got {}", opts.probes)));
    }
    if q.is_zero() || freqs.is_empty() {
        return Ok(vec![0.0; freqs.len()]);
    }
    let beta = beta.normalize();
    let ws: Vec<Complex64> = freqs.iter().map(|f| f.k()).collect();
    let rules = (GaussLegendre::get(opts.radial_nodes), GaussLegendre::get(opts.angular_nodes));
    let comps: Vec<Component> = q.components().into_iter().filter(|c| !c.profile_is_zero()).collect();

    // y nodes: (point, weight·|q(y)|)
    let mut ys: Vec<(Vec3, f64)> = Vec::new();
    let radial = q.is_centered_radial();
    let (e2, e3) = complete_frame(&beta);
    let azimuths = if radial { 1 } else { 2 * opts.angular_nodes };
    for c in &comps {
        for (r, wr) in rules.0.mapped(0.0, c.radius) {
            for (ct, wt) in rules.1.mapped(-1.0, 1.0) {
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..azimuths {
                    let phi = 2.0 * PI * j as f64 / azimuths as f64;
                    let dir = beta * ct + (e2 * phi.cos() + e3 * phi.sin()) * st;
                    let y = c.center + dir * r;
                    let qy: f64 = comps.iter().map(|c2| c2.value(&y)).sum::<f64>().abs();
                    let weight = wr * wt * r * r * 2.0 * PI / azimuths as f64;
                    if qy > 0.0 {
                        ys.push((y, weight * qy));
                    }
                }
            }
        }
    }

    let a = q.support_radius();
    let xs: Vec<Vec3> = if radial {
        (0..opts.probes)
            .map(|i| beta * (a * 0.9 * (2.0 * i as f64 / (opts.probes - 1) as f64 - 1.0)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut v: Vec<Vec3> = comps.iter().map(|c| c.center).collect();
        while v.len() < opts.probes {
            let c = &comps[v.len() % comps.len()];
            v.push(c.center + random_in_ball(&mut rng, 0.9 * c.radius));
        }
        v
    };

    let per_x: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|x| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; ws.len()];
            for (y, wq) in &ys {
                if (x - y).norm() < 1e-10 {
                    continue;
                }
                let i1 = i1_many(q, x, y, &ws)?;
                let proj = beta.dot(&(x - y));
                for (j, (w, v)) in ws.iter().zip(&i1).enumerate() {
                    acc[j] += wq * (w.im * proj).exp() * v.norm();
                }
            }
            Ok(acc.into_iter().map(|v| v / (16.0 * PI * PI)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..ws.len())
        .map(|j| per_x.iter().map(|v| v[j]).fold(0.0, f64::max))
        .collect())
}
