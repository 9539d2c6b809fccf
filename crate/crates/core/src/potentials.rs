//! Compactly supported real potentials: analytic families, grid sampling, and
//! their Fourier and Radon transforms.
//!
//! Every family is a finite sum of radial *components*, each supported in a
//! ball. That keeps both the pointwise value and the plane sections cheap,
//! and gives closed-form Radon profiles (polynomials in the plane offset)
//! which the complex-frequency machinery builds on.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{cdot, cdot_real, complexify, CVec3, Vec3};
use crate::quadrature::{integrate, GaussLegendre, QuadOptions};

/// Largest admissible `η·a`; beyond it `e^{ηa}` growth swamps double precision.
pub const MAX_ETA_A: f64 = 40.0;

/// Complex frequency `κ + iη`, with wavenumber `k = (κ + iη)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexFrequency {
    pub kappa: f64,
    pub eta: f64,
}

impl ComplexFrequency {
    pub fn new(kappa: f64, eta: f64) -> Result<Self> {
        if !(kappa.is_finite() && eta.is_finite()) || kappa < 0.0 || eta < 0.0 {
            return Err(Error::Range(format!(
                "frequency (kappa={kappa}, eta={eta}) must be finite and non-negative"
            )));
        }
        Ok(Self { kappa, eta })
    }

    /// Frequency of a physical (real) wavenumber `k`: `κ = 2k`, `η = 0`.
    pub fn from_wavenumber(k: f64) -> Result<Self> {
        Self::new(2.0 * k, 0.0)
    }

    pub fn gamma(&self) -> f64 {
        self.kappa * self.kappa + self.eta * self.eta
    }

    pub fn two_k(&self) -> Complex64 {
        Complex64::new(self.kappa, self.eta)
    }

    pub fn k(&self) -> Complex64 {
        Complex64::new(0.5 * self.kappa, 0.5 * self.eta)
    }

    pub fn is_real(&self) -> bool {
        self.eta == 0.0
    }
}

/// `c (1 - |x - center|²/radius²)^order` inside its ball, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyBump {
    pub order: u32,
    pub amplitude: f64,
    pub center: [f64; 3],
    pub radius: f64,
}

impl PolyBump {
    pub fn centered(order: u32, amplitude: f64, radius: f64) -> Self {
        Self {
            order,
            amplitude,
            center: [0.0; 3],
            radius,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidInput("bump order must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(format!("bump radius {} must be positive", self.radius)));
        }
        if !self.amplitude.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("bump parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    PolyBump(PolyBump),
    SumOfBumps(Vec<PolyBump>),
    /// `q = -depth` inside the centred ball; discontinuous, oracle use only.
    SquareWell { depth: f64, radius: f64 },
}

/// Analytic description of a real, compactly supported potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    family: Family,
    support_radius: f64,
    smoothness: f64,
}

impl PotentialSpec {
    /// Single bump with the largest smoothness it supports, `ℓ = m - 1`.
    pub fn poly_bump(order: u32, amplitude: f64, radius: f64) -> Result<Self> {
        Self::from_family(Family::PolyBump(PolyBump::centered(order, amplitude, radius)), None)
    }

    pub fn square_well(depth: f64, radius: f64) -> Result<Self> {
        Self::from_family(Family::SquareWell { depth, radius }, None)
    }

    /// Indicator function of the centred ball.
    pub fn ball_indicator(radius: f64) -> Result<Self> {
        Self::square_well(-1.0, radius)
    }

    pub fn zero() -> Self {
        Self {
            family: Family::SumOfBumps(Vec::new()),
            support_radius: 0.0,
            smoothness: f64::INFINITY,
        }
    }

    /// Builds a spec, validating the claimed smoothness `ℓ` against the
    /// family (`ℓ ≤ m - 1` for bumps). `None` claims the largest valid `ℓ`.
    pub fn from_family(family: Family, smoothness: Option<f64>) -> Result<Self> {
        let (support_radius, max_smoothness) = match &family {
            Family::PolyBump(b) => {
                b.validate()?;
                (Vec3::from(b.center).norm() + b.radius, b.order as f64 - 1.0)
            }
            Family::SumOfBumps(bs) => {
                for b in bs {
                    b.validate()?;
                }
                let a = bs
                    .iter()
                    .map(|b| Vec3::from(b.center).norm() + b.radius)
                    .fold(0.0, f64::max);
                let l = bs
                    .iter()
                    .map(|b| b.order as f64 - 1.0)
                    .fold(f64::INFINITY, f64::min);
                (a, l)
            }
            Family::SquareWell { depth, radius } => {
                if !(*radius > 0.0 && radius.is_finite() && depth.is_finite()) {
                    return Err(Error::InvalidInput("square well needs finite depth and positive radius".into()));
                }
                (*radius, 0.0)
            }
        };
        let smoothness = smoothness.unwrap_or(max_smoothness);
        if smoothness > max_smoothness {
            return Err(Error::Admissibility(format!(
                "claimed smoothness {smoothness} exceeds {max_smoothness} supported by the family"
            )));
        }
        Ok(Self {
            family,
            support_radius,
            smoothness,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Radius `a` of the origin-centred ball containing the support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Claimed Sobolev order `ℓ`.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn is_oracle_only(&self) -> bool {
        matches!(self.family, Family::SquareWell { .. })
    }

    /// Real, compactly supported and `ℓ > 2`.
    pub fn check_admissible(&self) -> Result<()> {
        if self.is_oracle_only() {
            return Err(Error::Admissibility("square wells and indicators are oracle-only".into()));
        }
        if self.smoothness <= 2.0 {
            return Err(Error::Admissibility(format!(
                "smoothness {} does not exceed 2",
                self.smoothness
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|c| c.profile.is_zero())
    }

    /// True when the potential is a function of `|x|` alone.
    pub fn is_centered_radial(&self) -> bool {
        self.components().iter().all(|c| c.center.norm() == 0.0)
    }

    /// `q1 - q2` for bump families, with like bumps merged.
    pub fn difference(q1: &PotentialSpec, q2: &PotentialSpec) -> Result<PotentialSpec> {
        let bumps = |q: &PotentialSpec| -> Result<Vec<PolyBump>> {
            match &q.family {
                Family::PolyBump(b) => Ok(vec![*b]),
                Family::SumOfBumps(bs) => Ok(bs.clone()),
                Family::SquareWell { .. } => Err(Error::Admissibility(
                    "differences are only formed between bump families".into(),
                )),
            }
        };
        let mut merged: Vec<PolyBump> = bumps(q1)?;
        for mut b in bumps(q2)? {
            b.amplitude = -b.amplitude;
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.order == b.order && m.radius == b.radius && m.center == b.center)
            {
                m.amplitude += b.amplitude;
            } else {
                merged.push(b);
            }
        }
        merged.retain(|b| b.amplitude != 0.0);
        let smoothness = q1.smoothness.min(q2.smoothness);
        if merged.is_empty() {
            let mut z = PotentialSpec::zero();
            z.smoothness = smoothness;
            return Ok(z);
        }
        PotentialSpec::from_family(Family::SumOfBumps(merged), Some(smoothness))
    }

    /// Same potential translated/rotated: `x ↦ q(R^T x)`.
    pub fn rotated(&self, rotation: &nalgebra::Rotation3<f64>) -> PotentialSpec {
        let rot = |b: &PolyBump| PolyBump {
            center: (rotation * Vec3::from(b.center)).into(),
            ..*b
        };
        let family = match &self.family {
            Family::PolyBump(b) => Family::PolyBump(rot(b)),
            Family::SumOfBumps(bs) => Family::SumOfBumps(bs.iter().map(rot).collect()),
            Family::SquareWell { .. } => self.family.clone(),
        };
        PotentialSpec { family, ..self.clone() }
    }

    /// `Σ |∫ c dx|` over the radial components; the error scale used when
    /// the net mass may cancel.
    pub fn component_mass(&self) -> f64 {
        self.components().iter().map(|c| c.mass().abs()).sum()
    }

    pub(crate) fn components(&self) -> Vec<Component> {
        match &self.family {
            Family::PolyBump(b) => vec![Component::from_bump(b)],
            Family::SumOfBumps(bs) => bs.iter().map(Component::from_bump).collect(),
            Family::SquareWell { depth, radius } => vec![Component {
                center: Vec3::zeros(),
                radius: *radius,
                profile: Profile::Constant(-depth),
            }],
        }
    }

    /// Content digest of the spec.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Profile {
    Poly { amplitude: f64, order: u32 },
    Constant(f64),
}

impl Profile {
    fn is_zero(&self) -> bool {
        match *self {
            Profile::Poly { amplitude, .. } => amplitude == 0.0,
            Profile::Constant(v) => v == 0.0,
        }
    }
}

/// Radial piece of a potential supported in `|x - center| < radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Component {
    pub center: Vec3,
    pub radius: f64,
    pub profile: Profile,
}

impl Component {
    fn from_bump(b: &PolyBump) -> Self {
        Self {
            center: Vec3::from(b.center),
            radius: b.radius,
            profile: Profile::Poly {
                amplitude: b.amplitude,
                order: b.order,
            },
        }
    }

    pub fn profile_is_zero(&self) -> bool {
        self.profile.is_zero()
    }

    /// Value at distance `r` from the centre.
    pub fn value_at_radius(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        match self.profile {
            Profile::Poly { amplitude, order } => {
                let s = 1.0 - (r / self.radius).powi(2);
                amplitude * s.powi(order as i32)
            }
            Profile::Constant(v) => v,
        }
    }

    /// Value as a function of `r²` (no square root needed).
    pub fn value_at_radius_sq(&self, r2: f64) -> f64 {
        let rr = self.radius * self.radius;
        if r2 >= rr {
            return 0.0;
        }
        match self.profile {
            Profile::Poly { amplitude, order } => amplitude * (1.0 - r2 / rr).powi(order as i32),
            Profile::Constant(v) => v,
        }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        self.value_at_radius_sq((x - self.center).norm_squared())
    }

    /// Degree of the radial profile as a polynomial in `r`.
    fn radial_degree(&self) -> usize {
        match self.profile {
            Profile::Poly { order, .. } => 2 * order as usize,
            Profile::Constant(_) => 0,
        }
    }

    /// `∫ component dx`, exact Gauss rule on the radial polynomial.
    pub fn mass(&self) -> f64 {
        let n = self.radial_degree() / 2 + 3;
        let rule = GaussLegendre::get(n);
        4.0 * PI * rule.integrate(0.0, self.radius, |r| r * r * self.value_at_radius(r))
    }

    /// Ascending coefficients in `d` of the plane-section integral over the
    /// plane at signed distance `d` from the centre, valid for `|d| < radius`.
    pub fn radon_polynomial(&self) -> Vec<f64> {
        let rr = self.radius * self.radius;
        match self.profile {
            Profile::Poly { amplitude, order } => {
                // π c R²/(m+1) (1 - d²/R²)^{m+1}
                let n = order as usize + 1;
                let lead = PI * amplitude * rr / n as f64;
                let mut coeffs = vec![0.0; 2 * n + 1];
                let mut binom = 1.0;
                for j in 0..=n {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    coeffs[2 * j] = lead * sign * binom / rr.powi(j as i32);
                    binom = binom * (n - j) as f64 / (j + 1) as f64;
                }
                coeffs
            }
            Profile::Constant(v) => vec![PI * v * rr, 0.0, -PI * v],
        }
    }

    /// `Φ(z) = ∫_{-R}^{R} e^{izd} ĝ(d) dd` for the component's plane-section
    /// profile `ĝ`, i.e. its 3D Fourier transform at any complex vector `ξ`
    /// with `ξ·ξ = z²`, up to the phase `e^{iξ·center}`.
    pub fn fourier_radial(&self, z: Complex64) -> Complex64 {
        let poly = self.radon_polynomial();
        fourier_of_polynomial(&poly, self.radius, z)
    }
}

/// Plane-section polynomial of one component, kept for repeated transforms.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RadialTransform {
    pub center: Vec3,
    pub radius: f64,
    coeffs: Vec<f64>,
    /// `(P⁽ʲ⁾(R), P⁽ʲ⁾(−R))` for every derivative order.
    ends: Vec<(f64, f64)>,
}

impl RadialTransform {
    fn new(center: Vec3, radius: f64, coeffs: Vec<f64>) -> Self {
        let mut ends = Vec::with_capacity(coeffs.len());
        let mut d = coeffs.clone();
        while !d.is_empty() {
            ends.push((poly_eval(&d, radius), poly_eval(&d, -radius)));
            d = poly_derivative(&d);
        }
        Self { center, radius, coeffs, ends }
    }

    /// `Φ(z)`; see [`Component::fourier_radial`].
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let degree = self.coeffs.len().saturating_sub(1);
        if z.norm() * self.radius <= (2 * degree + 8) as f64 {
            return fourier_of_polynomial(&self.coeffs, self.radius, z);
        }
        let iz = Complex64::i() * z;
        let e_plus = (iz * self.radius).exp();
        let e_minus = (-iz * self.radius).exp();
        let inv = iz.inv();
        let mut scale = inv;
        let mut total = Complex64::new(0.0, 0.0);
        for &(hi, lo) in &self.ends {
            total += (e_plus * hi - e_minus * lo) * scale;
            scale *= -inv;
        }
        total
    }
}

impl PotentialSpec {
    pub(crate) fn radial_transforms(&self) -> Vec<RadialTransform> {
        self.components()
            .iter()
            .map(|c| RadialTransform::new(c.center, c.radius, c.radon_polynomial()))
            .collect()
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

/// `∫_{-R}^{R} e^{izd} P(d) dd` for a polynomial `P`.
///
/// Small `|z|R` uses a Gauss rule that is exact to rounding for the entire
/// integrand; large `|z|R` uses repeated integration by parts, which
/// terminates for polynomials and avoids the cancellation of the
/// oscillatory sum.
pub(crate) fn fourier_of_polynomial(coeffs: &[f64], radius: f64, z: Complex64) -> Complex64 {
    let degree = coeffs.len().saturating_sub(1);
    let zr = z.norm() * radius;
    if zr > (2 * degree + 8) as f64 {
        let iz = Complex64::i() * z;
        let e_plus = (iz * radius).exp();
        let e_minus = (-iz * radius).exp();
        let mut total = Complex64::new(0.0, 0.0);
        let mut deriv = coeffs.to_vec();
        let mut denom = iz;
        let mut sign = 1.0;
        while !deriv.is_empty() {
            let hi = poly_eval(&deriv, radius);
            let lo = poly_eval(&deriv, -radius);
            total += (e_plus * hi - e_minus * lo) * sign / denom;
            deriv = poly_derivative(&deriv);
            denom *= iz;
            sign = -sign;
        }
        total
    } else {
        let n = (degree / 2 + 1 + (1.5 * zr) as usize + 24).min(512);
        let rule = GaussLegendre::get(n);
        rule.integrate(-radius, radius, |d| {
            (Complex64::i() * z * d).exp() * poly_eval(coeffs, d)
        })
    }
}

/// `q(x)`.
pub fn eval_potential(spec: &PotentialSpec, x: &Vec3) -> f64 {
    spec.components().iter().map(|c| c.value(x)).sum()
}

/// `∫ q dx`, exact for the analytic families.
pub fn volume_integral(spec: &PotentialSpec) -> f64 {
    spec.components().iter().map(Component::mass).sum()
}

fn check_growth(spec: &PotentialSpec, eta: f64) -> Result<()> {
    if eta.abs() * spec.support_radius > MAX_ETA_A {
        return Err(Error::Range(format!(
            "eta*a = {} exceeds {MAX_ETA_A}",
            eta.abs() * spec.support_radius
        )));
    }
    Ok(())
}

/// `q̃(ξ) = ∫ q(x) e^{iξ·x} dx` at an arbitrary complex vector `ξ`, via the
/// closed-form plane-section profiles of the components.
pub fn fourier_at(spec: &PotentialSpec, xi: &CVec3) -> Complex64 {
    let rho = cdot(xi, xi).sqrt();
    spec.components()
        .iter()
        .map(|c| (Complex64::i() * cdot_real(xi, &c.center)).exp() * c.fourier_radial(rho))
        .sum()
}

/// `q̃(ζβ)` for a complex scalar `ζ`.
pub fn fourier_along(spec: &PotentialSpec, beta: &Vec3, zeta: Complex64) -> Complex64 {
    spec.components()
        .iter()
        .map(|c| (Complex64::i() * zeta * beta.dot(&c.center)).exp() * c.fourier_radial(zeta))
        .sum()
}

/// Controls of the tensor-Gauss volume quadrature in [`fourier_complex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeQuadrature {
    pub tol: f64,
    pub start_order: usize,
    pub max_order: usize,
}

impl Default for VolumeQuadrature {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            start_order: 16,
            max_order: 128,
        }
    }
}

/// Tensor rule in spherical coordinates about each component centre:
/// Gauss in `r` and `cos θ`, trapezoid in the azimuth.
fn fourier_volume_fixed(components: &[Component], xi: &CVec3, order: usize) -> Complex64 {
    let radial = GaussLegendre::get(order);
    let polar = GaussLegendre::get(order);
    let n_psi = 2 * order;
    let dpsi = 2.0 * PI / n_psi as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for comp in components {
        let phase0 = (Complex64::i() * cdot_real(xi, &comp.center)).exp();
        let radii: Vec<(f64, f64)> = radial
            .mapped(0.0, comp.radius)
            .map(|(r, w)| (r, w * r * r * comp.value_at_radius(r)))
            .collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for (t, wt) in polar.mapped(-1.0, 1.0) {
            let st = (1.0 - t * t).sqrt();
            for j in 0..n_psi {
                let psi = j as f64 * dpsi;
                let omega = Vec3::new(st * psi.cos(), st * psi.sin(), t);
                let w = cdot_real(xi, &omega);
                let inner: Complex64 = radii
                    .iter()
                    .map(|&(r, wr)| (Complex64::i() * w * r).exp() * wr)
                    .sum();
                sum += inner * (wt * dpsi);
            }
        }
        total += phase0 * sum;
    }
    total
}

/// `q̃((κ+iη)β - shift)` by direct volume quadrature over the support.
///
/// The order of the tensor rule doubles until two successive estimates agree
/// to `tol` (absolute, or relative to the larger of the result and `∫|q|`).
pub fn fourier_complex(
    spec: &PotentialSpec,
    beta: &Vec3,
    freq: ComplexFrequency,
    shift: &Vec3,
    quad: &VolumeQuadrature,
) -> Result<Complex64> {
    check_growth(spec, freq.eta)?;
    let xi: CVec3 = complexify(beta) * freq.two_k() - complexify(shift);
    fourier_volume(spec, &xi, quad)
}

/// Volume-quadrature Fourier transform at a complex vector.
pub fn fourier_volume(spec: &PotentialSpec, xi: &CVec3, quad: &VolumeQuadrature) -> Result<Complex64> {
    let comps = spec.components();
    if comps.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let scale: f64 = comps.iter().map(|c| c.mass().abs()).sum::<f64>().max(1e-300);
    let mut order = quad.start_order;
    let mut prev = fourier_volume_fixed(&comps, xi, order);
    while order < quad.max_order {
        order *= 2;
        let next = fourier_volume_fixed(&comps, xi, order);
        let diff = (next - prev).norm();
        if diff <= quad.tol * next.norm().max(scale).max(1.0) || diff <= quad.tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        what: "volume Fourier transform",
        estimate: prev.norm(),
        error: f64::NAN,
    })
}

/// Plane integral of `q` over `{x : β·x = λ}`, by quadrature in polar
/// coordinates about the foot of each component centre on the plane.
pub fn radon_transform(spec: &PotentialSpec, beta: &Vec3, lambda: f64, opts: &QuadOptions) -> Result<f64> {
    let beta = beta.normalize();
    let mut total = 0.0;
    for comp in spec.components() {
        let d = lambda - beta.dot(&comp.center);
        if d.abs() >= comp.radius {
            continue;
        }
        let rho_max = (comp.radius * comp.radius - d * d).sqrt();
        let d2 = d * d;
        total += integrate(
            |rho: f64| 2.0 * PI * rho * comp.value_at_radius_sq(d2 + rho * rho),
            0.0,
            rho_max,
            opts,
            "plane section",
        )?;
    }
    Ok(total)
}

/// Exact plane-section profile from the closed-form component polynomials.
pub fn radon_exact(spec: &PotentialSpec, beta: &Vec3, lambda: f64) -> f64 {
    let beta = beta.normalize();
    spec.components()
        .iter()
        .map(|c| {
            let d = lambda - beta.dot(&c.center);
            if d.abs() >= c.radius {
                0.0
            } else {
                poly_eval(&c.radon_polynomial(), d)
            }
        })
        .sum()
}

/// Offsets where the plane-section profile along `β` loses smoothness.
pub fn radon_breakpoints(spec: &PotentialSpec, beta: &Vec3) -> Vec<f64> {
    let beta = beta.normalize();
    spec.components()
        .iter()
        .flat_map(|c| {
            let p = beta.dot(&c.center);
            [p - c.radius, p + c.radius]
        })
        .collect()
}

/// `∫ e^{iζλ} q̂(β, λ) dλ` with the plane sections from [`radon_transform`];
/// the one-dimensional route to `q̃(ζβ)`.
pub fn fourier_via_radon(spec: &PotentialSpec, beta: &Vec3, zeta: Complex64, opts: &QuadOptions) -> Result<Complex64> {
    check_growth(spec, zeta.im)?;
    let a = spec.support_radius();
    if a == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let breaks = crate::quadrature::breakpoints(-a, a, radon_breakpoints(spec, beta));
    let inner = QuadOptions {
        abs_tol: opts.abs_tol * 1e-3,
        rel_tol: opts.rel_tol * 1e-2,
        ..*opts
    };
    let mut failure = None;
    let value = crate::quadrature::integrate_breaks(
        |lambda| match radon_transform(spec, beta, lambda, &inner) {
            Ok(v) => (Complex64::i() * zeta * lambda).exp() * v,
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        },
        &breaks,
        opts,
        "Radon-route Fourier transform",
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// How grid values are taken from the analytic potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Point value at each cell centre.
    Point,
    /// Mean over `sub³` sub-cell centres; used for discontinuous oracles.
    CellAverage { sub: usize },
}

/// Real samples of a potential on an `n³` cell-centred grid over `[-a, a]³`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    n: usize,
    a: f64,
    values: Vec<f64>,
    spec_hash: String,
}

impl PotentialGrid {
    pub const MIN_N: usize = 8;
    const MAGIC: &'static [u8; 4] = b"BSL1";

    pub fn from_values(n: usize, a: f64, values: Vec<f64>, spec_hash: String) -> Result<Self> {
        if n < Self::MIN_N {
            return Err(Error::ResolutionTooLow { n });
        }
        if values.len() != n * n * n {
            return Err(Error::InconsistentGrid(format!(
                "{} values for n = {n}",
                values.len()
            )));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidInput(format!("grid half-width {a} must be positive")));
        }
        let mut grid = Self {
            n,
            a,
            values,
            spec_hash,
        };
        // Samples outside the ball B_a are zero by definition.
        for idx in 0..grid.len() {
            if grid.point(idx).norm() >= a {
                grid.values[idx] = 0.0;
            }
        }
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h(&self) -> f64 {
        2.0 * self.a / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec_hash(&self) -> &str {
        &self.spec_hash
    }

    /// Flat index, x fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n))
    }

    pub fn axis(&self, i: usize) -> f64 {
        -self.a + (i as f64 + 0.5) * self.h()
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.coords(idx);
        Vec3::new(self.axis(i), self.axis(j), self.axis(k))
    }

    pub fn same_geometry(&self, other: &PotentialGrid) -> bool {
        self.n == other.n && self.a == other.a
    }

    /// Riemann sum `Σ q h³`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.a.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Parse("grid file does not start with BSL1".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf)?;
        let a = f64::from_le_bytes(buf);
        if n < Self::MIN_N {
            return Err(Error::ResolutionTooLow { n });
        }
        let count = n
            .checked_pow(3)
            .ok_or_else(|| Error::Parse(format!("grid size {n} overflows")))?;
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let hash = hex::encode(Sha256::digest(&bytes));
        Self::from_values(n, a, values, hash)
    }
}

/// Point samples of `q` on the cell centres of `[-a, a]³`.
pub fn sample_grid(spec: &PotentialSpec, n: usize, a: f64) -> Result<PotentialGrid> {
    sample_grid_with(spec, n, a, Sampling::Point)
}

pub fn sample_grid_with(spec: &PotentialSpec, n: usize, a: f64, sampling: Sampling) -> Result<PotentialGrid> {
    if n < PotentialGrid::MIN_N {
        return Err(Error::ResolutionTooLow { n });
    }
    if a < spec.support_radius() {
        return Err(Error::InvalidInput(format!(
            "grid half-width {a} is smaller than the support radius {}",
            spec.support_radius()
        )));
    }
    let comps = spec.components();
    let h = 2.0 * a / n as f64;
    let mut grid = PotentialGrid::from_values(n, a, vec![0.0; n * n * n], String::new())?;
    let eval = |x: &Vec3| comps.iter().map(|c| c.value(x)).sum::<f64>();
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let reach = match sampling {
            Sampling::Point => 0.0,
            Sampling::CellAverage { .. } => 0.5 * 3f64.sqrt() * h,
        };
        if x.norm() - reach >= a {
            continue;
        }
        grid.values[idx] = match sampling {
            Sampling::Point => eval(&x),
            Sampling::CellAverage { sub } => {
                let sub = sub.max(1);
                let hs = h / sub as f64;
                let mut acc = 0.0;
                for i in 0..sub {
                    for j in 0..sub {
                        for k in 0..sub {
                            let off = Vec3::new(
                                (i as f64 + 0.5) * hs - 0.5 * h,
                                (j as f64 + 0.5) * hs - 0.5 * h,
                                (k as f64 + 0.5) * hs - 0.5 * h,
                            );
                            acc += eval(&(x + off));
                        }
                    }
                }
                acc / (sub * sub * sub) as f64
            }
        };
    }
    let tag = serde_json::to_string(&(spec, sampling)).expect("spec serializes");
    grid.spec_hash = hex::encode(Sha256::digest(tag.as_bytes()));
    Ok(grid)
}
