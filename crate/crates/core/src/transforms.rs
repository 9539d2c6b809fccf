//! Fourier and Radon identities, and the two-centre (prolate spheroidal)
//! coordinates used for the iterated-kernel estimate.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::geometry::{complete_frame, complexify, Vec3};
use crate::potentials::{
    fourier_at, fourier_via_radon, fourier_complex, radon_transform, volume_integral, Component,
    ComplexFrequency, PotentialGrid, PotentialSpec, VolumeQuadrature,
};
use crate::quadrature::{breakpoints, integrate_breaks, GaussLegendre, QuadOptions};
use crate::report::{fmt_f64, EstimateReport, Rule, Sample};

/// Samples of the plane-section profile `q̂(β, λ)` along one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadonProfile {
    pub beta: [f64; 3],
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadonProfile {
    /// Profile at the given offsets, which must be strictly increasing.
    pub fn sample(spec: &PotentialSpec, beta: &Vec3, lambdas: Vec<f64>, opts: &QuadOptions) -> Result<Self> {
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("profile offsets must be strictly increasing".into()));
        }
        let beta = beta.normalize();
        let values = lambdas
            .iter()
            .map(|&l| radon_transform(spec, &beta, l, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            beta: beta.into(),
            lambdas,
            values,
        })
    }

    /// `count` equally spaced offsets covering `[-a, a]`.
    pub fn uniform(spec: &PotentialSpec, beta: &Vec3, count: usize, opts: &QuadOptions) -> Result<Self> {
        let a = spec.support_radius();
        if count < 2 {
            return Err(Error::InvalidInput("a profile needs at least two offsets".into()));
        }
        let lambdas = (0..count)
            .map(|i| -a + 2.0 * a * i as f64 / (count - 1) as f64)
            .collect();
        Self::sample(spec, beta, lambdas, opts)
    }

    /// CSV with columns `beta_x,beta_y,beta_z,lambda,value`.
    pub fn write_csv<W: Write>(profiles: &[RadonProfile], mut w: W) -> io::Result<()> {
        writeln!(w, "beta_x,beta_y,beta_z,lambda,value")?;
        for p in profiles {
            for (l, v) in p.lambdas.iter().zip(&p.values) {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(p.beta[0]),
                    fmt_f64(p.beta[1]),
                    fmt_f64(p.beta[2]),
                    fmt_f64(*l),
                    fmt_f64(*v)
                )?;
            }
        }
        Ok(())
    }
}

/// `(F(f∗g)(ξ), f̃(ξ)·g̃(ξ))`.
///
/// The left side integrates the convolution directly: for each pair of
/// radial components the convolution is itself radial about the sum of the
/// centres, its value at radius `r` is a nested (ρ, cos θ) integral split at
/// the support kinks, and the outer transform uses `sin(|ξ|r)/(|ξ|r)`.
pub fn convolution_theorem_check(
    f: &PotentialSpec,
    g: &PotentialSpec,
    xi: &Vec3,
    opts: &QuadOptions,
) -> Result<(Complex64, Complex64)> {
    let xi_c = complexify(xi);
    let product = fourier_at(f, &xi_c) * fourier_at(g, &xi_c);
    let norm = xi.norm();
    let mut direct = Complex64::new(0.0, 0.0);
    for cf in f.components() {
        for cg in g.components() {
            let phase = Complex64::new(0.0, xi.dot(&(cf.center + cg.center))).exp();
            let reach = cf.radius + cg.radius;
            let breaks = breakpoints(0.0, reach, [(cf.radius - cg.radius).abs()]);
            let mut failure = None;
            let radial = integrate_breaks(
                |r: f64| {
                    let sinc = if norm * r < 1e-8 { 1.0 } else { (norm * r).sin() / (norm * r) };
                    match radial_convolution(&cf, &cg, r, opts) {
                        Ok(v) => 4.0 * PI * r * r * v * sinc,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &breaks,
                opts,
                "convolution transform",
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            direct += phase * radial;
        }
    }
    Ok((direct, product))
}

/// `(f0 ∗ g0)(r e)` for components re-centred at the origin.
fn radial_convolution(cf: &Component, cg: &Component, r: f64, opts: &QuadOptions) -> Result<f64> {
    let rf2 = cf.radius * cf.radius;
    let rule = GaussLegendre::get(24);
    let inner = |rho: f64| -> f64 {
        let base = r * r + rho * rho;
        if r * rho == 0.0 {
            return 2.0 * cf.value_at_radius_sq(base);
        }
        // cf vanishes for t below the point where the distance reaches its radius.
        let t_star = (base - rf2) / (2.0 * r * rho);
        if t_star >= 1.0 {
            return 0.0;
        }
        let lo = t_star.max(-1.0);
        rule.integrate(lo, 1.0, |t| cf.value_at_radius_sq(base - 2.0 * r * rho * t))
    };
    let breaks = breakpoints(0.0, cg.radius, [(r - cf.radius).abs(), r + cf.radius]);
    let inner_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-2,
        ..*opts
    };
    let v = integrate_breaks(
        |rho: f64| rho * rho * cg.value_at_radius(rho) * inner(rho),
        &breaks,
        &inner_opts,
        "radial convolution",
    )?;
    Ok(2.0 * PI * v)
}

/// Checks `∫ q̂(β, λ) dλ = ∫ q dx` for every direction. Each sample is the
/// relative error, scaled by the total absolute component mass so that zero
/// net mass stays well defined.
pub fn radon_moment_identity(
    spec: &PotentialSpec,
    betas: &[Vec3],
    opts: &QuadOptions,
    tolerance: f64,
) -> Result<EstimateReport> {
    let mass = volume_integral(spec);
    let scale = spec.component_mass();
    let mut samples = Vec::with_capacity(betas.len());
    for beta in betas {
        let beta = beta.normalize();
        let slices = fourier_via_radon(spec, &beta, Complex64::new(0.0, 0.0), opts)?.re;
        let err = if scale > 0.0 { (slices - mass).abs() / scale } else { slices.abs() };
        samples.push(Sample::new(
            [("beta_x", beta[0]), ("beta_y", beta[1]), ("beta_z", beta[2])],
            err,
        ));
    }
    Ok(EstimateReport::new(
        "radon_moment_identity",
        samples,
        None,
        None,
        Rule::MaxAtMost,
        tolerance,
    ))
}

/// `(∫ e^{ikβ·x} q dx, ∫ e^{ikλ} q̂(β,λ) dλ)`, the first by volume quadrature
/// and the second through plane sections.
pub fn fourier_slice_identity(
    spec: &PotentialSpec,
    beta: &Vec3,
    k: f64,
    quad: &VolumeQuadrature,
    opts: &QuadOptions,
) -> Result<(Complex64, Complex64)> {
    let beta = beta.normalize();
    let freq = ComplexFrequency::new(k.abs(), 0.0)?;
    let b = if k < 0.0 { -beta } else { beta };
    let volume = fourier_complex(spec, &b, freq, &Vec3::zeros(), quad)?;
    let slices = fourier_via_radon(spec, &beta, Complex64::new(k, 0.0), opts)?;
    Ok((volume, slices))
}

/// `(q̂(β, λ), q̂(−β, −λ))`, two separate quadratures of the same plane.
pub fn radon_reflection_check(spec: &PotentialSpec, beta: &Vec3, lambda: f64, opts: &QuadOptions) -> Result<(f64, f64)> {
    Ok((
        radon_transform(spec, beta, lambda, opts)?,
        radon_transform(spec, &(-beta), -lambda, opts)?,
    ))
}

/// Zero-padded discrete transform of a grid, `F(ξ_p) ≈ h³ Σ q_j e^{iξ_p·x_j}`
/// on the reciprocal lattice `ξ_p = 2πp/(m h)`, `m = pad·n`.
#[derive(Debug, Clone)]
pub struct GridSpectrum {
    n: usize,
    m: usize,
    h: f64,
    x0: f64,
    values: Vec<Complex64>,
}

impl GridSpectrum {
    pub fn size(&self) -> usize {
        self.m
    }

    /// Reciprocal lattice spacing.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / (self.m as f64 * self.h)
    }

    /// Signed lattice index along one axis for storage index `p`.
    fn signed(&self, p: usize) -> i64 {
        if p < self.m.div_ceil(2) {
            p as i64
        } else {
            p as i64 - self.m as i64
        }
    }

    /// Frequency vector and value at storage index `(p, q, r)`.
    pub fn at(&self, p: usize, q: usize, r: usize) -> (Vec3, Complex64) {
        let d = self.dxi();
        let xi = Vec3::new(
            self.signed(p) as f64 * d,
            self.signed(q) as f64 * d,
            self.signed(r) as f64 * d,
        );
        (xi, self.values[p + self.m * (q + self.m * r)])
    }

    /// Inverse transform back to the original `n³` samples.
    pub fn inverse(&self) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut data = self.values.clone();
        let phases = self.axis_phases(-1.0);
        for r in 0..m {
            for q in 0..m {
                for p in 0..m {
                    data[p + m * (q + m * r)] *= phases[p] * phases[q] * phases[r];
                }
            }
        }
        Fft3::new(m, FftDirection::Forward).process(&mut data);
        let scale = 1.0 / (m as f64 * self.h).powi(3);
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out[i + n * (j + n * k)] = data[i + m * (j + m * k)].re * scale;
                }
            }
        }
        out
    }

    /// `e^{sign·i ξ_p x_0}` per axis, `x_0` the first cell centre.
    fn axis_phases(&self, sign: f64) -> Vec<Complex64> {
        let d = self.dxi();
        (0..self.m)
            .map(|p| Complex64::from_polar(1.0, sign * self.signed(p) as f64 * d * self.x0))
            .collect()
    }
}

/// Discrete transform of a grid with padding factor `pad ≥ 2`; for plots
/// only, since complex frequencies are off the lattice.
pub fn grid_fourier(grid: &PotentialGrid, pad: usize) -> Result<GridSpectrum> {
    if pad < 2 {
        return Err(Error::InvalidInput("padding factor must be at least 2".into()));
    }
    let n = grid.n();
    let m = pad * n;
    let mut data = vec![Complex64::new(0.0, 0.0); m * m * m];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                data[i + m * (j + m * k)] = Complex64::new(grid.values()[grid.index(i, j, k)], 0.0);
            }
        }
    }
    Fft3::new(m, FftDirection::Inverse).process(&mut data);
    let mut spectrum = GridSpectrum {
        n,
        m,
        h: grid.h(),
        x0: grid.axis(0),
        values: Vec::new(),
    };
    let phases = spectrum.axis_phases(1.0);
    let h3 = grid.cell_volume();
    for r in 0..m {
        for q in 0..m {
            for p in 0..m {
                data[p + m * (q + m * r)] *= phases[p] * phases[q] * phases[r] * h3;
            }
        }
    }
    spectrum.values = data;
    Ok(spectrum)
}

/// A point in two-centre coordinates about foci `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpheroidalPoint {
    pub s: f64,
    pub t: f64,
    pub psi: f64,
    pub ell: f64,
    pub x: Vec3,
    pub y: Vec3,
}

impl SpheroidalPoint {
    pub fn new(s: f64, t: f64, psi: f64, x: Vec3, y: Vec3) -> Result<Self> {
        check_coordinates(s, t)?;
        let dist = (x - y).norm();
        if dist < 1e-12 {
            return Err(Error::DegenerateFoci { distance: dist });
        }
        Ok(Self {
            s,
            t,
            psi,
            ell: dist / 2.0,
            x,
            y,
        })
    }

    /// Cartesian position `z`.
    pub fn position(&self) -> Vec3 {
        let e1 = (self.y - self.x) / (2.0 * self.ell);
        let (e2, e3) = complete_frame(&e1);
        let mid = (self.x + self.y) / 2.0;
        let rad = self.ell * ((self.s * self.s - 1.0).max(0.0) * (1.0 - self.t * self.t).max(0.0)).sqrt();
        let (sp, cp) = self.psi.sin_cos();
        mid + e1 * (self.ell * self.s * self.t) + (e2 * cp + e3 * sp) * rad
    }

    /// Deviations from `|x−z|+|z−y| = 2ℓs`, `|x−z|−|z−y| = 2ℓt` and
    /// `|x−z||z−y| = ℓ²(s²−t²)`.
    pub fn residuals(&self) -> [f64; 3] {
        let z = self.position();
        let (dx, dy) = ((self.x - z).norm(), (z - self.y).norm());
        let l = self.ell;
        [
            dx + dy - 2.0 * l * self.s,
            dx - dy - 2.0 * l * self.t,
            dx * dy - l * l * (self.s * self.s - self.t * self.t),
        ]
    }
}

fn check_coordinates(s: f64, t: f64) -> Result<()> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::Range(format!("s = {s} must be at least 1")));
    }
    if !(t.abs() <= 1.0) {
        return Err(Error::Range(format!("t = {t} must lie in [-1, 1]")));
    }
    Ok(())
}

/// Position `z(s, t, ψ)` for foci `x`, `y`.
///
/// The first frame axis points from `x` to `y`, so `|x−z| = ℓ(s+t)` and
/// `|z−y| = ℓ(s−t)`; the tip `s = 1, t = −1` is `x` and `s = 1, t = 1` is `y`.
pub fn spheroidal_map(s: f64, t: f64, psi: f64, x: &Vec3, y: &Vec3) -> Result<Vec3> {
    Ok(SpheroidalPoint::new(s, t, psi, *x, *y)?.position())
}

/// Volume element `ℓ³(s² − t²)` of the map.
pub fn spheroidal_jacobian(s: f64, t: f64, ell: f64) -> f64 {
    ell.powi(3) * (s * s - t * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_unit;
    use crate::potentials::{sample_grid, Family, PolyBump};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ellipse_example() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = -x;
        let z = spheroidal_map(2.0, 0.0, 0.0, &x, &y).unwrap();
        assert!((z.norm() - 3f64.sqrt()).abs() < 1e-14);
        assert!(z[0].abs() < 1e-14);
        assert_relative_eq!((x - z).norm() + (z - y).norm(), 4.0, epsilon = 1e-14);
        let tip = spheroidal_map(1.0, 1.0, 0.0, &x, &y).unwrap();
        assert!((tip - y).norm() < 1e-14);
        let tip = spheroidal_map(1.0, -1.0, 0.0, &x, &y).unwrap();
        assert!((tip - x).norm() < 1e-14);
    }

    #[test]
    fn coordinate_errors() {
        let x = Vec3::x();
        assert!(matches!(spheroidal_map(0.5, 0.0, 0.0, &x, &-x), Err(Error::Range(_))));
        assert!(matches!(spheroidal_map(1.5, 1.1, 0.0, &x, &-x), Err(Error::Range(_))));
        assert!(matches!(
            spheroidal_map(1.5, 0.0, 0.0, &x, &(x + Vec3::repeat(1e-13))),
            Err(Error::DegenerateFoci { .. })
        ));
        assert_eq!(spheroidal_jacobian(2.0, 0.0, 1.0), 4.0);
        assert_eq!(spheroidal_jacobian(1.0, 1.0, 3.0), 0.0);
    }

    #[test]
    fn convolution_of_bumps_at_zero_is_mass_squared() {
        let f = PotentialSpec::poly_bump(4, 1.0, 1.0).unwrap();
        let opts = QuadOptions::with_tolerance(1e-12, 1e-12);
        let (direct, product) = convolution_theorem_check(&f, &f, &Vec3::zeros(), &opts).unwrap();
        let m = volume_integral(&f);
        assert!((direct.re - m * m).abs() < 1e-10, "{direct} vs {}", m * m);
        assert!((product.re - m * m).abs() < 1e-12);
    }

    #[test]
    fn convolution_of_offset_bumps() {
        let f = PotentialSpec::from_family(
            Family::SumOfBumps(vec![
                PolyBump { order: 4, amplitude: 1.0, center: [0.2, 0.0, 0.1], radius: 0.5 },
                PolyBump { order: 5, amplitude: -0.5, center: [-0.1, 0.3, 0.0], radius: 0.4 },
            ]),
            Some(3.0),
        )
        .unwrap();
        let g = PotentialSpec::poly_bump(4, 2.0, 0.7).unwrap();
        let opts = QuadOptions::with_tolerance(1e-12, 1e-12);
        let (direct, product) =
            convolution_theorem_check(&f, &g, &Vec3::new(1.0, -2.0, 0.5), &opts).unwrap();
        assert!((direct - product).norm() < 1e-9, "{direct} vs {product}");
    }

    #[test]
    fn profile_validation_and_csv() {
        let q = PotentialSpec::poly_bump(4, 1.0, 1.0).unwrap();
        let opts = QuadOptions::default();
        assert!(RadonProfile::sample(&q, &Vec3::z(), vec![0.0, 0.0], &opts).is_err());
        let p = RadonProfile::uniform(&q, &Vec3::z(), 5, &opts).unwrap();
        let mut out = Vec::new();
        RadonProfile::write_csv(&[p], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("beta_x,beta_y,beta_z,lambda,value\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn grid_spectrum_round_trip_and_low_frequencies() {
        let q = PotentialSpec::poly_bump(4, 1.0, 1.0).unwrap();
        let grid = sample_grid(&q, 24, 1.0).unwrap();
        let spec = grid_fourier(&grid, 2).unwrap();
        let back = spec.inverse();
        for (a, b) in back.iter().zip(grid.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (xi, v) = spec.at(1, 0, 0);
        let exact = fourier_at(&q, &complexify(&xi));
        assert!((v - exact).norm() < 1e-3 * exact.norm());
    }

    #[test]
    fn moment_identity_for_random_directions() {
        let q = PotentialSpec::poly_bump(4, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let betas: Vec<Vec3> = (0..5).map(|_| random_unit(&mut rng)).collect();
        let r = radon_moment_identity(&q, &betas, &QuadOptions::default(), 1e-6).unwrap();
        assert!(r.passed, "{}", r.to_json());
    }
}
