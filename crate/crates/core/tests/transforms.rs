mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use bslab::geometry::{complexify, fibonacci_sphere, Vec3};
use bslab::potentials::{
    fourier_at, sample_grid, volume_integral, Family, PolyBump, PotentialSpec, VolumeQuadrature,
};
use bslab::quadrature::{GaussLegendre, QuadOptions};
use bslab::transforms::{
    convolution_theorem_check, fourier_slice_identity, grid_fourier, radon_moment_identity, radon_reflection_check,
    spheroidal_jacobian, spheroidal_map, SpheroidalPoint,
};
use bslab::Error;
use common::oracle::bump_mass;
use num_complex::Complex64;
use proptest::prelude::*;

fn bump(m: u32, c: f64, a: f64) -> PotentialSpec {
    PotentialSpec::poly_bump(m, c, a).unwrap()
}

fn lopsided() -> PotentialSpec {
    PotentialSpec::from_family(
        Family::SumOfBumps(vec![
            PolyBump { order: 4, amplitude: 1.0, center: [0.4, 0.1, 0.0], radius: 0.5 },
            PolyBump { order: 6, amplitude: 0.6, center: [-0.3, -0.2, 0.2], radius: 0.3 },
        ]),
        None,
    )
    .unwrap()
}

fn point3() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn tight() -> QuadOptions {
    QuadOptions::with_tolerance(1e-10, 1e-11)
}

#[test]
fn zero_potentials_convolve_to_zero() {
    let z = PotentialSpec::zero();
    let (direct, product) = convolution_theorem_check(&z, &z, &Vec3::x(), &tight()).unwrap();
    assert_eq!(direct, Complex64::new(0.0, 0.0));
    assert_eq!(product, Complex64::new(0.0, 0.0));
}

#[test]
fn convolution_at_origin_is_squared_mass() {
    let f = bump(4, 1.0, 1.0);
    let (direct, product) = convolution_theorem_check(&f, &f, &Vec3::zeros(), &tight()).unwrap();
    let m2 = bump_mass(4, 1.0, 1.0).powi(2);
    assert!((direct.re - m2).abs() < 1e-5 && (product.re - m2).abs() < 1e-5);
}

#[test]
fn narrow_unit_mass_bump_acts_like_delta() {
    let width = 0.02;
    let f = bump(4, 1.0 / bump_mass(4, 1.0, width), width);
    let g = bump(4, 1.0, 1.0);
    let xi = Vec3::new(0.3, -0.2, 0.4);
    let (direct, _) = convolution_theorem_check(&f, &g, &xi, &tight()).unwrap();
    let want = fourier_at(&g, &complexify(&xi));
    // Mollification error is O(|ξ|² width²) relative, plus the kink at the support edge.
    assert!((direct - want).norm() < 1e-3 * want.norm(), "{direct} vs {want}");
}

#[test]
fn ball_slices_integrate_to_its_volume() {
    let ball = PotentialSpec::ball_indicator(1.0).unwrap();
    let r = radon_moment_identity(&ball, &fibonacci_sphere(6), &QuadOptions::default(), 1e-9).unwrap();
    assert!(r.passed);
    assert_relative_eq!(volume_integral(&ball), 4.0 * PI / 3.0, max_relative = 1e-14);
}

#[test]
fn moment_identity_on_fifty_directions() {
    let r = radon_moment_identity(&bump(4, 1.0, 1.0), &fibonacci_sphere(50), &QuadOptions::default(), 1e-6).unwrap();
    assert!(r.passed);
    assert_eq!(r.samples.len(), 50);
    let z = radon_moment_identity(&PotentialSpec::zero(), &fibonacci_sphere(3), &QuadOptions::default(), 1e-12);
    assert!(z.unwrap().passed);
}

#[test]
fn slice_identity_examples() {
    let quad = VolumeQuadrature { tol: 1e-10, ..VolumeQuadrature::default() };
    let q = bump(4, 1.0, 1.0);
    let beta = Vec3::new(0.48, -0.6, 0.64);
    let (v0, s0) = fourier_slice_identity(&q, &beta, 0.0, &quad, &tight()).unwrap();
    let mass = volume_integral(&q);
    assert!((v0.re - mass).abs() < 1e-9 && (s0.re - mass).abs() < 1e-9);
    let (v, s) = fourier_slice_identity(&q, &beta, 7.0, &quad, &tight()).unwrap();
    assert!((v - s).norm() < 1e-6, "{v} vs {s}");
    let (v, s) = fourier_slice_identity(&PotentialSpec::zero(), &beta, 7.0, &quad, &tight()).unwrap();
    assert_eq!((v.norm(), s.norm()), (0.0, 0.0));
}

#[test]
fn reflected_plane_examples() {
    let (a, b) = radon_reflection_check(&bump(4, 1.0, 1.0), &Vec3::z(), 0.3, &tight()).unwrap();
    assert!((a - b).abs() < 1e-8);
    let (a, b) = radon_reflection_check(&lopsided(), &Vec3::new(0.0, 0.6, 0.8), -0.25, &tight()).unwrap();
    assert!((a - b).abs() < 1e-8 && a.abs() > 1e-3);
}

#[test]
fn grid_transform_inverts() {
    let grid = sample_grid(&lopsided(), 20, 1.0).unwrap();
    let back = grid_fourier(&grid, 2).unwrap().inverse();
    let worst = back.iter().zip(grid.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn spheroidal_examples() {
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = -x;
    let z = spheroidal_map(2.0, 0.0, 0.0, &x, &y).unwrap();
    assert_relative_eq!(z.norm(), 3f64.sqrt(), epsilon = 1e-14);
    assert_relative_eq!((x - z).norm() + (z - y).norm(), 4.0, epsilon = 1e-14);
    assert!((spheroidal_map(1.0, -1.0, 0.0, &x, &y).unwrap() - x).norm() < 1e-14);
    assert!((spheroidal_map(1.0, 1.0, 0.0, &x, &y).unwrap() - y).norm() < 1e-14);
    assert_eq!(spheroidal_jacobian(2.0, 0.0, 1.0), 4.0);
    assert_eq!(spheroidal_jacobian(1.0, 1.0, 1.0), 0.0);
    assert!(matches!(spheroidal_map(1.5, 0.0, 0.0, &x, &x), Err(Error::DegenerateFoci { .. })));
}

#[test]
fn focal_product_uses_ell_squared() {
    let p = SpheroidalPoint::new(2.5, 0.3, 1.0, Vec3::new(0.2, -1.0, 0.4), Vec3::new(-0.5, 0.7, 1.1)).unwrap();
    let z = p.position();
    let product = (p.x - z).norm() * (z - p.y).norm();
    let l2 = p.ell * p.ell * (p.s * p.s - p.t * p.t);
    assert_relative_eq!(product, l2, max_relative = 1e-13);
    assert!((product - 4.0 * l2).abs() > l2, "the 4ℓ² form does not hold");
}

#[test]
fn spheroidal_volume_element_integrates_a_bump() {
    let x = Vec3::new(-0.5, 0.0, 0.0);
    let y = Vec3::new(0.5, 0.0, 0.0);
    let (centre, radius) = (Vec3::new(0.1, 0.9, -0.2), 0.4);
    let phi = PotentialSpec::from_family(
        Family::PolyBump(PolyBump { order: 8, amplitude: 1.0, center: centre.into(), radius }),
        None,
    )
    .unwrap();
    let ell = 0.5;
    let s_max = ((x - centre).norm() + (centre - y).norm() + 2.0 * radius) / (2.0 * ell);
    let rule = GaussLegendre::get(16);
    let panels = |a: f64, b: f64, n: usize| -> Vec<(f64, f64)> {
        (0..n)
            .flat_map(|i| {
                let lo = a + (b - a) * i as f64 / n as f64;
                let hi = a + (b - a) * (i + 1) as f64 / n as f64;
                rule.mapped(lo, hi).collect::<Vec<_>>()
            })
            .collect()
    };
    let (ss, ts, ps) = (panels(1.0, s_max, 8), panels(-1.0, 1.0, 8), panels(0.0, 2.0 * PI, 8));
    let mut total = 0.0;
    for &(s, ws) in &ss {
        for &(t, wt) in &ts {
            let jac = spheroidal_jacobian(s, t, ell);
            for &(psi, wp) in &ps {
                let z = spheroidal_map(s, t, psi, &x, &y).unwrap();
                total += ws * wt * wp * jac * bslab::potentials::eval_potential(&phi, &z);
            }
        }
    }
    assert_relative_eq!(total, bump_mass(8, 1.0, radius), max_relative = 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spheroidal_invariants(x in point3(), y in point3(), s in 1.0..6.0f64, t in -1.0..1.0f64, psi in 0.0..2.0 * PI) {
        prop_assume!((x - y).norm() > 1e-3);
        let p = SpheroidalPoint::new(s, t, psi, x, y).unwrap();
        let [sum, diff, prod] = p.residuals();
        let scale = p.ell * s;
        prop_assert!(sum.abs() < 1e-10 * scale.max(1.0));
        prop_assert!(diff.abs() < 1e-10 * scale.max(1.0));
        prop_assert!(prod.abs() < 1e-10 * (scale * scale).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plane_reflection(beta in (0.0..PI, 0.0..2.0 * PI), lambda in -1.0..1.0f64) {
        let b = Vec3::new(beta.0.sin() * beta.1.cos(), beta.0.sin() * beta.1.sin(), beta.0.cos());
        let (a, r) = radon_reflection_check(&lopsided(), &b, lambda, &tight()).unwrap();
        prop_assert!((a - r).abs() < 1e-8);
    }

    #[test]
    fn slices_give_the_transform(beta in (0.0..PI, 0.0..2.0 * PI), k in -12.0..12.0f64) {
        let b = Vec3::new(beta.0.sin() * beta.1.cos(), beta.0.sin() * beta.1.sin(), beta.0.cos());
        let quad = VolumeQuadrature { tol: 1e-10, ..VolumeQuadrature::default() };
        let (v, s) = fourier_slice_identity(&lopsided(), &b, k, &quad, &tight()).unwrap();
        prop_assert!((v - s).norm() < 1e-6 * v.norm().max(1.0));
    }
}
