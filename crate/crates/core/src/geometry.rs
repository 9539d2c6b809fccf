//! Small vector helpers shared by the transforms, kernels and sphere searches.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;

pub type Vec3 = Vector3<f64>;
pub type CVec3 = Vector3<Complex64>;

/// Promotes a real vector to a complex one.
pub fn complexify(v: &Vec3) -> CVec3 {
    v.map(|c| Complex64::new(c, 0.0))
}

/// Bilinear (not Hermitian) dot product, `a·b = Σ a_i b_i`.
pub fn cdot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `a·x` for a complex `a` and a real `x`.
pub fn cdot_real(a: &CVec3, x: &Vec3) -> Complex64 {
    a[0] * x[0] + a[1] * x[1] + a[2] * x[2]
}

pub fn unit(theta: f64, phi: f64) -> Vec3 {
    let st = theta.sin();
    Vec3::new(st * phi.cos(), st * phi.sin(), theta.cos())
}

/// Polar and azimuthal angles of a unit vector.
pub fn angles(v: &Vec3) -> (f64, f64) {
    (v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
}

/// Completes `e1` to a right-handed orthonormal frame.
///
/// The second axis is `normalize(e1 × ẑ)`, or `normalize(e1 × x̂)` when `e1`
/// is within 1e-6 of the z axis, so fixtures built on it are reproducible.
pub fn complete_frame(e1: &Vec3) -> (Vec3, Vec3) {
    let e1 = e1.normalize();
    let z = Vec3::z();
    let mut e2 = e1.cross(&z);
    if e2.norm() < 1e-6 {
        e2 = e1.cross(&Vec3::x());
    }
    let e2 = e2.normalize();
    let e3 = e1.cross(&e2);
    (e2, e3)
}

/// Uniformly distributed unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let t: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - t * t).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), t)
}

/// Uniform point in the ball of radius `r` about the origin.
pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Vec3 {
    let u: f64 = rng.gen_range(0.0..1.0);
    random_unit(rng) * (r * u.cbrt())
}

/// Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Rotation of `v` about `axis` (unit) by `angle`, Rodrigues' formula.
pub fn rotate(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}
