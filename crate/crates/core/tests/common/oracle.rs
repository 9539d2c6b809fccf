//! Small independent reference computations for the integration tests.

use num_complex::Complex64;

/// Composite Simpson rule with `2n` panels.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * h / 3.0
}

pub fn simpson_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    simpson(|x| Complex64::new(f(x), 0.0), a, b, n).re
}

fn binomial(m: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `∫₀¹ r² (1−r²)^m dr` by expanding the binomial.
pub fn bump_radial_moment(m: u32) -> f64 {
    (0..=m)
        .map(|j| binomial(m, j) * if j % 2 == 0 { 1.0 } else { -1.0 } / (2 * j + 3) as f64)
        .sum()
}

/// `∫ c (1−|x|²/a²)^m dx` over the ball of radius `a`.
pub fn bump_mass(m: u32, c: f64, a: f64) -> f64 {
    4.0 * std::f64::consts::PI * a.powi(3) * c * bump_radial_moment(m)
}

/// Transform of a centred bump along a direction at complex `ζ`:
/// `4π ∫₀^a r² q(r) sin(ζr)/(ζr) dr`.
pub fn bump_transform(m: u32, c: f64, a: f64, zeta: Complex64) -> Complex64 {
    let q = |r: f64| c * (1.0 - r * r / (a * a)).powi(m as i32);
    let sinc = |r: f64| {
        let z = zeta * r;
        if z.norm() < 1e-8 { Complex64::new(1.0, 0.0) } else { z.sin() / z }
    };
    simpson(|r| sinc(r) * (4.0 * std::f64::consts::PI * r * r * q(r)), 0.0, a, 4000)
}
