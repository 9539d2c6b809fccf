//! Partial-wave solution of `−Δu + q(|x|)u = k²u` for a radial potential,
//! by integrating the radial equations and matching to Riccati–Bessel
//! functions at the support radius.

use bslab::geometry::Vec3;
use num_complex::Complex64;

/// Spherical Bessel `j_l(x)`, `y_l(x)` for `l = 0..=l_max`; `j` by downward
/// recurrence normalized with `j_0`, `y` by upward recurrence.
pub fn spherical_bessel(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; l_max + 1];
    y[0] = -x.cos() / x;
    if l_max >= 1 {
        y[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for l in 1..l_max {
        y[l + 1] = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
    }
    let start = l_max + 20 + x as usize * 2;
    let mut hi = 0.0;
    let mut cur = 1e-300;
    let mut j = vec![0.0; l_max + 1];
    for l in (0..=start).rev() {
        if l <= l_max {
            j[l] = cur;
        }
        let next = (2 * l + 1) as f64 / x * cur - hi;
        hi = cur;
        cur = next;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            hi *= 1e-250;
            for v in j.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = (x.sin() / x) / j[0];
    for v in j.iter_mut() {
        *v *= scale;
    }
    (j, y)
}

fn legendre(l_max: usize, c: f64) -> Vec<f64> {
    let mut p = vec![1.0; l_max + 1];
    if l_max >= 1 {
        p[1] = c;
    }
    for l in 1..l_max {
        p[l + 1] = ((2 * l + 1) as f64 * c * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
    p
}

pub struct PartialWaves<F: Fn(f64) -> f64> {
    q: F,
    radius: f64,
    k: f64,
    steps: usize,
    pub phase_shifts: Vec<f64>,
    /// Factor turning the integrated interior solution into the radial
    /// function `R_l` of the full wave.
    scales: Vec<Complex64>,
}

impl<F: Fn(f64) -> f64> PartialWaves<F> {
    pub fn new(q: F, radius: f64, k: f64, l_max: usize) -> Self {
        let mut pw = Self {
            q,
            radius,
            k,
            steps: 20000,
            phase_shifts: Vec::new(),
            scales: Vec::new(),
        };
        let x = k * radius;
        let (j, y) = spherical_bessel(l_max + 1, x);
        for l in 0..=l_max {
            let (u, du) = pw.integrate(l, radius);
            let lf = l as f64;
            // Riccati forms and their r-derivatives at R.
            let jh = x * j[l];
            let nh = x * y[l];
            let jh_d = k * ((lf + 1.0) * j[l] - x * j[l + 1]);
            let nh_d = k * ((lf + 1.0) * y[l] - x * y[l + 1]);
            let log_d = du / u;
            let delta = ((log_d * jh - jh_d) / (log_d * nh - nh_d)).atan();
            let outside = jh * delta.cos() - nh * delta.sin();
            let scale = Complex64::from_polar(1.0, delta) * outside / u;
            pw.phase_shifts.push(delta);
            pw.scales.push(scale);
        }
        pw
    }

    /// `(u_l(r), u_l'(r))` from the regular start `u ≈ r^{l+1}`.
    fn integrate(&self, l: usize, r_end: f64) -> (f64, f64) {
        let lf = (l * (l + 1)) as f64;
        let k2 = self.k * self.k;
        let n = ((self.steps as f64 * r_end / self.radius).ceil() as usize).max(200);
        let r0 = r_end / n as f64 * 1e-3;
        let c = ((self.q)(0.0) - k2) / (2.0 * (2 * l + 3) as f64);
        let mut u = r0.powi(l as i32 + 1) * (1.0 + c * r0 * r0);
        let mut du = (l as f64 + 1.0) * r0.powi(l as i32) * (1.0 + c * r0 * r0 * (l as f64 + 3.0) / (l as f64 + 1.0));
        let h = (r_end - r0) / n as f64;
        let f = |r: f64, u: f64| (lf / (r * r) + (self.q)(r) - k2) * u;
        let mut r = r0;
        for _ in 0..n {
            let k1u = du;
            let k1v = f(r, u);
            let k2u = du + 0.5 * h * k1v;
            let k2v = f(r + 0.5 * h, u + 0.5 * h * k1u);
            let k3u = du + 0.5 * h * k2v;
            let k3v = f(r + 0.5 * h, u + 0.5 * h * k2u);
            let k4u = du + h * k3v;
            let k4v = f(r + h, u + h * k3u);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            du += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            r += h;
        }
        (u, du)
    }

    /// Scattering solution at `x` inside the support for incidence `alpha`.
    pub fn field(&self, x: &Vec3, alpha: &Vec3) -> Complex64 {
        let r = x.norm();
        let l_max = self.scales.len() - 1;
        if r == 0.0 {
            let (u, _) = self.integrate(0, 1e-6 * self.radius);
            return self.scales[0] * u / (self.k * 1e-6 * self.radius);
        }
        assert!(r < self.radius, "field oracle is for interior points");
        let p = legendre(l_max, alpha.normalize().dot(x) / r);
        (0..=l_max)
            .map(|l| {
                let (u, _) = self.integrate(l, r);
                Complex64::i().powu(l as u32) * (2 * l + 1) as f64 * self.scales[l] * u / (self.k * r) * p[l]
            })
            .sum()
    }

    /// `A(θ) = (1/k) Σ (2l+1) e^{iδ} sin δ P_l(cos θ)`.
    pub fn amplitude(&self, cos_theta: f64) -> Complex64 {
        let p = legendre(self.phase_shifts.len() - 1, cos_theta);
        self.phase_shifts
            .iter()
            .enumerate()
            .map(|(l, d)| Complex64::from_polar(d.sin(), *d) * (2 * l + 1) as f64 * p[l])
            .sum::<Complex64>()
            / self.k
    }
}
