//! Outgoing Green's function, the direction-modulated kernel and its symbol.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::potentials::ComplexFrequency;

/// Frequency and incidence direction for the modulated kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub freq: ComplexFrequency,
    pub beta: Vec3,
}

impl KernelParams {
    pub fn new(freq: ComplexFrequency, beta: Vec3) -> Result<Self> {
        let norm = beta.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("direction must be nonzero".into()));
        }
        Ok(Self {
            freq,
            beta: beta / norm,
        })
    }
}

/// `e^{ik|x−y|}/(4π|x−y|)`.
pub fn free_green(x: &Vec3, y: &Vec3, k: Complex64) -> Result<Complex64> {
    let r = (x - y).norm();
    if r < 1e-14 {
        return Err(Error::SingularPoint { distance: r });
    }
    if k.im < 0.0 {
        return Err(Error::Range(format!("Im k = {} is negative", k.im)));
    }
    Ok((Complex64::i() * k * r).exp() / (4.0 * PI * r))
}

/// `G(r) = e^{ik(|r| − β·r)}/(4π|r|)` with `k = (κ+iη)/2`.
pub fn reduced_kernel(x_minus_y: &Vec3, params: &KernelParams) -> Result<Complex64> {
    let r = x_minus_y.norm();
    if r < 1e-14 {
        return Err(Error::SingularPoint { distance: r });
    }
    Ok(reduced_kernel_unchecked(r, params.beta.dot(x_minus_y), params.freq.k()))
}

/// Kernel value from `|r|` and `β·r`, for hot loops that exclude `r = 0`.
#[inline]
pub(crate) fn reduced_kernel_unchecked(r: f64, beta_dot_r: f64, k: Complex64) -> Complex64 {
    (Complex64::i() * k * (r - beta_dot_r)).exp() / (4.0 * PI * r)
}

/// `1/(ξ·ξ − (κ+iη) β·ξ)`, the Fourier symbol of [`reduced_kernel`].
pub fn reduced_symbol(xi: &Vec3, params: &KernelParams) -> Result<Complex64> {
    let xi2 = xi.norm_squared();
    let denom = xi2 - params.freq.two_k() * params.beta.dot(xi);
    let scale = xi2.max(f64::MIN_POSITIVE);
    if denom.norm() <= 1e-12 * scale.max(1.0) {
        return Err(Error::NearResonance {
            denominator: denom.norm(),
        });
    }
    Ok(denom.inv())
}
