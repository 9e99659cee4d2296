//! Free electron and photon propagators, Dyson resummation and its
//! truncated geometric series.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SystemModel;

/// c_e·ℙ_e + c_g·ℙ_g, with ℙ_e of rank `dim_e` and ℙ_g of rank one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectorValue {
    pub c_e: Complex64,
    pub c_g: Complex64,
    pub dim_e: u32,
}

impl ProjectorValue {
    pub fn new(c_e: Complex64, c_g: Complex64, dim_e: u32) -> Self {
        ProjectorValue { c_e, c_g, dim_e }
    }

    pub fn zero(dim_e: u32) -> Self {
        ProjectorValue::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), dim_e)
    }

    pub fn identity(dim_e: u32) -> Self {
        ProjectorValue::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), dim_e)
    }

    pub fn trace(&self) -> Complex64 {
        self.c_e * self.dim_e as f64 + self.c_g
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.c_e == Complex64::new(0.0, 0.0) || self.c_g == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole("projector value is not invertible".into()));
        }
        Ok(ProjectorValue::new(self.c_e.inv(), self.c_g.inv(), self.dim_e))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ProjectorValue::new(self.c_e * s, self.c_g * s, self.dim_e)
    }

    pub fn max_norm(&self) -> f64 {
        self.c_e.norm().max(self.c_g.norm())
    }
}

impl Add for ProjectorValue {
    type Output = ProjectorValue;
    fn add(self, o: ProjectorValue) -> ProjectorValue {
        ProjectorValue::new(self.c_e + o.c_e, self.c_g + o.c_g, self.dim_e)
    }
}

impl Sub for ProjectorValue {
    type Output = ProjectorValue;
    fn sub(self, o: ProjectorValue) -> ProjectorValue {
        ProjectorValue::new(self.c_e - o.c_e, self.c_g - o.c_g, self.dim_e)
    }
}

impl Neg for ProjectorValue {
    type Output = ProjectorValue;
    fn neg(self) -> ProjectorValue {
        ProjectorValue::new(-self.c_e, -self.c_g, self.dim_e)
    }
}

impl Mul for ProjectorValue {
    type Output = ProjectorValue;
    fn mul(self, o: ProjectorValue) -> ProjectorValue {
        ProjectorValue::new(self.c_e * o.c_e, self.c_g * o.c_g, self.dim_e)
    }
}

/// Reduced scalar 1/(k0² − k² + iε) of a photon line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonLineValue {
    pub value: Complex64,
}

fn checked_inv(den: Complex64, what: &str) -> Result<Complex64> {
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole(what.to_string()));
    }
    Ok(den.inv())
}

/// S_F(p0) = ℙ_e/(p0 − m_e + iε) + ℙ_g/(p0 − m_g − iε).
pub fn electron_propagator(model: &SystemModel, p0: Complex64, eps: f64) -> Result<ProjectorValue> {
    let c_e = checked_inv(p0 - model.m_e + Complex64::new(0.0, eps), &format!("p0 = {p0} = m_e"))?;
    let c_g = checked_inv(p0 - model.m_g - Complex64::new(0.0, eps), &format!("p0 = {p0} = m_g"))?;
    Ok(ProjectorValue::new(c_e, c_g, model.dim_e()))
}

pub fn photon_line(k: f64, k0: Complex64, eps: f64) -> Result<PhotonLineValue> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("photon wavenumber must be >= 0, got {k}")));
    }
    let value = checked_inv(k0 * k0 - k * k + Complex64::new(0.0, eps), &format!("on-shell photon k0 = {k0}, k = {k}"))?;
    Ok(PhotonLineValue { value })
}

/// (1/2k)·[1/(k0 − k + iε') − 1/(k0 + k − iε')] with ε' = ε/(2k), the
/// partial-fraction form of [`photon_line`].
pub fn photon_line_partial_fractions(k: f64, k0: Complex64, eps: f64) -> Result<PhotonLineValue> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("partial fractions need k > 0, got {k}")));
    }
    let e = Complex64::new(0.0, eps / (2.0 * k));
    let a = checked_inv(k0 - k + e, "on-shell photon")?;
    let b = checked_inv(k0 + k - e, "on-shell photon")?;
    Ok(PhotonLineValue { value: (a - b) / (2.0 * k) })
}

/// G = 1/(S⁻¹ − Σ), channel by channel.
pub fn dyson_resum(free: ProjectorValue, sigma: ProjectorValue) -> Result<ProjectorValue> {
    let inv = free.inverse()?;
    let c_e = checked_inv(inv.c_e - sigma.c_e, "resummed excited channel")?;
    let c_g = checked_inv(inv.c_g - sigma.c_g, "resummed ground channel")?;
    Ok(ProjectorValue::new(c_e, c_g, free.dim_e))
}

/// S + SΣS + … with `n_terms` terms.
pub fn dyson_truncate(free: ProjectorValue, sigma: ProjectorValue, n_terms: usize) -> ProjectorValue {
    let step = sigma * free;
    let mut term = free;
    let mut sum = free;
    for _ in 1..n_terms.max(1) {
        term = term * step;
        sum = sum + term;
    }
    sum
}
