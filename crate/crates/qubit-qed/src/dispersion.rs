//! The dispersion integral h(k0) = ∫ g²(k)/(k² − k0² − iε) dk, its closed
//! hydrogen forms, shift and width, and the principal-value machinery.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::model::{FormFactor, FormFactorFamily, SystemModel, Variant};
use crate::quadrature::{self, Peak, Tolerance};
use crate::tolerances;

/// Tolerances and range policy for every numeric k-integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Split point between the finite adaptive range and the mapped tail.
    /// `None` picks a multiple of the formfactor scale.
    pub k_max: Option<f64>,
    /// Unused: principal values are taken by global subtraction.
    pub pv_window: Option<f64>,
    pub max_intervals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: tolerances::QUAD_REL_TOL,
            abs_tol: tolerances::QUAD_ABS_TOL,
            k_max: None,
            pv_window: None,
            max_intervals: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rel: self.rel_tol, abs: self.abs_tol, max_intervals: self.max_intervals }
    }

    fn split(&self, ff: &FormFactor, feature: f64) -> f64 {
        let base = match (self.k_max, ff.support_end()) {
            (Some(k), _) => k,
            (None, Some(end)) => end,
            (None, None) => 40.0 * ff.scale(),
        };
        base.max(2.0 * feature.abs())
    }

    fn breaks(&self, ff: &FormFactor, extra: &[f64]) -> Vec<f64> {
        let mut b = ff.breakpoints();
        b.extend_from_slice(extra);
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionValue {
    pub h: Complex64,
    pub delta: f64,
    pub gamma: f64,
    pub omega: f64,
}

/// ∫₀^∞ w(k) dk for a smooth real weight built from the formfactor.
pub fn k_integral<W>(ff: &FormFactor, quad: &QuadratureSpec, feature: f64, w: W) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    let split = quad.split(ff, feature);
    let breaks = quad.breaks(ff, &[feature.abs()]);
    quadrature::integrate_real_semi_infinite(w, 0.0, split, &breaks, &quad.tolerance()).checked_re()
}

/// ∫₀^∞ F(k)/(k − c − i0) dk for real c: plain integral for c ≤ 0,
/// principal value plus iπF(c) for c > 0.
pub fn cauchy<W>(ff: &FormFactor, quad: &QuadratureSpec, c: f64, f: W) -> Result<Complex64>
where
    W: Fn(f64) -> f64,
{
    if c <= 0.0 {
        let re = k_integral(ff, quad, 0.0, |k| if k == c { 0.0 } else { f(k) / (k - c) })?;
        return Ok(Complex64::new(re, 0.0));
    }
    let fc = f(c);
    let tol = quad.tolerance();
    let breaks = quad.breaks(ff, &[c]);
    let near = quadrature::integrate_real(
        |k| if k == c { 0.0 } else { (f(k) - fc) / (k - c) },
        0.0,
        2.0 * c,
        &breaks,
        &tol,
    )
    .checked_re()?;
    let split = quad.split(ff, 2.0 * c).max(4.0 * c);
    let far = quadrature::integrate_real_semi_infinite(|k| f(k) / (k - c), 2.0 * c, split, &breaks, &tol).checked_re()?;
    Ok(Complex64::new(near + far, PI * fc))
}

/// ∫₀^∞ F(k)/(k − c) dk for complex c off the positive real axis.
pub fn cauchy_complex<W>(ff: &FormFactor, quad: &QuadratureSpec, c: Complex64, f: W) -> Result<Complex64>
where
    W: Fn(f64) -> f64,
{
    if c.im == 0.0 {
        return cauchy(ff, quad, c.re, f);
    }
    let split = quad.split(ff, c.re.max(0.0));
    let peaks = [Peak { center: c.re, width: c.im.abs() }];
    quadrature::integrate_peaked_semi_infinite(
        |k| Complex64::new(f(k), 0.0) / (k - c),
        0.0,
        split,
        &peaks,
        ff.scale().recip(),
        &quad.tolerance(),
    )
    .checked()
}

/// PV ∫₀^∞ f(k)/(k² − ω²) dk by subtracting f(ω) over the whole range.
pub fn pv_integral_with<W>(ff: &FormFactor, f: W, omega: f64, quad: &QuadratureSpec) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    let w = omega.abs();
    if w == 0.0 {
        return k_integral(ff, quad, 0.0, |k| if k == 0.0 { 0.0 } else { f(k) / (k * k) });
    }
    let fw = f(w);
    k_integral(ff, quad, w, |k| if k == w { 0.0 } else { (f(k) - fw) / ((k - w) * (k + w)) })
}

/// [`pv_integral_with`] for an arbitrary numerator with no formfactor at hand.
pub fn pv_integral<W>(f: W, omega: f64, quad: &QuadratureSpec) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    let scale = FormFactor::hydrogen_spin(0.0, 1.0).expect("unit scale formfactor");
    pv_integral_with(&scale, f, omega, quad)
}

/// h(k0) by quadrature, even in k0.
pub fn h_function(ff: &FormFactor, k0: f64, quad: &QuadratureSpec) -> Result<Complex64> {
    let w = k0.abs();
    let re = pv_integral_with(ff, |k| ff.g2(k), w, quad)?;
    let im = if w > 0.0 { PI * ff.g2(w) / (2.0 * w) } else { 0.0 };
    Ok(Complex64::new(re, im))
}

/// Closed form of h for the hydrogen spin formfactor on the real axis,
/// even in k0.
pub fn h_closed_hydrogen(mu: f64, a0: f64, k0: f64) -> Complex64 {
    let xi = 0.5 * k0.abs() * a0;
    let x2 = xi * xi;
    let den = 12.0 * PI * a0.powi(3) * (1.0 + x2).powi(4);
    let re = 1.0 + 9.0 * x2 - 9.0 * x2 * x2 - x2 * x2 * x2;
    Complex64::new(re, 16.0 * xi * x2) * (mu * mu / den)
}

/// Analytic continuation of the hydrogen spin h into the complex plane;
/// agrees with [`h_closed_hydrogen`] for real k0 ≥ 0.
pub fn h_hydrogen_spin_continued(mu: f64, a0: f64, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let xi = z * (0.5 * a0);
    let num = Complex64::new(1.0, 0.0) - 4.0 * i * xi - xi * xi;
    num / ((xi + i).powi(4) * (12.0 * PI * a0.powi(3))) * (mu * mu)
}

/// Analytic continuation of h for the hydrogen dipole formfactor; for real
/// k0 ≥ 0 it is the h of that family on the real axis.
pub fn h_hydrogen_dipole_continued(d: f64, a0: f64, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let eta = z * (2.0 * a0 / 3.0);
    let e2 = eta * eta;
    let num = 3.0 * e2 * e2 + 18.0 * i * e2 * eta - 42.0 * e2 - 42.0 * i * eta + 7.0;
    -num / ((eta + i).powi(6) * (4096.0 * PI * a0.powi(3))) * (9.0 * d * d)
}

/// Small-ξ approximation μ²/(12πa0³) + iμ²|k0|³/(6π).
pub fn h_small_xi(mu: f64, a0: f64, k0: f64) -> Complex64 {
    Complex64::new(mu * mu / (12.0 * PI * a0.powi(3)), mu * mu * k0.abs().powi(3) / (6.0 * PI))
}

/// h continued to complex z from the positive real axis: closed forms for
/// the hydrogen families, small-frequency form for tables.
pub fn h_continued(ff: &FormFactor, z: Complex64, quad: &QuadratureSpec) -> Result<Complex64> {
    Ok(match ff.family {
        FormFactorFamily::HydrogenSpin => h_hydrogen_spin_continued(ff.coupling, ff.a0, z),
        FormFactorFamily::HydrogenDipole => h_hydrogen_dipole_continued(ff.coupling, ff.a0, z),
        FormFactorFamily::Tabulated => {
            let c = ff.small_k_coefficient();
            let h0 = h_function(ff, 0.0, quad)?;
            h0 + Complex64::i() * (0.5 * PI * c * c) * z.powi(3)
        }
    })
}

/// ∫₀^∞ g²(k)/(k² − z²) dk for complex z with Im z ≠ 0; real z gives
/// [`h_function`].
pub fn h_complex(ff: &FormFactor, z: Complex64, quad: &QuadratureSpec) -> Result<Complex64> {
    if z.im == 0.0 {
        return h_function(ff, z.re, quad);
    }
    // Even in z; work with Re z ≥ 0.
    let z = if z.re < 0.0 { -z } else { z };
    let split = quad.split(ff, z.re);
    let peaks = [Peak { center: z.re, width: z.im.abs() }];
    quadrature::integrate_peaked_semi_infinite(
        |k| Complex64::new(ff.g2(k), 0.0) / (k * k - z * z),
        0.0,
        split,
        &peaks,
        ff.scale().recip(),
        &quad.tolerance(),
    )
    .checked()
}

/// Resonance shift and half-width at real ω.
pub fn shift_width(model: &SystemModel, omega: f64, quad: &QuadratureSpec) -> Result<DispersionValue> {
    let h = h_function(&model.formfactor, omega, quad)?;
    let w = omega.abs();
    let g2 = model.formfactor.g2(w);
    let (delta, gamma) = match model.variant {
        Variant::Spin => (2.0 * h.re, if w > 0.0 { PI * g2 / w } else { 0.0 }),
        _ => (h.re, if w > 0.0 { PI * g2 / (2.0 * w) } else { 0.0 }),
    };
    Ok(DispersionValue { h, delta, gamma, omega })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_at_zero_spot_value() {
        let ff = FormFactor::hydrogen_spin(1.0, 1.0).unwrap();
        let h = h_function(&ff, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((h.re - 1.0 / (12.0 * PI)).abs() < 1e-12);
        assert_eq!(h.im, 0.0);
    }

    #[test]
    fn constant_numerator_vanishes() {
        let q = QuadratureSpec::default();
        for w in [0.1, 1.0, 10.0] {
            let v = pv_integral(|_| 1.0, w, &q).unwrap();
            assert!(v.abs() < 1e-12, "w = {w}: {v}");
        }
    }

    #[test]
    fn continued_spin_form_matches_real_axis() {
        for k0 in [0.0, 0.3, 1.1, 4.0] {
            let a = h_closed_hydrogen(1.3, 0.7, k0);
            let b = h_hydrogen_spin_continued(1.3, 0.7, Complex64::new(k0, 0.0));
            assert!((a - b).norm() < 1e-14 * a.norm().max(1e-300), "{k0}: {a} vs {b}");
        }
    }

    #[test]
    fn dipole_continuation_matches_quadrature() {
        let ff = FormFactor::hydrogen_dipole(0.8, 1.2).unwrap();
        let q = QuadratureSpec::default();
        for k0 in [0.0, 0.4, 1.5, 3.0] {
            let a = h_function(&ff, k0, &q).unwrap();
            let b = h_hydrogen_dipole_continued(0.8, 1.2, Complex64::new(k0, 0.0));
            assert!((a - b).norm() < 1e-9 * a.norm(), "{k0}: {a} vs {b}");
        }
    }

    #[test]
    fn cauchy_matches_log() {
        let ff = FormFactor::tabulated(vec![0.0, 10.0], vec![0.0, 0.0]).unwrap();
        let q = QuadratureSpec { k_max: Some(3.0), ..Default::default() };
        // F = 1 on [0, 3] (tail zero beyond the split by construction of f).
        let f = |k: f64| if k <= 3.0 { 1.0 } else { 0.0 };
        let v = cauchy(&ff, &q, 1.0, f).unwrap();
        assert!((v.re - 2f64.ln()).abs() < 1e-10, "{v}");
        assert!((v.im - PI).abs() < 1e-15);
    }
}
