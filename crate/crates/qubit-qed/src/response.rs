//! Transition matrices, scattering amplitudes, linear response and
//! resonance poles.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::{h_complex, h_continued, h_function, shift_width, QuadratureSpec};
use crate::error::{Error, Result};
use crate::model::{SystemModel, Variant};
use crate::selfenergy::{coefficients_b_delta, spin_zero_channel_24, spin_zero_channel_24_at, Channel, ChannelValue, Coefficients};
use crate::tolerances;

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Order {
    #[serde(rename = "2")]
    Second,
    #[serde(rename = "2+4")]
    SecondPlusFourth,
}

impl Order {
    pub fn label(self) -> &'static str {
        match self {
            Order::Second => "2",
            Order::SecondPlusFourth => "2+4",
        }
    }
}

impl FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Order> {
        match s.trim() {
            "2" | "second" => Ok(Order::Second),
            "4" | "2+4" | "fourth" => Ok(Order::SecondPlusFourth),
            other => Err(Error::Config(format!("unknown order '{other}' (use 2 or 4)"))),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Transition,
    Scattering,
    Susceptibility,
    Polarizability,
}

impl Quantity {
    pub fn label(self) -> &'static str {
        match self {
            Quantity::Transition => "transition",
            Quantity::Scattering => "scattering",
            Quantity::Susceptibility => "susceptibility",
            Quantity::Polarizability => "polarizability",
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Quantity> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transition" | "t" => Ok(Quantity::Transition),
            "scattering" | "f" => Ok(Quantity::Scattering),
            "susceptibility" | "chi" => Ok(Quantity::Susceptibility),
            "polarizability" | "alpha" => Ok(Quantity::Polarizability),
            other => Err(Error::Config(format!("unknown quantity '{other}'"))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponsePoint {
    pub omega: f64,
    pub value: ChannelValue,
    pub quantity: Quantity,
    pub order: Order,
}

/// sgn with sgn(0) = 0.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Feynman value to retarded value at real ω: Im gets a factor sgn(ω).
pub fn retarded(v: C, omega: f64) -> C {
    C::new(v.re, sgn(omega) * v.im)
}

fn coefficients(model: &SystemModel, order: Order, quad: &QuadratureSpec) -> Result<Coefficients> {
    match order {
        Order::Second => Ok(Coefficients { b: 0.0, delta: 0.0 }),
        Order::SecondPlusFourth => coefficients_b_delta(model, quad),
    }
}

fn inv_checked(den: C) -> Result<C> {
    if den == C::new(0.0, 0.0) {
        return Err(Error::Pole(format!("transition matrix denominator vanishes")));
    }
    Ok(den.inv())
}

/// Denominator 1/T up to the numerator, shared by T and the pole finder.
fn transition_from_h(model: &SystemModel, co: &Coefficients, k0: C, h: C, zero: C) -> Result<ChannelValue> {
    let s = 1.0 - co.b;
    match model.variant {
        Variant::Spin => {
            let m2 = 2.0 * model.m();
            Ok(ChannelValue::Spin {
                plus: -2.0 * s * inv_checked(m2 - k0 - co.delta - 2.0 * s * h)?,
                minus: -2.0 * s * inv_checked(m2 + k0 - co.delta - 2.0 * s * h)?,
                zero,
            })
        }
        _ => {
            let d = model.delta_m();
            Ok(ChannelValue::Scalar(-2.0 * d * s * inv_checked(d * d - k0 * k0 - 2.0 * d * s * h)?))
        }
    }
}

/// Transition matrix T(k0) in the Feynman convention.
pub fn transition_matrix(model: &SystemModel, order: Order, k0: C, quad: &QuadratureSpec) -> Result<ChannelValue> {
    let co = coefficients(model, order, quad)?;
    let h = if k0.im == 0.0 { h_function(&model.formfactor, k0.re, quad)? } else { h_complex(&model.formfactor, k0, quad)? };
    let zero = match (model.variant, order) {
        (Variant::Spin, Order::SecondPlusFourth) if k0.im == 0.0 => spin_zero_channel_24(model, k0.re, quad)?,
        (Variant::Spin, Order::SecondPlusFourth) => spin_zero_channel_24_at(model, k0, quad)?,
        _ => C::new(0.0, 0.0),
    };
    transition_from_h(model, &co, k0, h, zero)
}

/// Photon scattering amplitude f = g²(ω)·T(ω), ω > 0.
pub fn scattering_amplitude(model: &SystemModel, order: Order, omega: f64, quad: &QuadratureSpec) -> Result<ChannelValue> {
    if !(omega > 0.0) {
        return Err(Error::NonPositiveFrequency(omega));
    }
    let g2 = model.formfactor.g2(omega);
    Ok(transition_matrix(model, order, C::new(omega, 0.0), quad)?.map(|v| v * g2))
}

/// The resonant and nonresonant simple fractions of the two-level
/// scattering amplitude, both carrying −iΓ̂(ω).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimpleFractions {
    pub resonant: C,
    pub nonresonant: C,
    pub den_resonant: C,
    pub den_nonresonant: C,
}

pub fn scattering_simple_fractions(model: &SystemModel, omega: f64, quad: &QuadratureSpec) -> Result<SimpleFractions> {
    if model.variant != Variant::TwoLevelAtom {
        return Err(Error::WrongVariant { expected: "two-level" });
    }
    if !(omega > 0.0) {
        return Err(Error::NonPositiveFrequency(omega));
    }
    let dw = shift_width(model, omega, quad)?;
    let g2 = model.formfactor.g2(omega);
    let m2 = 2.0 * model.m();
    let den_resonant = C::new(m2 - dw.delta - omega, -dw.gamma);
    let den_nonresonant = C::new(m2 - dw.delta + omega, -dw.gamma);
    Ok(SimpleFractions {
        resonant: -g2 / den_resonant,
        nonresonant: -g2 / den_nonresonant,
        den_resonant,
        den_nonresonant,
    })
}

/// Spin susceptibility: retarded transition matrix, channel by channel.
pub fn susceptibility(model: &SystemModel, order: Order, omega: f64, quad: &QuadratureSpec) -> Result<ChannelValue> {
    if model.variant != Variant::Spin {
        return Err(Error::WrongVariant { expected: "spin" });
    }
    Ok(transition_matrix(model, order, C::new(omega, 0.0), quad)?.map(|v| retarded(v, omega)))
}

/// Atomic polarizability α = −A·T_R(ω).
pub fn polarizability(model: &SystemModel, order: Order, omega: f64, quad: &QuadratureSpec) -> Result<C> {
    if model.variant == Variant::Spin {
        return Err(Error::WrongVariant { expected: "two-level or dipole" });
    }
    let t = transition_matrix(model, order, C::new(omega, 0.0), quad)?.scalar().expect("atoms are scalar");
    Ok(-model.dipole_response_constant_a * retarded(t, omega))
}

/// Simple-fraction decomposition of the second-order polarizability, in the
/// sign-rule form and in the resonant-approximation form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonantDecomposition {
    pub term_plus: C,
    pub term_minus: C,
    pub den_plus: C,
    pub den_minus: C,
    pub approx_plus: C,
    pub approx_minus: C,
}

impl ResonantDecomposition {
    pub fn sum(&self) -> C {
        self.term_plus + self.term_minus
    }

    pub fn approx_sum(&self) -> C {
        self.approx_plus + self.approx_minus
    }
}

pub fn polarizability_resonant_decomposition(model: &SystemModel, omega: f64, quad: &QuadratureSpec) -> Result<ResonantDecomposition> {
    if model.variant == Variant::Spin {
        return Err(Error::WrongVariant { expected: "two-level or dipole" });
    }
    let dw = shift_width(model, omega, quad)?;
    let a = model.dipole_response_constant_a;
    let d = model.delta_m();
    let sg = sgn(omega) * dw.gamma;
    let den_plus = C::new(d - dw.delta - omega, -sg);
    let den_minus = C::new(d - dw.delta + omega, -sg);
    Ok(ResonantDecomposition {
        term_plus: a / den_plus,
        term_minus: a / den_minus,
        den_plus,
        den_minus,
        approx_plus: a / C::new(d - dw.delta - omega, -dw.gamma),
        approx_minus: a / C::new(d - dw.delta + omega, dw.gamma),
    })
}

/// One point of a frequency scan.
pub fn evaluate(model: &SystemModel, quantity: Quantity, order: Order, omega: f64, quad: &QuadratureSpec) -> Result<ChannelValue> {
    match quantity {
        Quantity::Transition => transition_matrix(model, order, C::new(omega, 0.0), quad),
        Quantity::Scattering => scattering_amplitude(model, order, omega, quad),
        Quantity::Susceptibility => susceptibility(model, order, omega, quad),
        Quantity::Polarizability => polarizability(model, order, omega, quad).map(ChannelValue::Scalar),
    }
}

/// |response(−ω) − conj(response(ω))|; the spin channels are transposed.
pub fn crossing_residual(model: &SystemModel, order: Order, omega: f64, quad: &QuadratureSpec) -> Result<f64> {
    match model.variant {
        Variant::Spin => {
            let fwd = susceptibility(model, order, omega, quad)?;
            let bwd = susceptibility(model, order, -omega, quad)?;
            let (ChannelValue::Spin { plus: p, minus: m, zero: z }, ChannelValue::Spin { plus: bp, minus: bm, zero: bz }) = (fwd, bwd) else {
                unreachable!("spin values carry three channels")
            };
            Ok((bp - m.conj()).norm().max((bm - p.conj()).norm()).max((bz - z.conj()).norm()))
        }
        _ => {
            let fwd = polarizability(model, order, omega, quad)?;
            let bwd = polarizability(model, order, -omega, quad)?;
            Ok((bwd - fwd.conj()).norm())
        }
    }
}

/// A resonance pole of a response function in the complex ω plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleReport {
    #[serde(serialize_with = "ser_complex")]
    pub location: C,
    pub channel: Channel,
    pub seed: f64,
    pub iterations: usize,
    pub residue_sign_note: String,
}

fn ser_complex<S: serde::Serializer>(v: &C, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("complex", 2)?;
    st.serialize_field("re", &v.re)?;
    st.serialize_field("im", &v.im)?;
    st.end()
}

/// Continuation of the retarded h from the side of the real axis that
/// contains `seed`.
fn h_retarded_continued(model: &SystemModel, z: C, seed: f64, quad: &QuadratureSpec) -> Result<C> {
    if seed >= 0.0 {
        h_continued(&model.formfactor, z, quad)
    } else {
        Ok(h_continued(&model.formfactor, -z.conj(), quad)?.conj())
    }
}

fn newton<F>(mut f: F, seed: f64, scale: f64) -> Result<(C, usize)>
where
    F: FnMut(C) -> Result<C>,
{
    let mut z = C::new(seed, 0.0);
    let step_tol = tolerances::NEWTON_STEP_REL * scale;
    let dz = 1e-6 * scale;
    for it in 1..=tolerances::NEWTON_MAX_ITER {
        let fz = f(z)?;
        if fz == C::new(0.0, 0.0) {
            return Ok((z, it));
        }
        let deriv = (f(z + dz)? - f(z - dz)?) / (2.0 * dz);
        if !(deriv.norm() > 0.0) || !deriv.is_finite() {
            break;
        }
        let step = fz / deriv;
        z -= step;
        if !z.is_finite() {
            break;
        }
        if step.norm() <= step_tol {
            return Ok((z, it));
        }
    }
    Err(Error::NoConvergence { iterations: tolerances::NEWTON_MAX_ITER, seed: format!("{seed}") })
}

fn half_plane_note(z: C, scale: f64) -> String {
    if z.im.abs() <= 1e-15 * scale {
        "on the real axis".to_string()
    } else if z.im > 0.0 {
        "upper half-plane".to_string()
    } else {
        "lower half-plane".to_string()
    }
}

/// Newton search for the zeros of the response denominator, seeded at
/// ±(m_e − m_g).
pub fn locate_poles(model: &SystemModel, order: Order, quad: &QuadratureSpec) -> Result<Vec<PoleReport>> {
    let co = coefficients(model, order, quad)?;
    if co.b >= 0.5 {
        return Err(Error::CouplingTooLarge { name: "b (pole search needs b < 0.5)", value: co.b });
    }
    let s = 1.0 - co.b;
    let d = model.delta_m();
    let mut reports = Vec::new();
    for seed in [d, -d] {
        let (z, iterations, channel) = match model.variant {
            Variant::Spin => {
                let (channel, sign) = if seed > 0.0 { (Channel::Plus, -1.0) } else { (Channel::Minus, 1.0) };
                let (z, it) = newton(|z| Ok(d + sign * z - co.delta - 2.0 * s * h_retarded_continued(model, z, seed, quad)?), seed, d)?;
                (z, it, channel)
            }
            _ => {
                let (z, it) = newton(|z| Ok(d * d - z * z - 2.0 * d * s * h_retarded_continued(model, z, seed, quad)?), seed, d)?;
                (z, it, Channel::Scalar)
            }
        };
        reports.push(PoleReport { location: z, channel, seed, iterations, residue_sign_note: half_plane_note(z, d) });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_model, FormFactor, Masses};

    #[test]
    fn zero_coupling_polarizability_static() {
        let ff = FormFactor::hydrogen_dipole(0.0, 1.0).unwrap();
        let model = make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), ff, Some(1.0)).unwrap();
        let a = polarizability(&model, Order::Second, 0.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(a, C::new(1.0, 0.0));
    }

    #[test]
    fn zero_coupling_poles_on_axis() {
        let ff = FormFactor::hydrogen_dipole(0.0, 1.0).unwrap();
        let model = make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), ff, None).unwrap();
        let poles = locate_poles(&model, Order::Second, &QuadratureSpec::default()).unwrap();
        assert_eq!(poles.len(), 2);
        assert_eq!(poles[0].location, C::new(2.0, 0.0));
        assert_eq!(poles[1].location, C::new(-2.0, 0.0));
    }

    #[test]
    fn scattering_refuses_negative_frequency() {
        let model = make_model(Variant::Spin, Masses::Symmetric(1.0), FormFactor::hydrogen_spin(1.0, 1.0).unwrap(), None).unwrap();
        let err = scattering_amplitude(&model, Order::Second, -1.0, &QuadratureSpec::default()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveFrequency(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn order_parsing() {
        assert_eq!("4".parse::<Order>().unwrap(), Order::SecondPlusFourth);
        assert_eq!("2".parse::<Order>().unwrap(), Order::Second);
    }
}
