//! Electron self-energies, mass corrections, and the photon self-energy in
//! second and fourth order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{cauchy, cauchy_complex, k_integral, QuadratureSpec};
use crate::error::{Error, Result};
use crate::model::{FormFactor, SystemModel, Variant};
use crate::propagator::ProjectorValue;
use crate::quadrature::{self, Peak};

type C = Complex64;

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

/// Angular-momentum channel of a photon-sector quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Plus,
    Minus,
    Zero,
    Scalar,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Plus => "plus",
            Channel::Minus => "minus",
            Channel::Zero => "zero",
            Channel::Scalar => "scalar",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Photon-sector value: three channels for the spin, one scalar for atoms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelValue {
    Spin { plus: C, minus: C, zero: C },
    Scalar(C),
}

impl ChannelValue {
    pub fn entries(&self) -> Vec<(Channel, C)> {
        match *self {
            ChannelValue::Spin { plus, minus, zero } => {
                vec![(Channel::Plus, plus), (Channel::Minus, minus), (Channel::Zero, zero)]
            }
            ChannelValue::Scalar(v) => vec![(Channel::Scalar, v)],
        }
    }

    pub fn get(&self, channel: Channel) -> Option<C> {
        self.entries().into_iter().find(|(c, _)| *c == channel).map(|(_, v)| v)
    }

    pub fn map<F: Fn(C) -> C>(&self, f: F) -> ChannelValue {
        match *self {
            ChannelValue::Spin { plus, minus, zero } => ChannelValue::Spin { plus: f(plus), minus: f(minus), zero: f(zero) },
            ChannelValue::Scalar(v) => ChannelValue::Scalar(f(v)),
        }
    }

    pub fn zip_with<F: Fn(C, C) -> C>(&self, other: &ChannelValue, f: F) -> ChannelValue {
        match (*self, *other) {
            (ChannelValue::Spin { plus: a, minus: b, zero: c }, ChannelValue::Spin { plus: x, minus: y, zero: z }) => {
                ChannelValue::Spin { plus: f(a, x), minus: f(b, y), zero: f(c, z) }
            }
            (ChannelValue::Scalar(a), ChannelValue::Scalar(x)) => ChannelValue::Scalar(f(a, x)),
            _ => panic!("channel kinds differ"),
        }
    }

    pub fn scalar(&self) -> Option<C> {
        match *self {
            ChannelValue::Scalar(v) => Some(v),
            _ => None,
        }
    }
}

impl std::ops::Add for ChannelValue {
    type Output = ChannelValue;
    fn add(self, o: ChannelValue) -> ChannelValue {
        self.zip_with(&o, |a, b| a + b)
    }
}

/// Mass counterterms and the tadpole mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassCorrections {
    pub delta_m_e: f64,
    pub delta_m_g: f64,
    pub m_t: f64,
}

/// m_t = ∫ g²/k² dk.
pub fn tadpole_mass(ff: &FormFactor, quad: &QuadratureSpec) -> Result<f64> {
    k_integral(ff, quad, 0.0, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / (k * k) })
}

pub fn mass_correction(model: &SystemModel, quad: &QuadratureSpec) -> Result<MassCorrections> {
    let ff = &model.formfactor;
    match model.variant {
        Variant::Spin => {
            let m = model.m();
            let dm = k_integral(ff, quad, 0.0, |k| {
                if k == 0.0 {
                    0.0
                } else {
                    ff.g2(k) * (3.0 * k + 2.0 * m) / (2.0 * k * k * (k + 2.0 * m))
                }
            })?;
            Ok(MassCorrections { delta_m_e: dm, delta_m_g: -dm, m_t: tadpole_mass(ff, quad)? })
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            let dm = k_integral(ff, quad, 0.0, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / (2.0 * k * (k + 2.0 * m)) })?;
            Ok(MassCorrections { delta_m_e: dm, delta_m_g: -dm, m_t: 0.0 })
        }
        Variant::DipoleAtom => {
            let dmass = model.delta_m();
            let dm = k_integral(ff, quad, 0.0, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / (2.0 * k * (k + dmass)) })?;
            Ok(MassCorrections { delta_m_e: dm, delta_m_g: -3.0 * dm, m_t: 0.0 })
        }
    }
}

/// ∫ g²/(2k) · 1/(p + k + s − iε) dk, s a real offset.
fn resolvent_plus(ff: &FormFactor, quad: &QuadratureSpec, p0: C, s: f64) -> Result<C> {
    let w = |k: f64| if k == 0.0 { 0.0 } else { ff.g2(k) / (2.0 * k) };
    cauchy_complex(ff, quad, -(p0 + s), w)
}

/// ∫ g²/(2k) · 1/(p − k − s + iε) dk.
fn resolvent_minus(ff: &FormFactor, quad: &QuadratureSpec, p0: C, s: f64) -> Result<C> {
    let w = |k: f64| if k == 0.0 { 0.0 } else { ff.g2(k) / (2.0 * k) };
    cauchy_complex(ff, quad, p0 - s, w).map(|v| -v)
}

/// Second-order electron self-energy including the mass counterterms.
pub fn electron_self_energy_2(model: &SystemModel, p0: C, masses: &MassCorrections, quad: &QuadratureSpec) -> Result<ProjectorValue> {
    let ff = &model.formfactor;
    let dim = model.dim_e();
    match model.variant {
        Variant::Spin => {
            let m = model.m();
            let up = resolvent_plus(ff, quad, p0, m)?;
            let down = resolvent_minus(ff, quad, p0, m)?;
            let local = masses.m_t - masses.delta_m_e;
            Ok(ProjectorValue::new(up * 2.0 + down + local, up + down * 2.0 - local, dim))
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            let up = resolvent_plus(ff, quad, p0, m)?;
            let down = resolvent_minus(ff, quad, p0, m)?;
            Ok(ProjectorValue::new(up - masses.delta_m_e, down - masses.delta_m_g, dim))
        }
        Variant::DipoleAtom => {
            let up = resolvent_plus(ff, quad, p0, -model.m_g)?;
            let down = resolvent_minus(ff, quad, p0, model.m_e)?;
            Ok(ProjectorValue::new(up - masses.delta_m_e, down * 3.0 - masses.delta_m_g, dim))
        }
    }
}

fn inv_checked(den: C, what: &str) -> Result<C> {
    if den == re(0.0) {
        return Err(Error::Pole(what.to_string()));
    }
    Ok(den.inv())
}

/// Lowest-order photon self-energy.
pub fn photon_self_energy_2(model: &SystemModel, k0: C) -> Result<ChannelValue> {
    match model.variant {
        Variant::Spin => {
            let m = model.m();
            Ok(ChannelValue::Spin {
                plus: -2.0 * inv_checked(2.0 * m - k0, "k0 = 2m")?,
                minus: -2.0 * inv_checked(2.0 * m + k0, "k0 = -2m")?,
                zero: re(0.0),
            })
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            Ok(ChannelValue::Scalar(-4.0 * m * inv_checked(4.0 * m * m - k0 * k0, "k0 = ±2m")?))
        }
        Variant::DipoleAtom => {
            let d = model.delta_m();
            Ok(ChannelValue::Scalar(-2.0 * d * inv_checked(d * d - k0 * k0, "k0 = ±Δm")?))
        }
    }
}

/// Fourth-order diagram labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Diagram {
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Diagram {
    pub const ALL: [Diagram; 7] = [Diagram::B, Diagram::C, Diagram::D, Diagram::E, Diagram::F, Diagram::G, Diagram::H];

    pub fn label(self) -> &'static str {
        match self {
            Diagram::B => "b",
            Diagram::C => "c",
            Diagram::D => "d",
            Diagram::E => "e",
            Diagram::F => "f",
            Diagram::G => "g",
            Diagram::H => "h",
        }
    }

    pub fn applies_to(self, variant: Variant) -> bool {
        match variant {
            Variant::Spin => true,
            _ => !matches!(self, Diagram::E | Diagram::H),
        }
    }
}

impl FromStr for Diagram {
    type Err = Error;
    fn from_str(s: &str) -> Result<Diagram> {
        match s.trim().trim_start_matches("4").to_ascii_lowercase().as_str() {
            "b" => Ok(Diagram::B),
            "c" => Ok(Diagram::C),
            "d" => Ok(Diagram::D),
            "e" => Ok(Diagram::E),
            "f" => Ok(Diagram::F),
            "g" => Ok(Diagram::G),
            "h" => Ok(Diagram::H),
            other => Err(Error::UnknownDiagram(other.to_string())),
        }
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The k-integrals shared by the fourth-order closed forms, with y = k + s.
struct Loops<'a> {
    ff: &'a FormFactor,
    quad: &'a QuadratureSpec,
    s: f64,
}

impl Loops<'_> {
    /// ∫ g² / (k^a y^b) dk.
    fn power(&self, a: i32, b: i32) -> Result<f64> {
        let (ff, s) = (self.ff, self.s);
        k_integral(ff, self.quad, 0.0, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / (k.powi(a) * (k + s).powi(b)) })
    }

    /// ∫ g² / (k (k + x − iε)) dk.
    fn shifted(&self, x: f64) -> Result<C> {
        let ff = self.ff;
        cauchy(ff, self.quad, -x, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / k })
    }

    /// ∫ g² / (k y (y² − k0² − iε)) dk.
    fn threshold(&self, k0: f64) -> Result<C> {
        let (ff, s) = (self.ff, self.s);
        let w = k0.abs();
        if w <= s {
            let v = k_integral(ff, self.quad, 0.0, |k| {
                if k == 0.0 {
                    0.0
                } else {
                    let y = k + s;
                    ff.g2(k) / (k * y * (y - w) * (y + w))
                }
            })?;
            return Ok(re(v));
        }
        cauchy(ff, self.quad, w - s, |k| if k == 0.0 { 0.0 } else { ff.g2(k) / (k * (k + s) * (k + s + w)) })
    }
}

fn spin_plus(model: &SystemModel, k0: f64, diagram: Diagram, masses: &MassCorrections, loops: &Loops) -> Result<C> {
    let x = 2.0 * model.m() - k0;
    if x == 0.0 {
        return Err(Error::Pole(format!("k0 = {k0} is on the resonance")));
    }
    Ok(match diagram {
        Diagram::B => -2.0 / (x * x) * loops.shifted(x)?,
        Diagram::C | Diagram::F => {
            re(2.0 / x * loops.power(1, 2)? + 2.0 / (x * x) * loops.power(1, 1)?) - loops.shifted(x)? / (x * x)
        }
        Diagram::D | Diagram::G => re(-2.0 * masses.delta_m_e / (x * x)),
        Diagram::E | Diagram::H => re(2.0 * masses.m_t / (x * x)),
    })
}

fn spin_zero(k0: f64, diagram: Diagram, loops: &Loops) -> Result<C> {
    Ok(match diagram {
        Diagram::B => -4.0 * loops.threshold(k0)?,
        Diagram::C | Diagram::F => -2.0 * loops.threshold(k0)?,
        _ => re(0.0),
    })
}

/// Closed-form value of one fourth-order photon self-energy diagram.
///
/// The spin (f, g, h) and two-level (f, g) diagrams equal (c, d, e) and
/// (c, d); the dipole atom distinguishes them.
pub fn fourth_order_diagram(model: &SystemModel, k0: f64, diagram: Diagram, masses: &MassCorrections, quad: &QuadratureSpec) -> Result<ChannelValue> {
    if !diagram.applies_to(model.variant) {
        return Err(Error::NotApplicable { diagram: diagram.label().into(), variant: model.variant.name() });
    }
    let ff = &model.formfactor;
    match model.variant {
        Variant::Spin => {
            let loops = Loops { ff, quad, s: 2.0 * model.m() };
            Ok(ChannelValue::Spin {
                plus: spin_plus(model, k0, diagram, masses, &loops)?,
                minus: spin_plus(model, -k0, diagram, masses, &loops)?,
                zero: spin_zero(k0, diagram, &loops)?,
            })
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            let loops = Loops { ff, quad, s: 2.0 * m };
            let den = 4.0 * m * m - k0 * k0;
            if den == 0.0 {
                return Err(Error::Pole(format!("k0 = {k0} is on the resonance")));
            }
            let v = match diagram {
                Diagram::B => 2.0 / den * loops.power(1, 1)?,
                Diagram::C | Diagram::F => {
                    ((k0 * k0 + 4.0 * m * m) * loops.power(0, 2)? + 16.0 * m.powi(3) * loops.power(1, 2)?) / (den * den)
                }
                Diagram::D | Diagram::G => -masses.delta_m_e * (8.0 * m * m + 2.0 * k0 * k0) / (den * den),
                Diagram::E | Diagram::H => unreachable!(),
            };
            Ok(ChannelValue::Scalar(re(v)))
        }
        Variant::DipoleAtom => {
            let d = model.delta_m();
            let loops = Loops { ff, quad, s: d };
            let den = d * d - k0 * k0;
            if den == 0.0 {
                return Err(Error::Pole(format!("k0 = {k0} is on the resonance")));
            }
            let counter = |q: f64| -masses.delta_m_e * (3.0 / ((d - q) * (d - q)) + 1.0 / ((d + q) * (d + q)));
            let v = match diagram {
                Diagram::B => 2.0 / den * loops.power(1, 1)?,
                Diagram::C => (2.0 * d + k0) / den * loops.power(1, 2)? - counter(k0),
                Diagram::D => counter(k0),
                Diagram::F => (2.0 * d - k0) / den * loops.power(1, 2)? - counter(-k0),
                Diagram::G => counter(-k0),
                Diagram::E | Diagram::H => unreachable!(),
            };
            Ok(ChannelValue::Scalar(re(v)))
        }
    }
}

/// Literal sum of the second-order part and every applicable fourth-order
/// diagram.
pub fn diagram_sum(model: &SystemModel, k0: f64, masses: &MassCorrections, quad: &QuadratureSpec) -> Result<ChannelValue> {
    let mut total = photon_self_energy_2(model, re(k0))?;
    for d in Diagram::ALL {
        if d.applies_to(model.variant) {
            total = total + fourth_order_diagram(model, k0, d, masses, quad)?;
        }
    }
    Ok(total)
}

/// Fourth-order coefficients b and δ (δ is zero for the atoms).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coefficients {
    pub b: f64,
    pub delta: f64,
}

pub fn coefficients_b_delta(model: &SystemModel, quad: &QuadratureSpec) -> Result<Coefficients> {
    let ff = &model.formfactor;
    let (b, delta_integral) = match model.variant {
        Variant::Spin => {
            let loops = Loops { ff, quad, s: 2.0 * model.m() };
            (2.0 * loops.power(1, 2)?, Some(tadpole_mass(ff, quad)?))
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            let b = k_integral(ff, quad, 0.0, |k| {
                if k == 0.0 {
                    0.0
                } else {
                    ff.g2(k) * (k + 4.0 * m) / (k * (k + 2.0 * m).powi(2))
                }
            })? / (2.0 * m);
            (b, None)
        }
        Variant::DipoleAtom => {
            let d = model.delta_m();
            let b = k_integral(ff, quad, 0.0, |k| {
                if k == 0.0 {
                    0.0
                } else {
                    ff.g2(k) * (k + 3.0 * d) / (k * (k + d).powi(2))
                }
            })? / d;
            (b, None)
        }
    };
    if b >= 1.0 {
        return Err(Error::CouplingTooLarge { name: "b", value: b });
    }
    let delta = delta_integral.map_or(0.0, |mt| mt / (2.0 * (1.0 - b)));
    Ok(Coefficients { b, delta })
}

/// P_0 through fourth order: −4∫ g²/(k y (y² − k0² − iε)) dk.
pub fn spin_zero_channel_24(model: &SystemModel, k0: f64, quad: &QuadratureSpec) -> Result<C> {
    let loops = Loops { ff: &model.formfactor, quad, s: 2.0 * model.m() };
    Ok(-4.0 * loops.threshold(k0)?)
}

/// [`spin_zero_channel_24`] at complex k0 off the real axis.
pub fn spin_zero_channel_24_at(model: &SystemModel, z: C, quad: &QuadratureSpec) -> Result<C> {
    if z.im == 0.0 {
        return spin_zero_channel_24(model, z.re, quad);
    }
    let ff = &model.formfactor;
    let s = 2.0 * model.m();
    let z = if z.re < 0.0 { -z } else { z };
    let peaks = [Peak { center: z.re - s, width: z.im.abs() }];
    let split = 40.0 * ff.scale() + 2.0 * z.re.abs();
    let v = quadrature::integrate_peaked_semi_infinite(
        |k| {
            if k == 0.0 {
                return re(0.0);
            }
            let y = k + s;
            re(ff.g2(k) / (k * y)) / (y * y - z * z)
        },
        0.0,
        split,
        &peaks,
        ff.scale().recip(),
        &quad.tolerance(),
    )
    .checked()?;
    Ok(-4.0 * v)
}

/// Photon self-energy through fourth order with the double poles resummed.
pub fn photon_self_energy_24(model: &SystemModel, k0: f64, quad: &QuadratureSpec) -> Result<ChannelValue> {
    let co = coefficients_b_delta(model, quad)?;
    let scale = 1.0 - co.b;
    match model.variant {
        Variant::Spin => {
            let m = model.m();
            Ok(ChannelValue::Spin {
                plus: re(-2.0 * scale) * inv_checked(re(2.0 * m - k0 - co.delta), "shifted pole")?,
                minus: re(-2.0 * scale) * inv_checked(re(2.0 * m + k0 - co.delta), "shifted pole")?,
                zero: spin_zero_channel_24(model, k0, quad)?,
            })
        }
        Variant::TwoLevelAtom => {
            let m = model.m();
            Ok(ChannelValue::Scalar(re(-4.0 * m * scale) * inv_checked(re(4.0 * m * m - k0 * k0), "k0 = ±2m")?))
        }
        Variant::DipoleAtom => {
            let d = model.delta_m();
            Ok(ChannelValue::Scalar(re(-2.0 * d * scale) * inv_checked(re(d * d - k0 * k0), "k0 = ±Δm")?))
        }
    }
}
