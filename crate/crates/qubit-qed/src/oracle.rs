//! Brute-force evaluation of the loop integrals from explicit matrices, with
//! ε → 0 extrapolation, and a Kramers-Kronig consistency check of the
//! retarded response.
//!
//! Nothing here uses the projector algebra or the closed forms of the
//! analytic path: propagators are literal 2×2 or 4×4 matrices with finite
//! iε, vertices are Pauli or τ matrices, and every loop energy is
//! integrated numerically along the real line.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;

use crate::dispersion::QuadratureSpec;
use crate::error::{Error, Result};
use crate::model::{FormFactor, FormFactorFamily, SystemModel, Variant};
use crate::quadrature::{self, CVec, Peak, Tolerance};
use crate::response::{retarded, transition_matrix, Order};
use crate::selfenergy::{coefficients_b_delta, Channel, ChannelValue, Diagram, MassCorrections};
use crate::dispersion::shift_width;
use crate::tolerances;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

fn c0() -> C {
    C::new(0.0, 0.0)
}

/// Dense complex N×N matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat<const N: usize>(pub [[C; N]; N]);

pub type M2 = Mat<2>;
pub type M4 = Mat<4>;

impl<const N: usize> Mat<N> {
    pub fn zero() -> Self {
        Mat([[c0(); N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.0[i][i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn trace(&self) -> C {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn scale(&self, s: C) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Tr(AB) without forming the product.
pub fn trace_of_product<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> C {
    let mut t = c0();
    for i in 0..N {
        for j in 0..N {
            t += a.0[i][j] * b.0[j][i];
        }
    }
    t
}

impl<const N: usize> Mul for Mat<N> {
    type Output = Mat<N>;
    fn mul(self, o: Mat<N>) -> Mat<N> {
        let mut m = Mat::zero();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == c0() {
                    continue;
                }
                for j in 0..N {
                    m.0[i][j] += a * o.0[k][j];
                }
            }
        }
        m
    }
}

impl<const N: usize> Add for Mat<N> {
    type Output = Mat<N>;
    fn add(self, o: Mat<N>) -> Mat<N> {
        let mut m = self;
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] += o.0[i][j];
            }
        }
        m
    }
}

impl<const N: usize> Sub for Mat<N> {
    type Output = Mat<N>;
    fn sub(self, o: Mat<N>) -> Mat<N> {
        self + o.scale(C::new(-1.0, 0.0))
    }
}

/// Pauli matrices in the basis (e, g).
pub mod pauli {
    use super::{Mat, M2, C};

    fn m(a: [[C; 2]; 2]) -> M2 {
        Mat(a)
    }

    pub fn sigma_x() -> M2 {
        let (o, l) = (C::new(0.0, 0.0), C::new(1.0, 0.0));
        m([[o, l], [l, o]])
    }

    pub fn sigma_y() -> M2 {
        let o = C::new(0.0, 0.0);
        m([[o, C::new(0.0, -1.0)], [C::new(0.0, 1.0), o]])
    }

    pub fn sigma_z() -> M2 {
        let o = C::new(0.0, 0.0);
        m([[C::new(1.0, 0.0), o], [o, C::new(-1.0, 0.0)]])
    }

    /// (σx + iσy)/√2.
    pub fn sigma_plus() -> M2 {
        (sigma_x() + sigma_y().scale(C::new(0.0, 1.0))).scale(C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    /// (σx − iσy)/√2.
    pub fn sigma_minus() -> M2 {
        (sigma_x() - sigma_y().scale(C::new(0.0, 1.0))).scale(C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    pub fn p_e() -> M2 {
        let o = C::new(0.0, 0.0);
        m([[C::new(1.0, 0.0), o], [o, o]])
    }

    pub fn p_g() -> M2 {
        let o = C::new(0.0, 0.0);
        m([[o, o], [o, C::new(1.0, 0.0)]])
    }
}

/// Dipole-atom matrices in the basis (x, y, z, g).
pub mod dipole {
    use super::{Mat, M4, C};

    /// τ_i = |i⟩⟨g| + |g⟩⟨i|.
    pub fn tau(i: usize) -> M4 {
        let mut t = Mat::zero();
        t.0[i][3] = C::new(1.0, 0.0);
        t.0[3][i] = C::new(1.0, 0.0);
        t
    }

    pub fn p_e() -> M4 {
        let mut p = Mat::identity();
        p.0[3][3] = C::new(0.0, 0.0);
        p
    }

    pub fn p_g() -> M4 {
        let mut p = Mat::zero();
        p.0[3][3] = C::new(1.0, 0.0);
        p
    }
}

/// Which loop integral the oracle evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleDiagram {
    Second,
    Fourth(Diagram),
}

impl OracleDiagram {
    fn is_double_loop(self) -> bool {
        matches!(self, OracleDiagram::Fourth(Diagram::B | Diagram::C | Diagram::F))
    }

    /// Propagator arguments p0 + α + β·l0 appearing in the trace.
    fn shifts(self, k0: f64) -> Vec<(f64, f64)> {
        match self {
            OracleDiagram::Fourth(Diagram::B) => vec![(k0, 0.0), (k0, 1.0), (0.0, 1.0), (0.0, 0.0)],
            OracleDiagram::Fourth(Diagram::C) => vec![(k0, 0.0), (0.0, 0.0), (0.0, 1.0)],
            OracleDiagram::Fourth(Diagram::F) => vec![(k0, 0.0), (k0, 1.0), (0.0, 0.0)],
            _ => vec![(k0, 0.0), (0.0, 0.0)],
        }
    }
}

impl FromStr for OracleDiagram {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2" | "second" => Ok(OracleDiagram::Second),
            other => other.parse::<Diagram>().map(OracleDiagram::Fourth),
        }
    }
}

impl fmt::Display for OracleDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleDiagram::Second => f.write_str("2"),
            OracleDiagram::Fourth(d) => write!(f, "4{d}"),
        }
    }
}

/// Explicit-matrix content of one variant.
struct Algebra<const N: usize> {
    pe: Mat<N>,
    pg: Mat<N>,
    m_e: f64,
    m_g: f64,
    /// (channel, σ_a, σ_b) for every external channel.
    external: Vec<(Channel, Mat<N>, Mat<N>)>,
    /// Vertices summed over on an internal photon line.
    internal: Vec<Mat<N>>,
    /// Counterterm insertion.
    counter: Mat<N>,
}

impl<const N: usize> Algebra<N> {
    #[inline]
    fn prop(&self, p: f64, eps: f64) -> Mat<N> {
        let a = C::new(p - self.m_e, eps).inv();
        let b = C::new(p - self.m_g, -eps).inv();
        self.pe.scale(a) + self.pg.scale(b)
    }

    /// Σ_n v_n·X·v_n.
    fn sandwich(&self, x: &Mat<N>) -> Mat<N> {
        let mut s = Mat::zero();
        for v in &self.internal {
            s = s + *v * *x * *v;
        }
        s
    }
}

fn spin_algebra(model: &SystemModel, masses: &MassCorrections) -> Algebra<2> {
    use pauli::*;
    Algebra {
        pe: p_e(),
        pg: p_g(),
        m_e: model.m_e,
        m_g: model.m_g,
        external: vec![
            (Channel::Plus, sigma_minus(), sigma_plus()),
            (Channel::Minus, sigma_plus(), sigma_minus()),
            (Channel::Zero, sigma_z(), sigma_z()),
        ],
        internal: vec![sigma_x(), sigma_y(), sigma_z()],
        counter: sigma_z().scale(C::new(-masses.delta_m_e, 0.0)),
    }
}

fn two_level_algebra(model: &SystemModel, masses: &MassCorrections) -> Algebra<2> {
    use pauli::*;
    Algebra {
        pe: p_e(),
        pg: p_g(),
        m_e: model.m_e,
        m_g: model.m_g,
        external: vec![(Channel::Scalar, sigma_x(), sigma_x())],
        internal: vec![sigma_x()],
        counter: sigma_z().scale(C::new(-masses.delta_m_e, 0.0)),
    }
}

fn dipole_algebra(model: &SystemModel, masses: &MassCorrections) -> Algebra<4> {
    use dipole::*;
    Algebra {
        pe: p_e(),
        pg: p_g(),
        m_e: model.m_e,
        m_g: model.m_g,
        external: vec![(Channel::Scalar, tau(0), tau(0))],
        internal: vec![tau(0), tau(1), tau(2)],
        counter: (p_e().scale(C::new(masses.delta_m_e, 0.0)) + p_g().scale(C::new(masses.delta_m_g, 0.0))).scale(C::new(-1.0, 0.0)),
    }
}

/// Trace part of the integrand for every external channel, including the
/// constant prefactors but not the photon line.
fn traces<const N: usize>(alg: &Algebra<N>, diagram: OracleDiagram, k0: f64, p: f64, l: f64, eps: f64, tadpole: &Mat<N>) -> CVec<3> {
    let mut out = CVec([c0(); 3]);
    let s1 = alg.prop(p + k0, eps);
    let s0 = alg.prop(p, eps);
    let single = -I / (2.0 * PI);
    let double = 1.0 / (4.0 * PI * PI);
    match diagram {
        OracleDiagram::Second => {
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = single * trace_of_product(&(*a * s1), &(*b * s0));
            }
        }
        OracleDiagram::Fourth(Diagram::B) => {
            let s2 = alg.prop(p + k0 + l, eps);
            let s3 = alg.prop(p + l, eps);
            let mut sides = [(Mat::zero(), Mat::zero()); 3];
            for (side, (_, a, b)) in sides.iter_mut().zip(&alg.external) {
                *side = (*a * s1, *b * s3);
            }
            for v in &alg.internal {
                let y = *v * s2;
                let z = *v * s0;
                for (i, (as1, bs3)) in sides.iter().take(alg.external.len()).enumerate() {
                    out.0[i] += double * trace_of_product(&(*as1 * y), &(*bs3 * z));
                }
            }
        }
        OracleDiagram::Fourth(Diagram::C) => {
            let q = alg.sandwich(&alg.prop(p + l, eps)) * s0;
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = double * trace_of_product(&(*a * s1 * *b * s0), &q);
            }
        }
        OracleDiagram::Fourth(Diagram::F) => {
            let q = alg.sandwich(&alg.prop(p + k0 + l, eps));
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = double * trace_of_product(&(*a * s1 * q * s1), &(*b * s0));
            }
        }
        OracleDiagram::Fourth(Diagram::D) => {
            let ms0 = alg.counter * s0;
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = single * trace_of_product(&(*a * s1 * *b * s0), &ms0);
            }
        }
        OracleDiagram::Fourth(Diagram::G) => {
            let ms1 = alg.counter * s1;
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = single * trace_of_product(&(*a * s1 * ms1), &(*b * s0));
            }
        }
        OracleDiagram::Fourth(Diagram::E) => {
            let ts0 = *tadpole * s0;
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = single * trace_of_product(&(*a * s1 * *b * s0), &ts0);
            }
        }
        OracleDiagram::Fourth(Diagram::H) => {
            let ts1 = *tadpole * s1;
            for (i, (_, a, b)) in alg.external.iter().enumerate() {
                out.0[i] = single * trace_of_product(&(*a * s1 * ts1), &(*b * s0));
            }
        }
    }
    out
}

/// Tolerances and ε policy of the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    pub eps_sequence: Vec<f64>,
    pub line_rel_tol: f64,
    /// L = cutoff_factor·max(m, |k0|, 1).
    pub cutoff_factor: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            eps_sequence: tolerances::ORACLE_EPS.to_vec(),
            line_rel_tol: tolerances::ORACLE_LINE_REL,
            cutoff_factor: 1e4,
        }
    }
}

/// ε → 0 extrapolated value of one loop integral.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtrapolationResult {
    pub value: C,
    pub eps_sequence: Vec<f64>,
    /// Value at each ε of the sequence.
    pub raw: Vec<C>,
    pub estimated_error: f64,
}

/// Integral of the photon line against g²: W(l0) = ∫ g²(k)/(l0² − k² + iε) dk.
fn photon_weight(ff: &FormFactor, l: f64, eps: f64, tol: &Tolerance) -> Result<C> {
    let s = C::new(l * l, eps);
    let r = s.sqrt();
    let peaks = [Peak { center: r.re, width: r.im.max(1e-300) }];
    let split = 40.0 * ff.scale() + 2.0 * l.abs();
    quadrature::integrate_peaked_semi_infinite(
        |k| C::new(ff.g2(k), 0.0) / (s - k * k),
        0.0,
        split,
        &peaks,
        ff.scale().recip(),
        tol,
    )
    .checked()
}

/// Integral over the real line truncated at ±L with the one-term tail
/// correction L·(f(L) + f(−L)), exact for a 1/x² decay.
fn line_integral<F>(mut f: F, half_length: f64, peaks: &[Peak], fallback: f64, tol: &Tolerance) -> Result<CVec<3>>
where
    F: FnMut(f64) -> CVec<3>,
{
    let body = quadrature::integrate_peaked(&mut f, -half_length, half_length, peaks, fallback, tol).checked()?;
    let tail = (f(half_length) + f(-half_length)) * half_length;
    Ok(body + tail)
}

fn pole_peaks(shifts: &[(f64, f64)], l: f64, m_e: f64, m_g: f64, eps: f64) -> Vec<Peak> {
    let mut peaks = Vec::with_capacity(2 * shifts.len());
    for &(alpha, beta) in shifts {
        for m in [m_e, m_g] {
            peaks.push(Peak { center: m - alpha - beta * l, width: eps });
        }
    }
    peaks
}

/// Values of l0 where poles of opposite half-planes in p0 collide.
fn pinch_peaks(shifts: &[(f64, f64)], m_e: f64, m_g: f64, eps: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    for &(ai, bi) in shifts {
        for &(aj, bj) in shifts {
            if bi == bj {
                continue;
            }
            // Excited pole of factor i meets ground pole of factor j.
            let l = ((m_e - ai) - (m_g - aj)) / (bi - bj);
            peaks.push(Peak { center: l, width: 2.0 * eps / (bi - bj).abs() });
        }
    }
    peaks
}

/// Tadpole self-energy Σ_n v_n·W(0)·(−i∫dq/2π Tr{v_n S(q)}) at finite ε.
fn tadpole_matrix<const N: usize>(alg: &Algebra<N>, ff: &FormFactor, eps: f64, half_length: f64, tol: &Tolerance) -> Result<Mat<N>> {
    let w0 = photon_weight(ff, 0.0, eps, tol)?;
    let peaks = [Peak { center: alg.m_e, width: eps }, Peak { center: alg.m_g, width: eps }];
    let mut total = Mat::zero();
    for v in &alg.internal {
        let loop_val = line_integral(
            |q| {
                let t = trace_of_product(v, &alg.prop(q, eps));
                CVec([t, c0(), c0()])
            },
            half_length,
            &peaks,
            1.0,
            tol,
        )?
        .0[0];
        total = total + v.scale(w0 * (-I / (2.0 * PI)) * loop_val);
    }
    Ok(total)
}

fn evaluate_at_eps<const N: usize>(alg: &Algebra<N>, model: &SystemModel, diagram: OracleDiagram, k0: f64, eps: f64, opts: &OracleOptions) -> Result<CVec<3>> {
    let ff = &model.formfactor;
    let half_length = opts.cutoff_factor * model.m().abs().max(model.m_e.abs()).max(model.m_g.abs()).max(k0.abs()).max(1.0);
    let tol = Tolerance::new(opts.line_rel_tol, 1e-15);
    let shifts = diagram.shifts(k0);
    let tadpole = match diagram {
        OracleDiagram::Fourth(Diagram::E | Diagram::H) => tadpole_matrix(alg, ff, eps, half_length, &tol)?,
        _ => Mat::zero(),
    };
    let inner = |l: f64| -> Result<CVec<3>> {
        let peaks = pole_peaks(&shifts, l, alg.m_e, alg.m_g, eps);
        line_integral(|p| traces(alg, diagram, k0, p, l, eps, &tadpole), half_length, &peaks, 1.0, &tol)
    };
    if !diagram.is_double_loop() {
        return inner(0.0);
    }
    let mut peaks = pinch_peaks(&shifts, alg.m_e, alg.m_g, eps);
    peaks.push(Peak { center: 0.0, width: eps.sqrt() });
    let mut failure = None;
    let outer = line_integral(
        |l| {
            if failure.is_some() {
                return CVec([c0(); 3]);
            }
            match (photon_weight(ff, l, eps, &tol), inner(l)) {
                (Ok(w), Ok(v)) => v * w,
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    CVec([c0(); 3])
                }
            }
        },
        half_length,
        &peaks,
        1.0,
        &tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    outer
}

fn extrapolate(eps: &[f64], values: &[C]) -> (C, f64) {
    let n = eps.len();
    let mut full = c0();
    for i in 0..n {
        let mut w = 1.0;
        for j in 0..n {
            if i != j {
                w *= eps[j] / (eps[j] - eps[i]);
            }
        }
        full += values[i] * w;
    }
    let (ea, eb) = (eps[n - 2], eps[n - 1]);
    let linear = (values[n - 1] * ea - values[n - 2] * eb) / (ea - eb);
    (full, (full - linear).norm())
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(Error::ExtrapolationUnstable(format!("need at least three ε values, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::ExtrapolationUnstable("ε sequence must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn channels_of(model: &SystemModel) -> Vec<Channel> {
    match model.variant {
        Variant::Spin => vec![Channel::Plus, Channel::Minus, Channel::Zero],
        _ => vec![Channel::Scalar],
    }
}

/// Numeric value of a diagram in every channel, extrapolated to ε → 0.
pub fn loop_integral_numeric(model: &SystemModel, diagram: OracleDiagram, k0: f64, masses: &MassCorrections, opts: &OracleOptions) -> Result<Vec<(Channel, ExtrapolationResult)>> {
    check_eps(&opts.eps_sequence)?;
    if let OracleDiagram::Fourth(d) = diagram {
        if !d.applies_to(model.variant) {
            return Err(Error::NotApplicable { diagram: d.label().into(), variant: model.variant.name() });
        }
    }
    let mut raw: Vec<CVec<3>> = Vec::with_capacity(opts.eps_sequence.len());
    for &eps in &opts.eps_sequence {
        let v = match model.variant {
            Variant::Spin => evaluate_at_eps(&spin_algebra(model, masses), model, diagram, k0, eps, opts)?,
            Variant::TwoLevelAtom => evaluate_at_eps(&two_level_algebra(model, masses), model, diagram, k0, eps, opts)?,
            Variant::DipoleAtom => evaluate_at_eps(&dipole_algebra(model, masses), model, diagram, k0, eps, opts)?,
        };
        raw.push(v);
    }
    Ok(channels_of(model)
        .into_iter()
        .enumerate()
        .map(|(i, ch)| {
            let values: Vec<C> = raw.iter().map(|v| v.0[i]).collect();
            let (value, estimated_error) = extrapolate(&opts.eps_sequence, &values);
            (ch, ExtrapolationResult { value, eps_sequence: opts.eps_sequence.clone(), raw: values, estimated_error })
        })
        .collect())
}

/// Collects per-channel extrapolated values into a [`ChannelValue`].
pub fn as_channel_value(results: &[(Channel, ExtrapolationResult)]) -> ChannelValue {
    let get = |c: Channel| results.iter().find(|(ch, _)| *ch == c).map(|(_, r)| r.value).unwrap_or_default();
    if results.iter().any(|(c, _)| *c == Channel::Scalar) {
        ChannelValue::Scalar(get(Channel::Scalar))
    } else {
        ChannelValue::Spin { plus: get(Channel::Plus), minus: get(Channel::Minus), zero: get(Channel::Zero) }
    }
}

/// One integrand of the oracle at fixed internal photon wavenumber k.
#[derive(Clone, Debug)]
pub struct LoopIntegrandSpec {
    pub model: SystemModel,
    pub masses: MassCorrections,
    pub diagram: OracleDiagram,
    pub channel: Channel,
    pub k0: f64,
    pub k: f64,
    pub eps: f64,
    /// 2 for spin and two-level, 4 for the dipole atom.
    pub dim: usize,
}

/// Integrand f(p0, l0): explicit-matrix trace times the photon line
/// g²(k)/(l0² − k² + iε) for double-loop diagrams; l0 is ignored otherwise.
pub fn build_integrand(spec: &LoopIntegrandSpec) -> Result<Box<dyn Fn(f64, f64) -> C + Send + Sync>> {
    if !(spec.eps > 0.0) {
        return Err(Error::InvalidParameter("oracle ε must be strictly positive".into()));
    }
    let expected = if spec.model.variant == Variant::DipoleAtom { 4 } else { 2 };
    if spec.dim != expected {
        return Err(Error::InvalidParameter(format!("{} variant uses {expected}×{expected} matrices, got {}", spec.model.variant, spec.dim)));
    }
    let index = channels_of(&spec.model)
        .iter()
        .position(|c| *c == spec.channel)
        .ok_or_else(|| Error::InvalidParameter(format!("channel {} does not exist for {}", spec.channel, spec.model.variant)))?;
    if let OracleDiagram::Fourth(d) = spec.diagram {
        if !d.applies_to(spec.model.variant) {
            return Err(Error::NotApplicable { diagram: d.label().into(), variant: spec.model.variant.name() });
        }
    }
    let (diagram, k0, eps) = (spec.diagram, spec.k0, spec.eps);
    let photon = if diagram.is_double_loop() { spec.model.formfactor.g2(spec.k) } else { 0.0 };
    let k2 = spec.k * spec.k;
    let line = move |l: f64| if diagram.is_double_loop() { photon / C::new(l * l - k2, eps) } else { C::new(1.0, 0.0) };
    let tol = Tolerance::new(tolerances::ORACLE_LINE_REL, 1e-15);
    let half_length = 1e4 * spec.model.m().max(k0.abs()).max(1.0);
    macro_rules! boxed {
        ($alg:expr) => {{
            let alg = $alg;
            let tadpole = match diagram {
                OracleDiagram::Fourth(Diagram::E | Diagram::H) => tadpole_matrix(&alg, &spec.model.formfactor, eps, half_length, &tol)?,
                _ => Mat::zero(),
            };
            Ok(Box::new(move |p: f64, l: f64| traces(&alg, diagram, k0, p, l, eps, &tadpole).0[index] * line(l)))
        }};
    }
    match spec.model.variant {
        Variant::Spin => boxed!(spin_algebra(&spec.model, &spec.masses)),
        Variant::TwoLevelAtom => boxed!(two_level_algebra(&spec.model, &spec.masses)),
        Variant::DipoleAtom => boxed!(dipole_algebra(&spec.model, &spec.masses)),
    }
}

/// Sign convention for the imaginary part fed to the Hilbert transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignRule {
    /// Im multiplied by sgn(ω): the linear-response function.
    Retarded,
    /// Time-ordered function as is; the negative control.
    Feynman,
}

fn response_value(model: &SystemModel, order: Order, omega: f64, quad: &QuadratureSpec, rule: SignRule) -> Result<C> {
    let t = transition_matrix(model, order, C::new(omega, 0.0), quad)?;
    let v = match t {
        ChannelValue::Spin { plus, .. } => plus,
        ChannelValue::Scalar(v) => -model.dipole_response_constant_a * v,
    };
    Ok(match rule {
        SignRule::Retarded => retarded(v, omega),
        SignRule::Feynman => v,
    })
}

/// Large-ω power of Im of the response for the formfactor family.
fn tail_power(model: &SystemModel) -> Option<i32> {
    let g2 = match model.formfactor.family {
        FormFactorFamily::HydrogenSpin => 4,
        FormFactorFamily::HydrogenDipole => 8,
        FormFactorFamily::Tabulated => return None,
    };
    let propagator = if model.variant == Variant::Spin { 2 } else { 4 };
    Some(g2 + 1 + propagator)
}

/// Shifted resonance position and width at ω = m_e − m_g.
fn resonance(model: &SystemModel, order: Order, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let d = model.delta_m();
    let dw = shift_width(model, d, quad)?;
    let b = match order {
        Order::Second => 0.0,
        Order::SecondPlusFourth => coefficients_b_delta(model, quad)?.b,
    };
    Ok((d - (1.0 - b) * dw.delta, (1.0 - b) * dw.gamma))
}

/// Symmetric grid of `n` points (n odd) on [−W, W], with about 60% of the
/// points Lorentzian-distributed around the shifted resonances.
pub fn kramers_kronig_grid(model: &SystemModel, order: Order, n: usize, half_width: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    if n < 5 || n % 2 == 0 {
        return Err(Error::InvalidParameter(format!("grid size must be odd and >= 5, got {n}")));
    }
    let (center, width) = resonance(model, order, quad)?;
    let w = width.max(1e-6 * half_width);
    let a0 = (-center / w).atan();
    let a1 = ((half_width - center) / w).atan();
    let cdf = |x: f64| 0.4 * x / half_width + 0.6 * (((x - center) / w).atan() - a0) / (a1 - a0);
    let half = (n - 1) / 2;
    let mut positive = Vec::with_capacity(half);
    for j in 1..=half {
        let target = j as f64 / half as f64;
        let (mut lo, mut hi) = (0.0, half_width);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        positive.push(if j == half { half_width } else { 0.5 * (lo + hi) });
    }
    let mut grid: Vec<f64> = positive.iter().rev().map(|x| -x).collect();
    grid.push(0.0);
    grid.extend(positive);
    Ok(grid)
}

/// Diagnostics of one Kramers-Kronig reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KramersKronigReport {
    /// max |Re_rec − Re| / max |Re| over interior grid points.
    pub residual: f64,
    /// Local grid spacing at the resonance divided by its half-width.
    pub resolution: f64,
}

/// ∫₀¹ t^(p−1)/(1 − a t) dt for |a| < 1.
fn tail_moment(p: i32, a: f64) -> f64 {
    let tol = Tolerance::new(1e-10, 1e-300);
    quadrature::integrate_real(|t| t.powi(p - 1) / (1.0 - a * t), 0.0, 1.0, &[], &tol).value.re
}

pub fn kramers_kronig_check_with(model: &SystemModel, order: Order, grid: &[f64], quad: &QuadratureSpec, rule: SignRule) -> Result<KramersKronigReport> {
    let n = grid.len();
    if n < 5 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing with at least 5 points".into()));
    }
    let span = grid[n - 1].max(-grid[0]);
    if (grid[0] + grid[n - 1]).abs() > 1e-12 * span {
        return Err(Error::InvalidParameter("grid must be symmetric about 0".into()));
    }
    let (center, width) = resonance(model, order, quad)?;
    if !(width > 0.0) {
        return Err(Error::GridTooCoarse("response has no width: poles sit on the real axis".into()));
    }
    let idx = grid.iter().position(|&x| x >= center).unwrap_or(n - 1).clamp(1, n - 2);
    let spacing = 0.5 * (grid[idx + 1] - grid[idx - 1]);
    let resolution = spacing / width;
    if resolution > 0.5 {
        return Err(Error::GridTooCoarse(format!("spacing {spacing:e} at the resonance exceeds half the width {width:e}")));
    }

    let values: Vec<C> = grid.iter().map(|&w| response_value(model, order, w, quad, rule)).collect::<Result<_>>()?;
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    if im.iter().all(|v| *v == 0.0) || im.iter().any(|v| !v.is_finite()) {
        return Err(Error::GridTooCoarse("imaginary part vanishes or is not finite on the grid".into()));
    }

    let half_width = grid[n - 1];
    let power = tail_power(model);
    let mut recon = vec![0.0; n];
    let mut logs = vec![0.0; n];
    for i in 1..n - 1 {
        let w = grid[i];
        for (j, x) in grid.iter().enumerate() {
            let u = x - w;
            logs[j] = if u == 0.0 { f64::NAN } else { u.abs().ln() };
        }
        let mut sum = 0.0;
        for j in 0..n - 1 {
            let (x0, x1) = (grid[j], grid[j + 1]);
            let slope = (im[j + 1] - im[j]) / (x1 - x0);
            let c = im[j] + slope * (w - x0);
            let mut seg = slope * (x1 - x0);
            if !logs[j + 1].is_nan() {
                seg += c * logs[j + 1];
            }
            if !logs[j].is_nan() {
                seg -= c * logs[j];
            }
            sum += seg;
        }
        if let Some(p) = power {
            let a = w / half_width;
            sum += im[n - 1] * tail_moment(p, a) - im[0] * tail_moment(p, -a);
        }
        recon[i] = sum / PI;
    }

    let scale = values[1..n - 1].iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    let worst = (1..n - 1).fold(0.0f64, |m, i| m.max((recon[i] - values[i].re).abs()));
    Ok(KramersKronigReport { residual: worst / scale, resolution })
}

/// Maximum normalized residual of the Kramers-Kronig reconstruction of the
/// retarded response.
pub fn kramers_kronig_check(model: &SystemModel, order: Order, grid: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    kramers_kronig_check_with(model, order, grid, quad, SignRule::Retarded).map(|r| r.residual)
}

#[cfg(test)]
mod tests {
    use super::pauli::*;
    use super::*;

    fn close<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> bool {
        (*a - *b).max_abs() < 1e-15
    }

    #[test]
    fn pauli_algebra() {
        let two = C::new(2.0, 0.0);
        assert!(close(&(sigma_plus() * sigma_plus()), &M2::zero()));
        assert!(close(&(sigma_minus() * sigma_minus()), &M2::zero()));
        assert!(close(&(sigma_plus() * sigma_minus()), &p_e().scale(two)));
        let sum = [sigma_x(), sigma_y(), sigma_z()].iter().fold(M2::zero(), |acc, s| acc + *s * p_e() * *s);
        assert!(close(&sum, &(p_e() + p_g().scale(two))));
    }

    #[test]
    fn dipole_algebra_identities() {
        use super::dipole::*;
        let three = C::new(3.0, 0.0);
        let taus = [tau(0), tau(1), tau(2)];
        let tt = taus.iter().fold(M4::zero(), |acc, t| acc + *t * *t);
        assert!(close(&tt, &(p_e() + p_g().scale(three))));
        let tpt = taus.iter().fold(M4::zero(), |acc, t| acc + *t * p_e() * *t);
        assert!(close(&tpt, &p_g().scale(three)));
        assert!((tpt.trace() - three).norm() < 1e-15);
    }

    #[test]
    fn atom_vertices_have_no_tadpole() {
        use super::dipole::*;
        let s = |p: f64| {
            let a = C::new(p - 1.0, 0.01).inv();
            let b = C::new(p + 1.0, -0.01).inv();
            (pauli::p_e().scale(a) + pauli::p_g().scale(b), p_e().scale(a) + p_g().scale(b))
        };
        for p in [-3.0, 0.2, 0.9] {
            let (s2, s4) = s(p);
            assert_eq!(trace_of_product(&sigma_x(), &s2), c0());
            for i in 0..3 {
                assert_eq!(trace_of_product(&tau(i), &s4), c0());
            }
        }
    }

    #[test]
    fn neville_is_exact_for_quadratics() {
        let eps = [0.4, 0.2, 0.1];
        let vals: Vec<C> = eps.iter().map(|e| C::new(1.0 + 2.0 * e - 3.0 * e * e, 0.5 * e)).collect();
        let (v, _) = extrapolate(&eps, &vals);
        assert!((v - C::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eps_sequence_validation() {
        assert!(matches!(check_eps(&[1e-2, 1e-2, 5e-3]), Err(Error::ExtrapolationUnstable(_))));
        assert!(matches!(check_eps(&[1e-2, 5e-3]), Err(Error::ExtrapolationUnstable(_))));
        assert!(check_eps(&[1e-2, 5e-3, 2.5e-3]).is_ok());
    }
}
