//! Adaptive Gauss-Kronrod quadrature for complex-valued integrands.
//!
//! The core rule is the 10-point Gauss / 21-point Kronrod pair with the
//! QUADPACK error rescaling. On top of it sit a globally adaptive driver
//! with user breakpoints, a semi-infinite driver (tail mapped by k = K/t),
//! and a driver for integrands with narrow Lorentzian peaks at known
//! locations, which maps each peak with x = c + w·tan θ.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values the integrators can accumulate: complex scalars and fixed-size
/// complex vectors.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign {
    fn zero() -> Self;
    /// Largest component modulus.
    fn norm(&self) -> f64;
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

/// Fixed-size complex vector for integrating several channels at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec<const N: usize>(pub [Complex64; N]);

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const N: usize> Mul<f64> for CVec<N> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for v in self.0.iter_mut() {
            *v *= s;
        }
        self
    }
}

impl<const N: usize> Mul<Complex64> for CVec<N> {
    type Output = Self;
    fn mul(mut self, s: Complex64) -> Self {
        for v in self.0.iter_mut() {
            *v *= s;
        }
        self
    }
}

impl<const N: usize> AddAssign for CVec<N> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
    }
}

impl<const N: usize> QuadValue for CVec<N> {
    fn zero() -> Self {
        CVec([Complex64::new(0.0, 0.0); N])
    }
    fn norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Error targets for an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs, max_intervals: 2000 }
    }

    fn target<V: QuadValue>(&self, value: V) -> f64 {
        self.abs.max(self.rel * value.norm())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-10, 1e-14)
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult<V = Complex64> {
    pub value: V,
    pub abs_err: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl<V: QuadValue> QuadResult<V> {
    fn zero() -> Self {
        QuadResult { value: V::zero(), abs_err: 0.0, converged: true, evaluations: 0 }
    }

    /// Converts a non-converged result into a quadrature error.
    pub fn checked(self) -> Result<V> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature { value: self.value.norm(), abs_err: self.abs_err })
        }
    }
}

impl QuadResult<Complex64> {
    /// Real part of a converged result.
    pub fn checked_re(self) -> Result<f64> {
        self.checked().map(|v| v.re)
    }
}

/// One application of the 21-point Kronrod rule on [a, b].
/// Returns (integral, error estimate, |f| integral).
pub fn gk21<V, F>(f: &mut F, a: f64, b: f64) -> (V, f64, f64)
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = V::zero();
    let mut res_abs = fc.norm() * WGK[10];
    let mut fv1 = [V::zero(); 10];
    let mut fv2 = [V::zero(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += (f1 + f2) * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            res_g += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let scale = half.abs();
    let integral = res_k * half;
    res_abs *= scale;
    res_asc *= scale;
    let mut err = (res_k - res_g).norm() * scale;
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (integral, err, res_abs)
}

/// Change of variables applied to one piece of the integration range.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Map {
    Linear,
    /// x = c + w·tan θ.
    Tan { c: f64, w: f64 },
    /// x = s/t, t ∈ (0, 1].
    Inverse { s: f64 },
    /// x = c + dir·e^t.
    Exp { c: f64, dir: f64 },
}

impl Map {
    #[inline]
    fn apply<V: QuadValue, F: FnMut(f64) -> V>(self, f: &mut F, t: f64) -> V {
        match self {
            Map::Linear => f(t),
            Map::Tan { c, w } => {
                let (s, co) = t.sin_cos();
                f(c + w * s / co) * (w / (co * co))
            }
            Map::Inverse { s } => {
                if t == 0.0 {
                    V::zero()
                } else {
                    f(s / t) * (s / (t * t))
                }
            }
            Map::Exp { c, dir } => {
                let r = t.exp();
                f(c + dir * r) * r
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    a: f64,
    b: f64,
    map: Map,
}

struct Interval<V> {
    piece: Piece,
    value: V,
    err: f64,
}

impl<V> PartialEq for Interval<V> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl<V> Eq for Interval<V> {}

impl<V> PartialOrd for Interval<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V> Ord for Interval<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive driver over a set of mapped pieces: the interval with
/// the largest error estimate is bisected until the summed error meets the
/// tolerance on the summed value.
fn adaptive<V, F>(f: &mut F, pieces: &[Piece], tol: &Tolerance) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let mut heap = BinaryHeap::new();
    let mut total = V::zero();
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for &piece in pieces.iter().filter(|p| p.b > p.a) {
        let (value, err, _) = gk21(&mut |t| piece.map.apply(f, t), piece.a, piece.b);
        evaluations += 21;
        total += value;
        total_err += err;
        heap.push(Interval { piece, value, err });
    }

    let mut converged = total_err <= tol.target(total);
    while !converged && heap.len() < tol.max_intervals {
        let worst = match heap.pop() {
            Some(iv) => iv,
            None => break,
        };
        let Piece { a, b, map } = worst.piece;
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || (b - a) < 8.0 * f64::EPSILON * a.abs().max(b.abs()) {
            // Interval cannot be split further; keep it and stop refining.
            heap.push(worst);
            break;
        }
        let left = Piece { a, b: mid, map };
        let right = Piece { a: mid, b, map };
        let (v1, e1, _) = gk21(&mut |t| map.apply(f, t), a, mid);
        let (v2, e2, _) = gk21(&mut |t| map.apply(f, t), mid, b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval { piece: left, value: v1, err: e1 });
        heap.push(Interval { piece: right, value: v2, err: e2 });
        converged = total_err <= tol.target(total);
    }

    let mut value = V::zero();
    let mut abs_err = 0.0;
    for iv in heap.iter() {
        value += iv.value;
        abs_err += iv.err;
    }
    QuadResult { value, abs_err, converged: abs_err <= tol.target(value), evaluations }
}

fn linear_pieces(lo: f64, hi: f64, breakpoints: &[f64], out: &mut Vec<Piece>) {
    let mut interior: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    let mut prev = lo;
    for x in interior.into_iter().chain(std::iter::once(hi)) {
        out.push(Piece { a: prev, b: x, map: Map::Linear });
        prev = x;
    }
}

fn signed<V: QuadValue>(mut r: QuadResult<V>, sign: f64) -> QuadResult<V> {
    r.value = r.value * sign;
    r
}

/// Globally adaptive integration over [a, b] with optional interior breakpoints.
pub fn integrate<V, F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: &Tolerance) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    if a == b {
        return QuadResult::zero();
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pieces = Vec::new();
    linear_pieces(lo, hi, breakpoints, &mut pieces);
    signed(adaptive(&mut f, &pieces, tol), sign)
}

/// Integral of f over [a, ∞): [a, split] as is plus the tail mapped to
/// t ∈ (0, 1] by x = split/t, refined jointly.
pub fn integrate_semi_infinite<V, F>(mut f: F, a: f64, split: f64, breakpoints: &[f64], tol: &Tolerance) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let split = split.max(a + 1.0);
    let mut pieces = Vec::new();
    linear_pieces(a, split, breakpoints, &mut pieces);
    pieces.push(Piece { a: 0.0, b: 1.0, map: Map::Inverse { s: split } });
    adaptive(&mut f, &pieces, tol)
}

/// A narrow feature of an integrand: Lorentzian-like structure at `center`
/// with half-width `width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
}

fn merge_peaks(a: f64, b: f64, peaks: &[Peak]) -> Vec<Peak> {
    let mut inside: Vec<Peak> = peaks
        .iter()
        .copied()
        .filter(|p| p.width > 0.0 && p.center.is_finite() && p.center >= a && p.center <= b)
        .collect();
    inside.sort_by(|p, q| p.center.total_cmp(&q.center));
    let mut merged: Vec<Peak> = Vec::with_capacity(inside.len());
    for p in inside {
        if let Some(last) = merged.last_mut() {
            if p.center - last.center < 0.5 * (p.width + last.width) {
                last.width = last.width.max(p.width);
                continue;
            }
        }
        merged.push(p);
    }
    merged
}

/// Half-widths around a peak covered by the tan map.
const PEAK_CORE: f64 = 10.0;

/// Integral over [a, b] of an integrand with narrow peaks at known places.
///
/// The interval is split at midpoints between peaks. Around each peak the
/// core |x − c| < 10·w is integrated in θ with x = c + w·tan θ, which
/// flattens a Lorentzian of half-width w at c; the flanks are integrated in
/// ln|x − c|. Without peaks in range a single map centred at the interval
/// midpoint with width `fallback_width` is used.
pub fn integrate_peaked<V, F>(mut f: F, a: f64, b: f64, peaks: &[Peak], fallback_width: f64, tol: &Tolerance) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    if a == b {
        return QuadResult::zero();
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pieces = Vec::new();
    peaked_pieces(lo, hi, peaks, fallback_width, &mut pieces);
    signed(adaptive(&mut f, &pieces, tol), sign)
}

fn peaked_pieces(a: f64, b: f64, peaks: &[Peak], fallback_width: f64, out: &mut Vec<Piece>) {
    let mut merged = merge_peaks(a, b, peaks);
    if merged.is_empty() {
        merged.push(Peak { center: 0.5 * (a + b), width: fallback_width });
    }
    let mut edges = Vec::with_capacity(merged.len() + 1);
    edges.push(a);
    for w in merged.windows(2) {
        edges.push(0.5 * (w[0].center + w[1].center));
    }
    edges.push(b);
    for (i, p) in merged.iter().enumerate() {
        let (c, w) = (p.center, p.width);
        let (e0, e1) = (edges[i], edges[i + 1]);
        let lo = e0.max(c - PEAK_CORE * w);
        let hi = e1.min(c + PEAK_CORE * w);
        if hi > lo {
            let map = Map::Tan { c, w };
            let t0 = ((lo - c) / w).atan();
            let t1 = ((hi - c) / w).atan();
            if t0 < 0.0 && t1 > 0.0 {
                out.push(Piece { a: t0, b: 0.0, map });
                out.push(Piece { a: 0.0, b: t1, map });
            } else {
                out.push(Piece { a: t0, b: t1, map });
            }
        }
        // Flanks in log-distance from the peak, where a 1/(x − c) tail is flat.
        if lo > e0 {
            let (near, far) = ((c - lo.min(e1)).max(w * PEAK_CORE), c - e0);
            if far > near {
                out.push(Piece { a: near.ln(), b: far.ln(), map: Map::Exp { c, dir: -1.0 } });
            } else {
                linear_pieces(e0, lo.min(e1), &[], out);
            }
        }
        if hi < e1 {
            let (near, far) = ((hi.max(e0) - c).max(w * PEAK_CORE), e1 - c);
            if far > near {
                out.push(Piece { a: near.ln(), b: far.ln(), map: Map::Exp { c, dir: 1.0 } });
            } else {
                linear_pieces(hi.max(e0), e1, &[], out);
            }
        }
    }
}

/// Integral over [a, ∞) of a peaked integrand; see [`integrate_peaked`].
pub fn integrate_peaked_semi_infinite<V, F>(mut f: F, a: f64, split: f64, peaks: &[Peak], fallback_width: f64, tol: &Tolerance) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let split = split.max(a + 1.0);
    let mut pieces = Vec::new();
    peaked_pieces(a, split, peaks, fallback_width, &mut pieces);
    pieces.push(Piece { a: 0.0, b: 1.0, map: Map::Inverse { s: split } });
    adaptive(&mut f, &pieces, tol)
}

/// Real-valued convenience wrapper around [`integrate_semi_infinite`].
pub fn integrate_real_semi_infinite<F>(mut f: F, a: f64, split: f64, breakpoints: &[f64], tol: &Tolerance) -> QuadResult<Complex64>
where
    F: FnMut(f64) -> f64,
{
    integrate_semi_infinite(|x| Complex64::new(f(x), 0.0), a, split, breakpoints, tol)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: &Tolerance) -> QuadResult<Complex64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, tol)
}
