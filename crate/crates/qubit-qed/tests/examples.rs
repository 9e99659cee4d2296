//! Worked values and identities for the public operations.

use std::f64::consts::PI;

use num_complex::Complex64;
use qubit_qed::dispersion::{h_closed_hydrogen, h_function, h_small_xi, pv_integral_with, shift_width, QuadratureSpec};
use qubit_qed::error::Error;
use qubit_qed::model::{make_model, FormFactor, Masses, SystemModel, Variant};
use qubit_qed::oracle::{self, build_integrand, kramers_kronig_check, LoopIntegrandSpec, OracleDiagram, OracleOptions};
use qubit_qed::propagator::{dyson_resum, dyson_truncate, electron_propagator, photon_line, photon_line_partial_fractions, ProjectorValue};
use qubit_qed::response::{
    crossing_residual, locate_poles, polarizability, polarizability_resonant_decomposition, scattering_amplitude, scattering_simple_fractions, susceptibility,
    transition_matrix, Order,
};
use qubit_qed::selfenergy::{
    coefficients_b_delta, electron_self_energy_2, fourth_order_diagram, mass_correction, photon_self_energy_2, photon_self_energy_24, tadpole_mass, Channel, Diagram,
};

type C = Complex64;

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn spin(mu: f64) -> SystemModel {
    make_model(Variant::Spin, Masses::Symmetric(1.0), FormFactor::hydrogen_spin(mu, 1.0).unwrap(), None).unwrap()
}

fn two_level(d: f64) -> SystemModel {
    make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), FormFactor::hydrogen_dipole(d, 1.0).unwrap(), None).unwrap()
}

fn hydrogen_two_level() -> SystemModel {
    make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), FormFactor::hydrogen_dipole_from_charge(1.0, 1.0).unwrap(), None).unwrap()
}

fn dipole(d: f64) -> SystemModel {
    make_model(Variant::DipoleAtom, Masses::Levels { m_e: 1.0, m_g: -0.5 }, FormFactor::hydrogen_dipole(d, 1.0).unwrap(), None).unwrap()
}

/// Composite Simpson on k = t/(1 − t), independent of the library quadrature.
fn simpson_half_line(f: impl Fn(f64) -> f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let g = |t: f64| if t <= 0.0 || t >= 1.0 { 0.0 } else { f(t / (1.0 - t)) / ((1.0 - t) * (1.0 - t)) };
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn model_stores_default_response_constant() {
    let m = two_level(0.6);
    assert!((m.dipole_response_constant_a - 0.6 * 0.6 / 3.0).abs() < 1e-15);
    let m = make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), FormFactor::hydrogen_dipole(0.6, 1.0).unwrap(), Some(2.5)).unwrap();
    assert_eq!(m.dipole_response_constant_a, 2.5);
}

#[test]
fn propagator_pole_is_an_error() {
    assert!(matches!(electron_propagator(&spin(1.0), re(1.0), 0.0), Err(Error::Pole(_))));
    assert!(matches!(photon_line(1.0, re(1.0), 0.0), Err(Error::Pole(_))));
}

#[test]
fn photon_partial_fractions_near_axis() {
    let a = photon_line(1.0, re(0.5), 1e-8).unwrap().value;
    let b = photon_line_partial_fractions(1.0, re(0.5), 1e-8).unwrap().value;
    assert!((a - b).norm() <= 1e-6);
}

#[test]
fn dyson_scalar_and_zero_self_energy() {
    let free = ProjectorValue::new(re(1.0 / (0.3 - 1.0)), re(1.0 / (0.3 + 1.0)), 1);
    assert_eq!(dyson_resum(free, ProjectorValue::zero(1)).unwrap(), free);
    let s = C::new(0.2, -0.05);
    let g = dyson_resum(free, ProjectorValue::new(s, re(0.0), 1)).unwrap();
    assert!((g.c_e - 1.0 / (re(0.3 - 1.0) - s)).norm() < 1e-15);
}

#[test]
fn truncated_series_blows_up_near_the_pole() {
    let model = spin(1.0);
    let masses = mass_correction(&model, &q()).unwrap();
    let s = electron_self_energy_2(&model, re(0.0), &masses, &q()).unwrap().c_e;
    let p0 = model.m_e + 0.01 * s.norm();
    let free = electron_propagator(&model, re(p0), 0.0).unwrap();
    let sigma = ProjectorValue::new(s, re(0.0), 1);
    let truncated = dyson_truncate(free, sigma, 6);
    let resummed = dyson_resum(free, sigma).unwrap();
    assert!(truncated.c_e.norm() > 1e6 * resummed.c_e.norm());
    assert!(resummed.c_e.norm().is_finite());
}

#[test]
fn h_values() {
    let ff = FormFactor::hydrogen_spin(1.0, 1.0).unwrap();
    assert_eq!(h_function(&ff, 0.0, &q()).unwrap().im, 0.0);
    let closed = h_closed_hydrogen(1.0, 1.0, 0.2);
    assert!((h_function(&ff, 0.2, &q()).unwrap() - closed).norm() <= 1e-8 * closed.norm());
    assert!((h_closed_hydrogen(2.0, 1.5, 0.0).re - 4.0 / (12.0 * PI * 1.5f64.powi(3))).abs() < 1e-15);
    for j in 1..=20 {
        let k0 = 0.09 * j as f64;
        let xi = k0 / 2.0;
        let im = k0.powi(3) / (6.0 * PI * (1.0 + xi * xi).powi(4));
        assert!((h_closed_hydrogen(1.0, 1.0, k0).im - im).abs() <= 1e-14 * im, "k0 = {k0}");
    }
}

#[test]
fn small_xi_expansion() {
    assert_eq!(h_small_xi(1.0, 1.0, 0.0), re(1.0 / (12.0 * PI)));
    assert_eq!(h_small_xi(0.0, 1.0, 0.3), re(0.0));
    let dev = |xi: f64| {
        let k0 = 2.0 * xi;
        let exact = h_closed_hydrogen(1.0, 1.0, k0);
        (h_small_xi(1.0, 1.0, k0) - exact).norm() / exact.norm()
    };
    let ratio = dev(0.02) / dev(0.01);
    assert!((ratio - 4.0).abs() < 0.5, "deviation ratio {ratio}");
}

#[test]
fn shift_and_width_conventions() {
    let s = spin(1.0);
    let t = hydrogen_two_level();
    assert_eq!(shift_width(&s, 0.0, &q()).unwrap().gamma, 0.0);
    assert_eq!(shift_width(&t, 0.0, &q()).unwrap().gamma, 0.0);
    for j in 0..20 {
        let w = 0.1 + 0.37 * j as f64;
        let dw = shift_width(&s, w, &q()).unwrap();
        let h = h_function(&s.formfactor, w, &q()).unwrap();
        assert!((C::new(dw.delta, dw.gamma) - 2.0 * h).norm() <= 1e-10 * h.norm());
        let da = shift_width(&t, w, &q()).unwrap();
        let expected = PI * t.formfactor.g2(w) / (2.0 * w);
        assert!((da.gamma - expected).abs() <= 1e-14 * expected);
        assert!(dw.gamma >= 0.0 && da.gamma >= 0.0);
        assert!(shift_width(&t, -w, &q()).unwrap().gamma >= 0.0);
    }
}

#[test]
fn principal_value_against_closed_form() {
    let ff = FormFactor::hydrogen_spin(1.0, 1.0).unwrap();
    let g2 = |k: f64| ff.g2(k);
    let pv = pv_integral_with(&ff, g2, 0.2, &q()).unwrap();
    let closed = h_closed_hydrogen(1.0, 1.0, 0.2).re;
    assert!((pv - closed).abs() <= 1e-8 * closed.abs(), "{pv} vs {closed}");
    let at_zero = pv_integral_with(&ff, g2, 0.0, &q()).unwrap();
    let plain = simpson_half_line(|k| if k == 0.0 { 0.0 } else { ff.g2(k) / (k * k) });
    assert!((at_zero - plain).abs() <= 1e-8 * plain);
}

#[test]
fn mass_corrections() {
    let s = spin(1.0);
    let mc = mass_correction(&s, &q()).unwrap();
    assert_eq!(mc.delta_m_e, -mc.delta_m_g);
    let m = s.m();
    let independent = simpson_half_line(|k| if k == 0.0 { 0.0 } else { s.formfactor.g2(k) * (3.0 * k + 2.0 * m) / (2.0 * k * k * (k + 2.0 * m)) });
    assert!((mc.delta_m_e - independent).abs() <= 1e-9 * independent);

    let d = mass_correction(&dipole(0.4), &q()).unwrap();
    assert!(d.delta_m_e > 0.0 && d.delta_m_g < 0.0);

    let zero = mass_correction(&spin(0.0), &q()).unwrap();
    assert_eq!((zero.delta_m_e, zero.delta_m_g, zero.m_t), (0.0, 0.0, 0.0));
    assert_eq!(mass_correction(&two_level(0.0), &q()).unwrap().delta_m_e, 0.0);
}

#[test]
fn tadpole_scaling() {
    assert_eq!(tadpole_mass(&FormFactor::hydrogen_spin(0.0, 1.0).unwrap(), &q()).unwrap(), 0.0);
    let one = tadpole_mass(&FormFactor::hydrogen_spin(1.0, 1.0).unwrap(), &q()).unwrap();
    let three = tadpole_mass(&FormFactor::hydrogen_spin(3.0, 1.0).unwrap(), &q()).unwrap();
    assert!((three - 9.0 * one).abs() <= 1e-13 * three);
}

#[test]
fn self_energy_vanishes_without_coupling() {
    for model in [spin(0.0), two_level(0.0)] {
        let mc = mass_correction(&model, &q()).unwrap();
        let s = electron_self_energy_2(&model, C::new(0.3, 0.1), &mc, &q()).unwrap();
        assert_eq!((s.c_e, s.c_g), (re(0.0), re(0.0)));
    }
}

#[test]
fn coefficients() {
    let zero = coefficients_b_delta(&spin(0.0), &q()).unwrap();
    assert_eq!((zero.b, zero.delta), (0.0, 0.0));
    let s = spin(1.0);
    let co = coefficients_b_delta(&s, &q()).unwrap();
    let mt = tadpole_mass(&s.formfactor, &q()).unwrap();
    assert!((co.delta * 2.0 * (1.0 - co.b) - mt).abs() <= 1e-14 * mt);
    let co3 = coefficients_b_delta(&spin(3.0), &q()).unwrap();
    assert!((co3.b - 9.0 * co.b).abs() <= 1e-12 * co3.b);
    let t1 = coefficients_b_delta(&two_level(0.5), &q()).unwrap().b;
    let t2 = coefficients_b_delta(&two_level(1.0), &q()).unwrap().b;
    assert!((t2 - 4.0 * t1).abs() <= 1e-12 * t2);
}

#[test]
fn resummed_spin_expands_to_lowest_correction() {
    let s = spin(0.3);
    let co = coefficients_b_delta(&s, &q()).unwrap();
    for k0 in [-0.8, 0.1, 0.9] {
        let p = photon_self_energy_24(&s, k0, &q()).unwrap();
        for (ch, sign) in [(Channel::Plus, 1.0), (Channel::Minus, -1.0)] {
            let den = 2.0 - sign * k0;
            let expanded = -2.0 * (1.0 - co.b) * (1.0 / den + co.delta / (den * den));
            let exact = p.get(ch).unwrap().re;
            let second = co.delta * co.delta / den.powi(3);
            assert!((exact - expanded).abs() <= 4.0 * second, "{ch} k0={k0}");
        }
    }
}

#[test]
fn two_level_fourth_order_counterterm_matches_oracle() {
    let model = hydrogen_two_level();
    let mc = mass_correction(&model, &q()).unwrap();
    let closed = fourth_order_diagram(&model, 0.5, Diagram::D, &mc, &q()).unwrap().scalar().unwrap();
    let numeric = oracle::loop_integral_numeric(&model, OracleDiagram::Fourth(Diagram::D), 0.5, &mc, &OracleOptions::default()).unwrap();
    let v = numeric[0].1.value;
    assert!((v - closed).norm() <= 1e-4 * closed.norm(), "{v} vs {closed}");
}

#[test]
fn transition_matrix_values() {
    let free = transition_matrix(&spin(0.0), Order::Second, re(0.7), &q()).unwrap();
    assert!((free.get(Channel::Plus).unwrap() - re(-2.0 / (2.0 - 0.7))).norm() < 1e-15);
    assert!((free.get(Channel::Minus).unwrap() - re(-2.0 / (2.0 + 0.7))).norm() < 1e-15);
    let t = transition_matrix(&spin(1.0), Order::Second, re(0.7), &q()).unwrap();
    assert_eq!(t.get(Channel::Zero).unwrap(), re(0.0));
    let model = hydrogen_two_level();
    let h0 = h_function(&model.formfactor, 0.0, &q()).unwrap();
    let t0 = transition_matrix(&model, Order::Second, re(0.0), &q()).unwrap().scalar().unwrap();
    assert!((t0 - (-1.0 / (1.0 - h0))).norm() <= 1e-14);
}

#[test]
fn spin_scattering_resonance() {
    let model = spin(1.0);
    let zero = scattering_amplitude(&model, Order::Second, 1.3, &q()).unwrap().get(Channel::Zero).unwrap();
    assert_eq!(zero, re(0.0));
    let dw = shift_width(&model, 2.0, &q()).unwrap();
    let n = 4000;
    let grid: Vec<f64> = (1..n).map(|i| 4.0 * i as f64 / n as f64).collect();
    let plus: Vec<f64> = grid.iter().map(|&w| scattering_amplitude(&model, Order::Second, w, &q()).unwrap().get(Channel::Plus).unwrap().norm()).collect();
    let tminus: Vec<f64> = grid.iter().map(|&w| transition_matrix(&model, Order::Second, re(w), &q()).unwrap().get(Channel::Minus).unwrap().norm()).collect();
    let minus_max = grid.iter().map(|&w| scattering_amplitude(&model, Order::Second, w, &q()).unwrap().get(Channel::Minus).unwrap().norm()).fold(0.0, f64::max);
    let (imax, pmax) = plus.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    assert!((grid[imax] - (2.0 + dw.delta)).abs() <= dw.gamma, "peak at {} vs {}", grid[imax], 2.0 + dw.delta);
    assert!(tminus.windows(2).all(|w| w[1] < w[0]), "|T_-| is not monotone on (0, 4m)");
    assert!(minus_max < 0.1 * pmax);
}

/// Largest relative deviation of the simple-fraction forms from the full
/// expressions over ω ∈ [1.8m, 2.2m], divided by |ĥ(2m)|/(2m).
fn decomposition_deviation(model: &SystemModel) -> (f64, f64) {
    let h2 = h_function(&model.formfactor, 2.0, &q()).unwrap();
    let (mut scattering, mut polarizability_dev) = (0.0f64, 0.0f64);
    for i in 0..=40 {
        let w = 1.8 + 0.01 * i as f64;
        let sf = scattering_simple_fractions(model, w, &q()).unwrap();
        let f = scattering_amplitude(model, Order::Second, w, &q()).unwrap().scalar().unwrap();
        scattering = scattering.max((sf.resonant + sf.nonresonant - f).norm() / f.norm());
        let dec = polarizability_resonant_decomposition(model, w, &q()).unwrap();
        let full = polarizability(model, Order::Second, w, &q()).unwrap();
        polarizability_dev = polarizability_dev.max((dec.sum() - full).norm() / full.norm()).max((dec.approx_sum() - full).norm() / full.norm());
    }
    let scale = h2.norm() / 2.0;
    (scattering / scale, polarizability_dev / scale)
}

#[test]
fn simple_fractions_deviate_at_first_order() {
    let strong = hydrogen_two_level();
    let weak = strong.with_formfactor(strong.formfactor.with_coupling(strong.formfactor.coupling * 0.1f64.sqrt()));
    let (s1, p1) = decomposition_deviation(&strong);
    let (s2, p2) = decomposition_deviation(&weak);
    assert!(s1 <= 2.0 && p1 <= 2.0, "{s1} {p1}");
    // Relative to |ĥ|/(2m) the deviation stays O(1) as g² shrinks tenfold.
    assert!((s2 / s1 - 1.0).abs() < 0.1 && (p2 / p1 - 1.0).abs() < 0.1, "{s1} {s2} {p1} {p2}");
}

#[test]
fn two_level_simple_fractions() {
    let model = hydrogen_two_level();
    let sf = scattering_simple_fractions(&model, 2.0, &q()).unwrap();
    let dw = shift_width(&model, 2.0, &q()).unwrap();
    assert!((sf.den_resonant.norm() - C::new(dw.delta, dw.gamma).norm()).abs() < 1e-15);
    assert!((sf.den_nonresonant.norm() - 4.0).abs() < 1e-2);
    assert!(matches!(scattering_simple_fractions(&spin(1.0), 1.0, &q()), Err(Error::WrongVariant { .. })));
}

#[test]
fn susceptibility_rules() {
    let model = spin(1.0);
    for w in [-2.5, -0.4, 0.0, 1.1, 2.0] {
        let chi = susceptibility(&model, Order::Second, w, &q()).unwrap();
        assert_eq!(chi.get(Channel::Zero).unwrap(), re(0.0));
    }
    let w = -1.7;
    let chi = susceptibility(&model, Order::SecondPlusFourth, w, &q()).unwrap().get(Channel::Plus).unwrap();
    let t = transition_matrix(&model, Order::SecondPlusFourth, re(w), &q()).unwrap().get(Channel::Plus).unwrap();
    assert!(t.im != 0.0);
    assert_eq!(chi.im, -t.im);
    assert_eq!(chi.re, t.re);
}

#[test]
fn polarizability_values() {
    let free = make_model(Variant::TwoLevelAtom, Masses::Symmetric(1.0), FormFactor::hydrogen_dipole(0.0, 1.0).unwrap(), Some(1.0)).unwrap();
    assert!((polarizability(&free, Order::Second, 0.0, &q()).unwrap() - re(1.0)).norm() < 1e-15);

    let model = hydrogen_two_level();
    let gamma = shift_width(&model, 2.0, &q()).unwrap().gamma;
    let up = polarizability_resonant_decomposition(&model, 2.0, &q()).unwrap();
    let down = polarizability_resonant_decomposition(&model, -2.0, &q()).unwrap();
    assert!((up.den_plus.im + gamma).abs() <= 1e-15 && (down.den_plus.im - gamma).abs() <= 1e-15);
    assert!(up.term_plus.norm() > 100.0 * up.term_minus.norm());
    for i in 0..=40 {
        let w = 1.8 + 0.01 * i as f64;
        let dec = polarizability_resonant_decomposition(&model, w, &q()).unwrap();
        let gamma = shift_width(&model, w, &q()).unwrap().gamma;
        assert!((dec.approx_sum() - dec.sum()).norm() <= 2.0 * (1.0 + 1e-9) * gamma * dec.term_minus.norm() / dec.den_minus.norm(), "ω = {w}");
    }
    assert!(matches!(polarizability(&spin(1.0), Order::Second, 1.0, &q()), Err(Error::WrongVariant { .. })));
}

#[test]
fn pole_pair_respects_crossing() {
    let poles = locate_poles(&hydrogen_two_level(), Order::SecondPlusFourth, &q()).unwrap();
    let up = poles.iter().find(|p| p.seed > 0.0).unwrap().location;
    let down = poles.iter().find(|p| p.seed < 0.0).unwrap().location;
    assert!((down + up.conj()).norm() <= 1e-8);
}

#[test]
fn crossing_is_exact_without_coupling() {
    for model in [spin(0.0), two_level(0.0)] {
        for w in [-1.3, 0.2, 2.7] {
            assert_eq!(crossing_residual(&model, Order::SecondPlusFourth, w, &q()).unwrap(), 0.0);
        }
    }
}

#[test]
fn two_level_integrand_is_the_two_fraction_trace() {
    let model = hydrogen_two_level();
    let masses = mass_correction(&model, &q()).unwrap();
    let eps = 1e-3;
    for (k0, p) in [(0.3, -0.7), (1.1, 0.4), (-0.6, 2.2), (0.05, -1.9)] {
        let spec = LoopIntegrandSpec { model: model.clone(), masses, diagram: OracleDiagram::Second, channel: Channel::Scalar, k0, k: 0.0, eps, dim: 2 };
        let f = build_integrand(&spec).unwrap();
        let s = |x: f64| (1.0 / C::new(x - 1.0, eps), 1.0 / C::new(x + 1.0, -eps));
        let ((e1, g1), (e0, g0)) = (s(p + k0), s(p));
        let expected = C::new(0.0, -1.0 / (2.0 * PI)) * (e1 * g0 + g1 * e0);
        assert!((f(p, 0.0) - expected).norm() <= 1e-13 * expected.norm(), "({k0}, {p})");
    }
}

#[test]
fn oracle_second_order_spot_values() {
    let opts = OracleOptions::default();
    let s = spin(1.0);
    let mc = mass_correction(&s, &q()).unwrap();
    let v = oracle::as_channel_value(&oracle::loop_integral_numeric(&s, OracleDiagram::Second, 0.3, &mc, &opts).unwrap());
    for (ch, sign) in [(Channel::Plus, 1.0), (Channel::Minus, -1.0)] {
        let target = -2.0 / (2.0 - sign * 0.3);
        assert!((v.get(ch).unwrap() - re(target)).norm() <= 1e-4 * target.abs());
    }
    assert!(v.get(Channel::Zero).unwrap().norm() <= 1e-6);

    let t = hydrogen_two_level();
    let mc = mass_correction(&t, &q()).unwrap();
    let v = oracle::loop_integral_numeric(&t, OracleDiagram::Second, 0.5, &mc, &opts).unwrap()[0].1.value;
    assert!((v - re(-4.0 / 3.75)).norm() <= 1e-4 * 4.0 / 3.75);
}

#[test]
fn oracle_minus_channel_is_plus_at_reversed_energy() {
    let s = spin(1.0);
    let mc = mass_correction(&s, &q()).unwrap();
    let opts = OracleOptions::default();
    let fwd = oracle::as_channel_value(&oracle::loop_integral_numeric(&s, OracleDiagram::Fourth(Diagram::C), 0.35, &mc, &opts).unwrap());
    let bwd = oracle::as_channel_value(&oracle::loop_integral_numeric(&s, OracleDiagram::Fourth(Diagram::C), -0.35, &mc, &opts).unwrap());
    let (a, b) = (fwd.get(Channel::Minus).unwrap(), bwd.get(Channel::Plus).unwrap());
    assert!((a - b).norm() <= 1e-5 * a.norm(), "{a} vs {b}");
}

#[test]
fn oracle_spin_zero_channel_double_loop_at_rest() {
    let s = spin(1.0);
    let mc = mass_correction(&s, &q()).unwrap();
    let closed = fourth_order_diagram(&s, 0.0, Diagram::B, &mc, &q()).unwrap().get(Channel::Zero).unwrap();
    let independent = -4.0 * simpson_half_line(|k| if k == 0.0 { 0.0 } else { s.formfactor.g2(k) / (k * (k + 2.0).powi(3)) });
    assert!((closed.re - independent).abs() <= 1e-9 * independent.abs());
    let numeric = oracle::as_channel_value(&oracle::loop_integral_numeric(&s, OracleDiagram::Fourth(Diagram::B), 0.0, &mc, &OracleOptions::default()).unwrap());
    let v = numeric.get(Channel::Zero).unwrap();
    assert!((v - closed).norm() <= 1e-3 * closed.norm(), "{v} vs {closed}");
}

#[test]
fn kramers_kronig_degenerates_without_width() {
    let grid: Vec<f64> = (0..401).map(|i| -10.0 + 0.05 * i as f64).collect();
    assert!(matches!(kramers_kronig_check(&two_level(0.0), Order::Second, &grid, &q()), Err(Error::GridTooCoarse(_))));
}

#[test]
fn second_order_dipole_at_rest() {
    let m = make_model(Variant::DipoleAtom, Masses::Levels { m_e: 1.5, m_g: -0.5 }, FormFactor::hydrogen_dipole(1.0, 1.0).unwrap(), None).unwrap();
    assert_eq!(photon_self_energy_2(&m, re(0.0)).unwrap().scalar().unwrap(), re(-1.0));
}
