//! Invariants over random states and angles.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;

use cvbell::bell::bell_s;
use cvbell::fock::circle_state_coeffs;
use cvbell::lhv::{husimi_density, lhv_noisy_s_exact};
use cvbell::quadrature::{joint_sign_prob, marginal_positive_prob, Outcome};
use cvbell::{BellAngles, CircleStateCoeffs, ReducedAngles};

fn state(r0: f64) -> CircleStateCoeffs {
    circle_state_coeffs(r0, 1e-12).unwrap()
}

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn angles() -> impl Strategy<Value = BellAngles> {
    (angle(), angle(), angle(), angle()).prop_map(|(t, p, tp, pp)| BellAngles::new(t, p, tp, pp))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficients_normalised_and_positive(r0 in 0.0..3.0f64) {
        let s = state(r0);
        let c = s.coefficients();
        prop_assert!(c.iter().all(|&v| v > 0.0));
        let norm: f64 = c.iter().map(|v| v * v).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_are_one_half(r0 in 0.0..3.0f64, chi in angle()) {
        let s = state(r0);
        prop_assert!((marginal_positive_prob(&s) - 0.5).abs() < 1e-12);
        let pp = joint_sign_prob(&s, chi, Outcome::Plus, Outcome::Plus);
        let pm = joint_sign_prob(&s, chi, Outcome::Plus, Outcome::Minus);
        prop_assert!((pp + pm - 0.5).abs() < 1e-12);
    }

    #[test]
    fn joint_plus_is_even(r0 in 0.0..3.0f64, chi in angle()) {
        let s = state(r0);
        let a = joint_sign_prob(&s, chi, Outcome::Plus, Outcome::Plus);
        let b = joint_sign_prob(&s, -chi, Outcome::Plus, Outcome::Plus);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn s_invariant_under_reflection_and_full_turns(r0 in 0.0..3.0f64, a in angles(), k in -2i32..=2) {
        let s = state(r0);
        let base = bell_s(&s, &a).s;
        let reflected = BellAngles::new(-a.theta, -a.phi, -a.theta_p, -a.phi_p);
        prop_assert!((bell_s(&s, &reflected).s - base).abs() < 1e-12);
        let turn = TAU * k as f64;
        let shifted = BellAngles::new(a.theta + turn, a.phi, a.theta_p, a.phi_p - turn);
        prop_assert!((bell_s(&s, &shifted).s - base).abs() < 1e-12);
    }

    #[test]
    fn husimi_nonnegative_and_phase_invariant(
        r0 in 0.0..3.0f64,
        (ar, ai, br, bi) in (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64),
        t in angle(),
    ) {
        let s = state(r0);
        let (alpha, beta) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let q = husimi_density(&s, alpha, beta);
        prop_assert!(q >= 0.0);
        let rot = Complex64::from_polar(1.0, t);
        let q2 = husimi_density(&s, alpha * rot, beta * rot.conj());
        // The number series can cancel by several digits where terms interfere.
        prop_assert!((q - q2).abs() <= 1e-9 * q + 1e-15, "{q} vs {q2}");
    }

    #[test]
    fn exact_lhv_s_is_bounded(r0 in 0.0..3.0f64, a in angles()) {
        prop_assert!(lhv_noisy_s_exact(&state(r0), &a).s <= 1.0 + 1e-9);
    }

    #[test]
    fn canonical_form_is_idempotent(c1 in angle(), c2 in angle(), c3 in angle()) {
        let r = ReducedAngles::new(c1, c2, c3);
        let once = r.canonical();
        let twice = once.canonical();
        prop_assert!(once.distance_mod_symmetry(&twice) < 1e-12);
        prop_assert!((once.chi1 - twice.chi1).abs() < 1e-12);
        prop_assert!((once.chi2 - twice.chi2).abs() < 1e-12);
        prop_assert!((once.chi3 - twice.chi3).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_keeps_s(r0 in 0.2..2.5f64, c1 in angle(), c2 in angle(), c3 in angle()) {
        let s = state(r0);
        let r = ReducedAngles::new(c1, c2, c3);
        let a = bell_s(&s, &r.to_angles()).s;
        let b = bell_s(&s, &r.canonical().to_angles()).s;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
