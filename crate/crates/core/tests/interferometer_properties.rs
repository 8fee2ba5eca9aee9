use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use usckd_core::field::{apply, TwoModeField};
use usckd_core::interferometer::{
    basis_outcome, chain_fringe_spacing, coupled_intensities, coupled_transfer, mzi_intensities,
    PhaseBasis, Port,
};

const TOL: f64 = 1e-12;

proptest! {
    #[test]
    fn outputs_are_complementary(phi in -20.0..20.0f64, psi in -20.0..20.0f64) {
        let (ia, ib) = mzi_intensities(phi);
        prop_assert!((ia + ib - 1.0).abs() <= TOL);
        let (a, b) = coupled_intensities(phi, psi);
        prop_assert!((a + b - 1.0).abs() <= TOL);
    }

    #[test]
    fn only_the_phase_difference_matters(phi in 0.0..TAU, psi in 0.0..TAU, c in -TAU..TAU) {
        let (a0, b0) = coupled_intensities(phi, psi);
        let (a1, b1) = coupled_intensities(phi + c, psi + c);
        prop_assert!((a0 - a1).abs() <= TOL && (b0 - b1).abs() <= TOL);
        let (c0, _) = apply(&coupled_transfer(phi, psi), &TwoModeField::input()).intensities();
        let (c1, _) = apply(&coupled_transfer(phi + c, psi + c), &TwoModeField::input()).intensities();
        prop_assert!((c0 - c1).abs() <= TOL);
    }

    #[test]
    fn matched_phases_return_to_port_a(phi in -20.0..20.0f64) {
        let out = apply(&coupled_transfer(phi, phi), &TwoModeField::input());
        prop_assert!((out.intensities().0 - 1.0).abs() <= TOL);
    }
}

#[test]
fn closed_form_matches_composition_on_grid() {
    let n = 101;
    let step = TAU / n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (phi, psi) = (i as f64 * step, j as f64 * step);
            let (a, b) = coupled_intensities(phi, psi);
            let (ca, cb) = apply(&coupled_transfer(phi, psi), &TwoModeField::input()).intensities();
            worst = worst.max((a - ca).abs()).max((b - cb).abs());
        }
    }
    assert!(worst <= TOL, "worst deviation {worst:e}");
}

#[test]
fn bright_port_encodes_basis_agreement() {
    for phi in PhaseBasis::ALL {
        for psi in PhaseBasis::ALL {
            let out = basis_outcome(phi, psi);
            let xnor = phi.bit() == psi.bit();
            assert_eq!(out.bright_port == Port::A, xnor);
            let (bright, dark) = if xnor {
                (out.i_a, out.i_b)
            } else {
                (out.i_b, out.i_a)
            };
            assert_abs_diff_eq!(bright, 1.0, epsilon = TOL);
            assert_abs_diff_eq!(dark, 0.0, epsilon = TOL);
        }
    }
}

#[test]
fn longer_chains_keep_shrinking_the_fringe() {
    let spacing = |n| chain_fringe_spacing(n, 10_000).unwrap();
    let (s1, s2) = (spacing(1), spacing(2));
    for (s, expected) in [(&s1, PI), (&s2, PI / 2.0)] {
        assert_abs_diff_eq!(s.min_spacing.unwrap(), expected, epsilon = 1e-3);
        assert_abs_diff_eq!(s.max_spacing.unwrap(), expected, epsilon = 1e-3);
    }
    for n in 3..=4 {
        let mean = spacing(n).mean_spacing.unwrap();
        assert!(mean > 0.0 && mean < s2.mean_spacing.unwrap() + 1e-9);
    }
}
