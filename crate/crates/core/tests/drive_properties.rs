use std::f64::consts::TAU;

use proptest::prelude::*;
use usckd_core::drive::{
    dominant_frequency, phase_at, simulate_trace, toggle_level, DriveSchedule, GlassRamp,
    NoiseModel, Side, SideDrive,
};
use usckd_core::interferometer::coupled_intensities;

fn detune() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

/// A schedule with one to three toggles and an optional ramp.
fn schedule() -> impl Strategy<Value = DriveSchedule> {
    (
        detune(),
        detune(),
        prop::collection::vec((0.5..4.0f64, detune(), detune()), 1..4),
        prop::option::of((0.0..10.0f64, 0.5..5.0f64)),
    )
        .prop_map(|(b0, a0, toggles, ramp)| {
            let mut s = DriveSchedule::constant(SideDrive::detuned(b0), SideDrive::detuned(a0));
            let mut t = 0.0;
            for (gap, b, a) in toggles {
                t += gap;
                s = s
                    .with_toggle(t, SideDrive::detuned(b), SideDrive::detuned(a))
                    .unwrap();
            }
            if let Some((start, duration)) = ramp {
                s = s.with_ramp(GlassRamp::new(start, duration)).unwrap();
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_is_continuous_across_toggles(s in schedule()) {
        let eps = 1e-6;
        let bound = TAU * s.max_beat() * 2.0 * eps + 1e-9;
        for seg in &s.segments()[1..] {
            for side in [Side::Bob, Side::Alice] {
                let before = phase_at(&s, side, seg.start_time - eps).unwrap();
                let after = phase_at(&s, side, seg.start_time + eps).unwrap();
                prop_assert!((after - before).abs() <= bound, "jump {} at {}", after - before, seg.start_time);
            }
        }
    }

    #[test]
    fn detector_outputs_stay_complementary(s in schedule(), sigma in 0.0..0.3f64, seed in any::<u64>()) {
        let trace = simulate_trace(&s, &NoiseModel::random_walk(sigma, seed), 50.0, 12.0).unwrap();
        for (a, b) in trace.i_a.iter().zip(&trace.i_b) {
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn traces_are_reproducible(s in schedule(), seed in any::<u64>()) {
        let noise = NoiseModel::random_walk(0.05, seed);
        let one = simulate_trace(&s, &noise, 40.0, 6.0).unwrap();
        let two = simulate_trace(&s, &noise, 40.0, 6.0).unwrap();
        prop_assert_eq!(one, two);
    }

    #[test]
    fn post_toggle_level_follows_the_beat_at_the_switch(t_switch in 0.1..15.0f64, f0 in 0.2..3.0f64) {
        let s = DriveSchedule::constant(SideDrive::detuned(f0), SideDrive::detuned(-f0))
            .with_toggle(t_switch, SideDrive::detuned(f0), SideDrive::detuned(f0))
            .unwrap();
        let phi = phase_at(&s, Side::Bob, t_switch).unwrap();
        let psi = phase_at(&s, Side::Alice, t_switch).unwrap();
        let level = toggle_level(&s).unwrap();
        prop_assert!((level - coupled_intensities(phi, psi).0).abs() <= 1e-9);
        let expected = (TAU * f0 * t_switch).cos().powi(2);
        prop_assert!((level - expected).abs() <= 1e-9);
    }
}

#[test]
fn opposite_detuning_doubles_the_beat() {
    let fs = 100.0;
    for f0 in [0.5, 1.0, 2.0] {
        let s = DriveSchedule::constant(SideDrive::detuned(f0), SideDrive::detuned(-f0));
        let trace = simulate_trace(&s, &NoiseModel::none(), fs, 8.0).unwrap();
        let peak = dominant_frequency(&trace.i_a, fs);
        assert!(peak.oscillating);
        assert!(
            (peak.frequency - 2.0 * f0).abs() <= peak.resolution,
            "f0 = {f0}: peak at {}",
            peak.frequency
        );

        let same = DriveSchedule::constant(SideDrive::detuned(f0), SideDrive::detuned(f0));
        let flat = simulate_trace(&same, &NoiseModel::none(), fs, 8.0).unwrap();
        let mean = flat.i_a.iter().sum::<f64>() / flat.len() as f64;
        let var = flat.i_a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / flat.len() as f64;
        assert!(var < 1e-18, "f0 = {f0}: variance {var:e}");
    }
}

#[test]
fn undersampling_is_rejected() {
    let s = DriveSchedule::constant(SideDrive::detuned(10.0), SideDrive::detuned(0.0));
    let err = simulate_trace(&s, &NoiseModel::none(), 30.0, 1.0).unwrap_err();
    assert!(err.to_string().contains("undersampled"));
}

#[test]
fn glass_ramp_sweeps_the_full_fringe() {
    let s = DriveSchedule::constant(SideDrive::detuned(0.0), SideDrive::detuned(0.0))
        .with_ramp(GlassRamp::new(2.0, 8.0))
        .unwrap();
    let trace = simulate_trace(&s, &NoiseModel::none(), 100.0, 12.0).unwrap();
    let (lo, hi) = (trace.index_at(2.0), trace.index_at(10.0));
    let window = &trace.i_a[lo..=hi];
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(min < 1e-3 && max > 1.0 - 1e-9, "range [{min}, {max}]");
}
