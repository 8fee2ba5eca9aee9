//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usckd_core::adversary::{eve_report, AccuracyMode, EveKind, TapConfig, TapPlacement};
use usckd_core::drive::{
    calibrate_noise, dominant_frequency, half_fringe_schedule, rms_fluctuation, simulate_trace,
    toggle_level, DriveSchedule, GlassRamp, NoiseModel, SideDrive, TimeTrace,
};
use usckd_core::field::{
    apply, compose_path, make_bs, make_phase, ComplexAmp, TwoModeField, TwoPortOperator,
};
use usckd_core::interferometer::{
    basis_outcome, chain_fringe_spacing, coupled_intensities, coupled_transfer, mzi_intensities,
    PhaseBasis, Port,
};
use usckd_core::protocol::{run_session, DetectorConfig};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget: f64, detail: String) -> Verdict {
    let secs = elapsed.as_secs_f64();
    if secs < budget {
        Ok(format!("{detail}; {secs:.3} s"))
    } else {
        Err(format!("{detail}; took {secs:.3} s, budget {budget} s"))
    }
}

/// The coupled transfer matrix written out entry by entry.
fn explicit_coupled_matrix(phi: f64, psi: f64) -> TwoPortOperator {
    let a = ComplexAmp::from_polar(1.0, phi);
    let b = ComplexAmp::from_polar(1.0, psi);
    let i = ComplexAmp::i();
    let h = ComplexAmp::new(-0.5, 0.0);
    TwoPortOperator::new(
        h * (a + b),
        h * (-i * (a - b)),
        h * (i * (a - b)),
        h * (a + b),
    )
}

fn largest_residual(trace: &TimeTrace) -> f64 {
    trace
        .i_a
        .iter()
        .zip(&trace.i_b)
        .map(|(a, b)| (a + b - 1.0).abs())
        .fold(0.0, f64::max)
}

fn basis_table() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ports_ok = true;
    for phi in PhaseBasis::ALL {
        for psi in PhaseBasis::ALL {
            let out = basis_outcome(phi, psi);
            let matched = phi == psi;
            ports_ok &= (out.bright_port == Port::A) == matched;
            let (bright, dark) = if matched {
                (out.i_a, out.i_b)
            } else {
                (out.i_b, out.i_a)
            };
            worst = worst.max((bright - 1.0).abs()).max(dark.abs());
        }
    }
    if !ports_ok || worst > 1e-12 {
        return Err(format!("ports ok = {ports_ok}, max error {worst:e}"));
    }
    within_budget(start.elapsed(), 1.0, format!("max error {worst:e}"))
}

fn fringe_laws() -> Verdict {
    let start = Instant::now();
    let n = 101;
    let step = TAU / (n - 1) as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let phi = i as f64 * step;
        let (ia, ib) = mzi_intensities(phi);
        worst = worst
            .max((ia - (1.0 - phi.cos()) / 2.0).abs())
            .max((ib - (1.0 + phi.cos()) / 2.0).abs());
        for j in 0..n {
            let psi = j as f64 * step;
            let out = apply(&explicit_coupled_matrix(phi, psi), &TwoModeField::input());
            let (oa, ob) = out.intensities();
            let (a, b) = coupled_intensities(phi, psi);
            worst = worst.max((a - oa).abs()).max((b - ob).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("max error {worst:e}"));
    }
    within_budget(
        start.elapsed(),
        1.0,
        format!("101x101 grid, max error {worst:e}"),
    )
}

fn composition_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let phi = rng.random_range(-TAU..2.0 * TAU);
        let psi = rng.random_range(-TAU..2.0 * TAU);
        worst = worst.max(
            coupled_transfer(phi, psi).global_phase_distance(&explicit_coupled_matrix(phi, psi)),
        );
    }
    check(
        worst <= 1e-12,
        format!("1000 random pairs, max entry error {worst:e}"),
    )
}

fn frequency_doubling() -> Verdict {
    let start = Instant::now();
    let fs = 100.0;
    let cbw = DriveSchedule::constant(SideDrive::detuned(1.0), SideDrive::detuned(-1.0));
    let trace = simulate_trace(&cbw, &NoiseModel::none(), fs, 8.0).map_err(|e| e.to_string())?;
    let peak = dominant_frequency(&trace.i_a, fs);
    let same = DriveSchedule::constant(SideDrive::detuned(1.0), SideDrive::detuned(1.0));
    let flat = simulate_trace(&same, &NoiseModel::none(), fs, 8.0).map_err(|e| e.to_string())?;
    let mean = flat.i_a.iter().sum::<f64>() / flat.len() as f64;
    let var = flat.i_a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / flat.len() as f64;
    let detail = format!(
        "peak {} Hz (bin {} Hz), equal-detuning variance {var:e}",
        peak.frequency, peak.resolution
    );
    if !(peak.oscillating && (peak.frequency - 2.0).abs() <= 0.125 && var < 1e-18) {
        return Err(detail);
    }
    within_budget(start.elapsed(), 1.0, detail)
}

fn half_intensity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let phi = rng.random_range(0.0..TAU);
        let (a, b) = coupled_intensities(phi, phi + FRAC_PI_2);
        worst = worst.max((a - 0.5).abs()).max((b - 0.5).abs());
    }
    check(
        worst <= 1e-12,
        format!("100 random phases, max error {worst:e}"),
    )
}

fn toggle_levels(traces: &mut Vec<TimeTrace>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fs = 100.0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t_switch = rng.random_range(0.5..15.0);
        let s = DriveSchedule::constant(SideDrive::detuned(1.0), SideDrive::detuned(-1.0))
            .with_toggle(t_switch, SideDrive::detuned(1.0), SideDrive::detuned(1.0))
            .map_err(|e| e.to_string())?;
        // Beat of 2 Hz on the difference phase, evaluated at the switch.
        let cbw_value = (0.5 * (TAU * 2.0 * t_switch)).cos().powi(2);
        let level = toggle_level(&s).map_err(|e| e.to_string())?;
        worst = worst.max((level - cbw_value).abs());

        let trace = simulate_trace(&s, &NoiseModel::none(), fs, 20.0).map_err(|e| e.to_string())?;
        let first_after = (t_switch * fs).ceil() as usize;
        for &x in &trace.i_a[first_after..] {
            worst = worst.max((x - cbw_value).abs());
        }
        traces.push(trace);
    }
    check(
        worst <= 1e-9,
        format!("20 random switch times, max deviation {worst:e}"),
    )
}

fn noise_calibration(traces: &mut Vec<TimeTrace>) -> Verdict {
    let start = Instant::now();
    let (fs, window) = (100.0, 60.0);
    let model = calibrate_noise(0.2, window, fs, 2024).map_err(|e| e.to_string())?;
    let schedule = half_fringe_schedule();
    let seeds = 100..200u64;
    let mut total = 0.0;
    for seed in seeds.clone() {
        let noise = NoiseModel::random_walk(model.sigma_per_sample, seed);
        let trace = simulate_trace(&schedule, &noise, fs, window).map_err(|e| e.to_string())?;
        total += rms_fluctuation(&trace.i_a);
        if seed % 25 == 0 {
            traces.push(trace);
        }
    }
    let mean = total / seeds.count() as f64;
    let detail = format!(
        "sigma {:.6} rad/sample, mean RMS {mean:.4} over 100 fresh seeds",
        model.sigma_per_sample
    );
    if !(0.16..=0.24).contains(&mean) {
        return Err(detail);
    }
    within_budget(start.elapsed(), 10.0, detail)
}

fn protocol_determinacy() -> Verdict {
    let start = Instant::now();
    let s = run_session(10_000, &NoiseModel::none(), &DetectorConfig::default(), 8)
        .map_err(|e| e.to_string())?;
    let detail = format!(
        "BER {}, erasures {}, key length {}",
        s.bit_error_rate,
        s.erasure_count,
        s.bob_key.len()
    );
    if !(s.bit_error_rate == 0.0
        && s.erasure_count == 0
        && s.bob_key == s.alice_key
        && s.bob_key.len() == 10_000)
    {
        return Err(detail);
    }
    within_budget(start.elapsed(), 1.0, detail)
}

fn eve_blindness() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for r in [0.01, 0.1, 0.5] {
        let tap = TapConfig::new(r, TapPlacement::OutboundOnly).map_err(|e| e.to_string())?;
        let exact = eve_report(EveKind::IntensityOnly, &tap, AccuracyMode::ExactEnumeration)
            .map_err(|e| e.to_string())?;
        let mc = eve_report(
            EveKind::IntensityOnly,
            &tap,
            AccuracyMode::MonteCarlo {
                n: 100_000,
                seed: 9,
            },
        )
        .map_err(|e| e.to_string())?;
        ok &= exact.accuracy_phi == 0.5
            && exact.mutual_information_bits == 0.0
            && (mc.accuracy_phi - exact.accuracy_phi).abs() <= 0.01;
        parts.push(format!(
            "r={r}: exact {} / MI {} / MC {:.4}",
            exact.accuracy_phi, exact.mutual_information_bits, mc.accuracy_phi
        ));
    }
    let detail = parts.join(", ");
    if !ok {
        return Err(detail);
    }
    within_budget(start.elapsed(), 5.0, detail)
}

fn energy_conservation(traces: &[TimeTrace]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let depth = rng.random_range(1..8);
        let ops: Vec<TwoPortOperator> = (0..depth)
            .map(|_| {
                if rng.random::<bool>() {
                    make_bs()
                } else {
                    make_phase(rng.random_range(-TAU..TAU), rng.random_range(-TAU..TAU))
                }
            })
            .collect();
        let m = compose_path(ops.iter());
        let f = TwoModeField::new(
            ComplexAmp::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ComplexAmp::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        );
        worst = worst.max((apply(&m, &f).total_intensity() - f.total_intensity()).abs());
    }
    let trace_worst = traces.iter().map(largest_residual).fold(0.0, f64::max);
    let samples: usize = traces.iter().map(TimeTrace::len).sum();
    check(
        worst <= 1e-12 && trace_worst <= 1e-12,
        format!("1e5 operator/field pairs max {worst:e}; {samples} trace samples max |I_A+I_B-1| {trace_worst:e}"),
    )
}

fn run_cli(args: &[&str], dir: &Path, tag: &str) -> Result<Vec<Vec<u8>>, String> {
    let out = dir.join(tag);
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--seed", "7", "--out", out.to_str().unwrap()]);
    let run = Command::new(env!("CARGO_BIN_EXE_usckd"))
        .args(&full)
        .output()
        .map_err(|e| e.to_string())?;
    if !run.status.success() {
        return Err(format!(
            "`usckd {}` exited with {:?}",
            args.join(" "),
            run.status.code()
        ));
    }
    let mut files = vec![fs::read(&out).map_err(|e| e.to_string())?];
    let sidecar = dir.join(format!("{tag}.summary.json"));
    if sidecar.exists() {
        files.push(fs::read(&sidecar).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let invocations: [&[&str]; 10] = [
        &["sweep", "--preset", "fig2"],
        &["trace", "--preset", "bare-lab"],
        &["trace", "--preset", "cbw-toggle"],
        &["trace", "--preset", "glass-ramp"],
        &[
            "trace",
            "--noise",
            "gaussian",
            "--sigma",
            "0.1",
            "--bob-detune",
            "0.5",
        ],
        &["keygen"],
        &["keygen", "--noise", "random-walk", "--sigma", "0.3"],
        &[
            "keygen",
            "--tap-ratio",
            "0.1",
            "--strategy",
            "coherent",
            "--noise",
            "gaussian",
            "--sigma",
            "0.2",
        ],
        &["eve", "--strategy", "coherent", "--placement", "both"],
        &["eve", "--mode", "monte-carlo"],
    ];
    for (k, args) in invocations.iter().enumerate() {
        let first = run_cli(args, dir.path(), &format!("a{k}"))?;
        let second = run_cli(args, dir.path(), &format!("b{k}"))?;
        if first != second {
            return Err(format!("`usckd {}` differs between runs", args.join(" ")));
        }
    }
    Ok(format!(
        "{} invocations byte-identical across two runs",
        invocations.len()
    ))
}

fn chain_spans() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, expected) in [(1, Some(PI)), (2, Some(FRAC_PI_2)), (3, None), (4, None)] {
        let s = chain_fringe_spacing(n, 10_000).map_err(|e| e.to_string())?;
        let (lo, hi, mean) = match (s.min_spacing, s.max_spacing, s.mean_spacing) {
            (Some(lo), Some(hi), Some(mean)) => (lo, hi, mean),
            _ => return Err(format!("n={n}: fewer than two extrema")),
        };
        if let Some(e) = expected {
            ok &= (lo - e).abs() <= 1e-3 && (hi - e).abs() <= 1e-3;
        }
        parts.push(format!("n={n}: {mean:.6} rad [{lo:.6}, {hi:.6}]"));
    }
    check(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let mut traces = Vec::new();
    let mut results: Vec<(&str, Verdict)> = vec![
        ("basis outcome table", basis_table()),
        ("fringe laws", fringe_laws()),
        ("composition oracle", composition_oracle()),
        ("frequency doubling", frequency_doubling()),
        ("half-intensity point", half_intensity()),
    ];
    results.push(("toggle level", toggle_levels(&mut traces)));
    results.push(("noise calibration", noise_calibration(&mut traces)));
    results.push(("protocol determinacy", protocol_determinacy()));
    results.push(("eavesdropper intensity blindness", eve_blindness()));

    // Extra traces so the complementarity check also covers ramps, leakage and noise.
    let extra = DriveSchedule::constant(SideDrive::detuned(0.7), SideDrive::detuned(-0.2))
        .with_ramp(GlassRamp::new(1.0, 4.0))
        .and_then(|s| s.with_leakage(0.05))
        .and_then(|s| simulate_trace(&s, &NoiseModel::random_walk(0.05, 12), 100.0, 10.0));
    let energy = match extra {
        Ok(t) => {
            traces.push(t);
            energy_conservation(&traces)
        }
        Err(e) => Err(e.to_string()),
    };
    results.push(("energy conservation", energy));
    results.push(("CLI determinism", cli_determinism()));
    results.push(("chain fringe spacing", chain_spans()));

    let mut failed = 0;
    for (k, (name, verdict)) in results.iter().enumerate() {
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
