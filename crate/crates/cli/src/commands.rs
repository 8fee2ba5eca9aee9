use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde_json::{json, Value};
use usckd_core::adversary::{
    eve_report, run_attacked_session, AccuracyMode, EveKind, EveStrategy, TapConfig, TapPlacement,
};
use usckd_core::drive::{
    calibrate_noise, dominant_frequency, rms_fluctuation, simulate_trace, toggle_level, ArmDrive,
    DriveSchedule, GlassRamp, NoiseKind, NoiseModel, SideDrive, TimeTrace,
};
use usckd_core::interferometer::{basis_outcome, coupled_intensities, PhaseBasis, Port};
use usckd_core::protocol::{
    bits_to_string, run_session, DetectorConfig, RoundRecord, SessionResult,
};

use crate::error::CliError;
use crate::params::{Command, Params};

/// Files produced by one command.
#[derive(Debug)]
pub struct Outputs {
    pub primary: String,
    pub summary: Option<String>,
    pub exit_code: i32,
}

pub fn run(command: Command, params: &Params) -> Result<Outputs, CliError> {
    match command {
        Command::Sweep => sweep(params),
        Command::Trace => trace(params),
        Command::Keygen => keygen(params),
        Command::Eve => eve(params),
    }
}

/// Pretty JSON with lexicographically sorted keys and a trailing LF.
pub fn render_json(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

fn basis_name(b: PhaseBasis) -> &'static str {
    match b {
        PhaseBasis::Zero => "0",
        PhaseBasis::Pi => "pi",
    }
}

fn sweep(params: &Params) -> Result<Outputs, CliError> {
    let resolution = params.u64("resolution")? as usize;
    if resolution < 2 {
        return Err(CliError::Usage("resolution must be at least 2".into()));
    }
    // Inclusive grid so odd resolutions land on 0, π/2, π and 2π.
    let step = TAU / (resolution - 1) as f64;
    let mut csv = String::from("phi,psi,I_A,I_B\n");
    for i in 0..resolution {
        let phi = i as f64 * step;
        for j in 0..resolution {
            let psi = j as f64 * step;
            let (a, b) = coupled_intensities(phi, psi);
            writeln!(csv, "{phi:.16e},{psi:.16e},{a:.16e},{b:.16e}").unwrap();
        }
    }

    let mut table = serde_json::Map::new();
    for phi in PhaseBasis::ALL {
        for psi in PhaseBasis::ALL {
            let o = basis_outcome(phi, psi);
            table.insert(
                format!("phi={},psi={}", basis_name(phi), basis_name(psi)),
                json!({
                    "I_A": o.i_a,
                    "I_B": o.i_b,
                    "bright_port": if o.bright_port == Port::A { "A" } else { "B" },
                }),
            );
        }
    }
    let summary = json!({
        "command": "sweep",
        "config": params.to_json(),
        "rows": resolution * resolution,
        "basis_table": Value::Object(table),
    });
    Ok(Outputs {
        primary: csv,
        summary: Some(render_json(&summary)),
        exit_code: 0,
    })
}

fn noise_kind(name: &str) -> Result<NoiseKind, CliError> {
    match name {
        "none" => Ok(NoiseKind::None),
        "random-walk" => Ok(NoiseKind::RandomWalk),
        "gaussian" => Ok(NoiseKind::Gaussian),
        other => Err(CliError::Usage(format!(
            "unknown noise `{other}` (none, random-walk, gaussian)"
        ))),
    }
}

fn noise_name(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::None => "none",
        NoiseKind::RandomWalk => "random-walk",
        NoiseKind::Gaussian => "gaussian",
    }
}

fn build_schedule(params: &Params) -> Result<DriveSchedule, CliError> {
    let side = |detune: f64, offset: f64| {
        SideDrive::new(
            ArmDrive::new(detune).with_offset(offset),
            ArmDrive::new(0.0),
        )
    };
    let bob_detune = params.f64("bob_detune")?;
    let alice_detune = params.f64("alice_detune")?;
    let mut schedule = DriveSchedule::constant(
        side(bob_detune, params.f64("bob_offset")?),
        side(alice_detune, params.f64("alice_offset")?),
    );
    if let Some(t) = params.opt_f64("toggle_time")? {
        let bob = params.opt_f64("toggle_bob_detune")?.unwrap_or(bob_detune);
        let alice = params
            .opt_f64("toggle_alice_detune")?
            .unwrap_or(alice_detune);
        schedule = schedule.with_toggle(t, SideDrive::detuned(bob), SideDrive::detuned(alice))?;
    }
    match (
        params.opt_f64("ramp_start")?,
        params.opt_f64("ramp_duration")?,
    ) {
        (Some(start), Some(duration)) => {
            let ramp = GlassRamp {
                start_time: start,
                duration,
                total_phase: params.f64("ramp_phase")?,
                acceleration_exponent: params.f64("ramp_exponent")?,
            };
            schedule = schedule.with_ramp(ramp)?;
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Usage(
                "ramp_start and ramp_duration must be given together".into(),
            ))
        }
    }
    Ok(schedule.with_leakage(params.f64("leakage")?)?)
}

fn channel_stats(series: &[f64], sample_rate: f64) -> Value {
    let peak = dominant_frequency(series, sample_rate);
    let n = series.len().max(1) as f64;
    let mean = series.iter().sum::<f64>() / n;
    json!({
        "dominant_frequency": peak.frequency,
        "resolution": peak.resolution,
        "oscillating": peak.oscillating,
        "mean": mean,
        "rms_fluctuation": rms_fluctuation(series),
        "min": series.iter().copied().fold(f64::INFINITY, f64::min),
        "max": series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn trace_summary(
    params: &Params,
    schedule: &DriveSchedule,
    noise: &NoiseModel,
    trace: &TimeTrace,
    duration: f64,
) -> Value {
    let fs = trace.sample_rate;
    let segments = schedule.segments();
    let windows: Vec<Value> = segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let end = segments.get(k + 1).map_or(duration, |s| s.start_time);
            let (lo, hi) = (trace.index_at(seg.start_time), trace.index_at(end));
            json!({
                "start": seg.start_time,
                "end": end,
                "bob_beat": seg.bob.beat_frequency(),
                "alice_beat": seg.alice.beat_frequency(),
                "I_A": channel_stats(&trace.i_a[lo..hi], fs),
            })
        })
        .collect();
    let level = if segments.len() > 1 && noise.is_silent() {
        toggle_level(schedule).ok()
    } else {
        None
    };
    json!({
        "command": "trace",
        "config": params.to_json(),
        "samples": trace.len(),
        "noise": {
            "kind": noise_name(noise.kind),
            "sigma_per_sample": noise.sigma_per_sample,
            "seed": noise.seed,
        },
        "channels": {
            "I_A": channel_stats(&trace.i_a, fs),
            "I_B": channel_stats(&trace.i_b, fs),
            "I_alpha": channel_stats(&trace.i_alpha, fs),
        },
        "segments": windows,
        "toggle_level": level,
    })
}

fn trace(params: &Params) -> Result<Outputs, CliError> {
    let seed = params.u64("seed")?;
    let sample_rate = params.f64("sample_rate")?;
    let duration = params.f64("duration")?;
    let schedule = build_schedule(params)?;

    let noise = match params.opt_f64("noise_target")? {
        Some(target) => {
            if noise_kind(params.str("noise")?)? != NoiseKind::RandomWalk {
                return Err(CliError::Usage(
                    "noise_target calibrates a random-walk model; set noise = \"random-walk\""
                        .into(),
                ));
            }
            calibrate_noise(target, duration, sample_rate, seed)?
        }
        None => NoiseModel {
            kind: noise_kind(params.str("noise")?)?,
            sigma_per_sample: params.f64("sigma")?,
            seed,
        },
    };

    let trace = simulate_trace(&schedule, &noise, sample_rate, duration)?;
    let mut csv = Vec::with_capacity(trace.len() * 96);
    trace.write_csv(&mut csv).expect("writing to memory");
    let summary = trace_summary(params, &schedule, &noise, &trace, duration);
    Ok(Outputs {
        primary: String::from_utf8(csv).expect("CSV is ASCII"),
        summary: Some(render_json(&summary)),
        exit_code: 0,
    })
}

fn placement(name: &str) -> Result<TapPlacement, CliError> {
    match name {
        "outbound" => Ok(TapPlacement::OutboundOnly),
        "return" => Ok(TapPlacement::ReturnOnly),
        "both" => Ok(TapPlacement::BothPasses),
        other => Err(CliError::Usage(format!(
            "unknown placement `{other}` (outbound, return, both)"
        ))),
    }
}

fn strategy_kind(name: &str) -> Result<EveKind, CliError> {
    match name {
        "intensity" => Ok(EveKind::IntensityOnly),
        "coherent" => Ok(EveKind::CoherentCombine),
        other => Err(CliError::Usage(format!(
            "unknown strategy `{other}` (intensity, coherent)"
        ))),
    }
}

fn placement_name(p: TapPlacement) -> &'static str {
    match p {
        TapPlacement::OutboundOnly => "outbound",
        TapPlacement::ReturnOnly => "return",
        TapPlacement::BothPasses => "both",
    }
}

fn strategy_name(k: EveKind) -> &'static str {
    match k {
        EveKind::IntensityOnly => "intensity",
        EveKind::CoherentCombine => "coherent",
    }
}

fn opt_bit(bit: Option<u8>) -> Value {
    bit.map_or(Value::Null, |b| json!(b))
}

fn round_json(r: &RoundRecord) -> Value {
    json!({
        "index": r.index,
        "phi": basis_name(r.phi),
        "psi": basis_name(r.psi),
        "noise_phi": r.noise_phi,
        "noise_psi": r.noise_psi,
        "phi_actual": r.phi_actual,
        "psi_actual": r.psi_actual,
        "I_alpha": r.alice_intensities.0,
        "I_beta": r.alice_intensities.1,
        "I_A": r.bob_intensities.0,
        "I_B": r.bob_intensities.1,
        "alice_inferred_phi": r.alice_inferred_phi.map(basis_name),
        "bob_inferred_match": r.bob_inferred_match,
        "alice_bit": opt_bit(r.alice_bit),
        "bob_bit": opt_bit(r.bob_bit),
        "key_bit": opt_bit(r.key_bit),
    })
}

fn session_json(params: &Params, seed: u64, session: &SessionResult) -> Value {
    json!({
        "command": "keygen",
        "config": params.to_json(),
        "params": {
            "rounds": session.rounds.len(),
            "noise": params.to_json()["noise"].clone(),
            "sigma": params.to_json()["sigma"].clone(),
            "threshold": params.to_json()["threshold"].clone(),
            "erasure_band": params.to_json()["erasure_band"].clone(),
        },
        "seed": seed,
        "rounds": session.rounds.iter().map(round_json).collect::<Vec<_>>(),
        "bob_key": bits_to_string(&session.bob_key),
        "alice_key": bits_to_string(&session.alice_key),
        "ber": session.bit_error_rate,
        "erasures": session.erasure_count,
        "mismatches": session.mismatches,
        "key_length": session.bob_key.len(),
    })
}

fn keygen(params: &Params) -> Result<Outputs, CliError> {
    let seed = params.u64("seed")?;
    let rounds = params.u64("rounds")? as usize;
    if rounds == 0 {
        return Err(CliError::Usage("rounds must be at least 1".into()));
    }
    let noise = NoiseModel {
        kind: noise_kind(params.str("noise")?)?,
        sigma_per_sample: params.f64("sigma")?,
        seed,
    };
    let detectors = DetectorConfig::new(params.f64("threshold")?, params.f64("erasure_band")?)?;
    let tap_ratio = params.f64("tap_ratio")?;

    let (session, eve) = if tap_ratio > 0.0 {
        let tap = TapConfig::new(tap_ratio, placement(params.str("placement")?)?)?;
        let kind = strategy_kind(params.str("strategy")?)?;
        let strategy = EveStrategy::bayes(kind, &tap)?;
        let attacked = run_attacked_session(rounds, &tap, &strategy, &noise, &detectors, seed)?;
        let eve = json!({
            "tap": {"ratio": tap.ratio, "placement": placement_name(tap.placement)},
            "strategy": strategy_name(kind),
            "accuracy_phi": attacked.eve.accuracy_phi,
            "accuracy_key": attacked.eve.accuracy_key,
        });
        (attacked.session, Some(eve))
    } else {
        (run_session(rounds, &noise, &detectors, seed)?, None)
    };

    let mut doc = session_json(params, seed, &session);
    if let Some(eve) = eve {
        doc["eve"] = eve;
    }
    let noiseless_failure = noise.is_silent() && session.bit_error_rate != 0.0;
    Ok(Outputs {
        primary: render_json(&doc),
        summary: None,
        exit_code: if noiseless_failure { 2 } else { 0 },
    })
}

fn eve(params: &Params) -> Result<Outputs, CliError> {
    let seed = params.u64("seed")?;
    let tap = TapConfig::new(
        params.f64("tap_ratio")?,
        placement(params.str("placement")?)?,
    )?;
    let kind = strategy_kind(params.str("strategy")?)?;
    let (mode, mode_name, n, seed_value) = match params.str("mode")? {
        "exact" => (AccuracyMode::ExactEnumeration, "exact", 4, Value::Null),
        "monte-carlo" | "mc" => {
            let n = params.u64("n")? as usize;
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            (
                AccuracyMode::MonteCarlo { n, seed },
                "monte-carlo",
                n,
                json!(seed),
            )
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode `{other}` (exact, monte-carlo)"
            )))
        }
    };
    let report = eve_report(kind, &tap, mode)?;
    let mut doc = json!({
        "command": "eve",
        "config": params.to_json(),
        "tap": {"ratio": tap.ratio, "placement": placement_name(tap.placement)},
        "strategy": strategy_name(kind),
        "mode": mode_name,
        "accuracy_phi": report.accuracy_phi,
        "accuracy_key": report.accuracy_key,
        "mutual_information_bits": report.mutual_information_bits,
        "n": n,
        "seed": seed_value,
    });
    if kind == EveKind::CoherentCombine {
        doc["note"] = json!(
            "model-dependent, see docs: coherent combining assumes Eve holds a phase-stable reference across both lines"
        );
    }
    Ok(Outputs {
        primary: render_json(&doc),
        summary: None,
        exit_code: 0,
    })
}
