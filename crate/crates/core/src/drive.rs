//! Time-domain AOM drive experiments.
//!
//! Each interferometer arm carries an acousto-optic modulator driven near the
//! common 80 MHz carrier. A detuning `Δf` between the two arms of one side
//! makes that side's inter-arm phase grow as `2π·Δf·t`. A [`DriveSchedule`]
//! is a piecewise program of such detunings; switching segments changes the
//! frequencies while keeping every accumulated phase continuous, which is how
//! rf synthesizers behave on a frequency update.
//!
//! [`simulate_trace`] samples the detector intensities of the coupled system
//! under a schedule, an optional glass-plate phase ramp on Alice's upper arm
//! and an optional random-walk phase noise.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{coupled_intensities, mzi_intensities};

/// Nominal AOM driving frequency shared by all four arms.
pub const CARRIER_HZ: f64 = 80e6;

/// Default trace sampling rate.
pub const DEFAULT_SAMPLE_RATE: f64 = 100.0;

/// Default trace duration.
pub const DEFAULT_DURATION: f64 = 20.0;

/// Number of seeded trials averaged by [`calibrate_noise`].
pub const CALIBRATION_TRIALS: usize = 100;

/// Frequency program of a single AOM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmDrive {
    pub base_freq: f64,
    pub detune: f64,
    pub phase_offset: f64,
}

impl ArmDrive {
    pub fn new(detune: f64) -> Self {
        Self {
            base_freq: CARRIER_HZ,
            detune,
            phase_offset: 0.0,
        }
    }

    pub fn with_offset(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    fn is_finite(&self) -> bool {
        self.base_freq.is_finite() && self.detune.is_finite() && self.phase_offset.is_finite()
    }
}

impl Default for ArmDrive {
    fn default() -> Self {
        Self::new(0.0)
    }
}

/// The two AOMs of one interferometer (upper arm, lower arm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideDrive {
    pub upper: ArmDrive,
    pub lower: ArmDrive,
}

impl SideDrive {
    pub fn new(upper: ArmDrive, lower: ArmDrive) -> Self {
        Self { upper, lower }
    }

    /// Upper arm detuned by `delta` Hz from a lower arm at the bare carrier.
    pub fn detuned(delta: f64) -> Self {
        Self::new(ArmDrive::new(delta), ArmDrive::new(0.0))
    }

    /// Rate of change of the inter-arm phase, in Hz.
    ///
    /// The carrier difference is taken before the detuning difference so a
    /// common 80 MHz cancels exactly.
    pub fn beat_frequency(&self) -> f64 {
        (self.upper.base_freq - self.lower.base_freq) + (self.upper.detune - self.lower.detune)
    }

    pub fn initial_phase(&self) -> f64 {
        self.upper.phase_offset - self.lower.phase_offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bob,
    Alice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_time: f64,
    pub bob: SideDrive,
    pub alice: SideDrive,
}

impl Segment {
    pub fn new(start_time: f64, bob: SideDrive, alice: SideDrive) -> Self {
        Self {
            start_time,
            bob,
            alice,
        }
    }

    fn side(&self, side: Side) -> &SideDrive {
        match side {
            Side::Bob => &self.bob,
            Side::Alice => &self.alice,
        }
    }
}

/// Extra phase on Alice's upper arm from a tilting glass plate.
///
/// The phase rises as `total_phase · s^p` for normalized time `s ∈ [0, 1]`,
/// so it starts slowly and accelerates for `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassRamp {
    pub start_time: f64,
    pub duration: f64,
    pub total_phase: f64,
    pub acceleration_exponent: f64,
}

impl GlassRamp {
    pub fn new(start_time: f64, duration: f64) -> Self {
        Self {
            start_time,
            duration,
            total_phase: TAU,
            acceleration_exponent: 2.0,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        if t <= self.start_time {
            0.0
        } else if t >= self.end_time() {
            self.total_phase
        } else {
            let s = (t - self.start_time) / self.duration;
            self.total_phase * s.powf(self.acceleration_exponent)
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.start_time,
            self.duration,
            self.total_phase,
            self.acceleration_exponent,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.start_time < 0.0 || self.duration <= 0.0 {
            return Err(Error::InvalidSchedule(
                "glass ramp needs finite start >= 0 and duration > 0".into(),
            ));
        }
        if self.acceleration_exponent < 1.0 {
            return Err(Error::InvalidSchedule(
                "glass ramp acceleration exponent must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise AOM program for both interferometers.
///
/// Phase offsets are initial rf phases and may only be set in the first
/// segment; later segments change frequency only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveSchedule {
    segments: Vec<Segment>,
    ramp: Option<GlassRamp>,
    leakage: f64,
    // Inter-arm phase (Bob, Alice) at the start of each segment.
    #[serde(skip)]
    start_phases: Vec<(f64, f64)>,
}

impl DriveSchedule {
    pub fn new(segments: Vec<Segment>, ramp: Option<GlassRamp>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(Error::InvalidSchedule("no segments".into()));
        };
        if first.start_time != 0.0 {
            return Err(Error::InvalidSchedule(
                "first segment must start at t = 0".into(),
            ));
        }
        for (k, seg) in segments.iter().enumerate() {
            let arms = [
                seg.bob.upper,
                seg.bob.lower,
                seg.alice.upper,
                seg.alice.lower,
            ];
            if !seg.start_time.is_finite() || arms.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} has non-finite values"
                )));
            }
            if k > 0 {
                if seg.start_time <= segments[k - 1].start_time {
                    return Err(Error::InvalidSchedule(
                        "segment start times must be strictly increasing".into(),
                    ));
                }
                if arms.iter().any(|a| a.phase_offset != 0.0) {
                    return Err(Error::InvalidSchedule(format!(
                        "segment {k} sets a phase offset; only the first segment may"
                    )));
                }
            }
        }
        if let Some(ramp) = &ramp {
            ramp.validate()?;
        }

        let mut start_phases = Vec::with_capacity(segments.len());
        let mut phases = (first.bob.initial_phase(), first.alice.initial_phase());
        start_phases.push(phases);
        for pair in segments.windows(2) {
            let dt = pair[1].start_time - pair[0].start_time;
            phases.0 += TAU * pair[0].bob.beat_frequency() * dt;
            phases.1 += TAU * pair[0].alice.beat_frequency() * dt;
            start_phases.push(phases);
        }

        Ok(Self {
            segments,
            ramp,
            leakage: 0.0,
            start_phases,
        })
    }

    /// A schedule with one constant segment.
    pub fn constant(bob: SideDrive, alice: SideDrive) -> Self {
        Self::new(vec![Segment::new(0.0, bob, alice)], None)
            .expect("a single segment at t = 0 is always valid")
    }

    /// Appends a frequency toggle at `time`.
    pub fn with_toggle(self, time: f64, bob: SideDrive, alice: SideDrive) -> Result<Self> {
        let mut segments = self.segments;
        segments.push(Segment::new(time, bob, alice));
        let leakage = self.leakage;
        Self::new(segments, self.ramp)?.with_leakage(leakage)
    }

    pub fn with_ramp(self, ramp: GlassRamp) -> Result<Self> {
        let leakage = self.leakage;
        Self::new(self.segments, Some(ramp))?.with_leakage(leakage)
    }

    /// Mixes `leakage · I_α` of the first interferometer into the coupled
    /// outputs, modelling imperfect isolation between the stages.
    pub fn with_leakage(mut self, leakage: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&leakage) {
            return Err(Error::InvalidSchedule(format!(
                "leakage {leakage} outside [0, 1]"
            )));
        }
        self.leakage = leakage;
        Ok(self)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn ramp(&self) -> Option<&GlassRamp> {
        self.ramp.as_ref()
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// Largest inter-arm beat frequency on either side in any segment.
    pub fn max_beat(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| [s.bob.beat_frequency(), s.alice.beat_frequency()])
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    fn segment_index(&self, t: f64) -> usize {
        self.segments
            .partition_point(|s| s.start_time <= t)
            .saturating_sub(1)
    }
}

/// Inter-arm phase (upper − lower) of one side at time `t`, noise excluded.
pub fn phase_at(schedule: &DriveSchedule, side: Side, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::TimeBeforeStart(t));
    }
    let k = schedule.segment_index(t);
    let seg = &schedule.segments[k];
    let start = match side {
        Side::Bob => schedule.start_phases[k].0,
        Side::Alice => schedule.start_phases[k].1,
    };
    let mut phase = start + TAU * seg.side(side).beat_frequency() * (t - seg.start_time);
    if side == Side::Alice {
        if let Some(ramp) = &schedule.ramp {
            phase += ramp.phase_at(t);
        }
    }
    Ok(phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseKind {
    None,
    /// Cumulative Gaussian steps: slow drift between the fringe extremes.
    RandomWalk,
    /// Independent Gaussian offset per sample.
    Gaussian,
}

/// Phase noise added to each side's inter-arm phase.
///
/// One noise stream per side (Bob's `φ`, Alice's `ψ`), each on its own
/// ChaCha stream of `seed`. A random walk starts at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma_per_sample: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma_per_sample: 0.0,
            seed: 0,
        }
    }

    pub fn random_walk(sigma_per_sample: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::RandomWalk,
            sigma_per_sample,
            seed,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.kind == NoiseKind::None || self.sigma_per_sample == 0.0
    }

    pub fn gaussian(sigma_per_sample: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma_per_sample,
            seed,
        }
    }

    /// Independent noise streams for Bob's and Alice's phase.
    pub fn streams(&self) -> (PhaseNoise, PhaseNoise) {
        (
            PhaseNoise::new(self.kind, self.sigma_per_sample, self.seed, 0),
            PhaseNoise::new(self.kind, self.sigma_per_sample, self.seed, 1),
        )
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

/// Seeded phase-noise sequence for one side.
#[derive(Debug, Clone)]
pub struct PhaseNoise {
    rng: ChaCha8Rng,
    kind: NoiseKind,
    sigma: f64,
    position: f64,
}

impl PhaseNoise {
    pub fn new(kind: NoiseKind, sigma: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            kind,
            sigma,
            position: 0.0,
        }
    }

    /// Phase offset for the next sample.
    ///
    /// A random walk returns its current position and then steps, so the
    /// first sample is unperturbed.
    pub fn step(&mut self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::RandomWalk => {
                let current = self.position;
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.position += self.sigma * z;
                current
            }
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.sigma * z
            }
        }
    }
}

/// Sampled detector intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub sample_rate: f64,
    pub t0: f64,
    pub i_a: Vec<f64>,
    pub i_b: Vec<f64>,
    pub i_alpha: Vec<f64>,
    /// Bob's and Alice's inter-arm phase per sample, noise included.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.i_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_a.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.t0) * self.sample_rate).ceil();
        (k.max(0.0) as usize).min(self.len())
    }

    /// Writes `t,I_A,I_B,I_alpha` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"t,I_A,I_B,I_alpha\n")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.time(k),
                self.i_a[k],
                self.i_b[k],
                self.i_alpha[k]
            )?;
        }
        Ok(())
    }
}

/// Samples the coupled interferometer under `schedule`.
///
/// Requires `sample_rate > 4 · max_beat` so every beat is resolved.
pub fn simulate_trace(
    schedule: &DriveSchedule,
    noise: &NoiseModel,
    sample_rate: f64,
    duration: f64,
) -> Result<TimeTrace> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample rate {sample_rate} must be positive"
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration {duration} must be positive"
        )));
    }
    let max_beat = schedule.max_beat();
    if sample_rate <= 4.0 * max_beat {
        return Err(Error::Undersampled {
            sample_rate,
            max_beat,
        });
    }

    let n = ((duration * sample_rate).round() as usize).max(1);
    let (mut walk_phi, mut walk_psi) = noise.streams();
    let leak = schedule.leakage();
    let mut trace = TimeTrace {
        sample_rate,
        t0: 0.0,
        i_a: Vec::with_capacity(n),
        i_b: Vec::with_capacity(n),
        i_alpha: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = k as f64 / sample_rate;
        let phi = phase_at(schedule, Side::Bob, t)? + walk_phi.step();
        let psi = phase_at(schedule, Side::Alice, t)? + walk_psi.step();
        let (mut i_a, mut i_b) = coupled_intensities(phi, psi);
        let (i_alpha, i_beta) = mzi_intensities(phi);
        if leak != 0.0 {
            i_a = (1.0 - leak) * i_a + leak * i_alpha;
            i_b = (1.0 - leak) * i_b + leak * i_beta;
        }
        trace.i_a.push(i_a.clamp(0.0, 1.0));
        trace.i_b.push(i_b.clamp(0.0, 1.0));
        trace.i_alpha.push(i_alpha.clamp(0.0, 1.0));
        trace.phi.push(phi);
        trace.psi.push(psi);
    }
    Ok(trace)
}

/// Strongest non-DC spectral component of a sampled channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    /// Width of one DFT bin, `sample_rate / sample_count`.
    pub resolution: f64,
    pub magnitude: f64,
    /// False when the channel is constant; `frequency` is then 0.
    pub oscillating: bool,
}

/// Frequency of the largest-magnitude non-DC DFT bin of the mean-subtracted
/// channel. Ties go to the lower frequency.
pub fn dominant_frequency(channel: &[f64], sample_rate: f64) -> SpectralPeak {
    let n = channel.len();
    let resolution = if n == 0 { 0.0 } else { sample_rate / n as f64 };
    let flat = SpectralPeak {
        frequency: 0.0,
        resolution,
        magnitude: 0.0,
        oscillating: false,
    };
    if n < 2 {
        return flat;
    }
    let mean = channel.iter().sum::<f64>() / n as f64;
    let spread = channel.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 {
        return flat;
    }

    let mut buffer: Vec<Complex<f64>> = channel
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let mut best_bin = 1;
    let mut best_mag = buffer[1].norm();
    for (bin, z) in buffer.iter().enumerate().take(n / 2 + 1).skip(2) {
        let mag = z.norm();
        if mag > best_mag {
            best_bin = bin;
            best_mag = mag;
        }
    }
    SpectralPeak {
        frequency: best_bin as f64 * resolution,
        resolution,
        magnitude: best_mag,
        oscillating: true,
    }
}

/// Root-mean-square deviation of a series about its mean.
pub fn rms_fluctuation(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Constant `I_A` level after the schedule's last segment boundary.
///
/// The last segment must hold both sides at the same beat frequency, which
/// freezes `φ - ψ` at its value at the switch instant. Leakage background is
/// not included.
pub fn toggle_level(schedule: &DriveSchedule) -> Result<f64> {
    let last = schedule
        .segments()
        .last()
        .expect("schedules always hold a segment");
    let bob = last.bob.beat_frequency();
    let alice = last.alice.beat_frequency();
    if (bob - alice).abs() > 1e-12 {
        return Err(Error::NotUsckdRegime(format!(
            "post-switch beat frequencies differ (Bob {bob} Hz, Alice {alice} Hz)"
        )));
    }
    let t_switch = last.start_time;
    if let Some(ramp) = schedule.ramp() {
        if ramp.end_time() > t_switch {
            return Err(Error::NotUsckdRegime(
                "glass ramp still moving after the switch".into(),
            ));
        }
    }
    let phi = phase_at(schedule, Side::Bob, t_switch)?;
    let psi = phase_at(schedule, Side::Alice, t_switch)?;
    Ok(coupled_intensities(phi, psi).0)
}

/// Mean RMS fluctuation of `I_A` at the half-fringe operating point under a
/// random walk of the given step size, one trace per seed.
pub fn mean_half_fringe_fluctuation(
    sigma_per_sample: f64,
    window: f64,
    sample_rate: f64,
    trial_seeds: &[u64],
) -> Result<f64> {
    let schedule = half_fringe_schedule();
    let mut total = 0.0;
    for &seed in trial_seeds {
        let noise = NoiseModel::random_walk(sigma_per_sample, seed);
        let trace = simulate_trace(&schedule, &noise, sample_rate, window)?;
        total += rms_fluctuation(&trace.i_a);
    }
    Ok(total / trial_seeds.len() as f64)
}

/// Static drive with Bob's phase offset by π/2, so `I_A = 1/2` without noise.
pub fn half_fringe_schedule() -> DriveSchedule {
    let bob = SideDrive::new(
        ArmDrive::new(0.0).with_offset(FRAC_PI_2),
        ArmDrive::new(0.0),
    );
    DriveSchedule::constant(bob, SideDrive::default())
}

/// Trial seeds used by [`calibrate_noise`] for a given master seed.
pub fn calibration_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Finds the random-walk step size giving a mean `I_A` RMS fluctuation of
/// `target` over `window` seconds at the half-fringe operating point.
///
/// The returned model carries `seed`. Targets above what a fully randomized
/// phase can produce (about 0.354) are rejected with the best value reached.
pub fn calibrate_noise(
    target: f64,
    window: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<NoiseModel> {
    if !(target > 0.0 && target <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "noise target {target} outside (0, 0.5]"
        )));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "calibration window {window} must be positive"
        )));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample rate {sample_rate} must be positive"
        )));
    }

    let n = ((window * sample_rate).round() as usize).max(1);
    // Unit-step walk differences per trial; the noisy relative phase at step
    // size σ is σ times these.
    let unit_walks: Vec<Vec<f64>> = calibration_seeds(seed, CALIBRATION_TRIALS)
        .into_iter()
        .map(|s| {
            let (mut wp, mut ws) = NoiseModel::random_walk(1.0, s).streams();
            (0..n).map(|_| wp.step() - ws.step()).collect()
        })
        .collect();
    let fluctuation = |sigma: f64| -> f64 {
        let mut buf = vec![0.0; n];
        let total: f64 = unit_walks
            .iter()
            .map(|walk| {
                for (slot, w) in buf.iter_mut().zip(walk) {
                    *slot = coupled_intensities(FRAC_PI_2 + sigma * w, 0.0).0;
                }
                rms_fluctuation(&buf)
            })
            .sum();
        total / unit_walks.len() as f64
    };

    const SIGMA_CEILING: f64 = 16.0;
    let mut lo = 0.0;
    let mut hi = 1e-4;
    let mut best = 0.0_f64;
    loop {
        let f = fluctuation(hi);
        best = best.max(f);
        if f >= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > SIGMA_CEILING {
            return Err(Error::UnattainableNoiseTarget { target, best });
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f = fluctuation(mid);
        if (f - target).abs() <= 1e-4 * target {
            return Ok(NoiseModel::random_walk(mid, seed));
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(NoiseModel::random_walk(0.5 * (lo + hi), seed))
}
