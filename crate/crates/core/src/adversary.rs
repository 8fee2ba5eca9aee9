//! Beam-splitter tap attack on the two transmission lines.
//!
//! Eve inserts a partially reflecting splitter into each line (`e1` upper,
//! `e2` lower) and diverts a fraction `r` of the intensity. On the outbound
//! pass the lines carry `[φ][BS](1, 0)`, whose per-line intensities are
//! `1/2` whatever `φ` is, so an intensity-only eavesdropper learns nothing.
//! An eavesdropper who interferes her two tapped beams on her own splitter
//! does see the relative phase; both apparatus are modelled and reported.
//!
//! Guess accuracies come from a Bayes decision table built by enumerating
//! the four equiprobable basis pairs of the noiseless model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drive::NoiseModel;
use crate::error::{Error, Result};
use crate::field::{apply, compose, make_bs, make_phase, TwoModeField};
use crate::interferometer::PhaseBasis;
use crate::protocol::{
    key_bit, run_session_with_transmission, DetectorConfig, SessionResult, Transmission,
};

/// Grouping tolerance for noiseless observations.
pub const OBSERVATION_QUANTUM: f64 = 1e-9;

const TIE_STREAM: u64 = 0xe5e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TapPlacement {
    OutboundOnly,
    ReturnOnly,
    BothPasses,
}

impl TapPlacement {
    pub fn taps(self, pass: Pass) -> bool {
        matches!(
            (self, pass),
            (TapPlacement::BothPasses, _)
                | (TapPlacement::OutboundOnly, Pass::Outbound)
                | (TapPlacement::ReturnOnly, Pass::Return)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapConfig {
    pub ratio: f64,
    pub placement: TapPlacement,
}

impl TapConfig {
    pub fn new(ratio: f64, placement: TapPlacement) -> Result<Self> {
        check_ratio(ratio)?;
        Ok(Self { ratio, placement })
    }

    pub fn none() -> Self {
        Self {
            ratio: 0.0,
            placement: TapPlacement::BothPasses,
        }
    }

    /// Intensity fraction diverted on `pass`.
    pub fn ratio_on(&self, pass: Pass) -> f64 {
        if self.placement.taps(pass) {
            self.ratio
        } else {
            0.0
        }
    }

    /// Fraction of the input reaching Alice's and Bob's detectors.
    pub fn transmission(&self) -> Transmission {
        let outbound = 1.0 - self.ratio_on(Pass::Outbound);
        let back = 1.0 - self.ratio_on(Pass::Return);
        Transmission {
            alice: outbound,
            bob: outbound * back,
        }
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if (0.0..1.0).contains(&ratio) {
        Ok(())
    } else {
        Err(Error::InvalidTapRatio(ratio))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pass {
    Outbound,
    Return,
}

/// Splits each line independently: `(eve, through) = (√r·f, √(1−r)·f)`.
pub fn tap(field: &TwoModeField, ratio: f64) -> Result<(TwoModeField, TwoModeField)> {
    check_ratio(ratio)?;
    Ok((
        field.attenuate(ratio.sqrt()),
        field.attenuate((1.0 - ratio).sqrt()),
    ))
}

/// Field on the two lines after Bob's splitter and phase shifters.
pub fn outbound_field(phi: f64) -> TwoModeField {
    apply(
        &compose(&make_phase(0.0, phi), &make_bs()),
        &TwoModeField::input(),
    )
}

/// Field Alice sends back: her splitter, re-injection through it, then `[ψ]`.
pub fn return_field(received: &TwoModeField, psi: f64) -> TwoModeField {
    let bs = make_bs();
    let at_alice = apply(&bs, received);
    apply(&compose(&make_phase(0.0, psi), &bs), &at_alice)
}

/// Untapped line field on the given pass.
pub fn channel_fields(pass: Pass, phi: f64, psi: f64) -> TwoModeField {
    let out = outbound_field(phi);
    match pass {
        Pass::Outbound => out,
        Pass::Return => return_field(&out, psi),
    }
}

/// Line fields through a full round trip with taps in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripFields {
    pub outbound: TwoModeField,
    pub outbound_tapped: TwoModeField,
    /// `(E_α, E_β)` at Alice's detectors.
    pub at_alice: TwoModeField,
    pub returned: TwoModeField,
    pub return_tapped: TwoModeField,
    /// `(E_A, E_B)` at Bob's detectors.
    pub at_bob: TwoModeField,
}

pub fn round_trip(phi: f64, psi: f64, tap_config: &TapConfig) -> Result<RoundTripFields> {
    let bs = make_bs();
    let outbound = outbound_field(phi);
    let (outbound_tapped, through) = tap(&outbound, tap_config.ratio_on(Pass::Outbound))?;
    let at_alice = apply(&bs, &through);
    let returned = apply(&compose(&make_phase(0.0, psi), &bs), &at_alice);
    let (return_tapped, back) = tap(&returned, tap_config.ratio_on(Pass::Return))?;
    let at_bob = apply(&bs, &back);
    Ok(RoundTripFields {
        outbound,
        outbound_tapped,
        at_alice,
        returned,
        return_tapped,
        at_bob,
    })
}

/// Eve's measurement apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EveKind {
    /// Separate detectors on `e1` and `e2`.
    IntensityOnly,
    /// Tapped beams interfered on Eve's own 50/50 splitter.
    CoherentCombine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveObservation {
    pub pass: Pass,
    pub i_e1: f64,
    pub i_e2: f64,
    pub coherent_ports: Option<(f64, f64)>,
}

impl EveObservation {
    pub fn from_tapped(pass: Pass, tapped: &TwoModeField, kind: EveKind) -> Self {
        let (i_e1, i_e2) = tapped.intensities();
        let coherent_ports = match kind {
            EveKind::IntensityOnly => None,
            EveKind::CoherentCombine => Some(apply(&make_bs(), tapped).intensities()),
        };
        Self {
            pass,
            i_e1,
            i_e2,
            coherent_ports,
        }
    }

    fn push_features(&self, out: &mut Vec<f64>) {
        out.push(self.i_e1);
        out.push(self.i_e2);
        if let Some((c1, c2)) = self.coherent_ports {
            out.push(c1);
            out.push(c2);
        }
    }
}

/// Eve's observations of one round, one entry per tapped pass.
pub fn observe_round(
    fields: &RoundTripFields,
    tap_config: &TapConfig,
    kind: EveKind,
) -> Vec<EveObservation> {
    let mut obs = Vec::with_capacity(2);
    if tap_config.placement.taps(Pass::Outbound) {
        obs.push(EveObservation::from_tapped(
            Pass::Outbound,
            &fields.outbound_tapped,
            kind,
        ));
    }
    if tap_config.placement.taps(Pass::Return) {
        obs.push(EveObservation::from_tapped(
            Pass::Return,
            &fields.return_tapped,
            kind,
        ));
    }
    obs
}

fn features(observations: &[EveObservation]) -> Vec<f64> {
    let mut out = Vec::with_capacity(8);
    for o in observations {
        o.push_features(&mut out);
    }
    out
}

fn quantize(features: &[f64]) -> Vec<i64> {
    features
        .iter()
        .map(|x| (x / OBSERVATION_QUANTUM).round() as i64)
        .collect()
}

/// Eve's guess for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guess {
    pub phi: PhaseBasis,
    pub psi: PhaseBasis,
    pub key_bit: u8,
}

/// One distinct noiseless observation and the basis pairs that produce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub features: Vec<f64>,
    pub cases: Vec<(PhaseBasis, PhaseBasis)>,
}

impl DecisionEntry {
    fn candidates<T: Ord + Copy>(&self, value: impl Fn(PhaseBasis, PhaseBasis) -> T) -> Vec<T> {
        let mut counts: BTreeMap<T, usize> = BTreeMap::new();
        for &(phi, psi) in &self.cases {
            *counts.entry(value(phi, psi)).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        counts
            .into_iter()
            .filter(|&(_, c)| c == best)
            .map(|(v, _)| v)
            .collect()
    }

    fn best_count<T: Ord + Copy>(&self, value: impl Fn(PhaseBasis, PhaseBasis) -> T) -> usize {
        let mut counts: BTreeMap<T, usize> = BTreeMap::new();
        for &(phi, psi) in &self.cases {
            *counts.entry(value(phi, psi)).or_default() += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(options: &[T], rng: &mut R) -> T {
    if options.len() == 1 {
        options[0]
    } else {
        options[rng.random_range(0..options.len())]
    }
}

/// Eve's apparatus together with her Bayes decision table for a tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveStrategy {
    pub kind: EveKind,
    pub tap: TapConfig,
    pub table: Vec<DecisionEntry>,
}

impl EveStrategy {
    /// Builds the optimal decision table by enumerating the four basis pairs.
    pub fn bayes(kind: EveKind, tap_config: &TapConfig) -> Result<Self> {
        check_ratio(tap_config.ratio)?;
        let mut groups: BTreeMap<Vec<i64>, DecisionEntry> = BTreeMap::new();
        for phi in PhaseBasis::ALL {
            for psi in PhaseBasis::ALL {
                let fields = round_trip(phi.to_radians(), psi.to_radians(), tap_config)?;
                let feats = features(&observe_round(&fields, tap_config, kind));
                groups
                    .entry(quantize(&feats))
                    .or_insert_with(|| DecisionEntry {
                        features: feats,
                        cases: Vec::new(),
                    })
                    .cases
                    .push((phi, psi));
            }
        }
        Ok(Self {
            kind,
            tap: *tap_config,
            table: groups.into_values().collect(),
        })
    }

    /// Entry nearest to the observed features.
    fn lookup(&self, feats: &[f64]) -> &DecisionEntry {
        let key = quantize(feats);
        self.table
            .iter()
            .find(|e| quantize(&e.features) == key)
            .unwrap_or_else(|| {
                self.table
                    .iter()
                    .min_by(|a, b| {
                        distance(&a.features, feats).total_cmp(&distance(&b.features, feats))
                    })
                    .expect("decision tables hold at least one entry")
            })
    }

    /// Guess for the given observations; posterior ties are broken with `rng`.
    pub fn decide<R: Rng + ?Sized>(&self, observations: &[EveObservation], rng: &mut R) -> Guess {
        self.decide_features(&features(observations), rng)
    }

    fn decide_features<R: Rng + ?Sized>(&self, feats: &[f64], rng: &mut R) -> Guess {
        let entry = self.lookup(feats);
        Guess {
            phi: pick(&entry.candidates(|phi, _| phi), rng),
            psi: pick(&entry.candidates(|_, psi| psi), rng),
            key_bit: pick(&entry.candidates(key_bit), rng),
        }
    }

    /// Closed-form Bayes accuracies `(φ, key bit)` over equiprobable pairs.
    pub fn exact_accuracy(&self) -> (f64, f64) {
        let phi: usize = self.table.iter().map(|e| e.best_count(|phi, _| phi)).sum();
        let key: usize = self.table.iter().map(|e| e.best_count(key_bit)).sum();
        (phi as f64 / 4.0, key as f64 / 4.0)
    }

    /// `I(key bit; observation)` in bits over the four equiprobable pairs.
    pub fn key_mutual_information(&self) -> f64 {
        let mut joint: BTreeMap<(usize, u8), f64> = BTreeMap::new();
        let mut p_obs = vec![0.0; self.table.len()];
        let mut p_key = [0.0; 2];
        for (k, entry) in self.table.iter().enumerate() {
            for &(phi, psi) in &entry.cases {
                let bit = key_bit(phi, psi);
                *joint.entry((k, bit)).or_default() += 0.25;
                p_obs[k] += 0.25;
                p_key[bit as usize] += 0.25;
            }
        }
        joint
            .into_iter()
            .map(|((k, bit), p)| p * (p / (p_obs[k] * p_key[bit as usize])).log2())
            .sum::<f64>()
            .max(0.0)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccuracyMode {
    ExactEnumeration,
    MonteCarlo { n: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveAccuracy {
    pub accuracy_phi: f64,
    pub accuracy_key: f64,
}

/// Accuracy of `strategy` against noiseless rounds tapped by `tap_config`.
///
/// Exact mode evaluates the Bayes-optimal rule for `tap_config` in closed
/// form; Monte-Carlo mode applies the strategy's table to sampled rounds.
pub fn eve_accuracy(
    strategy: &EveStrategy,
    tap_config: &TapConfig,
    mode: AccuracyMode,
) -> Result<EveAccuracy> {
    match mode {
        AccuracyMode::ExactEnumeration => {
            let rule = if strategy.tap == *tap_config {
                strategy.clone()
            } else {
                EveStrategy::bayes(strategy.kind, tap_config)?
            };
            let (accuracy_phi, accuracy_key) = rule.exact_accuracy();
            Ok(EveAccuracy {
                accuracy_phi,
                accuracy_key,
            })
        }
        AccuracyMode::MonteCarlo { n, seed } => {
            monte_carlo_accuracy(strategy.kind, tap_config, n, seed, |feats, rng| {
                strategy.decide_features(feats, rng)
            })
        }
    }
}

/// Monte-Carlo accuracy of an arbitrary decision rule over uniformly drawn
/// basis pairs. The rule sees Eve's flattened observation features.
pub fn monte_carlo_accuracy<F>(
    kind: EveKind,
    tap_config: &TapConfig,
    n: usize,
    seed: u64,
    mut rule: F,
) -> Result<EveAccuracy>
where
    F: FnMut(&[f64], &mut ChaCha8Rng) -> Guess,
{
    if n == 0 {
        return Err(Error::InvalidArgument("Monte-Carlo needs n >= 1".into()));
    }
    // Observations of the four noiseless cases, precomputed.
    let mut cases = Vec::with_capacity(4);
    for phi in PhaseBasis::ALL {
        for psi in PhaseBasis::ALL {
            let fields = round_trip(phi.to_radians(), psi.to_radians(), tap_config)?;
            cases.push((
                (phi, psi),
                features(&observe_round(&fields, tap_config, kind)),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tie_rng = ChaCha8Rng::seed_from_u64(seed);
    tie_rng.set_stream(TIE_STREAM);
    let (mut hits_phi, mut hits_key) = (0usize, 0usize);
    for _ in 0..n {
        let ((phi, psi), feats) = &cases[rng.random_range(0..4)];
        let guess = rule(feats, &mut tie_rng);
        hits_phi += usize::from(guess.phi == *phi);
        hits_key += usize::from(guess.key_bit == key_bit(*phi, *psi));
    }
    Ok(EveAccuracy {
        accuracy_phi: hits_phi as f64 / n as f64,
        accuracy_key: hits_key as f64 / n as f64,
    })
}

/// Exact or sampled accuracies plus the key mutual information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    pub tap: TapConfig,
    pub strategy: EveKind,
    pub mode: AccuracyMode,
    pub accuracy_phi: f64,
    pub accuracy_key: f64,
    pub mutual_information_bits: f64,
}

pub fn eve_report(kind: EveKind, tap_config: &TapConfig, mode: AccuracyMode) -> Result<EveReport> {
    let strategy = EveStrategy::bayes(kind, tap_config)?;
    let acc = eve_accuracy(&strategy, tap_config, mode)?;
    Ok(EveReport {
        tap: *tap_config,
        strategy: kind,
        mode,
        accuracy_phi: acc.accuracy_phi,
        accuracy_key: acc.accuracy_key,
        mutual_information_bits: strategy.key_mutual_information(),
    })
}

pub fn mutual_information(kind: EveKind, tap_config: &TapConfig) -> Result<f64> {
    Ok(EveStrategy::bayes(kind, tap_config)?.key_mutual_information())
}

/// Eve's per-round log during an attacked session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveRound {
    pub index: usize,
    pub observations: Vec<EveObservation>,
    pub guess: Guess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveResult {
    pub rounds: Vec<EveRound>,
    /// Fraction of rounds where Eve's `φ` guess was right.
    pub accuracy_phi: f64,
    /// Fraction of rounds where Eve's key-bit guess matched `key_bit(φ, ψ)`.
    pub accuracy_key: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackedSession {
    pub session: SessionResult,
    pub eve: EveResult,
}

/// Key session with Eve tapping the lines.
///
/// Bases and channel noise are drawn exactly as in
/// [`run_session`](crate::protocol::run_session), so a zero tap ratio
/// reproduces it. Legitimate detectors see the tap loss.
pub fn run_attacked_session(
    n_rounds: usize,
    tap_config: &TapConfig,
    strategy: &EveStrategy,
    noise: &NoiseModel,
    detectors: &DetectorConfig,
    seed: u64,
) -> Result<AttackedSession> {
    check_ratio(tap_config.ratio)?;
    let session =
        run_session_with_transmission(n_rounds, noise, detectors, seed, tap_config.transmission())?;

    let mut tie_rng = ChaCha8Rng::seed_from_u64(seed);
    tie_rng.set_stream(TIE_STREAM);
    let mut rounds = Vec::with_capacity(n_rounds);
    let (mut hits_phi, mut hits_key) = (0usize, 0usize);
    for r in &session.rounds {
        let fields = round_trip(r.phi_actual, r.psi_actual, tap_config)?;
        let observations = observe_round(&fields, tap_config, strategy.kind);
        let guess = strategy.decide(&observations, &mut tie_rng);
        hits_phi += usize::from(guess.phi == r.phi);
        hits_key += usize::from(guess.key_bit == key_bit(r.phi, r.psi));
        rounds.push(EveRound {
            index: r.index,
            observations,
            guess,
        });
    }
    let n = n_rounds as f64;
    Ok(AttackedSession {
        session,
        eve: EveResult {
            rounds,
            accuracy_phi: hits_phi as f64 / n,
            accuracy_key: hits_key as f64 / n,
        },
    })
}
