//! Round-trip key distribution over the coupled interferometer.
//!
//! Each round Bob picks `φ ∈ {0, π}` and sends light through his
//! interferometer. Alice reads `φ` off her detectors (`I_α` bright means
//! `π`), sets `ψ ∈ {0, π}` and returns the light. Bob's port A is bright
//! exactly when `φ = ψ`. Both sides therefore know whether the bases
//! matched and take that as the key bit: 1 for a match, 0 otherwise.
//! No basis sifting is exchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drive::NoiseModel;
use crate::error::{Error, Result};
use crate::interferometer::{coupled_intensities, mzi_intensities, PhaseBasis};

/// Analog detector discrimination.
///
/// Readings at or above `threshold + erasure_band` are bright, at or below
/// `threshold - erasure_band` dark, anything between is erased.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold: f64,
    pub erasure_band: f64,
}

impl DetectorConfig {
    pub fn new(threshold: f64, erasure_band: f64) -> Result<Self> {
        let cfg = Self {
            threshold,
            erasure_band,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidDetector(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        let limit = self.threshold.min(1.0 - self.threshold);
        if !(self.erasure_band >= 0.0 && self.erasure_band < limit) {
            return Err(Error::InvalidDetector(format!(
                "erasure band {} outside [0, {limit})",
                self.erasure_band
            )));
        }
        Ok(())
    }

    /// `Some(true)` for bright, `Some(false)` for dark, `None` for erasure.
    pub fn classify(&self, intensity: f64) -> Option<bool> {
        if intensity >= self.threshold + self.erasure_band {
            Some(true)
        } else if intensity <= self.threshold - self.erasure_band {
            Some(false)
        } else {
            None
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            erasure_band: 0.1,
        }
    }
}

pub fn bob_prepare<R: Rng + ?Sized>(rng: &mut R) -> PhaseBasis {
    PhaseBasis::from_bit(rng.random::<bool>())
}

/// Alice's reading of Bob's basis from the first interferometer's `I_α`.
pub fn alice_measure(phi_actual: f64, detectors: &DetectorConfig) -> Option<PhaseBasis> {
    alice_decide(mzi_intensities(phi_actual).0, detectors)
}

fn alice_decide(i_alpha: f64, detectors: &DetectorConfig) -> Option<PhaseBasis> {
    detectors.classify(i_alpha).map(PhaseBasis::from_bit)
}

/// Bob's check whether Alice's basis matched his, from port A.
pub fn bob_verify(phi: PhaseBasis, psi_actual: f64, detectors: &DetectorConfig) -> Option<bool> {
    detectors.classify(coupled_intensities(phi.to_radians(), psi_actual).0)
}

/// XNOR of the basis bits: 1 when the bases match.
pub fn key_bit(phi: PhaseBasis, psi: PhaseBasis) -> u8 {
    u8::from(phi == psi)
}

/// Transcript of one key round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub phi: PhaseBasis,
    pub psi: PhaseBasis,
    /// Channel phase noise added to each side.
    pub noise_phi: f64,
    pub noise_psi: f64,
    pub phi_actual: f64,
    pub psi_actual: f64,
    /// `(I_α, I_β)` seen by Alice.
    pub alice_intensities: (f64, f64),
    /// `(I_A, I_B)` seen by Bob.
    pub bob_intensities: (f64, f64),
    pub alice_inferred_phi: Option<PhaseBasis>,
    pub bob_inferred_match: Option<bool>,
    pub alice_bit: Option<u8>,
    pub bob_bit: Option<u8>,
    /// The ideal bit `key_bit(φ, ψ)`, or `None` when the round was erased.
    pub key_bit: Option<u8>,
}

impl RoundRecord {
    pub fn is_erased(&self) -> bool {
        self.alice_bit.is_none() || self.bob_bit.is_none()
    }
}

/// Fraction of input intensity surviving to each party's detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub alice: f64,
    pub bob: f64,
}

impl Transmission {
    pub const LOSSLESS: Transmission = Transmission {
        alice: 1.0,
        bob: 1.0,
    };
}

/// Evaluates one round from its bases and channel noise.
pub fn evaluate_round(
    index: usize,
    phi: PhaseBasis,
    psi: PhaseBasis,
    noise_phi: f64,
    noise_psi: f64,
    detectors: &DetectorConfig,
    transmission: Transmission,
) -> RoundRecord {
    let phi_actual = phi.to_radians() + noise_phi;
    let psi_actual = psi.to_radians() + noise_psi;

    let (i_alpha, i_beta) = mzi_intensities(phi_actual);
    let alice_intensities = (transmission.alice * i_alpha, transmission.alice * i_beta);
    let alice_inferred_phi = alice_decide(alice_intensities.0, detectors);
    let alice_bit = alice_inferred_phi.map(|inferred| key_bit(inferred, psi));

    let (i_a, i_b) = coupled_intensities(phi_actual, psi_actual);
    let bob_intensities = (transmission.bob * i_a, transmission.bob * i_b);
    let bob_inferred_match = detectors.classify(bob_intensities.0);
    let bob_bit = bob_inferred_match.map(u8::from);

    let kept = alice_bit.is_some() && bob_bit.is_some();
    RoundRecord {
        index,
        phi,
        psi,
        noise_phi,
        noise_psi,
        phi_actual,
        psi_actual,
        alice_intensities,
        bob_intensities,
        alice_inferred_phi,
        bob_inferred_match,
        alice_bit,
        bob_bit,
        key_bit: kept.then(|| key_bit(phi, psi)),
    }
}

/// Recomputes a lossless round from its logged bases and noise.
pub fn replay_round(record: &RoundRecord, detectors: &DetectorConfig) -> RoundRecord {
    evaluate_round(
        record.index,
        record.phi,
        record.psi,
        record.noise_phi,
        record.noise_psi,
        detectors,
        Transmission::LOSSLESS,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub rounds: Vec<RoundRecord>,
    pub bob_key: Vec<u8>,
    pub alice_key: Vec<u8>,
    pub erasure_count: usize,
    pub mismatches: usize,
    pub bit_error_rate: f64,
}

impl SessionResult {
    pub fn from_rounds(rounds: Vec<RoundRecord>) -> Self {
        let mut bob_key = Vec::new();
        let mut alice_key = Vec::new();
        let mut erasure_count = 0;
        for r in &rounds {
            match (r.alice_bit, r.bob_bit) {
                (Some(a), Some(b)) => {
                    alice_key.push(a);
                    bob_key.push(b);
                }
                _ => erasure_count += 1,
            }
        }
        let mismatches = alice_key
            .iter()
            .zip(&bob_key)
            .filter(|(a, b)| a != b)
            .count();
        let bit_error_rate = if bob_key.is_empty() {
            0.0
        } else {
            mismatches as f64 / bob_key.len() as f64
        };
        Self {
            rounds,
            bob_key,
            alice_key,
            erasure_count,
            mismatches,
            bit_error_rate,
        }
    }

    pub fn keys_agree(&self) -> bool {
        self.bob_key == self.alice_key
    }
}

/// Renders key bits as a `"0"`/`"1"` string.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}

/// Basis draws for a session: Bob's `φ` then Alice's `ψ` for each round.
fn draw_bases(n_rounds: usize, seed: u64) -> Vec<(PhaseBasis, PhaseBasis)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_rounds)
        .map(|_| {
            let phi = bob_prepare(&mut rng);
            let psi = PhaseBasis::from_bit(rng.random::<bool>());
            (phi, psi)
        })
        .collect()
}

/// Runs `n_rounds` of key distribution.
///
/// Basis choices come from `seed`; channel noise comes from `noise` and is
/// stepped once per round on each side.
pub fn run_session(
    n_rounds: usize,
    noise: &NoiseModel,
    detectors: &DetectorConfig,
    seed: u64,
) -> Result<SessionResult> {
    run_session_with_transmission(n_rounds, noise, detectors, seed, Transmission::LOSSLESS)
}

pub(crate) fn run_session_with_transmission(
    n_rounds: usize,
    noise: &NoiseModel,
    detectors: &DetectorConfig,
    seed: u64,
    transmission: Transmission,
) -> Result<SessionResult> {
    if n_rounds == 0 {
        return Err(Error::InvalidArgument("n_rounds must be at least 1".into()));
    }
    detectors.validate()?;
    let (mut noise_phi, mut noise_psi) = noise.streams();
    let rounds = draw_bases(n_rounds, seed)
        .into_iter()
        .enumerate()
        .map(|(index, (phi, psi))| {
            let (e_phi, e_psi) = (noise_phi.step(), noise_psi.step());
            evaluate_round(index, phi, psi, e_phi, e_psi, detectors, transmission)
        })
        .collect();
    Ok(SessionResult::from_rounds(rounds))
}
