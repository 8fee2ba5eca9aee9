//! Single, doubly coupled and chained Mach-Zehnder interferometers.
//!
//! A single MZI is `[BS][φ][BS]`. The coupled system feeds the first MZI's
//! output ports (`E_α`, `E_β`) straight into a second MZI driven by Alice's
//! phase `ψ`, giving output ports `E_A`, `E_B`. With unit input on the upper
//! port the coupled outputs depend only on `φ - ψ`:
//!
//! ```text
//! I_A = cos²((φ - ψ) / 2)      I_B = sin²((φ - ψ) / 2)
//! ```
//!
//! so matched bases return all light to port A and mismatched bases send it
//! to port B.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{apply, compose, make_bs, make_phase, TwoModeField, TwoPortOperator};

/// Binary phase basis, `0` or `π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseBasis {
    Zero,
    Pi,
}

impl PhaseBasis {
    pub const ALL: [PhaseBasis; 2] = [PhaseBasis::Zero, PhaseBasis::Pi];

    pub fn to_radians(self) -> f64 {
        match self {
            PhaseBasis::Zero => 0.0,
            PhaseBasis::Pi => PI,
        }
    }

    /// `Zero -> 0`, `Pi -> 1`.
    pub fn bit(self) -> u8 {
        match self {
            PhaseBasis::Zero => 0,
            PhaseBasis::Pi => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            PhaseBasis::Pi
        } else {
            PhaseBasis::Zero
        }
    }
}

impl fmt::Display for PhaseBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseBasis::Zero => f.write_str("0"),
            PhaseBasis::Pi => f.write_str("pi"),
        }
    }
}

/// Phases of the upper and lower arm of one interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePair {
    pub upper: f64,
    pub lower: f64,
}

impl PhasePair {
    pub fn new(upper: f64, lower: f64) -> Self {
        Self { upper, lower }
    }

    /// The inter-arm phase `upper - lower`, the only quantity intensities see.
    pub fn difference(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn shifter(&self) -> TwoPortOperator {
        make_phase(self.upper, self.lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    A,
    B,
}

/// Output of the coupled interferometer for a pair of bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortOutcome {
    pub bright_port: Port,
    pub i_a: f64,
    pub i_b: f64,
}

/// `[BS][φ][BS]` for inter-arm phase `phi`.
pub fn mzi_transfer(phi: f64) -> TwoPortOperator {
    compose(&make_bs(), &compose(&make_phase(0.0, phi), &make_bs()))
}

/// `(I_α, I_β) = ((1 - cos φ)/2, (1 + cos φ)/2)` for unit input on the upper port.
pub fn mzi_intensities(phi: f64) -> (f64, f64) {
    let c = phi.cos();
    (0.5 * (1.0 - c), 0.5 * (1.0 + c))
}

/// Two interferometers in series: Bob's (`phi`) followed by Alice's (`psi`).
pub fn coupled_transfer(phi: f64, psi: f64) -> TwoPortOperator {
    compose(&mzi_transfer(psi), &mzi_transfer(phi))
}

/// `(I_A, I_B)` of the coupled system for unit input on the upper port.
pub fn coupled_intensities(phi: f64, psi: f64) -> (f64, f64) {
    let half = 0.5 * (phi - psi);
    let (s, c) = half.sin_cos();
    (c * c, s * s)
}

/// Outcome for a pair of binary bases. Matched bases light port A.
pub fn basis_outcome(phi: PhaseBasis, psi: PhaseBasis) -> PortOutcome {
    let (i_a, i_b) = coupled_intensities(phi.to_radians(), psi.to_radians());
    let bright_port = if i_a > i_b { Port::A } else { Port::B };
    PortOutcome {
        bright_port,
        i_a,
        i_b,
    }
}

/// `n` interferometer stages in series, `stage_phases[0]` met first.
pub fn chain_transfer(stage_phases: &[f64]) -> Result<TwoPortOperator> {
    if stage_phases.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok(stage_phases
        .iter()
        .fold(TwoPortOperator::identity(), |acc, &theta| {
            compose(&mzi_transfer(theta), &acc)
        }))
}

/// Stage phases `[φ, -φ, φ, -φ, ...]` of length `n`.
pub fn alternating_phases(phi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k % 2 == 0 { phi } else { -phi })
        .collect()
}

/// Upper-port intensity of an `n`-stage alternating chain driven by `phi`.
pub fn alternating_chain_intensity(phi: f64, n: usize) -> Result<f64> {
    let op = chain_transfer(&alternating_phases(phi, n))?;
    Ok(apply(&op, &TwoModeField::input()).a.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub phase: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Fringe extrema of a 2π-periodic response and their spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSpacing {
    pub extrema: Vec<Extremum>,
    pub mean_spacing: Option<f64>,
    pub min_spacing: Option<f64>,
    pub max_spacing: Option<f64>,
}

/// Sweeps a 2π-periodic response over `[0, 2π)` and locates its local extrema.
///
/// Successive differences within `tol` are treated as flat. A flat run between
/// opposite slopes is reported at its midpoint; otherwise the extremum is
/// refined by a parabola through the three neighbouring samples.
pub fn measure_fringe_spacing<F>(response: F, samples: usize, tol: f64) -> FringeSpacing
where
    F: Fn(f64) -> f64,
{
    let empty = FringeSpacing {
        extrema: Vec::new(),
        mean_spacing: None,
        min_spacing: None,
        max_spacing: None,
    };
    if samples < 3 {
        return empty;
    }
    let step = TAU / samples as f64;
    let values: Vec<f64> = (0..samples).map(|k| response(k as f64 * step)).collect();
    let at = |k: usize| values[k % samples];
    let slope = |k: usize| {
        let d = at(k + 1) - at(k);
        if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        }
    };

    let Some(start) = (0..samples).find(|&k| slope(k) != 0) else {
        return empty;
    };

    let mut extrema = Vec::new();
    let mut last_sign = slope(start);
    let mut last_nonflat = start;
    for offset in 1..=samples {
        let k = start + offset;
        let s = slope(k);
        if s == 0 {
            continue;
        }
        if s != last_sign {
            // Slope changed between segment `last_nonflat` and segment `k`;
            // the turning samples run from last_nonflat + 1 to k.
            let first = last_nonflat + 1;
            let index = if first == k {
                let (l, m, r) = (at(k + samples - 1), at(k), at(k + 1));
                let denom = l - 2.0 * m + r;
                let delta = if denom.abs() > 0.0 {
                    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                k as f64 + delta
            } else {
                0.5 * (first + k) as f64
            };
            let phase = (index * step).rem_euclid(TAU);
            let kind = if last_sign > 0 {
                ExtremumKind::Maximum
            } else {
                ExtremumKind::Minimum
            };
            extrema.push(Extremum {
                phase,
                value: at(k),
                kind,
            });
        }
        last_sign = s;
        last_nonflat = k;
    }

    extrema.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    if extrema.len() < 2 {
        return FringeSpacing { extrema, ..empty };
    }
    let gaps: Vec<f64> = extrema
        .iter()
        .zip(extrema.iter().cycle().skip(1))
        .map(|(a, b)| (b.phase - a.phase).rem_euclid(TAU))
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    FringeSpacing {
        extrema,
        mean_spacing: Some(mean),
        min_spacing: Some(min),
        max_spacing: Some(max),
    }
}

/// Extremum spacing of the `n`-stage alternating chain's upper port.
pub fn chain_fringe_spacing(n: usize, samples: usize) -> Result<FringeSpacing> {
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    Ok(measure_fringe_spacing(
        |phi| alternating_chain_intensity(phi, n).unwrap_or(f64::NAN),
        samples,
        1e-9,
    ))
}
