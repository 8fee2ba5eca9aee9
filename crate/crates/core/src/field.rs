//! Two-mode complex field algebra.
//!
//! Every optical element in the coupled interferometer acts on a pair of
//! spatial modes (upper and lower path). Fields are pairs of complex
//! amplitudes and elements are 2×2 complex matrices. Input intensity is
//! normalized to 1 throughout, so all intensities are fractions of `I_0`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex field amplitude.
pub type ComplexAmp = Complex64;

const ZERO: ComplexAmp = ComplexAmp::new(0.0, 0.0);
const ONE: ComplexAmp = ComplexAmp::new(1.0, 0.0);

/// Amplitudes on the upper (`a`) and lower (`b`) path or port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeField {
    pub a: ComplexAmp,
    pub b: ComplexAmp,
}

impl TwoModeField {
    pub const fn new(a: ComplexAmp, b: ComplexAmp) -> Self {
        Self { a, b }
    }

    /// Unit-intensity light injected into the upper port only, `(E_0, 0)`.
    pub const fn input() -> Self {
        Self { a: ONE, b: ZERO }
    }

    pub const fn zero() -> Self {
        Self { a: ZERO, b: ZERO }
    }

    /// Per-mode intensities `(|a|², |b|²)`.
    pub fn intensities(&self) -> (f64, f64) {
        (self.a.norm_sqr(), self.b.norm_sqr())
    }

    pub fn total_intensity(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// Multiplies both modes by the same complex factor.
    pub fn scale(&self, factor: ComplexAmp) -> Self {
        Self {
            a: self.a * factor,
            b: self.b * factor,
        }
    }

    /// Multiplies both modes by a real amplitude factor.
    pub fn attenuate(&self, amplitude: f64) -> Self {
        Self {
            a: self.a * amplitude,
            b: self.b * amplitude,
        }
    }

    /// Relative phase `arg(b) - arg(a)`, or `None` if either mode is dark.
    pub fn relative_phase(&self) -> Option<f64> {
        if self.a.norm_sqr() == 0.0 || self.b.norm_sqr() == 0.0 {
            return None;
        }
        Some((self.b * self.a.conj()).arg())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

/// Free-function form of [`TwoModeField::intensities`].
pub fn intensities(field: &TwoModeField) -> (f64, f64) {
    field.intensities()
}

/// A 2×2 complex operator acting on a [`TwoModeField`].
///
/// Stored row-major: `m12` couples the lower input into the upper output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortOperator {
    pub m11: ComplexAmp,
    pub m12: ComplexAmp,
    pub m21: ComplexAmp,
    pub m22: ComplexAmp,
}

impl TwoPortOperator {
    pub const fn new(m11: ComplexAmp, m12: ComplexAmp, m21: ComplexAmp, m22: ComplexAmp) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m11.conj(),
            self.m21.conj(),
            self.m12.conj(),
            self.m22.conj(),
        )
    }

    pub fn scale(&self, factor: ComplexAmp) -> Self {
        Self::new(
            self.m11 * factor,
            self.m12 * factor,
            self.m21 * factor,
            self.m22 * factor,
        )
    }

    pub fn entries(&self) -> [ComplexAmp; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    pub fn determinant(&self) -> ComplexAmp {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation of `M·M†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        compose(self, &self.adjoint()).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Entrywise distance to `other` after removing the best global phase.
    ///
    /// The phase is taken from the largest entry of `self`, which is the
    /// numerically stable choice for 2×2 unitaries.
    pub fn global_phase_distance(&self, other: &Self) -> f64 {
        let ours = self.entries();
        let theirs = other.entries();
        let pivot = (0..4)
            .max_by(|&i, &j| ours[i].norm_sqr().total_cmp(&ours[j].norm_sqr()))
            .unwrap_or(0);
        let (p, q) = (ours[pivot], theirs[pivot]);
        if p.norm_sqr() == 0.0 || q.norm_sqr() == 0.0 {
            return self.max_abs_diff(other);
        }
        let align = ComplexAmp::from_polar(1.0, (p * q.conj()).arg());
        self.max_abs_diff(&other.scale(align))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.is_finite())
    }
}

impl Default for TwoPortOperator {
    fn default() -> Self {
        Self::identity()
    }
}

/// Lossless 50/50 beam splitter, `(1/√2)[[1, i], [i, 1]]`.
pub fn make_bs() -> TwoPortOperator {
    let t = ComplexAmp::new(FRAC_1_SQRT_2, 0.0);
    let r = ComplexAmp::new(0.0, FRAC_1_SQRT_2);
    TwoPortOperator::new(t, r, r, t)
}

/// Arm phase shifters, `diag(e^{iφ₁}, e^{iφ₂})`.
///
/// The single-parameter shifter `[φ] = diag(1, e^{iφ})` is `make_phase(0.0, φ)`.
pub fn make_phase(phi1: f64, phi2: f64) -> TwoPortOperator {
    TwoPortOperator::new(
        ComplexAmp::from_polar(1.0, phi1),
        ZERO,
        ZERO,
        ComplexAmp::from_polar(1.0, phi2),
    )
}

/// Matrix product `second · first`: `first` acts on the field before `second`.
pub fn compose(second: &TwoPortOperator, first: &TwoPortOperator) -> TwoPortOperator {
    TwoPortOperator::new(
        second.m11 * first.m11 + second.m12 * first.m21,
        second.m11 * first.m12 + second.m12 * first.m22,
        second.m21 * first.m11 + second.m22 * first.m21,
        second.m21 * first.m12 + second.m22 * first.m22,
    )
}

/// Composes a sequence of operators listed in the order light meets them.
pub fn compose_path<'a, I>(elements: I) -> TwoPortOperator
where
    I: IntoIterator<Item = &'a TwoPortOperator>,
{
    elements
        .into_iter()
        .fold(TwoPortOperator::identity(), |acc, op| compose(op, &acc))
}

pub fn apply(op: &TwoPortOperator, field: &TwoModeField) -> TwoModeField {
    TwoModeField {
        a: op.m11 * field.a + op.m12 * field.b,
        b: op.m21 * field.a + op.m22 * field.b,
    }
}

impl std::ops::Mul for TwoPortOperator {
    type Output = TwoPortOperator;

    fn mul(self, rhs: TwoPortOperator) -> TwoPortOperator {
        compose(&self, &rhs)
    }
}

impl std::ops::Mul<TwoModeField> for TwoPortOperator {
    type Output = TwoModeField;

    fn mul(self, rhs: TwoModeField) -> TwoModeField {
        apply(&self, &rhs)
    }
}
