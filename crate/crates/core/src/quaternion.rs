//! Quaternion arithmetic and the phase-angle factorization
//! `q = |q| e^{iφ} e^{kψ} e^{jθ}`.
//!
//! Only quaternions that are nonzero and away from the `|ψ| = π/4`
//! singularity (gimbal lock) have a unique phase-angle triple; see
//! [`Quaternion::to_phase_angles`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Band around `|sin 2ψ| = 1` treated as gimbal lock.
pub const GIMBAL_LOCK_EPS: f64 = 1e-9;

/// A quaternion `q0 + q1 i + q2 j + q3 k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// Phase angles `(φ, ψ, θ)` with `φ ∈ [-π, π)`, `ψ ∈ [-π/4, π/4]`,
/// `θ ∈ [-π/2, π/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTriple {
    pub phi: f64,
    pub psi: f64,
    pub theta: f64,
}

/// Why a quaternion has no unique phase-angle representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NotRepresentable {
    #[error("zero quaternion has no phase-angle representation")]
    Zero,
    #[error("quaternion is at gimbal lock (|psi| = pi/4)")]
    GimbalLock,
}

impl PhaseTriple {
    pub const fn new(phi: f64, psi: f64, theta: f64) -> Self {
        Self { phi, psi, theta }
    }

    /// True when every angle lies in its canonical interval.
    pub fn in_canonical_range(&self) -> bool {
        (-PI..PI).contains(&self.phi)
            && (-PI / 4.0..=PI / 4.0).contains(&self.psi)
            && (-FRAC_PI_2..FRAC_PI_2).contains(&self.theta)
    }
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub const fn real(r: f64) -> Self {
        Self::new(r, 0.0, 0.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    #[inline]
    pub fn conjugate(self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    #[inline]
    pub fn real_part(self) -> f64 {
        self.q0
    }

    #[inline]
    pub fn vector_part(self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }

    /// `Re(q̄ p)`, the Euclidean inner product of the two 4-vectors.
    #[inline]
    pub fn real_inner(self, other: Self) -> f64 {
        self.q0 * other.q0 + self.q1 * other.q1 + self.q2 * other.q2 + self.q3 * other.q3
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(self, other: Self) -> f64 {
        (self.q0 - other.q0)
            .abs()
            .max((self.q1 - other.q1).abs())
            .max((self.q2 - other.q2).abs())
            .max((self.q3 - other.q3).abs())
    }

    /// Angle in `[0, π]` between two nonzero quaternions seen as 4-vectors.
    ///
    /// Uses the chord length of the normalized vectors, which stays accurate
    /// for nearly parallel inputs where `acos` loses half the digits.
    pub fn angle_to(self, other: Self) -> f64 {
        let a = self.scale(1.0 / self.norm());
        let b = other.scale(1.0 / other.norm());
        let chord = (a - b).norm();
        2.0 * (0.5 * chord).min(1.0).asin()
    }

    /// `magnitude · e^{iφ} e^{kψ} e^{jθ}`.
    pub fn from_phase_angles(angles: PhaseTriple, magnitude: f64) -> Self {
        let (sp, cp) = angles.phi.sin_cos();
        let (ss, cs) = angles.psi.sin_cos();
        let (st, ct) = angles.theta.sin_cos();
        let e_phi = Quaternion::new(cp, sp, 0.0, 0.0);
        let e_psi = Quaternion::new(cs, 0.0, 0.0, ss);
        let e_theta = Quaternion::new(ct, 0.0, st, 0.0);
        (e_phi * e_psi * e_theta).scale(magnitude)
    }

    /// Unique phase-angle triple of `self`.
    ///
    /// `ψ` comes from `asin`, `φ` and `θ` from half-angle `atan2`. The
    /// half-angle formulas only fix `φ` modulo `π`; if the reconstruction
    /// lands on `-q` instead of `q`, `φ` is moved to the other half circle.
    pub fn to_phase_angles(self) -> Result<PhaseTriple, NotRepresentable> {
        let n2 = self.norm_squared();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(NotRepresentable::Zero);
        }
        let Quaternion { q0, q1, q2, q3 } = self;
        let sin_2psi = 2.0 * (q0 * q3 - q1 * q2) / n2;
        if sin_2psi.abs() >= 1.0 - GIMBAL_LOCK_EPS {
            return Err(NotRepresentable::GimbalLock);
        }
        let psi = 0.5 * sin_2psi.asin();

        let mut phi = 0.5 * (2.0 * (q0 * q1 + q2 * q3)).atan2(q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3);
        let mut theta = 0.5 * (2.0 * (q0 * q2 + q1 * q3)).atan2(q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3);
        // θ = π/2 is outside [-π/2, π/2); e^{j(θ-π)} = -e^{jθ}, the sign is
        // repaired below together with φ.
        if theta >= FRAC_PI_2 {
            theta -= PI;
        }

        let candidate = Self::from_phase_angles(PhaseTriple::new(phi, psi, theta), 1.0);
        if candidate.real_inner(self) < 0.0 {
            phi += PI;
        }
        if phi >= PI {
            phi -= 2.0 * PI;
        }
        Ok(PhaseTriple::new(phi, psi, theta))
    }

    /// Membership in the set of uniquely phase-representable quaternions.
    pub fn is_in_a(self) -> bool {
        self.to_phase_angles().is_ok()
    }
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.q0 + rhs.q0, self.q1 + rhs.q1, self.q2 + rhs.q2, self.q3 + rhs.q3)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.q0 - rhs.q0, self.q1 - rhs.q1, self.q2 - rhs.q2, self.q3 - rhs.q3)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.q0, -self.q1, -self.q2, -self.q3)
    }
}

/// Hamilton product `pq = p0 q0 - p·q + p0 q + q0 p + p × q`.
impl Mul for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Self) -> Self {
        let p = self;
        Self::new(
            p.q0 * q.q0 - p.q1 * q.q1 - p.q2 * q.q2 - p.q3 * q.q3,
            p.q0 * q.q1 + p.q1 * q.q0 + p.q2 * q.q3 - p.q3 * q.q2,
            p.q0 * q.q2 - p.q1 * q.q3 + p.q2 * q.q0 + p.q3 * q.q1,
            p.q0 * q.q3 + p.q1 * q.q2 - p.q2 * q.q1 + p.q3 * q.q0,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// Formats a real with four significant digits, `%.4g` style.
pub fn fmt_sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can bump the magnitude (9.9996 -> 10.000); trim the extra digit.
    let digits = s.chars().filter(char::is_ascii_digit).count();
    let leading_zeros = if exp < 0 { (-exp) as usize } else { 0 };
    if decimals > 0 && digits > 4 + leading_zeros {
        let d = decimals - 1;
        format!("{x:.d$}")
    } else {
        s
    }
}

/// Renders as `a + bi + cj + dk` with four significant digits.
impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_sig4(self.q0))?;
        for (v, unit) in [(self.q1, "i"), (self.q2, "j"), (self.q3, "k")] {
            let sign = if v.is_sign_negative() { '-' } else { '+' };
            write!(f, " {sign} {}{unit}", fmt_sig4(v.abs()))?;
        }
        Ok(())
    }
}
