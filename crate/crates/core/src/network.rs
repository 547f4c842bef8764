//! Weight matrices, network states, activation potentials and the energy
//! function, plus the seeded random instance generators.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::{PhaseTriple, Quaternion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("neuron index {index} out of range for a network of {n} neurons")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: weights are {weights}x{weights}, state has {state} neurons")]
    DimensionMismatch { weights: usize, state: usize },
    #[error("resolution factors must be positive, got ({0}, {1}, {2})")]
    InvalidResolution(u32, u32, u32),
    #[error("phase index ({l1}, {l2}, {l3}) out of range for resolution ({k1}, {k2}, {k3})")]
    PhaseIndexOutOfRange { l1: u32, l2: u32, l3: u32, k1: u32, k2: u32, k3: u32 },
    #[error("weight matrix must have n*n entries with n >= 1")]
    BadShape,
}

/// Resolution factors `(K1, K2, K3)` of the multivalued models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResolutionFactors {
    pub k1: u32,
    pub k2: u32,
    pub k3: u32,
}

impl ResolutionFactors {
    pub fn new(k1: u32, k2: u32, k3: u32) -> Result<Self, NetworkError> {
        if k1 == 0 || k2 == 0 || k3 == 0 {
            return Err(NetworkError::InvalidResolution(k1, k2, k3));
        }
        Ok(Self { k1, k2, k3 })
    }

    pub fn uniform(k: u32) -> Result<Self, NetworkError> {
        Self::new(k, k, k)
    }

    /// `Δφ = 2π/K1`
    pub fn dphi(&self) -> f64 {
        2.0 * PI / f64::from(self.k1)
    }

    /// `Δψ = π/(2 K2)`
    pub fn dpsi(&self) -> f64 {
        PI / (2.0 * f64::from(self.k2))
    }

    /// `Δθ = π/K3`
    pub fn dtheta(&self) -> f64 {
        PI / f64::from(self.k3)
    }

    /// Number of distinct neuron states, `K1 K2 K3`.
    pub fn states_per_neuron(&self) -> u64 {
        u64::from(self.k1) * u64::from(self.k2) * u64::from(self.k3)
    }

    /// Arc midpoint angles for a phase index.
    pub fn angles(&self, idx: PhaseIndex) -> PhaseTriple {
        PhaseTriple::new(
            0.5 * (-2.0 * PI + self.dphi() * f64::from(2 * idx.l1 + 1)),
            0.5 * (-PI / 2.0 + self.dpsi() * f64::from(2 * idx.l2 + 1)),
            0.5 * (-PI + self.dtheta() * f64::from(2 * idx.l3 + 1)),
        )
    }

    /// Unit quaternion of a phase index.
    pub fn unit(&self, idx: PhaseIndex) -> Quaternion {
        Quaternion::from_phase_angles(self.angles(idx), 1.0)
    }

    pub fn check_index(&self, idx: PhaseIndex) -> Result<(), NetworkError> {
        if idx.l1 < self.k1 && idx.l2 < self.k2 && idx.l3 < self.k3 {
            Ok(())
        } else {
            Err(NetworkError::PhaseIndexOutOfRange {
                l1: idx.l1,
                l2: idx.l2,
                l3: idx.l3,
                k1: self.k1,
                k2: self.k2,
                k3: self.k3,
            })
        }
    }

    /// Decodes `0..K1 K2 K3` into a phase index (l1 fastest).
    pub fn index_from_ordinal(&self, ordinal: u64) -> PhaseIndex {
        let k1 = u64::from(self.k1);
        let k2 = u64::from(self.k2);
        PhaseIndex::new((ordinal % k1) as u32, ((ordinal / k1) % k2) as u32, (ordinal / (k1 * k2)) as u32)
    }
}

/// Integer arc indices `(ℓ1, ℓ2, ℓ3)` of a multivalued neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct PhaseIndex {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
}

impl PhaseIndex {
    pub const fn new(l1: u32, l2: u32, l3: u32) -> Self {
        Self { l1, l2, l3 }
    }
}

impl From<[u32; 3]> for PhaseIndex {
    fn from(a: [u32; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<PhaseIndex> for [u32; 3] {
    fn from(p: PhaseIndex) -> Self {
        [p.l1, p.l2, p.l3]
    }
}

/// Dense `n × n` quaternionic weight matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<Quaternion>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![Quaternion::ZERO; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<Quaternion>>) -> Result<Self, NetworkError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(NetworkError::BadShape);
        }
        Ok(Self { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Quaternion {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, w: Quaternion) {
        self.entries[i * self.n + j] = w;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Quaternion] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<Quaternion>> {
        self.entries.chunks(self.n).map(<[Quaternion]>::to_vec).collect()
    }

    /// Real part of the diagonal entry `w_ii`.
    pub fn self_weight(&self, i: usize) -> f64 {
        self.get(i, i).q0
    }

    /// `v_i = Σ_j w_ij x_j`, with the weight on the left of each product.
    pub fn activation_potential(&self, x: &[Quaternion], i: usize) -> Result<Quaternion, NetworkError> {
        if i >= self.n {
            return Err(NetworkError::IndexOutOfRange { index: i, n: self.n });
        }
        if x.len() != self.n {
            return Err(NetworkError::DimensionMismatch { weights: self.n, state: x.len() });
        }
        Ok(self.potential_unchecked(x, i))
    }

    #[inline]
    pub(crate) fn potential_unchecked(&self, x: &[Quaternion], i: usize) -> Quaternion {
        self.row(i).iter().zip(x).fold(Quaternion::ZERO, |acc, (&w, &xj)| acc + w * xj)
    }

    /// The quadratic form `x* W x` as a full quaternion.
    pub fn quadratic_form(&self, x: &[Quaternion]) -> Result<Quaternion, NetworkError> {
        if x.len() != self.n {
            return Err(NetworkError::DimensionMismatch { weights: self.n, state: x.len() });
        }
        Ok((0..self.n).map(|i| x[i].conjugate() * self.potential_unchecked(x, i)).fold(Quaternion::ZERO, |a, b| a + b))
    }

    /// `E(x) = -½ Re(x* W x)`.
    pub fn energy(&self, x: &[Quaternion]) -> Result<f64, NetworkError> {
        Ok(-0.5 * self.quadratic_form(x)?.q0)
    }

    /// Checks `w_ij = conj(w_ji)` and that each `w_ii` is real and
    /// nonnegative. Deviations up to `tolerance` are accepted.
    pub fn validate_with_tolerance(&self, tolerance: f64) -> ConditionReport {
        let mut violations = Vec::new();
        let mut max_deviation = 0.0_f64;
        for i in 0..self.n {
            for j in i..self.n {
                let (deviation, kind) = if i == j {
                    let w = self.get(i, i);
                    let imag = w.q1.abs().max(w.q2.abs()).max(w.q3.abs());
                    if imag > (-w.q0).max(0.0) {
                        (imag, ViolationKind::NonRealDiagonal)
                    } else {
                        ((-w.q0).max(0.0), ViolationKind::NegativeDiagonal)
                    }
                } else {
                    let d = self.get(i, j).max_abs_diff(self.get(j, i).conjugate());
                    (d, ViolationKind::NotHermitian)
                };
                max_deviation = max_deviation.max(deviation);
                if deviation > tolerance {
                    violations.push(Violation { i, j, kind, deviation });
                }
            }
        }
        ConditionReport { n: self.n, tolerance, max_deviation, violations }
    }

    /// [`validate_with_tolerance`](Self::validate_with_tolerance) with a zero tolerance.
    pub fn validate(&self) -> ConditionReport {
        self.validate_with_tolerance(0.0)
    }

    pub fn is_hermitian_nonneg(&self) -> bool {
        self.validate().passes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotHermitian,
    NonRealDiagonal,
    NegativeDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub kind: ViolationKind,
    pub deviation: f64,
}

/// Outcome of checking the usual convergence conditions on `W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// State of every neuron. Multivalued states additionally carry their
/// phase indices, from which the unit quaternions are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    units: Vec<Quaternion>,
    indices: Option<Vec<PhaseIndex>>,
}

impl NetworkState {
    /// A continuous state. Entries are stored as given.
    pub fn from_units(units: Vec<Quaternion>) -> Self {
        Self { units, indices: None }
    }

    pub fn from_indices(indices: Vec<PhaseIndex>, k: ResolutionFactors) -> Result<Self, NetworkError> {
        for &idx in &indices {
            k.check_index(idx)?;
        }
        let units = indices.iter().map(|&idx| k.unit(idx)).collect();
        Ok(Self { units, indices: Some(indices) })
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Quaternion] {
        &self.units
    }

    pub fn indices(&self) -> Option<&[PhaseIndex]> {
        self.indices.as_deref()
    }

    /// Drops the phase indices, keeping the quaternions.
    pub fn into_continuous(self) -> Self {
        Self { units: self.units, indices: None }
    }

    pub(crate) fn set_unit(&mut self, i: usize, q: Quaternion) {
        self.units[i] = q;
    }

    pub(crate) fn set_neuron(&mut self, i: usize, q: Quaternion, idx: Option<PhaseIndex>) {
        self.units[i] = q;
        if let (Some(indices), Some(idx)) = (self.indices.as_mut(), idx) {
            indices[i] = idx;
        }
    }

    /// Largest componentwise difference between two states.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.units.iter().zip(&other.units).map(|(a, b)| a.max_abs_diff(*b)).fold(0.0, f64::max)
    }

    /// Neurons whose quaternion differs from `other` by more than `tol`,
    /// or whose phase index differs when both states carry indices.
    pub fn differing_neurons(&self, other: &Self, tol: f64) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| match (self.indices(), other.indices()) {
                (Some(a), Some(b)) => a[i] != b[i],
                _ => self.units[i].max_abs_diff(other.units[i]) > tol,
            })
            .collect()
    }
}

/// `n × n` Hermitian weights with standard normal components and zero
/// diagonal: `W = U - diag(U)` with `U = ½(R + R*)`.
///
/// Every entry of `R` is drawn (row-major) so the distribution matches the
/// symmetrized construction, but only the upper triangle of `U` is
/// evaluated; the lower triangle is its exact conjugate.
pub fn random_hermitian_weights(n: usize, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r: Vec<Quaternion> = (0..n * n)
        .map(|_| {
            Quaternion::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        })
        .collect();
    let mut w = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let u = (r[i * n + j] + r[j * n + i].conjugate()).scale(0.5);
            w.set(i, j, u);
            w.set(j, i, u.conjugate());
        }
    }
    w
}

/// Uniformly drawn phase indices, one per neuron.
pub fn random_state(n: usize, k: ResolutionFactors, seed: u64) -> NetworkState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..n)
        .map(|_| PhaseIndex::new(rng.random_range(0..k.k1), rng.random_range(0..k.k2), rng.random_range(0..k.k3)))
        .collect();
    NetworkState::from_indices(indices, k).expect("indices drawn in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::example_instance;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn quanta() {
        let k = ResolutionFactors::new(4, 2, 8).unwrap();
        assert_eq!(k.dphi(), PI / 2.0);
        assert_eq!(k.dpsi(), PI / 4.0);
        assert_eq!(k.dtheta(), PI / 8.0);
        assert!(ResolutionFactors::new(0, 1, 1).is_err());
    }

    #[test]
    fn example_potential_and_energies() {
        let inst = example_instance();
        let v = inst.weights.activation_potential(inst.state.units(), 0).unwrap();
        let expected = Quaternion::new(-0.1121, 1.577, -5.207, 7.028);
        assert!(v.max_abs_diff(expected) < 5e-4, "{v}");
        let e0 = inst.weights.energy(inst.state.units()).unwrap();
        assert!((e0 + 5.0).abs() < 1e-9);

        let k = ResolutionFactors::uniform(2).unwrap();
        let after = NetworkState::from_indices(vec![PhaseIndex::new(1, 0, 0), PhaseIndex::new(0, 0, 0)], k).unwrap();
        let e1 = inst.weights.energy(after.units()).unwrap();
        assert!((e1 - 5.0).abs() < 1e-9, "{e1}");
    }

    #[test]
    fn zero_weights() {
        let w = WeightMatrix::zeros(3);
        let x = random_state(3, ResolutionFactors::uniform(4).unwrap(), 1);
        assert_eq!(w.activation_potential(x.units(), 2).unwrap(), Quaternion::ZERO);
        assert_eq!(w.energy(x.units()).unwrap(), 0.0);
        assert!(matches!(w.activation_potential(x.units(), 3), Err(NetworkError::IndexOutOfRange { .. })));
    }

    #[test]
    fn potential_matches_naive_loop() {
        let w = random_hermitian_weights(3, 11);
        let x = random_state(3, ResolutionFactors::uniform(5).unwrap(), 12);
        for i in 0..3 {
            let mut acc = [0.0; 4];
            for j in 0..3 {
                let a = w.get(i, j).to_array();
                let b = x.units()[j].to_array();
                acc[0] += a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
                acc[1] += a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2];
                acc[2] += a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1];
                acc[3] += a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0];
            }
            let v = w.activation_potential(x.units(), i).unwrap();
            assert!(v.max_abs_diff(Quaternion::from(acc)) < 1e-12);
        }
    }

    #[test]
    fn validate_weights_cases() {
        assert!(example_instance().weights.validate().passes());
        let mut w = WeightMatrix::zeros(2);
        w.set(0, 1, Quaternion::I);
        w.set(1, 0, Quaternion::I);
        let report = w.validate();
        assert!(!report.passes());
        assert_eq!(report.violations[0].kind, ViolationKind::NotHermitian);
        assert!((report.max_deviation - 2.0).abs() < 1e-15);

        let mut w = WeightMatrix::zeros(2);
        w.set(1, 1, Quaternion::real(-0.5));
        assert_eq!(w.validate().violations[0].kind, ViolationKind::NegativeDiagonal);
        w.set(1, 1, Quaternion::new(1.0, 0.0, 0.3, 0.0));
        assert_eq!(w.validate().violations[0].kind, ViolationKind::NonRealDiagonal);

        for seed in 0..20 {
            let r = random_hermitian_weights(6, seed).validate();
            assert!(r.passes());
            assert_eq!(r.max_deviation, 0.0);
        }
    }

    #[test]
    fn hermitian_generator_contract() {
        let w = random_hermitian_weights(100, 7);
        let report = w.validate();
        assert!(report.passes() && report.max_deviation == 0.0);
        for i in 0..100 {
            assert_eq!(w.get(i, i), Quaternion::ZERO);
            for j in 0..100 {
                assert_eq!(w.get(i, j), w.get(j, i).conjugate());
            }
        }
        assert_eq!(random_hermitian_weights(1, 3), WeightMatrix::zeros(1));
        assert_eq!(random_hermitian_weights(8, 99), random_hermitian_weights(8, 99));
        assert_ne!(random_hermitian_weights(8, 99), random_hermitian_weights(8, 100));
    }

    #[test]
    fn random_state_grid_k2() {
        let k = ResolutionFactors::uniform(2).unwrap();
        let x = random_state(50, k, 5);
        for (&idx, &q) in x.indices().unwrap().iter().zip(x.units()) {
            let a = k.angles(idx);
            assert!([-FRAC_PI_2, FRAC_PI_2].iter().any(|&p| (a.phi - p).abs() < 1e-15));
            assert!([-PI / 8.0, PI / 8.0].iter().any(|&p| (a.psi - p).abs() < 1e-15));
            assert!([-FRAC_PI_4, FRAC_PI_4].iter().any(|&p| (a.theta - p).abs() < 1e-15));
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(x, random_state(50, k, 5));
    }

    #[test]
    fn random_state_singleton_grid() {
        // With K = 1 every set has the single member (-2π + 2π)/2 = 0, etc.
        let k = ResolutionFactors::uniform(1).unwrap();
        let x = random_state(4, k, 1);
        for &q in x.units() {
            assert!(q.max_abs_diff(Quaternion::ONE) < 1e-15);
        }
    }
}
