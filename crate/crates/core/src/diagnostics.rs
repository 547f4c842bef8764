//! Energy-variation bookkeeping for single-neuron transitions.
//!
//! For a change of neuron `i` from `x_i` to `x_i'` under potential `v_i`,
//! with Hermitian weights and a real diagonal,
//!
//! ```text
//! ΔE = -(X1 - X2) + w_ii (X3 - 1)
//! X1 = Re(conj(x_i') v_i),  X2 = Re(conj(x_i) v_i),  X3 = Re(conj(x_i') x_i)
//! ```
//!
//! For multivalued transitions the angles of `x_i'` are those of `x_i`
//! shifted by integer multiples `(a, b, c)` of the phase quanta, and the
//! angles of `v_i` are those of `x_i'` shifted by `(δφ, δψ, δθ)`. The
//! classical convergence argument assumes
//!
//! * (H1) `a = 0 ⇔ δφ = 0` and `c = 0 ⇔ δθ = 0`,
//! * (H2) `|δφ| < Δφ`, `|δψ| < Δψ`, `|δθ| < Δθ`,
//!
//! and [`decompose`] reports whether each holds for a given transition.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::network::{NetworkError, NetworkState, ResolutionFactors, WeightMatrix};
use crate::quaternion::{NotRepresentable, Quaternion};

/// Threshold below which a shift counts as zero.
pub const ZERO_SHIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("states differ at neurons {0:?}; a single-neuron transition is required")]
    NotSingleNeuron(Vec<usize>),
    #[error("activation potential has no unique phase-angle representation: {0}")]
    NotRepresentable(#[from] NotRepresentable),
    #[error("zero activation potential")]
    ZeroPotential,
    #[error("both states must carry phase indices")]
    MissingIndices,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// The `X` terms and both routes to `ΔE` for one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    pub neuron: usize,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub self_weight: f64,
    /// `-(X1 - X2) + w_ii (X3 - 1)`
    pub delta_e: f64,
    /// `E(after) - E(before)`
    pub delta_e_direct: f64,
    pub energy_before: f64,
}

impl EnergyIdentity {
    pub fn residual(&self) -> f64 {
        (self.delta_e - self.delta_e_direct).abs()
    }
}

/// Full decomposition of a multivalued transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaEDecomposition {
    pub neuron: usize,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x1_closed: f64,
    pub x2_closed: f64,
    pub x3_closed: f64,
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub dphi_shift: f64,
    pub dpsi_shift: f64,
    pub dtheta_shift: f64,
    pub w_ii: f64,
    pub delta_e: f64,
    pub delta_e_direct: f64,
    pub cos_a1: f64,
    pub cos_a2: f64,
    pub cos_a3: f64,
    pub h1_holds: bool,
    pub h2_holds: bool,
}

impl DeltaEDecomposition {
    /// Largest disagreement between a definition and its closed form.
    pub fn closed_form_residual(&self) -> f64 {
        (self.x1 - self.x1_closed).abs().max((self.x2 - self.x2_closed).abs()).max((self.x3 - self.x3_closed).abs())
    }
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn clamp_unit(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

/// Cosines of the angles between `x_i'` and `v_i`, `x_i` and `v_i`, and
/// `x_i'` and `x_i`.
pub fn cosine_view(
    before: Quaternion,
    after: Quaternion,
    potential: Quaternion,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    let nv = potential.norm();
    if nv == 0.0 {
        return Err(DiagnosticsError::ZeroPotential);
    }
    let (nb, na) = (before.norm(), after.norm());
    Ok((
        clamp_unit(after.real_inner(potential) / (na * nv)),
        clamp_unit(before.real_inner(potential) / (nb * nv)),
        clamp_unit(after.real_inner(before) / (na * nb)),
    ))
}

fn single_neuron(
    before: &NetworkState,
    after: &NetworkState,
    i: usize,
    w: &WeightMatrix,
) -> Result<(), DiagnosticsError> {
    if before.n() != w.n() || after.n() != w.n() {
        return Err(NetworkError::DimensionMismatch { weights: w.n(), state: before.n().max(after.n()) }.into());
    }
    if i >= w.n() {
        return Err(NetworkError::IndexOutOfRange { index: i, n: w.n() }.into());
    }
    let others: Vec<usize> = before.differing_neurons(after, 0.0).into_iter().filter(|&j| j != i).collect();
    if others.is_empty() {
        Ok(())
    } else {
        Err(DiagnosticsError::NotSingleNeuron(others))
    }
}

/// `X1`, `X2`, `X3` by definition and `ΔE` by the identity and by direct
/// differencing. Works for any model.
pub fn energy_identity(
    w: &WeightMatrix,
    before: &NetworkState,
    after: &NetworkState,
    i: usize,
) -> Result<EnergyIdentity, DiagnosticsError> {
    single_neuron(before, after, i, w)?;
    let v = w.activation_potential(before.units(), i)?;
    let (old, new) = (before.units()[i], after.units()[i]);
    let x1 = new.real_inner(v);
    let x2 = old.real_inner(v);
    let x3 = new.real_inner(old);
    let self_weight = w.self_weight(i);
    let energy_before = w.energy(before.units())?;
    Ok(EnergyIdentity {
        neuron: i,
        x1,
        x2,
        x3,
        self_weight,
        delta_e: -(x1 - x2) + self_weight * (x3 - 1.0),
        delta_e_direct: w.energy(after.units())? - energy_before,
        energy_before,
    })
}

/// `Re(conj(x') x)` for `x'` obtained from `x` by shifting its angles by
/// `(A, B, C)`, where `ψ` is the `ψ` angle of `x`:
/// `cos A cos B cos C + sin A sin C sin(2ψ + B)`.
pub fn shifted_overlap(shift_phi: f64, shift_psi: f64, shift_theta: f64, psi: f64) -> f64 {
    shift_phi.cos() * shift_psi.cos() * shift_theta.cos()
        + shift_phi.sin() * shift_theta.sin() * (2.0 * psi + shift_psi).sin()
}

/// Closed form of `X3` from the integer shifts.
pub fn x3_closed_form(a: i64, b: i64, c: i64, k: ResolutionFactors, psi_before: f64) -> f64 {
    shifted_overlap(a as f64 * k.dphi(), b as f64 * k.dpsi(), c as f64 * k.dtheta(), psi_before)
}

/// Decomposes a multivalued single-neuron transition.
pub fn decompose(
    w: &WeightMatrix,
    before: &NetworkState,
    after: &NetworkState,
    i: usize,
    k: ResolutionFactors,
) -> Result<DeltaEDecomposition, DiagnosticsError> {
    let id = energy_identity(w, before, after, i)?;
    let (Some(ib), Some(ia)) = (before.indices(), after.indices()) else {
        return Err(DiagnosticsError::MissingIndices);
    };
    k.check_index(ib[i])?;
    k.check_index(ia[i])?;
    let v = w.activation_potential(before.units(), i)?;
    let va = v.to_phase_angles()?;
    let nv = v.norm();

    let a = i64::from(ia[i].l1) - i64::from(ib[i].l1);
    let b = i64::from(ia[i].l2) - i64::from(ib[i].l2);
    let c = i64::from(ia[i].l3) - i64::from(ib[i].l3);
    let ang_before = k.angles(ib[i]);
    let ang_after = k.angles(ia[i]);
    let dphi = wrap_angle(va.phi - ang_after.phi);
    let dpsi = wrap_angle(va.psi - ang_after.psi);
    let dtheta = wrap_angle(va.theta - ang_after.theta);

    let (sa, sb, sc) = (a as f64 * k.dphi(), b as f64 * k.dpsi(), c as f64 * k.dtheta());
    let psi = ang_before.psi;
    let x3_closed = x3_closed_form(a, b, c, k, psi);
    let x1_closed = nv * shifted_overlap(dphi, dpsi, dtheta, psi + sb);
    let x2_closed = nv * shifted_overlap(sa + dphi, sb + dpsi, sc + dtheta, psi);

    let (cos_a1, cos_a2, cos_a3) = cosine_view(before.units()[i], after.units()[i], v)?;
    let zero = |s: f64| s.abs() < ZERO_SHIFT_TOL;
    let h1_holds = ((a == 0) == zero(dphi)) && ((c == 0) == zero(dtheta));
    let h2_holds = dphi.abs() < k.dphi() && dpsi.abs() < k.dpsi() && dtheta.abs() < k.dtheta();

    Ok(DeltaEDecomposition {
        neuron: i,
        x1: id.x1,
        x2: id.x2,
        x3: id.x3,
        x1_closed,
        x2_closed,
        x3_closed,
        a,
        b,
        c,
        dphi_shift: dphi,
        dpsi_shift: dpsi,
        dtheta_shift: dtheta,
        w_ii: id.self_weight,
        delta_e: id.delta_e,
        delta_e_direct: id.delta_e_direct,
        cos_a1,
        cos_a2,
        cos_a3,
        h1_holds,
        h2_holds,
    })
}
