//! Problem instances: the built-in two-neuron counterexample and the JSON
//! document used to save and replay `(W, x0)` pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, NetworkState, PhaseIndex, ResolutionFactors, WeightMatrix};
use crate::quaternion::Quaternion;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("instance declares n = {declared} but {what} has {actual} entries")]
    Size { declared: usize, what: &'static str, actual: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("state entry {0} does not lie on the phase grid of the requested resolution")]
    OffGrid(usize),
}

/// Weights plus an initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub weights: WeightMatrix,
    pub state: NetworkState,
}

/// On-disk form of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub n: usize,
    pub weights: Vec<Vec<Quaternion>>,
    pub state: Vec<Quaternion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<PhaseIndex>>,
}

impl InstanceDocument {
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            n: inst.weights.n(),
            weights: inst.weights.rows(),
            state: inst.state.units().to_vec(),
            indices: inst.state.indices().map(<[PhaseIndex]>::to_vec),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Builds the instance. When `resolution` is given the state is
    /// returned as a multivalued state: from `indices` if present, else by
    /// locating every quaternion on the phase grid.
    pub fn into_instance(self, resolution: Option<ResolutionFactors>) -> Result<Instance, InstanceError> {
        if self.weights.len() != self.n {
            return Err(InstanceError::Size { declared: self.n, what: "weights", actual: self.weights.len() });
        }
        if self.state.len() != self.n {
            return Err(InstanceError::Size { declared: self.n, what: "state", actual: self.state.len() });
        }
        let weights = WeightMatrix::from_rows(self.weights)?;
        let state = match (resolution, self.indices) {
            (Some(k), Some(indices)) => {
                if indices.len() != self.n {
                    return Err(InstanceError::Size { declared: self.n, what: "indices", actual: indices.len() });
                }
                NetworkState::from_indices(indices, k)?
            }
            (Some(k), None) => {
                let indices = self
                    .state
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| locate_on_grid(q, k).ok_or(InstanceError::OffGrid(i)))
                    .collect::<Result<Vec<_>, _>>()?;
                NetworkState::from_indices(indices, k)?
            }
            (None, _) => NetworkState::from_units(self.state),
        };
        Ok(Instance { weights, state })
    }
}

/// Phase index whose unit quaternion matches `q` to within 1e-9.
pub fn locate_on_grid(q: Quaternion, k: ResolutionFactors) -> Option<PhaseIndex> {
    let angles = q.to_phase_angles().ok()?;
    let (_, idx) = crate::dynamics::quantize(angles, k);
    (k.unit(idx).max_abs_diff(q.scale(1.0 / q.norm())) <= 1e-9).then_some(idx)
}

/// The two-neuron network with `w12 = 5 + i + 7j + 2k`, `w21 = conj(w12)`,
/// zero diagonal, and both neurons at `e^{-iπ/2} e^{-kπ/8} e^{-jπ/4}`
/// (phase index `(0, 0, 0)` for `K = (2, 2, 2)`).
pub fn example_instance() -> Instance {
    let w12 = Quaternion::new(5.0, 1.0, 7.0, 2.0);
    let weights = WeightMatrix::from_rows(vec![vec![Quaternion::ZERO, w12], vec![w12.conjugate(), Quaternion::ZERO]])
        .expect("2x2");
    let state =
        NetworkState::from_indices(vec![PhaseIndex::new(0, 0, 0); 2], example_resolution()).expect("valid index");
    Instance { weights, state }
}

/// `K1 = K2 = K3 = 2`.
pub fn example_resolution() -> ResolutionFactors {
    ResolutionFactors { k1: 2, k2: 2, k3: 2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip() {
        let inst = example_instance();
        let doc = InstanceDocument::from_instance(&inst);
        let text = doc.to_json();
        assert!(text.contains("\"indices\""));
        let back = InstanceDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        let rebuilt = back.into_instance(Some(example_resolution())).unwrap();
        assert_eq!(rebuilt, inst);
    }

    #[test]
    fn indices_inferred_from_grid() {
        let inst = example_instance();
        let mut doc = InstanceDocument::from_instance(&inst);
        doc.indices = None;
        let rebuilt = doc.clone().into_instance(Some(example_resolution())).unwrap();
        assert_eq!(rebuilt.state.indices(), inst.state.indices());

        doc.state[1] = Quaternion::new(0.5, 0.5, 0.5, -0.5);
        assert!(matches!(doc.into_instance(Some(example_resolution())), Err(InstanceError::OffGrid(1))));
    }

    #[test]
    fn malformed_documents() {
        assert!(InstanceDocument::from_json("{\"n\": 2}").is_err());
        let text = r#"{"n": 2, "weights": [[[0,0,0,0]]], "state": [[1,0,0,0],[1,0,0,0]]}"#;
        let doc = InstanceDocument::from_json(text).unwrap();
        assert!(matches!(doc.into_instance(None), Err(InstanceError::Size { what: "weights", .. })));
    }
}
