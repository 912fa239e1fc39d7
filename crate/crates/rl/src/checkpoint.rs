use std::path::Path;

use genctrl_core::dynamics::ScenarioConfig;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::error::{Result, RlError};
use crate::mlp::{Activation, Dense, Mlp, Real};

/// Serialized policy network. Weight matrices are stored row-major with
/// shape `(inputs, outputs)` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub concat_width: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub u_max: f64,
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl ActorCheckpoint {
    pub fn from_actor<T: Real>(actor: &Mlp<T>, scenario: ScenarioConfig, train: TrainConfig) -> Self {
        let f = |v: &T| v.to_f64().expect("finite weight");
        Self {
            layer_sizes: actor.layer_sizes(),
            activations: actor.activations(),
            concat_width: actor.concat_width,
            weights: actor.layers.iter().map(|l| l.w.iter().map(f).collect()).collect(),
            biases: actor.layers.iter().map(|l| l.b.iter().map(f).collect()).collect(),
            u_max: actor.output_scale.to_f64().unwrap_or(f64::NAN),
            seed: train.seed,
            scenario,
            train,
        }
    }

    pub fn to_actor<T: Real>(&self) -> Result<Mlp<T>> {
        let n = self.layer_sizes.len().saturating_sub(1);
        if n == 0 || self.weights.len() != n || self.biases.len() != n || self.activations.len() != n {
            return Err(RlError::Checkpoint("layer counts disagree".into()));
        }
        let cast = |v: &f64| T::from_f64(*v).ok_or_else(|| RlError::Checkpoint("weight out of range".into()));
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let rows = self.layer_sizes[l] + if l == 1 { self.concat_width } else { 0 };
            let cols = self.layer_sizes[l + 1];
            let w: Vec<T> = self.weights[l].iter().map(cast).collect::<Result<_>>()?;
            let b: Vec<T> = self.biases[l].iter().map(cast).collect::<Result<_>>()?;
            let w = Array2::from_shape_vec((rows, cols), w)
                .map_err(|_| RlError::Checkpoint(format!("layer {l} weight count")))?;
            if b.len() != cols {
                return Err(RlError::Checkpoint(format!("layer {l} bias count")));
            }
            layers.push(Dense { w, b: Array1::from(b) });
        }
        let hidden = self.activations[0];
        if n > 1 && self.activations[..n - 1].iter().any(|a| *a != hidden) {
            return Err(RlError::Checkpoint("mixed hidden activations".into()));
        }
        Ok(Mlp {
            layers,
            hidden,
            output: self.activations[n - 1],
            output_scale: T::from_f64(self.u_max).ok_or_else(|| RlError::Checkpoint("u_max".into()))?,
            concat_width: self.concat_width,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use genctrl_core::dynamics::ScenarioKind;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let actor = Mlp::<f32>::actor(32, (10, 7), 6, 3.0, &mut rng);
        let ck = ActorCheckpoint::from_actor(&actor, ScenarioConfig::new(ScenarioKind::Example1), TrainConfig::default());
        let json = serde_json::to_string(&ck).unwrap();
        let back: ActorCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_actor::<f32>().unwrap(), actor);
    }
}
