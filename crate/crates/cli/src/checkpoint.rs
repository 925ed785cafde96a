//! Parameter checkpoints as JSON: the architecture plus per-layer weight
//! rows and biases. serde_json round-trips f64 exactly, so a reloaded
//! checkpoint evaluates bit-identically.

use crate::output::write_atomic;
use apd_core::error::{Error, Result};
use apd_core::mlp::{Activation, LayerParams, MlpArchitecture, ParamSet};
use apd_core::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ArchJson {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    num_classes: usize,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointJson {
    arch: ArchJson,
    layers: Vec<LayerJson>,
}

pub fn save_checkpoint(path: &Path, arch: &MlpArchitecture, params: &ParamSet) -> Result<()> {
    let layers = params
        .layers()
        .iter()
        .map(|l| LayerJson {
            weight: (0..l.weight.rows())
                .map(|i| l.weight.row(i).to_vec())
                .collect(),
            bias: l.bias.data().to_vec(),
        })
        .collect();
    let ckpt = CheckpointJson {
        arch: ArchJson {
            input_dim: arch.input_dim,
            hidden_dims: arch.hidden_dims.clone(),
            num_classes: arch.num_classes,
            activation: match arch.activation {
                Activation::Relu => "relu".to_string(),
                Activation::Tanh => "tanh".to_string(),
            },
        },
        layers,
    };
    let text = serde_json::to_string(&ckpt)
        .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(MlpArchitecture, ParamSet)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let ckpt: CheckpointJson = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let activation = match ckpt.arch.activation.as_str() {
        "relu" => Activation::Relu,
        "tanh" => Activation::Tanh,
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown activation `{other}` in checkpoint"
            )));
        }
    };
    let arch = MlpArchitecture {
        input_dim: ckpt.arch.input_dim,
        hidden_dims: ckpt.arch.hidden_dims,
        num_classes: ckpt.arch.num_classes,
        activation,
    };
    arch.validate()?;
    let expected = arch.layer_dims();
    if ckpt.layers.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} layers, architecture wants {}",
            ckpt.layers.len(),
            expected.len()
        )));
    }
    let mut layers = Vec::with_capacity(ckpt.layers.len());
    for (l, &(out, fan_in)) in ckpt.layers.into_iter().zip(&expected) {
        if l.weight.len() != out || l.weight.iter().any(|row| row.len() != fan_in) {
            return Err(Error::Checkpoint(format!(
                "layer weight shape does not match ({out}, {fan_in})"
            )));
        }
        if l.bias.len() != out {
            return Err(Error::Checkpoint(format!(
                "layer bias length {} does not match {out}",
                l.bias.len()
            )));
        }
        let weight = Tensor::from_rows(&l.weight)?;
        let bias = Tensor::from_vec(&[out], l.bias)?;
        layers.push(LayerParams { weight, bias });
    }
    Ok((arch, ParamSet::from_layers(layers)))
}
