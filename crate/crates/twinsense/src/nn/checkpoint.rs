//! Model checkpoints: bit-exact save/load of `f32` parameter stacks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{f32_from_le_bytes, f32_to_le_bytes, read_container, sha256_hex, write_container};
use crate::nn::{BatchNorm, DenseLayer, MlpModel, Mode, ModelSpec};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"TWCK";
const VERSION: u32 = 1;
const FORMAT_NAME: &str = "twinsense-model";

/// JSON header of a checkpoint file. The payload holds, per layer and in
/// order: weights, bias, then gamma/beta/running mean/running variance when
/// the layer carries batchnorm — all `f32` little-endian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub spec: ModelSpec,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

fn payload_bytes(model: &MlpModel<f32>) -> Vec<u8> {
    let mut values: Vec<f32> = Vec::new();
    for l in model.layers() {
        values.extend_from_slice(&l.weights);
        values.extend_from_slice(&l.bias);
        if let Some(bn) = &l.batchnorm {
            values.extend_from_slice(&bn.gamma);
            values.extend_from_slice(&bn.beta);
            values.extend_from_slice(&bn.running_mean);
            values.extend_from_slice(&bn.running_var);
        }
    }
    f32_to_le_bytes(&values)
}

/// SHA-256 over the serialized parameter payload; two models with identical
/// parameters (including running statistics) hash identically.
pub fn model_checksum(model: &MlpModel<f32>) -> String {
    sha256_hex(&payload_bytes(model))
}

pub fn save_model(
    path: &Path,
    model: &MlpModel<f32>,
    metadata: BTreeMap<String, String>,
) -> Result<()> {
    let header = CheckpointHeader {
        format: FORMAT_NAME.into(),
        spec: model.spec(),
        metadata,
    };
    write_container(path, MAGIC, VERSION, &header, &payload_bytes(model))
}

/// Loads a checkpoint; the model comes back in [`Mode::Eval`].
pub fn load_model(path: &Path) -> Result<(MlpModel<f32>, CheckpointHeader)> {
    let (_, header, payload): (u32, CheckpointHeader, Vec<u8>) =
        read_container(path, MAGIC, VERSION)?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!(
            "{}: header format {:?} is not a model checkpoint",
            path.display(),
            header.format
        )));
    }
    let values = f32_from_le_bytes(&payload)?;

    let mut off = 0usize;
    let mut take = |n: usize| -> Result<Vec<f32>> {
        if off + n > values.len() {
            return Err(Error::Format(format!(
                "{}: payload shorter than the declared spec",
                path.display()
            )));
        }
        let out = values[off..off + n].to_vec();
        off += n;
        Ok(out)
    };

    let mut layers = Vec::with_capacity(header.spec.layers.len());
    for ls in &header.spec.layers {
        let weights = take(ls.in_dim * ls.out_dim)?;
        let bias = take(ls.out_dim)?;
        let mut layer = DenseLayer::from_parts(ls.in_dim, ls.out_dim, weights, bias, ls.activation)?;
        if ls.batchnorm {
            let mut bn = BatchNorm::new(ls.out_dim);
            bn.gamma = take(ls.out_dim)?;
            bn.beta = take(ls.out_dim)?;
            bn.running_mean = take(ls.out_dim)?;
            bn.running_var = take(ls.out_dim)?;
            layer.batchnorm = Some(bn);
        }
        layers.push(layer);
    }
    if off != values.len() {
        return Err(Error::Format(format!(
            "{}: {} trailing values after the declared spec",
            path.display(),
            values.len() - off
        )));
    }

    let mut model = MlpModel::from_layers(layers)?;
    model.set_mode(Mode::Eval);
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trained_model() -> MlpModel<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let spec = ModelSpec::chain(
            &[6, 12, 3],
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Tanh,
            true,
        )
        .unwrap();
        let mut model = MlpModel::<f32>::init(&spec, &mut rng).unwrap();
        // A few train-mode passes so the running statistics are non-trivial.
        for _ in 0..4 {
            let x = Matrix::from_vec(
                8,
                6,
                (0..48).map(|_| f32::standard_normal(&mut rng) * 2.0).collect(),
            );
            model.forward(&x).unwrap();
        }
        model
    }

    use crate::nn::Scalar;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = trained_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.twck");
        let meta = BTreeMap::from([("role".to_string(), "generator".to_string())]);
        save_model(&path, &model, meta.clone()).unwrap();
        let (loaded, header) = load_model(&path).unwrap();

        assert_eq!(header.metadata, meta);
        assert_eq!(header.spec, model.spec());
        assert_eq!(loaded.mode(), Mode::Eval);
        assert_eq!(model_checksum(&loaded), model_checksum(&model));
        // Checksum covers everything, but compare outputs too.
        let x: Vec<f32> = (0..6).map(|i| i as f32 * 0.37 - 1.0).collect();
        assert_eq!(
            loaded.infer_single(&x).unwrap()[0].to_bits(),
            model.infer_single(&x).unwrap()[0].to_bits()
        );
    }

    #[test]
    fn payload_truncation_is_detected() {
        let model = trained_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.twck");
        save_model(&path, &model, BTreeMap::new()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn checksum_changes_with_parameters() {
        let model = trained_model();
        let mut other = model.clone();
        let mut p = other.flat_parameters();
        p[0] += 1.0;
        other.set_flat_parameters(&p).unwrap();
        assert_ne!(model_checksum(&model), model_checksum(&other));
    }
}
