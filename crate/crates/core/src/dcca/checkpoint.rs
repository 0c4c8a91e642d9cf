//! DCCA checkpoints: a JSON header plus one feature-format file per weight
//! matrix and bias vector, all inside one directory.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, DenseLayer, MlpParams};
use super::train::DccaModel;
use crate::datamodel::{read_feature_matrix, write_feature_matrix};
use crate::error::{Error, Result};

const HEADER: &str = "header.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    activation: Activation,
    seed: u64,
    k: usize,
    r: f64,
    visual_dims: Vec<usize>,
    language_dims: Vec<usize>,
}

fn save_branch(dir: &Path, prefix: &str, p: &MlpParams) -> Result<()> {
    for (i, l) in p.layers.iter().enumerate() {
        write_feature_matrix(dir.join(format!("{prefix}_w{i}.lsg")), &l.weights)?;
        let b = DMatrix::from_row_slice(1, l.bias.len(), l.bias.as_slice());
        write_feature_matrix(dir.join(format!("{prefix}_b{i}.lsg")), &b)?;
    }
    Ok(())
}

fn load_branch(dir: &Path, prefix: &str, dims: &[usize]) -> Result<MlpParams> {
    let mut layers = Vec::new();
    for i in 0..dims.len().saturating_sub(1) {
        let weights = read_feature_matrix(dir.join(format!("{prefix}_w{i}.lsg")))?;
        let b = read_feature_matrix(dir.join(format!("{prefix}_b{i}.lsg")))?;
        if weights.shape() != (dims[i], dims[i + 1]) || b.nrows() != 1 {
            return Err(Error::Format(format!(
                "{prefix} layer {i} shape disagrees with header"
            )));
        }
        layers.push(DenseLayer {
            weights,
            bias: DVector::from_iterator(b.ncols(), b.iter().copied()),
        });
    }
    MlpParams::from_layers(layers)
}

pub fn save_checkpoint(model: &DccaModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = Header {
        format_version: FORMAT_VERSION,
        activation: model.visual.activation,
        seed: model.seed,
        k: model.k(),
        r: model.reg,
        visual_dims: model.visual.sizes(),
        language_dims: model.language.sizes(),
    };
    let path = dir.join(HEADER);
    fs::write(&path, serde_json::to_string_pretty(&header)?).map_err(|e| Error::io(&path, e))?;
    save_branch(dir, "visual", &model.visual)?;
    save_branch(dir, "language", &model.language)
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<DccaModel> {
    let dir = dir.as_ref();
    let path = dir.join(HEADER);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let header: Header = serde_json::from_str(&text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            header.format_version
        )));
    }
    let visual = load_branch(dir, "visual", &header.visual_dims)?;
    let language = load_branch(dir, "language", &header.language_dims)?;
    if visual.output_dim() != header.k || language.output_dim() != header.k {
        return Err(Error::Format("branch output dims disagree with k".into()));
    }
    Ok(DccaModel {
        visual,
        language,
        reg: header.r,
        seed: header.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_at_f32_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let visual = MlpParams::init(&[6, 4, 2], &mut rng).unwrap();
        let language = MlpParams::init(&[3, 2], &mut rng).unwrap();
        let model = DccaModel {
            visual,
            language,
            reg: 1e-4,
            seed: 5,
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&model, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.visual.sizes(), vec![6, 4, 2]);
        assert_eq!(back.seed, 5);
        for (a, b) in model.visual.layers.iter().zip(&back.visual.layers) {
            let rounded = a.weights.map(|v| v as f32 as f64);
            assert_eq!(rounded, b.weights);
        }
    }
}
