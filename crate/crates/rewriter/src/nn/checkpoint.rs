//! Checkpoint persistence: a versioned binary parameter blob plus a
//! plain-text JSON manifest carrying the compatibility contract.

use super::tape::Scalar;
use super::transformer::{ModelConfig, Transformer};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RWCK";
const BLOB_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub domain: String,
    pub config: ModelConfig,
    pub vocab_hash: u64,
    pub iteration: usize,
    pub metrics: BTreeMap<String, f64>,
    pub blob_version: u32,
    pub notes: BTreeMap<String, String>,
}

pub fn save_checkpoint<F: Scalar>(
    dir: &Path,
    model: &Transformer<F>,
    manifest: &CheckpointManifest,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("model.bin"))?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(BLOB_VERSION)?;
    w.write_u32::<LittleEndian>(model.params.len() as u32)?;
    for (name, value) in model.params.names.iter().zip(&model.params.values) {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u64::<LittleEndian>(value.nrows() as u64)?;
        w.write_u64::<LittleEndian>(value.ncols() as u64)?;
        for &v in value.iter() {
            w.write_f64::<LittleEndian>(v.to_f64())?;
        }
    }
    w.flush()?;
    let manifest_text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), manifest_text)?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> anyhow::Result<CheckpointManifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_checkpoint<F: Scalar>(
    dir: &Path,
) -> anyhow::Result<(Transformer<F>, CheckpointManifest)> {
    let manifest = load_manifest(dir)?;
    anyhow::ensure!(
        manifest.blob_version == BLOB_VERSION,
        "unsupported blob version {}",
        manifest.blob_version
    );
    let mut model =
        Transformer::new(manifest.config.clone(), &mut ChaCha8Rng::seed_from_u64(0));
    let mut r = BufReader::new(File::open(dir.join("model.bin"))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    anyhow::ensure!(&magic == MAGIC, "not a checkpoint blob");
    let version = r.read_u32::<LittleEndian>()?;
    anyhow::ensure!(version == BLOB_VERSION, "unsupported blob version {version}");
    let count = r.read_u32::<LittleEndian>()? as usize;
    anyhow::ensure!(count == model.params.len(), "parameter count mismatch");
    for i in 0..count {
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)?;
        anyhow::ensure!(name == model.params.names[i], "parameter order mismatch at {name}");
        let rows = r.read_u64::<LittleEndian>()? as usize;
        let cols = r.read_u64::<LittleEndian>()? as usize;
        let expect = model.params.values[i].raw_dim();
        anyhow::ensure!((rows, cols) == (expect[0], expect[1]), "shape mismatch at {name}");
        let mut value = Array2::zeros((rows, cols));
        for v in value.iter_mut() {
            *v = F::from_f64(r.read_f64::<LittleEndian>()?);
        }
        model.params.values[i] = value;
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_round_trip_bit_exactly() {
        let config = ModelConfig {
            src_vocab: 9,
            tgt_vocab: 7,
            d_model: 8,
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            dropout: 0.1,
            k: Some(1),
            n_positions: 32,
            gain: 1.3,
            bos: 0,
            eos: 1,
        };
        let model: Transformer<f32> =
            Transformer::new(config.clone(), &mut ChaCha8Rng::seed_from_u64(42));
        let manifest = CheckpointManifest {
            kind: "seq2seq".into(),
            domain: "arithmetic".into(),
            config,
            vocab_hash: 0xfeed,
            iteration: 500,
            metrics: [("id_acc".to_string(), 0.5)].into_iter().collect(),
            blob_version: BLOB_VERSION,
            notes: BTreeMap::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &manifest).unwrap();
        let (loaded, m2) = load_checkpoint::<f32>(dir.path()).unwrap();
        assert_eq!(m2.vocab_hash, 0xfeed);
        assert_eq!(m2.iteration, 500);
        for (a, b) in model.params.values.iter().zip(&loaded.params.values) {
            assert_eq!(a, b);
        }
    }
}
