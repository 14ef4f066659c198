//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic           4 bytes  "IGXM"
//! schema_version  u32
//! input_dim       u32
//! hidden_dim      u32
//! n_hidden        u32
//! dropout_p       f64
//! bn_epsilon      f64
//! bn_momentum     f64
//! n_features      u32      (== input_dim)
//! feature names   n_features × (u32 byte length, UTF-8 bytes)
//! per hidden block, in order:
//!     weights       hidden_dim × fan_in f64, row-major
//!     bias          hidden_dim f64
//!     gamma, beta   hidden_dim f64 each
//!     running_mean  hidden_dim f64
//!     running_var   hidden_dim f64
//! output weights  fan_in f64
//! output bias     1 f64
//! standardizer    input_dim f64 means, then input_dim f64 stds
//! ```
//!
//! The file ends there; trailing bytes are rejected.

use std::fs;
use std::path::Path;

use super::model::{Activation, Architecture, BatchNormState, HiddenBlock, LinearLayer, MlpClassifier};
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IGXM";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_DIM: usize = 1 << 20;

pub fn save_checkpoint(model: &MlpClassifier, standardizer: &Standardizer, path: &Path) -> Result<()> {
    let arch = model.architecture();
    if standardizer.len() != arch.input_dim {
        return Err(Error::Shape(format!(
            "standardizer covers {} features, model expects {}",
            standardizer.len(),
            arch.input_dim
        )));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    put_u32(&mut buf, arch.input_dim as u32);
    put_u32(&mut buf, arch.hidden_dim as u32);
    put_u32(&mut buf, arch.n_hidden as u32);
    put_f64s(&mut buf, &[arch.dropout_p, arch.bn_epsilon, arch.bn_momentum]);
    put_u32(&mut buf, standardizer.feature_names.len() as u32);
    for name in &standardizer.feature_names {
        put_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
    }
    for block in model.hidden_blocks() {
        put_f64s(&mut buf, block.linear.weights.as_slice());
        put_f64s(&mut buf, &block.linear.bias);
        put_f64s(&mut buf, &block.norm.gamma);
        put_f64s(&mut buf, &block.norm.beta);
        put_f64s(&mut buf, &block.norm.running_mean);
        put_f64s(&mut buf, &block.norm.running_var);
    }
    put_f64s(&mut buf, model.output_layer().weights.as_slice());
    put_f64s(&mut buf, &model.output_layer().bias);
    put_f64s(&mut buf, &standardizer.mean);
    put_f64s(&mut buf, &standardizer.std);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(MlpClassifier, Standardizer)> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<(MlpClassifier, Standardizer)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic bytes {magic:?}")));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported schema version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let input_dim = r.dim()?;
    let hidden_dim = r.dim()?;
    let n_hidden = r.dim()?;
    let arch = Architecture {
        input_dim,
        hidden_dim,
        n_hidden,
        dropout_p: r.f64()?,
        bn_epsilon: r.f64()?,
        bn_momentum: r.f64()?,
    };
    arch.validate()
        .map_err(|e| Error::Checkpoint(format!("invalid architecture: {e}")))?;

    let n_features = r.dim()?;
    if n_features != input_dim {
        return Err(Error::Checkpoint(format!(
            "shape mismatch: {n_features} feature names for input_dim {input_dim}"
        )));
    }
    let mut names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let len = r.dim()?;
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Checkpoint("feature name is not UTF-8".into()))?;
        names.push(name.to_owned());
    }

    let mut hidden = Vec::with_capacity(n_hidden);
    let mut fan_in = input_dim;
    for _ in 0..n_hidden {
        let weights = Matrix::from_vec(hidden_dim, fan_in, r.f64s(hidden_dim * fan_in)?)?;
        let bias = r.f64s(hidden_dim)?;
        let mut norm = BatchNormState::new(hidden_dim, arch.bn_momentum, arch.bn_epsilon);
        norm.gamma = r.f64s(hidden_dim)?;
        norm.beta = r.f64s(hidden_dim)?;
        norm.running_mean = r.f64s(hidden_dim)?;
        norm.running_var = r.f64s(hidden_dim)?;
        if norm.running_var.iter().any(|v| *v < 0.0) {
            return Err(Error::Checkpoint("negative running variance".into()));
        }
        hidden.push(HiddenBlock {
            linear: LinearLayer { weights, bias },
            norm,
            activation: Activation::Swish,
        });
        fan_in = hidden_dim;
    }
    let output = LinearLayer {
        weights: Matrix::from_vec(1, fan_in, r.f64s(fan_in)?)?,
        bias: r.f64s(1)?,
    };
    let mean = r.f64s(input_dim)?;
    let std = r.f64s(input_dim)?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after standardizer",
            bytes.len() - r.pos
        )));
    }
    let model = MlpClassifier::from_parts(arch, hidden, output);
    if !model.is_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    let standardizer = Standardizer::new(names, mean, std)
        .map_err(|e| Error::Checkpoint(format!("invalid standardizer: {e}")))?;
    Ok((model, standardizer))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated file: wanted {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.u32()? as usize;
        if v > MAX_DIM {
            return Err(Error::Checkpoint(format!("implausible dimension {v}")));
        }
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(hidden: usize) -> (MlpClassifier, Standardizer) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = MlpClassifier::new(Architecture::new(3).with_hidden(hidden, 2), &mut rng)
            .unwrap()
            .eval();
        let st = Standardizer::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 2.0, 3.0],
            vec![0.5, 1.5, 2.5],
        )
        .unwrap();
        (model, st)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (model, st) = fixture(8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.igxm");
        save_checkpoint(&model, &st, &path).unwrap();
        let (back, st2) = load_checkpoint(&path).unwrap();
        assert_eq!(st, st2);
        assert_eq!(back.architecture().hidden_dim, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = Matrix::from_vec(100, 3, data).unwrap();
        let a = model.forward(&x).unwrap();
        let b = back.forward(&x).unwrap();
        let max_diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert_eq!(max_diff, 0.0);
    }

    #[test]
    fn corrupt_magic_is_an_error() {
        let (model, st) = fixture(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.igxm");
        save_checkpoint(&model, &st, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn truncation_and_version_are_detected() {
        let (model, st) = fixture(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.igxm");
        save_checkpoint(&model, &st, &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        let err = decode(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(decode(&v2).unwrap_err().to_string().contains("version"));

        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn mismatched_standardizer_is_rejected_on_save() {
        let (model, _) = fixture(4);
        let st = Standardizer::new(vec!["a".into()], vec![0.0], vec![1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(save_checkpoint(&model, &st, &dir.path().join("x")).is_err());
    }
}
