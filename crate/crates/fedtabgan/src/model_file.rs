//! Trained-model files: configuration, its digest, feature labels and the
//! weights bundle.
//!
//! ```text
//! b"FTGMODEL"                  magic
//! u16 BE                       format version
//! [u8; 32]                     SHA-256 of the config text
//! u32 BE + bytes               config text (key=value lines)
//! u32 BE label count, then per label u32 BE length + UTF-8 bytes
//! u32 BE                       CRC-32 of everything above
//! ...                          weights bundle (carries its own CRC)
//! ```

use std::path::{Path, PathBuf};

use fedtabgan_core::gan::{ConfigDigest, GanConfig, GanError, GanModel};
use fedtabgan_core::wire::{WeightsBundle, WireError};

const MAGIC: &[u8; 8] = b"FTGMODEL";
const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("corrupt model weights: {0}")]
    Weights(#[from] WireError),
    #[error("model configuration: {0}")]
    Config(#[from] GanError),
}

/// A model restored from disk.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: GanModel,
    pub digest: ConfigDigest,
    pub labels: Option<Vec<String>>,
}

pub fn encode_model(model: &GanModel, labels: Option<&[String]>) -> Vec<u8> {
    let config = model.config().to_kv();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&model.config().digest());
    out.extend_from_slice(&(config.len() as u32).to_be_bytes());
    out.extend_from_slice(config.as_bytes());
    let labels = labels.unwrap_or(&[]);
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for l in labels {
        out.extend_from_slice(&(l.len() as u32).to_be_bytes());
        out.extend_from_slice(l.as_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    out.extend_from_slice(&WeightsBundle::from_model(model).encode());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelFileError::Corrupt("file is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn text(&mut self, len: usize) -> Result<String, ModelFileError> {
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| ModelFileError::Corrupt("text is not UTF-8".into()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile, ModelFileError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(ModelFileError::Corrupt("not a model file".into()));
    }
    let version = u16::from_be_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(ModelFileError::Corrupt(format!("unsupported format version {version}")));
    }
    let digest: ConfigDigest = c.take(32)?.try_into().expect("32 bytes");
    let len = c.u32()? as usize;
    let config_text = c.text(len)?;
    let count = c.u32()? as usize;
    let mut labels = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u32()? as usize;
        labels.push(c.text(len)?);
    }
    let header_end = c.pos;
    let stored = c.u32()?;
    if stored != crc32fast::hash(&bytes[..header_end]) {
        return Err(ModelFileError::Corrupt("header checksum mismatch".into()));
    }
    let bundle = WeightsBundle::decode(&bytes[c.pos..])?;

    let config = GanConfig::from_kv(GanConfig::paper(0), &config_text)?;
    if config.digest() != digest {
        return Err(ModelFileError::Corrupt("stored digest does not match the stored configuration".into()));
    }
    let mut model = GanModel::new(&config)?;
    bundle.apply_to(&mut model)?;
    if !labels.is_empty() && labels.len() != config.feature_dim {
        return Err(ModelFileError::Corrupt(format!(
            "{} labels for {} features",
            labels.len(),
            config.feature_dim
        )));
    }
    Ok(ModelFile { model, digest, labels: (!labels.is_empty()).then_some(labels) })
}

pub fn save_model(model: &GanModel, labels: Option<&[String]>, path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, encode_model(model, labels)).map_err(|source| ModelFileError::Io { path: path.into(), source })
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelFileError> {
    let bytes = std::fs::read(path).map_err(|source| ModelFileError::Io { path: path.into(), source })?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> GanModel {
        let mut cfg = GanConfig::desk(3).with_seed(8);
        cfg.noise_dim = 2;
        cfg.g_hidden = vec![4];
        cfg.d_hidden = vec![4];
        GanModel::new(&cfg).unwrap()
    }

    #[test]
    fn round_trip() {
        let m = model();
        let labels = vec!["0389".to_string(), "4019".into(), "V053".into()];
        let back = decode_model(&encode_model(&m, Some(&labels))).unwrap();
        assert!(back.model.same_weights(&m));
        assert_eq!(back.model.config(), m.config());
        assert_eq!(back.labels.as_deref(), Some(&labels[..]));
        assert_eq!(back.digest, m.config().digest());
    }

    #[test]
    fn any_flipped_byte_is_rejected() {
        let bytes = encode_model(&model(), None);
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x01;
            assert!(decode_model(&b).is_err(), "byte {i}");
        }
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    }
}
