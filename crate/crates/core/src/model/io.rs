//! Binary model format:
//!
//! ```text
//! magic      7 bytes  "W2KPE1\0"
//! version    1 byte   0x01
//! config     6 x u64 LE: vocab_size, embed_dim, hidden_dim,
//!                        encoder_depth, distance_buckets, seed
//! params     f32 LE, in `Layout` order
//! crc32      u32 LE over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ModelConfig, Parameters};

pub const MAGIC: &[u8; 7] = b"W2KPE1\0";
pub const FORMAT_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 8 + 6 * 8;

pub fn model_to_bytes(params: &Parameters, config: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + params.len() * 4 + 4);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    for v in [
        config.vocab_size,
        config.embed_dim,
        config.hidden_dim,
        config.encoder_depth,
        config.distance_buckets,
        config.seed,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<(Parameters, ModelConfig)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::ChecksumMismatch {
            stored: 0,
            computed: crc32fast::hash(bytes),
        });
    }
    if bytes[7] != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: bytes[7],
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let field = |k: usize| {
        let at = 8 + k * 8;
        u64::from_le_bytes(body[at..at + 8].try_into().expect("8 bytes"))
    };
    let config = ModelConfig {
        vocab_size: field(0),
        embed_dim: field(1),
        hidden_dim: field(2),
        encoder_depth: field(3),
        distance_buckets: field(4),
        seed: field(5),
    };
    config.validate()?;
    let payload = &body[HEADER_LEN..];
    let expected = config.layout().total;
    if payload.len() != expected * 4 {
        return Err(Error::ShapeMismatch {
            expected: expected * 4,
            found: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((Parameters { values }, config))
}

pub fn save_model(params: &Parameters, config: &ModelConfig, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(params, config)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Parameters, ModelConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn model() -> (Parameters, ModelConfig) {
        let cfg = ModelConfig {
            vocab_size: 10,
            embed_dim: 4,
            hidden_dim: 3,
            encoder_depth: 2,
            distance_buckets: 16,
            seed: 99,
        };
        (init_params(&cfg).unwrap(), cfg)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, c) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&p, &c, &path).unwrap();
        let (p2, c2) = load_model(&path).unwrap();
        assert_eq!(c, c2);
        assert!(p.values.iter().zip(&p2.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(fs::read(&path).unwrap(), model_to_bytes(&p2, &c2));
    }

    #[test]
    fn header_layout() {
        let (p, c) = model();
        let bytes = model_to_bytes(&p, &c);
        assert_eq!(&bytes[..7], b"W2KPE1\0");
        assert_eq!(bytes[7], 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 10);
        assert_eq!(u64::from_le_bytes(bytes[48..56].try_into().unwrap()), 99);
        assert_eq!(bytes.len(), HEADER_LEN + 4 * p.len() + 4);
    }

    #[test]
    fn corruption_detected() {
        let (p, c) = model();
        let bytes = model_to_bytes(&p, &c);

        let truncated = &bytes[..bytes.len() - 9];
        assert!(matches!(model_from_bytes(truncated), Err(Error::ChecksumMismatch { .. })));
        assert!(matches!(model_from_bytes(&bytes[..20]), Err(Error::ChecksumMismatch { .. })));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(model_from_bytes(&magic), Err(Error::BadMagic)));

        let mut version = bytes.clone();
        version[7] = 2;
        assert!(matches!(
            model_from_bytes(&version),
            Err(Error::VersionMismatch { found: 2, .. })
        ));

        let mut flipped = bytes.clone();
        flipped[100] ^= 0x10;
        assert!(matches!(model_from_bytes(&flipped), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(&dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
