//! Checkpoint file: one JSON header line, a newline, then the parameters as
//! little-endian f64 in layer order (each layer W row-major, then b).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkArchitecture, NeuralField, ScaleSet};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "hemopinn-checkpoint";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    magic: String,
    version: u32,
    architecture: NetworkArchitecture,
    activation: String,
    scales: ScaleSet,
    parameter_count: usize,
}

pub fn save_checkpoint(field: &NeuralField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        magic: MAGIC.to_string(),
        version: CHECKPOINT_VERSION,
        architecture: field.architecture(),
        activation: "swish".to_string(),
        scales: *field.scales(),
        parameter_count: field.parameter_count(),
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    bytes.reserve(8 * field.parameter_count());
    for v in field.parameters() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NeuralField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptedCheckpoint("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..split])
        .map_err(|e| Error::CorruptedCheckpoint(format!("header: {e}")))?;
    if header.magic != MAGIC {
        return Err(Error::CorruptedCheckpoint(format!("bad magic {:?}", header.magic)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if header.activation != "swish" {
        return Err(Error::CorruptedCheckpoint(format!(
            "unknown activation {:?}",
            header.activation
        )));
    }
    header
        .architecture
        .validate()
        .map_err(|e| Error::CorruptedCheckpoint(e.to_string()))?;
    let expected = header.architecture.parameter_count();
    if header.parameter_count != expected {
        return Err(Error::CorruptedCheckpoint(format!(
            "header declares {} parameters, architecture implies {expected}",
            header.parameter_count
        )));
    }
    let payload = &bytes[split + 1..];
    if payload.len() != 8 * expected {
        return Err(Error::CorruptedCheckpoint(format!(
            "parameter block has {} bytes, expected {}",
            payload.len(),
            8 * expected
        )));
    }
    let theta: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
        .collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::CorruptedCheckpoint("non-finite parameter".into()));
    }
    NeuralField::from_parameters(header.architecture, header.scales, theta)
        .map_err(|e| Error::CorruptedCheckpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::DifferentiableField;
    use crate::network::init_network;

    fn net() -> NeuralField {
        init_network(NetworkArchitecture::new(2, 12, 42), ScaleSet::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let a = net();
        save_checkpoint(&a, &path).unwrap();
        let b = load_checkpoint(&path).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        for i in 0..1000 {
            let s = i as f64 * 0.01;
            let p = [s.sin(), s.cos(), 0.3 * s, s * 0.1];
            assert_eq!(a.eval(p), b.eval(p));
        }
    }

    #[test]
    fn truncated_file_is_corrupted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CorruptedCheckpoint(_))));
    }

    #[test]
    fn edited_width_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes).replacen("\"width\":12", "\"width\":13", 1);
        let split = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header_end = text.find('\n').unwrap();
        let mut edited = text[..header_end].as_bytes().to_vec();
        edited.extend_from_slice(&bytes[split..]);
        fs::write(&path, edited).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CorruptedCheckpoint(_))));
    }

    #[test]
    fn other_version_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let split = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header = String::from_utf8(bytes[..split].to_vec()).unwrap().replace("\"version\":1", "\"version\":7");
        let mut edited = header.into_bytes();
        edited.extend_from_slice(&bytes[split..]);
        fs::write(&path, edited).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
    }
}
