use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{SynthesisInfo, VoxelDataset};
use super::grid::{VoxelClass, VoxelGrid};
use crate::error::{Error, Result};

pub const F4DV_MAGIC: &str = "F4DV";
pub const F4DV_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    velocity: String,
    origin: String,
    voxel_size: String,
    phase_duration: String,
    t0: String,
    pressure: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            velocity: "cm/s".into(),
            origin: "cm".into(),
            voxel_size: "mm".into(),
            phase_duration: "ms".into(),
            t0: "s".into(),
            pressure: "Ba".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    magic: String,
    version: u32,
    grid: VoxelGrid,
    units: Units,
    p_mean: f64,
    synthesis: SynthesisInfo,
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<path>.json` and `<path>.bin`.
pub fn write_dataset(dataset: &VoxelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        magic: F4DV_MAGIC.into(),
        version: F4DV_VERSION,
        grid: dataset.grid.clone(),
        units: Units::default(),
        p_mean: dataset.p_mean,
        synthesis: dataset.info.clone(),
    };
    let json_path = sibling(path, "json");
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    let mut bytes = Vec::with_capacity(dataset.velocities.len() * 4 + dataset.mask.len());
    for v in &dataset.velocities {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend(dataset.mask.iter().map(|c| *c as u8));
    let bin_path = sibling(path, "bin");
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<VoxelDataset> {
    let path = path.as_ref();
    let json_path = sibling(path, "json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptedDataset(format!("header is not JSON: {e}")))?;
    if value.get("magic").and_then(|m| m.as_str()) != Some(F4DV_MAGIC) {
        return Err(Error::CorruptedDataset("bad magic".into()));
    }
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != F4DV_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: F4DV_VERSION,
        });
    }
    let header: Header =
        serde_json::from_value(value).map_err(|e| Error::CorruptedDataset(format!("bad header: {e}")))?;
    header
        .grid
        .validate()
        .map_err(|e| Error::CorruptedDataset(format!("bad grid: {e}")))?;
    let bin_path = sibling(path, "bin");
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let nvox = header.grid.voxel_count();
    let nvel = header.grid.phases * nvox * 3;
    if bytes.len() != nvel * 4 + nvox {
        return Err(Error::CorruptedDataset(format!(
            "payload has {} bytes, header implies {}",
            bytes.len(),
            nvel * 4 + nvox
        )));
    }
    let velocities: Vec<f32> = bytes[..nvel * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mask = bytes[nvel * 4..]
        .iter()
        .map(|&b| VoxelClass::from_code(b).ok_or_else(|| Error::CorruptedDataset(format!("mask code {b}"))))
        .collect::<Result<Vec<_>>>()?;
    for (k, chunk) in velocities.chunks_exact(3).enumerate() {
        if mask[k % nvox].observed() && !chunk.iter().all(|v| v.is_finite()) {
            return Err(Error::CorruptedDataset(format!("non-finite velocity in record {k}")));
        }
    }
    Ok(VoxelDataset {
        grid: header.grid,
        velocities,
        mask,
        p_mean: header.p_mean,
        info: header.synthesis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{generate_dataset, SynthesisOptions};
    use crate::physics::{ReferenceFlow, RheologyModel};
    use crate::qmc::Domain;

    fn sample() -> VoxelDataset {
        let d = Domain::Cylinder {
            radius: 0.4,
            length: 1.0,
        };
        let g = VoxelGrid::covering(&d, [2.0, 2.0, 2.0], 0.1, 3, 42.6, 0.0).unwrap();
        let model = RheologyModel::from_hematocrit(32.5).unwrap();
        let f = ReferenceFlow::pulsatile_pipe(&model, 0.4, 50.0, 3.0 * 0.0426, 0.3);
        let opts = SynthesisOptions {
            points_per_voxel: 16,
            pressure_points: 128,
            seed: 5,
        };
        generate_dataset(&f, &d, &g, Some(model), opts).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("flow");
        let ds = sample();
        write_dataset(&ds, &base).unwrap();
        let back = read_dataset(&base).unwrap();
        assert_eq!(back, ds);
        let bits = |d: &VoxelDataset| d.velocities.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ds));
        assert_eq!(back.p_mean.to_bits(), ds.p_mean.to_bits());
        write_dataset(&back, dir.path().join("again")).unwrap();
        assert_eq!(
            fs::read(dir.path().join("flow.bin")).unwrap(),
            fs::read(dir.path().join("again.bin")).unwrap()
        );
    }

    #[test]
    fn wrong_magic_and_length() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("flow");
        write_dataset(&sample(), &base).unwrap();
        let json = sibling(&base, "json");
        let text = fs::read_to_string(&json).unwrap();
        fs::write(&json, text.replace("\"F4DV\"", "\"F4DX\"")).unwrap();
        assert!(matches!(read_dataset(&base), Err(Error::CorruptedDataset(_))));
        fs::write(&json, &text).unwrap();
        let bin = sibling(&base, "bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes.pop();
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(read_dataset(&base), Err(Error::CorruptedDataset(_))));
        fs::write(&json, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
        assert!(matches!(read_dataset(&base), Err(Error::UnsupportedVersion { found: 2, .. })));
    }
}
