//! On-disk persistence: raw little-endian float32 payloads with JSON
//! sidecars, plus the dataset manifest tying a simulation run together.
//!
//! The payload of `foo.raw` is `product(shape)` 32-bit floats in C row-major
//! order; the sidecar `foo.raw.json` records shape, dtype, axis names, and
//! (for projection or sinogram stacks) the angle grid. Compute stays in f64
//! everywhere; the f32 cast happens only here.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stacks::{ProjectionStack, SinogramStack, Volume};

pub const FORMAT_VERSION: u32 = 1;

/// Sidecar header describing one stored array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub version: u32,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub axes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_applied: Option<bool>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Writes raw f32 LE plus a JSON sidecar. Fails on non-finite values or an
/// empty axis before touching the filesystem.
pub fn save_array(
    data: &Array3<f64>,
    axes: [&str; 3],
    angles: Option<&[f64]>,
    mask_applied: Option<bool>,
    path: &Path,
) -> Result<()> {
    if data.shape().iter().any(|&d| d == 0) {
        return Err(Error::validation(format!(
            "save_array: empty axis in shape {:?}",
            data.shape()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(
            "save_array: non-finite value".to_string(),
        ));
    }
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &v in data.iter() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, &bytes)?;
    let meta = ArrayMeta {
        version: FORMAT_VERSION,
        shape: data.shape().to_vec(),
        dtype: "float32".to_string(),
        axes: axes.iter().map(|s| s.to_string()).collect(),
        angles: angles.map(|a| a.to_vec()),
        mask_applied,
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

/// Loads a stored array; values come back bit-identical to the f32 payload.
pub fn load_array(path: &Path) -> Result<(Array3<f64>, ArrayMeta)> {
    let sidecar = sidecar_path(path);
    let meta_bytes = fs::read(&sidecar)
        .map_err(|e| Error::corrupt(format!("sidecar {}: {e}", sidecar.display())))?;
    let meta: ArrayMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::corrupt(format!("sidecar {}: {e}", sidecar.display())))?;
    if meta.dtype != "float32" {
        return Err(Error::corrupt(format!("unsupported dtype {}", meta.dtype)));
    }
    if meta.shape.len() != 3 {
        return Err(Error::corrupt(format!(
            "expected 3 axes, sidecar has {:?}",
            meta.shape
        )));
    }
    let expected = meta.shape.iter().product::<usize>() * 4;
    let payload = fs::read(path)?;
    if payload.len() != expected {
        return Err(Error::corrupt(format!(
            "{}: payload {} bytes, sidecar shape needs {}",
            path.display(),
            payload.len(),
            expected
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let arr = Array3::from_shape_vec((meta.shape[0], meta.shape[1], meta.shape[2]), values)
        .map_err(|e| Error::corrupt(e.to_string()))?;
    Ok((arr, meta))
}

pub fn save_projections(p: &ProjectionStack, path: &Path) -> Result<()> {
    save_array(
        p.data(),
        ["angle", "row", "col"],
        Some(p.angles()),
        None,
        path,
    )
}

pub fn load_projections(path: &Path) -> Result<ProjectionStack> {
    let (data, meta) = load_array(path)?;
    let angles = meta
        .angles
        .ok_or_else(|| Error::corrupt(format!("{}: sidecar lacks angles", path.display())))?;
    ProjectionStack::new(data, angles)
}

pub fn save_sinograms(s: &SinogramStack, path: &Path) -> Result<()> {
    save_array(
        s.data(),
        ["row", "angle", "col"],
        Some(s.angles()),
        None,
        path,
    )
}

pub fn load_sinograms(path: &Path) -> Result<SinogramStack> {
    let (data, meta) = load_array(path)?;
    let angles = meta
        .angles
        .ok_or_else(|| Error::corrupt(format!("{}: sidecar lacks angles", path.display())))?;
    SinogramStack::new(data, angles)
}

pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    save_array(
        v.data(),
        ["slice", "y", "x"],
        None,
        Some(v.mask_applied()),
        path,
    )
}

pub fn load_volume(path: &Path) -> Result<Volume> {
    let (data, meta) = load_array(path)?;
    if meta.mask_applied == Some(true) {
        // Values were stored as f32, so re-verifying exact zeros still holds.
        Volume::new_masked(data)
    } else {
        Volume::new(data)
    }
}

/// Role of an array within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    LowQuality,
    HighQuality,
    Intermediate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest file.
    pub path: String,
    pub role: Role,
    pub shape: Vec<usize>,
}

/// Describes every array a simulation or inference run produced, the
/// geometry and degradation parameters used, and the creation seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub arrays: Vec<ManifestEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrade: Option<serde_json::Value>,
    pub seed: u64,
    /// Command and config that produced this dataset, for reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DatasetManifest {
    pub fn new(seed: u64) -> Self {
        DatasetManifest {
            version: FORMAT_VERSION,
            arrays: Vec::new(),
            geometry: None,
            degrade: None,
            seed,
            provenance: None,
        }
    }

    pub fn push(&mut self, path: impl Into<String>, role: Role, shape: &[usize]) {
        self.arrays.push(ManifestEntry {
            path: path.into(),
            role,
            shape: shape.to_vec(),
        });
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Loads and validates: every referenced payload must exist and its
    /// sidecar shape must match the manifest entry.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            fs::read(path).map_err(|e| Error::corrupt(format!("{}: {e}", path.display())))?;
        let manifest: DatasetManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::corrupt(format!("{}: {e}", path.display())))?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::corrupt(format!(
                "manifest version {} unsupported",
                manifest.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for entry in &manifest.arrays {
            let array_path = base.join(&entry.path);
            let sidecar = sidecar_path(&array_path);
            let meta_bytes = fs::read(&sidecar)
                .map_err(|e| Error::corrupt(format!("{}: {e}", sidecar.display())))?;
            let meta: ArrayMeta = serde_json::from_slice(&meta_bytes)
                .map_err(|e| Error::corrupt(format!("{}: {e}", sidecar.display())))?;
            if meta.shape != entry.shape {
                return Err(Error::corrupt(format!(
                    "{}: manifest shape {:?} != sidecar shape {:?}",
                    entry.path, entry.shape, meta.shape
                )));
            }
            if !array_path.exists() {
                return Err(Error::corrupt(format!("{} missing", array_path.display())));
            }
        }
        Ok(manifest)
    }

    pub fn entry(&self, role: Role) -> Option<&ManifestEntry> {
        self.arrays.iter().find(|e| e.role == role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.raw");
        let data = array![[[1.0, 2.0], [3.0, 4.0]]];
        save_array(&data, ["angle", "row", "col"], Some(&[0.0]), None, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap().len(), 16);
        let (loaded, meta) = load_array(&path).unwrap();
        assert_eq!(loaded, data);
        assert_eq!(meta.shape, vec![1, 2, 2]);
        assert_eq!(meta.angles, Some(vec![0.0]));
    }

    #[test]
    fn round_trip_matches_f32_cast() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("b.raw");
        let data = array![[[0.1, -1.7e-3], [std::f64::consts::PI, 1.0e20]]];
        save_array(&data, ["slice", "y", "x"], None, None, &path).unwrap();
        let (loaded, _) = load_array(&path).unwrap();
        for (a, b) in data.iter().zip(loaded.iter()) {
            assert_eq!(*a as f32, *b as f32);
            assert_eq!(*b, (*a as f32) as f64);
        }
    }

    #[test]
    fn empty_axis_is_validation_error() {
        let dir = tempdir().unwrap();
        let data = Array3::<f64>::zeros((0, 2, 2));
        let err = save_array(
            &data,
            ["angle", "row", "col"],
            None,
            None,
            &dir.path().join("c.raw"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn nan_is_validation_error() {
        let dir = tempdir().unwrap();
        let mut data = Array3::<f64>::zeros((1, 2, 2));
        data[[0, 0, 1]] = f64::NAN;
        let err = save_array(
            &data,
            ["angle", "row", "col"],
            None,
            None,
            &dir.path().join("d.raw"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("e.raw");
        let data = Array3::<f64>::ones((1, 2, 2));
        save_array(&data, ["angle", "row", "col"], None, None, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        let err = load_array(&path).unwrap_err();
        assert!(matches!(err, Error::CorruptFile(_)));
    }

    #[test]
    fn missing_sidecar_is_corrupt() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.raw");
        let data = Array3::<f64>::ones((1, 2, 2));
        save_array(&data, ["angle", "row", "col"], None, None, &path).unwrap();
        fs::remove_file(sidecar_path(&path)).unwrap();
        let err = load_array(&path).unwrap_err();
        assert!(matches!(err, Error::CorruptFile(_)));
    }

    #[test]
    fn manifest_validates_shapes_and_paths() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.raw");
        let data = Array3::<f64>::ones((2, 3, 4));
        save_array(&data, ["angle", "row", "col"], None, None, &path).unwrap();

        let mut manifest = DatasetManifest::new(7);
        manifest.push("g.raw", Role::LowQuality, &[2, 3, 4]);
        let mpath = dir.path().join("manifest.json");
        manifest.save(&mpath).unwrap();
        assert!(DatasetManifest::load(&mpath).is_ok());

        // Shape mismatch is caught.
        let mut bad = DatasetManifest::new(7);
        bad.push("g.raw", Role::LowQuality, &[2, 3, 5]);
        bad.save(&mpath).unwrap();
        assert!(matches!(
            DatasetManifest::load(&mpath),
            Err(Error::CorruptFile(_))
        ));

        // Missing payload is caught.
        let mut gone = DatasetManifest::new(7);
        gone.push("nope.raw", Role::HighQuality, &[1, 1, 1]);
        gone.save(&mpath).unwrap();
        assert!(matches!(
            DatasetManifest::load(&mpath),
            Err(Error::CorruptFile(_))
        ));
    }

    #[test]
    fn volume_round_trip_keeps_mask_flag() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let v = Volume::new_masked(Array3::zeros((1, 4, 4))).unwrap();
        save_volume(&v, &path).unwrap();
        let loaded = load_volume(&path).unwrap();
        assert!(loaded.mask_applied());
    }
}
