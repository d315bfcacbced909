//! Sidecar-header volumes and JSON curve documents.
//!
//! A volume is a JSON header (`*.json`) next to a raw payload of 32-bit
//! little-endian floats. The payload is channel-fastest, then x, then y,
//! then z: value `c` of voxel `(i, j, k)` sits at float offset
//! `c + channels · (i + nx · (j + ny · k))`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{Grid3, PointCloud, Polyline, ScalarField, Spacing, Vec3, VectorField};
use crate::{Error, Result};

pub const DTYPE_F32_LE: &str = "float32-le";
pub const COMPONENT_ORDER: &str = "channel,x,y,z";
pub const VOLUME_FORMAT: &str = "curvefield-volume/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub format: String,
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub channels: usize,
    pub dtype: String,
    /// Fastest-varying axis first.
    pub component_order: String,
    /// Payload file name, relative to the header's directory.
    pub data_file: String,
    /// Master seed of whatever randomness produced the values, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl VolumeHeader {
    pub fn for_grid(grid: &Grid3, channels: usize, data_file: String) -> Self {
        Self {
            format: VOLUME_FORMAT.to_string(),
            shape: grid.shape(),
            spacing: grid.spacing().as_array(),
            origin: grid.origin().into(),
            channels,
            dtype: DTYPE_F32_LE.to_string(),
            component_order: COMPONENT_ORDER.to_string(),
            data_file,
            seed: None,
        }
    }

    pub fn grid(&self) -> Result<Grid3> {
        let [sx, sy, sz] = self.spacing;
        Grid3::new(self.shape, Spacing::new(sx, sy, sz)?, Vec3::from(self.origin))
    }

    pub fn payload_len(&self) -> usize {
        self.shape.iter().product::<usize>() * self.channels * 4
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Volume {
    pub fn grid(&self) -> &Grid3 {
        match self {
            Volume::Scalar(s) => s.grid(),
            Volume::Vector(v) => v.grid(),
        }
    }

    fn channels(&self) -> usize {
        match self {
            Volume::Scalar(_) => 1,
            Volume::Vector(_) => 3,
        }
    }
}

fn payload_path(header_path: &Path, data_file: &str) -> PathBuf {
    header_path.parent().unwrap_or_else(|| Path::new(".")).join(data_file)
}

fn default_data_file(header_path: &Path) -> String {
    let stem = header_path.file_stem().and_then(|s| s.to_str()).unwrap_or("volume");
    format!("{stem}.raw")
}

/// Writes `header_path` and a `.raw` payload next to it. Values are stored as f32.
pub fn write_volume(header_path: impl AsRef<Path>, volume: &Volume) -> Result<VolumeHeader> {
    write_volume_with_seed(header_path, volume, None)
}

pub fn write_volume_with_seed(header_path: impl AsRef<Path>, volume: &Volume, seed: Option<u64>) -> Result<VolumeHeader> {
    let header_path = header_path.as_ref();
    let mut header = VolumeHeader::for_grid(volume.grid(), volume.channels(), default_data_file(header_path));
    header.seed = seed;
    let mut bytes = Vec::with_capacity(header.payload_len());
    match volume {
        Volume::Scalar(s) => {
            for &v in s.values() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Volume::Vector(f) => {
            for v in f.vectors() {
                for c in v.iter() {
                    bytes.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
        }
    }
    fs::write(payload_path(header_path, &header.data_file), &bytes)?;
    fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(header)
}

pub fn read_volume(header_path: impl AsRef<Path>) -> Result<(VolumeHeader, Volume)> {
    let header_path = header_path.as_ref();
    let header: VolumeHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    let corrupt = |reason: String| Error::CorruptFile { path: header_path.display().to_string(), reason };
    if header.dtype != DTYPE_F32_LE {
        return Err(Error::UnsupportedFormat(format!("dtype {:?}, expected {DTYPE_F32_LE:?}", header.dtype)));
    }
    if header.component_order != COMPONENT_ORDER {
        return Err(Error::UnsupportedFormat(format!(
            "component order {:?}, expected {COMPONENT_ORDER:?}",
            header.component_order
        )));
    }
    if header.channels != 1 && header.channels != 3 {
        return Err(Error::UnsupportedFormat(format!("{} channels; only 1 or 3 are supported", header.channels)));
    }
    let grid = header.grid().map_err(|e| corrupt(e.to_string()))?;
    let bytes = fs::read(payload_path(header_path, &header.data_file))?;
    if bytes.len() != header.payload_len() {
        return Err(corrupt(format!(
            "payload has {} bytes, header requires {}",
            bytes.len(),
            header.payload_len()
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let volume = if header.channels == 1 {
        Volume::Scalar(ScalarField::new(grid, floats).map_err(|e| corrupt(e.to_string()))?)
    } else {
        let vectors = floats.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        Volume::Vector(VectorField::new(grid, vectors).map_err(|e| corrupt(e.to_string()))?)
    };
    Ok((header, volume))
}

pub fn read_scalar(path: impl AsRef<Path>) -> Result<ScalarField> {
    match read_volume(path.as_ref())?.1 {
        Volume::Scalar(s) => Ok(s),
        Volume::Vector(_) => Err(Error::UnsupportedFormat(format!(
            "{} holds a vector field, expected a scalar map",
            path.as_ref().display()
        ))),
    }
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<VectorField> {
    match read_volume(path.as_ref())?.1 {
        Volume::Vector(v) => Ok(v),
        Volume::Scalar(_) => Err(Error::UnsupportedFormat(format!(
            "{} holds a scalar map, expected a vector field",
            path.as_ref().display()
        ))),
    }
}

/// Curve interchange document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub points_mm: Vec<[f64; 3]>,
    pub ordered: bool,
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Master seed of whatever randomness produced the curve, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CurveDocument {
    pub fn from_polyline(curve: &Polyline, provenance: impl Into<String>) -> Self {
        Self {
            points_mm: curve.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            ordered: true,
            provenance: provenance.into(),
            warnings: Vec::new(),
            seed: None,
        }
    }

    pub fn to_polyline(&self) -> Result<Polyline> {
        if !self.ordered {
            return Err(crate::invalid("curve document is not ordered"));
        }
        Polyline::new(self.points_mm.iter().map(|p| Vec3::from(*p)).collect())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloudDocument {
    pub points_mm: Vec<[f64; 3]>,
    pub confidence: Vec<f64>,
    #[serde(default)]
    pub provenance: String,
}

impl PointCloudDocument {
    pub fn from_cloud(cloud: &PointCloud, provenance: impl Into<String>) -> Self {
        Self {
            points_mm: cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            confidence: cloud.confidence().to_vec(),
            provenance: provenance.into(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
