//! On-disk volume format: `<name>.vol.json` header plus `<name>.vol.raw`
//! little-endian voxel data in x-fastest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: f64,
    pub origin_mm: [f64; 3],
    pub dtype: Dtype,
}

impl VolumeHeader {
    fn new(grid: &GridSpec, dtype: Dtype) -> Self {
        Self {
            dims: grid.dims,
            spacing_mm: grid.spacing_mm,
            origin_mm: grid.origin_mm,
            dtype,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dims, self.spacing_mm, self.origin_mm)
    }
}

/// `(header, raw)` paths for a volume stem such as `dataset/0001/shape`.
pub fn volume_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref().as_os_str().to_owned();
    let mut json = stem.clone();
    json.push(".vol.json");
    let mut raw = stem;
    raw.push(".vol.raw");
    (json.into(), raw.into())
}

fn write_header(path: &Path, header: &VolumeHeader) -> Result<()> {
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_header(path: &Path, expect: Dtype) -> Result<VolumeHeader> {
    let header: VolumeHeader = serde_json::from_str(&fs::read_to_string(path)?)?;
    if header.dtype != expect {
        return Err(Error::Format(format!(
            "{}: expected dtype {expect:?}, found {:?}",
            path.display(),
            header.dtype
        )));
    }
    Ok(header)
}

pub fn encode_occupancy(vol: &OccupancyVolume) -> Vec<u8> {
    vol.data().iter().map(|&b| b as u8).collect()
}

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    field
        .data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

pub fn write_occupancy(vol: &OccupancyVolume, stem: impl AsRef<Path>) -> Result<()> {
    let (json, raw) = volume_paths(stem);
    write_header(&json, &VolumeHeader::new(vol.grid(), Dtype::U8))?;
    fs::write(raw, encode_occupancy(vol))?;
    Ok(())
}

pub fn read_occupancy(stem: impl AsRef<Path>) -> Result<OccupancyVolume> {
    let (json, raw) = volume_paths(stem);
    let grid = read_header(&json, Dtype::U8)?.grid()?;
    let bytes = fs::read(&raw)?;
    if bytes.len() != grid.len() {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            raw.display(),
            grid.len(),
            bytes.len()
        )));
    }
    if let Some(b) = bytes.iter().find(|&&b| b > 1) {
        return Err(Error::Format(format!("occupancy byte {b} is not 0 or 1")));
    }
    OccupancyVolume::new(grid, bytes.iter().map(|&b| b == 1).collect())
}

pub fn write_field(field: &ScalarField, stem: impl AsRef<Path>) -> Result<()> {
    let (json, raw) = volume_paths(stem);
    write_header(&json, &VolumeHeader::new(field.grid(), Dtype::F32))?;
    fs::write(raw, encode_field(field))?;
    Ok(())
}

pub fn read_field(stem: impl AsRef<Path>) -> Result<ScalarField> {
    let (json, raw) = volume_paths(stem);
    let grid = read_header(&json, Dtype::F32)?.grid()?;
    let bytes = fs::read(&raw)?;
    if bytes.len() != grid.len() * 4 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            raw.display(),
            grid.len() * 4,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ScalarField::new(grid, data)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_and_field_files() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new([3, 4, 5], 2.5, [-1.0, 0.0, 1.0]).unwrap();
        let vol = OccupancyVolume::from_fn(grid, |v| (v[0] + v[2]) % 2 == 0);
        let stem = dir.path().join("shape");
        write_occupancy(&vol, &stem).unwrap();
        assert_eq!(read_occupancy(&stem).unwrap(), vol);
        let raw = fs::read(dir.path().join("shape.vol.raw")).unwrap();
        assert_eq!(raw[0], 1);
        assert_eq!(raw[1], 0);
        let header: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("shape.vol.json")).unwrap()).unwrap();
        assert_eq!(header["dtype"], "u8");
        assert_eq!(header["dims"], serde_json::json!([3, 4, 5]));

        let field = ScalarField::from_fn(grid, |v| v[1] as f64 * 0.5 - 1.0);
        write_field(&field, dir.path().join("f")).unwrap();
        assert_eq!(read_field(dir.path().join("f")).unwrap(), field);
        assert!(read_occupancy(dir.path().join("f")).is_err());
    }
}
