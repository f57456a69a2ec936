//! On-disk formats.
//!
//! Volumes and images are stored as raw little-endian `f32` payloads (x fastest)
//! next to a JSON sidecar holding the dimensions. The sidecar of `foo.raw` is
//! `foo.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, StandardPlaneDef};
use crate::volume::{SliceImage, Volume};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeSidecar {
    pub dims: [usize; 3],
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub standard_planes: Vec<StandardPlaneDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub dims: [usize; 2],
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
}

pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

fn write_f32(path: &Path, values: impl Iterator<Item = f32>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f32::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::PayloadSize {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    save_volume_with_planes(volume, &[], path)
}

pub fn save_volume_with_planes(volume: &Volume, planes: &[StandardPlaneDef], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_f32(path, volume.data().iter().copied())?;
    write_json(
        &sidecar_path(path),
        &VolumeSidecar {
            dims: volume.dims(),
            name: volume.name.clone(),
            standard_planes: planes.to_vec(),
        },
    )
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    Ok(load_volume_with_planes(path)?.0)
}

pub fn load_volume_with_planes(path: impl AsRef<Path>) -> Result<(Volume, Vec<StandardPlaneDef>)> {
    let path = path.as_ref();
    let meta: VolumeSidecar = read_json(&sidecar_path(path))?;
    let [w, h, d] = meta.dims;
    let data = read_f32(path, w * h * d)?;
    Ok((Volume::new(meta.dims, data, meta.name)?, meta.standard_planes))
}

pub fn save_image(image: &SliceImage, name: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_f32(path, image.pixels.iter().map(|&v| v as f32))?;
    write_json(
        &sidecar_path(path),
        &ImageSidecar {
            dims: [image.width, image.height],
            name: name.to_string(),
            pose: image.pose,
        },
    )
}

pub fn load_image(path: impl AsRef<Path>) -> Result<SliceImage> {
    let path = path.as_ref();
    let meta: ImageSidecar = read_json(&sidecar_path(path))?;
    let [w, h] = meta.dims;
    let data = read_f32(path, w * h)?;
    let mut image = SliceImage::new(w, h, data.into_iter().map(f64::from).collect())?;
    image.pose = meta.pose;
    Ok(image)
}

/// Binary PGM (P5) of the 8-bit quantized image.
pub fn encode_pgm(image: &SliceImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.to_u8());
    out
}

pub fn save_pgm(image: &SliceImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

/// Reads a binary PGM written by [`encode_pgm`] (no comment lines).
pub fn decode_pgm(bytes: &[u8]) -> Result<SliceImage> {
    let bad = || Error::InvalidArgument("not a binary 8-bit PGM".into());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos..pos + w * h).ok_or_else(bad)?;
    SliceImage::from_u8(w, h, data)
}
