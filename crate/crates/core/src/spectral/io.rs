//! On-disk formats: a `.hdr.json` header sidecar next to a raw little-endian
//! payload. Cubes are float32 BIP with a one-byte-per-pixel mask file;
//! scalar maps are float32 (NaN = masked); label maps are uint16
//! (`0xFFFF` = masked).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cube::{HyperCube, Quantity};
use super::grid::WavelengthGrid;
use super::maps::{LabelMap, ScalarMap, LABEL_MASKED};
use crate::error::{Error, Result};

pub const BYTE_ORDER: &str = "little-endian";
pub const INTERLEAVE: &str = "BIP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub wavelengths_nm: Vec<f64>,
    pub quantity: Quantity,
    pub provenance: Vec<String>,
    pub byte_order: String,
    pub interleave: String,
    pub data_type: String,
    pub data_file: String,
    pub mask_file: String,
    #[serde(default)]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Scalar,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapHeader {
    pub kind: MapKind,
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub name: String,
    pub units: String,
    #[serde(default)]
    pub k: Option<u16>,
    pub byte_order: String,
    pub interleave: String,
    pub data_type: String,
    pub data_file: String,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// `stem` + suffix, e.g. `out/truth` → `out/truth.hdr.json`.
pub fn sibling(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn header_path(stem: &Path) -> PathBuf {
    sibling(stem, ".hdr.json")
}

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn f32_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

pub(crate) fn read_f32(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", expected * 4, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub(crate) fn sibling_in(header: &Path, name: &str) -> PathBuf {
    header.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn check_layout(path: &Path, byte_order: &str, interleave: &str) -> Result<()> {
    if byte_order != BYTE_ORDER || interleave != INTERLEAVE {
        return Err(Error::format(
            path,
            format!("unsupported layout {byte_order}/{interleave}"),
        ));
    }
    Ok(())
}

pub fn write_cube(stem: &Path, cube: &HyperCube, config_hash: Option<&str>) -> Result<()> {
    let raw = sibling(stem, ".raw");
    let mask = sibling(stem, ".mask");
    let header = CubeHeader {
        rows: cube.rows(),
        cols: cube.cols(),
        bands: cube.bands(),
        wavelengths_nm: cube.grid().as_slice().to_vec(),
        quantity: cube.quantity(),
        provenance: cube.provenance().to_vec(),
        byte_order: BYTE_ORDER.into(),
        interleave: INTERLEAVE.into(),
        data_type: "float32".into(),
        data_file: file_name(&raw),
        mask_file: file_name(&mask),
        config_hash: config_hash.map(str::to_owned),
    };
    write_bytes(&raw, &f32_bytes(cube.data().iter().copied()))?;
    write_bytes(&mask, &cube.mask().iter().map(|m| u8::from(*m)).collect::<Vec<_>>())?;
    write_json(&header_path(stem), &header)
}

pub fn read_cube_with_header(stem: &Path) -> Result<(HyperCube, CubeHeader)> {
    let hp = header_path(stem);
    let h: CubeHeader = read_json(&hp)?;
    check_layout(&hp, &h.byte_order, &h.interleave)?;
    if h.data_type != "float32" {
        return Err(Error::format(&hp, format!("unsupported data type {}", h.data_type)));
    }
    if h.bands != h.wavelengths_nm.len() {
        return Err(Error::format(&hp, "bands != wavelengths_nm length"));
    }
    let n = h.rows * h.cols;
    let data = read_f32(&sibling_in(&hp, &h.data_file), n * h.bands)?;
    let mp = sibling_in(&hp, &h.mask_file);
    let mask_bytes = fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
    if mask_bytes.len() != n {
        return Err(Error::format(&mp, format!("expected {n} mask bytes")));
    }
    let mask = mask_bytes.iter().map(|b| *b != 0).collect();
    let grid = WavelengthGrid::new(h.wavelengths_nm.clone())?;
    let cube = HyperCube::with_mask(h.rows, h.cols, grid, data, mask, h.quantity, h.provenance.clone())?;
    Ok((cube, h))
}

pub fn read_cube(stem: &Path) -> Result<HyperCube> {
    read_cube_with_header(stem).map(|(c, _)| c)
}

pub fn write_scalar_map(stem: &Path, map: &ScalarMap, config_hash: Option<&str>) -> Result<()> {
    let raw = sibling(stem, ".raw");
    let header = MapHeader {
        kind: MapKind::Scalar,
        rows: map.rows(),
        cols: map.cols(),
        bands: 1,
        name: map.name().into(),
        units: map.units().into(),
        k: None,
        byte_order: BYTE_ORDER.into(),
        interleave: INTERLEAVE.into(),
        data_type: "float32".into(),
        data_file: file_name(&raw),
        config_hash: config_hash.map(str::to_owned),
    };
    write_bytes(&raw, &f32_bytes(map.values().iter().copied()))?;
    write_json(&header_path(stem), &header)
}

pub fn read_scalar_map_with_header(stem: &Path) -> Result<(ScalarMap, MapHeader)> {
    let hp = header_path(stem);
    let h: MapHeader = read_json(&hp)?;
    check_layout(&hp, &h.byte_order, &h.interleave)?;
    if h.kind != MapKind::Scalar || h.data_type != "float32" {
        return Err(Error::format(&hp, "not a float32 scalar map"));
    }
    let values = read_f32(&sibling_in(&hp, &h.data_file), h.rows * h.cols)?;
    let mask = values.iter().map(|v| v.is_finite()).collect();
    let map = ScalarMap::new(h.rows, h.cols, values, mask, h.name.clone(), h.units.clone())?;
    Ok((map, h))
}

pub fn read_scalar_map(stem: &Path) -> Result<ScalarMap> {
    read_scalar_map_with_header(stem).map(|(m, _)| m)
}

pub fn write_label_map(stem: &Path, map: &LabelMap, config_hash: Option<&str>) -> Result<()> {
    let raw = sibling(stem, ".raw");
    let header = MapHeader {
        kind: MapKind::Label,
        rows: map.rows(),
        cols: map.cols(),
        bands: 1,
        name: "labels".into(),
        units: "class".into(),
        k: Some(map.k()),
        byte_order: BYTE_ORDER.into(),
        interleave: INTERLEAVE.into(),
        data_type: "uint16".into(),
        data_file: file_name(&raw),
        config_hash: config_hash.map(str::to_owned),
    };
    let bytes: Vec<u8> = map.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    write_bytes(&raw, &bytes)?;
    write_json(&header_path(stem), &header)
}

pub fn read_label_map_with_header(stem: &Path) -> Result<(LabelMap, MapHeader)> {
    let hp = header_path(stem);
    let h: MapHeader = read_json(&hp)?;
    check_layout(&hp, &h.byte_order, &h.interleave)?;
    if h.kind != MapKind::Label || h.data_type != "uint16" {
        return Err(Error::format(&hp, "not a uint16 label map"));
    }
    let k = h.k.ok_or_else(|| Error::format(&hp, "label map header lacks k"))?;
    let dp = sibling_in(&hp, &h.data_file);
    let bytes = fs::read(&dp).map_err(|e| Error::io(&dp, e))?;
    if bytes.len() != h.rows * h.cols * 2 {
        return Err(Error::format(&dp, "label payload size mismatch"));
    }
    let labels: Vec<u16> = bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    let mask = labels.iter().map(|l| *l != LABEL_MASKED).collect();
    let map = LabelMap::new(h.rows, h.cols, labels, mask, k)?;
    Ok((map, h))
}

pub fn read_label_map(stem: &Path) -> Result<LabelMap> {
    read_label_map_with_header(stem).map(|(m, _)| m)
}
