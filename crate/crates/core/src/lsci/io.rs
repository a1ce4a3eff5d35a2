use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameStack;
use crate::error::{Error, Result};
use crate::spectral::io::{header_path, sibling, BYTE_ORDER};
use crate::spectral::io::{f32_bytes, file_name, read_f32, read_json, sibling_in, write_bytes, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStackHeader {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub exposure_s: f64,
    pub rate_hz: f64,
    pub byte_order: String,
    /// Always `frame-major`.
    pub layout: String,
    pub data_type: String,
    pub data_file: String,
    #[serde(default)]
    pub config_hash: Option<String>,
}

const LAYOUT: &str = "frame-major";

pub fn write_frame_stack(stem: &Path, stack: &FrameStack, config_hash: Option<&str>) -> Result<()> {
    let raw = sibling(stem, ".raw");
    let h = FrameStackHeader {
        frames: stack.frames(),
        rows: stack.rows(),
        cols: stack.cols(),
        exposure_s: stack.exposure_s(),
        rate_hz: stack.rate_hz(),
        byte_order: BYTE_ORDER.into(),
        layout: LAYOUT.into(),
        data_type: "float32".into(),
        data_file: file_name(&raw),
        config_hash: config_hash.map(str::to_owned),
    };
    write_bytes(&raw, &f32_bytes(stack.data().iter().copied()))?;
    write_json(&header_path(stem), &h)
}

pub fn read_frame_stack_with_header(stem: &Path) -> Result<(FrameStack, FrameStackHeader)> {
    let hp = header_path(stem);
    let h: FrameStackHeader = read_json(&hp)?;
    if h.byte_order != BYTE_ORDER || h.layout != LAYOUT || h.data_type != "float32" {
        return Err(Error::format(&hp, format!("unsupported frame layout {}/{}", h.byte_order, h.layout)));
    }
    let data = read_f32(&sibling_in(&hp, &h.data_file), h.frames * h.rows * h.cols)?;
    let s = FrameStack::new(h.frames, h.rows, h.cols, data, h.exposure_s, h.rate_hz)?;
    Ok((s, h))
}

pub fn read_frame_stack(stem: &Path) -> Result<FrameStack> {
    read_frame_stack_with_header(stem).map(|x| x.0)
}
