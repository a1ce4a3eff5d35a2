//! PNG renders and CSV exports of scalar and label maps.

use std::io::BufWriter;
use std::path::Path;

use super::io::write_bytes;
use super::maps::{LabelMap, ScalarMap};
use crate::error::{Error, Result};

/// Report legend: unburned, superficial, deep-partial, full-thickness.
pub const CLASS_COLORS: [[u8; 3]; 4] = [[46, 160, 67], [240, 200, 40], [240, 130, 30], [200, 30, 40]];
const EXTRA_COLORS: [[u8; 3]; 4] = [[60, 110, 220], [150, 80, 200], [30, 190, 190], [160, 160, 160]];
const MASKED_COLOR: [u8; 3] = [0, 0, 0];

fn encode_rgb(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let w = BufWriter::new(&mut buf);
        let mut enc = png::Encoder::new(w, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e.to_string()))?;
        writer.write_image_data(rgb).map_err(|e| Error::format(path, e.to_string()))?;
    }
    write_bytes(path, &buf)
}

pub fn label_color(label: u16) -> [u8; 3] {
    let l = label as usize;
    if l < CLASS_COLORS.len() {
        CLASS_COLORS[l]
    } else {
        EXTRA_COLORS[(l - CLASS_COLORS.len()) % EXTRA_COLORS.len()]
    }
}

/// 8-bit render of a scalar map, min-max stretched over unmasked pixels;
/// masked pixels are black.
pub fn scalar_png(path: &Path, map: &ScalarMap) -> Result<()> {
    let valid = map.valid_values();
    let lo = valid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgb = Vec::with_capacity(map.values().len() * 3);
    for (v, m) in map.values().iter().zip(map.mask()) {
        if *m {
            let g = (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8;
            rgb.extend_from_slice(&[g, g, g]);
        } else {
            rgb.extend_from_slice(&MASKED_COLOR);
        }
    }
    encode_rgb(path, map.cols(), map.rows(), &rgb)
}

pub fn label_png(path: &Path, map: &LabelMap) -> Result<()> {
    let mut rgb = Vec::with_capacity(map.labels().len() * 3);
    for (l, m) in map.labels().iter().zip(map.mask()) {
        rgb.extend_from_slice(&if *m { label_color(*l) } else { MASKED_COLOR });
    }
    encode_rgb(path, map.cols(), map.rows(), &rgb)
}

/// `row,col,value` for unmasked pixels.
pub fn scalar_csv(path: &Path, map: &ScalarMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["row", "col", map.name()]).map_err(err)?;
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            if let Some(v) = map.get(r, c) {
                w.write_record([r.to_string(), c.to_string(), v.to_string()]).map_err(err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_bytes(path, &bytes)
}

pub fn label_csv(path: &Path, map: &LabelMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["row", "col", "label"]).map_err(err)?;
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            if let Some(l) = map.get(r, c) {
                w.write_record([r.to_string(), c.to_string(), l.to_string()]).map_err(err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_bytes(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_has_signature_and_csv_skips_masked() {
        let dir = tempfile::tempdir().unwrap();
        let m = ScalarMap::new(2, 2, vec![0.0, 1.0, 2.0, 3.0], vec![true, true, false, true], "k", "").unwrap();
        let p = dir.path().join("m.png");
        scalar_png(&p, &m).unwrap();
        assert_eq!(&std::fs::read(&p).unwrap()[..4], b"\x89PNG");
        let c = dir.path().join("m.csv");
        scalar_csv(&c, &m).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("row,col,k"));
    }
}
