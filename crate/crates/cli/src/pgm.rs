//! Binary PGM (P5) export of score maps.

use std::path::Path;

use mhdmap::Image2D;

use crate::error::{CliError, CliResult};

/// Min–max normalized 8-bit PGM; a constant map encodes as all zeros.
pub fn encode_pgm(map: &Image2D) -> Vec<u8> {
    let (h, w) = map.shape();
    let (lo, hi) = (map.min(), map.max());
    let span = hi - lo;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(map.as_slice().iter().map(|&v| {
        if span > 0.0 && span.is_finite() {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

pub fn export_pgm(map: &Image2D, path: &Path) -> CliResult<()> {
    std::fs::write(path, encode_pgm(map)).map_err(|e| CliError::io(path, e))
}
