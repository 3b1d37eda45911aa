//! 8-bit grayscale heatmaps of tabulated fields.

use std::io::Write;

use npr_core::reference::FieldGrid;

/// Binary PGM (`P5`) image with one pixel per grid cell: row `i` is time
/// index `i`, column `j` is space index `j`. Values map linearly onto
/// `0..=255` with the minimum black and the maximum white; a constant field
/// is mid-gray. Returns `(min, max)`.
pub fn write_pgm<W: Write>(field: &FieldGrid, mut out: W) -> std::io::Result<(f64, f64)> {
    let (lo, hi) = field.min_max();
    write!(out, "P5\n{} {}\n255\n", field.nx(), field.nt())?;
    let span = hi - lo;
    let pixels: Vec<u8> = field
        .values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8
            } else {
                128
            }
        })
        .collect();
    out.write_all(&pixels)?;
    Ok((lo, hi))
}

/// Contents of the sidecar file recording the value range.
pub fn range_sidecar(lo: f64, hi: f64) -> String {
    format!("min {lo}\nmax {hi}\n")
}
