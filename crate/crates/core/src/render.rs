//! Heatmap rendering: binary PPM images under a fixed diverging colormap
//! (blue = negative, white = zero, red = positive), plus a JSON sidecar
//! recording the exact value range so images stay interpretable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Maps `t` in [-1, 1] onto the blue-white-red diverging ramp.
pub fn diverging_rgb(t: f64) -> [u8; 3] {
    let t = t.clamp(-1.0, 1.0);
    let ramp = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    if t >= 0.0 {
        [255, ramp(1.0 - t), ramp(1.0 - t)]
    } else {
        [ramp(1.0 + t), ramp(1.0 + t), 255]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSidecar {
    pub min: f64,
    pub max: f64,
    /// Symmetric color scale: full red/blue at `+-vmax = max(|min|, |max|)`.
    pub vmax: f64,
    pub rows: usize,
    pub cols: usize,
    pub scale: usize,
}

pub struct RenderedImage {
    pub ppm: Vec<u8>,
    pub sidecar: RenderSidecar,
}

/// Renders the grid as a P6 PPM, `scale x scale` pixels per cell. Row 0 is
/// drawn at the bottom so mel/frequency maps read like spectrograms. A zero
/// grid renders uniformly white.
pub fn render_ppm<T: Scalar>(grid: &Grid<T>, scale: usize) -> Result<RenderedImage> {
    if grid.rows() == 0 || grid.cols() == 0 || scale == 0 {
        return Err(Error::InvalidArgument(
            "cannot render an empty grid or zero scale".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in grid.data() {
        let f = v.to_f64().unwrap();
        min = min.min(f);
        max = max.max(f);
    }
    let vmax = min.abs().max(max.abs());

    let width = grid.cols() * scale;
    let height = grid.rows() * scale;
    let mut ppm = format!("P6\n{width} {height}\n255\n").into_bytes();
    ppm.reserve(width * height * 3);
    for py in 0..height {
        let r = grid.rows() - 1 - py / scale;
        for px in 0..width {
            let c = px / scale;
            let v = grid[(r, c)].to_f64().unwrap();
            let t = if vmax > 0.0 { v / vmax } else { 0.0 };
            ppm.extend_from_slice(&diverging_rgb(t));
        }
    }
    Ok(RenderedImage {
        ppm,
        sidecar: RenderSidecar {
            min,
            max,
            vmax,
            rows: grid.rows(),
            cols: grid.cols(),
            scale,
        },
    })
}

/// Writes `<path>` (PPM) and `<path>.json` (sidecar).
pub fn write_ppm_with_sidecar<T: Scalar>(
    path: &Path,
    grid: &Grid<T>,
    scale: usize,
) -> Result<RenderSidecar> {
    let rendered = render_ppm(grid, scale)?;
    fs::write(path, &rendered.ppm)?;
    let mut sidecar_path = path.as_os_str().to_owned();
    sidecar_path.push(".json");
    fs::write(
        sidecar_path,
        serde_json::to_string_pretty(&rendered.sidecar)?,
    )?;
    Ok(rendered.sidecar)
}
