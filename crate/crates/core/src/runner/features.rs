use std::path::Path;

use crate::deep::LayerStack;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::runner::dataset::{write_pgm, GrayImage};

/// Tiles each column of `features` as an `h × w` image (column-major pixel
/// order, matching the PGM loader) into a near-square grid separated by
/// 1-pixel black lines.
///
/// Every tile is min–max scaled to 0–255 on its own; a constant column renders
/// as all zeros.
pub fn render_feature_grid(features: &DenseMatrix, (h, w): (usize, usize)) -> Result<GrayImage> {
    if h == 0 || w == 0 || h * w != features.rows() {
        return Err(Error::dim(
            "render_feature_grid",
            format!("{} features cannot be shown as {h}x{w} tiles", features.rows()),
        ));
    }
    let count = features.cols();
    let grid_cols = (count as f64).sqrt().ceil() as usize;
    let grid_rows = count.div_ceil(grid_cols);
    let width = grid_cols * w + grid_cols - 1;
    let height = grid_rows * h + grid_rows - 1;
    let mut img = GrayImage::new(width, height);

    for t in 0..count {
        let col = features.column(t);
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let top = (t / grid_cols) * (h + 1);
        let left = (t % grid_cols) * (w + 1);
        for c in 0..w {
            for r in 0..h {
                let v = col[c * h + r];
                let px = if hi > lo {
                    ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                };
                img.set(top + r, left + c, px);
            }
        }
    }
    Ok(img)
}

/// Writes the layer-`layer` (1-based) feature matrix of `stack` as a PGM grid.
pub fn export_feature_grid(
    stack: &LayerStack,
    layer: usize,
    image_shape: (usize, usize),
    path: &Path,
) -> Result<GrayImage> {
    let features = stack.layer_features(layer)?;
    let img = render_feature_grid(&features, image_shape)?;
    write_pgm(path, &img)?;
    Ok(img)
}
