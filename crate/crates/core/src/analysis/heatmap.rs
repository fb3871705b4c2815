//! Heatmap image: one pixel per matrix cell, blue (0) to red (1).

use std::path::Path;

use super::AnalysisError;

/// Colour of a similarity value, clamped to [0, 1].
pub fn color(value: f64) -> [u8; 3] {
    let v = if value.is_finite() { value.clamp(0.0, 1.0) } else { 0.0 };
    let red = (v * 255.0).round() as u8;
    [red, 0, 255 - red]
}

pub fn render(values: &[Vec<f64>]) -> image::RgbImage {
    let n = values.len() as u32;
    image::RgbImage::from_fn(n, n, |x, y| image::Rgb(color(values[y as usize][x as usize])))
}

pub fn write_png(values: &[Vec<f64>], path: &Path) -> Result<(), AnalysisError> {
    render(values)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| AnalysisError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_size() {
        assert_eq!(color(0.0), [0, 0, 255]);
        assert_eq!(color(1.0), [255, 0, 0]);
        assert_eq!(color(-0.3), color(0.0));
        let img = render(&vec![vec![0.5; 15]; 15]);
        assert_eq!(img.dimensions(), (15, 15));
    }
}
