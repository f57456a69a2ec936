//! Frame conditioning: center crop with aspect-preserving resize, and an
//! edge-preserving bilateral smooth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::SliceImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropSpec {
    pub crop_w: usize,
    pub crop_h: usize,
    /// Side of the square output.
    pub out: usize,
    pub pad_value: f64,
}

impl Default for CropSpec {
    fn default() -> Self {
        CropSpec {
            crop_w: 288,
            crop_h: 224,
            out: 160,
            pad_value: 0.0,
        }
    }
}

impl CropSpec {
    pub fn validate(&self) -> Result<()> {
        if self.crop_w == 0 || self.crop_h == 0 || self.out == 0 {
            return Err(Error::InvalidArgument("crop and output sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pad_value) {
            return Err(Error::InvalidArgument("pad value must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Size of the resized crop inside the square output, `(width, height)`.
    pub fn content_size(&self) -> (usize, usize) {
        let scale = self.out as f64 / self.crop_w.max(self.crop_h) as f64;
        let w = ((self.crop_w as f64 * scale).round() as usize).clamp(1, self.out);
        let h = ((self.crop_h as f64 * scale).round() as usize).clamp(1, self.out);
        (w, h)
    }
}

fn bilinear(image: &SliceImage, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (image.width - 1) as f64);
    let y = y.clamp(0.0, (image.height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(image.width - 1), (y0 + 1).min(image.height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = image.get(x0, y0) * (1.0 - fx) + image.get(x1, y0) * fx;
    let bottom = image.get(x0, y1) * (1.0 - fx) + image.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Center-crops `frame` to the spec's crop, scales the longer side to the output
/// size (bilinear, pixel centers aligned) and pads the shorter side
/// symmetrically with `pad_value`.
pub fn crop_resize(frame: &SliceImage, spec: &CropSpec) -> Result<SliceImage> {
    spec.validate()?;
    if frame.width < spec.crop_w || frame.height < spec.crop_h {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} frame cannot be cropped to {}x{}",
            frame.width, frame.height, spec.crop_w, spec.crop_h
        )));
    }
    let x_off = (frame.width - spec.crop_w) / 2;
    let y_off = (frame.height - spec.crop_h) / 2;
    let crop = SliceImage::from_fn(spec.crop_w, spec.crop_h, |u, v| frame.get(u + x_off, v + y_off));

    let (cw, ch) = spec.content_size();
    let left = (spec.out - cw) / 2;
    let top = (spec.out - ch) / 2;
    let sx = spec.crop_w as f64 / cw as f64;
    let sy = spec.crop_h as f64 / ch as f64;
    Ok(SliceImage::from_fn(spec.out, spec.out, |u, v| {
        if u < left || u >= left + cw || v < top || v >= top + ch {
            return spec.pad_value;
        }
        let x = (u - left) as f64 + 0.5;
        let y = (v - top) as f64 + 0.5;
        bilinear(&crop, x * sx - 0.5, y * sy - 0.5)
    }))
}

/// Bilateral filter over a `(2 radius + 1)^2` window with spatial sigma
/// `radius / 2` and the given intensity sigma. Each output is a convex
/// combination of its neighbours, so the output stays within the input range.
pub fn smooth(image: &SliceImage, radius: usize, intensity_sigma: f64) -> Result<SliceImage> {
    if radius == 0 {
        return Err(Error::InvalidArgument("smoothing radius must be at least 1".into()));
    }
    if !(intensity_sigma > 0.0) {
        return Err(Error::InvalidArgument("intensity sigma must be positive".into()));
    }
    let r = radius as isize;
    let spatial_sigma = radius as f64 / 2.0;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * spatial_sigma * spatial_sigma)).exp())
        .collect();
    let range = 2.0 * intensity_sigma * intensity_sigma;
    let (w, h) = (image.width as isize, image.height as isize);
    let mut out = image.clone();
    out.mask = None;
    for y in 0..h {
        for x in 0..w {
            let centre = image.get(x as usize, y as usize);
            let (mut num, mut den) = (0.0, 0.0);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && nx < w && ny >= 0 && ny < h {
                        let diff = image.get(nx as usize, ny as usize) - centre;
                        let weight = spatial[k] * (-(diff * diff) / range).exp();
                        num += weight * diff;
                        den += weight;
                    }
                    k += 1;
                }
            }
            // offsets from the centre keep flat regions exactly flat
            out.pixels[(y * w + x) as usize] = (centre + num / den).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
