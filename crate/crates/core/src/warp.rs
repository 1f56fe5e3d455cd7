//! Inverse-mapped image warping with bilinear sampling.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageEncoder};
use rayon::prelude::*;
use thiserror::Error;

use crate::geomkit::{is_degenerate_quad, signed_polygon_area, GeomError, Homography, Point2, QuadCorrespondence};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid("width and height must be at least 1".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(ImageError::Invalid(format!(
                "expected {} bytes, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel image from a per-pixel function.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self, ImageError> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, 1, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    pub fn load(path: &Path) -> Result<Self, ImageError> {
        Self::from_dynamic(image::open(path)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        Self::from_dynamic(image::load_from_memory(bytes)?)
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self, ImageError> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(buf) => Self::new(w, h, 1, buf.into_raw()),
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
                Self::new(w, h, 1, img.to_luma8().into_raw())
            }
            other => Self::new(w, h, 3, other.to_rgb8().into_raw()),
        }
    }

    /// PNG encoding; deterministic for identical pixels.
    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let color = if self.channels == 1 { ColorType::L8 } else { ColorType::Rgb8 };
        let mut out = Cursor::new(Vec::new());
        image::codecs::png::PngEncoder::new(&mut out).write_image(
            &self.pixels,
            self.width as u32,
            self.height as u32,
            color.into(),
        )?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

/// One bilinearly interpolated pixel; only the first `channels` values are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    values: [f64; 3],
    channels: usize,
}

impl Sample {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.channels]
    }
}

/// Bilinear interpolation of the four neighbours of `(x, y)`.
///
/// Returns `None` (the out-of-bounds sentinel) outside `[0, w−1] × [0, h−1]`.
pub fn bilinear_sample(img: &Image, x: f64, y: f64) -> Option<Sample> {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    if !(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;

    let mut values = [0.0; 3];
    for (c, v) in values.iter_mut().enumerate().take(img.channels) {
        let at = |xx: usize, yy: usize| img.pixels[(yy * img.width + xx) * img.channels + c] as f64;
        let (p00, p10, p01, p11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        let top = p00 + fx * (p10 - p00);
        let bottom = p01 + fx * (p11 - p01);
        *v = top + fy * (bottom - top);
    }
    Some(Sample { values, channels: img.channels })
}

/// Source→target homography plus output canvas description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifySpec {
    pub h: Homography,
    pub out_width: usize,
    pub out_height: usize,
    pub fill: u8,
}

/// Pulls positions within half a pixel outside `[0, max]` back onto the edge.
fn clamp_half_pixel(v: f64, max: f64) -> f64 {
    if v < 0.0 && v > -0.5 {
        0.0
    } else if v > max && v < max + 0.5 {
        max
    } else {
        v
    }
}

fn quantize(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.round().clamp(0.0, 255.0) as u8
}

/// Warps `img` into a new canvas by inverse mapping every target pixel.
///
/// Rows are processed in parallel; each output pixel depends only on its own
/// coordinates, so the result does not depend on the thread count.
pub fn rectify_image(img: &Image, spec: &RectifySpec) -> Result<Image, GeomError> {
    if spec.out_width == 0 || spec.out_height == 0 {
        return Err(GeomError::DegenerateCorrespondence("output size must be at least 1×1".into()));
    }
    let inv = spec.h.invert()?;
    let channels = img.channels;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let row_len = spec.out_width * channels;
    let mut pixels = vec![spec.fill; row_len * spec.out_height];

    pixels.par_chunks_mut(row_len).enumerate().for_each(|(v, row)| {
        for u in 0..spec.out_width {
            let Ok(src) = inv.map_point(Point2::new(u as f64, v as f64)) else {
                continue;
            };
            let sx = clamp_half_pixel(src.x, max_x);
            let sy = clamp_half_pixel(src.y, max_y);
            if let Some(sample) = bilinear_sample(img, sx, sy) {
                let out = &mut row[u * channels..(u + 1) * channels];
                for (o, s) in out.iter_mut().zip(sample.values()) {
                    *o = quantize(*s);
                }
            }
        }
    });

    Ok(Image {
        width: spec.out_width,
        height: spec.out_height,
        channels,
        pixels,
    })
}

/// Rectified frame as PNG bytes. When the warp leaves the decoded pixels
/// unchanged and the source already is a PNG, the source bytes come back as is.
pub fn rectify_encoded(source: &[u8], spec: &RectifySpec) -> Result<Vec<u8>, ImageError> {
    let img = Image::decode(source)?;
    let out = rectify_image(&img, spec)?;
    if out == img && source.starts_with(PNG_SIGNATURE) {
        return Ok(source.to_vec());
    }
    out.encode_png()
}

/// Homography taking the operator-marked lane quadrilateral onto an axis-aligned rectangle.
pub fn rectification_from_lane_quad(lane_quad: &[Point2; 4], target_rect: &[Point2; 4]) -> Result<Homography, GeomError> {
    if is_degenerate_quad(lane_quad) {
        return Err(GeomError::DegenerateCorrespondence("lane quad has three collinear corners".into()));
    }
    if is_degenerate_quad(target_rect) {
        return Err(GeomError::DegenerateCorrespondence("target rectangle has three collinear corners".into()));
    }
    let src_area = signed_polygon_area(lane_quad);
    let dst_area = signed_polygon_area(target_rect);
    if src_area.signum() != dst_area.signum() {
        return Err(GeomError::WindingMismatch);
    }
    Homography::from_correspondences(&QuadCorrespondence::new(*lane_quad, *target_rect)?)
}

/// Canvas size keeping the source pixel count with the aspect ratio of `rect`'s bounding box.
pub fn default_output_size(src_width: usize, src_height: usize, rect: &[Point2; 4]) -> (usize, usize) {
    let (min_x, max_x) = rect.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = rect.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let (rw, rh) = (max_x - min_x, max_y - min_y);
    if !(rw > 0.0 && rh > 0.0 && rw.is_finite() && rh.is_finite()) {
        return (src_width, src_height);
    }
    let aspect = rw / rh;
    let pixel_count = (src_width * src_height) as f64;
    let h = (pixel_count / aspect).sqrt();
    let w = h * aspect;
    ((w.round() as usize).max(1), (h.round() as usize).max(1))
}
