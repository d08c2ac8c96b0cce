//! Decoded rasters and the color-space conversions the feature extractors use.

use std::path::Path;

use image::imageops::FilterType;

use crate::{Error, Result};

/// Rec. 601 luma weights. The Y channel of YUV uses the same weights, so
/// brightness and grayscale share one transform.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!("image dimensions must be positive, got {width}x{height}")));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::Contract(format!(
                "{width}x{height} RGB image needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Single-color image.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Bilinear downscale so the longer side is at most `max_side` pixels.
    /// Images already within the cap are returned unchanged.
    pub fn downscaled(&self, max_side: u32) -> ImageBuffer {
        let long = self.width.max(self.height);
        if max_side == 0 || long <= max_side {
            return self.clone();
        }
        let scale = max_side as f64 / long as f64;
        let w = ((self.width as f64 * scale).round() as u32).max(1);
        let h = ((self.height as f64 * scale).round() as u32).max(1);
        let src = image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length is an invariant of ImageBuffer");
        let out = image::imageops::resize(&src, w, h, FilterType::Triangle);
        ImageBuffer { width: w, height: h, data: out.into_raw() }
    }
}

/// Row-major real-valued luma raster, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayBuffer {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayBuffer {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::Contract(format!(
                "{width}x{height} gray image needs {} values, got {}",
                width as usize * height as usize,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(Error::Contract(format!("gray value {bad} outside [0, 255]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Decodes a PNG or JPEG file into RGB. Transparent pixels are composited
/// over white.
pub fn decode_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    let rgba = decoded.to_rgba8();
    let (width, height) = rgba.dimensions();
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for px in rgba.pixels() {
        let alpha = px[3] as u32;
        for &c in &px.0[..3] {
            let blended = (c as u32 * alpha + 255 * (255 - alpha) + 127) / 255;
            data.push(blended as u8);
        }
    }
    ImageBuffer::new(width, height, data)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })
}

/// Rec. 601 luma of one pixel. Gray pixels map to their exact value.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb;
    if r == g && g == b {
        return r as f64;
    }
    let y = LUMA_WEIGHTS[0] * r as f64 + LUMA_WEIGHTS[1] * g as f64 + LUMA_WEIGHTS[2] * b as f64;
    y.clamp(0.0, 255.0)
}

pub fn to_grayscale(img: &ImageBuffer) -> GrayBuffer {
    GrayBuffer { width: img.width, height: img.height, data: img.pixels().map(luma).collect() }
}

/// Hexcone HSV: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
/// Achromatic pixels get hue 0.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let max = *rgb.iter().max().unwrap();
    let min = *rgb.iter().min().unwrap();
    let v = max as f64 / 255.0;
    let s = if max == 0 { 0.0 } else { (max - min) as f64 / max as f64 };
    (hue(rgb, max, min), s, v)
}

/// Bi-hexcone HSL: hue in degrees `[0, 360)`, saturation and lightness in `[0, 1]`.
pub fn rgb_to_hsl(rgb: [u8; 3]) -> (f64, f64, f64) {
    let max = *rgb.iter().max().unwrap();
    let min = *rgb.iter().min().unwrap();
    let l = (max as f64 / 255.0 + min as f64 / 255.0) / 2.0;
    let s = if max == min {
        0.0
    } else {
        // 1 - |2l - 1| expressed on integer channel sums avoids cancellation.
        let sum = max as i32 + min as i32;
        let denom = 255 - (sum - 255).abs();
        (max - min) as f64 / denom as f64
    };
    (hue(rgb, max, min), s.min(1.0), l)
}

fn hue([r, g, b]: [u8; 3], max: u8, min: u8) -> f64 {
    if max == min {
        return 0.0;
    }
    let delta = (max - min) as f64;
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let sector = if max as f64 == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max as f64 == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let h = sector * 60.0;
    if h >= 360.0 {
        h - 360.0
    } else {
        h
    }
}

/// Inverse of [`rgb_to_hsv`], rounding to the nearest 8-bit channel.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    chroma_to_rgb(h, c, v - c)
}

/// Inverse of [`rgb_to_hsl`], rounding to the nearest 8-bit channel.
pub fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    chroma_to_rgb(h, c, l - c / 2.0)
}

fn chroma_to_rgb(h: f64, c: f64, m: f64) -> [u8; 3] {
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn luma_examples() {
        assert_eq!(luma([255, 255, 255]), 255.0);
        assert_eq!(luma([0, 0, 0]), 0.0);
        assert!(close(luma([255, 0, 0]), 76.245));
    }

    #[test]
    fn hsv_examples() {
        assert_eq!(rgb_to_hsv([255, 0, 0]), (0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv([128, 128, 128]), (0.0, 0.0, 128.0 / 255.0));
        assert_eq!(rgb_to_hsv([0, 0, 255]), (240.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv([0, 255, 0]).0, 120.0);
        assert_eq!(rgb_to_hsv([255, 0, 255]).0, 300.0);
    }

    #[test]
    fn hsl_examples() {
        assert_eq!(rgb_to_hsl([255, 255, 255]), (0.0, 0.0, 1.0));
        assert_eq!(rgb_to_hsl([255, 0, 0]), (0.0, 1.0, 0.5));
        assert_eq!(rgb_to_hsl([64, 64, 64]), (0.0, 0.0, 64.0 / 255.0));
    }

    #[test]
    fn buffer_validation() {
        assert!(ImageBuffer::new(2, 2, vec![0; 11]).is_err());
        assert!(ImageBuffer::new(0, 2, vec![]).is_err());
        assert!(GrayBuffer::new(1, 1, vec![256.0]).is_err());
        assert!(GrayBuffer::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn downscale_caps_long_side() {
        let img = ImageBuffer::filled(40, 10, [10, 20, 30]).unwrap();
        let small = img.downscaled(20);
        assert_eq!((small.width(), small.height()), (20, 5));
        assert!(small.pixels().all(|p| p == [10, 20, 30]));
        assert_eq!(img.downscaled(64), img);
    }

    #[test]
    fn decode_png_and_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        image::RgbImage::from_pixel(1, 1, image::Rgb([255, 255, 255])).save(&white).unwrap();
        let img = decode_image(&white).unwrap();
        assert_eq!(img, ImageBuffer::new(1, 1, vec![255, 255, 255]).unwrap());

        let black = dir.path().join("black.png");
        image::RgbImage::from_pixel(2, 2, image::Rgb([0, 0, 0])).save(&black).unwrap();
        assert_eq!(decode_image(&black).unwrap().data(), &[0u8; 12][..]);

        let clear = dir.path().join("clear.png");
        image::RgbaImage::from_pixel(1, 1, image::Rgba([0, 0, 0, 0])).save(&clear).unwrap();
        assert_eq!(decode_image(&clear).unwrap().data(), &[255, 255, 255]);
    }

    #[test]
    fn decode_errors() {
        let dir = tempfile::tempdir().unwrap();
        let jpg = dir.path().join("photo.jpg");
        image::RgbImage::from_pixel(16, 16, image::Rgb([10, 200, 30])).save(&jpg).unwrap();
        let bytes = std::fs::read(&jpg).unwrap();
        let truncated = dir.path().join("truncated.jpg");
        std::fs::write(&truncated, &bytes[..bytes.len() / 3]).unwrap();
        assert!(matches!(decode_image(&truncated), Err(Error::Decode { .. })));
        assert!(matches!(decode_image(dir.path().join("missing.png")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn gray_input_is_fixed_point(v in 0u8..=255) {
            prop_assert_eq!(luma([v, v, v]), v as f64);
        }

        #[test]
        fn luma_bounded(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let y = luma([r, g, b]);
            prop_assert!((0.0..=255.0).contains(&y));
        }

        #[test]
        fn hsv_round_trip(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let (h, s, v) = rgb_to_hsv([r, g, b]);
            prop_assert!((0.0..360.0).contains(&h));
            let back = hsv_to_rgb(h, s, v);
            for (a, b) in back.iter().zip([r, g, b]) {
                prop_assert!((*a as i32 - b as i32).abs() <= 1);
            }
        }

        #[test]
        fn hsl_round_trip(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let (h, s, l) = rgb_to_hsl([r, g, b]);
            prop_assert!((0.0..360.0).contains(&h));
            prop_assert!((0.0..=1.0).contains(&s));
            let back = hsl_to_rgb(h, s, l);
            for (a, b) in back.iter().zip([r, g, b]) {
                prop_assert!((*a as i32 - b as i32).abs() <= 1);
            }
        }
    }
}
