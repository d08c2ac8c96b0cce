//! Explicit visual features computed directly from pixels.
//!
//! Seven scalar statistics plus a local binary pattern histogram, all derived
//! from one decoded [`ImageBuffer`]. Scalar features other than sharpness are
//! pixel-population statistics and ignore pixel positions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imaging::{rgb_to_hsl, rgb_to_hsv, to_grayscale, GrayBuffer, ImageBuffer};
use crate::{Error, Result};

/// Guards the sharpness denominator on black neighborhoods.
pub const SHARPNESS_EPSILON: f64 = 1.0;

/// Weight of the mean opponent-channel magnitude in colorfulness.
pub const COLORFULNESS_MEAN_WEIGHT: f64 = 0.3;

pub const LBP_BINS: usize = 256;

/// The scalar features, in the column order used by every combined vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFeature {
    Brightness,
    Saturation,
    Sharpness,
    Colorfulness,
    Naturalness,
    Contrast,
    Entropy,
}

impl ScalarFeature {
    pub const ALL: [ScalarFeature; 7] = [
        ScalarFeature::Brightness,
        ScalarFeature::Saturation,
        ScalarFeature::Sharpness,
        ScalarFeature::Colorfulness,
        ScalarFeature::Naturalness,
        ScalarFeature::Contrast,
        ScalarFeature::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalarFeature::Brightness => "brightness",
            ScalarFeature::Saturation => "saturation",
            ScalarFeature::Sharpness => "sharpness",
            ScalarFeature::Colorfulness => "colorfulness",
            ScalarFeature::Naturalness => "naturalness",
            ScalarFeature::Contrast => "contrast",
            ScalarFeature::Entropy => "entropy",
        }
    }

    /// Position in [`ScalarFeature::ALL`] and in [`EvfScalars::to_array`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for ScalarFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalarFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb_contrast" | "rgb-contrast" => return Ok(ScalarFeature::Contrast),
            _ => {}
        }
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown scalar feature `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvfScalars {
    pub brightness: f64,
    pub saturation: f64,
    pub sharpness: f64,
    pub colorfulness: f64,
    pub naturalness: f64,
    pub rgb_contrast: f64,
    pub entropy: f64,
}

impl EvfScalars {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.brightness,
            self.saturation,
            self.sharpness,
            self.colorfulness,
            self.naturalness,
            self.rgb_contrast,
            self.entropy,
        ]
    }

    pub fn get(&self, feature: ScalarFeature) -> f64 {
        self.to_array()[feature.index()]
    }
}

/// L1-normalized histogram of 8-bit LBP codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbpHistogram {
    bins: Vec<f64>,
}

impl LbpHistogram {
    pub fn from_counts(counts: &[u64; LBP_BINS]) -> Self {
        let total: u64 = counts.iter().sum();
        let bins =
            if total == 0 { vec![0.0; LBP_BINS] } else { counts.iter().map(|&c| c as f64 / total as f64).collect() };
        Self { bins }
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }
}

pub fn brightness(img: &ImageBuffer) -> f64 {
    mean_luma(&to_grayscale(img))
}

pub fn mean_luma(gray: &GrayBuffer) -> f64 {
    mean(gray.data())
}

/// Mean HSV saturation.
pub fn saturation(img: &ImageBuffer) -> f64 {
    img.pixels().map(|p| rgb_to_hsv(p).1).sum::<f64>() / img.pixel_count() as f64
}

pub fn sharpness(img: &ImageBuffer) -> Result<f64> {
    gray_sharpness(&to_grayscale(img))
}

/// Mean over interior pixels of the absolute 4-neighbor Laplacian divided by
/// the 3x3 neighborhood mean luma (plus [`SHARPNESS_EPSILON`]).
pub fn gray_sharpness(gray: &GrayBuffer) -> Result<f64> {
    require_interior(gray)?;
    let (w, h) = (gray.width(), gray.height());
    let mut total = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = gray.get(x, y);
            let laplacian = gray.get(x - 1, y) + gray.get(x + 1, y) + gray.get(x, y - 1) + gray.get(x, y + 1) - 4.0 * c;
            let mut window = 0.0;
            for yy in y - 1..=y + 1 {
                for xx in x - 1..=x + 1 {
                    window += gray.get(xx, yy);
                }
            }
            total += laplacian.abs() / (window / 9.0 + SHARPNESS_EPSILON);
        }
    }
    Ok(total / ((w - 2) as f64 * (h - 2) as f64))
}

/// Opponent-channel colorfulness: `sqrt(var_rg + var_yb) + 0.3 * sqrt(mean_rg² + mean_yb²)`
/// with `rg = R - G` and `yb = (R + G) / 2 - B`, population statistics.
pub fn colorfulness(img: &ImageBuffer) -> f64 {
    let n = img.pixel_count() as f64;
    let (mut sum_rg, mut sum_yb) = (0.0, 0.0);
    for [r, g, b] in img.pixels() {
        let (rg, yb) = opponent(r, g, b);
        sum_rg += rg;
        sum_yb += yb;
    }
    let (mean_rg, mean_yb) = (sum_rg / n, sum_yb / n);
    let (mut var_rg, mut var_yb) = (0.0, 0.0);
    for [r, g, b] in img.pixels() {
        let (rg, yb) = opponent(r, g, b);
        var_rg += (rg - mean_rg).powi(2);
        var_yb += (yb - mean_yb).powi(2);
    }
    (var_rg / n + var_yb / n).sqrt() + COLORFULNESS_MEAN_WEIGHT * (mean_rg * mean_rg + mean_yb * mean_yb).sqrt()
}

#[inline]
fn opponent(r: u8, g: u8, b: u8) -> (f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    (r - g, (r + g) / 2.0 - b)
}

/// Hue band and reference saturation statistics of one naturalness group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalGroup {
    pub name: &'static str,
    pub hue_range: (f64, f64),
    pub saturation_center: f64,
    pub saturation_spread: f64,
}

pub const NATURAL_GROUPS: [NaturalGroup; 3] = [
    NaturalGroup { name: "skin", hue_range: (25.0, 70.0), saturation_center: 0.76, saturation_spread: 0.52 },
    NaturalGroup { name: "grass", hue_range: (95.0, 135.0), saturation_center: 0.81, saturation_spread: 0.53 },
    NaturalGroup { name: "sky", hue_range: (185.0, 260.0), saturation_center: 0.43, saturation_spread: 0.22 },
];

pub fn naturalness(img: &ImageBuffer) -> f64 {
    naturalness_from_hsl(img.pixels().map(rgb_to_hsl))
}

/// Color naturalness index over `(hue°, saturation, lightness)` pixels.
///
/// Only pixels with lightness in `[0.2, 0.8]` and saturation above 0.1 take
/// part. They are grouped by hue into skin, grass and sky tones; each group
/// scores a Gaussian of its mean saturation against the group's reference,
/// and the scores are averaged weighted by group size. No qualifying pixel
/// gives 0.
pub fn naturalness_from_hsl(pixels: impl IntoIterator<Item = (f64, f64, f64)>) -> f64 {
    let mut count = [0usize; 3];
    let mut sat_sum = [0.0f64; 3];
    for (h, s, l) in pixels {
        let l100 = l * 100.0;
        if !(20.0..=80.0).contains(&l100) || s <= 0.1 {
            continue;
        }
        if let Some(g) = NATURAL_GROUPS.iter().position(|g| h >= g.hue_range.0 && h <= g.hue_range.1) {
            count[g] += 1;
            sat_sum[g] += s;
        }
    }
    let total: usize = count.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let weighted: f64 = NATURAL_GROUPS
        .iter()
        .enumerate()
        .filter(|(i, _)| count[*i] > 0)
        .map(|(i, g)| {
            let mean_s = sat_sum[i] / count[i] as f64;
            let z = (mean_s - g.saturation_center) / g.saturation_spread;
            count[i] as f64 * (-0.5 * z * z).exp()
        })
        .sum();
    weighted / total as f64
}

pub fn rgb_contrast(img: &ImageBuffer) -> f64 {
    luma_variance(&to_grayscale(img))
}

/// Population variance of luma.
pub fn luma_variance(gray: &GrayBuffer) -> f64 {
    // Shifting by the first value keeps constant images at exactly zero.
    let shift = gray.data()[0];
    let m = gray.data().iter().map(|v| v - shift).sum::<f64>() / gray.data().len() as f64;
    gray.data().iter().map(|v| (v - shift - m).powi(2)).sum::<f64>() / gray.data().len() as f64
}

pub fn entropy(img: &ImageBuffer) -> f64 {
    gray_entropy(&to_grayscale(img))
}

/// Shannon entropy in bits of the 256-bin histogram of rounded luma.
pub fn gray_entropy(gray: &GrayBuffer) -> f64 {
    let mut hist = [0u64; 256];
    for &v in gray.data() {
        hist[gray_level(v) as usize] += 1;
    }
    let n = gray.data().len() as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // A single occupied bin yields -0.0.
    h.max(0.0)
}

/// Histogram bin of a luma value, rounding halves up.
#[inline]
pub fn gray_level(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Neighbor offsets clockwise from the top-left; offset `k` drives bit `k`.
const LBP_NEIGHBORS: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

pub fn lbp_histogram(img: &ImageBuffer) -> Result<LbpHistogram> {
    gray_lbp_histogram(&to_grayscale(img))
}

pub fn gray_lbp_histogram(gray: &GrayBuffer) -> Result<LbpHistogram> {
    let mut counts = [0u64; LBP_BINS];
    for code in lbp_codes(gray)? {
        counts[code as usize] += 1;
    }
    Ok(LbpHistogram::from_counts(&counts))
}

/// LBP code of every interior pixel in row-major order. Bit `k` is set when
/// neighbor `k` is at least as bright as the center.
pub fn lbp_codes(gray: &GrayBuffer) -> Result<Vec<u8>> {
    require_interior(gray)?;
    let (w, h) = (gray.width(), gray.height());
    let mut codes = Vec::with_capacity((w as usize - 2) * (h as usize - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = gray.get(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in LBP_NEIGHBORS.iter().enumerate() {
                let n = gray.get((x as i32 + dx) as u32, (y as i32 + dy) as u32);
                if n >= center {
                    code |= 1 << bit;
                }
            }
            codes.push(code);
        }
    }
    Ok(codes)
}

/// Computes every feature on the same buffer, converting to grayscale once.
pub fn extract_all(img: &ImageBuffer) -> Result<(EvfScalars, LbpHistogram)> {
    let gray = to_grayscale(img);
    let scalars = EvfScalars {
        brightness: mean_luma(&gray),
        saturation: saturation(img),
        sharpness: gray_sharpness(&gray)?,
        colorfulness: colorfulness(img),
        naturalness: naturalness(img),
        rgb_contrast: luma_variance(&gray),
        entropy: gray_entropy(&gray),
    };
    Ok((scalars, gray_lbp_histogram(&gray)?))
}

fn require_interior(gray: &GrayBuffer) -> Result<()> {
    if gray.width() < 3 || gray.height() < 3 {
        return Err(Error::DegenerateImage { width: gray.width(), height: gray.height() });
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
