use serde::{Deserialize, Serialize};

use crate::qgan::{Image8, IMAGE_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Nearest,
    Bilinear,
}

/// Square single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }
}

/// Source coordinate sampled by output index `i` under half-pixel centres.
fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64)
}

/// Resizes a square `src_side` image to `side × side`.
pub fn upscale_pixels(pixels: &[f64], src_side: usize, side: usize, method: Interpolation) -> GrayImage {
    assert_eq!(pixels.len(), src_side * src_side, "pixel count does not match side");
    let mut out = vec![0.0; side * side];
    match method {
        Interpolation::Nearest => {
            let idx: Vec<usize> = (0..side).map(|i| i * src_side / side).collect();
            for r in 0..side {
                for c in 0..side {
                    out[r * side + c] = pixels[idx[r] * src_side + idx[c]];
                }
            }
        }
        Interpolation::Bilinear => {
            let taps: Vec<(usize, usize, f64)> = (0..side)
                .map(|i| {
                    let x = source_coord(i, src_side, side);
                    let lo = x.floor() as usize;
                    let hi = (lo + 1).min(src_side - 1);
                    (lo, hi, x - lo as f64)
                })
                .collect();
            for (r, &(r0, r1, fr)) in taps.iter().enumerate() {
                for (c, &(c0, c1, fc)) in taps.iter().enumerate() {
                    let top = pixels[r0 * src_side + c0] * (1.0 - fc) + pixels[r0 * src_side + c1] * fc;
                    let bot = pixels[r1 * src_side + c0] * (1.0 - fc) + pixels[r1 * src_side + c1] * fc;
                    out[r * side + c] = top * (1.0 - fr) + bot * fr;
                }
            }
        }
    }
    GrayImage { side, pixels: out }
}

/// Upscales an 8×8 image. `side` below 8 is treated as 8.
pub fn upscale(img: &Image8, side: usize, method: Interpolation) -> GrayImage {
    upscale_pixels(img.pixels(), IMAGE_SIDE, side.max(IMAGE_SIDE), method)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Image8 {
        Image8::new((0..64).map(|i| i as f64 / 63.0).collect()).unwrap()
    }

    #[test]
    fn nearest_doubles_into_blocks() {
        let img = ramp();
        let up = upscale(&img, 16, Interpolation::Nearest);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(up.get(r, c), img.get(r / 2, c / 2));
            }
        }
    }

    #[test]
    fn same_size_is_identity() {
        for m in [Interpolation::Nearest, Interpolation::Bilinear] {
            assert_eq!(upscale(&ramp(), 8, m).pixels, ramp().pixels());
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image8::filled(0.37).unwrap();
        for m in [Interpolation::Nearest, Interpolation::Bilinear] {
            for side in [8, 13, 32, 150] {
                assert!(upscale(&img, side, m).pixels.iter().all(|p| (p - 0.37).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn range_is_preserved() {
        let up = upscale(&ramp(), 37, Interpolation::Bilinear);
        assert!(up.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
