//! Upscaling, covariance and FID checked against naive reference code.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgan_mark::imaging::*;
use qgan_mark::qgan::Image8;

fn random_image(rng: &mut ChaCha8Rng) -> Image8 {
    Image8::new((0..64).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Separable bilinear resize: rows first, then columns, each by 1-D linear
/// interpolation with half-pixel centres clamped to the border.
fn bilinear_two_pass(src: &[f64], s: usize, d: usize) -> Vec<f64> {
    let interp = |line: &dyn Fn(usize) -> f64, i: usize| {
        let x = ((i as f64 + 0.5) * s as f64 / d as f64 - 0.5).max(0.0).min((s - 1) as f64);
        let lo = x.floor() as usize;
        let hi = if lo + 1 < s { lo + 1 } else { lo };
        line(lo) + (line(hi) - line(lo)) * (x - lo as f64)
    };
    let mut horiz = vec![0.0; s * d];
    for r in 0..s {
        for c in 0..d {
            horiz[r * d + c] = interp(&|k| src[r * s + k], c);
        }
    }
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            out[r * d + c] = interp(&|k| horiz[k * d + c], r);
        }
    }
    out
}

#[test]
fn bilinear_matches_two_pass_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for side in [8, 11, 16, 22, 32, 150] {
        let img = random_image(&mut rng);
        let got = upscale(&img, side, Interpolation::Bilinear);
        let want = bilinear_two_pass(img.pixels(), 8, side);
        for (a, b) in got.pixels.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn nearest_matches_index_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let img = random_image(&mut rng);
    let up = upscale(&img, 150, Interpolation::Nearest);
    for r in 0..150 {
        for c in 0..150 {
            let (sr, sc) = ((r as f64 * 8.0 / 150.0).floor() as usize, (c as f64 * 8.0 / 150.0).floor() as usize);
            assert_eq!(up.get(r, c), img.get(sr, sc));
        }
    }
}

fn samples(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            // An isotropic term keeps the covariance well conditioned; the
            // Denman–Beavers reference loses digits on near-singular products.
            (0..d)
                .map(|i| scale * (0..d).map(|j| mix[i * d + j] * z[j]).sum::<f64>() + 0.3 * rng.random_range(-1.0..1.0) + i as f64)
                .collect()
        })
        .collect()
}

#[test]
fn covariance_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let xs = samples(&mut rng, 40, 7, 1.0);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let st = gaussian_stats(&refs).unwrap();
    let n = xs.len() as f64;
    for i in 0..7 {
        let mi = xs.iter().map(|x| x[i]).sum::<f64>() / n;
        assert!((st.mean[i] - mi).abs() < 1e-12);
        for j in 0..7 {
            let mj = xs.iter().map(|x| x[j]).sum::<f64>() / n;
            let c = xs.iter().map(|x| (x[i] - mi) * (x[j] - mj)).sum::<f64>() / (n - 1.0);
            assert!((st.cov[(i, j)] - c).abs() < 1e-10);
        }
    }
}

/// Principal square root by the Denman–Beavers iteration.
fn denman_beavers(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() < 1e-15 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

#[test]
fn fid_matches_denman_beavers_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..50 {
        let d = rng.random_range(2..7);
        let a = samples(&mut rng, 60, d, 1.0);
        let b = samples(&mut rng, 60, d, 2.0);
        let ra: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        let (sa, sb) = (gaussian_stats(&ra).unwrap(), gaussian_stats(&rb).unwrap());
        let root = denman_beavers(&(&sa.cov * &sb.cov));
        let want = (&sa.mean - &sb.mean).norm_squared() + sa.cov.trace() + sb.cov.trace() - 2.0 * root.trace();
        let got = fid(&sa, &sb).unwrap();
        assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn fid_of_identical_sets_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let imgs: Vec<Image8> = (0..200).map(|_| random_image(&mut rng)).collect();
    assert!(fid_images(&imgs, &imgs).unwrap().abs() < 1e-9);
}

#[test]
fn one_dimensional_case_is_exact() {
    let st = |m: f64, v: f64| GaussianStats {
        mean: DVector::from_element(1, m),
        cov: DMatrix::from_element(1, 1, v),
    };
    assert_eq!(fid(&st(0.0, 1.0), &st(0.0, 4.0)).unwrap(), 1.0);
}

#[test]
fn digits_are_scaled_into_unit_range() {
    let all = bundled_digits(None);
    assert_eq!(all.len(), 1797);
    assert_eq!(bundled_digits(Some(0)).len(), 178);
    assert!(all.iter().flat_map(|i| i.pixels()).all(|&p| (0.0..=1.0).contains(&p)));
}
