use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ImagingError;
use crate::qgan::Image8;

/// Negative eigenvalues above this are rounding noise and clamp to zero.
const EIG_CLAMP: f64 = -1e-8;

/// Sample mean and unbiased covariance of a set of flattened images.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn gaussian_stats(samples: &[&[f64]]) -> Result<GaussianStats, ImagingError> {
    let n = samples.len();
    if n < 2 {
        return Err(ImagingError::TooFewSamples(n));
    }
    let d = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != d) {
        return Err(ImagingError::DimensionMismatch(d, s.len()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| samples[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let mut centred = x;
    for j in 0..d {
        let m = mean[j];
        centred.column_mut(j).add_scalar_mut(-m);
    }
    let mut cov = centred.tr_mul(&centred) / (n - 1) as f64;
    // Exact symmetry regardless of summation order.
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, ImagingError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or_else(|| ImagingError::Eigen("no convergence".into()))?;
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// `‖m₁−m₂‖² + Tr(C₁ + C₂ − 2(C₁C₂)^{1/2})`.
///
/// `Tr((C₁C₂)^{1/2})` is evaluated as the sum of square roots of the
/// eigenvalues of the symmetric matrix `√C₁ C₂ √C₁`, which shares its
/// spectrum with `C₁C₂`.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64, ImagingError> {
    if a.dim() != b.dim() {
        return Err(ImagingError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dm = (&a.mean - &b.mean).norm_squared();
    let s1 = psd_sqrt(&a.cov)?;
    let m = &s1 * &b.cov * &s1;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or_else(|| ImagingError::Eigen("no convergence".into()))?;
    let mut tr_sqrt = 0.0;
    for &v in eig.eigenvalues.iter() {
        if v < EIG_CLAMP * (1.0 + eig.eigenvalues.amax()) {
            return Err(ImagingError::Eigen(format!("product has eigenvalue {v:e}")));
        }
        tr_sqrt += v.max(0.0).sqrt();
    }
    let d = dm + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    Ok(d.max(0.0))
}

/// FID between two image populations on raw pixels.
pub fn fid_images(a: &[Image8], b: &[Image8]) -> Result<f64, ImagingError> {
    let pa: Vec<&[f64]> = a.iter().map(Image8::pixels).collect();
    let pb: Vec<&[f64]> = b.iter().map(Image8::pixels).collect();
    fid(&gaussian_stats(&pa)?, &gaussian_stats(&pb)?)
}
