//! Minimal reference classifier: diagonal-Gaussian nearest centroid with a
//! temperature-scaled softmax. Stands in for external probability sources.

use alloc::vec;
use alloc::vec::Vec;

use crate::exec::{Executor, Sequential};
use crate::raster::{BandRaster, ProbabilityRaster};
use crate::{math, Error, Result};

/// Lower bound applied to every per-class feature variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    num_classes: usize,
    num_features: usize,
    centroids: Vec<f64>,
    variances: Vec<f64>,
    temperature: f64,
}

impl ClassifierModel {
    /// Assembles a model from row-major `C x F` centroid and variance blocks.
    pub fn new(
        num_classes: usize,
        num_features: usize,
        centroids: Vec<f64>,
        variances: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        if !(2..=254).contains(&num_classes) {
            return Err(Error::InvalidParameter("classifier needs 2..=254 classes"));
        }
        if num_features == 0 {
            return Err(Error::InvalidParameter("classifier needs at least one feature"));
        }
        let n = num_classes * num_features;
        for block in [&centroids, &variances] {
            if block.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: block.len(),
                });
            }
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("centroids must be finite"));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("variances must be positive"));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParameter("temperature must be positive"));
        }
        Ok(Self {
            num_classes,
            num_features,
            centroids,
            variances,
            temperature,
        })
    }

    /// Per-class means and unbiased diagonal variances (floored at
    /// [`VARIANCE_FLOOR`]). Every class needs at least two samples.
    pub fn train(
        features: &[Vec<f64>],
        labels: &[usize],
        num_classes: usize,
        temperature: f64,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        let f = features.first().map_or(0, Vec::len);
        if features.iter().any(|x| x.len() != f) {
            return Err(Error::InvalidParameter("feature vectors differ in length"));
        }
        if labels.iter().any(|&l| l >= num_classes) {
            return Err(Error::InvalidParameter("training label >= num_classes"));
        }
        let mut counts = vec![0usize; num_classes];
        let mut sums = vec![0.0; num_classes * f];
        for (x, &l) in features.iter().zip(labels) {
            counts[l] += 1;
            for (s, v) in sums[l * f..(l + 1) * f].iter_mut().zip(x) {
                *s += v;
            }
        }
        if let Some(class) = counts.iter().position(|&c| c < 2) {
            return Err(Error::ClassUndersampled {
                class,
                count: counts[class],
            });
        }
        let mut centroids = sums;
        for (k, &n) in counts.iter().enumerate() {
            centroids[k * f..(k + 1) * f]
                .iter_mut()
                .for_each(|m| *m /= n as f64);
        }
        let mut variances = vec![0.0; num_classes * f];
        for (x, &l) in features.iter().zip(labels) {
            for j in 0..f {
                let d = x[j] - centroids[l * f + j];
                variances[l * f + j] += d * d;
            }
        }
        for (k, &n) in counts.iter().enumerate() {
            variances[k * f..(k + 1) * f]
                .iter_mut()
                .for_each(|v| *v = (*v / (n - 1) as f64).max(VARIANCE_FLOOR));
        }
        Self::new(num_classes, f, centroids, variances, temperature)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn centroid(&self, class: usize) -> &[f64] {
        &self.centroids[class * self.num_features..(class + 1) * self.num_features]
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_classes];
        self.predict_proba_into(features, &mut out)?;
        Ok(out)
    }

    /// Softmax of `-d^2 / (2T)`, `d` the diagonal Mahalanobis distance to
    /// each centroid. Logit gaps are capped so every class stays positive.
    pub fn predict_proba_into(&self, features: &[f64], out: &mut [f64]) -> Result<()> {
        if features.len() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                actual: features.len(),
            });
        }
        let f = self.num_features;
        for (k, o) in out.iter_mut().enumerate().take(self.num_classes) {
            let mu = &self.centroids[k * f..(k + 1) * f];
            let var = &self.variances[k * f..(k + 1) * f];
            let d2: f64 = features
                .iter()
                .zip(mu)
                .zip(var)
                .map(|((x, m), v)| (x - m) * (x - m) / v)
                .sum();
            *o = -0.5 * d2 / self.temperature;
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = math::exp((*o - max).max(-700.0));
            sum += *o;
        }
        out.iter_mut().for_each(|o| *o /= sum);
        Ok(())
    }

    pub fn predict_raster(&self, features: &BandRaster) -> Result<ProbabilityRaster> {
        self.predict_raster_with(features, &Sequential)
    }

    /// Classifies every pixel; pixels with a nodata feature are left invalid.
    pub fn predict_raster_with<E: Executor>(
        &self,
        features: &BandRaster,
        exec: &E,
    ) -> Result<ProbabilityRaster> {
        if features.num_bands() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                actual: features.num_bands(),
            });
        }
        let geometry = *features.geometry();
        let c = self.num_classes;
        let mut data = vec![f32::NAN; geometry.len() * c];
        exec.for_each_chunk(&mut data, c, |first, run| {
            let mut x = vec![0.0; self.num_features];
            let mut p = vec![0.0; c];
            for (i, px) in run.chunks_exact_mut(c).enumerate() {
                let pixel = first + i;
                if features.pixel_is_nodata(pixel) {
                    continue;
                }
                for (xi, &v) in x.iter_mut().zip(features.pixel(pixel)) {
                    *xi = v as f64;
                }
                if self.predict_proba_into(&x, &mut p).is_ok() {
                    for (o, &v) in px.iter_mut().zip(&p) {
                        *o = v as f32;
                    }
                }
            }
        });
        ProbabilityRaster::new(geometry, c, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> ClassifierModel {
        ClassifierModel::new(2, 2, vec![0.0, 0.0, 4.0, 0.0], vec![1.0; 4], 1.0).unwrap()
    }

    #[test]
    fn equidistant_point_is_even() {
        let p = two_class().predict_proba(&[2.0, 3.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn centroid_point_at_low_temperature_is_confident() {
        let m = ClassifierModel::new(2, 2, vec![0.0, 0.0, 4.0, 0.0], vec![1.0; 4], 0.1).unwrap();
        assert!(m.predict_proba(&[4.0, 0.0]).unwrap()[1] > 0.99);
    }

    #[test]
    fn far_points_keep_positive_mass() {
        let p = two_class().predict_proba(&[-1e6, 0.0]).unwrap();
        assert!(p.iter().all(|&v| v > 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            two_class().predict_proba(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn undersampled_class() {
        let x = vec![vec![0.0], vec![1.0], vec![5.0]];
        assert_eq!(
            ClassifierModel::train(&x, &[0, 0, 1], 2, 1.0),
            Err(Error::ClassUndersampled { class: 1, count: 1 })
        );
    }

    #[test]
    fn duplicate_samples_hit_variance_floor() {
        let x = vec![vec![1.0, 2.0]; 4];
        let m = ClassifierModel::train(&x, &[0, 0, 1, 1], 2, 1.0).unwrap();
        assert!(m.variances().iter().all(|&v| v == VARIANCE_FLOOR));
        assert_eq!(m.centroid(1), &[1.0, 2.0]);
    }
}
