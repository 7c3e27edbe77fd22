//! Classifier features and coarse time-series preprocessing: NDVI, GLCM
//! textures, gap filling with Savitzky-Golay smoothing, missing fractions.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::math::{floor, ln};
use crate::raster::{BandRaster, GridGeometry};
use crate::{Error, Result};

/// `(nir - red) / (nir + red)`; nodata where either input is nodata or the
/// denominator is zero.
pub fn ndvi(red: &BandRaster, nir: &BandRaster) -> Result<BandRaster> {
    if red.geometry() != nir.geometry() {
        return Err(Error::GeometryMismatch);
    }
    if red.num_bands() != 1 || nir.num_bands() != 1 {
        return Err(Error::InvalidParameter("ndvi takes single-band rasters"));
    }
    let data = red
        .data()
        .iter()
        .zip(nir.data())
        .map(|(&r, &n)| {
            if red.is_nodata(r) || nir.is_nodata(n) {
                return f32::NAN;
            }
            let (r, n) = (r as f64, n as f64);
            let denom = n + r;
            if denom == 0.0 {
                f32::NAN
            } else {
                ((n - r) / denom) as f32
            }
        })
        .collect();
    BandRaster::new(*red.geometry(), 1, data, f32::NAN)
}

/// Co-occurrence parameters. `offset` is `(dx, dy)` in pixels (columns,
/// rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlcmParams {
    pub grey_levels: usize,
    pub window_size: usize,
    pub offset: (isize, isize),
}

impl Default for GlcmParams {
    fn default() -> Self {
        Self {
            grey_levels: 16,
            window_size: 7,
            offset: (1, 1),
        }
    }
}

impl GlcmParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.grey_levels) {
            return Err(Error::InvalidParameter("grey levels must be in 2..=256"));
        }
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return Err(Error::InvalidParameter("window size must be odd and >= 3"));
        }
        if self.offset.0.unsigned_abs() >= self.window_size
            || self.offset.1.unsigned_abs() >= self.window_size
        {
            return Err(Error::InvalidParameter("offset must be smaller than the window"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub mean: f64,
    pub contrast: f64,
    pub entropy: f64,
}

/// Quantizes a single-band raster into `levels` bins using the band's
/// global min-max range. Nodata pixels map to `None`.
pub fn quantize(band: &BandRaster, levels: usize) -> Vec<Option<u8>> {
    let (lo, hi) = band
        .data()
        .iter()
        .filter(|v| !band.is_nodata(**v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    let range = hi - lo;
    band.data()
        .iter()
        .map(|&v| {
            if band.is_nodata(v) {
                return None;
            }
            if range <= 0.0 {
                return Some(0);
            }
            let bin = floor((v as f64 - lo) / range * levels as f64) as usize;
            Some(bin.min(levels - 1) as u8)
        })
        .collect()
}

/// Directed co-occurrence features of one rectangular window of a
/// quantized image (row-major, `stride` columns).
///
/// Counts pairs `(x, y) -> (x + dx, y + dy)` with both ends in the window.
/// Returns `None` if the window has no pair.
pub fn glcm_window_features(
    quantized: &[u8],
    stride: usize,
    window: (usize, usize, usize, usize),
    levels: usize,
    offset: (isize, isize),
) -> Option<GlcmFeatures> {
    let (x0, y0, w, h) = window;
    let (dx, dy) = offset;
    let mut counts = vec![0u32; levels * levels];
    let mut pairs = 0u32;
    for y in 0..h {
        let y2 = y as isize + dy;
        if y2 < 0 || y2 >= h as isize {
            continue;
        }
        for x in 0..w {
            let x2 = x as isize + dx;
            if x2 < 0 || x2 >= w as isize {
                continue;
            }
            let i = quantized[(y0 + y) * stride + x0 + x] as usize;
            let j = quantized[(y0 + y2 as usize) * stride + x0 + x2 as usize] as usize;
            counts[i * levels + j] += 1;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return None;
    }
    let total = pairs as f64;
    let mut f = GlcmFeatures {
        mean: 0.0,
        contrast: 0.0,
        entropy: 0.0,
    };
    for (idx, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let p = n as f64 / total;
        let i = (idx / levels) as f64;
        let j = (idx % levels) as f64;
        f.mean += i * p;
        f.contrast += (i - j) * (i - j) * p;
        f.entropy -= p * ln(p);
    }
    Some(f)
}

/// Sliding-window GLCM mean, contrast and entropy (3 bands, in that order).
///
/// Pixels closer than half a window to the border, or whose window touches
/// nodata, are nodata.
pub fn glcm_textures(band: &BandRaster, params: &GlcmParams) -> Result<BandRaster> {
    params.validate()?;
    if band.num_bands() != 1 {
        return Err(Error::InvalidParameter("glcm takes a single-band raster"));
    }
    let g = band.geometry();
    if params.window_size > g.width || params.window_size > g.height {
        return Err(Error::WindowTooLarge {
            window: params.window_size,
            width: g.width,
            height: g.height,
        });
    }
    let q = quantize(band, params.grey_levels);
    let dense: Vec<u8> = q.iter().map(|v| v.unwrap_or(0)).collect();
    let ws = params.window_size;
    let half = ws / 2;
    let mut out = vec![f32::NAN; g.len() * 3];
    for row in half..g.height - half {
        for col in half..g.width - half {
            let (x0, y0) = (col - half, row - half);
            let has_nodata = (y0..y0 + ws).any(|y| (x0..x0 + ws).any(|x| q[y * g.width + x].is_none()));
            if has_nodata {
                continue;
            }
            if let Some(f) = glcm_window_features(
                &dense,
                g.width,
                (x0, y0, ws, ws),
                params.grey_levels,
                params.offset,
            ) {
                let p = g.index(col, row) * 3;
                out[p] = f.mean as f32;
                out[p + 1] = f.contrast as f32;
                out[p + 2] = f.entropy as f32;
            }
        }
    }
    BandRaster::new(*g, 3, out, f32::NAN)
}

/// Fraction of missing epochs.
pub fn missing_fraction(missing: &[bool]) -> f64 {
    if missing.is_empty() {
        return 0.0;
    }
    missing.iter().filter(|&&m| m).count() as f64 / missing.len() as f64
}

/// Fills missing entries by linear interpolation between the nearest
/// present neighbours, holding the end values flat.
pub fn fill_gaps(series: &[f64], missing: &[bool]) -> Result<Vec<f64>> {
    if series.len() != missing.len() {
        return Err(Error::DimensionMismatch {
            expected: series.len(),
            actual: missing.len(),
        });
    }
    let present: Vec<usize> = (0..series.len())
        .filter(|&i| !missing[i] && series[i].is_finite())
        .collect();
    if present.len() < 2 {
        return Err(Error::InsufficientData);
    }
    let mut out = series.to_vec();
    let first = present[0];
    let last = *present.last().unwrap();
    out[..first].fill(series[first]);
    out[last + 1..].fill(series[last]);
    for w in present.windows(2) {
        let (i0, i1) = (w[0], w[1]);
        let (v0, v1) = (series[i0], series[i1]);
        for (i, o) in out.iter_mut().enumerate().take(i1).skip(i0 + 1) {
            let t = (i - i0) as f64 / (i1 - i0) as f64;
            *o = v0 + t * (v1 - v0);
        }
    }
    Ok(out)
}

/// Savitzky-Golay smoother with precomputed least-squares weights.
///
/// Interior points use the centered window. The first and last
/// `window / 2` points evaluate the polynomial fitted to the first or last
/// full window at their own position, so polynomials up to `order` are
/// reproduced everywhere.
#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    window: usize,
    order: usize,
    // weights[t] evaluates the local fit at offset t - half.
    weights: Vec<Vec<f64>>,
}

impl SavitzkyGolay {
    pub fn new(window: usize, order: usize) -> Result<Self> {
        if window % 2 == 0 || window < 3 {
            return Err(Error::InvalidParameter("SG window must be odd and >= 3"));
        }
        if order >= window {
            return Err(Error::InvalidParameter("SG order must be < window"));
        }
        let half = (window / 2) as isize;
        let terms = order + 1;
        let design = DMatrix::from_fn(window, terms, |i, k| {
            libm::pow((i as isize - half) as f64, k as f64)
        });
        let normal = design.transpose() * &design;
        // (A^T A)^-1 A^T, one row per polynomial coefficient.
        let projector = normal
            .try_inverse()
            .ok_or(Error::InvalidParameter("SG normal equations are singular"))?
            * design.transpose();
        let weights = (0..window)
            .map(|t| {
                let x = (t as isize - half) as f64;
                (0..window)
                    .map(|i| {
                        let mut pow = 1.0;
                        let mut acc = 0.0;
                        for k in 0..terms {
                            acc += pow * projector[(k, i)];
                            pow *= x;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            window,
            order,
            weights,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Smooths a fully present series.
    pub fn smooth(&self, series: &[f64]) -> Result<Vec<f64>> {
        let n = series.len();
        if n < self.window {
            return Err(Error::InvalidParameter("series shorter than the SG window"));
        }
        let half = self.window / 2;
        let apply = |start: usize, t: usize| -> f64 {
            self.weights[t]
                .iter()
                .zip(&series[start..start + self.window])
                .map(|(w, v)| w * v)
                .sum()
        };
        Ok((0..n)
            .map(|i| {
                if i < half {
                    apply(0, i)
                } else if i + half >= n {
                    apply(n - self.window, i + self.window - n)
                } else {
                    apply(i - half, half)
                }
            })
            .collect())
    }
}

/// Gap-fills then smooths one series.
pub fn savitzky_golay_smooth(
    series: &[f64],
    missing: &[bool],
    window: usize,
    order: usize,
) -> Result<Vec<f64>> {
    let sg = SavitzkyGolay::new(window, order)?;
    sg.smooth(&fill_gaps(series, missing)?)
}

/// Coarse-sensor time series: per pixel, per epoch, per channel values plus
/// a per-pixel per-epoch missing flag shared by all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesStack {
    geometry: GridGeometry,
    num_epochs: usize,
    num_channels: usize,
    values: Vec<f32>,
    missing: Vec<bool>,
}

impl TimeSeriesStack {
    /// `values` is laid out `[pixel][epoch][channel]`, `missing` as
    /// `[pixel][epoch]`.
    pub fn new(
        geometry: GridGeometry,
        num_epochs: usize,
        num_channels: usize,
        values: Vec<f32>,
        missing: Vec<bool>,
    ) -> Result<Self> {
        if num_epochs == 0 || num_channels == 0 {
            return Err(Error::InvalidParameter("time series needs epochs and channels"));
        }
        let n = geometry.len();
        if values.len() != n * num_epochs * num_channels {
            return Err(Error::DimensionMismatch {
                expected: n * num_epochs * num_channels,
                actual: values.len(),
            });
        }
        if missing.len() != n * num_epochs {
            return Err(Error::DimensionMismatch {
                expected: n * num_epochs,
                actual: missing.len(),
            });
        }
        Ok(Self {
            geometry,
            num_epochs,
            num_channels,
            values,
            missing,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn num_epochs(&self) -> usize {
        self.num_epochs
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn pixel_missing(&self, pixel: usize) -> &[bool] {
        &self.missing[pixel * self.num_epochs..(pixel + 1) * self.num_epochs]
    }

    /// One channel of one pixel as an `f64` series.
    pub fn series(&self, pixel: usize, channel: usize) -> Vec<f64> {
        let base = pixel * self.num_epochs * self.num_channels;
        (0..self.num_epochs)
            .map(|t| self.values[base + t * self.num_channels + channel] as f64)
            .collect()
    }

    /// Per-pixel missing fraction as a single-band raster.
    pub fn missing_fraction_raster(&self) -> BandRaster {
        let data = (0..self.geometry.len())
            .map(|p| missing_fraction(self.pixel_missing(p)) as f32)
            .collect();
        BandRaster::new(self.geometry, 1, data, f32::NAN).expect("one value per pixel")
    }

    /// Gap-fills and smooths every channel of every pixel. Pixels with fewer
    /// than two present epochs come out as NaN with every epoch missing.
    pub fn smoothed(&self, sg: &SavitzkyGolay) -> Result<TimeSeriesStack> {
        let (t_len, ch) = (self.num_epochs, self.num_channels);
        let mut values = vec![f32::NAN; self.values.len()];
        let mut missing = self.missing.clone();
        for p in 0..self.geometry.len() {
            let miss = self.pixel_missing(p);
            let base = p * t_len * ch;
            for c in 0..ch {
                match fill_gaps(&self.series(p, c), miss) {
                    Ok(filled) => {
                        let s = sg.smooth(&filled)?;
                        for (t, v) in s.into_iter().enumerate() {
                            values[base + t * ch + c] = v as f32;
                        }
                    }
                    Err(Error::InsufficientData) => {
                        missing[p * t_len..(p + 1) * t_len].fill(true);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        TimeSeriesStack::new(self.geometry, t_len, ch, values, missing)
    }

    /// Flattens to a band raster of `epochs * channels` bands; pixels with
    /// any NaN value are all-nodata.
    pub fn to_band_raster(&self) -> BandRaster {
        let nb = self.num_epochs * self.num_channels;
        let mut data = self.values.clone();
        for px in data.chunks_exact_mut(nb) {
            if px.iter().any(|v| v.is_nan()) {
                px.fill(f32::NAN);
            }
        }
        BandRaster::new(self.geometry, nb, data, f32::NAN).expect("layout checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, 0.0, 0.0, 30.0, -30.0).unwrap()
    }

    #[test]
    fn ndvi_examples() {
        let g = geom(3, 1);
        let red = BandRaster::new(g, 1, vec![0.1, 0.3, 0.0], f32::NAN).unwrap();
        let nir = BandRaster::new(g, 1, vec![0.5, 0.3, 0.0], f32::NAN).unwrap();
        let v = ndvi(&red, &nir).unwrap();
        let expected = (0.5f32 as f64 - 0.1f32 as f64) / (0.5f32 as f64 + 0.1f32 as f64);
        assert!((v.data()[0] as f64 - expected).abs() < 1e-7);
        assert!((v.data()[0] as f64 - 2.0 / 3.0).abs() < 1e-6);
        assert_eq!(v.data()[1], 0.0);
        assert!(v.data()[2].is_nan());
    }

    #[test]
    fn ndvi_geometry_mismatch() {
        let red = BandRaster::filled(geom(2, 1), 1, 0.1);
        let nir = BandRaster::filled(geom(1, 2), 1, 0.1);
        assert_eq!(ndvi(&red, &nir), Err(Error::GeometryMismatch));
    }

    #[test]
    fn constant_window_has_zero_texture() {
        let band = BandRaster::filled(geom(9, 9), 1, 0.4);
        let t = glcm_textures(&band, &GlcmParams::default()).unwrap();
        let p = geom(9, 9).index(4, 4) * 3;
        assert_eq!(t.data()[p + 1], 0.0);
        assert_eq!(t.data()[p + 2], 0.0);
        assert!(t.data()[0].is_nan());
    }

    #[test]
    fn checkerboard_four_by_four_by_enumeration() {
        // Pairs (x, y) -> (x+1, y+1) with x, y in 0..3: nine pairs, all with
        // equal bins; bin (x + y) % 2 is 0 for five of them and 1 for four.
        let q: Vec<u8> = (0..16).map(|i| ((i % 4 + i / 4) % 2) as u8).collect();
        let f = glcm_window_features(&q, 4, (0, 0, 4, 4), 2, (1, 1)).unwrap();
        let (p0, p1) = (5.0 / 9.0, 4.0 / 9.0);
        assert_eq!(f.contrast, 0.0);
        assert!((f.entropy - (-(p0 * ln(p0)) - p1 * ln(p1))).abs() < 1e-12);
        assert!((f.mean - p1).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_five_by_five_has_entropy_ln2() {
        let g = geom(5, 5);
        let data = (0..25).map(|i| ((i % 5 + i / 5) % 2) as f32).collect();
        let band = BandRaster::new(g, 1, data, f32::NAN).unwrap();
        let params = GlcmParams {
            grey_levels: 2,
            window_size: 5,
            offset: (1, 1),
        };
        let t = glcm_textures(&band, &params).unwrap();
        let p = g.index(2, 2) * 3;
        assert_eq!(t.data()[p + 1], 0.0);
        assert!((t.data()[p + 2] as f64 - core::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let band = BandRaster::filled(geom(8, 8), 1, 0.4);
        let params = GlcmParams {
            window_size: 9,
            ..GlcmParams::default()
        };
        assert!(matches!(
            glcm_textures(&band, &params),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn sg_examples() {
        let flat = savitzky_golay_smooth(&[5.0; 5], &[false; 5], 5, 2).unwrap();
        assert!(flat.iter().all(|v| (v - 5.0).abs() < 1e-12));

        let sq: Vec<f64> = (0..9).map(|t| (t * t) as f64).collect();
        let s = savitzky_golay_smooth(&sq, &[false; 9], 5, 2).unwrap();
        for (a, b) in s.iter().zip(&sq) {
            assert!((a - b).abs() < 1e-9);
        }

        let gaps = [1.0, f64::NAN, 3.0, f64::NAN, 5.0];
        let miss = [false, true, false, true, false];
        assert_eq!(fill_gaps(&gaps, &miss).unwrap(), [1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = savitzky_golay_smooth(&gaps, &miss, 3, 1).unwrap();
        for (a, b) in s.iter().zip([1.0, 2.0, 3.0, 4.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn window_three_order_one_is_moving_average() {
        let sg = SavitzkyGolay::new(3, 1).unwrap();
        for w in &sg.weights[1] {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gap_filling_edges_and_errors() {
        let miss = [true, false, true, false, true];
        let filled = fill_gaps(&[0.0, 2.0, 0.0, 4.0, 0.0], &miss).unwrap();
        assert_eq!(filled, [2.0, 2.0, 3.0, 4.0, 4.0]);
        assert_eq!(
            fill_gaps(&[1.0, 2.0, 3.0], &[true, false, true]),
            Err(Error::InsufficientData)
        );
    }

    #[test]
    fn missing_fraction_examples() {
        assert_eq!(missing_fraction(&[false; 4]), 0.0);
        assert_eq!(missing_fraction(&[true; 4]), 1.0);
        let mut m = [false; 24];
        m[..6].fill(true);
        assert_eq!(missing_fraction(&m), 0.25);
    }
}
