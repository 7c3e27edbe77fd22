//! Georeferenced grid containers.
//!
//! Payloads are stored as `f32`, the on-disk sample type, so that a raster
//! written and read back is bit-identical. Arithmetic is done in `f64`;
//! [`ProbabilityRaster::distribution_into`] hands out renormalized `f64`
//! distributions.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::floor;
use crate::{Error, Result};

/// Label value for pixels without a class.
pub const LABEL_NODATA: u8 = 255;

/// Entries may undershoot 0 or overshoot 1 by this much.
pub const PROBABILITY_RANGE_TOL: f64 = 1e-9;

/// Stored distributions must sum to one within this tolerance; anything
/// closer is renormalized on use, anything worse is rejected.
pub const PROBABILITY_SUM_TOL: f64 = 1e-6;

/// Affine north-up grid. `origin_*` is the upper-left corner of pixel (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
}

impl GridGeometry {
    pub fn new(
        width: usize,
        height: usize,
        origin_x: f64,
        origin_y: f64,
        pixel_size_x: f64,
        pixel_size_y: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("grid width and height must be >= 1"));
        }
        if pixel_size_x == 0.0 || pixel_size_y == 0.0 {
            return Err(Error::InvalidParameter("pixel sizes must be nonzero"));
        }
        if !(origin_x.is_finite()
            && origin_y.is_finite()
            && pixel_size_x.is_finite()
            && pixel_size_y.is_finite())
        {
            return Err(Error::InvalidParameter("grid geometry must be finite"));
        }
        Ok(Self {
            width,
            height,
            origin_x,
            origin_y,
            pixel_size_x,
            pixel_size_y,
        })
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Map coordinates of the center of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size_x,
            self.origin_y + (row as f64 + 0.5) * self.pixel_size_y,
        )
    }

    /// Pixel containing the map point, or `None` outside the grid.
    pub fn pixel_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fc = floor((x - self.origin_x) / self.pixel_size_x);
        let fr = floor((y - self.origin_y) / self.pixel_size_y);
        if !(fc >= 0.0 && fr >= 0.0 && fc < self.width as f64 && fr < self.height as f64) {
            return None;
        }
        Some((fc as usize, fr as usize))
    }
}

/// Renormalizes a nonnegative vector to sum to one.
///
/// Entries down to `-1e-9` are treated as zero; anything more negative, any
/// non-finite entry, or a nonpositive sum is [`Error::DegenerateDistribution`].
pub fn normalize_distribution(p: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.len()];
    normalize_into(p, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`normalize_distribution`].
pub fn normalize_into(p: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(p.len(), out.len());
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(p) {
        if !v.is_finite() || v < -PROBABILITY_RANGE_TOL {
            return Err(Error::DegenerateDistribution);
        }
        *o = v.max(0.0);
        sum += *o;
    }
    if sum <= 0.0 || p.is_empty() {
        return Err(Error::DegenerateDistribution);
    }
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(())
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Per-pixel class-probability cube. Invalid pixels are stored as all-NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRaster {
    geometry: GridGeometry,
    num_classes: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl ProbabilityRaster {
    /// Validates and wraps a pixel-interleaved `f32` cube.
    pub fn new(geometry: GridGeometry, num_classes: usize, data: Vec<f32>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be >= 1"));
        }
        let expected = geometry.len() * num_classes;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        let mut valid = Vec::with_capacity(geometry.len());
        for px in data.chunks_exact(num_classes) {
            valid.push(check_pixel(px)?);
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
            valid,
        })
    }

    /// Builds a raster from `f64` distributions; `None` pixels become invalid.
    pub fn from_f64(
        geometry: GridGeometry,
        num_classes: usize,
        data: &[f64],
        valid: &[bool],
    ) -> Result<Self> {
        if valid.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: valid.len(),
            });
        }
        if data.len() != geometry.len() * num_classes {
            return Err(Error::DimensionMismatch {
                expected: geometry.len() * num_classes,
                actual: data.len(),
            });
        }
        let mut out = Vec::with_capacity(data.len());
        for (px, &ok) in data.chunks_exact(num_classes).zip(valid) {
            if ok {
                out.extend(px.iter().map(|&v| v as f32));
            } else {
                out.extend(core::iter::repeat_n(f32::NAN, num_classes));
            }
        }
        Self::new(geometry, num_classes, out)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_valid(&self, pixel: usize) -> bool {
        self.valid[pixel]
    }

    pub fn pixel(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.num_classes..(pixel + 1) * self.num_classes]
    }

    /// Writes the renormalized distribution of `pixel` into `out`.
    /// Returns `false` (leaving `out` untouched) for invalid pixels.
    pub fn distribution_into(&self, pixel: usize, out: &mut [f64]) -> bool {
        if !self.valid[pixel] {
            return false;
        }
        let px = self.pixel(pixel);
        let mut sum = 0.0;
        for (o, &v) in out.iter_mut().zip(px) {
            *o = (v as f64).max(0.0);
            sum += *o;
        }
        out.iter_mut().for_each(|v| *v /= sum);
        true
    }

    pub fn distribution(&self, pixel: usize) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.num_classes];
        self.distribution_into(pixel, &mut out).then_some(out)
    }

    /// Per-pixel argmax; invalid pixels get [`LABEL_NODATA`].
    pub fn argmax_labels(&self) -> LabelRaster {
        let mut buf = vec![0.0; self.num_classes];
        let labels = (0..self.geometry.len())
            .map(|i| {
                if self.distribution_into(i, &mut buf) {
                    argmax(&buf) as u8
                } else {
                    LABEL_NODATA
                }
            })
            .collect();
        LabelRaster {
            geometry: self.geometry,
            num_classes: self.num_classes,
            labels,
        }
    }
}

fn check_pixel(px: &[f32]) -> Result<bool> {
    let nan = px.iter().filter(|v| v.is_nan()).count();
    if nan == px.len() {
        return Ok(false);
    }
    if nan > 0 {
        return Err(Error::BadProbability { value: f64::NAN });
    }
    let mut sum = 0.0;
    for &v in px {
        let v = v as f64;
        if !(-PROBABILITY_RANGE_TOL..=1.0 + PROBABILITY_RANGE_TOL).contains(&v) {
            return Err(Error::BadProbability { value: v });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::BadProbability { value: sum });
    }
    Ok(true)
}

/// Per-pixel class index or [`LABEL_NODATA`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRaster {
    geometry: GridGeometry,
    num_classes: usize,
    labels: Vec<u8>,
}

impl LabelRaster {
    pub fn new(geometry: GridGeometry, num_classes: usize, labels: Vec<u8>) -> Result<Self> {
        if num_classes == 0 || num_classes >= LABEL_NODATA as usize {
            return Err(Error::InvalidParameter("num_classes must be in 1..=254"));
        }
        if labels.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: labels.len(),
            });
        }
        if labels
            .iter()
            .any(|&l| l != LABEL_NODATA && l as usize >= num_classes)
        {
            return Err(Error::InvalidParameter("label outside [0, num_classes)"));
        }
        Ok(Self {
            geometry,
            num_classes,
            labels,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Label at `pixel`, `None` for NODATA.
    pub fn get(&self, pixel: usize) -> Option<usize> {
        match self.labels[pixel] {
            LABEL_NODATA => None,
            l => Some(l as usize),
        }
    }
}

/// Multi-band reflectance (or feature) raster with a nodata sentinel.
/// NaN samples are always nodata, whatever the sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRaster {
    geometry: GridGeometry,
    num_bands: usize,
    data: Vec<f32>,
    nodata: f32,
}

impl BandRaster {
    pub fn new(geometry: GridGeometry, num_bands: usize, data: Vec<f32>, nodata: f32) -> Result<Self> {
        if num_bands == 0 {
            return Err(Error::InvalidParameter("band count must be >= 1"));
        }
        if data.len() != geometry.len() * num_bands {
            return Err(Error::DimensionMismatch {
                expected: geometry.len() * num_bands,
                actual: data.len(),
            });
        }
        Ok(Self {
            geometry,
            num_bands,
            data,
            nodata,
        })
    }

    pub fn filled(geometry: GridGeometry, num_bands: usize, value: f32) -> Self {
        Self {
            geometry,
            num_bands,
            data: vec![value; geometry.len() * num_bands],
            nodata: f32::NAN,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn is_nodata(&self, v: f32) -> bool {
        v.is_nan() || v == self.nodata
    }

    #[inline]
    pub fn value(&self, pixel: usize, band: usize) -> f32 {
        self.data[pixel * self.num_bands + band]
    }

    pub fn pixel(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.num_bands..(pixel + 1) * self.num_bands]
    }

    /// True when any band of the pixel is nodata.
    pub fn pixel_is_nodata(&self, pixel: usize) -> bool {
        self.pixel(pixel).iter().any(|&v| self.is_nodata(v))
    }

    /// Copies one band out as a single-band raster.
    pub fn band(&self, band: usize) -> Result<BandRaster> {
        if band >= self.num_bands {
            return Err(Error::DimensionMismatch {
                expected: self.num_bands,
                actual: band,
            });
        }
        let data = self
            .data
            .chunks_exact(self.num_bands)
            .map(|px| px[band])
            .collect();
        BandRaster::new(self.geometry, 1, data, self.nodata)
    }

    /// Appends the bands of `other` after the bands of `self`.
    pub fn stack(&self, other: &BandRaster) -> Result<BandRaster> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        let nb = self.num_bands + other.num_bands;
        let mut data = Vec::with_capacity(self.geometry.len() * nb);
        for i in 0..self.geometry.len() {
            data.extend_from_slice(self.pixel(i));
            for &v in other.pixel(i) {
                data.push(if other.is_nodata(v) { self.nodata } else { v });
            }
        }
        BandRaster::new(self.geometry, nb, data, self.nodata)
    }
}

/// Per-pixel quality flag, in the style of a CFMask layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MaskFlag {
    Clear = 0,
    Cloud = 1,
    Shadow = 2,
    NoData = 255,
}

impl MaskFlag {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Clear),
            1 => Some(Self::Cloud),
            2 => Some(Self::Shadow),
            255 => Some(Self::NoData),
            _ => None,
        }
    }

    pub fn is_cloud_or_shadow(self) -> bool {
        matches!(self, Self::Cloud | Self::Shadow)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRaster {
    geometry: GridGeometry,
    flags: Vec<MaskFlag>,
}

impl MaskRaster {
    pub fn new(geometry: GridGeometry, flags: Vec<MaskFlag>) -> Result<Self> {
        if flags.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: flags.len(),
            });
        }
        Ok(Self { geometry, flags })
    }

    pub fn filled(geometry: GridGeometry, flag: MaskFlag) -> Self {
        Self {
            geometry,
            flags: vec![flag; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn flags(&self) -> &[MaskFlag] {
        &self.flags
    }

    #[inline]
    pub fn get(&self, pixel: usize) -> MaskFlag {
        self.flags[pixel]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// A labelled point in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub class_label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.iter().any(|s| !(s.x.is_finite() && s.y.is_finite())) {
            return Err(Error::InvalidParameter("sample coordinates must be finite"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Checks every label against a class count.
    pub fn validate_labels(&self, num_classes: usize) -> Result<()> {
        match self.samples.iter().find(|s| s.class_label >= num_classes) {
            Some(_) => Err(Error::InvalidParameter("sample class label >= num_classes")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, 500.0, 1000.0, 30.0, -30.0).unwrap()
    }

    #[test]
    fn geometry_rejects_degenerate_grids() {
        assert!(GridGeometry::new(0, 1, 0.0, 0.0, 1.0, -1.0).is_err());
        assert!(GridGeometry::new(1, 1, 0.0, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn pixel_center_round_trips() {
        let g = geom(7, 5);
        for row in 0..5 {
            for col in 0..7 {
                let (x, y) = g.pixel_center(col, row);
                assert_eq!(g.pixel_at(x, y), Some((col, row)));
            }
        }
        assert_eq!(g.pixel_at(499.0, 990.0), None);
        assert_eq!(g.pixel_at(510.0, 1001.0), None);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_distribution(&[0.2, 0.2]).unwrap(), [0.5, 0.5]);
        assert_eq!(normalize_distribution(&[1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(
            normalize_distribution(&[0.0, 0.0]),
            Err(Error::DegenerateDistribution)
        );
        assert_eq!(
            normalize_distribution(&[0.5, -0.1]),
            Err(Error::DegenerateDistribution)
        );
    }

    #[test]
    fn probability_raster_validation() {
        let g = geom(2, 1);
        assert!(ProbabilityRaster::new(g, 2, vec![0.5, 0.5, 0.25, 0.75]).is_ok());
        assert!(matches!(
            ProbabilityRaster::new(g, 2, vec![1.2, -0.2, 0.5, 0.5]),
            Err(Error::BadProbability { .. })
        ));
        assert!(matches!(
            ProbabilityRaster::new(g, 2, vec![0.6, 0.6, 0.5, 0.5]),
            Err(Error::BadProbability { .. })
        ));
        let r = ProbabilityRaster::new(g, 2, vec![f32::NAN, f32::NAN, 0.3, 0.7]).unwrap();
        assert!(!r.is_valid(0));
        assert_eq!(r.distribution(0), None);
        let d = r.distribution(1).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.argmax_labels().labels(), &[LABEL_NODATA, 1]);
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
    }

    #[test]
    fn label_raster_rejects_out_of_range() {
        let g = geom(2, 1);
        assert!(LabelRaster::new(g, 3, vec![2, LABEL_NODATA]).is_ok());
        assert!(LabelRaster::new(g, 3, vec![3, 0]).is_err());
    }
}
