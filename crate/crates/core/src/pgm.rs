//! The per-pixel fusion model.
//!
//! Each fine pixel `n` carries five class-valued variables: `LA` and `LB`
//! (the two fine-resolution sources), `M` (the coarse source), `LL` (the
//! combination of `LA` and `LB`) and `R` (the land-cover estimate). The joint
//! factorizes as
//!
//! ```text
//! P(M) P(LA) P(LB) P(LL | LA, LB) P(R | LL, M)
//! ```
//!
//! and `P(R)` is obtained by eliminating `LA, LB` and then `LL, M`. Both
//! conditional tables share one shape, parameterized by a "keep" weight `k`
//! for the primary parent:
//!
//! ```text
//! P(child = c | primary, secondary) = 1      if c == primary == secondary
//!                                     k      if c == primary != secondary
//!                                     1 - k  if c == secondary != primary
//!                                     0      otherwise
//! ```
//!
//! with `k = 1 - 0.5 (1 - f)` for the cloud/shadow fraction `f` in the first
//! stage and `k = 1 - 0.5 w` for the reliability weight `w` in the second.
//! Because the table is zero off the parents' values, each elimination
//! collapses to an O(C) closed form ([`combine_pair`]). The explicit O(C^5)
//! summation is kept as [`joint_enumeration_oracle`].

use alloc::vec;
use alloc::vec::Vec;

use crate::align::{group_agreement_from_labels, reliability_weight, GroupMap};
use crate::exec::{Executor, Sequential};
use crate::raster::{
    argmax, BandRaster, GridGeometry, LabelRaster, MaskRaster, ProbabilityRaster, LABEL_NODATA,
};
use crate::{Error, Result};

/// Largest class count [`joint_enumeration_oracle`] accepts.
pub const ENUMERATION_CLASS_LIMIT: usize = 16;

/// Input distributions must sum to one within this tolerance.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Keep weight of the `LL | LA, LB` table for cloud/shadow fraction `f`.
#[inline]
pub fn stage_one_keep(cloud_fraction: f64) -> f64 {
    1.0 - 0.5 * (1.0 - cloud_fraction)
}

/// Keep weight of the `R | LL, M` table for reliability weight `w`.
#[inline]
pub fn stage_two_keep(reliability: f64) -> f64 {
    1.0 - 0.5 * reliability
}

/// Three-variable conditional table `P(child | primary, secondary)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionCpd {
    num_classes: usize,
    keep_weight: f64,
}

impl FusionCpd {
    pub fn new(num_classes: usize, keep_weight: f64) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be >= 1"));
        }
        if !(0.0..=1.0).contains(&keep_weight) {
            return Err(Error::InvalidParameter("keep weight must be in [0, 1]"));
        }
        Ok(Self {
            num_classes,
            keep_weight,
        })
    }

    /// Table for `P(LL | LA, LB)` given the cloud/shadow fraction of `LB`.
    pub fn for_cloud_fraction(num_classes: usize, f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter("cloud fraction must be in [0, 1]"));
        }
        Self::new(num_classes, stage_one_keep(f))
    }

    /// Table for `P(R | LL, M)` given the coarse reliability weight.
    pub fn for_reliability(num_classes: usize, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter("reliability must be in [0, 1]"));
        }
        Self::new(num_classes, stage_two_keep(w))
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn keep_weight(&self) -> f64 {
        self.keep_weight
    }

    #[inline]
    pub fn prob(&self, child: usize, primary: usize, secondary: usize) -> f64 {
        match (child == primary, child == secondary) {
            (true, true) => 1.0,
            (true, false) => self.keep_weight,
            (false, true) => 1.0 - self.keep_weight,
            (false, false) => 0.0,
        }
    }

    /// Dense table indexed `[primary][secondary][child]`.
    pub fn table(&self) -> Vec<f64> {
        let c = self.num_classes;
        let mut t = Vec::with_capacity(c * c * c);
        for p in 0..c {
            for s in 0..c {
                for child in 0..c {
                    t.push(self.prob(child, p, s));
                }
            }
        }
        t
    }
}

fn check_distribution(p: &[f64], num_classes: usize) -> Result<()> {
    if p.len() != num_classes {
        return Err(Error::DimensionMismatch {
            expected: num_classes,
            actual: p.len(),
        });
    }
    let mut sum = 0.0;
    for &v in p {
        if !(v.is_finite() && v >= -NORMALIZED_TOL) {
            return Err(Error::UnnormalizedInput { sum: v });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::UnnormalizedInput { sum });
    }
    Ok(())
}

// out[c] = A_c B_c + A_c (1 - B_c) k + (1 - A_c) B_c (1 - k); returns the sum.
#[inline]
fn combine_raw(primary: &[f64], secondary: &[f64], keep: f64, out: &mut [f64]) -> f64 {
    let give = 1.0 - keep;
    let mut sum = 0.0;
    for ((o, &a), &b) in out.iter_mut().zip(primary).zip(secondary) {
        let v = a * b + a * (1.0 - b) * keep + (1.0 - a) * b * give;
        *o = v;
        sum += v;
    }
    sum
}

/// Eliminates both parents of a fusion table in O(C):
///
/// `out[c] = A_c B_c + A_c (1 - B_c) k + (1 - A_c) B_c (1 - k)`
///
/// The result is renormalized by its own sum to cancel rounding drift.
#[inline]
pub(crate) fn combine_unchecked(primary: &[f64], secondary: &[f64], keep: f64, out: &mut [f64]) {
    let sum = combine_raw(primary, secondary, keep, out);
    debug_assert!(
        (sum - 1.0).abs() <= 1e-9,
        "combine_pair pre-normalization sum {sum}"
    );
    out.iter_mut().for_each(|v| *v /= sum);
}

fn check_pair(primary: &[f64], secondary: &[f64], keep_weight: f64, out: &[f64]) -> Result<()> {
    let c = primary.len();
    check_distribution(primary, c)?;
    check_distribution(secondary, c)?;
    if out.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            actual: out.len(),
        });
    }
    if !(0.5..=1.0).contains(&keep_weight) {
        return Err(Error::InvalidParameter("keep weight must be in [0.5, 1]"));
    }
    Ok(())
}

/// Combines a primary and a secondary class distribution with keep weight
/// `keep_weight` in `[0.5, 1]`.
///
/// `keep_weight = 1` returns the primary distribution; `0.5` returns the
/// mean of the two.
pub fn combine_pair(primary: &[f64], secondary: &[f64], keep_weight: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; primary.len()];
    combine_pair_into(primary, secondary, keep_weight, &mut out)?;
    Ok(out)
}

pub fn combine_pair_into(
    primary: &[f64],
    secondary: &[f64],
    keep_weight: f64,
    out: &mut [f64],
) -> Result<()> {
    check_pair(primary, secondary, keep_weight, out)?;
    combine_unchecked(primary, secondary, keep_weight, out);
    Ok(())
}

/// The closed form before renormalization. For normalized inputs the terms
/// already sum to one up to rounding.
pub fn combine_pair_unnormalized(
    primary: &[f64],
    secondary: &[f64],
    keep_weight: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; primary.len()];
    check_pair(primary, secondary, keep_weight, &out)?;
    combine_raw(primary, secondary, keep_weight, &mut out);
    Ok(out)
}

/// Inputs of one pixel's model. A missing `prior_b` means the first stage
/// is the identity on `prior_a`; a missing `prior_m` skips the second stage.
#[derive(Debug, Clone, Copy)]
pub struct PixelModel<'a> {
    pub prior_a: &'a [f64],
    pub prior_b: Option<&'a [f64]>,
    pub prior_m: Option<&'a [f64]>,
    /// Cloud/shadow fraction of the `B` pixel.
    pub cloud_fraction: f64,
    /// Reliability weight of the coarse source.
    pub reliability: f64,
}

impl PixelModel<'_> {
    pub fn num_classes(&self) -> usize {
        self.prior_a.len()
    }

    fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        if c == 0 {
            return Err(Error::InvalidParameter("empty distribution"));
        }
        check_distribution(self.prior_a, c)?;
        if let Some(b) = self.prior_b {
            check_distribution(b, c)?;
        }
        if let Some(m) = self.prior_m {
            check_distribution(m, c)?;
        }
        if !(0.0..=1.0).contains(&self.cloud_fraction) {
            return Err(Error::InvalidParameter("cloud fraction must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.reliability) {
            return Err(Error::InvalidParameter("reliability must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Posterior `P(R)` by two-step variable elimination.
pub fn fuse_pixel(model: &PixelModel<'_>) -> Result<Vec<f64>> {
    model.validate()?;
    let c = model.num_classes();
    let mut ll = vec![0.0; c];
    match model.prior_b {
        Some(b) => combine_unchecked(model.prior_a, b, stage_one_keep(model.cloud_fraction), &mut ll),
        None => ll.copy_from_slice(model.prior_a),
    }
    match model.prior_m {
        Some(m) => {
            let mut r = vec![0.0; c];
            combine_unchecked(&ll, m, stage_two_keep(model.reliability), &mut r);
            Ok(r)
        }
        None => Ok(ll),
    }
}

/// Posterior `P(R)` by explicit summation of the joint over every
/// assignment of `M, LA, LB, LL`, using dense conditional tables.
///
/// Costs O(C^5); meant as a reference, capped at
/// [`ENUMERATION_CLASS_LIMIT`] classes.
pub fn joint_enumeration_oracle(model: &PixelModel<'_>) -> Result<Vec<f64>> {
    let c = model.num_classes();
    if c > ENUMERATION_CLASS_LIMIT {
        return Err(Error::TooManyClasses {
            classes: c,
            limit: ENUMERATION_CLASS_LIMIT,
        });
    }
    model.validate()?;

    // An absent parent is a one-state variable whose table copies the
    // primary parent.
    let one = [1.0];
    let (pb, cb, ll_table) = match model.prior_b {
        Some(b) => (b, c, FusionCpd::for_cloud_fraction(c, model.cloud_fraction)?.table()),
        None => (&one[..], 1, copy_table(c)),
    };
    let (pm, cm, r_table) = match model.prior_m {
        Some(m) => (m, c, FusionCpd::for_reliability(c, model.reliability)?.table()),
        None => (&one[..], 1, copy_table(c)),
    };
    let ll_cpd = |ll: usize, la: usize, lb: usize| ll_table[(la * cb + lb) * c + ll];
    let r_cpd = |r: usize, ll: usize, m: usize| r_table[(ll * cm + m) * c + r];

    let mut post = vec![0.0; c];
    for (m, &p_m) in pm.iter().enumerate() {
        for (la, &p_la) in model.prior_a.iter().enumerate() {
            for (lb, &p_lb) in pb.iter().enumerate() {
                for ll in 0..c {
                    let upstream = p_m * p_la * p_lb * ll_cpd(ll, la, lb);
                    if upstream == 0.0 {
                        continue;
                    }
                    for (r, acc) in post.iter_mut().enumerate() {
                        *acc += upstream * r_cpd(r, ll, m);
                    }
                }
            }
        }
    }
    let sum: f64 = post.iter().sum();
    post.iter_mut().for_each(|v| *v /= sum);
    Ok(post)
}

// `[primary][0][child]` table for a one-state secondary parent.
fn copy_table(c: usize) -> Vec<f64> {
    let mut t = vec![0.0; c * c];
    for p in 0..c {
        t[p * c + p] = 1.0;
    }
    t
}

/// Most probable class; ties go to the smallest index.
pub fn marginal_map(posterior: &[f64]) -> usize {
    argmax(posterior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// `A` and `B` are combined everywhere; the coarse source is consulted
    /// only where `B` is flagged cloud or shadow.
    TwoStage,
    /// `LL = A`; the coarse source is consulted everywhere.
    AOnly,
}

/// Coarse-resolution source: class probabilities and series missing
/// fraction on the coarse grid, plus the fine-to-coarse grouping.
#[derive(Debug, Clone, Copy)]
pub struct CoarseSource<'a> {
    pub probabilities: &'a ProbabilityRaster,
    pub missing_fraction: &'a BandRaster,
    pub groups: &'a GroupMap,
}

#[derive(Debug, Clone, Copy)]
pub struct FusionInputs<'a> {
    pub mode: FusionMode,
    pub primary: &'a ProbabilityRaster,
    pub secondary: Option<&'a ProbabilityRaster>,
    /// Single-band cloud/shadow fraction of `B` (0 on clear pixels).
    pub cloud_fraction: Option<&'a BandRaster>,
    pub secondary_mask: Option<&'a MaskRaster>,
    pub coarse: Option<CoarseSource<'a>>,
}

/// Everything a fused raster produces. Distributions are pixel-interleaved
/// `f64`; invalid pixels are all-NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub geometry: GridGeometry,
    pub num_classes: usize,
    /// The intermediate `LL` distribution.
    pub stage_one: Vec<f64>,
    /// The final `R` distribution.
    pub posterior: Vec<f64>,
    /// Group agreement of `LL` (0 for ungrouped pixels).
    pub agreement: Vec<f64>,
    /// Coarse reliability weight, NaN where no coarse cell is available.
    pub reliability: Vec<f64>,
    /// Whether the second stage was applied at each pixel.
    pub stage_two_applied: Vec<bool>,
    pub labels: LabelRaster,
}

impl FusionOutput {
    fn to_raster(&self, data: &[f64]) -> Result<ProbabilityRaster> {
        let valid: Vec<bool> = data
            .chunks_exact(self.num_classes)
            .map(|px| !px[0].is_nan())
            .collect();
        ProbabilityRaster::from_f64(self.geometry, self.num_classes, data, &valid)
    }

    pub fn posterior_raster(&self) -> Result<ProbabilityRaster> {
        self.to_raster(&self.posterior)
    }

    pub fn stage_one_raster(&self) -> Result<ProbabilityRaster> {
        self.to_raster(&self.stage_one)
    }

    pub fn reliability_raster(&self) -> Result<BandRaster> {
        BandRaster::new(
            self.geometry,
            1,
            self.reliability.iter().map(|&v| v as f32).collect(),
            f32::NAN,
        )
    }
}

struct Plan<'a> {
    inputs: FusionInputs<'a>,
    num_classes: usize,
    // Renormalized coarse distributions per coarse cell (NaN when invalid).
    coarse_dists: Vec<f64>,
}

impl<'a> Plan<'a> {
    fn new(inputs: FusionInputs<'a>) -> Result<Self> {
        let geometry = inputs.primary.geometry();
        let c = inputs.primary.num_classes();
        if let Some(b) = inputs.secondary {
            if b.geometry() != geometry || b.num_classes() != c {
                return Err(Error::GeometryMismatch);
            }
        }
        if let Some(f) = inputs.cloud_fraction {
            if f.geometry() != geometry || f.num_bands() != 1 {
                return Err(Error::GeometryMismatch);
            }
            if f
                .data()
                .iter()
                .any(|&v| !f.is_nodata(v) && !(0.0..=1.0).contains(&v))
            {
                return Err(Error::InvalidParameter("cloud fraction outside [0, 1]"));
            }
        }
        if let Some(mask) = inputs.secondary_mask {
            if mask.geometry() != geometry {
                return Err(Error::GeometryMismatch);
            }
        }
        if inputs.mode == FusionMode::TwoStage {
            if inputs.secondary.is_none() {
                return Err(Error::MissingInput("secondary probabilities"));
            }
            if inputs.cloud_fraction.is_none() {
                return Err(Error::MissingInput("cloud fraction map"));
            }
            if inputs.secondary_mask.is_none() {
                return Err(Error::MissingInput("secondary cloud mask"));
            }
        }
        let mut coarse_dists = Vec::new();
        if let Some(coarse) = inputs.coarse {
            let cg = coarse.groups.coarse_geometry();
            if coarse.groups.fine_geometry() != geometry
                || coarse.probabilities.geometry() != cg
                || coarse.missing_fraction.geometry() != cg
                || coarse.missing_fraction.num_bands() != 1
                || coarse.probabilities.num_classes() != c
            {
                return Err(Error::GeometryMismatch);
            }
            coarse_dists = vec![f64::NAN; cg.len() * c];
            for (cell, out) in coarse_dists.chunks_exact_mut(c).enumerate() {
                let m = coarse.missing_fraction.value(cell, 0);
                if coarse.missing_fraction.is_nodata(m) {
                    continue;
                }
                coarse.probabilities.distribution_into(cell, out);
            }
        }
        Ok(Self {
            inputs,
            num_classes: c,
            coarse_dists,
        })
    }

    fn stage_one(&self, first: usize, out: &mut [f64]) {
        let c = self.num_classes;
        let mut b = vec![0.0; c];
        let mut a = vec![0.0; c];
        for (k, ll) in out.chunks_exact_mut(c).enumerate() {
            let p = first + k;
            if !self.inputs.primary.distribution_into(p, &mut a) {
                ll.fill(f64::NAN);
                continue;
            }
            match self.inputs.mode {
                FusionMode::AOnly => ll.copy_from_slice(&a),
                FusionMode::TwoStage => {
                    let secondary = self.inputs.secondary.unwrap();
                    let fmap = self.inputs.cloud_fraction.unwrap();
                    let f = fmap.value(p, 0);
                    if fmap.is_nodata(f) || !secondary.distribution_into(p, &mut b) {
                        ll.fill(f64::NAN);
                        continue;
                    }
                    combine_unchecked(&a, &b, stage_one_keep(f as f64), ll);
                }
            }
        }
    }

    fn wants_stage_two(&self, pixel: usize) -> bool {
        match self.inputs.mode {
            FusionMode::AOnly => true,
            FusionMode::TwoStage => self
                .inputs
                .secondary_mask
                .is_some_and(|m| m.get(pixel).is_cloud_or_shadow()),
        }
    }

    // Reliability of the coarse source at a fine pixel, if it has a cell.
    fn reliability(&self, pixel: usize, agreement: &[f64]) -> Option<(usize, f64)> {
        let coarse = self.inputs.coarse?;
        let cell = coarse.groups.assignment(pixel)?;
        let m = coarse.missing_fraction.value(cell, 0);
        if coarse.missing_fraction.is_nodata(m) {
            return None;
        }
        Some((cell, reliability_weight(agreement[pixel], m as f64)))
    }

    fn stage_two(&self, first: usize, stage_one: &[f64], agreement: &[f64], out: &mut [f64]) {
        let c = self.num_classes;
        for (k, r) in out.chunks_exact_mut(c).enumerate() {
            let p = first + k;
            let ll = &stage_one[p * c..(p + 1) * c];
            if ll[0].is_nan() || !self.wants_stage_two(p) {
                r.copy_from_slice(ll);
                continue;
            }
            match self.reliability(p, agreement) {
                Some((cell, w)) => {
                    let m = &self.coarse_dists[cell * c..(cell + 1) * c];
                    if m[0].is_nan() {
                        r.fill(f64::NAN);
                    } else {
                        combine_unchecked(ll, m, stage_two_keep(w), r);
                    }
                }
                None => r.copy_from_slice(ll),
            }
        }
    }
}

/// Fuses whole rasters on the calling thread.
pub fn fuse_raster(inputs: FusionInputs<'_>) -> Result<FusionOutput> {
    fuse_raster_with(inputs, &Sequential)
}

/// Fuses whole rasters, running the per-pixel stages on `exec`.
///
/// Stage one produces `LL` everywhere; group agreement is computed over the
/// complete `LL` raster; stage two then combines `LL` with the coarse
/// source where the mode asks for it. Pixels with an invalid required input
/// come out all-NaN with a NODATA label.
pub fn fuse_raster_with<E: Executor>(inputs: FusionInputs<'_>, exec: &E) -> Result<FusionOutput> {
    let plan = Plan::new(inputs)?;
    let geometry = *inputs.primary.geometry();
    let c = plan.num_classes;
    let n = geometry.len();

    let mut stage_one = vec![0.0; n * c];
    exec.for_each_chunk(&mut stage_one, c, |first, out| plan.stage_one(first, out));

    let ll_labels: Vec<u8> = stage_one
        .chunks_exact(c)
        .map(|px| if px[0].is_nan() { LABEL_NODATA } else { argmax(px) as u8 })
        .collect();
    let agreement = match inputs.coarse {
        Some(coarse) => group_agreement_from_labels(&ll_labels, c, coarse.groups)?,
        None => vec![0.0; n],
    };

    let mut posterior = vec![0.0; n * c];
    exec.for_each_chunk(&mut posterior, c, |first, out| {
        plan.stage_two(first, &stage_one, &agreement, out)
    });

    let reliability: Vec<f64> = (0..n)
        .map(|p| plan.reliability(p, &agreement).map_or(f64::NAN, |(_, w)| w))
        .collect();
    let stage_two_applied = (0..n)
        .map(|p| {
            !stage_one[p * c].is_nan()
                && plan.wants_stage_two(p)
                && plan.reliability(p, &agreement).is_some()
        })
        .collect();
    let labels = posterior
        .chunks_exact(c)
        .map(|px| if px[0].is_nan() { LABEL_NODATA } else { argmax(px) as u8 })
        .collect();

    Ok(FusionOutput {
        geometry,
        num_classes: c,
        stage_one,
        posterior,
        agreement,
        reliability,
        stage_two_applied,
        labels: LabelRaster::new(geometry, c, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cpd_rows_sum_to_one() {
        let cpd = FusionCpd::for_cloud_fraction(4, 0.3).unwrap();
        let t = cpd.table();
        for row in t.chunks_exact(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn combine_pair_extremes() {
        let a = [0.7, 0.2, 0.1];
        let b = [0.1, 0.8, 0.1];
        assert!(close(&combine_pair(&a, &b, 1.0).unwrap(), &a, 1e-15));
        let half = combine_pair(&a, &b, 0.5).unwrap();
        assert!(close(&half, &[0.4, 0.5, 0.1], 1e-15));
    }

    #[test]
    fn combine_pair_worked_example() {
        let out = combine_pair(&[0.7, 0.2, 0.1], &[0.1, 0.8, 0.1], stage_one_keep(0.5)).unwrap();
        assert!(close(&out, &[0.55, 0.35, 0.10], 1e-12));
        assert_eq!(marginal_map(&out), 0);
    }

    #[test]
    fn combine_pair_rejects_unnormalized() {
        assert!(matches!(
            combine_pair(&[0.7, 0.2], &[0.5, 0.5], 0.75),
            Err(Error::UnnormalizedInput { .. })
        ));
        assert!(combine_pair(&[0.5, 0.5], &[0.5, 0.5], 0.25).is_err());
    }

    #[test]
    fn fuse_pixel_paths() {
        let a = [0.6, 0.4];
        let m = [0.2, 0.8];
        let id = PixelModel {
            prior_a: &a,
            prior_b: None,
            prior_m: None,
            cloud_fraction: 0.0,
            reliability: 0.0,
        };
        assert_eq!(fuse_pixel(&id).unwrap(), a);

        let with_m = PixelModel {
            prior_m: Some(&m),
            reliability: 1.0,
            ..id
        };
        let r = fuse_pixel(&with_m).unwrap();
        assert!(close(&r, &[0.40, 0.60], 1e-12));
        assert!(close(&joint_enumeration_oracle(&with_m).unwrap(), &r, 1e-12));
    }

    #[test]
    fn oracle_symmetry_and_limits() {
        let u = [0.25; 4];
        let model = PixelModel {
            prior_a: &u,
            prior_b: Some(&u),
            prior_m: Some(&u),
            cloud_fraction: 0.4,
            reliability: 0.7,
        };
        assert!(close(&joint_enumeration_oracle(&model).unwrap(), &u, 1e-15));

        let big = [1.0 / 17.0; 17];
        let model = PixelModel {
            prior_a: &big,
            prior_b: None,
            prior_m: None,
            cloud_fraction: 0.0,
            reliability: 0.0,
        };
        assert!(matches!(
            joint_enumeration_oracle(&model),
            Err(Error::TooManyClasses { .. })
        ));
    }

    #[test]
    fn oracle_matches_worked_example() {
        let a = [0.7, 0.2, 0.1];
        let b = [0.1, 0.8, 0.1];
        let model = PixelModel {
            prior_a: &a,
            prior_b: Some(&b),
            prior_m: None,
            cloud_fraction: 0.5,
            reliability: 0.0,
        };
        assert!(close(
            &joint_enumeration_oracle(&model).unwrap(),
            &[0.55, 0.35, 0.10],
            1e-12
        ));
    }

    #[test]
    fn marginal_map_ties() {
        assert_eq!(marginal_map(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(marginal_map(&[0.5, 0.5]), 0);
    }

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, 0.0, 0.0, 30.0, -30.0).unwrap()
    }

    #[test]
    fn a_only_without_coarse_is_argmax() {
        let g = geom(3, 1);
        let a = ProbabilityRaster::new(g, 2, vec![0.2, 0.8, 0.9, 0.1, 0.5, 0.5]).unwrap();
        let out = fuse_raster(FusionInputs {
            mode: FusionMode::AOnly,
            primary: &a,
            secondary: None,
            cloud_fraction: None,
            secondary_mask: None,
            coarse: None,
        })
        .unwrap();
        assert_eq!(out.labels.labels(), &[1, 0, 0]);
    }

    #[test]
    fn two_stage_requires_inputs() {
        let g = geom(1, 1);
        let a = ProbabilityRaster::new(g, 2, vec![0.2, 0.8]).unwrap();
        let err = fuse_raster(FusionInputs {
            mode: FusionMode::TwoStage,
            primary: &a,
            secondary: Some(&a),
            cloud_fraction: None,
            secondary_mask: None,
            coarse: None,
        })
        .unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }

    #[test]
    fn invalid_prior_propagates_nodata() {
        let g = geom(2, 1);
        let a = ProbabilityRaster::new(g, 2, vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        let b = ProbabilityRaster::new(g, 2, vec![f32::NAN, f32::NAN, 0.5, 0.5]).unwrap();
        let f = BandRaster::filled(g, 1, 0.0);
        let mask = MaskRaster::filled(g, crate::raster::MaskFlag::Clear);
        let out = fuse_raster(FusionInputs {
            mode: FusionMode::TwoStage,
            primary: &a,
            secondary: Some(&b),
            cloud_fraction: Some(&f),
            secondary_mask: Some(&mask),
            coarse: None,
        })
        .unwrap();
        assert_eq!(out.labels.labels(), &[LABEL_NODATA, 0]);
        assert!(out.posterior[0].is_nan());
    }
}
