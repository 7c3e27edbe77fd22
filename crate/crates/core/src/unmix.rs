//! Endmember extraction (N-FINDR) and sum-to-one linear unmixing, used to
//! estimate how much of a cloud/shadow-flagged pixel is cloud or soil.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::raster::{BandRaster, MaskFlag, MaskRaster};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndmemberRole {
    Cloud,
    Soil,
    Vegetation,
    Dark,
}

impl EndmemberRole {
    pub const ALL: [EndmemberRole; 4] = [Self::Cloud, Self::Soil, Self::Vegetation, Self::Dark];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cloud => "cloud",
            Self::Soil => "soil",
            Self::Vegetation => "vegetation",
            Self::Dark => "dark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// Positions of the four roles inside an endmember set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleIndices {
    pub cloud: usize,
    pub soil: usize,
    pub vegetation: usize,
    pub dark: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberSet {
    num_bands: usize,
    spectra: Vec<Vec<f64>>,
    roles: Vec<Option<EndmemberRole>>,
}

impl EndmemberSet {
    pub fn new(spectra: Vec<Vec<f64>>, roles: Vec<Option<EndmemberRole>>) -> Result<Self> {
        let e = spectra.len();
        if e < 2 {
            return Err(Error::InvalidParameter("need at least 2 endmembers"));
        }
        let num_bands = spectra[0].len();
        if num_bands == 0 || spectra.iter().any(|s| s.len() != num_bands) {
            return Err(Error::InvalidParameter("endmember spectra must share a band count"));
        }
        if e > num_bands + 1 {
            return Err(Error::InvalidParameter("more endmembers than bands + 1"));
        }
        if roles.len() != e {
            return Err(Error::DimensionMismatch {
                expected: e,
                actual: roles.len(),
            });
        }
        let set = Self {
            num_bands,
            spectra,
            roles,
        };
        set.check_roles_distinct()?;
        Ok(set)
    }

    pub fn unlabelled(spectra: Vec<Vec<f64>>) -> Result<Self> {
        let e = spectra.len();
        Self::new(spectra, vec![None; e])
    }

    fn check_roles_distinct(&self) -> Result<()> {
        for (i, a) in self.roles.iter().enumerate() {
            if a.is_some() && self.roles[i + 1..].contains(a) {
                return Err(Error::InvalidParameter("endmember roles must be distinct"));
            }
        }
        Ok(())
    }

    pub fn num_endmembers(&self) -> usize {
        self.spectra.len()
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn spectra(&self) -> &[Vec<f64>] {
        &self.spectra
    }

    pub fn roles(&self) -> &[Option<EndmemberRole>] {
        &self.roles
    }

    pub fn with_roles(mut self, roles: Vec<Option<EndmemberRole>>) -> Result<Self> {
        if roles.len() != self.spectra.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spectra.len(),
                actual: roles.len(),
            });
        }
        self.roles = roles;
        self.check_roles_distinct()?;
        Ok(self)
    }

    /// Labels four endmembers: cloud is the brightest (mean reflectance),
    /// dark the dimmest, vegetation the largest `nir - red` of the rest, and
    /// soil whatever remains.
    pub fn with_auto_roles(self, red_band: usize, nir_band: usize) -> Result<Self> {
        if self.spectra.len() != 4 {
            return Err(Error::InvalidParameter("automatic roles need exactly 4 endmembers"));
        }
        if red_band >= self.num_bands || nir_band >= self.num_bands {
            return Err(Error::InvalidParameter("red/nir band index out of range"));
        }
        let mean = |i: usize| self.spectra[i].iter().sum::<f64>() / self.num_bands as f64;
        let mut left: Vec<usize> = (0..4).collect();
        let mut take = |score: &dyn Fn(usize) -> f64| {
            let pos = (0..left.len())
                .max_by(|&a, &b| {
                    score(left[a])
                        .total_cmp(&score(left[b]))
                        .then(left[b].cmp(&left[a]))
                })
                .unwrap();
            left.remove(pos)
        };
        let cloud = take(&|i| mean(i));
        let dark = take(&|i| -mean(i));
        let vegetation = take(&|i| self.spectra[i][nir_band] - self.spectra[i][red_band]);
        let soil = take(&|_| 0.0);
        let mut roles = vec![None; 4];
        roles[cloud] = Some(EndmemberRole::Cloud);
        roles[dark] = Some(EndmemberRole::Dark);
        roles[vegetation] = Some(EndmemberRole::Vegetation);
        roles[soil] = Some(EndmemberRole::Soil);
        self.with_roles(roles)
    }

    pub fn role_indices(&self) -> Result<RoleIndices> {
        let find = |role| {
            self.roles
                .iter()
                .position(|r| *r == Some(role))
                .ok_or(Error::MissingInput("endmember role"))
        };
        Ok(RoleIndices {
            cloud: find(EndmemberRole::Cloud)?,
            soil: find(EndmemberRole::Soil)?,
            vegetation: find(EndmemberRole::Vegetation)?,
            dark: find(EndmemberRole::Dark)?,
        })
    }
}

/// Result of an N-FINDR search.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub endmembers: EndmemberSet,
    /// Index of the pixel chosen for each endmember.
    pub pixel_indices: Vec<usize>,
    /// Simplex volume in the reduced space.
    pub volume: f64,
    /// Volume of the extreme-projection seed.
    pub seed_volume: f64,
    /// Sweeps summed over all starts.
    pub sweeps: usize,
}

/// Projects spectra onto their leading `dims` principal axes.
fn principal_projection(pixels: &[f64], num_bands: usize, dims: usize) -> (Vec<f64>, f64) {
    let n = pixels.len() / num_bands;
    let mut mean = vec![0.0; num_bands];
    for px in pixels.chunks_exact(num_bands) {
        for (m, v) in mean.iter_mut().zip(px) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(num_bands, num_bands);
    for px in pixels.chunks_exact(num_bands) {
        for i in 0..num_bands {
            let di = px[i] - mean[i];
            for j in i..num_bands {
                cov[(i, j)] += di * (px[j] - mean[j]);
            }
        }
    }
    for i in 0..num_bands {
        for j in i..num_bands {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..num_bands).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut out = Vec::with_capacity(n * dims);
    for px in pixels.chunks_exact(num_bands) {
        for &k in &order[..dims] {
            let axis = eigen.eigenvectors.column(k);
            out.push((0..num_bands).map(|b| (px[b] - mean[b]) * axis[b]).sum());
        }
    }
    (out, eigen.eigenvalues[order[0]].max(0.0))
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

// Simplex volume of the chosen rows of `points` (each `dims` long).
fn simplex_volume(points: &[f64], dims: usize, vertices: &[usize]) -> f64 {
    let base = &points[vertices[0] * dims..(vertices[0] + 1) * dims];
    let edges = DMatrix::from_fn(dims, dims, |r, col| {
        points[vertices[col + 1] * dims + r] - base[r]
    });
    edges.determinant().abs() / factorial(dims)
}

// Extreme projections on the leading axes: min and max of axis 0, then the
// max of each following axis, skipping pixels already taken.
fn seed_vertices(points: &[f64], dims: usize, n: usize, e: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(e);
    let pick = |axis: usize, sign: f64, chosen: &mut Vec<usize>| {
        let best = (0..n)
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| {
                (sign * points[a * dims + axis])
                    .total_cmp(&(sign * points[b * dims + axis]))
                    .then(b.cmp(&a))
            })
            .unwrap();
        chosen.push(best);
    };
    pick(0, -1.0, &mut chosen);
    pick(0, 1.0, &mut chosen);
    for axis in 1..e - 1 {
        pick(axis, 1.0, &mut chosen);
    }
    chosen
}

// Iterative single-vertex replacement: each sweep swaps every vertex in
// turn for the pixel that most enlarges the simplex.
fn replace_until_stable(
    points: &[f64],
    dims: usize,
    vertices: &mut [usize],
    max_iterations: usize,
) -> (f64, usize) {
    let n = points.len() / dims;
    let mut volume = simplex_volume(points, dims, vertices);
    let mut trial = vertices.to_vec();
    let mut sweeps = 0;
    while sweeps < max_iterations {
        sweeps += 1;
        let mut changed = false;
        for slot in 0..vertices.len() {
            let mut best = (volume, vertices[slot]);
            for candidate in 0..n {
                if vertices.contains(&candidate) {
                    continue;
                }
                trial.copy_from_slice(vertices);
                trial[slot] = candidate;
                let v = simplex_volume(points, dims, &trial);
                if v > best.0 * (1.0 + 1e-12) {
                    best = (v, candidate);
                }
            }
            if best.1 != vertices[slot] {
                vertices[slot] = best.1;
                volume = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (volume, sweeps)
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

fn random_subset(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let i = (rng.next() % n as u64) as usize;
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Search settings for [`nfindr_extract_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NfindrParams {
    /// Sweep cap per start.
    pub max_iterations: usize,
    /// Extra pseudo-random starts after the extreme-projection seed.
    pub restarts: usize,
    pub restart_seed: u64,
}

impl Default for NfindrParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            restarts: DEFAULT_RESTARTS,
            restart_seed: 0x5EED,
        }
    }
}

/// Random restarts used by [`nfindr_extract`].
pub const DEFAULT_RESTARTS: usize = 16;

/// [`nfindr_extract_with`] using the default restarts.
pub fn nfindr_extract(
    pixels: &[f64],
    num_bands: usize,
    num_endmembers: usize,
    max_iterations: usize,
) -> Result<Extraction> {
    nfindr_extract_with(
        pixels,
        num_bands,
        num_endmembers,
        &NfindrParams {
            max_iterations,
            ..NfindrParams::default()
        },
    )
}

/// N-FINDR: finds the `num_endmembers` pixels spanning the largest simplex
/// after projecting onto the leading `num_endmembers - 1` principal axes.
///
/// Starting from a deterministic seed of extreme projections, each sweep
/// replaces every vertex in turn with the pixel that most enlarges the
/// simplex, until a sweep changes nothing or `max_iterations` sweeps ran.
/// The same search is repeated from `restarts` pseudo-random starts and the
/// largest simplex wins, which guards against single-swap local optima.
pub fn nfindr_extract_with(
    pixels: &[f64],
    num_bands: usize,
    num_endmembers: usize,
    params: &NfindrParams,
) -> Result<Extraction> {
    let max_iterations = params.max_iterations;
    let e = num_endmembers;
    if num_bands == 0 || pixels.len() % num_bands != 0 {
        return Err(Error::InvalidParameter("pixel buffer is not a whole number of spectra"));
    }
    if e < 2 || e > num_bands + 1 {
        return Err(Error::InvalidParameter("endmember count must be in 2..=bands+1"));
    }
    let n = pixels.len() / num_bands;
    if n < e {
        return Err(Error::TooFewPixels { needed: e, got: n });
    }
    if pixels.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("spectra must be finite"));
    }
    let dims = e - 1;
    let (points, leading_variance) = principal_projection(pixels, num_bands, dims);

    let mut vertices = seed_vertices(&points, dims, n, e);
    let seed_volume = simplex_volume(&points, dims, &vertices);
    let (mut volume, mut sweeps) = replace_until_stable(&points, dims, &mut vertices, max_iterations);
    let mut rng = SplitMix64(params.restart_seed);
    for _ in 0..params.restarts {
        let mut start = random_subset(&mut rng, n, e);
        let (v, s) = replace_until_stable(&points, dims, &mut start, max_iterations);
        sweeps += s;
        if v > volume * (1.0 + 1e-12) {
            volume = v;
            vertices = start;
        }
    }

    let scale = libm::pow(crate::math::sqrt(leading_variance), dims as f64);
    if !(volume > 1e-12 * scale) {
        return Err(Error::DegenerateCloud);
    }
    let spectra = vertices
        .iter()
        .map(|&i| pixels[i * num_bands..(i + 1) * num_bands].to_vec())
        .collect();
    Ok(Extraction {
        endmembers: EndmemberSet::unlabelled(spectra)?,
        pixel_indices: vertices,
        volume,
        seed_volume,
        sweeps,
    })
}

/// Per-endmember fractions of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceVector(pub Vec<f64>);

impl Deref for AbundanceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Equality-constrained least squares unmixing against a fixed endmember
/// set: minimizes `|x - E a|^2` subject to `sum(a) = 1`. Abundances are not
/// constrained to be nonnegative.
#[derive(Debug, Clone)]
pub struct Unmixer {
    num_bands: usize,
    num_endmembers: usize,
    spectra: Vec<Vec<f64>>,
    kkt: LU<f64, Dyn, Dyn>,
}

impl Unmixer {
    pub fn new(endmembers: &EndmemberSet) -> Result<Self> {
        let e = endmembers.num_endmembers();
        let s = endmembers.spectra();
        // [E^T E  1; 1^T 0] is nonsingular iff [E; 1^T] has full column rank.
        let k = DMatrix::from_fn(e + 1, e + 1, |i, j| match (i < e, j < e) {
            (true, true) => s[i].iter().zip(&s[j]).map(|(a, b)| a * b).sum(),
            (false, false) => 0.0,
            _ => 1.0,
        });
        let kkt = k.lu();
        let pivots = kkt.u().diagonal().abs();
        if !(pivots.min() > 1e-12 * pivots.max()) {
            return Err(Error::RankDeficient);
        }
        Ok(Self {
            num_bands: endmembers.num_bands(),
            num_endmembers: e,
            spectra: s.to_vec(),
            kkt,
        })
    }

    pub fn unmix(&self, spectrum: &[f64]) -> Result<AbundanceVector> {
        if spectrum.len() != self.num_bands {
            return Err(Error::DimensionMismatch {
                expected: self.num_bands,
                actual: spectrum.len(),
            });
        }
        let e = self.num_endmembers;
        let rhs = DVector::from_fn(e + 1, |i, _| match self.spectra.get(i) {
            Some(s) => s.iter().zip(spectrum).map(|(a, b)| a * b).sum(),
            None => 1.0,
        });
        let sol = self.kkt.solve(&rhs).ok_or(Error::RankDeficient)?;
        Ok(AbundanceVector(sol.as_slice()[..e].to_vec()))
    }
}

/// Unmixes a single spectrum.
pub fn unmix_pixel(spectrum: &[f64], endmembers: &EndmemberSet) -> Result<AbundanceVector> {
    Unmixer::new(endmembers)?.unmix(spectrum)
}

/// `(c + s) / (c + s + v + d)` after clamping each fraction to `[0, 1]`;
/// 0 when the clamped denominator vanishes.
pub fn cloud_shadow_fraction(abundance: &[f64], roles: &RoleIndices) -> f64 {
    let get = |i: usize| abundance[i].clamp(0.0, 1.0);
    let (c, s, v, d) = (
        get(roles.cloud),
        get(roles.soil),
        get(roles.vegetation),
        get(roles.dark),
    );
    let denom = c + s + v + d;
    if denom <= 0.0 {
        return 0.0;
    }
    ((c + s) / denom).clamp(0.0, 1.0)
}

/// Cloud/shadow fraction map of a scene: computed on CLOUD and SHADOW
/// pixels, exactly 0 on CLEAR pixels, nodata on NODATA pixels (and on
/// flagged pixels whose spectrum is nodata).
pub fn fraction_raster(
    bands: &BandRaster,
    mask: &MaskRaster,
    endmembers: &EndmemberSet,
) -> Result<BandRaster> {
    if bands.geometry() != mask.geometry() {
        return Err(Error::GeometryMismatch);
    }
    if bands.num_bands() != endmembers.num_bands() {
        return Err(Error::DimensionMismatch {
            expected: endmembers.num_bands(),
            actual: bands.num_bands(),
        });
    }
    let roles = endmembers.role_indices()?;
    let unmixer = Unmixer::new(endmembers)?;
    let mut spectrum = vec![0.0; bands.num_bands()];
    let mut out = Vec::with_capacity(bands.geometry().len());
    for (p, flag) in mask.flags().iter().enumerate() {
        let v = match flag {
            MaskFlag::Clear => 0.0,
            MaskFlag::NoData => f32::NAN,
            MaskFlag::Cloud | MaskFlag::Shadow => {
                if bands.pixel_is_nodata(p) {
                    f32::NAN
                } else {
                    for (s, &v) in spectrum.iter_mut().zip(bands.pixel(p)) {
                        *s = v as f64;
                    }
                    let a = unmixer.unmix(&spectrum)?;
                    cloud_shadow_fraction(&a, &roles) as f32
                }
            }
        };
        out.push(v);
    }
    BandRaster::new(*bands.geometry(), 1, out, f32::NAN)
}

/// Collects the spectra of every pixel that is not nodata, as a flat buffer
/// for [`nfindr_extract`].
pub fn valid_spectra(bands: &BandRaster, mask: Option<&MaskRaster>) -> Vec<f64> {
    let mut out = Vec::new();
    for p in 0..bands.geometry().len() {
        if bands.pixel_is_nodata(p) || mask.is_some_and(|m| m.get(p) == MaskFlag::NoData) {
            continue;
        }
        out.extend(bands.pixel(p).iter().map(|&v| v as f64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;

    fn generators() -> Vec<Vec<f64>> {
        vec![
            vec![0.80, 0.82, 0.85, 0.83, 0.80, 0.78],
            vec![0.20, 0.25, 0.30, 0.35, 0.40, 0.42],
            vec![0.04, 0.08, 0.05, 0.45, 0.25, 0.12],
            vec![0.02, 0.02, 0.02, 0.03, 0.02, 0.01],
        ]
    }

    fn labelled() -> EndmemberSet {
        EndmemberSet::unlabelled(generators())
            .unwrap()
            .with_auto_roles(2, 3)
            .unwrap()
    }

    #[test]
    fn auto_roles_follow_brightness_and_greenness() {
        let r = labelled().role_indices().unwrap();
        assert_eq!(
            r,
            RoleIndices {
                cloud: 0,
                soil: 1,
                vegetation: 2,
                dark: 3
            }
        );
    }

    #[test]
    fn vertex_spectrum_unmixes_to_one_hot() {
        let set = labelled();
        let a = unmix_pixel(&generators()[1], &set).unwrap();
        for (i, v) in a.iter().enumerate() {
            let want = if i == 1 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "{a:?}");
        }
    }

    #[test]
    fn midpoint_unmixes_to_halves() {
        let g = generators();
        let x: Vec<f64> = g[0].iter().zip(&g[2]).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let a = unmix_pixel(&x, &labelled()).unwrap();
        for (v, want) in a.iter().zip([0.5, 0.0, 0.5, 0.0]) {
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_endmembers_are_rank_deficient() {
        let mut g = generators();
        g[3] = g[2].clone();
        let set = EndmemberSet::unlabelled(g).unwrap();
        assert!(matches!(
            unmix_pixel(&[0.1; 6], &set),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn fraction_examples() {
        let r = RoleIndices {
            cloud: 0,
            soil: 1,
            vegetation: 2,
            dark: 3,
        };
        assert!((cloud_shadow_fraction(&[0.4, 0.3, 0.2, 0.1], &r) - 0.7).abs() < 1e-15);
        assert_eq!(cloud_shadow_fraction(&[0.0, 0.0, 1.0, 0.0], &r), 0.0);
        assert_eq!(cloud_shadow_fraction(&[1.0, 0.0, 0.0, 0.0], &r), 1.0);
        assert_eq!(cloud_shadow_fraction(&[-0.2, 0.0, 0.0, 1.2], &r), 0.0);
    }

    #[test]
    fn nfindr_recovers_generators_of_convex_combinations() {
        let g = generators();
        let mut pixels: Vec<f64> = Vec::new();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 0.9 + 0.05
        };
        for _ in 0..50 {
            let w: Vec<f64> = (0..4).map(|_| next()).collect();
            let s: f64 = w.iter().sum();
            for b in 0..6 {
                pixels.push((0..4).map(|k| w[k] / s * g[k][b]).sum());
            }
        }
        for s in &g {
            pixels.extend_from_slice(s);
        }
        let ex = nfindr_extract(&pixels, 6, 4, 50).unwrap();
        let mut idx = ex.pixel_indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, [50, 51, 52, 53]);
        assert!(ex.volume >= ex.seed_volume);
    }

    #[test]
    fn nfindr_errors() {
        assert!(matches!(
            nfindr_extract(&[0.0; 18], 6, 4, 10),
            Err(Error::TooFewPixels { needed: 4, got: 3 })
        ));
        let collinear: Vec<f64> = (0..10).flat_map(|i| [i as f64, 2.0 * i as f64, 0.5]).collect();
        assert_eq!(nfindr_extract(&collinear, 3, 3, 10), Err(Error::DegenerateCloud));
    }

    #[test]
    fn fraction_raster_rules() {
        let geom = GridGeometry::new(3, 1, 0.0, 0.0, 30.0, -30.0).unwrap();
        let g = generators();
        let data: Vec<f32> = g[0].iter().chain(&g[2]).chain(&g[1]).map(|&v| v as f32).collect();
        let bands = BandRaster::new(geom, 6, data, f32::NAN).unwrap();
        let mask = MaskRaster::new(geom, vec![MaskFlag::Cloud, MaskFlag::Clear, MaskFlag::NoData]).unwrap();
        let f = fraction_raster(&bands, &mask, &labelled()).unwrap();
        assert!((f.data()[0] - 1.0).abs() < 1e-6);
        assert_eq!(f.data()[1], 0.0);
        assert!(f.data()[2].is_nan());
    }
}
