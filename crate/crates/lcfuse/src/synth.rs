//! Deterministic synthetic scenes: ground truth, a clean fine scene `A`, a
//! partly clouded fine scene `B` with its mask, a coarse time series with
//! gaps, labelled samples and the true endmember spectra.

use std::path::Path;

use anyhow::{ensure, Result};
use lcfuse_core::features::TimeSeriesStack;
use lcfuse_core::raster::{
    BandRaster, GridGeometry, LabelRaster, MaskFlag, MaskRaster, Sample, SampleSet, Split,
};
use lcfuse_core::unmix::{EndmemberRole, EndmemberSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io;

/// Band order of every synthetic reflectance stack.
pub const BAND_NAMES: [&str; 6] = ["blue", "green", "red", "nir", "swir1", "swir2"];
pub const RED_BAND: usize = 2;
pub const NIR_BAND: usize = 3;

pub const CLASS_NAMES: [&str; 7] = ["CR", "FR", "GR", "SHR", "WB", "IMP", "BL"];

const CLASS_SPECTRA: [[f64; 6]; 7] = [
    [0.06, 0.09, 0.08, 0.32, 0.22, 0.13],
    [0.03, 0.05, 0.03, 0.28, 0.13, 0.06],
    [0.05, 0.08, 0.07, 0.26, 0.24, 0.14],
    [0.05, 0.07, 0.08, 0.21, 0.23, 0.15],
    [0.07, 0.06, 0.04, 0.02, 0.01, 0.01],
    [0.12, 0.13, 0.14, 0.18, 0.20, 0.19],
    [0.14, 0.17, 0.21, 0.26, 0.33, 0.29],
];
const CLOUD_SPECTRUM: [f64; 6] = [0.75, 0.74, 0.76, 0.78, 0.62, 0.50];
const DARK_SPECTRUM: [f64; 6] = [0.01, 0.01, 0.01, 0.02, 0.01, 0.01];

// Seasonal EVI bump per class: base, amplitude, peak (fraction of the
// year), width.
const PHENOLOGY: [[f64; 4]; 7] = [
    [0.15, 0.50, 0.55, 0.10],
    [0.35, 0.25, 0.50, 0.30],
    [0.15, 0.30, 0.35, 0.15],
    [0.12, 0.15, 0.65, 0.20],
    [0.00, 0.00, 0.50, 0.30],
    [0.10, 0.05, 0.50, 0.30],
    [0.05, 0.02, 0.50, 0.30],
];

/// Coarse series channels: EVI, red, nir.
pub const SERIES_CHANNELS: usize = 3;
/// Value stored at missing epochs, like a product fill value.
pub const SERIES_FILL: f32 = -0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub coarse_factor: usize,
    pub num_classes: usize,
    pub regions: usize,
    /// Share of regions whose class differs at the date of `A`.
    pub change_fraction: f64,
    /// Share of fine pixels flagged CLOUD in `B`.
    pub cloud_fraction: f64,
    /// SHADOW pixels as a share of the CLOUD pixel count.
    pub shadow_ratio: f64,
    pub noise_a: f64,
    pub noise_b: f64,
    pub epochs: usize,
    pub missing_rate: f64,
    pub series_noise: f64,
    pub train_per_class: usize,
    pub validation: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            pixel_size: 30.0,
            coarse_factor: 8,
            num_classes: 5,
            regions: 24,
            change_fraction: 0.2,
            cloud_fraction: 0.25,
            shadow_ratio: 0.3,
            noise_a: 0.03,
            noise_b: 0.03,
            epochs: 23,
            missing_rate: 0.2,
            series_noise: 0.03,
            train_per_class: 40,
            validation: 600,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.width >= 1 && self.height >= 1, "grid must be non-empty");
        ensure!(self.pixel_size > 0.0, "pixel_size must be positive");
        ensure!(self.coarse_factor >= 1, "coarse_factor must be >= 1");
        ensure!(
            (2..=CLASS_NAMES.len()).contains(&self.num_classes),
            "num_classes must be in 2..=7"
        );
        ensure!(self.regions >= self.num_classes, "regions must be >= num_classes");
        ensure!(
            self.regions <= self.width * self.height,
            "regions exceed the pixel count"
        );
        ensure!(
            (0.0..=1.0).contains(&self.change_fraction),
            "change_fraction must be in [0, 1]"
        );
        ensure!((0.0..=1.0).contains(&self.cloud_fraction), "cloud_fraction must be in [0, 1]");
        ensure!(self.shadow_ratio >= 0.0, "shadow_ratio must be >= 0");
        ensure!(self.noise_a >= 0.0 && self.noise_b >= 0.0, "noise must be >= 0");
        ensure!(self.series_noise >= 0.0, "series_noise must be >= 0");
        ensure!(self.epochs >= 1, "epochs must be >= 1");
        ensure!((0.0..=1.0).contains(&self.missing_rate), "missing_rate must be in [0, 1]");
        ensure!(self.train_per_class >= 2, "train_per_class must be >= 2");
        Ok(())
    }

    fn fine_geometry(&self) -> Result<GridGeometry> {
        let top = self.height as f64 * self.pixel_size;
        Ok(GridGeometry::new(
            self.width,
            self.height,
            0.0,
            top,
            self.pixel_size,
            -self.pixel_size,
        )?)
    }

    fn coarse_geometry(&self) -> Result<GridGeometry> {
        let f = self.coarse_factor;
        let size = self.pixel_size * f as f64;
        Ok(GridGeometry::new(
            self.width.div_ceil(f),
            self.height.div_ceil(f),
            0.0,
            self.height as f64 * self.pixel_size,
            size,
            -size,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub truth: LabelRaster,
    pub bands_a: BandRaster,
    pub bands_b: BandRaster,
    pub mask_b: MaskRaster,
    pub coarse_series: TimeSeriesStack,
    pub samples: SampleSet,
    pub endmembers: EndmemberSet,
}

fn noisy(rng: &mut ChaCha8Rng, v: f64, sigma: f64) -> f32 {
    let n = if sigma > 0.0 {
        Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        0.0
    };
    (v + n).max(0.0) as f32
}

fn seasonal(class: usize, t: usize, epochs: usize) -> f64 {
    let [_, _, peak, width] = PHENOLOGY[class];
    let x = (t as f64 + 0.5) / epochs as f64;
    (-((x - peak) / width).powi(2)).exp()
}

pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fine = spec.fine_geometry()?;
    let n = fine.len();
    let c = spec.num_classes;

    // Ground truth: Voronoi regions, the first `c` seeds cover every class.
    let seeds: Vec<(f64, f64, usize)> = (0..spec.regions)
        .map(|i| {
            let class = if i < c { i } else { rng.random_range(0..c) };
            (
                rng.random_range(0.0..spec.width as f64),
                rng.random_range(0.0..spec.height as f64),
                class,
            )
        })
        .collect();
    let region: Vec<u32> = (0..n)
        .map(|p| {
            let (col, row) = fine.col_row(p);
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let nearest = seeds
                .iter()
                .enumerate()
                .min_by(|(i, a), (j, b)| {
                    let da = (a.0 - x).powi(2) + (a.1 - y).powi(2);
                    let db = (b.0 - x).powi(2) + (b.1 - y).powi(2);
                    da.total_cmp(&db).then(i.cmp(j))
                })
                .unwrap();
            nearest.0 as u32
        })
        .collect();
    // `A` predates the reference: some regions held another class then.
    let earlier: Vec<usize> = seeds
        .iter()
        .map(|&(_, _, class)| {
            if rng.random_bool(spec.change_fraction) {
                (class + rng.random_range(1..c)) % c
            } else {
                class
            }
        })
        .collect();
    let truth: Vec<u8> = region.iter().map(|&r| seeds[r as usize].2 as u8).collect();
    let truth_a: Vec<u8> = region.iter().map(|&r| earlier[r as usize] as u8).collect();

    // Cloud blob: the pixels nearest a random center, then a shadow ring.
    let (cx, cy) = (
        rng.random_range(0.0..spec.width as f64),
        rng.random_range(0.0..spec.height as f64),
    );
    let mut order: Vec<usize> = (0..n).collect();
    let dist = |p: usize| {
        let (col, row) = fine.col_row(p);
        (col as f64 + 0.5 - cx).powi(2) + (row as f64 + 0.5 - cy).powi(2)
    };
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let n_cloud = (spec.cloud_fraction * n as f64).round() as usize;
    let n_shadow = ((spec.shadow_ratio * n_cloud as f64).round() as usize).min(n - n_cloud);
    let mut flags = vec![MaskFlag::Clear; n];
    // Cloud (or shadow) thickness in [0, 1], 1 at the core.
    let mut thickness = vec![0.0; n];
    for (rank, &p) in order.iter().enumerate().take(n_cloud + n_shadow) {
        if rank < n_cloud {
            flags[p] = MaskFlag::Cloud;
            thickness[p] = 1.0 - 0.4 * rank as f64 / n_cloud.max(1) as f64;
        } else {
            flags[p] = MaskFlag::Shadow;
            thickness[p] = 0.9 - 0.4 * (rank - n_cloud) as f64 / n_shadow.max(1) as f64;
        }
    }

    let nb = BAND_NAMES.len();
    let mut a = Vec::with_capacity(n * nb);
    let mut b = Vec::with_capacity(n * nb);
    for p in 0..n {
        let before = &CLASS_SPECTRA[truth_a[p] as usize];
        for &v in before {
            a.push(noisy(&mut rng, v, spec.noise_a));
        }
        let surface = &CLASS_SPECTRA[truth[p] as usize];
        let t = thickness[p];
        for band in 0..nb {
            let s = surface[band];
            let v = match flags[p] {
                MaskFlag::Cloud => t * CLOUD_SPECTRUM[band] + (1.0 - t) * s,
                MaskFlag::Shadow => t * DARK_SPECTRUM[band] + (1.0 - t) * s,
                _ => s,
            };
            b.push(noisy(&mut rng, v, spec.noise_b));
        }
    }

    // Coarse series: mean class profile of each cell's fine pixels.
    let coarse = spec.coarse_geometry()?;
    let t_len = spec.epochs;
    let mut class_counts = vec![0usize; coarse.len() * c];
    for p in 0..n {
        let (col, row) = fine.col_row(p);
        let cell = coarse.index(col / spec.coarse_factor, row / spec.coarse_factor);
        class_counts[cell * c + truth[p] as usize] += 1;
    }
    let mut values = Vec::with_capacity(coarse.len() * t_len * SERIES_CHANNELS);
    let mut missing = Vec::with_capacity(coarse.len() * t_len);
    for cell in 0..coarse.len() {
        let counts = &class_counts[cell * c..(cell + 1) * c];
        let total: usize = counts.iter().sum();
        for t in 0..t_len {
            let mut mean = [0.0; SERIES_CHANNELS];
            for (k, &cnt) in counts.iter().enumerate() {
                let w = cnt as f64 / total as f64;
                let g = seasonal(k, t, t_len);
                let [base, amp, _, _] = PHENOLOGY[k];
                mean[0] += w * (base + amp * g);
                mean[1] += w * CLASS_SPECTRA[k][RED_BAND] * (1.0 - 0.3 * g);
                mean[2] += w * CLASS_SPECTRA[k][NIR_BAND] * (1.0 + 0.3 * g);
            }
            let gone = rng.random_bool(spec.missing_rate);
            missing.push(gone);
            for m in mean {
                let v = noisy(&mut rng, m, spec.series_noise);
                values.push(if gone { SERIES_FILL } else { v });
            }
        }
    }

    // Samples: stratified training drawn first from pixels that are clear in
    // `B` and unchanged since `A`, so both fine scenes can train on them.
    // Validation is uniform.
    let mut samples = Vec::new();
    let center = |p: usize| {
        let (col, row) = fine.col_row(p);
        fine.pixel_center(col, row)
    };
    for class in 0..c {
        let mut pool: Vec<usize> = (0..n).filter(|&p| truth[p] as usize == class).collect();
        ensure!(pool.len() >= 2, "class {class} covers fewer than 2 pixels");
        pool.shuffle(&mut rng);
        pool.sort_by_key(|&p| (flags[p] != MaskFlag::Clear) as u8 + (truth_a[p] != truth[p]) as u8);
        for &p in pool.iter().cycle().take(spec.train_per_class) {
            let (x, y) = center(p);
            samples.push(Sample {
                x,
                y,
                class_label: class,
                split: Split::Train,
            });
        }
    }
    for _ in 0..spec.validation {
        let p = rng.random_range(0..n);
        let (x, y) = center(p);
        samples.push(Sample {
            x,
            y,
            class_label: truth[p] as usize,
            split: Split::Validation,
        });
    }

    let endmembers = EndmemberSet::new(
        vec![
            CLOUD_SPECTRUM.to_vec(),
            CLASS_SPECTRA[6].to_vec(),
            CLASS_SPECTRA[1].to_vec(),
            DARK_SPECTRUM.to_vec(),
        ],
        vec![
            Some(EndmemberRole::Cloud),
            Some(EndmemberRole::Soil),
            Some(EndmemberRole::Vegetation),
            Some(EndmemberRole::Dark),
        ],
    )?;

    Ok(SyntheticScene {
        truth: LabelRaster::new(fine, c, truth)?,
        bands_a: BandRaster::new(fine, nb, a, f32::NAN)?,
        bands_b: BandRaster::new(fine, nb, b, f32::NAN)?,
        mask_b: MaskRaster::new(fine, flags)?,
        coarse_series: TimeSeriesStack::new(coarse, t_len, SERIES_CHANNELS, values, missing)?,
        samples: SampleSet::new(samples)?,
        endmembers,
    })
}

/// File names written by [`write_scene`].
pub mod files {
    pub const TRUTH: &str = "truth.lbl";
    pub const BANDS_A: &str = "bands_a.bnd";
    pub const BANDS_B: &str = "bands_b.bnd";
    pub const MASK_B: &str = "mask_b.msk";
    pub const COARSE_SERIES: &str = "coarse_series.ts";
    pub const SAMPLES: &str = "samples.csv";
    pub const ENDMEMBERS: &str = "endmembers.csv";
}

/// Writes every scene product into `dir`, returning the paths written.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let p = |name: &str| dir.join(name);
    io::write_labels(&p(files::TRUTH), &scene.truth)?;
    io::write_bands(&p(files::BANDS_A), &scene.bands_a)?;
    io::write_bands(&p(files::BANDS_B), &scene.bands_b)?;
    io::write_mask(&p(files::MASK_B), &scene.mask_b)?;
    io::write_time_series(&p(files::COARSE_SERIES), &scene.coarse_series)?;
    io::write_samples(&p(files::SAMPLES), &scene.samples)?;
    io::write_endmembers(&p(files::ENDMEMBERS), &scene.endmembers)?;
    Ok([
        files::TRUTH,
        files::BANDS_A,
        files::BANDS_B,
        files::MASK_B,
        files::COARSE_SERIES,
        files::SAMPLES,
        files::ENDMEMBERS,
    ]
    .iter()
    .map(|f| p(f))
    .collect())
}
