//! Subcommand implementations. Each takes merged [`Settings`] and returns a
//! human-readable report plus the files it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lcfuse_core::align::{build_group_map, GroupMap};
use lcfuse_core::assess::{render_csv, render_table, score};
use lcfuse_core::classify::ClassifierModel;
use lcfuse_core::features::{glcm_textures, ndvi, GlcmParams, SavitzkyGolay};
use lcfuse_core::pgm::{fuse_raster_with, CoarseSource, FusionInputs, FusionMode};
use lcfuse_core::raster::{BandRaster, MaskFlag, MaskRaster, Split, LABEL_NODATA};
use lcfuse_core::unmix::{
    fraction_raster, nfindr_extract_with, valid_spectra, EndmemberRole, EndmemberSet,
    NfindrParams,
};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Settings};
use crate::io;
use crate::parallel::Parallel;
use crate::synth::{self, SceneSpec};

pub const MANIFEST: &str = "manifest.txt";

/// Fused outputs written by [`cmd_fuse`].
pub mod outputs {
    pub const POSTERIOR: &str = "posterior.prob";
    pub const STAGE_ONE: &str = "stage_one.prob";
    pub const LABELS: &str = "labels.lbl";
    pub const F_MAP: &str = "f_map.bnd";
    pub const AGREEMENT: &str = "agreement.bnd";
    pub const RELIABILITY: &str = "reliability.bnd";
    pub const ENDMEMBERS: &str = "endmembers.csv";
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: String,
    pub outputs: Vec<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

// Payload plus header sidecar when there is one.
fn with_header(path: &Path) -> Vec<PathBuf> {
    let hdr = io::header_path(path);
    if hdr.exists() {
        vec![path.to_path_buf(), hdr]
    } else {
        vec![path.to_path_buf()]
    }
}

/// Writes `manifest.txt`: command, scalar settings, and SHA-256 digests of
/// every input and output file. Paths, the output directory and the thread
/// count are left out so identical runs give identical manifests.
fn write_manifest(
    out_dir: &Path,
    command: &str,
    settings: &Settings,
    path_keys: &[&str],
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let mut m = String::new();
    let _ = writeln!(m, "command: {command}");
    let _ = writeln!(m, "version: {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in settings.iter() {
        if k == "threads" || k == "out_dir" || k == "out" || path_keys.contains(&k) {
            continue;
        }
        let _ = writeln!(m, "setting.{k}: {v}");
    }
    for &k in path_keys {
        if let Some(p) = settings.opt_path(k) {
            for (i, f) in with_header(&p).iter().enumerate() {
                let suffix = if i == 0 { "" } else { ".hdr" };
                let _ = writeln!(m, "input.{k}{suffix}: {}", sha256_file(f)?);
            }
        }
    }
    for f in outputs {
        let name = f.strip_prefix(out_dir).unwrap_or(f).display().to_string();
        let _ = writeln!(m, "output.{name}: {}", sha256_file(f)?);
    }
    let path = out_dir.join(MANIFEST);
    fs::write(&path, m).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn out_dir(s: &Settings) -> Result<PathBuf> {
    let dir = s.path("out_dir")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn executor(s: &Settings) -> Result<Parallel> {
    Parallel::new(s.parse_or("threads", 0usize)?)
}

fn parse_roles(spec: &str, count: usize) -> Result<Vec<Option<EndmemberRole>>> {
    let roles: Vec<Option<EndmemberRole>> = spec
        .split(',')
        .map(|r| {
            EndmemberRole::parse(r)
                .map(Some)
                .ok_or_else(|| config_err(format!("unknown endmember role `{}`", r.trim())))
        })
        .collect::<Result<_>>()?;
    if roles.len() != count {
        return Err(config_err(format!(
            "roles lists {} entries for {count} endmembers",
            roles.len()
        )));
    }
    Ok(roles)
}

/// Endmembers from a CSV or from N-FINDR on `bands`, with roles applied
/// from the `roles` key (`auto` by default) when the set has none.
fn resolve_endmembers(
    s: &Settings,
    bands: Option<&BandRaster>,
    mask: Option<&MaskRaster>,
) -> Result<(EndmemberSet, bool)> {
    let (set, extracted) = match s.opt_path("endmembers") {
        Some(p) => (io::read_endmembers(&p)?, false),
        None => {
            let bands = bands.ok_or_else(|| config_err("need `endmembers` or reflectance bands"))?;
            let pixels = valid_spectra(bands, mask);
            let defaults = NfindrParams::default();
            let params = NfindrParams {
                max_iterations: s.parse_or("nfindr_max_iterations", defaults.max_iterations)?,
                restarts: s.parse_or("nfindr_restarts", defaults.restarts)?,
                ..defaults
            };
            let ex = nfindr_extract_with(&pixels, bands.num_bands(), 4, &params)
                .context("endmember extraction")?;
            (ex.endmembers, true)
        }
    };
    let roles = s.get("roles").unwrap_or("auto");
    let set = if roles == "auto" {
        if set.roles().iter().all(Option::is_some) {
            set
        } else {
            let red = s.parse_or("red_band", synth::RED_BAND)?;
            let nir = s.parse_or("nir_band", synth::NIR_BAND)?;
            set.with_auto_roles(red, nir)?
        }
    } else {
        let r = parse_roles(roles, set.num_endmembers())?;
        set.with_roles(r)?
    };
    Ok((set, extracted))
}

pub fn cmd_fuse(s: &Settings) -> Result<Outcome> {
    let mode = match s.get("mode").unwrap_or("two_stage") {
        "two_stage" => FusionMode::TwoStage,
        "a_only" => FusionMode::AOnly,
        other => return Err(config_err(format!("unknown mode `{other}`"))),
    };
    if mode == FusionMode::TwoStage {
        for key in ["priors_b", "mask_b"] {
            if s.get(key).is_none() {
                return Err(config_err(format!("two_stage mode needs `{key}`")));
            }
        }
        if s.get("f_map").is_none() && s.get("bands_b").is_none() {
            return Err(config_err("two_stage mode needs `f_map` or `bands_b`"));
        }
    }
    if s.get("priors_m").is_some() && s.get("m_fraction").is_none() && s.get("coarse_series").is_none()
    {
        return Err(config_err("`priors_m` needs `m_fraction` or `coarse_series`"));
    }
    let priors_a = s.path("priors_a")?;
    let dir = out_dir(s)?;
    let exec = executor(s)?;

    let a = io::read_probability(&priors_a)?;
    let mut written = Vec::new();
    let (mut b, mut mask, mut fmap) = (None, None, None);
    if mode == FusionMode::TwoStage {
        b = Some(io::read_probability(&s.path("priors_b")?)?);
        let m = io::read_mask(&s.path("mask_b")?)?;
        fmap = Some(match s.opt_path("f_map") {
            Some(p) => io::read_bands(&p)?,
            None => {
                let bands = io::read_bands(&s.path("bands_b")?)?;
                let (set, extracted) = resolve_endmembers(s, Some(&bands), Some(&m))?;
                if extracted {
                    let p = dir.join(outputs::ENDMEMBERS);
                    io::write_endmembers(&p, &set)?;
                    written.push(p);
                }
                fraction_raster(&bands, &m, &set).context("cloud/shadow fractions")?
            }
        });
        mask = Some(m);
    }

    let coarse_parts = match s.opt_path("priors_m") {
        Some(p) => {
            let probs = io::read_probability(&p)?;
            let missing = match s.opt_path("m_fraction") {
                Some(p) => io::read_bands(&p)?,
                None => io::read_time_series(&s.path("coarse_series")?)?.missing_fraction_raster(),
            };
            let groups: GroupMap = match s.opt_path("groups") {
                Some(p) => io::read_group_map(&p)?,
                None => build_group_map(a.geometry(), probs.geometry()).context("grouping")?,
            };
            Some((probs, missing, groups))
        }
        None => None,
    };

    let inputs = FusionInputs {
        mode,
        primary: &a,
        secondary: b.as_ref(),
        cloud_fraction: fmap.as_ref(),
        secondary_mask: mask.as_ref(),
        coarse: coarse_parts.as_ref().map(|(p, m, g)| CoarseSource {
            probabilities: p,
            missing_fraction: m,
            groups: g,
        }),
    };
    let fused = fuse_raster_with(inputs, &exec).context("fusion")?;

    let mut put = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    io::write_probability(&put(outputs::POSTERIOR), &fused.posterior_raster()?)?;
    io::write_probability(&put(outputs::STAGE_ONE), &fused.stage_one_raster()?)?;
    io::write_labels(&put(outputs::LABELS), &fused.labels)?;
    io::write_bands(
        &put(outputs::AGREEMENT),
        &BandRaster::new(
            fused.geometry,
            1,
            fused.agreement.iter().map(|&v| v as f32).collect(),
            f32::NAN,
        )?,
    )?;
    io::write_bands(&put(outputs::RELIABILITY), &fused.reliability_raster()?)?;
    if let Some(f) = &fmap {
        io::write_bands(&put(outputs::F_MAP), f)?;
    }

    let files: Vec<PathBuf> = written.iter().flat_map(|p| with_header(p)).collect();
    let mut recorded = s.clone();
    recorded.set("mode", if mode == FusionMode::TwoStage { "two_stage" } else { "a_only" });
    let manifest = write_manifest(
        &dir,
        "fuse",
        &recorded,
        &[
            "priors_a",
            "priors_b",
            "priors_m",
            "mask_b",
            "bands_b",
            "f_map",
            "endmembers",
            "coarse_series",
            "m_fraction",
            "groups",
        ],
        &files,
    )?;

    let applied = fused.stage_two_applied.iter().filter(|&&x| x).count();
    let nodata = fused.labels.labels().iter().filter(|&&l| l == LABEL_NODATA).count();
    let mut report = String::new();
    let _ = writeln!(
        report,
        "fused {} pixels ({} classes), mode {}",
        fused.geometry.len(),
        fused.num_classes,
        if mode == FusionMode::TwoStage { "two_stage" } else { "a_only" }
    );
    let _ = writeln!(report, "coarse stage applied at {applied} pixels; {nodata} NODATA labels");
    let _ = writeln!(report, "outputs in {}", dir.display());
    let mut outputs = files;
    outputs.push(manifest);
    Ok(Outcome { report, outputs })
}

pub fn cmd_assess(s: &Settings) -> Result<Outcome> {
    let map_path = s.path("map")?;
    let samples_path = s.path("samples")?;
    let map = io::read_labels(&map_path)?;
    let samples = io::read_samples(&samples_path)?;
    let mask = s.opt_path("mask").map(|p| io::read_mask(&p)).transpose()?;
    let names: Vec<String> = s
        .get("class_names")
        .map(|v| v.split(',').map(|n| n.trim().to_string()).collect())
        .unwrap_or_default();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();

    let result = score(&map, &samples, mask.as_ref()).context("scoring")?;
    let mut report = String::new();
    let total = result.matrix.total();
    if mask.is_some() {
        report.push_str("scoring restricted to CLOUD/SHADOW pixels\n");
    }
    let _ = writeln!(report, "{total} samples scored; {} on NODATA pixels", result.nodata);
    if total > 0 {
        report.push_str(&render_table(&result.matrix, &names));
    }
    let mut outputs = Vec::new();
    if let Some(p) = s.opt_path("csv") {
        fs::write(&p, render_csv(&result.matrix, &names))
            .with_context(|| format!("writing {}", p.display()))?;
        outputs.push(p);
    }
    Ok(Outcome { report, outputs })
}

pub fn scene_spec(s: &Settings) -> Result<SceneSpec> {
    let d = SceneSpec::default();
    Ok(SceneSpec {
        width: s.parse_or("width", d.width)?,
        height: s.parse_or("height", d.height)?,
        pixel_size: s.parse_or("pixel_size", d.pixel_size)?,
        coarse_factor: s.parse_or("coarse_factor", d.coarse_factor)?,
        num_classes: s.parse_or("num_classes", d.num_classes)?,
        regions: s.parse_or("regions", d.regions)?,
        change_fraction: s.parse_or("change_fraction", d.change_fraction)?,
        cloud_fraction: s.parse_or("cloud_fraction", d.cloud_fraction)?,
        shadow_ratio: s.parse_or("shadow_ratio", d.shadow_ratio)?,
        noise_a: s.parse_or("noise_a", d.noise_a)?,
        noise_b: s.parse_or("noise_b", d.noise_b)?,
        epochs: s.parse_or("epochs", d.epochs)?,
        missing_rate: s.parse_or("missing_rate", d.missing_rate)?,
        series_noise: s.parse_or("series_noise", d.series_noise)?,
        train_per_class: s.parse_or("train_per_class", d.train_per_class)?,
        validation: s.parse_or("validation", d.validation)?,
    })
}

pub fn cmd_synth(s: &Settings) -> Result<Outcome> {
    let spec = scene_spec(s)?;
    spec.validate().map_err(|e| config_err(e.to_string()))?;
    let seed: u64 = s.parse_or("seed", 1)?;
    let dir = out_dir(s)?;
    let scene = synth::generate(&spec, seed)?;
    let written = synth::write_scene(&scene, &dir)?;
    let files: Vec<PathBuf> = written.iter().flat_map(|p| with_header(p)).collect();
    let manifest = write_manifest(&dir, "synth", s, &[], &files)?;
    let clouded = scene.mask_b.flags().iter().filter(|f| f.is_cloud_or_shadow()).count();
    let report = format!(
        "synthetic scene {}x{} ({} classes, seed {seed}): {clouded} cloud/shadow pixels, {} samples\noutputs in {}\n",
        spec.width,
        spec.height,
        spec.num_classes,
        scene.samples.len(),
        dir.display()
    );
    let mut outputs = files;
    outputs.push(manifest);
    Ok(Outcome { report, outputs })
}

pub fn cmd_unmix(s: &Settings) -> Result<Outcome> {
    let bands_path = s.path("bands")?;
    let dir = out_dir(s)?;
    let bands = io::read_bands(&bands_path)?;
    let mask = s.opt_path("mask").map(|p| io::read_mask(&p)).transpose()?;
    let (set, _) = resolve_endmembers(s, Some(&bands), mask.as_ref())?;
    let mut written = vec![dir.join(outputs::ENDMEMBERS)];
    io::write_endmembers(&written[0], &set)?;
    let mut report = String::new();
    for (spec, role) in set.spectra().iter().zip(set.roles()) {
        let name = role.map_or("?", |r| r.name());
        let vals: Vec<String> = spec.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(report, "{name:<10} {}", vals.join(" "));
    }
    if let Some(m) = &mask {
        let f = fraction_raster(&bands, m, &set).context("cloud/shadow fractions")?;
        let p = dir.join(outputs::F_MAP);
        io::write_bands(&p, &f)?;
        written.push(p);
        let flagged: Vec<f32> = f
            .data()
            .iter()
            .zip(m.flags())
            .filter(|(v, fl)| fl.is_cloud_or_shadow() && !v.is_nan())
            .map(|(v, _)| *v)
            .collect();
        if !flagged.is_empty() {
            let mean = flagged.iter().map(|&v| v as f64).sum::<f64>() / flagged.len() as f64;
            let _ = writeln!(report, "mean f over {} cloud/shadow pixels: {mean:.4}", flagged.len());
        }
    }
    let files: Vec<PathBuf> = written.iter().flat_map(|p| with_header(p)).collect();
    let manifest = write_manifest(&dir, "unmix", s, &["bands", "mask", "endmembers"], &files)?;
    let mut outputs = files;
    outputs.push(manifest);
    Ok(Outcome { report, outputs })
}

pub fn cmd_features(s: &Settings) -> Result<Outcome> {
    let bands = io::read_bands(&s.path("bands")?)?;
    let out = s.path("out")?;
    let red = s.parse_or("red_band", synth::RED_BAND)?;
    let nir = s.parse_or("nir_band", synth::NIR_BAND)?;
    let texture = s.parse_or("texture_band", nir)?;
    let d = GlcmParams::default();
    let params = GlcmParams {
        grey_levels: s.parse_or("grey_levels", d.grey_levels)?,
        window_size: s.parse_or("window_size", d.window_size)?,
        offset: (s.parse_or("offset_x", d.offset.0)?, s.parse_or("offset_y", d.offset.1)?),
    };
    params.validate().map_err(|e| config_err(e.to_string()))?;
    let v = ndvi(&bands.band(red)?, &bands.band(nir)?)?;
    let tex = glcm_textures(&bands.band(texture)?, &params)?;
    let stacked = bands.stack(&v)?.stack(&tex)?;
    io::write_bands(&out, &stacked)?;
    let report = format!(
        "{} bands + ndvi + glcm(mean, contrast, entropy) -> {} bands in {}\n",
        bands.num_bands(),
        stacked.num_bands(),
        out.display()
    );
    Ok(Outcome {
        report,
        outputs: with_header(&out),
    })
}

pub mod smooth_outputs {
    pub const SMOOTHED: &str = "smoothed.ts";
    pub const M_FRACTION: &str = "m_fraction.bnd";
    pub const FEATURES: &str = "series_features.bnd";
}

pub fn cmd_smooth(s: &Settings) -> Result<Outcome> {
    let series = io::read_time_series(&s.path("series")?)?;
    let dir = out_dir(s)?;
    let sg = SavitzkyGolay::new(s.parse_or("sg_window", 5)?, s.parse_or("sg_order", 2)?)
        .map_err(|e| config_err(e.to_string()))?;
    let smoothed = series.smoothed(&sg).context("smoothing")?;
    let m = series.missing_fraction_raster();
    let p = |n: &str| dir.join(n);
    io::write_time_series(&p(smooth_outputs::SMOOTHED), &smoothed)?;
    io::write_bands(&p(smooth_outputs::M_FRACTION), &m)?;
    io::write_bands(&p(smooth_outputs::FEATURES), &smoothed.to_band_raster())?;
    let written = [smooth_outputs::SMOOTHED, smooth_outputs::M_FRACTION, smooth_outputs::FEATURES];
    let files: Vec<PathBuf> = written.iter().flat_map(|n| with_header(&p(n))).collect();
    let manifest = write_manifest(&dir, "smooth", s, &["series"], &files)?;
    let mean_m = m.data().iter().map(|&v| v as f64).sum::<f64>() / m.data().len() as f64;
    let report = format!(
        "smoothed {} series x {} epochs (window {}, order {}); mean missing fraction {mean_m:.3}\n",
        series.geometry().len(),
        series.num_epochs(),
        sg.window(),
        sg.order()
    );
    let mut outputs = files;
    outputs.push(manifest);
    Ok(Outcome { report, outputs })
}

pub fn cmd_classify(s: &Settings) -> Result<Outcome> {
    let features = io::read_bands(&s.path("features")?)?;
    let out = s.path("out")?;
    let exec = executor(s)?;
    let mut outputs = Vec::new();
    let model = match s.opt_path("model") {
        Some(p) => io::read_model(&p)?,
        None => {
            let samples = io::read_samples(&s.path("samples")?)?;
            let mask = s.opt_path("mask").map(|p| io::read_mask(&p)).transpose()?;
            if mask.as_ref().is_some_and(|m| m.geometry() != features.geometry()) {
                bail!("mask and features grids differ");
            }
            let geom = features.geometry();
            let mut x = Vec::new();
            let mut y = Vec::new();
            for smp in samples.iter_split(Split::Train) {
                let (col, row) = geom.pixel_at(smp.x, smp.y).ok_or(
                    lcfuse_core::Error::SampleOffGrid { x: smp.x, y: smp.y },
                )?;
                let p = geom.index(col, row);
                if features.pixel_is_nodata(p)
                    || mask.as_ref().is_some_and(|m| m.get(p) != MaskFlag::Clear)
                {
                    continue;
                }
                x.push(features.pixel(p).iter().map(|&v| v as f64).collect());
                y.push(smp.class_label);
            }
            let classes = match s.parse_opt::<usize>("num_classes")? {
                Some(c) => c,
                None => samples.samples().iter().map(|s| s.class_label + 1).max().unwrap_or(0),
            };
            let model = ClassifierModel::train(&x, &y, classes, s.parse_or("temperature", 1.0)?)
                .context("training")?;
            if let Some(p) = s.opt_path("model_out") {
                io::write_model(&p, &model)?;
                outputs.push(p);
            }
            model
        }
    };
    let probs = model.predict_raster_with(&features, &exec)?;
    io::write_probability(&out, &probs)?;
    outputs.extend(with_header(&out));
    let report = format!(
        "{} classes over {} features -> {}\n",
        model.num_classes(),
        model.num_features(),
        out.display()
    );
    Ok(Outcome { report, outputs })
}

/// Paths produced by [`synthetic_workflow`].
#[derive(Debug, Clone)]
pub struct WorkflowRun {
    pub scene_dir: PathBuf,
    pub fused_dir: PathBuf,
    pub priors_a: PathBuf,
    pub priors_b: PathBuf,
    pub priors_m: PathBuf,
    /// Every file written by every step.
    pub outputs: Vec<PathBuf>,
}

/// Synthetic scene to fused map: synth, classify `A` and `B` (training
/// only on clear pixels of `B`), smooth the coarse series and classify it,
/// then two-stage fusion.
pub fn synthetic_workflow(root: &Path, seed: u64, spec: &SceneSpec, threads: usize) -> Result<WorkflowRun> {
    let scene_dir = root.join("scene");
    let work = root.join("work");
    let fused_dir = root.join("fused");
    fs::create_dir_all(&work)?;
    let p = |d: &Path, n: &str| d.join(n).display().to_string();
    let t = threads.to_string();
    let mut outputs = Vec::new();

    let mut st = Settings::default();
    st.set("seed", seed.to_string());
    st.set("out_dir", scene_dir.display().to_string());
    for (k, v) in [
        ("width", spec.width.to_string()),
        ("height", spec.height.to_string()),
        ("pixel_size", spec.pixel_size.to_string()),
        ("coarse_factor", spec.coarse_factor.to_string()),
        ("num_classes", spec.num_classes.to_string()),
        ("regions", spec.regions.to_string()),
        ("change_fraction", spec.change_fraction.to_string()),
        ("cloud_fraction", spec.cloud_fraction.to_string()),
        ("shadow_ratio", spec.shadow_ratio.to_string()),
        ("noise_a", spec.noise_a.to_string()),
        ("noise_b", spec.noise_b.to_string()),
        ("epochs", spec.epochs.to_string()),
        ("missing_rate", spec.missing_rate.to_string()),
        ("series_noise", spec.series_noise.to_string()),
        ("train_per_class", spec.train_per_class.to_string()),
        ("validation", spec.validation.to_string()),
    ] {
        st.set(k, v);
    }
    outputs.extend(cmd_synth(&st)?.outputs);

    let samples = p(&scene_dir, synth::files::SAMPLES);
    let classes = spec.num_classes.to_string();
    let classify = |features: String, mask: Option<String>, out: &Path| -> Result<Outcome> {
        let mut c = Settings::default();
        c.set("features", features);
        c.set("samples", samples.clone());
        c.set("num_classes", classes.clone());
        c.set("out", out.display().to_string());
        c.set("threads", t.clone());
        if let Some(m) = mask {
            c.set("mask", m);
        }
        cmd_classify(&c)
    };
    let priors_a = work.join("priors_a.prob");
    let priors_b = work.join("priors_b.prob");
    let priors_m = work.join("priors_m.prob");
    outputs.extend(classify(p(&scene_dir, synth::files::BANDS_A), None, &priors_a)?.outputs);
    outputs.extend(
        classify(
            p(&scene_dir, synth::files::BANDS_B),
            Some(p(&scene_dir, synth::files::MASK_B)),
            &priors_b,
        )?
        .outputs,
    );

    let mut sm = Settings::default();
    sm.set("series", p(&scene_dir, synth::files::COARSE_SERIES));
    sm.set("out_dir", work.display().to_string());
    outputs.extend(cmd_smooth(&sm)?.outputs);
    outputs.extend(classify(p(&work, smooth_outputs::FEATURES), None, &priors_m)?.outputs);

    let mut f = Settings::default();
    f.set("mode", "two_stage");
    f.set("priors_a", priors_a.display().to_string());
    f.set("priors_b", priors_b.display().to_string());
    f.set("priors_m", priors_m.display().to_string());
    f.set("mask_b", p(&scene_dir, synth::files::MASK_B));
    f.set("bands_b", p(&scene_dir, synth::files::BANDS_B));
    f.set("m_fraction", p(&work, smooth_outputs::M_FRACTION));
    f.set("out_dir", fused_dir.display().to_string());
    f.set("threads", t.clone());
    outputs.extend(cmd_fuse(&f)?.outputs);

    Ok(WorkflowRun {
        scene_dir,
        fused_dir,
        priors_a,
        priors_b,
        priors_m,
        outputs,
    })
}
