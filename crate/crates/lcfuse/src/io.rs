//! Raster container and table formats.
//!
//! A raster is two files: a flat little-endian `f32` payload (row-major
//! pixels, channels interleaved per pixel) at `path`, and a plain-text
//! header of `key: value` lines at `path.hdr`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use lcfuse_core::align::GroupMap;
use lcfuse_core::classify::ClassifierModel;
use lcfuse_core::features::TimeSeriesStack;
use lcfuse_core::raster::{
    BandRaster, GridGeometry, LabelRaster, MaskFlag, MaskRaster, ProbabilityRaster, Sample,
    SampleSet, Split, LABEL_NODATA,
};
use lcfuse_core::unmix::{EndmemberRole, EndmemberSet};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: payload is {actual} bytes, header implies {expected}")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: bad probability value {value}")]
    BadProbability { path: PathBuf, value: f64 },
    #[error("{path}: expected a {expected} raster, found {found}")]
    WrongKind {
        path: PathBuf,
        expected: RasterKind,
        found: RasterKind,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        source: lcfuse_core::Error,
    },
    #[error("{path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

pub type IoResult<T> = Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    Probability,
    Label,
    Band,
    Mask,
    GroupMap,
    TimeSeries,
}

impl RasterKind {
    const ALL: [RasterKind; 6] = [
        Self::Probability,
        Self::Label,
        Self::Band,
        Self::Mask,
        Self::GroupMap,
        Self::TimeSeries,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Probability => "probability",
            Self::Label => "label",
            Self::Band => "band",
            Self::Mask => "mask",
            Self::GroupMap => "groupmap",
            Self::TimeSeries => "timeseries",
        }
    }
}

impl fmt::Display for RasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Path of the header sidecar for a payload path.
pub fn header_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".hdr");
    PathBuf::from(s)
}

/// Parsed header: kind, geometry, channel count, nodata and any extra keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub kind: RasterKind,
    pub geometry: GridGeometry,
    pub channels: usize,
    pub nodata: f32,
    pub extra: BTreeMap<String, String>,
}

const CORE_KEYS: [&str; 11] = [
    "kind",
    "width",
    "height",
    "channels",
    "origin_x",
    "origin_y",
    "pixel_size_x",
    "pixel_size_y",
    "nodata",
    "byte_order",
    "data_type",
];

impl Header {
    fn new(kind: RasterKind, geometry: GridGeometry, channels: usize, nodata: f32) -> Self {
        Self {
            kind,
            geometry,
            channels,
            nodata,
            extra: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn render(&self) -> String {
        let g = &self.geometry;
        let mut out = String::new();
        let _ = writeln!(out, "kind: {}", self.kind);
        let _ = writeln!(out, "width: {}", g.width);
        let _ = writeln!(out, "height: {}", g.height);
        let _ = writeln!(out, "channels: {}", self.channels);
        let _ = writeln!(out, "origin_x: {}", g.origin_x);
        let _ = writeln!(out, "origin_y: {}", g.origin_y);
        let _ = writeln!(out, "pixel_size_x: {}", g.pixel_size_x);
        let _ = writeln!(out, "pixel_size_y: {}", g.pixel_size_y);
        let _ = writeln!(out, "nodata: {}", self.nodata);
        out.push_str("byte_order: little_endian\ndata_type: float32\n");
        for (k, v) in &self.extra {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> IoResult<Self> {
        let bad = |reason: String| IoError::MalformedHeader {
            path: path.to_path_buf(),
            reason,
        };
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| bad(format!("line {} is not `key: value`", n + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(bad(format!("duplicate key `{}`", k.trim())));
            }
        }
        let get = |k: &str| map.get(k).ok_or_else(|| bad(format!("missing key `{k}`")));
        fn num<T: std::str::FromStr>(
            v: &str,
            k: &str,
            bad: &dyn Fn(String) -> IoError,
        ) -> IoResult<T> {
            v.parse().map_err(|_| bad(format!("bad value `{v}` for `{k}`")))
        }
        let kind_name = get("kind")?;
        let kind = RasterKind::ALL
            .into_iter()
            .find(|k| k.name() == kind_name)
            .ok_or_else(|| bad(format!("unknown kind `{kind_name}`")))?;
        if let Some(v) = map.get("byte_order") {
            if v != "little_endian" {
                return Err(bad(format!("unsupported byte_order `{v}`")));
            }
        }
        if let Some(v) = map.get("data_type") {
            if v != "float32" {
                return Err(bad(format!("unsupported data_type `{v}`")));
            }
        }
        let geometry = GridGeometry::new(
            num(get("width")?, "width", &bad)?,
            num(get("height")?, "height", &bad)?,
            num(get("origin_x")?, "origin_x", &bad)?,
            num(get("origin_y")?, "origin_y", &bad)?,
            num(get("pixel_size_x")?, "pixel_size_x", &bad)?,
            num(get("pixel_size_y")?, "pixel_size_y", &bad)?,
        )
        .map_err(|e| bad(e.to_string()))?;
        let channels: usize = num(get("channels")?, "channels", &bad)?;
        if channels == 0 {
            return Err(bad("channels must be >= 1".into()));
        }
        let nodata = match map.get("nodata") {
            Some(v) => num(v, "nodata", &bad)?,
            None => f32::NAN,
        };
        let extra = map
            .into_iter()
            .filter(|(k, _)| !CORE_KEYS.contains(&k.as_str()))
            .collect();
        Ok(Self {
            kind,
            geometry,
            channels,
            nodata,
            extra,
        })
    }

    fn extra_usize(&self, key: &str, path: &Path) -> IoResult<usize> {
        self.extra_parse(key, path)
    }

    fn extra_parse<T: std::str::FromStr>(&self, key: &str, path: &Path) -> IoResult<T> {
        let v = self.extra.get(key).ok_or_else(|| IoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("missing key `{key}`"),
        })?;
        v.parse().map_err(|_| IoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("bad value `{v}` for `{key}`"),
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path) -> impl FnOnce(lcfuse_core::Error) -> IoError + '_ {
    move |source| match source {
        lcfuse_core::Error::BadProbability { value } => IoError::BadProbability {
            path: path.to_path_buf(),
            value,
        },
        source => IoError::Invalid {
            path: path.to_path_buf(),
            source,
        },
    }
}

fn write_container(path: &Path, header: &Header, payload: &[f32]) -> IoResult<()> {
    debug_assert_eq!(payload.len(), header.geometry.len() * header.channels);
    let mut bytes = Vec::with_capacity(payload.len() * 4);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))?;
    let hdr = header_path(path);
    fs::write(&hdr, header.render()).map_err(io_err(&hdr))
}

pub fn read_header(path: &Path) -> IoResult<Header> {
    let hdr = header_path(path);
    let text = fs::read_to_string(&hdr).map_err(io_err(&hdr))?;
    Header::parse(&text, &hdr)
}

fn read_container(path: &Path, expected: RasterKind) -> IoResult<(Header, Vec<f32>)> {
    let header = read_header(path)?;
    if header.kind != expected {
        return Err(IoError::WrongKind {
            path: path.to_path_buf(),
            expected,
            found: header.kind,
        });
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let expected_len = header.geometry.len() * header.channels * 4;
    if bytes.len() != expected_len {
        return Err(IoError::SizeMismatch {
            path: path.to_path_buf(),
            expected: expected_len,
            actual: bytes.len(),
        });
    }
    let payload = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((header, payload))
}

pub fn write_probability(path: &Path, r: &ProbabilityRaster) -> IoResult<()> {
    let h = Header::new(RasterKind::Probability, *r.geometry(), r.num_classes(), f32::NAN);
    write_container(path, &h, r.data())
}

pub fn read_probability(path: &Path) -> IoResult<ProbabilityRaster> {
    let (h, data) = read_container(path, RasterKind::Probability)?;
    ProbabilityRaster::new(h.geometry, h.channels, data).map_err(invalid(path))
}

pub fn write_labels(path: &Path, r: &LabelRaster) -> IoResult<()> {
    let h = Header::new(RasterKind::Label, *r.geometry(), 1, LABEL_NODATA as f32)
        .with("classes", r.num_classes());
    let data: Vec<f32> = r.labels().iter().map(|&l| l as f32).collect();
    write_container(path, &h, &data)
}

pub fn read_labels(path: &Path) -> IoResult<LabelRaster> {
    let (h, data) = read_container(path, RasterKind::Label)?;
    let classes = h.extra_usize("classes", path)?;
    let labels = data
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                Ok(v as u8)
            } else {
                Err(IoError::Table {
                    path: path.to_path_buf(),
                    reason: format!("label value {v} is not a class index"),
                })
            }
        })
        .collect::<IoResult<Vec<u8>>>()?;
    LabelRaster::new(h.geometry, classes, labels).map_err(invalid(path))
}

pub fn write_bands(path: &Path, r: &BandRaster) -> IoResult<()> {
    let h = Header::new(RasterKind::Band, *r.geometry(), r.num_bands(), r.nodata());
    write_container(path, &h, r.data())
}

pub fn read_bands(path: &Path) -> IoResult<BandRaster> {
    let (h, data) = read_container(path, RasterKind::Band)?;
    BandRaster::new(h.geometry, h.channels, data, h.nodata).map_err(invalid(path))
}

pub fn write_mask(path: &Path, r: &MaskRaster) -> IoResult<()> {
    let h = Header::new(RasterKind::Mask, *r.geometry(), 1, MaskFlag::NoData.code() as f32);
    let data: Vec<f32> = r.flags().iter().map(|f| f.code() as f32).collect();
    write_container(path, &h, &data)
}

pub fn read_mask(path: &Path) -> IoResult<MaskRaster> {
    let (h, data) = read_container(path, RasterKind::Mask)?;
    let flags = data
        .iter()
        .map(|&v| {
            (v.fract() == 0.0 && (0.0..=255.0).contains(&v))
                .then(|| MaskFlag::from_code(v as u8))
                .flatten()
                .ok_or_else(|| IoError::Table {
                    path: path.to_path_buf(),
                    reason: format!("mask value {v} is not a flag code"),
                })
        })
        .collect::<IoResult<Vec<_>>>()?;
    MaskRaster::new(h.geometry, flags).map_err(invalid(path))
}

/// Fine-grid raster of coarse-cell indices, -1 for ungrouped pixels; the
/// coarse geometry rides along as `coarse_*` header keys.
pub fn write_group_map(path: &Path, g: &GroupMap) -> IoResult<()> {
    let c = g.coarse_geometry();
    let h = Header::new(RasterKind::GroupMap, *g.fine_geometry(), 1, -1.0)
        .with("coarse_width", c.width)
        .with("coarse_height", c.height)
        .with("coarse_origin_x", c.origin_x)
        .with("coarse_origin_y", c.origin_y)
        .with("coarse_pixel_size_x", c.pixel_size_x)
        .with("coarse_pixel_size_y", c.pixel_size_y);
    let data: Vec<f32> = (0..g.fine_geometry().len())
        .map(|p| g.assignment(p).map_or(-1.0, |c| c as f32))
        .collect();
    write_container(path, &h, &data)
}

pub fn read_group_map(path: &Path) -> IoResult<GroupMap> {
    let (h, data) = read_container(path, RasterKind::GroupMap)?;
    let coarse = GridGeometry::new(
        h.extra_usize("coarse_width", path)?,
        h.extra_usize("coarse_height", path)?,
        h.extra_parse("coarse_origin_x", path)?,
        h.extra_parse("coarse_origin_y", path)?,
        h.extra_parse("coarse_pixel_size_x", path)?,
        h.extra_parse("coarse_pixel_size_y", path)?,
    )
    .map_err(invalid(path))?;
    let assignment: Vec<Option<usize>> = data
        .iter()
        .map(|&v| (v >= 0.0).then_some(v as usize))
        .collect();
    GroupMap::from_assignment(h.geometry, coarse, &assignment).map_err(invalid(path))
}

/// Per pixel: `epochs * series_channels` values, then `epochs` missing
/// flags (1 = missing).
pub fn write_time_series(path: &Path, s: &TimeSeriesStack) -> IoResult<()> {
    let (t, k) = (s.num_epochs(), s.num_channels());
    let h = Header::new(RasterKind::TimeSeries, *s.geometry(), t * k + t, f32::NAN)
        .with("epochs", t)
        .with("series_channels", k);
    let mut data = Vec::with_capacity(s.geometry().len() * (t * k + t));
    for (p, vals) in s.values().chunks_exact(t * k).enumerate() {
        data.extend_from_slice(vals);
        data.extend(s.pixel_missing(p).iter().map(|&m| if m { 1.0 } else { 0.0 }));
    }
    write_container(path, &h, &data)
}

pub fn read_time_series(path: &Path) -> IoResult<TimeSeriesStack> {
    let (h, data) = read_container(path, RasterKind::TimeSeries)?;
    let t = h.extra_usize("epochs", path)?;
    let k = h.extra_usize("series_channels", path)?;
    if t * k + t != h.channels {
        return Err(IoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("channels {} != epochs*(series_channels+1)", h.channels),
        });
    }
    let mut values = Vec::with_capacity(h.geometry.len() * t * k);
    let mut missing = Vec::with_capacity(h.geometry.len() * t);
    for px in data.chunks_exact(h.channels) {
        values.extend_from_slice(&px[..t * k]);
        missing.extend(px[t * k..].iter().map(|&m| m != 0.0));
    }
    TimeSeriesStack::new(h.geometry, t, k, values, missing).map_err(invalid(path))
}

fn table_err(path: &Path, reason: impl fmt::Display) -> IoError {
    IoError::Table {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Sample CSV with columns `x,y,label,split` (`split` is `train` or
/// `validation`).
pub fn read_samples(path: &Path) -> IoResult<SampleSet> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| table_err(path, e))?;
    let headers = rdr.headers().map_err(|e| table_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| table_err(path, format!("missing column `{name}`")))
    };
    let (cx, cy, cl, cs) = (col("x")?, col("y")?, col("label")?, col("split")?);
    let mut samples = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| table_err(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let row = n + 2;
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| table_err(path, format!("row {row}: bad number `{}`", field(i))))
        };
        let split = match field(cs).to_ascii_lowercase().as_str() {
            "train" => Split::Train,
            "validation" => Split::Validation,
            other => return Err(table_err(path, format!("row {row}: unknown split `{other}`"))),
        };
        samples.push(Sample {
            x: num(cx)?,
            y: num(cy)?,
            class_label: field(cl)
                .parse()
                .map_err(|_| table_err(path, format!("row {row}: bad label `{}`", field(cl))))?,
            split,
        });
    }
    SampleSet::new(samples).map_err(invalid(path))
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> IoResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| table_err(path, e))?;
    let mut write = || -> Result<(), csv::Error> {
        w.write_record(["x", "y", "label", "split"])?;
        for s in samples.samples() {
            let split = match s.split {
                Split::Train => "train",
                Split::Validation => "validation",
            };
            w.write_record([
                s.x.to_string(),
                s.y.to_string(),
                s.class_label.to_string(),
                split.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| table_err(path, e))
}

/// Endmember CSV with columns `role,b1..bB`; an empty role is unassigned.
pub fn read_endmembers(path: &Path) -> IoResult<EndmemberSet> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| table_err(path, e))?;
    let mut spectra = Vec::new();
    let mut roles = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| table_err(path, e))?;
        let role = rec.get(0).unwrap_or("").trim();
        roles.push(if role.is_empty() {
            None
        } else {
            Some(EndmemberRole::parse(role).ok_or_else(|| {
                table_err(path, format!("row {}: unknown role `{role}`", n + 2))
            })?)
        });
        let spectrum = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| table_err(path, format!("row {}: bad reflectance", n + 2)))?;
        spectra.push(spectrum);
    }
    EndmemberSet::new(spectra, roles).map_err(invalid(path))
}

pub fn write_endmembers(path: &Path, set: &EndmemberSet) -> IoResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| table_err(path, e))?;
    let mut write = || -> Result<(), csv::Error> {
        let mut header = vec!["role".to_string()];
        header.extend((1..=set.num_bands()).map(|b| format!("b{b}")));
        w.write_record(&header)?;
        for (s, r) in set.spectra().iter().zip(set.roles()) {
            let mut rec = vec![r.map_or(String::new(), |r| r.name().to_string())];
            rec.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| table_err(path, e))
}

/// Classifier model: `key: value` lines, then `[centroids]` and
/// `[variances]` blocks with one comma-separated row per class.
pub fn write_model(path: &Path, m: &ClassifierModel) -> IoResult<()> {
    let mut out = String::new();
    let _ = writeln!(out, "kind: classifier");
    let _ = writeln!(out, "classes: {}", m.num_classes());
    let _ = writeln!(out, "features: {}", m.num_features());
    let _ = writeln!(out, "temperature: {}", m.temperature());
    for (name, block) in [("centroids", m.centroids()), ("variances", m.variances())] {
        let _ = writeln!(out, "[{name}]");
        for row in block.chunks_exact(m.num_features()) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_model(path: &Path) -> IoResult<ClassifierModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |reason: String| IoError::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let mut keys = BTreeMap::new();
    let mut blocks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_string());
            blocks.entry(name.to_string()).or_default();
        } else if let Some(block) = &current {
            for v in line.split(',') {
                let v = v.trim();
                let x = v.parse().map_err(|_| bad(format!("bad number `{v}`")))?;
                blocks.get_mut(block).unwrap().push(x);
            }
        } else {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| bad(format!("bad line `{line}`")))?;
            keys.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let key = |k: &str| keys.get(k).ok_or_else(|| bad(format!("missing key `{k}`")));
    if key("kind")? != "classifier" {
        return Err(bad("kind must be `classifier`".into()));
    }
    let parse = |k: &str| -> IoResult<f64> {
        key(k)?.parse().map_err(|_| bad(format!("bad value for `{k}`")))
    };
    let block = |k: &str| blocks.get(k).cloned().ok_or_else(|| bad(format!("missing [{k}]")));
    ClassifierModel::new(
        parse("classes")? as usize,
        parse("features")? as usize,
        block("centroids")?,
        block("variances")?,
        parse("temperature")?,
    )
    .map_err(invalid(path))
}
