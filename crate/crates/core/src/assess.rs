//! Confusion matrices and overall, user's and producer's accuracy.
//!
//! Rows are the classification, columns the ground reference.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::raster::{LabelRaster, MaskRaster, SampleSet, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::DimensionMismatch {
                expected: num_classes * num_classes,
                actual: counts.len(),
            });
        }
        Ok(Self {
            num_classes,
            counts,
        })
    }

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let c = rows.len();
        let mut counts = Vec::with_capacity(c * c);
        for r in rows {
            if r.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    actual: r.len(),
                });
            }
            counts.extend_from_slice(r);
        }
        Self::from_counts(c, counts)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, predicted: usize, reference: usize) -> u64 {
        self.counts[predicted * self.num_classes + reference]
    }

    pub fn add(&mut self, predicted: usize, reference: usize) {
        self.counts[predicted * self.num_classes + reference] += 1;
    }

    /// Element-wise sum; the merge for partitioned scoring.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                actual: other.num_classes,
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, predicted: usize) -> u64 {
        (0..self.num_classes).map(|j| self.get(predicted, j)).sum()
    }

    pub fn col_total(&self, reference: usize) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, reference)).sum()
    }
}

/// A scored map: the matrix plus validation points that fell on NODATA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub matrix: ConfusionMatrix,
    pub nodata: u64,
}

/// Tallies validation samples against a label map. With a mask, only
/// samples on CLOUD or SHADOW pixels are scored.
pub fn score(map: &LabelRaster, samples: &SampleSet, mask: Option<&MaskRaster>) -> Result<Score> {
    if let Some(m) = mask {
        if m.geometry() != map.geometry() {
            return Err(Error::GeometryMismatch);
        }
    }
    let c = map.num_classes();
    samples.validate_labels(c)?;
    let geom = map.geometry();
    let mut matrix = ConfusionMatrix::zeros(c);
    let mut nodata = 0;
    for s in samples.iter_split(Split::Validation) {
        let (col, row) = geom
            .pixel_at(s.x, s.y)
            .ok_or(Error::SampleOffGrid { x: s.x, y: s.y })?;
        let p = geom.index(col, row);
        if mask.is_some_and(|m| !m.get(p).is_cloud_or_shadow()) {
            continue;
        }
        match map.get(p) {
            Some(pred) => matrix.add(pred, s.class_label),
            None => nodata += 1,
        }
    }
    Ok(Score { matrix, nodata })
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::EmptyMatrix),
        t => Ok(cm.trace() as f64 / t as f64),
    }
}

/// User's and producer's accuracy of one class; `None` marks an undefined
/// ratio (zero row or column total).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassAccuracy {
    pub user: Option<f64>,
    pub producer: Option<f64>,
}

pub fn class_accuracies(cm: &ConfusionMatrix) -> Vec<ClassAccuracy> {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    (0..cm.num_classes)
        .map(|k| ClassAccuracy {
            user: ratio(cm.get(k, k), cm.row_total(k)),
            producer: ratio(cm.get(k, k), cm.col_total(k)),
        })
        .collect()
}

/// Integer percentage as printed in accuracy tables.
pub fn percent_int(v: Option<f64>) -> Option<u32> {
    v.map(|x| libm::round(x * 100.0) as u32)
}

/// One-decimal percentage.
pub fn percent_one_decimal(v: f64) -> f64 {
    libm::round(v * 1000.0) / 10.0
}

fn fmt_percent(v: Option<f64>) -> String {
    match percent_int(v) {
        Some(p) => alloc::format!("{p}"),
        None => String::from("-"),
    }
}

fn class_name(names: &[&str], k: usize) -> String {
    names
        .get(k)
        .map_or_else(|| alloc::format!("c{k}"), |s| String::from(*s))
}

/// Aligned plain-text table: counts, row totals and UA per row, then column
/// totals, PA and OA.
pub fn render_table(cm: &ConfusionMatrix, names: &[&str]) -> String {
    let c = cm.num_classes;
    let acc = class_accuracies(cm);
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::from("class")];
    header.extend((0..c).map(|k| class_name(names, k)));
    header.push(String::from("total"));
    header.push(String::from("UA"));
    cells.push(header);
    for i in 0..c {
        let mut row = vec![class_name(names, i)];
        row.extend((0..c).map(|j| alloc::format!("{}", cm.get(i, j))));
        row.push(alloc::format!("{}", cm.row_total(i)));
        row.push(fmt_percent(acc[i].user));
        cells.push(row);
    }
    let mut totals = vec![String::from("total")];
    totals.extend((0..c).map(|j| alloc::format!("{}", cm.col_total(j))));
    totals.push(alloc::format!("{}", cm.total()));
    totals.push(String::new());
    cells.push(totals);
    let mut pa = vec![String::from("PA")];
    pa.extend(acc.iter().map(|a| fmt_percent(a.producer)));
    pa.push(String::new());
    pa.push(String::new());
    cells.push(pa);

    let widths: Vec<usize> = (0..c + 3)
        .map(|col| cells.iter().map(|r| r[col].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let mut line = String::new();
        for (col, cell) in row.iter().enumerate() {
            if col == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[col]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    match overall_accuracy(cm) {
        Ok(oa) => {
            let _ = writeln!(out, "overall accuracy: {:.1}%", percent_one_decimal(oa));
        }
        Err(_) => out.push_str("overall accuracy: undefined\n"),
    }
    out
}

/// CSV export: one row per predicted class with counts, total, UA and PA
/// as raw fractions (empty when undefined), then an `overall` row.
pub fn render_csv(cm: &ConfusionMatrix, names: &[&str]) -> String {
    let c = cm.num_classes;
    let acc = class_accuracies(cm);
    let mut out = String::from("class");
    for j in 0..c {
        let _ = write!(out, ",{}", class_name(names, j));
    }
    out.push_str(",total,user_accuracy,producer_accuracy\n");
    let frac = |v: Option<f64>| v.map_or_else(String::new, |x| alloc::format!("{x:.6}"));
    for i in 0..c {
        out.push_str(&class_name(names, i));
        for j in 0..c {
            let _ = write!(out, ",{}", cm.get(i, j));
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            cm.row_total(i),
            frac(acc[i].user),
            frac(acc[i].producer)
        );
    }
    out.push_str("overall");
    for j in 0..c {
        let _ = write!(out, ",{}", cm.col_total(j));
    }
    let _ = writeln!(
        out,
        ",{},{},",
        cm.total(),
        frac(overall_accuracy(cm).ok())
    );
    out
}
