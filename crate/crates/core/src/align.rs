//! Fine-to-coarse pixel grouping, group agreement and the coarse-source
//! reliability weight.

use alloc::vec;
use alloc::vec::Vec;

use crate::raster::{BandRaster, GridGeometry, ProbabilityRaster, LABEL_NODATA};
use crate::{Error, Result};

const UNASSIGNED: u32 = u32::MAX;

/// Many-to-one mapping from fine pixels to the coarse cell containing their
/// center, with per-cell member lists.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMap {
    fine: GridGeometry,
    coarse: GridGeometry,
    assignment: Vec<u32>,
    offsets: Vec<usize>,
    members: Vec<u32>,
}

impl GroupMap {
    /// Builds the grouping from an explicit per-fine-pixel assignment.
    pub fn from_assignment(
        fine: GridGeometry,
        coarse: GridGeometry,
        assignment: &[Option<usize>],
    ) -> Result<Self> {
        if assignment.len() != fine.len() {
            return Err(Error::DimensionMismatch {
                expected: fine.len(),
                actual: assignment.len(),
            });
        }
        let cells = coarse.len();
        if cells >= UNASSIGNED as usize || fine.len() >= UNASSIGNED as usize {
            return Err(Error::InvalidParameter("grid too large for group map"));
        }
        let mut packed = Vec::with_capacity(assignment.len());
        let mut sizes = vec![0usize; cells];
        for a in assignment {
            match *a {
                Some(cell) if cell < cells => {
                    sizes[cell] += 1;
                    packed.push(cell as u32);
                }
                Some(_) => return Err(Error::InvalidParameter("coarse cell index out of range")),
                None => packed.push(UNASSIGNED),
            }
        }
        let mut offsets = Vec::with_capacity(cells + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let mut cursor = offsets[..cells].to_vec();
        let mut members = vec![0u32; offsets[cells]];
        for (p, &cell) in packed.iter().enumerate() {
            if cell != UNASSIGNED {
                let slot = &mut cursor[cell as usize];
                members[*slot] = p as u32;
                *slot += 1;
            }
        }
        Ok(Self {
            fine,
            coarse,
            assignment: packed,
            offsets,
            members,
        })
    }

    pub fn fine_geometry(&self) -> &GridGeometry {
        &self.fine
    }

    pub fn coarse_geometry(&self) -> &GridGeometry {
        &self.coarse
    }

    /// Coarse cell of a fine pixel, `None` outside the coarse extent.
    #[inline]
    pub fn assignment(&self, fine_pixel: usize) -> Option<usize> {
        match self.assignment[fine_pixel] {
            UNASSIGNED => None,
            c => Some(c as usize),
        }
    }

    /// Fine pixels grouped under a coarse cell, in ascending order.
    pub fn members(&self, cell: usize) -> &[u32] {
        &self.members[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn num_cells(&self) -> usize {
        self.coarse.len()
    }
}

/// Assigns each fine pixel to the coarse cell containing its center.
pub fn build_group_map(fine: &GridGeometry, coarse: &GridGeometry) -> Result<GroupMap> {
    let mut assignment = Vec::with_capacity(fine.len());
    let mut any = false;
    for row in 0..fine.height {
        for col in 0..fine.width {
            let (x, y) = fine.pixel_center(col, row);
            let cell = coarse.pixel_at(x, y).map(|(c, r)| coarse.index(c, r));
            any |= cell.is_some();
            assignment.push(cell);
        }
    }
    if !any {
        return Err(Error::EmptyOverlap);
    }
    GroupMap::from_assignment(*fine, *coarse, &assignment)
}

/// Group agreement from per-pixel MAP labels.
///
/// `g[n]` is the fraction of the pixels in `n`'s group (including `n`)
/// whose label equals `n`'s label. Ungrouped pixels and pixels without a
/// label get 0.
pub fn group_agreement_from_labels(
    labels: &[u8],
    num_classes: usize,
    groups: &GroupMap,
) -> Result<Vec<f64>> {
    if labels.len() != groups.fine.len() {
        return Err(Error::GeometryMismatch);
    }
    let mut counts = vec![0u32; groups.num_cells() * num_classes];
    for (&label, &cell) in labels.iter().zip(&groups.assignment) {
        if cell != UNASSIGNED && label != LABEL_NODATA {
            counts[cell as usize * num_classes + label as usize] += 1;
        }
    }
    Ok(labels
        .iter()
        .zip(&groups.assignment)
        .map(|(&label, &cell)| {
            if cell == UNASSIGNED || label == LABEL_NODATA {
                return 0.0;
            }
            let cell = cell as usize;
            let size = groups.offsets[cell + 1] - groups.offsets[cell];
            counts[cell * num_classes + label as usize] as f64 / size as f64
        })
        .collect())
}

/// Group agreement of the MAP classes of a fused fine-grid distribution.
pub fn group_agreement(fused_fine: &ProbabilityRaster, groups: &GroupMap) -> Result<BandRaster> {
    if fused_fine.geometry() != groups.fine_geometry() {
        return Err(Error::GeometryMismatch);
    }
    let labels = fused_fine.argmax_labels();
    let g = group_agreement_from_labels(labels.labels(), fused_fine.num_classes(), groups)?;
    BandRaster::new(
        *groups.fine_geometry(),
        1,
        g.into_iter().map(|v| v as f32).collect(),
        f32::NAN,
    )
}

/// Trust in the coarse source: `g / (g + 1 - m)` for group agreement `g`
/// and coarse-series missing fraction `m`, both fractions in `[0, 1]`.
/// The `0/0` case (`g = 0`, `m = 1`) yields 0.
pub fn reliability_weight(g: f64, m: f64) -> f64 {
    let g = g.clamp(0.0, 1.0);
    let m = m.clamp(0.0, 1.0);
    let denom = g + 1.0 - m;
    if denom <= 0.0 {
        return 0.0;
    }
    (g / denom).clamp(0.0, 1.0)
}
