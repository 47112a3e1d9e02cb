//! Geometric descriptors of a segmented lesion, serialized for the strategy prompt.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SegError;
use crate::components::{self, Connectivity};
use crate::volume::{Grid, Mask, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionDescriptor {
    /// `L1`, `L2`, … in descending size order.
    pub id: String,
    pub volume_mm3: f64,
    pub centroid_mm: [f64; 3],
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
    /// Distance to the nearest non-empty OAR; `None` when there is none.
    pub oar_min_distance_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegObservation {
    pub mask_ref: Option<String>,
    pub lesion_volume_mm3: f64,
    pub centroid_mm: [f64; 3],
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
    /// One entry per declared OAR; `None` when that OAR mask is empty.
    pub oar_min_distance_mm: Vec<Option<f64>>,
    pub multiplicity: usize,
    pub lesions: Vec<LesionDescriptor>,
}

impl SegObservation {
    /// Smallest distance to any OAR, if one is present.
    pub fn nearest_oar_mm(&self) -> Option<f64> {
        self.oar_min_distance_mm
            .iter()
            .flatten()
            .copied()
            .min_by(f64::total_cmp)
    }

    pub fn lesion_ids(&self) -> Vec<String> {
        self.lesions.iter().map(|l| l.id.clone()).collect()
    }
}

fn fmt_distance(d: Option<f64>) -> String {
    d.map_or_else(|| "none".to_string(), |d| format!("{d:.2}"))
}

fn fmt_point(p: [f64; 3]) -> String {
    format!("({:.2}, {:.2}, {:.2})", p[0], p[1], p[2])
}

impl fmt::Display for SegObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let oars: Vec<String> = self.oar_min_distance_mm.iter().map(|d| fmt_distance(*d)).collect();
        write!(
            f,
            "SEG: volume_mm3={:.2}; centroid={}; multiplicity={}; oar_min_distance_mm=[{}]",
            self.lesion_volume_mm3,
            fmt_point(self.centroid_mm),
            self.multiplicity,
            oars.join(", ")
        )?;
        for l in &self.lesions {
            write!(
                f,
                "\nLESION {}: volume_mm3={:.2}; centroid={}; oar_min_distance_mm={}",
                l.id,
                l.volume_mm3,
                fmt_point(l.centroid_mm),
                fmt_distance(l.oar_min_distance_mm)
            )?;
        }
        Ok(())
    }
}

fn bbox(grid: &Grid, voxels: &[usize]) -> ([usize; 3], [usize; 3]) {
    let mut min = [usize::MAX; 3];
    let mut max = [0; 3];
    for &i in voxels {
        let p = grid.coords(i);
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    (min, max)
}

fn centroid(grid: &Grid, voxels: &[usize]) -> [f64; 3] {
    let mut sum = [0.0; 3];
    for &i in voxels {
        let p = grid.position_mm(grid.coords(i));
        for a in 0..3 {
            sum[a] += p[a];
        }
    }
    sum.map(|s| s / voxels.len() as f64)
}

/// Voxels of `set` with at least one face neighbour outside it.
fn surface(grid: &Grid, member: &dyn Fn(usize) -> bool, set: &[usize]) -> Vec<usize> {
    let offsets = Connectivity::Six.offsets();
    set.iter()
        .copied()
        .filter(|&i| {
            let c = grid.coords(i);
            offsets
                .iter()
                .any(|&o| grid.offset(c, o).is_none_or(|j| !member(j)))
        })
        .collect()
}

/// Minimum center-to-center distance (mm) between two voxel sets.
///
/// The closest pair of disjoint sets always lies on their surfaces, so only
/// surface voxels are compared.
pub fn min_distance_mm(grid: &Grid, a: &[usize], a_member: &dyn Fn(usize) -> bool, b: &[usize], b_member: &dyn Fn(usize) -> bool) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    if a.iter().any(|&i| b_member(i)) {
        return Some(0.0);
    }
    let sa = surface(grid, a_member, a);
    let sb = surface(grid, b_member, b);
    let pb: Vec<[f64; 3]> = sb.iter().map(|&j| grid.position_mm(grid.coords(j))).collect();
    let mut best = f64::INFINITY;
    for &i in &sa {
        let p = grid.position_mm(grid.coords(i));
        for q in &pb {
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            if d2 < best {
                best = d2;
            }
        }
    }
    Some(best.sqrt())
}

pub fn geometric_descriptors(mask: &Mask, volume: &Volume, oars: &[Mask]) -> Result<SegObservation, SegError> {
    mask.check_matches(volume)?;
    for oar in oars {
        oar.check_same_dims(mask)?;
    }
    let grid = mask.grid();
    let fg: Vec<usize> = mask.foreground().collect();
    let voxel_volume = grid.voxel_volume();
    let in_mask = |i: usize| mask.is_set(i);

    let oar_sets: Vec<Vec<usize>> = oars.iter().map(|o| o.foreground().collect()).collect();
    let oar_min_distance_mm = oars
        .iter()
        .zip(&oar_sets)
        .map(|(o, set)| min_distance_mm(grid, &fg, &in_mask, set, &|j| o.is_set(j)))
        .collect();

    let mut comps = components::label(grid, Connectivity::Six, in_mask, |_, _| true);
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let lesions = comps
        .iter()
        .enumerate()
        .map(|(n, comp)| {
            let member = |i: usize| comp.binary_search(&i).is_ok();
            let nearest = oars
                .iter()
                .zip(&oar_sets)
                .filter_map(|(o, set)| min_distance_mm(grid, comp, &member, set, &|j| o.is_set(j)))
                .min_by(f64::total_cmp);
            let (bbox_min, bbox_max) = bbox(grid, comp);
            LesionDescriptor {
                id: format!("L{}", n + 1),
                volume_mm3: comp.len() as f64 * voxel_volume,
                centroid_mm: centroid(grid, comp),
                bbox_min,
                bbox_max,
                oar_min_distance_mm: nearest,
            }
        })
        .collect();

    let (bbox_min, bbox_max) = if fg.is_empty() { ([0; 3], [0; 3]) } else { bbox(grid, &fg) };
    Ok(SegObservation {
        mask_ref: None,
        lesion_volume_mm3: fg.len() as f64 * voxel_volume,
        centroid_mm: if fg.is_empty() { [0.0; 3] } else { centroid(grid, &fg) },
        bbox_min,
        bbox_max,
        oar_min_distance_mm,
        multiplicity: comps.len(),
        lesions,
    })
}
