//! Segmentation backends and the deterministic region-growing reference.

use super::{Prompt, SegError};
use crate::components::{self, Connectivity};
use crate::stats::percentile;
use crate::volume::{Mask, ProbabilityMap, Volume};

/// A promptable segmentation engine. Implementations must be stateless or
/// internally synchronized; one backend serves concurrent cases.
pub trait SegmentationBackend: Send + Sync {
    fn name(&self) -> &str;
    fn segment(&self, volume: &Volume, prompt: &Prompt) -> Result<ProbabilityMap, SegError>;
}

/// Tight box around one bright component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
    pub voxels: usize,
}

impl DetectedBox {
    pub fn prompt(&self) -> Prompt {
        Prompt::BBox {
            min: self.min,
            max: self.max,
        }
    }
}

/// 1st and 99th intensity percentiles of the whole volume.
pub fn robust_range(volume: &Volume) -> (f64, f64) {
    let values: Vec<f64> = volume.voxels().iter().map(|&v| f64::from(v)).collect();
    (percentile(&values, 1.0), percentile(&values, 99.0))
}

/// Half the robust intensity range.
pub fn default_tolerance(volume: &Volume) -> f64 {
    let (lo, hi) = robust_range(volume);
    0.5 * (hi - lo)
}

/// Midpoint of the robust intensity range.
pub fn default_detection_threshold(volume: &Volume) -> f64 {
    let (lo, hi) = robust_range(volume);
    lo + 0.5 * (hi - lo)
}

/// One box per 6-connected component of `{voxel ≥ threshold}` with at least
/// `min_voxels` voxels, largest first (ties by first voxel index).
pub fn autonomy_detect(volume: &Volume, threshold: f64, min_voxels: usize) -> Vec<DetectedBox> {
    let grid = volume.grid();
    let vox = volume.voxels();
    let comps = components::label(
        grid,
        Connectivity::Six,
        |i| f64::from(vox[i]) >= threshold,
        |_, _| true,
    );
    let mut boxes: Vec<(usize, DetectedBox)> = comps
        .into_iter()
        .filter(|c| c.len() >= min_voxels.max(1))
        .map(|c| {
            let mut min = [usize::MAX; 3];
            let mut max = [0; 3];
            for &i in &c {
                let p = grid.coords(i);
                for a in 0..3 {
                    min[a] = min[a].min(p[a]);
                    max[a] = max[a].max(p[a]);
                }
            }
            (
                c[0],
                DetectedBox {
                    min,
                    max,
                    voxels: c.len(),
                },
            )
        })
        .collect();
    boxes.sort_by(|a, b| b.1.voxels.cmp(&a.1.voxels).then(a.0.cmp(&b.0)));
    boxes.into_iter().map(|(_, b)| b).collect()
}

/// Region growing from prompt seeds.
///
/// A voxel joins when it is 6-connected to the region and its intensity lies
/// within `tolerance` of the seed mean. Negative clicks grow their own regions,
/// which are removed from the positive one.
#[derive(Debug, Clone, Default)]
pub struct ReferenceSegmenter {
    /// Growth tolerance; half the robust intensity range when unset.
    pub tolerance: Option<f64>,
    /// Autonomy threshold; midpoint of the robust range when unset.
    pub detection_threshold: Option<f64>,
    pub min_voxels: usize,
}

impl ReferenceSegmenter {
    pub fn with_tolerance(tolerance: f64) -> Self {
        ReferenceSegmenter {
            tolerance: Some(tolerance),
            ..Default::default()
        }
    }

    fn grow_from(volume: &Volume, seeds: &[usize], tolerance: f64, clip: Option<&Prompt>) -> Vec<bool> {
        let vox = volume.voxels();
        let grid = volume.grid();
        let seed_mean = seeds.iter().map(|&s| f64::from(vox[s])).sum::<f64>() / seeds.len() as f64;
        let in_clip = |i: usize| match clip {
            Some(Prompt::BBox { min, max }) => {
                let p = grid.coords(i);
                (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a])
            }
            _ => true,
        };
        components::grow(grid, seeds, |j| {
            in_clip(j) && (f64::from(vox[j]) - seed_mean).abs() <= tolerance
        })
    }

    fn segment_mask(&self, volume: &Volume, prompt: &Prompt) -> Result<Mask, SegError> {
        prompt.validate(volume.dims())?;
        let grid = volume.grid();
        let tolerance = self.tolerance.unwrap_or_else(|| default_tolerance(volume));
        match prompt {
            Prompt::Click(points) => {
                let idx = |at: [usize; 3]| grid.index(at[0], at[1], at[2]);
                let pos: Vec<usize> = points.iter().filter(|p| p.positive).map(|p| idx(p.at)).collect();
                let neg: Vec<usize> = points.iter().filter(|p| !p.positive).map(|p| idx(p.at)).collect();
                let mut region = Self::grow_from(volume, &pos, tolerance, None);
                if !neg.is_empty() {
                    let removed = Self::grow_from(volume, &neg, tolerance, None);
                    for (r, n) in region.iter_mut().zip(removed) {
                        *r &= !n;
                    }
                }
                Ok(to_mask(volume, &region))
            }
            Prompt::BBox { min, max } => {
                let center = [0, 1, 2].map(|a| (min[a] + max[a]) / 2);
                let seed = grid.index(center[0], center[1], center[2]);
                let region = Self::grow_from(volume, &[seed], tolerance, Some(prompt));
                Ok(to_mask(volume, &region))
            }
            Prompt::Autonomy => {
                let threshold = self
                    .detection_threshold
                    .unwrap_or_else(|| default_detection_threshold(volume));
                let mut out = Mask::empty_like(grid);
                for b in autonomy_detect(volume, threshold, self.min_voxels) {
                    let m = self.segment_mask(volume, &b.prompt())?;
                    out = out.union(&m)?;
                }
                Ok(out)
            }
        }
    }
}

fn to_mask(volume: &Volume, region: &[bool]) -> Mask {
    Mask::from_fn(volume.grid(), |c| region[volume.grid().index(c[0], c[1], c[2])])
}

impl SegmentationBackend for ReferenceSegmenter {
    fn name(&self) -> &str {
        "reference-region-growing"
    }

    fn segment(&self, volume: &Volume, prompt: &Prompt) -> Result<ProbabilityMap, SegError> {
        Ok(ProbabilityMap::from_mask(&self.segment_mask(volume, prompt)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segtool::phantom::{make_phantom, Ellipsoid, PhantomSpec};
    use crate::segtool::dice;

    fn two_blobs(sigma: f64) -> PhantomSpec {
        PhantomSpec {
            dims: [40, 30, 30],
            spacing: [1.0; 3],
            ellipsoids: vec![
                Ellipsoid::sphere([10.0, 14.0, 14.0], 6.0, 100.0),
                Ellipsoid::sphere([29.0, 14.0, 14.0], 4.0, 100.0),
            ],
            oars: vec![],
            background: 0.0,
            noise_sigma: sigma,
            rng_seed: 1,
        }
    }

    #[test]
    fn detect_orders_by_size() {
        let p = make_phantom(&two_blobs(0.0)).unwrap();
        let boxes = autonomy_detect(&p.volume, 50.0, 1);
        assert_eq!(boxes.len(), 2);
        assert!(boxes[0].voxels > boxes[1].voxels);
        assert_eq!(boxes[0].min[0], 4);
        assert_eq!(boxes[0].max[0], 16);
        assert!(autonomy_detect(&p.volume, 50.0, 10_000).is_empty());
        assert!(autonomy_detect(&p.volume, 500.0, 1).is_empty());
    }

    #[test]
    fn click_on_plateau_is_exact() {
        let p = make_phantom(&two_blobs(0.0)).unwrap();
        let seg = ReferenceSegmenter::with_tolerance(50.0);
        let m = seg.segment(&p.volume, &Prompt::click([10, 14, 14])).unwrap().binarize(0.5);
        let blob = Mask::from_fn(p.volume.grid(), |c| c[0] < 20 && p.truth.is_set(p.volume.grid().index(c[0], c[1], c[2])));
        assert_eq!(dice(&m, &blob).unwrap(), 1.0);
    }

    #[test]
    fn negative_click_removes_region() {
        let p = make_phantom(&two_blobs(0.0)).unwrap();
        let seg = ReferenceSegmenter::with_tolerance(50.0);
        let prompt: Prompt = "click:10,14,14,+;12,14,14,-".parse().unwrap();
        let m = seg.segment(&p.volume, &prompt).unwrap().binarize(0.5);
        assert!(m.is_blank());
    }

    #[test]
    fn autonomy_unions_all_lesions() {
        let p = make_phantom(&two_blobs(0.0)).unwrap();
        let m = ReferenceSegmenter::default()
            .segment(&p.volume, &Prompt::Autonomy)
            .unwrap()
            .binarize(0.5);
        assert_eq!(dice(&m, &p.truth).unwrap(), 1.0);
    }

    #[test]
    fn bbox_growth_is_clipped() {
        let p = make_phantom(&two_blobs(0.0)).unwrap();
        let seg = ReferenceSegmenter::with_tolerance(50.0);
        let m = seg
            .segment(&p.volume, &Prompt::bbox([4, 8, 8], [10, 20, 20]))
            .unwrap()
            .binarize(0.5);
        assert!(m.count() > 0);
        assert!(m.foreground().all(|i| p.volume.grid().coords(i)[0] <= 10));
    }
}
