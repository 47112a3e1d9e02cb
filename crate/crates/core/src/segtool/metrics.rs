//! Overlap metrics and the segmentation training loss.

use super::SegError;
use crate::volume::{Mask, ProbabilityMap};

/// Probability clamp used inside the cross-entropy term.
pub const LOSS_EPSILON: f64 = 1e-7;

fn overlap(a: &Mask, b: &Mask) -> Result<(usize, usize, usize), SegError> {
    a.check_same_dims(b)?;
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for (&x, &y) in a.voxels().iter().zip(b.voxels()) {
        let (x, y) = (x != 0, y != 0);
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    Ok((inter, na, nb))
}

/// 2|A∩B| / (|A| + |B|); 1 when both masks are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64, SegError> {
    let (inter, na, nb) = overlap(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// |A∩B| / |A∪B|; 1 when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, SegError> {
    let (inter, na, nb) = overlap(a, b)?;
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub dice: f64,
    pub ce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { dice: 1.0, ce: 1.0 }
    }
}

/// λ_dice·(1 − softDice) + λ_ce·mean binary cross-entropy.
pub fn composite_loss(pred: &ProbabilityMap, gt: &Mask, weights: LossWeights) -> Result<f64, SegError> {
    if pred.dims() != gt.dims() {
        return Err(SegError::DimMismatch {
            left: pred.dims(),
            right: gt.dims(),
        });
    }
    let mut inter = 0.0;
    let mut sum_p = 0.0;
    let mut sum_g = 0.0;
    let mut ce = 0.0;
    for (&p, &g) in pred.values().iter().zip(gt.voxels()) {
        let p = f64::from(p);
        let g = f64::from(g);
        inter += p * g;
        sum_p += p;
        sum_g += g;
        let pc = p.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
        ce -= g * pc.ln() + (1.0 - g) * (1.0 - pc).ln();
    }
    let soft_dice = if sum_p + sum_g == 0.0 {
        1.0
    } else {
        2.0 * inter / (sum_p + sum_g)
    };
    let ce = ce / gt.voxels().len() as f64;
    Ok(weights.dice * (1.0 - soft_dice) + weights.ce * ce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn mask(bits: &[u8]) -> Mask {
        Mask::new([bits.len(), 1, 1], [1.0; 3], bits.to_vec()).unwrap()
    }

    #[test]
    fn dice_hand_counts() {
        assert_eq!(dice(&mask(&[1, 1, 0]), &mask(&[1, 1, 0])).unwrap(), 1.0);
        assert!((dice(&mask(&[1, 1, 0]), &mask(&[1, 0, 0])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&mask(&[1, 0, 0]), &mask(&[0, 1, 0])).unwrap(), 0.0);
        assert_eq!(dice(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn iou_hand_counts() {
        assert_eq!(iou(&mask(&[1, 0]), &mask(&[1, 0])).unwrap(), 1.0);
        assert_eq!(iou(&mask(&[1, 1]), &mask(&[1, 0])).unwrap(), 0.5);
        assert_eq!(iou(&mask(&[0]), &mask(&[0])).unwrap(), 1.0);
    }

    #[test]
    fn dim_mismatch() {
        assert!(matches!(dice(&mask(&[1]), &mask(&[1, 0])), Err(SegError::DimMismatch { .. })));
    }

    #[test]
    fn loss_cases() {
        let gt = mask(&[1, 0, 1, 0]);
        let w = LossWeights::default();
        let perfect = ProbabilityMap::from_mask(&gt);
        let bound = w.ce * -(1.0 - LOSS_EPSILON).ln();
        let l = composite_loss(&perfect, &gt, w).unwrap();
        assert!(l <= bound + 1e-15 && l >= 0.0);

        let grid = Grid::new([4, 1, 1], [1.0; 3]).unwrap();
        let half = ProbabilityMap::new(grid, vec![0.5; 4]).unwrap();
        let l = composite_loss(&half, &gt, LossWeights { dice: 0.0, ce: 1.0 }).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);

        let disjoint = ProbabilityMap::from_mask(&mask(&[0, 1, 0, 1]));
        let l = composite_loss(&disjoint, &gt, LossWeights { dice: 1.0, ce: 0.0 }).unwrap();
        assert_eq!(l, 1.0);
    }
}
