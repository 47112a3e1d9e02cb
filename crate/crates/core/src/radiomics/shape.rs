use std::f64::consts::PI;

use super::{Family, FeatureVector, RadiomicsError, Result};
use crate::components::Connectivity;
use crate::volume::Mask;

/// Volume, face-counted surface area, sphericity and surface-to-volume ratio.
pub fn shape(mask: &Mask) -> Result<FeatureVector> {
    let grid = mask.grid();
    let s = grid.spacing_f64();
    let face_area = |o: [i64; 3]| {
        if o[0] != 0 {
            s[1] * s[2]
        } else if o[1] != 0 {
            s[0] * s[2]
        } else {
            s[0] * s[1]
        }
    };
    let offsets = Connectivity::Six.offsets();
    let mut count = 0usize;
    let mut area = 0.0;
    for i in mask.foreground() {
        count += 1;
        let c = grid.coords(i);
        for &o in &offsets {
            if grid.offset(c, o).is_none_or(|j| !mask.is_set(j)) {
                area += face_area(o);
            }
        }
    }
    if count == 0 {
        return Err(RadiomicsError::EmptyMask);
    }
    let volume = count as f64 * grid.voxel_volume();
    let sphericity = PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / area;
    Ok(FeatureVector::from_family(
        Family::Shape,
        "shape",
        &[
            ("volume_mm3", volume),
            ("surface_area_mm2", area),
            ("sphericity", sphericity),
            ("sa_to_v", area / volume),
        ],
    ))
}
