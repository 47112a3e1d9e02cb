//! Radiomics signature of a lesion: first-order, shape, GLCM and GLSZM families.
//!
//! Gray levels are quantized into `n_bins` equal-width bins spanning the
//! masked intensity range; a constant region maps entirely to bin 0.

mod first_order;
mod glcm;
mod glszm;
mod shape;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Mask, Volume, VolumeError};

pub use first_order::first_order;
pub use glcm::{glcm, glcm_matrices};
pub use glszm::{glszm, glszm_zones, Zone};
pub use shape::shape;

#[derive(Debug, Error)]
pub enum RadiomicsError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("no voxel pair inside the mask for any offset")]
    NoValidPairs,
    #[error("invalid texture config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T> = std::result::Result<T, RadiomicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    FirstOrder,
    Shape,
    Glcm,
    Glszm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub family: Family,
    pub value: f64,
}

/// Named, ordered feature values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub features: Vec<Feature>,
}

impl FeatureVector {
    fn from_family(family: Family, prefix: &str, items: &[(&str, f64)]) -> Self {
        FeatureVector {
            features: items
                .iter()
                .map(|(name, value)| Feature {
                    name: format!("{prefix}_{name}"),
                    family,
                    value: *value,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.value).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|f| f.name == name).map(|f| f.value)
    }

    pub fn extend(&mut self, other: FeatureVector) {
        self.features.extend(other.features);
    }

    pub fn csv_header(&self) -> String {
        self.names().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.features
            .iter()
            .map(|f| f.value.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for feat in &self.features {
            writeln!(f, "{}={}", feat.name, feat.value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureConfig {
    pub n_bins: usize,
    pub offsets: Vec<[i64; 3]>,
    pub symmetric: bool,
}

/// The 13 unique unit displacements of the 26-neighbourhood.
pub fn unique_offsets_3d() -> Vec<[i64; 3]> {
    crate::components::Connectivity::TwentySix
        .offsets()
        .into_iter()
        .filter(|o| {
            let first = o.iter().find(|&&c| c != 0).copied().unwrap_or(0);
            first > 0
        })
        .collect()
}

impl Default for TextureConfig {
    fn default() -> Self {
        TextureConfig {
            n_bins: 32,
            offsets: unique_offsets_3d(),
            symmetric: true,
        }
    }
}

impl TextureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(RadiomicsError::BadConfig("n_bins must be at least 2".into()));
        }
        if self.offsets.is_empty() || self.offsets.contains(&[0, 0, 0]) {
            return Err(RadiomicsError::BadConfig("offsets must be non-empty and nonzero".into()));
        }
        Ok(())
    }
}

/// Masked voxel indices and their intensities, after validating the pair.
fn masked(volume: &Volume, mask: &Mask) -> Result<(Vec<usize>, Vec<f64>)> {
    mask.check_matches(volume)?;
    let idx: Vec<usize> = mask.foreground().collect();
    if idx.is_empty() {
        return Err(RadiomicsError::EmptyMask);
    }
    let vals = idx.iter().map(|&i| f64::from(volume.voxels()[i])).collect();
    Ok((idx, vals))
}

/// Equal-width bin of `x` over `[lo, hi]`.
pub fn quantize(x: f64, lo: f64, hi: f64, n_bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let b = ((x - lo) / (hi - lo) * n_bins as f64).floor();
    (b.max(0.0) as usize).min(n_bins - 1)
}

/// Quantized level for every voxel of the grid (`usize::MAX` outside the mask).
fn quantized_levels(volume: &Volume, mask: &Mask, n_bins: usize) -> Result<Vec<usize>> {
    let (idx, vals) = masked(volume, mask)?;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut levels = vec![usize::MAX; volume.voxels().len()];
    for (i, v) in idx.into_iter().zip(vals) {
        levels[i] = quantize(v, lo, hi, n_bins);
    }
    Ok(levels)
}

/// Full signature: FirstOrder ‖ Shape ‖ GLCM ‖ GLSZM in canonical order.
pub fn extract(volume: &Volume, mask: &Mask, cfg: &TextureConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    let mut out = first_order(volume, mask, cfg.n_bins)?;
    out.extend(shape(mask)?);
    out.extend(glcm(volume, mask, cfg)?);
    out.extend(glszm(volume, mask, cfg)?);
    Ok(out)
}
