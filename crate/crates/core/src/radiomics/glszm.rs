use std::collections::BTreeMap;

use super::{quantized_levels, Family, FeatureVector, Result, TextureConfig};
use crate::components::{self, Connectivity};
use crate::volume::{Mask, Volume};

/// A 26-connected run of voxels sharing one quantized gray level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Zone {
    pub level: usize,
    pub size: usize,
}

pub fn glszm_zones(volume: &Volume, mask: &Mask, cfg: &TextureConfig) -> Result<Vec<Zone>> {
    cfg.validate()?;
    let levels = quantized_levels(volume, mask, cfg.n_bins)?;
    let comps = components::label(
        volume.grid(),
        Connectivity::TwentySix,
        |i| mask.is_set(i),
        |a, b| levels[a] == levels[b],
    );
    let mut zones: Vec<Zone> = comps
        .iter()
        .map(|c| Zone {
            level: levels[c[0]],
            size: c.len(),
        })
        .collect();
    zones.sort();
    Ok(zones)
}

/// Small/large area emphasis, gray-level non-uniformity and zone entropy (bits).
pub fn glszm(volume: &Volume, mask: &Mask, cfg: &TextureConfig) -> Result<FeatureVector> {
    let zones = glszm_zones(volume, mask, cfg)?;
    let nz = zones.len() as f64;
    let mut matrix: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut per_level: BTreeMap<usize, usize> = BTreeMap::new();
    for z in &zones {
        *matrix.entry((z.level, z.size)).or_default() += 1;
        *per_level.entry(z.level).or_default() += 1;
    }
    let (mut sae, mut lae, mut entropy) = (0.0, 0.0, 0.0);
    for (&(_, size), &count) in &matrix {
        let c = count as f64;
        let s = size as f64;
        sae += c / (s * s);
        lae += c * s * s;
        let p = c / nz;
        entropy -= p * p.log2();
    }
    let gln = per_level.values().map(|&c| (c as f64).powi(2)).sum::<f64>() / nz;
    Ok(FeatureVector::from_family(
        Family::Glszm,
        "glszm",
        &[
            ("small_area_emphasis", sae / nz),
            ("large_area_emphasis", lae / nz),
            ("gray_level_nonuniformity", gln),
            ("zone_entropy", entropy + 0.0),
        ],
    ))
}
