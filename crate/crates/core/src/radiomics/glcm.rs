use super::{quantized_levels, Family, FeatureVector, RadiomicsError, Result, TextureConfig};
use crate::volume::{Mask, Volume};

/// Normalized co-occurrence matrix per offset (row-major `n_bins × n_bins`);
/// `None` for offsets with no in-mask pair.
pub fn glcm_matrices(volume: &Volume, mask: &Mask, cfg: &TextureConfig) -> Result<Vec<Option<Vec<f64>>>> {
    cfg.validate()?;
    let levels = quantized_levels(volume, mask, cfg.n_bins)?;
    let grid = volume.grid();
    let n = cfg.n_bins;
    let fg: Vec<usize> = mask.foreground().collect();
    Ok(cfg
        .offsets
        .iter()
        .map(|&o| {
            let mut counts = vec![0u64; n * n];
            for &i in &fg {
                let Some(j) = grid.offset(grid.coords(i), o) else { continue };
                if !mask.is_set(j) {
                    continue;
                }
                let (a, b) = (levels[i], levels[j]);
                counts[a * n + b] += 1;
                if cfg.symmetric {
                    counts[b * n + a] += 1;
                }
            }
            let total: u64 = counts.iter().sum();
            (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect())
        })
        .collect())
}

fn features(p: &[f64], n: usize) -> [f64; 4] {
    let cell = |i: usize, j: usize| p[i * n + j];
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            mu_i += i as f64 * cell(i, j);
            mu_j += j as f64 * cell(i, j);
        }
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    let (mut contrast, mut energy, mut homogeneity) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = cell(i, j);
            if v == 0.0 {
                continue;
            }
            let (di, dj) = (i as f64 - mu_i, j as f64 - mu_j);
            var_i += di * di * v;
            var_j += dj * dj * v;
            cov += di * dj * v;
            let d = i as f64 - j as f64;
            contrast += d * d * v;
            energy += v * v;
            homogeneity += v / (1.0 + d * d);
        }
    }
    let correlation = if var_i > 0.0 && var_j > 0.0 {
        cov / (var_i.sqrt() * var_j.sqrt())
    } else {
        0.0
    };
    [contrast, correlation, energy, homogeneity]
}

/// Contrast, correlation, energy (angular second moment) and homogeneity
/// (inverse difference moment), averaged over offsets that have pairs.
pub fn glcm(volume: &Volume, mask: &Mask, cfg: &TextureConfig) -> Result<FeatureVector> {
    let mats = glcm_matrices(volume, mask, cfg)?;
    let valid: Vec<&Vec<f64>> = mats.iter().flatten().collect();
    if valid.is_empty() {
        return Err(RadiomicsError::NoValidPairs);
    }
    let mut acc = [0.0; 4];
    for p in &valid {
        for (a, f) in acc.iter_mut().zip(features(p, cfg.n_bins)) {
            *a += f;
        }
    }
    let k = valid.len() as f64;
    Ok(FeatureVector::from_family(
        Family::Glcm,
        "glcm",
        &[
            ("contrast", acc[0] / k),
            ("correlation", acc[1] / k),
            ("energy", acc[2] / k),
            ("homogeneity", acc[3] / k),
        ],
    ))
}
