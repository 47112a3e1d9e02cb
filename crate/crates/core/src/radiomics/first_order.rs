use super::{masked, quantize, Family, FeatureVector, Result};
use crate::stats::percentile_sorted;
use crate::volume::{Mask, Volume};

/// Intensity statistics over the masked voxels.
///
/// Variance and skewness are population moments; entropy is in bits over an
/// `n_bins` equal-width histogram; percentiles interpolate linearly.
pub fn first_order(volume: &Volume, mask: &Mask, n_bins: usize) -> Result<FeatureVector> {
    let (_, vals) = masked(volume, mask)?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = vals.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let energy = vals.iter().map(|v| v * v).sum::<f64>();

    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut hist = vec![0usize; n_bins.max(1)];
    for &v in &vals {
        hist[quantize(v, lo, hi, n_bins.max(1))] += 1;
    }
    let entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();

    Ok(FeatureVector::from_family(
        Family::FirstOrder,
        "firstorder",
        &[
            ("mean", mean),
            ("variance", m2),
            ("skewness", skewness),
            ("energy", energy),
            ("entropy", entropy + 0.0),
            ("p10", percentile_sorted(&sorted, 10.0)),
            ("p90", percentile_sorted(&sorted, 90.0)),
        ],
    ))
}
