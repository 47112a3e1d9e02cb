use super::{DoseError, Result};

pub const ICC_THRESHOLD: f64 = 0.75;

/// One-way random-effects ICC(1,1) over `ratings[subject][replicate]`.
///
/// `None` when the column has no variance at all.
pub fn icc_1_1(ratings: &[Vec<f64>]) -> Option<f64> {
    let n = ratings.len();
    let k = ratings.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return None;
    }
    let means: Vec<f64> = ratings.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let grand = means.iter().sum::<f64>() / n as f64;
    let msb = k as f64 * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1) as f64;
    let msw = ratings
        .iter()
        .zip(&means)
        .map(|(r, m)| r.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (n * (k - 1)) as f64;
    let denom = msb + (k - 1) as f64 * msw;
    (denom > 0.0).then(|| (msb - msw) / denom)
}

/// Columns whose ICC across `replicates[r][sample][column]` reaches `threshold`.
pub fn icc_filter(replicates: &[Vec<Vec<f64>>], threshold: f64) -> Result<Vec<usize>> {
    if replicates.len() < 2 {
        return Err(DoseError::TooFewReplicates(replicates.len()));
    }
    let n = replicates[0].len();
    let d = replicates[0].first().map_or(0, Vec::len);
    for rep in replicates {
        if rep.len() != n || rep.iter().any(|row| row.len() != d) {
            return Err(DoseError::Shape("replicates disagree in shape".into()));
        }
    }
    Ok((0..d)
        .filter(|&j| {
            let ratings: Vec<Vec<f64>> = (0..n)
                .map(|i| replicates.iter().map(|rep| rep[i][j]).collect())
                .collect();
            icc_1_1(&ratings).is_some_and(|icc| icc >= threshold)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_replicates_retained() {
        let rep: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 3.0]).collect();
        let kept = icc_filter(&[rep.clone(), rep.clone(), rep], ICC_THRESHOLD).unwrap();
        assert_eq!(kept, vec![0]);
    }

    #[test]
    fn needs_two_replicates() {
        assert!(matches!(icc_filter(&[vec![vec![1.0]]], 0.75), Err(DoseError::TooFewReplicates(1))));
    }

    #[test]
    fn hand_anova() {
        // subjects (1,3) and (5,7): means 2, 6; MSB = 2·8/1 = 16, MSW = 4/2 = 2
        let icc = icc_1_1(&[vec![1.0, 3.0], vec![5.0, 7.0]]).unwrap();
        assert!((icc - 14.0 / 18.0).abs() < 1e-15);
    }
}
