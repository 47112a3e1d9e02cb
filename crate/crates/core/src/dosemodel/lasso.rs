use serde::{Deserialize, Serialize};

use super::{DoseError, Result};

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Column means and population standard deviations; constant columns get scale 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let d = x.first().map_or(0, Vec::len);
        let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scales = (0..d)
            .map(|j| (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Standardizer { means, scales }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    /// Original column scale.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub selected: Vec<usize>,
    /// Weights on the standardized design, where the penalty applies.
    pub standardized_weights: Vec<f64>,
    pub standardizer: Standardizer,
    pub sweeps: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn l1_norm_standardized(&self) -> f64 {
        self.standardized_weights.iter().map(|w| w.abs()).sum()
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(DoseError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(DoseError::Shape(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(DoseError::Shape("ragged feature matrix".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(DoseError::NonFiniteInput("lasso design"));
    }
    Ok(d)
}

/// Standardized columns (column-major) and centered target.
fn prepare(x: &[Vec<f64>], y: &[f64], st: &Standardizer) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let d = st.means.len();
    let rows: Vec<Vec<f64>> = x.iter().map(|r| st.transform(r)).collect();
    let cols = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    (cols, y.iter().map(|v| v - y_mean).collect(), y_mean)
}

/// Smallest penalty at which every standardized weight is zero.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let st = Standardizer::fit(x);
    let (cols, yc, _) = prepare(x, y, &st);
    let n = y.len() as f64;
    Ok(cols
        .iter()
        .map(|c| (c.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / n).abs())
        .fold(0.0, f64::max))
}

struct Problem {
    cols: Vec<Vec<f64>>,
    yc: Vec<f64>,
    y_mean: f64,
    norms: Vec<f64>,
    st: Standardizer,
}

impl Problem {
    fn new(x: &[Vec<f64>], y: &[f64]) -> Self {
        let st = Standardizer::fit(x);
        let (cols, yc, y_mean) = prepare(x, y, &st);
        let n = y.len() as f64;
        let norms = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
        Problem { cols, yc, y_mean, norms, st }
    }

    /// Cyclic coordinate descent from `w`, returning (weights, sweeps, converged).
    fn solve(&self, lambda: f64, mut w: Vec<f64>) -> (Vec<f64>, usize, bool) {
        let n = self.yc.len() as f64;
        let mut resid = self.yc.clone();
        for (col, wj) in self.cols.iter().zip(&w) {
            if *wj != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * wj;
                }
            }
        }
        for sweep in 1..=MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for (j, col) in self.cols.iter().enumerate() {
                if self.norms[j] == 0.0 {
                    continue;
                }
                let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n + self.norms[j] * w[j];
                let updated = soft_threshold(rho, lambda) / self.norms[j];
                let delta = updated - w[j];
                if delta != 0.0 {
                    for (r, a) in resid.iter_mut().zip(col) {
                        *r -= a * delta;
                    }
                    w[j] = updated;
                }
                max_change = max_change.max(delta.abs());
            }
            if max_change < TOLERANCE {
                return (w, sweep, true);
            }
        }
        (w, MAX_SWEEPS, false)
    }

    fn finish(&self, lambda: f64, (w, sweeps, converged): (Vec<f64>, usize, bool)) -> LassoFit {
        let weights: Vec<f64> = w
            .iter()
            .zip(&self.st.scales)
            .map(|(wj, s)| if *s > 0.0 { wj / s } else { 0.0 })
            .collect();
        let intercept = self.y_mean - weights.iter().zip(&self.st.means).map(|(w, m)| w * m).sum::<f64>();
        LassoFit {
            selected: (0..w.len()).filter(|&j| w[j] != 0.0).collect(),
            weights,
            intercept,
            lambda,
            standardized_weights: w,
            standardizer: self.st.clone(),
            sweeps,
            converged,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(DoseError::BadParam(format!("lambda {lambda}")))
    }
}

/// Minimizes (1/2N)‖y − Fw‖² + λ‖w‖₁ on standardized columns by cyclic
/// coordinate descent.
pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoFit> {
    let d = check(x, y)?;
    check_lambda(lambda)?;
    let p = Problem::new(x, y);
    Ok(p.finish(lambda, p.solve(lambda, vec![0.0; d])))
}

/// Fits along a descending penalty path, warm-starting each from the last.
pub fn lasso_path(x: &[Vec<f64>], y: &[f64], lambdas: &[f64]) -> Result<Vec<LassoFit>> {
    let d = check(x, y)?;
    let p = Problem::new(x, y);
    let mut w = vec![0.0; d];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        check_lambda(lambda)?;
        let fit = p.finish(lambda, p.solve(lambda, w));
        w = fit.standardized_weights.clone();
        out.push(fit);
    }
    Ok(out)
}

/// `n` log-spaced penalties from `lambda_max` down to `lambda_max·1e-3`.
pub fn lambda_grid(lambda_max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lambda_max];
    }
    (0..n)
        .map(|i| lambda_max * 10f64.powf(-3.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// K-fold cross-validated penalty choice (fold = row index mod K), refit on all rows.
///
/// Ties in held-out MSE go to the larger penalty.
pub fn lasso_cv(x: &[Vec<f64>], y: &[f64], folds: usize, n_lambda: usize) -> Result<LassoFit> {
    check(x, y)?;
    if folds < 2 || folds > x.len() {
        return Err(DoseError::BadParam(format!("{folds} folds for {} rows", x.len())));
    }
    let grid = lambda_grid(lambda_max(x, y)?, n_lambda);
    let mut sse = vec![0.0; grid.len()];
    for k in 0..folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|i| i % folds != k);
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (acc, fit) in sse.iter_mut().zip(lasso_path(&xt, &yt, &grid)?) {
            *acc += test.iter().map(|&i| (fit.predict(&x[i]) - y[i]).powi(2)).sum::<f64>();
        }
    }
    let mut best = (f64::INFINITY, grid[0]);
    for (&lambda, &e) in grid.iter().zip(&sse) {
        if e < best.0 {
            best = (e, lambda);
        }
    }
    lasso_fit(x, y, best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn zero_at_lambda_max() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 2.0 * i as f64 + 1.0).collect();
        let lmax = lambda_max(&x, &y).unwrap();
        let fit = lasso_fit(&x, &y, lmax).unwrap();
        assert!(fit.selected.is_empty());
        assert!((fit.intercept - 8.0).abs() < 1e-12);
        let fit = lasso_fit(&x, &y, 0.0).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-6);
        assert!((fit.predict(&[3.0, 1.0]) - 7.0).abs() < 1e-6);
    }

    #[test]
    fn constant_column_ignored() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![4.0, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let fit = lasso_fit(&x, &y, 0.0).unwrap();
        assert_eq!(fit.weights[0], 0.0);
        assert_eq!(fit.selected, vec![1]);
    }

    #[test]
    fn cv_picks_a_grid_value() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, ((i * 13) % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0]).collect();
        let fit = lasso_cv(&x, &y, 5, 50).unwrap();
        assert!(fit.selected.contains(&0));
        assert!(lasso_cv(&x, &y, 1, 50).is_err());
    }
}
