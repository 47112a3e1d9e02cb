//! Brute-force recomputations that share no code with the crate under test.
//! Each one follows the textbook definition directly, trading speed for
//! obviousness.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a − b| ≤ tol·max(1, |b|)`: absolute near zero, relative for large values.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// A small random volume with a non-empty mask.
#[derive(Debug, Clone)]
pub struct SmallCase {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub values: Vec<f32>,
    pub bits: Vec<u8>,
}

impl SmallCase {
    pub fn at(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn inside(&self, p: [i64; 3]) -> Option<usize> {
        let ok = (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a]);
        ok.then(|| self.at(p[0] as usize, p[1] as usize, p[2] as usize))
    }

    pub fn masked_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let i = self.at(x, y, z);
                    if self.bits[i] != 0 {
                        out.push(f64::from(self.values[i]));
                    }
                }
            }
        }
        out
    }
}

/// Dims in 1..=6 per axis; even seeds draw integer intensities (many ties),
/// odd seeds continuous ones.
pub fn small_case(seed: u64) -> SmallCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6)];
    let steps = [0.5f32, 1.0, 1.5, 2.0];
    let spacing = [0, 1, 2].map(|_| steps[rng.random_range(0..steps.len())]);
    let n = dims.iter().product::<usize>();
    let values: Vec<f32> = (0..n)
        .map(|_| {
            if seed.is_multiple_of(2) {
                rng.random_range(0..6) as f32
            } else {
                rng.random_range(0.0f32..100.0)
            }
        })
        .collect();
    let density = rng.random_range(0.3..1.0);
    let mut bits: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(density))).collect();
    if bits.iter().all(|&b| b == 0) {
        bits[rng.random_range(0..n)] = 1;
    }
    SmallCase { dims, spacing, values, bits }
}

fn bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let b = ((v - lo) / (hi - lo) * n as f64).floor();
    if b < 0.0 {
        0
    } else if b as usize >= n {
        n - 1
    } else {
        b as usize
    }
}

fn interpolated_percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = (below + 1).min(sorted.len() - 1);
    let t = pos - below as f64;
    sorted[below] * (1.0 - t) + sorted[above] * t
}

/// mean, variance, skewness, energy, entropy, p10, p90.
pub fn first_order(case: &SmallCase, n_bins: usize) -> [f64; 7] {
    let v = case.masked_values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let third = v.iter().map(|x| (x - mean) * (x - mean) * (x - mean)).sum::<f64>() / n;
    let skew = if var > 0.0 { third / (var * var.sqrt()) } else { 0.0 };
    let energy = v.iter().map(|x| x * x).sum::<f64>();
    let mut sorted = v.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (sorted[0], *sorted.last().unwrap());
    let mut entropy = 0.0;
    for b in 0..n_bins {
        let c = v.iter().filter(|&&x| bin(x, lo, hi, n_bins) == b).count();
        if c > 0 {
            let p = c as f64 / n;
            entropy -= p * p.log2();
        }
    }
    [
        mean,
        var,
        skew,
        energy,
        entropy,
        interpolated_percentile(&sorted, 10.0),
        interpolated_percentile(&sorted, 90.0),
    ]
}

/// volume, exposed-face surface area, sphericity, surface-to-volume.
pub fn shape(case: &SmallCase) -> [f64; 4] {
    let s = case.spacing.map(f64::from);
    let faces = [
        ([1, 0, 0], s[1] * s[2]),
        ([-1, 0, 0], s[1] * s[2]),
        ([0, 1, 0], s[0] * s[2]),
        ([0, -1, 0], s[0] * s[2]),
        ([0, 0, 1], s[0] * s[1]),
        ([0, 0, -1], s[0] * s[1]),
    ];
    let (mut count, mut area) = (0usize, 0.0);
    for z in 0..case.dims[2] {
        for y in 0..case.dims[1] {
            for x in 0..case.dims[0] {
                if case.bits[case.at(x, y, z)] == 0 {
                    continue;
                }
                count += 1;
                for (d, a) in faces {
                    let q = [x as i64 + d[0], y as i64 + d[1], z as i64 + d[2]];
                    if case.inside(q).is_none_or(|j| case.bits[j] == 0) {
                        area += a;
                    }
                }
            }
        }
    }
    let volume = count as f64 * s[0] * s[1] * s[2];
    let sphericity = (36.0 * std::f64::consts::PI * volume * volume).cbrt() / area;
    [volume, area, sphericity, area / volume]
}

/// Quantized level per voxel, `None` outside the mask.
pub fn levels(case: &SmallCase, n_bins: usize) -> Vec<Option<usize>> {
    let v = case.masked_values();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    case.values
        .iter()
        .zip(&case.bits)
        .map(|(&x, &b)| (b != 0).then(|| bin(f64::from(x), lo, hi, n_bins)))
        .collect()
}

/// All 26 neighbour displacements.
pub fn neighbourhood() -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Co-occurrence matrix for one offset, normalized; `None` without pairs.
pub fn glcm_matrix(case: &SmallCase, n_bins: usize, offset: [i64; 3], symmetric: bool) -> Option<Vec<Vec<f64>>> {
    let lv = levels(case, n_bins);
    let mut m = vec![vec![0.0; n_bins]; n_bins];
    let mut total = 0.0;
    for z in 0..case.dims[2] {
        for y in 0..case.dims[1] {
            for x in 0..case.dims[0] {
                let Some(a) = lv[case.at(x, y, z)] else { continue };
                let q = [x as i64 + offset[0], y as i64 + offset[1], z as i64 + offset[2]];
                let Some(b) = case.inside(q).and_then(|j| lv[j]) else { continue };
                m[a][b] += 1.0;
                total += 1.0;
                if symmetric {
                    m[b][a] += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    if total == 0.0 {
        return None;
    }
    for row in &mut m {
        for c in row.iter_mut() {
            *c /= total;
        }
    }
    Some(m)
}

/// contrast, correlation, energy, homogeneity, averaged over offsets with pairs.
pub fn glcm(case: &SmallCase, n_bins: usize, offsets: &[[i64; 3]], symmetric: bool) -> Option<[f64; 4]> {
    let mats: Vec<Vec<Vec<f64>>> = offsets
        .iter()
        .filter_map(|&o| glcm_matrix(case, n_bins, o, symmetric))
        .collect();
    if mats.is_empty() {
        return None;
    }
    let mut acc = [0.0; 4];
    for p in &mats {
        let n = p.len();
        let mut mi = 0.0;
        let mut mj = 0.0;
        for i in 0..n {
            for j in 0..n {
                mi += i as f64 * p[i][j];
                mj += j as f64 * p[i][j];
            }
        }
        let (mut vi, mut vj, mut cov, mut con, mut en, mut hom) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let v = p[i][j];
                let (a, b) = (i as f64, j as f64);
                vi += (a - mi).powi(2) * v;
                vj += (b - mj).powi(2) * v;
                cov += (a - mi) * (b - mj) * v;
                con += (a - b).powi(2) * v;
                en += v * v;
                hom += v / (1.0 + (a - b).powi(2));
            }
        }
        let corr = if vi > 0.0 && vj > 0.0 { cov / (vi * vj).sqrt() } else { 0.0 };
        for (s, f) in acc.iter_mut().zip([con, corr, en, hom]) {
            *s += f;
        }
    }
    Some(acc.map(|s| s / mats.len() as f64))
}

/// (level, size) of every 26-connected same-level zone, sorted.
pub fn zones(case: &SmallCase, n_bins: usize) -> Vec<(usize, usize)> {
    let lv = levels(case, n_bins);
    // Label propagation: every voxel repeatedly takes the smallest label among
    // same-level neighbours until nothing changes.
    let mut label: Vec<usize> = (0..lv.len()).collect();
    let nb = neighbourhood();
    loop {
        let mut changed = false;
        for z in 0..case.dims[2] {
            for y in 0..case.dims[1] {
                for x in 0..case.dims[0] {
                    let i = case.at(x, y, z);
                    let Some(l) = lv[i] else { continue };
                    for d in &nb {
                        let q = [x as i64 + d[0], y as i64 + d[1], z as i64 + d[2]];
                        if let Some(j) = case.inside(q) {
                            if lv[j] == Some(l) && label[j] < label[i] {
                                label[i] = label[j];
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut sizes = std::collections::BTreeMap::new();
    for (i, l) in lv.iter().enumerate() {
        if let Some(l) = l {
            *sizes.entry((label[i], *l)).or_insert(0usize) += 1;
        }
    }
    let mut out: Vec<(usize, usize)> = sizes.into_iter().map(|((_, l), s)| (l, s)).collect();
    out.sort();
    out
}

/// small-area emphasis, large-area emphasis, gray-level non-uniformity, zone entropy.
pub fn glszm(case: &SmallCase, n_bins: usize) -> [f64; 4] {
    let z = zones(case, n_bins);
    let nz = z.len() as f64;
    let sae = z.iter().map(|&(_, s)| 1.0 / (s * s) as f64).sum::<f64>() / nz;
    let lae = z.iter().map(|&(_, s)| (s * s) as f64).sum::<f64>() / nz;
    let gln = (0..n_bins)
        .map(|l| z.iter().filter(|&&(zl, _)| zl == l).count() as f64)
        .map(|c| c * c)
        .sum::<f64>()
        / nz;
    let mut cells = std::collections::BTreeMap::new();
    for &k in &z {
        *cells.entry(k).or_insert(0usize) += 1;
    }
    let entropy = -cells
        .values()
        .map(|&c| {
            let p = c as f64 / nz;
            p * p.log2()
        })
        .sum::<f64>();
    [sae, lae, gln, entropy]
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Top-`k` ids by cosine similarity, then ascending id, from a full sort.
pub fn exhaustive_top_k(query: &[f64], items: &[(String, Vec<f64>)], k: usize) -> Vec<String> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut all: Vec<(f64, &str)> = items
        .iter()
        .map(|(id, v)| {
            let dot: f64 = query.iter().zip(v).map(|(a, b)| a * b).sum();
            ((dot / (norm(query) * norm(v))).clamp(-1.0, 1.0), id.as_str())
        })
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    all.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

/// Population-sd standardized columns and the centered target.
pub fn standardize(x: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut z = vec![vec![0.0; d]; x.len()];
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let s = (x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
        for (i, r) in x.iter().enumerate() {
            z[i][j] = if s > 0.0 { (r[j] - m) / s } else { 0.0 };
        }
    }
    let ym = y.iter().sum::<f64>() / n;
    (z, y.iter().map(|v| v - ym).collect())
}

/// Largest violation of the LASSO optimality conditions for
/// (1/2N)‖y − Zw‖² + λ‖w‖₁ on the standardized design.
pub fn kkt_residual(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> f64 {
    let (z, yc) = standardize(x, y);
    let n = z.len() as f64;
    let resid: Vec<f64> = z
        .iter()
        .zip(&yc)
        .map(|(r, t)| t - r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let mut worst: f64 = 0.0;
    for (j, &wj) in w.iter().enumerate() {
        let g = z.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() / n;
        let v = if wj != 0.0 {
            (g - lambda * wj.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// A well-conditioned regression problem with a sparse truth.
pub fn regression_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..d)
        .map(|j| if j % 2 == 0 { rng.random_range(-3.0..3.0) } else { 0.0 })
        .collect();
    let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..20.0)).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * scale[j] + 5.0).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| 2.0 + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}
