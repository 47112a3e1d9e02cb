//! Synthetic cohort and the reference dose model trained on it.
//!
//! Cases are ellipsoid phantoms with one or two bright lesions above a dark
//! organ at risk. The dose target is a fixed linear law in lesion volume and
//! clinical variables plus Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    boosted_fit, icc_filter, lasso_cv, roc_auc, BoostParams, DoseBands, DoseError, DoseModel, Result, TrainingTable,
    ICC_THRESHOLD,
};
use crate::case::ClinicalVariables;
use crate::components::Connectivity;
use crate::radiomics::{extract, FeatureVector, TextureConfig};
use crate::segtool::{make_phantom, Ellipsoid, Phantom, PhantomSpec};
use crate::volume::Mask;

pub const COHORT_DIMS: [usize; 3] = [32, 32, 24];
pub const COHORT_SPACING: [f32; 3] = [2.0, 2.0, 2.0];
pub const LESION_INTENSITY: f64 = 100.0;
pub const BACKGROUND_INTENSITY: f64 = 25.0;
pub const OAR_INTENSITY: f64 = 0.0;
pub const NOISE_SIGMA: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub spec: PhantomSpec,
    pub clinical: ClinicalVariables,
    /// Noise-free law evaluated on the true lesion volume, plus noise.
    pub dose_j: f64,
    /// Designed lesion-surface to OAR-surface gap in mm.
    pub oar_gap_mm: f64,
}

/// The dose law the cohort is drawn from (without noise).
pub fn dose_law(lesion_volume_mm3: f64, c: &ClinicalVariables) -> f64 {
    12_000.0
        + 3.0 * lesion_volume_mm3
        + 450.0 * (c.abdominal_wall_thickness_mm - 20.0)
        + 200.0 * (c.bmi - 24.0)
        + 1_500.0 * c.preop_score
}

pub fn synthetic_case(seed: u64) -> SyntheticCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = rng.random_bool(0.3);
    let (lesions, bottom) = if two {
        let r1 = rng.random_range(8.0..11.0);
        let r2 = rng.random_range(8.0..11.0);
        let y = rng.random_range(39.0..42.0);
        let z = rng.random_range(21.0..25.0);
        (
            vec![
                Ellipsoid::sphere([18.0, y, z], r1, LESION_INTENSITY),
                Ellipsoid::sphere([44.0, y, z], r2, LESION_INTENSITY),
            ],
            y - f64::max(r1, r2),
        )
    } else {
        let r = rng.random_range(10.0..14.0);
        let c = [rng.random_range(28.0..34.0), rng.random_range(38.0..42.0), rng.random_range(21.0..25.0)];
        (vec![Ellipsoid::sphere(c, r, LESION_INTENSITY)], c[1] - r)
    };
    let gap = rng.random_range(2.0..14.0);
    let oar = Ellipsoid {
        center: [31.0, bottom - gap - 5.0, 23.0],
        semi_axes: [14.0, 5.0, 8.0],
        intensity: OAR_INTENSITY,
    };
    let clinical = ClinicalVariables {
        bmi: rng.random_range(18.0..35.0),
        abdominal_wall_thickness_mm: rng.random_range(15.0..45.0),
        preop_score: f64::from(rng.random_range(0..=3u8)),
        age: rng.random_range(25.0..55.0),
    };
    let spec = PhantomSpec {
        dims: COHORT_DIMS,
        spacing: COHORT_SPACING,
        ellipsoids: lesions,
        oars: vec![oar],
        background: BACKGROUND_INTENSITY,
        noise_sigma: NOISE_SIGMA,
        rng_seed: seed,
    };
    let voxel_mm3: f64 = COHORT_SPACING.iter().map(|&s| f64::from(s)).product();
    let truth_volume = make_phantom(&spec).map(|p| p.truth.count() as f64 * voxel_mm3).unwrap_or(0.0);
    let noise = Normal::new(0.0, 1_500.0).expect("valid sigma").sample(&mut rng);
    SyntheticCase {
        dose_j: dose_law(truth_volume, &clinical) + noise,
        spec,
        clinical,
        oar_gap_mm: gap,
    }
}

/// One-voxel morphological jitter: a random half of the boundary shell is
/// either added (dilate) or removed (erode).
pub fn jitter_mask(mask: &Mask, rng: &mut impl Rng) -> Mask {
    let grid = *mask.grid();
    let offsets = Connectivity::Six.offsets();
    let dilate = rng.random_bool(0.5);
    let mut out = mask.clone();
    for i in 0..grid.len() {
        let c = grid.coords(i);
        let touches = |want: bool| offsets.iter().any(|&o| grid.offset(c, o).is_some_and(|j| mask.is_set(j) == want));
        let shell = if dilate { !mask.is_set(i) && touches(true) } else { mask.is_set(i) && touches(false) };
        if shell && rng.random_bool(0.5) {
            out.set(i, dilate);
        }
    }
    if out.is_blank() {
        mask.clone()
    } else {
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub n_cases: usize,
    pub icc_retained: Vec<String>,
    pub lambda: f64,
    pub selected: Vec<String>,
    pub training_rmse: f64,
    pub mean_predictor_rmse: f64,
    /// Training AUC for the label "dose above the training median".
    pub training_auc: f64,
}

pub const REFERENCE_CASES: usize = 40;
pub const REPLICATES: usize = 3;

pub fn cohort_table(seed: u64, n_cases: usize, cfg: &TextureConfig) -> Result<(TrainingTable, Vec<Vec<Vec<f64>>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut names = Vec::new();
    let (mut features, mut clinical, mut target) = (Vec::new(), Vec::new(), Vec::new());
    let mut replicates = vec![Vec::new(); REPLICATES];
    for i in 0..n_cases {
        let case = synthetic_case(seed.wrapping_mul(1_000).wrapping_add(i as u64));
        let Phantom { volume, truth, .. } = make_phantom(&case.spec)?;
        let fv: FeatureVector = extract(&volume, &truth, cfg)?;
        if names.is_empty() {
            names = fv.names().iter().map(|s| s.to_string()).collect();
        }
        for rep in replicates.iter_mut() {
            rep.push(extract(&volume, &jitter_mask(&truth, &mut rng), cfg)?.values());
        }
        features.push(fv.values());
        clinical.push(case.clinical.as_array());
        target.push(case.dose_j);
    }
    Ok((TrainingTable::new(names, features, clinical, target)?, replicates))
}

/// ICC filter → cross-validated LASSO → boosted regressor, on a seeded cohort.
pub fn train_reference_model(seed: u64) -> Result<(DoseModel, TrainingReport)> {
    let cfg = TextureConfig::default();
    let (table, replicates) = cohort_table(seed, REFERENCE_CASES, &cfg)?;
    train_on(&table, &replicates, &format!("reference-{seed}"))
}

pub fn train_on(table: &TrainingTable, replicates: &[Vec<Vec<f64>>], version: &str) -> Result<(DoseModel, TrainingReport)> {
    if table.is_empty() {
        return Err(DoseError::EmptyTrainingSet);
    }
    let retained = icc_filter(replicates, ICC_THRESHOLD)?;
    let (lambda, mut selected) = if retained.is_empty() {
        (0.0, Vec::new())
    } else {
        let x: Vec<Vec<f64>> = table.features.iter().map(|r| retained.iter().map(|&j| r[j]).collect()).collect();
        let fit = lasso_cv(&x, &table.target, 5, 50)?;
        (fit.lambda, fit.selected.iter().map(|&k| retained[k]).collect::<Vec<_>>())
    };
    selected.sort_unstable();

    let design = table.design(&selected);
    let fit = boosted_fit(&design, &table.target, &BoostParams::default())?;
    let names: Vec<String> = selected.iter().map(|&j| table.feature_names[j].clone()).collect();
    let model = DoseModel::new(version, names.clone(), fit.ensemble, DoseBands::default());

    let preds: Vec<f64> = design.iter().map(|r| model.ensemble.predict(r)).collect();
    let median = crate::stats::percentile(&table.target, 50.0);
    let labels: Vec<bool> = table.target.iter().map(|&y| y > median).collect();
    let report = TrainingReport {
        n_cases: table.len(),
        icc_retained: retained.iter().map(|&j| table.feature_names[j].clone()).collect(),
        lambda,
        selected: names,
        training_rmse: *fit.training_rmse.last().expect("history has the base stage"),
        mean_predictor_rmse: fit.training_rmse[0],
        training_auc: roc_auc(&preds, &labels)?,
    };
    Ok((model, report))
}
