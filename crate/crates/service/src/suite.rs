//! Seeded phantom cases written to disk as complete case directories.

use std::fs;
use std::path::{Path, PathBuf};

use fuas_core::dosemodel::train::{synthetic_case, SyntheticCase};
use fuas_core::segtool::{make_phantom, Phantom, PhantomSpec};
use fuas_core::{parse_case, CaseInput, ClinicalVariables, Mask};

use crate::error::{io, Result};

pub const SUITE_SIZE: usize = 20;
pub const SUITE_BASE_SEED: u64 = 1000;

pub struct SuiteCase {
    pub case: CaseInput,
    pub case_path: PathBuf,
    pub truth: Mask,
    pub synthetic: SyntheticCase,
}

/// Writes `volume.rvol`, `truth.rmsk` and `oar_<i>.rmsk` for a phantom spec.
pub fn write_phantom(spec: &PhantomSpec, dir: &Path) -> Result<Phantom> {
    fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))?;
    let phantom = make_phantom(spec)?;
    phantom.volume.save(&dir.join("volume.rvol"))?;
    phantom.truth.save(&dir.join("truth.rmsk"))?;
    for (i, oar) in phantom.oars.iter().enumerate() {
        oar.save(&dir.join(format!("oar_{i}.rmsk")))?;
    }
    Ok(phantom)
}

fn ehr_text(c: &ClinicalVariables, lesions: usize) -> String {
    let count = if lesions == 1 { "solitary uterine fibroid".to_string() } else { format!("{lesions} uterine fibroids") };
    format!(
        "{count} with menorrhagia and bulk symptoms; bmi {:.1}; abdominal wall {:.0} mm; preop score {}",
        c.bmi, c.abdominal_wall_thickness_mm, c.preop_score
    )
}

/// One phantom case in `dir/<case_id>/`, seeded by `seed`.
pub fn write_case(dir: &Path, seed: u64) -> Result<SuiteCase> {
    let synthetic = synthetic_case(seed);
    let case_id = format!("phantom-{seed:04}");
    let case_dir = dir.join(&case_id);
    let phantom = write_phantom(&synthetic.spec, &case_dir)?;
    let case = CaseInput {
        case_id,
        volume_ref: "volume.rvol".into(),
        ehr_text: ehr_text(&synthetic.clinical, synthetic.spec.ellipsoids.len()),
        clinician_query: "Propose a focused ultrasound ablation plan covering every fibroid.".into(),
        clinical_vars: synthetic.clinical,
        oar_refs: (0..phantom.oars.len()).map(|i| PathBuf::from(format!("oar_{i}.rmsk"))).collect(),
        mask_ref: None,
        segment_prompt: Some("auto".into()),
    };
    let case_path = case_dir.join("case.json");
    fs::write(&case_path, fuas_core::serialize_case(&case)).map_err(io(format!("writing {}", case_path.display())))?;
    Ok(SuiteCase {
        case: load_case_file(&case_path)?,
        case_path,
        truth: phantom.truth,
        synthetic,
    })
}

/// `n` cases seeded `base_seed, base_seed + 1, …`.
pub fn write_suite(dir: &Path, n: usize, base_seed: u64) -> Result<Vec<SuiteCase>> {
    (0..n as u64).map(|i| write_case(dir, base_seed + i)).collect()
}

/// Reads a case document; relative file references resolve against its directory.
pub fn load_case_file(path: &Path) -> Result<CaseInput> {
    let text = fs::read_to_string(path).map_err(io(format!("reading {}", path.display())))?;
    let mut case = parse_case(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_paths(&mut case, base);
    Ok(case)
}

pub fn resolve_paths(case: &mut CaseInput, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    fix(&mut case.volume_ref);
    case.oar_refs.iter_mut().for_each(fix);
    if let Some(m) = case.mask_ref.as_mut() {
        fix(m);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sc = write_case(dir.path(), 7).unwrap();
        assert!(sc.case.volume_ref.is_absolute());
        assert!(sc.case.volume_ref.is_file());
        assert_eq!(sc.case.oar_refs.len(), 1);
        assert_eq!(load_case_file(&sc.case_path).unwrap(), sc.case);
        assert!(sc.truth.count() > 0);
    }
}
