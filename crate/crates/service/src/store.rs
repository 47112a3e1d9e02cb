//! File-based case store. Each case owns a directory holding its case
//! document, its workflow record and content-addressed artifacts:
//!
//! ```text
//! <root>/cases/<case_id>/case.json
//! <root>/cases/<case_id>/record.json
//! <root>/cases/<case_id>/objects/<sha256>
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use fuas_core::{parse_case, serialize_case, CaseInput};
use sha2::{Digest, Sha256};

use crate::error::{io, Result, ServiceError};
use crate::record::WorkflowRecord;

pub const REF_PREFIX: &str = "sha256:";

pub fn content_ref(bytes: &[u8]) -> String {
    format!("{REF_PREFIX}{}", hex::encode(Sha256::digest(bytes)))
}

pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("cases")).map_err(io(format!("creating store {}", root.display())))?;
        Ok(Store {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn case_dir(&self, case_id: &str) -> PathBuf {
        self.root.join("cases").join(case_id)
    }

    fn lock_for(&self, case_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table");
        locks.entry(case_id.to_string()).or_default().clone()
    }

    pub fn exists(&self, case_id: &str) -> bool {
        self.case_dir(case_id).join("record.json").is_file()
    }

    /// Creates the case directory; fails if the case is already stored.
    pub fn create(&self, case: &CaseInput, record: &WorkflowRecord) -> Result<()> {
        let dir = self.case_dir(&case.case_id);
        let lock = self.lock_for(&case.case_id);
        let _guard = lock.lock().expect("case lock");
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(ServiceError::DuplicateCase(case.case_id.clone()))
            }
            Err(e) => return Err(io(format!("creating {}", dir.display()))(e)),
        }
        fs::create_dir_all(dir.join("objects")).map_err(io("creating objects directory"))?;
        write_atomic(&dir.join("case.json"), serialize_case(case).as_bytes())?;
        write_atomic(&dir.join("record.json"), &serde_json::to_vec_pretty(record)?)
    }

    pub fn case_document(&self, case_id: &str) -> Result<CaseInput> {
        let path = self.case_dir(case_id).join("case.json");
        let text = fs::read_to_string(&path).map_err(|_| ServiceError::UnknownCase(case_id.to_string()))?;
        Ok(parse_case(&text)?)
    }

    pub fn load(&self, case_id: &str) -> Result<WorkflowRecord> {
        let path = self.case_dir(case_id).join("record.json");
        let bytes = fs::read(&path).map_err(|_| ServiceError::UnknownCase(case_id.to_string()))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Read-modify-write of one record under its case lock.
    pub fn update<T>(&self, case_id: &str, f: impl FnOnce(&mut WorkflowRecord) -> Result<T>) -> Result<T> {
        let lock = self.lock_for(case_id);
        let _guard = lock.lock().expect("case lock");
        let mut record = self.load(case_id)?;
        let out = f(&mut record)?;
        record.touch();
        write_atomic(&self.case_dir(case_id).join("record.json"), &serde_json::to_vec_pretty(&record)?)?;
        Ok(out)
    }

    /// Overwrites the stored record.
    pub fn save(&self, record: &WorkflowRecord) -> Result<()> {
        self.update(&record.case_id, |r| {
            *r = record.clone();
            Ok(())
        })
    }

    pub fn put_object(&self, case_id: &str, bytes: &[u8]) -> Result<String> {
        let r = content_ref(bytes);
        let path = self.object_path(case_id, &r)?;
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(r)
    }

    pub fn get_object(&self, case_id: &str, reference: &str) -> Result<Vec<u8>> {
        let path = self.object_path(case_id, reference)?;
        fs::read(&path).map_err(|_| ServiceError::MissingArtifact(reference.to_string()))
    }

    fn object_path(&self, case_id: &str, reference: &str) -> Result<PathBuf> {
        let digest = reference
            .strip_prefix(REF_PREFIX)
            .filter(|d| d.len() == 64 && d.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| ServiceError::BadRequest(format!("malformed artifact ref {reference:?}")))?;
        Ok(self.case_dir(case_id).join("objects").join(digest))
    }

    /// All records, ordered by case id.
    pub fn list(&self) -> Result<Vec<WorkflowRecord>> {
        let dir = self.root.join("cases");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io(format!("listing {}", dir.display())))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("record.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load(id)).collect()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(io(format!("renaming onto {}", path.display())))
}
