use std::collections::HashSet;
use std::io::{Read, Write};

use super::{DoseError, Result};
use crate::case::ClinicalVariables;

pub const TARGET_COLUMN: &str = "dose_j";

/// Radiomics matrix F, clinical matrix C and dose target y, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub clinical: Vec<[f64; 4]>,
    pub target: Vec<f64>,
}

impl TrainingTable {
    pub fn new(feature_names: Vec<String>, features: Vec<Vec<f64>>, clinical: Vec<[f64; 4]>, target: Vec<f64>) -> Result<Self> {
        let t = TrainingTable { feature_names, features, clinical, target };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.target.len();
        if self.features.len() != n || self.clinical.len() != n {
            return Err(DoseError::Shape("row counts differ".into()));
        }
        let d = self.feature_names.len();
        if self.features.iter().any(|r| r.len() != d) {
            return Err(DoseError::Shape("feature row width differs from header".into()));
        }
        let mut seen = HashSet::new();
        for name in self.feature_names.iter().map(String::as_str).chain(ClinicalVariables::NAMES) {
            if !seen.insert(name) {
                return Err(DoseError::SchemaMismatch(format!("duplicate column {name}")));
            }
        }
        let values = self.features.iter().flatten().chain(self.clinical.iter().flatten()).chain(&self.target);
        if values.clone().any(|v| !v.is_finite()) {
            return Err(DoseError::NonFiniteInput("training table"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Rows of `F[:, columns] ‖ C`.
    pub fn design(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.features
            .iter()
            .zip(&self.clinical)
            .map(|(f, c)| columns.iter().map(|&j| f[j]).chain(c.iter().copied()).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .map(String::as_str)
            .chain(ClinicalVariables::NAMES)
            .chain([TARGET_COLUMN])
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self.features[i]
                .iter()
                .chain(&self.clinical[i])
                .chain([&self.target[i]])
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Header row is mandatory; its last five columns must be the clinical
    /// variables followed by the target.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let tail: Vec<&str> = ClinicalVariables::NAMES.iter().copied().chain([TARGET_COLUMN]).collect();
        if header.len() < tail.len() || header[header.len() - tail.len()..] != tail[..] {
            return Err(DoseError::SchemaMismatch(format!("header must end with {}", tail.join(","))));
        }
        let d = header.len() - tail.len();
        let (mut features, mut clinical, mut target) = (Vec::new(), Vec::new(), Vec::new());
        for record in r.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| DoseError::SchemaMismatch(format!("not a number: {s:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            features.push(values[..d].to_vec());
            clinical.push([values[d], values[d + 1], values[d + 2], values[d + 3]]);
            target.push(values[d + 4]);
        }
        TrainingTable::new(header[..d].to_vec(), features, clinical, target)
    }
}
