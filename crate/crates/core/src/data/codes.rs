use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{DataError, PatientMatrix};

/// ICD-9 code to human-readable description.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CodeDictionary {
    entries: BTreeMap<String, String>,
}

impl CodeDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; a code may appear only once.
    pub fn insert(&mut self, code: impl Into<String>, description: impl Into<String>) -> Result<(), DataError> {
        let code = code.into();
        if self.entries.contains_key(&code) {
            return Err(DataError::DuplicateCode(code));
        }
        self.entries.insert(code, description.into());
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// A small set of frequent ICU diagnosis codes.
    pub fn common_icu() -> Self {
        let mut dict = Self::new();
        for (code, desc) in COMMON_ICU_CODES {
            dict.insert(*code, *desc).expect("table has unique codes");
        }
        dict
    }
}

/// Frequent ICD-9 diagnoses in adult ICU cohorts, with their short titles.
pub const COMMON_ICU_CODES: &[(&str, &str)] = &[
    ("4019", "Hypertension NOS"),
    ("4280", "CHF NOS"),
    ("42731", "Atrial fibrillation"),
    ("41401", "Crnry athrscl natve vssl"),
    ("5849", "Acute kidney failure NOS"),
    ("25000", "DMII wo cmp nt st uncntr"),
    ("2724", "Hyperlipidemia NEC/NOS"),
    ("51881", "Acute respiratry failure"),
    ("5990", "Urin tract infection NOS"),
    ("53081", "Esophageal reflux"),
    ("2720", "Pure hypercholesterolem"),
    ("V053", "Need prphyl vc vrl hepat"),
    ("V290", "NB obsrv suspct infect"),
    ("2859", "Anemia NOS"),
    ("2449", "Hypothyroidism NOS"),
    ("486", "Pneumonia, organism NOS"),
    ("2851", "Ac posthemorrhag anemia"),
    ("2762", "Acidosis"),
    ("496", "Chr airway obstruct NEC"),
    ("99592", "Severe sepsis"),
    ("0389", "Septicemia NOS"),
    ("5070", "Food/vomit pneumonitis"),
    ("V5861", "Long-term use anticoagul"),
    ("412", "Old myocardial infarct"),
    ("2875", "Thrombocytopenia NOS"),
    ("40390", "Hy kid NOS w cr kid I-IV"),
    ("5859", "Chronic kidney dis NOS"),
    ("78552", "Septic shock"),
    ("3051", "Tobacco use disorder"),
    ("311", "Depressive disorder NEC"),
    ("2761", "Hyposmolality"),
    ("42789", "Cardiac dysrhythmias NEC"),
];

/// Descriptions of every diagnosis present in `row`, in feature order.
///
/// Features without a dictionary entry are rendered as their raw code; a
/// matrix without labels uses the column index as the code.
pub fn describe_patient(matrix: &PatientMatrix, row: usize, dict: &CodeDictionary) -> Result<Vec<String>, DataError> {
    if row >= matrix.rows() {
        return Err(DataError::RowOutOfRange { row, rows: matrix.rows() });
    }
    let out = matrix
        .row(row)
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == 1)
        .map(|(col, _)| {
            let code = match matrix.labels() {
                Some(labels) => labels[col].clone(),
                None => col.to_string(),
            };
            dict.get(&code).map(ToString::to_string).unwrap_or(code)
        })
        .collect();
    Ok(out)
}
