use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::EvalError;
use crate::data::{describe_patient, CodeDictionary, PatientMatrix};
use crate::rng;

const SAMPLE_STREAM: u64 = 0xFFFF_0010;
const SHUFFLE_STREAM: u64 = 0xFFFF_0011;

/// Instructions printed at the top of a survey pack.
pub const DEFAULT_PREAMBLE: &str = "\
Each numbered entry below lists the recorded diagnoses of one intensive-care patient.
Please read every entry and choose the one category from the scale that best matches
how clinically believable you find that combination of diagnoses.
Entries appear in random order and carry no hint of where they came from.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Real,
    SingleGan,
    FederatedGan,
}

impl Origin {
    pub const ALL: [Origin; 3] = [Origin::Real, Origin::SingleGan, Origin::FederatedGan];

    pub fn name(self) -> &'static str {
        match self {
            Origin::Real => "real",
            Origin::SingleGan => "single_gan",
            Origin::FederatedGan => "federated_gan",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EvalError> {
        Self::ALL.into_iter().find(|o| o.name() == s.trim()).ok_or_else(|| EvalError::UnknownOrigin(s.to_string()))
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    HighlyPlausible,
    Plausible,
    SlightlyPlausible,
    SlightlyImplausible,
    Implausible,
    HighlyImplausible,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::HighlyPlausible,
        Category::Plausible,
        Category::SlightlyPlausible,
        Category::SlightlyImplausible,
        Category::Implausible,
        Category::HighlyImplausible,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::HighlyPlausible => "Highly Plausible",
            Category::Plausible => "Plausible",
            Category::SlightlyPlausible => "Slightly Plausible",
            Category::SlightlyImplausible => "Slightly Implausible",
            Category::Implausible => "Implausible",
            Category::HighlyImplausible => "Highly Implausible",
        }
    }

    /// Case-insensitive match on the label.
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| EvalError::UnknownCategory(s.to_string()))
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyEntry {
    pub id: String,
    pub diagnoses: Vec<String>,
}

/// Hidden mapping from survey id to origin.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SurveyKey {
    entries: Vec<(String, Origin)>,
}

impl SurveyKey {
    pub fn new(entries: Vec<(String, Origin)>) -> Result<Self, EvalError> {
        {
            let mut seen = hashbrown::HashSet::new();
            if let Some((id, _)) = entries.iter().find(|(id, _)| !seen.insert(id.as_str())) {
                return Err(EvalError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn origin(&self, id: &str) -> Option<Origin> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, o)| *o)
    }

    pub fn entries(&self) -> &[(String, Origin)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `id,origin` CSV with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,origin\n");
        for (id, origin) in &self.entries {
            out.push_str(&format!("{id},{}\n", origin.name()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyPack {
    pub preamble: String,
    pub entries: Vec<SurveyEntry>,
    pub key: SurveyKey,
}

impl SurveyPack {
    /// Human-readable pack: preamble, rating scale, then one block per
    /// entry. Contains nothing about origins.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(self.preamble.trim_end());
        out.push_str("\n\nScale:\n");
        for c in Category::ALL {
            out.push_str(&format!("  - {}\n", c.label()));
        }
        for e in &self.entries {
            out.push_str(&format!("\n[{}]\n", e.id));
            if e.diagnoses.is_empty() {
                out.push_str("  (no recorded diagnoses)\n");
            }
            for d in &e.diagnoses {
                out.push_str(&format!("  - {d}\n"));
            }
            out.push_str("  Rating: ____\n");
        }
        out
    }
}

/// Samples `n_per_group` rows from each cohort without replacement,
/// describes them with `dict`, shuffles the lot and assigns ids
/// `P01`, `P02`, ... in presentation order.
pub fn make_survey_pack(
    real: &PatientMatrix,
    single_synth: &PatientMatrix,
    fed_synth: &PatientMatrix,
    n_per_group: usize,
    dict: &CodeDictionary,
    seed: u64,
    preamble: &str,
) -> Result<SurveyPack, EvalError> {
    let sources = [(Origin::Real, real), (Origin::SingleGan, single_synth), (Origin::FederatedGan, fed_synth)];
    let mut pool: Vec<(Origin, Vec<String>)> = Vec::with_capacity(3 * n_per_group);
    for (origin, m) in sources {
        if m.rows() < n_per_group {
            return Err(EvalError::InsufficientRows { origin: origin.name(), needed: n_per_group, available: m.rows() });
        }
        let picks = rng::permutation(&mut rng::stream(seed, SAMPLE_STREAM + origin.index() as u64), m.rows());
        for &row in &picks[..n_per_group] {
            pool.push((origin, describe_patient(m, row, dict).expect("row drawn from range")));
        }
    }
    let order = rng::permutation(&mut rng::stream(seed, SHUFFLE_STREAM), pool.len());
    let width = pool.len().to_string().len().max(2);
    let mut entries = Vec::with_capacity(pool.len());
    let mut key = Vec::with_capacity(pool.len());
    for (i, &src) in order.iter().enumerate() {
        let id = format!("P{:0width$}", i + 1);
        let (origin, diagnoses) = &pool[src];
        key.push((id.clone(), *origin));
        entries.push(SurveyEntry { id, diagnoses: diagnoses.clone() });
    }
    Ok(SurveyPack { preamble: preamble.to_string(), entries, key: SurveyKey::new(key)? })
}

/// One rater's answers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SurveyResponse {
    pub rater: String,
    pub ratings: Vec<(String, Category)>,
}

/// Counts indexed `[origin][category]`.
pub type CountTable = [[u64; 6]; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyTables {
    pub per_rater: Vec<(String, CountTable)>,
    pub pooled: CountTable,
}

impl SurveyTables {
    /// Long-form CSV `rater,origin,category,count`; the pooled table uses
    /// rater `pooled`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rater,origin,category,count\n");
        let tables = self.per_rater.iter().map(|(r, t)| (r.as_str(), t)).chain([("pooled", &self.pooled)]);
        for (rater, table) in tables {
            for o in Origin::ALL {
                for c in Category::ALL {
                    out.push_str(&format!("{rater},{},{},{}\n", o.name(), c.label(), table[o.index()][c.index()]));
                }
            }
        }
        out
    }
}

pub fn tabulate_survey(responses: &[SurveyResponse], key: &SurveyKey) -> Result<SurveyTables, EvalError> {
    let mut pooled = [[0u64; 6]; 3];
    let mut per_rater = Vec::with_capacity(responses.len());
    for resp in responses {
        let mut table = [[0u64; 6]; 3];
        for (id, cat) in &resp.ratings {
            let origin = key.origin(id).ok_or_else(|| EvalError::UnknownId(id.clone()))?;
            table[origin.index()][cat.index()] += 1;
            pooled[origin.index()][cat.index()] += 1;
        }
        per_rater.push((resp.rater.clone(), table));
    }
    Ok(SurveyTables { per_rater, pooled })
}
