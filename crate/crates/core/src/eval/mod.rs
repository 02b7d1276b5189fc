//! Fidelity metrics over feature probabilities, privacy checks against the
//! training rows, and the blinded plausibility survey.

mod survey;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::PatientMatrix;

pub use survey::{
    make_survey_pack, tabulate_survey, Category, CountTable, Origin, SurveyEntry, SurveyKey, SurveyPack,
    SurveyResponse, SurveyTables, DEFAULT_PREAMBLE,
};

/// Similarity above `1 - DEFAULT_DISTANCE_THRESHOLD` flags a synthetic
/// patient as too close to a real one.
pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("correlation undefined: {0} vector has zero variance")]
    ZeroVariance(&'static str),
    #[error("probability {value} at index {index} is outside [0, 1]")]
    NotProbability { index: usize, value: f64 },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("{origin} source has {available} rows, need {needed}")]
    InsufficientRows { origin: &'static str, needed: usize, available: usize },
    #[error("unknown survey id {0:?}")]
    UnknownId(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("unknown origin {0:?}")]
    UnknownOrigin(String),
    #[error("survey id {0:?} appears more than once")]
    DuplicateId(String),
}

/// Per-feature probability of a one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EvalError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(EvalError::NotProbability { index, value });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn feature_probabilities(m: &PatientMatrix) -> Result<ProbVector, EvalError> {
    if m.rows() == 0 {
        return Err(EvalError::Empty("patient matrix"));
    }
    let mut counts = alloc::vec![0u64; m.cols()];
    for row in m.iter_rows() {
        for (c, b) in counts.iter_mut().zip(row) {
            *c += u64::from(*b);
        }
    }
    let n = m.rows() as f64;
    Ok(ProbVector(counts.into_iter().map(|c| c as f64 / n).collect()))
}

fn check_pair(p: &ProbVector, q: &ProbVector) -> Result<(), EvalError> {
    if p.len() != q.len() {
        return Err(EvalError::LengthMismatch { left: p.len(), right: q.len() });
    }
    if p.is_empty() {
        return Err(EvalError::Empty("probability vector"));
    }
    Ok(())
}

pub fn rmse(p: &ProbVector, q: &ProbVector) -> Result<f64, EvalError> {
    check_pair(p, q)?;
    let sum: f64 = p.0.iter().zip(&q.0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(sum / p.len() as f64))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Squared Pearson correlation.
pub fn r_squared(p: &ProbVector, q: &ProbVector) -> Result<f64, EvalError> {
    check_pair(p, q)?;
    let (mp, mq) = (mean(&p.0), mean(&q.0));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in p.0.iter().zip(&q.0) {
        let (dx, dy) = (a - mp, b - mq);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(EvalError::ZeroVariance("first"));
    }
    if syy == 0.0 {
        return Err(EvalError::ZeroVariance("second"));
    }
    // Clamp rounding excursions above one.
    Ok((sxy * sxy / (sxx * syy)).min(1.0))
}

/// `1 - SS_res / SS_tot` of `synth` against the identity line through
/// `real`. Unbounded below.
pub fn determination(real: &ProbVector, synth: &ProbVector) -> Result<f64, EvalError> {
    check_pair(real, synth)?;
    let m = mean(&real.0);
    let ss_tot: f64 = real.0.iter().map(|a| (a - m) * (a - m)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ZeroVariance("first"));
    }
    let ss_res: f64 = real.0.iter().zip(&synth.0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Equal-width histogram; every bin is `[lo, hi)` except the last, which
/// also includes its upper edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Bins span `[min, max]` of the values. When all values are equal the
/// range is widened to `[v - 0.5, v + 0.5]`.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<Histogram, EvalError> {
    if bin_count == 0 {
        return Err(EvalError::NoBins);
    }
    if values.is_empty() {
        return Err(EvalError::Empty("value list"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..=bin_count).map(|i| lo + width * i as f64).collect();
    edges[bin_count] = hi;
    let mut counts = alloc::vec![0u64; bin_count];
    for &v in values {
        // Start from the arithmetic guess and correct against the stored
        // edges so bin membership always agrees with them.
        let mut b = (((v - lo) / width) as usize).min(bin_count - 1);
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bin_count && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

fn check_widths(real: &PatientMatrix, synth: &PatientMatrix) -> Result<(), EvalError> {
    if real.cols() != synth.cols() {
        return Err(EvalError::WidthMismatch { left: real.cols(), right: synth.cols() });
    }
    Ok(())
}

/// Number of real rows that appear verbatim among the synthetic rows.
pub fn exact_duplicates(real: &PatientMatrix, synth: &PatientMatrix) -> Result<usize, EvalError> {
    check_widths(real, synth)?;
    let set: hashbrown::HashSet<&[u8]> = synth.iter_rows().collect();
    Ok(real.iter_rows().filter(|r| set.contains(r)).count())
}

struct Packed {
    words: usize,
    bits: Vec<u64>,
    ones: Vec<u32>,
}

impl Packed {
    fn new(m: &PatientMatrix) -> Self {
        let words = m.cols().div_ceil(64);
        let mut bits = alloc::vec![0u64; words * m.rows()];
        let mut ones = Vec::with_capacity(m.rows());
        for (r, row) in m.iter_rows().enumerate() {
            let dst = &mut bits[r * words..(r + 1) * words];
            for (c, b) in row.iter().enumerate() {
                dst[c / 64] |= u64::from(*b) << (c % 64);
            }
            ones.push(dst.iter().map(|w| w.count_ones()).sum());
        }
        Self { words, bits, ones }
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }
}

/// For every real row, `1 - max cosine similarity` to any synthetic row.
///
/// An all-zero row has no direction: it is at distance 1 from every nonzero
/// row and 0 from another all-zero row.
pub fn min_cosine_distances(real: &PatientMatrix, synth: &PatientMatrix) -> Result<Vec<f64>, EvalError> {
    check_widths(real, synth)?;
    if synth.rows() == 0 {
        return Err(EvalError::Empty("synthetic set"));
    }
    let (pr, ps) = (Packed::new(real), Packed::new(synth));
    let synth_has_zero = ps.ones.contains(&0);
    let zero_real = pr.ones.iter().filter(|n| **n == 0).count();
    let zero_synth = ps.ones.iter().filter(|n| **n == 0).count();
    if zero_real + zero_synth > 0 {
        log::warn!("{zero_real} real and {zero_synth} synthetic rows have no ones; using the zero-row distance convention");
    }
    let out = (0..real.rows())
        .map(|r| {
            let na = pr.ones[r];
            if na == 0 {
                return if synth_has_zero { 0.0 } else { 1.0 };
            }
            let a = pr.row(r);
            let mut best = 0.0f64;
            for s in 0..synth.rows() {
                let nb = ps.ones[s];
                if nb == 0 {
                    continue;
                }
                let dot: u32 = a.iter().zip(ps.row(s)).map(|(x, y)| (x & y).count_ones()).sum();
                if dot == 0 {
                    continue;
                }
                let sim = f64::from(dot) / libm::sqrt(f64::from(na) * f64::from(nb));
                if sim > best {
                    best = sim;
                }
            }
            (1.0 - best).max(0.0)
        })
        .collect();
    Ok(out)
}

/// Entries strictly below `distance_threshold`.
pub fn threshold_violations(distances: &[f64], distance_threshold: f64) -> usize {
    distances.iter().filter(|d| **d < distance_threshold).count()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some((m, libm::sqrt(var)))
}

/// Fidelity and privacy summary of one synthetic cohort.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub real_rows: usize,
    pub synth_rows: usize,
    pub features: usize,
    pub r_squared: f64,
    /// Fit against the identity line; see [`determination`].
    pub determination: f64,
    pub rmse: f64,
    pub duplicate_count: usize,
    pub min_cos_distance_mean: f64,
    pub min_cos_distance_std: f64,
    pub distance_threshold: f64,
    pub threshold_violation_count: usize,
    pub histogram: Histogram,
    pub real_probs: ProbVector,
    pub synth_probs: ProbVector,
}

pub fn evaluate(
    real: &PatientMatrix,
    synth: &PatientMatrix,
    bin_count: usize,
    distance_threshold: f64,
) -> Result<EvalReport, EvalError> {
    check_widths(real, synth)?;
    let real_probs = feature_probabilities(real)?;
    let synth_probs = feature_probabilities(synth)?;
    let distances = min_cosine_distances(real, synth)?;
    let (mean, std) = mean_std(&distances).expect("real matrix is non-empty");
    Ok(EvalReport {
        real_rows: real.rows(),
        synth_rows: synth.rows(),
        features: real.cols(),
        r_squared: r_squared(&real_probs, &synth_probs)?,
        determination: determination(&real_probs, &synth_probs)?,
        rmse: rmse(&real_probs, &synth_probs)?,
        duplicate_count: exact_duplicates(real, synth)?,
        min_cos_distance_mean: mean,
        min_cos_distance_std: std,
        distance_threshold,
        threshold_violation_count: threshold_violations(&distances, distance_threshold),
        histogram: histogram(&distances, bin_count)?,
        real_probs,
        synth_probs,
    })
}

impl EvalReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "real_rows: {}\nsynth_rows: {}\nfeatures: {}\nr_squared: {:.6}\ndetermination: {:.6}\nrmse: {:.6}\n\
             duplicates: {}\nmean_min_cos_distance: {:.6}\nstd_min_cos_distance: {:.6}\n\
             distance_threshold: {}\nthreshold_violations: {}\nhistogram_bins: {}\n",
            self.real_rows,
            self.synth_rows,
            self.features,
            self.r_squared,
            self.determination,
            self.rmse,
            self.duplicate_count,
            self.min_cos_distance_mean,
            self.min_cos_distance_std,
            self.distance_threshold,
            self.threshold_violation_count,
            self.histogram.counts.len(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn pm(rows: &[&[u8]]) -> PatientMatrix {
        PatientMatrix::from_rows(rows[0].len(), rows).unwrap()
    }

    #[test]
    fn probabilities_by_column() {
        assert_eq!(feature_probabilities(&pm(&[&[1, 0], &[1, 1]])).unwrap(), pv(&[1.0, 0.5]));
        assert_eq!(feature_probabilities(&pm(&[&[1, 1, 1]])).unwrap(), pv(&[1.0, 1.0, 1.0]));
        assert!(feature_probabilities(&PatientMatrix::zeros(0, 3)).is_err());
        assert!(ProbVector::new(vec![1.5]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&pv(&[0.0, 1.0]), &pv(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(rmse(&pv(&[0.3, 0.2]), &pv(&[0.3, 0.2])).unwrap(), 0.0);
        assert!(rmse(&pv(&[0.3]), &pv(&[0.3, 0.2])).is_err());
    }

    #[test]
    fn r_squared_examples() {
        let r2 = r_squared(&pv(&[0.0, 0.5, 1.0]), &pv(&[0.0, 1.0, 1.0])).unwrap();
        assert!((r2 - 0.75).abs() < 1e-12);
        let p = pv(&[0.1, 0.4, 0.2, 0.9]);
        let q = pv(&[0.35, 0.5, 0.4, 0.75]);
        assert!((r_squared(&p, &q).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(r_squared(&pv(&[0.2, 0.2]), &p.clone()), Err(EvalError::LengthMismatch { .. })));
        assert_eq!(r_squared(&pv(&[0.2, 0.2]), &pv(&[0.1, 0.3])), Err(EvalError::ZeroVariance("first")));
    }

    #[test]
    fn determination_is_one_only_on_the_identity_line() {
        let p = pv(&[0.1, 0.4, 0.2]);
        assert_eq!(determination(&p, &p).unwrap(), 1.0);
        let shifted = pv(&[0.2, 0.5, 0.3]);
        assert!(determination(&p, &shifted).unwrap() < 1.0);
    }

    #[test]
    fn histogram_right_closed() {
        let h = histogram(&[0.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(h.counts, [1, 2]);
        assert_eq!(h.edges, [0.0, 0.5, 1.0]);
        assert!(histogram(&[], 2).is_err());
        assert!(histogram(&[1.0], 0).is_err());
        assert_eq!(histogram(&[0.3, 0.3], 3).unwrap().counts, [0, 2, 0]);
    }

    #[test]
    fn duplicates() {
        let real = pm(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1], &[1, 1, 0]]);
        let disjoint = pm(&[&[1, 1, 1], &[0, 0, 0]]);
        assert_eq!(exact_duplicates(&real, &disjoint).unwrap(), 0);
        let planted = pm(&[&[1, 1, 1], &[0, 1, 0], &[1, 0, 0], &[1, 1, 0], &[1, 1, 0]]);
        assert_eq!(exact_duplicates(&real, &planted).unwrap(), 3);
        assert_eq!(exact_duplicates(&real, &real).unwrap(), 4);
        assert!(exact_duplicates(&real, &PatientMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn cosine_examples() {
        let d = min_cosine_distances(&pm(&[&[1, 1, 0]]), &pm(&[&[1, 0, 1]])).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15);
        let d = min_cosine_distances(&pm(&[&[1, 0, 0]]), &pm(&[&[0, 1, 0], &[0, 0, 1]])).unwrap();
        assert_eq!(d, [1.0]);
        let d = min_cosine_distances(&pm(&[&[1, 0, 1], &[0, 1, 1]]), &pm(&[&[0, 0, 1], &[1, 0, 1]])).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(min_cosine_distances(&pm(&[&[1]]), &PatientMatrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn zero_row_convention() {
        let zero = pm(&[&[0, 0]]);
        assert_eq!(min_cosine_distances(&zero, &pm(&[&[1, 0]])).unwrap(), [1.0]);
        assert_eq!(min_cosine_distances(&zero, &pm(&[&[1, 0], &[0, 0]])).unwrap(), [0.0]);
        assert_eq!(min_cosine_distances(&pm(&[&[0, 1]]), &zero).unwrap(), [1.0]);
    }

    #[test]
    fn violations() {
        assert_eq!(threshold_violations(&[0.05, 0.5, 0.09], 0.1), 2);
        assert_eq!(threshold_violations(&[0.1, 0.5], 0.1), 0);
        assert_eq!(threshold_violations(&[0.0, 0.5], 0.0), 0);
    }

    #[test]
    fn report_on_identical_cohorts() {
        let m = pm(&[&[1, 0, 1], &[0, 1, 0], &[1, 1, 0]]);
        let r = evaluate(&m, &m, 4, DEFAULT_DISTANCE_THRESHOLD).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(r.duplicate_count, 3);
        assert_eq!(r.threshold_violation_count, 3);
        assert_eq!(r.histogram.counts.iter().sum::<u64>(), 3);
        let text = r.to_text();
        for key in ["r_squared:", "rmse:", "duplicates:", "mean_min_cos_distance:"] {
            assert!(text.contains(key), "{key}");
        }
    }
}
