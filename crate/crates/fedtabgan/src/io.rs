//! CSV readers and writers for patient matrices, code dictionaries, training
//! logs, metric exports and survey files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use fedtabgan_core::data::{CodeDictionary, DataError, PatientMatrix};
use fedtabgan_core::eval::{Category, EvalError, Histogram, Origin, ProbVector, SurveyKey, SurveyResponse};
use fedtabgan_core::gan::TrainLog;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    /// Row and column are 1-based; row counts data rows after the header.
    #[error("{path}: row {row}, column {col}: {message}")]
    Parse { path: PathBuf, row: usize, col: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: DataError },
    #[error("{path}: {source}")]
    Eval { path: PathBuf, source: EvalError },
}

impl IoError {
    /// True for malformed content, false for failures of the file system.
    pub fn is_validation(&self) -> bool {
        match self {
            IoError::File { .. } => false,
            IoError::Csv { source, .. } => !matches!(source.kind(), csv::ErrorKind::Io(_)),
            _ => true,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::File { path: path.into(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File { path: path.into(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.into(), source }
}

fn flush(mut w: impl Write, path: &Path) -> Result<(), IoError> {
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

/// Column indices `0, 1, ...` in the header mean "no labels".
fn index_header(cols: usize) -> Vec<String> {
    (0..cols).map(|c| c.to_string()).collect()
}

pub fn load_matrix(path: &Path) -> Result<PatientMatrix, IoError> {
    read_matrix(open(path)?, path)
}

/// Parses a header of feature codes followed by rows of `0`/`1` cells.
/// `path` only labels error messages.
pub fn read_matrix<R: Read>(reader: R, path: &Path) -> Result<PatientMatrix, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(IoError::Format { path: path.into(), message: "file is empty".into() }),
        Some(r) => r.map_err(csv_err(path))?,
    };
    let labels: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let cols = labels.len();
    let mut bits = Vec::new();
    let mut rows = 0;
    for record in records {
        let record = record.map_err(csv_err(path))?;
        let row = rows + 1;
        if record.len() != cols {
            return Err(IoError::Parse {
                path: path.into(),
                row,
                col: record.len().min(cols) + 1,
                message: format!("expected {cols} cells, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            match cell.trim() {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => {
                    return Err(IoError::Parse {
                        path: path.into(),
                        row,
                        col: c + 1,
                        message: format!("cell {other:?} is not 0 or 1"),
                    })
                }
            }
        }
        rows += 1;
    }
    let m = PatientMatrix::new(rows, cols, bits).map_err(|source| IoError::Data { path: path.into(), source })?;
    if labels == index_header(cols) {
        return Ok(m);
    }
    m.with_labels(labels).map_err(|source| IoError::Data { path: path.into(), source })
}

pub fn save_matrix(m: &PatientMatrix, path: &Path) -> Result<(), IoError> {
    let w = create(path)?;
    write_matrix(m, w, path)
}

/// Unlabelled matrices get a header of column indices.
pub fn write_matrix<W: Write>(m: &PatientMatrix, mut w: W, path: &Path) -> Result<(), IoError> {
    let io = |source| IoError::File { path: path.into(), source };
    let header = match m.labels() {
        Some(labels) => labels.join(","),
        None => index_header(m.cols()).join(","),
    };
    writeln!(w, "{header}").map_err(io)?;
    let mut line = Vec::with_capacity(2 * m.cols());
    for row in m.iter_rows() {
        line.clear();
        for (i, b) in row.iter().enumerate() {
            if i > 0 {
                line.push(b',');
            }
            line.push(b'0' + b);
        }
        line.push(b'\n');
        w.write_all(&line).map_err(io)?;
    }
    flush(w, path)
}

/// Two-column `code,description` CSV; a `code,description` header row is
/// optional.
pub fn load_dictionary(path: &Path) -> Result<CodeDictionary, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(open(path)?);
    let mut dict = CodeDictionary::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != 2 {
            return Err(IoError::Parse {
                path: path.into(),
                row: i + 1,
                col: record.len().min(2) + 1,
                message: "expected code,description".into(),
            });
        }
        let (code, desc) = (record[0].trim(), record[1].trim());
        if i == 0 && code.eq_ignore_ascii_case("code") && desc.eq_ignore_ascii_case("description") {
            continue;
        }
        dict.insert(code, desc).map_err(|source| IoError::Data { path: path.into(), source })?;
    }
    Ok(dict)
}

pub fn save_dictionary(dict: &CodeDictionary, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["code", "description"]).map_err(csv_err(path))?;
    for (code, desc) in dict.iter() {
        w.write_record([code, desc]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

/// `step,d_loss,g_loss,gp,elapsed_ms`; `gp` is empty without a penalty.
pub fn write_train_log(log: &TrainLog, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["step", "d_loss", "g_loss", "gp", "elapsed_ms"]).map_err(csv_err(path))?;
    for r in &log.records {
        let gp = r.gp.map(|g| g.to_string()).unwrap_or_default();
        w.write_record([r.step.to_string(), r.d_loss.to_string(), r.g_loss.to_string(), gp, r.elapsed_ms.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

/// `feature,real_prob,synth_prob`, one row per feature.
pub fn write_scatter(real: &ProbVector, synth: &ProbVector, labels: Option<&[String]>, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["feature", "real_prob", "synth_prob"]).map_err(csv_err(path))?;
    for (j, (p, q)) in real.as_slice().iter().zip(synth.as_slice()).enumerate() {
        let name = labels.map_or_else(|| j.to_string(), |l| l[j].clone());
        w.write_record([name, p.to_string(), q.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", h.edges[i], h.edges[i + 1], c));
    }
    out
}

pub fn write_text(text: &str, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.into(), source })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })
}

/// Reads an `id,origin` key file.
pub fn load_survey_key(path: &Path) -> Result<SurveyKey, IoError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut entries = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != 2 {
            return Err(IoError::Parse { path: path.into(), row: i + 1, col: 1, message: "expected id,origin".into() });
        }
        let origin = Origin::parse(&record[1])
            .map_err(|e| IoError::Parse { path: path.into(), row: i + 1, col: 2, message: e.to_string() })?;
        entries.push((record[0].trim().to_string(), origin));
    }
    SurveyKey::new(entries).map_err(|source| IoError::Eval { path: path.into(), source })
}

/// Reads an `id,category` response file; the rater is named after the
/// file stem.
pub fn load_survey_response(path: &Path) -> Result<SurveyResponse, IoError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut ratings = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != 2 {
            return Err(IoError::Parse { path: path.into(), row: i + 1, col: 1, message: "expected id,category".into() });
        }
        let cat = Category::parse(&record[1]).map_err(|source| IoError::Eval { path: path.into(), source })?;
        ratings.push((record[0].trim().to_string(), cat));
    }
    let rater = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(SurveyResponse { rater, ratings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PatientMatrix, IoError> {
        read_matrix(text.as_bytes(), Path::new("t.csv"))
    }

    #[test]
    fn labelled_fixture() {
        let m = parse("0389,51881\n1,0\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 2));
        assert_eq!(m.labels().unwrap(), ["0389", "51881"]);
        assert_eq!(m.row(0), [1, 0]);
    }

    #[test]
    fn bad_cell_location() {
        let text = "a,b,c\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n0,0,2\n";
        match parse(text).unwrap_err() {
            IoError::Parse { row, col, .. } => assert_eq!((row, col), (5, 3)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(parse("a,b\n1,0\n1\n").unwrap_err(), IoError::Parse { row: 2, .. }));
        assert!(matches!(parse("").unwrap_err(), IoError::Format { .. }));
    }

    #[test]
    fn index_header_means_unlabelled() {
        let m = parse("0,1,2\n1,0,1\n").unwrap();
        assert!(m.labels().is_none());
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf, Path::new("x")).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1,2\n1,0,1\n");
    }

    #[test]
    fn histogram_csv_shape() {
        let h = fedtabgan_core::eval::histogram(&[0.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(histogram_csv(&h), "bin_start,bin_end,count\n0,0.5,1\n0.5,1,2\n");
    }
}
