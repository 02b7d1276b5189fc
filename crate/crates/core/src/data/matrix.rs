use alloc::string::String;
use alloc::vec::Vec;

use super::DataError;
use crate::linalg::Matrix;

/// Dense binary patient-by-diagnosis matrix, one byte per cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatientMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    labels: Option<Vec<String>>,
}

/// Read access to patient rows. Training reads its data only through this
/// trait, which lets tests observe exactly which rows were touched.
pub trait RowSource {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn row(&self, index: usize) -> &[u8];
}

impl PatientMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self, DataError> {
        if bits.len() != rows * cols {
            return Err(DataError::Length { expected: rows * cols, found: bits.len() });
        }
        if let Some(pos) = bits.iter().position(|b| *b > 1) {
            return Err(DataError::NonBinary { row: pos / cols, col: pos % cols, value: u32::from(bits[pos]) });
        }
        Ok(Self { rows, cols, bits, labels: None })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: alloc::vec![0; rows * cols], labels: None }
    }

    /// Builds a matrix from equal-length rows of 0/1 values.
    pub fn from_rows<R: AsRef<[u8]>>(cols: usize, rows: &[R]) -> Result<Self, DataError> {
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(DataError::Ragged { row: r, expected: cols, found: row.len() });
            }
            bits.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, bits)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, DataError> {
        if labels.len() != self.cols {
            return Err(DataError::LabelCount { expected: self.cols, found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, index: usize) -> &[u8] {
        &self.bits[index * self.cols..(index + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// New matrix holding the given rows in order; labels carry over.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            bits.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, bits, labels: self.labels.clone() }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b == 1).count()
    }

    /// Number of distinct rows.
    pub fn distinct_rows(&self) -> usize {
        let mut set = hashbrown::HashSet::with_capacity(self.rows);
        for row in self.iter_rows() {
            set.insert(row);
        }
        set.len()
    }
}

impl RowSource for PatientMatrix {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn row(&self, index: usize) -> &[u8] {
        PatientMatrix::row(self, index)
    }
}

/// Maps 0 to -1 and 1 to +1.
pub fn encode_pm1(matrix: &PatientMatrix) -> Matrix {
    Matrix::from_vec(matrix.rows(), matrix.cols(), matrix.as_bytes().iter().map(|b| pm1(*b)).collect())
}

/// ±1 encoding of selected rows of any row source.
pub fn encode_rows_pm1<S: RowSource + ?Sized>(source: &S, indices: &[usize]) -> Matrix {
    let cols = source.n_cols();
    let mut data = Vec::with_capacity(indices.len() * cols);
    for &i in indices {
        data.extend(source.row(i).iter().map(|b| pm1(*b)));
    }
    Matrix::from_vec(indices.len(), cols, data)
}

#[inline]
fn pm1(b: u8) -> f64 {
    if b == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Cells strictly above `threshold` become 1, everything else 0.
pub fn binarize(values: &Matrix, threshold: f64) -> PatientMatrix {
    let bits = values.as_slice().iter().map(|v| u8::from(*v > threshold)).collect();
    PatientMatrix { rows: values.rows(), cols: values.cols(), bits, labels: None }
}
