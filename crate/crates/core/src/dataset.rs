//! Binary sample matrix with named columns.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An M×N matrix of booleans with unique column labels. Columns are stored
/// column-major since the algorithms consume whole columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    m: usize,
    labels: Vec<String>,
    columns: Vec<Vec<bool>>,
}

impl BinaryDataset {
    pub fn from_columns(labels: Vec<String>, columns: Vec<Vec<bool>>) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::Mismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let unique: std::collections::BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::Parameter("duplicate column labels".into()));
        }
        let m = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::Mismatch("columns have unequal lengths".into()));
        }
        Ok(Self { m, labels, columns })
    }

    /// Number of rows (samples).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of columns (variables).
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, idx: usize) -> &[bool] {
        &self.columns[idx]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn value(&self, row: usize, col: usize) -> bool {
        self.columns[col][row]
    }

    /// Keep the given columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        let labels = keep
            .iter()
            .map(|&i| {
                self.labels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Parameter(format!("column index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let columns = keep.iter().map(|&i| self.columns[i].clone()).collect();
        Self::from_columns(labels, columns)
    }

    /// Dense 0.0/1.0 matrix of shape m×n, the X of the continuous solvers.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n(), |r, c| {
            if self.columns[c][r] {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.labels)?;
        for r in 0..self.m {
            let row: Vec<&str> = self
                .columns
                .iter()
                .map(|c| if c[r] { "1" } else { "0" })
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let labels: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let n = labels.len();
        let mut columns: Vec<Vec<bool>> = vec![Vec::new(); n];
        for (row_idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != n {
                return Err(Error::Parse(format!(
                    "row {row_idx} has {} cells, expected {n}",
                    rec.len()
                )));
            }
            for (c, cell) in rec.iter().enumerate() {
                match cell.trim() {
                    "0" => columns[c].push(false),
                    "1" => columns[c].push(true),
                    other => {
                        return Err(Error::Parse(format!(
                            "dataset must contain 0/1, got '{other}' at row {row_idx}"
                        )))
                    }
                }
            }
        }
        Self::from_columns(labels, columns)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
