//! Column-major numeric tables with one designated target column.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::error::DatasetError;

/// Input columns plus a target vector, all of equal length `n >= 1`.
///
/// Every stored value is finite; ingestion drops rows that are not.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target_name: String,
    target: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset and validates lengths, names and finiteness.
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target_name: impl Into<String>,
        target: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        let target_name = target_name.into();
        let n = target.len();
        if n == 0 {
            return Err(DatasetError::Empty);
        }
        assert_eq!(names.len(), columns.len(), "one name per column");
        let mut seen = HashSet::new();
        for name in names.iter().chain(std::iter::once(&target_name)) {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateName(name.clone()));
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(DatasetError::LengthMismatch {
                    name: name.clone(),
                    expected: n,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { name: name.clone(), row });
            }
        }
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { name: target_name, row });
        }
        Ok(Dataset {
            names,
            columns,
            target_name,
            target,
        })
    }

    /// Columns named `x1..xd`, target named `y`.
    pub fn from_columns(columns: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self, DatasetError> {
        let names = (1..=columns.len()).map(|i| format!("x{i}")).collect();
        Dataset::new(names, columns, "y", target)
    }

    /// Reads CSV with a header row. The target defaults to the last column.
    /// Returns the dataset and the number of rows dropped for holding
    /// non-finite values.
    pub fn from_csv_reader<R: Read>(reader: R, target: Option<&str>) -> Result<(Self, usize), DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(DatasetError::TooFewColumns);
        }
        let target_idx = match target {
            Some(t) => header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| DatasetError::MissingTarget(t.to_string()))?,
            None => header.len() - 1,
        };
        let mut columns = vec![Vec::new(); header.len()];
        let mut rejected = 0;
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let mut values = Vec::with_capacity(header.len());
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| DatasetError::BadNumber {
                    row: row + 1,
                    field: field.to_string(),
                })?;
                values.push(v);
            }
            if values.iter().any(|v| !v.is_finite()) {
                rejected += 1;
                continue;
            }
            for (col, v) in columns.iter_mut().zip(values) {
                col.push(v);
            }
        }
        let target_col = columns.remove(target_idx);
        let mut names = header;
        let target_name = names.remove(target_idx);
        Ok((Dataset::new(names, columns, target_name, target_col)?, rejected))
    }

    pub fn from_csv_path(path: impl AsRef<Path>, target: Option<&str>) -> Result<(Self, usize), DatasetError> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file), target)
    }

    /// Writes the inputs followed by the target column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| c[i])
                .chain(std::iter::once(self.target[i]))
                .map(|v| format!("{v:?}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Number of input columns.
    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Same inputs with a replacement target.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self, DatasetError> {
        Dataset::new(self.names.clone(), self.columns.clone(), self.target_name.clone(), target)
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let pick = |col: &Vec<f64>| indices.iter().map(|&i| col[i]).collect::<Vec<_>>();
        Dataset::new(
            self.names.clone(),
            self.columns.iter().map(pick).collect(),
            self.target_name.clone(),
            pick(&self.target),
        )
    }
}
