//! Observational data: CSV ingestion, validation and standardization.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// An `n × p` all-numeric sample matrix with named columns, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl DataMatrix {
    /// Builds a matrix from columns, validating shape, finiteness and names.
    ///
    /// A single column is accepted: discovery on one variable is a no-op
    /// rather than an error.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::Dimension("no columns".into()));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        let mut seen = HashSet::new();
        for (j, (name, col)) in names.iter().zip(&columns).enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
            if col.len() != n {
                return Err(Error::Dimension(format!(
                    "column {name:?} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, column: j });
            }
        }
        Ok(Self { columns, names })
    }

    /// Builds a matrix with generated names `x1..xp`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=columns.len()).map(|i| format!("x{i}")).collect();
        Self::new(names, columns)
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps the listed columns, in the given order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        Self::new(names, columns)
    }

    /// Centers every column and scales it to unit sample standard deviation.
    pub fn standardize(&self) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .zip(&self.names)
            .map(|(col, name)| {
                let (mean, sd) = mean_sd(col);
                if sd.is_nan() || sd <= 0.0 || sd < f64::EPSILON * mean.abs().max(1.0) {
                    return Err(Error::ZeroVariance(name.clone()));
                }
                Ok(col.iter().map(|v| (v - mean) / sd).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns,
            names: self.names.clone(),
        })
    }

    /// Writes the matrix as CSV with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.names)?;
        let mut record = Vec::with_capacity(self.p());
        for i in 0..self.n() {
            record.clear();
            record.extend(self.columns.iter().map(|c| format!("{:?}", c[i])));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Loads a headered, comma-separated numeric file.
///
/// Constant columns are rejected here because they cannot be standardized
/// and carry no information for independence testing.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Parses CSV from any reader; row numbers in errors are 1-based and count
/// the header as row 1.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut columns = vec![Vec::new(); names.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != names.len() {
            return Err(Error::Parse {
                row,
                column: record.len().min(names.len()) + 1,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("{cell:?} is not finite"),
                });
            }
            columns[j].push(value);
        }
    }
    let m = DataMatrix::new(names, columns)?;
    for (col, name) in m.columns.iter().zip(&m.names) {
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::ZeroVariance(name.clone()));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<DataMatrix> {
        read_csv(s.as_bytes())
    }

    #[test]
    fn loads_three_columns() {
        let m = parse("a,b,c\n1,2,3\n4,5,6\n7,8,9.5\n1,0,0\n2,2,2\n").unwrap();
        assert_eq!((m.n(), m.p()), (5, 3));
        assert_eq!(m.names(), ["a", "b", "c"]);
        assert_eq!(m.column(2), [3.0, 6.0, 9.5, 0.0, 2.0]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        match parse("a,b\n1,2\n3,oops\n").unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_header_rejected() {
        assert!(matches!(
            parse("a,a\n1,2\n3,4\n").unwrap_err(),
            Error::DuplicateName(n) if n == "a"
        ));
    }

    #[test]
    fn constant_column_rejected_on_load() {
        assert!(matches!(
            parse("a,b\n1,5\n2,5\n3,5\n").unwrap_err(),
            Error::ZeroVariance(n) if n == "b"
        ));
    }

    #[test]
    fn standardize_simple_column() {
        let m = DataMatrix::from_columns(vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 5.0]]).unwrap();
        let s = m.standardize().unwrap();
        let (mean, sd) = mean_sd(s.column(0));
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
        assert!((s.column(0)[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_rejects_constant() {
        let m = DataMatrix::from_columns(vec![vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(m.standardize(), Err(Error::ZeroVariance(n)) if n == "x1"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m =
            DataMatrix::from_columns(vec![vec![0.1, -2.5e-7, 3.0], vec![1.0 / 3.0, 2.0, 1e300]])
                .unwrap();
        let mut buf = Vec::new();
        m.write_csv_to(&mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(col in prop::collection::vec(-1e3f64..1e3, 3..40)) {
            prop_assume!(mean_sd(&col).1 > 1e-3);
            let m = DataMatrix::from_columns(vec![col.clone(), col]).unwrap();
            let once = m.standardize().unwrap();
            let twice = once.standardize().unwrap();
            let (mean, sd) = mean_sd(once.column(0));
            prop_assert!(mean.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
            for (a, b) in once.column(0).iter().zip(twice.column(0)) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
