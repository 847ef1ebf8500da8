use std::path::Path;

use super::aggregate::{check_contiguous, WeeklyTable};
use super::schema::{all_columns, FeatureSetId};
use crate::fsutil::write_atomic;
use crate::ingestion::WeekKey;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Week-indexed feature rows with named columns. `None` marks a missing
/// cell; the tree learner routes it natively.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub weeks: Vec<WeekKey>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<Option<T>> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Sub-matrix with the named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix<T>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::domain(format!("feature matrix has no column {n:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            weeks: self.weeks.clone(),
            columns: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        })
    }

    pub fn select_set(&self, set: FeatureSetId) -> Result<FeatureMatrix<T>> {
        self.select(&set.columns())
    }

    /// Rows for the given weeks, in that order.
    pub fn align_to(&self, weeks: &[WeekKey]) -> Result<FeatureMatrix<T>> {
        let rows = weeks
            .iter()
            .map(|w| {
                self.weeks
                    .binary_search(w)
                    .map(|i| self.rows[i].clone())
                    .map_err(|_| Error::domain(format!("feature matrix has no row for {w}")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            weeks: weeks.to_vec(),
            columns: self.columns.clone(),
            rows,
        })
    }

    /// Rows `idx` in order.
    pub fn take_rows(&self, idx: &[usize]) -> Vec<Vec<Option<T>>> {
        idx.iter().map(|&i| self.rows[i].clone()).collect()
    }

    /// CSV: `iso_week` then the column names; missing cells are empty.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iso_week".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (week, row) in self.weeks.iter().zip(&self.rows) {
            let mut rec = vec![week.to_string()];
            rec.extend(row.iter().map(|c| c.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::domain(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv_bytes()?)
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix<T>> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::MissingInput(vec![path.to_path_buf()]),
            _ => Error::Csv(e),
        })?;
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("iso_week") {
            return Err(Error::domain(format!("{}: first column must be iso_week", path.display())));
        }
        let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut weeks = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            weeks.push(rec[0].parse()?);
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(|x| Some(T::of(x)))
                            .map_err(|_| Error::domain(format!("bad cell {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(FeatureMatrix { weeks, columns, rows })
    }
}

/// Full 31-column matrix over the table's weeks.
pub fn full_feature_matrix(table: &WeeklyTable) -> Result<FeatureMatrix<f64>> {
    let cols = all_columns();
    let weeks: Vec<WeekKey> = table
        .values()
        .next()
        .map(|rows| rows.iter().map(|r| r.week).collect())
        .unwrap_or_default();
    check_contiguous(&weeks)?;
    let mut rows = vec![Vec::with_capacity(cols.len()); weeks.len()];
    for (model, kind, _) in &cols {
        let aggs = table
            .get(model)
            .ok_or_else(|| Error::domain(format!("weekly table lacks {model}")))?;
        if aggs.len() != weeks.len() || aggs.iter().zip(&weeks).any(|(a, w)| a.week != *w) {
            return Err(Error::domain(format!("weekly table rows for {model} not aligned")));
        }
        for (row, agg) in rows.iter_mut().zip(aggs) {
            row.push(agg.value(*kind));
        }
    }
    Ok(FeatureMatrix {
        weeks,
        columns: cols.into_iter().map(|c| c.2).collect(),
        rows,
    })
}

/// Columns of `set_id`, one row per label week. Label weeks outside the
/// table's range get all-missing rows.
pub fn assemble_feature_matrix(
    table: &WeeklyTable,
    set_id: FeatureSetId,
    label_weeks: &[WeekKey],
) -> Result<FeatureMatrix<f64>> {
    let full = full_feature_matrix(table)?.select_set(set_id)?;
    let rows = label_weeks
        .iter()
        .map(|w| match full.weeks.binary_search(w) {
            Ok(i) => full.rows[i].clone(),
            Err(_) => vec![None; full.columns.len()],
        })
        .collect();
    Ok(FeatureMatrix {
        weeks: label_weeks.to_vec(),
        columns: full.columns,
        rows,
    })
}
