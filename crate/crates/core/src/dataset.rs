//! Tabular data model, CSV ingestion and random train/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OteError, Result};

/// Cell spellings treated as a missing value.
const MISSING_MARKERS: [&str; 3] = ["", "NA", "?"];

/// Numeric feature matrix (row-major) with binary labels.
///
/// Immutable once built; every sampling and splitting routine indexes into
/// its rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        let n = labels.len();
        if n == 0 || d == 0 {
            return Err(OteError::InvalidDataset(format!(
                "need at least one row and one feature, got {n}x{d}"
            )));
        }
        if features.len() != n * d {
            return Err(OteError::InvalidDataset(format!(
                "feature buffer holds {} values, expected {n}x{d}",
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(OteError::InvalidDataset(format!(
                "non-finite value at row {}, feature {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(OteError::InvalidDataset(format!(
                "label {} at row {pos} is not 0 or 1",
                labels[pos]
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
        })
    }

    /// Builds a dataset from row vectors, naming features `x1..xd`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(OteError::LengthMismatch {
                left: d,
                right: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(OteError::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let names = (1..=d).map(|j| format!("x{j}")).collect();
        Dataset::new(rows.concat(), labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features() + feature]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Writes the dataset as CSV with the feature names as header and a
    /// trailing label column.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| OteError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features() + 1);
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.row(i).iter().map(f64::to_string));
            record.push(self.labels[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| OteError::io(path, e))?;
        Ok(())
    }
}

/// Disjoint train/test index sets covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPair {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Loads a CSV file with a header row.
///
/// Columns whose cells all parse as numbers pass through; columns where no
/// cell parses are nominal and get one-hot encoded into `column=value`
/// indicator columns (categories in lexicographic order). A column mixing
/// the two is rejected, as is any missing cell (`""`, `NA`, `?`).
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| OteError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| OteError::MissingColumn(label_column.to_owned()))?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        cells.push(record.iter().map(|c| c.trim().to_owned()).collect());
    }
    if cells.is_empty() {
        return Err(OteError::Empty("csv file"));
    }
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if MISSING_MARKERS.contains(&cell.as_str()) {
                return Err(OteError::MissingValue {
                    row: r + 1,
                    column: header[c].clone(),
                });
            }
        }
    }

    let classes: BTreeSet<&str> = cells.iter().map(|row| row[label_idx].as_str()).collect();
    if classes.len() != 2 {
        return Err(OteError::LabelClasses { found: classes.len() });
    }
    if !classes.contains(positive_label) {
        return Err(OteError::UnknownPositiveLabel(positive_label.to_owned()));
    }
    let labels: Vec<u8> = cells
        .iter()
        .map(|row| u8::from(row[label_idx] == positive_label))
        .collect();

    enum Column {
        Numeric(Vec<f64>),
        Nominal(Vec<String>),
    }
    let mut columns = Vec::new();
    let mut names = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        let parsed: Vec<Option<f64>> = cells.iter().map(|row| row[c].parse::<f64>().ok()).collect();
        if parsed.iter().all(Option::is_none) {
            let categories: BTreeSet<&str> = cells.iter().map(|row| row[c].as_str()).collect();
            names.extend(categories.iter().map(|cat| format!("{name}={cat}")));
            columns.push(Column::Nominal(categories.into_iter().map(str::to_owned).collect()));
            continue;
        }
        let mut values = Vec::with_capacity(cells.len());
        for (r, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(OteError::BadNumber {
                        row: r + 1,
                        column: name.clone(),
                        value: cells[r][c].clone(),
                    })
                }
            }
        }
        names.push(name.clone());
        columns.push(Column::Numeric(values));
    }
    if names.is_empty() {
        return Err(OteError::InvalidDataset("no feature columns".into()));
    }

    let nominal_codes: Vec<Option<BTreeMap<&str, usize>>> = columns
        .iter()
        .map(|col| match col {
            Column::Nominal(cats) => Some(cats.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()),
            Column::Numeric(_) => None,
        })
        .collect();
    let mut features = Vec::with_capacity(cells.len() * names.len());
    for r in 0..cells.len() {
        let mut raw = header.iter().enumerate().filter(|(c, _)| *c != label_idx);
        for (col, codes) in columns.iter().zip(&nominal_codes) {
            let (c, _) = raw.next().expect("one raw column per parsed column");
            match (col, codes) {
                (Column::Numeric(values), _) => features.push(values[r]),
                (Column::Nominal(cats), Some(codes)) => {
                    let hot = codes[cells[r][c].as_str()];
                    features.extend((0..cats.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
                }
                (Column::Nominal(_), None) => unreachable!(),
            }
        }
    }
    Dataset::new(features, labels, names)
}

/// Splits `0..data.n_rows()` into train/test parts with
/// `|train| = round(train_fraction * n)`.
pub fn random_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    split_indices(data.n_rows(), train_fraction, seed)
}

/// Index-level version of [`random_split`].
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(OteError::InvalidParameter(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let floor = (train_fraction * n as f64).floor() as usize;
    let n_train = (train_fraction * n as f64).round() as usize;
    if floor < 1 || n - floor < 1 || n_train >= n {
        return Err(OteError::InvalidParameter(format!(
            "train fraction {train_fraction} leaves an empty part for n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n_train);
    let mut train_indices = train.to_vec();
    let mut test_indices = test.to_vec();
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPair {
        train_indices,
        test_indices,
    })
}

/// Dumps an index set as newline-delimited 0-based integers.
pub fn write_indices(path: impl AsRef<Path>, indices: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| OteError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for i in indices {
        writeln!(w, "{i}").map_err(|e| OteError::io(path, e))?;
    }
    w.flush().map_err(|e| OteError::io(path, e))
}
