//! Feature tables: CSV persistence, label encoding and the stratified
//! train/test split.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::FeatureVector;

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("last column must be named `label`, found {0:?}")]
    MissingLabelColumn(Option<String>),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("dataset has no rows")]
    NoRows,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("class {class:?} has {count} row(s); stratified splitting needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("train fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("label {0:?} is not one of the known classes")]
    UnknownLabel(String),
}

/// A table of instances. Labels are stored as indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        class_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self, DatasetError> {
        let ds = Dataset {
            feature_names,
            class_names,
            rows,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset from labeled vectors; classes are numbered in order
    /// of first appearance.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self, DatasetError> {
        let first = vectors.first().ok_or(DatasetError::NoRows)?;
        let feature_names: Vec<String> = first.names.to_vec();
        let mut class_names: Vec<String> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut rows = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.names[..] != feature_names[..] {
                return Err(DatasetError::Invalid("feature vectors disagree on feature names".into()));
            }
            let next = index.len();
            let class = *index.entry(v.label.as_str()).or_insert_with(|| {
                class_names.push(v.label.clone());
                next
            });
            rows.push(v.values.clone());
            labels.push(class);
        }
        Dataset::new(feature_names, class_names, rows, labels)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.feature_names.is_empty() {
            return Err(DatasetError::NoFeatures);
        }
        if self.feature_names.iter().any(|n| n == LABEL_COLUMN) {
            return Err(DatasetError::Invalid("a feature may not be named `label`".into()));
        }
        if self.rows.len() != self.labels.len() {
            return Err(DatasetError::Invalid(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        let width = self.feature_names.len();
        for (i, (row, &label)) in self.rows.iter().zip(&self.labels).enumerate() {
            if row.len() != width {
                return Err(DatasetError::RaggedRow {
                    row: i,
                    expected: width,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!(
                    "row {i}, column {:?}: non-finite value",
                    self.feature_names[j]
                )));
            }
            if label >= self.class_names.len() {
                return Err(DatasetError::Invalid(format!("row {i}: label index {label} out of range")));
            }
        }
        Ok(())
    }

    /// The invariants required before fitting a learner.
    pub fn check_trainable(&self) -> Result<(), DatasetError> {
        if self.rows.is_empty() {
            return Err(DatasetError::NoRows);
        }
        if self.class_names.len() < 2 {
            return Err(DatasetError::Invalid(format!(
                "training needs at least 2 classes, found {}",
                self.class_names.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.rows[i].clone(),
            names: Arc::from(self.feature_names.clone()),
            label: self.class_names[self.labels[i]].clone(),
        }
    }

    /// Rows at `indices`, in the given order, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Re-encodes labels against another class list, e.g. a trained model's.
    pub fn with_class_names(&self, class_names: &[String]) -> Result<Dataset, DatasetError> {
        let index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let name = &self.class_names[l];
                index
                    .get(name.as_str())
                    .copied()
                    .ok_or_else(|| DatasetError::UnknownLabel(name.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            class_names: class_names.to_vec(),
            rows: self.rows.clone(),
            labels,
        })
    }

    pub fn to_csv_string(&self) -> Result<String, DatasetError> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            record.clear();
            // Display for f64 prints the shortest string that parses back exactly
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(self.class_names[label].clone());
            w.write_record(&record)?;
        }
        let bytes = w.into_inner().map_err(|e| DatasetError::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(text: &str) -> Result<Dataset, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        match header.last() {
            Some(last) if last == LABEL_COLUMN => {}
            other => return Err(DatasetError::MissingLabelColumn(other.cloned())),
        }
        let feature_names = header[..header.len() - 1].to_vec();
        if feature_names.is_empty() {
            return Err(DatasetError::NoFeatures);
        }

        let mut class_names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row_no = i + 1;
            if record.len() != header.len() {
                return Err(DatasetError::RaggedRow {
                    row: row_no,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            let values = record
                .iter()
                .take(feature_names.len())
                .zip(&feature_names)
                .map(|(cell, column)| {
                    cell.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DatasetError::NonNumeric {
                            row: row_no,
                            column: column.clone(),
                            value: cell.to_string(),
                        })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let label = &record[feature_names.len()];
            let class = match index.get(label) {
                Some(&c) => c,
                None => {
                    class_names.push(label.to_string());
                    index.insert(label.to_string(), class_names.len() - 1);
                    class_names.len() - 1
                }
            };
            rows.push(values);
            labels.push(class);
        }
        Dataset::new(feature_names, class_names, rows, labels)
    }

    /// Stratified split: within each class a seeded shuffle, then the first
    /// `ceil(fraction * n_c)` rows go to training. Both parts keep the full
    /// class list and the original relative row order.
    pub fn train_test_split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DatasetError::BadFraction(train_fraction));
        }
        if self.rows.len() < 2 {
            return Err(DatasetError::Invalid("splitting needs at least 2 rows".into()));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.class_names.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (class, mut members) in by_class.into_iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            if members.len() < 2 {
                return Err(DatasetError::ClassTooSmall {
                    class: self.class_names[class].clone(),
                    count: members.len(),
                });
            }
            members.shuffle(&mut rng);
            let n_train = stratum_train_count(members.len(), train_fraction);
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// `ceil(fraction * n)`, kept within `1..n` so both sides of every stratum
/// are non-empty. The small slack absorbs products such as 0.07 * 100
/// landing one ulp above an integer.
fn stratum_train_count(n: usize, fraction: f64) -> usize {
    let raw = (fraction * n as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n - 1)
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let text = ds.to_csv_string()?;
    fs::write(path, text).map_err(|source| DatasetError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Dataset::from_csv_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for i in 0..per_class {
                rows.push(vec![c as f64, i as f64]);
                labels.push(c);
            }
        }
        let class_names = (0..classes).map(|c| format!("c{c}")).collect();
        Dataset::new(names(&["a", "b"]), class_names, rows, labels).unwrap()
    }

    #[test]
    fn single_row_csv() {
        let ds = Dataset::new(names(&["f1", "f2"]), names(&["x", "y"]), vec![vec![1.5, -2.0]], vec![1]).unwrap();
        let text = ds.to_csv_string().unwrap();
        assert_eq!(text, "f1,f2,label\n1.5,-2,y\n");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn empty_feature_list_is_rejected() {
        let ds = Dataset {
            feature_names: vec![],
            class_names: names(&["a"]),
            rows: vec![vec![]],
            labels: vec![0],
        };
        assert!(matches!(ds.to_csv_string(), Err(DatasetError::NoFeatures)));
        let dir = tempfile::tempdir().unwrap();
        assert!(write_csv(&ds, dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn file_round_trip() {
        let ds = Dataset::new(
            names(&["f1", "f2"]),
            names(&["a", "b"]),
            vec![vec![0.1 + 0.2, 1e-300], vec![-std::f64::consts::PI, 12345.678901234567]],
            vec![0, 1],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&ds, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), ds);
        assert!(matches!(write_csv(&ds, dir.path().join("missing/t.csv")), Err(DatasetError::Write { .. })));
    }

    #[test]
    fn read_errors_are_distinct() {
        assert!(matches!(
            Dataset::from_csv_str("a,b,class\n1,2,x\n"),
            Err(DatasetError::MissingLabelColumn(Some(_)))
        ));
        assert!(matches!(
            Dataset::from_csv_str("a,b,label\n1,2,x\n1,x\n"),
            Err(DatasetError::RaggedRow { row: 2, expected: 3, found: 2 })
        ));
        match Dataset::from_csv_str("a,b,label\n1,2,x\n3,oops,y\n") {
            Err(DatasetError::NonNumeric { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classes_in_first_appearance_order() {
        let ds = Dataset::from_csv_str("f,label\n1,b\n2,a\n3,b\n").unwrap();
        assert_eq!(ds.class_names, names(&["b", "a"]));
        assert_eq!(ds.labels, vec![0, 1, 0]);
    }

    #[test]
    fn split_counts_match_seventy_thirty() {
        let ds = balanced(50, 13);
        let (train, test) = ds.train_test_split(0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (455, 195));
        assert!(train.class_counts().iter().all(|&c| c == 35));
        assert!(test.class_counts().iter().all(|&c| c == 15));

        let (train, test) = balanced(2, 3).train_test_split(0.5, 0).unwrap();
        assert_eq!(train.class_counts(), vec![1, 1, 1]);
        assert_eq!(test.class_counts(), vec![1, 1, 1]);

        // 0.07 * 100 is 7.000000000000001 in binary floating point
        let (train, _) = balanced(100, 2).train_test_split(0.07, 0).unwrap();
        assert_eq!(train.class_counts(), vec![7, 7]);
    }

    #[test]
    fn split_is_deterministic_and_needs_two_per_class() {
        let ds = balanced(20, 4);
        assert_eq!(ds.train_test_split(0.7, 5).unwrap(), ds.train_test_split(0.7, 5).unwrap());
        assert_ne!(ds.train_test_split(0.7, 5).unwrap().0, ds.train_test_split(0.7, 6).unwrap().0);

        let mut small = balanced(3, 2);
        small.rows.push(vec![9.0, 9.0]);
        small.labels.push(2);
        small.class_names.push("lonely".into());
        assert!(matches!(small.train_test_split(0.7, 0), Err(DatasetError::ClassTooSmall { count: 1, .. })));
        assert!(matches!(ds.train_test_split(1.0, 0), Err(DatasetError::BadFraction(_))));
    }

    #[test]
    fn relabel_against_model_classes() {
        let ds = Dataset::from_csv_str("f,label\n1,b\n2,a\n").unwrap();
        let re = ds.with_class_names(&names(&["a", "b", "c"])).unwrap();
        assert_eq!(re.labels, vec![1, 0]);
        assert!(matches!(ds.with_class_names(&names(&["a"])), Err(DatasetError::UnknownLabel(_))));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_identity(
            rows in prop::collection::vec((prop::collection::vec(-1e12f64..1e12, 3), 0usize..3), 1..20)
        ) {
            let (values, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let ds = Dataset::new(names(&["x", "y", "z"]), names(&["p", "q", "r"]), values, labels).unwrap();
            let back = Dataset::from_csv_str(&ds.to_csv_string().unwrap()).unwrap();
            // class order follows first appearance, so compare decoded labels
            prop_assert_eq!(&back.rows, &ds.rows);
            for (a, b) in back.labels.iter().zip(&ds.labels) {
                prop_assert_eq!(&back.class_names[*a], &ds.class_names[*b]);
            }
        }

        #[test]
        fn split_is_a_stratified_partition(per_class in prop::collection::vec(2usize..30, 2..6), fraction in 0.05f64..0.95, seed: u64) {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (c, &n) in per_class.iter().enumerate() {
                for i in 0..n {
                    rows.push(vec![(rows.len() + i) as f64]);
                    labels.push(c);
                }
            }
            let class_names = (0..per_class.len()).map(|c| c.to_string()).collect();
            let ds = Dataset::new(names(&["v"]), class_names, rows, labels).unwrap();
            let (train, test) = ds.train_test_split(fraction, seed).unwrap();
            let mut all: Vec<f64> = train.rows.iter().chain(&test.rows).map(|r| r[0]).collect();
            all.sort_by(f64::total_cmp);
            let mut orig: Vec<f64> = ds.rows.iter().map(|r| r[0]).collect();
            orig.sort_by(f64::total_cmp);
            prop_assert_eq!(all, orig);
            for (c, &n) in per_class.iter().enumerate() {
                prop_assert_eq!(train.class_counts()[c], stratum_train_count(n, fraction));
                prop_assert_eq!(train.class_counts()[c] + test.class_counts()[c], n);
            }
        }
    }
}
