//! Dataset ingestion, standardization and repeated train/test splitting.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng::purpose;
use crate::numerics::{Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("dataset must have at least one row"));
        }
        if labels.len() != features.rows() {
            return Err(Error::dims("Dataset::new", features.rows(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::invalid(format!("label {bad} >= class count {n_classes}")));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("Dataset::new"));
        }
        Ok(Dataset {
            features,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = Some(names);
        self
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = Some(names);
        self
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Materialize the rows at `indices` (repeats allowed), keeping metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Maps raw label strings to class ids.
///
/// If every label parses as an integer, classes are ordered numerically so
/// that files already coded `0..C` keep their ids. Otherwise ids follow first
/// appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoder {
    classes: Vec<String>,
}

impl LabelEncoder {
    pub fn fit<S: AsRef<str>>(raw: &[S]) -> Self {
        let mut classes: Vec<String> = Vec::new();
        for s in raw {
            let s = s.as_ref();
            if !classes.iter().any(|c| c == s) {
                classes.push(s.to_string());
            }
        }
        let numeric: Option<Vec<i64>> = classes.iter().map(|c| c.parse::<i64>().ok()).collect();
        if let Some(nums) = numeric {
            let mut paired: Vec<(i64, String)> = nums.into_iter().zip(classes).collect();
            paired.sort_by_key(|(n, _)| *n);
            classes = paired.into_iter().map(|(_, s)| s).collect();
        }
        LabelEncoder { classes }
    }

    pub fn from_classes(classes: Vec<String>) -> Self {
        LabelEncoder { classes }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn encode(&self, raw: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == raw)
    }

    pub fn decode(&self, id: usize) -> Option<&str> {
        self.classes.get(id).map(String::as_str)
    }
}

/// Which CSV column holds the label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    /// `last` or a 0-based column index.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("last") {
            return Ok(LabelColumn::Last);
        }
        s.parse()
            .map(LabelColumn::Index)
            .map_err(|_| Error::invalid(format!("label column {s:?} is neither 'last' nor an index")))
    }
}

impl LabelColumn {
    fn resolve(self, width: usize) -> Option<usize> {
        match self {
            LabelColumn::Last => width.checked_sub(1),
            LabelColumn::Index(i) if i < width => Some(i),
            LabelColumn::Index(_) => None,
        }
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Structure {
                path: path.to_path_buf(),
                message: format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    rec.len(),
                    header.len()
                ),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(RawTable { header, rows })
}

fn parse_features(
    path: &Path,
    table: &RawTable,
    skip: Option<usize>,
) -> Result<(Matrix, Vec<String>)> {
    let cols: Vec<usize> = (0..table.header.len()).filter(|&c| Some(c) != skip).collect();
    let mut data = Vec::with_capacity(table.rows.len() * cols.len());
    for (r, row) in table.rows.iter().enumerate() {
        for &c in &cols {
            let cell = &row[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                column: c + 1,
                value: cell.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: c + 1,
                    value: cell.clone(),
                });
            }
            data.push(v);
        }
    }
    let names = cols.iter().map(|&c| table.header[c].clone()).collect();
    Ok((Matrix::from_vec(table.rows.len(), cols.len(), data)?, names))
}

/// Load a labelled CSV (header row, numeric features, one label column).
pub fn load_csv(path: impl AsRef<Path>, label: LabelColumn) -> Result<Dataset> {
    let (ds, _) = load_csv_with_encoder(path, label, None)?;
    Ok(ds)
}

/// Load a labelled CSV, optionally reusing an existing label encoding.
pub fn load_csv_with_encoder(
    path: impl AsRef<Path>,
    label: LabelColumn,
    encoder: Option<&LabelEncoder>,
) -> Result<(Dataset, LabelEncoder)> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let label_col = label.resolve(table.header.len()).ok_or_else(|| Error::Structure {
        path: path.to_path_buf(),
        message: format!("label column out of range for {} columns", table.header.len()),
    })?;
    let (features, names) = parse_features(path, &table, Some(label_col))?;
    let raw: Vec<&str> = table.rows.iter().map(|r| r[label_col].as_str()).collect();
    let encoder = match encoder {
        Some(e) => e.clone(),
        None => LabelEncoder::fit(&raw),
    };
    let mut labels = Vec::with_capacity(raw.len());
    for (r, s) in raw.iter().enumerate() {
        labels.push(encoder.encode(s).ok_or_else(|| Error::Structure {
            path: path.to_path_buf(),
            message: format!("row {}: unknown class label {s:?}", r + 1),
        })?);
    }
    let ds = Dataset::new(features, labels, encoder.n_classes())?
        .with_feature_names(names)
        .with_class_names(encoder.classes().to_vec());
    Ok((ds, encoder))
}

/// Load a CSV where every column is a numeric feature.
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let table = read_table(path)?;
    Ok(parse_features(path, &table, None)?.0)
}

/// Per-feature affine transform fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; columns with zero spread keep std = 1.
    pub fn fit(features: &Matrix) -> Standardizer {
        let n = features.rows() as f64;
        let mean: Vec<f64> = features.column_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![0.0; features.cols()];
        for r in 0..features.rows() {
            for ((v, x), m) in var.iter_mut().zip(features.row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::dims("Standardizer::transform", self.mean.len(), features.cols()));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for ((x, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Ok(out)
    }
}

/// Standardize `train` with its own statistics and `test` with the same ones.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    let st = Standardizer::fit(train.features());
    let tr = train.with_features(st.transform(train.features())?);
    let te = test.with_features(st.transform(test.features())?);
    Ok((tr, te, st))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repeat: usize,
    pub seed: u64,
    pub ratio: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of training rows for a split of `n` rows at `ratio`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n - 1)
}

/// `repeats` independent random train/test partitions of `0..n`.
pub fn make_splits(n: usize, ratio: f64, repeats: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} rows")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let root = RngStream::new(seed, purpose::SPLIT);
    let n_train = train_size(n, ratio);
    Ok((0..repeats)
        .map(|repeat| {
            let mut rng = root.derive(repeat as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            SplitPlan {
                repeat,
                seed,
                ratio,
                train,
                test,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn string_labels_first_appearance() {
        let f = write_csv("x1,x2,y\n1,2,a\n3,4,b\n5,6,a\n");
        let ds = load_csv(f.path(), LabelColumn::Last).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.feature_names().unwrap(), &["x1", "x2"]);
    }

    #[test]
    fn label_column_by_index() {
        let f = write_csv("y,x\nb,1\na,2\n");
        let ds = load_csv(f.path(), LabelColumn::Index(0)).unwrap();
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.features().column(0), vec![1.0, 2.0]);
    }

    #[test]
    fn integer_labels_keep_numeric_order() {
        let f = write_csv("x,y\n1,2\n2,1\n3,2\n");
        let ds = load_csv(f.path(), LabelColumn::Last).unwrap();
        assert_eq!(ds.labels(), &[1, 0, 1]);
    }

    #[test]
    fn bad_cell_is_named() {
        let f = write_csv("a,b,y\n1,2,0\n3,x,1\n");
        match load_csv(f.path(), LabelColumn::Last) {
            Err(Error::Parse { row, column, value, .. }) => {
                assert_eq!((row, column, value.as_str()), (2, 2, "x"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_csv("a,b,y\n1,2,0\n3,1\n");
        assert!(matches!(load_csv(f.path(), LabelColumn::Last), Err(Error::Structure { .. })));
    }

    #[test]
    fn blood_shaped_file() {
        let mut body = String::from("recency,frequency,monetary,time,donated\n");
        for i in 0..478 {
            body.push_str(&format!("{},{},{},{},{}\n", i % 20, i % 7, 250 * (i % 7), i % 90, i % 2));
        }
        let f = write_csv(&body);
        let ds = load_csv(f.path(), LabelColumn::Last).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.n_classes()), (478, 4, 2));
    }

    #[test]
    fn standardize_hand_values() {
        let train = Dataset::new(
            Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap(),
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        let test = Dataset::new(Matrix::from_rows(&[[4.0, 6.0]]).unwrap(), vec![1], 2).unwrap();
        let (tr, te, st) = standardize(&train, &test).unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        let expect = [-1.0 / sd, 0.0, 1.0 / sd];
        for (got, want) in tr.features().column(0).iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((expect[2] - 1.224_744_871).abs() < 1e-9);
        assert_eq!(tr.features().column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(st.std[1], 1.0);
        // test row uses train mean 2 and train sd, not its own statistics
        assert!((te.features().get(0, 0) - 2.0 / sd).abs() < 1e-12);
        assert_eq!(te.features().get(0, 1), 1.0);
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut rng = RngStream::new(2, 2);
        use rand::Rng;
        let data: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..9.0)).collect();
        let ds = Dataset::new(Matrix::from_vec(50, 4, data).unwrap(), vec![0; 50], 1).unwrap();
        let (once, _, _) = standardize(&ds, &ds).unwrap();
        let (twice, _, _) = standardize(&once, &once).unwrap();
        for (a, b) in once.features().as_slice().iter().zip(twice.features().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn split_sizes() {
        let plans = make_splits(10, 0.7, 1, 0).unwrap();
        assert_eq!((plans[0].train.len(), plans[0].test.len()), (7, 3));
        let abalone = make_splits(4177, 0.7, 1, 0).unwrap();
        assert_eq!(abalone[0].train.len(), 2924);
    }

    #[test]
    fn splits_reproducible_and_distinct() {
        let a = make_splits(100, 0.7, 30, 13).unwrap();
        let b = make_splits(100, 0.7, 30, 13).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in 0..i {
                assert_ne!(a[i].train, a[j].train);
            }
        }
    }

    #[test]
    fn split_errors() {
        assert!(make_splits(1, 0.7, 1, 0).is_err());
        assert!(make_splits(10, 1.0, 1, 0).is_err());
        assert!(make_splits(10, 0.5, 0, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn splits_partition(n in 2usize..300, ratio in 0.05f64..0.95, seed in 0u64..1000) {
            for plan in make_splits(n, ratio, 3, seed).unwrap() {
                let mut all: Vec<usize> = plan.train.iter().chain(&plan.test).copied().collect();
                all.sort_unstable();
                proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn label_round_trip(raw in proptest::collection::vec("[a-d]{1,2}", 1..30)) {
            let enc = LabelEncoder::fit(&raw);
            for s in &raw {
                let id = enc.encode(s).unwrap();
                proptest::prop_assert_eq!(enc.decode(id).unwrap(), s.as_str());
            }
        }
    }
}
