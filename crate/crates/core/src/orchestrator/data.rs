//! The labeled/unlabeled pool, synthetic data and CSV ingestion.

use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const TEST_FRACTION: f64 = 0.2;

/// Pool points with hidden labels, plus a held-out test split. A point's
/// label is only read by training once the point has been labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPool {
    dims: usize,
    classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    test_features: Vec<f64>,
    test_labels: Vec<usize>,
    /// `Some(g)` once the point joined group `g`.
    group_of: Vec<Option<u32>>,
    /// Labeled points in the order they were labeled.
    labeled: Vec<usize>,
}

impl DataPool {
    pub fn new(dims: usize, classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dims == 0 || features.len() != dims * labels.len() {
            return Err(invalid("feature matrix does not match the label count"));
        }
        if classes < 2 {
            return Err(invalid("need at least two classes"));
        }
        if labels.iter().any(|&y| y >= classes) {
            return Err(invalid("label out of range"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let n = labels.len();
        Ok(Self {
            dims,
            classes,
            features,
            labels,
            test_features: Vec::new(),
            test_labels: Vec::new(),
            group_of: vec![None; n],
            labeled: Vec::new(),
        })
    }

    /// Moves a class-stratified `fraction` of the points into the test split.
    pub fn with_test_split(self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(invalid("test fraction must lie in [0, 1)"));
        }
        if !self.labeled.is_empty() || !self.test_labels.is_empty() {
            return Err(invalid("split must happen before labeling"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut test = vec![false; self.len()];
        for c in 0..self.classes {
            let mut members: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            members.shuffle(&mut rng);
            let take = (fraction * members.len() as f64).round() as usize;
            for &i in &members[..take] {
                test[i] = true;
            }
        }
        let d = self.dims;
        let (mut features, mut labels, mut tf, mut tl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, (row, &held_out)) in self.features.chunks_exact(d).zip(&test).enumerate() {
            if held_out {
                tf.extend_from_slice(row);
                tl.push(self.labels[i]);
            } else {
                features.extend_from_slice(row);
                labels.push(self.labels[i]);
            }
        }
        let mut pool = Self::new(d, self.classes, features, labels)?;
        pool.test_features = tf;
        pool.test_labels = tl;
        Ok(pool)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of pool points (test split excluded).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn test_features(&self) -> &[f64] {
        &self.test_features
    }

    pub fn test_labels(&self) -> &[usize] {
        &self.test_labels
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn group_of(&self, i: usize) -> Option<u32> {
        self.group_of[i]
    }

    /// Unlabeled pool positions in increasing order.
    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.group_of[i].is_none()).collect()
    }

    /// Reveals labels of `indices` and assigns them to `group`.
    pub fn label(&mut self, indices: &[usize], group: u32) -> Result<()> {
        for &i in indices {
            match self.group_of.get(i) {
                None => return Err(invalid(format!("pool index {i} out of range"))),
                Some(Some(g)) => return Err(invalid(format!("point {i} already labeled in group {g}"))),
                Some(None) => {}
            }
            self.group_of[i] = Some(group);
            self.labeled.push(i);
        }
        Ok(())
    }

    /// Class counts of the labeled set.
    pub fn labeled_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &i in &self.labeled {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Owned copy of the labeled set for the trainer.
    pub fn training_set(&self) -> TrainingSet {
        let mut set = TrainingSet {
            dims: self.dims,
            features: Vec::with_capacity(self.labeled.len() * self.dims),
            labels: Vec::with_capacity(self.labeled.len()),
            groups: Vec::with_capacity(self.labeled.len()),
        };
        for &i in &self.labeled {
            set.features.extend_from_slice(self.row(i));
            set.labels.push(self.labels[i]);
            set.groups.push(self.group_of[i].expect("labeled point has a group"));
        }
        set
    }

    /// Writes pool points as `f1,...,fd,label`, with a header row.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
        let mut header: Vec<String> = (0..self.dims).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_error(path, 1, e))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(|e| csv_error(path, i + 2, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub dims: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub groups: Vec<u32>,
}

/// Isotropic unit-variance Gaussian clusters, `counts[c]` points for class
/// `c`. Class means sit at `separation * e_c`, or evenly spaced on a circle
/// of radius `separation` in the first two dimensions when `dims < classes`.
/// A stratified 20% test split is held out.
pub fn make_synthetic(classes: usize, dims: usize, counts: &[usize], separation: f64, seed: u64) -> Result<DataPool> {
    if classes < 2 || counts.len() != classes {
        return Err(invalid("need at least two classes and one count per class"));
    }
    if dims == 0 || (dims < classes && dims < 2) {
        return Err(invalid("dims must be >= 2, or >= 1 when it covers every class"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(counts.iter().sum::<usize>() * dims);
    let mut labels = Vec::new();
    for (c, &count) in counts.iter().enumerate() {
        let mut mean = vec![0.0; dims];
        if dims >= classes {
            mean[c] = separation;
        } else {
            let angle = std::f64::consts::TAU * c as f64 / classes as f64;
            mean[0] = separation * angle.cos();
            mean[1] = separation * angle.sin();
        }
        for _ in 0..count {
            features.extend(mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
            labels.push(c);
        }
    }
    DataPool::new(dims, classes, features, labels)?.with_test_split(TEST_FRACTION, rng.random())
}

fn csv_error(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Csv { path: path.display().to_string(), line, message: e.to_string() }
}

/// Numeric CSV with the integer label in the last column. A first row that
/// does not parse as numbers is treated as a header. All points start
/// unlabeled and no test split is taken.
pub fn load_csv(path: &Path) -> Result<DataPool> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| csv_error(path, line, e))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(|c| c.trim().parse::<f64>()).collect();
        if idx == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        if rec.len() < 2 {
            return Err(csv_error(path, line, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(csv_error(path, line, format!("expected {w} columns, found {}", rec.len())));
            }
            _ => {}
        }
        for (col, p) in parsed.iter().enumerate() {
            let cell = &rec[col];
            let v = p
                .as_ref()
                .map_err(|_| csv_error(path, line, format!("column {}: non-numeric cell '{cell}'", col + 1)))?;
            if col + 1 == rec.len() {
                if v.fract() != 0.0 || *v < 0.0 {
                    return Err(csv_error(path, line, format!("column {}: label '{cell}' is not a class index", col + 1)));
                }
                labels.push(*v as usize);
            } else {
                if !v.is_finite() {
                    return Err(csv_error(path, line, format!("column {}: non-finite value", col + 1)));
                }
                features.push(*v);
            }
        }
    }
    let width = width.ok_or_else(|| csv_error(path, 0, "no data rows"))?;
    let classes = (labels.iter().copied().max().unwrap_or(0) + 1).max(2);
    DataPool::new(width - 1, classes, features, labels)
}

/// Where a run gets its pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        classes: usize,
        dims: usize,
        counts: Vec<usize>,
        separation: f64,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        path: String,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_test_fraction() -> f64 {
    TEST_FRACTION
}

impl DataSource {
    pub fn load(&self, run_seed: u64) -> Result<DataPool> {
        match self {
            DataSource::Synthetic { classes, dims, counts, separation, seed } => {
                make_synthetic(*classes, *dims, counts, *separation, seed.unwrap_or(run_seed))
            }
            DataSource::Csv { path, test_fraction } => {
                load_csv(Path::new(path))?.with_test_split(*test_fraction, run_seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn synthetic_is_deterministic_and_split() {
        let a = make_synthetic(3, 4, &[900, 50, 50], 3.0, 1).unwrap();
        let b = make_synthetic(3, 4, &[900, 50, 50], 3.0, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len() + a.test_labels().len(), 1000);
        assert_eq!(a.test_labels().len(), 180 + 10 + 10);
        let c = make_synthetic(3, 4, &[900, 50, 50], 3.0, 2).unwrap();
        assert_ne!(a.features(), c.features());
        let circle = make_synthetic(5, 2, &[10; 5], 3.0, 0).unwrap();
        assert_eq!(circle.dims(), 2);
    }

    #[test]
    fn labeling_keeps_sets_disjoint() {
        let mut pool = make_synthetic(2, 2, &[20, 20], 2.0, 0).unwrap();
        let total = pool.len();
        pool.label(&[0, 3, 5], 0).unwrap();
        assert!(pool.label(&[3], 1).is_err());
        assert!(pool.label(&[total], 1).is_err());
        assert_eq!(pool.labeled().len() + pool.unlabeled().len(), total);
        assert!(!pool.unlabeled().contains(&3));
        let set = pool.training_set();
        assert_eq!(set.groups, vec![0, 0, 0]);
        assert_eq!(&set.features[2..4], pool.row(3));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        let pool = make_synthetic(3, 3, &[30, 20, 10], 1.7, 5).unwrap();
        pool.export_csv(&path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.features(), pool.features());
        assert_eq!(back.len(), pool.len());
        assert_eq!(back.classes(), 3);
    }

    #[test]
    fn csv_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        std::fs::write(&path, "0.5,1.5,0\n-1,2,1\n").unwrap();
        let pool = load_csv(&path).unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.row(1), &[-1.0, 2.0]);
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "a,b,label\n1,2,0\n3,oops,1").unwrap();
        let msg = load_csv(&path).unwrap_err().to_string();
        assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");
        std::fs::write(&path, "1,2,0\n1,2\n").unwrap();
        assert!(load_csv(&path).unwrap_err().to_string().contains("line 2"));
        std::fs::write(&path, "1,2,0.5\n").unwrap();
        assert!(load_csv(&path).is_err());
    }
}
