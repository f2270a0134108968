use std::f64::consts::{PI, TAU};
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Labelled feature rows. Labels are class indices in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::Dataset("no rows".into()));
        }
        let k = features[0].len();
        if k == 0 {
            return Err(Error::Dataset("rows have no features".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Dataset(format!(
                    "row {i} has {} features, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Dataset(format!("row {i} label {l} >= class count {classes}")));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    /// Checks every class appears at least once.
    pub fn require_all_classes(&self) -> Result<()> {
        let mut seen = vec![false; self.classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Dataset(format!("class {c} has no training example")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Reads a CSV with header `f0,...,f{k-1},label`.
    pub fn from_csv_reader<R: Read>(reader: R, classes: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let k = headers.len().saturating_sub(1);
        let expected: Vec<String> = (0..k).map(|i| format!("f{i}")).chain(["label".into()]).collect();
        if k == 0 || headers.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(Error::Dataset(format!(
                "header must be f0..f{{k-1}},label; got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row: Vec<f64> = rec
                .iter()
                .take(k)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Dataset(format!("data row {}: {e}", line + 1)))?;
            let label = rec[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Dataset(format!("data row {} label: {e}", line + 1)))?;
            features.push(row);
            labels.push(label);
        }
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        Self::new(features, labels, classes)
    }

    pub fn from_csv(path: &Path, classes: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, classes)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.feature_dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn noise<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).expect("std >= 0").sample(rng)
    }
}

/// Two interleaving half circles; `n / 2` points per class (class 0 gets the odd one).
pub fn two_moons<R: Rng + ?Sized>(n: usize, noise_std: f64, rng: &mut R) -> Result<Dataset> {
    check(n, noise_std)?;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(i >= n.div_ceil(2));
        let t = rng.random_range(0.0..PI);
        let (x, y) = if label == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        features.push(vec![x + noise(rng, noise_std), y + noise(rng, noise_std)]);
        labels.push(label);
    }
    Dataset::new(features, labels, 2)
}

/// Two concentric circles, outer radius 1 (class 0) and inner radius 0.5 (class 1).
pub fn concentric_rings<R: Rng + ?Sized>(n: usize, noise_std: f64, rng: &mut R) -> Result<Dataset> {
    check(n, noise_std)?;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(i >= n.div_ceil(2));
        let r = if label == 0 { 1.0 } else { 0.5 };
        let t = rng.random_range(0.0..TAU);
        features.push(vec![
            r * t.cos() + noise(rng, noise_std),
            r * t.sin() + noise(rng, noise_std),
        ]);
        labels.push(label);
    }
    Dataset::new(features, labels, 2)
}

fn check(n: usize, noise_std: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Dataset("need at least 2 points".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Dataset(format!("noise must be >= 0, got {noise_std}")));
    }
    Ok(())
}
