//! Labeled datasets, CSV ingestion, min-max normalization and the
//! training/examining split.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Feature matrix (rows = examples) with binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Dimension {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&l| l > 1) {
            return Err(Error::BadLabel {
                row: row + 1,
                token: labels[row].to_string(),
            });
        }
        if let Some(idx) = features.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % features.nrows(), idx / features.nrows());
            return Err(Error::BadValue {
                row: row + 1,
                column: feature_names[col].clone(),
                token: features[(row, col)].to_string(),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    /// Builds a dataset from row vectors; names default to `x1..xm`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::RaggedRow {
                row: i + 1,
                expected: m,
                found: r.len(),
            });
        }
        let features = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        let names = (1..=m).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, names)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn m(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Labels as 0.0 / 1.0 targets.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset {
            features,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Replaces the feature matrix, keeping labels.
    pub fn with_features(&self, features: DMatrix<f64>, feature_names: Vec<String>) -> Result<Self> {
        Self::new(features, self.labels.clone(), feature_names)
    }
}

/// Which column of a CSV file carries the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Name(n) => f.write_str(n),
            LabelColumn::Index(i) => write!(f, "column {}", i + 1),
        }
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label)
}

/// Reads a headed CSV. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<LabeledDataset> {
    let t = read_table(reader, label)?;
    let labels = t.labels.ok_or_else(|| Error::MissingLabelColumn(label.to_string()))?;
    LabeledDataset::new(t.features, labels, t.names)
}

/// Numeric CSV whose label column may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub names: Vec<String>,
    pub features: DMatrix<f64>,
    pub labels: Option<Vec<u8>>,
}

/// Like [`read_csv`], but a missing label column yields `labels: None`.
pub fn read_table<R: Read>(reader: R, label: &LabelColumn) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label {
        LabelColumn::Name(name) => header.iter().position(|h| h == name),
        LabelColumn::Index(i) => (*i < header.len()).then_some(*i),
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, token) in record.iter().enumerate() {
            if Some(j) == label_idx {
                labels.push(parse_label(token).ok_or_else(|| Error::BadLabel {
                    row,
                    token: token.to_string(),
                })?);
            } else {
                let v: f64 = token
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::BadValue {
                        row,
                        column: header[j].clone(),
                        token: token.to_string(),
                    })?;
                values.push(v);
            }
        }
        n += 1;
    }
    Ok(CsvTable {
        features: DMatrix::from_row_slice(n, names.len(), &values),
        names,
        labels: label_idx.map(|_| labels),
    })
}

fn parse_label(token: &str) -> Option<u8> {
    match token {
        "0" => Some(0),
        "1" => Some(1),
        t => match t.parse::<f64>() {
            Ok(v) if v == 0.0 => Some(0),
            Ok(v) if v == 1.0 => Some(1),
            _ => None,
        },
    }
}

/// Writes features plus a trailing label column.
pub fn write_csv<W: std::io::Write>(d: &LabeledDataset, label_name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(label_name);
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec: Vec<String> = d.features.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(d.labels[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

/// Observed range of one feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScale {
    /// Column index in the source matrix (0-based).
    pub index: usize,
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureScale {
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

/// Column-wise min-max scaling to [0, 1], fitted on training data.
/// Constant columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    scales: Vec<FeatureScale>,
    retained: Vec<bool>,
}

impl Normalizer {
    pub fn fit(d: &LabeledDataset) -> Result<Self> {
        Self::fit_matrix(d.features(), d.feature_names())
    }

    pub fn fit_matrix(x: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("cannot fit a normalizer on zero rows".into()));
        }
        let mut scales = Vec::new();
        let mut retained = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max > min {
                retained.push(true);
                scales.push(FeatureScale {
                    index: j,
                    name: names[j].clone(),
                    min,
                    max,
                });
            } else {
                log::warn!("dropping constant feature {:?}", names[j]);
                retained.push(false);
            }
        }
        if scales.is_empty() {
            return Err(Error::NoUsableFeatures);
        }
        Ok(Self { scales, retained })
    }

    /// Per-retained-feature ranges, in column order.
    pub fn scales(&self) -> &[FeatureScale] {
        &self.scales
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn is_retained(&self, column: usize) -> bool {
        self.retained.get(column).copied().unwrap_or(false)
    }

    /// Scales every retained column in place; dropped columns are left as
    /// they are (they are never used downstream). No clamping.
    pub fn transform(&self, d: &LabeledDataset) -> Result<LabeledDataset> {
        if d.m() != self.retained.len() {
            return Err(Error::Dimension {
                expected: self.retained.len(),
                found: d.m(),
            });
        }
        let mut x = d.features().clone();
        for s in &self.scales {
            for v in x.column_mut(s.index).iter_mut() {
                *v = s.normalize(*v);
            }
        }
        d.with_features(x, d.feature_names().to_vec())
    }

    /// Keeps only retained columns, scaled.
    pub fn transform_retained(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.retained.len() {
            return Err(Error::Dimension {
                expected: self.retained.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), self.scales.len(), |i, k| {
            let s = &self.scales[k];
            s.normalize(x[(i, s.index)])
        }))
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.scales.iter().map(|s| s.name.clone()).collect()
    }
}

/// Row index sets of the training (A) and examining (B) subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl DatasetSplit {
    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    pub fn n_b(&self) -> usize {
        self.b.len()
    }
}

/// Seeded random partition; `fraction_a` of rows go to A. Stratification
/// keeps each class's share of A within one example of exact.
pub fn split(d: &LabeledDataset, fraction_a: f64, seed: u64, stratified: bool) -> Result<DatasetSplit> {
    split_labels(d.labels(), fraction_a, seed, stratified)
}

pub fn split_labels(labels: &[u8], fraction_a: f64, seed: u64, stratified: bool) -> Result<DatasetSplit> {
    if !(fraction_a > 0.0 && fraction_a < 1.0) {
        return Err(Error::InvalidSplit(format!("fraction {fraction_a} is not in (0, 1)")));
    }
    let n = labels.len();
    let n_a = (n as f64 * fraction_a).round() as usize;
    if n_a < 2 || n - n_a < 2 {
        return Err(Error::InvalidSplit(format!(
            "{n} rows at fraction {fraction_a} give subsets of {n_a} and {}; both need at least 2",
            n - n_a
        )));
    }
    let groups: Vec<Vec<usize>> = if stratified {
        let g: Vec<Vec<usize>> = (0..2u8)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect();
        if g.iter().any(Vec::is_empty) {
            return Err(Error::InvalidSplit("stratified split needs both classes".into()));
        }
        g
    } else {
        vec![(0..n).collect()]
    };

    // Largest-remainder apportionment of n_a across groups.
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * fraction_a).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&x, &y| {
        let rx = exact[x] - exact[x].floor();
        let ry = exact[y] - exact[y].floor();
        ry.partial_cmp(&rx).unwrap().then(x.cmp(&y))
    });
    let mut missing = n_a - take.iter().sum::<usize>();
    for &g in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if take[g] < groups[g].len() {
            take[g] += 1;
            missing -= 1;
        }
    }

    let mut rng = rng_for(seed, &[0x5711]);
    let mut a = Vec::with_capacity(n_a);
    let mut b = Vec::with_capacity(n - n_a);
    for (g, k) in groups.into_iter().zip(take) {
        let mut g = g;
        g.shuffle(&mut rng);
        a.extend_from_slice(&g[..k]);
        b.extend_from_slice(&g[k..]);
    }
    a.sort_unstable();
    b.sort_unstable();
    Ok(DatasetSplit { a, b })
}
