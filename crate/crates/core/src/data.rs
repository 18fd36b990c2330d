//! Multi-source labeled data, deterministic fold splitting and CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{MdcpError, Result};
use crate::rng::{self, tag};

/// Label space of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification { num_classes: usize },
    Regression,
}

impl TaskKind {
    pub fn classification(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(MdcpError::Invalid(format!(
                "classification needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(TaskKind::Classification { num_classes })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self {
            TaskKind::Classification { num_classes } => Some(*num_classes),
            TaskKind::Regression => None,
        }
    }
}

/// A single label value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(u32),
    Real(f64),
}

/// Label column of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Class(Vec<u32>),
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Class(v) => v.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Label {
        match self {
            Labels::Class(v) => Label::Class(v[i]),
            Labels::Real(v) => Label::Real(v[i]),
        }
    }

    fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Class(v) => Labels::Class(idx.iter().map(|&i| v[i]).collect()),
            Labels::Real(v) => Labels::Real(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    fn empty_like(&self) -> Labels {
        match self {
            Labels::Class(_) => Labels::Class(Vec::new()),
            Labels::Real(_) => Labels::Real(Vec::new()),
        }
    }

    fn extend(&mut self, other: &Labels) {
        match (self, other) {
            (Labels::Class(a), Labels::Class(b)) => a.extend_from_slice(b),
            (Labels::Real(a), Labels::Real(b)) => a.extend_from_slice(b),
            _ => unreachable!("label kinds checked at construction"),
        }
    }

    /// Real-valued view (class indices converted).
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Labels::Class(v) => v.iter().map(|&c| f64::from(c)).collect(),
            Labels::Real(v) => v.clone(),
        }
    }
}

/// Dense row-major covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MdcpError::Invalid(format!(
                "feature buffer has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(MdcpError::Invalid(format!(
                    "row {i} has {} features, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact on an empty column count would panic
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    fn select(&self, idx: &[usize]) -> Features {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Features {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    fn extend(&mut self, other: &Features) {
        debug_assert_eq!(self.cols, other.cols);
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
    }
}

/// Where a row originally came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOrigin {
    pub source: usize,
    pub row: usize,
}

/// Labeled samples from one source (or a pooled concatenation of sources).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDataset {
    /// `None` only for a pool over several sources.
    pub source_id: Option<usize>,
    features: Features,
    labels: Labels,
    origin: Vec<RowOrigin>,
}

impl SourceDataset {
    pub fn new(source_id: usize, features: Features, labels: Labels) -> Result<Self> {
        let origin = (0..labels.len())
            .map(|row| RowOrigin {
                source: source_id,
                row,
            })
            .collect();
        Self::with_origin(Some(source_id), features, labels, origin)
    }

    fn with_origin(
        source_id: Option<usize>,
        features: Features,
        labels: Labels,
        origin: Vec<RowOrigin>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() || origin.len() != labels.len() {
            return Err(MdcpError::Invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.data.iter().any(|v| v.is_nan()) {
            return Err(MdcpError::NonFinite("NaN in features".into()));
        }
        if let Labels::Real(y) = &labels {
            if y.iter().any(|v| v.is_nan()) {
                return Err(MdcpError::NonFinite("NaN in labels".into()));
            }
        }
        Ok(Self {
            source_id,
            features,
            labels,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn y(&self, i: usize) -> Label {
        self.labels.get(i)
    }

    /// Provenance of each row.
    pub fn origin(&self) -> &[RowOrigin] {
        &self.origin
    }

    /// Rows at `idx`, keeping provenance.
    pub fn subset(&self, idx: &[usize]) -> SourceDataset {
        SourceDataset {
            source_id: self.source_id,
            features: self.features.select(idx),
            labels: self.labels.select(idx),
            origin: idx.iter().map(|&i| self.origin[i]).collect(),
        }
    }
}

/// Train/calibration/test fractions plus the seed of the permutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: f64,
    pub calib: f64,
    pub test: f64,
}

impl SplitPlan {
    /// 37.5% / 12.5% / 50%.
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            train: 0.375,
            calib: 0.125,
            test: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.calib, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(MdcpError::BadFractions(format!("{parts:?} not all in [0,1]")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MdcpError::BadFractions(format!("{parts:?} sums to {sum}")));
        }
        Ok(())
    }

    /// Fold sizes for a source with `n` rows: floors for train and calib,
    /// remainder to test.
    pub fn fold_sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let calib = floor(self.calib).min(n - train);
        (train, calib, n - train - calib)
    }
}

/// Labeled data from `K >= 1` sources sharing one feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSourceData {
    task: TaskKind,
    sources: Vec<SourceDataset>,
}

impl MultiSourceData {
    pub fn new(task: TaskKind, sources: Vec<SourceDataset>) -> Result<Self> {
        if sources.is_empty() {
            return Err(MdcpError::Invalid("need at least one source".into()));
        }
        let d = sources[0].dim();
        for (k, s) in sources.iter().enumerate() {
            if s.dim() != d {
                return Err(MdcpError::Invalid(format!(
                    "source {k} has dimension {}, expected {d}",
                    s.dim()
                )));
            }
            match (&task, s.labels()) {
                (TaskKind::Classification { num_classes }, Labels::Class(y)) => {
                    if let Some(&c) = y.iter().find(|&&c| c as usize >= *num_classes) {
                        return Err(MdcpError::ClassOutOfRange {
                            class: c,
                            num_classes: *num_classes,
                        });
                    }
                }
                (TaskKind::Regression, Labels::Real(_)) => {}
                _ => {
                    return Err(MdcpError::Invalid(format!(
                        "source {k} label type does not match task"
                    )))
                }
            }
        }
        Ok(Self { task, sources })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn dim(&self) -> usize {
        self.sources[0].dim()
    }

    pub fn source(&self, k: usize) -> &SourceDataset {
        &self.sources[k]
    }

    pub fn sources(&self) -> &[SourceDataset] {
        &self.sources
    }

    pub fn total_len(&self) -> usize {
        self.sources.iter().map(SourceDataset::len).sum()
    }

    /// Source fractions `w_k = n_k / n`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.total_len() as f64;
        self.sources.iter().map(|s| s.len() as f64 / n).collect()
    }
}

/// The three folds produced by [`split`].
#[derive(Debug, Clone)]
pub struct Folds {
    pub train: MultiSourceData,
    pub calib: MultiSourceData,
    pub test: MultiSourceData,
}

/// Randomly partitions every source into train/calibration/test folds.
///
/// The permutation of source `k` is drawn from the substream
/// `(plan.seed, [SPLIT, k])`, so the folds depend only on the seed, the
/// source id and its row count.
pub fn split(data: &MultiSourceData, plan: &SplitPlan) -> Result<Folds> {
    plan.validate()?;
    let mut train = Vec::new();
    let mut calib = Vec::new();
    let mut test = Vec::new();
    for (k, src) in data.sources().iter().enumerate() {
        let n = src.len();
        if n < 3 {
            return Err(MdcpError::TooFewSamples(format!(
                "source {k} has {n} rows, at least 3 are needed to split"
            )));
        }
        let (n_train, n_calib, _) = plan.fold_sizes(n);
        if n_calib == 0 {
            return Err(MdcpError::EmptySource {
                source_id: k,
                fold: "calibration",
            });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::substream(plan.seed, &[tag::SPLIT, k as u64]));
        train.push(src.subset(&perm[..n_train]));
        calib.push(src.subset(&perm[n_train..n_train + n_calib]));
        test.push(src.subset(&perm[n_train + n_calib..]));
    }
    Ok(Folds {
        train: MultiSourceData::new(data.task(), train)?,
        calib: MultiSourceData::new(data.task(), calib)?,
        test: MultiSourceData::new(data.task(), test)?,
    })
}

/// Concatenates all sources; each row keeps its `(source, row)` origin.
pub fn pool(data: &MultiSourceData) -> SourceDataset {
    if data.num_sources() == 1 {
        return data.source(0).clone();
    }
    let first = data.source(0);
    let mut features = Features::empty(first.dim());
    let mut labels = first.labels.empty_like();
    let mut origin = Vec::with_capacity(data.total_len());
    for s in data.sources() {
        features.extend(&s.features);
        labels.extend(&s.labels);
        origin.extend_from_slice(&s.origin);
    }
    SourceDataset {
        source_id: None,
        features,
        labels,
        origin,
    }
}

/// Reads `source,y,x1,...,xd` CSV.
pub fn read_csv<R: Read>(reader: R, task: TaskKind) -> Result<MultiSourceData> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "source" || &headers[1] != "y" {
        return Err(MdcpError::Invalid(
            "CSV header must start with `source,y`".into(),
        ));
    }
    let d = headers.len() - 2;
    let mut per_source: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 2 {
            return Err(MdcpError::Invalid(format!(
                "record {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                d + 2
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| MdcpError::Invalid(format!("record {}: {e}", line + 1)))
        };
        let k: usize = rec[0]
            .trim()
            .parse()
            .map_err(|e| MdcpError::Invalid(format!("record {}: source: {e}", line + 1)))?;
        if per_source.len() <= k {
            per_source.resize_with(k + 1, Default::default);
        }
        let (xs, ys) = &mut per_source[k];
        ys.push(parse(&rec[1])?);
        for j in 0..d {
            xs.push(parse(&rec[j + 2])?);
        }
    }
    let mut sources = Vec::with_capacity(per_source.len());
    for (k, (xs, ys)) in per_source.into_iter().enumerate() {
        let n = ys.len();
        let labels = match task {
            TaskKind::Regression => Labels::Real(ys),
            TaskKind::Classification { .. } => {
                let mut out = Vec::with_capacity(n);
                for y in ys {
                    if y < 0.0 || y.fract() != 0.0 || y > f64::from(u32::MAX) {
                        return Err(MdcpError::Invalid(format!(
                            "class label {y} in source {k} is not a class index"
                        )));
                    }
                    out.push(y as u32);
                }
                Labels::Class(out)
            }
        };
        sources.push(SourceDataset::new(k, Features::new(n, d, xs)?, labels)?);
    }
    MultiSourceData::new(task, sources)
}

pub fn load_csv(path: &Path, task: TaskKind) -> Result<MultiSourceData> {
    read_csv(std::fs::File::open(path)?, task)
}

/// Writes `source,y,x1,...,xd` CSV.
pub fn write_csv<W: Write>(data: &MultiSourceData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["source".to_string(), "y".to_string()];
    header.extend((1..=data.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (k, s) in data.sources().iter().enumerate() {
        for i in 0..s.len() {
            let mut rec = vec![k.to_string()];
            rec.push(match s.y(i) {
                Label::Class(c) => c.to_string(),
                Label::Real(v) => format!("{v:?}"),
            });
            rec.extend(s.x(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
