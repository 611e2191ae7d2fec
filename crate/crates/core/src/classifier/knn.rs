//! k-nearest-neighbors over z-scored feature vectors.

use std::fmt::Write as _;

use thiserror::Error;

use super::shapes::ShapeClass;
use crate::geometry::{features_of, FeatureVector, FEATURE_COUNT};
use crate::trajectory::{Trajectory, TrajectoryError};

pub const MODEL_HEADER: &str = "yolo-knn v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("training corpus has no example of class {0}")]
    MissingClass(ShapeClass),
    #[error("k must be between 1 and the number of exemplars ({exemplars}), got {k}")]
    InvalidK { k: usize, exemplars: usize },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3 }
    }
}

/// Immutable after fitting; safe to share across threads for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    k: usize,
    means: [f64; FEATURE_COUNT],
    stddevs: [f64; FEATURE_COUNT],
    exemplars: Vec<(FeatureVector, ShapeClass)>,
    standardized: Vec<[f64; FEATURE_COUNT]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: ShapeClass,
    /// Winning votes over k.
    pub confidence: f64,
}

/// Extract features from every trajectory and fit.
pub fn fit(
    corpus: &[(Trajectory, ShapeClass)],
    cfg: KnnConfig,
) -> Result<TrainedModel, ClassifierError> {
    let features = corpus
        .iter()
        .map(|(t, c)| Ok((features_of(t)?, *c)))
        .collect::<Result<Vec<_>, TrajectoryError>>()?;
    fit_features(features, cfg)
}

pub fn fit_features(
    exemplars: Vec<(FeatureVector, ShapeClass)>,
    cfg: KnnConfig,
) -> Result<TrainedModel, ClassifierError> {
    for class in ShapeClass::ALL {
        if !exemplars.iter().any(|(_, c)| *c == class) {
            return Err(ClassifierError::MissingClass(class));
        }
    }
    let n = exemplars.len() as f64;
    let mut means = [0.0; FEATURE_COUNT];
    for (f, _) in &exemplars {
        for (m, v) in means.iter_mut().zip(f.to_array()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stddevs = [0.0; FEATURE_COUNT];
    for (f, _) in &exemplars {
        for ((s, v), m) in stddevs.iter_mut().zip(f.to_array()).zip(means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in stddevs.iter_mut() {
        *s = (*s / n).sqrt();
        if !(*s > 0.0) {
            *s = 1.0;
        }
    }
    TrainedModel::assemble(cfg.k, means, stddevs, exemplars)
}

impl TrainedModel {
    fn assemble(
        k: usize,
        means: [f64; FEATURE_COUNT],
        stddevs: [f64; FEATURE_COUNT],
        exemplars: Vec<(FeatureVector, ShapeClass)>,
    ) -> Result<Self, ClassifierError> {
        if k == 0 || k > exemplars.len() {
            return Err(ClassifierError::InvalidK { k, exemplars: exemplars.len() });
        }
        let mut model = TrainedModel { k, means, stddevs, exemplars, standardized: Vec::new() };
        model.standardized = model.exemplars.iter().map(|(f, _)| model.standardize(f)).collect();
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn means(&self) -> &[f64; FEATURE_COUNT] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64; FEATURE_COUNT] {
        &self.stddevs
    }

    pub fn exemplars(&self) -> &[(FeatureVector, ShapeClass)] {
        &self.exemplars
    }

    pub fn standardized(&self) -> &[[f64; FEATURE_COUNT]] {
        &self.standardized
    }

    pub fn standardize(&self, f: &FeatureVector) -> [f64; FEATURE_COUNT] {
        let mut z = f.to_array();
        for ((v, m), s) in z.iter_mut().zip(self.means).zip(self.stddevs) {
            *v = (*v - m) / s;
        }
        z
    }

    /// Same model with a different neighbor count.
    pub fn with_k(&self, k: usize) -> Result<Self, ClassifierError> {
        if k == 0 || k > self.exemplars.len() {
            return Err(ClassifierError::InvalidK { k, exemplars: self.exemplars.len() });
        }
        Ok(Self { k, ..self.clone() })
    }

    pub fn classify(&self, seg: &Trajectory) -> Result<Prediction, ClassifierError> {
        Ok(self.classify_features(&features_of(seg)?))
    }

    /// Majority vote among the k nearest exemplars. Equal distances rank by
    /// exemplar index; a vote tie goes to the tied class whose member ranks
    /// nearest.
    pub fn classify_features(&self, f: &FeatureVector) -> Prediction {
        let query = self.standardize(f);
        let mut ranked: Vec<(f64, usize)> = self
            .standardized
            .iter()
            .enumerate()
            .map(|(i, z)| (squared_distance(&query, z), i))
            .collect();
        let k = self.k;
        ranked.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &mut ranked[..k];
        nearest.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut votes = [0usize; 6];
        for &(_, i) in nearest.iter() {
            votes[self.exemplars[i].1.index()] += 1;
        }
        let best = *votes.iter().max().expect("six classes");
        let class = nearest
            .iter()
            .map(|&(_, i)| self.exemplars[i].1)
            .find(|c| votes[c.index()] == best)
            .expect("winning class is among the neighbors");
        Prediction { class, confidence: best as f64 / k as f64 }
    }

    /// `yolo-knn v1 k=<k>`, a line of means, a line of stddevs, then one
    /// `label f1 .. f8` line per exemplar.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER} k={}", self.k);
        let _ = writeln!(out, "{}", join(&self.means));
        let _ = writeln!(out, "{}", join(&self.stddevs));
        for (f, c) in &self.exemplars {
            let _ = writeln!(out, "{c} {f}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ClassifierError> {
        let total = text.lines().count();
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: String| ClassifierError::Parse { line: line + 1, msg };
        let (i, header) = lines.next().ok_or_else(|| err(0, "empty model file".into()))?;
        let k = header
            .strip_prefix(MODEL_HEADER)
            .and_then(|rest| rest.trim().strip_prefix("k="))
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| err(i, format!("bad header {header:?}")))?;
        let mut numbers = |what: &str| -> Result<[f64; FEATURE_COUNT], ClassifierError> {
            let (i, line) = lines.next().ok_or_else(|| err(total, format!("missing {what}")))?;
            parse_floats(line).map_err(|m| err(i, format!("{what}: {m}")))
        };
        let means = numbers("means")?;
        let stddevs = numbers("stddevs")?;
        if stddevs.iter().any(|s| !(*s > 0.0)) {
            return Err(err(2, "stddevs must be positive".into()));
        }
        let exemplars = parse_feature_lines(lines)?;
        Self::assemble(k, means, stddevs, exemplars)
    }
}

fn squared_distance(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn parse_floats(line: &str) -> Result<[f64; FEATURE_COUNT], String> {
    let vals: Vec<f64> = line
        .split(' ')
        .map(|s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; FEATURE_COUNT] = vals
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {FEATURE_COUNT} values, got {}", v.len()))?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    Ok(arr)
}

fn parse_feature_lines<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<(FeatureVector, ShapeClass)>, ClassifierError> {
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ClassifierError::Parse { line: i + 1, msg };
        let (label, rest) = line.split_once(' ').ok_or_else(|| err("missing features".into()))?;
        let class = label.parse::<ShapeClass>().map_err(|e| err(e.to_string()))?;
        let vals = parse_floats(rest).map_err(err)?;
        out.push((FeatureVector::from_array(vals), class));
    }
    Ok(out)
}

/// Parse a feature corpus: `label f1 .. f8` per line, `#` comments allowed.
pub fn parse_feature_corpus(text: &str) -> Result<Vec<(FeatureVector, ShapeClass)>, ClassifierError> {
    parse_feature_lines(text.lines().enumerate())
}

pub fn feature_corpus_to_text(corpus: &[(FeatureVector, ShapeClass)]) -> String {
    corpus.iter().map(|(f, c)| format!("{c} {f}\n")).collect()
}
