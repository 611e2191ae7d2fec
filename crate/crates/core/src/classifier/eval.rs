use std::fmt;

use super::knn::{ClassifierError, TrainedModel};
use super::shapes::ShapeClass;
use crate::geometry::{features_of, FeatureVector};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub accuracy: f64,
    /// `confusion[actual][predicted]`, indexed by [`ShapeClass::index`].
    pub confusion: [[usize; 6]; 6],
}

impl Report {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn class_accuracy(&self, class: ShapeClass) -> f64 {
        let row = &self.confusion[class.index()];
        let n: usize = row.iter().sum();
        if n == 0 {
            return 0.0;
        }
        row[class.index()] as f64 / n as f64
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy {:.4} ({} samples)", self.accuracy, self.total())?;
        write!(f, "{:>8}", "")?;
        for c in ShapeClass::ALL {
            write!(f, "{:>8}", c.name())?;
        }
        writeln!(f)?;
        for c in ShapeClass::ALL {
            write!(f, "{:>8}", c.name())?;
            for n in self.confusion[c.index()] {
                write!(f, "{n:>8}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn evaluate(
    model: &TrainedModel,
    test: &[(Trajectory, ShapeClass)],
) -> Result<Report, ClassifierError> {
    let features = test
        .iter()
        .map(|(t, c)| Ok((features_of(t)?, *c)))
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    evaluate_features(model, &features)
}

pub fn evaluate_features(
    model: &TrainedModel,
    test: &[(FeatureVector, ShapeClass)],
) -> Result<Report, ClassifierError> {
    if test.is_empty() {
        return Err(ClassifierError::EmptyTestSet);
    }
    let mut confusion = [[0usize; 6]; 6];
    for (f, actual) in test {
        let predicted = model.classify_features(f).class;
        confusion[actual.index()][predicted.index()] += 1;
    }
    let correct: usize = (0..6).map(|i| confusion[i][i]).sum();
    Ok(Report { accuracy: correct as f64 / test.len() as f64, confusion })
}
