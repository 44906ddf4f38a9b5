//! 2D projections of learned label embeddings: deterministic PCA and
//! exact t-SNE, plus a CSV export any plotting tool can read.

pub mod export;
pub mod pca;
pub mod tsne;

pub use export::export_projection;
pub use pca::pca_2d;
pub use tsne::{tsne_2d, TsneRun, TSNE_ITERATIONS};

use crate::data::vocab::LabelSet;
use crate::tensor::TensorData;

/// A labeled point set: one row of `coords` per label, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    labels: Vec<String>,
    coords: TensorData<f64>,
}

impl LabeledPoints {
    pub fn new(labels: Vec<String>, coords: TensorData<f64>) -> Self {
        assert_eq!(
            labels.len(),
            coords.rows(),
            "{} labels for {} coordinate rows",
            labels.len(),
            coords.rows()
        );
        for (i, l) in labels.iter().enumerate() {
            assert!(!labels[..i].contains(l), "duplicate label {l:?}");
        }
        LabeledPoints { labels, coords }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> &TensorData<f64> {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords.data()[i * d..(i + 1) * d]
    }
}

/// Pair a task's label set with its embedding table.
pub fn label_points(labels: &LabelSet, table: &TensorData<f64>) -> LabeledPoints {
    assert_eq!(
        labels.len(),
        table.rows(),
        "label set {} has {} labels but the table has {} rows",
        labels.task(),
        labels.len(),
        table.rows()
    );
    LabeledPoints::new(labels.labels().to_vec(), table.clone())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette between the B- and I-prefixed labels of a projected
/// chunk label set: positive when begin and inside embeddings form
/// separate groups. `None` when either group is absent (POS labels).
pub fn prefix_silhouette(points: &LabeledPoints) -> Option<f64> {
    let group = |prefix: &str| -> Vec<usize> {
        points
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.to_ascii_uppercase().starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    };
    let b_group = group("B-");
    let i_group = group("I-");
    if b_group.is_empty() || i_group.is_empty() {
        return None;
    }

    let mean_dist = |i: usize, others: &[usize]| -> f64 {
        let rest: Vec<&usize> = others.iter().filter(|&&j| j != i).collect();
        if rest.is_empty() {
            return 0.0;
        }
        rest.iter().map(|&&j| euclidean(points.row(i), points.row(j))).sum::<f64>()
            / rest.len() as f64
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for (own, other) in [(&b_group, &i_group), (&i_group, &b_group)] {
        for &i in own.iter() {
            let a = mean_dist(i, own);
            let b = mean_dist(i, other);
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
            count += 1;
        }
    }
    Some(total / count as f64)
}
