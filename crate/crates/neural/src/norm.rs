use serde::{Deserialize, Serialize};

/// Per-dimension min/max scaling onto `[−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    /// Fits on rows of equal width. Panics on an empty or ragged input.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut it = rows.into_iter();
        let first = it.next().expect("at least one row");
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for r in it {
            assert_eq!(r.len(), min.len(), "ragged rows");
            for (k, v) in r.iter().enumerate() {
                min[k] = min[k].min(*v);
                max[k] = max[k].max(*v);
            }
        }
        Self { min, max }
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    /// Half-width of each dimension; constant dimensions get 1.
    pub fn half_range(&self, k: usize) -> f64 {
        let w = (self.max[k] - self.min[k]) / 2.0;
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    pub fn center(&self, k: usize) -> f64 {
        (self.max[k] + self.min[k]) / 2.0
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.center(k)) / self.half_range(k))
            .collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, v)| v * self.half_range(k) + self.center(k))
            .collect()
    }

    /// Constants of dimensions `start..end`, for slicing per-module blocks.
    pub fn slice(&self, start: usize, end: usize) -> Normalizer {
        Normalizer {
            min: self.min[start..end].to_vec(),
            max: self.max[start..end].to_vec(),
        }
    }
}
