use serde::{Deserialize, Serialize};

/// Divisor floor for constant columns.
pub const SCALER_EPS: f64 = 1e-12;

/// Zero-mean, unit-variance standardization with training-split statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl StandardScaler {
    /// Fits column statistics. An empty input yields an empty scaler.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let Some(first) = rows.first() else {
            return Self {
                mean: Vec::new(),
                std: Vec::new(),
            };
        };
        let d = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        // A constant column's summed mean can miss the value by an ulp;
        // pin it so the column maps to exactly zero.
        let first = first.as_ref();
        for (j, m) in mean.iter_mut().enumerate() {
            if rows.iter().all(|r| r.as_ref()[j] == first[j]) {
                *m = first[j];
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((acc, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s.max(SCALER_EPS))
            .collect()
    }

    pub fn transform_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r.as_ref())).collect()
    }

    /// Restricts the scaler to the given column indices.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            mean: columns.iter().map(|&c| self.mean[c]).collect(),
            std: columns.iter().map(|&c| self.std[c]).collect(),
        }
    }
}
