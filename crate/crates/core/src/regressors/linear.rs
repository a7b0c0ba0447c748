//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};

/// Fitted `y = intercept + coefficients · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

/// Least squares on centred, unit-variance columns solved through the SVD
/// pseudo-inverse, so rank-deficient designs get the minimum-norm solution
/// in standardized space. Zero-variance columns are absorbed by the
/// intercept and get coefficient 0.
pub(crate) fn solve(x: &[Vec<f64>], y: &[f64]) -> LinearModel {
    let n = x.len();
    let m = x.first().map_or(0, Vec::len);
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut means = vec![0.0; m];
    let mut scales = vec![0.0; m];
    for f in 0..m {
        let mean = x.iter().map(|r| r[f]).sum::<f64>() / n as f64;
        let var = x.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n as f64;
        means[f] = mean;
        scales[f] = var.sqrt();
    }
    // relative to the column's magnitude, so huge constant counts still count as constant
    let active: Vec<usize> = (0..m)
        .filter(|&f| scales[f] > 1e-12 * means[f].abs().max(1e-300))
        .collect();

    let mut coefficients = vec![0.0; m];
    if !active.is_empty() {
        let design = DMatrix::from_fn(n, active.len(), |i, j| {
            let f = active[j];
            (x[i][f] - means[f]) / scales[f]
        });
        let rhs = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = design.svd(true, true);
        let s_max = svd.singular_values.max();
        // same cutoff numpy's lstsq uses by default
        let eps = s_max * (n.max(active.len()) as f64) * f64::EPSILON;
        let beta = svd.solve(&rhs, eps).expect("U and V were computed");
        for (j, &f) in active.iter().enumerate() {
            coefficients[f] = beta[j] / scales[f];
        }
    }
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(b, mu)| b * mu)
            .sum::<f64>();
    LinearModel {
        intercept,
        coefficients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn exact_line() {
        let m = solve(&col(&[0.0, 1.0, 2.0]), &[1.0, 4.0, 7.0]);
        assert!((m.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((m.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_normal_equations() {
        // slope = cov(x, y) / var(x) = 1 / (2/3) = 1.5; intercept = 1 - 1.5
        let m = solve(&col(&[0.0, 1.0, 2.0]), &[0.0, 0.0, 3.0]);
        assert!((m.coefficients[0] - 1.5).abs() < 1e-12);
        assert!((m.intercept + 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_splits_weight() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = solve(&x, &y);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_features_predicts_mean() {
        let x: Vec<Vec<f64>> = vec![vec![]; 4];
        let m = solve(&x, &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(m.intercept, 3.0);
    }
}
