use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Principal axes of a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Column means of the training data (length m).
    pub mean: DVector<f64>,
    /// m x q, orthonormal columns, leading component first.
    pub components: DMatrix<f64>,
    /// Eigenvalues of the sample covariance for the kept components.
    pub variances: Vec<f64>,
    /// Share of total variance per kept component.
    pub explained: Vec<f64>,
}

/// Fits on the sample covariance (n - 1 denominator) and keeps the fewest
/// leading components whose cumulative share reaches `variance_threshold`.
pub fn pca_fit(x: &DMatrix<f64>, variance_threshold: f64) -> Result<PcaModel> {
    let (n, m) = x.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance threshold {variance_threshold} is not in (0, 1]"
        )));
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance);
    }

    let mut q = m;
    let mut cumulative = 0.0;
    for (k, v) in values.iter().enumerate() {
        cumulative += v / total;
        if cumulative >= variance_threshold - 1e-12 {
            q = k + 1;
            break;
        }
    }

    let mut components = DMatrix::zeros(m, q);
    for (k, &i) in order.iter().take(q).enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // Fix the sign: largest-magnitude entry positive.
        let pivot = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if pivot < 0.0 {
            v = -v;
        }
        components.set_column(k, &v);
    }
    Ok(PcaModel {
        mean,
        components,
        variances: values[..q].to_vec(),
        explained: values[..q].iter().map(|v| v / total).collect(),
    })
}

impl PcaModel {
    pub fn m(&self) -> usize {
        self.components.nrows()
    }

    pub fn q(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                found: x.ncols(),
            });
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.components)
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.transform(&row)?.iter().copied().collect())
    }

    pub fn component_names(&self) -> Vec<String> {
        (1..=self.q()).map(|k| format!("pc{k}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn rank_one_data() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i as f64) * if j == 0 { 1.0 } else { 2.0 });
        let model = pca_fit(&x, 0.9).unwrap();
        assert_eq!(model.q(), 1);
        assert!((model.explained[0] - 1.0).abs() < 1e-12);
        let full = pca_fit(&x, 1.0).unwrap();
        assert_eq!(full.q(), 1);
    }

    #[test]
    fn isotropic_needs_both() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(400, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_eq!(pca_fit(&x, 0.9).unwrap().q(), 2);
    }

    #[test]
    fn full_threshold_keeps_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let wide = DMatrix::from_fn(4, 6, |_, _| rng.random::<f64>());
        assert_eq!(pca_fit(&wide, 1.0).unwrap().q(), 3);
        let tall = DMatrix::from_fn(30, 5, |_, _| rng.random::<f64>());
        assert_eq!(pca_fit(&tall, 1.0).unwrap().q(), 5);
    }

    #[test]
    fn mean_maps_to_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>());
        let model = pca_fit(&x, 1.0).unwrap();
        let z = model.transform_row(model.mean.as_slice()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        assert!(matches!(pca_fit(&DMatrix::from_element(5, 2, 1.0), 0.9), Err(Error::ZeroVariance)));
        assert!(pca_fit(&DMatrix::from_element(1, 2, 1.0), 0.9).is_err());
        let model = pca_fit(&DMatrix::from_fn(5, 2, |i, j| (i * (j + 1)) as f64), 1.0).unwrap();
        assert!(matches!(model.transform(&DMatrix::zeros(2, 3)), Err(Error::Dimension { .. })));
    }
}
