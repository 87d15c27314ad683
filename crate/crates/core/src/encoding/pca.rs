use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Halves the descriptor dimension, rounding down (never below one).
pub fn default_pca_dim(input_dim: usize) -> usize {
    (input_dim / 2).max(1)
}

/// Linear projection onto the top principal directions of the training data.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d x D`, rows orthonormal.
    pub components: DMatrix<f64>,
    /// Descending, non-negative.
    pub eigenvalues: Vec<f64>,
    /// Divide projected coordinates by `sqrt(eigenvalue)`.
    pub whiten: bool,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.project_iter(x.iter().copied()))
    }

    pub fn project_f32(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.project_iter(x.iter().map(|&v| v as f64)))
    }

    fn project_iter(&self, x: impl Iterator<Item = f64>) -> Vec<f64> {
        let centered: Vec<f64> = x.zip(&self.mean).map(|(v, m)| v - m).collect();
        (0..self.output_dim())
            .map(|r| {
                let dot: f64 = self.components.row(r).iter().zip(&centered).map(|(a, b)| a * b).sum();
                if self.whiten {
                    dot / (self.eigenvalues[r] + 1e-12).sqrt()
                } else {
                    dot
                }
            })
            .collect()
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (r, &zr) in z.iter().enumerate() {
            let scale = if self.whiten { (self.eigenvalues[r] + 1e-12).sqrt() } else { 1.0 };
            for (o, c) in out.iter_mut().zip(self.components.row(r).iter()) {
                *o += zr * scale * c;
            }
        }
        out
    }
}

/// Fits PCA on the rows of `x` (samples are rows) keeping `d` components.
pub fn fit_pca(x: &DMatrix<f64>, d: usize, whiten: bool) -> Result<PcaModel> {
    let (n, dim) = x.shape();
    if n < 2 {
        return Err(Error::Degenerate(format!("PCA needs at least 2 samples, got {n}")));
    }
    if d == 0 || d > dim.min(n) {
        return Err(Error::invalid(format!("PCA target dimension {d} outside [1, {}]", dim.min(n))));
    }
    let mean: Vec<f64> = (0..dim).map(|j| x.column(j).mean()).collect();
    let mut centered = x.clone();
    for (j, m) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-m);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = DMatrix::zeros(d, dim);
    let mut eigenvalues = Vec::with_capacity(d);
    for (r, &i) in order.iter().take(d).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        components.row_mut(r).copy_from(&v.transpose());
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        whiten,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_two_rule() {
        let dims: Vec<usize> = [30, 96, 108, 192].iter().map(|&d| default_pca_dim(d)).collect();
        assert_eq!(dims, vec![15, 48, 54, 96]);
        assert_eq!(default_pca_dim(7), 3);
        assert_eq!(default_pca_dim(1), 1);
    }

    #[test]
    fn identical_rows_have_zero_variance() {
        let x = DMatrix::from_fn(5, 3, |_, j| j as f64 + 1.0);
        let pca = fit_pca(&x, 2, false).unwrap();
        assert!(pca.eigenvalues.iter().all(|&e| e.abs() < 1e-12));
        let z = pca.project(&[1.0, 2.0, 3.0]).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn points_on_a_line() {
        // y = 2x: covariance is s * [[1, 2], [2, 4]], eigenvector (1, 2)/sqrt(5), other eigenvalue 0.
        let x = DMatrix::from_fn(6, 2, |i, j| (i as f64 - 2.0) * if j == 0 { 1.0 } else { 2.0 });
        let pca = fit_pca(&x, 2, false).unwrap();
        let s5 = 5f64.sqrt();
        assert!((pca.components[(0, 0)] - 1.0 / s5).abs() < 1e-12);
        assert!((pca.components[(0, 1)] - 2.0 / s5).abs() < 1e-12);
        assert!(pca.eigenvalues[1].abs() < 1e-12);
        // Sample variance of x is 3.5; along the line it scales by 1 + 4.
        assert!((pca.eigenvalues[0] - 17.5).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let x = DMatrix::from_element(1, 3, 1.0);
        assert!(matches!(fit_pca(&x, 1, false), Err(Error::Degenerate(_))));
        let x = DMatrix::from_element(4, 3, 1.0);
        assert!(fit_pca(&x, 0, false).is_err());
        assert!(fit_pca(&x, 4, false).is_err());
        let pca = fit_pca(&DMatrix::from_fn(4, 3, |i, j| (i * j) as f64), 1, false).unwrap();
        assert!(pca.project(&[1.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn components_orthonormal_and_mean_roundtrips(seed in 0u64..1000, n in 3usize..30, dim in 1usize..7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-3.0..3.0));
            let d = default_pca_dim(dim).min(n);
            let pca = fit_pca(&x, d, false).unwrap();
            let gram = &pca.components * pca.components.transpose();
            proptest::prop_assert!((gram - DMatrix::identity(d, d)).amax() < 1e-6);
            proptest::prop_assert!(pca.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let z = pca.project(&pca.mean).unwrap();
            let back = pca.reconstruct(&z);
            for (a, b) in back.iter().zip(&pca.mean) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
