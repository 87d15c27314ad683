use nalgebra::{DMatrix, DVector};

use super::lssvm::refine;
use crate::error::{Error, Result};

/// Squared-loss support vector regression `min lambda |u|^2 + sum (u.x_k - t_k)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl SvrModel {
    pub fn objective(&self, x: &DMatrix<f64>, t: &[f64]) -> f64 {
        svr_objective(&self.weights, x, t, self.lambda)
    }

    /// Analytic gradient `2 lambda u + 2 X^T (X u - t)`.
    pub fn gradient(&self, x: &DMatrix<f64>, t: &[f64]) -> Vec<f64> {
        let u = DVector::from_column_slice(&self.weights);
        let r = x * &u - DVector::from_column_slice(t);
        let g = (x.transpose() * r + &u * self.lambda) * 2.0;
        g.iter().copied().collect()
    }
}

pub fn svr_objective(u: &[f64], x: &DMatrix<f64>, t: &[f64], lambda: f64) -> f64 {
    let uv = DVector::from_column_slice(u);
    let r = x * &uv - DVector::from_column_slice(t);
    lambda * uv.norm_squared() + r.norm_squared()
}

/// Closed-form solve; uses the `N x N` dual form when `D > N`.
pub fn train_svr(x: &DMatrix<f64>, t: &[f64], lambda: f64) -> Result<SvrModel> {
    let (n, d) = x.shape();
    if n == 0 {
        return Err(Error::invalid("SVR needs at least one sample"));
    }
    if t.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t.len() });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    let tv = DVector::from_column_slice(t);
    let singular = || Error::Singular("SVR normal equations".into());
    let u = if d <= n {
        let mut a = x.transpose() * x;
        for i in 0..d {
            a[(i, i)] += lambda;
        }
        let rhs = x.transpose() * &tv;
        refine(&a, &a.clone().lu(), &rhs).ok_or_else(singular)?
    } else {
        let mut g = x * x.transpose();
        for i in 0..n {
            g[(i, i)] += lambda;
        }
        let beta = refine(&g, &g.clone().lu(), &tv).ok_or_else(singular)?;
        x.transpose() * beta
    };
    Ok(SvrModel {
        weights: u.iter().copied().collect(),
        lambda,
    })
}
