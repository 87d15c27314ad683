//! Linear Least-Squares SVM.
//!
//! Training solves `min 1/2 |w|^2 + gamma/2 sum e_i^2` with
//! `e_i = y_i - (w.x_i + b)`. The dual is the saddle system
//! `[0 1^T; 1 K + I/gamma] [b; a] = [0; y]` with `K = X X^T` and `w = X^T a`;
//! the primal is a `(D+1)`-sized ridge system. Both give the same model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Solver {
    /// Primal when `D < n`, dual otherwise.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LssvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Dual coefficients, kept when the dual system was solved.
    pub dual: Option<Vec<f64>>,
}

impl LssvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Largest violation of the optimality conditions on the training data:
    /// with `a_i = gamma * e_i`, requires `w = X^T a` and `sum a = 0`.
    pub fn kkt_residual(&self, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let w = DVector::from_column_slice(&self.weights);
        let f = x * &w;
        let a: DVector<f64> = DVector::from_iterator(y.len(), y.iter().zip(f.iter()).map(|(yi, fi)| self.gamma * (yi - fi - self.bias)));
        let stationarity = (&w - x.transpose() * &a).amax();
        stationarity.max(a.sum().abs())
    }
}

fn check_inputs(x: &DMatrix<f64>, n_targets: usize, gamma: f64) -> Result<()> {
    if x.nrows() != n_targets {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: n_targets,
        });
    }
    if x.nrows() < 2 {
        return Err(Error::Degenerate("LSSVM needs at least two samples".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

fn check_binary(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Degenerate("LSSVM needs both classes present".into()));
    }
    Ok(())
}

/// Trains a binary classifier on rows of `x` with labels in `{-1, +1}`.
pub fn train_lssvm(x: &DMatrix<f64>, y: &[f64], gamma: f64) -> Result<LssvmModel> {
    train_lssvm_with(x, y, gamma, Solver::Auto)
}

pub fn train_lssvm_with(x: &DMatrix<f64>, y: &[f64], gamma: f64, solver: Solver) -> Result<LssvmModel> {
    check_inputs(x, y.len(), gamma)?;
    check_binary(y)?;
    Ok(solve_many(x, &[y.to_vec()], gamma, solver)?.remove(0))
}

/// One-vs-rest classifiers for `n_classes` classes sharing one factorization.
pub fn train_one_vs_rest(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, gamma: f64) -> Result<Vec<LssvmModel>> {
    check_inputs(x, labels.len(), gamma)?;
    let targets: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect())
        .collect();
    for t in &targets {
        check_binary(t)?;
    }
    solve_many(x, &targets, gamma, Solver::Auto)
}

fn solve_many(x: &DMatrix<f64>, targets: &[Vec<f64>], gamma: f64, solver: Solver) -> Result<Vec<LssvmModel>> {
    let (n, d) = x.shape();
    let use_primal = match solver {
        Solver::Auto => d < n,
        Solver::Primal => true,
        Solver::Dual => false,
    };
    let singular = || Error::Singular("LSSVM system".into());
    if use_primal {
        let xt = x.transpose();
        let mut a = DMatrix::zeros(d + 1, d + 1);
        a.view_mut((0, 0), (d, d)).copy_from(&(&xt * x));
        for i in 0..d {
            a[(i, i)] += 1.0 / gamma;
        }
        let col_sums: DVector<f64> = DVector::from_iterator(d, (0..d).map(|j| x.column(j).sum()));
        a.view_mut((0, d), (d, 1)).copy_from(&col_sums);
        a.view_mut((d, 0), (1, d)).copy_from(&col_sums.transpose());
        a[(d, d)] = n as f64;
        let lu = a.clone().lu();
        targets
            .iter()
            .map(|y| {
                let y = DVector::from_column_slice(y);
                let mut rhs = DVector::zeros(d + 1);
                rhs.rows_mut(0, d).copy_from(&(&xt * &y));
                rhs[d] = y.sum();
                let sol = refine(&a, &lu, &rhs).ok_or_else(singular)?;
                Ok(LssvmModel {
                    weights: sol.rows(0, d).iter().copied().collect(),
                    bias: sol[d],
                    gamma,
                    dual: None,
                })
            })
            .collect()
    } else {
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let k = x * x.transpose();
        a.view_mut((1, 1), (n, n)).copy_from(&k);
        for i in 1..=n {
            a[(0, i)] = 1.0;
            a[(i, 0)] = 1.0;
            a[(i, i)] += 1.0 / gamma;
        }
        let lu = a.clone().lu();
        targets
            .iter()
            .map(|y| {
                let mut rhs = DVector::zeros(n + 1);
                rhs.rows_mut(1, n).copy_from_slice(y);
                let sol = refine(&a, &lu, &rhs).ok_or_else(singular)?;
                let alpha = sol.rows(1, n).into_owned();
                let w = x.transpose() * &alpha;
                Ok(LssvmModel {
                    weights: w.iter().copied().collect(),
                    bias: sol[0],
                    gamma,
                    dual: Some(alpha.iter().copied().collect()),
                })
            })
            .collect()
    }
}

/// LU solve plus one step of iterative refinement.
pub(crate) fn refine(
    a: &DMatrix<f64>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
) -> Option<DVector<f64>> {
    let mut sol = lu.solve(rhs)?;
    let residual = rhs - a * &sol;
    if let Some(delta) = lu.solve(&residual) {
        sol += delta;
    }
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Log-spaced regularization grid `10^-3 ..= 10^3`.
pub fn gamma_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}
