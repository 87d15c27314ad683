//! Diagonal-covariance Gaussian mixture fitted by EM from a k-means++ start.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const WEIGHT_FLOOR: f64 = 1e-6;
/// Variance floor relative to the global per-dimension variance.
pub const RELATIVE_VARIANCE_FLOOR: f64 = 1e-4;
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-10;
const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `k x d`, row-major.
    pub means: Vec<f64>,
    /// `k x d`, row-major.
    pub variances: Vec<f64>,
    dim: usize,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() % k != 0 || means.len() != variances.len() {
            return Err(Error::ModelFormat("inconsistent GMM parameter sizes".into()));
        }
        let dim = means.len() / k;
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::ModelFormat("GMM variances must be positive".into()));
        }
        Ok(GmmModel {
            weights,
            means,
            variances,
            dim,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.dim..(c + 1) * self.dim]
    }

    pub fn variance(&self, c: usize) -> &[f64] {
        &self.variances[c * self.dim..(c + 1) * self.dim]
    }

    /// Writes per-component `log(pi_c) + log N(x; mu_c, sigma_c^2)` into `out`.
    fn joint_log_densities(&self, x: &[f64], out: &mut [f64]) {
        let log_2pi = (2.0 * PI).ln();
        for (c, o) in out.iter_mut().enumerate() {
            let mu = self.mean(c);
            let var = self.variance(c);
            let mut acc = 0.0;
            for j in 0..self.dim {
                let diff = x[j] - mu[j];
                acc += diff * diff / var[j] + var[j].ln() + log_2pi;
            }
            *o = self.weights[c].ln() - 0.5 * acc;
        }
    }

    /// Posterior responsibilities of every component for `x`, written into `out`;
    /// returns `log p(x)`.
    pub fn responsibilities(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.joint_log_densities(x, out);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
        max + sum.ln()
    }

    /// Mean per-sample log-likelihood of row-major `data`.
    pub fn mean_log_likelihood(&self, data: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.k()];
        let n = data.len() / self.dim;
        let total: f64 = data
            .chunks_exact(self.dim)
            .map(|x| self.responsibilities(x, &mut buf))
            .sum();
        total / n as f64
    }
}

/// Result of an EM run.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood before each M-step; the last entry belongs to `model`.
    pub log_likelihood: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub kmeans_iter: usize,
}

impl GmmOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        GmmOptions {
            k,
            seed,
            max_iter: 200,
            rel_tol: 1e-6,
            kmeans_iter: 10,
        }
    }
}

/// Fits a `k`-component diagonal GMM to the rows of `x`.
pub fn fit_gmm(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<GmmModel> {
    Ok(fit_gmm_with(x, &GmmOptions::new(k, seed))?.model)
}

pub fn fit_gmm_with(x: &DMatrix<f64>, opts: &GmmOptions) -> Result<GmmFit> {
    let (n, d) = x.shape();
    let k = opts.k;
    if k == 0 {
        return Err(Error::invalid("GMM needs at least one component"));
    }
    if n < k {
        return Err(Error::Degenerate(format!("GMM with k={k} needs at least {k} samples, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("GMM input has zero dimensions"));
    }
    let data: Vec<f64> = x.transpose().as_slice().to_vec();

    let global_var: Vec<f64> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let m = col.mean();
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
        })
        .collect();
    let var_floor: Vec<f64> = global_var
        .iter()
        .map(|v| (RELATIVE_VARIANCE_FLOOR * v).max(ABSOLUTE_VARIANCE_FLOOR))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let assignment = kmeans(&data, d, k, opts.kmeans_iter, &mut rng)?;
    let mut model = init_from_assignment(&data, d, k, &assignment, &var_floor);

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let stats = e_step(&model, &data);
        let ll = stats.log_likelihood / n as f64;
        let gain = trace.last().map(|&prev| ll - prev);
        trace.push(ll);
        if gain.is_some_and(|g| g < opts.rel_tol * ll.abs()) {
            converged = true;
            break;
        }
        model = m_step(&model, &stats, n, &var_floor);
    }
    if !converged {
        trace.push(e_step(&model, &data).log_likelihood / n as f64);
    }
    Ok(GmmFit {
        model,
        log_likelihood: trace,
    })
}

struct SufficientStats {
    log_likelihood: f64,
    /// Per component.
    resp: Vec<f64>,
    /// `k x d`: sum of gamma * (x - mu_old).
    first: Vec<f64>,
    /// `k x d`: sum of gamma * (x - mu_old)^2.
    second: Vec<f64>,
}

impl SufficientStats {
    fn zeros(k: usize, d: usize) -> Self {
        SufficientStats {
            log_likelihood: 0.0,
            resp: vec![0.0; k],
            first: vec![0.0; k * d],
            second: vec![0.0; k * d],
        }
    }

    fn add(&mut self, other: &SufficientStats) {
        self.log_likelihood += other.log_likelihood;
        for (a, b) in self.resp.iter_mut().zip(&other.resp) {
            *a += b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
    }
}

/// Chunks are fixed-size and reduced in order, so the result does not depend
/// on how rayon schedules them.
fn e_step(model: &GmmModel, data: &[f64]) -> SufficientStats {
    let (k, d) = (model.k(), model.dim());
    let partials: Vec<SufficientStats> = data
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut s = SufficientStats::zeros(k, d);
            let mut gamma = vec![0.0; k];
            for x in chunk.chunks_exact(d) {
                s.log_likelihood += model.responsibilities(x, &mut gamma);
                for c in 0..k {
                    let g = gamma[c];
                    if g == 0.0 {
                        continue;
                    }
                    s.resp[c] += g;
                    let mu = model.mean(c);
                    for j in 0..d {
                        let diff = x[j] - mu[j];
                        s.first[c * d + j] += g * diff;
                        s.second[c * d + j] += g * diff * diff;
                    }
                }
            }
            s
        })
        .collect();
    let mut total = SufficientStats::zeros(k, d);
    for p in &partials {
        total.add(p);
    }
    total
}

fn m_step(old: &GmmModel, stats: &SufficientStats, n: usize, var_floor: &[f64]) -> GmmModel {
    let (k, d) = (old.k(), old.dim());
    let mut means = old.means.clone();
    let mut variances = old.variances.clone();
    for c in 0..k {
        let nc = stats.resp[c];
        if nc <= f64::MIN_POSITIVE {
            continue;
        }
        for j in 0..d {
            let shift = stats.first[c * d + j] / nc;
            means[c * d + j] = old.means[c * d + j] + shift;
            let var = stats.second[c * d + j] / nc - shift * shift;
            variances[c * d + j] = var.max(var_floor[j]);
        }
    }
    let fractions: Vec<f64> = stats.resp.iter().map(|r| r / n as f64).collect();
    GmmModel {
        weights: floor_weights(&fractions, WEIGHT_FLOOR),
        means,
        variances,
        dim: d,
    }
}

/// Maximizes `sum r_c log pi_c` subject to `pi_c >= floor` and `sum pi_c = 1`:
/// components below the floor are pinned to it and the rest share the remainder
/// proportionally, repeated until no free component falls below the floor.
fn floor_weights(fractions: &[f64], floor: f64) -> Vec<f64> {
    let k = fractions.len();
    let mut pinned = vec![false; k];
    loop {
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let free_mass: f64 = fractions.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(f, _)| f).sum();
        let remainder = 1.0 - floor * n_pinned as f64;
        let weights: Vec<f64> = fractions
            .iter()
            .zip(&pinned)
            .map(|(&f, &p)| if p || free_mass <= 0.0 { floor } else { f / free_mass * remainder })
            .collect();
        let mut changed = false;
        for c in 0..k {
            if !pinned[c] && weights[c] < floor {
                pinned[c] = true;
                changed = true;
            }
        }
        if !changed {
            let total: f64 = weights.iter().sum();
            return weights.iter().map(|w| w / total).collect();
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; returns hard assignments.
fn kmeans(data: &[f64], d: usize, k: usize, iters: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = data.len() / d;
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut centers: Vec<f64> = Vec::with_capacity(k * d);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..d])).collect();
    for _ in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &b) in best.iter().enumerate() {
                if target < b {
                    chosen = i;
                    break;
                }
                target -= b;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centers.len();
        centers.extend_from_slice(row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(row(i), &centers[start..start + d]));
        }
    }

    let assign_all = |centers: &[f64]| -> Vec<(usize, f64)> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let x = row(i);
                (0..k)
                    .map(|c| (c, sq_dist(x, &centers[c * d..(c + 1) * d])))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("k >= 1")
            })
            .collect()
    };

    let mut assignment = assign_all(&centers);
    for _ in 0..iters {
        repair_empty(&mut assignment, k)?;
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            for j in 0..d {
                centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        }
        assignment = assign_all(&centers);
    }
    repair_empty(&mut assignment, k)?;
    Ok(assignment.into_iter().map(|(c, _)| c).collect())
}

/// Moves the point farthest from its center into each empty cluster.
fn repair_empty(assignment: &mut [(usize, f64)], k: usize) -> Result<()> {
    loop {
        let mut counts = vec![0usize; k];
        for &(c, _) in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let (far, dist) = assignment
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| counts[*c] > 1)
            .map(|(i, &(_, dist))| (i, dist))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Degenerate("cannot fill empty GMM component".into()))?;
        if dist <= 0.0 {
            return Err(Error::Degenerate(
                "empty GMM component: fewer distinct samples than components".into(),
            ));
        }
        assignment[far] = (empty, 0.0);
    }
}

fn init_from_assignment(data: &[f64], d: usize, k: usize, assignment: &[usize], var_floor: &[f64]) -> GmmModel {
    let n = assignment.len();
    let mut counts = vec![0usize; k];
    let mut means = vec![0.0; k * d];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for j in 0..d {
            means[c * d + j] += data[i * d + j];
        }
    }
    for c in 0..k {
        for j in 0..d {
            means[c * d + j] /= counts[c] as f64;
        }
    }
    let mut variances = vec![0.0; k * d];
    for (i, &c) in assignment.iter().enumerate() {
        for j in 0..d {
            let diff = data[i * d + j] - means[c * d + j];
            variances[c * d + j] += diff * diff;
        }
    }
    for c in 0..k {
        for j in 0..d {
            variances[c * d + j] = (variances[c * d + j] / counts[c] as f64).max(var_floor[j]);
        }
    }
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    GmmModel {
        weights: floor_weights(&fractions, WEIGHT_FLOOR),
        means,
        variances,
        dim: d,
    }
}
