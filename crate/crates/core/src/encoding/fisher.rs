//! Fisher Vector encoding with first- and second-order statistics.
//!
//! Unnormalized vectors are plain sums over descriptors (no division by the
//! descriptor count), so the vector of a frame set is the sum of its frames'
//! vectors. Power and L2 normalization are applied only when a set is final;
//! both are invariant to positive scaling.

use super::GmmModel;
use crate::error::{Error, Result};

/// Layout: `k` mean-gradient blocks of length `d`, then `k` variance-gradient blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct UnnormalizedFv {
    pub values: Vec<f64>,
    pub support_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedFv {
    pub values: Vec<f64>,
}

pub fn fv_dim(d: usize, k: usize) -> usize {
    2 * d * k
}

impl UnnormalizedFv {
    pub fn zeros(dim: usize) -> Self {
        UnnormalizedFv {
            values: vec![0.0; dim],
            support_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn add_assign(&mut self, other: &UnnormalizedFv) -> Result<()> {
        self.add_slice(&other.values, other.support_count)
    }

    pub(crate) fn add_slice(&mut self, values: &[f64], count: usize) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(values) {
            *a += b;
        }
        self.support_count += count;
        Ok(())
    }

    /// Removes a subset's contribution; the inverse of [`UnnormalizedFv::add_assign`].
    pub fn sub_assign(&mut self, other: &UnnormalizedFv) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
        self.support_count = self.support_count.saturating_sub(other.support_count);
        Ok(())
    }
}

/// Encodes a set of (already projected) descriptors against `gmm`.
pub fn encode_frame<D: AsRef<[f64]>>(descriptors: &[D], gmm: &GmmModel) -> Result<UnnormalizedFv> {
    let (k, d) = (gmm.k(), gmm.dim());
    let mut fv = UnnormalizedFv::zeros(fv_dim(d, k));
    let mut gamma = vec![0.0; k];
    let mean_scale: Vec<f64> = gmm.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let var_scale: Vec<f64> = gmm.weights.iter().map(|w| 1.0 / (2.0 * w).sqrt()).collect();
    let std: Vec<f64> = gmm.variances.iter().map(|v| v.sqrt()).collect();
    for x in descriptors {
        let x = x.as_ref();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        gmm.responsibilities(x, &mut gamma);
        for c in 0..k {
            let g = gamma[c];
            if g == 0.0 {
                continue;
            }
            let mu = gmm.mean(c);
            let sd = &std[c * d..(c + 1) * d];
            let (mean_block, var_block) = (c * d, (k + c) * d);
            for j in 0..d {
                let u = (x[j] - mu[j]) / sd[j];
                fv.values[mean_block + j] += g * u * mean_scale[c];
                fv.values[var_block + j] += g * (u * u - 1.0) * var_scale[c];
            }
        }
    }
    fv.support_count = descriptors.len();
    Ok(fv)
}

/// Element-wise sum of equally sized vectors. An empty list is an error since
/// the dimension is unknown.
pub fn aggregate(fvs: &[UnnormalizedFv]) -> Result<UnnormalizedFv> {
    let first = fvs.first().ok_or_else(|| Error::invalid("aggregate of an empty list"))?;
    let mut out = UnnormalizedFv::zeros(first.dim());
    for fv in fvs {
        out.add_assign(fv)?;
    }
    Ok(out)
}

/// Signed square root, then L2 normalization; zero stays zero.
pub fn normalize(fv: &UnnormalizedFv) -> NormalizedFv {
    NormalizedFv {
        values: power_l2(&fv.values),
    }
}

fn power_l2(values: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = values.iter().map(|v| v.signum() * v.abs().sqrt()).collect();
    l2_normalize(&mut z);
    z
}

pub(crate) fn l2_normalize(z: &mut [f64]) {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in z.iter_mut() {
            *v /= norm;
        }
    } else {
        z.iter_mut().for_each(|v| *v = 0.0);
    }
}
