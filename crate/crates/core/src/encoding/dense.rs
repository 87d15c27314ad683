use crate::dataset::{FrameFeatureStream, FrameSet};

use super::fisher::l2_normalize;

/// L2-normalized mean of the sampled vectors whose frame lies in `frames`.
///
/// Returns the zero vector when no sampled frame falls inside the set, which
/// happens for short shots on strided channels.
pub fn mean_pool(stream: &FrameFeatureStream, frames: &FrameSet) -> Vec<f64> {
    let mut sum = vec![0.0; stream.dim];
    let mut n = 0usize;
    for (frame, row) in stream.rows() {
        if frames.contains(frame) {
            n += 1;
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v as f64;
            }
        }
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    l2_normalize(&mut sum);
    sum
}
