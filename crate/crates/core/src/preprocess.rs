//! Keypoint preprocessing: spatial non-maximum suppression and a ratio test
//! that drops descriptors sitting inside tight repetitive clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Rank (1-based) of the similarity compared against the best one.
pub const REPETITION_RANK: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepetitionFilterParams {
    /// Best-match similarity above which a descriptor counts as ambiguous.
    pub gamma1: f64,
    /// Threshold on the ratio of the 6th to the 1st similarity.
    pub gamma2: f64,
    pub nms_radius: f64,
}

impl Default for RepetitionFilterParams {
    fn default() -> Self {
        Self { gamma1: 0.94, gamma2: 0.97, nms_radius: 4.0 }
    }
}

impl RepetitionFilterParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |g: f64| g > 0.0 && g <= 1.0;
        if !unit(self.gamma1) || !unit(self.gamma2) {
            return Err(Error::ConfigInvalid(format!(
                "gamma1/gamma2 must be in (0, 1], got {}/{}",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.nms_radius >= 0.0) {
            return Err(Error::ConfigInvalid(format!("nms_radius must be >= 0, got {}", self.nms_radius)));
        }
        Ok(())
    }
}

/// Greedy NMS. Visits points by descending score (ties: lower index first)
/// and keeps a point unless an already kept one lies within `radius`.
/// Returns kept indices in ascending order.
pub fn nms(keypoints: &[(Point2, f64)], radius: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keypoints.len()).collect();
    order.sort_by(|&a, &b| keypoints[b].1.total_cmp(&keypoints[a].1).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let p = keypoints[i].0;
        // a zero radius suppresses nothing, not even coincident points
        if radius <= 0.0 || kept.iter().all(|&k| keypoints[k].0.dist(p) > radius) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Keep-mask for the modified ratio test. A descriptor is dropped when its
/// best similarity to any other descriptor exceeds `gamma1` and the ratio of
/// its 6th best to its best exceeds `gamma2`. Rows with fewer than six other
/// descriptors are kept.
pub fn repetition_filter(descriptors: &[Vec<f64>], params: &RepetitionFilterParams) -> Vec<bool> {
    let n = descriptors.len();
    let mut sims = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine(&descriptors[i], &descriptors[j]);
            sims[i * n + j] = s;
            sims[j * n + i] = s;
        }
    }
    (0..n)
        .map(|i| {
            if n - 1 < REPETITION_RANK {
                return true;
            }
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sims[i * n + j]).collect();
            row.sort_unstable_by(|a, b| b.total_cmp(a));
            let first = row[0];
            let sixth = row[REPETITION_RANK - 1];
            !(first > params.gamma1 && sixth / first > params.gamma2)
        })
        .collect()
}
