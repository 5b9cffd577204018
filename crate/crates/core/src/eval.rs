//! Match-set metrics: epipolar and projective precision, recall, F-measure
//! and homography corner accuracy.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::epipolar::{epipolar_residual, normalize_point};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::synth::warp_point;

pub const DEFAULT_TAU_EPI: f64 = 1e-4;
pub const DEFAULT_TAU_PX: f64 = 5.0;
/// Mean corner error threshold for a correct homography.
pub const DEFAULT_CORNER_TAU_PX: f64 = 4.0;
/// Stricter variant of the same metric.
pub const STRICT_CORNER_TAU_PX: f64 = 3.0;

/// A ratio that is reported as 0 together with a flag when its denominator
/// is empty, so aggregates never see NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    pub fn of(hits: usize, total: usize) -> Self {
        if total == 0 {
            Self { value: 0.0, undefined: true }
        } else {
            Self { value: hits as f64 / total as f64, undefined: false }
        }
    }
}

/// Where the true partner of an image-A point lies in image B.
#[derive(Debug, Clone)]
pub enum WarpTruth {
    Homography(Matrix3<f64>),
    /// Per image-A keypoint, its true image-B location if known.
    Flow(Vec<Option<Point2>>),
}

/// Fraction of matches whose normalized-coordinate epipolar residual under
/// `e_gt` is at most `tau`.
pub fn precision_epi(
    matches: &[(usize, usize)],
    kps_a: &[Point2],
    kps_b: &[Point2],
    e_gt: &Matrix3<f64>,
    k_a: &Matrix3<f64>,
    k_b: &Matrix3<f64>,
    tau: f64,
) -> Result<Ratio> {
    let ka_inv = k_a.try_inverse().ok_or_else(|| Error::ConfigInvalid("intrinsics A not invertible".into()))?;
    let kb_inv = k_b.try_inverse().ok_or_else(|| Error::ConfigInvalid("intrinsics B not invertible".into()))?;
    let hits = matches
        .iter()
        .filter(|&&(i, j)| {
            let a = normalize_point(&ka_inv, kps_a[i]);
            let b = normalize_point(&kb_inv, kps_b[j]);
            epipolar_residual(e_gt, a, b) <= tau
        })
        .count();
    Ok(Ratio::of(hits, matches.len()))
}

/// Fraction of matches landing within `tau_px` of the true warped location.
/// Matches whose source has no known truth, or warps to infinity, miss.
pub fn precision_proj(
    matches: &[(usize, usize)],
    kps_a: &[Point2],
    kps_b: &[Point2],
    truth: &WarpTruth,
    tau_px: f64,
) -> Ratio {
    let hits = matches
        .iter()
        .filter(|&&(i, j)| {
            let target = match truth {
                WarpTruth::Homography(h) => warp_point(h, kps_a[i]).ok(),
                WarpTruth::Flow(f) => f.get(i).copied().flatten(),
            };
            target.is_some_and(|t| t.dist(kps_b[j]) <= tau_px)
        })
        .count();
    Ratio::of(hits, matches.len())
}

/// `|matches ∩ gt| / |gt|`.
pub fn recall(matches: &[(usize, usize)], gt: &[(usize, usize)]) -> Ratio {
    let truth: std::collections::BTreeSet<(usize, usize)> = gt.iter().copied().collect();
    let found: std::collections::BTreeSet<(usize, usize)> =
        matches.iter().copied().filter(|m| truth.contains(m)).collect();
    Ratio::of(found.len(), truth.len())
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn image_corners((w, h): (f64, f64)) -> [Point2; 4] {
    [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, h), Point2::new(0.0, h)]
}

/// Mean distance between the image corners warped by each homography.
pub fn corner_error(h_hat: &Matrix3<f64>, h_gt: &Matrix3<f64>, image_size: (f64, f64)) -> Result<f64> {
    let mut total = 0.0;
    for c in image_corners(image_size) {
        total += warp_point(h_hat, c)?.dist(warp_point(h_gt, c)?);
    }
    Ok(total / 4.0)
}

/// True when the mean corner error is at most `tau_px`. A corner mapped to
/// infinity counts as a failure.
pub fn corner_accuracy(h_hat: &Matrix3<f64>, h_gt: &Matrix3<f64>, image_size: (f64, f64), tau_px: f64) -> bool {
    corner_error(h_hat, h_gt, image_size).is_ok_and(|e| e <= tau_px)
}

/// Normalized DLT over all pairs (at least four).
pub fn fit_homography(pairs: &[(Point2, Point2)]) -> Option<Matrix3<f64>> {
    if pairs.len() < 4 {
        return None;
    }
    let similarity = |pts: &mut dyn Iterator<Item = Point2>| {
        let v: Vec<Point2> = pts.collect();
        let n = v.len() as f64;
        let c = v.iter().fold(Point2::default(), |a, &b| a + b * (1.0 / n));
        let spread = v.iter().map(|p| p.dist(c)).sum::<f64>() / n;
        let s = if spread > 0.0 { std::f64::consts::SQRT_2 / spread } else { 1.0 };
        Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
    };
    let ta = similarity(&mut pairs.iter().map(|p| p.0));
    let tb = similarity(&mut pairs.iter().map(|p| p.1));
    let apply = |t: &Matrix3<f64>, p: Point2| Point2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)]);
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::zeros(rows, 9);
    for (k, &(pa, pb)) in pairs.iter().enumerate() {
        let (x, y) = (apply(&ta, pa).x, apply(&ta, pa).y);
        let q = apply(&tb, pb);
        let (u, v) = (q.x, q.y);
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd.singular_values.argmin();
    let h = v_t.row(idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let out = tb.try_inverse()? * hn * ta;
    let s = out[(2, 2)];
    let out = if s.abs() > 1e-15 { out / s } else { out };
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Seeded RANSAC over 4-point samples, refit on the largest inlier set.
pub fn estimate_homography(
    pairs: &[(Point2, Point2)],
    thresh_px: f64,
    iters: usize,
    seed: u64,
) -> Option<Matrix3<f64>> {
    if pairs.len() < 4 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inliers_of = |h: &Matrix3<f64>| -> Vec<usize> {
        (0..pairs.len()).filter(|&k| warp_point(h, pairs[k].0).is_ok_and(|q| q.dist(pairs[k].1) <= thresh_px)).collect()
    };
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..iters {
        let mut pick = [0usize; 4];
        for s in 0..4 {
            pick[s] = loop {
                let c = rng.random_range(0..pairs.len());
                if !pick[..s].contains(&c) {
                    break c;
                }
            };
        }
        let sample: Vec<_> = pick.iter().map(|&k| pairs[k]).collect();
        if let Some(h) = fit_homography(&sample) {
            let inl = inliers_of(&h);
            if inl.len() > best.len() {
                best = inl;
            }
        }
    }
    if best.len() < 4 {
        return None;
    }
    let refit: Vec<_> = best.iter().map(|&k| pairs[k]).collect();
    fit_homography(&refit)
}

/// Per-scene metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Absent when the scene carries no essential matrix.
    pub precision_epi: Option<f64>,
    pub precision_proj: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub n_matches: usize,
    /// 1.0 or 0.0 for a scene; absent without a ground-truth homography.
    pub corner_acc: Option<f64>,
    /// Set when there are no matches; precisions are then 0.
    pub empty_matches: bool,
    /// Set when the ground truth is empty; recall is then 0.
    pub recall_undefined: bool,
}

impl MatchReport {
    pub fn new(
        precision_epi: Option<Ratio>,
        precision_proj: Ratio,
        recall: Ratio,
        n_matches: usize,
        corner_acc: Option<bool>,
    ) -> Self {
        Self {
            precision_epi: precision_epi.map(|r| r.value),
            precision_proj: precision_proj.value,
            recall: recall.value,
            f_measure: f_measure(precision_proj.value, recall.value),
            n_matches,
            corner_acc: corner_acc.map(|c| if c { 1.0 } else { 0.0 }),
            empty_matches: n_matches == 0,
            recall_undefined: recall.undefined,
        }
    }
}
