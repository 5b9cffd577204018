//! Essential-matrix estimation, epipolar residuals, loss terms used as
//! diagnostics, and relative-pose error / AUC.

use std::collections::HashSet;

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::matching::AssignmentMatrix;

/// Singular values below this fraction of the largest count as zero.
const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix {
    e: Matrix3<f64>,
}

impl EssentialMatrix {
    /// Projects onto the essential manifold (singular values `(s, s, 0)`)
    /// and scales to unit Frobenius norm.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = u * Matrix3::from_diagonal(&Vector3::new(s, s, 0.0)) * v_t;
        Self { e }
    }

    /// `[t]x R` for the convention `x2 = R x1 + t`.
    pub fn from_pose(r: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        Self::from_matrix(&(skew(t) * r))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.e
    }

    pub fn singular_values(&self) -> Vector3<f64> {
        self.e.singular_values()
    }
}

pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

fn homogeneous(p: Point2) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 1.0)
}

/// Maps a pixel to normalized camera coordinates with `K^-1`.
pub fn normalize_point(k_inv: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = k_inv * homogeneous(p);
    Point2::new(v.x / v.z, v.y / v.z)
}

fn hartley(points: &[Point2]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let (cx, cy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let mean_dist = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn apply(t: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = t * homogeneous(p);
    Point2::new(v.x / v.z, v.y / v.z)
}

struct Conditioned {
    design: DMatrix<f64>,
    t1: Matrix3<f64>,
    t2: Matrix3<f64>,
}

fn condition(corrs: &[(Point2, Point2)], ka: &Matrix3<f64>, kb: &Matrix3<f64>) -> Result<Conditioned> {
    let ka_inv = ka.try_inverse().ok_or_else(|| Error::ConfigInvalid("intrinsics A not invertible".into()))?;
    let kb_inv = kb.try_inverse().ok_or_else(|| Error::ConfigInvalid("intrinsics B not invertible".into()))?;
    let p1: Vec<Point2> = corrs.iter().map(|c| normalize_point(&ka_inv, c.0)).collect();
    let p2: Vec<Point2> = corrs.iter().map(|c| normalize_point(&kb_inv, c.1)).collect();
    let (t1, t2) = (hartley(&p1), hartley(&p2));
    // pad with zero rows so the SVD always exposes a 9-dim right basis
    let mut design = DMatrix::zeros(corrs.len().max(9), 9);
    for (r, (a, b)) in p1.iter().zip(&p2).enumerate() {
        let (a, b) = (apply(&t1, *a), apply(&t2, *b));
        let row = [b.x * a.x, b.x * a.y, b.x, b.y * a.x, b.y * a.y, b.y, a.x, a.y, 1.0];
        for (c, v) in row.into_iter().enumerate() {
            design[(r, c)] = v;
        }
    }
    Ok(Conditioned { design, t1, t2 })
}

/// Singular values (descending) of the conditioned eight-point design matrix.
pub fn design_spectrum(corrs: &[(Point2, Point2)], ka: &Matrix3<f64>, kb: &Matrix3<f64>) -> Result<Vec<f64>> {
    let c = condition(corrs, ka, kb)?;
    let mut s: Vec<f64> = c.design.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Linear eight-point estimate from pixel correspondences.
///
/// Points are mapped through the intrinsics, Hartley-conditioned, solved in
/// the least-squares sense and projected onto the essential manifold.
pub fn eight_point(corrs: &[(Point2, Point2)], ka: &Matrix3<f64>, kb: &Matrix3<f64>) -> Result<EssentialMatrix> {
    if corrs.len() < 8 {
        return Err(Error::RankDeficient { rank: corrs.len() });
    }
    let c = condition(corrs, ka, kb)?;
    let svd = c.design.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::RankDeficient { rank: 0 })?;
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_REL_TOL * smax).count();
    if rank < 8 {
        return Err(Error::RankDeficient { rank });
    }
    let (idx, _) = svd.singular_values.argmin();
    let null = v_t.row(idx);
    let en = Matrix3::from_row_slice(null.clone_owned().as_slice());
    let e = c.t2.transpose() * en * c.t1;
    Ok(EssentialMatrix::from_matrix(&e))
}

/// Symmetric epipolar distance on normalized camera coordinates:
/// `(p2' E p1)^2 / ((E p1)_1^2 + (E p1)_2^2 + (E' p2)_1^2 + (E' p2)_2^2)`.
/// A vanishing denominator yields `+inf`.
pub fn epipolar_residual(e: &Matrix3<f64>, p1: Point2, p2: Point2) -> f64 {
    let (x1, x2) = (homogeneous(p1), homogeneous(p2));
    let ep1 = e * x1;
    let etp2 = e.transpose() * x2;
    let num = x2.dot(&ep1).powi(2);
    let den = ep1.x * ep1.x + ep1.y * ep1.y + etp2.x * etp2.x + etp2.y * etp2.y;
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScale {
    /// Sums assignment entries as they are.
    Linear,
    /// Sums log-probabilities.
    #[default]
    Log,
}

/// Coarse assignment loss over ground-truth pairs `gt` and predicted pairs
/// `predicted`; predictions outside `gt` are charged their dustbin entries.
pub fn coarse_loss(
    assign: &AssignmentMatrix,
    gt: &[(usize, usize)],
    predicted: &[(usize, usize)],
    scale: LossScale,
) -> f64 {
    let f = |v: f64| match scale {
        LossScale::Linear => v,
        LossScale::Log => v.max(f64::MIN_POSITIVE).ln(),
    };
    let (na, nb) = (assign.n_a(), assign.n_b());
    let gt_set: HashSet<(usize, usize)> = gt.iter().copied().collect();
    let pos: f64 = gt_set.iter().map(|&(i, j)| f(assign.m[(i, j)])).sum();
    let pred_set: HashSet<(usize, usize)> = predicted.iter().copied().collect();
    let neg: f64 = pred_set
        .iter()
        .filter(|p| !gt_set.contains(p))
        .map(|&(i, j)| f(assign.m[(i, nb)]) + f(assign.m[(na, j)]))
        .sum();
    -pos - neg
}

/// Mean binary cross-entropy of inlier probabilities against labels.
pub fn bce_loss(probs: &[f64], labels: &[bool]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let eps = 1e-12;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / probs.len() as f64
}

/// Mean epipolar residual over correspondences in normalized coordinates.
pub fn geo_loss(e: &Matrix3<f64>, corrs: &[(Point2, Point2)]) -> f64 {
    if corrs.is_empty() {
        return 0.0;
    }
    corrs.iter().map(|&(a, b)| epipolar_residual(e, a, b)).sum::<f64>() / corrs.len() as f64
}

/// Rotation and translation-direction errors in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rot_err: f64,
    pub trans_err: f64,
}

impl PoseError {
    pub fn max(&self) -> f64 {
        self.rot_err.max(self.trans_err)
    }
}

/// Rotation angle of `R` in degrees, computed with atan2 for accuracy near 0.
pub fn rotation_angle_deg(r: &Matrix3<f64>) -> f64 {
    let cos = (r.trace() - 1.0) / 2.0;
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = axis.norm() / 2.0;
    sin.atan2(cos).to_degrees()
}

pub fn vector_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// The four `(R, t)` candidates of an essential matrix, `|t| = 1`.
pub fn decompose_essential(e: &Matrix3<f64>) -> [(Matrix3<f64>, Vector3<f64>); 4] {
    let svd = e.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut v_t = svd.v_t.unwrap();
    // order columns by descending singular value so the null direction is last
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    u = Matrix3::from_columns(&[u.column(order[0]), u.column(order[1]), u.column(order[2])]);
    v_t = Matrix3::from_rows(&[v_t.row(order[0]), v_t.row(order[1]), v_t.row(order[2])]);
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t: Vector3<f64> = u.column(2).into_owned();
    [(r1, t), (r1, -t), (r2, t), (r2, -t)]
}

/// Depths `(d1, d2)` with `d2 x2 = R d1 x1 + t` in the least-squares sense.
fn depths(r: &Matrix3<f64>, t: &Vector3<f64>, p1: Point2, p2: Point2) -> Option<(f64, f64)> {
    let a = r * homogeneous(p1);
    let b = homogeneous(p2);
    // solve [a, -b] [d1, d2]' = -t
    let (aa, ab, bb) = (a.dot(&a), a.dot(&b), b.dot(&b));
    let (at, bt) = (a.dot(t), b.dot(t));
    let det = aa * bb - ab * ab;
    if det.abs() < 1e-15 {
        return None;
    }
    let d1 = (-at * bb + ab * bt) / det;
    let d2 = (aa * bt - ab * at) / det;
    Some((d1, d2))
}

/// Picks the candidate pose with the most points in front of both cameras.
pub fn recover_pose(e: &Matrix3<f64>, corrs: &[(Point2, Point2)]) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let mut best: Option<(usize, Matrix3<f64>, Vector3<f64>)> = None;
    for (r, t) in decompose_essential(e) {
        let votes = corrs
            .iter()
            .filter(|&&(a, b)| matches!(depths(&r, &t, a, b), Some((d1, d2)) if d1 > 0.0 && d2 > 0.0))
            .count();
        if votes > 0 && best.as_ref().is_none_or(|b| votes > b.0) {
            best = Some((votes, r, t));
        }
    }
    best.map(|(_, r, t)| (r, t)).ok_or(Error::NoCheiralitySupport)
}

/// Angular errors of the pose encoded in `e_hat` against ground truth.
/// `corrs` are in normalized camera coordinates and only vote on cheirality.
pub fn pose_error(
    e_hat: &EssentialMatrix,
    r_gt: &Matrix3<f64>,
    t_gt: &Vector3<f64>,
    corrs: &[(Point2, Point2)],
) -> Result<PoseError> {
    let (r, t) = recover_pose(e_hat.matrix(), corrs)?;
    Ok(PoseError { rot_err: rotation_angle_deg(&(r.transpose() * r_gt)), trans_err: vector_angle_deg(&t, t_gt) })
}

pub fn rotation_from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Matrix3<f64> {
    Rotation3::new(axis.normalize() * angle_rad).into_inner()
}

/// Bins per threshold in the approximate AUC.
pub const AUC_BINS: usize = 10;

/// Approximate AUC of `max(rot_err, trans_err)` per threshold: the mean of
/// the cumulative error histogram at `AUC_BINS` evenly spaced edges in
/// `(0, tau]`, where an error counts at edge `e` if it is strictly below `e`.
pub fn pose_auc(errors: &[PoseError], thresholds: &[f64]) -> Vec<f64> {
    let n = errors.len().max(1) as f64;
    let errs: Vec<f64> = errors.iter().map(PoseError::max).collect();
    thresholds
        .iter()
        .map(|&tau| {
            (1..=AUC_BINS)
                .map(|k| {
                    let edge = tau * k as f64 / AUC_BINS as f64;
                    errs.iter().filter(|&&e| e < edge).count() as f64 / n
                })
                .sum::<f64>()
                / AUC_BINS as f64
        })
        .collect()
}
