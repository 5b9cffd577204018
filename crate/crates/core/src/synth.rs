//! Synthetic scenes: repeated-pattern image pairs related by a random
//! homography, affine pairs, and calibrated two-view 3D scenes.
//!
//! Descriptors are unit vectors. Every physical keypoint type has a cluster
//! center; each observation of it (any instance, either image) is a clone of
//! the center at a fixed angle, so that all members of a cluster have
//! pairwise cosine similarity of at least `repeat_sim`. Keypoint types of one
//! pattern share a pattern center, which makes the whole pattern mutually
//! similar the way repeated texture is.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::epipolar::skew;
use crate::error::{Error, Result};
use crate::geometry::Point2;

const MAX_PLACEMENT_ATTEMPTS: usize = 20_000;
const MAX_HOMOGRAPHY_RETRIES: usize = 100;

/// Random homography settings, in units of the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomographyParams {
    pub n_scales: usize,
    pub n_angles: usize,
    pub scaling_amplitude: f64,
    pub perspective_x: f64,
    pub perspective_y: f64,
    pub patch_ratio: f64,
    /// Radians.
    pub max_angle: f64,
    /// Fraction of the in-crop translation range that may be used.
    pub translation_artifacts: f64,
}

impl Default for HomographyParams {
    fn default() -> Self {
        Self {
            n_scales: 5,
            n_angles: 25,
            scaling_amplitude: 0.1,
            perspective_x: 0.22,
            perspective_y: 0.25,
            patch_ratio: 0.8,
            max_angle: PI,
            translation_artifacts: 1.0,
        }
    }
}

impl HomographyParams {
    /// No scaling, rotation or perspective; only the crop translation remains.
    pub fn translation_only() -> Self {
        Self { scaling_amplitude: 0.0, perspective_x: 0.0, perspective_y: 0.0, max_angle: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.patch_ratio > 0.0 && self.patch_ratio <= 1.0) {
            return Err(Error::ConfigInvalid(format!("patch_ratio {} not in (0, 1]", self.patch_ratio)));
        }
        let amps = [
            self.scaling_amplitude,
            self.perspective_x,
            self.perspective_y,
            self.max_angle,
            self.translation_artifacts,
        ];
        if amps.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::ConfigInvalid("homography amplitudes must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Normal sample rejected outside two standard deviations.
fn truncated_normal(rng: &mut impl Rng, mean: f64, std: f64) -> f64 {
    if std <= 0.0 {
        return mean;
    }
    let n = Normal::new(mean, std).expect("positive std");
    loop {
        let x = n.sample(rng);
        if (x - mean).abs() <= 2.0 * std {
            return x;
        }
    }
}

/// Homography taking `src` corners to `dst` corners (h33 = 1).
pub fn homography_from_corners(src: &[Point2; 4], dst: &[Point2; 4]) -> Option<Matrix3<f64>> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for k in 0..4 {
        let (x, y, u, v) = (src[k].x, src[k].y, dst[k].x, dst[k].y);
        let r = 2 * k;
        a.set_row(r, &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]));
        a.set_row(r + 1, &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]));
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a.lu().solve(&b)?;
    Some(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

fn sample_corners(params: &HomographyParams, rng: &mut impl Rng) -> ([Point2; 4], [Point2; 4]) {
    let p = params.patch_ratio;
    let m = (1.0 - p) / 2.0;
    let src = [Point2::new(m, m), Point2::new(m, m + p), Point2::new(m + p, m + p), Point2::new(m + p, m)];
    let mut dst = src;

    let pd = truncated_normal(rng, 0.0, params.perspective_y / 2.0);
    let hl = truncated_normal(rng, 0.0, params.perspective_x / 2.0);
    let hr = truncated_normal(rng, 0.0, params.perspective_x / 2.0);
    let shift = [(hl, pd), (hl, -pd), (hr, pd), (hr, -pd)];
    for (q, (dx, dy)) in dst.iter_mut().zip(shift) {
        *q = *q + Point2::new(dx, dy);
    }

    let center = |pts: &[Point2; 4]| pts.iter().fold(Point2::default(), |a, &b| a + b * 0.25);

    // scale: identity plus n_scales draws, one picked uniformly
    let mut scales = vec![1.0];
    scales.extend((0..params.n_scales).map(|_| truncated_normal(rng, 1.0, params.scaling_amplitude / 2.0)));
    let s = scales[rng.random_range(0..scales.len())];
    let c = center(&dst);
    for q in dst.iter_mut() {
        *q = c + (*q - c) * s;
    }

    let lo = Point2::new(
        dst.iter().map(|q| q.x).fold(f64::INFINITY, f64::min),
        dst.iter().map(|q| q.y).fold(f64::INFINITY, f64::min),
    );
    let hi = Point2::new(
        dst.iter().map(|q| 1.0 - q.x).fold(f64::INFINITY, f64::min),
        dst.iter().map(|q| 1.0 - q.y).fold(f64::INFINITY, f64::min),
    );
    let range = |neg: f64, pos: f64, rng: &mut dyn rand::RngCore| {
        let (neg, pos) = (neg.max(0.0) * params.translation_artifacts, pos.max(0.0) * params.translation_artifacts);
        if neg + pos > 0.0 {
            rng.random_range(-neg..=pos)
        } else {
            0.0
        }
    };
    let t = Point2::new(range(lo.x, hi.x, rng), range(lo.y, hi.y, rng));
    for q in dst.iter_mut() {
        *q = *q + t;
    }

    // rotation: n_angles evenly spaced in [-max, max] plus zero
    let mut angles: Vec<f64> = if params.n_angles > 1 {
        (0..params.n_angles)
            .map(|k| -params.max_angle + 2.0 * params.max_angle * k as f64 / (params.n_angles - 1) as f64)
            .collect()
    } else {
        vec![0.0; params.n_angles]
    };
    angles.push(0.0);
    let a = angles[rng.random_range(0..angles.len())];
    let (sin, cos) = a.sin_cos();
    let c = center(&dst);
    for q in dst.iter_mut() {
        let d = *q - c;
        *q = c + Point2::new(cos * d.x - sin * d.y, sin * d.x + cos * d.y);
    }
    (src, dst)
}

/// Draws a homography mapping image A pixels to image B pixels.
pub fn sample_homography_with(
    params: &HomographyParams,
    image_size: (f64, f64),
    rng: &mut impl Rng,
) -> Result<Matrix3<f64>> {
    params.validate()?;
    let (w, h) = image_size;
    let to_px = |q: Point2| Point2::new(q.x * w, q.y * h);
    for _ in 0..MAX_HOMOGRAPHY_RETRIES {
        let (src, dst) = sample_corners(params, rng);
        let (src, dst) = (src.map(to_px), dst.map(to_px));
        if let Some(hm) = homography_from_corners(&src, &dst) {
            let det = hm.determinant();
            if det.is_finite() && det.abs() > 1e-9 {
                return Ok(hm);
            }
        }
    }
    Err(Error::ConfigInvalid("homography sampling kept producing singular matrices".into()))
}

pub fn sample_homography(params: &HomographyParams, image_size: (f64, f64), seed: u64) -> Result<Matrix3<f64>> {
    sample_homography_with(params, image_size, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn warp_point(h: &Matrix3<f64>, p: Point2) -> Result<Point2> {
    let v = h * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < 1e-12 {
        return Err(Error::PointAtInfinity(v.z.abs()));
    }
    Ok(Point2::new(v.x / v.z, v.y / v.z))
}

pub fn warp_points(h: &Matrix3<f64>, pts: &[Point2]) -> Result<Vec<Point2>> {
    pts.iter().map(|&p| warp_point(h, p)).collect()
}

pub fn matrix_to_row_major(m: &Matrix3<f64>) -> [f64; 9] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
}

pub fn matrix_from_row_major(v: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

/// Image pair with ground truth. Serializes to one JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePair {
    pub seed: u64,
    #[serde(rename = "H_gt", default, skip_serializing_if = "Option::is_none")]
    pub h_gt: Option<[f64; 9]>,
    #[serde(rename = "E_gt", default, skip_serializing_if = "Option::is_none")]
    pub e_gt: Option<[f64; 9]>,
    #[serde(rename = "K_A", default, skip_serializing_if = "Option::is_none")]
    pub k_a: Option<[f64; 9]>,
    #[serde(rename = "K_B", default, skip_serializing_if = "Option::is_none")]
    pub k_b: Option<[f64; 9]>,
    #[serde(rename = "R_gt", default, skip_serializing_if = "Option::is_none")]
    pub r_gt: Option<[f64; 9]>,
    #[serde(rename = "t_gt", default, skip_serializing_if = "Option::is_none")]
    pub t_gt: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[f64; 2]>,
    #[serde(rename = "kpsA")]
    pub kps_a: Vec<Point2>,
    #[serde(rename = "kpsB")]
    pub kps_b: Vec<Point2>,
    #[serde(rename = "descA")]
    pub desc_a: Vec<Vec<f64>>,
    #[serde(rename = "descB")]
    pub desc_b: Vec<Vec<f64>>,
    pub gt_matches: Vec<(usize, usize)>,
    /// Descriptor cluster of each image-A keypoint; -1 marks a non-repeated keypoint.
    pub pattern_id: Vec<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pattern_id_b: Vec<i64>,
}

impl ScenePair {
    pub fn homography(&self) -> Option<Matrix3<f64>> {
        self.h_gt.as_ref().map(matrix_from_row_major)
    }

    pub fn essential(&self) -> Option<Matrix3<f64>> {
        self.e_gt.as_ref().map(matrix_from_row_major)
    }

    /// False for a missing or vanishing essential matrix (zero baseline).
    pub fn has_valid_essential(&self) -> bool {
        self.essential().is_some_and(|e| e.norm() > 1e-12)
    }

    /// Ground-truth partner in image B of each image-A keypoint.
    pub fn gt_partner(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.kps_a.len()];
        for &(i, j) in &self.gt_matches {
            out[i] = Some(j);
        }
        out
    }

    pub fn is_repeated(&self, i: usize) -> bool {
        self.pattern_id.get(i).is_some_and(|&p| p >= 0)
    }
}

/// Repeated-pattern scene settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub n_patterns: usize,
    pub repeats_per_pattern: usize,
    pub kps_per_instance: usize,
    /// Distinctive keypoints outside the patterns.
    pub n_unique: usize,
    pub repeat_sim: f64,
    /// Cosine between a keypoint type's center and its pattern center.
    pub pattern_cohesion: f64,
    pub noise_px: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub pattern_radius: f64,
    /// Distance between neighbouring instances of a pattern, which are tiled
    /// on a grid like a facade; 0 scatters instances independently.
    pub instance_spacing: f64,
    /// Minimum distance between any two keypoints of one image.
    pub min_spacing: f64,
    pub desc_dim: usize,
    pub homography: HomographyParams,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_patterns: 2,
            repeats_per_pattern: 4,
            kps_per_instance: 5,
            n_unique: 16,
            repeat_sim: 0.99,
            pattern_cohesion: 0.985,
            noise_px: 0.5,
            image_width: 400.0,
            image_height: 300.0,
            pattern_radius: 12.0,
            instance_spacing: 30.0,
            min_spacing: 5.0,
            desc_dim: 64,
            homography: HomographyParams::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patterns + self.n_unique == 0 {
            return Err(Error::ConfigInvalid("scene has no keypoints".into()));
        }
        if self.n_patterns > 0 && (self.repeats_per_pattern == 0 || self.kps_per_instance == 0) {
            return Err(Error::ConfigInvalid("repeats_per_pattern and kps_per_instance must be >= 1".into()));
        }
        if !(self.repeat_sim > 0.0 && self.repeat_sim <= 1.0)
            || !(self.pattern_cohesion > 0.0 && self.pattern_cohesion <= 1.0)
        {
            return Err(Error::ConfigInvalid("similarities must lie in (0, 1]".into()));
        }
        if !(self.noise_px >= 0.0) || self.desc_dim < 2 {
            return Err(Error::ConfigInvalid("noise_px must be >= 0 and desc_dim >= 2".into()));
        }
        self.homography.validate()
    }

    pub fn image_size(&self) -> (f64, f64) {
        (self.image_width, self.image_height)
    }
}

fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit vector at exactly `angle` radians from the unit vector `center`.
fn clone_at_angle(rng: &mut impl Rng, center: &[f64], angle: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..center.len()).map(|_| rng.sample(StandardNormal)).collect();
        let proj: f64 = g.iter().zip(center).map(|(a, b)| a * b).sum();
        let u: Vec<f64> = g.iter().zip(center).map(|(a, b)| a - proj * b).collect();
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            let (s, c) = angle.sin_cos();
            return center.iter().zip(&u).map(|(ci, ui)| c * ci + s * ui / n).collect();
        }
    }
}

struct Layout {
    points: Vec<Point2>,
    /// `(pattern, instance, kp type)` for pattern keypoints.
    origin: Vec<Option<(usize, usize, usize)>>,
}

fn place_keypoints(cfg: &SceneConfig, rng: &mut impl Rng) -> Result<Layout> {
    let (w, h) = cfg.image_size();
    let r = cfg.pattern_radius;
    let border = r + cfg.min_spacing;
    if 2.0 * border >= w || 2.0 * border >= h {
        return Err(Error::ConfigInvalid("image too small for the pattern radius".into()));
    }

    let layouts: Vec<Vec<Point2>> = (0..cfg.n_patterns)
        .map(|_| {
            let mut offs: Vec<Point2> = Vec::new();
            let mut attempts = 0;
            while offs.len() < cfg.kps_per_instance {
                attempts += 1;
                if attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(Error::PlacementFailure { what: "pattern keypoint", attempts });
                }
                let q = Point2::new(rng.random_range(-r..=r), rng.random_range(-r..=r));
                if q.norm() <= r && offs.iter().all(|o| o.dist(q) >= cfg.min_spacing) {
                    offs.push(q);
                }
            }
            Ok(offs)
        })
        .collect::<Result<_>>()?;

    let tiled = cfg.instance_spacing > 0.0;
    if tiled && cfg.instance_spacing < 2.0 * r + cfg.min_spacing {
        return Err(Error::ConfigInvalid("instance_spacing must leave min_spacing between instances".into()));
    }
    let cols = (cfg.repeats_per_pattern as f64).sqrt().ceil().max(1.0) as usize;
    let rows = cfg.repeats_per_pattern.div_ceil(cols);
    let grid = |k: usize| Point2::new((k % cols) as f64, (k / cols) as f64) * cfg.instance_spacing;
    // tiles occupy a block; scattered instances are blocks of one
    let (block_w, block_h, per_block) = if tiled {
        ((cols - 1) as f64 * cfg.instance_spacing, (rows - 1) as f64 * cfg.instance_spacing, cfg.repeats_per_pattern)
    } else {
        (0.0, 0.0, 1)
    };
    if 2.0 * border + block_w >= w || 2.0 * border + block_h >= h {
        return Err(Error::ConfigInvalid("image too small for the pattern tiling".into()));
    }
    let blocks_overlap = |a: Point2, b: Point2| {
        let gap = 2.0 * r + cfg.min_spacing;
        (a.x - b.x).abs() < block_w + gap && (a.y - b.y).abs() < block_h + gap
    };

    let mut centers: Vec<Point2> = Vec::new();
    let mut blocks: Vec<Point2> = Vec::new();
    let mut points = Vec::new();
    let mut origin = Vec::new();
    for (p, offs) in layouts.iter().enumerate() {
        for first in (0..cfg.repeats_per_pattern).step_by(per_block) {
            let mut attempts = 0;
            let corner = loop {
                attempts += 1;
                if attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(Error::PlacementFailure { what: "pattern instance", attempts });
                }
                let c = Point2::new(
                    rng.random_range(border..w - border - block_w),
                    rng.random_range(border..h - border - block_h),
                );
                if blocks.iter().all(|&o| !blocks_overlap(o, c)) {
                    break c;
                }
            };
            blocks.push(corner);
            for inst in first..(first + per_block).min(cfg.repeats_per_pattern) {
                let c = if tiled { corner + grid(inst) } else { corner };
                centers.push(c);
                for (k, &o) in offs.iter().enumerate() {
                    points.push(c + o);
                    origin.push(Some((p, inst, k)));
                }
            }
        }
    }

    let margin = cfg.min_spacing;
    for _ in 0..cfg.n_unique {
        let mut attempts = 0;
        let q = loop {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailure { what: "unique keypoint", attempts });
            }
            let q = Point2::new(rng.random_range(margin..w - margin), rng.random_range(margin..h - margin));
            let clear_of_patterns = centers.iter().all(|c| c.dist(q) >= r + cfg.min_spacing);
            if clear_of_patterns && points.iter().all(|o| o.dist(q) >= cfg.min_spacing) {
                break q;
            }
        };
        points.push(q);
        origin.push(None);
    }
    Ok(Layout { points, origin })
}

fn shuffled(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Builds a scene whose image B is `warp` applied to image A.
pub fn generate_scene_with_warp(
    cfg: &SceneConfig,
    warp: &Matrix3<f64>,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<ScenePair> {
    cfg.validate()?;
    let layout = place_keypoints(cfg, rng)?;
    let n = layout.points.len();
    let d = cfg.desc_dim;

    // cluster centers
    let type_angle = cfg.pattern_cohesion.acos();
    let pattern_centers: Vec<Vec<f64>> = (0..cfg.n_patterns).map(|_| random_unit(rng, d)).collect();
    let type_centers: Vec<Vec<Vec<f64>>> = pattern_centers
        .iter()
        .map(|c| (0..cfg.kps_per_instance).map(|_| clone_at_angle(rng, c, type_angle)).collect())
        .collect();
    let unique_centers: Vec<Vec<f64>> = (0..cfg.n_unique).map(|_| random_unit(rng, d)).collect();

    let obs_angle = cfg.repeat_sim.acos() / 2.0;
    let mut unique_k = 0;
    let mut centers = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for o in &layout.origin {
        match *o {
            Some((p, _, k)) => {
                centers.push(type_centers[p][k].clone());
                labels.push((p * cfg.kps_per_instance + k) as i64);
            }
            None => {
                centers.push(unique_centers[unique_k].clone());
                labels.push(-1);
                unique_k += 1;
            }
        }
    }

    let desc_a_raw: Vec<Vec<f64>> = centers.iter().map(|c| clone_at_angle(rng, c, obs_angle)).collect();
    let desc_b_raw: Vec<Vec<f64>> = centers.iter().map(|c| clone_at_angle(rng, c, obs_angle)).collect();

    let warped = warp_points(warp, &layout.points)?;
    let noise = Normal::new(0.0, cfg.noise_px.max(0.0)).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let kps_b_raw: Vec<Point2> = warped
        .iter()
        .map(|&q| if cfg.noise_px > 0.0 { q + Point2::new(noise.sample(rng), noise.sample(rng)) } else { q })
        .collect();

    // independent orderings in the two images
    let order_a = shuffled(n, rng);
    let order_b = shuffled(n, rng);
    let mut pos_b = vec![0; n];
    for (slot, &src) in order_b.iter().enumerate() {
        pos_b[src] = slot;
    }
    let gt_matches = order_a.iter().enumerate().map(|(i, &src)| (i, pos_b[src])).collect();

    Ok(ScenePair {
        seed,
        h_gt: Some(matrix_to_row_major(warp)),
        e_gt: None,
        k_a: None,
        k_b: None,
        r_gt: None,
        t_gt: None,
        image_size: Some([cfg.image_width, cfg.image_height]),
        kps_a: order_a.iter().map(|&s| layout.points[s]).collect(),
        kps_b: order_b.iter().map(|&s| kps_b_raw[s]).collect(),
        desc_a: order_a.iter().map(|&s| desc_a_raw[s].clone()).collect(),
        desc_b: order_b.iter().map(|&s| desc_b_raw[s].clone()).collect(),
        gt_matches,
        pattern_id: order_a.iter().map(|&s| labels[s]).collect(),
        pattern_id_b: order_b.iter().map(|&s| labels[s]).collect(),
    })
}

/// Repeated-pattern scene related by a random homography.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<ScenePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = sample_homography_with(&cfg.homography, cfg.image_size(), &mut rng)?;
    generate_scene_with_warp(cfg, &h, seed, &mut rng)
}

/// Random orientation-preserving affine map `[A | t]` with bounded anisotropy.
pub fn sample_affine(rng: &mut impl Rng, image_size: (f64, f64)) -> Matrix3<f64> {
    let rot = |a: f64| {
        let (s, c) = a.sin_cos();
        nalgebra::Matrix2::new(c, -s, s, c)
    };
    let lin = rot(rng.random_range(-PI..PI))
        * nalgebra::Matrix2::new(rng.random_range(0.7..1.3), 0.0, 0.0, rng.random_range(0.7..1.3))
        * rot(rng.random_range(-PI..PI));
    let (w, h) = image_size;
    let c = nalgebra::Vector2::new(w / 2.0, h / 2.0);
    let t =
        c - lin * c + nalgebra::Vector2::new(rng.random_range(-0.1 * w..0.1 * w), rng.random_range(-0.1 * h..0.1 * h));
    Matrix3::new(lin[(0, 0)], lin[(0, 1)], t.x, lin[(1, 0)], lin[(1, 1)], t.y, 0.0, 0.0, 1.0)
}

/// Repeated-pattern scene related by a random affine map (stored in `H_gt`).
pub fn generate_affine_scene(cfg: &SceneConfig, seed: u64) -> Result<ScenePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = sample_affine(&mut rng, cfg.image_size());
    generate_scene_with_warp(cfg, &a, seed, &mut rng)
}

pub fn intrinsics(focal: f64, width: f64, height: f64) -> Matrix3<f64> {
    Matrix3::new(focal, 0.0, width / 2.0, 0.0, focal, height / 2.0, 0.0, 0.0, 1.0)
}

/// Calibrated two-view scene, `X_B = R X_A + t`, with all points in front of
/// both cameras. `E_gt = [t]x R` is left unnormalized; a zero baseline gives
/// a zero matrix (see [`ScenePair::has_valid_essential`]).
pub fn generate_3d_scene(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &Matrix3<f64>,
    n_points: usize,
    seed: u64,
) -> Result<ScenePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_inv = k.try_inverse().ok_or_else(|| Error::ConfigInvalid("intrinsics not invertible".into()))?;
    let (w, h) = (2.0 * k[(0, 2)], 2.0 * k[(1, 2)]);
    let mut kps_a = Vec::with_capacity(n_points);
    let mut kps_b = Vec::with_capacity(n_points);
    let mut attempts = 0;
    while kps_a.len() < n_points {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS * 10 {
            return Err(Error::PlacementFailure { what: "3D point", attempts });
        }
        let (u, v) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let depth = rng.random_range(4.0..12.0);
        let xa = k_inv * Vector3::new(u, v, 1.0) * depth;
        let xb = r * xa + t;
        if xb.z <= 0.1 {
            continue;
        }
        let pb = k * xb;
        kps_a.push(Point2::new(u, v));
        kps_b.push(Point2::new(pb.x / pb.z, pb.y / pb.z));
    }
    let d = 64;
    let obs = 0.99f64.acos() / 2.0;
    let centers: Vec<Vec<f64>> = (0..n_points).map(|_| random_unit(&mut rng, d)).collect();
    let e = skew(t) * r;
    Ok(ScenePair {
        seed,
        h_gt: None,
        e_gt: Some(matrix_to_row_major(&e)),
        k_a: Some(matrix_to_row_major(k)),
        k_b: Some(matrix_to_row_major(k)),
        r_gt: Some(matrix_to_row_major(r)),
        t_gt: Some([t.x, t.y, t.z]),
        image_size: Some([w, h]),
        kps_a,
        kps_b,
        desc_a: centers.iter().map(|c| clone_at_angle(&mut rng, c, obs)).collect(),
        desc_b: centers.iter().map(|c| clone_at_angle(&mut rng, c, obs)).collect(),
        gt_matches: (0..n_points).map(|i| (i, i)).collect(),
        pattern_id: vec![-1; n_points],
        pattern_id_b: Vec::new(),
    })
}

/// Random rotation (uniform axis, angle up to `max_angle_rad`) and a unit
/// translation, seeded.
pub fn sample_pose(rng: &mut impl Rng, max_angle_rad: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let axis = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    let angle = rng.random_range(0.0..max_angle_rad);
    let r = nalgebra::Rotation3::new(axis.normalize() * angle).into_inner();
    let t: Vector3<f64> =
        Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    (r, t.normalize())
}
