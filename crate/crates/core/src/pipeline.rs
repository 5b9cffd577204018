//! End-to-end matching of one scene: preprocessing, anchor selection,
//! coordinate encoding, score fusion, Sinkhorn assignment and evaluation.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_points, enumerate_systems, matcher_encoding, SeedSet, Side};
use crate::error::{Error, Result};
use crate::eval::{self, MatchReport, WarpTruth};
use crate::geometry::{Point2, DEFAULT_EPSILON};
use crate::matching::{
    mutual_nearest_neighbors, select_matches, sinkhorn_assign, Match, DEFAULT_KNN_K, DEFAULT_SINKHORN_ITERS,
};
use crate::preprocess::{nms, repetition_filter, RepetitionFilterParams};
use crate::synth::{matrix_from_row_major, ScenePair};

/// What the matcher sees besides descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// Mutual nearest neighbours on descriptor cosine, no assignment step.
    Nn,
    /// Descriptors only, through Sinkhorn.
    Descriptor,
    /// Descriptors plus keypoint positions, normalized per image.
    Cartesian,
    /// Descriptors plus weighted anchor-relative barycentric coordinates.
    A2b,
}

impl EncodingMode {
    pub const ALL: [EncodingMode; 4] =
        [EncodingMode::Nn, EncodingMode::Descriptor, EncodingMode::Cartesian, EncodingMode::A2b];

    pub fn name(self) -> &'static str {
        match self {
            EncodingMode::Nn => "nn",
            EncodingMode::Descriptor => "descriptor",
            EncodingMode::Cartesian => "cartesian",
            EncodingMode::A2b => "a2b",
        }
    }
}

impl std::str::FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::ConfigInvalid(format!("unknown encoding mode '{s}' (nn, descriptor, cartesian, a2b)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of anchors.
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub sinkhorn_iters: usize,
    /// Neighbourhood size for graph-based consumers; unused by the fusion matcher.
    pub knn_k: usize,
    pub nms_radius: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub encoding_mode: EncodingMode,
    pub tau_epi: f64,
    pub tau_px: f64,
    /// Weight of the coordinate block in the fused feature.
    pub beta: f64,
    /// Scale each point's anchor-relative coordinate block to unit length
    /// before weighting by `beta`, so the fused cosine compares positions by
    /// angle rather than by projection. Only affects the `a2b` mode.
    pub unit_coords: bool,
    /// Multiplier turning fused cosine similarity into Sinkhorn scores.
    pub score_scale: f64,
    pub dustbin: f64,
    /// Anchors closer than this (in either image) to a better anchor are skipped.
    pub anchor_min_dist: f64,
    /// Displacement, in a random direction, applied to image-B anchor points.
    pub anchor_offset_px: f64,
    /// How many anchors receive the offset (seeded choice); 0 means all.
    pub biased_anchors: usize,
    pub corner_tau_px: f64,
    pub ransac_thresh_px: f64,
    pub ransac_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 5,
            epsilon: DEFAULT_EPSILON,
            alpha: 0.2,
            sinkhorn_iters: DEFAULT_SINKHORN_ITERS,
            knn_k: DEFAULT_KNN_K,
            nms_radius: 4.0,
            gamma1: 0.94,
            gamma2: 0.97,
            encoding_mode: EncodingMode::A2b,
            tau_epi: eval::DEFAULT_TAU_EPI,
            tau_px: eval::DEFAULT_TAU_PX,
            beta: 1.0,
            unit_coords: true,
            score_scale: 1000.0,
            dustbin: 0.0,
            anchor_min_dist: 80.0,
            anchor_offset_px: 0.0,
            biased_anchors: 0,
            corner_tau_px: eval::DEFAULT_CORNER_TAU_PX,
            ransac_thresh_px: 3.0,
            ransac_iters: 200,
        }
    }
}

impl RunConfig {
    /// Settings of the repeated-pattern benchmark: a heavier coordinate
    /// block than the default fusion.
    pub fn benchmark() -> Self {
        Self { beta: 2.5, ..Self::default() }
    }

    pub fn filter_params(&self) -> RepetitionFilterParams {
        RepetitionFilterParams { gamma1: self.gamma1, gamma2: self.gamma2, nms_radius: self.nms_radius }
    }

    pub fn validate(&self) -> Result<()> {
        self.filter_params().validate()?;
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.k < 3 {
            return bad(format!("k must be >= 3, got {}", self.k));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1), got {}", self.alpha));
        }
        if self.sinkhorn_iters == 0 || self.knn_k == 0 {
            return bad("sinkhorn_iters and knn_k must be >= 1".into());
        }
        if !(self.tau_epi > 0.0) || !(self.tau_px > 0.0) || !(self.corner_tau_px > 0.0) {
            return bad("thresholds must be > 0".into());
        }
        let finite_nonneg =
            [self.beta, self.score_scale, self.anchor_min_dist, self.anchor_offset_px, self.ransac_thresh_px];
        if finite_nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !self.dustbin.is_finite() {
            return bad("beta, score_scale, anchor distances and ransac threshold must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// One anchor correspondence with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub a: Point2,
    pub b: Point2,
    pub confidence: f64,
}

fn cosine_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let unit = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        for mut row in m.row_iter_mut() {
            let n = row.norm();
            if n > 0.0 {
                row /= n;
            }
        }
        m
    };
    unit(a) * unit(b).transpose()
}

fn rows_to_matrix(rows: &[Vec<f64>], idx: &[usize]) -> Result<DMatrix<f64>> {
    let d = idx.first().map_or(0, |&i| rows[i].len());
    if idx.iter().any(|&i| rows[i].len() != d) {
        return Err(Error::ShapeMismatch("descriptors have differing lengths".into()));
    }
    Ok(DMatrix::from_fn(idx.len(), d, |r, c| rows[idx[r]][c]))
}

/// Anchors from descriptor mutual nearest neighbours among keypoints that
/// pass the repetition filter, ranked by similarity margin (best minus second
/// best, the smaller of the two directions) and thinned so that no two lie
/// within `min_dist` in either image. When thinning leaves fewer than `k`,
/// the best thinned-out candidates fill the gap.
#[allow(clippy::too_many_arguments)]
pub fn select_anchors(
    kps_a: &[Point2],
    kps_b: &[Point2],
    desc_a: &DMatrix<f64>,
    desc_b: &DMatrix<f64>,
    keep_a: &[bool],
    keep_b: &[bool],
    k: usize,
    min_dist: f64,
) -> Vec<Anchor> {
    let ia: Vec<usize> = (0..kps_a.len()).filter(|&i| keep_a[i]).collect();
    let ib: Vec<usize> = (0..kps_b.len()).filter(|&j| keep_b[j]).collect();
    if ia.is_empty() || ib.is_empty() {
        return Vec::new();
    }
    let sa = DMatrix::from_fn(ia.len(), desc_a.ncols(), |r, c| desc_a[(ia[r], c)]);
    let sb = DMatrix::from_fn(ib.len(), desc_b.ncols(), |r, c| desc_b[(ib[r], c)]);
    let sim = cosine_matrix(&sa, &sb);
    let margin = |vals: &mut dyn Iterator<Item = f64>, best: f64| {
        let second = vals.filter(|v| *v < best).fold(f64::NEG_INFINITY, f64::max);
        if second.is_finite() {
            best - second
        } else {
            best
        }
    };
    let mut cands: Vec<Anchor> = mutual_nearest_neighbors(&sim)
        .into_iter()
        .map(|m| {
            let row = margin(&mut sim.row(m.i).iter().copied(), m.confidence);
            let col = margin(&mut sim.column(m.j).iter().copied(), m.confidence);
            Anchor { a: kps_a[ia[m.i]], b: kps_b[ib[m.j]], confidence: row.min(col) }
        })
        .collect();
    cands.sort_by(|x, y| y.confidence.total_cmp(&x.confidence));
    let mut out: Vec<Anchor> = Vec::with_capacity(k);
    let mut skipped = Vec::new();
    for c in cands {
        if out.len() == k {
            break;
        }
        if out.iter().all(|o| o.a.dist(c.a) >= min_dist && o.b.dist(c.b) >= min_dist) {
            out.push(c);
        } else {
            skipped.push(c);
        }
    }
    // too few well-spread candidates: top up with the best skipped ones
    let missing = k.saturating_sub(out.len());
    out.extend(skipped.into_iter().take(missing));
    out.sort_by(|x, y| y.confidence.total_cmp(&x.confidence));
    out
}

/// Moves the image-B point of `count` seeded-randomly chosen anchors (all
/// when `count` is 0) by `offset_px` in a seeded random direction.
pub fn perturb_anchors(anchors: &mut [Anchor], offset_px: f64, count: usize, seed: u64) {
    if offset_px <= 0.0 || anchors.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0FF5_E7A1_u64);
    let n = anchors.len();
    let count = if count == 0 { n } else { count.min(n) };
    let chosen = rand::seq::index::sample(&mut rng, n, count);
    let mut chosen: Vec<usize> = chosen.into_iter().collect();
    chosen.sort_unstable();
    for i in chosen {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        anchors[i].b = anchors[i].b + Point2::new(theta.cos(), theta.sin()) * offset_px;
    }
}

/// Per-scene seed for the randomized steps, mixing run and scene seeds.
fn run_seed(scene: &ScenePair, cfg: &RunConfig) -> u64 {
    scene.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ cfg.seed
}

/// Outcome of matching one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub seed: u64,
    pub mode: EncodingMode,
    pub report: MatchReport,
    pub anchors: Vec<Anchor>,
    pub n_systems: usize,
    /// `(i, j, confidence)` in original keypoint indices.
    pub matches: Vec<Match>,
}

/// Positions centred on the keypoint bounding box and divided by its
/// diagonal, so every row has norm at most 1/2.
fn image_normalized(pts: &[Point2]) -> DMatrix<f64> {
    let (mut lo, mut hi) =
        (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in pts {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let center = (lo + hi) * 0.5;
    let diag = (hi - lo).norm();
    let scale = if diag > 0.0 { 1.0 / diag } else { 0.0 };
    DMatrix::from_fn(pts.len(), 2, |r, c| {
        let q = (pts[r] - center) * scale;
        if c == 0 {
            q.x
        } else {
            q.y
        }
    })
}

/// Fused feature rows for the selected keypoints.
fn fused_features(
    mode: EncodingMode,
    cfg: &RunConfig,
    pts: (&[Point2], &[Point2]),
    desc: (&DMatrix<f64>, &DMatrix<f64>),
    anchors: &[Anchor],
) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let (pa, pb) = pts;
    let (da, db) = desc;
    let unit_rows = |m: &DMatrix<f64>| cosine_matrix(m, &DMatrix::identity(m.ncols(), m.ncols()));
    let (ea, eb, n_systems) = match mode {
        EncodingMode::Nn | EncodingMode::Descriptor => return Ok((da.clone(), db.clone(), 0)),
        EncodingMode::Cartesian => (image_normalized(pa), image_normalized(pb), 0),
        EncodingMode::A2b => {
            let seeds = SeedSet::new(anchors.iter().map(|a| (a.a, a.b, a.confidence)).collect())?.truncated(cfg.k)?;
            let systems = enumerate_systems(&seeds, None)?;
            let ca = encode_points(&systems, pa, Side::A, cfg.epsilon);
            let cb = encode_points(&systems, pb, Side::B, cfg.epsilon);
            let (ea, eb) = matcher_encoding(&ca, &cb)?;
            (ea, eb, systems.len())
        }
    };
    let cat = |d: &DMatrix<f64>, e: &DMatrix<f64>| {
        let d = unit_rows(d);
        let e = if cfg.unit_coords && mode == EncodingMode::A2b { unit_rows(e) } else { e.clone() };
        let mut out = DMatrix::zeros(d.nrows(), d.ncols() + e.ncols());
        out.columns_mut(0, d.ncols()).copy_from(&d);
        out.columns_mut(d.ncols(), e.ncols()).copy_from(&(&e * cfg.beta));
        out
    };
    Ok((cat(da, &ea), cat(db, &eb), n_systems))
}

/// Matches one scene in the given mode. `anchor_override` replaces the
/// descriptor-derived anchors (before any configured offset is applied).
pub fn run_scene(
    scene: &ScenePair,
    cfg: &RunConfig,
    mode: EncodingMode,
    anchor_override: Option<&[Anchor]>,
) -> Result<SceneResult> {
    cfg.validate()?;
    let (na, nb) = (scene.kps_a.len(), scene.kps_b.len());
    if scene.desc_a.len() != na || scene.desc_b.len() != nb {
        return Err(Error::ShapeMismatch("keypoint and descriptor counts differ".into()));
    }
    let all_a: Vec<usize> = (0..na).collect();
    let all_b: Vec<usize> = (0..nb).collect();
    let desc_a = rows_to_matrix(&scene.desc_a, &all_a)?;
    let desc_b = rows_to_matrix(&scene.desc_b, &all_b)?;
    if desc_a.ncols() != desc_b.ncols() && na > 0 && nb > 0 {
        return Err(Error::ShapeMismatch("descriptor dimensions differ between images".into()));
    }

    // keypoints carry no detector score, so NMS falls back to index order
    let ia = nms(&scene.kps_a.iter().map(|&p| (p, 1.0)).collect::<Vec<_>>(), cfg.nms_radius);
    let ib = nms(&scene.kps_b.iter().map(|&p| (p, 1.0)).collect::<Vec<_>>(), cfg.nms_radius);

    let mut anchors = Vec::new();
    if mode == EncodingMode::A2b {
        anchors = match anchor_override {
            Some(a) => a.to_vec(),
            None => {
                let params = cfg.filter_params();
                let mut keep_a = vec![false; na];
                let mut keep_b = vec![false; nb];
                let fa = repetition_filter(&ia.iter().map(|&i| scene.desc_a[i].clone()).collect::<Vec<_>>(), &params);
                let fb = repetition_filter(&ib.iter().map(|&j| scene.desc_b[j].clone()).collect::<Vec<_>>(), &params);
                for (&i, k) in ia.iter().zip(fa) {
                    keep_a[i] = k;
                }
                for (&j, k) in ib.iter().zip(fb) {
                    keep_b[j] = k;
                }
                select_anchors(
                    &scene.kps_a,
                    &scene.kps_b,
                    &desc_a,
                    &desc_b,
                    &keep_a,
                    &keep_b,
                    cfg.k,
                    cfg.anchor_min_dist,
                )
            }
        };
        perturb_anchors(&mut anchors, cfg.anchor_offset_px, cfg.biased_anchors, run_seed(scene, cfg));
    }

    let pa: Vec<Point2> = ia.iter().map(|&i| scene.kps_a[i]).collect();
    let pb: Vec<Point2> = ib.iter().map(|&j| scene.kps_b[j]).collect();
    let sub_a = rows_to_matrix(&scene.desc_a, &ia)?;
    let sub_b = rows_to_matrix(&scene.desc_b, &ib)?;
    let (fa, fb, n_systems) = fused_features(mode, cfg, (&pa, &pb), (&sub_a, &sub_b), &anchors)?;
    let sim = cosine_matrix(&fa, &fb);

    let local = if mode == EncodingMode::Nn {
        mutual_nearest_neighbors(&sim)
    } else {
        let assign = sinkhorn_assign(&(sim * cfg.score_scale), cfg.dustbin, cfg.sinkhorn_iters);
        select_matches(&assign, cfg.alpha)
    };
    let matches: Vec<Match> =
        local.into_iter().map(|m| Match { i: ia[m.i], j: ib[m.j], confidence: m.confidence }).collect();
    let report = evaluate(scene, &matches, cfg)?;
    Ok(SceneResult { seed: scene.seed, mode, report, anchors, n_systems, matches })
}

/// Scores a match set against the scene's ground truth.
pub fn evaluate(scene: &ScenePair, matches: &[Match], cfg: &RunConfig) -> Result<MatchReport> {
    let pairs: Vec<(usize, usize)> = matches.iter().map(|m| (m.i, m.j)).collect();
    let homography = scene.homography();
    let truth = match homography {
        Some(h) => WarpTruth::Homography(h),
        None => {
            let partner = scene.gt_partner();
            WarpTruth::Flow(partner.iter().map(|j| j.map(|j| scene.kps_b[j])).collect())
        }
    };
    let p_proj = eval::precision_proj(&pairs, &scene.kps_a, &scene.kps_b, &truth, cfg.tau_px);
    let p_epi = match (scene.has_valid_essential(), scene.k_a, scene.k_b) {
        (true, Some(ka), Some(kb)) => Some(eval::precision_epi(
            &pairs,
            &scene.kps_a,
            &scene.kps_b,
            &scene.essential().expect("checked"),
            &matrix_from_row_major(&ka),
            &matrix_from_row_major(&kb),
            cfg.tau_epi,
        )?),
        _ => None,
    };
    let rec = eval::recall(&pairs, &scene.gt_matches);
    let corner = homography.map(|h_gt| {
        let corr: Vec<(Point2, Point2)> = pairs.iter().map(|&(i, j)| (scene.kps_a[i], scene.kps_b[j])).collect();
        eval::estimate_homography(&corr, cfg.ransac_thresh_px, cfg.ransac_iters, run_seed(scene, cfg))
            .is_some_and(|h: Matrix3<f64>| eval::corner_accuracy(&h, &h_gt, scene_image_size(scene), cfg.corner_tau_px))
    });
    Ok(MatchReport::new(p_epi, p_proj, rec, pairs.len(), corner))
}

/// Recorded image size, or the keypoint extent rounded up to whole pixels.
fn scene_image_size(scene: &ScenePair) -> (f64, f64) {
    if let Some([w, h]) = scene.image_size {
        return (w, h);
    }
    let w = scene.kps_a.iter().map(|p| p.x).fold(1.0, f64::max).ceil();
    let h = scene.kps_a.iter().map(|p| p.y).fold(1.0, f64::max).ceil();
    (w, h)
}

/// Mean of each metric over scenes; flags count the scenes that raised them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: EncodingMode,
    pub n_scenes: usize,
    pub precision_proj: f64,
    pub precision_epi: Option<f64>,
    pub recall: f64,
    pub f_measure: f64,
    pub mean_matches: f64,
    pub corner_acc: Option<f64>,
    pub empty_match_scenes: usize,
}

pub fn summarize(mode: EncodingMode, reports: &[MatchReport]) -> Summary {
    let n = reports.len();
    let mean =
        |f: &dyn Fn(&MatchReport) -> f64| if n == 0 { 0.0 } else { reports.iter().map(f).sum::<f64>() / n as f64 };
    let opt_mean = |f: &dyn Fn(&MatchReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Summary {
        mode,
        n_scenes: n,
        precision_proj: mean(&|r| r.precision_proj),
        precision_epi: opt_mean(&|r| r.precision_epi),
        recall: mean(&|r| r.recall),
        f_measure: mean(&|r| r.f_measure),
        mean_matches: mean(&|r| r.n_matches as f64),
        corner_acc: opt_mean(&|r| r.corner_acc),
        empty_match_scenes: reports.iter().filter(|r| r.empty_matches).count(),
    }
}
