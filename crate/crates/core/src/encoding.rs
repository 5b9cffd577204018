//! Multi-system correspondence coordinates.
//!
//! Every 3-combination of seed anchors defines one paired system (one basis
//! per image). A point is encoded by concatenating its barycentric coordinate
//! in each of its own image's systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_basis, default_parallel_tol, BasisTriple, Point2};

/// Anchor correspondences, kept sorted by descending confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    anchors: Vec<(Point2, Point2)>,
    confidence: Vec<f64>,
}

impl SeedSet {
    pub fn new(mut entries: Vec<(Point2, Point2, f64)>) -> Result<Self> {
        if entries.len() < 3 {
            return Err(Error::TooFewSeeds(format!("need at least 3 anchors, got {}", entries.len())));
        }
        // stable: equal confidences keep input order
        entries.sort_by(|a, b| b.2.total_cmp(&a.2));
        Ok(Self {
            anchors: entries.iter().map(|e| (e.0, e.1)).collect(),
            confidence: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &[(Point2, Point2)] {
        &self.anchors
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    /// Keeps the `k` most confident anchors.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let entries = self.anchors.iter().zip(&self.confidence).take(k).map(|(&(a, b), &c)| (a, b, c)).collect();
        Self::new(entries)
    }
}

/// Number of 3-combinations of `k` anchors.
pub fn max_systems(k: usize) -> usize {
    if k < 3 {
        0
    } else {
        k * (k - 1) * (k - 2) / 6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// One barycentric system per image, both built from the same anchor indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemPair {
    pub basis_a: BasisTriple,
    pub basis_b: BasisTriple,
    pub index: usize,
    pub anchors: [usize; 3],
}

impl SystemPair {
    pub fn basis(&self, side: Side) -> &BasisTriple {
        match side {
            Side::A => &self.basis_a,
            Side::B => &self.basis_b,
        }
    }
}

/// Enumerates paired systems in lexicographic anchor order (origin = lowest
/// index). Triples degenerate in either image are skipped.
///
/// `parallel_tol = None` uses the scale-relative default per basis.
pub fn enumerate_systems(seeds: &SeedSet, parallel_tol: Option<f64>) -> Result<Vec<SystemPair>> {
    let k = seeds.k();
    let anchors = seeds.anchors();
    let build = |p0: Point2, p1: Point2, p2: Point2| {
        let tol = parallel_tol.unwrap_or_else(|| default_parallel_tol(p0, p1, p2));
        build_basis(p0, p1, p2, tol)
    };
    let mut systems = Vec::with_capacity(max_systems(k));
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let a = build(anchors[i].0, anchors[j].0, anchors[l].0);
                let b = build(anchors[i].1, anchors[j].1, anchors[l].1);
                if let (Ok(basis_a), Ok(basis_b)) = (a, b) {
                    systems.push(SystemPair { basis_a, basis_b, index: systems.len(), anchors: [i, j, l] });
                }
            }
        }
    }
    if systems.is_empty() {
        return Err(Error::TooFewSeeds(format!("no non-degenerate system among {k} anchors")));
    }
    Ok(systems)
}

/// `coords` is N x 3D, `weights` is N x D.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceCoords {
    pub coords: DMatrix<f64>,
    pub weights: DMatrix<f64>,
}

impl CorrespondenceCoords {
    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn n_systems(&self) -> usize {
        self.weights.ncols()
    }
}

pub fn encode_points(systems: &[SystemPair], points: &[Point2], side: Side, epsilon: f64) -> CorrespondenceCoords {
    let d = systems.len();
    let mut coords = DMatrix::zeros(points.len(), 3 * d);
    let mut weights = DMatrix::zeros(points.len(), d);
    for (i, &p) in points.iter().enumerate() {
        for (s, sys) in systems.iter().enumerate() {
            let basis = sys.basis(side);
            let c = basis.barycentric(p);
            coords[(i, 3 * s)] = c.a;
            coords[(i, 3 * s + 1)] = c.b;
            coords[(i, 3 * s + 2)] = c.c;
            weights[(i, s)] = basis.confidence_weight(p, epsilon);
        }
    }
    CorrespondenceCoords { coords, weights }
}

/// Per-column zero-score normalization (population std). Columns with
/// (near) zero spread keep std = 1, i.e. are only centered.
pub fn zscore_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    if n == 0 {
        return out;
    }
    for mut col in out.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let std = if std > 1e-12 { std } else { 1.0 };
        for v in col.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
    out
}

/// Normalizes the stacked (N+M) x 3D coordinates column-wise, weights each
/// system's three slots by that point's confidence, and splits back.
pub fn matcher_encoding(a: &CorrespondenceCoords, b: &CorrespondenceCoords) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if a.coords.ncols() != b.coords.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "coordinate widths differ: {} vs {}",
            a.coords.ncols(),
            b.coords.ncols()
        )));
    }
    let (n, m, w) = (a.coords.nrows(), b.coords.nrows(), a.coords.ncols());
    let mut stacked = DMatrix::zeros(n + m, w);
    stacked.rows_mut(0, n).copy_from(&a.coords);
    stacked.rows_mut(n, m).copy_from(&b.coords);
    let mut z = zscore_columns(&stacked);
    for r in 0..n + m {
        let weights = if r < n { a.weights.row(r) } else { b.weights.row(r - n) };
        for c in 0..w {
            z[(r, c)] *= weights[c / 3];
        }
    }
    Ok((z.rows(0, n).into_owned(), z.rows(n, m).into_owned()))
}

/// Two-value consistency feature of one correspondence: mean and population
/// std of the confidence-weighted squared coordinate differences.
pub fn filter_feature(systems: &[SystemPair], corr: (Point2, Point2), epsilon: f64) -> (f64, f64) {
    let (pa, pb) = corr;
    let u: Vec<f64> = systems
        .iter()
        .map(|s| {
            let xa = s.basis_a.barycentric(pa);
            let xb = s.basis_b.barycentric(pb);
            let d2 = (xa.a - xb.a).powi(2) + (xa.b - xb.b).powi(2) + (xa.c - xb.c).powi(2);
            d2 * s.basis_a.confidence_weight(pa, epsilon) * s.basis_b.confidence_weight(pb, epsilon)
        })
        .collect();
    if u.is_empty() {
        return (0.0, 0.0);
    }
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn generic_anchors(k: usize) -> Vec<(Point2, Point2, f64)> {
        let pts = [
            p(10.0, 12.0),
            p(200.0, 40.0),
            p(90.0, 310.0),
            p(330.0, 250.0),
            p(150.0, 150.0),
            p(40.0, 420.0),
            p(500.0, 80.0),
        ];
        pts.iter()
            .take(k)
            .enumerate()
            .map(|(i, &q)| (q, p(0.9 * q.x - 0.2 * q.y + 30.0, 0.3 * q.x + 1.1 * q.y - 5.0), 1.0 - i as f64 * 0.1))
            .collect()
    }

    #[test]
    fn seed_set_rejects_fewer_than_three() {
        assert!(matches!(SeedSet::new(generic_anchors(2)), Err(Error::TooFewSeeds(_))));
    }

    #[test]
    fn seed_set_sorted_by_confidence() {
        let mut e = generic_anchors(4);
        e.reverse();
        let s = SeedSet::new(e).unwrap();
        assert!(s.confidence().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(s.anchors()[0].0, p(10.0, 12.0));
    }

    #[test]
    fn system_counts() {
        let s3 = SeedSet::new(generic_anchors(3)).unwrap();
        assert_eq!(enumerate_systems(&s3, None).unwrap().len(), 1);
        let s5 = SeedSet::new(generic_anchors(5)).unwrap();
        let sys = enumerate_systems(&s5, None).unwrap();
        assert_eq!(sys.len(), 10);
        assert_eq!(sys.len(), max_systems(5));
        let enc = encode_points(&sys, &[p(1.0, 2.0)], Side::A, 2.0);
        assert_eq!(enc.coords.ncols(), 30);
        // lexicographic, origin = lowest index
        assert_eq!(sys[0].anchors, [0, 1, 2]);
        assert_eq!(sys[9].anchors, [2, 3, 4]);
        assert!(sys.iter().enumerate().all(|(i, s)| s.index == i));
    }

    #[test]
    fn collinear_triple_in_one_image_is_skipped() {
        let mut e = generic_anchors(5);
        // anchors 0, 1, 3 collinear in image A only
        e[0].0 = p(0.0, 0.0);
        e[1].0 = p(100.0, 50.0);
        e[3].0 = p(300.0, 150.0);
        let s = SeedSet::new(e).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        assert_eq!(sys.len(), 9);
        assert!(sys.iter().all(|s| s.anchors != [0, 1, 3]));
    }

    #[test]
    fn all_collinear_is_too_few_seeds() {
        let e = (0..4).map(|i| (p(i as f64, 2.0 * i as f64), p(i as f64, 0.0), 1.0)).collect();
        let s = SeedSet::new(e).unwrap();
        assert!(matches!(enumerate_systems(&s, None), Err(Error::TooFewSeeds(_))));
    }

    #[test]
    fn origin_point_encodes_to_unit_c() {
        let s = SeedSet::new(generic_anchors(4)).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        let origin = sys[2].basis_a.origin;
        let enc = encode_points(&sys, &[origin], Side::A, 2.0);
        assert_eq!(enc.coords[(0, 6)], 0.0);
        assert_eq!(enc.coords[(0, 7)], 0.0);
        assert_eq!(enc.coords[(0, 8)], 1.0);
        assert_eq!(enc.weights[(0, 2)], 1.0);
    }

    #[test]
    fn affine_pair_encodes_identically() {
        let s = SeedSet::new(generic_anchors(5)).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        let pts_a: Vec<_> = (0..20).map(|i| p(17.0 * i as f64, 300.0 - 11.0 * i as f64)).collect();
        let pts_b: Vec<_> =
            pts_a.iter().map(|q| p(0.9 * q.x - 0.2 * q.y + 30.0, 0.3 * q.x + 1.1 * q.y - 5.0)).collect();
        let ea = encode_points(&sys, &pts_a, Side::A, 2.0);
        let eb = encode_points(&sys, &pts_b, Side::B, 2.0);
        assert!((&ea.coords - &eb.coords).amax() < 1e-7);
        for (i, (&a, &b)) in pts_a.iter().zip(&pts_b).enumerate() {
            let (m, v) = filter_feature(&sys, (a, b), 2.0);
            assert!(m <= 1e-12 && v <= 1e-12, "row {i}: m={m} v={v}");
        }
    }

    #[test]
    fn matcher_encoding_symmetric_inputs() {
        let s = SeedSet::new(generic_anchors(4)).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        let pts: Vec<_> = (0..6).map(|i| p(30.0 * i as f64, 20.0 + 7.0 * i as f64)).collect();
        let ea = encode_points(&sys, &pts, Side::A, 2.0);
        let (za, zb) = matcher_encoding(&ea, &ea).unwrap();
        assert_eq!(za, zb);
    }

    #[test]
    fn matcher_encoding_single_point_is_zero() {
        let s = SeedSet::new(generic_anchors(3)).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        let e = encode_points(&sys, &[p(5.0, 6.0)], Side::A, 2.0);
        let empty = encode_points(&sys, &[], Side::B, 2.0);
        let (za, zb) = matcher_encoding(&e, &empty).unwrap();
        assert!(za.iter().all(|&v| v == 0.0));
        assert_eq!(zb.nrows(), 0);
    }

    #[test]
    fn matcher_encoding_width_mismatch() {
        let s3 = enumerate_systems(&SeedSet::new(generic_anchors(3)).unwrap(), None).unwrap();
        let s4 = enumerate_systems(&SeedSet::new(generic_anchors(4)).unwrap(), None).unwrap();
        let a = encode_points(&s3, &[p(1.0, 1.0)], Side::A, 2.0);
        let b = encode_points(&s4, &[p(1.0, 1.0)], Side::B, 2.0);
        assert!(matches!(matcher_encoding(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zscore_statistics() {
        let m = DMatrix::from_row_slice(
            4,
            6,
            &[
                0.3, -1.2, 4.0, 0.0, 7.5, 1.0, //
                2.1, 0.4, -3.3, 0.5, 7.5, 1.1, //
                -0.7, 5.6, 1.9, 0.25, 7.5, 0.9, //
                1.4, -2.2, 0.8, 0.75, 7.5, 1.3,
            ],
        );
        let z = zscore_columns(&m);
        for c in 0..6 {
            let col = z.column(c);
            let mean = col.iter().sum::<f64>() / 4.0;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(mean.abs() < 1e-9);
            if c == 4 {
                // constant column: centered only
                assert_eq!(std, 0.0);
            } else {
                assert_relative_eq!(std, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn single_system_has_zero_spread() {
        let s = SeedSet::new(generic_anchors(3)).unwrap();
        let sys = enumerate_systems(&s, None).unwrap();
        let (m, v) = filter_feature(&sys, (p(50.0, 60.0), p(300.0, -40.0)), 2.0);
        assert!(m > 0.0);
        assert_eq!(v, 0.0);
    }
}
