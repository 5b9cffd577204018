//! Compatibility estimation over putative correspondences: cosine adjacency
//! and degree, a k-nearest-neighbour graph, and max-pooled edge features.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::Linear;

/// Default neighbourhood size.
pub const DEFAULT_KNN_K: usize = 8;

/// Row-wise feature projection applied before the adjacency product.
pub trait Embed {
    fn embed(&self, row: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEmbed;

impl Embed for IdentityEmbed {
    fn embed(&self, row: &[f64]) -> Vec<f64> {
        row.to_vec()
    }
}

impl Embed for Linear {
    fn embed(&self, row: &[f64]) -> Vec<f64> {
        self.apply(row)
    }
}

/// Edge function `h(t_i, t_j)`.
pub trait EdgeFn {
    fn edge(&self, ti: &[f64], tj: &[f64]) -> Vec<f64>;
}

impl<F> EdgeFn for F
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    fn edge(&self, ti: &[f64], tj: &[f64]) -> Vec<f64> {
        self(ti, tj)
    }
}

/// A linear map on the concatenation `[t_i, t_j]`.
impl EdgeFn for Linear {
    fn edge(&self, ti: &[f64], tj: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(ti.len() + tj.len());
        x.extend_from_slice(ti);
        x.extend_from_slice(tj);
        self.apply(&x)
    }
}

/// Fixed linear edge map `[t_i, t_j] -> [t_i, t_j - t_i]`.
pub fn default_edge_map(d: usize) -> Linear {
    let mut w = DMatrix::zeros(2 * d, 2 * d);
    for c in 0..d {
        w[(c, c)] = 1.0;
        w[(d + c, d + c)] = 1.0;
        w[(d + c, c)] = -1.0;
    }
    Linear { weight: w, bias: DVector::zeros(2 * d), relu: false }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Returns the per-correspondence degree and `[features | degree]`.
pub fn compatibility_degree(features: &DMatrix<f64>, embed: &dyn Embed) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = features.nrows();
    let embedded: Vec<Vec<f64>> = rows(features)
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let f = embed.embed(r);
            let n = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroNormRow(i));
            }
            Ok(f.into_iter().map(|v| v / n).collect::<Vec<_>>())
        })
        .collect::<Result<_>>()?;
    let degree = DVector::from_fn(p, |i, _| {
        embedded.iter().map(|fj| embedded[i].iter().zip(fj).map(|(a, b)| a * b).sum::<f64>()).sum()
    });
    let mut concat = DMatrix::zeros(p, features.ncols() + 1);
    concat.columns_mut(0, features.ncols()).copy_from(features);
    concat.set_column(features.ncols(), &degree);
    Ok((degree, concat))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrGraph {
    pub nodes: usize,
    /// `neighbor_index[i]` lists the k nearest other nodes, nearest first.
    pub neighbor_index: Vec<Vec<usize>>,
    pub edge_features: Option<DMatrix<f64>>,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Euclidean kNN graph without self loops; distance ties go to the lower index.
pub fn knn_graph(features: &DMatrix<f64>, k: usize) -> Result<CorrGraph> {
    let p = features.nrows();
    if p <= k {
        return Err(Error::TooFewNodes { nodes: p, k });
    }
    let pts = rows(features);
    let neighbor_index = (0..p)
        .map(|i| {
            // max-heap of the k best so far; the worst sits on top
            let mut heap = BinaryHeap::with_capacity(k + 1);
            for (j, q) in pts.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d2: f64 = pts[i].iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                heap.push(Candidate(d2, j));
                if heap.len() > k {
                    heap.pop();
                }
            }
            heap.into_sorted_vec().into_iter().map(|c| c.1).collect()
        })
        .collect();
    Ok(CorrGraph { nodes: p, neighbor_index, edge_features: None })
}

/// Channel-wise max over `edge_fn(t_i, t_j)` for the neighbours of each node.
pub fn edge_aggregate(features: &DMatrix<f64>, neighbor_index: &[Vec<usize>], edge_fn: &dyn EdgeFn) -> DMatrix<f64> {
    let pts = rows(features);
    let pooled: Vec<Vec<f64>> = neighbor_index
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut acc: Option<Vec<f64>> = None;
            for &j in nbrs {
                let e = edge_fn.edge(&pts[i], &pts[j]);
                acc = Some(match acc {
                    None => e,
                    Some(a) => a.iter().zip(&e).map(|(x, y)| x.max(*y)).collect(),
                });
            }
            acc.unwrap_or_default()
        })
        .collect();
    let width = pooled.iter().map(Vec::len).max().unwrap_or(0);
    DMatrix::from_fn(pooled.len(), width, |r, c| pooled[r].get(c).copied().unwrap_or(0.0))
}

impl CorrGraph {
    pub fn aggregate(mut self, features: &DMatrix<f64>, edge_fn: &dyn EdgeFn) -> Self {
        self.edge_features = Some(edge_aggregate(features, &self.neighbor_index, edge_fn));
        self
    }
}

/// Degree, concatenation, kNN and max-pooled edge features in one pass.
pub fn compatibility_block(
    features: &DMatrix<f64>,
    embed: &dyn Embed,
    k: usize,
    edge_fn: &dyn EdgeFn,
) -> Result<CorrGraph> {
    let (_, concat) = compatibility_degree(features, embed)?;
    Ok(knn_graph(&concat, k)?.aggregate(&concat, edge_fn))
}
