use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Default number of Sinkhorn rounds.
pub const DEFAULT_SINKHORN_ITERS: usize = 50;

/// Soft assignment with one dustbin row and one dustbin column appended.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    pub m: DMatrix<f64>,
    pub dustbin_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub i: usize,
    pub j: usize,
    pub confidence: f64,
}

impl AssignmentMatrix {
    pub fn n_a(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn n_b(&self) -> usize {
        self.m.ncols() - 1
    }

    /// Largest deviation from 1 over interior row and column sums.
    pub fn interior_marginal_error(&self) -> f64 {
        let (na, nb) = (self.n_a(), self.n_b());
        let rows = (0..na).map(|i| (self.m.row(i).sum() - 1.0).abs());
        let cols = (0..nb).map(|j| (self.m.column(j).sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn over the score matrix augmented with a dustbin row
/// and column filled with `dustbin_r`.
///
/// Marginals are 1 for every keypoint, `N_B` for the dustbin row and `N_A`
/// for the dustbin column; the result is rescaled so that interior rows and
/// columns sum to one. Each round is one row pass followed by one column pass.
pub fn sinkhorn_assign(score: &DMatrix<f64>, dustbin_r: f64, iters: usize) -> AssignmentMatrix {
    let (na, nb) = score.shape();
    let mut z = DMatrix::from_element(na + 1, nb + 1, dustbin_r);
    z.view_mut((0, 0), (na, nb)).copy_from(score);

    let norm = -((na + nb) as f64).ln();
    let log_mu: Vec<f64> = (0..=na).map(|i| if i < na { norm } else { (nb as f64).ln() + norm }).collect();
    let log_nu: Vec<f64> = (0..=nb).map(|j| if j < nb { norm } else { (na as f64).ln() + norm }).collect();
    let mut u = vec![0.0; na + 1];
    let mut v = vec![0.0; nb + 1];

    for _ in 0..iters.max(1) {
        for i in 0..=na {
            let lse = logsumexp((0..=nb).map(|j| z[(i, j)] + v[j]));
            u[i] = log_mu[i] - lse;
        }
        for j in 0..=nb {
            let lse = logsumexp((0..=na).map(|i| z[(i, j)] + u[i]));
            v[j] = log_nu[j] - lse;
        }
    }
    let m = DMatrix::from_fn(na + 1, nb + 1, |i, j| (z[(i, j)] + u[i] + v[j] - norm).exp());
    AssignmentMatrix { m, dustbin_r }
}

/// Cells that are the maximum of both their row and column within the
/// leading `rows x cols` block. Ties resolve to the lower index.
pub fn mutual_argmax(m: &DMatrix<f64>, rows: usize, cols: usize) -> Vec<Match> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let argmax = |it: &mut dyn Iterator<Item = (usize, f64)>| {
        it.fold((usize::MAX, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best }).0
    };
    let row_best: Vec<usize> = (0..rows).map(|i| argmax(&mut (0..cols).map(|j| (j, m[(i, j)])))).collect();
    let col_best: Vec<usize> = (0..cols).map(|j| argmax(&mut (0..rows).map(|i| (i, m[(i, j)])))).collect();
    row_best
        .iter()
        .enumerate()
        .filter(|&(i, &j)| j != usize::MAX && col_best[j] == i)
        .map(|(i, &j)| Match { i, j, confidence: m[(i, j)] })
        .collect()
}

/// Mutual-argmax cells of the interior block with mass above `alpha`.
pub fn select_matches(assign: &AssignmentMatrix, alpha: f64) -> Vec<Match> {
    mutual_argmax(&assign.m, assign.n_a(), assign.n_b()).into_iter().filter(|m| m.confidence > alpha).collect()
}

/// Plain mutual nearest neighbours on a raw score matrix.
pub fn mutual_nearest_neighbors(score: &DMatrix<f64>) -> Vec<Match> {
    mutual_argmax(score, score.nrows(), score.ncols())
}
