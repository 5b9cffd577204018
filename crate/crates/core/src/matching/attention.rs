use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower bound on the weighted standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Per-channel weights `w_local * w_global`, normalized to sum to one over
/// the points. Local weights are sigmoids of `z_i = V f_i + b`, global
/// weights a softmax of the same logits across points.
pub fn attention_weights(f: &DMatrix<f64>, v: &DMatrix<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (n, h) = f.shape();
    if v.shape() != (h, h) || b.len() != h {
        return Err(Error::ShapeMismatch(format!(
            "attentive normalization: F is {n}x{h}, V is {}x{}, b has {}",
            v.nrows(),
            v.ncols(),
            b.len()
        )));
    }
    // rows are z_i
    let mut z = f * v.transpose();
    for mut row in z.row_iter_mut() {
        row += b.transpose();
    }
    let mut w = DMatrix::zeros(n, h);
    for c in 0..h {
        let col = z.column(c);
        let max = col.max();
        let denom: f64 = col.iter().map(|x| (x - max).exp()).sum();
        for r in 0..n {
            let local = 1.0 / (1.0 + (-z[(r, c)]).exp());
            let global = (z[(r, c)] - max).exp() / denom;
            w[(r, c)] = local * global;
        }
        let total: f64 = w.column(c).sum();
        if total > 0.0 {
            w.column_mut(c).unscale_mut(total);
        } else {
            w.column_mut(c).fill(1.0 / n as f64);
        }
    }
    Ok(w)
}

/// `(F - mu_w) / max(sigma_w, SIGMA_FLOOR)` channel-wise, with weighted
/// mean and standard deviation from [`attention_weights`].
pub fn attentive_normalize(f: &DMatrix<f64>, v: &DMatrix<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let w = attention_weights(f, v, b)?;
    let (n, h) = f.shape();
    let mut out = DMatrix::zeros(n, h);
    for c in 0..h {
        let mu: f64 = (0..n).map(|r| w[(r, c)] * f[(r, c)]).sum();
        let var: f64 = (0..n).map(|r| w[(r, c)] * (f[(r, c)] - mu).powi(2)).sum();
        let sigma = var.sqrt().max(SIGMA_FLOOR);
        for r in 0..n {
            out[(r, c)] = (f[(r, c)] - mu) / sigma;
        }
    }
    Ok(out)
}
