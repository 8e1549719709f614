//! Plug-in mutual information between two feature batches.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::LossError;

/// Quantile bins per variable.
pub const MI_BINS: usize = 4;
/// Smallest batch the estimator accepts.
pub const MI_MIN_BATCH: usize = 8;

/// Scores of each row on the leading principal axis, or `None` when the
/// rows do not vary.
pub fn first_principal_coordinate(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return None;
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    if cov.trace() <= 1e-24 {
        return None;
    }
    let axis = if d == 1 {
        nalgebra::DVector::from_element(1, 1.0)
    } else {
        let eig = SymmetricEigen::new(cov);
        let k = eig.eigenvalues.imax();
        eig.eigenvectors.column(k).into_owned()
    };
    let scores: Vec<f64> = (centered * axis).iter().copied().collect();
    let spread = scores.iter().map(|s| s * s).sum::<f64>() / n as f64;
    (spread > 1e-24).then_some(scores)
}

/// Equal-mass bin of each value: rank (ties by position) times `bins / n`.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Plug-in mutual information in nats between two discrete labelings.
pub fn discrete_mutual_information(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0.0; bins * bins];
    let mut pa = vec![0.0; bins];
    let mut pb = vec![0.0; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1.0 / n;
        pa[i] += 1.0 / n;
        pb[j] += 1.0 / n;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let p = joint[i * bins + j];
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Estimated `I(X; Y)` from the first principal coordinate of each batch,
/// each cut into [`MI_BINS`] equal-mass bins. Constant features give zero.
pub fn mutual_information(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64, LossError> {
    if x.len() != y.len() {
        return Err(LossError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MI_MIN_BATCH {
        return Err(LossError::BatchTooSmall {
            got: x.len(),
            min: MI_MIN_BATCH,
        });
    }
    let (Some(sx), Some(sy)) = (first_principal_coordinate(x), first_principal_coordinate(y))
    else {
        return Ok(0.0);
    };
    Ok(discrete_mutual_information(
        &quantile_bins(&sx, MI_BINS),
        &quantile_bins(&sy, MI_BINS),
        MI_BINS,
    ))
}

/// `-I(X; Y)`.
pub fn mutual_information_loss(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64, LossError> {
    mutual_information(x, y).map(|i| -i)
}
