//! Scalar losses with their gradients.

use crate::error::LossError;

/// Probabilities below this are treated as this value.
pub const PROB_FLOOR: f64 = 1e-12;

/// `KL(P || Q)` with `Q` floored at [`PROB_FLOOR`] and renormalized.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    kl_with_grad(p, q).0
}

/// KL value together with its gradients with respect to `p` and `q`.
///
/// Zero entries of `p` contribute nothing and receive the gradient of the
/// floored term.
pub fn kl_with_grad(p: &[f64], q: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(p.len(), q.len(), "kl operands differ in length");
    let qf: Vec<f64> = q.iter().map(|v| v.max(PROB_FLOOR)).collect();
    let s: f64 = qf.iter().sum();
    // a sum within rounding of 1 is already normalized; keeps KL(P, P) exactly 0
    let ln_s = if (s - 1.0).abs() <= 8.0 * f64::EPSILON {
        0.0
    } else {
        s.ln()
    };
    let p_sum: f64 = p.iter().sum();
    let mut value = 0.0;
    let mut dp = Vec::with_capacity(p.len());
    let mut dq = Vec::with_capacity(q.len());
    for i in 0..p.len() {
        let log_ratio = p[i].max(PROB_FLOOR).ln() - qf[i].ln() + ln_s;
        if p[i] > 0.0 {
            value += p[i] * log_ratio;
        }
        dp.push(log_ratio + 1.0);
        dq.push(if q[i] > PROB_FLOOR {
            -p[i] / q[i] + p_sum / s
        } else {
            p_sum / s
        });
    }
    // rounding can leave a tiny negative value for equal arguments
    (value.max(0.0), dp, dq)
}

/// `-sum_c y_c log p_c` for one sample.
pub fn cross_entropy(y: &[f64], p: &[f64]) -> f64 {
    y.iter()
        .zip(p)
        .filter(|(yc, _)| **yc != 0.0)
        .map(|(yc, pc)| -yc * pc.max(PROB_FLOOR).ln())
        .sum()
}

/// Gradient of [`cross_entropy`] with respect to `p`.
pub fn cross_entropy_grad(y: &[f64], p: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(p)
        .map(|(yc, pc)| if *pc > PROB_FLOOR { -yc / pc } else { 0.0 })
        .collect()
}

/// Batch-mean cross-entropy against integer labels.
pub fn categorical_cross_entropy(labels: &[usize], dists: &[Vec<f64>]) -> Result<f64, LossError> {
    if labels.len() != dists.len() {
        return Err(LossError::LengthMismatch(labels.len(), dists.len()));
    }
    if labels.is_empty() {
        return Err(LossError::Empty);
    }
    let total: f64 = labels
        .iter()
        .zip(dists)
        .map(|(&c, p)| -p[c].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Mean of squared componentwise differences.
pub fn mse(x: &[f64], x_hat: &[f64]) -> Result<f64, LossError> {
    if x.len() != x_hat.len() {
        return Err(LossError::LengthMismatch(x.len(), x_hat.len()));
    }
    if x.is_empty() {
        return Err(LossError::Empty);
    }
    let s: f64 = x.iter().zip(x_hat).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(s / x.len() as f64)
}

/// Gradient of [`mse`] with respect to `x_hat`.
pub fn mse_grad(x: &[f64], x_hat: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    x.iter()
        .zip(x_hat)
        .map(|(a, b)| 2.0 * (b - a) / n)
        .collect()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Accumulated-cost table, `(n + 1) x (m + 1)` with an infinite border.
fn dtw_table(x: &[[f64; 2]], y: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let (n, m) = (x.len(), y.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]);
            d[i][j] = dist2(x[i - 1], y[j - 1]) + best;
        }
    }
    d
}

/// Minimum summed Euclidean distance over monotone alignments that pair the
/// first points and the last points.
pub fn dtw_distance(x: &[[f64; 2]], y: &[[f64; 2]]) -> Result<f64, LossError> {
    if x.is_empty() || y.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(dtw_table(x, y)[x.len()][y.len()])
}

/// Distance and one optimal alignment as `(i, j)` pairs from `(0, 0)`.
/// Ties prefer the diagonal step, then a step in `x`.
pub fn dtw_path(x: &[[f64; 2]], y: &[[f64; 2]]) -> Result<(f64, Vec<(usize, usize)>), LossError> {
    if x.is_empty() || y.is_empty() {
        return Err(LossError::Empty);
    }
    let d = dtw_table(x, y);
    let (mut i, mut j) = (x.len(), y.len());
    let mut path = vec![(i - 1, j - 1)];
    while (i, j) != (1, 1) {
        let diag = d[i - 1][j - 1];
        let up = d[i - 1][j];
        let left = d[i][j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i - 1, j - 1));
    }
    path.reverse();
    Ok((d[x.len()][y.len()], path))
}

/// Cost of a fixed alignment.
pub fn dtw_path_cost(x: &[[f64; 2]], y: &[[f64; 2]], path: &[(usize, usize)]) -> f64 {
    path.iter().map(|&(i, j)| dist2(x[i], y[j])).sum()
}

/// Gradient of [`dtw_path_cost`] with respect to `y`, with the path held fixed.
/// Coincident points contribute zero.
pub fn dtw_grad_frozen(x: &[[f64; 2]], y: &[[f64; 2]], path: &[(usize, usize)]) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; y.len()];
    for &(i, j) in path {
        let d = dist2(x[i], y[j]);
        if d > 0.0 {
            g[j][0] += (y[j][0] - x[i][0]) / d;
            g[j][1] += (y[j][1] - x[i][1]) / d;
        }
    }
    g
}

/// Discriminator and generator adversarial losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvLosses {
    /// `mean(-log real - log(1 - fake))`.
    pub d: f64,
    /// Non-saturating `mean(-log fake)`.
    pub g: f64,
}

pub fn adv_losses(real: &[f64], fake: &[f64]) -> Result<AdvLosses, LossError> {
    if real.len() != fake.len() {
        return Err(LossError::LengthMismatch(real.len(), fake.len()));
    }
    if real.is_empty() {
        return Err(LossError::Empty);
    }
    let n = real.len() as f64;
    let ln = |v: f64| v.max(PROB_FLOOR).ln();
    let d = real
        .iter()
        .zip(fake)
        .map(|(r, f)| -ln(*r) - ln(1.0 - f))
        .sum::<f64>()
        / n;
    let g = fake.iter().map(|f| -ln(*f)).sum::<f64>() / n;
    Ok(AdvLosses { d, g })
}

/// Gradients of [`AdvLosses::d`] with respect to each real and fake score.
pub fn adv_d_grad(real: &[f64], fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = real.len() as f64;
    let dr = real
        .iter()
        .map(|r| -1.0 / (n * r.max(PROB_FLOOR)))
        .collect();
    let df = fake
        .iter()
        .map(|f| 1.0 / (n * (1.0 - f).max(PROB_FLOOR)))
        .collect();
    (dr, df)
}

/// Gradient of [`AdvLosses::g`] with respect to each fake score.
pub fn adv_g_grad(fake: &[f64]) -> Vec<f64> {
    let n = fake.len() as f64;
    fake.iter()
        .map(|f| -1.0 / (n * f.max(PROB_FLOOR)))
        .collect()
}

/// Real/fake scores as two-class distributions `[s, 1 - s]`, real first,
/// scored by categorical cross-entropy against "real" for real scores and
/// "fake" for fake ones.
pub fn real_fake_cross_entropy(real: &[f64], fake: &[f64]) -> Result<f64, LossError> {
    let dists: Vec<Vec<f64>> = real.iter().chain(fake).map(|s| vec![*s, 1.0 - s]).collect();
    let labels: Vec<usize> = std::iter::repeat_n(0, real.len())
        .chain(std::iter::repeat_n(1, fake.len()))
        .collect();
    categorical_cross_entropy(&labels, &dists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let u = [1.0 / 6.0; 6];
        let mut one = [0.0; 6];
        one[0] = 1.0;
        assert!((kl_divergence(&one, &u) - 6f64.ln()).abs() < 1e-12);
        assert_eq!(kl_divergence(&u, &u), 0.0);
        assert!(kl_divergence(&u, &one) > 20.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let u = vec![1.0 / 6.0; 6];
        let ce = categorical_cross_entropy(&[0, 3, 5], &[u.clone(), u.clone(), u]).unwrap();
        assert!((ce - 6f64.ln()).abs() < 1e-12);
        let mut p = vec![0.0; 6];
        p[2] = 1.0;
        assert_eq!(categorical_cross_entropy(&[2], &[p]).unwrap(), 0.0);
        assert!(categorical_cross_entropy(&[0], &[]).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.0], &[2.0]).unwrap(), 4.0);
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(LossError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw_distance(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap(), 5.0);
        let x = [[0.0, 0.0], [1.0, 0.5], [2.0, 2.0]];
        assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
        let (d, path) = dtw_path(&x, &[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(2, 1)));
        assert!((d - dtw_path_cost(&x, &[[0.0, 0.0], [2.0, 2.0]], &path)).abs() < 1e-15);
        assert!(dtw_distance(&[], &x).is_err());
    }

    #[test]
    fn adversarial_at_half() {
        let a = adv_losses(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((a.d - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((a.g - 2f64.ln()).abs() < 1e-15);
        let ce = real_fake_cross_entropy(&[0.5], &[0.5]).unwrap();
        assert!((ce - 2f64.ln()).abs() < 1e-15);
        let near_one = adv_losses(&[0.5], &[1.0 - 1e-12]).unwrap();
        assert!(near_one.g < 1e-11);
    }
}
