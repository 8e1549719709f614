//! Differentiable primitives: dense layers, pointwise activations, softmax
//! and layer normalization. Each forward has a matching `*_backward` that
//! returns exact gradients.

use crate::error::NnError;
use crate::tensor::Tensor2;

/// `y = x W + b` with `x: m x in`, `W: in x out`, `b: 1 x out`.
pub fn dense(x: &Tensor2, w: &Tensor2, b: &Tensor2) -> Result<Tensor2, NnError> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(NnError::Shape(format!(
            "dense bias {}x{} does not match weight {}x{}",
            b.rows(),
            b.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let mut y = x.matmul(w)?;
    y.add_row_broadcast(b)?;
    Ok(y)
}

/// Gradients of [`dense`].
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dx: Tensor2,
    pub dw: Tensor2,
    pub db: Tensor2,
}

pub fn dense_backward(x: &Tensor2, w: &Tensor2, dy: &Tensor2) -> Result<DenseGrads, NnError> {
    Ok(DenseGrads {
        dx: dy.matmul_t(w)?,
        dw: x.t_matmul(dy)?,
        db: dy.sum_rows(),
    })
}

/// Pointwise nonlinearities used by the model heads and blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    /// tanh approximation of GELU
    Gelu,
    Sigmoid,
    Softplus,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// Derivative at pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let inner = GELU_C * (x + GELU_A * x * x * x);
                let t = inner.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(x),
        }
    }

    pub fn forward(self, x: &Tensor2) -> Tensor2 {
        x.map(|v| self.apply(v))
    }

    /// `dy * f'(x)` given the pre-activation input.
    pub fn backward(self, x: &Tensor2, dy: &Tensor2) -> Result<Tensor2, NnError> {
        if !x.same_shape(dy) {
            return Err(NnError::Shape("activation backward".into()));
        }
        let mut out = dy.clone();
        for (o, xv) in out.data_mut().iter_mut().zip(x.data()) {
            *o *= self.derivative(*xv);
        }
        Ok(out)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Max-shifted softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax given its output `p`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, dpi)| pi * (dpi - dot)).collect()
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let p = softmax(x.row_slice(r));
        out.row_slice_mut(r).copy_from_slice(&p);
    }
    out
}

pub fn softmax_rows_backward(p: &Tensor2, dp: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(p.rows(), p.cols());
    for r in 0..p.rows() {
        let g = softmax_backward(p.row_slice(r), dp.row_slice(r));
        out.row_slice_mut(r).copy_from_slice(&g);
    }
    out
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Saved state for [`layer_norm_backward`].
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor2,
    inv_std: Vec<f64>,
}

/// Row-wise layer normalization with gain `g` and bias `b` (both `1 x cols`).
pub fn layer_norm(
    x: &Tensor2,
    g: &Tensor2,
    b: &Tensor2,
) -> Result<(Tensor2, LayerNormCache), NnError> {
    let n = x.cols();
    if g.shape() != (1, n) || b.shape() != (1, n) {
        return Err(NnError::Shape("layer_norm gain/bias".into()));
    }
    let mut normalized = Tensor2::zeros(x.rows(), n);
    let mut out = Tensor2::zeros(x.rows(), n);
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row_slice(r);
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        let nrow = normalized.row_slice_mut(r);
        for (o, v) in nrow.iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
        for c in 0..n {
            let xhat = normalized.get(r, c);
            out.set(r, c, g.data()[c] * xhat + b.data()[c]);
        }
    }
    Ok((
        out,
        LayerNormCache {
            normalized,
            inv_std,
        },
    ))
}

/// Gradients of [`layer_norm`]: `(dx, dg, db)`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    g: &Tensor2,
    dy: &Tensor2,
) -> (Tensor2, Tensor2, Tensor2) {
    let (rows, n) = dy.shape();
    let mut dx = Tensor2::zeros(rows, n);
    let mut dg = Tensor2::zeros(1, n);
    let mut db = Tensor2::zeros(1, n);
    let nf = n as f64;
    for r in 0..rows {
        let xhat = cache.normalized.row_slice(r);
        let dyr = dy.row_slice(r);
        let mut dxhat = vec![0.0; n];
        for c in 0..n {
            dxhat[c] = dyr[c] * g.data()[c];
            dg.data_mut()[c] += dyr[c] * xhat[c];
            db.data_mut()[c] += dyr[c];
        }
        let mean_d = dxhat.iter().sum::<f64>() / nf;
        let mean_dx = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / nf;
        let is = cache.inv_std[r];
        let out = dx.row_slice_mut(r);
        for c in 0..n {
            out[c] = is * (dxhat[c] - mean_d - xhat[c] * mean_dx);
        }
    }
    (dx, dg, db)
}
