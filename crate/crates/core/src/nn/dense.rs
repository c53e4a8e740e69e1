use crate::error::{config_err, Result};
use crate::nn::gemm::gemm;
use crate::tensor::ParamTensor;

fn dims(w: &ParamTensor, b: &ParamTensor) -> Result<(usize, usize)> {
    let (m, n) = match w.shape.as_slice() {
        &[m, n] => (m, n),
        other => return Err(config_err!("dense weight must be rank 2, got {other:?}")),
    };
    if b.len() != m {
        return Err(config_err!("dense bias length {} does not match {m} outputs", b.len()));
    }
    Ok((m, n))
}

/// Fully-connected layer `w · x + b` for a single vector.
pub fn dense(x: &[f64], w: &ParamTensor, b: &ParamTensor) -> Result<Vec<f64>> {
    dense_batch(x, 1, w, b)
}

/// Applies the layer to `batch` row vectors stored contiguously in `x`.
pub fn dense_batch(x: &[f64], batch: usize, w: &ParamTensor, b: &ParamTensor) -> Result<Vec<f64>> {
    let (m, n) = dims(w, b)?;
    if x.len() != batch * n {
        return Err(config_err!(
            "dense input has {} values, expected {batch} x {n}",
            x.len()
        ));
    }
    let mut y: Vec<f64> = (0..batch).flat_map(|_| b.values.iter().copied()).collect();
    gemm(batch, n, m, x, false, &w.values, true, 1.0, &mut y);
    Ok(y)
}

/// Backward pass of [`dense_batch`]; returns the input gradient.
pub fn dense_batch_backward(
    x: &[f64],
    batch: usize,
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    dy: &[f64],
) -> Result<Vec<f64>> {
    let (m, n) = dims(w, b)?;
    if dy.len() != batch * m || x.len() != batch * n {
        return Err(config_err!("dense backward received mismatched buffers"));
    }
    w.ensure_grad();
    b.ensure_grad();
    for row in dy.chunks(m) {
        for (g, d) in b.grad.iter_mut().zip(row) {
            *g += d;
        }
    }
    gemm(m, batch, n, dy, true, x, false, 1.0, &mut w.grad);
    let mut dx = vec![0.0; batch * n];
    gemm(batch, m, n, dy, false, &w.values, false, 0.0, &mut dx);
    Ok(dx)
}
