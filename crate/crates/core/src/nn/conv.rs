//! 2D convolution and its transpose, lowered to GEMM through im2col.
//!
//! Weights use the `[k_out, k_in, kh, kw]` layout for `conv2d`. The
//! transposed convolution reads the same array as `[c_in, c_out, kh, kw]`,
//! which makes it the exact adjoint of `conv2d` under shared weights.

use crate::error::{config_err, Result};
use crate::nn::gemm::gemm;
use crate::tensor::{Grid4D, ParamTensor};

/// Stride and zero padding shared by both convolution directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub const fn new(stride: usize, padding: usize) -> Self {
        Self { stride, padding }
    }
}

fn kernel_dims(w: &ParamTensor) -> Result<[usize; 4]> {
    match w.shape.as_slice() {
        &[a, b, c, d] => Ok([a, b, c, d]),
        other => Err(config_err!("convolution kernel must be rank 4, got shape {other:?}")),
    }
}

fn conv_out_len(input: usize, kernel: usize, g: ConvGeometry, axis: &str) -> Result<usize> {
    if g.stride == 0 {
        return Err(config_err!("convolution stride must be at least 1"));
    }
    let padded = input + 2 * g.padding;
    if padded < kernel {
        return Err(config_err!(
            "kernel {axis} {kernel} does not fit padded input {axis} {padded}"
        ));
    }
    Ok((padded - kernel) / g.stride + 1)
}

/// Unrolls one sample `(c, h, w)` into a `(c·kh·kw) × (ho·wo)` matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    g: ConvGeometry,
    ho: usize,
    wo: usize,
    cols: &mut [f64],
) {
    let p = ho * wo;
    let pad = g.padding as isize;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[((ci * kh + ky) * kw + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    let out_row = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        *o = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back onto a zeroed `(c, h, w)` map.
#[allow(clippy::too_many_arguments)]
fn col2im(
    cols: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    g: ConvGeometry,
    ho: usize,
    wo: usize,
    x: &mut [f64],
) {
    let p = ho * wo;
    let pad = g.padding as isize;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &cols[((ci * kh + ky) * kw + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

fn check_bias(b: &ParamTensor, channels: usize) -> Result<()> {
    if b.len() != channels {
        return Err(config_err!(
            "bias length {} does not match output channels {}",
            b.len(),
            channels
        ));
    }
    Ok(())
}

/// Output shape of [`conv2d`], validating every dimension.
pub fn conv2d_output_shape(x: [usize; 4], w: &ParamTensor, g: ConvGeometry) -> Result<[usize; 4]> {
    let [k_out, k_in, kh, kw] = kernel_dims(w)?;
    if x[1] != k_in {
        return Err(config_err!(
            "input channels {} do not match kernel input channels {}",
            x[1],
            k_in
        ));
    }
    let ho = conv_out_len(x[2], kh, g, "height")?;
    let wo = conv_out_len(x[3], kw, g, "width")?;
    Ok([x[0], k_out, ho, wo])
}

pub fn conv2d(x: &Grid4D, w: &ParamTensor, b: &ParamTensor, g: ConvGeometry) -> Result<Grid4D> {
    let out_shape = conv2d_output_shape(x.shape(), w, g)?;
    let [n, k_out, ho, wo] = out_shape;
    check_bias(b, k_out)?;
    let [_, k_in, kh, kw] = kernel_dims(w)?;
    let (h, wd) = (x.height(), x.width());
    let k = k_in * kh * kw;
    let p = ho * wo;
    let mut cols = vec![0.0; k * p];
    let mut y = Grid4D::zeros(out_shape);
    for s in 0..n {
        im2col(x.sample(s), k_in, h, wd, kh, kw, g, ho, wo, &mut cols);
        let out = y.sample_mut(s);
        for (oc, plane) in out.chunks_mut(p).enumerate() {
            plane.fill(b.values[oc]);
        }
        gemm(k_out, k, p, &w.values, false, &cols, false, 1.0, out);
    }
    Ok(y)
}

/// Backward pass of [`conv2d`]. Accumulates into `w.grad` and `b.grad` and
/// returns the gradient with respect to `x`.
pub fn conv2d_backward(
    x: &Grid4D,
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    dy: &Grid4D,
    g: ConvGeometry,
) -> Result<Grid4D> {
    let out_shape = conv2d_output_shape(x.shape(), w, g)?;
    if dy.shape() != out_shape {
        return Err(config_err!(
            "upstream gradient shape {:?} does not match conv output {:?}",
            dy.shape(),
            out_shape
        ));
    }
    w.ensure_grad();
    b.ensure_grad();
    let [n, k_out, ho, wo] = out_shape;
    let [_, k_in, kh, kw] = kernel_dims(w)?;
    let (h, wd) = (x.height(), x.width());
    let k = k_in * kh * kw;
    let p = ho * wo;
    let mut cols = vec![0.0; k * p];
    let mut dcols = vec![0.0; k * p];
    let mut dx = Grid4D::zeros(x.shape());
    for s in 0..n {
        let dys = dy.sample(s);
        for (oc, plane) in dys.chunks(p).enumerate() {
            b.grad[oc] += plane.iter().sum::<f64>();
        }
        im2col(x.sample(s), k_in, h, wd, kh, kw, g, ho, wo, &mut cols);
        gemm(k_out, p, k, dys, false, &cols, true, 1.0, &mut w.grad);
        gemm(k, k_out, p, &w.values, true, dys, false, 0.0, &mut dcols);
        col2im(&dcols, k_in, h, wd, kh, kw, g, ho, wo, dx.sample_mut(s));
    }
    Ok(dx)
}

/// Output shape of [`transposed_conv2d`].
pub fn transposed_conv2d_output_shape(
    x: [usize; 4],
    w: &ParamTensor,
    g: ConvGeometry,
) -> Result<[usize; 4]> {
    let [c_in, c_out, kh, kw] = kernel_dims(w)?;
    if x[1] != c_in {
        return Err(config_err!(
            "input channels {} do not match transposed kernel input channels {}",
            x[1],
            c_in
        ));
    }
    if g.stride == 0 {
        return Err(config_err!("convolution stride must be at least 1"));
    }
    let grow = |len: usize, k: usize, axis: &str| -> Result<usize> {
        let full = (len.max(1) - 1) * g.stride + k;
        full.checked_sub(2 * g.padding)
            .filter(|&v| v > 0)
            .ok_or_else(|| config_err!("padding {} too large for transposed {axis}", g.padding))
    };
    Ok([x[0], c_out, grow(x[2], kh, "height")?, grow(x[3], kw, "width")?])
}

pub fn transposed_conv2d(
    x: &Grid4D,
    w: &ParamTensor,
    b: &ParamTensor,
    g: ConvGeometry,
) -> Result<Grid4D> {
    let out_shape = transposed_conv2d_output_shape(x.shape(), w, g)?;
    let [n, c_out, ho, wo] = out_shape;
    check_bias(b, c_out)?;
    let [c_in, _, kh, kw] = kernel_dims(w)?;
    let p = x.plane_len();
    let k = c_out * kh * kw;
    let mut cols = vec![0.0; k * p];
    let mut y = Grid4D::zeros(out_shape);
    for s in 0..n {
        gemm(k, c_in, p, &w.values, true, x.sample(s), false, 0.0, &mut cols);
        let out = y.sample_mut(s);
        col2im(&cols, c_out, ho, wo, kh, kw, g, x.height(), x.width(), out);
        for (oc, plane) in out.chunks_mut(ho * wo).enumerate() {
            plane.iter_mut().for_each(|v| *v += b.values[oc]);
        }
    }
    Ok(y)
}

/// Backward pass of [`transposed_conv2d`]; accumulates parameter gradients.
pub fn transposed_conv2d_backward(
    x: &Grid4D,
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    dy: &Grid4D,
    g: ConvGeometry,
) -> Result<Grid4D> {
    let out_shape = transposed_conv2d_output_shape(x.shape(), w, g)?;
    if dy.shape() != out_shape {
        return Err(config_err!(
            "upstream gradient shape {:?} does not match transposed conv output {:?}",
            dy.shape(),
            out_shape
        ));
    }
    w.ensure_grad();
    b.ensure_grad();
    let [n, c_out, ho, wo] = out_shape;
    let [c_in, _, kh, kw] = kernel_dims(w)?;
    let p = x.plane_len();
    let k = c_out * kh * kw;
    let mut cols = vec![0.0; k * p];
    let mut dx = Grid4D::zeros(x.shape());
    for s in 0..n {
        let dys = dy.sample(s);
        for (oc, plane) in dys.chunks(ho * wo).enumerate() {
            b.grad[oc] += plane.iter().sum::<f64>();
        }
        im2col(dys, c_out, ho, wo, kh, kw, g, x.height(), x.width(), &mut cols);
        gemm(c_in, k, p, &w.values, false, &cols, false, 0.0, dx.sample_mut(s));
        gemm(c_in, p, k, x.sample(s), false, &cols, true, 1.0, &mut w.grad);
    }
    Ok(dx)
}
