//! Dense tensors used throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng::RngStream;

/// Rank-4 array in (batch, channel, row, column) row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid4D {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Grid4D {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(config_err!(
                "value count {} does not match shape {:?} ({} values)",
                data.len(),
                shape,
                n
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn random_normal(shape: [usize; 4], rng: &mut RngStream) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: (0..n).map(|_| rng.normal()).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Number of values in one (height, width) plane.
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(n, c, y, x);
        self.data[i] = v;
    }

    /// Contiguous (height, width) plane for sample `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let len = self.plane_len();
        let start = (n * self.shape[1] + c) * len;
        &self.data[start..start + len]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let len = self.plane_len();
        let start = (n * self.shape[1] + c) * len;
        &mut self.data[start..start + len]
    }

    /// All channels of sample `n`.
    pub fn sample(&self, n: usize) -> &[f64] {
        let len = self.shape[1] * self.plane_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.shape[1] * self.plane_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    /// Copies sample `n` into a new batch-of-one grid.
    pub fn select_sample(&self, n: usize) -> Grid4D {
        Grid4D {
            shape: [1, self.shape[1], self.shape[2], self.shape[3]],
            data: self.sample(n).to_vec(),
        }
    }

    /// Stacks batch-of-any grids along the batch axis.
    pub fn stack(parts: &[&Grid4D]) -> Result<Grid4D> {
        let first = parts
            .first()
            .ok_or_else(|| config_err!("cannot stack an empty list of grids"))?;
        let [_, c, h, w] = first.shape;
        let mut batch = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != [c, h, w] {
                return Err(config_err!(
                    "cannot stack grid of shape {:?} with {:?}",
                    p.shape,
                    first.shape
                ));
            }
            batch += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Grid4D {
            shape: [batch, c, h, w],
            data,
        })
    }

    /// Concatenates two grids along the channel axis.
    pub fn concat_channels(a: &Grid4D, b: &Grid4D) -> Result<Grid4D> {
        if a.shape[0] != b.shape[0] || a.shape[2..] != b.shape[2..] {
            return Err(config_err!(
                "channel concat needs matching batch/spatial dims, got {:?} and {:?}",
                a.shape,
                b.shape
            ));
        }
        let [n, ca, h, w] = a.shape;
        let cb = b.shape[1];
        let mut out = Grid4D::zeros([n, ca + cb, h, w]);
        for i in 0..n {
            let dst = out.sample_mut(i);
            dst[..ca * h * w].copy_from_slice(a.sample(i));
            dst[ca * h * w..].copy_from_slice(b.sample(i));
        }
        Ok(out)
    }

    /// Inverse of [`Grid4D::concat_channels`]: splits off the first `ca` channels.
    pub fn split_channels(&self, ca: usize) -> (Grid4D, Grid4D) {
        let [n, c, h, w] = self.shape;
        let cb = c - ca;
        let mut a = Grid4D::zeros([n, ca, h, w]);
        let mut b = Grid4D::zeros([n, cb, h, w]);
        for i in 0..n {
            let src = self.sample(i);
            a.sample_mut(i).copy_from_slice(&src[..ca * h * w]);
            b.sample_mut(i).copy_from_slice(&src[ca * h * w..]);
        }
        (a, b)
    }

    pub fn reshape(self, shape: [usize; 4]) -> Result<Grid4D> {
        Grid4D::from_vec(shape, self.data)
    }

    pub fn dot(&self, other: &Grid4D) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &Grid4D) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid4D {
        Grid4D {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Boolean companion of [`Grid4D`] (true = valid pixel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask4D {
    shape: [usize; 4],
    data: Vec<bool>,
}

impl Mask4D {
    pub fn filled(shape: [usize; 4], value: bool) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<bool>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(config_err!(
                "mask length {} does not match shape {:?}",
                data.len(),
                shape
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn plane(&self, n: usize, c: usize) -> &[bool] {
        let len = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * len;
        &self.data[start..start + len]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [bool] {
        let len = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * len;
        &mut self.data[start..start + len]
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn stack(parts: &[&Mask4D]) -> Result<Mask4D> {
        let first = parts
            .first()
            .ok_or_else(|| config_err!("cannot stack an empty list of masks"))?;
        let mut batch = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != first.shape[1..] {
                return Err(config_err!(
                    "cannot stack mask of shape {:?} with {:?}",
                    p.shape,
                    first.shape
                ));
            }
            batch += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let [_, c, h, w] = first.shape;
        Ok(Mask4D {
            shape: [batch, c, h, w],
            data,
        })
    }

    pub fn select_sample(&self, n: usize) -> Mask4D {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        Mask4D {
            shape: [1, self.shape[1], self.shape[2], self.shape[3]],
            data: self.data[n * len..(n + 1) * len].to_vec(),
        }
    }
}

/// A trainable parameter with its gradient buffer.
/// Equality compares shape and values; `grad` is scratch space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl PartialEq for ParamTensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.values == other.values
    }
}

impl ParamTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(config_err!(
                "parameter has {} values but shape {:?} needs {}",
                values.len(),
                shape,
                n
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    /// Zero-mean normal with std `sqrt(2 / fan_in)`.
    pub fn he_normal(shape: &[usize], fan_in: usize, rng: &mut RngStream) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: (0..n).map(|_| std * rng.normal()).collect(),
            grad: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.values.len(), 0.0);
    }

    /// Restores the grad-shape invariant after deserialization.
    pub(crate) fn ensure_grad(&mut self) {
        if self.grad.len() != self.values.len() {
            self.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_count() {
        assert!(Grid4D::from_vec([1, 2, 3, 4], vec![0.0; 23]).is_err());
        assert!(Grid4D::from_vec([1, 2, 3, 4], vec![0.0; 24]).is_ok());
    }

    #[test]
    fn concat_then_split_restores_parts() {
        let mut rng = RngStream::new(1);
        let a = Grid4D::random_normal([2, 3, 4, 5], &mut rng);
        let b = Grid4D::random_normal([2, 2, 4, 5], &mut rng);
        let c = Grid4D::concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), [2, 5, 4, 5]);
        assert_eq!(c.get(1, 3, 2, 1), b.get(1, 0, 2, 1));
        let (a2, b2) = c.split_channels(3);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn param_grad_tracks_values() {
        let p = ParamTensor::zeros(&[3, 4]);
        assert_eq!(p.grad.len(), p.values.len());
    }
}
