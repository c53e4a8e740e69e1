use crate::error::{config_err, Result};
use crate::tensor::Grid4D;

/// Non-overlapping max pooling. Returns the pooled map and, per output
/// cell, the flat input index of the first maximal element (row-major
/// within the window).
pub fn max_pool2d(x: &Grid4D, window: usize) -> Result<(Grid4D, Vec<usize>)> {
    let [n, c, h, w] = x.shape();
    if window == 0 || h % window != 0 || w % window != 0 {
        return Err(config_err!(
            "max pool window {window} does not divide spatial dims {h}x{w}"
        ));
    }
    let (ho, wo) = (h / window, w / window);
    let mut y = Grid4D::zeros([n, c, ho, wo]);
    let mut argmax = Vec::with_capacity(n * c * ho * wo);
    let src = x.as_slice();
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best_i = base + oy * window * w + ox * window;
                    let mut best = src[best_i];
                    for ky in 0..window {
                        for kx in 0..window {
                            let i = base + (oy * window + ky) * w + ox * window + kx;
                            if src[i] > best {
                                best = src[i];
                                best_i = i;
                            }
                        }
                    }
                    y.set(s, ch, oy, ox, best);
                    argmax.push(best_i);
                }
            }
        }
    }
    Ok((y, argmax))
}

/// Routes each upstream gradient to its window's recorded argmax.
pub fn max_pool2d_backward(input_shape: [usize; 4], argmax: &[usize], dy: &Grid4D) -> Grid4D {
    let mut dx = Grid4D::zeros(input_shape);
    let out = dx.as_mut_slice();
    for (&i, &g) in argmax.iter().zip(dy.as_slice()) {
        out[i] += g;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, random_probe};
    use crate::rng::RngStream;

    #[test]
    fn two_by_two_max() {
        let x = Grid4D::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = max_pool2d(&x, 2).unwrap();
        assert_eq!(y.as_slice(), &[4.0]);
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn constant_input_routes_to_first() {
        let x = Grid4D::filled([1, 2, 4, 4], 5.0);
        let (y, idx) = max_pool2d(&x, 2).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 5.0));
        assert_eq!(&idx[..4], &[0, 2, 8, 10]);
    }

    #[test]
    fn matches_windowed_max_oracle() {
        let mut rng = RngStream::new(30);
        let x = Grid4D::random_normal([1, 1, 4, 4], &mut rng);
        let (y, _) = max_pool2d(&x, 2).unwrap();
        for oy in 0..2 {
            for ox in 0..2 {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..2 {
                    for kx in 0..2 {
                        m = m.max(x.get(0, 0, 2 * oy + ky, 2 * ox + kx));
                    }
                }
                assert_eq!(y.get(0, 0, oy, ox), m);
            }
        }
    }

    #[test]
    fn indivisible_dims_rejected() {
        assert!(max_pool2d(&Grid4D::zeros([1, 1, 5, 4]), 2).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(31);
        let x = Grid4D::random_normal([2, 3, 4, 4], &mut rng);
        let (y, idx) = max_pool2d(&x, 2).unwrap();
        let probe = random_probe(y.shape(), &mut rng);
        let dx = max_pool2d_backward(x.shape(), &idx, &probe);
        let err = grad_check(
            |v| {
                max_pool2d(&Grid4D::from_vec(x.shape(), v.to_vec()).unwrap(), 2)
                    .unwrap()
                    .0
                    .dot(&probe)
            },
            x.as_slice(),
            dx.as_slice(),
            1e-6,
        );
        assert!(err < 1e-6, "{err}");
    }
}
