use proptest::prelude::*;

use vw4c::nn::{
    conv2d, dropout2d, elu, group_norm, max_pool2d, transposed_conv2d, ConvGeometry, GROUP_NORM_EPS,
};
use vw4c::{Grid4D, ParamTensor, RngStream};

fn random_param(shape: &[usize], rng: &mut RngStream) -> ParamTensor {
    let n = shape.iter().product();
    ParamTensor::from_values(shape, (0..n).map(|_| rng.normal()).collect()).unwrap()
}

fn shapes() -> impl Strategy<Value = [usize; 4]> {
    (1usize..=2, 1usize..=4, 2usize..=8, 2usize..=8).prop_map(|(n, c, h, w)| [n, c, h, w])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_norm_standardizes_each_group(seed in any::<u64>(), groups in 1usize..=2, scale in 1e-1f64..1e3, shift in -1e3f64..1e3) {
        let mut rng = RngStream::new(seed);
        let c = 4;
        let x = Grid4D::random_normal([2, c, 4, 4], &mut rng).map(|v| v * scale + shift);
        let gamma = random_param(&[c], &mut rng);
        let beta = random_param(&[c], &mut rng);
        let (_, cache) = group_norm(&x, groups, &gamma, &beta, GROUP_NORM_EPS).unwrap();
        let len = c / groups * 16;
        for (raw, out) in x.as_slice().chunks(len).zip(cache.normalized.as_slice().chunks(len)) {
            let stats = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64)
            };
            let (_, raw_var) = stats(raw);
            let (m, var) = stats(out);
            prop_assert!(m.abs() < 1e-6, "mean {m}");
            // var/(var+eps) is within 1e-3 of 1 only above ~1000·eps
            if raw_var > 1000.0 * GROUP_NORM_EPS {
                prop_assert!((var - 1.0).abs() < 1e-3, "variance {var} for input variance {raw_var}");
            }
        }
    }

    #[test]
    fn conv_and_transposed_conv_are_adjoint(seed in any::<u64>(), cin in 1usize..=3, cout in 1usize..=3, hw in 1usize..=4) {
        let mut rng = RngStream::new(seed);
        let w = random_param(&[cout, cin, 2, 2], &mut rng);
        let zero_out = ParamTensor::zeros(&[cout]);
        let zero_in = ParamTensor::zeros(&[cin]);
        let g = ConvGeometry::new(2, 0);
        let x = Grid4D::random_normal([1, cin, 2 * hw, 2 * hw], &mut rng);
        let y = Grid4D::random_normal([1, cout, hw, hw], &mut rng);
        let lhs = conv2d(&x, &w, &zero_out, g).unwrap().dot(&y);
        let rhs = x.dot(&transposed_conv2d(&y, &w, &zero_in, g).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn dropout_zeroes_whole_planes(seed in any::<u64>(), shape in shapes(), rate in 0.05f64..0.95) {
        let mut rng = RngStream::new(seed);
        let x = Grid4D::random_normal(shape, &mut rng).map(|v| v.abs() + 0.1);
        let (y, _) = dropout2d(&x, rate, true, &mut rng).unwrap();
        let keep = 1.0 / (1.0 - rate);
        for n in 0..shape[0] {
            for c in 0..shape[1] {
                let (a, b) = (x.plane(n, c), y.plane(n, c));
                let dropped = b.iter().all(|&v| v == 0.0);
                let kept = a.iter().zip(b).all(|(p, q)| *q == p * keep);
                prop_assert!(dropped || kept);
            }
        }
    }

    #[test]
    fn forwards_are_pure(seed in any::<u64>(), shape in shapes()) {
        let mut rng = RngStream::new(seed);
        let x = Grid4D::random_normal(shape, &mut rng);
        let w = random_param(&[3, shape[1], 3, 3], &mut rng);
        let b = random_param(&[3], &mut rng);
        let g = ConvGeometry::new(1, 1);
        prop_assert_eq!(conv2d(&x, &w, &b, g).unwrap(), conv2d(&x, &w, &b, g).unwrap());
        prop_assert_eq!(elu(&x, 1.0), elu(&x, 1.0));
        let drop = |s| dropout2d(&x, 0.3, true, &mut RngStream::new(s)).unwrap().0;
        prop_assert_eq!(drop(seed), drop(seed));
        if shape[2] % 2 == 0 && shape[3] % 2 == 0 {
            prop_assert_eq!(max_pool2d(&x, 2).unwrap(), max_pool2d(&x, 2).unwrap());
        }
    }
}

#[test]
fn dropout_preserves_expectation() {
    let mut rng = RngStream::new(3);
    let x = Grid4D::filled([64, 64, 1, 1], 1.0);
    let rate = 0.2;
    let (y, _) = dropout2d(&x, rate, true, &mut rng).unwrap();
    let mean = y.as_slice().iter().sum::<f64>() / y.len() as f64;
    // survivor scale 1.25, Bernoulli(0.8) over 4096 planes: sd of the mean is 0.0078
    assert!((mean - 1.0).abs() < 0.04, "{mean}");
}
