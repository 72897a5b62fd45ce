mod common;

use common::*;
use hotpn::tensor::*;
use hotpn::{DenseTensor, FeatureSet};
use proptest::prelude::*;

#[test]
fn weighted_pool_matches_direct_loop() {
    let mut r = rng(1);
    let phi = gaussian_vectors(&mut r, 2, 4);
    let fs = FeatureSet::with_weights(phi.clone(), vec![2.0, 1.0]).unwrap();
    let t = pool(&fs, 3).unwrap();
    let oracle = naive_pool3(&phi, &[2.0, 1.0], &[0.0; 4]);
    assert!(max_abs_diff(t.data(), &oracle) < 1e-13);
}

#[test]
fn centered_pool_matches_direct_loop() {
    let mut r = rng(2);
    let phi = gaussian_vectors(&mut r, 7, 3);
    let fs = FeatureSet::new(phi.clone()).unwrap().centered();
    let mean: Vec<f64> = (0..3).map(|i| phi.iter().map(|v| v[i]).sum::<f64>() / 7.0).collect();
    let t = pool(&fs, 3).unwrap();
    assert!(max_abs_diff(t.data(), &naive_pool3(&phi, &[1.0; 7], &mean)) < 1e-13);
}

#[test]
fn norm_and_inner_match_elementwise_sums() {
    let mut r = rng(3);
    let a = DenseTensor::new(vec![2, 2, 2], gaussian_vec(&mut r, 8)).unwrap();
    let b = DenseTensor::new(vec![2, 2, 2], gaussian_vec(&mut r, 8)).unwrap();
    let ss: f64 = a.data().iter().map(|x| x * x).sum();
    assert!((frobenius_norm(&a) - ss.sqrt()).abs() < 1e-15);
    let dot: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    assert!((inner(&a, &b).unwrap() - dot).abs() < 1e-14);
    let c = DenseTensor::new(vec![2, 4], vec![0.0; 8]).unwrap();
    assert!(inner(&a, &c).is_err());
}

#[test]
fn mode_product_matches_triple_loop() {
    let mut r = rng(4);
    let d = 4;
    let t = DenseTensor::new(vec![d; 3], gaussian_vec(&mut r, d * d * d)).unwrap();
    let v = gaussian_vec(&mut r, d);
    for mode in 0..3 {
        let got = mode_product(&t, &v, mode).unwrap();
        assert_eq!(got.dims(), &[d, d]);
        assert!(max_abs_diff(got.data(), &naive_mode3(t.data(), d, &v, mode)) < 1e-13);
    }
    assert!(mode_product(&t, &v, 3).is_err());
    assert!(mode_product(&t, &v[..3], 0).is_err());
}

#[test]
fn basis_contraction_is_slice() {
    let mut r = rng(5);
    let d = 3;
    let t = DenseTensor::new(vec![d; 3], gaussian_vec(&mut r, 27)).unwrap();
    let e1 = [0.0, 1.0, 0.0];
    let s = mode_product(&t, &e1, 0).unwrap();
    for j in 0..d {
        for k in 0..d {
            assert_eq!(s.get(&[j, k]), t.get(&[1, j, k]));
        }
    }
}

#[test]
fn rank_one_self_contraction() {
    let x = [0.6, 0.0, 0.8];
    let t = outer_power(&x, 3).unwrap();
    let m = mode_product(&t, &x, 0).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((m.get(&[i, j]) - x[i] * x[j]).abs() < 1e-15);
        }
    }
}

#[test]
fn rank_one_unfolding() {
    let x = [1.0, -2.0, 0.5];
    let m = unfold(&outer_power(&x, 3).unwrap(), 0).unwrap();
    assert_eq!(m.shape(), (3, 9));
    // column c = j + 3k holds x_j x_k (earliest remaining mode fastest)
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                assert!((m[(i, j + 3 * k)] - x[i] * x[j] * x[k]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn outer_power_norm_of_unit_vector() {
    let mut r = rng(6);
    let x = unit_vec(&mut r, 5);
    for order in 1..=4 {
        assert!((frobenius_norm(&outer_power(&x, order).unwrap()) - 1.0).abs() < 1e-14);
    }
    let e1 = outer_power(&[1.0, 0.0], 3).unwrap();
    let e2 = outer_power(&[0.0, 1.0], 3).unwrap();
    assert_eq!(inner(&e1, &e2).unwrap(), 0.0);
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, d)
}

fn feature_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..5, 1usize..6).prop_flat_map(|(d, n)| {
        (
            proptest::collection::vec(vec_strategy(d), n),
            proptest::collection::vec(0.0f64..2.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pool_is_super_symmetric((phi, w) in feature_strategy(), order in 2usize..5) {
        let fs = FeatureSet::with_weights(phi, w).unwrap();
        let t = pool(&fs, order).unwrap();
        prop_assert!(t.is_super_symmetric());
        prop_assert!(t.super_symmetry_defect() <= 1e-12);
    }

    #[test]
    fn pool_is_permutation_invariant((phi, w) in feature_strategy(), order in 2usize..4, rot in 0usize..6) {
        let n = phi.len();
        let a = pool(&FeatureSet::with_weights(phi.clone(), w.clone()).unwrap(), order).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let phi2 = perm.iter().map(|&i| phi[i].clone()).collect();
        let w2 = perm.iter().map(|&i| w[i]).collect();
        let b = pool(&FeatureSet::with_weights(phi2, w2).unwrap(), order).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn kernel_linearization(x in vec_strategy(4), y in vec_strategy(4), order in 1usize..5) {
        let k = inner(&outer_power(&x, order).unwrap(), &outer_power(&y, order).unwrap()).unwrap();
        let expect = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().powi(order as i32);
        prop_assert!((k - expect).abs() <= 1e-10 * expect.abs().max(1e-300) + 1e-12);
    }

    #[test]
    fn norm_squared_is_self_inner(data in proptest::collection::vec(-5.0f64..5.0, 24)) {
        let t = DenseTensor::new(vec![2, 3, 4], data).unwrap();
        prop_assert_eq!(frobenius_norm(&t), inner(&t, &t).unwrap().sqrt());
    }

    #[test]
    fn unfold_refold_identity(data in proptest::collection::vec(-5.0f64..5.0, 24), mode in 0usize..3) {
        let t = DenseTensor::new(vec![2, 3, 4], data).unwrap();
        let back = refold(&unfold(&t, mode).unwrap(), t.dims(), mode).unwrap();
        prop_assert_eq!(back.data(), t.data());
    }

    #[test]
    fn mode_product_is_linear(data in proptest::collection::vec(-2.0f64..2.0, 27),
                              u in vec_strategy(3), v in vec_strategy(3), a in -2.0f64..2.0, mode in 0usize..3) {
        let t = DenseTensor::new(vec![3; 3], data).unwrap();
        let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        let lhs = mode_product(&t, &comb, mode).unwrap();
        let tu = mode_product(&t, &u, mode).unwrap();
        let tv = mode_product(&t, &v, mode).unwrap();
        for (k, &l) in lhs.data().iter().enumerate() {
            prop_assert!((l - (a * tu.data()[k] + tv.data()[k])).abs() < 1e-12);
        }
    }
}
