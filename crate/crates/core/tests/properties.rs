use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitonn::assignment::{assign, reconstruct, AssignmentScheme, SchemeKind};
use splitonn::codec::{coherent_decode, coherent_measure, encode_dc};
use splitonn::complex::{complex_mvm, deinterleave, interleave, realify, Detection};
use splitonn::data::permutation;
use splitonn::nn::loss::{argmax_rows, cross_entropy, softmax};
use splitonn::photonic::{compile_matrix, count_mzis, decompose_unitary};
use splitonn::sampling::{haar_unitary, random_complex};
use splitonn::{ComplexMatrix, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_box(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ComplexMatrix {
    let v = (0..m * n)
        .map(|_| C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
        .collect();
    ComplexMatrix::new(m, n, v).unwrap()
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realify_is_a_homomorphism(seed in any::<u64>(), m in 1usize..10, k in 1usize..10, n in 1usize..10) {
        let mut r = rng(seed);
        let w = unit_box(&mut r, m, k);
        let v = unit_box(&mut r, k, n);
        let lhs = realify(&w.matmul(&v).unwrap());
        let rhs = realify(&w).matmul(&realify(&v)).unwrap();
        prop_assert!(max_abs(lhs.as_array(), rhs.as_array()) < 1e-12);

        let x: Vec<C64> = (0..k).map(|_| C64::new(r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0))).collect();
        let a = realify(&w).mvm(&interleave(&x)).unwrap();
        let b = interleave(&complex_mvm(&w, &x).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        prop_assert_eq!(deinterleave(&interleave(&x)).unwrap(), x);
    }

    #[test]
    fn realified_blocks_are_rotation_scalings(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let w = unit_box(&mut rng(seed), m, n);
        let r = realify(&w);
        for i in 0..m {
            for j in 0..n {
                let z = w.get(i, j);
                prop_assert_eq!(r.get(2 * i, 2 * j), z.re);
                prop_assert_eq!(r.get(2 * i, 2 * j + 1), -z.im);
                prop_assert_eq!(r.get(2 * i + 1, 2 * j), z.im);
                prop_assert_eq!(r.get(2 * i + 1, 2 * j + 1), z.re);
            }
        }
    }

    #[test]
    fn detection_ignores_global_phase(re in -2.0f64..2.0, im in -2.0f64..2.0, alpha in 0.0f64..std::f64::consts::TAU) {
        let z = C64::new(re, im);
        let rotated = z * C64::from_polar(1.0, alpha);
        for det in [Detection::Intensity, Detection::Magnitude] {
            prop_assert!((det.apply(rotated) - det.apply(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn lossless_schemes_invert_exactly(seed in any::<u64>(), h2 in 1usize..6, w2 in 1usize..6, c in 1usize..5, horizontal in any::<bool>()) {
        let (h, w) = (2 * h2, 2 * w2);
        let mut r = rng(seed);
        let img = Array3::from_shape_fn((h, w, c), |_| f64::from(r.random::<u8>()) / 255.0);
        for kind in [SchemeKind::SpatialInterlace, SchemeKind::SpatialHalfHalf, SchemeKind::SpatialSymmetric, SchemeKind::ChannelLossless] {
            let scheme = AssignmentScheme::new(kind).with_horizontal_pairs(horizontal);
            let a = assign(img.view(), &scheme).unwrap();
            let expected = if kind == SchemeKind::ChannelLossless { h * w * c.div_ceil(2) } else { h * w * c / 2 };
            prop_assert_eq!(a.data.len(), expected);
            prop_assert_eq!(reconstruct(&a).unwrap(), img.clone());
        }
    }

    #[test]
    fn remapping_applies_its_matrix(seed in any::<u64>(), h in 1usize..5, w in 1usize..5) {
        let mut r = rng(seed);
        let img = Array3::from_shape_fn((h, w, 3), |_| r.random::<f64>());
        let scheme = AssignmentScheme::new(SchemeKind::ChannelRemapping);
        let m = *scheme.remap().unwrap();
        let a = assign(img.view(), &scheme).unwrap();
        for y in 0..h {
            for x in 0..w {
                let px = [img[[y, x, 0]], img[[y, x, 1]], img[[y, x, 2]]];
                let re: f64 = (0..3).map(|k| m[0][k] * px[k]).sum();
                let im: f64 = (0..3).map(|k| m[1][k] * px[k]).sum();
                prop_assert_eq!(a.data[[y, x, 0]], C64::new(re, im));
            }
        }
    }

    #[test]
    fn energy_is_conserved_through_unitary_meshes(seed in any::<u64>(), n in 2usize..24) {
        let mut r = rng(seed);
        let u = haar_unitary(&mut r, n);
        let mesh = decompose_unitary(&u).unwrap();
        prop_assert_eq!(mesh.mzi_count(), n * (n - 1) / 2);
        prop_assert!(mesh.to_matrix().unwrap().unitarity_deviation() < 1e-10);
        let x: Vec<C64> = (0..n).map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        let y = mesh.forward(&x).unwrap();
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((norm(&y) - norm(&x)).abs() < 1e-10);
    }

    #[test]
    fn compiled_layers_reproduce_their_matrix(seed in any::<u64>(), m in 1usize..40, n in 1usize..40, gain in 0.1f64..10.0) {
        let w = random_complex(&mut rng(seed), m, n).scale(gain);
        let layer = compile_matrix(&w).unwrap();
        let sim = layer.to_matrix().unwrap();
        let target = w.scale(1.0 / layer.global_scale);
        prop_assert!(sim.distance(&target) / target.frobenius_norm() < 1e-8);
        prop_assert!(layer.attenuators.iter().all(|a| (0.0..=1.0 + 1e-12).contains(a)));
    }

    #[test]
    fn square_counts_are_n_squared(n in 1usize..2000) {
        prop_assert_eq!(count_mzis(n, n), (n * (n - 1) + n) as u64);
    }

    #[test]
    fn coherent_receiver_inverts_the_encoder(a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0, reference in 0.1f64..4.0) {
        let z = encode_dc(a1, a2);
        let (i, ir, ij) = coherent_measure(z, reference);
        let back = coherent_decode(i, ir, ij, reference).unwrap();
        prop_assert!((back.re - a1).abs() < 1e-12 && (back.im - a2).abs() < 1e-12);
    }

    #[test]
    fn softmax_ignores_constant_shifts(seed in any::<u64>(), b in 1usize..6, c in 2usize..12, shift in -50.0f64..50.0) {
        let mut r = rng(seed);
        let l = Array2::from_shape_fn((b, c), |_| r.random_range(-5.0..5.0));
        let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..c)).collect();
        let s = &l + shift;
        prop_assert!(max_abs(&softmax(l.view(), 1.0), &softmax(s.view(), 1.0)) < 1e-12);
        let (la, _) = cross_entropy(l.view(), &labels).unwrap();
        let (lb, _) = cross_entropy(s.view(), &labels).unwrap();
        prop_assert!((la - lb).abs() < 1e-12);
        prop_assert_eq!(argmax_rows(l.view()), argmax_rows(s.view()));
    }

    #[test]
    fn permutations_depend_only_on_seed_and_length(seed in any::<u64>(), n in 0usize..500) {
        let p = permutation(seed, n);
        prop_assert_eq!(&p, &permutation(seed, n));
        let mut sorted = p.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
