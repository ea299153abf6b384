use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{mutual_train, train, MutualMode, TrainConfig};
use super::*;
use crate::assignment::AssignmentScheme;
use crate::complex::{interleave, realify, ComplexMatrix};
use crate::model::{Architecture, LayerSpec};

fn spec(input: (usize, usize, usize), classes: usize, layers: Vec<LayerSpec>, flavor: Flavor, decoder: DecoderKind) -> ModelSpec {
    let arch = Architecture {
        name: "micro".into(),
        input,
        classes,
        layers,
    };
    let scheme = (flavor == Flavor::Scvnn).then(|| AssignmentScheme::new(crate::model::default_scheme(&arch)));
    ModelSpec {
        arch,
        flavor,
        scheme,
        decoder,
        activation: Activation::default(),
        detection: Detection::default(),
        reference_amplitude: 1.0,
    }
}

fn conv_micro(flavor: Flavor, decoder: DecoderKind) -> ModelSpec {
    spec(
        (6, 6, 2),
        4,
        vec![
            LayerSpec::Conv { out_channels: 4, kernel: 3, stride: 1, pad: 1 },
            LayerSpec::MaxPool { size: 2 },
            LayerSpec::Conv { out_channels: 2, kernel: 2, stride: 1, pad: 0 },
            LayerSpec::Flatten,
            LayerSpec::Dense { out: 6 },
            LayerSpec::Dense { out: 4 },
        ],
        flavor,
        decoder,
    )
}

fn random_images(rng: &mut ChaCha8Rng, n: usize, (h, w, c): (usize, usize, usize)) -> Vec<Array3<f64>> {
    (0..n).map(|_| Array3::from_shape_simple_fn((h, w, c), || rng.random::<f64>())).collect()
}

fn encode(spec: &ModelSpec, imgs: &[Array3<f64>]) -> FieldMap {
    let views: Vec<_> = imgs.iter().map(|i| i.view()).collect();
    encode_images(spec, &views).unwrap()
}

/// Central differences on every parameter entry (real and imaginary part).
fn check_gradients(net: &mut Network, x: &FieldMap, labels: &[usize], teacher: Option<(&Array2<f64>, f64, f64)>) {
    let analytic = net.loss_and_grad(x, labels, teacher).unwrap().grads;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for p in 0..net.params.len() {
        let real_only = net.params[p].real_only;
        let entries: Vec<_> = net.params[p].value.indexed_iter().map(|(i, _)| i).collect();
        for idx in entries {
            for part in 0..if real_only { 1 } else { 2 } {
                let delta = if part == 0 { C64::new(h, 0.0) } else { C64::new(0.0, h) };
                net.params[p].value[idx] += delta;
                let up = net.loss_and_grad(x, labels, teacher).unwrap().loss;
                net.params[p].value[idx] -= delta * 2.0;
                let down = net.loss_and_grad(x, labels, teacher).unwrap().loss;
                net.params[p].value[idx] += delta;
                let fd = (up - down) / (2.0 * h);
                let an = if part == 0 { analytic[p][idx].re } else { analytic[p][idx].im };
                let scale = fd.abs().max(an.abs());
                let err = if scale > 1e-4 { (fd - an).abs() / scale } else { (fd - an).abs() };
                assert!(err < 1e-5, "{} {:?} part {part}: fd {fd} analytic {an}", net.params[p].name, idx);
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-5);
}

#[test]
fn gradients_conv_pool_dense_intensity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for flavor in [Flavor::Cvnn, Flavor::Scvnn, Flavor::Rvnn] {
        let s = conv_micro(flavor, DecoderKind::Merge);
        let mut net = Network::new(s.clone(), &mut rng).unwrap();
        let x = encode(&s, &random_images(&mut rng, 3, s.arch.input));
        check_gradients(&mut net, &x, &[0, 3, 1], None);
    }
}

#[test]
fn gradients_decoders_and_kd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for decoder in [DecoderKind::Linear, DecoderKind::Unitary, DecoderKind::Coherent] {
        let s = conv_micro(Flavor::Scvnn, decoder);
        let mut net = Network::new(s.clone(), &mut rng).unwrap();
        let x = encode(&s, &random_images(&mut rng, 2, s.arch.input));
        let teacher = Array2::from_shape_fn((2, 4), |(b, j)| (b as f64 - j as f64) * 0.3);
        check_gradients(&mut net, &x, &[2, 1], Some((&teacher, 0.7, 2.0)));
    }
}

#[test]
fn gradients_modrelu_and_magnitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = spec(
        (4, 2, 1),
        3,
        vec![LayerSpec::Dense { out: 6 }, LayerSpec::Dense { out: 4 }, LayerSpec::Dense { out: 3 }],
        Flavor::Cvnn,
        DecoderKind::Merge,
    );
    s.activation = Activation::ModRelu { bias: -0.1 };
    s.detection = Detection::Magnitude;
    let mut net = Network::new(s.clone(), &mut rng).unwrap();
    let x = encode(&s, &random_images(&mut rng, 4, s.arch.input));
    check_gradients(&mut net, &x, &[0, 1, 2, 0], None);
}

#[test]
fn complex_forward_matches_realified_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = spec(
        (6, 4, 1),
        4,
        vec![LayerSpec::Dense { out: 10 }, LayerSpec::Dense { out: 4 }],
        Flavor::Scvnn,
        DecoderKind::Merge,
    );
    let net = Network::new(s.clone(), &mut rng).unwrap();
    let imgs = random_images(&mut rng, 5, s.arch.input);
    let x = encode(&s, &imgs);
    let logits = net.forward(&x).unwrap();
    let w: Vec<_> = net
        .weight_matrices()
        .into_iter()
        .map(|(_, m)| realify(&ComplexMatrix::from_array(m.clone()).unwrap()))
        .collect();
    let flat = x.flattened();
    for b in 0..5 {
        let col: Vec<C64> = flat.column(b).to_vec();
        let h = w[0].mvm(&interleave(&col)).unwrap();
        let h: Vec<f64> = h.into_iter().map(|v| v.max(0.0)).collect();
        let out = w[1].mvm(&h).unwrap();
        for j in 0..4 {
            let expected = out[2 * j].powi(2) + out[2 * j + 1].powi(2);
            assert!((logits[[b, j]] - expected).abs() < 1e-10);
        }
    }
}

fn direct_conv(x: &Array3<C64>, k: &Array4<C64>, stride: usize, pad: usize) -> Array3<C64> {
    // x: C x H x W, k: O x C x K x K
    let (c, h, w) = x.dim();
    let (o, _, kk, _) = k.dim();
    let oh = (h + 2 * pad - kk) / stride + 1;
    let ow = (w + 2 * pad - kk) / stride + 1;
    Array3::from_shape_fn((o, oh, ow), |(oc, y, xx)| {
        let mut acc = ZERO;
        for ic in 0..c {
            for ky in 0..kk {
                for kx in 0..kk {
                    let iy = (y * stride + ky) as isize - pad as isize;
                    let ix = (xx * stride + kx) as isize - pad as isize;
                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                        acc += k[[oc, ic, ky, kx]] * x[[ic, iy as usize, ix as usize]];
                    }
                }
            }
        }
        acc
    })
}

#[test]
fn conv_as_gemm_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut c = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for &(ci, co, h, w, k, stride, pad) in &[(2, 3, 7, 6, 3, 1, 1), (3, 2, 8, 8, 5, 2, 2), (1, 1, 5, 5, 1, 1, 0)] {
        let batch = 2;
        let xs: Vec<Array3<C64>> = (0..batch).map(|_| Array3::from_shape_simple_fn((ci, h, w), &mut c)).collect();
        let kern = Array4::from_shape_simple_fn((co, ci, k, k), &mut c);
        let mut data = Array2::zeros((ci, batch * h * w));
        for (b, x) in xs.iter().enumerate() {
            for ((ch, y, xx), &v) in x.indexed_iter() {
                data[[ch, (b * h + y) * w + xx]] = v;
            }
        }
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        let cols = im2col(&data, ci, (h, w), k, stride, pad, (oh, ow), batch);
        let wmat = kern.clone().into_shape_with_order((co, ci * k * k)).unwrap();
        let out = wmat.dot(&cols);
        for (b, x) in xs.iter().enumerate() {
            let d = direct_conv(x, &kern, stride, pad);
            for ((oc, y, xx), &v) in d.indexed_iter() {
                assert!((out[[oc, (b * oh + y) * ow + xx]] - v).norm() < 1e-10);
            }
        }
        // col2im is the adjoint of im2col: <im2col(x), y> = <x, col2im(y)>
        let y = Array2::from_shape_simple_fn(cols.raw_dim(), &mut c);
        let back = col2im(&y, ci, (h, w), k, stride, pad, (oh, ow), batch);
        let lhs: C64 = cols.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let rhs: C64 = data.iter().zip(&back).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-10);
    }
}

#[test]
fn conv_impulse_and_identity() {
    let ones = Array2::from_elem((1, 9), C64::new(1.0, 0.0));
    let mut img = Array2::zeros((1, 25));
    img[[0, 12]] = C64::new(1.0, 0.0);
    let cols = im2col(&img, 1, (5, 5), 3, 1, 1, (5, 5), 1);
    let out = ones.dot(&cols);
    for y in 0..5 {
        for x in 0..5 {
            let inside = (1..=3).contains(&y) && (1..=3).contains(&x);
            assert_eq!(out[[0, y * 5 + x]].re, if inside { 1.0 } else { 0.0 });
        }
    }
    let id = Array2::from_diag_elem(2, C64::new(1.0, 0.0));
    let x = Array2::from_shape_fn((2, 8), |(c, i)| C64::new(c as f64, i as f64));
    assert_eq!(id.dot(&im2col(&x, 2, (2, 4), 1, 1, 0, (2, 4), 1)), x);
}

#[test]
fn zero_input_gives_uniform_softmax() {
    let s = conv_micro(Flavor::Cvnn, DecoderKind::Merge);
    let net = Network::new(s.clone(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let x = encode(&s, &[Array3::zeros(s.arch.input)]);
    assert!(net.fields(&x).unwrap().iter().all(|z| *z == ZERO));
    let p = loss::softmax(net.forward(&x).unwrap().view(), 1.0);
    assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn residual_models_are_count_only() {
    let s = crate::model::zoo("resnet20", Flavor::Cvnn, DecoderKind::Merge).unwrap();
    assert!(matches!(Network::new(s, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Config(_))));
}

/// Two separable classes: bright top half versus bright bottom half.
fn toy_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let pixels = Array4::from_shape_fn((n, 4, 2, 1), |(i, y, _, _)| {
        let bright = (y < 2) == (labels[i] == 0);
        let base: f64 = if bright { 0.8 } else { 0.1 };
        ((base + rng.random_range(-0.1..0.1)) * 255.0).round() as u8
    });
    Dataset::new(pixels, labels, 2, "toy", "train").unwrap()
}

fn toy_spec(flavor: Flavor) -> ModelSpec {
    spec((4, 2, 1), 2, vec![LayerSpec::Dense { out: 8 }, LayerSpec::Dense { out: 2 }], flavor, DecoderKind::Merge)
}

#[test]
fn toy_set_is_learned() {
    let data = toy_dataset(20, 7);
    let s = toy_spec(Flavor::Scvnn);
    let mut net = Network::new(s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let cfg = TrainConfig { epochs: 200, batch_size: 4, lr: 0.01, ..Default::default() };
    let hist = train(&mut net, &data, Some(&data), &cfg).unwrap();
    assert_eq!(hist.records.len(), 200);
    assert_eq!(hist.last_eval_accuracy(), Some(1.0));
}

#[test]
fn zero_learning_rate_freezes_everything() {
    let data = toy_dataset(12, 8);
    let mut net = Network::new(toy_spec(Flavor::Cvnn), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let before = net.clone();
    let cfg = TrainConfig { epochs: 3, batch_size: 12, lr: 0.0, ..Default::default() };
    let hist = train(&mut net, &data, None, &cfg).unwrap();
    assert_eq!(net, before);
    // one full-batch step per epoch; only the summation order changes
    assert!(hist.records.windows(2).all(|w| (w[0].loss - w[1].loss).abs() < 1e-12));
}

#[test]
fn training_is_deterministic() {
    let data = toy_dataset(16, 9);
    let cfg = TrainConfig { epochs: 4, batch_size: 5, lr: 0.01, seed: 3, ..Default::default() };
    let run = || {
        let mut net = Network::new(toy_spec(Flavor::Scvnn), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let h = train(&mut net, &data, Some(&data), &cfg).unwrap();
        (net, h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn mutual_learning_without_coupling_equals_independent_runs() {
    let data = toy_dataset(18, 10);
    let cfg = TrainConfig { epochs: 3, batch_size: 4, lr: 0.01, seed: 5, alpha: 0.0, ..Default::default() };
    let fresh = |flavor, seed| Network::new(toy_spec(flavor), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let (mut s, mut t) = (fresh(Flavor::Scvnn, 1), fresh(Flavor::Cvnn, 2));
    let (hs, ht) = mutual_train(&mut s, &mut t, &data, None, &cfg, MutualMode::Mutual).unwrap();
    let (mut s2, mut t2) = (fresh(Flavor::Scvnn, 1), fresh(Flavor::Cvnn, 2));
    assert_eq!(train(&mut s2, &data, None, &cfg).unwrap(), hs);
    assert_eq!(train(&mut t2, &data, None, &cfg).unwrap(), ht);
    assert_eq!(s, s2);
    assert_eq!(t, t2);
}

#[test]
fn frozen_teacher_distillation_reduces_kd() {
    let data = toy_dataset(40, 11);
    let mut teacher = Network::new(toy_spec(Flavor::Cvnn), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let pre = TrainConfig { epochs: 100, batch_size: 8, lr: 0.01, ..Default::default() };
    train(&mut teacher, &data, None, &pre).unwrap();
    let frozen = teacher.clone();
    let mut student = Network::new(toy_spec(Flavor::Scvnn), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let cfg = TrainConfig { epochs: 6, batch_size: 8, lr: 0.01, alpha: 5.0, ..Default::default() };
    let (hs, _) = mutual_train(&mut student, &mut teacher, &data, None, &cfg, MutualMode::FrozenTeacher).unwrap();
    assert_eq!(teacher, frozen);
    assert!(hs.records.windows(2).all(|w| w[1].kd < w[0].kd), "{:?}", hs.records.iter().map(|r| r.kd).collect::<Vec<_>>());
}

#[test]
fn divergence_is_reported() {
    let data = toy_dataset(8, 12);
    let linear = spec((4, 2, 1), 2, vec![LayerSpec::Dense { out: 2 }], Flavor::Cvnn, DecoderKind::Merge);
    let mut net = Network::new(linear, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        batch_size: 8,
        lr: 1e6,
        optimizer: super::optim::OptimizerKind::Sgd { momentum: 0.9 },
        ..Default::default()
    };
    assert!(matches!(train(&mut net, &data, None, &cfg), Err(Error::Divergence { .. })));
}

#[test]
fn unitary_head_stays_unitary() {
    let s = conv_micro(Flavor::Cvnn, DecoderKind::Unitary);
    let net = Network::new(s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let layer = net.resolved().layers.len() - 1;
    let mesh = net.unitary_mesh(layer).unwrap();
    assert_eq!(mesh.mzi_count(), 6);
    assert!(mesh.to_matrix().unwrap().unitarity_deviation() < 1e-12);
}

