use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use hierdoc::neural::layers::ValueShape;
use hierdoc::neural::{
    softmax_cross_entropy, ActivationFn, Adam, ForwardCtx, Layer, LayerSpec, Network, Param, SeqBatch, Tensor, Value,
};
use hierdoc::rng::RngStreams;

fn seq(b: usize, t: usize, c: usize, data: Vec<f64>) -> Value<f64> {
    Value::Seq(SeqBatch::new(Tensor::from_vec(&[b, t, c], data).unwrap(), vec![t; b]).unwrap())
}

fn eval(net: &Network<f64>, x: &Value<f64>) -> Vec<f64> {
    net.forward(x, &mut ForwardCtx::eval()).unwrap().0.into_tensor().into_data()
}

#[test]
fn dense_identity_and_relu() {
    let mut net = Network::<f64>::new(2, vec![LayerSpec::MeanPool, LayerSpec::Dense { units: 2, activation: ActivationFn::Linear }], 0).unwrap();
    let Layer::Dense(d) = &mut net.layers_mut()[1] else { panic!("dense layer expected") };
    d.weight.value.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    d.bias.value.fill(0.0);
    assert_eq!(eval(&net, &seq(1, 1, 2, vec![1.0, 2.0])), vec![1.0, 2.0]);

    let relu = Network::<f64>::new(2, vec![LayerSpec::Relu], 0).unwrap();
    assert_eq!(eval(&relu, &seq(1, 1, 2, vec![-1.0, 3.0])), vec![0.0, 3.0]);
}

#[test]
fn conv_hand_examples() {
    let mut net = Network::<f64>::new(1, vec![LayerSpec::Conv1d { filters: 1, kernel_size: 3 }], 0).unwrap();
    let Layer::Conv1d(c) = &mut net.layers_mut()[0] else { panic!("conv layer expected") };
    c.kernel.value.fill(1.0);
    c.bias.value.fill(0.0);
    assert_eq!(eval(&net, &seq(1, 3, 1, vec![0.0, 1.0, 0.0])), vec![1.0, 1.0, 1.0]);

    let mut net = Network::<f64>::new(3, vec![LayerSpec::Conv1d { filters: 3, kernel_size: 1 }], 0).unwrap();
    let Layer::Conv1d(c) = &mut net.layers_mut()[0] else { panic!("conv layer expected") };
    c.kernel.value.fill(0.0);
    for i in 0..3 {
        c.kernel.value.data_mut()[i * 3 + i] = 1.0;
    }
    c.bias.value.fill(0.0);
    let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
    assert_eq!(eval(&net, &seq(1, 4, 3, data.clone())), data);
}

#[test]
fn bilstm_zero_weights_give_zero_output() {
    let mut net = Network::<f64>::new(4, vec![LayerSpec::Bilstm { units: 3, return_sequences: true }], 1).unwrap();
    for p in net.params_mut() {
        p.value.fill(0.0);
    }
    let mut rng = RngStreams::new(0).stream("t");
    let data: Vec<f64> = (0..2 * 5 * 4).map(|_| StandardNormal.sample(&mut rng)).collect();
    assert!(eval(&net, &seq(2, 5, 4, data)).iter().all(|&v| v == 0.0));
}

#[test]
fn bilstm_directions_mirror_each_other() {
    let (t, c, u) = (6, 3, 4);
    let mut net = Network::<f64>::new(c, vec![LayerSpec::Bilstm { units: u, return_sequences: true }], 2).unwrap();
    let Layer::BiLstm(l) = &mut net.layers_mut()[0] else { panic!("bilstm layer expected") };
    l.backward = l.forward.clone();
    let mut rng = RngStreams::new(3).stream("t");
    let data: Vec<f64> = (0..t * c).map(|_| StandardNormal.sample(&mut rng)).collect();
    let reversed: Vec<f64> = data.chunks(c).rev().flatten().copied().collect();
    let y = eval(&net, &seq(1, t, c, data));
    let yr = eval(&net, &seq(1, t, c, reversed));
    for s in 0..t {
        let fwd_rev = &yr[s * 2 * u..s * 2 * u + u];
        let bwd = &y[(t - 1 - s) * 2 * u + u..(t - s) * 2 * u];
        for (a, b) in fwd_rev.iter().zip(bwd) {
            assert!((a - b).abs() < 1e-12, "step {s}: {a} vs {b}");
        }
    }
}

#[test]
fn pool_examples() {
    let net = Network::<f64>::new(1, vec![LayerSpec::Maxpool1d { pool_size: 2 }], 0).unwrap();
    assert_eq!(eval(&net, &seq(1, 4, 1, vec![1.0, 5.0, 2.0, 3.0])), vec![5.0, 3.0]);
    let net = Network::<f64>::new(2, vec![LayerSpec::GlobalMaxpool], 0).unwrap();
    assert_eq!(eval(&net, &seq(1, 3, 2, vec![1.0, 9.0, 4.0, 2.0, 3.0, 3.0])), vec![4.0, 9.0]);
    let net = Network::<f64>::new(1, vec![LayerSpec::Maxpool1d { pool_size: 2 }], 0).unwrap();
    assert_eq!(eval(&net, &seq(1, 1, 1, vec![7.0])), vec![7.0]);
}

fn flat_layer(spec: LayerSpec, features: usize) -> Layer<f64> {
    Layer::from_spec(&spec, ValueShape { seq: false, features }, &mut RngStreams::new(0).stream("t")).unwrap()
}

#[test]
fn batchnorm_train_statistics_and_eval_consistency() {
    let (b, f) = (64, 3);
    let mut rng = RngStreams::new(5).stream("t");
    let data: Vec<f64> = (0..b * f).map(|i| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng) + (i % f) as f64).collect();
    let x = Value::Flat(Tensor::from_vec(&[b, f], data.clone()).unwrap());
    let mut layer = flat_layer(LayerSpec::batchnorm(), f);
    let mut drng = RngStreams::new(0).stream("d");
    let y = layer.forward(&x, &mut ForwardCtx::train(&mut drng)).unwrap().0.into_tensor();
    for j in 0..f {
        let col: Vec<f64> = (0..b).map(|i| y.data()[i * f + j]).collect();
        let mean = col.iter().sum::<f64>() / b as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / b as f64;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-3, "var {var}");
    }

    let Layer::BatchNorm(bn) = &mut layer else { panic!("batchnorm layer expected") };
    for j in 0..f {
        let col: Vec<f64> = (0..b).map(|i| data[i * f + j]).collect();
        let mean = col.iter().sum::<f64>() / b as f64;
        bn.running_mean.data_mut()[j] = mean;
        bn.running_var.data_mut()[j] = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / b as f64;
    }
    let ye = layer.forward(&x, &mut ForwardCtx::eval()).unwrap().0.into_tensor();
    assert!(ye.max_abs_diff(&y) < 1e-12);
}

#[test]
fn dropout_monte_carlo() {
    let n = 100_000;
    let x = Value::Flat(Tensor::from_vec(&[1, n], vec![1.0; n]).unwrap());
    let layer = flat_layer(LayerSpec::Dropout { rate: 0.4 }, n);
    let mut rng = RngStreams::new(9).stream("dropout");
    let y = layer.forward(&x, &mut ForwardCtx::train(&mut rng)).unwrap().0.into_tensor();
    let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
    let mean = y.data().iter().sum::<f64>() / n as f64;
    assert!((kept - 0.6).abs() < 0.02, "kept {kept}");
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");

    let y = layer.forward(&x, &mut ForwardCtx::eval()).unwrap().0.into_tensor();
    assert!(y.data().iter().all(|&v| v == 1.0));
    let zero = flat_layer(LayerSpec::Dropout { rate: 0.0 }, n);
    let y = zero.forward(&x, &mut ForwardCtx::train(&mut rng)).unwrap().0.into_tensor();
    assert!(y.data().iter().all(|&v| v == 1.0));
}

#[test]
fn cross_entropy_examples() {
    let uniform = Tensor::from_vec(&[2, 4], vec![0.3; 8]).unwrap();
    let (loss, _) = softmax_cross_entropy::<f64>(&uniform, &[0, 3]).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
    let confident = Tensor::from_vec(&[1, 3], vec![100.0, 0.0, 0.0]).unwrap();
    let (loss, _) = softmax_cross_entropy::<f64>(&confident, &[0]).unwrap();
    assert!(loss < 1e-40);

    let mut rng = RngStreams::new(1).stream("t");
    let logits: Vec<f64> = (0..15).map(|_| StandardNormal.sample(&mut rng)).collect();
    let labels = [4, 0, 2];
    let (_, grad) = softmax_cross_entropy(&Tensor::from_vec(&[3, 5], logits.clone()).unwrap(), &labels).unwrap();
    let eps = 1e-5;
    for i in 0..15 {
        let mut hi = logits.clone();
        let mut lo = logits.clone();
        hi[i] += eps;
        lo[i] -= eps;
        let f = |v: Vec<f64>| softmax_cross_entropy(&Tensor::from_vec(&[3, 5], v).unwrap(), &labels).unwrap().0;
        let numeric = (f(hi) - f(lo)) / (2.0 * eps);
        let rel = (numeric - grad.data()[i]).abs() / numeric.abs().max(grad.data()[i].abs()).max(1e-6);
        assert!(rel < 1e-6, "entry {i}: {rel}");
    }
}

fn scalar_param(value: f64) -> Param<f64> {
    Param::new(Tensor::from_vec(&[1], vec![value]).unwrap())
}

#[test]
fn adam_first_step_and_symmetry() {
    let mut p = scalar_param(0.0);
    p.grad.data_mut()[0] = 1.0;
    Adam::new(1e-3).step([&mut p]);
    assert!((p.value.data()[0] + 1e-3).abs() < 1e-6, "{}", p.value.data()[0]);

    let mut p = scalar_param(0.7);
    let mut adam = Adam::new(1e-3);
    for _ in 0..10 {
        adam.step([&mut p]);
    }
    assert_eq!(p.value.data()[0], 0.7);

    let mut rng = RngStreams::new(4).stream("t");
    let mut a = scalar_param(0.0);
    let mut b = scalar_param(0.0);
    let (mut oa, mut ob) = (Adam::new(1e-2), Adam::new(1e-2));
    for _ in 0..5 {
        let g: f64 = rng.random_range(-2.0..2.0);
        a.grad.data_mut()[0] = g;
        b.grad.data_mut()[0] = -g;
        oa.step([&mut a]);
        ob.step([&mut b]);
        assert_eq!(a.value.data()[0], -b.value.data()[0]);
        assert_eq!(a.m.data()[0], -b.m.data()[0]);
    }
}
