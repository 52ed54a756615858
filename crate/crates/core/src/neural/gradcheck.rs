use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};

use super::layers::LayerCache;
use super::{softmax_cross_entropy, ForwardCtx, Mode, Network, NeuralError, Tensor, Value};
use crate::rng::RngStreams;

/// Scalar objective used by [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum CheckLoss {
    /// Mean softmax cross-entropy of flat logits.
    CrossEntropy(Vec<usize>),
    /// `Σ r ⊙ y` for a fixed standard-normal `r` shaped like the output.
    Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Entries sampled per parameter tensor (all entries if smaller).
    pub samples_per_param: usize,
    /// Entries of the input sampled; zero skips the input gradient.
    pub input_samples: usize,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
    /// Train mode uses dropout (with a fixed mask) and batch statistics.
    pub mode: Mode,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { epsilon: 1e-5, samples_per_param: 16, input_samples: 16, floor: 1e-6, seed: 0, mode: Mode::Train }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Entries skipped because the two perturbed passes routed differently
    /// (a max-pool winner or ReLU unit flipped), so the central difference
    /// straddles a kink.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradCheckEntry>,
}

impl GradCheckReport {
    fn record(&mut self, name: String, analytic: f64, numeric: f64, floor: f64) {
        let rel_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        self.checked += 1;
        if self.worst.is_none() || rel_error > self.max_rel_error {
            self.max_rel_error = rel_error;
            self.worst = Some(GradCheckEntry { name, analytic, numeric, rel_error });
        }
    }
}

fn param_names(net: &Network<f64>) -> Vec<String> {
    let mut names = Vec::new();
    for (li, (layer, spec)) in net.layers().iter().zip(net.specs()).enumerate() {
        for k in 0..layer.params().len() {
            names.push(format!("layer{li}.{}.p{k}", spec.kind()));
        }
    }
    names
}

/// Compares backpropagated gradients with central differences on sampled
/// parameter and input entries, in `f64`.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`. Entries whose
/// perturbation flips a max-pool winner or ReLU unit are skipped and
/// counted in `skipped_kinks`. The dropout mask is
/// re-drawn from the same seed on every evaluation so the objective is a
/// fixed function of the weights.
pub fn gradient_check(
    net: &mut Network<f64>,
    x: &Value<f64>,
    loss: &CheckLoss,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NeuralError> {
    let streams = RngStreams::new(opts.seed);
    let run = |net: &Network<f64>, x: &Value<f64>| -> Result<(Value<f64>, Vec<LayerCache<f64>>), NeuralError> {
        let mut rng = streams.stream("gradcheck/dropout");
        let mut ctx = ForwardCtx { mode: opts.mode, rng: Some(&mut rng) };
        net.forward(x, &mut ctx)
    };

    let (y0, caches) = run(net, x)?;
    let r = match loss {
        CheckLoss::Projection => {
            let mut rng = streams.stream("gradcheck/projection");
            let data = (0..y0.tensor().len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            Some(Tensor::from_vec(y0.tensor().shape(), data)?)
        }
        CheckLoss::CrossEntropy(_) => None,
    };
    let objective = |y: &Value<f64>| -> Result<(f64, Value<f64>), NeuralError> {
        match (loss, &r) {
            (CheckLoss::CrossEntropy(labels), _) => {
                let (l, g) = softmax_cross_entropy(y.expect_flat("cross-entropy check")?, labels)?;
                Ok((l, Value::Flat(g)))
            }
            (CheckLoss::Projection, Some(r)) => {
                let l = y.tensor().data().iter().zip(r.data()).map(|(a, b)| a * b).sum();
                Ok((l, y.with_data(r.clone())))
            }
            (CheckLoss::Projection, None) => unreachable!("projection is drawn above"),
        }
    };

    let routed = |net: &Network<f64>, x: &Value<f64>| -> Result<(f64, Vec<usize>), NeuralError> {
        let (y, caches) = run(net, x)?;
        let mut routing = Vec::new();
        for (layer, cache) in net.layers().iter().zip(&caches) {
            cache.routing(layer, &mut routing);
        }
        Ok((objective(&y)?.0, routing))
    };

    net.zero_grad();
    let (_, dy) = objective(&y0)?;
    let dx = net.backward(&caches, dy)?;
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let names = param_names(net);
    let eps = opts.epsilon;
    let mut pick = streams.stream("gradcheck/pick");
    let mut report = GradCheckReport::default();

    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let idxs = sample(&mut pick, n, opts.samples_per_param.min(n)).into_vec();
        for j in idxs {
            let orig = net.params()[pi].value.data()[j];
            net.params_mut()[pi].value.data_mut()[j] = orig + eps;
            let (lp, rp) = routed(net, x)?;
            net.params_mut()[pi].value.data_mut()[j] = orig - eps;
            let (lm, rm) = routed(net, x)?;
            net.params_mut()[pi].value.data_mut()[j] = orig;
            if rp != rm {
                report.skipped_kinks += 1;
                continue;
            }
            report.record(format!("{}[{j}]", names[pi]), grads[j], (lp - lm) / (2.0 * eps), opts.floor);
        }
    }

    if opts.input_samples > 0 {
        let s = x.expect_seq("gradient check input")?;
        let (t, c) = (s.steps(), s.channels());
        let valid: Vec<usize> = s
            .lengths
            .iter()
            .enumerate()
            .flat_map(|(b, &len)| (b * t * c)..(b * t + len) * c)
            .collect();
        let idxs = sample(&mut pick, valid.len(), opts.input_samples.min(valid.len())).into_vec();
        let mut xp = x.clone();
        for k in idxs {
            let j = valid[k];
            let orig = xp.tensor().data()[j];
            xp.tensor_mut().data_mut()[j] = orig + eps;
            let (lp, rp) = routed(net, &xp)?;
            xp.tensor_mut().data_mut()[j] = orig - eps;
            let (lm, rm) = routed(net, &xp)?;
            xp.tensor_mut().data_mut()[j] = orig;
            if rp != rm {
                report.skipped_kinks += 1;
                continue;
            }
            report.record(format!("input[{j}]"), dx.tensor().data()[j], (lp - lm) / (2.0 * eps), opts.floor);
        }
    }
    Ok(report)
}
