//! Test-time scenarios and the single-view baseline classifier.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::{MultiviewExample, PartitionedDataset};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{argmax, DecisionKind, TripartiteModel, View};
use crate::nn::{AdamState, Mlp, MlpGrads, OutputKind};
use crate::train::{uniform_noise, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Both observed views go to the discriminator.
    TestComplete,
    /// View 1 is deleted and regenerated by generator 1 from view 2.
    TestOnView1Generated,
    /// View 2 is deleted and regenerated by generator 2 from view 1.
    TestOnView2Generated,
}

impl Scenario {
    pub fn generated_view(self) -> Option<View> {
        match self {
            Scenario::TestComplete => None,
            Scenario::TestOnView1Generated => Some(View::One),
            Scenario::TestOnView2Generated => Some(View::Two),
        }
    }
}

fn required(ex: &MultiviewExample, view: View, i: usize) -> Result<&[f64]> {
    ex.view(view)
        .ok_or_else(|| Error::Data(format!("test example {i} has no view {}", view.index())))
}

/// Decision for one test item under `scenario`; `None` means fake.
pub fn predict<R: Rng + ?Sized>(
    model: &TripartiteModel,
    ex: &MultiviewExample,
    index: usize,
    scenario: Scenario,
    rng: &mut R,
) -> Result<Option<usize>> {
    let decision = match scenario.generated_view() {
        None => model.decide(required(ex, View::One, index)?, required(ex, View::Two, index)?)?,
        Some(view) => {
            let other = required(ex, view.other(), index)?;
            let noise = uniform_noise(model.view_dim(view), rng);
            let generated = model.generate(view, other, &noise)?;
            match view {
                View::One => model.decide(&generated, other)?,
                View::Two => model.decide(other, &generated)?,
            }
        }
    };
    Ok(match decision.kind {
        DecisionKind::Fake => None,
        DecisionKind::Class(k) => Some(k),
    })
}

/// Scores `model` on `test` under `scenario`, one fresh noise draw per
/// generated view, noise seeded by `seed`.
pub fn evaluate(
    model: &TripartiteModel,
    test: &[MultiviewExample],
    scenario: Scenario,
    seed: u64,
) -> Result<MetricsReport> {
    let mut rng = crate::seeded_rng(seed);
    let predicted = test
        .iter()
        .enumerate()
        .map(|(i, ex)| predict(model, ex, i, scenario, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = test.iter().map(|e| e.label).collect();
    MetricsReport::from_predictions(&truth, &predicted, model.num_classes(), seed)
}

/// Decide-rule accuracy on complete pairs.
pub fn complete_pair_accuracy(model: &TripartiteModel, test: &[MultiviewExample]) -> Result<f64> {
    Ok(evaluate(model, test, Scenario::TestComplete, 0)?.accuracy)
}

/// A softmax classifier over a single view, same width as the discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleviewClassifier {
    pub view: View,
    pub net: Mlp,
}

impl SingleviewClassifier {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.net.forward(x)?.output))
    }

    /// Argmax accuracy on the test items that observe this classifier's view.
    pub fn evaluate(&self, test: &[MultiviewExample], seed: u64) -> Result<MetricsReport> {
        let mut truth = Vec::new();
        let mut predicted = Vec::new();
        for ex in test {
            if let Some(x) = ex.view(self.view) {
                truth.push(ex.label);
                predicted.push(Some(self.predict(x)?));
            }
        }
        MetricsReport::from_predictions(&truth, &predicted, self.net.output_dim(), seed)
    }
}

/// Trains a single-view classifier with Adam on cross-entropy over every
/// training example that observes `view`, then scores it on `test`.
///
/// Minibatches of `config.minibatch_size` are drawn with replacement;
/// initialization and sampling follow `config.seed` like the game does.
pub fn train_singleview_baseline(
    view: View,
    dataset: &PartitionedDataset,
    config: &TrainConfig,
    hidden_dim: usize,
    test: &[MultiviewExample],
) -> Result<(SingleviewClassifier, MetricsReport)> {
    config.validate()?;
    let pool: Vec<(&[f64], usize)> = dataset
        .iter()
        .filter_map(|ex| ex.view(view).map(|x| (x, ex.label)))
        .collect();
    if pool.is_empty() {
        return Err(Error::Config(format!("no training example observes view {}", view.index())));
    }

    let dim = match view {
        View::One => dataset.d1(),
        View::Two => dataset.d2(),
    };
    let k = dataset.num_classes();
    let mut net = Mlp::xavier(dim, hidden_dim, k, OutputKind::Softmax, &mut crate::seeded_rng(config.seed))?;
    let mut state = AdamState::for_net(config.adam, &net);
    let mut rng = crate::train::sampling_rng(config.seed);
    let mut logit_grad = vec![0.0; k];
    let weight = 1.0 / config.minibatch_size as f64;

    for _ in 0..config.iterations {
        let mut grads = MlpGrads::zeros_like(&net);
        for _ in 0..config.minibatch_size {
            let (x, label) = pool[rng.random_range(0..pool.len())];
            let trace = net.forward(x)?;
            for (j, (g, p)) in logit_grad.iter_mut().zip(&trace.output).enumerate() {
                *g = weight * (p - if j == label { 1.0 } else { 0.0 });
            }
            net.accumulate_backward(&trace, &logit_grad, &mut grads)?;
        }
        net.adam_update(&grads, &mut state)?;
    }

    let classifier = SingleviewClassifier { view, net };
    let report = classifier.evaluate(test, config.seed)?;
    Ok((classifier, report))
}
