//! Empirical losses and the sequential training loop.
//!
//! Each iteration samples one minibatch with `m_b` examples from each subset
//! plus fresh `U(-1, 1)` noise, then updates the discriminator, generator 1
//! and generator 2, in that order, all on the same batch.
//!
//! The discriminator loss is
//!
//! ```text
//! L_D = -1/m_b Σ_{S_F} 1/(K+1) Σ_k y_k log D_k(x¹, x²)
//!       - 1/(2 m_b) Σ_{S_1} log D_{K+1}(G_1(z¹, x²), x²)
//!       - 1/(2 m_b) Σ_{S_2} log D_{K+1}(x¹, G_2(z², x¹))
//! ```
//!
//! and each generator minimizes the class term on its own completions plus
//! the feature-matching distance between mean discriminator hidden features
//! on real and completed pairs.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::{MultiviewExample, PartitionedDataset};
use crate::error::{Error, Result};
use crate::eval;
use crate::math;
use crate::model::{TripartiteModel, View};
use crate::nn::{AdamConfig, AdamState, ForwardTrace, Mlp, MlpGrads};

/// Probabilities below this are clamped before taking logs.
pub const DEFAULT_LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub minibatch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Weight of the feature-matching term in the generator losses.
    pub fm_weight: f64,
    pub log_clamp: f64,
    /// Evaluate held-out accuracy every this many iterations (0 = never).
    pub heldout_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            minibatch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            fm_weight: 1.0,
            log_clamp: DEFAULT_LOG_CLAMP,
            heldout_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch_size must be >= 1".into()));
        }
        if !(self.fm_weight >= 0.0 && self.fm_weight.is_finite()) {
            return Err(Error::Config("fm_weight must be a finite nonnegative number".into()));
        }
        if !(self.log_clamp >= 0.0 && self.log_clamp < 1.0) {
            return Err(Error::Config("log_clamp must lie in [0, 1)".into()));
        }
        self.adam.validate()
    }
}

/// One training minibatch. `noise_v1[i]` completes `missing_v1[i]`, same for view 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<'a> {
    pub full_pairs: Vec<&'a MultiviewExample>,
    pub missing_v1: Vec<&'a MultiviewExample>,
    pub missing_v2: Vec<&'a MultiviewExample>,
    pub noise_v1: Vec<Vec<f64>>,
    pub noise_v2: Vec<Vec<f64>>,
}

impl<'a> Minibatch<'a> {
    pub fn missing(&self, view: View) -> (&[&'a MultiviewExample], &[Vec<f64>]) {
        match view {
            View::One => (&self.missing_v1, &self.noise_v1),
            View::Two => (&self.missing_v2, &self.noise_v2),
        }
    }

    pub fn len(&self) -> usize {
        self.full_pairs.len() + self.missing_v1.len() + self.missing_v2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn uniform_noise<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Samples `m_b` examples with replacement from each subset and draws fresh noise.
pub fn sample_minibatch<'a, R: Rng + ?Sized>(
    dataset: &'a PartitionedDataset,
    minibatch_size: usize,
    rng: &mut R,
) -> Result<Minibatch<'a>> {
    if minibatch_size == 0 {
        return Err(Error::Config("minibatch_size must be >= 1".into()));
    }
    for (name, subset) in [
        ("S_F (complete pairs)", dataset.s_full()),
        ("S_1 (view 1 missing)", dataset.s_missing1()),
        ("S_2 (view 2 missing)", dataset.s_missing2()),
    ] {
        if subset.is_empty() {
            return Err(Error::Config(format!("training subset {name} is empty")));
        }
    }
    let mut draw = |subset: &'a [MultiviewExample]| -> Vec<&'a MultiviewExample> {
        (0..minibatch_size)
            .map(|_| &subset[rng.random_range(0..subset.len())])
            .collect()
    };
    let full_pairs = draw(dataset.s_full());
    let missing_v1 = draw(dataset.s_missing1());
    let missing_v2 = draw(dataset.s_missing2());
    let noise_v1 = (0..minibatch_size).map(|_| uniform_noise(dataset.d1(), rng)).collect();
    let noise_v2 = (0..minibatch_size).map(|_| uniform_noise(dataset.d2(), rng)).collect();
    Ok(Minibatch {
        full_pairs,
        missing_v1,
        missing_v2,
        noise_v1,
        noise_v2,
    })
}

/// Discriminator loss, its three terms and the gradient for the discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorLoss {
    pub loss: f64,
    /// `[class term on S_F, fake term on S_1, fake term on S_2]`.
    pub terms: [f64; 3],
    pub grads: MlpGrads,
    /// Number of log arguments that hit the clamp.
    pub clamped: usize,
}

/// Generator loss split into its class and feature-matching parts.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLoss {
    pub loss: f64,
    pub class_term: f64,
    pub fm_term: f64,
    pub grads: MlpGrads,
    pub clamped: usize,
}

/// `-weight * log(max(p[target], clamp))` and its logit gradient added into `logit_grad`.
fn clamped_nll(probs: &[f64], target: usize, weight: f64, clamp: f64, logit_grad: &mut [f64]) -> (f64, bool) {
    let p = probs[target];
    if p < clamp {
        // Constant region of the clamped loss.
        return (-weight * math::ln(clamp), true);
    }
    for (k, (g, &pk)) in logit_grad.iter_mut().zip(probs).enumerate() {
        *g += weight * (pk - if k == target { 1.0 } else { 0.0 });
    }
    (-weight * math::ln(p), false)
}

fn observed(ex: &MultiviewExample, view: View) -> Result<&[f64]> {
    ex.view(view)
        .ok_or_else(|| Error::Data(format!("example is missing its view {}", view.index())))
}

/// Completes the missing `view` of `ex` and returns the generator trace and
/// the assembled discriminator trace.
fn complete_pair(
    model: &TripartiteModel,
    view: View,
    ex: &MultiviewExample,
    noise: &[f64],
) -> Result<(ForwardTrace, ForwardTrace)> {
    let other = observed(ex, view.other())?;
    let gen = model.generator_trace(view, other, noise)?;
    let disc = match view {
        View::One => model.disc_trace(&gen.output, other)?,
        View::Two => model.disc_trace(other, &gen.output)?,
    };
    Ok((gen, disc))
}

fn check_batch_against(model: &TripartiteModel, batch: &Minibatch<'_>) -> Result<()> {
    Error::check_len("noise for view 1", batch.missing_v1.len(), batch.noise_v1.len())?;
    Error::check_len("noise for view 2", batch.missing_v2.len(), batch.noise_v2.len())?;
    for ex in batch.full_pairs.iter().chain(&batch.missing_v1).chain(&batch.missing_v2) {
        if ex.label >= model.num_classes() {
            return Err(Error::Data(format!(
                "label {} outside [0, {})",
                ex.label,
                model.num_classes()
            )));
        }
    }
    Ok(())
}

/// Discriminator loss on `batch`. Generator outputs are constants here.
pub fn loss_discriminator(model: &TripartiteModel, batch: &Minibatch<'_>, clamp: f64) -> Result<DiscriminatorLoss> {
    if batch.full_pairs.is_empty() || batch.missing_v1.is_empty() || batch.missing_v2.is_empty() {
        return Err(Error::Config("discriminator loss needs examples from all three subsets".into()));
    }
    check_batch_against(model, batch)?;

    let k = model.num_classes();
    let mut grads = MlpGrads::zeros_like(&model.disc);
    let mut logit_grad = vec![0.0; k + 1];
    let mut terms = [0.0; 3];
    let mut clamped = 0;

    let class_weight = 1.0 / (batch.full_pairs.len() as f64 * (k + 1) as f64);
    for ex in &batch.full_pairs {
        let trace = model.disc_trace(observed(ex, View::One)?, observed(ex, View::Two)?)?;
        logit_grad.iter_mut().for_each(|g| *g = 0.0);
        let (l, hit) = clamped_nll(&trace.output, ex.label, class_weight, clamp, &mut logit_grad);
        terms[0] += l;
        clamped += hit as usize;
        model.disc.accumulate_backward(&trace, &logit_grad, &mut grads)?;
    }

    for (slot, view) in [(1, View::One), (2, View::Two)] {
        let (examples, noise) = batch.missing(view);
        let weight = 1.0 / (2.0 * examples.len() as f64);
        for (ex, z) in examples.iter().zip(noise) {
            let (_, trace) = complete_pair(model, view, ex, z)?;
            logit_grad.iter_mut().for_each(|g| *g = 0.0);
            let (l, hit) = clamped_nll(&trace.output, k, weight, clamp, &mut logit_grad);
            terms[slot] += l;
            clamped += hit as usize;
            model.disc.accumulate_backward(&trace, &logit_grad, &mut grads)?;
        }
    }

    Ok(DiscriminatorLoss {
        loss: terms[0] + terms[1] + terms[2],
        terms,
        grads,
        clamped,
    })
}

/// Feature-matching distance `‖mean f(real) - mean f(generated)‖₂` where `f`
/// is the discriminator hidden layer, with the gradient of the distance with
/// respect to each generated discriminator input.
///
/// At zero distance the gradient is taken to be zero.
pub fn feature_distance(
    disc: &Mlp,
    real_inputs: &[Vec<f64>],
    generated_inputs: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let real: Vec<ForwardTrace> = real_inputs.iter().map(|x| disc.forward(x)).collect::<Result<_>>()?;
    let generated: Vec<ForwardTrace> =
        generated_inputs.iter().map(|x| disc.forward(x)).collect::<Result<_>>()?;
    let (value, hidden_grad) = feature_gap(&real, &generated)?;
    let input_grads = generated
        .iter()
        .map(|t| disc.input_gradient(t, None, Some(&hidden_grad)))
        .collect::<Result<_>>()?;
    Ok((value, input_grads))
}

/// Returns the distance and its gradient with respect to each generated
/// sample's hidden features (the same vector for every sample).
fn feature_gap(real: &[ForwardTrace], generated: &[ForwardTrace]) -> Result<(f64, Vec<f64>)> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Config("feature matching needs non-empty real and generated batches".into()));
    }
    let width = real[0].hidden_act.len();
    let mean = |traces: &[ForwardTrace]| {
        let mut m = vec![0.0; width];
        for t in traces {
            math::axpy(1.0, &t.hidden_act, &mut m);
        }
        m.iter_mut().for_each(|x| *x /= traces.len() as f64);
        m
    };
    let diff: Vec<f64> = mean(real).iter().zip(mean(generated)).map(|(r, g)| r - g).collect();
    let norm = math::sqrt(math::dot(&diff, &diff));
    let grad = if norm > 0.0 {
        let scale = -1.0 / (norm * generated.len() as f64);
        diff.iter().map(|d| d * scale).collect()
    } else {
        vec![0.0; width]
    };
    Ok((norm, grad))
}

/// Shared body of the generator objectives: `class_weight` scales the class
/// term (0 disables it), `fm_weight` the feature-matching term.
fn generator_objective(
    model: &TripartiteModel,
    view: View,
    completed: &[&MultiviewExample],
    noise: &[Vec<f64>],
    real_pairs: &[&MultiviewExample],
    use_class_term: bool,
    fm_weight: f64,
    clamp: f64,
) -> Result<GeneratorLoss> {
    if completed.is_empty() {
        return Err(Error::Config(format!(
            "generator {} loss needs examples with view {} missing",
            view.index(),
            view.index()
        )));
    }
    Error::check_len("generator noise batch", completed.len(), noise.len())?;
    for ex in completed.iter().chain(real_pairs) {
        if ex.label >= model.num_classes() {
            return Err(Error::Data(format!("label {} outside [0, {})", ex.label, model.num_classes())));
        }
    }

    let k = model.num_classes();
    let traces: Vec<(ForwardTrace, ForwardTrace)> = completed
        .iter()
        .zip(noise)
        .map(|(ex, z)| complete_pair(model, view, ex, z))
        .collect::<Result<_>>()?;

    let (fm_term, fm_hidden_grad) = if fm_weight > 0.0 {
        let real: Vec<ForwardTrace> = real_pairs
            .iter()
            .map(|ex| model.disc_trace(observed(ex, View::One)?, observed(ex, View::Two)?))
            .collect::<Result<_>>()?;
        let disc_traces: Vec<ForwardTrace> = traces.iter().map(|(_, d)| d.clone()).collect();
        let (value, mut grad) = feature_gap(&real, &disc_traces)?;
        grad.iter_mut().for_each(|g| *g *= fm_weight);
        (value, Some(grad))
    } else {
        (0.0, None)
    };

    let class_weight = 1.0 / (completed.len() as f64 * (k + 1) as f64);
    let (lo, hi) = match view {
        View::One => (0, model.d1()),
        View::Two => (model.d1(), model.d1() + model.d2()),
    };
    let gen_net = model.generator(view);
    let mut grads = MlpGrads::zeros_like(gen_net);
    let mut logit_grad = vec![0.0; k + 1];
    let mut class_term = 0.0;
    let mut clamped = 0;
    for (ex, (gen_trace, disc_trace)) in completed.iter().zip(&traces) {
        logit_grad.iter_mut().for_each(|g| *g = 0.0);
        let output_grad = if use_class_term {
            let (l, hit) = clamped_nll(&disc_trace.output, ex.label, class_weight, clamp, &mut logit_grad);
            class_term += l;
            clamped += hit as usize;
            Some(logit_grad.as_slice())
        } else {
            None
        };
        let input_grad = model
            .disc
            .input_gradient(disc_trace, output_grad, fm_hidden_grad.as_deref())?;
        gen_net.accumulate_backward(gen_trace, &input_grad[lo..hi], &mut grads)?;
    }

    Ok(GeneratorLoss {
        loss: class_term + fm_weight * fm_term,
        class_term,
        fm_term,
        grads,
        clamped,
    })
}

/// Feature-matching penalty for generator `view`: real features come from
/// `real_pairs`, generated ones from completing `missing` with `noise`.
/// Gradients are for the generator; the discriminator is held fixed.
pub fn feature_matching_penalty(
    model: &TripartiteModel,
    view: View,
    real_pairs: &[&MultiviewExample],
    missing: &[&MultiviewExample],
    noise: &[Vec<f64>],
) -> Result<GeneratorLoss> {
    if real_pairs.is_empty() {
        return Err(Error::Config("feature matching needs at least one real pair".into()));
    }
    generator_objective(model, view, missing, noise, real_pairs, false, 1.0, 0.0)
}

/// Loss of generator `view` on `batch`: class term on its completions plus
/// `fm_weight` times the feature-matching penalty against the batch's full pairs.
pub fn loss_generator(
    model: &TripartiteModel,
    view: View,
    batch: &Minibatch<'_>,
    fm_weight: f64,
    clamp: f64,
) -> Result<GeneratorLoss> {
    check_batch_against(model, batch)?;
    if fm_weight > 0.0 && batch.full_pairs.is_empty() {
        return Err(Error::Config("feature matching needs complete pairs in the batch".into()));
    }
    let (missing, noise) = batch.missing(view);
    generator_objective(model, view, missing, noise, &batch.full_pairs, true, fm_weight, clamp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iter: usize,
    pub loss_d: f64,
    pub loss_g1: f64,
    pub loss_g2: f64,
    pub heldout_acc: Option<f64>,
    pub clamped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<IterationMetrics>,
    /// Total number of clamped log arguments over the run.
    pub clamp_events: usize,
    /// Adam steps taken by each player.
    pub steps: u64,
}

/// Optimizer state for the three players.
#[derive(Debug, Clone, PartialEq)]
pub struct GameOptimizer {
    pub disc: AdamState,
    pub gen1: AdamState,
    pub gen2: AdamState,
}

impl GameOptimizer {
    pub fn new(config: AdamConfig, model: &TripartiteModel) -> Self {
        Self {
            disc: AdamState::for_net(config, &model.disc),
            gen1: AdamState::for_net(config, &model.gen1),
            gen2: AdamState::for_net(config, &model.gen2),
        }
    }
}

/// One game step on `batch`: D, then G1, then G2.
pub fn train_step(
    model: &mut TripartiteModel,
    optim: &mut GameOptimizer,
    batch: &Minibatch<'_>,
    config: &TrainConfig,
) -> Result<(f64, f64, f64, usize)> {
    let d = loss_discriminator(model, batch, config.log_clamp)?;
    model.disc.adam_update(&d.grads, &mut optim.disc)?;

    let g1 = loss_generator(model, View::One, batch, config.fm_weight, config.log_clamp)?;
    model.gen1.adam_update(&g1.grads, &mut optim.gen1)?;

    let g2 = loss_generator(model, View::Two, batch, config.fm_weight, config.log_clamp)?;
    model.gen2.adam_update(&g2.grads, &mut optim.gen2)?;

    Ok((d.loss, g1.loss, g2.loss, d.clamped + g1.clamped + g2.clamped))
}

/// RNG used for minibatch sampling: the seed's second ChaCha stream, so that
/// initialization from `seeded_rng(seed)` and sampling never share draws.
pub fn sampling_rng(seed: u64) -> crate::SeededRng {
    let mut rng = crate::seeded_rng(seed);
    rng.set_stream(1);
    rng
}

/// Runs the training loop in place. See [`train_with`].
pub fn train(
    model: &mut TripartiteModel,
    dataset: &PartitionedDataset,
    config: &TrainConfig,
    heldout: Option<&[MultiviewExample]>,
) -> Result<TrainLog> {
    train_with(model, dataset, config, heldout, |_, _| Ok(()))
}

/// Runs `config.iterations` game steps. `on_iteration` sees every metrics
/// row and the model after the step (used for periodic checkpoints).
pub fn train_with<F>(
    model: &mut TripartiteModel,
    dataset: &PartitionedDataset,
    config: &TrainConfig,
    heldout: Option<&[MultiviewExample]>,
    mut on_iteration: F,
) -> Result<TrainLog>
where
    F: FnMut(&IterationMetrics, &TripartiteModel) -> Result<()>,
{
    config.validate()?;
    if (dataset.d1(), dataset.d2(), dataset.num_classes()) != (model.d1(), model.d2(), model.num_classes()) {
        return Err(Error::Config("dataset dimensions do not match the model".into()));
    }
    let mut log = TrainLog::default();
    if config.iterations == 0 {
        return Ok(log);
    }

    let mut rng = sampling_rng(config.seed);
    let mut optim = GameOptimizer::new(config.adam, model);
    let wrap = |iteration: usize| move |e: Error| Error::Training {
        iteration,
        source: Box::new(e),
    };

    for iter in 0..config.iterations {
        let batch = sample_minibatch(dataset, config.minibatch_size, &mut rng).map_err(wrap(iter))?;
        let (loss_d, loss_g1, loss_g2, clamped) =
            train_step(model, &mut optim, &batch, config).map_err(wrap(iter))?;
        log.clamp_events += clamped;

        let heldout_acc = match heldout {
            Some(test) if config.heldout_every > 0 && (iter + 1) % config.heldout_every == 0 => {
                Some(eval::complete_pair_accuracy(model, test).map_err(wrap(iter))?)
            }
            _ => None,
        };
        let row = IterationMetrics {
            iter,
            loss_d,
            loss_g1,
            loss_g2,
            heldout_acc,
            clamped,
        };
        on_iteration(&row, model).map_err(wrap(iter))?;
        log.rows.push(row);
    }
    log.steps = optim.disc.step_count;
    Ok(log)
}
