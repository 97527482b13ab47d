//! Central finite-difference checks of the analytical gradients.
//!
//! Each suite draws small random instances, evaluates the loss only through
//! forward passes, and compares `(f(θ + h) - f(θ - h)) / 2h` coordinate by
//! coordinate against the backprop gradient.

use alloc::vec::Vec;

use rand::Rng;

use crate::data::{MultiviewExample, PartitionedDataset};
use crate::error::Result;
use crate::math;
use crate::model::{TripartiteModel, View};
use crate::nn::{Mlp, OutputKind};
use crate::train::{feature_matching_penalty, loss_discriminator, loss_generator, sample_minibatch};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Below this magnitude the relative error is measured against this floor,
/// since both sides are then dominated by rounding.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub suite: &'static str,
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Tracker {
    suite: &'static str,
    instances: usize,
    coordinates: usize,
    max_rel_error: f64,
    tolerance: f64,
}

impl Tracker {
    fn new(suite: &'static str, tolerance: f64) -> Self {
        Self {
            suite,
            instances: 0,
            coordinates: 0,
            max_rel_error: 0.0,
            tolerance,
        }
    }

    fn compare(&mut self, analytic: &[f64], numeric: &[f64]) {
        for (&a, &n) in analytic.iter().zip(numeric) {
            let e = relative_error(a, n);
            // NaN must fail the suite.
            if !(e <= self.max_rel_error) {
                self.max_rel_error = e;
            }
            self.coordinates += 1;
        }
    }

    fn finish(self) -> GradcheckReport {
        GradcheckReport {
            suite: self.suite,
            instances: self.instances,
            coordinates: self.coordinates,
            passed: self.max_rel_error < self.tolerance,
            max_rel_error: self.max_rel_error,
            tolerance: self.tolerance,
        }
    }
}

fn random_vec<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Raw network: `L = Σ c_j o_j` (linear head) or `-log p_y` (softmax head),
/// checked for parameters and input.
pub fn check_mlp<R: Rng + ?Sized>(instances: usize, rng: &mut R) -> Result<GradcheckReport> {
    let mut t = Tracker::new("mlp forward/backward", DEFAULT_TOLERANCE);
    for i in 0..instances {
        let kind = if i % 2 == 0 { OutputKind::Linear } else { OutputKind::Softmax };
        let (din, hid, dout) = (rng.random_range(1..6), rng.random_range(1..9), rng.random_range(1..6));
        let net = Mlp::xavier(din, hid, dout, kind, rng)?;
        let x = random_vec(din, 2.0, rng);
        let coef = random_vec(dout, 1.0, rng);
        let target = rng.random_range(0..dout);
        let loss = |n: &Mlp, x: &[f64]| -> f64 {
            let tr = n.forward(x).expect("shapes fixed");
            match kind {
                OutputKind::Linear => math::dot(&tr.output, &coef),
                OutputKind::Softmax => -math::ln(tr.output[target]),
            }
        };
        let trace = net.forward(&x)?;
        let og: Vec<f64> = match kind {
            OutputKind::Linear => coef.clone(),
            OutputKind::Softmax => trace
                .output
                .iter()
                .enumerate()
                .map(|(j, p)| p - if j == target { 1.0 } else { 0.0 })
                .collect(),
        };
        let back = net.backward(&trace, &og)?;

        let mut probe = net.clone();
        let numeric = central_difference(
            |p| {
                probe.set_flat_params(p).expect("length fixed");
                loss(&probe, &x)
            },
            &net.flat_params(),
            DEFAULT_STEP,
        );
        t.compare(&back.params.flat(), &numeric);
        let numeric_x = central_difference(|xx| loss(&net, xx), &x, DEFAULT_STEP);
        t.compare(&back.input, &numeric_x);
        t.instances += 1;
    }
    Ok(t.finish())
}

/// A small random game instance: model plus a partitioned dataset.
pub fn random_game<R: Rng + ?Sized>(rng: &mut R) -> Result<(TripartiteModel, PartitionedDataset)> {
    let d1 = rng.random_range(1..4);
    let d2 = rng.random_range(1..4);
    let k = rng.random_range(1..4);
    let hidden = rng.random_range(2..7);
    let mut model = TripartiteModel::xavier(d1, d2, k, hidden, rng)?;
    // Nonzero biases so that every parameter block is exercised off zero.
    for net in [&mut model.gen1, &mut model.gen2, &mut model.disc] {
        for b in net.bias_in.iter_mut().chain(net.bias_out.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let mut ds = PartitionedDataset::empty(d1, d2, k)?;
    for i in 0..3 * rng.random_range(1..4) {
        let label = rng.random_range(0..k);
        let v1 = random_vec(d1, 1.5, rng);
        let v2 = random_vec(d2, 1.5, rng);
        let ex = match i % 3 {
            0 => MultiviewExample::complete(v1, v2, label),
            1 => MultiviewExample::new(None, Some(v2), label)?,
            _ => MultiviewExample::new(Some(v1), None, label)?,
        };
        ds.push(ex)?;
    }
    Ok((model, ds))
}

/// Discriminator loss with respect to every discriminator parameter.
pub fn check_discriminator_loss<R: Rng + ?Sized>(instances: usize, rng: &mut R) -> Result<GradcheckReport> {
    let mut t = Tracker::new("L_D wrt discriminator", DEFAULT_TOLERANCE);
    for _ in 0..instances {
        let (model, ds) = random_game(rng)?;
        let m_b = rng.random_range(1..4);
        let batch = sample_minibatch(&ds, m_b, rng)?;
        let analytic = loss_discriminator(&model, &batch, 0.0)?.grads.flat();
        let mut probe = model.clone();
        let numeric = central_difference(
            |p| {
                probe.disc.set_flat_params(p).expect("length fixed");
                loss_discriminator(&probe, &batch, 0.0).expect("valid batch").loss
            },
            &model.disc.flat_params(),
            DEFAULT_STEP,
        );
        t.compare(&analytic, &numeric);
        t.instances += 1;
    }
    Ok(t.finish())
}

/// Full generator loss (class term + feature matching) through the frozen
/// discriminator, with respect to the generator's parameters.
pub fn check_generator_loss<R: Rng + ?Sized>(instances: usize, rng: &mut R) -> Result<GradcheckReport> {
    let mut t = Tracker::new("L_G wrt generator", DEFAULT_TOLERANCE);
    for i in 0..instances {
        let view = if i % 2 == 0 { View::One } else { View::Two };
        let (model, ds) = random_game(rng)?;
        let m_b = rng.random_range(1..4);
        let fm_weight = rng.random_range(0.0..2.0);
        let batch = sample_minibatch(&ds, m_b, rng)?;
        let analytic = loss_generator(&model, view, &batch, fm_weight, 0.0)?.grads.flat();
        let mut probe = model.clone();
        let numeric = central_difference(
            |p| {
                probe.generator_mut(view).set_flat_params(p).expect("length fixed");
                loss_generator(&probe, view, &batch, fm_weight, 0.0).expect("valid batch").loss
            },
            &model.generator(view).flat_params(),
            DEFAULT_STEP,
        );
        t.compare(&analytic, &numeric);
        t.instances += 1;
    }
    Ok(t.finish())
}

/// Feature-matching penalty alone with respect to the generator's parameters.
pub fn check_feature_matching<R: Rng + ?Sized>(instances: usize, rng: &mut R) -> Result<GradcheckReport> {
    let mut t = Tracker::new("feature matching wrt generator", DEFAULT_TOLERANCE);
    for i in 0..instances {
        let view = if i % 2 == 0 { View::One } else { View::Two };
        let (model, ds) = random_game(rng)?;
        let batch = sample_minibatch(&ds, rng.random_range(1..4), rng)?;
        let (missing, noise) = batch.missing(view);
        let analytic = feature_matching_penalty(&model, view, &batch.full_pairs, missing, noise)?
            .grads
            .flat();
        let mut probe = model.clone();
        let numeric = central_difference(
            |p| {
                probe.generator_mut(view).set_flat_params(p).expect("length fixed");
                feature_matching_penalty(&probe, view, &batch.full_pairs, missing, noise)
                    .expect("valid batch")
                    .loss
            },
            &model.generator(view).flat_params(),
            DEFAULT_STEP,
        );
        t.compare(&analytic, &numeric);
        t.instances += 1;
    }
    Ok(t.finish())
}

/// Every suite, `instances` draws each.
pub fn run_all<R: Rng + ?Sized>(instances: usize, rng: &mut R) -> Result<Vec<GradcheckReport>> {
    Ok(alloc::vec![
        check_mlp(instances, rng)?,
        check_discriminator_loss(instances, rng)?,
        check_generator_loss(instances, rng)?,
        check_feature_matching(instances, rng)?,
    ])
}
