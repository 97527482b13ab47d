//! Dense one-hidden-layer networks with manual backprop, plus Adam.
//!
//! Every network in the game has the same shape:
//!
//! - `h = sigmoid(W_in x + b_in)`
//! - `o = W_out h + b_out`, optionally followed by a softmax.
//!
//! Weights are row-major `(out_dim, in_dim)`. The sigmoid hidden layer `h` is
//! also the discriminator feature map used for feature matching.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Hidden width used by every network unless configured otherwise.
pub const DEFAULT_HIDDEN_DIM: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// Raw affine output (generators).
    Linear,
    /// Softmax over the affine output (discriminator, classifiers).
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    /// Row-major `(hidden_dim, input_dim)`.
    pub weights_in: Vec<f64>,
    pub bias_in: Vec<f64>,
    /// Row-major `(output_dim, hidden_dim)`.
    pub weights_out: Vec<f64>,
    pub bias_out: Vec<f64>,
    output_kind: OutputKind,
}

/// Activations cached by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden_act: Vec<f64>,
    pub output_pre: Vec<f64>,
    pub output: Vec<f64>,
}

/// Gradients with the same layout as the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights_in: Vec<f64>,
    pub bias_in: Vec<f64>,
    pub weights_out: Vec<f64>,
    pub bias_out: Vec<f64>,
}

/// Result of a full backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Backward {
    pub params: MlpGrads,
    pub input: Vec<f64>,
}

/// Glorot-uniform matrix of shape `(fan_out, fan_in)`, entries in `[-L, L]`
/// with `L = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Vec<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidDimension("xavier fan_in and fan_out must be > 0"));
    }
    let limit = xavier_limit(fan_in, fan_out);
    Ok((0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect())
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

impl Mlp {
    /// All-zero network. Mostly useful for tests with closed-form outputs.
    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        output_kind: OutputKind,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidDimension("network dimensions must be > 0"));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            output_dim,
            weights_in: vec![0.0; hidden_dim * input_dim],
            bias_in: vec![0.0; hidden_dim],
            weights_out: vec![0.0; output_dim * hidden_dim],
            bias_out: vec![0.0; output_dim],
            output_kind,
        })
    }

    /// Xavier-initialized weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        output_kind: OutputKind,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim, output_kind)?;
        net.weights_in = xavier_init(input_dim, hidden_dim, rng)?;
        net.weights_out = xavier_init(hidden_dim, output_dim, rng)?;
        Ok(net)
    }

    /// Rebuilds a network from raw blocks, checking shapes and finiteness.
    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        output_kind: OutputKind,
        weights_in: Vec<f64>,
        bias_in: Vec<f64>,
        weights_out: Vec<f64>,
        bias_out: Vec<f64>,
    ) -> Result<Self> {
        let net = Self::zeros(input_dim, hidden_dim, output_dim, output_kind)?;
        Error::check_len("weights_in", net.weights_in.len(), weights_in.len())?;
        Error::check_len("bias_in", net.bias_in.len(), bias_in.len())?;
        Error::check_len("weights_out", net.weights_out.len(), weights_out.len())?;
        Error::check_len("bias_out", net.bias_out.len(), bias_out.len())?;
        for block in [&weights_in, &bias_in, &weights_out, &bias_out] {
            Error::check_finite("network parameters", block)?;
        }
        Ok(Self {
            weights_in,
            bias_in,
            weights_out,
            bias_out,
            ..net
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output_kind
    }

    pub fn num_params(&self) -> usize {
        self.weights_in.len() + self.bias_in.len() + self.weights_out.len() + self.bias_out.len()
    }

    pub fn param_blocks(&self) -> [&[f64]; 4] {
        [&self.weights_in, &self.bias_in, &self.weights_out, &self.bias_out]
    }

    pub fn param_blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.weights_in,
            &mut self.bias_in,
            &mut self.weights_out,
            &mut self.bias_out,
        ]
    }

    /// Flat copy of every parameter, in block order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.param_blocks().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        Error::check_len("flat parameters", self.num_params(), flat.len())?;
        let mut offset = 0;
        for block in self.param_blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        Error::check_len("network input", self.input_dim, input.len())?;
        Error::check_finite("network input", input)?;

        let hidden_pre: Vec<f64> = self
            .weights_in
            .chunks_exact(self.input_dim)
            .zip(&self.bias_in)
            .map(|(row, b)| math::dot(row, input) + b)
            .collect();
        let hidden_act: Vec<f64> = hidden_pre.iter().map(|&z| math::sigmoid(z)).collect();
        let output_pre: Vec<f64> = self
            .weights_out
            .chunks_exact(self.hidden_dim)
            .zip(&self.bias_out)
            .map(|(row, b)| math::dot(row, &hidden_act) + b)
            .collect();
        let output = match self.output_kind {
            OutputKind::Linear => output_pre.clone(),
            OutputKind::Softmax => {
                let mut out = vec![0.0; self.output_dim];
                math::softmax_into(&output_pre, &mut out);
                out
            }
        };

        Ok(ForwardTrace {
            input: input.to_vec(),
            hidden_pre,
            hidden_act,
            output_pre,
            output,
        })
    }

    /// Full backward pass.
    ///
    /// `output_grad` is the loss gradient with respect to `output_pre`: for a
    /// softmax head that is the gradient with respect to the logits (the caller
    /// fuses softmax and cross-entropy).
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Result<Backward> {
        let mut params = MlpGrads::zeros_like(self);
        let mut input = vec![0.0; self.input_dim];
        self.backprop(trace, Some(output_grad), None, Some(&mut params), Some(&mut input))?;
        Ok(Backward { params, input })
    }

    /// Adds the parameter gradient of one sample into `grads`.
    pub fn accumulate_backward(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<()> {
        self.backprop(trace, Some(output_grad), None, Some(grads), None)
    }

    /// Gradient with respect to the input only, parameters held fixed.
    ///
    /// `output_grad` and `hidden_act_grad` are both optional and summed: the
    /// second lets a loss read the hidden activations directly (feature matching).
    pub fn input_gradient(
        &self,
        trace: &ForwardTrace,
        output_grad: Option<&[f64]>,
        hidden_act_grad: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let mut input = vec![0.0; self.input_dim];
        self.backprop(trace, output_grad, hidden_act_grad, None, Some(&mut input))?;
        Ok(input)
    }

    fn backprop(
        &self,
        trace: &ForwardTrace,
        output_grad: Option<&[f64]>,
        hidden_act_grad: Option<&[f64]>,
        mut param_grads: Option<&mut MlpGrads>,
        input_grad: Option<&mut [f64]>,
    ) -> Result<()> {
        Error::check_len("trace input", self.input_dim, trace.input.len())?;
        Error::check_len("trace hidden", self.hidden_dim, trace.hidden_act.len())?;
        Error::check_len("trace output", self.output_dim, trace.output_pre.len())?;
        if let Some(g) = param_grads.as_deref() {
            Error::check_len("gradient buffer", self.num_params(), g.len())?;
        }

        // dL/dh
        let mut hidden_grad = match hidden_act_grad {
            Some(g) => {
                Error::check_len("hidden gradient", self.hidden_dim, g.len())?;
                g.to_vec()
            }
            None => vec![0.0; self.hidden_dim],
        };
        if let Some(og) = output_grad {
            Error::check_len("output gradient", self.output_dim, og.len())?;
            for (row, &g) in self.weights_out.chunks_exact(self.hidden_dim).zip(og) {
                if g != 0.0 {
                    math::axpy(g, row, &mut hidden_grad);
                }
            }
            if let Some(grads) = param_grads.as_deref_mut() {
                for ((grow, &g), gb) in grads
                    .weights_out
                    .chunks_exact_mut(self.hidden_dim)
                    .zip(og)
                    .zip(grads.bias_out.iter_mut())
                {
                    math::axpy(g, &trace.hidden_act, grow);
                    *gb += g;
                }
            }
        }

        // dL/dz_hidden = dL/dh * h (1 - h)
        for (g, &h) in hidden_grad.iter_mut().zip(&trace.hidden_act) {
            *g *= h * (1.0 - h);
        }

        if let Some(grads) = param_grads {
            for ((grow, &g), gb) in grads
                .weights_in
                .chunks_exact_mut(self.input_dim)
                .zip(&hidden_grad)
                .zip(grads.bias_in.iter_mut())
            {
                math::axpy(g, &trace.input, grow);
                *gb += g;
            }
        }
        if let Some(ig) = input_grad {
            for (row, &g) in self.weights_in.chunks_exact(self.input_dim).zip(&hidden_grad) {
                if g != 0.0 {
                    math::axpy(g, row, ig);
                }
            }
        }
        Ok(())
    }

    /// Applies one Adam step with `grads`.
    pub fn adam_update(&mut self, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
        let g = grads.blocks();
        state.step(&mut self.param_blocks_mut(), &g)
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights_in: vec![0.0; net.weights_in.len()],
            bias_in: vec![0.0; net.bias_in.len()],
            weights_out: vec![0.0; net.weights_out.len()],
            bias_out: vec![0.0; net.bias_out.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.weights_in.len() + self.bias_in.len() + self.weights_out.len() + self.bias_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.weights_in, &self.bias_in, &self.weights_out, &self.bias_out]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self
            .weights_in
            .iter_mut()
            .chain(&mut self.bias_in)
            .chain(&mut self.weights_out)
            .chain(&mut self.bias_out)
        {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in [
            (&mut self.weights_in, &other.weights_in),
            (&mut self.bias_in, &other.bias_in),
            (&mut self.weights_out, &other.weights_out),
            (&mut self.bias_out, &other.bias_out),
        ] {
            math::axpy(1.0, b, a);
        }
    }
}

/// Adam hyperparameters. Defaults: `alpha = 1e-4`, `beta1 = 0.5`,
/// `beta2 = 0.999`, `epsilon = 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!("invalid Adam hyperparameters: {self:?}")))
        }
    }
}

/// Per-parameter Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn for_net(config: AdamConfig, net: &Mlp) -> Self {
        Self::new(config, net.num_params())
    }

    /// One bias-corrected Adam update over `params`, block by block.
    ///
    /// Non-finite gradients are rejected before anything is touched.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        Error::check_len("adam blocks", params.len(), grads.len())?;
        let mut total = 0;
        for (p, g) in params.iter().zip(grads) {
            Error::check_len("adam block", p.len(), g.len())?;
            Error::check_finite("gradient", g)?;
            total += p.len();
        }
        Error::check_len("adam state", self.first_moment.len(), total)?;

        self.step_count += 1;
        let AdamConfig {
            alpha,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let correction1 = 1.0 - math::powi(beta1, self.step_count);
        let correction2 = 1.0 - math::powi(beta2, self.step_count);

        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.first_moment[offset..offset + p.len()];
            let v = &mut self.second_moment[offset..offset + p.len()];
            for (((theta, &grad), m), v) in p.iter_mut().zip(g.iter()).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * grad;
                *v = beta2 * *v + (1.0 - beta2) * grad * grad;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *theta -= alpha * m_hat / (math::sqrt(v_hat) + epsilon);
            }
            offset += p.len();
        }
        Ok(())
    }
}
