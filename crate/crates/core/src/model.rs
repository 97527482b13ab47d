//! The three players: two conditional generators and the `(K+1)`-way discriminator.
//!
//! Input layouts are fixed:
//!
//! - generator 1 (completes view 1): `[noise (d1) ‖ view 2 (d2)]`
//! - generator 2 (completes view 2): `[noise (d2) ‖ view 1 (d1)]`
//! - discriminator: `[view 1 ‖ view 2]`, output index `K` is the fake class.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ForwardTrace, Mlp, OutputKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    One,
    Two,
}

impl View {
    pub fn other(self) -> View {
        match self {
            View::One => View::Two,
            View::Two => View::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            View::One => 1,
            View::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionKind {
    Fake,
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub kind: DecisionKind,
    pub probabilities: Vec<f64>,
}

/// Discriminator output for one pair: class probabilities and the hidden
/// sigmoid features used for feature matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrimination {
    pub probabilities: Vec<f64>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteModel {
    d1: usize,
    d2: usize,
    num_classes: usize,
    pub gen1: Mlp,
    pub gen2: Mlp,
    pub disc: Mlp,
}

impl TripartiteModel {
    /// Xavier-initialized model with `hidden_dim` units in every network.
    pub fn xavier<R: Rng + ?Sized>(
        d1: usize,
        d2: usize,
        num_classes: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(d1, d2, num_classes)?;
        let disc = Mlp::xavier(d1 + d2, hidden_dim, num_classes + 1, OutputKind::Softmax, rng)?;
        let gen1 = Mlp::xavier(d1 + d2, hidden_dim, d1, OutputKind::Linear, rng)?;
        let gen2 = Mlp::xavier(d1 + d2, hidden_dim, d2, OutputKind::Linear, rng)?;
        Self::from_networks(d1, d2, num_classes, gen1, gen2, disc)
    }

    pub fn zeros(d1: usize, d2: usize, num_classes: usize, hidden_dim: usize) -> Result<Self> {
        check_dims(d1, d2, num_classes)?;
        Self::from_networks(
            d1,
            d2,
            num_classes,
            Mlp::zeros(d1 + d2, hidden_dim, d1, OutputKind::Linear)?,
            Mlp::zeros(d1 + d2, hidden_dim, d2, OutputKind::Linear)?,
            Mlp::zeros(d1 + d2, hidden_dim, num_classes + 1, OutputKind::Softmax)?,
        )
    }

    /// Assembles a model, checking every network against `(d1, d2, K)`.
    pub fn from_networks(
        d1: usize,
        d2: usize,
        num_classes: usize,
        gen1: Mlp,
        gen2: Mlp,
        disc: Mlp,
    ) -> Result<Self> {
        check_dims(d1, d2, num_classes)?;
        for (what, net, out, kind) in [
            ("generator 1", &gen1, d1, OutputKind::Linear),
            ("generator 2", &gen2, d2, OutputKind::Linear),
            ("discriminator", &disc, num_classes + 1, OutputKind::Softmax),
        ] {
            Error::check_len(what, d1 + d2, net.input_dim())?;
            Error::check_len(what, out, net.output_dim())?;
            if net.output_kind() != kind {
                return Err(Error::Config(alloc::format!("{what} has the wrong output kind")));
            }
        }
        Ok(Self {
            d1,
            d2,
            num_classes,
            gen1,
            gen2,
            disc,
        })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Index of the fake class in the discriminator output.
    pub fn fake_index(&self) -> usize {
        self.num_classes
    }

    pub fn view_dim(&self, view: View) -> usize {
        match view {
            View::One => self.d1,
            View::Two => self.d2,
        }
    }

    pub fn generator(&self, view: View) -> &Mlp {
        match view {
            View::One => &self.gen1,
            View::Two => &self.gen2,
        }
    }

    pub fn generator_mut(&mut self, view: View) -> &mut Mlp {
        match view {
            View::One => &mut self.gen1,
            View::Two => &mut self.gen2,
        }
    }

    /// Forward pass of the generator completing `view`, keeping the trace.
    pub fn generator_trace(&self, view: View, observed_other: &[f64], noise: &[f64]) -> Result<ForwardTrace> {
        let dim = self.view_dim(view);
        Error::check_len("generator noise", dim, noise.len())?;
        Error::check_len("generator condition", self.view_dim(view.other()), observed_other.len())?;
        if noise.iter().any(|z| !(-1.0..=1.0).contains(z)) {
            return Err(Error::Data("generator noise must lie in [-1, 1]".into()));
        }
        let mut input = Vec::with_capacity(self.d1 + self.d2);
        input.extend_from_slice(noise);
        input.extend_from_slice(observed_other);
        self.generator(view).forward(&input)
    }

    /// Completes the missing `view` from the other, observed view.
    pub fn generate(&self, view: View, observed_other: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        Ok(self.generator_trace(view, observed_other, noise)?.output)
    }

    pub fn disc_input(&self, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("view 1", self.d1, x1.len())?;
        Error::check_len("view 2", self.d2, x2.len())?;
        let mut input = Vec::with_capacity(self.d1 + self.d2);
        input.extend_from_slice(x1);
        input.extend_from_slice(x2);
        Ok(input)
    }

    pub fn disc_trace(&self, x1: &[f64], x2: &[f64]) -> Result<ForwardTrace> {
        self.disc.forward(&self.disc_input(x1, x2)?)
    }

    pub fn discriminate(&self, x1: &[f64], x2: &[f64]) -> Result<Discrimination> {
        let t = self.disc_trace(x1, x2)?;
        Ok(Discrimination {
            probabilities: t.output,
            features: t.hidden_act,
        })
    }

    pub fn decide(&self, x1: &[f64], x2: &[f64]) -> Result<Decision> {
        let p = self.discriminate(x1, x2)?.probabilities;
        Ok(decide_probabilities(p))
    }
}

fn check_dims(d1: usize, d2: usize, num_classes: usize) -> Result<()> {
    if d1 == 0 || d2 == 0 || num_classes == 0 {
        return Err(Error::InvalidDimension("d1, d2 and K must be > 0"));
    }
    Ok(())
}

/// Total probability of the true classes: `1 - p[K]`, computed as the sum of
/// the first `K` entries.
pub fn aggregate_real(probabilities: &[f64]) -> Result<f64> {
    check_probability_vector(probabilities)?;
    let k = probabilities.len() - 1;
    Ok(probabilities[..k].iter().sum())
}

/// Fake iff `p[K] > sum(p[..K])`, otherwise the first class reaching the
/// maximum over `p[..K]`.
pub fn decide_probabilities(probabilities: Vec<f64>) -> Decision {
    let k = probabilities.len() - 1;
    let real: f64 = probabilities[..k].iter().sum();
    let kind = if probabilities[k] > real {
        DecisionKind::Fake
    } else {
        DecisionKind::Class(argmax(&probabilities[..k]))
    };
    Decision {
        kind,
        probabilities,
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::Distribution("need at least one class plus the fake class".into()));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Distribution("not a probability vector".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DEFAULT_HIDDEN_DIM;
    use crate::seeded_rng;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn zero_generator_outputs_zero() {
        let m = TripartiteModel::zeros(3, 4, 2, 8).unwrap();
        let out = m.generate(View::One, &[1.0, 2.0, 3.0, 4.0], &[0.5, -0.5, 0.0]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn generate_is_deterministic_and_noise_sensitive() {
        let m = TripartiteModel::xavier(3, 4, 2, 16, &mut seeded_rng(7)).unwrap();
        let x2 = [0.2, -0.1, 0.4, 1.0];
        let z = [0.3, -0.9, 0.1];
        assert_eq!(
            m.generate(View::One, &x2, &z).unwrap(),
            m.generate(View::One, &x2, &z).unwrap()
        );
        let mut rng = seeded_rng(8);
        let za: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let zb: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        assert_ne!(m.generate(View::One, &x2, &za).unwrap(), m.generate(View::One, &x2, &zb).unwrap());
    }

    #[test]
    fn generate_checks_inputs() {
        let m = TripartiteModel::zeros(3, 4, 2, 8).unwrap();
        assert!(m.generate(View::One, &[0.0; 3], &[0.0; 3]).is_err());
        assert!(m.generate(View::Two, &[0.0; 3], &[0.0; 3]).is_err());
        assert!(m.generate(View::Two, &[0.0; 3], &[0.0; 4]).is_ok());
        assert!(m.generate(View::One, &[0.0; 4], &[1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn generator_output_is_linear_in_output_weights() {
        let m = TripartiteModel::xavier(2, 3, 2, 10, &mut seeded_rng(2)).unwrap();
        let mut scaled = m.clone();
        let s = 3.5;
        for w in scaled.gen2.weights_out.iter_mut() {
            *w *= s;
        }
        let a = m.generate(View::Two, &[0.1, 0.9], &[0.5, -0.5, 0.25]).unwrap();
        let b = scaled.generate(View::Two, &[0.1, 0.9], &[0.5, -0.5, 0.25]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((s * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_discriminator_is_uniform() {
        let m = TripartiteModel::zeros(3, 3, 6, DEFAULT_HIDDEN_DIM).unwrap();
        let d = m.discriminate(&[1.0; 3], &[-1.0; 3]).unwrap();
        assert_eq!(d.probabilities.len(), 7);
        assert!(d.probabilities.iter().all(|p| (p - 1.0 / 7.0).abs() < 1e-15));
        assert_eq!(d.features.len(), 200);
    }

    #[test]
    fn discriminator_sums_to_one() {
        let m = TripartiteModel::xavier(4, 5, 3, 32, &mut seeded_rng(4)).unwrap();
        let mut rng = seeded_rng(5);
        for _ in 0..1000 {
            let x1: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x2: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p = m.discriminate(&x1, &x2).unwrap().probabilities;
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let agg = aggregate_real(&p).unwrap();
            assert!((agg + p[3] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_examples() {
        assert!((aggregate_real(&[1.0 / 7.0; 7]).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(aggregate_real(&[0.0, 0.0, 1.0]).unwrap(), 0.0);
        let p = [0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3];
        assert!((aggregate_real(&p).unwrap() - 0.7).abs() < 1e-15);
        assert!(aggregate_real(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn decision_rule_examples() {
        let mut p = vec![0.05; 6];
        p.push(0.7);
        assert_eq!(decide_probabilities(p).kind, DecisionKind::Fake);

        assert_eq!(decide_probabilities(vec![1.0 / 7.0; 7]).kind, DecisionKind::Class(0));

        // Boundary: fake mass equals the real mass, so it classifies.
        let p = vec![0.1, 0.3, 0.1, 0.5];
        assert_eq!(decide_probabilities(p).kind, DecisionKind::Class(1));
    }

    #[test]
    fn decision_shift_invariance() {
        let mut m = TripartiteModel::xavier(2, 2, 3, 12, &mut seeded_rng(10)).unwrap();
        let before = m.decide(&[0.3, 0.1], &[-0.2, 0.8]).unwrap().kind;
        for b in m.disc.bias_out.iter_mut() {
            *b += 17.0;
        }
        assert_eq!(m.decide(&[0.3, 0.1], &[-0.2, 0.8]).unwrap().kind, before);
    }
}
