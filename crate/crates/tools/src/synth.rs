//! Gaussian two-view classification task with an exactly known Bayes rate.
//!
//! For class `y` and a shared latent `u ~ N(0, I_r)`:
//!
//! ```text
//! view_v = mean_v[y] + c · A_v u + σ ε_v,    ε_v ~ N(0, I)
//! ```
//!
//! `A_v` are fixed random mixing matrices (entries `N(0, 1/r)`) and
//! `c = view_correlation`. Conditioned on the class the complete pair is
//! Gaussian with the shared covariance `Σ = c² A Aᵀ + σ² I`, so the Bayes rule
//! is linear. The Bayes accuracy is `Φ(Δ/2)` for two classes (`Δ` the
//! Mahalanobis distance between the means) and a Monte-Carlo estimate of the
//! exact posterior rule otherwise.

use mvgan_core::data::split_for_protocol;
use mvgan_core::{MultiviewExample, PartitionedDataset, View};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Monte-Carlo sample count for the Bayes accuracy when `K > 2`.
pub const BAYES_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub d1: usize,
    pub d2: usize,
    pub class_means1: Vec<Vec<f64>>,
    pub class_means2: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub view_correlation: f64,
    pub latent_dim: usize,
    pub m_full: usize,
    pub m_missing1: usize,
    pub m_missing2: usize,
    pub m_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BayesTarget {
    Complete,
    Single(View),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: PartitionedDataset,
    pub test: Vec<MultiviewExample>,
    /// Best achievable accuracy on complete pairs.
    pub bayes_accuracy: f64,
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl SyntheticSpec {
    /// Three classes, 20 + 20 dimensions, view 2 the weaker view.
    pub fn reference_task(seed: u64) -> Self {
        Self {
            num_classes: 3,
            d1: 20,
            d2: 20,
            class_means1: Self::axis_means(3, 20, 3.0).expect("3 <= 20"),
            class_means2: Self::axis_means(3, 20, 1.5).expect("3 <= 20"),
            noise_sigma: 1.0,
            view_correlation: 0.5,
            latent_dim: 5,
            m_full: 50,
            m_missing1: 500,
            m_missing2: 500,
            m_test: 1000,
            seed,
        }
    }

    /// Class `k` sits at `separation · e_k`; needs `num_classes <= dim`.
    pub fn axis_means(num_classes: usize, dim: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
        if num_classes > dim {
            return Err(config_err("separation", "axis means need num_classes <= view dimension"));
        }
        Ok((0..num_classes)
            .map(|k| {
                let mut m = vec![0.0; dim];
                m[k] = separation;
                m
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.d1 == 0 || self.d2 == 0 || self.latent_dim == 0 {
            return Err(config_err("dims", "num_classes, d1, d2 and latent_dim must be > 0"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(config_err("noise_sigma", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.view_correlation) {
            return Err(config_err("view_correlation", "must lie in [0, 1]"));
        }
        for (key, means, dim) in [
            ("class_means1", &self.class_means1, self.d1),
            ("class_means2", &self.class_means2, self.d2),
        ] {
            if means.len() != self.num_classes || means.iter().any(|m| m.len() != dim) {
                return Err(config_err(key, format!("need {} means of length {dim}", self.num_classes)));
            }
            if means.iter().flatten().any(|x| !x.is_finite()) {
                return Err(config_err(key, "means must be finite"));
            }
        }
        // One view may be uninformative, but the pair must tell classes apart.
        for a in 0..self.num_classes {
            for b in a + 1..self.num_classes {
                if self.class_means1[a] == self.class_means1[b] && self.class_means2[a] == self.class_means2[b] {
                    return Err(config_err("class_means", format!("classes {a} and {b} share a mean in both views")));
                }
            }
        }
        Ok(())
    }

    fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    fn joint_mean(&self, k: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.class_means1[k].iter().chain(&self.class_means2[k]).copied(),
        )
    }
}

/// Stacked mixing matrix `[A_1; A_2]` of shape `(d1 + d2, latent_dim)`.
fn draw_mixing<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> DMatrix<f64> {
    let scale = 1.0 / (spec.latent_dim as f64).sqrt();
    DMatrix::from_fn(spec.dim(), spec.latent_dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

fn covariance(spec: &SyntheticSpec, mixing: &DMatrix<f64>) -> DMatrix<f64> {
    let c2 = spec.view_correlation * spec.view_correlation;
    let s2 = spec.noise_sigma * spec.noise_sigma;
    mixing * mixing.transpose() * c2 + DMatrix::identity(spec.dim(), spec.dim()) * s2
}

fn draw_example<R: Rng + ?Sized>(spec: &SyntheticSpec, mixing: &DMatrix<f64>, rng: &mut R) -> MultiviewExample {
    let label = rng.random_range(0..spec.num_classes);
    let u = DVector::from_fn(spec.latent_dim, |_, _| StandardNormal.sample(rng));
    let shared = mixing * u * spec.view_correlation;
    let mut x: Vec<f64> = spec.joint_mean(label).iter().copied().collect();
    for (i, xi) in x.iter_mut().enumerate() {
        let e: f64 = StandardNormal.sample(rng);
        *xi += shared[i] + spec.noise_sigma * e;
    }
    let view2 = x.split_off(spec.d1);
    MultiviewExample::complete(x, view2, label)
}

/// Draws the task: a pool of `m_full + m_missing1 + m_missing2 + m_test`
/// complete pairs split by [`split_for_protocol`], plus the Bayes accuracy.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = mvgan_core::seeded_rng(spec.seed);
    let mixing = draw_mixing(spec, &mut rng);
    let total = spec.m_full + spec.m_missing1 + spec.m_missing2 + spec.m_test;
    let pool: Vec<MultiviewExample> = (0..total).map(|_| draw_example(spec, &mixing, &mut rng)).collect();
    let (train, test) = split_for_protocol(
        &pool,
        spec.d1,
        spec.d2,
        spec.num_classes,
        spec.m_full,
        spec.m_missing1,
        spec.m_missing2,
        &mut rng,
    )?;
    let bayes_accuracy = bayes_accuracy_with(spec, &mixing, BayesTarget::Complete)?;
    Ok(SyntheticData {
        train,
        test,
        bayes_accuracy,
    })
}

/// Bayes accuracy of `target` (complete pairs or one view alone) for the
/// mixing matrices `spec.seed` produces.
pub fn bayes_accuracy(spec: &SyntheticSpec, target: BayesTarget) -> Result<f64> {
    spec.validate()?;
    let mixing = draw_mixing(spec, &mut mvgan_core::seeded_rng(spec.seed));
    bayes_accuracy_with(spec, &mixing, target)
}

fn bayes_accuracy_with(spec: &SyntheticSpec, mixing: &DMatrix<f64>, target: BayesTarget) -> Result<f64> {
    let coords: Vec<usize> = match target {
        BayesTarget::Complete => (0..spec.dim()).collect(),
        BayesTarget::Single(View::One) => (0..spec.d1).collect(),
        BayesTarget::Single(View::Two) => (spec.d1..spec.dim()).collect(),
    };
    let full_cov = covariance(spec, mixing);
    let cov = full_cov.select_rows(&coords).select_columns(&coords);
    let means: Vec<DVector<f64>> = (0..spec.num_classes)
        .map(|k| spec.joint_mean(k).select_rows(&coords))
        .collect();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| config_err("noise_sigma", "class covariance is not positive definite"))?;

    if spec.num_classes == 1 {
        return Ok(1.0);
    }
    if spec.num_classes == 2 {
        let diff = &means[0] - &means[1];
        let mahalanobis = diff.dot(&chol.solve(&diff)).max(0.0).sqrt();
        let normal = Normal::standard();
        return Ok(normal.cdf(mahalanobis / 2.0));
    }

    // Linear discriminants g_k(x) = w_kᵀ x - ½ μ_kᵀ w_k with w_k = Σ⁻¹ μ_k.
    let weights: Vec<DVector<f64>> = means.iter().map(|m| chol.solve(m)).collect();
    let offsets: Vec<f64> = means.iter().zip(&weights).map(|(m, w)| 0.5 * m.dot(w)).collect();
    let lower = chol.l();
    let mut rng = mvgan_core::seeded_rng(spec.seed);
    rng.set_stream(7);
    let mut correct = 0usize;
    for _ in 0..BAYES_MC_SAMPLES {
        let y = rng.random_range(0..spec.num_classes);
        let e = DVector::from_fn(coords.len(), |_, _| StandardNormal.sample(&mut rng));
        let x = &means[y] + &lower * e;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, (w, o)) in weights.iter().zip(&offsets).enumerate() {
            let s = w.dot(&x) - o;
            if s > best_score {
                best_score = s;
                best = k;
            }
        }
        correct += (best == y) as usize;
    }
    Ok(correct as f64 / BAYES_MC_SAMPLES as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, sep1: f64, sep2: f64, sigma: f64, corr: f64) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: k,
            d1: 4,
            d2: 3,
            class_means1: SyntheticSpec::axis_means(k, 4, sep1).unwrap(),
            class_means2: SyntheticSpec::axis_means(k, 3, sep2).unwrap(),
            noise_sigma: sigma,
            view_correlation: corr,
            latent_dim: 2,
            m_full: 10,
            m_missing1: 20,
            m_missing2: 30,
            m_test: 40,
            seed: 5,
        }
    }

    #[test]
    fn two_class_closed_form() {
        // ±μ, isotropic noise: accuracy is Φ(‖μ‖ / σ).
        let mu1 = vec![0.6, -0.2, 0.1, 0.0];
        let mu2 = vec![0.3, 0.0, 0.4];
        let mut s = spec(2, 1.0, 1.0, 0.8, 0.0);
        s.class_means1 = vec![mu1.clone(), mu1.iter().map(|x| -x).collect()];
        s.class_means2 = vec![mu2.clone(), mu2.iter().map(|x| -x).collect()];
        let norm = mu1.iter().chain(&mu2).map(|x| x * x).sum::<f64>().sqrt();
        let want = Normal::standard().cdf(norm / 0.8);
        let got = bayes_accuracy(&s, BayesTarget::Complete).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn vanishing_noise_is_separable() {
        let s = spec(3, 1.0, 1.0, 1e-4, 0.0);
        assert_eq!(generate_synthetic(&s).unwrap().bayes_accuracy, 1.0);
        let s2 = spec(2, 1.0, 1.0, 1e-4, 0.0);
        assert_eq!(bayes_accuracy(&s2, BayesTarget::Complete).unwrap(), 1.0);
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form_for_two_classes() {
        // Run the K = 3 estimator on a task whose third class is far away.
        let mut s = spec(3, 1.0, 1.0, 1.0, 0.5);
        s.class_means1[2] = vec![40.0, 0.0, 0.0, 40.0];
        let three = bayes_accuracy(&s, BayesTarget::Complete).unwrap();
        let mut two = s.clone();
        two.num_classes = 2;
        two.class_means1.truncate(2);
        two.class_means2.truncate(2);
        let closed = bayes_accuracy(&two, BayesTarget::Complete).unwrap();
        // Class 2 is always right; the other two are confused like in the
        // two-class task.
        let want = (2.0 * closed + 1.0) / 3.0;
        assert!((three - want).abs() < 0.01, "{three} vs {want}");
    }

    #[test]
    fn sizes_and_determinism() {
        let s = spec(3, 2.0, 1.0, 1.0, 0.5);
        let a = generate_synthetic(&s).unwrap();
        let b = generate_synthetic(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.sizes(), (10, 20, 30));
        assert_eq!(a.test.len(), 40);
        assert!(a.test.iter().all(|e| e.is_complete()));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(3, 1.0, 1.0, 1.0, 0.0);
        s.noise_sigma = 0.0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(3, 1.0, 1.0, 1.0, 0.0);
        s.class_means2[1] = s.class_means2[0].clone();
        assert!(generate_synthetic(&s).is_ok());
        s.class_means1[1] = s.class_means1[0].clone();
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(3, 1.0, 1.0, 1.0, 0.0);
        s.view_correlation = 1.5;
        assert!(generate_synthetic(&s).is_err());
        assert!(SyntheticSpec::axis_means(5, 3, 1.0).is_err());
    }

    #[test]
    fn uncorrelated_views_are_conditionally_independent() {
        let mut s = spec(2, 2.0, 2.0, 1.0, 0.0);
        s.m_full = 10_000;
        s.m_missing1 = 0;
        s.m_missing2 = 0;
        s.m_test = 0;
        let data = generate_synthetic(&s).unwrap();
        let residual = |e: &MultiviewExample, v: View, i: usize| {
            let means = if v == View::One { &s.class_means1 } else { &s.class_means2 };
            e.view(v).unwrap()[i] - means[e.label][i]
        };
        let n = data.train.s_full().len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for e in data.train.s_full() {
            let (a, b) = (residual(e, View::One, 0), residual(e, View::Two, 0));
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        let corr = (sxy / n) / ((sxx / n).sqrt() * (syy / n).sqrt());
        assert!(corr.abs() < 0.05, "cross-view correlation {corr}");
    }
}
