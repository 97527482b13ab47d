//! Exact equilibrium checks on finite two-view distributions.
//!
//! With the aggregate `D(x) = Σ_{k<K} p_D(k | x)`, the game value is
//!
//! ```text
//! V(D) = Σ p_real log D + ½ Σ p_G1 log(1 - D) + ½ Σ p_G2 log(1 - D)
//! ```
//!
//! whose maximizer is `D* = p_real / (p_real + p_mix)` with
//! `p_mix = ½ (p_G1 + p_G2)`, and `V(D*) = -log 4 + 2 JSD(p_real ‖ p_mix)`.
//! Adding `JSD(p_G1 ‖ p_real) + JSD(p_G2 ‖ p_real)` makes `p_real = p_G1 = p_G2`
//! the only point reaching `-log 4`. Natural logarithms throughout.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Floor applied to log arguments in [`value_function`].
pub const VALUE_LOG_FLOOR: f64 = 1e-300;

/// `-log 4`, the value at equilibrium.
pub fn equilibrium_value() -> f64 {
    -math::ln(4.0)
}

/// Probability table over an `n1 × n2` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    n1: usize,
    n2: usize,
    table: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(n1: usize, n2: usize, table: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Distribution("support sizes must be > 0".into()));
        }
        Error::check_len("probability table", n1 * n2, table.len())?;
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Distribution("entries must be finite and nonnegative".into()));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Distribution(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { n1, n2, table })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(n1: usize, n2: usize, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Distribution("weights must have a positive finite sum".into()));
        }
        Self::new(n1, n2, weights.into_iter().map(|w| w / sum).collect())
    }

    /// Unit mass on cell `(i, j)`.
    pub fn point_mass(n1: usize, n2: usize, i: usize, j: usize) -> Result<Self> {
        if i >= n1 || j >= n2 {
            return Err(Error::Distribution("point mass outside the support".into()));
        }
        let mut table = alloc::vec![0.0; n1 * n2];
        table[i * n2 + j] = 1.0;
        Self::new(n1, n2, table)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.n2 + j]
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::Distribution(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

/// Aggregate discriminator restricted to the grid; entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorTable {
    n1: usize,
    n2: usize,
    table: Vec<f64>,
}

impl DiscriminatorTable {
    pub fn new(n1: usize, n2: usize, table: Vec<f64>) -> Result<Self> {
        Error::check_len("discriminator table", n1 * n2, table.len())?;
        if table.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::Distribution("discriminator entries must lie in [0, 1]".into()));
        }
        Ok(Self { n1, n2, table })
    }

    pub fn constant(n1: usize, n2: usize, value: f64) -> Result<Self> {
        Self::new(n1, n2, alloc::vec![value; n1 * n2])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Equal-weight mixture `½ (pg1 + pg2)`.
pub fn mixture(pg1: &DiscreteJoint, pg2: &DiscreteJoint) -> Result<DiscreteJoint> {
    pg1.same_shape(pg2)?;
    let table = pg1.table.iter().zip(&pg2.table).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(DiscreteJoint {
        n1: pg1.n1,
        n2: pg1.n2,
        table,
    })
}

/// Closed-form maximizer `p_real / (p_real + p_mix)`; cells outside every
/// support get 0.5.
pub fn optimal_discriminator(
    p_real: &DiscreteJoint,
    pg1: &DiscreteJoint,
    pg2: &DiscreteJoint,
) -> Result<DiscriminatorTable> {
    let mix = mixture(pg1, pg2)?;
    p_real.same_shape(&mix)?;
    let table = p_real
        .table
        .iter()
        .zip(&mix.table)
        .map(|(&r, &g)| if r + g == 0.0 { 0.5 } else { r / (r + g) })
        .collect();
    DiscriminatorTable::new(p_real.n1, p_real.n2, table)
}

/// Game value of an aggregate discriminator table. Zero-mass cells contribute
/// nothing; log arguments are floored at [`VALUE_LOG_FLOOR`].
pub fn value_function(
    d: &DiscriminatorTable,
    p_real: &DiscreteJoint,
    pg1: &DiscreteJoint,
    pg2: &DiscreteJoint,
) -> Result<f64> {
    p_real.same_shape(pg1)?;
    p_real.same_shape(pg2)?;
    if d.shape() != p_real.shape() {
        return Err(Error::Distribution("discriminator table shape mismatch".into()));
    }
    let log = |x: f64| math::ln(x.max(VALUE_LOG_FLOOR));
    let mut v = 0.0;
    for (c, &dc) in d.table.iter().enumerate() {
        let (r, g1, g2) = (p_real.table[c], pg1.table[c], pg2.table[c]);
        if r > 0.0 {
            v += r * log(dc);
        }
        let g = 0.5 * g1 + 0.5 * g2;
        if g > 0.0 {
            v += g * log(1.0 - dc);
        }
    }
    Ok(v)
}

fn kl_tables(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi == 0.0 {
                return f64::INFINITY;
            }
            sum += pi * math::ln(pi / qi);
        }
    }
    sum
}

/// `KL(p ‖ q)`; `f64::INFINITY` when `p` puts mass where `q` has none.
pub fn kl(p: &DiscreteJoint, q: &DiscreteJoint) -> Result<f64> {
    p.same_shape(q)?;
    Ok(kl_tables(&p.table, &q.table))
}

/// Jensen-Shannon divergence, in `[0, log 2]`.
pub fn jsd(p: &DiscreteJoint, q: &DiscreteJoint) -> Result<f64> {
    p.same_shape(q)?;
    let m: Vec<f64> = p.table.iter().zip(&q.table).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(0.5 * kl_tables(&p.table, &m) + 0.5 * kl_tables(&q.table, &m))
}

/// `V(D) + JSD(p_G1 ‖ p_real) + JSD(p_G2 ‖ p_real)`.
pub fn augmented_value(
    d: &DiscriminatorTable,
    p_real: &DiscreteJoint,
    pg1: &DiscreteJoint,
    pg2: &DiscreteJoint,
) -> Result<f64> {
    Ok(value_function(d, p_real, pg1, pg2)? + jsd(pg1, p_real)? + jsd(pg2, p_real)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    /// `V(D*)`.
    pub value_at_optimum: f64,
    /// `JSD(p_real ‖ p_mix)`.
    pub jsd_to_mixture: f64,
    /// `|V(D*) - (-log 4 + 2 JSD)|`.
    pub identity_residual: f64,
    /// `|V(D*) + log 4|`.
    pub gap_to_equilibrium: f64,
    /// `V̄(D*)`.
    pub augmented_value: f64,
    pub at_equilibrium: bool,
    pub at_nash_equilibrium: bool,
    pub tol: f64,
    /// Identity holds within `tol` and `V(D*) = -log 4` exactly when the JSD vanishes.
    pub passed: bool,
}

/// Checks `V(D*) = -log 4 + 2 JSD(p_real ‖ p_mix)` and that the value sits at
/// `-log 4` iff the divergence is zero, all within `tol`.
pub fn check_theorem(
    p_real: &DiscreteJoint,
    pg1: &DiscreteJoint,
    pg2: &DiscreteJoint,
    tol: f64,
) -> Result<TheoremReport> {
    let mix = mixture(pg1, pg2)?;
    let d_star = optimal_discriminator(p_real, pg1, pg2)?;
    let value = value_function(&d_star, p_real, pg1, pg2)?;
    let js = jsd(p_real, &mix)?;
    let base = equilibrium_value();
    let identity_residual = (value - (base + 2.0 * js)).abs();
    let gap = (value - base).abs();
    let at_equilibrium = js <= tol;
    let augmented = augmented_value(&d_star, p_real, pg1, pg2)?;
    let at_nash_equilibrium = (augmented - base).abs() <= tol;
    let passed = identity_residual <= tol && (gap <= tol) == at_equilibrium;
    Ok(TheoremReport {
        value_at_optimum: value,
        jsd_to_mixture: js,
        identity_residual,
        gap_to_equilibrium: gap,
        augmented_value: augmented,
        at_equilibrium,
        at_nash_equilibrium,
        tol,
        passed,
    })
}
