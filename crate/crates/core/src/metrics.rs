//! Accuracy, per-class precision / recall / F1 and macro F1.
//!
//! A prediction is `Some(class)` or `None` for a pair the discriminator
//! flagged as fake. Fake predictions count as errors and are tracked in
//! `fake_rate`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub fake_rate: f64,
    pub n_test: usize,
    pub seed: u64,
    /// `confusion[truth][predicted]`, fake predictions excluded.
    pub confusion: Vec<Vec<usize>>,
    pub fake_count: usize,
}

/// Harmonic mean with `0/0 = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_predictions(
        truth: &[usize],
        predicted: &[Option<usize>],
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        Error::check_len("predictions", truth.len(), predicted.len())?;
        if truth.is_empty() {
            return Err(Error::Data("cannot score an empty test set".into()));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        let mut fake_count = 0;
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= num_classes || p.is_some_and(|p| p >= num_classes) {
                return Err(Error::Data(format!("class index outside [0, {num_classes})")));
            }
            match p {
                Some(p) => confusion[t][p] += 1,
                None => fake_count += 1,
            }
        }

        let n = truth.len();
        let correct: usize = (0..num_classes).map(|k| confusion[k][k]).sum();
        let per_class: Vec<ClassMetrics> = (0..num_classes)
            .map(|k| {
                let tp = confusion[k][k];
                let predicted_k: usize = (0..num_classes).map(|t| confusion[t][k]).sum();
                let support = truth.iter().filter(|&&t| t == k).count();
                let precision = ratio(tp, predicted_k);
                let recall = ratio(tp, support);
                ClassMetrics {
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                    support,
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / num_classes as f64;

        Ok(Self {
            accuracy: ratio(correct, n),
            per_class,
            macro_f1,
            fake_rate: ratio(fake_count, n),
            n_test: n,
            seed,
            confusion,
            fake_count,
        })
    }

    pub fn classified_rate(&self) -> f64 {
        ratio(self.n_test - self.fake_count, self.n_test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_confusion() {
        // truth:     0 0 0 0 1 1 1 2 2 2
        // predicted: 0 0 1 F 1 1 0 2 2 1
        let truth = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2];
        let pred = [
            Some(0),
            Some(0),
            Some(1),
            None,
            Some(1),
            Some(1),
            Some(0),
            Some(2),
            Some(2),
            Some(1),
        ];
        let r = MetricsReport::from_predictions(&truth, &pred, 3, 0).unwrap();
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        assert!((r.fake_rate - 0.1).abs() < 1e-15);

        // class 0: tp 2, predicted 3, support 4 -> p 2/3, r 1/2, f1 4/7
        // class 1: tp 2, predicted 4, support 3 -> p 1/2, r 2/3, f1 4/7
        // class 2: tp 2, predicted 2, support 3 -> p 1,   r 2/3, f1 4/5
        let want = [4.0 / 7.0, 4.0 / 7.0, 0.8];
        for (c, w) in r.per_class.iter().zip(want) {
            assert!((c.f1 - w).abs() < 1e-15);
        }
        assert!((r.per_class[0].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.macro_f1 - (8.0 / 7.0 + 0.8) / 3.0).abs() < 1e-15);
        let trace: usize = (0..3).map(|k| r.confusion[k][k]).sum();
        assert_eq!(r.accuracy, trace as f64 / 10.0);
    }

    #[test]
    fn all_fake() {
        let r = MetricsReport::from_predictions(&[0, 1, 1], &[None, None, None], 2, 0).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.fake_rate, 1.0);
        assert_eq!(r.macro_f1, 0.0);
        assert_eq!(r.fake_rate + r.classified_rate(), 1.0);
    }

    #[test]
    fn perfect_predictions() {
        let t = [0, 1, 2, 1];
        let p: Vec<_> = t.iter().map(|&x| Some(x)).collect();
        let r = MetricsReport::from_predictions(&t, &p, 3, 0).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MetricsReport::from_predictions(&[], &[], 2, 0).is_err());
        assert!(MetricsReport::from_predictions(&[0], &[Some(5)], 2, 0).is_err());
        assert!(MetricsReport::from_predictions(&[0, 1], &[Some(0)], 2, 0).is_err());
    }
}
