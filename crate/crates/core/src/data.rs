//! Multiview examples and the training partition.
//!
//! A training set is split three ways: pairs with both views (`s_full`),
//! pairs whose view 1 is missing (`s_missing1`, completed by generator 1) and
//! pairs whose view 2 is missing (`s_missing2`, completed by generator 2).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::View;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewExample {
    pub view1: Option<Vec<f64>>,
    pub view2: Option<Vec<f64>>,
    /// Class index in `[0, K)`; see [`MultiviewExample::one_hot`].
    pub label: usize,
}

impl MultiviewExample {
    pub fn new(view1: Option<Vec<f64>>, view2: Option<Vec<f64>>, label: usize) -> Result<Self> {
        if view1.is_none() && view2.is_none() {
            return Err(Error::Data("an example needs at least one observed view".into()));
        }
        Ok(Self { view1, view2, label })
    }

    pub fn complete(view1: Vec<f64>, view2: Vec<f64>, label: usize) -> Self {
        Self {
            view1: Some(view1),
            view2: Some(view2),
            label,
        }
    }

    pub fn view(&self, view: View) -> Option<&[f64]> {
        match view {
            View::One => self.view1.as_deref(),
            View::Two => self.view2.as_deref(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.view1.is_some() && self.view2.is_some()
    }

    pub fn one_hot(&self, num_classes: usize) -> Vec<f64> {
        let mut y = vec![0.0; num_classes];
        y[self.label] = 1.0;
        y
    }

    /// Copy with `view` deleted.
    pub fn without(&self, view: View) -> Self {
        let mut out = self.clone();
        match view {
            View::One => out.view1 = None,
            View::Two => out.view2 = None,
        }
        out
    }

    /// Scales every observed view to unit Euclidean norm (zero views are left alone).
    pub fn l2_normalize(&mut self) {
        for v in [self.view1.as_mut(), self.view2.as_mut()].into_iter().flatten() {
            let norm = math::sqrt(math::dot(v, v));
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    fn validate(&self, d1: usize, d2: usize, num_classes: usize) -> Result<()> {
        if self.view1.is_none() && self.view2.is_none() {
            return Err(Error::Data("an example needs at least one observed view".into()));
        }
        if self.label >= num_classes {
            return Err(Error::Data(format!("label {} outside [0, {num_classes})", self.label)));
        }
        if let Some(v) = &self.view1 {
            Error::check_len("view 1", d1, v.len())?;
            Error::check_finite("view 1", v)?;
        }
        if let Some(v) = &self.view2 {
            Error::check_len("view 2", d2, v.len())?;
            Error::check_finite("view 2", v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedDataset {
    d1: usize,
    d2: usize,
    num_classes: usize,
    s_full: Vec<MultiviewExample>,
    s_missing1: Vec<MultiviewExample>,
    s_missing2: Vec<MultiviewExample>,
}

impl PartitionedDataset {
    pub fn empty(d1: usize, d2: usize, num_classes: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 || num_classes == 0 {
            return Err(Error::InvalidDimension("d1, d2 and K must be > 0"));
        }
        Ok(Self {
            d1,
            d2,
            num_classes,
            s_full: Vec::new(),
            s_missing1: Vec::new(),
            s_missing2: Vec::new(),
        })
    }

    /// Routes each example to its subset from which views are present.
    pub fn from_examples(
        d1: usize,
        d2: usize,
        num_classes: usize,
        examples: impl IntoIterator<Item = MultiviewExample>,
    ) -> Result<Self> {
        let mut ds = Self::empty(d1, d2, num_classes)?;
        for ex in examples {
            ds.push(ex)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, example: MultiviewExample) -> Result<()> {
        example.validate(self.d1, self.d2, self.num_classes)?;
        match (&example.view1, &example.view2) {
            (Some(_), Some(_)) => self.s_full.push(example),
            (None, Some(_)) => self.s_missing1.push(example),
            (Some(_), None) => self.s_missing2.push(example),
            (None, None) => unreachable!("validated above"),
        }
        Ok(())
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

    pub fn s_full(&self) -> &[MultiviewExample] {
        &self.s_full
    }

    pub fn s_missing1(&self) -> &[MultiviewExample] {
        &self.s_missing1
    }

    pub fn s_missing2(&self) -> &[MultiviewExample] {
        &self.s_missing2
    }

    /// Subset whose `view` is missing.
    pub fn missing(&self, view: View) -> &[MultiviewExample] {
        match view {
            View::One => &self.s_missing1,
            View::Two => &self.s_missing2,
        }
    }

    /// `(m_F, m_1, m_2)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.s_full.len(), self.s_missing1.len(), self.s_missing2.len())
    }

    pub fn len(&self) -> usize {
        self.s_full.len() + self.s_missing1.len() + self.s_missing2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All examples: full pairs first, then view-1-missing, then view-2-missing.
    pub fn iter(&self) -> impl Iterator<Item = &MultiviewExample> {
        self.s_full.iter().chain(&self.s_missing1).chain(&self.s_missing2)
    }

    pub fn l2_normalize(&mut self) {
        for ex in self
            .s_full
            .iter_mut()
            .chain(&mut self.s_missing1)
            .chain(&mut self.s_missing2)
        {
            ex.l2_normalize();
        }
    }
}

/// Draws disjoint subsets of sizes `m_full`, `m_missing1`, `m_missing2` from a
/// pool of complete pairs, deletes the relevant view in the two missing
/// subsets and returns the untouched remainder as the test set.
pub fn split_for_protocol<R: Rng + ?Sized>(
    pool: &[MultiviewExample],
    d1: usize,
    d2: usize,
    num_classes: usize,
    m_full: usize,
    m_missing1: usize,
    m_missing2: usize,
    rng: &mut R,
) -> Result<(PartitionedDataset, Vec<MultiviewExample>)> {
    let needed = m_full + m_missing1 + m_missing2;
    if pool.len() < needed {
        return Err(Error::Config(format!(
            "pool of {} complete pairs cannot supply {needed} training examples",
            pool.len()
        )));
    }
    if let Some(i) = pool.iter().position(|e| !e.is_complete()) {
        return Err(Error::Data(format!("pool example {i} is not a complete pair")));
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);

    let mut ds = PartitionedDataset::empty(d1, d2, num_classes)?;
    for (n, &i) in order[..needed].iter().enumerate() {
        let ex = &pool[i];
        let ex = if n < m_full {
            ex.clone()
        } else if n < m_full + m_missing1 {
            ex.without(View::One)
        } else {
            ex.without(View::Two)
        };
        ds.push(ex)?;
    }
    let test = order[needed..].iter().map(|&i| pool[i].clone()).collect::<Vec<_>>();
    for ex in &test {
        ex.validate(d1, d2, num_classes)?;
    }
    Ok((ds, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn pool(n: usize) -> Vec<MultiviewExample> {
        (0..n)
            .map(|i| MultiviewExample::complete(vec![i as f64, 0.0], vec![0.0, i as f64, 1.0], i % 3))
            .collect()
    }

    #[test]
    fn rejects_example_without_views() {
        assert!(MultiviewExample::new(None, None, 0).is_err());
        let mut ds = PartitionedDataset::empty(2, 3, 3).unwrap();
        let bad = MultiviewExample {
            view1: None,
            view2: None,
            label: 0,
        };
        assert!(ds.push(bad).is_err());
    }

    #[test]
    fn rejects_bad_label_and_dims() {
        let mut ds = PartitionedDataset::empty(2, 3, 3).unwrap();
        assert!(ds.push(MultiviewExample::complete(vec![0.0; 2], vec![0.0; 3], 3)).is_err());
        assert!(ds.push(MultiviewExample::complete(vec![0.0; 3], vec![0.0; 3], 0)).is_err());
        assert!(ds.push(MultiviewExample::complete(vec![0.0; 2], vec![0.0; 3], 2)).is_ok());
    }

    #[test]
    fn routes_by_missing_view() {
        let ds = PartitionedDataset::from_examples(
            2,
            3,
            3,
            [
                MultiviewExample::complete(vec![0.0; 2], vec![0.0; 3], 0),
                MultiviewExample::new(None, Some(vec![0.0; 3]), 1).unwrap(),
                MultiviewExample::new(Some(vec![0.0; 2]), None, 2).unwrap(),
                MultiviewExample::new(Some(vec![0.0; 2]), None, 2).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(ds.sizes(), (1, 1, 2));
        assert_eq!(ds.len(), 4);
        assert!(ds.s_missing1()[0].view1.is_none());
        assert!(ds.s_missing2().iter().all(|e| e.view2.is_none()));
    }

    #[test]
    fn one_hot_has_single_one() {
        let ex = MultiviewExample::complete(vec![0.0], vec![0.0], 2);
        assert_eq!(ex.one_hot(4), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn normalize_views() {
        let mut ex = MultiviewExample::new(Some(vec![3.0, 4.0]), Some(vec![0.0, 0.0]), 0).unwrap();
        ex.l2_normalize();
        assert_eq!(ex.view1.unwrap(), vec![0.6, 0.8]);
        assert_eq!(ex.view2.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn split_whole_pool_into_full() {
        let p = pool(10);
        let (ds, test) = split_for_protocol(&p, 2, 3, 3, 10, 0, 0, &mut seeded_rng(0)).unwrap();
        assert!(test.is_empty());
        assert_eq!(ds.sizes(), (10, 0, 0));
    }

    #[test]
    fn split_sizes_arithmetic() {
        let p = pool(20_000);
        let (ds, test) = split_for_protocol(&p, 2, 3, 3, 300, 6000, 6000, &mut seeded_rng(1)).unwrap();
        assert_eq!(ds.sizes(), (300, 6000, 6000));
        assert_eq!(test.len(), 7700);
    }

    #[test]
    fn split_disjoint_and_seed_dependent() {
        let p = pool(100);
        let key = |e: &MultiviewExample| match (&e.view1, &e.view2) {
            (Some(a), _) => a[0] as usize,
            (None, Some(b)) => b[1] as usize,
            _ => unreachable!(),
        };
        let mut layouts = vec![];
        for seed in [3, 4] {
            let (ds, test) = split_for_protocol(&p, 2, 3, 3, 10, 20, 30, &mut seeded_rng(seed)).unwrap();
            let mut ids: Vec<usize> = ds.iter().chain(test.iter()).map(key).collect();
            let full: Vec<usize> = ds.s_full().iter().map(key).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 100);
            assert_eq!(test.len(), 40);
            layouts.push(full);
        }
        assert_ne!(layouts[0], layouts[1]);
    }

    #[test]
    fn split_insufficient_pool() {
        let p = pool(5);
        assert!(split_for_protocol(&p, 2, 3, 3, 3, 2, 1, &mut seeded_rng(0)).is_err());
    }
}
