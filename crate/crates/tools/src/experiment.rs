//! Repeated split/train/evaluate runs with per-repeat derived seeds.

use std::fmt::Write as _;
use std::path::PathBuf;

use mvgan_core::data::split_for_protocol;
use mvgan_core::eval::{evaluate, train_singleview_baseline, Scenario};
use mvgan_core::metrics::MetricsReport;
use mvgan_core::train::train;
use mvgan_core::{seeded_rng, MultiviewExample, PartitionedDataset, TrainConfig, TripartiteModel, View};

use crate::config::scenario_name;
use crate::error::{Error, Result};
use crate::format::read_multiview;
use crate::synth::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A fresh synthetic draw per repeat; `seed` is replaced by the repeat seed.
    Synthetic(SyntheticSpec),
    /// Complete pairs of a multiview file, re-split every repeat; the rest is the test set.
    File {
        path: PathBuf,
        m_full: usize,
        m_missing1: usize,
        m_missing2: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_repeats: usize,
    /// Evaluated on the same trained model; the first is the primary scenario.
    pub scenarios: Vec<Scenario>,
    pub source: DataSource,
    /// `train.seed` is the master seed; repeat `r` uses `seed + r`.
    pub train: TrainConfig,
    pub hidden_dim: usize,
    pub baseline: bool,
    pub normalize: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::Config {
                key: "n_repeats".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config {
                key: "scenario".into(),
                message: "at least one scenario".into(),
            });
        }
        if let DataSource::Synthetic(s) = &self.source {
            s.validate()?;
        }
        Ok(self.train.validate()?)
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.train.seed.wrapping_add(repeat as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub scenarios: Vec<(Scenario, MetricsReport)>,
    /// Single-view classifiers for view 1 and view 2.
    pub baselines: Option<[MetricsReport; 2]>,
    pub bayes_accuracy: Option<f64>,
}

impl RepeatResult {
    /// Named metric values in CSV column order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (s, r) in &self.scenarios {
            let n = scenario_name(*s);
            out.push((format!("{n}_accuracy"), r.accuracy));
            out.push((format!("{n}_macro_f1"), r.macro_f1));
            out.push((format!("{n}_fake_rate"), r.fake_rate));
        }
        if let Some(b) = &self.baselines {
            for (v, r) in b.iter().enumerate() {
                out.push((format!("baseline{}_accuracy", v + 1), r.accuracy));
                out.push((format!("baseline{}_macro_f1", v + 1), r.macro_f1));
            }
        }
        if let Some(b) = self.bayes_accuracy {
            out.push(("bayes_accuracy".into(), b));
        }
        out
    }

    pub fn primary(&self) -> &MetricsReport {
        &self.scenarios[0].1
    }

    /// Accuracy of the weaker single-view classifier.
    pub fn weaker_baseline_accuracy(&self) -> Option<f64> {
        self.baselines.as_ref().map(|[a, b]| a.accuracy.min(b.accuracy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub columns: Vec<String>,
    pub repeats: Vec<RepeatResult>,
    pub mean: Vec<f64>,
    /// Population standard deviation (0 for a single repeat).
    pub std: Vec<f64>,
}

impl ExperimentReport {
    fn from_repeats(repeats: Vec<RepeatResult>) -> Self {
        let columns: Vec<String> = repeats[0].metrics().into_iter().map(|(k, _)| k).collect();
        let table: Vec<Vec<f64>> = repeats
            .iter()
            .map(|r| r.metrics().into_iter().map(|(_, v)| v).collect())
            .collect();
        let n = table.len() as f64;
        let mean: Vec<f64> = (0..columns.len())
            .map(|c| table.iter().map(|row| row[c]).sum::<f64>() / n)
            .collect();
        let std = (0..columns.len())
            .map(|c| (table.iter().map(|row| (row[c] - mean[c]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Self {
            columns,
            repeats,
            mean,
            std,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.repeats.iter().map(|r| r.metrics()[i].1).collect())
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == name).map(|i| self.mean[i])
    }

    /// One row per repeat, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("repeat,seed,{}\n", self.columns.join(","));
        for r in &self.repeats {
            let _ = write!(out, "{},{}", r.repeat, r.seed);
            for (_, v) in r.metrics() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        for (label, values) in [("mean", &self.mean), ("std", &self.std)] {
            out.push_str(label);
            out.push(',');
            for v in values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

struct RepeatData {
    train: PartitionedDataset,
    test: Vec<MultiviewExample>,
    bayes_accuracy: Option<f64>,
}

fn load_repeat(spec: &ExperimentSpec, file_pool: Option<&FilePool>, seed: u64) -> Result<RepeatData> {
    let mut data = match (&spec.source, file_pool) {
        (DataSource::Synthetic(s), _) => {
            let d = generate_synthetic(&SyntheticSpec { seed, ..s.clone() })?;
            RepeatData {
                train: d.train,
                test: d.test,
                bayes_accuracy: Some(d.bayes_accuracy),
            }
        }
        (
            DataSource::File {
                m_full,
                m_missing1,
                m_missing2,
                ..
            },
            Some(p),
        ) => {
            let (train, test) = split_for_protocol(
                &p.pool,
                p.d1,
                p.d2,
                p.num_classes,
                *m_full,
                *m_missing1,
                *m_missing2,
                &mut seeded_rng(seed),
            )?;
            RepeatData {
                train,
                test,
                bayes_accuracy: None,
            }
        }
        (DataSource::File { .. }, None) => unreachable!("file pool loaded before the repeats"),
    };
    if spec.normalize {
        data.train.l2_normalize();
        data.test.iter_mut().for_each(MultiviewExample::l2_normalize);
    }
    Ok(data)
}

struct FilePool {
    d1: usize,
    d2: usize,
    num_classes: usize,
    pool: Vec<MultiviewExample>,
}

/// One repeat: data, game training, scenario evaluation, optional baselines.
pub fn run_repeat(spec: &ExperimentSpec, repeat: usize) -> Result<RepeatResult> {
    let pool = load_file_pool(spec)?;
    run_repeat_inner(spec, pool.as_ref(), repeat)
}

fn load_file_pool(spec: &ExperimentSpec) -> Result<Option<FilePool>> {
    let DataSource::File { path, .. } = &spec.source else {
        return Ok(None);
    };
    let f = read_multiview(path)?;
    Ok(Some(FilePool {
        d1: f.d1,
        d2: f.d2,
        num_classes: f.num_classes,
        pool: f.examples.into_iter().filter(MultiviewExample::is_complete).collect(),
    }))
}

fn run_repeat_inner(spec: &ExperimentSpec, pool: Option<&FilePool>, repeat: usize) -> Result<RepeatResult> {
    let seed = spec.repeat_seed(repeat);
    let data = load_repeat(spec, pool, seed)?;
    let config = TrainConfig { seed, ..spec.train.clone() };
    let ds = &data.train;

    let mut model = TripartiteModel::xavier(ds.d1(), ds.d2(), ds.num_classes(), spec.hidden_dim, &mut seeded_rng(seed))?;
    train(&mut model, ds, &config, Some(&data.test))?;

    let scenarios = spec
        .scenarios
        .iter()
        .map(|&s| Ok((s, evaluate(&model, &data.test, s, seed)?)))
        .collect::<Result<Vec<_>>>()?;

    let baselines = if spec.baseline {
        let (_, b1) = train_singleview_baseline(View::One, ds, &config, spec.hidden_dim, &data.test)?;
        let (_, b2) = train_singleview_baseline(View::Two, ds, &config, spec.hidden_dim, &data.test)?;
        Some([b1, b2])
    } else {
        None
    };

    Ok(RepeatResult {
        repeat,
        seed,
        scenarios,
        baselines,
        bayes_accuracy: data.bayes_accuracy,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_experiment_with(spec, |_| {})
}

/// Runs every repeat in order; `on_repeat` sees each result as it lands.
/// A failing repeat aborts the run with its index.
pub fn run_experiment_with<F: FnMut(&RepeatResult)>(spec: &ExperimentSpec, mut on_repeat: F) -> Result<ExperimentReport> {
    spec.validate()?;
    let pool = load_file_pool(spec)?;
    let mut repeats = Vec::with_capacity(spec.n_repeats);
    for repeat in 0..spec.n_repeats {
        let r = run_repeat_inner(spec, pool.as_ref(), repeat).map_err(|e| Error::Repeat {
            repeat,
            source: Box::new(e),
        })?;
        on_repeat(&r);
        repeats.push(r);
    }
    Ok(ExperimentReport::from_repeats(repeats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(n_repeats: usize) -> ExperimentSpec {
        let synth = SyntheticSpec {
            num_classes: 2,
            d1: 2,
            d2: 2,
            class_means1: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            class_means2: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            noise_sigma: 0.5,
            view_correlation: 0.3,
            latent_dim: 1,
            m_full: 10,
            m_missing1: 10,
            m_missing2: 10,
            m_test: 20,
            seed: 0,
        };
        ExperimentSpec {
            n_repeats,
            scenarios: vec![Scenario::TestComplete, Scenario::TestOnView1Generated],
            source: DataSource::Synthetic(synth),
            train: TrainConfig {
                iterations: 5,
                minibatch_size: 4,
                seed: 11,
                ..TrainConfig::default()
            },
            hidden_dim: 4,
            baseline: true,
            normalize: false,
        }
    }

    #[test]
    fn single_repeat_has_zero_spread() {
        let r = run_experiment(&tiny_spec(1)).unwrap();
        assert!(r.std.iter().all(|&s| s == 0.0));
        assert_eq!(r.mean, r.repeats[0].metrics().into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    }

    #[test]
    fn same_master_seed_same_report() {
        let a = run_experiment(&tiny_spec(2)).unwrap();
        let b = run_experiment(&tiny_spec(2)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.repeats[1].seed, 12);
    }

    #[test]
    fn csv_shape() {
        let r = run_experiment(&tiny_spec(3)).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[0].starts_with("repeat,seed,complete_accuracy,complete_macro_f1,complete_fake_rate,view1-generated_accuracy"));
        assert!(lines[0].ends_with("baseline2_macro_f1,bayes_accuracy"));
        assert!(lines[4].starts_with("mean,,"));
        let cols = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn repeat_failure_names_the_repeat() {
        let mut spec = tiny_spec(2);
        if let DataSource::Synthetic(s) = &mut spec.source {
            s.m_full = 0;
        }
        match run_experiment(&spec) {
            Err(Error::Repeat { repeat: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
