//! Flat `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! once; keys nobody reads are reported as errors so typos do not silently
//! fall back to defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mvgan_core::eval::Scenario;
use mvgan_core::nn::DEFAULT_HIDDEN_DIM;
use mvgan_core::{AdamConfig, TrainConfig};

use crate::error::{Error, Result};
use crate::experiment::{DataSource, ExperimentSpec};
use crate::synth::SyntheticSpec;

#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    used: RefCell<BTreeSet<String>>,
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(i + 1, "empty key"));
            }
            if entries.insert(key.to_string(), (i + 1, value.trim().to_string())).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(Error::io(path))?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let (_, v) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| config_err(key, format!("cannot parse `{v}`"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Errors on any key that no reader asked for.
    pub fn ensure_all_used(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (line, _))) => Err(config_err(k, format!("unknown key (line {line})"))),
            None => Ok(()),
        }
    }
}

/// Training hyperparameters. Keys: `iterations`, `minibatch_size`, `alpha`,
/// `beta1`, `beta2`, `epsilon`, `seed`, `fm_weight`, `log_clamp`, `heldout_every`.
pub fn train_config(kv: &KeyValues) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let a = AdamConfig::default();
    let config = TrainConfig {
        iterations: kv.get_or("iterations", d.iterations)?,
        minibatch_size: kv.get_or("minibatch_size", d.minibatch_size)?,
        adam: AdamConfig {
            alpha: kv.get_or("alpha", a.alpha)?,
            beta1: kv.get_or("beta1", a.beta1)?,
            beta2: kv.get_or("beta2", a.beta2)?,
            epsilon: kv.get_or("epsilon", a.epsilon)?,
        },
        seed: kv.get_or("seed", d.seed)?,
        fm_weight: kv.get_or("fm_weight", d.fm_weight)?,
        log_clamp: kv.get_or("log_clamp", d.log_clamp)?,
        heldout_every: kv.get_or("heldout_every", d.heldout_every)?,
    };
    config.validate()?;
    Ok(config)
}

pub fn hidden_dim(kv: &KeyValues) -> Result<usize> {
    let h = kv.get_or("hidden_dim", DEFAULT_HIDDEN_DIM)?;
    if h == 0 {
        return Err(config_err("hidden_dim", "must be >= 1"));
    }
    Ok(h)
}

/// `1,0,0; 0,1,0` → one mean per class.
fn parse_means(key: &str, v: &str) -> Result<Vec<Vec<f64>>> {
    v.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| config_err(key, format!("bad number `{}`", x.trim())))
                })
                .collect()
        })
        .collect()
}

fn means(kv: &KeyValues, view: u8, k: usize, dim: usize, default_sep: f64) -> Result<Vec<Vec<f64>>> {
    let explicit = format!("class_means{view}");
    let sep_key = format!("separation{view}");
    match (kv.raw(&explicit), kv.contains(&sep_key)) {
        (Some(_), true) => Err(config_err(&explicit, format!("give either {explicit} or {sep_key}"))),
        (Some(v), false) => parse_means(&explicit, v),
        (None, _) => SyntheticSpec::axis_means(k, dim, kv.get_or(&sep_key, default_sep)?),
    }
}

/// Synthetic task. Defaults are [`SyntheticSpec::reference_task`]; means come
/// from `class_means1`/`class_means2` (`a,b,..; c,d,..`) or from
/// `separation1`/`separation2` (class `k` at `separation · e_k`).
pub fn synthetic_spec(kv: &KeyValues) -> Result<SyntheticSpec> {
    let r = SyntheticSpec::reference_task(0);
    let num_classes = kv.get_or("num_classes", r.num_classes)?;
    let d1 = kv.get_or("d1", r.d1)?;
    let d2 = kv.get_or("d2", r.d2)?;
    let spec = SyntheticSpec {
        num_classes,
        d1,
        d2,
        class_means1: means(kv, 1, num_classes, d1, r.class_means1[0][0])?,
        class_means2: means(kv, 2, num_classes, d2, r.class_means2[0][0])?,
        noise_sigma: kv.get_or("noise_sigma", r.noise_sigma)?,
        view_correlation: kv.get_or("view_correlation", r.view_correlation)?,
        latent_dim: kv.get_or("latent_dim", r.latent_dim)?,
        m_full: kv.get_or("m_full", r.m_full)?,
        m_missing1: kv.get_or("m_missing1", r.m_missing1)?,
        m_missing2: kv.get_or("m_missing2", r.m_missing2)?,
        m_test: kv.get_or("m_test", r.m_test)?,
        seed: kv.get_or("seed", r.seed)?,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_scenario(name: &str) -> Result<Scenario> {
    match name.trim() {
        "complete" => Ok(Scenario::TestComplete),
        "view1-generated" => Ok(Scenario::TestOnView1Generated),
        "view2-generated" => Ok(Scenario::TestOnView2Generated),
        other => Err(config_err(
            "scenario",
            format!("`{other}` is not one of complete, view1-generated, view2-generated"),
        )),
    }
}

pub fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::TestComplete => "complete",
        Scenario::TestOnView1Generated => "view1-generated",
        Scenario::TestOnView2Generated => "view2-generated",
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(key, format!("expected true/false, got `{v}`"))),
    }
}

pub fn get_bool(kv: &KeyValues, key: &str, default: bool) -> Result<bool> {
    kv.raw(key).map_or(Ok(default), |v| parse_bool(key, v))
}

/// Experiment definition. `data=<path>` selects a multiview file (relative
/// paths resolve against `base_dir`); otherwise the synthetic keys apply.
/// `scenario` takes a comma-separated list; the first is the primary one.
pub fn experiment_spec(kv: &KeyValues, base_dir: &Path) -> Result<ExperimentSpec> {
    let train = train_config(kv)?;
    let source = match kv.raw("data") {
        Some(p) => {
            let path = PathBuf::from(p);
            DataSource::File {
                path: if path.is_relative() { base_dir.join(path) } else { path },
                m_full: kv.get("m_full")?.ok_or_else(|| config_err("m_full", "required with data="))?,
                m_missing1: kv.get_or("m_missing1", 0)?,
                m_missing2: kv.get_or("m_missing2", 0)?,
            }
        }
        None => DataSource::Synthetic(synthetic_spec(kv)?),
    };
    let scenarios = kv
        .raw("scenario")
        .unwrap_or("complete")
        .split(',')
        .map(parse_scenario)
        .collect::<Result<Vec<_>>>()?;
    let spec = ExperimentSpec {
        n_repeats: kv.get_or("n_repeats", 20)?,
        scenarios,
        source,
        train,
        hidden_dim: hidden_dim(kv)?,
        baseline: get_bool(kv, "baseline", true)?,
        normalize: get_bool(kv, "normalize", false)?,
    };
    spec.validate()?;
    Ok(spec)
}
