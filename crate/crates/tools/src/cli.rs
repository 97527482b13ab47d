//! Command-line surface: `train`, `eval`, `synth`, `experiment`,
//! `theory-check` and `gradcheck`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::{self, KeyValues};
use crate::experiment::run_experiment_with;
use crate::format::{self, read_multiview, write_dataset, write_multiview, METRICS_CSV_HEADER};
use crate::synth::generate_synthetic;
use mvgan_core::gradcheck;
use mvgan_core::metrics::MetricsReport;
use mvgan_core::theory::{check_theorem, DiscreteJoint, TheoremReport};
use mvgan_core::train::train_with;
use mvgan_core::{eval, seeded_rng, TripartiteModel};

#[derive(Parser)]
#[command(name = "mvgan", version, about = "Two-view conditional GAN classifier with a fake class")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the three-player game on a multiview file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint path (rewritten every --checkpoint-every iterations and at the end).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        /// Complete pairs used for the held-out accuracy column.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        /// Scale every observed view to unit l2 norm.
        #[arg(long)]
        normalize: bool,
    },
    /// Score a checkpoint on a multiview file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// complete, view1-generated or view2-generated.
        #[arg(long, default_value = "complete")]
        scenario: String,
        /// Noise seed for generated views (defaults to the checkpoint's seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        normalize: bool,
    },
    /// Draw a synthetic Gaussian task and write train.mv and test.mv.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Repeated split/train/evaluate runs; writes per-repeat and aggregate rows.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the optimal-discriminator identities on discrete distributions.
    TheoryCheck {
        #[arg(long, requires_all = ["gen1", "gen2"])]
        real: Option<PathBuf>,
        #[arg(long)]
        gen1: Option<PathBuf>,
        #[arg(long)]
        gen2: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Finite-difference checks of every analytical gradient.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_report(name: &str, r: &MetricsReport) {
    println!("scenario    {name}");
    println!("n_test      {}", r.n_test);
    println!("accuracy    {:.4}", r.accuracy);
    println!("macro_f1    {:.4}", r.macro_f1);
    println!("fake_rate   {:.4}", r.fake_rate);
    for (k, c) in r.per_class.iter().enumerate() {
        println!(
            "class {k:<4}  precision {:.4}  recall {:.4}  f1 {:.4}  support {}",
            c.precision, c.recall, c.f1, c.support
        );
    }
}

fn cmd_train(
    config_path: &Path,
    data: &Path,
    out: &Path,
    metrics: &Path,
    heldout: Option<&Path>,
    checkpoint_every: usize,
    normalize: bool,
) -> Result<bool> {
    let kv = KeyValues::load(config_path)?;
    let cfg = config::train_config(&kv)?;
    let hidden = config::hidden_dim(&kv)?;
    kv.ensure_all_used()?;

    let mut file = read_multiview(data)?;
    if normalize {
        file.l2_normalize();
    }
    let dataset = file.into_partition()?;
    let test = match heldout {
        Some(p) => {
            let mut f = read_multiview(p)?;
            if normalize {
                f.l2_normalize();
            }
            Some(f.examples)
        }
        None => None,
    };

    let mut model = TripartiteModel::xavier(
        dataset.d1(),
        dataset.d2(),
        dataset.num_classes(),
        hidden,
        &mut seeded_rng(cfg.seed),
    )?;
    let mut csv = BufWriter::new(File::create(metrics).with_context(|| format!("creating {}", metrics.display()))?);
    writeln!(csv, "{METRICS_CSV_HEADER}")?;

    let mut io_error: Option<anyhow::Error> = None;
    let log = train_with(&mut model, &dataset, &cfg, test.as_deref(), |row, m| {
        let step = row.iter + 1;
        let res = writeln!(csv, "{}", format::metrics_csv_row(row))
            .map_err(anyhow::Error::from)
            .and_then(|_| {
                if checkpoint_every > 0 && step % checkpoint_every == 0 {
                    Checkpoint {
                        seed: cfg.seed,
                        step: step as u64,
                        model: m.clone(),
                    }
                    .save(out)?;
                }
                Ok(())
            });
        if let Err(e) = res {
            io_error.get_or_insert(e);
            return Err(mvgan_core::Error::Config("metrics or checkpoint write failed".into()));
        }
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let log = log?;
    csv.flush()?;
    Checkpoint {
        seed: cfg.seed,
        step: log.steps,
        model,
    }
    .save(out)?;
    if let Some(last) = log.rows.last() {
        println!(
            "trained {} iterations: loss_d {:.6} loss_g1 {:.6} loss_g2 {:.6} clamped logs {}",
            log.rows.len(),
            last.loss_d,
            last.loss_g1,
            last.loss_g2,
            log.clamp_events
        );
    }
    Ok(true)
}

fn cmd_eval(checkpoint: &Path, data: &Path, scenario: &str, seed: Option<u64>, normalize: bool) -> Result<bool> {
    let ck = Checkpoint::load(checkpoint)?;
    let scenario = config::parse_scenario(scenario)?;
    let mut f = read_multiview(data)?;
    if (f.d1, f.d2, f.num_classes) != (ck.model.d1(), ck.model.d2(), ck.model.num_classes()) {
        bail!("data dimensions do not match the checkpoint");
    }
    if normalize {
        f.l2_normalize();
    }
    let report = eval::evaluate(&ck.model, &f.examples, scenario, seed.unwrap_or(ck.seed))?;
    print_report(config::scenario_name(scenario), &report);
    Ok(true)
}

fn cmd_synth(spec: &Path, out_dir: &Path) -> Result<bool> {
    let kv = KeyValues::load(spec)?;
    let spec = config::synthetic_spec(&kv)?;
    kv.ensure_all_used()?;
    let data = generate_synthetic(&spec)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_dataset(&out_dir.join("train.mv"), &data.train)?;
    write_multiview(&out_dir.join("test.mv"), spec.d1, spec.d2, spec.num_classes, &data.test)?;
    let (f, m1, m2) = data.train.sizes();
    println!("train: {f} complete, {m1} missing view 1, {m2} missing view 2; test: {}", data.test.len());
    println!("bayes_accuracy {}", data.bayes_accuracy);
    Ok(true)
}

fn cmd_experiment(spec_path: &Path, out: &Path) -> Result<bool> {
    let kv = KeyValues::load(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let spec = config::experiment_spec(&kv, base)?;
    kv.ensure_all_used()?;
    let report = run_experiment_with(&spec, |r| {
        let p = r.primary();
        eprintln!("repeat {} (seed {}): accuracy {:.4} fake_rate {:.4}", r.repeat, r.seed, p.accuracy, p.fake_rate);
    })?;
    std::fs::write(out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    for ((c, m), s) in report.columns.iter().zip(&report.mean).zip(&report.std) {
        println!("{c:<32} {m:.4} ± {s:.4}");
    }
    Ok(true)
}

fn read_joint(path: &Path) -> Result<DiscreteJoint> {
    let (n1, n2, table) = format::read_matrix(path)?;
    DiscreteJoint::new(n1, n2, table).with_context(|| format!("{} is not a distribution", path.display()))
}

fn print_theorem(name: &str, r: &TheoremReport) {
    println!(
        "{name:<28} V(D*) {:+.12}  2·JSD {:.3e}  identity residual {:.3e}  V̄ {:+.12}  equilibrium {}  nash {}  {}",
        r.value_at_optimum,
        2.0 * r.jsd_to_mixture,
        r.identity_residual,
        r.augmented_value,
        r.at_equilibrium,
        r.at_nash_equilibrium,
        if r.passed { "ok" } else { "FAILED" }
    );
}

fn builtin_instances() -> Result<Vec<(String, DiscreteJoint, DiscreteJoint, DiscreteJoint)>> {
    use rand::Rng;
    let mut rng = seeded_rng(0);
    let mut random = |n1: usize, n2: usize| {
        DiscreteJoint::from_weights(n1, n2, (0..n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect())
    };
    let p = random(4, 5)?;
    let mut out = vec![("all equal".to_string(), p.clone(), p.clone(), p.clone())];

    // Generators that differ but whose average is the real distribution.
    let pg1 = DiscreteJoint::new(2, 2, vec![0.4, 0.1, 0.1, 0.4])?;
    let pg2 = DiscreteJoint::new(2, 2, vec![0.1, 0.4, 0.4, 0.1])?;
    let uniform = DiscreteJoint::new(2, 2, vec![0.25; 4])?;
    out.push(("mixture equals real".into(), uniform, pg1, pg2));

    let point = DiscreteJoint::point_mass(3, 3, 0, 0)?;
    let other = DiscreteJoint::point_mass(3, 3, 2, 2)?;
    out.push(("disjoint supports".into(), point, other.clone(), other));

    for i in 0..5 {
        out.push((format!("random triple {i}"), random(6, 7)?, random(6, 7)?, random(6, 7)?));
    }
    Ok(out)
}

fn cmd_theory(real: Option<&Path>, gen1: Option<&Path>, gen2: Option<&Path>, tol: f64) -> Result<bool> {
    let instances = match (real, gen1, gen2) {
        (Some(r), Some(g1), Some(g2)) => vec![("files".to_string(), read_joint(r)?, read_joint(g1)?, read_joint(g2)?)],
        _ => builtin_instances()?,
    };
    let mut ok = true;
    for (name, p, g1, g2) in &instances {
        let r = check_theorem(p, g1, g2, tol)?;
        print_theorem(name, &r);
        ok &= r.passed;
    }
    Ok(ok)
}

fn cmd_gradcheck(instances: usize, seed: u64) -> Result<bool> {
    let reports = gradcheck::run_all(instances, &mut seeded_rng(seed))?;
    let mut ok = true;
    for r in &reports {
        println!(
            "{:<32} instances {:>4}  coordinates {:>7}  max rel error {:.3e} (< {:.0e})  {}",
            r.suite,
            r.instances,
            r.coordinates,
            r.max_rel_error,
            r.tolerance,
            if r.passed { "ok" } else { "FAILED" }
        );
        ok &= r.passed;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train {
            config,
            data,
            out,
            metrics,
            heldout,
            checkpoint_every,
            normalize,
        } => cmd_train(&config, &data, &out, &metrics, heldout.as_deref(), checkpoint_every, normalize),
        Command::Eval {
            checkpoint,
            data,
            scenario,
            seed,
            normalize,
        } => cmd_eval(&checkpoint, &data, &scenario, seed, normalize),
        Command::Synth { spec, out_dir } => cmd_synth(&spec, &out_dir),
        Command::Experiment { spec, out } => cmd_experiment(&spec, &out),
        Command::TheoryCheck { real, gen1, gen2, tol } => {
            cmd_theory(real.as_deref(), gen1.as_deref(), gen2.as_deref(), tol)
        }
        Command::Gradcheck { instances, seed } => cmd_gradcheck(instances, seed),
    }
}

/// Parses `args` (program name first) and runs the command. `Ok(false)`
/// means the command ran but an invariant check failed.
pub fn run_args<I, T>(args: I) -> Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::read_multiview;

    fn mvgan(args: &[&str]) -> Result<bool> {
        run_args(std::iter::once("mvgan").chain(args.iter().copied()))
    }

    fn ok(args: &[&str]) {
        match mvgan(args) {
            Ok(true) => {}
            other => panic!("{args:?}: {other:?}"),
        }
    }

    fn fails_with(args: &[&str], needle: &str) {
        match mvgan(args) {
            Err(e) => assert!(format!("{e:#}").contains(needle), "{e:#}"),
            other => panic!("{args:?} should fail: {other:?}"),
        }
    }

    fn path(dir: &Path, name: &str) -> String {
        dir.join(name).to_str().unwrap().to_string()
    }

    const SYNTH: &str = "num_classes=2\nd1=3\nd2=3\nseparation1=4\nseparation2=2\nm_full=20\nm_missing1=30\nm_missing2=30\nm_test=50\nseed=5\n";

    #[test]
    fn synth_train_eval_round() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("synth.cfg"), SYNTH).unwrap();
        ok(&["synth", "--spec", &path(d, "synth.cfg"), "--out-dir", &path(d, "data")]);

        let train = read_multiview(&d.join("data/train.mv")).unwrap().into_partition().unwrap();
        assert_eq!(train.sizes(), (20, 30, 30));
        assert_eq!(read_multiview(&d.join("data/test.mv")).unwrap().examples.len(), 50);

        std::fs::write(d.join("train.cfg"), "iterations=40\nminibatch_size=4\nhidden_dim=8\nseed=1\nheldout_every=10\n").unwrap();
        ok(&[
            "train",
            "--config",
            &path(d, "train.cfg"),
            "--data",
            &path(d, "data/train.mv"),
            "--heldout",
            &path(d, "data/test.mv"),
            "--out",
            &path(d, "model.ckpt"),
            "--metrics",
            &path(d, "metrics.csv"),
        ]);
        let csv = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_CSV_HEADER);
        assert_eq!(lines.len(), 41);
        assert!(lines[1].ends_with(','));
        assert!(!lines[10].ends_with(','));
        let ck = Checkpoint::load(&d.join("model.ckpt")).unwrap();
        assert_eq!((ck.step, ck.seed), (40, 1));

        for scenario in ["complete", "view1-generated", "view2-generated"] {
            ok(&[
                "eval",
                "--checkpoint",
                &path(d, "model.ckpt"),
                "--data",
                &path(d, "data/test.mv"),
                "--scenario",
                scenario,
            ]);
        }
        // The training file has missing views, which the complete scenario needs.
        fails_with(
            &["eval", "--checkpoint", &path(d, "model.ckpt"), "--data", &path(d, "data/train.mv")],
            "has no view",
        );
        fails_with(
            &["eval", "--checkpoint", &path(d, "model.ckpt"), "--data", &path(d, "data/test.mv"), "--scenario", "x"],
            "scenario",
        );
    }

    #[test]
    fn experiment_writes_aggregate_rows() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(
            d.join("exp.cfg"),
            format!("{SYNTH}n_repeats=2\nscenario=complete,view2-generated\niterations=10\nminibatch_size=4\nhidden_dim=6\n"),
        )
        .unwrap();
        ok(&["experiment", "--spec", &path(d, "exp.cfg"), "--out", &path(d, "exp.csv")]);
        let csv = std::fs::read_to_string(d.join("exp.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("mean,") && lines[4].starts_with("std,"));

        // The aggregate mean is the mean of the emitted rows.
        let parse = |l: &str| l.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>();
        let (a, b, mean) = (parse(lines[1]), parse(lines[2]), parse(lines[3]));
        for i in 0..mean.len() {
            assert!((mean[i] - (a[i] + b[i]) / 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn experiment_from_file_source() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("synth.cfg"), SYNTH.replace("m_missing1=30\nm_missing2=30", "m_missing1=0\nm_missing2=0")).unwrap();
        ok(&["synth", "--spec", &path(d, "synth.cfg"), "--out-dir", &path(d, "data")]);
        std::fs::write(
            d.join("exp.cfg"),
            "data=data/test.mv\nm_full=10\nm_missing1=10\nm_missing2=10\nn_repeats=1\niterations=5\nminibatch_size=2\nhidden_dim=4\nnormalize=true\n",
        )
        .unwrap();
        ok(&["experiment", "--spec", &path(d, "exp.cfg"), "--out", &path(d, "exp.csv")]);
        let csv = std::fs::read_to_string(d.join("exp.csv")).unwrap();
        assert!(!csv.lines().next().unwrap().contains("bayes_accuracy"));
    }

    #[test]
    fn theory_and_gradcheck() {
        ok(&["theory-check"]);

        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("p.txt"), "0.25 0.25\n0.25 0.25\n").unwrap();
        std::fs::write(d.join("g1.txt"), "0.4 0.1\n0.1 0.4\n").unwrap();
        std::fs::write(d.join("g2.txt"), "0.1 0.4\n0.4 0.1\n").unwrap();
        std::fs::write(d.join("bad.txt"), "0.5 0.6\n").unwrap();
        ok(&["theory-check", "--real", &path(d, "p.txt"), "--gen1", &path(d, "g1.txt"), "--gen2", &path(d, "g2.txt")]);
        fails_with(
            &["theory-check", "--real", &path(d, "bad.txt"), "--gen1", &path(d, "g1.txt"), "--gen2", &path(d, "g2.txt")],
            "not a distribution",
        );
        assert!(mvgan(&["theory-check", "--real", &path(d, "p.txt")]).is_err());

        ok(&["gradcheck", "--instances", "5", "--seed", "3"]);
    }

    #[test]
    fn bad_inputs_fail_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let train = |cfg: &str, data: &str, needle: &str| {
            std::fs::write(d.join("train.cfg"), cfg).unwrap();
            std::fs::write(d.join("data.mv"), data).unwrap();
            fails_with(
                &[
                    "train",
                    "--config",
                    &path(d, "train.cfg"),
                    "--data",
                    &path(d, "data.mv"),
                    "--out",
                    &path(d, "m.ckpt"),
                    "--metrics",
                    &path(d, "m.csv"),
                ],
                needle,
            )
        };
        train("iterations=5\n", "#dims 2 2 2\n0\t0:1\t1:1\n1\t-\t-\n", "line 3");
        train("iterations=5\n", "#dims 2 2 2\n0\t0:1\t4:1\n", "out of range");
        train("iteration=5\n", "#dims 2 2 2\n0\t0:1\t1:1\n", "iteration");
        // Only complete pairs: the missing-view subsets are empty.
        train("iterations=5\n", "#dims 2 2 2\n0\t0:1\t1:1\n", "S_1");
    }
}
