use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{DatasetSpec, DivergenceBlock, ExperimentConfig, FlowBlock, OracleBlock, TrainBlock};
use super::output::OutputDir;
use super::{CommandName, Failure, EXIT_NUMERICAL, EXIT_OK, SCHEMA_VERSION};
use crate::divergence::{self, ClampPolicy, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::flow::{self, make_init, make_target, run_flow, write_particles_csv, FlowOutcome};
use crate::oracle::{fidelity_oracle, PureStateOracleInput, MAX_ORACLE_DIM};
use crate::qr_drop::{self, concentric_rings, two_moons, write_history_csv, ConsistencyKind, Dataset};
use crate::rng;

const SUMMARY: &str = "summary.json";
const TRACE: &str = "trace.csv";
const ORACLE_TOLERANCE: f64 = 1e-10;

pub(super) fn dispatch(cfg: &ExperimentConfig, out: &Path, force: bool) -> std::result::Result<i32, Failure> {
    let stray = [
        ("divergence", cfg.divergence.is_some(), CommandName::Divergence),
        ("flow", cfg.flow.is_some(), CommandName::Flow),
        ("train", cfg.train.is_some(), CommandName::Train),
        ("oracle", cfg.oracle.is_some(), CommandName::OracleCheck),
    ]
    .into_iter()
    .find(|(_, present, owner)| *present && *owner != cfg.command);
    if let Some((block, _, _)) = stray {
        return Err(Failure::input(format!(
            "`{block}` block is not used by the `{}` command",
            cfg.command.as_str()
        )));
    }
    let clamp = cfg.clamp()?;
    match cfg.command {
        CommandName::Divergence => {
            let block = cfg
                .divergence
                .as_ref()
                .ok_or_else(|| Failure::input("missing `divergence` block"))?;
            divergence_cmd(block, clamp, out, force)
        }
        CommandName::Flow => flow_cmd(&cfg.flow.clone().unwrap_or_default(), cfg.seed, clamp, out, force),
        CommandName::Train => train_cmd(&cfg.train.clone().unwrap_or_default(), cfg.seed, clamp, out, force),
        CommandName::OracleCheck => {
            let block = cfg
                .oracle
                .as_ref()
                .ok_or_else(|| Failure::input("missing `oracle` block"))?;
            oracle_cmd(block, cfg.seed, out, force)
        }
    }
}

// ---- divergence ----

#[derive(Debug, Serialize)]
struct DivergenceSummary {
    schema_version: u32,
    command: &'static str,
    dimension: usize,
    kl: f64,
    kl_reverse: f64,
    js: f64,
    fidelity: f64,
    qif: f64,
    bhattacharyya: f64,
    g_of_kl: f64,
    g_of_js: f64,
}

/// One probability per row; a non-numeric first row is taken as a header.
fn read_column(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(Error::Config(format!(
                "{}: row {} has {} columns, expected 1",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        match rec[0].trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(e) => {
                return Err(Error::Config(format!("{}: row {}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

fn pick(inline: &Option<Vec<f64>>, path: &Option<std::path::PathBuf>, name: &str) -> Result<Vec<f64>> {
    match (inline, path) {
        (Some(v), None) => Ok(v.clone()),
        (None, Some(p)) => read_column(p),
        (Some(_), Some(_)) => Err(Error::Config(format!("give either `{name}` or `{name}_csv`, not both"))),
        (None, None) => Err(Error::Config(format!("missing `{name}` (or `{name}_csv`)"))),
    }
}

/// `G(x) = x log x` extended by continuity to `G(0) = 0`.
fn g_at(x: f64) -> Result<f64> {
    if x == 0.0 {
        Ok(0.0)
    } else {
        divergence::g_transform(x)
    }
}

fn divergence_cmd(
    block: &DivergenceBlock,
    clamp: ClampPolicy,
    out: &Path,
    force: bool,
) -> std::result::Result<i32, Failure> {
    let p = DiscreteDistribution::new(pick(&block.p, &block.p_csv, "p")?)?;
    let q = DiscreteDistribution::new(pick(&block.q, &block.q_csv, "q")?)?;
    let kl = divergence::kl(&p, &q, clamp)?;
    let js = divergence::js(&p, &q, clamp)?;
    let summary = DivergenceSummary {
        schema_version: SCHEMA_VERSION,
        command: "divergence",
        dimension: p.dim(),
        kl,
        kl_reverse: divergence::kl(&q, &p, clamp)?,
        js,
        fidelity: divergence::fidelity(&p, &q)?,
        qif: divergence::qif(&p, &q, clamp)?,
        bhattacharyya: divergence::bhattacharyya_distance(&p, &q, clamp)?,
        g_of_kl: g_at(kl)?,
        g_of_js: g_at(js)?,
    };
    let dir = OutputDir::prepare(out, force, &[SUMMARY.into()])?;
    dir.write_json(SUMMARY, &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::input(e.to_string()))?
    );
    Ok(EXIT_OK)
}

// ---- flow ----

#[derive(Debug, Serialize)]
struct FlowSummary {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    error: Option<String>,
    divergence: &'static str,
    particles: usize,
    iterations: usize,
    completed_iterations: usize,
    initial_objective: Option<f64>,
    final_objective: Option<f64>,
    initial_sinkhorn: Option<f64>,
    final_sinkhorn: Option<f64>,
    snapshots: usize,
    wall_ms: f64,
}

fn snapshot_name(t: usize) -> String {
    format!("snapshots/snapshot_{t:06}.csv")
}

fn write_flow_outputs(dir: &OutputDir, outcome: &FlowOutcome) -> std::result::Result<(), Failure> {
    dir.write_with(TRACE, |w| outcome.trace.write_csv(w))?;
    for s in &outcome.snapshots {
        dir.write_with(&snapshot_name(s.iteration), |w| write_particles_csv(&s.particles, w))?;
    }
    Ok(())
}

fn flow_cmd(
    block: &FlowBlock,
    seed: u64,
    clamp: ClampPolicy,
    out: &Path,
    force: bool,
) -> std::result::Result<i32, Failure> {
    let cfg = block.flow_config(seed, clamp)?;
    let init = make_init(block.init.shape, block.init.n, block.init.noise, seed)?;
    let target = make_target(block.target.shape, block.target.n, block.target.noise, seed)?;

    let mut planned: Vec<String> = flow::record_schedule(&cfg).into_iter().map(snapshot_name).collect();
    planned.extend([TRACE.into(), SUMMARY.into()]);
    let dir = OutputDir::prepare(out, force, &planned)?;

    let start = Instant::now();
    let result = run_flow(&init, &target, &cfg);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (outcome, error, completed) = match &result {
        Ok(o) => (o, None, cfg.iterations),
        Err(abort) => (&*abort.partial, Some(abort.to_string()), abort.iteration),
    };
    write_flow_outputs(&dir, outcome)?;
    let (first, last) = (outcome.trace.first(), outcome.trace.last());
    let summary = FlowSummary {
        schema_version: SCHEMA_VERSION,
        command: "flow",
        status: if error.is_none() { "ok" } else { "aborted" },
        error,
        divergence: cfg.divergence.name(),
        particles: init.len(),
        iterations: cfg.iterations,
        completed_iterations: completed,
        initial_objective: first.map(|r| r.objective),
        final_objective: last.map(|r| r.objective),
        initial_sinkhorn: first.map(|r| r.sinkhorn),
        final_sinkhorn: last.map(|r| r.sinkhorn),
        snapshots: outcome.snapshots.len(),
        wall_ms,
    };
    dir.write_json(SUMMARY, &summary)?;
    match result {
        Ok(_) => Ok(EXIT_OK),
        // Inputs were accepted at iteration 0, so any later failure is the run diverging.
        Err(abort) => Err(Failure {
            code: if abort.iteration > 0 || abort.error.is_numerical() {
                EXIT_NUMERICAL
            } else {
                super::EXIT_INPUT
            },
            message: abort.to_string(),
        }),
    }
}

// ---- train ----

#[derive(Debug, Serialize)]
struct FinalMetrics {
    history_file: String,
    epochs: usize,
    train_loss: f64,
    test_loss: f64,
    train_acc: f64,
    test_acc: f64,
    consistency_mean: f64,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    train_examples: usize,
    test_examples: usize,
    results: BTreeMap<&'static str, FinalMetrics>,
}

fn load_datasets(spec: &DatasetSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut r = rng::stream(seed, rng::DATA);
    match spec {
        DatasetSpec::TwoMoons { n_train, n_test, noise } => Ok((
            two_moons(*n_train, *noise, &mut r)?,
            two_moons(*n_test, *noise, &mut r)?,
        )),
        DatasetSpec::Rings { n_train, n_test, noise } => Ok((
            concentric_rings(*n_train, *noise, &mut r)?,
            concentric_rings(*n_test, *noise, &mut r)?,
        )),
        DatasetSpec::Csv { train, test, classes } => {
            let tr = Dataset::from_csv(train, *classes)?;
            let te = Dataset::from_csv(test, Some(tr.classes()))?;
            Ok((tr, te))
        }
    }
}

fn train_cmd(
    block: &TrainBlock,
    seed: u64,
    clamp: ClampPolicy,
    out: &Path,
    force: bool,
) -> std::result::Result<i32, Failure> {
    let kinds = block.consistency.kinds();
    if kinds.is_empty() {
        return Err(Failure::input("`consistency` sweep is empty"));
    }
    if (1..kinds.len()).any(|i| kinds[..i].contains(&kinds[i])) {
        return Err(Failure::input("`consistency` sweep lists a kind twice"));
    }
    let configs = kinds
        .iter()
        .map(|&k| block.train_config(k, seed, clamp))
        .collect::<Result<Vec<_>>>()?;
    let (train_set, test_set) = load_datasets(&block.dataset, seed)?;

    let file_for = |k: ConsistencyKind| {
        if block.consistency.is_sweep() {
            format!("history_{}.csv", k.name())
        } else {
            "history.csv".to_string()
        }
    };
    let mut planned: Vec<String> = kinds.iter().map(|&k| file_for(k)).collect();
    planned.push(SUMMARY.into());
    let dir = OutputDir::prepare(out, force, &planned)?;

    let mut results = BTreeMap::new();
    for cfg in &configs {
        let history = qr_drop::train(&train_set, &test_set, cfg)?;
        let name = file_for(cfg.consistency);
        dir.write_with(&name, |w| write_history_csv(&history, w))?;
        let last = history.last().expect("epochs >= 1");
        results.insert(
            cfg.consistency.name(),
            FinalMetrics {
                history_file: name,
                epochs: last.epoch,
                train_loss: last.train_loss,
                test_loss: last.test_loss,
                train_acc: last.train_acc,
                test_acc: last.test_acc,
                consistency_mean: last.consistency_loss_mean,
            },
        );
    }
    dir.write_json(
        SUMMARY,
        &TrainSummary {
            schema_version: SCHEMA_VERSION,
            command: "train",
            seed,
            train_examples: train_set.len(),
            test_examples: test_set.len(),
            results,
        },
    )?;
    Ok(EXIT_OK)
}

// ---- oracle-check ----

#[derive(Debug, Serialize)]
struct OracleSummary {
    schema_version: u32,
    command: &'static str,
    dimension: usize,
    trials: usize,
    alpha: f64,
    max_abs_deviation: f64,
    mean_abs_deviation: f64,
    tolerance: f64,
    passed: bool,
}

/// Largest and mean `|fidelity - fidelity_oracle|` over Dirichlet(alpha) pairs.
pub(crate) fn oracle_deviation(dimension: usize, trials: usize, alpha: f64, seed: u64) -> Result<(f64, f64)> {
    let mut r = rng::stream(seed, rng::ORACLE);
    let (mut max, mut sum) = (0.0f64, 0.0);
    for _ in 0..trials {
        let p = rng::dirichlet(&mut r, dimension, alpha);
        let q = rng::dirichlet(&mut r, dimension, alpha);
        let classical = divergence::fidelity(
            &DiscreteDistribution::from_mass(p.clone())?,
            &DiscreteDistribution::from_mass(q.clone())?,
        )?;
        let quantum = fidelity_oracle(&PureStateOracleInput::from_probabilities(&p, &q)?)?;
        let dev = (classical - quantum).abs();
        max = max.max(dev);
        sum += dev;
    }
    Ok((max, sum / trials as f64))
}

fn oracle_cmd(block: &OracleBlock, seed: u64, out: &Path, force: bool) -> std::result::Result<i32, Failure> {
    if block.dimension == 0 || block.dimension > MAX_ORACLE_DIM {
        return Err(Failure::input(format!(
            "dimension must be in 1..={MAX_ORACLE_DIM}, got {}",
            block.dimension
        )));
    }
    if block.trials == 0 {
        return Err(Failure::input("trials must be >= 1"));
    }
    if !(block.alpha > 0.0 && block.alpha.is_finite()) {
        return Err(Failure::input(format!("alpha must be > 0, got {}", block.alpha)));
    }
    let dir = OutputDir::prepare(out, force, &[SUMMARY.into()])?;
    let (max, mean) = oracle_deviation(block.dimension, block.trials, block.alpha, seed)?;
    let passed = max < ORACLE_TOLERANCE;
    let summary = OracleSummary {
        schema_version: SCHEMA_VERSION,
        command: "oracle-check",
        dimension: block.dimension,
        trials: block.trials,
        alpha: block.alpha,
        max_abs_deviation: max,
        mean_abs_deviation: mean,
        tolerance: ORACLE_TOLERANCE,
        passed,
    };
    dir.write_json(SUMMARY, &summary)?;
    println!(
        "max |F - F_oracle| = {max:.3e} over {} pairs at d = {}",
        block.trials, block.dimension
    );
    Ok(if passed { EXIT_OK } else { EXIT_NUMERICAL })
}
