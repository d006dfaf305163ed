use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{CommandName, RunConfig};
use super::csv::{frontier_csv, read_frontier_csv};
use super::record::ResultRecord;
use super::{exit, CliError};
use crate::block_analytics::{block_counts, AttackMetrics};
use crate::frontier::{assess_point, build_frontier};
use crate::signal_model::{pair_error_prob, per_signal_model};
use crate::sim::simulate_chain;
use crate::verify::{rel_diff, run_verification};

/// Settings that come from the command line rather than the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Directory that relative paths inside the config are resolved from.
    pub base_dir: PathBuf,
}

impl RunOptions {
    fn seed(&self, cfg: &RunConfig) -> Option<u64> {
        self.seed.or(cfg.seed)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// What a command produced. `csv` is only set by `frontier`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ResultRecord,
    pub csv: Option<String>,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(record: ResultRecord) -> Self {
        Self {
            record,
            csv: None,
            exit_code: exit::OK,
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("result serializes")
}

pub fn cmd_evaluate(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let src = cfg.source()?;
    let strategy = cfg.strategy(&src)?;
    let policy = cfg.policy()?;
    let model = per_signal_model(&src, &strategy)?;
    let tilde = pair_error_prob(&model, &policy.detection()?);
    let counts = block_counts(&policy, model.p_succ, tilde)?;
    let m = AttackMetrics::from_block(&counts, policy.block_len);
    let result = json!({
        "gain": m.gain,
        "qber": m.qber,
        "dc": m.dc,
        "strategy": strategy,
        "policy": policy,
        "p_succ": model.p_succ,
        "p_err": model.p_err,
        "pair_error_prob": tilde,
        "underflow": counts.underflow,
    });
    Ok(Outcome::ok(ResultRecord::new(CommandName::Evaluate, cfg, opts.seed(cfg), result)))
}

pub fn cmd_frontier(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let src = cfg.source()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::config("missing section: sweep"))?;
    let sweep = sweep.resolve(&src)?;
    let frontier = build_frontier(&sweep, opts.workers)?;
    let pts = &frontier.points;
    let result = json!({
        "points": pts.len(),
        "max_gain": pts.last().map(|p| p.gain),
        "min_qber": pts.first().map(|p| p.qber),
        "dc_cap": sweep.dc_cap,
        "lambdas": sweep.family.strategies().iter().filter_map(|s| s.lambda()).collect::<Vec<_>>(),
        "diagnostics": frontier.diagnostics,
    });
    let record = ResultRecord::new(CommandName::Frontier, cfg, opts.seed(cfg), result);
    Ok(Outcome {
        record,
        csv: Some(frontier_csv(pts)),
        exit_code: if pts.is_empty() { exit::EMPTY } else { exit::OK },
    })
}

pub fn cmd_simulate(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let src = cfg.source()?;
    let strategy = cfg.strategy(&src)?;
    let policy = cfg.policy()?;
    let sim = cfg
        .simulation
        .ok_or_else(|| CliError::config("missing section: simulation"))?;
    let seed = opts
        .seed(cfg)
        .ok_or_else(|| CliError::config("simulate needs a seed (config \"seed\" or --seed)"))?;
    let est = simulate_chain(&src, &strategy, &policy, sim.n_blocks, seed, opts.workers)?;
    let closed = crate::block_analytics::metrics(&src, &strategy, &policy)?;
    let result = json!({
        "gain": est.gain,
        "qber": est.qber.map_or(json!("undefined"), |q| to_value(&q)),
        "dc": est.dc,
        "closed_form": closed,
        "tally": est.tally,
    });
    Ok(Outcome::ok(ResultRecord::new(CommandName::Simulate, cfg, Some(seed), result)))
}

pub fn cmd_verify(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let sweep = cfg.verify.clone().unwrap_or_default();
    let seed = opts.seed(cfg).unwrap_or(0);
    let report = run_verification(&sweep, seed, opts.workers)?;
    for r in report.reports.iter().filter(|r| !r.passed) {
        eprintln!(
            "FAIL mu_alpha={} strategy={} M={} M_min={} q={} mu_beta={} rel_diff(G,Q,Dc)=({:.3e},{:.3e},{:.3e})",
            r.mu_alpha,
            r.strategy.kind(),
            r.policy.block_len,
            r.policy.min_run,
            r.policy.send_prob,
            r.policy.mu_beta,
            r.rel_diff.gain,
            r.rel_diff.qber,
            r.rel_diff.dc,
        );
    }
    eprintln!(
        "verify: {} cells, {} failed, {} Monte-Carlo comparisons ({} skipped), max rel diff {:.3e}, max |z| {:.2}",
        report.cells, report.failed, report.mc_compared, report.mc_skipped, report.max_rel_diff, report.max_abs_z
    );
    let exit_code = if report.passed { exit::OK } else { exit::VERIFY_FAILED };
    let record = ResultRecord::new(CommandName::Verify, cfg, Some(seed), to_value(&report));
    Ok(Outcome {
        record,
        csv: None,
        exit_code,
    })
}

pub fn cmd_assess(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let spec = cfg.assess.as_ref().ok_or_else(|| CliError::config("missing section: assess"))?;
    let path = opts.resolve(&spec.frontier_csv);
    let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let frontier = read_frontier_csv(file)?;
    if frontier.is_empty() {
        return Err(CliError::EmptyResult(format!("frontier CSV {} has no rows", path.display())));
    }
    let assessments = spec
        .points
        .iter()
        .map(|p| assess_point(p, &frontier))
        .collect::<crate::Result<Vec<_>>>()?;

    // With a source in the config, check the rows against their parameters.
    let reconstruction = match cfg.source {
        Some(_) => {
            let src = cfg.source()?;
            let mut worst: f64 = 0.0;
            for p in &frontier {
                let m = p.recompute(&src)?;
                let q = m.qber.value().unwrap_or(f64::INFINITY);
                worst = worst
                    .max(rel_diff(m.gain, p.gain, 1e-300))
                    .max(rel_diff(q, p.qber, 1e-300))
                    .max(rel_diff(m.dc, p.dc, 1e-300));
            }
            Some(json!({ "mu_alpha": src.mu_alpha, "max_rel_diff": worst }))
        }
        None => None,
    };
    let result = json!({
        "frontier_csv": spec.frontier_csv,
        "rows": frontier.len(),
        "assessments": assessments,
        "reconstruction": reconstruction,
    });
    Ok(Outcome::ok(ResultRecord::new(CommandName::Assess, cfg, opts.seed(cfg), result)))
}

pub fn run_command(command: CommandName, cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    match command {
        CommandName::Evaluate => cmd_evaluate(cfg, opts),
        CommandName::Frontier => cmd_frontier(cfg, opts),
        CommandName::Simulate => cmd_simulate(cfg, opts),
        CommandName::Verify => cmd_verify(cfg, opts),
        CommandName::Assess => cmd_assess(cfg, opts),
    }
}
