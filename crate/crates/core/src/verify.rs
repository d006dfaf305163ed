//! Cross-checks the closed-form block expectations against the exact
//! enumeration and the Monte-Carlo chain over a grid of configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_analytics::{block_counts, AttackMetrics, BlockPolicy, Qber};
use crate::error::{domain, Result};
use crate::signal_model::{
    pair_error_prob, per_signal_model, SourceParams, Strategy, StrategyKind, StrategySpec,
};
use crate::sim::{enumerate_exact, simulate_chain, ChainEstimate, McEstimate, MAX_ENUMERATION_LEN};

/// Which cells of the sweep also get a Monte-Carlo comparison, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloCheck {
    pub n_blocks: u64,
    pub sigmas: f64,
    pub mu_alphas: Vec<f64>,
    pub send_probs: Vec<f64>,
    pub mu_betas: Vec<f64>,
    /// Cells expecting fewer clicks than this over the whole run are
    /// reported as skipped: their standard errors are not meaningful.
    pub min_expected_clicks: f64,
}

impl Default for MonteCarloCheck {
    fn default() -> Self {
        Self {
            n_blocks: 100_000,
            sigmas: 4.0,
            mu_alphas: vec![0.16],
            send_probs: vec![0.3],
            mu_betas: vec![1.0],
            min_expected_clicks: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySweep {
    pub block_lens: Vec<usize>,
    /// Every valid `M_min` when absent.
    pub min_runs: Option<Vec<usize>>,
    pub send_probs: Vec<f64>,
    pub mu_betas: Vec<f64>,
    pub mu_alphas: Vec<f64>,
    pub strategies: Vec<StrategySpec>,
    pub rel_tol: f64,
    /// Relative differences are taken against `max(|a|, |b|, abs_floor)`.
    pub abs_floor: f64,
    pub monte_carlo: Option<MonteCarloCheck>,
    /// Multiplies the coherent-pair error probability in the closed form
    /// only. Anything but 1 should make the check fail.
    pub tilde_p_err_scale: f64,
}

impl Default for VerifySweep {
    fn default() -> Self {
        Self {
            block_lens: (3..=8).collect(),
            min_runs: None,
            send_probs: vec![0.0, 0.3, 1.0],
            mu_betas: vec![0.1, 1.0, 10.0],
            mu_alphas: vec![0.16, 0.2],
            strategies: vec![
                StrategySpec::of(StrategyKind::Usd),
                StrategySpec::med_fraction(0.0),
                StrategySpec::med_fraction(0.5),
                StrategySpec::med_fraction(1.0),
                StrategySpec::of(StrategyKind::BobDevice),
            ],
            rel_tol: 1e-9,
            abs_floor: 1e-300,
            monte_carlo: Some(MonteCarloCheck::default()),
            tilde_p_err_scale: 1.0,
        }
    }
}

impl VerifySweep {
    pub fn usd_only() -> Self {
        Self {
            strategies: vec![StrategySpec::of(StrategyKind::Usd)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&m) = self.block_lens.iter().find(|&&m| m > MAX_ENUMERATION_LEN) {
            return Err(crate::ModelError::EnumerationTooLarge {
                got: m,
                max: MAX_ENUMERATION_LEN,
            });
        }
        if !(self.rel_tol > 0.0) {
            return Err(domain("rel_tol", self.rel_tol, "a positive tolerance"));
        }
        if !(self.tilde_p_err_scale >= 0.0 && self.tilde_p_err_scale.is_finite()) {
            return Err(domain("tilde_p_err_scale", self.tilde_p_err_scale, "a finite value >= 0"));
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.n_blocks == 0 {
                return Err(domain("n_blocks", 0.0, "at least one block"));
            }
            if !(mc.sigmas > 0.0) {
                return Err(domain("sigmas", mc.sigmas, "a positive multiple"));
            }
        }
        Ok(())
    }

    fn cells(&self) -> Result<Vec<VerifyCell>> {
        let mut cells = Vec::new();
        for &mu_alpha in &self.mu_alphas {
            let src = SourceParams::new(mu_alpha)?;
            for spec in &self.strategies {
                let strategy = spec.resolve(&src)?;
                for &m in &self.block_lens {
                    let min_runs: Vec<usize> = match &self.min_runs {
                        Some(list) => list.iter().copied().filter(|&r| 2 * r > m && r < m).collect(),
                        None => (m / 2 + 1..m).collect(),
                    };
                    for &min_run in &min_runs {
                        for &q in &self.send_probs {
                            for &mu_beta in &self.mu_betas {
                                let policy = BlockPolicy::new(m, min_run, q, mu_beta)?;
                                let mc = self.monte_carlo.as_ref().is_some_and(|mc| {
                                    mc.mu_alphas.contains(&mu_alpha)
                                        && mc.send_probs.contains(&q)
                                        && mc.mu_betas.contains(&mu_beta)
                                });
                                cells.push(VerifyCell {
                                    mu_alpha,
                                    strategy,
                                    policy,
                                    monte_carlo: mc,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy)]
struct VerifyCell {
    mu_alpha: f64,
    strategy: Strategy,
    policy: BlockPolicy,
    monte_carlo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricDiffs {
    pub gain: f64,
    /// Infinite when exactly one side has an undefined QBER.
    pub qber: f64,
    pub dc: f64,
}

impl MetricDiffs {
    fn max(&self) -> f64 {
        self.gain.max(self.qber).max(self.dc)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum McOutcome {
    Compared {
        gain: McEstimate,
        qber: Option<McEstimate>,
        dc: McEstimate,
        /// `|estimate - closed form| / stderr` per metric.
        z_gain: f64,
        z_qber: Option<f64>,
        z_dc: f64,
        passed: bool,
    },
    Skipped {
        expected_clicks: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub mu_alpha: f64,
    pub strategy: Strategy,
    pub policy: BlockPolicy,
    pub closed_form: AttackMetrics,
    pub enumeration: AttackMetrics,
    pub rel_diff: MetricDiffs,
    pub enumeration_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McOutcome>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub cells: usize,
    pub failed: usize,
    pub mc_compared: usize,
    pub mc_skipped: usize,
    pub max_rel_diff: f64,
    pub max_abs_z: f64,
    pub passed: bool,
    pub reports: Vec<CellReport>,
}

/// `|a - b| / max(|a|, |b|, floor)`, zero when both are equal.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(floor)
    }
}

fn qber_diff(a: Qber, b: Qber, floor: f64) -> f64 {
    match (a.value(), b.value()) {
        (Some(x), Some(y)) => rel_diff(x, y, floor),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

fn closed_form(src: &SourceParams, strategy: &Strategy, policy: &BlockPolicy, scale: f64) -> Result<AttackMetrics> {
    let model = per_signal_model(src, strategy)?;
    let tilde = pair_error_prob(&model, &policy.detection()?) * scale;
    let counts = block_counts(policy, model.p_succ, tilde)?;
    Ok(AttackMetrics::from_block(&counts, policy.block_len))
}

fn z_score(est: &McEstimate, target: f64) -> f64 {
    let delta = (est.mean - target).abs();
    if delta == 0.0 {
        0.0
    } else if est.stderr > 0.0 {
        delta / est.stderr
    } else {
        f64::INFINITY
    }
}

fn compare_mc(
    est: &ChainEstimate,
    closed: &AttackMetrics,
    sigmas: f64,
) -> McOutcome {
    let z_gain = z_score(&est.gain, closed.gain);
    let z_dc = z_score(&est.dc, closed.dc);
    let z_qber = match (&est.qber, closed.qber.value()) {
        (Some(e), Some(q)) => Some(z_score(e, q)),
        (None, None) => None,
        _ => Some(f64::INFINITY),
    };
    let passed = z_gain <= sigmas && z_dc <= sigmas && z_qber.is_none_or(|z| z <= sigmas);
    McOutcome::Compared {
        gain: est.gain,
        qber: est.qber,
        dc: est.dc,
        z_gain,
        z_qber,
        z_dc,
        passed,
    }
}

/// Runs the sweep. `seed` drives the Monte-Carlo cells; each cell derives
/// its own seed from it and the cell index.
pub fn run_verification(sweep: &VerifySweep, seed: u64, workers: Option<usize>) -> Result<VerifyReport> {
    sweep.validate()?;
    let cells = sweep.cells()?;
    let check = |(idx, cell): (usize, &VerifyCell)| -> Result<CellReport> {
        let src = SourceParams::new(cell.mu_alpha)?;
        let closed = closed_form(&src, &cell.strategy, &cell.policy, sweep.tilde_p_err_scale)?;
        let exact = enumerate_exact(&src, &cell.strategy, &cell.policy)?.metrics;
        let floor = sweep.abs_floor;
        let diffs = MetricDiffs {
            gain: rel_diff(closed.gain, exact.gain, floor),
            qber: qber_diff(closed.qber, exact.qber, floor),
            dc: rel_diff(closed.dc, exact.dc, floor),
        };
        let enumeration_passed = diffs.max() <= sweep.rel_tol;
        let monte_carlo = match (&sweep.monte_carlo, cell.monte_carlo) {
            (Some(mc), true) => {
                let expected_clicks = closed.gain * (cell.policy.block_len as u64 * mc.n_blocks) as f64;
                if expected_clicks < mc.min_expected_clicks {
                    Some(McOutcome::Skipped { expected_clicks })
                } else {
                    let cell_seed = seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let est = simulate_chain(&src, &cell.strategy, &cell.policy, mc.n_blocks, cell_seed, Some(1))?;
                    Some(compare_mc(&est, &closed, mc.sigmas))
                }
            }
            _ => None,
        };
        let mc_passed = !matches!(monte_carlo, Some(McOutcome::Compared { passed: false, .. }));
        Ok(CellReport {
            mu_alpha: cell.mu_alpha,
            strategy: cell.strategy,
            policy: cell.policy,
            closed_form: closed,
            enumeration: exact,
            rel_diff: diffs,
            enumeration_passed,
            monte_carlo,
            passed: enumeration_passed && mc_passed,
        })
    };
    let run = || cells.par_iter().enumerate().map(check).collect::<Result<Vec<_>>>();
    let reports = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| crate::ModelError::Invariant(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut max_abs_z: f64 = 0.0;
    let (mut mc_compared, mut mc_skipped) = (0, 0);
    for r in &reports {
        match &r.monte_carlo {
            Some(McOutcome::Compared {
                z_gain, z_qber, z_dc, ..
            }) => {
                mc_compared += 1;
                max_abs_z = max_abs_z.max(*z_gain).max(*z_dc).max(z_qber.unwrap_or(0.0));
            }
            Some(McOutcome::Skipped { .. }) => mc_skipped += 1,
            None => {}
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    Ok(VerifyReport {
        cells: reports.len(),
        failed,
        mc_compared,
        mc_skipped,
        max_rel_diff: reports.iter().map(|r| r.rel_diff.max()).fold(0.0, f64::max),
        max_abs_z,
        passed: failed == 0,
        reports,
    })
}
