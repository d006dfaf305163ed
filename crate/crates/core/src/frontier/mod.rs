//! Gain-versus-QBER frontiers of sequential attacks.
//!
//! For every block configuration `(M, q, λ)` the resent intensity `μ_β` is
//! scanned on a log grid and points violating the double-click cap are
//! dropped. The surviving grid points of every cell, together with the
//! cell's refined QBER optimum, are pooled and reduced to their
//! Pareto-optimal subset (high gain, low QBER).

mod assess;
mod optimize;

pub use assess::{assess_point, frontier_qber_at, Assessment, ExperimentPoint, Verdict};
pub use optimize::{
    golden_section_min, optimize_mu_beta, Candidate, GainBand, MuBetaOutcome, MuBetaSearch,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_analytics::{default_min_run, metrics, AttackMetrics, BlockPolicy};
use crate::error::{domain, ModelError, Result};
use crate::signal_model::{lambda_interval, per_signal_model, SourceParams, Strategy, StrategyKind};
use optimize::{optimize_cell, Cell};

/// Which strategies a sweep covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyFamily {
    Usd,
    BobDevice,
    Med { lambdas: Vec<f64> },
}

impl StrategyFamily {
    /// MED at `λ_k = b/a + k(1 − b/a)/5`, `k = 0..=5`.
    pub fn med_default(src: &SourceParams) -> Self {
        let (lo, hi) = lambda_interval(src);
        StrategyFamily::Med {
            lambdas: (0..=5).map(|k| lo + k as f64 * (hi - lo) / 5.0).collect(),
        }
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        match self {
            StrategyFamily::Usd => vec![Strategy::Usd],
            StrategyFamily::BobDevice => vec![Strategy::BobDevice],
            StrategyFamily::Med { lambdas } => {
                lambdas.iter().map(|&lambda| Strategy::Med { lambda }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mu_alpha: f64,
    pub family: StrategyFamily,
    pub block_lens: Vec<usize>,
    pub send_probs: Vec<f64>,
    pub search: MuBetaSearch,
    /// Maximum tolerable double-click rate; `None` when not monitored.
    pub dc_cap: Option<f64>,
}

pub fn default_block_lens() -> Vec<usize> {
    (3..=41).collect()
}

pub fn default_send_probs() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

impl SweepConfig {
    pub fn new(mu_alpha: f64, family: StrategyFamily, dc_cap: Option<f64>) -> Self {
        Self {
            mu_alpha,
            family,
            block_lens: default_block_lens(),
            send_probs: default_send_probs(),
            search: MuBetaSearch::default(),
            dc_cap,
        }
    }

    pub fn validate(&self) -> Result<SourceParams> {
        let src = SourceParams::new(self.mu_alpha)?;
        self.search.validate()?;
        if self.block_lens.is_empty() || self.send_probs.is_empty() {
            return Err(ModelError::Policy("sweep needs at least one M and one q".into()));
        }
        for &m in &self.block_lens {
            BlockPolicy::with_default_min_run(m, 0.0, 1.0)?;
        }
        for &q in &self.send_probs {
            if !(0.0..=1.0).contains(&q) {
                return Err(domain("q", q, "a probability in [0, 1]"));
            }
        }
        if let Some(cap) = self.dc_cap {
            if !(cap >= 0.0) {
                return Err(domain("dc_cap", cap, "a value >= 0"));
            }
        }
        if let StrategyFamily::Med { lambdas } = &self.family {
            if lambdas.is_empty() {
                return Err(ModelError::Policy("MED sweep needs at least one lambda".into()));
            }
            for &lambda in lambdas {
                per_signal_model(&src, &Strategy::Med { lambda })?;
            }
        }
        Ok(src)
    }
}

/// One Pareto-optimal operating point and the attack that produces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub gain: f64,
    pub qber: f64,
    pub dc: f64,
    pub block_len: usize,
    pub min_run: usize,
    pub send_prob: f64,
    pub mu_beta: f64,
    pub lambda: Option<f64>,
    pub strategy: StrategyKind,
}

impl FrontierPoint {
    pub fn strategy(&self) -> Result<Strategy> {
        match (self.strategy, self.lambda) {
            (StrategyKind::Usd, None) => Ok(Strategy::Usd),
            (StrategyKind::BobDevice, None) => Ok(Strategy::BobDevice),
            (StrategyKind::Med, Some(lambda)) => Ok(Strategy::Med { lambda }),
            (kind, _) => Err(ModelError::Policy(format!(
                "lambda must be present exactly for MED points (strategy {kind})"
            ))),
        }
    }

    pub fn policy(&self) -> Result<BlockPolicy> {
        BlockPolicy::new(self.block_len, self.min_run, self.send_prob, self.mu_beta)
    }

    /// Metrics recomputed from the stored generating parameters.
    pub fn recompute(&self, src: &SourceParams) -> Result<AttackMetrics> {
        metrics(src, &self.strategy()?, &self.policy()?)
    }

    fn from_candidate(c: &Candidate, cell: &Cell, strategy: &Strategy) -> Option<Self> {
        Some(FrontierPoint {
            gain: c.metrics.gain,
            qber: c.metrics.qber.value()?,
            dc: c.metrics.dc,
            block_len: cell.block_len,
            min_run: cell.min_run,
            send_prob: cell.send_prob,
            mu_beta: c.mu_beta,
            lambda: strategy.lambda(),
            strategy: strategy.kind(),
        })
    }

    /// `self` is at least as good in both coordinates and strictly better in one.
    pub fn dominates(&self, other: &FrontierPoint) -> bool {
        self.gain >= other.gain
            && self.qber <= other.qber
            && (self.gain > other.gain || self.qber < other.qber)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FrontierDiagnostics {
    pub cells: usize,
    pub evaluations: usize,
    /// Grid points rejected by the double-click cap.
    pub infeasible: usize,
    /// Grid points with no clicks, hence undefined QBER.
    pub undefined_qber: usize,
    /// Cells with no feasible `μ_β` at all.
    pub infeasible_cells: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frontier {
    /// Pareto-optimal points sorted by gain ascending.
    pub points: Vec<FrontierPoint>,
    pub diagnostics: FrontierDiagnostics,
}

struct CellScan {
    candidates: Vec<FrontierPoint>,
    evaluations: usize,
    infeasible: usize,
    undefined: usize,
}

fn scan_cell(cell: &Cell, strategy: &Strategy, search: &MuBetaSearch) -> Result<CellScan> {
    let grid = search.grid();
    let mut scan = CellScan {
        candidates: Vec::new(),
        evaluations: grid.len(),
        infeasible: 0,
        undefined: 0,
    };
    for &mu in &grid {
        let c = cell.evaluate(mu)?;
        if !cell.within_cap(&c.metrics) {
            scan.infeasible += 1;
            continue;
        }
        match FrontierPoint::from_candidate(&c, cell, strategy) {
            Some(p) => scan.candidates.push(p),
            None => scan.undefined += 1,
        }
    }

    // The cap boundary itself is not refined, so grid candidates nest
    // across caps.
    if search.refine {
        if let MuBetaOutcome::Optimal(c) = optimize_cell(cell, None, search)? {
            if let Some(p) = FrontierPoint::from_candidate(&c, cell, strategy) {
                scan.candidates.push(p);
            }
        }
    }
    Ok(scan)
}

/// Total order used for Pareto assembly: gain descending, then QBER, then
/// smaller `μ_β`, then smaller `M`, `q`, `λ`.
fn assembly_order(a: &FrontierPoint, b: &FrontierPoint) -> std::cmp::Ordering {
    b.gain
        .total_cmp(&a.gain)
        .then(a.qber.total_cmp(&b.qber))
        .then(a.mu_beta.total_cmp(&b.mu_beta))
        .then(a.block_len.cmp(&b.block_len))
        .then(a.send_prob.total_cmp(&b.send_prob))
        .then(a.lambda.unwrap_or(0.0).total_cmp(&b.lambda.unwrap_or(0.0)))
        .then(a.strategy.cmp(&b.strategy))
}

/// Pareto-optimal subset of `candidates`, sorted by gain ascending.
pub fn pareto_front(mut candidates: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    candidates.sort_by(assembly_order);
    let mut front = Vec::new();
    let mut best_qber = f64::INFINITY;
    for p in candidates {
        if p.qber < best_qber {
            best_qber = p.qber;
            front.push(p);
        }
    }
    front.reverse();
    front
}

pub fn build_frontier(cfg: &SweepConfig, workers: Option<usize>) -> Result<Frontier> {
    let src = cfg.validate()?;
    let mut cells = Vec::new();
    for strategy in cfg.family.strategies() {
        let model = per_signal_model(&src, &strategy)?;
        for &block_len in &cfg.block_lens {
            for &send_prob in &cfg.send_probs {
                let cell = Cell {
                    model,
                    block_len,
                    min_run: default_min_run(block_len),
                    send_prob,
                    dc_cap: cfg.dc_cap,
                };
                cells.push((cell, strategy));
            }
        }
    }

    let scan_all = || -> Result<Vec<CellScan>> {
        cells
            .par_iter()
            .map(|(cell, strategy)| scan_cell(cell, strategy, &cfg.search))
            .collect()
    };
    let scans = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ModelError::Invariant(format!("thread pool: {e}")))?
            .install(scan_all)?,
        None => scan_all()?,
    };

    let mut diagnostics = FrontierDiagnostics {
        cells: cells.len(),
        ..Default::default()
    };
    let mut pool = Vec::new();
    for scan in scans {
        diagnostics.evaluations += scan.evaluations;
        diagnostics.infeasible += scan.infeasible;
        diagnostics.undefined_qber += scan.undefined;
        if scan.candidates.is_empty() {
            diagnostics.infeasible_cells += 1;
        }
        pool.extend(scan.candidates);
    }
    diagnostics.candidates = pool.len();
    let points = pareto_front(pool);
    debug_assert!(is_pareto(&points));
    Ok(Frontier {
        points,
        diagnostics,
    })
}

/// No point dominates another and gains are strictly increasing.
pub fn is_pareto(points: &[FrontierPoint]) -> bool {
    points.windows(2).all(|w| w[0].gain < w[1].gain)
        && points
            .iter()
            .all(|p| points.iter().all(|o| !o.dominates(p)))
}
