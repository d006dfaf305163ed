use serde::{Deserialize, Serialize};

use crate::block_analytics::{metrics_for_model, AttackMetrics, BlockPolicy};
use crate::error::{domain, Result};
use crate::signal_model::{per_signal_model, PerSignalModel, SourceParams, Strategy};

/// Log-spaced search interval for Eve's resent intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuBetaSearch {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Refine the best grid bracket with golden-section search.
    pub refine: bool,
}

impl Default for MuBetaSearch {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e2,
            points: 400,
            refine: true,
        }
    }
}

impl MuBetaSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite()) {
            return Err(domain("mu_beta_min", self.min, "a finite value > 0"));
        }
        if !(self.max > self.min && self.max.is_finite()) {
            return Err(domain("mu_beta_max", self.max, "a finite value above mu_beta_min"));
        }
        if self.points < 2 {
            return Err(domain("mu_beta_points", self.points as f64, "at least 2 grid points"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| match i {
                0 => self.min,
                i if i == self.points - 1 => self.max,
                i => (lo + (hi - lo) * i as f64 / last).exp(),
            })
            .collect()
    }
}

/// Inclusive range of acceptable gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBand {
    pub min: f64,
    pub max: f64,
}

impl GainBand {
    fn distance(&self, gain: f64) -> f64 {
        if gain < self.min {
            (self.min - gain) / self.min.max(1e-300)
        } else if gain > self.max {
            (gain - self.max) / self.max.max(1e-300)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub mu_beta: f64,
    pub metrics: AttackMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MuBetaOutcome {
    Optimal(Candidate),
    Infeasible,
}

impl MuBetaOutcome {
    pub fn optimal(&self) -> Option<&Candidate> {
        match self {
            MuBetaOutcome::Optimal(c) => Some(c),
            MuBetaOutcome::Infeasible => None,
        }
    }
}

/// Everything fixed except `μ_β`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub model: PerSignalModel,
    pub block_len: usize,
    pub min_run: usize,
    pub send_prob: f64,
    pub dc_cap: Option<f64>,
}

impl Cell {
    pub fn evaluate(&self, mu_beta: f64) -> Result<Candidate> {
        let policy = BlockPolicy::new(self.block_len, self.min_run, self.send_prob, mu_beta)?;
        Ok(Candidate {
            mu_beta,
            metrics: metrics_for_model(&self.model, &policy)?,
        })
    }

    pub fn within_cap(&self, m: &AttackMetrics) -> bool {
        self.dc_cap.is_none_or(|cap| m.dc <= cap)
    }

    /// How far a point is from satisfying the double-click cap.
    pub fn cap_violation(&self, m: &AttackMetrics) -> f64 {
        match self.dc_cap {
            Some(cap) if m.dc > cap => {
                if cap > 0.0 {
                    (m.dc / cap).ln()
                } else {
                    1.0 + m.dc
                }
            }
            _ => 0.0,
        }
    }
}

const TIE_RTOL: f64 = 1e-12;

/// `a` has strictly lower QBER than `b`, or ties within [`TIE_RTOL`] with a
/// higher gain.
fn better(a: &Candidate, b: &Candidate) -> bool {
    let (qa, qb) = match (a.metrics.qber.value(), b.metrics.qber.value()) {
        (Some(qa), Some(qb)) => (qa, qb),
        (Some(_), None) => return true,
        _ => return false,
    };
    if (qa - qb).abs() <= TIE_RTOL * qa.abs().max(qb.abs()) {
        a.metrics.gain > b.metrics.gain
    } else {
        qa < qb
    }
}

/// Golden-section minimisation of `f` on `[lo, hi]`.
pub fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub(crate) const GOLDEN_TOL: f64 = 1e-9;
pub(crate) const GOLDEN_MAX_ITER: usize = 200;

pub(crate) fn optimize_cell(
    cell: &Cell,
    band: Option<GainBand>,
    search: &MuBetaSearch,
) -> Result<MuBetaOutcome> {
    search.validate()?;
    let grid = search.grid();
    let feasible = |c: &Candidate| {
        c.metrics.qber.value().is_some()
            && cell.within_cap(&c.metrics)
            && band.is_none_or(|b| b.distance(c.metrics.gain) == 0.0)
    };

    let mut best: Option<(usize, Candidate)> = None;
    for (i, &mu) in grid.iter().enumerate() {
        let c = cell.evaluate(mu)?;
        if feasible(&c) && best.as_ref().is_none_or(|(_, b)| better(&c, b)) {
            best = Some((i, c));
        }
    }
    let Some((idx, mut chosen)) = best else {
        return Ok(MuBetaOutcome::Infeasible);
    };

    if search.refine {
        let lo = grid[idx.saturating_sub(1)].ln();
        let hi = grid[(idx + 1).min(grid.len() - 1)].ln();
        let mut refined: Option<Candidate> = None;
        let mut failure = None;
        golden_section_min(
            |x| {
                let c = match cell.evaluate(x.exp()) {
                    Ok(c) => c,
                    Err(e) => {
                        failure = Some(e);
                        return f64::INFINITY;
                    }
                };
                let penalty = cell.cap_violation(&c.metrics)
                    + band.map_or(0.0, |b| b.distance(c.metrics.gain));
                let score = match c.metrics.qber.value() {
                    Some(q) if penalty == 0.0 => q,
                    _ => 2.0 + penalty,
                };
                if feasible(&c) && refined.as_ref().is_none_or(|r| better(&c, r)) {
                    refined = Some(c);
                }
                score
            },
            lo,
            hi,
            GOLDEN_TOL,
            GOLDEN_MAX_ITER,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some(r) = refined {
            if better(&r, &chosen) {
                chosen = r;
            }
        }
    }
    Ok(MuBetaOutcome::Optimal(chosen))
}

/// The `μ_β` minimising QBER for one `(strategy, M, q)` configuration under
/// an optional double-click cap and gain band. `M_min` is `⌊M/2 + 1⌋`.
/// Equal QBERs are broken towards the larger gain.
pub fn optimize_mu_beta(
    src: &SourceParams,
    strategy: &Strategy,
    block_len: usize,
    send_prob: f64,
    dc_cap: Option<f64>,
    band: Option<GainBand>,
    search: &MuBetaSearch,
) -> Result<MuBetaOutcome> {
    let cell = Cell {
        model: per_signal_model(src, strategy)?,
        block_len,
        min_run: crate::block_analytics::default_min_run(block_len),
        send_prob,
        dc_cap,
    };
    // Validate the rest of the policy up front.
    BlockPolicy::new(block_len, cell.min_run, send_prob, search.min)?;
    optimize_cell(&cell, band, search)
}
