//! Closed-form block statistics of a sequential attack.
//!
//! Eve cuts her measurement record into blocks of `M` outcomes. A block is
//! forwarded as coherent pulses only on the positions of its (unique) run of
//! at least `M_min` consecutive successes; a run of exactly `M_min` is
//! forwarded with probability `q`. Everything else becomes vacuum. The
//! expected per-block counts below sum the contributions of every run length
//! and position, with adjacent blocks coupled through the probability `p`
//! that the preceding block ends on a coherent pulse.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ModelError, Result};
use crate::signal_model::{
    detection_probs, pair_error_prob, per_signal_model, DetectionProbs, PerSignalModel,
    SourceParams, Strategy,
};

/// Powers below this value are flushed to zero and flagged.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Eve's block-level attack parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockPolicy {
    /// Block length `M`.
    pub block_len: usize,
    /// Minimum qualifying run length `M_min`.
    pub min_run: usize,
    /// Probability `q` of forwarding a run of exactly `M_min` successes.
    pub send_prob: f64,
    /// Mean photon number `μ_β` of the pulses Eve resends.
    pub mu_beta: f64,
}

/// `⌊M/2 + 1⌋`, the smallest admissible `M_min`.
pub fn default_min_run(block_len: usize) -> usize {
    block_len / 2 + 1
}

impl BlockPolicy {
    pub fn new(block_len: usize, min_run: usize, send_prob: f64, mu_beta: f64) -> Result<Self> {
        let policy = Self {
            block_len,
            min_run,
            send_prob,
            mu_beta,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Policy with `M_min = ⌊M/2 + 1⌋`.
    pub fn with_default_min_run(block_len: usize, send_prob: f64, mu_beta: f64) -> Result<Self> {
        Self::new(block_len, default_min_run(block_len), send_prob, mu_beta)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.block_len;
        if m < 3 {
            return Err(ModelError::Policy(format!("block length M = {m} must be >= 3")));
        }
        let lo = default_min_run(m);
        if self.min_run < lo || self.min_run >= m {
            return Err(ModelError::Policy(format!(
                "M_min = {} must satisfy {lo} <= M_min < {m}",
                self.min_run
            )));
        }
        if !(0.0..=1.0).contains(&self.send_prob) {
            return Err(domain("q", self.send_prob, "a probability in [0, 1]"));
        }
        if !(self.mu_beta.is_finite() && self.mu_beta >= 0.0) {
            return Err(domain("mu_beta", self.mu_beta, "a finite value >= 0"));
        }
        Ok(())
    }

    pub fn detection(&self) -> Result<DetectionProbs> {
        detection_probs(self.mu_beta)
    }

    /// Multiplicity `q^{δ(m, M_min)}` of a run of length `m`, as a branch so
    /// that `q = 0` removes the threshold run exactly.
    fn run_weight(&self, m: usize) -> f64 {
        if m == self.min_run {
            self.send_prob
        } else {
            1.0
        }
    }
}

/// `p_succ^n`, switching to log space for long blocks. The flag reports a
/// result that fell below [`UNDERFLOW_FLOOR`] and was flushed to zero.
pub fn succ_pow(p_succ: f64, n: usize) -> (f64, bool) {
    if n == 0 {
        return (1.0, false);
    }
    if p_succ <= 0.0 {
        return (0.0, false);
    }
    let value = if n <= 60 {
        p_succ.powi(n as i32)
    } else {
        (n as f64 * p_succ.ln()).exp()
    };
    if value < UNDERFLOW_FLOOR {
        (0.0, true)
    } else {
        (value, false)
    }
}

/// Probability that the last pulse of a block is coherent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryState {
    pub p: f64,
}

pub fn boundary_prob(p_succ: f64, policy: &BlockPolicy) -> BoundaryState {
    let (pow, _) = succ_pow(p_succ, policy.min_run);
    let q = policy.send_prob;
    BoundaryState {
        p: (p_succ + (1.0 - p_succ) * q) * pow,
    }
}

/// Probability that the block's trailing run of successes has length `m`
/// and the block is forwarded ending on a coherent pulse.
pub fn run_probability(m: usize, p_succ: f64, policy: &BlockPolicy) -> Result<f64> {
    let big_m = policy.block_len;
    if m > big_m {
        return Err(domain("m", m as f64, format!("a run length in [0, {big_m}]")));
    }
    let prob = if m < policy.min_run {
        0.0
    } else if m == big_m {
        succ_pow(p_succ, big_m).0
    } else if m == policy.min_run {
        policy.send_prob * (1.0 - p_succ) * succ_pow(p_succ, m).0
    } else {
        (1.0 - p_succ) * succ_pow(p_succ, m).0
    };
    Ok(prob)
}

/// The per-block click and error terms `u_M, v_m, w_m` and their error
/// counterparts, evaluated for one `(policy, p_succ, p̃_err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTerms {
    pub block_len: usize,
    pub p_succ: f64,
    /// Boundary probability `p`.
    pub boundary: f64,
    /// Error probability of an adjacent coherent pair, `p̃_err`.
    pub tilde_p_err: f64,
    pub det: DetectionProbs,
}

impl BlockTerms {
    pub fn new(policy: &BlockPolicy, p_succ: f64, tilde_p_err: f64) -> Result<Self> {
        Ok(Self {
            block_len: policy.block_len,
            p_succ,
            boundary: boundary_prob(p_succ, policy).p,
            tilde_p_err,
            det: policy.detection()?,
        })
    }

    /// Clicks of an all-coherent block, net of the `p·t` baseline.
    pub fn u(&self) -> f64 {
        let (p, m) = (self.boundary, self.block_len as f64);
        (1.0 - 2.0 * p) * self.det.t + (m - 1.0 + p) * self.det.s
    }

    /// Clicks of an edge run of length `m` (both edges summed).
    pub fn v(&self, m: usize) -> f64 {
        let p = self.boundary;
        (3.0 - 2.0 * p) * self.det.t + (2.0 * m as f64 + p - 2.0) * self.det.s
    }

    /// Clicks of an interior run of length `m`.
    pub fn w(&self, m: usize) -> f64 {
        2.0 * self.det.t + (m as f64 - 1.0) * self.det.s
    }

    pub fn u_err(&self) -> f64 {
        let (p, m) = (self.boundary, self.block_len as f64);
        0.5 * (1.0 - 2.0 * p) * self.det.t + (m - 1.0 + p) * self.tilde_p_err
    }

    pub fn v_err(&self, m: usize) -> f64 {
        let p = self.boundary;
        0.5 * (3.0 - 2.0 * p) * self.det.t + (2.0 * m as f64 + p - 2.0) * self.tilde_p_err
    }

    pub fn w_err(&self, m: usize) -> f64 {
        self.det.t + (m as f64 - 1.0) * self.tilde_p_err
    }

    /// Aggregate `S` with `N_errors = t·S` (USD) and `N_Dc = 2·d·S`.
    pub fn s_aggregate(&self, policy: &BlockPolicy) -> (f64, bool) {
        let p = self.boundary;
        let (full, uf) = succ_pow(self.p_succ, self.block_len);
        let (runs, uf_runs) = self.run_sum(policy, |_| (1.5 - p, 1.0));
        (0.5 * p + full * (0.5 - p) + runs, uf || uf_runs)
    }

    /// `Σ_{M_min ≤ m < M} q^{δ} (1−p_succ) p_succ^m [edge(m) + (M−m−1)(1−p_succ) interior(m)]`.
    fn run_sum(&self, policy: &BlockPolicy, terms: impl Fn(usize) -> (f64, f64)) -> (f64, bool) {
        let fail = 1.0 - self.p_succ;
        let mut total = 0.0;
        let mut underflow = false;
        for m in policy.min_run..policy.block_len {
            let weight = policy.run_weight(m);
            if weight == 0.0 {
                continue;
            }
            let (pow, uf) = succ_pow(self.p_succ, m);
            underflow |= uf;
            let (edge, interior) = terms(m);
            let gaps = (policy.block_len - m - 1) as f64;
            total += weight * fail * pow * (edge + gaps * fail * interior);
        }
        (total, underflow)
    }
}

/// Expected clicks, errors and double clicks in one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockCounts {
    pub clicks: f64,
    pub errors: f64,
    pub double_clicks: f64,
    /// Some power of `p_succ` was flushed to zero.
    pub underflow: bool,
}

/// All three per-block expectations for a given adjacent-pair error
/// probability `p̃_err` (zero for USD-type strategies).
pub fn block_counts(policy: &BlockPolicy, p_succ: f64, tilde_p_err: f64) -> Result<BlockCounts> {
    policy.validate()?;
    let terms = BlockTerms::new(policy, p_succ, tilde_p_err)?;
    let p = terms.boundary;
    let t = terms.det.t;
    let (full, uf_full) = succ_pow(p_succ, policy.block_len);

    let (click_runs, uf_a) = terms.run_sum(policy, |m| (terms.v(m), terms.w(m)));
    let clicks = p * t + full * terms.u() + click_runs;

    let errors = if tilde_p_err == 0.0 {
        t * terms.s_aggregate(policy).0
    } else {
        let (err_runs, _) = terms.run_sum(policy, |m| (terms.v_err(m), terms.w_err(m)));
        0.5 * p * t + full * terms.u_err() + err_runs
    };

    let (s_agg, uf_s) = terms.s_aggregate(policy);
    Ok(BlockCounts {
        clicks,
        errors,
        double_clicks: 2.0 * terms.det.d * s_agg,
        underflow: uf_full || uf_a || uf_s,
    })
}

/// `N_clicks^M`.
pub fn expected_clicks(policy: &BlockPolicy, p_succ: f64) -> Result<f64> {
    Ok(block_counts(policy, p_succ, 0.0)?.clicks)
}

/// `N_errors^M = t·S` for USD-type strategies.
pub fn expected_errors_usd(policy: &BlockPolicy, p_succ: f64) -> Result<f64> {
    policy.validate()?;
    let terms = BlockTerms::new(policy, p_succ, 0.0)?;
    Ok(terms.det.t * terms.s_aggregate(policy).0)
}

/// `N_errors^M` for the filtered MED strategy.
pub fn expected_errors_med(policy: &BlockPolicy, model: &PerSignalModel) -> Result<f64> {
    policy.validate()?;
    let det = policy.detection()?;
    let tilde = pair_error_prob(model, &det);
    let terms = BlockTerms::new(policy, model.p_succ, tilde)?;
    let (err_runs, _) = terms.run_sum(policy, |m| (terms.v_err(m), terms.w_err(m)));
    let (full, _) = succ_pow(model.p_succ, policy.block_len);
    Ok(0.5 * terms.boundary * det.t + full * terms.u_err() + err_runs)
}

/// `N_Dc^M = 2·d·S`, shared by every strategy.
pub fn expected_double_clicks(policy: &BlockPolicy, p_succ: f64) -> Result<f64> {
    Ok(block_counts(policy, p_succ, 0.0)?.double_clicks)
}

/// Error rate among Bob's clicks; undefined when there are no clicks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Qber {
    Value(f64),
    Undefined,
}

impl Qber {
    pub fn from_counts(errors: f64, clicks: f64) -> Self {
        if clicks > 0.0 {
            Qber::Value(errors / clicks)
        } else {
            Qber::Undefined
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Qber::Value(v) => Some(v),
            Qber::Undefined => None,
        }
    }
}

impl Serialize for Qber {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            Qber::Value(v) => serializer.serialize_f64(v),
            Qber::Undefined => serializer.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Qber {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Qber::Value(v)),
            Raw::Tag(s) if s == "undefined" => Ok(Qber::Undefined),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"undefined\", got {s:?}"
            ))),
        }
    }
}

/// Gain, QBER and double-click rate per pulse sent by Alice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub gain: f64,
    pub qber: Qber,
    pub dc: f64,
}

impl AttackMetrics {
    pub fn from_block(counts: &BlockCounts, block_len: usize) -> Self {
        let m = block_len as f64;
        AttackMetrics {
            gain: counts.clicks / m,
            qber: Qber::from_counts(counts.errors, counts.clicks),
            dc: counts.double_clicks / m,
        }
    }
}

/// Metrics for an already-resolved per-signal model.
pub fn metrics_for_model(model: &PerSignalModel, policy: &BlockPolicy) -> Result<AttackMetrics> {
    let det = policy.detection()?;
    let tilde = pair_error_prob(model, &det);
    let counts = block_counts(policy, model.p_succ, tilde)?;
    Ok(AttackMetrics::from_block(&counts, policy.block_len))
}

pub fn metrics(src: &SourceParams, strategy: &Strategy, policy: &BlockPolicy) -> Result<AttackMetrics> {
    let model = per_signal_model(src, strategy)?;
    metrics_for_model(&model, policy)
}

/// The `M = 3, M_min = 2, q = 1, μ_β → ∞` limit: the largest gain a
/// USD-type attack reaches.
pub fn max_gain_point(p_succ: f64) -> Result<AttackMetrics> {
    if !(0.0..=1.0).contains(&p_succ) {
        return Err(domain("p_succ", p_succ, "a probability in [0, 1]"));
    }
    let p2 = p_succ * p_succ;
    let click_poly = 6.0 - 2.0 * p_succ - p2;
    let error_poly = 2.0 - p_succ - p2;
    let gain = click_poly * p2 / 3.0;
    Ok(AttackMetrics {
        gain,
        qber: if gain > 0.0 {
            Qber::Value(error_poly / click_poly)
        } else {
            Qber::Undefined
        },
        dc: 2.0 * error_poly * p2 / 3.0,
    })
}
