//! Per-pulse and per-pair probability primitives.
//!
//! Alice's states `|±α⟩` span a two-dimensional space in which they read
//! `a|0⟩ ± b|1⟩`. Everything Eve can do to a single pulse (unambiguous
//! discrimination, filtering followed by minimum-error discrimination, or a
//! copy of Bob's own interferometer) reduces to closed forms in `a`, `b` and
//! the filter strength `λ`. Bob's side is described by the click
//! probabilities of his two detectors for the pulse pairs he interferes.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ModelError, Result};

/// Absolute slack allowed when validating `λ` against `[b/a, 1]`.
pub const LAMBDA_TOLERANCE: f64 = 1e-12;

/// Alice's weak coherent source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    /// Mean photon number `μ_α = |α|²` of every signal pulse.
    pub mu_alpha: f64,
}

impl SourceParams {
    pub fn new(mu_alpha: f64) -> Result<Self> {
        if !(mu_alpha.is_finite() && mu_alpha >= 0.0) {
            return Err(domain("mu_alpha", mu_alpha, "a finite value >= 0"));
        }
        Ok(Self { mu_alpha })
    }
}

/// Which measurement Eve applies to each of Alice's pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Unambiguous state discrimination.
    Usd,
    /// Filtering with strength `lambda` followed by minimum-error discrimination.
    Med { lambda: f64 },
    /// Eve uses a copy of Bob's detection device; success means a click.
    BobDevice,
}

impl Strategy {
    /// MED strategy at a fraction `f ∈ [0, 1]` of the admissible filter
    /// interval: `λ = b/a + f (1 − b/a)`.
    pub fn med_at_fraction(src: &SourceParams, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(domain("lambda_fraction", fraction, "a value in [0, 1]"));
        }
        let (lo, hi) = lambda_interval(src);
        Ok(Strategy::Med {
            lambda: lo + fraction * (hi - lo),
        })
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Usd => StrategyKind::Usd,
            Strategy::Med { .. } => StrategyKind::Med,
            Strategy::BobDevice => StrategyKind::BobDevice,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Strategy::Med { lambda } => Some(lambda),
            _ => None,
        }
    }
}

/// Strategy tag without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Usd,
    Med,
    BobDevice,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Usd => "usd",
            StrategyKind::Med => "med",
            StrategyKind::BobDevice => "bob_device",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "usd" => Some(StrategyKind::Usd),
            "med" => Some(StrategyKind::Med),
            "bob_device" => Some(StrategyKind::BobDevice),
            _ => None,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strategy as written in configuration files: MED may give `lambda`
/// directly or as `lambda_fraction` of the admissible interval `[b/a, 1]`,
/// which depends on `μ_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_fraction: Option<f64>,
}

impl StrategySpec {
    pub fn of(kind: StrategyKind) -> Self {
        Self {
            kind,
            lambda: None,
            lambda_fraction: None,
        }
    }

    pub fn med_fraction(fraction: f64) -> Self {
        Self {
            kind: StrategyKind::Med,
            lambda: None,
            lambda_fraction: Some(fraction),
        }
    }

    pub fn resolve(&self, src: &SourceParams) -> Result<Strategy> {
        match (self.kind, self.lambda, self.lambda_fraction) {
            (StrategyKind::Usd, None, None) => Ok(Strategy::Usd),
            (StrategyKind::BobDevice, None, None) => Ok(Strategy::BobDevice),
            (StrategyKind::Med, Some(lambda), None) => {
                med_filter(src, lambda)?;
                Ok(Strategy::Med { lambda })
            }
            (StrategyKind::Med, None, Some(f)) => Strategy::med_at_fraction(src, f),
            (StrategyKind::Med, _, _) => Err(ModelError::Policy(
                "MED needs exactly one of lambda or lambda_fraction".into(),
            )),
            (kind, _, _) => Err(ModelError::Policy(format!(
                "strategy {kind} takes no lambda"
            ))),
        }
    }
}

impl From<Strategy> for StrategySpec {
    fn from(s: Strategy) -> Self {
        Self {
            kind: s.kind(),
            lambda: s.lambda(),
            lambda_fraction: None,
        }
    }
}

/// Coefficients of `|±α⟩ = a|0⟩ ± b|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisCoeffs {
    pub a: f64,
    pub b: f64,
}

/// What a single pulse looks like to Eve under a given strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerSignalModel {
    /// Probability that Eve's measurement counts as a success.
    pub p_succ: f64,
    /// Probability that a successful outcome names the wrong state.
    pub p_err: f64,
}

/// Normalised filtered state `|+α_succ⟩ = zero|0⟩ + one|1⟩`; its partner
/// `|−α_succ⟩` flips the sign of `one`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilteredState {
    pub zero: f64,
    pub one: f64,
}

impl FilteredState {
    /// Real overlap `⟨−α_succ|+α_succ⟩`.
    pub fn overlap(&self) -> f64 {
        self.zero * self.zero - self.one * self.one
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedFilter {
    pub model: PerSignalModel,
    pub state: FilteredState,
}

/// Bob's click statistics for pulses of mean photon number `μ_β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionProbs {
    /// Click probability for two aligned coherent pulses.
    pub s: f64,
    /// Click probability for a coherent pulse next to a vacuum slot.
    pub t: f64,
    /// Double-click probability for a coherent pulse next to a vacuum slot.
    pub d: f64,
    pub mu_beta: f64,
}

impl DetectionProbs {
    /// Click probability of a single detector in a coherent/vacuum slot
    /// (each detector sees `μ_β/4`).
    pub fn single_detector(&self) -> f64 {
        -(-self.mu_beta / 4.0).exp_m1()
    }
}

pub fn detection_probs(mu_beta: f64) -> Result<DetectionProbs> {
    if !(mu_beta.is_finite() && mu_beta >= 0.0) {
        return Err(domain("mu_beta", mu_beta, "a finite value >= 0"));
    }
    let quarter = -(-mu_beta / 4.0).exp_m1();
    Ok(DetectionProbs {
        s: -(-mu_beta).exp_m1(),
        t: -(-mu_beta / 2.0).exp_m1(),
        d: quarter * quarter,
        mu_beta,
    })
}

/// `1 − |⟨α|−α⟩| = 1 − e^{−2μ_α}`.
pub fn usd_success(src: &SourceParams) -> f64 {
    -(-2.0 * src.mu_alpha).exp_m1()
}

/// `1 − e^{−μ_α}`: Eve's click probability with Bob's device.
pub fn bobdevice_success(src: &SourceParams) -> f64 {
    -(-src.mu_alpha).exp_m1()
}

pub fn basis_coeffs(src: &SourceParams) -> BasisCoeffs {
    let overlap = (-2.0 * src.mu_alpha).exp();
    let one_minus = -(-2.0 * src.mu_alpha).exp_m1();
    BasisCoeffs {
        a: (0.5 * (1.0 + overlap)).sqrt(),
        b: (0.5 * one_minus).sqrt(),
    }
}

/// Admissible filter strengths `[b/a, 1]`.
pub fn lambda_interval(src: &SourceParams) -> (f64, f64) {
    let BasisCoeffs { a, b } = basis_coeffs(src);
    (b / a, 1.0)
}

/// Filter `A_succ(λ) = λ|0⟩⟨0| + |1⟩⟨1|` followed by the Helstrom measurement.
///
/// Values within [`LAMBDA_TOLERANCE`] of an endpoint are clamped onto it.
pub fn med_filter(src: &SourceParams, lambda: f64) -> Result<MedFilter> {
    let (lo, hi) = lambda_interval(src);
    if !lambda.is_finite() || lambda < lo - LAMBDA_TOLERANCE || lambda > hi + LAMBDA_TOLERANCE {
        return Err(domain(
            "lambda",
            lambda,
            format!("a value in [b/a, 1] = [{lo:.15}, 1]"),
        ));
    }
    let lambda = lambda.clamp(lo, hi);
    let BasisCoeffs { a, b } = basis_coeffs(src);
    let la = lambda * a;
    let p_succ = la * la + b * b;
    let (p_err, state) = if p_succ > 0.0 {
        let norm = p_succ.sqrt();
        let diff = la - b;
        (
            0.5 * diff * diff / p_succ,
            FilteredState {
                zero: la / norm,
                one: b / norm,
            },
        )
    } else {
        // μ_α = 0 and λ = 0: nothing ever passes the filter.
        (0.0, FilteredState { zero: 1.0, one: 0.0 })
    };
    Ok(MedFilter {
        model: PerSignalModel { p_succ, p_err },
        state,
    })
}

/// Per-signal model for any strategy.
pub fn per_signal_model(src: &SourceParams, strategy: &Strategy) -> Result<PerSignalModel> {
    match *strategy {
        Strategy::Usd => Ok(PerSignalModel {
            p_succ: usd_success(src),
            p_err: 0.0,
        }),
        Strategy::BobDevice => Ok(PerSignalModel {
            p_succ: bobdevice_success(src),
            p_err: 0.0,
        }),
        Strategy::Med { lambda } => med_filter(src, lambda).map(|f| f.model),
    }
}

/// Probability that two adjacent coherent pulses carry a wrong relative
/// phase and Bob clicks: exactly one of the two was misidentified.
pub fn pair_error_prob(model: &PerSignalModel, det: &DetectionProbs) -> f64 {
    2.0 * model.p_err * (1.0 - model.p_err) * det.s
}
