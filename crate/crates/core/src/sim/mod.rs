//! Independent oracles for the closed forms: exact enumeration of a block's
//! outcome patterns and a seeded Monte-Carlo simulation of the pulse train.
//!
//! Both are built from Eve's dispatch rule and Bob's per-slot physics, not
//! from the case table behind the closed forms.

mod chain;
mod enumerate;

pub use chain::{simulate_chain, ChainEstimate, ChainTally, McEstimate, SlotTally, SEGMENT_BLOCKS};
pub use enumerate::{enumerate_exact, ExactEnumeration, MAX_ENUMERATION_LEN};

use serde::Serialize;

use crate::block_analytics::BlockPolicy;
use crate::error::{ModelError, Result};
use crate::signal_model::DetectionProbs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PulseKind {
    Coherent,
    Vacuum,
}

/// A pulse as Eve resends it. `phase_correct` records whether the phase Eve
/// assigned matches Alice's; it is ignored for vacuum pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Pulse {
    pub kind: PulseKind,
    pub phase_correct: bool,
}

impl Pulse {
    pub const VACUUM: Pulse = Pulse {
        kind: PulseKind::Vacuum,
        phase_correct: true,
    };

    pub fn is_coherent(&self) -> bool {
        self.kind == PulseKind::Coherent
    }
}

/// Coherent/vacuum pattern of the (previous, current) pulses interfered in
/// one of Bob's time slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PairClass {
    CC,
    CV,
    VC,
    VV,
}

impl PairClass {
    pub fn of(prev: PulseKind, cur: PulseKind) -> Self {
        match (prev, cur) {
            (PulseKind::Coherent, PulseKind::Coherent) => PairClass::CC,
            (PulseKind::Coherent, PulseKind::Vacuum) => PairClass::CV,
            (PulseKind::Vacuum, PulseKind::Coherent) => PairClass::VC,
            (PulseKind::Vacuum, PulseKind::Vacuum) => PairClass::VV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PairExpectation {
    pub clicks: f64,
    pub errors: f64,
    pub double_clicks: f64,
}

/// Expected clicks, errors and double clicks of one slot. `tilde_p_err` is
/// the error probability of a coherent pair (zero for USD).
pub fn pair_expectations(class: PairClass, tilde_p_err: f64, det: &DetectionProbs) -> PairExpectation {
    match class {
        PairClass::CC => PairExpectation {
            clicks: det.s,
            errors: tilde_p_err,
            double_clicks: 0.0,
        },
        PairClass::CV | PairClass::VC => PairExpectation {
            clicks: det.t,
            errors: 0.5 * det.t,
            double_clicks: det.d,
        },
        PairClass::VV => PairExpectation::default(),
    }
}

/// Eve's choice when the qualifying run has length exactly `M_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdBranch {
    Send,
    Hold,
}

impl ThresholdBranch {
    /// `Send` with probability `q` given a uniform draw in `[0, 1)`.
    pub fn draw(uniform: f64, send_prob: f64) -> Self {
        if uniform < send_prob {
            ThresholdBranch::Send
        } else {
            ThresholdBranch::Hold
        }
    }
}

/// The unique maximal run of successes with length `>= M_min`, as
/// `(start, len)`.
pub fn qualifying_run(outcomes: &[bool], min_run: usize) -> Result<Option<(usize, usize)>> {
    let mut found = None;
    let mut i = 0;
    while i < outcomes.len() {
        if !outcomes[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < outcomes.len() && outcomes[i] {
            i += 1;
        }
        let len = i - start;
        if len >= min_run {
            if found.is_some() {
                return Err(ModelError::Invariant(format!(
                    "two disjoint runs of length >= {min_run} in one block"
                )));
            }
            found = Some((start, len));
        }
    }
    Ok(found)
}

/// Turns a block of success flags into the pulses Eve forwards.
pub fn dispatch_block(
    outcomes: &[bool],
    policy: &BlockPolicy,
    branch: ThresholdBranch,
) -> Result<Vec<PulseKind>> {
    if outcomes.len() != policy.block_len {
        return Err(ModelError::Invariant(format!(
            "expected {} outcomes, got {}",
            policy.block_len,
            outcomes.len()
        )));
    }
    let mut pulses = vec![PulseKind::Vacuum; outcomes.len()];
    if let Some((start, len)) = qualifying_run(outcomes, policy.min_run)? {
        if len > policy.min_run || branch == ThresholdBranch::Send {
            pulses[start..start + len].fill(PulseKind::Coherent);
        }
    }
    Ok(pulses)
}
