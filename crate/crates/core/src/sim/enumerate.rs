use serde::Serialize;

use super::{dispatch_block, pair_expectations, qualifying_run, PairClass, PulseKind, ThresholdBranch};
use crate::block_analytics::{AttackMetrics, BlockPolicy, Qber};
use crate::error::{ModelError, Result};
use crate::signal_model::{pair_error_prob, per_signal_model, SourceParams, Strategy};

pub const MAX_ENUMERATION_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactEnumeration {
    pub metrics: AttackMetrics,
    /// Probability that a block ends on a coherent pulse, from the same
    /// enumeration.
    pub boundary_prob: f64,
    pub clicks_per_block: f64,
    pub errors_per_block: f64,
    pub double_clicks_per_block: f64,
}

/// Exact block statistics by summing over all `2^M` success patterns (and
/// both threshold branches) and walking Bob's `M` slots pair by pair.
pub fn enumerate_exact(
    src: &SourceParams,
    strategy: &Strategy,
    policy: &BlockPolicy,
) -> Result<ExactEnumeration> {
    policy.validate()?;
    let m = policy.block_len;
    if m > MAX_ENUMERATION_LEN {
        return Err(ModelError::EnumerationTooLarge {
            got: m,
            max: MAX_ENUMERATION_LEN,
        });
    }
    let model = per_signal_model(src, strategy)?;
    let det = policy.detection()?;
    let tilde = pair_error_prob(&model, &det);
    let p = model.p_succ;

    let mut blocks: Vec<(f64, Vec<PulseKind>)> = Vec::new();
    let mut outcomes = vec![false; m];
    for pattern in 0u32..(1 << m) {
        let mut weight = 1.0;
        for (j, slot) in outcomes.iter_mut().enumerate() {
            *slot = pattern >> j & 1 == 1;
            weight *= if *slot { p } else { 1.0 - p };
        }
        if weight == 0.0 {
            continue;
        }
        let at_threshold = matches!(
            qualifying_run(&outcomes, policy.min_run)?,
            Some((_, len)) if len == policy.min_run
        );
        if at_threshold {
            let q = policy.send_prob;
            for (branch, w) in [(ThresholdBranch::Send, q), (ThresholdBranch::Hold, 1.0 - q)] {
                if w > 0.0 {
                    blocks.push((weight * w, dispatch_block(&outcomes, policy, branch)?));
                }
            }
        } else {
            blocks.push((weight, dispatch_block(&outcomes, policy, ThresholdBranch::Hold)?));
        }
    }

    let boundary: f64 = blocks
        .iter()
        .filter(|(_, pulses)| pulses[m - 1] == PulseKind::Coherent)
        .map(|(w, _)| w)
        .sum();

    let (mut clicks, mut errors, mut dcs) = (0.0, 0.0, 0.0);
    for (w, pulses) in &blocks {
        // The first slot interferes with the previous block's last pulse.
        for (prev, pw) in [(PulseKind::Coherent, boundary), (PulseKind::Vacuum, 1.0 - boundary)] {
            let e = pair_expectations(PairClass::of(prev, pulses[0]), tilde, &det);
            clicks += w * pw * e.clicks;
            errors += w * pw * e.errors;
            dcs += w * pw * e.double_clicks;
        }
        for pair in pulses.windows(2) {
            let e = pair_expectations(PairClass::of(pair[0], pair[1]), tilde, &det);
            clicks += w * e.clicks;
            errors += w * e.errors;
            dcs += w * e.double_clicks;
        }
    }

    let len = m as f64;
    Ok(ExactEnumeration {
        metrics: AttackMetrics {
            gain: clicks / len,
            qber: Qber::from_counts(errors, clicks),
            dc: dcs / len,
        },
        boundary_prob: boundary,
        clicks_per_block: clicks,
        errors_per_block: errors,
        double_clicks_per_block: dcs,
    })
}
