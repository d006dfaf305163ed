//! Test-only reference computations, written without the library's
//! formulas.

#![allow(dead_code)]

use seqattack::{Strategy, StrategyKind};

/// Click probabilities for one slot: both pulses coherent, exactly one
/// coherent, and both detectors firing on an edge slot.
pub fn slot_probs(mu_beta: f64) -> (f64, f64, f64) {
    let s = 1.0 - (-mu_beta).exp();
    let t = 1.0 - (-mu_beta / 2.0).exp();
    let one = 1.0 - (-mu_beta / 4.0).exp();
    (s, t, one * one)
}

/// Success probability and per-pulse error for each strategy. The MED
/// error comes from the Helstrom bound on the normalised filtered states.
pub fn per_pulse(mu_alpha: f64, strategy: &Strategy) -> (f64, f64) {
    let (succ, _, err) = per_pulse_full(mu_alpha, strategy);
    (succ, err)
}

/// `(success, failure, error)`, with the failure probability computed
/// directly rather than as `1 - success`.
pub fn per_pulse_full(mu_alpha: f64, strategy: &Strategy) -> (f64, f64, f64) {
    let overlap = (-2.0 * mu_alpha).exp();
    match *strategy {
        Strategy::Usd => (1.0 - overlap, overlap, 0.0),
        Strategy::BobDevice => (1.0 - (-mu_alpha).exp(), (-mu_alpha).exp(), 0.0),
        Strategy::Med { lambda } => {
            let a = ((1.0 + overlap) / 2.0).sqrt();
            let b = ((1.0 - overlap) / 2.0).sqrt();
            let v0 = [lambda * a, b];
            let v1 = [lambda * a, -b];
            let norm2 = v0[0] * v0[0] + v0[1] * v0[1];
            let inner = (v0[0] * v1[0] + v0[1] * v1[1]) / norm2;
            let p_err = 0.5 * (1.0 - (1.0 - inner * inner).sqrt());
            (norm2, (1.0 - lambda * lambda) * a * a, p_err)
        }
    }
}

pub fn lambda_lo(mu_alpha: f64) -> f64 {
    let overlap = (-2.0 * mu_alpha).exp();
    ((1.0 - overlap) / (1.0 + overlap)).sqrt()
}

pub fn strategy_at(mu_alpha: f64, kind: StrategyKind, fraction: f64) -> Strategy {
    match kind {
        StrategyKind::Usd => Strategy::Usd,
        StrategyKind::BobDevice => Strategy::BobDevice,
        StrategyKind::Med => {
            let lo = lambda_lo(mu_alpha);
            Strategy::Med {
                lambda: lo + fraction * (1.0 - lo),
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub clicks: f64,
    pub errors: f64,
    pub double_clicks: f64,
    pub boundary: f64,
}

impl Reference {
    pub fn gain(&self, m: usize) -> f64 {
        self.clicks / m as f64
    }

    pub fn qber(&self) -> Option<f64> {
        (self.clicks > 0.0).then(|| self.errors / self.clicks)
    }

    pub fn dc(&self, m: usize) -> f64 {
        self.double_clicks / m as f64
    }
}

/// Which pulses of a block Eve sends as coherent states, for one pattern
/// and threshold choice.
fn forwarded(pattern: &[bool], min_run: usize, send_at_threshold: bool) -> Vec<bool> {
    let mut out = vec![false; pattern.len()];
    let mut start = 0;
    while start < pattern.len() {
        if !pattern[start] {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < pattern.len() && pattern[end] {
            end += 1;
        }
        let len = end - start;
        if len > min_run || (len == min_run && send_at_threshold) {
            out[start..end].iter_mut().for_each(|x| *x = true);
        }
        start = end;
    }
    out
}

/// Expected clicks, errors and double clicks per block in the stationary
/// pulse train, by brute force over every success pattern.
pub fn brute_force(
    mu_alpha: f64,
    strategy: &Strategy,
    block_len: usize,
    min_run: usize,
    send_prob: f64,
    mu_beta: f64,
) -> Reference {
    let (p_succ, p_fail, p_err) = per_pulse_full(mu_alpha, strategy);
    let (s, t, d) = slot_probs(mu_beta);
    let pair_err = 2.0 * p_err * (1.0 - p_err) * s;

    let mut blocks: Vec<(f64, Vec<bool>)> = Vec::new();
    for bits in 0u32..(1 << block_len) {
        let pattern: Vec<bool> = (0..block_len).map(|j| bits >> j & 1 == 1).collect();
        let w: f64 = pattern.iter().map(|&x| if x { p_succ } else { p_fail }).product();
        if w == 0.0 {
            continue;
        }
        let send = forwarded(&pattern, min_run, true);
        let hold = forwarded(&pattern, min_run, false);
        if send == hold {
            blocks.push((w, send));
        } else {
            blocks.push((w * send_prob, send));
            blocks.push((w * (1.0 - send_prob), hold));
        }
    }
    let boundary: f64 = blocks.iter().filter(|(_, b)| b[block_len - 1]).map(|(w, _)| w).sum();

    let slot = |prev: bool, cur: bool| -> (f64, f64, f64) {
        match (prev, cur) {
            (true, true) => (s, pair_err, 0.0),
            (false, false) => (0.0, 0.0, 0.0),
            _ => (t, t / 2.0, d),
        }
    };
    let (mut clicks, mut errors, mut dcs) = (0.0, 0.0, 0.0);
    for (w, pulses) in &blocks {
        for (prev, pw) in [(true, boundary), (false, 1.0 - boundary)] {
            let mut last = prev;
            for &cur in pulses {
                let (c, e, dc) = slot(last, cur);
                clicks += w * pw * c;
                errors += w * pw * e;
                dcs += w * pw * dc;
                last = cur;
            }
        }
    }
    Reference {
        clicks,
        errors,
        double_clicks: dcs,
        boundary,
    }
}

/// Relative agreement, or absolute agreement at round-off level for values
/// that should be zero.
pub fn close(a: f64, b: f64, rtol: f64) -> bool {
    rel(a, b) <= rtol || (a - b).abs() <= 1e-15
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// The acceptance sweep: every `(M, M_min)` with `M` in 3..=8.
pub fn sweep_shapes() -> Vec<(usize, usize)> {
    (3..=8usize).flat_map(|m| (m / 2 + 1..m).map(move |r| (m, r))).collect()
}

pub const SWEEP_Q: [f64; 3] = [0.0, 0.3, 1.0];
pub const SWEEP_MU_BETA: [f64; 3] = [0.1, 1.0, 10.0];
pub const SWEEP_MU_ALPHA: [f64; 2] = [0.16, 0.2];

/// USD, MED at the low end, middle and top of its range, Bob's device.
pub fn sweep_strategies(mu_alpha: f64) -> Vec<Strategy> {
    vec![
        Strategy::Usd,
        strategy_at(mu_alpha, StrategyKind::Med, 0.0),
        strategy_at(mu_alpha, StrategyKind::Med, 0.5),
        strategy_at(mu_alpha, StrategyKind::Med, 1.0),
        Strategy::BobDevice,
    ]
}
