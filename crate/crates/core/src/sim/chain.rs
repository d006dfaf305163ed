//! Seeded Monte-Carlo simulation of a long pulse train.
//!
//! The chain is cut into fixed segments of [`SEGMENT_BLOCKS`] blocks. Segment
//! `k` draws from ChaCha stream `k + 1` of the master seed; stream 0 produces
//! one burn-in block whose last pulse precedes the chain. The slot joining
//! two segments belongs to the later one and is sampled from four uniforms
//! that segment draws before anything else, so it can be resolved once the
//! earlier segment's last pulse is known. All tallies are integers, hence the
//! result depends on the seed only, never on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{qualifying_run, Pulse, PulseKind};
use crate::block_analytics::BlockPolicy;
use crate::error::{domain, ModelError, Result};
use crate::signal_model::{per_signal_model, DetectionProbs, PerSignalModel, SourceParams, Strategy};

pub const SEGMENT_BLOCKS: u64 = 4096;

/// Per-slot-class counters, for checking the slot physics in isolation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SlotTally {
    pub cc_slots: u64,
    pub cc_misaligned: u64,
    pub cc_clicks: u64,
    pub cc_errors: u64,
    /// Coherent/vacuum and vacuum/coherent slots.
    pub edge_slots: u64,
    pub edge_clicks: u64,
    pub edge_errors: u64,
    pub edge_double_clicks: u64,
}

impl SlotTally {
    fn merge(&mut self, o: &SlotTally) {
        self.cc_slots += o.cc_slots;
        self.cc_misaligned += o.cc_misaligned;
        self.cc_clicks += o.cc_clicks;
        self.cc_errors += o.cc_errors;
        self.edge_slots += o.edge_slots;
        self.edge_clicks += o.edge_clicks;
        self.edge_errors += o.edge_errors;
        self.edge_double_clicks += o.edge_double_clicks;
    }
}

/// Integer sums over blocks, including the second moments needed for
/// block-level standard errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChainTally {
    pub blocks: u64,
    pub clicks: u64,
    pub errors: u64,
    pub double_clicks: u64,
    pub clicks_sq: u64,
    pub errors_sq: u64,
    pub double_clicks_sq: u64,
    pub clicks_errors: u64,
    pub slots: SlotTally,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BlockCount {
    clicks: u64,
    errors: u64,
    double_clicks: u64,
}

impl BlockCount {
    fn add(&mut self, o: SlotOutcome) {
        self.clicks += o.click as u64;
        self.errors += o.error as u64;
        self.double_clicks += o.double_click as u64;
    }
}

impl ChainTally {
    fn push_block(&mut self, b: BlockCount) {
        self.blocks += 1;
        self.clicks += b.clicks;
        self.errors += b.errors;
        self.double_clicks += b.double_clicks;
        self.clicks_sq += b.clicks * b.clicks;
        self.errors_sq += b.errors * b.errors;
        self.double_clicks_sq += b.double_clicks * b.double_clicks;
        self.clicks_errors += b.clicks * b.errors;
    }

    fn merge(&mut self, o: &ChainTally) {
        self.blocks += o.blocks;
        self.clicks += o.clicks;
        self.errors += o.errors;
        self.double_clicks += o.double_clicks;
        self.clicks_sq += o.clicks_sq;
        self.errors_sq += o.errors_sq;
        self.double_clicks_sq += o.double_clicks_sq;
        self.clicks_errors += o.clicks_errors;
        self.slots.merge(&o.slots);
    }
}

/// A Monte-Carlo rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_blocks: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainEstimate {
    pub gain: McEstimate,
    /// `None` when Bob never clicked.
    pub qber: Option<McEstimate>,
    pub dc: McEstimate,
    pub tally: ChainTally,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct SlotOutcome {
    click: bool,
    error: bool,
    double_click: bool,
}

struct Physics {
    model: PerSignalModel,
    det: DetectionProbs,
    single: f64,
}

impl Physics {
    /// Samples one of Bob's slots. `draw` yields uniforms in `[0, 1)`.
    fn sample_slot(
        &self,
        prev: Pulse,
        cur: Pulse,
        mut draw: impl FnMut() -> f64,
        slots: &mut SlotTally,
    ) -> SlotOutcome {
        match (prev.kind, cur.kind) {
            (PulseKind::Coherent, PulseKind::Coherent) => {
                let aligned = prev.phase_correct == cur.phase_correct;
                let click = draw() < self.det.s;
                let error = click && !aligned;
                slots.cc_slots += 1;
                slots.cc_misaligned += !aligned as u64;
                slots.cc_clicks += click as u64;
                slots.cc_errors += error as u64;
                SlotOutcome {
                    click,
                    error,
                    double_click: false,
                }
            }
            (PulseKind::Vacuum, PulseKind::Vacuum) => SlotOutcome::default(),
            _ => {
                let right = draw() < self.single;
                let wrong = draw() < self.single;
                let out = match (right, wrong) {
                    (true, true) => SlotOutcome {
                        click: true,
                        error: draw() < 0.5,
                        double_click: true,
                    },
                    (false, true) => SlotOutcome {
                        click: true,
                        error: true,
                        double_click: false,
                    },
                    (true, false) => SlotOutcome {
                        click: true,
                        error: false,
                        double_click: false,
                    },
                    (false, false) => SlotOutcome::default(),
                };
                slots.edge_slots += 1;
                slots.edge_clicks += out.click as u64;
                slots.edge_errors += out.error as u64;
                slots.edge_double_clicks += out.double_click as u64;
                out
            }
        }
    }

    fn next_block(
        &self,
        rng: &mut ChaCha8Rng,
        policy: &BlockPolicy,
        outcomes: &mut [bool],
        pulses: &mut [Pulse],
    ) -> Result<()> {
        for (ok, pulse) in outcomes.iter_mut().zip(pulses.iter_mut()) {
            *ok = rng.random::<f64>() < self.model.p_succ;
            let correct = !(*ok && self.model.p_err > 0.0 && rng.random::<f64>() < self.model.p_err);
            *pulse = Pulse {
                kind: PulseKind::Vacuum,
                phase_correct: correct,
            };
        }
        if let Some((start, len)) = qualifying_run(outcomes, policy.min_run)? {
            let send = len > policy.min_run || rng.random::<f64>() < policy.send_prob;
            if send {
                for pulse in &mut pulses[start..start + len] {
                    pulse.kind = PulseKind::Coherent;
                }
            }
        }
        Ok(())
    }
}

struct Segment {
    tally: ChainTally,
    first_block: BlockCount,
    first_pulse: Pulse,
    last_pulse: Pulse,
    joint_draws: [f64; 4],
}

fn run_segment(
    physics: &Physics,
    policy: &BlockPolicy,
    seed: u64,
    index: u64,
    n_blocks: u64,
) -> Result<Segment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    let joint_draws: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());

    let m = policy.block_len;
    let mut outcomes = vec![false; m];
    let mut pulses = vec![Pulse::VACUUM; m];
    let mut tally = ChainTally::default();
    let mut first_block = BlockCount::default();
    let mut first_pulse = Pulse::VACUUM;
    let mut prev_last = Pulse::VACUUM;

    for b in 0..n_blocks {
        physics.next_block(&mut rng, policy, &mut outcomes, &mut pulses)?;
        let mut count = BlockCount::default();
        if b > 0 {
            let o = physics.sample_slot(prev_last, pulses[0], || rng.random(), &mut tally.slots);
            count.add(o);
        } else {
            first_pulse = pulses[0];
        }
        for j in 1..m {
            let o = physics.sample_slot(pulses[j - 1], pulses[j], || rng.random(), &mut tally.slots);
            count.add(o);
        }
        prev_last = pulses[m - 1];
        if b == 0 {
            first_block = count;
        } else {
            tally.push_block(count);
        }
    }

    Ok(Segment {
        tally,
        first_block,
        first_pulse,
        last_pulse: prev_last,
        joint_draws,
    })
}

/// Simulates `n_blocks` consecutive blocks of Eve's attack and Bob's
/// detection. `workers` sizes a dedicated thread pool; it never changes the
/// result.
pub fn simulate_chain(
    src: &SourceParams,
    strategy: &Strategy,
    policy: &BlockPolicy,
    n_blocks: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<ChainEstimate> {
    if n_blocks == 0 {
        return Err(domain("n_blocks", 0.0, "at least one block"));
    }
    policy.validate()?;
    let det = policy.detection()?;
    let physics = Physics {
        model: per_signal_model(src, strategy)?,
        single: det.single_detector(),
        det,
    };

    let n_segments = n_blocks.div_ceil(SEGMENT_BLOCKS);
    let seg_len = |k: u64| (n_blocks - k * SEGMENT_BLOCKS).min(SEGMENT_BLOCKS);
    let run_all = || -> Result<Vec<Segment>> {
        (0..n_segments)
            .into_par_iter()
            .map(|k| run_segment(&physics, policy, seed, k, seg_len(k)))
            .collect()
    };
    let segments = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ModelError::Invariant(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    // Burn-in block supplying the pulse that precedes the chain.
    let mut burn_rng = ChaCha8Rng::seed_from_u64(seed);
    burn_rng.set_stream(0);
    let m = policy.block_len;
    let mut outcomes = vec![false; m];
    let mut pulses = vec![Pulse::VACUUM; m];
    physics.next_block(&mut burn_rng, policy, &mut outcomes, &mut pulses)?;
    let mut prev_last = pulses[m - 1];

    let mut tally = ChainTally::default();
    for seg in &segments {
        let mut draws = seg.joint_draws.iter().copied();
        let joint = physics.sample_slot(
            prev_last,
            seg.first_pulse,
            || draws.next().expect("joint slot uses at most four draws"),
            &mut tally.slots,
        );
        let mut first = seg.first_block;
        first.add(joint);
        tally.push_block(first);
        tally.merge(&seg.tally);
        prev_last = seg.last_pulse;
    }

    Ok(estimate(&tally, m, seed))
}

fn estimate(tally: &ChainTally, block_len: usize, seed: u64) -> ChainEstimate {
    let n = tally.blocks as f64;
    let m = block_len as f64;
    let mean_c = tally.clicks as f64 / n;
    let mean_e = tally.errors as f64 / n;
    let mean_d = tally.double_clicks as f64 / n;
    let var = |sum_sq: u64, mean: f64| {
        if tally.blocks < 2 {
            0.0
        } else {
            ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        }
    };
    let var_c = var(tally.clicks_sq, mean_c);
    let var_e = var(tally.errors_sq, mean_e);
    let var_d = var(tally.double_clicks_sq, mean_d);
    let cov_ce = if tally.blocks < 2 {
        0.0
    } else {
        (tally.clicks_errors as f64 - n * mean_c * mean_e) / (n - 1.0)
    };

    let rate = |mean: f64, var: f64| McEstimate {
        mean: mean / m,
        stderr: (var / n).sqrt() / m,
        n_blocks: tally.blocks,
        seed,
    };
    let qber = (tally.clicks > 0).then(|| {
        let q = mean_e / mean_c;
        // Delta method for a ratio of means.
        let var_q = (var_e - 2.0 * q * cov_ce + q * q * var_c).max(0.0) / (n * mean_c * mean_c);
        McEstimate {
            mean: q,
            stderr: var_q.sqrt(),
            n_blocks: tally.blocks,
            seed,
        }
    });
    ChainEstimate {
        gain: rate(mean_c, var_c),
        qber,
        dc: rate(mean_d, var_d),
        tally: *tally,
    }
}
