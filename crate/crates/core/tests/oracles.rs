//! Closed forms against reference computations: brute-force block walks,
//! the library's exact enumeration, and the Monte-Carlo chain.

mod common;

use common::*;
use seqattack::block_analytics::{boundary_prob, metrics};
use seqattack::frontier::{
    build_frontier, optimize_mu_beta, MuBetaOutcome, MuBetaSearch, StrategyFamily, SweepConfig,
};
use seqattack::sim::{enumerate_exact, simulate_chain};
use seqattack::signal_model::{pair_error_prob, per_signal_model, detection_probs};
use seqattack::{BlockPolicy, SourceParams, Strategy};

fn sweep() -> impl Iterator<Item = (f64, Strategy, BlockPolicy)> {
    SWEEP_MU_ALPHA.into_iter().flat_map(|mu_alpha| {
        sweep_strategies(mu_alpha).into_iter().flat_map(move |strategy| {
            sweep_shapes().into_iter().flat_map(move |(m, r)| {
                SWEEP_Q.into_iter().flat_map(move |q| {
                    SWEEP_MU_BETA
                        .into_iter()
                        .map(move |mb| (mu_alpha, strategy, BlockPolicy::new(m, r, q, mb).unwrap()))
                })
            })
        })
    })
}

#[test]
fn closed_form_matches_brute_force_walk() {
    let mut n = 0;
    for (mu_alpha, strategy, policy) in sweep() {
        let src = SourceParams::new(mu_alpha).unwrap();
        let got = metrics(&src, &strategy, &policy).unwrap();
        let want = brute_force(
            mu_alpha,
            &strategy,
            policy.block_len,
            policy.min_run,
            policy.send_prob,
            policy.mu_beta,
        );
        let m = policy.block_len;
        let ctx = format!("{mu_alpha} {strategy:?} {policy:?}");
        assert!(close(got.gain, want.gain(m), 1e-9), "gain {ctx}");
        assert!(close(got.dc, want.dc(m), 1e-9), "dc {ctx}");
        match (got.qber.value(), want.qber()) {
            (Some(a), Some(b)) => assert!(close(a, b, 1e-9), "qber {ctx}: {a} vs {b}"),
            (a, b) => assert_eq!(a, b, "qber {ctx}"),
        }
        n += 1;
    }
    assert_eq!(n, 12 * 3 * 3 * 2 * 5);
}

#[test]
fn enumeration_matches_brute_force_and_boundary() {
    for (mu_alpha, strategy, policy) in sweep() {
        let src = SourceParams::new(mu_alpha).unwrap();
        let e = enumerate_exact(&src, &strategy, &policy).unwrap();
        let want = brute_force(
            mu_alpha,
            &strategy,
            policy.block_len,
            policy.min_run,
            policy.send_prob,
            policy.mu_beta,
        );
        assert!(close(e.clicks_per_block, want.clicks, 1e-12));
        assert!(close(e.errors_per_block, want.errors, 1e-12));
        assert!(
            close(e.double_clicks_per_block, want.double_clicks, 1e-12),
            "{strategy:?} {policy:?} {} {}",
            e.double_clicks_per_block,
            want.double_clicks
        );
        let p_succ = per_signal_model(&src, &strategy).unwrap().p_succ;
        let closed = boundary_prob(p_succ, &policy).p;
        assert!((e.boundary_prob - closed).abs() <= 1e-12, "{policy:?}");
        assert!((want.boundary - closed).abs() <= 1e-12, "{policy:?}");
    }
}

#[test]
fn zero_success_gives_undefined_qber() {
    let src = SourceParams::new(0.0).unwrap();
    let policy = BlockPolicy::new(5, 3, 0.5, 0.8).unwrap();
    let e = enumerate_exact(&src, &Strategy::Usd, &policy).unwrap();
    assert_eq!(e.metrics.gain, 0.0);
    assert_eq!(e.metrics.dc, 0.0);
    assert!(e.metrics.qber.value().is_none());
    assert!(metrics(&src, &Strategy::Usd, &policy).unwrap().qber.value().is_none());
}

fn within(mean: f64, stderr: f64, target: f64, k: f64) -> bool {
    (mean - target).abs() <= k * stderr
}

#[test]
fn chain_matches_closed_form_usd() {
    let src = SourceParams::new(0.16).unwrap();
    let policy = BlockPolicy::new(5, 3, 0.5, 0.8).unwrap();
    let closed = metrics(&src, &Strategy::Usd, &policy).unwrap();
    let est = simulate_chain(&src, &Strategy::Usd, &policy, 400_000, 11, None).unwrap();
    assert!(within(est.gain.mean, est.gain.stderr, closed.gain, 4.0));
    assert!(within(est.dc.mean, est.dc.stderr, closed.dc, 4.0));
    let q = est.qber.unwrap();
    assert!(within(q.mean, q.stderr, closed.qber.value().unwrap(), 4.0));
}

#[test]
fn chain_med_full_strength_qber() {
    let mu_alpha: f64 = 0.16;
    let src = SourceParams::new(mu_alpha).unwrap();
    let policy = BlockPolicy::new(5, 3, 0.5, 1.0).unwrap();
    let strategy = Strategy::Med { lambda: 1.0 };
    let est = simulate_chain(&src, &strategy, &policy, 1_000_000, 5, None).unwrap();
    let q = est.qber.unwrap();
    assert!(within(q.mean, q.stderr, (-4.0 * mu_alpha).exp() / 2.0, 4.0), "{q:?}");
}

/// Per-slot rates from the chain's own tallies.
#[test]
fn slot_physics_converges() {
    let src = SourceParams::new(0.2).unwrap();
    let policy = BlockPolicy::new(4, 3, 0.6, 1.3).unwrap();
    let strategy = strategy_at(0.2, seqattack::StrategyKind::Med, 0.4);
    let est = simulate_chain(&src, &strategy, &policy, 1_000_000, 3, None).unwrap();
    let sl = est.tally.slots;
    let (s, t, d) = slot_probs(policy.mu_beta);
    let (_, p_err) = per_pulse(0.2, &strategy);

    let binom = |hits: u64, n: u64, p: f64| {
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        (hits as f64 / n as f64 - p).abs() <= 4.0 * sd
    };
    assert!(sl.edge_slots > 100_000 && sl.cc_slots > 100_000, "{sl:?}");
    assert!(binom(sl.edge_clicks, sl.edge_slots, t));
    assert!(binom(sl.edge_errors, sl.edge_slots, t / 2.0));
    assert!(binom(sl.edge_double_clicks, sl.edge_slots, d));
    assert!(binom(sl.cc_clicks, sl.cc_slots, s));
    assert!(binom(sl.cc_misaligned, sl.cc_slots, 2.0 * p_err * (1.0 - p_err)));
    let model = per_signal_model(&src, &strategy).unwrap();
    let tilde = pair_error_prob(&model, &detection_probs(policy.mu_beta).unwrap());
    assert!(binom(sl.cc_errors, sl.cc_slots, tilde));
}

/// Chain against enumeration over the `M <= 8` sweep at one `(μ_α, μ_β)`,
/// for cells with enough clicks for the standard errors to mean something.
#[test]
fn chain_matches_enumeration_on_sweep() {
    let n_blocks = 60_000;
    let mut compared = 0;
    for (i, (mu_alpha, strategy, policy)) in sweep()
        .filter(|(ma, _, p)| *ma == 0.2 && p.mu_beta == 1.0)
        .enumerate()
    {
        let src = SourceParams::new(mu_alpha).unwrap();
        let exact = enumerate_exact(&src, &strategy, &policy).unwrap().metrics;
        let expected_clicks = exact.gain * (policy.block_len as u64 * n_blocks) as f64;
        if expected_clicks < 2000.0 {
            continue;
        }
        let est = simulate_chain(&src, &strategy, &policy, n_blocks, 1000 + i as u64, Some(1)).unwrap();
        let ctx = format!("{strategy:?} {policy:?}");
        assert!(within(est.gain.mean, est.gain.stderr, exact.gain, 4.5), "gain {ctx}");
        assert!(within(est.dc.mean, est.dc.stderr, exact.dc, 4.5) || exact.dc == 0.0, "dc {ctx}");
        if let (Some(q), Some(target)) = (est.qber, exact.qber.value()) {
            assert!(within(q.mean, q.stderr, target, 4.5), "qber {ctx}");
        }
        compared += 1;
    }
    assert!(compared >= 60, "only {compared} cells compared");
}

#[test]
fn optimizer_matches_fine_scan() {
    let mu_alpha = 0.16;
    let src = SourceParams::new(mu_alpha).unwrap();
    let cap = 1e-8;
    let out = optimize_mu_beta(&src, &Strategy::Usd, 5, 1.0, Some(cap), None, &MuBetaSearch::default()).unwrap();
    let MuBetaOutcome::Optimal(best) = out else {
        panic!("expected a feasible optimum");
    };
    assert!(best.metrics.dc <= cap);

    let n = 200_000;
    let (lo, hi) = (1e-4f64.ln(), 1e2f64.ln());
    let mut scan_min = f64::INFINITY;
    for i in 0..=n {
        let mb = (lo + (hi - lo) * i as f64 / n as f64).exp();
        let policy = BlockPolicy::new(5, 3, 1.0, mb).unwrap();
        let m = metrics(&src, &Strategy::Usd, &policy).unwrap();
        if m.dc <= cap {
            if let Some(q) = m.qber.value() {
                scan_min = scan_min.min(q);
            }
        }
    }
    let q = best.metrics.qber.value().unwrap();
    assert!((q - scan_min).abs() <= 1e-6, "{q} vs {scan_min}");
}

#[test]
fn optimizer_full_strength_med_prefers_largest_gain() {
    let src = SourceParams::new(0.16).unwrap();
    let search = MuBetaSearch::default();
    let out = optimize_mu_beta(&src, &Strategy::Med { lambda: 1.0 }, 6, 0.5, None, None, &search).unwrap();
    let best = out.optimal().unwrap();
    // Gain saturates in floating point well before the top of the interval.
    let top = metrics(&src, &Strategy::Med { lambda: 1.0 }, &BlockPolicy::new(6, 4, 0.5, search.max).unwrap()).unwrap();
    assert_eq!(best.metrics.gain, top.gain);
    assert!((best.metrics.qber.value().unwrap() - (-0.64f64).exp() / 2.0).abs() < 1e-12);
}

#[test]
fn optimizer_zero_cap_is_infeasible() {
    let src = SourceParams::new(0.16).unwrap();
    for m in [3, 5, 9] {
        let out = optimize_mu_beta(&src, &Strategy::Usd, m, 0.5, Some(0.0), None, &MuBetaSearch::default()).unwrap();
        assert_eq!(out, MuBetaOutcome::Infeasible);
    }
}

#[test]
fn frontier_points_check_out() {
    let src = SourceParams::new(0.16).unwrap();
    let mut cfg = SweepConfig::new(0.16, StrategyFamily::med_default(&src), Some(1e-8));
    cfg.block_lens = (3..=12).collect();
    let frontier = build_frontier(&cfg, None).unwrap();
    assert!(!frontier.points.is_empty());
    for p in &frontier.points {
        assert!(p.dc <= 1e-8);
        let m = p.recompute(&src).unwrap();
        assert!(rel(m.gain, p.gain) <= 1e-12 && rel(m.dc, p.dc) <= 1e-12);
        assert!(rel(m.qber.value().unwrap(), p.qber) <= 1e-12);
        if p.block_len <= 8 {
            let e = enumerate_exact(&src, &p.strategy().unwrap(), &p.policy().unwrap()).unwrap().metrics;
            assert!(rel(e.gain, p.gain) <= 1e-9 && rel(e.dc, p.dc) <= 1e-9);
            assert!(rel(e.qber.value().unwrap(), p.qber) <= 1e-9);
        }
    }
    for (i, a) in frontier.points.iter().enumerate() {
        for b in &frontier.points[i + 1..] {
            assert!(!a.dominates(b) && !b.dominates(a));
        }
    }
}
