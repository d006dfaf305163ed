use serde::{Deserialize, Serialize};

use super::FrontierPoint;
use crate::error::{domain, ModelError, Result};

/// An observed operating point of a DPS QKD experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPoint {
    pub label: String,
    pub gain: f64,
    pub qber: f64,
    #[serde(default)]
    pub mu_alpha: Option<f64>,
    #[serde(default)]
    pub dc_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// A sequential attack reproduces at least the observed gain with at
    /// most the observed QBER.
    InsecureAgainstSequential,
    NotExcluded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment {
    pub label: String,
    pub gain: f64,
    pub qber: f64,
    pub verdict: Verdict,
    /// Frontier QBER at the observed gain (linear interpolation), if the
    /// frontier reaches that gain.
    pub frontier_qber: Option<f64>,
    /// Lowest-QBER frontier point with gain >= the observed gain and QBER
    /// <= the observed QBER.
    pub dominating: Option<FrontierPoint>,
}

/// Lowest QBER the frontier attains at gain `>= gain`, interpolating
/// linearly between adjacent points. `frontier` must be sorted by gain.
pub fn frontier_qber_at(frontier: &[FrontierPoint], gain: f64) -> Option<f64> {
    let first = frontier.first()?;
    let last = frontier.last()?;
    if gain > last.gain {
        return None;
    }
    if gain <= first.gain {
        return Some(first.qber);
    }
    let idx = frontier.partition_point(|p| p.gain < gain);
    let (lo, hi) = (&frontier[idx - 1], &frontier[idx]);
    if hi.gain == gain {
        return Some(hi.qber);
    }
    let w = (gain - lo.gain) / (hi.gain - lo.gain);
    Some(lo.qber + w * (hi.qber - lo.qber))
}

pub fn assess_point(point: &ExperimentPoint, frontier: &[FrontierPoint]) -> Result<Assessment> {
    if frontier.is_empty() {
        return Err(ModelError::EmptyFrontier);
    }
    for (name, v) in [("gain", point.gain), ("qber", point.qber)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(domain(name, v, "a value in [0, 1]"));
        }
    }
    if frontier.windows(2).any(|w| w[0].gain > w[1].gain) {
        return Err(ModelError::Invariant("frontier must be sorted by gain".into()));
    }
    let frontier_qber = frontier_qber_at(frontier, point.gain);
    let verdict = match frontier_qber {
        Some(q) if q <= point.qber => Verdict::InsecureAgainstSequential,
        _ => Verdict::NotExcluded,
    };
    let dominating = frontier
        .iter()
        .find(|p| p.gain >= point.gain)
        .filter(|p| p.qber <= point.qber)
        .copied();
    Ok(Assessment {
        label: point.label.clone(),
        gain: point.gain,
        qber: point.qber,
        verdict,
        frontier_qber,
        dominating,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::StrategyKind;

    fn fp(gain: f64, qber: f64) -> FrontierPoint {
        FrontierPoint {
            gain,
            qber,
            dc: 0.0,
            block_len: 5,
            min_run: 3,
            send_prob: 1.0,
            mu_beta: 1.0,
            lambda: None,
            strategy: StrategyKind::Usd,
        }
    }

    fn exp(gain: f64, qber: f64) -> ExperimentPoint {
        ExperimentPoint {
            label: "x".into(),
            gain,
            qber,
            mu_alpha: None,
            dc_cap: None,
        }
    }

    #[test]
    fn interpolation() {
        let f = [fp(0.1, 0.01), fp(0.3, 0.05)];
        assert_eq!(frontier_qber_at(&f, 0.05), Some(0.01));
        assert!((frontier_qber_at(&f, 0.2).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(frontier_qber_at(&f, 0.3), Some(0.05));
        assert_eq!(frontier_qber_at(&f, 0.31), None);
    }

    #[test]
    fn verdicts() {
        let f = [fp(0.1, 0.01), fp(0.3, 0.05)];
        let a = assess_point(&exp(0.2, 0.2), &f).unwrap();
        assert_eq!(a.verdict, Verdict::InsecureAgainstSequential);
        assert_eq!(a.dominating, Some(f[1]));
        let a = assess_point(&exp(0.2, 0.02), &f).unwrap();
        assert_eq!(a.verdict, Verdict::NotExcluded);
        assert_eq!(a.dominating, None);
        let a = assess_point(&exp(0.5, 0.4), &f).unwrap();
        assert_eq!(a.verdict, Verdict::NotExcluded);
        assert!(assess_point(&exp(0.2, 0.2), &[]).is_err());
        assert!(assess_point(&exp(1.2, 0.2), &f).is_err());
    }

    #[test]
    fn verdict_json_names() {
        let s = serde_json::to_string(&Verdict::InsecureAgainstSequential).unwrap();
        assert_eq!(s, "\"INSECURE_AGAINST_SEQUENTIAL\"");
    }
}
