use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::block_analytics::{default_min_run, BlockPolicy};
use crate::frontier::{
    default_block_lens, default_send_probs, ExperimentPoint, MuBetaSearch, StrategyFamily,
    SweepConfig,
};
use crate::signal_model::{SourceParams, Strategy, StrategyKind, StrategySpec};
use crate::verify::VerifySweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Evaluate,
    Frontier,
    Simulate,
    Verify,
    Assess,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::Evaluate => "evaluate",
            CommandName::Frontier => "frontier",
            CommandName::Simulate => "simulate",
            CommandName::Verify => "verify",
            CommandName::Assess => "assess",
        }
    }
}

/// Block policy as written in a config; `min_run` defaults to `⌊M/2 + 1⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub block_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_run: Option<usize>,
    pub send_prob: f64,
    pub mu_beta: f64,
}

impl PolicySpec {
    pub fn resolve(&self) -> crate::Result<BlockPolicy> {
        BlockPolicy::new(
            self.block_len,
            self.min_run.unwrap_or_else(|| default_min_run(self.block_len)),
            self.send_prob,
            self.mu_beta,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: StrategyKind,
    /// MED only. Defaults to six evenly spaced values over `[b/a, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// MED only; positions within `[b/a, 1]`, exclusive with `lambdas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_fractions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_lens: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_beta: Option<MuBetaSearch>,
    /// Absent or null: no double-click cap.
    #[serde(default)]
    pub dc_cap: Option<f64>,
}

impl SweepSpec {
    pub fn resolve(&self, src: &SourceParams) -> Result<SweepConfig, CliError> {
        let family = match (self.family, &self.lambdas, &self.lambda_fractions) {
            (StrategyKind::Usd, None, None) => StrategyFamily::Usd,
            (StrategyKind::BobDevice, None, None) => StrategyFamily::BobDevice,
            (StrategyKind::Med, None, None) => StrategyFamily::med_default(src),
            (StrategyKind::Med, Some(l), None) => StrategyFamily::Med { lambdas: l.clone() },
            (StrategyKind::Med, None, Some(fr)) => StrategyFamily::Med {
                lambdas: fr
                    .iter()
                    .map(|&f| match Strategy::med_at_fraction(src, f)? {
                        Strategy::Med { lambda } => Ok(lambda),
                        _ => unreachable!(),
                    })
                    .collect::<crate::Result<_>>()?,
            },
            (StrategyKind::Med, Some(_), Some(_)) => {
                return Err(CliError::config("sweep: give lambdas or lambda_fractions, not both"))
            }
            (kind, _, _) => {
                return Err(CliError::config(format!("sweep: family {kind} takes no lambdas")))
            }
        };
        let cfg = SweepConfig {
            mu_alpha: src.mu_alpha,
            family,
            block_lens: self.block_lens.clone().unwrap_or_else(default_block_lens),
            send_probs: self.send_probs.clone().unwrap_or_else(default_send_probs),
            search: self.mu_beta.unwrap_or_default(),
            dc_cap: self.dc_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub n_blocks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessSpec {
    /// Relative paths are taken from the config file's directory.
    pub frontier_csv: PathBuf,
    pub points: Vec<ExperimentPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

/// One JSON document for every command; sections a command does not use
/// are ignored by it but still validated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assess: Option<AssessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn source(&self) -> Result<SourceParams, CliError> {
        let src = self.source.ok_or_else(|| CliError::config("missing section: source"))?;
        Ok(SourceParams::new(src.mu_alpha)?)
    }

    pub fn strategy(&self, src: &SourceParams) -> Result<Strategy, CliError> {
        let spec = self.strategy.ok_or_else(|| CliError::config("missing section: strategy"))?;
        Ok(spec.resolve(src)?)
    }

    pub fn policy(&self) -> Result<BlockPolicy, CliError> {
        let spec = self.policy.ok_or_else(|| CliError::config("missing section: policy"))?;
        Ok(spec.resolve()?)
    }

    pub fn output_json(&self) -> Option<&PathBuf> {
        self.outputs.as_ref().and_then(|o| o.json.as_ref())
    }

    pub fn output_csv(&self) -> Option<&PathBuf> {
        self.outputs.as_ref().and_then(|o| o.csv.as_ref())
    }
}
