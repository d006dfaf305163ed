use serde::Serialize;

use super::config::{CommandName, RunConfig};

pub const TOOL_NAME: &str = "seqattack";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output document of every command. `timestamp` (Unix seconds) is only
/// filled on request so that repeated runs stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: CommandName,
    pub timestamp: Option<u64>,
    pub seed: Option<u64>,
    pub input: RunConfig,
    pub result: serde_json::Value,
}

impl ResultRecord {
    pub fn new(command: CommandName, input: &RunConfig, seed: Option<u64>, result: serde_json::Value) -> Self {
        Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command,
            timestamp: None,
            seed,
            input: input.clone(),
            result,
        }
    }

    pub fn stamp_now(&mut self) {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}
