//! Analysis of sequential intercept-resend attacks on differential-phase-shift
//! QKD with weak coherent pulses.

pub mod block_analytics;
pub mod cli_io;
pub mod error;
pub mod frontier;
pub mod signal_model;
pub mod sim;
pub mod verify;

pub use block_analytics::{metrics, AttackMetrics, BlockPolicy, Qber};
pub use error::{ModelError, Result};
pub use signal_model::{SourceParams, Strategy, StrategyKind};
