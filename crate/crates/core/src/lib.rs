//! Finite-blocklength rate analysis for multi-user MIMO uplinks with MRC and
//! ZF combining, under perfect (coherent) or pilot-estimated (non-coherent)
//! channel knowledge, plus the Monte Carlo machinery that checks it.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

pub mod analysis;
pub mod channel;
pub mod coherent_metrics;
pub mod config;
pub mod error;
pub mod gamma_moments;
pub mod noncoherent_metrics;
pub mod oracle;
pub mod rng;
pub mod simkit;
pub mod specfun;
pub mod sweep;
pub mod validate;

pub use analysis::{evaluate, reports_over_draws};
pub use channel::{draw_channels, BlockLinkStats, ChannelSet};
pub use coherent_metrics::{Asymptotics, BlockMetrics, Capacity, RateReport};
pub use config::{ConfigFile, Mode, MuPolicy, PowerScaling, Scheme, SystemConfig};
pub use error::{Error, Result};
pub use gamma_moments::CorrGammaPair;
pub use noncoherent_metrics::GammaMatch;
pub use simkit::{Estimate, SimMode, TrialPlan};
pub use specfun::Tolerance;
pub use sweep::{run_sweep, SweepSpec};
