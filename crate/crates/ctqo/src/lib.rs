//! Campaign runner for `ctqo-core`: TOML configs, CSV tables, JSON
//! summaries and hashed manifests.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod config;
pub mod error;
pub mod experiments;
pub mod summary;
pub mod table;

pub use config::{CampaignConfig, Experiment};
pub use error::CliError;
