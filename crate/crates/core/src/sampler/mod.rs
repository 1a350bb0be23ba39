//! Posterior sampling, stored draws, convergence diagnostics and
//! hyperparameter sensitivity.

pub mod bhm;
pub mod diagnostics;
pub mod engine;
pub mod sensitivity;
pub mod store;

pub use bhm::{fit_model, latent_name, parse_latent_name, BhmTarget};
pub use diagnostics::{diagnose, ess, psrf, raftery_lewis, DiagnosticRow, Psrf, RafteryLewis};
pub use engine::{run_chain, run_chains, Acceptance, Block, ChainConfig, Target};
pub use sensitivity::{local_sensitivity, sensitivity_table, Sensitivity, SensitivityRow};
pub use store::DrawStore;
