//! Diagnostics built on the relative entropy: the term-by-term entropy
//! balance, entropy time series, Gronwall fits, the large-density bounds and
//! the weak-strong probe.

mod balance;
pub mod fischer;
mod gronwall;
mod probe;
mod series;

pub use balance::{
    entropy_balance_terms, EntropyBalanceTerms, CUTOFF_DERIVATIVE_G, CUTOFF_DERIVATIVE_I,
};
pub use fischer::{fischer_bounds_check, fischer_ensemble, FischerCheck, FischerEnsemble, Ladder};
pub use gronwall::{gronwall_probe, GronwallBranch, GronwallFit, LOG_FLOOR};
pub use probe::{weak_strong_probe, ProbeConfig, ProbeMode, ProbeOutcome};
pub use series::{relative_entropy_series, EntropyReport};
