//! Strictly proper scoring rules, the wagering mechanisms built on them, and
//! constructions showing that a coalition of forecasters who disagree can
//! always beat truthful reporting by submitting one shared report.

pub mod arbitrage;
pub mod cli;
pub mod mechanisms;
pub mod scoring;
pub mod sim;
pub mod simplex;

pub use arbitrage::{
    arbitrage_report, binary_equalizer, closed_form_surplus, grid_search_equalizer,
    spherical_aux, surplus_by_outcome, verify_dominance_oracle, ArbitrageError, ArbitrageResult,
    Coalition, DominanceVerdict, Player, SphericalAux,
};
pub use mechanisms::{MechanismKind, MechanismSpec, PaymentTable};
pub use scoring::{ConvexGenerator, RuleKind, ScoringRule};
pub use simplex::{Forecast, OutcomeIndex};
