//! Belief-based programs over probabilistic action theories with noisy
//! sensors and effectors.
//!
//! * [`logic`]: sorts, values, terms, formulas, worlds.
//! * [`action`]: basic action theories with stochastic actions.
//! * [`belief`]: exact weighted possible-worlds belief and its update.
//! * [`program`] and [`engine`]: program syntax and online execution.
//! * [`verifier`]: exhaustive exploration and belief-consistency audits.
//! * [`abstraction`]: refinement mappings and the refinement checker.
//! * [`syntax`]: concrete syntax, diagnostics and canonical printers.
//! * [`bundled`]: the example domains.

pub mod abstraction;
pub mod action;
pub mod belief;
pub mod bundled;
pub mod engine;
pub mod logic;
pub mod program;
pub mod rational;
pub mod syntax;
pub mod trace;
pub mod verifier;

pub use abstraction::{check_refinement, RefinementMapping, RefinementOptions, RefinementReport};
pub use action::{Bat, GroundAction, IssuedAction, Observation};
pub use belief::{BeliefModel, BeliefState, SupportBelief};
pub use engine::{replay, EngineOptions, Machine, NatureOracle};
pub use logic::{Formula, Value, World};
pub use program::Program;
pub use rational::Rational;
pub use trace::{Status, Trace};
pub use verifier::{audit, explore, AuditChecks, ExploreOptions, ExplorationStats};
