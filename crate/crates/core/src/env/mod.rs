//! The random environment: the walk S, the offsets delta, the potential V
//! and the conductance network built on top of it.

mod conductance;
mod field;
mod law;

pub use conductance::{ConductanceView, Domain, FlatPotential, FnPotential, Negated, Potential, StepDistribution};
pub use field::{EnvironmentField, EnvironmentSpec, ListedSeries, Series};
pub use law::{DeltaLaw, IncrementLaw};
