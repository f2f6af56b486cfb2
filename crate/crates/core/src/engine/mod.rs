//! Dense state-vector and density-operator engine over labeled subsystems.

pub mod density;
pub mod layout;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod povm;
pub mod random;
pub mod state;
pub mod weyl;

pub use density::DensityOperator;
pub use layout::SubsystemLayout;
pub use linalg::{CMatrix, C64};
pub use measure::{
    born_probabilities, post_select, sample_outcome, sample_outcome_seeded, Effect, PostSelection,
    QuantumState, SampledOutcome,
};
pub use operator::{Operator, StructuredOp};
pub use povm::PovmSet;
pub use state::{StateVector, UnitaryOp};
pub use weyl::{bell_basis, bell_povm, maximally_entangled, weyl_operators};
