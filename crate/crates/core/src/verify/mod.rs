//! Independent reference implementations and property checks used by the
//! test suites. Nothing here is called by the engine; the oracles are
//! written from the model definition rather than from the engine code so
//! the two cannot share a bug.

pub mod cfl;
pub mod node_oracle;
pub mod point_queue;
pub mod properties;

pub use cfl::{property_cfl, CflEntry, CflReport};
pub use node_oracle::{oracle_node, permutations};
pub use point_queue::{oracle_single_link, OracleCurves, PointQueueOracle};
pub use properties::{conservation_error, holding_free_violations, property_invariance, InvarianceReport};
