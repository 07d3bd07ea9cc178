//! Link queue model for signalized urban networks.
//!
//! Each road segment is split into a common link followed by parallel turn
//! links. Links track three cumulative curves (inflow, arrivals at the queue
//! tail, outflow); the queue tail moves with a triangular fundamental diagram
//! and the free-flow speed may change over time. Nodes share downstream
//! supply among feeding links without holding back traffic.
//!
//! ```
//! use lqm_core::{io::builders, run};
//!
//! let trace = run(&builders::paper_intersection()).unwrap();
//! assert_eq!(trace.rows.len(), 32 * 200);
//! ```

pub mod engine;
pub mod error;
pub mod io;
pub mod link;
pub mod network;
pub mod node;
pub mod series;
pub mod verify;

pub use engine::{run, run_with, ExecutionMode, QueueBranch, RunOptions, RunReport, Simulation, SimulationState};
pub use error::{EngineError, IoError, MetricError, NodeError, SegmentError};
pub use io::{ComparisonReport, Quantity, TraceRow, TraceSet};
pub use link::{FdPoint, TravelDistanceTable};
pub use network::{
    LinkId, LinkKind, LinkParams, LinkRecord, NodeId, NodeSpec, RoadSegment, Scenario, ValidationReport, Violation,
};
pub use node::{allocate, NodeStepProblem, NodeStepSolution};
pub use series::StepSeries;
