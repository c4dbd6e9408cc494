pub mod bdg;
pub mod corpus;
pub mod costmodel;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod policies;
pub mod simulator;
pub mod solver;
pub mod stats;
pub mod suitability;
pub mod synth;
pub mod textprep;

pub use corpus::{BugId, BugRecord, Day, DevId, DeveloperProfile};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use pipeline::{PipelineConfig, Workbench};
pub use policies::PolicyKind;
pub use simulator::{SimConfig, SimOutput};
pub use solver::{AssignmentInstance, AssignmentSolution, PrecedenceMode, Variant};
