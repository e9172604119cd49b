//! Virtual-cell uplink simulator.
//!
//! Base-stations are grouped into virtual cells (hierarchical minimax-linkage
//! clustering, with K-means and spectral clustering as baselines), users are
//! affiliated to cells, and each cell solves its joint channel and power
//! allocation problem independently. The [`harness`] module sweeps all of this
//! over seeded Monte Carlo realizations.

pub mod channel;
pub mod clustering;
pub mod harness;
pub mod matching;
pub mod power;
pub mod rate;
pub mod scenario;
pub mod stats;
pub mod tensor;
pub mod virtual_cells;

pub use channel::{alternating_solve, AllocationRule, AlternatingOutcome, AlternatingSettings};
pub use clustering::{Clustering, Dendrogram, Merge};
pub use harness::{ExperimentConfig, Scheme};
pub use power::{solve_power_continuous, PowerSolution, SolverSettings};
pub use rate::{CellView, ChannelAssignment, EvalMode, PowerMatrix};
pub use scenario::{ChannelRealization, Deployment, Point, SystemConfig};
pub use virtual_cells::{Affiliation, VirtualCellPartition};
