//! Closed-form robustness and efficiency bounds for the grid distributed
//! array, evaluated in log space.

pub mod bounds;
pub mod efficiency;
pub mod error;
pub mod logreal;
pub mod math;
pub mod tradeoff;

pub use bounds::{binary_entropy, overlap_min, prob_bad_cells, prob_bad_columns, robustness_error_bound, BoundInputs, ColumnBound};
pub use efficiency::{comm_complexity, expected_peers, store_threshold, virtual_node_storage, Complexity, EfficiencyInputs, Operation, PeerEstimate};
pub use error::AnalysisError;
pub use logreal::LogReal;
pub use tradeoff::{max_k1, tradeoff_curve, write_estimates_csv, Assumptions, TradeoffCurve, TradeoffRow};
