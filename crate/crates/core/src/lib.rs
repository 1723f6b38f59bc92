//! Round-synchronous simulation of a grid-based robust distributed array, its
//! subnet-discovery subprotocol, and a per-run robustness auditor.

pub mod adversary;
pub mod audit;
pub mod engine;
pub mod error;
pub mod message;
pub mod metrics;
pub mod oracle;
pub mod rda;
pub mod scenario;
pub mod schedule;
pub mod subnet;
pub mod types;
pub mod workload;

pub use engine::log::{Event, EventLog, InterfaceCall, ProtocolMode, ProtocolSpec, Record};
pub use engine::{run, ExperimentConfig, LogOptions};
pub use audit::{lemma_conformance, verify_rda_robustness, verify_subnet_robustness, EventQuery, Verdict};
pub use error::{AuditError, EngineError, LogError, ParamsError, ScheduleError};
pub use message::{Effect, Envelope, Payload, PayloadKind};
pub use oracle::CellOracle;
pub use schedule::{Schedule, ScheduleBuilder};
pub use types::{Cell, Handle, Params, PartyId, Predicate, Round, SubnetId, Symbol, SymbolIndex};
