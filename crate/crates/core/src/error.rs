use thiserror::Error;

use crate::types::{PartyId, Round, SubnetId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("k1, k2 and m must be positive")]
    ZeroDimension,
    #[error("k2 = {k2} does not divide m = {m}")]
    ColumnsDoNotDivide { m: u32, k2: u32 },
    #[error("{name} = {value} is below the minimum of 2")]
    DelayTooSmall { name: &'static str, value: u64 },
    #[error("cell ({row},{col}) is outside the grid")]
    CellOutOfRange { row: u32, col: u32 },
    #[error("symbol index {i} is outside 1..={m}")]
    IndexOutOfRange { i: u32, m: u32 },
    #[error("{kind} index {index} is out of range")]
    SubnetOutOfRange { kind: &'static str, index: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("party {0} joins more than once")]
    DuplicateJoin(PartyId),
    #[error("party {party} leaves at round {round} but is not active then")]
    LeaveWhileInactive { party: PartyId, round: Round },
    #[error("party {party} leaves more than once")]
    DuplicateLeave { party: PartyId },
    #[error("bootstrap {bootstrap} for {party} at round {round} is not active at round {round}-1")]
    InactiveBootstrap {
        party: PartyId,
        bootstrap: PartyId,
        round: Round,
    },
    #[error("join of {party} at round {round} names no bootstrap node")]
    NoBootstraps { party: PartyId, round: Round },
    #[error("initial parties may not name bootstrap nodes ({0})")]
    InitialWithBootstraps(PartyId),
    #[error("generator arguments are inconsistent: {0}")]
    BadGenerator(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("malicious id {0} is also scheduled as an honest party")]
    MaliciousScheduled(PartyId),
    #[error("adversary tried to send from non-malicious id {0}")]
    ForgedSender(PartyId),
    #[error("adversary ordering at round {round} is not a permutation of {len} items")]
    BadPermutation { round: Round, len: usize },
    #[error("subnet {0} outside the configured range")]
    BadSubnet(SubnetId),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("log has no header record")]
    MissingHeader,
    #[error("log header is invalid: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("log has no header record")]
    MissingHeader,
}
