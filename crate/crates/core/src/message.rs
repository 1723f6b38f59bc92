//! Wire messages and the effect buffer protocol code writes into.

use serde::{Deserialize, Serialize};

use crate::oracle::CellOracle;
use crate::types::{Handle, Params, PartyId, Predicate, Round, SubnetId, Symbol, SymbolIndex, Triple};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Store { h: Handle, i: SymbolIndex, x: Symbol },
    StoreFwd { h: Handle, i: SymbolIndex, x: Symbol },
    Get { h: Handle, i: SymbolIndex },
    GetRsp { h: Handle, i: SymbolIndex, x: Symbol },
    Join,
    JoinRsp { peers: Vec<PartyId> },
    Sync,
    SyncRsp { triples: Vec<Triple> },
    JoinSubnet { sid: SubnetId },
    JoinSubnetPull { sid: SubnetId },
    JoinSubnetPullRsp { sid: SubnetId, peers: Vec<PartyId> },
    JoinSubnetFwd { sid: SubnetId, party: PartyId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Store,
    StoreFwd,
    Get,
    GetRsp,
    Join,
    JoinRsp,
    Sync,
    SyncRsp,
    JoinSubnet,
    JoinSubnetPull,
    JoinSubnetPullRsp,
    JoinSubnetFwd,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 12] = [
        PayloadKind::Store,
        PayloadKind::StoreFwd,
        PayloadKind::Get,
        PayloadKind::GetRsp,
        PayloadKind::Join,
        PayloadKind::JoinRsp,
        PayloadKind::Sync,
        PayloadKind::SyncRsp,
        PayloadKind::JoinSubnet,
        PayloadKind::JoinSubnetPull,
        PayloadKind::JoinSubnetPullRsp,
        PayloadKind::JoinSubnetFwd,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Store => "store",
            PayloadKind::StoreFwd => "store_fwd",
            PayloadKind::Get => "get",
            PayloadKind::GetRsp => "get_rsp",
            PayloadKind::Join => "join",
            PayloadKind::JoinRsp => "join_rsp",
            PayloadKind::Sync => "sync",
            PayloadKind::SyncRsp => "sync_rsp",
            PayloadKind::JoinSubnet => "join_subnet",
            PayloadKind::JoinSubnetPull => "join_subnet_pull",
            PayloadKind::JoinSubnetPullRsp => "join_subnet_pull_rsp",
            PayloadKind::JoinSubnetFwd => "join_subnet_fwd",
        }
    }

    pub fn is_subnet(self) -> bool {
        matches!(
            self,
            PayloadKind::JoinSubnet
                | PayloadKind::JoinSubnetPull
                | PayloadKind::JoinSubnetPullRsp
                | PayloadKind::JoinSubnetFwd
        )
    }
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Store { .. } => PayloadKind::Store,
            Payload::StoreFwd { .. } => PayloadKind::StoreFwd,
            Payload::Get { .. } => PayloadKind::Get,
            Payload::GetRsp { .. } => PayloadKind::GetRsp,
            Payload::Join => PayloadKind::Join,
            Payload::JoinRsp { .. } => PayloadKind::JoinRsp,
            Payload::Sync => PayloadKind::Sync,
            Payload::SyncRsp { .. } => PayloadKind::SyncRsp,
            Payload::JoinSubnet { .. } => PayloadKind::JoinSubnet,
            Payload::JoinSubnetPull { .. } => PayloadKind::JoinSubnetPull,
            Payload::JoinSubnetPullRsp { .. } => PayloadKind::JoinSubnetPullRsp,
            Payload::JoinSubnetFwd { .. } => PayloadKind::JoinSubnetFwd,
        }
    }
}

/// An authenticated point-to-point message, delivered at `sent_at + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: PartyId,
    pub to: PartyId,
    pub sent_at: Round,
    pub payload: Payload,
}

/// Something protocol code did that the engine must act on or log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Send { to: PartyId, payload: Payload },
    /// A new entry in the symbols map.
    Write { h: Handle, i: SymbolIndex, x: Symbol },
    /// Result of an internal or external `get_peers` call.
    Peers { sid: SubnetId, peers: Vec<PartyId> },
    SubnetCreate { sid: SubnetId, members: Vec<PartyId> },
    SubnetJoin { sid: SubnetId, via: PartyId },
    JoinDone,
    GetResult {
        h: Handle,
        i: SymbolIndex,
        called_at: Round,
        value: Option<Symbol>,
    },
}

/// Execution context handed to a node for one step.
pub struct Ctx<'a> {
    pub round: Round,
    pub me: PartyId,
    pub params: &'a Params,
    pub oracle: &'a CellOracle,
    pub predicate: &'a Predicate,
    /// Whether `get_peers` results are recorded.
    pub record_peers: bool,
    pub effects: &'a mut Vec<Effect>,
}

impl Ctx<'_> {
    pub fn send(&mut self, to: PartyId, payload: Payload) {
        self.effects.push(Effect::Send { to, payload });
    }

    pub fn emit(&mut self, e: Effect) {
        self.effects.push(e);
    }
}
