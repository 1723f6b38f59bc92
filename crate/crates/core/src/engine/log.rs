//! The append-only event log and its JSON-lines encoding.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::LogError;
use crate::message::Envelope;
use crate::rda::SyncDelayPolicy;
use crate::types::{Handle, Params, PartyId, Round, SubnetId, Symbol, SymbolIndex};

pub const LOG_VERSION: u32 = 1;

/// Which protocol the honest parties run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    /// The grid protocol with its embedded subnet protocol.
    #[default]
    Grid,
    /// The subnet protocol on its own, driven by external subnet calls.
    Subnet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub mode: ProtocolMode,
    /// Receiver-side subnet optimizations (grid mode only).
    pub optimize: bool,
    pub sync_policy: SyncDelayPolicy,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            mode: ProtocolMode::Grid,
            optimize: true,
            sync_policy: SyncDelayPolicy::WorstCase,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub params: Params,
    pub protocol: ProtocolSpec,
    pub oracle_seed: u64,
    pub predicate_seed: u64,
    pub malicious: Vec<PartyId>,
    pub adversary: String,
    pub workload: String,
    /// Whether every sent envelope is logged.
    #[serde(default)]
    pub envelopes: bool,
}

/// An interface call scheduled on an honest party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum InterfaceCall {
    Store { h: Handle, i: SymbolIndex, x: Symbol },
    Get { h: Handle, i: SymbolIndex },
    CreateSubnet { sid: SubnetId, members: Vec<PartyId> },
    JoinSubnet { sid: SubnetId, via: PartyId },
    GetPeers { sid: SubnetId },
}

impl InterfaceCall {
    pub fn ordinal(&self) -> u32 {
        match self {
            InterfaceCall::Store { .. } => 0,
            InterfaceCall::Get { .. } => 1,
            InterfaceCall::CreateSubnet { .. } => 2,
            InterfaceCall::JoinSubnet { .. } => 3,
            InterfaceCall::GetPeers { .. } => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Header(Header),
    Init {
        party: PartyId,
        aux: bool,
        leave_at: Option<Round>,
    },
    Join {
        party: PartyId,
        bootstraps: Vec<PartyId>,
        extra: Vec<PartyId>,
        aux: bool,
        leave_at: Option<Round>,
    },
    JoinDone {
        party: PartyId,
    },
    Leave {
        party: PartyId,
    },
    Send(Envelope),
    Call {
        party: PartyId,
        call: InterfaceCall,
    },
    SubnetCreate {
        party: PartyId,
        sid: SubnetId,
        members: Vec<PartyId>,
    },
    SubnetJoin {
        party: PartyId,
        sid: SubnetId,
        via: PartyId,
    },
    Peers {
        party: PartyId,
        sid: SubnetId,
        peers: Vec<PartyId>,
    },
    Write {
        party: PartyId,
        h: Handle,
        i: SymbolIndex,
        x: Symbol,
    },
    GetResult {
        party: PartyId,
        h: Handle,
        i: SymbolIndex,
        called_at: Round,
        value: Option<Symbol>,
    },
    Active {
        parties: Vec<PartyId>,
    },
    MapSizes {
        max: usize,
        mean: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub round: Round,
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Totally ordered trace of one experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, round: Round, event: Event) {
        let seq = self.records.len() as u64;
        self.records.push(Record { round, seq, event });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> Option<&Header> {
        self.records.iter().find_map(|r| match &r.event {
            Event::Header(h) => Some(h),
            _ => None,
        })
    }

    /// Drops every record matching `pred`, keeping sequence numbers.
    pub fn retain(&mut self, mut keep: impl FnMut(&Record) -> bool) {
        self.records.retain(|r| keep(r));
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| LogError::Json {
                line: r.seq as usize + 1,
                source: e,
            })?;
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a log; blank lines are skipped. A non-empty log must start with
    /// a header of a known version.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| LogError::Json { line: n + 1, source: e })?;
            records.push(rec);
        }
        if let Some(first) = records.first() {
            match &first.event {
                Event::Header(h) if h.version == LOG_VERSION => {}
                Event::Header(h) => {
                    return Err(LogError::BadHeader(format!("unsupported version {}", h.version)))
                }
                _ => return Err(LogError::MissingHeader),
            }
        }
        Ok(EventLog { records })
    }

    pub fn from_jsonl(s: &str) -> Result<Self, LogError> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::Payload;

    fn header() -> Header {
        Header {
            version: LOG_VERSION,
            params: Params::new(2, 2, 4, 7, 2, 10).unwrap(),
            protocol: ProtocolSpec::default(),
            oracle_seed: 1,
            predicate_seed: 2,
            malicious: vec![PartyId(1_000_000)],
            adversary: "passive".into(),
            workload: "none".into(),
            envelopes: true,
        }
    }

    #[test]
    fn round_trip() {
        let mut log = EventLog::new();
        log.push(0, Event::Header(header()));
        log.push(
            0,
            Event::Init {
                party: PartyId(1),
                aux: true,
                leave_at: None,
            },
        );
        log.push(
            1,
            Event::Send(Envelope {
                from: PartyId(1),
                to: PartyId(2),
                sent_at: 1,
                payload: Payload::SyncRsp {
                    triples: vec![(Handle(vec![1]), 2, Symbol(vec![3, 4]))],
                },
            }),
        );
        log.push(
            2,
            Event::Call {
                party: PartyId(1),
                call: InterfaceCall::Get {
                    h: Handle(vec![9]),
                    i: 1,
                },
            },
        );
        log.push(3, Event::MapSizes { max: 3, mean: 1.5 });
        let text = log.to_jsonl();
        assert!(text.lines().next().unwrap().contains("\"kind\":\"header\""));
        let back = EventLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn rejects_headerless_and_garbage() {
        assert!(EventLog::from_jsonl("").unwrap().is_empty());
        assert!(matches!(
            EventLog::from_jsonl("{\"round\":0,\"seq\":0,\"kind\":\"leave\",\"party\":3}\n"),
            Err(LogError::MissingHeader)
        ));
        assert!(matches!(
            EventLog::from_jsonl("not json\n"),
            Err(LogError::Json { line: 1, .. })
        ));
    }
}
