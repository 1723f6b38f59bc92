//! Reconstruction of the experiment's events from a log, and per-run
//! adjudication of both robustness notions and the intermediate lemmas.
//!
//! Honest parties are exactly those with an `Init` or `Join` record. All
//! predicates take rounds as logged; activity intervals are inclusive. When
//! the log records envelopes, a returned symbol counts only if a logged
//! `GetRsp` carrying it was delivered to the getter in that round.

mod lemmas;
mod occupancy;
mod verdict;

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::log::{Event, EventLog, Header, InterfaceCall, ProtocolMode, Record};
use crate::error::AuditError;
use crate::message::Payload;
use crate::oracle::{classify_sid, col_sid, row_sid, CellOracle, SubnetKind};
use crate::schedule::Interval;
use crate::types::{make_test_predicate, Cell, Handle, Params, PartyId, Predicate, Round, SubnetId, Symbol, SymbolIndex};

pub use lemmas::{lemma_conformance, LemmaCheck, LemmaReport};
pub use occupancy::{CorruptionSet, Occupancy};
pub use verdict::{verify_rda_robustness, verify_subnet_robustness, Counterexample, Verdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyInfo {
    pub cell: Cell,
    pub aux: bool,
    pub interval: Interval,
    /// Honest and malicious bootstrap nodes named by the join; empty for
    /// initial parties.
    pub bootstraps: Vec<PartyId>,
    /// Round in which `join` returned; 0 for initial parties.
    pub join_done: Option<Round>,
}

impl PartyInfo {
    pub fn initial(&self) -> bool {
        self.interval.join == 0
    }
}

/// A logged `store` call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreCall {
    pub party: PartyId,
    pub round: Round,
    pub h: Handle,
    pub i: SymbolIndex,
    pub x: Symbol,
}

/// A logged `get` call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GetCall {
    pub party: PartyId,
    pub round: Round,
    pub h: Handle,
    pub i: SymbolIndex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeersCall {
    pub party: PartyId,
    pub round: Round,
    pub sid: SubnetId,
    pub peers: Vec<PartyId>,
}

/// How a party entered a subnet, for the recursive definition of being in it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Membership {
    created: bool,
    /// Earliest `join_subnet` call through a party that itself stayed in the
    /// subnet for the following `Δ_SN` rounds.
    proper_from: Option<Round>,
}

/// Event predicates over one log.
#[derive(Debug)]
pub struct EventQuery<'a> {
    log: &'a EventLog,
    header: Header,
    oracle: CellOracle,
    predicate: Predicate,
    parties: BTreeMap<PartyId, PartyInfo>,
    occupancy: Occupancy,
    created: BTreeMap<SubnetId, Vec<PartyId>>,
    membership: BTreeMap<(SubnetId, PartyId), Membership>,
    members: BTreeMap<SubnetId, BTreeSet<PartyId>>,
    writes: BTreeMap<(Handle, SymbolIndex), BTreeMap<PartyId, (Round, Symbol)>>,
    stores: Vec<StoreCall>,
    gets: Vec<GetCall>,
    results: BTreeMap<(PartyId, Handle, SymbolIndex, Round), Vec<(Round, Option<Symbol>)>>,
    peers_calls: Vec<PeersCall>,
    last_round: Round,
    first_violation: Option<Round>,
}

impl<'a> EventQuery<'a> {
    pub fn new(log: &'a EventLog) -> Result<Self, AuditError> {
        let header = log.header().ok_or(AuditError::MissingHeader)?.clone();
        let params = header.params;
        let oracle = CellOracle::new(params, header.oracle_seed);
        let predicate = make_test_predicate(header.predicate_seed);
        let mut parties = BTreeMap::new();
        let mut creates: BTreeMap<SubnetId, Vec<(Round, PartyId, Vec<PartyId>)>> = BTreeMap::new();
        let mut joins: Vec<(Round, PartyId, SubnetId, PartyId)> = Vec::new();
        let mut delivered: BTreeSet<(PartyId, Round, &Handle, SymbolIndex, &Symbol)> = BTreeSet::new();
        let mut q = EventQuery {
            log,
            header,
            oracle,
            predicate,
            parties: BTreeMap::new(),
            occupancy: Occupancy::new(params, []),
            created: BTreeMap::new(),
            membership: BTreeMap::new(),
            members: BTreeMap::new(),
            writes: BTreeMap::new(),
            stores: Vec::new(),
            gets: Vec::new(),
            results: BTreeMap::new(),
            peers_calls: Vec::new(),
            last_round: 0,
            first_violation: None,
        };
        for rec in log.records() {
            let t = rec.round;
            q.last_round = q.last_round.max(t);
            match &rec.event {
                Event::Init { party, aux, leave_at } => {
                    parties.insert(
                        *party,
                        PartyInfo {
                            cell: q.oracle.cell(*party),
                            aux: *aux,
                            interval: Interval {
                                join: 0,
                                leave: *leave_at,
                            },
                            bootstraps: Vec::new(),
                            join_done: Some(0),
                        },
                    );
                }
                Event::Join {
                    party,
                    bootstraps,
                    extra,
                    aux,
                    leave_at,
                } => {
                    parties.insert(
                        *party,
                        PartyInfo {
                            cell: q.oracle.cell(*party),
                            aux: *aux,
                            interval: Interval {
                                join: t,
                                leave: *leave_at,
                            },
                            bootstraps: bootstraps.iter().chain(extra).copied().collect(),
                            join_done: None,
                        },
                    );
                }
                Event::JoinDone { party } => {
                    if let Some(info) = parties.get_mut(party) {
                        info.join_done.get_or_insert(t);
                    }
                }
                Event::Leave { party } => {
                    if let Some(info) = parties.get_mut(party) {
                        info.interval.leave.get_or_insert(t);
                    }
                }
                Event::Call { party, call } => match call {
                    InterfaceCall::Store { h, i, x } => q.stores.push(StoreCall {
                        party: *party,
                        round: t,
                        h: h.clone(),
                        i: *i,
                        x: x.clone(),
                    }),
                    InterfaceCall::Get { h, i } => q.gets.push(GetCall {
                        party: *party,
                        round: t,
                        h: h.clone(),
                        i: *i,
                    }),
                    _ => {}
                },
                Event::SubnetCreate { party, sid, members } => {
                    creates.entry(*sid).or_default().push((t, *party, members.clone()));
                }
                Event::SubnetJoin { party, sid, via } => joins.push((t, *party, *sid, *via)),
                Event::Peers { party, sid, peers } => q.peers_calls.push(PeersCall {
                    party: *party,
                    round: t,
                    sid: *sid,
                    peers: peers.clone(),
                }),
                Event::Write { party, h, i, x } => {
                    q.writes
                        .entry((h.clone(), *i))
                        .or_default()
                        .entry(*party)
                        .or_insert((t, x.clone()));
                }
                Event::GetResult {
                    party,
                    h,
                    i,
                    called_at,
                    value,
                } => q
                    .results
                    .entry((*party, h.clone(), *i, *called_at))
                    .or_default()
                    .push((t, value.clone())),
                Event::Send(env) => {
                    if let Payload::GetRsp { h, i, x } = &env.payload {
                        delivered.insert((env.to, env.sent_at + 1, h, *i, x));
                    }
                }
                Event::Header(_) | Event::Active { .. } | Event::MapSizes { .. } => {}
            }
        }
        if q.header.envelopes {
            for ((p, h, i, _), rs) in q.results.iter_mut() {
                for (t, v) in rs.iter_mut() {
                    if v.as_ref().is_some_and(|x| !delivered.contains(&(*p, *t, h, *i, x))) {
                        *v = None;
                    }
                }
            }
        }
        q.occupancy = Occupancy::new(params, parties.values().map(|p| (p.cell, p.interval)));
        q.parties = parties;
        q.resolve_subnets(creates, joins);
        q.first_violation = q.subnet_violations(Round::MAX).map(|(c, _)| c.round).min();
        Ok(q)
    }

    fn resolve_subnets(
        &mut self,
        creates: BTreeMap<SubnetId, Vec<(Round, PartyId, Vec<PartyId>)>>,
        mut joins: Vec<(Round, PartyId, SubnetId, PartyId)>,
    ) {
        let joined_at_zero: BTreeSet<SubnetId> = joins
            .iter()
            .filter(|(t, p, _, _)| *t == 0 && self.is_honest(*p))
            .map(|(_, _, s, _)| *s)
            .collect();
        for (sid, calls) in creates {
            let callers: BTreeSet<PartyId> = calls.iter().map(|(_, p, _)| *p).collect();
            let listed: BTreeSet<PartyId> = calls[0].2.iter().copied().collect();
            let ok = calls
                .iter()
                .all(|(t, _, m)| *t == 0 && m.iter().copied().collect::<BTreeSet<_>>() == listed)
                && callers == listed
                && listed.iter().all(|p| self.is_honest(*p))
                && !joined_at_zero.contains(&sid);
            if ok {
                for p in &listed {
                    self.membership.entry((sid, *p)).or_default().created = true;
                    self.members.entry(sid).or_default().insert(*p);
                }
                self.created.insert(sid, listed.into_iter().collect());
            }
        }
        joins.sort_by_key(|(t, ..)| *t);
        let d = self.params().subnet_delay;
        for (t, p, sid, via) in joins {
            if !self.is_honest(p) {
                continue;
            }
            self.members.entry(sid).or_default().insert(p);
            if self.is_honest(via) && self.stays_in_subnet(sid, via, t, t + d) {
                let m = self.membership.entry((sid, p)).or_default();
                m.proper_from = Some(m.proper_from.map_or(t, |f| f.min(t)));
            }
        }
    }

    pub fn log(&self) -> &EventLog {
        self.log
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn params(&self) -> &Params {
        &self.header.params
    }

    pub fn oracle(&self) -> &CellOracle {
        &self.oracle
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.occupancy
    }

    /// Last round that has any record.
    pub fn last_round(&self) -> Round {
        self.last_round
    }

    pub fn parties(&self) -> &BTreeMap<PartyId, PartyInfo> {
        &self.parties
    }

    pub fn party(&self, p: PartyId) -> Option<&PartyInfo> {
        self.parties.get(&p)
    }

    pub fn stores(&self) -> &[StoreCall] {
        &self.stores
    }

    pub fn gets(&self) -> &[GetCall] {
        &self.gets
    }

    pub fn peers_calls(&self) -> &[PeersCall] {
        &self.peers_calls
    }

    /// Honest parties that ever entered `sid` by creation or `join_subnet`.
    pub fn subnet_members(&self, sid: SubnetId) -> impl Iterator<Item = PartyId> + '_ {
        self.members.get(&sid).into_iter().flatten().copied()
    }

    pub fn is_honest(&self, p: PartyId) -> bool {
        self.parties.contains_key(&p)
    }

    pub fn active(&self, p: PartyId, t: Round) -> bool {
        self.parties.get(&p).is_some_and(|i| i.interval.contains(t))
    }

    pub fn active_duration(&self, p: PartyId, t0: Round, t1: Round) -> bool {
        self.parties.get(&p).is_some_and(|i| i.interval.covers(t0, t1))
    }

    /// Active at `t`, and either initial or with `join` returned by `t`.
    pub fn fully_joined(&self, p: PartyId, t: Round) -> bool {
        self.parties
            .get(&p)
            .is_some_and(|i| i.interval.contains(t) && i.join_done.is_some_and(|d| d <= t))
    }

    pub fn fully_joined_duration(&self, p: PartyId, t0: Round, t1: Round) -> bool {
        self.fully_joined(p, t0) && self.active_duration(p, t0, t1)
    }

    pub fn stored(&self, p: PartyId, t: Round, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        self.stores
            .iter()
            .any(|s| s.party == p && s.round == t && s.h == *h && s.i == i && s.x == *x)
    }

    pub fn called_get(&self, p: PartyId, t: Round, h: &Handle, i: SymbolIndex) -> bool {
        self.gets.iter().any(|g| g.party == p && g.round == t && g.h == *h && g.i == i)
    }

    /// The get called at `t` returned `x` at some round in `[t, t+delay]`.
    pub fn got_result(&self, p: PartyId, t: Round, h: &Handle, i: SymbolIndex, delay: u64, x: &Symbol) -> bool {
        self.results
            .get(&(p, h.clone(), i, t))
            .is_some_and(|rs| rs.iter().any(|(r, v)| *r <= t + delay && v.as_ref() == Some(x)))
    }

    /// The first result returned for the get called at `t`, if any.
    pub fn first_result(&self, p: PartyId, t: Round, h: &Handle, i: SymbolIndex) -> Option<&(Round, Option<Symbol>)> {
        self.results.get(&(p, h.clone(), i, t)).and_then(|rs| rs.first())
    }

    pub fn created_subnet(&self, sid: SubnetId) -> Option<&[PartyId]> {
        self.created.get(&sid).map(Vec::as_slice)
    }

    pub fn stays_in_subnet(&self, sid: SubnetId, p: PartyId, t0: Round, t1: Round) -> bool {
        if !self.active_duration(p, t0, t1) {
            return false;
        }
        let d = self.params().subnet_delay;
        self.membership
            .get(&(sid, p))
            .is_some_and(|m| m.created || m.proper_from.is_some_and(|f| f + d <= t0))
    }

    pub fn is_in_subnet(&self, sid: SubnetId, p: PartyId, t: Round) -> bool {
        self.stays_in_subnet(sid, p, t, t)
    }

    pub fn called_get_peers(&self, sid: SubnetId, p: PartyId, t: Round) -> bool {
        self.peers_calls.iter().any(|c| c.sid == sid && c.party == p && c.round == t)
    }

    pub fn got_peer(&self, sid: SubnetId, p: PartyId, q: PartyId, t: Round) -> bool {
        self.peers_calls
            .iter()
            .any(|c| c.sid == sid && c.party == p && c.round == t && c.peers.binary_search(&q).is_ok())
    }

    /// Pairs outside the receiver-side optimizations' scope: the grid never
    /// asks a base node for other rows' members of its row subnet, nor
    /// anyone for foreign members of a column subnet.
    pub(crate) fn out_of_scope(&self, sid: SubnetId, p: PartyId, q: PartyId) -> bool {
        if self.header.protocol.mode != ProtocolMode::Grid || !self.header.protocol.optimize {
            return false;
        }
        let (Some(pi), Some(qi)) = (self.parties.get(&p), self.parties.get(&q)) else {
            return false;
        };
        match classify_sid(self.params(), sid) {
            Some((SubnetKind::Row, r)) => !pi.aux && qi.cell.row != r,
            Some((SubnetKind::Column, c)) => qi.cell.col != c || pi.cell.col != c,
            None => false,
        }
    }

    /// Earliest round at which the subnet robustness implication fails.
    pub fn first_subnet_violation(&self) -> Option<Round> {
        self.first_violation
    }

    pub(crate) fn subnet_violations(&self, until: Round) -> impl Iterator<Item = (&PeersCall, PartyId)> + '_ {
        self.peers_calls
            .iter()
            .filter(move |c| c.round <= until && self.is_in_subnet(c.sid, c.party, c.round))
            .flat_map(move |c| {
                self.subnet_members(c.sid)
                    .filter(move |q| {
                        self.is_in_subnet(c.sid, *q, c.round)
                            && !self.out_of_scope(c.sid, c.party, *q)
                            && c.peers.binary_search(q).is_err()
                    })
                    .map(move |q| (c, q))
            })
    }

    pub fn subnetprot_good(&self, t: Round) -> bool {
        self.first_subnet_violation().is_none_or(|f| t < f)
    }

    pub fn column_good(&self, c: u32, t: Round, overlap: u64) -> bool {
        self.occupancy.column_good(c, t, overlap)
    }

    pub fn good_cell(&self, r: u32, c: u32, t1: Round, t2: Round) -> bool {
        self.occupancy.good_cell(r, c, t1, t2)
    }

    pub fn corruption_set(&self, p: PartyId, t: Round) -> CorruptionSet {
        let r = self.parties.get(&p).map_or(1, |i| i.cell.row);
        self.occupancy.corruption_set(r, t)
    }

    /// Largest `|C_p^τ|/m` over honest parties and `τ <= lifetime`.
    pub fn max_corruption_fraction(&self) -> f64 {
        let rows: BTreeSet<u32> = self.parties.values().map(|i| i.cell.row).collect();
        let mut worst: f64 = 0.0;
        for r in rows {
            for t in 0..=self.params().lifetime {
                worst = worst.max(self.occupancy.corruption_fraction(r, t));
            }
        }
        worst
    }

    /// Round of `p`'s first write of `(h, i)` and the value written.
    pub fn first_write(&self, p: PartyId, h: &Handle, i: SymbolIndex) -> Option<&(Round, Symbol)> {
        self.writes.get(&(h.clone(), i)).and_then(|m| m.get(&p))
    }

    /// Active at `t` and holding `x` under `(h, i)` at the start of `t`.
    pub fn in_symbol_storage(&self, p: PartyId, t: Round, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        self.active(p, t) && self.first_write(p, h, i).is_some_and(|(w, v)| *w < t && v == x)
    }

    pub fn stored_in_column(&self, c: u32, t0: Round, t1: Round, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        let sid = col_sid(self.params(), c);
        self.subnet_members(sid)
            .filter(|p| self.stays_in_subnet(sid, *p, t0, t1))
            .all(|p| self.in_symbol_storage(p, t1, h, i, x))
    }

    pub fn stored_and_retain(&self, c: u32, t0: Round, t1: Round, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        if t0 == 0 {
            return false;
        }
        let sid = col_sid(self.params(), c);
        self.subnet_members(sid)
            .any(|p| self.in_symbol_storage(p, t0, h, i, x) && self.stays_in_subnet(sid, p, t0 - 1, t1))
    }

    pub fn row_sid(&self, r: u32) -> SubnetId {
        row_sid(self.params(), r)
    }

    pub fn col_sid(&self, c: u32) -> SubnetId {
        col_sid(self.params(), c)
    }

    /// Records in `[from, to]` that mention any of `parties`, at most `limit`.
    pub fn timeline(&self, parties: &[PartyId], from: Round, to: Round, limit: usize) -> Vec<String> {
        self.log
            .records()
            .iter()
            .filter(|r| r.round >= from && r.round <= to && mentions(r, parties))
            .take(limit)
            .map(|r| {
                let body = serde_json::to_string(&r.event).unwrap_or_default();
                format!("{:>6} #{:<6} {}", r.round, r.seq, clip(&body, 160))
            })
            .collect()
    }
}

fn mentions(r: &Record, parties: &[PartyId]) -> bool {
    let has = |p: &PartyId| parties.contains(p);
    match &r.event {
        Event::Init { party, .. }
        | Event::Join { party, .. }
        | Event::JoinDone { party }
        | Event::Leave { party }
        | Event::Call { party, .. }
        | Event::SubnetCreate { party, .. }
        | Event::SubnetJoin { party, .. }
        | Event::Peers { party, .. }
        | Event::Write { party, .. }
        | Event::GetResult { party, .. } => has(party),
        Event::Send(e) => has(&e.from) || has(&e.to),
        Event::Header(_) | Event::Active { .. } | Event::MapSizes { .. } => false,
    }
}

fn clip(s: &str, n: usize) -> String {
    if s.len() <= n {
        s.to_string()
    } else {
        let mut end = n;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}
