//! The grid distributed-array protocol: initialization, join with data
//! synchronization, store, get and the seven grid message handlers.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::message::{Ctx, Effect, Payload};
use crate::oracle::{col_for_symbol, col_sid, row_sid};
use crate::subnet::{GridView, SubnetNode};
use crate::types::{Cell, Handle, Params, PartyId, Round, Symbol, SymbolIndex, Triple};

/// How long a node waits before answering `Sync`. Every choice stays within
/// `sync_delay - 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SyncDelayPolicy {
    /// A fixed delay, clamped to the admissible maximum.
    Constant { rounds: u64 },
    /// Uniform over `0..=sync_delay-2`, keyed by `(seed, node, round)`.
    Uniform { seed: u64 },
    /// Always the admissible maximum.
    #[default]
    WorstCase,
}

impl SyncDelayPolicy {
    pub fn delay(&self, params: &Params, node: PartyId, round: Round) -> u64 {
        let max = params.sync_delay.saturating_sub(2);
        match *self {
            SyncDelayPolicy::Constant { rounds } => rounds.min(max),
            SyncDelayPolicy::Uniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ round.rotate_left(29));
                rng.set_stream(node.0);
                rng.random_range(0..=max)
            }
            SyncDelayPolicy::WorstCase => max,
        }
    }
}

/// Progress of a multi-round `join` call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JoinProgress {
    Idle,
    /// Waiting for `JoinRsp` from the bootstrap nodes.
    AwaitingRsp {
        started: Round,
        bootstraps: BTreeSet<PartyId>,
        /// First response of each bootstrap, in arrival order.
        buffer: Vec<(PartyId, Vec<PartyId>)>,
    },
    /// Column joins issued; waiting out the subnet delay.
    AwaitingSubnet { started: Round },
    Done { at: Round },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PendingGet {
    h: Handle,
    i: SymbolIndex,
    called_at: Round,
}

/// Per-party state of the grid protocol.
#[derive(Clone, Debug)]
pub struct GridNode {
    cell: Cell,
    aux: bool,
    symbols: BTreeMap<(Handle, SymbolIndex), Symbol>,
    subnet: SubnetNode,
    col_parties: BTreeSet<PartyId>,
    join: JoinProgress,
    pending_gets: Vec<PendingGet>,
    sync_timers: Vec<(Round, PartyId, Vec<Triple>)>,
    policy: SyncDelayPolicy,
}

impl GridNode {
    /// A fresh node. With `optimize`, its subnet layer drops messages and
    /// peers the grid never needs.
    pub fn new(cell: Cell, aux: bool, policy: SyncDelayPolicy, optimize: bool) -> Self {
        let subnet = if optimize {
            SubnetNode::with_filter(GridView { cell, aux })
        } else {
            SubnetNode::new()
        };
        GridNode {
            cell,
            aux,
            symbols: BTreeMap::new(),
            subnet,
            col_parties: BTreeSet::new(),
            join: JoinProgress::Idle,
            pending_gets: Vec::new(),
            sync_timers: Vec::new(),
            policy,
        }
    }

    pub fn cell(&self) -> Cell {
        self.cell
    }

    pub fn is_bootstrap(&self) -> bool {
        self.aux
    }

    pub fn join_progress(&self) -> &JoinProgress {
        &self.join
    }

    pub fn subnet(&self) -> &SubnetNode {
        &self.subnet
    }

    pub fn symbol(&self, h: &Handle, i: SymbolIndex) -> Option<&Symbol> {
        self.symbols.get(&(h.clone(), i))
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&(Handle, SymbolIndex), &Symbol)> {
        self.symbols.iter()
    }

    /// Coordinated setup at round 0 with the full initial party list.
    pub fn init(&mut self, ctx: &mut Ctx<'_>, parties: &[(PartyId, bool)]) {
        for r in 1..=ctx.params.k1 {
            let members: Vec<PartyId> = parties
                .iter()
                .filter(|(p, aux)| *aux || ctx.oracle.row(*p) == r)
                .map(|(p, _)| *p)
                .collect();
            if members.contains(&ctx.me) {
                self.subnet.create_subnet(ctx, row_sid(ctx.params, r), &members);
            }
        }
        let c = self.cell.col;
        let members: Vec<PartyId> = parties
            .iter()
            .map(|(p, _)| *p)
            .filter(|p| ctx.oracle.col(*p) == c)
            .collect();
        self.subnet.create_subnet(ctx, col_sid(ctx.params, c), &members);
        self.col_parties = members.into_iter().collect();
        self.join = JoinProgress::Done { at: 0 };
    }

    /// Starts joining at the current round via `bootstraps`.
    pub fn join(&mut self, ctx: &mut Ctx<'_>, bootstraps: &[PartyId]) {
        let rows: Vec<u32> = if self.aux {
            (1..=ctx.params.k1).collect()
        } else {
            vec![self.cell.row]
        };
        for &b in bootstraps {
            for &r in &rows {
                self.subnet.join_subnet(ctx, row_sid(ctx.params, r), b);
            }
        }
        self.col_parties.clear();
        for &b in bootstraps {
            ctx.send(b, Payload::Join);
        }
        self.join = JoinProgress::AwaitingRsp {
            started: ctx.round,
            bootstraps: bootstraps.iter().copied().collect(),
            buffer: Vec::new(),
        };
    }

    fn peers_in_cell(&self, ctx: &mut Ctx<'_>, row: u32, col: u32) -> Vec<PartyId> {
        self.subnet
            .get_peers(ctx, row_sid(ctx.params, row))
            .into_iter()
            .filter(|p| ctx.oracle.cell(*p) == Cell { row, col })
            .collect()
    }

    fn valid(ctx: &Ctx<'_>, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        col_for_symbol(ctx.params, i).is_ok() && ctx.predicate.eval(h, i, x)
    }

    fn write(&mut self, ctx: &mut Ctx<'_>, h: &Handle, i: SymbolIndex, x: &Symbol) {
        if let std::collections::btree_map::Entry::Vacant(e) = self.symbols.entry((h.clone(), i)) {
            e.insert(x.clone());
            ctx.emit(Effect::Write {
                h: h.clone(),
                i,
                x: x.clone(),
            });
        }
    }

    pub fn store(&mut self, ctx: &mut Ctx<'_>, h: &Handle, i: SymbolIndex, x: &Symbol) {
        if !Self::valid(ctx, h, i, x) {
            return;
        }
        let c = col_for_symbol(ctx.params, i).expect("checked above");
        for p in self.peers_in_cell(ctx, self.cell.row, c) {
            ctx.send(
                p,
                Payload::Store {
                    h: h.clone(),
                    i,
                    x: x.clone(),
                },
            );
        }
    }

    pub fn get(&mut self, ctx: &mut Ctx<'_>, h: &Handle, i: SymbolIndex) {
        let Ok(c) = col_for_symbol(ctx.params, i) else {
            ctx.emit(Effect::GetResult {
                h: h.clone(),
                i,
                called_at: ctx.round,
                value: None,
            });
            return;
        };
        for p in self.peers_in_cell(ctx, self.cell.row, c) {
            ctx.send(p, Payload::Get { h: h.clone(), i });
        }
        self.pending_gets.push(PendingGet {
            h: h.clone(),
            i,
            called_at: ctx.round,
        });
    }

    /// Handles one delivered message.
    pub fn handle(&mut self, ctx: &mut Ctx<'_>, from: PartyId, payload: &Payload) {
        if self.subnet.handle(ctx, from, payload) {
            return;
        }
        match payload {
            Payload::Store { h, i, x } => {
                if !Self::valid(ctx, h, *i, x) {
                    return;
                }
                self.write(ctx, h, *i, x);
                let c = col_for_symbol(ctx.params, *i).expect("validated");
                for p in self.subnet.get_peers(ctx, col_sid(ctx.params, c)) {
                    ctx.send(
                        p,
                        Payload::StoreFwd {
                            h: h.clone(),
                            i: *i,
                            x: x.clone(),
                        },
                    );
                }
            }
            Payload::StoreFwd { h, i, x } => {
                if Self::valid(ctx, h, *i, x) {
                    self.write(ctx, h, *i, x);
                }
            }
            Payload::Get { h, i } => {
                if let Some(x) = self.symbols.get(&(h.clone(), *i)) {
                    ctx.send(
                        from,
                        Payload::GetRsp {
                            h: h.clone(),
                            i: *i,
                            x: x.clone(),
                        },
                    );
                }
            }
            Payload::GetRsp { h, i, x } => {
                if !Self::valid(ctx, h, *i, x) {
                    return;
                }
                let now = ctx.round;
                let (hit, rest): (Vec<_>, Vec<_>) = self
                    .pending_gets
                    .drain(..)
                    .partition(|g| g.h == *h && g.i == *i && now <= g.called_at + 2);
                self.pending_gets = rest;
                for g in hit {
                    ctx.emit(Effect::GetResult {
                        h: g.h,
                        i: g.i,
                        called_at: g.called_at,
                        value: Some(x.clone()),
                    });
                }
            }
            Payload::Join => {
                if !self.aux {
                    return;
                }
                let c = ctx.oracle.col(from);
                let mut all = BTreeSet::new();
                for r in 1..=ctx.params.k1 {
                    all.extend(self.subnet.get_peers(ctx, row_sid(ctx.params, r)));
                }
                let peers = all.into_iter().filter(|p| ctx.oracle.col(*p) == c).collect();
                ctx.send(from, Payload::JoinRsp { peers });
            }
            Payload::JoinRsp { peers } => {
                if let JoinProgress::AwaitingRsp {
                    started,
                    bootstraps,
                    buffer,
                } = &mut self.join
                {
                    let fresh = ctx.round <= *started + 2 && bootstraps.contains(&from);
                    if fresh && buffer.iter().all(|(b, _)| *b != from) {
                        buffer.push((from, peers.clone()));
                    }
                }
            }
            Payload::Sync => {
                let snapshot: Vec<Triple> = self
                    .symbols
                    .iter()
                    .map(|((h, i), x)| (h.clone(), *i, x.clone()))
                    .collect();
                let t = self.policy.delay(ctx.params, ctx.me, ctx.round);
                if t == 0 {
                    ctx.send(from, Payload::SyncRsp { triples: snapshot });
                } else {
                    self.sync_timers.push((ctx.round + t, from, snapshot));
                }
            }
            Payload::SyncRsp { triples } => {
                for (h, i, x) in triples {
                    if Self::valid(ctx, h, *i, x) {
                        self.write(ctx, h, *i, x);
                    }
                }
            }
            Payload::JoinSubnet { .. }
            | Payload::JoinSubnetPull { .. }
            | Payload::JoinSubnetPullRsp { .. }
            | Payload::JoinSubnetFwd { .. } => unreachable!("handled by the subnet layer"),
        }
    }

    /// End-of-round continuations: pulls, the join state machine, delayed
    /// sync replies and get timeouts.
    pub fn tick(&mut self, ctx: &mut Ctx<'_>) {
        self.subnet.tick(ctx);
        let now = ctx.round;
        match &mut self.join {
            JoinProgress::AwaitingRsp { started, buffer, .. } if now >= *started + 2 => {
                let started = *started;
                let buffer = std::mem::take(buffer);
                let sid = col_sid(ctx.params, self.cell.col);
                for (_, peers) in buffer {
                    for p in &peers {
                        if !self.col_parties.contains(p) {
                            self.subnet.join_subnet(ctx, sid, *p);
                        }
                    }
                    self.col_parties.extend(peers);
                }
                self.join = JoinProgress::AwaitingSubnet { started };
            }
            _ => {}
        }
        if let JoinProgress::AwaitingSubnet { started } = self.join {
            if now >= started + 2 + ctx.params.subnet_delay {
                let peers = self.subnet.get_peers(ctx, col_sid(ctx.params, self.cell.col));
                for p in &peers {
                    ctx.send(*p, Payload::Sync);
                }
                self.col_parties = peers.into_iter().collect();
                ctx.emit(Effect::JoinDone);
                self.join = JoinProgress::Done { at: now };
            }
        }
        let (due, later): (Vec<_>, Vec<_>) = self.sync_timers.drain(..).partition(|(t, _, _)| *t <= now);
        self.sync_timers = later;
        for (_, to, triples) in due {
            ctx.send(to, Payload::SyncRsp { triples });
        }
        let (expired, live): (Vec<_>, Vec<_>) = self
            .pending_gets
            .drain(..)
            .partition(|g| now >= g.called_at + 3);
        self.pending_gets = live;
        for g in expired {
            ctx.emit(Effect::GetResult {
                h: g.h,
                i: g.i,
                called_at: g.called_at,
                value: None,
            });
        }
    }
}
