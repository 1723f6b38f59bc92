//! The round-synchronous security experiment.
//!
//! Per round: scheduled joins (with adversary-chosen extra bootstrap nodes),
//! then deliveries of the previous round's envelopes together with the
//! round's interface calls in one ordered batch, then per-node continuations,
//! then scheduled leaves, and finally the rushing adversary.

pub mod log;
pub mod order;

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{Adversary, AdversaryView};
use crate::error::{EngineError, ScheduleError};
use crate::message::{Ctx, Effect, Envelope};
use crate::oracle::CellOracle;
use crate::rda::GridNode;
use crate::schedule::Schedule;
use crate::subnet::SubnetNode;
use crate::types::{make_test_predicate, Params, PartyId, Predicate, Round};
use crate::workload::{Workload, WorkloadView};

use self::log::{Event, EventLog, Header, InterfaceCall, ProtocolMode, ProtocolSpec, LOG_VERSION};
use self::order::{intra_round_order, ItemKey, CALL_CLASS_BASE};

/// What the log records besides lifecycle, calls and storage events.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogOptions {
    pub envelopes: bool,
    /// Results of every `get_peers` call, internal ones included.
    pub peers: bool,
    /// The active set of every round.
    pub active: bool,
    /// Per-round maximum and mean subnet-map sizes.
    pub map_sizes: bool,
}

impl Default for LogOptions {
    fn default() -> Self {
        LogOptions {
            envelopes: true,
            peers: true,
            active: false,
            map_sizes: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub params: Params,
    pub schedule: Schedule,
    pub protocol: ProtocolSpec,
    pub oracle_seed: u64,
    pub predicate_seed: u64,
    pub malicious: Vec<PartyId>,
    pub log: LogOptions,
    /// Extra rounds after the lifetime in which messages are still delivered
    /// and pending calls finish, but no new calls are issued.
    pub drain: Round,
}

impl ExperimentConfig {
    pub fn new(params: Params, schedule: Schedule) -> Self {
        ExperimentConfig {
            params,
            schedule,
            protocol: ProtocolSpec::default(),
            oracle_seed: 0,
            predicate_seed: 0,
            malicious: Vec::new(),
            log: LogOptions::default(),
            drain: 3,
        }
    }

    /// Rejects configurations the experiment does not admit.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.params.validate()?;
        let pool: BTreeSet<PartyId> = self.malicious.iter().copied().collect();
        if let Some(p) = pool.iter().find(|p| self.schedule.contains(**p)) {
            return Err(EngineError::MaliciousScheduled(*p));
        }
        for (t, j) in self.schedule.all_joins() {
            if t == 0 {
                continue;
            }
            if self.protocol.mode == ProtocolMode::Grid && j.bootstraps.is_empty() {
                return Err(ScheduleError::NoBootstraps {
                    party: j.party,
                    round: t,
                }
                .into());
            }
            for b in &j.bootstraps {
                if !self.schedule.contains(*b) && !pool.contains(b) {
                    return Err(ScheduleError::InactiveBootstrap {
                        party: j.party,
                        bootstrap: *b,
                        round: t,
                    }
                    .into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Node {
    Grid(Box<GridNode>),
    Subnet(SubnetNode),
}

impl Node {
    fn handle(&mut self, ctx: &mut Ctx<'_>, env: &Envelope) {
        match self {
            Node::Grid(n) => n.handle(ctx, env.from, &env.payload),
            Node::Subnet(n) => {
                n.handle(ctx, env.from, &env.payload);
            }
        }
    }

    fn tick(&mut self, ctx: &mut Ctx<'_>) {
        match self {
            Node::Grid(n) => n.tick(ctx),
            Node::Subnet(n) => n.tick(ctx),
        }
    }

    /// Runs `call`; returns `false` if this protocol has no such interface.
    fn call(&mut self, ctx: &mut Ctx<'_>, call: &InterfaceCall) -> bool {
        match (self, call) {
            (Node::Grid(n), InterfaceCall::Store { h, i, x }) => n.store(ctx, h, *i, x),
            (Node::Grid(n), InterfaceCall::Get { h, i }) => n.get(ctx, h, *i),
            (Node::Subnet(n), InterfaceCall::CreateSubnet { sid, members }) => {
                n.create_subnet(ctx, *sid, members)
            }
            (Node::Subnet(n), InterfaceCall::JoinSubnet { sid, via }) => n.join_subnet(ctx, *sid, *via),
            (Node::Subnet(n), InterfaceCall::GetPeers { sid }) => {
                n.get_peers(ctx, *sid);
            }
            _ => return false,
        }
        true
    }

    fn connections(&self, me: PartyId) -> usize {
        match self {
            Node::Grid(n) => n.subnet().connection_count(me),
            Node::Subnet(n) => n.connection_count(me),
        }
    }
}

enum Item {
    Deliver(Envelope),
    Call(PartyId, InterfaceCall),
}

struct Recorder {
    log: EventLog,
    outbox: Vec<Envelope>,
    joined: BTreeMap<PartyId, Round>,
    opts: LogOptions,
}

impl Recorder {
    fn flush(&mut self, round: Round, me: PartyId, effects: &mut Vec<Effect>) {
        for e in effects.drain(..) {
            let ev = match e {
                Effect::Send { to, payload } => {
                    let env = Envelope {
                        from: me,
                        to,
                        sent_at: round,
                        payload,
                    };
                    let ev = self.opts.envelopes.then(|| Event::Send(env.clone()));
                    self.outbox.push(env);
                    match ev {
                        Some(ev) => ev,
                        None => continue,
                    }
                }
                Effect::Write { h, i, x } => Event::Write { party: me, h, i, x },
                Effect::Peers { sid, peers } => Event::Peers { party: me, sid, peers },
                Effect::SubnetCreate { sid, members } => Event::SubnetCreate {
                    party: me,
                    sid,
                    members,
                },
                Effect::SubnetJoin { sid, via } => Event::SubnetJoin { party: me, sid, via },
                Effect::JoinDone => {
                    self.joined.insert(me, round);
                    Event::JoinDone { party: me }
                }
                Effect::GetResult {
                    h,
                    i,
                    called_at,
                    value,
                } => Event::GetResult {
                    party: me,
                    h,
                    i,
                    called_at,
                    value,
                },
            };
            self.log.push(round, ev);
        }
    }
}

/// Runs the experiment for `lifetime + drain` rounds and returns its log.
pub fn run(
    cfg: &ExperimentConfig,
    adversary: &mut dyn Adversary,
    workload: &mut dyn Workload,
) -> Result<EventLog, EngineError> {
    cfg.validate()?;
    let params = cfg.params;
    let schedule = &cfg.schedule;
    let oracle = CellOracle::new(params, cfg.oracle_seed);
    let predicate: Predicate = make_test_predicate(cfg.predicate_seed);
    let pool: Vec<PartyId> = {
        let mut v = cfg.malicious.clone();
        v.sort();
        v.dedup();
        v
    };
    let pool_set: BTreeSet<PartyId> = pool.iter().copied().collect();
    let mode = cfg.protocol.mode;

    let mut rec = Recorder {
        log: EventLog::new(),
        outbox: Vec::new(),
        joined: BTreeMap::new(),
        opts: cfg.log,
    };
    rec.log.push(
        0,
        Event::Header(Header {
            version: LOG_VERSION,
            params,
            protocol: cfg.protocol,
            oracle_seed: cfg.oracle_seed,
            predicate_seed: cfg.predicate_seed,
            malicious: pool.clone(),
            adversary: adversary.name(),
            workload: workload.name(),
            envelopes: cfg.log.envelopes,
        }),
    );

    let mut nodes: BTreeMap<PartyId, Node> = BTreeMap::new();
    let mut in_flight: Vec<Envelope> = Vec::new();
    let mut effects: Vec<Effect> = Vec::new();
    let leave_at = |p: PartyId| schedule.interval(p).and_then(|iv| iv.leave);
    let new_node = |p: PartyId, aux: bool| match mode {
        ProtocolMode::Grid => Node::Grid(Box::new(GridNode::new(
            oracle.cell(p),
            aux,
            cfg.protocol.sync_policy,
            cfg.protocol.optimize,
        ))),
        ProtocolMode::Subnet => Node::Subnet(SubnetNode::new()),
    };

    for round in 0..=params.lifetime + cfg.drain {
        let view = AdversaryView {
            round,
            params: &params,
            oracle: &oracle,
            predicate: &predicate,
            schedule,
            pool: &pool,
            mode,
        };
        macro_rules! ctx {
            ($me:expr) => {
                Ctx {
                    round,
                    me: $me,
                    params: &params,
                    oracle: &oracle,
                    predicate: &predicate,
                    record_peers: cfg.log.peers,
                    effects: &mut effects,
                }
            };
        }

        // Joins.
        if round == 0 {
            let initial = schedule.initial();
            for &(p, aux) in &initial {
                rec.log.push(
                    0,
                    Event::Init {
                        party: p,
                        aux,
                        leave_at: leave_at(p),
                    },
                );
                rec.joined.insert(p, 0);
            }
            for &(p, aux) in &initial {
                let mut node = new_node(p, aux);
                if let Node::Grid(n) = &mut node {
                    n.init(&mut ctx!(p), &initial);
                }
                rec.flush(0, p, &mut effects);
                nodes.insert(p, node);
            }
        } else {
            for j in schedule.joins_at(round) {
                let extra: Vec<PartyId> = adversary
                    .extra_bootstraps(&view, j.party)
                    .into_iter()
                    .filter(|b| !j.bootstraps.contains(b))
                    .collect();
                rec.log.push(
                    round,
                    Event::Join {
                        party: j.party,
                        bootstraps: j.bootstraps.clone(),
                        extra: extra.clone(),
                        aux: j.aux,
                        leave_at: leave_at(j.party),
                    },
                );
                let mut node = new_node(j.party, j.aux);
                match &mut node {
                    Node::Grid(n) => {
                        let all: Vec<PartyId> = j.bootstraps.iter().chain(&extra).copied().collect();
                        n.join(&mut ctx!(j.party), &all);
                    }
                    Node::Subnet(_) => effects.push(Effect::JoinDone),
                }
                rec.flush(round, j.party, &mut effects);
                nodes.insert(j.party, node);
            }
        }

        // Deliveries and calls.
        let mut items: Vec<(ItemKey, Item)> = Vec::new();
        let mut inbox: Vec<Envelope> = Vec::new();
        for env in in_flight.drain(..) {
            if nodes.contains_key(&env.to) {
                let key = ItemKey {
                    sender: env.from,
                    class: env.payload.kind().ordinal() as u32,
                    seq: items.len() as u64,
                };
                items.push((key, Item::Deliver(env)));
            } else if pool_set.contains(&env.to) {
                inbox.push(env);
            }
        }
        if round <= params.lifetime {
            let wview = WorkloadView {
                round,
                params: &params,
                predicate: &predicate,
                oracle: &oracle,
                schedule,
                joined: &rec.joined,
            };
            let mut calls = workload.calls(&wview);
            calls.extend(adversary.calls(&view));
            for (p, call) in calls {
                check_call(&params, &call)?;
                // Round-0 creation is coordinated setup, like `init`, and
                // precedes everything the adversary orders.
                if round == 0 && matches!(call, InterfaceCall::CreateSubnet { .. }) {
                    if let Some(node) = nodes.get_mut(&p) {
                        if node.call(&mut ctx!(p), &call) {
                            rec.log.push(round, Event::Call { party: p, call });
                        }
                        rec.flush(round, p, &mut effects);
                    }
                    continue;
                }
                let key = ItemKey {
                    sender: p,
                    class: CALL_CLASS_BASE + call.ordinal(),
                    seq: items.len() as u64,
                };
                items.push((key, Item::Call(p, call)));
            }
        }
        items.sort_by_key(|(k, _)| *k);
        let keys: Vec<ItemKey> = items.iter().map(|(k, _)| *k).collect();
        let perm = if keys.is_empty() {
            None
        } else {
            adversary.order(&view, &keys)
        };
        let items = intra_round_order(round, items, perm.as_deref())?;

        for (_, item) in items {
            match item {
                Item::Deliver(env) => {
                    let Some(node) = nodes.get_mut(&env.to) else { continue };
                    node.handle(&mut ctx!(env.to), &env);
                    rec.flush(round, env.to, &mut effects);
                }
                Item::Call(p, call) => {
                    let Some(node) = nodes.get_mut(&p) else { continue };
                    // Effects are buffered, so the call is logged before
                    // anything it causes.
                    if node.call(&mut ctx!(p), &call) {
                        rec.log.push(round, Event::Call { party: p, call });
                    }
                    rec.flush(round, p, &mut effects);
                }
            }
        }

        // Continuations.
        for (p, node) in nodes.iter_mut() {
            node.tick(&mut ctx!(*p));
            rec.flush(round, *p, &mut effects);
        }

        if cfg.log.active {
            rec.log.push(
                round,
                Event::Active {
                    parties: nodes.keys().copied().collect(),
                },
            );
        }
        if cfg.log.map_sizes && !nodes.is_empty() {
            let sizes: Vec<usize> = nodes.iter().map(|(p, n)| n.connections(*p)).collect();
            let max = *sizes.iter().max().expect("non-empty");
            let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
            rec.log.push(round, Event::MapSizes { max, mean });
        }

        // Leaves.
        for p in schedule.leaves_at(round) {
            if nodes.remove(p).is_some() {
                rec.log.push(round, Event::Leave { party: *p });
            }
        }

        // Rushing adversary.
        let honest = std::mem::take(&mut rec.outbox);
        let malicious = adversary.act(&view, &honest, &inbox);
        in_flight = honest;
        for mut env in malicious {
            if !pool_set.contains(&env.from) {
                return Err(EngineError::ForgedSender(env.from));
            }
            env.sent_at = round;
            if cfg.log.envelopes {
                rec.log.push(round, Event::Send(env.clone()));
            }
            in_flight.push(env);
        }
    }
    Ok(rec.log)
}

fn check_call(params: &Params, call: &InterfaceCall) -> Result<(), EngineError> {
    let sid = match call {
        InterfaceCall::CreateSubnet { sid, .. }
        | InterfaceCall::JoinSubnet { sid, .. }
        | InterfaceCall::GetPeers { sid } => *sid,
        _ => return Ok(()),
    };
    if sid.0 == 0 || sid.0 > params.num_subnets() {
        return Err(EngineError::BadSubnet(sid));
    }
    Ok(())
}
