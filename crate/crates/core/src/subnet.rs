//! The simple subnet-discovery protocol: create, join, get-peers and the four
//! message handlers, plus the receiver-side optimizations used inside the grid.

use std::collections::{BTreeMap, BTreeSet};

use crate::message::{Ctx, Effect, Payload};
use crate::oracle::{classify_sid, SubnetKind};
use crate::types::{Cell, PartyId, Round, SubnetId};

/// Rounds between sending `JoinSubnet` and pulling the hub's peer list.
pub const PULL_AFTER: Round = 4;

/// What a grid node knows about itself, enabling the optimizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridView {
    pub cell: Cell,
    pub aux: bool,
}

/// Per-node state of the subnet protocol. Maps only ever grow.
#[derive(Clone, Debug, Default)]
pub struct SubnetNode {
    map: BTreeMap<SubnetId, BTreeSet<PartyId>>,
    pulls: Vec<(Round, SubnetId, PartyId)>,
    awaiting: BTreeMap<(SubnetId, PartyId), u32>,
    filter: Option<GridView>,
}

impl SubnetNode {
    pub fn new() -> Self {
        Self::default()
    }

    /// A node that applies the grid optimizations for its own cell and role.
    pub fn with_filter(view: GridView) -> Self {
        SubnetNode {
            filter: Some(view),
            ..Self::default()
        }
    }

    fn valid_sid(ctx: &Ctx<'_>, sid: SubnetId) -> bool {
        sid.0 >= 1 && sid.0 <= ctx.params.num_subnets()
    }

    /// Whether `peer` may be stored under `sid` by this node.
    fn keeps(&self, ctx: &Ctx<'_>, sid: SubnetId, peer: PartyId) -> bool {
        let Some(v) = self.filter else { return true };
        match classify_sid(ctx.params, sid) {
            Some((SubnetKind::Row, r)) => v.aux || (r == v.cell.row && ctx.oracle.row(peer) == r),
            Some((SubnetKind::Column, c)) => c == v.cell.col && ctx.oracle.col(peer) == c,
            None => false,
        }
    }

    /// Whether an incoming subnet message must be dropped unread.
    fn ignores(&self, ctx: &Ctx<'_>, sid: SubnetId, from: PartyId, hub_request: bool) -> bool {
        let Some(v) = self.filter else { return false };
        match classify_sid(ctx.params, sid) {
            Some((SubnetKind::Row, _)) => hub_request && !v.aux,
            Some((SubnetKind::Column, c)) => c != v.cell.col || ctx.oracle.col(from) != c,
            None => true,
        }
    }

    fn insert(&mut self, ctx: &Ctx<'_>, sid: SubnetId, peer: PartyId) {
        if self.keeps(ctx, sid, peer) {
            self.map.entry(sid).or_default().insert(peer);
        }
    }

    pub fn create_subnet(&mut self, ctx: &mut Ctx<'_>, sid: SubnetId, members: &[PartyId]) {
        if !Self::valid_sid(ctx, sid) {
            return;
        }
        ctx.emit(Effect::SubnetCreate {
            sid,
            members: members.to_vec(),
        });
        for p in members {
            self.insert(ctx, sid, *p);
        }
    }

    pub fn join_subnet(&mut self, ctx: &mut Ctx<'_>, sid: SubnetId, via: PartyId) {
        if !Self::valid_sid(ctx, sid) {
            return;
        }
        ctx.emit(Effect::SubnetJoin { sid, via });
        let me = ctx.me;
        self.insert(ctx, sid, me);
        self.insert(ctx, sid, via);
        ctx.send(via, Payload::JoinSubnet { sid });
        self.pulls.push((ctx.round + PULL_AFTER, sid, via));
    }

    /// Current peers of `sid`, sorted by id.
    pub fn get_peers(&self, ctx: &mut Ctx<'_>, sid: SubnetId) -> Vec<PartyId> {
        let peers: Vec<PartyId> = self
            .map
            .get(&sid)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        if ctx.record_peers {
            ctx.emit(Effect::Peers {
                sid,
                peers: peers.clone(),
            });
        }
        peers
    }

    pub fn knows(&self, sid: SubnetId, p: PartyId) -> bool {
        self.map.get(&sid).is_some_and(|s| s.contains(&p))
    }

    /// Distinct parties other than `me` across all subnets.
    pub fn connection_count(&self, me: PartyId) -> usize {
        let all: BTreeSet<PartyId> = self.map.values().flatten().copied().collect();
        all.len() - usize::from(all.contains(&me))
    }

    pub fn subnets(&self) -> impl Iterator<Item = (SubnetId, &BTreeSet<PartyId>)> {
        self.map.iter().map(|(s, p)| (*s, p))
    }

    /// Handles a subnet payload; returns `false` for non-subnet payloads.
    pub fn handle(&mut self, ctx: &mut Ctx<'_>, from: PartyId, payload: &Payload) -> bool {
        match payload {
            Payload::JoinSubnet { sid } => {
                if Self::valid_sid(ctx, *sid) && !self.ignores(ctx, *sid, from, true) {
                    let snapshot: Vec<PartyId> = self
                        .map
                        .get(sid)
                        .map(|s| s.iter().copied().collect())
                        .unwrap_or_default();
                    self.insert(ctx, *sid, from);
                    for q in snapshot {
                        ctx.send(q, Payload::JoinSubnetFwd { sid: *sid, party: from });
                    }
                }
            }
            Payload::JoinSubnetPull { sid } => {
                if Self::valid_sid(ctx, *sid) && !self.ignores(ctx, *sid, from, true) {
                    let peers = self
                        .map
                        .get(sid)
                        .map(|s| s.iter().copied().collect())
                        .unwrap_or_default();
                    ctx.send(from, Payload::JoinSubnetPullRsp { sid: *sid, peers });
                }
            }
            Payload::JoinSubnetPullRsp { sid, peers } => {
                if Self::valid_sid(ctx, *sid) && !self.ignores(ctx, *sid, from, false) {
                    if let Some(n) = self.awaiting.get_mut(&(*sid, from)) {
                        *n -= 1;
                        if *n == 0 {
                            self.awaiting.remove(&(*sid, from));
                        }
                        for p in peers {
                            self.insert(ctx, *sid, *p);
                        }
                    }
                }
            }
            Payload::JoinSubnetFwd { sid, party } => {
                if Self::valid_sid(ctx, *sid) && !self.ignores(ctx, *sid, from, false) {
                    self.insert(ctx, *sid, *party);
                }
            }
            _ => return false,
        }
        true
    }

    /// Sends the pulls that fall due this round.
    pub fn tick(&mut self, ctx: &mut Ctx<'_>) {
        let now = ctx.round;
        let (due, later): (Vec<_>, Vec<_>) = self.pulls.drain(..).partition(|(t, _, _)| *t <= now);
        self.pulls = later;
        for (_, sid, via) in due {
            *self.awaiting.entry((sid, via)).or_default() += 1;
            ctx.send(via, Payload::JoinSubnetPull { sid });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{col_sid, row_sid, CellOracle};
    use crate::types::{make_test_predicate, Params};

    struct Harness {
        params: Params,
        oracle: CellOracle,
        effects: Vec<Effect>,
    }

    impl Harness {
        fn new(k1: u32, k2: u32) -> Self {
            let params = Params::new(k1, k2, k2, 7, 2, 50).unwrap();
            Harness {
                params,
                oracle: CellOracle::new(params, 5),
                effects: Vec::new(),
            }
        }

        fn run<R>(&mut self, me: u64, round: Round, f: impl FnOnce(&mut Ctx<'_>) -> R) -> R {
            let q = make_test_predicate(0);
            let mut ctx = Ctx {
                round,
                me: PartyId(me),
                params: &self.params,
                oracle: &self.oracle,
                predicate: &q,
                record_peers: false,
                effects: &mut self.effects,
            };
            f(&mut ctx)
        }

        fn sends(&mut self) -> Vec<(PartyId, Payload)> {
            self.effects
                .drain(..)
                .filter_map(|e| match e {
                    Effect::Send { to, payload } => Some((to, payload)),
                    _ => None,
                })
                .collect()
        }
    }

    #[test]
    fn create_is_local_union() {
        let mut h = Harness::new(2, 2);
        let mut n = SubnetNode::new();
        h.run(1, 0, |c| {
            n.create_subnet(c, SubnetId(1), &[PartyId(1), PartyId(2)]);
            n.create_subnet(c, SubnetId(1), &[PartyId(3)]);
        });
        assert!(h.sends().is_empty());
        let peers = h.run(1, 0, |c| n.get_peers(c, SubnetId(1)));
        assert_eq!(peers, vec![PartyId(1), PartyId(2), PartyId(3)]);
        assert!(h.run(1, 0, |c| n.get_peers(c, SubnetId(2))).is_empty());
    }

    #[test]
    fn join_sends_now_and_pulls_after_four_rounds() {
        let mut h = Harness::new(2, 2);
        let mut n = SubnetNode::new();
        h.run(1, 3, |c| n.join_subnet(c, SubnetId(2), PartyId(9)));
        assert_eq!(h.sends(), vec![(PartyId(9), Payload::JoinSubnet { sid: SubnetId(2) })]);
        for t in 4..7 {
            h.run(1, t, |c| n.tick(c));
            assert!(h.sends().is_empty());
        }
        h.run(1, 7, |c| n.tick(c));
        assert_eq!(h.sends(), vec![(PartyId(9), Payload::JoinSubnetPull { sid: SubnetId(2) })]);
        // Responses from anyone but the hub are dropped.
        let rsp = Payload::JoinSubnetPullRsp {
            sid: SubnetId(2),
            peers: vec![PartyId(5)],
        };
        h.run(1, 8, |c| n.handle(c, PartyId(4), &rsp));
        assert!(!n.knows(SubnetId(2), PartyId(5)));
        h.run(1, 8, |c| n.handle(c, PartyId(9), &rsp));
        assert!(n.knows(SubnetId(2), PartyId(5)));
        assert!(n.knows(SubnetId(2), PartyId(1)) && n.knows(SubnetId(2), PartyId(9)));
    }

    #[test]
    fn hub_forwards_to_snapshot() {
        let mut h = Harness::new(2, 2);
        let mut hub = SubnetNode::new();
        h.run(7, 0, |c| hub.create_subnet(c, SubnetId(1), &[PartyId(8)]));
        h.run(7, 1, |c| hub.handle(c, PartyId(3), &Payload::JoinSubnet { sid: SubnetId(1) }));
        assert_eq!(
            h.sends(),
            vec![(
                PartyId(8),
                Payload::JoinSubnetFwd {
                    sid: SubnetId(1),
                    party: PartyId(3)
                }
            )]
        );
        assert!(hub.knows(SubnetId(1), PartyId(3)));
    }

    #[test]
    fn malformed_sid_ignored() {
        let mut h = Harness::new(2, 2);
        let mut n = SubnetNode::new();
        h.run(1, 1, |c| {
            n.handle(c, PartyId(2), &Payload::JoinSubnet { sid: SubnetId(0) });
            n.handle(c, PartyId(2), &Payload::JoinSubnet { sid: SubnetId(5) });
            n.handle(c, PartyId(2), &Payload::JoinSubnetFwd { sid: SubnetId(9), party: PartyId(4) });
        });
        assert!(h.sends().is_empty());
        assert_eq!(n.subnets().count(), 0);
    }

    fn party_in(h: &Harness, pred: impl Fn(Cell) -> bool, skip: u64) -> PartyId {
        (skip..).map(PartyId).find(|p| pred(h.oracle.cell(*p))).unwrap()
    }

    #[test]
    fn non_bootstrap_ignores_row_requests() {
        let mut h = Harness::new(3, 3);
        let me = party_in(&h, |_| true, 1);
        let cell = h.oracle.cell(me);
        let mut n = SubnetNode::with_filter(GridView { cell, aux: false });
        let sid = row_sid(&h.params, cell.row);
        h.run(me.0, 0, |c| n.create_subnet(c, sid, &[me]));
        let before = n.subnets().map(|(_, s)| s.len()).sum::<usize>();
        h.run(me.0, 1, |c| {
            n.handle(c, PartyId(99), &Payload::JoinSubnet { sid });
            n.handle(c, PartyId(99), &Payload::JoinSubnetPull { sid });
        });
        assert!(h.sends().is_empty());
        assert_eq!(n.subnets().map(|(_, s)| s.len()).sum::<usize>(), before);
    }

    #[test]
    fn column_messages_from_foreign_column_ignored() {
        let mut h = Harness::new(3, 3);
        let me = party_in(&h, |_| true, 1);
        let cell = h.oracle.cell(me);
        let foreign = party_in(&h, |c| c.col != cell.col, 1);
        let friend = party_in(&h, |c| c.col == cell.col, me.0 + 1);
        let mut n = SubnetNode::with_filter(GridView { cell, aux: false });
        let sid = col_sid(&h.params, cell.col);
        h.run(me.0, 0, |c| n.create_subnet(c, sid, &[me]));
        h.run(me.0, 2, |c| n.handle(c, foreign, &Payload::JoinSubnetFwd { sid, party: friend }));
        assert!(!n.knows(sid, friend));
        h.run(me.0, 2, |c| n.handle(c, friend, &Payload::JoinSubnetFwd { sid, party: foreign }));
        assert!(!n.knows(sid, foreign));
        h.run(me.0, 2, |c| n.handle(c, friend, &Payload::JoinSubnetFwd { sid, party: friend }));
        assert!(n.knows(sid, friend));
    }

    #[test]
    fn non_bootstrap_keeps_only_own_row_peers() {
        let mut h = Harness::new(3, 3);
        let me = party_in(&h, |_| true, 1);
        let cell = h.oracle.cell(me);
        let other_row = party_in(&h, |c| c.row != cell.row, 1);
        let same_row = party_in(&h, |c| c.row == cell.row, me.0 + 1);
        let mut n = SubnetNode::with_filter(GridView { cell, aux: false });
        let sid = row_sid(&h.params, cell.row);
        h.run(me.0, 0, |c| n.create_subnet(c, sid, &[me, other_row, same_row]));
        assert!(n.knows(sid, same_row) && n.knows(sid, me));
        assert!(!n.knows(sid, other_row));
    }
}
