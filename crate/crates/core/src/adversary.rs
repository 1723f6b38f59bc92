//! Byzantine strategies. Malicious parties run no protocol code: a strategy
//! emits envelopes from pool ids directly, after seeing the round's honest
//! traffic.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::log::{InterfaceCall, ProtocolMode};
use crate::engine::order::ItemKey;
use crate::message::{Envelope, Payload};
use crate::oracle::{col_sid, row_sid, CellOracle};
use crate::schedule::Schedule;
use crate::types::{Handle, Params, PartyId, Predicate, Round, SubnetId, Symbol, SymbolIndex, Triple};

/// First id of the default malicious pool.
pub const MALICIOUS_BASE: u64 = 1_000_000;

/// The default malicious pool `MALICIOUS_BASE..MALICIOUS_BASE + n`.
pub fn malicious_pool(n: usize) -> Vec<PartyId> {
    (0..n as u64).map(|i| PartyId(MALICIOUS_BASE + i)).collect()
}

/// Everything a strategy may look at besides messages.
pub struct AdversaryView<'a> {
    pub round: Round,
    pub params: &'a Params,
    pub oracle: &'a CellOracle,
    pub predicate: &'a Predicate,
    pub schedule: &'a Schedule,
    pub pool: &'a [PartyId],
    pub mode: ProtocolMode,
}

impl AdversaryView<'_> {
    fn honest_active(&self) -> Vec<PartyId> {
        self.schedule.active_at(self.round)
    }

    fn honest_aux_active(&self) -> Vec<PartyId> {
        self.honest_active()
            .into_iter()
            .filter(|p| self.schedule.aux(*p) == Some(true))
            .collect()
    }
}

pub trait Adversary {
    fn name(&self) -> String;

    /// Bootstrap nodes appended to a scheduled honest join.
    fn extra_bootstraps(&mut self, _view: &AdversaryView<'_>, _joiner: PartyId) -> Vec<PartyId> {
        Vec::new()
    }

    /// Interface calls to run on honest parties this round.
    fn calls(&mut self, _view: &AdversaryView<'_>) -> Vec<(PartyId, InterfaceCall)> {
        Vec::new()
    }

    /// A permutation of the default-ordered items, or `None` to keep it.
    fn order(&mut self, _view: &AdversaryView<'_>, _keys: &[ItemKey]) -> Option<Vec<usize>> {
        None
    }

    /// Malicious envelopes for this round, given the honest envelopes sent
    /// this round and the envelopes delivered to malicious ids. `sent_at` is
    /// overwritten by the engine.
    fn act(&mut self, view: &AdversaryView<'_>, honest: &[Envelope], inbox: &[Envelope]) -> Vec<Envelope>;
}

fn envelope(from: PartyId, to: PartyId, payload: Payload) -> Envelope {
    Envelope {
        from,
        to,
        sent_at: 0,
        payload,
    }
}

fn spoofed(q: &Predicate, h: &Handle, i: SymbolIndex) -> Symbol {
    let mut x = q.expected(h, i);
    for b in &mut x.0 {
        *b = !*b;
    }
    x
}

#[derive(Clone, Debug, Default)]
pub struct Passive;

impl Adversary for Passive {
    fn name(&self) -> String {
        "passive".into()
    }

    fn act(&mut self, _: &AdversaryView<'_>, _: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        Vec::new()
    }
}

/// Puts malicious ids into honest subnet maps: row subnets through honest
/// bootstrap nodes, the column subnet through a same-column honest party.
#[derive(Clone, Debug)]
struct Infiltrator {
    rng: ChaCha8Rng,
    every: Round,
}

impl Infiltrator {
    fn new(seed: u64) -> Self {
        Infiltrator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            every: 10,
        }
    }

    fn joins(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope> {
        if !view.round.is_multiple_of(self.every) {
            return Vec::new();
        }
        let active = view.honest_active();
        let mut out = Vec::new();
        for &m in view.pool {
            match view.mode {
                ProtocolMode::Grid => {
                    let cell = view.oracle.cell(m);
                    let hubs = view.honest_aux_active();
                    if let Some(&hub) = hubs.choose(&mut self.rng) {
                        out.push(envelope(
                            m,
                            hub,
                            Payload::JoinSubnet {
                                sid: row_sid(view.params, cell.row),
                            },
                        ));
                    }
                    let same_col: Vec<PartyId> = active
                        .iter()
                        .copied()
                        .filter(|p| view.oracle.col(*p) == cell.col)
                        .collect();
                    if let Some(&hub) = same_col.choose(&mut self.rng) {
                        out.push(envelope(
                            m,
                            hub,
                            Payload::JoinSubnet {
                                sid: col_sid(view.params, cell.col),
                            },
                        ));
                    }
                }
                ProtocolMode::Subnet => {
                    let sid = SubnetId(self.rng.random_range(1..=view.params.num_subnets()));
                    if let Some(&hub) = active.choose(&mut self.rng) {
                        out.push(envelope(m, hub, Payload::JoinSubnet { sid }));
                    }
                }
            }
        }
        out
    }
}

/// Occupies cells but never answers anything.
#[derive(Clone, Debug)]
pub struct Withholder {
    inner: Infiltrator,
}

impl Withholder {
    pub fn new(seed: u64) -> Self {
        Withholder {
            inner: Infiltrator::new(seed),
        }
    }
}

impl Adversary for Withholder {
    fn name(&self) -> String {
        "withholder".into()
    }

    fn act(&mut self, view: &AdversaryView<'_>, _: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        self.inner.joins(view)
    }
}

/// Occupies cells and answers `Get`, `Sync` and `Join` with junk. Answers
/// honest requests in the same round they are sent.
#[derive(Clone, Debug)]
pub struct Spoofer {
    inner: Infiltrator,
}

impl Spoofer {
    pub fn new(seed: u64) -> Self {
        Spoofer {
            inner: Infiltrator::new(seed),
        }
    }
}

impl Adversary for Spoofer {
    fn name(&self) -> String {
        "spoofer".into()
    }

    fn act(&mut self, view: &AdversaryView<'_>, honest: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        let mut out = self.inner.joins(view);
        for e in honest.iter().filter(|e| view.pool.contains(&e.to)) {
            match &e.payload {
                Payload::Get { h, i } => out.push(envelope(
                    e.to,
                    e.from,
                    Payload::GetRsp {
                        h: h.clone(),
                        i: *i,
                        x: spoofed(view.predicate, h, *i),
                    },
                )),
                Payload::Sync => {
                    let h = Handle(b"spoof".to_vec());
                    let triples: Vec<Triple> = (1..=view.params.m.min(4))
                        .map(|i| (h.clone(), i, spoofed(view.predicate, &h, i)))
                        .collect();
                    out.push(envelope(e.to, e.from, Payload::SyncRsp { triples }));
                }
                Payload::Store { h, i, .. } => out.push(envelope(
                    e.to,
                    e.from,
                    Payload::StoreFwd {
                        h: h.clone(),
                        i: *i,
                        x: spoofed(view.predicate, h, *i),
                    },
                )),
                _ => {}
            }
        }
        out
    }
}

/// Sends a bounded amount of junk subnet and grid traffic every round.
#[derive(Clone, Debug)]
pub struct Flooder {
    rng: ChaCha8Rng,
    per_round: usize,
}

impl Flooder {
    pub fn new(seed: u64, per_round: usize) -> Self {
        Flooder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            per_round,
        }
    }
}

impl Adversary for Flooder {
    fn name(&self) -> String {
        "flooder".into()
    }

    fn act(&mut self, view: &AdversaryView<'_>, _: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        let active = view.honest_active();
        if active.is_empty() || view.pool.is_empty() {
            return Vec::new();
        }
        let n_sids = view.params.num_subnets();
        let mut out = Vec::with_capacity(self.per_round);
        for _ in 0..self.per_round {
            let from = *view.pool.choose(&mut self.rng).expect("non-empty");
            let to = *active.choose(&mut self.rng).expect("non-empty");
            // Ids and subnets slightly out of range exercise the guards.
            let sid = SubnetId(self.rng.random_range(0..=n_sids + 1));
            let party = if self.rng.random_bool(0.5) {
                *view.pool.choose(&mut self.rng).expect("non-empty")
            } else {
                *active.choose(&mut self.rng).expect("non-empty")
            };
            let payload = match self.rng.random_range(0..5) {
                0 => Payload::JoinSubnet { sid },
                1 => Payload::JoinSubnetFwd { sid, party },
                2 => Payload::JoinSubnetPullRsp {
                    sid,
                    peers: view.pool.to_vec(),
                },
                3 => {
                    let h = Handle(vec![self.rng.random()]);
                    let i = self.rng.random_range(0..=view.params.m + 1);
                    Payload::Store {
                        x: spoofed(view.predicate, &h, i),
                        h,
                        i,
                    }
                }
                _ => Payload::JoinSubnetPull { sid },
            };
            out.push(envelope(from, to, payload));
        }
        out
    }
}

/// Appends malicious bootstrap nodes to every honest join and answers with
/// malicious-only peer lists.
#[derive(Clone, Debug)]
pub struct EclipseJoin {
    rng: ChaCha8Rng,
    extras: usize,
}

impl EclipseJoin {
    pub fn new(seed: u64, extras: usize) -> Self {
        EclipseJoin {
            rng: ChaCha8Rng::seed_from_u64(seed),
            extras,
        }
    }
}

impl Adversary for EclipseJoin {
    fn name(&self) -> String {
        "eclipse_join".into()
    }

    fn extra_bootstraps(&mut self, view: &AdversaryView<'_>, _joiner: PartyId) -> Vec<PartyId> {
        let mut v: Vec<PartyId> = view
            .pool
            .choose_multiple(&mut self.rng, self.extras)
            .copied()
            .collect();
        v.sort();
        v
    }

    fn act(&mut self, view: &AdversaryView<'_>, honest: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        let mut out = Vec::new();
        for e in honest.iter().filter(|e| view.pool.contains(&e.to)) {
            match &e.payload {
                Payload::Join => {
                    let c = view.oracle.col(e.from);
                    let mut peers: Vec<PartyId> = view
                        .pool
                        .iter()
                        .copied()
                        .filter(|p| view.oracle.col(*p) == c)
                        .collect();
                    if peers.is_empty() {
                        peers = view.pool.to_vec();
                    }
                    out.push(envelope(e.to, e.from, Payload::JoinRsp { peers }));
                }
                Payload::JoinSubnetPull { sid } => out.push(envelope(
                    e.to,
                    e.from,
                    Payload::JoinSubnetPullRsp {
                        sid: *sid,
                        peers: view.pool.to_vec(),
                    },
                )),
                _ => {}
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReorderMode {
    Reverse,
    Shuffle,
    /// Reverse on even rounds, shuffle on odd ones.
    Alternate,
}

/// Chooses adversarial processing orders; sends nothing.
#[derive(Clone, Debug)]
pub struct Reorderer {
    seed: u64,
    mode: ReorderMode,
}

impl Reorderer {
    pub fn new(seed: u64, mode: ReorderMode) -> Self {
        Reorderer { seed, mode }
    }
}

impl Adversary for Reorderer {
    fn name(&self) -> String {
        "reorderer".into()
    }

    fn order(&mut self, view: &AdversaryView<'_>, keys: &[ItemKey]) -> Option<Vec<usize>> {
        let reverse = match self.mode {
            ReorderMode::Reverse => true,
            ReorderMode::Shuffle => false,
            ReorderMode::Alternate => view.round.is_multiple_of(2),
        };
        let mut perm: Vec<usize> = (0..keys.len()).collect();
        if reverse {
            perm.reverse();
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ view.round.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            perm.shuffle(&mut rng);
        }
        Some(perm)
    }

    fn act(&mut self, _: &AdversaryView<'_>, _: &[Envelope], _: &[Envelope]) -> Vec<Envelope> {
        Vec::new()
    }
}

/// Names accepted by [`make_strategy`].
pub fn strategy_catalog() -> &'static [&'static str] {
    &["passive", "withholder", "spoofer", "flooder", "eclipse_join", "reorderer"]
}

/// Builds a catalog strategy with its default knobs.
pub fn make_strategy(name: &str, seed: u64) -> Option<Box<dyn Adversary>> {
    Some(match name {
        "passive" => Box::new(Passive),
        "withholder" => Box::new(Withholder::new(seed)),
        "spoofer" => Box::new(Spoofer::new(seed)),
        "flooder" => Box::new(Flooder::new(seed, 24)),
        "eclipse_join" => Box::new(EclipseJoin::new(seed, 2)),
        "reorderer" => Box::new(Reorderer::new(seed, ReorderMode::Alternate)),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleBuilder;
    use crate::types::make_test_predicate;

    #[test]
    fn catalog_names_build() {
        for name in strategy_catalog() {
            assert_eq!(make_strategy(name, 1).unwrap().name(), *name);
        }
        assert!(make_strategy("nobody", 1).is_none());
    }

    #[test]
    fn reverse_order_is_reversed() {
        let params = Params::new(1, 1, 1, 7, 2, 5).unwrap();
        let oracle = CellOracle::new(params, 0);
        let predicate = make_test_predicate(0);
        let schedule = ScheduleBuilder::new().build().unwrap();
        let view = AdversaryView {
            round: 3,
            params: &params,
            oracle: &oracle,
            predicate: &predicate,
            schedule: &schedule,
            pool: &[],
            mode: ProtocolMode::Grid,
        };
        let keys: Vec<ItemKey> = (0..4)
            .map(|seq| ItemKey {
                sender: PartyId(1),
                class: 0,
                seq,
            })
            .collect();
        let mut r = Reorderer::new(0, ReorderMode::Reverse);
        assert_eq!(r.order(&view, &keys), Some(vec![3, 2, 1, 0]));
        let mut s = Reorderer::new(0, ReorderMode::Shuffle);
        let mut perm = s.order(&view, &keys).unwrap();
        perm.sort();
        assert_eq!(perm, vec![0, 1, 2, 3]);
    }

    #[test]
    fn spoofed_symbols_fail_the_predicate() {
        let q = make_test_predicate(9);
        for i in 1..20 {
            let h = Handle(vec![i as u8]);
            assert!(!q.eval(&h, i, &spoofed(&q, &h, i)));
        }
    }
}
