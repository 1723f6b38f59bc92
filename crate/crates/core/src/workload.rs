//! Interface-call generators. The experiment lets the adversary schedule
//! honest interface calls; these generators play that role with dense,
//! reproducible call patterns.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::log::InterfaceCall;
use crate::oracle::CellOracle;
use crate::schedule::Schedule;
use crate::types::{Handle, Params, PartyId, Predicate, Round, SubnetId, SymbolIndex};

pub struct WorkloadView<'a> {
    pub round: Round,
    pub params: &'a Params,
    pub predicate: &'a Predicate,
    pub oracle: &'a CellOracle,
    pub schedule: &'a Schedule,
    /// Round in which each party's join terminated (0 for initial parties).
    pub joined: &'a BTreeMap<PartyId, Round>,
}

impl WorkloadView<'_> {
    pub fn active(&self) -> Vec<PartyId> {
        self.schedule.active_at(self.round)
    }

    pub fn fully_joined(&self) -> Vec<PartyId> {
        self.active()
            .into_iter()
            .filter(|p| self.joined.get(p).is_some_and(|t| *t <= self.round))
            .collect()
    }
}

pub trait Workload {
    fn name(&self) -> String;
    fn calls(&mut self, view: &WorkloadView<'_>) -> Vec<(PartyId, InterfaceCall)>;
}

#[derive(Clone, Debug, Default)]
pub struct NoWorkload;

impl Workload for NoWorkload {
    fn name(&self) -> String {
        "none".into()
    }

    fn calls(&mut self, _: &WorkloadView<'_>) -> Vec<(PartyId, InterfaceCall)> {
        Vec::new()
    }
}

/// A fixed list of `(round, party, call)` entries.
#[derive(Clone, Debug, Default)]
pub struct ScriptedWorkload {
    calls: BTreeMap<Round, Vec<(PartyId, InterfaceCall)>>,
}

impl ScriptedWorkload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn at(mut self, round: Round, party: PartyId, call: InterfaceCall) -> Self {
        self.calls.entry(round).or_default().push((party, call));
        self
    }
}

impl Workload for ScriptedWorkload {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn calls(&mut self, view: &WorkloadView<'_>) -> Vec<(PartyId, InterfaceCall)> {
        self.calls.get(&view.round).cloned().unwrap_or_default()
    }
}

/// Random stores and gets. Most calls go to fully joined parties, gets mostly
/// target positions stored earlier, and a fraction of stores carry invalid
/// symbols.
#[derive(Clone, Debug)]
pub struct RandomWorkload {
    rng: ChaCha8Rng,
    pub store_rate: f64,
    pub get_rate: f64,
    pub handles: u32,
    pub invalid_rate: f64,
    stored: Vec<(Handle, SymbolIndex)>,
}

impl RandomWorkload {
    pub fn new(seed: u64, store_rate: f64, get_rate: f64, handles: u32) -> Self {
        RandomWorkload {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store_rate,
            get_rate,
            handles: handles.max(1),
            invalid_rate: 0.1,
            stored: Vec::new(),
        }
    }

    fn count(&mut self, rate: f64) -> usize {
        let whole = rate.floor();
        whole as usize + usize::from(self.rng.random_bool((rate - whole).clamp(0.0, 1.0)))
    }

    fn pick(&mut self, joined: &[PartyId], active: &[PartyId]) -> Option<PartyId> {
        let pool = if !joined.is_empty() && self.rng.random_bool(0.9) {
            joined
        } else {
            active
        };
        pool.choose(&mut self.rng).copied()
    }

    fn handle(&mut self) -> Handle {
        let n = self.rng.random_range(0..self.handles);
        Handle(n.to_be_bytes().to_vec())
    }
}

impl Workload for RandomWorkload {
    fn name(&self) -> String {
        "random".into()
    }

    fn calls(&mut self, view: &WorkloadView<'_>) -> Vec<(PartyId, InterfaceCall)> {
        let active = view.active();
        let joined = view.fully_joined();
        let mut out = Vec::new();
        for _ in 0..self.count(self.store_rate) {
            let Some(p) = self.pick(&joined, &active) else { break };
            let h = self.handle();
            let i = self.rng.random_range(1..=view.params.m);
            let mut x = view.predicate.expected(&h, i);
            if self.rng.random_bool(self.invalid_rate) {
                x.0[0] ^= 0x5a;
            } else {
                self.stored.push((h.clone(), i));
            }
            out.push((p, InterfaceCall::Store { h, i, x }));
        }
        for _ in 0..self.count(self.get_rate) {
            let Some(p) = self.pick(&joined, &active) else { break };
            let (h, i) = match self.stored.choose(&mut self.rng) {
                Some(t) if self.rng.random_bool(0.8) => t.clone(),
                _ => (self.handle(), self.rng.random_range(1..=view.params.m)),
            };
            out.push((p, InterfaceCall::Get { h, i }));
        }
        out
    }
}

/// Drives the standalone subnet protocol: creations at round 0, scheduled
/// `join_subnet` calls, and `get_peers` on every listed subnet by every active
/// party in every round.
#[derive(Clone, Debug, Default)]
pub struct SubnetWorkload {
    pub creators: BTreeMap<SubnetId, Vec<PartyId>>,
    pub joins: BTreeMap<Round, Vec<(PartyId, SubnetId, PartyId)>>,
    pub sids: Vec<SubnetId>,
}

impl SubnetWorkload {
    pub fn new(sids: Vec<SubnetId>) -> Self {
        SubnetWorkload {
            sids,
            ..Self::default()
        }
    }

    pub fn create(&mut self, sid: SubnetId, members: Vec<PartyId>) -> &mut Self {
        self.creators.insert(sid, members);
        self
    }

    pub fn join(&mut self, round: Round, party: PartyId, sid: SubnetId, via: PartyId) -> &mut Self {
        self.joins.entry(round).or_default().push((party, sid, via));
        self
    }
}

impl Workload for SubnetWorkload {
    fn name(&self) -> String {
        "subnet".into()
    }

    fn calls(&mut self, view: &WorkloadView<'_>) -> Vec<(PartyId, InterfaceCall)> {
        let mut out = Vec::new();
        if view.round == 0 {
            for (sid, members) in &self.creators {
                for p in members {
                    out.push((
                        *p,
                        InterfaceCall::CreateSubnet {
                            sid: *sid,
                            members: members.clone(),
                        },
                    ));
                }
            }
        }
        for (p, sid, via) in self.joins.get(&view.round).into_iter().flatten() {
            out.push((*p, InterfaceCall::JoinSubnet { sid: *sid, via: *via }));
        }
        for p in view.active() {
            for sid in &self.sids {
                out.push((p, InterfaceCall::GetPeers { sid: *sid }));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleBuilder;
    use crate::types::make_test_predicate;

    fn view_parts() -> (Params, CellOracle, Predicate, Schedule, BTreeMap<PartyId, Round>) {
        let params = Params::new(2, 2, 8, 7, 2, 20).unwrap();
        let mut b = ScheduleBuilder::new();
        for p in 1..=5 {
            b.initial(PartyId(p), false);
        }
        let joined = (1..=5).map(|p| (PartyId(p), 0)).collect();
        (params, CellOracle::new(params, 1), make_test_predicate(1), b.build().unwrap(), joined)
    }

    #[test]
    fn random_workload_is_seeded_and_mostly_valid() {
        let (params, oracle, predicate, schedule, joined) = view_parts();
        let mut a = RandomWorkload::new(3, 2.5, 3.0, 4);
        let mut b = RandomWorkload::new(3, 2.5, 3.0, 4);
        let (mut valid, mut stores) = (0, 0);
        for round in 0..200 {
            let view = WorkloadView {
                round,
                params: &params,
                predicate: &predicate,
                oracle: &oracle,
                schedule: &schedule,
                joined: &joined,
            };
            let calls = a.calls(&view);
            assert_eq!(calls, b.calls(&view));
            for (_, c) in calls {
                if let InterfaceCall::Store { h, i, x } = c {
                    stores += 1;
                    valid += usize::from(predicate.eval(&h, i, &x));
                }
            }
        }
        assert!(stores > 400);
        let frac = valid as f64 / stores as f64;
        assert!((0.8..0.97).contains(&frac), "{frac}");
    }

    #[test]
    fn subnet_workload_creates_only_at_round_zero() {
        let (params, oracle, predicate, schedule, joined) = view_parts();
        let mut w = SubnetWorkload::new(vec![SubnetId(1)]);
        w.create(SubnetId(1), vec![PartyId(1), PartyId(2)]);
        w.join(4, PartyId(3), SubnetId(1), PartyId(1));
        let at = |round| WorkloadView {
            round,
            params: &params,
            predicate: &predicate,
            oracle: &oracle,
            schedule: &schedule,
            joined: &joined,
        };
        let zero = w.calls(&at(0));
        let creates = zero.iter().filter(|(_, c)| matches!(c, InterfaceCall::CreateSubnet { .. })).count();
        assert_eq!(creates, 2);
        assert_eq!(zero.len(), 2 + 5);
        let four = w.calls(&at(4));
        assert!(four.contains(&(PartyId(3), InterfaceCall::JoinSubnet { sid: SubnetId(1), via: PartyId(1) })));
        assert_eq!(w.calls(&at(5)).len(), 5);
    }
}
