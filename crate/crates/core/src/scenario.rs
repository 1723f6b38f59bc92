//! Seeded generators of small admissible experiments for the grid protocol
//! and for the standalone subnet protocol.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::malicious_pool;
use crate::audit::Occupancy;
use crate::engine::log::{ProtocolMode, ProtocolSpec};
use crate::engine::{ExperimentConfig, LogOptions};
use crate::oracle::CellOracle;
use crate::rda::SyncDelayPolicy;
use crate::schedule::{guaranteed_honest, overlap_min, Interval, ScheduleBuilder};
use crate::types::{Params, PartyId, Round, SubnetId};
use crate::workload::SubnetWorkload;

/// Shape of a random grid experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridShape {
    pub max_k1: u32,
    pub max_k2: u32,
    pub min_lifetime: Round,
    pub max_lifetime: Round,
    /// Range of the honest population per column.
    pub per_column: (usize, usize),
    pub malicious: usize,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape {
            max_k1: 5,
            max_k2: 20,
            min_lifetime: 120,
            max_lifetime: 300,
            per_column: (10, 16),
            malicious: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridScenario {
    pub config: ExperimentConfig,
    /// Overlap the schedule is generated for.
    pub overlap: u64,
    /// Honest parties the schedule guarantees with that overlap.
    pub guaranteed: usize,
    /// Oracle seeds rejected because some column went bad.
    pub redraws: usize,
}

/// A random admissible grid experiment: a few immortal aux anchors, an
/// initial population, and continuous churn in which every party stays at
/// least the overlap and every join names at least one good aux bootstrap.
pub fn random_grid_scenario(seed: u64, shape: &GridShape) -> GridScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k1 = rng.random_range(1..=shape.max_k1);
    let k2 = rng.random_range(2..=shape.max_k2);
    let m = k2 * rng.random_range(1..=2);
    let sync_delay = rng.random_range(2..=4);
    let lifetime = rng.random_range(shape.min_lifetime..=shape.max_lifetime);
    let params = Params::new(k1, k2, m, 7, sync_delay, lifetime).expect("valid ranges");
    let overlap = overlap_min(params.subnet_delay, sync_delay);
    let d = params.subnet_delay;
    let horizon = lifetime + 8;

    let population = rng.random_range(shape.per_column.0..=shape.per_column.1) * k2 as usize;
    let mut b = ScheduleBuilder::new();
    let mut next = 1u64;
    let mut parties: Vec<(PartyId, bool, Interval)> = Vec::new();
    for _ in 0..3 {
        let p = PartyId(next);
        next += 1;
        b.initial(p, true);
        parties.push((p, true, Interval { join: 0, leave: None }));
    }
    let stay = |rng: &mut ChaCha8Rng| rng.random_range(overlap + 1..=4 * overlap + 20);
    for _ in 0..population {
        let p = PartyId(next);
        next += 1;
        let aux = rng.random_bool(0.2);
        let leave = rng.random_bool(0.6).then(|| stay(&mut rng));
        b.initial(p, aux);
        if let Some(l) = leave {
            b.leave(l, p);
        }
        parties.push((p, aux, Interval { join: 0, leave }));
    }
    let mean_stay = (5 * overlap + 21) as f64 / 2.0;
    let rate = population as f64 * 0.6 / mean_stay;
    for t in 1..=horizon {
        let whole = rate.floor();
        let n = whole as usize + usize::from(rng.random_bool(rate - whole));
        for _ in 0..n {
            let good: Vec<PartyId> = parties
                .iter()
                .filter(|(_, aux, iv)| {
                    let early = if t >= d { iv.contains(t - d) } else { iv.join == 0 };
                    *aux && early && iv.contains(t + d)
                })
                .map(|(p, _, _)| *p)
                .collect();
            let usable: Vec<PartyId> = parties
                .iter()
                .filter(|(_, aux, iv)| *aux && iv.contains(t - 1) && iv.contains(t))
                .map(|(p, _, _)| *p)
                .collect();
            let mut boots = vec![*good.choose(&mut rng).expect("anchors are always good")];
            if rng.random_bool(0.5) {
                if let Some(x) = usable.choose(&mut rng) {
                    if !boots.contains(x) {
                        boots.push(*x);
                    }
                }
            }
            let p = PartyId(next);
            next += 1;
            let aux = rng.random_bool(0.2);
            let leave = Some(t + stay(&mut rng)).filter(|l| *l <= horizon);
            b.join(t, p, boots, aux);
            if let Some(l) = leave {
                b.leave(l, p);
            }
            parties.push((p, aux, Interval { join: t, leave }));
        }
    }
    let schedule = b.build().expect("generated schedule is consistent");
    let guaranteed = guaranteed_honest(&schedule, overlap, lifetime);
    // Bad columns are part of the failure probability, not of the corruption
    // sets; condition on their absence so every audit obligation is binding.
    let mut redraws = 0;
    let oracle_seed = loop {
        let s: u64 = rng.random();
        let oracle = CellOracle::new(params, s);
        let occ = Occupancy::new(params, schedule.parties().map(|(p, iv)| (oracle.cell(p), iv)));
        if (1..=k2).all(|c| occ.column_good(c, lifetime + 1, overlap)) {
            break s;
        }
        redraws += 1;
    };
    let mut config = ExperimentConfig::new(params, schedule);
    config.oracle_seed = oracle_seed;
    config.predicate_seed = rng.random();
    config.malicious = malicious_pool(shape.malicious);
    config.protocol = ProtocolSpec {
        mode: ProtocolMode::Grid,
        optimize: true,
        sync_policy: match rng.random_range(0..3) {
            0 => SyncDelayPolicy::WorstCase,
            1 => SyncDelayPolicy::Uniform { seed: rng.random() },
            _ => SyncDelayPolicy::Constant { rounds: rng.random_range(0..=2) },
        },
    };
    GridScenario {
        config,
        overlap,
        guaranteed,
        redraws,
    }
}

/// A standalone subnet experiment and the workload that drives it.
#[derive(Clone, Debug)]
pub struct SubnetScenario {
    pub config: ExperimentConfig,
    pub workload: SubnetWorkload,
}

/// Whom a joiner contacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hub {
    Creator,
    /// The other joiner of a pair.
    Peer,
    Malicious,
}

fn subnet_params(lifetime: Round) -> Params {
    Params::new(2, 2, 2, 7, 2, lifetime).expect("valid")
}

fn subnet_config(schedule: crate::schedule::Schedule, lifetime: Round) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(subnet_params(lifetime), schedule);
    cfg.protocol = ProtocolSpec {
        mode: ProtocolMode::Subnet,
        optimize: false,
        sync_policy: SyncDelayPolicy::WorstCase,
    };
    cfg.malicious = malicious_pool(2);
    cfg.log = LogOptions::default();
    cfg
}

/// Two creators of subnet 1 and two joiners at `t1` and `t2`, each using the
/// given hub. A `Peer` hub for the earlier joiner falls back to a creator.
pub fn subnet_pair_scenario(t1: Round, t2: Round, hub1: Hub, hub2: Hub) -> SubnetScenario {
    let lifetime = 40;
    let sid = SubnetId(1);
    let (a, c) = (PartyId(1), PartyId(2));
    let (p1, p2) = (PartyId(3), PartyId(4));
    let evil = malicious_pool(1)[0];
    let mut b = ScheduleBuilder::new();
    b.initial(a, false).initial(c, false);
    for (p, t) in [(p1, t1), (p2, t2)] {
        if t == 0 {
            b.initial(p, false);
        } else {
            b.join(t, p, Vec::new(), false);
        }
    }
    let mut w = SubnetWorkload::new(vec![sid]);
    w.create(sid, vec![a, c]);
    let pick = |hub: Hub, first: bool, other: PartyId, t_me: Round, t_other: Round| match hub {
        Hub::Creator if first => a,
        Hub::Creator => c,
        Hub::Peer if t_other < t_me => other,
        Hub::Peer => a,
        Hub::Malicious => evil,
    };
    w.join(t1, p1, sid, pick(hub1, true, p2, t1, t2));
    w.join(t2, p2, sid, pick(hub2, false, p1, t2, t1));
    SubnetScenario {
        config: subnet_config(b.build().expect("consistent"), lifetime),
        workload: w,
    }
}

/// Random creators, joiners, leaves and hubs over up to four subnets.
pub fn random_subnet_scenario(seed: u64) -> SubnetScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lifetime = 50;
    let params = subnet_params(lifetime);
    let mut b = ScheduleBuilder::new();
    let mut w = SubnetWorkload::new((1..=params.num_subnets()).map(SubnetId).collect());
    let pool = malicious_pool(2);
    let mut next = 1u64;
    let mut known: Vec<(PartyId, Interval)> = Vec::new();
    let creators: Vec<PartyId> = (0..rng.random_range(2..=5))
        .map(|_| {
            let p = PartyId(next);
            next += 1;
            let leave = rng.random_bool(0.3).then(|| rng.random_range(5..=lifetime));
            b.initial(p, false);
            if let Some(l) = leave {
                b.leave(l, p);
            }
            known.push((p, Interval { join: 0, leave }));
            p
        })
        .collect();
    for sid in 1..=params.num_subnets() {
        if rng.random_bool(0.8) {
            let mut members: Vec<PartyId> = creators.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
            if members.is_empty() {
                members.push(creators[0]);
            }
            w.create(SubnetId(sid), members);
        }
    }
    for _ in 0..rng.random_range(3..=12) {
        let t = rng.random_range(1..=30);
        let p = PartyId(next);
        next += 1;
        let leave = rng.random_bool(0.4).then(|| t + rng.random_range(0..=25));
        b.join(t, p, Vec::new(), false);
        if let Some(l) = leave {
            b.leave(l, p);
        }
        for sid in 1..=params.num_subnets() {
            if !rng.random_bool(0.6) {
                continue;
            }
            let alive: Vec<PartyId> = known
                .iter()
                .filter(|(_, iv)| iv.join < t && iv.contains(t))
                .map(|(q, _)| *q)
                .collect();
            let hub = match rng.random_range(0..10) {
                0 => *pool.choose(&mut rng).expect("non-empty"),
                1 => known.choose(&mut rng).expect("non-empty").0,
                _ => *alive.choose(&mut rng).unwrap_or(&creators[0]),
            };
            w.join(t, p, SubnetId(sid), hub);
        }
        known.push((p, Interval { join: t, leave }));
    }
    SubnetScenario {
        config: subnet_config(b.build().expect("consistent"), lifetime),
        workload: w,
    }
}
