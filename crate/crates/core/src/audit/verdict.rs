//! The two robustness verdicts as structured reports.

use std::collections::BTreeMap;
use std::fmt;

use crate::engine::log::EventLog;
use crate::types::{Handle, PartyId, Round, SubnetId, Symbol, SymbolIndex};

use super::EventQuery;

/// Store-get delay: gets at least this many rounds after the store are
/// obligated.
pub const STORE_GET_DELAY: Round = 2;
/// Rounds within which an obligated get must return.
pub const GET_DELAY: Round = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum Counterexample {
    /// Clause (1): a corruption set above `β·m`.
    CorruptionTooLarge {
        party: PartyId,
        round: Round,
        size: usize,
        limit: f64,
    },
    /// Clause (2): an obligated get without the stored value in time.
    MissingResult {
        storer: PartyId,
        stored_at: Round,
        getter: PartyId,
        get_at: Round,
        h: Handle,
        i: SymbolIndex,
        x: Symbol,
        /// First result the getter produced, with its round.
        returned: Option<(Round, Option<Symbol>)>,
    },
    /// A `get_peers` result missing an honest subnet member.
    MissingPeer {
        sid: SubnetId,
        party: PartyId,
        peer: PartyId,
        round: Round,
        returned: Vec<PartyId>,
    },
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterexample::CorruptionTooLarge {
                party,
                round,
                size,
                limit,
            } => write!(f, "|C_{party}^{round}| = {size} exceeds beta*m = {limit}"),
            Counterexample::MissingResult {
                storer,
                stored_at,
                getter,
                get_at,
                h,
                i,
                x,
                returned,
            } => {
                write!(
                    f,
                    "store by {storer} at {stored_at}, get by {getter} at {get_at}, h={h}, i={i}, x={x}: "
                )?;
                match returned {
                    None => write!(f, "no result"),
                    Some((t, None)) => write!(f, "returned nothing at {t}"),
                    Some((t, Some(v))) => write!(f, "returned {v} at {t}"),
                }
            }
            Counterexample::MissingPeer {
                sid,
                party,
                peer,
                round,
                returned,
            } => {
                let ids: Vec<String> = returned.iter().map(|p| p.to_string()).collect();
                write!(
                    f,
                    "get_peers({sid}) by {party} at {round} lacks {peer}; returned [{}]",
                    ids.join(", ")
                )
            }
        }
    }
}

/// Outcome of one robustness check.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub property: &'static str,
    /// Number of instantiated implications checked.
    pub obligations: usize,
    pub counterexample: Option<Counterexample>,
    /// Log records around the counterexample.
    pub timeline: Vec<String>,
}

impl Verdict {
    fn pass(property: &'static str, obligations: usize) -> Self {
        Verdict {
            property,
            obligations,
            counterexample: None,
            timeline: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "{}: PASS ({} obligations)", self.property, self.obligations),
            Some(c) => {
                writeln!(f, "{}: FAIL", self.property)?;
                write!(f, "  counterexample: {c}")?;
                if !self.timeline.is_empty() {
                    write!(f, "\n  timeline:")?;
                    for line in &self.timeline {
                        write!(f, "\n    {line}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

const TIMELINE_LIMIT: usize = 60;

/// Robustness of the distributed array with bound `beta` on corruption sets.
/// A log without a header passes vacuously.
pub fn verify_rda_robustness(log: &EventLog, beta: f64) -> Verdict {
    const NAME: &str = "rda robustness";
    let Ok(q) = EventQuery::new(log) else {
        return Verdict::pass(NAME, 0);
    };
    let params = *q.params();
    let lifetime = params.lifetime;
    let limit = beta * params.m as f64;
    let mut obligations = 0;

    let mut by_row: BTreeMap<u32, PartyId> = BTreeMap::new();
    for (p, info) in q.parties() {
        by_row.entry(info.cell.row).or_insert(*p);
    }
    for t in 0..=lifetime {
        for (&r, &p) in &by_row {
            obligations += 1;
            let size = q.occupancy().corruption_set(r, t).len();
            if size as f64 > limit {
                return Verdict {
                    property: NAME,
                    obligations,
                    counterexample: Some(Counterexample::CorruptionTooLarge {
                        party: p,
                        round: t,
                        size,
                        limit,
                    }),
                    timeline: Vec::new(),
                };
            }
        }
    }

    let mut stores: BTreeMap<(&Handle, SymbolIndex), Vec<_>> = BTreeMap::new();
    for s in q.stores() {
        if s.round <= lifetime
            && q.predicate().eval(&s.h, s.i, &s.x)
            && s.i >= 1
            && s.i <= params.m
            && q.fully_joined(s.party, s.round)
            && !q.corruption_set(s.party, s.round).contains(&params, s.i)
        {
            stores.entry((&s.h, s.i)).or_default().push(s);
        }
    }
    let mut gets: Vec<_> = q.gets().iter().filter(|g| g.round <= lifetime).collect();
    gets.sort_by_key(|g| g.round);
    for g in gets {
        let Some(ss) = stores.get(&(&g.h, g.i)) else { continue };
        if !q.fully_joined_duration(g.party, g.round, g.round + GET_DELAY)
            || q.corruption_set(g.party, g.round).contains(&params, g.i)
        {
            continue;
        }
        for s in ss.iter().filter(|s| s.round + STORE_GET_DELAY <= g.round) {
            obligations += 1;
            if !q.got_result(g.party, g.round, &g.h, g.i, GET_DELAY, &s.x) {
                return Verdict {
                    property: NAME,
                    obligations,
                    counterexample: Some(Counterexample::MissingResult {
                        storer: s.party,
                        stored_at: s.round,
                        getter: g.party,
                        get_at: g.round,
                        h: g.h.clone(),
                        i: g.i,
                        x: s.x.clone(),
                        returned: q.first_result(g.party, g.round, &g.h, g.i).cloned(),
                    }),
                    timeline: q.timeline(
                        &[s.party, g.party],
                        g.round.saturating_sub(1),
                        g.round + GET_DELAY + 1,
                        TIMELINE_LIMIT,
                    ),
                };
            }
        }
    }
    Verdict::pass(NAME, obligations)
}

/// Robustness of the subnet protocol, embedded or standalone, over rounds up
/// to the lifetime. A log without a header passes vacuously.
pub fn verify_subnet_robustness(log: &EventLog) -> Verdict {
    const NAME: &str = "subnet robustness";
    let Ok(q) = EventQuery::new(log) else {
        return Verdict::pass(NAME, 0);
    };
    let lifetime = q.params().lifetime;
    if let Some((call, peer)) = q.subnet_violations(lifetime).min_by_key(|(c, _)| c.round) {
        let d = q.params().subnet_delay;
        return Verdict {
            property: NAME,
            obligations: 0,
            counterexample: Some(Counterexample::MissingPeer {
                sid: call.sid,
                party: call.party,
                peer,
                round: call.round,
                returned: call.peers.clone(),
            }),
            timeline: q.timeline(
                &[call.party, peer],
                call.round.saturating_sub(d + 4),
                call.round,
                TIMELINE_LIMIT,
            ),
        };
    }
    let obligations = q
        .peers_calls()
        .iter()
        .filter(|c| c.round <= lifetime && q.is_in_subnet(c.sid, c.party, c.round))
        .map(|c| {
            q.subnet_members(c.sid)
                .filter(|p| q.is_in_subnet(c.sid, *p, c.round) && !q.out_of_scope(c.sid, c.party, *p))
                .count()
        })
        .sum();
    Verdict::pass(NAME, obligations)
}
