//! Lemma-level conformance: the intermediate correctness statements checked
//! as log predicates wherever their event preconditions hold.

use std::collections::BTreeSet;
use std::fmt;

use crate::engine::log::EventLog;
use crate::oracle::col_for_symbol;
use crate::types::{Handle, Round, SymbolIndex};

use super::EventQuery;

const MAX_EXAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaCheck {
    pub lemma: &'static str,
    /// Instances whose preconditions held.
    pub checked: usize,
    pub violations: usize,
    pub examples: Vec<String>,
}

impl LemmaCheck {
    fn new(lemma: &'static str) -> Self {
        LemmaCheck {
            lemma,
            checked: 0,
            violations: 0,
            examples: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(describe());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LemmaReport {
    /// Why no lemma applies to this run, if none does.
    pub skipped: Option<String>,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn check(&self, lemma: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.lemma == lemma)
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(why) = &self.skipped {
            return write!(f, "lemmas: skipped ({why})");
        }
        let mut first = true;
        for c in &self.checks {
            if !first {
                writeln!(f)?;
            }
            first = false;
            let status = if c.violations == 0 { "PASS" } else { "FAIL" };
            write!(f, "{}: {status} ({} checked, {} violations)", c.lemma, c.checked, c.violations)?;
            for e in &c.examples {
                write!(f, "\n  {e}")?;
            }
        }
        Ok(())
    }
}

/// Largest `T <= lifetime` with `ColumnGood(c, T + col_shift, ·)` given the
/// column horizon, and `SubnetprotGood(T + sub_shift)` given the first
/// subnet violation.
fn horizon(
    col: Option<Round>,
    col_shift: u64,
    first_violation: Option<Round>,
    sub_shift: u64,
    lifetime: Round,
) -> Option<Round> {
    let a = col?.checked_sub(col_shift)?;
    let b = match first_violation {
        None => Round::MAX,
        Some(f) => f.checked_sub(sub_shift + 1)?,
    };
    Some(a.min(b).min(lifetime))
}

fn schedule_precondition(q: &EventQuery<'_>) -> Result<(), String> {
    let d = q.params().subnet_delay;
    for (p, info) in q.parties() {
        if info.initial() {
            continue;
        }
        let t = info.interval.join;
        let honest: Vec<_> = info.bootstraps.iter().filter(|b| q.is_honest(**b)).collect();
        if let Some(b) = honest.iter().find(|b| !q.party(***b).is_some_and(|i| i.aux)) {
            return Err(format!("join of {p} at {t} names bootstrap {b} with aux=0"));
        }
        let good = honest.iter().any(|b| {
            let early = if t >= d {
                q.active(**b, t - d)
            } else {
                q.party(**b).is_some_and(|i| i.initial())
            };
            early && q.active(**b, t + d)
        });
        if !good {
            return Err(format!("join of {p} at {t} has no good honest bootstrap"));
        }
    }
    Ok(())
}

/// Runs every lemma check on `log`. Checks whose window extends past the
/// last logged round are left out.
pub fn lemma_conformance(log: &EventLog) -> LemmaReport {
    let Ok(q) = EventQuery::new(log) else {
        return LemmaReport {
            skipped: Some("empty log".into()),
            checks: Vec::new(),
        };
    };
    if let Err(why) = schedule_precondition(&q) {
        return LemmaReport {
            skipped: Some(why),
            checks: Vec::new(),
        };
    }
    let params = *q.params();
    let lifetime = params.lifetime;
    let d = params.subnet_delay;
    let ds = params.sync_delay;
    let end = q.last_round();
    let fv = q.first_subnet_violation();
    let col_h: Vec<Option<Round>> = (1..=params.k2)
        .map(|c| q.occupancy().column_good_horizon(c, 2 * d + 2, lifetime + 1))
        .collect();
    let h_join = |c: u32| horizon(col_h[c as usize - 1], 0, fv, 1, lifetime);
    let h_retain = |c: u32| horizon(col_h[c as usize - 1], 1, fv, 2, lifetime);
    let h_get = |c: u32| horizon(col_h[c as usize - 1], 0, fv, 0, lifetime);

    let mut join = LemmaCheck::new("joining rows and columns");
    for (&p, info) in q.parties() {
        let (r, c) = (info.cell.row, info.cell.col);
        let Some(t_max) = h_join(c) else { continue };
        let tj = info.interval.join;
        let last = info.interval.leave.unwrap_or(lifetime).min(lifetime);
        let rows: Vec<u32> = if info.aux { (1..=params.k1).collect() } else { vec![r] };
        let mut ok = true;
        let mut why = String::new();
        for ta in tj..=last {
            for &rr in &rows {
                let want = info.initial() || ta >= tj + d;
                if q.is_in_subnet(q.row_sid(rr), p, ta) != want {
                    ok = false;
                    why = format!("{p} (joined {tj}) row {rr} membership at {ta} should be {want}");
                }
            }
            if info.initial() || tj <= t_max {
                let want = info.initial() || ta >= tj + d + 2;
                if q.is_in_subnet(q.col_sid(c), p, ta) != want {
                    ok = false;
                    why = format!("{p} (joined {tj}) column {c} membership at {ta} should be {want}");
                }
            }
        }
        join.record(ok, || why);
    }

    let mut store = LemmaCheck::new("store works");
    let mut triples: BTreeSet<(&Handle, SymbolIndex)> = BTreeSet::new();
    for s in q.stores() {
        let Ok(c) = col_for_symbol(&params, s.i) else { continue };
        if !q.predicate().eval(&s.h, s.i, &s.x) {
            continue;
        }
        triples.insert((&s.h, s.i));
        let r = q.party(s.party).map_or(0, |i| i.cell.row);
        let applies = h_join(c).is_some_and(|t| s.round <= t)
            && s.round + 3 <= end
            && q.good_cell(r, c, s.round, s.round + 1)
            && q.fully_joined(s.party, s.round);
        if applies {
            let ok = q.stored_in_column(c, s.round + 1, s.round + 3, &s.h, s.i, &s.x);
            store.record(ok, || {
                format!(
                    "store of ({}, {}) by {} at {} not held by column {c} over [{}, {}]",
                    s.h,
                    s.i,
                    s.party,
                    s.round,
                    s.round + 1,
                    s.round + 3
                )
            });
        }
    }

    let mut retain = LemmaCheck::new("retaining data");
    let mut extension = LemmaCheck::new("stored-in-column extension");
    for &(h, i) in &triples {
        let c = col_for_symbol(&params, i).expect("filtered");
        let x = q.predicate().expected(h, i);
        if let Some(t_max) = h_retain(c) {
            for t in 0..=t_max {
                if t + ds + 2 > end {
                    break;
                }
                let pre = q.stored_in_column(c, t, t + ds + 1, h, i, &x)
                    && q.stored_and_retain(c, t + 2, t + ds, h, i, &x);
                if pre {
                    let ok = q.stored_in_column(c, t + 1, t + ds + 2, h, i, &x);
                    retain.record(ok, || {
                        format!("({h}, {i}) in column {c}: held over [{t}, {}] but not [{}, {}]", t + ds + 1, t + 1, t + ds + 2)
                    });
                }
            }
        }
        for t0 in 0..=lifetime {
            for t1 in t0..=(t0 + ds + 2).min(end.saturating_sub(1)) {
                if q.stored_in_column(c, t0, t1, h, i, &x) {
                    let ok = q.stored_in_column(c, t0, t1 + 1, h, i, &x);
                    extension.record(ok, || format!("({h}, {i}) in column {c}: [{t0}, {t1}] does not extend"));
                }
            }
        }
    }

    let mut get = LemmaCheck::new("get works");
    for g in q.gets() {
        let Ok(c) = col_for_symbol(&params, g.i) else { continue };
        let Some(t_max) = h_get(c) else { continue };
        let tg = g.round;
        if tg > t_max || !q.fully_joined_duration(g.party, tg, tg + 2) {
            continue;
        }
        let r = q.party(g.party).map_or(0, |i| i.cell.row);
        let x = q.predicate().expected(&g.h, g.i);
        let held_around = |from: Round| (from..tg).any(|t| q.stored_in_column(c, t, t + 2, &g.h, g.i, &x));
        let applies = if tg >= ds {
            q.good_cell(r, c, tg - ds, tg + 1)
                && (q.stored_in_column(c, tg - ds, tg + 1, &g.h, g.i, &x) || held_around(tg - ds))
        } else {
            q.good_cell(r, c, 0, tg + 1) && held_around(0)
        };
        if applies {
            let ok = q.got_result(g.party, tg, &g.h, g.i, 2, &x);
            get.record(ok, || format!("get of ({}, {}) by {} at {tg} did not return in time", g.h, g.i, g.party));
        }
    }

    LemmaReport {
        skipped: None,
        checks: vec![join, store, retain, get, extension],
    }
}
