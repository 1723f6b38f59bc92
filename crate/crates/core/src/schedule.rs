//! Join-leave schedules: construction, text serialization, generators and
//! admissibility checking.
//!
//! A party is active from its join round through its leave round, both
//! inclusive. Leave rounds are the last active round.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::ScheduleError;
use crate::types::{Params, PartyId, Round};

/// One scheduled honest join.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinSpec {
    pub party: PartyId,
    pub bootstraps: Vec<PartyId>,
    pub aux: bool,
}

/// Activity interval of a scheduled party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub join: Round,
    /// Last active round; `None` if the party never leaves.
    pub leave: Option<Round>,
}

impl Interval {
    pub fn contains(&self, t: Round) -> bool {
        t >= self.join && self.leave.is_none_or(|l| t <= l)
    }

    /// Active over `[a, b]`, both inclusive.
    pub fn covers(&self, a: Round, b: Round) -> bool {
        a <= b && self.join <= a && self.leave.is_none_or(|l| l >= b)
    }
}

/// A validated join-leave schedule. Pure data: it never consults the oracle.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Schedule {
    joins: BTreeMap<Round, Vec<JoinSpec>>,
    leaves: BTreeMap<Round, Vec<PartyId>>,
    intervals: BTreeMap<PartyId, Interval>,
    aux: BTreeMap<PartyId, bool>,
}

/// Accumulates joins and leaves, then validates them into a [`Schedule`].
#[derive(Clone, Debug, Default)]
pub struct ScheduleBuilder {
    joins: BTreeMap<Round, Vec<JoinSpec>>,
    leaves: BTreeMap<Round, Vec<PartyId>>,
}

impl ScheduleBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a party to the coordinated setup at round 0.
    pub fn initial(&mut self, party: PartyId, aux: bool) -> &mut Self {
        self.join(0, party, Vec::new(), aux)
    }

    pub fn join(
        &mut self,
        round: Round,
        party: PartyId,
        bootstraps: Vec<PartyId>,
        aux: bool,
    ) -> &mut Self {
        self.joins.entry(round).or_default().push(JoinSpec {
            party,
            bootstraps,
            aux,
        });
        self
    }

    pub fn leave(&mut self, round: Round, party: PartyId) -> &mut Self {
        self.leaves.entry(round).or_default().push(party);
        self
    }

    pub fn build(self) -> Result<Schedule, ScheduleError> {
        let mut intervals: BTreeMap<PartyId, Interval> = BTreeMap::new();
        let mut aux = BTreeMap::new();
        for (&round, specs) in &self.joins {
            for j in specs {
                if round == 0 && !j.bootstraps.is_empty() {
                    return Err(ScheduleError::InitialWithBootstraps(j.party));
                }
                if intervals
                    .insert(j.party, Interval { join: round, leave: None })
                    .is_some()
                {
                    return Err(ScheduleError::DuplicateJoin(j.party));
                }
                aux.insert(j.party, j.aux);
            }
        }
        for (&round, parties) in &self.leaves {
            for p in parties {
                let iv = intervals
                    .get_mut(p)
                    .filter(|iv| iv.join <= round)
                    .ok_or(ScheduleError::LeaveWhileInactive {
                        party: *p,
                        round,
                    })?;
                if iv.leave.is_some() {
                    return Err(ScheduleError::DuplicateLeave { party: *p });
                }
                iv.leave = Some(round);
            }
        }
        for (&round, specs) in &self.joins {
            for j in specs {
                for b in &j.bootstraps {
                    // Unknown ids are not honest; the engine checks them against
                    // the malicious pool.
                    if let Some(iv) = intervals.get(b) {
                        if round == 0 || !iv.contains(round - 1) {
                            return Err(ScheduleError::InactiveBootstrap {
                                party: j.party,
                                bootstrap: *b,
                                round,
                            });
                        }
                    }
                }
            }
        }
        Ok(Schedule {
            joins: self.joins,
            leaves: self.leaves,
            intervals,
            aux,
        })
    }
}

impl Schedule {
    /// The coordinated-setup parties and their role bits.
    pub fn initial(&self) -> Vec<(PartyId, bool)> {
        self.joins
            .get(&0)
            .map(|v| v.iter().map(|j| (j.party, j.aux)).collect())
            .unwrap_or_default()
    }

    pub fn joins_at(&self, round: Round) -> &[JoinSpec] {
        self.joins.get(&round).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn leaves_at(&self, round: Round) -> &[PartyId] {
        self.leaves.get(&round).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn interval(&self, party: PartyId) -> Option<Interval> {
        self.intervals.get(&party).copied()
    }

    pub fn aux(&self, party: PartyId) -> Option<bool> {
        self.aux.get(&party).copied()
    }

    pub fn contains(&self, party: PartyId) -> bool {
        self.intervals.contains_key(&party)
    }

    pub fn parties(&self) -> impl Iterator<Item = (PartyId, Interval)> + '_ {
        self.intervals.iter().map(|(p, iv)| (*p, *iv))
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_active(&self, party: PartyId, round: Round) -> bool {
        self.interval(party).is_some_and(|iv| iv.contains(round))
    }

    pub fn active_at(&self, round: Round) -> Vec<PartyId> {
        self.intervals
            .iter()
            .filter(|(_, iv)| iv.contains(round))
            .map(|(p, _)| *p)
            .collect()
    }

    /// Last round with a scheduled event.
    pub fn last_event_round(&self) -> Round {
        let j = self.joins.keys().next_back().copied().unwrap_or(0);
        let l = self.leaves.keys().next_back().copied().unwrap_or(0);
        j.max(l)
    }

    /// Every scheduled join with its round, in round order.
    pub fn all_joins(&self) -> impl Iterator<Item = (Round, &JoinSpec)> {
        self.joins
            .iter()
            .flat_map(|(r, v)| v.iter().map(move |j| (*r, j)))
    }

    /// Line-oriented text form: `round join party b1,b2|- aux` and
    /// `round leave party`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# round op party bootstraps aux\n");
        let rounds: BTreeSet<Round> = self.joins.keys().chain(self.leaves.keys()).copied().collect();
        for r in rounds {
            for j in self.joins_at(r) {
                let bs = if j.bootstraps.is_empty() {
                    "-".to_string()
                } else {
                    j.bootstraps
                        .iter()
                        .map(|b| b.0.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let _ = writeln!(out, "{r} join {} {bs} {}", j.party.0, u8::from(j.aux));
            }
            for p in self.leaves_at(r) {
                let _ = writeln!(out, "{r} leave {}", p.0);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Schedule, ScheduleError> {
        let mut b = ScheduleBuilder::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| ScheduleError::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<u64>().map_err(|_| err("expected an integer"));
            match f.as_slice() {
                [r, "join", p, bs, aux] => {
                    let bootstraps = if *bs == "-" {
                        Vec::new()
                    } else {
                        bs.split(',')
                            .map(|x| num(x).map(PartyId))
                            .collect::<Result<_, _>>()?
                    };
                    let aux = match *aux {
                        "0" => false,
                        "1" => true,
                        _ => return Err(err("aux must be 0 or 1")),
                    };
                    b.join(num(r)?, PartyId(num(p)?), bootstraps, aux);
                }
                [r, "leave", p] => {
                    b.leave(num(r)?, PartyId(num(p)?));
                }
                _ => return Err(err("unrecognized record")),
            }
        }
        b.build()
    }
}

/// `max{2 subnet_delay + 2, 2 sync_delay + subnet_delay + 2}`.
pub fn overlap_min(subnet_delay: u64, sync_delay: u64) -> u64 {
    (2 * subnet_delay + 2).max(2 * sync_delay + subnet_delay + 2)
}

/// Outcome of [`check_admissible`]; each field lists witnesses of failure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdmissibilityReport {
    /// Set when `overlap` is below the minimum overlap for the delays.
    pub overlap_below_min: Option<u64>,
    /// First round with fewer than `N` honest parties spanning the overlap,
    /// and the count found there.
    pub too_few_honest: Option<(Round, usize)>,
    /// Joins naming an honest bootstrap with role bit 0: (joiner, round, bootstrap).
    pub non_aux_bootstraps: Vec<(PartyId, Round, PartyId)>,
    /// Joins without a good honest bootstrap: (joiner, round).
    pub bad_bootstraps: Vec<(PartyId, Round)>,
}

impl AdmissibilityReport {
    pub fn respects_bootstrap_nodes(&self) -> bool {
        self.non_aux_bootstraps.is_empty()
    }

    pub fn uses_good_bootstrap_nodes(&self) -> bool {
        self.bad_bootstraps.is_empty()
    }

    pub fn guarantees_n(&self) -> bool {
        self.too_few_honest.is_none()
    }

    pub fn is_admissible(&self) -> bool {
        self.overlap_below_min.is_none()
            && self.guarantees_n()
            && self.respects_bootstrap_nodes()
            && self.uses_good_bootstrap_nodes()
    }

    pub fn describe(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(min) = self.overlap_below_min {
            v.push(format!("overlap is below the minimum {min}"));
        }
        if let Some((t, n)) = self.too_few_honest {
            v.push(format!("only {n} honest parties span the overlap from round {t}"));
        }
        for (p, t, b) in &self.non_aux_bootstraps {
            v.push(format!("join of {p} at round {t} names bootstrap {b} with aux=0"));
        }
        for (p, t) in &self.bad_bootstraps {
            v.push(format!("join of {p} at round {t} has no good honest bootstrap"));
        }
        v
    }
}

/// For each `t` in `0..=horizon`, the number of scheduled parties active over
/// `[t, t + overlap]`.
pub fn overlap_counts(s: &Schedule, overlap: u64, horizon: Round) -> Vec<usize> {
    let len = horizon as usize + 2;
    let mut diff = vec![0i64; len];
    for (_, iv) in s.parties() {
        let last = match iv.leave {
            None => horizon,
            Some(l) if l >= overlap => (l - overlap).min(horizon),
            Some(_) => continue,
        };
        if iv.join > last {
            continue;
        }
        diff[iv.join as usize] += 1;
        diff[last as usize + 1] -= 1;
    }
    let mut acc = 0i64;
    diff[..=horizon as usize]
        .iter()
        .map(|d| {
            acc += d;
            acc as usize
        })
        .collect()
}

/// Largest `N` the schedule guarantees with the given overlap up to `horizon`.
pub fn guaranteed_honest(s: &Schedule, overlap: u64, horizon: Round) -> usize {
    overlap_counts(s, overlap, horizon).into_iter().min().unwrap_or(0)
}

/// Checks the three admissibility predicates over rounds `0..=params.lifetime`.
pub fn check_admissible(s: &Schedule, n: usize, overlap: u64, params: &Params) -> AdmissibilityReport {
    let mut report = AdmissibilityReport::default();
    let min = overlap_min(params.subnet_delay, params.sync_delay);
    if overlap < min {
        report.overlap_below_min = Some(min);
    }
    report.too_few_honest = overlap_counts(s, overlap, params.lifetime)
        .into_iter()
        .enumerate()
        .find(|(_, c)| *c < n)
        .map(|(t, c)| (t as Round, c));
    let d = params.subnet_delay;
    for (t, j) in s.all_joins() {
        if t == 0 {
            continue;
        }
        let honest: Vec<(PartyId, Interval)> = j
            .bootstraps
            .iter()
            .filter_map(|b| s.interval(*b).map(|iv| (*b, iv)))
            .collect();
        for (b, _) in &honest {
            if s.aux(*b) != Some(true) {
                report.non_aux_bootstraps.push((j.party, t, *b));
            }
        }
        let good = honest.iter().any(|(_, iv)| {
            let early = if t >= d { iv.contains(t - d) } else { iv.join == 0 };
            early && iv.contains(t + d)
        });
        if !good {
            report.bad_bootstraps.push((j.party, t));
        }
    }
    report
}

/// Parameters of the benchmark churn schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChurnSpec {
    /// Non-anchor parties present at round 0.
    pub initial: usize,
    /// Non-anchor population after warmup.
    pub warmup_target: usize,
    /// Parties leaving and joining per post-warmup step.
    pub batch: usize,
    /// Steps each party stays after warmup.
    pub stay: usize,
    /// Last round of the schedule.
    pub rounds: Round,
    /// Long-lived initial parties with aux=1 that never leave and serve as
    /// bootstrap nodes. Not counted in `initial` or `warmup_target`.
    pub anchors: usize,
}

impl ChurnSpec {
    pub fn warmup_rounds(&self) -> Round {
        (self.warmup_target - self.initial) as Round
    }

    pub fn build(&self) -> Result<Schedule, ScheduleError> {
        if self.warmup_target < self.initial {
            return Err(ScheduleError::BadGenerator(
                "warmup target is below the initial population".into(),
            ));
        }
        if self.batch > 0 && self.stay * self.batch != self.warmup_target {
            return Err(ScheduleError::BadGenerator(format!(
                "stay {} does not equal target {} / batch {}",
                self.stay, self.warmup_target, self.batch
            )));
        }
        if self.anchors == 0 {
            return Err(ScheduleError::BadGenerator(
                "at least one anchor bootstrap node is required".into(),
            ));
        }
        let mut b = ScheduleBuilder::new();
        let mut next = 1u64;
        let mut fresh = || {
            let p = PartyId(next);
            next += 1;
            p
        };
        let anchors: Vec<PartyId> = (0..self.anchors).map(|_| fresh()).collect();
        for a in &anchors {
            b.initial(*a, true);
        }
        let mut fifo = VecDeque::new();
        for _ in 0..self.initial {
            let p = fresh();
            b.initial(p, false);
            fifo.push_back(p);
        }
        let warm_end = self.warmup_rounds();
        for t in 1..=warm_end.min(self.rounds) {
            let p = fresh();
            b.join(t, p, anchors.clone(), false);
            fifo.push_back(p);
        }
        if self.batch > 0 {
            // Cohorts leave at the end of the round before their replacements
            // join, so the population stays at the target and every cohort is
            // active for exactly `stay` rounds.
            for t in warm_end..self.rounds {
                for _ in 0..self.batch {
                    if let Some(p) = fifo.pop_front() {
                        b.leave(t, p);
                    }
                }
                for _ in 0..self.batch {
                    let p = fresh();
                    b.join(t + 1, p, anchors.clone(), false);
                    fifo.push_back(p);
                }
            }
        }
        b.build()
    }
}

/// The benchmark schedule with a single anchor bootstrap node.
pub fn churn_schedule(
    initial: usize,
    warmup_target: usize,
    batch: usize,
    stay: usize,
    rounds: Round,
) -> Result<Schedule, ScheduleError> {
    ChurnSpec {
        initial,
        warmup_target,
        batch,
        stay,
        rounds,
        anchors: 1,
    }
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(lifetime: u64) -> Params {
        Params::new(2, 2, 2, 7, 2, lifetime).unwrap()
    }

    #[test]
    fn overlap_min_examples() {
        assert_eq!(overlap_min(7, 2), 16);
        assert_eq!(overlap_min(2, 2), 8);
        assert_eq!(overlap_min(7, 7), 23);
    }

    #[test]
    fn static_schedule_is_admissible() {
        let mut b = ScheduleBuilder::new();
        for i in 0..5 {
            b.initial(PartyId(i), i == 0);
        }
        let s = b.build().unwrap();
        let r = check_admissible(&s, 5, 16, &params(100));
        assert!(r.is_admissible(), "{:?}", r.describe());
        assert!(!check_admissible(&s, 6, 16, &params(100)).is_admissible());
    }

    #[test]
    fn non_aux_bootstrap_fails_respect() {
        let mut b = ScheduleBuilder::new();
        b.initial(PartyId(1), false);
        b.join(3, PartyId(2), vec![PartyId(1)], false);
        let s = b.build().unwrap();
        let r = check_admissible(&s, 1, 16, &params(20));
        assert!(!r.respects_bootstrap_nodes());
        assert_eq!(r.non_aux_bootstraps, vec![(PartyId(2), 3, PartyId(1))]);
    }

    #[test]
    fn good_bootstrap_needs_activity_both_sides() {
        let mut b = ScheduleBuilder::new();
        b.initial(PartyId(1), true);
        b.join(1, PartyId(2), vec![PartyId(1)], true);
        // PartyId(2) is active over [1, 16]. A join at 9 sees it at 2 and 16;
        // one at 5 needs round -2 (not initial), one at 10 needs round 17.
        b.join(5, PartyId(3), vec![PartyId(2)], false);
        b.join(9, PartyId(4), vec![PartyId(2)], false);
        b.leave(16, PartyId(2));
        b.join(10, PartyId(5), vec![PartyId(2)], false);
        let s = b.build().unwrap();
        let r = check_admissible(&s, 1, 16, &params(20));
        assert_eq!(r.bad_bootstraps, vec![(PartyId(3), 5), (PartyId(5), 10)]);
    }

    #[test]
    fn invalid_schedules_rejected() {
        let mut b = ScheduleBuilder::new();
        b.initial(PartyId(1), true);
        b.leave(0, PartyId(2));
        assert!(matches!(b.build(), Err(ScheduleError::LeaveWhileInactive { .. })));

        let mut b = ScheduleBuilder::new();
        b.initial(PartyId(1), true);
        b.join(2, PartyId(1), vec![], false);
        assert!(matches!(b.build(), Err(ScheduleError::DuplicateJoin(_))));

        let mut b = ScheduleBuilder::new();
        b.initial(PartyId(1), true);
        b.join(2, PartyId(2), vec![PartyId(3)], false);
        b.join(2, PartyId(3), vec![PartyId(1)], true);
        assert!(matches!(b.build(), Err(ScheduleError::InactiveBootstrap { .. })));
    }

    #[test]
    fn text_round_trip() {
        let s = churn_schedule(3, 6, 2, 3, 12).unwrap();
        let t = s.to_text();
        assert_eq!(Schedule::from_text(&t).unwrap(), s);
        assert!(Schedule::from_text("1 jump 2").is_err());
    }

    #[test]
    fn churn_benchmark_setting() {
        let s = churn_schedule(20, 2500, 50, 50, 3000).unwrap();
        let warm = 2480;
        for t in [warm, warm + 1, warm + 137, 2999] {
            assert_eq!(s.active_at(t).len(), 2501, "round {t}");
        }
        // Post-warmup cohorts stay exactly 50 rounds.
        for (t, j) in s.all_joins().filter(|(t, _)| *t > warm && *t + 50 < 3000) {
            let iv = s.interval(j.party).unwrap();
            assert_eq!(iv.leave, Some(t + 49));
        }
        let r = check_admissible(&s, 2000, 16, &Params::new(25, 100, 100, 7, 2, 2900).unwrap());
        assert!(r.respects_bootstrap_nodes() && r.uses_good_bootstrap_nodes());
    }

    #[test]
    fn churn_steady_state_overlap() {
        // A cohort joining at j is active over [j, j+49], so it spans
        // [t, t+o] iff t+o-49 <= j <= t: 50-o cohorts of 50, plus the anchor.
        let s = churn_schedule(20, 2500, 50, 50, 3000).unwrap();
        for o in [16u64, 30, 49] {
            let counts = overlap_counts(&s, o, 2900);
            let expect = 50 * (50 - o as usize) + 1;
            assert!(counts[2530..].iter().all(|&c| c == expect), "overlap {o}");
        }
        // Only the anchor spans a full stay.
        assert_eq!(*overlap_counts(&s, 50, 2900)[2530..].iter().max().unwrap(), 1);
    }

    #[test]
    fn churn_degenerate_cases() {
        let s = churn_schedule(10, 10, 5, 2, 30).unwrap();
        assert_eq!(s.initial().len(), 11);
        assert_eq!(s.joins_at(1).len(), 5);
        let s = churn_schedule(10, 20, 0, 0, 50).unwrap();
        assert_eq!(s.active_at(50).len(), 21);
        assert!(s.leaves_at(25).is_empty());
        assert!(churn_schedule(10, 20, 3, 5, 50).is_err());
        assert!(churn_schedule(30, 20, 0, 0, 50).is_err());
    }

    proptest! {
        #[test]
        fn admissibility_monotone_in_n(seed in 0u64..500, n in 1usize..30) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut b = ScheduleBuilder::new();
            b.initial(PartyId(0), true);
            for i in 1..40u64 {
                let j = rng.random_range(0..30u64);
                if j == 0 {
                    b.initial(PartyId(i), false);
                } else {
                    b.join(j, PartyId(i), vec![PartyId(0)], false);
                }
                if rng.random_bool(0.6) {
                    b.leave(j + rng.random_range(0..40u64), PartyId(i));
                }
            }
            let s = b.build().unwrap();
            let p = params(40);
            if check_admissible(&s, n, 16, &p).is_admissible() {
                for smaller in 0..n {
                    prop_assert!(check_admissible(&s, smaller, 16, &p).is_admissible());
                }
            }
            prop_assert_eq!(guaranteed_honest(&s, 16, 40) >= n,
                            check_admissible(&s, n, 16, &p).guarantees_n());
        }
    }
}
