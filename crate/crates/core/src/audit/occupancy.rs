//! Cell and column occupancy by honest activity intervals: the good events
//! that depend on the schedule alone, and the induced corruption sets.

use crate::oracle::symbols_of_column;
use crate::schedule::Interval;
use crate::types::{Cell, Params, Round, SymbolIndex};

const FOREVER: Round = Round::MAX;

#[derive(Clone, Debug, Default)]
struct Spans {
    /// Join rounds, ascending.
    joins: Vec<Round>,
    /// `max_leave[k]`: latest last-active round among the first `k+1` joins.
    max_leave: Vec<Round>,
}

impl Spans {
    fn build(mut ivs: Vec<Interval>) -> Self {
        ivs.sort_by_key(|iv| iv.join);
        let mut best = 0;
        let mut s = Spans::default();
        for iv in ivs {
            best = best.max(iv.leave.unwrap_or(FOREVER));
            s.joins.push(iv.join);
            s.max_leave.push(best);
        }
        s
    }

    /// Some interval covers `[a, b]`.
    fn covers(&self, a: Round, b: Round) -> bool {
        let k = self.joins.partition_point(|j| *j <= a);
        k > 0 && self.max_leave[k - 1] >= b
    }
}

/// Indices waived for a party at a round: whole columns, `m/k2` indices each.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CorruptionSet {
    pub columns: Vec<u32>,
    per_column: u32,
}

impl CorruptionSet {
    pub fn len(&self) -> usize {
        self.columns.len() * self.per_column as usize
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn contains(&self, params: &Params, i: SymbolIndex) -> bool {
        crate::oracle::col_for_symbol(params, i).is_ok_and(|c| self.columns.binary_search(&c).is_ok())
    }

    pub fn indices(&self, params: &Params) -> Vec<SymbolIndex> {
        self.columns
            .iter()
            .flat_map(|c| symbols_of_column(params, *c))
            .collect()
    }

    pub fn fraction(&self, params: &Params) -> f64 {
        self.len() as f64 / params.m as f64
    }
}

/// Honest activity indexed by cell and column.
#[derive(Clone, Debug)]
pub struct Occupancy {
    params: Params,
    cells: Vec<Spans>,
    columns: Vec<Vec<Interval>>,
}

impl Occupancy {
    pub fn new(params: Params, parties: impl IntoIterator<Item = (Cell, Interval)>) -> Self {
        let n = (params.k1 * params.k2) as usize;
        let mut by_cell: Vec<Vec<Interval>> = vec![Vec::new(); n];
        let mut columns: Vec<Vec<Interval>> = vec![Vec::new(); params.k2 as usize];
        for (cell, iv) in parties {
            by_cell[Self::slot(&params, cell)].push(iv);
            columns[cell.col as usize - 1].push(iv);
        }
        Occupancy {
            params,
            cells: by_cell.into_iter().map(Spans::build).collect(),
            columns,
        }
    }

    fn slot(params: &Params, cell: Cell) -> usize {
        ((cell.row - 1) * params.k2 + (cell.col - 1)) as usize
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Some honest party of `(r, c)` is active over `[max(0, t1-Δ_SN-2), t2]`.
    pub fn good_cell(&self, r: u32, c: u32, t1: Round, t2: Round) -> bool {
        let a = t1.saturating_sub(self.params.subnet_delay + 2);
        self.cells[Self::slot(&self.params, Cell { row: r, col: c })].covers(a, t2)
    }

    /// Columns `c` failing `GoodCell(r, c, max(0, τ-Δ_sync), τ+1)`.
    pub fn corrupted_columns(&self, r: u32, tau: Round) -> Vec<u32> {
        let t1 = tau.saturating_sub(self.params.sync_delay);
        (1..=self.params.k2)
            .filter(|c| !self.good_cell(r, *c, t1, tau + 1))
            .collect()
    }

    pub fn corruption_set(&self, r: u32, tau: Round) -> CorruptionSet {
        CorruptionSet {
            columns: self.corrupted_columns(r, tau),
            per_column: self.params.symbols_per_column(),
        }
    }

    /// `|C|/m` for a party in row `r`.
    pub fn corruption_fraction(&self, r: u32, tau: Round) -> f64 {
        self.corrupted_columns(r, tau).len() as f64 / self.params.k2 as f64
    }

    /// Largest `T <= limit` such that every `τ <= T` has an honest party of
    /// column `c` active over `[τ, τ+overlap]`; `None` if `τ = 0` already
    /// fails.
    pub fn column_good_horizon(&self, c: u32, overlap: u64, limit: Round) -> Option<Round> {
        let len = limit as usize + 2;
        let mut diff = vec![0i64; len];
        for iv in &self.columns[c as usize - 1] {
            let last = match iv.leave {
                None => limit,
                Some(l) if l >= overlap => (l - overlap).min(limit),
                Some(_) => continue,
            };
            if iv.join > last {
                continue;
            }
            diff[iv.join as usize] += 1;
            diff[last as usize + 1] -= 1;
        }
        let mut acc = 0;
        for (t, d) in diff.iter().enumerate().take(limit as usize + 1) {
            acc += d;
            if acc == 0 {
                return t.checked_sub(1).map(|t| t as Round);
            }
        }
        Some(limit)
    }

    pub fn column_good(&self, c: u32, t: Round, overlap: u64) -> bool {
        self.column_good_horizon(c, overlap, t).is_some_and(|h| h >= t)
    }
}
