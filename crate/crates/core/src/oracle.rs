//! The random oracle assigning each party to a grid cell, plus the symbol and
//! subnet labelling helpers.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ParamsError;
use crate::types::{Cell, Params, PartyId, SubnetId, SymbolIndex};

/// Lazily sampled, memoized map from parties to cells.
///
/// Each party's cell is drawn from its own ChaCha stream keyed by the
/// experiment seed, so the result does not depend on query order.
#[derive(Debug)]
pub struct CellOracle {
    params: Params,
    seed: u64,
    memo: Mutex<HashMap<PartyId, Cell>>,
}

impl Clone for CellOracle {
    fn clone(&self) -> Self {
        CellOracle {
            params: self.params,
            seed: self.seed,
            memo: Mutex::new(self.memo.lock().expect("oracle memo poisoned").clone()),
        }
    }
}

impl CellOracle {
    pub fn new(params: Params, seed: u64) -> Self {
        CellOracle {
            params,
            seed,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn cell(&self, party: PartyId) -> Cell {
        let mut memo = self.memo.lock().expect("oracle memo poisoned");
        *memo.entry(party).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(party.0);
            let k = rng.random_range(0..self.params.k1 * self.params.k2);
            Cell {
                row: k / self.params.k2 + 1,
                col: k % self.params.k2 + 1,
            }
        })
    }

    pub fn row(&self, party: PartyId) -> u32 {
        self.cell(party).row
    }

    pub fn col(&self, party: PartyId) -> u32 {
        self.cell(party).col
    }

    pub fn col_for_symbol(&self, i: SymbolIndex) -> Result<u32, ParamsError> {
        col_for_symbol(&self.params, i)
    }
}

/// Column storing symbol `i`: the unique `c` with `(c-1)m/k2 < i <= cm/k2`.
pub fn col_for_symbol(params: &Params, i: SymbolIndex) -> Result<u32, ParamsError> {
    if i == 0 || i > params.m {
        return Err(ParamsError::IndexOutOfRange { i, m: params.m });
    }
    Ok((i - 1) / params.symbols_per_column() + 1)
}

/// The symbol indices stored by column `c`.
pub fn symbols_of_column(params: &Params, c: u32) -> std::ops::RangeInclusive<SymbolIndex> {
    let w = params.symbols_per_column();
    (c - 1) * w + 1..=c * w
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubnetKind {
    Row,
    Column,
}

pub fn subnet_id(params: &Params, kind: SubnetKind, index: u32) -> Result<SubnetId, ParamsError> {
    match kind {
        SubnetKind::Row if (1..=params.k1).contains(&index) => Ok(SubnetId(index)),
        SubnetKind::Column if (1..=params.k2).contains(&index) => Ok(SubnetId(params.k1 + index)),
        SubnetKind::Row => Err(ParamsError::SubnetOutOfRange { kind: "row", index }),
        SubnetKind::Column => Err(ParamsError::SubnetOutOfRange {
            kind: "column",
            index,
        }),
    }
}

/// Row subnet id; `r` must be a valid row.
pub fn row_sid(params: &Params, r: u32) -> SubnetId {
    debug_assert!((1..=params.k1).contains(&r));
    SubnetId(r)
}

/// Column subnet id; `c` must be a valid column.
pub fn col_sid(params: &Params, c: u32) -> SubnetId {
    debug_assert!((1..=params.k2).contains(&c));
    SubnetId(params.k1 + c)
}

/// Inverse of [`subnet_id`]; `None` for ids outside `1..=k1+k2`.
pub fn classify_sid(params: &Params, sid: SubnetId) -> Option<(SubnetKind, u32)> {
    match sid.0 {
        0 => None,
        s if s <= params.k1 => Some((SubnetKind::Row, s)),
        s if s <= params.k1 + params.k2 => Some((SubnetKind::Column, s - params.k1)),
        _ => None,
    }
}
