//! Intra-round processing order.

use crate::error::EngineError;
use crate::types::{PartyId, Round};

/// Sort key of a deliverable item. Deliveries use the payload kind ordinal as
/// `class`; interface calls use `100 + call ordinal` and the target party as
/// `sender`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemKey {
    pub sender: PartyId,
    pub class: u32,
    pub seq: u64,
}

pub const CALL_CLASS_BASE: u32 = 100;

/// Sorts `items` by key, then applies `permutation` (indices into the sorted
/// list) if the adversary supplied one.
pub fn intra_round_order<T>(
    round: Round,
    mut items: Vec<(ItemKey, T)>,
    permutation: Option<&[usize]>,
) -> Result<Vec<(ItemKey, T)>, EngineError> {
    items.sort_by_key(|(k, _)| *k);
    let Some(perm) = permutation else {
        return Ok(items);
    };
    if !is_permutation(perm, items.len()) {
        return Err(EngineError::BadPermutation {
            round,
            len: items.len(),
        });
    }
    let mut slots: Vec<Option<(ItemKey, T)>> = items.into_iter().map(Some).collect();
    Ok(perm
        .iter()
        .map(|&i| slots[i].take().expect("permutation checked"))
        .collect())
}

pub fn is_permutation(perm: &[usize], len: usize) -> bool {
    if perm.len() != len {
        return false;
    }
    let mut seen = vec![false; len];
    perm.iter().all(|&i| i < len && !std::mem::replace(&mut seen[i], true))
}
