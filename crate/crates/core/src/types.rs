//! Shared domain types: protocol parameters, identities, grid cells and the
//! position-binding predicate.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ParamsError;

/// A time slot of the round-synchronous experiment.
pub type Round = u64;

/// Index of a symbol in the file, in `1..=m`.
pub type SymbolIndex = u32;

/// Grid geometry, file length, delays and experiment lifetime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Params {
    /// Number of rows.
    pub k1: u32,
    /// Number of columns.
    pub k2: u32,
    /// File length in symbols. Must be a multiple of `k2`.
    pub m: u32,
    /// Subnet delay in rounds.
    pub subnet_delay: u64,
    /// Synchronization delay in rounds.
    pub sync_delay: u64,
    /// Protocol lifetime in rounds.
    pub lifetime: u64,
}

impl Params {
    /// Validates the invariants and returns the parameters unchanged.
    pub fn new(
        k1: u32,
        k2: u32,
        m: u32,
        subnet_delay: u64,
        sync_delay: u64,
        lifetime: u64,
    ) -> Result<Self, ParamsError> {
        let p = Params {
            k1,
            k2,
            m,
            subnet_delay,
            sync_delay,
            lifetime,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.k1 == 0 || self.k2 == 0 || self.m == 0 {
            return Err(ParamsError::ZeroDimension);
        }
        if !self.m.is_multiple_of(self.k2) {
            return Err(ParamsError::ColumnsDoNotDivide {
                m: self.m,
                k2: self.k2,
            });
        }
        if self.subnet_delay < 2 {
            return Err(ParamsError::DelayTooSmall {
                name: "subnet_delay",
                value: self.subnet_delay,
            });
        }
        if self.sync_delay < 2 {
            return Err(ParamsError::DelayTooSmall {
                name: "sync_delay",
                value: self.sync_delay,
            });
        }
        Ok(())
    }

    /// Total number of subnets (one per row and one per column).
    pub fn num_subnets(&self) -> u32 {
        self.k1 + self.k2
    }

    /// Number of symbols stored by each column.
    pub fn symbols_per_column(&self) -> u32 {
        self.m / self.k2
    }
}

/// Opaque party identifier. Honesty is known to the experiment only.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PartyId(pub u64);

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Position of a party in the `k1 x k2` grid, both coordinates 1-based.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub fn new(row: u32, col: u32, params: &Params) -> Result<Self, ParamsError> {
        if row == 0 || row > params.k1 || col == 0 || col > params.k2 {
            return Err(ParamsError::CellOutOfRange { row, col });
        }
        Ok(Cell { row, col })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Subnet identifier: rows are `1..=k1`, columns `k1+1..=k1+k2`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SubnetId(pub u32);

impl fmt::Display for SubnetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sid{}", self.0)
    }
}

macro_rules! byte_string {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub Vec<u8>);

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(&self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(&self.0))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(&self.0))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                hex::decode(&s).map($name).map_err(serde::de::Error::custom)
            }
        }

        impl From<&[u8]> for $name {
            fn from(b: &[u8]) -> Self {
                $name(b.to_vec())
            }
        }
    };
}

byte_string!(
    /// Handle of a stored file.
    Handle
);
byte_string!(
    /// A symbol value.
    Symbol
);

/// A stored triple `(h, i, x)`.
pub type Triple = (Handle, SymbolIndex, Symbol);

/// Length of the symbols produced by the reference predicate.
pub const SYMBOL_LEN: usize = 8;

/// The keyed position-binding predicate `Q(h, i, x) = [x == F(seed, h, i)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    seed: u64,
}

impl Predicate {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The unique symbol accepted at `(h, i)`.
    pub fn expected(&self, h: &Handle, i: SymbolIndex) -> Symbol {
        let mut hasher = Sha256::new();
        hasher.update(b"rda-predicate");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(i.to_le_bytes());
        hasher.update((h.0.len() as u64).to_le_bytes());
        hasher.update(&h.0);
        let digest = hasher.finalize();
        Symbol(digest[..SYMBOL_LEN].to_vec())
    }

    pub fn eval(&self, h: &Handle, i: SymbolIndex, x: &Symbol) -> bool {
        *x == self.expected(h, i)
    }
}

/// Builds the reference test predicate for `seed`.
pub fn make_test_predicate(seed: u64) -> Predicate {
    Predicate { seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn params_reject_bad_geometry() {
        assert!(Params::new(2, 5, 10, 7, 2, 10).is_ok());
        assert!(matches!(
            Params::new(2, 3, 10, 7, 2, 10),
            Err(ParamsError::ColumnsDoNotDivide { .. })
        ));
        assert!(Params::new(2, 5, 10, 1, 2, 10).is_err());
        assert!(Params::new(2, 5, 10, 7, 1, 10).is_err());
        assert!(Params::new(0, 5, 10, 7, 2, 10).is_err());
    }

    #[test]
    fn predicate_accepts_exactly_f() {
        let q = make_test_predicate(7);
        let h = Handle(b"blob".to_vec());
        let x = q.expected(&h, 3);
        assert!(q.eval(&h, 3, &x));
        let mut y = x.clone();
        y.0[0] ^= 1;
        assert!(!q.eval(&h, 3, &y));
        assert!(!q.eval(&h, 4, &x));
    }

    #[test]
    fn byte_strings_round_trip_through_json() {
        let h = Handle(vec![0, 1, 0xab]);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, "\"0001ab\"");
        assert_eq!(serde_json::from_str::<Handle>(&s).unwrap(), h);
    }

    proptest! {
        // At most one accepted symbol per position, whatever the candidates.
        #[test]
        fn position_binding(seed: u64, h in proptest::collection::vec(any::<u8>(), 0..6),
                            i in 1u32..1000, xs in proptest::collection::vec(
                                proptest::collection::vec(any::<u8>(), SYMBOL_LEN), 0..8)) {
            let q = make_test_predicate(seed);
            let h = Handle(h);
            let mut cands: Vec<Symbol> = xs.into_iter().map(Symbol).collect();
            cands.push(q.expected(&h, i));
            cands.sort();
            cands.dedup();
            let accepted = cands.iter().filter(|x| q.eval(&h, i, x)).count();
            prop_assert_eq!(accepted, 1);
        }
    }
}
