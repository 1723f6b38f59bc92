//! Expected connections, storage and message complexity per interface call.

use crate::error::AnalysisError;

/// Population and message-size assumptions of the efficiency estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyInputs {
    /// Simultaneously active parties, malicious ones included.
    pub n_max: f64,
    /// Simultaneously active honest parties.
    pub n_hon: f64,
    /// Bootstrap nodes per join.
    pub t: f64,
    /// Active bootstrap nodes.
    pub b: f64,
    /// Maximum message size.
    pub l: f64,
    /// Virtual nodes per party.
    pub k: u32,
}

impl EfficiencyInputs {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_hon > self.n_max || self.n_hon < 0.0 || self.k == 0 {
            return Err(AnalysisError::Domain("need 0 <= n_hon <= n_max and K >= 1".into()));
        }
        Ok(())
    }
}

/// Expected peers of a non-bootstrap party.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeerEstimate {
    /// `(n-1)(k1+k2-1)/(k1 k2)`.
    pub exact: f64,
    /// `(n-1)/k1 + (n-1)/k2`.
    pub loose: f64,
}

pub fn expected_peers(n_max: f64, k1: u32, k2: u32) -> PeerEstimate {
    let (a, b) = (k1 as f64, k2 as f64);
    let n = n_max - 1.0;
    PeerEstimate {
        exact: n * (a + b - 1.0) / (a * b),
        loose: n / a + n / b,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operation {
    Get,
    Store,
    Join,
}

/// An expected message count. `applicable` is false when the estimate's
/// precondition fails; the value is then the formula evaluated anyway and is
/// not a bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complexity {
    pub messages: f64,
    pub applicable: bool,
}

/// Smallest `n_max` for which the store estimate holds: `3 k2 ln k2`.
pub fn store_threshold(k2: u32) -> f64 {
    3.0 * k2 as f64 * (k2 as f64).ln()
}

/// Expected total outgoing honest communication of one call.
pub fn comm_complexity(op: Operation, inp: &EfficiencyInputs, k1: u32, k2: u32) -> Result<Complexity, AnalysisError> {
    inp.validate()?;
    if k1 == 0 || k2 == 0 {
        return Err(AnalysisError::Domain("grid dimensions must be positive".into()));
    }
    let (a, b) = (k1 as f64, k2 as f64);
    let (n, h, t) = (inp.n_max, inp.n_hon, inp.t);
    let (messages, applicable) = match op {
        Operation::Get => ((n / (a * b) + h / (a * b)) * inp.l, true),
        Operation::Store => (
            (n / (a * b) + 3.0 * h * n / (a * b * b)) * inp.l,
            n >= store_threshold(k2),
        ),
        Operation::Join => (
            (3.0 * t + t * inp.b + t * n / a + ((t + 4.0) * n * b - 2.0 * n + n * n) / (b * b)) * inp.l,
            true,
        ),
    };
    Ok(Complexity { messages, applicable })
}

/// Expected symbols stored by a party running `K` virtual nodes:
/// `m (1 - (1 - 1/k2)^K)`.
pub fn virtual_node_storage(m: f64, k2: u32, k: u32) -> Result<f64, AnalysisError> {
    if k == 0 || k2 == 0 {
        return Err(AnalysisError::Domain("K and k2 must be positive".into()));
    }
    Ok(m * (1.0 - (1.0 - 1.0 / k2 as f64).powi(k as i32)))
}
