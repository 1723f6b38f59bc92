//! The robustness error bound and the two occupancy lemmas.

use crate::error::AnalysisError;
use crate::logreal::LogReal;

/// `h(ε) = -ε log2 ε - (1-ε) log2 (1-ε)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(eps: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(AnalysisError::Domain(format!("entropy argument {eps} outside [0, 1]")));
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(eps) + term(1.0 - eps))
}

/// `Δ_min = max{2Δ_SN + 2, 2Δ_sync + Δ_SN + 2}`.
pub fn overlap_min(subnet_delay: u64, sync_delay: u64) -> u64 {
    (2 * subnet_delay + 2).max(2 * sync_delay + subnet_delay + 2)
}

/// Inputs of the main error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// Guaranteed honest parties.
    pub n: f64,
    /// Activity overlap `Δ_act` in rounds.
    pub overlap: u64,
    pub k1: u32,
    pub k2: u32,
    pub m: u32,
    pub subnet_delay: u64,
    pub sync_delay: u64,
    pub lifetime: u64,
    /// Error of the subnet protocol.
    pub eps_sn: f64,
    /// Corrupted-symbol fraction `β`.
    pub beta: f64,
    /// Replaces the delay-derived `Δ_min` when set.
    pub overlap_min_override: Option<u64>,
}

impl BoundInputs {
    pub fn overlap_min(&self) -> u64 {
        self.overlap_min_override
            .unwrap_or_else(|| overlap_min(self.subnet_delay, self.sync_delay))
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(AnalysisError::Domain(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.k1 == 0 || self.k2 == 0 || self.n < 0.0 || !(0.0..=1.0).contains(&self.eps_sn) {
            return Err(AnalysisError::Domain("dimensions, N and eps_sn must be non-negative".into()));
        }
        if self.overlap < self.overlap_min() {
            return Err(AnalysisError::OverlapTooSmall {
                overlap: self.overlap,
                min: self.overlap_min(),
            });
        }
        Ok(())
    }
}

fn ceil_div(a: u64, b: u64) -> f64 {
    a.div_ceil(b) as f64
}

/// `ε_SN + ⌈(T+2)/(Δ_act - Δ_min + 1)⌉ · (k1 2^{h(β)k2} e^{-βN/k1} + k2 e^{-N/k2})`.
pub fn robustness_error_bound(inp: &BoundInputs) -> Result<LogReal, AnalysisError> {
    inp.validate()?;
    let (k1, k2) = (inp.k1 as f64, inp.k2 as f64);
    let windows = ceil_div(inp.lifetime + 2, inp.overlap - inp.overlap_min() + 1);
    let cells = LogReal::new(k1) * LogReal::exp2(binary_entropy(inp.beta)? * k2) * LogReal::exp(-inp.beta * inp.n / k1);
    let columns = LogReal::new(k2) * LogReal::exp(-inp.n / k2);
    Ok(LogReal::new(inp.eps_sn) + LogReal::new(windows) * (cells + columns))
}

/// Failure bounds on `ColumnGood(c, T, Δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnBound {
    /// For one fixed column.
    pub per_column: LogReal,
    /// Union over all `k2` columns.
    pub all_columns: LogReal,
}

/// `⌈(T+1)/(Δ_act - Δ - 1)⌉ · e^{-N/k2}`, and `k2` times that.
pub fn prob_bad_columns(n: f64, overlap: u64, delta: u64, lifetime: u64, k2: u32) -> Result<ColumnBound, AnalysisError> {
    if delta + 2 > overlap {
        return Err(AnalysisError::Domain(format!(
            "delta {delta} leaves no window in overlap {overlap}"
        )));
    }
    if k2 == 0 || n < 0.0 {
        return Err(AnalysisError::Domain("k2 must be positive and N non-negative".into()));
    }
    let per_column = LogReal::new(ceil_div(lifetime + 1, overlap - delta - 1)) * LogReal::exp(-n / k2 as f64);
    Ok(ColumnBound {
        per_column,
        all_columns: LogReal::new(k2 as f64) * per_column,
    })
}

/// Failure bound on `SmallCorruption(ε, T, Δ)`:
/// `⌈(T+1)/(Δ_act - Δ - Δ_SN + 1)⌉ · 2^{h(ε)k2} · k1 · e^{-εN/k1}`.
#[allow(clippy::too_many_arguments)]
pub fn prob_bad_cells(
    n: f64,
    overlap: u64,
    delta: u64,
    subnet_delay: u64,
    lifetime: u64,
    k1: u32,
    k2: u32,
    eps: f64,
) -> Result<LogReal, AnalysisError> {
    if delta + subnet_delay > overlap {
        return Err(AnalysisError::Domain(format!(
            "delta {delta} plus subnet delay {subnet_delay} exceeds overlap {overlap}"
        )));
    }
    if k1 == 0 || k2 == 0 || n < 0.0 {
        return Err(AnalysisError::Domain("dimensions must be positive and N non-negative".into()));
    }
    let windows = ceil_div(lifetime + 1, overlap - delta - subnet_delay + 1);
    Ok(LogReal::new(windows)
        * LogReal::exp2(binary_entropy(eps)? * k2 as f64)
        * LogReal::new(k1 as f64)
        * LogReal::exp(-eps * n / k1 as f64))
}
