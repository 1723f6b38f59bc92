//! The k1/k2 trade-off: for each column count, the most rows the error bound
//! allows, with the resulting message complexities.

use std::io::Write;

use crate::bounds::{robustness_error_bound, BoundInputs};
use crate::efficiency::{comm_complexity, Complexity, EfficiencyInputs, Operation};
use crate::error::AnalysisError;

/// Deployment assumptions behind an estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assumptions {
    pub round_seconds: f64,
    pub lifetime_years: f64,
    pub days_per_year: f64,
    pub overlap_min: u64,
    /// Average honest stay, which sets the overlap.
    pub stay_hours: f64,
    pub eps_sn: f64,
    pub t: f64,
    pub bootstrap_nodes: f64,
    /// `n_hon = n_hon_factor * N`.
    pub n_hon_factor: f64,
    /// `n_max = n_max_factor * N`.
    pub n_max_factor: f64,
    pub message_size: f64,
    /// Largest `k1` considered.
    pub k1_max: u32,
}

impl Assumptions {
    /// Four-second rounds, ten years, `Δ_min = 450`, six-hour stays, a perfect
    /// subnet protocol, 50 of 100 bootstrap nodes, `n_hon = 2N`, `n_max = 5N`.
    pub fn benchmark() -> Self {
        Assumptions {
            round_seconds: 4.0,
            lifetime_years: 10.0,
            days_per_year: 365.0,
            overlap_min: 450,
            stay_hours: 6.0,
            eps_sn: 0.0,
            t: 50.0,
            bootstrap_nodes: 100.0,
            n_hon_factor: 2.0,
            n_max_factor: 5.0,
            message_size: 1.0,
            k1_max: 100_000,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        (name == "paper").then(Self::benchmark)
    }

    pub fn lifetime_rounds(&self) -> u64 {
        (self.lifetime_years * self.days_per_year * 86_400.0 / self.round_seconds).round() as u64
    }

    pub fn overlap_rounds(&self) -> u64 {
        (self.stay_hours * 3600.0 / self.round_seconds).round() as u64
    }

    pub fn bound_inputs(&self, n: f64, beta: f64, k1: u32, k2: u32) -> BoundInputs {
        BoundInputs {
            n,
            overlap: self.overlap_rounds(),
            k1,
            k2,
            m: k2,
            subnet_delay: 7,
            sync_delay: 2,
            lifetime: self.lifetime_rounds(),
            eps_sn: self.eps_sn,
            beta,
            overlap_min_override: Some(self.overlap_min),
        }
    }

    pub fn efficiency_inputs(&self, n: f64) -> EfficiencyInputs {
        EfficiencyInputs {
            n_max: self.n_max_factor * n,
            n_hon: self.n_hon_factor * n,
            t: self.t,
            b: self.bootstrap_nodes,
            l: self.message_size,
            k: 1,
        }
    }
}

/// Largest `k1 <= k1_max` whose bound meets `target`, using that the bound
/// grows with `k1`. `None` if even `k1 = 1` misses.
pub fn max_k1(n: f64, beta: f64, target: f64, k2: u32, a: &Assumptions) -> Result<Option<u32>, AnalysisError> {
    let ok = |k1: u32| -> Result<bool, AnalysisError> {
        Ok(robustness_error_bound(&a.bound_inputs(n, beta, k1, k2))?.ln() <= target.ln())
    };
    if !ok(1)? {
        return Ok(None);
    }
    let mut lo = 1u32;
    let mut hi = 2u32;
    while hi <= a.k1_max && ok(hi)? {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    let mut hi = hi.min(a.k1_max.saturating_add(1));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffRow {
    pub k2: u32,
    pub k1: u32,
    pub join: f64,
    pub get: f64,
    pub store: Complexity,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TradeoffCurve {
    pub rows: Vec<TradeoffRow>,
    /// Omitted and capped columns counts, in human-readable form.
    pub notes: Vec<String>,
}

pub fn tradeoff_curve(
    n: f64,
    beta: f64,
    target: f64,
    k2s: impl IntoIterator<Item = u32>,
    a: &Assumptions,
) -> Result<TradeoffCurve, AnalysisError> {
    let mut curve = TradeoffCurve::default();
    let eff = a.efficiency_inputs(n);
    for k2 in k2s {
        let Some(k1) = max_k1(n, beta, target, k2, a)? else {
            curve.notes.push(format!("k2={k2}: no feasible k1"));
            continue;
        };
        if k1 == a.k1_max {
            curve.notes.push(format!("k2={k2}: k1 capped at {}", a.k1_max));
        }
        curve.rows.push(TradeoffRow {
            k2,
            k1,
            join: comm_complexity(Operation::Join, &eff, k1, k2)?.messages,
            get: comm_complexity(Operation::Get, &eff, k1, k2)?.messages,
            store: comm_complexity(Operation::Store, &eff, k1, k2)?,
        });
    }
    Ok(curve)
}

/// Writes `k2,k1,join_complexity,get_complexity,store_complexity`. A store
/// estimate whose precondition fails is left empty.
pub fn write_estimates_csv<W: Write>(w: W, rows: &[TradeoffRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k2", "k1", "join_complexity", "get_complexity", "store_complexity"])?;
    for r in rows {
        let store = if r.store.applicable {
            r.store.messages.to_string()
        } else {
            String::new()
        };
        out.write_record([r.k2.to_string(), r.k1.to_string(), r.join.to_string(), r.get.to_string(), store])?;
    }
    out.flush()?;
    Ok(())
}
