//! Per-round measurement of runs: corruption fractions, peer counts and
//! message counts, plus seed averaging and the simulation CSV.
//!
//! Two corruption models are provided. [`measure`] audits a log and uses the
//! windowed corruption sets of the auditor. [`measure_occupancy`] follows the
//! benchmark model, in which a column is corrupted for a party in row `r`
//! whenever cell `(r, c)` has no active party, and needs only the schedule and
//! the oracle.
//!
//! Peer counts likewise come in two flavours: `peers` is the simplified
//! same-row-or-column count, `map_peers` the subnet-map size the engine logs
//! when map sizes are enabled.

use std::collections::BTreeMap;
use std::io::Write;

use crate::audit::EventQuery;
use crate::engine::log::{Event, EventLog};
use crate::error::AuditError;
use crate::message::PayloadKind;
use crate::oracle::CellOracle;
use crate::schedule::Schedule;
use crate::types::{Params, Round};

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: Round,
    /// Honest active parties.
    pub active: usize,
    /// `max_p |C_p^τ| / m` over honest active parties.
    pub max_corruption_fraction: f64,
    pub mean_corruption_fraction: f64,
    /// Same-row-or-column honest active parties, excluding oneself.
    pub max_peers: usize,
    pub mean_peers: f64,
    /// Largest and mean subnet-map size, when the log records them.
    pub map_peers: Option<(usize, f64)>,
    pub envelopes_sent: BTreeMap<PayloadKind, usize>,
}

/// Running per-cell counts and the statistics derived from them.
struct Grid {
    k1: usize,
    k2: usize,
    cells: Vec<usize>,
}

impl Grid {
    fn new(params: &Params) -> Self {
        let (k1, k2) = (params.k1 as usize, params.k2 as usize);
        Grid {
            k1,
            k2,
            cells: vec![0; k1 * k2],
        }
    }

    fn slot(&self, cell: crate::types::Cell) -> usize {
        (cell.row as usize - 1) * self.k2 + cell.col as usize - 1
    }

    fn metrics(&self, round: Round) -> RoundMetrics {
        let (k1, k2) = (self.k1, self.k2);
        let row_n: Vec<usize> = (0..k1).map(|r| self.cells[r * k2..(r + 1) * k2].iter().sum()).collect();
        let col_n: Vec<usize> = (0..k2).map(|c| (0..k1).map(|r| self.cells[r * k2 + c]).sum()).collect();
        let n: usize = row_n.iter().sum();
        let mut m = RoundMetrics {
            round,
            active: n,
            max_corruption_fraction: 0.0,
            mean_corruption_fraction: 0.0,
            max_peers: 0,
            mean_peers: 0.0,
            map_peers: None,
            envelopes_sent: BTreeMap::new(),
        };
        if n == 0 {
            return m;
        }
        let (mut corr_sum, mut peer_sum) = (0.0, 0.0);
        for r in 0..k1 {
            if row_n[r] == 0 {
                continue;
            }
            let row = &self.cells[r * k2..(r + 1) * k2];
            let frac = row.iter().filter(|c| **c == 0).count() as f64 / k2 as f64;
            m.max_corruption_fraction = m.max_corruption_fraction.max(frac);
            corr_sum += frac * row_n[r] as f64;
            for (c, &cnt) in row.iter().enumerate() {
                if cnt > 0 {
                    let peers = row_n[r] + col_n[c] - cnt - 1;
                    m.max_peers = m.max_peers.max(peers);
                    peer_sum += (peers * cnt) as f64;
                }
            }
        }
        m.mean_corruption_fraction = corr_sum / n as f64;
        m.mean_peers = peer_sum / n as f64;
        m
    }
}

/// Benchmark-model metrics for rounds `0..=rounds` of a schedule. A party
/// counts in every round of its activity interval.
pub fn measure_occupancy(params: &Params, schedule: &Schedule, oracle: &CellOracle, rounds: Round) -> Vec<RoundMetrics> {
    let mut grid = Grid::new(params);
    let mut joins: BTreeMap<Round, Vec<usize>> = BTreeMap::new();
    let mut leaves: BTreeMap<Round, Vec<usize>> = BTreeMap::new();
    for (p, iv) in schedule.parties() {
        let slot = grid.slot(oracle.cell(p));
        joins.entry(iv.join).or_default().push(slot);
        if let Some(l) = iv.leave {
            leaves.entry(l + 1).or_default().push(slot);
        }
    }
    (0..=rounds)
        .map(|t| {
            for s in joins.get(&t).into_iter().flatten() {
                grid.cells[*s] += 1;
            }
            for s in leaves.get(&t).into_iter().flatten() {
                grid.cells[*s] -= 1;
            }
            grid.metrics(t)
        })
        .collect()
}

/// Metrics of every logged round, with corruption from the audited
/// corruption sets.
pub fn measure(log: &EventLog) -> Result<Vec<RoundMetrics>, AuditError> {
    let q = EventQuery::new(log)?;
    let params = *q.params();
    let end = q.last_round();
    let mut sent: BTreeMap<Round, BTreeMap<PayloadKind, usize>> = BTreeMap::new();
    let mut maps: BTreeMap<Round, (usize, f64)> = BTreeMap::new();
    for r in log.records() {
        match &r.event {
            Event::Send(e) => *sent.entry(r.round).or_default().entry(e.payload.kind()).or_default() += 1,
            Event::MapSizes { max, mean } => {
                maps.insert(r.round, (*max, *mean));
            }
            _ => {}
        }
    }
    let sched_like: Vec<_> = q.parties().values().map(|i| (i.cell, i.interval)).collect();
    let mut grid = Grid::new(&params);
    Ok((0..=end)
        .map(|t| {
            grid.cells.iter_mut().for_each(|c| *c = 0);
            let mut rows: BTreeMap<u32, usize> = BTreeMap::new();
            for (cell, iv) in &sched_like {
                if iv.contains(t) {
                    let s = grid.slot(*cell);
                    grid.cells[s] += 1;
                    *rows.entry(cell.row).or_default() += 1;
                }
            }
            let mut m = grid.metrics(t);
            let (mut max, mut sum) = (0.0f64, 0.0);
            for (&r, &n) in &rows {
                let f = q.occupancy().corruption_fraction(r, t);
                max = max.max(f);
                sum += f * n as f64;
            }
            m.max_corruption_fraction = max;
            m.mean_corruption_fraction = if m.active == 0 { 0.0 } else { sum / m.active as f64 };
            m.map_peers = maps.get(&t).copied();
            m.envelopes_sent = sent.remove(&t).unwrap_or_default();
            m
        })
        .collect())
}

/// Seed-averaged statistics of one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanRound {
    pub round: Round,
    pub max_corruption_fraction: f64,
    pub mean_corruption_fraction: f64,
    pub max_peers: f64,
    pub mean_peers: f64,
    /// Largest subnet map, when every run logged map sizes.
    pub max_map_peers: Option<f64>,
}

/// Averages equally long per-seed series round by round.
pub fn average(runs: &[Vec<RoundMetrics>]) -> Vec<MeanRound> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len() as f64;
    (0..first.len())
        .map(|k| {
            let mut a = MeanRound {
                round: first[k].round,
                max_corruption_fraction: 0.0,
                mean_corruption_fraction: 0.0,
                max_peers: 0.0,
                mean_peers: 0.0,
                max_map_peers: Some(0.0),
            };
            for run in runs {
                let m = &run[k];
                a.max_corruption_fraction += m.max_corruption_fraction / n;
                a.mean_corruption_fraction += m.mean_corruption_fraction / n;
                a.max_peers += m.max_peers as f64 / n;
                a.mean_peers += m.mean_peers / n;
                a.max_map_peers = a.max_map_peers.zip(m.map_peers).map(|(acc, (max, _))| acc + max as f64 / n);
            }
            a
        })
        .collect()
}

/// Writes `Time_Step,Corruption_Rows_<k1>,...,Connections_Rows_<k1>,...` with
/// the seed-averaged maxima of each series. Series must share their rounds.
pub fn write_simulation_csv<W: Write>(w: W, series: &[(u32, Vec<MeanRound>)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["Time_Step".to_string()];
    header.extend(series.iter().map(|(k1, _)| format!("Corruption_Rows_{k1}")));
    header.extend(series.iter().map(|(k1, _)| format!("Connections_Rows_{k1}")));
    out.write_record(&header)?;
    let len = series.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    for k in 0..len {
        let mut row = vec![series[0].1[k].round.to_string()];
        row.extend(series.iter().map(|(_, s)| s[k].max_corruption_fraction.to_string()));
        row.extend(series.iter().map(|(_, s)| s[k].max_peers.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `Time_Step,Map_Connections_Rows_<k1>,...` with the seed-averaged
/// largest subnet map; rounds without map sizes are left empty.
pub fn write_map_peers_csv<W: Write>(w: W, series: &[(u32, Vec<MeanRound>)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["Time_Step".to_string()];
    header.extend(series.iter().map(|(k1, _)| format!("Map_Connections_Rows_{k1}")));
    out.write_record(&header)?;
    let len = series.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    for k in 0..len {
        let mut row = vec![series[0].1[k].round.to_string()];
        row.extend(
            series
                .iter()
                .map(|(_, s)| s[k].max_map_peers.map_or(String::new(), |v| v.to_string())),
        );
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Least-squares trend of the last `window` points of a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stationarity {
    pub slope: f64,
    /// `slope * window`: the fitted change across the window.
    pub drift: f64,
    /// Standard deviation of the residuals around the fit.
    pub noise: f64,
}

impl Stationarity {
    /// The fitted drift stays within three residual standard deviations.
    pub fn passed(&self) -> bool {
        self.drift.abs() <= 3.0 * self.noise + 1e-12
    }
}

pub fn stationarity(series: &[f64], window: usize) -> Stationarity {
    let ys = &series[series.len().saturating_sub(window)..];
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return Stationarity {
            slope: 0.0,
            drift: 0.0,
            noise: 0.0,
        };
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in ys.iter().enumerate() {
        let dx = x as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let ss: f64 = ys
        .iter()
        .enumerate()
        .map(|(x, y)| {
            let e = y - (my + slope * (x as f64 - mx));
            e * e
        })
        .sum();
    Stationarity {
        slope,
        drift: slope * n,
        noise: (ss / (n - 2.0).max(1.0)).sqrt(),
    }
}
