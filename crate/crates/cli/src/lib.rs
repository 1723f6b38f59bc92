//! Library side of the `rda-lab` binary: the `simulate`, `estimate` and
//! `verify` commands as functions returning what they would print.

pub mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use rda_analysis::{tradeoff_curve, write_estimates_csv, Assumptions, TradeoffCurve};
use rda_core::adversary::{make_strategy, malicious_pool};
use rda_core::metrics::{average, measure, measure_occupancy, write_map_peers_csv, write_simulation_csv, MeanRound, RoundMetrics};
use rda_core::schedule::check_admissible;
use rda_core::workload::{NoWorkload, RandomWorkload, Workload};
use rda_core::{run, CellOracle, EventLog, EventQuery, ExperimentConfig, LogOptions, ProtocolSpec, Schedule};

use config::{Mode, RunConfig};

/// Worker-count cap for seed sweeps.
pub const THREADS_VAR: &str = "RDA_LAB_THREADS";

/// Runs `f` on a pool sized by `RDA_LAB_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_VAR}={v:?} is not a count"))?;
        ensure!(n >= 1, "{THREADS_VAR} must be at least 1");
        b = b.num_threads(n);
    }
    Ok(b.build()?.install(f))
}

#[derive(Clone, Debug, Default)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SimulateReport {
    pub warnings: Vec<String>,
    /// Seed-averaged series per `k1`, in config order.
    pub series: Vec<(u32, Vec<MeanRound>)>,
    pub csv: Option<PathBuf>,
}

fn one_run(cfg: &RunConfig, schedule: &Schedule, k1: u32, seed: u64) -> Result<(Vec<RoundMetrics>, Option<EventLog>)> {
    let params = cfg.params(k1, schedule)?;
    match cfg.run.mode {
        Mode::Occupancy => {
            let oracle = CellOracle::new(params, seed);
            Ok((measure_occupancy(&params, schedule, &oracle, params.lifetime), None))
        }
        Mode::Engine => {
            let mut e = ExperimentConfig::new(params, schedule.clone());
            e.oracle_seed = seed;
            e.predicate_seed = cfg.run.seed;
            e.malicious = malicious_pool(cfg.run.malicious);
            e.protocol = ProtocolSpec {
                sync_policy: cfg.run.sync_policy,
                ..ProtocolSpec::default()
            };
            e.log = LogOptions {
                map_sizes: true,
                ..LogOptions::default()
            };
            let mut adv = make_strategy(&cfg.run.adversary, seed).expect("validated");
            let mut w: Box<dyn Workload> = match cfg.run.workload {
                None => Box::new(NoWorkload),
                Some(w) => Box::new(RandomWorkload::new(seed, w.store_rate, w.get_rate, w.handles)),
            };
            let log = run(&e, adv.as_mut(), w.as_mut())?;
            Ok((measure(&log)?, Some(log)))
        }
    }
}

/// Runs every `(k1, seed)` of the config and writes the metrics CSV, the
/// map-size CSV in engine mode, and the log when exactly one run was made.
/// Nothing is written unless every run succeeds.
pub fn simulate(args: &SimulateArgs) -> Result<SimulateReport> {
    let (mut cfg, schedule) = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    let csv = args.out.clone().or_else(|| cfg.output.csv.clone());
    let log_path = args.log.clone().or_else(|| cfg.output.log.clone());
    let runs = cfg.params.k1.len() as u64 * cfg.run.seeds;
    if log_path.is_some() {
        ensure!(cfg.run.mode == Mode::Engine, "an event log needs engine mode");
        ensure!(runs == 1, "an event log needs a single k1 and a single seed, not {runs} runs");
    }
    let mut report = SimulateReport::default();
    if let Some(a) = cfg.admissibility() {
        for k1 in &cfg.params.k1 {
            let r = check_admissible(&schedule, a.n, a.overlap, &cfg.params(*k1, &schedule)?);
            if !r.is_admissible() {
                let why = r.describe().join("; ");
                if args.strict {
                    bail!("schedule is not admissible for k1={k1}: {why}");
                }
                report.warnings.push(format!("schedule is not admissible for k1={k1}: {why}"));
            }
        }
    }
    let jobs: Vec<(u32, u64)> = cfg
        .params
        .k1
        .iter()
        .flat_map(|k1| (0..cfg.run.seeds).map(move |j| (*k1, j)))
        .collect();
    let results = with_pool(|| {
        jobs.par_iter()
            .map(|(k1, j)| one_run(&cfg, &schedule, *k1, cfg.run.seed + j))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut log = None;
    let mut per_k1: Vec<(u32, Vec<Vec<RoundMetrics>>)> = Vec::new();
    for ((k1, _), (metrics, l)) in jobs.iter().zip(results) {
        match per_k1.last_mut() {
            Some((k, v)) if k == k1 => v.push(metrics),
            _ => per_k1.push((*k1, vec![metrics])),
        }
        log = log.or(l);
    }
    report.series = per_k1.iter().map(|(k1, runs)| (*k1, average(runs))).collect();
    if let Some(path) = &csv {
        write_simulation_csv(create(path)?, &report.series)?;
        if cfg.run.mode == Mode::Engine {
            write_map_peers_csv(create(&map_path(path))?, &report.series)?;
        }
    }
    if let (Some(path), Some(log)) = (&log_path, &log) {
        log.write_jsonl(create(path)?)?;
    }
    report.csv = csv;
    Ok(report)
}

/// `<stem>.map.csv` next to the metrics CSV.
pub fn map_path(csv: &Path) -> PathBuf {
    csv.with_extension("map.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

#[derive(Clone, Debug)]
pub struct EstimateArgs {
    pub n: f64,
    pub beta: f64,
    pub eps_target: f64,
    pub k2: RangeInclusive<u32>,
    pub assumptions: String,
    pub k1_max: Option<u32>,
    pub out: Option<PathBuf>,
}

/// `"a..=b"`, `"a..b"`, `"a:b"` (inclusive) or a single value.
pub fn parse_range(s: &str) -> Result<RangeInclusive<u32>> {
    let num = |x: &str| x.trim().parse::<u32>().with_context(|| format!("bad k2 bound {x:?}"));
    let r = if let Some((a, b)) = s.split_once("..=") {
        num(a)?..=num(b)?
    } else if let Some((a, b)) = s.split_once("..") {
        let b = num(b)?;
        ensure!(b >= 1, "empty k2 range {s:?}");
        num(a)?..=b - 1
    } else if let Some((a, b)) = s.split_once(':') {
        num(a)?..=num(b)?
    } else {
        let v = num(s)?;
        v..=v
    };
    ensure!(*r.start() >= 1 && r.start() <= r.end(), "empty or zero-based k2 range {s:?}");
    Ok(r)
}

pub fn estimate(args: &EstimateArgs) -> Result<(TradeoffCurve, Vec<String>)> {
    let Some(mut a) = Assumptions::preset(&args.assumptions) else {
        bail!("unknown assumptions preset {:?}; known: paper", args.assumptions);
    };
    if let Some(cap) = args.k1_max {
        ensure!(cap >= 1, "k1-max must be at least 1");
        a.k1_max = cap;
    }
    ensure!(args.n >= 0.0, "N must be non-negative");
    ensure!(args.eps_target > 0.0, "the error target must be positive");
    let curve = tradeoff_curve(args.n, args.beta, args.eps_target, args.k2.clone(), &a)?;
    let mut warnings = curve.notes.clone();
    if curve.rows.is_empty() {
        warnings.push("no feasible (k1, k2) in the range; the CSV has only a header".into());
    }
    if let Some(path) = &args.out {
        write_estimates_csv(create(path)?, &curve.rows)?;
    }
    Ok((curve, warnings))
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub beta: f64,
    pub rda: rda_core::Verdict,
    pub subnet: rda_core::Verdict,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rda.passed() && self.subnet.passed()
    }
}

/// Audits a logged run. Without `beta`, the largest audited corruption
/// fraction of the run is used.
pub fn verify(log: &Path, beta: Option<f64>) -> Result<VerifyReport> {
    let file = File::open(log).with_context(|| format!("opening log {}", log.display()))?;
    let log = EventLog::read_jsonl(BufReader::new(file)).context("parsing log")?;
    let beta = match beta {
        Some(b) => b,
        None => EventQuery::new(&log).map_or(0.0, |q| q.max_corruption_fraction()),
    };
    Ok(VerifyReport {
        beta,
        rda: rda_core::verify_rda_robustness(&log, beta),
        subnet: rda_core::verify_subnet_robustness(&log),
    })
}

/// Prints warnings to stderr.
pub fn warn(lines: &[String]) {
    let mut err = std::io::stderr().lock();
    for l in lines {
        let _ = writeln!(err, "warning: {l}");
    }
}
