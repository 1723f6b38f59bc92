//! TOML run configuration for `simulate`.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rda_core::adversary::strategy_catalog;
use rda_core::rda::SyncDelayPolicy;
use rda_core::schedule::ChurnSpec;
use rda_core::{Params, Round, Schedule};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// One series per entry.
    pub k1: Vec<u32>,
    pub k2: u32,
    /// Defaults to `k2`.
    pub m: Option<u32>,
    #[serde(default = "default_subnet_delay")]
    pub subnet_delay: u64,
    #[serde(default = "default_sync_delay")]
    pub sync_delay: u64,
    /// Defaults to the schedule's last round.
    pub lifetime: Option<Round>,
}

fn default_subnet_delay() -> u64 {
    7
}

fn default_sync_delay() -> u64 {
    2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSection {
    Churn {
        initial: usize,
        warmup_target: usize,
        batch: usize,
        stay: usize,
        rounds: Round,
        #[serde(default = "default_anchors")]
        anchors: usize,
        admissibility: Option<Admissibility>,
    },
    /// Text schedule, relative to the config file.
    File {
        path: PathBuf,
        admissibility: Option<Admissibility>,
    },
}

fn default_anchors() -> usize {
    1
}

/// The `(N, Δ_act)` pair the schedule is checked against.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Admissibility {
    pub n: usize,
    pub overlap: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Cell occupancy from schedule and oracle only.
    #[default]
    Occupancy,
    /// The full message-level protocol.
    Engine,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_adversary")]
    pub adversary: String,
    #[serde(default)]
    pub malicious: usize,
    /// First seed; run `j` uses `seed + j`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub sync_policy: SyncDelayPolicy,
    pub workload: Option<WorkloadSection>,
}

fn default_adversary() -> String {
    "passive".into()
}

fn default_seeds() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: Mode::default(),
            adversary: default_adversary(),
            malicious: 0,
            seed: 0,
            seeds: default_seeds(),
            sync_policy: SyncDelayPolicy::default(),
            workload: None,
        }
    }
}

/// Poisson-rate random stores and gets, engine mode only.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub store_rate: f64,
    pub get_rate: f64,
    pub handles: u32,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Schedule)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let schedule = cfg.schedule(base)?;
        cfg.validate(&schedule)?;
        Ok((cfg, schedule))
    }

    fn schedule(&self, base: &Path) -> Result<Schedule> {
        Ok(match &self.schedule {
            ScheduleSection::Churn {
                initial,
                warmup_target,
                batch,
                stay,
                rounds,
                anchors,
                ..
            } => ChurnSpec {
                initial: *initial,
                warmup_target: *warmup_target,
                batch: *batch,
                stay: *stay,
                rounds: *rounds,
                anchors: *anchors,
            }
            .build()?,
            ScheduleSection::File { path, .. } => {
                let p = base.join(path);
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading schedule {}", p.display()))?;
                Schedule::from_text(&text)?
            }
        })
    }

    pub fn admissibility(&self) -> Option<Admissibility> {
        match &self.schedule {
            ScheduleSection::Churn { admissibility, .. } | ScheduleSection::File { admissibility, .. } => *admissibility,
        }
    }

    /// Parameters of the series with `k1` rows.
    pub fn params(&self, k1: u32, schedule: &Schedule) -> Result<Params> {
        let p = &self.params;
        let lifetime = p.lifetime.unwrap_or_else(|| schedule.last_event_round());
        Ok(Params::new(k1, p.k2, p.m.unwrap_or(p.k2), p.subnet_delay, p.sync_delay, lifetime)?)
    }

    fn validate(&self, schedule: &Schedule) -> Result<()> {
        ensure!(!self.params.k1.is_empty(), "params.k1 lists no row counts");
        for k1 in &self.params.k1 {
            self.params(*k1, schedule)?;
        }
        let run = &self.run;
        ensure!(run.seeds >= 1, "run.seeds must be at least 1");
        if !strategy_catalog().contains(&run.adversary.as_str()) {
            bail!("unknown adversary {:?}; known: {}", run.adversary, strategy_catalog().join(", "));
        }
        if run.mode == Mode::Occupancy {
            ensure!(
                run.workload.is_none() && run.adversary == "passive" && run.malicious == 0,
                "occupancy mode takes no workload, adversary or malicious parties"
            );
        }
        if let Some(w) = run.workload {
            ensure!(
                w.store_rate >= 0.0 && w.get_rate >= 0.0 && w.handles >= 1,
                "workload rates must be non-negative and handles positive"
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[params]\nk1 = [1]\nk2 = 2\nbogus = 1\n[schedule]\ngenerator = \"file\"\npath = \"s.txt\"\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let text = "[params]\nk1 = [1, 5]\nk2 = 100\n[schedule]\ngenerator = \"churn\"\ninitial = 20\nwarmup_target = 2500\nbatch = 50\nstay = 50\nrounds = 3000\n";
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.run.mode, Mode::Occupancy);
        assert_eq!((c.params.subnet_delay, c.params.sync_delay), (7, 2));
        assert!(matches!(c.schedule, ScheduleSection::Churn { anchors: 1, .. }));
    }
}
