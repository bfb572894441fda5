use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BlocklengthSpec, MobilitySpec, PowerSpec, SimConfig};
use super::trial::{Experiment, TrialResult};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "mu_tot,Mr,Ka,Pt_dBm,delta,trials,pe_mean,pe_stderr,runtime_s";

/// A base configuration and the axes to sweep. Empty axes keep the base
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: SimConfig,
    #[serde(default)]
    pub mu_tot: Vec<f64>,
    #[serde(default)]
    pub antennas: Vec<usize>,
    #[serde(default)]
    pub active_users: Vec<usize>,
    #[serde(default)]
    pub pt_dbm: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("bad grid: {e}")))
    }

    /// Cartesian product of the axes, `mu_tot` varying slowest.
    pub fn points(&self) -> Vec<SimConfig> {
        fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
            if values.is_empty() {
                vec![None]
            } else {
                values.iter().map(|&v| Some(v)).collect()
            }
        }
        let mut out = Vec::new();
        for mu in axis(&self.mu_tot) {
            for mr in axis(&self.antennas) {
                for ka in axis(&self.active_users) {
                    for pt in axis(&self.pt_dbm) {
                        for delta in axis(&self.delta) {
                            let mut c = self.base.clone();
                            if let Some(mu) = mu {
                                c.blocklength = BlocklengthSpec::MuTot(mu);
                            }
                            if let Some(mr) = mr {
                                c.antennas = mr;
                            }
                            if let Some(ka) = ka {
                                c.active_users = ka;
                            }
                            if let Some(pt) = pt {
                                c.power = PowerSpec::PtDbm(pt);
                            }
                            if let Some(delta) = delta {
                                c.mobility = MobilitySpec::Delta { delta };
                            }
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Aggregate of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu_tot: f64,
    pub antennas: usize,
    pub active_users: usize,
    pub pt_dbm: f64,
    pub delta: f64,
    pub trials: usize,
    pub pe_mean: f64,
    /// Binomial standard error over the `trials * Ka` user decisions.
    pub pe_stderr: f64,
    pub runtime_s: f64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.mu_tot,
            self.antennas,
            self.active_users,
            self.pt_dbm,
            self.delta,
            self.trials,
            self.pe_mean,
            self.pe_stderr,
            self.runtime_s
        )
    }
}

/// One line of the per-trial NDJSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub mu_tot: f64,
    pub antennas: usize,
    pub active_users: usize,
    pub pt_dbm: f64,
    pub delta: f64,
    #[serde(flatten)]
    pub result: TrialResult,
}

/// Mean error rate and its binomial standard error.
pub fn aggregate(results: &[TrialResult], active_users: usize) -> (f64, f64) {
    let errors: usize = results.iter().map(|r| r.errors).sum();
    let decisions = (results.len() * active_users) as f64;
    let p = errors as f64 / decisions;
    (p, (p * (1.0 - p) / decisions).sqrt())
}

/// Runs all trials of `experiment`; results are ordered by trial id and do
/// not depend on the number of worker threads.
pub fn run_trials(experiment: &Experiment, trials: usize) -> Result<Vec<TrialResult>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|id| experiment.run_trial(id))
        .collect()
}

/// Runs a set of configurations, one codebook per configuration. `on_trial`
/// sees every trial record in grid and trial order.
pub fn sweep_configs(
    configs: &[SimConfig],
    mut on_trial: impl FnMut(&TrialRecord) -> Result<()>,
) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(Error::config("empty sweep grid"));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for (point, cfg) in configs.iter().enumerate() {
        let start = Instant::now();
        let exp = Experiment::new(cfg.clone())?;
        let results = run_trials(&exp, cfg.trials)?;
        let runtime_s = start.elapsed().as_secs_f64();
        let (pe_mean, pe_stderr) = aggregate(&results, cfg.active_users);
        let sc = exp.scenario;
        for r in results {
            on_trial(&TrialRecord {
                point,
                mu_tot: sc.mu_tot,
                antennas: cfg.antennas,
                active_users: cfg.active_users,
                pt_dbm: sc.pt_dbm,
                delta: sc.delta,
                result: r,
            })?;
        }
        log::info!(
            "point {point}: mu_tot {:.3} Mr {} Ka {} pe {pe_mean:.4} ({runtime_s:.1} s)",
            sc.mu_tot,
            cfg.antennas,
            cfg.active_users
        );
        rows.push(SweepRow {
            mu_tot: sc.mu_tot,
            antennas: cfg.antennas,
            active_users: cfg.active_users,
            pt_dbm: sc.pt_dbm,
            delta: sc.delta,
            trials: cfg.trials,
            pe_mean,
            pe_stderr,
            runtime_s,
        });
    }
    Ok(rows)
}

pub fn sweep(grid: &SweepGrid, on_trial: impl FnMut(&TrialRecord) -> Result<()>) -> Result<Vec<SweepRow>> {
    sweep_configs(&grid.points(), on_trial)
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn write_ndjson_line<W: Write, T: Serialize>(out: &mut W, record: &T) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}
