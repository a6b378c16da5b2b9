//! Lifetime milestones, per-round curves and cross-seed aggregation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::PolicyKind;
use crate::engine::RunTrace;
use crate::error::{Error, Result};

/// Round at which a death milestone was reached, or the round budget it
/// outlived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "round", rename_all = "snake_case")]
pub enum Milestone {
    Reached(u64),
    Censored(u64),
}

impl Milestone {
    pub fn reached(&self) -> Option<u64> {
        match *self {
            Milestone::Reached(r) => Some(r),
            Milestone::Censored(_) => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Milestone::Censored(_))
    }

    fn csv_value(&self) -> String {
        match self {
            Milestone::Reached(r) => r.to_string(),
            Milestone::Censored(r) => format!(">{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub n_nodes: usize,
    pub fnd: Milestone,
    pub p10: Milestone,
    pub p50: Milestone,
    pub lnd: Milestone,
    pub rounds: u64,
    pub bs_messages: u64,
    /// Alive nodes after each round.
    pub alive: Vec<usize>,
    /// Cumulative BS messages after each round.
    pub bs_cumulative: Vec<u64>,
}

/// Round index in which the `k`-th death happened (1-based `k`).
fn kth_death(trace: &RunTrace, k: usize) -> Milestone {
    let mut dead = trace.n_nodes - initially_alive(trace);
    if k <= dead {
        return Milestone::Reached(0);
    }
    for r in &trace.rounds {
        dead += r.deaths.len();
        if dead >= k {
            return Milestone::Reached(r.round);
        }
    }
    Milestone::Censored(trace.rounds.len() as u64)
}

fn initially_alive(trace: &RunTrace) -> usize {
    trace.e_init.iter().filter(|&&e| e > 0.0).count()
}

pub fn summarize(trace: &RunTrace) -> RunSummary {
    let n = trace.n_nodes;
    let threshold = |frac: f64| ((frac * n as f64).ceil() as usize).max(1);
    let mut alive_now = initially_alive(trace);
    let mut alive = Vec::with_capacity(trace.rounds.len());
    let mut bs_cumulative = Vec::with_capacity(trace.rounds.len());
    let mut bs = 0;
    for r in &trace.rounds {
        alive_now -= r.deaths.len();
        bs += r.bs_messages;
        alive.push(alive_now);
        bs_cumulative.push(bs);
    }
    RunSummary {
        policy: trace.policy,
        seed: trace.seed,
        n_nodes: n,
        fnd: kth_death(trace, 1),
        p10: kth_death(trace, threshold(0.10)),
        p50: kth_death(trace, threshold(0.50)),
        lnd: kth_death(trace, n),
        rounds: trace.rounds.len() as u64,
        bs_messages: bs,
        alive,
        bs_cumulative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `None` when every run was censored.
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub reached: usize,
    pub censored: usize,
}

/// Mean and sample standard deviation over the runs that reached the
/// milestone.
pub fn aggregate(milestones: &[Milestone]) -> Aggregate {
    let values: Vec<f64> = milestones
        .iter()
        .filter_map(|m| m.reached())
        .map(|r| r as f64)
        .collect();
    let censored = milestones.len() - values.len();
    let (mean, stddev) = mean_std(&values);
    Aggregate {
        mean,
        stddev,
        reached: values.len(),
        censored,
    }
}

pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// One `summary.csv` line: sweep point label, hash of the point's
/// configuration and the run's milestones.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub point: String,
    pub config_hash: String,
    pub summary: RunSummary,
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record([
        "point",
        "config_hash",
        "policy",
        "seed",
        "fnd",
        "p10",
        "p50",
        "lnd",
        "rounds",
        "bs_messages",
    ])?;
    for SummaryRow {
        point,
        config_hash,
        summary: s,
    } in rows
    {
        w.write_record([
            point.clone(),
            config_hash.clone(),
            s.policy.to_string(),
            s.seed.to_string(),
            s.fnd.csv_value(),
            s.p10.csv_value(),
            s.p50.csv_value(),
            s.lnd.csv_value(),
            s.rounds.to_string(),
            s.bs_messages.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curves_csv(path: impl AsRef<Path>, runs: &[&RunSummary]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["policy", "seed", "round", "alive", "bs_cum"])?;
    for s in runs {
        for (round, (alive, bs)) in s.alive.iter().zip(&s.bs_cumulative).enumerate() {
            w.write_record([
                s.policy.to_string(),
                s.seed.to_string(),
                round.to_string(),
                alive.to_string(),
                bs.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}
