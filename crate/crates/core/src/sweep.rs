//! Parameter sweeps: base scenario x one swept variable x policies x seeds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::PolicyKind;
use crate::engine::{run, DEFAULT_MAX_ROUNDS};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, summarize, write_curves_csv, write_summary_csv, Aggregate, RunSummary, SummaryRow,
};
use crate::model::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Alpha,
    EpsilonTol,
    FracEnergyHeterogeneous,
}

impl SweepVar {
    pub fn key(&self) -> &'static str {
        match self {
            SweepVar::Alpha => "alpha",
            SweepVar::EpsilonTol => "epsilon_tol",
            SweepVar::FracEnergyHeterogeneous => "frac_energy_heterogeneous",
        }
    }

    /// Applies `value`; sweeping `alpha` keeps `beta = 1 - alpha`.
    pub fn apply(&self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepVar::Alpha => {
                cfg.alpha = value;
                cfg.beta = 1.0 - value;
            }
            SweepVar::EpsilonTol => cfg.epsilon_tol = value,
            SweepVar::FracEnergyHeterogeneous => cfg.frac_energy_heterogeneous = value,
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alpha" => Ok(SweepVar::Alpha),
            "epsilon_tol" | "epsilon" => Ok(SweepVar::EpsilonTol),
            "frac_energy_heterogeneous" => Ok(SweepVar::FracEnergyHeterogeneous),
            other => Err(Error::config("sweep", format!("cannot sweep `{other}`"))),
        }
    }
}

/// Inclusive `start:stop:step` grid. The count is rounded so that
/// floating-point steps do not drop the endpoint.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::config(
            "sweep",
            format!("bad range {start}:{stop}:{step}"),
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Parses `var=v1,v2,...` or `var=start:stop:step`.
pub fn parse_sweep(text: &str) -> Result<(SweepVar, Vec<f64>)> {
    let (var, values) = text
        .split_once('=')
        .ok_or_else(|| Error::config("sweep", format!("expected var=values, got `{text}`")))?;
    let var: SweepVar = var.parse()?;
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config("sweep", format!("not a number: `{s}`")))
    };
    let parts: Vec<&str> = values.split(':').collect();
    let values = if parts.len() == 3 {
        grid(number(parts[0])?, number(parts[1])?, number(parts[2])?)?
    } else if parts.len() == 1 {
        values.split(',').map(number).collect::<Result<Vec<_>>>()?
    } else {
        return Err(Error::config("sweep", format!("bad range `{values}`")));
    };
    if values.is_empty() {
        return Err(Error::config("sweep", "no values"));
    }
    Ok((var, values))
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario: ScenarioConfig,
    /// `None` runs the base scenario as a single point.
    pub var: Option<(SweepVar, Vec<f64>)>,
    pub policies: Vec<PolicyKind>,
    pub seeds: usize,
    pub max_rounds: u64,
}

impl SweepSpec {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self {
            scenario,
            var: None,
            policies: PolicyKind::ALL.to_vec(),
            seeds: 1,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    /// Seeds are `base + i` for `i < seeds`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64)
            .map(|i| self.scenario.rng_seed.wrapping_add(i))
            .collect()
    }

    fn points(&self) -> Vec<(String, Option<f64>)> {
        match &self.var {
            None => vec![("base".to_string(), None)],
            Some((var, values)) => values
                .iter()
                .map(|v| (format!("{}={}", var.key(), fmt_value(*v)), Some(*v)))
                .collect(),
        }
    }

    /// Configuration of one sweep point with the given seed.
    pub fn config_at(&self, value: Option<f64>, seed: u64) -> ScenarioConfig {
        let mut cfg = self.scenario.clone();
        if let (Some((var, _)), Some(v)) = (&self.var, value) {
            var.apply(&mut cfg, v);
        }
        cfg.rng_seed = seed;
        cfg
    }
}

fn fmt_value(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub label: String,
    pub value: Option<f64>,
    pub policy: PolicyKind,
    pub config_hash: String,
    pub fnd: Aggregate,
    pub p10: Aggregate,
    pub p50: Aggregate,
    pub lnd: Aggregate,
    #[serde(skip)]
    pub runs: Vec<RunSummary>,
}

/// Runs every (point, policy, seed) triple in parallel. Results come back
/// in point, policy, seed order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<PointResult>> {
    let seeds = spec.seed_list();
    let mut jobs = Vec::new();
    for (label, value) in spec.points() {
        let probe = spec.config_at(value, spec.scenario.rng_seed);
        probe.validate()?;
        for &policy in &spec.policies {
            jobs.push((label.clone(), value, policy, probe.config_hash()));
        }
    }
    jobs.into_par_iter()
        .map(|(label, value, policy, config_hash)| {
            let runs = seeds
                .par_iter()
                .map(|&seed| {
                    let trace = run(&spec.config_at(value, seed), policy, spec.max_rounds)?;
                    Ok(summarize(&trace))
                })
                .collect::<Result<Vec<_>>>()?;
            let pick = |f: fn(&RunSummary) -> crate::metrics::Milestone| {
                aggregate(&runs.iter().map(f).collect::<Vec<_>>())
            };
            Ok(PointResult {
                fnd: pick(|s| s.fnd),
                p10: pick(|s| s.p10),
                p50: pick(|s| s.p50),
                lnd: pick(|s| s.lnd),
                label,
                value,
                policy,
                config_hash,
                runs,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    scenario: &'a ScenarioConfig,
    base_config_hash: String,
    sweep_var: Option<SweepVar>,
    sweep_values: Option<&'a [f64]>,
    policies: &'a [PolicyKind],
    seeds: Vec<u64>,
    max_rounds: u64,
    points: &'a [PointResult],
}

/// Writes `summary.csv`, `curves/<point>_<policy>.csv` and
/// `metadata.json` under `out`.
pub fn write_outputs(spec: &SweepSpec, results: &[PointResult], out: &Path) -> Result<()> {
    let curves = out.join("curves");
    std::fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    let rows: Vec<SummaryRow> = results
        .iter()
        .flat_map(|p| {
            p.runs.iter().map(|r| SummaryRow {
                point: p.label.clone(),
                config_hash: p.config_hash.clone(),
                summary: r.clone(),
            })
        })
        .collect();
    write_summary_csv(out.join("summary.csv"), &rows)?;
    for p in results {
        let name: PathBuf = curves.join(format!("{}_{}.csv", p.label.replace('=', "_"), p.policy));
        write_curves_csv(name, &p.runs.iter().collect::<Vec<_>>())?;
    }
    let meta = Metadata {
        scenario: &spec.scenario,
        base_config_hash: spec.scenario.config_hash(),
        sweep_var: spec.var.as_ref().map(|(v, _)| *v),
        sweep_values: spec.var.as_ref().map(|(_, v)| v.as_slice()),
        policies: &spec.policies,
        seeds: spec.seed_list(),
        max_rounds: spec.max_rounds,
        points: results,
    };
    let path = out.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_keeps_endpoint() {
        let g = grid(0.5, 0.9, 0.02).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 0.9).abs() < 1e-12);
        assert_eq!(grid(0.8, 1.0, 0.01).unwrap().len(), 21);
    }

    #[test]
    fn parse_forms() {
        let (v, vals) = parse_sweep("alpha=0.5,0.7").unwrap();
        assert_eq!(v, SweepVar::Alpha);
        assert_eq!(vals, vec![0.5, 0.7]);
        let (v, vals) = parse_sweep("epsilon_tol=0.8:1.0:0.1").unwrap();
        assert_eq!(v, SweepVar::EpsilonTol);
        assert_eq!(vals.len(), 3);
        assert!(parse_sweep("gamma=1").is_err());
        assert!(parse_sweep("alpha").is_err());
        assert!(parse_sweep("alpha=x").is_err());
    }

    #[test]
    fn alpha_sweep_keeps_weights_normalised() {
        let mut spec = SweepSpec::new(ScenarioConfig::default());
        spec.var = Some((SweepVar::Alpha, vec![0.62]));
        let cfg = spec.config_at(Some(0.62), 4);
        assert!((cfg.alpha + cfg.beta - 1.0).abs() < 1e-12);
        assert_eq!(cfg.rng_seed, 4);
    }
}
