//! LEACH and SEP election policies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::election::{epoch, Candidate, ThresholdRule, P_CEIL, P_FLOOR};
use crate::error::{Error, Result};
use crate::model::NodeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Leach,
    Sep,
    Eepca,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Leach, PolicyKind::Sep, PolicyKind::Eepca];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Leach => "leach",
            PolicyKind::Sep => "sep",
            PolicyKind::Eepca => "eepca",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "leach" => Ok(PolicyKind::Leach),
            "sep" => Ok(PolicyKind::Sep),
            "eepca" => Ok(PolicyKind::Eepca),
            other => Err(Error::config("policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// Rotation threshold of LEACH.
pub fn leach_threshold(p: f64, round: u64, in_g: bool) -> f64 {
    if !in_g {
        return 0.0;
    }
    let denom = 1.0 - p * (round % epoch(p)) as f64;
    if denom <= 0.0 {
        1.0
    } else {
        p / denom
    }
}

/// SEP weighting generalised to arbitrary initial energies:
/// `p_opt * n * e_init / sum(e_init)`.
pub fn sep_probability(p_opt: f64, e_init: f64, n: usize, total_init: f64) -> Result<f64> {
    if !(total_init > 0.0) {
        return Err(Error::Contract(
            "SEP weighting with zero total energy".into(),
        ));
    }
    Ok(p_opt * n as f64 * e_init / total_init)
}

pub fn leach_candidates(nodes: &[NodeState], p_opt: f64) -> Vec<Candidate> {
    let p = p_opt.clamp(P_FLOOR, P_CEIL);
    nodes
        .iter()
        .filter(|n| n.alive)
        .map(|n| Candidate {
            id: n.id,
            p,
            energy_factor: 1.0,
            cost_factor: 1.0,
            rule: ThresholdRule::Rotation,
        })
        .collect()
}

pub fn sep_candidates(nodes: &[NodeState], p_opt: f64) -> Result<Vec<Candidate>> {
    let total: f64 = nodes.iter().map(|n| n.e_init).sum();
    nodes
        .iter()
        .filter(|n| n.alive)
        .map(|n| {
            Ok(Candidate {
                id: n.id,
                p: sep_probability(p_opt, n.e_init, nodes.len(), total)?.clamp(P_FLOOR, P_CEIL),
                energy_factor: 1.0,
                cost_factor: 1.0,
                rule: ThresholdRule::Rotation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{deploy, ScenarioConfig};

    #[test]
    fn leach_examples() {
        assert!((leach_threshold(0.1, 20, true) - 0.1).abs() < 1e-15);
        assert!((leach_threshold(0.1, 15, true) - 0.2).abs() < 1e-12);
        assert_eq!(leach_threshold(0.1, 15, false), 0.0);
    }

    #[test]
    fn sep_uniform_reduces_to_p_opt() {
        let cfg = ScenarioConfig {
            frac_energy_heterogeneous: 0.0,
            ..Default::default()
        };
        let nodes = deploy(&cfg).unwrap();
        for c in sep_candidates(&nodes, 0.1).unwrap() {
            assert!((c.p - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn sep_two_level_ratio_and_normalisation() {
        let cfg = ScenarioConfig {
            frac_energy_heterogeneous: 0.0,
            ..Default::default()
        };
        let mut nodes = deploy(&cfg).unwrap();
        for n in nodes.iter_mut().take(20) {
            n.e_init = 4.0;
        }
        let c = sep_candidates(&nodes, 0.1).unwrap();
        assert!((c[0].p / c[50].p - 2.0).abs() < 1e-12);
        let sum: f64 = c.iter().map(|c| c.p).sum();
        // sum of p_i is k_opt = p_opt * n
        assert!((sum - 10.0).abs() < 1e-9);
    }

    #[test]
    fn sep_zero_energy_is_error() {
        assert!(sep_probability(0.1, 0.0, 10, 0.0).is_err());
    }

    #[test]
    fn parse_policy() {
        assert_eq!("LEACH".parse::<PolicyKind>().unwrap(), PolicyKind::Leach);
        assert_eq!(" sep".parse::<PolicyKind>().unwrap(), PolicyKind::Sep);
        assert!("edfcm".parse::<PolicyKind>().is_err());
    }
}
