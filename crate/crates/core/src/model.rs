//! Domain types, scenario configuration and seeded deployment.
//!
//! A deployment is a pure function of the scenario configuration: node
//! positions, initial energies and the RDA / malfunction flags are all drawn
//! from a ChaCha stream keyed by `rng_seed`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::PolicyKind;
use crate::error::{Error, Result};

/// Tolerance on `alpha + beta = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Per-round traffic schedule of a regular-data-acquisition node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdaSchedule {
    pub msgs_per_round: u32,
    pub msg_len_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub pos: Position,
    pub e_init: f64,
    pub e_now: f64,
    pub is_rda: bool,
    pub rda_schedule: Option<RdaSchedule>,
    pub is_malfunctioning: bool,
    pub alive: bool,
    /// Rounds since this node last served as cluster head.
    pub rounds_since_head: u64,
    /// Membership in the eligible set G of the current rotation epoch.
    pub in_eligible_set: bool,
    /// Residual energy neighbours will assume at the next round start if
    /// this node suppresses its setup broadcast.
    pub e_predicted_next: Option<f64>,
}

impl NodeState {
    /// Removes up to `joules` from the battery. Returns `false` when the
    /// request exceeded the remaining energy; the node is then drained to
    /// zero and the action it was paying for must not happen.
    pub fn debit(&mut self, joules: f64) -> Debit {
        debug_assert!(joules >= 0.0, "negative debit {joules}");
        if joules <= self.e_now {
            self.e_now -= joules;
            self.alive = self.e_now > 0.0;
            Debit {
                taken: joules,
                performed: true,
            }
        } else {
            let taken = self.e_now;
            self.e_now = 0.0;
            self.alive = false;
            Debit {
                taken,
                performed: false,
            }
        }
    }
}

/// Outcome of [`NodeState::debit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Debit {
    /// Energy actually removed from the battery.
    pub taken: f64,
    pub performed: bool,
}

/// What an energy debit paid for. Sensing data is the only category the
/// malfunction model perturbs and the only one the predictor estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Data,
    Overhead,
}

/// Running record of every debit applied during a run.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    pub total: f64,
    /// Per-node energy removed this round, all categories.
    pub spent: Vec<f64>,
    /// Per-node sensing-data energy removed this round.
    pub data: Vec<f64>,
}

impl EnergyLedger {
    pub fn new(n: usize) -> Self {
        Self {
            total: 0.0,
            spent: vec![0.0; n],
            data: vec![0.0; n],
        }
    }

    /// Debits `node` and logs the energy actually removed.
    pub fn charge(&mut self, node: &mut NodeState, joules: f64, kind: Charge) -> bool {
        if !node.alive {
            return false;
        }
        let debit = node.debit(joules);
        self.total += debit.taken;
        self.spent[node.id] += debit.taken;
        if kind == Charge::Data {
            self.data[node.id] += debit.taken;
        }
        debit.performed
    }

    pub fn reset_round(&mut self) {
        self.total = 0.0;
        self.spent.iter_mut().for_each(|d| *d = 0.0);
        self.data.iter_mut().for_each(|d| *d = 0.0);
    }
}

/// First-order radio constants and the path-loss law used for
/// received-signal-strength ranging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub e_elec: f64,
    pub eps_fs: f64,
    pub eps_mp: f64,
    pub d0: f64,
    pub k_rss: f64,
    pub alpha_pathloss: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            e_elec: 5e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            d0: 75.0,
            k_rss: 1.0,
            alpha_pathloss: 2.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        positive("e_elec", self.e_elec)?;
        positive("eps_fs", self.eps_fs)?;
        positive("eps_mp", self.eps_mp)?;
        positive("d0", self.d0)?;
        positive("k_rss", self.k_rss)?;
        if !(1.0..=6.0).contains(&self.alpha_pathloss) {
            return Err(Error::config("alpha_pathloss", "must lie in [1, 6]"));
        }
        Ok(())
    }
}

/// Scenario description. Serialized as a flat JSON object; every key is
/// optional and falls back to the Table-1 style defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m_field: f64,
    pub n_nodes: usize,
    /// Base station position, field centre when absent.
    pub bs_pos: Option<Position>,
    pub e_min: f64,
    pub e_max: f64,
    pub frac_energy_heterogeneous: f64,
    pub homogeneous_energy: f64,
    pub frac_rda: f64,
    pub frac_malfunction: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_tol: f64,
    pub frames_per_round: u32,
    pub rda_msgs_range: [u32; 2],
    pub msg_len_range_bits: [u32; 2],
    pub broadcast_bits: u32,
    pub nonrda_tx_prob_per_frame: f64,
    pub nonrda_len_range_bits: [u32; 2],
    pub neighbor_radius: f64,
    pub e_da_per_bit: f64,
    pub fused_len_bits: u32,
    pub rng_seed: u64,

    pub e_elec: f64,
    pub eps_fs: f64,
    pub eps_mp: f64,
    pub d0: f64,
    pub k_rss: f64,
    pub alpha_pathloss: f64,

    pub policy: PolicyKind,
    /// Use first-power expected distances in the ideal per-transmission
    /// energy instead of the d^2 / d^4 amplifier exponents.
    pub first_power_ideal_distances: bool,
    /// Suppress when `gamma < epsilon_tol` instead of `gamma <= 1 - epsilon_tol`.
    pub gamma_rule_literal: bool,
    /// Per-round multiplier range applied to a malfunctioning node's
    /// per-message energy.
    pub malfunction_noise_range: [f64; 2],
    pub cost_factor_cap: f64,
    /// Prediction-based broadcast suppression (EEPCA only).
    pub prediction_enabled: bool,
    /// Force `alpha * wE + beta * wC = 1` for every node.
    pub eepca_unit_weight: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let radio = RadioParams::default();
        Self {
            m_field: 100.0,
            n_nodes: 100,
            bs_pos: None,
            e_min: 1.0,
            e_max: 3.0,
            frac_energy_heterogeneous: 1.0,
            homogeneous_energy: 2.0,
            frac_rda: 0.0,
            frac_malfunction: 0.0,
            alpha: 0.7,
            beta: 0.3,
            epsilon_tol: 0.93,
            frames_per_round: 5,
            rda_msgs_range: [3, 7],
            msg_len_range_bits: [2000, 6000],
            broadcast_bits: 2500,
            nonrda_tx_prob_per_frame: 1.0,
            nonrda_len_range_bits: [4000, 4000],
            neighbor_radius: 12.0,
            e_da_per_bit: 5e-9,
            fused_len_bits: 4000,
            rng_seed: 0,
            e_elec: radio.e_elec,
            eps_fs: radio.eps_fs,
            eps_mp: radio.eps_mp,
            d0: radio.d0,
            k_rss: radio.k_rss,
            alpha_pathloss: radio.alpha_pathloss,
            policy: PolicyKind::Eepca,
            first_power_ideal_distances: false,
            gamma_rule_literal: false,
            malfunction_noise_range: [0.5, 1.5],
            cost_factor_cap: 5.0,
            prediction_enabled: true,
            eepca_unit_weight: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Loads and validates a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            e_elec: self.e_elec,
            eps_fs: self.eps_fs,
            eps_mp: self.eps_mp,
            d0: self.d0,
            k_rss: self.k_rss,
            alpha_pathloss: self.alpha_pathloss,
        }
    }

    pub fn base_station(&self) -> Position {
        self.bs_pos
            .unwrap_or_else(|| Position::new(self.m_field / 2.0, self.m_field / 2.0))
    }

    /// Expected length of a non-RDA message; also the nominal length used
    /// by the ideal-cluster energy baseline.
    pub fn nominal_msg_bits(&self) -> f64 {
        let [lo, hi] = self.nonrda_len_range_bits;
        (lo as f64 + hi as f64) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        positive("m_field", self.m_field)?;
        if self.n_nodes == 0 {
            return Err(Error::config("n_nodes", "must be at least 1"));
        }
        if let Some(bs) = self.bs_pos {
            if !(bs.x.is_finite() && bs.y.is_finite()) {
                return Err(Error::config("bs_pos", "must be finite"));
            }
        }
        non_negative("e_min", self.e_min)?;
        non_negative("e_max", self.e_max)?;
        if self.e_min > self.e_max {
            return Err(Error::config("e_min", "must not exceed e_max"));
        }
        non_negative("homogeneous_energy", self.homogeneous_energy)?;
        fraction("frac_energy_heterogeneous", self.frac_energy_heterogeneous)?;
        fraction("frac_rda", self.frac_rda)?;
        fraction("frac_malfunction", self.frac_malfunction)?;
        fraction("alpha", self.alpha)?;
        fraction("beta", self.beta)?;
        if (self.alpha + self.beta - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::config("beta", "alpha + beta must equal 1"));
        }
        fraction("epsilon_tol", self.epsilon_tol)?;
        if self.frames_per_round == 0 {
            return Err(Error::config("frames_per_round", "must be at least 1"));
        }
        ordered_range("rda_msgs_range", self.rda_msgs_range)?;
        ordered_range("msg_len_range_bits", self.msg_len_range_bits)?;
        ordered_range("nonrda_len_range_bits", self.nonrda_len_range_bits)?;
        fraction("nonrda_tx_prob_per_frame", self.nonrda_tx_prob_per_frame)?;
        non_negative("neighbor_radius", self.neighbor_radius)?;
        non_negative("e_da_per_bit", self.e_da_per_bit)?;
        let [lo, hi] = self.malfunction_noise_range;
        non_negative("malfunction_noise_range", lo)?;
        if !(hi.is_finite() && lo <= hi) {
            return Err(Error::config(
                "malfunction_noise_range",
                "must be an ordered pair of finite values",
            ));
        }
        positive("cost_factor_cap", self.cost_factor_cap)?;
        self.radio().validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be non-negative, got {v}"),
        ))
    }
}

fn fraction(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn ordered_range(field: &str, [lo, hi]: [u32; 2]) -> Result<()> {
    if lo <= hi {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("lower bound {lo} exceeds {hi}"),
        ))
    }
}

/// Independent random streams of one run. Keeping them apart means e.g. the
/// election draws do not shift when traffic draws change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Deploy = 1,
    Schedule = 2,
    Election = 3,
    Traffic = 4,
    Malfunction = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Number of nodes carrying a flag with the given population fraction.
pub fn flagged_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64).round() as usize).min(n)
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<bool> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut flags = vec![false; n];
    for &i in &ids[..k] {
        flags[i] = true;
    }
    flags
}

/// Places `n_nodes` sensors uniformly in the field and assigns energies and
/// roles. RDA schedules are left empty; the engine draws them every round.
pub fn deploy(config: &ScenarioConfig) -> Result<Vec<NodeState>> {
    config.validate()?;
    let n = config.n_nodes;
    let m = config.m_field;
    let mut rng = stream_rng(config.rng_seed, Stream::Deploy);

    let positions: Vec<Position> = (0..n)
        .map(|_| Position::new(rng.random_range(0.0..=m), rng.random_range(0.0..=m)))
        .collect();

    let hetero = random_subset(
        &mut rng,
        n,
        flagged_count(config.frac_energy_heterogeneous, n),
    );
    let energies: Vec<f64> = hetero
        .iter()
        .map(|&h| {
            if h {
                rng.random_range(config.e_min..=config.e_max)
            } else {
                config.homogeneous_energy
            }
        })
        .collect();
    let rda = random_subset(&mut rng, n, flagged_count(config.frac_rda, n));
    let malfunction = random_subset(&mut rng, n, flagged_count(config.frac_malfunction, n));

    Ok((0..n)
        .map(|id| NodeState {
            id,
            pos: positions[id],
            e_init: energies[id],
            e_now: energies[id],
            is_rda: rda[id],
            rda_schedule: None,
            is_malfunctioning: malfunction[id],
            alive: energies[id] > 0.0,
            rounds_since_head: 0,
            in_eligible_set: true,
            e_predicted_next: None,
        })
        .collect())
}

/// Draws this round's schedule for an RDA node.
pub fn regenerate_rda_schedule<R: Rng + ?Sized>(
    node: &mut NodeState,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<RdaSchedule> {
    if !node.is_rda {
        return Err(Error::Contract(format!(
            "node {} is not an RDA node and has no schedule",
            node.id
        )));
    }
    let [n1, n2] = config.rda_msgs_range;
    let [l1, l2] = config.msg_len_range_bits;
    let schedule = RdaSchedule {
        msgs_per_round: rng.random_range(n1..=n2),
        msg_len_bits: rng.random_range(l1..=l2),
    };
    node.rda_schedule = Some(schedule);
    Ok(schedule)
}
