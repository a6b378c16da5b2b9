//! Round loop: setup phase (node-info exchange, election, cluster
//! formation) followed by the TDMA data phase, with every joule logged.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{leach_candidates, sep_candidates, PolicyKind};
use crate::election::{
    assign_members_in, control_rx, eepca_candidates, elect_heads, Announcement, ElectionState,
    Geometry, NeighborDirectory,
};
use crate::error::{Error, Result};
use crate::model::{
    deploy, stream_rng, Charge, EnergyLedger, NodeState, Position, RadioParams, RdaSchedule,
    ScenarioConfig, Stream,
};
use crate::planner::IdealPlan;
use crate::predictor::{predict_consumption, should_suppress_broadcast, PredictionRecord};
use crate::radio::tx_cost;

pub const DEFAULT_MAX_ROUNDS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub policy: PolicyKind,
    /// Heads that survived their advertisement.
    pub heads: Vec<usize>,
    /// `(member, head)` for every successful join.
    pub assignments: Vec<(usize, usize)>,
    pub e_start: Vec<f64>,
    pub e_end: Vec<f64>,
    /// Everything debited per node.
    pub debit: Vec<f64>,
    /// Sensing-data part of `debit`.
    pub data_debit: Vec<f64>,
    /// Sum of all debits this round.
    pub debited: f64,
    /// Alive nodes that skipped their setup broadcast.
    pub suppressed: Vec<usize>,
    pub bs_messages: u64,
    pub deaths: Vec<usize>,
    pub election: Vec<ElectionState>,
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllDead,
    RoundLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub config_hash: String,
    pub policy: PolicyKind,
    pub n_nodes: usize,
    pub max_rounds: u64,
    pub e_init: Vec<f64>,
    pub rda: Vec<bool>,
    pub malfunctioning: Vec<bool>,
    pub plan: IdealPlan,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine<'a> {
    Header {
        seed: u64,
        config_hash: &'a str,
        policy: PolicyKind,
        n_nodes: usize,
        max_rounds: u64,
        e_init: &'a [f64],
        rda: &'a [bool],
        malfunctioning: &'a [bool],
        plan: &'a IdealPlan,
    },
    Round(&'a RoundRecord),
    End {
        termination: Termination,
        rounds: usize,
    },
}

impl RunTrace {
    pub fn initial_energy(&self) -> f64 {
        self.e_init.iter().sum()
    }

    pub fn final_energy(&self) -> f64 {
        self.rounds
            .last()
            .map_or_else(|| self.initial_energy(), |r| r.e_end.iter().sum())
    }

    pub fn total_debited(&self) -> f64 {
        self.rounds.iter().map(|r| r.debited).sum()
    }

    /// Writes one JSON object per line: a header, one line per round and a
    /// closing line with the termination reason.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = TraceLine::Header {
            seed: self.seed,
            config_hash: &self.config_hash,
            policy: self.policy,
            n_nodes: self.n_nodes,
            max_rounds: self.max_rounds,
            e_init: &self.e_init,
            rda: &self.rda,
            malfunctioning: &self.malfunctioning,
            plan: &self.plan,
        };
        let mut line = |v: &TraceLine| -> Result<()> {
            serde_json::to_writer(&mut out, v)?;
            out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))
        };
        line(&header)?;
        for r in &self.rounds {
            line(&TraceLine::Round(r))?;
        }
        line(&TraceLine::End {
            termination: self.termination,
            rounds: self.rounds.len(),
        })
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs one simulation to network death or `max_rounds`.
pub fn run(config: &ScenarioConfig, policy: PolicyKind, max_rounds: u64) -> Result<RunTrace> {
    let mut sim = Simulation::new(config, policy)?;
    let mut rounds = Vec::new();
    let termination = loop {
        if !sim.any_alive() {
            break Termination::AllDead;
        }
        if sim.round() >= max_rounds {
            break Termination::RoundLimit;
        }
        rounds.push(sim.step()?);
    };
    Ok(RunTrace {
        seed: config.rng_seed,
        config_hash: config.config_hash(),
        policy,
        n_nodes: config.n_nodes,
        max_rounds,
        e_init: sim.nodes.iter().map(|n| n.e_init).collect(),
        rda: sim.nodes.iter().map(|n| n.is_rda).collect(),
        malfunctioning: sim.nodes.iter().map(|n| n.is_malfunctioning).collect(),
        plan: sim.plan.clone(),
        rounds,
        termination,
    })
}

/// State of one run. Single-threaded and deterministic in
/// `(config, policy)`.
pub struct Simulation {
    cfg: ScenarioConfig,
    policy: PolicyKind,
    radio: RadioParams,
    plan: IdealPlan,
    nodes: Vec<NodeState>,
    geometry: Geometry,
    directory: NeighborDirectory,
    ledger: EnergyLedger,
    bs: Position,
    round: u64,
    last_prediction: Vec<Option<PredictionRecord>>,
    schedule_rng: ChaCha8Rng,
    election_rng: ChaCha8Rng,
    traffic_rng: ChaCha8Rng,
    malfunction_rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig, policy: PolicyKind) -> Result<Self> {
        let nodes = deploy(config)?;
        let radio = config.radio();
        let positions: Vec<Position> = nodes.iter().map(|n| n.pos).collect();
        let seed = config.rng_seed;
        Ok(Self {
            plan: IdealPlan::new(
                config.n_nodes,
                config.m_field,
                &radio,
                config.first_power_ideal_distances,
            ),
            geometry: Geometry::new(&positions, config.neighbor_radius),
            directory: NeighborDirectory::new(nodes.len()),
            ledger: EnergyLedger::new(nodes.len()),
            bs: config.base_station(),
            last_prediction: vec![None; nodes.len()],
            schedule_rng: stream_rng(seed, Stream::Schedule),
            election_rng: stream_rng(seed, Stream::Election),
            traffic_rng: stream_rng(seed, Stream::Traffic),
            malfunction_rng: stream_rng(seed, Stream::Malfunction),
            cfg: config.clone(),
            policy,
            radio,
            nodes,
            round: 0,
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn any_alive(&self) -> bool {
        self.nodes.iter().any(|n| n.alive)
    }

    fn charge(&mut self, id: usize, joules: f64, kind: Charge) -> bool {
        self.ledger.charge(&mut self.nodes[id], joules, kind)
    }

    fn suppresses(&self, id: usize) -> Option<f64> {
        let node = &self.nodes[id];
        if self.policy != PolicyKind::Eepca || !self.cfg.prediction_enabled || !node.is_rda {
            return None;
        }
        let rec = self.last_prediction[id].as_ref()?;
        should_suppress_broadcast(rec.gamma, self.cfg.epsilon_tol, self.cfg.gamma_rule_literal)
            .then_some(rec.e_predicted_next)
    }

    /// Messages node `id` emits in `frame`, as `(count, bits)`.
    fn frame_traffic(&self, id: usize, frame: u32, nonrda: &[Option<u32>]) -> (u32, u32) {
        let node = &self.nodes[id];
        match node.rda_schedule {
            Some(s) if node.is_rda => {
                let frames = self.cfg.frames_per_round;
                let count =
                    s.msgs_per_round / frames + u32::from(frame < s.msgs_per_round % frames);
                (count, s.msg_len_bits)
            }
            _ => nonrda[id].map_or((0, 0), |bits| (1, bits)),
        }
    }

    /// Executes one round.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let n = self.nodes.len();
        let cfg = self.cfg.clone();
        let radio = self.radio;
        self.ledger.reset_round();
        let e_start: Vec<f64> = self.nodes.iter().map(|x| x.e_now).collect();
        let alive_at_start: Vec<bool> = self.nodes.iter().map(|x| x.alive).collect();

        for node in self.nodes.iter_mut().filter(|x| x.alive && x.is_rda) {
            crate::model::regenerate_rda_schedule(node, &cfg, &mut self.schedule_rng)?;
        }
        let [lo, hi] = cfg.malfunction_noise_range;
        let factor: Vec<f64> = self
            .nodes
            .iter()
            .map(|x| {
                if x.alive && x.is_malfunctioning {
                    self.malfunction_rng.random_range(lo..=hi)
                } else {
                    1.0
                }
            })
            .collect();

        // node-info exchange
        let mut suppressed = Vec::new();
        let mut belief = vec![0.0; n];
        let announcements: Vec<Option<Announcement>> = (0..n)
            .map(|id| {
                if !self.nodes[id].alive {
                    return None;
                }
                match self.suppresses(id) {
                    Some(predicted) => {
                        suppressed.push(id);
                        belief[id] = predicted;
                        Some(Announcement::Suppressed(predicted))
                    }
                    None => {
                        belief[id] = self.nodes[id].e_now;
                        Some(Announcement::Broadcast(self.nodes[id].e_now))
                    }
                }
            })
            .collect();
        let tables = self.directory.exchange(
            &mut self.nodes,
            &self.geometry,
            &announcements,
            &radio,
            f64::from(cfg.broadcast_bits),
            cfg.neighbor_radius,
            &mut self.ledger,
        );

        // election
        let candidates = match self.policy {
            PolicyKind::Leach => leach_candidates(&self.nodes, self.plan.p_opt),
            PolicyKind::Sep => sep_candidates(&self.nodes, self.plan.p_opt)?,
            PolicyKind::Eepca => eepca_candidates(
                &self.nodes,
                &tables,
                &self.plan,
                &radio,
                cfg.nominal_msg_bits(),
                cfg.alpha,
                cfg.beta,
                cfg.cost_factor_cap,
                cfg.eepca_unit_weight,
            ),
        };
        let mut election = Vec::new();
        let mut elected = Vec::new();
        if !candidates.is_empty() {
            let outcome = elect_heads(
                &mut self.nodes,
                &candidates,
                self.round,
                &mut self.election_rng,
            )?;
            elected = outcome.heads;
            elected.sort_unstable();
            election = outcome.states;
        }

        // head advertisements reach the whole field
        let bits = f64::from(cfg.broadcast_bits);
        let adv_tx = tx_cost(bits, cfg.m_field * std::f64::consts::SQRT_2, &radio).joules;
        let ctl_rx = control_rx(bits, &radio);
        let mut is_head = vec![false; n];
        for &h in &elected {
            is_head[h] = true;
        }
        let mut heads = Vec::with_capacity(elected.len());
        for &h in &elected {
            if !self.charge(h, adv_tx, Charge::Overhead) {
                is_head[h] = false;
                continue;
            }
            heads.push(h);
            for id in 0..n {
                if !is_head[id] && self.nodes[id].alive {
                    self.charge(id, ctl_rx, Charge::Overhead);
                }
            }
        }

        // joins
        let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut assignments = Vec::new();
        let mut d_to_head: Vec<Option<f64>> = vec![None; n];
        for &h in &heads {
            if self.nodes[h].alive {
                d_to_head[h] = Some(0.0);
            }
        }
        for a in assign_members_in(&self.nodes, &heads, &self.geometry) {
            if !self.nodes[a.head].alive {
                continue;
            }
            let join = tx_cost(bits, a.distance, &radio).joules;
            if !self.charge(a.member, join, Charge::Overhead) {
                continue;
            }
            if !self.charge(a.head, ctl_rx, Charge::Overhead) {
                continue;
            }
            members[a.head].push((a.member, a.distance));
            assignments.push((a.member, a.head));
            d_to_head[a.member] = Some(a.distance);
        }

        // steady phase
        let mut sent = vec![0u32; n];
        let mut bs_messages = 0u64;
        let d_bs: Vec<f64> = heads
            .iter()
            .map(|&h| self.nodes[h].pos.distance(&self.bs))
            .collect();
        let [nl1, nl2] = cfg.nonrda_len_range_bits;
        let fused_bs: Vec<f64> = d_bs
            .iter()
            .map(|&d| tx_cost(f64::from(cfg.fused_len_bits), d, &radio).joules)
            .collect();
        for frame in 0..cfg.frames_per_round {
            let nonrda: Vec<Option<u32>> = (0..n)
                .map(|id| {
                    let x = &self.nodes[id];
                    if x.alive
                        && !x.is_rda
                        && self.traffic_rng.random_bool(cfg.nonrda_tx_prob_per_frame)
                    {
                        Some(self.traffic_rng.random_range(nl1..=nl2))
                    } else {
                        None
                    }
                })
                .collect();
            for (hi, &h) in heads.iter().enumerate() {
                let mut received = 0u64;
                for k in 0..members[h].len() {
                    let (m, d) = members[h][k];
                    let (count, len) = self.frame_traffic(m, frame, &nonrda);
                    let per_msg = tx_cost(f64::from(len), d, &radio).joules * factor[m];
                    let rx = f64::from(len) * radio.e_elec;
                    for _ in 0..count {
                        if !self.nodes[h].alive || !self.charge(m, per_msg, Charge::Data) {
                            break;
                        }
                        sent[m] += 1;
                        if !self.charge(h, rx, Charge::Overhead) {
                            break;
                        }
                        received += u64::from(len);
                    }
                }
                // the head's own readings go straight into the aggregate
                let (count, len) = self.frame_traffic(h, frame, &nonrda);
                let own = tx_cost(f64::from(len), 0.0, &radio).joules * factor[h];
                for _ in 0..count {
                    if !self.charge(h, own, Charge::Data) {
                        break;
                    }
                    sent[h] += 1;
                    received += u64::from(len);
                }
                if received > 0
                    && self.charge(h, cfg.e_da_per_bit * received as f64, Charge::Overhead)
                    && self.charge(h, fused_bs[hi], Charge::Overhead)
                {
                    bs_messages += 1;
                }
            }
        }

        // prediction bookkeeping
        let mut predictions = Vec::new();
        for id in 0..n {
            let node = &self.nodes[id];
            if !node.alive
                || !node.is_rda
                || self.policy != PolicyKind::Eepca
                || !cfg.prediction_enabled
            {
                self.last_prediction[id] = None;
                self.nodes[id].e_predicted_next = None;
                continue;
            }
            let schedule = node.rda_schedule.expect("alive RDA node has a schedule");
            let data_predicted = predict_consumption(
                RdaSchedule {
                    msgs_per_round: sent[id],
                    ..schedule
                },
                d_to_head[id].unwrap_or(0.0),
                &radio,
            );
            let rec = PredictionRecord::close_round(
                id,
                belief[id],
                data_predicted,
                self.ledger.data[id],
                self.ledger.spent[id],
            );
            self.nodes[id].e_predicted_next = Some(rec.e_predicted_next);
            self.last_prediction[id] = Some(rec.clone());
            predictions.push(rec);
        }

        let deaths = (0..n)
            .filter(|&id| alive_at_start[id] && !self.nodes[id].alive)
            .collect();
        let record = RoundRecord {
            round: self.round,
            policy: self.policy,
            heads,
            assignments,
            e_start,
            e_end: self.nodes.iter().map(|x| x.e_now).collect(),
            debit: self.ledger.spent.clone(),
            data_debit: self.ledger.data.clone(),
            debited: self.ledger.total,
            suppressed,
            bs_messages,
            deaths,
            election,
            predictions,
        };
        self.round += 1;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_node(energy: f64) -> ScenarioConfig {
        ScenarioConfig {
            n_nodes: 1,
            frac_energy_heterogeneous: 0.0,
            homogeneous_energy: energy,
            ..Default::default()
        }
    }

    #[test]
    fn zero_energy_network_runs_no_rounds() {
        let cfg = ScenarioConfig {
            e_min: 0.0,
            e_max: 0.0,
            homogeneous_energy: 0.0,
            ..Default::default()
        };
        let trace = run(&cfg, PolicyKind::Eepca, 100).unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(trace.termination, Termination::AllDead);
    }

    #[test]
    fn single_node_lifetime_matches_budget() {
        let energy = 0.05;
        let cfg = single_node(energy);
        let trace = run(&cfg, PolicyKind::Leach, 10_000).unwrap();
        // hand budget per round: info broadcast at 12 m, advertisement across
        // the diagonal, and per frame own reading + aggregation + BS upload
        let (e_elec, fs, mp) = (5e-9, 10e-12, 0.0013e-12);
        let node = &deploy(&cfg).unwrap()[0];
        let d_bs = ((node.pos.x - 50.0).powi(2) + (node.pos.y - 50.0).powi(2)).sqrt();
        let diag = 100.0 * 2f64.sqrt();
        let per_round = 2500.0 * (e_elec + fs * 144.0)
            + 2500.0 * (e_elec + mp * diag.powi(4))
            + 5.0 * (4000.0 * e_elec + 4000.0 * 5e-9 + 4000.0 * (e_elec + fs * d_bs * d_bs));
        let expected = (energy / per_round).floor();
        let death = trace
            .rounds
            .iter()
            .find(|r| !r.deaths.is_empty())
            .unwrap()
            .round as f64;
        assert!(
            (death - expected).abs() <= 1.0,
            "death {death} vs budget {expected}"
        );
        let (last, rest) = trace.rounds.split_last().unwrap();
        assert!(rest.iter().all(|r| r.heads == vec![0]));
        assert_eq!(last.deaths, vec![0]);
    }

    #[test]
    fn round_limit_termination() {
        let trace = run(&ScenarioConfig::default(), PolicyKind::Eepca, 5).unwrap();
        assert_eq!(trace.rounds.len(), 5);
        assert_eq!(trace.termination, Termination::RoundLimit);
        for (i, r) in trace.rounds.iter().enumerate() {
            assert_eq!(r.round, i as u64);
        }
    }

    #[test]
    fn per_round_conservation() {
        let cfg = ScenarioConfig {
            frac_rda: 0.5,
            frac_malfunction: 0.1,
            ..Default::default()
        };
        let trace = run(&cfg, PolicyKind::Eepca, 300).unwrap();
        for r in &trace.rounds {
            let delta: f64 = r.e_start.iter().zip(&r.e_end).map(|(a, b)| a - b).sum();
            assert!(((delta - r.debited) / r.debited).abs() < 1e-9);
            for (a, b) in r.e_start.iter().zip(&r.e_end) {
                assert!(b <= a);
            }
        }
    }

    #[test]
    fn dead_nodes_stay_silent() {
        let cfg = ScenarioConfig {
            e_min: 0.01,
            e_max: 0.05,
            ..Default::default()
        };
        let trace = run(&cfg, PolicyKind::Eepca, 10_000).unwrap();
        assert_eq!(trace.termination, Termination::AllDead);
        let mut dead = vec![false; cfg.n_nodes];
        for r in &trace.rounds {
            for id in 0..cfg.n_nodes {
                if dead[id] {
                    assert_eq!(r.e_start[id], 0.0);
                    assert_eq!(r.e_end[id], 0.0);
                    assert!(!r.heads.contains(&id));
                    assert!(r.assignments.iter().all(|&(m, h)| m != id && h != id));
                    assert!(r.election.iter().all(|s| s.id != id));
                }
            }
            for &d in &r.deaths {
                assert!(!dead[d], "node {d} died twice");
                dead[d] = true;
            }
        }
        assert!(dead.iter().all(|&d| d));
    }

    #[test]
    fn all_rda_network_suppresses_after_first_round() {
        let cfg = ScenarioConfig {
            frac_rda: 1.0,
            frac_malfunction: 0.0,
            ..Default::default()
        };
        let trace = run(&cfg, PolicyKind::Eepca, 20).unwrap();
        assert!(trace.rounds[0].suppressed.is_empty());
        for (prev, r) in trace.rounds.iter().zip(&trace.rounds[1..]) {
            assert_eq!(r.suppressed.len(), 100);
            for rec in &prev.predictions {
                assert_eq!(rec.gamma, 0.0);
                let actual = r.e_start[rec.id];
                assert!((rec.e_predicted_next - actual).abs() <= 1e-9 * actual);
            }
        }
    }
}
