//! EEPCA cluster-head election: neighbour tables built from setup
//! broadcasts, the energy and communication-cost factors, the per-node
//! head probability and the rotation threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Charge, EnergyLedger, NodeState, Position, RadioParams, RdaSchedule};
use crate::planner::IdealPlan;
use crate::radio::{estimate_distance, received_power, rx_energy, tx_cost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub id: usize,
    pub distance: f64,
    /// Last broadcast energy, or the predicted value when the broadcast was
    /// suppressed.
    pub e_known: f64,
    pub rda_schedule: Option<RdaSchedule>,
    pub e_predicted: Option<f64>,
    pub ch_id: Option<usize>,
    pub d_to_ch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTable {
    pub owner: usize,
    pub entries: Vec<NeighborEntry>,
}

impl NeighborTable {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Static pairwise geometry of a deployment.
#[derive(Debug, Clone)]
pub struct Geometry {
    n: usize,
    dist: Vec<f64>,
    /// Ids within the neighbour radius, ascending.
    within_radius: Vec<Vec<usize>>,
}

impl Geometry {
    pub fn new(positions: &[Position], neighbor_radius: f64) -> Self {
        let n = positions.len();
        let mut dist = vec![0.0; n * n];
        let mut within_radius = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let d = positions[i].distance(&positions[j]);
                dist[i * n + j] = d;
                if i != j && d <= neighbor_radius {
                    within_radius[i].push(j);
                }
            }
        }
        Self {
            n,
            dist,
            within_radius,
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    pub fn within_radius(&self, id: usize) -> &[usize] {
        &self.within_radius[id]
    }
}

/// What a node contributes to its neighbours' tables in one setup phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Announcement {
    /// Broadcast the given round-start energy.
    Broadcast(f64),
    /// Stay silent; neighbours substitute the predicted energy.
    Suppressed(f64),
}

/// Persistent per-run neighbour knowledge: ranged distances survive
/// across rounds so silent neighbours can still be tabulated.
#[derive(Debug, Clone)]
pub struct NeighborDirectory {
    n: usize,
    /// RSS-estimated distance, NaN until a broadcast has been heard.
    ranged: Vec<f64>,
}

impl NeighborDirectory {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ranged: vec![f64::NAN; n * n],
        }
    }

    fn ranged(&self, owner: usize, other: usize) -> Option<f64> {
        let d = self.ranged[owner * self.n + other];
        (!d.is_nan()).then_some(d)
    }

    /// Runs the node-info exchange of one setup phase and returns fresh
    /// tables. Broadcasts go out in id order; each costs the sender one
    /// transmission over `neighbor_radius` and every alive node in range
    /// one reception.
    #[allow(clippy::too_many_arguments)]
    pub fn exchange(
        &mut self,
        nodes: &mut [NodeState],
        geometry: &Geometry,
        announcements: &[Option<Announcement>],
        radio: &RadioParams,
        broadcast_bits: f64,
        neighbor_radius: f64,
        ledger: &mut EnergyLedger,
    ) -> Vec<NeighborTable> {
        let n = nodes.len();
        let tx = tx_cost(broadcast_bits, neighbor_radius, radio).joules;
        let rx = broadcast_bits * radio.e_elec;
        let mut heard = vec![f64::NAN; n * n];

        for sender in 0..n {
            let Some(Announcement::Broadcast(value)) = announcements[sender] else {
                continue;
            };
            if !ledger.charge(&mut nodes[sender], tx, Charge::Overhead) {
                continue;
            }
            for &receiver in geometry.within_radius(sender) {
                if !ledger.charge(&mut nodes[receiver], rx, Charge::Overhead) {
                    continue;
                }
                // static positions give the same estimate every time
                let slot = &mut self.ranged[receiver * n + sender];
                if slot.is_nan() {
                    let d = geometry.distance(sender, receiver);
                    // a reception at positive range always yields a finite estimate
                    *slot = received_power(tx, d, radio)
                        .and_then(|p| estimate_distance(tx, p, radio))
                        .unwrap_or(d);
                }
                heard[receiver * n + sender] = value;
            }
        }

        (0..n)
            .map(|owner| {
                let mut entries = Vec::new();
                if nodes[owner].alive {
                    for &other in geometry.within_radius(owner) {
                        if !nodes[other].alive {
                            continue;
                        }
                        let known = match announcements[other] {
                            Some(Announcement::Broadcast(_)) => {
                                let v = heard[owner * n + other];
                                (!v.is_nan()).then_some(v)
                            }
                            Some(Announcement::Suppressed(v)) => Some(v),
                            None => None,
                        };
                        let (Some(e_known), Some(distance)) = (known, self.ranged(owner, other))
                        else {
                            continue;
                        };
                        entries.push(NeighborEntry {
                            id: other,
                            distance,
                            e_known,
                            rda_schedule: nodes[other].rda_schedule,
                            e_predicted: nodes[other].e_predicted_next,
                            ch_id: None,
                            d_to_ch: None,
                        });
                    }
                }
                NeighborTable { owner, entries }
            })
            .collect()
    }
}

/// Every alive node broadcasts its current energy once; returns the
/// resulting tables and the total energy spent.
pub fn build_neighbor_tables(
    nodes: &mut [NodeState],
    radio: &RadioParams,
    broadcast_bits: f64,
    neighbor_radius: f64,
) -> (Vec<NeighborTable>, f64) {
    let positions: Vec<Position> = nodes.iter().map(|n| n.pos).collect();
    let geometry = Geometry::new(&positions, neighbor_radius);
    let announcements: Vec<Option<Announcement>> = nodes
        .iter()
        .map(|n| n.alive.then_some(Announcement::Broadcast(n.e_now)))
        .collect();
    let mut ledger = EnergyLedger::new(nodes.len());
    let mut directory = NeighborDirectory::new(nodes.len());
    let tables = directory.exchange(
        nodes,
        &geometry,
        &announcements,
        radio,
        broadcast_bits,
        neighbor_radius,
        &mut ledger,
    );
    (tables, ledger.total)
}

/// Own energy over the neighbourhood mean. Neutral (1) without information.
pub fn energy_factor(own_energy: f64, table: &NeighborTable) -> f64 {
    if table.is_empty() {
        return 1.0;
    }
    let mean = table.entries.iter().map(|e| e.e_known).sum::<f64>() / table.entries.len() as f64;
    if mean > 0.0 {
        own_energy / mean
    } else {
        1.0
    }
}

/// Mean energy a neighbour would spend on one transmission to this node if
/// it became head. `None` for an empty table.
pub fn avg_round_energy_if_head(
    table: &NeighborTable,
    nonrda_bits: f64,
    radio: &RadioParams,
) -> Option<f64> {
    if table.is_empty() {
        return None;
    }
    let total: f64 = table
        .entries
        .iter()
        .map(|e| {
            let bits = e
                .rda_schedule
                .map_or(nonrda_bits, |s| f64::from(s.msg_len_bits));
            tx_cost(bits, e.distance, radio).joules
        })
        .sum();
    Some(total / table.entries.len() as f64)
}

/// Ideal per-transmission energy over the node's would-be cluster mean,
/// capped at `cap`.
pub fn cost_factor(ideal: f64, if_head: f64, cap: f64) -> f64 {
    if if_head > 0.0 {
        (ideal / if_head).min(cap)
    } else {
        cap
    }
}

/// Smallest and largest head probability a node may carry.
pub const P_FLOOR: f64 = 1e-9;
pub const P_CEIL: f64 = 1.0 - 1e-9;

pub fn election_probability(p_opt: f64, weight: f64) -> f64 {
    (p_opt * weight).clamp(P_FLOOR, P_CEIL)
}

/// `alpha * wE + beta * wC`.
pub fn combined_weight(energy: f64, cost: f64, alpha: f64, beta: f64) -> f64 {
    alpha * energy + beta * cost
}

/// Rotation epoch length for head probability `p`.
pub fn epoch(p: f64) -> u64 {
    (1.0 / p).ceil() as u64
}

/// Threshold before clamping to [0, 1]; saturates to 1 when the rotation
/// term leaves no room.
pub fn eepca_threshold_raw(
    in_g: bool,
    p: f64,
    round: u64,
    rounds_since_head: u64,
    weight: f64,
) -> f64 {
    if !in_g {
        return 0.0;
    }
    let period = epoch(p);
    let denom = 1.0 - p * (round % period) as f64;
    if denom <= 0.0 {
        return 1.0;
    }
    let stale_epochs = (rounds_since_head / period) as f64;
    p / denom * (weight + stale_epochs * (1.0 - weight))
}

pub fn eepca_threshold(in_g: bool, p: f64, round: u64, rounds_since_head: u64, weight: f64) -> f64 {
    eepca_threshold_raw(in_g, p, round, rounds_since_head, weight).clamp(0.0, 1.0)
}

/// Which threshold law a candidate is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Plain rotation threshold.
    Rotation,
    /// Rotation threshold scaled by the combined weight.
    Weighted(f64),
}

/// One alive node's input to the election.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub p: f64,
    pub energy_factor: f64,
    pub cost_factor: f64,
    pub rule: ThresholdRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionState {
    pub id: usize,
    pub p: f64,
    pub energy_factor: f64,
    pub cost_factor: f64,
    pub threshold_raw: f64,
    pub threshold: f64,
    pub draw: f64,
    pub was_in_g: bool,
    pub elected: bool,
    pub drafted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ElectionOutcome {
    pub heads: Vec<usize>,
    pub states: Vec<ElectionState>,
}

/// Runs one election over `candidates` (alive nodes, ascending id).
///
/// A node rejoins G when the round index is a multiple of its epoch. Every
/// candidate consumes exactly one uniform draw so the random stream stays
/// aligned across policies. With no natural winner the candidate of
/// largest `p` (lowest id on ties) is drafted.
pub fn elect_heads<R: Rng + ?Sized>(
    nodes: &mut [NodeState],
    candidates: &[Candidate],
    round: u64,
    rng: &mut R,
) -> Result<ElectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::Contract("election with no alive nodes".into()));
    }
    let mut outcome = ElectionOutcome::default();
    for c in candidates {
        let node = &mut nodes[c.id];
        debug_assert!(node.alive);
        if round.is_multiple_of(epoch(c.p)) {
            node.in_eligible_set = true;
        }
        let in_g = node.in_eligible_set;
        let raw = match c.rule {
            ThresholdRule::Rotation => crate::baselines::leach_threshold(c.p, round, in_g),
            ThresholdRule::Weighted(w) => {
                eepca_threshold_raw(in_g, c.p, round, node.rounds_since_head, w)
            }
        };
        let threshold = raw.clamp(0.0, 1.0);
        let draw: f64 = rng.random();
        let elected = in_g && draw < threshold;
        outcome.states.push(ElectionState {
            id: c.id,
            p: c.p,
            energy_factor: c.energy_factor,
            cost_factor: c.cost_factor,
            threshold_raw: raw,
            threshold,
            draw,
            was_in_g: in_g,
            elected,
            drafted: false,
        });
        if elected {
            outcome.heads.push(c.id);
        }
    }

    if outcome.heads.is_empty() {
        let idx =
            candidates.iter().enumerate().fold(
                0,
                |best, (i, c)| if c.p > candidates[best].p { i } else { best },
            );
        outcome.states[idx].drafted = true;
        outcome.heads.push(candidates[idx].id);
    }

    for (c, state) in candidates.iter().zip(&outcome.states) {
        let node = &mut nodes[c.id];
        if state.elected || state.drafted {
            node.in_eligible_set = false;
            node.rounds_since_head = 0;
        } else {
            node.rounds_since_head += 1;
        }
    }
    Ok(outcome)
}

/// Builds EEPCA candidates from the current tables.
#[allow(clippy::too_many_arguments)]
pub fn eepca_candidates(
    nodes: &[NodeState],
    tables: &[NeighborTable],
    plan: &IdealPlan,
    radio: &RadioParams,
    nominal_bits: f64,
    alpha: f64,
    beta: f64,
    cost_cap: f64,
    unit_weight: bool,
) -> Vec<Candidate> {
    let ideal = plan.ideal_avg_tx_energy(nominal_bits, radio);
    nodes
        .iter()
        .filter(|n| n.alive)
        .map(|node| {
            let table = &tables[node.id];
            let we = energy_factor(node.e_now, table);
            let wc = avg_round_energy_if_head(table, nominal_bits, radio)
                .map_or(1.0, |if_head| cost_factor(ideal, if_head, cost_cap));
            let weight = if unit_weight {
                1.0
            } else {
                combined_weight(we, wc, alpha, beta)
            };
            Candidate {
                id: node.id,
                p: election_probability(plan.p_opt, weight),
                energy_factor: we,
                cost_factor: wc,
                rule: ThresholdRule::Weighted(weight),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub member: usize,
    pub head: usize,
    pub distance: f64,
}

/// Nearest-head assignment for every alive non-head. `heads` must be
/// ascending so ties resolve to the lowest id.
pub fn assign_members(nodes: &[NodeState], heads: &[usize]) -> Vec<Assignment> {
    assign_members_by(nodes, heads, |a, b| nodes[a].pos.distance(&nodes[b].pos))
}

/// As [`assign_members`] with distances from a precomputed matrix.
pub fn assign_members_in(
    nodes: &[NodeState],
    heads: &[usize],
    geometry: &Geometry,
) -> Vec<Assignment> {
    assign_members_by(nodes, heads, |a, b| geometry.distance(a, b))
}

fn assign_members_by(
    nodes: &[NodeState],
    heads: &[usize],
    distance: impl Fn(usize, usize) -> f64,
) -> Vec<Assignment> {
    if heads.is_empty() {
        return Vec::new();
    }
    let mut is_head = vec![false; nodes.len()];
    for &h in heads {
        is_head[h] = true;
    }
    nodes
        .iter()
        .filter(|n| n.alive && !is_head[n.id])
        .map(|m| {
            let (head, distance) = heads.iter().map(|&h| (h, distance(m.id, h))).fold(
                (usize::MAX, f64::INFINITY),
                |best, cand| {
                    if cand.1 < best.1 {
                        cand
                    } else {
                        best
                    }
                },
            );
            Assignment {
                member: m.id,
                head,
                distance,
            }
        })
        .collect()
}

/// Receiving cost of one advertisement or join message.
pub(crate) fn control_rx(bits: f64, radio: &RadioParams) -> f64 {
    rx_energy(bits, radio).unwrap_or(0.0)
}
