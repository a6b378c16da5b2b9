//! Energy-consumption prediction for RDA nodes and the broadcast
//! suppression rule built on it.
//!
//! Neighbours can reconstruct what an RDA node spent in the previous round
//! from its schedule and its distance to the head it served. The node
//! compares that reconstruction against what it actually spent; while the
//! two agree within tolerance it stays silent in the next setup phase and
//! its neighbours carry the predicted residual energy instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeState, RadioParams, RdaSchedule};
use crate::radio::tx_cost;

/// Relative disagreement below which prediction and measurement are
/// treated as identical (accumulated rounding only).
pub const GAMMA_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: usize,
    /// Energy neighbours held for this node at the start of the round.
    pub e_round_start: f64,
    /// Predicted sensing-data energy for the round.
    pub data_predicted: f64,
    /// Sensing-data energy actually debited.
    pub data_actual: f64,
    /// Everything else the node spent (setup, head duties).
    pub overhead: f64,
    pub e_consume_predicted: f64,
    pub e_predicted_next: f64,
    pub gamma: f64,
}

/// Data energy of `schedule.msgs_per_round` messages to a head at
/// `d_to_head`; a head's own readings use `d_to_head = 0`.
pub fn predict_consumption(schedule: RdaSchedule, d_to_head: f64, radio: &RadioParams) -> f64 {
    let per_message = tx_cost(f64::from(schedule.msg_len_bits), d_to_head, radio).joules;
    f64::from(schedule.msgs_per_round) * per_message
}

pub fn predict_round_consumption(
    node: &NodeState,
    d_to_head: f64,
    radio: &RadioParams,
) -> Result<f64> {
    let schedule = match (node.is_rda, node.rda_schedule) {
        (true, Some(s)) => s,
        _ => {
            return Err(Error::Contract(format!(
                "node {} has no RDA schedule to predict from",
                node.id
            )))
        }
    };
    if !(d_to_head >= 0.0) {
        return Err(Error::Contract(format!("distance {d_to_head} < 0")));
    }
    Ok(predict_consumption(schedule, d_to_head, radio))
}

/// `|1 - predicted / actual|`; `None` when `actual` is not positive.
pub fn gamma(predicted: f64, actual: f64) -> Option<f64> {
    if !(actual > 0.0) {
        return None;
    }
    let g = ((actual - predicted) / actual).abs();
    Some(if g <= GAMMA_NOISE_FLOOR { 0.0 } else { g })
}

/// `gamma <= 1 - epsilon` by default; `gamma < epsilon` under the literal rule.
pub fn should_suppress_broadcast(gamma: f64, epsilon_tol: f64, literal: bool) -> bool {
    if literal {
        gamma < epsilon_tol
    } else {
        gamma <= 1.0 - epsilon_tol
    }
}

impl PredictionRecord {
    /// Closes out one round for an RDA node. `consumed` is everything the
    /// node spent in the round; the prediction differs from it only in the
    /// sensing-data term.
    pub fn close_round(
        id: usize,
        e_round_start: f64,
        data_predicted: f64,
        data_actual: f64,
        consumed: f64,
    ) -> Self {
        let overhead = consumed - data_actual;
        let e_consume_predicted = overhead + data_predicted;
        let gamma = if consumed > 0.0 {
            let g = ((data_actual - data_predicted) / consumed).abs();
            if g <= GAMMA_NOISE_FLOOR {
                0.0
            } else {
                g
            }
        } else if data_predicted == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            id,
            e_round_start,
            data_predicted,
            data_actual,
            overhead,
            e_consume_predicted,
            e_predicted_next: e_round_start - e_consume_predicted,
            gamma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rda_node(schedule: Option<RdaSchedule>) -> NodeState {
        NodeState {
            id: 3,
            pos: crate::model::Position::new(0.0, 0.0),
            e_init: 2.0,
            e_now: 2.0,
            is_rda: schedule.is_some(),
            rda_schedule: schedule,
            is_malfunctioning: false,
            alive: true,
            rounds_since_head: 0,
            in_eligible_set: true,
            e_predicted_next: None,
        }
    }

    #[test]
    fn round_consumption_examples() {
        let r = RadioParams::default();
        let node = rda_node(Some(RdaSchedule {
            msgs_per_round: 5,
            msg_len_bits: 4000,
        }));
        let e = predict_round_consumption(&node, 50.0, &r).unwrap();
        assert!(((e - 6.0e-4) / 6.0e-4).abs() < 1e-12);
        let idle = rda_node(Some(RdaSchedule {
            msgs_per_round: 0,
            msg_len_bits: 4000,
        }));
        assert_eq!(predict_round_consumption(&idle, 50.0, &r).unwrap(), 0.0);
        assert!(predict_round_consumption(&rda_node(None), 50.0, &r).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(1.0, 1.0), Some(0.0));
        assert!((gamma(0.9, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!((gamma(1.1, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(gamma(1.0, 0.0), None);
    }

    #[test]
    fn suppression_rule() {
        assert!(should_suppress_broadcast(0.0, 1.0, false));
        assert!(!should_suppress_broadcast(1e-6, 1.0, false));
        assert!(should_suppress_broadcast(0.9, 0.0, false));
        assert!(should_suppress_broadcast(0.05, 0.93, false));
        assert!(!should_suppress_broadcast(0.08, 0.93, false));
        assert!(should_suppress_broadcast(0.5, 0.93, true));
        assert!(!should_suppress_broadcast(0.95, 0.93, true));
    }

    #[test]
    fn record_invariants() {
        let rec = PredictionRecord::close_round(1, 2.0, 6e-4, 9e-4, 1.2e-3);
        assert!(
            (rec.e_predicted_next - (rec.e_round_start - rec.e_consume_predicted)).abs() < 1e-15
        );
        let expected = (1.0 - rec.e_consume_predicted / 1.2e-3).abs();
        assert!((rec.gamma - expected).abs() < 1e-12);
        let exact = PredictionRecord::close_round(1, 2.0, 6e-4, 6e-4, 1.2e-3);
        assert_eq!(exact.gamma, 0.0);
    }
}
