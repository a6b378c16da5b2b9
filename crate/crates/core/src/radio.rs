//! First-order radio energy model and RSS-based ranging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RadioParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmpBranch {
    FreeSpace,
    Multipath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxCost {
    pub joules: f64,
    pub branch: AmpBranch,
}

/// Energy to transmit `bits` over `distance` metres. The multipath
/// amplifier applies from `d0` inclusive.
pub fn tx_energy(bits: f64, distance: f64, radio: &RadioParams) -> Result<TxCost> {
    if !(bits >= 0.0) {
        return Err(Error::Contract(format!("message length {bits} < 0")));
    }
    if !(distance >= 0.0) {
        return Err(Error::Contract(format!("distance {distance} < 0")));
    }
    Ok(tx_cost(bits, distance, radio))
}

/// Unchecked variant of [`tx_energy`] for callers that already hold valid
/// inputs.
pub(crate) fn tx_cost(bits: f64, distance: f64, radio: &RadioParams) -> TxCost {
    if distance < radio.d0 {
        TxCost {
            joules: bits * radio.e_elec + bits * radio.eps_fs * distance * distance,
            branch: AmpBranch::FreeSpace,
        }
    } else {
        TxCost {
            joules: bits * radio.e_elec + bits * radio.eps_mp * distance.powi(4),
            branch: AmpBranch::Multipath,
        }
    }
}

pub fn rx_energy(bits: f64, radio: &RadioParams) -> Result<f64> {
    if !(bits >= 0.0) {
        return Err(Error::Contract(format!("message length {bits} < 0")));
    }
    Ok(bits * radio.e_elec)
}

/// Energy reaching a receiver `distance` metres away: `K * e_tran / d^alpha`.
pub fn received_power(e_tran: f64, distance: f64, radio: &RadioParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Contract(format!(
            "received power needs a positive distance, got {distance}"
        )));
    }
    Ok(radio.k_rss * e_tran / distance.powf(radio.alpha_pathloss))
}

/// Inverse of [`received_power`].
pub fn estimate_distance(e_tran: f64, e_rec: f64, radio: &RadioParams) -> Result<f64> {
    if !(e_rec > 0.0) {
        return Err(Error::Unreachable(e_rec));
    }
    if !(e_tran > 0.0) {
        return Err(Error::Contract(format!(
            "transmit energy must be positive, got {e_tran}"
        )));
    }
    Ok((radio.k_rss * e_tran / e_rec).powf(1.0 / radio.alpha_pathloss))
}
