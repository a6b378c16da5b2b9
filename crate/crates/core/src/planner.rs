//! Closed-form planning quantities for an ideally uniform deployment:
//! optimal head count, ideal cluster geometry and the ideal mean energy of
//! one member-to-head transmission.

use serde::{Deserialize, Serialize};

use crate::model::RadioParams;

/// Mean distance from a cluster head to the base station for a square
/// field with the BS at its centre.
pub fn d_to_bs(m_field: f64) -> f64 {
    0.765 * m_field / 2.0
}

/// Mean member-to-head distance for `k` clusters.
pub fn d_to_ch(m_field: f64, k: f64) -> f64 {
    m_field / (2.0 * std::f64::consts::PI * k).sqrt()
}

pub fn k_opt(n: usize, m_field: f64, radio: &RadioParams) -> f64 {
    let d = d_to_bs(m_field);
    (n as f64).sqrt() / (2.0 * std::f64::consts::PI).sqrt()
        * (radio.eps_fs / radio.eps_mp).sqrt()
        * m_field
        / (d * d)
}

/// Radius of a disc-shaped cluster when `k` clusters tile the field.
pub fn ideal_cluster_radius(m_field: f64, k: f64) -> f64 {
    m_field / (std::f64::consts::PI * k).sqrt()
}

/// Expected member counts inside (`m1`) and beyond (`m2`) the crossover
/// distance, plus their ratio. For clusters no wider than `d0` every
/// member is inside and the ratio is infinite.
pub fn ideal_member_counts(n: usize, k: f64, d_cluster: f64, d0: f64) -> (f64, f64, f64) {
    let per_cluster = n as f64 / k;
    if d_cluster <= d0 {
        return (per_cluster, 0.0, f64::INFINITY);
    }
    let lambda = d0 * d0 / (d_cluster * d_cluster - d0 * d0);
    let m1 = lambda * per_cluster / (lambda + 1.0);
    let m2 = per_cluster / (lambda + 1.0);
    (m1, m2, lambda)
}

/// Expected distance to the head for members inside and beyond `d0`.
pub fn expected_member_distances(d_cluster: f64, d0: f64) -> (f64, f64) {
    let inner = 2.0 / 3.0 * d0.min(d_cluster);
    let outer = if d_cluster > d0 {
        2.0 / 3.0 * (d_cluster - d0) + d0
    } else {
        0.0
    };
    (inner, outer)
}

/// Ideal geometry of the network, computed once per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealPlan {
    pub n: usize,
    pub d_to_bs: f64,
    pub d_to_ch: f64,
    pub d_cluster: f64,
    pub k_opt: f64,
    pub p_opt: f64,
    /// `k_opt / n` exceeded 1 and was clamped.
    pub p_opt_clamped: bool,
    pub lambda_ratio: f64,
    pub m1: f64,
    pub m2: f64,
    pub e_d1: f64,
    pub e_d2: f64,
    pub literal_distances: bool,
}

impl IdealPlan {
    pub fn new(n: usize, m_field: f64, radio: &RadioParams, literal_distances: bool) -> Self {
        let k = k_opt(n, m_field, radio);
        let raw_p = k / n as f64;
        let d_cluster = ideal_cluster_radius(m_field, k);
        let (m1, m2, lambda_ratio) = ideal_member_counts(n, k, d_cluster, radio.d0);
        let (e_d1, e_d2) = expected_member_distances(d_cluster, radio.d0);
        Self {
            n,
            d_to_bs: d_to_bs(m_field),
            d_to_ch: d_to_ch(m_field, k),
            d_cluster,
            k_opt: k,
            p_opt: raw_p.min(1.0),
            p_opt_clamped: raw_p > 1.0,
            lambda_ratio,
            m1,
            m2,
            e_d1,
            e_d2,
            literal_distances,
        }
    }

    /// Ideal mean energy of one `bits`-long member transmission.
    pub fn ideal_avg_tx_energy(&self, bits: f64, radio: &RadioParams) -> f64 {
        let (near, far) = if self.literal_distances {
            (self.e_d1, self.e_d2)
        } else {
            (self.e_d1.powi(2), self.e_d2.powi(4))
        };
        let per_cluster = self.n as f64 / self.k_opt;
        bits * (self.m1 * (radio.e_elec + radio.eps_fs * near)
            + self.m2 * (radio.e_elec + radio.eps_mp * far))
            / per_cluster
    }
}
