use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Chance that another user picks the same training sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionQuery {
    /// Size of the hardware suite.
    pub n: usize,
    /// Length of the training sequence.
    pub k: usize,
}

/// `k = 0` gives 1, `k = 1` gives `1/n`, and longer sequences give
/// `∏_{i=1..k} 1/(n−i)`.
pub fn collision_probability(q: CollisionQuery) -> Result<f64> {
    if q.k >= q.n {
        return Err(Error::Config(format!("sequence length {} must be below the suite size {}", q.k, q.n)));
    }
    Ok(match q.k {
        0 => 1.0,
        1 => 1.0 / q.n as f64,
        k => (1..=k).map(|i| 1.0 / (q.n - i) as f64).product(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub n: usize,
    pub k: usize,
    pub probability: f64,
    /// How many times less likely a collision is than with one backend.
    pub reduction_vs_single: f64,
}

pub fn collision_report(q: CollisionQuery) -> Result<CollisionReport> {
    let p = collision_probability(q)?;
    let single = collision_probability(CollisionQuery { n: q.n, k: 1.min(q.n - 1) })?;
    Ok(CollisionReport {
        n: q.n,
        k: q.k,
        probability: p,
        reduction_vs_single: single / p,
    })
}
