//! Named parameter families used by the experiments and tests.

use crate::bias::BiasDistribution;
use crate::error::{Error, Result};

/// Base walk of the r-sweep: `p(e_1) = 2/5`, every other direction `1/5`.
pub fn figure2_base() -> BiasDistribution {
    BiasDistribution::new(2, &[0.4, 0.2, 0.2, 0.2]).expect("valid")
}

/// `p(e_1) = r/(r+3)`, every other direction `1/(r+3)`.
pub fn figure2_child(r: f64) -> Result<BiasDistribution> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("r = {r} must be positive")));
    }
    let z = r + 3.0;
    BiasDistribution::new(2, &[r / z, 1.0 / z, 1.0 / z, 1.0 / z])
}

/// Weight `γ` on `e_1..e_k`, weight 1 elsewhere, normalised.
pub fn canonical(d: usize, k: usize, gamma: f64) -> Result<BiasDistribution> {
    if k < 1 || k > d {
        return Err(Error::Domain(format!("k = {k} outside 1..={d}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must be positive")));
    }
    let z = 2.0 * d as f64 + k as f64 * (gamma - 1.0);
    let mut w = vec![1.0 / z; 2 * d];
    for j in 0..k {
        w[2 * j] = gamma / z;
    }
    BiasDistribution::new(d, &w)
}

/// A base walk in d = 2 with drift `e_1 / 2`.
pub fn half_e1_base() -> BiasDistribution {
    BiasDistribution::new(2, &[0.625, 0.125, 0.125, 0.125]).expect("valid")
}

/// `p(±e_1) = 1/4 ± ε`, `p(±e_2) = 1/4`; requires `0 < ε < 1/4`.
pub fn vanishing_bias(eps: f64) -> Result<BiasDistribution> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Domain(format!("epsilon = {eps} outside (0, 1/4)")));
    }
    BiasDistribution::new(2, &[0.25 + eps, 0.25 - eps, 0.25, 0.25])
}

/// `p(e_1) = ε/2`, `p(−e_1) = p(−e_2) = ε/4`, `p(e_2) = 1 − ε`; requires `0 < ε < 1`.
pub fn trap_drift_bias(eps: f64) -> Result<BiasDistribution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon = {eps} outside (0, 1)")));
    }
    BiasDistribution::new(2, &[eps / 2.0, eps / 4.0, 1.0 - eps, eps / 4.0])
}

/// `ε_i = 2^{-(i+2)}` for `i = 1..=n`, the largest dyadic choice inside `(0, 1/4)`.
pub fn vanishing_bias_sequence(n: usize) -> Vec<BiasDistribution> {
    (1..=n)
        .map(|i| vanishing_bias(0.5f64.powi(i as i32 + 2)).expect("epsilon in range"))
        .collect()
}

/// `ε_i = 2^{-i}` for `i = 1..=n`.
pub fn trap_drift_sequence(n: usize) -> Vec<BiasDistribution> {
    (1..=n)
        .map(|i| trap_drift_bias(0.5f64.powi(i as i32)).expect("epsilon in range"))
        .collect()
}

/// Diagonal base walk `p(e_1) = p(e_2) = 1/4 + ε`, `p(−e_1) = p(−e_2) = 1/4 − ε`.
pub fn diagonal_base(eps: f64) -> Result<BiasDistribution> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Domain(format!("epsilon = {eps} outside (0, 1/4)")));
    }
    BiasDistribution::new(2, &[0.25 + eps, 0.25 - eps, 0.25 + eps, 0.25 - eps])
}

/// Child whose drift agrees with the diagonal base but whose log-odds direction opposes it.
pub fn wrong_way_child() -> BiasDistribution {
    BiasDistribution::from_strs(2, &["15/25", "5/25", "1/25", "4/25"]).expect("valid")
}

/// [`wrong_way_child`] rotated by a half turn.
pub fn wrong_way_child_rotated() -> BiasDistribution {
    BiasDistribution::from_strs(2, &["5/25", "15/25", "4/25", "1/25"]).expect("valid")
}
