//! Exhaustive uncertainty-principle check for tiny frames.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FrameOperator;
use crate::{Error, Result, C64};

/// Maximum number of supports enumerated by [`up_check_exhaustive`].
pub const UP_SUPPORT_BUDGET: u128 = 1_000_000;

/// `‖D x‖₂ ≤ η ‖x‖₂` for every `x` with `|supp(x)| ≤ ⌊δN⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpCertificate {
    pub eta: f64,
    pub delta: f64,
    pub exhaustive: bool,
    pub support_budget: usize,
    pub supports_checked: u128,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// `⌊δN⌋`, robust to `δN` landing a hair below an integer.
pub fn support_budget(n: usize, delta: f64) -> usize {
    ((delta * n as f64) + 1e-9).floor() as usize
}

/// Enumerates every support of size `⌊δN⌋` and returns the largest spectral norm of the
/// corresponding column submatrix. Supports of smaller size never give a larger norm, so
/// they are not enumerated separately.
pub fn up_check_exhaustive(frame: &FrameOperator, delta: f64) -> Result<UpCertificate> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let n = frame.cols();
    let k = support_budget(n, delta).min(n);
    let count = binomial(n, k);
    if count > UP_SUPPORT_BUDGET {
        return Err(Error::UpBudgetExceeded {
            supports: count,
            budget: UP_SUPPORT_BUDGET,
        });
    }
    let d = frame.to_dense();
    let gram = d.adjoint() * &d;
    let mut eta_sq: f64 = 0.0;
    if k > 0 {
        for support in (0..n).combinations(k) {
            let sub = DMatrix::<C64>::from_fn(k, k, |i, j| gram[(support[i], support[j])]);
            let top = SymmetricEigen::new(sub)
                .eigenvalues
                .iter()
                .copied()
                .fold(0.0, f64::max);
            eta_sq = eta_sq.max(top);
        }
    }
    Ok(UpCertificate {
        eta: eta_sq.sqrt(),
        delta,
        exhaustive: true,
        support_budget: k,
        supports_checked: if k > 0 { count } else { 0 },
    })
}
