//! Approximately equiangular Parseval frames by alternating projection on the Gram matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_dims, FrameFamily, FrameMeta, FrameOperator};
use crate::{Error, Result, C64};

/// Relative distance to the Welch bound below which the construction counts as converged.
const WELCH_TARGET: f64 = 1e-3;

/// Diagnostics from [`build_equiangular_parseval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquiangularReport {
    /// Achieved maximum normalized off-diagonal Gram modulus.
    pub coherence: f64,
    pub welch_bound: f64,
    pub sweeps: usize,
    /// False when the best iterate is still more than 0.1% above the Welch bound.
    pub converged: bool,
}

/// Welch bound `μ = √((N − M) / (M (N − 1)))`; zero when `N = M` or `N = 1`.
pub fn welch_bound(n: usize, m: usize) -> f64 {
    if n <= 1 || n == m {
        return 0.0;
    }
    ((n - m) as f64 / (m as f64 * (n - 1) as f64)).sqrt()
}

fn coherence_of(g: &DMatrix<C64>) -> f64 {
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let gjj = g[(j, j)].re;
        for i in 0..j {
            let d = (g[(i, i)].re * gjj).sqrt();
            if d > 0.0 {
                worst = worst.max(g[(i, j)].norm() / d);
            }
        }
    }
    worst
}

/// Rank-`m` projection with the nonzero eigenvalues set to `level`; returns the Gram and
/// the `m` leading eigenvectors as columns.
fn spectral_projection(g: DMatrix<C64>, m: usize, level: f64) -> (DMatrix<C64>, DMatrix<C64>) {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let u = DMatrix::from_fn(n, m, |r, c| eig.eigenvectors[(r, order[c])]);
    let gram = (&u * u.adjoint()) * C64::new(level, 0.0);
    (gram, u)
}

/// Unit diagonal, Hermitian, off-diagonal moduli clamped to `mu` with phases kept.
fn structural_projection(g: &mut DMatrix<C64>, mu: f64) {
    let n = g.nrows();
    for j in 0..n {
        g[(j, j)] = C64::new(1.0, 0.0);
        for i in 0..j {
            let avg = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
            let r = avg.norm();
            let v = if r > mu { avg * (mu / r) } else { avg };
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
}

/// Alternating projection between unit-diagonal Gram matrices with off-diagonal moduli at
/// most the Welch bound and rank-`M` Gram matrices of tight frames. The best iterate (lowest
/// coherence) is factored and rescaled so that `D Dᴴ = I` exactly.
///
/// Running out of sweeps is not an error: the report's `converged` flag is cleared and the
/// frame metadata carries a warning.
pub fn build_equiangular_parseval<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
    iters: usize,
) -> Result<(FrameOperator, EquiangularReport)> {
    check_dims(n, m)?;
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be ≥ 1".into()));
    }
    let mu = welch_bound(n, m);
    let level = n as f64 / m as f64;

    let start = DMatrix::from_fn(n, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let q = start.qr().q();
    let mut gram = (&q * q.adjoint()) * C64::new(level, 0.0);

    let mut best_u = q;
    let mut best_coherence = coherence_of(&gram);
    let mut sweeps = 0;
    while sweeps < iters && best_coherence > mu * (1.0 + WELCH_TARGET) {
        structural_projection(&mut gram, mu);
        let (g, u) = spectral_projection(gram, m, level);
        gram = g;
        sweeps += 1;
        let c = coherence_of(&gram);
        if c < best_coherence {
            best_coherence = c;
            best_u = u;
        }
    }

    let converged = best_coherence <= mu * (1.0 + WELCH_TARGET);
    // Rows of Uᴴ are orthonormal: D Dᴴ = I, Dᴴ D = (M/N) G.
    let d = best_u.adjoint();
    let report = EquiangularReport {
        coherence: best_coherence,
        welch_bound: mu,
        sweeps,
        converged,
    };
    let frame = FrameOperator::dense_with_meta(
        d,
        FrameMeta {
            family: FrameFamily::EquiangularParseval,
            seed: None,
            coherence: Some(best_coherence),
            warning: (!converged).then(|| {
                format!(
                    "coherence {best_coherence:.6} after {sweeps} sweeps exceeds the Welch bound {mu:.6}"
                )
            }),
        },
    )?;
    Ok((frame, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::BoundsMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welch_values() {
        assert!((welch_bound(16, 8) - (8.0f64 / 120.0).sqrt()).abs() < 1e-15);
        assert_eq!(welch_bound(5, 5), 0.0);
    }

    #[test]
    fn square_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, _) = build_equiangular_parseval(6, 6, &mut rng, 3).unwrap();
        let b = d.frame_bounds(BoundsMode::Exact).unwrap();
        assert!(b.is_parseval(1e-10));
    }

    #[test]
    fn four_by_two_is_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, report) = build_equiangular_parseval(4, 2, &mut rng, 5000).unwrap();
        assert!(d.parseval_residual() <= 1e-8);
        assert!(report.coherence >= report.welch_bound * (1.0 - 1e-9));
    }

    #[test]
    fn sixteen_by_eight_near_welch() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (d, report) = build_equiangular_parseval(16, 8, &mut rng, 5000).unwrap();
        let mu = (8.0f64 / 120.0).sqrt();
        assert!((report.welch_bound - mu).abs() < 1e-12);
        assert!(report.coherence <= 1.05 * mu, "coherence {}", report.coherence);
        assert!(d.parseval_residual() <= 1e-10);
    }

    #[test]
    fn zero_iters_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_equiangular_parseval(4, 2, &mut rng, 0).is_err());
    }

    #[test]
    fn exhausted_sweeps_flag_warning() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (d, report) = build_equiangular_parseval(32, 5, &mut rng, 1).unwrap();
        if !report.converged {
            assert!(d.meta().warning.is_some());
        }
        assert!(d.parseval_residual() <= 1e-10);
    }
}
