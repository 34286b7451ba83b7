//! Minimum ℓ2-norm representations `minimize ‖x‖₂ s.t. ‖y − D x‖₂ ≤ ε`.

use nalgebra::{DVector, SymmetricEigen};

use crate::frames::FrameOperator;
use crate::vecops::norm2;
use crate::{Error, Result, C64};

/// Relative accuracy of the bisection on the regularization weight.
const RESIDUAL_RTOL: f64 = 1e-9;

/// `ε = 0`: `Dᴴ(DDᴴ)⁻¹y`. `0 < ε < ‖y‖₂`: `Dᴴ(DDᴴ + μI)⁻¹y` with `μ` chosen by bisection so
/// the residual equals `ε`. `ε ≥ ‖y‖₂`: zero.
pub fn solve_least_squares(frame: &FrameOperator, y: &[C64], epsilon: f64) -> Result<Vec<C64>> {
    Error::check_len(frame.rows(), y.len())?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be ≥ 0, got {epsilon}"
        )));
    }
    let y_norm = norm2(y);
    if epsilon >= y_norm {
        return Ok(vec![C64::new(0.0, 0.0); frame.cols()]);
    }

    if frame.is_structurally_parseval() {
        // D Dᴴ = I: residual of Dᴴ y/(1+μ) is μ/(1+μ)·‖y‖
        let shrink = 1.0 - epsilon / y_norm;
        let x = frame.adjoint(y)?;
        return Ok(x.into_iter().map(|v| v * shrink).collect());
    }

    if epsilon == 0.0 {
        let chol = frame.gram_cholesky()?;
        let s = chol.solve(&DVector::from_column_slice(y));
        return frame.adjoint(s.as_slice());
    }

    let eig = SymmetricEigen::new(frame.gram_rows());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::SingularGram);
    }
    let coeffs = eig.eigenvectors.ad_mul(&DVector::from_column_slice(y));
    let weights: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
    let residual = |mu: f64| -> f64 {
        eig.eigenvalues
            .iter()
            .zip(&weights)
            .map(|(&l, &w)| w * (mu / (l + mu)).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    // residual(μ) increases from 0 to ‖y‖; bracket then bisect
    let mut lo = 0.0;
    let mut hi = eig.eigenvalues.max().max(1e-300);
    while residual(hi) < epsilon {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if (r - epsilon).abs() <= RESIDUAL_RTOL * epsilon * 1e-3 || hi - lo <= f64::EPSILON * hi {
            lo = mid;
            hi = mid;
            break;
        }
        if r < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &l)| c / (l + mu)),
    );
    let s = &eig.eigenvectors * scaled;
    frame.adjoint(s.as_slice())
}
