//! Douglas–Rachford splitting of `‖x‖∞ + χ{Dx = y}` for Parseval and tight frames.

use std::time::Instant;

use super::{rescale_dual, Algorithm, PrimalNorm, SolverConfig, SolverResult};
use crate::frames::FrameOperator;
use crate::prox::{AffineMode, AffineProjector};
use crate::prox::NormMode;
use crate::vecops::{all_finite, dist2, norm1, norm2, sign};
use crate::{Error, Result, C64};

/// Every iterate `x_k` is the output of the affine projection, so `D x_k = y` up to roundoff
/// no matter when the loop stops. The warm start is the minimum-norm solution `Π(0)`.
pub fn solve_cramp(frame: &FrameOperator, y: &[C64], cfg: &SolverConfig) -> Result<SolverResult> {
    let mode = if frame.is_structurally_parseval() {
        AffineMode::Parseval
    } else {
        AffineMode::Tight
    };
    solve_douglas_rachford(frame, y, cfg, mode)
}

/// The same splitting with an explicit projection formula. [`AffineMode::General`] accepts any
/// frame with `A > 0` at the price of a Cholesky solve per iteration; it keeps the exact
/// feasibility of every iterate, which the primal-dual method only reaches in the limit.
pub fn solve_douglas_rachford(
    frame: &FrameOperator,
    y: &[C64],
    cfg: &SolverConfig,
    mode: AffineMode,
) -> Result<SolverResult> {
    cfg.validate()?;
    Error::check_len(frame.rows(), y.len())?;
    if cfg.epsilon > 0.0 {
        return Err(Error::Unsupported(
            "the Douglas–Rachford solver handles ε = 0 only; use the primal-dual solver".into(),
        ));
    }
    let start = Instant::now();
    let proj = AffineProjector::new(frame, mode)?;
    let n = frame.cols();

    let p = PrimalNorm::from(cfg.norm);
    let residual_of = |x: &[C64]| -> Result<f64> { Ok(dist2(&frame.apply(x)?, y)) };

    let mut x = proj.project(&vec![C64::new(0.0, 0.0); n], y)?;
    // ‖Π(0)‖₁ tracks the scale of the problem; the prox removes that much ℓ1 mass per step
    let tau = cfg.tau.unwrap_or_else(|| {
        let l1 = norm1(&x);
        if l1 > 0.0 { l1 } else { 1.0 / (n as f64).sqrt() }
    });
    let mut z = x.clone();
    let mut max_resid = if cfg.record_feasibility {
        Some(residual_of(&x)?)
    } else {
        None
    };
    let mut objective = cfg.norm.value(&x);
    if frame.rows() == n {
        return Ok(square_solution(frame, y, &proj, x, cfg, tau, max_resid, start));
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut x_hat = x.clone();
    let mut z_at_hat = z.clone();

    for k in 0..cfg.max_iters {
        iterations = k + 1;
        x_hat = cfg.norm.prox(&z, tau)?.u;
        z_at_hat.clone_from(&z);
        let reflected: Vec<C64> = x_hat.iter().zip(&z).map(|(a, b)| a * 2.0 - b).collect();
        let x_new = proj.project(&reflected, y)?;
        if !all_finite(&x_new) {
            return Err(Error::Diverged { iteration: iterations });
        }
        let step = dist2(&x_new, &x_hat);
        let z_new: Vec<C64> = z
            .iter()
            .zip(&x_new)
            .zip(&x_hat)
            .map(|((zi, xi), hi)| zi + xi - hi)
            .collect();
        if let Some(worst) = max_resid.as_mut() {
            *worst = worst.max(residual_of(&x_new)?);
        }
        let new_objective = cfg.norm.value(&x_new);
        let change = (new_objective - objective).abs();
        let done = step <= cfg.tol_primal * norm2(&x_new)
            && change <= cfg.tol_gap * new_objective.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        objective = new_objective;
        z = z_new;
        if done {
            converged = true;
            break;
        }
    }

    // (z − x̂)/τ is a subgradient of the norm at x̂; at a fixed point it lies in the range of
    // Dᴴ, and (D Dᴴ)⁻¹ D maps it back to the dual variable.
    let g: Vec<C64> = z_at_hat
        .iter()
        .zip(&x_hat)
        .map(|(a, b)| (a - b) / tau)
        .collect();
    let dual = proj.solve_gram(frame.apply(&g)?)?;
    let dh = frame.adjoint(&dual)?;
    let (dual, dual_objective) = rescale_dual(y, &dual, &dh, 0.0, p);

    Ok(SolverResult {
        algorithm: Algorithm::Cramp,
        residual_feasibility: residual_of(&x)?,
        primal_objective: objective,
        dual_objective,
        gap: objective - dual_objective,
        x,
        dual,
        iterations,
        converged,
        max_iterate_residual: max_resid,
        tau,
        sigma: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Square frames have exactly one feasible point. The dual certificate is the dual-norm
/// maximizer `w` of `Re⟨x, w⟩` pulled back through `Dᴴ z = w`.
#[allow(clippy::too_many_arguments)]
fn square_solution(
    frame: &FrameOperator,
    y: &[C64],
    proj: &AffineProjector<'_>,
    x: Vec<C64>,
    cfg: &SolverConfig,
    tau: f64,
    max_iterate_residual: Option<f64>,
    start: Instant,
) -> SolverResult {
    let n = x.len();
    let zero = C64::new(0.0, 0.0);
    let mut w = vec![zero; n];
    match cfg.norm {
        NormMode::Inf => {
            if let Some((k, _)) = x.iter().enumerate().max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr())) {
                w[k] = sign(x[k]);
            }
        }
        NormMode::InfTilde => {
            let parts = x.iter().enumerate().flat_map(|(k, v)| [(k, v.re, false), (k, v.im, true)]);
            if let Some((k, v, imag)) = parts.max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
                let s = v.signum();
                w[k] = if imag { C64::new(0.0, s) } else { C64::new(s, 0.0) };
            }
        }
    }
    let p = PrimalNorm::from(cfg.norm);
    let (dual, dual_objective) = match frame.apply(&w).and_then(|dw| proj.solve_gram(dw)) {
        Ok(z) => match frame.adjoint(&z) {
            Ok(dh) => rescale_dual(y, &z, &dh, 0.0, p),
            Err(_) => (vec![zero; y.len()], 0.0),
        },
        Err(_) => (vec![zero; y.len()], 0.0),
    };
    let objective = cfg.norm.value(&x);
    SolverResult {
        algorithm: Algorithm::Cramp,
        residual_feasibility: dist2(&frame.apply(&x).unwrap_or_default(), y),
        primal_objective: objective,
        dual_objective,
        gap: objective - dual_objective,
        x,
        dual,
        iterations: 1,
        converged: true,
        max_iterate_residual,
        tau,
        sigma: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_gaussian, build_subsampled_dft};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn stacked_identity_example() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::zeros(2, 4);
        m[(0, 0)] = c(s);
        m[(0, 2)] = c(s);
        m[(1, 1)] = c(s);
        m[(1, 3)] = c(s);
        let d = FrameOperator::dense(m).unwrap();
        let y = [c(2f64.sqrt()), c(0.0)];
        let r = solve_cramp(&d, &y, &SolverConfig::default()).unwrap();
        assert!((r.primal_objective - 1.0).abs() < 1e-6);
        assert!((r.x[0] - c(1.0)).norm() < 1e-5 && (r.x[2] - c(1.0)).norm() < 1e-5);
        assert!((r.x[1] + r.x[3]).norm() < 1e-10);
        assert!(r.x[1].norm() <= 1.0 + 1e-8);
    }

    #[test]
    fn full_unitary_is_one_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = build_subsampled_dft(16, 16, &mut rng).unwrap();
        let y: Vec<C64> = (0..16)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let r = solve_cramp(&d, &y, &SolverConfig::default()).unwrap();
        assert!(dist2(&r.x, &d.adjoint(&y).unwrap()) <= 1e-12 * norm2(&y));
        assert!(r.converged);
        assert!(r.relative_gap().abs() <= 1e-12);
    }

    #[test]
    fn general_projection_matches_primal_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let d = build_gaussian(48, 20, &mut rng).unwrap();
            let y: Vec<C64> = (0..20)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let cfg = SolverConfig { tol_gap: 1e-9, tol_primal: 1e-10, ..SolverConfig::default() };
            let dr = solve_douglas_rachford(&d, &y, &cfg, AffineMode::General).unwrap();
            let pd = crate::solvers::solve_cram(&d, &y, &cfg).unwrap();
            assert!(dr.residual_feasibility <= 1e-10 * norm2(&y));
            assert!((dr.primal_objective - pd.primal_objective).abs() <= 1e-6 * pd.primal_objective);
            assert!(dr.relative_gap() <= 1e-6, "{} {} {}", dr.relative_gap(), dr.iterations, dr.converged);
        }
    }

    #[test]
    fn early_stop_is_still_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = build_subsampled_dft(64, 24, &mut rng).unwrap();
        let y: Vec<C64> = (0..24)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let cfg = SolverConfig {
            max_iters: 3,
            record_feasibility: true,
            ..SolverConfig::default()
        };
        let r = solve_cramp(&d, &y, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.residual_feasibility <= 1e-10 * norm2(&y));
        assert!(r.max_iterate_residual.unwrap() <= 1e-10 * norm2(&y));
    }

    #[test]
    fn rejects_epsilon_and_non_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = build_subsampled_dft(16, 8, &mut rng).unwrap();
        let y = vec![c(1.0); 8];
        assert!(matches!(
            solve_cramp(&d, &y, &SolverConfig::default().with_epsilon(0.1)),
            Err(Error::Unsupported(_))
        ));
        let g = build_gaussian(16, 8, &mut rng).unwrap();
        assert!(matches!(
            solve_cramp(&g, &y, &SolverConfig::default()),
            Err(Error::NotTight { .. })
        ));
    }
}
