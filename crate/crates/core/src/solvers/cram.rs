//! Primal-dual hybrid gradient for `‖x‖∞` minimization under an ℓ2 data constraint.
//!
//! Saddle-point form: `min_{x, v} max_λ ‖x‖∞ + χ_ε(v) + Re⟨D x − v − y, λ⟩` with the
//! stacked operator `K = [D, −I]`, so `‖K‖² = ‖D‖² + 1`.

use std::time::Instant;

use super::{rescale_dual, upper_bound_for_steps, Algorithm, PrimalNorm, SlackUpdate, SolverConfig, SolverResult};
use crate::frames::FrameOperator;
use crate::prox::{project_entrywise_disk, project_l2_ball, AffineMode, AffineProjector};
use crate::vecops::{all_finite, dist2, norm2};
use crate::{Error, Result, C64};

/// Upper limit on `τσ(‖D‖² + 1)` kept by the adaptive rule.
const ADAPTIVE_PRODUCT_CAP: f64 = 0.95;
/// Residual ratio that triggers an adaptive step change.
const BALANCE_RATIO: f64 = 10.0;

pub fn solve_cram(frame: &FrameOperator, y: &[C64], cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    Error::check_len(frame.rows(), y.len())?;
    let start = Instant::now();
    let (m, n) = (frame.rows(), frame.cols());
    let y_norm = norm2(y);
    let p = PrimalNorm::from(cfg.norm);
    let zero = C64::new(0.0, 0.0);

    let b = upper_bound_for_steps(frame)?.upper;
    let k_sq = b + 1.0;
    let (mut tau, mut sigma) = step_sizes(cfg, k_sq, n)?;

    if cfg.epsilon >= y_norm {
        // x = 0 is feasible and optimal
        return Ok(SolverResult {
            algorithm: Algorithm::Cram,
            x: vec![zero; n],
            dual: vec![zero; m],
            iterations: 0,
            primal_objective: 0.0,
            dual_objective: 0.0,
            gap: 0.0,
            residual_feasibility: y_norm,
            converged: true,
            max_iterate_residual: None,
            tau,
            sigma: Some(sigma),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
    }

    let slack = |w: &[C64]| match cfg.slack_update {
        SlackUpdate::L2Ball => project_l2_ball(w, cfg.epsilon),
        SlackUpdate::EntrywiseDisk => project_entrywise_disk(w, cfg.epsilon),
    };

    let mut x = vec![zero; n];
    let mut v = vec![zero; m];
    let mut lambda = vec![zero; m];
    let mut dx = vec![zero; m];
    let mut dh_lambda = vec![zero; n];

    let mut alpha = 0.5;
    let mut last_direction = 0i8;
    let mut converged = false;
    let mut iterations = 0;
    let mut best_dual: (Vec<C64>, f64) = (vec![zero; m], 0.0);

    let feas_tol = (cfg.epsilon * cfg.tol_primal).max(cfg.tol_primal * y_norm);

    for k in 0..cfg.max_iters {
        iterations = k + 1;

        // primal: x ← prox(x − τ Dᴴλ), v ← Proj(v + τ λ)
        let x_arg: Vec<C64> = x.iter().zip(&dh_lambda).map(|(a, g)| a - g * tau).collect();
        let x_new = cfg.norm.prox(&x_arg, tau)?.u;
        let v_arg: Vec<C64> = v.iter().zip(&lambda).map(|(a, l)| a + l * tau).collect();
        let v_new = slack(&v_arg);
        let dx_new = frame.apply(&x_new)?;

        // dual ascent at the extrapolated point 2·new − old
        let lambda_new: Vec<C64> = (0..m)
            .map(|i| {
                let kx_bar = (dx_new[i] * 2.0 - dx[i]) - (v_new[i] * 2.0 - v[i]);
                lambda[i] + (kx_bar - y[i]) * sigma
            })
            .collect();
        let dh_lambda_new = frame.adjoint(&lambda_new)?;

        if !all_finite(&x_new) || !all_finite(&lambda_new) {
            return Err(Error::Diverged { iteration: iterations });
        }

        // residuals of the primal-dual iteration
        let stationarity = {
            let px: f64 = (0..n)
                .map(|j| {
                    ((x[j] - x_new[j]) / tau - (dh_lambda[j] - dh_lambda_new[j])).norm_sqr()
                })
                .sum();
            let pv: f64 = (0..m)
                .map(|i| ((v[i] - v_new[i]) / tau + (lambda[i] - lambda_new[i])).norm_sqr())
                .sum();
            (px + pv).sqrt()
        };
        let dual_res = (0..m)
            .map(|i| {
                ((lambda[i] - lambda_new[i]) / sigma - ((dx[i] - dx_new[i]) - (v[i] - v_new[i])))
                    .norm_sqr()
            })
            .sum::<f64>()
            .sqrt();

        x = x_new;
        v = v_new;
        dx = dx_new;
        lambda = lambda_new;
        dh_lambda = dh_lambda_new;

        let feasibility = (0..m)
            .map(|i| (dx[i] - v[i] - y[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let primal = cfg.norm.value(&x);
        let neg: Vec<C64> = lambda.iter().map(|l| -l).collect();
        let neg_dh: Vec<C64> = dh_lambda.iter().map(|l| -l).collect();
        let candidate = rescale_dual(y, &neg, &neg_dh, cfg.epsilon, p);
        if candidate.1 >= best_dual.1 {
            best_dual = candidate;
        }
        let gap = primal - best_dual.1;

        let scale = norm2(&dh_lambda).max(f64::MIN_POSITIVE);
        if feasibility <= feas_tol
            && stationarity <= cfg.tol_dual * scale.max(1.0)
            && gap <= cfg.tol_gap * primal.abs().max(1.0)
        {
            converged = true;
            break;
        }

        if cfg.adaptive {
            let direction = if stationarity > BALANCE_RATIO * dual_res {
                1
            } else if dual_res > BALANCE_RATIO * stationarity {
                -1
            } else {
                0
            };
            if direction != 0 {
                if last_direction != 0 && direction != last_direction {
                    alpha *= 0.5;
                }
                let f = 1.0 + alpha;
                if direction > 0 {
                    tau *= f;
                    sigma /= f;
                } else {
                    tau /= f;
                    sigma *= f;
                }
                last_direction = direction;
            }
        }
    }

    if let Some(fixed) = restore_feasibility(frame, &x, y, cfg.epsilon) {
        x = fixed;
    }
    let primal = cfg.norm.value(&x);
    let residual = dist2(&frame.apply(&x)?, y);
    Ok(SolverResult {
        algorithm: Algorithm::Cram,
        x,
        dual: best_dual.0,
        iterations,
        primal_objective: primal,
        dual_objective: best_dual.1,
        gap: primal - best_dual.1,
        residual_feasibility: residual,
        converged,
        max_iterate_residual: None,
        tau,
        sigma: Some(sigma),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Largest row count for which the final correction factors `D Dᴴ` densely.
const CORRECTION_DENSE_ROWS: usize = 512;

/// The iterates satisfy the constraint only to tolerance, so the objective of the last one
/// can undercut the dual bound. Moves `x` by the minimum-norm correction
/// `−Dᴴ(DDᴴ)⁻¹ r (1 − ε/‖r‖)`, `r = Dx − y`, onto the constraint set when `DDᴴ` is cheap to
/// invert; returns `None` when `x` is already feasible or no cheap inverse exists.
fn restore_feasibility(frame: &FrameOperator, x: &[C64], y: &[C64], eps: f64) -> Option<Vec<C64>> {
    let mode = if frame.is_structurally_parseval() {
        AffineMode::Parseval
    } else if frame.rows() <= CORRECTION_DENSE_ROWS {
        AffineMode::General
    } else {
        return None;
    };
    let proj = AffineProjector::new(frame, mode).ok()?;
    let mut r = frame.apply(x).ok()?;
    r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= yi);
    let rn = norm2(&r);
    if rn <= eps {
        return None;
    }
    let shrink = 1.0 - eps / rn;
    let s = proj.solve_gram(r.into_iter().map(|v| v * shrink).collect()).ok()?;
    let c = frame.adjoint(&s).ok()?;
    let fixed: Vec<C64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
    all_finite(&fixed).then_some(fixed)
}

/// Chooses `(τ, σ)`; non-adaptive runs must satisfy `τσ‖K‖² < 1`.
fn step_sizes(cfg: &SolverConfig, k_sq: f64, n: usize) -> Result<(f64, f64)> {
    let budget = 0.99 / k_sq;
    let ratio = cfg.step_ratio.unwrap_or((n as f64).sqrt());
    let (tau, sigma) = match (cfg.tau, cfg.sigma) {
        (Some(t), Some(s)) => (t, s),
        (Some(t), None) => (t, budget / t),
        (None, Some(s)) => (budget / s, s),
        (None, None) => {
            let t = (budget * ratio).sqrt();
            (t, budget / t)
        }
    };
    let product = tau * sigma * k_sq;
    if product >= 1.0 {
        if !cfg.adaptive {
            return Err(Error::StepSizeCondition { product });
        }
        let shrink = (ADAPTIVE_PRODUCT_CAP / product).sqrt();
        return Ok((tau * shrink, sigma * shrink));
    }
    Ok((tau, sigma))
}
