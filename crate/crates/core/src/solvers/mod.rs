//! Solvers for `minimize ‖x‖∞ s.t. ‖y − D x‖₂ ≤ ε` and their duality-gap certificates.
//!
//! The Lagrange dual of `minimize ‖x‖_p s.t. ‖y − Dx‖₂ ≤ ε` is
//!
//! ```text
//! maximize Re(yᴴz) − ε‖z‖₂  s.t.  ‖Dᴴz‖_d ≤ 1
//! ```
//!
//! with `‖·‖_d` the dual norm of `‖·‖_p`. Any feasible `z` gives a lower bound on the
//! primal optimum and the bound is tight at the optimum, so every [`SolverResult`] carries
//! a rescaled dual point and the resulting gap.

mod cram;
mod cramp;
mod least_squares;

use serde::{Deserialize, Serialize};

use crate::frames::{BoundsMode, FrameBounds, FrameOperator};
use crate::prox::NormMode;
use crate::vecops::{inner, norm1, norm2, norm_inf};
use crate::{Error, Result, C64};

pub use cram::solve_cram;
pub use cramp::{solve_cramp, solve_douglas_rachford};
pub use least_squares::solve_least_squares;

/// How the slack variable `v` (with `‖v‖₂ ≤ ε`) is updated in CRAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlackUpdate {
    /// Projection of the whole vector onto the ℓ2 ball.
    #[default]
    L2Ball,
    /// Entry-wise projection onto disks of radius ε. Does not solve the ℓ2-constrained
    /// problem; only for comparison.
    EntrywiseDisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Approximation budget ε ≥ 0.
    pub epsilon: f64,
    /// Primal step. CRAM default: `0.99 / √(‖D‖² + 1)` scaled by `step_ratio`; CRAMP default:
    /// `‖x₀‖₁` for the minimum-norm warm start `x₀`.
    pub tau: Option<f64>,
    /// Dual step (CRAM only).
    pub sigma: Option<f64>,
    /// Ratio `τ/σ` used when both steps are left at their defaults.
    pub step_ratio: Option<f64>,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    /// Residual-balancing step adaptation (CRAM only).
    pub adaptive: bool,
    pub norm: NormMode,
    pub slack_update: SlackUpdate,
    /// Track `max_k ‖D x_k − y‖₂` over all CRAMP iterates (one extra transform per iteration).
    pub record_feasibility: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.0,
            tau: None,
            sigma: None,
            step_ratio: None,
            max_iters: 20_000,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            tol_gap: 1e-6,
            adaptive: false,
            norm: NormMode::Inf,
            slack_update: SlackUpdate::L2Ball,
            record_feasibility: false,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and ≥ 0");
        }
        for (name, v) in [("tau", self.tau), ("sigma", self.sigma), ("stepRatio", self.step_ratio)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive")));
                }
            }
        }
        if self.max_iters == 0 {
            return bad("maxIters must be ≥ 1");
        }
        for (name, v) in [
            ("tolPrimal", self.tol_primal),
            ("tolDual", self.tol_dual),
            ("tolGap", self.tol_gap),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Cram,
    Cramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverResult {
    pub algorithm: Algorithm,
    /// The representation.
    #[serde(skip)]
    pub x: Vec<C64>,
    /// Dual point, rescaled so that `‖Dᴴz‖_d ≤ 1`.
    #[serde(skip)]
    pub dual: Vec<C64>,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `primal − dual`; nonnegative up to roundoff when `x` is feasible.
    pub gap: f64,
    /// `‖D x − y‖₂`.
    pub residual_feasibility: f64,
    pub converged: bool,
    /// Largest `‖D x_k − y‖₂` seen over all iterates, when recorded.
    pub max_iterate_residual: Option<f64>,
    /// Final step sizes (σ is absent for CRAMP).
    pub tau: f64,
    pub sigma: Option<f64>,
    pub elapsed_seconds: f64,
}

impl SolverResult {
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.primal_objective.abs().max(1.0)
    }
}

/// Primal norm `p` selecting the dual constraint `‖Dᴴz‖_d ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimalNorm {
    L1,
    L2,
    Inf,
    InfTilde,
}

impl PrimalNorm {
    pub fn dual_norm(self, w: &[C64]) -> f64 {
        match self {
            PrimalNorm::L1 => norm_inf(w),
            PrimalNorm::L2 => norm2(w),
            PrimalNorm::Inf => norm1(w),
            PrimalNorm::InfTilde => crate::vecops::norm1_tilde(w),
        }
    }
}

impl From<NormMode> for PrimalNorm {
    fn from(m: NormMode) -> Self {
        match m {
            NormMode::Inf => PrimalNorm::Inf,
            NormMode::InfTilde => PrimalNorm::InfTilde,
        }
    }
}

/// Tolerance on `‖Dᴴz‖_d ≤ 1` accepted by [`dual_objective`].
pub const DUAL_FEASIBILITY_TOL: f64 = 1e-9;

/// `Re(yᴴz) − ε‖z‖₂` for a dual-feasible `z`.
pub fn dual_objective(
    frame: &FrameOperator,
    y: &[C64],
    z: &[C64],
    epsilon: f64,
    p: PrimalNorm,
) -> Result<f64> {
    Error::check_len(frame.rows(), y.len())?;
    let dz = frame.adjoint(z)?;
    let norm = p.dual_norm(&dz);
    if norm > 1.0 + DUAL_FEASIBILITY_TOL {
        return Err(Error::DualInfeasible { norm });
    }
    Ok(unchecked_dual_value(y, z, epsilon))
}

fn unchecked_dual_value(y: &[C64], z: &[C64], epsilon: f64) -> f64 {
    inner(z, y).re - epsilon * norm2(z)
}

/// Scales `z` onto the dual-feasible set, choosing the scale that maximizes the dual
/// objective along the ray (the objective is positively homogeneous). Falls back to
/// `z = 0` when the ray only offers negative values.
pub(crate) fn rescale_dual(
    y: &[C64],
    z: &[C64],
    dz: &[C64],
    epsilon: f64,
    p: PrimalNorm,
) -> (Vec<C64>, f64) {
    let norm = p.dual_norm(dz);
    if !(norm > 0.0) || !norm.is_finite() {
        return (vec![C64::new(0.0, 0.0); z.len()], 0.0);
    }
    let scaled: Vec<C64> = z.iter().map(|v| v / norm).collect();
    let value = unchecked_dual_value(y, &scaled, epsilon);
    if value > 0.0 {
        (scaled, value)
    } else {
        (vec![C64::new(0.0, 0.0); z.len()], 0.0)
    }
}

/// Post-hoc optimality report for a solver result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `(primal − dual) / max(1, primal)`.
    pub relative_gap: f64,
    pub certified: bool,
}

/// Rescales the result's dual point to feasibility, evaluates the dual objective and
/// compares it with the primal objective.
pub fn certify(
    result: &SolverResult,
    frame: &FrameOperator,
    y: &[C64],
    cfg: &SolverConfig,
) -> Result<GapReport> {
    let p = PrimalNorm::from(cfg.norm);
    let dz = frame.adjoint(&result.dual)?;
    let norm = p.dual_norm(&dz);
    let z: Vec<C64> = if norm > 1.0 {
        result.dual.iter().map(|v| v / norm).collect()
    } else {
        result.dual.clone()
    };
    let dual = dual_objective(frame, y, &z, cfg.epsilon, p)?;
    let primal = cfg.norm.value(&result.x);
    let relative_gap = (primal - dual) / primal.abs().max(1.0);
    Ok(GapReport {
        primal_objective: primal,
        dual_objective: dual,
        relative_gap,
        certified: relative_gap <= cfg.tol_gap,
    })
}

/// `B = ‖D‖₂²`: structural for DFT rows, exact eigenvalues for small frames, power iteration
/// otherwise.
pub(crate) fn upper_bound_for_steps(frame: &FrameOperator) -> Result<FrameBounds> {
    if frame.is_structurally_parseval() {
        return frame.certify_parseval();
    }
    if frame.rows() <= 512 {
        frame.frame_bounds(BoundsMode::Exact)
    } else {
        frame.frame_bounds(BoundsMode::Estimate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn row_frame() -> FrameOperator {
        FrameOperator::dense(DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0); 2])).unwrap()
    }

    #[test]
    fn analytic_one_by_two_dual() {
        let d = row_frame();
        let y = [C64::new(1.0, 0.0)];
        let v = dual_objective(&d, &y, &[C64::new(0.5, 0.0)], 0.0, PrimalNorm::Inf).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn infeasible_dual_rejected() {
        let d = row_frame();
        let y = [C64::new(1.0, 0.0)];
        assert!(matches!(
            dual_objective(&d, &y, &[C64::new(0.6, 0.0)], 0.0, PrimalNorm::Inf),
            Err(Error::DualInfeasible { .. })
        ));
        // the same point is feasible for the ℓ1 primal (dual norm ℓ∞)
        assert!(dual_objective(&d, &y, &[C64::new(0.6, 0.0)], 0.0, PrimalNorm::L1).is_ok());
    }

    #[test]
    fn epsilon_at_norm_gives_nonpositive_dual() {
        let d = row_frame();
        let y = [C64::new(0.8, 0.0)];
        for c in [0.0, 0.1, 0.5] {
            let v = dual_objective(&d, &y, &[y[0] * c], 0.8, PrimalNorm::Inf).unwrap();
            assert!(v <= 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.tau = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.max_iters = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_is_strict() {
        let ok: SolverConfig = serde_json::from_str(r#"{"epsilon": 0.1, "maxIters": 5}"#).unwrap();
        assert_eq!(ok.max_iters, 5);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"epsilom": 0.1}"#).is_err());
    }
}
