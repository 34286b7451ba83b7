//! Proximal and projection kernels shared by the solvers.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::frames::{FrameBounds, FrameOperator, PARSEVAL_TOL};
use crate::vecops::{modulus, norm1, norm1_tilde, norm2, norm_inf, norm_inf_tilde, sign};
use crate::{Error, Result, C64};

/// Output of the ℓ∞ proximal operator: the clamped vector and the clamp level `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub u: Vec<C64>,
    pub alpha: f64,
}

/// Objective norm used by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    #[default]
    Inf,
    /// `max(‖Re x‖∞, ‖Im x‖∞)`.
    InfTilde,
}

impl NormMode {
    pub fn value(self, x: &[C64]) -> f64 {
        match self {
            NormMode::Inf => norm_inf(x),
            NormMode::InfTilde => norm_inf_tilde(x),
        }
    }

    /// The dual norm, used for dual feasibility of certificates.
    pub fn dual_value(self, x: &[C64]) -> f64 {
        match self {
            NormMode::Inf => norm1(x),
            NormMode::InfTilde => norm1_tilde(x),
        }
    }

    pub fn prox(self, z: &[C64], tau: f64) -> Result<ProxResult> {
        match self {
            NormMode::Inf => prox_inf(z, tau),
            NormMode::InfTilde => prox_inf_tilde(z, tau),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tau must be a finite nonnegative number, got {tau}"
        )))
    }
}

/// Clamp level `α = max(0, max_k (Σ_{i≤k} s_i − τ) / k)` over the moduli sorted descending.
///
/// `τ` enters the running sum once, not once per term: `α` is the water level of the
/// projection of `z` onto the ℓ1 ball of radius `τ`. Instead of sorting, the level is found by
/// averaging over an active set and dropping entries at or below the current level until the
/// set is stable; the level only increases, and every pass is linear in the active set. Near
/// a solution almost all entries sit at the level, which makes sorting the slow choice.
fn clamp_level(mut moduli: Vec<f64>, tau: f64) -> f64 {
    loop {
        if moduli.is_empty() {
            return 0.0;
        }
        let sum: f64 = moduli.iter().sum();
        let level = (sum - tau) / moduli.len() as f64;
        if level <= 0.0 {
            return 0.0;
        }
        let before = moduli.len();
        moduli.retain(|&s| s > level);
        if moduli.len() == before {
            return level;
        }
    }
}

fn clamp_moduli(z: &[C64], moduli: &[f64], alpha: f64) -> Vec<C64> {
    z.iter()
        .zip(moduli)
        .map(|(&v, &a)| if a > alpha { v * (alpha / a) } else { v })
        .collect()
}

/// `argmin_x ‖x‖∞ + (1/2τ)‖x − z‖₂²`: moduli above the level `α` are clamped to `α` with
/// their phases kept. `τ = 0` is the identity with `α = ‖z‖∞`.
pub fn prox_inf(z: &[C64], tau: f64) -> Result<ProxResult> {
    check_tau(tau)?;
    if tau == 0.0 || z.is_empty() {
        return Ok(ProxResult {
            u: z.to_vec(),
            alpha: norm_inf(z),
        });
    }
    let moduli: Vec<f64> = z.iter().map(|&v| modulus(v)).collect();
    let alpha = clamp_level(moduli.clone(), tau);
    Ok(ProxResult {
        u: clamp_moduli(z, &moduli, alpha),
        alpha,
    })
}

/// Prox of `max(‖Re x‖∞, ‖Im x‖∞)`: the real ℓ∞ prox applied to the `2N` real and
/// imaginary parts jointly.
pub fn prox_inf_tilde(z: &[C64], tau: f64) -> Result<ProxResult> {
    check_tau(tau)?;
    if tau == 0.0 || z.is_empty() {
        return Ok(ProxResult {
            u: z.to_vec(),
            alpha: norm_inf_tilde(z),
        });
    }
    let parts = z.iter().flat_map(|v| [v.re.abs(), v.im.abs()]).collect();
    let alpha = clamp_level(parts, tau);
    let clip = |t: f64| t.clamp(-alpha, alpha);
    Ok(ProxResult {
        u: z.iter().map(|v| C64::new(clip(v.re), clip(v.im))).collect(),
        alpha,
    })
}

/// Euclidean projection onto `{v : ‖v‖₂ ≤ ε}`.
pub fn project_l2_ball(w: &[C64], eps: f64) -> Vec<C64> {
    if eps <= 0.0 {
        return vec![C64::new(0.0, 0.0); w.len()];
    }
    let n = norm2(w);
    if n <= eps {
        w.to_vec()
    } else {
        w.iter().map(|v| v * (eps / n)).collect()
    }
}

/// Per-entry projection onto disks of radius `ε`, i.e. the literal element-wise reading of
/// the v-update `ε w ./ max(|w|, ε)`. Kept for A/B comparison with [`project_l2_ball`].
pub fn project_entrywise_disk(w: &[C64], eps: f64) -> Vec<C64> {
    if eps <= 0.0 {
        return vec![C64::new(0.0, 0.0); w.len()];
    }
    w.iter().map(|&v| v * (eps / modulus(v).max(eps))).collect()
}

/// Euclidean projection onto `{v : Σ|v_k| ≤ radius}`, soft-thresholding the moduli by the
/// water-filling level and keeping phases.
pub fn project_l1_ball(z: &[C64], radius: f64) -> Result<Vec<C64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if norm1(z) <= radius {
        return Ok(z.to_vec());
    }
    let mut s: Vec<f64> = z.iter().map(|&v| modulus(v)).collect();
    s.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut sum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in s.iter().enumerate() {
        sum += v;
        let t = (sum - radius) / (k + 1) as f64;
        if v > t {
            theta = t;
        } else {
            break;
        }
    }
    Ok(z
        .iter()
        .map(|&v| sign(v) * (modulus(v) - theta).max(0.0))
        .collect())
}

/// Which formula to use for the projection onto `{x : D x = y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffineMode {
    /// `x − Dᴴ(Dx − y)`; requires `D Dᴴ = I`.
    Parseval,
    /// `x − A⁻¹ Dᴴ(Dx − y)`; requires `A = B`.
    Tight,
    /// `x − Dᴴ (D Dᴴ)⁻¹ (Dx − y)` via a cached Cholesky factor.
    General,
}

/// Projection onto the affine set `{x : D x = y}`, validated once for its frame.
pub struct AffineProjector<'a> {
    frame: &'a FrameOperator,
    mode: AffineMode,
    inv_a: f64,
}

impl<'a> AffineProjector<'a> {
    pub fn new(frame: &'a FrameOperator, mode: AffineMode) -> Result<Self> {
        let mut inv_a = 1.0;
        match mode {
            AffineMode::Parseval => {
                frame.certify_parseval()?;
            }
            AffineMode::Tight => {
                let b: FrameBounds = if frame.is_structurally_parseval() {
                    frame.certify_parseval()?
                } else {
                    frame.frame_bounds(crate::frames::BoundsMode::Exact)?
                };
                if !b.is_tight(PARSEVAL_TOL) {
                    return Err(Error::NotTight {
                        lower: b.lower,
                        upper: b.upper,
                    });
                }
                inv_a = 1.0 / b.lower;
            }
            AffineMode::General => {
                frame.gram_cholesky()?;
            }
        }
        Ok(AffineProjector { frame, mode, inv_a })
    }

    pub fn mode(&self) -> AffineMode {
        self.mode
    }

    /// `1/A` for tight mode, 1 otherwise.
    pub fn inverse_lower_bound(&self) -> f64 {
        self.inv_a
    }

    /// `(D Dᴴ)⁻¹ r` using the structure recorded for this projector.
    pub fn solve_gram(&self, r: Vec<C64>) -> Result<Vec<C64>> {
        Error::check_len(self.frame.rows(), r.len())?;
        Ok(match self.mode {
            AffineMode::Parseval => r,
            AffineMode::Tight => r.into_iter().map(|v| v * self.inv_a).collect(),
            AffineMode::General => {
                let chol = self.frame.gram_cholesky()?;
                chol.solve(&DVector::from_vec(r)).as_slice().to_vec()
            }
        })
    }

    pub fn project(&self, x: &[C64], y: &[C64]) -> Result<Vec<C64>> {
        Error::check_len(self.frame.rows(), y.len())?;
        let mut r = self.frame.apply(x)?;
        r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= yi);
        let s = self.solve_gram(r)?;
        let c = self.frame.adjoint(&s)?;
        Ok(x.iter().zip(&c).map(|(a, b)| a - b).collect())
    }
}

/// Euclidean projection of `x` onto `{x : D x = y}`.
pub fn project_affine(
    frame: &FrameOperator,
    x: &[C64],
    y: &[C64],
    mode: AffineMode,
) -> Result<Vec<C64>> {
    AffineProjector::new(frame, mode)?.project(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_gaussian, build_subsampled_dft};
    use crate::vecops::dist2;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn prox_examples() {
        let r = prox_inf(&[c(3.0, 0.0), c(1.0, 0.0)], 1.0).unwrap();
        assert!(close(&r.u, &[c(2.0, 0.0), c(1.0, 0.0)], 1e-15));
        assert_eq!(r.alpha, 2.0);

        let r = prox_inf(&[c(0.3, 0.0), c(0.2, 0.0)], 1.0).unwrap();
        assert!(close(&r.u, &[c(0.0, 0.0); 2], 0.0));
        assert_eq!(r.alpha, 0.0);

        let r = prox_inf(&[c(0.0, 3.0), c(1.0, 0.0)], 1.0).unwrap();
        assert!(close(&r.u, &[c(0.0, 2.0), c(1.0, 0.0)], 1e-15));
    }

    #[test]
    fn prox_tau_zero_is_identity() {
        let z = [c(1.0, -2.0), c(0.5, 0.0)];
        let r = prox_inf(&z, 0.0).unwrap();
        assert_eq!(r.u, z.to_vec());
        assert_eq!(r.alpha, 5f64.sqrt());
        assert_eq!(prox_inf_tilde(&z, 0.0).unwrap().u, z.to_vec());
    }

    #[test]
    fn prox_rejects_negative_tau() {
        assert!(prox_inf(&[c(1.0, 0.0)], -1.0).is_err());
        assert!(prox_inf_tilde(&[c(1.0, 0.0)], -0.1).is_err());
        assert!(prox_inf(&[c(1.0, 0.0)], f64::NAN).is_err());
    }

    #[test]
    fn prox_level_with_many_near_ties() {
        // hundreds of entries end up clamped, as near a solution
        let mut z: Vec<C64> = (0..500).map(|k| c(10.0 + 1e-3 * k as f64, 0.0)).collect();
        z.extend((0..500).map(|_| c(0.1, 0.0)));
        let r = prox_inf(&z, 1.0).unwrap();
        let mut s: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let mut sum = 0.0;
        let mut best = f64::NEG_INFINITY;
        for (k, v) in s.iter().enumerate() {
            sum += v;
            best = best.max((sum - 1.0) / (k + 1) as f64);
        }
        assert!((r.alpha - best.max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn tilde_examples() {
        let r = prox_inf_tilde(&[c(3.0, 1.0)], 1.0).unwrap();
        assert!(close(&r.u, &[c(2.0, 1.0)], 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z: Vec<C64> = (0..9).map(|_| c(rng.sample(StandardNormal), 0.0)).collect();
        let a = prox_inf_tilde(&z, 0.7).unwrap();
        let b = prox_inf(&z, 0.7).unwrap();
        assert!(close(&a.u, &b.u, 1e-14));
    }

    #[test]
    fn l2_ball_examples() {
        let w = [c(0.3, 0.0), c(0.0, 0.4)];
        assert_eq!(project_l2_ball(&w, 1.0), w.to_vec());
        let p = project_l2_ball(&[c(3.0, 0.0), c(4.0, 0.0)], 1.0);
        assert!(close(&p, &[c(0.6, 0.0), c(0.8, 0.0)], 1e-15));
        assert_eq!(project_l2_ball(&w, 0.0), vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn entrywise_disk_clips_each_entry() {
        let p = project_entrywise_disk(&[c(3.0, 0.0), c(0.0, 0.5)], 1.0);
        assert!(close(&p, &[c(1.0, 0.0), c(0.0, 0.5)], 1e-15));
    }

    #[test]
    fn l1_ball_examples() {
        let z = [c(0.2, 0.0), c(0.0, -0.3)];
        assert_eq!(project_l1_ball(&z, 1.0).unwrap(), z.to_vec());
        let p = project_l1_ball(&[c(3.0, 0.0), c(1.0, 0.0)], 1.0).unwrap();
        assert!(close(&p, &[c(1.0, 0.0), c(0.0, 0.0)], 1e-15));
        assert!(project_l1_ball(&z, 0.0).is_err());
    }

    #[test]
    fn moreau_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            let z = rand_vec(&mut rng, n);
            let tau: f64 = rng.gen_range(0.01..5.0);
            let p = prox_inf(&z, tau).unwrap().u;
            let q = project_l1_ball(&z.iter().map(|v| v / tau).collect::<Vec<_>>(), 1.0).unwrap();
            for k in 0..n {
                assert!((z[k] - (p[k] + q[k] * tau)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn affine_rank_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = FrameOperator::dense(DMatrix::from_row_slice(1, 2, &[c(s, 0.0), c(s, 0.0)])).unwrap();
        let y = [c(2f64.sqrt(), 0.0)];
        let x = project_affine(&d, &[c(0.0, 0.0); 2], &y, AffineMode::Parseval).unwrap();
        assert!(close(&x, &[c(1.0, 0.0), c(1.0, 0.0)], 1e-15));
        let g = project_affine(&d, &[c(0.0, 0.0); 2], &y, AffineMode::General).unwrap();
        assert!(close(&g, &x, 1e-14));
    }

    #[test]
    fn affine_fixed_point_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dft = build_subsampled_dft(32, 12, &mut rng).unwrap();
        let gauss = build_gaussian(20, 8, &mut rng).unwrap();
        for (frame, mode) in [(&dft, AffineMode::Parseval), (&gauss, AffineMode::General)] {
            let proj = AffineProjector::new(frame, mode).unwrap();
            let y = rand_vec(&mut rng, frame.rows());
            let x = rand_vec(&mut rng, frame.cols());
            let p = proj.project(&x, &y).unwrap();
            let resid = dist2(&frame.apply(&p).unwrap(), &y);
            assert!(resid <= 1e-10 * norm2(&y));
            let pp = proj.project(&p, &y).unwrap();
            assert!(dist2(&p, &pp) <= 1e-12 * (1.0 + norm2(&p)));
        }
    }

    #[test]
    fn parseval_mode_rejects_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gauss = build_gaussian(20, 8, &mut rng).unwrap();
        assert!(matches!(
            AffineProjector::new(&gauss, AffineMode::Parseval),
            Err(Error::NotParseval { .. })
        ));
        assert!(matches!(
            AffineProjector::new(&gauss, AffineMode::Tight),
            Err(Error::NotTight { .. })
        ));
    }

    #[test]
    fn tight_mode_scales_by_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = build_subsampled_dft(16, 6, &mut rng).unwrap().to_dense();
        let scaled = FrameOperator::dense(base * c(2.0, 0.0)).unwrap();
        let y = rand_vec(&mut rng, 6);
        let x = rand_vec(&mut rng, 16);
        let t = project_affine(&scaled, &x, &y, AffineMode::Tight).unwrap();
        let g = project_affine(&scaled, &x, &y, AffineMode::General).unwrap();
        assert!(close(&t, &g, 1e-12));
    }

    #[test]
    fn singular_gram_rejected() {
        let d = FrameOperator::dense(DMatrix::from_row_slice(
            2,
            3,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap();
        assert!(matches!(
            AffineProjector::new(&d, AffineMode::General),
            Err(Error::SingularGram)
        ));
    }
}
