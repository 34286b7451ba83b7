//! Frame operators `D ∈ ℂᴹˣᴺ` (dense or FFT-backed) and their frame properties.
//!
//! All DFT-backed frames use the unitary convention `F[k, n] = e^{-2πi kn/L} / √L`,
//! so any subset of rows is a Parseval frame (`D Dᴴ = I`).

mod equiangular;
mod uncertainty;

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::vecops::{inner, norm2};
use crate::{Error, Result, C64};

pub use equiangular::{build_equiangular_parseval, welch_bound, EquiangularReport};
pub use uncertainty::{up_check_exhaustive, UpCertificate, UP_SUPPORT_BUDGET};

/// Largest `M` for which dense eigen-decompositions of `D Dᴴ` are attempted.
pub const DENSE_CAP: usize = 2048;

/// Parseval tolerance used to certify `A = B = 1`.
pub const PARSEVAL_TOL: f64 = 1e-8;

const POWER_SEED: u64 = 0x5eed_f7a3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Dense,
    SubsampledDft,
    OversampledDftToneMap,
}

/// How a frame was generated; carried in descriptors for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameFamily {
    Explicit,
    SubsampledDft,
    Gaussian,
    EquiangularParseval,
    ToneReservation,
}

#[derive(Clone)]
enum Backing {
    Dense(DMatrix<C64>),
    Dft(DftRows),
}

#[derive(Clone)]
struct DftRows {
    omega: Vec<usize>,
    len: usize,
    oversampling: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl DftRows {
    fn new(len: usize, omega: Vec<usize>, oversampling: usize) -> Self {
        let mut planner = FftPlanner::new();
        DftRows {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            omega,
            len,
            oversampling,
        }
    }
}

#[derive(Default)]
struct FrameCache {
    exact_bounds: OnceLock<FrameBounds>,
    gram_cholesky: OnceLock<Option<Cholesky<C64, Dyn>>>,
}

/// Generation metadata attached to a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub family: FrameFamily,
    pub seed: Option<u64>,
    /// Maximum normalized off-diagonal Gram entry, when the constructor measured it.
    pub coherence: Option<f64>,
    /// Set when an iterative constructor stopped before meeting its target.
    pub warning: Option<String>,
}

/// A linear map `D: ℂᴺ → ℂᴹ` with `M ≤ N`.
///
/// Immutable after construction; cached factorizations are initialized once and shared
/// between clones, so a frame can be used from several threads at once.
#[derive(Clone)]
pub struct FrameOperator {
    rows: usize,
    cols: usize,
    backing: Backing,
    meta: FrameMeta,
    cache: Arc<FrameCache>,
}

impl fmt::Debug for FrameOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameOperator")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("kind", &self.kind())
            .field("meta", &self.meta)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMethod {
    ExactEig,
    PowerIteration,
}

/// Tightest constants with `A‖w‖² ≤ ‖Dᴴw‖² ≤ B‖w‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundsMethod,
}

impl FrameBounds {
    pub fn is_parseval(&self, tol: f64) -> bool {
        (self.lower - 1.0).abs() <= tol && (self.upper - 1.0).abs() <= tol
    }

    pub fn is_tight(&self, tol: f64) -> bool {
        self.lower > 0.0 && (self.upper - self.lower).abs() <= tol * self.upper
    }

    /// `‖D‖₂ = √B`.
    pub fn spectral_norm(&self) -> f64 {
        self.upper.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMode {
    Exact,
    Estimate,
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimensions(format!(
            "M and N must be positive (M = {m}, N = {n})"
        )));
    }
    if m > n {
        return Err(Error::InvalidDimensions(format!(
            "M = {m} exceeds N = {n}"
        )));
    }
    Ok(())
}

impl FrameOperator {
    /// Wraps an explicit `M × N` matrix.
    pub fn dense(matrix: DMatrix<C64>) -> Result<Self> {
        Self::dense_with_meta(
            matrix,
            FrameMeta {
                family: FrameFamily::Explicit,
                seed: None,
                coherence: None,
                warning: None,
            },
        )
    }

    pub(crate) fn dense_with_meta(matrix: DMatrix<C64>, meta: FrameMeta) -> Result<Self> {
        check_dims(matrix.ncols(), matrix.nrows())?;
        Ok(FrameOperator {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
            backing: Backing::Dense(matrix),
            meta,
            cache: Arc::default(),
        })
    }

    /// Rows `omega` of the unitary `len`-point DFT.
    ///
    /// `oversampling > 1` marks a tone map onto an oversampled grid; the operator itself is
    /// the same row selection either way.
    pub fn dft_rows(len: usize, omega: Vec<usize>, oversampling: usize) -> Result<Self> {
        check_dims(len, omega.len())?;
        if oversampling == 0 {
            return Err(Error::InvalidParameter("oversampling must be ≥ 1".into()));
        }
        let mut seen = vec![false; len];
        for &k in &omega {
            if k >= len {
                return Err(Error::InvalidParameter(format!(
                    "row index {k} out of range for a {len}-point DFT"
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidParameter(format!("duplicate row index {k}")));
            }
        }
        let family = if oversampling > 1 {
            FrameFamily::ToneReservation
        } else {
            FrameFamily::SubsampledDft
        };
        Ok(FrameOperator {
            rows: omega.len(),
            cols: len,
            backing: Backing::Dft(DftRows::new(len, omega, oversampling)),
            meta: FrameMeta {
                family,
                seed: None,
                coherence: None,
                warning: None,
            },
            cache: Arc::default(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Redundancy `λ = N / M`.
    pub fn redundancy(&self) -> f64 {
        self.cols as f64 / self.rows as f64
    }

    pub fn kind(&self) -> FrameKind {
        match &self.backing {
            Backing::Dense(_) => FrameKind::Dense,
            Backing::Dft(d) if d.oversampling > 1 => FrameKind::OversampledDftToneMap,
            Backing::Dft(_) => FrameKind::SubsampledDft,
        }
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    pub(crate) fn with_meta(mut self, meta: FrameMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Selected DFT rows, for FFT-backed kinds.
    pub fn tone_indices(&self) -> Option<&[usize]> {
        match &self.backing {
            Backing::Dft(d) => Some(&d.omega),
            Backing::Dense(_) => None,
        }
    }

    pub fn oversampling(&self) -> usize {
        match &self.backing {
            Backing::Dft(d) => d.oversampling,
            Backing::Dense(_) => 1,
        }
    }

    pub fn dense_matrix(&self) -> Option<&DMatrix<C64>> {
        match &self.backing {
            Backing::Dense(m) => Some(m),
            Backing::Dft(_) => None,
        }
    }

    /// True when `D Dᴴ = I` holds by construction (DFT row selections).
    pub fn is_structurally_parseval(&self) -> bool {
        matches!(self.backing, Backing::Dft(_))
    }

    /// `D x`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        Error::check_len(self.cols, x.len())?;
        Ok(match &self.backing {
            Backing::Dense(m) => {
                let v = m * DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
            Backing::Dft(d) => {
                let mut buf = x.to_vec();
                d.forward.process(&mut buf);
                let s = 1.0 / (d.len as f64).sqrt();
                d.omega.iter().map(|&k| buf[k] * s).collect()
            }
        })
    }

    /// `Dᴴ z`.
    pub fn adjoint(&self, z: &[C64]) -> Result<Vec<C64>> {
        Error::check_len(self.rows, z.len())?;
        Ok(match &self.backing {
            Backing::Dense(m) => {
                let v = m.ad_mul(&DVector::from_column_slice(z));
                v.as_slice().to_vec()
            }
            Backing::Dft(d) => {
                let mut buf = vec![C64::new(0.0, 0.0); d.len];
                for (&k, &v) in d.omega.iter().zip(z) {
                    buf[k] = v;
                }
                d.inverse.process(&mut buf);
                let s = 1.0 / (d.len as f64).sqrt();
                buf.iter_mut().for_each(|v| *v *= s);
                buf
            }
        })
    }

    /// Materializes `D` as a dense matrix.
    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.backing {
            Backing::Dense(m) => m.clone(),
            Backing::Dft(d) => {
                let s = 1.0 / (d.len as f64).sqrt();
                DMatrix::from_fn(self.rows, self.cols, |r, n| {
                    // reduce kn mod len before forming the angle to keep it small
                    let kn = (d.omega[r] as u128 * n as u128 % d.len as u128) as f64;
                    C64::from_polar(s, -2.0 * PI * kn / d.len as f64)
                })
            }
        }
    }

    /// `D Dᴴ` as a dense `M × M` matrix.
    pub fn gram_rows(&self) -> DMatrix<C64> {
        let d = self.to_dense();
        &d * d.adjoint()
    }

    /// Frame bounds as extreme eigenvalues of `D Dᴴ`.
    pub fn frame_bounds(&self, mode: BoundsMode) -> Result<FrameBounds> {
        match mode {
            BoundsMode::Exact => self.exact_bounds(),
            BoundsMode::Estimate => self.estimate_bounds(1e-8),
        }
    }

    fn exact_bounds(&self) -> Result<FrameBounds> {
        if self.rows > DENSE_CAP {
            return Err(Error::DenseCapExceeded {
                rows: self.rows,
                cap: DENSE_CAP,
            });
        }
        Ok(*self.cache.exact_bounds.get_or_init(|| {
            let eig = SymmetricEigen::new(self.gram_rows());
            let (lo, hi) = eig
                .eigenvalues
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            FrameBounds {
                lower: lo.max(0.0),
                upper: hi,
                method: BoundsMethod::ExactEig,
            }
        }))
    }

    fn gram_apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply(&self.adjoint(v).expect("length M"))
            .expect("length N")
    }

    /// Power iteration on `D Dᴴ` for `B` and inverse iteration (conjugate-gradient inner
    /// solves) for `A`.
    fn estimate_bounds(&self, tol: f64) -> Result<FrameBounds> {
        const MAX_ITERS: usize = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let start: Vec<C64> = (0..self.rows)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let normalize = |v: &mut Vec<C64>| {
            let n = norm2(v);
            v.iter_mut().for_each(|x| *x /= n);
        };

        let mut v = start.clone();
        normalize(&mut v);
        let mut upper = 0.0;
        for _ in 0..MAX_ITERS {
            let w = self.gram_apply(&v);
            let theta = inner(&w, &v).re;
            let resid = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * theta).norm_sqr())
                .sum::<f64>()
                .sqrt();
            v = w;
            normalize(&mut v);
            let done = (theta - upper).abs() <= tol * theta && resid <= tol.sqrt() * theta;
            upper = theta;
            if done {
                break;
            }
        }

        let mut v = start;
        normalize(&mut v);
        let mut lower = f64::INFINITY;
        for _ in 0..MAX_ITERS {
            let w = match self.gram_solve_cg(&v, 1e-13, 10 * self.rows + 100) {
                Some(w) => w,
                None => return Err(Error::SingularGram),
            };
            // Rayleigh quotient of the new direction
            let mut u = w;
            normalize(&mut u);
            let gu = self.gram_apply(&u);
            let theta = inner(&gu, &u).re;
            let done = (theta - lower).abs() <= tol * theta.abs().max(f64::MIN_POSITIVE);
            lower = theta;
            v = u;
            if done {
                break;
            }
        }
        Ok(FrameBounds {
            lower: lower.max(0.0),
            upper,
            method: BoundsMethod::PowerIteration,
        })
    }

    /// Solves `(D Dᴴ) s = b` by conjugate gradients.
    fn gram_solve_cg(&self, b: &[C64], rel_tol: f64, max_iters: usize) -> Option<Vec<C64>> {
        let bnorm = norm2(b);
        let mut x = vec![C64::new(0.0, 0.0); b.len()];
        if bnorm == 0.0 {
            return Some(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = inner(&r, &r).re;
        for _ in 0..max_iters {
            let ap = self.gram_apply(&p);
            let pap = inner(&ap, &p).re;
            if pap <= 0.0 || !pap.is_finite() {
                return None;
            }
            let alpha = rr / pap;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi * alpha);
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= ai * alpha);
            let rr_new = inner(&r, &r).re;
            if rr_new.sqrt() <= rel_tol * bnorm {
                return Some(x);
            }
            let beta = rr_new / rr;
            p.iter_mut()
                .zip(&r)
                .for_each(|(pi, ri)| *pi = ri + *pi * beta);
            rr = rr_new;
        }
        Some(x)
    }

    /// Cholesky factor of `D Dᴴ`, computed once. `None` when `D Dᴴ` is singular.
    pub(crate) fn gram_cholesky(&self) -> Result<&Cholesky<C64, Dyn>> {
        if self.rows > DENSE_CAP {
            return Err(Error::DenseCapExceeded {
                rows: self.rows,
                cap: DENSE_CAP,
            });
        }
        self.cache
            .gram_cholesky
            .get_or_init(|| Cholesky::new(self.gram_rows()))
            .as_ref()
            .ok_or(Error::SingularGram)
    }

    /// Parseval check: structural for DFT rows, exact eigenvalues otherwise.
    pub fn certify_parseval(&self) -> Result<FrameBounds> {
        if self.is_structurally_parseval() {
            return Ok(FrameBounds {
                lower: 1.0,
                upper: 1.0,
                method: BoundsMethod::ExactEig,
            });
        }
        let b = self.exact_bounds()?;
        if b.is_parseval(PARSEVAL_TOL) {
            Ok(b)
        } else {
            Err(Error::NotParseval {
                lower: b.lower,
                upper: b.upper,
            })
        }
    }

    /// `max |(D Dᴴ − I)_{ij}|`.
    pub fn parseval_residual(&self) -> f64 {
        let g = self.gram_rows();
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Selects `m` distinct rows of the unitary `n`-point DFT uniformly at random.
pub fn build_subsampled_dft<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<FrameOperator> {
    check_dims(n, m)?;
    let mut omega = rand::seq::index::sample(rng, n, m).into_vec();
    omega.sort_unstable();
    FrameOperator::dft_rows(n, omega, 1)
}

/// I.i.d. circularly-symmetric complex Gaussian entries with `E|d|² = 1/N`.
pub fn build_gaussian<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<FrameOperator> {
    check_dims(n, m)?;
    let s = (0.5 / n as f64).sqrt();
    let mut draw = || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    };
    // column-major fill order is part of the reproducibility contract
    let matrix = DMatrix::from_fn(m, n, |_, _| draw());
    FrameOperator::dense_with_meta(
        matrix,
        FrameMeta {
            family: FrameFamily::Gaussian,
            seed: None,
            coherence: None,
            warning: None,
        },
    )
}
