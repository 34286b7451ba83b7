//! Figures of merit for representations: PAPR, democracy constants and their bounds,
//! extreme-entry counts and power increase.

use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::frames::{FrameBounds, UpCertificate};
use crate::vecops::{modulus, norm2, norm2_sqr, norm_inf};
use crate::{Error, Result, C64};

/// Default relative tolerance of [`count_extreme`].
pub const EXTREME_REL_TOL: f64 = 1e-5;

fn nonzero(x: &[C64]) -> Result<f64> {
    let e = norm2_sqr(x);
    if x.is_empty() || !(e > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(e)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// `N ‖x‖∞² / ‖x‖₂²`, between 1 (constant modulus) and `N` (one-hot).
pub fn papr(x: &[C64]) -> Result<f64> {
    let energy = nonzero(x)?;
    let peak = norm_inf(x);
    Ok(x.len() as f64 * peak * peak / energy)
}

pub fn papr_db(x: &[C64]) -> Result<f64> {
    papr(x).map(to_db)
}

/// Maps bin `k` of an `n`-point spectrum onto the centered `factor·n` grid: non-negative
/// frequencies keep their index, negative ones move to the top of the longer spectrum.
/// For even `n` the Nyquist bin `n/2` has two images; this returns the lower one.
pub fn centered_bin(k: usize, n: usize, factor: usize) -> usize {
    if k < n.div_ceil(2) || (n % 2 == 0 && k == n / 2) {
        k
    } else {
        k + (factor - 1) * n
    }
}

/// Band-limited interpolation of `x_time` onto a `factor`-times finer grid.
///
/// Zeros go into the middle of the FFT-ordered spectrum; for even `N` the Nyquist bin is
/// split evenly between its two images. The result is scaled by `√factor` so the original
/// samples are reproduced at every `factor`-th position.
pub fn oversample(x_time: &[C64], factor: usize) -> Result<Vec<C64>> {
    if factor == 0 {
        return Err(Error::InvalidParameter("oversampling factor must be ≥ 1".into()));
    }
    let n = x_time.len();
    if factor == 1 || n == 0 {
        return Ok(x_time.to_vec());
    }
    let l = n * factor;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec = x_time.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);

    let mut padded = vec![C64::new(0.0, 0.0); l];
    for (k, &v) in spec.iter().enumerate() {
        if n % 2 == 0 && k == n / 2 {
            padded[k] += v * 0.5;
            padded[l - k] += v * 0.5;
        } else {
            padded[centered_bin(k, n, factor)] = v;
        }
    }
    planner.plan_fft_inverse(l).process(&mut padded);
    // unnormalized transforms: forward·inverse scales by L; undo and keep sample amplitudes
    let s = 1.0 / n as f64;
    padded.iter_mut().for_each(|v| *v *= s);
    Ok(padded)
}

/// PAPR of the `factor`-times oversampled version of `x_time`.
pub fn papr_oversampled(x_time: &[C64], factor: usize) -> Result<f64> {
    nonzero(x_time)?;
    papr(&oversample(x_time, factor)?)
}

/// Number of entries with `|x_k| ≥ (1 − relTol)‖x‖∞`.
pub fn count_extreme(x: &[C64], rel_tol: f64) -> Result<usize> {
    nonzero(x)?;
    if !(0.0..1.0).contains(&rel_tol) {
        return Err(Error::InvalidParameter(format!(
            "relTol must lie in [0, 1), got {rel_tol}"
        )));
    }
    let cut = (1.0 - rel_tol) * norm_inf(x);
    Ok(x.iter().filter(|&&v| modulus(v) >= cut).count())
}

/// `√N ‖x‖∞ / (‖y‖₂ − ε)`; a lower estimate of the upper democracy constant when `x` is
/// optimal for `(y, ε)`.
pub fn empirical_ku(x: &[C64], y: &[C64], epsilon: f64) -> Result<f64> {
    let slack = norm2(y) - epsilon;
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need ‖y‖₂ > ε, got ‖y‖₂ − ε = {slack}"
        )));
    }
    Ok((x.len() as f64).sqrt() * norm_inf(x) / slack)
}

/// `1/√B`.
pub fn bound_lower_democracy(bounds: &FrameBounds) -> f64 {
    1.0 / bounds.upper.sqrt()
}

/// A bound that may be vacuous (`value = +∞`) when its proviso fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemocracyBound {
    pub value: f64,
    pub vacuous: bool,
}

/// `η / ((A − η√B)√δ)`, vacuous unless `A > η√B`.
pub fn bound_upper_democracy(bounds: &FrameBounds, up: &UpCertificate) -> DemocracyBound {
    let margin = bounds.lower - up.eta * bounds.upper.sqrt();
    if margin > 0.0 && up.delta > 0.0 {
        DemocracyBound {
            value: up.eta / (margin * up.delta.sqrt()),
            vacuous: false,
        }
    } else {
        DemocracyBound {
            value: f64::INFINITY,
            vacuous: true,
        }
    }
}

/// `N / (N − M + 1)`, valid for full-spark frames.
pub fn bound_papr_fullspark(n: usize, m: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::InvalidDimensions(format!("need 1 ≤ M ≤ N, got M = {m}, N = {n}")));
    }
    Ok(n as f64 / (n - m + 1) as f64)
}

/// `K̃_u² B`.
pub fn bound_papr_up(k_tilde_u: f64, b: f64) -> f64 {
    k_tilde_u * k_tilde_u * b
}

/// Same right-hand side as [`bound_papr_up`].
pub fn bound_power_increase(k_tilde_u: f64, b: f64) -> f64 {
    bound_papr_up(k_tilde_u, b)
}

/// `‖x_dem‖₂² / ‖x_ls‖₂²`.
pub fn power_increase(x_dem: &[C64], x_ls: &[C64]) -> Result<f64> {
    let denom = nonzero(x_ls)?;
    Ok(norm2_sqr(x_dem) / denom)
}

/// Metrics of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrialRecord {
    pub rho: f64,
    pub papr_linear: f64,
    pub papr_db: f64,
    pub k_hat_u: f64,
    pub k_tilde_l: f64,
    pub extreme_count: usize,
    pub power_increase: Option<f64>,
    pub norm_inf: f64,
    pub norm_two: f64,
    pub epsilon: f64,
    pub seed: u64,
}

/// Column order of [`TrialRecord`] CSV rows.
pub const TRIAL_CSV_HEADER: [&str; 11] = [
    "rho",
    "paprLinear",
    "paprDb",
    "kHatU",
    "kTildeL",
    "extremeCount",
    "powerIncrease",
    "normInf",
    "normTwo",
    "epsilon",
    "seed",
];

impl TrialRecord {
    /// Evaluates every metric of a solved instance. `x_ls` is optional because the
    /// least-squares solve is not free on large frames.
    pub fn from_solution(
        x: &[C64],
        y: &[C64],
        epsilon: f64,
        bounds: &FrameBounds,
        x_ls: Option<&[C64]>,
        seed: u64,
    ) -> Result<Self> {
        let p = papr(x)?;
        Ok(Self {
            rho: y.len() as f64 / x.len() as f64,
            papr_linear: p,
            papr_db: to_db(p),
            k_hat_u: empirical_ku(x, y, epsilon)?,
            k_tilde_l: bound_lower_democracy(bounds),
            extreme_count: count_extreme(x, EXTREME_REL_TOL)?,
            power_increase: x_ls.map(|ls| power_increase(x, ls)).transpose()?,
            norm_inf: norm_inf(x),
            norm_two: norm2(x),
            epsilon,
            seed,
        })
    }
}

/// Writes the header and one row per record.
pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRIAL_CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_jsonl<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::BoundsMethod;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bounds(a: f64, b: f64) -> FrameBounds {
        FrameBounds { lower: a, upper: b, method: BoundsMethod::ExactEig }
    }

    #[test]
    fn papr_examples() {
        assert!((papr(&[c(2.0), c(1.0), c(1.0)]).unwrap() - 2.0).abs() < 1e-15);
        let flat: Vec<C64> = (0..7).map(|k| C64::from_polar(3.0, k as f64)).collect();
        assert!((papr(&flat).unwrap() - 1.0).abs() < 1e-12);
        let mut one_hot = vec![c(0.0); 9];
        one_hot[4] = C64::new(0.0, -2.0);
        assert!((papr(&one_hot).unwrap() - 9.0).abs() < 1e-12);
        assert!(matches!(papr(&[c(0.0); 3]), Err(Error::ZeroVector)));
    }

    /// Direct evaluation of the trigonometric interpolant at fractional time `t`.
    fn interpolant(x: &[C64], t: f64) -> C64 {
        let n = x.len();
        let spec: Vec<C64> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| x[j] * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64))
                    .sum::<C64>()
            })
            .collect();
        let freq = |k: usize| -> f64 {
            if 2 * k < n { k as f64 } else { k as f64 - n as f64 }
        };
        let mut acc = C64::new(0.0, 0.0);
        for (k, &s) in spec.iter().enumerate() {
            if n % 2 == 0 && k == n / 2 {
                let w = std::f64::consts::PI * t;
                acc += s * (w).cos();
            } else {
                acc += s * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * freq(k) * t / n as f64);
            }
        }
        acc / n as f64
    }

    #[test]
    fn oversample_matches_direct_interpolant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [6usize, 7, 8] {
            let x: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let up = oversample(&x, 4).unwrap();
            for (i, v) in up.iter().enumerate() {
                let want = interpolant(&x, i as f64 / 4.0);
                assert!((v - want).norm() < 1e-12, "n={n} i={i}");
            }
            for j in 0..n {
                assert!((up[4 * j] - x[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn oversampled_papr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<C64> = (0..16)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        assert_eq!(papr_oversampled(&x, 1).unwrap(), papr(&x).unwrap());
        let tone: Vec<C64> = (0..16)
            .map(|j| C64::from_polar(0.3, 2.0 * std::f64::consts::PI * 3.0 * j as f64 / 16.0))
            .collect();
        assert!((papr_oversampled(&tone, 4).unwrap() - 1.0).abs() < 1e-9);
        assert!(papr_oversampled(&x, 0).is_err());
        for _ in 0..100 {
            let x: Vec<C64> = (0..64)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            // finer grids see every coarse sample, so the peak can only grow
            let (p1, p4, p64) = (
                norm_inf(&x),
                norm_inf(&oversample(&x, 4).unwrap()),
                norm_inf(&oversample(&x, 64).unwrap()),
            );
            assert!(p4 >= p1 - 1e-9 && p64 >= p4 - 1e-9);
            assert!(papr_oversampled(&x, 4).unwrap() >= papr(&x).unwrap() - 1e-9);
        }
    }

    #[test]
    fn extreme_counts() {
        assert_eq!(count_extreme(&[c(1.0), c(-1.0), c(0.2)], 1e-5).unwrap(), 2);
        let flat: Vec<C64> = (0..5).map(|k| C64::from_polar(1.0, k as f64)).collect();
        assert_eq!(count_extreme(&flat, EXTREME_REL_TOL).unwrap(), 5);
        assert!(count_extreme(&flat, 1.0).is_err());
    }

    #[test]
    fn ku_examples() {
        let x = [c(0.5), c(0.5)];
        assert!((empirical_ku(&x, &[c(1.0)], 0.0).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert!(empirical_ku(&x, &[c(1.0)], 1.0).is_err());
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(bound_lower_democracy(&bounds(1.0, 1.0)), 1.0);
        assert_eq!(bound_lower_democracy(&bounds(1.0, 4.0)), 0.5);
        let up = UpCertificate { eta: 0.5, delta: 0.25, exhaustive: true, support_budget: 1, supports_checked: 4 };
        let b = bound_upper_democracy(&bounds(1.0, 1.0), &up);
        assert!((b.value - 2.0).abs() < 1e-15 && !b.vacuous);
        let weak = UpCertificate { eta: 1.0, ..up };
        let v = bound_upper_democracy(&bounds(1.0, 1.0), &weak);
        assert!(v.vacuous && v.value.is_infinite());
        assert_eq!(bound_papr_fullspark(10, 1).unwrap(), 1.0);
        assert!((bound_papr_fullspark(128, 64).unwrap() - 128.0 / 65.0).abs() < 1e-15);
        assert!(bound_papr_fullspark(4, 5).is_err());
        assert_eq!(bound_papr_up(2.0, 1.0), 4.0);
        assert!(bound_power_increase(f64::INFINITY, 1.0).is_infinite());
        assert_eq!(power_increase(&x2(), &x2()).unwrap(), 1.0);
        assert!(power_increase(&x2(), &[c(0.0); 2]).is_err());
    }

    fn x2() -> [C64; 2] {
        [c(0.5), c(0.5)]
    }

    #[test]
    fn trial_record_formats() {
        let rec = TrialRecord::from_solution(&x2(), &[c(1.0)], 0.0, &bounds(2.0, 2.0), Some(&x2()), 7).unwrap();
        assert_eq!(rec.extreme_count, 2);
        let mut csv_out = Vec::new();
        write_trials_csv(&mut csv_out, std::slice::from_ref(&rec)).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRIAL_CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap().split(',').count(), TRIAL_CSV_HEADER.len());
        let mut jl = Vec::new();
        write_trials_jsonl(&mut jl, std::slice::from_ref(&rec)).unwrap();
        let back: TrialRecord = serde_json::from_slice(&jl).unwrap();
        assert_eq!(back, rec);
    }
}
