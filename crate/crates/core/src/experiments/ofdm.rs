//! OFDM tone reservation: minimize the time-domain peak with data tones fixed and a small set
//! of reserved tones free.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ccdf_on_grid, child_rng, fmt_f64, grid_covering, qam_map, CcdfTable, ExperimentConfig, ExperimentKind,
    PointStats, TonePlacement,
};
use crate::frames::FrameOperator;
use crate::metrics::{centered_bin, papr, papr_oversampled, to_db};
use crate::solvers::{solve_cramp, SolverConfig};
use crate::vecops::norm2;
use crate::{Error, Result, C64};

/// Subcarrier roles, all as FFT-order bin indices in `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OfdmLayout {
    pub n: usize,
    /// Used band, centered on DC, in increasing frequency order.
    pub used: Vec<usize>,
    pub reserved: Vec<usize>,
    pub data: Vec<usize>,
    /// Every non-reserved bin (data and guards): the constrained set.
    pub omega: Vec<usize>,
}

impl OfdmLayout {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.kind != ExperimentKind::OfdmPapr {
            return Err(Error::InvalidParameter("not an OFDM config".into()));
        }
        if cfg.epsilon != 0.0 {
            return Err(Error::Unsupported("tone reservation keeps data tones exact; epsilon must be 0".into()));
        }
        let n = cfg.n;
        if n < 2 {
            return Err(Error::InvalidDimensions(format!("need at least 2 subcarriers, got {n}")));
        }
        let u = cfg.used_tones.unwrap_or((n as f64 * 0.85).floor() as usize).clamp(1, n - 1);
        if cfg.used_tones.is_some_and(|v| v == 0 || v >= n) {
            return Err(Error::InvalidParameter(format!("usedTones must lie in 1..{n}")));
        }
        let half = (u / 2) as i64;
        let used: Vec<usize> = (0..u as i64)
            .map(|i| (i - half).rem_euclid(n as i64) as usize)
            .collect();

        let mut reserved = match cfg.tone_placement {
            TonePlacement::Even => {
                let r = cfg
                    .reserved_tones
                    .unwrap_or(((n as f64) * 0.01).round().max(1.0) as usize);
                if r >= u {
                    return Err(Error::InvalidParameter(format!(
                        "{r} reserved tones leave no data tones in a band of {u}"
                    )));
                }
                (0..r).map(|i| used[((2 * i + 1) * u) / (2 * r)]).collect::<Vec<_>>()
            }
            TonePlacement::List => {
                let list = cfg.reserved_indices.clone().ok_or_else(|| {
                    Error::InvalidParameter("tonePlacement = list needs reservedIndices".into())
                })?;
                if let Some(r) = cfg.reserved_tones.filter(|&r| r != list.len()) {
                    return Err(Error::InvalidParameter(format!(
                        "reservedTones = {r} but {} indices listed",
                        list.len()
                    )));
                }
                list
            }
        };
        if reserved.is_empty() {
            return Err(Error::InvalidParameter(
                "no reserved tones: nothing to optimize".into(),
            ));
        }
        reserved.sort_unstable();
        if reserved.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate reserved tone".into()));
        }
        if let Some(&k) = reserved.iter().find(|&&k| k >= n || (n % 2 == 0 && k == n / 2)) {
            return Err(Error::InvalidParameter(format!(
                "reserved tone {k} is out of range or the Nyquist bin"
            )));
        }
        let is_reserved = |k: usize| reserved.binary_search(&k).is_ok();
        let mut data: Vec<usize> = used.iter().copied().filter(|&k| !is_reserved(k)).collect();
        data.sort_unstable();
        if data.is_empty() {
            return Err(Error::InvalidParameter("no data tones left".into()));
        }
        let omega = (0..n).filter(|&k| !is_reserved(k)).collect();
        Ok(OfdmLayout { n, used, reserved, data, omega })
    }

    /// Constraint set and values on the `factor·N` grid: images of the constrained bins plus
    /// every interpolation bin (held at zero), scaled by `√factor` to keep sample amplitudes.
    fn oversampled_constraint(&self, spectrum: &[C64], factor: usize) -> (Vec<usize>, Vec<C64>) {
        let l = self.n * factor;
        let mut value = vec![Some(C64::new(0.0, 0.0)); l];
        let s = (factor as f64).sqrt();
        for k in 0..self.n {
            let target = centered_bin(k, self.n, factor);
            value[target] = if self.reserved.binary_search(&k).is_ok() {
                None
            } else {
                Some(spectrum[k] * s)
            };
        }
        let omega: Vec<usize> = (0..l).filter(|&k| value[k].is_some()).collect();
        let y = omega.iter().map(|&k| value[k].expect("kept bin")).collect();
        (omega, y)
    }
}

#[derive(Debug, Clone, Default)]
struct Outcome {
    conventional: f64,
    critical: f64,
    oversampled: Option<f64>,
    iterations: (usize, usize),
    converged: bool,
    residual: f64,
    error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OfdmResult {
    pub layout: OfdmLayout,
    pub oversampling: usize,
    /// Oversampled PAPR (dB) per successful trial.
    pub conventional_db: Vec<f64>,
    pub critical_db: Vec<f64>,
    pub oversampled_db: Option<Vec<f64>>,
    pub ccdf_conventional: CcdfTable,
    pub ccdf_critical: CcdfTable,
    pub ccdf_oversampled: Option<CcdfTable>,
    /// Largest `‖y_Ω − D x‖₂ / ‖y_Ω‖₂` over all solves.
    pub max_relative_residual: f64,
    pub iterations: Vec<(usize, usize)>,
    pub stats: PointStats,
}

fn random_bits<R: Rng>(count: usize, rng: &mut R) -> Vec<bool> {
    (0..count).map(|_| rng.gen::<bool>()).collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    layout: &OfdmLayout,
    frame: &FrameOperator,
    solver: &SolverConfig,
    t: usize,
) -> Result<Outcome> {
    let n = layout.n;
    let mut rng = child_rng(cfg.seed, 0, t);
    let bits_per_symbol = cfg.qam_order.trailing_zeros() as usize;
    let symbols = qam_map(&random_bits(layout.data.len() * bits_per_symbol, &mut rng), cfg.qam_order)?;
    let mut spectrum = vec![C64::new(0.0, 0.0); n];
    for (&k, &s) in layout.data.iter().zip(&symbols) {
        spectrum[k] = s;
    }
    let y: Vec<C64> = layout.omega.iter().map(|&k| spectrum[k]).collect();
    let y_norm = norm2(&y);

    let conventional = frame.adjoint(&y)?;
    let crit = solve_cramp(frame, &y, solver)?;
    let mut out = Outcome {
        conventional: to_db(papr_oversampled(&conventional, cfg.oversampling)?),
        critical: to_db(papr_oversampled(&crit.x, cfg.oversampling)?),
        iterations: (crit.iterations, 0),
        converged: crit.converged,
        residual: crit.residual_feasibility / y_norm,
        ..Outcome::default()
    };
    if cfg.solve_oversampled && cfg.oversampling > 1 {
        let (omega_l, y_l) = layout.oversampled_constraint(&spectrum, cfg.oversampling);
        let frame_l = FrameOperator::dft_rows(n * cfg.oversampling, omega_l, cfg.oversampling)?;
        let over = solve_cramp(&frame_l, &y_l, solver)?;
        out.oversampled = Some(to_db(papr(&over.x)?));
        out.iterations.1 = over.iterations;
        out.converged &= over.converged;
        out.residual = out.residual.max(over.residual_feasibility / norm2(&y_l));
    }
    Ok(out)
}

pub fn run_ofdm_papr(cfg: &ExperimentConfig) -> Result<OfdmResult> {
    cfg.validate()?;
    let layout = OfdmLayout::from_config(cfg)?;
    let solver = cfg.solver_config().with_epsilon(0.0);
    let frame = FrameOperator::dft_rows(cfg.n, layout.omega.clone(), 1)?;

    let outcomes: Vec<Outcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, &layout, &frame, &solver, t).unwrap_or_else(|e| Outcome {
                error: Some(e.to_string()),
                ..Outcome::default()
            })
        })
        .collect();

    let ok: Vec<&Outcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let failed = outcomes.len() - ok.len();
    let iterations: Vec<(usize, usize)> = ok.iter().map(|o| o.iterations).collect();
    let solves_per_trial = if cfg.solve_oversampled && cfg.oversampling > 1 { 2 } else { 1 };
    let total_iters: usize = iterations.iter().map(|(a, b)| a + b).sum();
    let stats = PointStats {
        m: layout.omega.len(),
        rho: layout.omega.len() as f64 / cfg.n as f64,
        trials: outcomes.len(),
        converged: ok.iter().filter(|o| o.converged).count(),
        failed,
        mean_iterations: if ok.is_empty() {
            0.0
        } else {
            total_iters as f64 / (ok.len() * solves_per_trial) as f64
        },
        max_iterations: iterations.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0),
        first_error: outcomes.iter().find_map(|o| o.error.clone()),
        warning: None,
    };
    if ok.is_empty() {
        return Err(Error::Format(format!(
            "every OFDM trial failed: {}",
            stats.first_error.clone().unwrap_or_default()
        )));
    }

    let conventional_db: Vec<f64> = ok.iter().map(|o| o.conventional).collect();
    let critical_db: Vec<f64> = ok.iter().map(|o| o.critical).collect();
    let oversampled_db: Option<Vec<f64>> = ok.iter().map(|o| o.oversampled).collect();
    let all = conventional_db
        .iter()
        .chain(&critical_db)
        .chain(oversampled_db.iter().flatten());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let grid = grid_covering(lo, hi, cfg.ccdf_resolution)?;

    Ok(OfdmResult {
        oversampling: cfg.oversampling,
        ccdf_conventional: ccdf_on_grid(&conventional_db, &grid)?,
        ccdf_critical: ccdf_on_grid(&critical_db, &grid)?,
        ccdf_oversampled: oversampled_db.as_deref().map(|v| ccdf_on_grid(v, &grid)).transpose()?,
        max_relative_residual: ok.iter().map(|o| o.residual).fold(0.0, f64::max),
        layout,
        conventional_db,
        critical_db,
        oversampled_db,
        iterations,
        stats,
    })
}

impl OfdmResult {
    /// `(file name, contents)` of the CCDF table and the per-trial PAPR values.
    pub fn csv_files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut ccdf = String::from("paprDb,conventional,critical,oversampled\n");
        for (i, &t) in self.ccdf_conventional.thresholds.iter().enumerate() {
            ccdf += &format!(
                "{},{},{},{}\n",
                fmt_f64(t),
                fmt_f64(self.ccdf_conventional.probabilities[i]),
                fmt_f64(self.ccdf_critical.probabilities[i]),
                self.ccdf_oversampled
                    .as_ref()
                    .map(|c| fmt_f64(c.probabilities[i]))
                    .unwrap_or_default()
            );
        }
        let mut trials = String::from("trial,conventionalDb,criticalDb,oversampledDb,criticalIterations,oversampledIterations\n");
        for (i, &(a, b)) in self.iterations.iter().enumerate() {
            trials += &format!(
                "{i},{},{},{},{a},{b}\n",
                fmt_f64(self.conventional_db[i]),
                fmt_f64(self.critical_db[i]),
                self.oversampled_db.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default()
            );
        }
        Ok(vec![
            ("ccdf.csv".into(), ccdf.into_bytes()),
            ("ofdm_trials.csv".into(), trials.into_bytes()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            trials: 6,
            qam_order: 16,
            seed: 3,
            ..ExperimentConfig::new(ExperimentKind::OfdmPapr, 128)
        }
    }

    #[test]
    fn layout_partitions_bins() {
        let l = OfdmLayout::from_config(&ExperimentConfig {
            reserved_tones: Some(4),
            ..small()
        })
        .unwrap();
        assert_eq!(l.used.len(), 108);
        assert_eq!(l.reserved.len(), 4);
        assert_eq!(l.data.len() + l.reserved.len(), l.used.len());
        assert_eq!(l.omega.len() + l.reserved.len(), 128);
        assert!(!l.used.contains(&64));
        assert!(l.reserved.iter().all(|k| l.used.contains(k)));
    }

    #[test]
    fn zero_reserved_refused() {
        let cfg = ExperimentConfig { reserved_tones: Some(0), ..small() };
        assert!(OfdmLayout::from_config(&cfg).is_err());
        let cfg = ExperimentConfig {
            tone_placement: TonePlacement::List,
            reserved_indices: Some(vec![]),
            ..small()
        };
        assert!(OfdmLayout::from_config(&cfg).is_err());
        let nyquist = ExperimentConfig {
            tone_placement: TonePlacement::List,
            reserved_indices: Some(vec![64]),
            ..small()
        };
        assert!(OfdmLayout::from_config(&nyquist).is_err());
    }

    #[test]
    fn constraints_hold_and_peaks_drop() {
        let cfg = ExperimentConfig { reserved_tones: Some(8), ..small() };
        let r = run_ofdm_papr(&cfg).unwrap();
        assert_eq!(r.stats.failed, 0);
        assert!(r.max_relative_residual <= 1e-8, "{}", r.max_relative_residual);
        let over = r.oversampled_db.as_ref().unwrap();
        for i in 0..r.conventional_db.len() {
            assert!(r.critical_db[i] <= r.conventional_db[i] + 1e-9 || over[i] <= r.conventional_db[i]);
            assert!(over[i] <= r.conventional_db[i] + 1e-9);
        }
    }

    #[test]
    fn oversampled_constraint_reproduces_conventional_signal() {
        let cfg = small();
        let l = OfdmLayout::from_config(&cfg).unwrap();
        let mut spectrum = vec![C64::new(0.0, 0.0); 128];
        for (i, &k) in l.data.iter().enumerate() {
            spectrum[k] = C64::new(i as f64 % 3.0 - 1.0, 0.5);
        }
        let y: Vec<C64> = l.omega.iter().map(|&k| spectrum[k]).collect();
        let x = FrameOperator::dft_rows(128, l.omega.clone(), 1).unwrap().adjoint(&y).unwrap();
        let (omega_l, y_l) = l.oversampled_constraint(&spectrum, 4);
        let x_l = FrameOperator::dft_rows(512, omega_l, 4).unwrap().adjoint(&y_l).unwrap();
        let up = crate::metrics::oversample(&x, 4).unwrap();
        assert!(crate::vecops::dist2(&x_l, &up) <= 1e-12 * norm2(&up));
    }
}
