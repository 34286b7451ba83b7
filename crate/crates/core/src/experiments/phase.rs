//! Phase diagrams: empirical distribution of `K̂_u` or PAPR over a sweep of `M` at fixed `N`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{child_rng, fmt_f64, ExperimentConfig, ExperimentKind, PhaseFamily, PointStats};
use crate::frames::{build_equiangular_parseval, build_gaussian, build_subsampled_dft, FrameOperator};
use crate::metrics::{TrialRecord, write_trials_csv};
use crate::prox::AffineMode;
use crate::solvers::{solve_cram, solve_cramp, solve_douglas_rachford, upper_bound_for_steps, solve_least_squares, SolverConfig};
use crate::vecops::norm2;
use crate::{Error, Result, C64};

/// Stream index reserved for per-point frame construction.
const FRAME_STREAM: usize = u32::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PhaseMetric {
    /// Empirical democracy estimate `√N‖x‖∞ / (‖y‖₂ − ε)`.
    KHatU,
    /// PAPR of the representation in dB.
    PaprDb,
}

impl PhaseMetric {
    fn of(self, r: &TrialRecord) -> f64 {
        match self {
            PhaseMetric::KHatU => r.k_hat_u,
            PhaseMetric::PaprDb => r.papr_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransitionPoint {
    pub m: usize,
    pub rho: f64,
    /// Metric value reached by half of the successful trials; `None` without successes.
    pub value: Option<f64>,
    pub successes: usize,
}

#[derive(Debug, Clone)]
pub struct PhaseDiagramResult {
    pub n: usize,
    pub family: PhaseFamily,
    pub metric: PhaseMetric,
    pub ms: Vec<usize>,
    pub bins: Vec<f64>,
    /// `fractions[j][b]`: share of successful trials at point `j` with metric ≤ `bins[b]`;
    /// NaN when no trial succeeded.
    pub fractions: Vec<Vec<f64>>,
    pub transition: Vec<TransitionPoint>,
    /// Successful trials per point, in trial order.
    pub records: Vec<Vec<TrialRecord>>,
    pub stats: Vec<PointStats>,
}

/// Median with linear interpolation between order statistics: the 50% crossing of the
/// piecewise-linear empirical CDF.
fn half_point(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = 0.5 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (pos - lo as f64) * (values[hi] - values[lo]))
}

/// 50% transition of `metric` computed from the stored trial records.
pub fn transition_curve(result: &PhaseDiagramResult, metric: PhaseMetric) -> Vec<TransitionPoint> {
    result
        .ms
        .iter()
        .zip(&result.records)
        .map(|(&m, recs)| {
            let mut v: Vec<f64> = recs.iter().map(|r| metric.of(r)).collect();
            TransitionPoint {
                m,
                rho: m as f64 / result.n as f64,
                value: half_point(&mut v),
                successes: recs.len(),
            }
        })
        .collect()
}

struct Outcome {
    record: Option<TrialRecord>,
    iterations: usize,
    converged: bool,
    error: Option<String>,
}

/// i.i.d. complex Gaussian vector scaled to unit ℓ2 norm.
pub fn unit_gaussian_signal<R: Rng>(m: usize, rng: &mut R) -> Vec<C64> {
    let y: Vec<C64> = (0..m)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let s = 1.0 / norm2(&y);
    y.into_iter().map(|v| v * s).collect()
}

fn solve_trial(
    frame: &FrameOperator,
    y: &[C64],
    family: PhaseFamily,
    solver: &SolverConfig,
    seed: u64,
) -> Result<(TrialRecord, usize, bool)> {
    let eps = solver.epsilon;
    let result = match (family, eps > 0.0) {
        (PhaseFamily::Gaussian, false) => solve_douglas_rachford(frame, y, solver, AffineMode::General)?,
        (_, false) => solve_cramp(frame, y, solver)?,
        (_, true) => solve_cram(frame, y, solver)?,
    };
    let bounds = upper_bound_for_steps(frame)?;
    let x_ls = solve_least_squares(frame, y, eps)?;
    let record = TrialRecord::from_solution(&result.x, y, eps, &bounds, Some(&x_ls), seed)?;
    Ok((record, result.iterations, result.converged))
}

pub fn run_phase_diagram(cfg: &ExperimentConfig) -> Result<PhaseDiagramResult> {
    cfg.validate()?;
    let metric = match cfg.kind {
        ExperimentKind::PhaseKu => PhaseMetric::KHatU,
        ExperimentKind::PhasePapr => PhaseMetric::PaprDb,
        ExperimentKind::OfdmPapr => {
            return Err(Error::InvalidParameter("not a phase-diagram config".into()))
        }
    };
    let n = cfg.n;
    let ms = cfg.m_values()?;
    let bins = cfg.bin_values()?;
    // y is normalized, so the relative budget is also the absolute one
    let solver = cfg.solver_config().with_epsilon(cfg.epsilon);

    // equiangular frames are costly to build: one per sweep point
    let shared: Vec<Option<Result<(FrameOperator, Option<String>)>>> = ms
        .par_iter()
        .enumerate()
        .map(|(j, &m)| {
            (cfg.family == PhaseFamily::EquiangularParseval).then(|| {
                let mut rng = child_rng(cfg.seed, j, FRAME_STREAM);
                build_equiangular_parseval(n, m, &mut rng, cfg.equiangular_iters)
                    .map(|(f, _)| {
                        let w = f.meta().warning.clone();
                        (f, w)
                    })
            })
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..ms.len())
        .flat_map(|j| (0..cfg.trials).map(move |t| (j, t)))
        .collect();
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|&(j, t)| {
            let m = ms[j];
            let mut rng = child_rng(cfg.seed, j, t);
            let frame = match (&shared[j], cfg.family) {
                (Some(Ok((f, _))), _) => Ok(f.clone()),
                (Some(Err(e)), _) => Err(Error::Format(e.to_string())),
                (None, PhaseFamily::Gaussian) => build_gaussian(n, m, &mut rng),
                (None, _) => build_subsampled_dft(n, m, &mut rng),
            };
            let y = unit_gaussian_signal(m, &mut rng);
            match frame.and_then(|f| solve_trial(&f, &y, cfg.family, &solver, cfg.seed)) {
                Ok((record, iterations, converged)) => Outcome {
                    record: converged.then_some(record),
                    iterations,
                    converged,
                    error: None,
                },
                Err(e) => Outcome {
                    record: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut records = Vec::with_capacity(ms.len());
    let mut stats = Vec::with_capacity(ms.len());
    for (j, chunk) in outcomes.chunks(cfg.trials).enumerate() {
        let converged = chunk.iter().filter(|o| o.converged).count();
        let iters: Vec<usize> = chunk.iter().map(|o| o.iterations).collect();
        stats.push(PointStats {
            m: ms[j],
            rho: ms[j] as f64 / n as f64,
            trials: chunk.len(),
            converged,
            failed: chunk.len() - converged,
            mean_iterations: iters.iter().sum::<usize>() as f64 / iters.len() as f64,
            max_iterations: iters.iter().copied().max().unwrap_or(0),
            first_error: chunk.iter().find_map(|o| o.error.clone()),
            warning: match &shared[j] {
                Some(Ok((_, w))) => w.clone(),
                _ => None,
            },
        });
        records.push(chunk.iter().filter_map(|o| o.record.clone()).collect::<Vec<_>>());
    }

    let fractions = records
        .iter()
        .map(|recs: &Vec<TrialRecord>| {
            let mut v: Vec<f64> = recs.iter().map(|r| metric.of(r)).collect();
            v.sort_by(f64::total_cmp);
            bins.iter()
                .map(|&b| {
                    if v.is_empty() {
                        f64::NAN
                    } else {
                        v.partition_point(|&x| x <= b) as f64 / v.len() as f64
                    }
                })
                .collect()
        })
        .collect();

    let mut result = PhaseDiagramResult {
        n,
        family: cfg.family,
        metric,
        ms,
        bins,
        fractions,
        transition: Vec::new(),
        records,
        stats,
    };
    result.transition = transition_curve(&result, metric);
    Ok(result)
}

impl PhaseDiagramResult {
    /// `(file name, contents)` of the grid, transition and per-trial tables.
    pub fn csv_files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut grid = String::from("m,rho,bin,fraction\n");
        for (j, &m) in self.ms.iter().enumerate() {
            let rho = fmt_f64(m as f64 / self.n as f64);
            for (b, &bin) in self.bins.iter().enumerate() {
                grid += &format!("{m},{rho},{},{}\n", fmt_f64(bin), fmt_f64(self.fractions[j][b]));
            }
        }
        let mut transition = String::from("m,rho,value,successes,failed\n");
        for (p, s) in self.transition.iter().zip(&self.stats) {
            transition += &format!(
                "{},{},{},{},{}\n",
                p.m,
                fmt_f64(p.rho),
                p.value.map(fmt_f64).unwrap_or_default(),
                p.successes,
                s.failed
            );
        }
        let mut trials = Vec::new();
        let flat: Vec<TrialRecord> = self.records.iter().flatten().cloned().collect();
        write_trials_csv(&mut trials, &flat)?;
        Ok(vec![
            ("grid.csv".into(), grid.into_bytes()),
            ("transition.csv".into(), transition.into_bytes()),
            ("trials.csv".into(), trials),
        ])
    }
}
