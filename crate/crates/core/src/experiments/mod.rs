//! Monte-Carlo harness: phase diagrams of democracy and PAPR over `(N, M)` sweeps, and
//! tone-reservation PAPR reduction for OFDM.
//!
//! Every trial draws from its own ChaCha8 stream derived from `(seed, sweep point, trial)`,
//! and results land in preallocated slots, so outputs do not depend on thread scheduling.

mod ccdf;
mod ofdm;
mod phase;
mod qam;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::check_schema;
use crate::prox::NormMode;
use crate::solvers::SolverConfig;
use crate::{Error, Result};

pub use ccdf::{ccdf, ccdf_on_grid, grid_covering, CcdfTable};
pub use ofdm::{run_ofdm_papr, OfdmLayout, OfdmResult};
pub use phase::{run_phase_diagram, transition_curve, unit_gaussian_signal, PhaseDiagramResult, PhaseMetric, TransitionPoint};
pub use qam::{qam_alphabet, qam_map, SUPPORTED_ORDERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseKu,
    PhasePapr,
    OfdmPapr,
}

/// Frame families available to phase diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseFamily {
    #[default]
    SubsampledDft,
    Gaussian,
    EquiangularParseval,
}

/// Values of `M` to visit: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MSweep {
    List(Vec<usize>),
    Range(MRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MRange {
    pub start: usize,
    pub stop: usize,
    pub step: usize,
}

impl MSweep {
    pub fn values(&self) -> Result<Vec<usize>> {
        match self {
            MSweep::List(v) => Ok(v.clone()),
            MSweep::Range(r) => {
                if r.step == 0 || r.start > r.stop {
                    return Err(Error::InvalidParameter(format!(
                        "bad M range {}..={} step {}",
                        r.start, r.stop, r.step
                    )));
                }
                Ok((r.start..=r.stop).step_by(r.step).collect())
            }
        }
    }
}

/// Metric axis of a phase diagram: `start, start + step, …` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl BinSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.start <= self.stop) || !self.stop.is_finite() || !self.start.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad bin spec {}..={} step {}",
                self.start, self.stop, self.step
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(Error::InvalidParameter(format!("{count} bins is too many")));
        }
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TonePlacement {
    /// Evenly spaced across the used band.
    #[default]
    Even,
    /// `reservedIndices` taken verbatim.
    List,
}

/// One experiment, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    /// Number of frame columns (phase diagrams) or subcarriers (OFDM).
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_sweep: Option<MSweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub family: PhaseFamily,
    /// Approximation budget relative to `‖y‖₂`.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub norm: NormMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
    /// Defaults to 1% of `N`, at least one tone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserved_tones: Option<usize>,
    #[serde(default)]
    pub tone_placement: TonePlacement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserved_indices: Option<Vec<usize>>,
    /// Subcarriers in the used band (data plus reserved), centered on DC. Defaults to 85% of `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub used_tones: Option<usize>,
    #[serde(default = "default_qam")]
    pub qam_order: u32,
    /// Also solve on the oversampled grid (OFDM only).
    #[serde(default = "default_true")]
    pub solve_oversampled: bool,
    #[serde(default = "default_ccdf_resolution")]
    pub ccdf_resolution: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinSpec>,
    /// Solver settings; defaults depend on the experiment kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    /// Largest tolerated fraction of failed trials per sweep point.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
    #[serde(default = "default_equiangular_iters")]
    pub equiangular_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_trials() -> usize {
    25
}
fn default_oversampling() -> usize {
    4
}
fn default_qam() -> u32 {
    256
}
fn default_true() -> bool {
    true
}
fn default_ccdf_resolution() -> f64 {
    0.1
}
fn default_failure_budget() -> f64 {
    0.01
}
fn default_equiangular_iters() -> usize {
    100
}

/// Per-trial iteration cap of OFDM runs.
pub const OFDM_MAX_ITERS: usize = 1000;

impl ExperimentConfig {
    /// Minimal valid configuration of the given kind.
    pub fn new(kind: ExperimentKind, n: usize) -> Self {
        serde_json::from_value(serde_json::json!({
            "schemaVersion": crate::io::SCHEMA_VERSION,
            "kind": kind,
            "n": n,
        }))
        .expect("defaults deserialize")
    }

    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: Self = crate::io::parse_config(text, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return bad(format!("failureBudget must lie in [0, 1], got {}", self.failure_budget));
        }
        if self.oversampling == 0 {
            return bad("oversampling must be ≥ 1".into());
        }
        if self.equiangular_iters == 0 {
            return bad("equiangularIters must be ≥ 1".into());
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        match self.kind {
            ExperimentKind::PhaseKu | ExperimentKind::PhasePapr => {
                let ms = self.m_values()?;
                if let Some(&m) = ms.iter().find(|&&m| m == 0 || m > self.n) {
                    return bad(format!("M = {m} outside 1..={}", self.n));
                }
                self.bin_values()?;
            }
            ExperimentKind::OfdmPapr => {
                OfdmLayout::from_config(self)?;
                if !(self.ccdf_resolution > 0.0) {
                    return bad("ccdfResolution must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn m_values(&self) -> Result<Vec<usize>> {
        let ms = match &self.m_sweep {
            Some(s) => s.values()?,
            None => {
                let step = (self.n / 16).max(1);
                (1..=self.n / step).map(|k| k * step).collect()
            }
        };
        if ms.is_empty() {
            return Err(Error::InvalidParameter("empty M sweep".into()));
        }
        Ok(ms)
    }

    pub fn bin_values(&self) -> Result<Vec<f64>> {
        let spec = self.bins.unwrap_or(match self.kind {
            ExperimentKind::PhasePapr => BinSpec { start: 0.0, stop: 6.0, step: 0.05 },
            _ => BinSpec { start: 1.0, stop: 4.0, step: 0.02 },
        });
        spec.values()
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut s = self.solver.clone().unwrap_or_else(|| match self.kind {
            ExperimentKind::OfdmPapr => SolverConfig {
                max_iters: OFDM_MAX_ITERS,
                ..SolverConfig::default()
            },
            _ => SolverConfig::default(),
        });
        s.norm = self.norm;
        s
    }
}

/// Independent generator for trial `trial` of sweep point `point`.
pub fn child_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | (trial as u64 & 0xffff_ffff));
    rng
}

/// Convergence bookkeeping for one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PointStats {
    pub m: usize,
    pub rho: f64,
    pub trials: usize,
    pub converged: usize,
    pub failed: usize,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    /// First error message seen at this point, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl PointStats {
    pub fn allowed_failures(trials: usize, budget: f64) -> usize {
        (budget * trials as f64 + 1e-9).floor() as usize
    }
}

/// Error for the first sweep point whose failures exceed the budget.
pub fn check_failure_budget(stats: &[PointStats], budget: f64) -> Result<()> {
    for (point, s) in stats.iter().enumerate() {
        let allowed = PointStats::allowed_failures(s.trials, budget);
        if s.failed > allowed {
            return Err(Error::FailureBudget {
                point,
                failed: s.failed,
                trials: s.trials,
                budget: allowed,
            });
        }
    }
    Ok(())
}

/// Output of any experiment kind.
#[derive(Debug, Clone)]
pub enum ExperimentOutput {
    Phase(PhaseDiagramResult),
    Ofdm(OfdmResult),
}

impl ExperimentOutput {
    pub fn stats(&self) -> &[PointStats] {
        match self {
            ExperimentOutput::Phase(p) => &p.stats,
            ExperimentOutput::Ofdm(o) => std::slice::from_ref(&o.stats),
        }
    }

    /// Writes the CSV files into `dir` and returns their paths.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let files = match self {
            ExperimentOutput::Phase(p) => p.csv_files()?,
            ExperimentOutput::Ofdm(o) => o.csv_files()?,
        };
        let mut paths = Vec::with_capacity(files.len());
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::PhaseKu | ExperimentKind::PhasePapr => run_phase_diagram(cfg).map(ExperimentOutput::Phase),
        ExperimentKind::OfdmPapr => run_ofdm_papr(cfg).map(ExperimentOutput::Ofdm),
    }
}

/// Run record written next to the CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub build: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub failure_budget_ok: bool,
    pub points: Vec<PointStats>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// Shortest round-trip representation; stable across runs on one machine.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn config_defaults_and_strictness() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schemaVersion":1,"kind":"phase-ku","n":32,"mSweep":{"start":4,"stop":32,"step":4}}"#,
            &[],
        )
        .unwrap();
        assert_eq!(cfg.trials, 25);
        assert_eq!(cfg.m_values().unwrap(), vec![4, 8, 12, 16, 20, 24, 28, 32]);
        assert!(ExperimentConfig::from_json(r#"{"schemaVersion":1,"kind":"phase-ku","n":32,"trails":3}"#, &[]).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schemaVersion":3,"kind":"phase-ku","n":32}"#, &[]).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schemaVersion":1,"kind":"phase-ku","n":32,"mSweep":[40]}"#, &[]).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schemaVersion":1,"kind":"phase-ku","n":32,"trials":0}"#, &[]).is_err());
        let o = ExperimentConfig::from_json(
            r#"{"schemaVersion":1,"kind":"ofdm-papr","n":256}"#,
            &["trials=7".into(), "solver.maxIters=5".into()],
        )
        .unwrap();
        assert_eq!(o.trials, 7);
        assert_eq!(o.solver_config().max_iters, 5);
        assert_eq!(ExperimentConfig::new(ExperimentKind::OfdmPapr, 64).solver_config().max_iters, OFDM_MAX_ITERS);
    }

    #[test]
    fn child_streams_are_distinct_and_stable() {
        let a = child_rng(1, 0, 0).next_u64();
        assert_eq!(a, child_rng(1, 0, 0).next_u64());
        assert_ne!(a, child_rng(1, 0, 1).next_u64());
        assert_ne!(a, child_rng(1, 1, 0).next_u64());
        assert_ne!(a, child_rng(2, 0, 0).next_u64());
    }

    #[test]
    fn budget_rounds_down() {
        assert_eq!(PointStats::allowed_failures(25, 0.01), 0);
        assert_eq!(PointStats::allowed_failures(100, 0.01), 1);
        let s = PointStats {
            m: 4,
            rho: 0.5,
            trials: 100,
            converged: 98,
            failed: 2,
            mean_iterations: 1.0,
            max_iterations: 1,
            first_error: None,
            warning: None,
        };
        assert!(matches!(check_failure_budget(&[s], 0.01), Err(Error::FailureBudget { failed: 2, .. })));
    }
}
