//! File formats: frame descriptors, the interleaved little-endian `f64` binary format for
//! complex vectors and matrices, and strict JSON configuration with dotted-key overrides.
//!
//! Binary layout: each complex entry is two consecutive little-endian `f64` values (real,
//! imaginary). Matrices are stored row-major, so an `M × N` frame takes `16·M·N` bytes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::frames::{
    build_equiangular_parseval, build_gaussian, build_subsampled_dft, FrameFamily, FrameKind, FrameMeta,
    FrameOperator,
};
use crate::solvers::{solve_cram, solve_cramp, SolverConfig, SolverResult};
use crate::{Error, Result, C64};

/// Schema version written into descriptors and accepted on input.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest transform length a descriptor may request.
pub const MAX_TRANSFORM_LEN: usize = 1 << 22;

/// Largest number of matrix entries a descriptor may request.
pub const MAX_DENSE_ENTRIES: usize = 1 << 24;

/// Default alternating-projection sweeps for equiangular frames.
pub const DEFAULT_EQUIANGULAR_ITERS: usize = 200;

pub fn encode_complex_le(values: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_complex_le`]. Rejects truncated input and non-finite entries.
pub fn decode_complex_le(bytes: &[u8]) -> Result<Vec<C64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::Format(format!(
            "binary length {} is not a multiple of 16 bytes",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(16)
        .enumerate()
        .map(|(i, c)| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8-byte chunk"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8-byte chunk"));
            if re.is_finite() && im.is_finite() {
                Ok(C64::new(re, im))
            } else {
                Err(Error::Format(format!("entry {i} is not finite")))
            }
        })
        .collect()
}

pub fn read_complex_file(path: &Path) -> Result<Vec<C64>> {
    decode_complex_le(&fs::read(path)?)
}

pub fn write_complex_file(path: &Path, values: &[C64]) -> Result<()> {
    fs::write(path, encode_complex_le(values))?;
    Ok(())
}

/// JSON description of a frame.
///
/// `kind` selects the backing; `family` says how a dense frame was generated. Seeded families
/// are rebuilt from `seed` with ChaCha8; explicit dense frames need the `sidecar` binary. When
/// both a sidecar and a seed are present, the sidecar wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FrameDescriptor {
    pub schema_version: u32,
    pub kind: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FrameFamily>,
    /// Number of columns (for DFT kinds, the transform length).
    pub n: usize,
    /// Number of rows.
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Selected DFT rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversampling: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equiangular_iters: Option<usize>,
    /// Path of the matrix binary, relative to the descriptor file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

pub fn parse_frame_descriptor(text: &str) -> Result<FrameDescriptor> {
    let desc: FrameDescriptor = serde_json::from_str(text)?;
    check_schema(desc.schema_version)?;
    Ok(desc)
}

pub(crate) fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schemaVersion {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Format(format!("descriptor is missing `{what}`")))
}

/// Builds the frame described by `desc`. `sidecar` holds the matrix bytes for dense frames
/// stored explicitly.
pub fn frame_from_descriptor(desc: &FrameDescriptor, sidecar: Option<&[u8]>) -> Result<FrameOperator> {
    check_schema(desc.schema_version)?;
    let (n, m) = (desc.n, desc.m);
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidDimensions(format!("need 1 ≤ M ≤ N, got M = {m}, N = {n}")));
    }
    match desc.kind {
        FrameKind::SubsampledDft | FrameKind::OversampledDftToneMap => {
            if n > MAX_TRANSFORM_LEN {
                return Err(Error::InvalidDimensions(format!(
                    "transform length {n} exceeds {MAX_TRANSFORM_LEN}"
                )));
            }
            let oversampling = match desc.kind {
                FrameKind::OversampledDftToneMap => require(desc.oversampling, "oversampling")?,
                _ => desc.oversampling.unwrap_or(1),
            };
            let frame = match (&desc.omega, desc.seed) {
                (Some(omega), _) => {
                    Error::check_len(m, omega.len())?;
                    FrameOperator::dft_rows(n, omega.clone(), oversampling)?
                }
                (None, Some(seed)) if desc.kind == FrameKind::SubsampledDft => {
                    build_subsampled_dft(n, m, &mut ChaCha8Rng::seed_from_u64(seed))?
                }
                _ => return Err(Error::Format("descriptor is missing `omega`".into())),
            };
            let meta = FrameMeta { seed: desc.seed, ..frame.meta().clone() };
            Ok(frame.with_meta(meta))
        }
        FrameKind::Dense => {
            if m.checked_mul(n).is_none_or(|e| e > MAX_DENSE_ENTRIES) {
                return Err(Error::InvalidDimensions(format!(
                    "{m} × {n} exceeds {MAX_DENSE_ENTRIES} entries"
                )));
            }
            let family = desc.family.unwrap_or(FrameFamily::Explicit);
            if let Some(bytes) = sidecar {
                let entries = decode_complex_le(bytes)?;
                Error::check_len(m * n, entries.len())?;
                let matrix = DMatrix::from_row_slice(m, n, &entries);
                let meta = FrameMeta {
                    family,
                    seed: desc.seed,
                    coherence: None,
                    warning: None,
                };
                return FrameOperator::dense_with_meta(matrix, meta);
            }
            let seed = require(desc.seed, "sidecar` or `seed")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = match family {
                FrameFamily::Gaussian => build_gaussian(n, m, &mut rng)?,
                FrameFamily::EquiangularParseval => {
                    if n > crate::frames::DENSE_CAP {
                        return Err(Error::DenseCapExceeded { rows: n, cap: crate::frames::DENSE_CAP });
                    }
                    let iters = desc.equiangular_iters.unwrap_or(DEFAULT_EQUIANGULAR_ITERS);
                    build_equiangular_parseval(n, m, &mut rng, iters)?.0
                }
                other => {
                    return Err(Error::Format(format!(
                        "family {other:?} cannot be regenerated from a seed"
                    )))
                }
            };
            let meta = FrameMeta { seed: Some(seed), ..frame.meta().clone() };
            Ok(frame.with_meta(meta))
        }
    }
}

/// Descriptor plus, for dense frames, the row-major matrix bytes.
pub fn describe_frame(frame: &FrameOperator) -> (FrameDescriptor, Option<Vec<u8>>) {
    let meta = frame.meta();
    let mut desc = FrameDescriptor {
        schema_version: SCHEMA_VERSION,
        kind: frame.kind(),
        family: Some(meta.family),
        n: frame.cols(),
        m: frame.rows(),
        seed: meta.seed,
        omega: frame.tone_indices().map(<[usize]>::to_vec),
        oversampling: None,
        equiangular_iters: None,
        sidecar: None,
    };
    if frame.kind() == FrameKind::OversampledDftToneMap {
        desc.oversampling = Some(frame.oversampling());
    }
    let bytes = frame.dense_matrix().map(|d| {
        let row_major: Vec<C64> = d.transpose().iter().copied().collect();
        encode_complex_le(&row_major)
    });
    (desc, bytes)
}

/// Reads a descriptor and, if it names one, its sidecar (resolved next to the descriptor).
pub fn load_frame(path: &Path) -> Result<FrameOperator> {
    let desc = parse_frame_descriptor(&fs::read_to_string(path)?)?;
    let sidecar = match &desc.sidecar {
        Some(rel) => Some(fs::read(sidecar_path(path, rel))?),
        None => None,
    };
    frame_from_descriptor(&desc, sidecar.as_deref())
}

/// Writes `<path>` and, for dense frames, `<path stem>.bin` next to it.
pub fn save_frame(frame: &FrameOperator, path: &Path) -> Result<FrameDescriptor> {
    let (mut desc, bytes) = describe_frame(frame);
    if let Some(bytes) = bytes {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
        let name = format!("{stem}.bin");
        fs::write(sidecar_path(path, &name), bytes)?;
        desc.sidecar = Some(name);
    }
    fs::write(path, serde_json::to_string_pretty(&desc)?)?;
    Ok(desc)
}

fn sidecar_path(descriptor: &Path, rel: &str) -> PathBuf {
    descriptor.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Splits `a.b.c=value` into its key path and JSON value. Values that are not valid JSON are
/// taken as strings, so `family=gaussian` works without quoting.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Format(format!("override `{spec}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(Error::Format(format!("override key `{key}` has an empty segment")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path, value))
}

/// Sets the value at `path`, creating intermediate objects. Unknown keys are caught later by
/// the strict deserializer, not here.
pub fn apply_override(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path
        .split_last()
        .ok_or_else(|| Error::Format("empty override key".into()))?;
    let mut node = root;
    for (depth, seg) in parents.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Format(format!("override key `{}` is not an object", path[..depth].join(".")))
        })?;
        node = obj
            .entry(seg.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Format(format!("override key `{}` is not an object", parents.join("."))))?;
    obj.insert(last.clone(), value);
    Ok(())
}

/// Parses a JSON config, applies `key=value` overrides in order, then deserializes strictly.
pub fn parse_config<T: DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T> {
    let mut value: Value = serde_json::from_str(text)?;
    for spec in overrides {
        let (path, v) = parse_override(spec)?;
        apply_override(&mut value, &path, v)?;
    }
    Ok(serde_json::from_value(value)?)
}

/// Which solver `solve` runs. `Auto` picks Douglas–Rachford for Parseval frames with
/// `ε = 0` and the primal-dual method otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmChoice {
    #[default]
    Auto,
    Cram,
    Cramp,
}

/// Solver settings as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub algorithm: AlgorithmChoice,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            schema_version: SCHEMA_VERSION,
            algorithm: AlgorithmChoice::Auto,
            solver: SolverConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: Self = parse_config(text, overrides)?;
        check_schema(cfg.schema_version)?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn run(&self, frame: &FrameOperator, y: &[C64]) -> Result<SolverResult> {
        let cramp = match self.algorithm {
            AlgorithmChoice::Cram => false,
            AlgorithmChoice::Cramp => true,
            AlgorithmChoice::Auto => self.solver.epsilon == 0.0 && frame.certify_parseval().is_ok(),
        };
        if cramp {
            solve_cramp(frame, y, &self.solver)
        } else {
            solve_cram(frame, y, &self.solver)
        }
    }
}
