//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [grid]
//! dim = 1
//! n = 64
//! length = 6.283185307179586   # optional, default 2*pi
//!
//! [physics]
//! mu = 1.0
//! t_final = 0.5
//! cfl_safety = 0.5             # optional
//! lambda = 2.0                 # optional
//!
//! [stress]
//! model = linear               # linear | cubic
//! kappa = 1.0
//! beta = 0.1                   # cubic only
//!
//! [sweep]
//! eps_list = 1e-1, 3e-2, 1e-2
//! init_preset = trig_smooth    # zero | trig_smooth
//! amp_a = 0.1
//! amp_b = 0.1
//! sample_every = 10
//! seed = 0
//!
//! [output]
//! dir = out
//! format = both                # csv | json | both
//! ```
//!
//! Unknown keys are rejected with their line number.

use serde::{Deserialize, Serialize};
use visco_core::grid::PeriodicGrid;
use visco_core::stress::StressModel;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPreset {
    Zero,
    TrigSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

/// Fully resolved run specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dim: usize,
    pub n_points: usize,
    pub length: f64,
    pub mu: f64,
    pub t_final: f64,
    pub cfl_safety: f64,
    pub lambda: f64,
    pub model: ModelKind,
    pub kappa: f64,
    pub beta: f64,
    /// Strictly decreasing positive relaxation parameters, all below `mu/4`.
    pub eps_list: Vec<f64>,
    pub init_preset: InitPreset,
    pub amp_a: f64,
    pub amp_b: f64,
    pub sample_every: usize,
    /// Seed for randomized property-test data only; simulations are
    /// deterministic and never draw from it.
    pub seed: u64,
    pub out_dir: String,
    pub format: OutputFormat,
}

impl RunSpec {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.dim, self.n_points, self.length).map_err(Into::into)
    }

    pub fn stress_model(&self) -> Result<StressModel> {
        match self.model {
            ModelKind::Linear => StressModel::linear(self.kappa).map_err(Into::into),
            ModelKind::Cubic => StressModel::cubic(self.kappa, self.beta).map_err(Into::into),
        }
    }
}

fn config_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config {
        line: Some(line),
        msg: msg.into(),
    }
}

fn invariant_err(msg: impl Into<String>) -> CliError {
    CliError::Config {
        line: None,
        msg: msg.into(),
    }
}

#[derive(Default)]
struct Raw {
    dim: Option<(usize, usize)>,
    n: Option<(usize, usize)>,
    length: Option<(f64, usize)>,
    mu: Option<(f64, usize)>,
    t_final: Option<(f64, usize)>,
    cfl_safety: Option<(f64, usize)>,
    lambda: Option<(f64, usize)>,
    model: Option<(ModelKind, usize)>,
    kappa: Option<(f64, usize)>,
    beta: Option<(f64, usize)>,
    eps_list: Option<(Vec<f64>, usize)>,
    init_preset: Option<(InitPreset, usize)>,
    amp_a: Option<(f64, usize)>,
    amp_b: Option<(f64, usize)>,
    sample_every: Option<(usize, usize)>,
    seed: Option<(u64, usize)>,
    dir: Option<(String, usize)>,
    format: Option<(OutputFormat, usize)>,
}

fn parse_number<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| {
        config_err(
            line,
            format!("cannot parse value `{value}` for key `{key}`"),
        )
    })
}

/// Parse a sectioned `key = value` document into a [`RunSpec`], rejecting
/// unknown keys and violated invariants with precise messages.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    let mut section = String::new();
    let mut raw = Raw::default();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(line_no, "unterminated section header"))?
                .trim();
            match name {
                "grid" | "physics" | "stress" | "sweep" | "output" => {
                    section = name.to_string();
                }
                other => return Err(config_err(line_no, format!("unknown section `{other}`"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("grid", "dim") => raw.dim = Some((parse_number(value, line_no, key)?, line_no)),
            ("grid", "n") => raw.n = Some((parse_number(value, line_no, key)?, line_no)),
            ("grid", "length") => raw.length = Some((parse_number(value, line_no, key)?, line_no)),
            ("physics", "mu") => raw.mu = Some((parse_number(value, line_no, key)?, line_no)),
            ("physics", "t_final") => {
                raw.t_final = Some((parse_number(value, line_no, key)?, line_no))
            }
            ("physics", "cfl_safety") => {
                raw.cfl_safety = Some((parse_number(value, line_no, key)?, line_no))
            }
            ("physics", "lambda") => {
                raw.lambda = Some((parse_number(value, line_no, key)?, line_no))
            }
            ("stress", "model") => {
                let kind = match value {
                    "linear" => ModelKind::Linear,
                    "cubic" => ModelKind::Cubic,
                    other => {
                        return Err(config_err(
                            line_no,
                            format!("unknown stress model `{other}` (expected linear or cubic)"),
                        ))
                    }
                };
                raw.model = Some((kind, line_no));
            }
            ("stress", "kappa") => raw.kappa = Some((parse_number(value, line_no, key)?, line_no)),
            ("stress", "beta") => raw.beta = Some((parse_number(value, line_no, key)?, line_no)),
            ("sweep", "eps_list") => {
                let mut list = Vec::new();
                for piece in value.split(',') {
                    list.push(parse_number(piece.trim(), line_no, key)?);
                }
                raw.eps_list = Some((list, line_no));
            }
            ("sweep", "init_preset") => {
                let preset = match value {
                    "zero" => InitPreset::Zero,
                    "trig_smooth" => InitPreset::TrigSmooth,
                    other => {
                        return Err(config_err(
                            line_no,
                            format!("unknown preset `{other}` (expected zero or trig_smooth)"),
                        ))
                    }
                };
                raw.init_preset = Some((preset, line_no));
            }
            ("sweep", "amp_a") => raw.amp_a = Some((parse_number(value, line_no, key)?, line_no)),
            ("sweep", "amp_b") => raw.amp_b = Some((parse_number(value, line_no, key)?, line_no)),
            ("sweep", "sample_every") => {
                raw.sample_every = Some((parse_number(value, line_no, key)?, line_no))
            }
            ("sweep", "seed") => raw.seed = Some((parse_number(value, line_no, key)?, line_no)),
            ("output", "dir") => raw.dir = Some((value.to_string(), line_no)),
            ("output", "format") => {
                let f = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    "both" => OutputFormat::Both,
                    other => {
                        return Err(config_err(
                            line_no,
                            format!("unknown format `{other}` (expected csv, json or both)"),
                        ))
                    }
                };
                raw.format = Some((f, line_no));
            }
            ("", _) => {
                return Err(config_err(
                    line_no,
                    format!("key `{key}` appears before any section header"),
                ))
            }
            (sec, _) => {
                return Err(config_err(
                    line_no,
                    format!("unknown key `{key}` in section [{sec}]"),
                ))
            }
        }
    }

    let require = |name: &str, missing: bool| -> Result<()> {
        if missing {
            Err(invariant_err(format!("missing required key `{name}`")))
        } else {
            Ok(())
        }
    };
    require("dim", raw.dim.is_none())?;
    require("n", raw.n.is_none())?;
    require("mu", raw.mu.is_none())?;
    require("t_final", raw.t_final.is_none())?;
    require("model", raw.model.is_none())?;
    require("kappa", raw.kappa.is_none())?;
    require("eps_list", raw.eps_list.is_none())?;
    let model = raw.model.unwrap().0;
    if model == ModelKind::Cubic && raw.beta.is_none() {
        return Err(invariant_err(
            "missing required key `beta` for the cubic model",
        ));
    }

    let spec = RunSpec {
        dim: raw.dim.unwrap().0,
        n_points: raw.n.unwrap().0,
        length: raw.length.map_or(PeriodicGrid::DEFAULT_LENGTH, |v| v.0),
        mu: raw.mu.unwrap().0,
        t_final: raw.t_final.unwrap().0,
        cfl_safety: raw.cfl_safety.map_or(0.5, |v| v.0),
        lambda: raw.lambda.map_or(2.0, |v| v.0),
        model,
        kappa: raw.kappa.unwrap().0,
        beta: raw.beta.map_or(0.0, |v| v.0),
        eps_list: raw.eps_list.unwrap().0,
        init_preset: raw.init_preset.map_or(InitPreset::TrigSmooth, |v| v.0),
        amp_a: raw.amp_a.map_or(0.1, |v| v.0),
        amp_b: raw.amp_b.map_or(0.1, |v| v.0),
        sample_every: raw.sample_every.map_or(10, |v| v.0),
        seed: raw.seed.map_or(0, |v| v.0),
        out_dir: raw.dir.map_or_else(|| "out".to_string(), |v| v.0),
        format: raw.format.map_or(OutputFormat::Both, |v| v.0),
    };
    validate(&spec)?;
    Ok(spec)
}

fn validate(spec: &RunSpec) -> Result<()> {
    if !(1..=3).contains(&spec.dim) {
        return Err(invariant_err(format!(
            "dim must be 1, 2 or 3, got {}",
            spec.dim
        )));
    }
    if spec.n_points < 8 || !spec.n_points.is_power_of_two() {
        return Err(invariant_err(format!(
            "n must be a power of two >= 8, got {}",
            spec.n_points
        )));
    }
    if !(spec.length.is_finite() && spec.length > 0.0) {
        return Err(invariant_err(format!(
            "length must be positive, got {}",
            spec.length
        )));
    }
    if !(spec.mu.is_finite() && spec.mu > 0.0) {
        return Err(invariant_err(format!(
            "mu must be positive, got {}",
            spec.mu
        )));
    }
    if !(spec.t_final.is_finite() && spec.t_final > 0.0) {
        return Err(invariant_err(format!(
            "t_final must be positive, got {}",
            spec.t_final
        )));
    }
    if !(spec.cfl_safety > 0.0 && spec.cfl_safety <= 1.0) {
        return Err(invariant_err(format!(
            "cfl_safety must lie in (0, 1], got {}",
            spec.cfl_safety
        )));
    }
    if !(spec.lambda.is_finite() && spec.lambda > 1.0) {
        return Err(invariant_err(format!(
            "lambda must exceed 1, got {}",
            spec.lambda
        )));
    }
    if !(spec.kappa.is_finite() && spec.kappa > 0.0) {
        return Err(invariant_err(format!(
            "kappa must be positive, got {}",
            spec.kappa
        )));
    }
    if !(spec.beta.is_finite() && spec.beta >= 0.0) {
        return Err(invariant_err(format!(
            "beta must be nonnegative, got {}",
            spec.beta
        )));
    }
    if spec.eps_list.is_empty() {
        return Err(invariant_err("eps_list must not be empty"));
    }
    for eps in &spec.eps_list {
        if !(eps.is_finite() && *eps > 0.0) {
            return Err(invariant_err(format!(
                "eps values must be positive, got {eps}"
            )));
        }
        if *eps >= spec.mu / 4.0 {
            return Err(invariant_err(format!(
                "eps {} >= mu/4 = {}",
                eps,
                spec.mu / 4.0
            )));
        }
    }
    for pair in spec.eps_list.windows(2) {
        if pair[1] >= pair[0] {
            return Err(invariant_err(format!(
                "eps_list must be strictly decreasing, got {} before {}",
                pair[0], pair[1]
            )));
        }
    }
    if spec.sample_every == 0 {
        return Err(invariant_err("sample_every must be at least 1"));
    }
    if !(spec.amp_a.is_finite() && spec.amp_b.is_finite()) {
        return Err(invariant_err("preset amplitudes must be finite"));
    }
    Ok(())
}
