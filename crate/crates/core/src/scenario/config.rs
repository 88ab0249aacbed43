//! Flat `key=value` scenario documents.
//!
//! A line holds one `key = value` assignment, or several whitespace-separated
//! `key=value` tokens; `#` starts a comment. Matrices are written row-wise as `a,b;c,d`; signals use the
//! syntax of [`SignalSpec::parse`]. Custom graphs list sensing edges as
//! `receiver<-sender:weight` and source links as `receiver:weight`, both
//! comma-separated and 1-based.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::network::{SensingEdge, SourceEdge};
use crate::signal::{parse_angle, SignalSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Continuous,
    Discrete,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Continuous => "continuous",
            Mode::Discrete => "discrete",
        })
    }
}

impl FromStr for Mode {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "continuous" => Ok(Mode::Continuous),
            "discrete" => Ok(Mode::Discrete),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Star,
    Cyclic,
    Path,
    Custom {
        edges: Vec<SensingEdge>,
        source: Vec<SourceEdge>,
    },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Star => "star",
            Topology::Cyclic => "cyclic",
            Topology::Path => "path",
            Topology::Custom { .. } => "custom",
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "star" => Some(Topology::Star),
            "cyclic" => Some(Topology::Cyclic),
            "path" => Some(Topology::Path),
            _ => None,
        }
    }
}

/// Whether the continuous law weights the error with the certificate or `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingChoice {
    Certificate,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub topology: Topology,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub normalize: bool,

    /// `F★` or `A★`.
    pub source_matrix: Matrix,
    /// `G★` or `B★`.
    pub input_matrix: Matrix,
    /// `‖ΔF‖₂` or `‖ΔA‖₂`.
    pub perturbation: f64,
    /// `‖ΔG‖₂` or `‖ΔB‖₂`.
    pub input_perturbation: f64,
    pub input: SignalSpec,
    pub disturbance: SignalSpec,
    pub disturbance_enabled: bool,
    /// Overrides the bound derived from the disturbance signal.
    pub disturbance_bound: Option<f64>,
    pub x0: Vec<f64>,

    /// One `H_i` or `S_i` per agent.
    pub observer_blocks: Vec<Matrix>,
    /// `γ_φ` (continuous) or `γ` (discrete).
    pub gain: f64,
    /// `γ_ψ`, continuous only.
    pub gain_psi: f64,
    /// `φ`, discrete only.
    pub floor: f64,
    /// Agent states start in `Unif[−r, r]`.
    pub init_range: f64,
    pub weighting: WeightingChoice,

    pub horizon: f64,
    pub steps: usize,
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
    /// Start of the window used for the tail supremum.
    pub tail_from: f64,
    pub reconstruct: bool,
    pub out_dir: Option<PathBuf>,

    pub certificate_enabled: bool,
    /// `Q = q·I`.
    pub q_scale: f64,
    pub epsilon_search: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<&'static str>),
    #[error("line {line}: expected key=value, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    Duplicate { line: usize, key: String },
    #[error("key '{key}': cannot parse '{value}' as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("key '{key}': value {value} outside {range}")]
    OutOfRange {
        key: String,
        value: String,
        range: &'static str,
    },
    #[error("key '{key}': {detail}")]
    Dimension { key: String, detail: String },
    #[error("key '{key}': observer block is not Hurwitz (max real part {max_real:e})")]
    NotHurwitz { key: String, max_real: f64 },
    #[error("key '{key}': observer block is not Schur stable (spectral radius {radius:e})")]
    NotSchur { key: String, radius: f64 },
    #[error("key '{key}' does not apply to {mode} scenarios")]
    NotApplicable { key: String, mode: Mode },
}

const REQUIRED: [&str; 3] = ["mode", "topology", "m"];

const KEYS: &[&str] = &[
    "mode",
    "topology",
    "m",
    "n",
    "p",
    "seed",
    "graph.edges",
    "graph.source",
    "graph.normalize",
    "source.matrix",
    "source.input_matrix",
    "source.perturbation",
    "source.input_perturbation",
    "source.input",
    "source.disturbance",
    "source.disturbance_enabled",
    "source.disturbance_bound",
    "source.x0",
    "observer.block",
    "observer.gain",
    "observer.gain_psi",
    "observer.floor",
    "observer.init_range",
    "observer.weighting",
    "run.horizon",
    "run.steps",
    "run.rtol",
    "run.atol",
    "run.samples",
    "run.tail_from",
    "run.reconstruct",
    "run.out_dir",
    "certificate.enabled",
    "certificate.q_scale",
    "certificate.epsilon_search",
];

const CONTINUOUS_ONLY: &[&str] = &[
    "observer.gain_psi",
    "observer.weighting",
    "run.horizon",
    "run.rtol",
    "run.atol",
    "run.samples",
];
const DISCRETE_ONLY: &[&str] = &["observer.floor", "run.steps", "run.reconstruct"];

/// Per-agent override such as `observer.block.3`.
fn agent_block_index(key: &str) -> Option<usize> {
    key.strip_prefix("observer.block.")?.parse().ok()
}

/// Raw `key → (value, line)` map, before interpretation.
pub fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let tokens: Vec<&str> = if content.matches('=').count() == 1 {
            vec![content]
        } else {
            content.split_whitespace().collect()
        };
        for token in tokens {
            let Some((k, v)) = token.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: token.to_string(),
                });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: token.to_string(),
                });
            }
            if !KEYS.contains(&key) && agent_block_index(key).is_none() {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if out.insert(key.to_string(), (v.trim().to_string(), line)).is_some() {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
        }
    }
    Ok(out)
}

fn bad(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn range(key: &str, value: impl fmt::Display, range: &'static str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        range,
    }
}

pub fn parse_real(key: &str, value: &str) -> Result<f64, ConfigError> {
    match parse_angle(value) {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(bad(key, value, "a finite real number")),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

fn parse_count(key: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = value.parse().map_err(|_| bad(key, value, "a non-negative integer"))?;
    if v == 0 {
        return Err(range(key, v, "[1, inf)"));
    }
    Ok(v)
}

/// Row-wise matrix text, `a,b;c,d`.
pub fn parse_matrix(key: &str, value: &str) -> Result<Matrix, ConfigError> {
    let rows: Vec<Vec<f64>> = value
        .split(';')
        .map(|r| r.split(',').map(|v| parse_real(key, v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(bad(key, value, "a rectangular matrix 'a,b;c,d'"));
    }
    Ok(Matrix::from_vec(rows.len(), cols, rows.concat()))
}

pub fn format_matrix(a: &Matrix) -> String {
    (0..a.rows())
        .map(|r| a.row(r).iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_vector(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|v| parse_real(key, v)).collect()
}

fn parse_edges(key: &str, value: &str) -> Result<Vec<SensingEdge>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            let err = || bad(key, item, "edges 'receiver<-sender:weight'");
            let (pair, w) = item.split_once(':').ok_or_else(err)?;
            let (i, j) = pair.split_once("<-").ok_or_else(err)?;
            Ok((
                i.trim().parse().map_err(|_| err())?,
                j.trim().parse().map_err(|_| err())?,
                parse_real(key, w)?,
            ))
        })
        .collect()
}

fn parse_source_links(key: &str, value: &str) -> Result<Vec<SourceEdge>, ConfigError> {
    value
        .split(',')
        .map(|item| {
            let err = || bad(key, item, "source links 'receiver:weight'");
            let (i, w) = item.split_once(':').ok_or_else(err)?;
            Ok((i.trim().parse().map_err(|_| err())?, parse_real(key, w)?))
        })
        .collect()
}

fn parse_signal(key: &str, value: &str, dim: usize) -> Result<SignalSpec, ConfigError> {
    let s = SignalSpec::parse(value).map_err(|_| bad(key, value, "a signal 'sin:A:W:P|cos:A:W:P|c:X;...'"))?;
    if s.dim() != dim {
        return Err(ConfigError::Dimension {
            key: key.to_string(),
            detail: format!("signal has {} components, expected {dim}", s.dim()),
        });
    }
    Ok(s)
}

fn default_matrices(mode: Mode, n: usize, p: usize) -> (Option<Matrix>, Option<Matrix>) {
    if n != 2 || p != 1 {
        return (None, None);
    }
    match mode {
        Mode::Continuous => (
            Some(Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, -0.5]])),
            Some(Matrix::from_rows(&[&[0.0], &[1.0]])),
        ),
        Mode::Discrete => (
            Some(Matrix::from_rows(&[&[0.9, 0.1], &[-0.1, 0.95]])),
            Some(Matrix::from_rows(&[&[0.05], &[0.10]])),
        ),
    }
}

fn check_block(key: &str, mode: Mode, block: &Matrix, n: usize) -> Result<(), ConfigError> {
    if block.shape() != (n, n) {
        return Err(ConfigError::Dimension {
            key: key.to_string(),
            detail: format!("block is {}x{}, expected {n}x{n}", block.rows(), block.cols()),
        });
    }
    let spec = linalg::eigenvalues(block).map_err(|e| ConfigError::Dimension {
        key: key.to_string(),
        detail: e.to_string(),
    })?;
    match mode {
        Mode::Continuous if spec.max_real_part >= 0.0 => Err(ConfigError::NotHurwitz {
            key: key.to_string(),
            max_real: spec.max_real_part,
        }),
        Mode::Discrete if spec.spectral_radius >= 1.0 => Err(ConfigError::NotSchur {
            key: key.to_string(),
            radius: spec.spectral_radius,
        }),
        _ => Ok(()),
    }
}

/// Parses and validates a scenario document, filling in the defaults of the
/// reference experiments for every omitted key.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let map = tokenize(text)?;
    let missing: Vec<&'static str> = REQUIRED.iter().copied().filter(|k| !map.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    let get = |k: &str| map.get(k).map(|(v, _)| v.as_str());

    let mode_text = get("mode").unwrap_or_default();
    let mode: Mode = mode_text
        .parse()
        .map_err(|_| bad("mode", mode_text, "'continuous' or 'discrete'"))?;
    let not_for_mode = match mode {
        Mode::Continuous => DISCRETE_ONLY,
        Mode::Discrete => CONTINUOUS_ONLY,
    };
    if let Some(k) = not_for_mode.iter().find(|k| map.contains_key(**k)) {
        return Err(ConfigError::NotApplicable {
            key: k.to_string(),
            mode,
        });
    }

    let m = parse_count("m", get("m").unwrap_or_default())?;
    let n = get("n").map_or(Ok(2), |v| parse_count("n", v))?;
    let p = get("p").map_or(Ok(1), |v| parse_count("p", v))?;
    let seed = get("seed").map_or(Ok(42), |v| v.parse::<u64>().map_err(|_| bad("seed", v, "an unsigned integer")))?;

    let topo_text = get("topology").unwrap_or_default();
    let topology = match topo_text {
        "custom" => {
            let edges = parse_edges("graph.edges", get("graph.edges").unwrap_or(""))?;
            let source_text = get("graph.source").ok_or(ConfigError::MissingKeys(vec!["graph.source"]))?;
            let source = parse_source_links("graph.source", source_text)?;
            Topology::Custom { edges, source }
        }
        other => {
            if let Some(k) = ["graph.edges", "graph.source"].iter().find(|k| map.contains_key(**k)) {
                return Err(bad(k, get(k).unwrap_or_default(), "nothing unless topology=custom"));
            }
            Topology::builtin(other).ok_or_else(|| bad("topology", other, "star, cyclic, path or custom"))?
        }
    };
    let normalize = get("graph.normalize").map_or(Ok(true), |v| parse_bool("graph.normalize", v))?;

    let (def_a, def_b) = default_matrices(mode, n, p);
    let source_matrix = match get("source.matrix") {
        Some(v) => parse_matrix("source.matrix", v)?,
        None => def_a.ok_or(ConfigError::MissingKeys(vec!["source.matrix"]))?,
    };
    if source_matrix.shape() != (n, n) {
        return Err(ConfigError::Dimension {
            key: "source.matrix".into(),
            detail: format!("expected {n}x{n}, got {}x{}", source_matrix.rows(), source_matrix.cols()),
        });
    }
    let input_matrix = match get("source.input_matrix") {
        Some(v) => parse_matrix("source.input_matrix", v)?,
        None => def_b.ok_or(ConfigError::MissingKeys(vec!["source.input_matrix"]))?,
    };
    if input_matrix.shape() != (n, p) {
        return Err(ConfigError::Dimension {
            key: "source.input_matrix".into(),
            detail: format!("expected {n}x{p}, got {}x{}", input_matrix.rows(), input_matrix.cols()),
        });
    }
    let nonneg = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let v = get(key).map_or(Ok(default), |v| parse_real(key, v))?;
        if v < 0.0 {
            return Err(range(key, v, "[0, inf)"));
        }
        Ok(v)
    };
    let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let v = get(key).map_or(Ok(default), |v| parse_real(key, v))?;
        if v <= 0.0 {
            return Err(range(key, v, "(0, inf)"));
        }
        Ok(v)
    };
    let (def_pa, def_pb) = match mode {
        Mode::Continuous => (0.55, 0.50),
        Mode::Discrete => (0.1, 0.07),
    };
    let perturbation = nonneg("source.perturbation", def_pa)?;
    let input_perturbation = nonneg("source.input_perturbation", def_pb)?;

    let default_signals = n == 2 && p == 1;
    let (def_in, def_dist) = match mode {
        Mode::Continuous => ("sin:0.7:0.5:0|cos:1.5:1:pi/6", "sin:5.5:0.1:0;cos:2.75:0.3:0"),
        Mode::Discrete => ("sin:0.9:0.05:0|cos:0.6:0.1:pi/5", "sin:0.035:0.05:0;cos:0.025:0.09:0"),
    };
    let input = match get("source.input") {
        Some(v) => parse_signal("source.input", v, p)?,
        None if default_signals => SignalSpec::parse(def_in).expect("default input parses"),
        None => SignalSpec::zero(p),
    };
    let disturbance = match get("source.disturbance") {
        Some(v) => parse_signal("source.disturbance", v, n)?,
        None if default_signals => SignalSpec::parse(def_dist).expect("default disturbance parses"),
        None => SignalSpec::zero(n),
    };
    let disturbance_enabled =
        get("source.disturbance_enabled").map_or(Ok(false), |v| parse_bool("source.disturbance_enabled", v))?;
    let disturbance_bound = match get("source.disturbance_bound") {
        Some(_) => {
            let b = nonneg("source.disturbance_bound", 0.0)?;
            if !disturbance_check_by_sampling(&disturbance, b) {
                return Err(range("source.disturbance_bound", b, "[sup ||d(t)||, inf)"));
            }
            Some(b)
        }
        None => None,
    };
    let x0 = match get("source.x0") {
        Some(v) => parse_vector("source.x0", v)?,
        None if n == 2 => match mode {
            Mode::Continuous => vec![1.0, -0.5],
            Mode::Discrete => vec![1.0, -0.6],
        },
        None => vec![0.0; n],
    };
    if x0.len() != n {
        return Err(ConfigError::Dimension {
            key: "source.x0".into(),
            detail: format!("expected {n} entries, got {}", x0.len()),
        });
    }

    let default_block = match mode {
        Mode::Continuous => Matrix::identity(n).scale(-2.0),
        Mode::Discrete => Matrix::identity(n).scale(0.5),
    };
    let shared = match get("observer.block") {
        Some(v) => parse_matrix("observer.block", v)?,
        None => default_block,
    };
    check_block("observer.block", mode, &shared, n)?;
    let mut observer_blocks = vec![shared; m];
    for (key, (value, _)) in &map {
        if let Some(i) = agent_block_index(key) {
            if i == 0 || i > m {
                return Err(range(key, i, "agent index in [1, m]"));
            }
            let block = parse_matrix(key, value)?;
            check_block(key, mode, &block, n)?;
            observer_blocks[i - 1] = block;
        }
    }

    let gain = match mode {
        Mode::Continuous => positive("observer.gain", 10.0)?,
        Mode::Discrete => {
            let g = get("observer.gain").map_or(Ok(1.3), |v| parse_real("observer.gain", v))?;
            if !(g > 0.0 && g < 2.0) {
                return Err(range("observer.gain", g, "(0, 2)"));
            }
            g
        }
    };
    let gain_psi = match mode {
        Mode::Continuous => positive("observer.gain_psi", gain)?,
        Mode::Discrete => gain,
    };
    let floor = positive("observer.floor", 0.01)?;
    let init_range = nonneg("observer.init_range", 1.0)?;
    let weighting = match get("observer.weighting") {
        None | Some("certificate") => WeightingChoice::Certificate,
        Some("identity") => WeightingChoice::Identity,
        Some(v) => return Err(bad("observer.weighting", v, "'certificate' or 'identity'")),
    };

    let horizon = positive("run.horizon", 30.0)?;
    let steps = get("run.steps").map_or(Ok(300), |v| parse_count("run.steps", v))?;
    let rtol = positive("run.rtol", 1e-6)?;
    let atol = positive("run.atol", 1e-8)?;
    let samples = get("run.samples").map_or(Ok(501), |v| parse_count("run.samples", v))?;
    if mode == Mode::Continuous && samples < 2 {
        return Err(range("run.samples", samples, "[2, inf)"));
    }
    let (def_tail, tail_end) = match mode {
        Mode::Continuous => (2.0 / 3.0 * horizon, horizon),
        Mode::Discrete => ((steps as f64 * 2.0 / 3.0).round(), steps as f64),
    };
    let tail_from = nonneg("run.tail_from", def_tail)?;
    if tail_from > tail_end {
        return Err(range("run.tail_from", tail_from, "[0, horizon or steps]"));
    }
    let reconstruct = get("run.reconstruct").map_or(Ok(true), |v| parse_bool("run.reconstruct", v))?;
    let out_dir = get("run.out_dir").map(PathBuf::from);

    let certificate_enabled =
        get("certificate.enabled").map_or(Ok(true), |v| parse_bool("certificate.enabled", v))?;
    let q_scale = positive("certificate.q_scale", 1.0)?;
    let epsilon_search =
        get("certificate.epsilon_search").map_or(Ok(true), |v| parse_bool("certificate.epsilon_search", v))?;

    Ok(ScenarioConfig {
        mode,
        topology,
        m,
        n,
        p,
        seed,
        normalize,
        source_matrix,
        input_matrix,
        perturbation,
        input_perturbation,
        input,
        disturbance,
        disturbance_enabled,
        disturbance_bound,
        x0,
        observer_blocks,
        gain,
        gain_psi,
        floor,
        init_range,
        weighting,
        horizon,
        steps,
        rtol,
        atol,
        samples,
        tail_from,
        reconstruct,
        out_dir,
        certificate_enabled,
        q_scale,
        epsilon_search,
    })
}

/// True when `‖d(t)‖ ≤ bound` on a dense sample grid over `[0, 1000]`.
fn disturbance_check_by_sampling(signal: &SignalSpec, bound: f64) -> bool {
    (0..20_000).all(|k| {
        let v = signal.eval(k as f64 * 0.05);
        v.iter().map(|x| x * x).sum::<f64>().sqrt() <= bound + 1e-12
    })
}

impl ScenarioConfig {
    /// Defaults of the reference experiment for `mode` on a built-in topology.
    pub fn reference(mode: Mode, topology: &str, m: usize) -> Result<Self, ConfigError> {
        parse_config(&format!("mode={mode} topology={topology} m={m}"))
    }

    /// `d★` or `δ★`: the configured bound, else the signal's analytic bound.
    pub fn disturbance_bound(&self) -> f64 {
        if !self.disturbance_enabled {
            return 0.0;
        }
        self.disturbance_bound.unwrap_or_else(|| self.disturbance.bound())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_discrete_document_gets_defaults() {
        let c = parse_config("mode=discrete topology=star m=4").unwrap();
        assert_eq!(c.gain, 1.3);
        assert_eq!(c.floor, 0.01);
        assert_eq!(c.steps, 300);
        assert_eq!(c.observer_blocks, vec![Matrix::identity(2).scale(0.5); 4]);
        assert_eq!(c.x0, vec![1.0, -0.6]);
        assert_eq!(c.perturbation, 0.1);
        assert_eq!(c.input_perturbation, 0.07);
        assert!(!c.disturbance_enabled);
    }

    #[test]
    fn spaced_assignments_match_tokens() {
        let spaced = parse_config("mode = discrete\ntopology = custom\nm = 2\ngraph.edges = 1<-2:0.5, 2<-1:0.5\ngraph.source = 1:0.5,2:0.5").unwrap();
        let packed = parse_config("mode=discrete topology=custom m=2 graph.edges=1<-2:0.5,2<-1:0.5 graph.source=1:0.5,2:0.5").unwrap();
        assert_eq!(spaced, packed);
        assert!(parse_config("mode = discrete topology=star").is_err());
    }

    #[test]
    fn minimal_continuous_document_gets_defaults() {
        let c = parse_config("mode=continuous\ntopology=cyclic\nm=4  # comment").unwrap();
        assert_eq!(c.gain, 10.0);
        assert_eq!(c.gain_psi, 10.0);
        assert_eq!(c.horizon, 30.0);
        assert_eq!((c.rtol, c.atol), (1e-6, 1e-8));
        assert_eq!(c.samples, 501);
        assert_eq!(c.tail_from, 20.0);
        assert_eq!(c.source_matrix, Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, -0.5]]));
        assert!((c.disturbance.bound() - 5.5 * 1.25f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.weighting, WeightingChoice::Certificate);
    }

    #[test]
    fn gain_outside_unit_interval_is_rejected() {
        let e = parse_config("mode=discrete topology=star m=4 observer.gain=2.5").unwrap_err();
        assert!(matches!(&e, ConfigError::OutOfRange { key, range: "(0, 2)", .. } if key == "observer.gain"));
        assert!(e.to_string().contains("(0, 2)"));
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let e = parse_config("").unwrap_err();
        assert_eq!(e, ConfigError::MissingKeys(vec!["mode", "topology", "m"]));
        assert!(e.to_string().contains("mode, topology, m"));
    }

    #[test]
    fn custom_topology() {
        let c = parse_config("mode=continuous topology=custom m=2 graph.edges=1<-2:0.5,2<-1:0.5 graph.source=1:0.5,2:0.5")
            .unwrap();
        assert_eq!(
            c.topology,
            Topology::Custom {
                edges: vec![(1, 2, 0.5), (2, 1, 0.5)],
                source: vec![(1, 0.5), (2, 0.5)]
            }
        );
    }

    #[test]
    fn per_agent_blocks() {
        let c = parse_config("mode=continuous topology=path m=3 observer.block.2=-1,0;0,-3").unwrap();
        assert_eq!(c.observer_blocks[1], Matrix::from_diag(&[-1.0, -3.0]));
        assert_eq!(c.observer_blocks[0], Matrix::identity(2).scale(-2.0));
    }

    #[test]
    fn matrix_roundtrip() {
        let a = Matrix::from_rows(&[&[0.1, -2.0], &[1e-17, 3.0]]);
        assert_eq!(parse_matrix("k", &format_matrix(&a)).unwrap(), a);
        assert!(parse_matrix("k", "1,2;3").is_err());
    }
}
