//! Run reports: a human-readable `report.txt` and a `report.kv` record of
//! `key=value` lines that parses back into [`ReportRecord`].
//!
//! Floats in the record use Rust's shortest round-trip formatting, absent
//! values are written as `none`, and notes are stored as `note.<k>` keys.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::coupling::StabilityReport;
use crate::integrator::IntegratorStats;

use super::config::Mode;
use super::run::SimulationLog;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const STATES_FILE: &str = "states.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_RECORD_FILE: &str = "report.kv";

/// Outcome of one scenario run. Simulation fields are `None` for
/// analysis-only runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub topology: String,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub notes: Vec<String>,
    pub stability: StabilityReport,
    /// `d★` or `δ★`; zero when the disturbance is off.
    pub disturbance_bound: f64,
    /// `certificate` or `identity`; empty for discrete runs.
    pub weighting: String,
    pub final_error: Option<f64>,
    pub tail_from: Option<f64>,
    pub tail_sup: Option<f64>,
    /// `c·√m·d★`.
    pub iss_bound: Option<f64>,
    pub iss_pass: Option<bool>,
    pub lyapunov_initial: Option<f64>,
    pub lyapunov_max_increase: Option<f64>,
    pub lyapunov_increases: Option<usize>,
    pub summability: Option<f64>,
    pub summability_bound: Option<f64>,
    pub recon_residual: Option<f64>,
    pub integrator: Option<IntegratorStats>,
    pub wall_seconds: f64,
    pub trajectory_csv: Option<PathBuf>,
    pub states_csv: Option<PathBuf>,
}

/// Scalar fields of a [`RunReport`]; the certificate matrices are omitted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportRecord {
    pub mode: Mode,
    pub topology: String,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub weighting: String,
    pub lambda_min_l: f64,
    pub coupling_norm: f64,
    pub alpha_h: Option<f64>,
    pub alpha_h_sym: Option<f64>,
    pub alpha_f: Option<f64>,
    pub alpha_f_sym: Option<f64>,
    pub rho_s: Option<f64>,
    pub rho_a: Option<f64>,
    pub spectral_holds: bool,
    pub spectral_margin: f64,
    pub robust_holds: bool,
    pub robust_margin: f64,
    pub operator_stable: Option<bool>,
    pub operator_abscissa: Option<f64>,
    pub lmi_separable: Option<bool>,
    pub lmi_practical: Option<bool>,
    pub robust_tau: Option<f64>,
    pub iss_constant: Option<f64>,
    pub epsilon_star: Option<f64>,
    pub certificate_residual: Option<f64>,
    pub disturbance_bound: f64,
    pub final_error: Option<f64>,
    pub tail_from: Option<f64>,
    pub tail_sup: Option<f64>,
    pub iss_bound: Option<f64>,
    pub iss_pass: Option<bool>,
    pub lyapunov_initial: Option<f64>,
    pub lyapunov_max_increase: Option<f64>,
    pub lyapunov_increases: Option<usize>,
    pub summability: Option<f64>,
    pub summability_bound: Option<f64>,
    pub recon_residual: Option<f64>,
    pub steps_accepted: Option<usize>,
    pub steps_rejected: Option<usize>,
    pub rhs_evaluations: Option<usize>,
    pub wall_seconds: f64,
    pub trajectory_csv: Option<String>,
    pub states_csv: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("missing key '{0}'")]
    Missing(String),
    #[error("key '{key}': cannot parse '{value}'")]
    BadValue { key: String, value: String },
}

impl RunReport {
    pub fn record(&self) -> ReportRecord {
        let s = &self.stability;
        let cert = s.certificate.as_ref();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        ReportRecord {
            mode: self.mode,
            topology: self.topology.clone(),
            m: self.m,
            n: self.n,
            p: self.p,
            seed: self.seed,
            weighting: self.weighting.clone(),
            lambda_min_l: s.lambda_min_l,
            coupling_norm: s.coupling_norm,
            alpha_h: s.alpha_h,
            alpha_h_sym: s.alpha_h_sym,
            alpha_f: s.alpha_f,
            alpha_f_sym: s.alpha_f_sym,
            rho_s: s.rho_s,
            rho_a: s.rho_a,
            spectral_holds: s.spectral_holds,
            spectral_margin: s.spectral_margin,
            robust_holds: s.robust_holds,
            robust_margin: s.robust_margin,
            operator_stable: s.operator_stable,
            operator_abscissa: s.operator_abscissa,
            lmi_separable: s.lmi_separable,
            lmi_practical: s.lmi_practical,
            robust_tau: s.robust_tau,
            iss_constant: cert.map(|c| c.iss_constant),
            epsilon_star: cert.map(|c| c.epsilon_star),
            certificate_residual: cert.map(|c| c.residual),
            disturbance_bound: self.disturbance_bound,
            final_error: self.final_error,
            tail_from: self.tail_from,
            tail_sup: self.tail_sup,
            iss_bound: self.iss_bound,
            iss_pass: self.iss_pass,
            lyapunov_initial: self.lyapunov_initial,
            lyapunov_max_increase: self.lyapunov_max_increase,
            lyapunov_increases: self.lyapunov_increases,
            summability: self.summability,
            summability_bound: self.summability_bound,
            recon_residual: self.recon_residual,
            steps_accepted: self.integrator.map(|s| s.accepted),
            steps_rejected: self.integrator.map(|s| s.rejected),
            rhs_evaluations: self.integrator.map(|s| s.evaluations),
            wall_seconds: self.wall_seconds,
            trajectory_csv: path(&self.trajectory_csv),
            states_csv: path(&self.states_csv),
            notes: self.notes.clone(),
        }
    }
}

fn opt<T: fmt::Debug>(v: &Option<T>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => "none".to_string(),
    }
}

fn opt_str(v: &Option<String>) -> String {
    v.clone().unwrap_or_else(|| "none".to_string())
}

impl ReportRecord {
    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mode", self.mode.to_string()),
            ("topology", self.topology.clone()),
            ("m", self.m.to_string()),
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
            ("seed", self.seed.to_string()),
            ("weighting", self.weighting.clone()),
            ("lambda_min_l", format!("{:?}", self.lambda_min_l)),
            ("coupling_norm", format!("{:?}", self.coupling_norm)),
            ("alpha_h", opt(&self.alpha_h)),
            ("alpha_h_sym", opt(&self.alpha_h_sym)),
            ("alpha_f", opt(&self.alpha_f)),
            ("alpha_f_sym", opt(&self.alpha_f_sym)),
            ("rho_s", opt(&self.rho_s)),
            ("rho_a", opt(&self.rho_a)),
            ("spectral_holds", self.spectral_holds.to_string()),
            ("spectral_margin", format!("{:?}", self.spectral_margin)),
            ("robust_holds", self.robust_holds.to_string()),
            ("robust_margin", format!("{:?}", self.robust_margin)),
            ("operator_stable", opt(&self.operator_stable)),
            ("operator_abscissa", opt(&self.operator_abscissa)),
            ("lmi_separable", opt(&self.lmi_separable)),
            ("lmi_practical", opt(&self.lmi_practical)),
            ("robust_tau", opt(&self.robust_tau)),
            ("iss_constant", opt(&self.iss_constant)),
            ("epsilon_star", opt(&self.epsilon_star)),
            ("certificate_residual", opt(&self.certificate_residual)),
            ("disturbance_bound", format!("{:?}", self.disturbance_bound)),
            ("final_error", opt(&self.final_error)),
            ("tail_from", opt(&self.tail_from)),
            ("tail_sup", opt(&self.tail_sup)),
            ("iss_bound", opt(&self.iss_bound)),
            ("iss_pass", opt(&self.iss_pass)),
            ("lyapunov_initial", opt(&self.lyapunov_initial)),
            ("lyapunov_max_increase", opt(&self.lyapunov_max_increase)),
            ("lyapunov_increases", opt(&self.lyapunov_increases)),
            ("summability", opt(&self.summability)),
            ("summability_bound", opt(&self.summability_bound)),
            ("recon_residual", opt(&self.recon_residual)),
            ("steps_accepted", opt(&self.steps_accepted)),
            ("steps_rejected", opt(&self.steps_rejected)),
            ("rhs_evaluations", opt(&self.rhs_evaluations)),
            ("wall_seconds", format!("{:?}", self.wall_seconds)),
            ("trajectory_csv", opt_str(&self.trajectory_csv)),
            ("states_csv", opt_str(&self.states_csv)),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        for (i, note) in self.notes.iter().enumerate() {
            let _ = writeln!(out, "note.{}={}", i + 1, note.replace('\n', " "));
        }
        out
    }
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn raw(&self, key: &str) -> Result<&str, RecordError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| RecordError::Missing(key.to_string()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, RecordError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| RecordError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
        })
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, RecordError> {
        match self.raw(key)? {
            "none" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    fn opt_str(&self, key: &str) -> Result<Option<String>, RecordError> {
        Ok(match self.raw(key)? {
            "none" => None,
            v => Some(v.to_string()),
        })
    }
}

/// Parses the text written by [`ReportRecord::to_text`].
pub fn parse_record(text: &str) -> Result<ReportRecord, RecordError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(RecordError::Syntax { line: i + 1 })?;
        map.insert(k.to_string(), v.to_string());
    }
    let f = Fields(map);
    let mode_text = f.raw("mode")?;
    let mode = mode_text.parse().map_err(|_| RecordError::BadValue {
        key: "mode".into(),
        value: mode_text.into(),
    })?;
    let mut notes = Vec::new();
    while let Some(note) = f.0.get(&format!("note.{}", notes.len() + 1)) {
        notes.push(note.clone());
    }
    Ok(ReportRecord {
        mode,
        topology: f.raw("topology")?.to_string(),
        m: f.get("m")?,
        n: f.get("n")?,
        p: f.get("p")?,
        seed: f.get("seed")?,
        weighting: f.raw("weighting")?.to_string(),
        lambda_min_l: f.get("lambda_min_l")?,
        coupling_norm: f.get("coupling_norm")?,
        alpha_h: f.opt("alpha_h")?,
        alpha_h_sym: f.opt("alpha_h_sym")?,
        alpha_f: f.opt("alpha_f")?,
        alpha_f_sym: f.opt("alpha_f_sym")?,
        rho_s: f.opt("rho_s")?,
        rho_a: f.opt("rho_a")?,
        spectral_holds: f.get("spectral_holds")?,
        spectral_margin: f.get("spectral_margin")?,
        robust_holds: f.get("robust_holds")?,
        robust_margin: f.get("robust_margin")?,
        operator_stable: f.opt("operator_stable")?,
        operator_abscissa: f.opt("operator_abscissa")?,
        lmi_separable: f.opt("lmi_separable")?,
        lmi_practical: f.opt("lmi_practical")?,
        robust_tau: f.opt("robust_tau")?,
        iss_constant: f.opt("iss_constant")?,
        epsilon_star: f.opt("epsilon_star")?,
        certificate_residual: f.opt("certificate_residual")?,
        disturbance_bound: f.get("disturbance_bound")?,
        final_error: f.opt("final_error")?,
        tail_from: f.opt("tail_from")?,
        tail_sup: f.opt("tail_sup")?,
        iss_bound: f.opt("iss_bound")?,
        iss_pass: f.opt("iss_pass")?,
        lyapunov_initial: f.opt("lyapunov_initial")?,
        lyapunov_max_increase: f.opt("lyapunov_max_increase")?,
        lyapunov_increases: f.opt("lyapunov_increases")?,
        summability: f.opt("summability")?,
        summability_bound: f.opt("summability_bound")?,
        recon_residual: f.opt("recon_residual")?,
        steps_accepted: f.opt("steps_accepted")?,
        steps_rejected: f.opt("steps_rejected")?,
        rhs_evaluations: f.opt("rhs_evaluations")?,
        wall_seconds: f.get("wall_seconds")?,
        trajectory_csv: f.opt_str("trajectory_csv")?,
        states_csv: f.opt_str("states_csv")?,
        notes,
    })
}

fn show<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

fn show_e(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

/// Human-readable summary.
pub fn render_text(r: &RunReport) -> String {
    let s = &r.stability;
    let mut o = String::new();
    let _ = writeln!(o, "scenario: {} {} m={} n={} p={} seed={}", r.mode, r.topology, r.m, r.n, r.p, r.seed);
    for note in &r.notes {
        let _ = writeln!(o, "note: {note}");
    }
    let _ = writeln!(o, "\n[stability]");
    let _ = writeln!(o, "lambda_min(L)        {:.6e}", s.lambda_min_l);
    let _ = writeln!(o, "||A_m||_2            {:.6e}", s.coupling_norm);
    match r.mode {
        Mode::Continuous => {
            let _ = writeln!(o, "alpha_H              {}", show_e(s.alpha_h));
            let _ = writeln!(o, "alpha_H (sym)        {}", show_e(s.alpha_h_sym));
            let _ = writeln!(o, "alpha_F              {}", show_e(s.alpha_f));
            let _ = writeln!(o, "alpha_F (sym)        {}", show_e(s.alpha_f_sym));
        }
        Mode::Discrete => {
            let _ = writeln!(o, "rho_S                {}", show_e(s.rho_s));
            let _ = writeln!(o, "rho_A                {}", show_e(s.rho_a));
        }
    }
    let _ = writeln!(o, "spectral condition   {} (margin {:.6e})", s.spectral_holds, s.spectral_margin);
    let _ = writeln!(o, "robust condition     {} (margin {:.6e})", s.robust_holds, s.robust_margin);
    let _ = writeln!(o, "LMI separable        {}", show(s.lmi_separable));
    let _ = writeln!(o, "LMI practical        {}", show(s.lmi_practical));
    let _ = writeln!(o, "robust LMI tau       {}", show_e(s.robust_tau));
    let _ = writeln!(o, "operator stable      {}", show(s.operator_stable));
    let label = match r.mode {
        Mode::Continuous => "max Re eig",
        Mode::Discrete => "rho",
    };
    let _ = writeln!(o, "{:<21}{}", format!("operator {label}"), show_e(s.operator_abscissa));
    if let Some(c) = &s.certificate {
        let _ = writeln!(o, "\n[certificate]");
        let _ = writeln!(o, "residual (relative)  {:.6e}", c.residual);
        let _ = writeln!(o, "ISS constant         {:.6e}", c.iss_constant);
        let _ = writeln!(o, "epsilon              {:.6e}", c.epsilon_star);
    }
    if r.final_error.is_some() {
        let _ = writeln!(o, "\n[simulation]");
        if !r.weighting.is_empty() {
            let _ = writeln!(o, "weighting            {}", r.weighting);
        }
        let _ = writeln!(o, "final error          {}", show_e(r.final_error));
        let _ = writeln!(o, "tail sup from {:<7}{}", show(r.tail_from), show_e(r.tail_sup));
        let _ = writeln!(o, "disturbance bound    {:.6e}", r.disturbance_bound);
        let _ = writeln!(o, "ISS bound            {}", show_e(r.iss_bound));
        let _ = writeln!(o, "ISS pass             {}", show(r.iss_pass));
        let _ = writeln!(o, "V initial            {}", show_e(r.lyapunov_initial));
        let _ = writeln!(o, "V max increase       {}", show_e(r.lyapunov_max_increase));
        let _ = writeln!(o, "V increases          {}", show(r.lyapunov_increases));
        if r.summability.is_some() {
            let _ = writeln!(
                o,
                "summability          {} <= {}",
                show_e(r.summability),
                show_e(r.summability_bound)
            );
            let _ = writeln!(o, "reconstruction resid {}", show_e(r.recon_residual));
        }
        if let Some(st) = r.integrator {
            let _ = writeln!(
                o,
                "integrator           {} accepted, {} rejected, {} evaluations",
                st.accepted, st.rejected, st.evaluations
            );
        }
    }
    let _ = writeln!(o, "\nwall seconds         {:.6}", r.wall_seconds);
    if let Some(p) = &r.trajectory_csv {
        let _ = writeln!(o, "trajectory log       {}", p.display());
    }
    if let Some(p) = &r.states_csv {
        let _ = writeln!(o, "state log            {}", p.display());
    }
    o
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes `report.txt` and `report.kv` into `dir`, which must exist.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<(PathBuf, PathBuf), ReportError> {
    let text = dir.join(REPORT_TEXT_FILE);
    let record = dir.join(REPORT_RECORD_FILE);
    write_file(&text, &render_text(report))?;
    write_file(&record, &report.record().to_text())?;
    Ok((text, record))
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), ReportError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Creates `dir`, writes both CSV logs, records their paths in `report` and
/// emits the report files.
pub fn emit_all(report: &mut RunReport, log: &SimulationLog, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let traj = dir.join(TRAJECTORY_FILE);
    let states = dir.join(STATES_FILE);
    match log {
        SimulationLog::Continuous(l) => {
            write_csv(&traj, |w| l.write_csv(w))?;
            write_csv(&states, |w| l.write_states_csv(w))?;
        }
        SimulationLog::Discrete(l) => {
            write_csv(&traj, |w| l.write_csv(w))?;
            write_csv(&states, |w| l.write_states_csv(w))?;
        }
    }
    report.trajectory_csv = Some(traj);
    report.states_csv = Some(states);
    emit_report(report, dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Certificate;
    use crate::linalg::Matrix;

    fn sample() -> RunReport {
        RunReport {
            mode: Mode::Discrete,
            topology: "path".into(),
            m: 4,
            n: 2,
            p: 1,
            seed: 42,
            notes: vec!["first note".into(), "second = note".into()],
            stability: StabilityReport {
                lambda_min_l: 1.0,
                coupling_norm: 1.0000000000000002,
                rho_s: Some(0.5),
                rho_a: Some(0.1 + 0.2),
                spectral_holds: true,
                spectral_margin: -1e-300,
                operator_stable: Some(true),
                operator_abscissa: Some(std::f64::consts::PI),
                certificate: Some(Certificate {
                    p: Matrix::identity(1),
                    q: Matrix::identity(1),
                    iss_constant: 12.79,
                    epsilon_star: 0.333,
                    residual: 3e-16,
                }),
                ..Default::default()
            },
            disturbance_bound: 0.043,
            final_error: Some(0.0217),
            tail_from: Some(200.0),
            tail_sup: Some(f64::MIN_POSITIVE),
            iss_bound: Some(1.1),
            iss_pass: Some(true),
            lyapunov_increases: Some(0),
            integrator: Some(IntegratorStats {
                accepted: 10,
                rejected: 2,
                evaluations: 73,
            }),
            wall_seconds: 0.125,
            trajectory_csv: Some("/tmp/x/trajectory.csv".into()),
            ..Default::default()
        }
    }

    #[test]
    fn record_roundtrip() {
        let rec = sample().record();
        assert_eq!(parse_record(&rec.to_text()).unwrap(), rec);
        let empty = RunReport::default().record();
        assert_eq!(parse_record(&empty.to_text()).unwrap(), empty);
    }

    #[test]
    fn record_errors() {
        let text = sample().record().to_text();
        let missing: String = text.lines().filter(|l| !l.starts_with("seed=")).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_record(&missing).unwrap_err(), RecordError::Missing("seed".into()));
        let bad = text.replace("m=4", "m=four");
        assert!(matches!(parse_record(&bad).unwrap_err(), RecordError::BadValue { key, .. } if key == "m"));
        assert_eq!(parse_record("oops").unwrap_err(), RecordError::Syntax { line: 1 });
    }

    #[test]
    fn emitted_files_reparse() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        let (text, record) = emit_report(&r, dir.path()).unwrap();
        assert!(fs::read_to_string(text).unwrap().contains("ISS constant"));
        let back = parse_record(&fs::read_to_string(record).unwrap()).unwrap();
        assert_eq!(back, r.record());
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let e = emit_report(&sample(), &blocker.join("sub")).unwrap_err();
        assert!(e.to_string().contains("report.txt"));
    }
}
