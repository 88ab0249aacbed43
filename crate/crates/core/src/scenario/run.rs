//! The scenario pipeline: network, balance, reachability, operator,
//! stability, certificate, simulation, evaluation and emission.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::continuous::{ContinuousObserverState, ContinuousSourceModel, ContinuousSystem, TrajectoryLog, Weighting};
use crate::coupling::{self, AnalysisInput, StabilityReport};
use crate::discrete::{DiscreteLog, DiscreteObserverState, DiscreteSourceModel, DiscreteSystem, Reconstructor};
use crate::integrator::Tolerances;
use crate::linalg::{Matrix, MAX_CERTIFICATE_DIM};
use crate::network::{self, LaplacianBundle, SensorNetwork};
use crate::signal::SignalSpec;

use super::config::{Mode, ScenarioConfig, Topology, WeightingChoice};
use super::report::{self, RunReport};

/// `ε` used when the golden-section search is disabled.
pub const FIXED_EPSILON: f64 = 0.5;

/// Continuous runs count `V(t_{k+1}) − V(t_k)` above `slack·V(0)` as an increase.
pub const LYAPUNOV_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Network,
    Balance,
    Reachability,
    Operator,
    Stability,
    Certificate,
    Simulate,
    Evaluate,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Network => "network",
            Stage::Balance => "balance",
            Stage::Reachability => "reachability",
            Stage::Operator => "operator",
            Stage::Stability => "stability",
            Stage::Certificate => "certificate",
            Stage::Simulate => "simulate",
            Stage::Evaluate => "evaluate",
            Stage::Emit => "emit",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage} stage failed: {message}")]
pub struct RunError {
    pub stage: Stage,
    pub message: String,
}

impl RunError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Simulate even when the operator is certified unstable.
    pub force_unstable: bool,
    /// Overrides `run.out_dir`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationLog {
    Continuous(TrajectoryLog),
    Discrete(DiscreteLog),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub log: Option<SimulationLog>,
}

/// Network, source draws and initial agent states of a scenario.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub network: SensorNetwork,
    pub bundle: Option<LaplacianBundle>,
    /// `ΔF` or `ΔA`.
    pub delta_state: Matrix,
    /// `ΔG` or `ΔB`.
    pub delta_input: Matrix,
    /// Stacked `x_i(0)`.
    pub agents0: Vec<f64>,
    pub notes: Vec<String>,
}

/// Random matrix rescaled to spectral norm `bound`.
fn perturbation(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let raw = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let norm = raw.norm2();
    if bound == 0.0 || norm == 0.0 {
        return Matrix::zeros(rows, cols);
    }
    raw.scale(bound / norm)
}

/// Builds the network and draws `ΔF, ΔG, x_i(0)` in that order from the seed.
/// The Laplacian bundle is only assembled when `with_bundle` is set.
pub fn assemble(cfg: &ScenarioConfig, with_bundle: bool) -> Result<Assembly, RunError> {
    let mut notes = Vec::new();
    let mut net = match &cfg.topology {
        Topology::Star => SensorNetwork::star(cfg.m),
        Topology::Cyclic => SensorNetwork::cyclic(cfg.m),
        Topology::Path => SensorNetwork::path(cfg.m),
        Topology::Custom { edges, source } => {
            network::build_network(edges, source, cfg.m).map_err(|e| RunError::new(Stage::Network, e))?
        }
    };
    if !net.is_balanced() {
        if !cfg.normalize {
            let agent = (0..net.m())
                .find(|&i| (net.total_weight(i) - 1.0).abs() > network::BALANCE_TOL)
                .unwrap_or(0);
            return Err(RunError::new(
                Stage::Balance,
                network::NetworkError::Unbalanced {
                    agent: agent + 1,
                    row_sum: net.total_weight(agent),
                },
            ));
        }
        net = network::normalize_balanced(&net).map_err(|e| RunError::new(Stage::Balance, e))?;
        notes.push("network was not balanced; incoming weights were normalized per agent".to_string());
    }
    let unreached = network::unreachable_agents(&net);
    if !unreached.is_empty() {
        return Err(RunError::new(
            Stage::Reachability,
            network::NetworkError::Unreachable { unreached },
        ));
    }
    let bundle = if with_bundle {
        Some(network::laplacian_bundle(&net).map_err(|e| RunError::new(Stage::Operator, e))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let delta_state = perturbation(&mut rng, cfg.n, cfg.n, cfg.perturbation);
    let delta_input = perturbation(&mut rng, cfg.n, cfg.p, cfg.input_perturbation);
    let agents0 = (0..cfg.m * cfg.n)
        .map(|_| rng.gen_range(-1.0..1.0) * cfg.init_range)
        .collect();
    Ok(Assembly {
        network: net,
        bundle,
        delta_state,
        delta_input,
        agents0,
        notes,
    })
}

fn active_disturbance(cfg: &ScenarioConfig) -> SignalSpec {
    if cfg.disturbance_enabled {
        cfg.disturbance.clone()
    } else {
        SignalSpec::zero(cfg.n)
    }
}

/// True when dense operators, LMIs and certificates are affordable.
pub fn dense_feasible(cfg: &ScenarioConfig) -> bool {
    cfg.m * cfg.n <= MAX_CERTIFICATE_DIM
}

fn stability(cfg: &ScenarioConfig, asm: &Assembly) -> Result<StabilityReport, RunError> {
    let bundle = asm.bundle.as_ref().expect("bundle assembled for analysis");
    let source = &cfg.source_matrix + &asm.delta_state;
    let input = AnalysisInput {
        bundle,
        observer_blocks: &cfg.observer_blocks,
        source: &source,
        nominal: &cfg.source_matrix,
        perturbation_bound: cfg.perturbation,
        dense: dense_feasible(cfg),
        q_scale: cfg.certificate_enabled.then_some(cfg.q_scale),
        fixed_epsilon: (!cfg.epsilon_search).then_some(FIXED_EPSILON),
    };
    let result = match cfg.mode {
        Mode::Continuous => coupling::analyze_continuous(input),
        Mode::Discrete => coupling::analyze_discrete(input),
    };
    result.map_err(|e| {
        let stage = match e {
            coupling::CouplingError::CandidateNotPd | coupling::CouplingError::Unstable => Stage::Certificate,
            _ => Stage::Stability,
        };
        RunError::new(stage, e)
    })
}

fn base_report(cfg: &ScenarioConfig, asm: &Assembly, stability: StabilityReport) -> RunReport {
    let mut notes = asm.notes.clone();
    if !dense_feasible(cfg) {
        notes.push(format!(
            "m*n = {} exceeds {MAX_CERTIFICATE_DIM}; dense operator, LMI and certificate checks skipped",
            cfg.m * cfg.n
        ));
    }
    RunReport {
        mode: cfg.mode,
        topology: cfg.topology.name().to_string(),
        m: cfg.m,
        n: cfg.n,
        p: cfg.p,
        seed: cfg.seed,
        notes,
        stability,
        disturbance_bound: cfg.disturbance_bound(),
        ..RunReport::default()
    }
}

/// Stages up to and including the certificate; no simulation.
pub fn analyze_scenario(cfg: &ScenarioConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let asm = assemble(cfg, true)?;
    let st = stability(cfg, &asm)?;
    let mut report = base_report(cfg, &asm, st);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Full pipeline. Logs and reports are written when an output directory is
/// given by `opts` or the config.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    let asm = assemble(cfg, true)?;
    let st = stability(cfg, &asm)?;
    if st.operator_stable == Some(false) && !opts.force_unstable {
        return Err(RunError::new(
            Stage::Operator,
            format!(
                "coupling operator is unstable ({} = {:e}); pass --force-unstable to simulate anyway",
                match cfg.mode {
                    Mode::Continuous => "max Re lambda",
                    Mode::Discrete => "spectral radius",
                },
                st.operator_abscissa.unwrap_or(f64::NAN)
            ),
        ));
    }
    let mut report = base_report(cfg, &asm, st);
    let log = match cfg.mode {
        Mode::Continuous => {
            let log = simulate_continuous(cfg, &asm, &mut report)?;
            evaluate_continuous(cfg, &log, &mut report);
            SimulationLog::Continuous(log)
        }
        Mode::Discrete => {
            let log = simulate_discrete(cfg, &asm, &mut report)?;
            evaluate_discrete(cfg, &log, &mut report);
            SimulationLog::Discrete(log)
        }
    };
    report.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = opts.out_dir.clone().or_else(|| cfg.out_dir.clone()) {
        report::emit_all(&mut report, &log, &dir).map_err(|e| RunError::new(Stage::Emit, e))?;
    }
    Ok(RunOutcome {
        report,
        log: Some(log),
    })
}

fn continuous_system(cfg: &ScenarioConfig, asm: &Assembly, weighting: Weighting) -> Result<ContinuousSystem, RunError> {
    let source = ContinuousSourceModel {
        f_star: cfg.source_matrix.clone(),
        g_star: cfg.input_matrix.clone(),
        delta_f: asm.delta_state.clone(),
        delta_g: asm.delta_input.clone(),
        input: cfg.input.clone(),
        disturbance: active_disturbance(cfg),
        disturbance_bound: cfg.disturbance_bound(),
    };
    ContinuousSystem::new(
        asm.network.clone(),
        source,
        cfg.observer_blocks.clone(),
        cfg.gain,
        cfg.gain_psi,
        weighting,
    )
    .map_err(|e| RunError::new(Stage::Simulate, e))
}

fn discrete_system(cfg: &ScenarioConfig, asm: &Assembly) -> Result<DiscreteSystem, RunError> {
    let source = DiscreteSourceModel {
        a_star: cfg.source_matrix.clone(),
        b_star: cfg.input_matrix.clone(),
        delta_a: asm.delta_state.clone(),
        delta_b: asm.delta_input.clone(),
        input: cfg.input.clone(),
        disturbance: active_disturbance(cfg),
        disturbance_bound: cfg.disturbance_bound(),
    };
    DiscreteSystem::new(
        asm.network.clone(),
        source,
        cfg.observer_blocks.clone(),
        cfg.gain,
        cfg.floor,
    )
    .map_err(|e| RunError::new(Stage::Simulate, e))
}

fn tolerances(cfg: &ScenarioConfig) -> Tolerances {
    Tolerances {
        rtol: cfg.rtol,
        atol: cfg.atol,
        ..Tolerances::default()
    }
}

fn simulate_continuous(cfg: &ScenarioConfig, asm: &Assembly, report: &mut RunReport) -> Result<TrajectoryLog, RunError> {
    let certificate = report.stability.certificate.as_ref();
    let weighting = match (cfg.weighting, certificate) {
        (WeightingChoice::Certificate, Some(c)) => Weighting::Dense(c.p.clone()),
        (WeightingChoice::Certificate, None) => {
            report
                .notes
                .push("no certificate available; adaptation uses identity weighting".to_string());
            Weighting::Identity
        }
        (WeightingChoice::Identity, _) => Weighting::Identity,
    };
    report.weighting = match weighting {
        Weighting::Dense(_) => "certificate",
        Weighting::Identity => "identity",
    }
    .to_string();
    let sys = continuous_system(cfg, asm, weighting)?;
    let initial = ContinuousObserverState::with_zero_estimates(cfg.x0.clone(), asm.agents0.clone(), cfg.m, cfg.p);
    sys.integrate(&initial, cfg.horizon, &tolerances(cfg), cfg.samples)
        .map_err(|e| RunError::new(Stage::Simulate, e))
}

fn simulate_discrete(cfg: &ScenarioConfig, asm: &Assembly, report: &mut RunReport) -> Result<DiscreteLog, RunError> {
    let sys = discrete_system(cfg, asm)?;
    let rec = if cfg.reconstruct && dense_feasible(cfg) {
        let bundle = asm.bundle.as_ref().expect("bundle assembled for simulation");
        let source = &cfg.source_matrix + &asm.delta_state;
        let op = coupling::build_s(bundle, &cfg.observer_blocks, &source).map_err(|e| RunError::new(Stage::Operator, e))?;
        Some(Reconstructor::new(&op, bundle).map_err(|e| RunError::new(Stage::Operator, e))?)
    } else {
        if cfg.reconstruct {
            report
                .notes
                .push("reconstruction skipped: m*n too large for the dense operator".to_string());
        }
        None
    };
    let initial = DiscreteObserverState::with_zero_estimates(cfg.x0.clone(), asm.agents0.clone(), cfg.m, cfg.p);
    sys.run(&initial, cfg.steps, rec.as_ref())
        .map_err(|e| RunError::new(Stage::Simulate, e))
}

/// Compares the tail with `c·√m·d★`; skipped without a disturbance.
fn iss_check(report: &mut RunReport, tail: f64) {
    let Some(c) = report.stability.iss_constant() else {
        return;
    };
    if report.disturbance_bound == 0.0 {
        return;
    }
    let bound = c * (report.m as f64).sqrt() * report.disturbance_bound;
    report.iss_bound = Some(bound);
    report.iss_pass = Some(tail <= bound);
}

fn evaluate_continuous(cfg: &ScenarioConfig, log: &TrajectoryLog, report: &mut RunReport) {
    report.final_error = Some(log.final_error());
    report.tail_from = Some(cfg.tail_from);
    report.tail_sup = Some(log.tail_sup(cfg.tail_from));
    let v0 = log.lyapunov.first().copied().unwrap_or(0.0);
    report.lyapunov_initial = Some(v0);
    report.lyapunov_max_increase = Some(log.max_lyapunov_increase());
    report.lyapunov_increases = Some(
        log.lyapunov
            .windows(2)
            .filter(|w| w[1] - w[0] > LYAPUNOV_SLACK * v0)
            .count(),
    );
    report.integrator = Some(log.stats);
    iss_check(report, log.tail_sup(cfg.tail_from));
}

fn evaluate_discrete(cfg: &ScenarioConfig, log: &DiscreteLog, report: &mut RunReport) {
    report.final_error = Some(log.final_error());
    let k_from = cfg.tail_from.round() as usize;
    report.tail_from = Some(k_from as f64);
    report.tail_sup = Some(log.tail_sup(k_from));
    report.lyapunov_initial = log.v.first().copied();
    report.lyapunov_max_increase = log.v.windows(2).map(|w| w[1] - w[0]).reduce(f64::max);
    report.lyapunov_increases = Some(log.v_increases());
    report.summability = Some(log.summability);
    report.summability_bound = Some(log.summability_bound(cfg.gain));
    if cfg.reconstruct && dense_feasible(cfg) {
        report.recon_residual = Some(log.max_recon_residual());
    }
    iss_check(report, log.tail_sup(k_from));
}

/// Simulation only, with no analysis, certificate or reconstruction.
/// Returns the wall time of assembly plus simulation in seconds.
pub fn simulate_only(cfg: &ScenarioConfig) -> Result<f64, RunError> {
    let start = Instant::now();
    let asm = assemble(cfg, false)?;
    let mut scratch = RunReport::default();
    match cfg.mode {
        Mode::Continuous => {
            let mut cfg = cfg.clone();
            cfg.weighting = WeightingChoice::Identity;
            simulate_continuous(&cfg, &asm, &mut scratch)?;
        }
        Mode::Discrete => {
            let mut cfg = cfg.clone();
            cfg.reconstruct = false;
            simulate_discrete(&cfg, &asm, &mut scratch)?;
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::parse_config;

    #[test]
    fn continuous_reference_pipeline() {
        let cfg = ScenarioConfig::reference(Mode::Continuous, "star", 4).unwrap();
        let out = run_scenario(&cfg, &RunOptions::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.stability.operator_stable, Some(true));
        assert!(r.stability.certificate.is_some());
        assert_eq!(r.weighting, "certificate");
        assert_eq!(r.lyapunov_increases, Some(0));
        assert!(r.final_error.unwrap().is_finite());
        assert!(matches!(out.log, Some(SimulationLog::Continuous(_))));
    }

    #[test]
    fn discrete_reference_pipeline() {
        let cfg = ScenarioConfig::reference(Mode::Discrete, "path", 4).unwrap();
        let r = run_scenario(&cfg, &RunOptions::default()).unwrap().report;
        assert_eq!(r.stability.operator_stable, Some(true));
        assert_eq!(r.lyapunov_increases, Some(0));
        assert!(r.recon_residual.unwrap() < 1e-8);
        assert!(r.summability.unwrap() <= r.summability_bound.unwrap());
    }

    #[test]
    fn unbalanced_custom_graph_is_normalized_and_noted() {
        let cfg = parse_config("mode=discrete topology=custom m=3 graph.edges=2<-1:2,3<-2:1 graph.source=1:1,3:1").unwrap();
        let r = analyze_scenario(&cfg).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("normalized")));
        let strict = parse_config(
            "mode=discrete topology=custom m=3 graph.edges=2<-1:2,3<-2:1 graph.source=1:1,3:1 graph.normalize=false",
        )
        .unwrap();
        assert_eq!(analyze_scenario(&strict).unwrap_err().stage, Stage::Balance);
    }

    #[test]
    fn unreachable_agent_names_reachability_stage() {
        let cfg = parse_config("mode=continuous topology=custom m=3 graph.edges=2<-3:1,3<-2:1 graph.source=1:1").unwrap();
        let e = analyze_scenario(&cfg).unwrap_err();
        assert_eq!(e.stage, Stage::Reachability);
        assert!(e.to_string().starts_with("reachability stage failed"));
    }

    #[test]
    fn unstable_operator_is_refused_unless_forced() {
        let doc = "mode=continuous topology=custom m=2 graph.edges=1<-2:0.5,2<-1:0.5 graph.source=1:0.5,2:0.5 \
                   observer.block=-1,0;0,-1 source.matrix=-10,0;0,-10 source.perturbation=0 run.horizon=0.5";
        let cfg = parse_config(doc).unwrap();
        let e = run_scenario(&cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(e.stage, Stage::Operator);
        let forced = run_scenario(
            &cfg,
            &RunOptions {
                force_unstable: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(forced.report.stability.operator_stable, Some(false));
        assert!(forced.report.stability.certificate.is_none());
        assert_eq!(forced.report.weighting, "identity");
    }

    #[test]
    fn draws_follow_seed() {
        let a = ScenarioConfig::reference(Mode::Discrete, "star", 3).unwrap();
        let mut b = a.clone();
        b.seed = 7;
        let (x, y) = (assemble(&a, false).unwrap(), assemble(&b, false).unwrap());
        assert_ne!(x.agents0, y.agents0);
        assert!((x.delta_state.norm2() - 0.1).abs() < 1e-12);
        assert!((x.delta_input.norm2() - 0.07).abs() < 1e-12);
        assert_eq!(assemble(&a, false).unwrap().agents0, x.agents0);
    }

    #[test]
    fn simulate_only_handles_single_agent() {
        for mode in [Mode::Continuous, Mode::Discrete] {
            let cfg = ScenarioConfig::reference(mode, "path", 1).unwrap();
            assert!(simulate_only(&cfg).unwrap() >= 0.0);
        }
    }
}
