//! Continuous-time source, adaptive observers and gradient laws.
//!
//! The integrated state is flat: `[x₀ | x₁..x_m | F̂₁..F̂_m | Ĝ₁..Ĝ_m]`, with
//! every matrix stored row-major.

use std::io::{self, Write};

use thiserror::Error;

use crate::integrator::{self, IntegrateError, IntegratorStats, Tolerances};
use crate::linalg::{self, Matrix};
use crate::network::SensorNetwork;
use crate::signal::SignalSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("network is not balanced")]
    Unbalanced,
    #[error("gain {what} must be positive, got {value}")]
    BadGain { what: &'static str, value: f64 },
    #[error("weighting matrix must be symmetric positive definite")]
    BadWeighting,
    #[error("need at least 2 output samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// `ẋ₀ = (F★+ΔF)x₀ + (G★+ΔG)v₀(t) + d₀(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSourceModel {
    pub f_star: Matrix,
    pub g_star: Matrix,
    pub delta_f: Matrix,
    pub delta_g: Matrix,
    pub input: SignalSpec,
    pub disturbance: SignalSpec,
    /// `d★ ≥ sup ‖d₀(t)‖`.
    pub disturbance_bound: f64,
}

impl ContinuousSourceModel {
    pub fn n(&self) -> usize {
        self.f_star.rows()
    }

    pub fn p(&self) -> usize {
        self.g_star.cols()
    }

    pub fn f0(&self) -> Matrix {
        &self.f_star + &self.delta_f
    }

    pub fn g0(&self) -> Matrix {
        &self.g_star + &self.delta_g
    }

    fn validate(&self) -> Result<(), SimError> {
        let (n, p) = (self.n(), self.p());
        let ok = self.f_star.shape() == (n, n)
            && self.g_star.rows() == n
            && self.delta_f.shape() == (n, n)
            && self.delta_g.shape() == (n, p)
            && self.input.dim() == p
            && self.disturbance.dim() == n;
        if !ok {
            return Err(SimError::Dimension(format!(
                "source n={n}, p={p}: F★ {:?}, G★ {:?}, ΔF {:?}, ΔG {:?}, input {}, disturbance {}",
                self.f_star.shape(),
                self.g_star.shape(),
                self.delta_f.shape(),
                self.delta_g.shape(),
                self.input.dim(),
                self.disturbance.dim()
            )));
        }
        Ok(())
    }
}

/// Matrix weighting the error inside the adaptive law.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// A certificate `P_c` solving the Lyapunov equation of `𝓗`.
    Dense(Matrix),
    /// `P_c = I`, used when no certificate is available (large networks).
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousObserverState {
    pub x0: Vec<f64>,
    /// Stacked agent states, `m·n`.
    pub x: Vec<f64>,
    pub f_hat: Vec<Matrix>,
    pub g_hat: Vec<Matrix>,
}

impl ContinuousObserverState {
    /// Zero estimates for every agent.
    pub fn with_zero_estimates(x0: Vec<f64>, x: Vec<f64>, m: usize, p: usize) -> Self {
        let n = x0.len();
        Self {
            x0,
            x,
            f_hat: vec![Matrix::zeros(n, n); m],
            g_hat: vec![Matrix::zeros(n, p); m],
        }
    }
}

/// Source, network, observer blocks and gains of one continuous experiment.
#[derive(Debug, Clone)]
pub struct ContinuousSystem {
    net: SensorNetwork,
    source: ContinuousSourceModel,
    f0: Matrix,
    g0: Matrix,
    blocks: Vec<Matrix>,
    gamma_phi: f64,
    gamma_psi: f64,
    weighting: Weighting,
    /// Diagonal of `𝕎`.
    total_weight: Vec<f64>,
}

/// Scratch buffers reused by [`ContinuousSystem::rhs`].
#[derive(Debug, Clone)]
pub struct Workspace {
    z: Vec<f64>,
    e: Vec<f64>,
    w: Vec<f64>,
    xi: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl ContinuousSystem {
    pub fn new(
        net: SensorNetwork,
        source: ContinuousSourceModel,
        observer_blocks: Vec<Matrix>,
        gamma_phi: f64,
        gamma_psi: f64,
        weighting: Weighting,
    ) -> Result<Self, SimError> {
        source.validate()?;
        let (m, n) = (net.m(), source.n());
        if observer_blocks.len() != m || observer_blocks.iter().any(|h| h.shape() != (n, n)) {
            return Err(SimError::Dimension(format!("expected {m} observer blocks of size {n}x{n}")));
        }
        if !net.is_balanced() {
            return Err(SimError::Unbalanced);
        }
        for (what, value) in [("gamma_phi", gamma_phi), ("gamma_psi", gamma_psi)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::BadGain { what, value });
            }
        }
        if let Weighting::Dense(p) = &weighting {
            if p.shape() != (m * n, m * n) || !linalg::is_positive_definite(p).unwrap_or(false) {
                return Err(SimError::BadWeighting);
            }
        }
        let total_weight = (0..m).map(|i| net.total_weight(i)).collect();
        Ok(Self {
            f0: source.f0(),
            g0: source.g0(),
            net,
            source,
            blocks: observer_blocks,
            gamma_phi,
            gamma_psi,
            weighting,
            total_weight,
        })
    }

    pub fn m(&self) -> usize {
        self.net.m()
    }

    pub fn n(&self) -> usize {
        self.source.n()
    }

    pub fn p(&self) -> usize {
        self.source.p()
    }

    pub fn network(&self) -> &SensorNetwork {
        &self.net
    }

    pub fn source(&self) -> &ContinuousSourceModel {
        &self.source
    }

    pub fn weighting(&self) -> &Weighting {
        &self.weighting
    }

    pub fn state_len(&self) -> usize {
        let (m, n, p) = (self.m(), self.n(), self.p());
        n + m * n + m * n * n + m * n * p
    }

    pub fn workspace(&self) -> Workspace {
        let mn = self.m() * self.n();
        Workspace {
            z: vec![0.0; mn],
            e: vec![0.0; mn],
            w: vec![0.0; mn],
            xi: vec![0.0; mn],
            v: vec![0.0; self.p()],
            d: vec![0.0; self.n()],
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let (m, n) = (self.m(), self.n());
        let xs = n;
        let fs = xs + m * n;
        let gs = fs + m * n * n;
        (xs, fs, gs)
    }

    pub fn pack(&self, s: &ContinuousObserverState) -> Result<Vec<f64>, SimError> {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let ok = s.x0.len() == n
            && s.x.len() == m * n
            && s.f_hat.len() == m
            && s.g_hat.len() == m
            && s.f_hat.iter().all(|f| f.shape() == (n, n))
            && s.g_hat.iter().all(|g| g.shape() == (n, p));
        if !ok {
            return Err(SimError::Dimension("observer state does not match the system".into()));
        }
        let mut y = Vec::with_capacity(self.state_len());
        y.extend_from_slice(&s.x0);
        y.extend_from_slice(&s.x);
        for f in &s.f_hat {
            y.extend_from_slice(f.as_slice());
        }
        for g in &s.g_hat {
            y.extend_from_slice(g.as_slice());
        }
        Ok(y)
    }

    pub fn unpack(&self, y: &[f64]) -> ContinuousObserverState {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let (xs, fs, gs) = self.offsets();
        ContinuousObserverState {
            x0: y[..xs].to_vec(),
            x: y[xs..fs].to_vec(),
            f_hat: (0..m)
                .map(|i| Matrix::from_vec(n, n, y[fs + i * n * n..fs + (i + 1) * n * n].to_vec()))
                .collect(),
            g_hat: (0..m)
                .map(|i| Matrix::from_vec(n, p, y[gs + i * n * p..gs + (i + 1) * n * p].to_vec()))
                .collect(),
        }
    }

    /// Fills `z` with the neighbor aggregates `z_i = Σ_j w_ij x_j + w_i0 x₀`.
    fn aggregates(&self, x0: &[f64], x: &[f64], z: &mut [f64]) {
        let n = self.n();
        let source = self.net.source_weights();
        for i in 0..self.m() {
            let zi = &mut z[i * n..(i + 1) * n];
            for (k, v) in zi.iter_mut().enumerate() {
                *v = source[i] * x0[k];
            }
            for &(j, w) in self.net.in_neighbors(i) {
                for k in 0..n {
                    zi[k] += w * x[j * n + k];
                }
            }
        }
    }

    /// Stacked estimation error `ē = x̄ − z̄` of a flat state.
    pub fn error(&self, y: &[f64]) -> Vec<f64> {
        let (xs, fs, _) = self.offsets();
        let mut z = vec![0.0; fs - xs];
        self.aggregates(&y[..xs], &y[xs..fs], &mut z);
        y[xs..fs].iter().zip(&z).map(|(a, b)| a - b).collect()
    }

    /// `ξ = (𝕃⊗Iₙ)ᵀ P_c ē` using out-neighbor lists.
    fn adaptation_signal(&self, e: &[f64], w: &mut [f64], xi: &mut [f64]) {
        let n = self.n();
        let weighted: &[f64] = match &self.weighting {
            Weighting::Dense(p) => {
                p.matvec_into(e, w);
                w
            }
            Weighting::Identity => e,
        };
        for j in 0..self.m() {
            for k in 0..n {
                xi[j * n + k] = self.total_weight[j] * weighted[j * n + k];
            }
            for &(i, a) in self.net.out_neighbors(j) {
                for k in 0..n {
                    xi[j * n + k] -= a * weighted[i * n + k];
                }
            }
        }
    }

    /// Time derivative of the flat state.
    pub fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        self.rhs_with(t, y, dy, ws, true)
    }

    fn rhs_with(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace, disturbed: bool) {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let (xs, fs, gs) = self.offsets();
        let x0 = &y[..xs];
        let x = &y[xs..fs];
        self.source.input.eval_into(t, &mut ws.v);
        if disturbed {
            self.source.disturbance.eval_into(t, &mut ws.d);
        } else {
            ws.d.iter_mut().for_each(|v| *v = 0.0);
        }

        for r in 0..n {
            let mut acc = ws.d[r];
            for c in 0..n {
                acc += self.f0[(r, c)] * x0[c];
            }
            for c in 0..p {
                acc += self.g0[(r, c)] * ws.v[c];
            }
            dy[r] = acc;
        }

        self.aggregates(x0, x, &mut ws.z);
        for (e, (a, b)) in ws.e.iter_mut().zip(x.iter().zip(&ws.z)) {
            *e = a - b;
        }
        self.adaptation_signal(&ws.e, &mut ws.w, &mut ws.xi);

        for i in 0..m {
            let h = &self.blocks[i];
            let f_hat = &y[fs + i * n * n..fs + (i + 1) * n * n];
            let g_hat = &y[gs + i * n * p..gs + (i + 1) * n * p];
            let zi = &ws.z[i * n..(i + 1) * n];
            let ei = &ws.e[i * n..(i + 1) * n];
            let xii = &ws.xi[i * n..(i + 1) * n];
            // ẋ_i = H_i e_i + F̂_i z_i + Ĝ_i v
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += h[(r, c)] * ei[c] + f_hat[r * n + c] * zi[c];
                }
                for c in 0..p {
                    acc += g_hat[r * p + c] * ws.v[c];
                }
                dy[xs + i * n + r] = acc;
            }
            let df = &mut dy[fs + i * n * n..fs + (i + 1) * n * n];
            for r in 0..n {
                for c in 0..n {
                    df[r * n + c] = -self.gamma_phi * xii[r] * zi[c];
                }
            }
            let dg = &mut dy[gs + i * n * p..gs + (i + 1) * n * p];
            for r in 0..n {
                for c in 0..p {
                    dg[r * p + c] = -self.gamma_psi * xii[r] * ws.v[c];
                }
            }
        }
    }

    /// `(‖Φ‖_F, ‖Ψ‖_F)` over all agents, with `Φ_i = F̂_i − F₀`, `Ψ_i = Ĝ_i − G₀`.
    pub fn parameter_errors(&self, y: &[f64]) -> (f64, f64) {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let (_, fs, gs) = self.offsets();
        let f0 = self.f0.as_slice();
        let g0 = self.g0.as_slice();
        let mut phi = 0.0;
        let mut psi = 0.0;
        for i in 0..m {
            for (k, v) in y[fs + i * n * n..fs + (i + 1) * n * n].iter().enumerate() {
                phi += (v - f0[k]).powi(2);
            }
            for (k, v) in y[gs + i * n * p..gs + (i + 1) * n * p].iter().enumerate() {
                psi += (v - g0[k]).powi(2);
            }
        }
        (phi.sqrt(), psi.sqrt())
    }

    /// `V = ēᵀP_cē + ‖Φ‖²_F/γ_φ + ‖Ψ‖²_F/γ_ψ`.
    pub fn lyapunov_sample(&self, y: &[f64]) -> f64 {
        let e = self.error(y);
        let quad = match &self.weighting {
            Weighting::Dense(p) => e.iter().zip(p.matvec(&e)).map(|(a, b)| a * b).sum::<f64>(),
            Weighting::Identity => e.iter().map(|a| a * a).sum(),
        };
        let (phi, psi) = self.parameter_errors(y);
        quad + phi * phi / self.gamma_phi + psi * psi / self.gamma_psi
    }

    /// `V̇` along the flow, from the chain rule applied to [`Self::rhs`].
    /// The disturbance is excluded when `disturbed` is false.
    pub fn lyapunov_derivative(&self, t: f64, y: &[f64], disturbed: bool) -> f64 {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let (_, fs, gs) = self.offsets();
        let mut ws = self.workspace();
        let mut dy = vec![0.0; y.len()];
        self.rhs_with(t, y, &mut dy, &mut ws, disturbed);
        let e = self.error(y);
        // the error is linear in (x₀, x̄), so ė is the error map applied to the derivative
        let de = self.error(&dy);
        let pe = match &self.weighting {
            Weighting::Dense(pc) => pc.matvec(&e),
            Weighting::Identity => e.clone(),
        };
        let mut vdot = 2.0 * pe.iter().zip(&de).map(|(a, b)| a * b).sum::<f64>();
        let f0 = self.f0.as_slice();
        let g0 = self.g0.as_slice();
        for i in 0..m {
            for k in 0..n * n {
                let idx = fs + i * n * n + k;
                vdot += 2.0 * (y[idx] - f0[k]) * dy[idx] / self.gamma_phi;
            }
            for k in 0..n * p {
                let idx = gs + i * n * p + k;
                vdot += 2.0 * (y[idx] - g0[k]) * dy[idx] / self.gamma_psi;
            }
        }
        vdot
    }

    /// Integrates over `[0, horizon]` logging `samples` uniformly spaced outputs.
    pub fn integrate(
        &self,
        initial: &ContinuousObserverState,
        horizon: f64,
        tol: &Tolerances,
        samples: usize,
    ) -> Result<TrajectoryLog, SimError> {
        if samples < 2 {
            return Err(SimError::TooFewSamples(samples));
        }
        let y0 = self.pack(initial)?;
        let times = integrator::uniform_times(0.0, horizon, samples);
        let (m, n) = (self.m(), self.n());
        let mut log = TrajectoryLog::new(m, n);
        let mut ws = self.workspace();
        let (_, stats) = integrator::integrate(
            |t, y, dy| self.rhs(t, y, dy, &mut ws),
            0.0,
            &y0,
            horizon,
            &times,
            tol,
            |t, y| log.push(self, t, y),
        )?;
        log.stats = stats;
        Ok(log)
    }
}

/// Sampled output of one continuous run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub m: usize,
    pub n: usize,
    pub times: Vec<f64>,
    pub err_total: Vec<f64>,
    /// `err_agents[s][i] = ‖e_i(t_s)‖`.
    pub err_agents: Vec<Vec<f64>>,
    pub phi_frob: Vec<f64>,
    pub psi_frob: Vec<f64>,
    pub lyapunov: Vec<f64>,
    /// `[x₀ | x̄]` at each sample.
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl TrajectoryLog {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            ..Default::default()
        }
    }

    fn push(&mut self, sys: &ContinuousSystem, t: f64, y: &[f64]) {
        let n = self.n;
        let e = sys.error(y);
        let per: Vec<f64> = e.chunks(n).map(norm).collect();
        let (phi, psi) = sys.parameter_errors(y);
        self.times.push(t);
        self.err_total.push(norm(&e));
        self.err_agents.push(per);
        self.phi_frob.push(phi);
        self.psi_frob.push(psi);
        self.lyapunov.push(sys.lyapunov_sample(y));
        self.states.push(y[..n + self.m * n].to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_error(&self) -> f64 {
        self.err_total.last().copied().unwrap_or(f64::NAN)
    }

    /// `sup ‖ē(t)‖` over samples with `t ≥ t_from`.
    pub fn tail_sup(&self, t_from: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.err_total)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }

    /// Largest increase `V(t_{s+1}) − V(t_s)` over consecutive samples.
    pub fn max_lyapunov_increase(&self) -> f64 {
        self.lyapunov.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn header(&self) -> String {
        let mut h = String::from("t,err_total");
        for i in 1..=self.m {
            h.push_str(&format!(",err_{i}"));
        }
        h.push_str(",phi_frob,psi_frob,lyapunov");
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for s in 0..self.len() {
            write!(w, "{:.16e},{:.16e}", self.times[s], self.err_total[s])?;
            for e in &self.err_agents[s] {
                write!(w, ",{e:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e},{:.16e}", self.phi_frob[s], self.psi_frob[s], self.lyapunov[s])?;
        }
        Ok(())
    }

    pub fn write_states_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_states(w, "t", self.m, self.n, &self.times, &self.states)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Header `IDX,x0_1..x0_n,x1_1..xm_n` followed by one row per sample.
pub(crate) fn write_states<W: Write>(
    mut w: W,
    index: &str,
    m: usize,
    n: usize,
    index_values: &[f64],
    states: &[Vec<f64>],
) -> io::Result<()> {
    write!(w, "{index}")?;
    for agent in 0..=m {
        for k in 1..=n {
            write!(w, ",x{agent}_{k}")?;
        }
    }
    writeln!(w)?;
    for (t, row) in index_values.iter().zip(states) {
        if index == "k" {
            write!(w, "{}", *t as u64)?;
        } else {
            write!(w, "{t:.16e}")?;
        }
        for v in row {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
