//! Discrete-time source, normalized-gradient adaptive observers, and the
//! mismatch diagnostics.

use std::io::{self, Write};

use thiserror::Error;

use crate::coupling::CouplingOperator;
use crate::continuous::{norm, write_states};
use crate::linalg::{self, LinalgError, Matrix};
use crate::network::{LaplacianBundle, SensorNetwork};
use crate::signal::SignalSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscreteError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("network is not balanced")]
    Unbalanced,
    #[error("adaptation gain must lie in (0, 2), got {0}")]
    GainOutOfRange(f64),
    #[error("normalization floor must be positive, got {0}")]
    BadFloor(f64),
    #[error("step count must be at least 1")]
    NoSteps,
    #[error("non-finite value at step {k}")]
    NonFinite { k: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `x₀,ₖ₊₁ = (A★+ΔA)x₀,ₖ + (B★+ΔB)u₀,ₖ + δ₀,ₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSourceModel {
    pub a_star: Matrix,
    pub b_star: Matrix,
    pub delta_a: Matrix,
    pub delta_b: Matrix,
    pub input: SignalSpec,
    pub disturbance: SignalSpec,
    /// `δ★ ≥ sup ‖δ₀,ₖ‖`.
    pub disturbance_bound: f64,
}

impl DiscreteSourceModel {
    pub fn n(&self) -> usize {
        self.a_star.rows()
    }

    pub fn p(&self) -> usize {
        self.b_star.cols()
    }

    pub fn a0(&self) -> Matrix {
        &self.a_star + &self.delta_a
    }

    pub fn b0(&self) -> Matrix {
        &self.b_star + &self.delta_b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteObserverState {
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub a_hat: Vec<Matrix>,
    pub b_hat: Vec<Matrix>,
}

impl DiscreteObserverState {
    pub fn with_zero_estimates(x0: Vec<f64>, x: Vec<f64>, m: usize, p: usize) -> Self {
        let n = x0.len();
        Self {
            x0,
            x,
            a_hat: vec![Matrix::zeros(n, n); m],
            b_hat: vec![Matrix::zeros(n, p); m],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchRecord {
    /// Stacked `ε̄ₖ₊₁ = Ξη̄ₖ`.
    pub epsilon: Vec<f64>,
    /// Per-agent `N̂ᵢ,ₖ = max{φ, ‖ηᵢ,ₖ‖²}`.
    pub normalizers: Vec<f64>,
    /// Global `Nₖ = max{φ, ‖η̄ₖ‖²}`.
    pub global_normalizer: f64,
    /// Relative gap between direct and reconstructed `ε̄`; zero when not computed.
    pub reconstruction_residual: f64,
}

/// Dense `𝓢` and `𝕃⁻¹` used to rebuild `ε̄` from two consecutive errors.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    s: Matrix,
    left_inverse: Matrix,
    n: usize,
}

impl Reconstructor {
    pub fn new(op: &CouplingOperator, bundle: &LaplacianBundle) -> Result<Self, DiscreteError> {
        Ok(Self {
            s: op.matrix.clone(),
            left_inverse: linalg::left_inverse_laplacian(&bundle.laplacian)?,
            n: op.n,
        })
    }
}

/// `ε̄ₖ₊₁ = [(𝕃ᵀ𝕃)⁻¹𝕃ᵀ ⊗ Iₙ](ēₖ₊₁ − 𝓢ēₖ)`.
pub fn reconstruct_epsilon(e_next: &[f64], e_now: &[f64], rec: &Reconstructor) -> Vec<f64> {
    let n = rec.n;
    let m = rec.left_inverse.rows();
    let se = rec.s.matvec(e_now);
    let diff: Vec<f64> = e_next.iter().zip(&se).map(|(a, b)| a - b).collect();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..m {
            let l = rec.left_inverse[(i, j)];
            if l != 0.0 {
                for k in 0..n {
                    out[i * n + k] += l * diff[j * n + k];
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    net: SensorNetwork,
    source: DiscreteSourceModel,
    a0: Matrix,
    b0: Matrix,
    blocks: Vec<Matrix>,
    gamma: f64,
    floor: f64,
}

impl DiscreteSystem {
    pub fn new(
        net: SensorNetwork,
        source: DiscreteSourceModel,
        observer_blocks: Vec<Matrix>,
        gamma: f64,
        floor: f64,
    ) -> Result<Self, DiscreteError> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(DiscreteError::GainOutOfRange(gamma));
        }
        Self::new_unchecked_gain(net, source, observer_blocks, gamma, floor)
    }

    /// Skips the `γ ∈ (0, 2)` check so tests can probe the boundary.
    #[doc(hidden)]
    pub fn new_unchecked_gain(
        net: SensorNetwork,
        source: DiscreteSourceModel,
        observer_blocks: Vec<Matrix>,
        gamma: f64,
        floor: f64,
    ) -> Result<Self, DiscreteError> {
        let (m, n, p) = (net.m(), source.n(), source.p());
        let ok = source.a_star.shape() == (n, n)
            && source.b_star.rows() == n
            && source.delta_a.shape() == (n, n)
            && source.delta_b.shape() == (n, p)
            && source.input.dim() == p
            && source.disturbance.dim() == n
            && observer_blocks.len() == m
            && observer_blocks.iter().all(|s| s.shape() == (n, n));
        if !ok {
            return Err(DiscreteError::Dimension(format!(
                "discrete system with m={m}, n={n}, p={p} has inconsistent blocks"
            )));
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(DiscreteError::BadFloor(floor));
        }
        if !net.is_balanced() {
            return Err(DiscreteError::Unbalanced);
        }
        Ok(Self {
            a0: source.a0(),
            b0: source.b0(),
            net,
            source,
            blocks: observer_blocks,
            gamma,
            floor,
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

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn source(&self) -> &DiscreteSourceModel {
        &self.source
    }

    pub fn network(&self) -> &SensorNetwork {
        &self.net
    }

    fn check_state(&self, s: &DiscreteObserverState) -> Result<(), DiscreteError> {
        let (m, n, p) = (self.m(), self.n(), self.p());
        let ok = s.x0.len() == n
            && s.x.len() == m * n
            && s.a_hat.len() == m
            && s.b_hat.len() == m
            && s.a_hat.iter().all(|a| a.shape() == (n, n))
            && s.b_hat.iter().all(|b| b.shape() == (n, p));
        if ok {
            Ok(())
        } else {
            Err(DiscreteError::Dimension("observer state does not match the system".into()))
        }
    }

    fn aggregates(&self, x0: &[f64], x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let source = self.net.source_weights();
        let mut z = vec![0.0; self.m() * n];
        for i in 0..self.m() {
            for k in 0..n {
                z[i * n + k] = source[i] * x0[k];
            }
            for &(j, w) in self.net.in_neighbors(i) {
                for k in 0..n {
                    z[i * n + k] += w * x[j * n + k];
                }
            }
        }
        z
    }

    /// `ēₖ = x̄ₖ − z̄ₖ`.
    pub fn error(&self, s: &DiscreteObserverState) -> Vec<f64> {
        let z = self.aggregates(&s.x0, &s.x);
        s.x.iter().zip(&z).map(|(a, b)| a - b).collect()
    }

    /// `‖Ξ‖²_F = Σᵢ ‖Âᵢ − A₀‖²_F + ‖B̂ᵢ − B₀‖²_F`.
    pub fn parameter_error_sq(&self, s: &DiscreteObserverState) -> f64 {
        let dist = |a: &Matrix, b: &Matrix| -> f64 {
            a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum()
        };
        s.a_hat.iter().map(|a| dist(a, &self.a0)).sum::<f64>() + s.b_hat.iter().map(|b| dist(b, &self.b0)).sum::<f64>()
    }

    /// Advances one step; reconstructs `ε̄` when `rec` is given (`δ ≡ 0`
    /// makes the reconstruction exact).
    pub fn step(
        &self,
        k: usize,
        s: &DiscreteObserverState,
        rec: Option<&Reconstructor>,
    ) -> Result<(DiscreteObserverState, MismatchRecord), DiscreteError> {
        self.check_state(s)?;
        let (m, n, p) = (self.m(), self.n(), self.p());
        let t = k as f64;
        let u = self.source.input.eval(t);
        let delta = self.source.disturbance.eval(t);
        let z = self.aggregates(&s.x0, &s.x);
        let e: Vec<f64> = s.x.iter().zip(&z).map(|(a, b)| a - b).collect();

        let mut x0 = self.a0.matvec(&s.x0);
        let bu = self.b0.matvec(&u);
        for r in 0..n {
            x0[r] += bu[r] + delta[r];
        }

        let mut x = vec![0.0; m * n];
        let mut a_hat = Vec::with_capacity(m);
        let mut b_hat = Vec::with_capacity(m);
        let mut epsilon = vec![0.0; m * n];
        let mut normalizers = vec![0.0; m];
        let u_sq: f64 = u.iter().map(|v| v * v).sum();
        let mut eta_sq_total = 0.0;
        for i in 0..m {
            let zi = &z[i * n..(i + 1) * n];
            let ei = &e[i * n..(i + 1) * n];
            let (ah, bh) = (&s.a_hat[i], &s.b_hat[i]);
            let sb = &self.blocks[i];
            // xᵢ,ₖ₊₁ = Sᵢeᵢ + Âᵢzᵢ + B̂ᵢu
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += sb[(r, c)] * ei[c] + ah[(r, c)] * zi[c];
                }
                for c in 0..p {
                    acc += bh[(r, c)] * u[c];
                }
                x[i * n + r] = acc;
            }
            let eps = &mut epsilon[i * n..(i + 1) * n];
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += (ah[(r, c)] - self.a0[(r, c)]) * zi[c];
                }
                for c in 0..p {
                    acc += (bh[(r, c)] - self.b0[(r, c)]) * u[c];
                }
                eps[r] = acc;
            }
            let eta_sq = zi.iter().map(|v| v * v).sum::<f64>() + u_sq;
            eta_sq_total += eta_sq;
            let nh = self.floor.max(eta_sq);
            normalizers[i] = nh;
            let g = self.gamma / nh;
            let mut a_next = ah.clone();
            let mut b_next = bh.clone();
            for r in 0..n {
                for c in 0..n {
                    a_next[(r, c)] -= g * eps[r] * zi[c];
                }
                for c in 0..p {
                    b_next[(r, c)] -= g * eps[r] * u[c];
                }
            }
            a_hat.push(a_next);
            b_hat.push(b_next);
        }

        let next = DiscreteObserverState { x0, x, a_hat, b_hat };
        if next.x0.iter().chain(&next.x).any(|v| !v.is_finite())
            || next.a_hat.iter().chain(&next.b_hat).any(|a| a.check_finite().is_err())
        {
            return Err(DiscreteError::NonFinite { k });
        }
        let reconstruction_residual = match rec {
            Some(rec) => {
                let e_next = self.error(&next);
                let rebuilt = reconstruct_epsilon(&e_next, &e, rec);
                let gap: f64 = norm(&rebuilt.iter().zip(&epsilon).map(|(a, b)| a - b).collect::<Vec<_>>());
                let scale = norm(&epsilon).max(eta_sq_total.sqrt());
                if scale > 0.0 {
                    gap / scale
                } else {
                    gap
                }
            }
            None => 0.0,
        };
        let record = MismatchRecord {
            epsilon,
            normalizers,
            global_normalizer: self.floor.max(eta_sq_total),
            reconstruction_residual,
        };
        Ok((next, record))
    }

    /// Largest relative gap between the analytic normalized gradient
    /// `εᵢηᵢᵀ/N̂ᵢ` and central differences of `‖εᵢ‖²/(2N̂ᵢ)` over every entry
    /// of `[Âᵢ, B̂ᵢ]`.
    pub fn normalized_gradient_check(&self, s: &DiscreteObserverState, k: usize) -> Result<f64, DiscreteError> {
        self.check_state(s)?;
        let (m, n, p) = (self.m(), self.n(), self.p());
        let u = self.source.input.eval(k as f64);
        let z = self.aggregates(&s.x0, &s.x);
        let h = 1e-6;
        let mut worst_gap = 0.0f64;
        let mut largest = 0.0f64;
        for i in 0..m {
            let zi = &z[i * n..(i + 1) * n];
            let eta: Vec<f64> = zi.iter().chain(&u).copied().collect();
            let nh = self.floor.max(eta.iter().map(|v| v * v).sum());
            // Θ = [Â, B̂] and Θ₀ = [A₀, B₀], both n×(n+p)
            let mut theta = Matrix::zeros(n, n + p);
            let mut theta0 = Matrix::zeros(n, n + p);
            theta.set_block(0, 0, &s.a_hat[i]);
            theta.set_block(0, n, &s.b_hat[i]);
            theta0.set_block(0, 0, &self.a0);
            theta0.set_block(0, n, &self.b0);
            let cost = |th: &Matrix| -> f64 {
                let eps = (th - &theta0).matvec(&eta);
                eps.iter().map(|v| v * v).sum::<f64>() / (2.0 * nh)
            };
            let eps = (&theta - &theta0).matvec(&eta);
            for r in 0..n {
                for c in 0..n + p {
                    let analytic = eps[r] * eta[c] / nh;
                    let mut plus = theta.clone();
                    plus[(r, c)] += h;
                    let mut minus = theta.clone();
                    minus[(r, c)] -= h;
                    let fd = (cost(&plus) - cost(&minus)) / (2.0 * h);
                    worst_gap = worst_gap.max((fd - analytic).abs());
                    largest = largest.max(analytic.abs());
                }
            }
        }
        Ok(if largest > 0.0 { worst_gap / largest } else { worst_gap })
    }

    /// Iterates `steps` times, logging rows `k = 0..=steps`.
    pub fn run(
        &self,
        initial: &DiscreteObserverState,
        steps: usize,
        rec: Option<&Reconstructor>,
    ) -> Result<DiscreteLog, DiscreteError> {
        if steps == 0 {
            return Err(DiscreteError::NoSteps);
        }
        self.check_state(initial)?;
        let (m, n) = (self.m(), self.n());
        let mut log = DiscreteLog {
            m,
            n,
            ..Default::default()
        };
        let mut state = initial.clone();
        log.push(self, 0, &state, 0.0);
        for k in 0..steps {
            let (next, rec_k) = self.step(k, &state, rec)?;
            let eps_sq: f64 = rec_k.epsilon.iter().map(|v| v * v).sum();
            log.summability += eps_sq / rec_k.global_normalizer;
            state = next;
            log.push(self, k + 1, &state, rec_k.reconstruction_residual);
        }
        log.final_state = Some(state);
        Ok(log)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscreteLog {
    pub m: usize,
    pub n: usize,
    pub k: Vec<usize>,
    pub err_total: Vec<f64>,
    pub err_agents: Vec<Vec<f64>>,
    pub xi_frob: Vec<f64>,
    pub v: Vec<f64>,
    /// Entry `k` refers to the step that produced row `k`; row 0 holds zero.
    pub recon_residual: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `Σₖ ‖ε̄ₖ₊₁‖² / Nₖ`.
    pub summability: f64,
    pub final_state: Option<DiscreteObserverState>,
}

impl DiscreteLog {
    fn push(&mut self, sys: &DiscreteSystem, k: usize, s: &DiscreteObserverState, residual: f64) {
        let e = sys.error(s);
        let v = sys.parameter_error_sq(s);
        self.k.push(k);
        self.err_total.push(norm(&e));
        self.err_agents.push(e.chunks(self.n).map(norm).collect());
        self.xi_frob.push(v.sqrt());
        self.v.push(v);
        self.recon_residual.push(residual);
        let mut row = s.x0.clone();
        row.extend_from_slice(&s.x);
        self.states.push(row);
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn final_error(&self) -> f64 {
        self.err_total.last().copied().unwrap_or(f64::NAN)
    }

    pub fn tail_sup(&self, k_from: usize) -> f64 {
        self.k
            .iter()
            .zip(&self.err_total)
            .filter(|(k, _)| **k >= k_from)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }

    /// Number of steps where `V` strictly increased.
    pub fn v_increases(&self) -> usize {
        self.v.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn max_recon_residual(&self) -> f64 {
        self.recon_residual.iter().copied().fold(0.0, f64::max)
    }

    /// `V₀ / (γ(2 − γ))`.
    pub fn summability_bound(&self, gamma: f64) -> f64 {
        self.v[0] / (gamma * (2.0 - gamma))
    }

    pub fn header(&self) -> String {
        let mut h = String::from("k,err_total");
        for i in 1..=self.m {
            h.push_str(&format!(",err_{i}"));
        }
        h.push_str(",xi_frob,V_k,recon_residual");
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for s in 0..self.len() {
            write!(w, "{},{:.16e}", self.k[s], self.err_total[s])?;
            for e in &self.err_agents[s] {
                write!(w, ",{e:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e},{:.16e}", self.xi_frob[s], self.v[s], self.recon_residual[s])?;
        }
        Ok(())
    }

    pub fn write_states_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let idx: Vec<f64> = self.k.iter().map(|&k| k as f64).collect();
        write_states(w, "k", self.m, self.n, &idx, &self.states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_s;
    use crate::network::laplacian_bundle;

    fn source(delta: bool) -> DiscreteSourceModel {
        DiscreteSourceModel {
            a_star: Matrix::from_rows(&[&[0.9, 0.1], &[-0.1, 0.95]]),
            b_star: Matrix::from_rows(&[&[0.05], &[0.10]]),
            delta_a: Matrix::from_rows(&[&[0.05, -0.02], &[0.03, 0.01]]),
            delta_b: Matrix::from_rows(&[&[0.02], &[-0.04]]),
            input: SignalSpec::parse("sin:0.9:0.05:0|cos:0.6:0.1:pi/5").unwrap(),
            disturbance: if delta {
                SignalSpec::parse("sin:0.035:0.05:0;cos:0.025:0.09:0").unwrap()
            } else {
                SignalSpec::zero(2)
            },
            disturbance_bound: 0.035f64.hypot(0.025),
        }
    }

    fn system(net: SensorNetwork, gamma: f64) -> DiscreteSystem {
        let m = net.m();
        DiscreteSystem::new_unchecked_gain(net, source(false), vec![Matrix::identity(2).scale(0.5); m], gamma, 0.01).unwrap()
    }

    fn start(m: usize) -> DiscreteObserverState {
        DiscreteObserverState::with_zero_estimates(
            vec![1.0, -0.6],
            (0..2 * m).map(|k| ((k * 5 % 7) as f64 - 3.0) / 3.0).collect(),
            m,
            1,
        )
    }

    #[test]
    fn gain_range_is_enforced() {
        let net = SensorNetwork::star(2);
        let blocks = vec![Matrix::identity(2).scale(0.5); 2];
        for g in [0.0, 2.0, 2.5, -1.0, f64::NAN] {
            assert!(matches!(
                DiscreteSystem::new(net.clone(), source(false), blocks.clone(), g, 0.01),
                Err(DiscreteError::GainOutOfRange(_))
            ));
        }
        assert!(matches!(
            DiscreteSystem::new(net, source(false), blocks, 1.0, 0.0),
            Err(DiscreteError::BadFloor(_))
        ));
    }

    #[test]
    fn exact_estimates_freeze_adaptation() {
        let sys = system(SensorNetwork::cyclic(4), 1.3);
        let mut s = start(4);
        s.a_hat = vec![sys.a0.clone(); 4];
        s.b_hat = vec![sys.b0.clone(); 4];
        let (next, rec) = sys.step(3, &s, None).unwrap();
        assert!(rec.epsilon.iter().all(|v| *v == 0.0));
        assert_eq!(next.a_hat, s.a_hat);
        assert_eq!(next.b_hat, s.b_hat);
        assert!(rec.normalizers.iter().all(|n| *n >= 0.01));
    }

    #[test]
    fn tiny_gain_keeps_parameters_nearly_fixed() {
        let sys = system(SensorNetwork::path(3), 1e-12);
        let s = start(3);
        let (next, _) = sys.step(0, &s, None).unwrap();
        for (a, b) in next.a_hat.iter().zip(&s.a_hat) {
            assert!((a - b).max_abs() < 1e-11);
        }
    }

    #[test]
    fn step_matches_per_agent_loop() {
        let net = SensorNetwork::cyclic(4);
        let sys = system(net.clone(), 1.3);
        let mut s = start(4);
        s.a_hat[1] = Matrix::from_rows(&[&[0.2, 0.1], &[0.0, 0.3]]);
        s.b_hat[2] = Matrix::from_rows(&[&[0.5], &[-0.5]]);
        let (next, _) = sys.step(7, &s, None).unwrap();
        let u = 0.9 * (0.35f64).sin() + 0.6 * (0.7 + std::f64::consts::PI / 5.0).cos();
        let w = net.sensing_weights();
        for i in 0..4 {
            let mut z = [0.4 * s.x0[0], 0.4 * s.x0[1]];
            for j in 0..4 {
                z[0] += w[(i, j)] * s.x[2 * j];
                z[1] += w[(i, j)] * s.x[2 * j + 1];
            }
            for r in 0..2 {
                let xi = s.x[2 * i + r];
                let mut expect = 0.5 * xi - 0.5 * z[r] + s.b_hat[i][(r, 0)] * u;
                for c in 0..2 {
                    expect += s.a_hat[i][(r, c)] * z[c];
                }
                assert!((next.x[2 * i + r] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reconstruction_matches_direct_form() {
        for net in [SensorNetwork::star(4), SensorNetwork::cyclic(4), SensorNetwork::path(4), SensorNetwork::star(1)] {
            let b = laplacian_bundle(&net).unwrap();
            let m = net.m();
            let sys = system(net, 1.3);
            let op = build_s(&b, &vec![Matrix::identity(2).scale(0.5); m], &sys.a0).unwrap();
            let rec = Reconstructor::new(&op, &b).unwrap();
            let log = sys.run(&start(m), 50, Some(&rec)).unwrap();
            assert!(log.max_recon_residual() < 1e-12, "{}", log.max_recon_residual());
        }
    }

    #[test]
    fn reconstruction_of_free_response_is_zero() {
        let net = SensorNetwork::cyclic(3);
        let b = laplacian_bundle(&net).unwrap();
        let op = build_s(&b, &vec![Matrix::identity(2).scale(0.5); 3], &Matrix::identity(2).scale(0.2)).unwrap();
        let rec = Reconstructor::new(&op, &b).unwrap();
        let e: Vec<f64> = (0..6).map(|k| k as f64 - 2.5).collect();
        let next = op.matrix.matvec(&e);
        assert!(reconstruct_epsilon(&next, &e, &rec).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn lyapunov_is_monotone_and_summable() {
        let sys = system(SensorNetwork::cyclic(4), 1.3);
        let log = sys.run(&start(4), 300, None).unwrap();
        assert_eq!(log.len(), 301);
        assert_eq!(log.v_increases(), 0);
        assert!(log.summability <= log.summability_bound(1.3));
    }

    #[test]
    fn gradient_check_on_trivial_and_scalar_cases() {
        let sys = system(SensorNetwork::star(2), 1.0);
        let mut s = start(2);
        s.a_hat = vec![sys.a0.clone(); 2];
        s.b_hat = vec![sys.b0.clone(); 2];
        assert_eq!(sys.normalized_gradient_check(&s, 0).unwrap(), 0.0);

        let scalar = DiscreteSourceModel {
            a_star: Matrix::from_rows(&[&[0.5]]),
            b_star: Matrix::from_rows(&[&[1.0]]),
            delta_a: Matrix::zeros(1, 1),
            delta_b: Matrix::zeros(1, 1),
            input: SignalSpec::parse("c:2").unwrap(),
            disturbance: SignalSpec::zero(1),
            disturbance_bound: 0.0,
        };
        let sys = DiscreteSystem::new(SensorNetwork::star(1), scalar, vec![Matrix::zeros(1, 1)], 1.0, 0.01).unwrap();
        let mut s = DiscreteObserverState::with_zero_estimates(vec![3.0], vec![0.0], 1, 1);
        s.a_hat[0] = Matrix::from_rows(&[&[0.1]]);
        assert!(sys.normalized_gradient_check(&s, 0).unwrap() < 1e-8);
    }

    #[test]
    fn csv_layout() {
        let sys = system(SensorNetwork::star(2), 1.3);
        let log = sys.run(&start(2), 3, None).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "k,err_total,err_1,err_2,xi_frob,V_k,recon_residual");
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
    }
}
