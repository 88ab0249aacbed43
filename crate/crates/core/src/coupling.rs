//! Network coupling operators 𝓗 (continuous) and 𝓢 (discrete), the spectral
//! and LMI stability conditions, and Lyapunov/Stein certificates with their
//! ISS constants.

use thiserror::Error;

use crate::linalg::{self, kron, LinalgError, Matrix, Spectrum};
use crate::network::LaplacianBundle;

/// Strict-stability margin used by every classification.
pub const STABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("expected {expected} observer blocks, got {got}")]
    BlockCount { expected: usize, got: usize },
    #[error("observer block {agent} is {rows}x{cols}, expected {n}x{n}")]
    BlockShape {
        agent: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("observer block {agent} is not Hurwitz (max real part {max_real:e})")]
    BlockNotHurwitz { agent: usize, max_real: f64 },
    #[error("observer block {agent} is not Schur stable (spectral radius {radius:e})")]
    BlockNotSchur { agent: usize, radius: f64 },
    #[error("candidate P_L is not symmetric positive definite")]
    CandidateNotPd,
    #[error("{what} must be {constraint}, got {value}")]
    BadScalar {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },
    #[error("operator is {kind:?}; this certificate needs a {expected:?} operator")]
    WrongKind {
        kind: OperatorKind,
        expected: OperatorKind,
    },
    #[error("coupling operator is not stable; refusing to build a certificate")]
    Unstable,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CouplingError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OperatorKind {
    #[default]
    Continuous,
    Discrete,
}

/// Assembled `mn×mn` coupling matrix with its spectrum and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOperator {
    pub kind: OperatorKind,
    pub matrix: Matrix,
    pub stable: bool,
    pub spectrum: Spectrum,
    /// Disturbance gain `Ω = 𝕃 ⊗ Iₙ`.
    pub omega: Matrix,
    pub n: usize,
}

impl CouplingOperator {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

fn check_blocks(bundle: &LaplacianBundle, blocks: &[Matrix], source: &Matrix) -> Result<usize> {
    let m = bundle.m();
    if blocks.len() != m {
        return Err(CouplingError::BlockCount {
            expected: m,
            got: blocks.len(),
        });
    }
    let n = source.rows();
    if !source.is_square() {
        return Err(LinalgError::NotSquare {
            op: "source matrix",
            rows: source.rows(),
            cols: source.cols(),
        }
        .into());
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.shape() != (n, n) {
            return Err(CouplingError::BlockShape {
                agent: i + 1,
                rows: b.rows(),
                cols: b.cols(),
                n,
            });
        }
    }
    Ok(n)
}

fn assemble(bundle: &LaplacianBundle, blocks: &[Matrix], source: &Matrix, kind: OperatorKind) -> Result<CouplingOperator> {
    let n = check_blocks(bundle, blocks, source)?;
    let m = bundle.m();
    let eye_n = Matrix::identity(n);
    let omega = kron(&bundle.laplacian, &eye_n)?;
    let local = Matrix::block_diag(blocks);
    let stacked_source = kron(&Matrix::identity(m), source)?;
    let coupling = kron(&bundle.adjacency_m, &eye_n)?;
    let matrix = &(&omega * &local) + &(&coupling * &stacked_source);
    let spectrum = linalg::eigenvalues(&matrix)?;
    let stable = match kind {
        OperatorKind::Continuous => spectrum.is_hurwitz(STABILITY_TOL),
        OperatorKind::Discrete => spectrum.is_schur(STABILITY_TOL),
    };
    Ok(CouplingOperator {
        kind,
        matrix,
        stable,
        spectrum,
        omega,
        n,
    })
}

/// `𝓗 = (𝕃⊗Iₙ)·blockdiag(H_i) + (𝔸_m⊗Iₙ)·(I_m⊗F₀)`.
pub fn build_h(bundle: &LaplacianBundle, observer_blocks: &[Matrix], f0: &Matrix) -> Result<CouplingOperator> {
    assemble(bundle, observer_blocks, f0, OperatorKind::Continuous)
}

/// `𝓢 = (𝕃⊗Iₙ)·blockdiag(S_i) + (𝔸_m⊗Iₙ)·(I_m⊗A₀)`.
pub fn build_s(bundle: &LaplacianBundle, observer_blocks: &[Matrix], a0: &Matrix) -> Result<CouplingOperator> {
    assemble(bundle, observer_blocks, a0, OperatorKind::Discrete)
}

/// Outcome of a sufficient spectral condition. `holds = false` says nothing
/// about instability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCondition {
    pub holds: bool,
    pub margin: f64,
    pub lambda_min_l: f64,
    pub coupling_norm: f64,
    /// `α_H` (continuous) or `1 − ρ_S` (discrete).
    pub local: f64,
    /// `α_F` (continuous) or `ρ_A` (discrete).
    pub source: f64,
}

/// `min_i |max Re λ(H_i)|`, the slowest local decay rate.
pub fn uniform_damping(observer_blocks: &[Matrix]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (i, h) in observer_blocks.iter().enumerate() {
        let max_real = linalg::eigenvalues(h)?.max_real_part;
        if max_real >= 0.0 {
            return Err(CouplingError::BlockNotHurwitz {
                agent: i + 1,
                max_real,
            });
        }
        alpha = alpha.min(max_real.abs());
    }
    Ok(alpha)
}

/// `min_i(−λ_max(Sym H_i))`; positive iff every `Sym H_i ≺ 0`.
pub fn symmetric_damping(observer_blocks: &[Matrix]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for h in observer_blocks {
        let ev = linalg::symmetric_eigenvalues(&h.sym())?;
        alpha = alpha.min(-ev[ev.len() - 1]);
    }
    Ok(alpha)
}

/// `λ_max(Sym F)`, the smallest `α` with `Sym F ⪯ α I`.
pub fn symmetric_growth(f: &Matrix) -> Result<f64> {
    let ev = linalg::symmetric_eigenvalues(&f.sym())?;
    Ok(ev[ev.len() - 1])
}

/// Sufficient Hurwitz test `λ_min(𝕃)·α_H > ‖𝔸_m‖₂·α_F`.
pub fn spectral_condition_continuous(
    bundle: &LaplacianBundle,
    observer_blocks: &[Matrix],
    f0: &Matrix,
) -> Result<SpectralCondition> {
    check_blocks(bundle, observer_blocks, f0)?;
    let alpha_h = uniform_damping(observer_blocks)?;
    let alpha_f = linalg::eigenvalues(f0)?.max_real_part;
    let coupling_norm = bundle.adjacency_m.norm2();
    let margin = bundle.min_real_eig * alpha_h - coupling_norm * alpha_f;
    Ok(SpectralCondition {
        holds: margin > 0.0,
        margin,
        lambda_min_l: bundle.min_real_eig,
        coupling_norm,
        local: alpha_h,
        source: alpha_f,
    })
}

/// `max_i ρ(S_i)`, rejecting any non-Schur block.
pub fn max_local_radius(observer_blocks: &[Matrix]) -> Result<f64> {
    let mut rho = 0.0f64;
    for (i, s) in observer_blocks.iter().enumerate() {
        let radius = linalg::eigenvalues(s)?.spectral_radius;
        if radius >= 1.0 {
            return Err(CouplingError::BlockNotSchur { agent: i + 1, radius });
        }
        rho = rho.max(radius);
    }
    Ok(rho)
}

/// Sufficient Schur test `λ_min(𝕃)(1 − ρ_S) > ‖𝔸_m‖₂·ρ_A`.
pub fn spectral_condition_discrete(
    bundle: &LaplacianBundle,
    observer_blocks: &[Matrix],
    a0: &Matrix,
) -> Result<SpectralCondition> {
    check_blocks(bundle, observer_blocks, a0)?;
    let rho_a = linalg::eigenvalues(a0)?.spectral_radius;
    schur_margin(bundle, observer_blocks, rho_a)
}

fn schur_margin(bundle: &LaplacianBundle, observer_blocks: &[Matrix], rho_a: f64) -> Result<SpectralCondition> {
    let rho_s = max_local_radius(observer_blocks)?;
    let coupling_norm = bundle.adjacency_m.norm2();
    let margin = bundle.min_real_eig * (1.0 - rho_s) - coupling_norm * rho_a;
    Ok(SpectralCondition {
        holds: margin > 0.0,
        margin,
        lambda_min_l: bundle.min_real_eig,
        coupling_norm,
        local: 1.0 - rho_s,
        source: rho_a,
    })
}

/// Robust Schur margin `λ_min(𝕃)(1−ρ_S) − ‖𝔸_m‖₂(ρ(A★) + a)`.
pub fn robust_schur_margin(
    bundle: &LaplacianBundle,
    observer_blocks: &[Matrix],
    a_star: &Matrix,
    a_bound: f64,
) -> Result<SpectralCondition> {
    check_blocks(bundle, observer_blocks, a_star)?;
    if !(a_bound >= 0.0) {
        return Err(CouplingError::BadScalar {
            what: "a_bound",
            constraint: ">= 0",
            value: a_bound,
        });
    }
    let rho_star = linalg::eigenvalues(a_star)?.spectral_radius;
    schur_margin(bundle, observer_blocks, rho_star + a_bound)
}

/// Default LMI candidate: the solution of `𝕃ᵀP + P𝕃 = I`.
pub fn default_laplacian_candidate(bundle: &LaplacianBundle) -> Result<Matrix> {
    let m = bundle.m();
    Ok(linalg::solve_lyapunov_continuous(
        &bundle.laplacian.scale(-1.0),
        &Matrix::identity(m),
    )?)
}

fn check_candidate(bundle: &LaplacianBundle, p_l: &Matrix) -> Result<()> {
    let m = bundle.m();
    if p_l.shape() != (m, m) {
        return Err(LinalgError::DimensionMismatch {
            op: "candidate P_L",
            lhs: (m, m),
            rhs: p_l.shape(),
        }
        .into());
    }
    match linalg::is_positive_definite(p_l) {
        Ok(true) => Ok(()),
        _ => Err(CouplingError::CandidateNotPd),
    }
}

/// Max eigenvalue of the symmetric part, compared against `−1e-10·‖M‖_F`.
fn negative_definite(matrix: &Matrix) -> Result<bool> {
    let sym = matrix.sym();
    let ev = linalg::symmetric_eigenvalues(&sym)?;
    Ok(ev[ev.len() - 1] < -STABILITY_TOL * sym.frobenius_norm())
}

/// `𝕃ᵀP + P𝕃`.
fn laplacian_form(bundle: &LaplacianBundle, p_l: &Matrix) -> Matrix {
    &(&bundle.laplacian.transpose() * p_l) + &(p_l * &bundle.laplacian)
}

/// Separable LMI `(𝕃ᵀP+P𝕃)⊗Sym{𝐇} + 2(P𝔸_m)⊗Sym{𝐅₀} ≺ 0`.
///
/// The first term is assembled blockwise: block `(i,j)` is
/// `(𝕃ᵀP+P𝕃)_ij · (Sym H_i + Sym H_j)/2`, which is `X ⊗ Sym H` when all
/// blocks coincide. The assembled matrix is symmetrized before the test.
pub fn verify_lmi_separable(
    bundle: &LaplacianBundle,
    observer_blocks: &[Matrix],
    f0: &Matrix,
    candidate_p_l: &Matrix,
) -> Result<bool> {
    let n = check_blocks(bundle, observer_blocks, f0)?;
    check_candidate(bundle, candidate_p_l)?;
    let m = bundle.m();
    let x = laplacian_form(bundle, candidate_p_l);
    let sym_h: Vec<Matrix> = observer_blocks.iter().map(Matrix::sym).collect();
    let mut first = Matrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..m {
            let avg = (&sym_h[i] + &sym_h[j]).scale(0.5 * x[(i, j)]);
            first.set_block(i * n, j * n, &avg);
        }
    }
    let second = kron(&(candidate_p_l * &bundle.adjacency_m).scale(2.0), &f0.sym())?;
    negative_definite(&(&first + &second))
}

/// Practical LMI `−α_H(𝕃ᵀP+P𝕃) + 2α_F·P𝔸_m ≺ 0` (symmetrized).
pub fn verify_lmi_practical(
    bundle: &LaplacianBundle,
    alpha_h: f64,
    alpha_f: f64,
    candidate_p_l: &Matrix,
) -> Result<bool> {
    if !(alpha_h > 0.0) {
        return Err(CouplingError::BadScalar {
            what: "alpha_H",
            constraint: "> 0",
            value: alpha_h,
        });
    }
    check_candidate(bundle, candidate_p_l)?;
    let lmi = &laplacian_form(bundle, candidate_p_l).scale(-alpha_h)
        + &(candidate_p_l * &bundle.adjacency_m).scale(2.0 * alpha_f);
    negative_definite(&lmi)
}

/// Robust LMI `−α_H(𝕃ᵀP+P𝕃)⊗Iₙ + 2(P𝔸_m)⊗Sym{F★} + τI ≺ 0` together with
/// the norm gate `2‖P𝔸_m‖₂·f < τ`.
pub fn verify_lmi_robust(
    bundle: &LaplacianBundle,
    alpha_h: f64,
    f_star: &Matrix,
    f_bound: f64,
    tau: f64,
    candidate_p_l: &Matrix,
) -> Result<bool> {
    if !(tau > 0.0) {
        return Err(CouplingError::BadScalar {
            what: "tau",
            constraint: "> 0",
            value: tau,
        });
    }
    if !(f_bound >= 0.0) {
        return Err(CouplingError::BadScalar {
            what: "f_bound",
            constraint: ">= 0",
            value: f_bound,
        });
    }
    if !(alpha_h > 0.0) {
        return Err(CouplingError::BadScalar {
            what: "alpha_H",
            constraint: "> 0",
            value: alpha_h,
        });
    }
    check_candidate(bundle, candidate_p_l)?;
    let n = f_star.rows();
    let pa = candidate_p_l * &bundle.adjacency_m;
    let gate = 2.0 * pa.norm2() * f_bound < tau;
    if !gate {
        return Ok(false);
    }
    let dim = bundle.m() * n;
    let lmi = &(&kron(&laplacian_form(bundle, candidate_p_l).scale(-alpha_h), &Matrix::identity(n))?
        + &kron(&pa.scale(2.0), &f_star.sym())?)
        + &Matrix::identity(dim).scale(tau);
    negative_definite(&lmi)
}

/// Smallest `τ ∈ {10^k : k = −6..=2}` for which the robust LMI holds.
pub fn robust_tau_search(
    bundle: &LaplacianBundle,
    alpha_h: f64,
    f_star: &Matrix,
    f_bound: f64,
    candidate_p_l: &Matrix,
) -> Result<Option<f64>> {
    for k in -6..=2 {
        let tau = 10f64.powi(k);
        if verify_lmi_robust(bundle, alpha_h, f_star, f_bound, tau, candidate_p_l)? {
            return Ok(Some(tau));
        }
    }
    Ok(None)
}

/// Lyapunov/Stein certificate with its ISS constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub p: Matrix,
    pub q: Matrix,
    pub iss_constant: f64,
    pub epsilon_star: f64,
    /// Relative residual of the defining equation.
    pub residual: f64,
}

/// Golden-section minimization of a unimodal function on `(0, 1)` down to a
/// bracket of width `1e-6`.
pub fn golden_section_min(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-9, 1.0 - 1e-9);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn lambda_max_sym(a: &Matrix) -> Result<f64> {
    let ev = linalg::symmetric_eigenvalues(&a.sym())?;
    Ok(ev[ev.len() - 1])
}

fn lambda_min_sym(a: &Matrix) -> Result<f64> {
    Ok(linalg::symmetric_eigenvalues(&a.sym())?[0])
}

fn continuous_iss_objective(p: &Matrix, q: &Matrix, omega: &Matrix) -> Result<impl Fn(f64) -> f64> {
    let lmin_q = lambda_min_sym(q)?;
    let lmin_p = lambda_min_sym(p)?;
    let po = p * omega;
    let gain = lambda_max_sym(&(&po * &po.transpose()))?.max(0.0);
    Ok(move |eps: f64| {
        let alpha = (1.0 - eps) * lmin_q;
        let beta = gain / eps;
        (beta / (alpha * lmin_p)).sqrt()
    })
}

fn discrete_iss_objective(p: &Matrix, q: &Matrix, omega: &Matrix) -> Result<impl Fn(f64) -> f64> {
    let lmin_q = lambda_min_sym(q)?;
    let lmin_p = lambda_min_sym(p)?;
    let lmax_p = lambda_max_sym(p)?;
    let po = p * omega;
    let q_inv_opt = linalg::Lu::factor(q)?.solve_matrix(&po.transpose());
    let gain = lambda_max_sym(&(&po * &q_inv_opt))?.max(0.0);
    Ok(move |eps: f64| {
        let alpha = (1.0 - eps) * lmin_q / lmax_p;
        let beta = gain / eps;
        (beta / (alpha * lmin_p)).sqrt()
    })
}

/// ISS constant of the continuous network from `(P, Q, Ω)`:
/// `min_ε sqrt(β_c / (α_c·λ_min(P)))` with `α_c = (1−ε)λ_min(Q)` and
/// `β_c = λ_max(PΩΩᵀP)/ε`. Returns `(c_c, ε★)`.
pub fn continuous_iss_constant(p: &Matrix, q: &Matrix, omega: &Matrix) -> Result<(f64, f64)> {
    let (eps, c) = golden_section_min(continuous_iss_objective(p, q, omega)?);
    Ok((c, eps))
}

/// ISS constant of the discrete network from `(P, Q, Ω)`:
/// `min_ε sqrt(β_d / (α_d·λ_min(P)))` with `α_d = (1−ε)λ_min(Q)/λ_max(P)`
/// and `β_d = λ_max(PΩQ⁻¹ΩᵀP)/ε`. Returns `(c_d, ε★)`.
pub fn discrete_iss_constant(p: &Matrix, q: &Matrix, omega: &Matrix) -> Result<(f64, f64)> {
    let (eps, c) = golden_section_min(discrete_iss_objective(p, q, omega)?);
    Ok((c, eps))
}

/// Solves `𝓗ᵀP + P𝓗 = −Q` and computes `c_c`.
pub fn certificate_continuous(op: &CouplingOperator, q: &Matrix) -> Result<Certificate> {
    if op.kind != OperatorKind::Continuous {
        return Err(CouplingError::WrongKind {
            kind: op.kind,
            expected: OperatorKind::Continuous,
        });
    }
    if !op.stable {
        return Err(CouplingError::Unstable);
    }
    let p = linalg::solve_lyapunov_continuous(&op.matrix, q)?;
    let h = &op.matrix;
    let residual = (&(&(&h.transpose() * &p) + &(&p * h)) + q).frobenius_norm() / q.frobenius_norm();
    let (iss_constant, epsilon_star) = continuous_iss_constant(&p, q, &op.omega)?;
    Ok(Certificate {
        p,
        q: q.clone(),
        iss_constant,
        epsilon_star,
        residual,
    })
}

/// Solves `𝓢ᵀP𝓢 − P = −Q` and computes `c_d`.
pub fn certificate_discrete(op: &CouplingOperator, q: &Matrix) -> Result<Certificate> {
    if op.kind != OperatorKind::Discrete {
        return Err(CouplingError::WrongKind {
            kind: op.kind,
            expected: OperatorKind::Discrete,
        });
    }
    if !op.stable {
        return Err(CouplingError::Unstable);
    }
    let p = linalg::solve_stein(&op.matrix, q)?;
    let s = &op.matrix;
    let residual = (&(&(&(&s.transpose() * &p) * s) - &p) + q).frobenius_norm() / q.frobenius_norm();
    let (iss_constant, epsilon_star) = discrete_iss_constant(&p, q, &op.omega)?;
    Ok(Certificate {
        p,
        q: q.clone(),
        iss_constant,
        epsilon_star,
        residual,
    })
}

/// Every stability quantity computed for one scenario. Mode-specific
/// fields are `None` for the other mode; dense checks are `None` when the
/// network is too large to assemble `𝓗` or `𝓢`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StabilityReport {
    pub kind: OperatorKind,
    pub lambda_min_l: f64,
    pub coupling_norm: f64,
    /// `min_i |max Re λ(H_i)|`.
    pub alpha_h: Option<f64>,
    /// `min_i(−λ_max(Sym H_i))`, used by the LMI routes.
    pub alpha_h_sym: Option<f64>,
    /// `max Re λ(F₀)`.
    pub alpha_f: Option<f64>,
    /// `λ_max(Sym F₀)`, used by the LMI routes.
    pub alpha_f_sym: Option<f64>,
    pub rho_s: Option<f64>,
    pub rho_a: Option<f64>,
    pub spectral_holds: bool,
    pub spectral_margin: f64,
    pub robust_holds: bool,
    pub robust_margin: f64,
    /// Direct classification of the assembled operator.
    pub operator_stable: Option<bool>,
    /// `max Re λ(𝓗)` or `ρ(𝓢)`.
    pub operator_abscissa: Option<f64>,
    pub lmi_separable: Option<bool>,
    pub lmi_practical: Option<bool>,
    /// Smallest feasible `τ` of the robust LMI.
    pub robust_tau: Option<f64>,
    pub certificate: Option<Certificate>,
}

impl StabilityReport {
    pub fn iss_constant(&self) -> Option<f64> {
        self.certificate.as_ref().map(|c| c.iss_constant)
    }

    /// True when any reported sufficient condition holds.
    pub fn lmi_verified(&self) -> bool {
        self.lmi_separable == Some(true) || self.lmi_practical == Some(true)
    }
}

/// Inputs of [`analyze_continuous`] and [`analyze_discrete`].
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub bundle: &'a LaplacianBundle,
    pub observer_blocks: &'a [Matrix],
    /// `F₀` or `A₀`.
    pub source: &'a Matrix,
    /// `F★` or `A★`.
    pub nominal: &'a Matrix,
    /// `f` or `a`.
    pub perturbation_bound: f64,
    /// Assemble dense operators, LMIs and certificates.
    pub dense: bool,
    /// `Q = q·I` for the certificate; `None` skips it.
    pub q_scale: Option<f64>,
    /// Fixed `ε` in place of the golden-section search.
    pub fixed_epsilon: Option<f64>,
}

fn finish_certificate(mut cert: Certificate, fixed_epsilon: Option<f64>, kind: OperatorKind, omega: &Matrix) -> Result<Certificate> {
    if let Some(eps) = fixed_epsilon {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CouplingError::BadScalar {
                what: "epsilon",
                constraint: "in (0, 1)",
                value: eps,
            });
        }
        cert.iss_constant = match kind {
            OperatorKind::Continuous => continuous_iss_objective(&cert.p, &cert.q, omega)?(eps),
            OperatorKind::Discrete => discrete_iss_objective(&cert.p, &cert.q, omega)?(eps),
        };
        cert.epsilon_star = eps;
    }
    Ok(cert)
}

/// Spectral, LMI and robust checks plus the certificate for `𝓗`.
pub fn analyze_continuous(input: AnalysisInput<'_>) -> Result<StabilityReport> {
    let b = input.bundle;
    let spectral = spectral_condition_continuous(b, input.observer_blocks, input.source)?;
    let alpha_h_sym = symmetric_damping(input.observer_blocks)?;
    let alpha_f_sym = symmetric_growth(input.source)?;
    // λ_max(Sym(F★ + ΔF)) ≤ λ_max(Sym F★) + ‖ΔF‖₂
    let robust_margin = spectral.lambda_min_l * spectral.local
        - spectral.coupling_norm * (symmetric_growth(input.nominal)? + input.perturbation_bound);
    let mut report = StabilityReport {
        kind: OperatorKind::Continuous,
        lambda_min_l: spectral.lambda_min_l,
        coupling_norm: spectral.coupling_norm,
        alpha_h: Some(spectral.local),
        alpha_h_sym: Some(alpha_h_sym),
        alpha_f: Some(spectral.source),
        alpha_f_sym: Some(alpha_f_sym),
        rho_s: None,
        rho_a: None,
        spectral_holds: spectral.holds,
        spectral_margin: spectral.margin,
        robust_holds: false,
        robust_margin,
        operator_stable: None,
        operator_abscissa: None,
        lmi_separable: None,
        lmi_practical: None,
        robust_tau: None,
        certificate: None,
    };
    if !input.dense {
        report.robust_holds = robust_margin > 0.0;
        return Ok(report);
    }
    let op = build_h(b, input.observer_blocks, input.source)?;
    report.operator_stable = Some(op.stable);
    report.operator_abscissa = Some(op.spectrum.max_real_part);
    let p_l = default_laplacian_candidate(b)?;
    report.lmi_separable = Some(verify_lmi_separable(b, input.observer_blocks, input.source, &p_l)?);
    if alpha_h_sym > 0.0 {
        report.lmi_practical = Some(verify_lmi_practical(b, alpha_h_sym, alpha_f_sym, &p_l)?);
        report.robust_tau = robust_tau_search(b, alpha_h_sym, input.nominal, input.perturbation_bound, &p_l)?;
    }
    report.robust_holds = report.robust_tau.is_some();
    if let (Some(q), true) = (input.q_scale, op.stable) {
        let q = Matrix::identity(op.dim()).scale(q);
        let cert = certificate_continuous(&op, &q)?;
        report.certificate = Some(finish_certificate(cert, input.fixed_epsilon, op.kind, &op.omega)?);
    }
    Ok(report)
}

/// Spectral and robust Schur checks plus the certificate for `𝓢`.
pub fn analyze_discrete(input: AnalysisInput<'_>) -> Result<StabilityReport> {
    let b = input.bundle;
    let spectral = spectral_condition_discrete(b, input.observer_blocks, input.source)?;
    let robust = robust_schur_margin(b, input.observer_blocks, input.nominal, input.perturbation_bound)?;
    let mut report = StabilityReport {
        kind: OperatorKind::Discrete,
        lambda_min_l: spectral.lambda_min_l,
        coupling_norm: spectral.coupling_norm,
        alpha_h: None,
        alpha_h_sym: None,
        alpha_f: None,
        alpha_f_sym: None,
        rho_s: Some(1.0 - spectral.local),
        rho_a: Some(spectral.source),
        spectral_holds: spectral.holds,
        spectral_margin: spectral.margin,
        robust_holds: robust.holds,
        robust_margin: robust.margin,
        operator_stable: None,
        operator_abscissa: None,
        lmi_separable: None,
        lmi_practical: None,
        robust_tau: None,
        certificate: None,
    };
    if !input.dense {
        return Ok(report);
    }
    let op = build_s(b, input.observer_blocks, input.source)?;
    report.operator_stable = Some(op.stable);
    report.operator_abscissa = Some(op.spectrum.spectral_radius);
    if let (Some(q), true) = (input.q_scale, op.stable) {
        let q = Matrix::identity(op.dim()).scale(q);
        let cert = certificate_discrete(&op, &q)?;
        report.certificate = Some(finish_certificate(cert, input.fixed_epsilon, op.kind, &op.omega)?);
    }
    Ok(report)
}
