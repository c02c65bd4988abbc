//! Gaussian fluctuation analysis: stationary covariance, two-mode
//! reduction, logarithmic negativity and the magnon Wigner function.
//!
//! Convention: quadratures `X = (O + O†)/√2`, `Y = (O - O†)/(√2 i)`, so the
//! vacuum has variance 1/2 and physical states have all symplectic
//! eigenvalues ≥ 1/2.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Matrix6, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_covariance, perturb, time_grid, DEFAULT_PERTURBATION, DEFAULT_TOL, DEFAULT_TRANSIENT_TAU,
    DEFAULT_WINDOW_TAU,
};
use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::stability::{classify_derived, drift_matrix, DriftMatrix, PhasePoint};
use crate::steady::MeanState;

/// Slack on the uncertainty bound ν ≥ 1/2, relative to max(1, max|V_ij|).
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub Matrix6<f64>);

impl CovarianceMatrix {
    /// Coherent cavity and magnon states, thermal phonon.
    pub fn initial(dp: &DerivedParams) -> Self {
        let th = dp.n_th + 0.5;
        CovarianceMatrix(Matrix6::from_diagonal(&nalgebra::Vector6::new(0.5, 0.5, 0.5, 0.5, th, th)))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.0.amax().max(1.0);
        (self.0 - self.0.transpose()).amax() <= tol * scale
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&DMatrix::from_column_slice(6, 6, self.0.as_slice()))
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self.symplectic_eigenvalues()?[0])
    }

    pub fn is_physical(&self) -> bool {
        match self.min_symplectic_eigenvalue() {
            Ok(nu) => nu >= 0.5 - PHYSICALITY_TOL * self.0.amax().max(1.0),
            Err(_) => false,
        }
    }

    /// The 2×2 block of `mode`.
    pub fn block(&self, mode: Mode) -> Matrix2<f64> {
        let k = mode.index() * 2;
        self.0.fixed_view::<2, 2>(k, k).into_owned()
    }
}

/// `D = diag(κ_a, κ_a, κ_m, κ_m, κ_b(2n_th+1), κ_b(2n_th+1))`.
pub fn diffusion_matrix(dp: &DerivedParams) -> Matrix6<f64> {
    let p = &dp.params;
    let kb = p.kappa_b * (2.0 * dp.n_th + 1.0);
    Matrix6::from_diagonal(&nalgebra::Vector6::new(p.kappa_a, p.kappa_a, p.kappa_m, p.kappa_m, kb, kb))
}

/// Symplectic form ⊕ [[0, 1], [-1, 0]] on `modes` modes.
fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues (ascending) of a 2n×2n covariance matrix, from
/// the spectrum ±iν of ΩV.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = v.nrows();
    if !n.is_multiple_of(2) || v.ncols() != n {
        return Err(Error::Domain("covariance matrix must be 2n x 2n".into()));
    }
    let omega = symplectic_form(n / 2);
    let mut nu: Vec<f64> = match v.clone().cholesky() {
        // V = LLᵀ: LᵀΩL is antisymmetric and similar to ΩV, so its
        // symmetric square carries ν² twice.
        Some(ch) => {
            let l = ch.l();
            let m = l.transpose() * &omega * &l;
            let sq = m.transpose() * &m;
            SymmetricEigen::new(sq).eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect()
        }
        None => {
            let schur = Schur::try_new(omega * v, f64::EPSILON, 10_000)
                .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
            schur.complex_eigenvalues().iter().map(|z| z.norm()).collect()
        }
    };
    nu.sort_by(f64::total_cmp);
    Ok(nu.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Unique solution of `A V + V Aᵀ + D = 0` for Hurwitz A.
///
/// Bartels-Stewart: A = Q T Qᵀ in real Schur form, then the transformed
/// equation is solved column block by column block from the right.
pub fn steady_covariance(a: &DriftMatrix, d: &Matrix6<f64>) -> Result<CovarianceMatrix> {
    let ev = crate::stability::eigenvalues(&a.matrix)?;
    let max_real_part = ev[0].re;
    if max_real_part >= 0.0 {
        return Err(Error::NotHurwitz { max_real_part });
    }
    let schur = Schur::try_new(a.matrix, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let c = -(q.transpose() * d * q);
    let y = solve_quasi_triangular_lyapunov(&t, &c)?;
    let v = q * y * q.transpose();
    Ok(CovarianceMatrix(0.5 * (v + v.transpose())))
}

/// Solves `T Y + Y Tᵀ = C` for upper quasi-triangular T.
fn solve_quasi_triangular_lyapunov(t: &Matrix6<f64>, c: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    let n = 6;
    let td = DMatrix::from_column_slice(n, n, t.as_slice());
    let mut y = Matrix6::<f64>::zeros();
    let mut end = n;
    while end > 0 {
        let j = end - 1;
        let two = j > 0 && t[(j, j - 1)].abs() > f64::EPSILON * (t[(j, j)].abs() + t[(j - 1, j - 1)].abs());
        let first = if two { j - 1 } else { j };
        let size = end - first;
        // rhs for columns first..end
        let mut rhs = DMatrix::<f64>::zeros(n, size);
        for (cc, col) in (first..end).enumerate() {
            for i in 0..n {
                let mut acc = c[(i, col)];
                for k in end..n {
                    acc -= y[(i, k)] * t[(col, k)];
                }
                rhs[(i, cc)] = acc;
            }
        }
        let block = t.view((first, first), (size, size)).clone_owned();
        // (I ⊗ T + B ⊗ I) vec(Y_J) = vec(R)
        let mut sys = DMatrix::<f64>::zeros(n * size, n * size);
        for p in 0..size {
            sys.view_mut((p * n, p * n), (n, n)).copy_from(&td);
            for q in 0..size {
                let b = block[(p, q)];
                for i in 0..n {
                    sys[(p * n + i, q * n + i)] += b;
                }
            }
        }
        let sol = sys
            .lu()
            .solve(&DVector::from_column_slice(rhs.as_slice()))
            .ok_or_else(|| Error::Numerical("singular Lyapunov block".into()))?;
        for p in 0..size {
            for i in 0..n {
                y[(i, first + p)] = sol[p * n + i];
            }
        }
        end = first;
    }
    Ok(y)
}

/// Frobenius norm of `A V + V Aᵀ + D`.
pub fn lyapunov_residual(a: &Matrix6<f64>, v: &Matrix6<f64>, d: &Matrix6<f64>) -> f64 {
    (a * v + v * a.transpose() + d).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cavity,
    Magnon,
    Phonon,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::Cavity => 0,
            Mode::Magnon => 1,
            Mode::Phonon => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "cavity" | "a" => Some(Mode::Cavity),
            "magnon" | "m" => Some(Mode::Magnon),
            "phonon" | "b" => Some(Mode::Phonon),
            _ => None,
        }
    }
}

/// Two-mode covariance `[[α, β], [βᵀ, γ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCM {
    pub matrix: Matrix4<f64>,
    pub det_alpha: f64,
    pub det_beta: f64,
    pub det_gamma: f64,
    /// Σ = det α + det γ - 2 det β.
    pub sigma: f64,
}

impl TwoModeCM {
    pub fn new(matrix: Matrix4<f64>) -> Self {
        let det_alpha = matrix.fixed_view::<2, 2>(0, 0).determinant();
        let det_beta = matrix.fixed_view::<2, 2>(0, 2).determinant();
        let det_gamma = matrix.fixed_view::<2, 2>(2, 2).determinant();
        TwoModeCM {
            matrix,
            det_alpha,
            det_beta,
            det_gamma,
            sigma: det_alpha + det_gamma - 2.0 * det_beta,
        }
    }

    pub fn alpha(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn beta(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn gamma(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Momentum of the second mode flipped.
    pub fn partial_transpose(&self) -> Matrix4<f64> {
        let p = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
        p * self.matrix * p
    }

    /// Smallest symplectic eigenvalue of the partial transpose,
    /// `ν⁻ = 2^{-1/2} [Σ - √(Σ² - 4 det V)]^{1/2}`.
    pub fn nu_minus(&self) -> Result<f64> {
        let det = self.matrix.determinant();
        let disc = self.sigma * self.sigma - 4.0 * det;
        let scale = self.sigma * self.sigma;
        if disc < -1e-9 * scale {
            return Err(Error::Domain(format!("unphysical two-mode state: Σ² - 4 det V = {disc:e}")));
        }
        let inner = self.sigma - disc.max(0.0).sqrt();
        Ok((inner.max(0.0) / 2.0).sqrt())
    }
}

pub fn reduce_two_mode(v: &CovarianceMatrix, first: Mode, second: Mode) -> Result<TwoModeCM> {
    if first == second {
        return Err(Error::Domain("two-mode reduction needs distinct modes".into()));
    }
    let idx = [2 * first.index(), 2 * first.index() + 1, 2 * second.index(), 2 * second.index() + 1];
    Ok(TwoModeCM::new(Matrix4::from_fn(|i, j| v.0[(idx[i], idx[j])])))
}

/// `E_N = max[0, -ln(2ν⁻)]`.
pub fn log_negativity(v2: &TwoModeCM) -> Result<f64> {
    let nu = v2.nu_minus()?;
    Ok(if 2.0 * nu >= 1.0 { 0.0 } else { -(2.0 * nu).ln() })
}

/// Cavity-magnon (or any pair) log-negativity of a full covariance matrix.
pub fn pair_entanglement(v: &CovarianceMatrix, first: Mode, second: Mode) -> Result<f64> {
    log_negativity(&reduce_two_mode(v, first, second)?)
}

/// Smallest eigenvalue of γ in units of the vacuum variance; < 1 is squeezed.
pub fn squeezing_degree(gamma: &Matrix2<f64>) -> f64 {
    SymmetricEigen::new(*gamma).eigenvalues.min() / 0.5
}

/// Ratio of the largest to smallest eigenvalue of a 2×2 covariance block.
pub fn anisotropy(gamma: &Matrix2<f64>) -> f64 {
    let ev = SymmetricEigen::new(*gamma).eigenvalues;
    ev.max() / ev.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    /// Square grid reaching `n_sigma` standard deviations along the widest axis.
    pub fn covering(gamma: &Matrix2<f64>, n_sigma: f64, n: usize) -> Self {
        let half = n_sigma * SymmetricEigen::new(*gamma).eigenvalues.max().sqrt();
        GridSpec {
            x_min: -half,
            x_max: half,
            nx: n,
            y_min: -half,
            y_max: half,
            ny: n,
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WignerField {
    pub grid: GridSpec,
    pub gamma: [[f64; 2]; 2],
    /// Row-major over y, then x: `values[j * nx + i]` is W(x_i, y_j).
    pub values: Vec<f64>,
}

impl WignerField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    /// Σ W × cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.grid.dy()
    }
}

/// `W(u) = exp(-½ uᵀγ⁻¹u) / (2π √det γ)` on the grid, which integrates to 1.
pub fn wigner_field(gamma: &Matrix2<f64>, grid: &GridSpec) -> Result<WignerField> {
    if grid.nx < 2 || grid.ny < 2 || !(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min) {
        return Err(Error::Domain("Wigner grid needs at least 2x2 points over a finite range".into()));
    }
    if (gamma[(0, 1)] - gamma[(1, 0)]).abs() > 1e-12 * gamma.amax() {
        return Err(Error::Domain("gamma must be symmetric".into()));
    }
    let det = gamma.determinant();
    if !(gamma[(0, 0)] > 0.0 && det > 0.0) {
        return Err(Error::Domain("gamma must be positive definite".into()));
    }
    let inv = gamma.try_inverse().ok_or_else(|| Error::Domain("gamma is singular".into()))?;
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    let mut values = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        let y = grid.y(j);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let q = inv[(0, 0)] * x * x + 2.0 * inv[(0, 1)] * x * y + inv[(1, 1)] * y * y;
            values.push(norm * (-0.5 * q).exp());
        }
    }
    Ok(WignerField {
        grid: *grid,
        gamma: [[gamma[(0, 0)], gamma[(0, 1)]], [gamma[(1, 0)], gamma[(1, 1)]]],
        values,
    })
}

/// Stationary covariance at a fixed point.
pub fn fixed_point_covariance(dp: &DerivedParams, state: &MeanState) -> Result<CovarianceMatrix> {
    steady_covariance(&drift_matrix(dp, state), &diffusion_matrix(dp))
}

/// Where long-time runs start: the highest-intensity stable root, or, if no
/// root is stable, the highest root kicked by [`DEFAULT_PERTURBATION`].
pub fn dynamics_start(phase: &PhasePoint) -> Result<(MeanState, bool)> {
    if let Some(r) = phase.upper_stable() {
        return Ok((r.mean_state, true));
    }
    let r = phase
        .roots
        .last()
        .ok_or_else(|| Error::Numerical("cubic returned no roots".into()))?;
    Ok((perturb(&r.mean_state, DEFAULT_PERTURBATION), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AveragingOptions {
    /// Discarded initial interval, in τ.
    pub transient_tau: f64,
    /// Averaging window after the transient, in τ.
    pub window_tau: f64,
    pub samples_per_tau: usize,
    pub tol: f64,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            transient_tau: DEFAULT_TRANSIENT_TAU,
            window_tau: DEFAULT_WINDOW_TAU,
            samples_per_tau: 20,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of the local peak-to-trough swing over successive periods-length
    /// chunks; zero for a constant signal.
    pub swing: f64,
}

pub fn summarize(values: &[f64]) -> EntanglementStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    EntanglementStats {
        mean,
        std_dev: var.sqrt(),
        min,
        max,
        swing: max - min,
    }
}

/// E_N(t) along the co-integrated covariance from `start`, for the given
/// pair, on a uniform grid up to `transient + window`.
pub fn entanglement_series(
    dp: &DerivedParams,
    start: &MeanState,
    pair: (Mode, Mode),
    opts: &AveragingOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau = dp.params.tau();
    let times = time_grid(tau, opts.transient_tau + opts.window_tau, opts.samples_per_tau);
    let traj = integrate_covariance(dp, start, &CovarianceMatrix::initial(dp), &times, opts.tol)?;
    let e = traj
        .covariances
        .as_ref()
        .expect("covariance trajectory")
        .iter()
        .map(|v| pair_entanglement(v, pair.0, pair.1))
        .collect::<Result<Vec<_>>>()?;
    Ok((traj.t, e))
}

/// Time average of the cavity-magnon log-negativity over
/// `[transient, transient + window]`, starting from [`dynamics_start`].
pub fn time_averaged_entanglement(dp: &DerivedParams, opts: &AveragingOptions) -> Result<EntanglementStats> {
    let phase = classify_derived(dp)?;
    let (start, _) = dynamics_start(&phase)?;
    let (t, e) = entanglement_series(dp, &start, (Mode::Cavity, Mode::Magnon), opts)?;
    let cut = opts.transient_tau * dp.params.tau();
    let first = t.partition_point(|x| *x < cut * (1.0 - 1e-12));
    Ok(summarize(&e[first..]))
}
