//! Time evolution of the mean amplitudes and of the fluctuation covariance,
//! limit-cycle detection and the maximal Lyapunov exponent.
//!
//! Integration runs in seconds; reporting uses τ = 2π/ω_b.

use nalgebra::{Matrix6, SVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{diffusion_matrix, CovarianceMatrix, PHYSICALITY_TOL};
use crate::ode::{Dopri5, OdeFailure, OdeSystem, Solution};
use crate::params::DerivedParams;
use crate::stability::{drift_matrix, mean_field_rhs_real};
use crate::steady::MeanState;

pub const DEFAULT_TOL: f64 = 1e-9;
/// Default transient discarded before time averages, in τ.
pub const DEFAULT_TRANSIENT_TAU: f64 = 50.0;
/// Default averaging window, in τ.
pub const DEFAULT_WINDOW_TAU: f64 = 200.0;
/// Relative kick applied to ⟨m⟩ (along +X) to leave an unstable root.
pub const DEFAULT_PERTURBATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times [s].
    pub t: Vec<f64>,
    /// τ = 2π/ω_b [s].
    pub tau: f64,
    pub states: Vec<MeanState>,
    pub covariances: Option<Vec<CovarianceMatrix>>,
    /// Integration stopped before the last requested time.
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_over_tau(&self) -> impl Iterator<Item = f64> + '_ {
        self.t.iter().map(move |t| t / self.tau)
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.states.iter().map(MeanState::intensity).collect()
    }
}

/// `n_per_tau` samples per mechanical period from 0 to `t_end_tau` (in τ).
pub fn time_grid(tau: f64, t_end_tau: f64, n_per_tau: usize) -> Vec<f64> {
    if t_end_tau <= 0.0 {
        return vec![0.0];
    }
    let n = (t_end_tau * n_per_tau as f64).round() as usize;
    (0..=n).map(|i| i as f64 * t_end_tau * tau / n as f64).collect()
}

/// Displaces ⟨m⟩ by `rel · |⟨m⟩|` along the real axis.
pub fn perturb(state: &MeanState, rel: f64) -> MeanState {
    let mut s = *state;
    s.m.re += rel * state.m.norm();
    s
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("sample times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sample times must be strictly increasing".into()));
    }
    Ok(())
}

struct MeanField<'a>(&'a DerivedParams);

impl OdeSystem for MeanField<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        mean_field_rhs_real(self.0, y, dy);
    }
}

fn solve_with_fallback<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    tol: f64,
) -> std::result::Result<Solution, OdeFailure> {
    match Dopri5::with_tol(tol).solve(sys, 0.0, y0, times) {
        Err(OdeFailure::StepUnderflow { .. }) => Dopri5::with_tol(tol * 0.1).solve(sys, 0.0, y0, times),
        other => other,
    }
}

fn failure_with_partial(f: OdeFailure, to_traj: impl Fn(&Solution) -> Trajectory) -> Error {
    match f {
        OdeFailure::StepUnderflow { t, h, partial } => Error::Stiffness {
            t,
            h,
            partial: Box::new(to_traj(&partial)),
        },
        OdeFailure::MaxSteps { t, ref partial } | OdeFailure::NonFinite { t, ref partial } => Error::Diverged {
            t,
            reason: crate::ode::failure_to_error(&f).to_string(),
            partial: Box::new(to_traj(partial)),
        },
    }
}

/// Integrates the noise-free mean-field equations from `initial` at t = 0,
/// sampling at `times` [s].
pub fn integrate_mean_field(
    dp: &DerivedParams,
    initial: &MeanState,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    check_grid(times)?;
    let y0 = initial.to_real();
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    let to_traj = |sol: &Solution, truncated: bool| Trajectory {
        t: sol.t.clone(),
        tau: dp.params.tau(),
        states: sol.y.iter().map(|y| MeanState::from_real(y)).collect(),
        covariances: None,
        truncated,
    };
    solve_with_fallback(&MeanField(dp), &y0, times, tol)
        .map(|sol| to_traj(&sol, false))
        .map_err(|f| failure_with_partial(f, |sol| to_traj(sol, true)))
}

/// Upper-triangle packing of a symmetric 6×6 matrix (21 entries, row-major).
pub fn pack_upper(v: &Matrix6<f64>, out: &mut [f64]) {
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            out[k] = v[(i, j)];
            k += 1;
        }
    }
}

pub fn unpack_upper(packed: &[f64]) -> Matrix6<f64> {
    let mut v = Matrix6::zeros();
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            v[(i, j)] = packed[k];
            v[(j, i)] = packed[k];
            k += 1;
        }
    }
    v
}

struct MeanAndCovariance<'a> {
    dp: &'a DerivedParams,
    diffusion: Matrix6<f64>,
}

impl OdeSystem for MeanAndCovariance<'_> {
    fn dim(&self) -> usize {
        27
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        mean_field_rhs_real(self.dp, &y[..6], &mut dy[..6]);
        let a = drift_matrix(self.dp, &MeanState::from_real(&y[..6])).matrix;
        let v = unpack_upper(&y[6..]);
        let av = a * v;
        let dv = av + av.transpose() + self.diffusion;
        pack_upper(&dv, &mut dy[6..]);
    }
}

/// Co-integrates the mean field and `V̇ = A(t)V + VA(t)ᵀ + D`, with A rebuilt
/// from the instantaneous mean state. V is carried as its upper triangle, so
/// every sample is exactly symmetric.
pub fn integrate_covariance(
    dp: &DerivedParams,
    initial_mean: &MeanState,
    v0: &CovarianceMatrix,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    check_grid(times)?;
    if !v0.is_symmetric(1e-12) || !v0.is_physical() {
        return Err(Error::Domain("initial covariance must be symmetric and physical".into()));
    }
    let mut y0 = vec![0.0; 27];
    y0[..6].copy_from_slice(&initial_mean.to_real());
    pack_upper(&v0.0, &mut y0[6..]);
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    let sys = MeanAndCovariance {
        dp,
        diffusion: diffusion_matrix(dp),
    };
    let tau = dp.params.tau();
    let to_traj = |sol: &Solution, truncated: bool| Trajectory {
        t: sol.t.clone(),
        tau,
        states: sol.y.iter().map(|y| MeanState::from_real(&y[..6])).collect(),
        covariances: Some(sol.y.iter().map(|y| CovarianceMatrix(unpack_upper(&y[6..]))).collect()),
        truncated,
    };
    let traj = solve_with_fallback(&sys, &y0, times, tol)
        .map(|sol| to_traj(&sol, false))
        .map_err(|f| failure_with_partial(f, |sol| to_traj(sol, true)))?;
    let covs = traj.covariances.as_ref().expect("covariances present");
    for (k, v) in covs.iter().enumerate() {
        let nu = v.min_symplectic_eigenvalue()?;
        if nu < 0.5 - PHYSICALITY_TOL * v.0.amax().max(1.0) {
            let mut partial = traj.clone();
            partial.t.truncate(k);
            partial.states.truncate(k);
            if let Some(c) = partial.covariances.as_mut() {
                c.truncate(k);
            }
            partial.truncated = true;
            return Err(Error::Physicality {
                t: traj.t[k],
                nu_min: nu,
                partial: Box::new(partial),
            });
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCycleReport {
    pub periodic: bool,
    /// Period of |⟨m⟩|² [s]; 0 when not periodic.
    pub period: f64,
    /// Peak-to-peak of |⟨m⟩|² after the transient.
    pub amplitude: f64,
    pub transient_time: f64,
}

fn parabolic_peak(y_prev: f64, y: f64, y_next: f64) -> (f64, f64) {
    let denom = y_prev - 2.0 * y + y_next;
    if denom == 0.0 {
        return (0.0, y);
    }
    let off = 0.5 * (y_prev - y_next) / denom;
    (off, y - 0.25 * (y_prev - y_next) * off)
}

/// Looks for sustained oscillation of |⟨m⟩|² after `transient_cut` [s].
///
/// The period comes from the first autocorrelation peak and is confirmed by
/// the spacing of successive maxima (coefficient of variation below
/// `detect_tol`); the peak-to-peak amplitude of the two halves of the
/// retained window must also agree to `detect_tol`.
pub fn detect_limit_cycle(traj: &Trajectory, transient_cut: f64, detect_tol: f64) -> Result<LimitCycleReport> {
    let not_periodic = |amplitude| LimitCycleReport {
        periodic: false,
        period: 0.0,
        amplitude,
        transient_time: transient_cut,
    };
    let (Some(&t0), Some(&t1)) = (traj.t.first(), traj.t.last()) else {
        return Err(Error::InsufficientData("empty trajectory".into()));
    };
    if t1 - t0 <= 2.0 * transient_cut {
        return Err(Error::InsufficientData(format!(
            "trajectory spans {:e} s, need more than twice the transient ({:e} s)",
            t1 - t0,
            transient_cut
        )));
    }
    let start = traj.t.partition_point(|t| *t - t0 < transient_cut);
    let times = &traj.t[start..];
    let s: Vec<f64> = traj.states[start..].iter().map(MeanState::intensity).collect();
    let n = s.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!("{n} samples after the transient")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Domain("limit-cycle detection needs uniformly sampled data".into()));
    }

    let mean = s.iter().sum::<f64>() / n as f64;
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let amplitude = hi - lo;
    if amplitude <= 1e-9 * mean.abs().max(f64::MIN_POSITIVE) {
        return Ok(not_periodic(amplitude));
    }

    let x: Vec<f64> = s.iter().map(|v| v - mean).collect();
    let var: f64 = x.iter().map(|v| v * v).sum();
    let acf = |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / var;
    let mut crossed = false;
    let mut prev = (1.0, acf(1));
    let mut acf_lag = None;
    for k in 2..n / 2 {
        let r = acf(k);
        if prev.1 < 0.0 {
            crossed = true;
        }
        if crossed && prev.1 > prev.0 && prev.1 >= r && prev.1 > 0.3 {
            let (off, _) = parabolic_peak(prev.0, prev.1, r);
            acf_lag = Some((k - 1) as f64 + off);
            break;
        }
        prev = (prev.1, r);
    }
    let Some(lag) = acf_lag else {
        return Ok(not_periodic(amplitude));
    };
    let acf_period = lag * dt;

    // maxima in the upper half of the range, merged within half a period
    let threshold = mean + 0.5 * (hi - mean);
    let mut peaks: Vec<(f64, f64)> = vec![];
    for i in 1..n - 1 {
        if s[i] > threshold && s[i] >= s[i - 1] && s[i] > s[i + 1] {
            let (off, val) = parabolic_peak(s[i - 1], s[i], s[i + 1]);
            let tp = times[i] + off * dt;
            match peaks.last_mut() {
                Some(last) if tp - last.0 < 0.5 * acf_period => {
                    if val > last.1 {
                        *last = (tp, val);
                    }
                }
                _ => peaks.push((tp, val)),
            }
        }
    }
    if peaks.len() < 4 {
        return Ok(not_periodic(amplitude));
    }
    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let m = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let sd = (spacings.iter().map(|d| (d - m).powi(2)).sum::<f64>() / spacings.len() as f64).sqrt();
    let period_stable = sd / m < detect_tol && ((m - acf_period) / m).abs() < 0.1;

    let half = n / 2;
    let p2p = |v: &[f64]| {
        let (a, b) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        b - a
    };
    let (a1, a2) = (p2p(&s[..half]), p2p(&s[half..]));
    let amplitude_stationary = (a1 - a2).abs() / a1.max(a2) < detect_tol;

    let periodic = period_stable && amplitude_stationary;
    Ok(LimitCycleReport {
        periodic,
        period: if periodic { m } else { 0.0 },
        amplitude,
        transient_time: transient_cut,
    })
}

/// A flow together with its tangent (variational) dynamics.
pub trait TangentFlow {
    fn dim(&self) -> usize;
    fn flow(&self, y: &[f64], dy: &mut [f64]);
    fn tangent(&self, y: &[f64], v: &[f64], dv: &mut [f64]);
}

pub struct MeanFieldFlow<'a>(pub &'a DerivedParams);

impl TangentFlow for MeanFieldFlow<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn flow(&self, y: &[f64], dy: &mut [f64]) {
        mean_field_rhs_real(self.0, y, dy);
    }

    fn tangent(&self, y: &[f64], v: &[f64], dv: &mut [f64]) {
        let a = drift_matrix(self.0, &MeanState::from_real(y)).matrix;
        let out = a * SVector::<f64, 6>::from_column_slice(v);
        dv.copy_from_slice(out.as_slice());
    }
}

struct Augmented<'a, F>(&'a F);

impl<F: TangentFlow> OdeSystem for Augmented<'_, F> {
    fn dim(&self) -> usize {
        2 * self.0.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.0.dim();
        let (dy_flow, dy_tan) = dy.split_at_mut(n);
        self.0.flow(&y[..n], dy_flow);
        self.0.tangent(&y[..n], &y[n..], dy_tan);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovOptions {
    /// Averaging horizon [s].
    pub horizon: f64,
    pub renorm_interval: f64,
    /// Evolution discarded before averaging starts [s].
    pub transient: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Mean logarithmic growth rate [1/s].
    pub exponent: f64,
    /// Running average stayed within 5% over the last quarter of the horizon.
    pub converged: bool,
    /// `(elapsed time, running average)` after each renormalization.
    pub running: Vec<(f64, f64)>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Benettin estimate of the largest Lyapunov exponent: a tangent vector is
/// propagated alongside the trajectory and renormalized every
/// `renorm_interval`; the exponent is the mean of the logged growth factors.
pub fn lyapunov_exponent<F: TangentFlow>(flow: &F, y0: &[f64], opts: &LyapunovOptions) -> Result<LyapunovEstimate> {
    let n = flow.dim();
    if opts.renorm_interval <= 0.0 || opts.horizon < 4.0 * opts.renorm_interval {
        return Err(Error::Domain("horizon must span at least four renormalization intervals".into()));
    }
    let sys = Augmented(flow);
    let solver = Dopri5::with_tol(opts.tol);
    let mut y = vec![0.0; 2 * n];
    y[..n].copy_from_slice(y0);
    let start = 1.0 / (n as f64).sqrt();
    y[n..].iter_mut().for_each(|v| *v = start);

    let advance = |y: &mut Vec<f64>, dt: f64| -> Result<f64> {
        let sol = solver
            .solve(&sys, 0.0, y, &[dt])
            .map_err(|f| crate::ode::failure_to_error(&f))?;
        *y = sol.y.into_iter().next().expect("one sample");
        let g = norm(&y[n..]);
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Numerical("tangent vector degenerated".into()));
        }
        y[n..].iter_mut().for_each(|v| *v /= g);
        Ok(g.ln())
    };

    let mut elapsed = 0.0;
    while elapsed + 1e-12 * opts.transient < opts.transient {
        let dt = opts.renorm_interval.min(opts.transient - elapsed);
        advance(&mut y, dt)?;
        elapsed += dt;
    }

    let steps = (opts.horizon / opts.renorm_interval).round() as usize;
    let mut sum = 0.0;
    let mut running = Vec::with_capacity(steps);
    for k in 1..=steps {
        sum += advance(&mut y, opts.renorm_interval)?;
        let t = k as f64 * opts.renorm_interval;
        running.push((t, sum / t));
    }
    let exponent = running.last().map(|r| r.1).unwrap_or(0.0);
    let quarter = running[(3 * steps) / 4 - 1].1;
    let converged = (exponent - quarter).abs() <= 0.05 * exponent.abs();
    Ok(LyapunovEstimate {
        exponent,
        converged,
        running,
    })
}

/// Largest Lyapunov exponent of the mean-field flow started at `initial`.
pub fn max_lyapunov_exponent(
    dp: &DerivedParams,
    initial: &MeanState,
    horizon: f64,
    renorm_interval: f64,
) -> Result<LyapunovEstimate> {
    lyapunov_exponent(
        &MeanFieldFlow(dp),
        &initial.to_real(),
        &LyapunovOptions {
            horizon,
            renorm_interval,
            transient: 0.0,
            tol: DEFAULT_TOL,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, SystemParams};
    use crate::stability::classify_derived;
    use crate::steady::C64;

    fn dp(power: f64) -> DerivedParams {
        derive(&SystemParams::reference().with_power(power)).unwrap()
    }

    #[test]
    fn zero_state_stays_zero_without_drive() {
        let d = dp(0.0);
        let ts = time_grid(d.params.tau(), 20.0, 10);
        let traj = integrate_mean_field(&d, &MeanState::ZERO, &ts, 1e-9).unwrap();
        assert!(traj.states.iter().all(|s| *s == MeanState::ZERO));
    }

    #[test]
    fn zero_span_gives_single_sample() {
        let d = dp(0.05);
        let traj = integrate_mean_field(&d, &MeanState::ZERO, &time_grid(d.params.tau(), 0.0, 10), 1e-9).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(!traj.truncated);
    }

    #[test]
    fn rejects_bad_grids() {
        let d = dp(0.05);
        assert!(integrate_mean_field(&d, &MeanState::ZERO, &[0.0, 1e-6, 1e-6], 1e-9).is_err());
        assert!(integrate_mean_field(&d, &MeanState::ZERO, &[-1.0], 1e-9).is_err());
        let bad = MeanState { a: C64::new(f64::NAN, 0.0), ..MeanState::ZERO };
        assert!(integrate_mean_field(&d, &bad, &[0.0, 1e-6], 1e-9).is_err());
    }

    #[test]
    fn stable_fixed_point_persists() {
        let d = dp(0.05);
        let pp = classify_derived(&d).unwrap();
        let fp = pp.roots[0].mean_state;
        let ts = time_grid(d.params.tau(), 100.0, 4);
        let traj = integrate_mean_field(&d, &fp, &ts, 1e-10).unwrap();
        let worst = traj
            .states
            .iter()
            .map(|s| {
                let diff = MeanState { a: s.a - fp.a, m: s.m - fp.m, b: s.b - fp.b };
                diff.norm() / fp.norm()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "relative drift {worst:e}");
    }

    #[test]
    fn packing_roundtrip() {
        let mut v = Matrix6::from_fn(|i, j| (i * 7 + j * 3) as f64);
        v = v + v.transpose();
        let mut p = [0.0; 21];
        pack_upper(&v, &mut p);
        assert_eq!(unpack_upper(&p), v);
    }

    #[test]
    fn constant_trajectory_not_periodic() {
        let ts: Vec<f64> = (0..400).map(|i| i as f64 * 1e-3).collect();
        let s = MeanState { m: C64::new(2.0, 0.0), ..MeanState::ZERO };
        let traj = Trajectory { t: ts, tau: 1.0, states: vec![s; 400], covariances: None, truncated: false };
        let r = detect_limit_cycle(&traj, 0.1, 1e-2).unwrap();
        assert!(!r.periodic);
        assert_eq!(r.amplitude, 0.0);
    }

    #[test]
    fn sinusoid_period_recovered() {
        let period = 0.37;
        let ts: Vec<f64> = (0..4000).map(|i| i as f64 * 2.5e-3).collect();
        let states = ts
            .iter()
            .map(|t| {
                let i = 1.0 + 0.5 * (std::f64::consts::TAU * t / period).sin();
                MeanState { m: C64::new(i.sqrt(), 0.0), ..MeanState::ZERO }
            })
            .collect();
        let traj = Trajectory { t: ts, tau: 1.0, states, covariances: None, truncated: false };
        let r = detect_limit_cycle(&traj, 2.0, 1e-2).unwrap();
        assert!(r.periodic);
        assert!((r.period / period - 1.0).abs() < 1e-2, "period {}", r.period);
        assert!((r.amplitude - 1.0).abs() < 1e-3);
    }

    #[test]
    fn decaying_oscillation_not_periodic() {
        let ts: Vec<f64> = (0..4000).map(|i| i as f64 * 2.5e-3).collect();
        let states = ts
            .iter()
            .map(|t| {
                let i = 1.0 + 0.5 * (-0.5 * t).exp() * (std::f64::consts::TAU * t / 0.37).sin();
                MeanState { m: C64::new(i.sqrt(), 0.0), ..MeanState::ZERO }
            })
            .collect();
        let traj = Trajectory { t: ts, tau: 1.0, states, covariances: None, truncated: false };
        assert!(!detect_limit_cycle(&traj, 2.0, 1e-2).unwrap().periodic);
    }

    #[test]
    fn short_trajectory_rejected() {
        let traj = Trajectory {
            t: vec![0.0, 1.0],
            tau: 1.0,
            states: vec![MeanState::ZERO; 2],
            covariances: None,
            truncated: false,
        };
        assert!(matches!(detect_limit_cycle(&traj, 0.6, 1e-2), Err(Error::InsufficientData(_))));
    }

    struct Decay(f64);

    impl TangentFlow for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn flow(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
        fn tangent(&self, _y: &[f64], v: &[f64], dv: &mut [f64]) {
            dv[0] = -self.0 * v[0];
        }
    }

    #[test]
    fn linear_decay_exponent() {
        let opts = LyapunovOptions { horizon: 10.0, renorm_interval: 0.5, transient: 0.0, tol: 1e-11 };
        let est = lyapunov_exponent(&Decay(1.7), &[1.0], &opts).unwrap();
        assert!((est.exponent + 1.7).abs() < 1e-8, "{}", est.exponent);
        assert!(est.converged);
    }

    #[test]
    fn lyapunov_requires_long_horizon() {
        let opts = LyapunovOptions { horizon: 1.0, renorm_interval: 0.5, transient: 0.0, tol: 1e-9 };
        assert!(lyapunov_exponent(&Decay(1.0), &[1.0], &opts).is_err());
    }

    #[test]
    fn covariance_relaxes_at_the_slowest_rate() {
        let d = dp(0.05);
        let pp = classify_derived(&d).unwrap();
        let fp = &pp.roots[0];
        let a = crate::stability::drift_matrix(&d, &fp.mean_state);
        let v_inf = crate::gaussian::steady_covariance(&a, &diffusion_matrix(&d)).unwrap().0;
        let ts = time_grid(d.params.tau(), 600.0, 1);
        let traj = integrate_covariance(&d, &fp.mean_state, &CovarianceMatrix::initial(&d), &ts, 1e-10).unwrap();
        let dist: Vec<f64> = traj.covariances.as_ref().unwrap().iter().map(|v| (v.0 - v_inf).norm()).collect();
        for w in dist.windows(2).skip(50) {
            assert!(w[1] < w[0]);
        }
        let (t1, t2) = (300, 600);
        let rate = (dist[t1] / dist[t2]).ln() / (ts[t2] - ts[t1]);
        let bound = 2.0 * fp.max_real_part.abs();
        assert!(rate > 0.5 * bound && rate < 2.0 * bound, "rate {rate:e}, 2|Re λ| {bound:e}");
    }

    #[test]
    fn error_tracks_tolerance() {
        let d = dp(0.05);
        let pp = classify_derived(&d).unwrap();
        let start = perturb(&pp.roots[2].mean_state, 1e-2);
        let ts = time_grid(d.params.tau(), 20.0, 1);
        let reference = integrate_mean_field(&d, &start, &ts, 1e-13).unwrap();
        let err = |tol: f64| {
            let tr = integrate_mean_field(&d, &start, &ts, tol).unwrap();
            tr.states
                .iter()
                .zip(&reference.states)
                .map(|(s, r)| MeanState { a: s.a - r.a, m: s.m - r.m, b: s.b - r.b }.norm() / r.norm())
                .fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [1e-5, 1e-6, 1e-7, 1e-8].iter().map(|t| err(*t)).collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!((0.6..=1.4).contains(&slope), "{errs:?}");
        }
    }
}
