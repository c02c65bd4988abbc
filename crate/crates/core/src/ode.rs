//! Dormand-Prince 5(4) with step-size control and the 4th-order continuous
//! extension for output on a user grid.

use crate::error::Error;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step relative to |t| and the span.
    pub h_min_rel: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-9,
            atol: 1e-9,
            h_min_rel: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub steps: usize,
    pub rejected: usize,
}

/// Why an integration stopped early. The samples produced up to that point
/// are in `partial`.
#[derive(Debug, Clone)]
pub enum OdeFailure {
    StepUnderflow { t: f64, h: f64, partial: Solution },
    MaxSteps { t: f64, partial: Solution },
    NonFinite { t: f64, partial: Solution },
}

impl OdeFailure {
    pub fn partial(&self) -> &Solution {
        match self {
            OdeFailure::StepUnderflow { partial, .. }
            | OdeFailure::MaxSteps { partial, .. }
            | OdeFailure::NonFinite { partial, .. } => partial,
        }
    }
}

impl Dopri5 {
    pub fn with_tol(tol: f64) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }

    fn error_norm(&self, y0: &[f64], y1: &[f64], err: &[f64]) -> f64 {
        let n = y0.len() as f64;
        let sum: f64 = y0
            .iter()
            .zip(y1)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = self.atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step<S: OdeSystem>(&self, sys: &S, t0: f64, y0: &[f64], f0: &[f64], span: f64) -> f64 {
        let n = y0.len();
        let sc: Vec<f64> = y0.iter().map(|y| self.atol + self.rtol * y.abs()).collect();
        let rms = |v: &[f64]| {
            (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span).min(self.h_max);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; n];
        sys.rhs(t0 + h0, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.h_max)
    }

    /// Integrates from `(t0, y0)` and returns the state at each of
    /// `t_out` (ascending, all ≥ t0).
    pub fn solve<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t_out: &[f64],
    ) -> std::result::Result<Solution, OdeFailure> {
        self.solve_with(sys, t0, y0, t_out, |_| {})
    }

    /// Like [`Dopri5::solve`], calling `on_step` on every accepted state so
    /// the caller may project it (e.g. symmetrize) in place.
    pub fn solve_with<S, P>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t_out: &[f64],
        mut on_step: P,
    ) -> std::result::Result<Solution, OdeFailure>
    where
        S: OdeSystem,
        P: FnMut(&mut [f64]),
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state length does not match system dimension");
        let mut out = Solution::default();
        let mut next = 0;
        while next < t_out.len() && t_out[next] <= t0 {
            out.t.push(t_out[next]);
            out.y.push(y0.to_vec());
            next += 1;
        }
        let Some(&t_end) = t_out.last() else {
            return Ok(out);
        };
        if next == t_out.len() {
            return Ok(out);
        }

        let span = t_end - t0;
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        sys.rhs(t, &y, &mut k[0]);
        let mut h = self.initial_step(sys, t, &y, &k[0], span);
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut rcont = vec![vec![0.0; n]; 5];
        let mut reject_last = false;

        while next < t_out.len() {
            if out.steps + out.rejected >= self.max_steps {
                return Err(OdeFailure::MaxSteps { t, partial: out });
            }
            let h_min = self.h_min_rel * t.abs().max(span);
            if h < h_min {
                return Err(OdeFailure::StepUnderflow { t, h, partial: out });
            }
            if t + h > t_end {
                h = t_end - t;
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ytmp[i] = y[i] + h * acc;
                }
                if s == 6 {
                    ynew.copy_from_slice(&ytmp);
                }
                sys.rhs(t + C[s] * h, &ytmp, &mut k[s]);
            }
            for i in 0..n {
                err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            }
            let en = self.error_norm(&y, &ynew, &err);
            if !en.is_finite() {
                if h <= h_min * 2.0 {
                    return Err(OdeFailure::NonFinite { t, partial: out });
                }
                h *= 0.1;
                out.rejected += 1;
                reject_last = true;
                continue;
            }
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 10.0);
            if en <= 1.0 {
                let t_new = t + h;
                // dense output coefficients for [t, t_new]
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k[6][i] - bspl;
                    rcont[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
                }
                while next < t_out.len() && t_out[next] <= t_new {
                    let theta = (t_out[next] - t) / h;
                    let theta1 = 1.0 - theta;
                    let sample: Vec<f64> = (0..n)
                        .map(|i| {
                            rcont[0][i]
                                + theta
                                    * (rcont[1][i]
                                        + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])))
                        })
                        .collect();
                    out.t.push(t_out[next]);
                    out.y.push(sample);
                    next += 1;
                }
                ytmp.copy_from_slice(&ynew);
                on_step(&mut ynew);
                if ynew.iter().any(|v| !v.is_finite()) {
                    return Err(OdeFailure::NonFinite { t: t_new, partial: out });
                }
                y.copy_from_slice(&ynew);
                t = t_new;
                // FSAL, unless the projection moved the state
                if ytmp == ynew {
                    k.swap(0, 6);
                } else {
                    sys.rhs(t, &y, &mut k[0]);
                }
                out.steps += 1;
                let mut h_new = h * fac;
                if reject_last {
                    h_new = h_new.min(h);
                }
                h = h_new.min(self.h_max);
                reject_last = false;
            } else {
                h *= fac.min(1.0);
                out.rejected += 1;
                reject_last = true;
            }
        }
        Ok(out)
    }
}

pub(crate) fn failure_to_error(f: &OdeFailure) -> Error {
    match f {
        OdeFailure::StepUnderflow { t, h, .. } => {
            Error::Numerical(format!("step size underflow at t = {t:e} (h = {h:e})"))
        }
        OdeFailure::MaxSteps { t, .. } => Error::Numerical(format!("step budget exhausted at t = {t:e}")),
        OdeFailure::NonFinite { t, .. } => Error::Numerical(format!("non-finite state at t = {t:e}")),
    }
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = (1, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0]);
        let ts = linspace(0.0, 3.0, 31);
        let sol = Dopri5::with_tol(1e-10).solve(&sys, 0.0, &[1.0], &ts).unwrap();
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let w = 7.0;
        let sys = (2, move |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -w * w * y[0];
        });
        let ts = linspace(0.0, 20.0, 2001);
        let sol = Dopri5::with_tol(1e-11).solve(&sys, 0.0, &[1.0, 0.0], &ts).unwrap();
        assert_eq!(sol.t.len(), ts.len());
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - (w * t).cos()).abs() < 1e-8, "t = {t}: {}", y[0]);
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let sys = (2, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1] * (y[0] * y[0] - 1.0);
        });
        let ts = [10.0];
        let reference = Dopri5::with_tol(1e-13).solve(&sys, 0.0, &[2.0, 0.0], &ts).unwrap();
        let errs: Vec<f64> = [1e-5, 1e-7, 1e-9]
            .iter()
            .map(|&tol| {
                let s = Dopri5::with_tol(tol).solve(&sys, 0.0, &[2.0, 0.0], &ts).unwrap();
                (s.y[0][0] - reference.y[0][0]).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn output_at_start_only() {
        let sys = (1, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let sol = Dopri5::default().solve(&sys, 0.0, &[3.0], &[0.0]).unwrap();
        assert_eq!(sol.y, vec![vec![3.0]]);
        let empty = Dopri5::default().solve(&sys, 0.0, &[3.0], &[]).unwrap();
        assert!(empty.t.is_empty());
    }

    #[test]
    fn blow_up_reports_failure_with_partial_output() {
        let sys = (1, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let ts = linspace(0.0, 2.0, 21);
        let res = Dopri5::with_tol(1e-8).solve(&sys, 0.0, &[1.0], &ts);
        let failure = res.unwrap_err();
        assert!(!failure.partial().t.is_empty());
        let last = *failure.partial().t.last().unwrap();
        assert!(last <= 1.0, "last output {last}");
        assert!(failure.partial().y.iter().all(|y| y[0].is_finite()));
    }
}
