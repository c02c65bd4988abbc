//! Semiclassical fixed points: the cubic for the magnon number, the mean
//! amplitudes, saddle-node (switching) points and the bistable power window.
//!
//! Raw cubic coefficients span some 30 orders of magnitude for realistic
//! parameters, so every polynomial here is handled in the balanced variable
//! `x = K' I / κ₀`, in which the cubic becomes
//!
//! ```text
//! x³ + 2δ x² + (δ² + 1) x - w = 0,   δ = Δ₀/κ₀,   w = Ω² K' / κ₀³
//! ```

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{derive, power_for_amplitude_sq, DerivedParams, SystemParams};

pub type C64 = Complex<f64>;

/// Relative band around a zero discriminant that is reported as degenerate.
pub const DISCRIMINANT_REL_TOL: f64 = 1e-10;
/// Relative cubic residual accepted for a root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanState {
    pub a: C64,
    pub m: C64,
    pub b: C64,
}

impl MeanState {
    pub const ZERO: MeanState = MeanState {
        a: C64::new(0.0, 0.0),
        m: C64::new(0.0, 0.0),
        b: C64::new(0.0, 0.0),
    };

    /// Magnon number I = |⟨m⟩|².
    pub fn intensity(&self) -> f64 {
        self.m.norm_sqr()
    }

    /// `[Re a, Im a, Re m, Im m, Re b, Im b]`.
    pub fn to_real(&self) -> [f64; 6] {
        [self.a.re, self.a.im, self.m.re, self.m.im, self.b.re, self.b.im]
    }

    pub fn from_real(y: &[f64]) -> Self {
        MeanState {
            a: C64::new(y[0], y[1]),
            m: C64::new(y[2], y[3]),
            b: C64::new(y[4], y[5]),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_sqr() + self.m.norm_sqr() + self.b.norm_sqr()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicSolution {
    /// Real non-negative magnon numbers, ascending.
    pub roots: Vec<f64>,
    /// Left-hand side of the three-root condition (negative ⇔ three roots).
    pub discriminant_lhs: f64,
    pub has_three_roots: bool,
    /// Discriminant within the tolerance band of zero; coincident roots merged.
    pub degenerate: bool,
}

fn balanced(dp: &DerivedParams) -> (f64, f64) {
    let delta = dp.delta_0 / dp.kappa_0;
    let w = dp.drive_amp * dp.drive_amp * dp.kerr_eff / dp.kappa_0.powi(3);
    (delta, w)
}

/// Three-root condition in balanced form, together with the sum of the
/// absolute values of its terms (used to scale the tolerance band).
fn balanced_discriminant(delta: f64, w: f64) -> (f64, f64) {
    let d2 = delta * delta;
    let t1 = 27.0 * w * w;
    let t2 = 4.0 * delta * w * (d2 + 9.0);
    let t3 = 4.0 * (d2 + 1.0) * (d2 + 1.0);
    (t1 + t2 + t3, t1.abs() + t2.abs() + t3.abs())
}

/// `27K'²Ω⁴ + 4Δ₀K'Ω²(Δ₀²+9κ₀²) + 4κ₀²(Δ₀²+κ₀²)²`, in physical units.
pub fn three_root_discriminant(dp: &DerivedParams) -> f64 {
    let (delta, w) = balanced(dp);
    balanced_discriminant(delta, w).0 * dp.kappa_0.powi(6)
}

/// Cubic residual `K'²I³ + 2Δ₀K'I² + (Δ₀²+κ₀²)I - Ω²` and the sum of the
/// magnitudes of its terms.
pub fn cubic_residual(dp: &DerivedParams, intensity: f64) -> (f64, f64) {
    let k = dp.kerr_eff;
    let d0 = dp.delta_0;
    let terms = [
        k * k * intensity.powi(3),
        2.0 * d0 * k * intensity * intensity,
        (d0 * d0 + dp.kappa_0 * dp.kappa_0) * intensity,
        -dp.drive_amp * dp.drive_amp,
    ];
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

fn monic_eval(b: f64, c: f64, d: f64, x: f64) -> (f64, f64) {
    (((x + b) * x + c) * x + d, (3.0 * x + 2.0 * b) * x + c)
}

fn newton_polish(b: f64, c: f64, d: f64, mut x: f64) -> f64 {
    for _ in 0..8 {
        let (p, dp) = monic_eval(b, c, d, x);
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        let step = p / dp;
        let next = x - step;
        // Newton overshoot near a double root; keep the better point.
        if monic_eval(b, c, d, next).0.abs() > p.abs() {
            break;
        }
        x = next;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Roots of `x³ + b x² + c x + d` as eigenvalues of its companion matrix.
pub(crate) fn companion_roots(b: f64, c: f64, d: f64) -> [C64; 3] {
    let companion = Matrix3::new(-b, -c, -d, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let ev = companion.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

pub fn magnon_intensities(dp: &DerivedParams) -> CubicSolution {
    let discriminant_lhs = three_root_discriminant(dp);
    if dp.drive_amp == 0.0 {
        return CubicSolution {
            roots: vec![0.0],
            discriminant_lhs,
            has_three_roots: false,
            degenerate: false,
        };
    }
    if dp.kerr_eff == 0.0 {
        let i = dp.drive_amp * dp.drive_amp / (dp.delta_0 * dp.delta_0 + dp.kappa_0 * dp.kappa_0);
        return CubicSolution {
            roots: vec![i],
            discriminant_lhs,
            has_three_roots: false,
            degenerate: false,
        };
    }

    let (delta, w) = balanced(dp);
    let (disc, scale) = balanced_discriminant(delta, w);
    let (b, c, d) = (2.0 * delta, delta * delta + 1.0, -w);
    let mut ev = companion_roots(b, c, d);
    ev.sort_by(|p, q| p.im.abs().total_cmp(&q.im.abs()));

    let degenerate = disc.abs() <= DISCRIMINANT_REL_TOL * scale;
    let three = disc < 0.0 && !degenerate;
    let mut xs: Vec<f64> = if three || degenerate {
        ev.iter().map(|z| newton_polish(b, c, d, z.re)).collect()
    } else {
        vec![newton_polish(b, c, d, ev[0].re)]
    };
    xs.sort_by(f64::total_cmp);
    if degenerate {
        xs.dedup_by(|p, q| (*p - *q).abs() <= 1e-6 * p.abs().max(q.abs()).max(1e-12));
    }

    let to_intensity = dp.kappa_0 / dp.kerr_eff;
    let mut roots: Vec<f64> = xs.iter().map(|x| (x * to_intensity).max(0.0)).collect();
    roots.sort_by(f64::total_cmp);
    CubicSolution {
        roots,
        discriminant_lhs,
        has_three_roots: three,
        degenerate,
    }
}

/// Mean amplitudes at a root of the cubic, from
/// `⟨m⟩ = -iΩ / [(Δ₀ + K'I) - iκ₀]` with ⟨a⟩ and ⟨b⟩ back-substituted.
pub fn mean_state_from_intensity(dp: &DerivedParams, intensity: f64) -> Result<MeanState> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::Domain(format!("intensity must be finite and >= 0, got {intensity}")));
    }
    let (residual, scale) = cubic_residual(dp, intensity);
    if residual.abs() > ROOT_RESIDUAL_TOL * scale {
        return Err(Error::Domain(format!(
            "I = {intensity:e} is not a fixed point (relative residual {:e})",
            residual.abs() / scale
        )));
    }
    let p = &dp.params;
    let i = C64::i();
    let m = -i * dp.drive_amp / C64::new(dp.delta_0 + dp.kerr_eff * intensity, -dp.kappa_0);
    let a = -m * p.g_ma / C64::new(dp.delta_a, -p.kappa_a);
    let b = C64::from(-p.g_mb * m.norm_sqr()) / C64::new(p.omega_b, -p.kappa_b);
    let state = MeanState { a, m, b };
    let mismatch = (state.intensity() - intensity).abs() / intensity.max(1.0);
    if mismatch > 1e-9 {
        return Err(Error::Domain(format!("|m|^2 deviates from I by {mismatch:e} (relative)")));
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingPoints {
    pub lower: f64,
    pub upper: f64,
    /// Δ₀² = 3κ₀²: the two turning points coincide.
    pub degenerate: bool,
}

/// Turning points `I∓ = [-2Δ₀ ∓ √(Δ₀² - 3κ₀²)] / (3K')` of the S-curve.
pub fn switching_points(dp: &DerivedParams) -> Result<Option<SwitchingPoints>> {
    if dp.kerr_eff == 0.0 {
        return Err(Error::NoKerr);
    }
    let (delta, k0) = (dp.delta_0, dp.kappa_0);
    let radicand = delta * delta - 3.0 * k0 * k0;
    let degenerate = radicand.abs() <= 1e-12 * (delta * delta + 3.0 * k0 * k0);
    if radicand < 0.0 && !degenerate {
        return Ok(None);
    }
    let root = radicand.max(0.0).sqrt();
    let p = (-2.0 * delta - root) / (3.0 * dp.kerr_eff);
    let q = (-2.0 * delta + root) / (3.0 * dp.kerr_eff);
    let (lower, upper) = if p <= q { (p, q) } else { (q, p) };
    if lower <= 0.0 {
        return Ok(None);
    }
    Ok(Some(SwitchingPoints {
        lower,
        upper,
        degenerate,
    }))
}

/// The closed-form critical drive `Ω_c = √(-8Δ₀³ / 27K')`.
///
/// Diagnostic only; the onset of three roots is decided by
/// [`three_root_discriminant`], which for the reference parameters lies well
/// below this value.
pub fn critical_drive(dp: &DerivedParams) -> Result<f64> {
    if dp.delta_0 == 0.0 {
        return Ok(0.0);
    }
    if dp.kerr_eff == 0.0 {
        return Err(Error::NoKerr);
    }
    let radicand = -8.0 * dp.delta_0.powi(3) / (27.0 * dp.kerr_eff);
    if radicand < 0.0 {
        return Err(Error::BistabilitySign { radicand });
    }
    Ok(radicand.sqrt())
}

/// Drive powers between which the cubic has three distinct real roots,
/// intersected with `p_range` (both in W).
///
/// The three-root condition is a quadratic in Ω²; its discriminant reduces
/// to `16 (δ² - 3)³`, so a window exists only when Δ₀² > 3κ₀².
pub fn bistable_power_window(params: &SystemParams, p_range: (f64, f64)) -> Result<Option<(f64, f64)>> {
    let (p_min, p_max) = p_range;
    if !p_min.is_finite() || !p_max.is_finite() || p_min > p_max {
        return Err(Error::Domain(format!("invalid power range ({p_min}, {p_max})")));
    }
    let dp = derive(params)?;
    if dp.kerr_eff == 0.0 {
        return Ok(None);
    }
    let delta = dp.delta_0 / dp.kappa_0;
    let u = delta * delta - 3.0;
    if u <= 1e-12 * (delta * delta + 3.0) {
        return Ok(None);
    }
    // 27 w² + 4δ(δ²+9) w + 4(δ²+1)² = 0, roots via the cancellation-free form.
    let a = 27.0;
    let b = 4.0 * delta * (delta * delta + 9.0);
    let c = 4.0 * (delta * delta + 1.0).powi(2);
    let sqrt_disc = 4.0 * u.powi(3).sqrt();
    let q = -0.5 * (b + b.signum() * sqrt_disc);
    let (w1, w2) = (q / a, c / q);
    let to_omega_sq = dp.kappa_0.powi(3) / dp.kerr_eff;
    let mut powers: Vec<f64> = [w1, w2]
        .iter()
        .map(|w| w * to_omega_sq)
        .filter(|x| *x > 0.0)
        .map(|x| power_for_amplitude_sq(x, params.omega_d, params.kappa_m))
        .collect();
    if powers.len() != 2 {
        return Ok(None);
    }
    powers.sort_by(f64::total_cmp);
    let (lo, hi) = (powers[0].max(p_min), powers[1].min(p_max));
    Ok((lo < hi).then_some((lo, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(power: f64) -> DerivedParams {
        derive(&SystemParams::reference().with_power(power)).unwrap()
    }

    /// Sign-change bisection on the raw (balanced) cubic, independent of
    /// the companion matrix.
    fn bisection_roots(delta: f64, w: f64) -> Vec<f64> {
        let f = |x: f64| x * ((x + delta) * (x + delta) + 1.0) - w;
        let mut pts = vec![-1e6, 1e6];
        // critical points of f: 3x² + 4δx + δ² + 1 = 0
        let disc = delta * delta - 3.0;
        if disc > 0.0 {
            pts.push((-2.0 * delta - disc.sqrt()) / 3.0);
            pts.push((-2.0 * delta + disc.sqrt()) / 3.0);
        }
        pts.sort_by(f64::total_cmp);
        let mut roots = vec![];
        for win in pts.windows(2) {
            let (mut lo, mut hi) = (win[0], win[1]);
            if f(lo).signum() == f(hi).signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == f(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
    }

    #[test]
    fn undriven_single_zero_root() {
        let sol = magnon_intensities(&reference(0.0));
        assert_eq!(sol.roots, vec![0.0]);
    }

    #[test]
    fn linear_response_when_kerr_off() {
        let mut dp = reference(0.01);
        dp.kerr_eff = 0.0;
        dp.drive_amp = (dp.delta_0 * dp.delta_0 + dp.kappa_0 * dp.kappa_0).sqrt();
        let sol = magnon_intensities(&dp);
        assert_eq!(sol.roots.len(), 1);
        assert!((sol.roots[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn three_roots_at_50_mw() {
        let dp = reference(0.05);
        let sol = magnon_intensities(&dp);
        assert!(sol.has_three_roots);
        assert!(sol.discriminant_lhs < 0.0);
        assert_eq!(sol.roots.len(), 3);
        for r in &sol.roots {
            let (res, _) = cubic_residual(&dp, *r);
            assert!(res.abs() <= 1e-8 * dp.drive_amp * dp.drive_amp, "residual {res:e}");
        }
    }

    #[test]
    fn single_root_outside_window() {
        for p in [0.005, 0.1, 0.13] {
            let sol = magnon_intensities(&reference(p));
            assert_eq!(sol.roots.len(), 1, "P = {p}");
            assert!(!sol.has_three_roots);
            assert!(sol.discriminant_lhs > 0.0);
        }
    }

    #[test]
    fn roots_agree_with_bisection() {
        for p in [0.001, 0.02, 0.05, 0.08, 0.12, 0.2] {
            let dp = reference(p);
            let (delta, w) = balanced(&dp);
            let mut expected: Vec<f64> = bisection_roots(delta, w)
                .into_iter()
                .map(|x| x * dp.kappa_0 / dp.kerr_eff)
                .collect();
            expected.sort_by(f64::total_cmp);
            let got = magnon_intensities(&dp).roots;
            assert_eq!(got.len(), expected.len(), "P = {p}");
            for (g, e) in got.iter().zip(&expected) {
                assert!(((g - e) / e).abs() < 1e-10, "P = {p}: {g} vs {e}");
            }
        }
    }

    #[test]
    fn mean_state_consistency() {
        let dp = reference(0.05);
        for r in magnon_intensities(&dp).roots {
            let s = mean_state_from_intensity(&dp, r).unwrap();
            assert!((s.intensity() - r).abs() / r.max(1.0) <= 1e-9);
        }
        let upper = *magnon_intensities(&dp).roots.last().unwrap();
        let s = mean_state_from_intensity(&dp, upper).unwrap();
        assert!(s.b.re < 0.0);
    }

    #[test]
    fn mean_state_zero_when_undriven() {
        let s = mean_state_from_intensity(&reference(0.0), 0.0).unwrap();
        assert_eq!(s, MeanState::ZERO);
    }

    #[test]
    fn inconsistent_intensity_rejected() {
        let dp = reference(0.05);
        let r = magnon_intensities(&dp).roots[0];
        assert!(matches!(mean_state_from_intensity(&dp, 1.5 * r), Err(Error::Domain(_))));
        assert!(mean_state_from_intensity(&dp, -1.0).is_err());
    }

    #[test]
    fn switching_points_reference() {
        let dp = reference(0.05);
        assert!(dp.delta_0.abs() / dp.kappa_0 > 6.1);
        let sp = switching_points(&dp).unwrap().unwrap();
        let k = dp.kerr_eff;
        let d = dp.delta_0;
        let k0 = dp.kappa_0;
        // quadratic formula on 3K'²I² + 4Δ₀K'I + (Δ₀²+κ₀²)
        let (qa, qb, qc) = (3.0 * k * k, 4.0 * d * k, d * d + k0 * k0);
        let s = (qb * qb - 4.0 * qa * qc).sqrt();
        let lo = (-qb - s) / (2.0 * qa);
        let hi = (-qb + s) / (2.0 * qa);
        assert!(((sp.lower - lo) / lo).abs() < 1e-9);
        assert!(((sp.upper - hi) / hi).abs() < 1e-9);
        assert!(!sp.degenerate);
    }

    #[test]
    fn switching_points_merge_and_vanish() {
        let mut dp = reference(0.05);
        dp.delta_0 = -3f64.sqrt() * dp.kappa_0;
        let sp = switching_points(&dp).unwrap().unwrap();
        assert!(sp.degenerate);
        assert!(((sp.upper - sp.lower) / sp.lower).abs() < 1e-5);
        dp.delta_0 = -1.5 * dp.kappa_0;
        assert_eq!(switching_points(&dp).unwrap(), None);
        dp.kerr_eff = 0.0;
        assert!(matches!(switching_points(&dp), Err(Error::NoKerr)));
    }

    #[test]
    fn critical_drive_cases() {
        let mut dp = reference(0.05);
        let omega_c = critical_drive(&dp).unwrap();
        assert!((omega_c / 5.41e14 - 1.0).abs() < 1e-2);
        let p = power_for_amplitude_sq(omega_c * omega_c, dp.params.omega_d, dp.params.kappa_m);
        assert!((p / 0.154 - 1.0).abs() < 1e-2);
        dp.delta_0 = 0.0;
        assert_eq!(critical_drive(&dp).unwrap(), 0.0);
        dp.delta_0 = 1e7;
        assert!(matches!(critical_drive(&dp), Err(Error::BistabilitySign { .. })));
    }

    #[test]
    fn reference_window() {
        let (lo, hi) = bistable_power_window(&SystemParams::reference(), (0.0, 1.0))
            .unwrap()
            .unwrap();
        assert!((lo / 13.84e-3 - 1.0).abs() < 1e-2, "lo = {lo}");
        assert!((hi / 81.94e-3 - 1.0).abs() < 1e-2, "hi = {hi}");
        let clipped = bistable_power_window(&SystemParams::reference(), (0.02, 0.05)).unwrap();
        assert_eq!(clipped, Some((0.02, 0.05)));
    }

    #[test]
    fn no_window_when_detuning_too_small() {
        let mut p = SystemParams::reference();
        let dp = derive(&p).unwrap();
        // Δ₀ = -1.5 κ₀ < √3 κ₀
        let target = -1.5 * dp.kappa_0 + dp.eta * dp.delta_a;
        p.set_delta_m(target);
        assert_eq!(bistable_power_window(&p, (0.0, 10.0)).unwrap(), None);
    }

    #[test]
    fn window_edges_match_root_count_scan() {
        let base = SystemParams::reference();
        let (lo, hi) = bistable_power_window(&base, (0.0, 1.0)).unwrap().unwrap();
        let step = 0.05e-3;
        let count = |p: f64| magnon_intensities(&derive(&base.with_power(p)).unwrap()).roots.len();
        let mut transitions = vec![];
        let mut prev = count(1e-3);
        let mut p = 1e-3;
        while p < 0.15 {
            p += step;
            let c = count(p);
            if c != prev {
                transitions.push(p);
                prev = c;
            }
        }
        assert_eq!(transitions.len(), 2);
        assert!((transitions[0] - lo).abs() <= step);
        assert!((transitions[1] - hi).abs() <= step);
    }

    #[test]
    fn switching_points_interleave_roots() {
        let dp = reference(0.05);
        let r = magnon_intensities(&dp).roots;
        let sp = switching_points(&dp).unwrap().unwrap();
        assert!(r[0] < sp.lower && sp.lower < r[1] && r[1] < sp.upper && sp.upper < r[2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point(power_mw: f64, delta_m: f64) -> DerivedParams {
            let base = SystemParams::reference();
            derive(&base.with_power(power_mw * 1e-3).with_delta_m(delta_m * base.omega_b)).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn root_count_follows_discriminant(p in 0.5f64..250.0, dm in -1.5f64..0.5) {
                let dp = point(p, dm);
                let sol = magnon_intensities(&dp);
                prop_assume!(!sol.degenerate);
                let expected = if sol.discriminant_lhs < 0.0 { 3 } else { 1 };
                prop_assert_eq!(sol.roots.len(), expected);
                prop_assert_eq!(sol.has_three_roots, expected == 3);
            }

            #[test]
            fn roots_solve_the_cubic(p in 0.5f64..250.0, dm in -1.5f64..0.5) {
                let dp = point(p, dm);
                for r in magnon_intensities(&dp).roots {
                    let (res, scale) = cubic_residual(&dp, r);
                    prop_assert!(res.abs() <= 1e-10 * scale, "residual {res:e} of {scale:e}");
                }
            }

            #[test]
            fn drive_scales_with_root_power(p in 0.01f64..250.0, f in 0.1f64..10.0) {
                let a = point(p, -0.7).drive_amp;
                let b = point(p * f, -0.7).drive_amp;
                prop_assert!((b / a - f.sqrt()).abs() <= 1e-12 * f.sqrt());
            }
        }
    }
}
