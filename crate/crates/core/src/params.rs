//! Physical inputs of the three-mode system and the effective quantities
//! derived from them.
//!
//! Every frequency and rate is stored as an angular quantity in rad/s.
//! Parameter files may use the `frequency / 2π` convention instead; the
//! conversion happens once, in [`crate::io`].
//!
//! Decay rates are used exactly as written in the equations of motion
//! (amplitude damping `-κ a`), with no half-width/full-width conversion.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, CODATA 2018 [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, CODATA 2018 (exact) [J/K].
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_b: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub g_ma: f64,
    pub g_mb: f64,
    pub kerr_k: f64,
    pub omega_d: f64,
    /// Drive power [W].
    pub drive_power: f64,
    /// Bath temperature [K].
    pub temperature: f64,
}

impl SystemParams {
    /// Parameter set of the reference bistability scan: 10 GHz cavity,
    /// 10 MHz phonon, Δ_a = -0.9 ω_b, Δ_m = -0.8 ω_b, 10 mK, driven at 50 mW.
    pub fn reference() -> Self {
        let omega_a = TAU * 10e9;
        let omega_b = TAU * 10e6;
        let omega_d = omega_a + 0.9 * omega_b;
        let omega_m = omega_d - 0.8 * omega_b;
        SystemParams {
            omega_a,
            omega_m,
            omega_b,
            kappa_a: TAU * 1e6,
            kappa_m: TAU * 1e6,
            kappa_b: TAU * 100.0,
            g_ma: TAU * 3.2e6,
            g_mb: TAU * 1e-3,
            kerr_k: TAU * 6.5e-9,
            omega_d,
            drive_power: 50e-3,
            temperature: 10e-3,
        }
    }

    pub fn delta_a(&self) -> f64 {
        self.omega_a - self.omega_d
    }

    pub fn delta_m(&self) -> f64 {
        self.omega_m - self.omega_d
    }

    /// Sets the magnon detuning, keeping the drive frequency.
    pub fn set_delta_m(&mut self, delta_m: f64) {
        self.omega_m = self.omega_d + delta_m;
    }

    /// Sets the cavity detuning by moving the drive, keeping Δ_m fixed.
    pub fn set_delta_a(&mut self, delta_a: f64) {
        let delta_m = self.delta_m();
        self.omega_d = self.omega_a - delta_a;
        self.omega_m = self.omega_d + delta_m;
    }

    pub fn with_power(mut self, drive_power: f64) -> Self {
        self.drive_power = drive_power;
        self
    }

    pub fn with_delta_m(mut self, delta_m: f64) -> Self {
        self.set_delta_m(delta_m);
        self
    }

    /// Mechanical period τ = 2π/ω_b [s].
    pub fn tau(&self) -> f64 {
        TAU / self.omega_b
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_b", self.omega_b),
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_b", self.kappa_b),
            ("omega_d", self.omega_d),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !self.kerr_k.is_finite() {
            return Err(Error::Domain(format!("kerr_k must be finite, got {}", self.kerr_k)));
        }
        let non_negative = [
            ("g_ma", self.g_ma),
            ("g_mb", self.g_mb),
            ("drive_power", self.drive_power),
            ("temperature", self.temperature),
        ];
        for (name, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Effective quantities computed once per parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub params: SystemParams,
    pub delta_a: f64,
    pub delta_m: f64,
    pub eta: f64,
    pub zeta: f64,
    /// K' = 2(K - ζ ω_b).
    pub kerr_eff: f64,
    /// Δ₀ = Δ_m - η Δ_a.
    pub delta_0: f64,
    /// κ₀ = κ_m + η κ_a.
    pub kappa_0: f64,
    /// Ω, real drive amplitude in the rotating frame.
    pub drive_amp: f64,
    pub n_th: f64,
}

/// Ω = √(2 κ_m P_d / ħ ω_d).
pub fn drive_amplitude(drive_power: f64, omega_d: f64, kappa_m: f64) -> Result<f64> {
    for (name, v) in [("drive_power", drive_power), ("omega_d", omega_d), ("kappa_m", kappa_m)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if omega_d == 0.0 {
        return Err(Error::Domain("omega_d must be > 0".into()));
    }
    Ok((2.0 * kappa_m * drive_power / (HBAR * omega_d)).sqrt())
}

/// Inverse of [`drive_amplitude`]: the power that produces Ω².
pub fn power_for_amplitude_sq(omega_sq: f64, omega_d: f64, kappa_m: f64) -> f64 {
    omega_sq * HBAR * omega_d / (2.0 * kappa_m)
}

/// Bose-Einstein occupation of the phonon mode; exactly zero at T = 0.
pub fn thermal_occupation(omega_b: f64, temperature: f64) -> Result<f64> {
    if !omega_b.is_finite() || omega_b <= 0.0 {
        return Err(Error::Domain(format!("omega_b must be finite and > 0, got {omega_b}")));
    }
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(Error::Domain(format!("temperature must be finite and >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega_b / (K_B * temperature)).exp_m1())
}

pub fn derive(params: &SystemParams) -> Result<DerivedParams> {
    params.validate()?;
    let delta_a = params.delta_a();
    let delta_m = params.delta_m();
    let eta = params.g_ma * params.g_ma / (delta_a * delta_a + params.kappa_a * params.kappa_a);
    let zeta = params.g_mb * params.g_mb
        / (params.omega_b * params.omega_b + params.kappa_b * params.kappa_b);
    Ok(DerivedParams {
        params: *params,
        delta_a,
        delta_m,
        eta,
        zeta,
        kerr_eff: 2.0 * (params.kerr_k - zeta * params.omega_b),
        delta_0: delta_m - eta * delta_a,
        kappa_0: params.kappa_m + eta * params.kappa_a,
        drive_amp: drive_amplitude(params.drive_power, params.omega_d, params.kappa_m)?,
        n_th: thermal_occupation(params.omega_b, params.temperature)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_power_gives_zero_amplitude() {
        assert_eq!(drive_amplitude(0.0, 1e10, 1e6).unwrap(), 0.0);
    }

    #[test]
    fn amplitude_at_50_mw() {
        // 2 * 2π·1e6 * 0.05 / (ħ * 2π·10.009e9), evaluated by hand.
        let omega_d = TAU * (10e9 + 9e6);
        let omega = drive_amplitude(0.05, omega_d, TAU * 1e6).unwrap();
        let expected = (2.0 * 1e6 * 0.05 / (HBAR * 10.009e9)).sqrt();
        assert!((omega / expected - 1.0).abs() < 1e-14);
        assert!((omega / 3.078e14 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn quadrupled_power_doubles_amplitude() {
        let a = drive_amplitude(0.01, 6e10, 6e6).unwrap();
        let b = drive_amplitude(0.04, 6e10, 6e6).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn negative_or_nan_inputs_rejected() {
        assert!(drive_amplitude(-1.0, 1.0, 1.0).is_err());
        assert!(drive_amplitude(1.0, f64::NAN, 1.0).is_err());
        assert!(drive_amplitude(1.0, 0.0, 1.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
        assert!(thermal_occupation(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn thermal_occupation_limits() {
        assert_eq!(thermal_occupation(TAU * 1e7, 0.0).unwrap(), 0.0);
        let omega_b = TAU * 10e6;
        let t = HBAR * omega_b / (K_B * std::f64::consts::LN_2);
        assert!((thermal_occupation(omega_b, t).unwrap() - 1.0).abs() < 1e-12);
        // x = ħω/kT ≈ 0.04799; 1/(e^x - 1) ≈ 20.3406
        let n = thermal_occupation(omega_b, 0.01).unwrap();
        assert!((n - 20.3406).abs() < 1e-3, "n_th = {n}");
    }

    #[test]
    fn reference_derived_values() {
        let dp = derive(&SystemParams::reference()).unwrap();
        let p = dp.params;
        assert!((dp.eta - 10.24 / 82.0).abs() < 1e-12);
        assert!((dp.delta_0 / p.omega_b + 0.687_609_756).abs() < 1e-8);
        assert!((dp.kappa_0 / TAU / 1e6 - 1.124_878_05).abs() < 1e-8);
        assert!(dp.kerr_eff > 0.0);
        assert!(((dp.kerr_eff - 2.0 * p.kerr_k) / (2.0 * p.kerr_k)).abs() < 1e-4);
        assert!((dp.delta_a + 0.9 * p.omega_b).abs() < 1e-4);
    }

    #[test]
    fn kerr_off_gives_zero_effective_kerr() {
        let mut p = SystemParams::reference();
        p.kerr_k = 0.0;
        p.g_mb = 0.0;
        let dp = derive(&p).unwrap();
        assert_eq!(dp.kerr_eff, 0.0);
    }

    #[test]
    fn eta_even_in_delta_a() {
        let p = SystemParams::reference();
        let mut q = p;
        q.set_delta_a(-p.delta_a());
        let (a, b) = (derive(&p).unwrap(), derive(&q).unwrap());
        assert!((a.eta - b.eta).abs() <= 1e-15 * a.eta);
        assert_eq!(a.zeta, b.zeta);
        assert!((b.delta_m - a.delta_m).abs() < 1e-3);
    }

    #[test]
    fn derive_is_deterministic() {
        let p = SystemParams::reference();
        assert_eq!(derive(&p).unwrap(), derive(&p).unwrap());
    }
}
