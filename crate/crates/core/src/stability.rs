//! Linear stability of the semiclassical fixed points.
//!
//! Quadrature ordering is `(δX_a, δY_a, δX_m, δY_m, δX_b, δY_b)` with
//! `δX = (δO + δO†)/√2`. Because that map is a uniform rescaling of
//! `(Re δO, Im δO)`, the drift matrix is exactly the Jacobian of the real
//! form of the mean-field equations.

use std::fmt;

use nalgebra::{Matrix6, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{derive, DerivedParams, SystemParams};
use crate::steady::{magnon_intensities, mean_state_from_intensity, CubicSolution, MeanState, C64};

/// Half-width of the "marginal" band around zero, relative to ‖A‖₂.
pub const MARGINAL_REL_TOL: f64 = 1e-9;

/// Time derivatives of ⟨a⟩, ⟨m⟩, ⟨b⟩ with the noise terms dropped.
pub fn mean_field_rhs(dp: &DerivedParams, s: &MeanState) -> [C64; 3] {
    let p = &dp.params;
    let i = C64::i();
    let two_re_b = 2.0 * s.b.re;
    let da = -C64::new(p.kappa_a, dp.delta_a) * s.a - i * p.g_ma * s.m;
    let dm = -C64::new(p.kappa_m, dp.delta_m) * s.m - i * p.g_ma * s.a
        - i * (2.0 * p.kerr_k * s.m.norm_sqr()) * s.m
        - i * (p.g_mb * two_re_b) * s.m
        + dp.drive_amp;
    let db = -C64::new(p.kappa_b, p.omega_b) * s.b - i * (p.g_mb * s.m.norm_sqr());
    [da, dm, db]
}

/// [`mean_field_rhs`] on the real state `[Re a, Im a, Re m, Im m, Re b, Im b]`.
pub fn mean_field_rhs_real(dp: &DerivedParams, y: &[f64], dy: &mut [f64]) {
    let [da, dm, db] = mean_field_rhs(dp, &MeanState::from_real(y));
    dy[0] = da.re;
    dy[1] = da.im;
    dy[2] = dm.re;
    dy[3] = dm.im;
    dy[4] = db.re;
    dy[5] = db.im;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftCoefficients {
    /// Δ''_m = Δ'_m + 2K|⟨m⟩|², where Δ'_m = Δ_m + 2K|⟨m⟩|² + 2g_mb Re⟨b⟩.
    pub delta_m_eff: f64,
    /// Δ_K = 2K⟨m⟩².
    pub delta_k: C64,
    /// G_mb = 2 g_mb ⟨m⟩.
    pub g_mb_eff: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix {
    pub matrix: Matrix6<f64>,
    pub coefficients: DriftCoefficients,
}

pub fn drift_coefficients(dp: &DerivedParams, s: &MeanState) -> DriftCoefficients {
    let p = &dp.params;
    let n = s.m.norm_sqr();
    let delta_m_prime = dp.delta_m + 2.0 * p.kerr_k * n + 2.0 * p.g_mb * s.b.re;
    DriftCoefficients {
        delta_m_eff: delta_m_prime + 2.0 * p.kerr_k * n,
        delta_k: 2.0 * p.kerr_k * s.m * s.m,
        g_mb_eff: 2.0 * p.g_mb * s.m,
    }
}

pub fn drift_matrix(dp: &DerivedParams, s: &MeanState) -> DriftMatrix {
    let p = &dp.params;
    let c = drift_coefficients(dp, s);
    let (ka, km, kb) = (p.kappa_a, p.kappa_m, p.kappa_b);
    let (da, g, wb) = (dp.delta_a, p.g_ma, p.omega_b);
    let dpp = c.delta_m_eff;
    let (kx, ky) = (c.delta_k.re, c.delta_k.im);
    let (gx, gy) = (c.g_mb_eff.re, c.g_mb_eff.im);
    #[rustfmt::skip]
    let matrix = Matrix6::new(
        -ka,  da,   0.0,        g,          0.0, 0.0,
        -da,  -ka,  -g,         0.0,        0.0, 0.0,
        0.0,  g,    -km + ky,   dpp - kx,   gy,  0.0,
        -g,   0.0,  -dpp - kx,  -km - ky,   -gx, 0.0,
        0.0,  0.0,  0.0,        0.0,        -kb, wb,
        0.0,  0.0,  -gx,        -gy,        -wb, -kb,
    );
    DriftMatrix {
        matrix,
        coefficients: c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub mean_state: MeanState,
    pub intensity: f64,
    pub eigenvalues: Vec<C64>,
    pub max_real_part: f64,
    pub stability: Stability,
    pub stable: bool,
    /// The dominant eigenvalue is one of a complex pair with positive real part.
    pub hopf_like: bool,
}

pub(crate) fn eigenvalues(m: &Matrix6<f64>) -> Result<Vec<C64>> {
    let schur = Schur::try_new(*m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut ev: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

pub fn spectral_norm(m: &Matrix6<f64>) -> f64 {
    m.singular_values().max()
}

pub fn classify_fixed_point(mean_state: MeanState, a: &DriftMatrix) -> Result<FixedPointReport> {
    if a.matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("drift matrix has non-finite entries".into()));
    }
    let eigenvalues = eigenvalues(&a.matrix)?;
    let dominant = eigenvalues[0];
    let max_real_part = dominant.re;
    let band = MARGINAL_REL_TOL * spectral_norm(&a.matrix);
    let stability = if max_real_part < -band {
        Stability::Stable
    } else if max_real_part > band {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    let hopf_like = stability == Stability::Unstable && dominant.im.abs() > band;
    Ok(FixedPointReport {
        intensity: mean_state.intensity(),
        mean_state,
        eigenvalues,
        max_real_part,
        stability,
        stable: stability == Stability::Stable,
        hopf_like,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "1S0U")]
    OneStable,
    #[serde(rename = "2S1U")]
    Bistable,
    #[serde(rename = "0S1U")]
    Unstable,
    #[serde(rename = "1S2U")]
    OneStableTwoUnstable,
    #[serde(rename = "degenerate")]
    Degenerate,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::OneStable => "1S0U",
            Region::Bistable => "2S1U",
            Region::Unstable => "0S1U",
            Region::OneStableTwoUnstable => "1S2U",
            Region::Degenerate => "degenerate",
        }
    }

    pub fn from_counts(roots: usize, stable: usize) -> Region {
        match (roots, stable) {
            (1, 1) => Region::OneStable,
            (3, 2) => Region::Bistable,
            (1, 0) => Region::Unstable,
            (3, 1) => Region::OneStableTwoUnstable,
            _ => Region::Degenerate,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub region: Region,
    pub cubic: CubicSolution,
    /// One report per root, ascending in intensity.
    pub roots: Vec<FixedPointReport>,
}

impl PhasePoint {
    pub fn stable_count(&self) -> usize {
        self.roots.iter().filter(|r| r.stable).count()
    }

    /// Highest-intensity stable root (the upper branch when bistable).
    pub fn upper_stable(&self) -> Option<&FixedPointReport> {
        self.roots.iter().rev().find(|r| r.stable)
    }
}

pub fn classify_derived(dp: &DerivedParams) -> Result<PhasePoint> {
    let cubic = magnon_intensities(dp);
    let roots = cubic
        .roots
        .iter()
        .map(|&i| {
            let s = mean_state_from_intensity(dp, i)?;
            classify_fixed_point(s, &drift_matrix(dp, &s))
        })
        .collect::<Result<Vec<_>>>()?;
    let marginal = roots.iter().any(|r| r.stability == Stability::Marginal);
    let region = if cubic.degenerate || marginal {
        Region::Degenerate
    } else {
        Region::from_counts(roots.len(), roots.iter().filter(|r| r.stable).count())
    };
    Ok(PhasePoint { region, cubic, roots })
}

pub fn classify_phase(params: &SystemParams) -> Result<PhasePoint> {
    classify_derived(&derive(params)?)
}
