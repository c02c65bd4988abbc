//! Parameter sweeps over one or two axes, evaluated in parallel with
//! results stored by grid index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{detect_limit_cycle, integrate_mean_field, lyapunov_exponent, time_grid, LyapunovOptions, MeanFieldFlow};
use crate::error::{Error, Result};
use crate::gaussian::{
    dynamics_start, fixed_point_covariance, pair_entanglement, time_averaged_entanglement, AveragingOptions, Mode,
};
use crate::params::{derive, DerivedParams, SystemParams};
use crate::stability::{classify_derived, PhasePoint, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Drive power [W].
    DrivePower,
    /// Magnon detuning [rad/s], drive frequency held.
    DeltaM,
    /// Cavity detuning [rad/s], magnon detuning held.
    DeltaA,
    Temperature,
    GMa,
    GMb,
    KerrK,
    KappaA,
    KappaM,
    KappaB,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DrivePower => "drive_power",
            SweepParam::DeltaM => "delta_m",
            SweepParam::DeltaA => "delta_a",
            SweepParam::Temperature => "temperature",
            SweepParam::GMa => "g_ma",
            SweepParam::GMb => "g_mb",
            SweepParam::KerrK => "kerr_k",
            SweepParam::KappaA => "kappa_a",
            SweepParam::KappaM => "kappa_m",
            SweepParam::KappaB => "kappa_b",
        }
    }

    pub fn apply(self, p: &mut SystemParams, value: f64) {
        match self {
            SweepParam::DrivePower => p.drive_power = value,
            SweepParam::DeltaM => p.set_delta_m(value),
            SweepParam::DeltaA => p.set_delta_a(value),
            SweepParam::Temperature => p.temperature = value,
            SweepParam::GMa => p.g_ma = value,
            SweepParam::GMb => p.g_mb = value,
            SweepParam::KerrK => p.kerr_k = value,
            SweepParam::KappaA => p.kappa_a = value,
            SweepParam::KappaM => p.kappa_m = value,
            SweepParam::KappaB => p.kappa_b = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn linear(param: SweepParam, min: f64, max: f64, points: usize) -> Self {
        Axis {
            param,
            min,
            max,
            points,
            scale: Scale::Linear,
        }
    }

    fn validate(&self) -> Result<()> {
        let key = format!("axes.{}", self.param.name());
        if self.points < 2 {
            return Err(Error::config(key, "an axis needs at least 2 points"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return Err(Error::config(key, "range must be finite with min < max"));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::config(key, "log axis needs a positive range"));
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            return self.max;
        }
        let f = i as f64 / (self.points - 1) as f64;
        match self.scale {
            Scale::Linear => self.min + f * (self.max - self.min),
            Scale::Log => self.min * (self.max / self.min).powf(f),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Roots and stability only.
    #[default]
    Classify,
    /// Classification plus cavity-magnon E_N.
    Entangle,
    /// Classification plus long-time mean-field behavior.
    Dynamics,
}

/// Long-run settings for the `dynamics` task, in units of τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongRunOptions {
    pub t_end_tau: f64,
    pub transient_tau: f64,
    pub samples_per_tau: usize,
    pub detect_tol: f64,
    pub lyapunov_transient_tau: f64,
    pub lyapunov_horizon_tau: f64,
    pub tol: f64,
}

impl Default for LongRunOptions {
    fn default() -> Self {
        LongRunOptions {
            t_end_tau: 600.0,
            transient_tau: 250.0,
            samples_per_tau: 20,
            detect_tol: 0.05,
            lyapunov_transient_tau: 500.0,
            lyapunov_horizon_tau: 1000.0,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongRunSummary {
    pub periodic: bool,
    /// Period [s], 0 when not periodic.
    pub period: f64,
    pub amplitude: f64,
    pub lyapunov: f64,
    pub lyapunov_converged: bool,
}

/// Limit-cycle check and largest Lyapunov exponent from [`dynamics_start`].
pub fn long_run(dp: &DerivedParams, phase: &PhasePoint, opts: &LongRunOptions) -> Result<LongRunSummary> {
    let tau = dp.params.tau();
    let (start, _) = dynamics_start(phase)?;
    let times = time_grid(tau, opts.t_end_tau, opts.samples_per_tau);
    let traj = integrate_mean_field(dp, &start, &times, opts.tol)?;
    let lc = detect_limit_cycle(&traj, opts.transient_tau * tau, opts.detect_tol)?;
    let ly = lyapunov_exponent(
        &MeanFieldFlow(dp),
        &start.to_real(),
        &LyapunovOptions {
            horizon: opts.lyapunov_horizon_tau * tau,
            renorm_interval: tau,
            transient: opts.lyapunov_transient_tau * tau,
            tol: opts.tol,
        },
    )?;
    Ok(LongRunSummary {
        periodic: lc.periodic,
        period: lc.period,
        amplitude: lc.amplitude,
        lyapunov: ly.exponent,
        lyapunov_converged: ly.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// One or two axes; the first varies fastest in the output order.
    pub axes: Vec<Axis>,
    pub base: SystemParams,
    #[serde(default)]
    pub task: Task,
    /// Thread count; `None` uses all cores. Not serialized, so outputs do
    /// not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub serial: bool,
    /// Stride of the sublattice on which points without a stable root get a
    /// time-averaged E_am; other such points are filled from the nearest
    /// computed one. Points next to a stable region are always computed.
    #[serde(default)]
    pub fast: Option<usize>,
    #[serde(default)]
    pub averaging: AveragingOptions,
    #[serde(default)]
    pub long_run: LongRunOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::config("axes", "a sweep has one or two axes"));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::config("axes", "axes must vary different parameters"));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.fast == Some(0) {
            return Err(Error::config("fast", "stride must be at least 1"));
        }
        self.base.validate()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].points, self.axes.get(1).map_or(1, |a| a.points))
    }

    pub fn len(&self) -> usize {
        let (nx, ny) = self.shape();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params_at(&self, i: usize, j: usize) -> SystemParams {
        let mut p = self.base;
        self.axes[0].param.apply(&mut p, self.axes[0].value(i));
        if let Some(a) = self.axes.get(1) {
            a.param.apply(&mut p, a.value(j));
        }
        p
    }

    pub fn coords(&self, i: usize, j: usize) -> Vec<f64> {
        let mut c = vec![self.axes[0].value(i)];
        if let Some(a) = self.axes.get(1) {
            c.push(a.value(j));
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EamSource {
    /// Stationary covariance of a stable root.
    Steady,
    /// Time average along the co-integrated covariance.
    TimeAverage,
    /// Copied from the nearest computed point (fast mode).
    Filled,
}

impl EamSource {
    pub fn label(self) -> &'static str {
        match self {
            EamSource::Steady => "steady",
            EamSource::TimeAverage => "time_average",
            EamSource::Filled => "filled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub i: usize,
    pub j: usize,
    pub coords: Vec<f64>,
    /// `None` only when classification itself failed (see `error`).
    pub region: Option<Region>,
    pub intensities: Vec<f64>,
    pub stable: Vec<bool>,
    pub e_am: Option<f64>,
    pub e_am_source: Option<EamSource>,
    pub long_run: Option<LongRunSummary>,
    pub error: Option<String>,
}

impl SweepPoint {
    fn new(spec: &SweepSpec, i: usize, j: usize) -> Self {
        SweepPoint {
            i,
            j,
            coords: spec.coords(i, j),
            region: None,
            intensities: vec![],
            stable: vec![],
            e_am: None,
            e_am_source: None,
            long_run: None,
            error: None,
        }
    }

    pub fn has_stable_root(&self) -> bool {
        self.stable.iter().any(|s| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub nx: usize,
    pub ny: usize,
    /// Row-major in (j, i): `points[j * nx + i]`.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn at(&self, i: usize, j: usize) -> &SweepPoint {
        &self.points[j * self.nx + i]
    }

    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }

    /// Grid neighbours (up to 8) of `(i, j)`.
    pub fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = &SweepPoint> + '_ {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let (i, j) = (i as isize, j as isize);
        (-1..=1)
            .flat_map(move |dj| (-1..=1).map(move |di| (i + di, j + dj)))
            .filter(move |&(x, y)| (x, y) != (i, j) && x >= 0 && y >= 0 && x < nx && y < ny)
            .map(move |(x, y)| &self.points[(y * nx + x) as usize])
    }

    /// Evaluated point with the largest E_am (first in grid order on ties).
    /// Fast-mode copies are ignored.
    pub fn max_entanglement(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.e_am.is_some() && p.e_am_source != Some(EamSource::Filled))
            .fold(None, |best: Option<&SweepPoint>, p| match best {
                Some(b) if b.e_am >= p.e_am => Some(b),
                _ => Some(p),
            })
    }
}

fn classify_point(spec: &SweepSpec, i: usize, j: usize) -> (SweepPoint, Option<(DerivedParams, PhasePoint)>) {
    let mut pt = SweepPoint::new(spec, i, j);
    let res = derive(&spec.params_at(i, j)).and_then(|dp| Ok((dp, classify_derived(&dp)?)));
    match res {
        Ok((dp, phase)) => {
            pt.region = Some(phase.region);
            pt.intensities = phase.roots.iter().map(|r| r.intensity).collect();
            pt.stable = phase.roots.iter().map(|r| r.stable).collect();
            (pt, Some((dp, phase)))
        }
        Err(e) => {
            pt.error = Some(e.code().to_string());
            (pt, None)
        }
    }
}

fn steady_entanglement(dp: &DerivedParams, phase: &PhasePoint) -> Option<Result<f64>> {
    let r = phase.upper_stable()?;
    Some(
        fixed_point_covariance(dp, &r.mean_state)
            .and_then(|v| pair_entanglement(&v, Mode::Cavity, Mode::Magnon)),
    )
}

fn record(pt: &mut SweepPoint, res: Result<f64>, source: EamSource) {
    match res {
        Ok(e) => {
            pt.e_am = Some(e);
            pt.e_am_source = Some(source);
        }
        Err(e) => pt.error = Some(e.code().to_string()),
    }
}

fn in_pool<T: Send>(spec: &SweepSpec, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = if spec.serial { 1 } else { spec.workers.unwrap_or(0) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn map_indices<T: Send>(spec: &SweepSpec, idx: &[usize], f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if spec.serial {
        idx.iter().map(|&k| f(k)).collect()
    } else {
        idx.par_iter().map(|&k| f(k)).collect()
    }
}

/// Evaluates every grid point. Per-point failures are recorded in the
/// point's `error` field and never abort the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let (nx, ny) = spec.shape();
    in_pool(spec, || {
        let all: Vec<usize> = (0..nx * ny).collect();
        let mut classified = map_indices(spec, &all, |k| classify_point(spec, k % nx, k / nx));

        match spec.task {
            Task::Classify => {}
            Task::Dynamics => {
                let done = map_indices(spec, &all, |k| {
                    classified[k].1.as_ref().map(|(dp, ph)| long_run(dp, ph, &spec.long_run))
                });
                for (c, r) in classified.iter_mut().zip(done) {
                    match r {
                        Some(Ok(s)) => c.0.long_run = Some(s),
                        Some(Err(e)) => c.0.error = Some(e.code().to_string()),
                        None => {}
                    }
                }
            }
            Task::Entangle => {
                let steady = map_indices(spec, &all, |k| {
                    classified[k].1.as_ref().and_then(|(dp, ph)| steady_entanglement(dp, ph))
                });
                for (c, r) in classified.iter_mut().zip(steady) {
                    if let Some(r) = r {
                        record(&mut c.0, r, EamSource::Steady);
                    }
                }
                let pending: Vec<usize> = (0..nx * ny)
                    .filter(|&k| classified[k].1.is_some() && !classified[k].0.has_stable_root())
                    .collect();
                let selected: Vec<usize> = match spec.fast {
                    None => pending.clone(),
                    Some(stride) => pending
                        .iter()
                        .copied()
                        .filter(|&k| {
                            let (i, j) = (k % nx, k / nx);
                            (i % stride == 0 && j % stride == 0) || touches_stable(&classified, nx, ny, i, j)
                        })
                        .collect(),
                };
                let averaged = map_indices(spec, &selected, |k| {
                    let (dp, _) = classified[k].1.as_ref().expect("classified");
                    time_averaged_entanglement(dp, &spec.averaging).map(|s| s.mean)
                });
                for (&k, r) in selected.iter().zip(averaged) {
                    record(&mut classified[k].0, r, EamSource::TimeAverage);
                }
                fill_skipped(&mut classified, nx, &pending, &selected);
            }
        }
        SweepResult {
            spec: spec.clone(),
            nx,
            ny,
            points: classified.into_iter().map(|c| c.0).collect(),
        }
    })
}

type Classified = (SweepPoint, Option<(DerivedParams, PhasePoint)>);

fn touches_stable(c: &[Classified], nx: usize, ny: usize, i: usize, j: usize) -> bool {
    let mut any = false;
    for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
        let (x, y) = (i as isize + di, j as isize + dj);
        if x >= 0 && y >= 0 && (x as usize) < nx && (y as usize) < ny {
            any |= c[y as usize * nx + x as usize].0.has_stable_root();
        }
    }
    any
}

/// Copies E_am from the nearest computed point (grid distance, first in
/// grid order on ties) into every pending point that was not evaluated.
fn fill_skipped(c: &mut [Classified], nx: usize, pending: &[usize], selected: &[usize]) {
    let sources: Vec<(usize, f64)> = selected
        .iter()
        .filter_map(|&k| c[k].0.e_am.filter(|_| c[k].0.e_am_source == Some(EamSource::TimeAverage)).map(|e| (k, e)))
        .collect();
    if sources.is_empty() {
        return;
    }
    let mut is_selected = vec![false; c.len()];
    selected.iter().for_each(|&k| is_selected[k] = true);
    for &k in pending.iter().filter(|&&k| !is_selected[k]) {
        let (i, j) = ((k % nx) as isize, (k / nx) as isize);
        let &(_, e) = sources
            .iter()
            .min_by_key(|(s, _)| {
                let (si, sj) = ((s % nx) as isize, (s / nx) as isize);
                ((si - i).pow(2) + (sj - j).pow(2), *s)
            })
            .expect("non-empty");
        c[k].0.e_am = Some(e);
        c[k].0.e_am_source = Some(EamSource::Filled);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub power: f64,
    pub region: Option<Region>,
    /// `(intensity, stable)`, ascending in intensity.
    pub branches: Vec<(f64, bool)>,
}

/// All real roots with stability at every power of a 1-D power sweep.
pub fn bistability_curve(spec: &SweepSpec) -> Result<Vec<BranchRow>> {
    if spec.axes.len() != 1 || spec.axes[0].param != SweepParam::DrivePower {
        return Err(Error::config("axes", "the branch table needs a single drive_power axis"));
    }
    let classify_only = SweepSpec {
        task: Task::Classify,
        ..spec.clone()
    };
    let res = run_sweep(&classify_only)?;
    Ok(res
        .points
        .iter()
        .map(|p| BranchRow {
            power: p.coords[0],
            region: p.region,
            branches: p.intensities.iter().copied().zip(p.stable.iter().copied()).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig5,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "fig1" => Some(Preset::Fig1),
            "fig2" => Some(Preset::Fig2),
            "fig3" => Some(Preset::Fig3),
            "fig5" => Some(Preset::Fig5),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig5 => "fig5",
        }
    }

    /// Sweep for this preset around `base`.
    ///
    /// * `fig1`: power 1 to 150 mW in 0.1 mW steps, branch classification.
    /// * `fig2`: 200×200 over power 1 to 200 mW and Δ_m from -1.2 ω_b to 0.
    /// * `fig3`: power 1 to 150 mW, 150 points, with E_am.
    /// * `fig5`: the `fig2` grid with E_am, fast mode stride 8.
    pub fn spec(self, base: SystemParams) -> SweepSpec {
        let wb = base.omega_b;
        let power = |max: f64, n| Axis::linear(SweepParam::DrivePower, 1e-3, max, n);
        let delta_m = Axis::linear(SweepParam::DeltaM, -1.2 * wb, 0.0, 200);
        let (axes, task, fast) = match self {
            Preset::Fig1 => (vec![power(0.15, 1491)], Task::Classify, None),
            Preset::Fig2 => (vec![power(0.2, 200), delta_m], Task::Classify, None),
            Preset::Fig3 => (vec![power(0.15, 150)], Task::Entangle, None),
            Preset::Fig5 => (vec![power(0.2, 200), delta_m], Task::Entangle, Some(8)),
        };
        SweepSpec {
            axes,
            base,
            task,
            workers: None,
            serial: false,
            fast,
            averaging: AveragingOptions::default(),
            long_run: LongRunOptions::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_spec(min: f64, max: f64, n: usize) -> SweepSpec {
        SweepSpec {
            axes: vec![Axis::linear(SweepParam::DrivePower, min, max, n)],
            ..Preset::Fig1.spec(SystemParams::reference())
        }
    }

    #[test]
    fn axis_values() {
        let a = Axis::linear(SweepParam::DrivePower, 1.0, 2.0, 3);
        assert_eq!(a.values(), vec![1.0, 1.5, 2.0]);
        let l = Axis {
            scale: Scale::Log,
            ..Axis::linear(SweepParam::Temperature, 1e-3, 1e-1, 3)
        };
        let v = l.values();
        assert!((v[1] - 1e-2).abs() < 1e-15 && v[2] == 1e-1);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = power_spec(0.0, 0.1, 1);
        assert!(matches!(s.validate(), Err(Error::Config { .. })));
        s = power_spec(0.1, 0.0, 5);
        assert!(s.validate().is_err());
        s = power_spec(0.0, 0.1, 5);
        s.axes.push(s.axes[0]);
        assert!(s.validate().is_err());
        s = power_spec(0.0, 0.1, 5);
        s.workers = Some(0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn region_sequence_along_power() {
        let res = run_sweep(&power_spec(1e-3, 0.15, 150)).unwrap();
        let mut seq: Vec<Region> = vec![];
        for p in &res.points {
            let r = p.region.unwrap();
            if seq.last() != Some(&r) {
                seq.push(r);
            }
        }
        assert_eq!(
            seq,
            vec![Region::OneStable, Region::Bistable, Region::OneStable, Region::Unstable]
        );
    }

    #[test]
    fn branch_table_counts() {
        let rows = bistability_curve(&power_spec(5e-3, 0.1, 3)).unwrap();
        assert_eq!(rows[0].branches.len(), 1);
        assert_eq!(rows[1].branches.len(), 3);
        assert_eq!(rows[1].branches.iter().map(|b| b.1).collect::<Vec<_>>(), vec![true, false, true]);
    }

    #[test]
    fn neighbours_at_corner_and_centre() {
        let mut spec = Preset::Fig2.spec(SystemParams::reference());
        spec.axes[0].points = 3;
        spec.axes[1].points = 3;
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.neighbours(0, 0).count(), 3);
        assert_eq!(res.neighbours(1, 1).count(), 8);
    }

    #[test]
    fn fill_uses_nearest_source() {
        let spec = power_spec(0.0, 0.1, 5);
        let mut c: Vec<Classified> = (0..5).map(|i| (SweepPoint::new(&spec, i, 0), None)).collect();
        for (k, e) in [(0usize, 1.0), (4, 2.0)] {
            c[k].0.e_am = Some(e);
            c[k].0.e_am_source = Some(EamSource::TimeAverage);
        }
        fill_skipped(&mut c, 5, &[0, 1, 2, 3, 4], &[0, 4]);
        let got: Vec<f64> = c.iter().map(|p| p.0.e_am.unwrap()).collect();
        assert_eq!(got, vec![1.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(c[2].0.e_am_source, Some(EamSource::Filled));
    }

    fn boundaries(res: &SweepResult) -> Vec<(Region, Region, f64)> {
        res.points
            .windows(2)
            .filter(|w| w[0].region != w[1].region)
            .map(|w| (w[0].region.unwrap(), w[1].region.unwrap(), 0.5 * (w[0].coords[0] + w[1].coords[0])))
            .collect()
    }

    #[test]
    fn refinement_moves_boundaries_less_than_a_cell() {
        let coarse = run_sweep(&power_spec(1e-3, 0.15, 75)).unwrap();
        let fine = run_sweep(&power_spec(1e-3, 0.15, 149)).unwrap();
        let step = (0.15 - 1e-3) / 74.0;
        let (bc, bf) = (boundaries(&coarse), boundaries(&fine));
        assert_eq!(bc.len(), bf.len());
        for (c, f) in bc.iter().zip(&bf) {
            assert_eq!((c.0, c.1), (f.0, f.1));
            assert!((c.2 - f.2).abs() < step, "{c:?} vs {f:?}");
        }
    }

    #[test]
    fn labels_agree_with_discriminant() {
        let mut spec = Preset::Fig2.spec(SystemParams::reference());
        spec.axes[0].points = 25;
        spec.axes[1].points = 25;
        let res = run_sweep(&spec).unwrap();
        for p in &res.points {
            let dp = derive(&spec.params_at(p.i, p.j)).unwrap();
            let sol = crate::steady::magnon_intensities(&dp);
            if sol.degenerate {
                continue;
            }
            let three = crate::steady::three_root_discriminant(&dp) < 0.0;
            assert_eq!(p.intensities.len() == 3, three);
            let region = p.region.unwrap();
            assert_eq!(matches!(region, Region::Bistable | Region::OneStableTwoUnstable), three);
        }
    }
}
