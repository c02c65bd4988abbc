use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Args;
use kerrmag::dynamics::{
    detect_limit_cycle, integrate_covariance, integrate_mean_field, lyapunov_exponent, time_grid, LyapunovOptions,
    MeanFieldFlow, Trajectory,
};
use kerrmag::gaussian::{
    anisotropy, dynamics_start, AveragingOptions, fixed_point_covariance, log_negativity, pair_entanglement, reduce_two_mode,
    squeezing_degree, summarize, wigner_field, CovarianceMatrix, GridSpec, Mode,
};
use kerrmag::io::{
    load_params, params_to_json, write_branch_csv, write_json, write_sidecar, write_sweep_csv, write_trajectory_csv,
    write_wigner,
};
use kerrmag::params::power_for_amplitude_sq;
use kerrmag::stability::classify_derived;
use kerrmag::steady::{critical_drive, switching_points, three_root_discriminant};
use kerrmag::sweep::{bistability_curve, run_sweep, LongRunOptions, Preset, SweepSpec, Task};
use kerrmag::{derive, steady, DerivedParams, Error, SystemParams};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::Global;

pub const EXIT_NUMERIC: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NO_STATIONARY: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub hint: Option<String>,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
            hint: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::Json(_) | Error::Io(_) => EXIT_CONFIG,
            Error::NotHurwitz { .. } => EXIT_NO_STATIONARY,
            _ => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
            hint: None,
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn load_config_error(e: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        ..Failure::from(e)
    }
}

/// Parameters after the file and the command-line overrides.
fn resolve_params(g: &Global) -> std::result::Result<SystemParams, Failure> {
    let mut p = match &g.params {
        Some(path) => load_params(path).map_err(load_config_error)?,
        None => SystemParams::reference(),
    };
    if let Some(mw) = g.power_mw {
        p.drive_power = mw * 1e-3;
    }
    if let Some(d) = g.delta_m {
        p.set_delta_m(d * p.omega_b);
    }
    p.validate().map_err(load_config_error)?;
    if !(g.tol > 0.0 && g.tol < 1.0) {
        return Err(Failure::config("--tol must lie in (0, 1)"));
    }
    Ok(p)
}

fn out_dir(g: &Global) -> std::result::Result<&Path, Failure> {
    let dir = g.out.as_deref().unwrap_or(Path::new("out"));
    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn print_json(v: &Value) {
    // A closed pipe (e.g. `| head`) is not an error for a report.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn roots_json(dp: &DerivedParams) -> std::result::Result<(Value, kerrmag::stability::PhasePoint), Failure> {
    let phase = classify_derived(dp)?;
    let roots: Vec<Value> = phase
        .roots
        .iter()
        .map(|r| {
            json!({
                "intensity": r.intensity,
                "a": [r.mean_state.a.re, r.mean_state.a.im],
                "m": [r.mean_state.m.re, r.mean_state.m.im],
                "b": [r.mean_state.b.re, r.mean_state.b.im],
                "max_real_part": r.max_real_part,
                "eigenvalues": r.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "stable": r.stable,
                "hopf_like": r.hopf_like,
            })
        })
        .collect();
    Ok((Value::Array(roots), phase))
}

pub fn steady(g: &Global) -> CmdResult {
    let p = resolve_params(g)?;
    let dp = derive(&p)?;
    let (roots, phase) = roots_json(&dp)?;
    let window = steady::bistable_power_window(&p, (0.0, f64::MAX))?;
    let switching = match switching_points(&dp) {
        Ok(s) => json!(s),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let omega_c = match critical_drive(&dp) {
        Ok(w) => json!({
            "omega_c": w,
            "equivalent_power": power_for_amplitude_sq(w * w, p.omega_d, p.kappa_m),
        }),
        Err(e) => json!({ "error": e.to_string(), "code": e.code() }),
    };
    let report = json!({
        "config": { "params": params_to_json(&p) },
        "derived": dp,
        "region": phase.region.label(),
        "roots": roots,
        "discriminant_lhs": phase.cubic.discriminant_lhs,
        "three_root_discriminant": three_root_discriminant(&dp),
        "has_three_roots": phase.cubic.has_three_roots,
        "switching_points": switching,
        "bistable_window": window.map(|(lo, hi)| json!({ "lower": lo, "upper": hi })),
        "critical_drive": omega_c,
    });
    print_json(&report);
    if g.out.is_some() {
        write_json(&out_dir(g)?.join("steady.json"), &report)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    /// Integration span, in τ. Zero gives an empty trajectory.
    #[arg(long, default_value_t = 300.0)]
    pub t_end_tau: f64,
    #[arg(long, default_value_t = 20)]
    pub samples_per_tau: usize,
    /// Also integrate the covariance matrix and report E_am(t).
    #[arg(long)]
    pub covariance: bool,
    /// Run limit-cycle detection on |⟨m⟩|².
    #[arg(long)]
    pub limit_cycle: bool,
    /// Transient discarded before detection, in τ (default: 49% of the
    /// span, just under the detector's limit of half).
    #[arg(long)]
    pub lc_transient_tau: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub detect_tol: f64,
    /// Estimate the largest Lyapunov exponent.
    #[arg(long)]
    pub lyapunov: bool,
    #[arg(long, default_value_t = 500.0)]
    pub lyapunov_transient_tau: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub lyapunov_horizon_tau: f64,
}

fn write_partial(dir: &Path, e: &Error, config: &Value) -> std::result::Result<(), Failure> {
    if let Some(partial) = e.partial_trajectory() {
        let path = dir.join("trajectory.csv");
        write_trajectory_csv(&path, partial, None)?;
        write_sidecar(&path, "trajectory", &json!({ "run": config, "truncated": true, "error": e.to_string() }))?;
    }
    Ok(())
}

pub fn dynamics(g: &Global, a: &DynamicsArgs) -> CmdResult {
    let p = resolve_params(g)?;
    if !(a.t_end_tau >= 0.0 && a.t_end_tau.is_finite()) || a.samples_per_tau == 0 {
        return Err(Failure::config("--t-end-tau must be >= 0 and --samples-per-tau >= 1"));
    }
    let dir = out_dir(g)?;
    let dp = derive(&p)?;
    let phase = classify_derived(&dp)?;
    let (start, from_stable) = dynamics_start(&phase)?;
    let tau = p.tau();
    let times = if a.t_end_tau == 0.0 {
        vec![]
    } else {
        time_grid(tau, a.t_end_tau, a.samples_per_tau)
    };
    let config = json!({
        "params": params_to_json(&p),
        "t_end_tau": a.t_end_tau,
        "samples_per_tau": a.samples_per_tau,
        "tol": g.tol,
        "start": { "from_stable_root": from_stable, "m": [start.m.re, start.m.im] },
        "covariance": a.covariance,
    });
    let run = if a.covariance {
        integrate_covariance(&dp, &start, &CovarianceMatrix::initial(&dp), &times, g.tol)
    } else {
        integrate_mean_field(&dp, &start, &times, g.tol)
    };
    let traj: Trajectory = match run {
        Ok(t) => t,
        Err(e) => {
            write_partial(dir, &e, &config)?;
            return Err(e.into());
        }
    };
    let e_am = match &traj.covariances {
        Some(c) => Some(
            c.iter()
                .map(|v| pair_entanglement(v, Mode::Cavity, Mode::Magnon))
                .collect::<kerrmag::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let path = dir.join("trajectory.csv");
    write_trajectory_csv(&path, &traj, e_am.as_deref())?;
    write_sidecar(&path, "trajectory", &json!({ "run": config, "truncated": traj.truncated }))?;

    let mut report = json!({ "config": config, "region": phase.region.label(), "samples": traj.len() });
    if a.limit_cycle {
        let cut = a.lc_transient_tau.unwrap_or(0.49 * a.t_end_tau) * tau;
        let lc = detect_limit_cycle(&traj, cut, a.detect_tol)?;
        report["limit_cycle"] = json!({
            "periodic": lc.periodic,
            "period": lc.period,
            "period_tau": lc.period / tau,
            "amplitude": lc.amplitude,
            "transient_cut": lc.transient_time,
        });
    }
    if a.lyapunov {
        let est = lyapunov_exponent(
            &MeanFieldFlow(&dp),
            &start.to_real(),
            &LyapunovOptions {
                horizon: a.lyapunov_horizon_tau * tau,
                renorm_interval: tau,
                transient: a.lyapunov_transient_tau * tau,
                tol: g.tol,
            },
        )?;
        report["lyapunov"] = json!({
            "lambda_max": est.exponent,
            "converged": est.converged,
            "lambda_over_omega_b": est.exponent / p.omega_b,
        });
    }
    if let Some(e) = &e_am {
        if !e.is_empty() {
            report["e_am"] = json!(summarize(e));
        }
    }
    write_json(&dir.join("dynamics.json"), &report)?;
    print_json(&report);
    Ok(())
}

#[derive(Debug, Args)]
pub struct EntangleArgs {
    /// Mode pair, e.g. `cavity,magnon` or `m,b`.
    #[arg(long, default_value = "cavity,magnon")]
    pub pair: String,
    /// Integrate the covariance in time instead of solving for the
    /// stationary state (required when no root is stable).
    #[arg(long)]
    pub dynamic: bool,
    /// Span of the dynamic run, in τ.
    #[arg(long, default_value_t = 250.0)]
    pub t_end_tau: f64,
    #[arg(long, default_value_t = 20)]
    pub samples_per_tau: usize,
    /// Magnon Wigner snapshots at these times (in τ, dynamic mode).
    #[arg(long, value_delimiter = ',')]
    pub wigner_at: Vec<f64>,
    /// Write the Wigner field of the stationary magnon state (steady mode).
    #[arg(long)]
    pub wigner: bool,
    #[arg(long, default_value_t = 101)]
    pub wigner_points: usize,
}

fn parse_pair(s: &str) -> std::result::Result<(Mode, Mode), Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => match (Mode::parse(x), Mode::parse(y)) {
            (Some(x), Some(y)) if x != y => Ok((x, y)),
            _ => Err(Failure::config(format!("--pair: expected two distinct modes, got {s:?}"))),
        },
        _ => Err(Failure::config(format!("--pair: expected `first,second`, got {s:?}"))),
    }
}

fn snapshot(dir: &Path, name: &str, v: &CovarianceMatrix, n: usize, config: &Value) -> std::result::Result<Value, Failure> {
    let gamma = v.block(Mode::Magnon);
    let field = wigner_field(&gamma, &GridSpec::covering(&gamma, 6.0, n))?;
    write_wigner(&dir.join(format!("{name}.csv")), &field, config)?;
    Ok(json!({
        "file": format!("{name}.csv"),
        "anisotropy": anisotropy(&gamma),
        "squeezing_degree": squeezing_degree(&gamma),
        "integral": field.integral(),
    }))
}

pub fn entangle(g: &Global, a: &EntangleArgs) -> CmdResult {
    let p = resolve_params(g)?;
    let pair = parse_pair(&a.pair)?;
    if a.wigner_points < 2 {
        return Err(Failure::config("--wigner-points must be at least 2"));
    }
    let dp = derive(&p)?;
    let phase = classify_derived(&dp)?;
    let tau = p.tau();
    let config = json!({
        "params": params_to_json(&p),
        "pair": [pair.0, pair.1],
        "dynamic": a.dynamic,
        "t_end_tau": a.t_end_tau,
        "samples_per_tau": a.samples_per_tau,
        "tol": g.tol,
    });

    if !a.dynamic {
        let Some(root) = phase.upper_stable() else {
            return Err(Failure {
                code: EXIT_NO_STATIONARY,
                message: format!("no stable fixed point (region {}), so there is no stationary Gaussian state", phase.region),
                hint: Some("rerun with --dynamic for the time-dependent entanglement".into()),
            });
        };
        let v = fixed_point_covariance(&dp, &root.mean_state)?;
        let two = reduce_two_mode(&v, pair.0, pair.1)?;
        let mut report = json!({
            "config": config,
            "region": phase.region.label(),
            "branch_intensity": root.intensity,
            "log_negativity": log_negativity(&two)?,
            "nu_minus": two.nu_minus()?,
            "magnon_squeezing_degree": squeezing_degree(&v.block(Mode::Magnon)),
        });
        if a.wigner {
            let dir = out_dir(g)?;
            report["wigner"] = snapshot(dir, "wigner_steady", &v, a.wigner_points, &config)?;
        }
        if g.out.is_some() || a.wigner {
            write_json(&out_dir(g)?.join("entangle.json"), &report)?;
        }
        print_json(&report);
        return Ok(());
    }

    if !(a.t_end_tau > 0.0) || a.samples_per_tau == 0 {
        return Err(Failure::config("--t-end-tau must be > 0 and --samples-per-tau >= 1"));
    }
    let dir = out_dir(g)?;
    let (start, _) = dynamics_start(&phase)?;
    let mut times = time_grid(tau, a.t_end_tau, a.samples_per_tau);
    let mut extra: Vec<f64> = a.wigner_at.iter().map(|t| t * tau).collect();
    if extra.iter().any(|t| !(*t >= 0.0) || *t > a.t_end_tau * tau * (1.0 + 1e-12)) {
        return Err(Failure::config("--wigner-at times must lie within [0, --t-end-tau]"));
    }
    times.append(&mut extra);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * tau);
    let traj = match integrate_covariance(&dp, &start, &CovarianceMatrix::initial(&dp), &times, g.tol) {
        Ok(t) => t,
        Err(e) => {
            write_partial(dir, &e, &config)?;
            return Err(e.into());
        }
    };
    let covs = traj.covariances.as_ref().expect("covariance run");
    let e = covs
        .iter()
        .map(|v| pair_entanglement(v, pair.0, pair.1))
        .collect::<kerrmag::Result<Vec<_>>>()?;
    let path = dir.join("entanglement.csv");
    write_trajectory_csv(&path, &traj, Some(&e))?;
    write_sidecar(&path, "entanglement", &json!({ "run": config }))?;

    let mut snaps = vec![];
    for t in &a.wigner_at {
        let k = traj
            .t
            .iter()
            .position(|x| (x / tau - t).abs() <= 1e-9)
            .expect("snapshot time on the grid");
        let mut s = snapshot(dir, &format!("wigner_{t}tau"), &covs[k], a.wigner_points, &config)?;
        s["t_tau"] = json!(t);
        snaps.push(s);
    }
    let cut = a.t_end_tau.min(50.0) * tau;
    let first = traj.t.partition_point(|x| *x < cut);
    let report = json!({
        "config": config,
        "region": phase.region.label(),
        "stats_after_50tau": summarize(&e[first.min(e.len() - 1)..]),
        "wigner": snaps,
    });
    write_json(&dir.join("entangle.json"), &report)?;
    print_json(&report);
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep file with `axes` and optional `task`, `fast`, `averaging`,
    /// `long_run`; the base parameters come from `--params`.
    #[arg(long)]
    pub spec: Option<std::path::PathBuf>,
    /// Fast-mode stride for unstable points (overrides the preset).
    #[arg(long)]
    pub fast: Option<usize>,
    /// Evaluate every unstable point (disables fast mode).
    #[arg(long, conflicts_with = "fast")]
    pub full: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axes: Vec<kerrmag::sweep::Axis>,
    #[serde(default)]
    task: Task,
    #[serde(default)]
    fast: Option<usize>,
    #[serde(default)]
    averaging: AveragingOptions,
    #[serde(default)]
    long_run: LongRunOptions,
}

pub fn sweep(g: &Global, a: &SweepArgs) -> CmdResult {
    let base = resolve_params(g)?;
    let mut spec: SweepSpec = match (&g.preset, &a.spec) {
        (Some(_), Some(_)) => return Err(Failure::config("give either --preset or --spec, not both")),
        (None, None) => return Err(Failure::config("sweep needs --preset or --spec")),
        (Some(name), None) => Preset::parse(name)
            .ok_or_else(|| Failure::config(format!("unknown preset {name:?} (fig1, fig2, fig3, fig5)")))?
            .spec(base),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let f: SweepFile =
                serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            SweepSpec {
                axes: f.axes,
                base,
                task: f.task,
                workers: None,
                serial: false,
                fast: f.fast,
                averaging: f.averaging,
                long_run: f.long_run,
            }
        }
    };
    spec.workers = g.workers;
    spec.serial = g.serial;
    spec.averaging.tol = g.tol;
    spec.long_run.tol = g.tol;
    if a.full {
        spec.fast = None;
    } else if a.fast.is_some() {
        spec.fast = a.fast;
    }
    spec.validate().map_err(load_config_error)?;

    let dir = out_dir(g)?;
    let res = run_sweep(&spec)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(&path, &res)?;
    let config = json!({ "preset": g.preset, "params": params_to_json(&spec.base), "spec": spec });
    write_sidecar(&path, "sweep", &config)?;
    if spec.axes.len() == 1 && spec.axes[0].param == kerrmag::sweep::SweepParam::DrivePower {
        let rows = bistability_curve(&spec)?;
        let bpath = dir.join("branches.csv");
        write_branch_csv(&bpath, &rows)?;
        write_sidecar(&bpath, "branches", &config)?;
    }
    let failed = res.failed();
    eprintln!("{} points, {} with errors -> {}", res.points.len(), failed, path.display());
    if failed == res.points.len() {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: "every sweep point failed".into(),
            hint: None,
        });
    }
    Ok(())
}
