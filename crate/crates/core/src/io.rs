//! Parameter files, CSV tables and JSON sidecars.
//!
//! Parameter files are flat JSON objects. Frequencies and rates are read in
//! the unit named by `unit_convention`: `"rad_per_s"` (default) or
//! `"hz_over_2pi"`, where every frequency-like value is multiplied by 2π.
//! Power is always in W and temperature in K. The drive frequency may be
//! given as `omega_d` or as `delta_a = omega_a - omega_d`; the magnon
//! frequency as `omega_m` or as `delta_m = omega_m - omega_d`.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dynamics::{pack_upper, Trajectory};
use crate::error::{Error, Result};
use crate::gaussian::WignerField;
use crate::params::SystemParams;
use crate::sweep::{BranchRow, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitConvention {
    #[default]
    RadPerS,
    HzOver2Pi,
}

impl UnitConvention {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "rad_per_s" => Ok(UnitConvention::RadPerS),
            "hz_over_2pi" => Ok(UnitConvention::HzOver2Pi),
            other => Err(Error::config(
                "unit_convention",
                format!("expected \"rad_per_s\" or \"hz_over_2pi\", got {other:?}"),
            )),
        }
    }

    fn factor(self) -> f64 {
        match self {
            UnitConvention::RadPerS => 1.0,
            UnitConvention::HzOver2Pi => TAU,
        }
    }
}

const FREQUENCY_KEYS: [&str; 11] = [
    "omega_a", "omega_m", "omega_b", "omega_d", "delta_a", "delta_m", "kappa_a", "kappa_m", "kappa_b", "g_ma",
    "g_mb",
];
const OTHER_KEYS: [&str; 4] = ["kerr_k", "drive_power", "temperature", "unit_convention"];

fn number(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| Error::config(key, "must be a finite number")),
    }
}

fn required(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    number(obj, key)?.ok_or_else(|| Error::config(key, "missing required key"))
}

fn one_of(obj: &Map<String, Value>, absolute: &str, relative: &str) -> Result<(Option<f64>, Option<f64>)> {
    let (a, r) = (number(obj, absolute)?, number(obj, relative)?);
    match (a, r) {
        (Some(_), Some(_)) => Err(Error::config(relative, format!("give either {absolute} or {relative}, not both"))),
        (None, None) => Err(Error::config(absolute, format!("missing required key (or {relative})"))),
        _ => Ok((a, r)),
    }
}

/// Reads a parameter object. Unknown keys are rejected.
pub fn params_from_json(value: &Value) -> Result<SystemParams> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::config("<root>", "parameter file must be a JSON object"))?;
    for key in obj.keys() {
        if !FREQUENCY_KEYS.contains(&key.as_str()) && !OTHER_KEYS.contains(&key.as_str()) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
    }
    let units = match obj.get("unit_convention") {
        None => UnitConvention::default(),
        Some(Value::String(s)) => UnitConvention::parse(s)?,
        Some(_) => return Err(Error::config("unit_convention", "must be a string")),
    };
    let f = units.factor();
    let freq = |key: &str| required(obj, key).map(|v| v * f);

    let omega_a = freq("omega_a")?;
    let (omega_d, delta_a) = one_of(obj, "omega_d", "delta_a")?;
    let omega_d = omega_d.map_or_else(|| omega_a - delta_a.unwrap() * f, |w| w * f);
    let (omega_m, delta_m) = one_of(obj, "omega_m", "delta_m")?;
    let omega_m = omega_m.map_or_else(|| omega_d + delta_m.unwrap() * f, |w| w * f);
    let p = SystemParams {
        omega_a,
        omega_m,
        omega_b: freq("omega_b")?,
        kappa_a: freq("kappa_a")?,
        kappa_m: freq("kappa_m")?,
        kappa_b: freq("kappa_b")?,
        g_ma: freq("g_ma")?,
        g_mb: freq("g_mb")?,
        kerr_k: freq("kerr_k")?,
        omega_d,
        drive_power: required(obj, "drive_power")?,
        temperature: required(obj, "temperature")?,
    };
    p.validate()?;
    Ok(p)
}

/// Canonical form: absolute angular frequencies in rad/s.
pub fn params_to_json(p: &SystemParams) -> Value {
    json!({
        "unit_convention": "rad_per_s",
        "omega_a": p.omega_a,
        "omega_m": p.omega_m,
        "omega_b": p.omega_b,
        "omega_d": p.omega_d,
        "kappa_a": p.kappa_a,
        "kappa_m": p.kappa_m,
        "kappa_b": p.kappa_b,
        "g_ma": p.g_ma,
        "g_mb": p.g_mb,
        "kerr_k": p.kerr_k,
        "drive_power": p.drive_power,
        "temperature": p.temperature,
    })
}

pub fn load_params(path: &Path) -> Result<SystemParams> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    params_from_json(&value)
}

pub fn save_params(path: &Path, p: &SystemParams) -> Result<()> {
    write_json(path, &params_to_json(p))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `<path without extension>.json`, next to a CSV output.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `{"kind": .., "config": ..}` beside `csv`.
pub fn write_sidecar(csv: &Path, kind: &str, config: &Value) -> Result<()> {
    write_json(&sidecar_path(csv), &json!({ "kind": kind, "data": csv.file_name().and_then(|n| n.to_str()), "config": config }))
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

const COV_NAMES: [&str; 6] = ["xa", "ya", "xm", "ym", "xb", "yb"];

/// Columns: t, t/τ, Re/Im of each amplitude, |⟨m⟩|², then the 21
/// upper-triangle covariance entries and E_am when available.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, e_am: Option<&[f64]>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["t", "t_over_tau", "re_a", "im_a", "re_m", "im_m", "re_b", "im_b", "abs_m_sq"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if traj.covariances.is_some() {
        for i in 0..6 {
            for j in i..6 {
                header.push(format!("v_{}_{}", COV_NAMES[i], COV_NAMES[j]));
            }
        }
    }
    if e_am.is_some() {
        header.push("e_am".into());
    }
    w.write_record(&header).map_err(csv_error)?;
    let mut packed = [0.0; 21];
    for (k, (t, s)) in traj.t.iter().zip(&traj.states).enumerate() {
        let mut row: Vec<String> = vec![fmt(*t), fmt(t / traj.tau)];
        row.extend(s.to_real().iter().map(|x| fmt(*x)));
        row.push(fmt(s.intensity()));
        if let Some(c) = &traj.covariances {
            pack_upper(&c[k].0, &mut packed);
            row.extend(packed.iter().map(|x| fmt(*x)));
        }
        if let Some(e) = e_am {
            row.push(fmt(e[k]));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per grid point, up to three roots.
pub fn write_sweep_csv(path: &Path, res: &SweepResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["i".to_string(), "j".to_string()];
    header.extend(res.spec.axes.iter().map(|a| a.param.name().to_string()));
    header.extend(
        [
            "region", "n_roots", "i_0", "i_1", "i_2", "stable_0", "stable_1", "stable_2", "e_am", "e_am_source",
            "periodic", "period", "amplitude", "lyapunov", "error",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    w.write_record(&header).map_err(csv_error)?;
    for p in &res.points {
        let mut row = vec![p.i.to_string(), p.j.to_string()];
        row.extend(p.coords.iter().map(|c| fmt(*c)));
        row.push(p.region.map_or(String::new(), |r| r.label().to_string()));
        row.push(p.intensities.len().to_string());
        for k in 0..3 {
            row.push(p.intensities.get(k).map_or(String::new(), |x| fmt(*x)));
        }
        for k in 0..3 {
            row.push(p.stable.get(k).map_or(String::new(), |s| s.to_string()));
        }
        row.push(p.e_am.map_or(String::new(), fmt));
        row.push(p.e_am_source.map_or(String::new(), |s| s.label().to_string()));
        match &p.long_run {
            Some(l) => row.extend([l.periodic.to_string(), fmt(l.period), fmt(l.amplitude), fmt(l.lyapunov)]),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        row.push(p.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (power, branch).
pub fn write_branch_csv(path: &Path, rows: &[BranchRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["drive_power", "region", "branch", "intensity", "stable"]).map_err(csv_error)?;
    for r in rows {
        for (k, (i, s)) in r.branches.iter().enumerate() {
            w.write_record([
                fmt(r.power),
                r.region.map_or(String::new(), |x| x.label().to_string()),
                k.to_string(),
                fmt(*i),
                s.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Grid as `x, y, w` rows plus a JSON header with the grid spec and γ.
pub fn write_wigner(path: &Path, field: &WignerField, config: &Value) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "w"]).map_err(csv_error)?;
    for j in 0..field.grid.ny {
        for i in 0..field.grid.nx {
            w.write_record([fmt(field.grid.x(i)), fmt(field.grid.y(j)), fmt(field.at(i, j))])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    write_json(
        &sidecar_path(path),
        &json!({ "kind": "wigner", "data": path.file_name().and_then(|n| n.to_str()), "grid": field.grid, "gamma": field.gamma, "config": config }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_hz() -> Value {
        json!({
            "unit_convention": "hz_over_2pi",
            "omega_a": 10e9, "omega_b": 10e6, "delta_a": -9e6, "delta_m": -8e6,
            "kappa_a": 1e6, "kappa_m": 1e6, "kappa_b": 100.0,
            "g_ma": 3.2e6, "g_mb": 1e-3, "kerr_k": 6.5e-9,
            "drive_power": 0.05, "temperature": 0.01
        })
    }

    #[test]
    fn hz_file_matches_reference() {
        let p = params_from_json(&reference_hz()).unwrap();
        let r = SystemParams::reference();
        for (a, b) in [(p.omega_a, r.omega_a), (p.omega_d, r.omega_d), (p.omega_m, r.omega_m), (p.kerr_k, r.kerr_k)] {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params_from_json(&reference_hz()).unwrap();
        let text = serde_json::to_string(&params_to_json(&p)).unwrap();
        let back = params_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn missing_key_named() {
        let mut v = reference_hz();
        v.as_object_mut().unwrap().remove("omega_b");
        match params_from_json(&v) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "omega_b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_conflicting_keys() {
        let mut v = reference_hz();
        v["omega_x"] = json!(1.0);
        assert!(matches!(params_from_json(&v), Err(Error::Config { key, .. }) if key == "omega_x"));
        let mut v = reference_hz();
        v["omega_m"] = json!(1.0);
        assert!(matches!(params_from_json(&v), Err(Error::Config { .. })));
        let mut v = reference_hz();
        v["unit_convention"] = json!("ghz");
        assert!(matches!(params_from_json(&v), Err(Error::Config { key, .. }) if key == "unit_convention"));
        let mut v = reference_hz();
        v["drive_power"] = json!("fifty");
        assert!(matches!(params_from_json(&v), Err(Error::Config { key, .. }) if key == "drive_power"));
    }
}
