use kerrmag::dynamics::{integrate_covariance, time_grid};
use kerrmag::gaussian::{diffusion_matrix, steady_covariance, CovarianceMatrix};
use kerrmag::stability::{classify_derived, drift_matrix};
use kerrmag::{derive, SystemParams};

/// With phonon damping raised far above the reference value, every mode
/// relaxes well inside 500τ and the integrated covariance must land on the
/// Lyapunov solution.
#[test]
fn integration_reaches_lyapunov_solution_when_relaxation_is_fast() {
    let mut p = SystemParams::reference().with_power(0.05);
    p.kappa_b = std::f64::consts::TAU * 2e5;
    let dp = derive(&p).unwrap();
    let pp = classify_derived(&dp).unwrap();
    let mut checked = 0;
    for fp in pp.roots.iter().filter(|r| r.stable) {
        let a = drift_matrix(&dp, &fp.mean_state);
        let v_inf = steady_covariance(&a, &diffusion_matrix(&dp)).unwrap().0;
        let ts = time_grid(p.tau(), 500.0, 1);
        let traj = integrate_covariance(&dp, &fp.mean_state, &CovarianceMatrix::initial(&dp), &ts, 1e-11).unwrap();
        let v_end = traj.covariances.unwrap().last().unwrap().0;
        let rel = (v_end - v_inf).norm() / v_inf.norm();
        assert!(rel <= 1e-6, "relative error {rel:e}");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn integrated_covariance_stays_physical() {
    let dp = derive(&SystemParams::reference().with_power(0.05)).unwrap();
    let pp = classify_derived(&dp).unwrap();
    let ts = time_grid(dp.params.tau(), 100.0, 2);
    let traj = integrate_covariance(&dp, &pp.roots[2].mean_state, &CovarianceMatrix::initial(&dp), &ts, 1e-10).unwrap();
    for v in traj.covariances.unwrap() {
        assert!(v.is_symmetric(0.0));
        assert!(v.is_physical());
    }
}
