use idgsem::grid::project_initial;
use idgsem::physics::FinalTime;
use idgsem::scheme::SlabState;
use idgsem::solver::{
    advance_to, cfl_time_step, newton_solve_be, newton_solve_st, picard_solve_be, picard_solve_st,
};
use idgsem::{
    make_problem, Discretization, EcEntropy, Error, Field, Grid1D, InterfaceKind, Method, SchemeKind, SolverConfig,
    ViscosityConfig, ViscosityMode,
};

fn disc(id: u8, n: usize, q: Option<usize>, iface: InterfaceKind) -> Discretization {
    let problem = make_problem(id).unwrap();
    let grid = Grid1D::unit(n, &problem).unwrap();
    Discretization::new(&problem, grid, 3, q, iface, EcEntropy::Square).unwrap()
}

/// Deterministic perturbation that keeps values inside the problem bounds.
fn perturbed(d: &Discretization) -> Field {
    let mut u = project_initial(&d.grid, &d.basis, &d.problem);
    let (m, big_m) = d.problem.bounds;
    let span = big_m - m;
    for (k, v) in u.as_mut_slice().iter_mut().enumerate() {
        *v = (*v + 0.05 * span * (0.7 * k as f64).sin()).clamp(m + 0.01 * span, big_m - 0.01 * span);
    }
    u
}

fn fd_error(x: &[f64], residual: impl Fn(&[f64]) -> Vec<f64>, jac: &nalgebra::DMatrix<f64>) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for col in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[col] += h;
        xm[col] -= h;
        let (fp, fm) = (residual(&xp), residual(&xm));
        for row in 0..x.len() {
            let fd = (fp[row] - fm[row]) / (2.0 * h);
            worst = worst.max((fd - jac[(row, col)]).abs() / (1.0 + fd.abs()));
        }
    }
    worst
}

#[test]
fn backward_euler_jacobian_matches_finite_differences() {
    for (id, iface) in [(2, InterfaceKind::Godunov), (4, InterfaceKind::Godunov), (5, InterfaceKind::Rusanov)] {
        let d = disc(id, 5, None, iface);
        let u = perturbed(&d);
        let old = project_initial(&d.grid, &d.basis, &d.problem);
        for visc in [ViscosityConfig::none(), d.full_viscosity()] {
            let (nc, np) = (u.n_cells(), u.n_nodes());
            let jac = d.be_jacobian(&u, 0.01, &visc).to_dense();
            let err = fd_error(u.as_slice(), |x| d.be_residual(&Field::from_vec(nc, np, x.to_vec()), &old, 0.01, &visc), &jac);
            assert!(err < 1e-6, "problem {id}: {err}");
        }
    }
}

#[test]
fn space_time_jacobian_matches_finite_differences() {
    for id in [1, 5] {
        let d = disc(id, 4, Some(2), InterfaceKind::Godunov);
        let u = perturbed(&d);
        let mut slab = SlabState::constant_extension(&project_initial(&d.grid, &d.basis, &d.problem), 3, 0.02);
        for level in &mut slab.levels {
            *level = u.clone();
        }
        for visc in [ViscosityConfig::none(), d.full_viscosity()] {
            let jac = d.st_jacobian(&slab, &visc).to_dense();
            let err = fd_error(
                &slab.unknowns(),
                |x| {
                    let mut s = slab.clone();
                    s.set_unknowns(x);
                    d.st_residual(&s, &visc)
                },
                &jac,
            );
            assert!(err < 1e-6, "problem {id}: {err}");
        }
    }
}

#[test]
fn newton_and_picard_reach_the_same_root() {
    let cfg = SolverConfig::default();
    for id in [1, 4] {
        let d = disc(id, 10, Some(3), InterfaceKind::Godunov);
        let visc = d.full_viscosity();
        let u = project_initial(&d.grid, &d.basis, &d.problem);
        let dt = cfl_time_step(&d, 1.0);
        let guess = SlabState::constant_extension(&u, 4, dt);
        let picard = picard_solve_st(&d, &guess, &visc, &cfg).unwrap();
        let newton = newton_solve_st(&d, &d.st_predictor(&u, dt, &visc), &visc, &cfg);
        assert!(picard.converged && newton.converged);
        let diff = picard.x.iter().zip(&newton.x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8, "problem {id}: {diff}");
        let (lo, hi) = picard.iterate_range.unwrap();
        let (m, big_m) = d.problem.bounds;
        assert!(lo >= m - 1e-12 && hi <= big_m + 1e-12);
    }
    let d = disc(2, 10, None, InterfaceKind::Godunov);
    let visc = d.full_viscosity();
    let u = project_initial(&d.grid, &d.basis, &d.problem);
    let picard = picard_solve_be(&d, &u, &u, 0.05, &visc, &cfg).unwrap();
    let newton = newton_solve_be(&d, &u, &u, 0.05, &visc, &cfg);
    assert!(picard.converged && newton.converged);
    let diff = picard.x.iter().zip(&newton.x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn picard_needs_the_full_viscosity() {
    let d = disc(1, 6, Some(2), InterfaceKind::Godunov);
    let cfg = SolverConfig { method: Method::Picard, viscosity: ViscosityMode::None, ..SolverConfig::default() };
    let err = advance_to(&d, SchemeKind::SpaceTime, &cfg, FinalTime::Time(0.01)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}

#[test]
fn picard_only_runs_stay_in_bounds() {
    let d = disc(5, 10, Some(2), InterfaceKind::Godunov);
    let cfg = SolverConfig { method: Method::Picard, ..SolverConfig::default() };
    let report = advance_to(&d, SchemeKind::SpaceTime, &cfg, FinalTime::Time(0.1)).unwrap();
    let (lo, hi) = report.picard_range.unwrap();
    assert!(lo >= -3.0 - 1e-12 && hi <= 3.0 + 1e-12, "{lo} {hi}");
    assert!((report.final_time() - 0.1).abs() < 1e-14);
}

#[test]
fn invalid_solver_settings_are_rejected() {
    let d = disc(1, 6, Some(2), InterfaceKind::Godunov);
    let cfg = SolverConfig { cfl: -1.0, ..SolverConfig::default() };
    assert!(matches!(advance_to(&d, SchemeKind::SpaceTime, &cfg, FinalTime::Time(0.1)), Err(Error::InvalidConfig(_))));
    let be = disc(1, 6, None, InterfaceKind::Godunov);
    let cfg = SolverConfig::default();
    assert!(matches!(advance_to(&be, SchemeKind::SpaceTime, &cfg, FinalTime::Time(0.1)), Err(Error::InvalidConfig(_))));
}
