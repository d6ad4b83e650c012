//! Linear advection reduces every scheme to a linear system that can be
//! assembled directly from the nodal operators and solved densely.

use idgsem::physics::{FinalTime, InitialData};
use idgsem::solver::advance_to;
use idgsem::{
    BoundaryCondition, Discretization, EcEntropy, Flux, Grid1D, InterfaceKind, Problem, SchemeKind, SolverConfig,
    ViscosityMode,
};
use nalgebra::{DMatrix, DVector};

fn advection(speed: f64) -> Problem {
    Problem::new(
        "advection",
        Flux::Linear { speed },
        InitialData::Sine { offset: 0.3, amplitude: 1.0 },
        BoundaryCondition::Periodic,
        FinalTime::Time(1.0),
    )
}

/// Matrix `L` of the strong-form semi-discretization `du/dt = L u` with
/// upwind interface fluxes and optional graph viscosity `d`.
fn semi_discrete(disc: &Discretization, speed: f64, d: f64) -> DMatrix<f64> {
    let n = disc.grid.n_cells;
    let np = disc.basis.len();
    let p = np - 1;
    let w = disc.basis.weights();
    let dm = disc.basis.deriv();
    let jac = disc.grid.cell_width() / 2.0;
    let idx = |c: usize, i: usize| (c % n) * np + i;
    let mut l = DMatrix::zeros(n * np, n * np);
    for c in 0..n {
        let left = (c + n - 1) % n;
        let right = (c + 1) % n;
        for i in 0..np {
            let row = idx(c, i);
            for k in 0..np {
                l[(row, idx(c, k))] -= speed * dm[(i, k)] / jac;
                l[(row, idx(c, i))] -= d * 0.5 * w[k] / jac;
                l[(row, idx(c, k))] += d * 0.5 * w[k] / jac;
            }
            // f* - f(u) at the faces, upwinded
            if i == p && speed < 0.0 {
                l[(row, idx(right, 0))] -= speed / (w[p] * jac);
                l[(row, idx(c, p))] += speed / (w[p] * jac);
            }
            if i == 0 && speed > 0.0 {
                l[(row, idx(left, p))] += speed / (w[0] * jac);
                l[(row, idx(c, 0))] -= speed / (w[0] * jac);
            }
        }
    }
    l
}

fn one_step(disc: &Discretization, kind: SchemeKind, viscosity: ViscosityMode, dt: f64) -> idgsem::RunReport {
    let cfg = SolverConfig { viscosity, ..SolverConfig::default() };
    let report = advance_to(disc, kind, &cfg, FinalTime::Time(dt)).unwrap();
    assert_eq!(report.steps.len(), 1);
    report
}

fn max_diff(a: &[f64], b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn backward_euler_matches_dense_solve() {
    for speed in [1.0, -0.7] {
        for viscosity in [ViscosityMode::None, ViscosityMode::Full] {
            let problem = advection(speed);
            let grid = Grid1D::unit(4, &problem).unwrap();
            let disc =
                Discretization::new(&problem, grid, 2, None, InterfaceKind::Godunov, EcEntropy::Square).unwrap();
            let dt = disc.grid.cell_width() / speed.abs();
            let report = one_step(&disc, SchemeKind::BackwardEuler, viscosity, dt);
            let d = disc.viscosity(viscosity).d_space;
            let l = semi_discrete(&disc, speed, d);
            let n = l.nrows();
            let a = DMatrix::identity(n, n) - l * dt;
            let u0 = DVector::from_column_slice(report.initial.as_slice());
            let oracle = a.lu().solve(&u0).unwrap();
            let err = max_diff(report.final_field().as_slice(), &oracle);
            assert!(err < 1e-12, "speed {speed} {viscosity:?}: {err}");
        }
    }
}

#[test]
fn space_time_q1_matches_lobatto_iiic() {
    // two-stage Lobatto IIIC tableau
    let a = [[0.5, -0.5], [0.5, 0.5]];
    for speed in [1.0, -0.7] {
        let problem = advection(speed);
        let grid = Grid1D::unit(4, &problem).unwrap();
        let disc = Discretization::new(&problem, grid, 2, Some(1), InterfaceKind::Godunov, EcEntropy::Square).unwrap();
        let dt = disc.grid.cell_width() / speed.abs();
        let report = one_step(&disc, SchemeKind::SpaceTime, ViscosityMode::None, dt);
        let l = semi_discrete(&disc, speed, 0.0);
        let n = l.nrows();
        let mut sys = DMatrix::identity(2 * n, 2 * n);
        for r in 0..2 {
            for m in 0..2 {
                let mut block = sys.view_mut((r * n, m * n), (n, n));
                block -= &l * (dt * a[r][m]);
            }
        }
        let u0 = DVector::from_column_slice(report.initial.as_slice());
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(&u0);
        rhs.rows_mut(n, n).copy_from(&u0);
        let stages = sys.lu().solve(&rhs).unwrap();
        let levels = &report.steps[0].levels;
        for r in 0..2 {
            let err = max_diff(levels[r].as_slice(), &stages.rows(r * n, n).into_owned());
            assert!(err < 1e-12, "speed {speed} level {r}: {err}");
        }
    }
}
