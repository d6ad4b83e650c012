//! Checks of the discrete maximum principle, entropy inequalities and
//! conservation on recorded runs, plus error norms.

use crate::basis::gl32;
use crate::grid::{cell_average, mass, Field};
use crate::physics::EntropyPair;
use crate::scheme::{Discretization, SchemeKind};
use crate::solver::RunReport;
use crate::twopoint::{InterfaceFlux, InterfaceKind};

/// Outcome of a bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MppCheck {
    pub pass: bool,
    /// Largest excursion outside `[m, M]`, zero if none.
    pub worst: f64,
    /// `(step, level, cell, node)` of the worst excursion; step 0 is the
    /// initial field and step `k + 1` is step `k` of the report.
    pub location: Option<(usize, usize, usize, usize)>,
    pub u_min: f64,
    pub u_max: f64,
}

/// Bound check over every node of every recorded level.
pub fn check_mpp(report: &RunReport, m: f64, big_m: f64, tol: f64) -> MppCheck {
    let mut out = MppCheck { pass: true, worst: 0.0, location: None, u_min: f64::INFINITY, u_max: f64::NEG_INFINITY };
    let initial = std::slice::from_ref(&report.initial);
    let all = std::iter::once(initial).chain(report.steps.iter().map(|s| s.levels.as_slice()));
    for (step, levels) in all.enumerate() {
        for (level, field) in levels.iter().enumerate() {
            for c in 0..field.n_cells() {
                for (i, &u) in field.cell(c).iter().enumerate() {
                    out.u_min = out.u_min.min(u);
                    out.u_max = out.u_max.max(u);
                    let excess = (m - u).max(u - big_m);
                    if excess > out.worst {
                        out.worst = excess;
                        out.location = Some((step, level, c, i));
                    }
                }
            }
        }
    }
    out.pass = out.worst <= tol;
    out
}

/// Nodal average `<eta(u)>` of cell `c`.
fn entropy_average(disc: &Discretization, u: &Field, entropy: &EntropyPair, c: usize) -> f64 {
    let w = disc.basis.weights();
    0.5 * u.cell(c).iter().zip(w).map(|(&v, w)| w * entropy.eta(v)).sum::<f64>()
}

/// Net entropy flux `Q(U_p, right, 1) + Q(U_0, left, -1)` out of cell `c`.
fn entropy_outflow(disc: &Discretization, god: &InterfaceFlux, u: &Field, entropy: &EntropyPair, c: usize) -> f64 {
    let p = u.n_nodes() - 1;
    let (l, r) = disc.traces(u, c);
    god.godunov_entropy_flux(u.get(c, p), r, 1.0, entropy) + god.godunov_entropy_flux(u.get(c, 0), l, -1.0, entropy)
}

/// Per-cell entropy defects of step `k`:
/// `<eta>_new - <eta>_old + dt / |cell| * (net entropy outflow)`.
pub fn step_entropy_defects(disc: &Discretization, report: &RunReport, k: usize, entropy: &EntropyPair) -> Vec<f64> {
    let god = InterfaceFlux::new(InterfaceKind::Godunov, &disc.problem);
    let step = &report.steps[k];
    let old = if k == 0 { &report.initial } else { report.steps[k - 1].end_state() };
    let new = step.end_state();
    let dx = disc.grid.cell_width();
    (0..new.n_cells())
        .map(|c| {
            let outflow = match report.scheme {
                SchemeKind::BackwardEuler => entropy_outflow(disc, &god, new, entropy, c),
                SchemeKind::SpaceTime => {
                    let wt = disc.time_basis.as_ref().expect("time basis").weights();
                    step.levels
                        .iter()
                        .zip(wt)
                        .map(|(lv, w)| 0.5 * w * entropy_outflow(disc, &god, lv, entropy, c))
                        .sum()
                }
            };
            entropy_average(disc, new, entropy, c) - entropy_average(disc, old, entropy, c) + step.dt / dx * outflow
        })
        .collect()
}

/// Scale `max(1, ||eta(u)||_inf dt / dx)` of the entropy tolerance at step `k`.
pub fn entropy_scale(disc: &Discretization, report: &RunReport, k: usize, entropy: &EntropyPair) -> f64 {
    let step = &report.steps[k];
    let eta_max = step
        .levels
        .iter()
        .flat_map(|l| l.as_slice().iter())
        .fold(0.0_f64, |a, &u| a.max(entropy.eta(u).abs()));
    (eta_max * step.dt / disc.grid.cell_width()).max(1.0)
}

/// Outcome of the entropy check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyCheck {
    pub pass: bool,
    /// Largest raw defect over steps and cells.
    pub max_defect: f64,
    /// Largest defect divided by its step's scale.
    pub max_scaled: f64,
    pub location: Option<(usize, usize)>,
}

/// Cell entropy inequality over the whole run; passes iff every defect is
/// at most `tol` times its step's scale.
pub fn check_entropy_cells(disc: &Discretization, report: &RunReport, entropy: &EntropyPair, tol: f64) -> EntropyCheck {
    let mut out = EntropyCheck { pass: true, max_defect: f64::NEG_INFINITY, max_scaled: f64::NEG_INFINITY, location: None };
    if report.steps.is_empty() {
        out.max_defect = 0.0;
        out.max_scaled = 0.0;
        return out;
    }
    for k in 0..report.steps.len() {
        let scale = entropy_scale(disc, report, k, entropy);
        for (c, d) in step_entropy_defects(disc, report, k, entropy).into_iter().enumerate() {
            out.max_defect = out.max_defect.max(d);
            if d / scale > out.max_scaled {
                out.max_scaled = d / scale;
                out.location = Some((k, c));
            }
        }
    }
    out.pass = out.max_scaled <= tol;
    out
}

/// Time integral over step `k` of the net flux through the domain boundary.
pub fn boundary_flux_integral(disc: &Discretization, report: &RunReport, k: usize) -> f64 {
    let step = &report.steps[k];
    let net = |u: &Field| {
        let f = disc.face_fluxes(u);
        f[f.len() - 1] - f[0]
    };
    match report.scheme {
        SchemeKind::BackwardEuler => step.dt * net(step.end_state()),
        SchemeKind::SpaceTime => {
            let wt = disc.time_basis.as_ref().expect("time basis").weights();
            step.dt * step.levels.iter().zip(wt).map(|(lv, w)| 0.5 * w * net(lv)).sum::<f64>()
        }
    }
}

/// Largest `|mass(t_k) - mass(0) + int_0^{t_k} (boundary flux) dt|` over the run.
pub fn check_conservation(disc: &Discretization, report: &RunReport) -> f64 {
    let m0 = mass(&report.initial, &disc.basis, &disc.grid);
    let mut flux_int = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..report.steps.len() {
        flux_int += boundary_flux_integral(disc, report, k);
        let mk = mass(report.steps[k].end_state(), &disc.basis, &disc.grid);
        worst = worst.max((mk - m0 + flux_int).abs());
    }
    worst
}

/// `(L1, Linf)` distance to `reference`: L1 by 32-point Gauss-Legendre
/// quadrature of the interpolant in each cell, Linf over the nodes.
pub fn error_norms(disc: &Discretization, field: &Field, reference: impl Fn(f64) -> f64) -> (f64, f64) {
    let (x, w) = gl32();
    let basis = &disc.basis;
    let grid = &disc.grid;
    let dx = grid.cell_width();
    let mut l1 = 0.0;
    let mut linf: f64 = 0.0;
    for c in 0..field.n_cells() {
        let cell = field.cell(c);
        let left = grid.cell_left(c);
        for (xk, wk) in x.iter().zip(w) {
            let uh = basis.lagrange_eval(cell, 2.0 * xk - 1.0);
            l1 += wk * dx * (uh - reference(left + xk * dx)).abs();
        }
        for (i, &u) in cell.iter().enumerate() {
            linf = linf.max((u - reference(grid.node_x(basis, c, i))).abs());
        }
    }
    (l1, linf)
}

/// Summary of one step for diagnostics output.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub mass: f64,
    pub solver_iters: usize,
    /// Largest cell entropy defect per requested entropy.
    pub entropy_defects: Vec<f64>,
    pub boundary_flux_integral: f64,
}

/// Per-step diagnostics of a run.
pub fn step_diagnostics(disc: &Discretization, report: &RunReport, entropies: &[EntropyPair]) -> Vec<StepDiagnostics> {
    (0..report.steps.len())
        .map(|k| {
            let s = &report.steps[k];
            let lo = s.levels.iter().map(Field::min).fold(f64::INFINITY, f64::min);
            let hi = s.levels.iter().map(Field::max).fold(f64::NEG_INFINITY, f64::max);
            StepDiagnostics {
                step: k + 1,
                t: s.t_start + s.dt,
                dt: s.dt,
                u_min: lo,
                u_max: hi,
                mass: mass(s.end_state(), &disc.basis, &disc.grid),
                solver_iters: s.iterations,
                entropy_defects: entropies
                    .iter()
                    .map(|e| step_entropy_defects(disc, report, k, e).into_iter().fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
                boundary_flux_integral: boundary_flux_integral(disc, report, k),
            }
        })
        .collect()
}

/// Cell averages of a field.
pub fn cell_averages(disc: &Discretization, field: &Field) -> Vec<f64> {
    (0..field.n_cells()).map(|c| cell_average(field, &disc.basis, c)).collect()
}
