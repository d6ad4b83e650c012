//! Nonlinear solvers for one implicit step and the time-marching loop.

use crate::adapt::update_multipliers;
use crate::grid::{project_initial, Field};
use crate::linalg::BlockTridiag;
use crate::physics::FinalTime;
use crate::scheme::{Discretization, SchemeKind, SlabState, ViscosityConfig, ViscosityMode};
use crate::{Error, Result};

/// Nonlinear solution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Bound-preserving fixed-point iteration.
    Picard,
    Newton,
    #[default]
    NewtonWithPicardFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_newton_iters: usize,
    pub max_picard_iters: usize,
    pub cfl: f64,
    /// Stop a steady march once `||u^{n+1} - u^n||_inf` drops below this.
    pub steady_tol: f64,
    pub max_steady_steps: usize,
    pub viscosity: ViscosityMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            tol_abs: 1e-11,
            tol_rel: 1e-10,
            max_newton_iters: 200,
            max_picard_iters: 50_000,
            cfl: 1.0,
            steady_tol: 1e-10,
            max_steady_steps: 1000,
            viscosity: ViscosityMode::Full,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0 && self.steady_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(Error::InvalidConfig(format!("cfl must be positive, got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Result of one nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Residual norm before each iteration and after the last one.
    pub history: Vec<f64>,
    /// Range of all intermediate iterates (Picard only).
    pub iterate_range: Option<(f64, f64)>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn range_of(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Relative diagonal shifts tried in turn when the plain Newton direction
/// fails the line search.
const SHIFTS: [f64; 4] = [0.0, 1e-2, 1e-1, 1.0];

/// Backtracking search along `delta`: first halving of the step that lowers
/// `||F||_inf` by a sufficient amount.
fn line_search(residual: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], delta: &[f64], norm: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let mut lambda = 1.0;
    for _ in 0..12 {
        let trial: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + lambda * d).collect();
        let ft = residual(&trial);
        let nt = inf_norm(&ft);
        if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
            return Some((trial, ft, nt));
        }
        lambda *= 0.5;
    }
    None
}

/// Newton iteration with a backtracking line search on `||F||_inf`. A
/// direction that fails the search is recomputed with a diagonally shifted
/// Jacobian.
///
/// Converged once `||F||_inf <= tol_abs + tol_rel ||F(guess)||_inf`.
pub fn newton_solve(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> BlockTridiag,
    guess: Vec<f64>,
    cfg: &SolverConfig,
) -> SolveOutcome {
    let mut x = guess;
    let mut f = residual(&x);
    let mut norm = inf_norm(&f);
    let target = cfg.tol_abs + cfg.tol_rel * norm;
    let mut history = vec![norm];
    let mut iterations = 0;
    let finish = |x, iterations, norm: f64, history, converged| SolveOutcome {
        x,
        iterations,
        residual: norm,
        converged,
        history,
        iterate_range: None,
    };
    while iterations < cfg.max_newton_iters {
        if norm <= target {
            return finish(x, iterations, norm, history, true);
        }
        if !norm.is_finite() {
            break;
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let jac = jacobian(&x);
        let scale = jac.max_abs_diagonal();
        iterations += 1;
        let mut accepted = None;
        for shift in SHIFTS {
            let mut shifted = jac.clone();
            if shift > 0.0 {
                shifted.shift_diagonal(shift * scale);
            }
            if let Some(delta) = shifted.solve(&neg) {
                accepted = line_search(&residual, &x, &delta, norm);
                if accepted.is_some() {
                    break;
                }
            }
        }
        let Some((xn, fnew, nn)) = accepted else {
            break;
        };
        x = xn;
        f = fnew;
        norm = nn;
        history.push(norm);
    }
    let converged = norm <= target;
    finish(x, iterations, norm, history, converged)
}

/// Weight and target of one convex-combination coupling inside a cell.
struct Coupling {
    gamma: f64,
    target: f64,
}

impl Discretization {
    /// Convex-combination terms of node `i` of one cell for the space
    /// operator; the weights carry the factor `dt / (w_i J)`.
    #[allow(clippy::too_many_arguments)]
    fn picard_space_terms(&self, cell: &[f64], left: f64, right: f64, d: f64, dt: f64, i: usize, out: &mut Vec<Coupling>) {
        let np = cell.len();
        let p = np - 1;
        let w = self.basis.weights();
        let dm = self.basis.deriv();
        let jac = self.grid.jacobian();
        let ui = cell[i];
        for k in 0..np {
            if k == i {
                continue;
            }
            let dik = dm[(i, k)];
            if dik == 0.0 {
                out.push(Coupling { gamma: dt * d * w[k] / (2.0 * jac), target: cell[k] });
                continue;
            }
            let beta = self.ec.beta_coeff(ui, cell[k]);
            let alpha = d * w[k] / (8.0 * dik.abs() * beta);
            let z = self.ec.fan_average_u_unchecked(ui, cell[k], dik.signum(), alpha);
            out.push(Coupling { gamma: dt * d * w[k] / (2.0 * beta * jac), target: z });
        }
        let l = self.lipschitz;
        let flux = &self.problem.flux;
        let ge = 2.0 * dt * l / (w[i] * jac);
        if i == p {
            let h = self.iface.value(ui, right, 1.0);
            out.push(Coupling { gamma: ge, target: ui - (h - flux.eval(ui)) / (2.0 * l) });
        }
        if i == 0 {
            let h = self.iface.value(ui, left, -1.0);
            out.push(Coupling { gamma: ge, target: ui - (h + flux.eval(ui)) / (2.0 * l) });
        }
    }
}

fn require_full(cfg: &ViscosityConfig) -> Result<()> {
    if cfg.mode != ViscosityMode::Full {
        return Err(Error::InvalidConfig("Picard iteration needs full viscosity".into()));
    }
    Ok(())
}

/// One Picard subiteration of the backward Euler scheme.
pub fn picard_step_be(disc: &Discretization, uold: &Field, guess: &Field, dt: f64, cfg: &ViscosityConfig) -> Result<Field> {
    require_full(cfg)?;
    let np = disc.n_nodes();
    let mut out = guess.clone();
    let mut terms = Vec::with_capacity(np + 1);
    for c in 0..guess.n_cells() {
        let (l, r) = disc.traces(guess, c);
        let d = cfg.space_coeff(c);
        for i in 0..np {
            terms.clear();
            disc.picard_space_terms(guess.cell(c), l, r, d, dt, i, &mut terms);
            let mut num = uold.get(c, i);
            let mut den = 1.0;
            for t in &terms {
                num += t.gamma * t.target;
                den += t.gamma;
            }
            out.set(c, i, num / den);
        }
    }
    Ok(out)
}

/// One Picard subiteration of the space-time scheme; returns the new levels.
pub fn picard_step_st(disc: &Discretization, slab: &SlabState, cfg: &ViscosityConfig) -> Result<Vec<Field>> {
    require_full(cfg)?;
    let tb = disc
        .time_basis
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("space-time step without a time basis".into()))?;
    let qt = tb.qmat();
    let wt = tb.weights();
    let nq = tb.len();
    let np = disc.n_nodes();
    let mut out = slab.levels.clone();
    let mut terms = Vec::with_capacity(np + 1);
    for c in 0..slab.prev.n_cells() {
        let d = cfg.space_coeff(c);
        let dn = cfg.time_coeff(c);
        for r in 0..nq {
            let level = &slab.levels[r];
            let (l, rt) = disc.traces(level, c);
            let s = 0.5 * wt[r];
            for i in 0..np {
                let ur = level.get(c, i);
                let (mut num, mut den) = if r == 0 { (slab.prev.get(c, i), 1.0) } else { (0.0, 0.0) };
                for m in 0..nq {
                    if m == r {
                        continue;
                    }
                    let um = slab.levels[m].get(c, i);
                    let beta = disc.ec.beta_coeff(ur, um);
                    let g = dn * wt[r] * wt[m] - 4.0 * qt[(r, m)] * beta;
                    num += g * um;
                    den += g;
                }
                terms.clear();
                disc.picard_space_terms(level.cell(c), l, rt, d, slab.dt, i, &mut terms);
                for t in &terms {
                    num += s * t.gamma * t.target;
                    den += s * t.gamma;
                }
                out[r].set(c, i, num / den);
            }
        }
    }
    Ok(out)
}

/// Picard iteration until the residual meets the Newton tolerance.
///
/// Fails when the residual has not reached a new minimum for 50 iterations.
/// Picard iterations allowed without a new smallest residual.
const PICARD_STALL: usize = 1000;

fn picard_loop(
    mut x: Vec<f64>,
    step: impl Fn(&[f64]) -> Result<Vec<f64>>,
    residual: impl Fn(&[f64]) -> Vec<f64>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let mut norm = inf_norm(&residual(&x));
    let target = cfg.tol_abs + cfg.tol_rel * norm;
    let mut history = vec![norm];
    let mut range = range_of(&x);
    let mut best = norm;
    let mut since_best = 0;
    let mut iterations = 0;
    while norm > target && iterations < cfg.max_picard_iters {
        x = step(&x)?;
        iterations += 1;
        let (lo, hi) = range_of(&x);
        range = (range.0.min(lo), range.1.max(hi));
        norm = inf_norm(&residual(&x));
        history.push(norm);
        if norm < best {
            best = norm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= PICARD_STALL {
                break;
            }
        }
    }
    Ok(SolveOutcome {
        x,
        iterations,
        residual: norm,
        converged: norm <= target,
        history,
        iterate_range: Some(range),
    })
}

/// Picard solve of one backward Euler step from `guess`.
pub fn picard_solve_be(
    disc: &Discretization,
    uold: &Field,
    guess: &Field,
    dt: f64,
    visc: &ViscosityConfig,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let (nc, np) = (uold.n_cells(), uold.n_nodes());
    let field = |x: &[f64]| Field::from_vec(nc, np, x.to_vec());
    picard_loop(
        guess.as_slice().to_vec(),
        |x| Ok(picard_step_be(disc, uold, &field(x), dt, visc)?.into_vec()),
        |x| disc.be_residual(&field(x), uold, dt, visc),
        cfg,
    )
}

/// Picard solve of one space-time slab starting from `guess`.
pub fn picard_solve_st(disc: &Discretization, guess: &SlabState, visc: &ViscosityConfig, cfg: &SolverConfig) -> Result<SolveOutcome> {
    let with = |x: &[f64]| {
        let mut s = guess.clone();
        s.set_unknowns(x);
        s
    };
    picard_loop(
        guess.unknowns(),
        |x| {
            let mut s = with(x);
            s.levels = picard_step_st(disc, &s, visc)?;
            Ok(s.unknowns())
        },
        |x| disc.st_residual(&with(x), visc),
        cfg,
    )
}

/// Newton solve of one backward Euler step.
pub fn newton_solve_be(disc: &Discretization, uold: &Field, guess: &Field, dt: f64, visc: &ViscosityConfig, cfg: &SolverConfig) -> SolveOutcome {
    let (nc, np) = (uold.n_cells(), uold.n_nodes());
    let field = |x: &[f64]| Field::from_vec(nc, np, x.to_vec());
    newton_solve(
        |x| disc.be_residual(&field(x), uold, dt, visc),
        |x| disc.be_jacobian(&field(x), dt, visc),
        guess.as_slice().to_vec(),
        cfg,
    )
}

/// Newton solve of one space-time slab.
pub fn newton_solve_st(disc: &Discretization, guess: &SlabState, visc: &ViscosityConfig, cfg: &SolverConfig) -> SolveOutcome {
    let with = |x: &[f64]| {
        let mut s = guess.clone();
        s.set_unknowns(x);
        s
    };
    newton_solve(
        |x| disc.st_residual(&with(x), visc),
        |x| disc.st_jacobian(&with(x), visc),
        guess.unknowns(),
        cfg,
    )
}

/// Record of one accepted time step or slab.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t_start: f64,
    pub dt: f64,
    /// The new solution (backward Euler) or all slab levels (space-time).
    pub levels: Vec<Field>,
    /// Viscosity multipliers used during the step.
    pub multipliers: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
    /// True when Newton failed and Picard produced the step.
    pub used_fallback: bool,
}

impl StepRecord {
    pub fn end_state(&self) -> &Field {
        self.levels.last().expect("step without levels")
    }
}

/// Complete history of a run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub initial: Field,
    pub viscosity: ViscosityConfig,
    pub steps: Vec<StepRecord>,
    /// `Some(converged)` for steady problems.
    pub steady_converged: Option<bool>,
    /// Range of every Picard subiterate, when Picard ran.
    pub picard_range: Option<(f64, f64)>,
}

impl RunReport {
    pub fn final_field(&self) -> &Field {
        self.steps.last().map_or(&self.initial, |s| s.end_state())
    }

    pub fn final_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t_start + s.dt)
    }

    /// Viscosity in effect during step `k`.
    pub fn step_viscosity(&self, k: usize) -> ViscosityConfig {
        let mut v = self.viscosity.clone();
        if let Some(m) = &self.steps[k].multipliers {
            v.multipliers = m.clone();
        }
        v
    }
}

/// Time step from the CFL rule `dt max|f'| / dx = cfl`.
pub fn cfl_time_step(disc: &Discretization, cfl: f64) -> f64 {
    let (m, big_m) = disc.problem.bounds;
    let speed = disc.problem.max_wave_speed(m, big_m);
    let dx = disc.grid.cell_width();
    if speed > 0.0 {
        cfl * dx / speed
    } else {
        cfl * dx
    }
}

/// Marches the problem to its final time or steady state.
pub fn advance(disc: &Discretization, kind: SchemeKind, cfg: &SolverConfig) -> Result<RunReport> {
    advance_to(disc, kind, cfg, disc.problem.final_time)
}

/// Marches to `final_time` instead of the problem's own final time.
pub fn advance_to(disc: &Discretization, kind: SchemeKind, cfg: &SolverConfig, final_time: FinalTime) -> Result<RunReport> {
    cfg.validate()?;
    if kind == SchemeKind::SpaceTime && disc.time_basis.is_none() {
        return Err(Error::InvalidConfig("the space-time scheme needs q >= 1".into()));
    }
    let base = disc.viscosity(cfg.viscosity);
    let initial = project_initial(&disc.grid, &disc.basis, &disc.problem);
    let mut report = RunReport {
        scheme: kind,
        initial: initial.clone(),
        viscosity: base.clone(),
        steps: Vec::new(),
        steady_converged: None,
        picard_range: None,
    };
    let dt0 = cfl_time_step(disc, cfg.cfl);
    let (n_steps, steady) = match final_time {
        FinalTime::Time(t) if t <= 0.0 => (0, false),
        FinalTime::Time(t) => (((t / dt0) - 1e-9).ceil().max(1.0) as usize, false),
        FinalTime::Steady => (cfg.max_steady_steps, true),
    };
    let mut u = initial;
    let mut t = 0.0;
    for step in 0..n_steps {
        let dt = match final_time {
            FinalTime::Time(tf) if step + 1 == n_steps => tf - t,
            _ => dt0,
        };
        let mut visc = base.clone();
        let multipliers = (cfg.viscosity == ViscosityMode::Adaptive).then(|| {
            let m = update_multipliers(&u, &disc.basis).multipliers;
            visc.multipliers = m.clone();
            m
        });
        let (levels, outcome, used_fallback) = match kind {
            SchemeKind::BackwardEuler => solve_be_step(disc, &u, dt, &visc, cfg, step)?,
            SchemeKind::SpaceTime => solve_st_step(disc, &u, dt, &visc, cfg, step)?,
        };
        if let Some((lo, hi)) = outcome.iterate_range {
            let r = report.picard_range.get_or_insert((lo, hi));
            *r = (r.0.min(lo), r.1.max(hi));
        }
        let new = levels.last().expect("levels").clone();
        let change = new.max_abs_diff(&u);
        report.steps.push(StepRecord {
            t_start: t,
            dt,
            levels,
            multipliers,
            iterations: outcome.iterations,
            residual: outcome.residual,
            used_fallback,
        });
        t = match final_time {
            FinalTime::Time(tf) if step + 1 == n_steps => tf,
            _ => t + dt,
        };
        u = new;
        if steady && change < cfg.steady_tol {
            report.steady_converged = Some(true);
            return Ok(report);
        }
    }
    if steady {
        report.steady_converged = Some(false);
    }
    Ok(report)
}

type StepResult = Result<(Vec<Field>, SolveOutcome, bool)>;

fn failure(step: usize, outcome: &SolveOutcome, reason: &str) -> Error {
    Error::SolverFailure { step, residual: outcome.residual, reason: reason.into() }
}

fn solve_be_step(disc: &Discretization, u: &Field, dt: f64, visc: &ViscosityConfig, cfg: &SolverConfig, step: usize) -> StepResult {
    let (nc, np) = (u.n_cells(), u.n_nodes());
    let picard = || -> Result<SolveOutcome> {
        let out = picard_solve_be(disc, u, u, dt, visc, cfg)?;
        if !out.converged {
            return Err(failure(step, &out, "Picard iteration did not converge"));
        }
        Ok(out)
    };
    let (out, fallback) = match cfg.method {
        Method::Picard => (picard()?, false),
        Method::Newton | Method::NewtonWithPicardFallback => {
            let out = newton_solve_be(disc, u, u, dt, visc, cfg);
            if out.converged {
                (out, false)
            } else if cfg.method == Method::NewtonWithPicardFallback && visc.mode == ViscosityMode::Full {
                (picard()?, true)
            } else {
                return Err(failure(step, &out, "Newton iteration did not converge"));
            }
        }
    };
    let field = Field::from_vec(nc, np, out.x.clone());
    Ok((vec![field], out, fallback))
}

fn solve_st_step(disc: &Discretization, u: &Field, dt: f64, visc: &ViscosityConfig, cfg: &SolverConfig, step: usize) -> StepResult {
    let guess = SlabState::constant_extension(u, disc.n_levels(), dt);
    let picard = || -> Result<SolveOutcome> {
        let out = picard_solve_st(disc, &guess, visc, cfg)?;
        if !out.converged {
            return Err(failure(step, &out, "Picard iteration did not converge"));
        }
        Ok(out)
    };
    let (out, fallback) = match cfg.method {
        Method::Picard => (picard()?, false),
        Method::Newton | Method::NewtonWithPicardFallback => {
            let mut out = newton_solve_st(disc, &disc.st_predictor(u, dt, visc), visc, cfg);
            if !out.converged {
                out = newton_solve_st(disc, &guess, visc, cfg);
            }
            if out.converged {
                (out, false)
            } else if cfg.method == Method::NewtonWithPicardFallback && visc.mode == ViscosityMode::Full {
                (picard()?, true)
            } else {
                return Err(failure(step, &out, "Newton iteration did not converge"));
            }
        }
    };
    let mut slab = guess.clone();
    slab.set_unknowns(&out.x);
    Ok((slab.levels, out, fallback))
}
