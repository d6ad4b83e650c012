//! Reference solutions: characteristics for Burgers, the steady standing
//! shock, self-similar Riemann fans and a first-order finite-volume oracle.

use crate::physics::{BoundaryCondition, FinalTime, Problem};
use crate::twopoint::{InterfaceFlux, InterfaceKind};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::path::Path;

/// Which construction a [`ReferenceSolution`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Characteristics,
    SteadyShock,
    RiemannSelfSim,
    FvOracle,
}

/// Exact or oracle solution `(x, t) -> u`.
pub struct ReferenceSolution {
    pub kind: ReferenceKind,
    evaluator: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSolution").field("kind", &self.kind).finish_non_exhaustive()
    }
}

impl ReferenceSolution {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.evaluator)(x, t)
    }
}

/// Foot of the Burgers characteristic through `(x, t)`: the root `xi` of
/// `xi + t u0(xi) = x` in `bracket`, by bisection. Returns `u0(xi)`.
pub fn burgers_characteristics(u0: impl Fn(f64) -> f64, x: f64, t: f64, bracket: (f64, f64)) -> Result<f64> {
    if t == 0.0 {
        return Ok(u0(x));
    }
    let g = |xi: f64| xi + t * u0(xi) - x;
    let (mut lo, mut hi) = bracket;
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(u0(lo));
    }
    if ghi == 0.0 {
        return Ok(u0(hi));
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::NotBracketed { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(u0(mid));
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(u0(0.5 * (lo + hi)))
}

/// Entropy solution of Burgers with `u0 = sin(2 pi x)` on the periodic unit
/// interval. After breaking, a standing shock sits at `x = 1/2`.
pub fn burgers_sine(x: f64, t: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    let u0 = |xi: f64| (2.0 * PI * xi).sin();
    if x == 0.0 || x == 0.5 {
        return 0.0;
    }
    if x > 0.5 {
        return -burgers_sine(1.0 - x, t);
    }
    // for x in (0, 1/2) the root in [0, 1/2] is unique at every t
    burgers_characteristics(u0, x, t, (0.0, 0.5)).expect("bracket [0, 1/2] always holds")
}

/// Entropy solution for `u0 = 1 + sin(2 pi x)`: the sine solution seen from
/// a frame moving with unit speed.
pub fn burgers_shifted_sine(x: f64, t: f64) -> f64 {
    1.0 + burgers_sine(x - t, t)
}

/// Steady standing shock: `1` left of `x = 1/2`, `-1` right of it.
pub fn steady_shock(x: f64) -> f64 {
    if x < 0.5 {
        1.0
    } else if x > 0.5 {
        -1.0
    } else {
        0.0
    }
}

/// Self-similar entropy solution of a scalar Riemann problem, built from the
/// convex envelope of `+-f` between the two states.
#[derive(Debug, Clone)]
pub struct RiemannFan {
    u_left: f64,
    u_right: f64,
    sign: f64,
    problem: Problem,
    /// Hull vertices `(u, g(u), sample index)` with `g = sign * f`.
    hull: Vec<(f64, f64, usize)>,
}

impl RiemannFan {
    pub fn new(problem: &Problem, u_left: f64, u_right: f64) -> Self {
        let sign = if u_left <= u_right { 1.0 } else { -1.0 };
        let (lo, hi) = (u_left.min(u_right), u_left.max(u_right));
        const N: usize = 20_000;
        let mut us: Vec<f64> = (0..=N).map(|k| lo + (hi - lo) * k as f64 / N as f64).collect();
        us.extend(problem.critical_points_in(lo, hi));
        us.sort_by(f64::total_cmp);
        us.dedup();
        let mut hull: Vec<(f64, f64, usize)> = Vec::new();
        for (k, &u) in us.iter().enumerate() {
            let g = sign * problem.flux(u);
            while hull.len() >= 2 {
                let (u1, g1, _) = hull[hull.len() - 2];
                let (u2, g2, _) = hull[hull.len() - 1];
                // drop the middle point unless it lies strictly below the chord
                if (g2 - g1) * (u - u1) >= (g - g1) * (u2 - u1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((u, g, k));
        }
        Self { u_left, u_right, sign, problem: problem.clone(), hull }
    }

    fn g_prime(&self, u: f64) -> f64 {
        self.sign * self.problem.flux_deriv(u)
    }

    /// Solution at the similarity coordinate `xi = x / t`.
    pub fn eval(&self, xi: f64) -> f64 {
        if self.u_left == self.u_right || self.hull.len() < 2 {
            return self.u_left;
        }
        let sigma = self.sign * xi;
        let slope = |j: usize| {
            let (u1, g1, _) = self.hull[j];
            let (u2, g2, _) = self.hull[j + 1];
            (g2 - g1) / (u2 - u1)
        };
        let ne = self.hull.len() - 1;
        // first edge whose slope exceeds sigma; its left vertex minimizes g - sigma u
        let j = {
            let (mut a, mut b) = (0, ne);
            while a < b {
                let m = (a + b) / 2;
                if slope(m) > sigma {
                    b = m;
                } else {
                    a = m + 1;
                }
            }
            a
        };
        let v = self.hull[j].0;
        let short = |e: usize| e < ne && self.hull[e + 1].2 == self.hull[e].2 + 1;
        let refine = |a: f64, b: f64| -> Option<f64> {
            if !(self.g_prime(a) <= sigma && sigma <= self.g_prime(b)) {
                return None;
            }
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if self.g_prime(m) < sigma {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            Some(0.5 * (lo + hi))
        };
        if j > 0 && short(j - 1) {
            if let Some(u) = refine(self.hull[j - 1].0, v) {
                return u;
            }
        }
        if short(j) {
            if let Some(u) = refine(v, self.hull[j + 1].0) {
                return u;
            }
        }
        v
    }
}

/// Riemann solution for states `u_left`, `u_right` at `xi = x / t`.
pub fn riemann_selfsim(problem: &Problem, u_left: f64, u_right: f64, xi: f64) -> f64 {
    RiemannFan::new(problem, u_left, u_right).eval(xi)
}

/// Sampled profile `(x_k, u_k)` with linear interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl Profile {
    /// Interpolated value, constant beyond the first and last samples.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.u[0];
        }
        if x >= self.x[n - 1] {
            return self.u[n - 1];
        }
        let k = self.x.partition_point(|&xk| xk <= x) - 1;
        let s = (x - self.x[k]) / (self.x[k + 1] - self.x[k]);
        self.u[k] + s * (self.u[k + 1] - self.u[k])
    }

    /// Averages consecutive blocks of `block` samples.
    pub fn block_average(&self, block: usize) -> Profile {
        let chunks = |v: &[f64]| v.chunks(block).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        Profile { x: chunks(&self.x), u: chunks(&self.u) }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "u"])?;
        for (x, u) in self.x.iter().zip(&self.u) {
            w.write_record([x.to_string(), u.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Profile> {
        let mut r = csv::Reader::from_path(path)?;
        let mut p = Profile { x: Vec::new(), u: Vec::new() };
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("bad golden record {rec:?}")))
            };
            p.x.push(parse(0)?);
            p.u.push(parse(1)?);
        }
        if p.x.is_empty() {
            return Err(Error::InvalidConfig("empty golden profile".into()));
        }
        Ok(p)
    }
}

/// Explicit first-order Godunov finite volumes on `n_cells` uniform cells of
/// `[0, 1]` at CFL 0.45, returning cell-centre values. Steady problems march
/// until the update falls below `1e-13` in the max norm.
pub fn fv_oracle(problem: &Problem, n_cells: usize, final_time: FinalTime) -> Result<Profile> {
    let dx = 1.0 / n_cells as f64;
    let (m, big_m) = problem.bounds;
    let speed = problem.max_wave_speed(m, big_m).max(1e-12);
    let dt0 = 0.45 * dx / speed;
    let god = InterfaceFlux::new(InterfaceKind::Godunov, problem);
    let x: Vec<f64> = (0..n_cells).map(|j| (j as f64 + 0.5) * dx).collect();
    let mut u: Vec<f64> = x.iter().map(|&xj| problem.u0.eval(xj)).collect();
    let mut flux = vec![0.0; n_cells + 1];
    let (t_end, steady) = match final_time {
        FinalTime::Time(t) => (t, false),
        FinalTime::Steady => (f64::INFINITY, true),
    };
    let max_steps = if steady { 200 * n_cells } else { usize::MAX };
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_end && steps < max_steps {
        let dt = if t + dt0 >= t_end { t_end - t } else { dt0 };
        let (left, right) = match problem.bc {
            BoundaryCondition::Periodic => (u[n_cells - 1], u[0]),
            BoundaryCondition::Dirichlet { left, right } => (left, right),
        };
        flux[0] = god.value(left, u[0], 1.0);
        for j in 1..n_cells {
            flux[j] = god.value(u[j - 1], u[j], 1.0);
        }
        flux[n_cells] = god.value(u[n_cells - 1], right, 1.0);
        let r = dt / dx;
        let mut change: f64 = 0.0;
        for j in 0..n_cells {
            let du = r * (flux[j + 1] - flux[j]);
            u[j] -= du;
            change = change.max(du.abs());
        }
        t += dt;
        steps += 1;
        if steady && change < 1e-13 {
            break;
        }
    }
    let tol = 1e-12 * (1.0 + big_m.abs().max(m.abs()));
    if let Some(&bad) = u.iter().find(|&&v| v < m - tol || v > big_m + tol || !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite-volume oracle left the bounds: {bad}")));
    }
    Ok(Profile { x, u })
}

/// Analytic reference for the benchmark problems that have one.
pub fn analytic_reference(problem: &Problem) -> Option<ReferenceSolution> {
    let id = problem.id?;
    let (kind, evaluator): (ReferenceKind, Box<dyn Fn(f64, f64) -> f64 + Send + Sync>) = match id {
        1 => (ReferenceKind::Characteristics, Box::new(burgers_sine)),
        2 => (ReferenceKind::SteadyShock, Box::new(|x, _| steady_shock(x))),
        3 => (ReferenceKind::Characteristics, Box::new(burgers_shifted_sine)),
        4 | 5 => {
            let (l, r) = problem.dirichlet()?;
            let fan = RiemannFan::new(problem, l, r);
            (
                ReferenceKind::RiemannSelfSim,
                Box::new(move |x, t| if t == 0.0 { if x < 0.5 { l } else { r } } else { fan.eval((x - 0.5) / t) }),
            )
        }
        _ => return None,
    };
    Some(ReferenceSolution { kind, evaluator })
}

/// Reference backed by a stored finite-volume profile.
pub fn profile_reference(profile: Profile) -> ReferenceSolution {
    ReferenceSolution { kind: ReferenceKind::FvOracle, evaluator: Box::new(move |x, _| profile.eval(x)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{make_problem, Flux, InitialData};

    #[test]
    fn characteristics_examples() {
        for k in 0..20 {
            let x = k as f64 / 20.0 + 0.013;
            assert!((burgers_sine(x, 0.0) - (2.0 * PI * x).sin()).abs() < 1e-14);
        }
        // the foot satisfies the characteristic equation
        let (x, t) = (0.25, 0.1);
        let u = burgers_sine(x, t);
        let xi = x - t * u;
        assert!((u - (2.0 * PI * xi).sin()).abs() < 1e-12);
        // antisymmetric jump at the standing shock
        let e = 1e-9;
        let (l, r) = (burgers_sine(0.5 - e, 0.4), burgers_sine(0.5 + e, 0.4));
        assert!(l > 0.5 && (l + r).abs() < 1e-12);
        assert!(burgers_characteristics(|v| v, 1.0, 1.0, (2.0, 3.0)).is_err());
    }

    #[test]
    fn riemann_examples() {
        let p1 = make_problem(1).unwrap();
        assert_eq!(riemann_selfsim(&p1, 0.3, 0.3, 0.7), 0.3);
        assert_eq!(riemann_selfsim(&p1, 1.0, -1.0, -0.01), 1.0);
        assert_eq!(riemann_selfsim(&p1, 1.0, -1.0, 0.01), -1.0);
        // Burgers rarefaction u = xi
        assert!((riemann_selfsim(&p1, -1.0, 1.0, 0.3) - 0.3).abs() < 1e-12);
        assert_eq!(riemann_selfsim(&p1, -1.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn buckley_leverett_compound_wave() {
        // shock from the tangent point u* = 1/sqrt(3) down to 0
        let p4 = make_problem(4).unwrap();
        let us = 1.0 / 3f64.sqrt();
        let speed = p4.flux(us) / us;
        assert!((speed - p4.flux_deriv(us)).abs() < 1e-12);
        let fan = RiemannFan::new(&p4, 1.0, 0.0);
        assert_eq!(fan.eval(speed + 1e-3), 0.0);
        let below = fan.eval(speed - 1e-3);
        assert!((below - us).abs() < 1e-2 && below > us);
        // rarefaction part: f'(u) = xi
        let u = fan.eval(0.8);
        assert!((p4.flux_deriv(u) - 0.8).abs() < 1e-9);
        assert_eq!(fan.eval(-0.1), 1.0);
    }

    #[test]
    fn fv_oracle_constant_and_steady() {
        let c = Problem::new(
            "constant",
            Flux::Burgers,
            InitialData::Constant(0.7),
            BoundaryCondition::Periodic,
            FinalTime::Time(0.3),
        );
        let prof = fv_oracle(&c, 200, FinalTime::Time(0.3)).unwrap();
        assert!(prof.u.iter().all(|&v| (v - 0.7).abs() < 1e-15));

        let p2 = make_problem(2).unwrap();
        let prof = fv_oracle(&p2, 2000, FinalTime::Steady).unwrap();
        let dx = 1.0 / 2000.0;
        for (x, u) in prof.x.iter().zip(&prof.u) {
            if (x - 0.5).abs() > dx {
                assert!((u - steady_shock(*x)).abs() < 1e-10, "{x} {u}");
            }
        }
    }

    #[test]
    fn profile_interpolation_and_io() {
        let p = Profile { x: vec![0.0, 1.0, 2.0], u: vec![0.0, 2.0, 0.0] };
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(-1.0), 0.0);
        assert_eq!(p.eval(1.5), 1.0);
        let b = Profile { x: vec![0.0, 1.0, 2.0, 3.0], u: vec![1.0, 3.0, 5.0, 7.0] }.block_average(2);
        assert_eq!(b.u, vec![2.0, 6.0]);
        let dir = std::env::temp_dir().join(format!("idgsem-profile-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        p.write_csv(&path).unwrap();
        assert_eq!(Profile::read_csv(&path).unwrap(), p);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
