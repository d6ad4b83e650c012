//! Two-point fluxes: entropy-conservative volume fluxes, monotone interface
//! fluxes, and the averaged states used by the bound-preserving analysis.

use crate::basis::{gl32, gl64};
use crate::physics::{EntropyPair, Flux, Problem};
use crate::{Error, Result};

/// Strictly convex entropy `theta` defining an entropy-conservative flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EcEntropy {
    /// `theta(u) = u^2 / 2`, entropy variable `v = u`.
    #[default]
    Square,
    /// `theta(u) = exp(u)`, entropy variable `v = exp(u)`.
    Exponential,
}

impl EcEntropy {
    pub fn theta(&self, u: f64) -> f64 {
        match self {
            EcEntropy::Square => 0.5 * u * u,
            EcEntropy::Exponential => u.exp(),
        }
    }

    /// Entropy variable `v = theta'(u)`.
    pub fn v(&self, u: f64) -> f64 {
        match self {
            EcEntropy::Square => u,
            EcEntropy::Exponential => u.exp(),
        }
    }

    pub fn u_of_v(&self, v: f64) -> f64 {
        match self {
            EcEntropy::Square => v,
            EcEntropy::Exponential => v.ln(),
        }
    }

    pub fn hessian(&self, u: f64) -> f64 {
        match self {
            EcEntropy::Square => 1.0,
            EcEntropy::Exponential => u.exp(),
        }
    }

    /// `(b - a) / (v(b) - v(a))`, with its limit at `a = b`.
    fn secant_ratio(&self, a: f64, b: f64) -> f64 {
        match self {
            EcEntropy::Square => 1.0,
            EcEntropy::Exponential => {
                let d = b - a;
                if d == 0.0 {
                    (-a).exp()
                } else {
                    d / (a.exp() * d.exp_m1())
                }
            }
        }
    }

    /// Temporal potential `psi_t(u) = v(u) u - theta(u)`.
    pub fn psi_t(&self, u: f64) -> f64 {
        self.v(u) * u - self.theta(u)
    }
}

/// Entropy-conservative two-point flux for a problem and entropy.
#[derive(Debug, Clone)]
pub struct EcFlux {
    problem: Problem,
    entropy: EcEntropy,
}

impl EcFlux {
    pub fn new(problem: &Problem, entropy: EcEntropy) -> Self {
        Self { problem: problem.clone(), entropy }
    }

    pub fn square(problem: &Problem) -> Self {
        Self::new(problem, EcEntropy::Square)
    }

    pub fn entropy(&self) -> EcEntropy {
        self.entropy
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    fn flux(&self) -> Flux {
        self.problem.flux
    }

    /// Average of `g(u(theta))` over `theta in [0, 1]`, where `u(theta)`
    /// follows the straight segment between `v(a)` and `v(b)`.
    ///
    /// Evaluated in `u` after the substitution `dtheta = theta'' du / dv`,
    /// with composite Gauss-Legendre panels of length at most one and an
    /// optional breakpoint.
    fn segment_average(
        &self,
        a: f64,
        b: f64,
        rule: &(Vec<f64>, Vec<f64>),
        kink: Option<f64>,
        g: impl Fn(f64) -> f64,
    ) -> f64 {
        if a == b {
            return g(a);
        }
        let d = b - a;
        let mut breaks = vec![0.0];
        if let Some(k) = kink {
            let s = (k - a) / d;
            if s > 0.0 && s < 1.0 {
                breaks.push(s);
            }
        }
        breaks.push(1.0);
        let (x, w) = rule;
        let mut sum = 0.0;
        for seg in breaks.windows(2) {
            let (s0, s1) = (seg[0], seg[1]);
            let panels = ((s1 - s0) * d.abs()).ceil().max(1.0) as usize;
            let h = (s1 - s0) / panels as f64;
            for j in 0..panels {
                let lo = s0 + h * j as f64;
                let mut part = 0.0;
                for (xk, wk) in x.iter().zip(w) {
                    let u = a + (lo + xk * h) * d;
                    part += wk * self.entropy.hessian(u) * g(u);
                }
                sum += part * h;
            }
        }
        sum * self.entropy.secant_ratio(a, b)
    }

    /// Entropy-conservative flux `h_ec(a, b, n)`.
    pub fn h_ec(&self, a: f64, b: f64, n: f64) -> f64 {
        n * self.h_ec_unit(a, b)
    }

    fn h_ec_unit(&self, a: f64, b: f64) -> f64 {
        match (self.entropy, self.flux()) {
            (EcEntropy::Square, Flux::Burgers) => (a * a + a * b + b * b) / 6.0,
            (EcEntropy::Square, Flux::Linear { speed }) => 0.5 * speed * (a + b),
            (_, flux) => self.segment_average(a, b, gl32(), None, |u| flux.eval(u)),
        }
    }

    /// `h_ec(a, b, 1)` and its partial derivatives in `a` and `b`.
    pub fn h_ec_with_grad(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let flux = self.flux();
        match (self.entropy, flux) {
            (EcEntropy::Square, Flux::Burgers) => {
                ((a * a + a * b + b * b) / 6.0, (2.0 * a + b) / 6.0, (a + 2.0 * b) / 6.0)
            }
            (EcEntropy::Square, Flux::Linear { speed }) => {
                (0.5 * speed * (a + b), 0.5 * speed, 0.5 * speed)
            }
            (EcEntropy::Square, _) => {
                if a == b {
                    let d = 0.5 * flux.deriv(a);
                    return (flux.eval(a), d, d);
                }
                // d/da int_0^1 f(a + s (b - a)) ds = int (1 - s) f' ds
                let (x, w) = gl32();
                let d = b - a;
                let panels = d.abs().ceil().max(1.0) as usize;
                let h = 1.0 / panels as f64;
                let (mut v, mut da, mut db) = (0.0, 0.0, 0.0);
                for j in 0..panels {
                    for (xk, wk) in x.iter().zip(w) {
                        let s = h * (j as f64 + xk);
                        let u = a + s * d;
                        let fp = flux.deriv(u);
                        v += wk * flux.eval(u);
                        da += wk * (1.0 - s) * fp;
                        db += wk * s * fp;
                    }
                }
                (v * h, da * h, db * h)
            }
            (EcEntropy::Exponential, _) => {
                let v = self.h_ec_unit(a, b);
                if (b - a).abs() < 1e-5 {
                    let d = 0.5 * flux.deriv(0.5 * (a + b));
                    return (v, d, d);
                }
                let dv = self.entropy.v(b) - self.entropy.v(a);
                let da = self.entropy.hessian(a) * (v - flux.eval(a)) / dv;
                let db = self.entropy.hessian(b) * (flux.eval(b) - v) / dv;
                (v, da, db)
            }
        }
    }

    /// Flux potential `psi` with `psi' = theta'' f`, normalized by `psi(0) = 0`.
    pub fn psi(&self, u: f64) -> f64 {
        let flux = self.flux();
        match self.entropy {
            EcEntropy::Square => flux.antiderivative(u) - flux.antiderivative(0.0),
            EcEntropy::Exponential => {
                let (x, w) = gl32();
                let panels = u.abs().ceil().max(1.0) as usize;
                let h = u / panels as f64;
                let mut s = 0.0;
                for j in 0..panels {
                    for (xk, wk) in x.iter().zip(w) {
                        let t = h * (j as f64 + xk);
                        s += wk * t.exp() * flux.eval(t);
                    }
                }
                s * h
            }
        }
    }

    /// Entropy-conservative temporal flux `u_ec(a, b)`.
    pub fn u_ec(&self, a: f64, b: f64) -> f64 {
        match self.entropy {
            EcEntropy::Square => 0.5 * (a + b),
            EcEntropy::Exponential => self.segment_average(a, b, gl32(), None, |u| u),
        }
    }

    /// `u_ec(a, b)` and its partial derivatives.
    pub fn u_ec_with_grad(&self, a: f64, b: f64) -> (f64, f64, f64) {
        match self.entropy {
            EcEntropy::Square => (0.5 * (a + b), 0.5, 0.5),
            EcEntropy::Exponential => {
                let v = self.u_ec(a, b);
                if (b - a).abs() < 1e-5 {
                    return (v, 0.5, 0.5);
                }
                let dv = self.entropy.v(b) - self.entropy.v(a);
                (v, self.entropy.hessian(a) * (v - a) / dv, self.entropy.hessian(b) * (b - v) / dv)
            }
        }
    }

    /// `beta(a, b) = 1/2 int_0^1 (u(theta) - a) / (b - a) dtheta`.
    pub fn beta_coeff(&self, a: f64, b: f64) -> f64 {
        match self.entropy {
            EcEntropy::Square => 0.25,
            EcEntropy::Exponential => {
                if a == b {
                    return 0.25;
                }
                // (u - a) / (b - a) = s on the u-parametrization
                let (x, w) = gl32();
                let d = b - a;
                let panels = d.abs().ceil().max(1.0) as usize;
                let h = 1.0 / panels as f64;
                let mut sum = 0.0;
                for j in 0..panels {
                    for (xk, wk) in x.iter().zip(w) {
                        let s = h * (j as f64 + xk);
                        sum += wk * s * self.entropy.hessian(a + s * d);
                    }
                }
                0.5 * sum * h * self.entropy.secant_ratio(a, b)
            }
        }
    }

    /// Upper bound of `theta''(b) (b - a) / (v(b) - v(a))` over `[lo, hi]`.
    pub fn l_u(&self, lo: f64, hi: f64) -> f64 {
        match self.entropy {
            EcEntropy::Square => 1.0,
            EcEntropy::Exponential => {
                const N: usize = 256;
                let mut best: f64 = 1.0;
                for i in 0..=N {
                    let a = lo + (hi - lo) * i as f64 / N as f64;
                    for j in 0..=N {
                        let b = lo + (hi - lo) * j as f64 / N as f64;
                        let r = self.entropy.hessian(b) * self.entropy.secant_ratio(a, b);
                        best = best.max(r);
                    }
                }
                1.01 * best
            }
        }
    }

    fn check_alpha(&self, a: f64, b: f64, alpha: f64) -> Result<()> {
        let bound = self.problem.max_wave_speed(a.min(b), a.max(b));
        if alpha < bound * (1.0 - 1e-12) {
            return Err(Error::AlphaBelowLipschitz { alpha, bound });
        }
        Ok(())
    }

    /// Averaged state `(1 - beta) a + beta b - (h_ec(a, b, n) - f(a) n) / (2 alpha |n|)`.
    pub fn fan_average_u(&self, a: f64, b: f64, n: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(a, b, alpha)?;
        Ok(self.fan_average_u_unchecked(a, b, n, alpha))
    }

    pub(crate) fn fan_average_u_unchecked(&self, a: f64, b: f64, n: f64, alpha: f64) -> f64 {
        let beta = self.beta_coeff(a, b);
        (1.0 - beta) * a + beta * b - (self.h_ec(a, b, n) - self.flux().eval(a) * n) / (2.0 * alpha * n.abs())
    }

    /// Lax-Friedrichs average `(a + b)/2 - (f(b) - f(a)) n / (2 alpha)`.
    pub fn lax_average_w(&self, a: f64, b: f64, n: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(a, b, alpha)?;
        let f = self.flux();
        Ok(0.5 * (a + b) - (f.eval(b) - f.eval(a)) * n / (2.0 * alpha))
    }

    /// Segment average of the entropy flux `q`, times `n`.
    pub fn q_ec(&self, a: f64, b: f64, n: f64, entropy: &EntropyPair) -> f64 {
        n * self.segment_average(a, b, gl64(), entropy.kinks(), |u| entropy.q(u))
    }

    /// Segment average of the entropy `eta`.
    pub fn eta_bar(&self, a: f64, b: f64, entropy: &EntropyPair) -> f64 {
        self.segment_average(a, b, gl64(), entropy.kinks(), |u| entropy.eta(u))
    }
}

/// Monotone interface flux families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterfaceKind {
    #[default]
    Godunov,
    Rusanov,
}

/// Which candidate realizes the Godunov minimax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GodunovBranch {
    First,
    Second,
    Interior,
}

/// Consistent, conservative and monotone interface flux `h(a, b, n)`.
#[derive(Debug, Clone)]
pub struct InterfaceFlux {
    kind: InterfaceKind,
    problem: Problem,
}

impl InterfaceFlux {
    pub fn new(kind: InterfaceKind, problem: &Problem) -> Self {
        Self { kind, problem: problem.clone() }
    }

    pub fn kind(&self) -> InterfaceKind {
        self.kind
    }

    /// Godunov state `u*` for `n = 1` and the branch attaining it; ties go
    /// to the first argument.
    pub fn godunov_state(&self, a: f64, b: f64) -> (f64, GodunovBranch) {
        let f = |u: f64| self.problem.flux(u);
        let mut best = (a, GodunovBranch::First);
        let mut fbest = f(a);
        let take_max = a >= b;
        let better = |x: f64, y: f64| if take_max { x > y } else { x < y };
        let fb = f(b);
        if better(fb, fbest) {
            best = (b, GodunovBranch::Second);
            fbest = fb;
        }
        self.problem.for_each_critical_point(a.min(b), a.max(b), |c| {
            let fc = f(c);
            if better(fc, fbest) {
                best = (c, GodunovBranch::Interior);
                fbest = fc;
            }
        });
        best
    }

    fn rusanov_speed(&self, a: f64, b: f64) -> (f64, f64) {
        let (s, at) = self.problem.max_wave_speed_at(a.min(b), a.max(b));
        (1.01 * s, at)
    }

    /// Interface flux value.
    pub fn value(&self, a: f64, b: f64, n: f64) -> f64 {
        if n < 0.0 {
            return -self.value(b, a, -n);
        }
        match self.kind {
            InterfaceKind::Godunov => self.problem.flux(self.godunov_state(a, b).0) * n,
            InterfaceKind::Rusanov => {
                let lambda = self.rusanov_speed(a, b).0;
                0.5 * (self.problem.flux(a) + self.problem.flux(b)) * n - 0.5 * lambda * (b - a)
            }
        }
    }

    /// Flux value and (generalized) partial derivatives in `a` and `b`.
    pub fn value_with_grad(&self, a: f64, b: f64, n: f64) -> (f64, f64, f64) {
        if n < 0.0 {
            let (v, db, da) = self.value_with_grad(b, a, -n);
            return (-v, -da, -db);
        }
        let flux = self.problem.flux;
        match self.kind {
            InterfaceKind::Godunov => {
                let (u, branch) = self.godunov_state(a, b);
                let v = flux.eval(u) * n;
                if a == b {
                    // equal states: the upwind side carries the derivative
                    let fp = flux.deriv(a) * n;
                    return if fp >= 0.0 { (v, fp, 0.0) } else { (v, 0.0, fp) };
                }
                match branch {
                    GodunovBranch::First => (v, flux.deriv(a) * n, 0.0),
                    GodunovBranch::Second => (v, 0.0, flux.deriv(b) * n),
                    GodunovBranch::Interior => (v, 0.0, 0.0),
                }
            }
            InterfaceKind::Rusanov => {
                let (lambda, at) = self.rusanov_speed(a, b);
                let v = 0.5 * (flux.eval(a) + flux.eval(b)) * n - 0.5 * lambda * (b - a);
                let fp = flux.deriv(at);
                let dl = 1.01 * fp.signum() * flux.second_deriv(at);
                let (dla, dlb) = if at == a {
                    (dl, 0.0)
                } else if at == b {
                    (0.0, dl)
                } else {
                    (0.0, 0.0)
                };
                let da = 0.5 * flux.deriv(a) * n + 0.5 * lambda - 0.5 * dla * (b - a);
                let db = 0.5 * flux.deriv(b) * n - 0.5 * lambda - 0.5 * dlb * (b - a);
                (v, da, db)
            }
        }
    }

    /// Numerical entropy flux `q(u*) n` paired with the Godunov flux.
    pub fn entropy_flux(&self, a: f64, b: f64, n: f64, entropy: &EntropyPair) -> Result<f64> {
        if self.kind != InterfaceKind::Godunov {
            return Err(Error::NoEntropyCompanion(self.kind));
        }
        Ok(self.godunov_entropy_flux(a, b, n, entropy))
    }

    pub(crate) fn godunov_entropy_flux(&self, a: f64, b: f64, n: f64, entropy: &EntropyPair) -> f64 {
        if n < 0.0 {
            return -self.godunov_entropy_flux(b, a, -n, entropy);
        }
        entropy.q(self.godunov_state(a, b).0) * n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{make_problem, square_entropy};

    #[test]
    fn burgers_ec_examples() {
        let p = make_problem(1).unwrap();
        let ec = EcFlux::square(&p);
        assert!((ec.h_ec(1.0, 2.0, 1.0) - 7.0 / 6.0).abs() < 1e-15);
        assert!((ec.h_ec(-1.0, 1.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(ec.h_ec(2.0, 2.0, 1.0), 2.0);
        assert_eq!(ec.u_ec(1.0, 3.0), 2.0);
        assert_eq!(ec.u_ec(5.0, 5.0), 5.0);
        assert_eq!(ec.beta_coeff(0.3, -2.0), 0.25);
    }

    #[test]
    fn quadrature_path_matches_closed_form() {
        // Route a polynomial flux through the generic quadrature branch
        let p = make_problem(1).unwrap();
        let ec = EcFlux::square(&p);
        for &(a, b) in &[(1.0, 2.0), (-4.0, 3.5), (0.1, 0.1000001)] {
            let quad = ec.segment_average(a, b, gl32(), None, |u| 0.5 * u * u);
            assert!((quad - ec.h_ec(a, b, 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn buckley_leverett_consistency() {
        for id in [4, 5] {
            let p = make_problem(id).unwrap();
            let ec = EcFlux::square(&p);
            for &u in &[-2.0, 0.0, 0.3, 1.0, 2.5] {
                assert!((ec.h_ec(u, u, 1.0) - p.flux(u)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fan_and_lax_averages_examples() {
        let p = make_problem(1).unwrap();
        let ec = EcFlux::square(&p);
        let u = ec.fan_average_u(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((u - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(ec.fan_average_u(0.7, 0.7, -1.0, 1.0).unwrap(), 0.7);
        let w = ec.lax_average_w(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((w - 0.25).abs() < 1e-15);
        assert!(matches!(
            ec.fan_average_u(0.0, 1.0, 1.0, 0.5),
            Err(Error::AlphaBelowLipschitz { .. })
        ));
    }

    #[test]
    fn eta_bar_example() {
        let p = make_problem(1).unwrap();
        let ec = EcFlux::square(&p);
        let sq = square_entropy(p.flux);
        assert!((ec.eta_bar(0.0, 1.0, &sq) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(ec.eta_bar(0.4, 0.4, &sq), sq.eta(0.4));
        assert_eq!(ec.q_ec(0.4, 0.4, -1.0, &sq), -sq.q(0.4));
    }

    #[test]
    fn godunov_examples() {
        let p = make_problem(1).unwrap();
        let g = InterfaceFlux::new(InterfaceKind::Godunov, &p);
        assert_eq!(g.value(2.0, -1.0, 1.0), 2.0);
        assert_eq!(g.value(-1.0, 2.0, 1.0), 0.0);
        assert_eq!(g.value(1.0, 1.0, -1.0), -0.5);
        let sq = square_entropy(p.flux);
        assert!((g.entropy_flux(2.0, -1.0, 1.0, &sq).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        let r = InterfaceFlux::new(InterfaceKind::Rusanov, &p);
        assert_eq!(r.value(1.0, 1.0, 1.0), 0.5);
        assert!(matches!(r.entropy_flux(1.0, 0.0, 1.0, &sq), Err(Error::NoEntropyCompanion(_))));
    }

    #[test]
    fn exponential_entropy_beta_matches_theta_oracle() {
        // beta from a direct theta-integral in the entropy variable
        let p = make_problem(5).unwrap();
        let ec = EcFlux::new(&p, EcEntropy::Exponential);
        for &(a, b) in &[(-1.0, 2.0), (0.5, -0.25), (3.0, 2.9)] {
            let (va, vb) = (f64::exp(a), f64::exp(b));
            let n = 200_000;
            let mut s = 0.0;
            for k in 0..n {
                let th = (k as f64 + 0.5) / n as f64;
                let u = (th * vb + (1.0 - th) * va).ln();
                s += (u - a) / (b - a);
            }
            let oracle = 0.5 * s / n as f64;
            let beta = ec.beta_coeff(a, b);
            assert!((beta - oracle).abs() < 1e-9, "{beta} {oracle}");
            assert!(beta > 0.0 && beta <= 0.5);
        }
    }
}
