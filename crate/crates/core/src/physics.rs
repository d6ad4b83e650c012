//! Flux functions, entropy pairs and the five benchmark problems.

use crate::basis::gl32;
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Scalar flux `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flux {
    /// `f(u) = speed * u`
    Linear { speed: f64 },
    /// `f(u) = u^2 / 2`
    Burgers,
    /// `f(u) = u^2 / (u^2 + c (1 - u)^2)`
    BuckleyLeverett { c: f64 },
}

impl Flux {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { speed } => speed * u,
            Flux::Burgers => 0.5 * u * u,
            Flux::BuckleyLeverett { c } => {
                let d = u * u + c * (1.0 - u) * (1.0 - u);
                u * u / d
            }
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { speed } => speed,
            Flux::Burgers => u,
            Flux::BuckleyLeverett { c } => {
                let d = u * u + c * (1.0 - u) * (1.0 - u);
                2.0 * c * u * (1.0 - u) / (d * d)
            }
        }
    }

    pub fn second_deriv(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { .. } => 0.0,
            Flux::Burgers => 1.0,
            Flux::BuckleyLeverett { c } => {
                let d = u * u + c * (1.0 - u) * (1.0 - u);
                let dd = 2.0 * u - 2.0 * c * (1.0 - u);
                2.0 * c * ((1.0 - 2.0 * u) * d - 2.0 * u * (1.0 - u) * dd) / (d * d * d)
            }
        }
    }

    /// Closed-form antiderivative `F` with `F' = f`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { speed } => 0.5 * speed * u * u,
            Flux::Burgers => u * u * u / 6.0,
            Flux::BuckleyLeverett { c } => {
                // f = 1/A + c (2u - 1) / (A D),  D = A u^2 - 2 c u + c,  A = 1 + c
                let a = 1.0 + c;
                let d = a * u * u - 2.0 * c * u + c;
                let sc = c.sqrt();
                u / a + c / (a * a) * d.ln() + c * (c - 1.0) / (a * a * sc) * ((a * u - c) / sc).atan()
            }
        }
    }

    /// True for fluxes whose segment average has a polynomial closed form.
    pub fn is_polynomial(&self) -> bool {
        !matches!(self, Flux::BuckleyLeverett { .. })
    }

    /// Roots of `g` on `[lo, hi]` by dense sign-change sampling and bisection.
    fn sampled_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
        let mut roots = Vec::new();
        let h = (hi - lo) / samples as f64;
        let mut x0 = lo;
        let mut g0 = g(x0);
        if g0 == 0.0 {
            roots.push(x0);
        }
        for k in 1..=samples {
            let x1 = if k == samples { hi } else { lo + h * k as f64 };
            let g1 = g(x1);
            if g1 == 0.0 {
                roots.push(x1);
            } else if g0 != 0.0 && g0.signum() != g1.signum() {
                let (mut a, mut b, mut ga) = (x0, x1, g0);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let gm = g(m);
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if gm.signum() == ga.signum() {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            g0 = g1;
        }
        roots
    }

    /// Interior critical points of `f` (roots of `f'`) on `[lo, hi]`.
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Flux::Linear { .. } => Vec::new(),
            _ => Self::sampled_roots(|u| self.deriv(u), lo, hi, 1 << 14),
        }
    }

    /// Roots of `f''` on `[lo, hi]`: the interior extrema of `f'`.
    pub fn inflection_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Flux::Linear { .. } | Flux::Burgers => Vec::new(),
            _ => Self::sampled_roots(|u| self.second_deriv(u), lo, hi, 1 << 14),
        }
    }
}

/// Boundary treatment at `x = x_left` and `x = x_right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Periodic,
    /// Constant exterior states fed to the interface flux.
    Dirichlet { left: f64, right: f64 },
}

/// Initial datum `u0(x)`.
#[derive(Clone)]
pub enum InitialData {
    Constant(f64),
    /// `offset + amplitude * sin(2 pi x)`
    Sine { offset: f64, amplitude: f64 },
    /// `a + b x`
    Affine { a: f64, b: f64 },
    /// `left` for `x < x0`, `right` for `x > x0`.
    Step { left: f64, right: f64, x0: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for InitialData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialData::Constant(v) => write!(f, "Constant({v})"),
            InitialData::Sine { offset, amplitude } => {
                write!(f, "Sine {{ offset: {offset}, amplitude: {amplitude} }}")
            }
            InitialData::Affine { a, b } => write!(f, "Affine {{ a: {a}, b: {b} }}"),
            InitialData::Step { left, right, x0 } => {
                write!(f, "Step {{ left: {left}, right: {right}, x0: {x0} }}")
            }
            InitialData::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl InitialData {
    /// Value at `x`; a step evaluated exactly at its jump returns the midpoint.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialData::Constant(v) => *v,
            InitialData::Sine { offset, amplitude } => offset + amplitude * (2.0 * PI * x).sin(),
            InitialData::Affine { a, b } => a + b * x,
            InitialData::Step { left, right, x0 } => {
                if x < *x0 {
                    *left
                } else if x > *x0 {
                    *right
                } else {
                    0.5 * (left + right)
                }
            }
            InitialData::Custom(g) => g(x),
        }
    }

    /// One-sided limit at `x`, from the right when `from_right`.
    pub fn eval_one_sided(&self, x: f64, from_right: bool) -> f64 {
        match self {
            InitialData::Step { left, right, x0 } if (x - x0).abs() <= 1e-12 => {
                if from_right {
                    *right
                } else {
                    *left
                }
            }
            _ => self.eval(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FinalTime {
    Time(f64),
    Steady,
}

/// A 1D scalar conservation law on `[0, 1]` with its data.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub id: Option<u8>,
    pub flux: Flux,
    pub u0: InitialData,
    pub bc: BoundaryCondition,
    /// `(m, M)`: bounds of the initial and boundary data.
    pub bounds: (f64, f64),
    pub final_time: FinalTime,
    /// Critical points of `f` on a window around the bounds.
    critical: Arc<Vec<f64>>,
    critical_window: (f64, f64),
    inflections: Arc<Vec<f64>>,
}

impl Problem {
    /// Builds a problem; the bounds are sampled from `u0` on `10^4` points
    /// and extended by the Dirichlet values.
    pub fn new(
        name: impl Into<String>,
        flux: Flux,
        u0: InitialData,
        bc: BoundaryCondition,
        final_time: FinalTime,
    ) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=10_000 {
            let v = u0.eval(k as f64 / 10_000.0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if let BoundaryCondition::Dirichlet { left, right } = bc {
            lo = lo.min(left).min(right);
            hi = hi.max(left).max(right);
        }
        Self::with_bounds(name, flux, u0, bc, (lo, hi), final_time)
    }

    pub fn with_bounds(
        name: impl Into<String>,
        flux: Flux,
        u0: InitialData,
        bc: BoundaryCondition,
        bounds: (f64, f64),
        final_time: FinalTime,
    ) -> Self {
        let (m, big_m) = bounds;
        let span = (big_m - m).max(1.0);
        let window = (m - 2.0 * span, big_m + 2.0 * span);
        let critical = flux.critical_points(window.0, window.1);
        let inflections = flux.inflection_points(window.0, window.1);
        Self {
            name: name.into(),
            id: None,
            flux,
            u0,
            bc,
            bounds,
            final_time,
            critical: Arc::new(critical),
            critical_window: window,
            inflections: Arc::new(inflections),
        }
    }

    pub fn flux(&self, u: f64) -> f64 {
        self.flux.eval(u)
    }

    pub fn flux_deriv(&self, u: f64) -> f64 {
        self.flux.deriv(u)
    }

    /// Calls `visit` on each interior critical point of `f` in `(lo, hi)`.
    pub fn for_each_critical_point(&self, lo: f64, hi: f64, mut visit: impl FnMut(f64)) {
        let (wl, wh) = self.critical_window;
        if lo >= wl && hi <= wh {
            self.critical.iter().copied().filter(|&c| c > lo && c < hi).for_each(&mut visit);
        } else {
            self.flux
                .critical_points(lo, hi)
                .into_iter()
                .filter(|&c| c > lo && c < hi)
                .for_each(&mut visit);
        }
    }

    /// Interior critical points of `f` strictly inside `(lo, hi)`.
    pub fn critical_points_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_critical_point(lo, hi, |c| out.push(c));
        out
    }

    fn for_each_inflection(&self, lo: f64, hi: f64, mut visit: impl FnMut(f64)) {
        let (wl, wh) = self.critical_window;
        if lo >= wl && hi <= wh {
            self.inflections.iter().copied().filter(|&c| c > lo && c < hi).for_each(&mut visit);
        } else {
            self.flux
                .inflection_points(lo, hi)
                .into_iter()
                .filter(|&c| c > lo && c < hi)
                .for_each(&mut visit);
        }
    }

    /// `max |f'|` on `[lo, hi]`: attained at an endpoint or at an interior
    /// extremum of `f'`, so this is exact up to root polishing.
    pub fn max_wave_speed(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.flux.deriv(lo).abs().max(self.flux.deriv(hi).abs());
        self.for_each_inflection(lo, hi, |x| best = best.max(self.flux.deriv(x).abs()));
        best
    }

    /// Same as [`Problem::max_wave_speed`] and also reports where it is attained.
    pub(crate) fn max_wave_speed_at(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (self.flux.deriv(lo).abs(), lo);
        let dh = self.flux.deriv(hi).abs();
        if dh > best.0 {
            best = (dh, hi);
        }
        self.for_each_inflection(lo, hi, |x| {
            let d = self.flux.deriv(x).abs();
            if d > best.0 {
                best = (d, x);
            }
        });
        best
    }

    /// Upper bound of the Lipschitz constant of `f` on `[lo, hi]`.
    ///
    /// Maximum of `|f'|` over 4097 uniform samples, the endpoints and the
    /// interior extrema of `f'`, inflated by 1%.
    pub fn lipschitz_constant(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        const SAMPLES: usize = 4096;
        let mut best: f64 = 0.0;
        for k in 0..=SAMPLES {
            let u = lo + (hi - lo) * k as f64 / SAMPLES as f64;
            best = best.max(self.flux.deriv(u).abs());
        }
        best = best.max(self.max_wave_speed(lo, hi));
        1.01 * best
    }

    /// Exterior boundary states, `None` for periodic problems.
    pub fn dirichlet(&self) -> Option<(f64, f64)> {
        match self.bc {
            BoundaryCondition::Dirichlet { left, right } => Some((left, right)),
            BoundaryCondition::Periodic => None,
        }
    }

    /// Entropy flux `q(u) = int_0^u w f'(w) dw` of the square entropy.
    pub fn square_entropy_flux(&self, u: f64) -> f64 {
        match self.flux {
            Flux::Burgers => u * u * u / 3.0,
            _ => {
                u * self.flux.eval(u) - (self.flux.antiderivative(u) - self.flux.antiderivative(0.0))
            }
        }
    }
}

/// Builds problem `id` (1..=5) of the benchmark table.
pub fn make_problem(id: u8) -> Result<Problem> {
    let mut p = match id {
        1 => Problem::with_bounds(
            "burgers-sine",
            Flux::Burgers,
            InitialData::Sine { offset: 0.0, amplitude: 1.0 },
            BoundaryCondition::Periodic,
            (-1.0, 1.0),
            FinalTime::Time(0.4),
        ),
        2 => Problem::with_bounds(
            "burgers-steady-shock",
            Flux::Burgers,
            InitialData::Affine { a: 1.0, b: -2.0 },
            BoundaryCondition::Dirichlet { left: 1.0, right: -1.0 },
            (-1.0, 1.0),
            FinalTime::Steady,
        ),
        3 => Problem::with_bounds(
            "burgers-shifted-sine",
            Flux::Burgers,
            InitialData::Sine { offset: 1.0, amplitude: 1.0 },
            BoundaryCondition::Periodic,
            (0.0, 2.0),
            FinalTime::Time(3.0 / (4.0 * PI)),
        ),
        4 => Problem::with_bounds(
            "buckley-leverett-half",
            Flux::BuckleyLeverett { c: 0.5 },
            InitialData::Step { left: 1.0, right: 0.0, x0: 0.5 },
            BoundaryCondition::Dirichlet { left: 1.0, right: 0.0 },
            (0.0, 1.0),
            FinalTime::Time(0.2),
        ),
        5 => Problem::with_bounds(
            "buckley-leverett-quarter",
            Flux::BuckleyLeverett { c: 0.25 },
            InitialData::Step { left: -3.0, right: 3.0, x0: 0.5 },
            BoundaryCondition::Dirichlet { left: -3.0, right: 3.0 },
            (-3.0, 3.0),
            FinalTime::Time(1.0),
        ),
        _ => return Err(Error::UnknownProblem(id)),
    };
    p.id = Some(id);
    Ok(p)
}

/// Which convex entropy an [`EntropyPair`] carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKind {
    /// `eta = u^2 / 2`
    Square,
    /// `eta = |u - K|`
    Kruzkov(f64),
    /// `eta = exp(u)`
    Exponential,
}

/// Convex entropy `eta` with its entropy flux `q`, `q' = eta' f'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPair {
    pub kind: EntropyKind,
    pub flux: Flux,
}

pub fn square_entropy(flux: Flux) -> EntropyPair {
    EntropyPair { kind: EntropyKind::Square, flux }
}

pub fn kruzkov_entropy(k: f64, problem: &Problem) -> EntropyPair {
    EntropyPair { kind: EntropyKind::Kruzkov(k), flux: problem.flux }
}

pub fn exponential_entropy(flux: Flux) -> EntropyPair {
    EntropyPair { kind: EntropyKind::Exponential, flux }
}

impl EntropyPair {
    pub fn eta(&self, u: f64) -> f64 {
        match self.kind {
            EntropyKind::Square => 0.5 * u * u,
            EntropyKind::Kruzkov(k) => (u - k).abs(),
            EntropyKind::Exponential => u.exp(),
        }
    }

    /// `eta'`, with the subgradient 0 at the Kruzkov kink.
    pub fn eta_deriv(&self, u: f64) -> f64 {
        match self.kind {
            EntropyKind::Square => u,
            EntropyKind::Kruzkov(k) => {
                if u > k {
                    1.0
                } else if u < k {
                    -1.0
                } else {
                    0.0
                }
            }
            EntropyKind::Exponential => u.exp(),
        }
    }

    pub fn q(&self, u: f64) -> f64 {
        match self.kind {
            EntropyKind::Square => match self.flux {
                Flux::Burgers => u * u * u / 3.0,
                flux => u * flux.eval(u) - (flux.antiderivative(u) - flux.antiderivative(0.0)),
            },
            EntropyKind::Kruzkov(k) => {
                let s = if u > k {
                    1.0
                } else if u < k {
                    -1.0
                } else {
                    0.0
                };
                s * (self.flux.eval(u) - self.flux.eval(k))
            }
            EntropyKind::Exponential => {
                // int_0^u e^w f'(w) dw, composite 32-point Gauss-Legendre
                let (x, w) = gl32();
                let panels = (u.abs().ceil() as usize).max(1);
                let h = u / panels as f64;
                let mut s = 0.0;
                for j in 0..panels {
                    let a = j as f64 * h;
                    for (xi, wi) in x.iter().zip(w) {
                        let t = a + xi * h;
                        s += wi * t.exp() * self.flux.deriv(t);
                    }
                }
                s * h
            }
        }
    }

    /// Points where `eta` or `q` are not smooth.
    pub fn kinks(&self) -> Option<f64> {
        match self.kind {
            EntropyKind::Kruzkov(k) => Some(k),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let p1 = make_problem(1).unwrap();
        assert_eq!(p1.flux(2.0), 2.0);
        assert_eq!(p1.bounds, (-1.0, 1.0));
        let p4 = make_problem(4).unwrap();
        assert_eq!(p4.flux(1.0), 1.0);
        assert_eq!(p4.flux(0.0), 0.0);
        assert_eq!(p4.bounds, (0.0, 1.0));
        let p5 = make_problem(5).unwrap();
        assert!((p5.flux(-3.0) - 9.0 / 13.0).abs() < 1e-15);
        assert!(matches!(make_problem(6), Err(Error::UnknownProblem(6))));
        assert!(make_problem(0).is_err());
    }

    #[test]
    fn initial_data_within_bounds() {
        for id in 1..=5 {
            let p = make_problem(id).unwrap();
            let (m, big_m) = p.bounds;
            assert!(m <= big_m);
            for k in 0..10_000 {
                let v = p.u0.eval((k as f64 + 0.5) / 10_000.0);
                assert!(v >= m && v <= big_m, "problem {id}");
            }
        }
    }

    #[test]
    fn lipschitz_examples() {
        let p = make_problem(1).unwrap();
        assert!((p.lipschitz_constant(-1.0, 1.0) - 1.01).abs() < 1e-14);
        assert!((p.lipschitz_constant(0.0, 2.0) - 2.02).abs() < 1e-14);
        // Buckley-Leverett: compare with a 10^6-point sampling oracle
        let p4 = make_problem(4).unwrap();
        let oracle = (0..=1_000_000)
            .map(|k| p4.flux_deriv(k as f64 * 1e-6).abs())
            .fold(0.0, f64::max);
        let l = p4.lipschitz_constant(0.0, 1.0);
        assert!(l >= oracle);
        assert!((l / oracle - 1.0).abs() < 0.02);
    }

    #[test]
    fn lipschitz_monotone_under_inclusion() {
        let p5 = make_problem(5).unwrap();
        let outer = p5.lipschitz_constant(-3.0, 3.0);
        for (a, b) in [(0.1, 0.5), (-1.0, 0.3), (0.25, 0.35), (-3.0, 0.0)] {
            assert!(p5.lipschitz_constant(a, b) <= outer);
        }
    }

    #[test]
    fn flux_derivatives_match_finite_differences() {
        for flux in [Flux::Burgers, Flux::BuckleyLeverett { c: 0.5 }, Flux::BuckleyLeverett { c: 0.25 }] {
            for k in 0..50 {
                let u = -3.0 + 6.0 * k as f64 / 49.0 + 0.0123;
                let h = 1e-5;
                let fd = (flux.eval(u + h) - flux.eval(u - h)) / (2.0 * h);
                assert!((fd - flux.deriv(u)).abs() < 1e-8);
                let fd2 = (flux.deriv(u + h) - flux.deriv(u - h)) / (2.0 * h);
                assert!((fd2 - flux.second_deriv(u)).abs() < 1e-6);
                let fa = (flux.antiderivative(u + h) - flux.antiderivative(u - h)) / (2.0 * h);
                assert!((fa - flux.eval(u)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn buckley_leverett_critical_points() {
        let p = make_problem(4).unwrap();
        let c = p.critical_points_in(-1.0, 2.0);
        assert_eq!(c.len(), 2);
        assert!(c[0].abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_flux_examples() {
        let sq = square_entropy(Flux::Burgers);
        assert!((sq.q(2.0) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(sq.eta(0.0), 0.0);
        assert_eq!(sq.q(0.0), 0.0);
        let p1 = make_problem(1).unwrap();
        let kr = kruzkov_entropy(0.0, &p1);
        assert!((kr.q(1.0) - 0.5).abs() < 1e-15);
        assert!((kr.q(-1.0) + 0.5).abs() < 1e-15);
        assert_eq!(kr.eta_deriv(0.0), 0.0);
    }

    #[test]
    fn entropy_pairs_are_compatible_and_convex() {
        let fluxes = [Flux::Burgers, Flux::BuckleyLeverett { c: 0.5 }, Flux::BuckleyLeverett { c: 0.25 }];
        for flux in fluxes {
            for kind in [EntropyKind::Square, EntropyKind::Kruzkov(0.3), EntropyKind::Exponential] {
                let e = EntropyPair { kind, flux };
                for k in 0..40 {
                    let u = -2.0 + 4.0 * k as f64 / 39.0 + 0.011;
                    if (u - 0.3).abs() < 1e-3 {
                        continue;
                    }
                    let h = 1e-5;
                    let fd = (e.q(u + h) - e.q(u - h)) / (2.0 * h);
                    assert!((fd - e.eta_deriv(u) * flux.deriv(u)).abs() < 1e-8, "{kind:?} {u}");
                    let (a, b, th) = (u, -u * 0.7 + 0.4, 0.37);
                    assert!(e.eta(th * a + (1.0 - th) * b) <= th * e.eta(a) + (1.0 - th) * e.eta(b) + 1e-14);
                }
            }
        }
    }

    #[test]
    fn square_entropy_flux_closed_form_for_buckley_leverett() {
        // q(u) = int_0^u w f'(w) dw by brute-force midpoint sums
        let p = make_problem(5).unwrap();
        for &u in &[-3.0, -0.5, 0.4, 2.0] {
            let n = 200_000;
            let h = u / n as f64;
            let brute: f64 = (0..n)
                .map(|k| {
                    let w = (k as f64 + 0.5) * h;
                    w * p.flux_deriv(w) * h
                })
                .sum();
            assert!((p.square_entropy_flux(u) - brute).abs() < 1e-8);
        }
    }
}
