//! Randomized property sweeps and benchmark runs shared by the command-line
//! `verify` command and the acceptance tests.

use crate::basis::LobattoBasis;
use crate::grid::Grid1D;
use crate::physics::{make_problem, square_entropy, EntropyKind, EntropyPair, Flux, Problem};
use crate::scheme::{Discretization, SchemeKind};
use crate::solver::{advance, RunReport, SolverConfig};
use crate::twopoint::{EcEntropy, EcFlux, InterfaceFlux, InterfaceKind};
use crate::verify::{check_conservation, check_entropy_cells, check_mpp};
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named check: `worst` is the largest error or violation.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
}

impl CheckResult {
    fn new(name: impl Into<String>, worst: f64, tol: f64) -> Self {
        Self { name: name.into(), pass: worst <= tol && !worst.is_nan(), worst }
    }
}

/// Names accepted by [`property_check`].
pub const PROPERTY_CHECKS: &[&str] = &[
    "sbp",
    "ec_identity",
    "time_ec_identity",
    "ec_flux",
    "interface_flux",
    "entropy_pairs",
    "lemma21",
    "entropy_mean_bound",
    "lax_average",
    "interface_mpp",
    "interface_entropy",
    "dhec_bound",
    "time_entropy",
];

/// Default number of random samples per sweep.
pub const SAMPLES: usize = 10_000;

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x1d65_e3a0 ^ tag)
}

/// The three fluxes of the benchmark problems with their problem bounds.
fn flux_problems() -> Vec<Problem> {
    [1, 4, 5].iter().map(|&id| make_problem(id).expect("known problem")).collect()
}

/// Largest violation of the summation-by-parts and row/column sum
/// identities over the given bases.
pub fn operator_identities(bases: &[LobattoBasis]) -> f64 {
    let mut worst: f64 = 0.0;
    for b in bases {
        let q = b.qmat();
        let n = b.len();
        let p = n - 1;
        for k in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for l in 0..n {
                let boundary = if k == l && k == p {
                    1.0
                } else if k == l && k == 0 {
                    -1.0
                } else {
                    0.0
                };
                worst = worst.max((q[(k, l)] + q[(l, k)] - boundary).abs());
                row += q[(k, l)];
                col += q[(l, k)];
            }
            let col_target = if k == p { 1.0 } else if k == 0 { -1.0 } else { 0.0 };
            worst = worst.max(row.abs()).max((col - col_target).abs());
        }
    }
    worst
}

/// Bases of degree 1 to 6.
pub fn low_order_bases() -> Vec<LobattoBasis> {
    (1..=6).map(|p| LobattoBasis::new(p).expect("valid degree")).collect()
}

/// Random sample in `[lo, hi]`.
fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.gen::<f64>()
}

fn random_n(r: &mut ChaCha8Rng) -> f64 {
    if r.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// `alpha` at or above the local Lipschitz bound of the flux.
fn random_alpha(r: &mut ChaCha8Rng, p: &Problem, lo: f64, hi: f64) -> f64 {
    let l = p.max_wave_speed(lo, hi).max(1e-3);
    if r.gen::<f64>() < 0.2 {
        l
    } else {
        l * uniform(r, 1.0, 3.0)
    }
}

fn test_entropies(r: &mut ChaCha8Rng, p: &Problem) -> Vec<EntropyPair> {
    let (m, big_m) = p.bounds;
    vec![
        square_entropy(p.flux),
        EntropyPair { kind: EntropyKind::Kruzkov(uniform(r, m, big_m)), flux: p.flux },
        EntropyPair { kind: EntropyKind::Kruzkov(0.5 * (m + big_m)), flux: p.flux },
    ]
}

/// Runs a named property sweep with `samples` random draws.
pub fn property_check(name: &str, samples: usize) -> Option<CheckResult> {
    let tol = 1e-10;
    let result = match name {
        "sbp" => CheckResult::new(name, operator_identities(&low_order_bases()), 1e-13),
        "ec_identity" => {
            let mut r = rng(1);
            let mut worst: f64 = 0.0;
            for p in flux_problems() {
                let ec = EcFlux::square(&p);
                for _ in 0..samples {
                    let (a, b) = (uniform(&mut r, -5.0, 5.0), uniform(&mut r, -5.0, 5.0));
                    let n = random_n(&mut r);
                    let lhs = (b - a) * ec.h_ec(a, b, n);
                    let rhs = (ec.psi(b) - ec.psi(a)) * n;
                    worst = worst.max((lhs - rhs).abs());
                }
            }
            CheckResult::new(name, worst, 1e-11)
        }
        "time_ec_identity" => {
            let mut r = rng(2);
            let mut worst: f64 = 0.0;
            for p in flux_problems() {
                let ec = EcFlux::square(&p);
                let e = ec.entropy();
                for _ in 0..samples {
                    let (a, b) = (uniform(&mut r, -5.0, 5.0), uniform(&mut r, -5.0, 5.0));
                    let lhs = (e.v(b) - e.v(a)) * ec.u_ec(a, b);
                    worst = worst.max((lhs - (e.psi_t(b) - e.psi_t(a))).abs());
                }
            }
            CheckResult::new(name, worst, 1e-11)
        }
        "ec_flux" => {
            // symmetry and consistency
            let mut r = rng(3);
            let mut worst: f64 = 0.0;
            for p in flux_problems() {
                let ec = EcFlux::square(&p);
                for _ in 0..samples {
                    let (a, b) = (uniform(&mut r, -5.0, 5.0), uniform(&mut r, -5.0, 5.0));
                    worst = worst.max((ec.h_ec(a, b, 1.0) - ec.h_ec(b, a, 1.0)).abs());
                    worst = worst.max((ec.h_ec(a, a, 1.0) - p.flux(a)).abs());
                }
            }
            CheckResult::new(name, worst, 1e-12)
        }
        "interface_flux" => {
            // consistency, conservation and monotonicity
            let mut r = rng(4);
            let mut worst: f64 = 0.0;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                for kind in [InterfaceKind::Godunov, InterfaceKind::Rusanov] {
                    let h = InterfaceFlux::new(kind, &p);
                    for _ in 0..samples / 4 {
                        let a = uniform(&mut r, m, big_m);
                        let b = uniform(&mut r, m, big_m);
                        let c = uniform(&mut r, m, big_m);
                        let n = random_n(&mut r);
                        worst = worst.max((h.value(a, a, n) - p.flux(a) * n).abs());
                        worst = worst.max((h.value(a, b, n) + h.value(b, a, -n)).abs());
                        let (lo, hi) = (a.min(c), a.max(c));
                        // nondecreasing in the first argument, nonincreasing in the second
                        worst = worst.max(h.value(lo, b, 1.0) - h.value(hi, b, 1.0));
                        worst = worst.max(h.value(b, hi, 1.0) - h.value(b, lo, 1.0));
                    }
                }
            }
            CheckResult::new(name, worst, 1e-12)
        }
        "entropy_pairs" => {
            let mut r = rng(5);
            let mut worst: f64 = 0.0;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                for e in test_entropies(&mut r, &p) {
                    for _ in 0..samples / 10 {
                        let (a, b, th) = (uniform(&mut r, m, big_m), uniform(&mut r, m, big_m), r.gen::<f64>());
                        worst = worst.max(e.eta(th * a + (1.0 - th) * b) - th * e.eta(a) - (1.0 - th) * e.eta(b));
                        let kink = e.kinks().unwrap_or(f64::INFINITY);
                        let h = 1e-6;
                        if (a - kink).abs() > 10.0 * h {
                            let fd = (e.q(a + h) - e.q(a - h)) / (2.0 * h);
                            worst = worst.max((fd - e.eta_deriv(a) * p.flux_deriv(a)).abs() - 1e-8 + tol);
                        }
                    }
                }
            }
            CheckResult::new(name, worst, tol)
        }
        "lemma21" => {
            let mut r = rng(6);
            let mut worst = f64::NEG_INFINITY;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                for entropy in [EcEntropy::Square, EcEntropy::Exponential] {
                    let ec = EcFlux::new(&p, entropy);
                    let ents = test_entropies(&mut r, &p);
                    for _ in 0..samples {
                        let (a, b) = (uniform(&mut r, m, big_m), uniform(&mut r, m, big_m));
                        let n = random_n(&mut r);
                        let alpha = random_alpha(&mut r, &p, a.min(b), a.max(b));
                        let u = ec.fan_average_u(a, b, n, alpha).expect("alpha above bound");
                        worst = worst.max(a.min(b) - u).max(u - a.max(b));
                        if entropy == EcEntropy::Square {
                            for e in &ents {
                                let rhs = 0.5 * (e.eta(a) + ec.eta_bar(a, b, e))
                                    - (ec.q_ec(a, b, n, e) - e.q(a) * n) / (2.0 * alpha);
                                worst = worst.max(e.eta(u) - rhs);
                            }
                        }
                    }
                }
            }
            CheckResult::new(name, worst, tol)
        }
        "entropy_mean_bound" => {
            let mut r = rng(7);
            let mut worst = f64::NEG_INFINITY;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                for entropy in [EcEntropy::Square, EcEntropy::Exponential] {
                    let ec = EcFlux::new(&p, entropy);
                    let ents = test_entropies(&mut r, &p);
                    for _ in 0..samples / 2 {
                        let (a, b) = (uniform(&mut r, m, big_m), uniform(&mut r, m, big_m));
                        let beta = ec.beta_coeff(a, b);
                        worst = worst.max(-beta).max(beta - 0.5);
                        for e in &ents {
                            worst = worst.max(ec.eta_bar(a, b, e) - e.eta(a) - 2.0 * beta * (e.eta(b) - e.eta(a)));
                        }
                    }
                }
            }
            CheckResult::new(name, worst, tol)
        }
        "lax_average" => {
            let mut r = rng(8);
            let mut worst = f64::NEG_INFINITY;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                let ec = EcFlux::square(&p);
                let ents = test_entropies(&mut r, &p);
                for _ in 0..samples {
                    let (a, b) = (uniform(&mut r, m, big_m), uniform(&mut r, m, big_m));
                    let n = random_n(&mut r);
                    let alpha = random_alpha(&mut r, &p, a.min(b), a.max(b));
                    let w = ec.lax_average_w(a, b, n, alpha).expect("alpha above bound");
                    worst = worst.max(a.min(b) - w).max(w - a.max(b));
                    for e in &ents {
                        let rhs = 0.5 * (e.eta(a) + e.eta(b)) - (e.q(b) - e.q(a)) * n / (2.0 * alpha);
                        worst = worst.max(e.eta(w) - rhs);
                    }
                }
            }
            CheckResult::new(name, worst, tol)
        }
        "interface_mpp" | "interface_entropy" => {
            let entropy_form = name == "interface_entropy";
            let mut r = rng(if entropy_form { 10 } else { 9 });
            let mut worst = f64::NEG_INFINITY;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                let kinds: &[InterfaceKind] =
                    if entropy_form { &[InterfaceKind::Godunov] } else { &[InterfaceKind::Godunov, InterfaceKind::Rusanov] };
                let ents = test_entropies(&mut r, &p);
                let lf = p.lipschitz_constant(m, big_m);
                for &kind in kinds {
                    let h = InterfaceFlux::new(kind, &p);
                    for _ in 0..samples / kinds.len() {
                        let a = uniform(&mut r, m, big_m);
                        let u = uniform(&mut r, m, big_m);
                        let b = uniform(&mut r, m, big_m);
                        let n = random_n(&mut r);
                        let alpha = lf * uniform(&mut r, 1.0, 3.0);
                        let new = u - (h.value(u, b, n) - h.value(a, u, n)) / (2.0 * alpha);
                        if entropy_form {
                            for e in &ents {
                                let qr = h.godunov_entropy_flux(u, b, n, e);
                                let ql = h.godunov_entropy_flux(a, u, n, e);
                                worst = worst.max(e.eta(new) - e.eta(u) + (qr - ql) / (2.0 * alpha));
                            }
                        } else {
                            worst = worst.max(m - new).max(new - big_m);
                        }
                    }
                }
            }
            CheckResult::new(name, worst, tol)
        }
        "dhec_bound" => {
            let mut r = rng(11);
            let mut worst = f64::NEG_INFINITY;
            for p in flux_problems() {
                let (m, big_m) = p.bounds;
                let ec = EcFlux::square(&p);
                let bound = p.lipschitz_constant(m, big_m) * ec.l_u(m, big_m);
                for _ in 0..samples {
                    let (a, b) = (uniform(&mut r, m, big_m), uniform(&mut r, m, big_m));
                    let n = random_n(&mut r);
                    let h = 1e-6;
                    let fd = (ec.h_ec(a + h, b, n) - ec.h_ec(a - h, b, n)) / (2.0 * h);
                    worst = worst.max(fd.abs() - bound);
                }
            }
            CheckResult::new(name, worst, 1e-6)
        }
        "time_entropy" => CheckResult::new(name, time_entropy_sweep(samples), tol),
        _ => return None,
    };
    Some(result)
}

/// Temporal entropy inequality of the space-time scheme without viscosity:
/// `sum_r v(U^r) T^r >= theta(U^q) - theta(U_prev)` for random nodal
/// histories. Returns the largest violation.
fn time_entropy_sweep(samples: usize) -> f64 {
    let mut r = rng(12);
    let mut worst = f64::NEG_INFINITY;
    let p = make_problem(1).expect("problem 1");
    for entropy in [EcEntropy::Square, EcEntropy::Exponential] {
        let ec = EcFlux::new(&p, entropy);
        for q in 1..=4 {
            let tb = LobattoBasis::new(q).expect("valid degree");
            let qt = tb.qmat();
            for _ in 0..samples / 8 {
                let u: Vec<f64> = (0..=q).map(|_| uniform(&mut r, -2.0, 2.0)).collect();
                let prev = uniform(&mut r, -2.0, 2.0);
                let mut sum = 0.0;
                for rr in 0..=q {
                    let mut t = 0.0;
                    for mm in 0..=q {
                        t += 2.0 * qt[(rr, mm)] * ec.u_ec(u[rr], u[mm]);
                    }
                    if rr == 0 {
                        t += u[0] - prev;
                    }
                    sum += entropy.v(u[rr]) * t;
                }
                let rhs = entropy.theta(u[q]) - entropy.theta(prev);
                worst = worst.max((rhs - sum) / (1.0 + rhs.abs()));
            }
        }
    }
    worst
}

/// Scheme and degrees used for problem `id` in the benchmark table.
pub fn table_scheme(id: u8) -> (SchemeKind, usize, Option<usize>, f64) {
    match id {
        2 => (SchemeKind::BackwardEuler, 3, None, 1e3),
        _ => (SchemeKind::SpaceTime, 3, Some(3), 1.0),
    }
}

/// Discretization of problem `id` at the benchmark parameters on `n_cells`.
pub fn table_discretization(id: u8, n_cells: usize) -> Result<(Discretization, SchemeKind, SolverConfig)> {
    let problem = make_problem(id)?;
    let (kind, p, q, cfl) = table_scheme(id);
    let grid = Grid1D::unit(n_cells, &problem)?;
    let disc = Discretization::new(&problem, grid, p, q, InterfaceKind::Godunov, EcEntropy::Square)?;
    let cfg = SolverConfig { cfl, ..SolverConfig::default() };
    Ok((disc, kind, cfg))
}

/// Benchmark run of problem `id` with full viscosity at 40 cells.
pub fn table_run(id: u8) -> Result<(Discretization, RunReport)> {
    let (disc, kind, cfg) = table_discretization(id, 40)?;
    let report = advance(&disc, kind, &cfg)?;
    Ok((disc, report))
}

/// Entropies checked on every benchmark run.
pub fn run_entropies(flux: Flux) -> Vec<(String, EntropyPair)> {
    let mut v = vec![("square".to_string(), square_entropy(flux))];
    for k in [-0.5, 0.0, 0.5] {
        v.push((format!("kruzkov({k})"), EntropyPair { kind: EntropyKind::Kruzkov(k), flux }));
    }
    v
}

/// Bound, entropy and conservation checks of one recorded run.
pub fn run_checks(id: u8, disc: &Discretization, report: &RunReport) -> Vec<CheckResult> {
    let (m, big_m) = disc.problem.bounds;
    let mpp = check_mpp(report, m, big_m, 1e-9);
    let mut out = vec![CheckResult { name: format!("problem{id}_mpp"), pass: mpp.pass, worst: mpp.worst }];
    for (label, e) in run_entropies(disc.problem.flux) {
        let c = check_entropy_cells(disc, report, &e, 1e-9);
        out.push(CheckResult { name: format!("problem{id}_entropy_{label}"), pass: c.pass, worst: c.max_scaled });
    }
    let drift = check_conservation(disc, report);
    let tol = if disc.grid.is_periodic() { 1e-10 } else { 1e-9 };
    out.push(CheckResult::new(format!("problem{id}_conservation"), drift, tol));
    if let Some(converged) = report.steady_converged {
        out.push(CheckResult {
            name: format!("problem{id}_steady"),
            pass: converged,
            worst: report.steps.len() as f64,
        });
    }
    out
}
