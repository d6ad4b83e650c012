//! Gauss–Lobatto quadrature, nodal Lagrange operators and Legendre transforms.
//!
//! The same [`LobattoBasis`] is used for the space discretization (degree `p`)
//! and for the time discretization of the space-time scheme (degree `q`).

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 12;

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k+1) P_k
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Nodal Gauss–Lobatto basis of degree `p` on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct LobattoBasis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    deriv: DMatrix<f64>,
    qmat: DMatrix<f64>,
    /// `vandermonde[(k, n)] = P_n(xi_k)`
    vandermonde: DMatrix<f64>,
    /// Maps nodal values to Legendre modal coefficients.
    legendre_vandermonde: DMatrix<f64>,
    /// Discrete squared norms `sum_k w_k P_n(xi_k)^2`.
    modal_norms: Vec<f64>,
}

impl LobattoBasis {
    /// Builds nodes, weights and operators for `1 <= p <= 12`.
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_DEGREE {
            return Err(Error::InvalidDegree(p));
        }
        let nodes = lobatto_nodes(p);
        let pf = p as f64;
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let (lp, _) = legendre(p, x);
                2.0 / (pf * (pf + 1.0) * lp * lp)
            })
            .collect();

        // barycentric weights for the nodal interpolant
        let bary: Vec<f64> = (0..=p)
            .map(|j| {
                let prod: f64 = (0..=p)
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product();
                1.0 / prod
            })
            .collect();

        let n = p + 1;
        let mut deriv = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut diag = 0.0;
            for l in 0..n {
                if l != k {
                    let v = (bary[l] / bary[k]) / (nodes[k] - nodes[l]);
                    deriv[(k, l)] = v;
                    diag -= v;
                }
            }
            deriv[(k, k)] = diag;
        }
        // exact diagonal corners, D_00 = -p(p+1)/4 = -D_pp
        deriv[(0, 0)] = -pf * (pf + 1.0) / 4.0;
        deriv[(p, p)] = pf * (pf + 1.0) / 4.0;

        let mut qmat = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in 0..n {
                qmat[(k, l)] = weights[k] * deriv[(k, l)];
            }
        }

        let mut vandermonde = DMatrix::zeros(n, n);
        for k in 0..n {
            for m in 0..n {
                vandermonde[(k, m)] = legendre(m, nodes[k]).0;
            }
        }
        let modal_norms: Vec<f64> = (0..n)
            .map(|m| (0..n).map(|k| weights[k] * vandermonde[(k, m)].powi(2)).sum())
            .collect();
        let mut legendre_vandermonde = DMatrix::zeros(n, n);
        for m in 0..n {
            for k in 0..n {
                legendre_vandermonde[(m, k)] = weights[k] * vandermonde[(k, m)] / modal_norms[m];
            }
        }

        Ok(Self {
            degree: p,
            nodes,
            weights,
            bary,
            deriv,
            qmat,
            vandermonde,
            legendre_vandermonde,
            modal_norms,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, `p + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `D[(k, l)] = l_l'(xi_k)`
    pub fn deriv(&self) -> &DMatrix<f64> {
        &self.deriv
    }

    /// `Q[(k, l)] = w_k D[(k, l)]`
    pub fn qmat(&self) -> &DMatrix<f64> {
        &self.qmat
    }

    pub fn legendre_vandermonde(&self) -> &DMatrix<f64> {
        &self.legendre_vandermonde
    }

    /// Nodal values of `P_n` at the Lobatto nodes.
    pub fn legendre_at_nodes(&self, n: usize) -> Vec<f64> {
        self.vandermonde.column(n).iter().copied().collect()
    }

    /// Discrete (Gauss–Lobatto) squared norm of `P_n`.
    pub fn modal_norm(&self, n: usize) -> f64 {
        self.modal_norms[n]
    }

    /// Evaluates the nodal interpolant of `values` at `xi` (barycentric form).
    pub fn lagrange_eval(&self, values: &[f64], xi: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, (&x, &v)) in self.nodes.iter().zip(values).enumerate() {
            let diff = xi - x;
            if diff == 0.0 {
                return v;
            }
            let w = self.bary[k] / diff;
            num += w * v;
            den += w;
        }
        num / den
    }

    /// Legendre coefficients `c_n` such that `sum_n c_n P_n` interpolates `values`.
    pub fn modal_coefficients(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.len());
        (0..self.len())
            .map(|m| {
                (0..self.len())
                    .map(|k| self.legendre_vandermonde[(m, k)] * values[k])
                    .sum()
            })
            .collect()
    }

    /// Largest off-diagonal ratio `|D_kl| / w`, taken over both `w_k` and `w_l`.
    pub fn max_offdiag_ratio(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                if k != l {
                    let d = self.deriv[(k, l)].abs();
                    best = best.max(d / self.weights[k]).max(d / self.weights[l]);
                }
            }
        }
        best
    }

    /// Test hook: overwrite one entry of `D` (and the matching `Q` entry).
    pub fn corrupt_deriv_entry(&mut self, k: usize, l: usize, delta: f64) {
        self.deriv[(k, l)] += delta;
        self.qmat[(k, l)] = self.weights[k] * self.deriv[(k, l)];
    }
}

/// Lobatto nodes: endpoints plus the roots of `P_p'`, by safeguarded Newton
/// iteration from Chebyshev–Gauss–Lobatto guesses.
fn lobatto_nodes(p: usize) -> Vec<f64> {
    let pf = p as f64;
    let mut nodes = vec![0.0; p + 1];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    for (k, node) in nodes.iter_mut().enumerate().take(p).skip(1) {
        let guess = -(std::f64::consts::PI * k as f64 / pf).cos();
        *node = polish_lobatto_root(p, guess);
    }
    // enforce exact symmetry
    for k in 0..=p / 2 {
        let s = 0.5 * (nodes[p - k] - nodes[k]);
        nodes[k] = -s;
        nodes[p - k] = s;
    }
    if p.is_multiple_of(2) {
        nodes[p / 2] = 0.0;
    }
    nodes
}

/// Newton on `P_p'`, using `P_p'' = (2x P_p' - p(p+1) P_p) / (1 - x^2)`,
/// with a bisection fallback on a bracket found around the guess.
fn polish_lobatto_root(p: usize, guess: f64) -> f64 {
    let pf = p as f64;
    let dp = |x: f64| legendre(p, x).1;
    // locate a sign-change bracket around the guess
    let h = 0.5 / (pf * pf);
    let (mut lo, mut hi) = (guess - h, guess + h);
    let mut tries = 0;
    while dp(lo) * dp(hi) > 0.0 && tries < 60 {
        lo -= h;
        hi += h;
        tries += 1;
    }
    lo = lo.max(-1.0 + 1e-15);
    hi = hi.min(1.0 - 1e-15);
    let mut x = guess.clamp(lo, hi);
    for _ in 0..100 {
        let (lp, d1) = legendre(p, x);
        let d2 = (2.0 * x * d1 - pf * (pf + 1.0) * lp) / (1.0 - x * x);
        let mut next = x - d1 / d2;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        // shrink the bracket
        if dp(lo) * dp(next) <= 0.0 {
            hi = next;
        } else {
            lo = next;
        }
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, used for the theta-integrals
/// of the entropy-conservative averages.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre(n, z);
            let dz = pn / dpn;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpn) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dpn * dpn);
        // map from [-1, 1] to [0, 1], ascending order
        x[n - 1 - i] = 0.5 * (z + 1.0);
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Cached 32- and 64-point rules.
pub fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(32))
}

pub fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_degree() {
        assert!(matches!(LobattoBasis::new(0), Err(Error::InvalidDegree(0))));
        assert!(LobattoBasis::new(13).is_err());
        assert!(LobattoBasis::new(12).is_ok());
    }

    #[test]
    fn p1_is_trapezoid() {
        let b = LobattoBasis::new(1).unwrap();
        assert_eq!(b.nodes(), &[-1.0, 1.0]);
        assert!((b.weights()[0] - 1.0).abs() < 1e-15);
        assert!((b.weights()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p3_nodes_are_inverse_sqrt5() {
        let b = LobattoBasis::new(3).unwrap();
        let s = 1.0 / 5f64.sqrt();
        let expect = [-1.0, -s, s, 1.0];
        for (x, e) in b.nodes().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15, "{x} vs {e}");
        }
    }

    #[test]
    fn p2_weights_from_monomial_exactness() {
        // Solve sum w_k x_k^j = int x^j for j=0..2 on nodes (-1, 0, 1):
        // w0 + w1 + w2 = 2, -w0 + w2 = 0, w0 + w2 = 2/3  => w0 = w2 = 1/3, w1 = 4/3
        let b = LobattoBasis::new(2).unwrap();
        let expect = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (w, e) in b.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_exact_to_degree_2p_minus_1() {
        for p in 1..=MAX_DEGREE {
            let b = LobattoBasis::new(p).unwrap();
            assert!((b.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * p {
                let q: f64 = b
                    .nodes()
                    .iter()
                    .zip(b.weights())
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "p={p} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn nodes_are_roots_of_lobatto_polynomial() {
        for p in 2..=MAX_DEGREE {
            let b = LobattoBasis::new(p).unwrap();
            for w in b.nodes().windows(2) {
                assert!(w[0] < w[1]);
            }
            for &x in &b.nodes()[1..p] {
                let (_, d) = legendre(p, x);
                // scale by the size of P_p' near the root
                assert!(d.abs() < 1e-12 * (p * p) as f64, "p={p}: P'({x}) = {d}");
            }
        }
    }

    #[test]
    fn sbp_and_sum_identities() {
        for p in 1..=6 {
            let b = LobattoBasis::new(p).unwrap();
            let q = b.qmat();
            for k in 0..=p {
                let row: f64 = (0..=p).map(|l| q[(k, l)]).sum();
                let col: f64 = (0..=p).map(|l| q[(l, k)]).sum();
                let target = if k == p { 1.0 } else { 0.0 } - if k == 0 { 1.0 } else { 0.0 };
                assert!(row.abs() < 1e-13);
                assert!((col - target).abs() < 1e-13);
                for l in 0..=p {
                    let b_kl = if k == p && l == p { 1.0 } else { 0.0 }
                        - if k == 0 && l == 0 { 1.0 } else { 0.0 };
                    assert!((q[(k, l)] + q[(l, k)] - b_kl).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn derivative_matrix_is_exact_for_polynomials() {
        for p in 1..=8 {
            let b = LobattoBasis::new(p).unwrap();
            for deg in 0..=p {
                let vals: Vec<f64> = b.nodes().iter().map(|x| x.powi(deg as i32)).collect();
                for k in 0..=p {
                    let d: f64 = (0..=p).map(|l| b.deriv()[(k, l)] * vals[l]).sum();
                    let exact = if deg == 0 {
                        0.0
                    } else {
                        deg as f64 * b.nodes()[k].powi(deg as i32 - 1)
                    };
                    assert!((d - exact).abs() < 1e-11, "p={p} deg={deg}");
                }
            }
        }
    }

    #[test]
    fn lagrange_eval_examples() {
        let b2 = LobattoBasis::new(2).unwrap();
        let v: Vec<f64> = b2.nodes().iter().map(|x| x * x).collect();
        assert!((b2.lagrange_eval(&v, 0.3) - 0.09).abs() < 1e-15);

        let b3 = LobattoBasis::new(3).unwrap();
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            assert_eq!(b3.lagrange_eval(&e, b3.nodes()[k]), 1.0);
        }
        let cubic: Vec<f64> = b3.nodes().iter().map(|x| x.powi(3)).collect();
        assert!((b3.lagrange_eval(&cubic, 0.5) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn modal_coefficients_examples() {
        let b = LobattoBasis::new(3).unwrap();
        let c = b.modal_coefficients(&[1.0; 4]);
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));

        let lin: Vec<f64> = b.nodes().to_vec();
        let c = b.modal_coefficients(&lin);
        assert!((c[1] - 1.0).abs() < 1e-14);
        assert!(c[0].abs() < 1e-14 && c[2].abs() < 1e-14 && c[3].abs() < 1e-14);
    }

    #[test]
    fn modal_coefficients_match_dense_least_squares() {
        // Oracle: weighted normal equations V^T W V c = V^T W u, solved densely.
        let b = LobattoBasis::new(3).unwrap();
        let u: Vec<f64> = b
            .nodes()
            .iter()
            .map(|x| 0.3 - 1.7 * x + 0.4 * x * x + 2.5 * x * x * x)
            .collect();
        let n = 4;
        let v = DMatrix::from_fn(n, n, |k, m| legendre(m, b.nodes()[k]).0);
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(b.weights()));
        let lhs = v.transpose() * &w * &v;
        let rhs = v.transpose() * &w * nalgebra::DVector::from_column_slice(&u);
        let oracle = lhs.lu().solve(&rhs).unwrap();
        let c = b.modal_coefficients(&u);
        for m in 0..n {
            assert!((c[m] - oracle[m]).abs() < 1e-13);
        }
        // and the expansion reproduces the data
        for (k, &x) in b.nodes().iter().enumerate() {
            let s: f64 = (0..n).map(|m| c[m] * legendre(m, x).0).sum();
            assert!((s - u[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_unit_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(32);
        for deg in [0, 5, 31, 63] {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
