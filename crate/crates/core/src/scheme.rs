//! Residuals and exact Jacobians of the backward Euler and space-time schemes.

use crate::basis::LobattoBasis;
use crate::grid::{Field, Grid1D};
use crate::linalg::BlockTridiag;
use crate::physics::Problem;
use crate::twopoint::{EcEntropy, EcFlux, InterfaceFlux, InterfaceKind};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    BackwardEuler,
    SpaceTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscosityMode {
    None,
    #[default]
    Full,
    Adaptive,
}

/// Graph viscosity coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityConfig {
    pub mode: ViscosityMode,
    /// Space coefficient `d_kappa`, shared by all cells.
    pub d_space: f64,
    /// Time coefficient `d_n` of the space-time scheme.
    pub d_time: f64,
    /// Per-cell multipliers in `[0, 1]`, used in adaptive mode.
    pub multipliers: Vec<f64>,
}

impl ViscosityConfig {
    pub fn none() -> Self {
        Self { mode: ViscosityMode::None, d_space: 0.0, d_time: 0.0, multipliers: Vec::new() }
    }

    fn scale(&self, c: usize) -> f64 {
        match self.mode {
            ViscosityMode::None => 0.0,
            ViscosityMode::Full => 1.0,
            ViscosityMode::Adaptive => self.multipliers.get(c).copied().unwrap_or(1.0),
        }
    }

    /// Effective space coefficient in cell `c`.
    pub fn space_coeff(&self, c: usize) -> f64 {
        self.d_space * self.scale(c)
    }

    /// Effective time coefficient in cell `c`.
    pub fn time_coeff(&self, c: usize) -> f64 {
        self.d_time * self.scale(c)
    }
}

/// Unknowns of one space-time slab.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabState {
    /// Solution at the time nodes `t_n^r`, `r = 0..=q`.
    pub levels: Vec<Field>,
    /// Solution at the end of the previous slab.
    pub prev: Field,
    pub dt: f64,
}

impl SlabState {
    /// Slab whose levels all equal `prev`.
    pub fn constant_extension(prev: &Field, n_levels: usize, dt: f64) -> Self {
        Self { levels: vec![prev.clone(); n_levels], prev: prev.clone(), dt }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Flattened unknowns, cell-major then level then node.
    pub fn unknowns(&self) -> Vec<f64> {
        let nc = self.prev.n_cells();
        let np = self.prev.n_nodes();
        let nq = self.n_levels();
        let mut x = Vec::with_capacity(nc * nq * np);
        for c in 0..nc {
            for level in &self.levels {
                x.extend_from_slice(level.cell(c));
            }
        }
        debug_assert_eq!(x.len(), nc * nq * np);
        x
    }

    pub fn set_unknowns(&mut self, x: &[f64]) {
        let np = self.prev.n_nodes();
        let nq = self.n_levels();
        for c in 0..self.prev.n_cells() {
            for (r, level) in self.levels.iter_mut().enumerate() {
                let off = (c * nq + r) * np;
                level.cell_mut(c).copy_from_slice(&x[off..off + np]);
            }
        }
    }
}

/// Everything needed to evaluate the discrete operators of one run.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Problem,
    pub grid: Grid1D,
    pub basis: LobattoBasis,
    pub time_basis: Option<LobattoBasis>,
    pub ec: EcFlux,
    pub iface: InterfaceFlux,
    /// Lipschitz bound of the flux on the problem bounds.
    pub lipschitz: f64,
    pub l_u: f64,
}

impl Discretization {
    /// Space degree `p`; time degree `q` for the space-time scheme.
    pub fn new(
        problem: &Problem,
        grid: Grid1D,
        p: usize,
        q: Option<usize>,
        iface: InterfaceKind,
        entropy: EcEntropy,
    ) -> Result<Self> {
        let basis = LobattoBasis::new(p)?;
        let time_basis = match q {
            Some(0) => {
                return Err(Error::InvalidConfig("the space-time scheme needs q >= 1".into()))
            }
            Some(q) => Some(LobattoBasis::new(q)?),
            None => None,
        };
        let (m, big_m) = problem.bounds;
        let ec = EcFlux::new(problem, entropy);
        Ok(Self {
            problem: problem.clone(),
            grid,
            basis,
            time_basis,
            l_u: ec.l_u(m, big_m),
            ec,
            iface: InterfaceFlux::new(iface, problem),
            lipschitz: problem.lipschitz_constant(m, big_m),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.basis.len()
    }

    pub fn n_levels(&self) -> usize {
        self.time_basis.as_ref().map_or(1, |b| b.len())
    }

    fn time_basis(&self) -> &LobattoBasis {
        self.time_basis.as_ref().expect("space-time operator needs a time basis")
    }

    /// Coefficients that make the scheme bound preserving.
    pub fn full_viscosity(&self) -> ViscosityConfig {
        let ratio = self.basis.max_offdiag_ratio();
        let d_space = match self.ec.entropy() {
            EcEntropy::Square => 2.0 * self.lipschitz * ratio,
            _ => 4.0 * self.lipschitz * self.l_u * ratio,
        };
        let d_time = self
            .time_basis
            .as_ref()
            .map_or(0.0, |tb| 2.0 * self.l_u * tb.max_offdiag_ratio());
        ViscosityConfig { mode: ViscosityMode::Full, d_space, d_time, multipliers: Vec::new() }
    }

    pub fn viscosity(&self, mode: ViscosityMode) -> ViscosityConfig {
        match mode {
            ViscosityMode::None => ViscosityConfig::none(),
            ViscosityMode::Full => self.full_viscosity(),
            ViscosityMode::Adaptive => ViscosityConfig {
                mode,
                multipliers: vec![1.0; self.grid.n_cells],
                ..self.full_viscosity()
            },
        }
    }

    /// Exterior traces `(left, right)` of cell `c`.
    pub fn traces(&self, u: &Field, c: usize) -> (f64, f64) {
        use crate::grid::{neighbor_trace, Side};
        (neighbor_trace(u, &self.grid, c, Side::Left), neighbor_trace(u, &self.grid, c, Side::Right))
    }

    /// Interface flux values `h(u_left, u_right, +1)` on the `n + 1` faces.
    pub fn face_fluxes(&self, u: &Field) -> Vec<f64> {
        let n = self.grid.n_cells;
        let p = self.n_nodes() - 1;
        let mut out = Vec::with_capacity(n + 1);
        let (left0, _) = self.traces(u, 0);
        out.push(self.iface.value(left0, u.get(0, 0), 1.0));
        for c in 0..n {
            let (_, right) = self.traces(u, c);
            out.push(self.iface.value(u.get(c, p), right, 1.0));
        }
        out
    }

    /// Volume and face terms of one cell; viscosity added when `d > 0`.
    fn cell_operator(&self, cell: &[f64], left: f64, right: f64, d: f64, out: &mut [f64]) {
        let np = cell.len();
        let p = np - 1;
        let q = self.basis.qmat();
        let flux = &self.problem.flux;
        out.fill(0.0);
        for i in 0..np {
            out[i] += 2.0 * q[(i, i)] * flux.eval(cell[i]);
            for k in i + 1..np {
                let h = self.ec.h_ec(cell[i], cell[k], 1.0);
                out[i] += 2.0 * q[(i, k)] * h;
                out[k] += 2.0 * q[(k, i)] * h;
            }
        }
        out[p] += self.iface.value(cell[p], right, 1.0) - flux.eval(cell[p]);
        out[0] += self.iface.value(cell[0], left, -1.0) + flux.eval(cell[0]);
        if d > 0.0 {
            let w = self.basis.weights();
            for i in 0..np {
                let mut s = 0.0;
                for k in 0..np {
                    s += 0.5 * w[k] * (cell[i] - cell[k]);
                }
                out[i] += d * w[i] * s;
            }
        }
    }

    /// Jacobian of [`Self::cell_operator`]: the cell block and the
    /// derivatives of the last and first rows with respect to the exterior
    /// traces.
    fn cell_operator_jacobian(&self, cell: &[f64], left: f64, right: f64, d: f64) -> (DMatrix<f64>, f64, f64) {
        let np = cell.len();
        let p = np - 1;
        let q = self.basis.qmat();
        let flux = &self.problem.flux;
        let mut jac = DMatrix::zeros(np, np);
        for i in 0..np {
            jac[(i, i)] += 2.0 * q[(i, i)] * flux.deriv(cell[i]);
            for k in i + 1..np {
                let (_, da, db) = self.ec.h_ec_with_grad(cell[i], cell[k]);
                // h(U_i, U_k) in row i and h(U_k, U_i) = h(U_i, U_k) in row k
                jac[(i, i)] += 2.0 * q[(i, k)] * da;
                jac[(i, k)] += 2.0 * q[(i, k)] * db;
                jac[(k, i)] += 2.0 * q[(k, i)] * da;
                jac[(k, k)] += 2.0 * q[(k, i)] * db;
            }
        }
        let (_, da, d_right) = self.iface.value_with_grad(cell[p], right, 1.0);
        jac[(p, p)] += da - flux.deriv(cell[p]);
        let (_, da, d_left) = self.iface.value_with_grad(cell[0], left, -1.0);
        jac[(0, 0)] += da + flux.deriv(cell[0]);
        if d > 0.0 {
            let w = self.basis.weights();
            for i in 0..np {
                for k in 0..np {
                    if k != i {
                        jac[(i, i)] += d * w[i] * 0.5 * w[k];
                        jac[(i, k)] -= d * w[i] * 0.5 * w[k];
                    }
                }
            }
        }
        (jac, d_left, d_right)
    }

    fn assemble_cells(&self, u: &Field, d: impl Fn(usize) -> f64 + Sync) -> Vec<f64> {
        let np = self.n_nodes();
        let mut out = vec![0.0; u.as_slice().len()];
        out.par_chunks_mut(np).enumerate().for_each(|(c, chunk)| {
            let (l, r) = self.traces(u, c);
            self.cell_operator(u.cell(c), l, r, d(c), chunk);
        });
        out
    }

    /// Spatial residual `R_c^i` without viscosity.
    pub fn space_residual(&self, u: &Field) -> Vec<f64> {
        self.assemble_cells(u, |_| 0.0)
    }

    /// Graph viscosity `V_c^i = d_c w_i sum_k (w_k / 2)(U_c^i - U_c^k)`.
    pub fn graph_viscosity(&self, u: &Field, cfg: &ViscosityConfig) -> Vec<f64> {
        let np = self.n_nodes();
        let w = self.basis.weights();
        let mut out = vec![0.0; u.as_slice().len()];
        for c in 0..u.n_cells() {
            let d = cfg.space_coeff(c);
            let cell = u.cell(c);
            for i in 0..np {
                let s: f64 = (0..np).map(|k| 0.5 * w[k] * (cell[i] - cell[k])).sum();
                out[c * np + i] = d * w[i] * s;
            }
        }
        out
    }

    /// `R + V`.
    pub fn spatial_operator(&self, u: &Field, cfg: &ViscosityConfig) -> Vec<f64> {
        self.assemble_cells(u, |c| cfg.space_coeff(c))
    }

    /// Slab guess from forward Euler extrapolation of `u` to each time node.
    pub fn st_predictor(&self, u: &Field, dt: f64, cfg: &ViscosityConfig) -> SlabState {
        let np = self.n_nodes();
        let w = self.basis.weights();
        let jac = self.grid.jacobian();
        let rhs = self.spatial_operator(u, cfg);
        let mut slab = SlabState::constant_extension(u, self.n_levels(), dt);
        for (level, &t) in slab.levels.iter_mut().zip(self.time_basis().nodes()) {
            let tau = 0.5 * (1.0 + t);
            for (k, v) in level.as_mut_slice().iter_mut().enumerate() {
                *v -= tau * dt * rhs[k] / (w[k % np] * jac);
            }
        }
        slab
    }

    /// Backward Euler residual `w_i J (U_new - U_old) / dt + R(U_new) + V(U_new)`.
    pub fn be_residual(&self, unew: &Field, uold: &Field, dt: f64, cfg: &ViscosityConfig) -> Vec<f64> {
        let np = self.n_nodes();
        let jac = self.grid.jacobian();
        let w = self.basis.weights();
        let mut out = self.spatial_operator(unew, cfg);
        for (k, v) in out.iter_mut().enumerate() {
            let i = k % np;
            *v += w[i] * jac * (unew.as_slice()[k] - uold.as_slice()[k]) / dt;
        }
        out
    }

    /// Jacobian of [`Self::be_residual`] with respect to `unew`.
    pub fn be_jacobian(&self, unew: &Field, dt: f64, cfg: &ViscosityConfig) -> BlockTridiag {
        let n = self.grid.n_cells;
        let np = self.n_nodes();
        let p = np - 1;
        let jac = self.grid.jacobian();
        let w = self.basis.weights();
        let blocks: Vec<_> = (0..n)
            .into_par_iter()
            .map(|c| {
                let (l, r) = self.traces(unew, c);
                let (mut b, dl, dr) = self.cell_operator_jacobian(unew.cell(c), l, r, cfg.space_coeff(c));
                for i in 0..np {
                    b[(i, i)] += w[i] * jac / dt;
                }
                (b, dl, dr)
            })
            .collect();
        let mut m = BlockTridiag::zeros(n, np, self.grid.is_periodic());
        for (c, (b, dl, dr)) in blocks.into_iter().enumerate() {
            m.diag[c] = b;
            if c > 0 || self.grid.is_periodic() {
                m.lower[c][(0, p)] = dl;
            }
            if c + 1 < n || self.grid.is_periodic() {
                m.upper[c][(p, 0)] = dr;
            }
        }
        m
    }

    /// Time term `T_c^{i,r}` of the space-time scheme, cell-major then level
    /// then node.
    pub fn st_time_term(&self, slab: &SlabState, cfg: &ViscosityConfig) -> Vec<f64> {
        let tb = self.time_basis();
        let qt = tb.qmat();
        let wt = tb.weights();
        let nq = tb.len();
        let np = self.n_nodes();
        let nc = self.grid.n_cells;
        let mut out = vec![0.0; nc * nq * np];
        for c in 0..nc {
            let dn = cfg.time_coeff(c);
            for i in 0..np {
                for r in 0..nq {
                    let ur = slab.levels[r].get(c, i);
                    let mut t = 0.0;
                    for m in 0..nq {
                        let um = slab.levels[m].get(c, i);
                        t += 2.0 * qt[(r, m)] * self.ec.u_ec(ur, um);
                        t += dn * wt[r] * wt[m] * (ur - um);
                    }
                    if r == 0 {
                        t += ur - slab.prev.get(c, i);
                    }
                    out[(c * nq + r) * np + i] = t;
                }
            }
        }
        out
    }

    /// Space-time residual `w_i J T^r + (w_r dt / 2)(R + V)(U(t^r))`.
    pub fn st_residual(&self, slab: &SlabState, cfg: &ViscosityConfig) -> Vec<f64> {
        let tb = self.time_basis();
        let wt = tb.weights();
        let nq = tb.len();
        let np = self.n_nodes();
        let w = self.basis.weights();
        let jac = self.grid.jacobian();
        let mut out = self.st_time_term(slab, cfg);
        for (k, v) in out.iter_mut().enumerate() {
            *v *= w[k % np] * jac;
        }
        for r in 0..nq {
            let sp = self.spatial_operator(&slab.levels[r], cfg);
            let s = 0.5 * wt[r] * slab.dt;
            for c in 0..self.grid.n_cells {
                for i in 0..np {
                    out[(c * nq + r) * np + i] += s * sp[c * np + i];
                }
            }
        }
        out
    }

    /// Jacobian of [`Self::st_residual`] with respect to the slab levels.
    pub fn st_jacobian(&self, slab: &SlabState, cfg: &ViscosityConfig) -> BlockTridiag {
        let tb = self.time_basis();
        let qt = tb.qmat();
        let wt = tb.weights();
        let nq = tb.len();
        let np = self.n_nodes();
        let p = np - 1;
        let bs = nq * np;
        let n = self.grid.n_cells;
        let w = self.basis.weights();
        let jac = self.grid.jacobian();
        let periodic = self.grid.is_periodic();
        let blocks: Vec<_> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut b = DMatrix::zeros(bs, bs);
                let mut dls = vec![0.0; nq];
                let mut drs = vec![0.0; nq];
                let dn = cfg.time_coeff(c);
                // time coupling, node by node
                for i in 0..np {
                    let scale = w[i] * jac;
                    for r in 0..nq {
                        let row = r * np + i;
                        let ur = slab.levels[r].get(c, i);
                        for m in 0..nq {
                            let um = slab.levels[m].get(c, i);
                            let (_, da, db) = self.ec.u_ec_with_grad(ur, um);
                            b[(row, row)] += scale * 2.0 * qt[(r, m)] * da;
                            b[(row, m * np + i)] += scale * 2.0 * qt[(r, m)] * db;
                            if m != r {
                                b[(row, row)] += scale * dn * wt[r] * wt[m];
                                b[(row, m * np + i)] -= scale * dn * wt[r] * wt[m];
                            }
                        }
                        if r == 0 {
                            b[(row, row)] += scale;
                        }
                    }
                }
                // space operator at each level
                for r in 0..nq {
                    let s = 0.5 * wt[r] * slab.dt;
                    let (l, rt) = self.traces(&slab.levels[r], c);
                    let (sb, dl, dr) =
                        self.cell_operator_jacobian(slab.levels[r].cell(c), l, rt, cfg.space_coeff(c));
                    for i in 0..np {
                        for k in 0..np {
                            b[(r * np + i, r * np + k)] += s * sb[(i, k)];
                        }
                    }
                    dls[r] = s * dl;
                    drs[r] = s * dr;
                }
                (b, dls, drs)
            })
            .collect();
        let mut m = BlockTridiag::zeros(n, bs, periodic);
        for (c, (b, dls, drs)) in blocks.into_iter().enumerate() {
            m.diag[c] = b;
            for r in 0..nq {
                if c > 0 || periodic {
                    m.lower[c][(r * np, r * np + p)] = dls[r];
                }
                if c + 1 < n || periodic {
                    m.upper[c][(r * np + p, r * np)] = drs[r];
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{make_problem, BoundaryCondition, FinalTime, Flux, InitialData};

    fn linear_problem() -> Problem {
        Problem::new(
            "advection",
            Flux::Linear { speed: 1.0 },
            InitialData::Sine { offset: 0.0, amplitude: 1.0 },
            BoundaryCondition::Periodic,
            FinalTime::Time(1.0),
        )
    }

    #[test]
    fn constant_state_has_zero_residual() {
        for id in 1..=5 {
            let prob = make_problem(id).unwrap();
            let grid = Grid1D::unit(6, &prob).unwrap();
            let disc = Discretization::new(&prob, grid, 3, Some(2), InterfaceKind::Godunov, EcEntropy::Square).unwrap();
            let v = match prob.dirichlet() {
                Some((l, r)) if l == r => l,
                Some(_) => continue,
                None => 0.3,
            };
            let u = Field::constant(6, 4, v);
            let cfg = disc.full_viscosity();
            for r in disc.space_residual(&u) {
                assert!(r.abs() < 1e-14);
            }
            for r in disc.be_residual(&u, &u, 0.1, &cfg) {
                assert!(r.abs() < 1e-14);
            }
            let slab = SlabState::constant_extension(&u, 3, 0.1);
            for r in disc.st_residual(&slab, &cfg) {
                assert!(r.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn viscosity_hand_example() {
        let prob = linear_problem();
        let grid = Grid1D::unit(2, &prob).unwrap();
        let disc = Discretization::new(&prob, grid, 1, None, InterfaceKind::Godunov, EcEntropy::Square).unwrap();
        let cfg = ViscosityConfig { mode: ViscosityMode::Full, d_space: 1.0, d_time: 0.0, multipliers: vec![] };
        let u = Field::from_vec(2, 2, vec![0.0, 1.0, 0.0, 0.0]);
        let v = disc.graph_viscosity(&u, &cfg);
        assert_eq!(&v[..2], &[-0.5, 0.5]);
        assert_eq!(&v[2..], &[0.0, 0.0]);
    }
}
