//! Uniform 1D mesh, nodal fields and face connectivity.

use crate::basis::LobattoBasis;
use crate::physics::{BoundaryCondition, Problem};
use crate::{Error, Result};

/// Uniform partition of `[x_left, x_right]`.
///
/// In one dimension the metric products and face normals reduce to the
/// constants `1` and `+-1`; only the Jacobian `J = dx / 2` remains.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n_cells: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub bc: BoundaryCondition,
}

/// Face of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Grid1D {
    pub fn new(n_cells: usize, x_left: f64, x_right: f64, bc: BoundaryCondition) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 cells, got {n_cells}")));
        }
        if x_right <= x_left || !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::InvalidConfig("empty domain".into()));
        }
        Ok(Self { n_cells, x_left, x_right, bc })
    }

    /// Unit-interval grid with the problem's boundary condition.
    pub fn unit(n_cells: usize, problem: &Problem) -> Result<Self> {
        Self::new(n_cells, 0.0, 1.0, problem.bc)
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_cells as f64
    }

    pub fn jacobian(&self) -> f64 {
        0.5 * self.cell_width()
    }

    pub fn cell_left(&self, c: usize) -> f64 {
        self.x_left + self.cell_width() * c as f64
    }

    /// Physical location of node `i` of cell `c`.
    pub fn node_x(&self, basis: &LobattoBasis, c: usize, i: usize) -> f64 {
        self.cell_left(c) + self.jacobian() * (1.0 + basis.nodes()[i])
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.bc, BoundaryCondition::Periodic)
    }
}

/// Nodal values `U_c^i`, stored cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_cells: usize,
    n_nodes: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n_cells: usize, n_nodes: usize) -> Self {
        Self { n_cells, n_nodes, values: vec![0.0; n_cells * n_nodes] }
    }

    pub fn constant(n_cells: usize, n_nodes: usize, v: f64) -> Self {
        Self { n_cells, n_nodes, values: vec![v; n_cells * n_nodes] }
    }

    pub fn from_vec(n_cells: usize, n_nodes: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_cells * n_nodes, "field size mismatch");
        Self { n_cells, n_nodes, values }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn get(&self, c: usize, i: usize) -> f64 {
        self.values[c * self.n_nodes + i]
    }

    pub fn set(&mut self, c: usize, i: usize, v: f64) {
        self.values[c * self.n_nodes + i] = v;
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute nodal difference.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Nodal interpolation of the initial datum.
///
/// A node sitting exactly on a jump of the datum takes the limit from inside
/// its own cell.
pub fn project_initial(grid: &Grid1D, basis: &LobattoBasis, problem: &Problem) -> Field {
    let np = basis.len();
    let mut field = Field::zeros(grid.n_cells, np);
    for c in 0..grid.n_cells {
        for i in 0..np {
            let x = grid.node_x(basis, c, i);
            let v = if i == 0 {
                problem.u0.eval_one_sided(x, true)
            } else if i == np - 1 {
                problem.u0.eval_one_sided(x, false)
            } else {
                problem.u0.eval(x)
            };
            field.set(c, i, v);
        }
    }
    field
}

/// Cell average `1/2 sum_i w_i U_c^i`.
pub fn cell_average(field: &Field, basis: &LobattoBasis, c: usize) -> f64 {
    0.5 * field.cell(c).iter().zip(basis.weights()).map(|(u, w)| u * w).sum::<f64>()
}

/// Exterior trace across the given face of cell `c`.
pub fn neighbor_trace(field: &Field, grid: &Grid1D, c: usize, side: Side) -> f64 {
    let n = grid.n_cells;
    let last = field.n_nodes() - 1;
    match (side, grid.bc) {
        (Side::Left, _) if c > 0 => field.get(c - 1, last),
        (Side::Right, _) if c + 1 < n => field.get(c + 1, 0),
        (Side::Left, BoundaryCondition::Periodic) => field.get(n - 1, last),
        (Side::Right, BoundaryCondition::Periodic) => field.get(0, 0),
        (Side::Left, BoundaryCondition::Dirichlet { left, .. }) => left,
        (Side::Right, BoundaryCondition::Dirichlet { right, .. }) => right,
    }
}

/// Total mass `sum_c |cell| <u>_c`.
pub fn mass(field: &Field, basis: &LobattoBasis, grid: &Grid1D) -> f64 {
    let dx = grid.cell_width();
    (0..field.n_cells()).map(|c| dx * cell_average(field, basis, c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::make_problem;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(1, 0.0, 1.0, BoundaryCondition::Periodic).is_err());
        assert!(Grid1D::new(4, 1.0, 1.0, BoundaryCondition::Periodic).is_err());
    }

    #[test]
    fn cells_tile_the_domain() {
        let g = Grid1D::new(40, 0.0, 1.0, BoundaryCondition::Periodic).unwrap();
        let total: f64 = (0..g.n_cells).map(|_| g.cell_width()).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert_eq!(g.jacobian(), 0.0125);
    }

    #[test]
    fn projection_examples() {
        let b = LobattoBasis::new(3).unwrap();
        let p1 = make_problem(1).unwrap();
        let g = Grid1D::unit(40, &p1).unwrap();
        let f = project_initial(&g, &b, &p1);
        // x = 0.25 is the right end of cell 9
        assert!((g.node_x(&b, 9, 3) - 0.25).abs() < 1e-15);
        assert!((f.get(9, 3) - 1.0).abs() < 1e-15);

        let p2 = make_problem(2).unwrap();
        let f2 = project_initial(&g, &b, &p2);
        for i in 0..4 {
            let x = g.node_x(&b, 20, i);
            assert!((f2.get(20, i) - (1.0 - 2.0 * x)).abs() < 1e-15);
        }

        let p4 = make_problem(4).unwrap();
        let f4 = project_initial(&g, &b, &p4);
        assert_eq!(f4.cell(19), &[1.0; 4]);
        assert_eq!(f4.cell(20), &[0.0; 4]);
    }

    #[test]
    fn averages_and_traces() {
        let b = LobattoBasis::new(3).unwrap();
        let xi: Vec<f64> = b.nodes().to_vec();
        let f = Field::from_vec(1, 4, xi.clone());
        assert!(cell_average(&f, &b, 0).abs() < 1e-15);
        let sq = Field::from_vec(1, 4, xi.iter().map(|x| x * x).collect());
        assert!((cell_average(&sq, &b, 0) - 1.0 / 3.0).abs() < 1e-15);

        let vals: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let field = Field::from_vec(3, 4, vals);
        let per = Grid1D::new(3, 0.0, 1.0, BoundaryCondition::Periodic).unwrap();
        assert_eq!(neighbor_trace(&field, &per, 0, Side::Left), 11.0);
        assert_eq!(neighbor_trace(&field, &per, 2, Side::Right), 0.0);
        assert_eq!(neighbor_trace(&field, &per, 1, Side::Left), 3.0);
        assert_eq!(neighbor_trace(&field, &per, 1, Side::Right), 8.0);
        let dir = Grid1D::new(3, 0.0, 1.0, BoundaryCondition::Dirichlet { left: 1.0, right: -1.0 }).unwrap();
        assert_eq!(neighbor_trace(&field, &dir, 0, Side::Left), 1.0);
        assert_eq!(neighbor_trace(&field, &dir, 2, Side::Right), -1.0);
    }
}
