//! Modal troubled-cell indicator and the viscosity multiplier it drives.

use crate::basis::LobattoBasis;
use crate::grid::Field;

/// Value returned for cells without top-mode energy.
pub const SMOOTH_SENTINEL: f64 = -300.0;

/// Indicator values and multipliers for every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorState {
    pub s_values: Vec<f64>,
    pub s_threshold: f64,
    pub multipliers: Vec<f64>,
}

/// Threshold `S0 = -4 log10(2p)`.
pub fn threshold(p: usize) -> f64 {
    -4.0 * (2.0 * p as f64).log10()
}

/// `log10` of the fraction of the discrete L2 energy carried by the top
/// Legendre mode of cell `c`.
pub fn smoothness(field: &Field, basis: &LobattoBasis, c: usize) -> f64 {
    let coeffs = basis.modal_coefficients(field.cell(c));
    let p = basis.degree();
    let total: f64 = coeffs.iter().enumerate().map(|(n, a)| a * a * basis.modal_norm(n)).sum();
    let top = coeffs[p] * coeffs[p] * basis.modal_norm(p);
    let floor = 64.0 * f64::EPSILON;
    if total <= 0.0 || top <= floor * floor * total {
        return SMOOTH_SENTINEL;
    }
    (top / total).log10()
}

/// Smooth switch from 0 below `s0 - 0.1` to 1 above `s0 + 0.1`.
pub fn multiplier(s: f64, s0: f64) -> f64 {
    if s < s0 - 0.1 {
        0.0
    } else if s > s0 + 0.1 {
        1.0
    } else {
        0.5 + 0.5 * (5.0 * std::f64::consts::PI * (s - s0)).sin()
    }
}

/// Indicator state of `field`, used frozen during the next implicit solve.
pub fn update_multipliers(field: &Field, basis: &LobattoBasis) -> IndicatorState {
    let s0 = threshold(basis.degree());
    let s_values: Vec<f64> = (0..field.n_cells()).map(|c| smoothness(field, basis, c)).collect();
    let multipliers = s_values.iter().map(|&s| multiplier(s, s0)).collect();
    IndicatorState { s_values, s_threshold: s0, multipliers }
}
