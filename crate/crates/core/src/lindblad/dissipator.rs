use num_complex::Complex64;

use crate::model::{CMatrix8, JumpOperator, NvModel};

const HALF: Complex64 = Complex64::new(0.5, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// `Σ_j L_j ρ L_j† − ½{L_j†L_j, ρ}`.
pub fn apply_dissipator<'a>(
    rho: &CMatrix8,
    jumps: impl IntoIterator<Item = &'a JumpOperator>,
) -> CMatrix8 {
    let mut out = CMatrix8::zeros();
    for jump in jumps {
        let l = jump.matrix();
        let ld = l.adjoint();
        let ldl = ld * l;
        out += l * rho * ld - (ldl * rho + rho * ldl) * HALF;
    }
    out
}

/// Heisenberg-picture dual: `Σ_j L_j† A L_j − ½{L_j†L_j, A}`.
pub fn apply_adjoint_dissipator<'a>(
    a: &CMatrix8,
    jumps: impl IntoIterator<Item = &'a JumpOperator>,
) -> CMatrix8 {
    let mut out = CMatrix8::zeros();
    for jump in jumps {
        let l = jump.matrix();
        let ld = l.adjoint();
        let ldl = ld * l;
        out += ld * a * l - (ldl * a + a * ldl) * HALF;
    }
    out
}

/// Master-equation right-hand side `−i[H, ρ] + D_p(ρ) + Σ_i D_d^i(ρ)`; the
/// pump term is dropped when the laser is off.
pub fn rhs(rho: &CMatrix8, model: &NvModel, laser_on: bool) -> CMatrix8 {
    let h = model.hamiltonian();
    let commutator = h * rho - rho * h;
    commutator * MINUS_I + apply_dissipator(rho, model.active(laser_on))
}
