//! Exact state-vector simulation primitives.
//!
//! [`state`] provides named-register states with local operators, controls,
//! and register surgery; [`walk`] provides the bipartite quantum walk whose
//! powers realize Chebyshev polynomials of H = A/d. This module root adds
//! the two Hamiltonian-evolution primitives the Fourier solver consumes:
//! exact evolution e^{−iAt} through the cached eigendecomposition, and
//! controlled integer powers Σ_i |i⟩⟨i| ⊗ Yⁱ of an arbitrary unitary.

pub mod state;
pub mod walk;

pub use state::{Ctrl, Layout, ProjectedState, QuantumState, NORM_TOL};
pub use walk::WalkOperator;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::linalg::{cx, C64};
use crate::problem::SparseHermitianInstance;

/// e^{−iAt} = V e^{−iΛt} V† from the instance's cached eigendecomposition,
/// exact to machine precision. The ledger records one evolution use and |t|
/// of evolution time, supporting both "number of simulations" and
/// "time-weighted" cost views.
pub fn exact_evolution(
    inst: &SparseHermitianInstance,
    t: f64,
    ledger: &mut CostLedger,
) -> DMatrix<C64> {
    ledger.evolution_uses += 1;
    ledger.evolution_time_total += t.abs();
    inst.eigen().matrix_fn(|lam| cx(0.0, -lam * t).exp())
}

/// Σ_i |i⟩⟨i| ⊗ Yⁱ on (ctrl, target): one controlled application of Y^(2^j)
/// per control bit j, the powers built by repeated squaring. Cost is
/// logarithmic in the control dimension, matching the binary-decomposition
/// circuit this simulates.
pub fn controlled_power_apply(
    state: &mut QuantumState,
    ctrl: &str,
    target: &str,
    y: &DMatrix<C64>,
) -> Result<()> {
    let d_ctrl = state.layout().reg_dim(ctrl)?;
    let d_t = state.layout().reg_dim(target)?;
    if y.nrows() != d_t || y.ncols() != d_t {
        return Err(Error::Layout(format!(
            "operator is {}x{}, target register '{target}' has dimension {d_t}",
            y.nrows(),
            y.ncols()
        )));
    }
    if d_ctrl <= 1 {
        return Ok(()); // only i = 0 is representable, and Y^0 = I
    }
    let bits = usize::BITS - (d_ctrl - 1).leading_zeros();
    let mut pow = y.clone();
    for bit in 0..bits {
        state.apply_local(&[target], &pow, &[Ctrl::Bit(ctrl, bit)])?;
        if bit + 1 < bits {
            pow = &pow * &pow;
        }
    }
    Ok(())
}

/// Σ_{i,j} |i,j⟩⟨i,j| ⊗ Y^(i·j) on (ctrl_a, ctrl_b, target): the product
/// i·j is written reversibly into a scratch register (modular addition on a
/// fresh |0⟩), consumed by [`controlled_power_apply`], and uncomputed, so
/// the scratch register leaves no entanglement behind.
pub fn controlled_product_power_apply(
    state: &mut QuantumState,
    ctrl_a: &str,
    ctrl_b: &str,
    target: &str,
    y: &DMatrix<C64>,
) -> Result<()> {
    let da = state.layout().reg_dim(ctrl_a)?;
    let db = state.layout().reg_dim(ctrl_b)?;
    let dp = (da - 1) * (db - 1) + 1;
    let scratch = "__power_product";
    state.add_register(scratch, dp)?;
    state.apply_register_permutation(&[ctrl_a, ctrl_b, scratch], |v| {
        vec![v[0], v[1], (v[2] + v[0] * v[1]) % dp]
    })?;
    let powered = controlled_power_apply(state, scratch, target, y);
    state.apply_register_permutation(&[ctrl_a, ctrl_b, scratch], |v| {
        vec![v[0], v[1], (v[2] + dp - v[0] * v[1] % dp) % dp]
    })?;
    state.remove_register(scratch)?;
    powered
}
