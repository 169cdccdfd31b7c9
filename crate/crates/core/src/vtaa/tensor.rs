//! Literal tensor-product replay of the variable-time pipeline.
//!
//! The factorized engine in [`super::branch`] claims that per-eigen-branch
//! scalar recursions reproduce the full register algebra exactly.  This
//! module earns that claim: it lays out every register — clock qubits
//! c₁…c_m, the success flag f, one estimate register per stage, the junk
//! qubit q, and the index register — builds each stage as a dense unitary,
//! runs the pipeline, postselects the flag, applies the inverse reference
//! pipeline, and hands back the same observables the factorized engine
//! computes, for the tests to compare at close to machine precision.
//!
//! The estimate registers are the bottleneck (stage j holds r·(j + guard)
//! qubits), so the engine only accepts single-round estimations and a few
//! stages — exactly the regime [`super::configure_with`] shrinks to.  The
//! junk left behind by a flagged inverse lives in a single bucket state
//! |1⟩_q, which is a faithful model: junk is orthogonal to the flagged
//! cell, never touched again, and only its weight is observable.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{cx, HermitianEigen, KahanSum, C64};
use crate::problem::SparseHermitianInstance;
use crate::simcore::{Ctrl, QuantumState};

use super::{gpe, VtaaConfig};

/// Hard cap on the joint state size the engine will allocate.
pub const MAX_TENSOR_AMPS: u128 = 1 << 22;

/// Observables of one tensor-product replay, shaped to line up with the
/// factorized engine's output.
#[derive(Clone, Debug)]
pub struct TensorRun {
    /// Clock-read probabilities per stage.
    pub p_j: Vec<f64>,
    /// Flagged weight at the end of the forward pipeline.
    pub p_succ: f64,
    /// Weight stranded outside the all-zero ancilla cell after the inverse
    /// reference pipeline.
    pub residual_ancilla_weight: f64,
    /// Index-register amplitudes of the all-zero ancilla cell
    /// (unnormalized; squared norm is 1 − residual).
    pub zero_cell: Vec<C64>,
}

/// One estimation stage as a dense unitary on (clock ⊗ estimate ⊗ input):
/// a phase-estimation round followed by the reversible threshold vote
/// flipping the clock qubit.  Single-round shape only.
pub fn gpe_stage_matrix(eigen: &HermitianEigen, t_bits: u32, phi: f64) -> DMatrix<C64> {
    let t = 1usize << t_bits;
    let n = eigen.dim();
    let pe = gpe::pe_round_matrix(eigen, t_bits);

    let mut cwrite = DMatrix::zeros(2 * t, 2 * t);
    for c in 0..2usize {
        for e in 0..t {
            let flipped = if gpe::vote_is_big(e, t_bits, phi) { c ^ 1 } else { c };
            cwrite[(flipped * t + e, c * t + e)] = cx(1.0, 0.0);
        }
    }

    let id2 = DMatrix::identity(2, 2);
    let id_n = DMatrix::identity(n, n);
    cwrite.kronecker(&id_n) * id2.kronecker(&pe)
}

/// The stage-j flagged inverse on (flag ⊗ junk ⊗ input): per eigenvalue, a
/// real rotation sending |0,0⟩ to s|1,0⟩ + √(1−s²)|0,1⟩ with
/// s = h_j(λ)/α_max, completed to a unitary on the remaining cells.
fn w_matrix(config: &VtaaConfig, j: u32, eigen: &HermitianEigen) -> DMatrix<C64> {
    let n = eigen.dim();
    let mut op = DMatrix::zeros(4 * n, 4 * n);
    for k in 0..n {
        let s = config.success_scalar(j, eigen.values[k].clamp(-1.0, 1.0));
        let c = (1.0 - s * s).max(0.0).sqrt();
        // Rows/columns ordered (f, q) = 00, 01, 10, 11.
        let r4 = [
            [0.0, c, 0.0, s],
            [c, 0.0, -s, 0.0],
            [s, 0.0, c, 0.0],
            [0.0, -s, 0.0, c],
        ];
        let vk = eigen.vectors.column(k);
        for (a, row) in r4.iter().enumerate() {
            for (b, &val) in row.iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for i2 in 0..n {
                        op[(a * n + i, b * n + i2)] += cx(val, 0.0) * vk[i] * vk[i2].conj();
                    }
                }
            }
        }
    }
    op
}

/// Replay the full pipeline — forward stages, flag postselection, inverse
/// reference pipeline — on literal registers.
pub fn run_full_tensor(
    config: &VtaaConfig,
    inst: &SparseHermitianInstance,
) -> Result<TensorRun> {
    if config.gpe_rounds != 1 {
        return Err(Error::Config(format!(
            "tensor replay handles single-round estimations only, configuration has {}",
            config.gpe_rounds
        )));
    }
    if inst.d != config.d {
        return Err(Error::Config(format!(
            "configuration was built for sparsity {}, instance has {}",
            config.d, inst.d
        )));
    }
    let m = config.m as usize;
    let mut amps: u128 = (1u128 << m) * 2 * 2 * inst.n as u128;
    for j in 1..=config.m {
        amps = amps.saturating_mul(1u128 << config.stage(j).t_bits);
    }
    if amps > MAX_TENSOR_AMPS {
        return Err(Error::Config(format!(
            "tensor replay would need {amps} amplitudes, over the cap {MAX_TENSOR_AMPS}"
        )));
    }

    let c_names: Vec<String> = (1..=m).map(|j| format!("c{j}")).collect();
    let p_names: Vec<String> = (1..=m).map(|j| format!("p{j}")).collect();
    let zero2 = [cx(1.0, 0.0), cx(0.0, 0.0)];
    let p_zeros: Vec<Vec<C64>> = (1..=config.m)
        .map(|j| {
            let dim = 1usize << config.stage(j).t_bits;
            let mut v = vec![cx(0.0, 0.0); dim];
            v[0] = cx(1.0, 0.0);
            v
        })
        .collect();
    let b = inst.b_state();

    let mut parts: Vec<(&str, &[C64])> = Vec::with_capacity(2 * m + 3);
    for name in &c_names {
        parts.push((name.as_str(), &zero2));
    }
    parts.push(("f", &zero2));
    for (name, z) in p_names.iter().zip(&p_zeros) {
        parts.push((name.as_str(), z.as_slice()));
    }
    parts.push(("q", &zero2));
    parts.push(("index", b.as_slice()));
    let mut state = QuantumState::from_product(&parts)?;

    let eigen = inst.eigen();
    let stage_ops: Vec<DMatrix<C64>> = (1..=config.m)
        .map(|j| {
            let st = config.stage(j);
            gpe_stage_matrix(eigen, st.t_bits, st.phi)
        })
        .collect();

    let mut p_j = Vec::with_capacity(m);
    for j in 1..=config.m {
        let ji = j as usize - 1;
        let earlier: Vec<Ctrl> = c_names[..ji].iter().map(|c| Ctrl::Eq(c.as_str(), 0)).collect();
        state.apply_local(
            &[c_names[ji].as_str(), p_names[ji].as_str(), "index"],
            &stage_ops[ji],
            &earlier,
        )?;
        let w_op = w_matrix(config, j, eigen);
        state.apply_local(&["f", "q", "index"], &w_op, &[Ctrl::Eq(c_names[ji].as_str(), 1)])?;
        p_j.push(state.probability_of(c_names[ji].as_str(), 1)?);
    }

    let norm: f64 = state.amplitudes().iter().map(|z| z.norm_sqr()).sum();
    assert!(
        (norm - 1.0).abs() <= 1e-12,
        "forward pipeline lost norm: {norm}"
    );

    let proj = state.project("f", 1)?;
    let p_succ = proj.prob();
    if p_succ <= f64::MIN_POSITIVE {
        return Err(Error::Numeric(format!(
            "flagged weight {p_succ} vanishes; nothing to postselect"
        )));
    }
    let mut chi = proj.normalized()?;

    // Inverse reference pipeline: flag rewind (a plain flip) then the
    // inverse estimation, innermost stage first.
    let flip = DMatrix::from_row_slice(
        2,
        2,
        &[cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0)],
    );
    for j in (1..=config.m).rev() {
        let ji = j as usize - 1;
        chi.apply_local(&["f"], &flip, &[Ctrl::Eq(c_names[ji].as_str(), 1)])?;
        let earlier: Vec<Ctrl> = c_names[..ji].iter().map(|c| Ctrl::Eq(c.as_str(), 0)).collect();
        chi.apply_local(
            &[c_names[ji].as_str(), p_names[ji].as_str(), "index"],
            &stage_ops[ji].adjoint(),
            &earlier,
        )?;
    }

    let mut fixed: Vec<(&str, usize)> = Vec::with_capacity(2 * m + 2);
    for name in &c_names {
        fixed.push((name.as_str(), 0));
    }
    fixed.push(("f", 0));
    for name in &p_names {
        fixed.push((name.as_str(), 0));
    }
    fixed.push(("q", 0));
    let zero_cell = chi.register_block(&fixed, "index")?;

    let mut kept = KahanSum::default();
    for z in &zero_cell {
        kept.add(z.norm_sqr());
    }
    let residual_ancilla_weight = (1.0 - kept.value()).clamp(0.0, 1.0);

    Ok(TensorRun { p_j, p_succ, residual_ancilla_weight, zero_cell })
}
