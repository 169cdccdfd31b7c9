//! Per-eigenvalue branch algebra for the variable-time pipeline.
//!
//! Every unitary in the pipeline — the gapped estimations, the flagged
//! inverse applications, and their inverses — is block-diagonal in the
//! eigenbasis of A, so a run on Σ_k c_k|λ_k⟩ factorizes into independent
//! branches, one per eigenvector.  Within a branch the joint ancilla state
//! is a sum of mutually orthogonal components: two components always differ
//! in some stage's estimate register, where the "small" and "big" majority
//! sectors occupy disjoint sets of vote patterns.  Orthogonality makes the
//! branch exactly representable by one real amplitude per component (the
//! estimate-register phases live inside the sector states), and the whole
//! pipeline reduces to scalar recursions:
//!
//!   w_j  = Π_{i≤j} β₀^{(i)}          amplitude still running after stage j,
//!   a_j  = w_{j−1}·β₁^{(j)}          amplitude halting at stage j,
//!   g_j  = a_j·h_j(λ)/α_max          the flagged (successful) cell,
//!
//! with a_j² − g_j² of weight parked in the stage's inert junk bucket.
//! Components that halted are never touched again: later estimations are
//! conditioned on all earlier clock qubits being |0⟩ and later inverse
//! applications on that stage's own clock qubit — the stage-locality
//! invariant the tests pin down.  The tensor-product engine in
//! [`super::tensor`] replays the same pipeline with literal registers and
//! must agree with this algebra to close to machine precision.

use crate::error::{Error, Result};
use crate::linalg::KahanSum;

use super::VtaaConfig;

/// Occupation of one stage's estimate register within a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorTag {
    /// Stage never ran on this component; register still |0⟩.
    Untouched,
    /// Stage ran and the majority voted "small".
    Small,
    /// Stage ran and the majority voted "big".
    Big,
}

/// One orthogonal component of a branch's ancilla state.
#[derive(Clone, Debug)]
pub struct BranchComponent {
    /// Stage whose clock qubit is set (1-based), or `None` while every
    /// clock qubit is still |0⟩.
    pub halted_at: Option<u32>,
    /// Success flag set by the stage's inverse application.
    pub flag: bool,
    /// Weight that left the flagged column during the inverse application
    /// (select/walk ancilla junk); inert for the rest of the run.
    pub junk: bool,
    /// Estimate-register sector per stage.
    pub sectors: Vec<SectorTag>,
    /// Real amplitude of the component.
    pub amp: f64,
}

/// Ancilla state of one eigen-branch, factorized into orthogonal
/// components.
#[derive(Clone, Debug)]
pub struct BranchState {
    /// Eigenvalue carried by the branch's input register.
    pub lambda: f64,
    /// Stages already applied (components' sector vectors stay this long).
    pub stages_run: u32,
    pub components: Vec<BranchComponent>,
}

impl BranchState {
    /// Fresh branch: every ancilla in |0⟩, unit amplitude.
    pub fn new(config: &VtaaConfig, lambda: f64) -> Result<BranchState> {
        if !(lambda.is_finite() && lambda.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "branch eigenvalue must lie in [-1, 1], got {lambda}"
            )));
        }
        Ok(BranchState {
            lambda,
            stages_run: 0,
            components: vec![BranchComponent {
                halted_at: None,
                flag: false,
                junk: false,
                sectors: vec![SectorTag::Untouched; config.m as usize],
                amp: 1.0,
            }],
        })
    }

    /// Squared amplitude currently halting at stage `j` (1-based), summed
    /// over that stage's flagged and junk cells.
    pub fn halt_weight(&self, j: u32) -> f64 {
        self.components
            .iter()
            .filter(|c| c.halted_at == Some(j))
            .map(|c| c.amp * c.amp)
            .sum()
    }

    /// Total squared amplitude — 1 for a faithfully evolved branch.
    pub fn weight(&self) -> f64 {
        let mut acc = KahanSum::default();
        for c in &self.components {
            acc.add(c.amp * c.amp);
        }
        acc.value()
    }
}

/// Apply pipeline stage `j` (1-based) to a branch: the gapped estimation at
/// φ_j, conditioned on every earlier clock qubit reading |0⟩, followed by
/// the flagged inverse application at threshold λ̄_j on the freshly halted
/// cell.  Components that halted earlier are left untouched.
pub fn run_stage(config: &VtaaConfig, j: u32, branch: &mut BranchState) -> Result<()> {
    if j == 0 || j > config.m {
        return Err(Error::Config(format!(
            "stage index {j} outside 1..={}",
            config.m
        )));
    }
    if j != branch.stages_run + 1 {
        return Err(Error::Config(format!(
            "stage {j} applied out of order; {} stages have run",
            branch.stages_run
        )));
    }
    let betas = config.betas(j, branch.lambda)?;
    let s = config.success_scalar(j, branch.lambda);
    assert!(
        s.abs() <= 1.0 + 1e-12,
        "flagged amplitude |h_j(λ)|/α_max = {} exceeds 1; stage α escaped α_max",
        s.abs()
    );
    let junk_scale = (1.0 - s * s).max(0.0).sqrt();

    let mut next = Vec::with_capacity(branch.components.len() + 2);
    for comp in branch.components.drain(..) {
        if comp.halted_at.is_some() {
            next.push(comp); // earlier clock qubit set: stage acts as identity
            continue;
        }
        let mut running = comp.clone();
        running.amp *= betas.beta0;
        running.sectors[j as usize - 1] = SectorTag::Small;
        if running.amp != 0.0 {
            next.push(running);
        }

        let halt_amp = comp.amp * betas.beta1;
        if halt_amp != 0.0 {
            let mut sectors = comp.sectors;
            sectors[j as usize - 1] = SectorTag::Big;
            next.push(BranchComponent {
                halted_at: Some(j),
                flag: true,
                junk: false,
                sectors: sectors.clone(),
                amp: halt_amp * s,
            });
            next.push(BranchComponent {
                halted_at: Some(j),
                flag: false,
                junk: true,
                sectors,
                amp: halt_amp * junk_scale,
            });
        }
    }
    branch.components = next;
    branch.stages_run = j;
    Ok(())
}

/// Summary of one fully evolved branch: everything the pipeline assembly
/// and the analytic uncomputation need.
#[derive(Clone, Debug)]
pub struct BranchTrace {
    pub lambda: f64,
    /// a_j — amplitude halting at stage j (nonnegative; index 0 = stage 1).
    pub halt_amp: Vec<f64>,
    /// g_j = a_j·h_j(λ)/α_max — the flagged cell, signed like 1/λ.
    pub good_amp: Vec<f64>,
    /// Amplitude that never halted (all clock qubits |0⟩ after stage m).
    pub running_tail: f64,
    /// ⟨reference pipeline, flagged run⟩ = Σ_j a_j·g_j: the overlap of the
    /// flagged state with the ancilla pattern the trivially flagged
    /// reference pipeline produces, which is exactly the amplitude the
    /// analytic uncomputation returns to the all-zero ancilla cell.
    pub uncompute_overlap: f64,
}

impl BranchTrace {
    /// Σ_j g_j² — the branch's contribution to the flagged norm.
    pub fn flagged_weight(&self) -> f64 {
        let mut acc = KahanSum::default();
        for &g in &self.good_amp {
            acc.add(g * g);
        }
        acc.value()
    }
}

/// Run all m stages on the eigenvalue's branch and summarize.
pub fn run_branch(config: &VtaaConfig, lambda: f64) -> Result<BranchTrace> {
    let mut branch = BranchState::new(config, lambda)?;
    let m = config.m as usize;
    let mut halt_amp = vec![0.0; m];
    let mut good_amp = vec![0.0; m];
    for j in 1..=config.m {
        run_stage(config, j, &mut branch)?;
        let (mut good, mut junk) = (0.0, 0.0);
        for c in branch.components.iter().filter(|c| c.halted_at == Some(j)) {
            if c.flag {
                good = c.amp;
            } else {
                junk = c.amp;
            }
        }
        halt_amp[j as usize - 1] = good.hypot(junk);
        good_amp[j as usize - 1] = good;
    }
    let running_tail = branch
        .components
        .iter()
        .find(|c| c.halted_at.is_none())
        .map_or(0.0, |c| c.amp);

    let total = branch.weight();
    assert!(
        (total - 1.0).abs() <= 1e-12,
        "branch at λ = {lambda} lost norm: total weight {total}"
    );

    let mut overlap = KahanSum::default();
    for (a, g) in halt_amp.iter().zip(&good_amp) {
        overlap.add(a * g);
    }
    Ok(BranchTrace {
        lambda,
        halt_amp,
        good_amp,
        running_tail,
        uncompute_overlap: overlap.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vtaa::{configure, InnerKind};

    fn config(kappa: f64, epsilon: f64) -> VtaaConfig {
        configure(kappa, 2, epsilon, InnerKind::Chebyshev).unwrap()
    }

    #[test]
    fn unit_eigenvalue_halts_at_the_first_stage() {
        let cfg = config(8.0, 1e-3);
        let trace = run_branch(&cfg, 1.0).unwrap();
        let eps = cfg.eps_gpe;
        assert!(
            trace.halt_amp[0] >= 1.0 - 2.0 * eps,
            "λ = 1 should halt immediately, a_1 = {}",
            trace.halt_amp[0]
        );
        for (j, &a) in trace.halt_amp.iter().enumerate().skip(1) {
            assert!(a <= eps, "stray halt a_{} = {a:.3e}", j + 1);
        }
        assert!(trace.running_tail <= eps);
    }

    #[test]
    fn smallest_eigenvalue_waits_for_the_last_stages() {
        let cfg = config(8.0, 1e-3);
        let lam = 1.0 / 8.0;
        let trace = run_branch(&cfg, lam).unwrap();
        let m = cfg.m as usize;
        let late: f64 = trace.halt_amp[m - 2..].iter().map(|a| a * a).sum();
        assert!(
            late >= 1.0 - 4.0 * cfg.eps_gpe,
            "λ = 1/κ must halt in the last two stages, weight {late}"
        );
        let early: f64 = trace.halt_amp[..m - 2].iter().map(|a| a * a).sum();
        assert!(early <= (2.0 * cfg.eps_gpe).powi(2) * m as f64);
    }

    #[test]
    fn branch_weight_is_conserved_stage_by_stage() {
        let cfg = config(16.0, 1e-2);
        for &lam in &[1.0, -0.7, 0.3, -0.11, 0.0625, 1.0 / 16.0] {
            let mut branch = BranchState::new(&cfg, lam).unwrap();
            for j in 1..=cfg.m {
                run_stage(&cfg, j, &mut branch).unwrap();
                let w = branch.weight();
                assert!(
                    (w - 1.0).abs() <= 1e-12,
                    "weight {w} after stage {j} at λ = {lam}"
                );
            }
        }
    }

    #[test]
    fn halted_components_are_never_touched_again() {
        let cfg = config(8.0, 1e-3);
        let mut branch = BranchState::new(&cfg, 1.0).unwrap();
        run_stage(&cfg, 1, &mut branch).unwrap();
        let before: Vec<(Option<u32>, bool, f64)> = branch
            .components
            .iter()
            .filter(|c| c.halted_at.is_some())
            .map(|c| (c.halted_at, c.flag, c.amp))
            .collect();
        assert!(!before.is_empty());
        for j in 2..=cfg.m {
            run_stage(&cfg, j, &mut branch).unwrap();
        }
        let after: Vec<(Option<u32>, bool, f64)> = branch
            .components
            .iter()
            .filter(|c| c.halted_at == Some(1))
            .map(|c| (c.halted_at, c.flag, c.amp))
            .collect();
        assert_eq!(before, after, "stage locality violated");
    }

    #[test]
    fn stage_order_is_enforced() {
        let cfg = config(8.0, 1e-3);
        let mut branch = BranchState::new(&cfg, 0.5).unwrap();
        assert!(run_stage(&cfg, 2, &mut branch).is_err());
        run_stage(&cfg, 1, &mut branch).unwrap();
        assert!(run_stage(&cfg, 1, &mut branch).is_err());
        assert!(run_stage(&cfg, cfg.m + 1, &mut branch).is_err());
    }

    #[test]
    fn zero_eigenvalue_never_halts() {
        // Outside the invertibility promise, but the estimator itself must
        // keep λ = 0 running with no leakage at all.
        let cfg = config(8.0, 1e-3);
        let trace = run_branch(&cfg, 0.0).unwrap();
        assert!(trace.halt_amp.iter().all(|&a| a == 0.0));
        assert_eq!(trace.running_tail, 1.0);
        assert_eq!(trace.uncompute_overlap, 0.0);
    }

    #[test]
    fn stopping_tail_past_the_bucket_is_geometric() {
        let cfg = config(16.0, 1e-3);
        // λ in stage-2's catch range: φ₂ < λ ≤ 2φ₂.
        let lam = 0.4;
        let trace = run_branch(&cfg, lam).unwrap();
        let past: f64 = trace.halt_amp[2..].iter().map(|a| a * a).sum::<f64>()
            + trace.running_tail.powi(2);
        assert!(
            past.sqrt() <= cfg.eps_gpe,
            "mass past the catch stage: {:.3e}",
            past.sqrt()
        );
    }

    #[test]
    fn negative_eigenvalues_flag_with_the_sign_of_the_inverse() {
        let cfg = config(8.0, 1e-3);
        let trace = run_branch(&cfg, -1.0).unwrap();
        assert!(trace.good_amp[0] < 0.0, "flagged cell must carry sign(1/λ)");
        assert!(trace.uncompute_overlap < 0.0);
    }
}
