//! Linear-combination-of-unitaries engine: prepare/select/unprepare,
//! exact postselection, and the repeat-until-success and amplitude-
//! amplification drivers.
//!
//! A program describes M = Σ_i w_i·U_i with strictly positive weights w_i
//! and unit-norm term operators (any phase is folded into the term).  The
//! prepare map V sends |0^m⟩ to Σ_i √(w_i/α)|i⟩ with α = Σ_i w_i, the
//! select map applies U_i conditioned on the select register, and one
//! prepare–select–unprepare pass leaves
//!
//! ```text
//! V†UV |0^m⟩|b⟩ = (1/α)|0^m⟩ M|b⟩ + (junk orthogonal to the |0^m⟩ block),
//! ```
//!
//! so postselecting the block succeeds with probability q = (‖M|b⟩‖/α)².
//! Both q and the block are computed exactly here (the simulator holds the
//! full state vector), and the drivers in [`amplify_block`] turn that block
//! into a normalized output state under three policies: exact postselection,
//! seeded repeat-until-success sampling that deliberately ignores the known
//! q, and standard amplitude amplification built from reflections about the
//! initial state (two right-hand-side preparations per reflection, one of
//! them in reverse).
//!
//! Two term families are supported, matching the two 1/x decompositions:
//!
//! * evolution terms phase·e^{−iAt}, applied through the cached spectral
//!   decomposition of A — the program for a Fourier grid at realistic sizes
//!   has ~10⁹ terms, so [`lcu_once_fourier`] collapses the whole select sum
//!   per eigenvalue in O(K) instead of materializing terms;
//! * walk terms sign·𝒯_n(H), realized by the szegedy walk dilation: one
//!   shared ladder of walk steps serves every order in the program, which is
//!   exactly how a select circuit over controlled walk powers shares its
//!   step sequence, and is the cost the ledger charges.
//!
//! Register conventions: the select register is named `"select"` and the
//! problem register `"index"`.  Projected blocks returned by the engine
//! carry only the `"index"` register; select and term ancillas are already
//! postselected to |0⟩, with the lost weight in `discarded_weight`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx::{cheb_t, ChebyshevSeries, FourierGrid};
use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::linalg::{complete_isometry, cx, vec_norm, KahanComplex, KahanSum};
use crate::problem::SparseHermitianInstance;
use crate::simcore::walk::WalkOperator;
use crate::simcore::{Ctrl, Layout, ProjectedState, QuantumState};
use nalgebra::DMatrix;

/// Relative agreement required between a program's summed weight and the
/// analytic α carried by the grid or series it was built from.
pub const ALPHA_TOL: f64 = 1e-12;

/// Largest number of terms a program will enumerate explicitly.  Realistic
/// Fourier grids exceed this by orders of magnitude and go through
/// [`lcu_once_fourier`], which never materializes terms.
pub const PROGRAM_TERM_LIMIT: usize = 20_000;

/// Largest joint dimension (select × index) for dense select matrices.
pub const DENSE_SELECT_LIMIT: usize = 4096;

/// Input vectors must be normalized to this tolerance.
pub const INPUT_NORM_TOL: f64 = 1e-9;

/// Worst-case driver budget: 10× the expected trial count, after which the
/// driver gives up and flags the run unsuccessful instead of erroring.
pub const CAP_FACTOR: f64 = 10.0;

/// Name of the select register in explicit circuit states.
pub const SELECT_REG: &str = "select";

/// Name of the problem register.
pub const INDEX_REG: &str = "index";

/// One term operator: either an evolution phase·e^{−iAt} with |phase| = 1,
/// or a walk-realized Chebyshev polynomial sign·𝒯_order(H) with sign = ±1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TermOp {
    Evolution { time: f64, phase: C64 },
    Walk { order: u64, sign: f64 },
}

/// A weighted term of an LCU program; `weight` is the α_i > 0 in
/// M = Σ_i α_i·U_i.
#[derive(Clone, Copy, Debug)]
pub struct LcuTerm {
    pub weight: f64,
    pub op: TermOp,
}

/// Which family a program's terms belong to.  Programs are homogeneous:
/// the two decompositions never mix families, and keeping them apart lets
/// the select pass be charged and executed uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Evolution,
    Walk,
}

/// The context a program's terms act in: the instance itself for evolution
/// terms, or its walk dilation for Chebyshev terms.
#[derive(Clone, Copy)]
pub enum LcuContext<'a> {
    Evolution(&'a SparseHermitianInstance),
    Walk(&'a WalkOperator),
}

impl LcuContext<'_> {
    /// Dimension of the problem register the terms act on.
    pub fn dim(&self) -> usize {
        match self {
            LcuContext::Evolution(inst) => inst.n,
            LcuContext::Walk(walk) => walk.dim(),
        }
    }

    fn kind(&self) -> TermKind {
        match self {
            LcuContext::Evolution(_) => TermKind::Evolution,
            LcuContext::Walk(_) => TermKind::Walk,
        }
    }
}

/// An immutable LCU program: weighted terms, their summed weight α, and the
/// derived register bookkeeping.
#[derive(Clone, Debug)]
pub struct LcuProgram {
    terms: Vec<LcuTerm>,
    alpha: f64,
}

impl LcuProgram {
    /// Validates and seals a term list: weights strictly positive and
    /// finite, evolution phases unit, walk signs ±1, all terms of one
    /// family, and α accumulated in compensated arithmetic.
    pub fn new(terms: Vec<LcuTerm>) -> Result<LcuProgram> {
        if terms.is_empty() {
            return Err(Error::Config("an LCU program needs at least one term".into()));
        }
        if terms.len() > PROGRAM_TERM_LIMIT {
            return Err(Error::Config(format!(
                "explicit LCU programs are capped at {PROGRAM_TERM_LIMIT} terms, got {}; \
                 large Fourier grids go through lcu_once_fourier instead",
                terms.len()
            )));
        }
        let kind = term_kind(&terms[0].op);
        let mut alpha = KahanSum::default();
        for (i, term) in terms.iter().enumerate() {
            if !(term.weight > 0.0 && term.weight.is_finite()) {
                return Err(Error::Config(format!(
                    "term {i} has weight {}, but every weight must be positive and finite",
                    term.weight
                )));
            }
            if term_kind(&term.op) != kind {
                return Err(Error::Config(
                    "programs must not mix evolution and walk terms".into(),
                ));
            }
            match term.op {
                TermOp::Evolution { time, phase } => {
                    if !time.is_finite() || (phase.norm() - 1.0).abs() > 1e-12 {
                        return Err(Error::Config(format!(
                            "term {i}: evolution time must be finite and the phase unit, \
                             got t = {time}, |phase| = {}",
                            phase.norm()
                        )));
                    }
                }
                TermOp::Walk { sign, .. } => {
                    if sign != 1.0 && sign != -1.0 {
                        return Err(Error::Config(format!(
                            "term {i}: walk sign must be ±1, got {sign}"
                        )));
                    }
                }
            }
            alpha.add(term.weight);
        }
        Ok(LcuProgram { terms, alpha: alpha.value() })
    }

    /// The explicit program of a Fourier grid: term (j, k) carries weight
    /// (ΔyΔz/√(2π))|z_k|e^{−z_k²/2} and the unitary i·sgn(k)·e^{−iA y_j z_k}.
    /// Only small grids fit under the term cap; the solver path never
    /// enumerates.
    pub fn fourier(grid: &FourierGrid) -> Result<LcuProgram> {
        let count = grid.term_count();
        if count as usize > PROGRAM_TERM_LIMIT {
            return Err(Error::Config(format!(
                "fourier grid has {count} terms, beyond the explicit-program cap \
                 {PROGRAM_TERM_LIMIT}; use lcu_once_fourier"
            )));
        }
        let mut terms = Vec::with_capacity(count as usize);
        for j in 0..grid.j_count {
            let y = grid.y_node(j);
            for k in -(grid.k_count as i64)..=grid.k_count as i64 {
                if k == 0 {
                    continue;
                }
                terms.push(LcuTerm {
                    weight: grid.weight(k),
                    op: TermOp::Evolution {
                        time: y * grid.z_node(k),
                        phase: cx(0.0, k.signum() as f64),
                    },
                });
            }
        }
        let program = LcuProgram::new(terms)?;
        assert!(
            (program.alpha - grid.alpha).abs() <= ALPHA_TOL * grid.alpha.max(1.0),
            "program weight {} disagrees with the grid's alpha {}",
            program.alpha,
            grid.alpha
        );
        Ok(program)
    }

    /// The program of a truncated Chebyshev series: term j carries weight
    /// |c_j| = 4B_j and realizes sign(c_j)·𝒯_{2j+1}(H) through the walk.
    pub fn chebyshev(series: &ChebyshevSeries) -> Result<LcuProgram> {
        let terms = series
            .coeffs
            .iter()
            .map(|&(order, c)| LcuTerm {
                weight: c.abs(),
                op: TermOp::Walk { order, sign: c.signum() },
            })
            .collect();
        let program = LcuProgram::new(terms)?;
        assert!(
            (program.alpha - series.alpha).abs() <= ALPHA_TOL * series.alpha.max(1.0),
            "program weight {} disagrees with the series' alpha {}",
            program.alpha,
            series.alpha
        );
        Ok(program)
    }

    /// The validated term list.
    pub fn terms(&self) -> &[LcuTerm] {
        &self.terms
    }

    /// α = Σ_i w_i.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The family all terms belong to.
    pub fn kind(&self) -> TermKind {
        term_kind(&self.terms[0].op)
    }

    /// Dimension of the select register: term count padded to the next
    /// power of two (a single term needs no register, dimension 1).
    pub fn select_dim(&self) -> usize {
        self.terms.len().next_power_of_two()
    }

    /// Select-register width m = ⌈log₂ #terms⌉ in qubits.
    pub fn select_ancilla_qubits(&self) -> u32 {
        self.select_dim().trailing_zeros()
    }

    /// Term-ancilla width: zero for evolution terms, the walk dilation for
    /// Chebyshev terms.
    pub fn term_ancilla_qubits(&self, ctx: &LcuContext) -> u32 {
        match ctx {
            LcuContext::Evolution(_) => 0,
            LcuContext::Walk(walk) => walk.ancilla_qubits(),
        }
    }

    /// Largest walk order in the program (walk programs only).
    pub fn max_order(&self) -> u64 {
        self.terms
            .iter()
            .map(|t| match t.op {
                TermOp::Walk { order, .. } => order,
                TermOp::Evolution { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Largest |t| in the program (evolution programs only).
    pub fn max_time(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t.op {
                TermOp::Evolution { time, .. } => time.abs(),
                TermOp::Walk { .. } => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Charges one select pass to the ledger at the cost of the most
    /// expensive term: one evolution use at the maximal |t| for evolution
    /// programs; max-order walk steps plus one dilation boundary pair for
    /// walk programs.  The controlled ladder shares its step sequence
    /// across orders, so the longest branch is the whole cost.
    pub fn charge_pass(&self, ledger: &mut CostLedger) {
        match self.kind() {
            TermKind::Evolution => {
                ledger.evolution_uses += 1;
                ledger.evolution_time_total += self.max_time();
            }
            TermKind::Walk => {
                let steps = self.max_order();
                ledger.walk_steps += steps;
                ledger.pa_queries += 2 * steps + 4;
            }
        }
    }

    /// The prepare unitary V on the select register: first column
    /// √(w_i/α) (zero on padding slots), remaining columns a deterministic
    /// Gram–Schmidt completion.
    pub fn prepare_v(&self) -> DMatrix<C64> {
        let dim = self.select_dim();
        let col = DMatrix::from_fn(dim, 1, |i, _| {
            if i < self.terms.len() {
                cx((self.terms[i].weight / self.alpha).sqrt(), 0.0)
            } else {
                cx(0.0, 0.0)
            }
        });
        complete_isometry(&col).expect("a unit column always completes to a unitary")
    }

    /// Dense per-term block on the problem register: phase·e^{−iAt} for
    /// evolution terms (unitary), sign·𝒯_n(H) for walk terms (the |0^t⟩
    /// block of the dilated walk power — not unitary, but exactly what the
    /// select sandwich composes, since select is block-diagonal over the
    /// select index).
    pub fn term_block(&self, ctx: &LcuContext, i: usize) -> Result<DMatrix<C64>> {
        self.check_ctx(ctx)?;
        let term = self.terms.get(i).ok_or_else(|| {
            Error::Config(format!("term index {i} out of range for {} terms", self.terms.len()))
        })?;
        Ok(match (term.op, ctx) {
            (TermOp::Evolution { time, phase }, LcuContext::Evolution(inst)) => {
                inst.eigen().matrix_fn(|lam| phase * cx(0.0, -lam * time).exp())
            }
            (TermOp::Walk { order, sign }, LcuContext::Walk(walk)) => {
                walk.h_eigen().matrix_fn(|lam| cx(sign * cheb_t(order, lam), 0.0))
            }
            _ => unreachable!("check_ctx matched the program and context families"),
        })
    }

    /// Dense select operator Σ_i |i⟩⟨i| ⊗ B_i on select ⊗ index, identity
    /// on padding slots.  Small programs only; for evolution programs this
    /// is the literal select unitary, for walk programs the term blocks are
    /// the |0^t⟩ compressions described at [`LcuProgram::term_block`].
    pub fn select_matrix(&self, ctx: &LcuContext) -> Result<DMatrix<C64>> {
        self.check_ctx(ctx)?;
        let n = ctx.dim();
        let dim = self.select_dim() * n;
        if dim > DENSE_SELECT_LIMIT {
            return Err(Error::Config(format!(
                "dense select operator would be {dim}-dimensional, beyond the \
                 {DENSE_SELECT_LIMIT} guard"
            )));
        }
        let mut out = DMatrix::zeros(dim, dim);
        for i in 0..self.select_dim() {
            if i < self.terms.len() {
                let block = self.term_block(ctx, i)?;
                for r in 0..n {
                    for c in 0..n {
                        out[(i * n + r, i * n + c)] = block[(r, c)];
                    }
                }
            } else {
                for r in 0..n {
                    out[(i * n + r, i * n + r)] = cx(1.0, 0.0);
                }
            }
        }
        Ok(out)
    }

    /// Applies the select operator to a state with registers `"select"`
    /// (of dimension [`LcuProgram::select_dim`]) and `"index"`, charging
    /// one select pass.  Evolution programs only: their terms are unitary
    /// on the index register alone.  Walk terms act on the dilated space
    /// and are exercised through [`LcuProgram::lcu_once`] instead.
    pub fn apply_select(
        &self,
        ctx: &LcuContext,
        state: &mut QuantumState,
        ledger: &mut CostLedger,
    ) -> Result<()> {
        self.check_ctx(ctx)?;
        if self.kind() != TermKind::Evolution {
            return Err(Error::Config(
                "apply_select drives unitary evolution terms; walk terms run inside \
                 lcu_once, which owns their dilation"
                    .into(),
            ));
        }
        if state.layout().reg_dim(SELECT_REG)? != self.select_dim() {
            return Err(Error::Layout(format!(
                "select register has dimension {}, program needs {}",
                state.layout().reg_dim(SELECT_REG)?,
                self.select_dim()
            )));
        }
        if state.layout().reg_dim(INDEX_REG)? != ctx.dim() {
            return Err(Error::Layout(format!(
                "index register has dimension {}, context needs {}",
                state.layout().reg_dim(INDEX_REG)?,
                ctx.dim()
            )));
        }
        for i in 0..self.terms.len() {
            let block = self.term_block(ctx, i)?;
            state.apply_local(&[INDEX_REG], &block, &[Ctrl::Eq(SELECT_REG, i)])?;
        }
        self.charge_pass(ledger);
        Ok(())
    }

    /// One prepare–select–unprepare pass on |0^m⟩|b⟩, postselected on the
    /// |0^{m+t}⟩ block: returns the block (1/α)M|b⟩ as a projected state
    /// over the `"index"` register alone, together with its exact norm
    /// squared q = (‖M|b⟩‖/α)².
    ///
    /// Evolution programs evaluate the term sum per eigenvalue of A; walk
    /// programs run one shared ladder of walk steps, tapping T†·W^n-level
    /// snapshots at each order present — both are exact reorderings of the
    /// term-by-term sum.  Nothing is charged here: the drivers charge per
    /// pass, and [`LcuProgram::charge_pass`] is the per-pass cost.
    pub fn lcu_once(&self, ctx: &LcuContext, b: &[C64]) -> Result<(ProjectedState, f64)> {
        self.check_ctx(ctx)?;
        check_input(b, ctx.dim())?;
        let block = match ctx {
            LcuContext::Evolution(inst) => {
                let eigen = inst.eigen();
                let mut coef = eigen.to_eigenbasis(b);
                for (c, &lam) in coef.iter_mut().zip(&eigen.values) {
                    let mut f = KahanComplex::default();
                    for term in &self.terms {
                        let TermOp::Evolution { time, phase } = term.op else {
                            unreachable!("evolution context holds evolution terms");
                        };
                        f.add(term.weight * phase * cx(0.0, -lam * time).exp());
                    }
                    *c *= f.value() / self.alpha;
                }
                eigen.from_eigenbasis(&coef)
            }
            LcuContext::Walk(walk) => self.walk_ladder(walk, b)?,
        };
        Ok(project_block(block, self.select_dim()))
    }

    /// Σ_i (w_i·sign_i/α)·T†W^{n_i}T|b⟩ through one shared walk-step
    /// ladder: embed once, accumulate the walk-space snapshot at every
    /// order in the program, unembed once.
    fn walk_ladder(&self, walk: &WalkOperator, b: &[C64]) -> Result<Vec<C64>> {
        let mut coeff = vec![cx(0.0, 0.0); self.max_order() as usize + 1];
        for term in &self.terms {
            let TermOp::Walk { order, sign } = term.op else {
                unreachable!("walk context holds walk terms");
            };
            coeff[order as usize] += cx(term.weight * sign / self.alpha, 0.0);
        }
        let mut cur = walk.apply_t(b)?;
        let mut acc = vec![cx(0.0, 0.0); cur.len()];
        for (order, &c) in coeff.iter().enumerate() {
            if c != cx(0.0, 0.0) {
                for (a, v) in acc.iter_mut().zip(&cur) {
                    *a += c * v;
                }
            }
            if order < coeff.len() - 1 {
                cur = walk.apply_w(&cur)?;
            }
        }
        walk.apply_t_dag(&acc)
    }

    fn check_ctx(&self, ctx: &LcuContext) -> Result<()> {
        if self.kind() != ctx.kind() {
            return Err(Error::Config(
                "program and context families disagree (evolution vs walk)".into(),
            ));
        }
        Ok(())
    }
}

fn term_kind(op: &TermOp) -> TermKind {
    match op {
        TermOp::Evolution { .. } => TermKind::Evolution,
        TermOp::Walk { .. } => TermKind::Walk,
    }
}

fn check_input(b: &[C64], dim: usize) -> Result<()> {
    if b.len() != dim {
        return Err(Error::BadDimension(format!(
            "input has length {}, context needs {dim}",
            b.len()
        )));
    }
    let norm = vec_norm(b);
    if (norm - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::BadRhs(format!("input norm {norm} is not 1")));
    }
    Ok(())
}

/// Wraps a computed block vector as a ProjectedState over `"index"` with
/// the off-block weight in `discarded_weight`, and returns the exact
/// success probability.  `_select_dim` is the true select width, recorded
/// by callers via [`LcuProgram::select_ancilla_qubits`]; the padded slots
/// hold no block weight and are not materialized.
fn project_block(block: Vec<C64>, _select_dim: usize) -> (ProjectedState, f64) {
    let q: f64 = block.iter().map(|z| z.norm_sqr()).sum();
    let layout = Layout::new(&[(INDEX_REG, block.len())]).expect("one register");
    let ps = ProjectedState { layout, amps: block, discarded_weight: (1.0 - q).max(0.0) };
    (ps, q)
}

/// The Fourier-grid pass without term enumeration: h is a sum of J·2K
/// evolution terms, but per eigenvalue the select sum collapses to the
/// grid's closed-form h(λ), so the block is (1/α)·h(A)|b⟩ at O(K) cost per
/// eigenvalue.  Exactly the sum [`LcuProgram::fourier`] + `lcu_once` would
/// compute, reordered; the cross-check on small grids is a test.
pub fn lcu_once_fourier(
    grid: &FourierGrid,
    inst: &SparseHermitianInstance,
    b: &[C64],
) -> Result<(ProjectedState, f64)> {
    check_input(b, inst.n)?;
    let eigen = inst.eigen();
    let mut coef = eigen.to_eigenbasis(b);
    for (c, &lam) in coef.iter_mut().zip(&eigen.values) {
        *c *= grid.eval_h(lam) / grid.alpha;
    }
    let block = eigen.from_eigenbasis(&coef);
    let select_dim = (grid.term_count() as usize).next_power_of_two();
    Ok(project_block(block, select_dim))
}

/// Charges one Fourier select pass: a single evolution use at the largest
/// node time |y_{J−1}·z_K|.
pub fn charge_fourier_pass(grid: &FourierGrid, ledger: &mut CostLedger) {
    ledger.evolution_uses += 1;
    ledger.evolution_time_total +=
        (grid.y_node(grid.j_count - 1) * grid.z_node(grid.k_count as i64)).abs();
}

/// How a driver turns the postselected block into an output state.
#[derive(Clone, Copy, Debug)]
pub enum AmplifyPolicy {
    /// Return the normalized block directly with its exact probability —
    /// the simulator can postselect exactly.  Used by tests and by the
    /// variable-time pipeline, which does its own amplification accounting.
    PostselectExact,
    /// Repeat-until-success with seeded randomness.  Each trial costs one
    /// state preparation and one select pass; the driver samples against
    /// the exact q but otherwise ignores it, emulating the operational
    /// Las Vegas semantics.
    Sample { seed: u64 },
    /// Standard amplitude amplification: reflections about the initial
    /// state built from two state preparations (one in reverse), rotating
    /// the success amplitude to ~1 before measuring.
    Amplify { seed: u64 },
}

/// What a driver did and how it went.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct AmplifyReport {
    /// Whether a success branch was produced within the cap.
    pub succeeded: bool,
    /// Exact per-pass success probability q = (‖M|b⟩‖/α)².
    pub success_probability: f64,
    /// Probability of the measured success per attempt: q itself for the
    /// sampling policies, sin²((2k+1)θ) after k amplification rounds.
    pub amplified_probability: f64,
    /// Select passes charged.
    pub lcu_passes: u64,
    /// Amplification reflections performed.
    pub aa_rounds: u64,
    /// Measurement attempts (trials for repeat-until-success).
    pub attempts: u64,
}

/// Trial cap for a per-trial success probability: ⌈10/q⌉, ten times the
/// expected count.
pub fn sample_cap(q: f64) -> u64 {
    assert!(q > 0.0, "cap is defined for positive success probability");
    (CAP_FACTOR / q).ceil() as u64
}

/// Drives a postselected block to a normalized output state.
///
/// `charge_pass` books one select pass (the caller knows whether that pass
/// is a Fourier evolution or a walk ladder); this driver books the
/// right-hand-side preparations — one per trial or attempt, two more per
/// reflection — and the amplification rounds.  On success the state is the
/// normalized block itself, bit-for-bit the same vector under every
/// policy: amplification rotates within the span of the initial and
/// success states and never distorts the success branch.  A run whose cap
/// is exhausted (ten times the expected trials) comes back flagged
/// unsuccessful rather than as an error.
pub fn amplify_block(
    block: &ProjectedState,
    policy: AmplifyPolicy,
    mut charge_pass: impl FnMut(&mut CostLedger),
    ledger: &mut CostLedger,
) -> (Option<QuantumState>, AmplifyReport) {
    let q = block.prob();
    let mut report = AmplifyReport {
        succeeded: false,
        success_probability: q,
        amplified_probability: q,
        lcu_passes: 0,
        aa_rounds: 0,
        attempts: 0,
    };
    // A zero block can never postselect; flag it without consuming the cap.
    if q <= f64::MIN_POSITIVE {
        return (None, report);
    }
    let success = || block.normalized().expect("positive-probability block normalizes");
    match policy {
        AmplifyPolicy::PostselectExact => {
            ledger.pb_uses += 1;
            charge_pass(ledger);
            report.lcu_passes = 1;
            report.attempts = 1;
            report.succeeded = true;
            (Some(success()), report)
        }
        AmplifyPolicy::Sample { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cap = sample_cap(q.min(1.0));
            for trial in 1..=cap {
                ledger.pb_uses += 1;
                charge_pass(ledger);
                report.lcu_passes += 1;
                report.attempts = trial;
                if rng.gen::<f64>() < q {
                    report.succeeded = true;
                    return (Some(success()), report);
                }
            }
            (None, report)
        }
        AmplifyPolicy::Amplify { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = q.min(1.0).sqrt().asin();
            let rounds = ((std::f64::consts::FRAC_PI_4 / theta) - 0.5).round().max(0.0) as u64;
            let amplified = ((2 * rounds + 1) as f64 * theta).sin().powi(2);
            report.amplified_probability = amplified;
            let cap = sample_cap(amplified.min(1.0));
            for attempt in 1..=cap {
                // Initial preparation and pass, then one reflection about
                // |b⟩ (two preparations) and two passes per round.
                ledger.pb_uses += 1;
                charge_pass(ledger);
                report.lcu_passes += 1;
                for _ in 0..rounds {
                    ledger.pb_uses += 2;
                    charge_pass(ledger);
                    charge_pass(ledger);
                    ledger.aa_rounds += 1;
                    report.lcu_passes += 2;
                    report.aa_rounds += 1;
                }
                report.attempts = attempt;
                if rng.gen::<f64>() < amplified {
                    report.succeeded = true;
                    return (Some(success()), report);
                }
            }
            (None, report)
        }
    }
}

/// Program-level driver: one exact pass through [`LcuProgram::lcu_once`],
/// then [`amplify_block`] with the program's own per-pass cost.
pub fn amplify(
    program: &LcuProgram,
    ctx: &LcuContext,
    b: &[C64],
    policy: AmplifyPolicy,
    ledger: &mut CostLedger,
) -> Result<(Option<QuantumState>, AmplifyReport)> {
    let (block, _q) = program.lcu_once(ctx, b)?;
    Ok(amplify_block(&block, policy, |l| program.charge_pass(l), ledger))
}
