//! Bipartite quantum walk realizing Chebyshev polynomials of H = A/d.
//!
//! Each column j of the isometry T: ℂᴺ → ℂ²ᴺ⊗ℂ²ᴺ is the state
//!
//!   |ψ_j⟩ = |j⟩ ⊗ (1/√d) Σ_{k ∈ slots(j)} ( c_jk |k⟩ + √(1 − |A_jk|) |k+N⟩ ),
//!
//! where c_jk is a square root of A*_jk and the second branch absorbs the
//! slack so every column is exactly normalized. With the swap S and the
//! reflection 2TT† − 1, the walk W := S(2TT† − 1) acts on each eigenplane
//! of H as a rotation by arccos λ, so n steps of W conjugated by the T
//! dilation produce 𝒯_n(H), the degree-n Chebyshev polynomial of the first
//! kind — the primitive the Chebyshev solver feeds to its term programs.
//!
//! Square-root branches need care: the element ⟨ψ_j|S|ψ_k⟩ = c*_jk c_kj / d
//! must equal A_jk/d, which pins the *pair* (c_jk, c_kj) to satisfy
//! c_jk · c*_kj = A*_jk. A single functional branch choice cannot do this
//! for negative real entries (both principal roots are i√ρ, whose pair
//! product is +ρ), so each unordered pair {j,k} is assigned jointly:
//! c_jk := √(A*_jk) in the principal branch and c_kj := (c_jk)*, which
//! satisfies the pair condition identically, negative reals included.
//! A negative diagonal entry is a self-paired cell where that escape is
//! unavailable — the single amplitude would force |c_jj|² ≥ 0 — so the
//! diagonal slot instead splits across the two mirrored walk cells
//! (j, j+N) and (j+N, j) with real weights (cos φ, −sin φ), sin 2φ = |A_jj|;
//! the swap pairs them to 2·(cos φ)(−sin φ) = A_jj exactly and the slot
//! stays normalized with no junk cell. Off-diagonal elements never touch
//! the mirrored cells, so the identities T†T = I and T†ST = H hold exactly
//! for every Hermitian matrix with entries of magnitude at most 1.

use nalgebra::DMatrix;

use crate::approx::{cheb_t, cheb_u};
use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::linalg::{cx, principal_sqrt, vec_norm, C64, HermitianEigen};
use crate::problem::{EntryOracle, SparseHermitianInstance};
use crate::simcore::state::{Layout, ProjectedState, QuantumState};

/// Entries feeding the walk must satisfy |A_jk| ≤ 1 (the junk amplitude is
/// √(1 − |A_jk|)); magnitudes may exceed 1 by at most this much — the same
/// slack the instance loader allows on the spectral norm — and are clamped.
pub const WALK_ENTRY_TOL: f64 = 1e-9;

/// Largest walk-space dimension (2N)² that [`WalkOperator::dense_w`] will
/// materialize. The factored application [`WalkOperator::apply_w`] costs
/// O(Nd + N²) per step and is the path every solver uses; the dense matrix
/// exists for small-instance verification only, since at N = 64 it would
/// hold (2N)⁴ complex entries (about 4 GiB).
pub const DENSE_WALK_LIMIT: usize = 1024;

/// The walk isometry, its swap-reflection step, and the scaled matrix
/// H = A/d they encode. Immutable after construction; all applications are
/// pure, so parallel use across branches is safe.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    n: usize,
    d: usize,
    h: DMatrix<C64>,
    h_eigen: HermitianEigen,
    /// Sparse columns of T: t_cols[j] holds (flat walk index, amplitude)
    /// for the ≤ 2d + 1 nonzero cells of |ψ_j⟩.
    t_cols: Vec<Vec<(usize, C64)>>,
}

impl WalkOperator {
    /// Build the walk for a loaded instance through its entry oracle. Each
    /// column reads its slot structure in superposition, charged at 2
    /// queries per column (one locate, one value).
    pub fn build_walk(
        inst: &SparseHermitianInstance,
        ledger: &mut CostLedger,
    ) -> Result<WalkOperator> {
        let oracle = EntryOracle::new(inst);
        ledger.pa_queries += 2 * inst.n as u64;
        Self::from_oracle(&oracle)
    }

    /// Build the walk directly over a Hermitian matrix with at most `d`
    /// structural nonzeros per column and entries of magnitude ≤ 1; the
    /// matrix norm is unconstrained (the walk encodes H = A/d regardless).
    pub fn from_matrix(a: &DMatrix<C64>, d: usize, ledger: &mut CostLedger) -> Result<WalkOperator> {
        let oracle = EntryOracle::from_dense(a, d)?;
        ledger.pa_queries += 2 * a.nrows() as u64;
        Self::from_oracle(&oracle)
    }

    fn from_oracle(oracle: &EntryOracle) -> Result<WalkOperator> {
        let n = oracle.dim();
        let d = oracle.sparsity();
        let side = 2 * n;
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();

        let mut h = DMatrix::<C64>::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                h[(r, c)] = oracle.entry0(r, c) / d as f64;
            }
        }
        let h_eigen = HermitianEigen::decompose(&h)?;

        let mut t_cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut col: Vec<(usize, C64)> = Vec::with_capacity(2 * d + 1);
            for &k in oracle.slots0(j) {
                if k == j {
                    let ajj = oracle.entry0(j, j).re;
                    if ajj.abs() > 1.0 + WALK_ENTRY_TOL {
                        return Err(Error::Config(format!(
                            "diagonal entry ({j}, {j}) has magnitude {}, above the \
                             unit bound the walk dilation needs",
                            ajj.abs()
                        )));
                    }
                    if ajj >= 0.0 {
                        let mag = ajj.min(1.0);
                        if mag > 0.0 {
                            col.push((j * side + j, cx(mag.sqrt() * inv_sqrt_d, 0.0)));
                        }
                        if mag < 1.0 {
                            col.push((
                                j * side + j + n,
                                cx((1.0 - mag).sqrt() * inv_sqrt_d, 0.0),
                            ));
                        }
                    } else {
                        // Mirrored-cell rotation: sin 2φ = −A_jj.
                        let phi = 0.5 * (-ajj).min(1.0).asin();
                        col.push((j * side + j + n, cx(phi.cos() * inv_sqrt_d, 0.0)));
                        col.push(((j + n) * side + j, cx(-phi.sin() * inv_sqrt_d, 0.0)));
                    }
                } else {
                    // Canonical representative of the unordered pair.
                    let a = oracle.entry0(j.min(k), j.max(k));
                    let mag = a.norm();
                    if mag > 1.0 + WALK_ENTRY_TOL {
                        return Err(Error::Config(format!(
                            "entry ({j}, {k}) has magnitude {mag}, above the unit \
                             bound the walk dilation needs"
                        )));
                    }
                    let root = principal_sqrt(a.conj());
                    let c = if j < k { root } else { root.conj() };
                    if c != cx(0.0, 0.0) {
                        col.push((j * side + k, c * inv_sqrt_d));
                    }
                    let junk = (1.0 - mag.min(1.0)).sqrt();
                    if junk > 0.0 {
                        col.push((j * side + k + n, cx(junk * inv_sqrt_d, 0.0)));
                    }
                }
            }
            let norm2: f64 = col.iter().map(|&(_, c)| c.norm_sqr()).sum();
            assert!(
                (norm2 - 1.0).abs() <= 1e-12,
                "walk column {j} has squared norm {norm2}, expected 1"
            );
            t_cols.push(col);
        }

        Ok(WalkOperator {
            n,
            d,
            h,
            h_eigen,
            t_cols,
        })
    }

    /// Index-space dimension N.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Sparsity d of the underlying oracle.
    pub fn sparsity(&self) -> usize {
        self.d
    }

    /// The encoded matrix H = A/d.
    pub fn h(&self) -> &DMatrix<C64> {
        &self.h
    }

    /// Eigendecomposition of H (certification ground truth).
    pub fn h_eigen(&self) -> &HermitianEigen {
        &self.h_eigen
    }

    /// Walk-space dimension (2N)².
    pub fn walk_dim(&self) -> usize {
        4 * self.n * self.n
    }

    /// Ancilla qubits a circuit-level T dilation would use: ⌈log₂ 2N⌉ + 1.
    /// The simulator's ancilla register has exact dimension 4N instead of
    /// 2^m, since the walk space factors as N · 4N with nothing to pad.
    pub fn ancilla_qubits(&self) -> u32 {
        (2 * self.n).next_power_of_two().trailing_zeros() + 1
    }

    /// T|ψ⟩: embed an index-space vector into the walk space.
    pub fn apply_t(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.n {
            return Err(Error::BadDimension(format!(
                "walk embedding needs a length-{} vector, got {}",
                self.n,
                psi.len()
            )));
        }
        let mut out = vec![cx(0.0, 0.0); self.walk_dim()];
        for (col, &a) in self.t_cols.iter().zip(psi) {
            if a == cx(0.0, 0.0) {
                continue;
            }
            for &(idx, c) in col {
                out[idx] += c * a;
            }
        }
        Ok(out)
    }

    /// T†|Φ⟩: project a walk-space vector back to the index space.
    pub fn apply_t_dag(&self, phi: &[C64]) -> Result<Vec<C64>> {
        if phi.len() != self.walk_dim() {
            return Err(Error::BadDimension(format!(
                "walk projection needs a length-{} vector, got {}",
                self.walk_dim(),
                phi.len()
            )));
        }
        Ok(self
            .t_cols
            .iter()
            .map(|col| col.iter().map(|&(idx, c)| c.conj() * phi[idx]).sum())
            .collect())
    }

    /// S|Φ⟩: swap the two walk-space factors.
    pub fn apply_s(&self, phi: &[C64]) -> Result<Vec<C64>> {
        if phi.len() != self.walk_dim() {
            return Err(Error::BadDimension(format!(
                "swap needs a length-{} vector, got {}",
                self.walk_dim(),
                phi.len()
            )));
        }
        let side = 2 * self.n;
        let mut out = vec![cx(0.0, 0.0); phi.len()];
        for f in 0..side {
            for s in 0..side {
                out[s * side + f] = phi[f * side + s];
            }
        }
        Ok(out)
    }

    /// W|Φ⟩ = S(2TT† − 1)|Φ⟩, applied in factored form: O(Nd + N²) per
    /// step instead of the (2N)⁴ cost a dense W would incur.
    pub fn apply_w(&self, phi: &[C64]) -> Result<Vec<C64>> {
        let proj = self.apply_t_dag(phi)?;
        let mut out: Vec<C64> = phi.iter().map(|&z| -z).collect();
        for (col, &p) in self.t_cols.iter().zip(&proj) {
            let a = p * 2.0;
            if a == cx(0.0, 0.0) {
                continue;
            }
            for &(idx, c) in col {
                out[idx] += c * a;
            }
        }
        self.apply_s(&out)
    }

    /// One ledger-visible walk step: 2 oracle queries, 1 walk tick.
    pub fn apply_w_charged(&self, phi: &[C64], ledger: &mut CostLedger) -> Result<Vec<C64>> {
        ledger.pa_queries += 2;
        ledger.walk_steps += 1;
        self.apply_w(phi)
    }

    /// Dense T (walk_dim × N), for small-instance verification.
    pub fn dense_t(&self) -> DMatrix<C64> {
        let mut t = DMatrix::zeros(self.walk_dim(), self.n);
        for (j, col) in self.t_cols.iter().enumerate() {
            for &(idx, c) in col {
                t[(idx, j)] = c;
            }
        }
        t
    }

    /// Dense W, guarded by [`DENSE_WALK_LIMIT`].
    pub fn dense_w(&self) -> Result<DMatrix<C64>> {
        let dim = self.walk_dim();
        if dim > DENSE_WALK_LIMIT {
            return Err(Error::Config(format!(
                "walk space has dimension {dim}, above the dense materialization \
                 guard {DENSE_WALK_LIMIT}; use the factored application instead"
            )));
        }
        let mut w = DMatrix::zeros(dim, dim);
        let mut basis = vec![cx(0.0, 0.0); dim];
        for c in 0..dim {
            basis[c] = cx(1.0, 0.0);
            let col = self.apply_w(&basis)?;
            basis[c] = cx(0.0, 0.0);
            for (r, &v) in col.iter().enumerate() {
                w[(r, c)] = v;
            }
        }
        Ok(w)
    }

    /// Max over eigenvectors |λ⟩ of H of
    /// ‖Wⁿ T|λ⟩ − (𝒯_n(λ) T|λ⟩ + √(1−λ²) 𝒰_{n−1}(λ) |⊥_λ⟩)‖, with
    /// |⊥_λ⟩ = (S − λ)T|λ⟩/√(1−λ²), taken as 0 when |λ| = 1 (the walk then
    /// fixes the T image and the rotation plane degenerates).
    pub fn walk_power_block_check(&self, n_pow: u64) -> Result<f64> {
        assert!(n_pow >= 1, "power check needs n >= 1");
        let mut worst = 0.0_f64;
        for (i, &lam) in self.h_eigen.values.iter().enumerate() {
            let v: Vec<C64> = self.h_eigen.vectors.column(i).iter().copied().collect();
            let t_v = self.apply_t(&v)?;
            let gap = 1.0 - lam * lam;
            let mut expect: Vec<C64> = {
                let tn = cheb_t(n_pow, lam);
                t_v.iter().map(|&z| z * tn).collect()
            };
            if gap > 1e-24 {
                let st = self.apply_s(&t_v)?;
                let scale = gap.sqrt();
                let coeff = scale * cheb_u(n_pow - 1, lam);
                for ((e, &s), &t) in expect.iter_mut().zip(&st).zip(&t_v) {
                    // coeff/scale · (st − λ t) = √(1−λ²) 𝒰_{n−1}(λ) |⊥_λ⟩.
                    *e += (s - t * lam) * (coeff / scale);
                }
            }
            let mut actual = t_v;
            for _ in 0..n_pow {
                actual = self.apply_w(&actual)?;
            }
            let dev = actual
                .iter()
                .zip(&expect)
                .map(|(a, e)| (a - e).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(dev);
        }
        Ok(worst)
    }

    /// Dilated Chebyshev application: embed |ψ⟩ as T|ψ⟩, walk n steps,
    /// project back. The returned state lives on (ancilla, index) with the
    /// ancilla-zero block equal to T†WⁿT|ψ⟩ = 𝒯_n(H)|ψ⟩; the orthogonal
    /// blocks are not materialized (every consumer postselects ancilla = 0)
    /// and their probability mass is recorded as the discarded weight. The
    /// ledger takes exactly n walk steps plus the two dilation boundaries.
    pub fn apply_chebyshev(
        &self,
        n_pow: u64,
        state: &QuantumState,
        ledger: &mut CostLedger,
    ) -> Result<ProjectedState> {
        let regs: Vec<(String, usize)> = state
            .layout()
            .registers()
            .map(|(name, dim)| (name.to_string(), dim))
            .collect();
        if regs.len() != 1 || regs[0].1 != self.n {
            return Err(Error::Layout(format!(
                "Chebyshev application needs a single index register of \
                 dimension {}, got {:?}",
                self.n, regs
            )));
        }

        ledger.pa_queries += 2;
        let mut phi = self.apply_t(state.amplitudes())?;
        for _ in 0..n_pow {
            phi = self.apply_w_charged(&phi, ledger)?;
        }
        let block = self.apply_t_dag(&phi)?;
        ledger.pa_queries += 2;

        let anc_dim = 2 * self.walk_dim() / self.n; // 4N
        let layout = Layout::new(&[("ancilla", anc_dim / 2), (&regs[0].0, self.n)])?;
        let mut amps = vec![cx(0.0, 0.0); (anc_dim / 2) * self.n];
        amps[..self.n].copy_from_slice(&block);
        let kept = vec_norm(&block).powi(2);
        Ok(ProjectedState {
            layout,
            amps,
            discarded_weight: (1.0 - kept).max(0.0),
        })
    }
}
