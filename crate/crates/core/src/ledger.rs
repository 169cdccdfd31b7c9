//! Query accounting.
//!
//! The simulator computes states exactly, but every operation also charges a
//! [`CostLedger`] with the query count the corresponding quantum circuit
//! would incur. Counts are deterministic integers (plus one time-weighted
//! float), so regressions can assert them exactly.
//!
//! Conventions, kept uniform across the crate:
//!
//! - entry-oracle calls `locate`/`value`: 1 sparse-access query each;
//! - a superposed column read (walk construction): 2 queries per column,
//!   one locate and one value in slot superposition;
//! - one walk step W or W†: 2 queries and 1 `walk_steps` tick;
//! - entering or leaving the walk dilation (T or T†): 2 queries;
//! - one select pass over a term program is charged at the cost of its most
//!   expensive term, the cost of the controlled-power ladder that realizes
//!   Σᵢ |i⟩⟨i| ⊗ Uᵢ: for walk terms, `max_order` steps plus one dilation
//!   pair; for evolution terms, 1 `evolution_uses` at the maximal |t|;
//! - `exact_evolution(t)` called directly: 1 use with weight |t|;
//! - gapped phase estimation at `t` phase bits and `r` rounds: r·t evolution
//!   uses with total time weight r·(2^t − 1);
//! - state preparation of |b⟩, or either of the two preparation calls inside
//!   a reflection about |b⟩: 1 `pb_uses` each.

use serde::Serialize;

/// Running totals for one task. Merge by summation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CostLedger {
    /// Sparse-access (entry oracle) queries.
    pub pa_queries: u64,
    /// Uses of the |b⟩ preparation oracle.
    pub pb_uses: u64,
    /// Quantum-walk steps applied.
    pub walk_steps: u64,
    /// Invocations of exact Hamiltonian evolution exp(−iAt).
    pub evolution_uses: u64,
    /// Σ|t| over those invocations.
    pub evolution_time_total: f64,
    /// Amplitude-amplification rounds executed.
    pub aa_rounds: u64,
}

impl CostLedger {
    /// Fold another ledger into this one.
    pub fn merge(&mut self, other: &CostLedger) {
        self.pa_queries += other.pa_queries;
        self.pb_uses += other.pb_uses;
        self.walk_steps += other.walk_steps;
        self.evolution_uses += other.evolution_uses;
        self.evolution_time_total += other.evolution_time_total;
        self.aa_rounds += other.aa_rounds;
    }
}

impl std::ops::AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: CostLedger) {
        self.merge(&rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_sums_every_counter() {
        let mut a = CostLedger {
            pa_queries: 1,
            pb_uses: 2,
            walk_steps: 3,
            evolution_uses: 4,
            evolution_time_total: 0.5,
            aa_rounds: 6,
        };
        let b = a;
        a += b;
        assert_eq!(a.pa_queries, 2);
        assert_eq!(a.pb_uses, 4);
        assert_eq!(a.walk_steps, 6);
        assert_eq!(a.evolution_uses, 8);
        assert!((a.evolution_time_total - 1.0).abs() < 1e-15);
        assert_eq!(a.aa_rounds, 12);
    }
}
