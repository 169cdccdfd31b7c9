//! Register-structured state vectors.
//!
//! A [`QuantumState`] is a normalized amplitude vector over an ordered list
//! of named registers (clock, flag, index, ancilla, …).  Register dimensions
//! are arbitrary positive integers, not just powers of two; the flat index of
//! a basis state is Σ value_r · stride_r with the leftmost register most
//! significant.  Unnormalized intermediates (post-selected blocks, dilation
//! outputs) are a distinct [`ProjectedState`] carrying the discarded weight.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{cx, vec_norm, C64};

/// Normalization tolerance for [`QuantumState`].
pub const NORM_TOL: f64 = 1e-10;

/// Ordered register list with cached strides.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    names: Vec<String>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl Layout {
    pub fn new(regs: &[(&str, usize)]) -> Result<Layout> {
        if regs.is_empty() {
            return Err(Error::Layout("layout needs at least one register".into()));
        }
        let mut names = Vec::with_capacity(regs.len());
        let mut dims = Vec::with_capacity(regs.len());
        for &(name, dim) in regs {
            if dim == 0 {
                return Err(Error::Layout(format!("register '{name}' has dimension 0")));
            }
            if names.iter().any(|n| n == name) {
                return Err(Error::Layout(format!("duplicate register name '{name}'")));
            }
            names.push(name.to_string());
            dims.push(dim);
        }
        let mut strides = vec![0usize; dims.len()];
        let mut acc = 1usize;
        for i in (0..dims.len()).rev() {
            strides[i] = acc;
            acc = acc
                .checked_mul(dims[i])
                .ok_or_else(|| Error::Layout("layout dimension overflows usize".into()))?;
        }
        Ok(Layout { names, dims, strides, dim: acc })
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, usize)> {
        self.names
            .iter()
            .map(|s| s.as_str())
            .zip(self.dims.iter().copied())
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Layout(format!("no register named '{name}'")))
    }

    pub fn reg_dim(&self, name: &str) -> Result<usize> {
        Ok(self.dims[self.position(name)?])
    }

    pub fn stride(&self, name: &str) -> Result<usize> {
        Ok(self.strides[self.position(name)?])
    }

    /// Flat index of a full assignment (one value per register, in order).
    pub fn index(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.dims.len());
        debug_assert!(values.iter().zip(&self.dims).all(|(v, d)| v < d));
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Per-register values of a flat index, in register order.
    pub fn unpack(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dims.len());
        for &s in &self.strides {
            out.push(idx / s);
            idx %= s;
        }
        out
    }
}

/// Control predicate for [`QuantumState::apply_local`].
#[derive(Clone, Copy, Debug)]
pub enum Ctrl<'a> {
    /// Register value equals the given integer.
    Eq(&'a str, usize),
    /// The given bit of the register's value is set.
    Bit(&'a str, u32),
}

#[derive(Clone, Copy, Debug)]
enum CtrlKind {
    Eq(usize),
    Bit(u32),
}

impl CtrlKind {
    fn holds(self, value: usize) -> bool {
        match self {
            CtrlKind::Eq(v) => value == v,
            CtrlKind::Bit(b) => (value >> b) & 1 == 1,
        }
    }
}

/// Enumerate assignments of the registers at `positions` (given their dims
/// and strides), invoking `f` with the flat offset those registers
/// contribute, for every assignment passing all control predicates.  Ctrl
/// positions must be among `positions`.
fn for_each_offset(
    dims: &[usize],
    strides: &[usize],
    positions: &[usize],
    ctrls: &[(usize, CtrlKind)],
    mut f: impl FnMut(usize),
) {
    let k = positions.len();
    let ctrl_slots: Vec<(usize, CtrlKind)> = ctrls
        .iter()
        .map(|&(pos, kind)| {
            let slot = positions
                .iter()
                .position(|&p| p == pos)
                .expect("control register must be enumerated");
            (slot, kind)
        })
        .collect();
    let mut values = vec![0usize; k];
    loop {
        if ctrl_slots.iter().all(|&(slot, kind)| kind.holds(values[slot])) {
            let offset: usize = positions
                .iter()
                .zip(&values)
                .map(|(&p, &v)| v * strides[p])
                .sum();
            f(offset);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            values[i] += 1;
            if values[i] < dims[positions[i]] {
                break;
            }
            values[i] = 0;
        }
    }
}

/// Flat offsets of every joint value of `targets` (mixed radix, leftmost
/// most significant).
fn target_offsets(dims: &[usize], strides: &[usize], tpos: &[usize]) -> Vec<usize> {
    let td: usize = tpos.iter().map(|&p| dims[p]).product();
    let mut offsets = vec![0usize; td];
    for (t, slot) in offsets.iter_mut().enumerate() {
        let mut rem = t;
        let mut off = 0usize;
        for &p in tpos.iter().rev() {
            off += (rem % dims[p]) * strides[p];
            rem /= dims[p];
        }
        *slot = off;
    }
    offsets
}

/// Normalized state over a [`Layout`].
#[derive(Clone, Debug)]
pub struct QuantumState {
    layout: Layout,
    amps: Vec<C64>,
}

/// Unnormalized block of a state, produced by projections and partial
/// isometries.  `discarded_weight` is the probability weight removed from
/// the source state, so Σ|amps|² + discarded_weight equals the source norm².
#[derive(Clone, Debug)]
pub struct ProjectedState {
    pub layout: Layout,
    pub amps: Vec<C64>,
    pub discarded_weight: f64,
}

impl QuantumState {
    pub fn new(layout: Layout, amps: Vec<C64>) -> Result<QuantumState> {
        if amps.len() != layout.dim() {
            return Err(Error::Layout(format!(
                "amplitude vector has length {}, layout dimension is {}",
                amps.len(),
                layout.dim()
            )));
        }
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Layout(format!(
                "state norm {norm} deviates from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(QuantumState { layout, amps })
    }

    /// State with a single register holding the given normalized amplitudes.
    pub fn single_register(name: &str, amps: Vec<C64>) -> QuantumState {
        let layout = Layout::new(&[(name, amps.len())]).expect("single register layout");
        QuantumState::new(layout, amps).expect("caller promises a normalized vector")
    }

    /// Product state: one normalized amplitude block per register, in order.
    pub fn from_product(parts: &[(&str, &[C64])]) -> Result<QuantumState> {
        let layout =
            Layout::new(&parts.iter().map(|&(n, a)| (n, a.len())).collect::<Vec<_>>())?;
        let mut amps = vec![cx(1.0, 0.0)];
        for &(_, block) in parts {
            let mut next = Vec::with_capacity(amps.len() * block.len());
            for a in &amps {
                for b in block {
                    next.push(a * b);
                }
            }
            amps = next;
        }
        QuantumState::new(layout, amps)
    }

    /// Computational basis state with the given per-register values.
    pub fn basis(layout: Layout, values: &[usize]) -> Result<QuantumState> {
        if values.len() != layout.dims.len() {
            return Err(Error::Layout(format!(
                "{} values for {} registers",
                values.len(),
                layout.dims.len()
            )));
        }
        for (i, (&v, &d)) in values.iter().zip(&layout.dims).enumerate() {
            if v >= d {
                return Err(Error::Layout(format!(
                    "value {v} out of range for register '{}' (dim {d})",
                    layout.names[i]
                )));
            }
        }
        let idx = layout.index(values);
        let mut amps = vec![cx(0.0, 0.0); layout.dim()];
        amps[idx] = cx(1.0, 0.0);
        Ok(QuantumState { layout, amps })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, values: &[usize]) -> C64 {
        self.amps[self.layout.index(values)]
    }

    fn resolve_ctrls(&self, targets: &[usize], ctrls: &[Ctrl]) -> Result<Vec<(usize, CtrlKind)>> {
        let mut out = Vec::with_capacity(ctrls.len());
        for c in ctrls {
            let (name, kind) = match *c {
                Ctrl::Eq(name, v) => (name, CtrlKind::Eq(v)),
                Ctrl::Bit(name, b) => (name, CtrlKind::Bit(b)),
            };
            let pos = self.layout.position(name)?;
            if targets.contains(&pos) {
                return Err(Error::Layout(format!(
                    "control register '{name}' is also a target"
                )));
            }
            if let CtrlKind::Eq(v) = kind {
                if v >= self.layout.dims[pos] {
                    return Err(Error::Layout(format!(
                        "control value {v} out of range for register '{name}'"
                    )));
                }
            }
            out.push((pos, kind));
        }
        Ok(out)
    }

    /// Apply a dense operator to the joint index of `targets` (in the order
    /// given, leftmost most significant), restricted to branches where all
    /// `ctrls` hold.  Unitarity of `op` is the caller's responsibility.
    pub fn apply_local(
        &mut self,
        targets: &[&str],
        op: &DMatrix<C64>,
        ctrls: &[Ctrl],
    ) -> Result<()> {
        let tpos: Vec<usize> = targets
            .iter()
            .map(|t| self.layout.position(t))
            .collect::<Result<_>>()?;
        for (i, p) in tpos.iter().enumerate() {
            if tpos[..i].contains(p) {
                return Err(Error::Layout(format!("duplicate target '{}'", targets[i])));
            }
        }
        let td: usize = tpos.iter().map(|&p| self.layout.dims[p]).product();
        if op.nrows() != td || op.ncols() != td {
            return Err(Error::Layout(format!(
                "operator is {}x{}, targets span dimension {td}",
                op.nrows(),
                op.ncols()
            )));
        }
        let ctrls = self.resolve_ctrls(&tpos, ctrls)?;
        let offsets = target_offsets(&self.layout.dims, &self.layout.strides, &tpos);
        let others: Vec<usize> =
            (0..self.layout.dims.len()).filter(|p| !tpos.contains(p)).collect();

        let dims = self.layout.dims.clone();
        let strides = self.layout.strides.clone();
        let amps = &mut self.amps;
        let mut buf = vec![cx(0.0, 0.0); td];
        let mut out = vec![cx(0.0, 0.0); td];
        for_each_offset(&dims, &strides, &others, &ctrls, |base| {
            for (t, &off) in offsets.iter().enumerate() {
                buf[t] = amps[base + off];
            }
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = cx(0.0, 0.0);
                for (j, b) in buf.iter().enumerate() {
                    acc += op[(i, j)] * b;
                }
                *o = acc;
            }
            for (t, &off) in offsets.iter().enumerate() {
                amps[base + off] = out[t];
            }
        });
        Ok(())
    }

    /// Relabel basis states of the joint `targets` index by a bijection given
    /// as per-register values → per-register values.
    pub fn apply_register_permutation(
        &mut self,
        targets: &[&str],
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<()> {
        let tpos: Vec<usize> = targets
            .iter()
            .map(|t| self.layout.position(t))
            .collect::<Result<_>>()?;
        let tdims: Vec<usize> = tpos.iter().map(|&p| self.layout.dims[p]).collect();
        let td: usize = tdims.iter().product();

        // Tabulate the map once and verify it is a bijection.
        let mut table = vec![0usize; td];
        let mut seen = vec![false; td];
        let mut vals = vec![0usize; tdims.len()];
        for (t, entry) in table.iter_mut().enumerate() {
            let mut rem = t;
            for i in (0..tdims.len()).rev() {
                vals[i] = rem % tdims[i];
                rem /= tdims[i];
            }
            let img = f(&vals);
            if img.len() != tdims.len() {
                return Err(Error::Layout("permutation image has wrong arity".into()));
            }
            let mut dst = 0usize;
            for (&v, &d) in img.iter().zip(&tdims) {
                if v >= d {
                    return Err(Error::Layout(format!(
                        "permutation image value {v} out of range (dim {d})"
                    )));
                }
                dst = dst * d + v;
            }
            if seen[dst] {
                return Err(Error::Layout("register map is not a bijection".into()));
            }
            seen[dst] = true;
            *entry = dst;
        }

        let offsets = target_offsets(&self.layout.dims, &self.layout.strides, &tpos);
        let others: Vec<usize> =
            (0..self.layout.dims.len()).filter(|p| !tpos.contains(p)).collect();
        let dims = self.layout.dims.clone();
        let strides = self.layout.strides.clone();
        let amps = &mut self.amps;
        let mut buf = vec![cx(0.0, 0.0); td];
        for_each_offset(&dims, &strides, &others, &[], |base| {
            for (t, &off) in offsets.iter().enumerate() {
                buf[t] = amps[base + off];
            }
            for (t, &dst) in table.iter().enumerate() {
                amps[base + offsets[dst]] = buf[t];
            }
        });
        Ok(())
    }

    /// Replace register `from` (dimension m) by a new register (dimension
    /// m′) through an arbitrary linear block map `f: ℂ^m → ℂ^{m′}`, applied
    /// branchwise.  For an isometry the discarded weight is ~0 and
    /// [`ProjectedState::into_state`] recovers a normalized state.
    pub fn map_register(
        &self,
        from: &str,
        to: (&str, usize),
        f: impl Fn(&[C64], &mut [C64]),
    ) -> Result<ProjectedState> {
        let pos = self.layout.position(from)?;
        let (to_name, to_dim) = to;
        let mut regs: Vec<(&str, usize)> = self.layout.registers().collect();
        regs[pos] = (to_name, to_dim);
        let new_layout = Layout::new(&regs)?;

        let from_dim = self.layout.dims[pos];
        let from_stride = self.layout.strides[pos];
        let to_stride = new_layout.strides[pos];
        let mut new_amps = vec![cx(0.0, 0.0); new_layout.dim()];
        let mut in_block = vec![cx(0.0, 0.0); from_dim];
        let mut out_block = vec![cx(0.0, 0.0); to_dim];

        let others: Vec<usize> = (0..self.layout.dims.len()).filter(|&p| p != pos).collect();
        let mut values = vec![0usize; others.len()];
        loop {
            let (mut base_in, mut base_out) = (0usize, 0usize);
            for (slot, &p) in others.iter().enumerate() {
                base_in += values[slot] * self.layout.strides[p];
                base_out += values[slot] * new_layout.strides[p];
            }
            for (k, slot) in in_block.iter_mut().enumerate() {
                *slot = self.amps[base_in + k * from_stride];
            }
            out_block.iter_mut().for_each(|z| *z = cx(0.0, 0.0));
            f(&in_block, &mut out_block);
            for (k, &v) in out_block.iter().enumerate() {
                new_amps[base_out + k * to_stride] = v;
            }
            let mut i = others.len();
            loop {
                if i == 0 {
                    let in_norm2: f64 = self.amps.iter().map(|z| z.norm_sqr()).sum();
                    let out_norm2: f64 = new_amps.iter().map(|z| z.norm_sqr()).sum();
                    return Ok(ProjectedState {
                        layout: new_layout,
                        amps: new_amps,
                        discarded_weight: (in_norm2 - out_norm2).max(0.0),
                    });
                }
                i -= 1;
                values[i] += 1;
                if values[i] < self.layout.dims[others[i]] {
                    break;
                }
                values[i] = 0;
            }
        }
    }

    /// Keep only branches where `reg` has the given value.
    pub fn project(&self, reg: &str, value: usize) -> Result<ProjectedState> {
        let pos = self.layout.position(reg)?;
        if value >= self.layout.dims[pos] {
            return Err(Error::Layout(format!(
                "projection value {value} out of range for register '{reg}'"
            )));
        }
        let stride = self.layout.strides[pos];
        let dim = self.layout.dims[pos];
        let mut amps = self.amps.clone();
        let mut discarded = 0.0;
        for (i, a) in amps.iter_mut().enumerate() {
            if (i / stride) % dim != value {
                discarded += a.norm_sqr();
                *a = cx(0.0, 0.0);
            }
        }
        Ok(ProjectedState { layout: self.layout.clone(), amps, discarded_weight: discarded })
    }

    /// Probability of finding `reg` at the given value.
    pub fn probability_of(&self, reg: &str, value: usize) -> Result<f64> {
        let pos = self.layout.position(reg)?;
        let stride = self.layout.strides[pos];
        let dim = self.layout.dims[pos];
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / stride) % dim == value)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Append a fresh register in state |0⟩ at the end of the layout.
    pub fn add_register(&mut self, name: &str, dim: usize) -> Result<()> {
        let mut regs: Vec<(&str, usize)> = self.layout.registers().collect();
        regs.push((name, dim));
        let new_layout = Layout::new(&regs)?;
        let mut new_amps = vec![cx(0.0, 0.0); new_layout.dim()];
        for (i, &a) in self.amps.iter().enumerate() {
            new_amps[i * dim] = a;
        }
        self.layout = new_layout;
        self.amps = new_amps;
        Ok(())
    }

    /// Drop a register that is definitely in |0⟩; errors if the register
    /// holds weight outside |0⟩ (entangled or displaced).
    pub fn remove_register(&mut self, name: &str) -> Result<()> {
        if self.layout.dims.len() == 1 {
            return Err(Error::Layout("cannot remove the last register".into()));
        }
        let pos = self.layout.position(name)?;
        let stride = self.layout.strides[pos];
        let dim = self.layout.dims[pos];
        let stray: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| !(i / stride).is_multiple_of(dim))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if stray > NORM_TOL * NORM_TOL {
            return Err(Error::Layout(format!(
                "register '{name}' holds weight {stray:.3e} outside |0>; cannot discard"
            )));
        }
        let mut regs: Vec<(&str, usize)> = self.layout.registers().collect();
        regs.remove(pos);
        let new_layout = Layout::new(&regs)?;
        let mut new_amps = vec![cx(0.0, 0.0); new_layout.dim()];
        for (i, a) in new_amps.iter_mut().enumerate() {
            let hi = i / stride;
            let lo = i % stride;
            *a = self.amps[hi * stride * dim + lo];
        }
        self.layout = new_layout;
        self.amps = new_amps;
        Ok(())
    }

    /// Amplitudes of `read` with every other register pinned to `fixed`.
    pub fn register_block(&self, fixed: &[(&str, usize)], read: &str) -> Result<Vec<C64>> {
        register_block(&self.layout, &self.amps, fixed, read)
    }
}

impl ProjectedState {
    /// Retained probability weight Σ|amps|².
    pub fn prob(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Renormalize the retained block into a proper state.
    pub fn normalized(&self) -> Result<QuantumState> {
        let norm = self.prob().sqrt();
        if norm < 1e-150 {
            return Err(Error::Numeric(
                "projected block has vanishing norm; cannot normalize".into(),
            ));
        }
        let amps = self.amps.iter().map(|z| z / norm).collect();
        QuantumState::new(self.layout.clone(), amps)
    }

    /// Promote an isometry image (no discarded weight) back to a state.
    pub fn into_state(self) -> Result<QuantumState> {
        if self.discarded_weight > NORM_TOL {
            return Err(Error::Numeric(format!(
                "map discarded weight {:.3e}; not an isometry",
                self.discarded_weight
            )));
        }
        QuantumState::new(self.layout, self.amps)
    }

    /// Amplitudes of `read` with every other register pinned to `fixed`
    /// (unnormalized).
    pub fn register_block(&self, fixed: &[(&str, usize)], read: &str) -> Result<Vec<C64>> {
        register_block(&self.layout, &self.amps, fixed, read)
    }
}

fn register_block(
    layout: &Layout,
    amps: &[C64],
    fixed: &[(&str, usize)],
    read: &str,
) -> Result<Vec<C64>> {
    if fixed.len() + 1 != layout.dims.len() {
        return Err(Error::Layout(format!(
            "register_block pins {} registers; layout has {} (all but '{read}' must be pinned)",
            fixed.len(),
            layout.dims.len()
        )));
    }
    let mut base = 0usize;
    for &(name, value) in fixed {
        if name == read {
            return Err(Error::Layout(format!("register '{name}' both pinned and read")));
        }
        let pos = layout.position(name)?;
        if value >= layout.dims[pos] {
            return Err(Error::Layout(format!(
                "pinned value {value} out of range for register '{name}'"
            )));
        }
        base += value * layout.strides[pos];
    }
    let pos = layout.position(read)?;
    let stride = layout.strides[pos];
    Ok((0..layout.dims[pos]).map(|k| amps[base + k * stride]).collect())
}
