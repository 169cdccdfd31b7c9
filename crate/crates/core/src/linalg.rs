//! Dense complex linear algebra helpers used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Complex double shorthand.
pub type C64 = Complex64;

/// Construct a complex number.
#[inline]
pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Principal square root, branch cut with arg ∈ (−π, π].
#[inline]
pub fn principal_sqrt(z: C64) -> C64 {
    z.sqrt()
}

/// √(z*) under the convention √(z*) := (√z)*, so (√(z*))* · √(z*) … chains
/// stay consistent on the branch cut (negative reals included).
#[inline]
pub fn conj_sqrt(z: C64) -> C64 {
    z.sqrt().conj()
}

/// ‖v‖₂ of a complex slice.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨a|b⟩ = Σ conj(aᵢ)·bᵢ.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// ‖a − b‖₂.
pub fn vec_dist(a: &[C64], b: &[C64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Align `v` to `reference` by the global phase maximizing the overlap and
/// return (phase applied to v, ‖e^{iφ}v − reference‖).
pub fn align_phase(reference: &[C64], v: &[C64]) -> (C64, f64) {
    let ov = inner(reference, v);
    let phase = if ov.norm() < 1e-300 {
        cx(1.0, 0.0)
    } else {
        ov.conj() / ov.norm()
    };
    let dist = reference
        .iter()
        .zip(v)
        .map(|(r, x)| (phase * x - r).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (phase, dist)
}

/// Compensated (Kahan–Neumaier) accumulator for f64 sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex sums (componentwise Kahan).
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanComplex {
    re: KahanSum,
    im: KahanSum,
}

impl KahanComplex {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        cx(self.re.value(), self.im.value())
    }
}

/// Σ_{j=0}^{n−1} e^{−iθj}, evaluated through the Dirichlet-kernel closed form
/// e^{−iθ(n−1)/2}·sin(nθ/2)/sin(θ/2). Stable for tiny θ and exact for θ = 0.
pub fn geometric_phase_sum(theta: f64, n: u64) -> C64 {
    if n == 0 {
        return cx(0.0, 0.0);
    }
    let nf = n as f64;
    let half = 0.5 * theta;
    let denom = half.sin();
    if theta == 0.0 || denom == 0.0 {
        return cx(nf, 0.0);
    }
    let ratio = (nf * half).sin() / denom;
    let mid = -(nf - 1.0) * half;
    cx(mid.cos(), mid.sin()) * ratio
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Unitary with eigenvectors as columns, same order as `values`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// Decompose `m`; the caller guarantees Hermiticity.
    pub fn decompose(m: &DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::BadDimension(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let eig = m.clone().symmetric_eigen();
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(HermitianEigen { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Coordinates of `v` in the eigenbasis: V†v.
    pub fn to_eigenbasis(&self, v: &[C64]) -> Vec<C64> {
        let vec = DVector::from_column_slice(v);
        let out = self.vectors.adjoint() * vec;
        out.as_slice().to_vec()
    }

    /// Map eigenbasis coordinates back: V c.
    pub fn from_eigenbasis(&self, c: &[C64]) -> Vec<C64> {
        let vec = DVector::from_column_slice(c);
        let out = &self.vectors * vec;
        out.as_slice().to_vec()
    }

    /// Apply f(M)v = V f(Λ) V† v for a scalar function on the spectrum.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64, v: &[C64]) -> Vec<C64> {
        let mut c = self.to_eigenbasis(v);
        for (ci, &lam) in c.iter_mut().zip(&self.values) {
            *ci *= f(lam);
        }
        self.from_eigenbasis(&c)
    }

    /// Dense f(M) as a matrix.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.values.iter().map(|&l| f(l)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Spectral norm of a Hermitian matrix (max |eigenvalue|).
pub fn spectral_norm_hermitian(m: &DMatrix<C64>) -> Result<f64> {
    Ok(HermitianEigen::decompose(m)?.max_abs())
}

/// Operator 2-norm of an arbitrary matrix, via the top eigenvalue of M†M.
pub fn op_norm(m: &DMatrix<C64>) -> Result<f64> {
    let gram = m.adjoint() * m;
    let top = HermitianEigen::decompose(&gram)?.max_abs();
    Ok(top.max(0.0).sqrt())
}

/// Singular values of an arbitrary matrix, descending.
pub fn singular_values(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let gram = m.adjoint() * m;
    let eig = HermitianEigen::decompose(&gram)?;
    let mut sv: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Extend orthonormal columns to a full unitary. The input columns become
/// columns 0..k of the result; the rest are Gram–Schmidt completions of the
/// canonical basis, taken in index order (deterministic).
pub fn complete_isometry(cols: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (dim, k) = (cols.nrows(), cols.ncols());
    if k > dim {
        return Err(Error::BadDimension(format!(
            "cannot complete {k} columns in dimension {dim}"
        )));
    }
    let mut basis: Vec<DVector<C64>> = (0..k).map(|j| cols.column(j).into_owned()).collect();
    let mut cand = 0usize;
    while basis.len() < dim {
        if cand >= dim {
            return Err(Error::Numeric(
                "isometry completion ran out of candidates (input not orthonormal?)".into(),
            ));
        }
        let mut v = DVector::<C64>::zeros(dim);
        v[cand] = cx(1.0, 0.0);
        cand += 1;
        for _ in 0..2 {
            for b in &basis {
                let ov = b.dotc(&v);
                v -= b * ov;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / cx(norm, 0.0));
        }
    }
    let mut out = DMatrix::zeros(dim, dim);
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    Ok(out)
}

/// Haar-ish random unitary via QR of a complex Ginibre matrix with the
/// R-diagonal phase fix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    use rand::distributions::Distribution;
    let normal = rand_distr_standard_normal();
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        cx(normal.sample(rng), normal.sample(rng))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            cx(1.0, 0.0)
        };
        let col = q.column(j) * phase.conj();
        q.set_column(j, &col);
    }
    q
}

/// Random complex vector with i.i.d. standard-normal components.
pub fn random_complex_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    use rand::distributions::Distribution;
    let normal = rand_distr_standard_normal();
    (0..dim)
        .map(|_| cx(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Random unit vector.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    loop {
        let v = random_complex_vector(dim, rng);
        let n = vec_norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

fn rand_distr_standard_normal() -> impl rand::distributions::Distribution<f64> {
    // Box–Muller via two uniforms; avoids an extra dependency and is plenty
    // for instance generation.
    struct BoxMuller;
    impl rand::distributions::Distribution<f64> for BoxMuller {
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }
    BoxMuller
}
