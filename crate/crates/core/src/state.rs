//! Multiparticle state representations: space shapes, density matrices,
//! ensembles, subspaces and product vectors.
//!
//! Composite indices are row-major in party order: for dims `[D_1, …, D_N]`
//! the basis index is `i = Σ_j i_j · ∏_{k>j} D_k`, so party 1 is the most
//! significant digit. Every reshape in the crate follows this convention.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_psd, eigh, expectation, frobenius, hermitian_defect, kron_vec, svd, CMatrix,
    CVector,
};

/// Default threshold on secondary singular values for product detection.
pub const DEFAULT_TOL_PRODUCT: f64 = 1e-8;

const STATE_TOL: f64 = 1e-10;

/// Per-party dimensions of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceShape {
    dims: Vec<usize>,
}

impl SpaceShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("at least one party is required".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidShape(format!(
                "every party needs dimension >= 2, got {d}"
            )));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape("total dimension overflows".into()))?;
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Splits a composite index into per-party digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Inverse of [`SpaceShape::digits`].
    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Whether this is the two-qubit space `[2, 2]`.
    pub fn is_two_qubit(&self) -> bool {
        self.dims == [2, 2]
    }
}

/// A (possibly unnormalized) density operator on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SpaceShape,
    matrix: CMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// Validated unit-trace density matrix.
    pub fn new(shape: SpaceShape, matrix: CMatrix) -> Result<Self> {
        let rho = Self::validate(shape, matrix, true)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(rho)
    }

    /// Positive operator with arbitrary positive trace. The feasibility tests
    /// only depend on supports, so scale does not matter there.
    pub fn unnormalized(shape: SpaceShape, matrix: CMatrix) -> Result<Self> {
        Self::validate(shape, matrix, false)
    }

    fn validate(shape: SpaceShape, matrix: CMatrix, normalized: bool) -> Result<Self> {
        let d = shape.total();
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let defect = hermitian_defect(&matrix);
        if defect > STATE_TOL {
            return Err(Error::NotHermitian { defect });
        }
        check_psd(&matrix, STATE_TOL).map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr: f64 = (0..d).map(|i| matrix[(i, i)].re).sum();
        if tr <= 0.0 {
            return Err(Error::InvalidState("trace must be positive".into()));
        }
        Ok(Self {
            shape,
            matrix,
            normalized,
        })
    }

    /// `|ψ⟩⟨ψ|` for the normalized direction of `psi`.
    pub fn pure(shape: SpaceShape, psi: &CVector) -> Result<Self> {
        if psi.len() != shape.total() {
            return Err(Error::DimensionMismatch {
                expected: shape.total(),
                found: psi.len(),
            });
        }
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi.unscale(norm);
        Ok(Self {
            shape,
            matrix: linalg::outer(&v, &v),
            normalized: true,
        })
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// `⟨v|ρ|v⟩`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        expectation(&self.matrix, v)
    }

    /// If the state is pure (rank one), returns its unit state vector.
    pub fn pure_vector(&self, tol_rank: f64) -> Option<CVector> {
        let e = eigh(&self.matrix).ok()?;
        let ranks: Vec<f64> = e.eigenvalues.iter().rev().map(|x| x.max(0.0)).collect();
        (linalg::numerical_rank(&ranks, tol_rank) == 1).then(|| e.top_eigenvector())
    }
}

/// A finite list of states together with the set of indices that must be
/// identified with nonzero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    shape: SpaceShape,
    states: Vec<DensityMatrix>,
    delta: Vec<usize>,
    priors: Option<Vec<f64>>,
}

impl StateEnsemble {
    /// `delta` holds 1-based state indices; `None` means all states.
    pub fn new(
        states: Vec<DensityMatrix>,
        delta: Option<Vec<usize>>,
        priors: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = states.len();
        if m < 2 {
            return Err(Error::InvalidEnsemble(format!(
                "need at least two states, got {m}"
            )));
        }
        let shape = states[0].shape().clone();
        if let Some(bad) = states.iter().find(|s| s.shape() != &shape) {
            return Err(Error::InvalidEnsemble(format!(
                "state shapes differ: {:?} vs {:?}",
                shape.dims(),
                bad.shape().dims()
            )));
        }
        let delta = delta.unwrap_or_else(|| (1..=m).collect());
        if delta.is_empty() {
            return Err(Error::InvalidEnsemble("delta is empty".into()));
        }
        for (k, &mu) in delta.iter().enumerate() {
            if mu == 0 || mu > m {
                return Err(Error::IndexOutOfRange { index: mu, count: m });
            }
            if delta[..k].contains(&mu) {
                return Err(Error::InvalidEnsemble(format!("delta repeats index {mu}")));
            }
        }
        if let Some(p) = &priors {
            if p.len() != m {
                return Err(Error::InvalidEnsemble(format!(
                    "{} priors for {m} states",
                    p.len()
                )));
            }
            if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidEnsemble("priors must be non-negative".into()));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidEnsemble(format!("priors sum to {sum}")));
            }
        }
        Ok(Self {
            shape,
            states,
            delta,
            priors,
        })
    }

    /// Ensemble of pure states with all indices in delta and no priors.
    pub fn from_pure(shape: &SpaceShape, vectors: &[CVector]) -> Result<Self> {
        let states = vectors
            .iter()
            .map(|v| DensityMatrix::pure(shape.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, None, None)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// State `mu` (1-based).
    pub fn state(&self, mu: usize) -> Result<&DensityMatrix> {
        if mu == 0 || mu > self.states.len() {
            return Err(Error::IndexOutOfRange {
                index: mu,
                count: self.states.len(),
            });
        }
        Ok(&self.states[mu - 1])
    }

    pub fn delta(&self) -> &[usize] {
        &self.delta
    }

    pub fn priors(&self) -> Option<&[f64]> {
        self.priors.as_deref()
    }

    /// Priors, defaulting to uniform.
    pub fn priors_or_uniform(&self) -> Vec<f64> {
        self.priors
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.states.len() as f64; self.states.len()])
    }

    /// `Σ_{μ' ≠ μ} ρ_{μ'}` (1-based `mu`).
    pub fn sum_except(&self, mu: usize) -> CMatrix {
        let d = self.shape.total();
        self.states
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != mu)
            .fold(CMatrix::zeros(d, d), |acc, (_, s)| acc + s.matrix())
    }

    pub fn total_sum(&self) -> CMatrix {
        self.sum_except(0)
    }

    /// Pure state vectors, if every member is rank one.
    pub fn pure_vectors(&self, tol_rank: f64) -> Option<Vec<CVector>> {
        self.states.iter().map(|s| s.pure_vector(tol_rank)).collect()
    }

    /// Same ensemble with the states reordered: new state `k` is old
    /// `order[k]` (0-based). Delta is carried along; priors too.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let states = order.iter().map(|&i| self.states[i].clone()).collect();
        let delta = self
            .delta
            .iter()
            .map(|&mu| order.iter().position(|&i| i + 1 == mu).unwrap() + 1)
            .collect();
        let priors = self
            .priors
            .as_ref()
            .map(|p| order.iter().map(|&i| p[i]).collect());
        Self::new(states, Some(delta), priors)
    }
}

/// A subspace of the composite space with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    shape: SpaceShape,
    basis: CMatrix,
}

impl Subspace {
    /// Wraps a basis whose columns are already orthonormal.
    pub fn from_orthonormal(shape: SpaceShape, basis: CMatrix) -> Result<Self> {
        if basis.nrows() != shape.total() {
            return Err(Error::DimensionMismatch {
                expected: shape.total(),
                found: basis.nrows(),
            });
        }
        let r = basis.ncols();
        let defect = frobenius(&(basis.adjoint() * &basis - linalg::identity(r)));
        if defect > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "basis is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { shape, basis })
    }

    /// Span of arbitrary vectors, orthonormalized through an SVD.
    pub fn span(shape: SpaceShape, vectors: &[CVector], tol_rank: f64) -> Result<Self> {
        let d = shape.total();
        if vectors.is_empty() {
            return Ok(Self::zero(shape));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let cols = CMatrix::from_columns(vectors);
        let s = svd(&cols)?;
        let r = linalg::numerical_rank(&s.singular_values, tol_rank);
        let basis = s.u.columns(0, r).into_owned();
        Ok(Self { shape, basis })
    }

    pub fn zero(shape: SpaceShape) -> Self {
        let d = shape.total();
        Self {
            shape,
            basis: CMatrix::zeros(d, 0),
        }
    }

    pub fn full(shape: SpaceShape) -> Self {
        let d = shape.total();
        Self {
            shape,
            basis: linalg::identity(d),
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis_vector(&self, k: usize) -> CVector {
        self.basis.column(k).into_owned()
    }

    /// `P = B B†`.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// `⟨v|P|v⟩` for a unit `v`; equals 1 iff `v` lies in the subspace.
    pub fn membership(&self, v: &CVector) -> f64 {
        (self.basis.adjoint() * v).norm_squared()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &CVector) -> CVector {
        &self.basis * (self.basis.adjoint() * v)
    }
}

/// Support of a positive operator: eigenvectors with eigenvalue above
/// `tol_rank · λ_max`.
pub fn support_of_operator(shape: &SpaceShape, op: &CMatrix, tol_rank: f64) -> Result<Subspace> {
    let e = eigh(op)?;
    let max = e.max_eigenvalue();
    let d = op.nrows();
    if max <= 0.0 {
        return Ok(Subspace::zero(shape.clone()));
    }
    let keep: Vec<usize> = (0..d).filter(|&k| e.eigenvalues[k] > tol_rank * max).collect();
    // Highest eigenvalue first.
    let cols: Vec<CVector> = keep
        .iter()
        .rev()
        .map(|&k| e.eigenvectors.column(k).into_owned())
        .collect();
    let basis = if cols.is_empty() {
        CMatrix::zeros(d, 0)
    } else {
        CMatrix::from_columns(&cols)
    };
    Ok(Subspace {
        shape: shape.clone(),
        basis,
    })
}

/// Support of a density matrix.
pub fn support(rho: &DensityMatrix, tol_rank: f64) -> Result<Subspace> {
    support_of_operator(rho.shape(), rho.matrix(), tol_rank)
}

/// Orthogonal complement.
pub fn complement(s: &Subspace) -> Subspace {
    let d = s.shape.total();
    let r = s.dim();
    if r == 0 {
        return Subspace::full(s.shape.clone());
    }
    if r == d {
        return Subspace::zero(s.shape.clone());
    }
    // The projector's spectrum is {0 (d−r times), 1 (r times)}; take the
    // first d−r eigenvectors.
    let e = eigh(&s.projector()).expect("projector is Hermitian");
    let basis = e.eigenvectors.columns(0, d - r).into_owned();
    Subspace {
        shape: s.shape.clone(),
        basis,
    }
}

/// Unit vector drawn from the unitarily invariant distribution.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| {
            c(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        let n = v.norm();
        if n > 1e-300 {
            return v.unscale(n);
        }
    }
}

/// A tensor product of per-party unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    shape: SpaceShape,
    factors: Vec<CVector>,
}

impl ProductVector {
    /// Factors must already be unit norm (within 1e-12).
    pub fn new(shape: SpaceShape, factors: Vec<CVector>) -> Result<Self> {
        Self::check_layout(&shape, &factors)?;
        for f in &factors {
            let n = f.norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::NotUnitNorm { norm: n });
            }
        }
        Ok(Self { shape, factors })
    }

    /// Normalizes each factor first; zero factors are rejected.
    pub fn normalized(shape: SpaceShape, factors: Vec<CVector>) -> Result<Self> {
        Self::check_layout(&shape, &factors)?;
        let factors = factors
            .into_iter()
            .map(|f| {
                let n = f.norm();
                if n > 0.0 && n.is_finite() {
                    Ok(f.unscale(n))
                } else {
                    Err(Error::NotUnitNorm { norm: n })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape, factors })
    }

    fn check_layout(shape: &SpaceShape, factors: &[CVector]) -> Result<()> {
        if factors.len() != shape.parties() {
            return Err(Error::DimensionMismatch {
                expected: shape.parties(),
                found: factors.len(),
            });
        }
        for (f, &d) in factors.iter().zip(shape.dims()) {
            if f.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.len(),
                });
            }
        }
        Ok(())
    }

    /// Haar-random factors.
    pub fn random<R: Rng + ?Sized>(shape: &SpaceShape, rng: &mut R) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&d| random_unit_vector(d, rng))
            .collect();
        Self {
            shape: shape.clone(),
            factors,
        }
    }

    /// Computational basis product state with the given per-party digits.
    pub fn basis_state(shape: &SpaceShape, digits: &[usize]) -> Result<Self> {
        let factors = shape
            .dims()
            .iter()
            .zip(digits)
            .map(|(&d, &i)| {
                let mut v = CVector::zeros(d);
                v[i] = c(1.0, 0.0);
                v
            })
            .collect();
        Self::new(shape.clone(), factors)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn factors(&self) -> &[CVector] {
        &self.factors
    }

    pub fn factor(&self, party: usize) -> &CVector {
        &self.factors[party]
    }

    pub(crate) fn set_factor(&mut self, party: usize, v: CVector) {
        self.factors[party] = v;
    }

    /// Kronecker product of the factors in party order.
    pub fn assemble(&self) -> CVector {
        let mut out = CVector::from_element(1, c(1.0, 0.0));
        for f in &self.factors {
            out = kron_vec(&out, f);
        }
        out
    }

    /// `D × D_j` matrix `X` with `X e_a = assemble()` after replacing factor
    /// `party` by `e_a`. For an operator `A`, `X† A X` is the effective
    /// single-party operator with the other factors held fixed.
    pub fn embedding_for_party(&self, party: usize) -> CMatrix {
        let dj = self.shape.dims()[party];
        let cols: Vec<CVector> = (0..dj)
            .map(|a| {
                let mut out = CVector::from_element(1, c(1.0, 0.0));
                for (j, f) in self.factors.iter().enumerate() {
                    if j == party {
                        let mut e = CVector::zeros(dj);
                        e[a] = c(1.0, 0.0);
                        out = kron_vec(&out, &e);
                    } else {
                        out = kron_vec(&out, f);
                    }
                }
                out
            })
            .collect();
        CMatrix::from_columns(&cols)
    }
}

/// Returns product factors of `v` when every sequential bipartite split
/// (first remaining party against the rest) has second singular value at
/// most `tol_product`. `v` is normalized first; zero vectors give `None`.
pub fn factorize_if_product(
    v: &CVector,
    shape: &SpaceShape,
    tol_product: f64,
) -> Option<ProductVector> {
    if v.len() != shape.total() {
        return None;
    }
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    let mut rest = v.unscale(norm);
    let mut factors = Vec::with_capacity(shape.parties());
    let dims = shape.dims();
    for (j, &dj) in dims.iter().enumerate() {
        if j + 1 == dims.len() {
            let mut last = rest.clone();
            let n = last.norm();
            last.unscale_mut(n);
            factors.push(last);
            break;
        }
        let cols = rest.len() / dj;
        let m = CMatrix::from_fn(dj, cols, |r, k| rest[r * cols + k]);
        let s = svd(&m).ok()?;
        if s.singular_values.get(1).copied().unwrap_or(0.0) > tol_product {
            return None;
        }
        let sigma = s.singular_values[0];
        let raw = s.u.column(0).into_owned();
        let tail = s.v.column(0).map(|z| z.conj());
        // head follows the phase convention; the removed phase moves into tail.
        let mut head = raw.clone();
        linalg::fix_phase(&mut head);
        let (i, z) = raw
            .iter()
            .enumerate()
            .find(|(_, z)| z.norm() > 0.0)
            .expect("nonzero singular vector");
        let rot = *z / head[i];
        factors.push(head);
        rest = tail.map(|z| z * rot * sigma);
        let n = rest.norm();
        rest.unscale_mut(n);
    }
    let mut pv = ProductVector::normalized(shape.clone(), factors).ok()?;
    // Put the global phase on the last factor deterministically.
    let n = pv.factors.len();
    linalg::fix_phase(&mut pv.factors[n - 1]);
    Some(pv)
}
