//! Dense complex linear algebra used throughout the crate.
//!
//! Operators are stored as [`CMatrix`] (`nalgebra::DMatrix<Complex64>`). The
//! decompositions run on faer's Hermitian eigensolver and SVD and add
//! what the rest of the crate relies on: sorted spectra, a fixed eigenvector
//! phase convention, and tolerance-checked preconditions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_TOL_RANK: f64 = 1e-10;

/// Relative Hermiticity tolerance accepted by [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending; column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]`. Each eigenvector has its largest-magnitude component
/// (first one on ties) real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Eigenvector for the largest eigenvalue.
    pub fn top_eigenvector(&self) -> CVector {
        let n = self.eigenvectors.ncols();
        self.eigenvectors.column(n - 1).into_owned()
    }

    /// Rebuilds `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lam);
        }
        scaled * v.adjoint()
    }
}

/// Singular value decomposition `A = U diag(σ) V†` with `σ` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (k, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(s);
        }
        us * self.v.adjoint()
    }
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖A − A†‖_F / max(1, ‖A‖_F)`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint())) / frobenius(a).max(1.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `|v⟩⟨w|`.
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    v * w.adjoint()
}

/// `⟨v|A|v⟩`, real part. For Hermitian `A` the imaginary part is rounding noise.
pub fn expectation(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

/// Kronecker product with the first factor as the most significant index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Multiplies `v` by the unit phase that makes its largest-magnitude entry
/// real and positive. Zero vectors are returned unchanged.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / best_mag;
        let rot = phase.conj();
        v.iter_mut().for_each(|z| *z *= rot);
        v[best] = cr(v[best].re);
    }
}

fn check_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn to_faer(a: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)])
}

fn from_faer(a: faer::MatRef<'_, Complex64>) -> CMatrix {
    CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)])
}

/// Hermitian eigendecomposition.
pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    check_square(a)?;
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    // Symmetrize so the solver sees exactly Hermitian input.
    let sym = (a + a.adjoint()).scale(0.5);
    let decomposition = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence("Hermitian eigensolver"))?;
    let values: Vec<f64> = decomposition.S().column_vector().iter().map(|z| z.re).collect();
    let vectors = from_faer(decomposition.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let mut eigenvectors = CMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (k, &idx) in order.iter().enumerate() {
        eigenvalues.push(values[idx]);
        let mut col = vectors.column(idx).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
        fix_phase(&mut col);
        eigenvectors.set_column(k, &col);
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin SVD of a rectangular matrix; `u` is `m×k`, `v` is `n×k` with `k = min(m, n)`.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd {
            u: CMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: CMatrix::zeros(n, 0),
        });
    }
    let decomposition = to_faer(a)
        .thin_svd()
        .map_err(|_| Error::NoConvergence("SVD"))?;
    let u_raw = from_faer(decomposition.U());
    let v_raw = from_faer(decomposition.V());
    let sv: Vec<f64> = decomposition.S().column_vector().iter().map(|z| z.re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap().then(i.cmp(&j)));
    let mut u = CMatrix::zeros(m, k);
    let mut v = CMatrix::zeros(n, k);
    let mut singular_values = Vec::with_capacity(k);
    for (col, &idx) in order.iter().enumerate() {
        singular_values.push(sv[idx].max(0.0));
        let mut ucol = u_raw.column(idx).into_owned();
        let mut vcol = v_raw.column(idx).into_owned();
        // Same phase convention as eigh, applied to v; u follows so that the
        // product u σ v† is unchanged.
        let before = vcol.clone();
        fix_phase(&mut vcol);
        if let Some((i, z)) = before.iter().enumerate().find(|(_, z)| z.norm() > 0.0) {
            let rot = vcol[i] / z;
            ucol.iter_mut().for_each(|x| *x *= rot);
        }
        u.set_column(col, &ucol);
        v.set_column(col, &vcol);
    }
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Number of singular values strictly above `tol_rank · σ_max`.
pub fn numerical_rank(singular_values: &[f64], tol_rank: f64) -> usize {
    let max = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > tol_rank * max)
        .count()
}

/// Principal square root of a PSD matrix; eigenvalues below zero are clamped.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let e = eigh(a)?;
    let v = &e.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lam) in e.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lam.max(0.0).sqrt());
    }
    Ok(scaled * v.adjoint())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    Ok(eigh(a)?.min_eigenvalue())
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(a: &CMatrix) -> Result<f64> {
    Ok(eigh(a)?.max_eigenvalue())
}

/// Checks `A ⪰ −tol·max(1, ‖A‖_F)`.
pub fn check_psd(a: &CMatrix, tol: f64) -> Result<()> {
    let min = min_eigenvalue(a)?;
    if min < -tol * frobenius(a).max(1.0) {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&g + g.adjoint()).scale(0.5)
    }

    fn phi_plus() -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![cr(s), cr(0.0), cr(0.0), cr(s)])
    }

    #[test]
    fn identity_spectrum() {
        let e = eigh(&identity(2)).unwrap();
        assert_eq!(e.eigenvalues.len(), 2);
        for l in e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_spectrum_and_vectors() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(0.0), cr(3.0)]));
        let e = eigh(&a).unwrap();
        assert!((e.eigenvalues[0] - 0.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-14);
        assert!((e.eigenvectors[(0, 0)] - cr(1.0)).norm() < 1e-14);
        assert!((e.eigenvectors[(1, 1)] - cr(1.0)).norm() < 1e-14);
    }

    #[test]
    fn bell_projector_spectrum() {
        let p = outer(&phi_plus(), &phi_plus());
        // rank-1 projector: P² = P
        assert!(frobenius(&(&p * &p - &p)) < 1e-15);
        let e = eigh(&p).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (l, x) in e.eigenvalues.iter().zip(expected) {
            assert!((l - x).abs() < 1e-12, "{l} vs {x}");
        }
    }

    #[test]
    fn eigh_rejects_bad_input() {
        assert!(matches!(eigh(&CMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
        let mut a = identity(2);
        a[(0, 1)] = cr(1.0);
        assert!(matches!(eigh(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=9 {
            let a = random_hermitian(n, &mut rng);
            let e = eigh(&a).unwrap();
            let err = frobenius(&(&a - e.reconstruct()));
            assert!(err <= 1e-10 * frobenius(&a).max(1.0));
            let gram = e.eigenvectors.adjoint() * &e.eigenvectors;
            assert!(frobenius(&(gram - identity(n))) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigh_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(6, &mut rng);
        let e1 = eigh(&a).unwrap();
        let e2 = eigh(&a).unwrap();
        assert_eq!(e1.eigenvalues, e2.eigenvalues);
        assert_eq!(e1.eigenvectors, e2.eigenvectors);
    }

    #[test]
    fn svd_small_cases() {
        let s = svd(&CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.singular_values, vec![0.0, 0.0]);

        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = cr(1.0);
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 1.0).abs() < 1e-14);
        assert!(s.singular_values[1].abs() < 1e-14);

        // 2x2 reshape of Φ+
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = CMatrix::from_row_slice(2, 2, &[cr(h), cr(0.0), cr(0.0), cr(h)]);
        let s = svd(&m).unwrap();
        for x in s.singular_values {
            assert!((x - h).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(1, 1), (2, 3), (4, 2), (3, 9), (8, 8)] {
            let a = CMatrix::from_fn(m, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let s = svd(&a).unwrap();
            assert!(frobenius(&(&a - s.reconstruct())) <= 1e-10 * frobenius(&a).max(1.0));
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(s.singular_values.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn svd_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CVector::from_fn(3, |_, _| c(rng.random(), rng.random()));
        let b = CVector::from_fn(4, |_, _| c(rng.random(), rng.random()));
        let s = svd(&outer(&a, &b)).unwrap();
        assert_eq!(numerical_rank(&s.singular_values, DEFAULT_TOL_RANK), 1);
    }

    #[test]
    fn rank_thresholds() {
        assert_eq!(numerical_rank(&[1.0, 1e-16], 1e-10), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-10), 0);
        assert_eq!(numerical_rank(&[1.0, 0.5, 1e-12], 1e-10), 2);
    }

    #[test]
    fn phase_convention() {
        let mut v = CVector::from_vec(vec![c(0.0, 0.1), c(0.0, -0.9)]);
        fix_phase(&mut v);
        assert!((v[1] - cr(0.9)).norm() < 1e-15);
        assert!((v[0] - cr(-0.1)).norm() < 1e-15);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = CMatrix::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let a = &g * g.adjoint();
        let r = psd_sqrt(&a).unwrap();
        assert!(frobenius(&(&r * &r - &a)) < 1e-12);
    }

    #[test]
    fn kron_vec_matches_matrix_kron() {
        let a = CVector::from_vec(vec![c(1.0, 2.0), c(0.5, -1.0)]);
        let b = CVector::from_vec(vec![c(0.0, 1.0), c(3.0, 0.0), c(-1.0, 0.5)]);
        let m = kron(&CMatrix::from_column_slice(2, 1, a.as_slice()), &CMatrix::from_column_slice(3, 1, b.as_slice()));
        let v = kron_vec(&a, &b);
        for i in 0..6 {
            assert_eq!(m[(i, 0)], v[i]);
        }
    }
}
