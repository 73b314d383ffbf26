#![allow(dead_code)]

use locc_usd::linalg::{self, c, CMatrix, CVector};
use locc_usd::state::{random_unit_vector, DensityMatrix, ProductVector, SpaceShape, StateEnsemble};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn sh(d: &[usize]) -> SpaceShape {
    SpaceShape::new(d.to_vec()).unwrap()
}

pub fn real(a: &[f64]) -> CVector {
    CVector::from_iterator(a.len(), a.iter().map(|&x| c(x, 0.0)))
}

pub fn bell() -> Vec<CVector> {
    vec![
        real(&[H, 0.0, 0.0, H]),
        real(&[H, 0.0, 0.0, -H]),
        real(&[0.0, H, H, 0.0]),
        real(&[0.0, H, -H, 0.0]),
    ]
}

pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let mut g = |_: usize, _: usize| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    };
    let a = CMatrix::from_fn(d, d, &mut g);
    (&a + a.adjoint()).scale(0.5)
}

/// Eigenvectors of a random Hermitian matrix: a random unitary.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    linalg::eigh(&random_hermitian(d, rng)).unwrap().eigenvectors
}

pub fn random_local_unitary<R: Rng>(shape: &SpaceShape, rng: &mut R) -> CMatrix {
    let us: Vec<CMatrix> = shape.dims().iter().map(|&d| random_unitary(d, rng)).collect();
    us[1..].iter().fold(us[0].clone(), |acc, u| linalg::kron(&acc, u))
}

/// Tensor products of per-party random (non-orthogonal) bases.
pub fn random_product_basis<R: Rng>(shape: &SpaceShape, rng: &mut R) -> Vec<CVector> {
    let bases: Vec<Vec<CVector>> = shape
        .dims()
        .iter()
        .map(|&d| (0..d).map(|_| random_unit_vector(d, rng)).collect())
        .collect();
    (0..shape.total())
        .map(|i| {
            let digits = shape.digits(i);
            let factors = digits.iter().enumerate().map(|(j, &k)| bases[j][k].clone()).collect();
            ProductVector::new(shape.clone(), factors).unwrap().assemble()
        })
        .collect()
}

pub fn random_products<R: Rng>(shape: &SpaceShape, m: usize, rng: &mut R) -> Vec<CVector> {
    (0..m).map(|_| ProductVector::random(shape, rng).assemble()).collect()
}

/// A random mixed state of the given rank.
pub fn random_mixed<R: Rng>(shape: &SpaceShape, rank: usize, rng: &mut R) -> DensityMatrix {
    let d = shape.total();
    let m = (0..rank).fold(CMatrix::zeros(d, d), |acc, _| {
        let v = random_unit_vector(d, rng);
        let w: f64 = rng.random_range(0.2..1.0);
        acc + linalg::outer(&v, &v).scale(w)
    });
    let tr = m.trace().re;
    DensityMatrix::new(shape.clone(), m.unscale(tr)).unwrap()
}

pub fn pure_ensemble(shape: &SpaceShape, vectors: &[CVector]) -> StateEnsemble {
    StateEnsemble::from_pure(shape, vectors).unwrap()
}
