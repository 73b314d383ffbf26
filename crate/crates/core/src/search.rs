//! Search for product vectors.
//!
//! [`max_product_overlap`] maximizes `⟨π|A|π⟩` over product unit vectors by
//! see-saw iteration: one party at a time, the other factors are contracted
//! into an effective single-party operator whose top eigenvector becomes the
//! new factor. The result is a lower bound on the true maximum.
//!
//! [`find_product_in_subspace`] uses the same iteration to look for a product
//! vector inside a subspace, optionally with nonzero overlap on a target
//! state. On two qubits [`certify_two_qubit`] decides the same question
//! exactly, and [`brute_force_overlap`] is a grid oracle for small qubit
//! systems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, eigh, expectation, CMatrix, CVector};
use crate::state::{DensityMatrix, ProductVector, SpaceShape, Subspace};

/// Parameters of the see-saw search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once a full sweep changes the objective by less than this.
    pub conv_tol: f64,
    /// A vector is in a subspace when `⟨π|P|π⟩ ≥ 1 − tol_product`.
    pub tol_product: f64,
    /// Overlaps `⟨π|ρ|π⟩` below this count as zero.
    pub tol_detect: f64,
    /// Weight of the target overlap in the subspace search objective.
    pub weight_w: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 200,
            conv_tol: 1e-12,
            tol_product: 1e-8,
            tol_detect: 1e-8,
            weight_w: 1e-2,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.conv_tol,
            self.tol_product,
            self.tol_detect,
            self.weight_w,
        ];
        if self.restarts == 0 || self.max_iters == 0 || positive.iter().any(|&x| x.is_nan() || x <= 0.0) {
            return Err(Error::InvalidShape(format!(
                "search configuration must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Best product vector found for an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    /// `⟨π|A|π⟩` at `argmax`.
    pub value: f64,
    pub argmax: ProductVector,
    pub iterations: usize,
    pub restart_index: usize,
}

/// One see-saw run.
#[derive(Debug, Clone)]
pub(crate) struct SeesawRun {
    pub vector: ProductVector,
    pub value: f64,
    pub iterations: usize,
    /// Objective after every single-party update.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trajectory: Vec<f64>,
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs see-saw sweeps on `op` from `start`.
pub(crate) fn seesaw(op: &CMatrix, start: ProductVector, max_iters: usize, conv_tol: f64) -> SeesawRun {
    let mut pv = start;
    let mut value = expectation(op, &pv.assemble());
    let mut trajectory = vec![value];
    let scale = linalg::frobenius(op).max(1.0);
    let mut iterations = 0;
    while iterations < max_iters {
        let before = value;
        for party in 0..pv.shape().parties() {
            let x = pv.embedding_for_party(party);
            let effective = x.adjoint() * op * &x;
            let effective = (&effective + effective.adjoint()).scale(0.5);
            let e = eigh(&effective).expect("effective operator is Hermitian");
            let mut top = e.top_eigenvector();
            let n = top.norm();
            top.unscale_mut(n);
            let previous = value;
            value = e.max_eigenvalue();
            // Best response for this party cannot lower the objective.
            if value < previous {
                // Rounding only: keep the previous factor.
                value = previous;
            } else {
                pv.set_factor(party, top);
            }
            trajectory.push(value);
        }
        iterations += 1;
        if (value - before).abs() < conv_tol * scale {
            break;
        }
    }
    let value = expectation(op, &pv.assemble());
    SeesawRun {
        vector: pv,
        value,
        iterations,
        trajectory,
    }
}

fn check_operator(a: &CMatrix, shape: &SpaceShape) -> Result<()> {
    if a.nrows() != shape.total() || a.ncols() != shape.total() {
        return Err(Error::DimensionMismatch {
            expected: shape.total(),
            found: a.nrows(),
        });
    }
    linalg::check_psd(a, 1e-10)
}

/// Maximum of `⟨π|A|π⟩` over product unit vectors, best over seeded restarts.
///
/// Since the objective is linear in the state, this equals the maximum over
/// separable states. Ties go to the lowest restart index.
pub fn max_product_overlap(a: &CMatrix, shape: &SpaceShape, cfg: &SearchConfig) -> Result<OverlapResult> {
    cfg.validate()?;
    check_operator(a, shape)?;
    let runs: Vec<SeesawRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let start = ProductVector::random(shape, &mut rng);
            seesaw(a, start, cfg.max_iters, cfg.conv_tol)
        })
        .collect();
    let (restart_index, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|acc, cur| if cur.1.value > acc.1.value { cur } else { acc })
        .expect("at least one restart");
    Ok(OverlapResult {
        value: best.value,
        argmax: best.vector,
        iterations: best.iterations,
        restart_index,
    })
}

/// A product vector found inside a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCandidate {
    pub vector: ProductVector,
    /// `⟨π|P|π⟩`.
    pub membership: f64,
    /// `⟨π|ρ|π⟩` for the target, if one was given.
    pub detect_value: Option<f64>,
}

impl ProductCandidate {
    fn evaluate(vector: ProductVector, subspace: &Subspace, target: Option<&DensityMatrix>) -> Self {
        let v = vector.assemble();
        Self {
            membership: subspace.membership(&v),
            detect_value: target.map(|rho| rho.expectation(&v)),
            vector,
        }
    }

    /// Whether the candidate meets the membership and detection thresholds.
    pub fn accepted(&self, tol_product: f64, tol_detect: f64) -> bool {
        self.membership >= 1.0 - tol_product && self.detect_value.is_none_or(|d| d >= tol_detect)
    }

    fn score(&self) -> f64 {
        self.detect_value.unwrap_or(self.membership)
    }
}

/// Heuristic search for a product vector in `subspace` (with
/// `⟨π|ρ|π⟩ ≥ tol_detect` when a target is given).
///
/// Each restart maximizes `⟨π|P(1 + wρ)P|π⟩` and then refines on `P` alone so
/// the weight cannot pull the vector off the subspace. Among accepted
/// candidates the one with the largest detection value wins. `None` means
/// nothing was found, not that nothing exists.
pub fn find_product_in_subspace(
    subspace: &Subspace,
    target: Option<&DensityMatrix>,
    cfg: &SearchConfig,
) -> Result<Option<ProductCandidate>> {
    cfg.validate()?;
    let shape = subspace.shape();
    if subspace.dim() == 0 {
        return Ok(None);
    }
    let p = subspace.projector();
    let weighted = match target {
        Some(rho) => {
            if rho.shape() != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape.total(),
                    found: rho.shape().total(),
                });
            }
            let inner = linalg::identity(shape.total()) + rho.matrix().scale(cfg.weight_w);
            &p * inner * &p
        }
        None => p.clone(),
    };
    let candidates: Vec<ProductCandidate> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let start = ProductVector::random(shape, &mut rng);
            let coarse = seesaw(&weighted, start, cfg.max_iters, cfg.conv_tol);
            let refined = seesaw(&p, coarse.vector, cfg.max_iters, cfg.conv_tol);
            ProductCandidate::evaluate(refined.vector, subspace, target)
        })
        .collect();
    Ok(candidates
        .into_iter()
        .filter(|cand| cand.accepted(cfg.tol_product, cfg.tol_detect))
        .reduce(|acc, cur| if cur.score() > acc.score() { cur } else { acc }))
}

/// Outcome of the exact two-qubit decision.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoQubitDecision {
    Exists(ProductCandidate),
    NotExists,
}

impl TwoQubitDecision {
    pub fn exists(&self) -> bool {
        matches!(self, Self::Exists(_))
    }

    pub fn certificate(&self) -> Option<&ProductCandidate> {
        match self {
            Self::Exists(c) => Some(c),
            Self::NotExists => None,
        }
    }
}

/// 2×2 reshape of a two-qubit vector: `M[a][b] = v[2a + b]`.
fn reshape2(v: &CVector) -> [[num_complex::Complex64; 2]; 2] {
    [[v[0], v[1]], [v[2], v[3]]]
}

/// Coefficients `(a, b, e)` of `det(s M1 + t M2) = a s² + b s t + e t²`.
fn det_quadratic(v1: &CVector, v2: &CVector) -> [num_complex::Complex64; 3] {
    let m1 = reshape2(v1);
    let m2 = reshape2(v2);
    let a = m1[0][0] * m1[1][1] - m1[0][1] * m1[1][0];
    let e = m2[0][0] * m2[1][1] - m2[0][1] * m2[1][0];
    let b = m1[0][0] * m2[1][1] + m2[0][0] * m1[1][1] - m1[0][1] * m2[1][0] - m2[0][1] * m1[1][0];
    [a, b, e]
}

/// Projective roots `(s, t)` of `a s² + b s t + e t²`, assuming not all
/// coefficients vanish.
fn binary_quadratic_roots(
    a: num_complex::Complex64,
    b: num_complex::Complex64,
    e: num_complex::Complex64,
    tol: f64,
) -> Vec<(num_complex::Complex64, num_complex::Complex64)> {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    if a.norm() <= tol {
        // t (b s + e t) = 0
        let mut roots = vec![(one, zero)];
        if b.norm() > tol {
            roots.push((-e, b));
        }
        return roots;
    }
    let disc = (b * b - a * e * 4.0).sqrt();
    let plus = b + disc;
    let minus = b - disc;
    let big = if plus.norm() >= minus.norm() { plus } else { minus };
    if big.norm() <= tol {
        // b ≈ 0 and disc ≈ 0: double root at s = 0.
        return vec![(zero, one)];
    }
    let q = big * -0.5;
    vec![(q / a, one), (e / q, one)]
}

/// Nearest product vector to a two-qubit vector (top singular pair of its
/// reshape).
fn nearest_two_qubit_product(v: &CVector, shape: &SpaceShape) -> ProductVector {
    let m = CMatrix::from_fn(2, 2, |r, k| v[2 * r + k]);
    let s = linalg::svd(&m).expect("finite vector");
    let head = s.u.column(0).into_owned();
    let tail = s.v.column(0).map(|z| z.conj());
    ProductVector::normalized(shape.clone(), vec![head, tail]).expect("unit singular vectors")
}

/// Product vectors in the span of two orthonormal two-qubit vectors.
fn products_in_plane(
    v1: &CVector,
    v2: &CVector,
    shape: &SpaceShape,
    target: Option<&DensityMatrix>,
    tol: f64,
) -> Vec<ProductVector> {
    let [a, b, e] = det_quadratic(v1, v2);
    if a.norm().max(b.norm()).max(e.norm()) <= tol {
        // Every vector of the plane is a product; the best one for the
        // target is the top eigenvector of the compressed target.
        let basis = CMatrix::from_columns(&[v1.clone(), v2.clone()]);
        let mut out = vec![
            nearest_two_qubit_product(v1, shape),
            nearest_two_qubit_product(v2, shape),
        ];
        if let Some(rho) = target {
            let compressed = basis.adjoint() * rho.matrix() * &basis;
            let compressed = (&compressed + compressed.adjoint()).scale(0.5);
            let top = eigh(&compressed).expect("Hermitian").top_eigenvector();
            out.insert(0, nearest_two_qubit_product(&(&basis * top), shape));
        }
        return out;
    }
    binary_quadratic_roots(a, b, e, tol)
        .into_iter()
        .map(|(s, t)| {
            let v = v1 * s + v2 * t;
            let n = v.norm();
            nearest_two_qubit_product(&v.unscale(n), shape)
        })
        .collect()
}

/// Exact decision of whether a subspace of `ℂ² ⊗ ℂ²` contains a product
/// vector (with `⟨π|ρ|π⟩ ≥ tol_detect` when a target is given).
///
/// Product vectors correspond to singular 2×2 reshapes, so in the span of
/// basis vectors `M_i` they are the zeros of the quadratic form
/// `det(Σ c_i M_i)`:
/// * one dimension: exists iff `det M_1 = 0`;
/// * two dimensions: the binary quadratic has one or two projective roots,
///   or vanishes identically (every vector is a product);
/// * three or more: isotropic vectors always exist. With a target, product
///   vectors are collected from the coordinate planes and from 64 seeded
///   random planes of the subspace; these slices reach every product vector
///   of the subspace with probability one.
pub fn certify_two_qubit(
    subspace: &Subspace,
    target: Option<&DensityMatrix>,
    cfg: &SearchConfig,
) -> Result<TwoQubitDecision> {
    let shape = subspace.shape();
    if !shape.is_two_qubit() {
        return Err(Error::InvalidShape(format!(
            "two-qubit certifier needs dims [2, 2], got {:?}",
            shape.dims()
        )));
    }
    let r = subspace.dim();
    let tol = cfg.tol_product;
    let mut products: Vec<ProductVector> = Vec::new();
    match r {
        0 => return Ok(TwoQubitDecision::NotExists),
        1 => {
            let v = subspace.basis_vector(0);
            let [a, _, _] = det_quadratic(&v, &v);
            if a.norm() <= tol {
                products.push(nearest_two_qubit_product(&v, shape));
            }
        }
        2 => {
            products = products_in_plane(
                &subspace.basis_vector(0),
                &subspace.basis_vector(1),
                shape,
                target,
                tol,
            );
        }
        _ => {
            for i in 0..r {
                for j in i + 1..r {
                    products.extend(products_in_plane(
                        &subspace.basis_vector(i),
                        &subspace.basis_vector(j),
                        shape,
                        target,
                        tol,
                    ));
                }
            }
            if target.is_some() {
                let mut rng = restart_rng(cfg.seed, usize::MAX);
                for _ in 0..64 {
                    let x = crate::state::random_unit_vector(r, &mut rng);
                    let y = crate::state::random_unit_vector(r, &mut rng);
                    let plane = Subspace::span(
                        shape.clone(),
                        &[subspace.basis() * x, subspace.basis() * y],
                        linalg::DEFAULT_TOL_RANK,
                    )?;
                    if plane.dim() == 2 {
                        products.extend(products_in_plane(
                            &plane.basis_vector(0),
                            &plane.basis_vector(1),
                            shape,
                            target,
                            tol,
                        ));
                    }
                }
            }
        }
    }
    let best = products
        .into_iter()
        .map(|pv| ProductCandidate::evaluate(pv, subspace, target))
        .filter(|cand| cand.accepted(cfg.tol_product, cfg.tol_detect))
        .reduce(|acc, cur| if cur.score() > acc.score() { cur } else { acc });
    Ok(match best {
        Some(cand) => TwoQubitDecision::Exists(cand),
        None => TwoQubitDecision::NotExists,
    })
}

/// Grid maximum of `⟨π|A|π⟩` over qubit product states.
///
/// Each qubit runs over `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩` with `θ` on
/// `grid_points` points of `[0, π]` and `φ` on `grid_points` points of
/// `[0, 2π)`. Supports one to three qubits.
pub fn brute_force_overlap(a: &CMatrix, shape: &SpaceShape, grid_points: usize) -> Result<f64> {
    if shape.dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidShape(format!(
            "grid oracle needs qubits, got {:?}",
            shape.dims()
        )));
    }
    if shape.parties() > 3 {
        return Err(Error::InvalidShape("grid oracle supports at most 3 qubits".into()));
    }
    if grid_points < 20 {
        return Err(Error::InvalidShape(format!(
            "grid needs at least 20 points per angle, got {grid_points}"
        )));
    }
    check_operator(a, shape)?;
    let g = grid_points;
    let mut grid: Vec<[num_complex::Complex64; 2]> = Vec::with_capacity(g * g);
    for k in 0..g {
        let theta = std::f64::consts::PI * k as f64 / (g - 1) as f64;
        for l in 0..g {
            let phi = 2.0 * std::f64::consts::PI * l as f64 / g as f64;
            let (s, co) = (theta / 2.0).sin_cos();
            grid.push([c(co, 0.0), num_complex::Complex64::from_polar(s, phi)]);
        }
    }
    // Contract all but the last qubit explicitly, then scan the last qubit's
    // grid against the resulting 2×2 matrix.
    let n = shape.parties();
    let d = shape.total();
    let prefix_count = grid.len().pow((n - 1) as u32);
    let mut best = f64::NEG_INFINITY;
    for idx in 0..prefix_count {
        // Prefix vector over the first n−1 qubits.
        let mut prefix = vec![c(1.0, 0.0)];
        let mut rest = idx;
        for _ in 0..n - 1 {
            let q = grid[rest % grid.len()];
            rest /= grid.len();
            prefix = prefix
                .iter()
                .flat_map(|&p| [p * q[0], p * q[1]])
                .collect();
        }
        let mut eff = [[c(0.0, 0.0); 2]; 2];
        for (i, &pi) in prefix.iter().enumerate() {
            for (j, &pj) in prefix.iter().enumerate() {
                for (x, row) in eff.iter_mut().enumerate() {
                    for (y, cell) in row.iter_mut().enumerate() {
                        *cell += pi.conj() * a[(2 * i + x, 2 * j + y)] * pj;
                    }
                }
            }
        }
        debug_assert_eq!(prefix.len() * 2, d);
        for q in &grid {
            let val = (q[0].conj() * (eff[0][0] * q[0] + eff[0][1] * q[1])
                + q[1].conj() * (eff[1][0] * q[0] + eff[1][1] * q[1]))
                .re;
            if val > best {
                best = val;
            }
        }
    }
    Ok(best)
}
