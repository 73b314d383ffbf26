//! Entanglement witnesses from subspaces without product vectors.
//!
//! When the states jointly span the whole space, `S̃_μ` (the conclusive
//! region for `μ` together with the zero vector) is exactly the subspace
//! `R⊥_μ̄`. If its projector `P` has maximal product overlap `γ < 1`, then
//! `W = 1 − γ⁻¹P` is nonnegative on every separable state and equals
//! `1 − γ⁻¹ < 0` on every state inside the subspace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::complement_support_of_rest;
use crate::error::{Error, Result};
use crate::linalg::{self, expectation, CMatrix};
use crate::search::{max_product_overlap, SearchConfig};
use crate::state::{support_of_operator, ProductVector, SpaceShape, StateEnsemble, Subspace};

/// Product expectations below this count as witness violations.
pub const SAMPLE_VIOLATION_TOL: f64 = 1e-8;
/// Tolerance on the re-optimized minimum product expectation.
pub const REOPTIMIZED_TOL: f64 = 1e-6;

const FRESH_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// `W = 1 − γ⁻¹P` for the projector `P` of a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessOperator {
    pub shape: SpaceShape,
    pub w: CMatrix,
    pub gamma: f64,
    pub subspace: Subspace,
}

impl WitnessOperator {
    /// Builds `1 − γ⁻¹P` for any `γ` in `(0, 1)` without checking that `γ`
    /// is the true product maximum; see [`build_witness`] for that.
    pub fn from_projector(subspace: Subspace, gamma: f64) -> Result<Self> {
        if subspace.dim() == 0 {
            return Err(Error::ZeroDimensional);
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::WitnessRejected(format!("gamma {gamma} outside (0, 1)")));
        }
        let d = subspace.shape().total();
        let w = linalg::identity(d) - subspace.projector().unscale(gamma);
        Ok(Self {
            shape: subspace.shape().clone(),
            w,
            gamma,
            subspace,
        })
    }

    pub fn projector_dim(&self) -> usize {
        self.subspace.dim()
    }

    /// `1 − γ⁻¹`: the value on any unit vector of the subspace.
    pub fn detected_value(&self) -> f64 {
        1.0 - 1.0 / self.gamma
    }
}

/// Whether the ensemble's states jointly support the whole space.
pub fn full_support_check(e: &StateEnsemble, tol_rank: f64) -> Result<bool> {
    let s = support_of_operator(e.shape(), &e.total_sum(), tol_rank)?;
    Ok(s.dim() == e.shape().total())
}

/// `S̃_μ = R⊥_μ̄`, defined only for full-support ensembles.
pub fn s_tilde_projector(e: &StateEnsemble, mu: usize, tol_rank: f64) -> Result<Subspace> {
    if !full_support_check(e, tol_rank)? {
        return Err(Error::NotFullSupport);
    }
    complement_support_of_rest(e, mu, tol_rank)
}

/// `W = 1 − γ⁻¹P` with `γ` the maximal product overlap of `P`.
///
/// Returns `None` when `γ ≥ 1 − tol_product` (the subspace holds a product
/// vector, so no witness exists). Because the see-saw value only bounds `γ`
/// from below, the candidate is re-checked with an independent search and
/// rejected if some product vector scores below zero.
pub fn build_witness(subspace: &Subspace, cfg: &SearchConfig) -> Result<Option<WitnessOperator>> {
    if subspace.dim() == 0 {
        return Err(Error::ZeroDimensional);
    }
    let p = subspace.projector();
    let overlap = max_product_overlap(&p, subspace.shape(), cfg)?;
    if overlap.value >= 1.0 - cfg.tol_product {
        return Ok(None);
    }
    let witness = WitnessOperator::from_projector(subspace.clone(), overlap.value)?;
    let fresh = cfg.with_seed(cfg.seed ^ FRESH_SEED_MIX);
    let check = max_product_overlap(&p, subspace.shape(), &fresh)?;
    let min_product = 1.0 - check.value / witness.gamma;
    if min_product < -REOPTIMIZED_TOL {
        return Err(Error::WitnessRejected(format!(
            "independent search found product expectation {min_product:e}"
        )));
    }
    Ok(Some(witness))
}

/// Outcome of [`validate_witness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessValidation {
    pub samples: usize,
    /// Sampled product states with `⟨π|W|π⟩ < −1e-8`.
    pub violations: usize,
    pub min_sampled: f64,
    /// `1 − γ⁻¹ · (re-optimized product overlap)`.
    pub reoptimized_min: f64,
    /// `⟨v|W|v⟩` for the first basis vector of the subspace.
    pub detected_value: f64,
}

impl WitnessValidation {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.reoptimized_min >= -REOPTIMIZED_TOL && self.detected_value < 0.0
    }
}

const SAMPLE_CHUNK: usize = 4096;

/// Checks a witness: Haar-random product samples, an independent see-saw
/// minimization, and the value on a state from the subspace.
pub fn validate_witness(wop: &WitnessOperator, samples: usize, seed: u64) -> Result<WitnessValidation> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let (violations, min_sampled) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = SAMPLE_CHUNK.min(samples - chunk * SAMPLE_CHUNK);
            let mut bad = 0usize;
            let mut min = f64::INFINITY;
            for _ in 0..n {
                let v = ProductVector::random(&wop.shape, &mut rng).assemble();
                let val = expectation(&wop.w, &v);
                if val < -SAMPLE_VIOLATION_TOL {
                    bad += 1;
                }
                min = min.min(val);
            }
            (bad, min)
        })
        .reduce(|| (0, f64::INFINITY), |a, b| (a.0 + b.0, a.1.min(b.1)));
    let cfg = SearchConfig {
        seed,
        ..SearchConfig::default()
    };
    let check = max_product_overlap(&wop.subspace.projector(), &wop.shape, &cfg)?;
    let detected_value = expectation(&wop.w, &wop.subspace.basis_vector(0));
    Ok(WitnessValidation {
        samples,
        violations,
        min_sampled,
        reoptimized_min: 1.0 - check.value / wop.gamma,
        detected_value,
    })
}
