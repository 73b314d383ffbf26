//! Feasibility of unambiguous discrimination and construction of the
//! discriminating measurements.
//!
//! For a state `ρ_μ` let `R_μ̄` be the support of the sum of all *other*
//! states. A conclusive outcome for `μ` must live in `R⊥_μ̄` and overlap
//! `ρ_μ`; under separable (and LOCC) measurements it must moreover be a
//! product vector. [`check_unconstrained`] and [`check_locc`] decide these
//! conditions; the builders turn the resulting vectors into POVMs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eigh, CMatrix, CVector};
use crate::search::{certify_two_qubit, find_product_in_subspace, SearchConfig};
use crate::state::{complement, support_of_operator, ProductVector, SpaceShape, StateEnsemble, Subspace};

const POVM_TOL: f64 = 1e-9;

/// `R⊥_μ̄`: the orthogonal complement of the support of `Σ_{μ'≠μ} ρ_{μ'}`.
pub fn complement_support_of_rest(e: &StateEnsemble, mu: usize, tol_rank: f64) -> Result<Subspace> {
    e.state(mu)?;
    let rest = support_of_operator(e.shape(), &e.sum_except(mu), tol_rank)?;
    Ok(complement(&rest))
}

/// Largest eigenvalue of `ρ` compressed to a subspace, with the maximizing
/// unit vector of the subspace.
fn compressed_top(rho: &CMatrix, s: &Subspace) -> (f64, Option<CVector>) {
    if s.dim() == 0 {
        return (0.0, None);
    }
    let b = s.basis();
    let compressed = b.adjoint() * rho * b;
    let compressed = (&compressed + compressed.adjoint()).scale(0.5);
    let e = eigh(&compressed).expect("compressed state is Hermitian");
    let v = b * e.top_eigenvector();
    let n = v.norm();
    (e.max_eigenvalue(), Some(v.unscale(n)))
}

/// Result of the unconstrained test for one `μ ∈ Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedCheck {
    pub mu: usize,
    pub feasible: bool,
    /// `λ_max(P ρ_μ P) / Tr ρ_μ` with `P` the projector onto `R⊥_μ̄`.
    pub max_detect: f64,
}

/// Unconstrained unambiguous discrimination test for every `μ ∈ Δ`.
///
/// `S_μ` is nonempty exactly when some vector of `R⊥_μ̄` has nonzero
/// expectation on `ρ_μ`, i.e. when `P ρ_μ P` has a positive eigenvalue. The
/// eigenvalue is compared relative to `Tr ρ_μ` so the test ignores scale.
pub fn check_unconstrained(e: &StateEnsemble, tol_rank: f64, tol_detect: f64) -> Result<Vec<UnconstrainedCheck>> {
    e.delta()
        .iter()
        .map(|&mu| {
            let p = complement_support_of_rest(e, mu, tol_rank)?;
            let rho = e.state(mu)?;
            let (top, _) = compressed_top(rho.matrix(), &p);
            let max_detect = top / rho.trace();
            Ok(UnconstrainedCheck {
                mu,
                feasible: max_detect > tol_detect,
                max_detect,
            })
        })
        .collect()
}

/// Outcome of the LOCC test for one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoccStatus {
    Feasible,
    Infeasible,
    /// The heuristic search found nothing; absence is not proven.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Algebraic,
    Seesaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityEntry {
    pub mu: usize,
    pub unconstrained_feasible: bool,
    pub locc: LoccStatus,
    pub certificate: Option<ProductVector>,
    /// `⟨π_μ|ρ_μ|π_μ⟩` for the certificate.
    pub detect_value: Option<f64>,
    /// `⟨π_μ|P_{R⊥_μ̄}|π_μ⟩` for the certificate.
    pub membership: Option<f64>,
    pub method: Method,
}

/// Per-`μ` feasibility, ordered as `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub entries: Vec<FeasibilityEntry>,
}

impl FeasibilityReport {
    pub fn all_unconstrained(&self) -> bool {
        self.entries.iter().all(|e| e.unconstrained_feasible)
    }

    pub fn all_locc(&self) -> bool {
        self.entries.iter().all(|e| e.locc == LoccStatus::Feasible)
    }

    pub fn entry(&self, mu: usize) -> Option<&FeasibilityEntry> {
        self.entries.iter().find(|e| e.mu == mu)
    }

    /// Certificates of the feasible entries.
    pub fn certificates(&self) -> BTreeMap<usize, ProductVector> {
        self.entries
            .iter()
            .filter_map(|e| e.certificate.clone().map(|c| (e.mu, c)))
            .collect()
    }
}

/// LOCC/separable unambiguous discrimination test for every `μ ∈ Δ`.
///
/// Looks for a product vector in `R⊥_μ̄` with `⟨π|ρ_μ|π⟩ ≥ tol_detect`:
/// * when the unconstrained test fails, the answer is infeasible;
/// * one party: every vector is a product, so the compressed top eigenvector
///   is the certificate;
/// * two qubits: decided exactly by [`certify_two_qubit`];
/// * otherwise see-saw search; failure is reported as undetermined.
pub fn check_locc(e: &StateEnsemble, cfg: &SearchConfig, tol_rank: f64) -> Result<FeasibilityReport> {
    cfg.validate()?;
    let shape = e.shape();
    let entries = e
        .delta()
        .iter()
        .map(|&mu| {
            let p = complement_support_of_rest(e, mu, tol_rank)?;
            let rho = e.state(mu)?;
            let (top, top_vec) = compressed_top(rho.matrix(), &p);
            let unconstrained_feasible = top / rho.trace() > cfg.tol_detect;
            let mut entry = FeasibilityEntry {
                mu,
                unconstrained_feasible,
                locc: LoccStatus::Infeasible,
                certificate: None,
                detect_value: None,
                membership: None,
                method: Method::Algebraic,
            };
            if !unconstrained_feasible {
                return Ok(entry);
            }
            let found = if shape.parties() == 1 {
                let v = top_vec.expect("nonempty subspace");
                let membership = p.membership(&v);
                Some((ProductVector::normalized(shape.clone(), vec![v])?, top, membership))
            } else if shape.is_two_qubit() {
                certify_two_qubit(&p, Some(rho), cfg)?
                    .certificate()
                    .map(|c| (c.vector.clone(), c.detect_value.unwrap_or(0.0), c.membership))
            } else {
                entry.method = Method::Seesaw;
                let local = cfg.with_seed(cfg.seed.wrapping_add(mu as u64));
                find_product_in_subspace(&p, Some(rho), &local)?
                    .map(|c| (c.vector, c.detect_value.unwrap_or(0.0), c.membership))
            };
            match found {
                Some((pv, detect, membership)) => {
                    entry.locc = LoccStatus::Feasible;
                    entry.certificate = Some(pv);
                    entry.detect_value = Some(detect);
                    entry.membership = Some(membership);
                }
                None if entry.method == Method::Seesaw => entry.locc = LoccStatus::Undetermined,
                None => entry.locc = LoccStatus::Infeasible,
            }
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibilityReport { entries })
}

/// A POVM with one conclusive element per `μ ∈ Δ` and an inconclusive one.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPovm {
    pub shape: SpaceShape,
    pub conclusive: BTreeMap<usize, CMatrix>,
    pub inconclusive: CMatrix,
    /// Largest eigenvalue of `Σ_μ |π_μ⟩⟨π_μ|`.
    pub lambda: f64,
}

impl GlobalPovm {
    /// Checks positivity of every element and completeness.
    pub fn validate(&self) -> Result<()> {
        let d = self.shape.total();
        for (mu, op) in &self.conclusive {
            linalg::check_psd(op, 1e-10)
                .map_err(|e| Error::InvalidPovm(format!("element {mu}: {e}")))?;
        }
        linalg::check_psd(&self.inconclusive, 1e-10)
            .map_err(|e| Error::InvalidPovm(format!("inconclusive element: {e}")))?;
        let sum = self
            .conclusive
            .values()
            .fold(self.inconclusive.clone(), |acc, op| acc + op);
        let defect = linalg::frobenius(&(sum - linalg::identity(d)));
        if defect > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:e}"
            )));
        }
        Ok(())
    }
}

/// `Π_μ = λ⁻¹|π_μ⟩⟨π_μ|`, `Π_? = 1 − Σ_μ Π_μ` for unit vectors `π_μ`.
pub fn build_global_povm(shape: &SpaceShape, pis: &BTreeMap<usize, CVector>) -> Result<GlobalPovm> {
    if pis.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = shape.total();
    let mut frame = CMatrix::zeros(d, d);
    for v in pis.values() {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let n = v.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitNorm { norm: n });
        }
        frame += linalg::outer(v, v);
    }
    let lambda = linalg::max_eigenvalue(&frame)?;
    let conclusive: BTreeMap<usize, CMatrix> = pis
        .iter()
        .map(|(&mu, v)| (mu, linalg::outer(v, v).unscale(lambda)))
        .collect();
    let inconclusive = conclusive
        .values()
        .fold(linalg::identity(d), |acc, op| acc - op);
    Ok(GlobalPovm {
        shape: shape.clone(),
        conclusive,
        inconclusive,
        lambda,
    })
}

/// [`build_global_povm`] from product certificates.
pub fn build_global_povm_from_products(pis: &BTreeMap<usize, ProductVector>) -> Result<GlobalPovm> {
    let shape = pis.values().next().ok_or(Error::EmptyInput)?.shape().clone();
    if pis.values().any(|p| p.shape() != &shape) {
        return Err(Error::InvalidShape("certificates have different shapes".into()));
    }
    let vectors = pis.iter().map(|(&mu, p)| (mu, p.assemble())).collect();
    build_global_povm(&shape, &vectors)
}

/// Probability table `p(outcome | ρ_ν)` of a POVM on an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmVerification {
    /// Column labels: the conclusive outcomes in `Δ` order, then `None` for `?`.
    pub outcomes: Vec<Option<usize>>,
    /// Row `ν − 1` holds `Tr(ρ_ν Π_o)` for each outcome `o`.
    pub table: Vec<Vec<f64>>,
    pub violations: Vec<String>,
}

impl PovmVerification {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// `p(μ|ρ_μ)` for a conclusive outcome `mu`.
    pub fn detection(&self, mu: usize) -> Option<f64> {
        let col = self.outcomes.iter().position(|&o| o == Some(mu))?;
        Some(self.table[mu - 1][col])
    }

    /// Largest `Tr(ρ_ν Π_μ)` with `ν ≠ μ`.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (row, probs) in self.table.iter().enumerate() {
            for (col, &o) in self.outcomes.iter().enumerate() {
                if matches!(o, Some(mu) if mu != row + 1) {
                    worst = worst.max(probs[col]);
                }
            }
        }
        worst
    }
}

/// Evaluates `Tr(ρ_ν Π)` for every state and element and flags any wrong
/// conclusive probability above `tol` or any `p(μ|ρ_μ) ≤ tol` for `μ ∈ Δ`.
pub fn verify_povm(povm: &GlobalPovm, e: &StateEnsemble, tol: f64) -> Result<PovmVerification> {
    if povm.shape != *e.shape() {
        return Err(Error::DimensionMismatch {
            expected: e.shape().total(),
            found: povm.shape.total(),
        });
    }
    let mut outcomes: Vec<Option<usize>> = povm.conclusive.keys().map(|&mu| Some(mu)).collect();
    outcomes.push(None);
    let element = |o: &Option<usize>| match o {
        Some(mu) => &povm.conclusive[mu],
        None => &povm.inconclusive,
    };
    let table: Vec<Vec<f64>> = e
        .states()
        .iter()
        .map(|rho| {
            outcomes
                .iter()
                .map(|o| (rho.matrix() * element(o)).trace().re)
                .collect()
        })
        .collect();
    let mut violations = Vec::new();
    for (row, probs) in table.iter().enumerate() {
        let nu = row + 1;
        for (col, o) in outcomes.iter().enumerate() {
            let Some(mu) = *o else { continue };
            if mu != nu && probs[col] > tol {
                violations.push(format!("state {nu} yields conclusive outcome {mu} with probability {:e}", probs[col]));
            }
            if mu == nu && e.delta().contains(&mu) && probs[col] <= tol {
                violations.push(format!("state {mu} is detected with probability {:e}", probs[col]));
            }
        }
    }
    for &mu in e.delta() {
        if !povm.conclusive.contains_key(&mu) {
            violations.push(format!("no conclusive element for state {mu}"));
        }
    }
    Ok(PovmVerification {
        outcomes,
        table,
        violations,
    })
}

/// Sum of tensor products of per-party positive operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePovmElement {
    /// `terms[k][j]` acts on party `j`.
    pub terms: Vec<Vec<CMatrix>>,
}

impl SeparablePovmElement {
    /// `w |π⟩⟨π|` written as a single product term.
    pub fn from_product(pv: &ProductVector, weight: f64) -> Self {
        let mut factors: Vec<CMatrix> = pv.factors().iter().map(|f| linalg::outer(f, f)).collect();
        factors[0] *= linalg::cr(weight);
        Self { terms: vec![factors] }
    }

    pub fn validate(&self, shape: &SpaceShape) -> Result<()> {
        let d = shape.total();
        if self.terms.len() > d * d {
            return Err(Error::InvalidPovm(format!(
                "{} terms exceed D² = {}",
                self.terms.len(),
                d * d
            )));
        }
        for term in &self.terms {
            if term.len() != shape.parties() {
                return Err(Error::DimensionMismatch {
                    expected: shape.parties(),
                    found: term.len(),
                });
            }
            for (op, &dj) in term.iter().zip(shape.dims()) {
                if op.nrows() != dj {
                    return Err(Error::DimensionMismatch {
                        expected: dj,
                        found: op.nrows(),
                    });
                }
                linalg::check_psd(op, 1e-10)?;
            }
        }
        Ok(())
    }

    pub fn to_operator(&self) -> CMatrix {
        let d: usize = self.terms[0].iter().map(|m| m.nrows()).product();
        self.terms.iter().fold(CMatrix::zeros(d, d), |acc, term| {
            let prod = term[1..].iter().fold(term[0].clone(), |p, m| linalg::kron(&p, m));
            acc + prod
        })
    }
}

/// One party's measurement in the local protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPovm {
    pub conclusive: BTreeMap<usize, CMatrix>,
    pub inconclusive: CMatrix,
}

impl LocalPovm {
    /// Elements in outcome order: conclusive ones ascending, then `?`.
    pub fn elements(&self) -> Vec<(Option<usize>, &CMatrix)> {
        self.conclusive
            .iter()
            .map(|(&mu, op)| (Some(mu), op))
            .chain(std::iter::once((None, &self.inconclusive)))
            .collect()
    }
}

/// Per-party measurements `Π_{μj} = λ_j⁻¹|π_{μj}⟩⟨π_{μj}|`, `Π_{?j} = 1 − Σ_μ Π_{μj}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPovmSet {
    pub shape: SpaceShape,
    pub parties: Vec<LocalPovm>,
    pub lambdas: Vec<f64>,
    pub certificates: BTreeMap<usize, ProductVector>,
}

impl LocalPovmSet {
    /// `∏_j λ_j⁻¹`.
    pub fn scale(&self) -> f64 {
        self.lambdas.iter().map(|l| 1.0 / l).product()
    }

    /// `p(μ|ρ_μ) = ⟨π_μ|ρ_μ|π_μ⟩ ∏_j λ_j⁻¹` for each certified `μ`.
    pub fn predicted_rates(&self, e: &StateEnsemble) -> Result<BTreeMap<usize, f64>> {
        self.certificates
            .iter()
            .map(|(&mu, pv)| {
                let rho = e.state(mu)?;
                Ok((mu, rho.expectation(&pv.assemble()) / rho.trace() * self.scale()))
            })
            .collect()
    }

    /// `⊗_j Π_{μj}`: the global operator for unanimous outcome `μ`.
    pub fn joint_element(&self, mu: usize) -> Option<CMatrix> {
        let mut ops = self.parties.iter().map(|p| p.conclusive.get(&mu));
        let first = ops.next()??.clone();
        ops.try_fold(first, |acc, op| op.map(|m| linalg::kron(&acc, m)))
    }

    /// The protocol seen as one global POVM: conclusive `μ` is the joint
    /// element, everything else (any disagreement or `?`) is inconclusive.
    pub fn effective_global_povm(&self) -> GlobalPovm {
        let d = self.shape.total();
        let conclusive: BTreeMap<usize, CMatrix> = self
            .certificates
            .keys()
            .filter_map(|&mu| self.joint_element(mu).map(|op| (mu, op)))
            .collect();
        let inconclusive = conclusive
            .values()
            .fold(linalg::identity(d), |acc, op| acc - op);
        GlobalPovm {
            shape: self.shape.clone(),
            conclusive,
            inconclusive,
            lambda: 1.0 / self.scale(),
        }
    }

    /// The joint element as a one-term separable operator.
    pub fn separable_element(&self, mu: usize) -> Option<SeparablePovmElement> {
        let term: Option<Vec<CMatrix>> = self.parties.iter().map(|p| p.conclusive.get(&mu).cloned()).collect();
        term.map(|t| SeparablePovmElement { terms: vec![t] })
    }

    pub fn validate(&self) -> Result<()> {
        for (j, (party, &dj)) in self.parties.iter().zip(self.shape.dims()).enumerate() {
            let mut sum = party.inconclusive.clone();
            linalg::check_psd(&party.inconclusive, 1e-10)
                .map_err(|e| Error::InvalidPovm(format!("party {}: {e}", j + 1)))?;
            for op in party.conclusive.values() {
                linalg::check_psd(op, 1e-10)
                    .map_err(|e| Error::InvalidPovm(format!("party {}: {e}", j + 1)))?;
                sum += op;
            }
            let defect = linalg::frobenius(&(sum - linalg::identity(dj)));
            if defect > POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "party {} elements sum to identity only within {defect:e}",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Builds the non-adaptive local protocol from product certificates.
pub fn build_local_povms(pis: &BTreeMap<usize, ProductVector>) -> Result<LocalPovmSet> {
    let shape = pis.values().next().ok_or(Error::EmptyInput)?.shape().clone();
    if let Some(bad) = pis.values().find(|p| p.shape() != &shape) {
        return Err(Error::InvalidShape(format!(
            "certificate shape {:?} differs from {:?}",
            bad.shape().dims(),
            shape.dims()
        )));
    }
    let mut parties = Vec::with_capacity(shape.parties());
    let mut lambdas = Vec::with_capacity(shape.parties());
    for (j, &dj) in shape.dims().iter().enumerate() {
        let frame = pis
            .values()
            .fold(CMatrix::zeros(dj, dj), |acc, p| acc + linalg::outer(p.factor(j), p.factor(j)));
        let lambda = linalg::max_eigenvalue(&frame)?;
        let conclusive: BTreeMap<usize, CMatrix> = pis
            .iter()
            .map(|(&mu, p)| (mu, linalg::outer(p.factor(j), p.factor(j)).unscale(lambda)))
            .collect();
        let inconclusive = conclusive
            .values()
            .fold(linalg::identity(dj), |acc, op| acc - op);
        parties.push(LocalPovm {
            conclusive,
            inconclusive,
        });
        lambdas.push(lambda);
    }
    Ok(LocalPovmSet {
        shape,
        parties,
        lambdas,
        certificates: pis.clone(),
    })
}

/// Reciprocal (dual) states of `D` linearly independent vectors spanning a
/// `D`-dimensional space: `⟨ψ̃_μ|ψ_ν⟩ = c_μ δ_{μν}` with `c_μ > 0`, each
/// `ψ̃_μ` normalized.
pub fn reciprocal_states(vectors: &[CVector], tol_rank: f64) -> Result<Vec<CVector>> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = vectors[0].len();
    if vectors.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: vectors.len(),
        });
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    let psi = CMatrix::from_columns(vectors);
    let s = linalg::svd(&psi)?;
    if linalg::numerical_rank(&s.singular_values, tol_rank) < d {
        return Err(Error::LinearlyDependent);
    }
    let gram = psi.adjoint() * &psi;
    let inverse = gram.try_inverse().ok_or(Error::LinearlyDependent)?;
    // Ψ̃ = Ψ G⁻¹ gives Ψ̃†Ψ = 1.
    let dual = &psi * inverse;
    Ok((0..d)
        .map(|k| {
            let col = dual.column(k).into_owned();
            let n = col.norm();
            col.unscale(n)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, outer};
    use crate::state::{factorize_if_product, DensityMatrix};

    fn sh(d: &[usize]) -> SpaceShape {
        SpaceShape::new(d.to_vec()).unwrap()
    }

    fn v(a: &[f64]) -> CVector {
        CVector::from_iterator(a.len(), a.iter().map(|&x| cr(x)))
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn bell() -> [CVector; 4] {
        [
            v(&[H, 0.0, 0.0, H]),
            v(&[H, 0.0, 0.0, -H]),
            v(&[0.0, H, H, 0.0]),
            v(&[0.0, H, -H, 0.0]),
        ]
    }

    fn projector_distance(a: &Subspace, b: &Subspace) -> f64 {
        linalg::frobenius(&(a.projector() - b.projector()))
    }

    fn qubit_pair(a: CVector, b: CVector) -> StateEnsemble {
        StateEnsemble::from_pure(&sh(&[2]), &[a, b]).unwrap()
    }

    #[test]
    fn rest_complement_examples() {
        let e = qubit_pair(v(&[1.0, 0.0]), v(&[0.0, 1.0]));
        let s = complement_support_of_rest(&e, 1, 1e-10).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.membership(&v(&[1.0, 0.0])) - 1.0).abs() < 1e-12);

        let b = bell();
        let e = StateEnsemble::from_pure(&sh(&[2, 2]), &b).unwrap();
        let s = complement_support_of_rest(&e, 1, 1e-10).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.membership(&b[0]) - 1.0).abs() < 1e-10);

        let e = StateEnsemble::from_pure(&sh(&[2, 2]), &b[..3]).unwrap();
        let s = complement_support_of_rest(&e, 1, 1e-10).unwrap();
        let expected = Subspace::span(sh(&[2, 2]), &[b[0].clone(), b[3].clone()], 1e-10).unwrap();
        assert!(projector_distance(&s, &expected) < 1e-10);
    }

    #[test]
    fn unconstrained_examples() {
        let e = qubit_pair(v(&[1.0, 0.0]), v(&[0.0, 1.0]));
        assert!(check_unconstrained(&e, 1e-10, 1e-8).unwrap().iter().all(|c| c.feasible));

        let e = qubit_pair(v(&[1.0, 0.0]), v(&[H, H]));
        let checks = check_unconstrained(&e, 1e-10, 1e-8).unwrap();
        // R⊥ of |+⟩ is |−⟩; ⟨−|0⟩² = ½.
        assert!(checks.iter().all(|c| c.feasible && (c.max_detect - 0.5).abs() < 1e-12));

        let e = StateEnsemble::from_pure(&sh(&[2]), &[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[H, H])]).unwrap();
        let checks = check_unconstrained(&e, 1e-10, 1e-8).unwrap();
        assert_eq!(checks.iter().map(|c| c.feasible).collect::<Vec<_>>(), vec![false, false, false]);
    }

    #[test]
    fn locc_product_basis() {
        let s = sh(&[2, 2]);
        let basis: Vec<CVector> = (0..4).map(|i| {
            let mut x = CVector::zeros(4);
            x[i] = cr(1.0);
            x
        }).collect();
        let e = StateEnsemble::from_pure(&s, &basis).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert!(r.all_locc());
        for (k, entry) in r.entries.iter().enumerate() {
            assert_eq!(entry.method, Method::Algebraic);
            let cert = entry.certificate.as_ref().unwrap().assemble();
            assert!((cert[k].norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn locc_bell_basis_infeasible() {
        let e = StateEnsemble::from_pure(&sh(&[2, 2]), &bell()).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        for entry in &r.entries {
            assert!(entry.unconstrained_feasible);
            assert_eq!(entry.locc, LoccStatus::Infeasible);
            assert_eq!(entry.method, Method::Algebraic);
        }
    }

    #[test]
    fn locc_three_bell_states() {
        let b = bell();
        let e = StateEnsemble::from_pure(&sh(&[2, 2]), &b[..3]).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert!(r.all_locc());
        for entry in &r.entries {
            assert!((entry.detect_value.unwrap() - 0.5).abs() < 1e-9);
        }
        let cert = r.entry(3).unwrap().certificate.as_ref().unwrap().assemble();
        assert!((cert[1].norm() - 1.0).abs() < 1e-9 || (cert[2].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn locc_single_party_equals_unconstrained() {
        let e = qubit_pair(v(&[1.0, 0.0]), v(&[H, H]));
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert!(r.all_locc());
        assert!((r.entry(1).unwrap().detect_value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn locc_seesaw_three_qubits() {
        let s = sh(&[2, 2, 2]);
        let states: Vec<CVector> = (0..8).map(|i| ProductVector::basis_state(&s, &s.digits(i)).unwrap().assemble()).collect();
        let e = StateEnsemble::from_pure(&s, &states).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert!(r.all_locc());
        assert!(r.entries.iter().all(|e| e.method == Method::Seesaw));

        let mut ghz = CVector::zeros(8);
        ghz[0] = cr(H);
        ghz[7] = cr(H);
        let mut ghz_minus = ghz.clone();
        ghz_minus[7] = cr(-H);
        let mut rest: Vec<CVector> = (1..7).map(|i| states[i].clone()).collect();
        rest.push(ghz.clone());
        rest.push(ghz_minus);
        let e = StateEnsemble::from_pure(&s, &rest).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert_eq!(r.entry(7).unwrap().locc, LoccStatus::Undetermined);
        assert_eq!(r.entry(1).unwrap().locc, LoccStatus::Feasible);
    }

    #[test]
    fn delta_subset_only_checks_delta() {
        let b = bell();
        let states: Vec<DensityMatrix> = b.iter().map(|x| DensityMatrix::pure(sh(&[2, 2]), x).unwrap()).collect();
        let e = StateEnsemble::new(states, Some(vec![2]), None).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].mu, 2);
    }

    #[test]
    fn global_povm_examples() {
        let s = sh(&[2]);
        let single = BTreeMap::from([(1, v(&[1.0, 0.0]))]);
        let p = build_global_povm(&s, &single).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert!((p.inconclusive[(1, 1)] - cr(1.0)).norm() < 1e-12);
        assert!(p.inconclusive[(0, 0)].norm() < 1e-12);
        p.validate().unwrap();

        let pair = BTreeMap::from([(1, v(&[1.0, 0.0])), (2, v(&[0.0, 1.0]))]);
        let p = build_global_povm(&s, &pair).unwrap();
        assert!(linalg::frobenius(&p.inconclusive) < 1e-12);

        let skew = BTreeMap::from([(1, v(&[1.0, 0.0])), (2, v(&[H, H]))]);
        let p = build_global_povm(&s, &skew).unwrap();
        // Eigenvalues of the frame operator equal those of the Gram matrix [[1, g], [g, 1]].
        assert!((p.lambda - (1.0 + H)).abs() < 1e-12);
        assert!(linalg::min_eigenvalue(&p.inconclusive).unwrap().abs() < 1e-12);
        p.validate().unwrap();

        assert!(build_global_povm(&s, &BTreeMap::new()).is_err());
        let bad = BTreeMap::from([(1, v(&[1.0, 1.0]))]);
        assert!(matches!(build_global_povm(&s, &bad), Err(Error::NotUnitNorm { .. })));
    }

    #[test]
    fn verify_orthogonal_products() {
        let s = sh(&[2, 2]);
        let e = StateEnsemble::from_pure(&s, &[v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.0, 0.0, 1.0])]).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        let povm = build_global_povm_from_products(&r.certificates()).unwrap();
        let ver = verify_povm(&povm, &e, 1e-9).unwrap();
        assert!(ver.ok(), "{:?}", ver.violations);
        assert!((ver.detection(1).unwrap() - 1.0).abs() < 1e-10);
        assert!(ver.max_off_diagonal() < 1e-12);
    }

    #[test]
    fn verify_reciprocal_povm_on_skew_pair() {
        let s = sh(&[2]);
        let psi = [v(&[1.0, 0.0]), v(&[H, H])];
        let e = StateEnsemble::from_pure(&s, &psi).unwrap();
        let recip = reciprocal_states(&psi, 1e-10).unwrap();
        let pis: BTreeMap<usize, CVector> = recip.iter().cloned().enumerate().map(|(k, x)| (k + 1, x)).collect();
        let povm = build_global_povm(&s, &pis).unwrap();
        let ver = verify_povm(&povm, &e, 1e-9).unwrap();
        assert!(ver.ok());
        // Oracle: p(μ|ψ_μ) = λ⁻¹ |⟨π_μ|ψ_μ⟩|², evaluated directly.
        for mu in 1..=2 {
            let direct = recip[mu - 1].dotc(&psi[mu - 1]).norm_sqr() / povm.lambda;
            assert!((ver.detection(mu).unwrap() - direct).abs() < 1e-12);
            // |⟨−|0⟩|² = |⟨1|+⟩|² = ½ and λ = 1 + 1/√2.
            assert!((direct - 0.5 / (1.0 + H)).abs() < 1e-12);
        }
    }

    #[test]
    fn verify_flags_violations() {
        let s = sh(&[2]);
        let e = qubit_pair(v(&[1.0, 0.0]), v(&[H, H]));
        let pis = BTreeMap::from([(1, v(&[1.0, 0.0])), (2, v(&[0.0, 1.0]))]);
        let povm = build_global_povm(&s, &pis).unwrap();
        let ver = verify_povm(&povm, &e, 1e-9).unwrap();
        assert!(!ver.ok());
    }

    #[test]
    fn local_povm_examples() {
        let s = sh(&[2, 2]);
        let pis = BTreeMap::from([
            (1, ProductVector::basis_state(&s, &[0, 0]).unwrap()),
            (2, ProductVector::basis_state(&s, &[1, 1]).unwrap()),
        ]);
        let lp = build_local_povms(&pis).unwrap();
        lp.validate().unwrap();
        assert_eq!(lp.lambdas, vec![1.0, 1.0]);
        let e = StateEnsemble::from_pure(&s, &[pis[&1].assemble(), pis[&2].assemble()]).unwrap();
        let rates = lp.predicted_rates(&e).unwrap();
        assert!((rates[&1] - 1.0).abs() < 1e-12 && (rates[&2] - 1.0).abs() < 1e-12);

        let plus = v(&[H, H]);
        let single = BTreeMap::from([(1, ProductVector::new(s.clone(), vec![plus.clone(), plus]).unwrap())]);
        let lp = build_local_povms(&single).unwrap();
        let minus = v(&[H, -H]);
        for party in &lp.parties {
            assert!(linalg::frobenius(&(&party.inconclusive - outer(&minus, &minus))) < 1e-12);
        }
    }

    #[test]
    fn local_povms_for_three_bell_states() {
        let b = bell();
        let e = StateEnsemble::from_pure(&sh(&[2, 2]), &b[..3]).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        let lp = build_local_povms(&r.certificates()).unwrap();
        lp.validate().unwrap();
        let rates = lp.predicted_rates(&e).unwrap();
        let povm = build_global_povm_from_products(&r.certificates()).unwrap();
        for (&mu, pv) in &lp.certificates {
            // Tensor consistency.
            let joint = lp.joint_element(mu).unwrap();
            let expected = outer(&pv.assemble(), &pv.assemble()).scale(lp.scale());
            assert!(linalg::frobenius(&(joint.clone() - expected)) < 1e-9);
            assert!(rates[&mu] > 0.0);
            assert!((rates[&mu] - 0.5 * lp.scale()).abs() < 1e-9);
            // Joint element is unambiguous on the ensemble.
            for (nu, rho) in e.states().iter().enumerate() {
                let p = (rho.matrix() * &joint).trace().re;
                if nu + 1 != mu {
                    assert!(p.abs() < 1e-12);
                }
            }
            let sep = lp.separable_element(mu).unwrap();
            sep.validate(&lp.shape).unwrap();
            assert!(linalg::frobenius(&(sep.to_operator() - joint)) < 1e-12);
        }
        assert!(verify_povm(&povm, &e, 1e-9).unwrap().ok());
        // Global elements from products are one-term separable operators.
        for (mu, op) in &povm.conclusive {
            let sep = SeparablePovmElement::from_product(&r.certificates()[mu], 1.0 / povm.lambda);
            sep.validate(&povm.shape).unwrap();
            assert!(linalg::frobenius(&(sep.to_operator() - op)) < 1e-12);
        }
    }

    #[test]
    fn local_povms_reject_mixed_shapes() {
        let pis = BTreeMap::from([
            (1, ProductVector::basis_state(&sh(&[2, 2]), &[0, 0]).unwrap()),
            (2, ProductVector::basis_state(&sh(&[2, 3]), &[1, 1]).unwrap()),
        ]);
        assert!(build_local_povms(&pis).is_err());
        assert!(build_local_povms(&BTreeMap::new()).is_err());
    }

    #[test]
    fn reciprocal_examples() {
        let b = bell();
        let r = reciprocal_states(&b, 1e-10).unwrap();
        for (x, y) in r.iter().zip(&b) {
            assert!((x.dotc(y).norm() - 1.0).abs() < 1e-12);
            assert!(factorize_if_product(x, &sh(&[2, 2]), 1e-8).is_none());
        }

        let psi = [v(&[1.0, 0.0]), v(&[H, H])];
        let r = reciprocal_states(&psi, 1e-10).unwrap();
        assert!((r[0].dotc(&v(&[H, -H])).norm() - 1.0).abs() < 1e-12);
        assert!((r[1].dotc(&v(&[0.0, 1.0])).norm() - 1.0).abs() < 1e-12);
        for mu in 0..2 {
            for nu in 0..2 {
                let ip = r[mu].dotc(&psi[nu]);
                if mu == nu {
                    assert!(ip.re > 0.0 && ip.im.abs() < 1e-12);
                } else {
                    assert!(ip.norm() < 1e-12);
                }
            }
        }

        let dependent = [v(&[1.0, 0.0]), v(&[2.0, 0.0])];
        assert_eq!(reciprocal_states(&dependent, 1e-10), Err(Error::LinearlyDependent));
        assert!(reciprocal_states(&[v(&[1.0, 0.0])], 1e-10).is_err());
        let complex_pair = [v(&[1.0, 0.0]), CVector::from_vec(vec![c(0.0, H), c(H, 0.0)])];
        assert!(reciprocal_states(&complex_pair, 1e-10).is_ok());
    }
}
