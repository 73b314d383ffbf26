//! Monte Carlo run of the non-adaptive local protocol.
//!
//! Every party measures its own subsystem with its local POVM. The outcomes
//! are compared over a classical channel and the round is conclusive only
//! when all parties report the same label `μ ∈ Δ`. Joint outcomes are drawn
//! from the exact distribution by the chain rule: party after party, each
//! outcome is sampled from the conditional state left by the previous
//! parties' Kraus updates `√Π ρ √Π / p`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::{LocalPovm, LocalPovmSet};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::{SpaceShape, StateEnsemble};

const NEGATIVE_PROBABILITY_TOL: f64 = 1e-10;
/// Outcome label, its weight or probability, and the post-measurement state.
pub type Branch = (Option<usize>, f64, Option<CMatrix>);

/// Absolute outcome weights at or below this are treated as zero.
const PRUNE_WEIGHT: f64 = 1e-14;
const TRIAL_CHUNK: usize = 8192;

/// Lifts a single-party operator to the composite space.
pub fn embed_local(shape: &SpaceShape, party: usize, op: &CMatrix) -> CMatrix {
    let dims = shape.dims();
    let before: usize = dims[..party].iter().product();
    let after: usize = dims[party + 1..].iter().product();
    let left = linalg::kron(&linalg::identity(before), op);
    linalg::kron(&left, &linalg::identity(after))
}

/// Weights `Tr(K ρ K†)` of `party`'s outcomes on an unnormalized `state`,
/// with the unnormalized post-measurement state `K ρ K†` (`K = √Π`).
/// Branches whose weight is below [`PRUNE_WEIGHT`] get weight 0 and no
/// post-state: they are never sampled, and renormalizing them would only
/// amplify rounding noise.
fn branches(
    state: &CMatrix,
    shape: &SpaceShape,
    party: usize,
    povm: &LocalPovm,
) -> Result<Vec<Branch>> {
    povm.elements()
        .into_iter()
        .map(|(label, op)| {
            let w = (state * embed_local(shape, party, op)).trace().re;
            if w < -NEGATIVE_PROBABILITY_TOL {
                return Err(Error::InvalidPovm(format!(
                    "negative outcome probability {w:e} for party {}",
                    party + 1
                )));
            }
            if w <= PRUNE_WEIGHT {
                return Ok((label, 0.0, None));
            }
            let kraus = embed_local(shape, party, &linalg::psd_sqrt(op)?);
            Ok((label, w, Some(&kraus * state * kraus.adjoint())))
        })
        .collect()
}

/// Outcome distribution of `party`'s measurement on `state`, with the
/// normalized post-measurement state for each outcome of nonzero
/// probability. Outcomes follow [`LocalPovm::elements`] order.
pub fn conditional_distribution(
    state: &CMatrix,
    shape: &SpaceShape,
    party: usize,
    povm: &LocalPovm,
) -> Result<Vec<Branch>> {
    let tr: f64 = state.trace().re;
    Ok(branches(&state.unscale(tr), shape, party, povm)?
        .into_iter()
        .map(|(label, p, post)| (label, p, post.map(|m| m.unscale(p))))
        .collect())
}

/// Draws `party`'s outcome on `state` and returns it with the conditional
/// state the remaining parties see.
pub fn sample_local_outcome<R: Rng + ?Sized>(
    state: &CMatrix,
    shape: &SpaceShape,
    party: usize,
    povm: &LocalPovm,
    rng: &mut R,
) -> Result<(Option<usize>, CMatrix)> {
    let dist = conditional_distribution(state, shape, party, povm)?;
    let k = draw(dist.iter().map(|(_, p, _)| *p), rng);
    let (label, _, post) = dist.into_iter().nth(k).expect("index in range");
    Ok((label, post.expect("sampled outcome has positive probability")))
}

fn draw<R: Rng + ?Sized>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return k;
        }
    }
    last_positive
}

/// Outcome weights for all outcome prefixes of one prepared state, so each
/// trial is a walk from the root. Nodes hold joint weights of their
/// prefix; drawing normalizes them into the conditional distribution.
struct OutcomeTree {
    labels: Vec<Option<usize>>,
    probs: Vec<f64>,
    children: Vec<Option<OutcomeTree>>,
}

impl OutcomeTree {
    fn build(state: &CMatrix, lp: &LocalPovmSet, party: usize) -> Result<Self> {
        let dist = branches(state, &lp.shape, party, &lp.parties[party])?;
        let mut labels = Vec::with_capacity(dist.len());
        let mut probs = Vec::with_capacity(dist.len());
        let mut children = Vec::with_capacity(dist.len());
        for (label, p, post) in dist {
            labels.push(label);
            probs.push(p);
            let child = match post {
                Some(post) if party + 1 < lp.parties.len() => Some(Self::build(&post, lp, party + 1)?),
                _ => None,
            };
            children.push(child);
        }
        Ok(Self {
            labels,
            probs,
            children,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Option<usize>>) {
        let k = draw(self.probs.iter().copied(), rng);
        out.push(self.labels[k]);
        if let Some(child) = &self.children[k] {
            child.sample(rng, out);
        }
    }
}

/// Unanimity rule: conclusive `μ` iff every party reports `μ`.
pub fn classify(outcomes: &[Option<usize>]) -> Option<usize> {
    let first = outcomes.first().copied().flatten()?;
    outcomes.iter().all(|&o| o == Some(first)).then_some(first)
}

/// Exact probability of every joint outcome tuple, `Tr(ρ ⊗_j Π_{o_j j})`.
pub fn exact_joint_distribution(rho: &CMatrix, lp: &LocalPovmSet) -> BTreeMap<Vec<Option<usize>>, f64> {
    let mut out = BTreeMap::new();
    let per_party: Vec<Vec<(Option<usize>, &CMatrix)>> = lp.parties.iter().map(|p| p.elements()).collect();
    let counts: Vec<usize> = per_party.iter().map(|e| e.len()).collect();
    let total: usize = counts.iter().product();
    let tr = rho.trace().re;
    for mut idx in 0..total {
        let mut labels = vec![None; counts.len()];
        let mut op: Option<CMatrix> = None;
        let mut picks = vec![0; counts.len()];
        for j in (0..counts.len()).rev() {
            picks[j] = idx % counts[j];
            idx /= counts[j];
        }
        for (j, &k) in picks.iter().enumerate() {
            let (label, m) = per_party[j][k];
            labels[j] = label;
            op = Some(match op {
                None => m.clone(),
                Some(acc) => linalg::kron(&acc, m),
            });
        }
        let p = (rho * op.expect("at least one party")).trace().re / tr;
        out.insert(labels, p);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStatistics {
    pub mu: usize,
    pub prepared: u64,
    pub conclusive_correct: u64,
    pub conclusive_wrong: u64,
    pub inconclusive: u64,
    pub empirical_rate: f64,
    /// `p(μ|ρ_μ)` from the local construction, for certified `μ`.
    pub predicted_rate: Option<f64>,
}

impl StateStatistics {
    /// Binomial standard deviation of the empirical rate.
    pub fn sigma(&self) -> Option<f64> {
        let p = self.predicted_rate?;
        (self.prepared > 0).then(|| (p * (1.0 - p) / self.prepared as f64).max(0.0).sqrt())
    }

    /// `|empirical − predicted| ≤ k σ` (plus 1e-9 for rounding at p ∈ {0, 1}).
    pub fn within_sigmas(&self, k: f64) -> bool {
        match (self.predicted_rate, self.sigma()) {
            (Some(p), Some(s)) => (self.empirical_rate - p).abs() <= k * s + 1e-9,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub seed: u64,
    pub per_state: Vec<StateStatistics>,
}

impl SimulationReport {
    pub fn total_wrong(&self) -> u64 {
        self.per_state.iter().map(|s| s.conclusive_wrong).sum()
    }

    pub fn rates_consistent(&self, sigmas: f64) -> bool {
        self.per_state.iter().all(|s| s.within_sigmas(sigmas))
    }
}

#[derive(Clone)]
struct Tally {
    prepared: Vec<u64>,
    correct: Vec<u64>,
    wrong: Vec<u64>,
    inconclusive: Vec<u64>,
}

impl Tally {
    fn new(m: usize) -> Self {
        Self {
            prepared: vec![0; m],
            correct: vec![0; m],
            wrong: vec![0; m],
            inconclusive: vec![0; m],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for k in 0..self.prepared.len() {
            self.prepared[k] += other.prepared[k];
            self.correct[k] += other.correct[k];
            self.wrong[k] += other.wrong[k];
            self.inconclusive[k] += other.inconclusive[k];
        }
        self
    }
}

/// Simulates `trials` rounds: draw the prepared state from the priors
/// (uniform by default), sample all parties' outcomes, apply the unanimity
/// rule. Trials are split in fixed-size chunks with per-chunk streams of the
/// seed, so the report depends only on `(trials, seed)`.
pub fn run_protocol(e: &StateEnsemble, lp: &LocalPovmSet, trials: u64, seed: u64) -> Result<SimulationReport> {
    if e.shape() != &lp.shape {
        return Err(Error::InvalidShape(format!(
            "ensemble dims {:?} do not match measurement dims {:?}",
            e.shape().dims(),
            lp.shape.dims()
        )));
    }
    lp.validate()?;
    let m = e.len();
    let priors = e.priors_or_uniform();
    let trees = e
        .states()
        .iter()
        .map(|rho| OutcomeTree::build(&rho.matrix().unscale(rho.trace()), lp, 0))
        .collect::<Result<Vec<_>>>()?;
    let chunks = (trials as usize).div_ceil(TRIAL_CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = TRIAL_CHUNK.min(trials as usize - chunk * TRIAL_CHUNK);
            let mut t = Tally::new(m);
            let mut outcomes = Vec::with_capacity(lp.parties.len());
            for _ in 0..n {
                let k = draw(priors.iter().copied(), &mut rng);
                outcomes.clear();
                trees[k].sample(&mut rng, &mut outcomes);
                t.prepared[k] += 1;
                match classify(&outcomes) {
                    Some(nu) if nu == k + 1 => t.correct[k] += 1,
                    Some(_) => t.wrong[k] += 1,
                    None => t.inconclusive[k] += 1,
                }
            }
            t
        })
        .reduce(|| Tally::new(m), Tally::merge);
    let predicted = lp.predicted_rates(e)?;
    let per_state = (0..m)
        .map(|k| StateStatistics {
            mu: k + 1,
            prepared: tally.prepared[k],
            conclusive_correct: tally.correct[k],
            conclusive_wrong: tally.wrong[k],
            inconclusive: tally.inconclusive[k],
            empirical_rate: if tally.prepared[k] > 0 {
                tally.correct[k] as f64 / tally.prepared[k] as f64
            } else {
                0.0
            },
            predicted_rate: predicted.get(&(k + 1)).copied(),
        })
        .collect();
    Ok(SimulationReport {
        trials,
        seed,
        per_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::{build_local_povms, check_locc};
    use crate::linalg::{cr, outer, CVector};
    use crate::search::SearchConfig;
    use crate::state::ProductVector;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn v(a: &[f64]) -> CVector {
        CVector::from_iterator(a.len(), a.iter().map(|&x| cr(x)))
    }

    fn computational_povm() -> LocalPovm {
        LocalPovm {
            conclusive: BTreeMap::from([(1, outer(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])))]),
            inconclusive: outer(&v(&[0.0, 1.0]), &v(&[0.0, 1.0])),
        }
    }

    #[test]
    fn sample_deterministic_outcome() {
        let shape = SpaceShape::new(vec![2]).unwrap();
        let rho = outer(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (o, _) = sample_local_outcome(&rho, &shape, 0, &computational_povm(), &mut rng).unwrap();
            assert_eq!(o, Some(1));
        }
    }

    #[test]
    fn sample_plus_state_is_balanced() {
        let shape = SpaceShape::new(vec![2]).unwrap();
        let rho = outer(&v(&[H, H]), &v(&[H, H]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_local_outcome(&rho, &shape, 0, &computational_povm(), &mut rng).unwrap().0 == Some(1))
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 5.0 * sigma);
    }

    #[test]
    fn bell_correlations_survive_chain_rule() {
        let shape = SpaceShape::new(vec![2, 2]).unwrap();
        let phi = v(&[H, 0.0, 0.0, H]);
        let rho = outer(&phi, &phi);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let (a, post) = sample_local_outcome(&rho, &shape, 0, &computational_povm(), &mut rng).unwrap();
            let (b, _) = sample_local_outcome(&post, &shape, 1, &computational_povm(), &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_povm_rejected() {
        let shape = SpaceShape::new(vec![2]).unwrap();
        let bad = LocalPovm {
            conclusive: BTreeMap::from([(1, linalg::identity(2).scale(2.0))]),
            inconclusive: linalg::identity(2).scale(-1.0),
        };
        let rho = outer(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_local_outcome(&rho, &shape, 0, &bad, &mut rng).is_err());
    }

    #[test]
    fn classify_unanimity() {
        assert_eq!(classify(&[Some(2), Some(2)]), Some(2));
        assert_eq!(classify(&[Some(2), Some(1)]), None);
        assert_eq!(classify(&[None, None]), None);
        assert_eq!(classify(&[Some(1), None]), None);
    }

    #[test]
    fn orthogonal_products_always_conclusive() {
        let shape = SpaceShape::new(vec![2, 2]).unwrap();
        let e = StateEnsemble::from_pure(&shape, &[v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.0, 0.0, 1.0])]).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        let lp = build_local_povms(&r.certificates()).unwrap();
        let report = run_protocol(&e, &lp, 10_000, 3).unwrap();
        for s in &report.per_state {
            assert_eq!(s.conclusive_correct, s.prepared);
            assert_eq!(s.conclusive_wrong, 0);
        }
        let total: u64 = report.per_state.iter().map(|s| s.prepared).sum();
        assert_eq!(total, 10_000);
    }

    #[test]
    fn report_is_reproducible() {
        let shape = SpaceShape::new(vec![2, 2]).unwrap();
        let b = [v(&[H, 0.0, 0.0, H]), v(&[H, 0.0, 0.0, -H]), v(&[0.0, H, H, 0.0])];
        let e = StateEnsemble::from_pure(&shape, &b).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        let lp = build_local_povms(&r.certificates()).unwrap();
        let a = run_protocol(&e, &lp, 30_000, 9).unwrap();
        let b = run_protocol(&e, &lp, 30_000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_wrong(), 0);
        assert!(a.rates_consistent(5.0));
    }

    #[test]
    fn histogram_matches_exact_joint_distribution() {
        // Chi-square sanity check of sampled outcome tuples.
        let shape = SpaceShape::new(vec![2, 2]).unwrap();
        let b = [v(&[H, 0.0, 0.0, H]), v(&[H, 0.0, 0.0, -H]), v(&[0.0, H, H, 0.0])];
        let e = StateEnsemble::from_pure(&shape, &b).unwrap();
        let r = check_locc(&e, &SearchConfig::default(), 1e-10).unwrap();
        let lp = build_local_povms(&r.certificates()).unwrap();
        let rho = e.state(1).unwrap().matrix().clone();
        let exact = exact_joint_distribution(&rho, &lp);
        assert!((exact.values().sum::<f64>() - 1.0).abs() < 1e-12);
        let tree = OutcomeTree::build(&rho, &lp, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 50_000;
        let mut hist: BTreeMap<Vec<Option<usize>>, u64> = BTreeMap::new();
        let mut buf = Vec::new();
        for _ in 0..n {
            buf.clear();
            tree.sample(&mut rng, &mut buf);
            *hist.entry(buf.clone()).or_default() += 1;
        }
        let mut chi2 = 0.0;
        let mut cells = 0;
        for (tuple, &p) in &exact {
            let observed = *hist.get(tuple).unwrap_or(&0) as f64;
            if p > 1e-12 {
                let expected = p * n as f64;
                chi2 += (observed - expected).powi(2) / expected;
                cells += 1;
            } else {
                assert_eq!(observed, 0.0, "impossible tuple {tuple:?} sampled");
            }
        }
        // Far beyond the 99.9% quantile for ≤ 15 degrees of freedom (37.7).
        assert!(chi2 < 45.0, "chi2 {chi2} over {cells} cells");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let e = StateEnsemble::from_pure(&SpaceShape::new(vec![2]).unwrap(), &[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let shape = SpaceShape::new(vec![2, 2]).unwrap();
        let pis = BTreeMap::from([(1, ProductVector::basis_state(&shape, &[0, 0]).unwrap())]);
        let lp = build_local_povms(&pis).unwrap();
        assert!(run_protocol(&e, &lp, 10, 0).is_err());
    }
}
