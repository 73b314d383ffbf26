//! Machine-readable reports. Every report carries the tool version, the
//! configuration and the instance it was produced from, and nothing that
//! varies between runs (no timestamps, no paths).

use std::fmt::Write as _;

use locc_usd::discrimination::{
    FeasibilityEntry, GlobalPovm, LocalPovmSet, LoccStatus, Method, PovmVerification,
};
use locc_usd::linalg::CMatrix;
use locc_usd::simulate::SimulationReport;
use locc_usd::state::ProductVector;
use locc_usd::witness::WitnessValidation;
use serde::{Deserialize, Serialize};

use crate::instance::{matrix_to_pairs, to_pairs, InstanceFile, Pair};

pub const TOOL_NAME: &str = "locc-usd";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
        }
    }
}

/// Everything that influences the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tol_rank: f64,
    pub tol_product: f64,
    pub tol_detect: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub trials: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub config: ConfigEcho,
    pub instance: InstanceFile,
    pub exit_code: i32,
    pub result: CommandResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandResult {
    Check(CheckResult),
    Povm(PovmResult),
    Witness(WitnessResult),
    Simulate(SimulateResult),
    Reciprocal(ReciprocalResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOut {
    pub vector: Vec<Pair>,
    pub factors: Vec<Vec<Pair>>,
}

impl From<&ProductVector> for ProductOut {
    fn from(pv: &ProductVector) -> Self {
        Self {
            vector: to_pairs(&pv.assemble()),
            factors: pv.factors().iter().map(to_pairs).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOut {
    pub mu: usize,
    pub unconstrained: bool,
    pub locc: LoccStatus,
    pub method: Method,
    pub detect_value: Option<f64>,
    pub membership: Option<f64>,
    pub certificate: Option<ProductOut>,
}

impl From<&FeasibilityEntry> for FeasibilityOut {
    fn from(e: &FeasibilityEntry) -> Self {
        Self {
            mu: e.mu,
            unconstrained: e.unconstrained_feasible,
            locc: e.locc,
            method: e.method,
            detect_value: e.detect_value,
            membership: e.membership,
            certificate: e.certificate.as_ref().map(ProductOut::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub all_feasible: bool,
    pub entries: Vec<FeasibilityOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub mu: usize,
    pub matrix: Vec<Vec<Pair>>,
}

fn labeled(ops: &std::collections::BTreeMap<usize, CMatrix>) -> Vec<LabeledMatrix> {
    ops.iter()
        .map(|(&mu, m)| LabeledMatrix {
            mu,
            matrix: matrix_to_pairs(m),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPovmOut {
    pub lambda: f64,
    pub conclusive: Vec<LabeledMatrix>,
    pub inconclusive: Vec<Vec<Pair>>,
}

impl From<&GlobalPovm> for GlobalPovmOut {
    fn from(g: &GlobalPovm) -> Self {
        Self {
            lambda: g.lambda,
            conclusive: labeled(&g.conclusive),
            inconclusive: matrix_to_pairs(&g.inconclusive),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyPovmOut {
    pub party: usize,
    pub lambda: f64,
    pub conclusive: Vec<LabeledMatrix>,
    pub inconclusive: Vec<Vec<Pair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPovmOut {
    /// `∏_j λ_j⁻¹`.
    pub scale: f64,
    pub parties: Vec<PartyPovmOut>,
}

impl From<&LocalPovmSet> for LocalPovmOut {
    fn from(lp: &LocalPovmSet) -> Self {
        Self {
            scale: lp.scale(),
            parties: lp
                .parties
                .iter()
                .zip(&lp.lambdas)
                .enumerate()
                .map(|(j, (p, &lambda))| PartyPovmOut {
                    party: j + 1,
                    lambda,
                    conclusive: labeled(&p.conclusive),
                    inconclusive: matrix_to_pairs(&p.inconclusive),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOut {
    pub mu: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmResult {
    pub feasibility: CheckResult,
    /// Absent when some state is not certified.
    pub global: Option<GlobalPovmOut>,
    pub global_verification: Option<PovmVerification>,
    pub local: Option<LocalPovmOut>,
    /// The local protocol as one global measurement, checked like `global`.
    pub local_verification: Option<PovmVerification>,
    pub predicted_rates: Vec<RateOut>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessStatus {
    /// A product vector lies in the subspace.
    NoWitness,
    Witness,
    /// The subspace is `{0}`: the state cannot be identified even globally.
    UnconstrainedInfeasible,
    /// The witness failed its independent re-check.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub mu: usize,
    pub status: WitnessStatus,
    pub subspace_dim: usize,
    pub gamma: Option<f64>,
    pub matrix: Option<Vec<Vec<Pair>>>,
    pub validation: Option<WitnessValidation>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub full_support: bool,
    pub entries: Vec<WitnessEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResult {
    pub feasibility: CheckResult,
    pub lambdas: Vec<f64>,
    pub simulation: Option<SimulationReport>,
    /// No conclusive outcome was ever wrong.
    pub unambiguous: Option<bool>,
    pub rates_within_5_sigma: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalOut {
    pub mu: usize,
    pub vector: Vec<Pair>,
    pub product: bool,
    pub factors: Option<Vec<Vec<Pair>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalResult {
    pub reciprocal: Vec<ReciprocalOut>,
    /// Feasible exactly when every reciprocal state is a product.
    pub verdict: LoccStatus,
}

fn status_word(s: LoccStatus) -> &'static str {
    match s {
        LoccStatus::Feasible => "feasible",
        LoccStatus::Infeasible => "infeasible",
        LoccStatus::Undetermined => "undetermined",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.9}"))
}

fn check_lines(out: &mut String, c: &CheckResult) {
    for e in &c.entries {
        let _ = writeln!(
            out,
            "  mu={} unconstrained={} locc={} method={:?} detect={}",
            e.mu,
            e.unconstrained,
            status_word(e.locc),
            e.method,
            opt(e.detect_value)
        );
    }
    let _ = writeln!(out, "  all feasible: {}", c.all_feasible);
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// A short human-readable summary; the JSON form is the complete record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "{} {} {}", self.tool.name, self.tool.version, self.command);
        let _ = writeln!(
            out,
            "dims {:?}, {} states, seed {}, tol_rank {:e}, tol_product {:e}, tol_detect {:e}",
            self.instance.dims,
            self.instance.states.len(),
            c.seed,
            c.tol_rank,
            c.tol_product,
            c.tol_detect
        );
        match &self.result {
            CommandResult::Check(r) => check_lines(&mut out, r),
            CommandResult::Povm(r) => {
                check_lines(&mut out, &r.feasibility);
                match (&r.global, &r.local) {
                    (Some(g), Some(l)) => {
                        let _ = writeln!(out, "  global lambda = {:.9}", g.lambda);
                        for p in &l.parties {
                            let _ = writeln!(out, "  party {} lambda = {:.9}", p.party, p.lambda);
                        }
                        for rate in &r.predicted_rates {
                            let _ = writeln!(out, "  p({}|rho_{}) = {:.9}", rate.mu, rate.mu, rate.rate);
                        }
                        for (name, v) in [("global", &r.global_verification), ("local", &r.local_verification)] {
                            if let Some(v) = v {
                                let _ = writeln!(
                                    out,
                                    "  {name} verification: {} (max off-diagonal {:e})",
                                    if v.ok() { "ok" } else { "FAILED" },
                                    v.max_off_diagonal()
                                );
                            }
                        }
                    }
                    _ => {
                        let _ = writeln!(out, "  no POVM: some state is not certified");
                    }
                }
            }
            CommandResult::Witness(r) => {
                let _ = writeln!(out, "  full support: {}", r.full_support);
                for e in &r.entries {
                    let _ = write!(out, "  mu={} {:?}", e.mu, e.status);
                    if let Some(g) = e.gamma {
                        let _ = write!(out, " gamma={g:.9}");
                    }
                    if let Some(v) = &e.validation {
                        let _ = write!(
                            out,
                            " detected={:.9} violations={}/{}",
                            v.detected_value, v.violations, v.samples
                        );
                    }
                    if let Some(n) = &e.note {
                        let _ = write!(out, " ({n})");
                    }
                    out.push('\n');
                }
            }
            CommandResult::Simulate(r) => {
                check_lines(&mut out, &r.feasibility);
                if let Some(sim) = &r.simulation {
                    let _ = writeln!(out, "  trials {} seed {}", sim.trials, sim.seed);
                    for s in &sim.per_state {
                        let _ = writeln!(
                            out,
                            "  mu={} prepared={} correct={} wrong={} inconclusive={} rate={:.6} predicted={}",
                            s.mu,
                            s.prepared,
                            s.conclusive_correct,
                            s.conclusive_wrong,
                            s.inconclusive,
                            s.empirical_rate,
                            opt(s.predicted_rate)
                        );
                    }
                    let _ = writeln!(
                        out,
                        "  unambiguous: {}, rates within 5 sigma: {}",
                        r.unambiguous.unwrap_or(false),
                        r.rates_within_5_sigma.unwrap_or(false)
                    );
                }
            }
            CommandResult::Reciprocal(r) => {
                for e in &r.reciprocal {
                    let _ = writeln!(out, "  mu={} product={}", e.mu, e.product);
                }
                let _ = writeln!(out, "  verdict: {}", status_word(r.verdict));
            }
        }
        let _ = writeln!(out, "exit code {}", self.exit_code);
        out
    }
}
