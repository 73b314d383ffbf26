//! The five subcommands. Each returns a [`Report`] whose `exit_code` follows
//! the shared contract; unmet preconditions surface as errors instead.

use std::collections::BTreeMap;
use std::path::Path;

use locc_usd::discrimination::{
    build_global_povm_from_products, build_local_povms, check_locc, reciprocal_states, verify_povm,
    FeasibilityReport, LoccStatus,
};
use locc_usd::linalg::{fix_phase, DEFAULT_TOL_RANK};
use locc_usd::search::SearchConfig;
use locc_usd::simulate::run_protocol;
use locc_usd::state::{factorize_if_product, StateEnsemble};
use locc_usd::witness::{build_witness, full_support_check, s_tilde_projector, validate_witness};
use locc_usd::Error;

use crate::error::{exit, CliError};
use crate::instance::{matrix_to_pairs, to_pairs, InstanceFile};
use crate::report::{
    CheckResult, CommandResult, ConfigEcho, FeasibilityOut, GlobalPovmOut, LocalPovmOut, PovmResult,
    RateOut, ReciprocalOut, ReciprocalResult, Report, SimulateResult, ToolInfo, WitnessEntry,
    WitnessResult, WitnessStatus,
};

/// Off-diagonal probabilities above this count as POVM violations.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Povm,
    Witness,
    Simulate,
    Reciprocal,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Povm => "povm",
            Command::Witness => "witness",
            Command::Simulate => "simulate",
            Command::Reciprocal => "reciprocal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub search: SearchConfig,
    pub tol_rank: f64,
    pub trials: u64,
    /// Random product states used to validate each witness.
    pub samples: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            tol_rank: DEFAULT_TOL_RANK,
            trials: 100_000,
            samples: 100_000,
        }
    }
}

impl Options {
    pub fn validate(&self) -> Result<(), CliError> {
        self.search
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        if self.tol_rank.is_nan() || self.tol_rank <= 0.0 {
            return Err(CliError::Input(format!("--tol-rank must be positive, got {}", self.tol_rank)));
        }
        if self.trials == 0 {
            return Err(CliError::Input("--trials must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(CliError::Input("--samples must be at least 1".into()));
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            tol_rank: self.tol_rank,
            tol_product: self.search.tol_product,
            tol_detect: self.search.tol_detect,
            restarts: self.search.restarts,
            max_iters: self.search.max_iters,
            seed: self.search.seed,
            trials: self.trials,
            samples: self.samples,
        }
    }
}

/// Loads the instance at `path` and runs `command` on it.
pub fn run_path(command: Command, path: &Path, opts: &Options) -> Result<Report, CliError> {
    let instance = InstanceFile::load(path)?;
    run(command, &instance, opts)
}

pub fn run(command: Command, instance: &InstanceFile, opts: &Options) -> Result<Report, CliError> {
    opts.validate()?;
    let e = instance.to_ensemble()?;
    let (exit_code, result) = match command {
        Command::Check => check(&e, opts)?,
        Command::Povm => povm(&e, opts)?,
        Command::Witness => witness(&e, opts)?,
        Command::Simulate => simulate(&e, opts)?,
        Command::Reciprocal => reciprocal(instance, &e, opts)?,
    };
    Ok(Report {
        tool: ToolInfo::default(),
        command: command.name().to_string(),
        config: opts.echo(),
        instance: instance.clone(),
        exit_code,
        result,
    })
}

fn feasibility_code(all: bool) -> i32 {
    if all {
        exit::SUCCESS
    } else {
        exit::INFEASIBLE
    }
}

fn check_result(report: &FeasibilityReport) -> CheckResult {
    CheckResult {
        all_feasible: report.all_locc(),
        entries: report.entries.iter().map(FeasibilityOut::from).collect(),
    }
}

fn check(e: &StateEnsemble, opts: &Options) -> Result<(i32, CommandResult), CliError> {
    let report = check_locc(e, &opts.search, opts.tol_rank)?;
    Ok((feasibility_code(report.all_locc()), CommandResult::Check(check_result(&report))))
}

fn povm(e: &StateEnsemble, opts: &Options) -> Result<(i32, CommandResult), CliError> {
    let report = check_locc(e, &opts.search, opts.tol_rank)?;
    let mut result = PovmResult {
        feasibility: check_result(&report),
        global: None,
        global_verification: None,
        local: None,
        local_verification: None,
        predicted_rates: Vec::new(),
    };
    if !report.all_locc() {
        return Ok((exit::INFEASIBLE, CommandResult::Povm(result)));
    }
    let certs = report.certificates();
    let global = build_global_povm_from_products(&certs)?;
    let local = build_local_povms(&certs)?;
    result.global_verification = Some(verify_povm(&global, e, VERIFY_TOL)?);
    result.local_verification = Some(verify_povm(&local.effective_global_povm(), e, VERIFY_TOL)?);
    result.predicted_rates = local
        .predicted_rates(e)?
        .into_iter()
        .map(|(mu, rate)| RateOut { mu, rate })
        .collect();
    result.global = Some(GlobalPovmOut::from(&global));
    result.local = Some(LocalPovmOut::from(&local));
    Ok((exit::SUCCESS, CommandResult::Povm(result)))
}

fn witness(e: &StateEnsemble, opts: &Options) -> Result<(i32, CommandResult), CliError> {
    if !full_support_check(e, opts.tol_rank)? {
        return Err(CliError::Precondition(
            "witness undefined for this ensemble: the states do not span the whole space, \
             so the conclusive regions are not subspaces"
                .into(),
        ));
    }
    let mut entries = Vec::with_capacity(e.delta().len());
    for &mu in e.delta() {
        let subspace = s_tilde_projector(e, mu, opts.tol_rank)?;
        let mut entry = WitnessEntry {
            mu,
            status: WitnessStatus::UnconstrainedInfeasible,
            subspace_dim: subspace.dim(),
            gamma: None,
            matrix: None,
            validation: None,
            note: None,
        };
        if subspace.dim() == 0 {
            entry.note = Some("no vector identifies this state unambiguously".into());
            entries.push(entry);
            continue;
        }
        let seed = opts.search.seed.wrapping_add(mu as u64);
        match build_witness(&subspace, &opts.search.with_seed(seed)) {
            Ok(None) => {
                entry.status = WitnessStatus::NoWitness;
                entry.note = Some("product state exists".into());
            }
            Ok(Some(w)) => {
                let validation = validate_witness(&w, opts.samples, seed)?;
                entry.status = if validation.passed() {
                    WitnessStatus::Witness
                } else {
                    WitnessStatus::Rejected
                };
                entry.gamma = Some(w.gamma);
                entry.matrix = Some(matrix_to_pairs(&w.w));
                entry.validation = Some(validation);
            }
            Err(Error::WitnessRejected(msg)) => {
                entry.status = WitnessStatus::Rejected;
                entry.note = Some(msg);
            }
            Err(other) => return Err(other.into()),
        }
        entries.push(entry);
    }
    let all_absent = entries.iter().all(|w| w.status == WitnessStatus::NoWitness);
    Ok((
        feasibility_code(all_absent),
        CommandResult::Witness(WitnessResult {
            full_support: true,
            entries,
        }),
    ))
}

fn simulate(e: &StateEnsemble, opts: &Options) -> Result<(i32, CommandResult), CliError> {
    let report = check_locc(e, &opts.search, opts.tol_rank)?;
    let mut result = SimulateResult {
        feasibility: check_result(&report),
        lambdas: Vec::new(),
        simulation: None,
        unambiguous: None,
        rates_within_5_sigma: None,
    };
    if !report.all_locc() {
        return Ok((exit::INFEASIBLE, CommandResult::Simulate(result)));
    }
    let local = build_local_povms(&report.certificates())?;
    let sim = run_protocol(e, &local, opts.trials, opts.search.seed)?;
    result.lambdas = local.lambdas.clone();
    result.unambiguous = Some(sim.total_wrong() == 0);
    result.rates_within_5_sigma = Some(sim.rates_consistent(5.0));
    result.simulation = Some(sim);
    Ok((exit::SUCCESS, CommandResult::Simulate(result)))
}

fn reciprocal(
    instance: &InstanceFile,
    e: &StateEnsemble,
    opts: &Options,
) -> Result<(i32, CommandResult), CliError> {
    let d = e.shape().total();
    if !instance.all_pure() {
        return Err(CliError::Precondition(
            "reciprocal states need an instance of pure states".into(),
        ));
    }
    if e.len() != d {
        return Err(CliError::Precondition(format!(
            "reciprocal states need as many states as the dimension: {} states, dimension {d}",
            e.len()
        )));
    }
    let vectors = e
        .pure_vectors(opts.tol_rank)
        .ok_or_else(|| CliError::Precondition("reciprocal states need pure states".into()))?;
    let duals = match reciprocal_states(&vectors, opts.tol_rank) {
        Ok(d) => d,
        Err(Error::LinearlyDependent) => {
            return Err(CliError::Precondition(
                "reciprocal states need linearly independent states".into(),
            ))
        }
        Err(other) => return Err(other.into()),
    };
    let factored: BTreeMap<usize, _> = duals
        .into_iter()
        .enumerate()
        .map(|(k, mut v)| {
            fix_phase(&mut v);
            let pv = factorize_if_product(&v, e.shape(), opts.search.tol_product);
            (k + 1, (v, pv))
        })
        .collect();
    let all_product = e.delta().iter().all(|mu| factored[mu].1.is_some());
    let reciprocal = factored
        .iter()
        .map(|(&mu, (v, pv))| ReciprocalOut {
            mu,
            vector: to_pairs(v),
            product: pv.is_some(),
            factors: pv.as_ref().map(|p| p.factors().iter().map(to_pairs).collect()),
        })
        .collect();
    let verdict = if all_product {
        LoccStatus::Feasible
    } else {
        LoccStatus::Infeasible
    };
    Ok((
        feasibility_code(all_product),
        CommandResult::Reciprocal(ReciprocalResult { reciprocal, verdict }),
    ))
}
