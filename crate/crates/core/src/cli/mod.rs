//! Command-line front end: spec parsing, pipeline orchestration and outputs.

mod output;
mod spec;

pub use output::{
    allocation_csv, buyout_csv, commit, ic_csv, to_json, AllocationRow, AssumptionFlags, Summary, Versions,
};
pub use spec::{IcSpec, McSpec, MechanismSpec, ModelSpec, NoiseSpec, PriorSpec, SignalSpec};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assumptions::{check_model, AssumptionReport, Lattice};
use crate::contracts::{build_menu, revenue, ContractSchedule};
use crate::error::Error;
use crate::model::Model;
use crate::simulate::{buyout_chi_square, simulate_menu};
use crate::solver::{first_best, profit, refined_grid, social_surplus, solve_allocation, DEFAULT_TOL};
use crate::verify::verify_global_ic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_ASSUMPTIONS: i32 = 3;
pub const EXIT_IC: i32 = 4;
pub const EXIT_OUTPUT: i32 = 5;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CONTRACT_FORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "contract-forge", version, about = "Optimal try-and-decide contract menus")]
pub struct Cli {
    /// Model spec (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Continue past failed assumption checks.
    #[arg(long, global = true)]
    pub force: bool,
    /// Overrides the spec's output_dir.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Assumption checks only.
    Check,
    /// Solve the allocation and build the menu.
    Solve,
    /// Solve, then verify global incentive compatibility.
    Verify,
    /// Solve, verify and simulate.
    Simulate,
    /// Verify the envelope implementation of the first-stage rule in a mechanism file.
    Audit { mechanism: PathBuf },
    /// The full pipeline (default).
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::Audit { .. } => "audit",
            Command::All => "all",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Command::Check => 0,
            Command::Solve => 1,
            Command::Verify => 2,
            Command::Simulate | Command::All => 3,
            Command::Audit { .. } => 0,
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. } => EXIT_SPEC,
            Error::AssumptionsFailed(_) => EXIT_ASSUMPTIONS,
            Error::MenuInvariant { .. } => EXIT_IC,
            Error::Output { .. } => EXIT_OUTPUT,
            _ => EXIT_INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

/// Parses `args` (program name first), runs and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            EXIT_SPEC,
            format!("{THREADS_ENV} must be a positive integer, got {raw:?}"),
        )
    })?;
    // A pool may already exist when running in-process more than once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn assumption_flags(report: &AssumptionReport, forced: bool) -> AssumptionFlags {
    AssumptionFlags {
        rotation_ok: report.rotation_ok,
        a1_ok: report.a1_ok,
        a1_route: report.a1_route.map(|r| {
            serde_json::to_value(r)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        }),
        a2_ok: report.a2_ok,
        remark3_ok: report.remark3_ok,
        certified: report.certified(),
        forced,
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let command = cli.command.clone().unwrap_or(Command::All);
    let spec_path = cli
        .spec
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_SPEC, "missing --spec <path>"))?;
    let spec =
        ModelSpec::load(spec_path).map_err(|e| Failure::new(EXIT_SPEC, format!("{}: {e}", spec_path.display())))?;
    configure_threads()?;
    let model = spec.build_model().map_err(|e| Failure::new(EXIT_SPEC, e.to_string()))?;
    let out_dir = cli.output_dir.clone().unwrap_or_else(|| spec.output_dir.clone());

    let report = check_model(&model, &Lattice::default(), spec.grid.n_v1);
    if !report.certified() {
        eprintln!("assumption checks failed: {}", report.failures().join(", "));
        for w in report.witnesses.iter().take(5) {
            if w.q1.is_nan() {
                eprintln!("  {}: {}", w.check, w.detail);
            } else {
                eprintln!("  {} at q1 = {}, v2 = {}: {}", w.check, w.q1, w.v2, w.detail);
            }
        }
        if !cli.force {
            return Err(Failure::new(EXIT_ASSUMPTIONS, "rerun with --force to continue anyway"));
        }
    }
    let mut summary = Summary {
        subcommand: command.name().into(),
        prior: model.prior().name(),
        signal: model.signal().name(),
        tilde_v1: None,
        v1_star: model.v1_star(),
        q1_at_tilde_plus: None,
        possibly_non_unique: None,
        revenue_quadrature: None,
        social_surplus: None,
        revenue_mc: None,
        revenue_mc_se: None,
        simulation: None,
        buyout_chi_square_p: None,
        mechanism: None,
        q1_monotone: None,
        min_delta: None,
        argmin: None,
        ic_tol: None,
        pass: None,
        second_stage_ok: None,
        envelope_max_err: None,
        assumptions: assumption_flags(&report, cli.force && !report.certified()),
        seed: spec.mc.seed,
        versions: Versions::default(),
    };

    if let Command::Audit { mechanism } = &command {
        return audit(&spec, &model, mechanism, summary, &out_dir);
    }

    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut code = if report.certified() { EXIT_OK } else { EXIT_ASSUMPTIONS };
    if command.rank() >= 1 {
        let mut alloc = solve_allocation(&model, &spec.grid, DEFAULT_TOL)?;
        alloc.set_possibly_non_unique(!report.remark3_ok);
        let fb = first_best(&model, &alloc, &spec.grid, DEFAULT_TOL)?;
        let schedule = ContractSchedule::optimal(&model, &alloc)?;
        let menu = build_menu(&schedule)?;
        summary.tilde_v1 = Some(alloc.tilde_v1());
        summary.q1_at_tilde_plus = Some(alloc.q1_at_tilde_plus());
        summary.possibly_non_unique = Some(alloc.possibly_non_unique());
        summary.revenue_quadrature = Some(revenue(&schedule)?);
        summary.social_surplus = Some(social_surplus(&model, &fb)?);

        let rows = alloc
            .v1_grid()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let q = alloc.q1_star()[i];
                Ok(AllocationRow {
                    v1: v,
                    q1_star: q,
                    p1_star: schedule.p1(v)?,
                    p2_star: schedule.p2(v),
                    q1_fb: fb.q1_fb()[i],
                    utility: schedule.utility(v),
                    expected_payment: schedule.expected_payment(v)?,
                    profit: profit(&model, q, v)?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        files.push(("allocation.csv", allocation_csv(&rows)));
        println!(
            "cutoff {:.10}, trial at cutoff {:.6}, revenue {:.10}",
            alloc.tilde_v1(),
            alloc.q1_at_tilde_plus(),
            summary.revenue_quadrature.unwrap_or(f64::NAN)
        );

        if command.rank() >= 2 {
            let ic = verify_global_ic(&schedule, spec.ic.lattice_n, spec.ic.tol)?;
            summary.min_delta = Some(ic.min_delta);
            summary.argmin = Some(ic.argmin);
            summary.ic_tol = Some(ic.ic_tol);
            summary.pass = Some(ic.pass);
            summary.second_stage_ok = Some(ic.second_stage_ok);
            summary.envelope_max_err = Some(ic.envelope_max_err);
            files.push(("ic.csv", ic_csv(&ic)));
            println!(
                "min delta {:.3e} at {:?} (tolerance {:.3e})",
                ic.min_delta, ic.argmin, ic.ic_tol
            );
            if !(ic.pass && ic.second_stage_ok) {
                eprintln!(
                    "incentive compatibility fails: type {} gains {:.6e} by reporting {}",
                    ic.argmin.0, -ic.min_delta, ic.argmin.1
                );
                code = EXIT_IC;
            }
        }

        if command.rank() >= 3 {
            let sim = simulate_menu(&model, &menu, spec.mc.n_draws, spec.mc.seed)?;
            let chi = buyout_chi_square(&sim.buyout);
            summary.revenue_mc = Some(sim.result.revenue_mean);
            summary.revenue_mc_se = Some(sim.result.revenue_se);
            summary.buyout_chi_square_p = Some(chi.p_value);
            println!(
                "simulated revenue {:.6} ± {:.6} over {} draws",
                sim.result.revenue_mean, sim.result.revenue_se, sim.result.n_draws
            );
            summary.simulation = Some(sim.result);
            files.push(("buyout.csv", buyout_csv(&sim.buyout)));
        }
    }
    if code == EXIT_ASSUMPTIONS {
        // Forced past failed checks: outputs are written but the run is not clean.
        eprintln!("outputs produced under --force");
    }
    files.push(("summary.json", to_json(&summary)));
    commit(&out_dir, &files)?;
    Ok(code)
}

fn audit(
    spec: &ModelSpec,
    model: &Model,
    mechanism: &Path,
    mut summary: Summary,
    out_dir: &Path,
) -> Result<i32, Failure> {
    let mech =
        MechanismSpec::load(mechanism).map_err(|e| Failure::new(EXIT_SPEC, format!("{}: {e}", mechanism.display())))?;
    let rule = mech
        .build_rule(model)
        .map_err(|e| Failure::new(EXIT_SPEC, e.to_string()))?;
    let grid = refined_grid(&spec.grid, rule.cutoff());
    let monotone = grid.windows(2).all(|w| rule.q1(w[1]) >= rule.q1(w[0]));
    summary.mechanism = Some(rule.name());
    let schedule = ContractSchedule::new(model, rule, &grid)?;
    let ic = verify_global_ic(&schedule, spec.ic.lattice_n, spec.ic.tol)?;

    summary.tilde_v1 = Some(schedule.cutoff());
    summary.revenue_quadrature = Some(revenue(&schedule)?);
    summary.q1_monotone = Some(monotone);
    summary.min_delta = Some(ic.min_delta);
    summary.argmin = Some(ic.argmin);
    summary.ic_tol = Some(ic.ic_tol);
    summary.pass = Some(ic.pass);
    summary.second_stage_ok = Some(ic.second_stage_ok);
    summary.envelope_max_err = Some(ic.envelope_max_err);
    commit(out_dir, &[("ic.csv", ic_csv(&ic)), ("summary.json", to_json(&summary))])?;

    println!(
        "first-stage rule {} is {}monotone",
        schedule.rule().name(),
        if monotone { "" } else { "not " }
    );
    if ic.pass && ic.second_stage_ok && monotone {
        println!(
            "globally incentive compatible on the lattice (min delta {:.3e})",
            ic.min_delta
        );
        return Ok(EXIT_OK);
    }
    if !ic.pass {
        eprintln!(
            "incentive compatibility fails: type {} gains {:.6e} by reporting {}",
            ic.argmin.0, -ic.min_delta, ic.argmin.1
        );
    }
    Ok(EXIT_IC)
}
