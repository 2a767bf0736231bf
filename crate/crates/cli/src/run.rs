//! One solver run: dispatch, wall clock, trace and summary files.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use dualcert::certificate::{Clock, GapRecord, GapTrace, PrimalPoint, RunRecord};
use dualcert::duality::{duality_gap, dual_eval, FenchelProblem};
use dualcert::solvers::{md_run, mdl_run, nerml_run, scg_run, SolverConfig, Status};

use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "DUALCERT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Md,
    Mdl,
    Nerml,
    Scg,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Md => "md",
            SolverKind::Mdl => "mdl",
            SolverKind::Nerml => "nerml",
            SolverKind::Scg => "scg",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "md" => Ok(SolverKind::Md),
            "mdl" => Ok(SolverKind::Mdl),
            "nerml" => Ok(SolverKind::Nerml),
            "scg" => Ok(SolverKind::Scg),
            _ => Err(CliError::Validation(format!("unknown solver {s:?} (md | mdl | nerml | scg)"))),
        }
    }
}

/// Elapsed wall time; keeps every trace record so a failed run can still be flushed.
pub struct WallClock {
    start: Instant,
    records: RefCell<Vec<GapRecord>>,
}

impl WallClock {
    pub fn start() -> Self {
        WallClock { start: Instant::now(), records: RefCell::new(Vec::new()) }
    }

    pub fn records(&self) -> Vec<GapRecord> {
        self.records.borrow().clone()
    }
}

impl Clock for WallClock {
    fn elapsed_sec(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn observe(&self, record: &GapRecord) {
        self.records.borrow_mut().push(*record);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub solver: SolverKind,
    pub config: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub trace: GapTrace,
    pub status: String,
}

/// Numerical rank: singular values above `1e-9 · σ_max`.
fn rank_of(x: &PrimalPoint) -> usize {
    let sv = x.to_dense().singular_values();
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|s| **s > 1e-9 * top && **s > 0.0).count()
}

/// Runs one solver. On failure the error carries the trace recorded so far.
pub fn run_solver(problem: &FenchelProblem, spec: &RunSpec) -> Result<RunOutcome, (CliError, Vec<GapRecord>)> {
    let clock = WallClock::start();
    let cfg = &spec.config;
    let fail = |e: dualcert::Error, clock: &WallClock| (CliError::Solver(e.to_string()), clock.records());
    let mut params = BTreeMap::new();
    params.insert("budget".to_string(), cfg.budget as f64);
    if let Some(e) = cfg.epsilon {
        params.insert("epsilon".to_string(), e);
    }
    let mut extra = BTreeMap::new();
    let (trace, x_hat, y_hat, steps, status) = match spec.solver {
        SolverKind::Scg => {
            let eps = cfg
                .epsilon
                .ok_or_else(|| (CliError::Validation("scg needs --eps".into()), Vec::new()))?;
            let out = scg_run(problem, eps, cfg.budget, cfg.omega, &clock).map_err(|e| fail(e, &clock))?;
            params.insert("beta".to_string(), out.beta);
            extra.insert("max_lo_delta".to_string(), out.cg.deltas.iter().fold(0.0, |a: f64, b| a.max(*b)));
            let status = if out.reached { "target_reached" } else { "budget_exhausted" };
            let steps = out.cg.values.len();
            (out.trace, Some(out.x), out.y, steps, status)
        }
        kind => {
            cfg.validate().map_err(|e| (CliError::from(e), Vec::new()))?;
            params.insert("gamma".to_string(), cfg.gamma);
            params.insert("online".to_string(), cfg.online as u8 as f64);
            match kind {
                SolverKind::Md => {
                    params.insert("anytime".to_string(), cfg.anytime as u8 as f64);
                }
                SolverKind::Nerml => {
                    params.insert("theta".to_string(), cfg.theta);
                    params.insert("memory".to_string(), cfg.memory as f64);
                }
                _ => {}
            }
            let run = match kind {
                SolverKind::Md => md_run(problem, cfg, &clock),
                SolverKind::Mdl => mdl_run(problem, cfg, &clock),
                _ => nerml_run(problem, cfg, &clock),
            };
            let out = run.map_err(|e| fail(e, &clock))?;
            extra.insert("resolution".to_string(), out.resolution);
            extra.insert("max_lo_delta".to_string(), out.stats.max_delta);
            extra.insert("max_kkt_residual".to_string(), out.stats.max_kkt_residual);
            extra.insert("phases".to_string(), out.phases.len() as f64);
            let status = match out.status {
                Status::TargetReached => "target_reached",
                Status::BudgetExhausted => "budget_exhausted",
                Status::Exact => "exact",
            };
            let steps = out.steps();
            (out.trace, out.x_hat, out.y_hat, steps, status)
        }
    };
    if let Some(om) = cfg.omega {
        params.insert("omega".to_string(), om);
    }
    extra.insert("dual_violation".to_string(), problem.dual_setup.violation(&y_hat));
    if let Ok(f) = dual_eval(problem, &y_hat) {
        extra.insert("dual_value".to_string(), f.value);
    }
    if let Some(x) = &x_hat {
        extra.insert("primal_violation".to_string(), problem.lo.domain.violation(x));
        extra.insert("rank".to_string(), rank_of(x) as f64);
        if let Ok(v) = problem.primal_value(x) {
            extra.insert("primal_value".to_string(), v);
        }
        if let Ok(g) = duality_gap(problem, x, &y_hat) {
            extra.insert("duality_gap".to_string(), g);
        }
    }
    let record = RunRecord {
        solver: spec.solver.name().into(),
        params,
        seed: cfg.seed,
        final_gap: trace.gap(),
        steps,
        wall_time: clock.elapsed_sec(),
        extra,
    };
    Ok(RunOutcome { record, trace, status: status.into() })
}

/// `flag`, else `$DUALCERT_OUT_DIR`, else the config value, else `.`.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(config)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn trace_csv(records: &[GapRecord]) -> String {
    let trace = GapTrace { records: records.to_vec(), ..GapTrace::default() };
    trace.to_csv()
}

/// Writes `<name>.trace.csv` and, when given, `<name>.run.json`.
pub fn write_outputs(dir: &Path, name: &str, records: &[GapRecord], record: Option<&RunRecord>) -> CliResult<(PathBuf, Option<PathBuf>)> {
    fs::create_dir_all(dir)?;
    let trace_path = dir.join(format!("{name}.trace.csv"));
    fs::write(&trace_path, trace_csv(records))?;
    let json_path = match record {
        Some(r) => {
            let p = dir.join(format!("{name}.run.json"));
            let text = serde_json::to_string_pretty(r).map_err(|e| CliError::Solver(e.to_string()))?;
            fs::write(&p, text + "\n")?;
            Some(p)
        }
        None => None,
    };
    Ok((trace_path, json_path))
}
