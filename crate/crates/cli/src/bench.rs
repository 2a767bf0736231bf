//! Step-budget benchmarks: each (instance, solver, m) cell runs in online
//! mode and reports the progress ratios `Gap₁/Gap_k` at fixed checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dualcert::certificate::GapRecord;
use dualcert::solvers::SolverConfig;
use rayon::prelude::*;

use crate::config::KeyValues;
use crate::error::{CliError, CliResult};
use crate::instance::Instance;
use crate::run::{run_solver, write_outputs, RunSpec, SolverKind};

pub const CHECKPOINTS: [usize; 2] = [32, 128];

pub const SUMMARY_HEADER: &str = "instance,solver,m,steps,gap_1,gap_32,gap_128,gap_budget,\
gap1_over_gap32,gap1_over_gap128,gap1_over_gap_budget,wall_sec,status";

/// Shown on top of every report.
pub const REPORT_NOTE: &str = "Progress ratios compare equal step counts, not equal wall time; \
wall time is listed for reference only.";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub instances: Vec<PathBuf>,
    pub solvers: Vec<SolverKind>,
    /// NERML memory sizes; other solvers run once per instance.
    pub memories: Vec<usize>,
    pub budget: usize,
    /// Target for scg; ignored by the online solvers.
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl BenchPlan {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Validation(m.into()));
        if self.instances.is_empty() {
            return bad("bench plan lists no instances");
        }
        if self.solvers.is_empty() {
            return bad("bench plan lists no solvers");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.memories.is_empty() || self.memories.contains(&0) {
            return bad("memory sizes must be positive");
        }
        if self.solvers.contains(&SolverKind::Scg) && !self.epsilon.map_or(false, |e| e > 0.0) {
            return bad("scg cells need a positive eps");
        }
        Ok(())
    }

    /// Plan keys: `instances`, `solvers`, `memory` (lists), `budget`, `eps`, `seed`, `out_dir`, `threads`.
    pub fn from_config(kv: &KeyValues, base: &Path) -> CliResult<Self> {
        kv.check_keys(&["instances", "solvers", "memory", "budget", "eps", "seed", "out_dir", "threads"])?;
        let instances = kv
            .list::<String>("instances")?
            .unwrap_or_default()
            .into_iter()
            .map(|s| base.join(s))
            .collect();
        let solvers = match kv.raw("solvers") {
            Some(v) => crate::config::parse_list::<String>(v)?
                .iter()
                .map(|s| s.parse())
                .collect::<CliResult<_>>()?,
            None => vec![SolverKind::Nerml],
        };
        Ok(BenchPlan {
            instances,
            solvers,
            memories: kv.list("memory")?.unwrap_or_else(|| vec![1]),
            budget: kv.get("budget")?.unwrap_or(512),
            epsilon: kv.get("eps")?,
            seed: kv.get("seed")?.unwrap_or(0),
            out_dir: kv.get::<String>("out_dir")?.map(|s| base.join(s)).unwrap_or_else(|| PathBuf::from(".")),
            threads: kv.get("threads")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub instance: PathBuf,
    pub solver: SolverKind,
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub steps: usize,
    pub gap_1: f64,
    pub gap_32: f64,
    pub gap_128: f64,
    pub gap_budget: f64,
    pub wall_sec: f64,
    pub status: String,
}

impl CellResult {
    pub fn ratio(&self, k: f64) -> f64 {
        self.gap_1 / k
    }
}

pub fn cells(plan: &BenchPlan) -> Vec<Cell> {
    let mut out = Vec::new();
    for inst in &plan.instances {
        for &solver in &plan.solvers {
            if solver == SolverKind::Nerml {
                for &m in &plan.memories {
                    out.push(Cell { instance: inst.clone(), solver, memory: Some(m) });
                }
            } else {
                out.push(Cell { instance: inst.clone(), solver, memory: None });
            }
        }
    }
    out
}

/// Gap after `step` steps (the last record when the trace is shorter).
pub fn gap_at(records: &[GapRecord], step: usize) -> f64 {
    match records.iter().rev().find(|r| r.step <= step) {
        Some(r) => r.gap,
        None => f64::NAN,
    }
}

fn cell_name(cell: &Cell) -> String {
    let stem = cell.instance.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    match cell.memory {
        Some(m) => format!("{stem}.{}.m{m}", cell.solver),
        None => format!("{stem}.{}", cell.solver),
    }
}

fn run_cell(plan: &BenchPlan, cell: &Cell) -> CellResult {
    let failed = |status: String| CellResult {
        cell: cell.clone(),
        steps: 0,
        gap_1: f64::NAN,
        gap_32: f64::NAN,
        gap_128: f64::NAN,
        gap_budget: f64::NAN,
        wall_sec: 0.0,
        status,
    };
    let problem = match Instance::read(&cell.instance).and_then(|(_, i)| i.build(None)) {
        Ok(p) => p,
        Err(e) => return failed(format!("error: {e}")),
    };
    let config = SolverConfig {
        epsilon: plan.epsilon,
        budget: plan.budget,
        memory: cell.memory.unwrap_or(1),
        seed: plan.seed,
        online: cell.solver != SolverKind::Scg,
        ..SolverConfig::default()
    };
    let spec = RunSpec { solver: cell.solver, config };
    let name = cell_name(cell);
    let trace_dir = plan.out_dir.join("traces");
    match run_solver(&problem, &spec) {
        Ok(out) => {
            let recs = &out.trace.records;
            let _ = write_outputs(&trace_dir, &name, recs, Some(&out.record));
            CellResult {
                cell: cell.clone(),
                steps: recs.len(),
                gap_1: gap_at(recs, 1),
                gap_32: gap_at(recs, CHECKPOINTS[0]),
                gap_128: gap_at(recs, CHECKPOINTS[1]),
                gap_budget: gap_at(recs, plan.budget),
                wall_sec: out.record.wall_time,
                status: out.status,
            }
        }
        Err((e, partial)) => {
            let _ = write_outputs(&trace_dir, &name, &partial, None);
            failed(format!("error: {e}"))
        }
    }
}

/// Runs every cell in a worker pool; failures are recorded in the status column.
pub fn run_bench(plan: &BenchPlan) -> CliResult<Vec<CellResult>> {
    plan.validate()?;
    let cells = cells(plan);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = plan.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(plan, c)).collect()))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

pub fn summary_csv(results: &[CellResult]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell.instance.display().to_string().replace(',', "_"),
            r.cell.solver,
            r.cell.memory.map(|m| m.to_string()).unwrap_or_default(),
            r.steps,
            num(r.gap_1),
            num(r.gap_32),
            num(r.gap_128),
            num(r.gap_budget),
            num(r.ratio(r.gap_32)),
            num(r.ratio(r.gap_128)),
            num(r.ratio(r.gap_budget)),
            num(r.wall_sec),
            r.status.replace(',', ";"),
        );
    }
    s
}

pub fn write_summary(plan: &BenchPlan, results: &[CellResult]) -> CliResult<PathBuf> {
    fs::create_dir_all(&plan.out_dir)?;
    let path = plan.out_dir.join("bench.csv");
    fs::write(&path, summary_csv(results))?;
    Ok(path)
}

/// Human-readable table of a bench summary or a single trace CSV.
pub fn report(text: &str) -> CliResult<String> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    let mut out = String::new();
    if header == dualcert::certificate::GapTrace::CSV_HEADER {
        let recs = dualcert::certificate::GapTrace::from_csv(text)?;
        let last = recs.last().ok_or_else(|| CliError::Validation("empty trace".into()))?;
        let _ = writeln!(out, "{REPORT_NOTE}\n");
        let _ = writeln!(out, "{:>8} {:>14} {:>14}", "step", "gap", "gap1/gap");
        let g1 = gap_at(&recs, 1);
        for k in [1, CHECKPOINTS[0], CHECKPOINTS[1], last.step] {
            if k <= last.step {
                let g = gap_at(&recs, k);
                let _ = writeln!(out, "{k:>8} {g:>14.6e} {:>14.4}", g1 / g);
            }
        }
        return Ok(out);
    }
    if header != SUMMARY_HEADER {
        return Err(CliError::Validation("not a bench summary or trace CSV".into()));
    }
    let _ = writeln!(out, "{REPORT_NOTE}\n");
    let _ = writeln!(
        out,
        "{:<24} {:<6} {:>4} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9} {:<}",
        "instance", "solver", "m", "steps", "Gap_1", "G1/G32", "G1/G128", "G1/Gbudget", "wall_s", "status"
    );
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(CliError::Validation(format!("bench row {} has {} fields", k + 2, f.len())));
        }
        let p = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
        let name = Path::new(f[0]).file_name().and_then(|s| s.to_str()).unwrap_or(f[0]);
        let _ = writeln!(
            out,
            "{:<24} {:<6} {:>4} {:>6} {:>12.4e} {:>12.4} {:>12.4} {:>12.4} {:>9.3} {}",
            name,
            f[1],
            f[2],
            f[3],
            p(f[4]),
            p(f[8]),
            p(f[9]),
            p(f[10]),
            p(f[11]),
            f[12]
        );
    }
    Ok(out)
}
