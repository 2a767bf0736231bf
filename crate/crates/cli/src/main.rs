use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualcert::solvers::SolverConfig;
use dualcert_cli::bench::{report, run_bench, write_summary, BenchPlan};
use dualcert_cli::config::{parse_list, pick, pick_opt, KeyValues};
use dualcert_cli::error::{CliError, CliResult};
use dualcert_cli::instance::{generate, multiclass_from_csv, parse_dgf, svm_from_csv, GenSpec, Instance};
use dualcert_cli::run::{resolve_out_dir, run_solver, write_outputs, RunSpec, SolverKind};

/// Certificate-producing first-order solvers for nonsmooth convex problems.
#[derive(Parser)]
#[command(name = "dualcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file, random or from a CSV dataset.
    Generate(GenerateArgs),
    /// Run one solver on an instance and write its trace and summary.
    Solve(SolveArgs),
    /// Run a grid of (instance, solver, m) cells and write a summary table.
    Bench(BenchArgs),
    /// Print a bench summary or a trace as a table.
    Report {
        file: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// mc | psd | svm | multiclass
    app: String,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Number of classes (multiclass).
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "R")]
    radius: Option<f64>,
    /// Entry scale of b (psd).
    #[arg(long)]
    scale: Option<f64>,
    /// power | euclidean (psd).
    #[arg(long)]
    dgf: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read svm or multiclass examples from CSV, label column first.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    /// Target resolution; runs in target mode instead of online mode.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// NERML memory.
    #[arg(long = "m")]
    memory: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override of the ω-diameter.
    #[arg(long)]
    omega: Option<f64>,
    /// Keep running to the budget even when --eps is given.
    #[arg(long)]
    online: bool,
    /// MD with anytime stepsizes.
    #[arg(long)]
    anytime: bool,
    /// Threshold for the spectrahedron oracle input (psd).
    #[arg(long)]
    sparsify: Option<f64>,
    /// key = value file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output file stem; defaults to `<instance>.<solver>`.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// key = value plan file; flags win.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    instance: Vec<PathBuf>,
    /// Comma-separated solver names.
    #[arg(long)]
    solvers: Option<String>,
    /// Comma-separated NERML memory sizes.
    #[arg(long)]
    memory: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn need<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Validation(format!("missing --{what}")))
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let radius = a.radius.unwrap_or(10.0);
    let (inst, seed) = match (a.app.as_str(), &a.csv) {
        ("svm", Some(path)) => (Instance::Svm(svm_from_csv(path, need(a.p, "p")?, need(a.q, "q")?, radius)?), None),
        ("multiclass", Some(path)) => (Instance::Multiclass(multiclass_from_csv(path, a.m, radius)?), None),
        (_, Some(_)) => return Err(CliError::Validation("--csv is only for svm and multiclass".into())),
        (app, None) => {
            let spec = match app {
                "mc" => GenSpec::Mc { p: need(a.p, "p")?, r: need(a.r, "r")?, n: need(a.n, "N")?, d: a.d.unwrap_or(32) },
                "psd" => GenSpec::Psd {
                    p: need(a.p, "p")?,
                    radius: a.radius.unwrap_or(1.0),
                    scale: a.scale.unwrap_or(1.0),
                    dgf: parse_dgf(a.dgf.as_deref().unwrap_or("power"))?,
                },
                "svm" => GenSpec::Svm { n: need(a.n, "N")?, p: need(a.p, "p")?, q: need(a.q, "q")?, radius },
                "multiclass" => GenSpec::Multiclass { n: need(a.n, "N")?, classes: need(a.m, "M")?, q: need(a.q, "q")?, radius },
                other => return Err(CliError::Validation(format!("unknown app {other:?} (mc | psd | svm | multiclass)"))),
            };
            generate(&spec, a.seed)?
        }
    };
    inst.write(&a.out, seed)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

const SOLVE_KEYS: &[&str] = &[
    "solver", "budget", "eps", "gamma", "theta", "memory", "seed", "omega", "online", "anytime", "sparsify", "out_dir", "name",
];

fn cmd_solve(a: SolveArgs) -> CliResult<()> {
    let kv = match &a.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    kv.check_keys(SOLVE_KEYS)?;
    let solver: SolverKind = pick(a.solver, &kv, "solver", "nerml".to_string())?.parse()?;
    let eps = pick_opt(a.eps, &kv, "eps")?;
    let online = a.online || kv.get::<bool>("online")?.unwrap_or(false) || eps.is_none();
    let defaults = SolverConfig::default();
    let config = SolverConfig {
        epsilon: eps,
        budget: pick(a.budget, &kv, "budget", defaults.budget)?,
        gamma: pick(a.gamma, &kv, "gamma", defaults.gamma)?,
        theta: pick(a.theta, &kv, "theta", defaults.theta)?,
        memory: pick(a.memory, &kv, "memory", defaults.memory)?,
        omega: pick_opt(a.omega, &kv, "omega")?,
        lipschitz: None,
        seed: pick(a.seed, &kv, "seed", 0)?,
        online: online && solver != SolverKind::Scg,
        anytime: a.anytime || kv.get::<bool>("anytime")?.unwrap_or(false),
    };
    let sparsify = pick_opt(a.sparsify, &kv, "sparsify")?;
    let (_, inst) = Instance::read(&a.instance)?;
    let problem = inst.build(sparsify)?;
    let out_dir = resolve_out_dir(a.out_dir, kv.get::<String>("out_dir")?.map(PathBuf::from));
    let stem = a.instance.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
    let name = pick(a.name, &kv, "name", format!("{stem}.{solver}"))?;
    match run_solver(&problem, &RunSpec { solver, config }) {
        Ok(out) => {
            let (trace, json) = write_outputs(&out_dir, &name, &out.trace.records, Some(&out.record))?;
            println!(
                "{} {}: {} steps, gap {:.6e}, {:.3}s",
                solver,
                out.status,
                out.record.steps,
                out.record.final_gap,
                out.record.wall_time
            );
            println!("trace {}", trace.display());
            if let Some(j) = json {
                println!("summary {}", j.display());
            }
            Ok(())
        }
        Err((e, partial)) => {
            let (trace, _) = write_outputs(&out_dir, &name, &partial, None)?;
            eprintln!("partial trace ({} rows) in {}", partial.len(), trace.display());
            Err(e)
        }
    }
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let (kv, base) = match &a.plan {
        Some(p) => (KeyValues::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (KeyValues::default(), PathBuf::new()),
    };
    let mut plan = BenchPlan::from_config(&kv, &base)?;
    if !a.instance.is_empty() {
        plan.instances = a.instance;
    }
    if let Some(s) = a.solvers {
        plan.solvers = parse_list::<String>(&s)?.iter().map(|s| s.parse()).collect::<CliResult<_>>()?;
    }
    if let Some(m) = a.memory {
        plan.memories = parse_list(&m)?;
    }
    plan.budget = a.budget.unwrap_or(plan.budget);
    plan.epsilon = a.eps.or(plan.epsilon);
    plan.seed = a.seed.unwrap_or(plan.seed);
    plan.threads = a.threads.or(plan.threads);
    let from_file = kv.raw("out_dir").map(|_| plan.out_dir.clone());
    plan.out_dir = resolve_out_dir(a.out_dir, from_file);
    let results = run_bench(&plan)?;
    let path = write_summary(&plan, &results)?;
    print!("{}", report(&std::fs::read_to_string(&path)?)?);
    println!("summary {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report { file } => std::fs::read_to_string(&file)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", file.display())))
            .and_then(|t| report(&t))
            .map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
