use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use clausecut::formula::{write_cnfopt, write_dimacs_cnf};
use clausecut::harness::{
    generate_instance, load_instance, run_benchmark, random_satisfiable_3cnf, BenchConfig,
    RecordStatus,
};
use clausecut::separation::write_cut_log;
use clausecut::solver::{solve_with_config, SolveStatus, SolverConfig};
use clausecut::{CutLoopLimits, SeparationMode};
use log::{info, warn};

#[derive(Debug, Parser)]
#[command(name = "clausecut", version, about = "CNF-constrained 0-1 optimization with SAT-separated clause cuts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LimitArgs {
    /// Stop the root cut loop after this many cuts
    #[arg(long, default_value_t = 150)]
    max_cuts: usize,
    /// Stop the root cut loop after this many seconds
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    /// Re-solve the cut loop LP from the previous basis
    #[arg(long)]
    warm_start: bool,
}

impl LimitArgs {
    fn limits(&self) -> CutLoopLimits {
        CutLoopLimits {
            max_cuts: self.max_cuts,
            time_budget: Duration::from_secs_f64(self.time_budget),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one .cnf/.cnfopt/.wcnf instance and print a JSON record
    Solve {
        file: PathBuf,
        #[arg(long, default_value = "lcca")]
        mode: SeparationMode,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Count branch-and-bound nodes whose integral part is SAT-feasible
        #[arg(long)]
        probe_nodes: bool,
        /// Include the per-cut log in the record
        #[arg(long)]
        cut_log: bool,
    },
    /// Attach a random objective to a CNF and write it as CNFOPT
    Gen {
        cnf: PathBuf,
        #[arg(long, default_value_t = 10)]
        weight_range: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write satisfiable uniform random 3-CNFs (uf-style) to a directory
    Random {
        #[arg(long, default_value_t = 50)]
        vars: u32,
        #[arg(long, default_value_t = 218)]
        clauses: usize,
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve every instance under each mode and write the CSV outputs
    Bench {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "none,icca,lcca")]
        modes: Vec<SeparationMode>,
        #[arg(long, default_value_t = 10)]
        weight_range: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Per-instance wall-clock limit in seconds
        #[arg(long, default_value_t = 7200.0)]
        timeout: f64,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        no_probe_nodes: bool,
    },
}

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INTERNAL: u8 = 3;

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INTERNAL)
}

fn instance_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            file,
            mode,
            limits,
            seed,
            probe_nodes,
            cut_log,
        } => {
            let inst = match load_instance(&file) {
                Ok(i) => i,
                Err(e) => return fail(e),
            };
            let cfg = SolverConfig {
                mode,
                limits: limits.limits(),
                seed,
                probe_nodes,
                warm_start: limits.warm_start,
                ..SolverConfig::default()
            };
            let out = match solve_with_config(&inst, &cfg) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let log = cut_log.then(|| write_cut_log(out.cuts.iter().map(|e| &e.cut)));
            let mut v = out.to_json(log.as_deref());
            let obj = v.as_object_mut().expect("record is an object");
            obj.insert("instance".into(), instance_name(&file).into());
            obj.insert("mode".into(), mode.as_str().into());
            obj.insert("seed".into(), seed.into());
            let model: Option<Vec<i64>> = out
                .model
                .as_ref()
                .map(|m| m.literals().iter().map(|l| l.to_dimacs()).collect());
            obj.insert("model".into(), serde_json::to_value(model).unwrap());
            println!("{v}");
            match out.status {
                SolveStatus::Optimal => ExitCode::SUCCESS,
                SolveStatus::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
                SolveStatus::TimedOut => ExitCode::from(EXIT_INTERNAL),
            }
        }
        Command::Gen {
            cnf,
            weight_range,
            seed,
            output,
        } => {
            let inst = match load_instance(&cnf) {
                Ok(i) => i,
                Err(e) => return fail(e),
            };
            let p = generate_instance(inst.formula(), weight_range, seed);
            if let Err(e) = fs::write(&output, write_cnfopt(&p)) {
                return fail(format!("{}: {e}", output.display()));
            }
            info!("wrote {}", output.display());
            ExitCode::SUCCESS
        }
        Command::Random {
            vars,
            clauses,
            count,
            seed,
            output,
        } => {
            if vars < 3 {
                return fail("need at least 3 variables");
            }
            if let Err(e) = fs::create_dir_all(&output) {
                return fail(format!("{}: {e}", output.display()));
            }
            for i in 0..count {
                let f = random_satisfiable_3cnf(vars, clauses, seed + i);
                let path = output.join(format!("uf{vars}-{clauses}-{:03}.cnf", i + 1));
                if let Err(e) = fs::write(&path, write_dimacs_cnf(&f)) {
                    return fail(format!("{}: {e}", path.display()));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Bench {
            inputs,
            modes,
            weight_range,
            seed,
            output,
            jobs,
            timeout,
            limits,
            no_probe_nodes,
        } => {
            let cfg = BenchConfig {
                inputs,
                modes,
                weight_range,
                seed,
                limits: limits.limits(),
                probe_nodes: !no_probe_nodes,
                output_dir: Some(output),
                jobs,
                timeout: Duration::from_secs_f64(timeout),
                warm_start: limits.warm_start,
            };
            let report = match run_benchmark(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for r in &report.records {
                println!("{}", serde_json::to_string(r).expect("record serializes"));
            }
            let failed = report
                .records
                .iter()
                .filter(|r| r.status == RecordStatus::Failed)
                .count();
            if failed > 0 {
                warn!("{failed} of {} runs failed", report.records.len());
            }
            for f in &report.files {
                info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
    }
}
