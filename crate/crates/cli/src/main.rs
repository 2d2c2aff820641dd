use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use effv_cli::bench;
use effv_cli::config::Config;
use effv_cli::oracle::{self, OracleConfig};
use effv_cli::pipeline;
use effv_cli::{CliError, Exit};
use effv_core::interp::{Interp, RunError, Store, Value};
use effv_core::ir::print_program;
use effv_core::smt::Status;
use effv_core::surface::{parse_expr, Expr};
use effv_core::vcgen::print_vc;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "effv", version, about = "Verifier and interpreter for programs with effect handlers")]
struct Cli {
    /// Settings file with `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct SolverOpts {
    /// Solver name: z3, cvc5, cvc4 or alt-ergo.
    #[arg(long = "smt-solver", value_name = "NAME")]
    solver: Option<String>,
    #[arg(long, value_name = "PATH")]
    solver_path: Option<PathBuf>,
    /// Per-VC time limit in seconds.
    #[arg(long, value_name = "SECS")]
    timeout: Option<u64>,
    /// Parallel solver processes.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and type-check.
    Check { file: PathBuf },
    /// Print the translated program.
    Translate { file: PathBuf },
    /// Print the verification conditions.
    Vc {
        file: PathBuf,
        #[arg(long)]
        emit_ir: bool,
    },
    /// Discharge every verification condition; exits 0 only if all are valid.
    Prove {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long)]
        emit_ir: bool,
        #[arg(long)]
        emit_vcs: bool,
        /// Write one SMT-LIB script per VC into DIR.
        #[arg(long, value_name = "DIR")]
        dump_smt: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report_json: Option<PathBuf>,
    },
    /// Run a function under the interpreter.
    Run {
        file: PathBuf,
        entry: String,
        /// Arguments as source expressions.
        args: Vec<String>,
        /// Check protocols and contracts while running.
        #[arg(long)]
        check: bool,
        /// Report the effects escaping the entry instead of failing on them.
        #[arg(long, conflicts_with = "check")]
        enumerate: bool,
        #[arg(long, value_name = "STEPS")]
        fuel: Option<u64>,
        /// Initial value of a state variable, `x=expr`; repeatable.
        #[arg(long = "set", value_name = "X=EXPR")]
        sets: Vec<String>,
        #[arg(long, value_name = "FILE")]
        trace_json: Option<PathBuf>,
    },
    /// Run effect-free functions on random inputs under contract checking.
    Oracle {
        file: PathBuf,
        /// Functions to test; defaults to every effect-free one.
        #[arg(long = "entry", value_name = "NAME")]
        entries: Vec<String>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        report_json: Option<PathBuf>,
    },
    /// Prove every file of a corpus directory and tabulate the results.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long, value_name = "FILE")]
        report_json: Option<PathBuf>,
    },
}

type CliResult = Result<Exit, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage as u8 } else { Exit::Ok as u8 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("effv: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(path, s + "\n").map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn config(cli_path: &Option<PathBuf>, o: &SolverOpts) -> Result<Config, CliError> {
    let mut c = match cli_path {
        Some(p) => Config::load(p).map_err(|e| CliError::usage(format!("{e:#}")))?,
        None => Config::default(),
    }
    .with_env();
    if let Some(s) = &o.solver {
        if !["z3", "cvc5", "cvc4", "alt-ergo"].contains(&s.as_str()) {
            return Err(CliError::usage(format!("unknown solver `{s}`")));
        }
        if o.solver_path.is_none() && *s != c.solver {
            c.solver_path = None;
        }
        c.solver = s.clone();
    }
    if let Some(p) = &o.solver_path {
        c.solver_path = Some(p.clone());
    }
    if let Some(t) = o.timeout {
        c.timeout_secs = t;
    }
    if let Some(j) = o.jobs {
        c.jobs = j;
    }
    if c.timeout_secs == 0 || c.jobs == 0 {
        return Err(CliError::usage("timeout and jobs must be positive"));
    }
    Ok(c)
}

fn dispatch(cli: Cli) -> CliResult {
    let out = &mut std::io::stdout().lock();
    let w = |out: &mut dyn Write, s: &str| -> Result<(), CliError> {
        out.write_all(s.as_bytes()).map_err(|e| CliError::internal(e.to_string()))
    };
    match cli.cmd {
        Cmd::Check { file } => {
            let tp = pipeline::check(&read(&file)?)?;
            let g = &tp.globals;
            w(
                out,
                &format!(
                    "ok: {} functions, {} effects, {} protocols, {} state variables\n",
                    g.functions.len(),
                    g.effects.len(),
                    g.protocols.len(),
                    g.state.vars.len()
                ),
            )?;
            Ok(Exit::Ok)
        }
        Cmd::Translate { file } => {
            let tp = pipeline::check(&read(&file)?)?;
            let t = pipeline::translate(&tp)?;
            w(out, &print_program(&t.ir))?;
            Ok(Exit::Ok)
        }
        Cmd::Vc { file, emit_ir } => {
            let tp = pipeline::check(&read(&file)?)?;
            let t = pipeline::translate(&tp)?;
            if emit_ir {
                w(out, &print_program(&t.ir))?;
            }
            for vc in pipeline::vcs(&t.ir)? {
                w(out, &print_vc(&vc, t.ir.state_fields()))?;
            }
            Ok(Exit::Ok)
        }
        Cmd::Prove { file, solver, emit_ir, emit_vcs, dump_smt, report_json } => {
            let cfg = config(&cli.config, &solver)?;
            let tp = pipeline::check(&read(&file)?)?;
            let t = pipeline::translate(&tp)?;
            let vcs = pipeline::vcs(&t.ir)?;
            if emit_ir {
                w(out, &print_program(&t.ir))?;
            }
            if emit_vcs {
                for vc in &vcs {
                    w(out, &print_vc(vc, t.ir.state_fields()))?;
                }
            }
            let proof = pipeline::prove(&t.ir, &vcs, &cfg.solver_config(dump_smt))
                .map_err(|e| CliError::usage(e.to_string()))?;
            for v in &proof.vcs {
                w(out, &format!("{:<12} {:<30} {} ({:.2}s)\n", v.id, v.kind, v.status, v.seconds))?;
            }
            w(
                out,
                &format!("{} of {} VCs valid in {:.2}s\n", proof.count(Status::Valid), proof.vcs.len(), proof.seconds),
            )?;
            if let Some(p) = report_json {
                #[derive(Serialize)]
                struct ProveReport<'a> {
                    schema: &'a str,
                    version: u32,
                    file: String,
                    #[serde(flatten)]
                    proof: &'a pipeline::Proof,
                }
                let r = ProveReport {
                    schema: "effv-prove",
                    version: bench::REPORT_VERSION,
                    file: file.display().to_string(),
                    proof: &proof,
                };
                write_json(&p, &r)?;
            }
            if proof.all_valid() {
                Ok(Exit::Ok)
            } else if proof.vcs.iter().all(|v| matches!(v.status, Status::Valid | Status::SolverError)) {
                let first = proof.vcs.iter().find_map(|v| v.detail.clone()).unwrap_or_default();
                Err(CliError::internal(format!("solver failed: {}", first.trim())))
            } else {
                Ok(Exit::Failed)
            }
        }
        Cmd::Run { file, entry, args, check, enumerate, fuel, sets, trace_json } => {
            let c = config(&cli.config, &SolverOpts::default())?;
            let tp = pipeline::check(&read(&file)?)?;
            let parse = |s: &str| parse_expr(s).map_err(|e| CliError::usage(format!("argument `{s}`: {e}")));
            let arg_exprs = args.iter().map(|a| parse(a)).collect::<Result<Vec<Expr>, _>>()?;
            let mut set_exprs = Vec::new();
            for s in &sets {
                let (x, e) = s.split_once('=').ok_or_else(|| CliError::usage(format!("`--set {s}`: expected X=EXPR")))?;
                set_exprs.push((x.trim().to_string(), parse(e)?));
            }
            let it = Interp::new(&tp);
            if !it.has_function(&entry) {
                return Err(CliError::usage(format!("no function `{entry}`")));
            }
            let value = |e| it.eval_closed(e).map_err(|err| CliError::usage(format!("argument: {err}")));
            let argv = arg_exprs.iter().map(value).collect::<Result<Vec<Value>, _>>()?;
            let mut store: Store = it.initial_store().map_err(|e| CliError::failed(format!("initial state: {e}")))?;
            for (x, e) in &set_exprs {
                if store.get(x).is_none() {
                    return Err(CliError::usage(format!("no state variable `{x}`")));
                }
                store.set(x, value(e)?);
            }
            let fuel = fuel.unwrap_or(c.fuel);
            if enumerate {
                let evs = it.enumerate_effects(&entry, argv, fuel, Some(store)).map_err(|e| CliError::failed(e.to_string()))?;
                for e in &evs {
                    let payload: Vec<String> = e.payload.iter().map(Value::to_string).collect();
                    let st: Vec<String> = e.before.vars.iter().map(|(x, v)| format!("{x} = {v}")).collect();
                    w(out, &format!("{} ({}) [{}]\n", e.effect, payload.join(", "), st.join("; ")))?;
                }
                if let Some(p) = trace_json {
                    write_json(&p, &evs)?;
                }
                return Ok(Exit::Ok);
            }
            let o = if check { it.run_checked(&entry, argv, fuel, Some(store)) } else { it.run(&entry, argv, fuel, Some(store)) };
            if let Some(p) = trace_json {
                let (value, error) = match &o.result {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let j = serde_json::json!({
                    "value": value,
                    "error": error,
                    "violation": o.result.as_ref().err().and_then(RunError::violation),
                    "events": o.trace,
                    "store": o.store,
                    "stats": o.stats,
                });
                write_json(&p, &j)?;
            }
            match o.result {
                Ok(v) => {
                    w(out, &format!("{v}\n"))?;
                    Ok(Exit::Ok)
                }
                Err(e) => {
                    let blame = match (&e, e.blame()) {
                        (RunError::Contract(_), _) | (_, None) => String::new(),
                        (_, Some(b)) => format!(" ({b} blame)"),
                    };
                    Err(CliError::failed(format!("{e}{blame}")))
                }
            }
        }
        Cmd::Oracle { file, entries, samples, seed, report_json } => {
            let c = config(&cli.config, &SolverOpts::default())?;
            let tp = pipeline::check(&read(&file)?)?;
            let entries = if entries.is_empty() { oracle::closed_entries(&tp) } else { entries };
            let cfg = OracleConfig { samples, seed, fuel: c.fuel.min(1_000_000), ..OracleConfig::default() };
            let mut reports = Vec::new();
            for e in &entries {
                if !tp.globals.functions.contains_key(e) {
                    return Err(CliError::usage(format!("no function `{e}`")));
                }
                let r = oracle::check_entry(&tp, e, cfg).map_err(|err| CliError::failed(err.to_string()))?;
                w(
                    out,
                    &format!(
                        "{}: {} runs, {} skipped, {} contract violations, {} one-shot violations, {} other errors\n",
                        r.entry, r.runs, r.skipped, r.contract_violations, r.one_shot_violations, r.errors
                    ),
                )?;
                for f in &r.failures {
                    w(out, &format!("  sample {}: {}\n", f.sample, f.error))?;
                }
                reports.push(r);
            }
            if let Some(p) = report_json {
                write_json(&p, &serde_json::json!({ "schema": "effv-oracle", "version": bench::REPORT_VERSION, "entries": reports }))?;
            }
            Ok(if reports.iter().all(|r| r.clean()) { Exit::Ok } else { Exit::Failed })
        }
        Cmd::Bench { dir, solver, report_json } => {
            let c = config(&cli.config, &solver)?;
            let r = bench::bench(&dir, &c.solver_config(None)).map_err(|e| CliError::usage(format!("{e:#}")))?;
            w(out, &bench::table(&r))?;
            if let Some(p) = report_json {
                write_json(&p, &r)?;
            }
            Ok(Exit::Ok)
        }
    }
}
