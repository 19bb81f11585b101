//! Subcommand implementations. Each writes its report to `out` and returns
//! the process exit code.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use adsym_core::gen::{rng, sample_valuation, Regularity};
use adsym_core::parser::Program;
use adsym_core::tracer::trace_program;
use adsym_core::{
    check_gradient, cons_tree, eval, forward_derivative, parse_expr, parse_program, pretty,
    pretty_forest, randomized_equivalence_suite, swell_report, symbolic_derivative_with, to_forest,
    trace_derivative, unfold, DiffOptions, DiffPolicy, Error, Expr, ExprStore, NodeId, OpLog,
    SubtreePolicy, SymbolicOutput, TraceMode, Valuation, VarId,
};

use crate::cli::{
    Bench, CheckArgs, Cli, Command, DiffArgs, EngineArgs, EquivArgs, EvalArgs, ExportArgs,
    ExprArgs, Format, Mode, OutputArgs, TraceArgs, UnfoldArgs,
};
use crate::{bench, exit, export};

/// Largest tree printed in full; bigger results print as a forest.
pub const PRINT_LIMIT: u128 = 10_000;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. } | Error::UseBeforeAssign { .. } | Error::AssignToParam(_) => {
                exit::PARSE
            }
            Error::BudgetExceeded { .. } => exit::BUDGET,
            Error::Domain { .. } | Error::UnboundVariable(_) | Error::StepLimitExceeded(_) => {
                exit::DOMAIN
            }
            _ => exit::PARSE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: exit::IO,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError {
            code: exit::IO,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, CliError>;

pub fn run(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Parse(a) => parse_cmd(a, out),
        Command::Diff(a) => diff_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Check(a) => check_cmd(a, out),
        Command::CheckEquiv(a) => equiv_cmd(a, out),
        Command::Unfold(a) => unfold_cmd(a, out),
        Command::ToForest(a) => forest_cmd(a, out),
        Command::Trace(a) => trace_cmd(a, out),
        Command::Bench(b) => bench_cmd(b, out),
        Command::Export(a) => export_cmd(a, out),
    }
}

/// Reads the argument as a file when it names one (or has a `.expr`/`.prog`
/// extension), otherwise treats it as source text.
pub fn source_text(arg: &str) -> Result<String, CliError> {
    let path = Path::new(arg);
    let by_extension = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("expr" | "prog")
    );
    if by_extension || path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError {
            code: exit::IO,
            message: format!("{arg}: {e}"),
        })
    } else {
        Ok(arg.to_string())
    }
}

pub fn load_expr(arg: &str) -> Result<Expr, CliError> {
    Ok(parse_expr(&source_text(arg)?)?)
}

pub fn load_program(arg: &str) -> Result<Program, CliError> {
    Ok(parse_program(&source_text(arg)?)?)
}

fn json_line(out: &mut dyn Write, v: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Tree text when small enough, forest text otherwise.
pub fn render(store: &ExprStore, root: NodeId) -> Result<String, CliError> {
    if store.is_forest() && !store.bindings().is_empty() {
        let f = adsym_core::ExprForest {
            store: store.clone(),
            main: root,
        };
        return Ok(pretty_forest(&f));
    }
    if store.tree_size(root) <= PRINT_LIMIT {
        return Ok(pretty(store, root));
    }
    let dag = cons_tree(store, root)?;
    Ok(pretty_forest(&to_forest(&dag.store, dag.root)?))
}

fn parse_cmd(a: &ExprArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    if a.out.dot {
        write!(out, "{}", export::to_dot(&e.store, e.root))?;
        return Ok(exit::OK);
    }
    let (calls, hits) = e.store.stats();
    if a.out.json {
        json_line(
            out,
            &json!({
                "expression": pretty(&e.store, e.root),
                "vars": e.store.vars(),
                "dag_nodes": e.node_count(),
                "tree_nodes": e.tree_size().to_string(),
                "constructor_calls": calls,
                "cons_hits": hits,
                "graph": export::to_json_graph(&e.store, e.root),
            }),
        )?;
        return Ok(exit::OK);
    }
    writeln!(out, "{}", render(&e.store, e.root)?)?;
    if a.out.stats {
        writeln!(out, "vars: {}", e.store.vars().join(", "))?;
        writeln!(out, "dag nodes: {}", e.node_count())?;
        writeln!(out, "tree nodes: {}", e.tree_size())?;
        writeln!(out, "constructor calls: {calls} ({hits} cons hits)")?;
    }
    Ok(exit::OK)
}

/// A derivative in whichever form the engine produced.
pub struct DiffResult {
    pub store: ExprStore,
    pub root: NodeId,
    pub log: OpLog,
    pub size: usize,
    pub input_nodes: usize,
}

/// Differentiates `e` with respect to the variable called `wrt`. A variable
/// the expression does not mention has derivative zero.
pub fn differentiate(e: &Expr, wrt: &str, engine: &EngineArgs) -> Result<DiffResult, CliError> {
    let mut e = e.clone();
    let v: VarId = e.store.intern_var(wrt);
    let input_nodes = e.node_count();
    match engine.mode {
        Mode::Forward => {
            let d = forward_derivative(&e.store, e.root, v, engine.simplify)?;
            Ok(DiffResult {
                size: d.size(),
                log: d.log().clone(),
                root: d.expr.root,
                store: d.expr.store,
                input_nodes,
            })
        }
        Mode::Symbolic => {
            let policy = DiffPolicy::new(SubtreePolicy::from(engine.policy), engine.memoize);
            let opts = DiffOptions::new(policy, engine.simplify).with_budget(engine.budget);
            let d = symbolic_derivative_with(&e, v, &opts)?;
            let size = d.size();
            let (store, root) = match d.output {
                SymbolicOutput::Tree(x) | SymbolicOutput::Dag(x) => (x.store, x.root),
                SymbolicOutput::Forest(f) => (f.store, f.main),
            };
            Ok(DiffResult {
                store,
                root,
                log: d.log,
                size,
                input_nodes,
            })
        }
    }
}

fn engine_name(engine: &EngineArgs) -> String {
    match engine.mode {
        Mode::Forward => "forward".into(),
        Mode::Symbolic => format!(
            "symbolic ({}, memoize {})",
            SubtreePolicy::from(engine.policy).name(),
            if engine.memoize { "on" } else { "off" }
        ),
    }
}

fn write_log_stats(out: &mut dyn Write, log: &OpLog) -> Result<(), CliError> {
    writeln!(out, "operations: {}", log.total())?;
    for (role, n) in log.by_role() {
        writeln!(out, "  {}: {n}", role.name())?;
    }
    for (op, n) in log.by_op() {
        writeln!(out, "  {op}: {n}")?;
    }
    Ok(())
}

fn diff_cmd(a: &DiffArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let d = differentiate(&e, &a.wrt, &a.engine)?;
    write_diff(out, &a.out, &a.engine, &a.wrt, &d)?;
    Ok(exit::OK)
}

fn write_diff(
    out: &mut dyn Write,
    o: &OutputArgs,
    engine: &EngineArgs,
    wrt: &str,
    d: &DiffResult,
) -> Result<(), CliError> {
    if o.dot {
        write!(out, "{}", export::to_dot(&d.store, d.root))?;
        return Ok(());
    }
    let text = render(&d.store, d.root)?;
    if o.json {
        return json_line(
            out,
            &json!({
                "wrt": wrt,
                "engine": engine_name(engine),
                "simplify": engine.simplify,
                "derivative": text,
                "size": d.size,
                "input_nodes": d.input_nodes,
                "operations": d.log.total(),
                "op_log": &d.log,
            }),
        );
    }
    writeln!(out, "{text}")?;
    if o.stats {
        writeln!(out, "engine: {}", engine_name(engine))?;
        writeln!(out, "derivative size: {}", d.size)?;
        write_log_stats(out, &d.log)?;
    }
    Ok(())
}

fn valuation(store: &ExprStore, inputs: &[(String, f64)]) -> Result<Valuation, CliError> {
    let pairs: Vec<(&str, f64)> = inputs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    Ok(Valuation::from_names(store, &pairs)?)
}

fn eval_cmd(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let at = valuation(&e.store, &a.inputs)?;
    let v = eval(&e.store, e.root, &at)?;
    if a.json {
        json_line(out, &json!({ "value": v }))?;
    } else {
        writeln!(out, "{v}")?;
    }
    Ok(exit::OK)
}

fn check_cmd(a: &CheckArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let mut at = valuation(&e.store, &a.inputs)?;
    let vars = e.var_ids();
    let free: Vec<VarId> = vars
        .iter()
        .copied()
        .filter(|&v| at.get(v).is_none())
        .collect();
    if !free.is_empty() {
        let mut r = rng(a.seed);
        let fixed = at.clone();
        let sampled = (0..1000).find_map(|_| {
            let s = sample_valuation(
                &mut r,
                &e.store,
                e.root,
                &free,
                (-2.0, 2.0),
                Regularity::default(),
                1,
            )?;
            let mut full = fixed.clone();
            for (v, x) in s.iter() {
                full.set(v, x);
            }
            adsym_core::gen::is_regular(&e.store, e.root, &full, Regularity::default())
                .then_some(full)
        });
        at = sampled.ok_or_else(|| CliError {
            code: exit::DOMAIN,
            message: "no regular point found for the unbound variables".into(),
        })?;
    }
    let report = check_gradient(&e.store, e.root, &vars, &at, a.tol);
    if a.json {
        let point: Vec<(String, f64)> = at
            .iter()
            .map(|(v, x)| (e.store.var_name(v).unwrap_or("?").to_string(), x))
            .collect();
        json_line(out, &json!({ "point": point, "report": &report }))?;
    } else {
        for (v, x) in at.iter() {
            writeln!(out, "{} = {x}", e.store.var_name(v).unwrap_or("?"))?;
        }
        if let Some(v) = report.value {
            writeln!(out, "value: {v}")?;
        }
        if let Some(err) = &report.error {
            writeln!(out, "error: {err}")?;
        }
        for entry in &report.entries {
            let status = if entry.pass { "ok" } else { "FAIL" };
            writeln!(
                out,
                "d/d{}: {status}  fd {}  max rel err {:.3e}  engines agree: {}",
                entry.name,
                entry
                    .finite_difference
                    .map_or("-".into(), |x| x.to_string()),
                entry.max_relative_error,
                entry.engines_agree
            )?;
            for ev in &entry.engines {
                match (ev.value, &ev.error) {
                    (Some(x), _) => writeln!(out, "  {:<15} {x}", ev.engine)?,
                    (None, Some(err)) => writeln!(out, "  {:<15} error: {err}", ev.engine)?,
                    _ => {}
                }
            }
        }
    }
    Ok(if report.pass {
        exit::OK
    } else {
        exit::CHECK_FAILED
    })
}

fn equiv_cmd(a: &EquivArgs, out: &mut dyn Write) -> CmdResult {
    let s = randomized_equivalence_suite(a.seed, a.cases, a.max_nodes);
    if a.json {
        json_line(out, &s)?;
    } else {
        writeln!(
            out,
            "seed {}  cases {}  max nodes {}",
            s.seed, s.cases, a.max_nodes
        )?;
        writeln!(
            out,
            "comparisons: {} (forward vs symbolic share+memo, simplify off and on)",
            s.comparisons
        )?;
        writeln!(
            out,
            "shared nodes: {} of {} ({:.1}%)",
            s.shared_nodes,
            s.total_nodes,
            100.0 * s.shared_nodes as f64 / s.total_nodes.max(1) as f64
        )?;
        writeln!(out, "cse op-log mismatches: {}", s.cse_log_mismatches)?;
        writeln!(
            out,
            "unmemoized control: {} of {} runs did strictly more work",
            s.unmemoized_more_work, s.unmemoized_runs
        )?;
        for f in &s.failures {
            writeln!(
                out,
                "FAIL case {} (seed {:#x}, {} vars) d/d{} simplify={}: {}",
                f.case, f.case_seed, f.n_vars, f.var, f.simplify, f.reason
            )?;
        }
        writeln!(out, "failures: {}", s.failures.len())?;
    }
    Ok(if s.failures.is_empty() {
        exit::OK
    } else {
        exit::CHECK_FAILED
    })
}

fn unfold_cmd(a: &UnfoldArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let t = unfold(&e.store, e.root, a.budget)?;
    if a.out.dot {
        write!(out, "{}", export::to_dot(&t.store, t.root))?;
        return Ok(exit::OK);
    }
    if a.out.json {
        json_line(
            out,
            &json!({
                "dag_nodes": e.node_count(),
                "tree_nodes": t.node_count(),
                "tree": pretty(&t.store, t.root),
            }),
        )?;
        return Ok(exit::OK);
    }
    writeln!(out, "{}", pretty(&t.store, t.root))?;
    if a.out.stats {
        writeln!(out, "dag nodes: {}", e.node_count())?;
        writeln!(out, "tree nodes: {}", t.node_count())?;
    }
    Ok(exit::OK)
}

fn forest_cmd(a: &ExprArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let f = to_forest(&e.store, e.root)?;
    if a.out.dot {
        write!(out, "{}", export::to_dot(&f.store, f.main))?;
        return Ok(exit::OK);
    }
    if a.out.json || a.out.stats {
        let r = swell_report(&e.store, e.root, adsym_core::DEFAULT_BUDGET)?;
        if a.out.json {
            json_line(out, &json!({ "forest": pretty_forest(&f), "sizes": r }))?;
            return Ok(exit::OK);
        }
        writeln!(out, "{}", pretty_forest(&f))?;
        writeln!(out, "dag nodes: {}", r.dag_nodes)?;
        writeln!(out, "tree nodes: {}", r.tree_nodes)?;
        writeln!(
            out,
            "forest nodes: {} ({} bindings)",
            r.forest_nodes, r.forest_bindings
        )?;
        writeln!(out, "forest occurrences: {}", r.forest_occurrences)?;
        return Ok(exit::OK);
    }
    writeln!(out, "{}", pretty_forest(&f))?;
    Ok(exit::OK)
}

fn trace_cmd(a: &TraceArgs, out: &mut dyn Write) -> CmdResult {
    let p = load_program(&a.program)?;
    let inputs: Vec<(&str, f64)> = a.inputs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let t = trace_program(&p, &inputs, a.step_limit)?;
    if a.out.dot {
        write!(out, "{}", export::to_dot(&t.dag.store, t.dag.root))?;
        return Ok(exit::OK);
    }
    let derivative = match &a.wrt {
        Some(w) => {
            let mode = match a.engine.mode {
                Mode::Forward => TraceMode::Forward,
                Mode::Symbolic => TraceMode::Symbolic(DiffPolicy::new(
                    SubtreePolicy::from(a.engine.policy),
                    a.engine.memoize,
                )),
            };
            Some(trace_derivative(&p, &inputs, w, mode)?.1)
        }
        None => None,
    };
    let text = render(&t.dag.store, t.dag.root)?;
    if a.out.json {
        json_line(
            out,
            &json!({
                "trace": text,
                "dag_nodes": t.dag.node_count(),
                "value": t.value,
                "derivative": derivative,
                "wrt": a.wrt,
                "branch_decisions": t.branch_decisions,
                "steps": t.steps,
            }),
        )?;
        return Ok(exit::OK);
    }
    writeln!(out, "trace: {text}")?;
    writeln!(out, "dag nodes: {}", t.dag.node_count())?;
    writeln!(out, "value: {}", t.value)?;
    if let (Some(w), Some(d)) = (&a.wrt, derivative) {
        writeln!(out, "d/d{w}: {d}")?;
    }
    if a.out.stats {
        writeln!(out, "steps: {}", t.steps)?;
        let decisions: Vec<String> = t
            .branch_decisions
            .iter()
            .map(|(id, taken)| format!("{id}:{}", if *taken { "T" } else { "F" }))
            .collect();
        writeln!(out, "branches: {}", decisions.join(" "))?;
    }
    Ok(exit::OK)
}

fn bench_cmd(b: &Bench, out: &mut dyn Write) -> CmdResult {
    match *b {
        Bench::Speelpenning { n, seed, json } => {
            let r = bench::speelpenning(n, seed)?;
            if json {
                json_line(out, &r)?;
            } else {
                writeln!(
                    out,
                    "{:<5} {:>12} {:>22} {:>22} {:>10} {:>8} {:>8}",
                    "var", "x", "gradient", "closed form", "rel err", "fwd ops", "cse ops"
                )?;
                for c in &r.components {
                    writeln!(
                        out,
                        "{:<5} {:>12.6} {:>22.15e} {:>22.15e} {:>10.2e} {:>8} {:>8}",
                        c.var,
                        c.point,
                        c.forward,
                        c.closed_form,
                        c.relative_error,
                        c.forward_ops,
                        c.symbolic_ops
                    )?;
                }
                writeln!(out, "max relative error: {:.3e}", r.max_relative_error)?;
                writeln!(out, "operation multisets equal: {}", r.all_ops_equal)?;
            }
            Ok(if r.all_ops_equal && r.max_relative_error <= 1e-12 {
                exit::OK
            } else {
                exit::CHECK_FAILED
            })
        }
        Bench::Swell {
            k_max,
            budget,
            json,
        } => {
            let rows = bench::swell(k_max, budget)?;
            if json {
                json_line(out, &rows)?;
            } else {
                writeln!(
                    out,
                    "{:>3} {:>5} {:>10} {:>11} {:>7} {:>9} {:>12}",
                    "k", "dag", "tree", "constructed", "forest", "bindings", "swell"
                )?;
                for r in &rows {
                    let s = &r.report;
                    writeln!(
                        out,
                        "{:>3} {:>5} {:>10} {:>11} {:>7} {:>9} {:>12.1}",
                        r.k,
                        s.dag_nodes,
                        s.tree_nodes,
                        s.tree_constructed,
                        s.forest_nodes,
                        s.forest_bindings,
                        s.swell_ratio
                    )?;
                }
            }
            Ok(exit::OK)
        }
        Bench::Random {
            seed,
            ref sizes,
            samples,
            json,
        } => {
            let r = bench::random_trees(seed, sizes, samples)?;
            if json {
                json_line(out, &r)?;
            } else {
                writeln!(out, "{:>6} {:>10} {:>12}", "n", "share", "copy")?;
                for s in &r.samples {
                    writeln!(out, "{:>6} {:>10} {:>12}", s.n, s.share, s.copy)?;
                }
                writeln!(
                    out,
                    "log-log slope: share {:.3}, copy {:.3}",
                    r.share_slope, r.copy_slope
                )?;
                writeln!(out, "max share size / n: {:.2}", r.max_share_ratio)?;
            }
            Ok(exit::OK)
        }
    }
}

fn export_cmd(a: &ExportArgs, out: &mut dyn Write) -> CmdResult {
    let e = load_expr(&a.input)?;
    let (store, root) = match &a.wrt {
        Some(w) => {
            let d = differentiate(&e, w, &a.engine)?;
            (d.store, d.root)
        }
        None => (e.store, e.root),
    };
    let (store, root) = if a.forest && !store.is_forest() {
        let dag = cons_tree(&store, root)?;
        let f = to_forest(&dag.store, dag.root)?;
        (f.store, f.main)
    } else {
        (store, root)
    };
    let text = match a.format {
        Format::Dot => export::to_dot(&store, root),
        Format::Json => serde_json::to_string_pretty(&export::to_json_graph(&store, root))? + "\n",
    };
    match &a.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError {
            code: exit::IO,
            message: format!("{}: {e}", path.display()),
        })?,
        None => write!(out, "{text}")?,
    }
    Ok(exit::OK)
}
