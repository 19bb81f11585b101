//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adsym_core::SubtreePolicy;

#[derive(Debug, Parser)]
#[command(
    name = "adsym",
    version,
    about = "Forward-mode and symbolic differentiation on one expression IR"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an expression and print it back with its sizes.
    Parse(ExprArgs),
    /// Differentiate an expression.
    Diff(DiffArgs),
    /// Evaluate an expression at a point.
    Eval(EvalArgs),
    /// Compare every engine against central finite differences.
    Check(CheckArgs),
    /// Run the randomized forward-versus-symbolic equivalence suite.
    CheckEquiv(EquivArgs),
    /// Unfold an expression DAG into a tree.
    Unfold(UnfoldArgs),
    /// Name shared subexpressions as let-bindings.
    ToForest(ExprArgs),
    /// Run a program at concrete inputs and print its execution trace.
    Trace(TraceArgs),
    /// Benchmarks and size studies.
    #[command(subcommand)]
    Bench(Bench),
    /// Write an expression or its derivative as Graphviz DOT or JSON.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
    /// Graphviz DOT output.
    #[arg(long)]
    pub dot: bool,
    /// Also print sizes and operation counts.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExprArgs {
    /// Expression text, or a path to a `.expr` file.
    pub input: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Forward,
    Symbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Copy,
    Share,
    Cse,
}

impl From<Policy> for SubtreePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Copy => SubtreePolicy::Copy,
            Policy::Share => SubtreePolicy::Share,
            Policy::Cse => SubtreePolicy::Cse,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value_t = Mode::Symbolic)]
    pub mode: Mode,
    /// Subtree storage policy of the symbolic engine.
    #[arg(long, value_enum, default_value_t = Policy::Share)]
    pub policy: Policy,
    /// Differentiate each distinct subexpression once.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub memoize: bool,
    /// Apply the smart-constructor rules (x+0, x*1, x*0, constant folding).
    #[arg(long)]
    pub simplify: bool,
    /// Node budget for copying and unmemoized recursion.
    #[arg(long, default_value_t = adsym_core::DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DiffArgs {
    pub input: String,
    /// Variable to differentiate with respect to.
    #[arg(long)]
    pub wrt: String,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub input: String,
    /// Variable binding, repeatable.
    #[arg(long = "input", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub inputs: Vec<(String, f64)>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub input: String,
    /// Variable binding, repeatable. Unbound variables get a seeded random
    /// value away from singularities.
    #[arg(long = "input", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub inputs: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance against finite differences.
    #[arg(long, default_value_t = adsym_core::eval::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EquivArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub cases: usize,
    #[arg(long, default_value_t = 200)]
    pub max_nodes: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct UnfoldArgs {
    pub input: String,
    #[arg(long, default_value_t = adsym_core::DEFAULT_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    /// Program text, or a path to a `.prog` file.
    pub program: String,
    #[arg(long = "input", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub inputs: Vec<(String, f64)>,
    /// Also differentiate the trace with respect to this parameter.
    #[arg(long)]
    pub wrt: Option<String>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = adsym_core::tracer::DEFAULT_STEP_LIMIT)]
    pub step_limit: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum Bench {
    /// Gradient of x1*x2*...*xn against the closed form.
    Speelpenning {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// DAG, tree and forest sizes of the squaring chain x^(2^k).
    Swell {
        #[arg(long, default_value_t = 20)]
        k_max: u32,
        #[arg(long, default_value_t = adsym_core::DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Derivative sizes of random trees under each storage policy.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tree sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [16, 64, 256, 1024, 4096])]
        sizes: Vec<usize>,
        /// Trees per size.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    pub input: String,
    #[arg(long, value_enum, default_value_t = Format::Dot)]
    pub format: Format,
    /// Export the forest form with one cluster per binding.
    #[arg(long)]
    pub forest: bool,
    /// Export the derivative with respect to this variable instead.
    #[arg(long)]
    pub wrt: Option<String>,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Write to a file instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn bindings() {
        assert_eq!(parse_binding("x=2.5").unwrap(), ("x".into(), 2.5));
        assert_eq!(parse_binding(" x = -2 ").unwrap(), ("x".into(), -2.0));
        assert!(parse_binding("x").is_err());
        assert!(parse_binding("x=abc").is_err());
    }

    #[test]
    fn memoize_takes_a_value() {
        let cli = Cli::try_parse_from(["adsym", "diff", "x", "--wrt", "x", "--memoize", "false"])
            .unwrap();
        let Command::Diff(d) = cli.command else {
            panic!()
        };
        assert!(!d.engine.memoize);
        let cli = Cli::try_parse_from(["adsym", "diff", "x", "--wrt", "x"]).unwrap();
        let Command::Diff(d) = cli.command else {
            panic!()
        };
        assert!(d.engine.memoize && !d.engine.simplify);
    }
}
