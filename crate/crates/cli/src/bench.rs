//! Benchmark drivers shared by the `bench` subcommand and the acceptance
//! suite.

use serde::Serialize;

use adsym_core::gen::{random_tree, rng};
use adsym_core::{
    compare_op_logs, derivative_size, eval, forward_derivative, parse_expr, swell_report,
    symbolic_derivative, DiffPolicy, Error, ExprStore, OpKind, SubtreePolicy, SwellReport,
    Valuation,
};
use rand::Rng;

#[derive(Debug, Clone, Serialize)]
pub struct SpeelpenningComponent {
    pub var: String,
    pub point: f64,
    pub forward: f64,
    pub symbolic: f64,
    /// Product of the other coordinates.
    pub closed_form: f64,
    pub relative_error: f64,
    pub forward_ops: u64,
    pub symbolic_ops: u64,
    /// Forward and symbolic (cse, memoized) logged the same operation multiset.
    pub ops_equal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeelpenningReport {
    pub n: usize,
    pub seed: u64,
    pub dag_nodes: usize,
    pub components: Vec<SpeelpenningComponent>,
    pub max_relative_error: f64,
    pub all_ops_equal: bool,
}

/// Gradient of `x1*x2*...*xn` at a seeded point in `[0.5, 2)^n`.
pub fn speelpenning(n: usize, seed: u64) -> Result<SpeelpenningReport, Error> {
    if n == 0 {
        return Err(Error::Contract("speelpenning needs n >= 1"));
    }
    let text: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let f = parse_expr(&text.join("*"))?;
    let mut r = rng(seed);
    let point: Vec<f64> = (0..n).map(|_| r.gen_range(0.5..2.0)).collect();
    let mut at = Valuation::new();
    for (i, &x) in point.iter().enumerate() {
        at.set(f.store.var_id(&text[i]).expect("parsed variable"), x);
    }
    let mut components = Vec::new();
    for (i, name) in text.iter().enumerate() {
        let v = f.store.var_id(name).expect("parsed variable");
        let fwd = forward_derivative(&f.store, f.root, v, false)?;
        let sym = symbolic_derivative(&f, v, DiffPolicy::new(SubtreePolicy::Cse, true), false)?;
        let forward = eval(&fwd.expr.store, fwd.expr.root, &at)?;
        let symbolic = eval(sym.store(), sym.root(), &at)?;
        let closed_form: f64 = point
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, x)| x)
            .product();
        let relative_error = ((forward - closed_form) / closed_form)
            .abs()
            .max(((symbolic - closed_form) / closed_form).abs());
        components.push(SpeelpenningComponent {
            var: name.clone(),
            point: point[i],
            forward,
            symbolic,
            closed_form,
            relative_error,
            forward_ops: fwd.log().total(),
            symbolic_ops: sym.log.total(),
            ops_equal: compare_op_logs(fwd.log(), &sym.log).equal,
        });
    }
    Ok(SpeelpenningReport {
        n,
        seed,
        dag_nodes: f.node_count(),
        max_relative_error: components
            .iter()
            .map(|c| c.relative_error)
            .fold(0.0, f64::max),
        all_ops_equal: components.iter().all(|c| c.ops_equal),
        components,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SwellRow {
    pub k: u32,
    #[serde(flatten)]
    pub report: SwellReport,
}

/// Sizes of the squaring chain `x^(2^k)` for `k = 1..=k_max`.
pub fn swell(k_max: u32, budget: usize) -> Result<Vec<SwellRow>, Error> {
    let mut s = ExprStore::hash_consed();
    let mut t = s.var("x");
    let mut rows = Vec::new();
    for k in 1..=k_max {
        t = s.binary(OpKind::Mul, t, t)?;
        rows.push(SwellRow {
            k,
            report: swell_report(&s, t, budget)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeSample {
    pub n: usize,
    pub share: usize,
    pub copy: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomTreeReport {
    pub seed: u64,
    pub samples: Vec<TreeSample>,
    /// Least-squares slope of ln(size) against ln(n) over all samples.
    pub share_slope: f64,
    pub copy_slope: f64,
    /// Largest share derivative size divided by n.
    pub max_share_ratio: f64,
}

/// Budget for the copy policy on random trees.
const COPY_BUDGET: usize = 200_000_000;

/// Derivative sizes with respect to `x1` of random trees, memoized, under
/// the share and copy policies.
pub fn random_trees(
    seed: u64,
    sizes: &[usize],
    per_size: usize,
) -> Result<RandomTreeReport, Error> {
    let mut r = rng(seed);
    let mut samples = Vec::new();
    for &n in sizes {
        for _ in 0..per_size {
            let t = random_tree(&mut r, n, 4);
            let x1 = t.store.var_id("x1").expect("generator variable");
            let share = derivative_size(
                &t,
                x1,
                DiffPolicy::new(SubtreePolicy::Share, true),
                false,
                usize::MAX,
            )?;
            let copy = derivative_size(
                &t,
                x1,
                DiffPolicy::new(SubtreePolicy::Copy, true),
                false,
                COPY_BUDGET,
            )?;
            samples.push(TreeSample { n, share, copy });
        }
    }
    let slope_of = |f: fn(&TreeSample) -> usize| {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .map(|s| ((s.n as f64).ln(), (f(s) as f64).ln()))
            .collect();
        slope(&pts)
    };
    Ok(RandomTreeReport {
        seed,
        share_slope: slope_of(|s| s.share),
        copy_slope: slope_of(|s| s.copy),
        max_share_ratio: samples
            .iter()
            .map(|s| s.share as f64 / s.n as f64)
            .fold(0.0, f64::max),
        samples,
    })
}

/// Ordinary least-squares slope; NaN with fewer than two distinct x.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
