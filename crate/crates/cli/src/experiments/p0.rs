//! P₀-convexity audit: the counterexample family, exchange inequalities for
//! graph energies and L^r contraction of their flows.

use gfstack::energies::{
    counterexample_demo, lr_contraction_sweep_with_budget, p0_convexity_check, p0_family, quadratic_p0, Loss, P0TestFunction,
};
use rand::Rng;
use rayon::prelude::*;

use super::bounds::random_graph;
use super::rng_for;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::table::{Row, Table};

pub const EXPERIMENT: &str = "p0";

pub const COUNTEREXAMPLE_LAMBDAS: [f64; 2] = [0.0, 4.0];

/// Exchange pairs per functional and truncation.
pub const EXCHANGE_PAIRS: usize = 20;

/// Sampled `(x, y, t)` per graph energy.
pub const CONTRACTION_SAMPLES: usize = 50;

/// Exponents of the contraction check; infinity is the maximum over nodes.
pub const CONTRACTION_EXPONENTS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, f64::INFINITY];

/// Crandall–Liggett tolerance of the contraction flows. Both flows share one
/// discretization, so it only sets the reported certificate.
pub const CONTRACTION_FLOW_TOL: f64 = 1e-3;

/// A-priori step budget of the contraction flows.
pub const CONTRACTION_BUDGET: usize = 1 << 12;

fn truncations() -> Vec<(&'static str, P0TestFunction)> {
    vec![
        ("capped", p0_family(0.1, 0.1, Some(0.5)).expect("valid parameters")),
        ("uncapped", p0_family(0.3, 0.5, None).expect("valid parameters")),
        ("one_sided", P0TestFunction::new(0.05, 0.2, 0.6, Some(1.0)).expect("valid parameters").one_sided()),
    ]
}

fn counterexample_rows(tol: f64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for lambda in COUNTEREXAMPLE_LAMBDAS {
        let r = counterexample_demo(lambda).context(|| format!("counterexample at λ = {lambda}"))?;
        let m = |what: &str| format!("counterexample_l{lambda}/{what}");
        rows.push(Row::check(EXPERIMENT, 2, 0.0, m("slack"), (r.p0.slack - r.predicted_slack).abs(), 0.0, tol));
        rows.push(Row::record(EXPERIMENT, 2, 0.0, m("p0_slack"), r.p0.slack));
        rows.push(Row::with_pass(
            EXPERIMENT,
            2,
            0.0,
            m("convexity_violations"),
            r.convexity.violations.len() as f64,
            0.0,
            r.convexity.holds(),
        ));
        rows.push(Row::record(EXPERIMENT, 2, 0.0, m("convexity_samples"), r.convexity.samples as f64));
        // The exchange inequality must fail here.
        rows.push(Row::with_pass(EXPERIMENT, 2, 0.0, m("p0_violated"), r.p0.slack, -tol, r.p0.slack < -tol));
    }
    Ok(rows)
}

fn exchange_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let mut rng = rng_for(cfg.seed, "p0/exchange");
    let gs = truncations();
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let ctx = || format!("graph energies on {n} nodes");
        let phis = vec![
            ("graph_squared", random_graph(&mut rng, n, Loss::Squared).context(ctx)?.functional()),
            ("graph_absolute", random_graph(&mut rng, n, Loss::Absolute).context(ctx)?.functional()),
            ("quadratic", quadratic_p0(vec![1.0 / n as f64; n]).context(ctx)?),
        ];
        for i in 0..EXCHANGE_PAIRS {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for (name, phi) in &phis {
                for (gname, g) in &gs {
                    let r = p0_convexity_check(phi, &u, &v, g).context(|| format!("exchange for {name}"))?;
                    let metric = format!("exchange/{name}/{gname}/{i:02}");
                    rows.push(Row::check(EXPERIMENT, n, 0.0, metric, r.lhs, r.rhs, cfg.tolerance));
                }
            }
        }
    }
    Ok(rows)
}

fn contraction_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let mut rng = rng_for(cfg.seed, "p0/contraction");
    let mut jobs = Vec::new();
    for &n in &cfg.sizes {
        let ge = random_graph(&mut rng, n, Loss::Squared).context(|| format!("graph energy on {n} nodes"))?;
        for i in 0..CONTRACTION_SAMPLES {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t = rng.gen_range(0.05..1.0);
            jobs.push((n, i, ge.clone(), x, y, t));
        }
    }
    let chunks: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|(n, i, ge, x, y, t)| {
            let reps = lr_contraction_sweep_with_budget(ge, x, y, *t, &CONTRACTION_EXPONENTS, CONTRACTION_FLOW_TOL, CONTRACTION_BUDGET)
                .context(|| format!("contraction sample {i} on {n} nodes"))?;
            Ok(reps
                .iter()
                .map(|r| {
                    let label = if r.r.is_infinite() { "max".to_string() } else { format!("r{}", r.r) };
                    Row::check(EXPERIMENT, *n, *t, format!("lr_contraction/{label}/{i:02}"), r.lhs, r.rhs, cfg.tolerance)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

pub fn run_p0_audit(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut rows = counterexample_rows(cfg.tolerance)?;
    rows.extend(exchange_rows(cfg)?);
    rows.extend(contraction_rows(cfg)?);
    Ok(Table::new(rows))
}
