//! Audit of the stacking axioms, Γ-convergence diagnostics and the three
//! negative controls.

use std::f64::consts::PI;

use gfstack::convex::{zero, ProperFunctional};
use gfstack::energies::GraphEnergy;
use gfstack::stacking::{
    check_stacking_axioms, circle_counterexample, equicoercivity_probe, gamma_liminf_check, minimizer_convergence,
    recovery_sequence, AxiomReport, CircleStacking, ConvergentSequence, EnergySequence, Level, MatrixHilbertStacking,
    SpdMatrix, SubspaceStacking, TlpStacking, LIPSCHITZ_SLACK,
};
use gfstack::transport::EmpiricalMeasure;

use super::d2c::FINE_FACTOR;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::table::{Row, Table};

pub const EXPERIMENT: &str = "stacking";

/// Allowance of the Γ-liminf and Cauchy-tail checks on the Dirichlet family.
pub const GAMMA_TOLERANCE: f64 = 0.05;

/// Clustering threshold of the escaping-sequence probe.
pub const ESCAPE_TOLERANCE: f64 = 1e-3;

/// Distance below which circle minimizers would count as converging.
pub const CIRCLE_TOLERANCE: f64 = 0.5;

/// Dimension of the ambient space of the subspace instance.
pub const SUBSPACE_DIM: usize = 8;

fn excess(values: &[f64], bounds: &[f64]) -> f64 {
    values.iter().zip(bounds).map(|(v, b)| v - b).fold(f64::NEG_INFINITY, f64::max)
}

fn axiom_rows(name: &str, n: usize, report: &AxiomReport) -> Vec<Row> {
    let mut lip = f64::NEG_INFINITY;
    let (mut approx, mut algebra, mut norms) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for q in &report.sequences {
        lip = lip.max(q.lipschitz_excess);
        approx = approx.max(excess(&q.approximation, &q.tolerances)).max(excess(&q.zero, &q.tolerances));
        let sum_bounds: Vec<f64> = q.tolerances.iter().zip(&q.approximation).map(|(t, a)| t + a).collect();
        algebra = algebra
            .max(excess(&q.embedded, &q.tolerances))
            .max(excess(&q.sums, &sum_bounds))
            .max(excess(&q.scalings, &q.tolerances));
        norms = norms.max(excess(&q.norm_gaps, &q.tolerances));
    }
    let row = |axiom: &str, lhs: f64, pass: bool| {
        Row::with_pass(EXPERIMENT, n, 0.0, format!("axioms/{name}/{axiom}"), lhs, LIPSCHITZ_SLACK, pass)
    };
    vec![
        row("lipschitz", lip, report.lipschitz()),
        row("approximation", approx, report.approximation()),
        row("algebra", algebra, report.algebra()),
        row("norms", norms, report.norms()),
    ]
}

fn inflated(n: usize) -> gfstack::Result<SpdMatrix> {
    SpdMatrix::identity(2)?.scaled(1.0 + 1.0 / n as f64)
}

fn sampled(mu: &EmpiricalMeasure, f: impl Fn(f64) -> f64) -> Vec<f64> {
    mu.atoms().iter().map(|&x| f(x)).collect()
}

fn dirichlet_family(cfg: &ExperimentConfig, broken: bool) -> Result<EnergySequence<EmpiricalMeasure>> {
    let fine_n = FINE_FACTOR * cfg.sizes[cfg.sizes.len() - 1];
    let (fine, fe) = GraphEnergy::grid_dirichlet(fine_n).context(|| "fine grid".into())?;
    let terms = cfg
        .sizes
        .iter()
        .map(|&n| {
            let (mu, ge) = GraphEnergy::graph_dirichlet(n).context(|| format!("graph energy on {n} points"))?;
            let ge = if broken { ge.scaled(1.0 / n as f64).context(|| "rescaling".into())? } else { ge };
            Ok((mu, ge.functional()))
        })
        .collect::<Result<_>>()?;
    EnergySequence::new(terms, fine, fe.functional()).context(|| "Dirichlet family".into())
}

fn axioms(cfg: &ExperimentConfig, last: usize) -> Result<Vec<Row>> {
    let ctx = |what: &'static str| move || format!("{what} axioms");
    let mut rows = Vec::new();

    let s = MatrixHilbertStacking::new(2).context(ctx("matrix"))?;
    let x = vec![1.0, -0.5];
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let indices = cfg.sizes.iter().map(|&n| inflated(n)).collect::<gfstack::Result<Vec<_>>>().context(ctx("matrix"))?;
    let tol = cfg.sizes.iter().map(|&n| norm / n as f64).collect();
    let seq = ConvergentSequence::new(indices, vec![x.clone(); cfg.sizes.len()], SpdMatrix::identity(2).context(ctx("matrix"))?, x, tol)
        .context(ctx("matrix"))?;
    rows.extend(axiom_rows("matrix", last, &check_stacking_axioms(&s, &[seq]).context(ctx("matrix"))?));

    let s = SubspaceStacking::new(SUBSPACE_DIM).context(ctx("subspace"))?;
    let x: Vec<f64> = (1..=SUBSPACE_DIM).map(|k| 1.0 / (k * k) as f64).collect();
    let tail = |k: usize| x[k..].iter().map(|a| a * a).sum::<f64>().sqrt();
    let ks: Vec<usize> = (1..=SUBSPACE_DIM).collect();
    let tol = ks.iter().map(|&k| tail(k)).collect();
    let seq = ConvergentSequence::approximating(&s, ks.iter().map(|&k| Level::Finite(k)).collect(), Level::Limit, x.clone(), tol)
        .context(ctx("subspace"))?;
    rows.extend(axiom_rows("subspace", SUBSPACE_DIM, &check_stacking_axioms(&s, &[seq]).context(ctx("subspace"))?));

    let s = TlpStacking::new(2.0).context(ctx("TL²"))?;
    let e = dirichlet_family(cfg, false)?;
    let x_inf = sampled(&e.limit_index, |x| (PI * x).sin());
    let tol = e.terms.iter().map(|(mu, _)| 1.0 / mu.len() as f64).collect();
    let seq = ConvergentSequence::approximating(&s, e.indices(), e.limit_index.clone(), x_inf, tol).context(ctx("TL²"))?;
    rows.extend(axiom_rows("tlp", last, &check_stacking_axioms(&s, &[seq]).context(ctx("TL²"))?));

    let levels: Vec<Level> = cfg.sizes.iter().map(|&n| Level::Finite(n)).collect();
    let seq = ConvergentSequence::constant(levels, vec![2.5], Level::Limit, 0.0).context(ctx("circle"))?;
    rows.extend(axiom_rows("circle", last, &check_stacking_axioms(&CircleStacking, &[seq]).context(ctx("circle"))?));
    Ok(rows)
}

fn gamma_rows(cfg: &ExperimentConfig, last: usize) -> Result<Vec<Row>> {
    let s = TlpStacking::new(2.0).context(|| "TL² stacking".into())?;
    let e = dirichlet_family(cfg, false)?;
    let broken = dirichlet_family(cfg, true)?;
    let mut rows = Vec::new();

    // cos(πx) keeps its slope at the boundary, where the graph energies lose
    // the most, so it probes the liminf from below.
    let cos = sampled(&e.limit_index, |x| (PI * x).cos());
    let tol = e.terms.iter().map(|(mu, _)| 1.0 / mu.len() as f64).collect();
    let seq = ConvergentSequence::approximating(&s, e.indices(), e.limit_index.clone(), cos, tol).context(|| "cosine sequence".into())?;
    let r = gamma_liminf_check(&e, &s, &seq, GAMMA_TOLERANCE).context(|| "Γ-liminf".into())?;
    for (&n, v) in cfg.sizes.iter().zip(&r.values) {
        rows.push(Row::record(EXPERIMENT, n, 0.0, "gamma_liminf/value", *v));
    }
    rows.push(Row::check(EXPERIMENT, last, 0.0, "gamma_liminf", r.limit_value - GAMMA_TOLERANCE, r.liminf_estimate, 0.0));

    let r = gamma_liminf_check(&broken, &s, &seq, GAMMA_TOLERANCE).context(|| "broken Γ-liminf".into())?;
    let rhs = r.limit_value - GAMMA_TOLERANCE;
    rows.push(Row::with_pass(EXPERIMENT, last, 0.0, "negative/broken_scaling_liminf", r.liminf_estimate, rhs, !r.ok));

    let sin = sampled(&e.limit_index, |x| (PI * x).sin());
    let r = recovery_sequence(&e, &s, &sin, 0.0).context(|| "recovery sequence".into())?;
    for (&n, d) in cfg.sizes.iter().zip(&r.distances) {
        rows.push(Row::record(EXPERIMENT, n, 0.0, "recovery/distance", *d));
    }
    rows.push(Row::check(EXPERIMENT, last, 0.0, "recovery_limsup", r.limsup_estimate, r.limit_value, 0.0));

    let r = equicoercivity_probe(&e, &s, 1.0, &r.points, Some(&sin), GAMMA_TOLERANCE).context(|| "equicoercivity".into())?;
    rows.push(Row::with_pass(EXPERIMENT, last, 0.0, "equicoercivity/sublevel", r.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0, r.sublevel));
    rows.push(Row::check(EXPERIMENT, last, 0.0, "equicoercivity/cauchy_tail", r.tail_diameter, GAMMA_TOLERANCE, 0.0));
    Ok(rows)
}

fn escaping_rows(cfg: &ExperimentConfig, last: usize) -> Result<Vec<Row>> {
    let s = SubspaceStacking::new(1).context(|| "line".into())?;
    let ctx = || "escaping family".to_string();
    let terms = cfg
        .sizes
        .iter()
        .map(|&n| Ok((Level::Finite(n), zero(1).context(ctx)?)))
        .collect::<Result<_>>()?;
    let e = EnergySequence::new(terms, Level::Limit, zero(1).context(ctx)?).context(ctx)?;
    let escaping: Vec<Vec<f64>> = cfg.sizes.iter().map(|&n| vec![n as f64]).collect();
    let r = equicoercivity_probe(&e, &s, 1.0, &escaping, None, ESCAPE_TOLERANCE).context(ctx)?;
    Ok(vec![Row::with_pass(EXPERIMENT, last, 0.0, "negative/escaping_cauchy_tail", ESCAPE_TOLERANCE, r.tail_diameter, !r.cauchy_tail)])
}

fn minimizer_rows(cfg: &ExperimentConfig, tol: f64) -> Result<Vec<Row>> {
    let s = MatrixHilbertStacking::new(2).context(|| "matrix stacking".into())?;
    let b: [f64; 2] = [1.0, -2.0];
    let bn = (b[0] * b[0] + b[1] * b[1]).sqrt();
    let family = |c: f64| -> gfstack::Result<ProperFunctional> {
        Ok(ProperFunctional::new(2, c, move |x| 0.5 * c * (x[0] * x[0] + x[1] * x[1]) - b[0] * x[0] - b[1] * x[1])?
            .with_gradient(move |x, g| {
                g[0] = c * x[0] - b[0];
                g[1] = c * x[1] - b[1];
            }))
    };
    let ctx = || "inflated quadratics".to_string();
    let terms = cfg
        .sizes
        .iter()
        .map(|&n| Ok((inflated(n).context(ctx)?, family(1.0 + 1.0 / n as f64).context(ctx)?)))
        .collect::<Result<_>>()?;
    let e = EnergySequence::new(terms, SpdMatrix::identity(2).context(ctx)?, family(1.0).context(ctx)?).context(ctx)?;
    let r = minimizer_convergence(&e, &s, tol).context(|| "minimizer convergence".into())?;
    let mut rows = Vec::new();
    for (k, &n) in cfg.sizes.iter().enumerate() {
        rows.push(Row::check(EXPERIMENT, n, 0.0, "minimizers/distance", r.distances[k], bn / n as f64, tol));
        rows.push(Row::check(EXPERIMENT, n, 0.0, "minimizers/value_gap", r.value_gaps[k], bn * bn / n as f64, tol));
    }
    let last = cfg.sizes[cfg.sizes.len() - 1];
    rows.push(Row::record(EXPERIMENT, last, 0.0, "minimizers/lower_bound", r.lower_bound));
    rows.push(Row::record(EXPERIMENT, last, 0.0, "minimizers/spread", r.spread));

    let c = circle_counterexample(&cfg.sizes).context(|| "circle family".into())?;
    for (&n, d) in c.levels.iter().zip(&c.distances) {
        rows.push(Row::record(EXPERIMENT, n, 0.0, "circle/minimizer_distance", *d));
    }
    let d_last = *c.distances.last().expect("sizes are nonempty");
    rows.push(Row::with_pass(
        EXPERIMENT,
        last,
        0.0,
        "negative/circle_minimizers",
        CIRCLE_TOLERANCE,
        d_last,
        !c.minimizers_converge(CIRCLE_TOLERANCE),
    ));
    Ok(rows)
}

pub fn run_stacking_audit(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let last = cfg.sizes[cfg.sizes.len() - 1];
    let mut rows = axioms(cfg, last)?;
    rows.extend(gamma_rows(cfg, last)?);
    rows.extend(escaping_rows(cfg, last)?);
    rows.extend(minimizer_rows(cfg, cfg.tolerance)?);
    Ok(Table::new(rows))
}
