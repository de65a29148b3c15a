//! Discrete-to-continuum heat flow: graph Dirichlet energies on `n` points
//! against a fine-grid Dirichlet energy on (0, 1).

use std::f64::consts::PI;

use gfstack::energies::{graph_bandwidth, GraphEnergy, Loss};
use gfstack::flow::{gradient_flow_with_budget, metric_derivative, FlowResult};
use gfstack::stacking::{BanachStacking, TlpStacking};
use gfstack::transport::{tlp_distance, EmpiricalMeasure, TLpPoint};
use rand::Rng;
use rayon::prelude::*;

use super::rng_for;
use crate::config::{ExperimentConfig, PointLayout};
use crate::error::{CliError, Context, Result};
use crate::table::{Row, Table};

pub const EXPERIMENT: &str = "d2c";

/// Fine reference size as a multiple of the largest size.
pub const FINE_FACTOR: usize = 8;

/// A-priori step budget per flow segment; larger requests use the doubling
/// route.
pub const FLOW_BUDGET: usize = 1 << 16;

/// Relative tolerance of the metric-derivative lower bound.
pub const DERIVATIVE_TOLERANCE: f64 = 0.05;

/// Required ratio of the last to the first sup distance.
pub const FINAL_RATIO: f64 = 0.25;

/// The initial datum on the continuum.
pub fn initial_datum(x: f64) -> f64 {
    (PI * x).sin()
}

pub(crate) fn graph_on(cfg: &ExperimentConfig, n: usize) -> Result<(EmpiricalMeasure, GraphEnergy)> {
    let ctx = || format!("graph energy on {n} points");
    match cfg.points {
        PointLayout::Equispaced => GraphEnergy::graph_dirichlet(n).context(ctx),
        PointLayout::SeededUniform => {
            let mut rng = rng_for(cfg.seed, &format!("{EXPERIMENT}/{n}"));
            let mut atoms: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            atoms.sort_by(f64::total_cmp);
            let mu = EmpiricalMeasure::uniform(1, atoms).context(ctx)?;
            let eps = graph_bandwidth(n);
            let nf = n as f64;
            let ge = GraphEnergy::epsilon_graph(&mu, eps, nf * nf * eps.powi(3), Loss::Squared).context(ctx)?;
            Ok((mu, ge))
        }
    }
}

struct Level {
    n: usize,
    measure: EmpiricalMeasure,
    energy: GraphEnergy,
    flow: FlowResult,
}

fn flow_level(n: usize, measure: EmpiricalMeasure, energy: GraphEnergy, x0: &[f64], times: &[f64], tol: f64) -> Result<Level> {
    let phi = energy.functional();
    let flow = gradient_flow_with_budget(&phi, x0, times, tol, FLOW_BUDGET).context(|| format!("heat flow on {n} points"))?;
    Ok(Level { n, measure, energy, flow })
}

pub fn run_d2c(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let times = cfg.times();
    if times.len() < 2 {
        return Err(CliError::Config("d2c_heat needs a horizon above 0 and at least 2 grid times".into()));
    }
    let tol = cfg.tolerance;
    let stacking = TlpStacking::new(cfg.p).context(|| "TL^p stacking".into())?;
    let fine_n = FINE_FACTOR * cfg.sizes[cfg.sizes.len() - 1];
    let (fine_mu, fine_energy) = GraphEnergy::grid_dirichlet(fine_n).context(|| "fine grid".into())?;
    let x_inf: Vec<f64> = fine_mu.atoms().iter().map(|&x| initial_datum(x)).collect();

    let mut levels: Vec<Level> = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let (mu, ge) = graph_on(cfg, n)?;
            let x0 = stacking
                .approximate(&mu, &fine_mu, &x_inf)
                .context(|| format!("barycentric projection onto {n} points"))?;
            flow_level(n, mu, ge, &x0, &times, tol)
        })
        .collect::<Result<_>>()?;
    let fine = flow_level(fine_n, fine_mu, fine_energy, &x_inf, &times, tol)?;
    levels.sort_by_key(|l| l.n);

    let mut rows = Vec::new();
    let md_fine = metric_derivative(&fine.flow.trajectory, fine.measure.weights())
        .context(|| "metric derivative of the reference flow".into())?
        .energy;
    rows.push(Row::record(EXPERIMENT, fine_n, cfg.horizon, "metric_derivative", md_fine));

    let mut summary = Vec::new();
    for level in &levels {
        let n = level.n;
        let (mut sup_dist, mut max_gap) = (0.0_f64, 0.0_f64);
        for (k, &t) in times.iter().enumerate() {
            let a = TLpPoint::new(level.measure.clone(), level.flow.trajectory.states[k].clone())
                .context(|| format!("state on {n} points"))?;
            let b = TLpPoint::new(fine.measure.clone(), fine.flow.trajectory.states[k].clone())
                .context(|| "reference state".into())?;
            let d = tlp_distance(&a, &b, cfg.p).context(|| format!("TL^p distance at n = {n}, t = {t}"))?.0;
            let gap = (level.flow.energies[k] - fine.flow.energies[k]).abs();
            sup_dist = sup_dist.max(d);
            max_gap = max_gap.max(gap);
            rows.push(Row::record(EXPERIMENT, n, t, "tl_distance", d));
            rows.push(Row::record(EXPERIMENT, n, t, "energy_gap", gap));
        }
        let md = metric_derivative(&level.flow.trajectory, level.energy.weights())
            .context(|| format!("metric derivative on {n} points"))?
            .energy;
        rows.push(Row::record(EXPERIMENT, n, cfg.horizon, "sup_tl_distance", sup_dist));
        rows.push(Row::record(EXPERIMENT, n, cfg.horizon, "max_energy_gap", max_gap));
        rows.push(Row::record(EXPERIMENT, n, cfg.horizon, "metric_derivative", md));
        rows.push(Row::check(
            EXPERIMENT,
            n,
            cfg.horizon,
            "derivative_lower_bound",
            (1.0 - DERIVATIVE_TOLERANCE) * md_fine,
            md,
            0.0,
        ));
        summary.push((n, sup_dist, max_gap));
    }
    for w in summary.windows(2) {
        let ((_, d0, g0), (n, d1, g1)) = (w[0], w[1]);
        rows.push(Row::with_pass(EXPERIMENT, n, cfg.horizon, "sup_tl_distance_decreases", d1, d0, d1 < d0));
        rows.push(Row::with_pass(EXPERIMENT, n, cfg.horizon, "max_energy_gap_decreases", g1, g0, g1 < g0));
    }
    if let (Some(first), Some(last)) = (summary.first(), summary.last()) {
        if summary.len() > 1 {
            let rhs = FINAL_RATIO * first.1;
            rows.push(Row::with_pass(EXPERIMENT, last.0, cfg.horizon, "final_distance_ratio", last.1, rhs, last.1 < rhs));
        }
    }
    Ok(Table::new(rows))
}
