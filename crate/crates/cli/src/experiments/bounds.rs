//! Energy bound, decay rate and Crandall–Liggett rows over the functional zoo.

use gfstack::convex::{
    abs, anisotropic_quadratic, double_well, huber, interval_indicator, l1, quadratic, shifted_quadratic, ProperFunctional,
};
use gfstack::energies::{counterexample_functional, GraphEnergy, Loss};
use gfstack::flow::{decay_rate_check, energy_bound_check, energy_bound_check_with_accuracy};
use gfstack::semigroup::{cl_apriori_bound, resolvent_iterate, FnResolvent};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::rng_for;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::table::{Row, Table};

pub const EXPERIMENT: &str = "bounds";

/// Starting points per functional.
pub const STARTS: usize = 4;

/// Time of the small-t row at which the envelope approaches `Φ(x₀)`.
pub const SHORT_TIME: f64 = 1e-4;

struct Entry {
    label: String,
    phi: ProperFunctional,
    starts: Vec<Vec<f64>>,
}

/// Random graph energy with about half the edges present, weights `1/n`.
pub(crate) fn random_graph(rng: &mut ChaCha8Rng, n: usize, loss: Loss) -> gfstack::Result<GraphEnergy> {
    let a: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n || rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    GraphEnergy::new(&a, vec![1.0 / n as f64; n], loss)
}

fn zoo(cfg: &ExperimentConfig) -> Result<Vec<Entry>> {
    let mut rng = rng_for(cfg.seed, EXPERIMENT);
    let ctx = || "building the functional zoo".to_string();
    let mut phis: Vec<(String, ProperFunctional)> = Vec::new();
    for lambda in [-0.5, 0.0, 1.0, 2.0] {
        phis.push((format!("quadratic_l{lambda}"), quadratic(lambda).context(ctx)?));
    }
    phis.push(("shifted_quadratic".into(), shifted_quadratic(1.5, vec![0.5, -0.25]).context(ctx)?));
    phis.push(("anisotropic_quadratic".into(), anisotropic_quadratic(vec![0.5, 3.0]).context(ctx)?));
    phis.push(("abs".into(), abs(1.0).context(ctx)?));
    phis.push(("l1".into(), l1(2, 0.5).context(ctx)?));
    phis.push(("huber".into(), huber(0.5).context(ctx)?));
    phis.push(("double_well".into(), double_well().context(ctx)?));
    phis.push(("interval_indicator".into(), interval_indicator(-1.0, 1.0).context(ctx)?));
    for lambda in [0.0, 4.0] {
        phis.push((format!("counterexample_l{lambda}"), counterexample_functional(lambda).context(ctx)?));
    }
    for &n in &cfg.sizes {
        for (name, loss) in [("squared", Loss::Squared), ("absolute", Loss::Absolute)] {
            let ge = random_graph(&mut rng, n, loss).context(ctx)?;
            phis.push((format!("graph_{name}"), ge.functional()));
        }
    }
    Ok(phis
        .into_iter()
        .map(|(label, phi)| {
            let r = if label == "interval_indicator" { 1.0 } else { 2.0 };
            let starts = (0..STARTS).map(|_| (0..phi.dim()).map(|_| rng.gen_range(-r..r)).collect()).collect();
            Entry { label, phi, starts }
        })
        .collect())
}

/// Positive sampled times `T·k/m`, `k = 1..m`.
pub fn bound_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let m = cfg.time_grid;
    (1..=m).map(|k| cfg.horizon * k as f64 / m as f64).collect()
}

fn energy_rows(e: &Entry, times: &[f64], tol: f64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (k, x0) in e.starts.iter().enumerate() {
        for &t in times {
            let r = energy_bound_check(&e.phi, x0, t, tol)
                .context(|| format!("energy bound for {} from start {k} at t = {t}", e.label))?;
            let metric = format!("energy_bound/{}/x{k}", e.label);
            rows.push(Row::check(EXPERIMENT, e.phi.dim(), t, metric, r.flow_energy, r.envelope_value, tol));
        }
        if e.phi.lambda() >= 0.0 {
            let t = times[times.len() - 1];
            let target = vec![0.0; e.phi.dim()];
            let r = decay_rate_check(&e.phi, x0, &target, t, tol)
                .context(|| format!("decay rate for {} from start {k}", e.label))?;
            rows.push(Row::check(EXPERIMENT, e.phi.dim(), t, format!("decay_rate/{}/x{k}", e.label), r.lhs, r.rhs, tol));
        }
    }
    Ok(rows)
}

fn anchor_rows(tol: f64) -> Result<Vec<Row>> {
    let q = quadratic(1.0).context(|| "quadratic".into())?;
    let mut rows = Vec::new();
    for t in [1.0, SHORT_TIME] {
        let r = energy_bound_check_with_accuracy(&q, &[1.0], t, tol, 0.0).context(|| format!("quadratic anchor at t = {t}"))?;
        rows.push(Row::check(EXPERIMENT, 1, t, "energy_bound_anchor", r.flow_energy, r.envelope_value, tol));
        rows.push(Row::record(EXPERIMENT, 1, t, "energy_bound_anchor_slack", r.slack));
    }
    // R^n_{t/n} for A = I against e^{−t}, with the a-priori bound at ω = −1.
    let lin = FnResolvent::scalar_linear(1, 1.0);
    for n in [100usize, 1000] {
        for t in [0.5, 1.0] {
            let u = resolvent_iterate(&lin, t, n, &[1.0]).context(|| format!("resolvent iterate n = {n}"))?;
            let err = (u[0] - (-t).exp()).abs();
            let bound = cl_apriori_bound(t, n, 1.0, -1.0);
            rows.push(Row::check(EXPERIMENT, n, t, "crandall_liggett", err, bound, tol));
        }
    }
    Ok(rows)
}

pub fn run_bound_suite(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let times = bound_times(cfg);
    let entries = zoo(cfg)?;
    let tol = cfg.tolerance;
    let chunks: Vec<Vec<Row>> = entries.par_iter().map(|e| energy_rows(e, &times, tol)).collect::<Result<_>>()?;
    let mut rows: Vec<Row> = chunks.into_iter().flatten().collect();
    rows.extend(anchor_rows(tol)?);
    Ok(Table::new(rows))
}
