//! Resolvent convergence against semigroup convergence over two stackings:
//! the Hilbert spaces `H_{A_n}`, `A_n = (1 + 1/n)I`, and graph heat flows in
//! TL².

use gfstack::convex::ProperFunctional;
use gfstack::energies::GraphEnergy;
use gfstack::flow::gradient_flow;
use gfstack::stacking::{stacking_distance, BanachStacking, MatrixHilbertStacking, SpdMatrix, TlpStacking};
use gfstack::transport::{tlp_distance, TLpPoint};
use rayon::prelude::*;

use super::d2c::{graph_on, initial_datum, FINE_FACTOR};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context, Result};
use crate::table::{Row, Table};

pub const MATRIX_EXPERIMENT: &str = "resolvents_matrix";
pub const HEAT_EXPERIMENT: &str = "resolvents_heat";

/// Curvatures of `Φ(x) = ½ Σ mᵢ xᵢ²`.
pub const CURVATURES: [f64; 2] = [1.0, 3.0];

/// Step sizes at which resolvents are compared.
pub const RESOLVENT_STEPS: [f64; 3] = [0.25, 0.5, 1.0];

/// Step sizes for the heat resolvents.
pub const HEAT_STEPS: [f64; 3] = [0.01, 0.05, 0.25];

/// Initial points of the matrix family.
pub const MATRIX_POINTS: [[f64; 2]; 2] = [[1.0, -0.5], [0.3, 2.0]];

/// Scale of `A_n`; `None` is the limit `A = I`.
pub fn matrix_scale(n: Option<usize>) -> f64 {
    n.map_or(1.0, |n| 1.0 + 1.0 / n as f64)
}

/// `Φ(x) = ½ Σ mᵢ xᵢ²` on `H_{cI}`, whose gradient is `M x / c`.
pub fn matrix_functional(c: f64) -> gfstack::Result<ProperFunctional> {
    let m = CURVATURES;
    let lambda = m.iter().cloned().fold(f64::INFINITY, f64::min) / c;
    Ok(ProperFunctional::new(m.len(), lambda, move |x| 0.5 * x.iter().zip(&m).map(|(a, k)| k * a * a).sum::<f64>())?
        .with_name(format!("quadratic_on_H({c})"))
        .with_weights(vec![c; m.len()])?
        .with_gradient(move |x, g| {
            for i in 0..x.len() {
                g[i] = m[i] * x[i];
            }
        })
        .with_prox(move |gamma, h, out| {
            for i in 0..h.len() {
                out[i] = c * h[i] / (c + gamma * m[i]);
            }
            Ok(())
        }))
}

struct MatrixLevel {
    n: Option<usize>,
    a: SpdMatrix,
    resolvents: Vec<Vec<f64>>,
    flows: Vec<Vec<Vec<f64>>>,
    error: f64,
}

fn matrix_level(n: Option<usize>, times: &[f64], tol: f64) -> Result<MatrixLevel> {
    let c = matrix_scale(n);
    let label = || n.map_or("the limit".to_string(), |n| format!("n = {n}"));
    let phi = matrix_functional(c).context(|| format!("matrix functional at {}", label()))?;
    let a = SpdMatrix::diagonal(vec![c; CURVATURES.len()]).context(|| format!("A at {}", label()))?;
    let mut resolvents = Vec::new();
    for x in &MATRIX_POINTS {
        for &l in &RESOLVENT_STEPS {
            resolvents.push(gfstack::convex::prox(&phi, l, x).context(|| format!("resolvent at {}", label()))?);
        }
    }
    let mut flows = Vec::new();
    let mut error = 0.0_f64;
    for x in &MATRIX_POINTS {
        let f = gradient_flow(&phi, x, times, tol).context(|| format!("flow at {}", label()))?;
        error = error.max(f.trajectory.error_bounds.as_ref().map_or(0.0, |b| b.iter().cloned().fold(0.0, f64::max)));
        flows.push(f.trajectory.states);
    }
    Ok(MatrixLevel { n, a, resolvents, flows, error })
}

fn matrix_rows(cfg: &ExperimentConfig, times: &[f64]) -> Result<Vec<Row>> {
    let s = MatrixHilbertStacking::new(CURVATURES.len()).context(|| "matrix stacking".into())?;
    let tol = cfg.tolerance;
    let limit = matrix_level(None, times, tol)?;
    let levels: Vec<MatrixLevel> =
        cfg.sizes.par_iter().map(|&n| matrix_level(Some(n), times, tol)).collect::<Result<_>>()?;
    let t_end = cfg.horizon;
    let mut rows = Vec::new();
    let mut columns = Vec::new();
    for level in &levels {
        let n = level.n.unwrap_or(0);
        let mut res = 0.0_f64;
        for (k, r) in level.resolvents.iter().enumerate() {
            res = res.max(stacking_distance(&s, &level.a, r, &limit.a, &limit.resolvents[k]).context(|| "resolvent distance".into())?);
        }
        let mut sg = 0.0_f64;
        for (j, states) in level.flows.iter().enumerate() {
            for (k, u) in states.iter().enumerate() {
                let d = stacking_distance(&s, &level.a, u, &limit.a, &limit.flows[j][k]).context(|| "semigroup distance".into())?;
                sg = sg.max(d);
            }
        }
        let solver = level.error + limit.error;
        rows.push(Row::record(MATRIX_EXPERIMENT, n, t_end, "resolvent_distance", res));
        rows.push(Row::record(MATRIX_EXPERIMENT, n, t_end, "semigroup_distance", sg));
        rows.push(Row::record(MATRIX_EXPERIMENT, n, t_end, "solver_tolerance", solver));
        columns.push((n, res, sg, solver));
    }
    for w in columns.windows(2) {
        let ((_, r0, s0, _), (n, r1, s1, _)) = (w[0], w[1]);
        rows.push(Row::with_pass(MATRIX_EXPERIMENT, n, t_end, "resolvent_distance_decreases", r1, r0, r1 < r0));
        rows.push(Row::with_pass(MATRIX_EXPERIMENT, n, t_end, "semigroup_distance_decreases", s1, s0, s1 < s0));
    }
    // C is the least constant covering every level; the per-level ratios show
    // whether it stabilizes.
    let mut c = 0.0_f64;
    for &(n, res, sg, _) in &columns {
        let ratio = if res > 0.0 { sg / res } else { 0.0 };
        rows.push(Row::record(MATRIX_EXPERIMENT, n, t_end, "distance_ratio", ratio));
        c = c.max(ratio);
    }
    let n0 = columns.first().map(|c| c.0).ok_or_else(|| CliError::Config("no sizes".into()))?;
    rows.push(Row::record(MATRIX_EXPERIMENT, n0, t_end, "fitted_constant", c));
    for &(n, res, sg, solver) in &columns {
        rows.push(Row::check(MATRIX_EXPERIMENT, n, t_end, "semigroup_bound", sg, c * res + solver, tol));
    }
    Ok(rows)
}

fn heat_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let s = TlpStacking::new(2.0).context(|| "TL² stacking".into())?;
    let fine_n = FINE_FACTOR * cfg.sizes[cfg.sizes.len() - 1];
    let (fine_mu, fine) = GraphEnergy::grid_dirichlet(fine_n).context(|| "fine grid".into())?;
    let x_inf: Vec<f64> = fine_mu.atoms().iter().map(|&x| initial_datum(x)).collect();
    let limit: Vec<TLpPoint> = HEAT_STEPS
        .iter()
        .map(|&l| {
            let v = fine.prox(l, &x_inf).context(|| "fine resolvent".into())?;
            TLpPoint::new(fine_mu.clone(), v).context(|| "fine resolvent".into())
        })
        .collect::<Result<_>>()?;
    let columns: Vec<(usize, f64)> = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let (mu, ge) = graph_on(cfg, n)?;
            let x0 = s.approximate(&mu, &fine_mu, &x_inf).context(|| format!("projection onto {n} points"))?;
            let mut res = 0.0_f64;
            for (k, &l) in HEAT_STEPS.iter().enumerate() {
                let v = ge.prox(l, &x0).context(|| format!("graph resolvent on {n} points"))?;
                let a = TLpPoint::new(mu.clone(), v).context(|| "graph resolvent".into())?;
                res = res.max(tlp_distance(&a, &limit[k], 2.0).context(|| "TL² distance".into())?.0);
            }
            Ok((n, res))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Row> =
        columns.iter().map(|&(n, r)| Row::record(HEAT_EXPERIMENT, n, 0.0, "resolvent_distance", r)).collect();
    for w in columns.windows(2) {
        let ((_, r0), (n, r1)) = (w[0], w[1]);
        rows.push(Row::with_pass(HEAT_EXPERIMENT, n, 0.0, "resolvent_distance_decreases", r1, r0, r1 < r0));
    }
    Ok(rows)
}

pub fn run_resolvents(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let times = cfg.times();
    let mut rows = matrix_rows(cfg, &times)?;
    rows.extend(heat_rows(cfg)?);
    Ok(Table::new(rows))
}
