//! TL^p distance table, exact solver against permutation enumeration, metric
//! axioms and the interpolation bound on seeded instances.

use gfstack::stacking::{BanachStacking, TlpStacking};
use gfstack::transport::{interpolation_bound_check, tlp_distance, EmpiricalMeasure, TLpPoint};
use gfstack_oracle::assignment_brute_force;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::d2c::{initial_datum, FINE_FACTOR};
use super::rng_for;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::table::{Row, Table};

pub const EXPERIMENT: &str = "tlp";

pub const BRUTE_FORCE_DRAWS: usize = 100;
pub const MAX_ATOMS: usize = 7;
pub const BRUTE_FORCE_EXPONENTS: [f64; 3] = [1.0, 2.0, 3.0];
pub const AXIOM_TRIPLES: usize = 200;
pub const INTERPOLATION_DRAWS: usize = 100;

fn random_point(rng: &mut ChaCha8Rng, k: usize, uniform: bool) -> gfstack::Result<TLpPoint> {
    let atoms: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let values: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mu = if uniform {
        EmpiricalMeasure::uniform(1, atoms)?
    } else {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        EmpiricalMeasure::new(1, atoms, raw.iter().map(|w| w / total).collect())?
    };
    TLpPoint::new(mu, values)
}

/// `|xᵢ − yⱼ|^p + |uᵢ − vⱼ|^p`, built without the solver.
fn tlp_cost(a: &TLpPoint, b: &TLpPoint, p: f64) -> Vec<f64> {
    let (xa, xb) = (a.measure().atoms(), b.measure().atoms());
    let mut c = Vec::with_capacity(xa.len() * xb.len());
    for i in 0..xa.len() {
        for j in 0..xb.len() {
            c.push((xa[i] - xb[j]).abs().powf(p) + (a.values()[i] - b.values()[j]).abs().powf(p));
        }
    }
    c
}

fn distance_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let s = TlpStacking::new(cfg.p).context(|| "TL^p stacking".into())?;
    let fine_n = FINE_FACTOR * cfg.sizes[cfg.sizes.len() - 1];
    let fine = EmpiricalMeasure::midpoint_grid(fine_n).context(|| "fine grid".into())?;
    let x_inf: Vec<f64> = fine.atoms().iter().map(|&x| initial_datum(x)).collect();
    let limit = TLpPoint::new(fine.clone(), x_inf.clone()).context(|| "limit point".into())?;
    let dists: Vec<(usize, f64)> = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let mu = EmpiricalMeasure::midpoint_grid(n).context(|| format!("grid of {n} points"))?;
            let u = s.approximate(&mu, &fine, &x_inf).context(|| format!("projection onto {n} points"))?;
            let a = TLpPoint::new(mu, u).context(|| format!("projection onto {n} points"))?;
            Ok((n, tlp_distance(&a, &limit, cfg.p).context(|| format!("distance at n = {n}"))?.0))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Row> = dists.iter().map(|&(n, d)| Row::record(EXPERIMENT, n, 0.0, "projection_distance", d)).collect();
    for w in dists.windows(2) {
        let ((_, d0), (n, d1)) = (w[0], w[1]);
        rows.push(Row::with_pass(EXPERIMENT, n, 0.0, "projection_distance_decreases", d1, d0, d1 < d0));
    }
    Ok(rows)
}

fn brute_force_rows(rng: &mut ChaCha8Rng, tol: f64) -> Result<Vec<Row>> {
    let draws: Vec<(usize, f64, TLpPoint, TLpPoint)> = (0..BRUTE_FORCE_DRAWS)
        .map(|i| {
            let k = rng.gen_range(1..=MAX_ATOMS);
            let p = BRUTE_FORCE_EXPONENTS[i % BRUTE_FORCE_EXPONENTS.len()];
            let a = random_point(rng, k, true).context(|| "brute-force draw".into())?;
            let b = random_point(rng, k, true).context(|| "brute-force draw".into())?;
            Ok((k, p, a, b))
        })
        .collect::<Result<_>>()?;
    draws
        .par_iter()
        .enumerate()
        .map(|(i, (k, p, a, b))| {
            let d = tlp_distance(a, b, *p).context(|| format!("brute-force draw {i}"))?.0;
            let oracle = assignment_brute_force(&tlp_cost(a, b, *p), *k);
            let metric = format!("brute_force_p{p}/{i:03}");
            Ok(Row::check(EXPERIMENT, *k, 0.0, metric, (d.powf(*p) - oracle).abs(), 0.0, tol))
        })
        .collect()
}

fn axiom_rows(rng: &mut ChaCha8Rng, p: f64, tol: f64) -> Result<Vec<Row>> {
    let triples: Vec<[TLpPoint; 3]> = (0..AXIOM_TRIPLES)
        .map(|_| {
            let mut draw = || {
                let k = rng.gen_range(1..=6);
                random_point(rng, k, false).context(|| "axiom draw".into())
            };
            Ok([draw()?, draw()?, draw()?])
        })
        .collect::<Result<_>>()?;
    let chunks: Vec<Vec<Row>> = triples
        .par_iter()
        .enumerate()
        .map(|(i, [a, b, c])| {
            let d = |x: &TLpPoint, y: &TLpPoint| tlp_distance(x, y, p).map(|r| r.0).context(|| format!("axiom triple {i}"));
            let (ab, ba, bc, ac) = (d(a, b)?, d(b, a)?, d(b, c)?, d(a, c)?);
            let n = a.measure().len();
            Ok(vec![
                Row::check(EXPERIMENT, n, 0.0, format!("symmetry/{i:03}"), (ab - ba).abs(), 0.0, tol),
                Row::check(EXPERIMENT, n, 0.0, format!("triangle/{i:03}"), ac, ab + bc, tol),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn interpolation_rows(rng: &mut ChaCha8Rng, p: f64, q: f64, tol: f64) -> Result<Vec<Row>> {
    let draws: Vec<(f64, TLpPoint, TLpPoint)> = (0..INTERPOLATION_DRAWS)
        .map(|_| {
            let r = p + (q - p) * rng.gen_range(0.0..0.9);
            let (ka, kb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
            let a = random_point(rng, ka, false).context(|| "interpolation draw".into())?;
            let b = random_point(rng, kb, false).context(|| "interpolation draw".into())?;
            Ok((r, a, b))
        })
        .collect::<Result<_>>()?;
    draws
        .par_iter()
        .enumerate()
        .map(|(i, (r, a, b))| {
            // Values lie in [−1, 1], so every L^q norm is at most 1.
            let rep = interpolation_bound_check(a, b, p, q, *r, 1.0).context(|| format!("interpolation draw {i}"))?;
            Ok(Row::check(EXPERIMENT, a.measure().len(), 0.0, format!("interpolation/{i:03}"), rep.lhs, rep.rhs, tol))
        })
        .collect()
}

pub fn run_tlp_table(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let tol = cfg.tolerance;
    let mut rng = rng_for(cfg.seed, EXPERIMENT);
    let mut rows = distance_rows(cfg)?;
    rows.extend(brute_force_rows(&mut rng, tol)?);
    rows.extend(axiom_rows(&mut rng, cfg.p, tol)?);
    rows.extend(interpolation_rows(&mut rng, cfg.p, cfg.q, tol)?);
    Ok(Table::new(rows))
}
