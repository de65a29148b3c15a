//! Finitely supported measures, exact Wasserstein and TL^p distances, and
//! transport-plan diagnostics.

mod simplex;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::wlr_norm;
use crate::{Error, Result};

pub use simplex::{solve_transport, PERTURBATION};

/// Tolerance on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance on plan marginals and recomputed plan costs.
pub const PLAN_TOL: f64 = 1e-9;

/// A probability measure with finitely many atoms in ℝ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// `atoms` is flat, `weights.len() × dim` entries.
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("ambient dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::Invalid("a measure needs at least one atom".into()));
        }
        check_dim(weights.len() * dim, atoms.len())?;
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("atoms must be finite".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("atom weights must be positive".into()));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("weights sum to {mass}, not 1")));
        }
        Ok(Self { dim, atoms, weights })
    }

    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Invalid("atoms of differing dimension".into()));
        }
        Self::new(dim, points.concat(), weights)
    }

    /// Equal weights on the given atoms.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("ambient dimension must be positive".into()));
        }
        let k = atoms.len() / dim;
        Self::new(dim, atoms, vec![1.0 / k as f64; k])
    }

    /// Uniform measure on the cell midpoints `(i + ½)/n` of `(0, 1)`.
    pub fn midpoint_grid(n: usize) -> Result<Self> {
        Self::uniform(1, (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect())
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(point.len(), point, vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A pair `(u, μ)`: a function given by its values on the atoms of `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TLpPoint {
    measure: EmpiricalMeasure,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TLpRecord {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl TLpPoint {
    pub fn new(measure: EmpiricalMeasure, values: Vec<f64>) -> Result<Self> {
        check_dim(measure.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("function values must be finite".into()));
        }
        Ok(Self { measure, values })
    }

    /// Samples `f` at the atoms.
    pub fn sample(measure: EmpiricalMeasure, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..measure.len()).map(|i| f(measure.atom(i))).collect();
        Self::new(measure, values)
    }

    pub fn measure(&self) -> &EmpiricalMeasure {
        &self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `‖u‖_{L^q(μ)}`; `q = ∞` is the maximum over atoms.
    pub fn lq_norm(&self, q: f64) -> f64 {
        wlr_norm(self.measure.weights(), &self.values, q)
    }

    pub fn to_json(&self) -> String {
        let record = TLpRecord {
            dim: self.measure.dim,
            atoms: self.measure.atoms.chunks(self.measure.dim).map(<[f64]>::to_vec).collect(),
            weights: self.measure.weights.clone(),
            values: self.values.clone(),
        };
        serde_json::to_string(&record).expect("plain numeric record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: TLpRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if r.atoms.iter().any(|a| a.len() != r.dim) {
            return Err(Error::Parse(format!("every atom must have {} coordinates", r.dim)));
        }
        let measure = EmpiricalMeasure::new(r.dim, r.atoms.concat(), r.weights)?;
        Self::new(measure, r.values)
    }
}

/// An optimal (or user-supplied) coupling between two finite measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    pi: Vec<f64>,
    source_weights: Vec<f64>,
    target_weights: Vec<f64>,
    costs: Vec<f64>,
    cost: f64,
    stagnation_cost: f64,
}

impl TransportPlan {
    /// Wraps an explicit coupling matrix; marginals are checked to `PLAN_TOL`.
    /// The cost matrix is `|x_i − y_j|^p`.
    pub fn from_matrix(pi: Vec<f64>, source: &EmpiricalMeasure, target: &EmpiricalMeasure, p: f64) -> Result<Self> {
        check_dim(source.dim(), target.dim())?;
        check_exponent(p)?;
        check_dim(source.len() * target.len(), pi.len())?;
        if pi.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("plan entries must be nonnegative".into()));
        }
        let spatial = spatial_powers(source, target, p);
        let plan = Self::assemble(pi, source, target, spatial.clone(), &spatial);
        let err = plan.marginal_error();
        if err > PLAN_TOL {
            return Err(Error::Domain(format!("plan marginals off by {err:e}")));
        }
        Ok(plan)
    }

    /// The identity coupling of a measure with itself.
    pub fn diagonal(mu: &EmpiricalMeasure, p: f64) -> Result<Self> {
        let k = mu.len();
        let mut pi = vec![0.0; k * k];
        for i in 0..k {
            pi[i * k + i] = mu.weights()[i];
        }
        Self::from_matrix(pi, mu, mu, p)
    }

    /// The product coupling `μ ⊗ ν`.
    pub fn product(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<Self> {
        let pi = mu
            .weights()
            .iter()
            .flat_map(|a| nu.weights().iter().map(move |b| a * b))
            .collect();
        Self::from_matrix(pi, mu, nu, p)
    }

    fn assemble(pi: Vec<f64>, source: &EmpiricalMeasure, target: &EmpiricalMeasure, costs: Vec<f64>, spatial: &[f64]) -> Self {
        let cost = pi.iter().zip(&costs).map(|(a, b)| a * b).sum();
        let stagnation_cost = pi.iter().zip(spatial).map(|(a, b)| a * b).sum();
        Self {
            rows: source.len(),
            cols: target.len(),
            pi,
            source_weights: source.weights().to_vec(),
            target_weights: target.weights().to_vec(),
            costs,
            cost,
            stagnation_cost,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }

    /// Row-major coupling matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.pi
    }

    /// Row-major cost matrix the plan was optimised against.
    pub fn cost_matrix(&self) -> &[f64] {
        &self.costs
    }

    /// `Σ πᵢⱼ cᵢⱼ`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `∫ |x − y|^p dπ`.
    pub fn stagnation_cost(&self) -> f64 {
        self.stagnation_cost
    }

    /// Largest deviation of a row or column sum from its marginal weight.
    pub fn marginal_error(&self) -> f64 {
        let row = (0..self.rows).map(|i| {
            let s: f64 = self.pi[i * self.cols..(i + 1) * self.cols].iter().sum();
            (s - self.source_weights[i]).abs()
        });
        let col = (0..self.cols).map(|j| {
            let s: f64 = (0..self.rows).map(|i| self.pi[i * self.cols + j]).sum();
            (s - self.target_weights[j]).abs()
        });
        row.chain(col).fold(0.0, f64::max)
    }

    /// `|Σ πᵢⱼ cᵢⱼ − cost|`, recomputed from the stored matrices.
    pub fn cost_error(&self) -> f64 {
        let s: f64 = self.pi.iter().zip(&self.costs).map(|(a, b)| a * b).sum();
        (s - self.cost).abs()
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Invalid(format!("transport exponent must be finite and at least 1, got {p}")));
    }
    Ok(())
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn pow(d: f64, p: f64) -> f64 {
    if p > 8.0 && d > 0.0 {
        (p * d.ln()).exp()
    } else {
        d.powf(p)
    }
}

fn spatial_distances(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    (0..mu.len())
        .flat_map(|i| (0..nu.len()).map(move |j| euclid(mu.atom(i), nu.atom(j))))
        .collect()
}

fn spatial_powers(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Vec<f64> {
    spatial_distances(mu, nu).into_iter().map(|d| pow(d, p)).collect()
}

/// Solves with costs `Σ_k d_k^p` over the given distance families, rescaling
/// by the largest distance before the powers are taken.
fn solve_scaled(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    families: &[&[f64]],
    p: f64,
) -> Result<(f64, TransportPlan)> {
    let scale = families.iter().flat_map(|f| f.iter()).fold(0.0_f64, |s, d| s.max(*d));
    let unit = if scale > 0.0 { scale } else { 1.0 };
    let k = mu.len() * nu.len();
    let scaled: Vec<f64> = (0..k)
        .map(|c| families.iter().map(|f| (f[c] / unit).powf(p)).sum())
        .collect();
    let pi = solve_transport(&scaled, mu.weights(), nu.weights())?;
    let scaled_cost: f64 = pi.iter().zip(&scaled).map(|(a, b)| a * b).sum();
    let distance = unit * scaled_cost.max(0.0).powf(1.0 / p);

    let raw: Vec<f64> = (0..k).map(|c| families.iter().map(|f| pow(f[c], p)).sum()).collect();
    let spatial: Vec<f64> = families[families.len() - 1].iter().map(|d| pow(*d, p)).collect();
    Ok((distance, TransportPlan::assemble(pi, mu, nu, raw, &spatial)))
}

/// `W_p(μ, ν)` and an optimal plan for the cost `|x − y|^p`.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<(f64, TransportPlan)> {
    check_dim(mu.dim(), nu.dim())?;
    check_exponent(p)?;
    let d = spatial_distances(mu, nu);
    solve_scaled(mu, nu, &[&d], p)
}

/// `d_{TL^p}` and an optimal plan for the cost `|u_i − v_j|^p + |x_i − y_j|^p`.
pub fn tlp_distance(a: &TLpPoint, b: &TLpPoint, p: f64) -> Result<(f64, TransportPlan)> {
    check_dim(a.measure.dim(), b.measure.dim())?;
    check_exponent(p)?;
    let du: Vec<f64> = a
        .values
        .iter()
        .flat_map(|u| b.values.iter().map(move |v| (u - v).abs()))
        .collect();
    let dx = spatial_distances(&a.measure, &b.measure);
    solve_scaled(&a.measure, &b.measure, &[&du, &dx], p)
}

/// Averages `target_values` over the conditional distributions of the plan:
/// `uᵢ = Σⱼ πᵢⱼ vⱼ / Σⱼ πᵢⱼ`.
pub fn barycentric_map(plan: &TransportPlan, target_values: &[f64]) -> Result<Vec<f64>> {
    check_dim(plan.cols, target_values.len())?;
    (0..plan.rows)
        .map(|i| {
            let row = &plan.pi[i * plan.cols..(i + 1) * plan.cols];
            let mass: f64 = row.iter().sum();
            if !(mass > 0.0) || !(plan.source_weights[i] > 0.0) {
                return Err(Error::Domain(format!("source atom {i} carries no mass")));
            }
            Ok(row.iter().zip(target_values).map(|(p, v)| p * v).sum::<f64>() / mass)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationReport {
    pub theta: f64,
    /// `d_{TL^r}`.
    pub lhs: f64,
    /// `d_r(μ, ν) + (2C)^{q(1−θ)/r} · d_{TL^p}^{θp/r}`.
    pub rhs: f64,
    pub ok: bool,
}

/// Interpolation bound between `TL^p`, `TL^r` and `L^q` control, with
/// `θ = (q − r)/(q − p)`.
pub fn interpolation_bound_check(a: &TLpPoint, b: &TLpPoint, p: f64, q: f64, r: f64, c: f64) -> Result<InterpolationReport> {
    check_exponent(p)?;
    if !(q > p) || q.is_nan() {
        return Err(Error::Invalid(format!("need p < q, got p = {p}, q = {q}")));
    }
    if !(r >= p && r < q && r.is_finite()) {
        return Err(Error::Invalid(format!("need p ≤ r < q, got r = {r}")));
    }
    let bound = a.lq_norm(q).max(b.lq_norm(q));
    if !(c >= bound * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!("L^q norms reach {bound}, above the constant C = {c}")));
    }
    let (theta, c_exp) = if q.is_infinite() {
        (1.0, (r - p) / r)
    } else {
        let theta = (q - r) / (q - p);
        (theta, q * (1.0 - theta) / r)
    };
    let lhs = tlp_distance(a, b, r)?.0;
    let wr = wasserstein(&a.measure, &b.measure, r)?.0;
    let dp = tlp_distance(a, b, p)?.0;
    let rhs = wr + (2.0 * c).powf(c_exp) * dp.powf(theta * p / r);
    Ok(InterpolationReport { theta, lhs, rhs, ok: lhs <= rhs + PLAN_TOL })
}

/// A bounded Lipschitz test function `ℝ → ℝ` with declared constants.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz: f64,
    bound: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish()
    }
}

impl TestFunction {
    pub fn new(name: &str, lipschitz: f64, bound: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f), lipschitz, bound }
    }

    /// `x ↦ clamp(x, −c, c)`.
    pub fn clipped_identity(c: f64) -> Self {
        Self::new("clipped identity", 1.0, c, move |x| x.clamp(-c, c))
    }

    /// `x ↦ sin(kx)`.
    pub fn sine(k: f64) -> Self {
        Self::new("sine", k.abs(), 1.0, move |x| (k * x).sin())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `∫ f d(u#μ)`.
    pub fn pushforward_integral(&self, u: &TLpPoint) -> f64 {
        u.measure.weights().iter().zip(&u.values).map(|(w, v)| w * self.eval(*v)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushforwardGap {
    pub index: usize,
    pub function: usize,
    pub gap: f64,
    /// `L · d_{TL^1}` to the limit.
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct PushforwardReport {
    pub gaps: Vec<PushforwardGap>,
    pub within_bound: bool,
    /// Gaps are nonincreasing along the sequence for every test function.
    pub decreasing: bool,
}

impl PushforwardReport {
    pub fn ok(&self) -> bool {
        self.within_bound && self.decreasing
    }

    /// Gaps for one test function, in sequence order.
    pub fn gaps_for(&self, function: usize) -> Vec<f64> {
        self.gaps.iter().filter(|g| g.function == function).map(|g| g.gap).collect()
    }
}

/// Weak convergence of pushforwards `u_n#μ_n → u∞#μ∞` tested against bounded
/// Lipschitz functions.
pub fn pushforward_weak_check(seq: &[TLpPoint], limit: &TLpPoint, test_fns: &[TestFunction]) -> Result<PushforwardReport> {
    let mut gaps = Vec::with_capacity(seq.len() * test_fns.len());
    for (index, point) in seq.iter().enumerate() {
        let d1 = tlp_distance(point, limit, 1.0)?.0;
        for (function, f) in test_fns.iter().enumerate() {
            let gap = (f.pushforward_integral(point) - f.pushforward_integral(limit)).abs();
            gaps.push(PushforwardGap { index, function, gap, bound: f.lipschitz * d1 });
        }
    }
    let slack = |x: f64| PLAN_TOL * (1.0 + x.abs());
    let within_bound = gaps.iter().all(|g| g.gap <= g.bound + slack(g.bound));
    let decreasing = (0..test_fns.len()).all(|f| {
        let series: Vec<f64> = gaps.iter().filter(|g| g.function == f).map(|g| g.gap).collect();
        series.windows(2).all(|w| w[1] <= w[0] + slack(w[0]))
    });
    Ok(PushforwardReport { gaps, within_bound, decreasing })
}
