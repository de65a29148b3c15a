//! Nonlinear semigroups of ω-accretive operators through their resolvents.

use std::sync::Arc;

use crate::convex::Stepper;
use crate::error::check_dim;
use crate::linalg::{wdist, wnorm};
use crate::{Error, Result};

/// Largest number of resolvent applications a single call may spend.
pub const STEP_CAP: usize = 1 << 30;

/// Largest step count for which the a-priori route is taken; beyond it the
/// doubling route is usually far cheaper.
pub const APRIORI_BUDGET: usize = 1 << 22;

/// Upper end of `𝔍_ω`: `1/ω` when ω > 0, otherwise `+∞`.
pub fn admissible_upper(omega: f64) -> f64 {
    if omega > 0.0 {
        1.0 / omega
    } else {
        f64::INFINITY
    }
}

fn check_admissible(omega: f64, lambda: f64) -> Result<()> {
    let upper = admissible_upper(omega);
    if !(lambda > 0.0 && lambda.is_finite() && lambda < upper) {
        return Err(Error::StepSize { step: lambda, upper });
    }
    Ok(())
}

/// An ω-accretive operator `A` on a weighted ℝ^d, known through its resolvent
/// `R_λ(A) = (I + λA)⁻¹`.
pub trait ResolventOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Accretivity modulus: `A + ωI` is accretive.
    fn omega(&self) -> f64;

    /// Inner-product weights of the underlying space.
    fn weights(&self) -> &[f64];

    fn resolve(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>>;

    /// `R_λ` for one fixed λ, reusing any per-λ setup.
    fn stepper(&self, lambda: f64) -> Result<Stepper<'_>> {
        check_admissible(self.omega(), lambda)?;
        Ok(Box::new(move |x, out| {
            out.copy_from_slice(&self.resolve(lambda, x)?);
            Ok(())
        }))
    }

    /// Membership in the closure of `D(A)`.
    fn in_domain_closure(&self, _x: &[f64]) -> bool {
        true
    }

    /// `inf ‖A(x)‖` when known exactly.
    fn exact_inf_norm(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn norm(&self, x: &[f64]) -> f64 {
        wnorm(self.weights(), x)
    }

    fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        wdist(self.weights(), x, y)
    }
}

/// How `inf ‖A(x)‖` entering a certificate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfNormSource {
    Exact,
    /// `‖x − R_{λ₀}x‖/λ₀`, a Yosida-approximation estimate.
    Yosida,
}

/// `inf ‖A(x)‖`, exact when the operator knows it, otherwise the Yosida
/// estimate at `λ₀ = 1e−4 · min(width of 𝔍_ω, 1)`.
pub fn inf_norm(r: &dyn ResolventOperator, x: &[f64]) -> Result<(f64, InfNormSource)> {
    if let Some(v) = r.exact_inf_norm(x) {
        return Ok((v, InfNormSource::Exact));
    }
    let l0 = 1e-4 * admissible_upper(r.omega()).min(1.0);
    let y = r.resolve(l0, x)?;
    Ok((r.dist(x, &y) / l0, InfNormSource::Yosida))
}

/// Closure-backed [`ResolventOperator`].
#[derive(Clone)]
pub struct FnResolvent {
    dim: usize,
    omega: f64,
    weights: Vec<f64>,
    resolve: Arc<dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync>,
    domain: Option<Arc<dyn Fn(&[f64]) -> bool + Send + Sync>>,
    inf_norm: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl FnResolvent {
    pub fn new(
        dim: usize,
        omega: f64,
        resolve: impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            omega,
            weights: vec![1.0; dim],
            resolve: Arc::new(resolve),
            domain: None,
            inf_norm: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("weights must be positive and finite".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_domain_closure(mut self, f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(f));
        self
    }

    pub fn with_inf_norm(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.inf_norm = Some(Arc::new(f));
        self
    }

    /// Resolvent of the linear operator `A x = c x`, which is `(−c)`-accretive.
    pub fn scalar_linear(dim: usize, c: f64) -> Self {
        Self::new(dim, -c, move |l, x| Ok(x.iter().map(|v| v / (1.0 + l * c)).collect()))
            .with_inf_norm(move |x| c.abs() * x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Resolvent of `A ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 0.0, |_, x| Ok(x.to_vec())).with_inf_norm(|_| 0.0)
    }
}

impl ResolventOperator for FnResolvent {
    fn dim(&self) -> usize {
        self.dim
    }

    fn omega(&self) -> f64 {
        self.omega
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn resolve(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_admissible(self.omega, lambda)?;
        check_dim(self.dim, x.len())?;
        (self.resolve)(lambda, x)
    }

    fn in_domain_closure(&self, x: &[f64]) -> bool {
        self.domain.as_ref().map_or(true, |f| f(x))
    }

    fn exact_inf_norm(&self, x: &[f64]) -> Option<f64> {
        self.inf_norm.as_ref().map(|f| f(x))
    }
}

/// Time-stamped states of a discretized flow.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Deviation bounds from the exact semigroup, one per time.
    pub error_bounds: Option<Vec<f64>>,
    /// Resolvent applications spent per time.
    pub steps: Vec<usize>,
    /// Whether every error bound is an a-priori certificate.
    pub certified: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `R_{t/n}^n x`.
pub fn resolvent_iterate(r: &dyn ResolventOperator, t: f64, n: usize, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(r.dim(), x.len())?;
    if n == 0 {
        return Err(Error::Invalid("resolvent_iterate needs n ≥ 1".into()));
    }
    if !r.in_domain_closure(x) {
        return Err(Error::Domain("initial point is outside the closure of D(A)".into()));
    }
    let mut step = r.stepper(t / n as f64)?;
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..n {
        step(&cur, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// A-priori Crandall–Liggett bound `(2t/√n)·inf‖A(x)‖·e^{4ωt}`.
pub fn cl_apriori_bound(t: f64, n: usize, inf_norm: f64, omega: f64) -> f64 {
    2.0 * t / (n as f64).sqrt() * inf_norm * (4.0 * omega * t).exp()
}

/// Modulus of continuity `2|t−τ|·inf‖A(x)‖·(e^{4ωt} + e^{2ω(t+τ)})`.
pub fn continuity_modulus(t: f64, tau: f64, inf_norm: f64, omega: f64) -> f64 {
    2.0 * (t - tau).abs() * inf_norm * ((4.0 * omega * t).exp() + (2.0 * omega * (t + tau)).exp())
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// Bound on `‖S(t)x − returned point‖`.
    pub bound: f64,
    /// True when `bound` is the a-priori estimate. On the doubling route the
    /// bound is `tol`, twice the last successive difference.
    pub certified: bool,
    pub steps: usize,
    pub inf_norm: f64,
    pub inf_norm_source: InfNormSource,
    /// `‖R^{2n} x − R^n x‖` along the doubling route.
    pub doubling_history: Vec<f64>,
}

/// Approximate `S_A(t)x` to accuracy `tol`.
///
/// The a-priori bound is evaluated with `max(ω, 0)` in the exponent: for
/// ω < 0 the operator is also 0-accretive, and the bound with a negative ω
/// in the exponent fails for small `n` (e.g. `A x = x`, `t = 1`, `n = 4`).
/// When the required `n` exceeds [`APRIORI_BUDGET`], the step count is
/// doubled until successive iterates agree to `tol/2` and the result is
/// flagged as uncertified.
pub fn crandall_liggett(r: &dyn ResolventOperator, t: f64, x: &[f64], tol: f64) -> Result<(Vec<f64>, Certificate)> {
    crandall_liggett_with_budget(r, t, x, tol, APRIORI_BUDGET)
}

/// [`crandall_liggett`] with an explicit a-priori step budget (at most
/// [`STEP_CAP`]).
pub fn crandall_liggett_with_budget(
    r: &dyn ResolventOperator,
    t: f64,
    x: &[f64],
    tol: f64,
    budget: usize,
) -> Result<(Vec<f64>, Certificate)> {
    let budget = budget.min(STEP_CAP);
    check_dim(r.dim(), x.len())?;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if !r.in_domain_closure(x) {
        return Err(Error::Domain("initial point is outside the closure of D(A)".into()));
    }
    let (inf, source) = inf_norm(r, x)?;
    if t == 0.0 {
        let cert = Certificate {
            bound: 0.0,
            certified: true,
            steps: 0,
            inf_norm: inf,
            inf_norm_source: source,
            doubling_history: vec![],
        };
        return Ok((x.to_vec(), cert));
    }
    let omega = r.omega();
    let n_min = if omega > 0.0 { (t * omega).floor() as usize + 1 } else { 1 };
    let omega_plus = omega.max(0.0);
    let needed = if inf == 0.0 {
        1.0
    } else {
        (2.0 * t * inf * (4.0 * omega_plus * t).exp() / tol).powi(2).ceil()
    };
    if needed <= budget as f64 {
        let mut n = (needed as usize).max(n_min);
        while n > 1 && cl_apriori_bound(t, n - 1, inf, omega_plus) <= tol && n - 1 >= n_min {
            n -= 1;
        }
        while cl_apriori_bound(t, n, inf, omega_plus) > tol {
            n += 1;
        }
        let point = resolvent_iterate(r, t, n, x)?;
        let cert = Certificate {
            bound: cl_apriori_bound(t, n, inf, omega_plus),
            certified: true,
            steps: n,
            inf_norm: inf,
            inf_norm_source: source,
            doubling_history: vec![],
        };
        return Ok((point, cert));
    }
    let mut n = n_min;
    let mut prev = resolvent_iterate(r, t, n, x)?;
    let mut history = Vec::new();
    loop {
        if 2 * n > STEP_CAP {
            return Err(Error::CapExceeded { cap: STEP_CAP });
        }
        let next = resolvent_iterate(r, t, 2 * n, x)?;
        let diff = r.dist(&prev, &next);
        history.push(diff);
        n *= 2;
        if diff <= tol / 2.0 {
            let cert = Certificate {
                bound: tol,
                certified: false,
                steps: n,
                inf_norm: inf,
                inf_norm_source: source,
                doubling_history: history,
            };
            return Ok((next, cert));
        }
        prev = next;
    }
}

/// `v₀ = x`, `vᵢ = R_{tᵢ − tᵢ₋₁} vᵢ₋₁` on a partition starting at 0.
pub fn eps_approximate_solution(r: &dyn ResolventOperator, partition: &[f64], x: &[f64]) -> Result<Trajectory> {
    check_dim(r.dim(), x.len())?;
    if partition.first() != Some(&0.0) {
        return Err(Error::Invalid("partition must start at 0".into()));
    }
    let mut traj = Trajectory { times: vec![0.0], states: vec![x.to_vec()], steps: vec![0], ..Default::default() };
    let mut cur = x.to_vec();
    for w in partition.windows(2) {
        let h = w[1] - w[0];
        if !(h > 0.0) {
            return Err(Error::Invalid("partition must be strictly increasing".into()));
        }
        cur = r.resolve(h, &cur)?;
        traj.times.push(w[1]);
        traj.states.push(cur.clone());
        traj.steps.push(traj.steps.last().unwrap() + 1);
    }
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct AccretivityViolation {
    pub pair: (usize, usize),
    pub lambda: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AccretivityReport {
    pub checked: usize,
    pub violations: Vec<AccretivityViolation>,
}

impl AccretivityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `‖x − x̂ + λ(y − ŷ)‖ ≥ (1 − λω)‖x − x̂‖` over all pairs of graph
/// samples `(x, y)`, `y ∈ A(x)`, in the weighted norm.
pub fn check_accretive(
    samples: &[(Vec<f64>, Vec<f64>)],
    omega: f64,
    lambdas: &[f64],
    weights: &[f64],
) -> Result<AccretivityReport> {
    for &l in lambdas {
        check_admissible(omega, l)?;
    }
    let mut report = AccretivityReport::default();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let (x, y) = &samples[i];
            let (xh, yh) = &samples[j];
            let dx: Vec<f64> = x.iter().zip(xh).map(|(a, b)| a - b).collect();
            let dy: Vec<f64> = y.iter().zip(yh).map(|(a, b)| a - b).collect();
            let base = wnorm(weights, &dx);
            for &l in lambdas {
                let comb: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a + l * b).collect();
                let slack = wnorm(weights, &comb) - (1.0 - l * omega) * base;
                report.checked += 1;
                if slack < -1e-12 * (1.0 + base) {
                    report.violations.push(AccretivityViolation { pair: (i, j), lambda: l, slack });
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Sum of the two solver bounds, allowed as slack.
    pub solver_tolerance: f64,
    pub certified: bool,
    pub ok: bool,
}

/// `‖S(t)x − S(t)y‖ ≤ e^{ωt}‖x − y‖`, both flows by [`crandall_liggett`].
pub fn semigroup_contraction_check(
    r: &dyn ResolventOperator,
    t: f64,
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<ContractionReport> {
    let (sx, cx) = crandall_liggett(r, t, x, tol)?;
    let (sy, cy) = crandall_liggett(r, t, y, tol)?;
    let lhs = r.dist(&sx, &sy);
    let rhs = (r.omega() * t).exp() * r.dist(x, y);
    let solver_tolerance = cx.bound + cy.bound;
    Ok(ContractionReport {
        lhs,
        rhs,
        solver_tolerance,
        certified: cx.certified && cy.certified,
        ok: lhs <= rhs + solver_tolerance + 1e-12,
    })
}
