//! λ-convex functionals, proximal maps and Moreau envelopes.

mod zoo;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, check_finite};
use crate::linalg::{wdist, wnorm};
use crate::{Error, Result};

pub use zoo::*;

pub type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
pub type ProxFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// A map `x ↦ out` applied repeatedly with one fixed step size, so that
/// factorizations can be computed once.
pub type Stepper<'a> = Box<dyn FnMut(&[f64], &mut [f64]) -> Result<()> + Send + 'a>;
pub type StepperFactory = dyn Fn(f64) -> Result<Stepper<'static>> + Send + Sync;

/// A proper, lower semicontinuous, λ-convex functional on a weighted ℝ^d with
/// values in (−∞, +∞].
#[derive(Clone)]
pub struct ProperFunctional {
    name: String,
    dim: usize,
    weights: Vec<f64>,
    lambda: f64,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    smooth: bool,
    prox: Option<Arc<ProxFn>>,
    stepper: Option<Arc<StepperFactory>>,
    domain: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for ProperFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProperFunctional")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lambda", &self.lambda)
            .field("closed_form_prox", &self.prox.is_some())
            .finish()
    }
}

impl ProperFunctional {
    /// A functional with unit weights. `lambda` is its convexity modulus.
    pub fn new(
        dim: usize,
        lambda: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        check_finite("lambda", lambda)?;
        Ok(Self {
            name: "functional".into(),
            dim,
            weights: vec![1.0; dim],
            lambda,
            value: Arc::new(value),
            gradient: None,
            smooth: false,
            prox: None,
            stepper: None,
            domain: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Inner-product weights; the norm becomes `(Σ wᵢ xᵢ²)^{1/2}`.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("weights must be positive and finite".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Partial derivatives of a functional differentiable everywhere.
    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self.smooth = true;
        self
    }

    /// Partial derivatives of the minimal-norm subgradient of a nonsmooth
    /// functional. Only used to bound `inf ‖∂Φ(x)‖`.
    pub fn with_subgradient(
        mut self,
        subgradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(subgradient));
        self.smooth = false;
        self
    }

    /// Closed-form proximal map `(γ, x, out)`.
    pub fn with_prox(
        mut self,
        prox: impl Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    ) -> Self {
        self.prox = Some(Arc::new(prox));
        self
    }

    /// Factory for proximal steppers that reuse work across calls with one γ.
    pub fn with_prox_stepper(
        mut self,
        factory: impl Fn(f64) -> Result<Stepper<'static>> + Send + Sync + 'static,
    ) -> Self {
        self.stepper = Some(Arc::new(factory));
        self
    }

    /// Box used by samplers and brute-force checks.
    pub fn with_domain(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, lo.len())?;
        check_dim(self.dim, hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid("domain box must have lo < hi".into()));
        }
        self.domain = Some((lo, hi));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> Option<(&[f64], &[f64])> {
        self.domain.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    pub fn has_closed_form_prox(&self) -> bool {
        self.prox.is_some() || self.stepper.is_some()
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    /// Raw value; `+∞` outside the effective domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    /// Value with dimension checks; NaN and −∞ are domain errors.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let v = (self.value)(x);
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("{} evaluated to {v}", self.name)));
        }
        Ok(v)
    }

    /// Partial derivatives of the (minimal) subgradient, when supplied.
    pub fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| {
            let mut out = vec![0.0; self.dim];
            g(x, &mut out);
            out
        })
    }

    /// Norm of the gradient in the weighted space, `(Σ gᵢ²/wᵢ)^{1/2}`.
    pub fn subgradient_norm(&self, x: &[f64]) -> Option<f64> {
        self.subgradient(x).map(|g| {
            g.iter()
                .zip(&self.weights)
                .map(|(g, w)| g * g / w)
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        wnorm(&self.weights, x)
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        wdist(&self.weights, x, y)
    }

    /// A proximal map for one fixed γ.
    pub fn prox_stepper(&self, gamma: f64) -> Result<Stepper<'_>> {
        check_step(self.lambda, gamma)?;
        if let Some(factory) = &self.stepper {
            return factory(gamma);
        }
        if let Some(p) = &self.prox {
            let p = Arc::clone(p);
            return Ok(Box::new(move |x, out| p(gamma, x, out)));
        }
        Ok(Box::new(move |x, out| {
            let y = solve_prox(self, gamma, x)?;
            out.copy_from_slice(&y);
            Ok(())
        }))
    }
}

/// Upper end of the admissible step interval for a λ-convex functional:
/// `1/|λ|` when λ < 0, otherwise `+∞`.
pub fn step_upper_bound(lambda: f64) -> f64 {
    if lambda < 0.0 {
        1.0 / -lambda
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_step(lambda: f64, gamma: f64) -> Result<()> {
    let upper = step_upper_bound(lambda);
    if !(gamma > 0.0 && gamma.is_finite() && gamma < upper) {
        return Err(Error::StepSize { step: gamma, upper });
    }
    Ok(())
}

/// `κ(t, λ) = (e^{2λt} − 1)/(2λ)`, with `κ(t, 0) = t`.
pub fn kappa(t: f64, lambda: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("kappa needs t > 0, got {t}")));
    }
    check_finite("lambda", lambda)?;
    let z = 2.0 * lambda * t;
    if z.abs() < 1e-6 {
        let lt = lambda * t;
        return Ok(t * (1.0 + lt + 2.0 / 3.0 * lt * lt + lt * lt * lt / 3.0));
    }
    Ok(z.exp_m1() / (2.0 * lambda))
}

/// Proximal map `argmin_y Φ(y) + ‖y − x‖²/(2γ)`.
pub fn prox(phi: &ProperFunctional, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(phi.dim, x.len())?;
    let mut out = vec![0.0; phi.dim];
    let mut step = phi.prox_stepper(gamma)?;
    step(x, &mut out)?;
    Ok(out)
}

/// Moreau envelope `[Φ]^γ(x) = Φ(J_γ x) + ‖x − J_γ x‖²/(2γ)`.
pub fn moreau_envelope(phi: &ProperFunctional, gamma: f64, x: &[f64]) -> Result<f64> {
    let y = prox(phi, gamma, x)?;
    let d = phi.dist(x, &y);
    Ok(phi.eval(&y)? + d * d / (2.0 * gamma))
}

const PROX_RESIDUAL_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 200;
const SWEEP_MAX: usize = 10_000;

/// Iterative prox for functionals without a closed form: damped Newton when a
/// gradient is available, coordinate descent with golden-section line
/// searches otherwise.
fn solve_prox(phi: &ProperFunctional, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    match (&phi.gradient, phi.smooth) {
        (Some(g), true) => newton_prox(phi, g.as_ref(), gamma, x),
        _ => coordinate_prox(phi, gamma, x),
    }
}

fn prox_objective(phi: &ProperFunctional, gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d = phi.dist(x, y);
    phi.value(y) + d * d / (2.0 * gamma)
}

fn newton_prox(
    phi: &ProperFunctional,
    grad: &GradFn,
    gamma: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let d = phi.dim;
    let w = &phi.weights;
    let full_grad = |y: &[f64], g: &mut [f64]| {
        grad(y, g);
        for i in 0..d {
            g[i] += w[i] * (y[i] - x[i]) / gamma;
        }
    };
    let tol = PROX_RESIDUAL_TOL * (1.0 + phi.norm(x) / gamma);
    let mut y = x.to_vec();
    let mut g = vec![0.0; d];
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut probe = vec![0.0; d];
    for _ in 0..NEWTON_MAX_ITER {
        full_grad(&y, &mut g);
        let res = g.iter().zip(w).map(|(g, w)| g * g / w).sum::<f64>().sqrt();
        if res <= tol {
            return Ok(y);
        }
        let mut h = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            let step = 1e-6 * y[j].abs().max(1.0);
            probe.copy_from_slice(&y);
            probe[j] = y[j] + step;
            full_grad(&probe, &mut gp);
            probe[j] = y[j] - step;
            full_grad(&probe, &mut gm);
            for i in 0..d {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        let rhs = -DVector::from_column_slice(&g);
        let mut shift = 0.0;
        let dir = loop {
            let mut hs = h.clone();
            for i in 0..d {
                hs[(i, i)] += shift * w[i] / gamma;
            }
            if let Some(ch) = hs.cholesky() {
                break ch.solve(&rhs);
            }
            shift = if shift == 0.0 { 1e-8 } else { shift * 10.0 };
            if shift > 1e8 {
                return Err(Error::Singular("prox Newton Hessian".into()));
            }
        };
        let slope: f64 = dir.iter().zip(&g).map(|(p, g)| p * g).sum();
        let f0 = prox_objective(phi, gamma, x, &y);
        let mut t = 1.0;
        loop {
            for i in 0..d {
                probe[i] = y[i] + t * dir[i];
            }
            let f1 = prox_objective(phi, gamma, x, &probe);
            if f1 <= f0 + 1e-4 * t * slope + 1e-14 * f0.abs() {
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NoConvergence { what: "prox Newton line search", iterations: 0 });
            }
        }
        y.copy_from_slice(&probe);
    }
    Err(Error::NoConvergence { what: "prox Newton", iterations: NEWTON_MAX_ITER })
}

fn coordinate_prox(phi: &ProperFunctional, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    let mut f_old = prox_objective(phi, gamma, x, &y);
    for _ in 0..SWEEP_MAX {
        let mut moved = 0.0f64;
        for i in 0..phi.dim {
            let old = y[i];
            let mut probe = y.clone();
            let best = golden_line_min(
                |t| {
                    probe[i] = t;
                    prox_objective(phi, gamma, x, &probe)
                },
                old,
            );
            y[i] = best;
            moved = moved.max((best - old).abs());
        }
        // Line searches on function values resolve a smooth minimizer only to
        // about sqrt(machine epsilon), so that is the stopping scale.
        let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f_new = prox_objective(phi, gamma, x, &y);
        let stalled = f_new >= f_old - 1e-15 * f_old.abs();
        if phi.dim == 1 || moved <= 1e-7 * scale || stalled {
            if !f_new.is_finite() {
                return Err(Error::Domain(format!("prox of {} left the domain", phi.name)));
            }
            return Ok(y);
        }
        f_old = f_new;
    }
    Err(Error::NoConvergence { what: "prox coordinate descent", iterations: SWEEP_MAX })
}

/// Minimize a unimodal function of one variable starting from `t0`.
pub(crate) fn golden_line_min(mut f: impl FnMut(f64) -> f64, t0: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let h = 0.1 * (1.0 + t0.abs());
    let f0 = f(t0);
    let (mut a, mut c);
    let fr = f(t0 + h);
    if fr < f0 {
        let (mut lo, mut mid, mut fm) = (t0, t0 + h, fr);
        let mut step = 2.0 * h;
        loop {
            let next = mid + step;
            let fnext = f(next);
            if !(fnext < fm) {
                a = lo;
                c = next;
                break;
            }
            lo = mid;
            mid = next;
            fm = fnext;
            step *= 2.0;
        }
    } else {
        let fl = f(t0 - h);
        if fl < f0 {
            let (mut hi, mut mid, mut fm) = (t0, t0 - h, fl);
            let mut step = 2.0 * h;
            loop {
                let next = mid - step;
                let fnext = f(next);
                if !(fnext < fm) {
                    a = next;
                    c = hi;
                    break;
                }
                hi = mid;
                mid = next;
                fm = fnext;
                step *= 2.0;
            }
        } else {
            a = t0 - h;
            c = t0 + h;
        }
    }
    let mut p = c - INV_PHI * (c - a);
    let mut q = a + INV_PHI * (c - a);
    let mut fp = f(p);
    let mut fq = f(q);
    while c - a > 1e-13 * (1.0 + a.abs().max(c.abs())) {
        if fp <= fq {
            c = q;
            q = p;
            fq = fp;
            p = c - INV_PHI * (c - a);
            fp = f(p);
        } else {
            a = p;
            p = q;
            fp = fq;
            q = a + INV_PHI * (c - a);
            fq = f(q);
        }
    }
    let mid = 0.5 * (a + c);
    let fm = f(mid);
    if fm <= fp.min(fq) {
        mid
    } else if fp <= fq {
        p
    } else {
        q
    }
}

/// Source of `(x, y, t)` triples for convexity checks.
pub trait TripleSampler {
    /// The next triple, or `None` when the sampler is exhausted.
    fn sample(&mut self, dim: usize) -> Option<(Vec<f64>, Vec<f64>, f64)>;
}

/// Uniform samples from a box with a seeded ChaCha stream.
pub struct BoxSampler {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
}

impl BoxSampler {
    pub fn new(seed: u64, lo: f64, hi: f64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), lo, hi }
    }
}

impl TripleSampler for BoxSampler {
    fn sample(&mut self, dim: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let (lo, hi) = (self.lo, self.hi);
        let x = (0..dim).map(|_| self.rng.gen_range(lo..hi)).collect();
        let y = (0..dim).map(|_| self.rng.gen_range(lo..hi)).collect();
        Some((x, y, self.rng.gen_range(0.0..=1.0)))
    }
}

/// A fixed list of triples.
pub struct FixedTriples {
    triples: std::vec::IntoIter<(Vec<f64>, Vec<f64>, f64)>,
}

impl FixedTriples {
    pub fn new(triples: Vec<(Vec<f64>, Vec<f64>, f64)>) -> Self {
        Self { triples: triples.into_iter() }
    }
}

impl TripleSampler for FixedTriples {
    fn sample(&mut self, _dim: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        self.triples.next()
    }
}

#[derive(Debug, Clone)]
pub struct ConvexityViolation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvexityReport {
    pub samples: usize,
    pub violations: Vec<ConvexityViolation>,
    /// Largest `lhs − rhs` seen over all samples, clamped below at zero.
    pub max_slack_violation: f64,
}

impl ConvexityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `(1−t)Φ(x) + tΦ(y) − (λ/2)t(1−t)‖x−y‖² − Φ((1−t)x + ty)`.
pub fn lambda_convexity_slack(
    phi: &ProperFunctional,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    t: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    let fx = phi.eval(x)?;
    let fy = phi.eval(y)?;
    if fx.is_infinite() || fy.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    let d = phi.dist(x, y);
    let rhs = (1.0 - t) * fx + t * fy - 0.5 * lambda * t * (1.0 - t) * d * d;
    Ok(rhs - phi.eval(&z)?)
}

/// Sample the λ-convexity inequality up to `max_samples` times.
pub fn check_lambda_convexity(
    phi: &ProperFunctional,
    lambda: f64,
    sampler: &mut dyn TripleSampler,
    max_samples: usize,
) -> Result<ConvexityReport> {
    let mut report = ConvexityReport::default();
    while report.samples < max_samples {
        let Some((x, y, t)) = sampler.sample(phi.dim) else { break };
        let slack = lambda_convexity_slack(phi, lambda, &x, &y, t)?;
        report.samples += 1;
        if slack.is_infinite() {
            continue;
        }
        let scale = 1.0 + phi.value(&x).abs() + phi.value(&y).abs();
        if slack < -1e-9 * scale {
            report.max_slack_violation = report.max_slack_violation.max(-slack);
            report.violations.push(ConvexityViolation { x, y, t, slack });
        }
    }
    Ok(report)
}
