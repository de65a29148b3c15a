//! Gradient flows of λ-convex functionals as Crandall–Liggett limits of
//! proximal steps.

use crate::convex::{kappa, moreau_envelope, ProperFunctional, Stepper};
use crate::error::check_dim;
use crate::linalg::wdist;
use crate::semigroup::{crandall_liggett_with_budget, ResolventOperator, Trajectory, APRIORI_BUDGET};
use crate::{Error, Result};

/// The resolvent `R_γ(∂^λΦ) = J_γ(Φ)`, an ω-accretive operator with ω = −λ.
#[derive(Debug, Clone)]
pub struct ProxResolvent {
    phi: ProperFunctional,
}

impl ProxResolvent {
    pub fn new(phi: ProperFunctional) -> Self {
        Self { phi }
    }

    pub fn functional(&self) -> &ProperFunctional {
        &self.phi
    }
}

impl ResolventOperator for ProxResolvent {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn omega(&self) -> f64 {
        -self.phi.lambda()
    }

    fn weights(&self) -> &[f64] {
        self.phi.weights()
    }

    fn resolve(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        crate::convex::prox(&self.phi, lambda, x)
    }

    fn stepper(&self, lambda: f64) -> Result<Stepper<'_>> {
        self.phi.prox_stepper(lambda)
    }

    fn in_domain_closure(&self, x: &[f64]) -> bool {
        self.phi.value(x).is_finite()
    }

    fn exact_inf_norm(&self, x: &[f64]) -> Option<f64> {
        self.phi.subgradient_norm(x)
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub trajectory: Trajectory,
    /// `Φ(u(t))` per time.
    pub energies: Vec<f64>,
    /// `[Φ]^{κ(t,λ)}(x₀)` per time; `Φ(x₀)` at `t = 0`.
    pub envelope_bounds: Vec<f64>,
    pub lambda: f64,
    pub x0: Vec<f64>,
    pub weights: Vec<f64>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Invalid("time grid is empty".into()));
    }
    if times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Invalid("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("times must be strictly increasing".into()));
    }
    Ok(())
}

/// The gradient flow of `phi` from `x0`, sampled at `times` with total
/// deviation at most `tol` per time.
///
/// Consecutive times are bridged by one Crandall–Liggett call each, and errors
/// are propagated with the contraction factor `e^{−λΔt}`.
pub fn gradient_flow(phi: &ProperFunctional, x0: &[f64], times: &[f64], tol: f64) -> Result<FlowResult> {
    gradient_flow_with_budget(phi, x0, times, tol, APRIORI_BUDGET)
}

/// [`gradient_flow`] with an explicit a-priori step budget per segment.
pub fn gradient_flow_with_budget(
    phi: &ProperFunctional,
    x0: &[f64],
    times: &[f64],
    tol: f64,
    budget: usize,
) -> Result<FlowResult> {
    check_dim(phi.dim(), x0.len())?;
    check_times(times)?;
    let r = ProxResolvent::new(phi.clone());
    if !r.in_domain_closure(x0) {
        return Err(Error::Domain("x0 is outside the domain of the functional".into()));
    }
    let segments = times.iter().filter(|t| **t > 0.0).count().max(1);
    let seg_tol = tol / segments as f64;
    let omega = r.omega();
    let mut traj = Trajectory { certified: true, ..Default::default() };
    let mut bounds = Vec::with_capacity(times.len());
    let mut state = x0.to_vec();
    let (mut err, mut t_prev, mut steps) = (0.0, 0.0, 0usize);
    for &t in times {
        if t > t_prev {
            let dt = t - t_prev;
            let (next, cert) = crandall_liggett_with_budget(&r, dt, &state, seg_tol, budget)?;
            err = (omega * dt).exp() * err + cert.bound;
            steps += cert.steps;
            traj.certified &= cert.certified;
            state = next;
            t_prev = t;
        }
        traj.times.push(t);
        traj.states.push(state.clone());
        traj.steps.push(steps);
        bounds.push(err);
    }
    traj.error_bounds = Some(bounds);
    let energies = traj.states.iter().map(|s| phi.eval(s)).collect::<Result<Vec<_>>>()?;
    let envelope_bounds = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                phi.eval(x0)
            } else {
                moreau_envelope(phi, kappa(t, phi.lambda())?, x0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowResult {
        trajectory: traj,
        energies,
        envelope_bounds,
        lambda: phi.lambda(),
        x0: x0.to_vec(),
        weights: phi.weights().to_vec(),
    })
}

/// Energy error per unit of flow error: `max(1, ‖∂Φ(x₀)‖)·e^{max(−λ,0)t}`.
fn energy_slope(phi: &ProperFunctional, x0: &[f64], t: f64) -> f64 {
    let growth = (-phi.lambda()).max(0.0) * t;
    phi.subgradient_norm(x0).unwrap_or(1.0).max(1.0) * growth.exp()
}

/// Flow accuracy that keeps the induced energy error below `tol`.
fn flow_tolerance(phi: &ProperFunctional, x0: &[f64], t: f64, tol: f64) -> f64 {
    tol / (10.0 * energy_slope(phi, x0, t))
}

/// Relative accuracy at which a slack is resolved without further refinement.
pub const SLACK_RELATIVE_ACCURACY: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct EnergyBoundReport {
    pub t: f64,
    pub kappa: f64,
    pub flow_energy: f64,
    pub envelope_value: f64,
    /// `envelope_value − flow_energy`.
    pub slack: f64,
    pub flow_error: f64,
    pub certified: bool,
    pub ok: bool,
}

/// `Φ(u(t)) ≤ [Φ]^{κ(t,λ)}(x₀)`, accepted when the slack is at least `−tol`.
///
/// The flow is refined until the induced energy error is below `tol/10` or
/// below [`SLACK_RELATIVE_ACCURACY`] times the slack, so large slacks are
/// settled on coarse flows.
pub fn energy_bound_check(phi: &ProperFunctional, x0: &[f64], t: f64, tol: f64) -> Result<EnergyBoundReport> {
    energy_bound_check_with_accuracy(phi, x0, t, tol, SLACK_RELATIVE_ACCURACY)
}

/// [`energy_bound_check`] with an explicit relative slack accuracy; `0`
/// always refines to `tol/10`.
pub fn energy_bound_check_with_accuracy(
    phi: &ProperFunctional,
    x0: &[f64],
    t: f64,
    tol: f64,
    relative: f64,
) -> Result<EnergyBoundReport> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("energy bound needs t > 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (flow, flow_error) = refined_flow(phi, x0, t, tol, relative, |f| f.envelope_bounds[0] - f.energies[0])?;
    let flow_energy = flow.energies[0];
    let envelope_value = flow.envelope_bounds[0];
    let slack = envelope_value - flow_energy;
    Ok(EnergyBoundReport {
        t,
        kappa: kappa(t, phi.lambda())?,
        flow_energy,
        envelope_value,
        slack,
        flow_error,
        certified: flow.trajectory.certified,
        ok: slack >= -tol,
    })
}

/// Flow to time `t`, tightened by factors of 16 until the energy error is
/// below `tol/10` or `relative·|slack(flow)|`.
fn refined_flow(
    phi: &ProperFunctional,
    x0: &[f64],
    t: f64,
    tol: f64,
    relative: f64,
    slack: impl Fn(&FlowResult) -> f64,
) -> Result<(FlowResult, f64)> {
    let slope = energy_slope(phi, x0, t);
    let finest = flow_tolerance(phi, x0, t, tol);
    let mut flow_tol = (relative / slope).max(finest);
    loop {
        let flow = gradient_flow(phi, x0, &[t], flow_tol)?;
        let flow_error = flow.trajectory.error_bounds.as_ref().unwrap()[0];
        let energy_error = slope * flow_error;
        let resolved = energy_error <= tol / 10.0 || energy_error <= relative * slack(&flow).abs();
        if resolved || flow_tol <= finest {
            return Ok((flow, flow_error));
        }
        flow_tol = (flow_tol / 16.0).max(finest);
    }
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub ok: bool,
}

/// `Φ(u(t)) − Φ(x) ≤ ‖x₀ − x‖²/(2κ(t,λ))` for λ ≥ 0.
pub fn decay_rate_check(phi: &ProperFunctional, x0: &[f64], x: &[f64], t: f64, tol: f64) -> Result<DecayReport> {
    decay_rate_check_with_accuracy(phi, x0, x, t, tol, SLACK_RELATIVE_ACCURACY)
}

/// [`decay_rate_check`] with an explicit relative slack accuracy.
pub fn decay_rate_check_with_accuracy(
    phi: &ProperFunctional,
    x0: &[f64],
    x: &[f64],
    t: f64,
    tol: f64,
    relative: f64,
) -> Result<DecayReport> {
    if phi.lambda() < 0.0 {
        return Err(Error::Domain(format!("decay rate needs λ ≥ 0, got {}", phi.lambda())));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("decay rate needs t > 0, got {t}")));
    }
    check_dim(phi.dim(), x.len())?;
    let base = phi.eval(x)?;
    let d = phi.dist(x0, x);
    let rhs = d * d / (2.0 * kappa(t, phi.lambda())?);
    let (flow, _) = refined_flow(phi, x0, t, tol, relative, |f| rhs - (f.energies[0] - base))?;
    let lhs = flow.energies[0] - base;
    Ok(DecayReport { lhs, rhs, slack: rhs - lhs, ok: lhs <= rhs + tol })
}

#[derive(Debug, Clone)]
pub struct EviReport {
    /// Interior times at which the inequality was evaluated.
    pub times: Vec<f64>,
    /// `½ d/dt‖u−v‖² + ½λ‖u−v‖² + Φ(u) − Φ(v)` by central differences.
    pub residuals: Vec<f64>,
    /// Discretization allowance per time.
    pub tolerances: Vec<f64>,
    /// `max(0, residual − tolerance)` over the grid.
    pub max_violation: f64,
}

impl EviReport {
    pub fn ok(&self) -> bool {
        self.max_violation == 0.0
    }
}

/// Divided differences of order three of `(t, q)` scaled to estimate `|q'''|`.
fn third_derivative_bound(t: &[f64], q: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..t.len().saturating_sub(3) {
        let d1: Vec<f64> = (k..k + 3).map(|i| (q[i + 1] - q[i]) / (t[i + 1] - t[i])).collect();
        let d2: Vec<f64> = (0..2).map(|i| (d1[i + 1] - d1[i]) / (t[k + i + 2] - t[k + i])).collect();
        let d3 = (d2[1] - d2[0]) / (t[k + 3] - t[k]);
        m = m.max(6.0 * d3.abs());
    }
    m
}

fn second_derivative_bound(t: &[f64], q: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..t.len().saturating_sub(2) {
        let a = (q[k + 1] - q[k]) / (t[k + 1] - t[k]);
        let b = (q[k + 2] - q[k + 1]) / (t[k + 2] - t[k + 1]);
        m = m.max(2.0 * (b - a).abs() / (t[k + 2] - t[k]));
    }
    m
}

/// Residual of the evolution variational inequality against the comparison
/// point `v` at the interior times of a computed flow.
///
/// The allowance at each time covers the central-difference truncation error
/// (estimated from second and third divided differences, doubled) and the
/// propagated solver error of the flow.
pub fn evi_residual(flow: &FlowResult, phi: &ProperFunctional, v: &[f64]) -> Result<EviReport> {
    let tr = &flow.trajectory;
    if tr.len() < 3 {
        return Err(Error::Invalid("EVI residual needs at least 3 times".into()));
    }
    check_dim(phi.dim(), v.len())?;
    let fv = phi.eval(v)?;
    let w = &flow.weights;
    let t = &tr.times;
    let q: Vec<f64> = tr.states.iter().map(|u| wdist(w, u, v).powi(2)).collect();
    let errs = tr.error_bounds.clone().unwrap_or_else(|| vec![0.0; t.len()]);
    let m2 = second_derivative_bound(t, &q);
    let m3 = third_derivative_bound(t, &q);
    let mut report = EviReport { times: vec![], residuals: vec![], tolerances: vec![], max_violation: 0.0 };
    for k in 1..t.len() - 1 {
        let (hm, hp) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        let dq = (q[k + 1] - q[k - 1]) / (hp + hm);
        let u = &tr.states[k];
        let dist = q[k].sqrt();
        let residual = 0.5 * dq + 0.5 * flow.lambda * q[k] + phi.eval(u)? - fv;
        let truncation = 0.5 * ((hp - hm).abs() / 2.0 * m2 + hp * hm / 6.0 * m3);
        let e = errs[k - 1].max(errs[k]).max(errs[k + 1]);
        let dq_err = 2.0 * (2.0 * (dist + 1.0) * e + e * e) / (hp + hm);
        let slope = phi.subgradient_norm(u).unwrap_or_else(|| {
            let a = &tr.states[k - 1];
            let step = wdist(w, a, u);
            if step > 0.0 {
                (phi.value(a) - phi.value(u)).abs() / step
            } else {
                0.0
            }
        });
        let allowance = 2.0 * truncation
            + 0.5 * dq_err
            + 0.5 * flow.lambda.abs() * (2.0 * dist * e + e * e)
            + slope * e
            + 1e-12 * (1.0 + fv.abs() + q[k]);
        report.times.push(t[k]);
        report.residuals.push(residual);
        report.tolerances.push(allowance);
        report.max_violation = report.max_violation.max(residual - allowance);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MetricDerivative {
    /// `‖u(t_{k+1}) − u(t_k)‖/(t_{k+1} − t_k)` per interval.
    pub speeds: Vec<f64>,
    /// `Σ speed_k² (t_{k+1} − t_k)`, the quadrature of `∫|u'|²` with the
    /// speed held constant on each interval.
    pub energy: f64,
}

/// Discrete metric derivative of a trajectory in the weighted norm.
pub fn metric_derivative(traj: &Trajectory, weights: &[f64]) -> Result<MetricDerivative> {
    if traj.len() < 2 {
        return Err(Error::Invalid("metric derivative needs at least 2 times".into()));
    }
    let mut speeds = Vec::with_capacity(traj.len() - 1);
    let mut energy = 0.0;
    for k in 0..traj.len() - 1 {
        let h = traj.times[k + 1] - traj.times[k];
        let s = wdist(weights, &traj.states[k], &traj.states[k + 1]) / h;
        energy += s * s * h;
        speeds.push(s);
    }
    Ok(MetricDerivative { speeds, energy })
}

#[cfg(test)]
mod tests;
