use super::*;
use crate::convex::{abs, double_well, huber, quadratic, zero};
use crate::semigroup::{eps_approximate_solution, FnResolvent};
use proptest::prelude::*;

fn e(x: f64) -> f64 {
    x.exp()
}

#[test]
fn quadratic_flow_matches_exponential() {
    let q = quadratic(1.0).unwrap();
    let f = gradient_flow(&q, &[1.0], &[0.0, 1.0], 1e-6).unwrap();
    assert_eq!(f.trajectory.states[0], vec![1.0]);
    assert!((f.trajectory.states[1][0] - e(-1.0)).abs() < 1e-6);
    assert!((f.energies[1] - 0.5 * e(-2.0)).abs() < 1e-6);
    assert!(f.trajectory.error_bounds.as_ref().unwrap()[1] <= 1e-6);
}

#[test]
fn abs_flow_slides_at_unit_speed() {
    let a = abs(1.0).unwrap();
    let f = gradient_flow(&a, &[2.0], &[1.0], 1e-4).unwrap();
    assert!((f.trajectory.states[0][0] - 1.0).abs() < 1e-4);
    assert!((f.energies[0] - 1.0).abs() < 1e-4);
    // Independent oracle: many fixed backward-Euler steps of soft thresholding.
    let r = FnResolvent::new(1, 0.0, |l, x| Ok(vec![x[0].signum() * (x[0].abs() - l).max(0.0)]));
    let part: Vec<f64> = (0..=100_000).map(|i| i as f64 / 100_000.0).collect();
    let oracle = eps_approximate_solution(&r, &part, &[2.0]).unwrap();
    assert!((oracle.states.last().unwrap()[0] - f.trajectory.states[0][0]).abs() < 1e-4);
}

#[test]
fn energy_bound_examples() {
    let q = quadratic(1.0).unwrap();
    let r = energy_bound_check_with_accuracy(&q, &[1.0], 1.0, 1e-7, 0.0).unwrap();
    let gap = 0.5 / e(2.0) * (1.0 - e(-2.0)) / (1.0 + e(-2.0));
    assert!((r.flow_energy - 0.5 * e(-2.0)).abs() < 1e-7);
    assert!((r.envelope_value - 1.0 / (1.0 + e(2.0))).abs() < 1e-12);
    assert!((r.slack - gap).abs() < 1e-7);
    assert!((gap - 0.051535).abs() < 1e-6 && r.ok);
    let h = huber(0.5).unwrap();
    let r = energy_bound_check(&h, &[0.0], 0.7, 1e-7).unwrap();
    assert_eq!(r.slack, 0.0);
}

#[test]
fn decay_examples() {
    let q = quadratic(1.0).unwrap();
    let r = decay_rate_check_with_accuracy(&q, &[1.0], &[0.0], 1.0, 1e-7, 0.0).unwrap();
    assert!((r.lhs - 0.5 * e(-2.0)).abs() < 1e-7);
    assert!((r.rhs - 1.0 / (e(2.0) - 1.0)).abs() < 1e-12);
    assert!((r.rhs - 0.156518).abs() < 1e-6 && r.ok);
    let a = abs(1.0).unwrap();
    let r = decay_rate_check_with_accuracy(&a, &[2.0], &[0.0], 1.0, 1e-6, 0.0).unwrap();
    assert!((r.lhs - 1.0).abs() < 1e-6 && (r.rhs - 2.0).abs() < 1e-12 && r.ok);
    let r = decay_rate_check(&q, &[0.0], &[0.0], 2.0, 1e-7).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(matches!(
        decay_rate_check(&double_well().unwrap(), &[1.0], &[1.0], 1.0, 1e-6),
        Err(Error::Domain(_))
    ));
}

fn grid(t_end: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| t_end * i as f64 / k as f64).collect()
}

#[test]
fn evi_examples() {
    let q = quadratic(1.0).unwrap();
    let f = gradient_flow(&q, &[1.0], &grid(1.0, 20), 1e-7).unwrap();
    let r = evi_residual(&f, &q, &[0.0]).unwrap();
    assert!(r.max_violation <= 1e-8, "{r:?}");
    assert_eq!(r.times.len(), 19);
    let z = zero(2).unwrap();
    let f = gradient_flow(&z, &[1.0, -1.0], &grid(1.0, 5), 1e-7).unwrap();
    let r = evi_residual(&f, &z, &[3.0, 0.0]).unwrap();
    assert!(r.ok());
    assert!(r.residuals.iter().all(|v| *v == 0.0));
    let a = abs(1.0).unwrap();
    let f = gradient_flow(&a, &[2.0], &grid(1.5, 15), 1e-6).unwrap();
    for v in [0.0, 0.5, -1.0] {
        assert!(evi_residual(&f, &a, &[v]).unwrap().ok());
    }
    assert!(evi_residual(&f, &a, &[0.0, 1.0]).is_err());
}

#[test]
fn evi_detects_a_wrong_flow() {
    // Doubling the speed breaks the inequality against v = 0.
    let q = quadratic(1.0).unwrap();
    let mut f = gradient_flow(&q, &[1.0], &grid(1.0, 20), 1e-7).unwrap();
    for (s, &t) in f.trajectory.states.iter_mut().zip(&f.trajectory.times) {
        s[0] = (-0.5 * t).exp();
    }
    assert!(!evi_residual(&f, &q, &[0.0]).unwrap().ok());
}

#[test]
fn metric_derivative_examples() {
    let constant = Trajectory { times: vec![0.0, 0.5, 1.0], states: vec![vec![2.0]; 3], ..Default::default() };
    let m = metric_derivative(&constant, &[1.0]).unwrap();
    assert!(m.speeds.iter().all(|s| *s == 0.0));
    let times = grid(1.0, 100);
    let exp_traj = Trajectory {
        states: times.iter().map(|t| vec![(-t).exp()]).collect(),
        times: times.clone(),
        ..Default::default()
    };
    let m = metric_derivative(&exp_traj, &[1.0]).unwrap();
    assert!((m.energy - (1.0 - e(-2.0)) / 2.0).abs() < 1e-3);
    let line = Trajectory {
        states: times.iter().map(|t| vec![1.0 + 3.0 * t, -4.0 * t]).collect(),
        times,
        ..Default::default()
    };
    let m = metric_derivative(&line, &[1.0, 1.0]).unwrap();
    assert!(m.speeds.iter().all(|s| (s - 5.0).abs() < 1e-9));
}

fn zoo(k: usize) -> ProperFunctional {
    match k % 4 {
        0 => quadratic(0.7).unwrap(),
        1 => abs(1.0).unwrap(),
        2 => huber(0.5).unwrap(),
        _ => double_well().unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energies_do_not_increase(k in 0usize..4, x0 in 0.3f64..2.0, sign in proptest::bool::ANY) {
        let phi = zoo(k);
        let x0 = if sign { x0 } else { -x0 };
        let f = gradient_flow(&phi, &[x0], &grid(1.0, 8), 1e-5).unwrap();
        let slope = phi.subgradient_norm(&[x0]).unwrap().max(1.0) * 3.0;
        for w in f.energies.windows(2) {
            prop_assert!(w[1] <= w[0] + 2e-5 * slope);
        }
        for (en, env) in f.energies.iter().zip(&f.envelope_bounds).skip(1) {
            prop_assert!(*en <= env + 2e-5 * slope);
        }
    }

    #[test]
    fn restart_agrees(k in 0usize..4, x0 in 0.3f64..2.0, t1 in 0.1f64..0.6, t2 in 0.1f64..0.6) {
        let phi = zoo(k);
        let tol = 1e-4;
        let whole = gradient_flow(&phi, &[x0], &[t1 + t2], tol).unwrap();
        let first = gradient_flow(&phi, &[x0], &[t1], tol).unwrap();
        let second = gradient_flow(&phi, &first.trajectory.states[0], &[t2], tol).unwrap();
        let gap = (whole.trajectory.states[0][0] - second.trajectory.states[0][0]).abs();
        let e1 = first.trajectory.error_bounds.unwrap()[0];
        let allowed = whole.trajectory.error_bounds.unwrap()[0]
            + second.trajectory.error_bounds.unwrap()[0]
            + (-phi.lambda() * t2).exp() * e1;
        prop_assert!(gap <= allowed + 1e-12);
    }

    #[test]
    fn flows_contract(k in 0usize..4, x in 0.3f64..2.0, y in -2.0f64..-0.3, t in 0.1f64..1.0) {
        let phi = zoo(k);
        let tol = 1e-4;
        let fx = gradient_flow(&phi, &[x], &[t], tol).unwrap();
        let fy = gradient_flow(&phi, &[y], &[t], tol).unwrap();
        let lhs = (fx.trajectory.states[0][0] - fy.trajectory.states[0][0]).abs();
        let slack = fx.trajectory.error_bounds.unwrap()[0] + fy.trajectory.error_bounds.unwrap()[0];
        prop_assert!(lhs <= (-phi.lambda() * t).exp() * (x - y).abs() + slack + 1e-12);
    }
}

#[test]
fn default_energy_check_resolves_slack_relative() {
    let q = quadratic(1.0).unwrap();
    let gap = 0.5 / e(2.0) * (1.0 - e(-2.0)) / (1.0 + e(-2.0));
    let r = energy_bound_check(&q, &[1.0], 1.0, 1e-9).unwrap();
    assert!((r.slack - gap).abs() <= 2.0 * SLACK_RELATIVE_ACCURACY * gap + 1e-9);
    assert!(r.ok);
}
