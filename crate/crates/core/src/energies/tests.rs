use gfstack_oracle::{grid_argmin, simpson};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::convex::{check_lambda_convexity, BoxSampler, ProperFunctional};
use crate::linalg::wlr_norm;

fn oracle_bump(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - (2.0 * z - 1.0).powi(2))).exp()
    }
}

fn oracle_step(z: f64) -> f64 {
    let total = simpson(&oracle_bump, 0.0, 1.0, 1e-15);
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        simpson(&oracle_bump, 0.0, z, 1e-15) / total
    }
}

/// `g(x) = ∫₀ˣ g′` with `g′` rebuilt from the defining formula.
fn oracle_g(a: f64, w: f64, s: f64, b: f64, x: f64) -> f64 {
    let gp = |t: f64| s * (oracle_step((t - a) / w) - oracle_step((t - b) / w));
    // Split at the kinks of the piecewise description so no piece is sampled blind.
    let mut knots = vec![0.0, a, a + w, b, b + w, x];
    knots.retain(|k| *k <= x);
    knots.sort_by(f64::total_cmp);
    knots.windows(2).map(|k| simpson(&gp, k[0], k[1], 1e-13)).sum()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, loss: Loss) -> GraphEnergy {
    let a: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n || rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) })
        .collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let s: f64 = w.iter().sum();
    GraphEnergy::new(&a, w.iter().map(|x| x / s).collect(), loss).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

#[test]
fn smooth_step_table_matches_quadrature() {
    for k in 0..=40 {
        let z = k as f64 / 40.0 + 0.003;
        assert!((smooth_step(z) - oracle_step(z)).abs() < 1e-11, "z = {z}");
    }
    assert_eq!(smooth_step(-1.0), 0.0);
    assert_eq!(smooth_step(2.0), 1.0);
    assert!((smooth_step(0.5) - 0.5).abs() < 1e-14);
    assert!((smooth_step_primitive(1.0) - 0.5).abs() < 1e-12);
}

#[test]
fn family_values_match_quadrature() {
    let cases = [(0.1, 0.1, 1.0, Some(0.5)), (0.3, 0.2, 0.7, None), (1.0, 0.5, 1.0, Some(0.2))];
    for (a, w, s, cap) in cases {
        let g = P0TestFunction::new(a, w, s, cap).unwrap();
        let b = match cap {
            Some(c) => a + c / s,
            None => a + w,
        };
        for k in 0..=30 {
            let x = 2.0 * k as f64 / 30.0;
            let exact = oracle_g(a, w, s, b, x);
            assert!((g.eval(x) - exact).abs() < 1e-10, "a={a} x={x}: {} vs {exact}", g.eval(x));
            assert!((g.eval(-x) + exact).abs() < 1e-10);
        }
    }
}

#[test]
fn family_examples() {
    let wide = p0_family(1.0, 50.0, None).unwrap();
    assert_eq!(wide.eval(1.0), 0.0);
    assert_eq!(wide.eval(-1.0), 0.0);

    let g = counterexample_truncation();
    assert_eq!(g.eval(1.0), 0.5);
    assert_eq!(g.eval(-1.0), 0.0);
    assert_eq!(g.eval(0.0), 0.0);
    assert!((g.plateau() - 0.5).abs() < 1e-15);

    assert_eq!(P0TestFunction::zero().eval(3.0), 0.0);
    assert!(P0TestFunction::new(0.1, 0.1, 1.5, None).is_err());
    assert!(p0_family(0.0, 0.1, None).is_err());
    assert!(p0_family(0.1, -1.0, None).is_err());
    assert!(p0_family(0.1, 0.1, Some(0.0)).is_err());
}

#[test]
fn family_invariants_on_a_grid() {
    let gs = [
        p0_family(0.1, 0.1, Some(0.5)).unwrap(),
        p0_family(0.05, 0.3, None).unwrap(),
        P0TestFunction::new(0.2, 0.05, 0.4, Some(2.0)).unwrap().one_sided(),
    ];
    for g in gs {
        let (lo, hi) = g.derivative_support();
        for k in -4000..=4000 {
            let x = k as f64 / 1000.0;
            let d = g.derivative(x);
            assert!((0.0..=1.0).contains(&d));
            let y = g.eval(x);
            assert!(y.abs() <= x.abs() + 1e-15);
            assert!(y * x >= 0.0);
            if x.abs() <= g.dead_zone() {
                assert_eq!(y, 0.0);
            }
            if x.abs() < lo || x.abs() > hi {
                assert_eq!(d, 0.0);
            }
        }
    }
}

#[test]
fn counterexample_at_zero_and_four() {
    let r0 = counterexample_demo(0.0).unwrap();
    assert_eq!(r0.convexity.samples, 1000);
    assert!(r0.convexity.holds());
    assert!((r0.p0.lhs - 2.5).abs() < 1e-12);
    assert!((r0.p0.rhs - 2.0).abs() < 1e-12);
    assert!((r0.p0.slack + 0.5).abs() < 1e-12);
    assert!(r0.demonstrates(1e-9));

    let r4 = counterexample_demo(4.0).unwrap();
    assert!(r4.convexity.holds());
    assert!((r4.p0.lhs - 15.5).abs() < 1e-12);
    assert!((r4.p0.rhs - 14.0).abs() < 1e-12);
    assert!((r4.p0.slack - r4.predicted_slack).abs() < 1e-12);

    let flat = counterexample_demo_with(0.0, &P0TestFunction::zero(), 100, 1).unwrap();
    assert_eq!(flat.p0.slack, 0.0);
    assert!(!flat.demonstrates(1e-9));

    assert!(matches!(counterexample_demo(-1.0), Err(crate::Error::Domain(_))));
}

#[test]
fn counterexample_prox_matches_grid_search() {
    let phi = counterexample_functional(1.5).unwrap();
    let h = [0.7, -1.2];
    let gamma = 0.3;
    let p = crate::convex::prox(&phi, gamma, &h).unwrap();
    let obj = |u: &[f64]| phi.value(u) + 0.25 * ((u[0] - h[0]).powi(2) + (u[1] - h[1]).powi(2)) / gamma;
    let (best, _) = grid_argmin(obj, &[-3.0, -3.0], &[3.0, 3.0], 61, 12);
    assert!((p[0] - best[0]).abs() < 1e-7 && (p[1] - best[1]).abs() < 1e-7);
}

#[test]
fn graph_energies_and_quadratic_are_p0_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gs = [
        p0_family(0.1, 0.1, Some(0.5)).unwrap(),
        p0_family(0.3, 0.5, None).unwrap(),
        P0TestFunction::new(0.05, 0.2, 0.6, Some(1.0)).unwrap().one_sided(),
    ];
    for _ in 0..40 {
        let sq = random_graph(&mut rng, 5, Loss::Squared).functional();
        let ab = random_graph(&mut rng, 5, Loss::Absolute).functional();
        let q = quadratic_p0(vec![0.1, 0.3, 0.2, 0.25, 0.15]).unwrap();
        let u = random_vec(&mut rng, 5, 2.0);
        let v = random_vec(&mut rng, 5, 2.0);
        for g in &gs {
            for phi in [&sq, &ab, &q] {
                let rep = p0_convexity_check(phi, &u, &v, g).unwrap();
                assert!(rep.passes(1e-12 * (1.0 + rep.rhs.abs())), "{} {rep:?}", phi.name());
            }
        }
    }
}

#[test]
fn slack_is_additive_and_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = p0_family(0.1, 0.2, Some(0.7)).unwrap();
    for _ in 0..20 {
        let e1 = random_graph(&mut rng, 4, Loss::Squared);
        let e2 = random_graph(&mut rng, 4, Loss::Absolute);
        let c = rng.gen_range(0.1..5.0);
        let (f1, f2) = (e1.functional(), e2.functional());
        let (a1, a2) = (e1.clone(), e2.clone());
        let sum = ProperFunctional::new(4, 0.0, move |u| a1.value(u) + a2.value(u)).unwrap();
        let scaled = e1.scaled(c).unwrap().functional();
        let u = random_vec(&mut rng, 4, 2.0);
        let v = random_vec(&mut rng, 4, 2.0);
        let s1 = p0_convexity_check(&f1, &u, &v, &g).unwrap().slack;
        let s2 = p0_convexity_check(&f2, &u, &v, &g).unwrap().slack;
        let ss = p0_convexity_check(&sum, &u, &v, &g).unwrap().slack;
        let sc = p0_convexity_check(&scaled, &u, &v, &g).unwrap().slack;
        assert!((ss - (s1 + s2)).abs() < 1e-10);
        assert!((sc - c * s1).abs() < 1e-10 * (1.0 + c));
    }
}

#[test]
fn p0_functionals_pass_convexity_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for loss in [Loss::Squared, Loss::Absolute] {
        let phi = random_graph(&mut rng, 5, loss).functional();
        let rep = check_lambda_convexity(&phi, 0.0, &mut BoxSampler::new(4, -3.0, 3.0), 500).unwrap();
        assert!(rep.holds());
    }
    let q = quadratic_p0(vec![0.5, 0.5]).unwrap();
    assert!(check_lambda_convexity(&q, 0.0, &mut BoxSampler::new(4, -3.0, 3.0), 500).unwrap().holds());
}

#[test]
fn graph_value_examples() {
    let ge = GraphEnergy::new(&[0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0], Loss::Squared).unwrap();
    assert_eq!(ge.value(&[1.0, 0.0]), 2.0);
    assert_eq!(ge.value(&[3.0, 3.0]), 0.0);
    assert!(matches!(
        GraphEnergy::new(&[0.0, -1.0, 1.0, 0.0], vec![1.0, 1.0], Loss::Squared),
        Err(crate::Error::Domain(_))
    ));
}

#[test]
fn two_node_prox() {
    let ge = GraphEnergy::new(&[0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0], Loss::Squared).unwrap();
    let p = graph_prox(&ge, 0.125, &[1.0, 0.0]).unwrap();
    assert!((p[0] - 0.75).abs() < 1e-14 && (p[1] - 0.25).abs() < 1e-14);
    let obj = |u: &[f64]| ge.value(u) + 4.0 * ((u[0] - 1.0).powi(2) + u[1].powi(2));
    let (best, _) = grid_argmin(obj, &[-1.0, -1.0], &[2.0, 2.0], 41, 10);
    assert!((best[0] - 0.75).abs() < 1e-7 && (best[1] - 0.25).abs() < 1e-7);
}

#[test]
fn trivial_proxes() {
    let empty = GraphEnergy::new(&[0.0; 9], vec![1.0; 3], Loss::Absolute).unwrap();
    assert_eq!(graph_prox(&empty, 3.0, &[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for loss in [Loss::Squared, Loss::Absolute] {
        let ge = random_graph(&mut rng, 6, loss);
        let p = graph_prox(&ge, 0.7, &[2.5; 6]).unwrap();
        assert!(p.iter().all(|x| (x - 2.5).abs() < 1e-9));
    }
}

#[test]
fn nonsmooth_prox_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let huber = Loss::Custom(std::sync::Arc::new(HuberLoss { delta: 0.3 }));
    for loss in [Loss::Absolute, huber] {
        for n in 2..=3 {
            for _ in 0..4 {
                let ge = random_graph(&mut rng, n, loss.clone());
                let h = random_vec(&mut rng, n, 1.0);
                let gamma = rng.gen_range(0.1..1.0);
                let p = graph_prox(&ge, gamma, &h).unwrap();
                let w = ge.weights().to_vec();
                let obj = |u: &[f64]| {
                    ge.value(u) + u.iter().zip(&h).zip(&w).map(|((a, b), w)| w * (a - b) * (a - b)).sum::<f64>() / (2.0 * gamma)
                };
                let (best, best_val) = grid_argmin(obj, &vec![-1.5; n], &vec![1.5; n], 31, 14);
                assert!(obj(&p) <= best_val + 1e-9, "{} vs {best_val}", obj(&p));
                let gap = p.iter().zip(&best).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(gap < 1e-5, "n={n}: {p:?} vs {best:?}");
            }
        }
    }
}

#[test]
fn json_round_trip() {
    let ge = GraphEnergy::new(&[0.0, 1.5, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.0], vec![0.2, 0.3, 0.5], Loss::Absolute).unwrap();
    let back = GraphEnergy::from_json(&ge.to_json().unwrap()).unwrap();
    assert_eq!(back.adjacency(), ge.adjacency());
    assert_eq!(back.weights(), ge.weights());
    assert_eq!(back.loss().name(), "absolute");
    assert!(GraphEnergy::from_json(r#"{"n":2,"A":[[0,1]],"weights":[1,1],"loss":"squared"}"#).is_err());
    assert!(GraphEnergy::from_json(r#"{"n":1,"A":[[0]],"weights":[1],"loss":"cubic"}"#).is_err());
    let custom = GraphEnergy::chain(vec![1.0; 3], 1.0, Loss::Custom(std::sync::Arc::new(HuberLoss { delta: 1.0 }))).unwrap();
    assert!(custom.to_json().is_err());
}

#[test]
fn lr_contraction_examples() {
    let ge = GraphEnergy::new(&[0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0], Loss::Squared).unwrap();
    let same = lr_contraction_check(&ge, &[0.3, 0.1], &[0.3, 0.1], 0.5, 2.0, 1e-3).unwrap();
    assert_eq!(same.lhs, 0.0);
    assert!(same.ok);

    // d/dt (u₁ − u₂) = −8(u₁ − u₂), mean preserved.
    let decay = (-4.0f64).exp();
    let exact = [0.5 + 0.5 * decay, 0.5 - 0.5 * decay];
    for r in [1.0, 2.0, 4.0] {
        let rep = lr_contraction_check(&ge, &[1.0, 0.0], &[0.0, 0.0], 0.5, r, 1e-3).unwrap();
        assert!(rep.ok, "{rep:?}");
        let closed = wlr_norm(&[1.0, 1.0], &exact, r);
        assert!((rep.lhs - closed).abs() <= rep.certificate + 1e-12, "{r}: {} vs {closed}", rep.lhs);
        assert!(closed <= rep.rhs + 1e-12);
    }
}

#[test]
fn lr_contraction_on_random_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ge = random_graph(&mut rng, 5, Loss::Squared);
    let x = random_vec(&mut rng, 5, 1.0);
    let y = random_vec(&mut rng, 5, 1.0);
    let reps = lr_contraction_sweep(&ge, &x, &y, 0.3, &[1.0, 3.0, f64::INFINITY], 1e-4).unwrap();
    assert!(reps.iter().all(|r| r.ok), "{reps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncation_shrinks_lp_norms(
        u in prop::collection::vec(-3.0f64..3.0, 1..8),
        a in 0.01f64..1.0,
        w in 0.01f64..1.0,
        cap in prop::option::of(0.05f64..3.0),
        p in prop::sample::select(vec![1.0, 2.0, 3.0, f64::INFINITY]),
    ) {
        let g = p0_family(a, w, cap).unwrap();
        let weights = vec![1.0 / u.len() as f64; u.len()];
        prop_assert!(wlr_norm(&weights, &g.compose(&u), p) <= wlr_norm(&weights, &u, p) + 1e-15);
    }

    #[test]
    fn graph_prox_contracts_lr(seed in any::<u64>(), gamma in 0.05f64..2.0, abs in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loss = if abs { Loss::Absolute } else { Loss::Squared };
        let ge = random_graph(&mut rng, 5, loss);
        let x = random_vec(&mut rng, 5, 2.0);
        let y = random_vec(&mut rng, 5, 2.0);
        let px = graph_prox(&ge, gamma, &x).unwrap();
        let py = graph_prox(&ge, gamma, &y).unwrap();
        let d0: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let d1: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
        let slack = if abs { 1e-8 } else { 1e-12 };
        for r in [1.0, 2.0, 3.0, f64::INFINITY] {
            prop_assert!(wlr_norm(ge.weights(), &d1, r) <= wlr_norm(ge.weights(), &d0, r) + slack);
        }
    }
}
