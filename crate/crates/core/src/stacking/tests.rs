use std::f64::consts::PI;

use gfstack_oracle::assignment_brute_force;
use proptest::prelude::*;

use super::*;
use crate::convex::{shifted_quadratic, zero, ProperFunctional};
use crate::energies::GraphEnergy;
use crate::transport::TLpPoint;

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn levels() -> Vec<Level> {
    DEFAULT_LEVELS.iter().map(|&n| Level::Finite(n)).collect()
}

fn inflated(n: usize, d: usize) -> SpdMatrix {
    SpdMatrix::identity(d).unwrap().scaled(1.0 + 1.0 / n as f64).unwrap()
}

#[test]
fn matrix_distance_examples() {
    let s = MatrixHilbertStacking::new(2).unwrap();
    let id = SpdMatrix::identity(2).unwrap();
    let d = stacking_distance(&s, &id, &[1.0, 2.0], &id, &[-2.0, 6.0]).unwrap();
    assert!((d - 5.0).abs() < 1e-14);

    let a = SpdMatrix::diagonal(vec![4.0, 1.0]).unwrap();
    let d = stacking_distance(&s, &a, &[1.0, 0.0], &a, &[0.0, 0.0]).unwrap();
    assert!((d - 2.0).abs() < 1e-14);
}

#[test]
fn matrix_square_root_matches_quadratic_form() {
    let a = SpdMatrix::new(3, vec![4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]).unwrap();
    let x = [0.3, -1.2, 0.7];
    let rr = a.sqrt_apply(&a.sqrt_apply(&x));
    let direct: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a.entries()[i * 3 + j] * x[j]).sum()).collect();
    for (p, q) in rr.iter().zip(&direct) {
        assert!((p - q).abs() < 1e-12);
    }
    let s = MatrixHilbertStacking::new(3).unwrap();
    let form: f64 = direct.iter().zip(&x).map(|(p, q)| p * q).sum();
    assert!((s.norm(&a, &x).unwrap() - form.sqrt()).abs() < 1e-12);
    assert!((euclid(&s.embed(&a, &x).unwrap()) - form.sqrt()).abs() < 1e-12);
}

#[test]
fn matrix_validation() {
    assert!(matches!(SpdMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]), Err(Error::Invalid(_))));
    assert!(matches!(SpdMatrix::diagonal(vec![1.0, 1e-13]), Err(Error::Domain(_))));
    assert!(matches!(SpdMatrix::diagonal(vec![1.0, -1.0]), Err(Error::Domain(_))));
    assert!(SpdMatrix::new(2, vec![1.0; 3]).is_err());
    let s = MatrixHilbertStacking::new(2).unwrap();
    let a3 = SpdMatrix::identity(3).unwrap();
    assert!(stacking_distance(&s, &a3, &[0.0; 3], &a3, &[0.0; 3]).is_err());
}

#[test]
fn tlp_distance_example() {
    let s = TlpStacking::new(1.0).unwrap();
    let mu = EmpiricalMeasure::uniform(1, vec![0.0, 1.0]).unwrap();
    let d = stacking_distance(&s, &mu, &[0.0, 1.0], &mu, &[1.0, 0.0]).unwrap();
    // |u_i − v_j| + |x_i − y_j| over both permutations.
    let cost = [1.0, 1.0, 1.0, 1.0];
    assert!((d - assignment_brute_force(&cost, 2)).abs() < 1e-12);
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn subspace_levels_and_truncation() {
    let s = SubspaceStacking::new(3).unwrap();
    assert_eq!(s.dim(&Level::Finite(2)).unwrap(), 2);
    assert_eq!(s.dim(&Level::Finite(7)).unwrap(), 3);
    assert_eq!(s.dim(&Level::Limit).unwrap(), 3);
    assert!(s.dim(&Level::Finite(0)).is_err());
    let a = s.approximate(&Level::Finite(2), &Level::Limit, &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(a, vec![1.0, 2.0]);
    let d = stacking_distance(&s, &Level::Finite(2), &a, &Level::Limit, &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(d, 3.0);
}

#[test]
fn circle_geometry() {
    let s = CircleStacking;
    assert_eq!(CircleStacking::angle(0.0), PI);
    let d = |x: f64, y: f64| stacking_distance(&s, &Level::Limit, &[x], &Level::Limit, &[y]).unwrap();
    assert!(d(0.0, 0.0).abs() < 1e-15);
    // Far out on either side the images approach the same point 1 ∈ S¹.
    assert!(d(1e6, -1e6) < 1e-6);
    assert!((d(1e6, 0.0) - 1.0).abs() < 1e-6);
    // ξ is 1-Lipschitz: θ′(x) = π/(1+x²)^{3/2} ≤ π.
    for (x, y) in [(0.0, 0.1), (-3.0, 2.0), (0.5, 0.51)] {
        assert!(d(x, y) <= (x - y).abs() + 1e-15);
    }
}

#[test]
fn matrix_family_passes_axioms_with_closed_form_norms() {
    let s = MatrixHilbertStacking::new(2).unwrap();
    let x = vec![0.6, -0.8];
    let ns = DEFAULT_LEVELS;
    let indices: Vec<SpdMatrix> = ns.iter().map(|&n| inflated(n, 2)).collect();
    let tol: Vec<f64> = ns.iter().map(|&n| euclid(&x) / n as f64).collect();
    let seq = ConvergentSequence::new(indices.clone(), vec![x.clone(); ns.len()], SpdMatrix::identity(2).unwrap(), x.clone(), tol)
        .unwrap();
    let report = check_stacking_axioms(&s, &[seq]).unwrap();
    assert!(report.holds(), "{report:?}");
    let r = &report.sequences[0];
    for (k, &n) in ns.iter().enumerate() {
        let expected = ((1.0 + 1.0 / n as f64).sqrt() - 1.0) * euclid(&x);
        assert!((r.norm_gaps[k] - expected).abs() < 1e-14);
        assert!((r.embedded[k] - expected).abs() < 1e-14);
        assert!((s.norm(&indices[k], &x).unwrap() - (1.0 + 1.0 / n as f64).sqrt()).abs() < 1e-14);
    }
}

#[test]
fn constant_sequences_pass_in_every_instance() {
    let m = MatrixHilbertStacking::new(2).unwrap();
    let a = SpdMatrix::diagonal(vec![2.0, 0.5]).unwrap();
    let seq = ConvergentSequence::constant(vec![a.clone(); 3], vec![1.0, -1.0], a, 0.0).unwrap();
    assert!(check_stacking_axioms(&m, &[seq]).unwrap().holds());

    let sub = SubspaceStacking::new(3).unwrap();
    let seq = ConvergentSequence::constant(vec![Level::Finite(3), Level::Finite(5)], vec![1.0, 2.0, 3.0], Level::Limit, 0.0).unwrap();
    assert!(check_stacking_axioms(&sub, &[seq]).unwrap().holds());

    let t = TlpStacking::new(2.0).unwrap();
    let mu = EmpiricalMeasure::midpoint_grid(5).unwrap();
    let seq = ConvergentSequence::constant(vec![mu.clone(); 2], vec![0.1, 0.4, -0.2, 0.0, 1.0], mu, 0.0).unwrap();
    assert!(check_stacking_axioms(&t, &[seq]).unwrap().holds());

    let seq = ConvergentSequence::constant(levels(), vec![2.5], Level::Limit, 0.0).unwrap();
    assert!(check_stacking_axioms(&CircleStacking, &[seq]).unwrap().holds());
}

#[test]
fn subspace_truncations_converge_at_the_tail_norm() {
    let s = SubspaceStacking::new(8).unwrap();
    let x: Vec<f64> = (1..=8).map(|k| 1.0 / (k * k) as f64).collect();
    let ks: Vec<usize> = (1..=8).collect();
    let tol: Vec<f64> = ks.iter().map(|&k| euclid(&x[k..])).collect();
    let seq = ConvergentSequence::approximating(&s, ks.iter().map(|&k| Level::Finite(k)).collect(), Level::Limit, x.clone(), tol.clone())
        .unwrap();
    let report = check_stacking_axioms(&s, &[seq]).unwrap();
    assert!(report.holds(), "{report:?}");
    for (d, t) in report.sequences[0].embedded.iter().zip(&tol) {
        assert!((d - t).abs() < 1e-15);
    }
}

#[test]
fn wrong_limit_fails_axioms() {
    let s = MatrixHilbertStacking::new(2).unwrap();
    let ns = DEFAULT_LEVELS;
    let seq = ConvergentSequence::new(
        ns.iter().map(|&n| inflated(n, 2)).collect(),
        vec![vec![1.0, 0.0]; ns.len()],
        SpdMatrix::identity(2).unwrap(),
        vec![0.0, 1.0],
        ns.iter().map(|&n| 1.0 / n as f64).collect(),
    )
    .unwrap();
    let report = check_stacking_axioms(&s, &[seq]).unwrap();
    assert!(report.lipschitz() && report.approximation() && report.norms());
    assert!(!report.algebra());
}

fn fine_grid() -> (EmpiricalMeasure, GraphEnergy) {
    GraphEnergy::grid_dirichlet(256).unwrap()
}

fn sampled(mu: &EmpiricalMeasure, f: impl Fn(f64) -> f64) -> Vec<f64> {
    mu.atoms().iter().map(|&x| f(x)).collect()
}

#[test]
fn tlp_barycentric_sequence_converges_at_rate_one_over_n() {
    let s = TlpStacking::new(2.0).unwrap();
    let (fine, _) = fine_grid();
    let ns = [4, 8, 16, 32];
    let measures: Vec<EmpiricalMeasure> = ns.iter().map(|&n| EmpiricalMeasure::midpoint_grid(n).unwrap()).collect();
    let tol: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let seq = ConvergentSequence::approximating(&s, measures, fine.clone(), sampled(&fine, |x| x), tol).unwrap();
    let report = check_stacking_axioms(&s, &[seq]).unwrap();
    assert!(report.holds(), "{report:?}");
    let gaps = &report.sequences[0].norm_gaps;
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

fn dirichlet_family(scale_by_n: bool) -> EnergySequence<EmpiricalMeasure> {
    let (fine, fe) = fine_grid();
    let terms = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let (mu, ge) = GraphEnergy::graph_dirichlet(n).unwrap();
            let ge = if scale_by_n { ge.scaled(1.0 / n as f64).unwrap() } else { ge };
            (mu, ge.functional())
        })
        .collect();
    EnergySequence::new(terms, fine, fe.functional()).unwrap()
}

fn barycentric_sequence(e: &EnergySequence<EmpiricalMeasure>, s: &TlpStacking, x_inf: &[f64]) -> ConvergentSequence<EmpiricalMeasure> {
    let tol = e.terms.iter().map(|(mu, _)| 1.0 / mu.len() as f64).collect();
    ConvergentSequence::approximating(s, e.indices(), e.limit_index.clone(), x_inf.to_vec(), tol).unwrap()
}

#[test]
fn dirichlet_liminf_holds_and_broken_scaling_fails() {
    let s = TlpStacking::new(2.0).unwrap();
    let e = dirichlet_family(false);
    let x_inf = sampled(&e.limit_index, |x| (PI * x).cos());
    let seq = barycentric_sequence(&e, &s, &x_inf);
    // σπ²/2 up to the fine-grid discretization.
    let r = gamma_liminf_check(&e, &s, &seq, 0.05).unwrap();
    assert!((r.limit_value - PI * PI / 12.0).abs() < 1e-4, "{r:?}");
    assert!(r.ok, "{r:?}");
    assert!(r.distances.windows(2).all(|w| w[1] < w[0]));

    let broken = dirichlet_family(true);
    let r = gamma_liminf_check(&broken, &s, &seq, 0.05).unwrap();
    assert!(!r.ok, "{r:?}");
    assert!(r.liminf_estimate < 0.1 * r.limit_value);
}

#[test]
fn constant_family_liminf_is_exact() {
    let s = MatrixHilbertStacking::new(2).unwrap();
    let id = SpdMatrix::identity(2).unwrap();
    let phi = shifted_quadratic(1.0, vec![1.0, 0.0]).unwrap();
    let e = EnergySequence::new(vec![(id.clone(), phi.clone()); 4], id.clone(), phi).unwrap();
    let x_inf = vec![0.5, 0.5];
    let points = (1..=4).map(|k| vec![0.5 - 1.0 / k as f64, 0.5]).collect();
    let seq = ConvergentSequence::new(vec![id.clone(); 4], points, id, x_inf, vec![1.0; 4]).unwrap();
    let r = gamma_liminf_check(&e, &s, &seq, 0.0).unwrap();
    assert!(r.ok);
    assert_eq!(r.limit_value, 0.25);
    // Tail half is k ∈ {3, 4}.
    assert!((r.liminf_estimate - 0.5 * ((0.5 - 0.25 - 1.0_f64).powi(2) + 0.25)).abs() < 1e-15);
}

#[test]
fn recovery_sequences() {
    let s = TlpStacking::new(2.0).unwrap();
    let e = dirichlet_family(false);
    let x_inf = sampled(&e.limit_index, |x| (PI * x).sin());
    let r = recovery_sequence(&e, &s, &x_inf, 0.0).unwrap();
    assert!(r.ok, "{r:?}");
    assert!(r.distances.windows(2).all(|w| w[1] < w[0]));

    let mu = EmpiricalMeasure::midpoint_grid(6).unwrap();
    let phi = GraphEnergy::grid_dirichlet(6).unwrap().1.functional();
    let e = EnergySequence::new(vec![(mu.clone(), phi.clone()); 3], mu.clone(), phi).unwrap();
    let x = sampled(&mu, |t| t * t);
    let r = recovery_sequence(&e, &s, &x, 0.0).unwrap();
    for p in &r.points {
        for (a, b) in p.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    assert_eq!(r.limsup_estimate, r.limit_value);
    assert!(r.ok);

    let nonneg = ProperFunctional::new(6, 0.0, |x| if x.iter().all(|v| *v >= 0.0) { 0.0 } else { f64::INFINITY }).unwrap();
    let e = EnergySequence::new(vec![(mu.clone(), nonneg.clone()); 2], mu, nonneg).unwrap();
    let r = recovery_sequence(&e, &s, &[-1.0; 6], 0.0).unwrap();
    assert_eq!(r.limit_value, f64::INFINITY);
    assert!(r.ok);
}

#[test]
fn equicoercivity_evidence() {
    let s = SubspaceStacking::new(1).unwrap();
    let terms: Vec<(Level, ProperFunctional)> = levels().into_iter().map(|n| (n, zero(1).unwrap())).collect();
    let e = EnergySequence::new(terms, Level::Limit, zero(1).unwrap()).unwrap();

    let constant = vec![vec![0.3]; 5];
    let r = equicoercivity_probe(&e, &s, 1.0, &constant, Some(&[0.3]), 1e-9).unwrap();
    assert!(r.sublevel && r.cauchy_tail);
    assert_eq!(r.clusters.len(), 1);
    assert_eq!(r.best_cluster_limit, 4);
    assert!(r.limit_distances.unwrap().iter().all(|d| *d == 0.0));

    // Escaping sequence n·e₁ with Φ_n ≡ 0.
    let escaping: Vec<Vec<f64>> = DEFAULT_LEVELS.iter().map(|&n| vec![n as f64]).collect();
    let r = equicoercivity_probe(&e, &s, 1.0, &escaping, None, 1e-3).unwrap();
    assert!(r.sublevel);
    assert!(!r.cauchy_tail);
    assert_eq!(r.clusters.len(), 5);
    assert_eq!(r.tail_diameter, 48.0);
    for i in 0..5 {
        for j in 0..5 {
            let expected = (DEFAULT_LEVELS[i] as f64 - DEFAULT_LEVELS[j] as f64).abs();
            assert_eq!(r.pairwise_distance_matrix[i][j], expected);
        }
    }
}

#[test]
fn bounded_dirichlet_sequence_has_cauchy_tail() {
    let s = TlpStacking::new(2.0).unwrap();
    let e = dirichlet_family(false);
    let x_inf = sampled(&e.limit_index, |x| (PI * x).sin());
    let seq = barycentric_sequence(&e, &s, &x_inf);
    let r = equicoercivity_probe(&e, &s, 1.0, &seq.points, Some(&x_inf), 0.05).unwrap();
    assert!(r.sublevel, "{:?}", r.values);
    assert!(r.cauchy_tail, "{}", r.tail_diameter);
    let d = r.limit_distances.unwrap();
    assert!(d.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn circle_minimizers_escape() {
    assert_eq!(circle_energy(8, 8.0), 0.0);
    assert_eq!(circle_energy(8, 0.0), 0.125);
    let r = circle_counterexample(&DEFAULT_LEVELS).unwrap();
    assert!(r.minima.iter().all(|v| *v == 0.0));
    assert!(!r.minimizers_converge(0.5));
    // d(ξ(n), ξ(0)) = n/√(1+n²) → 1.
    for (&n, d) in r.levels.iter().zip(&r.distances) {
        let n = n as f64;
        assert!((d - n / (1.0 + n * n).sqrt()).abs() < 1e-12);
    }
    // The images do form a Cauchy sequence on the circle.
    assert!(r.tail_diameter < 5e-3);
    assert!(circle_counterexample(&[]).is_err());
}

#[test]
fn minimizers_converge_for_inflated_quadratics() {
    let s = MatrixHilbertStacking::new(2).unwrap();
    let b = [1.0, -2.0];
    let family = |c: f64| {
        let b1 = b;
        let b2 = b;
        ProperFunctional::new(2, c, move |x| 0.5 * c * (x[0] * x[0] + x[1] * x[1]) - b1[0] * x[0] - b1[1] * x[1])
            .unwrap()
            .with_gradient(move |x, g| {
                g[0] = c * x[0] - b2[0];
                g[1] = c * x[1] - b2[1];
            })
    };
    let terms = DEFAULT_LEVELS.iter().map(|&n| (inflated(n, 2), family(1.0 + 1.0 / n as f64))).collect();
    let e = EnergySequence::new(terms, SpdMatrix::identity(2).unwrap(), family(1.0)).unwrap();
    let r = minimizer_convergence(&e, &s, 1e-12).unwrap();
    let bb = euclid(&b);
    assert!((r.limit_minimum + 0.5 * bb * bb).abs() < 1e-10);
    for (k, &n) in DEFAULT_LEVELS.iter().enumerate() {
        let c = 1.0 + 1.0 / n as f64;
        // x*_n = b/c, embedded as b/√c.
        assert!((r.distances[k] - bb * (1.0 - 1.0 / c.sqrt())).abs() < 1e-9);
        assert!((r.minima[k] + 0.5 * bb * bb / c).abs() < 1e-10);
        assert!(r.distances[k] <= bb / n as f64);
        assert!(r.value_gaps[k] <= bb * bb / n as f64);
    }
    assert!((r.lower_bound + 0.5 * bb * bb).abs() < 1e-10);
    assert!(r.spread <= 0.5 * bb * bb * (1.0 - 1.0 / 1.25) + 1e-10);
}

#[test]
fn prox_minimizer_needs_strong_convexity() {
    assert!(matches!(prox_minimizer(&zero(1).unwrap(), &[1.0], 1e-9), Err(Error::Domain(_))));
    let x = prox_minimizer(&shifted_quadratic(2.0, vec![3.0, -1.0]).unwrap(), &[0.0, 0.0], 1e-12).unwrap();
    assert!((x[0] - 3.0).abs() < 1e-11 && (x[1] + 1.0).abs() < 1e-11);
}

#[test]
fn sequence_validation() {
    let r = ConvergentSequence::new(vec![Level::Limit], vec![], Level::Limit, vec![0.0], vec![0.0]);
    assert!(r.is_err());
    let r = ConvergentSequence::new(vec![Level::Limit], vec![vec![0.0]], Level::Limit, vec![0.0], vec![-1.0]);
    assert!(r.is_err());
    let s = SubspaceStacking::new(2).unwrap();
    let bad = ConvergentSequence::constant(vec![Level::Finite(1)], vec![1.0, 2.0], Level::Limit, 0.0).unwrap();
    assert!(check_stacking_axioms(&s, &[bad]).is_err());
}

fn spd(entries: [f64; 4], shift: f64) -> SpdMatrix {
    // BᵀB + shift·I
    let [a, b, c, d] = entries;
    SpdMatrix::new(2, vec![a * a + c * c + shift, a * b + c * d, a * b + c * d, b * b + d * d + shift]).unwrap()
}

proptest! {
    #[test]
    fn matrix_embedding_is_isometric(e in prop::array::uniform4(-2.0f64..2.0), shift in 0.05f64..2.0,
                                     x in prop::array::uniform2(-5.0f64..5.0), y in prop::array::uniform2(-5.0f64..5.0)) {
        let s = MatrixHilbertStacking::new(2).unwrap();
        let a = spd(e, shift);
        let d = stacking_distance(&s, &a, &x, &a, &y).unwrap();
        let diff = [x[0] - y[0], x[1] - y[1]];
        let n = s.norm(&a, &diff).unwrap();
        prop_assert!((d - n).abs() <= 1e-9 * (1.0 + n));
    }

    #[test]
    fn triangle_inequality_across_indices(es in prop::array::uniform3(prop::array::uniform4(-2.0f64..2.0)),
                                          pts in prop::array::uniform3(prop::array::uniform2(-5.0f64..5.0))) {
        let s = MatrixHilbertStacking::new(2).unwrap();
        let a: Vec<SpdMatrix> = es.iter().map(|e| spd(*e, 0.1)).collect();
        let d = |i: usize, j: usize| stacking_distance(&s, &a[i], &pts[i], &a[j], &pts[j]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }

    #[test]
    fn tlp_embedding_is_one_lipschitz(u in prop::collection::vec(-2.0f64..2.0, 6), v in prop::collection::vec(-2.0f64..2.0, 6), p in 1.0f64..4.0) {
        let s = TlpStacking::new(p).unwrap();
        let mu = EmpiricalMeasure::midpoint_grid(6).unwrap();
        let d = stacking_distance(&s, &mu, &u, &mu, &v).unwrap();
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(d <= s.norm(&mu, &diff).unwrap() + LIPSCHITZ_SLACK);
        let a = TLpPoint::new(mu.clone(), u.clone()).unwrap();
        prop_assert!((s.norm(&mu, &u).unwrap() - a.lq_norm(p)).abs() < 1e-12);
    }

    #[test]
    fn zero_converges_along_grids(k in 2usize..6) {
        let s = TlpStacking::new(2.0).unwrap();
        let fine = EmpiricalMeasure::midpoint_grid(96).unwrap();
        let coarse = EmpiricalMeasure::midpoint_grid(k).unwrap();
        let finer = EmpiricalMeasure::midpoint_grid(2 * k).unwrap();
        let d1 = stacking_distance(&s, &coarse, &vec![0.0; k], &fine, &[0.0; 96]).unwrap();
        let d2 = stacking_distance(&s, &finer, &vec![0.0; 2 * k], &fine, &[0.0; 96]).unwrap();
        prop_assert!(d2 < d1);
    }
}
