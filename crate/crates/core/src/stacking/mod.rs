//! Banach stackings: families of spaces `X_n` with 1-Lipschitz embeddings
//! `ξ_n` into one metric space, plus finite-sample probes of stacking axioms,
//! Γ-convergence and equicoercivity.
//!
//! Every probe reports evidence at the sampled indices against declared
//! tolerances. None of them certifies an asymptotic statement.

mod instances;

use std::fmt;

use crate::convex::{prox, ProperFunctional};
use crate::error::check_dim;
use crate::transport::EmpiricalMeasure;
use crate::{Error, Result};

pub use instances::*;

/// Default dyadic sample of indices.
pub const DEFAULT_LEVELS: [usize; 5] = [4, 8, 16, 32, 64];

/// Slack on the 1-Lipschitz embedding check.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// Scalars used for the continuity-of-scaling check.
pub const AXIOM_SCALARS: [f64; 3] = [-2.0, 0.5, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    IntegerSequence,
    MatrixIndexed,
    MeasureIndexed,
}

/// A family of normed spaces `ℝ^{dim(n)}` embedded into a common metric space.
///
/// Vector operations are coordinate-wise in every shipped instance.
pub trait BanachStacking {
    type Index: Clone + fmt::Debug;
    type Embedded;

    fn index_kind(&self) -> IndexKind;
    fn dim(&self, n: &Self::Index) -> Result<usize>;
    fn norm(&self, n: &Self::Index, x: &[f64]) -> Result<f64>;
    fn embed(&self, n: &Self::Index, x: &[f64]) -> Result<Self::Embedded>;
    fn unifying_distance(&self, a: &Self::Embedded, b: &Self::Embedded) -> Result<f64>;

    /// A point of `X_n` close to `x ∈ X_from`; along a convergent index
    /// sequence these points converge to `x`.
    fn approximate(&self, n: &Self::Index, from: &Self::Index, x: &[f64]) -> Result<Vec<f64>>;
}

/// `d^{n,m}(x, y) = d(ξ_n(x), ξ_m(y))`.
pub fn stacking_distance<S: BanachStacking>(s: &S, n: &S::Index, x: &[f64], m: &S::Index, y: &[f64]) -> Result<f64> {
    let a = s.embed(n, x)?;
    let b = s.embed(m, y)?;
    s.unifying_distance(&a, &b)
}

/// Points `x_k ∈ X_{n_k}` with a declared limit and, per index, the largest
/// gap the sequence is expected to show there.
#[derive(Debug, Clone)]
pub struct ConvergentSequence<I> {
    pub indices: Vec<I>,
    pub points: Vec<Vec<f64>>,
    pub limit_index: I,
    pub limit: Vec<f64>,
    pub tolerances: Vec<f64>,
}

impl<I: Clone> ConvergentSequence<I> {
    pub fn new(indices: Vec<I>, points: Vec<Vec<f64>>, limit_index: I, limit: Vec<f64>, tolerances: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Invalid("a sequence needs at least one index".into()));
        }
        check_dim(indices.len(), points.len())?;
        check_dim(indices.len(), tolerances.len())?;
        if tolerances.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Invalid("tolerances must be nonnegative".into()));
        }
        Ok(Self { indices, points, limit_index, limit, tolerances })
    }

    /// `x` at every index, with the limit at `limit_index`.
    pub fn constant(indices: Vec<I>, x: Vec<f64>, limit_index: I, tol: f64) -> Result<Self> {
        let k = indices.len();
        Self::new(indices, vec![x.clone(); k], limit_index, x, vec![tol; k])
    }

    /// The approximating sequence of `limit` produced by the stacking.
    pub fn approximating<S: BanachStacking<Index = I>>(
        s: &S,
        indices: Vec<I>,
        limit_index: I,
        limit: Vec<f64>,
        tolerances: Vec<f64>,
    ) -> Result<Self> {
        let points = indices.iter().map(|n| s.approximate(n, &limit_index, &limit)).collect::<Result<Vec<_>>>()?;
        Self::new(indices, points, limit_index, limit, tolerances)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Axiom evidence for one sampled sequence. Vectors are indexed like the
/// sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAxioms {
    /// Largest `d(ξ_n x, ξ_n y) − ‖x − y‖_n` over the sampled pairs.
    pub lipschitz_excess: f64,
    /// `d^{n,∞}(x_n, x_∞)`.
    pub embedded: Vec<f64>,
    /// `d^{n,∞}(0_n, 0_∞)`.
    pub zero: Vec<f64>,
    /// `d^{n,∞}(a_n, x_∞)` for the constructed approximations `a_n`.
    pub approximation: Vec<f64>,
    /// `d^{n,∞}(x_n + a_n, 2x_∞)`.
    pub sums: Vec<f64>,
    /// `max_c d^{n,∞}(c·x_n, c·x_∞)/max(1, |c|)` over [`AXIOM_SCALARS`].
    pub scalings: Vec<f64>,
    /// `|‖x_n‖_n − ‖x_∞‖_∞|`.
    pub norm_gaps: Vec<f64>,
    pub tolerances: Vec<f64>,
}

fn within(values: &[f64], bounds: &[f64]) -> bool {
    values.iter().zip(bounds).all(|(v, b)| *v <= b + LIPSCHITZ_SLACK)
}

impl SequenceAxioms {
    /// (i): ξ_n is 1-Lipschitz on the sampled pairs.
    pub fn lipschitz(&self) -> bool {
        self.lipschitz_excess <= LIPSCHITZ_SLACK
    }

    /// (ii): the constructed approximations and the zero vectors converge.
    pub fn approximation_ok(&self) -> bool {
        within(&self.approximation, &self.tolerances) && within(&self.zero, &self.tolerances)
    }

    /// (iii): sums and multiples converge, against the summed tolerances.
    pub fn algebra_ok(&self) -> bool {
        let sum_bounds: Vec<f64> = self.tolerances.iter().zip(&self.approximation).map(|(t, a)| t + a).collect();
        within(&self.embedded, &self.tolerances) && within(&self.sums, &sum_bounds) && within(&self.scalings, &self.tolerances)
    }

    /// (iv): norms converge.
    pub fn norms_ok(&self) -> bool {
        within(&self.norm_gaps, &self.tolerances)
    }

    pub fn holds(&self) -> bool {
        self.lipschitz() && self.approximation_ok() && self.algebra_ok() && self.norms_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub sequences: Vec<SequenceAxioms>,
}

impl AxiomReport {
    pub fn lipschitz(&self) -> bool {
        self.sequences.iter().all(SequenceAxioms::lipschitz)
    }

    pub fn approximation(&self) -> bool {
        self.sequences.iter().all(SequenceAxioms::approximation_ok)
    }

    pub fn algebra(&self) -> bool {
        self.sequences.iter().all(SequenceAxioms::algebra_ok)
    }

    pub fn norms(&self) -> bool {
        self.sequences.iter().all(SequenceAxioms::norms_ok)
    }

    pub fn holds(&self) -> bool {
        self.sequences.iter().all(SequenceAxioms::holds)
    }
}

fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

fn scale(c: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| c * a).collect()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn check_sequence<S: BanachStacking>(s: &S, seq: &ConvergentSequence<S::Index>) -> Result<SequenceAxioms> {
    let lim = &seq.limit_index;
    let x_inf = &seq.limit;
    check_dim(s.dim(lim)?, x_inf.len())?;
    let zero_inf = vec![0.0; x_inf.len()];
    let norm_inf = s.norm(lim, x_inf)?;
    let mut out = SequenceAxioms {
        lipschitz_excess: f64::NEG_INFINITY,
        embedded: Vec::new(),
        zero: Vec::new(),
        approximation: Vec::new(),
        sums: Vec::new(),
        scalings: Vec::new(),
        norm_gaps: Vec::new(),
        tolerances: seq.tolerances.clone(),
    };
    for (n, x) in seq.indices.iter().zip(&seq.points) {
        check_dim(s.dim(n)?, x.len())?;
        let zero = vec![0.0; x.len()];
        let a = s.approximate(n, lim, x_inf)?;

        for (p, q) in [(x, &zero), (x, &a), (&a, &zero)] {
            let d = stacking_distance(s, n, p, n, q)?;
            let excess = d - s.norm(n, &sub(p, q))?;
            out.lipschitz_excess = out.lipschitz_excess.max(excess);
        }

        out.embedded.push(stacking_distance(s, n, x, lim, x_inf)?);
        out.zero.push(stacking_distance(s, n, &zero, lim, &zero_inf)?);
        out.approximation.push(stacking_distance(s, n, &a, lim, x_inf)?);
        out.sums.push(stacking_distance(s, n, &add(x, &a), lim, &scale(2.0, x_inf))?);
        let mut worst = 0.0_f64;
        for c in AXIOM_SCALARS {
            let d = stacking_distance(s, n, &scale(c, x), lim, &scale(c, x_inf))?;
            worst = worst.max(d / c.abs().max(1.0));
        }
        out.scalings.push(worst);
        out.norm_gaps.push((s.norm(n, x)? - norm_inf).abs());
    }
    Ok(out)
}

/// Checks axioms (i)-(iv) along each sampled sequence. Axiom (ii) is checked
/// through the stacking's own approximating sequence of each declared limit.
pub fn check_stacking_axioms<S: BanachStacking>(s: &S, sequences: &[ConvergentSequence<S::Index>]) -> Result<AxiomReport> {
    let sequences = sequences.iter().map(|q| check_sequence(s, q)).collect::<Result<Vec<_>>>()?;
    Ok(AxiomReport { sequences })
}

/// Functionals `Φ_n` on `X_n` at sampled indices, with a limit `Φ_∞`.
#[derive(Debug, Clone)]
pub struct EnergySequence<I> {
    pub terms: Vec<(I, ProperFunctional)>,
    pub limit_index: I,
    pub limit: ProperFunctional,
}

impl<I: Clone> EnergySequence<I> {
    pub fn new(terms: Vec<(I, ProperFunctional)>, limit_index: I, limit: ProperFunctional) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("an energy sequence needs at least one term".into()));
        }
        Ok(Self { terms, limit_index, limit })
    }

    pub fn indices(&self) -> Vec<I> {
        self.terms.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_against<S: BanachStacking<Index = I>>(&self, s: &S) -> Result<()> {
        for (n, phi) in &self.terms {
            check_dim(s.dim(n)?, phi.dim())?;
        }
        check_dim(s.dim(&self.limit_index)?, self.limit.dim())
    }
}

/// Entries from position `len/2` on.
fn tail(v: &[f64]) -> &[f64] {
    &v[v.len() / 2..]
}

fn tail_min(v: &[f64]) -> f64 {
    tail(v).iter().copied().fold(f64::INFINITY, f64::min)
}

fn tail_max(v: &[f64]) -> f64 {
    tail(v).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaLiminfReport {
    /// `Φ_n(x_n)`.
    pub values: Vec<f64>,
    /// `d^{n,∞}(x_n, x_∞)`.
    pub distances: Vec<f64>,
    /// Minimum of `values` over the tail half.
    pub liminf_estimate: f64,
    pub limit_value: f64,
    pub ok: bool,
}

/// Liminf inequality along one sampled sequence: ok iff the tail minimum of
/// `Φ_n(x_n)` is at least `Φ_∞(x_∞) − tol`.
pub fn gamma_liminf_check<S: BanachStacking>(
    e: &EnergySequence<S::Index>,
    s: &S,
    seq: &ConvergentSequence<S::Index>,
    tol: f64,
) -> Result<GammaLiminfReport> {
    e.check_against(s)?;
    check_dim(e.len(), seq.len())?;
    let values: Vec<f64> = e.terms.iter().zip(&seq.points).map(|((_, phi), x)| phi.value(x)).collect();
    let distances = seq
        .indices
        .iter()
        .zip(&seq.points)
        .map(|(n, x)| stacking_distance(s, n, x, &seq.limit_index, &seq.limit))
        .collect::<Result<Vec<_>>>()?;
    let liminf_estimate = tail_min(&values);
    let limit_value = e.limit.value(&seq.limit);
    Ok(GammaLiminfReport { values, distances, liminf_estimate, limit_value, ok: liminf_estimate >= limit_value - tol })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    /// Barycentric projections of `x_∞` onto each `μ_n`.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// `d_{TL^p}((x_n, μ_n), (x_∞, μ_∞))`.
    pub distances: Vec<f64>,
    /// Maximum of `values` over the tail half.
    pub limsup_estimate: f64,
    pub limit_value: f64,
    pub ok: bool,
}

/// Builds `x_n` as barycentric projections of `x_inf` along optimal plans
/// `μ_n → μ_∞` and checks `limsup Φ_n(x_n) ≤ Φ_∞(x_∞)·(1 + delta)`.
/// Vacuously ok when `Φ_∞(x_∞) = +∞`.
pub fn recovery_sequence(
    e: &EnergySequence<EmpiricalMeasure>,
    s: &TlpStacking,
    x_inf: &[f64],
    delta: f64,
) -> Result<RecoveryReport> {
    e.check_against(s)?;
    check_dim(e.limit.dim(), x_inf.len())?;
    let mut points = Vec::with_capacity(e.len());
    let mut values = Vec::with_capacity(e.len());
    let mut distances = Vec::with_capacity(e.len());
    for (mu, phi) in &e.terms {
        let x = s.approximate(mu, &e.limit_index, x_inf)?;
        values.push(phi.value(&x));
        distances.push(stacking_distance(s, mu, &x, &e.limit_index, x_inf)?);
        points.push(x);
    }
    let limsup_estimate = tail_max(&values);
    let limit_value = e.limit.value(x_inf);
    let ok = limit_value == f64::INFINITY || limsup_estimate <= limit_value + delta * limit_value.abs();
    Ok(RecoveryReport { points, values, distances, limsup_estimate, limit_value, ok })
}

/// Heuristic evidence only: a finite sample can neither establish nor refute
/// equicoercivity.
#[derive(Debug, Clone, PartialEq)]
pub struct EquicoercivityReport {
    pub values: Vec<f64>,
    /// Every `Φ_n(x_n) ≤ c`.
    pub sublevel: bool,
    /// Pairwise `d^{n_i, n_j}(x_i, x_j)`.
    pub pairwise_distance_matrix: Vec<Vec<f64>>,
    /// Single-linkage clusters at threshold `tol`, each sorted by position.
    pub clusters: Vec<Vec<usize>>,
    /// Position of the last member of the largest cluster; its point is the
    /// best guess for a subsequential limit.
    pub best_cluster_limit: usize,
    /// Largest pairwise distance within the tail half.
    pub tail_diameter: f64,
    pub cauchy_tail: bool,
    /// `d^{n,∞}(x_n, x_∞)` when a limit candidate was supplied.
    pub limit_distances: Option<Vec<f64>>,
}

/// Pairwise distances and single-linkage clustering for a sublevel sequence.
pub fn equicoercivity_probe<S: BanachStacking>(
    e: &EnergySequence<S::Index>,
    s: &S,
    c: f64,
    candidates: &[Vec<f64>],
    limit: Option<&[f64]>,
    tol: f64,
) -> Result<EquicoercivityReport> {
    e.check_against(s)?;
    check_dim(e.len(), candidates.len())?;
    let k = candidates.len();
    let values: Vec<f64> = e.terms.iter().zip(candidates).map(|((_, phi), x)| phi.value(x)).collect();
    let sublevel = values.iter().all(|v| *v <= c);

    let embedded = e.terms.iter().zip(candidates).map(|((n, _), x)| s.embed(n, x)).collect::<Result<Vec<_>>>()?;
    let mut dist = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = s.unifying_distance(&embedded[i], &embedded[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let clusters = single_linkage(&dist, tol);
    let best = clusters.iter().max_by_key(|c| (c.len(), c[c.len() - 1])).expect("k ≥ 1");
    let best_cluster_limit = best[best.len() - 1];

    let start = k / 2;
    let mut tail_diameter = 0.0_f64;
    for i in start..k {
        for j in i + 1..k {
            tail_diameter = tail_diameter.max(dist[i][j]);
        }
    }

    let limit_distances = match limit {
        Some(x_inf) => {
            let target = s.embed(&e.limit_index, x_inf)?;
            Some(embedded.iter().map(|p| s.unifying_distance(p, &target)).collect::<Result<Vec<_>>>()?)
        }
        None => None,
    };

    Ok(EquicoercivityReport {
        values,
        sublevel,
        pairwise_distance_matrix: dist,
        best_cluster_limit,
        clusters,
        tail_diameter,
        cauchy_tail: tail_diameter <= tol,
        limit_distances,
    })
}

fn single_linkage(dist: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let k = dist.len();
    let mut label: Vec<usize> = (0..k).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..k {
        for j in i + 1..k {
            if dist[i][j] <= threshold {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; k];
    for i in 0..k {
        let r = root(&mut label, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

const MINIMIZER_MAX_ITER: usize = 10_000;

/// Minimizer of a λ-convex functional with λ > 0, by proximal-point iteration
/// from `x0` with step `10/λ` (contraction factor 1/11).
pub fn prox_minimizer(phi: &ProperFunctional, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
    let lambda = phi.lambda();
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("proximal-point minimizer needs λ > 0, got {lambda}")));
    }
    check_dim(phi.dim(), x0.len())?;
    let gamma = 10.0 / lambda;
    let mut x = x0.to_vec();
    for _ in 0..MINIMIZER_MAX_ITER {
        let y = prox(phi, gamma, &x)?;
        let step = phi.dist(&x, &y);
        x = y;
        // The remaining distance to the minimizer is at most step/10.
        if step <= 10.0 * tol * (1.0 + phi.norm(&x)) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { what: "proximal-point minimization", iterations: MINIMIZER_MAX_ITER })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerReport {
    pub minimizers: Vec<Vec<f64>>,
    pub minima: Vec<f64>,
    pub limit_minimizer: Vec<f64>,
    pub limit_minimum: f64,
    /// `d^{n,∞}(x*_n, x*_∞)`.
    pub distances: Vec<f64>,
    /// `|min Φ_n − min Φ_∞|`.
    pub value_gaps: Vec<f64>,
    /// Smallest minimum over all indices including the limit: a common lower
    /// bound for the sampled family.
    pub lower_bound: f64,
    /// Largest minus smallest minimum.
    pub spread: f64,
}

/// Minimizers of every `Φ_n` and of `Φ_∞` by proximal-point iteration from
/// the origin, compared through the stacking.
pub fn minimizer_convergence<S: BanachStacking>(e: &EnergySequence<S::Index>, s: &S, tol: f64) -> Result<MinimizerReport> {
    e.check_against(s)?;
    let limit_minimizer = prox_minimizer(&e.limit, &vec![0.0; e.limit.dim()], tol)?;
    let limit_minimum = e.limit.value(&limit_minimizer);
    let mut out = MinimizerReport {
        minimizers: Vec::new(),
        minima: Vec::new(),
        limit_minimizer,
        limit_minimum,
        distances: Vec::new(),
        value_gaps: Vec::new(),
        lower_bound: limit_minimum,
        spread: 0.0,
    };
    let mut hi = limit_minimum;
    for (n, phi) in &e.terms {
        let x = prox_minimizer(phi, &vec![0.0; phi.dim()], tol)?;
        let v = phi.value(&x);
        out.distances.push(stacking_distance(s, n, &x, &e.limit_index, &out.limit_minimizer)?);
        out.value_gaps.push((v - limit_minimum).abs());
        out.lower_bound = out.lower_bound.min(v);
        hi = hi.max(v);
        out.minima.push(v);
        out.minimizers.push(x);
    }
    out.spread = hi - out.lower_bound;
    Ok(out)
}

/// `Φ_n(x) = |x| + 1/n` except `Φ_n(n) = 0`, the family whose minimizers
/// escape to `+∞` in ℝ while their images under [`CircleStacking`] converge
/// to a point outside the image of `ξ`.
pub fn circle_energy(n: usize, x: f64) -> f64 {
    if x == n as f64 {
        0.0
    } else {
        x.abs() + 1.0 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleReport {
    pub levels: Vec<usize>,
    /// The minimizer of `Φ_n` is `n`, with value 0.
    pub minimizers: Vec<f64>,
    pub minima: Vec<f64>,
    /// `Φ_∞ = |·|` is minimized at 0.
    pub limit_minimizer: f64,
    /// Circle distance from `ξ(n)` to `ξ(0)`.
    pub distances: Vec<f64>,
    /// Largest circle distance between minimizers in the tail half.
    pub tail_diameter: f64,
}

impl CircleReport {
    /// Whether the last sampled minimizer is within `tol` of the limit
    /// minimizer.
    pub fn minimizers_converge(&self, tol: f64) -> bool {
        self.distances.last().is_some_and(|d| *d <= tol)
    }
}

pub fn circle_counterexample(levels: &[usize]) -> Result<CircleReport> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::Invalid("levels must be nonempty and positive".into()));
    }
    let s = CircleStacking;
    let minimizers: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let minima: Vec<f64> = levels.iter().zip(&minimizers).map(|(&n, &x)| circle_energy(n, x)).collect();
    let mut distances = Vec::with_capacity(levels.len());
    for (&n, &x) in levels.iter().zip(&minimizers) {
        distances.push(stacking_distance(&s, &Level::Finite(n), &[x], &Level::Limit, &[0.0])?);
    }
    let mut tail_diameter = 0.0_f64;
    let start = levels.len() / 2;
    for i in start..levels.len() {
        for j in i + 1..levels.len() {
            let d = stacking_distance(&s, &Level::Finite(levels[i]), &[minimizers[i]], &Level::Finite(levels[j]), &[minimizers[j]])?;
            tail_diameter = tail_diameter.max(d);
        }
    }
    Ok(CircleReport { levels: levels.to_vec(), minimizers, minima, limit_minimizer: 0.0, distances, tail_diameter })
}

#[cfg(test)]
mod tests;
