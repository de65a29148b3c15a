//! Smooth truncations `g ∈ P₀` and the P₀-convexity inequality.

use std::sync::OnceLock;

use crate::convex::{check_lambda_convexity, BoxSampler, ConvexityReport, ProperFunctional};
use crate::error::check_dim;
use crate::{Error, Result};

/// Cells of the cached smooth-step table on `[0, 1]`.
const TABLE_CELLS: usize = 2048;

/// `exp(−1/(4z(1−z)))`, the standard bump moved onto `(0, 1)`.
fn bump(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (-1.0 / (4.0 * z * (1.0 - z))).exp()
    }
}

/// 8-point Gauss–Legendre rule on `[a, b]`.
fn gauss8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * X.iter().zip(W).map(|(x, w)| w * (f(c - h * x) + f(c + h * x))).sum::<f64>()
}

/// Smooth step `S` with `S′ = bump/Z` and its primitive `I`, tabulated at the
/// nodes `k/TABLE_CELLS`.
struct StepTable {
    norm: f64,
    step: Vec<f64>,
    primitive: Vec<f64>,
}

fn table() -> &'static StepTable {
    static TABLE: OnceLock<StepTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / TABLE_CELLS as f64;
        let mut mass = vec![0.0; TABLE_CELLS + 1];
        let mut moment = vec![0.0; TABLE_CELLS + 1];
        for k in 0..TABLE_CELLS {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            mass[k + 1] = mass[k] + gauss8(bump, a, b);
            moment[k + 1] = moment[k] + gauss8(|t| t * bump(t), a, b);
        }
        let norm = mass[TABLE_CELLS];
        let step: Vec<f64> = mass.iter().map(|m| m / norm).collect();
        // I(z) = z S(z) − ∫₀^z t S′(t) dt.
        let primitive = (0..=TABLE_CELLS).map(|k| k as f64 * h * step[k] - moment[k] / norm).collect();
        StepTable { norm, step, primitive }
    })
}

fn hermite(z: f64, values: &[f64], slope: impl Fn(usize) -> f64) -> f64 {
    let h = 1.0 / TABLE_CELLS as f64;
    let k = ((z / h) as usize).min(TABLE_CELLS - 1);
    let s = z / h - k as f64;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * values[k]
        + (s3 - 2.0 * s2 + s) * h * slope(k)
        + (-2.0 * s3 + 3.0 * s2) * values[k + 1]
        + (s3 - s2) * h * slope(k + 1)
}

/// Smooth step: 0 for `z ≤ 0`, 1 for `z ≥ 1`.
pub fn smooth_step(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    let t = table();
    hermite(z, &t.step, |k| bump(k as f64 / TABLE_CELLS as f64) / t.norm).clamp(0.0, 1.0)
}

/// `∫_{−∞}^z S`; equals `z − ½` for `z ≥ 1`.
pub fn smooth_step_primitive(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return z - 0.5;
    }
    let t = table();
    hermite(z, &t.primitive, |k| t.step[k]).max(0.0)
}

/// A member of the three-parameter family inside `P₀`.
///
/// For `x ≥ 0`, `g′(x) = s·[S((x−a)/w) − S((x−b)/w)]` with `b = a + cap/s`
/// (`b = a + w` without a cap), so `g` vanishes on `[0, a]`, rises with slope
/// at most `s ≤ 1` and levels off at `s(b − a)`. Negative arguments use the odd
/// extension unless the function is one-sided, in which case `g = 0` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0TestFunction {
    a: f64,
    rise_width: f64,
    slope: f64,
    plateau: Option<f64>,
    one_sided: bool,
    zero: bool,
}

/// Odd `g` with dead zone `(−a, a)`, ramp width `w`, unit slope and an
/// optional cap on `|g|`.
pub fn p0_family(a: f64, w: f64, cap: Option<f64>) -> Result<P0TestFunction> {
    P0TestFunction::new(a, w, 1.0, cap)
}

impl P0TestFunction {
    pub fn new(a: f64, rise_width: f64, slope: f64, plateau: Option<f64>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Invalid(format!("dead zone half-width must be positive, got {a}")));
        }
        if !(rise_width > 0.0 && rise_width.is_finite()) {
            return Err(Error::Invalid(format!("rise width must be positive, got {rise_width}")));
        }
        if !(slope > 0.0) {
            return Err(Error::Invalid(format!("slope must be positive, got {slope}")));
        }
        if slope > 1.0 {
            return Err(Error::Invalid(format!("slope {slope} would make g′ exceed 1")));
        }
        if let Some(c) = plateau {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Invalid(format!("cap must be positive, got {c}")));
            }
        }
        Ok(Self { a, rise_width, slope, plateau, one_sided: false, zero: false })
    }

    /// `g ≡ 0`.
    pub fn zero() -> Self {
        Self { a: 1.0, rise_width: 1.0, slope: 1.0, plateau: None, one_sided: true, zero: true }
    }

    /// Same profile on the positive axis, zero on the negative axis.
    pub fn one_sided(mut self) -> Self {
        self.one_sided = true;
        self
    }

    pub fn dead_zone(&self) -> f64 {
        self.a
    }

    pub fn rise_width(&self) -> f64 {
        self.rise_width
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn is_one_sided(&self) -> bool {
        self.one_sided
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    fn descent_start(&self) -> f64 {
        match self.plateau {
            Some(c) => self.a + c / self.slope,
            None => self.a + self.rise_width,
        }
    }

    /// Limit of `g(x)` as `x → +∞`.
    pub fn plateau(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            self.slope * (self.descent_start() - self.a)
        }
    }

    /// `g′` vanishes outside `±[lo, hi]`.
    pub fn derivative_support(&self) -> (f64, f64) {
        (self.a, self.descent_start() + self.rise_width)
    }

    fn positive(&self, x: f64) -> f64 {
        let (w, b) = (self.rise_width, self.descent_start());
        if x <= self.a {
            return 0.0;
        }
        if x >= b + w {
            return self.plateau();
        }
        let rise = self.slope * w * (smooth_step_primitive((x - self.a) / w) - smooth_step_primitive((x - b) / w));
        rise.clamp(0.0, self.plateau())
    }

    fn positive_derivative(&self, x: f64) -> f64 {
        let (w, b) = (self.rise_width, self.descent_start());
        let d = smooth_step((x - self.a) / w) - smooth_step((x - b) / w);
        self.slope * d.clamp(0.0, 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.zero {
            0.0
        } else if x >= 0.0 {
            self.positive(x)
        } else if self.one_sided {
            0.0
        } else {
            -self.positive(-x)
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.zero || (x < 0.0 && self.one_sided) {
            0.0
        } else {
            self.positive_derivative(x.abs())
        }
    }

    /// `g ∘ u`.
    pub fn compose(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|x| self.eval(*x)).collect()
    }
}

/// Both sides of `Φ(u + g∘(v−u)) + Φ(v − g∘(v−u)) ≤ Φ(u) + Φ(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0Report {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl P0Report {
    pub fn passes(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// The exchanged pair `(u + g∘(v−u), v − g∘(v−u))`.
pub fn p0_exchange(u: &[f64], v: &[f64], g: &P0TestFunction) -> (Vec<f64>, Vec<f64>) {
    let shift: Vec<f64> = u.iter().zip(v).map(|(a, b)| g.eval(b - a)).collect();
    let up = u.iter().zip(&shift).map(|(a, s)| a + s).collect();
    let vp = v.iter().zip(&shift).map(|(b, s)| b - s).collect();
    (up, vp)
}

pub fn p0_convexity_check(phi: &ProperFunctional, u: &[f64], v: &[f64], g: &P0TestFunction) -> Result<P0Report> {
    check_dim(phi.dim(), u.len())?;
    check_dim(phi.dim(), v.len())?;
    let (up, vp) = p0_exchange(u, v, g);
    let lhs = phi.value(&up) + phi.value(&vp);
    let rhs = phi.value(u) + phi.value(v);
    let slack = if lhs == rhs { 0.0 } else { rhs - lhs };
    Ok(P0Report { lhs, rhs, slack })
}

/// `Q(u) = ½ Σ wᵢ uᵢ²`, 1-convex in the weighted norm.
pub fn quadratic_p0(weights: Vec<f64>) -> Result<ProperFunctional> {
    let w = weights.clone();
    let wg = weights.clone();
    Ok(ProperFunctional::new(weights.len(), 1.0, move |u| {
        0.5 * u.iter().zip(&w).map(|(x, w)| w * x * x).sum::<f64>()
    })?
    .with_name("weighted quadratic")
    .with_weights(weights)?
    .with_gradient(move |u, g| {
        for i in 0..u.len() {
            g[i] = wg[i] * u[i];
        }
    })
    .with_prox(|gamma, x, out| {
        for (o, x) in out.iter_mut().zip(x) {
            *o = x / (1.0 + gamma);
        }
        Ok(())
    }))
}

/// `Φ(u) = (λ+1)(u₁+u₂)² + (λ/2)(u₁²+u₂²)` on two atoms of mass ½: λ-convex
/// but not P₀-convex.
pub fn counterexample_functional(lambda: f64) -> Result<ProperFunctional> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("λ must be nonnegative, got {lambda}")));
    }
    let c = lambda + 1.0;
    Ok(ProperFunctional::new(2, lambda, move |u| {
        let s = u[0] + u[1];
        c * s * s + 0.5 * lambda * (u[0] * u[0] + u[1] * u[1])
    })?
    .with_name(format!("counterexample(λ={lambda})"))
    .with_weights(vec![0.5, 0.5])?
    .with_gradient(move |u, g| {
        let s = u[0] + u[1];
        g[0] = 2.0 * c * s + lambda * u[0];
        g[1] = 2.0 * c * s + lambda * u[1];
    })
    .with_prox(move |gamma, h, out| {
        // Stationarity: (λ + 1/(2γ)) uᵢ + 2c(u₁+u₂) = hᵢ/(2γ).
        let d = lambda + 0.5 / gamma;
        let s = 0.5 * (h[0] + h[1]) / gamma / (d + 4.0 * c);
        for i in 0..2 {
            out[i] = (0.5 * h[i] / gamma - 2.0 * c * s) / d;
        }
        Ok(())
    }))
}

/// The truncation with `g(−1) = 0` and `g(1) = ½`.
pub fn counterexample_truncation() -> P0TestFunction {
    p0_family(0.1, 0.1, Some(0.5)).expect("valid parameters").one_sided()
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub lambda: f64,
    pub convexity: ConvexityReport,
    pub p0: P0Report,
    /// `−(½ + ¼λ)`.
    pub predicted_slack: f64,
}

impl CounterexampleReport {
    /// λ-convex on every sample and P₀-convexity violated.
    pub fn demonstrates(&self, tol: f64) -> bool {
        self.convexity.holds() && self.p0.slack < -tol
    }
}

/// Runs [`counterexample_demo_with`] with the canonical truncation.
pub fn counterexample_demo(lambda: f64) -> Result<CounterexampleReport> {
    counterexample_demo_with(lambda, &counterexample_truncation(), 1000, 0x5eed)
}

/// λ-convexity sampled on `[−2, 2]²` and the P₀ inequality on
/// `u = (1, 0)`, `v = (0, 1)`.
pub fn counterexample_demo_with(lambda: f64, g: &P0TestFunction, samples: usize, seed: u64) -> Result<CounterexampleReport> {
    let phi = counterexample_functional(lambda)?;
    let convexity = check_lambda_convexity(&phi, lambda, &mut BoxSampler::new(seed, -2.0, 2.0), samples)?;
    let p0 = p0_convexity_check(&phi, &[1.0, 0.0], &[0.0, 1.0], g)?;
    Ok(CounterexampleReport { lambda, convexity, p0, predicted_slack: -(0.5 + 0.25 * lambda) })
}
