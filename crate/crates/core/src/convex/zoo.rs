//! Closed-form functionals used throughout the crate and its experiments.

use super::ProperFunctional;
use crate::{Error, Result};

fn soft_threshold(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// `Φ(x) = (λ/2) x²` on ℝ.
pub fn quadratic(lambda: f64) -> Result<ProperFunctional> {
    Ok(ProperFunctional::new(1, lambda, move |x| 0.5 * lambda * x[0] * x[0])?
        .with_name(format!("quadratic(λ={lambda})"))
        .with_gradient(move |x, g| g[0] = lambda * x[0])
        .with_prox(move |gamma, x, out| {
            out[0] = x[0] / (1.0 + gamma * lambda);
            Ok(())
        }))
}

/// `Φ(x) = (λ/2) ‖x − c‖²` on ℝ^d.
pub fn shifted_quadratic(lambda: f64, center: Vec<f64>) -> Result<ProperFunctional> {
    let c1 = center.clone();
    let c2 = center.clone();
    Ok(ProperFunctional::new(center.len(), lambda, move |x| {
        0.5 * lambda * x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    })?
    .with_name(format!("shifted_quadratic(λ={lambda})"))
    .with_gradient(move |x, g| {
        for i in 0..x.len() {
            g[i] = lambda * (x[i] - c1[i]);
        }
    })
    .with_prox(move |gamma, x, out| {
        for i in 0..x.len() {
            out[i] = (x[i] + gamma * lambda * c2[i]) / (1.0 + gamma * lambda);
        }
        Ok(())
    }))
}

/// `Φ(x) = ½ Σ dᵢ xᵢ²`, which is `min dᵢ`-convex.
pub fn anisotropic_quadratic(diag: Vec<f64>) -> Result<ProperFunctional> {
    if diag.is_empty() || diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::Invalid("diagonal must be nonempty and finite".into()));
    }
    let lambda = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let (d1, d2) = (diag.clone(), diag.clone());
    Ok(ProperFunctional::new(diag.len(), lambda, move |x| {
        0.5 * x.iter().zip(&diag).map(|(a, d)| d * a * a).sum::<f64>()
    })?
    .with_name("anisotropic_quadratic")
    .with_gradient(move |x, g| {
        for i in 0..x.len() {
            g[i] = d1[i] * x[i];
        }
    })
    .with_prox(move |gamma, x, out| {
        for i in 0..x.len() {
            out[i] = x[i] / (1.0 + gamma * d2[i]);
        }
        Ok(())
    }))
}

/// `Φ(x) = c |x|` on ℝ.
pub fn abs(scale: f64) -> Result<ProperFunctional> {
    l1(1, scale).map(|f| f.with_name(format!("abs(c={scale})")))
}

/// `Φ(x) = c Σ |xᵢ|` on ℝ^d.
pub fn l1(dim: usize, scale: f64) -> Result<ProperFunctional> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::Invalid(format!("l1 scale must be nonnegative, got {scale}")));
    }
    Ok(ProperFunctional::new(dim, 0.0, move |x| scale * x.iter().map(|a| a.abs()).sum::<f64>())?
        .with_name(format!("l1(c={scale})"))
        .with_subgradient(move |x, g| {
            for i in 0..x.len() {
                g[i] = if x[i] == 0.0 { 0.0 } else { scale * x[i].signum() };
            }
        })
        .with_prox(move |gamma, x, out| {
            for i in 0..x.len() {
                out[i] = soft_threshold(x[i], gamma * scale);
            }
            Ok(())
        }))
}

/// Huber function with threshold `δ`: `x²/(2δ)` for `|x| ≤ δ`, `|x| − δ/2`
/// otherwise.
pub fn huber(delta: f64) -> Result<ProperFunctional> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Invalid(format!("huber threshold must be positive, got {delta}")));
    }
    Ok(ProperFunctional::new(1, 0.0, move |x| {
        let a = x[0].abs();
        if a <= delta {
            a * a / (2.0 * delta)
        } else {
            a - 0.5 * delta
        }
    })?
    .with_name(format!("huber(δ={delta})"))
    .with_gradient(move |x, g| g[0] = (x[0] / delta).clamp(-1.0, 1.0))
    .with_prox(move |gamma, x, out| {
        out[0] = if x[0].abs() <= delta + gamma {
            x[0] * delta / (delta + gamma)
        } else {
            x[0] - gamma * x[0].signum()
        };
        Ok(())
    }))
}

/// `Φ(x) = x⁴/4 − x²/2`, which is (−1)-convex.
pub fn double_well() -> Result<ProperFunctional> {
    Ok(ProperFunctional::new(1, -1.0, |x| {
        let s = x[0] * x[0];
        0.25 * s * s - 0.5 * s
    })?
    .with_name("double_well")
    .with_gradient(|x, g| g[0] = x[0] * x[0] * x[0] - x[0])
    .with_prox(|gamma, x, out| {
        out[0] = monotone_cubic_root(gamma, 1.0 - gamma, x[0]);
        Ok(())
    }))
}

/// Root of `a y³ + b y − c` for `a ≥ 0`, `b > 0`, by safeguarded Newton.
fn monotone_cubic_root(a: f64, b: f64, c: f64) -> f64 {
    let bound = c.abs() / b;
    let (mut lo, mut hi) = (-bound, bound);
    let mut y = c / b;
    if a > 0.0 {
        y = y.clamp(-(c.abs() / a).cbrt(), (c.abs() / a).cbrt());
    }
    for _ in 0..200 {
        let f = a * y * y * y + b * y - c;
        if f == 0.0 {
            return y;
        }
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let df = 3.0 * a * y * y + b;
        let mut next = y - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
            return next;
        }
        y = next;
    }
    y
}

/// `Φ ≡ 0` on ℝ^d.
pub fn zero(dim: usize) -> Result<ProperFunctional> {
    Ok(ProperFunctional::new(dim, 0.0, |_| 0.0)?
        .with_name("zero")
        .with_gradient(|_, g| g.iter_mut().for_each(|v| *v = 0.0))
        .with_prox(|_, x, out| {
            out.copy_from_slice(x);
            Ok(())
        }))
}

/// Indicator of `[a, b] ⊂ ℝ`: zero inside, `+∞` outside.
pub fn interval_indicator(a: f64, b: f64) -> Result<ProperFunctional> {
    if !(a <= b) {
        return Err(Error::Invalid(format!("empty interval [{a}, {b}]")));
    }
    Ok(ProperFunctional::new(1, 0.0, move |x| {
        if (a..=b).contains(&x[0]) {
            0.0
        } else {
            f64::INFINITY
        }
    })?
    .with_name(format!("indicator[{a}, {b}]"))
    .with_prox(move |_, x, out| {
        out[0] = x[0].clamp(a, b);
        Ok(())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root_solves() {
        for &(a, b, c) in &[(0.5, 0.5, 2.0), (0.0, 1.0, -3.0), (0.9, 0.1, 1e-3), (0.3, 0.7, -5.0)] {
            let y = monotone_cubic_root(a, b, c);
            assert!((a * y * y * y + b * y - c).abs() < 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }
}
