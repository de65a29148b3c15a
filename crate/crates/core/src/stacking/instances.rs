use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{BanachStacking, IndexKind};
use crate::error::check_dim;
use crate::linalg::wlr_norm;
use crate::transport::{barycentric_map, tlp_distance, wasserstein, EmpiricalMeasure, TLpPoint};
use crate::{Error, Result};

/// Position in an integer-indexed family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Finite(usize),
    Limit,
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Coordinate subspaces `span(e₁, …, e_{min(n, D)})` of ℝ^D, the limit being
/// ℝ^D itself, with inclusion embeddings.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceStacking {
    ambient: usize,
}

impl SubspaceStacking {
    pub fn new(ambient: usize) -> Result<Self> {
        if ambient == 0 {
            return Err(Error::Invalid("ambient dimension must be positive".into()));
        }
        Ok(Self { ambient })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }
}

impl BanachStacking for SubspaceStacking {
    type Index = Level;
    type Embedded = Vec<f64>;

    fn index_kind(&self) -> IndexKind {
        IndexKind::IntegerSequence
    }

    fn dim(&self, n: &Level) -> Result<usize> {
        match *n {
            Level::Finite(0) => Err(Error::Invalid("level 0 has no coordinates".into())),
            Level::Finite(k) => Ok(k.min(self.ambient)),
            Level::Limit => Ok(self.ambient),
        }
    }

    fn norm(&self, n: &Level, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(n)?, x.len())?;
        Ok(euclid(x, &vec![0.0; x.len()]))
    }

    fn embed(&self, n: &Level, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(n)?, x.len())?;
        let mut out = vec![0.0; self.ambient];
        out[..x.len()].copy_from_slice(x);
        Ok(out)
    }

    fn unifying_distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        Ok(euclid(a, b))
    }

    /// Truncation to the first coordinates.
    fn approximate(&self, n: &Level, from: &Level, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(from)?, x.len())?;
        let k = self.dim(n)?;
        let mut out = vec![0.0; k];
        let m = k.min(x.len());
        out[..m].copy_from_slice(&x[..m]);
        Ok(out)
    }
}

/// Smallest admissible eigenvalue of an [`SpdMatrix`].
pub const EIGEN_FLOOR: f64 = 1e-12;

/// A symmetric positive definite matrix together with its square root.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    d: usize,
    entries: Vec<f64>,
    sqrt: Vec<f64>,
}

impl SpdMatrix {
    /// Row-major `d × d` entries.
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("matrix dimension must be positive".into()));
        }
        check_dim(d * d, entries.len())?;
        let scale = entries.iter().fold(0.0_f64, |s, a| s.max(a.abs()));
        for i in 0..d {
            for j in 0..i {
                if (entries[i * d + j] - entries[j * d + i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::Invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = DMatrix::from_row_slice(d, d, &entries);
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |s, l| s.min(*l));
        if !(min >= EIGEN_FLOOR) {
            return Err(Error::Domain(format!("smallest eigenvalue {min:e} is below the floor {EIGEN_FLOOR:e}")));
        }
        let root = eig.eigenvalues.map(f64::sqrt);
        let s = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
        let sqrt = (0..d * d).map(|k| s[(k / d, k % d)]).collect();
        Ok(Self { d, entries, sqrt })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; d])
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        let d = diag.len();
        let mut entries = vec![0.0; d * d];
        for (i, v) in diag.into_iter().enumerate() {
            entries[i * d + i] = v;
        }
        Self::new(d, entries)
    }

    /// `c·self`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.d, self.entries.iter().map(|a| c * a).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `A^{1/2}x`.
    pub fn sqrt_apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.sqrt[i * self.d..(i + 1) * self.d].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Ax`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.entries[i * self.d..(i + 1) * self.d].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `H_A = (ℝ^d, ⟨x, y⟩_A = xᵀAy)` indexed by SPD matrices, embedded in
/// Euclidean ℝ^d by `x ↦ A^{1/2}x`.
#[derive(Debug, Clone, Copy)]
pub struct MatrixHilbertStacking {
    d: usize,
}

impl MatrixHilbertStacking {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        Ok(Self { d })
    }
}

impl BanachStacking for MatrixHilbertStacking {
    type Index = SpdMatrix;
    type Embedded = Vec<f64>;

    fn index_kind(&self) -> IndexKind {
        IndexKind::MatrixIndexed
    }

    fn dim(&self, a: &SpdMatrix) -> Result<usize> {
        check_dim(self.d, a.dim())?;
        Ok(self.d)
    }

    fn norm(&self, a: &SpdMatrix, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(a)?, x.len())?;
        Ok(a.apply(x).iter().zip(x).map(|(p, q)| p * q).sum::<f64>().max(0.0).sqrt())
    }

    fn embed(&self, a: &SpdMatrix, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(a)?, x.len())?;
        Ok(a.sqrt_apply(x))
    }

    fn unifying_distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        Ok(euclid(a, b))
    }

    /// The same coordinates.
    fn approximate(&self, n: &SpdMatrix, from: &SpdMatrix, x: &[f64]) -> Result<Vec<f64>> {
        self.dim(n)?;
        check_dim(self.dim(from)?, x.len())?;
        Ok(x.to_vec())
    }
}

/// `L^p(μ)` spaces over finite measures, embedded in TL^p by `u ↦ (u, μ)`.
#[derive(Debug, Clone, Copy)]
pub struct TlpStacking {
    p: f64,
}

impl TlpStacking {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Invalid(format!("p must be finite and at least 1, got {p}")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl BanachStacking for TlpStacking {
    type Index = EmpiricalMeasure;
    type Embedded = TLpPoint;

    fn index_kind(&self) -> IndexKind {
        IndexKind::MeasureIndexed
    }

    fn dim(&self, mu: &EmpiricalMeasure) -> Result<usize> {
        Ok(mu.len())
    }

    fn norm(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<f64> {
        check_dim(mu.len(), x.len())?;
        Ok(wlr_norm(mu.weights(), x, self.p))
    }

    fn embed(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<TLpPoint> {
        TLpPoint::new(mu.clone(), x.to_vec())
    }

    fn unifying_distance(&self, a: &TLpPoint, b: &TLpPoint) -> Result<f64> {
        Ok(tlp_distance(a, b, self.p)?.0)
    }

    /// Barycentric projection along an optimal `W_p` plan from `n` to `from`.
    fn approximate(&self, n: &EmpiricalMeasure, from: &EmpiricalMeasure, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(from.len(), x.len())?;
        let (_, plan) = wasserstein(n, from, self.p)?;
        barycentric_map(&plan, x)
    }
}

/// ℝ at every level, embedded in the unit circle by `x ↦ e^{iθ(x)}` with
/// `θ(x) = π + πx/√(1+x²)`; the circle carries angular distance divided by π.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircleStacking;

impl CircleStacking {
    pub fn angle(x: f64) -> f64 {
        PI + PI * x / (1.0 + x * x).sqrt()
    }
}

impl BanachStacking for CircleStacking {
    type Index = Level;
    type Embedded = f64;

    fn index_kind(&self) -> IndexKind {
        IndexKind::IntegerSequence
    }

    fn dim(&self, _n: &Level) -> Result<usize> {
        Ok(1)
    }

    fn norm(&self, _n: &Level, x: &[f64]) -> Result<f64> {
        check_dim(1, x.len())?;
        Ok(x[0].abs())
    }

    fn embed(&self, _n: &Level, x: &[f64]) -> Result<f64> {
        check_dim(1, x.len())?;
        Ok(Self::angle(x[0]))
    }

    fn unifying_distance(&self, a: &f64, b: &f64) -> Result<f64> {
        let d = (a - b).abs().rem_euclid(2.0 * PI);
        Ok(d.min(2.0 * PI - d) / PI)
    }

    fn approximate(&self, _n: &Level, _from: &Level, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(1, x.len())?;
        Ok(x.to_vec())
    }
}
