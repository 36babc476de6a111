//! Strictly positive definite kernels and Gram-matrix assembly.
//!
//! Two kernel shapes are supported:
//!
//! * [`IsotropicKernel`]: `k(x, x') = kbar(|x - x'|)` with a non-increasing radial
//!   profile `kbar`. The profile is exposed on its own ([`IsotropicKernel::profile`])
//!   because the error-bound machinery in [`crate::bounds`] needs `kbar(0) - kbar(r)`
//!   without constructing points.
//! * [`ArdMatern52Kernel`]: Matérn-5/2 with one length scale per input dimension,
//!   `k = sf^2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)`, where
//!   `r = sqrt(sum_i (x_i - x'_i)^2 / (2 l_i^2))`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 shape as a function of the scaled distance.
#[inline]
fn matern52_shape(s: f64) -> f64 {
    let a = SQRT_5 * s;
    (1.0 + a + a * a / 3.0) * (-a).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    Laplacian,
    Matern52,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "squared_exponential",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Matern52 => "matern52",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "squared_exponential" | "se" | "rbf" => Some(KernelFamily::SquaredExponential),
            "laplacian" => Some(KernelFamily::Laplacian),
            "matern52" => Some(KernelFamily::Matern52),
            _ => None,
        }
    }
}

/// Radial kernel `k(x, x') = kbar(|x - x'|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicKernel {
    family: KernelFamily,
    signal_scale: f64,
    length_scale: f64,
}

impl IsotropicKernel {
    pub fn new(family: KernelFamily, signal_scale: f64, length_scale: f64) -> Result<Self> {
        check_positive("signal_scale", signal_scale)?;
        check_positive("length_scale", length_scale)?;
        Ok(Self {
            family,
            signal_scale,
            length_scale,
        })
    }

    pub fn squared_exponential(signal_scale: f64, length_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, signal_scale, length_scale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn signal_scale(&self) -> f64 {
        self.signal_scale
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// `kbar(0) = sf^2`.
    pub fn variance(&self) -> f64 {
        self.signal_scale * self.signal_scale
    }

    /// Radial profile `kbar(r)` for `r >= 0`.
    pub fn profile(&self, r: f64) -> f64 {
        let s = r / self.length_scale;
        let shape = match self.family {
            KernelFamily::SquaredExponential => (-0.5 * s * s).exp(),
            KernelFamily::Laplacian => (-s).exp(),
            KernelFamily::Matern52 => matern52_shape(s),
        };
        self.variance() * shape
    }

    /// `1 - kbar(r)/kbar(0)`, accurate for small `r`.
    pub fn normalized_deficit(&self, r: f64) -> f64 {
        let s = r / self.length_scale;
        match self.family {
            KernelFamily::SquaredExponential => -(-0.5 * s * s).exp_m1(),
            KernelFamily::Laplacian => -(-s).exp_m1(),
            KernelFamily::Matern52 => {
                let x = SQRT_5 * s;
                if x < 1e-3 {
                    // 1 - (1 + x + x^2/3) e^{-x} = x^2/6 - x^4/24 + x^5/45 - ...
                    let x2 = x * x;
                    x2 / 6.0 - x2 * x2 / 24.0 + x2 * x2 * x / 45.0
                } else {
                    1.0 - matern52_shape(s)
                }
            }
        }
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        self.profile(euclidean(a, b))
    }
}

/// Matérn-5/2 kernel with automatic relevance determination.
#[derive(Debug, Clone, PartialEq)]
pub struct ArdMatern52Kernel {
    signal_scale: f64,
    length_scales: Vec<f64>,
}

impl ArdMatern52Kernel {
    pub fn new(signal_scale: f64, length_scales: Vec<f64>) -> Result<Self> {
        check_positive("signal_scale", signal_scale)?;
        if length_scales.is_empty() {
            return Err(invalid("length_scales", "need at least one dimension"));
        }
        for &l in &length_scales {
            check_positive("length_scales", l)?;
        }
        Ok(Self {
            signal_scale,
            length_scales,
        })
    }

    pub fn signal_scale(&self) -> f64 {
        self.signal_scale
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn variance(&self) -> f64 {
        self.signal_scale * self.signal_scale
    }

    /// `r = sqrt(sum_i (a_i - b_i)^2 / (2 l_i^2))`.
    pub fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                0.5 * d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Isotropic Matérn-5/2 kernel that lower-bounds this one pointwise.
    ///
    /// With `l_min` the smallest length scale, `r <= |a - b| / (sqrt2 l_min)`, and the
    /// Matérn shape is decreasing, so the returned radial kernel never exceeds `self`.
    pub fn isotropic_minorant(&self) -> IsotropicKernel {
        let l_min = self
            .length_scales
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        IsotropicKernel {
            family: KernelFamily::Matern52,
            signal_scale: self.signal_scale,
            length_scale: std::f64::consts::SQRT_2 * l_min,
        }
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance() * matern52_shape(self.scaled_distance(a, b))
    }
}

/// Any kernel usable by the interpolant.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Isotropic(IsotropicKernel),
    ArdMatern52(ArdMatern52Kernel),
}

impl From<IsotropicKernel> for Kernel {
    fn from(k: IsotropicKernel) -> Self {
        Kernel::Isotropic(k)
    }
}

impl From<ArdMatern52Kernel> for Kernel {
    fn from(k: ArdMatern52Kernel) -> Self {
        Kernel::ArdMatern52(k)
    }
}

impl Kernel {
    /// `k(x, x) = sf^2` for every supported family.
    pub fn variance(&self) -> f64 {
        match self {
            Kernel::Isotropic(k) => k.variance(),
            Kernel::ArdMatern52(k) => k.variance(),
        }
    }

    /// Input dimension fixed by the kernel, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Kernel::Isotropic(_) => None,
            Kernel::ArdMatern52(k) => Some(k.dim()),
        }
    }

    pub fn isotropic(&self) -> Option<&IsotropicKernel> {
        match self {
            Kernel::Isotropic(k) => Some(k),
            Kernel::ArdMatern52(_) => None,
        }
    }

    /// Radial kernel below `self` pointwise: itself when isotropic, the Matérn
    /// minorant for ARD kernels.
    pub fn radial_minorant(&self) -> IsotropicKernel {
        match self {
            Kernel::Isotropic(k) => k.clone(),
            Kernel::ArdMatern52(k) => k.isotropic_minorant(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        self.check_dim(a.len())?;
        Ok(self.eval_unchecked(a, b))
    }

    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Isotropic(k) => k.eval_unchecked(a, b),
            Kernel::ArdMatern52(k) => k.eval_unchecked(a, b),
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim() {
            Some(expected) if expected != dim => Err(Error::DimensionMismatch {
                expected,
                actual: dim,
            }),
            _ => Ok(()),
        }
    }

    /// Gram matrix `K_ij = k(x_i, x_j)`. Rows are assembled in parallel.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let dim = common_dim(points)?;
        if let Some(d) = dim {
            self.check_dim(d)?;
        }
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| self.eval_unchecked(&points[i], &points[j]))
                    .collect()
            })
            .collect();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            // mirror the upper triangle so the matrix is symmetric bit-for-bit
            if i <= j {
                rows[i][j]
            } else {
                rows[j][i]
            }
        }))
    }

    /// Kernel vector `[k(x_1, x), ..., k(x_N, x)]`.
    pub fn cross(&self, points: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            points.len(),
            points.iter().map(|p| self.eval_unchecked(p, x)),
        )
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

fn common_dim(points: &[Vec<f64>]) -> Result<Option<usize>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    for p in points {
        if p.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: p.len(),
            });
        }
    }
    Ok(Some(first.len()))
}

/// Euclidean distance between two equal-length slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
