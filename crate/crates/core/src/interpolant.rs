//! Minimal-norm kernel interpolation of the inverse model.
//!
//! Given training pairs `(xi_i, u_i)`, the estimate is `c_hat(xi) = k(xi)^T (K + lambda I)^{-1} u`.
//! With `lambda = 0` this is the minimum-RKHS-norm interpolant; `lambda > 0` gives
//! the ridge variant used for noisy data.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::{parse_field, NarxDataset};
use crate::error::{Error, Result};
use crate::kernels::{ArdMatern52Kernel, IsotropicKernel, Kernel, KernelFamily};

/// First jitter tried, relative to `kbar(0)`.
pub const JITTER_START: f64 = 1e-12;
/// Largest jitter tried before giving up, relative to `kbar(0)`.
pub const JITTER_MAX: f64 = 1e-6;
/// Upper limit on iterative-refinement sweeps after the Cholesky solve.
pub const REFINE_SWEEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct Interpolant {
    kernel: Kernel,
    inputs: Vec<Vec<f64>>,
    outputs: DVector<f64>,
    weights: DVector<f64>,
    regularization: f64,
    jitter: f64,
    factor: Cholesky<f64, Dyn>,
}

/// Cholesky of `K + lambda I` with the jitter escalation policy.
fn factorize(gram: &DMatrix<f64>, regularization: f64, variance: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = gram.nrows();
    let mut shifted = gram.clone();
    for i in 0..n {
        shifted[(i, i)] += regularization;
    }
    if let Some(chol) = shifted.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * variance;
        let mut m = shifted.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol, jitter));
        }
        rel *= 10.0;
    }
    let diag = shifted.diagonal();
    Err(Error::Factorization {
        size: n,
        max_jitter: JITTER_MAX * variance,
        min_diagonal: diag.min(),
        max_diagonal: diag.max(),
    })
}

/// Solve `A x = b` given a Cholesky factor of `A + jitter I`, refining against
/// the explicit `A` until the residual stops shrinking (at most `REFINE_SWEEPS`
/// sweeps). On the ill-conditioned Gram matrices of densely sampled trajectories
/// this pulls the training residual down to rounding level and removes the bias
/// the jitter would otherwise leave behind.
fn refined_solve(a: &DMatrix<f64>, factor: &Cholesky<f64, Dyn>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = factor.solve(b);
    let mut residual = b - a * &x;
    let mut norm = residual.amax();
    for _ in 0..REFINE_SWEEPS {
        let candidate = &x + factor.solve(&residual);
        let next_residual = b - a * &candidate;
        let next_norm = next_residual.amax();
        if !(next_norm < norm) {
            break;
        }
        x = candidate;
        residual = next_residual;
        norm = next_norm;
    }
    x
}

impl Interpolant {
    pub fn fit(kernel: Kernel, dataset: &NarxDataset, regularization: f64) -> Result<Self> {
        Self::fit_points(kernel, dataset.inputs(), dataset.outputs(), regularization)
    }

    /// Fit on raw `(inputs, outputs)`; inputs must be pairwise distinct.
    pub fn fit_points(
        kernel: Kernel,
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        regularization: f64,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: outputs.len(),
            });
        }
        if !(regularization >= 0.0 && regularization.is_finite()) {
            return Err(crate::error::invalid(
                "regularization",
                format!("must be finite and >= 0, got {regularization}"),
            ));
        }
        let gram = kernel.gram(&inputs)?;
        let (factor, jitter) = factorize(&gram, regularization, kernel.variance())?;
        let mut system = gram;
        for i in 0..system.nrows() {
            system[(i, i)] += regularization;
        }
        let outputs = DVector::from_vec(outputs);
        let weights = refined_solve(&system, &factor, &outputs);
        Ok(Self {
            kernel,
            inputs,
            outputs,
            weights,
            regularization,
            jitter,
            factor,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn training_outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    /// Diagonal jitter the factorization needed on top of `lambda` (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    fn check_query(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: xi.len(),
            });
        }
        Ok(())
    }

    /// `c_hat(xi) = k(xi)^T alpha`.
    pub fn predict(&self, xi: &[f64]) -> Result<f64> {
        self.check_query(xi)?;
        Ok(self.predict_unchecked(xi))
    }

    pub(crate) fn predict_unchecked(&self, xi: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| self.kernel.eval_unchecked(p, xi) * w)
            .sum()
    }

    /// `sqrt(u^T K^{-1} u)`, the RKHS norm of the interpolant.
    pub fn rkhs_norm_estimate(&self) -> Result<f64> {
        if self.regularization > 0.0 {
            return Err(Error::RegularizedNorm(self.regularization));
        }
        Ok(self.outputs.dot(&self.weights).max(0.0).sqrt())
    }

    /// Power function `sqrt(k(xi, xi) - k(xi)^T K^{-1} k(xi))`, clamped at zero.
    pub fn power_function(&self, xi: &[f64]) -> Result<f64> {
        self.check_query(xi)?;
        let kx = self.kernel.cross(&self.inputs, xi);
        let solved = self.factor.solve(&kx);
        let value = self.kernel.eval_unchecked(xi, xi) - kx.dot(&solved);
        Ok(value.max(0.0).sqrt())
    }

    /// Largest `|c_hat(xi_i) - u_i|` over the training set.
    pub fn max_training_residual(&self) -> f64 {
        self.inputs
            .iter()
            .zip(self.outputs.iter())
            .map(|(xi, u)| (self.predict_unchecked(xi) - u).abs())
            .fold(0.0, f64::max)
    }

    /// Sum of leave-one-out log predictive densities of the Gaussian process with
    /// this kernel and noise variance `lambda + jitter`.
    pub fn loo_log_predictive_density(&self) -> f64 {
        let n = self.len();
        let inverse = self.factor.inverse();
        let coeffs = &self.weights;
        let mut total = 0.0;
        for i in 0..n {
            let precision = inverse[(i, i)];
            if !(precision > 0.0) {
                return f64::NEG_INFINITY;
            }
            let variance = 1.0 / precision;
            let err = coeffs[i] / precision;
            total += -0.5 * variance.ln()
                - 0.5 * err * err / variance
                - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        total
    }

    /// Structured text dump: header lines `key=value`, then one row per training
    /// point with `xi_1..xi_d,u,alpha`. Values use round-trip decimal formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# inverse-model interpolant\n");
        match &self.kernel {
            Kernel::Isotropic(k) => {
                let _ = writeln!(out, "family={}", k.family().name());
                let _ = writeln!(out, "signal_scale={}", k.signal_scale());
                let _ = writeln!(out, "length_scale={}", k.length_scale());
            }
            Kernel::ArdMatern52(k) => {
                let _ = writeln!(out, "family=matern52_ard");
                let _ = writeln!(out, "signal_scale={}", k.signal_scale());
                let ls: Vec<String> = k.length_scales().iter().map(|l| l.to_string()).collect();
                let _ = writeln!(out, "length_scales={}", ls.join(","));
            }
        }
        let _ = writeln!(out, "regularization={}", self.regularization);
        let _ = writeln!(out, "jitter={}", self.jitter);
        let _ = writeln!(out, "n={}", self.len());
        let _ = writeln!(out, "dim={}", self.input_dim());
        out.push_str("[data]\n");
        for ((xi, u), a) in self.inputs.iter().zip(self.outputs.iter()).zip(self.weights.iter()) {
            for v in xi {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{u},{a}");
        }
        out
    }

    /// Reload a dump. Predictions use the stored weights verbatim; the
    /// factorization behind the diagnostics is recomputed with the stored jitter.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut lines = text.lines().enumerate();
        for (idx, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "[data]" {
                break;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            header.insert(k.trim().to_string(), (v.trim().to_string(), idx + 1));
        }
        let get = |key: &str| {
            header.get(key).ok_or(Error::Parse {
                line: 0,
                message: format!("missing key `{key}`"),
            })
        };
        let num = |key: &str| -> Result<f64> {
            let (v, line) = get(key)?;
            parse_field(v, *line)
        };
        let (family, _) = get("family")?;
        let kernel: Kernel = if family == "matern52_ard" {
            let (ls, line) = get("length_scales")?;
            let ls = ls
                .split(',')
                .map(|s| parse_field(s.trim(), *line))
                .collect::<Result<Vec<f64>>>()?;
            ArdMatern52Kernel::new(num("signal_scale")?, ls)?.into()
        } else {
            let fam = KernelFamily::from_name(family).ok_or(Error::Parse {
                line: get("family")?.1,
                message: format!("unknown kernel family `{family}`"),
            })?;
            IsotropicKernel::new(fam, num("signal_scale")?, num("length_scale")?)?.into()
        };
        let regularization = num("regularization")?;
        let jitter = num("jitter")?;
        let n: usize = {
            let (v, line) = get("n")?;
            parse_field(v, *line)?
        };
        let dim: usize = {
            let (v, line) = get("dim")?;
            parse_field(v, *line)?
        };
        let mut inputs = Vec::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields = line
                .split(',')
                .map(|s| parse_field::<f64>(s.trim(), idx + 1))
                .collect::<Result<Vec<_>>>()?;
            if fields.len() != dim + 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {} fields, got {}", dim + 2, fields.len()),
                });
            }
            inputs.push(fields[..dim].to_vec());
            outputs.push(fields[dim]);
            weights.push(fields[dim + 1]);
        }
        if inputs.len() != n || n == 0 {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {n} data rows, got {}", inputs.len()),
            });
        }
        let mut system = kernel.gram(&inputs)?;
        for i in 0..n {
            system[(i, i)] += regularization + jitter;
        }
        let factor = system.clone().cholesky().ok_or(Error::Factorization {
            size: n,
            max_jitter: jitter,
            min_diagonal: system.diagonal().min(),
            max_diagonal: system.diagonal().max(),
        })?;
        Ok(Self {
            kernel,
            inputs,
            outputs: DVector::from_vec(outputs),
            weights: DVector::from_vec(weights),
            regularization,
            jitter,
            factor,
        })
    }
}

/// Candidate hyperparameters for [`fit_hyperparameters`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSearch {
    /// Isotropic family; every `(signal_scale, length_scale)` pair is a candidate.
    Isotropic {
        family: KernelFamily,
        signal_scales: Vec<f64>,
        length_scales: Vec<f64>,
    },
    /// ARD Matérn-5/2; every `(signal_scale, length_scales)` pair is a candidate.
    ArdMatern52 {
        signal_scales: Vec<f64>,
        length_scales: Vec<Vec<f64>>,
    },
}

impl KernelSearch {
    pub fn candidates(&self) -> Result<Vec<Kernel>> {
        let mut out = Vec::new();
        match self {
            KernelSearch::Isotropic {
                family,
                signal_scales,
                length_scales,
            } => {
                for &s in signal_scales {
                    for &l in length_scales {
                        out.push(IsotropicKernel::new(*family, s, l)?.into());
                    }
                }
            }
            KernelSearch::ArdMatern52 {
                signal_scales,
                length_scales,
            } => {
                for &s in signal_scales {
                    for ls in length_scales {
                        out.push(ArdMatern52Kernel::new(s, ls.clone())?.into());
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Pick the grid candidate with the largest leave-one-out log predictive density
/// at fixed `lambda`. Candidates whose Gram matrix cannot be factorized are skipped;
/// exact ties go to the candidate that compares smallest, so the result does not
/// depend on grid order.
pub fn fit_hyperparameters(
    search: &KernelSearch,
    dataset: &NarxDataset,
    regularization: f64,
) -> Result<Kernel> {
    let candidates = search.candidates()?;
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs = dataset.inputs();
    let outputs = dataset.outputs();
    let mut best: Option<(f64, Kernel)> = None;
    let mut last_err = None;
    for kernel in candidates {
        let score = match Interpolant::fit_points(kernel.clone(), inputs.clone(), outputs.clone(), regularization) {
            Ok(fit) => fit.loo_log_predictive_density(),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if !score.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((s, k)) => score > *s || (score == *s && kernel_key(&kernel) < kernel_key(k)),
        };
        if better {
            best = Some((score, kernel));
        }
    }
    match best {
        Some((_, k)) => Ok(k),
        None => Err(last_err.unwrap_or(Error::EmptyGrid)),
    }
}

fn kernel_key(k: &Kernel) -> Vec<f64> {
    match k {
        Kernel::Isotropic(k) => vec![k.signal_scale(), k.length_scale()],
        Kernel::ArdMatern52(k) => {
            let mut v = vec![k.signal_scale()];
            v.extend_from_slice(k.length_scales());
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, Delay, Trajectory};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(l: f64) -> Kernel {
        IsotropicKernel::squared_exponential(1.0, l).unwrap().into()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn single_point_closed_forms() {
        let l = 2.0 * std::f64::consts::SQRT_2;
        let fit = Interpolant::fit_points(se(l), vec![vec![0.0, 0.0]], vec![0.7], 0.0).unwrap();
        assert_relative_eq!(fit.predict(&[0.0, 0.0]).unwrap(), 0.7, epsilon = 1e-15);
        let d: f64 = 1.3;
        let far = [d, 0.0];
        assert_relative_eq!(
            fit.predict(&far).unwrap(),
            0.7 * (-d * d / (2.0 * l * l)).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            fit.power_function(&far).unwrap(),
            (1.0 - (-d * d / (l * l)).exp()).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(fit.rkhs_norm_estimate().unwrap(), 0.7, epsilon = 1e-15);
        assert_eq!(fit.power_function(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn interpolates_training_points() {
        let pts = random_points(40, 4, 1);
        let ys: Vec<f64> = pts.iter().map(|p| p[0].sin() + p[1] * p[2]).collect();
        let fit = Interpolant::fit_points(se(1.0), pts.clone(), ys.clone(), 0.0).unwrap();
        assert_eq!(fit.jitter(), 0.0);
        assert!(fit.max_training_residual() <= 1e-8, "{}", fit.max_training_residual());
        for p in &pts {
            assert!(fit.power_function(p).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn far_away_prediction_vanishes() {
        let pts = random_points(10, 2, 2);
        let fit = Interpolant::fit_points(se(0.5), pts, vec![1.0; 10], 0.0).unwrap();
        assert!(fit.predict(&[1e3, 1e3]).unwrap().abs() < 1e-300);
    }

    #[test]
    fn dimension_checked() {
        let fit = Interpolant::fit_points(se(1.0), vec![vec![0.0, 1.0]], vec![1.0], 0.0).unwrap();
        assert!(matches!(fit.predict(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(Interpolant::fit_points(se(1.0), vec![], vec![], 0.0).is_err());
    }

    #[test]
    fn rkhs_norm_matches_dense_inverse() {
        let pts = random_points(25, 3, 5);
        let ys: Vec<f64> = pts.iter().map(|p| p.iter().sum::<f64>().cos()).collect();
        let k = se(0.8);
        let fit = Interpolant::fit_points(k.clone(), pts.clone(), ys.clone(), 0.0).unwrap();
        let gram = k.gram(&pts).unwrap();
        let inv = gram.try_inverse().unwrap();
        let u = DVector::from_vec(ys);
        let quad = (u.transpose() * inv * &u)[(0, 0)];
        assert_relative_eq!(fit.rkhs_norm_estimate().unwrap(), quad.sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn rkhs_norm_refused_with_ridge() {
        let fit = Interpolant::fit_points(se(1.0), vec![vec![0.0]], vec![1.0], 0.1).unwrap();
        assert!(matches!(fit.rkhs_norm_estimate(), Err(Error::RegularizedNorm(_))));
    }

    #[test]
    fn ridge_norm_monotone_in_lambda() {
        let pts = random_points(30, 3, 9);
        let ys: Vec<f64> = pts.iter().map(|p| p[0] - p[2] * p[2]).collect();
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let fit = Interpolant::fit_points(se(0.7), pts.clone(), ys.clone(), lambda).unwrap();
            let quad = fit.training_outputs().dot(fit.weights());
            assert!(quad <= prev * (1.0 + 1e-12), "lambda {lambda}: {quad} > {prev}");
            prev = quad;
        }
    }

    #[test]
    fn prediction_linear_in_outputs() {
        let pts = random_points(20, 2, 4);
        let u: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let v: Vec<f64> = pts.iter().map(|p| p[1] * p[1]).collect();
        let (a, b) = (1.7, -0.4);
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let fu = Interpolant::fit_points(se(0.9), pts.clone(), u, 0.0).unwrap();
        let fv = Interpolant::fit_points(se(0.9), pts.clone(), v, 0.0).unwrap();
        let fw = Interpolant::fit_points(se(0.9), pts, w, 0.0).unwrap();
        for q in random_points(50, 2, 11) {
            let lhs = fw.predict(&q).unwrap();
            let rhs = a * fu.predict(&q).unwrap() + b * fv.predict(&q).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn duplicate_points_fail_then_jitter_reports() {
        let pts = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        // duplicates: rank one, the jitter makes it factorizable
        let fit = Interpolant::fit_points(se(1.0), pts, vec![1.0, 1.0], 0.0).unwrap();
        assert!(fit.jitter() > 0.0 && fit.jitter() <= JITTER_MAX);
    }

    #[test]
    fn factorization_failure_reported() {
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize(&gram, 0.0, 1.0) {
            Err(Error::Factorization { size: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let pts = random_points(12, 4, 6);
        let ys: Vec<f64> = pts.iter().map(|p| p[3]).collect();
        let k: Kernel = ArdMatern52Kernel::new(1.5, vec![0.3, 0.4, 0.5, 0.6]).unwrap().into();
        let fit = Interpolant::fit_points(k, pts, ys, 1e-3).unwrap();
        let text = fit.to_text();
        let back = Interpolant::from_text(&text).unwrap();
        assert_eq!(back.kernel(), fit.kernel());
        assert_eq!(back.weights(), fit.weights());
        assert_eq!(back.to_text(), text);
        let q = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(back.predict(&q).unwrap(), fit.predict(&q).unwrap());
    }

    fn known_function_dataset(l_true: f64) -> NarxDataset {
        // targets drawn from an explicit combination of SE kernel sections
        let centers = random_points(6, 2, 21);
        let betas = [1.0, -0.7, 0.5, 0.9, -1.2, 0.3];
        let truth = |x: &[f64]| -> f64 {
            centers
                .iter()
                .zip(betas)
                .map(|(c, b)| b * se(l_true).eval(c, x).unwrap())
                .sum()
        };
        let pts = random_points(60, 2, 22);
        let records = pts
            .iter()
            .map(|p| {
                // NarxDataset with n = 1: xi = [target; zeta]
                let u = truth(p);
                crate::data::Record {
                    xi: p.clone(),
                    zeta: vec![p[1]],
                    target: p[0],
                    input: u,
                    successor: vec![p[0]],
                }
            })
            .collect();
        NarxDataset::from_records(1, Delay::One, records).unwrap()
    }

    #[test]
    fn hyperparameter_search_recovers_length_scale() {
        let l_true = 0.4;
        let ds = known_function_dataset(l_true);
        let grid = KernelSearch::Isotropic {
            family: KernelFamily::SquaredExponential,
            signal_scales: vec![1.0],
            length_scales: vec![l_true, 10.0 * l_true],
        };
        let chosen = fit_hyperparameters(&grid, &ds, 1e-8).unwrap();
        assert_eq!(chosen.isotropic().unwrap().length_scale(), l_true);

        let permuted = KernelSearch::Isotropic {
            family: KernelFamily::SquaredExponential,
            signal_scales: vec![1.0],
            length_scales: vec![10.0 * l_true, l_true],
        };
        assert_eq!(fit_hyperparameters(&permuted, &ds, 1e-8).unwrap(), chosen);

        let single = KernelSearch::Isotropic {
            family: KernelFamily::SquaredExponential,
            signal_scales: vec![2.0],
            length_scales: vec![3.0],
        };
        let only = fit_hyperparameters(&single, &ds, 1e-8).unwrap();
        assert_eq!(only.isotropic().unwrap().length_scale(), 3.0);

        let empty = KernelSearch::Isotropic {
            family: KernelFamily::SquaredExponential,
            signal_scales: vec![],
            length_scales: vec![1.0],
        };
        assert_eq!(fit_hyperparameters(&empty, &ds, 0.0), Err(Error::EmptyGrid));
    }

    #[test]
    fn fits_from_dataset() {
        let traj = Trajectory::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.5, 0.2, 0.9, 0.4]).unwrap();
        let ds = build_dataset(&traj, 2, Delay::One).unwrap();
        let fit = Interpolant::fit(se(1.0), &ds, 0.0).unwrap();
        for r in ds.records() {
            assert!((fit.predict(&r.xi).unwrap() - r.input).abs() <= 1e-8);
        }
    }
}
