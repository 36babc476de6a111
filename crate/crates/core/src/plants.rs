//! Benchmark plants, data collection, measurement noise and the closed loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{ControllerConfig, Descent, StepCertificate};
use crate::data::{shift_state, Delay, Trajectory};
use crate::error::{Error, Result};

/// Tolerance on the radicand band of the numerical plant.
pub const BAND_TOLERANCE: f64 = 1e-9;

/// A single-input single-output NARX plant.
pub trait Plant: Send + Sync {
    fn name(&self) -> &'static str;
    fn order(&self) -> usize;
    fn delay(&self) -> Delay;
    /// `y(t+1)` from `zeta(t)` and `u(t)`.
    fn next_output(&self, zeta: &[f64], u: f64) -> Result<f64>;
    /// `y(t+nu)` from `zeta(t)` and `u(t)`: the map the inverse model inverts.
    fn delayed_output(&self, zeta: &[f64], u: f64) -> Result<f64>;
    fn input_feasible(&self, _zeta: &[f64], _u: f64) -> bool {
        true
    }
    fn output_feasible(&self, _y: f64) -> bool {
        true
    }
    /// Exact inverse `c([y_target; zeta])`, when known.
    fn inverse(&self, xi: &[f64]) -> Option<f64>;
}

fn check_state(zeta: &[f64], order: usize) -> Result<()> {
    if zeta.len() == 2 * order - 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: 2 * order - 1,
            actual: zeta.len(),
        })
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `y(t+1) = -3 + sqrt(-|zeta|^2 - 16 ln u)` with `4 <= -|zeta|^2 - 16 ln u <= 16`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NumericalPlant;

impl NumericalPlant {
    /// Input `u*` with `f([0; 0; u*], u*) = 0`, i.e. the root of `u^2 + 16 ln u + 9`.
    pub fn equilibrium_input() -> f64 {
        let (mut lo, mut hi) = (0.1f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid + 16.0 * mid.ln() + 9.0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn radicand(zeta: &[f64], u: f64) -> f64 {
        -norm_sq(zeta) - 16.0 * u.ln()
    }

    /// Input realising a given radicand.
    pub fn input_for_radicand(zeta: &[f64], radicand: f64) -> f64 {
        (-(radicand + norm_sq(zeta)) / 16.0).exp()
    }

    pub fn step(&self, zeta: &[f64], u: f64) -> Result<f64> {
        check_state(zeta, 2)?;
        let s = Self::radicand(zeta, u);
        if !(u > 0.0) || !(4.0 - BAND_TOLERANCE..=16.0 + BAND_TOLERANCE).contains(&s) {
            return Err(Error::InfeasibleInput {
                input: u,
                state: zeta.to_vec(),
                reason: format!("radicand {s} outside [4, 16]"),
            });
        }
        Ok(-3.0 + s.clamp(4.0, 16.0).sqrt())
    }

    /// `exp(-((y+ + 3)^2 + |zeta|^2) / 16)`.
    pub fn inverse_oracle(xi: &[f64]) -> f64 {
        let y = xi[0] + 3.0;
        (-(y * y + norm_sq(&xi[1..])) / 16.0).exp()
    }
}

impl Plant for NumericalPlant {
    fn name(&self) -> &'static str {
        "numerical"
    }

    fn order(&self) -> usize {
        2
    }

    fn delay(&self) -> Delay {
        Delay::One
    }

    fn next_output(&self, zeta: &[f64], u: f64) -> Result<f64> {
        self.step(zeta, u)
    }

    fn delayed_output(&self, zeta: &[f64], u: f64) -> Result<f64> {
        self.step(zeta, u)
    }

    fn input_feasible(&self, zeta: &[f64], u: f64) -> bool {
        let s = Self::radicand(zeta, u);
        u > 0.0 && (4.0 - BAND_TOLERANCE..=16.0 + BAND_TOLERANCE).contains(&s)
    }

    fn output_feasible(&self, y: f64) -> bool {
        (-1.0..=1.0).contains(&y)
    }

    fn inverse(&self, xi: &[f64]) -> Option<f64> {
        Some(Self::inverse_oracle(xi))
    }
}

/// Discretized inverted pendulum with input delay two.
///
/// `y(t+2) = a1 y(t+1) + a0 y(t) + g' sin y(t) + b' u(t)` where
/// `a1 = 2 - b Ts/(m l^2)`, `a0 = -1 + b Ts/(m l^2)`, `g' = g Ts^2 / l`, `b' = Ts^2/(m l^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum {
    pub mass: f64,
    pub friction: f64,
    pub gravity: f64,
    pub length: f64,
    pub sample_time: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            mass: 1.0,
            friction: 0.4,
            gravity: 9.8,
            length: 0.3,
            sample_time: 0.001,
        }
    }
}

impl Pendulum {
    fn beta(&self) -> f64 {
        self.friction * self.sample_time / (self.mass * self.length * self.length)
    }

    pub fn a1(&self) -> f64 {
        2.0 - self.beta()
    }

    pub fn a0(&self) -> f64 {
        -1.0 + self.beta()
    }

    pub fn gravity_gain(&self) -> f64 {
        self.gravity * self.sample_time * self.sample_time / self.length
    }

    pub fn input_gain(&self) -> f64 {
        self.sample_time * self.sample_time / (self.mass * self.length * self.length)
    }

    /// Global Euclidean Lipschitz constants `(L_f, L_c)` of the one-step map
    /// `zeta -> y(t+1)` and of the inverse `[y(t+2); zeta] -> u(t)`, from the
    /// supremum of each partial derivative over `cos` in `[-1, 1]`.
    pub fn lipschitz_constants(&self) -> (f64, f64) {
        let (a1, a0, gg, b) = (self.a1(), self.a0(), self.gravity_gain(), self.input_gain());
        let d_prev = a0.abs() + gg;
        let l_f = (d_prev * d_prev + a1 * a1 + b * b).sqrt();
        let c = [1.0 / b, a1 * d_prev / b, ((a1 * a1 + a0).abs() + gg) / b, a1];
        let l_c = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        (l_f, l_c)
    }

    /// `y(t+1)` from `zeta(t) = [y(t-1); y(t); u(t-1)]`.
    pub fn step(&self, zeta: &[f64]) -> f64 {
        self.a1() * zeta[1] + self.a0() * zeta[0] + self.gravity_gain() * zeta[0].sin() + self.input_gain() * zeta[2]
    }

    /// `y(t+2)` from `zeta(t)` and `u(t)`.
    pub fn two_step(&self, zeta: &[f64], u: f64) -> f64 {
        let y1 = self.step(zeta);
        self.a1() * y1 + self.a0() * zeta[1] + self.gravity_gain() * zeta[1].sin() + self.input_gain() * u
    }

    /// Inverse of [`Pendulum::two_step`] by solving for `u` after computing `y(t+1)`.
    pub fn inverse_direct(&self, xi: &[f64]) -> f64 {
        let (y2, zeta) = (xi[0], &xi[1..]);
        let y1 = self.step(zeta);
        (y2 - self.a1() * y1 - self.a0() * zeta[1] - self.gravity_gain() * zeta[1].sin()) / self.input_gain()
    }

    /// Same inverse in expanded form, with `a1^2 + a0 = 3 - 3 beta + beta^2`.
    pub fn inverse_expanded(&self, xi: &[f64]) -> f64 {
        let (y2, ym1, y0, um1) = (xi[0], xi[1], xi[2], xi[3]);
        let beta = self.beta();
        let gg = self.gravity_gain();
        let inner = y2
            - (3.0 - 3.0 * beta + beta * beta) * y0
            - gg * y0.sin()
            - self.a1() * (self.a0() * ym1 + gg * ym1.sin() + self.input_gain() * um1);
        inner / self.input_gain()
    }
}

impl Plant for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn order(&self) -> usize {
        2
    }

    fn delay(&self) -> Delay {
        Delay::Two
    }

    fn next_output(&self, zeta: &[f64], _u: f64) -> Result<f64> {
        check_state(zeta, 2)?;
        Ok(self.step(zeta))
    }

    fn delayed_output(&self, zeta: &[f64], u: f64) -> Result<f64> {
        check_state(zeta, 2)?;
        Ok(self.two_step(zeta, u))
    }

    fn inverse(&self, xi: &[f64]) -> Option<f64> {
        Some(self.inverse_direct(xi))
    }
}

/// Standard deviations of the dataset and online measurement noise, plus the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub dataset_std: f64,
    pub online_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none(seed: u64) -> Self {
        Self {
            dataset_std: 0.0,
            online_std: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dataset_std", self.dataset_std), ("online_std", self.online_std)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(crate::error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Stream ids keep the dataset noise, online noise and input sampling independent.
pub mod streams {
    pub const NUMERICAL_INPUTS: u64 = 1;
    pub const DATASET_NOISE: u64 = 1 << 20;
    pub const ONLINE_NOISE: u64 = 2 << 20;
}

/// Reproducible generator for stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `draws` zero-mean Gaussian samples with standard deviation `std`.
pub fn gaussian_noise<R: Rng>(rng: &mut R, std: f64, draws: usize) -> Result<Vec<f64>> {
    if std == 0.0 {
        return Ok(vec![0.0; draws]);
    }
    let normal = Normal::new(0.0, std).map_err(|e| crate::error::invalid("std", e.to_string()))?;
    Ok((0..draws).map(|_| normal.sample(rng)).collect())
}

/// Attach noisy copies of the outputs; inputs are untouched. Zero noise returns the trajectory as is.
pub fn add_noise<R: Rng>(traj: &Trajectory, std: f64, rng: &mut R) -> Result<Trajectory> {
    if !(std >= 0.0) {
        return Err(crate::error::invalid("std", format!("must be >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(traj.clone());
    }
    let noise = gaussian_noise(rng, std, traj.outputs().len())?;
    let noisy = traj.outputs().iter().zip(&noise).map(|(y, v)| y + v).collect();
    traj.clone().with_noisy_outputs(noisy)
}

/// Grid of `points` equally spaced values over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// One-step experiments on the numerical plant.
///
/// Initial states `[y; y; u_prev]` use tied outputs from a 7-point grid over
/// `[-1, 1]` and `u_prev` from a 4-point grid over `[0, 1]`; each gets 10 inputs
/// drawn by sampling the radicand uniformly in `[4, 16]`. Each trajectory holds
/// outputs `[y(-1), y(0), y(1)]` and inputs `[u(-1), u(0)]`.
pub fn collect_numerical_dataset(seed: u64) -> Result<Vec<Trajectory>> {
    let plant = NumericalPlant;
    let mut rng = rng_stream(seed, streams::NUMERICAL_INPUTS);
    let mut trajs = Vec::with_capacity(280);
    for &y in &uniform_grid(-1.0, 1.0, 7) {
        for &u_prev in &uniform_grid(0.0, 1.0, 4) {
            let zeta = [y, y, u_prev];
            for _ in 0..10 {
                let s: f64 = rng.random_range(4.0..=16.0);
                let u = NumericalPlant::input_for_radicand(&zeta, s);
                let y_next = plant.step(&zeta, u)?;
                trajs.push(Trajectory::new(vec![u_prev, u], vec![y, y, y_next])?);
            }
        }
    }
    Ok(trajs)
}

/// PI controller `u(t) = -Kp y(t) - KI I(t)`, `I(t) = I(t-1) + Ts y(t)`, `I(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiController {
    pub kp: f64,
    pub ki: f64,
    pub sample_time: f64,
}

/// Gains and initial output of the six training runs.
pub const PENDULUM_PI_RUNS: [(f64, f64, f64); 6] = [
    (20.0, 0.01, 0.22),
    (20.0, 0.01, -0.22),
    (15.0, 0.01, 0.18),
    (15.0, 0.01, -0.18),
    (12.5, 0.01, 0.16),
    (12.5, 0.01, -0.16),
];

/// Length (number of inputs) of each pendulum training trajectory.
pub const PENDULUM_TRAJECTORY_LEN: usize = 200;

/// Closed-loop PI run from `zeta(0) = [a; a; 0]` with `len` applied inputs.
///
/// The stored trajectory starts at `y(-1)`, `u(-1)`; the PI law sees measured
/// outputs `y + v` when `measurement_noise` is given.
pub fn pi_trajectory(
    plant: &Pendulum,
    pi: PiController,
    a: f64,
    len: usize,
    measurement_noise: Option<&[f64]>,
) -> Result<Trajectory> {
    if len < 1 {
        return Err(crate::error::invalid("len", "must be >= 1"));
    }
    let mut outputs = vec![a, a];
    let mut inputs = vec![0.0];
    let mut zeta = vec![a, a, 0.0];
    let mut integral = 0.0;
    for t in 0..len - 1 {
        let y = zeta[1] + measurement_noise.map_or(0.0, |v| v[t + 1]);
        if t > 0 {
            integral += pi.sample_time * y;
        }
        let u = -pi.kp * y - pi.ki * integral;
        let y_next = plant.step(&zeta);
        inputs.push(u);
        outputs.push(y_next);
        zeta = shift_state(&zeta, 2, y_next, u);
    }
    Trajectory::new(inputs, outputs)
}

/// Six PI trajectories of the pendulum. With `dataset_std > 0` the recorded
/// outputs get seeded Gaussian noise; the PI runs themselves are noise-free.
pub fn collect_pendulum_dataset(plant: &Pendulum, noise: &NoiseSpec) -> Result<Vec<Trajectory>> {
    noise.validate()?;
    PENDULUM_PI_RUNS
        .iter()
        .enumerate()
        .map(|(k, &(kp, ki, a))| {
            let pi = PiController {
                kp,
                ki,
                sample_time: plant.sample_time,
            };
            let clean = pi_trajectory(plant, pi, a, PENDULUM_TRAJECTORY_LEN, None)?;
            let mut rng = rng_stream(noise.seed, streams::DATASET_NOISE + k as u64);
            add_noise(&clean, noise.dataset_std, &mut rng)
        })
        .collect()
}

/// One logged closed-loop step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub t: usize,
    pub certificate: StepCertificate,
    pub input: f64,
    /// True (noise-free) `y(t+1)`.
    pub y_next: f64,
    pub descent: Descent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    /// True outputs `y(0..=T)`.
    pub outputs: Vec<f64>,
    pub steps: Vec<StepLog>,
}

impl ClosedLoopRun {
    pub fn certified_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.certificate.certified).count()
    }

    pub fn descent_violations(&self) -> usize {
        self.steps.iter().filter(|s| s.descent.is_violation()).count()
    }
}

/// `(1/(T+1)) sqrt(sum_t y(t)^2)` over `y(0..=T)`.
pub fn rmse(outputs: &[f64]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    norm_sq(outputs).sqrt() / outputs.len() as f64
}

/// Run the certified controller on `plant` for `steps` steps from `zeta0`.
///
/// With `online_std > 0` the controller sees `y + v` for every output (including
/// those in `zeta0`), while the plant evolves on the true state. Descent is
/// checked on the measured successor.
pub fn closed_loop<P: Plant + ?Sized>(
    config: &ControllerConfig,
    plant: &P,
    zeta0: &[f64],
    steps: usize,
    online_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ClosedLoopRun> {
    let order = plant.order();
    check_state(zeta0, order)?;
    let mut zeta = zeta0.to_vec();
    let mut measured = zeta0.to_vec();
    let initial_noise = gaussian_noise(rng, online_std, order)?;
    for (m, v) in measured[..order].iter_mut().zip(initial_noise) {
        *m += v;
    }
    let mut outputs = Vec::with_capacity(steps + 1);
    outputs.push(zeta[order - 1]);
    let mut log = Vec::with_capacity(steps);
    for t in 0..steps {
        let (u, cert) = config.control(&measured)?;
        let y_next = plant.next_output(&zeta, u)?;
        let v = gaussian_noise(rng, online_std, 1)?[0];
        zeta = shift_state(&zeta, order, y_next, u);
        measured = shift_state(&measured, order, y_next + v, u);
        let descent = config.assert_descent(&cert, &measured);
        outputs.push(y_next);
        log.push(StepLog {
            t,
            certificate: cert,
            input: u,
            y_next,
            descent,
        });
    }
    Ok(ClosedLoopRun {
        outputs,
        steps: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn numerical_step_examples() {
        let p = NumericalPlant;
        let z = [0.0; 3];
        // the equilibrium input keeps y at zero once it also sits in the state
        let u_star = NumericalPlant::equilibrium_input();
        assert_abs_diff_eq!(u_star, 0.5588, epsilon = 1e-4);
        assert!(p.step(&[0.0, 0.0, 0.5588], 0.5588).unwrap().abs() < 1e-3);
        assert!(p.step(&[0.0, 0.0, u_star], u_star).unwrap().abs() < 1e-12);
        // from the zero state the zero-output input is exp(-9/16) instead
        assert!((p.step(&z, 0.5588).unwrap() - 0.0515).abs() < 1e-3);
        assert!(p.step(&z, (-9.0f64 / 16.0).exp()).unwrap().abs() < 1e-12);
        assert_abs_diff_eq!(p.step(&z, (-1.0f64).exp()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.step(&z, (-0.25f64).exp()).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn numerical_step_rejects_infeasible() {
        let p = NumericalPlant;
        assert!(matches!(p.step(&[0.0; 3], 1.0), Err(Error::InfeasibleInput { .. })));
        assert!(p.step(&[0.0; 3], 0.01).is_err());
        assert!(p.step(&[0.0; 3], -1.0).is_err());
        assert!(p.step(&[0.0; 2], 0.5).is_err());
    }

    #[test]
    fn numerical_oracle_examples() {
        assert_eq!(NumericalPlant::inverse_oracle(&[-3.0, 0.0, 0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(
            NumericalPlant::inverse_oracle(&[0.0; 4]),
            (-9.0f64 / 16.0).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(NumericalPlant::inverse_oracle(&[0.0; 4]), 0.5698, epsilon = 1e-4);
    }

    #[test]
    fn numerical_inverse_identity_on_grid() {
        let p = NumericalPlant;
        let ys = uniform_grid(-1.0, 1.0, 10);
        let us = uniform_grid(0.0, 1.0, 10);
        for &target in &ys {
            for &a in &ys {
                for &b in &ys {
                    for &c in &us {
                        let zeta = [a, b, c];
                        let xi = [target, a, b, c];
                        let u = NumericalPlant::inverse_oracle(&xi);
                        assert!(p.input_feasible(&zeta, u));
                        let y = p.step(&zeta, u).unwrap();
                        assert!((y - target).abs() <= 1e-10, "{y} vs {target}");
                    }
                }
            }
        }
    }

    #[test]
    fn numerical_outputs_confined() {
        let p = NumericalPlant;
        let mut rng = rng_stream(3, 0);
        for _ in 0..10_000 {
            let zeta = [
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(0.0..=1.0),
            ];
            let u = NumericalPlant::input_for_radicand(&zeta, rng.random_range(4.0..=16.0));
            let y = p.step(&zeta, u).unwrap();
            assert!((-1.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn numerical_lipschitz_constants() {
        let p = NumericalPlant;
        let mut rng = rng_stream(4, 0);
        let h = 1e-5;
        let (mut worst_f, mut worst_c) = (0.0f64, 0.0f64);
        for _ in 0..20_000 {
            let zeta: Vec<f64> = vec![
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(0.0..=1.0),
            ];
            let s = rng.random_range(4.0 + 1e-3..=16.0 - 1e-3);
            let u = NumericalPlant::input_for_radicand(&zeta, s);
            let dir: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let n = norm_sq(&dir).sqrt();
            let z2: Vec<f64> = zeta.iter().zip(&dir).map(|(z, d)| z + h * d / n).collect();
            let u2 = u + h * dir[3] / n;
            if p.input_feasible(&z2, u2) {
                let slope = (p.step(&z2, u2).unwrap() - p.step(&zeta, u).unwrap()).abs() / h;
                worst_f = worst_f.max(slope);
            }
            let target = p.step(&zeta, u).unwrap();
            let xi = [target, zeta[0], zeta[1], zeta[2]];
            let xi2: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + h * d / n).collect();
            let slope_c =
                (NumericalPlant::inverse_oracle(&xi2) - NumericalPlant::inverse_oracle(&xi)).abs() / h;
            worst_c = worst_c.max(slope_c);
        }
        assert!(worst_f <= 6.5, "{worst_f}");
        assert!(worst_c <= 0.22, "{worst_c}");
        assert!(worst_f > 3.0 && worst_c > 0.1);
    }

    #[test]
    fn numerical_dataset_shape() {
        let trajs = collect_numerical_dataset(7).unwrap();
        assert_eq!(trajs.len(), 280);
        let p = NumericalPlant;
        for t in &trajs {
            let zeta = [t.outputs()[0], t.outputs()[1], t.inputs()[0]];
            assert!(p.input_feasible(&zeta, t.inputs()[1]));
        }
        assert_eq!(trajs, collect_numerical_dataset(7).unwrap());
        assert_ne!(trajs, collect_numerical_dataset(8).unwrap());
        let ds = crate::data::build_merged(&trajs, 2, Delay::One).unwrap();
        assert_eq!(ds.len(), 280);
    }

    #[test]
    fn pendulum_coefficients_and_equilibrium() {
        let p = Pendulum::default();
        assert_abs_diff_eq!(p.a1(), 1.995556, epsilon = 1e-6);
        assert_eq!(p.step(&[0.0; 3]), 0.0);
        assert_eq!(p.two_step(&[0.0; 3], 0.0), 0.0);
    }

    #[test]
    fn pendulum_inverse_routes_agree() {
        let p = Pendulum::default();
        let mut rng = rng_stream(5, 0);
        for _ in 0..10_000 {
            let zeta = [
                rng.random_range(-0.3..=0.3),
                rng.random_range(-0.3..=0.3),
                rng.random_range(-5.0..=5.0),
            ];
            let target = rng.random_range(-0.3..=0.3);
            let xi = [target, zeta[0], zeta[1], zeta[2]];
            let u = p.inverse_direct(&xi);
            let u2 = p.inverse_expanded(&xi);
            assert!((u - u2).abs() <= 1e-6 * u.abs().max(1.0), "{u} vs {u2}");
            assert!((p.two_step(&zeta, u) - target).abs() <= 1e-9);
            assert!((p.two_step(&zeta, u2) - target).abs() <= 1e-9);
        }
    }

    #[test]
    fn pendulum_lipschitz_dominates_slopes() {
        let p = Pendulum::default();
        let (l_f, l_c) = p.lipschitz_constants();
        assert!((2.2..2.3).contains(&l_f), "{l_f}");
        let mut rng = rng_stream(6, 0);
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
        };
        for _ in 0..5_000 {
            let (a, b) = (draw(&mut rng, 4), draw(&mut rng, 4));
            let d = euclid(&a, &b);
            assert!((p.step(&a[..3]) - p.step(&b[..3])).abs() <= l_f * euclid(&a[..3], &b[..3]) + 1e-12);
            assert!((p.inverse_direct(&a) - p.inverse_direct(&b)).abs() <= l_c * d * (1.0 + 1e-12));
        }
    }

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    #[test]
    fn pendulum_dataset_shape() {
        let p = Pendulum::default();
        let trajs = collect_pendulum_dataset(&p, &NoiseSpec::none(0)).unwrap();
        assert_eq!(trajs.len(), 6);
        for t in &trajs {
            assert_eq!(t.len(), PENDULUM_TRAJECTORY_LEN);
            assert_eq!(t.outputs()[0], t.outputs()[1]);
            assert_eq!(t.inputs()[0], 0.0);
        }
        // first PI input: -Kp a with an empty integral
        assert_eq!(trajs[0].inputs()[1], -20.0 * 0.22);
        // second: -Kp y(1) - KI Ts y(1)
        let y1 = trajs[0].outputs()[2];
        assert_abs_diff_eq!(trajs[0].inputs()[2], -20.0 * y1 - 0.01 * 0.001 * y1, epsilon = 1e-15);
        let ds = crate::data::build_merged(&trajs, 2, Delay::Two).unwrap();
        assert_eq!(ds.len(), 6 * (PENDULUM_TRAJECTORY_LEN - 2));
    }

    #[test]
    fn noise_properties() {
        let traj = Trajectory::new(vec![1.0, 2.0], vec![0.0, 0.5, 1.0]).unwrap();
        let mut rng = rng_stream(1, 9);
        assert_eq!(add_noise(&traj, 0.0, &mut rng).unwrap(), traj);
        let noisy = add_noise(&traj, 0.1, &mut rng_stream(1, 9)).unwrap();
        assert_eq!(noisy.inputs(), traj.inputs());
        assert_eq!(noisy.outputs(), traj.outputs());
        assert_eq!(noisy, add_noise(&traj, 0.1, &mut rng_stream(1, 9)).unwrap());
        assert!(add_noise(&traj, -0.1, &mut rng).is_err());

        let draws = gaussian_noise(&mut rng_stream(2, 0), 0.01, 100_000).unwrap();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() <= 3.0 * 0.01 / (100_000f64).sqrt());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0; 11]), 0.0);
        assert_abs_diff_eq!(rmse(&[3.0, 4.0]), 2.5, epsilon = 1e-15);
    }
}
