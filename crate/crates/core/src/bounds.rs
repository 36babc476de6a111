//! Known constants `(L_f, L_c, Gamma)` and the class-K functions built from them.
//!
//! * `eta(e)`: interpolation error bound at distance `e` from the nearest training input.
//! * `gamma_u(e) = L_c e + eta(e)`: input deviation when the state is `e` away from a record.
//! * `gamma_y(e) = L_f (e + gamma_u(e))`: output deviation (delay one only).
//! * `gamma(e)`: successor-state deviation,
//!   `gamma_u + gamma_y + e` for delay one and `gamma_u + (1 + L_f) e` for delay two,
//!   unless a linear override is configured.
//!
//! The profile-derived `eta` is `Gamma * sqrt(1 - kbar(e) / kbar(0))`. For the
//! squared-exponential kernel with unit signal scale this is exactly
//! `sqrt(1 - exp(-e^2 / (2 l^2)))`. For other kernels it is this crate's choice of
//! bound, not a derived result.

use crate::data::Delay;
use crate::error::{invalid, Error, Result};
use crate::kernels::IsotropicKernel;

/// Relative tolerance of [`BoundSet::gamma_inverse`].
pub const INVERSE_TOLERANCE: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum EtaMode {
    /// `Gamma * sqrt(1 - kbar(e) / kbar(0))` for the given radial profile.
    ProfileDerived(IsotropicKernel),
    /// `Gamma * sqrt(1 - exp(-e^2 / (2 l^2)))`, stored in closed form.
    SquaredExponentialClosedForm { length_scale: f64 },
    /// `slope * e`.
    Linear { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// Composed from `eta`, `L_c` and `L_f` according to the delay.
    Composed,
    /// `slope * e`, bypassing the composition.
    Linear { slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    lipschitz_f: f64,
    lipschitz_c: f64,
    rkhs_bound: f64,
    delay: Delay,
    eta: EtaMode,
    gamma: GammaMode,
}

impl BoundSet {
    pub fn new(
        lipschitz_f: f64,
        lipschitz_c: f64,
        rkhs_bound: f64,
        delay: Delay,
        eta: EtaMode,
        gamma: GammaMode,
    ) -> Result<Self> {
        if !(lipschitz_f > 0.0 && lipschitz_f.is_finite()) {
            return Err(invalid("L_f", format!("must be > 0, got {lipschitz_f}")));
        }
        if !(lipschitz_c > 0.0 && lipschitz_c.is_finite()) {
            return Err(invalid("L_c", format!("must be > 0, got {lipschitz_c}")));
        }
        if !(rkhs_bound >= 0.0 && rkhs_bound.is_finite()) {
            return Err(invalid("Gamma", format!("must be >= 0, got {rkhs_bound}")));
        }
        match &eta {
            EtaMode::SquaredExponentialClosedForm { length_scale } if !(*length_scale > 0.0) => {
                return Err(invalid("eta_length_scale", "must be > 0"));
            }
            EtaMode::Linear { slope } if !(*slope > 0.0) => {
                return Err(invalid("eta_slope", "must be > 0"));
            }
            _ => {}
        }
        if let GammaMode::Linear { slope } = gamma {
            if !(slope > 0.0 && slope.is_finite()) {
                return Err(invalid("gamma_slope", format!("must be > 0, got {slope}")));
            }
        }
        Ok(Self {
            lipschitz_f,
            lipschitz_c,
            rkhs_bound,
            delay,
            eta,
            gamma,
        })
    }

    /// Constants of the one-step numerical benchmark: `L_f = 6.5`, `L_c = 0.22`,
    /// `Gamma = 1`, SE kernel with length scale `2 sqrt 2`.
    pub fn numerical_benchmark() -> Self {
        Self::new(
            6.5,
            0.22,
            1.0,
            Delay::One,
            EtaMode::SquaredExponentialClosedForm {
                length_scale: 2.0 * std::f64::consts::SQRT_2,
            },
            GammaMode::Composed,
        )
        .expect("valid constants")
    }

    pub fn lipschitz_f(&self) -> f64 {
        self.lipschitz_f
    }

    pub fn lipschitz_c(&self) -> f64 {
        self.lipschitz_c
    }

    pub fn rkhs_bound(&self) -> f64 {
        self.rkhs_bound
    }

    pub fn delay(&self) -> Delay {
        self.delay
    }

    pub fn eta_mode(&self) -> &EtaMode {
        &self.eta
    }

    pub fn gamma_mode(&self) -> GammaMode {
        self.gamma
    }

    fn check(e: f64) -> Result<()> {
        if e >= 0.0 {
            Ok(())
        } else {
            Err(Error::NegativeArgument(e))
        }
    }

    pub fn eta(&self, e: f64) -> Result<f64> {
        Self::check(e)?;
        Ok(self.eta_unchecked(e))
    }

    fn eta_unchecked(&self, e: f64) -> f64 {
        match &self.eta {
            EtaMode::ProfileDerived(k) => {
                self.rkhs_bound * k.normalized_deficit(e).max(0.0).sqrt()
            }
            EtaMode::SquaredExponentialClosedForm { length_scale } => {
                // 1 - exp(-x) via exp_m1 keeps precision for small e
                let x = e * e / (2.0 * length_scale * length_scale);
                self.rkhs_bound * (-(-x).exp_m1()).sqrt()
            }
            EtaMode::Linear { slope } => slope * e,
        }
    }

    pub fn gamma_u(&self, e: f64) -> Result<f64> {
        Self::check(e)?;
        Ok(self.lipschitz_c * e + self.eta_unchecked(e))
    }

    pub fn gamma_y(&self, e: f64) -> Result<f64> {
        if self.delay != Delay::One {
            return Err(Error::WrongDelay);
        }
        Ok(self.lipschitz_f * (e + self.gamma_u(e)?))
    }

    pub fn gamma(&self, e: f64) -> Result<f64> {
        Self::check(e)?;
        Ok(self.gamma_unchecked(e))
    }

    fn gamma_unchecked(&self, e: f64) -> f64 {
        match self.gamma {
            GammaMode::Linear { slope } => slope * e,
            GammaMode::Composed => {
                let gu = self.lipschitz_c * e + self.eta_unchecked(e);
                match self.delay {
                    Delay::One => gu + self.lipschitz_f * (e + gu) + e,
                    Delay::Two => gu + (1.0 + self.lipschitz_f) * e,
                }
            }
        }
    }

    /// Largest `e` found with `gamma(e) <= r` and `r - gamma(e) <= 1e-10 max(1, r)`.
    ///
    /// The returned value never overshoots, so balls of radius `gamma_inverse(r)`
    /// stay certified. Linear overrides invert exactly.
    pub fn gamma_inverse(&self, r: f64) -> Result<f64> {
        Self::check(r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        if let GammaMode::Linear { slope } = self.gamma {
            let e = r / slope;
            // division can round up by an ulp; step down until gamma(e) <= r
            return Ok(if slope * e > r { e.next_down() } else { e });
        }
        let tol = INVERSE_TOLERANCE * r.max(1.0);
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while self.gamma_unchecked(hi) < r {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || !hi.is_finite() {
                return Err(Error::BracketGrowth(r));
            }
        }
        // invariant: gamma(lo) <= r <= gamma(hi)
        for _ in 0..2000 {
            if r - self.gamma_unchecked(lo) <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.gamma_unchecked(mid) <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}
