//! Weibull lifetime model for simulated storage daemons.
//!
//! Times are in minutes. `a` is the shape and `b` the scale; `a = 2`,
//! `b = 50` gives a failure rate that rises with age.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ReliabilityError {
    #[error("weibull parameters must be positive (a={a}, b={b})")]
    InvalidParams { a: f64, b: f64 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("look-ahead window must be positive, got {0}")]
    EmptyWindow(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeibullParams<T> {
    a: T,
    b: T,
}

impl<T: Real> WeibullParams<T> {
    pub fn new(a: T, b: T) -> Result<Self, ReliabilityError> {
        if a > T::zero() && b > T::zero() && a.is_finite() && b.is_finite() {
            Ok(Self { a, b })
        } else {
            Err(ReliabilityError::InvalidParams {
                a: a.to_f64().unwrap_or(f64::NAN),
                b: b.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    pub fn shape(&self) -> T {
        self.a
    }

    pub fn scale(&self) -> T {
        self.b
    }

    /// Cumulative hazard `(t/b)^a`.
    fn hazard(&self, t: T) -> T {
        (t / self.b).powf(self.a)
    }

    pub fn cdf(&self, t: T) -> T {
        if t <= T::zero() {
            T::zero()
        } else {
            -(-self.hazard(t)).exp_m1()
        }
    }

    /// `b * (-ln(1-u))^(1/a)`.
    pub fn inverse_cdf(&self, u: T) -> T {
        self.b * (-(-u).ln_1p()).powf(self.a.recip())
    }

    pub fn mean(&self) -> T
    where
        T: Into<f64>,
    {
        let shape: f64 = self.a.into();
        T::lit(self.b.into() * gamma(1.0 + 1.0 / shape))
    }
}

impl Default for WeibullParams<f64> {
    fn default() -> Self {
        Self { a: 2.0, b: 50.0 }
    }
}

/// Age `t0` at query time and the look-ahead window `delta_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FailureRateQuery<T> {
    t0: T,
    delta_t: T,
}

impl<T: Real> FailureRateQuery<T> {
    pub fn new(t0: T, delta_t: T) -> Result<Self, ReliabilityError> {
        if !(t0 >= T::zero()) {
            return Err(ReliabilityError::NegativeTime(t0.to_f64().unwrap_or(f64::NAN)));
        }
        if !(delta_t > T::zero()) {
            return Err(ReliabilityError::EmptyWindow(delta_t.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { t0, delta_t })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn delta_t(&self) -> T {
        self.delta_t
    }
}

/// Weibull density at `t`.
pub fn pdf<T: Real>(t: T, params: &WeibullParams<T>) -> Result<T, ReliabilityError> {
    if t < T::zero() {
        return Err(ReliabilityError::NegativeTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    let (a, b) = (params.a, params.b);
    if t == T::zero() {
        // (x/b)^(a-1) vanishes for a > 1, is 1 for a = 1 and diverges below.
        return Ok(if a > T::one() {
            T::zero()
        } else if a == T::one() {
            b.recip()
        } else {
            T::infinity()
        });
    }
    let x = t / b;
    Ok(a / b * x.powf(a - T::one()) * (-x.powf(a)).exp())
}

/// Draw one lifetime by inverting the CDF at a uniform `u` in `[0, 1)`.
pub fn sample_lifetime<R: Rng + ?Sized>(params: &WeibullParams<f64>, rng: &mut R) -> f64 {
    params.inverse_cdf(rng.gen::<f64>())
}

/// Probability that a unit alive at age `t0` fails within the next `delta_t`.
///
/// The ratio of the density integrated over `[t0, t0+dt]` to the survival at
/// `t0` has the closed form `1 - exp((t0/b)^a - ((t0+dt)/b)^a)`.
pub fn conditional_failure_rate<T: Real>(query: &FailureRateQuery<T>, params: &WeibullParams<T>) -> T {
    let exponent = params.hazard(query.t0) - params.hazard(query.t0 + query.delta_t);
    -exponent.exp_m1()
}

// Lanczos approximation (g = 7, n = 9); accurate to ~1e-15 for positive arguments.
fn gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * series
}
