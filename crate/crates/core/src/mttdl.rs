//! Mean time to data loss for a stripe that tolerates `r` concurrent losses.
//!
//! The stripe is a birth-death chain over the number of missing units: with
//! `m` units missing the next loss arrives at rate `(n - m) * lambda` and a
//! repair at rate `m * mu`; `r + 1` missing units is data loss. Times come
//! out in repair intervals (with `mu = 1` one interval is one availability
//! check).

use thiserror::Error;

use crate::erasure::StoragePolicy;
use crate::reliability::{conditional_failure_rate, FailureRateQuery, ReliabilityError, WeibullParams};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum MttdlError {
    #[error("invalid markov parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovParams<T> {
    n: usize,
    r: usize,
    lambda: T,
    mu: T,
}

impl<T: Scalar> MarkovParams<T> {
    /// `r = 0` is accepted as the single-state chain of an unprotected unit set.
    pub fn new(n: usize, r: usize, lambda: T, mu: T) -> Result<Self, MttdlError> {
        if r >= n {
            return Err(MttdlError::InvalidParams(format!("need r < n, got n={n} r={r}")));
        }
        if !(lambda > T::zero()) {
            return Err(MttdlError::InvalidParams(format!("failure rate must be positive, got {lambda:?}")));
        }
        if !(mu >= T::zero()) {
            return Err(MttdlError::InvalidParams(format!("repair rate must be non-negative, got {mu:?}")));
        }
        Ok(Self { n, r, lambda, mu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn lambda(&self) -> &T {
        &self.lambda
    }

    pub fn mu(&self) -> &T {
        &self.mu
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MttdlResult<T> {
    pub mttdl: T,
    /// `t_0 ..= t_r`; they sum to `mttdl`.
    pub terms: Vec<T>,
    pub data_loss_rate: T,
}

impl<T: Scalar> MttdlResult<T> {
    fn from_terms(terms: Vec<T>) -> Self {
        let mttdl = terms.iter().cloned().fold(T::zero(), |acc, t| acc + t);
        let data_loss_rate = T::one() / mttdl.clone();
        Self { mttdl, terms, data_loss_rate }
    }
}

fn count<T: Scalar>(n: usize) -> T {
    T::from_count(n)
}

/// Single-parity closed form (tolerates one loss).
pub fn mttdl_raid5<T: Scalar>(n: usize, lambda: T, mu: T) -> Result<MttdlResult<T>, MttdlError> {
    if n < 2 {
        return Err(MttdlError::InvalidParams(format!("RAID5 needs n >= 2, got {n}")));
    }
    MarkovParams::new(n, 1, lambda.clone(), mu.clone())?;
    let (nn, n1) = (count::<T>(n), count::<T>(n - 1));
    let l2 = lambda.clone() * lambda.clone();
    let t0 = T::one() / (n1.clone() * lambda.clone());
    let t1 = T::one() / (nn.clone() * lambda) + mu / (nn * n1 * l2);
    Ok(MttdlResult::from_terms(vec![t0, t1]))
}

/// Double-parity closed form (tolerates two losses).
pub fn mttdl_raid6<T: Scalar>(n: usize, lambda: T, mu: T) -> Result<MttdlResult<T>, MttdlError> {
    if n < 3 {
        return Err(MttdlError::InvalidParams(format!("RAID6 needs n >= 3, got {n}")));
    }
    MarkovParams::new(n, 2, lambda.clone(), mu.clone())?;
    let (nn, n1, n2) = (count::<T>(n), count::<T>(n - 1), count::<T>(n - 2));
    let two = count::<T>(2);
    let l = lambda;
    let l2 = l.clone() * l.clone();
    let l3 = l2.clone() * l.clone();
    let t0 = T::one() / (n2.clone() * l.clone());
    let t1 = T::one() / (n1.clone() * l.clone()) + two.clone() * mu.clone() / (n1.clone() * n2.clone() * l2.clone());
    let t2 = T::one() / (nn.clone() * l)
        + mu.clone() / (nn.clone() * n1.clone() * l2)
        + two * mu.clone() * mu / (nn * n1 * n2 * l3);
    Ok(MttdlResult::from_terms(vec![t0, t1, t2]))
}

/// General RAIDr closed form.
///
/// `t_i = sum_{j=0..=i} N_j / D_j` where, with `m = r - i`,
/// `D_j = prod_{q=0..=j} (n - m - q) * lambda` and
/// `N_j = prod_{q=1..=j} (m + q) * mu` (`N_0 = 1`).
pub fn mttdl_general<T: Scalar>(params: &MarkovParams<T>) -> MttdlResult<T> {
    let (n, r) = (params.n, params.r);
    let lambda = &params.lambda;
    let mu = &params.mu;
    let terms = (0..=r)
        .map(|i| {
            let m = r - i;
            let mut numer = T::one();
            let mut denom = T::one();
            let mut t_i = T::zero();
            for j in 0..=i {
                if j > 0 {
                    numer = numer * count::<T>(m + j) * mu.clone();
                }
                denom = denom * count::<T>(n - m - j) * lambda.clone();
                t_i = t_i + numer.clone() / denom.clone();
            }
            t_i
        })
        .collect();
    MttdlResult::from_terms(terms)
}

/// `(n, r)` of the chain a policy maps to; replication tolerates `n - 1` losses.
pub fn chain_shape(policy: &StoragePolicy) -> (usize, usize) {
    (policy.n(), policy.r())
}

/// MTTDL of a stripe whose units are all `age` minutes old, with the failure
/// rate taken over one check interval and `mu = 1`.
pub fn mttdl_at_age<T: Real>(
    policy: &StoragePolicy,
    age: T,
    check_interval: T,
    weibull: &WeibullParams<T>,
) -> Result<MttdlResult<T>, MttdlError> {
    let lambda = conditional_failure_rate(&FailureRateQuery::new(age, check_interval)?, weibull);
    let (n, r) = chain_shape(policy);
    Ok(mttdl_general(&MarkovParams::new(n, r, lambda, T::one())?))
}

/// Smallest age in `[0, max_age]` at which the MTTDL drops to `threshold`,
/// found by bisection. `None` if the curve stays above it on the whole range.
pub fn crossing_age(
    policy: &StoragePolicy,
    threshold: f64,
    check_interval: f64,
    weibull: &WeibullParams<f64>,
    max_age: f64,
) -> Result<Option<f64>, MttdlError> {
    let at = |age: f64| mttdl_at_age(policy, age, check_interval, weibull).map(|m| m.mttdl);
    if at(0.0)? <= threshold {
        return Ok(Some(0.0));
    }
    if at(max_age)? > threshold {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, max_age);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}
