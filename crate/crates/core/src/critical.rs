//! Giant-component threshold: the age series `H`, its first root `c_cr`,
//! the index path sums `alpha_2(k)` and the resulting ratio `R`.
//!
//! `H(x) = sum_n (-x/u)^n / n! prod_{l<n} 1/(1 + l u/lambda)` is
//! `0F1(; b; -z)` with `b = lambda/u`, `z = x lambda / u^2`, so its first root
//! is `u^2 j^2 / (4 lambda)` where `j` is the first zero of `J_{b-1}`. The
//! series cancels badly near the root once `b` grows (about 1e-12 relative
//! error in the root at `b = 8`, 1e-8 at `b = 25`), so it is used directly
//! only for `b <= 8`; beyond that the Bessel zero comes from the spectrum of
//! a Jacobi matrix.

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{kappa1, moments_upto, AnalyticError};
use crate::params::{ModelParams, ParamError, Version};
use crate::rng::RngStream;
use crate::social::{DistError, SocialIndexDistribution};

/// Largest `lambda / u` evaluated through the series.
pub const SERIES_LIMIT: f64 = 8.0;
const MAX_TERMS: usize = 100_000;
const SCAN_STEPS: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalError {
    #[error("H series did not settle within {terms} terms")]
    NonConvergence { terms: usize },
    #[error("no sign change of H below x = {bound}")]
    RootNotFound { bound: f64 },
    #[error("E[S^{order}] is infinite")]
    InfiniteMoment { order: u32 },
    #[error("rates must be positive (lambda = {lambda}, u = {u})")]
    BadRates { lambda: f64, u: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl From<AnalyticError> for CriticalError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::InfiniteMoment { order } => CriticalError::InfiniteMoment { order },
            AnalyticError::Params(p) => CriticalError::Params(p),
            AnalyticError::Dist(d) => CriticalError::Dist(d),
            _ => unreachable!("moment lookup raises no other error"),
        }
    }
}

fn check_rates(lambda: f64, u: f64) -> Result<(), CriticalError> {
    if lambda > 0.0 && u > 0.0 && lambda.is_finite() && u.is_finite() {
        Ok(())
    } else {
        Err(CriticalError::BadRates { lambda, u })
    }
}

/// Partial sum of the first `n` terms (`n = 0` gives 0, `n = 1` gives 1).
pub fn h_partial(x: f64, lambda: f64, u: f64, n: usize) -> f64 {
    let mut t = 1.0;
    let mut sum = 0.0;
    for i in 0..n {
        sum += t;
        t *= (-x / u) / ((i + 1) as f64 * (1.0 + i as f64 * u / lambda));
    }
    sum
}

/// Series value of `H(x)`, stopped once two consecutive decreasing terms fall
/// below `1e-14 (1 + |sum|)`.
pub fn h_series(x: f64, lambda: f64, u: f64) -> Result<f64, CriticalError> {
    check_rates(lambda, u)?;
    let mut t = 1.0f64;
    let mut sum = 0.0;
    let mut small = 0;
    for i in 0..MAX_TERMS {
        sum += t;
        let next = t * (-x / u) / ((i + 1) as f64 * (1.0 + i as f64 * u / lambda));
        if next.abs() <= t.abs() && next.abs() < 1e-14 * (1.0 + sum.abs()) {
            small += 1;
            if small == 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        t = next;
    }
    Err(CriticalError::NonConvergence { terms: MAX_TERMS })
}

fn bisect<F: FnMut(f64) -> Result<f64, CriticalError>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, CriticalError> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest positive root of `H` by a geometric scan from `u/10` (factor
/// 1.05) and bisection. `H > 0` at every scan point below the bracket.
pub fn c_cr_series(lambda: f64, u: f64) -> Result<f64, CriticalError> {
    check_rates(lambda, u)?;
    let mut lo = 0.0;
    let mut x = u / 10.0;
    for _ in 0..SCAN_STEPS {
        if h_series(x, lambda, u)? <= 0.0 {
            return bisect(|y| h_series(y, lambda, u), lo, x);
        }
        lo = x;
        x *= 1.05;
    }
    Err(CriticalError::RootNotFound { bound: lo })
}

/// Number of eigenvalues above `x` of the `n x n` symmetric tridiagonal
/// matrix with zero diagonal and off-diagonal `e` (Sturm count).
fn count_above(e: &[f64], n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q > 0.0 {
        count += 1;
    }
    for i in 1..n {
        // a zero pivot is read as the pivot at a slightly larger shift
        let prev = if q == 0.0 { -1e-300 } else { q };
        q = -x - e[i - 1] * e[i - 1] / prev;
        if q > 0.0 {
            count += 1;
        }
    }
    count
}

fn largest_eigenvalue(e: &[f64], n: usize) -> f64 {
    let mut hi = 2.0 * e[..n - 1].iter().fold(0.0f64, |m, &v| m.max(v)) + 1e-300;
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_above(e, n, mid) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First positive zero of `J_nu` for `nu > -1`: the reciprocal of the largest
/// eigenvalue of the Jacobi matrix with off-diagonal
/// `1 / (2 sqrt((nu + n)(nu + n + 1)))`, `n = 1, 2, ...`, truncated at a size
/// doubled until the value settles.
pub fn bessel_j_first_zero(nu: f64) -> f64 {
    let mut n = 32usize;
    let mut prev = f64::NAN;
    loop {
        let e: alloc::vec::Vec<f64> = (1..n).map(|k| 0.5 / ((nu + k as f64) * (nu + k as f64 + 1.0)).sqrt()).collect();
        let z = 1.0 / largest_eigenvalue(&e, n);
        if (z - prev).abs() <= 1e-14 * z || n >= 1 << 20 {
            return z;
        }
        prev = z;
        n *= 2;
    }
}

fn c_cr_bessel(lambda: f64, u: f64) -> f64 {
    let j = bessel_j_first_zero(lambda / u - 1.0);
    u * u * j * j / (4.0 * lambda)
}

/// Smallest positive root of `H(x; lambda, u)`.
pub fn c_cr(lambda: f64, u: f64) -> Result<f64, CriticalError> {
    check_rates(lambda, u)?;
    if lambda / u <= SERIES_LIMIT {
        c_cr_series(lambda, u)
    } else {
        Ok(c_cr_bessel(lambda, u))
    }
}

/// `H` in the variable `y = x/u`; depends on `v = u/lambda` only.
pub fn h_rescaled(y: f64, v: f64) -> Result<f64, CriticalError> {
    // same series with u = 1 and lambda = 1/v
    h_series(y, 1.0 / v, 1.0)
}

/// First root `c(v)` of the rescaled series, so that
/// `c_cr(lambda, u) = u c(u/lambda)`.
pub fn c_rescaled(v: f64) -> Result<f64, CriticalError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CriticalError::BadRates { lambda: 1.0, u: v });
    }
    if 1.0 / v <= SERIES_LIMIT {
        let mut lo = 0.0;
        let mut y = 0.1;
        for _ in 0..SCAN_STEPS {
            if h_rescaled(y, v)? <= 0.0 {
                return bisect(|t| h_rescaled(t, v), lo, y);
            }
            lo = y;
            y *= 1.05;
        }
        Err(CriticalError::RootNotFound { bound: lo })
    } else {
        let j = bessel_j_first_zero(1.0 / v - 1.0);
        Ok(v * j * j / 4.0)
    }
}

/// `E[prod_{i=1..k} alpha (S_{i-1} + S_i)]` for i.i.d. `S`, in log form.
/// Uses the two-state recursion `f(k) = g(k-1) + m1 f(k-1)`,
/// `g(k) = m1 g(k-1) + m2 f(k-1)` from `f(1) = 2 m1`, `g(1) = m1^2 + m2`,
/// renormalizing each step.
pub fn ln_alpha2_u(k: u32, alpha: f64, dist: &SocialIndexDistribution) -> Result<f64, CriticalError> {
    assert!(k >= 1, "path length starts at 1");
    let [m1, m2, _] = moments_upto(dist, 2)?;
    let (mut f, mut g) = (2.0 * m1, m1 * m1 + m2);
    let mut log_scale = 0.0;
    for _ in 1..k {
        let nf = g + m1 * f;
        let ng = m1 * g + m2 * f;
        log_scale += nf.ln();
        f = 1.0;
        g = ng / nf;
    }
    Ok(k as f64 * alpha.ln() + log_scale + f.ln())
}

pub fn alpha2_u(k: u32, alpha: f64, dist: &SocialIndexDistribution) -> Result<f64, CriticalError> {
    Ok(ln_alpha2_u(k, alpha, dist)?.exp())
}

/// `E[prod_{i=1..k} 2 alpha S_{i-1} S_i / m1] = (2 alpha/m1)^k m1^2 m2^{k-1}`.
pub fn ln_alpha2_p(k: u32, alpha: f64, dist: &SocialIndexDistribution) -> Result<f64, CriticalError> {
    assert!(k >= 1, "path length starts at 1");
    let [m1, m2, _] = moments_upto(dist, 2)?;
    let kf = k as f64;
    Ok(kf * (2.0 * alpha / m1).ln() + 2.0 * m1.ln() + (kf - 1.0) * m2.ln())
}

pub fn alpha2_p(k: u32, alpha: f64, dist: &SocialIndexDistribution) -> Result<f64, CriticalError> {
    Ok(ln_alpha2_p(k, alpha, dist)?.exp())
}

/// `lim alpha_2(k)^{1/k}`: `alpha (m1 + sqrt(m2))` (U) or `2 alpha m2 / m1` (P).
pub fn growth_rate(version: Version, alpha: f64, dist: &SocialIndexDistribution) -> Result<f64, CriticalError> {
    let [m1, m2, _] = moments_upto(dist, 2)?;
    Ok(match version {
        Version::U => alpha * (m1 + m2.sqrt()),
        Version::P => 2.0 * alpha * m2 / m1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Giant,
    NoGiant,
    NearCritical { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub c_cr: f64,
    /// `mu + beta`
    pub u: f64,
    pub growth: f64,
    pub r: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

pub const DEFAULT_MARGIN: f64 = 0.02;

pub fn r_and_verdict(
    params: &ModelParams,
    dist: &SocialIndexDistribution,
    margin: f64,
) -> Result<CriticalReport, CriticalError> {
    params.validate()?;
    let u = params.gamma();
    let c = c_cr(params.lambda, u)?;
    let growth = growth_rate(params.version, params.alpha, dist)?;
    let r = growth / c;
    let verdict = if (r - 1.0).abs() < margin {
        Verdict::NearCritical { margin: r - 1.0 }
    } else if r > 1.0 {
        Verdict::Giant
    } else {
        Verdict::NoGiant
    };
    Ok(CriticalReport { c_cr: c, u, growth, r, verdict })
}

/// `alpha_1(1) = E[kappa_1(A_0, A_1)] = 1 / (lambda + u)`.
pub fn alpha1_one(lambda: f64, u: f64) -> f64 {
    1.0 / (lambda + u)
}

/// Running mean and variance (Welford), mergeable across blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAccumulator {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Monte Carlo block for `alpha_1(k) = E[prod kappa_1(X_{i-1}/lambda, X_i/lambda)]`
/// with `X_i ~ Exp(1)`; blocks with distinct streams merge into one estimate.
pub fn alpha1_mc(k: u32, lambda: f64, u: f64, n_samples: u64, rng: RngStream) -> MeanAccumulator {
    let mut r = rng.rng();
    let mut acc = MeanAccumulator::default();
    for _ in 0..n_samples {
        let mut prev = -(-r.random::<f64>()).ln_1p() / lambda;
        let mut prod = 1.0;
        for _ in 0..k {
            let a = -(-r.random::<f64>()).ln_1p() / lambda;
            prod *= kappa1(lambda, u, prev, a);
            prev = a;
        }
        acc.push(prod);
    }
    acc
}
