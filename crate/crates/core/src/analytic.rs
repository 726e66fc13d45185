//! Closed-form and quadrature evaluation of the large-time degree law, the
//! neighbour type densities, the stationary law of an edge end and the
//! degree correlation across an edge.
//!
//! Notation: `gamma = beta + mu`, `m_k = E[S^k]`, `theta = lambda / gamma`.

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use alloc::vec::Vec;
use core::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{ModelParams, ParamError, Version};
use crate::quad::{integrate, integrate_to_inf, QuadError, Tolerance};
use crate::social::{DistError, SocialIndexDistribution};
use crate::special::{expm1_over, poisson_pmf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("E[S^{order}] is infinite")]
    InfiniteMoment { order: u32 },
    #[error("{what} integrates to {value} instead of 1")]
    Normalization { what: &'static str, value: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

pub(crate) const TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-11, max_intervals: 4000 };

/// `[m1, m2, m3]`, refusing when any moment up to `order` is infinite. Moments
/// beyond `order` are reported as NaN if infinite.
pub(crate) fn moments_upto(dist: &SocialIndexDistribution, order: u32) -> Result<[f64; 3], AnalyticError> {
    dist.validate()?;
    let mut out = [f64::NAN; 3];
    for k in 1..=3u32 {
        match dist.moment(k).finite() {
            Some(v) => out[k as usize - 1] = v,
            None if k <= order => return Err(AnalyticError::InfiniteMoment { order: k }),
            None => {}
        }
    }
    Ok(out)
}

/// Age part of the kernel, `(e^{(lambda-gamma) min(a,b)} - 1)/(lambda-gamma)`,
/// with the limit `min(a,b)` when the rates coincide.
pub fn kappa1(lambda: f64, gamma: f64, a: f64, b: f64) -> f64 {
    expm1_over(lambda - gamma, a.min(b), lambda)
}

/// `1 - e^{-gamma a}`
#[inline]
fn one_minus_exp(gamma: f64, a: f64) -> f64 {
    -(-gamma * a).exp_m1()
}

/// Mean and variance of the degree of a uniformly chosen node.
pub fn degree_mean_var(params: &ModelParams, dist: &SocialIndexDistribution) -> Result<(f64, f64), AnalyticError> {
    params.validate()?;
    let [m1, m2, _] = moments_upto(dist, 2)?;
    let (l, g, a) = (params.lambda, params.gamma(), params.alpha);
    let var_s = (m2 - m1 * m1).max(0.0);
    let mean = 2.0 * a * m1 / (l + g);
    let coef = match params.version {
        Version::U => 2.0,
        Version::P => 8.0,
    };
    let var = mean
        + 4.0 * l * a * a * m1 * m1 / ((l + g) * (l + g) * (l + 2.0 * g))
        + coef * a * a * var_s / ((l + g) * (l + 2.0 * g));
    Ok((mean, var))
}

/// The Poisson mean of a node of age `a` and index `s`.
pub fn mixing_parameter(params: &ModelParams, m1: f64, a: f64, s: f64) -> f64 {
    let g = params.gamma();
    index_rate(params, m1, s) * one_minus_exp(g, a) / g
}

/// `g_2(s)`: `alpha (s + m1)` (U) or `2 alpha s` (P).
pub fn index_rate(params: &ModelParams, m1: f64, s: f64) -> f64 {
    match params.version {
        Version::U => params.alpha * (s + m1),
        Version::P => 2.0 * params.alpha * s,
    }
}

/// The degree of a uniformly chosen node: mixed Poisson over an `Exp(lambda)`
/// age and an independent index.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeLaw {
    pub params: ModelParams,
    pub dist: SocialIndexDistribution,
    m1: f64,
}

impl DegreeLaw {
    pub fn new(params: ModelParams, dist: SocialIndexDistribution) -> Result<Self, AnalyticError> {
        params.validate()?;
        let [m1, ..] = moments_upto(&dist, 1)?;
        Ok(Self { params, dist, m1 })
    }

    pub fn mean(&self) -> f64 {
        2.0 * self.params.alpha * self.m1 / (self.params.lambda + self.params.gamma())
    }

    pub fn variance(&self) -> Result<f64, AnalyticError> {
        Ok(degree_mean_var(&self.params, &self.dist)?.1)
    }

    pub fn mixing_parameter(&self, a: f64, s: f64) -> f64 {
        mixing_parameter(&self.params, self.m1, a, s)
    }

    /// `P(D = k)` given the plateau `c = g_2(s)/gamma`, integrating over
    /// the age on `[0, A]` with `A = 40 / min(lambda, gamma)`; beyond `A` the
    /// mean sits within `e^{-40}` of its plateau, so the tail mass
    /// `e^{-lambda A}` is assigned to the plateau value.
    fn pmf_given_plateau(&self, k: u64, c: f64) -> Result<f64, AnalyticError> {
        let (l, g) = (self.params.lambda, self.params.gamma());
        let amax = 40.0 / l.min(g);
        let body = integrate(|a| poisson_pmf(k, c * one_minus_exp(g, a)) * l * (-l * a).exp(), 0.0, amax, TOL)?;
        Ok(body.value + poisson_pmf(k, c) * (-l * amax).exp())
    }

    pub fn pmf(&self, k: u64) -> Result<f64, AnalyticError> {
        let g = self.params.gamma();
        let failure = Cell::new(None);
        let v = self.dist.expectation(
            |s| match self.pmf_given_plateau(k, index_rate(&self.params, self.m1, s) / g) {
                Ok(p) => p,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            TOL,
        )?;
        match failure.take() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `[P(D = 0), ..., P(D = kmax)]`
    pub fn pmf_table(&self, kmax: u64) -> Result<Vec<f64>, AnalyticError> {
        (0..=kmax).map(|k| self.pmf(k)).collect()
    }

    /// A cutoff carrying all but a negligible mass: mean + 10 sd.
    pub fn suggested_kmax(&self) -> Result<u64, AnalyticError> {
        let sd = self.variance()?.sqrt();
        Ok((self.mean() + 10.0 * sd).ceil() as u64 + 5)
    }
}

pub fn mixed_poisson_pmf(k: u64, params: &ModelParams, dist: &SocialIndexDistribution) -> Result<f64, AnalyticError> {
    DegreeLaw::new(*params, dist.clone())?.pmf(k)
}

/// Age density `f(a' | a)` of a uniformly chosen neighbour of an age-`a`
/// node. A node of age 0 has no neighbours; the density is taken as 0 there.
pub fn neighbor_age_density(a_prime: f64, a: f64, params: &ModelParams) -> f64 {
    if a <= 0.0 || a_prime < 0.0 {
        return 0.0;
    }
    let (l, g) = (params.lambda, params.gamma());
    let d = l - g;
    let m = a.min(a_prime);
    // e^{-lambda a'} kappa1 without overflowing e^{d m} for large ages
    let damped = if d * m > 1.0 {
        ((d * m - l * a_prime).exp() - (-l * a_prime).exp()) / d
    } else {
        (-l * a_prime).exp() * expm1_over(d, m, l)
    };
    g * l * damped / one_minus_exp(g, a)
}

/// Index density (or mass, for discrete laws) `f(s' | s)` of a uniformly
/// chosen neighbour of an index-`s` node.
pub fn neighbor_index_density(
    s_prime: f64,
    s: f64,
    params: &ModelParams,
    dist: &SocialIndexDistribution,
) -> Result<f64, AnalyticError> {
    let [m1, ..] = moments_upto(dist, 1)?;
    let f = dist.density(s_prime);
    Ok(match params.version {
        Version::U => (s + s_prime) * f / (s + m1),
        Version::P => s_prime * f / m1,
    })
}

/// Type law of the first end of a uniformly chosen edge, with the Poisson
/// mean factors `g_1(a) g_2(s)` of the remaining degree.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEdgeLaw {
    pub params: ModelParams,
    pub dist: SocialIndexDistribution,
    m1: f64,
}

impl StationaryEdgeLaw {
    /// Fails unless both marginal densities integrate to 1 within 1e-8.
    pub fn new(params: ModelParams, dist: SocialIndexDistribution) -> Result<Self, AnalyticError> {
        params.validate()?;
        let [m1, ..] = moments_upto(&dist, 1)?;
        let law = Self { params, dist, m1 };
        let age = law.age_mass()?;
        if (age - 1.0).abs() > 1e-8 {
            return Err(AnalyticError::Normalization { what: "stationary age density", value: age });
        }
        let idx = law.dist.expectation(|s| law.index_weight(s), TOL)?;
        if (idx - 1.0).abs() > 1e-8 {
            return Err(AnalyticError::Normalization { what: "stationary index density", value: idx });
        }
        Ok(law)
    }

    fn age_mass(&self) -> Result<f64, AnalyticError> {
        let split = 1.0 / self.params.lambda.max(self.params.gamma());
        let head = integrate(|a| self.age_density(a), 0.0, split, TOL)?.value;
        Ok(head + integrate_to_inf(|a| self.age_density(a), split, TOL)?.value)
    }

    /// `f_inf(a) = lambda (1 + lambda/gamma) e^{-lambda a} (1 - e^{-gamma a})`
    pub fn age_density(&self, a: f64) -> f64 {
        if a < 0.0 {
            return 0.0;
        }
        let (l, g) = (self.params.lambda, self.params.gamma());
        l * (1.0 + l / g) * (-l * a).exp() * one_minus_exp(g, a)
    }

    /// Ratio of the stationary index law to `F_S` at `s`.
    pub fn index_weight(&self, s: f64) -> f64 {
        match self.params.version {
            Version::U => (s + self.m1) / (2.0 * self.m1),
            Version::P => s / self.m1,
        }
    }

    /// Stationary index density (or mass for discrete laws).
    pub fn index_density(&self, s: f64) -> f64 {
        self.index_weight(s) * self.dist.density(s)
    }

    /// `g_1(a) = (1 - e^{-gamma a}) / gamma`
    pub fn g1(&self, a: f64) -> f64 {
        let g = self.params.gamma();
        one_minus_exp(g, a) / g
    }

    pub fn g2(&self, s: f64) -> f64 {
        index_rate(&self.params, self.m1, s)
    }

    /// `int f_inf(a) f(a' | a) da`; equals `f_inf(a')` at stationarity.
    pub fn age_transport(&self, a_prime: f64) -> Result<f64, AnalyticError> {
        let f = |a: f64| self.age_density(a) * neighbor_age_density(a_prime, a, &self.params);
        let head = if a_prime > 0.0 { integrate(f, 0.0, a_prime, TOL)?.value } else { 0.0 };
        Ok(head + integrate_to_inf(f, a_prime, TOL)?.value)
    }
}

/// Moments of the excess degrees `(D_1, D_2)` at the two ends of a uniformly
/// chosen edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDegreeTheory {
    pub mean: f64,
    pub second_moment: f64,
    pub cross_moment: f64,
    pub variance: f64,
    pub covariance: f64,
    pub correlation: f64,
}

/// Age integrals against the stationary law: `int g1 f_inf`,
/// `int g1^2 f_inf` and `int int g1(a) g1(a') f_inf(a) f(a'|a)`.
pub fn age_integrals(lambda: f64, gamma: f64) -> (f64, f64, f64) {
    let (l, g) = (lambda, gamma);
    let i1 = 2.0 / (l + 2.0 * g);
    let i2 = 6.0 / ((l + 2.0 * g) * (l + 3.0 * g));
    let j = (5.0 * l + 6.0 * g) / ((l + g) * (l + 2.0 * g) * (l + 3.0 * g));
    (i1, i2, j)
}

/// Index integrals matching [`age_integrals`]: `int g2 f_inf`,
/// `int g2^2 f_inf` and `int int g2(s) g2(s') f_inf(s) f(s'|s)`.
pub fn index_integrals(version: Version, alpha: f64, m: [f64; 3]) -> (f64, f64, f64) {
    let [m1, m2, m3] = m;
    let a = alpha;
    match version {
        Version::P => (2.0 * a * m2 / m1, 4.0 * a * a * m3 / m1, (2.0 * a * m2 / m1).powi(2)),
        Version::U => (
            a * (m2 + 3.0 * m1 * m1) / (2.0 * m1),
            a * a * (m3 + 3.0 * m1 * m2 + 4.0 * m1 * m1 * m1) / (2.0 * m1),
            2.0 * a * a * (m2 + m1 * m1),
        ),
    }
}

/// `E[D_1]` and `E[D_1 D_2]`; needs only `m1, m2`.
pub fn edge_mean_and_cross(params: &ModelParams, dist: &SocialIndexDistribution) -> Result<(f64, f64), AnalyticError> {
    params.validate()?;
    let [m1, m2, _] = moments_upto(dist, 2)?;
    let (i1, _, j) = age_integrals(params.lambda, params.gamma());
    let (g1, _, k) = index_integrals(params.version, params.alpha, [m1, m2, 0.0]);
    Ok((i1 * g1, j * k))
}

/// `C(D_1, D_2) = E[D_1 D_2] - E[D_1]^2`.
pub fn covariance(params: &ModelParams, dist: &SocialIndexDistribution) -> Result<f64, AnalyticError> {
    let (mean, cross) = edge_mean_and_cross(params, dist)?;
    Ok(cross - mean * mean)
}

/// `a = lambda^2 / ((lambda + gamma)(lambda + 3 gamma))`, in `(0, 1)`.
pub fn threshold_a(params: &ModelParams) -> f64 {
    let (l, g) = (params.lambda, params.gamma());
    l * l / ((l + g) * (l + 3.0 * g))
}

/// Value of `E[S^2]/E[S]^2` below which the U-version covariance is positive.
pub fn assortativity_threshold(params: &ModelParams) -> Result<f64, AnalyticError> {
    params.validate()?;
    let a = threshold_a(params);
    Ok(1.0 + a + (a * a + 4.0 * a).sqrt())
}

pub fn edge_degree_theory(
    params: &ModelParams,
    dist: &SocialIndexDistribution,
) -> Result<EdgeDegreeTheory, AnalyticError> {
    params.validate()?;
    let m = moments_upto(dist, 3)?;
    let (i1, i2, j) = age_integrals(params.lambda, params.gamma());
    let (g1, g2, k) = index_integrals(params.version, params.alpha, m);
    let mean = i1 * g1;
    let second_moment = mean + i2 * g2;
    let cross_moment = j * k;
    let variance = second_moment - mean * mean;
    let covariance = cross_moment - mean * mean;
    Ok(EdgeDegreeTheory { mean, second_moment, cross_moment, variance, covariance, correlation: covariance / variance })
}

/// Degree correlation across a uniformly chosen edge.
pub fn degree_correlation(params: &ModelParams, dist: &SocialIndexDistribution) -> Result<f64, AnalyticError> {
    Ok(edge_degree_theory(params, dist)?.correlation)
}
