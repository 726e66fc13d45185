//! The snapshot as an inhomogeneous random graph: a node type is
//! `x = (a, s)` with `a ~ Exp(lambda)` and `s ~ S`, and a pair connects with
//! probability `min(kappa(x, x') / n, 1)`.
//!
//! The model kernel factorises as `kappa_1(a, a') kappa_2(s, s')` with
//! `kappa_1 = phi(min(a, a'))`, `phi(a) = (e^{(lambda-gamma) a} - 1)/(lambda-gamma)`
//! and `kappa_2 = alpha (s + s')` (U) or `2 alpha s s' / E[S]` (P). Both
//! factors are cheap to apply: the age part through prefix sums over sorted
//! ages, the index part because it has rank at most two. A grid operator
//! application therefore costs `O(m r)` rather than `O(m^2 r^2)`.

#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{kappa1, moments_upto, AnalyticError};
use crate::params::{ModelParams, ParamError, Version};
use crate::quad::graded_unit_rule;
use crate::snapshot::{NodeRow, Snapshot};
use crate::social::{DistError, SocialIndexDistribution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BjrError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("E[S^{order}] is infinite; the kernel is not integrable")]
    InfiniteMoment { order: u32 },
    #[error("bad grid: {0}")]
    Grid(&'static str),
    #[error("tolerance must be positive")]
    Tolerance,
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl From<AnalyticError> for BjrError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::InfiniteMoment { order } => BjrError::InfiniteMoment { order },
            AnalyticError::Params(p) => BjrError::Params(p),
            AnalyticError::Dist(d) => BjrError::Dist(d),
            _ => BjrError::Grid("moment evaluation failed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexKernel {
    /// `alpha (s + s')`
    U { alpha: f64 },
    /// `2 alpha s s' / m1`
    P { alpha: f64, m1: f64 },
}

impl IndexKernel {
    #[inline]
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match *self {
            IndexKernel::U { alpha } => alpha * (s + t),
            IndexKernel::P { alpha, m1 } => 2.0 * alpha * s * t / m1,
        }
    }

    fn scaled(self, t: f64) -> Self {
        match self {
            IndexKernel::U { alpha } => IndexKernel::U { alpha: alpha * t },
            IndexKernel::P { alpha, m1 } => IndexKernel::P { alpha: alpha * t, m1 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelForm {
    Model {
        gamma: f64,
        index: IndexKernel,
    },
    /// `kappa == c`, used to check the machinery against scalar answers.
    Constant {
        c: f64,
    },
}

/// A kernel together with the type law `Exp(lambda) x S` it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub lambda: f64,
    pub dist: SocialIndexDistribution,
    pub form: KernelForm,
}

impl Kernel {
    /// The kernel of the model snapshot. Needs `E[S^2] < inf`.
    pub fn model(params: &ModelParams, dist: &SocialIndexDistribution) -> Result<Self, BjrError> {
        params.validate()?;
        let [m1, _, _] = moments_upto(dist, 2)?;
        let index = match params.version {
            Version::U => IndexKernel::U { alpha: params.alpha },
            Version::P => IndexKernel::P { alpha: params.alpha, m1 },
        };
        Ok(Kernel {
            lambda: params.lambda,
            dist: dist.clone(),
            form: KernelForm::Model { gamma: params.gamma(), index },
        })
    }

    pub fn constant(c: f64, lambda: f64, dist: &SocialIndexDistribution) -> Result<Self, BjrError> {
        dist.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(BjrError::Params(ParamError::NegativeRate { name: "lambda", value: lambda }));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(BjrError::Grid("constant kernel must be finite and nonnegative"));
        }
        Ok(Kernel { lambda, dist: dist.clone(), form: KernelForm::Constant { c } })
    }

    /// `t kappa`
    pub fn scaled(&self, t: f64) -> Self {
        let form = match self.form {
            KernelForm::Model { gamma, index } => KernelForm::Model { gamma, index: index.scaled(t) },
            KernelForm::Constant { c } => KernelForm::Constant { c: c * t },
        };
        Kernel { form, ..self.clone() }
    }

    /// `phi(a)`: the age factor for a pair whose younger member has age `a`.
    #[inline]
    pub fn age_factor(&self, a: f64) -> f64 {
        match self.form {
            KernelForm::Model { gamma, .. } => kappa1(self.lambda, gamma, a, a),
            KernelForm::Constant { .. } => 1.0,
        }
    }

    #[inline]
    pub fn index_factor(&self, s: f64, t: f64) -> f64 {
        match self.form {
            KernelForm::Model { index, .. } => index.eval(s, t),
            KernelForm::Constant { c } => c,
        }
    }

    pub fn kappa(&self, a: f64, s: f64, a2: f64, s2: f64) -> f64 {
        self.age_factor(a.min(a2)) * self.index_factor(s, s2)
    }

    /// `int kappa(x, y) dmu(y)`, the Poisson mean of the degree of type `x`.
    pub fn row_integral(&self, a: f64, s: f64) -> Result<f64, BjrError> {
        Ok(match self.form {
            KernelForm::Constant { c } => c,
            KernelForm::Model { gamma, index } => {
                let [m1, _, _] = moments_upto(&self.dist, 1)?;
                let age = -(-gamma * a).exp_m1() / gamma;
                let idx = match index {
                    IndexKernel::U { alpha } => alpha * (s + m1),
                    IndexKernel::P { alpha, m1: n } => 2.0 * alpha * s * m1 / n,
                };
                age * idx
            }
        })
    }
}

/// Product quadrature for `mu = Exp(lambda) x S`. Values on the grid are
/// stored age-major: entry `i * r + k` belongs to `(ages[i], indices[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    /// Increasing.
    pub ages: Vec<f64>,
    pub age_weights: Vec<f64>,
    pub indices: Vec<f64>,
    pub index_weights: Vec<f64>,
}

pub const DEFAULT_PANELS: usize = 25;
pub const DEFAULT_POINTS: usize = 8;

impl TypeGrid {
    /// Graded Gauss–Legendre strata (`panels x points` nodes) mapped through
    /// the quantile functions. Discrete index laws use their atoms instead.
    pub fn new(lambda: f64, dist: &SocialIndexDistribution, panels: usize, points: usize) -> Result<Self, BjrError> {
        dist.validate()?;
        if panels == 0 || points == 0 {
            return Err(BjrError::Grid("empty rule"));
        }
        let rule = graded_unit_rule(panels, points);
        let ages = rule.iter().map(|&(p, _)| -(-p).ln_1p() / lambda).collect();
        let age_weights = rule.iter().map(|&(_, w)| w).collect();
        let (indices, index_weights) = match dist.atoms() {
            Some(atoms) => atoms.into_iter().filter(|a| a.1 > 0.0).unzip(),
            None => rule.iter().map(|&(p, w)| (dist.quantile(p), w)).unzip(),
        };
        let grid = TypeGrid { ages, age_weights, indices, index_weights };
        grid.check()?;
        Ok(grid)
    }

    pub fn for_kernel(kernel: &Kernel) -> Result<Self, BjrError> {
        Self::new(kernel.lambda, &kernel.dist, DEFAULT_PANELS, DEFAULT_POINTS)
    }

    fn check(&self) -> Result<(), BjrError> {
        let ok = |w: &[f64]| w.iter().all(|&x| x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
        if !ok(&self.age_weights) || !ok(&self.index_weights) {
            return Err(BjrError::Grid("weights must be nonnegative and sum to 1"));
        }
        if self.ages.windows(2).any(|w| w[0] > w[1]) {
            return Err(BjrError::Grid("ages must be sorted"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ages.len() * self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.age_weights[i] * self.index_weights[k]
    }

    /// `int f dmu`
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let r = self.indices.len();
        let mut total = 0.0;
        for (i, wa) in self.age_weights.iter().enumerate() {
            let row: f64 = f[i * r..(i + 1) * r].iter().zip(&self.index_weights).map(|(x, w)| x * w).sum();
            total += wa * row;
        }
        total
    }

    /// `out = T_kappa f` on the grid.
    pub fn apply(&self, kernel: &Kernel, f: &[f64], out: &mut [f64]) {
        let (m, r) = (self.ages.len(), self.indices.len());
        debug_assert!(f.len() == m * r && out.len() == m * r);
        match kernel.form {
            KernelForm::Constant { c } => {
                let v = c * self.integrate(f);
                out.iter_mut().for_each(|o| *o = v);
            }
            KernelForm::Model { index, .. } => {
                // index contraction, rank <= 2
                for i in 0..m {
                    let row = &f[i * r..(i + 1) * r];
                    let mut s0 = 0.0;
                    let mut s1 = 0.0;
                    for ((x, w), s) in row.iter().zip(&self.index_weights).zip(&self.indices) {
                        s0 += w * x;
                        s1 += w * s * x;
                    }
                    let dst = &mut out[i * r..(i + 1) * r];
                    for (o, &s) in dst.iter_mut().zip(&self.indices) {
                        *o = match index {
                            IndexKernel::U { alpha } => alpha * (s * s0 + s1),
                            IndexKernel::P { alpha, m1 } => 2.0 * alpha * s * s1 / m1,
                        };
                    }
                }
                // age contraction: sum_j w_j phi(min(a_i, a_j)) g_j, split
                // into j <= i (running head) and j > i (suffix sums)
                let mut later = vec![0.0; m * r];
                let mut acc = vec![0.0; r];
                for i in (0..m).rev() {
                    later[i * r..(i + 1) * r].copy_from_slice(&acc);
                    for k in 0..r {
                        acc[k] += self.age_weights[i] * out[i * r + k];
                    }
                }
                let mut head = vec![0.0; r];
                for i in 0..m {
                    let phi = kernel.age_factor(self.ages[i]);
                    let w = self.age_weights[i];
                    for k in 0..r {
                        head[k] += w * phi * out[i * r + k];
                        out[i * r + k] = head[k] + phi * later[i * r + k];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    /// Survival probability on the grid, age-major.
    pub f: Vec<f64>,
    pub rho_kappa: f64,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
}

/// The maximal solution of `f = 1 - exp(-T f)`, reached by iterating from
/// `f == 1`.
pub fn solve_rho(kernel: &Kernel, grid: &TypeGrid, opts: IterationOptions) -> Result<FixedPointSolution, BjrError> {
    solve_rho_observed(kernel, grid, opts, |_, _| {})
}

/// [`solve_rho`], handing every iterate to `observe`.
pub fn solve_rho_observed(
    kernel: &Kernel,
    grid: &TypeGrid,
    opts: IterationOptions,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<FixedPointSolution, BjrError> {
    if opts.tolerance.is_nan() || opts.tolerance <= 0.0 {
        return Err(BjrError::Tolerance);
    }
    let n = grid.len();
    let mut f = vec![1.0; n];
    let mut tf = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        grid.apply(kernel, &f, &mut tf);
        residual = 0.0;
        for (x, t) in f.iter_mut().zip(&tf) {
            let next = -(-t).exp_m1();
            residual = residual.max((next - *x).abs());
            *x = next;
        }
        observe(it, &f);
        if residual <= opts.tolerance {
            let rho_kappa = grid.integrate(&f);
            return Ok(FixedPointSolution { f, rho_kappa, iterations: it, residual });
        }
    }
    Err(BjrError::MaxIterations { iterations: opts.max_iterations, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    /// Change of the Rayleigh quotient in the last step.
    pub delta: f64,
}

/// `||T_kappa||` on `L^2(mu)` by power iteration from a positive vector.
/// Stops when successive Rayleigh quotients differ by less than
/// `tolerance * max(1, q)`.
pub fn operator_norm(kernel: &Kernel, grid: &TypeGrid, opts: IterationOptions) -> Result<NormEstimate, BjrError> {
    if opts.tolerance.is_nan() || opts.tolerance <= 0.0 {
        return Err(BjrError::Tolerance);
    }
    let n = grid.len();
    let mut g = vec![1.0; n];
    let mut tg = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut delta = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        grid.apply(kernel, &g, &mut tg);
        for ((s, a), b) in sq.iter_mut().zip(&g).zip(&tg) {
            *s = a * b;
        }
        let num = grid.integrate(&sq);
        for (s, a) in sq.iter_mut().zip(&g) {
            *s = a * a;
        }
        let q = num / grid.integrate(&sq);
        for (s, a) in sq.iter_mut().zip(&tg) {
            *s = a * a;
        }
        let norm = grid.integrate(&sq).sqrt();
        if norm == 0.0 {
            return Ok(NormEstimate { norm: 0.0, iterations: it, delta: 0.0 });
        }
        delta = (q - prev).abs();
        if delta < opts.tolerance * q.abs().max(1.0) {
            return Ok(NormEstimate { norm: q, iterations: it, delta });
        }
        prev = q;
        for (a, b) in g.iter_mut().zip(&tg) {
            *a = b / norm;
        }
    }
    Err(BjrError::MaxIterations { iterations: opts.max_iterations, residual: delta })
}

fn draw_types<R: Rng + ?Sized>(n: usize, kernel: &Kernel, rng: &mut R) -> Vec<NodeRow> {
    let exp = Exp::new(kernel.lambda).expect("validated rate");
    let sampler = kernel.dist.sampler();
    (0..n)
        .map(|id| {
            let age = exp.sample(rng);
            let social_index = sampler.sample(rng);
            NodeRow { id: id as u64, age, social_index, degree: 0 }
        })
        .collect()
}

/// Largest value of `kappa_2(s, t)` over `t <= t_max`.
fn index_bound(kernel: &Kernel, s: f64, t_max: f64) -> f64 {
    kernel.index_factor(s, t_max)
}

/// Draws `G(n, kappa)`: `n` i.i.d. types, then every unordered pair
/// independently with probability `min(kappa / n, 1)`.
///
/// Nodes are visited in order of increasing age. All pairs of node `i` with
/// older nodes share the age factor `phi(a_i)`, so candidates are generated
/// by geometric skips at the rate of the largest index factor among the
/// older nodes and thinned down to the exact probability.
pub fn sample_graph<R: Rng + ?Sized>(n: usize, kernel: &Kernel, rng: &mut R) -> Snapshot {
    let nodes = draw_types(n, kernel, rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| nodes[i].age.total_cmp(&nodes[j].age).then(i.cmp(&j)));
    let mut suffix_max = vec![0.0f64; n + 1];
    for p in (0..n).rev() {
        suffix_max[p] = suffix_max[p + 1].max(nodes[order[p]].social_index);
    }
    let nf = n as f64;
    let mut edges = Vec::new();
    for p in 0..n {
        let x = &nodes[order[p]];
        let phi = kernel.age_factor(x.age);
        let q = (phi * index_bound(kernel, x.social_index, suffix_max[p + 1]) / nf).min(1.0);
        if q.is_nan() || q <= 0.0 {
            continue;
        }
        let log_miss = (-q).ln_1p();
        let mut j = p + 1;
        loop {
            if q < 1.0 {
                let u: f64 = rng.random();
                let skip = ((1.0 - u).ln() / log_miss).floor();
                if skip >= (n - j) as f64 {
                    break;
                }
                j += skip as usize;
            }
            if j >= n {
                break;
            }
            let y = &nodes[order[j]];
            let pij = (phi * kernel.index_factor(x.social_index, y.social_index) / nf).min(1.0);
            if pij >= q || rng.random::<f64>() * q < pij {
                edges.push((x.id, y.id));
            }
            j += 1;
        }
    }
    Snapshot::from_parts(0.0, nodes, edges)
}

/// Reference sampler: one Bernoulli trial per unordered pair, `O(n^2)`.
pub fn sample_graph_exhaustive<R: Rng + ?Sized>(n: usize, kernel: &Kernel, rng: &mut R) -> Snapshot {
    let nodes = draw_types(n, kernel, rng);
    let nf = n as f64;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (&nodes[i], &nodes[j]);
            let p = (kernel.kappa(x.age, x.social_index, y.age, y.social_index) / nf).min(1.0);
            if rng.random::<f64>() < p {
                edges.push((x.id, y.id));
            }
        }
    }
    Snapshot::from_parts(0.0, nodes, edges)
}

/// `sum_{i<j} p_ij` for the types of `snapshot`.
pub fn expected_edges(snapshot: &Snapshot, kernel: &Kernel) -> (f64, f64) {
    let nf = snapshot.nodes.len() as f64;
    let mut mean = 0.0;
    let mut var = 0.0;
    for (i, x) in snapshot.nodes.iter().enumerate() {
        for y in &snapshot.nodes[i + 1..] {
            let p = (kernel.kappa(x.age, x.social_index, y.age, y.social_index) / nf).min(1.0);
            mean += p;
            var += p * (1.0 - p);
        }
    }
    (mean, var)
}
