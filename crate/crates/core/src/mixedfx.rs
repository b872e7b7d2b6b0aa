//! Linear mixed model `value = f(x)'beta + g(x)'gamma_k + e` with
//! `gamma_k ~ N(0, D)` and `e ~ N(0, sigma2)`, fitted by restricted maximum
//! likelihood.
//!
//! The random-effect covariance is written relative to the residual variance,
//! `D = sigma2 * L L'`, with `L` lower triangular. For a given `L` the
//! penalized least-squares system
//!
//! ```text
//! [ L'Z'ZL + I   L'Z'X ] [u]   [L'Z'y]
//! [ X'ZL         X'X   ] [b] = [X'y ]
//! ```
//!
//! is factored once by Cholesky. Its log-determinant blocks and the penalized
//! residual sum of squares `r2` give the profiled REML deviance
//!
//! ```text
//! d(L) = log|L_Z|^2 + log|R_X|^2 + (n - p) (1 + log(2 pi r2 / (n - p)))
//! ```
//!
//! which is minimized over the log-Cholesky parameters of `L` with
//! Nelder-Mead. `Z'Z` is block diagonal by group, so everything is built from
//! per-group cross-products and the raw data is read once.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};
use crate::math;
use crate::model::Basis;
use crate::simplex::{self, Minimum, SimplexOptions};

/// Upper bound on the relative random-effect variance `D_ii / sigma2`.
pub const RELATIVE_VARIANCE_CAP: f64 = 1e6;

const LOG_DIAG_FLOOR: f64 = -12.0;
/// Relative variances below this are tried at exactly zero after optimization.
const BOUNDARY_SNAP: f64 = 1e-8;
/// Deviance slack allowed when snapping to the boundary.
const SNAP_SLACK: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedModelSpec {
    /// Fixed-effect basis.
    pub f: Basis,
    /// Random-effect basis.
    pub g: Basis,
    /// Number of groups; ids run `1..=groups`.
    pub groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupedObservation {
    pub x: f64,
    pub group: usize,
    pub value: f64,
}

impl GroupedObservation {
    pub const fn new(x: f64, group: usize, value: f64) -> Self {
        Self { x, group, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Random-effect covariance, row-major `dim x dim`.
    pub d: Vec<f64>,
    pub dim: usize,
    pub sigma2: f64,
}

impl VarianceComponents {
    pub fn new(d: Matrix, sigma2: f64) -> Result<Self> {
        if d.rows() != d.cols() {
            return Err(Error::Invalid("D must be square".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        let vc = Self {
            dim: d.rows(),
            d: d.as_slice().to_vec(),
            sigma2,
        };
        if vc.min_eigenvalue() < -1e-10 {
            return Err(Error::Invalid("D must be positive semidefinite".into()));
        }
        Ok(vc)
    }

    pub fn diagonal(values: &[f64], sigma2: f64) -> Result<Self> {
        let mut d = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            d[(i, i)] = v;
        }
        Self::new(d, sigma2)
    }

    pub fn d_matrix(&self) -> Matrix {
        Matrix::from_row_major(self.dim, self.dim, self.d.clone()).expect("square by construction")
    }

    pub fn d_at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.dim + j]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::symmetric_eigenvalues(&self.d_matrix())
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedFit {
    pub spec: MixedModelSpec,
    pub beta: Vec<f64>,
    /// BLUPs, `gamma[k - 1]` for group `k`.
    pub gamma: Vec<Vec<f64>>,
    pub vc: VarianceComponents,
    pub converged: bool,
    pub reml_deviance: f64,
    pub iterations: usize,
    /// Relative covariance factor at the optimum, row-major, `D = sigma2 L L'`.
    pub relative_factor: Vec<f64>,
}

impl MixedFit {
    /// `f(x)'beta + g(x)'gamma_k`.
    pub fn predict_group(&self, k: usize, x: f64) -> Result<f64> {
        let gamma = self.group_effect(k)?;
        Ok(self.predict_population(x) + self.spec.g.eval(gamma, x))
    }

    /// `f(x)'beta`.
    pub fn predict_population(&self, x: f64) -> f64 {
        self.spec.f.eval(&self.beta, x)
    }

    pub fn group_effect(&self, k: usize) -> Result<&[f64]> {
        if k == 0 || k > self.gamma.len() {
            return Err(Error::UnknownIndex(k));
        }
        Ok(&self.gamma[k - 1])
    }
}

pub fn predict_group(fit: &MixedFit, k: usize, x: f64) -> Result<f64> {
    fit.predict_group(k, x)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemlOptions {
    pub simplex: SimplexOptions,
    /// Skip optimization and use these variance components as given.
    pub fixed_variance: Option<VarianceComponents>,
}

/// Per-group cross-products of the design, enough to evaluate the deviance
/// for any covariance factor.
#[derive(Debug, Clone)]
pub struct RemlProblem {
    spec: MixedModelSpec,
    n: usize,
    /// `sum g g'` per group.
    zz: Vec<Matrix>,
    /// `sum g f'` per group.
    zx: Vec<Matrix>,
    zy: Vec<Vec<f64>>,
    xx: Matrix,
    xy: Vec<f64>,
    yy: f64,
}

/// Solution of the penalized system for one covariance factor.
#[derive(Debug, Clone)]
struct PlsSolution {
    beta: Vec<f64>,
    u: Vec<Vec<f64>>,
    r2: f64,
    log_det_z: f64,
    log_det_x: f64,
}

impl RemlProblem {
    pub fn new(spec: &MixedModelSpec, obs: &[GroupedObservation]) -> Result<Self> {
        let p = spec.f.dim();
        let q = spec.g.dim();
        let k = spec.groups;
        if k == 0 {
            return Err(Error::Invalid("mixed model needs at least one group".into()));
        }
        if obs.len() < p {
            return Err(Error::Underdetermined {
                observations: obs.len(),
                parameters: p,
            });
        }
        if obs.len() <= p + q {
            return Err(Error::Underdetermined {
                observations: obs.len(),
                parameters: p + q + 1,
            });
        }
        let mut counts = vec![0usize; k];
        let mut zz = vec![Matrix::zeros(q, q); k];
        let mut zx = vec![Matrix::zeros(q, p); k];
        let mut zy = vec![vec![0.0; q]; k];
        let mut xx = Matrix::zeros(p, p);
        let mut xy = vec![0.0; p];
        let mut yy = 0.0;
        let mut fx = Vec::with_capacity(p);
        let mut gx = Vec::with_capacity(q);
        for o in obs {
            if o.group == 0 || o.group > k {
                return Err(Error::UnknownIndex(o.group));
            }
            if !o.value.is_finite() {
                return Err(Error::NonFinite("mixed-model response"));
            }
            let gi = o.group - 1;
            counts[gi] += 1;
            fx.clear();
            gx.clear();
            spec.f.expand_into(o.x, &mut fx)?;
            spec.g.expand_into(o.x, &mut gx)?;
            for a in 0..q {
                for b in 0..q {
                    zz[gi][(a, b)] += gx[a] * gx[b];
                }
                for b in 0..p {
                    zx[gi][(a, b)] += gx[a] * fx[b];
                }
                zy[gi][a] += gx[a] * o.value;
            }
            for a in 0..p {
                for b in 0..p {
                    xx[(a, b)] += fx[a] * fx[b];
                }
                xy[a] += fx[a] * o.value;
            }
            yy += o.value * o.value;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Precondition(format!("group {} has no observations", empty + 1)));
        }
        if Cholesky::new(&xx).is_err() {
            return Err(Error::NumericalFailure("fixed-effect design is singular".into()));
        }
        Ok(Self {
            spec: spec.clone(),
            n: obs.len(),
            zz,
            zx,
            zy,
            xx,
            xy,
            yy,
        })
    }

    fn p(&self) -> usize {
        self.spec.f.dim()
    }

    fn q(&self) -> usize {
        self.spec.g.dim()
    }

    /// Number of log-Cholesky parameters.
    pub fn theta_len(&self) -> usize {
        let q = self.q();
        q * (q + 1) / 2
    }

    /// Lower-triangular factor from log-Cholesky parameters, ordered row by
    /// row with the diagonal entry on the log scale. Rows are capped so that
    /// no relative variance exceeds [`RELATIVE_VARIANCE_CAP`].
    pub fn factor_from_theta(&self, theta: &[f64]) -> Matrix {
        let q = self.q();
        let log_ceil = 0.5 * math::ln(RELATIVE_VARIANCE_CAP);
        let mut l = Matrix::zeros(q, q);
        let mut idx = 0;
        for i in 0..q {
            for j in 0..=i {
                l[(i, j)] = if i == j {
                    math::exp(theta[idx].clamp(LOG_DIAG_FLOOR, log_ceil))
                } else {
                    theta[idx]
                };
                idx += 1;
            }
            let row_sq: f64 = (0..=i).map(|j| l[(i, j)] * l[(i, j)]).sum();
            if row_sq > RELATIVE_VARIANCE_CAP {
                let s = math::sqrt(RELATIVE_VARIANCE_CAP / row_sq);
                for j in 0..=i {
                    l[(i, j)] *= s;
                }
            }
        }
        l
    }

    fn solve(&self, lambda: &Matrix) -> Result<PlsSolution> {
        let (p, q, k) = (self.p(), self.q(), self.spec.groups);
        let m = k * q + p;
        let lt = lambda.transpose();
        let mut a = Matrix::zeros(m, m);
        let mut b = vec![0.0; m];
        for g in 0..k {
            let off = g * q;
            let block = lt.mul(&self.zz[g]).mul(lambda);
            let cross = lt.mul(&self.zx[g]);
            let rhs = lt.mul_vec(&self.zy[g]);
            for i in 0..q {
                for j in 0..q {
                    a[(off + i, off + j)] = block[(i, j)] + if i == j { 1.0 } else { 0.0 };
                }
                for j in 0..p {
                    a[(off + i, k * q + j)] = cross[(i, j)];
                    a[(k * q + j, off + i)] = cross[(i, j)];
                }
                b[off + i] = rhs[i];
            }
        }
        for i in 0..p {
            for j in 0..p {
                a[(k * q + i, k * q + j)] = self.xx[(i, j)];
            }
            b[k * q + i] = self.xy[i];
        }
        let chol = Cholesky::new(&a)?;
        let s = chol.solve(&b);
        let r2 = self.yy - linalg::dot(&b, &s);
        if r2 <= 0.0 || !r2.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "penalized residual sum of squares is {r2}"
            )));
        }
        Ok(PlsSolution {
            beta: s[k * q..].to_vec(),
            u: (0..k).map(|g| s[g * q..(g + 1) * q].to_vec()).collect(),
            r2,
            log_det_z: chol.log_det_range(0..k * q),
            log_det_x: chol.log_det_range(k * q..m),
        })
    }

    fn dof(&self) -> f64 {
        (self.n - self.p()) as f64
    }

    fn profiled(&self, sol: &PlsSolution) -> f64 {
        let nu = self.dof();
        sol.log_det_z + sol.log_det_x + nu * (1.0 + LN_2PI + math::ln(sol.r2 / nu))
    }

    /// Profiled REML deviance for a relative covariance factor.
    pub fn profiled_deviance_factor(&self, lambda: &Matrix) -> Result<f64> {
        let sol = self.solve(lambda)?;
        Ok(self.profiled(&sol))
    }

    /// Profiled REML deviance at log-Cholesky parameters; `+inf` when the
    /// system cannot be solved.
    pub fn profiled_deviance(&self, theta: &[f64]) -> f64 {
        self.profiled_deviance_factor(&self.factor_from_theta(theta))
            .unwrap_or(f64::INFINITY)
    }

    /// REML deviance at fully specified variance components.
    pub fn deviance_at(&self, vc: &VarianceComponents) -> Result<f64> {
        let lambda = relative_factor(vc)?;
        let sol = self.solve(&lambda)?;
        Ok(self.fixed_deviance(&sol, vc.sigma2))
    }

    fn fixed_deviance(&self, sol: &PlsSolution, sigma2: f64) -> f64 {
        let nu = self.dof();
        sol.log_det_z + sol.log_det_x + nu * (LN_2PI + math::ln(sigma2)) + sol.r2 / sigma2
    }

    fn finish(&self, lambda: &Matrix, sol: PlsSolution, sigma2: f64, deviance: f64) -> Result<MixedFit> {
        let q = self.q();
        let llt = lambda.mul(&lambda.transpose());
        let mut d = Matrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                d[(i, j)] = sigma2 * llt[(i, j)];
            }
        }
        // symmetrize against round-off
        for i in 0..q {
            for j in 0..i {
                let avg = 0.5 * (d[(i, j)] + d[(j, i)]);
                d[(i, j)] = avg;
                d[(j, i)] = avg;
            }
        }
        if !deviance.is_finite() {
            return Err(Error::NumericalFailure("non-finite REML deviance".into()));
        }
        let gamma = sol.u.iter().map(|u| lambda.mul_vec(u)).collect();
        Ok(MixedFit {
            spec: self.spec.clone(),
            beta: sol.beta,
            gamma,
            vc: VarianceComponents {
                d: d.as_slice().to_vec(),
                dim: q,
                sigma2,
            },
            converged: true,
            reml_deviance: deviance,
            iterations: 0,
            relative_factor: lambda.as_slice().to_vec(),
        })
    }
}

/// Any square `L` with `L L' = D / sigma2`.
fn relative_factor(vc: &VarianceComponents) -> Result<Matrix> {
    let q = vc.dim;
    let mut rel = vc.d_matrix();
    for v in 0..q * q {
        let (i, j) = (v / q, v % q);
        rel[(i, j)] /= vc.sigma2;
    }
    let (vals, vecs) = linalg::symmetric_eigen(&rel);
    if vals.first().is_some_and(|&v| v < -1e-10) {
        return Err(Error::Invalid("D must be positive semidefinite".into()));
    }
    let mut l = Matrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            l[(i, j)] = vecs[(i, j)] * math::sqrt(vals[j].max(0.0));
        }
    }
    Ok(l)
}

/// Restricted maximum likelihood fit with BLUPs.
pub fn fit_reml(spec: &MixedModelSpec, obs: &[GroupedObservation], opts: &RemlOptions) -> Result<MixedFit> {
    let problem = RemlProblem::new(spec, obs)?;

    if let Some(vc) = &opts.fixed_variance {
        if vc.dim != spec.g.dim() {
            return Err(Error::Invalid(format!(
                "fixed D has dimension {} but the random basis has {}",
                vc.dim,
                spec.g.dim()
            )));
        }
        let lambda = relative_factor(vc)?;
        let sol = problem.solve(&lambda)?;
        let deviance = problem.fixed_deviance(&sol, vc.sigma2);
        let mut fit = problem.finish(&lambda, sol, vc.sigma2, deviance)?;
        fit.vc.d = vc.d.clone();
        return Ok(fit);
    }

    let theta0 = vec![0.0; problem.theta_len()];
    let objective = |theta: &[f64]| problem.profiled_deviance(theta);
    let first = simplex::minimize(objective, &theta0, opts.simplex);
    let mut best = first.clone();
    let mut iterations = first.iterations;
    // one restart from the optimum guards against a collapsed simplex
    if first.converged && iterations < opts.simplex.max_iter {
        let restart_opts = SimplexOptions {
            max_iter: opts.simplex.max_iter - iterations,
            initial_step: 0.1 * opts.simplex.initial_step,
            ..opts.simplex
        };
        let second = simplex::minimize(objective, &first.x, restart_opts);
        iterations += second.iterations;
        if second.value <= best.value {
            best = Minimum {
                converged: second.converged,
                ..second
            };
        } else {
            best.converged = second.converged;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::NumericalFailure("REML deviance is not finite at any trial point".into()));
    }

    let mut lambda = problem.factor_from_theta(&best.x);
    let mut deviance = best.value;
    snap_to_boundary(&problem, &mut lambda, &mut deviance);

    let sol = problem.solve(&lambda)?;
    let sigma2 = sol.r2 / problem.dof();
    let deviance_final = problem.profiled(&sol);
    let mut fit = problem.finish(&lambda, sol, sigma2, deviance_final)?;
    fit.converged = best.converged;
    fit.iterations = iterations;
    Ok(fit)
}

/// Sets negligible variance directions exactly to zero when that costs no
/// more than [`SNAP_SLACK`] in deviance: first the whole factor, otherwise
/// each negligible row on its own.
fn snap_to_boundary(problem: &RemlProblem, lambda: &mut Matrix, deviance: &mut f64) {
    let q = lambda.rows();
    let budget = *deviance + SNAP_SLACK;
    let zero = Matrix::zeros(q, q);
    if let Ok(dev) = problem.profiled_deviance_factor(&zero) {
        if dev <= budget {
            *lambda = zero;
            *deviance = dev;
            return;
        }
    }
    for i in 0..q {
        let row_sq: f64 = (0..q).map(|j| lambda[(i, j)] * lambda[(i, j)]).sum();
        if row_sq >= BOUNDARY_SNAP || row_sq == 0.0 {
            continue;
        }
        let mut candidate = lambda.clone();
        for j in 0..q {
            candidate[(i, j)] = 0.0;
        }
        if let Ok(dev) = problem.profiled_deviance_factor(&candidate) {
            if dev <= budget {
                *lambda = candidate;
                *deviance = dev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{design_matrix, ols_fit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn spec(f: u32, g: u32, groups: usize) -> MixedModelSpec {
        MixedModelSpec {
            f: Basis::polynomial(f),
            g: Basis::polynomial(g),
            groups,
        }
    }

    fn simulate(
        rng: &mut ChaCha8Rng,
        beta: &[f64],
        d_sd: &[f64],
        groups: usize,
        per_group: usize,
        sigma: f64,
    ) -> Vec<GroupedObservation> {
        let mut out = Vec::new();
        for k in 1..=groups {
            let gamma: Vec<f64> = d_sd
                .iter()
                .map(|sd| {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    sd * z
                })
                .collect();
            for _ in 0..per_group {
                let x = rng.random::<f64>() * 4.0 - 2.0;
                let mean = beta[0] + beta[1] * x + gamma[0] + gamma.get(1).map_or(0.0, |s| s * x);
                let e: f64 = StandardNormal.sample(&mut *rng);
                out.push(GroupedObservation::new(x, k, mean + sigma * e));
            }
        }
        out
    }

    fn fit_result(fit: &MixedFit, k: usize, x: f64) -> f64 {
        fit.predict_group(k, x).unwrap()
    }

    #[test]
    fn predict_examples() {
        let fit = MixedFit {
            spec: spec(1, 1, 1),
            beta: vec![2.0, -1.0],
            gamma: vec![vec![0.0, 0.0]],
            vc: VarianceComponents::diagonal(&[0.0, 0.0], 1.0).unwrap(),
            converged: true,
            reml_deviance: 0.0,
            iterations: 0,
            relative_factor: vec![0.0; 4],
        };
        assert_eq!(fit_result(&fit, 1, 3.0), -1.0);
        assert_eq!(fit.predict_population(3.0), fit_result(&fit, 1, 3.0));
        let mut shifted = fit.clone();
        shifted.gamma[0] = vec![1.0, -1.0];
        assert_eq!(fit_result(&shifted, 1, 0.0), 3.0);
        assert_eq!(shifted.predict_group(2, 0.0), Err(Error::UnknownIndex(2)));
    }

    #[test]
    fn fixed_zero_variance_is_pooled_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = simulate(&mut rng, &[1.0, 0.5], &[0.0, 0.0], 2, 200, 1.0);
        let s = spec(2, 1, 2);
        let opts = RemlOptions {
            fixed_variance: Some(VarianceComponents::diagonal(&[0.0, 0.0], 1.0).unwrap()),
            ..RemlOptions::default()
        };
        let fit = fit_reml(&s, &obs, &opts).unwrap();
        let xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
        let ys: Vec<f64> = obs.iter().map(|o| o.value).collect();
        let ols = ols_fit(&design_matrix(&xs, &s.f).unwrap(), &ys).unwrap();
        for (b, o) in fit.beta.iter().zip(&ols.coefs) {
            assert!((b - o).abs() < 1e-10);
        }
        assert!(fit.gamma.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn single_group_reproduces_group_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = simulate(&mut rng, &[0.3, -1.0], &[0.0, 0.0], 1, 150, 1.0);
        let s = spec(2, 1, 1);
        let xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
        let ys: Vec<f64> = obs.iter().map(|o| o.value).collect();
        let ols = ols_fit(&design_matrix(&xs, &s.f).unwrap(), &ys).unwrap();
        let mut prev = f64::INFINITY;
        for scale in [1e6, 1e2, 1.0] {
            let opts = RemlOptions {
                fixed_variance: Some(VarianceComponents::diagonal(&[scale, scale], 1.0).unwrap()),
                ..RemlOptions::default()
            };
            let fit = fit_reml(&s, &obs, &opts).unwrap();
            for x in [-2.0, 0.0, 1.5] {
                let ols_pred = s.f.eval(&ols.coefs, x);
                assert!((fit_result(&fit, 1, x) - ols_pred).abs() < 1e-4);
            }
            let norm = linalg::norm(&fit.gamma[0]);
            assert!(norm <= prev + 1e-9);
            prev = norm;
        }
    }

    #[test]
    fn identical_groups_get_zero_effects() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = simulate(&mut rng, &[1.0, 2.0], &[0.0, 0.0], 1, 100, 1.0);
        let mut obs = Vec::new();
        for k in 1..=3 {
            obs.extend(one.iter().map(|o| GroupedObservation::new(o.x, k, o.value)));
        }
        let fit = fit_reml(&spec(1, 1, 3), &obs, &RemlOptions::default()).unwrap();
        for g in &fit.gamma {
            for v in g {
                assert!(v.abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn shrinkage_grows_as_d_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let obs = simulate(&mut rng, &[0.0, 1.0], &[1.0, 0.5], 4, 50, 1.0);
        let s = spec(1, 1, 4);
        let mut prev = [f64::INFINITY; 4];
        for scale in [10.0, 1.0, 0.1, 0.01, 0.001] {
            let opts = RemlOptions {
                fixed_variance: Some(VarianceComponents::diagonal(&[scale, scale], 1.0).unwrap()),
                ..RemlOptions::default()
            };
            let fit = fit_reml(&s, &obs, &opts).unwrap();
            for (k, g) in fit.gamma.iter().enumerate() {
                let n = linalg::norm(g);
                assert!(n <= prev[k] + 1e-12, "group {k} scale {scale}: {n} > {}", prev[k]);
                prev[k] = n;
            }
        }
    }

    #[test]
    fn optimum_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs = simulate(&mut rng, &[1.0, -0.5], &[1.0, 0.5], 8, 60, 1.0);
        let s = spec(1, 1, 8);
        let fit = fit_reml(&s, &obs, &RemlOptions::default()).unwrap();
        assert!(fit.converged);
        let problem = RemlProblem::new(&s, &obs).unwrap();
        let lambda = Matrix::from_row_major(2, 2, fit.relative_factor.clone()).unwrap();
        let at_opt = problem.profiled_deviance_factor(&lambda).unwrap();
        assert!((at_opt - fit.reml_deviance).abs() < 1e-9);
        for _ in 0..20 {
            let mut p = lambda.clone();
            for (i, j) in [(0, 0), (1, 0), (1, 1)] {
                p[(i, j)] += 0.05 * (rng.random::<f64>() * 2.0 - 1.0);
            }
            let dev = problem.profiled_deviance_factor(&p).unwrap();
            assert!(dev >= fit.reml_deviance - 1e-7, "{dev} < {}", fit.reml_deviance);
        }
    }

    #[test]
    fn two_groups_do_not_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let obs = simulate(&mut rng, &[1.0, -0.5], &[1.0, 1.0], 2, 40, 1.0);
            let fit = fit_reml(&spec(2, 1, 2), &obs, &RemlOptions::default()).unwrap();
            assert!(fit.reml_deviance.is_finite());
            assert!(fit.vc.min_eigenvalue() >= -1e-10);
            for i in 0..2 {
                assert!(fit.vc.d_at(i, i) <= RELATIVE_VARIANCE_CAP * fit.vc.sigma2 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn errors() {
        let s = spec(2, 1, 2);
        let few = [GroupedObservation::new(0.0, 1, 1.0), GroupedObservation::new(1.0, 2, 1.0)];
        assert!(matches!(
            fit_reml(&s, &few, &RemlOptions::default()),
            Err(Error::Underdetermined { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut obs = simulate(&mut rng, &[0.0, 0.0], &[0.0, 0.0], 1, 20, 1.0);
        assert!(matches!(
            fit_reml(&s, &obs, &RemlOptions::default()),
            Err(Error::Precondition(_))
        ));
        obs.push(GroupedObservation::new(0.0, 3, 0.0));
        assert_eq!(fit_reml(&s, &obs, &RemlOptions::default()), Err(Error::UnknownIndex(3)));
    }
}
