//! Least-squares fits on basis-expanded designs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::ArmData;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::Basis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefs: Vec<f64>,
    pub residual_variance: f64,
    pub n: usize,
    pub rank: usize,
    pub column_labels: Vec<String>,
}

/// OLS by Householder QR. Column labels default to `c0, c1, ...`.
pub fn ols_fit(design: &Matrix, y: &[f64]) -> Result<FitResult> {
    let labels = (0..design.cols()).map(|j| format!("c{j}")).collect();
    ols_fit_labeled(design, y, labels)
}

pub fn ols_fit_labeled(design: &Matrix, y: &[f64], column_labels: Vec<String>) -> Result<FitResult> {
    if design.rows() != y.len() {
        return Err(Error::Invalid(format!(
            "design has {} rows but {} responses",
            design.rows(),
            y.len()
        )));
    }
    let ls = linalg::lstsq(design, y)?;
    let n = y.len();
    let rss: f64 = ls.residuals.iter().map(|r| r * r).sum();
    let residual_variance = if n > ls.rank { rss / (n - ls.rank) as f64 } else { 0.0 };
    Ok(FitResult {
        coefs: ls.coefs,
        residual_variance,
        n,
        rank: ls.rank,
        column_labels,
    })
}

/// Rows `basis(x_i)`.
pub fn design_matrix(xs: &[f64], basis: &Basis) -> Result<Matrix> {
    let mut data = Vec::with_capacity(xs.len() * basis.dim());
    for &x in xs {
        basis.expand_into(x, &mut data)?;
    }
    Matrix::from_row_major(xs.len(), basis.dim(), data)
}

/// Treatment-effect curve `x -> coefs . basis(x)` from a regression of
/// `y` on `[f(x), t f(x)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateModel {
    pub basis: Basis,
    /// Coefficients of the `t * f(x)` block.
    pub coefs: Vec<f64>,
    /// Coefficients of the `f(x)` block, the control-arm mean.
    pub baseline: Vec<f64>,
    /// Treatment index this model describes, when known.
    pub trial: Option<usize>,
    pub fit: FitResult,
}

impl CateModel {
    /// A fixed curve, mainly for plugging in closed forms.
    pub fn from_coefs(basis: Basis, coefs: Vec<f64>, trial: Option<usize>) -> Result<Self> {
        if coefs.len() != basis.dim() {
            return Err(Error::Invalid(format!(
                "{} coefficients for a basis of dimension {}",
                coefs.len(),
                basis.dim()
            )));
        }
        let dim = basis.dim();
        let fit = FitResult {
            coefs: coefs.clone(),
            residual_variance: 0.0,
            n: 0,
            rank: dim,
            column_labels: basis.labels(),
        };
        Ok(Self {
            basis,
            coefs,
            baseline: alloc::vec![0.0; dim],
            trial,
            fit,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.basis.eval(&self.coefs, x)
    }

    /// Predicted mean outcome in arm `t`.
    pub fn arm_mean(&self, x: f64, t: bool) -> f64 {
        let base = self.basis.eval(&self.baseline, x);
        if t {
            base + self.eval(x)
        } else {
            base
        }
    }
}

/// Fits `y ~ [f(x), t f(x)]` and keeps the interaction block as the effect
/// curve. On a confounded slice this is the biased effect; on a trial it is a
/// plug-in effect valid on the trial support.
pub fn fit_cate_regression(data: ArmData<'_>, basis: &Basis, trial: Option<usize>) -> Result<CateModel> {
    let dim = basis.dim();
    let (control, treated) = data.arm_counts();
    if treated < dim {
        return Err(Error::InsufficientArm {
            arm: "treated",
            rows: treated,
            needed: dim,
        });
    }
    if control < dim {
        return Err(Error::InsufficientArm {
            arm: "control",
            rows: control,
            needed: dim,
        });
    }
    let n = data.len();
    let mut rows = Vec::with_capacity(n * 2 * dim);
    let mut f = Vec::with_capacity(dim);
    for (&x, &t) in data.x.iter().zip(data.t) {
        f.clear();
        basis.expand_into(x, &mut f)?;
        rows.extend_from_slice(&f);
        let ind = if t { 1.0 } else { 0.0 };
        rows.extend(f.iter().map(|v| ind * v));
    }
    let design = Matrix::from_row_major(n, 2 * dim, rows)?;
    let mut labels: Vec<String> = basis.labels();
    labels.extend(basis.labels().into_iter().map(|l| format!("t*{l}")));
    let fit = ols_fit_labeled(&design, data.y, labels)?;
    Ok(CateModel {
        basis: basis.clone(),
        baseline: fit.coefs[..dim].to_vec(),
        coefs: fit.coefs[dim..].to_vec(),
        trial,
        fit,
    })
}
