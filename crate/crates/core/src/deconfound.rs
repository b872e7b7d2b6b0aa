//! Deconfounding functions: trial-side signals, `eta` fits and the debiased
//! effect curve `tau_hat = omega_hat + eta_hat`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::RctDataset;
use crate::error::{Error, Result};
use crate::mixedfx::{self, GroupedObservation, MixedFit, MixedModelSpec, RemlOptions};
use crate::model::{Basis, EvalGrid};
use crate::regress::{self, CateModel, FitResult};

/// Randomization probability of the simulated trials.
pub const TRIAL_PROPENSITY: f64 = 0.5;

/// `y (t - e) / (e (1 - e))`; its mean given `x` is the effect in a trial
/// randomized with probability `e`.
pub fn transformed_outcome(y: f64, t: bool, e: f64) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Domain(e));
    }
    let t = if t { 1.0 } else { 0.0 };
    Ok(y * (t - e) / (e * (1.0 - e)))
}

/// Unit-level signal whose conditional mean is `eta_k(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoOutcome {
    pub x: f64,
    pub d: f64,
    pub trial: usize,
}

/// How the trial-side effect signal is formed before `omega_hat` is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PseudoSignal {
    /// Inverse-propensity transformed outcome with known propensity.
    TransformedOutcome { propensity: f64 },
    /// Observed outcome minus the fitted mean of the opposite arm, with both
    /// arm means regressed on `basis` within the trial.
    ArmImputation { basis: Basis },
}

impl Default for PseudoSignal {
    fn default() -> Self {
        PseudoSignal::TransformedOutcome {
            propensity: TRIAL_PROPENSITY,
        }
    }
}

fn check_pairing(rct: &RctDataset, omega: &CateModel) -> Result<()> {
    match omega.trial {
        Some(k) if k != rct.trial() => Err(Error::Precondition(format!(
            "omega fitted for treatment {k} but trial is for treatment {}",
            rct.trial()
        ))),
        _ => Ok(()),
    }
}

/// `d_i = transformed_outcome(y_i, t_i, e) - omega_hat(x_i)`.
pub fn eta_pseudo_outcomes(rct: &RctDataset, omega: &CateModel, e: f64) -> Result<Vec<PseudoOutcome>> {
    pseudo_outcomes(rct, omega, &PseudoSignal::TransformedOutcome { propensity: e })
}

pub fn pseudo_outcomes(rct: &RctDataset, omega: &CateModel, signal: &PseudoSignal) -> Result<Vec<PseudoOutcome>> {
    check_pairing(rct, omega)?;
    let trial = rct.trial();
    let rows = rct.x().iter().zip(rct.t()).zip(rct.y());
    match signal {
        PseudoSignal::TransformedOutcome { propensity } => rows
            .map(|((&x, &t), &y)| {
                Ok(PseudoOutcome {
                    x,
                    d: transformed_outcome(y, t, *propensity)? - omega.eval(x),
                    trial,
                })
            })
            .collect(),
        PseudoSignal::ArmImputation { basis } => {
            if rct.is_empty() {
                return Ok(Vec::new());
            }
            let arms = regress::fit_cate_regression(rct.arms(), basis, Some(trial))?;
            Ok(rows
                .map(|((&x, &t), &y)| {
                    let signal = if t {
                        y - arms.arm_mean(x, false)
                    } else {
                        arms.arm_mean(x, true) - y
                    };
                    PseudoOutcome {
                        x,
                        d: signal - omega.eval(x),
                        trial,
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    SingleTrial,
    Hierarchical,
}

impl EtaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EtaMode::SingleTrial => "single_trial",
            EtaMode::Hierarchical => "hierarchical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaBacking {
    Ols { basis: Basis, fit: FitResult },
    Mixed(MixedFit),
}

/// A fitted deconfounding function, evaluable at any `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaModel {
    pub mode: EtaMode,
    /// Treatment indices the fit used, ascending.
    pub trials: Vec<usize>,
    pub backing: EtaBacking,
}

impl EtaModel {
    /// `eta_hat_k(x)`. A single-trial model only answers for its own trial.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if !self.trials.contains(&k) {
            return Err(Error::UnknownIndex(k));
        }
        match &self.backing {
            EtaBacking::Ols { basis, fit } => Ok(basis.eval(&fit.coefs, x)),
            EtaBacking::Mixed(fit) => fit.predict_group(k, x),
        }
    }

    pub fn converged(&self) -> bool {
        match &self.backing {
            EtaBacking::Ols { .. } => true,
            EtaBacking::Mixed(fit) => fit.converged,
        }
    }

    /// Rank of the single-trial design; the fixed-effect dimension otherwise.
    pub fn rank(&self) -> usize {
        match &self.backing {
            EtaBacking::Ols { fit, .. } => fit.rank,
            EtaBacking::Mixed(fit) => fit.beta.len(),
        }
    }
}

/// OLS of `d` on `basis` using one trial's pseudo-outcomes.
pub fn fit_eta_single(pseudo: &[PseudoOutcome], basis: &Basis) -> Result<EtaModel> {
    if pseudo.len() < basis.dim() {
        return Err(Error::Underdetermined {
            observations: pseudo.len(),
            parameters: basis.dim(),
        });
    }
    let trial = pseudo[0].trial;
    if pseudo.iter().any(|p| p.trial != trial) {
        return Err(Error::Precondition("single-trial fit given several trials".into()));
    }
    let xs: Vec<f64> = pseudo.iter().map(|p| p.x).collect();
    let d: Vec<f64> = pseudo.iter().map(|p| p.d).collect();
    let design = regress::design_matrix(&xs, basis)?;
    let fit = regress::ols_fit_labeled(&design, &d, basis.labels())?;
    Ok(EtaModel {
        mode: EtaMode::SingleTrial,
        trials: alloc::vec![trial],
        backing: EtaBacking::Ols {
            basis: basis.clone(),
            fit,
        },
    })
}

/// Mixed model `d = f(x)'beta + g(x)'gamma_k + e` with one group per trial.
/// Trial ids are mapped to groups in ascending order.
pub fn fit_eta_hierarchical(pseudo: &[PseudoOutcome], f: &Basis, g: &Basis, opts: &RemlOptions) -> Result<EtaModel> {
    let mut trials: Vec<usize> = pseudo.iter().map(|p| p.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    if trials.len() < 2 {
        return Err(Error::Precondition(format!(
            "hierarchical fit needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let spec = MixedModelSpec {
        f: f.clone(),
        g: g.clone(),
        groups: trials.len(),
    };
    let obs: Vec<GroupedObservation> = pseudo
        .iter()
        .map(|p| {
            // trials is sorted and contains every id
            let group = trials.binary_search(&p.trial).unwrap_or(0) + 1;
            GroupedObservation::new(p.x, group, p.d)
        })
        .collect();
    let fit = mixedfx::fit_reml(&spec, &obs, opts)?;
    Ok(EtaModel {
        mode: EtaMode::Hierarchical,
        trials,
        backing: EtaBacking::Mixed(fit),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub tau_hat: f64,
    pub eta_hat: f64,
}

/// `tau_hat_k(x) = omega_hat_k(x) + eta_hat_k(x)` over `grid`.
pub fn debias_cate(omega: &CateModel, eta: &EtaModel, k: usize, grid: &EvalGrid) -> Result<Vec<CurvePoint>> {
    if let Some(j) = omega.trial {
        if j != k {
            return Err(Error::Precondition(format!("omega fitted for treatment {j}, asked for {k}")));
        }
    }
    grid.validate()?;
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let eta_hat = eta.eval(k, x)?;
            Ok(CurvePoint {
                x,
                tau_hat: omega.eval(x) + eta_hat,
                eta_hat,
            })
        })
        .collect()
}
