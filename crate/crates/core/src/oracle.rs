//! Closed-form ground truth for the generative scenarios and a brute-force
//! simulation that checks it.
//!
//! With outcome mean `E[Y | k] = sum c x^p T^a U^b` and `P(U = 1) = pi`:
//!
//! * `tau_k(x)` keeps the terms containing `T` and replaces `U` by `pi`;
//! * `omega_k(x)`, the limit of the naive arm difference, replaces `U` by
//!   `P(U = 1 | T = 1)` in the treated arm and by `P(U = 1 | T = 0)` in the
//!   control arm;
//! * `eta_k = tau_k - omega_k`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::outcome_mean;
use crate::error::{Error, Result};
use crate::model::{EvalGrid, Interval};
use crate::poly::Polynomial;
use crate::scenario::{ScenarioSpec, Shape, CONFOUNDER_PREVALENCE};
use crate::seed::SeedSpec;
use crate::math;

/// `P(U = 1 | T_k = t)` in the observational cohort.
pub fn posterior_u(spec: &ScenarioSpec, k: usize, t: bool) -> Result<f64> {
    spec.check_trial(k)?;
    let probs = spec.treat_probs[k - 1];
    let like = |u: bool| {
        let p = probs.given(u);
        if t {
            p
        } else {
            1.0 - p
        }
    };
    let pi = CONFOUNDER_PREVALENCE;
    let num = like(true) * pi;
    let den = num + like(false) * (1.0 - pi);
    // an impossible arm carries no information about U
    Ok(if den > 0.0 { num / den } else { pi })
}

fn collect(spec: &ScenarioSpec, k: usize, weight: impl Fn(bool, bool) -> f64) -> Result<Polynomial> {
    let mut p = Polynomial::zero();
    for term in spec.terms(k)? {
        let w = weight(term.t, term.u);
        if w != 0.0 {
            p.add_term(term.coef * w, term.x_pow as usize);
        }
    }
    Ok(p)
}

/// `tau_k` as a polynomial in `x`.
pub fn tau_poly(spec: &ScenarioSpec, k: usize) -> Result<Polynomial> {
    collect(spec, k, |t, u| match (t, u) {
        (false, _) => 0.0,
        (true, false) => 1.0,
        (true, true) => CONFOUNDER_PREVALENCE,
    })
}

/// `omega_k` as a polynomial in `x`.
pub fn omega_poly(spec: &ScenarioSpec, k: usize) -> Result<Polynomial> {
    let p1 = posterior_u(spec, k, true)?;
    let p0 = posterior_u(spec, k, false)?;
    collect(spec, k, |t, u| match (t, u) {
        (false, false) => 0.0,
        (false, true) => p1 - p0,
        (true, false) => 1.0,
        (true, true) => p1,
    })
}

/// `eta_k = tau_k - omega_k`.
pub fn eta_poly(spec: &ScenarioSpec, k: usize) -> Result<Polynomial> {
    Ok(&tau_poly(spec, k)? - &omega_poly(spec, k)?)
}

pub fn true_tau(spec: &ScenarioSpec, k: usize, x: f64) -> Result<f64> {
    Ok(tau_poly(spec, k)?.eval(x))
}

pub fn true_omega(spec: &ScenarioSpec, k: usize, x: f64) -> Result<f64> {
    Ok(omega_poly(spec, k)?.eval(x))
}

pub fn true_eta(spec: &ScenarioSpec, k: usize, x: f64) -> Result<f64> {
    Ok(eta_poly(spec, k)?.eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub treated: f64,
    pub untreated: f64,
}

/// Closed-form curves for every trial of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurves {
    pub shape: Shape,
    pub tau: Vec<Polynomial>,
    pub omega: Vec<Polynomial>,
    pub eta: Vec<Polynomial>,
    pub posterior: Vec<Posterior>,
}

impl OracleCurves {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let ks = 1..=spec.k_trials;
        Ok(Self {
            shape: spec.shape,
            tau: ks.clone().map(|k| tau_poly(spec, k)).collect::<Result<_>>()?,
            omega: ks.clone().map(|k| omega_poly(spec, k)).collect::<Result<_>>()?,
            eta: ks.clone().map(|k| eta_poly(spec, k)).collect::<Result<_>>()?,
            posterior: ks
                .map(|k| {
                    Ok(Posterior {
                        treated: posterior_u(spec, k, true)?,
                        untreated: posterior_u(spec, k, false)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Smallest simulation size accepted by [`brute_force_check`].
pub const MIN_BRUTE_FORCE_N: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOptions {
    /// Bin centres.
    pub centers: EvalGrid,
    pub bin_width: f64,
}

impl Default for BruteForceOptions {
    /// Six unit-width bins tiling `[-3, 3]`, centred on `-2.5, ..., 2.5`.
    fn default() -> Self {
        Self {
            centers: EvalGrid {
                lo: -2.5,
                hi: 2.5,
                step: 1.0,
            },
            bin_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    pub center: f64,
    pub units: usize,
    pub treated: usize,
    pub omega_hat: f64,
    pub omega_true: f64,
    pub tau_hat: f64,
    pub tau_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDeviation {
    pub trial: usize,
    pub bins: Vec<BinEstimate>,
    pub omega_max_dev: f64,
    pub tau_max_dev: f64,
    pub omega_rms_dev: f64,
    pub tau_rms_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceReport {
    pub shape: Shape,
    pub n: usize,
    pub bin_width: f64,
    pub trials: Vec<TrialDeviation>,
}

impl BruteForceReport {
    pub fn trial(&self, k: usize) -> Result<&TrialDeviation> {
        self.trials.iter().find(|t| t.trial == k).ok_or(Error::UnknownIndex(k))
    }
}

#[derive(Clone, Copy, Default)]
struct BinAcc {
    units: usize,
    treated: usize,
    y_treated: f64,
    y_control: f64,
    effect: f64,
}

/// Simulates `n` observational units and compares, bin by bin, the naive
/// arm difference with `omega_k` and the mean potential-outcome difference
/// with `tau_k`. Both references are exact bin averages of the closed forms.
///
/// Units come in pairs sharing `x` with `U = 1` and `U = 0`, and pair
/// covariates are stratified over the observational range; the marginal laws
/// of `x` and `U` are unchanged. Each unit gets both potential outcomes with
/// independent noise, and its observed outcome is the one selected by its
/// drawn treatment.
pub fn brute_force_check(
    spec: &ScenarioSpec,
    n: usize,
    seed: &SeedSpec,
    opts: &BruteForceOptions,
) -> Result<BruteForceReport> {
    spec.validate()?;
    opts.centers.validate()?;
    if n < MIN_BRUTE_FORCE_N {
        return Err(Error::Precondition(alloc::format!(
            "brute-force check needs n >= {MIN_BRUTE_FORCE_N}, got {n}"
        )));
    }
    if opts.bin_width.is_nan() || opts.bin_width <= 0.0 {
        return Err(Error::Invalid("bin width must be positive".into()));
    }
    let centers = opts.centers.points();
    let half = 0.5 * opts.bin_width;
    let bins: Vec<Interval> = centers.iter().map(|&c| Interval::new(c - half, c + half)).collect();
    let bin_of = |x: f64| bins.iter().position(|b| b.lo <= x && x < b.hi);

    let k_trials = spec.k_trials;
    let mut acc = alloc::vec![alloc::vec![BinAcc::default(); bins.len()]; k_trials];
    let mut rng = seed.rng();
    let pairs = n / 2;
    let range = spec.obs_x_range;
    let noise = |rng: &mut rand_chacha::ChaCha8Rng| {
        let z: f64 = StandardNormal.sample(rng);
        spec.noise_sd * z
    };

    for j in 0..pairs {
        let x = range.lo + range.width() * (j as f64 + rng.random::<f64>()) / pairs as f64;
        let Some(b) = bin_of(x) else {
            // consume the same draws either way so streams stay aligned
            for _ in 0..2 * k_trials {
                let _ = rng.random::<f64>();
                let _: f64 = StandardNormal.sample(&mut rng);
                let _: f64 = StandardNormal.sample(&mut rng);
            }
            continue;
        };
        for u in [true, false] {
            for k in 1..=k_trials {
                let y1 = outcome_mean(spec, k, x, true, u)? + noise(&mut rng);
                let y0 = outcome_mean(spec, k, x, false, u)? + noise(&mut rng);
                let t = rng.random::<f64>() < spec.treat_probs[k - 1].given(u);
                let a = &mut acc[k - 1][b];
                a.units += 1;
                a.effect += y1 - y0;
                if t {
                    a.treated += 1;
                    a.y_treated += y1;
                } else {
                    a.y_control += y0;
                }
            }
        }
    }

    let mut trials = Vec::with_capacity(k_trials);
    for k in 1..=k_trials {
        let omega = omega_poly(spec, k)?;
        let tau = tau_poly(spec, k)?;
        let mut estimates = Vec::with_capacity(bins.len());
        for (i, bin) in bins.iter().enumerate() {
            let a = acc[k - 1][i];
            let control = a.units - a.treated;
            if a.treated == 0 || control == 0 {
                return Err(Error::NumericalFailure(alloc::format!(
                    "bin centred at {} has an empty arm",
                    centers[i]
                )));
            }
            estimates.push(BinEstimate {
                center: centers[i],
                units: a.units,
                treated: a.treated,
                omega_hat: a.y_treated / a.treated as f64 - a.y_control / control as f64,
                omega_true: omega.mean_over(bin.lo, bin.hi),
                tau_hat: a.effect / a.units as f64,
                tau_true: tau.mean_over(bin.lo, bin.hi),
            });
        }
        let dev_omega: Vec<f64> = estimates.iter().map(|e| math::abs(e.omega_hat - e.omega_true)).collect();
        let dev_tau: Vec<f64> = estimates.iter().map(|e| math::abs(e.tau_hat - e.tau_true)).collect();
        let rms = |v: &[f64]| math::sqrt(v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64);
        trials.push(TrialDeviation {
            trial: k,
            omega_max_dev: dev_omega.iter().copied().fold(0.0, f64::max),
            tau_max_dev: dev_tau.iter().copied().fold(0.0, f64::max),
            omega_rms_dev: rms(&dev_omega),
            tau_rms_dev: rms(&dev_tau),
            bins: estimates,
        });
    }
    Ok(BruteForceReport {
        shape: spec.shape,
        n: 2 * pairs,
        bin_width: opts.bin_width,
        trials,
    })
}
