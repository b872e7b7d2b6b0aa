//! Generative scenario: treatment assignment laws, trial designs and outcome means.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{Interval, SupportRegion};

/// Marginal probability of the hidden confounder.
pub const CONFOUNDER_PREVALENCE: f64 = 0.5;

/// Shape of the true deconfounding functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Linear,
    Quadratic,
}

impl Shape {
    pub const ALL: [Shape; 2] = [Shape::Linear, Shape::Quadratic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Shape::Linear),
            "quadratic" => Ok(Shape::Quadratic),
            _ => Err(Error::Invalid(format!("unknown scenario {s:?}"))),
        }
    }
}

/// One term `coef * x^x_pow * T^t * U^u` of an outcome mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTerm {
    pub coef: f64,
    pub x_pow: u32,
    pub t: bool,
    pub u: bool,
}

impl OutcomeTerm {
    pub const fn new(coef: f64, x_pow: u32, t: bool, u: bool) -> Self {
        Self { coef, x_pow, t, u }
    }

    pub fn eval(&self, x: f64, t: bool, u: bool) -> f64 {
        if (self.t && !t) || (self.u && !u) {
            return 0.0;
        }
        self.coef * math::powi(x, self.x_pow)
    }
}

/// `P(T = 1 | U = 1)` and `P(T = 1 | U = 0)` in the observational cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatProbs {
    pub given_u1: f64,
    pub given_u0: f64,
}

impl TreatProbs {
    pub const fn new(given_u1: f64, given_u0: f64) -> Self {
        Self { given_u1, given_u0 }
    }

    pub fn given(&self, u: bool) -> f64 {
        if u {
            self.given_u1
        } else {
            self.given_u0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub shape: Shape,
    pub k_trials: usize,
    pub obs_size: usize,
    pub rct_sizes: Vec<usize>,
    pub obs_x_range: Interval,
    pub rct_x_ranges: Vec<Interval>,
    pub treat_probs: Vec<TreatProbs>,
    /// Randomization probability inside every trial.
    pub rct_treat_prob: f64,
    /// `outcome_coefs[k - 1]` lists the terms of `E[Y | k]`.
    pub outcome_coefs: Vec<Vec<OutcomeTerm>>,
    pub noise_sd: f64,
}

const fn term(coef: f64, x_pow: u32, t: bool, u: bool) -> OutcomeTerm {
    OutcomeTerm::new(coef, x_pow, t, u)
}

impl ScenarioSpec {
    pub const DEFAULT_OBS_SIZE: usize = 50_000;
    pub const DEFAULT_RCT1_SIZE: usize = 1_000;
    pub const DEFAULT_RCT2_SIZE: usize = 5_000;

    /// The two-treatment design with the given deconfounding shape.
    pub fn standard(shape: Shape) -> Self {
        let mut y1 = vec![
            term(1.0, 0, false, false),
            term(2.0, 1, false, false),
            term(2.0, 0, true, false),
            term(1.0, 1, true, false),
            term(0.75, 2, true, false),
            term(-10.0, 0, true, true),
            term(5.0, 1, true, true),
        ];
        let mut y2 = vec![
            term(2.0, 0, false, false),
            term(1.0, 1, false, false),
            term(1.0, 0, true, false),
            term(1.5, 1, true, false),
            term(1.0, 2, true, false),
            term(4.0, 0, true, true),
            term(-8.0, 1, true, true),
        ];
        if shape == Shape::Quadratic {
            y1.push(term(3.75, 2, true, true));
            y2.push(term(-3.0, 2, true, true));
        }
        Self {
            shape,
            k_trials: 2,
            obs_size: Self::DEFAULT_OBS_SIZE,
            rct_sizes: vec![Self::DEFAULT_RCT1_SIZE, Self::DEFAULT_RCT2_SIZE],
            obs_x_range: Interval::new(-3.0, 3.0),
            rct_x_ranges: vec![Interval::new(1.5, 2.0), Interval::new(0.0, 2.5)],
            treat_probs: vec![TreatProbs::new(0.7, 0.3), TreatProbs::new(0.25, 0.75)],
            rct_treat_prob: 0.5,
            outcome_coefs: vec![y1, y2],
            noise_sd: 1.0,
        }
    }

    pub fn with_rct_size(mut self, k: usize, n: usize) -> Result<Self> {
        self.check_trial(k)?;
        self.rct_sizes[k - 1] = n;
        Ok(self)
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    /// Errors unless `1 <= k <= k_trials`.
    pub fn check_trial(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_trials {
            return Err(Error::UnknownIndex(k));
        }
        Ok(())
    }

    pub fn rct_size(&self, k: usize) -> Result<usize> {
        self.check_trial(k)?;
        Ok(self.rct_sizes[k - 1])
    }

    pub fn rct_range(&self, k: usize) -> Result<Interval> {
        self.check_trial(k)?;
        Ok(self.rct_x_ranges[k - 1])
    }

    pub fn terms(&self, k: usize) -> Result<&[OutcomeTerm]> {
        self.check_trial(k)?;
        Ok(&self.outcome_coefs[k - 1])
    }

    /// Support partition using trials 1 and 2.
    pub fn support(&self) -> Result<SupportRegion> {
        if self.k_trials < 2 {
            return Err(Error::Invalid("support regions need two trials".into()));
        }
        Ok(SupportRegion {
            rct1: self.rct_x_ranges[0],
            rct2: self.rct_x_ranges[1],
            target: self.obs_x_range,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k_trials;
        let invalid = |msg: alloc::string::String| Err(Error::Invalid(msg));
        if k == 0 {
            return invalid("k_trials must be at least 1".into());
        }
        if self.rct_sizes.len() != k
            || self.rct_x_ranges.len() != k
            || self.treat_probs.len() != k
            || self.outcome_coefs.len() != k
        {
            return invalid(format!("per-trial fields must all have length k_trials = {k}"));
        }
        if self.obs_size == 0 || self.rct_sizes.contains(&0) {
            return invalid("all sample sizes must be at least 1".into());
        }
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        let probs_ok = self
            .treat_probs
            .iter()
            .all(|p| prob_ok(p.given_u1) && prob_ok(p.given_u0));
        if !probs_ok || !prob_ok(self.rct_treat_prob) {
            return invalid("probabilities must lie in [0, 1]".into());
        }
        if !(self.rct_treat_prob > 0.0 && self.rct_treat_prob < 1.0) {
            return invalid("trial randomization probability must lie in (0, 1)".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return invalid(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
        }
        if !self.obs_x_range.is_valid() {
            return invalid("observational x range must be a non-degenerate interval".into());
        }
        for (i, r) in self.rct_x_ranges.iter().enumerate() {
            if !r.is_valid() || !self.obs_x_range.contains_interval(r) {
                return invalid(format!(
                    "trial {} x range [{}, {}] must be non-degenerate and inside the observational range",
                    i + 1,
                    r.lo,
                    r.hi
                ));
            }
        }
        let finite_terms = self.outcome_coefs.iter().flatten().all(|t| t.coef.is_finite());
        if !finite_terms {
            return invalid("outcome coefficients must be finite".into());
        }
        Ok(())
    }
}
