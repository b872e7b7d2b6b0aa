//! Unit-level datasets.
//!
//! Storage is columnar. The observational cohort carries the hidden
//! confounder only so that oracle checks can use it; estimation code works on
//! [`ArmData`] views, which have no access to it.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Interval;

/// Borrowed `(x, t, y)` columns for one treatment.
#[derive(Debug, Clone, Copy)]
pub struct ArmData<'a> {
    pub x: &'a [f64],
    pub t: &'a [bool],
    pub y: &'a [f64],
}

impl ArmData<'_> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `(control, treated)` row counts.
    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self.t.iter().filter(|&&t| t).count();
        (self.t.len() - treated, treated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset {
    x: Vec<f64>,
    t: Vec<Vec<bool>>,
    y: Vec<Vec<f64>>,
    hidden_u: Option<Vec<bool>>,
}

impl ObservationalDataset {
    /// `t[k - 1]` and `y[k - 1]` hold treatment `k`. `hidden_u` may be absent
    /// (for example when loaded from a file without a `u` column).
    pub fn new(
        x: Vec<f64>,
        t: Vec<Vec<bool>>,
        y: Vec<Vec<f64>>,
        hidden_u: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = x.len();
        if t.is_empty() || t.len() != y.len() {
            return Err(Error::Invalid(format!(
                "need matching treatment and outcome columns, got {} and {}",
                t.len(),
                y.len()
            )));
        }
        let lengths_ok = t.iter().all(|c| c.len() == n)
            && y.iter().all(|c| c.len() == n)
            && hidden_u.as_ref().is_none_or(|u| u.len() == n);
        if !lengths_ok {
            return Err(Error::Invalid("observational columns differ in length".into()));
        }
        if x.iter().chain(y.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observational dataset"));
        }
        Ok(Self { x, t, y, hidden_u })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn k_trials(&self) -> usize {
        self.t.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Treatment `k` indicators, `1 <= k <= K`.
    pub fn treatment(&self, k: usize) -> Result<&[bool]> {
        self.check(k)?;
        Ok(&self.t[k - 1])
    }

    pub fn outcome(&self, k: usize) -> Result<&[f64]> {
        self.check(k)?;
        Ok(&self.y[k - 1])
    }

    /// The `(x, T_k, Y_k)` slice used to estimate the confounded effect.
    pub fn slice(&self, k: usize) -> Result<ArmData<'_>> {
        self.check(k)?;
        Ok(ArmData {
            x: &self.x,
            t: &self.t[k - 1],
            y: &self.y[k - 1],
        })
    }

    /// Hidden confounder values. Only ground-truth checks may read these.
    pub fn oracle_confounder(&self) -> Option<&[bool]> {
        self.hidden_u.as_deref()
    }

    fn check(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.t.len() {
            return Err(Error::UnknownIndex(k));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RctDataset {
    trial: usize,
    x_range: Interval,
    x: Vec<f64>,
    t: Vec<bool>,
    y: Vec<f64>,
}

impl RctDataset {
    pub fn new(trial: usize, x_range: Interval, x: Vec<f64>, t: Vec<bool>, y: Vec<f64>) -> Result<Self> {
        if trial == 0 {
            return Err(Error::UnknownIndex(0));
        }
        if x.len() != t.len() || x.len() != y.len() {
            return Err(Error::Invalid("trial columns differ in length".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trial dataset"));
        }
        if let Some(&bad) = x.iter().find(|&&v| !x_range.contains(v)) {
            return Err(Error::OutOfRange {
                value: bad,
                lo: x_range.lo,
                hi: x_range.hi,
            });
        }
        Ok(Self {
            trial,
            x_range,
            x,
            t,
            y,
        })
    }

    pub fn trial(&self) -> usize {
        self.trial
    }

    pub fn x_range(&self) -> Interval {
        self.x_range
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> &[bool] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn arms(&self) -> ArmData<'_> {
        ArmData {
            x: &self.x,
            t: &self.t,
            y: &self.y,
        }
    }
}
