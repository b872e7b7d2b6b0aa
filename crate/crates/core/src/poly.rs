//! Dense univariate polynomials with ascending coefficients.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// `coefs[i]` multiplies `x^i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coefs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefs: Vec<f64>) -> Self {
        let mut p = Self { coefs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coefs: Vec::new() }
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    /// Coefficient of `x^power`, zero when absent.
    pub fn coef(&self, power: usize) -> f64 {
        self.coefs.get(power).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coefs.len().checked_sub(1)
    }

    /// Adds `c * x^power` in place.
    pub fn add_term(&mut self, c: f64, power: usize) {
        if self.coefs.len() <= power {
            self.coefs.resize(power + 1, 0.0);
        }
        self.coefs[power] += c;
        self.trim();
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Exact mean of the polynomial over `[lo, hi]`.
    pub fn mean_over(&self, lo: f64, hi: f64) -> f64 {
        let integral = |x: f64| {
            self.coefs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * x + c / (i as f64 + 1.0))
                * x
        };
        (integral(hi) - integral(lo)) / (hi - lo)
    }

    /// Coefficients padded with zeros to `len` entries.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len.max(self.coefs.len())];
        out[..self.coefs.len()].copy_from_slice(&self.coefs);
        out
    }

    fn trim(&mut self) {
        while self.coefs.last() == Some(&0.0) {
            self.coefs.pop();
        }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: Self) -> Polynomial {
        let len = self.coefs.len().max(rhs.coefs.len());
        Polynomial::new((0..len).map(|i| self.coef(i) + rhs.coef(i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: Self) -> Polynomial {
        let len = self.coefs.len().max(rhs.coefs.len());
        Polynomial::new((0..len).map(|i| self.coef(i) - rhs.coef(i)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct_sum() {
        let p = Polynomial::new(vec![2.0, -1.0, -0.75]);
        assert_eq!(p.eval(2.0), 2.0 - 2.0 - 3.0);
        assert_eq!(p.degree(), Some(2));
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = &Polynomial::new(vec![1.0, 2.0, 3.0]) - &Polynomial::new(vec![0.0, 0.0, 3.0]);
        assert_eq!(p.coefs(), &[1.0, 2.0]);
        assert_eq!(p.coef(5), 0.0);
    }

    #[test]
    fn mean_over_interval() {
        // mean of x^2 on [0, 3] is 3
        let p = Polynomial::new(vec![0.0, 0.0, 1.0]);
        assert!((p.mean_over(0.0, 3.0) - 3.0).abs() < 1e-12);
        let c = Polynomial::new(vec![4.0]);
        assert_eq!(c.mean_over(-1.0, 5.0), 4.0);
    }
}
