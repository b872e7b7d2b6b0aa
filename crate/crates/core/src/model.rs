//! Covariate bases, evaluation grids and trial support regions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Monomial feature map `x -> (x^d for d in degrees)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Basis {
    degrees: Vec<u32>,
}

impl Basis {
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::Invalid("basis needs at least one degree".into()));
        }
        if degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "basis degrees must be strictly increasing, got {degrees:?}"
            )));
        }
        Ok(Self { degrees })
    }

    /// `(1, x, ..., x^max_degree)`.
    pub fn polynomial(max_degree: u32) -> Self {
        Self {
            degrees: (0..=max_degree).collect(),
        }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn expand(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        self.expand_into(x, &mut out)?;
        Ok(out)
    }

    /// Appends the features of `x` to `out`.
    pub fn expand_into(&self, x: f64, out: &mut Vec<f64>) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite("basis input"));
        }
        out.extend(self.degrees.iter().map(|&d| math::powi(x, d)));
        Ok(())
    }

    /// `sum_j coefs[j] * x^degrees[j]`.
    pub fn eval(&self, coefs: &[f64], x: f64) -> f64 {
        self.degrees
            .iter()
            .zip(coefs)
            .map(|(&d, &c)| c * math::powi(x, d))
            .sum()
    }

    /// Sorted, deduplicated union of both degree sets.
    pub fn union(&self, other: &Basis) -> Basis {
        let mut degrees: Vec<u32> = self.degrees.iter().chain(&other.degrees).copied().collect();
        degrees.sort_unstable();
        degrees.dedup();
        Basis { degrees }
    }

    pub fn labels(&self) -> Vec<String> {
        self.degrees.iter().map(|d| format!("x^{d}")).collect()
    }
}

impl TryFrom<Vec<u32>> for Basis {
    type Error = Error;

    fn try_from(degrees: Vec<u32>) -> Result<Self> {
        Basis::new(degrees)
    }
}

impl From<Basis> for Vec<u32> {
    fn from(b: Basis) -> Self {
        b.degrees
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.degrees.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Parses degree lists such as `0,1,2`.
impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let degrees = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Invalid(format!("bad basis degree {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Basis::new(degrees)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

/// Evaluation abscissae `lo, lo + step, ...` up to and including `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self {
            lo: -3.0,
            hi: 3.0,
            step: 0.05,
        }
    }
}

impl EvalGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let grid = Self { lo, hi, step };
        grid.validate()?;
        Ok(grid)
    }

    /// A one-point grid.
    pub fn single(x: f64) -> Self {
        Self {
            lo: x,
            hi: x,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.lo > self.hi {
            return Err(Error::Invalid(format!(
                "grid needs lo <= hi and step > 0, got {}:{}:{}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        // tolerance keeps `hi` when (hi - lo) / step is integral up to rounding
        math::floor((self.hi - self.lo) / self.step + 1e-9) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

impl fmt::Display for EvalGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Parses `lo:hi:step`.
impl FromStr for EvalGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Invalid(format!("grid must look like lo:hi:step, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut vals = [0.0; 3];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p.trim().parse().map_err(|_| bad())?;
        }
        EvalGrid::new(vals[0], vals[1], vals[2])
    }
}

/// Partition cell of the target covariate range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    InsideRct1,
    InsideRct2Only,
    OutsideBoth,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::InsideRct1, Region::InsideRct2Only, Region::OutsideBoth];

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::InsideRct1 => "inside_rct1",
            Region::InsideRct2Only => "inside_rct2_only",
            Region::OutsideBoth => "outside_both",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown region {s:?}")))
    }
}

/// Trial supports inside the target population range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRegion {
    pub rct1: Interval,
    pub rct2: Interval,
    pub target: Interval,
}

impl Default for SupportRegion {
    fn default() -> Self {
        Self {
            rct1: Interval::new(1.5, 2.0),
            rct2: Interval::new(0.0, 2.5),
            target: Interval::new(-3.0, 3.0),
        }
    }
}

impl SupportRegion {
    /// Closed intervals; a point covered by RCT1 is labelled `InsideRct1`
    /// even when RCT2 also covers it.
    pub fn region_of(&self, x: f64) -> Result<Region> {
        if !self.target.contains(x) {
            return Err(Error::OutOfRange {
                value: x,
                lo: self.target.lo,
                hi: self.target.hi,
            });
        }
        Ok(if self.rct1.contains(x) {
            Region::InsideRct1
        } else if self.rct2.contains(x) {
            Region::InsideRct2Only
        } else {
            Region::OutsideBoth
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn expand_monomials() {
        let b = Basis::new(vec![0, 1, 2]).unwrap();
        assert_eq!(b.expand(2.0).unwrap(), vec![1.0, 2.0, 4.0]);
        assert_eq!(b.expand(0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        let lin = Basis::new(vec![0, 1]).unwrap();
        assert_eq!(lin.expand(-3.0).unwrap(), vec![1.0, -3.0]);
    }

    #[test]
    fn expand_rejects_non_finite() {
        let b = Basis::polynomial(1);
        assert_eq!(b.expand(f64::NAN), Err(Error::NonFinite("basis input")));
        assert!(b.expand(f64::INFINITY).is_err());
    }

    #[test]
    fn basis_validation() {
        assert!(Basis::new(vec![]).is_err());
        assert!(Basis::new(vec![1, 1]).is_err());
        assert!(Basis::new(vec![2, 1]).is_err());
        assert_eq!("0, 1,2".parse::<Basis>().unwrap(), Basis::polynomial(2));
        assert!("0,a".parse::<Basis>().is_err());
        assert_eq!(Basis::polynomial(2).to_string(), "0,1,2");
    }

    #[test]
    fn union_merges_and_dedups() {
        let f = Basis::polynomial(2);
        let g = Basis::polynomial(1);
        assert_eq!(f.union(&g), f);
        let odd = Basis::new(vec![1, 3]).unwrap();
        assert_eq!(g.union(&odd).degrees(), &[0, 1, 3]);
    }

    #[test]
    fn default_grid_has_121_points() {
        let g = EvalGrid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 121);
        assert_eq!(pts[0], -3.0);
        assert!((pts[120] - 3.0).abs() < 1e-12);
        assert_eq!(EvalGrid::single(0.5).points(), vec![0.5]);
        assert!(EvalGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(EvalGrid::new(0.0, 1.0, 0.0).is_err());
        assert_eq!("-3:3:0.05".parse::<EvalGrid>().unwrap(), g);
    }

    #[test]
    fn region_examples() {
        let s = SupportRegion::default();
        assert_eq!(s.region_of(1.75).unwrap(), Region::InsideRct1);
        assert_eq!(s.region_of(0.5).unwrap(), Region::InsideRct2Only);
        assert_eq!(s.region_of(-2.0).unwrap(), Region::OutsideBoth);
        assert!(matches!(s.region_of(3.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn region_boundaries_go_innermost() {
        let s = SupportRegion::default();
        assert_eq!(s.region_of(1.5).unwrap(), Region::InsideRct1);
        assert_eq!(s.region_of(2.0).unwrap(), Region::InsideRct1);
        assert_eq!(s.region_of(0.0).unwrap(), Region::InsideRct2Only);
        assert_eq!(s.region_of(2.5).unwrap(), Region::InsideRct2Only);
        assert_eq!(s.region_of(-3.0).unwrap(), Region::OutsideBoth);
        assert_eq!(s.region_of(3.0).unwrap(), Region::OutsideBoth);
    }

    proptest! {
        #[test]
        fn every_target_point_gets_one_region(x in -3.0f64..=3.0) {
            let s = SupportRegion::default();
            let r = s.region_of(x).unwrap();
            let in1 = s.rct1.contains(x);
            let in2 = s.rct2.contains(x);
            let expected = match (in1, in2) {
                (true, _) => Region::InsideRct1,
                (false, true) => Region::InsideRct2Only,
                (false, false) => Region::OutsideBoth,
            };
            prop_assert_eq!(r, expected);
        }

        #[test]
        fn constant_basis_is_one(x in -1e6f64..1e6) {
            prop_assert_eq!(Basis::polynomial(0).expand(x).unwrap(), vec![1.0]);
        }
    }
}
