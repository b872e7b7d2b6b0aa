//! Seeded synthetic cohorts.
//!
//! The observational cohort shares `(x, u)` across treatments and generates
//! one outcome column per treatment. Trial units are drawn from the same
//! population: `u` is sampled and then discarded.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ObservationalDataset, RctDataset};
use crate::error::Result;
use crate::model::Interval;
use crate::scenario::{ScenarioSpec, CONFOUNDER_PREVALENCE};
use crate::seed::SeedSpec;

/// `E[Y | k]` at `(x, t, u)`.
pub fn outcome_mean(spec: &ScenarioSpec, k: usize, x: f64, t: bool, u: bool) -> Result<f64> {
    Ok(spec.terms(k)?.iter().map(|term| term.eval(x, t, u)).sum())
}

fn uniform(rng: &mut ChaCha8Rng, range: Interval) -> f64 {
    range.lo + range.width() * rng.random::<f64>()
}

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

pub fn gen_observational(spec: &ScenarioSpec, seed: &SeedSpec) -> Result<ObservationalDataset> {
    spec.validate()?;
    let n = spec.obs_size;
    let k_trials = spec.k_trials;
    let mut rng = seed.rng();
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut t: Vec<Vec<bool>> = (0..k_trials).map(|_| Vec::with_capacity(n)).collect();
    let mut y: Vec<Vec<f64>> = (0..k_trials).map(|_| Vec::with_capacity(n)).collect();

    for _ in 0..n {
        let ui = rng.random_bool(CONFOUNDER_PREVALENCE);
        let xi = uniform(&mut rng, spec.obs_x_range);
        for k in 1..=k_trials {
            let tk = rng.random_bool(spec.treat_probs[k - 1].given(ui));
            let yk = outcome_mean(spec, k, xi, tk, ui)? + noise(&mut rng, spec.noise_sd);
            t[k - 1].push(tk);
            y[k - 1].push(yk);
        }
        x.push(xi);
        u.push(ui);
    }
    ObservationalDataset::new(x, t, y, Some(u))
}

pub fn gen_rct(spec: &ScenarioSpec, k: usize, seed: &SeedSpec) -> Result<RctDataset> {
    gen_rct_inner(spec, k, seed, None)
}

/// Like [`gen_rct`] but every unit gets confounder value `u`.
pub fn gen_rct_fixed_u(spec: &ScenarioSpec, k: usize, seed: &SeedSpec, u: bool) -> Result<RctDataset> {
    gen_rct_inner(spec, k, seed, Some(u))
}

fn gen_rct_inner(spec: &ScenarioSpec, k: usize, seed: &SeedSpec, fixed_u: Option<bool>) -> Result<RctDataset> {
    spec.validate()?;
    let n = spec.rct_size(k)?;
    let range = spec.rct_range(k)?;
    let mut rng = seed.rng();
    let mut x = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = uniform(&mut rng, range);
        let ti = rng.random_bool(spec.rct_treat_prob);
        let drawn_u = rng.random_bool(CONFOUNDER_PREVALENCE);
        let ui = fixed_u.unwrap_or(drawn_u);
        let yi = outcome_mean(spec, k, xi, ti, ui)? + noise(&mut rng, spec.noise_sd);
        x.push(xi);
        t.push(ti);
        y.push(yi);
    }
    RctDataset::new(k, range, x, t, y)
}
