//! Monte Carlo runner for the RCT1-only versus hierarchical comparison, and
//! the pointwise and regional summaries of its output.
//!
//! A work unit is one `(scenario, replication)` pair. It draws the
//! observational cohort and the second trial once and reuses them for every
//! `n1`, so methods and trial sizes are compared on common random numbers.
//! Every stream is keyed by `(master_seed, scenario, role, replication)`, which
//! makes each unit independent of execution order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen;
use crate::deconfound::{self, EtaModel, PseudoOutcome, PseudoSignal, TRIAL_PROPENSITY};
use crate::error::{Error, Result};
use crate::math;
use crate::mixedfx::RemlOptions;
use crate::model::{Basis, EvalGrid, Interval, Region, SupportRegion};
use crate::oracle;
use crate::poly::Polynomial;
use crate::regress::{self, CateModel};
use crate::scenario::{ScenarioSpec, Shape};
use crate::seed::SeedSpec;

/// Trial whose effect curve is reported.
pub const TARGET_TRIAL: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rct1Only,
    Hierarchical,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Rct1Only, Method::Hierarchical];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rct1Only => "rct1_only",
            Method::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rct1_only" | "single" => Ok(Method::Rct1Only),
            "hierarchical" => Ok(Method::Hierarchical),
            _ => Err(Error::Invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    #[default]
    TransformedOutcome,
    ArmImputation,
}

/// Bases and signal used by the estimators for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Basis of the observational effect regression.
    pub omega_basis: Basis,
    /// Fixed-effect basis of the hierarchical model.
    pub f: Basis,
    /// Random-effect basis of the hierarchical model.
    pub g: Basis,
    /// Basis of the single-trial fit.
    pub single_basis: Basis,
    pub signal: SignalKind,
}

impl EstimatorConfig {
    /// `omega` is always quadratic. The `eta` bases follow the degree of the
    /// scenario: `(1, x)` throughout for linear; `f = (1, x, x^2)` and
    /// `g = (1, x)` for quadratic. The single-trial basis is `f` union `g`.
    pub fn for_shape(shape: Shape) -> Self {
        EstimatorOverrides::default().resolve(shape)
    }

    fn pseudo_signal(&self) -> PseudoSignal {
        match self.signal {
            SignalKind::TransformedOutcome => PseudoSignal::TransformedOutcome {
                propensity: TRIAL_PROPENSITY,
            },
            SignalKind::ArmImputation => PseudoSignal::ArmImputation {
                basis: self.omega_basis.clone(),
            },
        }
    }
}

/// Plan-level estimator settings; unset bases take the per-shape defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOverrides {
    pub omega_basis: Option<Basis>,
    pub f: Option<Basis>,
    pub g: Option<Basis>,
    pub single_basis: Option<Basis>,
    pub signal: SignalKind,
}

impl EstimatorOverrides {
    pub fn resolve(&self, shape: Shape) -> EstimatorConfig {
        let (f0, g0) = match shape {
            Shape::Linear => (Basis::polynomial(1), Basis::polynomial(1)),
            Shape::Quadratic => (Basis::polynomial(2), Basis::polynomial(1)),
        };
        let f = self.f.clone().unwrap_or(f0);
        let g = self.g.clone().unwrap_or(g0);
        EstimatorConfig {
            omega_basis: self.omega_basis.clone().unwrap_or_else(|| Basis::polynomial(2)),
            single_basis: self.single_basis.clone().unwrap_or_else(|| f.union(&g)),
            f,
            g,
            signal: self.signal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioSpec>,
    pub n1_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub grid: EvalGrid,
    pub master_seed: u64,
    pub estimator: EstimatorOverrides,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenarios: Shape::ALL.iter().map(|&s| ScenarioSpec::standard(s)).collect(),
            n1_values: alloc::vec![100, 1000, 2000],
            methods: Method::ALL.to_vec(),
            replications: 200,
            grid: EvalGrid::default(),
            master_seed: 20240101,
            estimator: EstimatorOverrides::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods selected".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Invalid("no scenarios selected".into()));
        }
        if self.n1_values.is_empty() || self.n1_values.contains(&0) {
            return Err(Error::Invalid("n1 values must be non-empty and positive".into()));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate()?;
            if s.k_trials < 2 && self.methods.contains(&Method::Hierarchical) {
                return Err(Error::Invalid("hierarchical method needs at least 2 trials".into()));
            }
            if self.scenarios[..i].iter().any(|o| o.shape == s.shape) {
                return Err(Error::Invalid(format!("scenario {} listed twice", s.shape)));
            }
        }
        self.grid.validate()
    }

    /// All work units in canonical order.
    pub fn units(&self) -> Vec<WorkUnit> {
        let mut units = Vec::with_capacity(self.scenarios.len() * self.replications);
        for scenario in 0..self.scenarios.len() {
            for rep in 0..self.replications {
                units.push(WorkUnit { scenario, rep });
            }
        }
        units
    }

    /// Closed-form target curve and support regions for each scenario.
    pub fn truths(&self) -> Result<Vec<ScenarioTruth>> {
        self.scenarios.iter().map(ScenarioTruth::new).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkUnit {
    /// Index into `ExperimentPlan::scenarios`.
    pub scenario: usize,
    pub rep: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: Option<bool>,
    pub rank: Option<usize>,
    pub failure: Option<String>,
}

/// One method's curves for one `(scenario, n1, replication)`. Curves are
/// `None` exactly when `diagnostics.failure` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub scenario: Shape,
    pub n1: usize,
    pub method: Method,
    pub rep: usize,
    pub x: Vec<f64>,
    pub tau_hat: Option<Vec<f64>>,
    pub eta_hat: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl ReplicationResult {
    fn failed(scenario: Shape, n1: usize, method: Method, rep: usize, x: Vec<f64>, err: &Error) -> Self {
        Self {
            scenario,
            n1,
            method,
            rep,
            x,
            tau_hat: None,
            eta_hat: None,
            diagnostics: Diagnostics {
                failure: Some(err.to_string()),
                ..Diagnostics::default()
            },
        }
    }

    pub fn is_failure(&self) -> bool {
        self.tau_hat.is_none()
    }

    /// Canonical ordering key.
    pub fn key(&self) -> (Shape, usize, Method, usize) {
        (self.scenario, self.n1, self.method, self.rep)
    }
}

/// Stream of the observational cohort for one replication; trials derive
/// their streams from it through [`trial_role`].
pub fn unit_seed(master_seed: u64, shape: Shape, rep: usize) -> SeedSpec {
    SeedSpec::new(master_seed, shape.as_str(), "obs", rep as u64)
}

/// Stream label of trial `k`; the target trial is keyed by its size too.
pub fn trial_role(k: usize, n1: usize) -> String {
    if k == TARGET_TRIAL {
        format!("rct{k}-n{n1}")
    } else {
        format!("rct{k}")
    }
}

fn curves(
    omega: &CateModel,
    eta: &EtaModel,
    grid: &EvalGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pts = deconfound::debias_cate(omega, eta, TARGET_TRIAL, grid)?;
    if pts.iter().any(|p| !p.tau_hat.is_finite()) {
        return Err(Error::NonFinite("tau_hat"));
    }
    Ok((pts.iter().map(|p| p.tau_hat).collect(), pts.iter().map(|p| p.eta_hat).collect()))
}

fn fit_one(
    method: Method,
    est: &EstimatorConfig,
    pseudo1: &[PseudoOutcome],
    others: &[PseudoOutcome],
) -> Result<EtaModel> {
    match method {
        Method::Rct1Only => deconfound::fit_eta_single(pseudo1, &est.single_basis),
        Method::Hierarchical => {
            let mut all = Vec::with_capacity(pseudo1.len() + others.len());
            all.extend_from_slice(pseudo1);
            all.extend_from_slice(others);
            deconfound::fit_eta_hierarchical(&all, &est.f, &est.g, &RemlOptions::default())
        }
    }
}

/// Runs one `(scenario, replication)` unit and returns its results in
/// canonical `(n1, method)` order, using the plan's order of `n1_values` and
/// `methods`.
pub fn run_unit(plan: &ExperimentPlan, unit: WorkUnit) -> Result<Vec<ReplicationResult>> {
    let spec = plan.scenarios.get(unit.scenario).ok_or(Error::UnknownIndex(unit.scenario))?;
    let shape = spec.shape;
    let est = &plan.estimator.resolve(shape);
    let signal = est.pseudo_signal();
    let xs = plan.grid.points();
    let base = unit_seed(plan.master_seed, shape, unit.rep);
    let mut out = Vec::with_capacity(plan.n1_values.len() * plan.methods.len());

    let fail_all = |out: &mut Vec<ReplicationResult>, err: &Error| {
        for &n1 in &plan.n1_values {
            for &m in &plan.methods {
                out.push(ReplicationResult::failed(shape, n1, m, unit.rep, xs.clone(), err));
            }
        }
    };

    let obs = datagen::gen_observational(spec, &base)?;
    let omega1 = match regress::fit_cate_regression(obs.slice(TARGET_TRIAL)?, &est.omega_basis, Some(TARGET_TRIAL)) {
        Ok(m) => m,
        Err(e) => {
            fail_all(&mut out, &e);
            return Ok(out);
        }
    };

    // other trials only matter to the hierarchical method
    let mut others: Result<Vec<PseudoOutcome>> = Ok(Vec::new());
    if plan.methods.contains(&Method::Hierarchical) {
        others = (2..=spec.k_trials)
            .map(|k| {
                let omega = regress::fit_cate_regression(obs.slice(k)?, &est.omega_basis, Some(k))?;
                let rct = datagen::gen_rct(spec, k, &base.with_role(trial_role(k, 0)))?;
                deconfound::pseudo_outcomes(&rct, &omega, &signal)
            })
            .collect::<Result<Vec<Vec<_>>>>()
            .map(|v| v.concat());
    }
    drop(obs);

    for &n1 in &plan.n1_values {
        let spec1 = spec.clone().with_rct_size(TARGET_TRIAL, n1)?;
        let rct1 = datagen::gen_rct(&spec1, TARGET_TRIAL, &base.with_role(trial_role(TARGET_TRIAL, n1)))?;
        let pseudo1 = deconfound::pseudo_outcomes(&rct1, &omega1, &signal);
        for &method in &plan.methods {
            let fitted = pseudo1.as_ref().map_err(Clone::clone).and_then(|p1| {
                let others = match (&others, method) {
                    (_, Method::Rct1Only) => &[][..],
                    (Ok(o), Method::Hierarchical) => &o[..],
                    (Err(e), Method::Hierarchical) => return Err(e.clone()),
                };
                let eta = fit_one(method, est, p1, others)?;
                let (tau, eta_curve) = curves(&omega1, &eta, &plan.grid)?;
                Ok((eta, tau, eta_curve))
            });
            out.push(match fitted {
                Ok((eta, tau, eta_curve)) => ReplicationResult {
                    scenario: shape,
                    n1,
                    method,
                    rep: unit.rep,
                    x: xs.clone(),
                    tau_hat: Some(tau),
                    eta_hat: Some(eta_curve),
                    diagnostics: Diagnostics {
                        converged: Some(eta.converged()),
                        rank: Some(eta.rank()),
                        failure: None,
                    },
                },
                Err(e) => ReplicationResult::failed(shape, n1, method, unit.rep, xs.clone(), &e),
            });
        }
    }
    Ok(out)
}

/// Sorts results into canonical `(scenario, n1, method, rep)` order.
pub fn sort_results(results: &mut [ReplicationResult]) {
    results.sort_by_key(|r| r.key());
}

/// Serial reference runner.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<ReplicationResult>> {
    plan.validate()?;
    let mut all = Vec::new();
    for unit in plan.units() {
        all.extend(run_unit(plan, unit)?);
    }
    sort_results(&mut all);
    Ok(all)
}

/// What the summaries are measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub shape: Shape,
    pub tau1: Polynomial,
    pub support: SupportRegion,
}

impl ScenarioTruth {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        Ok(Self {
            shape: spec.shape,
            tau1: oracle::tau_poly(spec, TARGET_TRIAL)?,
            support: spec.support()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub scenario: Shape,
    pub n1: usize,
    pub method: Method,
    pub x: f64,
    pub mean: f64,
    pub p025: f64,
    pub p975: f64,
}

/// Metrics are `None` when every replication of the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub scenario: Shape,
    pub n1: usize,
    pub method: Method,
    pub region: Region,
    /// Mean over region points of `mean curve - tau`.
    pub bias: Option<f64>,
    /// Root mean square error over successful replications and region points.
    pub rmse: Option<f64>,
    /// Median over replications of the per-replication RMSE on the region.
    pub median_rmse: Option<f64>,
    /// Largest `|mean curve - tau|` on the region.
    pub mean_curve_max_error: Option<f64>,
    pub failures: usize,
    pub replications: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub points: Vec<PointSummary>,
    pub regions: Vec<RegionSummary>,
}

impl SummaryTable {
    pub fn region(&self, scenario: Shape, n1: usize, method: Method, region: Region) -> Option<&RegionSummary> {
        self.regions
            .iter()
            .find(|r| r.scenario == scenario && r.n1 == n1 && r.method == method && r.region == region)
    }

    pub fn cell_points(&self, scenario: Shape, n1: usize, method: Method) -> impl Iterator<Item = &PointSummary> {
        self.points
            .iter()
            .filter(move |p| p.scenario == scenario && p.n1 == n1 && p.method == method)
    }

    /// Largest `|mean curve - tau|` over grid points inside `on`.
    pub fn mean_curve_max_error(
        &self,
        truth: &ScenarioTruth,
        n1: usize,
        method: Method,
        on: Interval,
    ) -> Option<f64> {
        let errs: Vec<f64> = self
            .cell_points(truth.shape, n1, method)
            .filter(|p| on.contains(p.x))
            .map(|p| math::abs(p.mean - truth.tau1.eval(p.x)))
            .collect();
        if errs.is_empty() {
            None
        } else {
            Some(errs.into_iter().fold(0.0, f64::max))
        }
    }
}

/// Type-7 quantile (linear interpolation between order statistics) of
/// sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Pointwise and regional summaries per `(scenario, n1, method)` cell.
/// Cells appear in order of first occurrence in `results`; replications
/// within a cell are used in the order given.
pub fn summarize(results: &[ReplicationResult], truths: &[ScenarioTruth]) -> Result<SummaryTable> {
    let mut cells: Vec<(Shape, usize, Method)> = Vec::new();
    for r in results {
        let key = (r.scenario, r.n1, r.method);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    let mut table = SummaryTable::default();
    for (shape, n1, method) in cells {
        let truth = truths
            .iter()
            .find(|t| t.shape == shape)
            .ok_or_else(|| Error::Invalid(format!("no reference curve for scenario {shape}")))?;
        let members: Vec<&ReplicationResult> = results
            .iter()
            .filter(|r| r.scenario == shape && r.n1 == n1 && r.method == method)
            .collect();
        let xs = &members[0].x;
        if members.iter().any(|r| r.x != *xs) {
            return Err(Error::Invalid(format!("{shape}/{n1}/{method}: grids differ between replications")));
        }
        let ok: Vec<&[f64]> = members.iter().filter_map(|r| r.tau_hat.as_deref()).collect();
        if ok.iter().any(|c| c.len() != xs.len()) {
            return Err(Error::Invalid(format!("{shape}/{n1}/{method}: curve length differs from grid")));
        }
        let failures = members.len() - ok.len();
        let tau: Vec<f64> = xs.iter().map(|&x| truth.tau1.eval(x)).collect();

        let mut means = Vec::with_capacity(xs.len());
        if !ok.is_empty() {
            let mut col = Vec::with_capacity(ok.len());
            for (i, &x) in xs.iter().enumerate() {
                col.clear();
                col.extend(ok.iter().map(|c| c[i]));
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                means.push(mean);
                col.sort_by(f64::total_cmp);
                table.points.push(PointSummary {
                    scenario: shape,
                    n1,
                    method,
                    x,
                    mean,
                    p025: quantile_sorted(&col, 0.025),
                    p975: quantile_sorted(&col, 0.975),
                });
            }
        }

        for region in Region::ALL {
            let idx: Vec<usize> = (0..xs.len())
                .filter(|&i| truth.support.region_of(xs[i]).ok() == Some(region))
                .collect();
            let mut summary = RegionSummary {
                scenario: shape,
                n1,
                method,
                region,
                bias: None,
                rmse: None,
                median_rmse: None,
                mean_curve_max_error: None,
                failures,
                replications: members.len(),
            };
            if !ok.is_empty() && !idx.is_empty() {
                let m = idx.len() as f64;
                summary.bias = Some(idx.iter().map(|&i| means[i] - tau[i]).sum::<f64>() / m);
                summary.mean_curve_max_error =
                    Some(idx.iter().map(|&i| math::abs(means[i] - tau[i])).fold(0.0, f64::max));
                let per_rep: Vec<f64> = ok
                    .iter()
                    .map(|c| idx.iter().map(|&i| (c[i] - tau[i]) * (c[i] - tau[i])).sum::<f64>() / m)
                    .collect();
                summary.rmse = Some(math::sqrt(per_rep.iter().sum::<f64>() / per_rep.len() as f64));
                summary.median_rmse = Some(median(per_rep.iter().map(|v| math::sqrt(*v)).collect()));
            }
            table.regions.push(summary);
        }
    }
    Ok(table)
}
