//! Parallel execution of an experiment plan.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use deconfound_core::harness::{self, ExperimentPlan, ReplicationResult, ScenarioTruth, SummaryTable};
use deconfound_core::Region;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::formats;

/// Runs every work unit on a pool of `workers` threads. The output is sorted
/// canonically, so it does not depend on `workers`.
pub fn run_parallel(plan: &ExperimentPlan, workers: usize) -> Result<Vec<ReplicationResult>> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Validation(format!("cannot start {workers} workers: {e}")))?;
    let units = plan.units();
    let chunks: Vec<_> = pool.install(|| units.par_iter().map(|&u| harness::run_unit(plan, u)).collect());
    let mut all = Vec::with_capacity(units.len() * plan.n1_values.len() * plan.methods.len());
    for chunk in chunks {
        all.extend(chunk?);
    }
    harness::sort_results(&mut all);
    Ok(all)
}

pub struct Simulation {
    pub results: Vec<ReplicationResult>,
    pub truths: Vec<ScenarioTruth>,
    pub summary: SummaryTable,
}

pub fn simulate(plan: &ExperimentPlan, workers: usize) -> Result<Simulation> {
    let results = run_parallel(plan, workers)?;
    let truths = plan.truths()?;
    let summary = harness::summarize(&results, &truths)?;
    Ok(Simulation {
        results,
        truths,
        summary,
    })
}

pub struct OutputPaths {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub diagnostics: PathBuf,
    pub plan: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            results: dir.join("results.csv"),
            summary: dir.join("summary.csv"),
            diagnostics: dir.join("diagnostics.csv"),
            plan: dir.join("plan.json"),
        }
    }
}

pub fn write_outputs(dir: &Path, plan: &ExperimentPlan, sim: &Simulation) -> Result<OutputPaths> {
    let paths = OutputPaths::in_dir(dir);
    formats::write_results(&paths.results, &sim.results, &sim.truths)?;
    formats::write_summary(&paths.summary, &sim.summary, &sim.truths)?;
    formats::write_diagnostics(&paths.diagnostics, &sim.results)?;
    let json = serde_json::to_string_pretty(plan).map_err(|e| LabError::io(&paths.plan, e))?;
    std::fs::write(&paths.plan, json + "\n").map_err(|e| LabError::io(&paths.plan, e))?;
    Ok(paths)
}

/// Regional RMSE per cell, one line each.
pub fn regional_table(table: &SummaryTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:<13} {:>12} {:>12} {:>12} {:>8}",
        "scenario", "n1", "method", "inside_rct1", "rct2_only", "outside", "failed"
    );
    let mut cells: Vec<_> = table.regions.iter().map(|r| (r.scenario, r.n1, r.method)).collect();
    cells.dedup();
    for (shape, n1, method) in cells {
        let rmse = |region| {
            table
                .region(shape, n1, method, region)
                .and_then(|r| r.rmse)
                .map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
        };
        let failures = table
            .region(shape, n1, method, Region::OutsideBoth)
            .map_or(0, |r| r.failures);
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:<13} {:>12} {:>12} {:>12} {:>8}",
            shape.as_str(),
            n1,
            method.as_str(),
            rmse(Region::InsideRct1),
            rmse(Region::InsideRct2Only),
            rmse(Region::OutsideBoth),
            failures
        );
    }
    s
}
