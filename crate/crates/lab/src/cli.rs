//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use deconfound_core::deconfound::{self, EtaModel, PseudoOutcome};
use deconfound_core::harness::{self, EstimatorOverrides, ExperimentPlan, TARGET_TRIAL};
use deconfound_core::mixedfx::RemlOptions;
use deconfound_core::oracle::{self, BruteForceOptions, OracleCurves};
use deconfound_core::regress::{self, CateModel};
use deconfound_core::{datagen, Basis, EvalGrid, ScenarioSpec, SeedSpec};
use serde_json::{json, Map, Value};

use crate::config::{ModeChoice, ScenarioChoice, SignalChoice, SimulateConfig};
use crate::error::{LabError, Result};
use crate::{formats, runner};

pub const SEED_ENV: &str = "DECONFOUND_SEED";

#[derive(Debug, Parser)]
#[command(name = "deconfound-lab", version, about = "Debias observational treatment effects with randomized trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo study and write results.csv and summary.csv.
    Simulate(SimulateArgs),
    /// Fit the deconfounding function on CSV datasets.
    Fit(FitArgs),
    /// Print closed-form curves, optionally with a brute-force check.
    Oracle(OracleArgs),
    /// Recompute summary.csv from results.csv.
    Summarize(SummarizeArgs),
}

fn parse_basis(s: &str) -> std::result::Result<Basis, String> {
    s.parse().map_err(|e: deconfound_core::Error| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<String, String> {
    s.parse::<EvalGrid>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioChoice>,
    /// Comma-separated sizes of the first trial.
    #[arg(long, value_delimiter = ',')]
    pub n1: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Evaluation grid as lo:hi:step.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    /// Fixed-effect degrees, e.g. 0,1,2.
    #[arg(long, value_parser = parse_basis)]
    pub f_basis: Option<Basis>,
    /// Random-effect degrees.
    #[arg(long, value_parser = parse_basis)]
    pub g_basis: Option<Basis>,
    /// Degrees of the single-trial fit.
    #[arg(long, value_parser = parse_basis)]
    pub single_basis: Option<Basis>,
    /// Degrees of the observational effect regression.
    #[arg(long, value_parser = parse_basis)]
    pub omega_basis: Option<Basis>,
    #[arg(long, value_enum)]
    pub signal: Option<SignalChoice>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the datasets of replication 0 under <out>/dump.
    #[arg(long)]
    pub dump: bool,
}

impl SimulateArgs {
    fn flags(&self) -> SimulateConfig {
        SimulateConfig {
            scenario: self.scenario,
            n1: self.n1.clone(),
            reps: self.reps,
            seed: self.seed,
            workers: self.workers,
            grid: self.grid.clone(),
            mode: self.mode,
            f_basis: self.f_basis.clone(),
            g_basis: self.g_basis.clone(),
            single_basis: self.single_basis.clone(),
            omega_basis: self.omega_basis.clone(),
            signal: self.signal,
            obs_size: None,
            rct2_size: None,
            noise_sd: self.noise_sd,
            out: self.out.clone(),
        }
    }

    pub fn resolve(&self) -> Result<SimulateConfig> {
        let base = match &self.config {
            Some(p) => SimulateConfig::load(p)?,
            None => SimulateConfig::default(),
        };
        Ok(base.overlay(self.flags()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitMode {
    Single,
    Hierarchical,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Observational CSV: x,[u],t1..tK,y1..yK.
    #[arg(long)]
    pub obs: PathBuf,
    /// Trial CSVs (x,t,y), for treatments 1, 2, ... in order.
    #[arg(long, required = true)]
    pub rct: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "hierarchical")]
    pub mode: FitMode,
    /// Treatment whose debiased curve is written.
    #[arg(long, default_value_t = 1)]
    pub trial: usize,
    #[arg(long, value_parser = parse_basis)]
    pub f_basis: Option<Basis>,
    #[arg(long, value_parser = parse_basis)]
    pub g_basis: Option<Basis>,
    #[arg(long, value_parser = parse_basis)]
    pub single_basis: Option<Basis>,
    #[arg(long, value_parser = parse_basis)]
    pub omega_basis: Option<Basis>,
    #[arg(long, value_enum, default_value = "transformed")]
    pub signal: SignalChoice,
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true, default_value = "-3:3:0.05")]
    pub grid: String,
    #[arg(long, default_value = "deconfound-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub scenario: ScenarioChoice,
    /// Also simulate and compare binned estimates with the closed forms.
    #[arg(long)]
    pub brute_force: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub results: PathBuf,
    /// Output file; defaults to summary.csv next to the results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Oracle(a) => oracle_cmd(&a),
        Command::Summarize(a) => summarize(&a),
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let plan = cfg.to_plan()?;
    let out = cfg.out_dir();
    let sim = runner::simulate(&plan, cfg.workers())?;
    let paths = runner::write_outputs(&out, &plan, &sim)?;
    if args.dump {
        dump_datasets(&plan, &out.join("dump"))?;
    }
    print!("{}", runner::regional_table(&sim.summary));
    println!("wrote {} and {}", paths.results.display(), paths.summary.display());
    Ok(())
}

/// Datasets of replication 0, drawn from the same streams the run used.
fn dump_datasets(plan: &ExperimentPlan, dir: &Path) -> Result<()> {
    for spec in &plan.scenarios {
        let shape = spec.shape;
        let seed = harness::unit_seed(plan.master_seed, shape, 0);
        let obs = datagen::gen_observational(spec, &seed)?;
        formats::write_observational(&dir.join(format!("obs_{}.csv", shape.as_str())), &obs, true)?;
        for k in 2..=spec.k_trials {
            let rct = datagen::gen_rct(spec, k, &seed.with_role(harness::trial_role(k, 0)))?;
            formats::write_rct(&dir.join(format!("rct{k}_{}.csv", shape.as_str())), &rct)?;
        }
        for &n1 in &plan.n1_values {
            let spec1 = spec.clone().with_rct_size(TARGET_TRIAL, n1)?;
            let rct = datagen::gen_rct(&spec1, TARGET_TRIAL, &seed.with_role(harness::trial_role(TARGET_TRIAL, n1)))?;
            formats::write_rct(&dir.join(format!("rct1_{}_n{n1}.csv", shape.as_str())), &rct)?;
        }
    }
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    if args.mode == FitMode::Hierarchical && args.rct.len() < 2 {
        return Err(LabError::Validation(
            "hierarchical mode needs at least two trial files".into(),
        ));
    }
    if args.trial == 0 || args.trial > args.rct.len() {
        return Err(LabError::Validation(format!(
            "--trial {} has no trial file ({} given)",
            args.trial,
            args.rct.len()
        )));
    }
    let grid: EvalGrid = args.grid.parse()?;
    let obs = formats::read_observational(&args.obs)?;
    if args.rct.len() > obs.k_trials() {
        return Err(LabError::Validation(format!(
            "{} trial files but the observational data has {} treatments",
            args.rct.len(),
            obs.k_trials()
        )));
    }
    let est = EstimatorOverrides {
        omega_basis: args.omega_basis.clone(),
        f: args.f_basis.clone().or_else(|| Some(Basis::polynomial(2))),
        g: args.g_basis.clone().or_else(|| Some(Basis::polynomial(1))),
        single_basis: args.single_basis.clone(),
        signal: args.signal.into(),
    }
    .resolve(deconfound_core::Shape::Quadratic);
    let signal = match est.signal {
        harness::SignalKind::TransformedOutcome => deconfound::PseudoSignal::default(),
        harness::SignalKind::ArmImputation => deconfound::PseudoSignal::ArmImputation {
            basis: est.omega_basis.clone(),
        },
    };

    let used: Vec<usize> = match args.mode {
        FitMode::Single => vec![args.trial],
        FitMode::Hierarchical => (1..=args.rct.len()).collect(),
    };
    let mut omegas: Vec<CateModel> = Vec::with_capacity(used.len());
    let mut pseudo: Vec<PseudoOutcome> = Vec::new();
    for &k in &used {
        let rct = formats::read_rct(&args.rct[k - 1], k)?;
        let omega = regress::fit_cate_regression(obs.slice(k)?, &est.omega_basis, Some(k))?;
        pseudo.extend(deconfound::pseudo_outcomes(&rct, &omega, &signal)?);
        omegas.push(omega);
    }
    let (eta, label): (EtaModel, &str) = match args.mode {
        FitMode::Single => (deconfound::fit_eta_single(&pseudo, &est.single_basis)?, "single"),
        FitMode::Hierarchical => (
            deconfound::fit_eta_hierarchical(&pseudo, &est.f, &est.g, &RemlOptions::default())?,
            "hierarchical",
        ),
    };
    let omega = omegas
        .iter()
        .find(|m| m.trial == Some(args.trial))
        .expect("target trial is among the fitted ones");
    let curve = deconfound::debias_cate(omega, &eta, args.trial, &grid)?;

    std::fs::create_dir_all(&args.out).map_err(|e| LabError::io(&args.out, e))?;
    let model_path = args.out.join(format!("eta_{label}.json"));
    let body = json!({ "eta": eta, "omega": omegas });
    let text = serde_json::to_string_pretty(&body).map_err(|e| LabError::io(&model_path, e))?;
    std::fs::write(&model_path, text + "\n").map_err(|e| LabError::io(&model_path, e))?;

    let curve_path = args.out.join(format!("tau{}_{label}.csv", args.trial));
    let mut w = csv::Writer::from_path(&curve_path).map_err(|e| LabError::io(&curve_path, e))?;
    let io = |e: csv::Error| LabError::io(&curve_path, e);
    w.write_record(["x", "omega_hat", "eta_hat", "tau_hat"]).map_err(io)?;
    for p in &curve {
        w.write_record([
            formats::fmt_f64(p.x),
            formats::fmt_f64(omega.eval(p.x)),
            formats::fmt_f64(p.eta_hat),
            formats::fmt_f64(p.tau_hat),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| LabError::io(&curve_path, e))?;
    println!("wrote {} and {}", model_path.display(), curve_path.display());
    Ok(())
}

/// Closed forms of one scenario as a JSON object with keys `tau1`,
/// `omega1`, `eta1`, ... holding ascending coefficients.
pub fn oracle_json(spec: &ScenarioSpec) -> Result<Value> {
    let curves = OracleCurves::new(spec)?;
    let mut m = Map::new();
    m.insert("scenario".into(), json!(spec.shape));
    for k in 1..=spec.k_trials {
        m.insert(format!("tau{k}"), json!(curves.tau[k - 1]));
        m.insert(format!("omega{k}"), json!(curves.omega[k - 1]));
        m.insert(format!("eta{k}"), json!(curves.eta[k - 1]));
        m.insert(format!("posterior{k}"), json!(curves.posterior[k - 1]));
    }
    Ok(Value::Object(m))
}

fn oracle_cmd(args: &OracleArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(ExperimentPlan::default().master_seed);
    let mut out = Vec::new();
    for shape in args.scenario.shapes() {
        let mut spec = ScenarioSpec::standard(shape);
        if let Some(sd) = args.noise_sd {
            spec = spec.with_noise_sd(sd);
        }
        let mut v = oracle_json(&spec)?;
        if args.brute_force {
            let report = oracle::brute_force_check(
                &spec,
                args.n,
                &SeedSpec::new(seed, shape.as_str(), "brute-force", 0),
                &BruteForceOptions::default(),
            )?;
            v["brute_force"] = json!(report);
        }
        out.push(v);
    }
    let doc = if out.len() == 1 { out.pop().unwrap_or_default() } else { Value::Array(out) };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| LabError::Numerical(e.to_string()))? + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(|e| LabError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| LabError::io("<stdout>", e)),
    }
}

fn summarize(args: &SummarizeArgs) -> Result<()> {
    let (results, truths) = formats::read_results(&args.results)?;
    if results.is_empty() {
        return Err(LabError::parse(&args.results, 1, "no replications"));
    }
    let table = harness::summarize(&results, &truths)?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.results
            .parent()
            .map_or_else(|| PathBuf::from("summary.csv"), |d| d.join("summary.csv"))
    });
    formats::write_summary(&out, &table, &truths)?;
    print!("{}", runner::regional_table(&table));
    println!("wrote {}", out.display());
    Ok(())
}
