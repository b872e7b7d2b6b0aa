//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use deconfound_core::harness::{ExperimentPlan, Method, ScenarioTruth, SummaryTable};
use deconfound_core::linalg::Matrix;
use deconfound_core::mixedfx::{fit_reml, GroupedObservation, MixedModelSpec, RemlOptions, RemlProblem};
use deconfound_core::oracle::{self, BruteForceOptions};
use deconfound_core::regress::{design_matrix, ols_fit};
use deconfound_core::{datagen, Basis, Interval, Region, ScenarioSpec, SeedSpec, Shape};
use deconfound_lab::runner::{self, OutputPaths, Simulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > b {
                out.pass = false;
                out.detail.push_str(&format!("; over budget {b:?}"));
            }
        }
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name} ({:.2}s): {}", took.as_secs_f64(), out.detail);
        if !out.pass {
            self.failed += 1;
        }
    }
}

fn oracle_identity() -> Outcome {
    let expected: [(Shape, [&[f64]; 2]); 2] = [
        (Shape::Linear, [&[2.0, -1.0], &[1.0, -2.0]]),
        (Shape::Quadratic, [&[2.0, -1.0, -0.75], &[1.0, -2.0, -0.75]]),
    ];
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for (shape, etas) in expected {
        let spec = ScenarioSpec::standard(shape);
        for k in 1..=2 {
            let tau = oracle::tau_poly(&spec, k).unwrap();
            let omega = oracle::omega_poly(&spec, k).unwrap();
            let eta = oracle::eta_poly(&spec, k).unwrap();
            for p in 0..4 {
                worst = worst.max((tau.coef(p) - omega.coef(p) - eta.coef(p)).abs());
                let want = etas[k - 1].get(p).copied().unwrap_or(0.0);
                exact &= eta.coef(p) == want;
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && exact,
        format!("max |tau - omega - eta| coefficient {worst:.2e}, eta matches closed forms: {exact}"),
    )
}

fn brute_force() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for shape in Shape::ALL {
        let spec = ScenarioSpec::standard(shape);
        let seed = SeedSpec::new(ExperimentPlan::default().master_seed, shape.as_str(), "brute-force", 0);
        let report = oracle::brute_force_check(&spec, 1_000_000, &seed, &BruteForceOptions::default()).unwrap();
        let t = report.trial(1).unwrap();
        pass &= t.omega_max_dev < 0.1 && t.tau_max_dev < 0.05;
        parts.push(format!(
            "{} omega {:.4} (< 0.1) tau {:.4} (< 0.05)",
            shape.as_str(),
            t.omega_max_dev,
            t.tau_max_dev
        ));
    }
    Outcome::new(pass, parts.join(", "))
}

fn generator_marginals() -> Outcome {
    let mut worst = [0.0f64; 3];
    for shape in Shape::ALL {
        let spec = ScenarioSpec::standard(shape);
        for seed in 0..10 {
            let ds = datagen::gen_observational(&spec, &SeedSpec::new(seed, shape.as_str(), "obs", 0)).unwrap();
            let u = ds.oracle_confounder().unwrap();
            let t1 = ds.treatment(1).unwrap();
            let t2 = ds.treatment(2).unwrap();
            let n = u.len() as f64;
            let n_u1 = u.iter().filter(|&&v| v).count() as f64;
            let t1_u1 = u.iter().zip(t1).filter(|(&a, &b)| a && b).count() as f64;
            let t2_u0 = u.iter().zip(t2).filter(|(&a, &b)| !a && b).count() as f64;
            let dev = [
                (n_u1 / n - 0.5).abs(),
                (t1_u1 / n_u1 - 0.7).abs(),
                (t2_u0 / (n - n_u1) - 0.75).abs(),
            ];
            for (w, d) in worst.iter_mut().zip(dev) {
                *w = w.max(d);
            }
        }
    }
    Outcome::new(
        worst.iter().all(|&d| d < 0.01),
        format!(
            "max deviations P(U=1) {:.4}, P(T1=1|U=1) {:.4}, P(T2=1|U=0) {:.4} (each < 0.01)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn truth(sim: &Simulation, shape: Shape) -> &ScenarioTruth {
    sim.truths.iter().find(|t| t.shape == shape).unwrap()
}

fn median_outside(table: &SummaryTable, shape: Shape, n1: usize, method: Method) -> f64 {
    table
        .region(shape, n1, method, Region::OutsideBoth)
        .and_then(|r| r.median_rmse)
        .unwrap_or(f64::NAN)
}

fn quadratic_ordering(sim: &Simulation) -> Outcome {
    let truth = truth(sim, Shape::Quadratic);
    let left = Interval::new(-3.0, 0.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for n1 in [100, 1000] {
        let h = median_outside(&sim.summary, Shape::Quadratic, n1, Method::Hierarchical);
        let r = median_outside(&sim.summary, Shape::Quadratic, n1, Method::Rct1Only);
        let eh = sim.summary.mean_curve_max_error(truth, n1, Method::Hierarchical, left).unwrap_or(f64::NAN);
        let er = sim.summary.mean_curve_max_error(truth, n1, Method::Rct1Only, left).unwrap_or(f64::NAN);
        pass &= h < r && eh < 0.5 * er;
        parts.push(format!(
            "n1={n1}: median outside RMSE {h:.3} vs {r:.3}, max error on [-3,0] {eh:.3} vs {er:.3} (ratio {:.3} < 0.5)",
            eh / er
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn linear_parity(sim: &Simulation) -> Outcome {
    let truth = truth(sim, Shape::Linear);
    let all = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
    let rmse = |m| {
        sim.summary
            .region(Shape::Linear, 1000, m, Region::OutsideBoth)
            .and_then(|r| r.rmse)
            .unwrap_or(f64::NAN)
    };
    let (h, r) = (rmse(Method::Hierarchical), rmse(Method::Rct1Only));
    let eh = sim.summary.mean_curve_max_error(truth, 1000, Method::Hierarchical, all).unwrap_or(f64::NAN);
    let er = sim.summary.mean_curve_max_error(truth, 1000, Method::Rct1Only, all).unwrap_or(f64::NAN);
    let ratio = h.max(r) / h.min(r);
    Outcome::new(
        ratio <= 2.0 && eh < 1.0 && er < 1.0,
        format!("outside RMSE {h:.3} vs {r:.3} (ratio {ratio:.3} <= 2), mean-curve max error {eh:.3} and {er:.3} (< 1)"),
    )
}

fn monotonicity(sim: &Simulation) -> Outcome {
    let m: Vec<f64> = [100, 1000, 2000]
        .iter()
        .map(|&n1| median_outside(&sim.summary, Shape::Quadratic, n1, Method::Rct1Only))
        .collect();
    Outcome::new(
        m[0] >= m[1] && m[1] >= m[2],
        format!("median outside RMSE {:.3} -> {:.3} -> {:.3}", m[0], m[1], m[2]),
    )
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn grouped(seed: u64, groups: usize, per_group: usize, d_sd: [f64; 2]) -> Vec<GroupedObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(groups * per_group);
    for k in 1..=groups {
        let g0 = d_sd[0] * normal(&mut rng);
        let g1 = d_sd[1] * normal(&mut rng);
        for _ in 0..per_group {
            let x = rng.random::<f64>() * 4.0 - 2.0;
            obs.push(GroupedObservation::new(x, k, 1.0 + g0 + (g1 - 0.5) * x + normal(&mut rng)));
        }
    }
    obs
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn pooled_ols_gap(spec: &MixedModelSpec, obs: &[GroupedObservation], opts: &RemlOptions) -> (f64, bool) {
    let fit = fit_reml(spec, obs, opts).unwrap();
    let xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
    let ys: Vec<f64> = obs.iter().map(|o| o.value).collect();
    let ols = ols_fit(&design_matrix(&xs, &spec.f).unwrap(), &ys).unwrap();
    let gap = fit
        .beta
        .iter()
        .zip(&ols.coefs)
        .map(|(a, b)| (a - b).abs())
        .chain(fit.gamma.iter().flatten().map(|g| g.abs()))
        .fold(0.0, f64::max);
    (gap, fit.vc.is_zero())
}

fn mixed_recovery() -> Outcome {
    let spec = MixedModelSpec {
        f: Basis::polynomial(1),
        g: Basis::polynomial(1),
        groups: 50,
    };
    let (mut d0, mut d1, mut s2) = (vec![], vec![], vec![]);
    for seed in 0..20 {
        let fit = fit_reml(&spec, &grouped(1000 + seed, 50, 100, [1.0, 0.5]), &RemlOptions::default()).unwrap();
        d0.push(fit.vc.d_at(0, 0));
        d1.push(fit.vc.d_at(1, 1));
        s2.push(fit.vc.sigma2);
    }
    let (d0, d1, s2) = (median(d0), median(d1), median(s2));
    let recovered = (d0 - 1.0).abs() < 0.25 && (d1 - 0.25).abs() < 0.25 * 0.25 && (s2 - 1.0).abs() < 0.1;

    // Groups carrying the same draws have exactly zero between-group
    // variation, so REML must land on D = 0 and reproduce pooled OLS.
    let zero_spec = MixedModelSpec {
        f: Basis::polynomial(2),
        g: Basis::polynomial(1),
        groups: 3,
    };
    let one = grouped(77, 1, 200, [0.0, 0.0]);
    let replicated: Vec<_> = (1..=3)
        .flat_map(|k| one.iter().map(move |o| GroupedObservation::new(o.x, k, o.value)))
        .collect();
    let (gap_reml, at_zero) = pooled_ols_gap(&zero_spec, &replicated, &RemlOptions::default());

    let mut noisy_boundary = 0;
    let mut noisy_gap: f64 = 0.0;
    let mut interior_better = true;
    let two = MixedModelSpec { groups: 2, ..zero_spec.clone() };
    for seed in 0..20 {
        let obs = grouped(2000 + seed, 2, 300, [0.0, 0.0]);
        let (gap, zero) = pooled_ols_gap(&two, &obs, &RemlOptions::default());
        if zero {
            noisy_boundary += 1;
            noisy_gap = noisy_gap.max(gap);
        } else {
            let fit = fit_reml(&two, &obs, &RemlOptions::default()).unwrap();
            let dev0 = RemlProblem::new(&two, &obs)
                .unwrap()
                .profiled_deviance_factor(&Matrix::zeros(2, 2))
                .unwrap();
            interior_better &= fit.reml_deviance < dev0;
        }
    }
    let pooled = at_zero && gap_reml < 1e-6 && noisy_gap < 1e-6 && interior_better;
    Outcome::new(
        recovered && pooled,
        format!(
            "median D {d0:.3}, {d1:.3} (1, 0.25 within 25%), sigma2 {s2:.3} (1 within 10%); \
             D=0 replicated groups: boundary {at_zero}, max gap to pooled OLS {gap_reml:.1e}; \
             noisy D=0: {noisy_boundary}/20 on boundary with gap {noisy_gap:.1e}, interior optima beat D=0: {interior_better}"
        ),
    )
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

fn determinism(plan: &ExperimentPlan, reference: &OutputPaths, root: &Path) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for workers in [1, 8] {
        let dir = root.join(format!("w{workers}"));
        std::fs::create_dir_all(&dir).unwrap();
        let sim = runner::simulate(plan, workers).unwrap();
        let paths = runner::write_outputs(&dir, plan, &sim).unwrap();
        let same = same_bytes(&paths.results, &reference.results)
            && same_bytes(&paths.summary, &reference.summary)
            && same_bytes(&paths.diagnostics, &reference.diagnostics);
        pass &= same;
        parts.push(format!("{workers} vs 4 workers identical: {same}"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    report.check("oracle identity", Some(Duration::from_secs(1)), oracle_identity);
    report.check("brute-force oracle agreement", Some(Duration::from_secs(60)), brute_force);
    report.check("generator marginals", None, generator_marginals);

    let plan = ExperimentPlan::default();
    let root = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let sim = runner::simulate(&plan, 4).unwrap();
    let run_time = start.elapsed();
    let dir = root.path().join("w4");
    std::fs::create_dir_all(&dir).unwrap();
    let reference = runner::write_outputs(&dir, &plan, &sim).unwrap();
    println!(
        "default run: {} replications, seed {}, {:.1}s",
        plan.replications,
        plan.master_seed,
        run_time.as_secs_f64()
    );
    let within = run_time < Duration::from_secs(600);
    report.check("quadratic ordering", None, || {
        let mut o = quadratic_ordering(&sim);
        o.pass &= within;
        o
    });
    report.check("linear parity", None, || linear_parity(&sim));
    report.check("sample-size monotonicity", None, || monotonicity(&sim));
    report.check("mixed-model recovery", None, mixed_recovery);
    report.check("determinism across workers", None, || determinism(&plan, &reference, root.path()));

    if report.failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
