//! CSV layouts.
//!
//! Datasets: observational `x,[u],t1..tK,y1..yK` and trial `x,t,y`, with
//! binary columns written as `0`/`1`.
//!
//! Harness outputs start with a version line and comment lines carrying the
//! reference curve and support intervals of each scenario:
//!
//! ```text
//! # deconfound-lab v1
//! # oracle,quadratic,tau1,-3,3.5,2.625
//! # support,quadratic,rct1,1.5,2
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values bit for bit. Missing values are `NA`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use deconfound_core::harness::{
    Diagnostics, Method, ReplicationResult, ScenarioTruth, SummaryTable,
};
use deconfound_core::poly::Polynomial;
use deconfound_core::{Interval, ObservationalDataset, RctDataset, Shape, SupportRegion};

use crate::error::{LabError, Result};

pub const VERSION_LINE: &str = "# deconfound-lab v1";
pub const RESULTS_HEADER: [&str; 7] = ["scenario", "n1", "method", "rep", "x", "tau_hat", "eta_hat"];
pub const POINTS_HEADER: [&str; 7] = ["scenario", "n1", "method", "x", "mean", "p2.5", "p97.5"];
pub const REGIONS_HEADER: [&str; 9] = [
    "scenario",
    "n1",
    "method",
    "region",
    "bias",
    "rmse",
    "failures",
    "median_rmse",
    "mean_max_error",
];
pub const DIAGNOSTICS_HEADER: [&str; 7] = ["scenario", "n1", "method", "rep", "converged", "rank", "failure"];
const NA: &str = "NA";

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_f64)
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| LabError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> LabError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => LabError::io(path, e),
        _ => LabError::parse(path, line, e.to_string()),
    }
}

fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| LabError::io(path, e.error()))?;
    inner.flush().map_err(|e| LabError::io(path, e))
}

fn parse_f64(path: &Path, line: u64, column: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| LabError::parse(path, line, format!("column {column}: expected a finite number, got {s:?}")))
}

fn parse_opt_f64(path: &Path, line: u64, column: &str, s: &str) -> Result<Option<f64>> {
    if s.trim() == NA {
        Ok(None)
    } else {
        parse_f64(path, line, column, s).map(Some)
    }
}

fn parse_bin(path: &Path, line: u64, column: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(LabError::parse(path, line, format!("column {column}: expected 0 or 1, got {other:?}"))),
    }
}

fn parse_usize(path: &Path, line: u64, column: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| LabError::parse(path, line, format!("column {column}: expected a count, got {s:?}")))
}

fn parse_with<T: FromStr>(path: &Path, line: u64, column: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| LabError::parse(path, line, format!("column {column}: {e}")))
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub fn write_observational(path: &Path, data: &ObservationalDataset, with_u: bool) -> Result<()> {
    let k = data.k_trials();
    let u = if with_u { data.oracle_confounder() } else { None };
    let mut w = csv_writer(path)?;
    let mut header = vec!["x".to_string()];
    if u.is_some() {
        header.push("u".into());
    }
    header.extend((1..=k).map(|j| format!("t{j}")));
    header.extend((1..=k).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let t: Vec<&[bool]> = (1..=k).map(|j| data.treatment(j)).collect::<std::result::Result<_, _>>()?;
    let y: Vec<&[f64]> = (1..=k).map(|j| data.outcome(j)).collect::<std::result::Result<_, _>>()?;
    let mut row = Vec::with_capacity(header.len());
    for (i, &x) in data.x().iter().enumerate() {
        row.clear();
        row.push(fmt_f64(x));
        if let Some(u) = u {
            row.push(fmt_bool(u[i]).to_string());
        }
        row.extend(t.iter().map(|c| fmt_bool(c[i]).to_string()));
        row.extend(y.iter().map(|c| fmt_f64(c[i])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads `x,[u],t1..tK,y1..yK`; columns may come in any order.
pub fn read_observational(path: &Path) -> Result<ObservationalDataset> {
    let mut r = open_csv(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let xi = col("x").ok_or_else(|| LabError::parse(path, 1, "missing column x"))?;
    let ui = col("u");
    let mut k = 0;
    while col(&format!("t{}", k + 1)).is_some() {
        k += 1;
    }
    if k == 0 {
        return Err(LabError::parse(path, 1, "missing column t1"));
    }
    let mut ti = Vec::with_capacity(k);
    let mut yi = Vec::with_capacity(k);
    for j in 1..=k {
        ti.push(col(&format!("t{j}")).unwrap_or(0));
        yi.push(col(&format!("y{j}")).ok_or_else(|| LabError::parse(path, 1, format!("missing column y{j}")))?);
    }
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let mut x = Vec::new();
    let mut u: Option<Vec<bool>> = ui.map(|_| Vec::new());
    let mut t = vec![Vec::new(); k];
    let mut y = vec![Vec::new(); k];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        x.push(parse_f64(path, line, "x", field(xi))?);
        if let (Some(i), Some(u)) = (ui, u.as_mut()) {
            u.push(parse_bin(path, line, "u", field(i))?);
        }
        for j in 0..k {
            t[j].push(parse_bin(path, line, &names[ti[j]], field(ti[j]))?);
            y[j].push(parse_f64(path, line, &names[yi[j]], field(yi[j]))?);
        }
    }
    if x.is_empty() {
        return Err(LabError::parse(path, 1, "no data rows"));
    }
    Ok(ObservationalDataset::new(x, t, y, u)?)
}

pub fn write_rct(path: &Path, data: &RctDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "t", "y"]).map_err(|e| csv_err(path, e))?;
    for ((&x, &t), &y) in data.x().iter().zip(data.t()).zip(data.y()) {
        w.write_record([fmt_f64(x), fmt_bool(t).to_string(), fmt_f64(y)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads `x,t,y` as trial `trial`; its covariate range is the observed one.
pub fn read_rct(path: &Path, trial: usize) -> Result<RctDataset> {
    let mut r = open_csv(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::parse(path, 1, format!("missing column {name}")))
    };
    let (xi, ti, yi) = (col("x")?, col("t")?, col("y")?);
    let (mut x, mut t, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        x.push(parse_f64(path, line, "x", field(xi))?);
        t.push(parse_bin(path, line, "t", field(ti))?);
        y.push(parse_f64(path, line, "y", field(yi))?);
    }
    if x.is_empty() {
        return Err(LabError::parse(path, 1, "no data rows"));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(LabError::parse(path, 2, "all covariate values are equal"));
    }
    Ok(RctDataset::new(trial, Interval::new(lo, hi), x, t, y)?)
}

fn write_header_block<W: Write>(w: &mut W, truths: &[ScenarioTruth]) -> std::io::Result<()> {
    writeln!(w, "{VERSION_LINE}")?;
    for t in truths {
        let coefs: Vec<String> = t.tau1.coefs().iter().map(|&c| fmt_f64(c)).collect();
        writeln!(w, "# oracle,{},tau1,{}", t.shape, coefs.join(","))?;
        for (name, iv) in [("rct1", t.support.rct1), ("rct2", t.support.rct2), ("target", t.support.target)] {
            writeln!(w, "# support,{},{name},{},{}", t.shape, fmt_f64(iv.lo), fmt_f64(iv.hi))?;
        }
    }
    Ok(())
}

/// Splits a harness file into its header comments and the body that follows.
fn split_header<'a>(path: &Path, text: &'a str) -> Result<(Vec<ScenarioTruth>, &'a str, u64)> {
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().unwrap_or("").trim_end();
    if first != VERSION_LINE {
        return Err(LabError::parse(path, 1, format!("expected {VERSION_LINE:?}, got {first:?}")));
    }
    let mut offset = text.find('\n').map_or(text.len(), |i| i + 1);
    let mut line_no = 1;
    let mut tau: Vec<(Shape, Polynomial)> = Vec::new();
    let mut support: Vec<(Shape, &str, Interval)> = Vec::new();
    for line in lines {
        if !line.starts_with('#') {
            break;
        }
        line_no += 1;
        offset += line.len();
        let fields: Vec<&str> = line[1..].trim().split(',').map(str::trim).collect();
        match fields.as_slice() {
            ["oracle", shape, "tau1", coefs @ ..] => {
                let shape: Shape = parse_with(path, line_no, "scenario", shape)?;
                let coefs = coefs
                    .iter()
                    .map(|c| parse_f64(path, line_no, "oracle", c))
                    .collect::<Result<Vec<_>>>()?;
                tau.push((shape, Polynomial::new(coefs)));
            }
            ["support", shape, name @ ("rct1" | "rct2" | "target"), lo, hi] => {
                let shape: Shape = parse_with(path, line_no, "scenario", shape)?;
                let iv = Interval::new(
                    parse_f64(path, line_no, "support", lo)?,
                    parse_f64(path, line_no, "support", hi)?,
                );
                support.push((shape, name, iv));
            }
            _ => return Err(LabError::parse(path, line_no, "unrecognized header comment")),
        }
    }
    let mut truths = Vec::with_capacity(tau.len());
    for (shape, tau1) in tau {
        let find = |name: &str| {
            support
                .iter()
                .find(|(s, n, _)| *s == shape && *n == name)
                .map(|(_, _, iv)| *iv)
                .ok_or_else(|| LabError::parse(path, line_no, format!("no {name} support for {shape}")))
        };
        truths.push(ScenarioTruth {
            shape,
            tau1,
            support: SupportRegion {
                rct1: find("rct1")?,
                rct2: find("rct2")?,
                target: find("target")?,
            },
        });
    }
    Ok((truths, &text[offset..], line_no))
}

pub fn write_results(path: &Path, results: &[ReplicationResult], truths: &[ScenarioTruth]) -> Result<()> {
    let mut out = create(path)?;
    write_header_block(&mut out, truths).map_err(|e| LabError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in results {
        let (n1, rep) = (r.n1.to_string(), r.rep.to_string());
        for (i, &x) in r.x.iter().enumerate() {
            let tau = r.tau_hat.as_ref().map(|c| c[i]);
            let eta = r.eta_hat.as_ref().map(|c| c[i]);
            w.write_record([
                r.scenario.as_str(),
                &n1,
                r.method.as_str(),
                &rep,
                &fmt_f64(x),
                &fmt_opt(tau),
                &fmt_opt(eta),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Reads a results file; rows sharing `(scenario, n1, method, rep)` must be
/// contiguous. Diagnostics other than failure are not stored in the file.
pub fn read_results(path: &Path) -> Result<(Vec<ReplicationResult>, Vec<ScenarioTruth>)> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let (truths, body, header_lines) = split_header(path, &text)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(LabError::parse(
            path,
            header_lines + 1,
            format!("expected columns {}", RESULTS_HEADER.join(",")),
        ));
    }
    let mut out: Vec<ReplicationResult> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = header_lines + rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or("");
        let scenario: Shape = parse_with(path, line, "scenario", f(0))?;
        let n1 = parse_usize(path, line, "n1", f(1))?;
        let method: Method = parse_with(path, line, "method", f(2))?;
        let rep = parse_usize(path, line, "rep", f(3))?;
        let x = parse_f64(path, line, "x", f(4))?;
        let tau = parse_opt_f64(path, line, "tau_hat", f(5))?;
        let eta = parse_opt_f64(path, line, "eta_hat", f(6))?;
        let key = (scenario, n1, method, rep);
        let same = out.last().is_some_and(|last| last.key() == key);
        if !same {
            if out.iter().any(|o| o.key() == key) {
                return Err(LabError::parse(path, line, "rows of one replication are not contiguous"));
            }
            out.push(ReplicationResult {
                scenario,
                n1,
                method,
                rep,
                x: Vec::new(),
                tau_hat: tau.map(|_| Vec::new()),
                eta_hat: eta.map(|_| Vec::new()),
                diagnostics: Diagnostics::default(),
            });
        }
        let cur = out.last_mut().expect("pushed above");
        if cur.tau_hat.is_some() != tau.is_some() {
            return Err(LabError::parse(path, line, "replication mixes missing and present values"));
        }
        cur.x.push(x);
        if let (Some(c), Some(v)) = (cur.tau_hat.as_mut(), tau) {
            c.push(v);
        }
        if let (Some(c), Some(v)) = (cur.eta_hat.as_mut(), eta) {
            c.push(v);
        }
    }
    for r in &mut out {
        if r.tau_hat.is_none() {
            r.eta_hat = None;
            r.diagnostics.failure = Some("failed".into());
        }
    }
    Ok((out, truths))
}

pub fn write_diagnostics(path: &Path, results: &[ReplicationResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(DIAGNOSTICS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in results {
        let d = &r.diagnostics;
        w.write_record([
            r.scenario.as_str().to_string(),
            r.n1.to_string(),
            r.method.as_str().to_string(),
            r.rep.to_string(),
            d.converged.map_or(NA.into(), |c| fmt_bool(c).to_string()),
            d.rank.map_or(NA.into(), |k| k.to_string()),
            d.failure.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Pointwise block, a blank line, then the regional block.
pub fn write_summary(path: &Path, table: &SummaryTable, truths: &[ScenarioTruth]) -> Result<()> {
    let mut out = create(path)?;
    write_header_block(&mut out, truths).map_err(|e| LabError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(POINTS_HEADER).map_err(|e| csv_err(path, e))?;
    for p in &table.points {
        w.write_record([
            p.scenario.as_str(),
            &p.n1.to_string(),
            p.method.as_str(),
            &fmt_f64(p.x),
            &fmt_f64(p.mean),
            &fmt_f64(p.p025),
            &fmt_f64(p.p975),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    let mut out = w.into_inner().map_err(|e| LabError::io(path, e.error()))?;
    writeln!(out).map_err(|e| LabError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(REGIONS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &table.regions {
        w.write_record([
            r.scenario.as_str(),
            &r.n1.to_string(),
            r.method.as_str(),
            r.region.as_str(),
            &fmt_opt(r.bias),
            &fmt_opt(r.rmse),
            &r.failures.to_string(),
            &fmt_opt(r.median_rmse),
            &fmt_opt(r.mean_curve_max_error),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}
