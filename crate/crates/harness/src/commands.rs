//! The four subcommands. Each returns the text it would print; `main` prints it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use discor_core::diagnostics::{
    iteration_complexity_sweep, verify_lemma_b1, verify_thm3, BoundTrace, ComplexityOptions, ComplexityRow, RunRecord,
    Thm3Tracker,
};
use discor_core::envs::make_env;
use discor_core::envs::random::random_mdp;
use discor_core::mdp::QTable;
use discor_core::rng::{self, Stream};
use discor_core::trainer::{run, run_on};
use discor_core::weighting::SchemeKind;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::config::{Bound, ExperimentConfig};
use crate::csv::{sanitize, MetricsCsv};
use crate::error::{LabError, LabResult};

pub const CODE_VERSION: &str = concat!("discor-lab ", env!("CARGO_PKG_VERSION"));

/// Manifest text: two comment lines and the canonical config. Passing the file back
/// through `--config` reproduces the run.
pub fn manifest_text(config_text: &str) -> String {
    let digest = hex::encode(Sha256::digest(config_text.as_bytes()));
    format!("# code_version = {CODE_VERSION}\n# config_sha256 = {digest}\n{config_text}")
}

pub fn run_stem(env: &str, scheme: SchemeKind, cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}_{}_{}_seed{seed}", sanitize(env), scheme.id(), cfg.mode.id())
}

fn write(path: &Path, text: &str) -> LabResult<()> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

fn create_dir(path: &Path) -> LabResult<()> {
    std::fs::create_dir_all(path).map_err(|e| LabError::io(path, e))
}

/// Run one configuration and write its CSV and manifest. Returns the CSV path.
pub fn run_one(cfg: &ExperimentConfig, env: &str, scheme: SchemeKind, seed: u64) -> LabResult<(PathBuf, Vec<RunRecord>)> {
    let out = run(&cfg.train_config(env, scheme, seed))?;
    create_dir(&cfg.out)?;
    let stem = run_stem(env, scheme, cfg, seed);
    let mut meta = BTreeMap::new();
    meta.insert("env".to_string(), env.to_string());
    meta.insert("scheme".to_string(), scheme.id().to_string());
    meta.insert("mode".to_string(), cfg.mode.id().to_string());
    meta.insert("approx".to_string(), cfg.approx.name());
    meta.insert("seed".to_string(), seed.to_string());
    meta.insert("iters".to_string(), cfg.iters.to_string());
    meta.insert("gamma".to_string(), format!("{:?}", out.discount));
    meta.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let csv = MetricsCsv { meta, records: out.records };
    let path = cfg.out.join(format!("{stem}.csv"));
    write(&path, &csv.to_text())?;
    write(&cfg.out.join(format!("{stem}.manifest")), &manifest_text(&cfg.run_config_text(env, scheme, seed)))?;
    Ok((path, csv.records))
}

pub fn cmd_run(cfg: &ExperimentConfig) -> LabResult<String> {
    let (path, records) = run_one(cfg, &cfg.env, cfg.scheme, cfg.seed)?;
    let mut text = format!("wrote {} ({} iterations)\n", path.display(), records.len());
    if let Some(last) = records.last() {
        let _ = writeln!(
            text,
            "final: value_error {:.4e}  norm_return {:.4}  return {:.4}",
            last.value_error, last.norm_return, last.eval_return
        );
    }
    Ok(text)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Final-iteration metrics carried into summaries and reports.
const SUMMARY_METRICS: [&str; 4] = ["value_error", "return", "norm_return", "cosine_sim"];

fn summary_values(r: &RunRecord) -> [f64; 4] {
    [r.value_error, r.eval_return, r.norm_return, r.cosine_sim]
}

/// Outcome of a sweep: the summary text and whether every run succeeded.
pub struct SweepOutcome {
    pub report: String,
    pub failures: Vec<String>,
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> LabResult<SweepOutcome> {
    let jobs_list: Vec<(String, SchemeKind, u64)> = cfg
        .envs
        .iter()
        .flat_map(|e| cfg.schemes.iter().flat_map(move |s| cfg.seeds.iter().map(move |seed| (e.clone(), *s, *seed))))
        .collect();
    create_dir(&cfg.out)?;
    let results: Vec<Mutex<Option<LabResult<RunRecord>>>> = jobs_list.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(jobs_list.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some((env, scheme, seed)) = jobs_list.get(i) else { break };
                let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_one(cfg, env, *scheme, *seed)))
                    .unwrap_or_else(|_| Err(LabError::Runtime("run panicked".into())))
                    .and_then(|(_, records)| records.last().cloned().ok_or_else(|| LabError::Runtime("no iterations".into())));
                *results[i].lock().expect("result lock") = Some(outcome);
            });
        }
    });

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header = ["env", "scheme", "seed"].into_iter().chain(SUMMARY_METRICS);
    w.write_record(header).expect("in-memory write");
    let mut cells: BTreeMap<(String, &str), Vec<[f64; 4]>> = BTreeMap::new();
    let mut failures = Vec::new();
    for ((env, scheme, seed), result) in jobs_list.iter().zip(results) {
        match result.into_inner().expect("result lock").expect("every job ran") {
            Ok(last) => {
                let v = summary_values(&last);
                let row = [env.clone(), scheme.id().to_string(), seed.to_string()].into_iter().chain(v.iter().map(|x| format!("{x:.16e}")));
                w.write_record(row).expect("in-memory write");
                cells.entry((env.clone(), scheme.id())).or_default().push(v);
            }
            Err(e) => failures.push(format!("{env} {} seed {seed}: {e}", scheme.id())),
        }
    }
    let mut report = String::new();
    for ((env, scheme), rows) in &cells {
        let med: Vec<f64> = (0..4).map(|j| median(&mut rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
        let row = [env.clone(), scheme.to_string(), "median".to_string()].into_iter().chain(med.iter().map(|x| format!("{x:.16e}")));
        w.write_record(row).expect("in-memory write");
        let _ = writeln!(
            report,
            "{env} {scheme}: median final value_error {:.4e}, norm_return {:.4} over {} seeds",
            med[0],
            med[2],
            rows.len()
        );
    }
    let summary = cfg.out.join("summary.csv");
    write(&summary, std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ascii"))?;
    let _ = writeln!(report, "wrote {} ({} runs, {} failed)", summary.display(), jobs_list.len(), failures.len());
    Ok(SweepOutcome { report, failures })
}

fn pair_name(pair: usize, num_actions: usize) -> String {
    format!("(s={}, a={})", pair / num_actions, pair % num_actions)
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> LabResult<String> {
    match cfg.bound {
        Bound::Lemma => verify_lemma(cfg),
        Bound::Thm3 => verify_thm3_run(cfg),
        Bound::Complexity => verify_complexity(cfg),
    }
}

fn verify_lemma(cfg: &ExperimentConfig) -> LabResult<String> {
    let tol = cfg.tol.unwrap_or(1e-9);
    let mut rng = rng::stream(cfg.seed, Stream::Layout);
    let mut shapes = Vec::with_capacity(cfg.trials);
    let report = verify_lemma_b1(
        &mut |_| {
            let gamma = rng.random_range(0.5..0.99);
            let ns = rng.random_range(2..=10);
            let na = rng.random_range(2..=4);
            let mdp = random_mdp(ns, na, gamma, &mut rng);
            let bound = mdp.r_max() / (1.0 - gamma);
            let mut table = || {
                QTable::from_values(ns, na, (0..ns * na).map(|_| rng.random_range(-bound..=bound)).collect()).expect("shape")
            };
            let (prev, next) = (table(), table());
            shapes.push(na);
            (mdp, prev, next)
        },
        cfg.trials,
        tol,
    )?;
    let mut text = format!(
        "lemma: {} trials, tol {tol:e}, worst slack {:.6e} in trial {} at {}\n",
        report.trials,
        report.worst.value,
        report.worst_trial,
        pair_name(report.worst.pair, shapes.get(report.worst_trial).copied().unwrap_or(1))
    );
    if report.violations.is_empty() {
        text.push_str("no violations\n");
        return Ok(text);
    }
    for t in &report.violations {
        let _ = writeln!(text, "violation in trial {t}");
    }
    Err(LabError::Assertion(format!("{text}{} of {} trials violate the bound", report.violations.len(), report.trials)))
}

fn verify_thm3_run(cfg: &ExperimentConfig) -> LabResult<String> {
    let tol = cfg.tol.unwrap_or(1e-6);
    let train = cfg.train_config(&cfg.env, cfg.scheme, cfg.seed);
    let mut env = make_env(&cfg.env, cfg.seed)?;
    if let Some(g) = cfg.discount {
        env = env.with_discount(g)?;
    }
    let mut qs: Vec<QTable> = Vec::new();
    let out = run_on(&train, &env, &mut |snap| {
        if qs.is_empty() {
            qs.push(snap.q_prev.clone());
        }
        qs.push(snap.q.clone());
        ControlFlow::Continue(())
    })?;
    let mdp = &env.mdp;
    let q_star = &out.oracle.q_star;
    let mut tracker = Thm3Tracker::new(mdp.num_states() * mdp.num_actions());
    let sign = if cfg.corrupt_delta { -1.0 } else { 1.0 };
    let deltas = qs
        .windows(2)
        .map(|w| {
            tracker.step(mdp, &w[0], &w[1], q_star, &out.oracle.pi_star);
            tracker.delta.iter().map(|d| sign * d).collect()
        })
        .collect();
    let trace = BoundTrace { qs, deltas, tabular_delta: true };
    let report = verify_thm3(mdp, q_star, &trace, tol)?;
    let na = mdp.num_actions();
    let mut text = format!("thm3: {} iterations, k0 = {}, tol {tol:e}{}\n", trace.deltas.len(), report.k0, if cfg.corrupt_delta { ", corrupted Δ" } else { "" });
    match report.worst_after_k0() {
        Some((k, s)) => {
            let _ = writeln!(text, "worst slack for k >= k0: {:.6e} at {} k = {k}", s.value, pair_name(s.pair, na));
        }
        None => text.push_str("run ends before k0; nothing to check\n"),
    }
    match report.first_violation {
        None => {
            text.push_str("no violations\n");
            Ok(text)
        }
        Some((k, s)) => {
            let _ = writeln!(text, "first violation at k = {k}: slack {:.6e} at {}", s.value, pair_name(s.pair, na));
            for (k, s) in report.slacks.iter().filter(|(k, s)| *k >= report.k0 && s.value < -tol) {
                let _ = writeln!(text, "violation k = {k}: slack {:.6e} at {}", s.value, pair_name(s.pair, na));
            }
            let _ = write!(text, "{} violating iterations", report.violations);
            Err(LabError::Assertion(text))
        }
    }
}

fn verify_complexity(cfg: &ExperimentConfig) -> LabResult<String> {
    let opts = ComplexityOptions::default();
    let schemes = [SchemeKind::OnPolicy, SchemeKind::DisCor];
    let rows = iteration_complexity_sweep(&cfg.depths, &schemes, &cfg.seeds, &opts)?;
    let problems = complexity_problems(&rows, &cfg.depths, &cfg.seeds);
    let mut text = String::from("depth scheme seed iterations\n");
    for r in &rows {
        let it = r.iterations.map_or_else(|| format!("nc (stopped after {})", r.ran), |k| k.to_string());
        let _ = writeln!(text, "{} {} {} {it}", r.depth, r.scheme.id(), r.seed);
    }
    if problems.is_empty() {
        text.push_str("no violations\n");
        Ok(text)
    } else {
        Err(LabError::Assertion(format!("{text}{}", problems.join("\n"))))
    }
}

/// On-policy grows with depth and exceeds `4H²` at the deepest tree; DisCor stays within
/// `4H²` and never needs more iterations than on-policy.
pub fn complexity_problems(rows: &[ComplexityRow], depths: &[usize], seeds: &[u64]) -> Vec<String> {
    let iters = |h: usize, scheme: SchemeKind, seed: u64| -> f64 {
        rows.iter()
            .find(|r| r.depth == h && r.scheme == scheme && r.seed == seed)
            .and_then(|r| r.iterations)
            .map_or(f64::INFINITY, |k| k as f64)
    };
    let mut problems = Vec::new();
    let Some(&deepest) = depths.iter().max() else { return problems };
    for &seed in seeds {
        let on: Vec<f64> = depths.iter().map(|h| iters(*h, SchemeKind::OnPolicy, seed)).collect();
        if on.windows(2).any(|w| w[1] < w[0]) {
            problems.push(format!("seed {seed}: on-policy iterations not monotone in depth {on:?}"));
        }
        if iters(deepest, SchemeKind::OnPolicy, seed) <= (4 * deepest * deepest) as f64 {
            problems.push(format!("seed {seed}: on-policy converged within 4H² at H = {deepest}"));
        }
        for &h in depths {
            let d = iters(h, SchemeKind::DisCor, seed);
            if d > (4 * h * h) as f64 {
                problems.push(format!("seed {seed}: DisCor needed {d} iterations at H = {h}"));
            }
            if d > iters(h, SchemeKind::OnPolicy, seed) {
                problems.push(format!("seed {seed}: DisCor slower than on-policy at H = {h}"));
            }
        }
    }
    problems
}

/// Final-iteration medians per `(env, scheme)` over the CSVs found under `paths`,
/// with differences against each baseline scheme.
pub fn cmd_report(paths: &[PathBuf], baselines: &[SchemeKind]) -> LabResult<String> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| LabError::io(p, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv") && f.file_name().is_some_and(|n| n != "summary.csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(LabError::Runtime("report: no metrics CSVs found".into()));
    }
    let mut cells: BTreeMap<(String, String), Vec<[f64; 4]>> = BTreeMap::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| LabError::io(f, e))?;
        let csv = MetricsCsv::parse(&text).map_err(|e| LabError::Runtime(format!("{}: {e}", f.display())))?;
        let key = |k: &str| csv.meta.get(k).cloned().ok_or_else(|| LabError::Runtime(format!("{}: meta lacks `{k}`", f.display())));
        let last = csv.records.last().ok_or_else(|| LabError::Runtime(format!("{}: no rows", f.display())))?;
        cells.entry((key("env")?, key("scheme")?)).or_default().push(summary_values(last));
    }
    let medians: BTreeMap<&(String, String), Vec<f64>> = cells
        .iter()
        .map(|(k, rows)| (k, (0..4).map(|j| median(&mut rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()))
        .collect();
    let mut text = String::from("env scheme runs value_error return norm_return cosine_sim\n");
    for ((env, scheme), med) in &medians {
        let _ = writeln!(
            text,
            "{env} {scheme} {} {:.4e} {:.4} {:.4} {:.4}",
            cells[&(env.clone(), scheme.clone())].len(),
            med[0],
            med[1],
            med[2],
            med[3]
        );
        for b in baselines.iter().map(|b| b.id()).filter(|b| b != scheme) {
            if let Some(base) = medians.get(&(env.clone(), b.to_string())) {
                let _ = writeln!(text, "  vs {b}: value_error {:+.4e}, norm_return {:+.4}", med[0] - base[0], med[2] - base[2]);
            }
        }
    }
    Ok(text)
}
