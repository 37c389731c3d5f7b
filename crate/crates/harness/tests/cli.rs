use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use discor_lab::csv::MetricsCsv;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discor-lab"))
        .args(args)
        .env_remove("DISCOR_LAB_OUT")
        .output()
        .expect("spawn discor-lab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_csv(path: &Path) -> MetricsCsv {
    MetricsCsv::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every column except wall time, as bits.
fn fingerprint(csv: &MetricsCsv) -> Vec<(usize, Vec<u64>)> {
    csv.records
        .iter()
        .map(|r| {
            let mut m = r.metrics().to_vec();
            m.pop();
            (r.iter, m.into_iter().map(f64::to_bits).collect())
        })
        .collect()
}

fn strip_wall_time(text: &str) -> String {
    text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

const TREE_RUN: [&str; 10] = ["--env", "tree:H=3", "--scheme", "discor", "--mode", "exact", "--iters", "50", "--seed", "7"];

fn tree_run(out: &Path) -> PathBuf {
    let mut args = vec!["run"];
    args.extend(TREE_RUN);
    args.extend(["--out", out.to_str().unwrap()]);
    let o = lab(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("tree_H_3_discor_exact_seed7.csv")
}

#[test]
fn tree_run_writes_fifty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = read_csv(&tree_run(dir.path()));
    assert_eq!(csv.records.len(), 50);
    assert_eq!(csv.records.iter().map(|r| r.iter).collect::<Vec<_>>(), (1..=50).collect::<Vec<_>>());
    assert_eq!(csv.meta["env"], "tree:H=3");
    assert_eq!(csv.meta["seed"], "7");
    assert!(csv.meta.contains_key("gamma"));
}

#[test]
fn identical_invocations_match_apart_from_wall_time() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (pa, pb) = (tree_run(a.path()), tree_run(b.path()));
    let (ta, tb) = (std::fs::read_to_string(pa).unwrap(), std::fs::read_to_string(pb).unwrap());
    assert_eq!(strip_wall_time(&ta), strip_wall_time(&tb));
}

#[test]
fn manifest_regenerates_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let original = read_csv(&tree_run(dir.path()));
    let manifest = dir.path().join("tree_H_3_discor_exact_seed7.manifest");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.starts_with("# code_version = discor-lab "));
    let again = dir.path().join("again");
    let o = lab(&["run", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let regenerated = read_csv(&again.join("tree_H_3_discor_exact_seed7.csv"));
    assert_eq!(fingerprint(&regenerated), fingerprint(&original));
    assert_eq!(regenerated.meta, original.meta);
}

#[test]
fn sampled_runs_are_seed_deterministic() {
    let run = |dir: &Path, seed: &str| {
        let o = lab(&[
            "run", "--env", "random:S=6,A=2,gamma=0.9", "--scheme", "discor", "--iters", "30", "--seed", seed, "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read_csv(&dir.join(format!("random_S_6_A_2_gamma_0.9_discor_sampled_seed{seed}.csv")))
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(fingerprint(&run(a.path(), "3")), fingerprint(&run(b.path(), "3")));
    assert_ne!(fingerprint(&run(a.path(), "3")), fingerprint(&run(a.path(), "4")));
}

#[test]
fn sweep_writes_run_and_median_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "sweep", "--envs", "grid16onehotsparse", "--schemes", "uniform per discor", "--seeds", "0..5", "--iters", "3",
        "--samples-per-iter", "50", "--jobs", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 18);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(2) == Some("median")).count(), 3);
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 16);

    let report = lab(&["report", dir.path().to_str().unwrap(), "--baselines", "uniform"]);
    assert_eq!(code(&report), 0, "{}", stderr(&report));
    let text = stdout(&report);
    assert!(text.contains("grid16onehotsparse discor 5 "), "{text}");
    assert_eq!(text.matches("vs uniform").count(), 2, "{text}");
}

#[test]
fn failed_sweep_runs_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "sweep", "--envs", "tree:H=3 tree:H=0", "--schemes", "uniform", "--seeds", "0", "--mode", "exact", "--iters", "5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("tree:H=0"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(dir.path().join("tree_H_3_uniform_exact_seed0.csv").exists());
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[experiment]\nenv = tree:H=3\n\n[train]\ntau0 = fast\n").unwrap();
    let o = lab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 5") && stderr(&o).contains("tau0"), "{}", stderr(&o));

    let o = lab(&["run", "--no-such-key", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    let o = lab(&["run", "--scheme", "greedy"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn lemma_suite_passes() {
    let o = lab(&["verify", "--bound", "lemma", "--trials", "300"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("no violations"));
}

const THM3_FIXTURE: [&str; 10] = ["verify", "--bound", "thm3", "--env", "random:S=5,A=2,gamma=0.9", "--iters", "300", "--temperature-decay", "1", "--seed"];

#[test]
fn thm3_passes_and_corrupted_delta_fails() {
    let mut args = THM3_FIXTURE.to_vec();
    args.push("0");
    let o = lab(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("k0 = 22"));

    args.extend(["--corrupt-delta", "true"]);
    let o = lab(&args);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let err = stderr(&o);
    assert!(err.contains("first violation at k = "), "{err}");
    let first: usize = err.split("first violation at k = ").nth(1).unwrap().split(':').next().unwrap().parse().unwrap();
    assert!(first >= 22);
    assert!(err.contains(&format!("violation k = {first}:")));
}

#[test]
fn thm3_on_grid_reports_k0() {
    let o = lab(&["verify", "--bound", "thm3", "--env", "grid16onehotsparse", "--discount", "0.95", "--iters", "80"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("k0 = 59"));
}

#[test]
fn complexity_verify_on_small_trees() {
    let o = lab(&["verify", "--bound", "complexity", "--depths", "3 4", "--seeds", "0"]);
    let text = stdout(&o) + &stderr(&o);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("3 discor 0 3") && text.contains("4 discor 0 4"), "{text}");
}

#[test]
fn report_rejects_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.csv");
    std::fs::write(&f, "a,b\n1,2\n").unwrap();
    let o = lab(&["report", f.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}
