use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mixbayes_cli::kexp::KExperimentPlan;
use mixbayes_cli::rates::read_results;
use mixbayes_cli::{builtin_truth, rates_table, run_experiment, run_k_experiment, Case, ExperimentPlan, Method};
use mixbayes_core::{wasserstein, SamplerConfig};

fn mixbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixbayes")).args(args).output().unwrap()
}

fn short_chains() -> SamplerConfig {
    SamplerConfig {
        iterations: 400,
        burn_in: 100,
        thin: 10,
        ..SamplerConfig::default()
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn smoke_plan_gives_two_finite_rows() {
    let plan = ExperimentPlan::new(Case::Case1, vec![250], 2, vec![Method::MapExact], 0);
    let rows = run_experiment(&plan, std::io::sink(), true).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.w1_error.is_some_and(f64::is_finite)));
}

#[test]
fn rows_cover_the_grid_and_errors_are_reproducible() {
    let mut plan = ExperimentPlan::new(Case::Case3, vec![60, 120], 2, Method::ALL.to_vec(), 3);
    plan.sampler = short_chains();
    plan.timing = false;
    let mut first = Vec::new();
    let rows = run_experiment(&plan, &mut first, true).unwrap();
    assert_eq!(rows.len(), 2 * 2 * Method::ALL.len());
    let truth = builtin_truth(3).unwrap();
    for r in &rows {
        assert!(!r.failed(), "{r:?}");
        let recomputed = wasserstein(&r.estimate().unwrap(), &truth, 1.0);
        assert_eq!(recomputed, r.w1_error.unwrap(), "{}", r.method);
    }
    let mut second = Vec::new();
    run_experiment(&plan, &mut second, true).unwrap();
    assert_eq!(first, second);
    let parsed = read_results(first.as_slice()).unwrap();
    assert_eq!(parsed, rows);
}

fn wide_truth() -> mixbayes_core::AtomicMixture {
    // 21 atoms need Hermite moments beyond the supported order
    mixbayes_core::AtomicMixture::uniform((0..21).map(|i| -5.0 + 0.5 * i as f64).collect()).unwrap()
}

#[test]
fn failing_cells_become_error_rows() {
    let plan = ExperimentPlan::new(Case::Custom(wide_truth()), vec![200], 2, vec![Method::Moments, Method::MapExact], 0);
    let rows = run_experiment(&plan, std::io::sink(), true).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.failed(), r.method == Method::Moments, "{r:?}");
    }
    let failed = rows.iter().find(|r| r.failed()).unwrap();
    assert!(failed.w1_error.is_none() && failed.k_mode.is_none() && failed.estimate.is_empty());
}

#[test]
fn k_experiment_rows_are_pmfs() {
    let plan = KExperimentPlan {
        n_grid: vec![50, 100],
        replicates: 2,
        sampler: short_chains(),
        ..Default::default()
    };
    let mut out = Vec::new();
    let rows = run_k_experiment(&plan, &mut out).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 4);
    for r in &rows {
        assert!((r.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.pmf[r.mode.min(10) - 1] > 0.0);
    }
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("method,n,replicate,mode,k1,"));
    assert_eq!(text.lines().count(), 1 + rows.len());
}

#[test]
fn rate_columns_decrease_in_n() {
    let ns: Vec<usize> = (1..=40).map(|i| 250 * i).collect();
    let rows = rates_table(&[1, 2, 3, 4], 2, 2.0, 10, &ns, None).unwrap();
    for pair in rows.windows(2) {
        assert!(pair[1].higher_order < pair[0].higher_order);
        for j in 0..4 {
            assert!(pair[1].exact[j] < pair[0].exact[j]);
            if let (Some(a), Some(b)) = (pair[0].adaptive[j], pair[1].adaptive[j]) {
                assert!(b < a);
            }
        }
    }
}

#[test]
fn gen_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixbayes(&["gen", "--case", "2", "--n", "300", "--seed", "7", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = dir.path().join("case2_n300_s7.txt");
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 300);

    let est = dir.path().join("est.json");
    let out = mixbayes(&["fit", "--method", "map_exact", "--data", p(&data), "--seed", "1", "--out", p(&est)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let truth = dir.path().join("truth.json");
    fs::write(&truth, builtin_truth(2).unwrap().to_json()).unwrap();
    let out = mixbayes(&["eval", "--estimate", p(&est), "--truth", p(&truth), "--q", "1"]);
    assert!(out.status.success());
    let w1: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(w1.is_finite() && w1 >= 0.0);

    let sampler = dir.path().join("sampler.json");
    fs::write(&sampler, r#"{"iterations": 300, "burn_in": 100, "thin": 10}"#).unwrap();
    let prior = dir.path().join("prior.json");
    fs::write(&prior, r#"{"family": "geometric", "p": "0.5"}"#).unwrap();
    let trace = dir.path().join("trace.csv");
    let out = mixbayes(&[
        "fit", "--method", "mfm_vary", "--data", p(&data), "--config", p(&prior), "--sampler", p(&sampler), "--out", p(&trace),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("iter,k_or_T,log_post,atoms_json,weights_json"));
    assert_eq!(csv.lines().count(), 1 + 20);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["modal_k"].as_u64().unwrap() >= 1);
}

#[test]
fn experiment_command_appends_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    fs::write(
        &plan,
        r#"{"case": "case1", "n_grid": [80], "replicates": 2, "methods": ["dp_const", "moments"], "seed": 5,
            "sampler": {"iterations": 300, "burn_in": 100, "thin": 20}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let status = mixbayes(&["experiment", "--plan", p(&plan), "--out", p(out), "--no-timing"]).status;
        assert_eq!(status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1 + 4);

    mixbayes(&["experiment", "--plan", p(&plan), "--out", p(&a), "--no-timing"]);
    let appended = fs::read_to_string(&a).unwrap();
    assert_eq!(appended.lines().count(), 1 + 8);
    assert_eq!(appended.matches("case,method").count(), 1);

    let rates = dir.path().join("rates.csv");
    let out = mixbayes(&["rates", "--out", p(&rates), "--n-grid", "80,160", "--results", p(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(&rates).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.contains("empirical_dp_const") && header.contains("empirical_moments"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("bad.json");
    fs::write(&plan, r#"{"case": "case1", "n_grid": [500, 100], "replicates": 1, "methods": ["moments"]}"#).unwrap();
    let out = mixbayes(&["experiment", "--plan", p(&plan), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(mixbayes(&["gen", "--case", "9", "--n", "10", "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(mixbayes(&["frobnicate"]).status.code(), Some(2));

    let plan_json = serde_json::json!({
        "case": {"custom": wide_truth()},
        "n_grid": [200],
        "replicates": 1,
        "methods": ["moments", "map_exact"],
    });
    fs::write(&plan, plan_json.to_string()).unwrap();
    let results = dir.path().join("partial.csv");
    let out = mixbayes(&["experiment", "--plan", p(&plan), "--out", p(&results)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 1 + 2);
}
