//! End-to-end runs of the `jrank` binary against the two canonical fixtures.
//!
//! Every case compares stdout byte-for-byte with a file in `tests/golden/`.
//! Set `JRANK_BLESS=1` to rewrite the goldens after an intended change.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jrank"))
        .args(args)
        .env_remove("JRANK_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("JRANK_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from golden {name}");
}

/// Arguments loading an instance either from its JSON file or from its CSV directory.
fn json_args(name: &str) -> Vec<String> {
    vec!["--instance".into(), fixture(&format!("{name}.json"))]
}

fn csv_args(name: &str, k: usize) -> Vec<String> {
    vec![
        "--approvals".into(),
        fixture(&format!("{name}/approvals.csv")),
        "--groups".into(),
        fixture(&format!("{name}/groups.csv")),
        "-k".into(),
        k.to_string(),
    ]
}

fn golden_case(golden: &str, head: &[&str], input: &[String], tail: &[&str]) {
    let mut args: Vec<&str> = head.to_vec();
    args.extend(input.iter().map(String::as_str));
    args.extend_from_slice(tail);
    check_golden(golden, &stdout_ok(&args));
}

#[test]
fn bridging_conflict_goldens() {
    let j = json_args("bridging_conflict");
    let c = csv_args("bridging_conflict", 3);
    golden_case(
        "bridging_select_mda_opt.csv",
        &["select"],
        &j,
        &["--rule", "mda", "--method", "opt"],
    );
    golden_case(
        "bridging_select_mda_exact.json",
        &["--format", "json", "select"],
        &j,
        &["--rule", "mda", "--method", "exact"],
    );
    golden_case(
        "bridging_select_mda_greedy.csv",
        &["select"],
        &c,
        &["--rule", "mda", "--method", "greedy"],
    );
    golden_case(
        "bridging_select_engagement_greedy.csv",
        &["select"],
        &j,
        &["--rule", "engagement"],
    );
    golden_case(
        "bridging_verify_jr.csv",
        &["verify-jr"],
        &c,
        &["--items", "2,3,4"],
    );
    golden_case(
        "bridging_verify_jr.json",
        &["--format", "json", "verify-jr"],
        &j,
        &["--items", "2,3,4"],
    );
    golden_case(
        "bridging_verify_jr_pass.csv",
        &["verify-jr"],
        &j,
        &["--items", "0,1,2"],
    );
    golden_case(
        "bridging_price_mda_exact.csv",
        &["price"],
        &j,
        &["--rule", "mda", "--method", "exact"],
    );
    golden_case(
        "bridging_price_mda_exact.json",
        &["--format", "json", "price"],
        &c,
        &["--rule", "mda", "--method", "exact"],
    );
    golden_case(
        "bridging_price_mda_greedy.csv",
        &["price"],
        &j,
        &["--rule", "mda", "--method", "greedy"],
    );
    golden_case(
        "bridging_report_items.csv",
        &["report"],
        &c,
        &["--items", "2,3,4"],
    );
    golden_case(
        "bridging_report_greedy.json",
        &["--format", "json", "report"],
        &j,
        &["--rule", "mda"],
    );
}

#[test]
fn two_clusters_goldens() {
    let j = json_args("two_clusters");
    let c = csv_args("two_clusters", 3);
    golden_case(
        "two_clusters_select_mda_opt.csv",
        &["select"],
        &j,
        &["--rule", "mda", "--method", "opt"],
    );
    golden_case(
        "two_clusters_select_engagement_exact.json",
        &["--format", "json", "select"],
        &c,
        &["--rule", "engagement", "--method", "exact"],
    );
    golden_case(
        "two_clusters_verify_jr.csv",
        &["verify-jr"],
        &j,
        &["--items", "2,3,4"],
    );
    golden_case(
        "two_clusters_price_engagement_exact.csv",
        &["price"],
        &c,
        &["--rule", "engagement", "--method", "exact"],
    );
    golden_case(
        "two_clusters_price_mda_greedy.json",
        &["--format", "json", "price"],
        &j,
        &["--rule", "mda", "--method", "greedy"],
    );
    golden_case(
        "two_clusters_report_items.csv",
        &["report"],
        &j,
        &["--items", "2,3,4"],
    );
    golden_case(
        "two_clusters_report_engagement.json",
        &["--format", "json", "report"],
        &c,
        &["--rule", "engagement"],
    );
}

#[test]
fn construct_and_simulate_goldens() {
    check_golden(
        "construct_diverse_worst.json",
        &stdout_ok(&["construct", "diverse-worst", "-n", "12", "-k", "4"]),
    );
    check_golden(
        "construct_cohesive_tight.json",
        &stdout_ok(&[
            "construct",
            "cohesive-tight",
            "-n",
            "8",
            "-k",
            "4",
            "--gamma",
            "2",
        ]),
    );
    check_golden(
        "construct_unbounded.json",
        &stdout_ok(&["construct", "unbounded", "-k", "3"]),
    );
    let sim = [
        "simulate",
        "--phi",
        "0.2:1.0:0.4",
        "-n",
        "20",
        "-m",
        "20",
        "-k",
        "4",
        "--tau",
        "5",
        "--sims",
        "8",
    ];
    check_golden("simulate_small.csv", &stdout_ok(&sim));
    let mut json = vec!["--format", "json"];
    json.extend_from_slice(&sim);
    check_golden("simulate_small.json", &stdout_ok(&json));
}

#[test]
fn verify_jr_names_the_lowest_violating_item() {
    let out = stdout_ok(&[
        "verify-jr",
        "--instance",
        &fixture("bridging_conflict.json"),
        "--items",
        "2,3,4",
    ]);
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("2;3;4,false,0,"), "{row}");
}

#[test]
fn construct_writes_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("worst.json");
    let csv_dir = dir.path().join("csv");
    stdout_ok(&[
        "construct",
        "diverse-worst",
        "-n",
        "6",
        "-k",
        "3",
        "--out",
        json.to_str().unwrap(),
        "--csv-dir",
        csv_dir.to_str().unwrap(),
    ]);
    let from_json = stdout_ok(&[
        "price",
        "--instance",
        json.to_str().unwrap(),
        "--rule",
        "mda",
        "--method",
        "exact",
    ]);
    assert!(
        from_json.lines().nth(1).unwrap().contains(",3,3/1,"),
        "{from_json}"
    );
    let approvals = csv_dir.join("approvals.csv");
    let groups = csv_dir.join("groups.csv");
    let from_csv = stdout_ok(&[
        "price",
        "--approvals",
        approvals.to_str().unwrap(),
        "--groups",
        groups.to_str().unwrap(),
        "-k",
        "3",
        "--rule",
        "mda",
        "--method",
        "exact",
    ]);
    assert_eq!(from_json, from_csv);
}

#[test]
fn simulate_writes_one_row_per_grid_point_and_an_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    let out = run(&[
        "simulate",
        "--phi",
        "0.1:1.0:0.05",
        "-n",
        "10",
        "-m",
        "10",
        "-k",
        "3",
        "--tau",
        "3",
        "--sims",
        "2",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 1 + 19);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let sim = [
        "--seed",
        "7",
        "simulate",
        "--phi",
        "0.3:0.9:0.3",
        "-n",
        "30",
        "-m",
        "30",
        "-k",
        "5",
        "--tau",
        "6",
        "--sims",
        "10",
    ];
    assert_eq!(run(&sim).stdout, run(&sim).stdout);
    let mut other_seed = sim;
    other_seed[1] = "8";
    assert_ne!(run(&sim).stdout, run(&other_seed).stdout);

    let price = [
        "--format",
        "json",
        "price",
        "--instance",
        &fixture("bridging_conflict.json"),
        "--rule",
        "mda",
        "--method",
        "exact",
    ];
    assert_eq!(run(&price).stdout, run(&price).stdout);
}

#[test]
fn exit_codes() {
    let inst = fixture("bridging_conflict.json");
    let code = |args: &[&str]| {
        let out = run(args);
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            assert_eq!(
                err.trim_end().lines().count(),
                1,
                "diagnostic should be one line: {err}"
            );
        }
        out.status.code()
    };
    assert_eq!(
        code(&["verify-jr", "--instance", &inst, "--items", "0,1"]),
        Some(0)
    );
    assert_eq!(
        code(&["verify-jr", "--instance", &inst, "--items", "0,9"]),
        Some(1)
    );
    // Usage errors come from the argument parser, which adds a hint line.
    let usage = run(&["select", "--instance", &inst, "--rule", "nonsense"]);
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).starts_with("error: invalid value 'nonsense'"));
    assert_eq!(
        code(&[
            "select",
            "--instance",
            "/nonexistent/instance.json",
            "--rule",
            "mda"
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "--budget",
            "3",
            "price",
            "--instance",
            &inst,
            "--rule",
            "mda",
            "--method",
            "exact"
        ]),
        Some(2)
    );

    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), "user_id,item_id,value\n0,0,0.7\n0,1,1\n").unwrap();
    assert_eq!(
        code(&[
            "verify-jr",
            "--approvals",
            bad.path().to_str().unwrap(),
            "-k",
            "1",
            "--items",
            "0"
        ]),
        Some(1)
    );

    let cache = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&[
            "--offline",
            "fetch",
            "--url",
            "http://127.0.0.1:9/data.csv",
            "--cache-dir",
            cache.path().to_str().unwrap()
        ]),
        Some(2)
    );
}
