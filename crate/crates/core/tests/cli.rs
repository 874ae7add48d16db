use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn chp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_chp"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn column(stdout: &str, col: usize) -> Vec<String> {
    stdout
        .lines()
        .filter(|l| {
            l.trim_start()
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit())
        })
        .map(|l| l.split_whitespace().nth(col).unwrap().to_string())
        .collect()
}

#[test]
fn dispatch_with_exclusion() {
    let m4 = data("m4.json");
    let (code, out, _) = chp(&[
        "dispatch",
        "--scenario",
        &m4,
        "--load",
        "15",
        "--exclude",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        column(&out, 2),
        ["0.000000", "10.000000", "5.000000", "0.000000"]
    );
    assert!(out.contains("total cost: 55.000000"));
}

#[test]
fn price_and_uplift() {
    let (code, out, _) = chp(&["price", "--scenario", &data("m4.json"), "--load", "15"]);
    assert_eq!(code, 0);
    assert!(out.contains("price: 3.000000"));
    assert_eq!(
        column(&out, 5),
        ["0.000000", "5.000000", "0.000000", "0.000000"]
    );
    assert!(out.contains("total uplift: 5.000000"));
}

#[test]
fn power_with_oracle() {
    let (code, out, _) = chp(&[
        "power",
        "--scenario",
        &data("m4.json"),
        "--load",
        "15",
        "--oracle",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        column(&out, 2),
        ["10.000000", "0.000000", "0.000000", "0.000000"]
    );
    assert_eq!(
        column(&out, 3),
        ["5.000000", "5.000000", "0.000000", "0.000000"]
    );
    let gains: Vec<f64> = column(&out, 4).iter().map(|s| s.parse().unwrap()).collect();
    for (g, want) in gains.iter().zip([0.0, 5.0, 0.0, 0.0]) {
        assert!((g - want).abs() <= 10.0 * 1e-3, "{gains:?}");
    }
    assert_eq!(column(&out, 7), ["false", "true", "true", "true"]);
}

#[test]
fn coalition_pair() {
    let (code, out, _) = chp(&[
        "coalitions",
        "--scenario",
        &data("m4.json"),
        "--load",
        "15",
        "--exclude",
        "1,2",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("power: 20.000000"));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rows.csv");
    let (code, out, _) = chp(&[
        "sweep",
        "--scenario",
        &data("m4.json"),
        "--load",
        "10:20:5",
        "--max-size",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("r2 "));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "load_mw,coalition_size,n_coalitions,n_with_power,pct_with_power,mean_power,mean_power_powerholders,max_power"
    );
    assert_eq!(lines.len(), 7);
    assert!(lines.contains(&"15.000000,1,4,2,0.500000,2.500000,5.000000,5.000000"));
    assert!(dir.path().join("rows_by_size.csv").exists());
}

#[test]
fn infeasible_load_exits_one() {
    let (code, out, err) = chp(&["dispatch", "--scenario", &data("m4.json"), "--load", "45"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.starts_with("E_INFEASIBLE"));
    assert!(err.contains("shortfall 5"));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["dispatch", "--load", "15"],
        vec![
            "dispatch",
            "--scenario",
            "/nonexistent/scenario.json",
            "--load",
            "15",
        ],
        vec!["price", "--scenario", "x", "--bogus"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = chp(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(err.starts_with("E_USAGE"), "{args:?}: {err}");
    }
    let m4 = data("m4.json");
    let (code, _, err) = chp(&[
        "dispatch",
        "--scenario",
        &m4,
        "--load",
        "15",
        "--exclude",
        "9",
    ]);
    assert_eq!(code, 2);
    assert!(err.starts_with("E_USAGE"));
}

#[test]
fn bad_scenario_is_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"label": "x", "unexpected": 1}"#).unwrap();
    let (code, _, err) = chp(&[
        "dispatch",
        "--scenario",
        path.to_str().unwrap(),
        "--load",
        "1",
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("E_SCHEMA"), "{err}");
}

#[test]
fn run_is_callable_in_process() {
    let m4 = data("m4.json");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = chp::cli::run(["chp", "price", "--scenario", &m4], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().contains("price: 3.000000"));
}
