use std::fs;
use std::process::Command;

fn mixlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixlab"))
}

#[test]
fn check_writes_report_and_plot_extracts_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = mixlab()
        .args(["check", "--model", "gen:empty:n=1", "--suite", "gap_bound", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["verdict"], "pass");

    let csv = dir.path().join("tv.csv");
    let status = mixlab()
        .args(["plot", "--report"])
        .arg(&out)
        .args(["--series", "gap_bound/tv_plus", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "t,value,ci\n0,0.5,0\n1,0,0\n");

    let status = mixlab()
        .args(["plot", "--report"])
        .arg(&out)
        .args(["--series", "missing", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn model_file_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    fs::write(&model, "n 2\ne 0 1 -0.1\n").unwrap();
    let output = mixlab()
        .args(["check", "--suite", "gap_bound", "--seed", "1", "--model"])
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 2") && err.contains("ferromagnetic"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(mixlab().args(["check"]).status().unwrap().code(), Some(2));
    assert_eq!(
        mixlab()
            .args(["check", "--model", "gen:empty:n=2", "--suite", "nope"])
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = mixlab()
            .args([
                "check", "--model", "gen:cycle:n=4,j=0.5", "--suite", "all", "--seed", "11",
                "--replicas", "200", "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let text = fs::read_to_string(&out).unwrap();
        // the echoed output path is the only intended difference
        text.replace(name, "<out>")
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn pipeline_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let status = mixlab()
        .args(["pipeline", "--model", "gen:empty:n=64", "--k", "64", "--replicas", "200", "--seed", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["pipeline"]["branch"], "statistic");
    assert_eq!(report["pipeline"]["outcome"], "certified");
}
