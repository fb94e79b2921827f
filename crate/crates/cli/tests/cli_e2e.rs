use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use egoground::eval::{read_json, RunMetadata, METADATA_FILE, RECORDS_FILE, REPORT_FILE};

fn egoground(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egoground"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EGO_API_BASE")
        .env_remove("EGO_API_KEY")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(cwd: &Path, count: &str) {
    ok(&egoground(&["synth", "--count", count, "--seed", "5", "--out", "fx/set.json"], cwd));
}

#[test]
fn synth_reports_statistics_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok(&egoground(&["synth", "--count", "30", "--seed", "8", "--out", "a.json"], tmp.path()));
    let b = ok(&egoground(&["synth", "--count", "30", "--seed", "8", "--out", "b.json"], tmp.path()));
    assert!(a.contains("negative rate") && a.contains("95% band"));
    let digest = |s: &str| s.lines().find(|l| l.starts_with("sha256 dataset")).unwrap().to_string();
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(fs::read(tmp.path().join("a.json")).unwrap(), fs::read(tmp.path().join("b.json")).unwrap());
    assert!(tmp.path().join("a.gt").is_file());
}

#[test]
fn synth_reads_a_toml_config_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("scene.toml"), "negative_rate = 1.0\nseed = 3\n").unwrap();
    let out = ok(&egoground(&["synth", "--config", "scene.toml", "--count", "10", "--out", "n.json"], tmp.path()));
    assert!(out.contains("negative rate     1.0000"), "{out}");
    let out = ok(&egoground(
        &["synth", "--config", "scene.toml", "--negative-rate", "0", "--count", "10", "--out", "p.json"],
        tmp.path(),
    ));
    assert!(out.contains("negative rate     0.0000"), "{out}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(egoground(&["synth", "--count", "0"], tmp.path()).status.code(), Some(2));
    synth(tmp.path(), "5");
    let direct = egoground(&["run", "--data", "fx/set.json", "--engine", "direct"], tmp.path());
    assert_eq!(direct.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&direct.stderr).contains("EGO_API_BASE"));
    let tau = egoground(&["run", "--data", "fx/set.json", "--tau", "1.5"], tmp.path());
    assert_eq!(tau.status.code(), Some(2));
    let range = egoground(&["run", "--data", "fx/set.json", "--start", "4", "--end", "2"], tmp.path());
    assert_eq!(range.status.code(), Some(2));
    assert_eq!(egoground(&["score", "nowhere"], tmp.path()).status.code(), Some(1));
}

#[test]
fn validate_lists_issues_and_case_counts() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "20");
    let out = ok(&egoground(&["validate", "fx/set.json"], tmp.path()));
    assert!(out.contains("20 samples kept, 0 rejected"), "{out}");
    for task in ["EDG", "D-REC", "POG", "D-VQA"] {
        assert!(out.contains(task), "{out}");
    }
}

#[test]
fn run_config_file_fills_settings_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "15");
    fs::write(
        tmp.path().join("run.toml"),
        "data = \"fx/set.json\"\ntask = \"pog\"\ntau = 0.2\nout = \"from_file\"\n",
    )
    .unwrap();
    ok(&egoground(&["run", "--config", "run.toml", "--tau", "0.6", "--workers", "2"], tmp.path()));
    let meta: RunMetadata = read_json(&tmp.path().join("from_file/pog").join(METADATA_FILE)).unwrap();
    assert_eq!(meta.config.tau, Some(0.6));
    assert_eq!(meta.config.workers, 2);
    assert!(!tmp.path().join("from_file/edg").exists());

    fs::write(tmp.path().join("bad.toml"), "tua = 0.2\n").unwrap();
    assert_eq!(egoground(&["run", "--config", "bad.toml"], tmp.path()).status.code(), Some(2));
}

#[test]
fn partial_runs_resume_into_the_full_result() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "25");
    let base = ["run", "--data", "fx/set.json", "--task", "edg"];
    let with = |extra: &[&'static str]| [&base[..], extra].concat();
    ok(&egoground(&with(&["--out", "full"]), tmp.path()));
    ok(&egoground(&with(&["--out", "part", "--end", "10"]), tmp.path()));
    ok(&egoground(&with(&["--out", "part", "--resume", "--workers", "3"]), tmp.path()));
    for file in [RECORDS_FILE, REPORT_FILE] {
        let a = fs::read(tmp.path().join("full/edg").join(file)).unwrap();
        let b = fs::read(tmp.path().join("part/edg").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn score_prints_the_stored_report_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "12");
    ok(&egoground(&["run", "--data", "fx/set.json", "--task", "dvqa", "--out", "r"], tmp.path()));
    let out = egoground(&["score", "r/dvqa"], tmp.path());
    let stored = fs::read(tmp.path().join("r/dvqa").join(REPORT_FILE)).unwrap();
    assert_eq!(out.stdout, stored);
    assert!(String::from_utf8_lossy(&out.stderr).contains("matches"));

    fs::write(tmp.path().join("r/dvqa").join(REPORT_FILE), "{}\n").unwrap();
    let again = egoground(&["score", "r/dvqa"], tmp.path());
    assert_eq!(again.stdout, stored);
    assert!(String::from_utf8_lossy(&again.stderr).contains("differs"));
}

#[test]
fn render_writes_overlays_and_paired_text() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "6");
    ok(&egoground(&["run", "--data", "fx/set.json", "--task", "pog", "--out", "r"], tmp.path()));
    let out = ok(&egoground(&["render", "r/pog"], tmp.path()));
    assert!(out.contains("6 overlays, 12 text files"), "{out}");
    let vis = tmp.path().join("r/pog/visualize/svcot-mock");
    let names: Vec<String> = fs::read_dir(&vis)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with("_prompt.txt")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.ends_with("_output.txt")).count(), 6);
}
