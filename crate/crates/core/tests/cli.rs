//! The command-line binary: exit codes, output locations and replay.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rspv-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rspv-bin-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, format!("[experiment]\nname = \"exp\"\nprotocol = \"multi_block_test\"\ntrials = 30\nseed = 2\n{body}")).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_writes_report_and_reports_expectations() {
    let dir = scratch("run");
    let cfg = write_config(&dir, "[protocol.params]\nkappa = 8\n[expect]\nmin = 1.0\n");
    let o = bin().arg("run").arg(&cfg).env("RSPV_OUT_DIR", &dir).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("exp.json").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("30/30"));

    let strict = write_config(&dir, "[protocol.params]\nkappa = 8\n[adversary]\nname = \"parity-liar\"\n[expect]\nmin = 0.5\n");
    let out = dir.join("explicit.json");
    let o = bin().args(["run", "--trials", "12", "--seed", "9", "--workers", "2", "--out"]).arg(&out).arg(&strict).output().unwrap();
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["trials"], 12);
    assert_eq!(report["seed"], 9);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn errors_exit_with_one() {
    let dir = scratch("errors");
    let o = bin().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let cfg = write_config(&dir, "[protocol.params]\nwidth = 3\n");
    assert_eq!(code(&bin().arg("run").arg(&cfg).env("RSPV_OUT_DIR", &dir).output().unwrap()), 1);
    std::fs::write(dir.join("bad.json"), "{").unwrap();
    assert_eq!(code(&bin().arg("replay").arg(dir.join("bad.json")).output().unwrap()), 1);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn replay_accepts_untouched_reports_and_flags_edits() {
    let dir = scratch("replay");
    let cfg = write_config(&dir, "[protocol.params]\nkappa = 8\n[adversary]\nname = \"lazy-parity\"\n");
    assert_eq!(code(&bin().arg("run").arg(&cfg).env("RSPV_OUT_DIR", &dir).output().unwrap()), 0);
    let report = dir.join("exp.json");
    let o = bin().arg("replay").arg(&report).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay matches"));

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let s = v["successes"].as_u64().unwrap();
    v["successes"] = serde_json::json!(if s == 0 { 1 } else { s - 1 });
    std::fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let o = bin().arg("replay").arg(&report).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("REPLAY MISMATCH"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn listings_print_sorted_names() {
    for (cmd, expect) in [("list-protocols", "one_block"), ("list-adversaries", "parity-liar")] {
        let o = bin().arg(cmd).output().unwrap();
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout).to_string();
        let heads: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).collect();
        let mut sorted = heads.clone();
        sorted.sort();
        assert_eq!(heads, sorted);
        assert!(text.contains(expect));
    }
}
