use std::path::Path;
use std::process::{Command, Output};

fn qloop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qloop"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const REPLY: &str = "```python\nprint(f\"RESULT: {-5 ** 0.5:.10f}\")\n```\n";
const BROKEN: &str = "```python\nprint(energy)\n```\n";

/// Replay campaign over one TFIM instance: fail, then succeed.
fn setup(dir: &Path, extra_model: &str) {
    let fx = dir.join("fixtures/tfim-2-1-1");
    std::fs::create_dir_all(&fx).unwrap();
    std::fs::write(fx.join("01.md"), BROKEN).unwrap();
    std::fs::write(fx.join("02.md"), REPLY).unwrap();
    std::fs::write(
        dir.join("campaign.toml"),
        format!(
            r#"select = ["tfim-2-1-1"]
instances_per_family = 1
repetitions = 2
turns = 3
variants = ["standard"]
repository = "repo"

[runner]
memory_cap_bytes = 0

[[model]]
id = "replay-model"
provider = "replay"
replay_dir = "fixtures"
{extra_model}"#
        ),
    )
    .unwrap();
}

#[test]
fn solve_prints_reference() {
    let d = tempfile::tempdir().unwrap();
    let o = qloop(d.path(), &["solve", "--instance", "tfim-2-1-1", "--instance", "maxcut-triangle"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("-2.2360679775"), "{out}");
    assert!(out.lines().nth(1).unwrap().contains(" 2.0000000000"), "{out}");
}

#[test]
fn solve_rejects_unknown_family() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("i.toml"), "[[instance]]\nid = \"x\"\ndescriptor = \"physics/unknown\"\n").unwrap();
    let o = qloop(d.path(), &["solve", "--instances", "i.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("unknown family"), "{}", text(&o));
}

#[test]
fn usage_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(qloop(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(qloop(d.path(), &["report", "everything"]).status.code(), Some(2));
    assert_eq!(qloop(d.path(), &["campaign"]).status.code(), Some(2));
    for sub in ["validate", "solve", "episode", "campaign", "classify", "report"] {
        let o = qloop(d.path(), &[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage:"), "{sub}");
    }
}

#[test]
fn campaign_resume_and_reports() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), "");
    let o = qloop(d.path(), &["campaign", "--config", "campaign.toml", "--jobs", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(out.contains("2 new episodes"), "{out}");
    assert!(out.contains("success@1") && !out.contains("success@3"), "{out}");
    let eps: Vec<_> = walk(&d.path().join("repo")).into_iter().filter(|p| p.ends_with("episode.json")).collect();
    assert_eq!(eps.len(), 2);

    let o = qloop(d.path(), &["campaign", "--config", "campaign.toml"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 new episodes"), "{}", text(&o));

    let o = qloop(d.path(), &["report", "success", "--repository", "repo", "--turns", "1,2,3", "--out", "rep"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("success@1") && out.contains("success@3"), "{out}");
    assert!(out.contains("0.00") && out.contains("1.00"), "{out}");
    assert!(d.path().join("rep/success.csv").is_file());

    let o = qloop(d.path(), &["report", "causes", "--repository", "repo", "--out", "rep"]);
    let out = String::from_utf8_lossy(&o.stdout);
    for col in ["NumErr", "Timeout", "API", "Deps", "Type", "Gen", "Other"] {
        assert!(out.lines().next().unwrap().contains(col), "{out}");
    }
    assert!(out.contains("100.0%"), "{out}");

    let o = qloop(d.path(), &["report", "durations", "--repository", "repo", "--out", "rep"]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = std::fs::read_to_string(d.path().join("rep/durations.csv")).unwrap();
    assert!(csv.contains(",turn1,") && csv.contains(",to_success,"), "{csv}");

    let o = qloop(d.path(), &["report", "stats", "--repository", "repo", "--turns", "1,2", "--out", "rep"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 vs. 2"), "{}", text(&o));
}

#[test]
fn single_episode_command() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), "");
    let o = qloop(d.path(), &["episode", "--config", "campaign.toml", "--instance", "tfim-2-1-1", "--repetition", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("success at turn 2"), "{out}");
    assert!(out.contains("Gen (NameError)"), "{out}");
    let o = qloop(d.path(), &["episode", "--config", "campaign.toml", "--instance", "tfim-2-1-1", "--repetition", "2"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("already complete"));
}

#[test]
fn missing_token_fails_before_running() {
    let d = tempfile::tempdir().unwrap();
    setup(
        d.path(),
        "\n[[model]]\nid = \"hosted\"\nprovider = \"openai\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nauth_env = \"QLOOP_TEST_UNSET_TOKEN\"\n",
    );
    let o = Command::new(env!("CARGO_BIN_EXE_qloop"))
        .args(["campaign", "--config", "campaign.toml"])
        .current_dir(d.path())
        .env_remove("QLOOP_TEST_UNSET_TOKEN")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("QLOOP_TEST_UNSET_TOKEN"), "{}", text(&o));
    assert!(!d.path().join("repo").exists());
}

#[test]
fn report_on_empty_repository_fails() {
    let d = tempfile::tempdir().unwrap();
    std::fs::create_dir(d.path().join("repo")).unwrap();
    assert_eq!(qloop(d.path(), &["report", "success", "--repository", "repo"]).status.code(), Some(1));
    assert_eq!(qloop(d.path(), &["report", "success", "--repository", "missing"]).status.code(), Some(1));
}

#[test]
fn classify_streams() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("err.txt"), "ImportError: cannot import name 'execute' from 'qiskit'\n").unwrap();
    let o = qloop(d.path(), &["classify", "--stderr", "err.txt"]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("Deps\tcannot import name"), "{}", text(&o));
    std::fs::write(d.path().join("out.txt"), "RESULT: 3.0\n").unwrap();
    let o = qloop(d.path(), &["classify", "--stdout", "out.txt", "--exit-code", "0"]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("NumErr\t-"), "{}", text(&o));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
