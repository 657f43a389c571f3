//! Replay fixtures and campaign scaffolding shared by integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use qloop_core::episode::{CampaignConfig, RunnerConfig};
use qloop_core::gateway::ModelConfig;
use qloop_core::prompt::Variant;

/// Reply whose script prints `value` on the contract line.
pub fn correct_reply(value: f64) -> String {
    format!("Here is the solver.\n\n```python\nimport math\nenergy = {value:.12}\nprint(f\"RESULT: {{energy:.10f}}\")\n```\n")
}

/// Reply whose script dies with a NameError.
pub fn broken_reply(tag: usize) -> String {
    format!("```python\nprint('attempt {tag}')\nprint(undefined_energy_{tag})\n```\n")
}

/// Reply whose script runs cleanly but prints a wrong value.
pub fn wrong_reply() -> String {
    "```python\nprint('RESULT: 12345.0')\n```\n".to_string()
}

/// Reply whose script never finishes.
pub fn stalling_reply() -> String {
    "```python\nimport time\nprint('starting', flush=True)\ntime.sleep(100000)\n```\n".to_string()
}

/// Writes `replies` as numbered fixture files into `dir`.
pub fn write_fixtures(dir: &Path, replies: &[String]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, r) in replies.iter().enumerate() {
        std::fs::write(dir.join(format!("{:02}.md", i + 1)), r).unwrap();
    }
}

/// Broken replies for turns 1..k-1, then a correct one.
pub fn success_at(k: usize, value: f64) -> Vec<String> {
    let mut v: Vec<String> = (1..k).map(broken_reply).collect();
    v.push(correct_reply(value));
    v
}

pub fn fast_runner() -> RunnerConfig {
    RunnerConfig { memory_cap_bytes: 0, ..RunnerConfig::default() }
}

pub fn replay_campaign(
    fixtures: &Path,
    repo: &Path,
    select: &[&str],
    per_family: usize,
    reps: usize,
    turns: usize,
    variants: &[Variant],
) -> CampaignConfig {
    CampaignConfig {
        select: Some(select.iter().map(|s| s.to_string()).collect()),
        instances_per_family: per_family,
        repetitions: reps,
        turns,
        variants: variants.to_vec(),
        jobs: 4,
        repository: repo.to_path_buf(),
        runner: fast_runner(),
        models: vec![ModelConfig::replay("replay-model", fixtures)],
        ..CampaignConfig::default()
    }
}

pub fn tmp() -> (tempfile::TempDir, PathBuf) {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().to_path_buf();
    (d, p)
}
