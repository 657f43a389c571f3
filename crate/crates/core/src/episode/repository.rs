//! On-disk episode repository.
//!
//! ```text
//! <root>/<campaign-hash>/<family>/<instance>/<model>/<variant>/rep<k>/
//!     episode.json            complete record, written last
//!     turn01/prompt.txt
//!     turn01/response.txt
//!     turn01/script.py        absent when no code was extracted
//!     turn01/stdout.txt
//!     turn01/stderr.txt
//!     turn01/meta.json        execution, verdict and cause of the turn
//! ```
//!
//! Every file is written to a temporary name in the same directory and then
//! renamed, so readers never observe a partial file. A directory without
//! `episode.json` is an interrupted episode and is rerun from scratch.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{EpisodeError, EpisodeRecord, TurnRecord};

pub const RECORD_FILE: &str = "episode.json";

/// Maps a model id or instance id onto a single safe path component.
pub fn path_component(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    match out.as_str() {
        "" | "." | ".." => format!("_{out}"),
        _ => out,
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> EpisodeError {
    EpisodeError::Io { path: path.display().to_string(), reason: e.to_string() }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EpisodeError> {
    let dir = path.parent().ok_or_else(|| io(path, "no parent directory"))?;
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir).map_err(|e| io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io(path, e))?;
    tmp.persist(path).map_err(|e| io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Repository {
    root: PathBuf,
}

impl Repository {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn campaign_dir(&self, campaign_hash: &str) -> PathBuf {
        self.root.join(campaign_hash)
    }

    pub fn episode_dir(
        &self,
        campaign_hash: &str,
        family_slug: &str,
        instance_id: &str,
        model_id: &str,
        variant: &str,
        repetition: usize,
    ) -> PathBuf {
        self.campaign_dir(campaign_hash)
            .join(path_component(family_slug))
            .join(path_component(instance_id))
            .join(path_component(model_id))
            .join(variant)
            .join(format!("rep{repetition}"))
    }

    pub fn is_complete(dir: &Path) -> bool {
        dir.join(RECORD_FILE).is_file()
    }

    /// Removes leftovers of an interrupted episode.
    pub fn clear_partial(dir: &Path) -> Result<(), EpisodeError> {
        if dir.exists() && !Self::is_complete(dir) {
            std::fs::remove_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        Ok(())
    }

    pub fn write_turn(dir: &Path, turn: &TurnRecord) -> Result<(), EpisodeError> {
        let t = dir.join(format!("turn{:02}", turn.turn));
        write_atomic(&t.join("prompt.txt"), turn.prompt.as_bytes())?;
        write_atomic(&t.join("response.txt"), turn.raw_response.as_bytes())?;
        if let Some(code) = &turn.extracted_code {
            write_atomic(&t.join("script.py"), code.as_bytes())?;
        }
        if let Some(exec) = &turn.execution {
            write_atomic(&t.join("stdout.txt"), exec.stdout.as_bytes())?;
            write_atomic(&t.join("stderr.txt"), exec.stderr.as_bytes())?;
        }
        let meta = serde_json::json!({
            "turn": turn.turn,
            "wall_time_s": turn.wall_time_s,
            "provider": turn.provider,
            "generation_latency_s": turn.generation_latency_s,
            "exit_status": turn.execution.as_ref().map(|e| e.exit_status),
            "duration_s": turn.execution.as_ref().map(|e| e.duration_s),
            "timed_out": turn.execution.as_ref().map(|e| e.timed_out),
            "verdict": turn.verdict,
            "cause": turn.cause,
        });
        write_atomic(&t.join("meta.json"), serde_json::to_string_pretty(&meta).expect("json").as_bytes())
    }

    pub fn write_record(dir: &Path, record: &EpisodeRecord) -> Result<PathBuf, EpisodeError> {
        let path = dir.join(RECORD_FILE);
        let json = serde_json::to_string_pretty(record).expect("record serializes");
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }

    pub fn read_record(path: &Path) -> Result<EpisodeRecord, EpisodeError> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        serde_json::from_str(&text).map_err(|e| io(path, e))
    }

    /// Every complete record below `root`, sorted by path.
    pub fn load_all(root: &Path) -> Result<Vec<(PathBuf, EpisodeRecord)>, EpisodeError> {
        let mut paths = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            let entries = std::fs::read_dir(&dir).map_err(|e| io(&dir, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| io(&dir, e))?;
                let path = entry.path();
                let kind = entry.file_type().map_err(|e| io(&path, e))?;
                if kind.is_dir() {
                    stack.push(path);
                } else if kind.is_file() && path.file_name().is_some_and(|n| n == RECORD_FILE) {
                    paths.push(path);
                }
            }
        }
        paths.sort();
        paths.into_iter().map(|p| Self::read_record(&p).map(|r| (p, r))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_are_safe() {
        assert_eq!(path_component("openai/gpt-5.2"), "openai_gpt-5.2");
        assert_eq!(path_component(".."), "_..");
        assert_eq!(path_component("tfim-2-1-1"), "tfim-2-1-1");
    }

    #[test]
    fn atomic_write_replaces() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
