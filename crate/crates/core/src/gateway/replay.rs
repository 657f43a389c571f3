//! Replay provider: serves pre-recorded replies in file-name order.
//!
//! For an episode `(instance, variant, repetition k)` the first existing
//! directory among
//!
//! ```text
//! <root>/<instance>/<variant>/rep<k>/
//! <root>/<instance>/<variant>/
//! <root>/<instance>/
//! <root>/default/
//! ```
//!
//! that holds at least one fixture file supplies the fixtures. Call `n` of an episode returns the `n`-th regular
//! file (hidden files ignored). A file with the extension `.err` makes that
//! call fail with an infrastructure error carrying the file's text.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{EpisodeKey, GatewayError, GenerationResult, Provider, ProviderMeta};
use crate::prompt::{Conversation, Role};

pub const REPLAY_ERROR_EXTENSION: &str = "err";

#[derive(Debug)]
pub struct ReplayProvider {
    model: String,
    root: PathBuf,
    calls: Mutex<HashMap<EpisodeKey, usize>>,
}

impl ReplayProvider {
    pub fn new(model: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Self { model: model.into(), root: root.into(), calls: Mutex::new(HashMap::new()) }
    }

    pub fn model_id(&self) -> &str {
        &self.model
    }

    fn fixture_dir(&self, key: &EpisodeKey) -> Result<(PathBuf, Vec<PathBuf>), GatewayError> {
        let inst = self.root.join(&key.instance_id);
        let variant = inst.join(key.variant.as_str());
        for dir in [variant.join(format!("rep{}", key.repetition)), variant, inst, self.root.join("default")] {
            if dir.is_dir() {
                let files = Self::fixtures(&dir)?;
                if !files.is_empty() {
                    return Ok((dir, files));
                }
            }
        }
        Err(GatewayError::Replay(format!("no fixtures for {} under {}", key.instance_id, self.root.display())))
    }

    fn fixtures(dir: &Path) -> Result<Vec<PathBuf>, GatewayError> {
        let entries = std::fs::read_dir(dir).map_err(|e| GatewayError::Replay(format!("{}: {e}", dir.display())))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
            .collect();
        files.sort();
        Ok(files)
    }

    pub fn generate(&self, conv: &Conversation, key: &EpisodeKey) -> Result<GenerationResult, GatewayError> {
        if conv.messages().last().map(|m| m.role) != Some(Role::User) {
            return Err(GatewayError::Config("conversation must end with a user message".into()));
        }
        let index = {
            let mut calls = self.calls.lock().expect("replay lock poisoned");
            let n = calls.entry(key.clone()).or_insert(0);
            *n += 1;
            *n - 1
        };
        let (dir, files) = self.fixture_dir(key)?;
        let path = files.get(index).ok_or_else(|| {
            GatewayError::Replay(format!("fixtures exhausted in {} after {} responses", dir.display(), files.len()))
        })?;
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Replay(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == REPLAY_ERROR_EXTENSION) {
            return Err(GatewayError::Replay(format!("scripted failure: {}", text.trim())));
        }
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
        let meta = ProviderMeta { provider: Provider::Replay, model: self.model.clone(), attempts: 1, finish_reason: None, fixture: name };
        Ok(GenerationResult::new(text, 0.0, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::Variant;

    fn key(rep: usize) -> EpisodeKey {
        EpisodeKey { instance_id: "tfim-2-1-1".into(), variant: Variant::Standard, repetition: rep }
    }

    fn pending() -> Conversation {
        Conversation::new().with_user("coder").unwrap()
    }

    #[test]
    fn serves_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("tfim-2-1-1");
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("01.txt"), "s1").unwrap();
        std::fs::write(d.join("02.txt"), "s2").unwrap();
        let r = ReplayProvider::new("m", dir.path());
        let conv = pending();
        assert_eq!(r.generate(&conv, &key(0)).unwrap().raw_text, "s1");
        assert_eq!(r.generate(&conv, &key(0)).unwrap().raw_text, "s2");
        assert!(matches!(r.generate(&conv, &key(0)), Err(GatewayError::Replay(_))));
        assert_eq!(r.generate(&conv, &key(1)).unwrap().raw_text, "s1");
        assert_eq!(conv, pending());
    }

    #[test]
    fn most_specific_directory_wins() {
        let dir = tempfile::tempdir().unwrap();
        let rep = dir.path().join("tfim-2-1-1/standard/rep1");
        let def = dir.path().join("default");
        std::fs::create_dir_all(&rep).unwrap();
        std::fs::create_dir_all(&def).unwrap();
        std::fs::write(rep.join("a.txt"), "specific").unwrap();
        std::fs::write(def.join("a.txt"), "fallback").unwrap();
        let r = ReplayProvider::new("m", dir.path());
        assert_eq!(r.generate(&pending(), &key(1)).unwrap().raw_text, "specific");
        assert_eq!(r.generate(&pending(), &key(0)).unwrap().raw_text, "fallback");
    }

    #[test]
    fn scripted_error() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("default");
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("01.err"), "503 upstream").unwrap();
        let r = ReplayProvider::new("m", dir.path());
        let e = r.generate(&pending(), &key(0)).unwrap_err();
        assert_eq!(e, GatewayError::Replay("scripted failure: 503 upstream".into()));
    }

    #[test]
    fn requires_pending_user_message() {
        let r = ReplayProvider::new("m", "/nonexistent");
        assert!(matches!(r.generate(&Conversation::new(), &key(0)), Err(GatewayError::Config(_))));
    }
}
