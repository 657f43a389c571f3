//! Campaign configuration, planning and parallel execution.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_episode, EpisodeContext, EpisodeError, EpisodeRecord, EpisodeStatus, Repository, DEFAULT_MAX_INFRA_ERRORS};
use crate::adjudicator::Taxonomy;
use crate::gateway::{Gateway, ModelConfig};
use crate::prompt::{TemplateSet, Variant, DEFAULT_STACK};
use crate::registry::{bundled_instances, load_instances, Family, ProblemInstance};
use crate::sandbox::{RunSpec, DEFAULT_ENV_ALLOWLIST, DEFAULT_MEMORY_CAP};
use crate::solvers::{instance_content_hash, ReferenceCache};

/// How generated scripts are executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunnerConfig {
    pub interpreter: Vec<String>,
    /// Multiplies every instance timeout.
    pub timeout_scale: f64,
    /// Address-space cap in bytes; 0 disables it.
    pub memory_cap_bytes: u64,
    pub env_allowlist: Vec<String>,
    pub isolate_network: bool,
    /// Fall back to the last number on stdout when no RESULT line is printed.
    pub lenient: bool,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            interpreter: vec!["python3".into()],
            timeout_scale: 1.0,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
            env_allowlist: DEFAULT_ENV_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
            isolate_network: true,
            lenient: false,
        }
    }
}

impl RunnerConfig {
    pub fn run_spec(&self, script: String, timeout_s: f64) -> RunSpec {
        RunSpec {
            script,
            interpreter: self.interpreter.clone(),
            timeout_s,
            memory_cap: (self.memory_cap_bytes > 0).then_some(self.memory_cap_bytes),
            env_allowlist: self.env_allowlist.clone(),
            isolate_network: self.isolate_network,
        }
    }
}

fn default_i() -> usize {
    4
}
fn default_r() -> usize {
    10
}
fn default_t() -> usize {
    10
}
fn default_variants() -> Vec<Variant> {
    vec![Variant::Standard, Variant::Informed]
}
fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
fn default_repository() -> PathBuf {
    PathBuf::from("qloop-out/repo")
}
fn default_max_infra() -> usize {
    DEFAULT_MAX_INFRA_ERRORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Instance file; the bundled instances when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<PathBuf>,
    /// Instance ids to consider, in order; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Vec<String>>,
    /// I: instances taken per family.
    #[serde(default = "default_i")]
    pub instances_per_family: usize,
    /// R: repetitions per (instance, model, variant).
    #[serde(default = "default_r")]
    pub repetitions: usize,
    /// T: turn budget per episode.
    #[serde(default = "default_t")]
    pub turns: usize,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_repository")]
    pub repository: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<String>,
    /// Directory overriding the bundled prompt templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// File overriding the bundled failure taxonomy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<PathBuf>,
    #[serde(default)]
    pub runner: RunnerConfig,
    #[serde(default = "default_max_infra")]
    pub max_infra_errors: usize,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelConfig>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() && !p.as_os_str().is_empty() {
        *p = base.join(&*p);
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, EpisodeError> {
        toml::from_str(text).map_err(|e| EpisodeError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, EpisodeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EpisodeError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.instances, &mut c.templates, &mut c.taxonomy].into_iter().flatten() {
            resolve(base, p);
        }
        if text.lines().any(|l| l.trim_start().starts_with("repository")) {
            resolve(base, &mut c.repository);
        }
        for m in &mut c.models {
            if let Some(d) = &mut m.replay_dir {
                resolve(base, d);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        let bad = |m: &str| Err(EpisodeError::Config(m.to_string()));
        if self.instances_per_family < 1 || self.repetitions < 1 || self.turns < 1 {
            return bad("instances_per_family, repetitions and turns must all be at least 1");
        }
        if self.jobs < 1 {
            return bad("jobs must be at least 1");
        }
        if self.variants.is_empty() {
            return bad("at least one variant is required");
        }
        if self.models.is_empty() {
            return bad("at least one [[model]] is required");
        }
        if self.max_infra_errors < 1 {
            return bad("max_infra_errors must be at least 1");
        }
        if !(self.runner.timeout_scale > 0.0 && self.runner.timeout_scale.is_finite()) {
            return bad("runner.timeout_scale must be positive");
        }
        if self.runner.interpreter.is_empty() {
            return bad("runner.interpreter must not be empty");
        }
        let mut ids = HashSet::new();
        for m in &self.models {
            m.validate()?;
            if !ids.insert(m.id.as_str()) {
                return Err(EpisodeError::Config(format!("model {:?} listed twice", m.id)));
            }
        }
        Ok(())
    }
}

/// One planned episode, by index into the campaign's instances and models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub instance: usize,
    pub model: usize,
    pub variant: Variant,
    pub repetition: usize,
}

/// Every (model, variant, instance, repetition) combination, repetitions 1-based.
pub fn plan_episodes(n_instances: usize, n_models: usize, variants: &[Variant], repetitions: usize) -> Vec<EpisodeSpec> {
    let mut out = Vec::with_capacity(n_instances * n_models * variants.len() * repetitions);
    for model in 0..n_models {
        for &variant in variants {
            for instance in 0..n_instances {
                for repetition in 1..=repetitions {
                    out.push(EpisodeSpec { instance, model, variant, repetition });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeEvent {
    Skipped { dir: PathBuf },
    Finished { dir: PathBuf, success_turn: Option<usize>, status: EpisodeStatus },
    Failed { dir: PathBuf, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub campaign_hash: String,
    pub directory: PathBuf,
    pub planned: usize,
    pub skipped: usize,
    pub new_episodes: usize,
    pub invalid: usize,
    pub failed: Vec<String>,
    /// Paths of all complete records of this campaign, new and pre-existing.
    pub records: Vec<PathBuf>,
}

/// A prepared campaign: instances selected, models connected, hash fixed.
pub struct Campaign {
    pub config: CampaignConfig,
    pub instances: Vec<ProblemInstance>,
    pub templates: TemplateSet,
    pub taxonomy: Taxonomy,
    pub gateways: Vec<Gateway>,
    pub cache: ReferenceCache,
    pub repository: Repository,
    hash: String,
}

/// First `per_family` instances of each family, keeping the input order.
pub fn select_instances(
    all: Vec<ProblemInstance>,
    select: Option<&[String]>,
    per_family: usize,
) -> Result<Vec<ProblemInstance>, EpisodeError> {
    let ordered = match select {
        None => all,
        Some(ids) => ids
            .iter()
            .map(|id| crate::registry::find(&all, id).cloned().map_err(EpisodeError::from))
            .collect::<Result<_, _>>()?,
    };
    let mut taken: BTreeMap<Option<Family>, usize> = BTreeMap::new();
    Ok(ordered
        .into_iter()
        .filter(|inst| {
            let n = taken.entry(inst.family()).or_insert(0);
            *n += 1;
            *n <= per_family
        })
        .collect())
}

impl Campaign {
    /// Loads instances, templates and taxonomy, and connects every model.
    /// Missing provider tokens fail here, before any episode runs.
    pub fn prepare(config: CampaignConfig) -> Result<Self, EpisodeError> {
        config.validate()?;
        let all = match &config.instances {
            Some(p) => load_instances(p)?,
            None => bundled_instances(),
        };
        let instances = select_instances(all, config.select.as_deref(), config.instances_per_family)?;
        if instances.is_empty() {
            return Err(EpisodeError::Config("no instances selected".into()));
        }
        let templates = match &config.templates {
            Some(d) => TemplateSet::from_dir(d)?,
            None => TemplateSet::bundled(),
        };
        let taxonomy = match &config.taxonomy {
            Some(p) => Taxonomy::load(p)?,
            None => Taxonomy::bundled(),
        };
        let gateways = config.models.iter().map(Gateway::new).collect::<Result<Vec<_>, _>>()?;
        let hash = campaign_hash(&config, &instances, &templates, &taxonomy);
        let repository = Repository::new(config.repository.clone());
        Ok(Self { config, instances, templates, taxonomy, gateways, cache: ReferenceCache::new(), repository, hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn directory(&self) -> PathBuf {
        self.repository.campaign_dir(&self.hash)
    }

    pub fn plan(&self) -> Vec<EpisodeSpec> {
        plan_episodes(self.instances.len(), self.gateways.len(), &self.config.variants, self.config.repetitions)
    }

    fn episode_dir(&self, spec: &EpisodeSpec) -> PathBuf {
        let inst = &self.instances[spec.instance];
        self.repository.episode_dir(
            &self.hash,
            &inst.family_slug(),
            &inst.id,
            self.gateways[spec.model].model_id(),
            spec.variant.as_str(),
            spec.repetition,
        )
    }

    /// Runs every planned episode that has no complete record yet.
    fn context(&self) -> EpisodeContext<'_> {
        EpisodeContext {
            templates: &self.templates,
            taxonomy: &self.taxonomy,
            cache: &self.cache,
            runner: &self.config.runner,
            stack: self.config.stack.as_deref().unwrap_or(DEFAULT_STACK),
            turns: self.config.turns,
            max_infra_errors: self.config.max_infra_errors,
            campaign_hash: &self.hash,
            repository: &self.repository,
        }
    }

    /// Runs one planned episode. A complete record is returned as is unless
    /// `force` is set, in which case the episode is deleted and rerun.
    pub fn run_one(&self, spec: &EpisodeSpec, force: bool) -> Result<(PathBuf, EpisodeRecord, bool), EpisodeError> {
        if spec.instance >= self.instances.len() || spec.model >= self.gateways.len() || spec.repetition == 0 {
            return Err(EpisodeError::Config(format!("episode {spec:?} is outside the campaign")));
        }
        let dir = self.episode_dir(spec);
        let record = dir.join(super::RECORD_FILE);
        if Repository::is_complete(&dir) {
            if !force {
                return Ok((record.clone(), Repository::read_record(&record)?, false));
            }
            std::fs::remove_dir_all(&dir)
                .map_err(|e| EpisodeError::Io { path: dir.display().to_string(), reason: e.to_string() })?;
        }
        write_campaign_manifest(self)?;
        let r = run_episode(
            &self.context(),
            &self.instances[spec.instance],
            &self.gateways[spec.model],
            spec.variant,
            spec.repetition,
        )?;
        Ok((record, r, true))
    }

    pub fn run(&self, on_event: &(dyn Fn(&EpisodeEvent) + Sync)) -> Result<CampaignSummary, EpisodeError> {
        let ctx = self.context();
        write_campaign_manifest(self)?;
        let plan = self.plan();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .map_err(|e| EpisodeError::Config(e.to_string()))?;
        let events: Vec<EpisodeEvent> = pool.install(|| {
            plan.par_iter()
                .map(|spec| {
                    let dir = self.episode_dir(spec);
                    let event = if Repository::is_complete(&dir) {
                        EpisodeEvent::Skipped { dir }
                    } else {
                        match run_episode(
                            &ctx,
                            &self.instances[spec.instance],
                            &self.gateways[spec.model],
                            spec.variant,
                            spec.repetition,
                        ) {
                            Ok(r) => EpisodeEvent::Finished { dir, success_turn: r.success_turn, status: r.status },
                            Err(e) => EpisodeEvent::Failed { dir, error: e.to_string() },
                        }
                    };
                    on_event(&event);
                    event
                })
                .collect()
        });
        let mut summary = CampaignSummary {
            campaign_hash: self.hash.clone(),
            directory: self.directory(),
            planned: plan.len(),
            skipped: 0,
            new_episodes: 0,
            invalid: 0,
            failed: Vec::new(),
            records: Vec::new(),
        };
        for e in events {
            match e {
                EpisodeEvent::Skipped { dir } => {
                    summary.skipped += 1;
                    summary.records.push(dir.join(super::RECORD_FILE));
                }
                EpisodeEvent::Finished { dir, status, .. } => {
                    summary.new_episodes += 1;
                    summary.invalid += usize::from(status == EpisodeStatus::Invalid);
                    summary.records.push(dir.join(super::RECORD_FILE));
                }
                EpisodeEvent::Failed { dir, error } => summary.failed.push(format!("{}: {error}", dir.display())),
            }
        }
        Ok(summary)
    }

    /// Complete records of this campaign.
    pub fn records(&self) -> Result<Vec<EpisodeRecord>, EpisodeError> {
        let dir = self.directory();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        Ok(Repository::load_all(&dir)?.into_iter().map(|(_, r)| r).collect())
    }
}

fn write_campaign_manifest(c: &Campaign) -> Result<(), EpisodeError> {
    let manifest = serde_json::json!({
        "campaign_hash": c.hash,
        "format_version": super::RECORD_FORMAT_VERSION,
        "instances": c.instances.iter().map(|i| &i.id).collect::<Vec<_>>(),
        "models": c.config.models.iter().map(|m| &m.id).collect::<Vec<_>>(),
        "variants": c.config.variants,
        "repetitions": c.config.repetitions,
        "turns": c.config.turns,
        "template_fingerprint": c.templates.fingerprint(),
    });
    super::write_atomic(
        &c.directory().join("campaign.json"),
        serde_json::to_string_pretty(&manifest).expect("json").as_bytes(),
    )
}

/// Identifies everything that shapes an episode's content: the selected
/// instances, prompt templates, model configurations, turn budget, software
/// stack text, runner parsing mode and timeout scale, and the taxonomy.
pub fn campaign_hash(
    config: &CampaignConfig,
    instances: &[ProblemInstance],
    templates: &TemplateSet,
    taxonomy: &Taxonomy,
) -> String {
    let mut h = Sha256::new();
    let mut feed = |tag: &str, bytes: &[u8]| {
        h.update(tag.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    feed("version", &super::RECORD_FORMAT_VERSION.to_le_bytes());
    for inst in instances {
        feed("instance", &serde_json::to_vec(inst).expect("json"));
        feed("content", instance_content_hash(inst).as_bytes());
    }
    feed("templates", templates.fingerprint().as_bytes());
    for m in &config.models {
        feed("model", &serde_json::to_vec(m).expect("json"));
    }
    feed("turns", &(config.turns as u64).to_le_bytes());
    feed("stack", config.stack.as_deref().unwrap_or(DEFAULT_STACK).as_bytes());
    feed("lenient", &[u8::from(config.runner.lenient)]);
    feed("timeout_scale", &config.runner.timeout_scale.to_le_bytes());
    feed("taxonomy", &serde_json::to_vec(taxonomy).expect("json"));
    hex::encode(&h.finalize()[..8])
}
