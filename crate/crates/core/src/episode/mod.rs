//! The generate-execute-verify-iterate loop for one episode, and campaigns
//! of many episodes.

mod campaign;
mod repository;

use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use campaign::{plan_episodes, Campaign, CampaignConfig, CampaignSummary, EpisodeEvent, EpisodeSpec, RunnerConfig};
pub use repository::{path_component, write_atomic, Repository, RECORD_FILE};

use crate::adjudicator::{classify, judge, no_code_verdict, AdjudicatorError, FailureCause, Taxonomy, Verdict};
use crate::gateway::{EpisodeKey, Gateway, GatewayError, ProviderMeta};
use crate::prompt::{render_coder, render_feedback, Conversation, PromptError, TemplateSet, Variant};
use crate::registry::{ProblemInstance, RegistryError, Tolerance};
use crate::sandbox::{run_script, ExecutionResult, ExitStatus, RunSpec, SandboxError};
use crate::solvers::{ReferenceCache, ReferenceResult, SolverError};

pub const RECORD_FORMAT_VERSION: u32 = 1;

/// Consecutive infrastructure errors after which an episode is abandoned.
pub const DEFAULT_MAX_INFRA_ERRORS: usize = 3;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("reference solver failed for {instance}: {source}")]
    Reference { instance: String, source: SolverError },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Adjudicator(#[from] AdjudicatorError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid campaign configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Complete,
    /// Abandoned after repeated infrastructure errors; excluded from statistics.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraError {
    pub turn: usize,
    pub stage: InfraStage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfraStage {
    Gateway,
    Sandbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based.
    pub turn: usize,
    pub prompt: String,
    pub raw_response: String,
    pub extracted_code: Option<String>,
    pub execution: Option<ExecutionResult>,
    pub verdict: Option<Verdict>,
    pub cause: Option<FailureCause>,
    pub provider: ProviderMeta,
    pub generation_latency_s: f64,
    /// Generation, execution and verification, including retried infrastructure errors.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub format_version: u32,
    pub campaign_hash: String,
    pub instance_id: String,
    pub descriptor: String,
    /// Short family label, `PF1` to `PF5`.
    pub family: String,
    pub model_id: String,
    pub variant: Variant,
    /// 1-based repetition index.
    pub repetition: usize,
    pub turn_budget: usize,
    pub reference: f64,
    pub reference_solver: String,
    pub tolerance: Tolerance,
    pub status: EpisodeStatus,
    pub turns: Vec<TurnRecord>,
    pub success_turn: Option<usize>,
    pub infrastructure_errors: Vec<InfraError>,
    pub turn1_duration_s: f64,
    pub total_duration_s: f64,
    pub started_unix_s: f64,
}

impl EpisodeRecord {
    pub fn excluded(&self) -> bool {
        self.status == EpisodeStatus::Invalid
    }

    /// Copy with every clock-dependent field zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.turn1_duration_s = 0.0;
        r.total_duration_s = 0.0;
        r.started_unix_s = 0.0;
        for t in &mut r.turns {
            t.wall_time_s = 0.0;
            t.generation_latency_s = 0.0;
            if let Some(e) = &mut t.execution {
                e.duration_s = 0.0;
            }
        }
        r
    }
}

/// Everything an episode needs besides the instance, model and variant.
pub struct EpisodeContext<'a> {
    pub templates: &'a TemplateSet,
    pub taxonomy: &'a Taxonomy,
    pub cache: &'a ReferenceCache,
    pub runner: &'a RunnerConfig,
    pub stack: &'a str,
    pub turns: usize,
    pub max_infra_errors: usize,
    pub campaign_hash: &'a str,
    pub repository: &'a Repository,
}

struct Produced {
    raw: String,
    code: Option<String>,
    execution: Option<ExecutionResult>,
    provider: ProviderMeta,
    latency_s: f64,
}

/// Output shown to the model in the next feedback prompt.
pub fn run_output(exec: Option<&ExecutionResult>, timeout_s: f64) -> String {
    let Some(exec) = exec else {
        return "(no script was found in the reply; send the complete script in one ```python code block)".into();
    };
    let mut s = exec.stdout.clone();
    let push_block = |s: &mut String, text: &str| {
        if !s.is_empty() && !s.ends_with('\n') {
            s.push('\n');
        }
        s.push_str(text);
    };
    if !exec.stderr.is_empty() {
        push_block(&mut s, &exec.stderr);
    }
    if exec.timed_out {
        push_block(&mut s, &format!("[execution stopped: time limit of {timeout_s} s exceeded]\n"));
    } else if let ExitStatus::Code(c) = exec.exit_status {
        if c != 0 {
            push_block(&mut s, &format!("[process exited with status {c}]\n"));
        }
    } else if let ExitStatus::Killed(sig) = exec.exit_status {
        push_block(&mut s, &format!("[process killed by signal {sig}]\n"));
    }
    if s.trim().is_empty() {
        s = "(the script printed nothing)".into();
    }
    s
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn produce(
    gateway: &Gateway,
    pending: &Conversation,
    key: &EpisodeKey,
    spec: &dyn Fn(String) -> RunSpec,
) -> Result<Produced, (InfraStage, String)> {
    let generation = gateway.generate(pending, key).map_err(|e| (InfraStage::Gateway, e.to_string()))?;
    let execution = match &generation.extracted_code {
        Some(code) => Some(run_script(&spec(code.clone())).map_err(|e: SandboxError| (InfraStage::Sandbox, e.to_string()))?),
        None => None,
    };
    Ok(Produced {
        raw: generation.raw_text,
        code: generation.extracted_code,
        execution,
        provider: generation.meta,
        latency_s: generation.latency_s,
    })
}

/// Runs one episode and persists it under the repository.
///
/// The reference value is computed (or fetched from the cache) on a separate
/// thread while turn 1 is generated and executed.
pub fn run_episode(
    ctx: &EpisodeContext<'_>,
    instance: &ProblemInstance,
    gateway: &Gateway,
    variant: Variant,
    repetition: usize,
) -> Result<EpisodeRecord, EpisodeError> {
    if ctx.turns == 0 {
        return Err(EpisodeError::Config("turn budget must be at least 1".into()));
    }
    let family = instance.family().ok_or_else(|| RegistryError::UnknownDescriptor {
        id: instance.id.clone(),
        descriptor: instance.descriptor.clone(),
    })?;
    let dir = ctx.repository.episode_dir(
        ctx.campaign_hash,
        &instance.family_slug(),
        &instance.id,
        gateway.model_id(),
        variant.as_str(),
        repetition,
    );
    Repository::clear_partial(&dir)?;
    let key = EpisodeKey { instance_id: instance.id.clone(), variant, repetition };
    let timeout_s = instance.timeout_s * ctx.runner.timeout_scale;
    let spec = |script: String| ctx.runner.run_spec(script, timeout_s);
    let coder = ctx.templates.coder(&instance.prompt_template_id)?;
    let coder_prompt = render_coder(instance, coder, ctx.stack)?;
    let started_unix_s = now_unix();
    let start = Instant::now();

    let mut conv = match gateway.system_prompt() {
        Some(s) => Conversation::with_system(s),
        None => Conversation::new(),
    };
    let mut turns: Vec<TurnRecord> = Vec::new();
    let mut infra: Vec<InfraError> = Vec::new();
    let mut status = EpisodeStatus::Complete;
    let mut previous_output = String::new();
    let mut reference: Option<ReferenceResult> = None;

    thread::scope(|scope| -> Result<(), EpisodeError> {
        let mut pending_reference = Some(scope.spawn(|| ctx.cache.get_or_solve(instance)));
        let mut consecutive = 0;
        for t in 1..=ctx.turns {
            let prompt = if t == 1 {
                coder_prompt.clone()
            } else {
                let expected = (variant == Variant::Informed).then(|| reference.as_ref().map(|r| r.value)).flatten();
                render_feedback(ctx.templates, &conv, &previous_output, variant, expected)?
            };
            let pending = conv.with_user(prompt.clone())?;
            let turn_start = Instant::now();
            let produced = loop {
                match produce(gateway, &pending, &key, &spec) {
                    Ok(p) => {
                        consecutive = 0;
                        break Some(p);
                    }
                    Err((stage, message)) => {
                        log::warn!("{} {} rep{repetition} turn {t}: {message}", instance.id, gateway.model_id());
                        infra.push(InfraError { turn: t, stage, message });
                        consecutive += 1;
                        if consecutive >= ctx.max_infra_errors {
                            break None;
                        }
                    }
                }
            };
            if let Some(handle) = pending_reference.take() {
                let r = handle.join().expect("reference thread panicked");
                reference = Some(r.map_err(|source| EpisodeError::Reference { instance: instance.id.clone(), source })?);
            }
            let Some(p) = produced else {
                status = EpisodeStatus::Invalid;
                break;
            };
            let reference_value = reference.as_ref().expect("joined above").value;
            let verdict = match &p.execution {
                Some(exec) => judge(exec, reference_value, &instance.tolerance, ctx.runner.lenient)?,
                None => no_code_verdict(reference_value, &instance.tolerance),
            };
            let cause = if verdict.passed() {
                None
            } else {
                Some(classify(ctx.taxonomy, p.execution.as_ref(), &verdict)?)
            };
            previous_output = run_output(p.execution.as_ref(), timeout_s);
            conv = conv.append_turn(prompt.clone(), p.raw.clone())?;
            let passed = verdict.passed();
            let record = TurnRecord {
                turn: t,
                prompt,
                raw_response: p.raw,
                extracted_code: p.code,
                execution: p.execution,
                verdict: Some(verdict),
                cause,
                provider: p.provider,
                generation_latency_s: p.latency_s,
                wall_time_s: turn_start.elapsed().as_secs_f64(),
            };
            Repository::write_turn(&dir, &record)?;
            turns.push(record);
            if passed {
                break;
            }
        }
        if let Some(handle) = pending_reference.take() {
            let r = handle.join().expect("reference thread panicked");
            reference = Some(r.map_err(|source| EpisodeError::Reference { instance: instance.id.clone(), source })?);
        }
        Ok(())
    })?;

    let reference = reference.expect("reference joined");
    let success_turn = turns.iter().find(|t| t.verdict.as_ref().is_some_and(Verdict::passed)).map(|t| t.turn);
    let record = EpisodeRecord {
        format_version: RECORD_FORMAT_VERSION,
        campaign_hash: ctx.campaign_hash.to_string(),
        instance_id: instance.id.clone(),
        descriptor: instance.descriptor.clone(),
        family: family.short_id().to_string(),
        model_id: gateway.model_id().to_string(),
        variant,
        repetition,
        turn_budget: ctx.turns,
        reference: reference.value,
        reference_solver: reference.meta.solver.clone(),
        tolerance: instance.tolerance,
        status,
        success_turn,
        turn1_duration_s: turns.first().map_or(0.0, |t| t.wall_time_s),
        total_duration_s: start.elapsed().as_secs_f64(),
        started_unix_s,
        infrastructure_errors: infra,
        turns,
    };
    Repository::write_record(&dir, &record)?;
    Ok(record)
}
