//! The experiment loop: round 0 sends every task, later rounds resend only
//! the failures, each exchange is judged immediately and appended to the
//! transcript before the next chunk starts. Runs are resumable from the
//! transcript plus the saved config, and byte-reproducible under the mock
//! backend.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::metrics::compute_metrics;
use super::report::{render_csv, render_markdown};
use super::transcript::{
    repair_transcript, FailureRecord, TranscriptRecord, TranscriptWriter, Verdict,
};
use super::{CorrectionMode, ExtractionMode, HarnessError, ResolvedConfig};
use crate::bwgen::load_dataset;
use crate::crt::{check_answer, load_crt_dataset, parse_linear_answer, LinearForm};
use crate::extraction::{extract_crt_answer, extract_plan, summarize_crt_llm, summarize_plan_llm};
use crate::gateway::{ChatMessage, ChatRequest, Gateway, TokenUsage};
use crate::par;
use crate::prompting::{
    build_bw_task_prompt, build_crt_task_prompt, build_error_prompt, build_repeat_prompt,
    PromptBundle, PromptFamily, BW_TASK_TEMPLATE_VERSION, CRT_SUMMARY_VERSION,
    CRT_TASK_TEMPLATE_VERSION, ERROR_WRAPPER_VERSION, PLAN_SUMMARY_VERSION,
};
use crate::strips::{render_plan, validate_plan, Task};

pub enum AnyDataset {
    Bw(crate::bwgen::GeneratedDataset),
    Crt(crate::crt::CrtDataset),
}

impl AnyDataset {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyDataset::Bw(_) => "bw",
            AnyDataset::Crt(_) => "crt",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyDataset::Bw(ds) => ds.tasks.len(),
            AnyDataset::Crt(ds) => ds.tasks.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dispatches on the manifest's `kind` field.
pub fn load_any_dataset(dir: &Path) -> Result<AnyDataset, HarnessError> {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    match manifest.get("kind").and_then(|k| k.as_str()) {
        Some("bw") => Ok(AnyDataset::Bw(load_dataset(dir)?)),
        Some("crt") => Ok(AnyDataset::Crt(load_crt_dataset(dir)?)),
        other => Err(HarnessError::Dataset(format!(
            "manifest kind {other:?} is not a known dataset kind"
        ))),
    }
}

#[derive(Clone, Copy, Default, Debug)]
pub struct RunOptions {
    /// Stop after this many freshly appended exchanges (crash simulation,
    /// budget guard). The run reports `completed = false` and can resume.
    pub max_exchanges: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RoundResult {
    pub round: u32,
    pub attempted: BTreeSet<String>,
    pub solved: BTreeSet<String>,
    pub errored: BTreeSet<String>,
    pub usage_sum: TokenUsage,
}

impl RoundResult {
    fn new(round: u32) -> RoundResult {
        RoundResult {
            round,
            attempted: BTreeSet::new(),
            solved: BTreeSet::new(),
            errored: BTreeSet::new(),
            usage_sum: TokenUsage::ZERO,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub rounds: Vec<RoundResult>,
    pub records: Vec<TranscriptRecord>,
    pub completed: bool,
}

#[derive(Serialize, Deserialize)]
struct RunFile {
    run_id: String,
    /// Base for strategy and script paths inside the config, kept so resume
    /// resolves them the same way the original run did.
    config_dir: PathBuf,
    config: ResolvedConfig,
}

/// What the runner needs per task: identity, the round-0 prompt, and enough
/// ground truth to judge any response.
enum TaskCtx {
    Bw { task: Task, original: PromptBundle },
    Crt { truth: LinearForm, original: PromptBundle },
}

impl TaskCtx {
    fn id(&self) -> &str {
        match self {
            TaskCtx::Bw { original, .. } | TaskCtx::Crt { original, .. } => &original.task_ref,
        }
    }

    fn original(&self) -> &PromptBundle {
        match self {
            TaskCtx::Bw { original, .. } | TaskCtx::Crt { original, .. } => original,
        }
    }
}

struct TaskState {
    solved: bool,
    next: PromptBundle,
}

/// Result of judging one response, with the prompt the task should get next
/// round if it remains unsolved.
struct Judgement {
    verdict: Verdict,
    failure: Option<FailureRecord>,
    next: Option<PromptBundle>,
    summarizer_used: bool,
}

fn judge(
    ctx: &TaskCtx,
    response: &str,
    config: &ResolvedConfig,
    gateway: &Gateway,
) -> Result<Judgement, HarnessError> {
    match ctx {
        TaskCtx::Bw { task, original } => {
            let (plan, summarizer_used) = match config.extraction_mode {
                ExtractionMode::Rule => (extract_plan(response), false),
                ExtractionMode::Llm => (
                    summarize_plan_llm(response, gateway, &config.summarizer_model)?,
                    true,
                ),
            };
            let report = validate_plan(task, &plan);
            if report.valid() {
                return Ok(Judgement {
                    verdict: Verdict::Correct,
                    failure: None,
                    next: None,
                    summarizer_used,
                });
            }
            let failure = report.failure.as_ref().map(|f| FailureRecord {
                step: f.step,
                action: f.action.to_string(),
            });
            let bad_solution = if plan.is_empty() {
                response.trim().to_string()
            } else {
                render_plan(&plan)
            };
            let next = match config.correction_mode {
                CorrectionMode::Repeat => build_repeat_prompt(original),
                CorrectionMode::ErrorFeedback => build_error_prompt(original, &bad_solution, &report)
                    .expect("report describes a failure"),
            };
            Ok(Judgement {
                verdict: Verdict::Incorrect,
                failure,
                next: Some(next),
                summarizer_used,
            })
        }
        TaskCtx::Crt { truth, original } => {
            let span = extract_crt_answer(response);
            let mut form = parse_linear_answer(&span);
            let mut summarizer_used = false;
            if config.extraction_mode == ExtractionMode::Llm && !form.is_present() && !span.is_empty()
            {
                form = summarize_crt_llm(&span, gateway, &config.summarizer_model)?;
                summarizer_used = true;
            }
            if check_answer(&form, truth) {
                Ok(Judgement {
                    verdict: Verdict::Correct,
                    failure: None,
                    next: None,
                    summarizer_used,
                })
            } else {
                Ok(Judgement {
                    verdict: Verdict::Incorrect,
                    failure: None,
                    next: Some(build_repeat_prompt(original)),
                    summarizer_used,
                })
            }
        }
    }
}

fn template_versions(ctx: &TaskCtx, family: PromptFamily, summarizer_used: bool) -> BTreeMap<String, String> {
    let mut versions = BTreeMap::new();
    let task_version = match ctx {
        TaskCtx::Bw { .. } => BW_TASK_TEMPLATE_VERSION,
        TaskCtx::Crt { .. } => CRT_TASK_TEMPLATE_VERSION,
    };
    versions.insert("task".to_string(), task_version.to_string());
    if family == PromptFamily::ErrorCorrection {
        versions.insert("correction".to_string(), ERROR_WRAPPER_VERSION.to_string());
    }
    if summarizer_used {
        let v = match ctx {
            TaskCtx::Bw { .. } => PLAN_SUMMARY_VERSION,
            TaskCtx::Crt { .. } => CRT_SUMMARY_VERSION,
        };
        versions.insert("summary".to_string(), v.to_string());
    }
    versions
}

fn request_for(bundle: &PromptBundle, round: u32, config: &ResolvedConfig) -> ChatRequest {
    let mut messages = Vec::new();
    if let Some(system) = &bundle.system {
        messages.push(ChatMessage::system(system));
    }
    messages.push(ChatMessage::user(&bundle.user));
    let mut request = ChatRequest::new(&config.model, messages);
    // Distinct per round so repeat-mode resubmissions are distinct cache
    // keys even though the user text is byte-identical.
    request.params.seed = Some(config.seed.wrapping_add(u64::from(round)));
    request
}

fn now_ms(mock: bool) -> u64 {
    if mock {
        return 0;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// One freshly computed exchange, ready to append.
struct Draft {
    idx: usize,
    record: TranscriptRecord,
    next: Option<PromptBundle>,
    solved: bool,
}

fn build_contexts(dataset: &AnyDataset, strategy: Option<&crate::prompting::Strategy>) -> Vec<TaskCtx> {
    match dataset {
        AnyDataset::Bw(ds) => ds
            .tasks
            .iter()
            .map(|task| TaskCtx::Bw {
                task: task.clone(),
                original: build_bw_task_prompt(task, strategy),
            })
            .collect(),
        AnyDataset::Crt(ds) => ds
            .tasks
            .iter()
            .map(|task| TaskCtx::Crt {
                truth: task.truth,
                original: build_crt_task_prompt(task, strategy),
            })
            .collect(),
    }
}

/// Resolves an [`super::ExperimentConfig`] against the directory holding the
/// config file and starts the run. Relative dataset and output paths are
/// taken relative to that directory.
pub fn run_from_config(
    config: &super::ExperimentConfig,
    config_dir: &Path,
    options: RunOptions,
) -> Result<RunOutcome, HarnessError> {
    let dataset_dir = config_dir.join(&config.dataset);
    let dataset = load_any_dataset(&dataset_dir)?;
    let mut resolved = config.resolve(dataset.kind(), dataset.len())?;
    resolved.dataset = dataset_dir;
    resolved.output_dir = config_dir.join(&resolved.output_dir);
    run_experiment(&resolved, config_dir, options)
}

/// Starts a fresh run in `config.output_dir`. Fails if the directory already
/// holds a transcript; use `resume_experiment` for that.
pub fn run_experiment(
    config: &ResolvedConfig,
    config_dir: &Path,
    options: RunOptions,
) -> Result<RunOutcome, HarnessError> {
    let transcript_path = config.output_dir.join("transcript.jsonl");
    if transcript_path.exists() && fs::metadata(&transcript_path)?.len() > 0 {
        return Err(HarnessError::Config(format!(
            "{} already contains a transcript; resume instead",
            config.output_dir.display()
        )));
    }
    run_inner(config, config_dir, options)
}

/// Continues an interrupted run from its output directory alone.
pub fn resume_experiment(output_dir: &Path, options: RunOptions) -> Result<RunOutcome, HarnessError> {
    let run_file: RunFile =
        serde_json::from_str(&fs::read_to_string(output_dir.join("run.json"))?)?;
    run_inner(&run_file.config, &run_file.config_dir, options)
}

fn run_inner(
    config: &ResolvedConfig,
    config_dir: &Path,
    options: RunOptions,
) -> Result<RunOutcome, HarnessError> {
    let dataset = load_any_dataset(&config.dataset)?;
    if dataset.kind() != config.dataset_kind {
        return Err(HarnessError::Config(format!(
            "dataset kind changed from {} to {}",
            config.dataset_kind,
            dataset.kind()
        )));
    }
    let strategy = config.resolve_strategy(config_dir)?;
    let gateway = config.build_gateway(config_dir)?;
    let spec = gateway.model_spec(&config.model)?.clone();
    let run_id = config.run_id();
    let is_mock = config.backend.kind == "mock";

    fs::create_dir_all(&config.output_dir)?;
    let config_dir_abs =
        fs::canonicalize(config_dir).unwrap_or_else(|_| config_dir.to_path_buf());
    let run_file_path = config.output_dir.join("run.json");
    let run_file = RunFile {
        run_id: run_id.clone(),
        config_dir: config_dir_abs,
        config: config.clone(),
    };
    let mut run_json = serde_json::to_string_pretty(&run_file)?;
    run_json.push('\n');
    fs::write(&run_file_path, run_json)?;

    let transcript_path = config.output_dir.join("transcript.jsonl");
    let existing: Vec<TranscriptRecord> = if transcript_path.exists() {
        repair_transcript(&transcript_path)?
    } else {
        Vec::new()
    };
    for record in &existing {
        if record.run_id != run_id {
            return Err(HarnessError::Config(format!(
                "transcript belongs to run {}, not {run_id}",
                record.run_id
            )));
        }
    }
    let mut done: HashMap<(u32, String), TranscriptRecord> = existing
        .iter()
        .map(|r| ((r.round, r.task_id.clone()), r.clone()))
        .collect();

    let contexts = build_contexts(&dataset, strategy.as_ref());
    let mut states: Vec<TaskState> = contexts
        .iter()
        .map(|ctx| TaskState {
            solved: false,
            next: ctx.original().clone(),
        })
        .collect();

    let mut writer = TranscriptWriter::open(&transcript_path)?;
    let mut all_records = existing;
    let mut rounds = Vec::new();
    let mut budget = options.max_exchanges;
    let mut completed = true;

    'rounds: for round in 0..=config.rounds {
        let pending: Vec<usize> = (0..contexts.len()).filter(|&i| !states[i].solved).collect();
        if pending.is_empty() {
            break;
        }
        let mut result = RoundResult::new(round);
        let chunk_size = config.concurrency.max(1) * 2;
        let mut cursor = 0usize;
        while cursor < pending.len() {
            // Replay already-recorded exchanges in order: this advances the
            // scripted backend and rebuilds correction prompts, so resumed
            // runs continue exactly where the transcript stops.
            while cursor < pending.len() {
                let i = pending[cursor];
                let key = (round, contexts[i].id().to_string());
                let Some(record) = done.remove(&key) else {
                    break;
                };
                replay_record(&contexts[i], &mut states[i], &record, round, config, &gateway, is_mock)?;
                apply_to_round(&mut result, &record);
                cursor += 1;
            }
            if cursor >= pending.len() {
                break;
            }

            // Fresh work, one bounded chunk at a time so every computed
            // exchange is also persisted before more work starts.
            let mut take = chunk_size.min(pending.len() - cursor);
            if let Some(left) = budget {
                if left == 0 {
                    completed = false;
                    break 'rounds;
                }
                take = take.min(left as usize);
            }
            let batch: Vec<usize> = pending[cursor..cursor + take]
                .iter()
                .copied()
                .take_while(|&i| !done.contains_key(&(round, contexts[i].id().to_string())))
                .collect();
            if batch.len() < take {
                // A recorded exchange interrupts the fresh stretch; replay
                // it on the next loop pass.
                take = batch.len().max(1);
            }
            if batch.is_empty() {
                continue;
            }
            let drafts = par::map_ordered(batch, config.concurrency, |i| {
                exchange(&contexts[i], &states[i], i, round, config, &gateway, &run_id, is_mock)
            });
            for draft in drafts {
                let draft = draft?;
                writer.append(&draft.record)?;
                if let Some(left) = &mut budget {
                    *left -= 1;
                }
                apply_to_round(&mut result, &draft.record);
                all_records.push(draft.record);
                states[draft.idx].solved = draft.solved;
                if let Some(next) = draft.next {
                    states[draft.idx].next = next;
                }
            }
            cursor += take;
        }
        rounds.push(result);
    }

    if completed {
        let metrics = compute_metrics(&all_records, config.dataset_size, &spec);
        fs::write(config.output_dir.join("report.md"), render_markdown(&metrics))?;
        fs::write(config.output_dir.join("report.csv"), render_csv(&metrics))?;
        let mut metrics_json = serde_json::to_string_pretty(&metrics)?;
        metrics_json.push('\n');
        fs::write(config.output_dir.join("metrics.json"), metrics_json)?;
    }

    Ok(RunOutcome {
        run_id,
        rounds,
        records: all_records,
        completed,
    })
}

fn apply_to_round(result: &mut RoundResult, record: &TranscriptRecord) {
    result.attempted.insert(record.task_id.clone());
    match record.verdict {
        Verdict::Correct => {
            result.solved.insert(record.task_id.clone());
        }
        Verdict::Error => {
            result.errored.insert(record.task_id.clone());
        }
        Verdict::Incorrect => {}
    }
    result.usage_sum.add(&record.usage.into());
}

/// Re-derives the state transition a recorded exchange caused. Under the
/// mock backend the request is re-issued so scripted response sequences and
/// the cache advance exactly as they did originally; the recorded text must
/// match, which doubles as an integrity check.
fn replay_record(
    ctx: &TaskCtx,
    state: &mut TaskState,
    record: &TranscriptRecord,
    round: u32,
    config: &ResolvedConfig,
    gateway: &Gateway,
    is_mock: bool,
) -> Result<(), HarnessError> {
    if is_mock {
        let request = request_for(&state.next, round, config);
        match gateway.complete(&request) {
            Ok(exchange) => {
                if record.verdict != Verdict::Error && exchange.response_text != record.response_text {
                    return Err(HarnessError::ReplayMismatch(format!(
                        "task {} round {round}: script now answers differently",
                        record.task_id
                    )));
                }
            }
            Err(_) if record.verdict == Verdict::Error => {}
            Err(e) => return Err(HarnessError::ReplayMismatch(e.to_string())),
        }
    }
    if record.verdict == Verdict::Error {
        return Ok(());
    }
    let judgement = judge(ctx, &record.response_text, config, gateway)?;
    if judgement.verdict != record.verdict {
        return Err(HarnessError::ReplayMismatch(format!(
            "task {} round {round}: recorded verdict {:?} but judging now gives {:?}",
            record.task_id, record.verdict, judgement.verdict
        )));
    }
    state.solved = judgement.verdict == Verdict::Correct;
    if let Some(next) = judgement.next {
        state.next = next;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn exchange(
    ctx: &TaskCtx,
    state: &TaskState,
    idx: usize,
    round: u32,
    config: &ResolvedConfig,
    gateway: &Gateway,
    run_id: &str,
    is_mock: bool,
) -> Result<Draft, HarnessError> {
    let bundle = &state.next;
    let request = request_for(bundle, round, config);
    let prompt_hash = request.content_hash();
    let started_at_ms = now_ms(is_mock);
    match gateway.complete(&request) {
        Ok(result) => {
            let cost_usd = gateway.exchange_cost(&result)?;
            // A summarizer failure still billed the primary response, so the
            // exchange is recorded as an error rather than aborting the run.
            let judgement = judge(ctx, &result.response_text, config, gateway).unwrap_or(Judgement {
                verdict: Verdict::Error,
                failure: None,
                next: None,
                summarizer_used: true,
            });
            let finished_at_ms = now_ms(is_mock);
            let record = TranscriptRecord {
                run_id: run_id.to_string(),
                task_id: ctx.id().to_string(),
                round,
                family: bundle.family,
                prompt_hash,
                response_text: result.response_text,
                usage: result.usage.into(),
                cost_usd,
                verdict: judgement.verdict,
                failure: judgement.failure,
                started_at_ms,
                finished_at_ms,
                template_versions: template_versions(ctx, bundle.family, judgement.summarizer_used),
            };
            Ok(Draft {
                idx,
                record,
                next: judgement.next,
                solved: judgement.verdict == Verdict::Correct,
            })
        }
        Err(_) => {
            // Transport-level failure: the task is carried to the next
            // round unsolved, with the same prompt.
            let finished_at_ms = now_ms(is_mock);
            let record = TranscriptRecord {
                run_id: run_id.to_string(),
                task_id: ctx.id().to_string(),
                round,
                family: bundle.family,
                prompt_hash,
                response_text: String::new(),
                usage: TokenUsage::ZERO.into(),
                cost_usd: 0.0,
                verdict: Verdict::Error,
                failure: None,
                started_at_ms,
                finished_at_ms,
                template_versions: template_versions(ctx, bundle.family, false),
            };
            Ok(Draft {
                idx,
                record,
                next: None,
                solved: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bwgen::{dataset, write_dataset, BwDatasetSpec, InclusiveRange};
    use crate::crt::{builtin_scenarios, crt_dataset, write_crt_dataset, CrtDatasetSpec, CrtTask};
    use crate::harness::{read_transcript, ExperimentConfig};
    use crate::planner::strategy_plan;
    use crate::prompting::{BW_TASK_TEMPLATE_VERSION, ERROR_WRAPPER_VERSION};
    use crate::strips::render_task;
    use serde_json::json;
    use tempfile::TempDir;

    struct Fixture {
        dir: TempDir,
        rules: Vec<serde_json::Value>,
        ids: Vec<String>,
    }

    impl Fixture {
        fn config(&self, output: &str, concurrency: usize) -> ExperimentConfig {
            self.config_with(output, concurrency, &[])
        }

        fn config_with(
            &self,
            output: &str,
            concurrency: usize,
            extra: &[(&str, serde_json::Value)],
        ) -> ExperimentConfig {
            let mut value = json!({
                "dataset": "data",
                "model": "o1",
                "seed": 9,
                "concurrency": concurrency,
                "output_dir": output,
                "backend": {"kind": "mock", "script": self.rules},
            });
            for (key, v) in extra {
                value[*key] = v.clone();
            }
            serde_json::from_value(value).unwrap()
        }

        fn run(
            &self,
            output: &str,
            concurrency: usize,
            options: RunOptions,
        ) -> Result<RunOutcome, HarnessError> {
            run_from_config(&self.config(output, concurrency), self.dir.path(), options)
        }

        fn transcript_bytes(&self, output: &str) -> Vec<u8> {
            fs::read(self.dir.path().join(output).join("transcript.jsonl")).unwrap()
        }
    }

    /// Two generated tasks behind per-task script rules keyed on the rendered
    /// task text: the first needs three attempts (goal left unsatisfied, then
    /// an inapplicable second step, then the real plan), the second answers
    /// correctly at once.
    fn bw_fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let spec = BwDatasetSpec::new(InclusiveRange::new(3, 4), InclusiveRange::new(2, 8), 2, 11);
        let ds = dataset(&spec).unwrap();
        write_dataset(&dir.path().join("data"), &ds).unwrap();
        let mut rules = Vec::new();
        let mut ids = Vec::new();
        for (i, task) in ds.tasks.iter().enumerate() {
            let plan = strategy_plan(task).unwrap();
            let correct = render_plan(&plan);
            let responses = if i == 0 {
                let short = render_plan(&plan[..plan.len() - 1]);
                let stuck = render_plan(&[plan[0].clone(), plan[0].clone()]);
                vec![short, stuck, correct]
            } else {
                vec![correct]
            };
            let needle = render_task(task).trim_end().to_string();
            rules.push(json!({ "contains": needle, "responses": responses }));
            ids.push(task.id.clone());
        }
        assert_ne!(rules[0]["contains"], rules[1]["contains"]);
        Fixture { dir, rules, ids }
    }

    #[test]
    fn error_feedback_resubmits_only_failures() {
        let fx = bw_fixture();
        let outcome = fx.run("out", 2, RunOptions::default()).unwrap();
        assert!(outcome.completed);
        let slow = fx.ids[0].clone();
        let fast = fx.ids[1].clone();

        assert_eq!(outcome.rounds.len(), 3);
        assert_eq!(outcome.rounds[0].attempted.len(), 2);
        assert_eq!(outcome.rounds[0].solved, BTreeSet::from([fast.clone()]));
        assert_eq!(outcome.rounds[1].attempted, BTreeSet::from([slow.clone()]));
        assert!(outcome.rounds[1].solved.is_empty());
        assert_eq!(outcome.rounds[2].solved, BTreeSet::from([slow.clone()]));
        for pair in outcome.rounds.windows(2) {
            let carried: BTreeSet<String> =
                pair[0].attempted.difference(&pair[0].solved).cloned().collect();
            assert_eq!(pair[1].attempted, carried);
        }
        assert!(outcome.rounds[0].usage_sum.prompt_tokens > 0);

        assert_eq!(outcome.records.len(), 4);
        let find = |task: &str, round: u32| {
            outcome
                .records
                .iter()
                .find(|r| r.task_id == task && r.round == round)
                .unwrap()
        };
        assert_eq!(find(&fast, 0).verdict, Verdict::Correct);
        assert_eq!(find(&fast, 0).family, PromptFamily::Task);
        assert_eq!(
            find(&fast, 0).template_versions.get("task").map(String::as_str),
            Some(BW_TASK_TEMPLATE_VERSION)
        );
        assert_eq!(find(&slow, 0).verdict, Verdict::Incorrect);
        assert!(find(&slow, 0).failure.is_none(), "prefix of a plan executes");
        let retry = find(&slow, 1);
        assert_eq!(retry.verdict, Verdict::Incorrect);
        assert_eq!(retry.family, PromptFamily::ErrorCorrection);
        assert_eq!(
            retry.template_versions.get("correction").map(String::as_str),
            Some(ERROR_WRAPPER_VERSION)
        );
        assert_eq!(retry.failure.as_ref().unwrap().step, 2);
        assert_eq!(find(&slow, 2).verdict, Verdict::Correct);
        assert_ne!(find(&slow, 0).prompt_hash, retry.prompt_hash);

        let out = fx.dir.path().join("out");
        for name in ["run.json", "transcript.jsonl", "report.md", "report.csv", "metrics.json"] {
            assert!(out.join(name).exists(), "{name} missing");
        }
        let (records, torn) = read_transcript(&out.join("transcript.jsonl")).unwrap();
        assert!(!torn);
        assert_eq!(records.len(), 4);
    }

    #[test]
    fn identical_experiments_share_bytes_across_dirs_and_threads() {
        let fx = bw_fixture();
        let a = fx.run("out-a", 1, RunOptions::default()).unwrap();
        let b = fx.run("out-b", 4, RunOptions::default()).unwrap();
        let c = fx.run("out-c", 2, RunOptions::default()).unwrap();
        assert_eq!(a.run_id, b.run_id);
        assert_eq!(a.run_id, c.run_id);
        let bytes = fx.transcript_bytes("out-a");
        assert!(!bytes.is_empty());
        assert_eq!(bytes, fx.transcript_bytes("out-b"));
        assert_eq!(bytes, fx.transcript_bytes("out-c"));
        let metrics = fs::read(fx.dir.path().join("out-a/metrics.json")).unwrap();
        assert_eq!(metrics, fs::read(fx.dir.path().join("out-b/metrics.json")).unwrap());
    }

    #[test]
    fn interruption_plus_resume_matches_an_uninterrupted_run() {
        let fx = bw_fixture();
        let full = fx.run("out-full", 2, RunOptions::default()).unwrap();
        assert!(full.completed);
        let baseline = fx.transcript_bytes("out-full");

        let again = fx.run("out-full", 2, RunOptions::default());
        assert!(matches!(again, Err(HarnessError::Config(_))));

        for cutoff in 1..=3u64 {
            let out = format!("out-cut{cutoff}");
            let options = RunOptions {
                max_exchanges: Some(cutoff),
            };
            let interrupted = fx.run(&out, 2, options).unwrap();
            assert!(!interrupted.completed);
            let dir = fx.dir.path().join(&out);
            assert!(!dir.join("metrics.json").exists());

            let resumed = resume_experiment(&dir, RunOptions::default()).unwrap();
            assert!(resumed.completed);
            assert_eq!(resumed.records.len(), 4);
            assert_eq!(fx.transcript_bytes(&out), baseline, "cutoff {cutoff}");
            assert!(dir.join("metrics.json").exists());
        }

        // Resuming a finished run replays everything and appends nothing.
        let replayed = resume_experiment(&fx.dir.path().join("out-full"), RunOptions::default()).unwrap();
        assert!(replayed.completed);
        assert_eq!(replayed.records.len(), 4);
        assert_eq!(fx.transcript_bytes("out-full"), baseline);
    }

    #[test]
    fn unscripted_tasks_record_errors_and_keep_retrying() {
        let mut fx = bw_fixture();
        fx.rules.remove(0);
        let outcome = fx.run("out", 2, RunOptions::default()).unwrap();
        assert!(outcome.completed);
        let lost = fx.ids[0].clone();

        // Default budget for this dataset kind is four correction rounds.
        assert_eq!(outcome.rounds.len(), 5);
        for round in &outcome.rounds {
            assert!(round.attempted.contains(&lost));
            assert_eq!(round.errored, BTreeSet::from([lost.clone()]));
        }
        assert_eq!(outcome.records.len(), 6);
        for record in outcome.records.iter().filter(|r| r.task_id == lost) {
            assert_eq!(record.verdict, Verdict::Error);
            assert!(record.response_text.is_empty());
            assert_eq!(record.cost_usd, 0.0);
            assert_eq!(record.family, PromptFamily::Task);
        }

        let bytes = fx.transcript_bytes("out");
        let replayed = resume_experiment(&fx.dir.path().join("out"), RunOptions::default()).unwrap();
        assert!(replayed.completed);
        assert_eq!(fx.transcript_bytes("out"), bytes);
    }

    #[test]
    fn rounds_zero_means_one_attempt_per_task() {
        let fx = bw_fixture();
        let config = fx.config_with("out", 2, &[("rounds", json!(0))]);
        let outcome = run_from_config(&config, fx.dir.path(), RunOptions::default()).unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.rounds.len(), 1);
        assert_eq!(outcome.records.len(), 2);
        assert_eq!(outcome.rounds[0].solved.len(), 1);
        assert!(fx.dir.path().join("out/metrics.json").exists());
    }

    fn crt_answer(task: &CrtTask) -> String {
        format!(
            "The pattern gives @@{}Y - {}X@@",
            task.truth.a_y.unwrap(),
            task.truth.b_x.unwrap()
        )
    }

    #[test]
    fn repeat_mode_reasks_the_failures_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let scenarios = &builtin_scenarios()[..1];
        let spec = CrtDatasetSpec {
            per_scenario: 2,
            seed: 3,
        };
        let ds = crt_dataset(scenarios, &spec).unwrap();
        write_crt_dataset(&dir.path().join("data"), &ds).unwrap();
        let rules: Vec<serde_json::Value> = ds
            .tasks
            .iter()
            .enumerate()
            .map(|(i, task)| {
                let responses = if i == 0 {
                    vec!["Let me think about the growth first.".to_string(), crt_answer(task)]
                } else {
                    vec![crt_answer(task)]
                };
                json!({ "contains": task.question, "responses": responses })
            })
            .collect();
        assert_ne!(ds.tasks[0].question, ds.tasks[1].question);
        let fx = Fixture {
            dir,
            rules,
            ids: ds.tasks.iter().map(|t| t.id.clone()).collect(),
        };

        let outcome = fx.run("out", 2, RunOptions::default()).unwrap();
        assert!(outcome.completed);
        let slow = fx.ids[0].clone();
        let fast = fx.ids[1].clone();
        assert_eq!(outcome.rounds.len(), 2);
        assert_eq!(outcome.rounds[0].solved, BTreeSet::from([fast]));
        assert_eq!(outcome.rounds[1].attempted, BTreeSet::from([slow.clone()]));
        assert_eq!(outcome.rounds[1].solved, BTreeSet::from([slow.clone()]));

        let retry = outcome
            .records
            .iter()
            .find(|r| r.task_id == slow && r.round == 1)
            .unwrap();
        assert_eq!(retry.family, PromptFamily::Repeat);
        assert!(!retry.template_versions.contains_key("correction"));
        let first = outcome
            .records
            .iter()
            .find(|r| r.task_id == slow && r.round == 0)
            .unwrap();
        // Same prompt text, distinct request: only the per-round seed moves.
        assert_ne!(first.prompt_hash, retry.prompt_hash);
    }

    #[test]
    fn unknown_dataset_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("manifest.json"), "{\"kind\": \"maze\"}").unwrap();
        match load_any_dataset(dir.path()) {
            Err(HarnessError::Dataset(msg)) => assert!(msg.contains("maze")),
            Err(other) => panic!("wrong error {other}"),
            Ok(_) => panic!("manifest with unknown kind loaded"),
        }
    }
}
