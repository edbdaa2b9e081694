//! Segment annotation client for chat-completions-style HTTP endpoints.
//!
//! Sends each unscored segment (with a configurable window of preceding
//! segments as context) to the endpoint, parses a move label and a
//! backtrack-confidence score from the reply, and merges results back into
//! the corpus. Every request/response pair lands in an audit log from which
//! scores can be replayed bit-exactly without the endpoint.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use burstlab_core::corpus::{Corpus, MoveLabel, Trace};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),

    #[error("prompt template must contain the {{segment}} placeholder")]
    BadTemplate,

    #[error("trace {0} has no raw_text; annotation needs segment text")]
    MissingRawText(String),

    #[error("http error: {0}")]
    Http(#[from] reqwest::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Core(#[from] burstlab_core::Error),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, AnnotateError>;

/// Text template with `{segment}` and `{context}` placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    text: String,
}

const DEFAULT_TEMPLATE: &str = "You are labeling one segment of a step-by-step reasoning trace.\n\
Previous segments:\n{context}\n\n\
Current segment:\n{segment}\n\n\
Classify the segment's move as exactly one of: continue, stall, backtrack, exit.\n\
Also rate from 0 to 100 how confidently this segment backtracks (retracts, revisits,\n\
or redoes earlier reasoning).\n\
Reply with a single JSON object, nothing else, in the form:\n\
{\"move\": \"continue|stall|backtrack|exit\", \"score\": <0-100>}";

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<PromptTemplate> {
        let text = text.into();
        if !text.contains("{segment}") {
            return Err(AnnotateError::BadTemplate);
        }
        Ok(PromptTemplate { text })
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<PromptTemplate> {
        PromptTemplate::new(std::fs::read_to_string(path)?)
    }

    pub fn default_template() -> PromptTemplate {
        PromptTemplate {
            text: DEFAULT_TEMPLATE.to_string(),
        }
    }

    pub fn render(&self, segment: &str, context: &str) -> String {
        self.text
            .replace("{segment}", segment)
            .replace("{context}", if context.is_empty() { "(none)" } else { context })
    }
}

/// Endpoint, prompt, retry, and concurrency settings.
#[derive(Debug, Clone)]
pub struct AnnotatorConfig {
    /// Base URL up to the API root, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API credential.
    pub api_key_env: String,
    pub temperature: f64,
    /// Preceding segments included as context.
    pub context_segments: usize,
    pub template: PromptTemplate,
    /// Maximum requests in flight.
    pub concurrency: usize,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_factor: f64,
    pub request_timeout: Duration,
    /// Re-annotate segments that already carry a score.
    pub force: bool,
}

impl AnnotatorConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> AnnotatorConfig {
        AnnotatorConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: "ANNOTATOR_API_KEY".to_string(),
            temperature: 0.0,
            context_segments: 3,
            template: PromptTemplate::default_template(),
            concurrency: 4,
            max_attempts: 5,
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2.0,
            request_timeout: Duration::from_secs(60),
            force: false,
        }
    }
}

/// Parsed label reply.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelResponse {
    pub move_label: MoveLabel,
    pub backtrack_score: f64,
    pub move_confidence: Option<BTreeMap<String, f64>>,
    /// Warnings raised while parsing (score clamped, confidence dropped).
    pub warnings: Vec<String>,
}

/// Parse the endpoint's message content into a label.
///
/// Expects a JSON object with `move` and `score` fields; when the whole
/// content is not valid JSON, a fenced code block is tried once. Scores
/// outside [0, 100] are clamped with a warning; unparseable payloads are
/// errors, never silent scores.
pub fn parse_label_content(content: &str) -> Result<LabelResponse> {
    let value: serde_json::Value = match serde_json::from_str(content.trim()) {
        Ok(v) => v,
        Err(_) => {
            let inner = fenced_block(content)
                .ok_or_else(|| AnnotateError::Other("reply is not a JSON object".to_string()))?;
            serde_json::from_str(inner.trim())
                .map_err(|e| AnnotateError::Other(format!("fenced block is not JSON: {e}")))?
        }
    };
    let object = value
        .as_object()
        .ok_or_else(|| AnnotateError::Other("reply JSON is not an object".to_string()))?;
    let move_str = object
        .get("move")
        .and_then(|v| v.as_str())
        .ok_or_else(|| AnnotateError::Other("reply lacks a move field".to_string()))?;
    let move_label = MoveLabel::parse(move_str)
        .ok_or_else(|| AnnotateError::Other(format!("unknown move label {move_str:?}")))?;
    let raw_score = object
        .get("score")
        .or_else(|| object.get("backtrack_score"))
        .and_then(|v| v.as_f64())
        .ok_or_else(|| AnnotateError::Other("reply lacks a numeric score".to_string()))?;

    let mut warnings = Vec::new();
    let backtrack_score = if (0.0..=100.0).contains(&raw_score) {
        raw_score
    } else {
        let clamped = raw_score.clamp(0.0, 100.0);
        warnings.push(format!("score {raw_score} clamped to {clamped}"));
        clamped
    };

    let move_confidence = match object.get("confidence").and_then(|v| v.as_object()) {
        Some(map) => {
            let parsed: BTreeMap<String, f64> = map
                .iter()
                .filter_map(|(k, v)| v.as_f64().map(|p| (k.clone(), p)))
                .collect();
            let total: f64 = parsed.values().sum();
            let valid = parsed.len() == map.len()
                && (total - 1.0).abs() <= 1e-6
                && parsed.keys().all(|k| MoveLabel::parse(k).is_some());
            if valid {
                Some(parsed)
            } else {
                warnings.push(format!("confidence map dropped (sum {total})"));
                None
            }
        }
        None => None,
    };

    Ok(LabelResponse {
        move_label,
        backtrack_score,
        move_confidence,
        warnings,
    })
}

fn fenced_block(content: &str) -> Option<&str> {
    let start = content.find("```")?;
    let after = &content[start + 3..];
    let after = after.strip_prefix("json").unwrap_or(after);
    let end = after.find("```")?;
    Some(&after[..end])
}

/// Final state of one segment's annotation attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Scored,
    TransportFailed,
    ParseFailed,
}

/// One audit-log line: everything needed to replay the score offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub trace_id: String,
    pub segment_index: usize,
    pub attempts: u32,
    pub prompt: String,
    pub outcome: Outcome,
    /// Raw endpoint body for scored segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Aggregate counts plus per-segment failure details.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AnnotationReport {
    pub scored: usize,
    pub skipped: usize,
    pub transport_failures: usize,
    pub parse_failures: usize,
    pub retries: u32,
    pub warnings: Vec<String>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub trace_id: String,
    pub segment_index: usize,
    pub reason: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

struct SegmentTask {
    trace_pos: usize,
    segment_index: usize,
    trace_id: String,
    prompt: String,
}

struct TaskResult {
    trace_pos: usize,
    segment_index: usize,
    label: Option<LabelResponse>,
    audit: AuditRecord,
}

fn context_window(trace: &Trace, segment_index: usize, window: usize) -> Result<String> {
    let text = trace
        .raw_text
        .as_deref()
        .ok_or_else(|| AnnotateError::MissingRawText(trace.trace_id.clone()))?;
    let lo = segment_index.saturating_sub(window);
    let parts: Vec<&str> = trace.segments[lo..segment_index]
        .iter()
        .map(|s| {
            burstlab_core::corpus::slice_chars(text, s.start_char, s.end_char)
                .expect("validated offsets")
        })
        .collect();
    Ok(parts.join("\n"))
}

fn build_tasks(corpus: &Corpus, config: &AnnotatorConfig) -> Result<(Vec<SegmentTask>, usize)> {
    let mut tasks = Vec::new();
    let mut skipped = 0usize;
    for (trace_pos, trace) in corpus.traces.iter().enumerate() {
        for segment in &trace.segments {
            if segment.is_scored() && !config.force {
                skipped += 1;
                continue;
            }
            let text = trace
                .raw_text
                .as_deref()
                .ok_or_else(|| AnnotateError::MissingRawText(trace.trace_id.clone()))?;
            let segment_text =
                burstlab_core::corpus::slice_chars(text, segment.start_char, segment.end_char)
                    .expect("validated offsets");
            let context = context_window(trace, segment.index, config.context_segments)?;
            tasks.push(SegmentTask {
                trace_pos,
                segment_index: segment.index,
                trace_id: trace.trace_id.clone(),
                prompt: config.template.render(segment_text, &context),
            });
        }
    }
    Ok((tasks, skipped))
}

async fn run_task(
    client: &reqwest::Client,
    url: &str,
    api_key: &str,
    config: &AnnotatorConfig,
    task: SegmentTask,
) -> TaskResult {
    let mut attempts = 0u32;
    let mut last_error = String::new();
    while attempts < config.max_attempts {
        attempts += 1;
        let request = ChatRequest {
            model: &config.model,
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: task.prompt.clone(),
            }],
            temperature: config.temperature,
        };
        let sent = client
            .post(url)
            .bearer_auth(api_key)
            .json(&request)
            .send()
            .await;
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                last_error = format!("transport: {e}");
                backoff(config, attempts).await;
                continue;
            }
        };
        let status = response.status();
        let body = match response.text().await {
            Ok(b) => b,
            Err(e) => {
                last_error = format!("body read: {e}");
                backoff(config, attempts).await;
                continue;
            }
        };
        if !status.is_success() {
            last_error = format!("status {status}");
            backoff(config, attempts).await;
            continue;
        }
        // a well-formed transport reply that fails to parse is recorded
        // as a parse failure, not retried
        let parsed = serde_json::from_str::<ChatResponse>(&body)
            .map_err(|e| format!("chat payload: {e}"))
            .and_then(|chat| {
                chat.choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| "chat payload has no choices".to_string())
            })
            .and_then(|content| parse_label_content(&content).map_err(|e| e.to_string()));
        return match parsed {
            Ok(label) => TaskResult {
                trace_pos: task.trace_pos,
                segment_index: task.segment_index,
                audit: AuditRecord {
                    trace_id: task.trace_id,
                    segment_index: task.segment_index,
                    attempts,
                    prompt: task.prompt,
                    outcome: Outcome::Scored,
                    response_body: Some(body),
                    error: None,
                    warnings: label.warnings.clone(),
                },
                label: Some(label),
            },
            Err(reason) => TaskResult {
                trace_pos: task.trace_pos,
                segment_index: task.segment_index,
                label: None,
                audit: AuditRecord {
                    trace_id: task.trace_id,
                    segment_index: task.segment_index,
                    attempts,
                    prompt: task.prompt,
                    outcome: Outcome::ParseFailed,
                    response_body: Some(body),
                    error: Some(reason),
                    warnings: Vec::new(),
                },
            },
        };
    }
    TaskResult {
        trace_pos: task.trace_pos,
        segment_index: task.segment_index,
        label: None,
        audit: AuditRecord {
            trace_id: task.trace_id,
            segment_index: task.segment_index,
            attempts,
            prompt: task.prompt,
            outcome: Outcome::TransportFailed,
            response_body: None,
            error: Some(last_error),
            warnings: Vec::new(),
        },
    }
}

async fn backoff(config: &AnnotatorConfig, attempt: u32) {
    if attempt >= config.max_attempts {
        return;
    }
    let factor = config.backoff_factor.powi(attempt as i32 - 1);
    tokio::time::sleep(config.backoff_base.mul_f64(factor)).await;
}

fn apply_results(
    corpus: &Corpus,
    mut results: Vec<TaskResult>,
    skipped: usize,
) -> (Corpus, AnnotationReport, Vec<AuditRecord>) {
    // merge by (trace, segment) so completion order cannot reorder output
    results.sort_by_key(|r| (r.trace_pos, r.segment_index));
    let mut annotated = corpus.clone();
    let mut report = AnnotationReport {
        skipped,
        ..AnnotationReport::default()
    };
    let mut audit = Vec::with_capacity(results.len());
    for result in results {
        report.retries += result.audit.attempts.saturating_sub(1);
        match (&result.label, &result.audit.outcome) {
            (Some(label), _) => {
                let segment =
                    &mut annotated.traces[result.trace_pos].segments[result.segment_index];
                segment.move_label = Some(label.move_label);
                segment.backtrack_score = Some(label.backtrack_score);
                segment.move_confidence = label.move_confidence.clone();
                report.scored += 1;
                for warning in &label.warnings {
                    report.warnings.push(format!(
                        "{}#{}: {warning}",
                        result.audit.trace_id, result.segment_index
                    ));
                }
            }
            (None, outcome) => {
                match outcome {
                    Outcome::ParseFailed => report.parse_failures += 1,
                    _ => report.transport_failures += 1,
                }
                report.failures.push(FailureRecord {
                    trace_id: result.audit.trace_id.clone(),
                    segment_index: result.segment_index,
                    reason: result.audit.error.clone().unwrap_or_default(),
                });
            }
        }
        audit.push(result.audit);
    }
    (annotated, report, audit)
}

/// Annotate every scored-eligible segment via the configured endpoint.
///
/// Failures after bounded exponential-backoff retries leave segments
/// unscored and are listed in the report; already-scored segments are
/// skipped unless `force` is set.
pub async fn annotate_corpus(
    corpus: &Corpus,
    config: &AnnotatorConfig,
) -> Result<(Corpus, AnnotationReport, Vec<AuditRecord>)> {
    let api_key = std::env::var(&config.api_key_env)
        .map_err(|_| AnnotateError::MissingCredential(config.api_key_env.clone()))?;
    let (tasks, skipped) = build_tasks(corpus, config)?;
    let client = reqwest::Client::builder()
        .timeout(config.request_timeout)
        .build()?;
    let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));

    use futures::StreamExt;
    let results: Vec<TaskResult> = futures::stream::iter(tasks)
        .map(|task| run_task(&client, &url, &api_key, config, task))
        .buffer_unordered(config.concurrency.max(1))
        .collect()
        .await;

    Ok(apply_results(corpus, results, skipped))
}

/// Blocking wrapper that owns its own runtime.
pub fn annotate_corpus_blocking(
    corpus: &Corpus,
    config: &AnnotatorConfig,
) -> Result<(Corpus, AnnotationReport, Vec<AuditRecord>)> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(annotate_corpus(corpus, config))
}

/// Re-apply recorded payloads through the parser, without the endpoint.
/// Produces scores bit-identical to the original run.
pub fn replay_annotations(corpus: &Corpus, audit: &[AuditRecord]) -> Result<Corpus> {
    let mut annotated = corpus.clone();
    let by_id: BTreeMap<String, usize> = annotated
        .traces
        .iter()
        .enumerate()
        .map(|(i, t)| (t.trace_id.clone(), i))
        .collect();
    for record in audit {
        if record.outcome != Outcome::Scored {
            continue;
        }
        let body = record
            .response_body
            .as_deref()
            .ok_or_else(|| AnnotateError::Other("scored record without body".to_string()))?;
        let chat: ChatResponse = serde_json::from_str(body)?;
        let content = chat
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| AnnotateError::Other("recorded payload has no choices".to_string()))?
            .message
            .content;
        let label = parse_label_content(&content)?;
        let trace_pos = *by_id
            .get(record.trace_id.as_str())
            .ok_or_else(|| AnnotateError::Other(format!("unknown trace {}", record.trace_id)))?;
        let segment = annotated.traces[trace_pos]
            .segments
            .get_mut(record.segment_index)
            .ok_or_else(|| {
                AnnotateError::Other(format!(
                    "trace {} has no segment {}",
                    record.trace_id, record.segment_index
                ))
            })?;
        segment.move_label = Some(label.move_label);
        segment.backtrack_score = Some(label.backtrack_score);
        segment.move_confidence = label.move_confidence;
    }
    Ok(annotated)
}

/// Write audit records as JSONL.
pub fn write_audit_jsonl<W: std::io::Write>(mut writer: W, records: &[AuditRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read audit records from JSONL.
pub fn read_audit_jsonl<R: std::io::BufRead>(reader: R) -> Result<Vec<AuditRecord>> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_plain_json() {
        let label = parse_label_content(r#"{"move":"backtrack","score":55}"#).unwrap();
        assert_eq!(label.move_label, MoveLabel::Backtrack);
        assert_eq!(label.backtrack_score, 55.0);
        assert!(label.warnings.is_empty());
    }

    #[test]
    fn parse_fenced_block() {
        let content = "Sure, here is the label:\n```json\n{\"move\":\"stall\",\"score\":12.5}\n```";
        let label = parse_label_content(content).unwrap();
        assert_eq!(label.move_label, MoveLabel::Stall);
        assert_eq!(label.backtrack_score, 12.5);
    }

    #[test]
    fn parse_clamps_out_of_range() {
        let label = parse_label_content(r#"{"move":"backtrack","score":140}"#).unwrap();
        assert_eq!(label.backtrack_score, 100.0);
        assert_eq!(label.warnings.len(), 1);
    }

    #[test]
    fn parse_confidence_map() {
        let content = r#"{"move":"backtrack","score":70,"confidence":{"continue":0.2,"backtrack":0.8}}"#;
        let label = parse_label_content(content).unwrap();
        let conf = label.move_confidence.unwrap();
        assert_eq!(conf["backtrack"], 0.8);

        let bad = r#"{"move":"backtrack","score":70,"confidence":{"continue":0.2,"backtrack":0.3}}"#;
        let label = parse_label_content(bad).unwrap();
        assert!(label.move_confidence.is_none());
        assert_eq!(label.warnings.len(), 1);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_label_content("I think this is a backtrack").is_err());
        assert!(parse_label_content(r#"{"move":"pivot","score":10}"#).is_err());
        assert!(parse_label_content(r#"{"move":"backtrack"}"#).is_err());
    }

    #[test]
    fn template_requires_segment_placeholder() {
        assert!(PromptTemplate::new("no placeholders").is_err());
        let template = PromptTemplate::new("ctx: {context} seg: {segment}").unwrap();
        assert_eq!(template.render("S", "C"), "ctx: C seg: S");
        assert_eq!(template.render("S", ""), "ctx: (none) seg: S");
    }

    #[test]
    fn default_template_renders_non_empty() {
        let rendered = PromptTemplate::default_template().render("a step", "earlier");
        assert!(rendered.contains("a step"));
        assert!(rendered.contains("earlier"));
        assert!(!rendered.is_empty());
    }

    #[test]
    fn audit_round_trip() {
        let records = vec![AuditRecord {
            trace_id: "t".to_string(),
            segment_index: 2,
            attempts: 3,
            prompt: "p".to_string(),
            outcome: Outcome::Scored,
            response_body: Some("{}".to_string()),
            error: None,
            warnings: vec!["w".to_string()],
        }];
        let mut buf = Vec::new();
        write_audit_jsonl(&mut buf, &records).unwrap();
        let back = read_audit_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].segment_index, 2);
        assert_eq!(back[0].outcome, Outcome::Scored);
    }
}
