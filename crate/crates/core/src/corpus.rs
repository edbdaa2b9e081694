//! Canonical trace data model, line segmentation, answer extraction and
//! normalization, JSONL ingestion, and corpus summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Move label assigned to a segment by the annotation pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveLabel {
    Continue,
    Stall,
    Backtrack,
    Exit,
}

impl MoveLabel {
    pub const ALL: [MoveLabel; 4] = [
        MoveLabel::Continue,
        MoveLabel::Stall,
        MoveLabel::Backtrack,
        MoveLabel::Exit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MoveLabel::Continue => "continue",
            MoveLabel::Stall => "stall",
            MoveLabel::Backtrack => "backtrack",
            MoveLabel::Exit => "exit",
        }
    }

    pub fn parse(s: &str) -> Option<MoveLabel> {
        match s {
            "continue" => Some(MoveLabel::Continue),
            "stall" => Some(MoveLabel::Stall),
            "backtrack" => Some(MoveLabel::Backtrack),
            "exit" => Some(MoveLabel::Exit),
            _ => None,
        }
    }
}

/// One scored line of a reasoning trace.
///
/// Offsets are character offsets (Unicode scalar values) into the reasoning
/// text. `start_depth` is the cumulative word count of all prior segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start_char: usize,
    pub end_char: usize,
    pub word_count: u64,
    pub start_depth: u64,
    pub move_label: Option<MoveLabel>,
    pub backtrack_score: Option<f64>,
    pub move_confidence: Option<BTreeMap<String, f64>>,
}

impl Segment {
    /// A segment is scored once the annotation pass has attached a
    /// backtrack-confidence score to it.
    pub fn is_scored(&self) -> bool {
        self.backtrack_score.is_some()
    }
}

/// An ordered list of segments plus answers and the correctness label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub trace_id: String,
    pub question_id: String,
    pub segments: Vec<Segment>,
    /// Total reasoning words (the trace depth D).
    pub total_words: u64,
    pub gold_answer: String,
    pub predicted_answer: Option<String>,
    pub correct: bool,
    /// Reasoning text, retained when supplied so segments can be sliced.
    pub raw_text: Option<String>,
}

impl Trace {
    /// Slice the reasoning text spanned by `segment`, if raw text is present.
    pub fn segment_text<'a>(&'a self, segment: &Segment) -> Option<&'a str> {
        let text = self.raw_text.as_deref()?;
        slice_chars(text, segment.start_char, segment.end_char)
    }

    pub fn scored_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.is_scored())
    }
}

/// A named set of traces over a set of questions, ordered by
/// (question_id, trace_id).
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub traces: Vec<Trace>,
    pub questions: BTreeSet<String>,
}

/// Correctness class of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Correct,
    Wrong,
}

impl Class {
    pub const BOTH: [Class; 2] = [Class::Correct, Class::Wrong];

    pub fn as_str(&self) -> &'static str {
        match self {
            Class::Correct => "correct",
            Class::Wrong => "wrong",
        }
    }

    pub fn matches(&self, trace: &Trace) -> bool {
        match self {
            Class::Correct => trace.correct,
            Class::Wrong => !trace.correct,
        }
    }
}

/// Count maximal runs of non-whitespace characters.
pub fn count_words(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Split reasoning text into one segment per non-empty line.
///
/// A line is non-empty when it contains at least one word. Segment spans
/// cover the full line content (excluding the line break); move and score
/// fields are left unset for the annotation pass to fill.
pub fn segment_trace(reasoning_text: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut char_pos = 0usize;
    let mut depth = 0u64;
    for line in reasoning_text.split('\n') {
        let line_chars = line.chars().count();
        let (content, content_chars) = match line.strip_suffix('\r') {
            Some(c) => (c, line_chars - 1),
            None => (line, line_chars),
        };
        let words = count_words(content);
        if words > 0 {
            segments.push(Segment {
                index: segments.len(),
                start_char: char_pos,
                end_char: char_pos + content_chars,
                word_count: words,
                start_depth: depth,
                move_label: None,
                backtrack_score: None,
                move_confidence: None,
            });
            depth += words;
        }
        char_pos += line_chars + 1;
    }
    segments
}

/// Slice `text` by character offsets. Returns `None` when out of range.
pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    for (chars_seen, (byte, _)) in text.char_indices().enumerate() {
        if chars_seen == start {
            byte_start = Some(byte);
        }
        if chars_seen == end {
            byte_end = Some(byte);
            break;
        }
    }
    let total_chars_needed = end;
    if byte_end.is_none() && text.chars().count() == total_chars_needed {
        byte_end = Some(text.len());
    }
    if byte_start.is_none() && text.chars().count() == start {
        byte_start = Some(text.len());
    }
    match (byte_start, byte_end) {
        (Some(s), Some(e)) => Some(&text[s..e]),
        _ => None,
    }
}

/// Extract the final answer from a raw model output.
///
/// Takes the content of the last `\boxed{...}` expression when one closes
/// with balanced braces; otherwise falls back to the last case-insensitive
/// "final answer:" / "answer:" occurrence followed by a numeric token.
pub fn extract_answer(full_output: &str) -> Option<String> {
    if let Some(pos) = full_output.rfind("\\boxed{") {
        let after = &full_output[pos + "\\boxed{".len()..];
        if let Some(content) = balanced_brace_content(after) {
            return Some(content.to_string());
        }
    }
    answer_prefix_fallback(full_output)
}

/// Content up to the brace that closes an already-open `{`, or `None` when
/// the braces never balance.
fn balanced_brace_content(s: &str) -> Option<&str> {
    let mut depth = 1usize;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[..i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn answer_prefix_fallback(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let needle = b"answer:";
    if bytes.len() < needle.len() {
        return None;
    }
    let mut best = None;
    for i in 0..=bytes.len() - needle.len() {
        if bytes[i..i + needle.len()].eq_ignore_ascii_case(needle) {
            if let Some(token) = numeric_token(&text[i + needle.len()..]) {
                best = Some(token.to_string());
            }
        }
    }
    best
}

/// Leading numeric token: optional sign, digits, optional decimal part.
fn numeric_token(s: &str) -> Option<&str> {
    let trimmed = s.trim_start();
    let bytes = trimmed.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    Some(&trimmed[..i])
}

/// Normalize an answer string for exact-match comparison.
///
/// Removes commas and dollar signs, unwraps `\text{...}` keeping the inner
/// content, strips trailing periods, and trims surrounding whitespace. The
/// pipeline is applied to a fixed point so the function is idempotent.
pub fn normalize_answer(raw: &str) -> String {
    let mut current = raw.to_string();
    loop {
        let next = normalize_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn normalize_once(s: &str) -> String {
    let unwrapped = unwrap_text_commands(s);
    let stripped: String = unwrapped.chars().filter(|c| *c != ',' && *c != '$').collect();
    stripped.trim().trim_end_matches('.').trim().to_string()
}

fn unwrap_text_commands(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while let Some(pos) = rest.find("\\text{") {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + "\\text{".len()..];
        match balanced_brace_content(after) {
            Some(content) => {
                out.push_str(content);
                rest = &after[content.len() + 1..];
            }
            None => {
                out.push_str("\\text{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Exact string equality after normalization.
pub fn answers_match(gold: &str, predicted: &str) -> bool {
    normalize_answer(gold) == normalize_answer(predicted)
}

/// Corpus-level summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub name: String,
    pub question_count: usize,
    pub trace_count: usize,
    pub traces_per_question: f64,
    pub baseline_accuracy: f64,
    pub mean_words: f64,
    pub median_words: f64,
    pub median_segments_per_trace: f64,
}

/// Question count, trace count, baseline exact-match accuracy, and length
/// statistics for an ingested corpus.
pub fn corpus_summary(corpus: &Corpus) -> Result<CorpusSummary> {
    if corpus.traces.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let trace_count = corpus.traces.len();
    let question_count = corpus.questions.len();
    let correct = corpus.traces.iter().filter(|t| t.correct).count();
    let mut words: Vec<f64> = corpus.traces.iter().map(|t| t.total_words as f64).collect();
    let mut segs: Vec<f64> = corpus.traces.iter().map(|t| t.segments.len() as f64).collect();
    let mean_words = util::mean(&words);
    Ok(CorpusSummary {
        name: corpus.name.clone(),
        question_count,
        trace_count,
        traces_per_question: trace_count as f64 / question_count as f64,
        baseline_accuracy: correct as f64 / trace_count as f64,
        mean_words,
        median_words: util::median(&mut words).unwrap_or(0.0),
        median_segments_per_trace: util::median(&mut segs).unwrap_or(0.0),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRecord {
    index: usize,
    start_char: usize,
    end_char: usize,
    word_count: u64,
    #[serde(rename = "move", default, skip_serializing_if = "Option::is_none")]
    move_label: Option<MoveLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backtrack_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    move_confidence: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    question_id: String,
    trace_id: String,
    gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicted_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<Vec<SegmentRecord>>,
}

impl TraceRecord {
    fn from_trace(trace: &Trace) -> TraceRecord {
        TraceRecord {
            question_id: trace.question_id.clone(),
            trace_id: trace.trace_id.clone(),
            gold_answer: trace.gold_answer.clone(),
            raw_text: trace.raw_text.clone(),
            predicted_answer: trace.predicted_answer.clone(),
            segments: Some(
                trace
                    .segments
                    .iter()
                    .map(|s| SegmentRecord {
                        index: s.index,
                        start_char: s.start_char,
                        end_char: s.end_char,
                        word_count: s.word_count,
                        move_label: s.move_label,
                        backtrack_score: s.backtrack_score,
                        move_confidence: s.move_confidence.clone(),
                    })
                    .collect(),
            ),
        }
    }

    fn into_trace(self) -> Result<Trace> {
        let trace_id = self.trace_id;
        let segments = match (self.segments, &self.raw_text) {
            (Some(records), raw) => {
                build_supplied_segments(&trace_id, records, raw.as_deref())?
            }
            (None, Some(raw)) => segment_trace(raw),
            (None, None) => {
                return Err(Error::invalid_trace(
                    &trace_id,
                    "record has neither segments nor raw_text",
                ));
            }
        };
        let total_words = segments.iter().map(|s| s.word_count).sum();
        let predicted_answer = self
            .predicted_answer
            .or_else(|| self.raw_text.as_deref().and_then(extract_answer));
        let correct = predicted_answer
            .as_deref()
            .map(|p| answers_match(&self.gold_answer, p))
            .unwrap_or(false);
        Ok(Trace {
            trace_id,
            question_id: self.question_id,
            segments,
            total_words,
            gold_answer: self.gold_answer,
            predicted_answer,
            correct,
            raw_text: self.raw_text,
        })
    }
}

/// Validate supplied segments: ordering, offsets, score ranges, and (when
/// raw text is present) word counts recomputed from the spanned text.
fn build_supplied_segments(
    trace_id: &str,
    records: Vec<SegmentRecord>,
    raw_text: Option<&str>,
) -> Result<Vec<Segment>> {
    let char_count = raw_text.map(|t| t.chars().count());
    let mut segments = Vec::with_capacity(records.len());
    let mut depth = 0u64;
    let mut prev_end = 0usize;
    for (pos, record) in records.into_iter().enumerate() {
        if record.index != pos {
            return Err(Error::invalid_trace(
                trace_id,
                format!("segment {pos} carries index {}", record.index),
            ));
        }
        if record.start_char >= record.end_char {
            return Err(Error::invalid_trace(
                trace_id,
                format!("segment {pos}: start_char must be < end_char"),
            ));
        }
        if pos > 0 && record.start_char < prev_end {
            return Err(Error::invalid_trace(
                trace_id,
                format!("segment {pos} overlaps or reorders previous segment"),
            ));
        }
        if record.word_count == 0 {
            return Err(Error::invalid_trace(
                trace_id,
                format!("segment {pos}: word_count must be >= 1"),
            ));
        }
        if let Some(score) = record.backtrack_score {
            if !(0.0..=100.0).contains(&score) || !score.is_finite() {
                return Err(Error::invalid_trace(
                    trace_id,
                    format!("segment {pos}: backtrack_score {score} outside [0, 100]"),
                ));
            }
        }
        if let Some(conf) = &record.move_confidence {
            let total: f64 = conf.values().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::invalid_trace(
                    trace_id,
                    format!("segment {pos}: move_confidence sums to {total}"),
                ));
            }
            for key in conf.keys() {
                if MoveLabel::parse(key).is_none() {
                    return Err(Error::invalid_trace(
                        trace_id,
                        format!("segment {pos}: unknown move label {key:?}"),
                    ));
                }
            }
        }
        if let (Some(total), Some(text)) = (char_count, raw_text) {
            if record.end_char > total {
                return Err(Error::invalid_trace(
                    trace_id,
                    format!("segment {pos}: end_char {} beyond text length {total}", record.end_char),
                ));
            }
            let span = slice_chars(text, record.start_char, record.end_char)
                .expect("offsets already bounds-checked");
            let recounted = count_words(span);
            if recounted != record.word_count {
                return Err(Error::invalid_trace(
                    trace_id,
                    format!(
                        "segment {pos}: word_count {} but spanned text has {recounted} words",
                        record.word_count
                    ),
                ));
            }
        }
        prev_end = record.end_char;
        segments.push(Segment {
            index: pos,
            start_char: record.start_char,
            end_char: record.end_char,
            word_count: record.word_count,
            start_depth: depth,
            move_label: record.move_label,
            backtrack_score: record.backtrack_score,
            move_confidence: record.move_confidence,
        });
        depth += record.word_count;
    }
    Ok(segments)
}

impl Corpus {
    pub fn new(name: impl Into<String>, mut traces: Vec<Trace>) -> Result<Corpus> {
        traces.sort_by(|a, b| {
            (a.question_id.as_str(), a.trace_id.as_str())
                .cmp(&(b.question_id.as_str(), b.trace_id.as_str()))
        });
        let mut seen = BTreeSet::new();
        for trace in &traces {
            if !seen.insert(trace.trace_id.clone()) {
                return Err(Error::invalid_trace(&trace.trace_id, "duplicate trace_id"));
            }
        }
        let questions = traces.iter().map(|t| t.question_id.clone()).collect();
        Ok(Corpus {
            name: name.into(),
            traces,
            questions,
        })
    }

    /// Read one-trace-per-line JSONL. Unknown fields are ignored; records
    /// with raw text but no segments are segmented on the fly.
    pub fn read_jsonl<R: BufRead>(reader: R, name: impl Into<String>) -> Result<Corpus> {
        let mut traces = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            traces.push(record.into_trace()?);
        }
        Corpus::new(name, traces)
    }

    pub fn read_jsonl_path(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".to_string());
        let file = std::fs::File::open(path)?;
        Corpus::read_jsonl(std::io::BufReader::new(file), name)
    }

    /// Write the corpus back out as canonical JSONL (one trace per line,
    /// segments always present).
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for trace in &self.traces {
            let record = TraceRecord::from_trace(trace);
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_jsonl_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn traces_in_class(&self, class: Class) -> impl Iterator<Item = &Trace> {
        self.traces.iter().filter(move |t| class.matches(t))
    }

    /// Traces whose question differs from `question_id`.
    pub fn traces_excluding_question(&self, question_id: &str) -> Vec<&Trace> {
        self.traces
            .iter()
            .filter(|t| t.question_id != question_id)
            .collect()
    }
}
