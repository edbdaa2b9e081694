//! Deterministic synthetic corpus generation for harness tests and
//! directional checks.
//!
//! Wrong-class traces are generated with strictly heavier parameters
//! (more bursts, larger bursts, more severe scores, later placement), so
//! directional class-mean comparisons hold by construction at sample sizes
//! in the low thousands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Segment, Trace};
use crate::error::{Error, Result};

/// Event-density and clustering parameters for one correctness class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    /// Expected number of burst seeds per trace (Poisson).
    pub burst_rate: f64,
    /// Mean burst size; sizes are 1 + geometric.
    pub mean_burst_size: f64,
    /// Fraction of event scores drawn from [50, 100] instead of [20, 50).
    pub severe_fraction: f64,
    /// 0 places bursts uniformly over the trace; larger values skew late.
    pub late_bias: f64,
    /// Multiplier on the base segment-count range.
    pub length_multiplier: f64,
}

impl ClassProfile {
    pub fn baseline_correct() -> ClassProfile {
        ClassProfile {
            burst_rate: 1.2,
            mean_burst_size: 1.8,
            severe_fraction: 0.5,
            late_bias: 0.3,
            length_multiplier: 1.0,
        }
    }

    pub fn heavy_wrong_tail() -> ClassProfile {
        ClassProfile {
            burst_rate: 2.8,
            mean_burst_size: 2.8,
            severe_fraction: 0.7,
            late_bias: 1.5,
            length_multiplier: 1.4,
        }
    }
}

/// Parameters for [`synth_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub questions: usize,
    pub traces_per_question: usize,
    /// Fraction of each question's traces labeled correct.
    pub correct_fraction: f64,
    pub correct: ClassProfile,
    pub wrong: ClassProfile,
    /// Base range of segments per trace before the length multiplier.
    pub segments_range: (usize, usize),
    /// Words per segment.
    pub words_range: (u64, u64),
    pub name: String,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 42,
            questions: 20,
            traces_per_question: 20,
            correct_fraction: 0.7,
            correct: ClassProfile::baseline_correct(),
            wrong: ClassProfile::heavy_wrong_tail(),
            segments_range: (120, 240),
            words_range: (10, 50),
            name: "synthetic".to_string(),
        }
    }
}

impl SynthParams {
    /// Identical class profiles; class-mean differences vanish in
    /// expectation.
    pub fn null(seed: u64, questions: usize, traces_per_question: usize) -> SynthParams {
        let base = ClassProfile::baseline_correct();
        SynthParams {
            seed,
            questions,
            traces_per_question,
            correct: base.clone(),
            wrong: base,
            name: "synthetic-null".to_string(),
            ..SynthParams::default()
        }
    }
}

/// Generate a deterministic annotated corpus. Same params, same bytes.
pub fn synth_corpus(params: &SynthParams) -> Result<Corpus> {
    if params.questions == 0 || params.traces_per_question == 0 {
        return Err(Error::domain("synth corpus needs at least one question and one trace"));
    }
    if params.segments_range.0 == 0 || params.segments_range.0 > params.segments_range.1 {
        return Err(Error::domain("invalid segments_range"));
    }
    if params.words_range.0 == 0 || params.words_range.0 > params.words_range.1 {
        return Err(Error::domain("invalid words_range"));
    }
    // largest-remainder rounding keeps the corpus-wide correct fraction
    // exact even when per-question counts cannot be
    let per_question_target = params.traces_per_question as f64 * params.correct_fraction;
    let correct_counts: Vec<usize> = (0..params.questions)
        .map(|q| {
            let upto = (per_question_target * (q + 1) as f64).round() as usize;
            let before = (per_question_target * q as f64).round() as usize;
            (upto - before).min(params.traces_per_question)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut traces = Vec::with_capacity(params.questions * params.traces_per_question);
    for q in 0..params.questions {
        let question_id = format!("q{q:03}");
        let gold = (100 + q).to_string();
        for t in 0..params.traces_per_question {
            let correct = t < correct_counts[q];
            let profile = if correct { &params.correct } else { &params.wrong };
            let trace_id = format!("{question_id}-t{t:03}");
            let predicted = if correct {
                gold.clone()
            } else {
                (100 + q + 1).to_string()
            };
            traces.push(synth_trace(
                &mut rng,
                trace_id,
                question_id.clone(),
                gold.clone(),
                predicted,
                correct,
                profile,
                params,
            ));
        }
    }
    Corpus::new(params.name.clone(), traces)
}

#[allow(clippy::too_many_arguments)]
fn synth_trace(
    rng: &mut ChaCha8Rng,
    trace_id: String,
    question_id: String,
    gold_answer: String,
    predicted_answer: String,
    correct: bool,
    profile: &ClassProfile,
    params: &SynthParams,
) -> Trace {
    let (lo, hi) = params.segments_range;
    let scaled_lo = ((lo as f64) * profile.length_multiplier).max(1.0) as usize;
    let scaled_hi = ((hi as f64) * profile.length_multiplier).max(scaled_lo as f64) as usize;
    let n_segments = rng.gen_range(scaled_lo..=scaled_hi);

    let mut word_counts = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        word_counts.push(rng.gen_range(params.words_range.0..=params.words_range.1));
    }

    // background scores sit below every analysis threshold
    let mut scores: Vec<f64> = (0..n_segments)
        .map(|_| (rng.gen_range(0.0..15.0f64) * 10.0).round() / 10.0)
        .collect();

    let n_bursts = poisson(rng, profile.burst_rate);
    for _ in 0..n_bursts {
        let rel = positional_draw(rng, profile.late_bias);
        let start = ((rel * n_segments as f64) as usize).min(n_segments - 1);
        let size = burst_size(rng, profile.mean_burst_size);
        // events on consecutive segments keep intra-burst gaps far below
        // every gap setting under test
        for offset in 0..size {
            let idx = start + offset;
            if idx >= n_segments {
                break;
            }
            let severe = rng.gen_bool(profile.severe_fraction);
            let score = if severe {
                rng.gen_range(50.0..=100.0f64)
            } else {
                rng.gen_range(20.0..50.0f64)
            };
            scores[idx] = (score * 10.0).round() / 10.0;
        }
    }

    trace_from_parts(
        &trace_id,
        &question_id,
        &gold_answer,
        Some(&predicted_answer),
        correct,
        &word_counts
            .iter()
            .zip(scores.iter())
            .map(|(&wc, &s)| (wc, Some(s)))
            .collect::<Vec<_>>(),
    )
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0f64;
    loop {
        p *= rng.gen_range(0.0..1.0f64);
        if p <= limit || k > 1000 {
            return k;
        }
        k += 1;
    }
}

fn positional_draw(rng: &mut ChaCha8Rng, late_bias: f64) -> f64 {
    let u: f64 = rng.gen_range(0.0..1.0);
    u.powf(1.0 / (1.0 + late_bias))
}

fn burst_size(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let continue_p = 1.0 - 1.0 / mean.max(1.0);
    let mut size = 1usize;
    while size < 40 && rng.gen_bool(continue_p) {
        size += 1;
    }
    size
}

/// Build a trace from (word_count, backtrack_score) pairs with fabricated
/// offsets. Intended for fixtures and generators where no raw text exists.
pub fn trace_from_parts(
    trace_id: &str,
    question_id: &str,
    gold_answer: &str,
    predicted_answer: Option<&str>,
    correct: bool,
    parts: &[(u64, Option<f64>)],
) -> Trace {
    let mut segments = Vec::with_capacity(parts.len());
    let mut cursor = 0usize;
    let mut depth = 0u64;
    for (i, &(word_count, score)) in parts.iter().enumerate() {
        // six characters per word keeps fabricated offsets strictly ordered
        let span = (word_count as usize) * 6;
        segments.push(Segment {
            index: i,
            start_char: cursor,
            end_char: cursor + span,
            word_count,
            start_depth: depth,
            move_label: score.map(|s| {
                if s >= 50.0 {
                    crate::corpus::MoveLabel::Backtrack
                } else {
                    crate::corpus::MoveLabel::Continue
                }
            }),
            backtrack_score: score,
            move_confidence: None,
        });
        cursor += span + 1;
        depth += word_count;
    }
    Trace {
        trace_id: trace_id.to_string(),
        question_id: question_id.to_string(),
        segments,
        total_words: depth,
        gold_answer: gold_answer.to_string(),
        predicted_answer: predicted_answer.map(|s| s.to_string()),
        correct,
        raw_text: None,
    }
}

/// Shorthand for test fixtures: correct flag only, answers fabricated.
pub fn scored_trace(
    trace_id: &str,
    question_id: &str,
    correct: bool,
    parts: &[(u64, Option<f64>)],
) -> Trace {
    trace_from_parts(
        trace_id,
        question_id,
        "1",
        Some(if correct { "1" } else { "2" }),
        correct,
        parts,
    )
}
