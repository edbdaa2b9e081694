//! Timing statistics, 20-bin relative-position profiles, burst-start
//! profiles, profile-shape features, and severity-bucket summaries.

use serde::Serialize;

use crate::corpus::{Class, Corpus, Trace};
use crate::error::{Error, Result};
use crate::events::{burst_partition, qualifying_events};
use crate::util;
use crate::BINS;

/// Per-trace 20-bin profile at one threshold.
///
/// `probs[b]` is `counts[b] / supports[b]` for bins with scored segments and
/// 0 elsewhere; `counts` are qualifying events, `supports` scored segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BinProfile {
    pub tau: f64,
    pub probs: [f64; BINS],
    pub counts: [u64; BINS],
    pub supports: [u64; BINS],
}

/// Wrong-minus-correct mean profile built with one question excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionVector {
    pub u: [f64; BINS],
    pub excluded_question: String,
    pub tau: f64,
}

/// Smallest qualifying-event depth at `tau`, absent without events.
pub fn first_event_depth(trace: &Trace, tau: f64) -> Option<u64> {
    qualifying_events(trace, tau, None).first().map(|e| e.depth)
}

/// Fraction of traces with at least one qualifying event at `tau`.
pub fn event_rate(traces: &[&Trace], tau: f64) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::domain("event_rate requires a non-empty trace list"));
    }
    let with_events = traces
        .iter()
        .filter(|t| first_event_depth(t, tau).is_some())
        .count();
    Ok(with_events as f64 / traces.len() as f64)
}

/// Progress bin of a start depth: floor(20 * depth / total), clamped to 19.
pub fn bin_index(start_depth: u64, total_words: u64) -> usize {
    (((BINS as u64) * start_depth / total_words) as usize).min(BINS - 1)
}

/// Bin a completed trace's scored segments and qualifying events.
pub fn bin_profile(trace: &Trace, tau: f64) -> Result<BinProfile> {
    if trace.total_words == 0 {
        return Err(Error::domain("bin_profile requires a trace with words"));
    }
    let mut counts = [0u64; BINS];
    let mut supports = [0u64; BINS];
    for segment in trace.scored_segments() {
        let bin = bin_index(segment.start_depth, trace.total_words);
        supports[bin] += 1;
        if segment.backtrack_score.expect("scored segment") >= tau {
            counts[bin] += 1;
        }
    }
    let mut probs = [0.0f64; BINS];
    for b in 0..BINS {
        if supports[b] > 0 {
            probs[b] = counts[b] as f64 / supports[b] as f64;
        }
    }
    Ok(BinProfile {
        tau,
        probs,
        counts,
        supports,
    })
}

/// Class-pooled per-bin counts with a minimum support filter. Bins whose
/// pooled support falls below `min_support` are carried as absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledBinProfile {
    pub class: Class,
    pub tau: f64,
    pub min_support: u64,
    pub counts: [u64; BINS],
    pub supports: [u64; BINS],
    pub probs: [Option<f64>; BINS],
}

/// Pool `C_b` and `M_b` over every trace in `class`.
pub fn pooled_bin_probability(
    traces: &[&Trace],
    tau: f64,
    class: Class,
    min_support: u64,
) -> Result<PooledBinProfile> {
    let mut counts = [0u64; BINS];
    let mut supports = [0u64; BINS];
    for trace in traces.iter().filter(|t| class.matches(t)) {
        if trace.total_words == 0 {
            continue;
        }
        let profile = bin_profile(trace, tau)?;
        for b in 0..BINS {
            counts[b] += profile.counts[b];
            supports[b] += profile.supports[b];
        }
    }
    let mut probs = [None; BINS];
    for b in 0..BINS {
        if supports[b] > 0 && supports[b] >= min_support {
            probs[b] = Some(counts[b] as f64 / supports[b] as f64);
        }
    }
    Ok(PooledBinProfile {
        class,
        tau,
        min_support,
        counts,
        supports,
        probs,
    })
}

/// Count multi-burst starts per progress bin: for each burst of size >= 2,
/// the bin of its first event's depth is incremented.
pub fn burst_start_profile(trace: &Trace, tau: f64, gap: u64) -> [u64; BINS] {
    let depths: Vec<u64> = qualifying_events(trace, tau, None)
        .iter()
        .map(|e| e.depth)
        .collect();
    let partition = burst_partition(&depths, gap)
        .expect("event depths from one trace are strictly increasing and gap is validated upstream");
    let mut bins = [0u64; BINS];
    for burst in &partition.bursts {
        if burst.len() >= 2 {
            bins[bin_index(burst[0], trace.total_words)] += 1;
        }
    }
    bins
}

/// Normalized bin centers 0.025, 0.075, ..., 0.975.
pub fn bin_centers() -> [f64; BINS] {
    let mut centers = [0.0; BINS];
    for (b, c) in centers.iter_mut().enumerate() {
        *c = (b as f64 + 0.5) / BINS as f64;
    }
    centers
}

/// Ordinary-least-squares slope of `p_b` regressed on the bin centers.
/// Empty bins contribute p_b = 0.
pub fn profile_slope(profile: &BinProfile) -> f64 {
    slope_of(&profile.probs)
}

pub(crate) fn slope_of(probs: &[f64; BINS]) -> f64 {
    let centers = bin_centers();
    let x_mean = 0.5;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for b in 0..BINS {
        let dx = centers[b] - x_mean;
        numerator += dx * probs[b];
        denominator += dx * dx;
    }
    numerator / denominator
}

/// Mean per-bin probability over the second half of the trace
/// (1-indexed bins 11..=20).
pub fn late_mean(profile: &BinProfile) -> f64 {
    profile.probs[BINS / 2..].iter().sum::<f64>() / (BINS / 2) as f64
}

/// Mean wrong-class profile minus mean correct-class profile at `tau`,
/// computed over traces whose question differs from `excluded_question`.
pub fn wrong_direction_vector(
    traces: &[&Trace],
    excluded_question: &str,
    tau: f64,
) -> Result<DirectionVector> {
    let mut correct_sum = [0.0f64; BINS];
    let mut wrong_sum = [0.0f64; BINS];
    let mut correct_n = 0usize;
    let mut wrong_n = 0usize;
    for trace in traces.iter().filter(|t| t.question_id != excluded_question) {
        // word-free traces contribute an all-zero profile
        let probs = if trace.total_words == 0 {
            [0.0; BINS]
        } else {
            bin_profile(trace, tau)?.probs
        };
        let (sum, n) = if trace.correct {
            (&mut correct_sum, &mut correct_n)
        } else {
            (&mut wrong_sum, &mut wrong_n)
        };
        for b in 0..BINS {
            sum[b] += probs[b];
        }
        *n += 1;
    }
    if correct_n == 0 || wrong_n == 0 {
        return Err(Error::domain(format!(
            "direction vector needs both classes after excluding {excluded_question} \
             (correct: {correct_n}, wrong: {wrong_n})"
        )));
    }
    let mut u = [0.0f64; BINS];
    for b in 0..BINS {
        u[b] = wrong_sum[b] / wrong_n as f64 - correct_sum[b] / correct_n as f64;
    }
    Ok(DirectionVector {
        u,
        excluded_question: excluded_question.to_string(),
        tau,
    })
}

/// Cosine similarity between a profile vector and a direction vector;
/// 0 when either has zero norm.
pub fn profile_similarity(p: &[f64; BINS], direction: &DirectionVector) -> f64 {
    let dot: f64 = p.iter().zip(direction.u.iter()).map(|(a, b)| a * b).sum();
    let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u_norm = direction.u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if p_norm == 0.0 || u_norm == 0.0 {
        return 0.0;
    }
    dot / (p_norm * u_norm)
}

/// One score-decade bucket of scored segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityBucket {
    pub lo: f64,
    pub hi: f64,
    pub segment_count: usize,
    pub correct_count: usize,
    pub wrong_count: usize,
    pub median_score: f64,
    pub median_words: f64,
}

/// Bucket every scored segment by score, splitting counts by trace
/// correctness. Only non-empty buckets are returned, ordered by `lo`.
pub fn severity_buckets(corpus: &Corpus, bucket_width: f64) -> Vec<SeverityBucket> {
    if bucket_width <= 0.0 {
        return Vec::new();
    }
    let bucket_count = (100.0 / bucket_width).ceil() as usize;
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); bucket_count];
    let mut words: Vec<Vec<f64>> = vec![Vec::new(); bucket_count];
    let mut correct: Vec<usize> = vec![0; bucket_count];
    let mut wrong: Vec<usize> = vec![0; bucket_count];
    for trace in &corpus.traces {
        for segment in trace.scored_segments() {
            let score = segment.backtrack_score.expect("scored segment");
            let bucket = ((score / bucket_width) as usize).min(bucket_count - 1);
            scores[bucket].push(score);
            words[bucket].push(segment.word_count as f64);
            if trace.correct {
                correct[bucket] += 1;
            } else {
                wrong[bucket] += 1;
            }
        }
    }
    (0..bucket_count)
        .filter(|&b| !scores[b].is_empty())
        .map(|b| SeverityBucket {
            lo: b as f64 * bucket_width,
            hi: ((b + 1) as f64 * bucket_width).min(100.0),
            segment_count: scores[b].len(),
            correct_count: correct[b],
            wrong_count: wrong[b],
            median_score: util::median(&mut scores[b].clone()).expect("bucket non-empty"),
            median_words: util::median(&mut words[b].clone()).expect("bucket non-empty"),
        })
        .collect()
}
