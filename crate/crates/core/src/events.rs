//! Qualifying backtrack events, burden counts and rates, gap-based burst
//! partitions, and per-trace / per-class burst statistics.

use serde::Serialize;

use crate::corpus::{Class, Corpus, Trace};
use crate::error::{Error, Result};

/// Default burst-gap parameter in words.
pub const DEFAULT_GAP: u64 = 500;

/// A scored segment whose backtrack-confidence score met the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualifyingEvent {
    pub segment_index: usize,
    /// Start depth of the segment in reasoning words.
    pub depth: u64,
    pub score: f64,
}

/// All scored segments with score >= `tau` and start depth strictly below
/// `depth_limit` (the full trace when `None`), in segment order.
pub fn qualifying_events(trace: &Trace, tau: f64, depth_limit: Option<u64>) -> Vec<QualifyingEvent> {
    let limit = depth_limit.unwrap_or(trace.total_words);
    trace
        .segments
        .iter()
        .filter(|s| s.start_depth < limit)
        .filter_map(|s| {
            s.backtrack_score.and_then(|score| {
                (score >= tau).then_some(QualifyingEvent {
                    segment_index: s.index,
                    depth: s.start_depth,
                    score,
                })
            })
        })
        .collect()
}

/// Event count before `depth`.
pub fn event_count(trace: &Trace, tau: f64, depth_limit: Option<u64>) -> u64 {
    qualifying_events(trace, tau, depth_limit).len() as u64
}

/// Thresholded backtrack rate per 1000 words over the first `depth` words.
pub fn backtrack_rate(trace: &Trace, tau: f64, depth: u64) -> Result<f64> {
    if depth == 0 {
        return Err(Error::domain("backtrack_rate requires depth > 0"));
    }
    Ok(1000.0 * event_count(trace, tau, Some(depth)) as f64 / depth as f64)
}

/// Gap-based grouping of sorted event depths.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstPartition {
    pub gap: u64,
    pub bursts: Vec<Vec<u64>>,
}

impl BurstPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.bursts.iter().map(|b| b.len()).collect()
    }

    pub fn event_count(&self) -> usize {
        self.bursts.iter().map(|b| b.len()).sum()
    }
}

/// Greedy left-to-right grouping: consecutive depths stay in one burst
/// while their gap is at most `gap` words.
pub fn burst_partition(depths: &[u64], gap: u64) -> Result<BurstPartition> {
    if gap == 0 {
        return Err(Error::domain("burst gap must be positive"));
    }
    for pair in depths.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::domain(
                "burst_partition requires strictly increasing depths",
            ));
        }
    }
    let mut bursts: Vec<Vec<u64>> = Vec::new();
    for &depth in depths {
        match bursts.last_mut() {
            Some(current) if depth - *current.last().expect("burst never empty") <= gap => {
                current.push(depth);
            }
            _ => bursts.push(vec![depth]),
        }
    }
    Ok(BurstPartition { gap, bursts })
}

/// Per-trace burst summary. All fields are zero for event-free traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BurstStats {
    /// Qualifying-event count.
    pub n: u64,
    /// Burst count.
    pub j: u64,
    /// Multi-burst count (size >= 2).
    pub k2: u64,
    /// Dense-burst count (size >= 3).
    pub k3: u64,
    /// Share of qualifying events inside multi-bursts.
    pub s2: f64,
    /// Share of qualifying events inside dense bursts.
    pub s3: f64,
    /// Compression ratio n / J.
    pub rho: f64,
    /// Maximum burst size.
    pub m_max: u64,
}

impl BurstStats {
    pub const ZERO: BurstStats = BurstStats {
        n: 0,
        j: 0,
        k2: 0,
        k3: 0,
        s2: 0.0,
        s3: 0.0,
        rho: 0.0,
        m_max: 0,
    };
}

/// Summarize a partition into burst statistics.
pub fn burst_stats(partition: &BurstPartition) -> BurstStats {
    let n = partition.event_count() as u64;
    if n == 0 {
        return BurstStats::ZERO;
    }
    let sizes = partition.sizes();
    let j = sizes.len() as u64;
    let k2 = sizes.iter().filter(|&&m| m >= 2).count() as u64;
    let k3 = sizes.iter().filter(|&&m| m >= 3).count() as u64;
    let multi_events: usize = sizes.iter().filter(|&&m| m >= 2).sum();
    let dense_events: usize = sizes.iter().filter(|&&m| m >= 3).sum();
    BurstStats {
        n,
        j,
        k2,
        k3,
        s2: multi_events as f64 / n as f64,
        s3: dense_events as f64 / n as f64,
        rho: n as f64 / j as f64,
        m_max: *sizes.iter().max().expect("n > 0 implies at least one burst") as u64,
    }
}

/// Qualifying events, partition, and stats for one trace in one call.
pub fn trace_burst_stats(
    trace: &Trace,
    tau: f64,
    gap: u64,
    depth_limit: Option<u64>,
) -> Result<BurstStats> {
    let depths: Vec<u64> = qualifying_events(trace, tau, depth_limit)
        .iter()
        .map(|e| e.depth)
        .collect();
    Ok(burst_stats(&burst_partition(&depths, gap)?))
}

/// Arithmetic means of each [`BurstStats`] field over a set of traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BurstStatsMean {
    pub traces: usize,
    pub n: f64,
    pub j: f64,
    pub k2: f64,
    pub k3: f64,
    pub s2: f64,
    pub s3: f64,
    pub rho: f64,
    pub m_max: f64,
}

/// Class means of burst statistics; a class with no traces is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMeans {
    pub correct: Option<BurstStatsMean>,
    pub wrong: Option<BurstStatsMean>,
}

impl ClassMeans {
    pub fn class(&self, class: Class) -> Option<BurstStatsMean> {
        match class {
            Class::Correct => self.correct,
            Class::Wrong => self.wrong,
        }
    }
}

fn mean_stats(stats: &[BurstStats]) -> Option<BurstStatsMean> {
    if stats.is_empty() {
        return None;
    }
    let count = stats.len() as f64;
    Some(BurstStatsMean {
        traces: stats.len(),
        n: stats.iter().map(|s| s.n as f64).sum::<f64>() / count,
        j: stats.iter().map(|s| s.j as f64).sum::<f64>() / count,
        k2: stats.iter().map(|s| s.k2 as f64).sum::<f64>() / count,
        k3: stats.iter().map(|s| s.k3 as f64).sum::<f64>() / count,
        s2: stats.iter().map(|s| s.s2).sum::<f64>() / count,
        s3: stats.iter().map(|s| s.s3).sum::<f64>() / count,
        rho: stats.iter().map(|s| s.rho).sum::<f64>() / count,
        m_max: stats.iter().map(|s| s.m_max as f64).sum::<f64>() / count,
    })
}

/// Per-class mean burst statistics at one threshold and gap.
pub fn class_means(corpus: &Corpus, tau: f64, gap: u64) -> Result<ClassMeans> {
    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    for trace in &corpus.traces {
        let stats = trace_burst_stats(trace, tau, gap, None)?;
        if trace.correct {
            correct.push(stats);
        } else {
            wrong.push(stats);
        }
    }
    Ok(ClassMeans {
        correct: mean_stats(&correct),
        wrong: mean_stats(&wrong),
    })
}

/// The four work-level threshold regimes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdRegime {
    pub level: u8,
    pub thresholds: Vec<u32>,
}

impl ThresholdRegime {
    pub fn level(level: u8) -> Option<ThresholdRegime> {
        let thresholds = match level {
            1 => vec![10],
            2 => vec![20, 30, 40],
            3 => vec![50, 60],
            4 => vec![70],
            _ => return None,
        };
        Some(ThresholdRegime { level, thresholds })
    }

    pub fn all() -> Vec<ThresholdRegime> {
        (1..=4).map(|l| ThresholdRegime::level(l).expect("levels 1..=4 exist")).collect()
    }

    /// Every threshold across all regimes, ascending.
    pub fn all_thresholds() -> Vec<u32> {
        ThresholdRegime::all()
            .into_iter()
            .flat_map(|r| r.thresholds)
            .collect()
    }
}
